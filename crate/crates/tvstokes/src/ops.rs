//! Finite-difference operators on rectangular grids.
//!
//! Forward differences vanish on the last row/column; backward differences
//! take the value itself at the first index and the negated previous value at
//! the last, which makes `div = -grad*` in the h-weighted inner product. All
//! operators are matrix-free stencils; dense assembly exists only in tests.

use crate::field::{ScalarField, TensorField2x2, VectorField2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Forward difference with zero last entry:
/// `(d[j+1] - d[j]) / h` for `j < N-1`, `0` at `j = N-1` (and likewise in Y).
pub fn forward_diff(d: &ScalarField, axis: Axis) -> ScalarField {
    use ndarray::{s, Array2, Zip};
    let g = *d.grid();
    let v = d.values();
    let inv_h = 1.0 / g.h;
    let mut out = Array2::zeros((g.rows, g.cols));
    match axis {
        Axis::X => {
            if g.cols > 1 {
                let n = g.cols - 1;
                Zip::from(out.slice_mut(s![.., ..n]))
                    .and(v.slice(s![.., 1..]))
                    .and(v.slice(s![.., ..n]))
                    .for_each(|o, &a, &b| *o = (a - b) * inv_h);
            }
        }
        Axis::Y => {
            if g.rows > 1 {
                let n = g.rows - 1;
                Zip::from(out.slice_mut(s![..n, ..]))
                    .and(v.slice(s![1.., ..]))
                    .and(v.slice(s![..n, ..]))
                    .for_each(|o, &a, &b| *o = (a - b) * inv_h);
            }
        }
    }
    ScalarField::from_values(g, out).expect("same shape")
}

/// Backward difference, the negative adjoint of [`forward_diff`]:
/// `d[0]/h` at the first index, `(d[j] - d[j-1])/h` inside, `-d[N-2]/h` at the
/// last. On a single-row/column axis the operator is zero.
pub fn backward_diff(d: &ScalarField, axis: Axis) -> ScalarField {
    use ndarray::{s, Array2, Zip};
    let g = *d.grid();
    let v = d.values();
    let inv_h = 1.0 / g.h;
    let mut out = Array2::zeros((g.rows, g.cols));
    match axis {
        Axis::X => {
            if g.cols == 1 {
                return ScalarField::zeros(g);
            }
            let n = g.cols - 1;
            Zip::from(out.slice_mut(s![.., 0..1]))
                .and(v.slice(s![.., 0..1]))
                .for_each(|o, &a| *o = a * inv_h);
            if n > 1 {
                Zip::from(out.slice_mut(s![.., 1..n]))
                    .and(v.slice(s![.., 1..n]))
                    .and(v.slice(s![.., ..n - 1]))
                    .for_each(|o, &a, &b| *o = (a - b) * inv_h);
            }
            Zip::from(out.slice_mut(s![.., n..]))
                .and(v.slice(s![.., n - 1..n]))
                .for_each(|o, &a| *o = -a * inv_h);
        }
        Axis::Y => {
            if g.rows == 1 {
                return ScalarField::zeros(g);
            }
            let n = g.rows - 1;
            Zip::from(out.slice_mut(s![0..1, ..]))
                .and(v.slice(s![0..1, ..]))
                .for_each(|o, &a| *o = a * inv_h);
            if n > 1 {
                Zip::from(out.slice_mut(s![1..n, ..]))
                    .and(v.slice(s![1..n, ..]))
                    .and(v.slice(s![..n - 1, ..]))
                    .for_each(|o, &a, &b| *o = (a - b) * inv_h);
            }
            Zip::from(out.slice_mut(s![n.., ..]))
                .and(v.slice(s![n - 1..n, ..]))
                .for_each(|o, &a| *o = -a * inv_h);
        }
    }
    ScalarField::from_values(g, out).expect("same shape")
}

/// Backward difference with Neumann boundaries, mapping an `N2 x N1` field to
/// the `(N2+1) x (N1+1)` extended grid. The first and last slices orthogonal
/// to the axis are zero; the extra row (X) or column (Y) mirrors the last one.
pub fn neumann_backward_diff(d: &ScalarField, axis: Axis) -> ScalarField {
    let g = *d.grid();
    let ext = g.extended();
    let v = d.values();
    let inv_h = 1.0 / g.h;
    match axis {
        Axis::X => ScalarField::from_fn(ext, |i, j| {
            if j == 0 || j == g.cols {
                0.0
            } else if i < g.rows {
                (v[[i, j]] - v[[i, j - 1]]) * inv_h
            } else {
                (v[[i - 1, j]] - v[[i - 1, j - 1]]) * inv_h
            }
        }),
        Axis::Y => ScalarField::from_fn(ext, |i, j| {
            if i == 0 || i == g.rows {
                0.0
            } else if j < g.cols {
                (v[[i, j]] - v[[i - 1, j]]) * inv_h
            } else {
                (v[[i, j - 1]] - v[[i - 1, j - 1]]) * inv_h
            }
        }),
    }
}

/// `grad d = (D+_x d, D+_y d)`.
pub fn grad(d: &ScalarField) -> VectorField2 {
    VectorField2::new(forward_diff(d, Axis::X), forward_diff(d, Axis::Y))
        .expect("components share grid")
}

/// `div v = D-_x v_x + D-_y v_y`; satisfies `div = -grad*`.
pub fn div(v: &VectorField2) -> ScalarField {
    backward_diff(v.x(), Axis::X)
        .add(&backward_diff(v.y(), Axis::Y))
        .expect("components share grid")
}

/// Rowwise gradient of a vector field.
pub fn multi_grad(v: &VectorField2) -> TensorField2x2 {
    TensorField2x2::new(grad(v.x()), grad(v.y())).expect("components share grid")
}

/// Rowwise divergence of a tensor field; satisfies `multi_div = -multi_grad*`.
pub fn multi_div(p: &TensorField2x2) -> VectorField2 {
    VectorField2::new(div(p.row1()), div(p.row2())).expect("rows share grid")
}

/// `div(grad(d))`: symmetric negative semidefinite, constants in the kernel.
pub fn laplacian(d: &ScalarField) -> ScalarField {
    div(&grad(d))
}

/// Tangent field of an image: `(-D_y^neum- d, D_x^neum- d)` on the extended
/// grid. Generally not divergence-free, which is why the solver projects it.
pub fn tangent_field(d: &ScalarField) -> VectorField2 {
    VectorField2::new(
        neumann_backward_diff(d, Axis::Y).scale(-1.0),
        neumann_backward_diff(d, Axis::X),
    )
    .expect("components share grid")
}

/// h-weighted norm of `div v`, the divergence residual used to decide whether
/// a tangent field can be integrated to a potential.
pub fn divergence_residual(v: &VectorField2) -> f64 {
    div(v).norm()
}
