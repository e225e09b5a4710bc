//! Discrete function spaces on rectangular grids.
//!
//! A [`ScalarField`] is a real-valued function on a grid, a [`VectorField2`]
//! holds two co-located scalar components, and a [`TensorField2x2`] is a pair
//! of vector fields (the dual variable of the tangent smoothing problem).
//! Inner products and norms carry the `h^2` area weight. Fields are plain
//! values: every operation returns a new field and never mutates its inputs.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, SubdomainRect};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Array2<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            values: Array2::zeros((grid.rows, grid.cols)),
            grid,
        }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            values: Array2::from_elem((grid.rows, grid.cols), value),
            grid,
        }
    }

    pub fn from_values(grid: GridSpec, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (grid.rows, grid.cols) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", grid.rows, grid.cols),
                found: format!("{}x{}", values.dim().0, values.dim().1),
            });
        }
        Ok(Self { grid, values })
    }

    /// Builds a field from `f(i, j)` over 0-based row/column indices.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        Self {
            values: Array2::from_shape_fn((grid.rows, grid.cols), |(i, j)| f(i, j)),
            grid,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn same_shape(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} (h={})", self.grid.rows, self.grid.cols, self.grid.h),
                found: format!(
                    "{}x{} (h={})",
                    other.grid.rows, other.grid.cols, other.grid.h
                ),
            });
        }
        Ok(())
    }

    /// h-weighted inner product `h^2 * sum(u .* v)`.
    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        self.same_shape(other)?;
        let s: f64 = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b)
            .sum();
        Ok(self.grid.h * self.grid.h * s)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).expect("same field").sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.values.sum() / self.grid.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.mapv(f),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        self.same_shape(other)?;
        let mut values = self.values.clone();
        values.zip_mut_with(&other.values, |a, &b| *a = f(*a, b));
        Ok(ScalarField {
            grid: self.grid,
            values,
        })
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    /// Values on `rect`; the restricted field keeps the mesh width.
    pub fn restrict(&self, rect: &SubdomainRect) -> Result<ScalarField> {
        if !rect.fits_in(&self.grid) {
            return Err(Error::RectOutOfBounds {
                rect: rect.to_string(),
                rows: self.grid.rows,
                cols: self.grid.cols,
            });
        }
        let values = self
            .values
            .slice(ndarray::s![
                rect.row_start..=rect.row_end,
                rect.col_start..=rect.col_end
            ])
            .to_owned();
        Ok(ScalarField {
            grid: GridSpec {
                rows: rect.rows(),
                cols: rect.cols(),
                h: self.grid.h,
            },
            values,
        })
    }

    /// Zero-extension: values of `self` on `rect`, zero elsewhere in `parent`.
    pub fn extend(&self, rect: &SubdomainRect, parent: GridSpec) -> Result<ScalarField> {
        if !rect.fits_in(&parent) {
            return Err(Error::RectOutOfBounds {
                rect: rect.to_string(),
                rows: parent.rows,
                cols: parent.cols,
            });
        }
        if (self.grid.rows, self.grid.cols) != (rect.rows(), rect.cols()) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", rect.rows(), rect.cols()),
                found: format!("{}x{}", self.grid.rows, self.grid.cols),
            });
        }
        let mut out = Array2::zeros((parent.rows, parent.cols));
        out.slice_mut(ndarray::s![
            rect.row_start..=rect.row_end,
            rect.col_start..=rect.col_end
        ])
        .assign(&self.values);
        Ok(ScalarField {
            grid: parent,
            values: out,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    x: ScalarField,
    y: ScalarField,
}

impl VectorField2 {
    pub fn new(x: ScalarField, y: ScalarField) -> Result<Self> {
        x.same_shape(&y)?;
        Ok(Self { x, y })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            x: ScalarField::zeros(grid),
            y: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.x.grid()
    }

    pub fn x(&self) -> &ScalarField {
        &self.x
    }

    pub fn y(&self) -> &ScalarField {
        &self.y
    }

    pub fn components(&self) -> [&ScalarField; 2] {
        [&self.x, &self.y]
    }

    pub fn inner(&self, other: &VectorField2) -> Result<f64> {
        Ok(self.x.inner(&other.x)? + self.y.inner(&other.y)?)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).expect("same field").sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn add(&self, other: &VectorField2) -> Result<VectorField2> {
        Ok(VectorField2 {
            x: self.x.add(&other.x)?,
            y: self.y.add(&other.y)?,
        })
    }

    pub fn sub(&self, other: &VectorField2) -> Result<VectorField2> {
        Ok(VectorField2 {
            x: self.x.sub(&other.x)?,
            y: self.y.sub(&other.y)?,
        })
    }

    pub fn scale(&self, c: f64) -> VectorField2 {
        VectorField2 {
            x: self.x.scale(c),
            y: self.y.scale(c),
        }
    }

    /// Pointwise multiplication of both components by a scalar weight field.
    pub fn weight(&self, w: &ScalarField) -> Result<VectorField2> {
        Ok(VectorField2 {
            x: self.x.zip_map(w, |a, b| a * b)?,
            y: self.y.zip_map(w, |a, b| a * b)?,
        })
    }

    /// Pointwise Euclidean magnitude `sqrt(x^2 + y^2)`.
    pub fn magnitude(&self) -> ScalarField {
        self.x
            .zip_map(&self.y, |a, b| (a * a + b * b).sqrt())
            .expect("components share grid")
    }

    pub fn restrict(&self, rect: &SubdomainRect) -> Result<VectorField2> {
        Ok(VectorField2 {
            x: self.x.restrict(rect)?,
            y: self.y.restrict(rect)?,
        })
    }

    pub fn extend(&self, rect: &SubdomainRect, parent: GridSpec) -> Result<VectorField2> {
        Ok(VectorField2 {
            x: self.x.extend(rect, parent)?,
            y: self.y.extend(rect, parent)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorField2x2 {
    row1: VectorField2,
    row2: VectorField2,
}

impl TensorField2x2 {
    pub fn new(row1: VectorField2, row2: VectorField2) -> Result<Self> {
        row1.x().same_shape(row2.x())?;
        Ok(Self { row1, row2 })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            row1: VectorField2::zeros(grid),
            row2: VectorField2::zeros(grid),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.row1.grid()
    }

    pub fn row1(&self) -> &VectorField2 {
        &self.row1
    }

    pub fn row2(&self) -> &VectorField2 {
        &self.row2
    }

    pub fn rows(&self) -> [&VectorField2; 2] {
        [&self.row1, &self.row2]
    }

    pub fn inner(&self, other: &TensorField2x2) -> Result<f64> {
        Ok(self.row1.inner(&other.row1)? + self.row2.inner(&other.row2)?)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).expect("same field").sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.row1.is_finite() && self.row2.is_finite()
    }

    pub fn add(&self, other: &TensorField2x2) -> Result<TensorField2x2> {
        Ok(TensorField2x2 {
            row1: self.row1.add(&other.row1)?,
            row2: self.row2.add(&other.row2)?,
        })
    }

    pub fn sub(&self, other: &TensorField2x2) -> Result<TensorField2x2> {
        Ok(TensorField2x2 {
            row1: self.row1.sub(&other.row1)?,
            row2: self.row2.sub(&other.row2)?,
        })
    }

    pub fn scale(&self, c: f64) -> TensorField2x2 {
        TensorField2x2 {
            row1: self.row1.scale(c),
            row2: self.row2.scale(c),
        }
    }

    pub fn weight(&self, w: &ScalarField) -> Result<TensorField2x2> {
        Ok(TensorField2x2 {
            row1: self.row1.weight(w)?,
            row2: self.row2.weight(w)?,
        })
    }

    /// Largest pointwise row magnitude over both rows.
    pub fn max_row_magnitude(&self) -> f64 {
        self.row1
            .magnitude()
            .max_abs()
            .max(self.row2.magnitude().max_abs())
    }

    pub fn restrict(&self, rect: &SubdomainRect) -> Result<TensorField2x2> {
        Ok(TensorField2x2 {
            row1: self.row1.restrict(rect)?,
            row2: self.row2.restrict(rect)?,
        })
    }

    pub fn extend(&self, rect: &SubdomainRect, parent: GridSpec) -> Result<TensorField2x2> {
        Ok(TensorField2x2 {
            row1: self.row1.extend(rect, parent)?,
            row2: self.row2.extend(rect, parent)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn grid(rows: usize, cols: usize, h: f64) -> GridSpec {
        GridSpec::new(rows, cols, h).unwrap()
    }

    #[test]
    fn inner_product_constant_ones() {
        let g = grid(2, 2, 1.0);
        let u = ScalarField::constant(g, 1.0);
        assert_eq!(u.inner(&u).unwrap(), 4.0);
    }

    #[test]
    fn inner_product_zero_factor() {
        let g = grid(3, 4, 0.7);
        let u = ScalarField::zeros(g);
        let v = ScalarField::from_fn(g, |i, j| (i * 7 + j) as f64);
        assert_eq!(u.inner(&v).unwrap(), 0.0);
    }

    #[test]
    fn inner_product_hand_value() {
        let g = grid(2, 2, 0.5);
        let u = ScalarField::from_values(g, array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let v = ScalarField::from_values(g, array![[4.0, 3.0], [2.0, 1.0]]).unwrap();
        assert!((u.inner(&v).unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn inner_product_shape_error() {
        let u = ScalarField::zeros(grid(2, 2, 1.0));
        let v = ScalarField::zeros(grid(2, 3, 1.0));
        assert!(u.inner(&v).is_err());
    }

    #[test]
    fn restrict_full_rect_is_identity() {
        let g = grid(3, 3, 1.0);
        let u = ScalarField::from_fn(g, |i, j| (i * 3 + j) as f64);
        let r = g.full_rect();
        assert_eq!(u.restrict(&r).unwrap(), u);
    }

    #[test]
    fn restrict_hand_value() {
        let g = grid(2, 2, 1.0);
        let u = ScalarField::from_values(g, array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let r = SubdomainRect::new(0, 0, 0, 1).unwrap();
        assert_eq!(u.restrict(&r).unwrap().values(), &array![[1.0, 2.0]]);
    }

    #[test]
    fn extend_hand_value() {
        let g1 = grid(1, 1, 1.0);
        let u = ScalarField::from_values(g1, array![[5.0]]).unwrap();
        let r = SubdomainRect::new(0, 0, 0, 0).unwrap();
        let out = u.extend(&r, grid(2, 2, 1.0)).unwrap();
        assert_eq!(out.values(), &array![[5.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn restrict_of_extend_is_identity() {
        let g = grid(4, 5, 1.0);
        let r = SubdomainRect::new(1, 2, 2, 4).unwrap();
        let u = ScalarField::from_fn(grid(2, 3, 1.0), |i, j| (i + 2 * j) as f64 - 1.5);
        let back = u.extend(&r, g).unwrap().restrict(&r).unwrap();
        assert_eq!(back.values(), u.values());
    }

    #[test]
    fn extend_restrict_adjoint() {
        // <E u, v>_parent == <u, R v>_rect
        let g = grid(5, 4, 0.5);
        let r = SubdomainRect::new(1, 3, 0, 2).unwrap();
        let u = ScalarField::from_fn(grid(3, 3, 0.5), |i, j| (i as f64 - j as f64) * 0.3 + 0.1);
        let v = ScalarField::from_fn(g, |i, j| ((i * 31 + j * 17) % 7) as f64 * 0.25 - 0.5);
        let lhs = u.extend(&r, g).unwrap().inner(&v).unwrap();
        let rhs = u.inner(&v.restrict(&r).unwrap()).unwrap();
        assert!((lhs - rhs).abs() <= 1e-14 * lhs.abs().max(1.0));
    }

    #[test]
    fn disjoint_tiling_reconstructs_identity() {
        let g = grid(6, 6, 1.0);
        let u = ScalarField::from_fn(g, |i, j| ((i * 13 + j * 7) % 11) as f64 - 5.0);
        let tiles = [
            SubdomainRect::new(0, 2, 0, 3).unwrap(),
            SubdomainRect::new(0, 2, 4, 5).unwrap(),
            SubdomainRect::new(3, 5, 0, 3).unwrap(),
            SubdomainRect::new(3, 5, 4, 5).unwrap(),
        ];
        let mut sum = ScalarField::zeros(g);
        for t in &tiles {
            sum = sum
                .add(&u.restrict(t).unwrap().extend(t, g).unwrap())
                .unwrap();
        }
        assert_eq!(sum.values(), u.values());
    }

    #[test]
    fn vector_field_requires_matching_grids() {
        let a = ScalarField::zeros(grid(2, 2, 1.0));
        let b = ScalarField::zeros(grid(2, 3, 1.0));
        assert!(VectorField2::new(a, b).is_err());
    }
}
