//! Orthogonal projection onto the divergence-free subspace.
//!
//! The projector is `I - grad pinv(laplacian) div`, evaluated through the
//! cosine-transform pseudoinverse. [`DivFreeProjector::project`] is the
//! full-grid reference path; [`project_local`] evaluates the restriction
//! `R_target P E_source` of the same operator between two padded subdomain
//! rectangles so every intermediate lives on a single tile.

use crate::error::{Error, Result};
use crate::field::{ScalarField, TensorField2x2, VectorField2};
use crate::grid::{GridSpec, SubdomainRect};
use crate::ops;
use crate::spectral::DctLaplacian;
use crate::tiling::TilingTriple;

#[derive(Debug, Clone)]
pub struct DivFreeProjector {
    lap: DctLaplacian,
}

impl DivFreeProjector {
    pub fn new(grid: GridSpec) -> Result<Self> {
        Ok(Self {
            lap: DctLaplacian::new(grid)?,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.lap.grid()
    }

    pub fn laplacian(&self) -> &DctLaplacian {
        &self.lap
    }

    /// `P w = w - grad(pinv(laplacian)(div w))`. Idempotent and self-adjoint;
    /// the image has vanishing discrete divergence.
    pub fn project(&self, w: &VectorField2) -> Result<VectorField2> {
        if w.grid() != self.grid() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.grid().rows, self.grid().cols),
                found: format!("{}x{}", w.grid().rows, w.grid().cols),
            });
        }
        let potential = self.lap.pinv(&ops::div(w))?;
        w.sub(&ops::grad(&potential))
    }
}

/// Places the values of `f` (living on `from`) into a `to`-shaped zero field
/// wherever the rectangles overlap: `R_to E_from f` in one step.
pub(crate) fn reframe_scalar(
    f: &ScalarField,
    from: &SubdomainRect,
    to: &SubdomainRect,
) -> ScalarField {
    debug_assert_eq!((f.grid().rows, f.grid().cols), (from.rows(), from.cols()));
    let mut out = ScalarField::zeros(GridSpec {
        rows: to.rows(),
        cols: to.cols(),
        h: f.grid().h,
    });
    if let Some(ov) = from.intersect(to) {
        let src = f.values().slice(ndarray::s![
            ov.row_start - from.row_start..=ov.row_end - from.row_start,
            ov.col_start - from.col_start..=ov.col_end - from.col_start
        ]);
        out.values_mut()
            .slice_mut(ndarray::s![
                ov.row_start - to.row_start..=ov.row_end - to.row_start,
                ov.col_start - to.col_start..=ov.col_end - to.col_start
            ])
            .assign(&src);
    }
    out
}

pub(crate) fn reframe_vector(
    f: &VectorField2,
    from: &SubdomainRect,
    to: &SubdomainRect,
) -> VectorField2 {
    VectorField2::new(
        reframe_scalar(f.x(), from, to),
        reframe_scalar(f.y(), from, to),
    )
    .expect("components share grid")
}

pub(crate) fn reframe_tensor(
    f: &TensorField2x2,
    from: &SubdomainRect,
    to: &SubdomainRect,
) -> TensorField2x2 {
    TensorField2x2::new(
        reframe_vector(f.row1(), from, to),
        reframe_vector(f.row2(), from, to),
    )
    .expect("rows share grid")
}

/// Evaluates `R_target P E_source w` for `w` on the source halo rectangle,
/// returning a field on the target halo rectangle. The divergence and
/// gradient act on single tiles (their zero-extension identities make that
/// exact), and the pseudoinverse goes through the blockwise transform, so the
/// working set stays proportional to the largest tile.
pub fn project_local(
    lap: &DctLaplacian,
    tilings: &TilingTriple,
    w: &VectorField2,
) -> Result<VectorField2> {
    let grid = lap.grid();
    let source_tile = tilings.source_rect();
    let target_tile = tilings.target_rect();
    let source_halo = source_tile.shrink_rb(grid)?;
    let target_halo = target_tile.shrink_rb(grid)?;
    tilings.validate(grid, &source_halo, &target_halo)?;
    if (w.grid().rows, w.grid().cols) != (source_halo.rows(), source_halo.cols()) {
        return Err(Error::ShapeMismatch {
            expected: format!(
                "{}x{} (source halo)",
                source_halo.rows(),
                source_halo.cols()
            ),
            found: format!("{}x{}", w.grid().rows, w.grid().cols),
        });
    }

    // div on the padded source tile; exact because w is supported in the
    // tile's shrunk interior.
    let padded = reframe_vector(w, &source_halo, &source_tile);
    let divergence = ops::div(&padded);
    let potential = lap.pinv_block(&divergence, tilings)?;
    // grad on the target tile; exact on the shrunk interior we return.
    let gradient = ops::grad(&potential);
    let correction = reframe_vector(&gradient, &target_tile, &target_halo);
    let identity = reframe_vector(w, &source_halo, &target_halo);
    identity.sub(&correction)
}
