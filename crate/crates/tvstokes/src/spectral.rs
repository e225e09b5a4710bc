//! Cosine-transform machinery and the pseudoinverse of the grid Laplacian.
//!
//! The discrete Laplacian built from the forward/backward stencils is
//! diagonalized by the orthogonal type-II cosine basis: transforming, dividing
//! by the spectral symbol `-(sigma_i^2 + sigma_j^2)` (with the constant mode
//! annihilated) and transforming back yields its Moore-Penrose inverse. The
//! transform is realized by explicit multiplication with a cached matrix so
//! that arbitrary row/column blocks can be sliced out, which is what keeps the
//! localized evaluation's working set proportional to tile size.

use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::GridSpec;
use crate::tiling::TilingTriple;

/// Cached `n x n` orthogonal cosine matrix.
#[derive(Debug, Clone)]
pub struct DctPlan {
    n: usize,
    mat: Array2<f64>,
}

impl DctPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGrid("transform size must be >= 1".into()));
        }
        let norm0 = (1.0 / n as f64).sqrt();
        let norm = (2.0 / n as f64).sqrt();
        let mat = Array2::from_shape_fn((n, n), |(k, l)| {
            if k == 0 {
                norm0
            } else {
                norm * ((k as f64) * (2 * l + 1) as f64 * std::f64::consts::PI / (2.0 * n as f64))
                    .cos()
            }
        });
        Ok(Self { n, mat })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.mat
    }

    /// Zero-copy view of rows `rows` and columns `cols` (inclusive bounds).
    pub fn block(&self, rows: (usize, usize), cols: (usize, usize)) -> Result<ArrayView2<'_, f64>> {
        if rows.1 >= self.n || cols.1 >= self.n || rows.0 > rows.1 || cols.0 > cols.1 {
            return Err(Error::RectOutOfBounds {
                rect: format!("[{}..={}, {}..={}]", rows.0, rows.1, cols.0, cols.1),
                rows: self.n,
                cols: self.n,
            });
        }
        Ok(self.mat.slice(s![rows.0..=rows.1, cols.0..=cols.1]))
    }
}

/// Spectral symbol values `sigma_{N,i} = (2/h) sin((i pi) / (2 N))`, one
/// vector per axis. `sigma[0] = 0` (constants), positive and nondecreasing
/// afterwards.
#[derive(Debug, Clone)]
pub struct SpectralDiag {
    sigma_row: Vec<f64>,
    sigma_col: Vec<f64>,
    h: f64,
}

impl SpectralDiag {
    pub fn new(grid: &GridSpec) -> Self {
        let sig = |n: usize| {
            (0..n)
                .map(|i| 2.0 / grid.h * (i as f64 * std::f64::consts::PI / (2.0 * n as f64)).sin())
                .collect::<Vec<_>>()
        };
        Self {
            sigma_row: sig(grid.rows),
            sigma_col: sig(grid.cols),
            h: grid.h,
        }
    }

    pub fn sigma_row(&self) -> &[f64] {
        &self.sigma_row
    }

    pub fn sigma_col(&self) -> &[f64] {
        &self.sigma_col
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Pseudoinverse multiplier at global mode `(i, j)`: zero for the constant
    /// mode, `-1 / (sigma_row[i]^2 + sigma_col[j]^2)` otherwise.
    #[inline]
    pub fn pinv_multiplier(&self, i: usize, j: usize) -> f64 {
        if i == 0 && j == 0 {
            0.0
        } else {
            let s = self.sigma_row[i] * self.sigma_row[i] + self.sigma_col[j] * self.sigma_col[j];
            -1.0 / s
        }
    }
}

/// 2D cosine transform `C_rows * d * C_cols^T`.
pub fn dct2(d: &ScalarField, row_plan: &DctPlan, col_plan: &DctPlan) -> Result<ScalarField> {
    check_plans(d, row_plan, col_plan)?;
    let out = row_plan.mat.dot(d.values()).dot(&col_plan.mat.t());
    ScalarField::from_values(*d.grid(), out)
}

/// Inverse 2D cosine transform `C_rows^T * d * C_cols`.
pub fn idct2(d: &ScalarField, row_plan: &DctPlan, col_plan: &DctPlan) -> Result<ScalarField> {
    check_plans(d, row_plan, col_plan)?;
    let out = row_plan.mat.t().dot(d.values()).dot(&col_plan.mat);
    ScalarField::from_values(*d.grid(), out)
}

fn check_plans(d: &ScalarField, row_plan: &DctPlan, col_plan: &DctPlan) -> Result<()> {
    if d.grid().rows != row_plan.n || d.grid().cols != col_plan.n {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", row_plan.n, col_plan.n),
            found: format!("{}x{}", d.grid().rows, d.grid().cols),
        });
    }
    Ok(())
}

/// Moore-Penrose inverse of the grid Laplacian, full-grid and blockwise.
#[derive(Debug, Clone)]
pub struct DctLaplacian {
    grid: GridSpec,
    row_plan: DctPlan,
    col_plan: DctPlan,
    diag: SpectralDiag,
}

/// Working-set statistics for a blockwise evaluation, counted in f64 slots.
#[derive(Debug, Clone, Copy, Default)]
pub struct BlockWorkStats {
    pub peak_scalars: usize,
}

impl DctLaplacian {
    pub fn new(grid: GridSpec) -> Result<Self> {
        Ok(Self {
            row_plan: DctPlan::new(grid.rows)?,
            col_plan: DctPlan::new(grid.cols)?,
            diag: SpectralDiag::new(&grid),
            grid,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn row_plan(&self) -> &DctPlan {
        &self.row_plan
    }

    pub fn col_plan(&self) -> &DctPlan {
        &self.col_plan
    }

    pub fn diag(&self) -> &SpectralDiag {
        &self.diag
    }

    /// `pinv(laplacian)` applied to `d`: transform, divide by the spectral
    /// symbol with the constant mode mapped to zero, transform back.
    pub fn pinv(&self, d: &ScalarField) -> Result<ScalarField> {
        let mut hat = dct2(d, &self.row_plan, &self.col_plan)?;
        {
            let v = hat.values_mut();
            for i in 0..self.grid.rows {
                for j in 0..self.grid.cols {
                    v[[i, j]] *= self.diag.pinv_multiplier(i, j);
                }
            }
        }
        idct2(&hat, &self.row_plan, &self.col_plan)
    }

    /// Restriction of the pseudoinverse applied to a zero-extended block:
    /// takes `d_k` living on the triple's source tile and returns the result
    /// on the target tile, touching only per-tile intermediates. Summands are
    /// accumulated in row-major tile order so results are reproducible.
    pub fn pinv_block(&self, d_k: &ScalarField, tilings: &TilingTriple) -> Result<ScalarField> {
        self.pinv_block_with_stats(d_k, tilings).map(|(f, _)| f)
    }

    pub fn pinv_block_with_stats(
        &self,
        d_k: &ScalarField,
        tilings: &TilingTriple,
    ) -> Result<(ScalarField, BlockWorkStats)> {
        let a = tilings.source_rect();
        let b = tilings.target_rect();
        if d_k.grid().rows != a.rows() || d_k.grid().cols != a.cols() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} (source tile)", a.rows(), a.cols()),
                found: format!("{}x{}", d_k.grid().rows, d_k.grid().cols),
            });
        }
        let mut acc = Array2::<f64>::zeros((b.rows(), b.cols()));
        let mut stats = BlockWorkStats::default();
        let a_rows = (a.row_start, a.row_end);
        let a_cols = (a.col_start, a.col_end);
        let b_rows = (b.row_start, b.row_end);
        let b_cols = (b.col_start, b.col_end);
        for ly in 0..tilings.spectral.tiles_y() {
            for lx in 0..tilings.spectral.tiles_x() {
                let t_rows = tilings.spectral.rows().range(ly);
                let t_cols = tilings.spectral.cols().range(lx);
                let fwd_row = self.row_plan.block(t_rows, a_rows)?;
                let fwd_col = self.col_plan.block(t_cols, a_cols)?;
                let bwd_row = self.row_plan.block(t_rows, b_rows)?;
                let bwd_col = self.col_plan.block(t_cols, b_cols)?;

                let mut hat = fwd_row.dot(d_k.values()).dot(&fwd_col.t());
                for (li, mut row) in hat.outer_iter_mut().enumerate() {
                    let gi = t_rows.0 + li;
                    for (lj, v) in row.iter_mut().enumerate() {
                        *v *= self.diag.pinv_multiplier(gi, t_cols.0 + lj);
                    }
                }
                let partial = bwd_row.t().dot(&hat).dot(&bwd_col);

                // Live buffers this summand: accumulator + spectral tile +
                // the two matmul temporaries of the same footprints.
                let live = acc.len() + 2 * hat.len() + partial.len();
                stats.peak_scalars = stats.peak_scalars.max(live);
                acc += &partial;
            }
        }
        let out = ScalarField::from_values(
            GridSpec {
                rows: b.rows(),
                cols: b.cols(),
                h: self.grid.h,
            },
            acc,
        )?;
        Ok((out, stats))
    }
}
