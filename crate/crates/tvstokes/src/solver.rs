//! Semi-implicit dual iterations for tangent field smoothing and image
//! reconstruction, plus the primal recovery formulas.
//!
//! All three dual problems minimize `||A p - f||^2` over dual fields whose
//! rows stay in the pointwise unit ball. The iteration
//! `p <- (p + t psi) / (1 + t |psi|)` with `psi = G(A p - f)` keeps the
//! iterate feasible by construction and converges for steps `t <= 1/8` at
//! `h = 1`. The tangent-smoothing data is projected onto the divergence-free
//! subspace once and cached; the energy for the stopping rule reuses the same
//! projected residual that drives the update.

use std::io::Write;

use crate::error::{Error, Result};
use crate::field::{ScalarField, TensorField2x2, VectorField2};
use crate::grid::SubdomainRect;
use crate::ops;
use crate::projection::DivFreeProjector;

/// Divergence residual above which a tangent field is rejected for potential
/// integration (the integral would be path-dependent).
pub const INTEGRATION_DIV_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Tangent-smoothing regularization weight.
    pub delta: f64,
    /// Image-reconstruction fidelity weight (`1/mu`).
    pub alpha: f64,
    /// Smoothing constant for the normalized normal field.
    pub epsilon: f64,
    /// Semi-implicit step size, in `(0, 1/8]`.
    pub step: f64,
    pub max_it: usize,
    /// Stopping threshold `T` on the per-point energy-root decrement.
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            delta: 0.15,
            alpha: 10.0,
            epsilon: 1e-3,
            step: 0.125,
            max_it: 1_000_000,
            tol: 1e-7,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step.is_nan() || self.step <= 0.0 || self.step > 0.125 {
            return Err(Error::InvalidConfig(format!(
                "step must lie in (0, 1/8], got {}",
                self.step
            )));
        }
        for (name, v) in [
            ("delta", self.delta),
            ("alpha", self.alpha),
            ("epsilon", self.epsilon),
        ] {
            if v.is_nan() || v <= 0.0 || v.is_infinite() {
                return Err(Error::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tol must be >= 0, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Dual energies recorded once per iterate, `values[0]` at the zero start.
#[derive(Debug, Clone, Default)]
pub struct EnergyTrace {
    energies: Vec<f64>,
}

impl EnergyTrace {
    pub fn new(energies: Vec<f64>) -> Self {
        Self { energies }
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn push(&mut self, e: f64) {
        self.energies.push(e);
    }

    pub fn last(&self) -> f64 {
        *self.energies.last().expect("non-empty trace")
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Non-increasing up to `slack` per step.
    pub fn is_non_increasing(&self, slack: f64) -> bool {
        self.energies.windows(2).all(|w| w[1] <= w[0] + slack)
    }

    /// CSV rows `iteration,energy,sqrt_energy_delta`; the first row carries a
    /// zero delta.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,energy,sqrt_energy_delta")?;
        let mut prev_sqrt = None;
        for (n, &e) in self.energies.iter().enumerate() {
            let s = e.max(0.0).sqrt();
            let delta = prev_sqrt.map(|p: f64| (p - s).abs()).unwrap_or(0.0);
            writeln!(out, "{n},{e},{delta}")?;
            prev_sqrt = Some(s);
        }
        Ok(())
    }
}

/// `||P multi_div p - tau0_proj / delta||^2` in the h-weighted norm.
/// `tau0_proj` must already be projected.
pub fn tfs_energy(
    proj: &DivFreeProjector,
    p: &TensorField2x2,
    tau0_proj: &VectorField2,
    delta: f64,
) -> Result<f64> {
    let r = tfs_residual(proj, p, &tau0_proj.scale(1.0 / delta))?;
    r.inner(&r)
}

fn tfs_residual(
    proj: &DivFreeProjector,
    p: &TensorField2x2,
    data: &VectorField2,
) -> Result<VectorField2> {
    proj.project(&ops::multi_div(p))?.sub(data)
}

/// One semi-implicit step on a dual row: `(v + t psi) / (1 + t |psi|)` with
/// the pointwise Euclidean magnitude of the row. The denominator is >= 1, so
/// no guard is needed; rows stay inside the unit ball.
fn update_row(v: &VectorField2, psi: &VectorField2, t: f64) -> VectorField2 {
    use ndarray::{Array2, Zip};
    let g = *v.grid();
    let mut denom = Array2::zeros((g.rows, g.cols));
    Zip::from(&mut denom)
        .and(psi.x().values())
        .and(psi.y().values())
        .for_each(|d, &px, &py| *d = 1.0 + t * (px * px + py * py).sqrt());
    let apply = |vc: &ScalarField, pc: &ScalarField| {
        let mut out = Array2::zeros((g.rows, g.cols));
        Zip::from(&mut out)
            .and(vc.values())
            .and(pc.values())
            .and(&denom)
            .for_each(|o, &a, &b, &d| *o = (a + t * b) / d);
        ScalarField::from_values(g, out).expect("same shape")
    };
    VectorField2::new(apply(v.x(), psi.x()), apply(v.y(), psi.y())).expect("same grid")
}

fn update_tensor(p: &TensorField2x2, psi: &TensorField2x2, t: f64) -> TensorField2x2 {
    TensorField2x2::new(
        update_row(p.row1(), psi.row1(), t),
        update_row(p.row2(), psi.row2(), t),
    )
    .expect("rows share grid")
}

/// Dual tangent-field smoothing on the extended grid. Starts from `p = 0`,
/// iterates `psi = multi_grad(P multi_div p - P tau0 / delta)` and the
/// semi-implicit row update, and stops when the energy-root decrement falls
/// under `sqrt(2 |grid|) * tol`. Returns the dual tensor and the energy trace.
pub fn chambolle_tfs(
    proj: &DivFreeProjector,
    tau0: &VectorField2,
    cfg: &SolverConfig,
) -> Result<(TensorField2x2, EnergyTrace)> {
    cfg.validate()?;
    let grid = *tau0.grid();
    let data = proj.project(tau0)?.scale(1.0 / cfg.delta);
    let threshold = (2.0 * grid.len() as f64).sqrt() * cfg.tol;

    let mut p = TensorField2x2::zeros(grid);
    let mut residual = tfs_residual(proj, &p, &data)?;
    let mut trace = EnergyTrace::new(vec![residual.inner(&residual)?]);
    for n in 0..cfg.max_it {
        let psi = ops::multi_grad(&residual);
        p = update_tensor(&p, &psi, cfg.step);
        if !p.is_finite() {
            return Err(Error::NumericalDivergence { iteration: n });
        }
        residual = tfs_residual(proj, &p, &data)?;
        let e = residual.inner(&residual)?;
        let prev = trace.last();
        trace.push(e);
        if (prev.sqrt() - e.sqrt()).abs() < threshold {
            break;
        }
    }
    Ok((p, trace))
}

/// `tau = P tau0 - delta * P multi_div p`, divergence-free up to the
/// projection tolerance.
pub fn recover_tangent(
    proj: &DivFreeProjector,
    p: &TensorField2x2,
    tau0: &VectorField2,
    delta: f64,
) -> Result<VectorField2> {
    proj.project(&tau0.sub(&ops::multi_div(p).scale(delta))?)
}

/// Dual image reconstruction: minimizes `||div p - f||^2` over the unit ball.
/// The caller assembles `f` (`alpha d0 - div xi` or `alpha (d0 - g)`).
pub fn chambolle_ir(f: &ScalarField, cfg: &SolverConfig) -> Result<(VectorField2, EnergyTrace)> {
    cfg.validate()?;
    let grid = *f.grid();
    let threshold = (grid.len() as f64).sqrt() * cfg.tol;

    let mut p = VectorField2::zeros(grid);
    let mut residual = ops::div(&p).sub(f)?;
    let mut trace = EnergyTrace::new(vec![residual.inner(&residual)?]);
    for n in 0..cfg.max_it {
        let psi = ops::grad(&residual);
        p = update_row(&p, &psi, cfg.step);
        if !p.is_finite() {
            return Err(Error::NumericalDivergence { iteration: n });
        }
        residual = ops::div(&p).sub(f)?;
        let e = residual.inner(&residual)?;
        let prev = trace.last();
        trace.push(e);
        if (prev.sqrt() - e.sqrt()).abs() < threshold {
            break;
        }
    }
    Ok((p, trace))
}

fn primal_rect(tau: &VectorField2) -> Result<SubdomainRect> {
    let g = tau.grid();
    if g.rows < 2 || g.cols < 2 {
        return Err(Error::InvalidGrid(format!(
            "extended grid must be at least 2x2, got {}x{}",
            g.rows, g.cols
        )));
    }
    SubdomainRect::new(0, g.rows - 2, 0, g.cols - 2)
}

/// Rotates the tangent field, restricts it to the image grid and normalizes
/// pointwise: `xi = tau_perp / sqrt(|tau_perp|^2 + epsilon)`, so `|xi| < 1`
/// strictly everywhere.
pub fn compute_xi(tau: &VectorField2, epsilon: f64) -> Result<VectorField2> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    let rect = primal_rect(tau)?;
    let perp_x = tau.y().restrict(&rect)?;
    let perp_y = tau.x().restrict(&rect)?.scale(-1.0);
    let denom = perp_x
        .zip_map(&perp_y, |a, b| (a * a + b * b + epsilon).sqrt())
        .expect("same grid");
    VectorField2::new(
        perp_x.zip_map(&denom, |a, d| a / d)?,
        perp_y.zip_map(&denom, |a, d| a / d)?,
    )
}

/// Result of integrating a divergence-free tangent field to a potential.
#[derive(Debug, Clone)]
pub struct PotentialIntegration {
    /// Zero-mean potential `g` with backward differences matching the rotated
    /// tangent field.
    pub g: ScalarField,
    /// h-weighted norm of the divergence of the input field.
    pub div_residual: f64,
    /// Sup-norm disagreement between the row-first and column-first paths,
    /// before mean subtraction. Zero for exactly divergence-free fields.
    pub path_disagreement: f64,
}

/// Integrates `(D-_x g, D-_y g) = (tau_y, -tau_x)|_image` along a fixed path:
/// first column by cumulative sums of the y-relation, then each row by the
/// x-relation, anchored to zero mean. Errors when the divergence residual of
/// `tau` exceeds [`INTEGRATION_DIV_TOL`].
pub fn integrate_potential(tau: &VectorField2) -> Result<PotentialIntegration> {
    let div_residual = ops::divergence_residual(tau);
    if div_residual > INTEGRATION_DIV_TOL {
        return Err(Error::InconsistentField {
            residual: div_residual,
            tolerance: INTEGRATION_DIV_TOL,
        });
    }
    let rect = primal_rect(tau)?;
    let w_x = tau.y().restrict(&rect)?;
    let w_y = tau.x().restrict(&rect)?.scale(-1.0);
    let g = *w_x.grid();
    let h = g.h;
    let (rows, cols) = (g.rows, g.cols);

    let mut by_rows = ndarray::Array2::<f64>::zeros((rows, cols));
    for i in 1..rows {
        by_rows[[i, 0]] = by_rows[[i - 1, 0]] + h * w_y.values()[[i, 0]];
    }
    for i in 0..rows {
        for j in 1..cols {
            by_rows[[i, j]] = by_rows[[i, j - 1]] + h * w_x.values()[[i, j]];
        }
    }

    let mut by_cols = ndarray::Array2::<f64>::zeros((rows, cols));
    for j in 1..cols {
        by_cols[[0, j]] = by_cols[[0, j - 1]] + h * w_x.values()[[0, j]];
    }
    for j in 0..cols {
        for i in 1..rows {
            by_cols[[i, j]] = by_cols[[i - 1, j]] + h * w_y.values()[[i, j]];
        }
    }

    let path_disagreement = by_rows
        .iter()
        .zip(by_cols.iter())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

    let mut field = ScalarField::from_values(g, by_rows)?;
    let mean = field.mean();
    field = field.map(|v| v - mean);
    Ok(PotentialIntegration {
        g: field,
        div_residual,
        path_disagreement,
    })
}

/// `d = d0 - (div p + div xi) / alpha`.
pub fn recover_image_irv1(
    p: &VectorField2,
    xi: &VectorField2,
    d0: &ScalarField,
    alpha: f64,
) -> Result<ScalarField> {
    d0.sub(&ops::div(p).add(&ops::div(xi))?.scale(1.0 / alpha))
}

/// `d = d0 - div p / alpha`.
pub fn recover_image_irv2(p: &VectorField2, d0: &ScalarField, alpha: f64) -> Result<ScalarField> {
    d0.sub(&ops::div(p).scale(1.0 / alpha))
}
