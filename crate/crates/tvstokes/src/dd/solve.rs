//! Parallel subspace-correction solves of the dual problems.
//!
//! One outer sweep solves, for every subdomain simultaneously, the local dual
//! problem bounded by the partition-of-unity weight, then combines the local
//! updates with the coloring relaxation weight. Subdomain tasks read an
//! immutable snapshot of the iterate and return their local update; a single
//! combiner sums in fixed subdomain order, so traces are reproducible for any
//! thread count.
//!
//! The image-reconstruction inner loop touches a one-pixel halo of its
//! subdomain. The tangent-smoothing inner loop is fully localized: the global
//! projection is evaluated through [`project_local`] so every intermediate
//! lives on the padded subdomain, and the constant part of the residual is
//! assembled once per outer sweep from per-subdomain pieces.

use rayon::prelude::*;

use crate::dd::{build_tilings, DdLayout, PartitionOfUnity};
use crate::error::{Error, Result};
use crate::field::{ScalarField, TensorField2x2, VectorField2};
use crate::grid::{GridSpec, SubdomainRect};
use crate::ops;
use crate::projection::{project_local, reframe_tensor, reframe_vector, DivFreeProjector};
use crate::solver::EnergyTrace;
use crate::spectral::DctLaplacian;
use crate::tiling::TilingTriple;

#[derive(Debug, Clone, Copy)]
pub struct DdConfig {
    /// Relaxation weight in `(0, 1]`, from the subdomain coloring.
    pub alpha_hat: f64,
    /// Outer iteration cap.
    pub max_it: usize,
    /// Inner (per-subdomain) iterations per outer sweep.
    pub max_inner_it: usize,
    /// Outer stop: `|D_n^2 - D_{n+1}^2| / |grid|` below this ends the loop.
    pub outer_tol: f64,
    /// Semi-implicit step for the inner iterations, in `(0, 1/8]`.
    pub step: f64,
}

impl Default for DdConfig {
    fn default() -> Self {
        Self {
            alpha_hat: 0.25,
            max_it: 5000,
            max_inner_it: 10,
            outer_tol: 1e-10,
            step: 0.125,
        }
    }
}

impl DdConfig {
    /// Defaults with the relaxation weight chosen for an `m2 x m1` layout.
    pub fn for_counts(m2: usize, m1: usize) -> Self {
        Self {
            alpha_hat: super::alpha_hat_for(m1, m2),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha_hat.is_nan() || self.alpha_hat <= 0.0 || self.alpha_hat > 1.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha_hat must lie in (0, 1], got {}",
                self.alpha_hat
            )));
        }
        if self.step.is_nan() || self.step <= 0.0 || self.step > 0.125 {
            return Err(Error::InvalidConfig(format!(
                "step must lie in (0, 1/8], got {}",
                self.step
            )));
        }
        if self.max_inner_it == 0 {
            return Err(Error::InvalidConfig("max_inner_it must be >= 1".into()));
        }
        Ok(())
    }
}

/// Weighted semi-implicit step: `(theta v + t theta psi) / (theta + t |psi|)`
/// per component, zero wherever both numerator and denominator vanish. Keeps
/// `|v| <= theta` pointwise.
fn weighted_update_row(
    v: &VectorField2,
    psi: &VectorField2,
    theta: &ScalarField,
    t: f64,
) -> VectorField2 {
    use ndarray::{Array2, Zip};
    let g = *v.grid();
    let mut denom = Array2::zeros((g.rows, g.cols));
    Zip::from(&mut denom)
        .and(theta.values())
        .and(psi.x().values())
        .and(psi.y().values())
        .for_each(|d, &th, &px, &py| *d = th + t * (px * px + py * py).sqrt());
    let apply = |vc: &ScalarField, pc: &ScalarField| {
        let mut out = Array2::zeros((g.rows, g.cols));
        Zip::from(&mut out)
            .and(vc.values())
            .and(pc.values())
            .and(theta.values())
            .and(&denom)
            .for_each(|o, &a, &b, &th, &d| *o = if d > 0.0 { th * (a + t * b) / d } else { 0.0 });
        ScalarField::from_values(g, out).expect("same shape")
    };
    VectorField2::new(apply(v.x(), psi.x()), apply(v.y(), psi.y())).expect("same grid")
}

fn weighted_update_tensor(
    v: &TensorField2x2,
    psi: &TensorField2x2,
    theta: &ScalarField,
    t: f64,
) -> TensorField2x2 {
    TensorField2x2::new(
        weighted_update_row(v.row1(), psi.row1(), theta, t),
        weighted_update_row(v.row2(), psi.row2(), theta, t),
    )
    .expect("rows share grid")
}

/// Divergence with the global boundary convention, evaluated on `target` from
/// values held on the containing `frame` rectangle. `target` must leave one
/// pixel of slack inside `frame` toward the left/top unless it touches the
/// grid edge there.
fn div_from_frame(
    u: &VectorField2,
    frame: &SubdomainRect,
    target: &SubdomainRect,
    grid: &GridSpec,
) -> ScalarField {
    debug_assert!(frame.contains(target));
    let h = grid.h;
    let ux = u.x().values();
    let uy = u.y().values();
    let li = |gi: usize| gi - frame.row_start;
    let lj = |gj: usize| gj - frame.col_start;
    ScalarField::from_fn(
        GridSpec {
            rows: target.rows(),
            cols: target.cols(),
            h,
        },
        |ti, tj| {
            let gi = target.row_start + ti;
            let gj = target.col_start + tj;
            let dx = if grid.cols == 1 {
                0.0
            } else if gj == 0 {
                ux[[li(gi), lj(gj)]] / h
            } else if gj == grid.cols - 1 {
                -ux[[li(gi), lj(gj - 1)]] / h
            } else {
                (ux[[li(gi), lj(gj)]] - ux[[li(gi), lj(gj - 1)]]) / h
            };
            let dy = if grid.rows == 1 {
                0.0
            } else if gi == 0 {
                uy[[li(gi), lj(gj)]] / h
            } else if gi == grid.rows - 1 {
                -uy[[li(gi - 1), lj(gj)]] / h
            } else {
                (uy[[li(gi), lj(gj)]] - uy[[li(gi - 1), lj(gj)]]) / h
            };
            dx + dy
        },
    )
}

fn check_layout_grid(layout: &DdLayout, grid: &GridSpec) -> Result<()> {
    if layout.grid() != grid {
        return Err(Error::Layout(format!(
            "layout built for {}x{} grid, data on {}x{}",
            layout.grid().rows,
            layout.grid().cols,
            grid.rows,
            grid.cols
        )));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn inner_ir_impl(
    layout: &DdLayout,
    pou: &PartitionOfUnity,
    m: (usize, usize),
    p_current: &VectorField2,
    qhat_prev: &VectorField2,
    f: &ScalarField,
    step: f64,
    max_inner_it: usize,
    mut observer: Option<&mut dyn FnMut(&VectorField2)>,
) -> Result<VectorField2> {
    let grid = *layout.grid();
    let m_rect = layout.subdomain(m.0, m.1);
    let stencil_rect = m_rect.grow_rb(&grid);
    let halo = m_rect.grow_halo(&grid);

    let theta_local = pou.theta(m).restrict(&m_rect)?;
    // Sum of all other weights on the halo; reads p only inside the halo.
    let complement = pou.theta(m).restrict(&halo)?.map(|v| 1.0 - v);
    let frozen = p_current.restrict(&halo)?.weight(&complement)?;
    let f_local = f.restrict(&stencil_rect)?;

    let mut v = qhat_prev.clone();
    for nu in 0..max_inner_it {
        let u = frozen.add(&reframe_vector(&v, &m_rect, &halo))?;
        let w = div_from_frame(&u, &halo, &stencil_rect, &grid).sub(&f_local)?;
        let psi = reframe_vector(&ops::grad(&w), &stencil_rect, &m_rect);
        v = weighted_update_row(&v, &psi, &theta_local, step);
        if !v.is_finite() {
            return Err(Error::NumericalDivergence { iteration: nu });
        }
        if let Some(obs) = observer.as_deref_mut() {
            obs(&v);
        }
    }
    Ok(v)
}

/// One subdomain solve of the image-reconstruction dual: iterates the
/// weighted semi-implicit step on data restricted to a one-pixel halo of the
/// subdomain. Returns the local update, supported on the subdomain.
#[allow(clippy::too_many_arguments)]
pub fn inner_ir(
    layout: &DdLayout,
    pou: &PartitionOfUnity,
    m: (usize, usize),
    p_current: &VectorField2,
    qhat_prev: &VectorField2,
    f: &ScalarField,
    step: f64,
    max_inner_it: usize,
) -> Result<VectorField2> {
    inner_ir_impl(
        layout,
        pou,
        m,
        p_current,
        qhat_prev,
        f,
        step,
        max_inner_it,
        None,
    )
}

/// Like [`inner_ir`] but returns every iterate, for cross-checking against
/// the full-grid formulation.
#[allow(clippy::too_many_arguments)]
pub fn inner_ir_iterates(
    layout: &DdLayout,
    pou: &PartitionOfUnity,
    m: (usize, usize),
    p_current: &VectorField2,
    qhat_prev: &VectorField2,
    f: &ScalarField,
    step: f64,
    max_inner_it: usize,
) -> Result<Vec<VectorField2>> {
    let mut iterates = Vec::with_capacity(max_inner_it);
    let mut obs = |v: &VectorField2| iterates.push(v.clone());
    inner_ir_impl(
        layout,
        pou,
        m,
        p_current,
        qhat_prev,
        f,
        step,
        max_inner_it,
        Some(&mut obs),
    )?;
    Ok(iterates)
}

/// Constant part of the localized tangent-smoothing residual for subdomain
/// `m`: restriction of `f - P multi_div((1 - theta_m) p)` to the padded
/// subdomain, assembled from per-subdomain pieces of the projection. Pieces
/// whose weighted dual vanishes contribute exactly zero and are skipped.
pub fn assemble_local_data(
    lap: &DctLaplacian,
    layout: &DdLayout,
    pou: &PartitionOfUnity,
    m: (usize, usize),
    p_current: &TensorField2x2,
    f: &VectorField2,
) -> Result<VectorField2> {
    let triples: Vec<TilingTriple> = layout
        .indices()
        .map(|l| build_tilings(layout, l, m))
        .collect::<Result<_>>()?;
    assemble_local_data_with_plans(lap, layout, pou, m, p_current, f, &triples)
}

fn assemble_local_data_with_plans(
    lap: &DctLaplacian,
    layout: &DdLayout,
    pou: &PartitionOfUnity,
    m: (usize, usize),
    p_current: &TensorField2x2,
    f: &VectorField2,
    triples: &[TilingTriple],
) -> Result<VectorField2> {
    let grid = *layout.grid();
    let m_halo = layout.subdomain(m.0, m.1).grow_rb(&grid);
    let mut acc = f.restrict(&m_halo)?;
    for l in layout.indices() {
        if l == m {
            continue;
        }
        let l_rect = layout.subdomain(l.0, l.1);
        let l_halo = l_rect.grow_rb(&grid);
        let theta_local = pou.theta(l).restrict(&l_rect)?;
        let weighted = p_current.restrict(&l_rect)?.weight(&theta_local)?;
        if weighted.norm() == 0.0 {
            continue;
        }
        // The weighted dual is supported on the subdomain, so its divergence
        // is exactly the local divergence on the padded rectangle.
        let padded = reframe_tensor(&weighted, &l_rect, &l_halo);
        let local_div = ops::multi_div(&padded);
        let piece = project_local(lap, &triples[layout.flat_index(l)], &local_div)?;
        acc = acc.sub(&piece)?;
    }
    Ok(acc)
}

#[allow(clippy::too_many_arguments)]
fn inner_tfs_local_impl(
    lap: &DctLaplacian,
    layout: &DdLayout,
    pou: &PartitionOfUnity,
    m: (usize, usize),
    local_data: &VectorField2,
    v0: &TensorField2x2,
    triple_mm: &TilingTriple,
    step: f64,
    max_inner_it: usize,
    mut observer: Option<&mut dyn FnMut(&TensorField2x2)>,
) -> Result<TensorField2x2> {
    let grid = *layout.grid();
    let m_rect = layout.subdomain(m.0, m.1);
    let m_halo = m_rect.grow_rb(&grid);
    let theta_local = pou.theta(m).restrict(&m_rect)?;

    let mut v = v0.clone();
    for nu in 0..max_inner_it {
        let padded = reframe_tensor(&v, &m_rect, &m_halo);
        let local_div = ops::multi_div(&padded);
        let projected = project_local(lap, triple_mm, &local_div)?;
        let residual = projected.sub(local_data)?;
        let psi = reframe_tensor(&ops::multi_grad(&residual), &m_halo, &m_rect);
        v = weighted_update_tensor(&v, &psi, &theta_local, step);
        if !v.is_finite() {
            return Err(Error::NumericalDivergence { iteration: nu });
        }
        if let Some(obs) = observer.as_deref_mut() {
            obs(&v);
        }
    }
    Ok(v)
}

/// One subdomain solve of the tangent-smoothing dual with every operation on
/// the (padded) subdomain: local divergence of the zero-padded iterate,
/// localized projection, local gradient, weighted update. `local_data` is the
/// output of [`assemble_local_data`]; `v0` is the warm start supported on the
/// subdomain. Returns the local update.
#[allow(clippy::too_many_arguments)]
pub fn inner_tfs_local(
    lap: &DctLaplacian,
    layout: &DdLayout,
    pou: &PartitionOfUnity,
    m: (usize, usize),
    local_data: &VectorField2,
    v0: &TensorField2x2,
    step: f64,
    max_inner_it: usize,
) -> Result<TensorField2x2> {
    let triple = build_tilings(layout, m, m)?;
    inner_tfs_local_impl(
        lap,
        layout,
        pou,
        m,
        local_data,
        v0,
        &triple,
        step,
        max_inner_it,
        None,
    )
}

/// Like [`inner_tfs_local`] but returns every iterate.
#[allow(clippy::too_many_arguments)]
pub fn inner_tfs_local_iterates(
    lap: &DctLaplacian,
    layout: &DdLayout,
    pou: &PartitionOfUnity,
    m: (usize, usize),
    local_data: &VectorField2,
    v0: &TensorField2x2,
    step: f64,
    max_inner_it: usize,
) -> Result<Vec<TensorField2x2>> {
    let triple = build_tilings(layout, m, m)?;
    let mut iterates = Vec::with_capacity(max_inner_it);
    let mut obs = |v: &TensorField2x2| iterates.push(v.clone());
    inner_tfs_local_impl(
        lap,
        layout,
        pou,
        m,
        local_data,
        v0,
        &triple,
        step,
        max_inner_it,
        Some(&mut obs),
    )?;
    Ok(iterates)
}

/// Domain-decomposed solve of the image-reconstruction dual
/// `min ||div p - f||^2` over the unit ball. The caller assembles `f`.
pub fn dd_solve_ir(
    f: &ScalarField,
    layout: &DdLayout,
    pou: &PartitionOfUnity,
    cfg: &DdConfig,
) -> Result<(VectorField2, EnergyTrace)> {
    cfg.validate()?;
    let grid = *f.grid();
    check_layout_grid(layout, &grid)?;
    let subdomains: Vec<(usize, usize)> = layout.indices().collect();

    let energy_of = |p: &VectorField2| -> Result<f64> {
        let r = ops::div(p).sub(f)?;
        r.inner(&r)
    };

    let mut p = VectorField2::zeros(grid);
    let mut qhats: Vec<VectorField2> = subdomains
        .iter()
        .map(|&(my, mx)| {
            let r = layout.subdomain(my, mx);
            VectorField2::zeros(GridSpec {
                rows: r.rows(),
                cols: r.cols(),
                h: grid.h,
            })
        })
        .collect();
    let mut trace = EnergyTrace::new(vec![energy_of(&p)?]);

    for _ in 0..cfg.max_it {
        let results: Result<Vec<VectorField2>> = subdomains
            .par_iter()
            .enumerate()
            .map(|(flat, &m)| {
                inner_ir(
                    layout,
                    pou,
                    m,
                    &p,
                    &qhats[flat],
                    f,
                    cfg.step,
                    cfg.max_inner_it,
                )
            })
            .collect();
        qhats = results?;

        let mut sum = VectorField2::zeros(grid);
        for (flat, &m) in subdomains.iter().enumerate() {
            let rect = layout.subdomain(m.0, m.1);
            sum = sum.add(&qhats[flat].extend(&rect, grid)?)?;
        }
        p = p
            .scale(1.0 - cfg.alpha_hat)
            .add(&sum.scale(cfg.alpha_hat))?;

        let e = energy_of(&p)?;
        let prev = trace.last();
        trace.push(e);
        if (prev * prev - e * e).abs() / (grid.len() as f64) < cfg.outer_tol {
            break;
        }
    }
    Ok((p, trace))
}

/// Domain-decomposed solve of the tangent-smoothing dual. `f` is the
/// projected data `P tau0 / delta`; the energy is evaluated globally once per
/// outer sweep, while the subdomain solves run the fully localized inner
/// loop.
pub fn dd_solve_tfs(
    proj: &DivFreeProjector,
    f: &VectorField2,
    layout: &DdLayout,
    pou: &PartitionOfUnity,
    cfg: &DdConfig,
) -> Result<(TensorField2x2, EnergyTrace)> {
    cfg.validate()?;
    let grid = *f.grid();
    check_layout_grid(layout, &grid)?;
    if proj.grid() != &grid {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", grid.rows, grid.cols),
            found: format!("{}x{}", proj.grid().rows, proj.grid().cols),
        });
    }
    let lap = proj.laplacian();
    let subdomains: Vec<(usize, usize)> = layout.indices().collect();

    // Tilings reused every sweep: plans[m][l] localizes subdomain l's
    // contribution onto subdomain m; plans[m][m] drives the inner loop.
    let plans: Vec<Vec<TilingTriple>> = subdomains
        .iter()
        .map(|&m| {
            subdomains
                .iter()
                .map(|&l| build_tilings(layout, l, m))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let energy_of = |p: &TensorField2x2| -> Result<f64> {
        let r = proj.project(&ops::multi_div(p))?.sub(f)?;
        r.inner(&r)
    };

    let mut p = TensorField2x2::zeros(grid);
    let mut qhats: Vec<TensorField2x2> = subdomains
        .iter()
        .map(|&(my, mx)| {
            let r = layout.subdomain(my, mx);
            TensorField2x2::zeros(GridSpec {
                rows: r.rows(),
                cols: r.cols(),
                h: grid.h,
            })
        })
        .collect();
    let mut trace = EnergyTrace::new(vec![energy_of(&p)?]);

    for _ in 0..cfg.max_it {
        let results: Result<Vec<TensorField2x2>> = subdomains
            .par_iter()
            .enumerate()
            .map(|(flat, &m)| {
                let local_data =
                    assemble_local_data_with_plans(lap, layout, pou, m, &p, f, &plans[flat])?;
                inner_tfs_local_impl(
                    lap,
                    layout,
                    pou,
                    m,
                    &local_data,
                    &qhats[flat],
                    &plans[flat][flat],
                    cfg.step,
                    cfg.max_inner_it,
                    None,
                )
            })
            .collect();
        qhats = results?;

        let mut sum = TensorField2x2::zeros(grid);
        for (flat, &m) in subdomains.iter().enumerate() {
            let rect = layout.subdomain(m.0, m.1);
            sum = sum.add(&qhats[flat].extend(&rect, grid)?)?;
        }
        p = p
            .scale(1.0 - cfg.alpha_hat)
            .add(&sum.scale(cfg.alpha_hat))?;

        let e = energy_of(&p)?;
        let prev = trace.last();
        trace.push(e);
        if (prev * prev - e * e).abs() / (grid.len() as f64) < cfg.outer_tol {
            break;
        }
    }
    Ok((p, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd::build_partition_of_unity;
    use crate::solver::{chambolle_ir, chambolle_tfs, SolverConfig};

    fn grid(rows: usize, cols: usize) -> GridSpec {
        GridSpec::new(rows, cols, 1.0).unwrap()
    }

    fn pseudo_random_scalar(g: GridSpec, seed: u64) -> ScalarField {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(23);
        ScalarField::from_fn(g, |_, _| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        })
    }

    fn pseudo_random_vector(g: GridSpec, seed: u64) -> VectorField2 {
        VectorField2::new(
            pseudo_random_scalar(g, seed),
            pseudo_random_scalar(g, seed ^ 0x5a),
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let bad_weight = DdConfig {
            alpha_hat: 0.0,
            ..DdConfig::default()
        };
        assert!(bad_weight.validate().is_err());
        let bad_step = DdConfig {
            step: 0.3,
            ..DdConfig::default()
        };
        assert!(bad_step.validate().is_err());
        assert!(DdConfig::for_counts(3, 3).validate().is_ok());
    }

    #[test]
    fn weighted_update_zero_weight_gives_zero() {
        let g = grid(3, 3);
        let v = pseudo_random_vector(g, 1);
        let psi = pseudo_random_vector(g, 2);
        let theta = ScalarField::zeros(g);
        let out = weighted_update_row(&v, &psi, &theta, 0.125);
        assert_eq!(out.norm(), 0.0);
    }

    #[test]
    fn weighted_update_bounded_by_weight() {
        let g = grid(5, 5);
        let theta = pseudo_random_scalar(g, 3).map(|v| v.abs());
        let mut v = VectorField2::zeros(g);
        for seed in 0..20 {
            let psi = pseudo_random_vector(g, 100 + seed).scale(10.0);
            v = weighted_update_row(&v, &psi, &theta, 0.125);
            let mag = v.magnitude();
            for ((i, j), m) in mag.values().indexed_iter() {
                assert!(*m <= theta.values()[[i, j]] + 1e-14);
            }
        }
    }

    #[test]
    fn dd_ir_zero_data_stays_zero() {
        let g = grid(12, 12);
        let layout = DdLayout::build(g, 2, 2, 2, 2).unwrap();
        let pou = build_partition_of_unity(&layout);
        let cfg = DdConfig {
            max_it: 3,
            ..DdConfig::for_counts(2, 2)
        };
        let (p, trace) = dd_solve_ir(&ScalarField::zeros(g), &layout, &pou, &cfg).unwrap();
        assert_eq!(p.norm(), 0.0);
        assert!(trace.energies().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn dd_ir_single_subdomain_matches_plain_chambolle() {
        // With one subdomain and full relaxation, outer x inner sweeps are
        // exactly the plain iteration; energies agree per iteration block.
        let g = grid(10, 9);
        let f = pseudo_random_scalar(g, 5);
        let layout = DdLayout::build(g, 1, 1, 2, 2).unwrap();
        let pou = build_partition_of_unity(&layout);
        let inner = 4usize;
        let outer = 12usize;
        let cfg = DdConfig {
            alpha_hat: 1.0,
            max_it: outer,
            max_inner_it: inner,
            outer_tol: 0.0,
            step: 0.125,
        };
        let (_, dd_trace) = dd_solve_ir(&f, &layout, &pou, &cfg).unwrap();
        let plain_cfg = SolverConfig {
            max_it: outer * inner,
            tol: 0.0,
            ..SolverConfig::default()
        };
        let (_, plain) = chambolle_ir(&f, &plain_cfg).unwrap();
        for n in 0..=outer {
            let a = dd_trace.energies()[n];
            let b = plain.energies()[n * inner];
            assert!((a - b).abs() <= 1e-12 * b.max(1.0), "outer {n}: {a} vs {b}");
        }
    }

    #[test]
    fn dd_tfs_single_subdomain_matches_plain_chambolle() {
        let g = grid(9, 9);
        let proj = DivFreeProjector::new(g).unwrap();
        let tau0 = pseudo_random_vector(g, 6);
        let delta = 0.3;
        let data = proj.project(&tau0).unwrap().scale(1.0 / delta);
        let layout = DdLayout::build(g, 1, 1, 2, 2).unwrap();
        let pou = build_partition_of_unity(&layout);
        let inner = 5usize;
        let outer = 8usize;
        let cfg = DdConfig {
            alpha_hat: 1.0,
            max_it: outer,
            max_inner_it: inner,
            outer_tol: 0.0,
            step: 0.125,
        };
        let (_, dd_trace) = dd_solve_tfs(&proj, &data, &layout, &pou, &cfg).unwrap();
        let plain_cfg = SolverConfig {
            delta,
            max_it: outer * inner,
            tol: 0.0,
            ..SolverConfig::default()
        };
        let (_, plain) = chambolle_tfs(&proj, &tau0, &plain_cfg).unwrap();
        for n in 0..=outer {
            let a = dd_trace.energies()[n];
            let b = plain.energies()[n * inner];
            assert!((a - b).abs() <= 1e-12 * b.max(1.0), "outer {n}: {a} vs {b}");
        }
    }

    #[test]
    fn dd_ir_outer_energy_non_increasing_and_feasible() {
        let g = grid(16, 16);
        let f = pseudo_random_scalar(g, 7).scale(4.0);
        let layout = DdLayout::build(g, 2, 2, 3, 3).unwrap();
        let pou = build_partition_of_unity(&layout);
        let cfg = DdConfig {
            max_it: 40,
            outer_tol: 0.0,
            ..DdConfig::for_counts(2, 2)
        };
        let (p, trace) = dd_solve_ir(&f, &layout, &pou, &cfg).unwrap();
        assert!(trace.is_non_increasing(1e-10));
        assert!(p.magnitude().max_abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn inner_ir_reads_only_the_declared_halo() {
        // Poison the dual iterate and the data outside the halo; the local
        // update must remain finite, proving no out-of-halo reads.
        let g = grid(14, 14);
        let layout = DdLayout::build(g, 2, 2, 3, 3).unwrap();
        let pou = build_partition_of_unity(&layout);
        let m = (0usize, 1usize);
        let m_rect = layout.subdomain(m.0, m.1);
        let halo = m_rect.grow_halo(&g);
        let stencil = m_rect.grow_rb(&g);

        let clean_p = pseudo_random_vector(g, 8);
        let poison = |s: &ScalarField, keep: &SubdomainRect| {
            ScalarField::from_fn(g, |i, j| {
                if keep.contains_point(i, j) {
                    s.values()[[i, j]]
                } else {
                    f64::NAN
                }
            })
        };
        let p_poisoned =
            VectorField2::new(poison(clean_p.x(), &halo), poison(clean_p.y(), &halo)).unwrap();
        let f_clean = pseudo_random_scalar(g, 9);
        let f_poisoned = poison(&f_clean, &stencil);

        let v0 = VectorField2::zeros(GridSpec {
            rows: m_rect.rows(),
            cols: m_rect.cols(),
            h: 1.0,
        });
        let got = inner_ir(&layout, &pou, m, &p_poisoned, &v0, &f_poisoned, 0.125, 6).unwrap();
        assert!(got.is_finite());
        let want = inner_ir(&layout, &pou, m, &clean_p, &v0, &f_clean, 0.125, 6).unwrap();
        assert_eq!(got.x().values(), want.x().values());
        assert_eq!(got.y().values(), want.y().values());
    }

    #[test]
    fn inner_iterates_respect_weight_bound() {
        let g = grid(12, 12);
        let layout = DdLayout::build(g, 2, 2, 2, 2).unwrap();
        let pou = build_partition_of_unity(&layout);
        let m = (1usize, 0usize);
        let m_rect = layout.subdomain(m.0, m.1);
        let f = pseudo_random_scalar(g, 10).scale(8.0);
        let p = pseudo_random_vector(g, 11).scale(0.5);
        let v0 = VectorField2::zeros(GridSpec {
            rows: m_rect.rows(),
            cols: m_rect.cols(),
            h: 1.0,
        });
        let theta = pou.theta(m).restrict(&m_rect).unwrap();
        for v in inner_ir_iterates(&layout, &pou, m, &p, &v0, &f, 0.125, 8).unwrap() {
            let mag = v.magnitude();
            for ((i, j), val) in mag.values().indexed_iter() {
                assert!(*val <= theta.values()[[i, j]] + 1e-13);
            }
        }
    }

    #[test]
    fn inner_tfs_local_zero_data_stays_zero() {
        let g = grid(13, 13);
        let proj = DivFreeProjector::new(g).unwrap();
        let layout = DdLayout::build(g, 2, 2, 3, 3).unwrap();
        let pou = build_partition_of_unity(&layout);
        let m = (0usize, 0usize);
        let m_rect = layout.subdomain(0, 0);
        let m_halo = m_rect.grow_rb(&g);
        let data = VectorField2::zeros(GridSpec {
            rows: m_halo.rows(),
            cols: m_halo.cols(),
            h: 1.0,
        });
        let v0 = TensorField2x2::zeros(GridSpec {
            rows: m_rect.rows(),
            cols: m_rect.cols(),
            h: 1.0,
        });
        let out =
            inner_tfs_local(proj.laplacian(), &layout, &pou, m, &data, &v0, 0.125, 5).unwrap();
        assert_eq!(out.norm(), 0.0);
    }

    #[test]
    fn assemble_local_data_zero_dual_is_restricted_data() {
        let g = grid(13, 13);
        let proj = DivFreeProjector::new(g).unwrap();
        let layout = DdLayout::build(g, 2, 2, 3, 3).unwrap();
        let pou = build_partition_of_unity(&layout);
        let f = pseudo_random_vector(g, 12);
        let m = (1usize, 1usize);
        let m_halo = layout.subdomain(1, 1).grow_rb(&g);
        let got = assemble_local_data(
            proj.laplacian(),
            &layout,
            &pou,
            m,
            &TensorField2x2::zeros(g),
            &f,
        )
        .unwrap();
        let want = f.restrict(&m_halo).unwrap();
        assert_eq!(got.x().values(), want.x().values());
        assert_eq!(got.y().values(), want.y().values());
    }

    #[test]
    fn assemble_local_data_matches_global_formula() {
        let g = grid(13, 13);
        let proj = DivFreeProjector::new(g).unwrap();
        let layout = DdLayout::build(g, 2, 2, 3, 3).unwrap();
        let pou = build_partition_of_unity(&layout);
        let f = pseudo_random_vector(g, 13);
        let p = {
            let r1 = pseudo_random_vector(g, 14);
            let r2 = pseudo_random_vector(g, 15);
            TensorField2x2::new(r1, r2).unwrap()
        };
        for m in layout.indices() {
            let m_halo = layout.subdomain(m.0, m.1).grow_rb(&g);
            let got = assemble_local_data(proj.laplacian(), &layout, &pou, m, &p, &f).unwrap();
            // Global formula with the explicit sum over the other subdomains.
            let mut frozen = TensorField2x2::zeros(g);
            for l in layout.indices() {
                if l == m {
                    continue;
                }
                frozen = frozen.add(&p.weight(pou.theta(l)).unwrap()).unwrap();
            }
            let want = f
                .sub(&proj.project(&ops::multi_div(&frozen)).unwrap())
                .unwrap()
                .restrict(&m_halo)
                .unwrap();
            assert!(
                got.sub(&want).unwrap().norm() < 1e-10,
                "subdomain {m:?} mismatch"
            );
        }
    }

    #[test]
    fn dd_runs_are_bitwise_deterministic() {
        let g = grid(12, 12);
        let f = pseudo_random_scalar(g, 16).scale(3.0);
        let layout = DdLayout::build(g, 2, 2, 2, 2).unwrap();
        let pou = build_partition_of_unity(&layout);
        let cfg = DdConfig {
            max_it: 10,
            outer_tol: 0.0,
            ..DdConfig::for_counts(2, 2)
        };
        let (p1, t1) = dd_solve_ir(&f, &layout, &pou, &cfg).unwrap();
        let (p2, t2) = dd_solve_ir(&f, &layout, &pou, &cfg).unwrap();
        assert_eq!(p1.x().values(), p2.x().values());
        assert_eq!(p1.y().values(), p2.y().values());
        assert_eq!(t1.energies(), t2.energies());
    }
}
