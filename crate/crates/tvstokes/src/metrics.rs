//! Image and tangent-field quality metrics.
//!
//! PSNR uses the plain pixel mean of squared differences with peak value 1
//! (grayscale intensities in `[0, 1]`). MSSIM is the whole-image statistics
//! form with population variances and `k1 = 0.01`, `k2 = 0.03`, not the
//! sliding-window variant. Identical inputs yield an infinite PSNR, reported
//! through a flagged sentinel and treated as maximal when ranking.

use crate::error::Result;
use crate::field::{ScalarField, VectorField2};

const K1: f64 = 0.01;
const K2: f64 = 0.03;
/// Peak intensity for images in `[0, 1]`.
const R: f64 = 1.0;

/// Weight of the similarity term in the composite tangent-field score.
const PERF_MSSIM_WEIGHT: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    /// Decibels; `f64::INFINITY` when the inputs agree exactly.
    pub psnr: f64,
    /// Dimensionless, in `[-1, 1]`; 1 exactly for identical inputs.
    pub mssim: f64,
}

impl MetricReport {
    pub fn is_exact_match(&self) -> bool {
        self.psnr.is_infinite()
    }
}

/// Mean squared error over pixels (no mesh weighting).
pub fn mse(d: &ScalarField, reference: &ScalarField) -> Result<f64> {
    d.same_shape(reference)?;
    let n = d.grid().len() as f64;
    let s: f64 = d
        .values()
        .iter()
        .zip(reference.values().iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(s / n)
}

/// `-10 log10(MSE)`, infinite for exact matches.
pub fn psnr(d: &ScalarField, reference: &ScalarField) -> Result<f64> {
    let e = mse(d, reference)?;
    if e == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(-10.0 * e.log10())
    }
}

/// Whole-image structural similarity with population statistics.
pub fn mssim(d: &ScalarField, reference: &ScalarField) -> Result<f64> {
    d.same_shape(reference)?;
    let n = d.grid().len() as f64;
    let mean_d = d.mean();
    let mean_r = reference.mean();
    let mut var_d = 0.0;
    let mut var_r = 0.0;
    let mut cov = 0.0;
    for (a, b) in d.values().iter().zip(reference.values().iter()) {
        let da = a - mean_d;
        let db = b - mean_r;
        var_d += da * da;
        var_r += db * db;
        cov += da * db;
    }
    var_d /= n;
    var_r /= n;
    cov /= n;
    let c1 = (K1 * R) * (K1 * R);
    let c2 = (K2 * R) * (K2 * R);
    Ok(((2.0 * mean_d * mean_r + c1) * (2.0 * cov + c2))
        / ((mean_d * mean_d + mean_r * mean_r + c1) * (var_d + var_r + c2)))
}

pub fn report(d: &ScalarField, reference: &ScalarField) -> Result<MetricReport> {
    Ok(MetricReport {
        psnr: psnr(d, reference)?,
        mssim: mssim(d, reference)?,
    })
}

/// Composite score for tangent fields: mean componentwise PSNR plus 20 times
/// the mean componentwise MSSIM. Infinite for exact matches (flagged via
/// [`MetricReport::is_exact_match`] semantics); ranking treats it as maximal.
pub fn perf_tau(tau: &VectorField2, tau_reference: &VectorField2) -> Result<f64> {
    let mut total = 0.0;
    for (c, r) in tau
        .components()
        .iter()
        .zip(tau_reference.components().iter())
    {
        total += 0.5 * psnr(c, r)? + PERF_MSSIM_WEIGHT * 0.5 * mssim(c, r)?;
    }
    Ok(total)
}
