//! Log-log slope fits of decay curves and the cell-count lower-bound curve.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sim::DecayCurve;

/// Default smallest camera count used in slope fits.
pub const DEFAULT_M_MIN: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the fit in log10 units.
    pub residual_rms: f64,
    pub m_range: (usize, usize),
    pub points: usize,
    /// Camera counts inside the range dropped for a non-positive error.
    pub dropped: Vec<usize>,
}

/// Ordinary least squares of `log10 E` against `log10 M` over `m_min ≤ M ≤ m_max`.
pub fn fit_loglog_slope(curve: &DecayCurve, m_min: usize, m_max: usize) -> Result<SlopeFit> {
    let mut dropped = Vec::new();
    let pts: Vec<(usize, f64, f64)> = curve
        .records
        .iter()
        .filter(|r| r.m >= m_min && r.m <= m_max)
        .filter_map(|r| {
            if r.mean_sq_err > 0.0 && r.mean_sq_err.is_finite() {
                Some((r.m, (r.m as f64).log10(), r.mean_sq_err.log10()))
            } else {
                dropped.push(r.m);
                None
            }
        })
        .collect();
    if pts.len() < 3 {
        return Err(Error::Config(format!(
            "slope fit needs at least 3 points with positive error in [{m_min}, {m_max}], found {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.2).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.1 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.1 - mx) * (p.2 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Config(
            "slope fit needs at least two distinct camera counts".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_rms = (pts
        .iter()
        .map(|p| (p.2 - intercept - slope * p.1).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(SlopeFit {
        slope,
        intercept,
        residual_rms,
        m_range: (pts[0].0, pts[pts.len() - 1].0),
        points: pts.len(),
        dropped,
    })
}

/// `(2π²/5)·(3/(4π))^{1/3}`, the second moment constant of the unit-volume ball.
pub fn sphere_moment_constant() -> f64 {
    2.0 * PI * PI / 5.0 * (3.0 / (4.0 * PI)).cbrt()
}

/// Cells of an arrangement of `L` planes in general position in 3-D:
/// `C(L,0) + C(L,1) + C(L,2) + C(L,3)`.
pub fn plane_arrangement_cells(planes: u64) -> f64 {
    let l = planes as f64;
    1.0 + l + l * (l - 1.0) / 2.0 + l * (l - 1.0) * (l - 2.0) / 6.0
}

/// Reference curve `K·(vol/#P)^{2/3}` with `#P` the cell bound for
/// `M(N+1)²` pixel-boundary planes. Informational: the constant is not tight.
pub fn lower_bound_reference(m: usize, n: usize, vol_roi: f64) -> Result<f64> {
    if m < 1 || n < 1 || !(vol_roi > 0.0) {
        return Err(Error::Config(format!(
            "lower bound needs M >= 1, N >= 1 and positive volume (got {m}, {n}, {vol_roi})"
        )));
    }
    let planes = (m * (n + 1) * (n + 1)) as u64;
    Ok(sphere_moment_constant() * (vol_roi / plane_arrangement_cells(planes)).powf(2.0 / 3.0))
}
