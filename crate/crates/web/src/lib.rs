//! Browser bindings. Each operation returns JSON for the page to render; the
//! plain functions are usable natively as well.

use boundtri::analysis::fit_loglog_slope;
use boundtri::sim::{run_decay_experiment, sample_instance, trial_rng, ExperimentConfig, Setup};
use boundtri::toy2d::{arrangement_svg, study_arrangement, Toy2dConfig};
use boundtri::{triangulate, Algorithm, NoiseModel, NormKind};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest camera count the page may request, to keep the tab responsive.
pub const MAX_CAMERAS: usize = 256;

#[derive(Debug, Serialize)]
pub struct Arrangement {
    pub svg: String,
    pub cells: usize,
}

/// Cell arrangement of `m` pixelated 2-D cameras over the study region.
pub fn toy_arrangement(m: usize, seed: u64, jitter: f64) -> Result<Arrangement, String> {
    let cfg = Toy2dConfig {
        seed,
        orientation_jitter: jitter,
        ..Toy2dConfig::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    if !(1..=24).contains(&m) {
        return Err(format!("camera count must be 1..=24, got {m}"));
    }
    let cameras = cfg.cameras(m, 0).map_err(|e| e.to_string())?;
    let (cells, _) = study_arrangement(&cfg, &cameras).map_err(|e| e.to_string())?;
    Ok(Arrangement {
        svg: arrangement_svg(&cameras, &cells, 560.0),
        cells: cells.cells.len(),
    })
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub m: usize,
    pub mean_sq_err: f64,
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub algorithm: String,
    pub points: Vec<CurvePoint>,
    pub slope: f64,
}

fn parse_noise(q: &str, delta: f64) -> Result<NoiseModel, String> {
    let q = match q {
        "inf" => NormKind::Linf,
        "2" => NormKind::L2,
        other => return Err(format!("noise norm must be inf or 2, got {other}")),
    };
    NoiseModel::new(q, delta).map_err(|e| e.to_string())
}

/// Mean squared error for `M = 4, 8, ..., max_m` and its log-log slope.
pub fn decay_curve(
    algorithm: &str,
    circular: bool,
    q: &str,
    delta: f64,
    max_m: usize,
    trials: usize,
    seed: u64,
) -> Result<Curve, String> {
    let algorithm: Algorithm = algorithm
        .parse()
        .map_err(|e: boundtri::Error| e.to_string())?;
    if !(8..=MAX_CAMERAS).contains(&max_m) {
        return Err(format!(
            "largest camera count must be 8..={MAX_CAMERAS}, got {max_m}"
        ));
    }
    let schedule: Vec<usize> = std::iter::successors(Some(4usize), |m| Some(m * 2))
        .take_while(|&m| m <= max_m)
        .collect();
    let cfg = ExperimentConfig {
        setup: if circular {
            Setup::CircularArray
        } else {
            Setup::RandomSphere
        },
        camera_count_schedule: schedule,
        trials_per_m: trials,
        noise: parse_noise(q, delta)?,
        rng_seed: seed,
        ..ExperimentConfig::default()
    };
    let curve = run_decay_experiment(&cfg, algorithm).map_err(|e| e.to_string())?;
    let fit = fit_loglog_slope(&curve, 4, usize::MAX).map_err(|e| e.to_string())?;
    Ok(Curve {
        algorithm: algorithm.name().to_string(),
        points: curve
            .records
            .iter()
            .map(|r| CurvePoint {
                m: r.m,
                mean_sq_err: r.mean_sq_err,
            })
            .collect(),
        slope: fit.slope,
    })
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub algorithm: String,
    /// Distance to the true point; `None` when the algorithm failed.
    pub error: Option<f64>,
    pub consistent: bool,
    pub max_residual: Option<f64>,
    pub message: Option<String>,
}

/// Every algorithm on one random instance with `m` cameras.
pub fn compare_triangulators(
    m: usize,
    q: &str,
    delta: f64,
    seed: u64,
) -> Result<Vec<Comparison>, String> {
    if !(2..=MAX_CAMERAS).contains(&m) {
        return Err(format!("camera count must be 2..={MAX_CAMERAS}, got {m}"));
    }
    let noise = parse_noise(q, delta)?;
    let cfg = ExperimentConfig {
        noise,
        rng_seed: seed,
        ..ExperimentConfig::default()
    };
    let (inst, truth) =
        sample_instance(&mut trial_rng(seed, m, 0), &cfg, m).map_err(|e| e.to_string())?;
    Ok(Algorithm::ALL
        .iter()
        .map(|&a| match triangulate(&inst, a) {
            Ok(r) => Comparison {
                algorithm: a.name().to_string(),
                error: Some((r.point - truth).norm()),
                consistent: r.consistent,
                max_residual: Some(inst.max_residual(&r.point, noise.q)),
                message: None,
            },
            Err(e) => Comparison {
                algorithm: a.name().to_string(),
                error: None,
                consistent: false,
                max_residual: None,
                message: Some(e.to_string()),
            },
        })
        .collect())
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = toyArrangement)]
pub fn toy_arrangement_js(m: usize, seed: u64, jitter: f64) -> Result<String, JsError> {
    to_json(toy_arrangement(m, seed, jitter))
}

#[wasm_bindgen(js_name = decayCurve)]
pub fn decay_curve_js(
    algorithm: &str,
    circular: bool,
    q: &str,
    delta: f64,
    max_m: usize,
    trials: usize,
    seed: u64,
) -> Result<String, JsError> {
    to_json(decay_curve(
        algorithm, circular, q, delta, max_m, trials, seed,
    ))
}

#[wasm_bindgen(js_name = compareTriangulators)]
pub fn compare_triangulators_js(
    m: usize,
    q: &str,
    delta: f64,
    seed: u64,
) -> Result<String, JsError> {
    to_json(compare_triangulators(m, q, delta, seed))
}
