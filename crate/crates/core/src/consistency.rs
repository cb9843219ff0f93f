//! Bounded-noise model and membership in the consistency regions.
//!
//! Membership is decided by direct projection and a norm test, never through
//! the polytope algebra of the LP triangulators, so it serves as an oracle for
//! them. Points behind any camera are inconsistent.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Camera, ImagePoint, WorldPoint};

/// Inclusive slack on the `‖x - x̄‖_q ≤ δ` test.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// Norm index `q` of the noise ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    #[serde(rename = "1")]
    L1,
    #[serde(rename = "2")]
    L2,
    #[serde(rename = "inf")]
    Linf,
}

impl NormKind {
    #[inline]
    pub fn norm(self, v: Vector2<f64>) -> f64 {
        match self {
            NormKind::L1 => v.x.abs() + v.y.abs(),
            NormKind::L2 => v.x.hypot(v.y),
            NormKind::Linf => v.x.abs().max(v.y.abs()),
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::L1 => "1",
            NormKind::L2 => "2",
            NormKind::Linf => "inf",
        })
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "l1" => Ok(NormKind::L1),
            "2" | "l2" => Ok(NormKind::L2),
            "inf" | "linf" | "infinity" => Ok(NormKind::Linf),
            other => Err(Error::Parse(format!(
                "unknown norm `{other}` (expected 1, 2 or inf)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub q: NormKind,
    pub delta: f64,
}

impl NoiseModel {
    pub fn new(q: NormKind, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::Config(format!(
                "noise bandwidth must be finite and >= 0, got {delta}"
            )));
        }
        Ok(Self { q, delta })
    }
}

/// One image measurement together with the camera that took it.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub point: ImagePoint,
    pub camera: Camera,
}

/// A triangulation problem: `M ≥ 2` observations under a shared noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    observations: Vec<Observation>,
    noise: NoiseModel,
}

impl Instance {
    pub fn new(observations: Vec<Observation>, noise: NoiseModel) -> Result<Self> {
        if observations.len() < 2 {
            return Err(Error::Config(format!(
                "a triangulation instance needs at least 2 observations, got {}",
                observations.len()
            )));
        }
        if !observations
            .iter()
            .all(|o| o.point.x.is_finite() && o.point.y.is_finite())
        {
            return Err(Error::Config("non-finite image point".into()));
        }
        Ok(Self {
            observations,
            noise,
        })
    }

    /// Noise-free observations of `x`, perturbed by `noise_vectors[i]` when given.
    pub fn from_point(
        cameras: &[Camera],
        x: &WorldPoint,
        perturbations: Option<&[Vector2<f64>]>,
        noise: NoiseModel,
    ) -> Result<Self> {
        let observations = cameras
            .iter()
            .enumerate()
            .map(|(i, cam)| {
                let mut p = cam.project(x)?;
                if let Some(eps) = perturbations {
                    p += eps[i];
                }
                Ok(Observation {
                    point: p,
                    camera: cam.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(observations, noise)
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Same observations under a different noise model.
    pub fn with_noise(&self, noise: NoiseModel) -> Self {
        Self {
            observations: self.observations.clone(),
            noise,
        }
    }

    /// Per-camera reprojection residuals in the given norm, `None` if `x` is
    /// not in front of every camera.
    pub fn residuals(&self, x: &WorldPoint, norm: NormKind) -> Option<Vec<f64>> {
        self.observations
            .iter()
            .map(|o| {
                if !o.camera.cheirality(x) {
                    return None;
                }
                let p = o.camera.project(x).ok()?;
                Some(norm.norm(o.point - p))
            })
            .collect()
    }

    /// `max_i ‖x_i - π_i(X)‖`, infinite when `x` is behind a camera.
    pub fn max_residual(&self, x: &WorldPoint, norm: NormKind) -> f64 {
        self.residuals(x, norm)
            .map(|r| r.into_iter().fold(0.0, f64::max))
            .unwrap_or(f64::INFINITY)
    }

    /// `Σ_i ‖x_i - π_i(X)‖₂²`, infinite when `x` is behind a camera.
    pub fn sum_squared_residual(&self, x: &WorldPoint) -> f64 {
        self.residuals(x, NormKind::L2)
            .map(|r| r.iter().map(|v| v * v).sum())
            .unwrap_or(f64::INFINITY)
    }
}

/// `‖x - x̄‖_q ≤ δ` (inclusive, with [`BOUNDARY_TOLERANCE`]).
pub fn in_image_region(x: &ImagePoint, xbar: &ImagePoint, noise: NoiseModel) -> bool {
    noise.q.norm(x - xbar) <= noise.delta + BOUNDARY_TOLERANCE
}

/// Membership of the world-space region of one observation: positive depth and
/// a reprojection inside the image-space region.
pub fn in_world_region(x: &WorldPoint, obs: &Observation, noise: NoiseModel) -> bool {
    if !obs.camera.cheirality(x) {
        return false;
    }
    match obs.camera.project(x) {
        Ok(p) => in_image_region(&obs.point, &p, noise),
        Err(_) => false,
    }
}

/// Membership of the consistent region (intersection of all world regions).
pub fn in_consistent_region(x: &WorldPoint, inst: &Instance) -> bool {
    inst.observations()
        .iter()
        .all(|o| in_world_region(x, o, inst.noise()))
}
