//! Point-reconstruction algorithms.
//!
//! * [`triangulate_linear`]: normalized direct linear transform.
//! * [`triangulate_l2_refine`]: Gauss-Newton on the summed squared reprojection error.
//! * [`triangulate_consistent_lp`]: a vertex of the ℓ∞ consistency polytope.
//! * [`triangulate_avg_distance_lp`]: the point of the pruned polytope closest on
//!   average to its facet planes.
//! * [`triangulate_minimax`]: bisection on the largest reprojection error, with ℓ∞
//!   or ℓ2 image norms.

mod linear;
mod lp;
mod minimax;
mod refine;

use std::fmt;
use std::str::FromStr;

pub use linear::triangulate_linear;
pub use lp::{
    avg_distance_point, build_consistency_lp, consistency_constraints, depth_guard,
    remove_redundant_constraints, triangulate_avg_distance_lp, triangulate_consistent_lp,
    ConstraintSystem, DEPTH_MARGIN,
};
pub use minimax::{cone_feasible_point, triangulate_minimax, MAX_BRACKET};
pub use refine::triangulate_l2_refine;

use crate::consistency::{in_consistent_region, Instance, NormKind};
use crate::error::{Error, Result};
use crate::geometry::WorldPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Linear,
    L2Refined,
    ConsistentLp,
    AvgDistanceLp,
    MinimaxLinf,
    MinimaxL2,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Linear,
        Algorithm::L2Refined,
        Algorithm::ConsistentLp,
        Algorithm::AvgDistanceLp,
        Algorithm::MinimaxLinf,
        Algorithm::MinimaxL2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Linear => "linear",
            Algorithm::L2Refined => "l2-refined",
            Algorithm::ConsistentLp => "consistent-lp",
            Algorithm::AvgDistanceLp => "avg-distance-lp",
            Algorithm::MinimaxLinf => "minimax-linf",
            Algorithm::MinimaxL2 => "minimax-l2",
        }
    }

    /// Whether the algorithm always returns a consistent estimate under a
    /// matching noise model.
    pub fn is_consistent(self) -> bool {
        matches!(
            self,
            Algorithm::ConsistentLp
                | Algorithm::AvgDistanceLp
                | Algorithm::MinimaxLinf
                | Algorithm::MinimaxL2
        )
    }

    /// The `(ℓ_p', ℓ_p)` cost the algorithm minimizes, if it minimizes one.
    pub fn cost(self) -> Option<CostSpec> {
        match self {
            Algorithm::L2Refined => Some(CostSpec::L2_L2),
            Algorithm::MinimaxLinf => Some(CostSpec::LINF_LINF),
            Algorithm::MinimaxL2 => Some(CostSpec::L2_LINF),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                Error::Parse(format!(
                    "unknown algorithm `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// Image-space norm `p'` and residual-space norm `p` of a reprojection cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostSpec {
    image_norm: NormKind,
    residual_norm: NormKind,
}

impl CostSpec {
    pub const L2_L2: CostSpec = CostSpec {
        image_norm: NormKind::L2,
        residual_norm: NormKind::L2,
    };
    pub const LINF_LINF: CostSpec = CostSpec {
        image_norm: NormKind::Linf,
        residual_norm: NormKind::Linf,
    };
    pub const L2_LINF: CostSpec = CostSpec {
        image_norm: NormKind::L2,
        residual_norm: NormKind::Linf,
    };

    pub fn new(image_norm: NormKind, residual_norm: NormKind) -> Result<Self> {
        let spec = CostSpec {
            image_norm,
            residual_norm,
        };
        if [Self::L2_L2, Self::LINF_LINF, Self::L2_LINF].contains(&spec) {
            Ok(spec)
        } else {
            Err(Error::Unsupported(format!(
                "cost (l{image_norm}, l{residual_norm}); supported: (l2,l2), (linf,linf), (l2,linf)"
            )))
        }
    }

    pub fn image_norm(self) -> NormKind {
        self.image_norm
    }

    pub fn residual_norm(self) -> NormKind {
        self.residual_norm
    }

    /// `Σ‖·‖₂²` for `(2,2)`, `max‖·‖` for the minimax costs; infinite behind a camera.
    pub fn evaluate(self, inst: &Instance, x: &WorldPoint) -> f64 {
        match self.residual_norm {
            NormKind::Linf => inst.max_residual(x, self.image_norm),
            _ => inst.sum_squared_residual(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangulationResult {
    pub point: WorldPoint,
    pub algorithm: Algorithm,
    /// Gauss-Newton steps, bisection steps, or simplex pivots, depending on the algorithm.
    pub iterations: usize,
    pub objective: Option<f64>,
    /// Membership of the consistent region of the instance that produced it.
    pub consistent: bool,
    /// Set when refinement failed and the initializer's estimate was returned.
    pub fell_back: bool,
}

impl TriangulationResult {
    pub(crate) fn new(
        inst: &Instance,
        algorithm: Algorithm,
        point: WorldPoint,
        iterations: usize,
        objective: Option<f64>,
    ) -> Self {
        Self {
            point,
            algorithm,
            iterations,
            objective,
            consistent: in_consistent_region(&point, inst),
            fell_back: false,
        }
    }
}

/// Run `algorithm` with its default settings.
///
/// `L2Refined` starts from the linear estimate and falls back to it (with
/// `fell_back` set) if refinement diverges.
pub fn triangulate(inst: &Instance, algorithm: Algorithm) -> Result<TriangulationResult> {
    match algorithm {
        Algorithm::Linear => triangulate_linear(inst),
        Algorithm::L2Refined => {
            let init = triangulate_linear(inst)?;
            match triangulate_l2_refine(inst, &init.point) {
                Ok(r) => Ok(r),
                Err(Error::Diverged { .. }) => Ok(TriangulationResult {
                    algorithm: Algorithm::L2Refined,
                    fell_back: true,
                    ..init
                }),
                Err(e) => Err(e),
            }
        }
        Algorithm::ConsistentLp => triangulate_consistent_lp(inst, &[0.0; 3]),
        Algorithm::AvgDistanceLp => triangulate_avg_distance_lp(inst),
        Algorithm::MinimaxLinf => triangulate_minimax(inst, NormKind::Linf),
        Algorithm::MinimaxL2 => triangulate_minimax(inst, NormKind::L2),
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use nalgebra::{Matrix3, Vector2, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::consistency::{Instance, NoiseModel, NormKind};
    use crate::geometry::{look_at, Camera, WorldPoint};

    /// Cameras on a ring of radius 10 around the origin, jittered in height,
    /// all looking at the origin.
    pub fn ring_cameras(m: usize, rng: &mut impl Rng) -> Vec<Camera> {
        (0..m)
            .map(|i| {
                let theta =
                    2.0 * std::f64::consts::PI * (i as f64 + rng.random_range(0.0..0.5)) / m as f64;
                let eye = Vector3::new(
                    10.0 * theta.cos(),
                    10.0 * theta.sin(),
                    rng.random_range(-3.0..3.0),
                );
                let r = look_at(&eye, &Vector3::zeros(), &Vector3::z()).unwrap();
                Camera::new(1.0, [0.0, 0.0], r, eye).unwrap()
            })
            .collect()
    }

    pub fn random_point(rng: &mut impl Rng) -> WorldPoint {
        WorldPoint::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
    }

    pub fn noise_vector(rng: &mut impl Rng, q: NormKind, delta: f64) -> Vector2<f64> {
        loop {
            let v = Vector2::new(
                rng.random_range(-delta..=delta),
                rng.random_range(-delta..=delta),
            );
            if q.norm(v) <= delta {
                return v;
            }
        }
    }

    /// Random ring instance with bounded noise; returns the true point as well.
    pub fn noisy_instance(seed: u64, m: usize, q: NormKind, delta: f64) -> (Instance, WorldPoint) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cams = ring_cameras(m, &mut rng);
        let x = random_point(&mut rng);
        let eps: Vec<_> = (0..m).map(|_| noise_vector(&mut rng, q, delta)).collect();
        let noise = NoiseModel::new(q, delta).unwrap();
        (
            Instance::from_point(&cams, &x, Some(&eps), noise).unwrap(),
            x,
        )
    }

    pub fn stereo_pair() -> Vec<Camera> {
        [-1.0, 1.0]
            .iter()
            .map(|&cx| {
                let eye = Vector3::new(cx, 0.0, 0.0);
                let r = look_at(&eye, &Vector3::new(0.0, 0.0, 5.0), &Vector3::y()).unwrap();
                Camera::new(1.0, [0.0, 0.0], r, eye).unwrap()
            })
            .collect()
    }

    pub fn identity_camera() -> Camera {
        Camera::new(1.0, [0.0, 0.0], Matrix3::identity(), Vector3::zeros()).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("dlt".parse::<Algorithm>().is_err());
    }

    #[test]
    fn cost_spec_combinations() {
        assert!(CostSpec::new(NormKind::L2, NormKind::L2).is_ok());
        assert!(CostSpec::new(NormKind::Linf, NormKind::Linf).is_ok());
        assert!(CostSpec::new(NormKind::L2, NormKind::Linf).is_ok());
        assert!(CostSpec::new(NormKind::L1, NormKind::L1).is_err());
        assert!(CostSpec::new(NormKind::Linf, NormKind::L2).is_err());
    }
}
