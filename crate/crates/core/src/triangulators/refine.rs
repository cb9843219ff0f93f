use nalgebra::Vector3;

use super::{Algorithm, TriangulationResult};
use crate::consistency::Instance;
use crate::error::{Error, Result};
use crate::geometry::WorldPoint;
use crate::numerics::{least_squares, DenseMatrix};

const MAX_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 25;
const STEP_TOLERANCE: f64 = 1e-12;

/// Stacked residuals `x_i - π_i(X)` and their Jacobian with respect to `X`.
fn linearize(inst: &Instance, x: &WorldPoint) -> Option<(DenseMatrix, Vec<f64>)> {
    let mut jac = DenseMatrix::with_capacity(3, 2 * inst.len());
    let mut res = Vec::with_capacity(2 * inst.len());
    for o in inst.observations() {
        let h = o.camera.project_homogeneous(x);
        let w = h.z;
        if !(w > 0.0) {
            return None;
        }
        let (u, v) = (h.x / w, h.y / w);
        let p = o.camera.matrix();
        let p3: Vector3<f64> = p.fixed_view::<1, 3>(2, 0).transpose();
        for (k, proj) in [u, v].into_iter().enumerate() {
            let pk: Vector3<f64> = p.fixed_view::<1, 3>(k, 0).transpose();
            let d = -(pk - p3 * proj) / w;
            jac.push_row(d.as_slice()).ok()?;
            res.push(o.point[k] - proj);
        }
    }
    Some((jac, res))
}

/// Gauss-Newton on `Σ_i ‖x_i - π_i(X)‖₂²` from `init`.
///
/// Steps are halved (up to 25 times) until the cost decreases; the loop
/// stops when no halving helps, the step falls below `1e-12·(1 + ‖X‖)`, or
/// after 100 iterations. The cost never increases over the initializer.
/// An initializer behind a camera is reported as [`Error::Diverged`].
pub fn triangulate_l2_refine(inst: &Instance, init: &WorldPoint) -> Result<TriangulationResult> {
    let mut x = *init;
    let mut cost = inst.sum_squared_residual(&x);
    if !cost.is_finite() {
        return Err(Error::Diverged {
            best: x,
            iterations: 0,
        });
    }
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        let Some((jac, res)) = linearize(inst, &x) else {
            return Err(Error::Diverged {
                best: x,
                iterations,
            });
        };
        let step = match least_squares(&jac, &res) {
            Ok(s) => Vector3::new(s[0], s[1], s[2]),
            Err(Error::Singular { .. }) => break,
            Err(e) => return Err(e),
        };
        iterations += 1;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = x + step * t;
            let c = inst.sum_squared_residual(&candidate);
            if c < cost {
                accepted = Some((candidate, c, t));
                break;
            }
            t *= 0.5;
        }
        let Some((next, next_cost, t)) = accepted else {
            break;
        };
        x = next;
        cost = next_cost;
        if (step * t).norm() < STEP_TOLERANCE * (1.0 + x.coords.norm()) {
            break;
        }
    }
    Ok(TriangulationResult::new(
        inst,
        Algorithm::L2Refined,
        x,
        iterations,
        Some(cost),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::{NoiseModel, NormKind};
    use crate::triangulators::fixtures::*;
    use crate::triangulators::triangulate_linear;

    #[test]
    fn converges_from_offset_on_exact_data() {
        for seed in 0..10 {
            let (inst, x) = noisy_instance(seed, 5, NormKind::Linf, 0.0);
            let r = triangulate_l2_refine(&inst, &(x + Vector3::new(1e-3, 0.0, 0.0))).unwrap();
            assert!((r.point - x).norm() < 1e-10, "{}", (r.point - x).norm());
        }
    }

    #[test]
    fn never_worse_than_initializer() {
        for seed in 0..30 {
            let (inst, _) = noisy_instance(seed, 7, NormKind::Linf, 0.02);
            let init = triangulate_linear(&inst).unwrap().point;
            let r = triangulate_l2_refine(&inst, &init).unwrap();
            assert!(r.objective.unwrap() <= inst.sum_squared_residual(&init));
        }
    }

    /// Nested grid search: each level scans a 41³ grid and recentres on the
    /// best point with the spacing shrunk tenfold, down to spacing 1e-4.
    fn grid_minimum(inst: &Instance, centre: WorldPoint, radius: f64) -> f64 {
        let mut best = centre;
        let mut best_cost = inst.sum_squared_residual(&best);
        let mut h = radius / 20.0;
        while h >= 1e-4 * 0.999 {
            let c0 = best;
            for i in -20..=20 {
                for j in -20..=20 {
                    for k in -20..=20 {
                        let p = c0 + Vector3::new(i as f64, j as f64, k as f64) * h;
                        let c = inst.sum_squared_residual(&p);
                        if c < best_cost {
                            best_cost = c;
                            best = p;
                        }
                    }
                }
            }
            h /= 10.0;
        }
        best_cost
    }

    #[test]
    fn two_camera_cost_matches_grid() {
        let cams = stereo_pair();
        let x = WorldPoint::new(0.1, -0.2, 5.0);
        let eps = [
            nalgebra::Vector2::new(0.01, -0.004),
            nalgebra::Vector2::new(-0.007, 0.009),
        ];
        let inst = Instance::from_point(
            &cams,
            &x,
            Some(&eps),
            NoiseModel::new(NormKind::Linf, 0.01).unwrap(),
        )
        .unwrap();
        let init = triangulate_linear(&inst).unwrap().point;
        let r = triangulate_l2_refine(&inst, &init).unwrap();
        let grid = grid_minimum(&inst, init, 0.1);
        assert!(
            (r.objective.unwrap() - grid).abs() < 1e-6,
            "{} vs {grid}",
            r.objective.unwrap()
        );
        assert!(r.objective.unwrap() <= grid + 1e-15);
    }

    #[test]
    fn initializer_behind_camera_diverges() {
        let (inst, _) = noisy_instance(3, 4, NormKind::Linf, 0.0);
        let behind = WorldPoint::new(40.0, 40.0, 0.0);
        assert!(matches!(
            triangulate_l2_refine(&inst, &behind),
            Err(Error::Diverged { iterations: 0, .. })
        ));
    }
}
