use nalgebra::{Vector2, Vector3};

use super::lp::consistency_constraints;
use super::{triangulate_linear, Algorithm, TriangulationResult};
use crate::consistency::{Instance, NormKind};
use crate::error::{Error, Result};
use crate::geometry::WorldPoint;
use crate::numerics::{solve_lp, DenseMatrix, LpStatus};

/// Largest upper bracket tried before the geometry is declared degenerate.
pub const MAX_BRACKET: f64 = 1e6;
const BISECTION_TOLERANCE: f64 = 1e-9;
/// Cutting-plane rounds before an ℓ2 level is declared infeasible.
const MAX_CUT_ROUNDS: usize = 200;
const INITIAL_DIRECTIONS: usize = 8;

/// Minimize `max_i ‖x_i - π_i(X)‖` over points in front of every camera.
///
/// Bisects on the level `γ`. For `Linf` each level is the box-noise polytope
/// with half-width `γ`; for `L2` it is an intersection of circular cones,
/// tested by [`cone_feasible_point`]. The bracket starts at the residual of
/// the linear estimate. Stops when the bracket is narrower than
/// `1e-9·(1 + γ_hi)` and returns the best feasible point, with its achieved
/// maximum residual as the objective.
pub fn triangulate_minimax(inst: &Instance, image_norm: NormKind) -> Result<TriangulationResult> {
    let algorithm = match image_norm {
        NormKind::Linf => Algorithm::MinimaxLinf,
        NormKind::L2 => Algorithm::MinimaxL2,
        NormKind::L1 => return Err(Error::Unsupported("minimax with l1 image norm".into())),
    };
    let feasible = |gamma: f64| -> Result<Option<WorldPoint>> {
        match image_norm {
            NormKind::Linf => box_feasible_point(inst, gamma),
            _ => cone_feasible_point(inst, gamma),
        }
    };
    let residual = |x: &WorldPoint| inst.max_residual(x, image_norm);

    let start = triangulate_linear(inst)
        .ok()
        .map(|r| r.point)
        .filter(|x| residual(x).is_finite());
    let (mut best, mut best_gamma) = match start {
        Some(x) => (x, residual(&x)),
        None => {
            let scale = inst.noise().delta.max(1e-6);
            let mut gamma = scale;
            loop {
                if gamma > MAX_BRACKET {
                    return Err(Error::Degenerate(format!(
                        "no feasible level up to {MAX_BRACKET:e} for the minimax problem"
                    )));
                }
                if let Some(x) = feasible(gamma)? {
                    break (x, residual(&x).min(gamma));
                }
                gamma *= 2.0;
            }
        }
    };
    let mut lo = 0.0;
    let mut hi = best_gamma;
    let mut steps = 0;
    while hi - lo >= BISECTION_TOLERANCE * (1.0 + hi) {
        steps += 1;
        let mid = 0.5 * (lo + hi);
        match feasible(mid)? {
            Some(x) => {
                let r = residual(&x);
                if r < best_gamma {
                    best = x;
                    best_gamma = r;
                }
                hi = mid.min(r);
            }
            None => lo = mid,
        }
    }
    let objective = residual(&best);
    Ok(TriangulationResult::new(
        inst,
        algorithm,
        best,
        steps,
        Some(objective),
    ))
}

fn box_feasible_point(inst: &Instance, gamma: f64) -> Result<Option<WorldPoint>> {
    let sys = consistency_constraints(inst, gamma)?;
    let lp = solve_lp(&[0.0; 3], sys.a(), sys.b())?;
    Ok(match lp.status {
        LpStatus::Optimal => {
            let x = lp.x.expect("optimal LP carries a point");
            let p = WorldPoint::new(x[0], x[1], x[2]);
            inst.observations()
                .iter()
                .all(|o| o.camera.cheirality(&p))
                .then_some(p)
        }
        _ => None,
    })
}

/// A point whose reprojections all lie within `gamma` (Euclidean) of the
/// observations, or `None` when the cutting-plane search finds none.
///
/// Each cone `‖x_i - π_i(X)‖₂ ≤ γ` (with positive depth) equals the
/// intersection of the half-spaces `nᵀ(p̄_{1,2}ᵀX + p_{14,24} - x_i d_i(X)) ≤ γ d_i(X)`
/// over unit `n`. The search keeps a finite set of these, starting from
/// eight directions per camera, and maximizes a common margin `s` (capped
/// at 1) by LP. A non-positive margin proves the cone intersection has no
/// interior. Otherwise the LP point is checked against the exact cones and
/// tangent half-spaces are added where it falls outside.
pub fn cone_feasible_point(inst: &Instance, gamma: f64) -> Result<Option<WorldPoint>> {
    let mut a = DenseMatrix::with_capacity(4, INITIAL_DIRECTIONS * inst.len() + 1);
    let mut b = Vec::new();
    a.push_row(&[0.0, 0.0, 0.0, 1.0])?;
    b.push(1.0);
    let add_cut =
        |a: &mut DenseMatrix, b: &mut Vec<f64>, i: usize, n: Vector2<f64>| -> Result<()> {
            let o = &inst.observations()[i];
            let p = o.camera.matrix();
            let row = (p.row(0) - p.row(2) * o.point.x) * n.x
                + (p.row(1) - p.row(2) * o.point.y) * n.y
                - p.row(2) * gamma;
            let normal = Vector3::new(row[0], row[1], row[2]);
            a.push_row(&[row[0], row[1], row[2], normal.norm()])?;
            b.push(-row[3]);
            Ok(())
        };
    for i in 0..inst.len() {
        for k in 0..INITIAL_DIRECTIONS {
            let t = 2.0 * std::f64::consts::PI * k as f64 / INITIAL_DIRECTIONS as f64;
            add_cut(&mut a, &mut b, i, Vector2::new(t.cos(), t.sin()))?;
        }
    }
    for _ in 0..MAX_CUT_ROUNDS {
        let lp = solve_lp(&[0.0, 0.0, 0.0, -1.0], &a, &b)?;
        if lp.status != LpStatus::Optimal {
            return Ok(None);
        }
        let z = lp.x.expect("optimal LP carries a point");
        if z[3] <= 0.0 {
            return Ok(None);
        }
        let x = WorldPoint::new(z[0], z[1], z[2]);
        let mut violated = false;
        for (i, o) in inst.observations().iter().enumerate() {
            let Ok(proj) = o.camera.project(&x) else {
                return Ok(None);
            };
            let e = proj - o.point;
            let norm = e.norm();
            if !o.camera.cheirality(&x) {
                return Ok(None);
            }
            if norm > gamma {
                add_cut(&mut a, &mut b, i, e / norm)?;
                violated = true;
            }
        }
        if !violated {
            return Ok(Some(x));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::{in_consistent_region, NoiseModel};
    use crate::triangulators::fixtures::*;

    #[test]
    fn exact_data_has_zero_optimum() {
        for norm in [NormKind::Linf, NormKind::L2] {
            for seed in 0..5 {
                let (inst, x) = noisy_instance(seed, 6, norm, 0.0);
                let r = triangulate_minimax(&inst, norm).unwrap();
                assert!(r.objective.unwrap() <= 1e-7, "{norm}: {:?}", r.objective);
                assert!(
                    (r.point - x).norm() < 1e-6,
                    "{norm}: {}",
                    (r.point - x).norm()
                );
            }
        }
    }

    #[test]
    fn optimum_within_noise_bound_and_consistent() {
        for norm in [NormKind::Linf, NormKind::L2] {
            for seed in 0..20 {
                let (inst, _) = noisy_instance(50 + seed, 8, norm, 0.01);
                let r = triangulate_minimax(&inst, norm).unwrap();
                assert!(r.objective.unwrap() <= 0.01 + 1e-12);
                assert!(in_consistent_region(&r.point, &inst), "{norm} seed {seed}");
            }
        }
    }

    #[test]
    fn two_camera_linf_matches_grid() {
        let cams = stereo_pair();
        let x = WorldPoint::new(0.1, -0.2, 5.0);
        let eps = [Vector2::new(0.01, -0.004), Vector2::new(-0.007, 0.009)];
        let inst = Instance::from_point(
            &cams,
            &x,
            Some(&eps),
            NoiseModel::new(NormKind::Linf, 0.01).unwrap(),
        )
        .unwrap();
        let r = triangulate_minimax(&inst, NormKind::Linf).unwrap();
        let gamma = r.objective.unwrap();

        let (steps, radius) = (100, 0.5);
        let h = 2.0 * radius / steps as f64;
        let mut grid = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps {
                for k in 0..=steps {
                    let p = r.point + Vector3::new(i as f64, j as f64, k as f64) * h
                        - Vector3::repeat(radius);
                    grid = grid.min(inst.max_residual(&p, NormKind::Linf));
                }
            }
        }
        assert!(gamma <= grid + 1e-12);
        // Max residual changes by at most |∇|·h/2 per coordinate from the nearest
        // grid point; the gradient magnitude is bounded by f·‖·‖/depth ≈ 1/4.
        assert!(grid - gamma <= 0.25 * h * 3f64.sqrt());
    }

    #[test]
    fn cone_check_agrees_with_box_bounds() {
        let (inst, x) = noisy_instance(7, 5, NormKind::L2, 0.01);
        let r2 = inst.max_residual(&x, NormKind::L2);
        assert!(cone_feasible_point(&inst, r2 * 1.001).unwrap().is_some());
        let opt = triangulate_minimax(&inst, NormKind::L2)
            .unwrap()
            .objective
            .unwrap();
        assert!(cone_feasible_point(&inst, opt * 0.99).unwrap().is_none());
        assert!(opt <= r2);
    }

    #[test]
    fn l1_rejected() {
        let (inst, _) = noisy_instance(7, 5, NormKind::L1, 0.01);
        assert!(matches!(
            triangulate_minimax(&inst, NormKind::L1),
            Err(Error::Unsupported(_))
        ));
    }
}
