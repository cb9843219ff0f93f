use nalgebra::RowVector4;

use super::{Algorithm, TriangulationResult};
use crate::consistency::{Instance, NormKind};
use crate::error::{Error, Result};
use crate::geometry::WorldPoint;
use crate::numerics::{dot, solve_lp, DenseMatrix, LpStatus};

/// Relative slack under which a row counts as implied by the others.
const REDUNDANCY_TOLERANCE: f64 = 1e-9;

/// Polyhedron `A X ≤ b` in world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    a: DenseMatrix,
    b: Vec<f64>,
}

impl ConstraintSystem {
    pub fn new(a: DenseMatrix, b: Vec<f64>) -> Result<Self> {
        if a.cols() != 3 {
            return Err(Error::DimensionMismatch(format!(
                "constraint matrix has {} columns, expected 3",
                a.cols()
            )));
        }
        if a.rows() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows but {} right-hand sides",
                a.rows(),
                b.len()
            )));
        }
        if !a.is_finite() || !b.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("non-finite constraint data".into()));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn rows(&self) -> usize {
        self.b.len()
    }

    /// `max_l (a_lᵀX - b_l)`; non-positive exactly on the polyhedron.
    pub fn max_violation(&self, x: &WorldPoint) -> f64 {
        (0..self.rows())
            .map(|l| dot(self.a.row(l), x.coords.as_slice()) - self.b[l])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &WorldPoint, tol: f64) -> bool {
        self.max_violation(x) <= tol
    }

    /// Signed distances `(a_lᵀX - b_l)/‖a_l‖` to every facet plane.
    pub fn plane_distances(&self, x: &WorldPoint) -> Vec<f64> {
        (0..self.rows())
            .map(|l| {
                let row = self.a.row(l);
                (dot(row, x.coords.as_slice()) - self.b[l]) / dot(row, row).sqrt()
            })
            .collect()
    }

    fn select(&self, keep: &[usize]) -> Self {
        Self {
            a: self.a.select_rows(keep),
            b: keep.iter().map(|&l| self.b[l]).collect(),
        }
    }
}

/// Four half-spaces per camera bounding each image coordinate of the
/// reprojection to `[x_k - delta, x_k + delta]`, valid for points in front
/// of the camera.
pub fn consistency_constraints(inst: &Instance, delta: f64) -> Result<ConstraintSystem> {
    let mut a = DenseMatrix::with_capacity(3, 4 * inst.len());
    let mut b = Vec::with_capacity(4 * inst.len());
    for o in inst.observations() {
        let p1 = o.camera.row(0);
        let p2 = o.camera.row(1);
        let p3 = o.camera.row(2);
        let mut emit = |row: RowVector4<f64>| -> Result<()> {
            a.push_row(&[row[0], row[1], row[2]])?;
            b.push(-row[3]);
            Ok(())
        };
        let lo = o.point - nalgebra::Vector2::repeat(delta);
        let hi = o.point + nalgebra::Vector2::repeat(delta);
        emit(p3 * lo.x - p1)?;
        emit(p3 * lo.y - p2)?;
        emit(p1 - p3 * hi.x)?;
        emit(p2 - p3 * hi.y)?;
    }
    ConstraintSystem::new(a, b)
}

/// The polytope of the instance's bounded-noise model; requires box noise.
pub fn build_consistency_lp(inst: &Instance) -> Result<ConstraintSystem> {
    let noise = inst.noise();
    if noise.q != NormKind::Linf {
        return Err(Error::Unsupported(format!(
            "consistency LP needs l-infinity noise, got l{}",
            noise.q
        )));
    }
    consistency_constraints(inst, noise.delta)
}

/// Relative depth margin of [`depth_guard`].
pub const DEPTH_MARGIN: f64 = 1e-3;

/// One row per camera keeping points at depth at least `DEPTH_MARGIN` times
/// the spread of the camera centres. The image-space rows alone admit each
/// camera's centre, where no projection exists.
pub fn depth_guard(inst: &Instance) -> Result<ConstraintSystem> {
    let centres: Vec<_> = inst
        .observations()
        .iter()
        .map(|o| *o.camera.centre())
        .collect();
    let mean = centres.iter().sum::<nalgebra::Vector3<f64>>() / centres.len() as f64;
    let spread = (centres
        .iter()
        .map(|c| (c - mean).norm_squared())
        .sum::<f64>()
        / centres.len() as f64)
        .sqrt();
    let margin = DEPTH_MARGIN * spread.max(f64::MIN_POSITIVE);
    let mut a = DenseMatrix::with_capacity(3, inst.len());
    let mut b = Vec::with_capacity(inst.len());
    for o in inst.observations() {
        let p3 = o.camera.row(2);
        let scale = (p3[0] * p3[0] + p3[1] * p3[1] + p3[2] * p3[2]).sqrt();
        a.push_row(&[-p3[0], -p3[1], -p3[2]])?;
        b.push(p3[3] - margin * scale);
    }
    ConstraintSystem::new(a, b)
}

fn stack(top: &ConstraintSystem, bottom: &ConstraintSystem) -> Result<ConstraintSystem> {
    let mut a = top.a.clone();
    for l in 0..bottom.rows() {
        a.push_row(bottom.a.row(l))?;
    }
    let b = top.b.iter().chain(&bottom.b).copied().collect();
    ConstraintSystem::new(a, b)
}

/// `min cᵀX` over the consistency polytope, kept clear of the camera centres
/// by [`depth_guard`]. `c = 0` returns a feasible vertex.
pub fn triangulate_consistent_lp(inst: &Instance, c: &[f64; 3]) -> Result<TriangulationResult> {
    let sys = stack(&build_consistency_lp(inst)?, &depth_guard(inst)?)?;
    let lp = solve_lp(c, &sys.a, &sys.b)?;
    match lp.status {
        LpStatus::Optimal => {
            let x = lp.x.expect("optimal LP carries a point");
            let point = WorldPoint::new(x[0], x[1], x[2]);
            Ok(TriangulationResult::new(
                inst,
                Algorithm::ConsistentLp,
                point,
                lp.pivots,
                lp.objective,
            ))
        }
        LpStatus::Infeasible => Err(Error::Infeasible),
        LpStatus::Unbounded => Err(Error::Unbounded),
    }
}

/// Drop rows implied by the others, one at a time in row order.
///
/// Row `l` goes when `max a_lᵀX` over the rows still kept (excluding `l`)
/// does not exceed `b_l` by more than a relative `1e-9`. The feasible set is
/// unchanged.
pub fn remove_redundant_constraints(sys: &ConstraintSystem) -> Result<ConstraintSystem> {
    let phase_one = solve_lp(&[0.0; 3], &sys.a, &sys.b)?;
    if phase_one.status != LpStatus::Optimal {
        return Err(Error::Infeasible);
    }
    let mut keep: Vec<usize> = (0..sys.rows()).collect();
    let mut l_pos = 0;
    while l_pos < keep.len() {
        let l = keep[l_pos];
        let others: Vec<usize> = keep.iter().copied().filter(|&k| k != l).collect();
        if others.is_empty() {
            break;
        }
        let sub = sys.select(&others);
        let row = sys.a.row(l);
        let objective: Vec<f64> = row.iter().map(|v| -v).collect();
        let lp = solve_lp(&objective, &sub.a, &sub.b)?;
        let redundant = match lp.status {
            LpStatus::Optimal => {
                let max = -lp.objective.expect("optimal LP carries an objective");
                let scale = 1.0 + sys.b[l].abs() + dot(row, row).sqrt();
                max <= sys.b[l] + REDUNDANCY_TOLERANCE * scale
            }
            LpStatus::Unbounded => false,
            LpStatus::Infeasible => {
                return Err(Error::Numerical(
                    "subsystem of a feasible system reported infeasible".into(),
                ))
            }
        };
        if redundant {
            keep.remove(l_pos);
        } else {
            l_pos += 1;
        }
    }
    Ok(sys.select(&keep))
}

/// Point of the polyhedron minimizing the summed distance to its facet planes.
///
/// Returns the point, the objective `Σ_l |d_l|`, and the simplex pivot count.
/// The system should already be free of redundant rows.
pub fn avg_distance_point(sys: &ConstraintSystem) -> Result<(WorldPoint, f64, usize)> {
    avg_distance_point_guarded(sys, None)
}

/// As [`avg_distance_point`], with `guard` rows constraining the point
/// without entering the objective.
fn avg_distance_point_guarded(
    sys: &ConstraintSystem,
    guard: Option<&ConstraintSystem>,
) -> Result<(WorldPoint, f64, usize)> {
    let m = sys.rows();
    let n = 3 + m;
    let mut a = DenseMatrix::with_capacity(n, 3 * m);
    let mut b = Vec::with_capacity(3 * m);
    let mut row = vec![0.0; n];
    for l in 0..m {
        row.fill(0.0);
        row[..3].copy_from_slice(sys.a.row(l));
        a.push_row(&row)?;
        b.push(sys.b[l]);
    }
    if let Some(g) = guard {
        for l in 0..g.rows() {
            row.fill(0.0);
            row[..3].copy_from_slice(g.a.row(l));
            a.push_row(&row)?;
            b.push(g.b[l]);
        }
    }
    for l in 0..m {
        let al = sys.a.row(l);
        let norm = dot(al, al).sqrt();
        if norm == 0.0 {
            return Err(Error::Degenerate(format!("constraint row {l} is zero")));
        }
        for sign in [1.0, -1.0] {
            row.fill(0.0);
            for k in 0..3 {
                row[k] = sign * al[k] / norm;
            }
            row[3 + l] = -1.0;
            a.push_row(&row)?;
            b.push(sign * sys.b[l] / norm);
        }
    }
    let mut c = vec![1.0; n];
    c[..3].fill(0.0);
    let lp = solve_lp(&c, &a, &b)?;
    match lp.status {
        LpStatus::Optimal => {
            let x = lp.x.expect("optimal LP carries a point");
            let point = WorldPoint::new(x[0], x[1], x[2]);
            let objective = sys.plane_distances(&point).iter().map(|d| d.abs()).sum();
            Ok((point, objective, lp.pivots))
        }
        LpStatus::Infeasible => Err(Error::Infeasible),
        LpStatus::Unbounded => Err(Error::Unbounded),
    }
}

/// Prune the consistency polytope, then minimize the summed facet distances
/// subject to [`depth_guard`].
pub fn triangulate_avg_distance_lp(inst: &Instance) -> Result<TriangulationResult> {
    let sys = remove_redundant_constraints(&build_consistency_lp(inst)?)?;
    let (point, objective, pivots) = avg_distance_point_guarded(&sys, Some(&depth_guard(inst)?))?;
    Ok(TriangulationResult::new(
        inst,
        Algorithm::AvgDistanceLp,
        point,
        pivots,
        Some(objective),
    ))
}
