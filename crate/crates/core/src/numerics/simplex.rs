//! Two-phase simplex for `min cᵀx  s.t.  A x ≤ b` with free `x`.
//!
//! The method runs on the dual in standard form,
//!
//! ```text
//!     min bᵀy   s.t.  Aᵀy = -c,  y ≥ 0,
//! ```
//!
//! whose constraint matrix has only `n` rows. A basis is a set of `n` rows of
//! `A`; its simplex multipliers are the primal point where those rows are
//! active, so every optimal basis yields a vertex of the primal feasible set.
//! Each iteration re-solves the `n × n` basis systems from scratch, which
//! keeps the work per pivot at `O(n³ + m n)` and avoids accumulated drift.
//!
//! Pivoting follows Bland's rule (lowest-index entering column, ratio ties
//! broken by lowest variable index), so results are deterministic and the
//! method cannot cycle.

use super::{dot, solve_dense, DenseMatrix};
use crate::error::{Error, Result};

/// Primal feasibility guaranteed for optimal points: `A x ≤ b + 1e-9`.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// Phase-I optimum above which the problem is declared infeasible.
pub const PHASE_ONE_TOLERANCE: f64 = 1e-9;

/// Relative tolerance used when pricing; much tighter than the contract above
/// so that vertices of consistency polytopes land on their facets to rounding
/// accuracy.
const PRICING_TOLERANCE: f64 = 1e-12;
const PIVOT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Present iff `status == Optimal`.
    pub x: Option<Vec<f64>>,
    /// Present iff `status == Optimal`.
    pub objective: Option<f64>,
    pub pivots: usize,
}

impl LpResult {
    fn without_solution(status: LpStatus, pivots: usize) -> Self {
        Self {
            status,
            x: None,
            objective: None,
            pivots,
        }
    }
}

pub fn solve_lp(c: &[f64], a: &DenseMatrix, b: &[f64]) -> Result<LpResult> {
    let (m, n) = (a.rows(), a.cols());
    if n == 0 || m == 0 {
        return Err(Error::DimensionMismatch(format!("empty LP ({m}x{n})")));
    }
    if c.len() != n || b.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "c has {} entries and b has {} for a {m}x{n} constraint matrix",
            c.len(),
            b.len()
        )));
    }
    if !a.is_finite() || !c.iter().chain(b).all(|v| v.is_finite()) {
        return Err(Error::Numerical("non-finite LP data".into()));
    }

    let mut dual = DualTableau::new(a, b, c);
    let phase_one = dual.run(Phase::One)?;
    debug_assert!(phase_one != Outcome::Unbounded);
    let infeasibility = dual.artificial_mass();
    let scale = 1.0 + c.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if infeasibility > PHASE_ONE_TOLERANCE * scale {
        // The dual is infeasible: the primal is unbounded or infeasible.
        // Feasibility alone decides which.
        let feasible = solve_lp(&vec![0.0; n], a, b)?;
        let status = match feasible.status {
            LpStatus::Optimal => LpStatus::Unbounded,
            _ => LpStatus::Infeasible,
        };
        return Ok(LpResult::without_solution(
            status,
            dual.pivots + feasible.pivots,
        ));
    }
    dual.drive_out_artificials();

    match dual.run(Phase::Two)? {
        Outcome::Unbounded => Ok(LpResult::without_solution(
            LpStatus::Infeasible,
            dual.pivots,
        )),
        Outcome::Optimal => {
            let x = dual.multipliers(Phase::Two)?;
            let objective = dot(c, &x);
            Ok(LpResult {
                status: LpStatus::Optimal,
                x: Some(x),
                objective: Some(objective),
                pivots: dual.pivots,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
}

/// Standard-form dual: columns `0..m` are rows of `A`, columns `m..m+n` are
/// signed unit artificials.
struct DualTableau<'a> {
    a: &'a DenseMatrix,
    b: &'a [f64],
    rhs: Vec<f64>,
    signs: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    pivots: usize,
    max_pivots: usize,
}

impl<'a> DualTableau<'a> {
    fn new(a: &'a DenseMatrix, b: &'a [f64], c: &[f64]) -> Self {
        let (m, n) = (a.rows(), a.cols());
        let rhs: Vec<f64> = c.iter().map(|v| -v).collect();
        let signs = rhs
            .iter()
            .map(|v| if *v < 0.0 { -1.0 } else { 1.0 })
            .collect();
        let basis: Vec<usize> = (m..m + n).collect();
        let mut is_basic = vec![false; m + n];
        basis.iter().for_each(|&j| is_basic[j] = true);
        Self {
            a,
            b,
            rhs,
            signs,
            basis,
            is_basic,
            pivots: 0,
            max_pivots: 100_000 + 200 * (m + n),
        }
    }

    fn n(&self) -> usize {
        self.a.cols()
    }

    fn m(&self) -> usize {
        self.a.rows()
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.m()
    }

    fn column(&self, j: usize, out: &mut [f64]) {
        if j < self.m() {
            out.copy_from_slice(self.a.row(j));
        } else {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[j - self.m()] = self.signs[j - self.m()];
        }
    }

    fn cost(&self, j: usize, phase: Phase) -> f64 {
        match (phase, self.is_artificial(j)) {
            (Phase::One, true) => 1.0,
            (Phase::One, false) => 0.0,
            (Phase::Two, true) => 0.0,
            (Phase::Two, false) => self.b[j],
        }
    }

    /// Basis matrix `B` (columns are basic columns), row-major.
    fn basis_matrix(&self) -> Vec<f64> {
        let n = self.n();
        let mut bm = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for (i, &j) in self.basis.iter().enumerate() {
            self.column(j, &mut col);
            for r in 0..n {
                bm[r * n + i] = col[r];
            }
        }
        bm
    }

    fn transpose(n: usize, m: &[f64]) -> Vec<f64> {
        let mut t = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                t[j * n + i] = m[i * n + j];
            }
        }
        t
    }

    fn singular() -> Error {
        Error::Numerical("simplex basis became singular".into())
    }

    fn basic_values(&self, bm: &[f64]) -> Result<Vec<f64>> {
        solve_dense(self.n(), bm, &self.rhs).ok_or_else(Self::singular)
    }

    fn multipliers(&self, phase: Phase) -> Result<Vec<f64>> {
        let n = self.n();
        let bm = self.basis_matrix();
        let costs: Vec<f64> = self.basis.iter().map(|&j| self.cost(j, phase)).collect();
        solve_dense(n, &Self::transpose(n, &bm), &costs).ok_or_else(Self::singular)
    }

    fn artificial_mass(&self) -> f64 {
        let Ok(values) = self.basic_values(&self.basis_matrix()) else {
            return f64::INFINITY;
        };
        self.basis
            .iter()
            .zip(&values)
            .filter(|(&j, _)| self.is_artificial(j))
            .map(|(_, v)| v.max(0.0))
            .sum()
    }

    /// Lowest-index column with a clearly negative reduced cost.
    fn entering(&self, phase: Phase, pi: &[f64]) -> Option<usize> {
        let m = self.m();
        // Artificials never re-enter; in phase one they start basic and a
        // nonbasic artificial has reduced cost ≥ 0 at any optimum of interest.
        (0..m).find(|&j| {
            if self.is_basic[j] {
                return false;
            }
            let row = self.a.row(j);
            let mut s = 0.0;
            let mut mag = 0.0;
            for (a, p) in row.iter().zip(pi) {
                s += a * p;
                mag += (a * p).abs();
            }
            let cost = self.cost(j, phase);
            let reduced = cost - s;
            reduced < -PRICING_TOLERANCE * (1.0 + cost.abs() + mag)
        })
    }

    fn run(&mut self, phase: Phase) -> Result<Outcome> {
        let n = self.n();
        let mut col = vec![0.0; n];
        loop {
            if self.pivots > self.max_pivots {
                return Err(Error::Numerical("simplex iteration limit reached".into()));
            }
            let pi = self.multipliers(phase)?;
            let Some(enter) = self.entering(phase, &pi) else {
                return Ok(Outcome::Optimal);
            };
            let bm = self.basis_matrix();
            let values = self.basic_values(&bm)?;
            self.column(enter, &mut col);
            let d = solve_dense(n, &bm, &col).ok_or_else(Self::singular)?;
            let dmax = d.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            let threshold = PIVOT_TOLERANCE * dmax.max(1.0);

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..n {
                if d[i] <= threshold {
                    continue;
                }
                let ratio = values[i].max(0.0) / d[i];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                        if ratio < best && !tie || tie && self.basis[i] < self.basis[k] {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
            let Some((i, _)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            self.is_basic[self.basis[i]] = false;
            self.is_basic[enter] = true;
            self.basis[i] = enter;
            self.pivots += 1;
        }
    }

    /// Replace zero-level artificials by real columns where the rank allows.
    fn drive_out_artificials(&mut self) {
        let n = self.n();
        for i in 0..n {
            if !self.is_artificial(self.basis[i]) {
                continue;
            }
            let bm = self.basis_matrix();
            let mut unit = vec![0.0; n];
            unit[i] = 1.0;
            // Row i of B⁻¹.
            let Some(row) = solve_dense(n, &Self::transpose(n, &bm), &unit) else {
                return;
            };
            let candidate = (0..self.m()).filter(|&j| !self.is_basic[j]).find(|&j| {
                let a = self.a.row(j);
                let norm = dot(a, a).sqrt();
                dot(&row, a).abs() > 1e-9 * norm.max(1e-300)
            });
            if let Some(j) = candidate {
                self.is_basic[self.basis[i]] = false;
                self.is_basic[j] = true;
                self.basis[i] = j;
                self.pivots += 1;
            }
        }
    }
}
