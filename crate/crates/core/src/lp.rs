//! Dense two-phase primal simplex for `min c'x  s.t.  Ax >= b, x >= 0`.
//!
//! Pivoting follows Bland's rule (lowest eligible index for both the
//! entering and the leaving variable), so the solver terminates without a
//! cycling guard ever firing and repeated solves are bit-identical.

use serde::Serialize;

use crate::error::{Error, Result};

pub const FEASIBILITY_TOL: f64 = 1e-7;
pub const OPTIMALITY_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearProgram {
    costs: Vec<f64>,
    matrix: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// Hypothesis pair behind each row, when the LP was built from an instance.
    row_tags: Vec<(usize, usize)>,
}

impl LinearProgram {
    pub fn new(costs: Vec<f64>, matrix: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("LP costs must be finite"));
        }
        if matrix.len() != rhs.len() {
            return Err(Error::invalid(format!(
                "LP has {} rows but {} right-hand sides",
                matrix.len(),
                rhs.len()
            )));
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != costs.len() {
                return Err(Error::invalid(format!(
                    "LP row {i} has width {} but there are {} variables",
                    row.len(),
                    costs.len()
                )));
            }
            if row.iter().chain([&rhs[i]]).any(|a| !a.is_finite()) {
                return Err(Error::invalid(format!("LP row {i} has a non-finite entry")));
            }
        }
        Ok(LinearProgram {
            costs,
            matrix,
            rhs,
            row_tags: Vec::new(),
        })
    }

    pub fn with_row_tags(mut self, tags: Vec<(usize, usize)>) -> Result<Self> {
        if tags.len() != self.matrix.len() {
            return Err(Error::invalid("one row tag per LP row is required"));
        }
        self.row_tags = tags;
        Ok(self)
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn row_tags(&self) -> &[(usize, usize)] {
        &self.row_tags
    }

    pub fn num_rows(&self) -> usize {
        self.matrix.len()
    }

    pub fn num_vars(&self) -> usize {
        self.costs.len()
    }

    /// Largest violation `b_i - a_i x` over all rows (0 when satisfied).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.matrix
            .iter()
            .zip(&self.rhs)
            .map(|(row, b)| b - dot(row, x))
            .fold(0.0, f64::max)
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        dot(&self.costs, x)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers `y >= 0`; empty unless optimal.
    pub dual: Vec<f64>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Whether `sol.dual` certifies optimality: `y >= 0`, `A'y <= c` and
/// `b'y` equal to the objective within `tol`.
pub fn certifies(lp: &LinearProgram, sol: &LpSolution, tol: f64) -> bool {
    if !sol.is_optimal() || sol.dual.len() != lp.num_rows() {
        return false;
    }
    if sol.dual.iter().any(|&y| y < -tol) {
        return false;
    }
    for j in 0..lp.num_vars() {
        let col: f64 = lp.matrix.iter().zip(&sol.dual).map(|(row, y)| row[j] * y).sum();
        if col > lp.costs[j] + tol {
            return false;
        }
    }
    (dot(&lp.rhs, &sol.dual) - sol.objective).abs() <= tol * (1.0 + sol.objective.abs())
}

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c];
        for v in self.a[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (row, &b) in self.a.iter().zip(&self.basis) {
            let cb = cost[b];
            if cb != 0.0 {
                for (dj, aj) in d.iter_mut().zip(row) {
                    *dj -= cb * aj;
                }
            }
        }
        d
    }

    /// Runs Bland pivots on `cost` over columns `< allowed`. Returns false
    /// when the objective is unbounded below.
    fn optimize(&mut self, cost: &[f64], allowed: usize, pivots: &mut usize) -> Result<bool> {
        loop {
            let d = self.reduced_costs(cost);
            let Some(enter) = (0..allowed).find(|&j| d[j] < -OPTIMALITY_TOL) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.a.iter().enumerate() {
                let aij = row[enter];
                if aij > PIVOT_TOL {
                    let ratio = row[self.cols] / aij;
                    let better = match leave {
                        None => true,
                        Some((l, best)) => {
                            ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(Error::Solver(format!("simplex exceeded {MAX_PIVOTS} pivots")));
            }
            self.pivot(r, enter);
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.num_vars();
    let m = lp.num_rows();
    if m == 0 {
        // x = 0 is optimal unless some cost is negative
        if lp.costs.iter().any(|&c| c < 0.0) {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                x: vec![0.0; n],
                objective: f64::NEG_INFINITY,
                dual: Vec::new(),
            });
        }
        return Ok(LpSolution {
            status: LpStatus::Optimal,
            x: vec![0.0; n],
            objective: 0.0,
            dual: Vec::new(),
        });
    }
    // columns: x (n), surplus (m), artificial (m)
    let cols = n + 2 * m;
    let art = n + m;
    let mut sign = vec![1.0; m];
    let mut a = Vec::with_capacity(m);
    for i in 0..m {
        let s = if lp.rhs[i] < 0.0 { -1.0 } else { 1.0 };
        sign[i] = s;
        let mut row = vec![0.0; cols + 1];
        for j in 0..n {
            row[j] = s * lp.matrix[i][j];
        }
        row[n + i] = -s;
        row[art + i] = 1.0;
        row[cols] = s * lp.rhs[i];
        a.push(row);
    }
    let mut t = Tableau {
        a,
        basis: (art..art + m).collect(),
        cols,
    };
    let mut pivots = 0;

    let mut phase1 = vec![0.0; cols];
    for c in phase1[art..].iter_mut() {
        *c = 1.0;
    }
    t.optimize(&phase1, art, &mut pivots)?;
    let infeasibility: f64 = t
        .basis
        .iter()
        .zip(&t.a)
        .filter(|(&b, _)| b >= art)
        .map(|(_, row)| row[cols])
        .sum();
    if infeasibility > FEASIBILITY_TOL {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: vec![0.0; n],
            objective: f64::NAN,
            dual: Vec::new(),
        });
    }
    // drive zero-level artificials out of the basis where possible
    for r in 0..m {
        if t.basis[r] >= art {
            if let Some(c) = (0..art).find(|&j| t.a[r][j].abs() > 1e-9) {
                t.pivot(r, c);
            }
        }
    }

    let mut phase2 = vec![0.0; cols];
    phase2[..n].copy_from_slice(&lp.costs);
    if !t.optimize(&phase2, art, &mut pivots)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: vec![0.0; n],
            objective: f64::NEG_INFINITY,
            dual: Vec::new(),
        });
    }

    let mut x = vec![0.0; n];
    for (row, &b) in t.a.iter().zip(&t.basis) {
        if b < n {
            x[b] = row[cols].max(0.0);
        }
    }
    // artificial columns started as the identity, so they now hold B^-1 and
    // their reduced costs are -c_B B^-1
    let d = t.reduced_costs(&phase2);
    let dual = (0..m).map(|i| (-d[art + i] * sign[i]).max(0.0)).collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: lp.objective_at(&x),
        x,
        dual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(c: &[f64], a: &[&[f64]], b: &[f64]) -> LinearProgram {
        LinearProgram::new(c.to_vec(), a.iter().map(|r| r.to_vec()).collect(), b.to_vec()).unwrap()
    }

    #[test]
    fn single_lower_bound() {
        let p = lp(&[1.0], &[&[1.0]], &[3.0]);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 3.0).abs() < 1e-12);
        assert!(certifies(&p, &s, 1e-9));
    }

    #[test]
    fn two_variable_vertex() {
        let p = lp(&[1.0, 1.0], &[&[1.0, 1.0], &[2.0, 1.0]], &[1.0, 1.5]);
        let s = solve_lp(&p).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!((s.x[0] - 0.5).abs() < 1e-12 && (s.x[1] - 0.5).abs() < 1e-12);
        assert!(certifies(&p, &s, 1e-9));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = lp(&[1.0], &[&[1.0], &[-1.0]], &[1.0, 0.0]);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);
        let p = lp(&[-1.0, 0.0], &[&[1.0, -1.0]], &[0.0]);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn negative_rhs_rows() {
        // x <= 2 written as -x >= -2, plus x + y >= 3 with y expensive
        let p = lp(&[1.0, 5.0], &[&[-1.0, 0.0], &[1.0, 1.0]], &[-2.0, 3.0]);
        let s = solve_lp(&p).unwrap();
        assert!((s.objective - 7.0).abs() < 1e-9, "{s:?}");
        assert!(certifies(&p, &s, 1e-9));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(LinearProgram::new(vec![1.0], vec![vec![1.0, 2.0]], vec![1.0]).is_err());
        assert!(LinearProgram::new(vec![1.0], vec![vec![1.0]], vec![]).is_err());
        assert!(LinearProgram::new(vec![f64::NAN], vec![], vec![]).is_err());
    }
}
