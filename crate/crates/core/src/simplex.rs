//! Bounded-variable revised simplex with a dense basis inverse.
//!
//! Problems are `min c'x` subject to sparse rows `a_i'x {<=,=,>=} b_i` and
//! `l <= x <= u` (either bound may be infinite). Phase 1 drives one
//! artificial per row to zero; phase 2 optimizes the real objective.
//! Pricing is Dantzig with partial scans on wide problems, switching to
//! Bland's rule after a run of degenerate pivots.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("invalid linear program: {0}")]
    InvalidInput(String),
    #[error("numerical breakdown after {iterations} iterations: {reason}")]
    NumericalBreakdown { iterations: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelOp {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Column-major sparse matrix: `columns[j]` holds `(row, value)`.
    columns: Vec<Vec<(usize, f64)>>,
    ops: Vec<RelOp>,
    rhs: Vec<f64>,
}

impl LinearProgram {
    /// `n_vars` variables with zero cost and bounds `[0, inf)`.
    pub fn new(n_vars: usize) -> Self {
        Self {
            objective: vec![0.0; n_vars],
            lower: vec![0.0; n_vars],
            upper: vec![f64::INFINITY; n_vars],
            columns: vec![Vec::new(); n_vars],
            ops: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn set_cost(&mut self, j: usize, c: f64) {
        self.objective[j] = c;
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lower[j] = lo;
        self.upper[j] = hi;
    }

    pub fn set_free(&mut self, j: usize) {
        self.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY);
    }

    /// Appends a row; repeated indices are summed.
    pub fn add_row(&mut self, coeffs: &[(usize, f64)], op: RelOp, rhs: f64) -> usize {
        let i = self.rhs.len();
        for &(j, v) in coeffs {
            if v == 0.0 {
                continue;
            }
            match self.columns[j].last_mut() {
                Some((row, acc)) if *row == i => *acc += v,
                _ => self.columns[j].push((i, v)),
            }
        }
        self.ops.push(op);
        self.rhs.push(rhs);
        i
    }

    pub fn cost(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of a row or a bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut act = vec![0.0; self.n_rows()];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                act[i] += v * x[j];
            }
        }
        let rows = act
            .iter()
            .zip(&self.rhs)
            .zip(&self.ops)
            .map(|((a, b), op)| match op {
                RelOp::Le => (a - b).max(0.0),
                RelOp::Ge => (b - a).max(0.0),
                RelOp::Eq => (a - b).abs(),
            });
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (l - v).max(v - u).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<(), LpError> {
        let finite = self
            .objective
            .iter()
            .chain(&self.rhs)
            .all(|v| v.is_finite())
            && self.columns.iter().flatten().all(|(_, v)| v.is_finite());
        if !finite {
            return Err(LpError::InvalidInput("non-finite data".into()));
        }
        for (j, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u || *l == f64::INFINITY || *u == f64::NEG_INFINITY {
                return Err(LpError::InvalidInput(format!(
                    "bad bounds [{l}, {u}] on variable {j}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexSolution {
    pub status: LpStatus,
    /// Values of the structural variables (empty unless optimal).
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers `dz/db_i` at the optimum.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub pivot_tol: f64,
    pub refactor_every: usize,
    pub max_iter: usize,
    /// Degenerate pivots in a row before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            pivot_tol: 1e-10,
            refactor_every: 100,
            max_iter: 1_000_000,
            bland_after: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Free and nonbasic, parked at zero.
    Zero,
}

struct Tableau<'a> {
    lp: &'a LinearProgram,
    m: usize,
    n_struct: usize,
    /// Extra columns: slacks then artificials, each a single `(row, coef)`.
    extra: Vec<(usize, f64)>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    head: Vec<usize>,
    binv: DMatrix<f64>,
    opts: SimplexOptions,
    iterations: usize,
    price_start: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl<'a> Tableau<'a> {
    fn new(lp: &'a LinearProgram, opts: SimplexOptions) -> Self {
        let m = lp.n_rows();
        let n_struct = lp.n_vars();
        let mut extra = Vec::new();
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        for (i, op) in lp.ops.iter().enumerate() {
            match op {
                RelOp::Le => extra.push((i, 1.0)),
                RelOp::Ge => extra.push((i, -1.0)),
                RelOp::Eq => continue,
            }
            lower.push(0.0);
            upper.push(f64::INFINITY);
        }
        let mut x = Vec::with_capacity(lower.len() + m);
        let mut state = Vec::with_capacity(lower.len() + m);
        for (l, u) in lower.iter().zip(&upper) {
            let (v, s) = if l.is_finite() {
                (*l, State::Lower)
            } else if u.is_finite() {
                (*u, State::Upper)
            } else {
                (0.0, State::Zero)
            };
            x.push(v);
            state.push(s);
        }
        let mut t = Self {
            lp,
            m,
            n_struct,
            extra,
            cost: Vec::new(),
            lower,
            upper,
            x,
            state,
            head: Vec::with_capacity(m),
            binv: DMatrix::zeros(m, m),
            opts,
            iterations: 0,
            price_start: 0,
        };
        // artificials absorb the residual of the starting point
        let mut resid = lp.rhs.clone();
        for j in 0..t.x.len() {
            let v = t.x[j];
            if v != 0.0 {
                t.for_column(j, |i, a| resid[i] -= a * v);
            }
        }
        for (i, r) in resid.into_iter().enumerate() {
            let sign = if r >= 0.0 { 1.0 } else { -1.0 };
            t.extra.push((i, sign));
            t.lower.push(0.0);
            t.upper.push(f64::INFINITY);
            t.x.push(r.abs());
            t.state.push(State::Basic);
            t.head.push(t.x.len() - 1);
            t.binv[(i, i)] = sign;
        }
        t
    }

    fn n_total(&self) -> usize {
        self.x.len()
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n_total() - self.m
    }

    fn for_column(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n_struct {
            for &(i, a) in &self.lp.columns[j] {
                f(i, a);
            }
        } else {
            let (i, a) = self.extra[j - self.n_struct];
            f(i, a);
        }
    }

    fn dot_column(&self, y: &[f64], j: usize) -> f64 {
        let mut s = 0.0;
        self.for_column(j, |i, a| s += y[i] * a);
        s
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        self.for_column(j, |i, a| {
            for (r, o) in out.iter_mut().enumerate() {
                *o += self.binv[(r, i)] * a;
            }
        });
        out
    }

    fn row_prices(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        for (r, &j) in self.head.iter().enumerate() {
            let c = self.cost[j];
            if c != 0.0 {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi += c * self.binv[(r, i)];
                }
            }
        }
        y
    }

    fn breakdown(&self, reason: &str) -> LpError {
        LpError::NumericalBreakdown {
            iterations: self.iterations,
            reason: reason.into(),
        }
    }

    /// Rebuilds `B^{-1}` from scratch and recomputes the basic values.
    fn refactor(&mut self) -> Result<(), LpError> {
        let mut b = DMatrix::zeros(self.m, self.m);
        for (r, &j) in self.head.iter().enumerate() {
            self.for_column(j, |i, a| b[(i, r)] = a);
        }
        self.binv = b
            .try_inverse()
            .ok_or_else(|| self.breakdown("singular basis"))?;
        let mut resid = self.lp.rhs.clone();
        for j in 0..self.n_total() {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                let v = self.x[j];
                self.for_column(j, |i, a| resid[i] -= a * v);
            }
        }
        for r in 0..self.m {
            let v: f64 = (0..self.m).map(|i| self.binv[(r, i)] * resid[i]).sum();
            self.x[self.head[r]] = v;
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(self.breakdown("non-finite basic solution"));
        }
        Ok(())
    }

    /// Entering candidate `(j, direction, |d_j|)`.
    fn price(&mut self, y: &[f64], bland: bool) -> Option<(usize, f64)> {
        let n = self.n_total();
        let tol = self.opts.opt_tol;
        let eligible = |t: &Self, j: usize| -> Option<(f64, f64)> {
            let st = t.state[j];
            if st == State::Basic || t.lower[j] == t.upper[j] {
                return None;
            }
            let d = t.cost[j] - t.dot_column(y, j);
            let up = matches!(st, State::Lower | State::Zero) && d < -tol;
            let down = matches!(st, State::Upper | State::Zero) && d > tol;
            if up {
                Some((1.0, -d))
            } else if down {
                Some((-1.0, d))
            } else {
                None
            }
        };
        if bland {
            return (0..n).find_map(|j| eligible(self, j).map(|(dir, _)| (j, dir)));
        }
        let chunk = if n > 4000 { (n / 16).max(1000) } else { n };
        let mut scanned = 0;
        let mut start = self.price_start % n;
        while scanned < n {
            let end = (start + chunk).min(n);
            let mut best: Option<(usize, f64, f64)> = None;
            for j in start..end {
                if let Some((dir, score)) = eligible(self, j) {
                    if best.is_none_or(|b| score > b.2) {
                        best = Some((j, dir, score));
                    }
                }
            }
            scanned += end - start;
            start = if end == n { 0 } else { end };
            if let Some((j, dir, _)) = best {
                self.price_start = start;
                return Some((j, dir));
            }
        }
        None
    }

    fn iterate(&mut self) -> Result<Outcome, LpError> {
        let mut degenerate = 0usize;
        let mut since_refactor = 0usize;
        let mut confirmations = 0;
        loop {
            if self.iterations >= self.opts.max_iter {
                return Err(self.breakdown("iteration limit"));
            }
            if since_refactor >= self.opts.refactor_every {
                self.refactor()?;
                since_refactor = 0;
            }
            let y = self.row_prices();
            let bland = degenerate >= self.opts.bland_after;
            let Some((q, dir)) = self.price(&y, bland) else {
                // confirm optimality on a fresh factorization
                if since_refactor == 0 || confirmations >= 3 {
                    return Ok(Outcome::Optimal);
                }
                confirmations += 1;
                self.refactor()?;
                since_refactor = 0;
                continue;
            };
            let alpha = self.ftran(q);
            let mut step = self.upper[q] - self.lower[q];
            let mut leave: Option<(usize, bool)> = None;
            let mut best_pivot = 0.0;
            for (r, &a) in alpha.iter().enumerate() {
                let rate = -dir * a;
                if rate.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let j = self.head[r];
                let (limit, to_upper) = if rate < 0.0 {
                    ((self.x[j] - self.lower[j]) / -rate, false)
                } else {
                    ((self.upper[j] - self.x[j]) / rate, true)
                };
                if !limit.is_finite() {
                    continue;
                }
                let limit = limit.max(0.0);
                let better = match leave {
                    None => limit < step,
                    Some((lr, _)) => {
                        if bland {
                            limit < step || (limit == step && j < self.head[lr])
                        } else {
                            limit < step - 1e-12 || (limit <= step + 1e-12 && a.abs() > best_pivot)
                        }
                    }
                };
                if better || (leave.is_none() && limit == step && step.is_finite()) {
                    step = limit;
                    leave = Some((r, to_upper));
                    best_pivot = a.abs();
                }
            }
            if !step.is_finite() {
                return Ok(Outcome::Unbounded);
            }
            self.iterations += 1;
            since_refactor += 1;
            degenerate = if step <= 1e-12 { degenerate + 1 } else { 0 };
            self.x[q] += dir * step;
            for (r, &a) in alpha.iter().enumerate() {
                let j = self.head[r];
                self.x[j] -= dir * step * a;
            }
            match leave {
                None => {
                    // bound flip
                    self.state[q] = if dir > 0.0 {
                        State::Upper
                    } else {
                        State::Lower
                    };
                    self.x[q] = if dir > 0.0 {
                        self.upper[q]
                    } else {
                        self.lower[q]
                    };
                }
                Some((r, to_upper)) => {
                    let out = self.head[r];
                    self.x[out] = if to_upper {
                        self.upper[out]
                    } else {
                        self.lower[out]
                    };
                    self.state[out] = if to_upper { State::Upper } else { State::Lower };
                    self.state[q] = State::Basic;
                    self.head[r] = q;
                    let piv = alpha[r];
                    for c in 0..self.m {
                        self.binv[(r, c)] /= piv;
                    }
                    for (i, &a) in alpha.iter().enumerate() {
                        if i != r && a != 0.0 {
                            for c in 0..self.m {
                                let v = self.binv[(r, c)];
                                self.binv[(i, c)] -= a * v;
                            }
                        }
                    }
                }
            }
        }
    }
}

pub fn simplex_solve(lp: &LinearProgram) -> Result<SimplexSolution, LpError> {
    simplex_solve_with(lp, SimplexOptions::default())
}

pub fn simplex_solve_with(
    lp: &LinearProgram,
    opts: SimplexOptions,
) -> Result<SimplexSolution, LpError> {
    lp.validate()?;
    let mut t = Tableau::new(lp, opts);
    let n_total = t.n_total();
    t.cost = (0..n_total)
        .map(|j| if t.is_artificial(j) { 1.0 } else { 0.0 })
        .collect();
    t.iterate()?;
    t.refactor()?;
    let infeas: f64 = (0..n_total)
        .filter(|&j| t.is_artificial(j))
        .map(|j| t.x[j].abs())
        .sum();
    let scale = 1.0 + lp.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let failed = |status, t: &Tableau| SimplexSolution {
        status,
        x: Vec::new(),
        objective: f64::NAN,
        duals: Vec::new(),
        iterations: t.iterations,
    };
    if infeas > 1e-7 * scale {
        return Ok(failed(LpStatus::Infeasible, &t));
    }
    let first_artificial = n_total - t.m;
    for j in first_artificial..n_total {
        t.upper[j] = 0.0;
        if t.state[j] != State::Basic {
            t.x[j] = 0.0;
            t.state[j] = State::Lower;
        }
    }
    t.cost = (0..n_total)
        .map(|j| if j < t.n_struct { lp.objective[j] } else { 0.0 })
        .collect();
    if let Outcome::Unbounded = t.iterate()? {
        return Ok(failed(LpStatus::Unbounded, &t));
    }
    t.refactor()?;
    let x = t.x[..t.n_struct].to_vec();
    let viol = lp.max_violation(&x);
    if viol > 1e-8 * scale {
        return Err(t.breakdown(&format!("primal residual {viol:e} after refactorization")));
    }
    Ok(SimplexSolution {
        status: LpStatus::Optimal,
        objective: lp.cost(&x),
        duals: t.row_prices(),
        x,
        iterations: t.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bound() {
        let mut lp = LinearProgram::new(1);
        lp.set_cost(0, 1.0);
        lp.set_free(0);
        lp.add_row(&[(0, 1.0)], RelOp::Ge, 1.0);
        let s = simplex_solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn transportation() {
        // supplies 20, 30, 25; demands 10, 35, 30; optimum 735 from an independent solver
        let supply = [20.0, 30.0, 25.0];
        let demand = [10.0, 35.0, 30.0];
        let cost = [[8.0, 6.0, 10.0], [9.0, 12.0, 13.0], [14.0, 9.0, 16.0]];
        let mut lp = LinearProgram::new(9);
        for i in 0..3 {
            for j in 0..3 {
                lp.set_cost(3 * i + j, cost[i][j]);
            }
        }
        for i in 0..3 {
            let row: Vec<_> = (0..3).map(|j| (3 * i + j, 1.0)).collect();
            lp.add_row(&row, RelOp::Le, supply[i]);
        }
        for j in 0..3 {
            let row: Vec<_> = (0..3).map(|i| (3 * i + j, 1.0)).collect();
            lp.add_row(&row, RelOp::Ge, demand[j]);
        }
        let s = simplex_solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 735.0).abs() < 1e-9, "{}", s.objective);
        assert!(lp.max_violation(&s.x) < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.add_row(&[(0, 1.0)], RelOp::Le, -1.0);
        assert_eq!(simplex_solve(&lp).unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new(2);
        lp.set_cost(0, -1.0);
        lp.add_row(&[(0, 1.0), (1, -1.0)], RelOp::Le, 1.0);
        assert_eq!(simplex_solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn boxed_and_free_variables() {
        // max x + 2y, x in [-1, 3], y free, x + y <= 4, y - x <= 1
        let mut lp = LinearProgram::new(2);
        lp.set_cost(0, -1.0);
        lp.set_cost(1, -2.0);
        lp.set_bounds(0, -1.0, 3.0);
        lp.set_free(1);
        lp.add_row(&[(0, 1.0), (1, 1.0)], RelOp::Le, 4.0);
        lp.add_row(&[(0, -1.0), (1, 1.0)], RelOp::Le, 1.0);
        let s = simplex_solve(&lp).unwrap();
        assert!((s.x[0] - 1.5).abs() < 1e-12 && (s.x[1] - 2.5).abs() < 1e-12);
        assert!((s.objective + 6.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example, which cycles under the textbook rule without safeguards
        let mut lp = LinearProgram::new(4);
        for (j, c) in [-0.75, 150.0, -0.02, 6.0].into_iter().enumerate() {
            lp.set_cost(j, c);
        }
        lp.add_row(
            &[(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)],
            RelOp::Le,
            0.0,
        );
        lp.add_row(
            &[(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)],
            RelOp::Le,
            0.0,
        );
        lp.add_row(&[(2, 1.0)], RelOp::Le, 1.0);
        let s = simplex_solve(&lp).unwrap();
        assert!((s.objective + 0.05).abs() < 1e-12, "{}", s.objective);
    }

    #[test]
    fn random_feasible_lps_satisfy_duality() {
        use rand_chacha::rand_core::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut u = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        for _ in 0..30 {
            let (n, m) = (6, 4);
            let mut lp = LinearProgram::new(n);
            for j in 0..n {
                lp.set_cost(j, u() + 0.1);
            }
            let mut rows = Vec::new();
            for _ in 0..m {
                let row: Vec<_> = (0..n).map(|j| (j, u())).collect();
                let rhs = u() + 0.5;
                lp.add_row(&row, RelOp::Ge, rhs);
                rows.push((row, rhs));
            }
            let s = simplex_solve(&lp).unwrap();
            assert_eq!(s.status, LpStatus::Optimal);
            let dual: f64 = rows.iter().zip(&s.duals).map(|((_, b), y)| b * y).sum();
            assert!((dual - s.objective).abs() < 1e-10);
            assert!(s.duals.iter().all(|y| *y >= -1e-12));
        }
    }
}
