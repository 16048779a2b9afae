//! Dense bounded-variable primal simplex.
//!
//! Solves
//!
//! ```text
//! maximize   c'x
//! subject to A_eq x  = b_eq
//!            A_le x <= b_le
//!            l <= x <= u        (l finite, u may be +inf)
//! ```
//!
//! Variable bounds are handled in the ratio test rather than as rows. Phase 1
//! starts from slack columns where the initial point satisfies a `<=` row and
//! from artificial columns elsewhere. Pivoting is Dantzig's rule with lowest
//! index tie-breaking until `3 n` consecutive degenerate pivots have occurred,
//! after which Bland's rule is used for the rest of the phase.
//!
//! Problems here are tiny (tens of rows), so the full tableau is kept.

use crate::error::{Error, Result};

pub const FEAS_TOL: f64 = 1e-9;
pub const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    objective: Vec<f64>,
    eq_rows: Vec<Vec<f64>>,
    eq_rhs: Vec<f64>,
    le_rows: Vec<Vec<f64>>,
    le_rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LpProblem {
    /// Maximizes `objective`; every variable starts with bounds `[0, +inf)`.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            le_rows: Vec::new(),
            le_rhs: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    /// Replaces the objective; the length must stay the same.
    pub fn set_objective(&mut self, objective: Vec<f64>) -> &mut Self {
        assert_eq!(objective.len(), self.objective.len(), "objective length");
        self.objective = objective;
        self
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
        self
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.le_rows.push(row);
        self.le_rhs.push(rhs);
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn set_upper(&mut self, var: usize, upper: f64) -> &mut Self {
        self.upper[var] = upper;
        self
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        let bad = |msg: String| Err(Error::Lp(format!("malformed problem: {msg}")));
        if self.lower.len() != n || self.upper.len() != n {
            return bad("bound vectors do not match the objective".into());
        }
        for (kind, rows, rhs) in [("eq", &self.eq_rows, &self.eq_rhs), ("le", &self.le_rows, &self.le_rhs)] {
            for (i, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return bad(format!("{kind} row {i} has {} entries, expected {n}", row.len()));
                }
                if row.iter().any(|v| !v.is_finite()) || !rhs[i].is_finite() {
                    return bad(format!("{kind} row {i} has non-finite data"));
                }
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return bad("non-finite objective".into());
        }
        for j in 0..n {
            if !self.lower[j].is_finite() {
                return bad(format!("variable {j} needs a finite lower bound"));
            }
            if self.upper[j].is_nan() || self.upper[j] < self.lower[j] - FEAS_TOL {
                return bad(format!("variable {j} has lower > upper"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals, equality rows first and then `<=` rows (non-negative for a maximization).
    pub duals: Vec<f64>,
    /// `c_j - y'A_j` for each structural variable.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    p.validate()?;
    Simplex::new(p).run()
}

struct Simplex<'a> {
    p: &'a LpProblem,
    n: usize,
    m: usize,
    /// Columns: structural `0..n`, slacks `n..n+m_le`, artificials `n+m_le..n+m_le+m`.
    cols: usize,
    art0: usize,
    a: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    tab: Vec<Vec<f64>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    value: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    art_sign: Vec<f64>,
    iterations: usize,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl<'a> Simplex<'a> {
    fn new(p: &'a LpProblem) -> Self {
        let n = p.n_vars();
        let (m_eq, m_le) = (p.eq_rows.len(), p.le_rows.len());
        let m = m_eq + m_le;
        let art0 = n + m_le;
        let cols = art0 + m;

        let mut a = vec![vec![0.0; cols]; m];
        let mut rhs = vec![0.0; m];
        for (i, row) in p.eq_rows.iter().chain(&p.le_rows).enumerate() {
            a[i][..n].copy_from_slice(row);
            rhs[i] = if i < m_eq { p.eq_rhs[i] } else { p.le_rhs[i - m_eq] };
        }
        for s in 0..m_le {
            a[m_eq + s][n + s] = 1.0;
        }

        let mut lower = vec![0.0; cols];
        let mut upper = vec![f64::INFINITY; cols];
        lower[..n].copy_from_slice(&p.lower);
        upper[..n].copy_from_slice(&p.upper);
        let mut value = vec![0.0; cols];
        value[..n].copy_from_slice(&p.lower);

        let mut basis = vec![0; m];
        let mut is_basic = vec![false; cols];
        let mut art_sign = vec![1.0; m];
        let mut tab = vec![vec![0.0; cols]; m];
        for i in 0..m {
            let resid = rhs[i] - (0..n).map(|j| a[i][j] * value[j]).sum::<f64>();
            let slack_ok = i >= m_eq && resid >= 0.0;
            let sign = if resid >= 0.0 { 1.0 } else { -1.0 };
            art_sign[i] = sign;
            a[i][art0 + i] = sign;
            if slack_ok {
                basis[i] = n + (i - m_eq);
                value[basis[i]] = resid;
                upper[art0 + i] = 0.0;
            } else {
                basis[i] = art0 + i;
                value[art0 + i] = resid.abs();
            }
            is_basic[basis[i]] = true;
            // B is diagonal with entries +1 (slack) or sign (artificial)
            let scale = if slack_ok { 1.0 } else { sign };
            for j in 0..cols {
                tab[i][j] = a[i][j] * scale;
            }
        }
        Self { p, n, m, cols, art0, a, rhs, tab, lower, upper, value, basis, is_basic, art_sign, iterations: 0 }
    }

    fn run(mut self) -> Result<LpSolution> {
        // phase 1: maximize -sum(artificials)
        let mut cost1 = vec![0.0; self.cols];
        for i in 0..self.m {
            if self.upper[self.art0 + i] > 0.0 {
                cost1[self.art0 + i] = -1.0;
            }
        }
        if cost1.iter().any(|c| *c != 0.0) {
            self.iterate(&cost1)?;
            let infeas: f64 = (0..self.m).map(|i| self.value[self.art0 + i]).sum();
            let scale = self.rhs.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
            if infeas > FEAS_TOL * scale {
                return Ok(self.finish(LpStatus::Infeasible));
            }
            self.expel_artificials();
        }
        for i in 0..self.m {
            self.upper[self.art0 + i] = 0.0;
        }
        self.recompute_basics();

        let mut cost2 = vec![0.0; self.cols];
        cost2[..self.n].copy_from_slice(&self.p.objective);
        match self.iterate(&cost2)? {
            Phase::Optimal => {
                self.recompute_basics();
                Ok(self.finish(LpStatus::Optimal))
            }
            Phase::Unbounded => Ok(self.finish(LpStatus::Unbounded)),
        }
    }

    fn reduced_cost(&self, cost: &[f64], j: usize) -> f64 {
        let mut d = cost[j];
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                d -= cb * self.tab[r][j];
            }
        }
        d
    }

    fn iterate(&mut self, cost: &[f64]) -> Result<Phase> {
        let limit = 200 * (self.m + self.cols) + 1000;
        let mut degenerate_run = 0usize;
        let mut bland = false;
        loop {
            if self.iterations > limit {
                return Err(Error::Lp(format!("iteration limit {limit} reached")));
            }

            // entering variable and direction
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.cols {
                if self.is_basic[j] || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let d = self.reduced_cost(cost, j);
                let at_upper = self.value[j] >= self.upper[j];
                let dir = if d > COST_TOL && !at_upper {
                    1.0
                } else if d < -COST_TOL && self.value[j] > self.lower[j] {
                    -1.0
                } else {
                    continue;
                };
                let better = match entering {
                    None => true,
                    Some((_, _, best)) => !bland && d.abs() > best,
                };
                if better {
                    entering = Some((j, dir, d.abs()));
                }
                if bland && entering.is_some() {
                    break;
                }
            }
            let Some((j, dir, _)) = entering else {
                return Ok(Phase::Optimal);
            };

            // ratio test
            let mut step = self.upper[j] - self.lower[j];
            let mut leave: Option<usize> = None;
            for r in 0..self.m {
                let alpha = self.tab[r][j];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let bv = self.basis[r];
                let delta = -dir * alpha;
                let room = if delta < 0.0 {
                    (self.value[bv] - self.lower[bv]).max(0.0) / -delta
                } else if self.upper[bv].is_finite() {
                    (self.upper[bv] - self.value[bv]).max(0.0) / delta
                } else {
                    continue;
                };
                let take = match leave {
                    None => room < step,
                    Some(l) => {
                        if room < step - 1e-12 {
                            true
                        } else if room <= step + 1e-12 {
                            if bland {
                                bv < self.basis[l]
                            } else {
                                alpha.abs() > self.tab[l][j].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if take {
                    step = room;
                    leave = Some(r);
                }
            }
            if step.is_infinite() {
                return Ok(Phase::Unbounded);
            }

            self.iterations += 1;
            if step <= FEAS_TOL {
                degenerate_run += 1;
                if degenerate_run > 3 * self.cols {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }

            for r in 0..self.m {
                let bv = self.basis[r];
                self.value[bv] -= dir * self.tab[r][j] * step;
            }
            self.value[j] += dir * step;

            match leave {
                None => {
                    // bound flip
                    self.value[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
                }
                Some(r) => {
                    let bv = self.basis[r];
                    let alpha = self.tab[r][j];
                    self.value[bv] = if -dir * alpha < 0.0 { self.lower[bv] } else { self.upper[bv] };
                    self.pivot(r, j);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let piv = self.tab[r][j];
        for v in self.tab[r].iter_mut() {
            *v /= piv;
        }
        let pivot_row = self.tab[r].clone();
        for (i, row) in self.tab.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let factor = row[j];
            if factor != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                row[j] = 0.0;
            }
        }
        let old = self.basis[r];
        self.is_basic[old] = false;
        self.is_basic[j] = true;
        self.basis[r] = j;
    }

    /// Pivots zero-level artificials out of the basis where a non-artificial
    /// column allows it; rows where none does are redundant.
    fn expel_artificials(&mut self) {
        for r in 0..self.m {
            if self.basis[r] < self.art0 {
                continue;
            }
            let pick = (0..self.art0)
                .filter(|&j| !self.is_basic[j])
                .max_by(|&a, &b| self.tab[r][a].abs().total_cmp(&self.tab[r][b].abs()).then(b.cmp(&a)));
            if let Some(j) = pick {
                if self.tab[r][j].abs() > 1e-9 {
                    let art = self.basis[r];
                    self.pivot(r, j);
                    self.value[art] = 0.0;
                }
            }
        }
    }

    /// Row `i` of `B^-1`, read from the artificial columns.
    fn binv(&self, r: usize, i: usize) -> f64 {
        self.tab[r][self.art0 + i] * self.art_sign[i]
    }

    fn recompute_basics(&mut self) {
        let mut resid = self.rhs.clone();
        for (i, res) in resid.iter_mut().enumerate() {
            for j in 0..self.cols {
                if !self.is_basic[j] {
                    *res -= self.a[i][j] * self.value[j];
                }
            }
        }
        for r in 0..self.m {
            let v: f64 = (0..self.m).map(|i| self.binv(r, i) * resid[i]).sum();
            self.value[self.basis[r]] = v;
        }
    }

    fn finish(self, status: LpStatus) -> LpSolution {
        let n = self.n;
        let mut x: Vec<f64> = self.value[..n].to_vec();
        for (j, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[j], self.upper[j]);
        }
        let objective = self.p.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        let mut duals = vec![0.0; self.m];
        for (i, y) in duals.iter_mut().enumerate() {
            *y = (0..self.m)
                .map(|r| {
                    let bv = self.basis[r];
                    let cb = if bv < n { self.p.objective[bv] } else { 0.0 };
                    cb * self.binv(r, i)
                })
                .sum();
        }
        let reduced_costs = (0..n)
            .map(|j| self.p.objective[j] - (0..self.m).map(|i| duals[i] * self.a[i][j]).sum::<f64>())
            .collect();
        LpSolution { status, x, objective, duals, reduced_costs, iterations: self.iterations }
    }
}
