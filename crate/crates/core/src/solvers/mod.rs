//! Global LCQP solvers and baseline allocations.
//!
//! Both global methods search over the complementarity pairs of the KKT
//! system. Every KKT point satisfies
//!
//! ```text
//! 1/2 x'Qx + f'x = 1/2 (f'x + b'mu)
//! ```
//!
//! so the right-hand side, which is linear, bounds the objective over any
//! relaxation of the KKT set. Both solvers run on the normalized problem
//! (see [`QpProblem::normalized`]) and map results back at the end.

mod baseline;
mod bb;
mod bounds;
mod milp;

pub use baseline::{baseline_alloc, evaluate_allocation, AllocationEval, BaselineKind};
pub use bb::solve_bb;
pub use bounds::{tighten_bounds, variable_bounds, VariableBounds};
pub use milp::solve_milp_kkt;

use crate::error::{Error, Result};
use crate::lp::LpProblem;
use crate::qp::{kkt_residual, solve_pattern, KktPoint, QpProblem};

/// How the bounds on `x`, `lambda` and `mu` are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundStrategy {
    /// Closed forms from [`variable_bounds`].
    #[default]
    Analytic,
    /// Closed forms, then each `lambda_i` and `mu_k` bound re-maximized over the
    /// KKT relaxation with one LP per variable.
    LpTightened,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub node_limit: usize,
    /// Absolute objective tolerance in normalized units (objective scaled so
    /// the best single-tone allocation is about 1).
    pub tolerance: f64,
    pub bounds: BoundStrategy,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { node_limit: 100_000, tolerance: 1e-10, bounds: BoundStrategy::Analytic }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if self.node_limit == 0 {
            return Err(Error::InvalidArgument("node_limit must be positive".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }
}

/// Complementarity products below this count as satisfied.
const COMPLEMENTARITY_TOL: f64 = 1e-9;

/// Column layout of the KKT relaxation: `x`, then `lambda`, then `mu`, then
/// any solver-specific extras.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    k: usize,
}

impl Layout {
    fn x(&self, i: usize) -> usize {
        i
    }
    fn lambda(&self, i: usize) -> usize {
        self.n + i
    }
    fn mu(&self, k: usize) -> usize {
        2 * self.n + k
    }
    fn core(&self) -> usize {
        2 * self.n + self.k
    }

    fn point(&self, v: &[f64]) -> KktPoint {
        KktPoint {
            x: v[..self.n].to_vec(),
            lambda: v[self.n..2 * self.n].to_vec(),
            mu: v[2 * self.n..self.core()].to_vec(),
        }
    }
}

/// Maximize `1/2 (f'x + b'mu)` subject to stationarity, the rows of `A` and
/// the variable bounds. Rows listed in `tight` become equalities. `extra`
/// columns with bounds `[0, 1]` and zero cost are appended.
fn kkt_relaxation(p: &QpProblem, vb: &VariableBounds, tight: &[bool], extra: usize) -> LpProblem {
    let (n, k) = (p.n(), p.k());
    let lay = Layout { n, k };
    let cols = lay.core() + extra;
    let mut c = vec![0.0; cols];
    for i in 0..n {
        c[lay.x(i)] = 0.5 * p.f()[i];
    }
    for r in 0..k {
        c[lay.mu(r)] = 0.5 * p.b()[r];
    }
    let mut lp = LpProblem::new(c);
    for i in 0..n {
        // (Qx)_i - (A'mu)_i + lambda_i = -f_i
        let mut row = vec![0.0; cols];
        for j in 0..n {
            row[lay.x(j)] = p.q()[(i, j)];
        }
        for r in 0..k {
            row[lay.mu(r)] = -p.a()[(r, i)];
        }
        row[lay.lambda(i)] = 1.0;
        lp.add_eq(row, -p.f()[i]);
    }
    for r in 0..k {
        let mut row = vec![0.0; cols];
        for i in 0..n {
            row[lay.x(i)] = p.a()[(r, i)];
        }
        if tight[r] {
            lp.add_eq(row, p.b()[r]);
        } else {
            lp.add_le(row, p.b()[r]);
        }
    }
    for i in 0..n {
        lp.set_upper(lay.x(i), vb.u[i]);
        lp.set_upper(lay.lambda(i), vb.v[i]);
    }
    for r in 0..k {
        lp.set_upper(lay.mu(r), vb.mu_max[r]);
    }
    for e in lay.core()..cols {
        lp.set_upper(e, 1.0);
    }
    lp
}

/// Largest complementarity product at `pt`: `x_i lambda_i` or `mu_k (b_k - A_k x)`.
/// Index `i < n` names an `x` pair, `n + k` a row pair.
fn worst_product(p: &QpProblem, pt: &KktPoint) -> (usize, f64) {
    let n = p.n();
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..n {
        let v = pt.x[i].max(0.0) * pt.lambda[i].max(0.0);
        if v > best.1 {
            best = (i, v);
        }
    }
    for (r, act) in p.row_activity(&pt.x).into_iter().enumerate() {
        let v = pt.mu[r].max(0.0) * (p.b()[r] - act).max(0.0);
        if v > best.1 {
            best = (n + r, v);
        }
    }
    best
}

/// Re-solves the KKT system on the support and active rows of `pt` to remove
/// LP round-off. Keeps `pt` when the refined point is worse.
fn polish(p: &QpProblem, pt: KktPoint) -> KktPoint {
    let peak = pt.x.iter().copied().fold(0.0, f64::max);
    let support: Vec<usize> = (0..p.n()).filter(|&i| pt.x[i] > 1e-12 * peak.max(1.0)).collect();
    let active: Vec<usize> = p
        .row_activity(&pt.x)
        .iter()
        .enumerate()
        .filter(|(r, act)| p.b()[*r] - **act <= 1e-9 * p.b()[*r])
        .map(|(r, _)| r)
        .collect();
    match solve_pattern(p, &support, &active) {
        Some(refined)
            if kkt_residual(p, &refined) <= kkt_residual(p, &pt)
                && (p.objective(&refined.x) - p.objective(&pt.x)).abs() <= 1e-9 =>
        {
            refined
        }
        _ => pt,
    }
}

/// Resolves the configured bounds on the normalized problem.
fn resolve_bounds(p: &QpProblem, opts: &SolverOptions) -> Result<VariableBounds> {
    let vb = variable_bounds(p);
    match opts.bounds {
        BoundStrategy::Analytic => Ok(vb),
        BoundStrategy::LpTightened => tighten_bounds(p, &vb),
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::channel::{path_loss, seeded_realization, RicianParams};
    use crate::harvester::{model_coeffs, DiodeParams, HarvesterModel};
    use crate::qp::{build_qp, QpProblem, SwiptLimit};
    use crate::waveform::effective_channels;

    /// Rician instance with the default diode and `P_EH` in watts.
    pub fn rician_instance(seed: u64, r: u64, n: usize, p_eh: f64, swipt: bool) -> QpProblem {
        let params = RicianParams::from_db(3.0, seed, n, 1);
        let ch = seeded_realization(&params, r, 8.0, swipt.then_some(7.0)).unwrap();
        let h = effective_channels(&ch.h);
        let coeffs = model_coeffs(&HarvesterModel::diode(&DiodeParams::SMS7630).unwrap()).unwrap();
        let budget = p_eh / path_loss(8.0).unwrap();
        let g = ch.g.as_ref().map(effective_channels);
        let lim = g.as_deref().map(|g| SwiptLimit { g_eff: g, p_sat: 10f64.powf(-1.5) * 1e-3 });
        build_qp(&h, &coeffs, budget, lim).unwrap()
    }
}
