use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpStatus};
use crate::qp::QpProblem;

use super::{kkt_relaxation, Layout};

/// Bounds that hold at every KKT point of the problem, hence at the optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableBounds {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub mu_max: Vec<f64>,
}

/// Closed-form bounds.
///
/// `u_i = min_k b_k / A_ki`. On the support of a KKT point stationarity reads
/// `(A'mu)_i = (Qx + f)_i <= (Qu + f)_i`, and a tight row has at least one
/// support index with `A_ki > 0`, so `mu_k <= max_i (Qu + f)_i / A_ki`. Then
/// `lambda = A'mu - Qx - f <= A' mu_max`.
pub fn variable_bounds(p: &QpProblem) -> VariableBounds {
    let (n, k) = (p.n(), p.k());
    let u = p.box_bounds();
    let grad: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| p.q()[(i, j)] * u[j]).sum::<f64>() + p.f()[i])
        .collect();
    let mu_max: Vec<f64> = (0..k)
        .map(|r| {
            (0..n)
                .filter(|&i| p.a()[(r, i)] > 0.0)
                .map(|i| grad[i] / p.a()[(r, i)])
                .fold(0.0, f64::max)
        })
        .collect();
    let v = (0..n).map(|i| (0..k).map(|r| p.a()[(r, i)] * mu_max[r]).sum()).collect();
    VariableBounds { u, v, mu_max }
}

/// Re-maximizes every `lambda_i` and `mu_k` over the KKT relaxation built with
/// `vb`. The relaxation contains all KKT points, so its maxima are valid bounds.
pub fn tighten_bounds(p: &QpProblem, vb: &VariableBounds) -> Result<VariableBounds> {
    let lay = Layout { n: p.n(), k: p.k() };
    let base = kkt_relaxation(p, vb, &vec![false; p.k()], 0);
    let maximize = |col: usize| -> Result<f64> {
        let mut c = vec![0.0; lay.core()];
        c[col] = 1.0;
        let mut lp = base.clone();
        lp.set_objective(c);
        let sol = solve_lp(&lp)?;
        match sol.status {
            LpStatus::Optimal => Ok(sol.objective.max(0.0)),
            s => Err(Error::Lp(format!("bound LP for column {col} ended {s:?}"))),
        }
    };
    let mut out = vb.clone();
    for i in 0..lay.n {
        out.v[i] = out.v[i].min(maximize(lay.lambda(i))?);
    }
    for r in 0..lay.k {
        out.mu_max[r] = out.mu_max[r].min(maximize(lay.mu(r))?);
    }
    Ok(out)
}
