//! Mixed-integer LP form of the KKT system.
//!
//! Binary `z_i` selects which side of `x_i lambda_i = 0` may be non-zero and
//! binary `zeta_k` does the same for `mu_k (b_k - A_k x) = 0`:
//!
//! ```text
//! x_i <= u_i z_i            lambda_i <= v_i (1 - z_i)
//! mu_k <= mu_max_k zeta_k   b_k - A_k x <= b_k (1 - zeta_k)
//! ```
//!
//! Maximizing `1/2 (f'x + b'mu)` over this set gives the global optimum. The
//! binaries are enumerated implicitly by LP-based branch-and-bound.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpProblem, LpStatus};
use crate::qp::{assemble_solution, KktPoint, QpProblem};
use crate::solution::{Method, SolveStats, Solution};

use super::{kkt_relaxation, polish, resolve_bounds, Layout, SolverOptions};

const INTEGRALITY_TOL: f64 = 1e-9;

struct Node {
    /// `Some(0.0)` or `Some(1.0)` for fixed binaries.
    fixed: Vec<Option<f64>>,
    bound: f64,
    values: Vec<f64>,
}

fn build(p: &QpProblem, opts: &SolverOptions) -> Result<(LpProblem, Layout)> {
    let (n, k) = (p.n(), p.k());
    let lay = Layout { n, k };
    let vb = resolve_bounds(p, opts)?;
    let mut lp = kkt_relaxation(p, &vb, &vec![false; k], n + k);
    let cols = lay.core() + n + k;
    let z = |i: usize| lay.core() + i;
    let zeta = |r: usize| lay.core() + n + r;
    for i in 0..n {
        let mut row = vec![0.0; cols];
        row[lay.x(i)] = 1.0;
        row[z(i)] = -vb.u[i];
        lp.add_le(row, 0.0);
        let mut row = vec![0.0; cols];
        row[lay.lambda(i)] = 1.0;
        row[z(i)] = vb.v[i];
        lp.add_le(row, vb.v[i]);
    }
    for r in 0..k {
        let mut row = vec![0.0; cols];
        row[lay.mu(r)] = 1.0;
        row[zeta(r)] = -vb.mu_max[r];
        lp.add_le(row, 0.0);
        let mut row = vec![0.0; cols];
        for i in 0..n {
            row[lay.x(i)] = -p.a()[(r, i)];
        }
        row[zeta(r)] = p.b()[r];
        lp.add_le(row, 0.0);
    }
    Ok((lp, lay))
}

/// Globally maximizes `1/2 x'Qx + f'x` over `Ax <= b, x >= 0` via the KKT MILP.
pub fn solve_milp_kkt(p: &QpProblem, opts: &SolverOptions) -> Result<Solution> {
    opts.validate()?;
    let start = Instant::now();
    let (np, scaling) = p.normalized();
    let (base, lay) = build(&np, opts)?;
    let n_bin = lay.n + lay.k;
    let mut stats = SolveStats::default();

    let evaluate = |fixed: Vec<Option<f64>>, stats: &mut SolveStats| -> Result<Option<Node>> {
        let mut lp = base.clone();
        for (j, f) in fixed.iter().enumerate() {
            if let Some(v) = f {
                lp.set_bounds(lay.core() + j, *v, *v);
            }
        }
        stats.lps_solved += 1;
        let sol = solve_lp(&lp)?;
        match sol.status {
            LpStatus::Optimal => Ok(Some(Node { fixed, bound: sol.objective, values: sol.x })),
            LpStatus::Infeasible => Ok(None),
            LpStatus::Unbounded => Err(Error::Lp("MILP relaxation unbounded despite finite bounds".into())),
        }
    };

    let mut incumbent: Option<(f64, KktPoint)> = None;
    let mut stack = Vec::new();
    if let Some(root) = evaluate(vec![None; n_bin], &mut stats)? {
        stack.push(root);
    }
    while let Some(node) = stack.pop() {
        let best = incumbent.as_ref().map_or(f64::NEG_INFINITY, |(v, _)| *v);
        if node.bound <= best + opts.tolerance {
            continue;
        }
        if stats.nodes_explored >= opts.node_limit {
            let open = stack.iter().map(|n: &Node| n.bound).fold(node.bound, f64::max);
            let gap = scaling.objective(open - best.max(0.0));
            let incumbent = incumbent.map(|(_, pt)| {
                let stats = SolveStats { wall_time: start.elapsed(), ..stats.clone() };
                Box::new(assemble_solution(
                    p,
                    scaling.x(&pt.x),
                    scaling.mu(&pt.mu),
                    scaling.lambda(&pt.lambda),
                    stats,
                    Method::Milp,
                ))
            });
            return Err(Error::NodeLimit { limit: opts.node_limit, gap, incumbent });
        }
        stats.nodes_explored += 1;

        // most fractional binary, lowest index on ties
        let mut branch: Option<(usize, f64)> = None;
        for j in 0..n_bin {
            let v = node.values[lay.core() + j];
            let frac = v.min(1.0 - v);
            if frac > INTEGRALITY_TOL && branch.is_none_or(|(_, f)| frac > f) {
                branch = Some((j, frac));
            }
        }
        let Some((j, _)) = branch else {
            let pt = polish(&np, lay.point(&node.values));
            let value = np.objective(&pt.x);
            if value > best {
                incumbent = Some((value, pt));
            }
            continue;
        };

        let mut children = Vec::with_capacity(2);
        for v in [0.0, 1.0] {
            let mut fixed = node.fixed.clone();
            fixed[j] = Some(v);
            if let Some(c) = evaluate(fixed, &mut stats)? {
                stats.max_bound_increase = stats.max_bound_increase.max(c.bound - node.bound);
                children.push(c);
            }
        }
        children.sort_by(|a, b| a.bound.total_cmp(&b.bound));
        stack.extend(children);
    }

    let (_, pt) = incumbent.ok_or(Error::NoKktPoint)?;
    stats.wall_time = start.elapsed();
    Ok(assemble_solution(
        p,
        scaling.x(&pt.x),
        scaling.mu(&pt.mu),
        scaling.lambda(&pt.lambda),
        stats,
        Method::Milp,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harvester::ObjectiveCoeffs;
    use crate::qp::build_qp;
    use crate::solvers::solve_bb;
    use crate::solvers::testutil::rician_instance;
    use approx::assert_relative_eq;

    #[test]
    fn single_tone() {
        let c = ObjectiveCoeffs::new(1.0, 2.0, 0.0).unwrap();
        let p = build_qp(&[0.3], &c, 2.5, None).unwrap();
        let sol = solve_milp_kkt(&p, &SolverOptions::default()).unwrap();
        assert_relative_eq!(sol.x[0], 5.0, max_relative = 1e-14);
        assert!(sol.stats.lps_solved <= 5);
    }

    #[test]
    fn linearized_objective_matches_quadratic() {
        for r in 0..20 {
            let p = rician_instance(9, r, 6, 20e-6, r % 3 == 0);
            let sol = solve_milp_kkt(&p, &SolverOptions::default()).unwrap();
            let lin = 0.5
                * (p.f().iter().zip(&sol.x).map(|(f, x)| f * x).sum::<f64>()
                    + p.b().iter().zip(&sol.mu).map(|(b, m)| b * m).sum::<f64>());
            assert_relative_eq!(lin, sol.objective, max_relative = 1e-9);
        }
    }

    #[test]
    fn agrees_with_bb() {
        for r in 0..40 {
            let p = rician_instance(21, r, 8, 100e-6, r % 2 == 1);
            let a = solve_milp_kkt(&p, &SolverOptions::default()).unwrap();
            let b = solve_bb(&p, &SolverOptions::default()).unwrap();
            assert_relative_eq!(a.objective, b.objective, max_relative = 1e-8);
            assert!(a.kkt_residual <= 1e-8);
        }
    }
}
