//! Finite branch-and-bound over KKT complementarity pairs.
//!
//! A node fixes one side of some pairs (`x_i = 0` or `lambda_i = 0`; `mu_k = 0`
//! or row `k` tight) and solves the KKT relaxation LP. When the LP optimum is
//! complementary it is a KKT point and the node is done. Otherwise the pair
//! with the largest product is split. There are finitely many pairs, so the
//! tree is finite.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpSolution, LpStatus};
use crate::qp::{assemble_solution, KktPoint, QpProblem};
use crate::solution::{Method, SolveStats, Solution};

use super::{kkt_relaxation, polish, resolve_bounds, worst_product, Layout, SolverOptions, VariableBounds};
use super::COMPLEMENTARITY_TOL;

#[derive(Debug, Clone, Default)]
struct Fixings {
    x_zero: Vec<bool>,
    lambda_zero: Vec<bool>,
    mu_zero: Vec<bool>,
    tight: Vec<bool>,
}

impl Fixings {
    fn root(n: usize, k: usize) -> Self {
        Self { x_zero: vec![false; n], lambda_zero: vec![false; n], mu_zero: vec![false; k], tight: vec![false; k] }
    }
}

struct Node {
    fix: Fixings,
    bound: f64,
    point: KktPoint,
}

struct Search<'a> {
    p: &'a QpProblem,
    vb: VariableBounds,
    lay: Layout,
    stats: SolveStats,
}

impl Search<'_> {
    /// Solves the node LP; `None` when the fixings are infeasible.
    fn evaluate(&mut self, fix: Fixings) -> Result<Option<Node>> {
        let mut lp = kkt_relaxation(self.p, &self.vb, &fix.tight, 0);
        for i in 0..self.lay.n {
            if fix.x_zero[i] {
                lp.set_upper(self.lay.x(i), 0.0);
            }
            if fix.lambda_zero[i] {
                lp.set_upper(self.lay.lambda(i), 0.0);
            }
        }
        for r in 0..self.lay.k {
            if fix.mu_zero[r] {
                lp.set_upper(self.lay.mu(r), 0.0);
            }
        }
        self.stats.lps_solved += 1;
        let LpSolution { status, x, objective, .. } = solve_lp(&lp)?;
        match status {
            LpStatus::Optimal => Ok(Some(Node { fix, bound: objective, point: self.lay.point(&x) })),
            LpStatus::Infeasible => Ok(None),
            LpStatus::Unbounded => Err(Error::Lp("KKT relaxation unbounded despite finite bounds".into())),
        }
    }
}

/// Globally maximizes `1/2 x'Qx + f'x` over `Ax <= b, x >= 0`.
pub fn solve_bb(p: &QpProblem, opts: &SolverOptions) -> Result<Solution> {
    opts.validate()?;
    let start = Instant::now();
    let (np, scaling) = p.normalized();
    let vb = resolve_bounds(&np, opts)?;
    let lay = Layout { n: np.n(), k: np.k() };
    let mut search = Search { p: &np, vb, lay, stats: SolveStats::default() };

    let mut incumbent: Option<(f64, KktPoint)> = None;
    let mut stack: Vec<Node> = Vec::new();
    if let Some(root) = search.evaluate(Fixings::root(lay.n, lay.k))? {
        stack.push(root);
    }

    while let Some(node) = stack.pop() {
        let best = incumbent.as_ref().map_or(f64::NEG_INFINITY, |(v, _)| *v);
        if node.bound <= best + opts.tolerance {
            continue;
        }
        if search.stats.nodes_explored >= opts.node_limit {
            let open = stack.iter().map(|n| n.bound).fold(node.bound, f64::max);
            let gap = scaling.objective(open - best.max(0.0));
            let incumbent = incumbent.map(|(_, pt)| {
                let stats = SolveStats { wall_time: start.elapsed(), ..search.stats.clone() };
                Box::new(assemble_solution(
                    p,
                    scaling.x(&pt.x),
                    scaling.mu(&pt.mu),
                    scaling.lambda(&pt.lambda),
                    stats,
                    Method::BranchAndBound,
                ))
            });
            return Err(Error::NodeLimit { limit: opts.node_limit, gap, incumbent });
        }
        search.stats.nodes_explored += 1;

        let (pair, product) = worst_product(&np, &node.point);
        if product <= COMPLEMENTARITY_TOL {
            let pt = polish(&np, node.point);
            let value = np.objective(&pt.x);
            if value > best {
                incumbent = Some((value, pt));
            }
            continue;
        }

        let mut left = node.fix.clone();
        let mut right = node.fix;
        if pair < lay.n {
            left.x_zero[pair] = true;
            right.lambda_zero[pair] = true;
        } else {
            left.mu_zero[pair - lay.n] = true;
            right.tight[pair - lay.n] = true;
        }
        let mut children: Vec<Node> = [left, right]
            .into_iter()
            .map(|fix| search.evaluate(fix))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        for c in &children {
            search.stats.max_bound_increase = search.stats.max_bound_increase.max(c.bound - node.bound);
        }
        // better child on top of the stack; stable sort keeps left first on ties
        children.sort_by(|a, b| a.bound.total_cmp(&b.bound));
        stack.extend(children);
    }

    let (_, pt) = incumbent.ok_or(Error::NoKktPoint)?;
    search.stats.wall_time = start.elapsed();
    Ok(assemble_solution(
        p,
        scaling.x(&pt.x),
        scaling.mu(&pt.mu),
        scaling.lambda(&pt.lambda),
        search.stats,
        Method::BranchAndBound,
    ))
}
