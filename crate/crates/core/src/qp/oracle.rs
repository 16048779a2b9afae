//! Exhaustive KKT enumeration.
//!
//! Once the support of `x` and the set of active rows are fixed, the KKT
//! conditions are a square linear system. Enumerating every support and every
//! row activity pattern therefore visits every KKT point, and the best one is
//! the global maximum. Cost is `2^(N+K)` small dense solves.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{assemble_solution, kkt_residual, KktPoint, QpProblem};
use crate::error::{Error, Result};
use crate::solution::{Method, SolveStats, Solution};

pub const MAX_ORACLE_TONES: usize = 16;
pub const MAX_ORACLE_ROWS: usize = 2;

const RESIDUAL_TOL: f64 = 1e-8;
const COND_LIMIT: f64 = 1e12;
const TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
struct Candidate {
    support: Vec<usize>,
    objective: f64,
    point: KktPoint,
}

pub fn enumerate_kkt_oracle(p: &QpProblem) -> Result<Solution> {
    let start = Instant::now();
    let (n, k) = (p.n(), p.k());
    if n > MAX_ORACLE_TONES || k > MAX_ORACLE_ROWS {
        return Err(Error::InvalidArgument(format!(
            "oracle handles at most {MAX_ORACLE_TONES} variables and {MAX_ORACLE_ROWS} rows, got {n} and {k}"
        )));
    }
    let (np, scaling) = p.normalized();

    let patterns = 1u64 << (n + k);
    let candidates: Vec<Candidate> = (0..patterns)
        .into_par_iter()
        .filter_map(|mask| {
            let support: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let active: Vec<usize> = (0..k).filter(|r| mask >> (n + r) & 1 == 1).collect();
            solve_pattern(&np, &support, &active).map(|point| Candidate {
                objective: np.objective(&point.x),
                support,
                point,
            })
        })
        .collect();

    let best = candidates
        .iter()
        .map(|c| c.objective)
        .fold(f64::NEG_INFINITY, f64::max);
    let chosen = candidates
        .iter()
        .filter(|c| c.objective >= best - TIE_TOL)
        .min_by(|a, b| a.support.cmp(&b.support))
        .ok_or(Error::NoKktPoint)?;

    if let Some(v) = best_vertex(&np) {
        if v > best + 1e-9 * best.abs().max(1.0) {
            return Err(Error::OracleInconsistent { vertex: v, kkt: best });
        }
    }

    let stats = SolveStats {
        nodes_explored: patterns as usize,
        lps_solved: 0,
        wall_time: start.elapsed(),
        max_bound_increase: 0.0,
    };
    let pt = &chosen.point;
    Ok(assemble_solution(
        p,
        scaling.x(&pt.x),
        scaling.mu(&pt.mu),
        scaling.lambda(&pt.lambda),
        stats,
        Method::KktEnumeration,
    ))
}

/// Solves the KKT system with `x` supported on `support` and rows `active`
/// tight; returns the point only if it satisfies every KKT condition.
pub(crate) fn solve_pattern(p: &QpProblem, support: &[usize], active: &[usize]) -> Option<KktPoint> {
    let (n, k) = (p.n(), p.k());
    let (s, r) = (support.len(), active.len());
    let m = s + r;
    let mut x = vec![0.0; n];
    let mut mu = vec![0.0; k];

    if m > 0 {
        let mut sys = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for (a, &i) in support.iter().enumerate() {
            for (b, &j) in support.iter().enumerate() {
                sys[(a, b)] = p.q()[(i, j)];
            }
            for (c, &row) in active.iter().enumerate() {
                sys[(a, s + c)] = -p.a()[(row, i)];
                sys[(s + c, a)] = p.a()[(row, i)];
            }
            rhs[a] = -p.f()[i];
        }
        for (c, &row) in active.iter().enumerate() {
            rhs[s + c] = p.b()[row];
        }
        let inv = sys.clone().try_inverse()?;
        if one_norm(&sys) * one_norm(&inv) > COND_LIMIT {
            return None;
        }
        let sol = sys.lu().solve(&rhs)?;
        for (a, &i) in support.iter().enumerate() {
            x[i] = sol[a];
        }
        for (c, &row) in active.iter().enumerate() {
            mu[row] = sol[s + c];
        }
    }

    // lambda = A'mu - Qx - f, zero on the support
    let mut lambda = vec![0.0; n];
    for i in (0..n).filter(|i| !support.contains(i)) {
        let mut v = -p.f()[i];
        for j in support {
            v -= p.q()[(i, *j)] * x[*j];
        }
        for row in active {
            v += p.a()[(*row, i)] * mu[*row];
        }
        lambda[i] = v;
    }
    let pt = KktPoint { x, mu, lambda };
    (kkt_residual(p, &pt) <= RESIDUAL_TOL).then_some(pt)
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Best objective over the vertices of `{A x <= b, x >= 0}`. With at most two
/// rows a vertex has at most two non-zeros.
fn best_vertex(p: &QpProblem) -> Option<f64> {
    let (n, k) = (p.n(), p.k());
    let feasible = |x: &[f64]| {
        x.iter().all(|v| *v >= -1e-12)
            && p.row_activity(x).iter().zip(p.b().iter()).all(|(a, b)| *a <= b * (1.0 + 1e-12))
    };
    let mut best = Some(0.0);
    let mut consider = |x: Vec<f64>| {
        if feasible(&x) {
            let v = p.objective(&x);
            best = best.map(|b: f64| b.max(v));
        }
    };
    let u = p.box_bounds();
    for i in 0..n {
        let mut x = vec![0.0; n];
        x[i] = u[i];
        consider(x);
    }
    if k == 2 {
        for i in 0..n {
            for j in i + 1..n {
                let (a11, a12, a21, a22) = (p.a()[(0, i)], p.a()[(0, j)], p.a()[(1, i)], p.a()[(1, j)]);
                let det = a11 * a22 - a12 * a21;
                if det.abs() < 1e-14 {
                    continue;
                }
                let xi = (p.b()[0] * a22 - a12 * p.b()[1]) / det;
                let xj = (a11 * p.b()[1] - a21 * p.b()[0]) / det;
                let mut x = vec![0.0; n];
                x[i] = xi;
                x[j] = xj;
                consider(x);
            }
        }
    }
    best
}
