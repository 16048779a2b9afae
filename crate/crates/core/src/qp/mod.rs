//! The linearly constrained quadratic program behind multisine allocation.
//!
//! With per-tone powers `x_i = s_i^2` as decision variables the harvester
//! objective becomes
//!
//! ```text
//! maximize   1/2 x'Qx + f'x
//! subject to A x <= b,  x >= 0
//! ```
//!
//! where `Q` is elementwise non-negative but indefinite. Row 1 of `A` is the
//! transmit budget `sum x <= 2P`; the optional row 2 caps the power reaching
//! the information receiver, `sum g_i^2 x_i <= 2 P_sat`.
//!
//! KKT conditions are written for the maximization:
//!
//! ```text
//! Qx + f - A'mu + lambda = 0,   x'lambda = 0,   mu_k (A_k x - b_k) = 0,
//! x, lambda, mu >= 0,           A x <= b
//! ```
//!
//! At any KKT point the objective equals `1/2 (f'x + b'mu)`.

mod oracle;

pub use oracle::{enumerate_kkt_oracle, MAX_ORACLE_ROWS, MAX_ORACLE_TONES};
pub(crate) use oracle::solve_pattern;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::harvester::ObjectiveCoeffs;
use crate::solution::{Method, SolveStats, Solution};
use crate::waveform::analytic_moments;

/// Channel, model and budget data a problem was assembled from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub h_eff: Vec<f64>,
    pub g_eff: Option<Vec<f64>>,
    pub coeffs: ObjectiveCoeffs,
    /// Transmit power budget `P` (W).
    pub budget: f64,
    pub p_sat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    q: DMatrix<f64>,
    f: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    provenance: Option<Provenance>,
}

/// Information-receiver constraint: effective gains `g` and saturation power.
#[derive(Debug, Clone, Copy)]
pub struct SwiptLimit<'a> {
    pub g_eff: &'a [f64],
    pub p_sat: f64,
}

impl QpProblem {
    /// Generic problem data. `Q`, `f` and `A` must be non-negative, `Q`
    /// symmetric, `b` positive, and every variable must appear with a positive
    /// coefficient in some row so the feasible set is bounded.
    pub fn new(q: DMatrix<f64>, f: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = f.len();
        if n == 0 {
            return Err(Error::Dimension("problem has no variables".into()));
        }
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::Dimension(format!("Q is {}x{}, expected {n}x{n}", q.nrows(), q.ncols())));
        }
        if a.ncols() != n || a.nrows() != b.len() || b.is_empty() {
            return Err(Error::Dimension(format!(
                "A is {}x{}, b has {} rows, expected ?x{n} with matching rows",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        let finite_nonneg = |v: &f64| v.is_finite() && *v >= 0.0;
        if !q.iter().all(finite_nonneg) || !f.iter().all(finite_nonneg) || !a.iter().all(finite_nonneg) {
            return Err(Error::InvalidArgument("Q, f and A must be finite and non-negative".into()));
        }
        if q != q.transpose() {
            return Err(Error::InvalidArgument("Q must be symmetric".into()));
        }
        if !b.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidArgument("b must be positive".into()));
        }
        if let Some(i) = (0..n).find(|&i| a.column(i).iter().all(|v| *v <= 0.0)) {
            return Err(Error::InvalidArgument(format!("variable {i} is unbounded (no row covers it)")));
        }
        Ok(Self { q, f, a, b, provenance: None })
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    /// Number of constraint rows.
    pub fn k(&self) -> usize {
        self.b.len()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn f(&self) -> &DVector<f64> {
        &self.f
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    /// `0.5 x'Qx + f'x`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let n = self.n();
        debug_assert_eq!(x.len(), n);
        let mut quad = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.q[(i, j)] * x[j];
            }
            quad += x[i] * row;
        }
        0.5 * quad + self.f.iter().zip(x).map(|(fi, xi)| fi * xi).sum::<f64>()
    }

    /// Largest value each `x_i` can take alone: `min_k b_k / A_ki` over `A_ki > 0`.
    pub fn box_bounds(&self) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                (0..self.k())
                    .filter(|&k| self.a[(k, i)] > 0.0)
                    .map(|k| self.b[k] / self.a[(k, i)])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// Row activity `A x`.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k()).map(|k| (0..self.n()).map(|i| self.a[(k, i)] * x[i]).sum()).collect()
    }

    /// Rescaled copy with `x` in units of the largest box bound, rows
    /// normalized to `b_k = 1`, and the objective divided by its largest
    /// single-tone value. Solvers work on this copy; the returned
    /// [`Scaling`] maps results back.
    pub fn normalized(&self) -> (QpProblem, Scaling) {
        let u = self.box_bounds();
        let sx = u.iter().copied().fold(0.0, f64::max);
        let so = (0..self.n())
            .map(|i| 0.5 * self.q[(i, i)] * u[i] * u[i] + self.f[i] * u[i])
            .fold(0.0, f64::max);
        let so = if so > 0.0 { so } else { 1.0 };
        let row: Vec<f64> = self.b.iter().map(|bk| sx / bk).collect();

        let q = &self.q * (sx * sx / so);
        let f = &self.f * (sx / so);
        let mut a = self.a.clone();
        for (k, r) in row.iter().enumerate() {
            a.row_mut(k).scale_mut(*r);
        }
        let b = DVector::from_element(self.k(), 1.0);
        let scaled = QpProblem { q, f, a, b, provenance: None };
        (scaled, Scaling { sx, so, row })
    }
}

/// Maps normalized solutions back to original units (see [`QpProblem::normalized`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Scaling {
    sx: f64,
    so: f64,
    row: Vec<f64>,
}

impl Scaling {
    pub fn x(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v * self.sx).collect()
    }

    pub fn mu(&self, mu: &[f64]) -> Vec<f64> {
        mu.iter().zip(&self.row).map(|(m, r)| m * r * self.so / self.sx).collect()
    }

    pub fn lambda(&self, lambda: &[f64]) -> Vec<f64> {
        lambda.iter().map(|l| l * self.so / self.sx).collect()
    }

    pub fn objective(&self, v: f64) -> f64 {
        v * self.so
    }
}

/// Assembles the LCQP for effective gains `h_eff`, objective coefficients and
/// transmit budget `budget` (W), optionally adding the information-receiver row.
pub fn build_qp(
    h_eff: &[f64],
    coeffs: &ObjectiveCoeffs,
    budget: f64,
    swipt: Option<SwiptLimit<'_>>,
) -> Result<QpProblem> {
    let n = h_eff.len();
    if n == 0 {
        return Err(Error::Dimension("no tones".into()));
    }
    if let Some(i) = h_eff.iter().position(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(Error::ZeroGain(i));
    }
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::InvalidArgument(format!("budget must be positive, got {budget}")));
    }
    let h2: Vec<f64> = h_eff.iter().map(|h| h * h).collect();
    let base = 0.375 * coeffs.c4;
    let q = DMatrix::from_fn(n, n, |i, j| {
        let weight = if i == j { 2.0 } else { 4.0 };
        weight * base * (h2[i] * h2[j])
    });
    let f = DVector::from_iterator(n, h2.iter().map(|v| 0.5 * coeffs.c2 * v));

    let (a, b) = match swipt {
        None => (DMatrix::from_element(1, n, 1.0), DVector::from_element(1, 2.0 * budget)),
        Some(lim) => {
            if lim.g_eff.len() != n {
                return Err(Error::Dimension(format!("g_eff has {} tones, h_eff {n}", lim.g_eff.len())));
            }
            if !lim.g_eff.iter().all(|g| g.is_finite() && *g >= 0.0) {
                return Err(Error::InvalidArgument("g_eff must be non-negative".into()));
            }
            if !(lim.p_sat > 0.0 && lim.p_sat.is_finite()) {
                return Err(Error::InvalidArgument(format!("p_sat must be positive, got {}", lim.p_sat)));
            }
            let a = DMatrix::from_fn(2, n, |k, i| if k == 0 { 1.0 } else { lim.g_eff[i] * lim.g_eff[i] });
            (a, DVector::from_vec(vec![2.0 * budget, 2.0 * lim.p_sat]))
        }
    };
    let mut p = QpProblem::new(q, f, a, b)?;
    p.provenance = Some(Provenance {
        h_eff: h_eff.to_vec(),
        g_eff: swipt.map(|l| l.g_eff.to_vec()),
        coeffs: *coeffs,
        budget,
        p_sat: swipt.map(|l| l.p_sat),
    });
    Ok(p)
}

/// `0.5 x'Qx + f'x`.
pub fn objective(p: &QpProblem, x: &[f64]) -> f64 {
    p.objective(x)
}

/// `c4 E{y^4} + c2 E{y^2}` for phase-aligned tones with amplitudes `s`.
pub fn fdc_from_amplitudes(s: &[f64], h_eff: &[f64], coeffs: &ObjectiveCoeffs) -> Result<f64> {
    let (m2, m4) = analytic_moments(s, h_eff)?;
    Ok(coeffs.c4 * m4 + coeffs.c2 * m2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktPoint {
    pub x: Vec<f64>,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// Largest violation among stationarity, the complementarity products, and
/// the sign and feasibility conditions.
pub fn kkt_residual(p: &QpProblem, pt: &KktPoint) -> f64 {
    let (n, k) = (p.n(), p.k());
    assert_eq!(pt.x.len(), n, "x length");
    assert_eq!(pt.lambda.len(), n, "lambda length");
    assert_eq!(pt.mu.len(), k, "mu length");
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut g = p.f[i] + pt.lambda[i];
        for j in 0..n {
            g += p.q[(i, j)] * pt.x[j];
        }
        for r in 0..k {
            g -= p.a[(r, i)] * pt.mu[r];
        }
        worst = worst
            .max(g.abs())
            .max((pt.x[i] * pt.lambda[i]).abs())
            .max(-pt.x[i])
            .max(-pt.lambda[i]);
    }
    for (r, act) in p.row_activity(&pt.x).into_iter().enumerate() {
        let slack = act - p.b[r];
        worst = worst.max((pt.mu[r] * slack).abs()).max(slack).max(-pt.mu[r]);
    }
    worst
}

pub(crate) fn assemble_solution(
    p: &QpProblem,
    x: Vec<f64>,
    mu: Vec<f64>,
    lambda: Vec<f64>,
    stats: SolveStats,
    method: Method,
) -> Solution {
    let pt = KktPoint { x, mu, lambda };
    let kkt_residual = kkt_residual(p, &pt);
    let objective = p.objective(&pt.x);
    let s = pt.x.iter().map(|v| v.max(0.0).sqrt()).collect();
    Solution { x: pt.x, s, mu: pt.mu, lambda: pt.lambda, objective, kkt_residual, stats, method }
}
