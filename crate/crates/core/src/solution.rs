use std::time::Duration;

/// Which routine produced a [`Solution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    BranchAndBound,
    Milp,
    KktEnumeration,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::BranchAndBound => "bb",
            Method::Milp => "milp",
            Method::KktEnumeration => "oracle",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub nodes_explored: usize,
    pub lps_solved: usize,
    pub wall_time: Duration,
    /// Largest amount by which a child relaxation exceeded its parent's bound.
    pub max_bound_increase: f64,
}

/// A certified KKT point of the LCQP, in the problem's original units.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Per-tone powers `x_n = s_n^2`.
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `0.5 x'Qx + f'x`, excluding the model offset.
    pub objective: f64,
    pub kkt_residual: f64,
    pub stats: SolveStats,
    pub method: Method,
}

impl Solution {
    /// Indices with `x_i > tol * max_j x_j`.
    pub fn support(&self, tol: f64) -> Vec<usize> {
        let peak = self.x.iter().copied().fold(0.0, f64::max);
        (0..self.x.len()).filter(|&i| self.x[i] > tol * peak).collect()
    }
}
