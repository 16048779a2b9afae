use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::qp::QpProblem;
use crate::waveform::ToneAmplitudes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    /// Equal amplitude on every tone.
    Equal,
    /// Amplitudes proportional to the channel gain.
    Mrt,
    /// All power on the strongest tone.
    Single,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::Equal, BaselineKind::Mrt, BaselineKind::Single];

    pub fn tag(&self) -> &'static str {
        match self {
            BaselineKind::Equal => "equal",
            BaselineKind::Mrt => "mrt",
            BaselineKind::Single => "single",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal" => Ok(BaselineKind::Equal),
            "mrt" => Ok(BaselineKind::Mrt),
            "single" => Ok(BaselineKind::Single),
            _ => Err(Error::InvalidArgument(format!("unknown baseline {s:?}"))),
        }
    }
}

/// Baseline amplitudes with `1/2 |s|^2 = budget`.
pub fn baseline_alloc(kind: BaselineKind, h_eff: &[f64], budget: f64) -> Result<ToneAmplitudes> {
    let n = h_eff.len();
    if n == 0 {
        return Err(Error::Dimension("no tones".into()));
    }
    if !h_eff.iter().all(|h| h.is_finite() && *h > 0.0) {
        return Err(Error::InvalidArgument("baseline gains must be positive".into()));
    }
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::InvalidArgument(format!("budget must be positive, got {budget}")));
    }
    let s = match kind {
        BaselineKind::Equal => vec![(2.0 * budget / n as f64).sqrt(); n],
        BaselineKind::Mrt => {
            let norm2: f64 = h_eff.iter().map(|h| h * h).sum();
            let scale = (2.0 * budget / norm2).sqrt();
            h_eff.iter().map(|h| h * scale).collect()
        }
        BaselineKind::Single => {
            let best = (0..n).fold(0, |b, i| if h_eff[i] > h_eff[b] { i } else { b });
            let mut s = vec![0.0; n];
            s[best] = (2.0 * budget).sqrt();
            s
        }
    };
    Ok(ToneAmplitudes(s))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationEval {
    /// `0.5 x'Qx + f'x` at `x = s^2`, reported even when infeasible.
    pub objective: f64,
    pub feasible: bool,
    /// First row of `A x <= b` exceeded by more than `1e-9` relative.
    pub violated_row: Option<usize>,
}

pub fn evaluate_allocation(s: &ToneAmplitudes, p: &QpProblem) -> Result<AllocationEval> {
    if s.len() != p.n() {
        return Err(Error::Dimension(format!("{} amplitudes for {} tones", s.len(), p.n())));
    }
    let x = s.powers();
    let violated_row = p
        .row_activity(&x)
        .iter()
        .enumerate()
        .position(|(r, act)| *act > p.b()[r] * (1.0 + 1e-9));
    Ok(AllocationEval { objective: p.objective(&x), feasible: violated_row.is_none(), violated_row })
}
