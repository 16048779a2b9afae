#![allow(dead_code)]

use wptopt::channel::{dbm_to_watts, path_loss, seeded_realization, RicianParams};
use wptopt::harvester::{model_coeffs, DiodeParams, HarvesterModel, ObjectiveCoeffs};
use wptopt::qp::{build_qp, QpProblem, SwiptLimit};
use wptopt::waveform::effective_channels;

pub const D_H: f64 = 8.0;
pub const D_G: f64 = 7.0;
pub const P_SAT_DBM: f64 = -15.0;

pub fn diode() -> ObjectiveCoeffs {
    model_coeffs(&HarvesterModel::diode(&DiodeParams::SMS7630).unwrap()).unwrap()
}

pub struct Instance {
    pub h: Vec<f64>,
    pub g: Vec<f64>,
    pub budget: f64,
}

impl Instance {
    pub fn qp(&self, coeffs: &ObjectiveCoeffs, swipt: bool) -> QpProblem {
        let lim = swipt.then(|| SwiptLimit { g_eff: &self.g, p_sat: dbm_to_watts(P_SAT_DBM) });
        build_qp(&self.h, coeffs, self.budget, lim).unwrap()
    }
}

/// Rician realization `r` of `seed` with `n` tones on `m` antennas at `P_EH = p_eh` W.
pub fn rician(seed: u64, r: u64, n: usize, m: usize, p_eh: f64) -> Instance {
    let params = RicianParams::from_db(3.0, seed, n, m);
    let ch = seeded_realization(&params, r, D_H, Some(D_G)).unwrap();
    Instance {
        h: effective_channels(&ch.h),
        g: effective_channels(ch.g.as_ref().unwrap()),
        budget: p_eh / path_loss(D_H).unwrap(),
    }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
