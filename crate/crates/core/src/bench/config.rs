//! Scenario configuration files.
//!
//! A config is a JSON object. Every key is optional; missing keys take the
//! defaults of the chosen scenario. Unknown keys are rejected.
//!
//! ```json
//! {
//!   "scenario": "swipt_psat",
//!   "realizations": 200,
//!   "p_sat_dbm": [-25, -20, -15, -10],
//!   "model": { "kind": "diode", "r_ant": 50 }
//! }
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::harvester::{fit_poly2, read_samples_csv, DiodeParams, HarvesterModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    AllocSingleRealization,
    SweepPower,
    FlatChannel,
    MisoSweep,
    SwiptPower,
    SwiptPsat,
    SwiptDistance,
    CurvefitCompare,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::AllocSingleRealization,
        Scenario::SweepPower,
        Scenario::FlatChannel,
        Scenario::MisoSweep,
        Scenario::SwiptPower,
        Scenario::SwiptPsat,
        Scenario::SwiptDistance,
        Scenario::CurvefitCompare,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Scenario::AllocSingleRealization => "alloc_single_realization",
            Scenario::SweepPower => "sweep_power",
            Scenario::FlatChannel => "flat_channel",
            Scenario::MisoSweep => "miso_sweep",
            Scenario::SwiptPower => "swipt_power",
            Scenario::SwiptPsat => "swipt_psat",
            Scenario::SwiptDistance => "swipt_distance",
            Scenario::CurvefitCompare => "curvefit_compare",
        }
    }

    pub fn is_swipt(&self) -> bool {
        matches!(self, Scenario::SwiptPower | Scenario::SwiptPsat | Scenario::SwiptDistance)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.tag() == s)
            .ok_or_else(|| Error::Config(format!("scenario: unknown tag {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Bb,
    Milp,
    Oracle,
    BbSwipt,
    MilpSwipt,
    OracleSwipt,
    Equal,
    Mrt,
    Single,
    /// Diode-model optimum scored under the curve-fit model.
    BbDiode,
}

impl Strategy {
    const ALL: [Strategy; 10] = [
        Strategy::Bb,
        Strategy::Milp,
        Strategy::Oracle,
        Strategy::BbSwipt,
        Strategy::MilpSwipt,
        Strategy::OracleSwipt,
        Strategy::Equal,
        Strategy::Mrt,
        Strategy::Single,
        Strategy::BbDiode,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Strategy::Bb => "bb",
            Strategy::Milp => "milp",
            Strategy::Oracle => "oracle",
            Strategy::BbSwipt => "bb_swipt",
            Strategy::MilpSwipt => "milp_swipt",
            Strategy::OracleSwipt => "oracle_swipt",
            Strategy::Equal => "equal",
            Strategy::Mrt => "mrt",
            Strategy::Single => "single",
            Strategy::BbDiode => "bb_diode",
        }
    }

    pub fn is_swipt(&self) -> bool {
        matches!(self, Strategy::BbSwipt | Strategy::MilpSwipt | Strategy::OracleSwipt)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.tag() == s)
            .ok_or_else(|| Error::Config(format!("strategies: unknown strategy {s:?}")))
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n_tones: usize,
    pub antennas: Vec<usize>,
    pub f0_hz: f64,
    pub delta_f_hz: f64,
    /// Grid of `P_EH = P * L_P` (W).
    pub p_eh_w: Vec<f64>,
    pub d_h_wavelengths: f64,
    pub d_g_wavelengths: Vec<f64>,
    pub kappa_db: f64,
    pub p_sat_dbm: Vec<f64>,
    pub model: HarvesterModel,
    /// Curve-fit model for `curvefit_compare`; always `Poly2`.
    pub curvefit_model: HarvesterModel,
    /// Variance of the frequency-flat channel gains.
    pub flat_sigma: f64,
    pub realizations: usize,
    pub seed: u64,
    pub strategies: Vec<Strategy>,
    pub node_limit: usize,
    pub channel_csv: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 20_190_801;
pub const DEFAULT_REALIZATIONS: usize = 500;
pub const DEFAULT_POLY2: HarvesterModel = HarvesterModel::Poly2 { beta1: 1500.0, beta2: 0.25, beta3: -2e-7 };

const POWER_GRID_W: [f64; 5] = [10e-6, 25e-6, 50e-6, 75e-6, 100e-6];
const PSAT_GRID_DBM: [f64; 9] = [-30.0, -25.0, -20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0];
const DG_GRID: [f64; 4] = [6.0, 7.0, 8.0, 10.0];

impl ScenarioConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        use Scenario::*;
        use Strategy::*;
        let p_eh_w = match scenario {
            AllocSingleRealization => vec![50e-6],
            SwiptPsat | SwiptDistance => vec![100e-6],
            _ => POWER_GRID_W.to_vec(),
        };
        let strategies = match scenario {
            AllocSingleRealization => vec![Bb, Milp, BbSwipt, Equal, Mrt, Single],
            SweepPower | FlatChannel => vec![Bb, Milp, Equal, Mrt, Single],
            MisoSweep => vec![Bb],
            SwiptPower | SwiptPsat | SwiptDistance => vec![Bb, BbSwipt],
            CurvefitCompare => vec![Bb, BbDiode, Equal, Mrt, Single],
        };
        Self {
            scenario,
            n_tones: 8,
            antennas: if scenario == MisoSweep { vec![1, 2, 4] } else { vec![1] },
            f0_hz: 2.4e9,
            delta_f_hz: 1.25e6,
            p_eh_w,
            d_h_wavelengths: 8.0,
            d_g_wavelengths: if scenario == SwiptDistance { DG_GRID.to_vec() } else { vec![7.0] },
            kappa_db: 3.0,
            p_sat_dbm: if scenario == SwiptPsat { PSAT_GRID_DBM.to_vec() } else { vec![-15.0] },
            model: HarvesterModel::diode(&DiodeParams::SMS7630).expect("default diode is valid"),
            curvefit_model: DEFAULT_POLY2,
            flat_sigma: 0.05,
            realizations: if scenario == AllocSingleRealization { 1 } else { DEFAULT_REALIZATIONS },
            seed: DEFAULT_SEED,
            strategies,
            node_limit: 100_000,
            channel_csv: None,
        }
    }

    /// Checks cross-field constraints; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::Config(format!("{key}: {msg}")));
        if self.n_tones == 0 {
            return bad("n_tones", "must be at least 1".into());
        }
        if self.antennas.is_empty() || self.antennas.contains(&0) {
            return bad("antennas", "must be a non-empty list of positive counts".into());
        }
        for (key, v) in [("f0_hz", self.f0_hz), ("delta_f_hz", self.delta_f_hz), ("d_h_wavelengths", self.d_h_wavelengths)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(key, format!("must be positive, got {v}"));
            }
        }
        if self.d_h_wavelengths < 1.0 / (4.0 * std::f64::consts::PI) {
            return bad("d_h_wavelengths", "path loss would exceed unity".into());
        }
        for (key, grid) in [("p_eh_w", &self.p_eh_w), ("d_g_wavelengths", &self.d_g_wavelengths)] {
            if grid.is_empty() || grid.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return bad(key, "must be a non-empty list of positive values".into());
            }
        }
        if self.d_g_wavelengths.iter().any(|d| *d < 1.0 / (4.0 * std::f64::consts::PI)) {
            return bad("d_g_wavelengths", "path loss would exceed unity".into());
        }
        if self.p_sat_dbm.is_empty() || self.p_sat_dbm.iter().any(|v| !v.is_finite()) {
            return bad("p_sat_dbm", "must be a non-empty list of finite values".into());
        }
        if !self.kappa_db.is_finite() {
            return bad("kappa_db", "must be finite".into());
        }
        if !(self.flat_sigma >= 0.0 && self.flat_sigma.is_finite()) {
            return bad("flat_sigma", "must be non-negative".into());
        }
        if self.realizations == 0 {
            return bad("realizations", "must be at least 1".into());
        }
        if self.node_limit == 0 {
            return bad("node_limit", "must be at least 1".into());
        }
        if self.strategies.is_empty() {
            return bad("strategies", "must not be empty".into());
        }
        if !matches!(self.curvefit_model, HarvesterModel::Poly2 { .. }) {
            return bad("curvefit_model", "must be a poly2 model".into());
        }
        for (key, m) in [("model", &self.model), ("curvefit_model", &self.curvefit_model)] {
            if let Err(e) = crate::harvester::model_coeffs(m) {
                return bad(key, e.to_string());
            }
        }

        let swipt_ok = self.scenario.is_swipt() || self.scenario == Scenario::AllocSingleRealization;
        for s in &self.strategies {
            if s.is_swipt() && !swipt_ok {
                return bad("strategies", format!("{s} needs a SWIPT or alloc_single_realization scenario"));
            }
            if *s == Strategy::BbDiode && self.scenario != Scenario::CurvefitCompare {
                return bad("strategies", "bb_diode is only meaningful in curvefit_compare".into());
            }
            if matches!(s, Strategy::Oracle | Strategy::OracleSwipt) && self.n_tones > crate::qp::MAX_ORACLE_TONES {
                return bad("strategies", format!("oracle supports at most {} tones", crate::qp::MAX_ORACLE_TONES));
            }
        }
        if self.strategies.iter().any(Strategy::is_swipt) && self.antennas.iter().any(|m| *m > 1) {
            return bad("antennas", "SWIPT strategies support a single transmit antenna".into());
        }
        if self.scenario == Scenario::FlatChannel && self.antennas != [1] {
            return bad("antennas", "flat_channel is single-antenna".into());
        }
        if self.channel_csv.is_some() {
            if self.scenario != Scenario::AllocSingleRealization {
                return bad("channel_csv", "only supported by alloc_single_realization".into());
            }
            if self.realizations != 1 {
                return bad("channel_csv", "requires realizations = 1".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<Scenario>,
    n_tones: Option<usize>,
    antennas: Option<Vec<usize>>,
    f0_hz: Option<f64>,
    delta_f_hz: Option<f64>,
    p_eh_w: Option<Vec<f64>>,
    d_h_wavelengths: Option<f64>,
    d_g_wavelengths: Option<Vec<f64>>,
    kappa_db: Option<f64>,
    p_sat_dbm: Option<Vec<f64>>,
    model: Option<RawModel>,
    curvefit_model: Option<RawModel>,
    flat_sigma: Option<f64>,
    realizations: Option<usize>,
    seed: Option<u64>,
    strategies: Option<Vec<String>>,
    node_limit: Option<usize>,
    channel_csv: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawModel {
    Diode {
        i_s: Option<f64>,
        v_t: Option<f64>,
        gamma: Option<f64>,
        r_ant: Option<f64>,
    },
    Poly2 {
        beta1: Option<f64>,
        beta2: Option<f64>,
        beta3: Option<f64>,
        /// `p_in_w,p_out_w` samples to fit instead of explicit coefficients.
        data: Option<PathBuf>,
    },
}

impl RawModel {
    fn resolve(self, key: &str, base: &Path) -> Result<HarvesterModel> {
        match self {
            RawModel::Diode { i_s, v_t, gamma, r_ant } => {
                let d = DiodeParams::SMS7630;
                let p = DiodeParams {
                    i_s: i_s.unwrap_or(d.i_s),
                    v_t: v_t.unwrap_or(d.v_t),
                    gamma: gamma.unwrap_or(d.gamma),
                    r_ant: r_ant.unwrap_or(d.r_ant),
                };
                HarvesterModel::diode(&p).map_err(|e| Error::Config(format!("{key}: {e}")))
            }
            RawModel::Poly2 { beta1, beta2, beta3, data } => {
                if let Some(path) = data {
                    if beta1.is_some() || beta2.is_some() || beta3.is_some() {
                        return Err(Error::Config(format!("{key}.data: give either data or coefficients")));
                    }
                    let path = base.join(path);
                    let file = fs::File::open(&path)
                        .map_err(|e| Error::Config(format!("{key}.data: {}: {e}", path.display())))?;
                    let samples = read_samples_csv(file).map_err(|e| Error::Config(format!("{key}.data: {e}")))?;
                    let fit = fit_poly2(&samples).map_err(|e| Error::Config(format!("{key}.data: {e}")))?;
                    return Ok(fit.model());
                }
                let HarvesterModel::Poly2 { beta1: b1, beta2: b2, beta3: b3 } = DEFAULT_POLY2 else { unreachable!() };
                Ok(HarvesterModel::Poly2 {
                    beta1: beta1.unwrap_or(b1),
                    beta2: beta2.unwrap_or(b2),
                    beta3: beta3.unwrap_or(b3),
                })
            }
        }
    }
}

/// Parses config text. Relative paths inside resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { "(root)".to_string() } else { path };
        Error::Config(format!("{key}: {}", e.inner()))
    })?;

    let mut cfg = ScenarioConfig::defaults(raw.scenario.unwrap_or(Scenario::SweepPower));
    macro_rules! take {
        ($($field:ident),*) => { $( if let Some(v) = raw.$field { cfg.$field = v; } )* };
    }
    take!(n_tones, antennas, f0_hz, delta_f_hz, p_eh_w, d_h_wavelengths, d_g_wavelengths, kappa_db, p_sat_dbm);
    take!(flat_sigma, realizations, seed, node_limit);
    if let Some(m) = raw.model {
        cfg.model = m.resolve("model", base)?;
    }
    if let Some(m) = raw.curvefit_model {
        cfg.curvefit_model = m.resolve("curvefit_model", base)?;
    }
    if let Some(list) = raw.strategies {
        cfg.strategies = list.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    }
    cfg.channel_csv = raw.channel_csv.map(|p| base.join(p));
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::dbm_to_watts;
    use approx::assert_relative_eq;

    fn parse(text: &str) -> Result<ScenarioConfig> {
        parse_config(text, Path::new("."))
    }

    #[test]
    fn empty_object_is_default() {
        let cfg = parse("{}").unwrap();
        assert_eq!(cfg, ScenarioConfig::defaults(Scenario::SweepPower));
        assert_eq!(cfg.n_tones, 8);
        assert_eq!(cfg.f0_hz, 2.4e9);
        assert_eq!(cfg.delta_f_hz, 1.25e6);
        assert_eq!(cfg.kappa_db, 3.0);
        assert_eq!(cfg.d_h_wavelengths, 8.0);
        assert_eq!(cfg.d_g_wavelengths, vec![7.0]);
        assert_eq!(cfg.p_sat_dbm, vec![-15.0]);
        assert_eq!(cfg.model, HarvesterModel::diode(&DiodeParams::SMS7630).unwrap());
    }

    #[test]
    fn p_sat_in_watts() {
        let cfg = parse(r#"{"p_sat_dbm": [-15]}"#).unwrap();
        assert_relative_eq!(dbm_to_watts(cfg.p_sat_dbm[0]), 3.162_277_66e-5, max_relative = 1e-9);
    }

    #[test]
    fn errors_name_the_key() {
        let err = parse(r#"{"realizations": -3}"#).unwrap_err().to_string();
        assert!(err.contains("realizations"), "{err}");
        let err = parse(r#"{"realizations": 0}"#).unwrap_err().to_string();
        assert!(err.contains("realizations"), "{err}");
        let err = parse(r#"{"bogus": 1}"#).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
        let err = parse(r#"{"model": {"kind": "diode", "r_ant": -50}}"#).unwrap_err().to_string();
        assert!(err.contains("model"), "{err}");
        let err = parse(r#"{"model": {"kind": "diode", "extra": 1}}"#).unwrap_err().to_string();
        assert!(err.contains("extra"), "{err}");
        let err = parse(r#"{"p_eh_w": []}"#).unwrap_err().to_string();
        assert!(err.contains("p_eh_w"), "{err}");
        let err = parse(r#"{"strategies": ["reverse_gp"]}"#).unwrap_err().to_string();
        assert!(err.contains("strategies"), "{err}");
    }

    #[test]
    fn scenario_defaults() {
        let cfg = parse(r#"{"scenario": "miso_sweep"}"#).unwrap();
        assert_eq!(cfg.antennas, vec![1, 2, 4]);
        let cfg = parse(r#"{"scenario": "swipt_distance"}"#).unwrap();
        assert_eq!(cfg.d_g_wavelengths, vec![6.0, 7.0, 8.0, 10.0]);
        assert_eq!(cfg.p_eh_w, vec![100e-6]);
        for sc in Scenario::ALL {
            ScenarioConfig::defaults(sc).validate().unwrap();
            assert_eq!(sc.tag().parse::<Scenario>().unwrap(), sc);
        }
    }

    #[test]
    fn swipt_strategy_outside_swipt_scenario() {
        let err = parse(r#"{"scenario": "flat_channel", "strategies": ["bb_swipt"]}"#).unwrap_err();
        assert!(err.to_string().contains("strategies"));
    }

    #[test]
    fn poly2_partial_override() {
        let cfg = parse(r#"{"model": {"kind": "poly2", "beta1": 1000}}"#).unwrap();
        assert_eq!(cfg.model, HarvesterModel::Poly2 { beta1: 1000.0, beta2: 0.25, beta3: -2e-7 });
    }
}
