//! Seeded Monte Carlo experiments written as CSV.
//!
//! Every scenario walks a grid of `P_EH` values (transmit power normalized to
//! the harvester path loss) and, where relevant, antenna counts, saturation
//! powers and information-receiver distances. Realization `r` draws its
//! channels from the streams described in [`crate::channel::realization_rng`],
//! so results do not depend on thread scheduling and every grid point sees the
//! same channels.
//!
//! Files written by [`SweepResult::write_csv`]:
//!
//! | file          | header |
//! |---------------|--------|
//! | `sweep.csv`   | `p_eh_w,strategy,mean_objective,stderr,realizations` |
//! | `stats.csv`   | `p_eh_w,strategy,mean_nodes,mean_lps,infeasible,flagged` |
//! | `alloc.csv`   | `tone,h_norm,g_norm,strategy,x_over_2p` (alloc scenario) |
//! | `channel.csv` | see [`crate::channel::write_channel_csv`] (alloc scenario) |
//! | `support.csv` | `p_eh_w,support_agreement,realizations` (curvefit scenario) |
//! | `flagged.csv` | `p_eh_w,strategy,realization,error` (only when a run failed) |
//!
//! Strategy labels carry the swept parameter when a grid has more than one
//! value, e.g. `bb[m=4]` or `bb_swipt[p_sat_dbm=-20]`.

mod config;

pub use config::{
    load_config, parse_config, Scenario, ScenarioConfig, Strategy, DEFAULT_POLY2, DEFAULT_REALIZATIONS,
    DEFAULT_SEED,
};

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{
    dbm_to_watts, flat_draw, path_loss, read_channel_csv, realization_rng, seeded_realization, write_channel_csv,
    ChannelRealization, Link, RicianParams,
};
use crate::error::{Error, Result};
use crate::harvester::{model_coeffs, ObjectiveCoeffs};
use crate::qp::{build_qp, enumerate_kkt_oracle, QpProblem, SwiptLimit};
use crate::solvers::{
    baseline_alloc, evaluate_allocation, solve_bb, solve_milp_kkt, BaselineKind, SolverOptions,
};
use crate::waveform::{effective_channels, ToneGrid};

/// Relative threshold for a tone to count as allocated.
pub const SUPPORT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p_eh_w: f64,
    pub strategy: String,
    /// Mean harvester output (objective plus model offset) over successful realizations.
    pub mean_objective: f64,
    pub stderr: f64,
    pub realizations: usize,
    pub mean_nodes: f64,
    pub mean_lps: f64,
    /// Realizations where a baseline violated a constraint row.
    pub infeasible: usize,
    pub flagged: usize,
    /// Per-realization values; NaN where the run was flagged.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocRow {
    pub tone: usize,
    pub h_norm: f64,
    pub g_norm: Option<f64>,
    pub strategy: String,
    pub x_over_2p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportRow {
    pub p_eh_w: f64,
    /// Fraction of realizations where the curve-fit and diode optima share a support.
    pub agreement: f64,
    pub realizations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlaggedRun {
    pub p_eh_w: f64,
    pub strategy: String,
    pub realization: usize,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub scenario: Scenario,
    pub rows: Vec<SweepRow>,
    pub alloc: Vec<AllocRow>,
    pub support: Vec<SupportRow>,
    pub flagged: Vec<FlaggedRun>,
    /// Channel of realization 0 for the alloc scenario.
    pub channel: Option<ChannelRealization>,
    pub wall_time: Duration,
}

impl SweepResult {
    pub fn row(&self, p_eh_w: f64, strategy: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.p_eh_w == p_eh_w && r.strategy == strategy)
    }

    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
        w.write_record(["p_eh_w", "strategy", "mean_objective", "stderr", "realizations"])?;
        for r in &self.rows {
            w.write_record([
                num(r.p_eh_w),
                r.strategy.clone(),
                num(r.mean_objective),
                num(r.stderr),
                r.realizations.to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("stats.csv"))?;
        w.write_record(["p_eh_w", "strategy", "mean_nodes", "mean_lps", "infeasible", "flagged"])?;
        for r in &self.rows {
            w.write_record([
                num(r.p_eh_w),
                r.strategy.clone(),
                num(r.mean_nodes),
                num(r.mean_lps),
                r.infeasible.to_string(),
                r.flagged.to_string(),
            ])?;
        }
        w.flush()?;

        if self.scenario == Scenario::AllocSingleRealization {
            let mut w = csv::Writer::from_path(dir.join("alloc.csv"))?;
            w.write_record(["tone", "h_norm", "g_norm", "strategy", "x_over_2p"])?;
            for a in &self.alloc {
                w.write_record([
                    a.tone.to_string(),
                    num(a.h_norm),
                    a.g_norm.map(num).unwrap_or_default(),
                    a.strategy.clone(),
                    num(a.x_over_2p),
                ])?;
            }
            w.flush()?;
        }
        if let Some(ch) = &self.channel {
            write_channel_csv(ch, fs::File::create(dir.join("channel.csv"))?)?;
        }
        if self.scenario == Scenario::CurvefitCompare {
            let mut w = csv::Writer::from_path(dir.join("support.csv"))?;
            w.write_record(["p_eh_w", "support_agreement", "realizations"])?;
            for s in &self.support {
                w.write_record([num(s.p_eh_w), num(s.agreement), s.realizations.to_string()])?;
            }
            w.flush()?;
        }
        let flagged_path = dir.join("flagged.csv");
        if self.flagged.is_empty() {
            if flagged_path.exists() {
                fs::remove_file(flagged_path)?;
            }
        } else {
            let mut w = csv::Writer::from_path(flagged_path)?;
            w.write_record(["p_eh_w", "strategy", "realization", "error"])?;
            for f in &self.flagged {
                w.write_record([num(f.p_eh_w), f.strategy.clone(), f.realization.to_string(), f.error.clone()])?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

/// One cell of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key {
    p_eh: f64,
    m: usize,
    strategy: Strategy,
    d_g: Option<f64>,
    p_sat_dbm: Option<f64>,
}

fn keys(cfg: &ScenarioConfig) -> Vec<Key> {
    let mut out = Vec::new();
    for &p_eh in &cfg.p_eh_w {
        for &m in &cfg.antennas {
            for &strategy in &cfg.strategies {
                if strategy.is_swipt() {
                    for &d_g in &cfg.d_g_wavelengths {
                        for &p_sat in &cfg.p_sat_dbm {
                            out.push(Key { p_eh, m, strategy, d_g: Some(d_g), p_sat_dbm: Some(p_sat) });
                        }
                    }
                } else {
                    out.push(Key { p_eh, m, strategy, d_g: None, p_sat_dbm: None });
                }
            }
        }
    }
    out
}

fn label(cfg: &ScenarioConfig, key: &Key) -> String {
    let mut params = Vec::new();
    if cfg.antennas.len() > 1 {
        params.push(format!("m={}", key.m));
    }
    if let Some(d) = key.d_g.filter(|_| cfg.d_g_wavelengths.len() > 1) {
        params.push(format!("d_g={d}"));
    }
    if let Some(p) = key.p_sat_dbm.filter(|_| cfg.p_sat_dbm.len() > 1) {
        params.push(format!("p_sat_dbm={p}"));
    }
    if params.is_empty() {
        key.strategy.tag().to_string()
    } else {
        format!("{}[{}]", key.strategy, params.join(","))
    }
}

/// Channels for one realization: `H` with the largest antenna count and one
/// `G` per information-receiver distance.
struct Draw {
    h: DMatrix<Complex64>,
    l_h: f64,
    g: Vec<Option<DMatrix<Complex64>>>,
    source: ChannelRealization,
}

struct Context<'a> {
    cfg: &'a ScenarioConfig,
    keys: Vec<Key>,
    coeffs: ObjectiveCoeffs,
    diode: ObjectiveCoeffs,
    opts: SolverOptions,
    needs_g: bool,
    csv_channel: Option<ChannelRealization>,
}

#[derive(Debug, Clone)]
struct Outcome {
    value: f64,
    nodes: usize,
    lps: usize,
    feasible: bool,
    x: Vec<f64>,
    budget: f64,
}

impl Context<'_> {
    fn draw(&self, r: usize) -> Result<Draw> {
        let cfg = self.cfg;
        if let Some(ch) = &self.csv_channel {
            let g = cfg.d_g_wavelengths.iter().map(|_| ch.g.clone()).collect();
            return Ok(Draw { h: ch.h.clone(), l_h: ch.l_h, g, source: ch.clone() });
        }
        if cfg.scenario == Scenario::FlatChannel {
            let mut rng = realization_rng(cfg.seed, r as u64, Link::Harvester);
            let ch = flat_draw(cfg.n_tones, cfg.flat_sigma, &mut rng)?;
            return Ok(Draw { h: ch.h.clone(), l_h: 1.0, g: vec![None; cfg.d_g_wavelengths.len()], source: ch });
        }
        let m_max = cfg.antennas.iter().copied().max().unwrap_or(1);
        let params = RicianParams::from_db(cfg.kappa_db, cfg.seed, cfg.n_tones, m_max);
        let mut g = Vec::with_capacity(cfg.d_g_wavelengths.len());
        let mut first = None;
        for &d_g in &cfg.d_g_wavelengths {
            let ch = seeded_realization(&params, r as u64, cfg.d_h_wavelengths, self.needs_g.then_some(d_g))?;
            g.push(ch.g.clone());
            first.get_or_insert(ch);
        }
        let source = first.expect("d_g grid is non-empty");
        Ok(Draw { h: source.h.clone(), l_h: source.l_h, g, source })
    }

    fn evaluate(&self, draw: &Draw, key: &Key) -> Result<Outcome> {
        let cfg = self.cfg;
        let h_eff = effective_channels(&draw.h.columns(0, key.m).into_owned());
        let budget = key.p_eh / draw.l_h;
        let base = || build_qp(&h_eff, &self.coeffs, budget, None);
        let solved = |p: QpProblem, solver: fn(&QpProblem, &SolverOptions) -> Result<crate::Solution>| {
            let sol = solver(&p, &self.opts)?;
            Ok(Outcome {
                value: sol.objective + self.coeffs.offset,
                nodes: sol.stats.nodes_explored,
                lps: sol.stats.lps_solved,
                feasible: true,
                x: sol.x,
                budget,
            })
        };
        let oracle = |p: &QpProblem, _: &SolverOptions| enumerate_kkt_oracle(p);
        let swipt_problem = || -> Result<QpProblem> {
            let idx = cfg.d_g_wavelengths.iter().position(|d| Some(*d) == key.d_g).expect("key from grid");
            let g = draw.g[idx].as_ref().ok_or_else(|| Error::InvalidArgument("no information-receiver channel".into()))?;
            let g_eff = effective_channels(g);
            let p_sat = dbm_to_watts(key.p_sat_dbm.expect("swipt key"));
            build_qp(&h_eff, &self.coeffs, budget, Some(SwiptLimit { g_eff: &g_eff, p_sat }))
        };
        match key.strategy {
            Strategy::Bb => solved(base()?, solve_bb),
            Strategy::Milp => solved(base()?, solve_milp_kkt),
            Strategy::Oracle => solved(base()?, oracle),
            Strategy::BbSwipt => solved(swipt_problem()?, solve_bb),
            Strategy::MilpSwipt => solved(swipt_problem()?, solve_milp_kkt),
            Strategy::OracleSwipt => solved(swipt_problem()?, oracle),
            Strategy::Equal | Strategy::Mrt | Strategy::Single => {
                let kind = match key.strategy {
                    Strategy::Equal => BaselineKind::Equal,
                    Strategy::Mrt => BaselineKind::Mrt,
                    _ => BaselineKind::Single,
                };
                let s = baseline_alloc(kind, &h_eff, budget)?;
                let e = evaluate_allocation(&s, &base()?)?;
                Ok(Outcome {
                    value: e.objective + self.coeffs.offset,
                    nodes: 0,
                    lps: 0,
                    feasible: e.feasible,
                    x: s.powers(),
                    budget,
                })
            }
            Strategy::BbDiode => {
                let p = base()?;
                let sol = solve_bb(&build_qp(&h_eff, &self.diode, budget, None)?, &self.opts)?;
                Ok(Outcome {
                    value: p.objective(&sol.x) + self.coeffs.offset,
                    nodes: sol.stats.nodes_explored,
                    lps: sol.stats.lps_solved,
                    feasible: true,
                    x: sol.x,
                    budget,
                })
            }
        }
    }

    fn realization(&self, r: usize) -> (Option<Draw>, Vec<Result<Outcome, String>>) {
        match self.draw(r) {
            Ok(draw) => {
                let out = self.keys.iter().map(|k| self.evaluate(&draw, k).map_err(|e| e.to_string())).collect();
                (Some(draw), out)
            }
            Err(e) => (None, vec![Err(e.to_string()); self.keys.len()]),
        }
    }
}

fn support(x: &[f64]) -> Vec<usize> {
    let peak = x.iter().copied().fold(0.0, f64::max);
    (0..x.len()).filter(|&i| x[i] > SUPPORT_TOL * peak).collect()
}

/// Sum by recursive halving; the association order depends only on the length.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(v) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    (mean, (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt())
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SweepResult> {
    let start = Instant::now();
    cfg.validate()?;
    ToneGrid::new(cfg.f0_hz, cfg.delta_f_hz, cfg.n_tones)?;
    path_loss(cfg.d_h_wavelengths)?;

    let csv_channel = match &cfg.channel_csv {
        Some(path) => {
            let ch = read_channel_csv(fs::File::open(path)?)?;
            if ch.n_tones() != cfg.n_tones || ch.n_antennas() < cfg.antennas.iter().copied().max().unwrap_or(1) {
                return Err(Error::Config(format!(
                    "channel_csv: file has {} tones and {} antennas, config needs {} and {:?}",
                    ch.n_tones(),
                    ch.n_antennas(),
                    cfg.n_tones,
                    cfg.antennas
                )));
            }
            Some(ch)
        }
        None => None,
    };
    let coeffs = if cfg.scenario == Scenario::CurvefitCompare {
        model_coeffs(&cfg.curvefit_model)?
    } else {
        model_coeffs(&cfg.model)?
    };
    let ctx = Context {
        cfg,
        keys: keys(cfg),
        coeffs,
        diode: model_coeffs(&cfg.model)?,
        opts: SolverOptions { node_limit: cfg.node_limit, ..Default::default() },
        needs_g: cfg.strategies.iter().any(Strategy::is_swipt) || cfg.scenario == Scenario::AllocSingleRealization,
        csv_channel,
    };

    let runs: Vec<_> =
        (0..cfg.realizations).into_par_iter().map(|r| ctx.realization(r)).collect();

    let mut rows = Vec::with_capacity(ctx.keys.len());
    let mut flagged = Vec::new();
    for (ki, key) in ctx.keys.iter().enumerate() {
        let name = label(cfg, key);
        let mut values = Vec::with_capacity(cfg.realizations);
        let (mut ok, mut nodes, mut lps) = (Vec::new(), Vec::new(), Vec::new());
        let mut infeasible = 0;
        for (r, (_, outcomes)) in runs.iter().enumerate() {
            match &outcomes[ki] {
                Ok(o) => {
                    values.push(o.value);
                    ok.push(o.value);
                    nodes.push(o.nodes as f64);
                    lps.push(o.lps as f64);
                    infeasible += usize::from(!o.feasible);
                }
                Err(e) => {
                    values.push(f64::NAN);
                    flagged.push(FlaggedRun { p_eh_w: key.p_eh, strategy: name.clone(), realization: r, error: e.clone() });
                }
            }
        }
        let (mean_objective, stderr) = mean_stderr(&ok);
        rows.push(SweepRow {
            p_eh_w: key.p_eh,
            strategy: name,
            mean_objective,
            stderr,
            realizations: ok.len(),
            mean_nodes: mean_stderr(&nodes).0,
            mean_lps: mean_stderr(&lps).0,
            infeasible,
            flagged: cfg.realizations - ok.len(),
            values,
        });
    }

    let mut alloc = Vec::new();
    let mut channel = None;
    if cfg.scenario == Scenario::AllocSingleRealization {
        if let (Some(draw), outcomes) = &runs[0] {
            let m = cfg.antennas[0];
            let h = effective_channels(&draw.h.columns(0, m).into_owned());
            let h_max = h.iter().copied().fold(0.0, f64::max);
            let g = draw.g[0].as_ref().filter(|_| m == 1).map(effective_channels);
            for (ki, key) in ctx.keys.iter().enumerate() {
                if key.p_eh != cfg.p_eh_w[0] || key.m != m {
                    continue;
                }
                if let Ok(o) = &outcomes[ki] {
                    for (i, x) in o.x.iter().enumerate() {
                        alloc.push(AllocRow {
                            tone: i + 1,
                            h_norm: h[i] / h_max,
                            g_norm: g.as_ref().map(|g| g[i] / h_max),
                            strategy: label(cfg, key),
                            x_over_2p: x / (2.0 * o.budget),
                        });
                    }
                }
            }
            channel = Some(draw.source.clone());
        }
    }

    let mut support_rows = Vec::new();
    if cfg.scenario == Scenario::CurvefitCompare {
        for &p_eh in &cfg.p_eh_w {
            let find = |s: Strategy| {
                ctx.keys.iter().position(|k| k.p_eh == p_eh && k.m == cfg.antennas[0] && k.strategy == s)
            };
            let (Some(a), Some(b)) = (find(Strategy::Bb), find(Strategy::BbDiode)) else { continue };
            let mut agree = 0;
            let mut total = 0;
            for (_, outcomes) in &runs {
                if let (Ok(x), Ok(y)) = (&outcomes[a], &outcomes[b]) {
                    total += 1;
                    agree += usize::from(support(&x.x) == support(&y.x));
                }
            }
            let agreement = if total > 0 { agree as f64 / total as f64 } else { f64::NAN };
            support_rows.push(SupportRow { p_eh_w: p_eh, agreement, realizations: total });
        }
    }

    Ok(SweepResult { scenario: cfg.scenario, rows, alloc, support: support_rows, flagged, channel, wall_time: start.elapsed() })
}
