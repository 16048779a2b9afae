//! Python bindings for `wptopt`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wptopt::bench::{run_scenario, Scenario, ScenarioConfig};
use wptopt::channel::{path_loss, seeded_realization, RicianParams};
use wptopt::harvester::{fit_poly2, model_coeffs, DiodeParams, HarvesterModel, ObjectiveCoeffs};
use wptopt::qp::{build_qp, enumerate_kkt_oracle, QpProblem, SwiptLimit};
use wptopt::solvers::{self, BaselineKind, BoundStrategy, SolverOptions};
use wptopt::waveform::{analytic_moments, effective_channels};
use wptopt::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_)
        | Error::InvalidArgument(_)
        | Error::Dimension(_)
        | Error::ZeroGain(_)
        | Error::RankDeficient(_)
        | Error::NotReducible(_)
        | Error::Pole(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Objective `c4 E{y^4} + c2 E{y^2}` coefficients of a harvester model.
#[pyclass(name = "Coeffs", frozen)]
#[derive(Clone)]
struct PyCoeffs {
    inner: ObjectiveCoeffs,
}

#[pymethods]
impl PyCoeffs {
    #[new]
    #[pyo3(signature = (c2, c4, offset = 0.0))]
    fn new(c2: f64, c4: f64, offset: f64) -> PyResult<Self> {
        Ok(Self { inner: ObjectiveCoeffs::new(c2, c4, offset).map_err(to_py)? })
    }

    /// Taylor coefficients of a diode rectifier; defaults are the SMS-7630.
    #[staticmethod]
    #[pyo3(signature = (i_s = 5e-6, v_t = 25.86e-3, gamma = 1.05, r_ant = 50.0))]
    fn diode(i_s: f64, v_t: f64, gamma: f64, r_ant: f64) -> PyResult<Self> {
        let m = HarvesterModel::diode(&DiodeParams { i_s, v_t, gamma, r_ant }).map_err(to_py)?;
        Ok(Self { inner: model_coeffs(&m).map_err(to_py)? })
    }

    /// Region-1 polynomial `beta1 P^2 + beta2 P + beta3`.
    #[staticmethod]
    fn poly2(beta1: f64, beta2: f64, beta3: f64) -> PyResult<Self> {
        let m = HarvesterModel::Poly2 { beta1, beta2, beta3 };
        Ok(Self { inner: model_coeffs(&m).map_err(to_py)? })
    }

    #[getter]
    fn c2(&self) -> f64 {
        self.inner.c2
    }

    #[getter]
    fn c4(&self) -> f64 {
        self.inner.c4
    }

    #[getter]
    fn offset(&self) -> f64 {
        self.inner.offset
    }

    fn __repr__(&self) -> String {
        format!("Coeffs(c2={:e}, c4={:e}, offset={:e})", self.inner.c2, self.inner.c4, self.inner.offset)
    }
}

/// Power allocation problem for one channel realization.
#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    inner: QpProblem,
}

#[pymethods]
impl PyProblem {
    /// `budget` is the transmit power in W. Passing `g_eff` and `p_sat` adds
    /// the information-receiver saturation row.
    #[new]
    #[pyo3(signature = (h_eff, coeffs, budget, g_eff = None, p_sat = None))]
    fn new(
        h_eff: Vec<f64>,
        coeffs: &PyCoeffs,
        budget: f64,
        g_eff: Option<Vec<f64>>,
        p_sat: Option<f64>,
    ) -> PyResult<Self> {
        let lim = match (&g_eff, p_sat) {
            (Some(g), Some(p_sat)) => Some(SwiptLimit { g_eff: g, p_sat }),
            (None, None) => None,
            _ => return Err(PyValueError::new_err("g_eff and p_sat must be given together")),
        };
        Ok(Self { inner: build_qp(&h_eff, &coeffs.inner, budget, lim).map_err(to_py)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn q(&self) -> Vec<Vec<f64>> {
        let q = self.inner.q();
        (0..q.nrows()).map(|i| q.row(i).iter().copied().collect()).collect()
    }

    #[getter]
    fn f(&self) -> Vec<f64> {
        self.inner.f().iter().copied().collect()
    }

    #[getter]
    fn a(&self) -> Vec<Vec<f64>> {
        let a = self.inner.a();
        (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect()
    }

    #[getter]
    fn b(&self) -> Vec<f64> {
        self.inner.b().iter().copied().collect()
    }

    /// `0.5 x'Qx + f'x` for per-tone powers `x`.
    fn objective(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.n() {
            return Err(PyValueError::new_err(format!("expected {} powers, got {}", self.inner.n(), x.len())));
        }
        Ok(self.inner.objective(&x))
    }

    /// Objective of a baseline allocation (`equal`, `mrt` or `single`), and
    /// whether it satisfies every constraint row.
    fn baseline(&self, kind: &str) -> PyResult<(f64, bool)> {
        let kind: BaselineKind = kind.parse().map_err(to_py)?;
        let prov = self.inner.provenance().expect("built from gains");
        let s = solvers::baseline_alloc(kind, &prov.h_eff, prov.budget).map_err(to_py)?;
        let eval = solvers::evaluate_allocation(&s, &self.inner).map_err(to_py)?;
        Ok((eval.objective, eval.feasible))
    }

    fn __repr__(&self) -> String {
        format!("Problem(n={}, rows={})", self.inner.n(), self.inner.k())
    }
}

#[pyclass(name = "Solution", frozen, get_all)]
struct PySolution {
    x: Vec<f64>,
    s: Vec<f64>,
    mu: Vec<f64>,
    lambda_: Vec<f64>,
    objective: f64,
    kkt_residual: f64,
    method: &'static str,
    nodes: usize,
    lps: usize,
    seconds: f64,
}

#[pymethods]
impl PySolution {
    /// Tones with `x_i > tol * max(x)`.
    #[pyo3(signature = (tol = 1e-8))]
    fn support(&self, tol: f64) -> Vec<usize> {
        let peak = self.x.iter().copied().fold(0.0, f64::max);
        (0..self.x.len()).filter(|&i| self.x[i] > tol * peak).collect()
    }

    fn __repr__(&self) -> String {
        format!("Solution(method={}, objective={:e}, nodes={})", self.method, self.objective, self.nodes)
    }
}

impl From<wptopt::Solution> for PySolution {
    fn from(s: wptopt::Solution) -> Self {
        Self {
            method: s.method.tag(),
            nodes: s.stats.nodes_explored,
            lps: s.stats.lps_solved,
            seconds: s.stats.wall_time.as_secs_f64(),
            x: s.x,
            s: s.s,
            mu: s.mu,
            lambda_: s.lambda,
            objective: s.objective,
            kkt_residual: s.kkt_residual,
        }
    }
}

fn options(node_limit: usize, tighten: bool) -> SolverOptions {
    SolverOptions {
        node_limit,
        bounds: if tighten { BoundStrategy::LpTightened } else { BoundStrategy::Analytic },
        ..SolverOptions::default()
    }
}

/// Global optimum by complementarity branch-and-bound.
#[pyfunction]
#[pyo3(signature = (problem, node_limit = 100_000, tighten = false))]
fn solve_bb(py: Python<'_>, problem: &PyProblem, node_limit: usize, tighten: bool) -> PyResult<PySolution> {
    let opts = options(node_limit, tighten);
    py.allow_threads(|| solvers::solve_bb(&problem.inner, &opts)).map(Into::into).map_err(to_py)
}

/// Global optimum through the KKT mixed-integer LP.
#[pyfunction]
#[pyo3(signature = (problem, node_limit = 100_000, tighten = false))]
fn solve_milp(py: Python<'_>, problem: &PyProblem, node_limit: usize, tighten: bool) -> PyResult<PySolution> {
    let opts = options(node_limit, tighten);
    py.allow_threads(|| solvers::solve_milp_kkt(&problem.inner, &opts)).map(Into::into).map_err(to_py)
}

/// Exhaustive KKT enumeration; small problems only.
#[pyfunction]
fn solve_oracle(py: Python<'_>, problem: &PyProblem) -> PyResult<PySolution> {
    py.allow_threads(|| enumerate_kkt_oracle(&problem.inner)).map(Into::into).map_err(to_py)
}

#[pyfunction(name = "path_loss")]
fn py_path_loss(d_over_lambda: f64) -> PyResult<f64> {
    path_loss(d_over_lambda).map_err(to_py)
}

/// `(E{y^2}, E{y^4})` for amplitudes `s` and effective gains `h`.
#[pyfunction]
fn moments(s: Vec<f64>, h: Vec<f64>) -> PyResult<(f64, f64)> {
    analytic_moments(&s, &h).map_err(to_py)
}

/// Effective gains `(h, g)` of a seeded Rician realization. `g` is `None`
/// unless `d_g` is given.
#[pyfunction]
#[pyo3(signature = (seed, realization, n_tones = 8, antennas = 1, kappa_db = 3.0, d_h = 8.0, d_g = None))]
fn rician_gains(
    seed: u64,
    realization: u64,
    n_tones: usize,
    antennas: usize,
    kappa_db: f64,
    d_h: f64,
    d_g: Option<f64>,
) -> PyResult<(Vec<f64>, Option<Vec<f64>>)> {
    let params = RicianParams::from_db(kappa_db, seed, n_tones, antennas);
    let ch = seeded_realization(&params, realization, d_h, d_g).map_err(to_py)?;
    Ok((effective_channels(&ch.h), ch.g.as_ref().map(effective_channels)))
}

type Triple = (f64, f64, f64);

/// Least-squares `(beta1, beta2, beta3)` and their standard errors.
#[pyfunction(name = "fit_poly2")]
fn py_fit_poly2(samples: Vec<(f64, f64)>) -> PyResult<(Triple, Triple)> {
    let f = fit_poly2(&samples).map_err(to_py)?;
    let se = f.std_errors;
    Ok(((f.beta1, f.beta2, f.beta3), (se[0], se[1], se[2])))
}

/// Runs a named scenario and returns its sweep rows as dicts.
#[pyfunction]
#[pyo3(name = "bench", signature = (scenario, realizations = None, seed = None))]
fn run_bench<'py>(
    py: Python<'py>,
    scenario: &str,
    realizations: Option<usize>,
    seed: Option<u64>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let sc: Scenario = scenario.parse().map_err(to_py)?;
    let mut cfg = ScenarioConfig::defaults(sc);
    if let Some(r) = realizations {
        cfg.realizations = r;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(to_py)?;
    let res = py.allow_threads(|| run_scenario(&cfg)).map_err(to_py)?;
    res.rows
        .iter()
        .map(|row| {
            let d = PyDict::new(py);
            d.set_item("p_eh_w", row.p_eh_w)?;
            d.set_item("strategy", &row.strategy)?;
            d.set_item("mean_objective", row.mean_objective)?;
            d.set_item("stderr", row.stderr)?;
            d.set_item("realizations", row.realizations)?;
            d.set_item("flagged", row.flagged)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn wptopt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCoeffs>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve_bb, m)?)?;
    m.add_function(wrap_pyfunction!(solve_milp, m)?)?;
    m.add_function(wrap_pyfunction!(solve_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(py_path_loss, m)?)?;
    m.add_function(wrap_pyfunction!(moments, m)?)?;
    m.add_function(wrap_pyfunction!(rician_gains, m)?)?;
    m.add_function(wrap_pyfunction!(py_fit_poly2, m)?)?;
    m.add_function(wrap_pyfunction!(run_bench, m)?)?;
    Ok(())
}
