mod common;

use proptest::prelude::*;

use common::{diode, rel_diff};
use wptopt::channel::path_loss;
use wptopt::qp::{build_qp, enumerate_kkt_oracle, SwiptLimit};
use wptopt::solvers::{
    baseline_alloc, evaluate_allocation, solve_bb, solve_milp_kkt, BaselineKind, BoundStrategy, SolverOptions,
};
use wptopt::waveform::{analytic_moments, numeric_moments, optimal_phases, ToneGrid};

#[derive(Debug, Clone)]
struct Case {
    h: Vec<f64>,
    g: Vec<f64>,
    budget: f64,
    p_sat: f64,
}

/// Gains around the 8-wavelength path loss, `P_EH` between 5 and 200 uW.
fn case() -> impl Strategy<Value = Case> {
    (1usize..=8)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.1f64..2.0, n),
                prop::collection::vec(0.1f64..2.0, n),
                5e-6f64..2e-4,
                -30.0f64..0.0,
            )
        })
        .prop_map(|(h, g, p_eh, p_sat_dbm)| {
            let l = path_loss(8.0).unwrap();
            let lg = path_loss(7.0).unwrap();
            Case {
                h: h.iter().map(|v| v * l.sqrt()).collect(),
                g: g.iter().map(|v| v * lg.sqrt()).collect(),
                budget: p_eh / l,
                p_sat: 1e-3 * 10f64.powf(p_sat_dbm / 10.0),
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solvers_agree_with_oracle(c in case(), swipt in any::<bool>()) {
        let lim = swipt.then(|| SwiptLimit { g_eff: &c.g, p_sat: c.p_sat });
        let p = build_qp(&c.h, &diode(), c.budget, lim).unwrap();
        let opts = SolverOptions::default();
        let oracle = enumerate_kkt_oracle(&p).unwrap();
        let bb = solve_bb(&p, &opts).unwrap();
        let milp = solve_milp_kkt(&p, &opts).unwrap();
        prop_assert!(rel_diff(bb.objective, milp.objective) <= 1e-8);
        prop_assert!(rel_diff(bb.objective, oracle.objective) <= 1e-8);
        prop_assert!(bb.kkt_residual <= 1e-8, "bb residual {}", bb.kkt_residual);
        prop_assert!(milp.kkt_residual <= 1e-8, "milp residual {}", milp.kkt_residual);
        prop_assert!(bb.stats.max_bound_increase <= 1e-9);
        prop_assert!(milp.stats.max_bound_increase <= 1e-9);
    }

    #[test]
    fn tightened_bounds_give_the_same_optimum(c in case()) {
        let p = build_qp(&c.h, &diode(), c.budget, Some(SwiptLimit { g_eff: &c.g, p_sat: c.p_sat })).unwrap();
        let a = solve_bb(&p, &SolverOptions::default()).unwrap();
        let opts = SolverOptions { bounds: BoundStrategy::LpTightened, ..SolverOptions::default() };
        let b = solve_bb(&p, &opts).unwrap();
        prop_assert!(rel_diff(a.objective, b.objective) <= 1e-8);
    }

    #[test]
    fn optimum_dominates_feasible_baselines(c in case(), swipt in any::<bool>()) {
        let lim = swipt.then(|| SwiptLimit { g_eff: &c.g, p_sat: c.p_sat });
        let p = build_qp(&c.h, &diode(), c.budget, lim).unwrap();
        let opt = solve_bb(&p, &SolverOptions::default()).unwrap().objective;
        for kind in BaselineKind::ALL {
            let s = baseline_alloc(kind, &c.h, c.budget).unwrap();
            let eval = evaluate_allocation(&s, &p).unwrap();
            if eval.feasible {
                prop_assert!(eval.objective <= opt * (1.0 + 1e-12), "{kind} beats optimum");
            }
        }
    }

    #[test]
    fn sorted_gains_give_sorted_allocation(c in case()) {
        let mut h = c.h.clone();
        h.sort_by(|a, b| b.total_cmp(a));
        let p = build_qp(&h, &diode(), c.budget, None).unwrap();
        let sol = solve_bb(&p, &SolverOptions::default()).unwrap();
        let peak = sol.x.iter().copied().fold(0.0, f64::max);
        for w in sol.x.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * peak, "{:?}", sol.x);
        }
        let spent: f64 = sol.x.iter().sum();
        prop_assert!(rel_diff(spent, 2.0 * c.budget) <= 1e-12);
    }

    #[test]
    fn slack_saturation_row_changes_nothing(c in case()) {
        let gmax2 = c.g.iter().map(|g| g * g).fold(0.0, f64::max);
        // 2 P_sat >= max g^2 * 2P makes the row redundant
        let p_sat = gmax2 * c.budget * (1.0 + 1e-6);
        let free = build_qp(&c.h, &diode(), c.budget, None).unwrap();
        let capped = build_qp(&c.h, &diode(), c.budget, Some(SwiptLimit { g_eff: &c.g, p_sat })).unwrap();
        let opts = SolverOptions::default();
        let a = solve_bb(&free, &opts).unwrap();
        let b = solve_bb(&capped, &opts).unwrap();
        prop_assert!(rel_diff(a.objective, b.objective) <= 1e-12);
    }

    #[test]
    fn optimum_is_monotone_in_budget(c in case(), grow in 1.0f64..3.0) {
        let opts = SolverOptions::default();
        let a = solve_bb(&build_qp(&c.h, &diode(), c.budget, None).unwrap(), &opts).unwrap();
        let b = solve_bb(&build_qp(&c.h, &diode(), c.budget * grow, None).unwrap(), &opts).unwrap();
        prop_assert!(b.objective >= a.objective * (1.0 - 1e-12));
    }

    #[test]
    fn aligned_phases_maximize_fourth_moment(
        amps in prop::collection::vec((0.05f64..1.0, 0.05f64..1.0, -3.2f64..3.2), 1..=6)
    ) {
        let n = amps.len();
        let s: Vec<f64> = amps.iter().map(|a| a.0).collect();
        let h: Vec<f64> = amps.iter().map(|a| a.1).collect();
        let phi: Vec<f64> = amps.iter().map(|a| a.2).collect();
        let grid = ToneGrid::new(4.0, 1.0, n).unwrap();
        let aligned = optimal_phases(&vec![0.0; n]);
        let (m2a, m4a) = numeric_moments(&s, &h, aligned.as_slice(), &grid, 256).unwrap();
        let (m2, m4) = numeric_moments(&s, &h, &phi, &grid, 256).unwrap();
        prop_assert!(m4 <= m4a + 1e-9);
        prop_assert!((m2 - m2a).abs() <= 1e-9);
    }

    #[test]
    fn moments_scale_with_amplitude(
        sh in prop::collection::vec((0.0f64..2.0, 0.0f64..2.0), 1..=8),
        alpha in 0.1f64..10.0,
    ) {
        let s: Vec<f64> = sh.iter().map(|v| v.0).collect();
        let h: Vec<f64> = sh.iter().map(|v| v.1).collect();
        let scaled: Vec<f64> = s.iter().map(|v| alpha * v).collect();
        let (m2, m4) = analytic_moments(&s, &h).unwrap();
        let (n2, n4) = analytic_moments(&scaled, &h).unwrap();
        prop_assert!((n2 - alpha.powi(2) * m2).abs() <= 1e-12 * n2.max(1e-300));
        prop_assert!((n4 - alpha.powi(4) * m4).abs() <= 1e-12 * n4.max(1e-300));
    }
}
