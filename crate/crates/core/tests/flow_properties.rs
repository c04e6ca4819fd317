mod common;

use std::f64::consts::PI;

use meanflow_core::flow::{diagnostics, rhs, run, step, FlowConfig, FlowState, RunOutcome, StepScheme};
use meanflow_core::stationary::{newton_solve, NewtonConfig};
use meanflow_core::{DiagnosticsRecord, Field32, Field64, Grid32, Grid64, Problem64};
use proptest::prelude::*;

use common::{band_limited, cosine_problem};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn subcritical_runs_conserve_volume_and_dissipate(seed in any::<u64>()) {
        let g = Grid64::standard(64).unwrap();
        let p = cosine_problem(&g, 4.0 * PI, 0.5);
        let v0 = band_limited(&g, seed, 3, 0.3);
        let cfg = FlowConfig { stop_residual: 1e-6, ..FlowConfig::default() };
        let mut records: Vec<DiagnosticsRecord> = Vec::new();
        let out = run(&p, v0, &cfg, &mut records).unwrap();
        let converged = matches!(out, RunOutcome::Converged { .. });
        prop_assert!(converged, "{}", out.label());
        for w in records.windows(2) {
            prop_assert!(w[1].volume_rel_drift.abs() <= 1e-7);
            prop_assert!(w[1].j <= w[0].j + 1e-9 * (1.0 + w[0].j.abs()));
            prop_assert!(w[1].maxbound_margin >= -1e-9);
        }
    }
}

#[test]
fn newton_solution_is_a_fixed_point_of_both_schemes() {
    let g = Grid64::standard(32).unwrap();
    let p = cosine_problem(&g, 4.0 * PI, 0.5);
    let sol = newton_solve(&p, &Field64::zeros(&g), &NewtonConfig::default()).unwrap();
    assert!(rhs(&p, &sol.v).unwrap().l2_norm() <= 10.0 * 1e-11 * 4.0 * PI * PI);
    for scheme in [StepScheme::LinearlyImplicit, StepScheme::ExplicitRk4] {
        let cfg = FlowConfig::fixed_step(1e-3, 1.0, scheme);
        let s0 = FlowState::initial(&p, sol.v.clone(), &cfg).unwrap();
        let s1 = step(&p, &s0, &cfg).unwrap();
        assert!(s1.v.distance_sup(&sol.v).unwrap() < 1e-12, "{scheme:?}");
    }
}

#[test]
fn flow_limit_matches_newton() {
    let g = Grid64::standard(32).unwrap();
    let p = cosine_problem(&g, 4.0 * PI, 0.5);
    let out = run(&p, Field64::zeros(&g), &FlowConfig::default(), &mut ()).unwrap();
    let RunOutcome::Converged { state, residual } = out else { panic!("{}", out.label()) };
    assert!(residual < 1e-8);
    let newton = newton_solve(&p, &Field64::zeros(&g), &NewtonConfig::default()).unwrap();
    assert!(state.v.zero_mean().distance_sup(&newton.v).unwrap() < 1e-6);
}

#[test]
fn schemes_agree_on_smooth_data() {
    let g = Grid64::standard(16).unwrap();
    let p = Problem64::constant(&g, 4.0 * PI).unwrap();
    let v0 = Field64::from_fn(&g, |x, y| 0.05 * x.cos() + 0.03 * (x + y).sin()).unwrap();
    let mut finals = Vec::new();
    for (scheme, dt) in [(StepScheme::ExplicitRk4, 1e-2), (StepScheme::LinearlyImplicit, 1e-5)] {
        let cfg = FlowConfig {
            stop_residual: 1e-300,
            ..FlowConfig::fixed_step(dt, 0.2, scheme)
        };
        finals.push(run(&p, v0.clone(), &cfg, &mut ()).unwrap().into_state());
    }
    let diff = finals[0].v.distance_sup(&finals[1].v).unwrap();
    assert!(diff < 1e-5, "{diff}");
}

#[test]
fn diagnostics_reflect_the_state() {
    let g = Grid64::standard(16).unwrap();
    let p = Problem64::constant(&g, 4.0 * PI).unwrap();
    let v = Field64::from_fn(&g, |x, _| 0.2 * x.sin()).unwrap();
    let s = FlowState::initial(&p, v.clone(), &FlowConfig::default()).unwrap();
    let rec = diagnostics(&p, &s, None).unwrap();
    assert_eq!(rec.t, 0.0);
    assert_eq!(rec.v_max, v.max());
    assert!(rec.dissipation > 0.0 && rec.residual > 0.0);
    assert_eq!(rec.volume_rel_drift, 0.0);
}

#[test]
fn single_precision_flow_runs() {
    let g = Grid32::standard(16).unwrap();
    let p = meanflow_core::ProblemData::<f32>::constant(&g, 4.0 * std::f32::consts::PI).unwrap();
    let v0 = Field32::from_fn(&g, |x, y| 0.3 * x.cos() * y.cos()).unwrap();
    let cfg = FlowConfig {
        t_end: 0.5,
        imex_tolerance: 1e-5,
        volume_drift_max: 1e-4,
        stop_residual: 1e-4,
        ..FlowConfig::default()
    };
    let out = run(&p, v0.clone(), &cfg, &mut ()).unwrap();
    let s = out.state();
    assert!(s.energy <= FlowState::initial(&p, v0, &cfg).unwrap().energy);
}
