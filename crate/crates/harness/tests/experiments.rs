use meanflow::config::ExperimentConfig;
use meanflow::experiments::{continuity_probe, run_experiment, EXIT_CONTRARY, EXIT_EXPECTED};

fn config(dir: &std::path::Path, body: &str) -> ExperimentConfig {
    let text = format!("out_dir = {:?}\n{body}", dir.display().to_string());
    ExperimentConfig::from_toml(&text).unwrap()
}

#[test]
fn supercritical_bounded_from_small_data_converges() {
    // 12π < 4π², so the constant solution is linearly stable on the standard torus, though
    // only at rate 1 − 12π/4π² ≈ 0.045
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        r#"
experiment = "supercritical_bounded"
rho = "12pi"
grid_n = 32
seed = 11
[init_spec]
kind = "random_bandlimited"
k_max = 2
amplitude = 0.05
[flow]
t_end = 200.0
stop_residual = 1e-4
"#,
    );
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.verdict.outcome, "converged", "{:?}", report.verdict);
    assert_eq!(report.verdict.details["bounded_energy_violated"], false);
    assert_eq!(report.exit_code(), EXIT_EXPECTED);
    assert!(report.bubble_report.is_none());
}

#[test]
fn supercritical_bounded_out_of_time_is_contrary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        r#"
experiment = "supercritical_bounded"
rho = "12pi"
grid_n = 32
[init_spec]
kind = "random_bandlimited"
k_max = 2
amplitude = 0.05
[flow]
t_end = 0.05
"#,
    );
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.verdict.outcome, "time_exhausted");
    assert_eq!(report.exit_code(), EXIT_CONTRARY);
}

#[test]
fn records_are_time_ordered_with_monotone_energy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        r#"
experiment = "subcritical_converge"
rho = 6.0
grid_n = 32
seed = 2
[init_spec]
kind = "random_bandlimited"
k_max = 3
amplitude = 0.5
[flow]
t_end = 1.0
"#,
    );
    let report = run_experiment(&cfg).unwrap();
    for w in report.records.windows(2) {
        assert!(w[1].t > w[0].t);
        assert!(w[1].j <= w[0].j + 1e-12 * (1.0 + w[0].j.abs()));
    }
}

#[test]
fn continuity_ratios_agree_across_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        r#"
experiment = "continuity_probe"
rho = "4pi"
grid_n = 32
seed = 5
[continuity]
t_end = 0.5
dt = 5e-3
deltas = [1e-2, 1e-3, 1e-4]
"#,
    );
    let probe = continuity_probe(&cfg).unwrap();
    assert_eq!(probe.ratios.len(), 3);
    assert!(probe.stability_quotient < 1.1, "{probe:?}");
    assert!(probe.kappa.is_finite());
}
