//! Experiment drivers: one function per experiment kind, each ending in a [`Verdict`].

use std::path::Path;

use anyhow::Context;
use meanflow_core::concentration::extract_bubbles;
use meanflow_core::flow::{rhs, run, ObserveWith, RunOutcome};
use meanflow_core::functionals::energy_j;
use meanflow_core::stationary::{newton_solve, NewtonFailureKind};
use meanflow_core::{BubbleReport, DiagnosticsRecord, Field64, FlowConfig, Problem64, State64};
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::generators::{build_problem, diagonal_centers, initial_field, random_bandlimited, synthetic_bubbles, Setup};
use crate::output::{write_snapshot_file, BubbleReportJson, RecordWriter, SnapshotWriter, Verdict};
use crate::rng::{stream, Stream};

pub const EXIT_EXPECTED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CONTRARY: i32 = 2;

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub verdict: Verdict,
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: Option<State64>,
    pub bubble_report: Option<BubbleReport>,
}

impl ExperimentReport {
    pub fn exit_code(&self) -> i32 {
        if self.verdict.expected_regime {
            EXIT_EXPECTED
        } else {
            EXIT_CONTRARY
        }
    }
}

/// Runs the configured experiment, writing `records.csv`, `verdict.json` and snapshots
/// under `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentReport> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let report = match cfg.experiment {
        ExperimentKind::QuantizationAudit => quantization_audit(cfg)?,
        ExperimentKind::ContinuityProbe => {
            let probe = continuity_probe(cfg)?;
            probe_report(cfg, &probe)
        }
        _ => flow_experiment(cfg)?,
    };
    report.verdict.write(&cfg.out_dir.join("verdict.json"))?;
    Ok(report)
}

struct FlowRun {
    outcome: RunOutcome<f64>,
    records: Vec<DiagnosticsRecord>,
}

fn integrate(cfg: &ExperimentConfig, p: &Problem64, v0: Field64, flow: &FlowConfig) -> anyhow::Result<FlowRun> {
    let out = &cfg.out_dir;
    let mut csv = RecordWriter::create(&out.join("records.csv"))?;
    let mut snaps = SnapshotWriter::new(out.join("snapshots"), cfg.snapshot_interval)?;
    let mut records = Vec::new();
    let mut io_error: Option<anyhow::Error> = None;
    let rho = p.rho();
    let result = {
        let mut observer = ObserveWith(|rec: &DiagnosticsRecord, state: &State64| {
            records.push(*rec);
            if io_error.is_none() {
                if let Err(e) = csv.write(rec).and_then(|_| snaps.offer(&state.v, state.t, rho)) {
                    io_error = Some(e);
                }
            }
            Ok(())
        });
        run(p, v0, flow, &mut observer)
    };
    if let Some(e) = io_error {
        return Err(e);
    }
    csv.finish()?;
    let outcome = result?;
    let state = outcome.state();
    write_snapshot_file(&out.join("final.bin"), &state.v, state.t, rho)?;
    if matches!(outcome, RunOutcome::BlowUpSuspected { .. }) {
        write_snapshot_file(&out.join("blowup.bin"), &state.v, state.t, rho)?;
    }
    Ok(FlowRun { outcome, records })
}

/// Bubble report of a flow state, with `h = −∂t v` evaluated there.
pub fn analyze_state(cfg: &ExperimentConfig, p: &Problem64, v: &Field64) -> anyhow::Result<BubbleReport> {
    let h = rhs(p, v)?.scale(-1.0)?;
    Ok(extract_bubbles(v, p, Some(&h), &cfg.extract.to_core())?)
}

fn min_margin(records: &[DiagnosticsRecord]) -> f64 {
    records.iter().skip(1).map(|r| r.maxbound_margin).fold(f64::INFINITY, f64::min)
}

fn flow_experiment(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentReport> {
    let setup = build_problem(cfg)?;
    let p = &setup.problem;
    let (v0, calibration) = initial_field(cfg, &setup)?;
    let flow = cfg.flow.to_core();
    let FlowRun { outcome, records } = integrate(cfg, p, v0, &flow)?;
    let state = outcome.state().clone();
    let mut details = Map::new();
    details.insert("steps".into(), json!(state.steps_taken));
    details.insert("rejected_steps".into(), json!(state.rejected_steps));
    let margin = min_margin(&records);
    if margin.is_finite() {
        details.insert("min_maxbound_margin".into(), json!(margin));
    }
    if let Some(cal) = &calibration {
        details.insert("calibrated_lambda".into(), json!(cal.lambda));
        details.insert("initial_energy".into(), json!(cal.energy));
    }
    if let RunOutcome::BlowUpSuspected { cause, detail, .. } = &outcome {
        details.insert("blow_up_cause".into(), json!(format!("{cause:?}")));
        details.insert("blow_up_detail".into(), json!(detail));
    }
    let j_min = records.iter().map(|r| r.j).fold(f64::INFINITY, f64::min);
    details.insert("j_min".into(), json!(j_min));

    let converged = matches!(outcome, RunOutcome::Converged { .. });
    let collapsed = matches!(outcome, RunOutcome::Diverged { .. } | RunOutcome::BlowUpSuspected { .. });
    let mut bubble_report = None;
    let expected = match cfg.experiment {
        ExperimentKind::FixedPoint => {
            let j0 = records.first().map_or(f64::NAN, |r| r.j);
            let drift = records.iter().map(|r| (r.j - j0).abs()).fold(0.0, f64::max);
            details.insert("energy_variation".into(), json!(drift));
            converged && drift <= 1e-12 * (1.0 + j0.abs())
        }
        ExperimentKind::SubcriticalConverge => {
            let matched = match newton_solve(p, &Field64::zeros(&setup.grid), &cfg.newton.to_core()?) {
                Ok(sol) => {
                    let linf = state.v.zero_mean().distance_sup(&sol.v.zero_mean())?;
                    details.insert("newton_linf".into(), json!(linf));
                    details.insert("newton_iterations".into(), json!(sol.iterations));
                    linf <= 1e-6
                }
                Err(e) => {
                    details.insert("newton_failure".into(), json!(e.to_string()));
                    false
                }
            };
            converged && matched
        }
        ExperimentKind::SupercriticalBounded => {
            details.insert("bounded_energy_violated".into(), json!(collapsed));
            if collapsed {
                bubble_report = Some(analyze_state(cfg, p, &state.v)?);
            }
            converged || collapsed
        }
        ExperimentKind::SupercriticalDiverge => {
            let report = analyze_state(cfg, p, &state.v)?;
            let found = !report.bubbles.is_empty();
            bubble_report = Some(report);
            collapsed && found
        }
        ExperimentKind::QuantizationAudit | ExperimentKind::ContinuityProbe => unreachable!("not a flow experiment"),
    };
    let residual_or_j = match &outcome {
        RunOutcome::Converged { residual, .. } => *residual,
        _ => state.energy,
    };
    let verdict = Verdict {
        outcome: outcome.label().into(),
        residual_or_j,
        bubble_report: bubble_report.as_ref().map(BubbleReportJson::from),
        experiment: cfg.experiment.name().into(),
        expected_regime: expected,
        t_final: state.t,
        details,
    };
    Ok(ExperimentReport {
        verdict,
        records,
        final_state: Some(state),
        bubble_report,
    })
}

fn quantization_audit(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentReport> {
    let setup = build_problem(cfg)?;
    let p = &setup.problem;
    let syn = &cfg.synthetic;
    let centers = if syn.centers.is_empty() {
        let k = (cfg.rho / (8.0 * std::f64::consts::PI)).floor().max(1.0) as usize;
        diagonal_centers(&setup.grid, k)
    } else {
        syn.centers.iter().map(|c| setup.grid.point(c[0], c[1])).collect()
    };
    let v = synthetic_bubbles(p, &centers, syn.lambda, syn.floor_fraction)?;
    write_snapshot_file(&cfg.out_dir.join("synthetic.bin"), &v, 0.0, cfg.rho)?;
    let report = extract_bubbles(&v, p, None, &cfg.extract.to_core())?;
    let quantized = report.bubbles.len() == centers.len()
        && report.bubbles.iter().all(|b| (b.quantized_fraction - 1.0).abs() <= 0.05)
        && report.residual_mass_fraction < 0.05;
    let mut details = Map::new();
    details.insert("bubbles_planted".into(), json!(centers.len()));
    details.insert("count_consistent".into(), json!(report.count_consistent));
    let verdict = Verdict {
        outcome: if quantized { "quantized" } else { "not_quantized" }.into(),
        residual_or_j: report.residual_mass_fraction,
        bubble_report: Some(BubbleReportJson::from(&report)),
        experiment: cfg.experiment.name().into(),
        expected_regime: quantized,
        t_final: 0.0,
        details,
    };
    Ok(ExperimentReport {
        verdict,
        records: Vec::new(),
        final_state: None,
        bubble_report: Some(report),
    })
}

#[derive(Debug, Clone)]
pub struct ContinuityProbe {
    pub t_end: f64,
    pub deltas: Vec<f64>,
    /// `‖u(T) − v(T)‖∞ / δ` for each δ.
    pub ratios: Vec<f64>,
    /// Largest over smallest ratio.
    pub stability_quotient: f64,
    /// `ln(max ratio) / T`, the growth rate the probe observed.
    pub kappa: f64,
}

fn terminal_field(p: &Problem64, v0: Field64, flow: &FlowConfig) -> anyhow::Result<Field64> {
    let out = run(p, v0, flow, &mut ())?;
    anyhow::ensure!(
        matches!(out, RunOutcome::TimeExhausted { .. }),
        "continuity probe trajectory stopped early ({})",
        out.label()
    );
    Ok(out.into_state().v)
}

/// Runs the flow from `v₀` and from `v₀ + δφ` for each configured δ with a fixed step and
/// compares the fields at `T`.
pub fn continuity_probe(cfg: &ExperimentConfig) -> anyhow::Result<ContinuityProbe> {
    let setup: Setup = build_problem(cfg)?;
    let p = &setup.problem;
    let (v0, _) = initial_field(cfg, &setup)?;
    let c = &cfg.continuity;
    let mut rng = stream(cfg.seed, Stream::Perturbation);
    let phi = random_bandlimited(&setup.grid, c.k_max, c.amplitude, &mut rng)?;
    let flow = FlowConfig {
        stop_residual: f64::MIN_POSITIVE,
        stop_energy: f64::NEG_INFINITY,
        volume_drift_max: cfg.flow.volume_drift_max,
        imex_tolerance: cfg.flow.imex_tolerance,
        ..FlowConfig::fixed_step(c.dt, c.t_end, cfg.flow.to_core().step_scheme)
    };
    let base = terminal_field(p, v0.clone(), &flow)?;
    let mut ratios = Vec::new();
    for &delta in &c.deltas {
        let perturbed = v0.zip_map(&phi, |a, b| a + delta * b)?;
        let end = terminal_field(p, perturbed, &flow)?;
        ratios.push(if delta == 0.0 { 0.0 } else { end.distance_sup(&base)? / delta });
    }
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ContinuityProbe {
        t_end: c.t_end,
        deltas: c.deltas.clone(),
        stability_quotient: max / min,
        kappa: max.ln() / c.t_end,
        ratios,
    })
}

fn probe_report(cfg: &ExperimentConfig, probe: &ContinuityProbe) -> ExperimentReport {
    let stable = probe.stability_quotient.is_finite() && probe.stability_quotient <= 1.5;
    let mut details = Map::new();
    details.insert("deltas".into(), json!(probe.deltas));
    details.insert("ratios".into(), json!(probe.ratios));
    details.insert("stability_quotient".into(), json!(probe.stability_quotient));
    details.insert("kappa".into(), json!(probe.kappa));
    let verdict = Verdict {
        outcome: if stable { "stable" } else { "unstable" }.into(),
        residual_or_j: probe.stability_quotient,
        bubble_report: None,
        experiment: cfg.experiment.name().into(),
        expected_regime: stable,
        t_final: probe.t_end,
        details,
    };
    ExperimentReport {
        verdict,
        records: Vec::new(),
        final_state: None,
        bubble_report: None,
    }
}

/// Writes the continuity probe's verdict under `out_dir` whatever the configured experiment.
pub fn run_continuity_probe(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentReport> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let probe = continuity_probe(cfg)?;
    let mut report = probe_report(cfg, &probe);
    report.verdict.experiment = ExperimentKind::ContinuityProbe.name().into();
    report.verdict.write(&cfg.out_dir.join("continuity.json"))?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct StationaryReport {
    pub json: Value,
    pub converged: bool,
}

/// Newton solve of the stationary equation from the configured initial data; writes
/// `stationary.json` and, on success, `stationary.bin`.
pub fn run_stationary(cfg: &ExperimentConfig) -> anyhow::Result<StationaryReport> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let setup = build_problem(cfg)?;
    let p = &setup.problem;
    let (v0, _) = initial_field(cfg, &setup)?;
    let newton = cfg.newton.to_core()?;
    let (json, converged) = match newton_solve(p, &v0, &newton) {
        Ok(sol) => {
            write_snapshot_file(&cfg.out_dir.join("stationary.bin"), &sol.v, 0.0, cfg.rho)?;
            let energy = energy_j(p, &sol.v)?;
            (
                json!({
                    "converged": true,
                    "iterations": sol.iterations,
                    "residual": sol.residual,
                    "energy": energy,
                    "history": sol.history,
                }),
                true,
            )
        }
        Err(e) => {
            if let NewtonFailureKind::Numerical(inner) = &e.kind {
                anyhow::bail!("stationary solve failed: {inner}");
            }
            let degenerate = matches!(e.kind, NewtonFailureKind::Degenerate { .. });
            (
                json!({
                    "converged": false,
                    "failure": e.kind.to_string(),
                    "degenerate": degenerate,
                    "residual": e.best_residual,
                    "history": e.history,
                }),
                false,
            )
        }
    };
    let path = cfg.out_dir.join("stationary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&json)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(StationaryReport { json, converged })
}

/// Runs independent configurations on `jobs` worker threads. Returns one exit code per
/// configuration, in input order.
pub fn run_batch(paths: &[impl AsRef<Path> + Sync], jobs: usize) -> Vec<(i32, String)> {
    let jobs = jobs.max(1);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results = std::sync::Mutex::new(vec![(EXIT_ERROR, String::new()); paths.len()]);
    std::thread::scope(|s| {
        for _ in 0..jobs.min(paths.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= paths.len() {
                    break;
                }
                let path = paths[i].as_ref();
                let result = crate::config::ExperimentConfig::load(path).and_then(|cfg| run_experiment(&cfg));
                let entry = match result {
                    Ok(report) => (report.exit_code(), report.verdict.outcome.clone()),
                    Err(e) => (EXIT_ERROR, format!("error: {e:#}")),
                };
                results.lock().expect("batch results poisoned")[i] = entry;
            });
        }
    });
    results.into_inner().expect("batch results poisoned")
}
