//! TOML experiment configuration.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use meanflow_core::concentration::ExtractConfig;
use meanflow_core::stationary::{Gauge, NewtonConfig};
use meanflow_core::{FlowConfig, StepScheme};
use serde::{Deserialize, Deserializer, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    FixedPoint,
    SubcriticalConverge,
    SupercriticalBounded,
    SupercriticalDiverge,
    QuantizationAudit,
    ContinuityProbe,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::FixedPoint => "fixed_point",
            Self::SubcriticalConverge => "subcritical_converge",
            Self::SupercriticalBounded => "supercritical_bounded",
            Self::SupercriticalDiverge => "supercritical_diverge",
            Self::QuantizationAudit => "quantization_audit",
            Self::ContinuityProbe => "continuity_probe",
        }
    }
}

/// Weight `f = exp(amplitude · cos(mode · 2πx/L))` for the `from_f` background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FSpec {
    ExpCosine {
        amplitude: f64,
        #[serde(default = "one")]
        mode: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QSpec {
    /// `Q ≡ ρ/|M|`.
    Constant,
    /// `Q = ρ/|M| + amplitude · cos(mode · 2πx/L)`.
    CosinePerturbed {
        amplitude: f64,
        #[serde(default = "one")]
        mode: u32,
    },
    /// `Q = ρ/|M| + Δ log f`, with the flow run in `v = u + log f`.
    FromF { f_spec: FSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    Zero,
    RandomBandlimited {
        k_max: u32,
        amplitude: f64,
        /// Defaults to the experiment seed.
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Chen–Li profile. With `target_energy`, `lambda` is the first value tried while
    /// doubling towards the target.
    Bubble {
        lambda: f64,
        #[serde(default)]
        center: Option<[f64; 2]>,
        #[serde(default)]
        target_energy: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    LinearlyImplicit,
    ExplicitRk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub step_scheme: SchemeName,
    pub imex_tolerance: f64,
    pub max_inner_iterations: usize,
    pub t_end: f64,
    pub stop_residual: f64,
    pub stop_energy: f64,
    pub volume_drift_max: f64,
    pub record_interval: f64,
    pub unresolved_fraction: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        let d = FlowConfig::default();
        Self {
            dt_init: d.dt_init,
            dt_min: d.dt_min,
            dt_max: d.dt_max,
            step_scheme: SchemeName::LinearlyImplicit,
            imex_tolerance: d.imex_tolerance,
            max_inner_iterations: d.max_inner_iterations,
            t_end: d.t_end,
            stop_residual: d.stop_residual,
            stop_energy: d.stop_energy,
            volume_drift_max: d.volume_drift_max,
            record_interval: 0.01,
            unresolved_fraction: d.unresolved_fraction,
        }
    }
}

impl FlowSection {
    pub fn to_core(&self) -> FlowConfig {
        FlowConfig {
            dt_init: self.dt_init,
            dt_min: self.dt_min,
            dt_max: self.dt_max,
            step_scheme: match self.step_scheme {
                SchemeName::LinearlyImplicit => StepScheme::LinearlyImplicit,
                SchemeName::ExplicitRk4 => StepScheme::ExplicitRk4,
            },
            imex_tolerance: self.imex_tolerance,
            max_inner_iterations: self.max_inner_iterations,
            t_end: self.t_end,
            stop_residual: self.stop_residual,
            stop_energy: self.stop_energy,
            volume_drift_max: self.volume_drift_max,
            record_interval: self.record_interval,
            unresolved_fraction: self.unresolved_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonSection {
    pub max_iters: usize,
    pub tol: f64,
    pub damping: f64,
    /// `"zero_mean"` or `"fixed_volume"`; the latter uses `volume`.
    pub gauge: String,
    pub volume: Option<f64>,
}

impl Default for NewtonSection {
    fn default() -> Self {
        let d = NewtonConfig::default();
        Self {
            max_iters: d.max_iters,
            tol: d.tol,
            damping: d.damping,
            gauge: "zero_mean".into(),
            volume: None,
        }
    }
}

impl NewtonSection {
    pub fn to_core(&self) -> anyhow::Result<NewtonConfig> {
        let gauge = match (self.gauge.as_str(), self.volume) {
            ("zero_mean", _) => Gauge::ZeroMean,
            ("fixed_volume", Some(a)) => Gauge::FixedVolume(a),
            ("fixed_volume", None) => anyhow::bail!("fixed_volume gauge needs newton.volume"),
            (other, _) => anyhow::bail!("unknown gauge {other:?}"),
        };
        Ok(NewtonConfig {
            max_iters: self.max_iters,
            tol: self.tol,
            damping: self.damping,
            gauge,
            ..NewtonConfig::default()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractSection {
    pub annulus_threshold: f64,
    pub residual_threshold: f64,
    pub separation_threshold: f64,
    pub normalization: f64,
}

impl Default for ExtractSection {
    fn default() -> Self {
        let d = ExtractConfig::default();
        Self {
            annulus_threshold: d.annulus_threshold,
            residual_threshold: d.residual_threshold,
            separation_threshold: d.separation_threshold,
            normalization: d.normalization,
        }
    }
}

impl ExtractSection {
    pub fn to_core(&self) -> ExtractConfig {
        ExtractConfig {
            annulus_threshold: self.annulus_threshold,
            residual_threshold: self.residual_threshold,
            separation_threshold: self.separation_threshold,
            normalization: self.normalization,
        }
    }
}

/// Synthetic field for the quantization audit: Chen–Li bubbles over a constant floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    pub lambda: f64,
    /// Bubble centers; empty means `⌊ρ/8π⌋` centers spread along the diagonal.
    pub centers: Vec<[f64; 2]>,
    /// Share of the total mass carried by the floor.
    pub floor_fraction: f64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        Self {
            lambda: 40.0,
            centers: Vec::new(),
            floor_fraction: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuitySection {
    pub t_end: f64,
    pub deltas: Vec<f64>,
    /// Band limit and amplitude of the perturbation direction φ.
    pub k_max: u32,
    pub amplitude: f64,
    /// Fixed step used for both trajectories, so that they share every time level.
    pub dt: f64,
}

impl Default for ContinuitySection {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            deltas: vec![1e-3, 1e-4],
            k_max: 3,
            amplitude: 1.0,
            dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// A number, or a multiple of π written as `"12pi"`.
    #[serde(deserialize_with = "rho_value")]
    pub rho: f64,
    pub grid_n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "two_pi")]
    pub side_length: f64,
    pub out_dir: PathBuf,
    #[serde(default = "tenth")]
    pub snapshot_interval: f64,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default = "constant_q")]
    pub q_spec: QSpec,
    #[serde(default = "zero_init")]
    pub init_spec: InitSpec,
    #[serde(default)]
    pub newton: NewtonSection,
    #[serde(default)]
    pub extract: ExtractSection,
    #[serde(default)]
    pub synthetic: SyntheticSection,
    #[serde(default)]
    pub continuity: ContinuitySection,
}

fn one() -> u32 {
    1
}

fn two_pi() -> f64 {
    2.0 * PI
}

fn tenth() -> f64 {
    0.1
}

fn constant_q() -> QSpec {
    QSpec::Constant
}

fn zero_init() -> InitSpec {
    InitSpec::Zero
}

/// Parses `"12pi"`, `"12π"`, `"pi"` or `"0.5 pi"`.
pub fn parse_pi_multiple(s: &str) -> Option<f64> {
    let t = s.trim();
    let stem = t.strip_suffix("pi").or_else(|| t.strip_suffix('π'))?;
    let stem = stem.trim().trim_end_matches('*').trim();
    let factor = if stem.is_empty() { 1.0 } else { stem.parse::<f64>().ok()? };
    Some(factor * PI)
}

fn rho_value<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Int(i64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Number(x) => Ok(x),
        Raw::Int(x) => Ok(x as f64),
        Raw::Text(s) => parse_pi_multiple(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("cannot read rho from {s:?}; use a number or e.g. \"12pi\""))),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(self.rho.is_finite(), "rho must be finite");
        anyhow::ensure!(
            self.grid_n >= 32 && self.grid_n % 2 == 0,
            "grid_n must be even and at least 32, got {}",
            self.grid_n
        );
        anyhow::ensure!(self.side_length > 0.0 && self.side_length.is_finite(), "side_length must be positive");
        anyhow::ensure!(self.snapshot_interval > 0.0, "snapshot_interval must be positive");
        self.flow.to_core().validate()?;
        self.newton.to_core()?;
        if let InitSpec::Bubble { lambda, .. } = self.init_spec {
            anyhow::ensure!(lambda > 0.0, "bubble lambda must be positive");
        }
        anyhow::ensure!(!self.continuity.deltas.is_empty(), "continuity.deltas must not be empty");
        Ok(())
    }
}
