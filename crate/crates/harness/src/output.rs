//! CSV time series, JSON verdicts and binary snapshots.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use meanflow_core::grid::write_snapshot;
use meanflow_core::{BubbleReport, DiagnosticsRecord, Field64};
use serde::{Deserialize, Serialize};

pub const CSV_HEADER: [&str; 9] = ["t", "J", "volume_drift", "dissipation", "v_max", "v_min", "residual", "r_min", "dt"];

pub struct RecordWriter {
    inner: csv::Writer<BufWriter<File>>,
}

impl RecordWriter {
    pub fn create(path: &Path) -> anyhow::Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut inner = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(BufWriter::new(file));
        inner.write_record(CSV_HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &DiagnosticsRecord) -> anyhow::Result<()> {
        let row = [r.t, r.j, r.volume_rel_drift, r.dissipation, r.v_max, r.v_min, r.residual, r.r_min, r.dt];
        self.inner.write_record(row.iter().map(|x| x.to_string()))?;
        Ok(())
    }

    pub fn finish(mut self) -> anyhow::Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Writes `snapshot_NNNNN.bin` files whenever the run passes a multiple of `interval`.
pub struct SnapshotWriter {
    dir: PathBuf,
    interval: f64,
    next: f64,
    count: usize,
}

impl SnapshotWriter {
    pub fn new(dir: PathBuf, interval: f64) -> anyhow::Result<Self> {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir,
            interval,
            next: 0.0,
            count: 0,
        })
    }

    pub fn offer(&mut self, v: &Field64, t: f64, rho: f64) -> anyhow::Result<()> {
        if t + 1e-12 >= self.next {
            let path = self.dir.join(format!("snapshot_{:05}.bin", self.count));
            write_snapshot_file(&path, v, t, rho)?;
            self.count += 1;
            self.next = ((t + 1e-12) / self.interval).floor() * self.interval + self.interval;
        }
        Ok(())
    }

    pub fn written(&self) -> usize {
        self.count
    }
}

pub fn write_snapshot_file(path: &Path, v: &Field64, t: f64, rho: f64) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write_snapshot(&mut w, v, t, rho)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleJson {
    pub cx: f64,
    pub cy: f64,
    pub scale: f64,
    pub radius: f64,
    pub mass: f64,
    pub quantized_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleReportJson {
    pub bubbles: Vec<BubbleJson>,
    pub residual_mass_fraction: f64,
    pub separation_ok: bool,
    pub h_n_l2: Option<f64>,
}

impl From<&BubbleReport> for BubbleReportJson {
    fn from(r: &BubbleReport) -> Self {
        Self {
            bubbles: r
                .bubbles
                .iter()
                .map(|b| BubbleJson {
                    cx: b.center.x,
                    cy: b.center.y,
                    scale: b.scale,
                    radius: b.detection_radius,
                    mass: b.local_mass,
                    quantized_fraction: b.quantized_fraction,
                })
                .collect(),
            residual_mass_fraction: r.residual_mass_fraction,
            separation_ok: r.separation_ok,
            h_n_l2: r.h_n_l2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: String,
    /// Terminal residual for converged runs, terminal energy otherwise.
    #[serde(rename = "residual_or_J")]
    pub residual_or_j: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bubble_report: Option<BubbleReportJson>,
    pub experiment: String,
    pub expected_regime: bool,
    pub t_final: f64,
    /// Experiment-specific checks, for example the Newton cross-check distance.
    #[serde(skip_serializing_if = "serde_json::Map::is_empty", default)]
    pub details: serde_json::Map<String, serde_json::Value>,
}

impl Verdict {
    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
