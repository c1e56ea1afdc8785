//! Append-only per-update metrics and the run manifest.
//!
//! `metrics.csv` columns, in order, for `k` subpolicies:
//!
//! | column | meaning |
//! |---|---|
//! | `run_id` | short hash of the run's config |
//! | `update` | update index, from 0 |
//! | `timestep` | environment steps so far, after this update's rollouts |
//! | `episodes` | episodes collected in this update |
//! | `avg_return` | mean undiscounted episode return in this update |
//! | `task` | current task index of the environment |
//! | `master_policy_loss`, `master_value_loss`, `master_entropy` | master update diagnostics |
//! | `sub{i}_samples` | steps subpolicy `i` acted in this update |
//! | `sub{i}_policy_loss`, `sub{i}_value_loss`, `sub{i}_entropy` | subpolicy update diagnostics |
//! | `wd_{i}_{j}` | estimated distance from subpolicy `i` to `j`, for every ordered pair |
//! | `wd_min_{i}` | minimum over `j` of `wd_{i}_{j}` |
//! | `clamp_events` | exponent clamps while fitting potentials this update |
//!
//! Empty cells mean "not computed" (for example, no regularizer, or a
//! skipped update). Floats are written in shortest round-trip form.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::EnvConfig;
use crate::error::{Error, Result};

pub fn metric_columns(k: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["run_id", "update", "timestep", "episodes", "avg_return", "task"]
        .iter()
        .chain(&["master_policy_loss", "master_value_loss", "master_entropy"])
        .map(|s| s.to_string())
        .collect();
    for i in 0..k {
        for f in ["samples", "policy_loss", "value_loss", "entropy"] {
            cols.push(format!("sub{i}_{f}"));
        }
    }
    for i in 0..k {
        for j in (0..k).filter(|&j| j != i) {
            cols.push(format!("wd_{i}_{j}"));
        }
    }
    for i in 0..k {
        cols.push(format!("wd_min_{i}"));
    }
    cols.push("clamp_events".into());
    cols
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubpolicyRow {
    pub samples: usize,
    pub policy_loss: Option<f64>,
    pub value_loss: Option<f64>,
    pub entropy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricRow {
    pub run_id: String,
    pub update: usize,
    pub timestep: u64,
    pub episodes: usize,
    pub avg_return: f64,
    pub task: usize,
    pub master_policy_loss: Option<f64>,
    pub master_value_loss: Option<f64>,
    pub master_entropy: Option<f64>,
    pub subpolicies: Vec<SubpolicyRow>,
    /// `wd[i][j]`, `None` on the diagonal or when not computed.
    pub wd: Vec<Vec<Option<f64>>>,
    pub wd_min: Vec<Option<f64>>,
    pub clamp_events: usize,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricRow {
    pub fn cells(&self) -> Vec<String> {
        let k = self.subpolicies.len();
        let mut out = vec![
            self.run_id.clone(),
            self.update.to_string(),
            self.timestep.to_string(),
            self.episodes.to_string(),
            self.avg_return.to_string(),
            self.task.to_string(),
            cell(self.master_policy_loss),
            cell(self.master_value_loss),
            cell(self.master_entropy),
        ];
        for s in &self.subpolicies {
            out.push(s.samples.to_string());
            out.extend([cell(s.policy_loss), cell(s.value_loss), cell(s.entropy)]);
        }
        for i in 0..k {
            for j in (0..k).filter(|&j| j != i) {
                out.push(cell(self.wd.get(i).and_then(|r| r.get(j)).copied().flatten()));
            }
        }
        for i in 0..k {
            out.push(cell(self.wd_min.get(i).copied().flatten()));
        }
        out.push(self.clamp_events.to_string());
        out
    }
}

/// Single-writer CSV sink. Rows are flushed as they are written.
pub struct MetricsWriter {
    writer: csv::Writer<File>,
    columns: usize,
    last_timestep: Option<u64>,
}

impl MetricsWriter {
    /// Opens `path` for appending, writing the header if the file is new or empty.
    pub fn open(path: &Path, k: usize) -> Result<Self> {
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        let header = metric_columns(k);
        if fresh {
            writer.write_record(&header)?;
            writer.flush()?;
        }
        Ok(Self { writer, columns: header.len(), last_timestep: None })
    }

    pub fn write(&mut self, row: &MetricRow) -> Result<()> {
        let cells = row.cells();
        if cells.len() != self.columns {
            return Err(Error::Shape { expected: self.columns, got: cells.len() });
        }
        if let Some(last) = self.last_timestep {
            if row.timestep <= last {
                return Err(Error::Usage(format!("metric timestep {} does not follow {last}", row.timestep)));
            }
        }
        self.writer.write_record(&cells)?;
        self.writer.flush()?;
        self.last_timestep = Some(row.timestep);
        Ok(())
    }
}

/// A metrics file read back as strings, addressed by column name.
#[derive(Debug, Clone)]
pub struct MetricsTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    index: HashMap<String, usize>,
}

impl MetricsTable {
    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let columns: Vec<String> = reader.headers()?.iter().map(String::from).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(String::from).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        let index = columns.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        Ok(Self { columns, rows, index })
    }

    pub fn has(&self, column: &str) -> bool {
        self.index.contains_key(column)
    }

    /// Column values; empty cells become `None`.
    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| Error::Format(format!("metrics have no column {name:?}")))?;
        self.rows
            .iter()
            .map(|r| {
                let s = r[i].as_str();
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse::<f64>().map(Some).map_err(|e| Error::Format(format!("{name}: {e}")))
                }
            })
            .collect()
    }

    /// Column values with empty cells dropped.
    pub fn values(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.column(name)?.into_iter().flatten().collect())
    }
}

/// Written next to `metrics.csv` at the start of a run and rewritten at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
    pub command: String,
    pub env: EnvConfig,
    pub metrics_columns: Vec<String>,
    pub status: String,
    pub updates: usize,
    pub timesteps: u64,
    pub checkpoints: Vec<PathBuf>,
    /// Free-form results (for example adaptation speed).
    #[serde(default)]
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        f.write_all(serde_json::to_string_pretty(self)?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: u64) -> MetricRow {
        MetricRow {
            run_id: "abc".into(),
            update: t as usize,
            timestep: t,
            episodes: 2,
            avg_return: 0.5,
            subpolicies: vec![SubpolicyRow::default(); 2],
            wd: vec![vec![None, Some(0.25)], vec![Some(0.125), None]],
            wd_min: vec![Some(0.25), Some(0.125)],
            ..MetricRow::default()
        }
    }

    #[test]
    fn columns_match_cells() {
        assert_eq!(metric_columns(2).len(), row(1).cells().len());
        // one more subpolicy: 4 update columns, 4 ordered pairs, 1 minimum
        assert_eq!(metric_columns(3).len(), metric_columns(2).len() + 9);
    }

    #[test]
    fn write_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut w = MetricsWriter::open(&path, 2).unwrap();
        w.write(&row(10)).unwrap();
        w.write(&row(20)).unwrap();
        assert!(matches!(w.write(&row(20)), Err(Error::Usage(_))));
        drop(w);
        let mut w = MetricsWriter::open(&path, 2).unwrap();
        w.write(&row(30)).unwrap();
        let t = MetricsTable::read(&path).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.values("wd_0_1").unwrap(), vec![0.25; 3]);
        assert_eq!(t.column("master_entropy").unwrap(), vec![None; 3]);
        assert!(t.column("nope").is_err());
    }
}
