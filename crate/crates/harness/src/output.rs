//! Trace CSVs and JSON summaries.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use boids::driver::{RunResult, StageEnd, TraceRecord};
use serde::Serialize;

pub const TRACE_HEADER: &str = "eval_index,iteration,d_A,restart_count,selected_particle,y,best_y,wall_ms";

/// Writes one CSV row per evaluation. Floats use 17 significant digits so
/// they parse back exactly.
pub fn write_trace(records: &[TraceRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        bail!("refusing to write an empty trace to {}", path.display());
    }
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let particle = r.selected_particle.map_or(-1, |p| p as i64);
        out.push_str(&format!(
            "{},{},{},{},{},{:.16e},{:.16e},{:.16e}\n",
            r.eval_index, r.iteration, r.d_a, r.restart_count, particle, r.y, r.best_y, r.wall_ms
        ));
    }
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(out.as_bytes())
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        bail!("{}: unexpected header", path.display());
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                bail!("{}:{}: expected 8 fields", path.display(), k + 2);
            }
            let particle: i64 = f[4].parse()?;
            Ok(TraceRecord {
                eval_index: f[0].parse()?,
                iteration: f[1].parse()?,
                d_a: f[2].parse()?,
                restart_count: f[3].parse()?,
                selected_particle: usize::try_from(particle).ok(),
                y: f[5].parse()?,
                best_y: f[6].parse()?,
                wall_ms: f[7].parse()?,
            })
        })
        .collect()
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let f = pos - lo as f64;
    (1.0 - f) * sorted[lo] + f * sorted[hi]
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct Aggregate {
    pub seeds: Vec<u64>,
    pub eval_index: Vec<usize>,
    pub median: Vec<f64>,
    pub q1: Vec<f64>,
    pub q3: Vec<f64>,
}

/// Median and quartiles of `best_y` at each evaluation index across runs.
pub fn aggregate(seeds: &[u64], traces: &[Vec<TraceRecord>]) -> Result<Aggregate> {
    let n = traces.first().map_or(0, Vec::len);
    if traces.is_empty() || traces.iter().any(|t| t.len() != n) {
        bail!("traces must be non-empty and of equal length");
    }
    let mut agg = Aggregate {
        seeds: seeds.to_vec(),
        eval_index: Vec::with_capacity(n),
        median: Vec::with_capacity(n),
        q1: Vec::with_capacity(n),
        q3: Vec::with_capacity(n),
    };
    for i in 0..n {
        let mut col: Vec<f64> = traces.iter().map(|t| t[i].best_y).collect();
        col.sort_by(f64::total_cmp);
        agg.eval_index.push(traces[0][i].eval_index);
        agg.median.push(quantile(&col, 0.5));
        agg.q1.push(quantile(&col, 0.25));
        agg.q3.push(quantile(&col, 0.75));
    }
    Ok(agg)
}

#[derive(Debug, Serialize)]
pub struct StageSummary {
    pub d_a: usize,
    pub budget: usize,
    pub used: usize,
    pub restart_count: usize,
    pub end: &'static str,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub best_y: f64,
    pub best_x: Vec<f64>,
    pub evaluations: usize,
    pub restarts: usize,
    pub stages: Vec<StageSummary>,
    pub config: std::collections::BTreeMap<String, String>,
}

impl RunSummary {
    pub fn new(res: &RunResult, config: std::collections::BTreeMap<String, String>) -> Self {
        Self {
            best_y: res.best_y,
            best_x: res.best_x.clone(),
            evaluations: res.trace.len(),
            restarts: res.restarts,
            stages: res
                .stages
                .iter()
                .map(|s| StageSummary {
                    d_a: s.d_a,
                    budget: s.budget,
                    used: s.used,
                    restart_count: s.restart_count,
                    end: match s.end {
                        StageEnd::Budget => "budget",
                        StageEnd::Terminated => "terminated",
                        StageEnd::TotalBudget => "total_budget",
                    },
                })
                .collect(),
            config,
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
