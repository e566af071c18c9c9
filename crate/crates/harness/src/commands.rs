//! Experiment drivers behind the `run`, `batch` and `ablate` subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use boids::driver::{run, RunConfig, RunResult, Variant};
use serde::Serialize;

use crate::config::{self, Settings, UsageError};
use crate::output::{self, quantile, Aggregate, RunSummary};

/// Parses `a..b` (inclusive) or a comma-separated list; seeds must be distinct.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, UsageError> {
    let bad = |e: &dyn std::fmt::Display| UsageError(format!("bad seed list `{text}`: {e}"));
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| bad(&e))?;
        let b: u64 = b.trim().parse().map_err(|e| bad(&e))?;
        if b < a {
            return Err(bad(&"empty range"));
        }
        (a..=b).collect()
    } else {
        text.split(',')
            .map(|s| s.trim().parse().map_err(|e| bad(&e)))
            .collect::<Result<_, _>>()?
    };
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err(bad(&"duplicate seeds"));
    }
    Ok(seeds)
}

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("trace_seed{seed}.csv"))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Runs one configuration and writes its trace CSV and summary JSON. An
/// aborted run still leaves the partial trace behind.
pub fn run_one(cfg: &RunConfig, dir: &Path) -> Result<RunResult> {
    ensure_dir(dir)?;
    let csv = trace_path(dir, cfg.seed);
    match run(cfg) {
        Ok(res) => {
            output::write_trace(&res.trace, &csv)?;
            output::write_json(
                &RunSummary::new(&res, config::describe(cfg)),
                &dir.join(format!("summary_seed{}.json", cfg.seed)),
            )?;
            Ok(res)
        }
        Err(abort) => {
            if !abort.trace.is_empty() {
                output::write_trace(&abort.trace, &csv)?;
            }
            Err(anyhow!("run aborted after {} evaluations: {}", abort.trace.len(), abort.source))
        }
    }
}

fn with_seed(settings: &Settings, seed: u64) -> Result<RunConfig, UsageError> {
    let mut s = settings.clone();
    s.insert("seed".into(), seed.to_string());
    config::build_config(&s)
}

/// One run per seed, then the per-index median and quartiles of `best_y`.
pub fn batch(settings: &Settings, seeds: &[u64], dir: &Path) -> Result<Aggregate> {
    let mut traces = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let cfg = with_seed(settings, seed)?;
        traces.push(run_one(&cfg, dir)?.trace);
    }
    let agg = output::aggregate(seeds, &traces)?;
    output::write_json(&agg, &dir.join("aggregate.json"))?;
    Ok(agg)
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantSummary {
    pub variant: String,
    pub seeds: Vec<u64>,
    pub final_best_y: Vec<f64>,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub objective: String,
    pub dim: usize,
    pub total_budget: usize,
    pub variants: Vec<VariantSummary>,
}

impl Comparison {
    pub fn median_of(&self, v: Variant) -> Option<f64> {
        self.variants
            .iter()
            .find(|s| s.variant == v.name())
            .map(|s| s.median)
    }
}

/// Every variant on every seed; traces go to `dir/<variant>/`.
pub fn ablate(settings: &Settings, seeds: &[u64], variants: &[Variant], dir: &Path) -> Result<Comparison> {
    let base = with_seed(settings, seeds.first().copied().unwrap_or(0))?;
    let mut out = Comparison {
        objective: base.objective.name().to_string(),
        dim: base.objective.dim(),
        total_budget: base.total_budget,
        variants: Vec::new(),
    };
    for &v in variants {
        let sub = dir.join(v.name());
        let mut finals = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let mut cfg = with_seed(settings, seed)?;
            cfg.variant = v;
            finals.push(run_one(&cfg, &sub)?.best_y);
        }
        let mut sorted = finals.clone();
        sorted.sort_by(f64::total_cmp);
        out.variants.push(VariantSummary {
            variant: v.name().to_string(),
            seeds: seeds.to_vec(),
            final_best_y: finals,
            median: quantile(&sorted, 0.5),
            q1: quantile(&sorted, 0.25),
            q3: quantile(&sorted, 0.75),
        });
    }
    output::write_json(&out, &dir.join("comparison.json"))?;
    Ok(out)
}

/// Variant names accepted by `ablate --variants`.
pub fn parse_variants(text: &str) -> Result<Vec<Variant>, UsageError> {
    if text == "all" {
        return Ok(Variant::ALL.to_vec());
    }
    text.split(',')
        .map(|s| Variant::parse(s.trim()).map_err(|e| UsageError(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_seeds("7, 3,9").unwrap(), vec![7, 3, 9]);
        assert!(parse_seeds("3,3").is_err());
        assert!(parse_seeds("5..2").is_err());
        assert!(parse_seeds("a").is_err());
    }

    #[test]
    fn variant_lists() {
        assert_eq!(parse_variants("all").unwrap().len(), 5);
        assert_eq!(
            parse_variants("full, no_line_opt").unwrap(),
            vec![Variant::Full, Variant::NoLineOpt]
        );
        assert!(parse_variants("bogus").is_err());
    }
}
