//! Flat `key = value` run configuration.
//!
//! Keys mirror the fields of [`RunConfig`]; NSGA-II and fitting settings
//! are flattened (`pop_size`, `generations`, `fit_restarts`, ...). A
//! `profile` key picks the base settings (`standard` or `desk`) before the
//! remaining keys are applied.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use boids::driver::{RunConfig, Variant};
use boids::objective::make_synthetic;

/// Errors caused by bad user input; the CLI maps these to exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub const KEYS: &[&str] = &[
    "profile",
    "objective",
    "dim",
    "noise_sd",
    "total_budget",
    "n_init",
    "m",
    "w",
    "c1",
    "c2",
    "d_a_init",
    "bin_size",
    "budget_to_full_dim",
    "k_init",
    "k_min",
    "k_max",
    "tau_succ",
    "n_features",
    "pop_size",
    "generations",
    "eta_c",
    "crossover_prob",
    "eta_m",
    "n_cand",
    "fit_restarts",
    "fit_steps",
    "seed",
    "variant",
    "record_wall_time",
];

pub type Settings = BTreeMap<String, String>;

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_settings(text: &str) -> Result<Settings, UsageError> {
    let mut out = Settings::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| UsageError(format!("line {}: expected key = value, got `{line}`", no + 1)))?;
        insert(&mut out, k.trim(), v.trim())?;
    }
    Ok(out)
}

fn insert(map: &mut Settings, key: &str, value: &str) -> Result<(), UsageError> {
    if !KEYS.contains(&key) {
        return Err(UsageError(format!("unknown setting `{key}`")));
    }
    map.insert(key.to_string(), value.to_string());
    Ok(())
}

/// Applies `key=value` overrides on top of `base`.
pub fn apply_overrides(base: &mut Settings, overrides: &[String]) -> Result<(), UsageError> {
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| UsageError(format!("override `{o}` is not key=value")))?;
        insert(base, k.trim(), v.trim())?;
    }
    Ok(())
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, UsageError>
where
    T::Err: Display,
{
    v.parse()
        .map_err(|e| UsageError(format!("setting `{key}` = `{v}`: {e}")))
}

fn optional_count(key: &str, v: &str) -> Result<Option<usize>, UsageError> {
    if v == "auto" {
        Ok(None)
    } else {
        parse(key, v).map(Some)
    }
}

/// Builds a validated run configuration.
pub fn build_config(s: &Settings) -> Result<RunConfig, UsageError> {
    let name = s
        .get("objective")
        .ok_or_else(|| UsageError("missing objective (set objective=ackley|branin_aug|hartmann6_aug)".into()))?;
    let dim: usize = parse(
        "dim",
        s.get("dim").ok_or_else(|| UsageError("missing dim".into()))?,
    )?;
    let mut objective = make_synthetic(name, dim).map_err(|e| UsageError(e.to_string()))?;
    if let Some(v) = s.get("noise_sd") {
        objective = objective
            .with_noise(parse("noise_sd", v)?)
            .map_err(|e| UsageError(e.to_string()))?;
    }
    let mut cfg = match s.get("profile").map(String::as_str) {
        None | Some("standard") => RunConfig::new(objective),
        Some("desk") => RunConfig::desk(objective),
        Some(p) => return Err(UsageError(format!("unknown profile `{p}` (standard or desk)"))),
    };
    for (k, v) in s {
        match k.as_str() {
            "profile" | "objective" | "dim" | "noise_sd" => {}
            "total_budget" => cfg.total_budget = parse(k, v)?,
            "n_init" => cfg.n_init = optional_count(k, v)?,
            "m" => cfg.m = parse(k, v)?,
            "w" => cfg.coeffs.w = parse(k, v)?,
            "c1" => cfg.coeffs.c1 = parse(k, v)?,
            "c2" => cfg.coeffs.c2 = parse(k, v)?,
            "d_a_init" => cfg.d_a_init = parse(k, v)?,
            "bin_size" => cfg.bin_size = parse(k, v)?,
            "budget_to_full_dim" => cfg.budget_to_full_dim = parse(k, v)?,
            "k_init" => cfg.k_init = parse(k, v)?,
            "k_min" => cfg.k_min = parse(k, v)?,
            "k_max" => cfg.k_max = parse(k, v)?,
            "tau_succ" => cfg.tau_succ = parse(k, v)?,
            "n_features" => cfg.n_features = parse(k, v)?,
            "pop_size" => cfg.nsga.pop_size = parse(k, v)?,
            "generations" => cfg.nsga.generations = parse(k, v)?,
            "eta_c" => cfg.nsga.eta_c = parse(k, v)?,
            "crossover_prob" => cfg.nsga.crossover_prob = parse(k, v)?,
            "eta_m" => cfg.nsga.eta_m = parse(k, v)?,
            "n_cand" => cfg.n_cand = optional_count(k, v)?,
            "fit_restarts" => cfg.fit.restarts = parse(k, v)?,
            "fit_steps" => cfg.fit.steps = parse(k, v)?,
            "seed" => cfg.seed = parse(k, v)?,
            "variant" => cfg.variant = Variant::parse(v).map_err(|e| UsageError(e.to_string()))?,
            "record_wall_time" => cfg.record_wall_time = parse(k, v)?,
            other => return Err(UsageError(format!("unknown setting `{other}`"))),
        }
    }
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(cfg)
}

/// Renders the settings that fully determine a run.
pub fn describe(cfg: &RunConfig) -> Settings {
    let mut s = Settings::new();
    let mut put = |k: &str, v: String| {
        s.insert(k.to_string(), v);
    };
    put("objective", cfg.objective.name().to_string());
    put("dim", cfg.objective.dim().to_string());
    put("noise_sd", cfg.objective.noise_sd().to_string());
    put("total_budget", cfg.total_budget.to_string());
    put("n_init", cfg.initial_samples().to_string());
    put("m", cfg.m.to_string());
    put("w", cfg.coeffs.w.to_string());
    put("c1", cfg.coeffs.c1.to_string());
    put("c2", cfg.coeffs.c2.to_string());
    put("d_a_init", cfg.d_a_init.to_string());
    put("bin_size", cfg.bin_size.to_string());
    put("budget_to_full_dim", cfg.budget_to_full_dim.to_string());
    put("k_init", cfg.k_init.to_string());
    put("k_min", cfg.k_min.to_string());
    put("k_max", cfg.k_max.to_string());
    put("tau_succ", cfg.tau_succ.to_string());
    put("n_features", cfg.n_features.to_string());
    put("pop_size", cfg.nsga.pop_size.to_string());
    put("generations", cfg.nsga.generations.to_string());
    put("eta_c", cfg.nsga.eta_c.to_string());
    put("crossover_prob", cfg.nsga.crossover_prob.to_string());
    put("eta_m", cfg.nsga.eta_m.to_string());
    put(
        "n_cand",
        cfg.n_cand.map_or_else(|| "auto".to_string(), |n| n.to_string()),
    );
    put("fit_restarts", cfg.fit.restarts.to_string());
    put("fit_steps", cfg.fit.steps.to_string());
    put("seed", cfg.seed.to_string());
    put("variant", cfg.variant.name().to_string());
    put("record_wall_time", cfg.record_wall_time.to_string());
    s
}

pub fn to_text(s: &Settings) -> String {
    s.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let mut s = parse_settings("# run\nobjective = ackley\ndim=20 # twenty\n\nseed = 4\n").unwrap();
        apply_overrides(&mut s, &["seed=9".into(), "profile=desk".into()]).unwrap();
        let cfg = build_config(&s).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.objective.dim(), 20);
        assert_eq!(cfg.nsga.pop_size, 50);
    }

    #[test]
    fn defaults_follow_standard_settings() {
        let s = parse_settings("objective = branin_aug\ndim = 10").unwrap();
        let cfg = build_config(&s).unwrap();
        assert_eq!(cfg.m, 20);
        assert_eq!(cfg.coeffs.w, 0.729);
        assert!((cfg.coeffs.c1 - 2.05 * 0.729).abs() < 1e-15);
        assert_eq!(cfg.bin_size, 3);
        assert_eq!(cfg.budget_to_full_dim, 1000);
        assert_eq!((cfg.nsga.pop_size, cfg.nsga.generations), (100, 100));
        assert_eq!(cfg.tau_succ, 3);
        assert_eq!((cfg.k_init, cfg.k_min, cfg.k_max), (1, 0, 7));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_settings("nonsense").is_err());
        assert!(parse_settings("colour = red").is_err());
        assert!(build_config(&parse_settings("dim = 4").unwrap()).is_err());
        assert!(build_config(&parse_settings("objective = rosenbrock\ndim = 4").unwrap()).is_err());
        assert!(build_config(&parse_settings("objective = ackley\ndim = x").unwrap()).is_err());
        assert!(build_config(&parse_settings("objective = ackley\ndim = 4\nk_init = 9").unwrap()).is_err());
    }

    #[test]
    fn description_round_trips() {
        let s = parse_settings("objective = hartmann6_aug\ndim = 12\nprofile = desk\nseed = 3\nn_cand = auto").unwrap();
        let cfg = build_config(&s).unwrap();
        let again = build_config(&parse_settings(&to_text(&describe(&cfg))).unwrap()).unwrap();
        assert_eq!(describe(&cfg), describe(&again));
    }
}
