//! The optimization loop: subspace stages with per-stage budgets, the
//! termination factor `K`, subspace expansion, and full-dimensional
//! restarts.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bandit::{default_candidates_per_line, select_line, select_random};
use crate::embedding::{Embedding, ExpansionMap};
use crate::error::{Error, Result};
use crate::mo_acq::{box_opt, line_opt, Nsga2Params};
use crate::objective::{EvalRecord, ObjectiveSpec};
use crate::surrogate::{fit, FitOptions, GpHyperparams};
use crate::swarm::{LineMode, Swarm, SwarmCoeffs};

/// Which component, if any, is swapped out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Full,
    /// Lines along `v ~ U([-2, 2]^{d_A})` instead of incumbent-guided ones.
    RandomDirection,
    /// Uniformly random line instead of Thompson-sampling selection.
    RandomLineSelect,
    /// Acquisition maximized over the whole box instead of along the line.
    NoLineOpt,
    /// Optimize directly in the input space with the identity embedding.
    NoEmbedding,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::RandomDirection,
        Variant::RandomLineSelect,
        Variant::NoLineOpt,
        Variant::NoEmbedding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::RandomDirection => "no_guided_direction",
            Variant::RandomLineSelect => "no_line_select",
            Variant::NoLineOpt => "no_line_opt",
            Variant::NoEmbedding => "no_embedding",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant `{s}`")))
    }
}

/// Termination-factor state for one subspace stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counters {
    pub k: i64,
    pub successes: usize,
    pub failures: usize,
}

/// Thresholds driving [`update_counters`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRules {
    pub k_init: i64,
    pub k_min: i64,
    pub k_max: i64,
    pub tau_succ: usize,
    pub tau_fail: usize,
}

impl CounterRules {
    pub fn fresh(&self) -> Counters {
        Counters {
            k: self.k_init,
            successes: 0,
            failures: 0,
        }
    }
}

/// Failure tolerance for a stage in `d_A` dimensions.
pub fn tau_fail(target_dim: usize) -> usize {
    target_dim.max(5)
}

/// Records one outcome; returns `true` when `K` exceeds `K_max` and the
/// stage must end.
pub fn update_counters(c: &mut Counters, improved: bool, rules: &CounterRules) -> bool {
    if improved {
        c.successes += 1;
        c.failures = 0;
        if c.successes >= rules.tau_succ {
            c.k = (c.k - 1).max(rules.k_min);
            c.successes = 0;
        }
    } else {
        c.failures += 1;
        c.successes = 0;
        if c.failures >= rules.tau_fail {
            c.k += 1;
            c.failures = 0;
        }
    }
    c.k > rules.k_max
}

/// Stage dimensions `d_A, b·d_A, …, d` with evaluation budgets proportional
/// to the dimension and summing to `budget`. Every stage must receive at
/// least `min_stage` evaluations.
pub fn budget_schedule(d_a_init: usize, b: usize, d: usize, budget: usize, min_stage: usize) -> Result<Vec<(usize, usize)>> {
    if d_a_init == 0 || d_a_init > d {
        return Err(Error::InvalidArgument(format!("initial target dimension {d_a_init} not in 1..={d}")));
    }
    if b < 2 {
        return Err(Error::InvalidArgument(format!("bin size {b} < 2")));
    }
    let mut dims = vec![d_a_init];
    while *dims.last().unwrap() < d {
        dims.push((dims.last().unwrap() * b).min(d));
    }
    let total: usize = dims.iter().sum();
    let mut out = Vec::with_capacity(dims.len());
    let mut used = 0;
    for (k, &da) in dims.iter().enumerate() {
        let t = if k + 1 == dims.len() {
            budget.saturating_sub(used)
        } else {
            ((budget * da) as f64 / total as f64).round() as usize
        };
        used += t;
        out.push((da, t));
    }
    if used != budget || out.iter().any(|&(_, t)| t < min_stage) {
        return Err(Error::BudgetTooSmall {
            budget,
            stages: dims.len(),
            min_per_stage: min_stage,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub objective: ObjectiveSpec,
    pub total_budget: usize,
    /// `None` means `max(m, d_A_init + 1)`.
    pub n_init: Option<usize>,
    pub m: usize,
    pub coeffs: SwarmCoeffs,
    pub d_a_init: usize,
    pub bin_size: usize,
    pub budget_to_full_dim: usize,
    pub k_init: i64,
    pub k_min: i64,
    pub k_max: i64,
    pub tau_succ: usize,
    pub n_features: usize,
    pub nsga: Nsga2Params,
    /// Candidates per line for selection; `None` uses
    /// [`default_candidates_per_line`].
    pub n_cand: Option<usize>,
    pub fit: FitOptions,
    pub seed: u64,
    pub variant: Variant,
    /// Store elapsed milliseconds in the trace; off keeps traces
    /// reproducible byte for byte.
    pub record_wall_time: bool,
}

impl RunConfig {
    /// Full-scale default settings.
    pub fn new(objective: ObjectiveSpec) -> Self {
        Self {
            objective,
            total_budget: 1000,
            n_init: None,
            m: 20,
            coeffs: SwarmCoeffs::default(),
            d_a_init: 1,
            bin_size: 3,
            budget_to_full_dim: 1000,
            k_init: 1,
            k_min: 0,
            k_max: 7,
            tau_succ: 3,
            n_features: 1024,
            nsga: Nsga2Params::default(),
            n_cand: None,
            fit: FitOptions::default(),
            seed: 0,
            variant: Variant::Full,
            record_wall_time: false,
        }
    }

    /// Cheaper inner solvers for single-core benchmark sweeps: short
    /// warm-started hyperparameter fits, fewer random features, a smaller
    /// NSGA-II and a smaller selection pool.
    pub fn desk(objective: ObjectiveSpec) -> Self {
        Self {
            n_features: 512,
            nsga: Nsga2Params {
                pop_size: 50,
                generations: 50,
                ..Nsga2Params::default()
            },
            n_cand: Some(10),
            fit: FitOptions { restarts: 1, steps: 10 },
            ..Self::new(objective)
        }
    }

    pub fn initial_samples(&self) -> usize {
        self.n_init.unwrap_or(self.m.max(self.d_a_init + 1))
    }

    pub fn rules(&self, target_dim: usize) -> CounterRules {
        CounterRules {
            k_init: self.k_init,
            k_min: self.k_min,
            k_max: self.k_max,
            tau_succ: self.tau_succ,
            tau_fail: tau_fail(target_dim),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.objective.dim();
        let n_init = self.initial_samples();
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if n_init < self.m {
            return bad(format!("n_init = {n_init} < m = {}", self.m));
        }
        if self.total_budget < n_init {
            return bad(format!("total budget {} < n_init = {n_init}", self.total_budget));
        }
        if self.d_a_init == 0 || self.d_a_init > d {
            return bad(format!("d_A_init = {} not in 1..={d}", self.d_a_init));
        }
        if self.bin_size < 2 {
            return bad(format!("bin size {} < 2", self.bin_size));
        }
        if !(self.k_min <= self.k_init && self.k_init <= self.k_max) {
            return bad(format!(
                "need K_min <= K_init <= K_max, got {} {} {}",
                self.k_min, self.k_init, self.k_max
            ));
        }
        if self.tau_succ == 0 {
            return bad("tau_succ must be positive".into());
        }
        if self.budget_to_full_dim == 0 {
            return bad("budget_to_full_dim must be positive".into());
        }
        if self.n_cand.is_some_and(|n| n < 2) {
            return bad("n_cand must be at least 2".into());
        }
        if self.n_features < 64 {
            return bad(format!("n_features = {} < 64", self.n_features));
        }
        self.coeffs.validate()
    }

    /// Stage plan for the first lifecycle. When the leading stages cannot
    /// hold `m + 1` evaluations they are dropped, i.e. the run starts in a
    /// larger subspace.
    pub fn stage_plan(&self) -> Vec<(usize, usize)> {
        let d = self.objective.dim();
        let budget = self.budget_to_full_dim.min(self.total_budget);
        if self.variant == Variant::NoEmbedding {
            return vec![(d, budget)];
        }
        let mut start = self.d_a_init;
        loop {
            match budget_schedule(start, self.bin_size, d, budget, self.m + 1) {
                Ok(plan) => return plan,
                Err(_) if start < d => start = (start * self.bin_size).min(d),
                Err(_) => return vec![(d, budget)],
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// 1-based count of objective evaluations.
    pub eval_index: usize,
    /// 0 for initial samples, otherwise the 1-based optimization step.
    pub iteration: usize,
    pub d_a: usize,
    pub restart_count: usize,
    /// Particle whose line produced the point; `None` for initial samples.
    pub selected_particle: Option<usize>,
    pub y: f64,
    pub best_y: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageEnd {
    Budget,
    Terminated,
    TotalBudget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub d_a: usize,
    pub budget: usize,
    pub used: usize,
    pub restart_count: usize,
    pub end: StageEnd,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub best_x: Vec<f64>,
    pub best_y: f64,
    pub trace: Vec<TraceRecord>,
    pub evaluations: Vec<EvalRecord>,
    pub stages: Vec<StageRecord>,
    pub restarts: usize,
}

/// A run stopped by an error, with everything recorded up to that point.
#[derive(Debug, Clone, thiserror::Error)]
#[error("run aborted after {} evaluations: {source}", trace.len())]
pub struct RunAbort {
    pub source: Error,
    pub trace: Vec<TraceRecord>,
}

/// One observation within the current lifecycle.
#[derive(Debug, Clone)]
struct Observation {
    x_target: Vec<f64>,
    x_input: Vec<f64>,
    y: f64,
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    design_rng: ChaCha8Rng,
    algo_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    start: Instant,
    trace: Vec<TraceRecord>,
    evaluations: Vec<EvalRecord>,
    stages: Vec<StageRecord>,
    best: Option<(Vec<f64>, f64)>,
    restarts: usize,
    iteration: usize,
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a RunConfig) -> Self {
        Self {
            cfg,
            design_rng: substream(cfg.seed, 1),
            algo_rng: substream(cfg.seed, 2),
            noise_rng: substream(cfg.seed, 3),
            start: Instant::now(),
            trace: Vec::new(),
            evaluations: Vec::new(),
            stages: Vec::new(),
            best: None,
            restarts: 0,
            iteration: 0,
        }
    }

    fn remaining(&self) -> usize {
        self.cfg.total_budget - self.trace.len()
    }

    fn evaluate(&mut self, emb: &Embedding, x_target: Vec<f64>, particle: Option<usize>) -> Result<Observation> {
        let x_input = emb.project_up(&x_target)?;
        let native = self.cfg.objective.to_native(&x_input)?;
        let y = self.cfg.objective.evaluate(&native, &mut self.noise_rng)?;
        if !y.is_finite() {
            return Err(Error::NonFinite("objective value"));
        }
        if self.best.as_ref().is_none_or(|(_, b)| y < *b) {
            self.best = Some((native.clone(), y));
        }
        let eval_index = self.trace.len() + 1;
        self.trace.push(TraceRecord {
            eval_index,
            iteration: if particle.is_some() { self.iteration } else { 0 },
            d_a: emb.target_dim(),
            restart_count: self.restarts,
            selected_particle: particle,
            y,
            best_y: self.best.as_ref().map(|b| b.1).unwrap(),
            wall_ms: if self.cfg.record_wall_time {
                self.start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            },
        });
        self.evaluations.push(EvalRecord {
            x_native: native,
            y,
            eval_index,
        });
        Ok(Observation { x_target, x_input, y })
    }

    fn run(&mut self) -> Result<()> {
        let d = self.cfg.objective.dim();
        let plan = self.cfg.stage_plan();
        let rate = plan.iter().map(|p| p.1).sum::<usize>() as f64 / plan.iter().map(|p| p.0).sum::<usize>() as f64;
        let stage_budget_for = |da: usize| {
            plan.iter()
                .find(|p| p.0 == da)
                .map(|p| p.1)
                .unwrap_or_else(|| ((rate * da as f64).round() as usize).max(self.cfg.m + 1))
        };

        let mut first = true;
        while self.remaining() > 0 {
            let (emb, budget) = if first {
                let (da, t) = plan[0];
                let emb = if da == d {
                    Embedding::identity(d)
                } else {
                    Embedding::new(d, da, &mut self.design_rng)?
                };
                (emb, t)
            } else {
                self.restarts += 1;
                (Embedding::identity(d), self.remaining())
            };
            first = false;
            self.lifecycle(emb, budget, &stage_budget_for)?;
        }
        Ok(())
    }

    /// One dataset lifetime: initial design, then stages until the space
    /// reaches full dimension and its stage ends.
    fn lifecycle(&mut self, mut emb: Embedding, mut budget: usize, stage_budget_for: &dyn Fn(usize) -> usize) -> Result<()> {
        let cfg = self.cfg;
        let d = cfg.objective.dim();
        let mut data: Vec<Observation> = Vec::new();
        let mut used = 0;
        for _ in 0..cfg.initial_samples().min(self.remaining()) {
            let x: Vec<f64> = (0..emb.target_dim()).map(|_| self.design_rng.random_range(-1.0..=1.0)).collect();
            data.push(self.evaluate(&emb, x, None)?);
            used += 1;
        }
        if self.remaining() == 0 {
            self.close_stage(&emb, budget, used, StageEnd::TotalBudget);
            return Ok(());
        }
        let pairs: Vec<(Vec<f64>, f64)> = data.iter().map(|o| (o.x_target.clone(), o.y)).collect();
        let mut swarm = Swarm::init(&pairs, cfg.m, cfg.coeffs, &mut self.design_rng)?;
        let mut hp: Option<GpHyperparams> = None;

        loop {
            let rules = cfg.rules(emb.target_dim());
            let mut counters = rules.fresh();
            let mut end = StageEnd::Budget;
            while used < budget {
                if self.remaining() == 0 {
                    end = StageEnd::TotalBudget;
                    break;
                }
                self.iteration += 1;
                let improved = self.step(&emb, &mut data, &mut swarm, &mut hp)?;
                used += 1;
                if update_counters(&mut counters, improved, &rules) {
                    end = StageEnd::Terminated;
                    break;
                }
            }
            if end == StageEnd::Budget && self.remaining() == 0 {
                end = StageEnd::TotalBudget;
            }
            self.close_stage(&emb, budget, used, end);
            if end == StageEnd::TotalBudget || emb.target_dim() >= d {
                return Ok(());
            }
            let (next, map) = emb.expand(cfg.bin_size, &mut self.design_rng)?;
            data = lift_dataset(&data, &map, &next)?;
            swarm = swarm.lift(&map)?;
            hp = hp.map(|h| lift_hyperparams(&h, &map)).transpose()?;
            emb = next;
            budget = stage_budget_for(emb.target_dim());
            used = 0;
        }
    }

    fn close_stage(&mut self, emb: &Embedding, budget: usize, used: usize, end: StageEnd) {
        self.stages.push(StageRecord {
            d_a: emb.target_dim(),
            budget,
            used,
            restart_count: self.restarts,
            end,
        });
    }

    /// Fit, build lines, select, optimize, evaluate. Returns whether the
    /// lifecycle's best value strictly improved.
    fn step(
        &mut self,
        emb: &Embedding,
        data: &mut Vec<Observation>,
        swarm: &mut Swarm,
        hp: &mut Option<GpHyperparams>,
    ) -> Result<bool> {
        let cfg = self.cfg;
        let rng = &mut self.algo_rng;
        let xs: Vec<Vec<f64>> = data.iter().map(|o| o.x_target.clone()).collect();
        let ys: Vec<f64> = data.iter().map(|o| o.y).collect();
        let model = fit(&xs, &ys, hp.as_ref(), &cfg.fit, rng)?;
        *hp = Some(model.hyperparams().clone());

        let mode = if cfg.variant == Variant::RandomDirection {
            LineMode::Random
        } else {
            LineMode::Guided
        };
        let lines = swarm.build_lines(mode, rng);
        let chosen = if cfg.variant == Variant::RandomLineSelect {
            select_random(lines.len(), rng)
        } else {
            let n_cand = cfg
                .n_cand
                .unwrap_or_else(|| default_candidates_per_line(emb.target_dim(), cfg.m));
            select_line(&model, &lines, n_cand, rng)?.chosen_index
        };
        let path = model.sample_path(cfg.n_features, rng)?;
        let proposal = if cfg.variant == Variant::NoLineOpt {
            box_opt(&path, &cfg.nsga, rng)?
        } else {
            let p_inc = swarm.particle(chosen).incumbent().0.to_vec();
            let g_inc = swarm.global_incumbent().0.to_vec();
            line_opt(&path, &lines[chosen], &p_inc, &g_inc, &cfg.nsga, rng)?
        };

        let before = swarm.global_incumbent().1;
        let obs = self.evaluate(emb, proposal.point, Some(chosen))?;
        let improved = obs.y < before;
        swarm.update_particle(chosen, obs.x_target.clone(), obs.y)?;
        data.push(obs);
        Ok(improved)
    }
}

/// Carries observations into the expanded subspace and checks that every
/// lifted point still projects onto its stored input-space point.
fn lift_dataset(data: &[Observation], map: &ExpansionMap, next: &Embedding) -> Result<Vec<Observation>> {
    data.iter()
        .map(|o| {
            let x_target = map.lift_point(&o.x_target)?;
            if next.project_up(&x_target)? != o.x_input {
                return Err(Error::InvalidArgument(
                    "lifted observation no longer projects onto its input point".into(),
                ));
            }
            Ok(Observation {
                x_target,
                x_input: o.x_input.clone(),
                y: o.y,
            })
        })
        .collect()
}

/// Children start from their parent's lengthscale.
fn lift_hyperparams(hp: &GpHyperparams, map: &ExpansionMap) -> Result<GpHyperparams> {
    Ok(GpHyperparams {
        lengthscales: map.lift_point(&hp.lengthscales)?,
        ..hp.clone()
    })
}

pub fn run(config: &RunConfig) -> std::result::Result<RunResult, RunAbort> {
    config.validate().map_err(|source| RunAbort {
        source,
        trace: Vec::new(),
    })?;
    let mut runner = Runner::new(config);
    if let Err(source) = runner.run() {
        return Err(RunAbort {
            source,
            trace: runner.trace,
        });
    }
    let (best_x, best_y) = runner.best.expect("at least one evaluation");
    Ok(RunResult {
        best_x,
        best_y,
        trace: runner.trace,
        evaluations: runner.evaluations,
        stages: runner.stages,
        restarts: runner.restarts,
    })
}

/// [`run`] with one component replaced.
pub fn run_ablation(config: &RunConfig, variant: Variant) -> std::result::Result<RunResult, RunAbort> {
    let cfg = RunConfig {
        variant,
        ..config.clone()
    };
    run(&cfg)
}
