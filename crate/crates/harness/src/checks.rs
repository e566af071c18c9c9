//! Numerical verification suites shared by the CLI and the test suite.

use std::time::Instant;

use boids::embedding::{success_probability, success_probability_oracle, Embedding};
use boids::mo_acq::{dominates, nsga2, MoProblem, Nsga2Params};
use boids::surrogate::{log_marginal_likelihood, GpHyperparams, GpModel, NOISE_VARIANCE_BOUNDS};
use boids::swarm::{lemma1_check, lemma1_expectation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {}: {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn timed(name: &str, f: impl FnOnce() -> (bool, String)) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = f();
    CheckOutcome {
        name: name.to_string(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn normal_vec(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn uniform_vec(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Closed-form success probability against the enumeration oracle for all
/// `d <= max_d`, `1 <= d_A <= d`, `0 <= d_e <= min(3, d)`.
pub fn embedding_probability(max_d: usize) -> CheckOutcome {
    timed("embedding success probability", || {
        let mut cases = 0;
        let mut worst: f64 = 0.0;
        let mut errors = Vec::new();
        for d in 1..=max_d {
            for da in 1..=d {
                for de in 0..=d.min(3) {
                    match (success_probability(d, da, de), success_probability_oracle(d, da, de)) {
                        (Ok(p), Ok(q)) => worst = worst.max((p - q).abs()),
                        (a, b) => errors.push(format!("d={d} d_A={da} d_e={de}: {a:?} / {b:?}")),
                    }
                    cases += 1;
                }
            }
        }
        let passed = errors.is_empty() && worst <= 1e-12;
        let mut detail = format!("{cases} cases, max abs diff {worst:.3e} (limit 1e-12)");
        if !errors.is_empty() {
            detail.push_str(&format!("; errors: {}", errors.join(", ")));
        }
        (passed, detail)
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma1Case {
    pub dim: usize,
    pub empirical_mean: f64,
    pub std_error: f64,
    pub bound: f64,
    pub exact: f64,
    pub holds: bool,
}

pub const LEMMA1_DIMS: [usize; 5] = [1, 2, 4, 8, 16];

/// Monte-Carlo check of the incumbent-direction lower bound on `4 ·
/// |LEMMA1_DIMS|` Gaussian instances, plus the two one-dimensional closed
/// forms. With `sign_consistent`, `h2` is flipped whenever `⟨g,h1⟩` and
/// `⟨g,h2⟩` have opposite signs.
pub fn lemma1_suite(n_samples: usize, seed: u64, sign_consistent: bool) -> (CheckOutcome, Vec<Lemma1Case>) {
    let mut cases = Vec::new();
    let name = if sign_consistent {
        "direction bound (sign-consistent instances)"
    } else {
        "direction bound"
    };
    let outcome = timed(name, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for &d in &LEMMA1_DIMS {
            for _ in 0..4 {
                let g = normal_vec(d, &mut rng);
                let h1 = normal_vec(d, &mut rng);
                let mut h2 = normal_vec(d, &mut rng);
                let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
                if sign_consistent && dot(&g, &h1) * dot(&g, &h2) < 0.0 {
                    h2.iter_mut().for_each(|v| *v = -*v);
                }
                let rep = lemma1_check(&g, &h1, &h2, n_samples, &mut rng).expect("valid lemma instance");
                cases.push(Lemma1Case {
                    dim: d,
                    empirical_mean: rep.empirical_mean,
                    std_error: rep.std_error,
                    bound: rep.bound,
                    exact: lemma1_expectation(&g, &h1, &h2).expect("valid lemma instance"),
                    holds: rep.holds(4.0),
                });
            }
        }
        let held = cases.iter().filter(|c| c.holds).count();

        let mut closed = Vec::new();
        for (h2, want) in [(1.0, 7.0 / 6.0), (0.0, 1.0 / 3.0)] {
            let rep = lemma1_check(&[1.0], &[1.0], &[h2], n_samples, &mut rng).expect("valid lemma instance");
            closed.push((rep.empirical_mean - want).abs() <= 4.0 * rep.std_error);
        }
        let closed_ok = closed.iter().all(|c| *c);
        let violations: Vec<String> = cases
            .iter()
            .filter(|c| !c.holds)
            .map(|c| format!("d={} mean {:.4} < bound {:.4}", c.dim, c.empirical_mean, c.bound))
            .collect();
        let mut detail = format!(
            "{held}/{} instances satisfy mean >= bound - 4 se; closed forms 7/6 and 1/3 {}",
            cases.len(),
            if closed_ok { "match" } else { "do not match" }
        );
        if !violations.is_empty() {
            detail.push_str(&format!("; violations: {}", violations.join("; ")));
        }
        (held == cases.len() && closed_ok, detail)
    });
    (outcome, cases)
}

/// Analytic log-likelihood gradient against central differences on random
/// small problems, plus interpolation of a near-noiseless posterior.
pub fn gp_numerics(instances: usize, seed: u64) -> CheckOutcome {
    timed("gp numerics", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..instances {
            let n = rng.random_range(2..=10);
            let d = rng.random_range(1..=5);
            let x: Vec<Vec<f64>> = (0..n).map(|_| uniform_vec(d, &mut rng)).collect();
            let w = normal_vec(d, &mut rng);
            let y: Vec<f64> = x
                .iter()
                .map(|p| p.iter().zip(&w).map(|(a, b)| (2.0 * a * b).sin()).sum::<f64>() + 0.1 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let hp = GpHyperparams::new(
                (0..d).map(|_| 10f64.powf(rng.random_range(-1.0..0.5))).collect(),
                10f64.powf(rng.random_range(-0.5..0.7)),
                10f64.powf(rng.random_range(-3.0..-1.0)),
            )
            .expect("sampled inside the boxes");
            let (_, grad) = log_marginal_likelihood(&x, &y, &hp).expect("well-posed instance");
            let theta = hp.to_log();
            let h = 1e-5;
            for k in 0..theta.len() {
                let at = |delta: f64| {
                    let mut t = theta.clone();
                    t[k] += delta;
                    log_marginal_likelihood(&x, &y, &GpHyperparams::from_log(&t)).expect("well-posed instance").0
                };
                let fd = (at(h) - at(-h)) / (2.0 * h);
                // below 1e-5 the difference quotient is dominated by cancellation
                worst = worst.max((fd - grad[k]).abs() / fd.abs().max(1e-5));
            }
        }

        let x: Vec<Vec<f64>> = (0..20).map(|_| uniform_vec(3, &mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|p| 7.0 * p[0] - 3.0 * p[1] * p[2] + (3.0 * p[2]).cos()).collect();
        let hp = GpHyperparams::new(vec![0.8; 3], 1.0, NOISE_VARIANCE_BOUNDS.0).expect("valid");
        let model = GpModel::with_hyperparams(&x, &y, hp).expect("well-posed model");
        let mean = model.predict_mean(&x).expect("valid queries");
        let interp = mean
            .iter()
            .zip(&y)
            .map(|(m, v)| (m - v).abs() / model.y_sd())
            .fold(0.0, f64::max);

        let passed = worst <= 1e-4 && interp <= 1e-2;
        let detail = format!(
            "{instances} gradient instances, max rel err {worst:.2e} (limit 1e-4); interpolation max |mu - y| = {interp:.2e} y_sd (limit 1e-2)"
        );
        (passed, detail)
    })
}

/// Three random objectives built from sinusoids and quadratics.
struct RandomProblem {
    dim: usize,
    centers: Vec<Vec<f64>>,
    freqs: Vec<Vec<f64>>,
}

impl RandomProblem {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let dim = rng.random_range(1..=6);
        Self {
            dim,
            centers: (0..3).map(|_| uniform_vec(dim, rng)).collect(),
            freqs: (0..3).map(|_| normal_vec(dim, rng)).collect(),
        }
    }
}

impl MoProblem for RandomProblem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_objectives(&self) -> usize {
        3
    }

    fn evaluate(&self, xs: &[Vec<f64>]) -> boids::Result<Vec<Vec<f64>>> {
        Ok(xs
            .iter()
            .map(|x| {
                (0..3)
                    .map(|k| {
                        let sq: f64 = x.iter().zip(&self.centers[k]).map(|(a, c)| (a - c).powi(2)).sum();
                        let wave: f64 = x.iter().zip(&self.freqs[k]).map(|(a, f)| (3.0 * a * f).sin()).sum();
                        -sq + 0.3 * wave
                    })
                    .collect()
            })
            .collect())
    }
}

/// First objective dominates the other two, which are constant.
struct SingleObjective;

impl SingleObjective {
    fn f(x: &[f64]) -> f64 {
        -((x[0] - 0.3).powi(2) + (x[1] + 0.6).powi(2)) + 0.1 * (5.0 * x[0]).sin()
    }
}

impl MoProblem for SingleObjective {
    fn dim(&self) -> usize {
        2
    }

    fn n_objectives(&self) -> usize {
        3
    }

    fn evaluate(&self, xs: &[Vec<f64>]) -> boids::Result<Vec<Vec<f64>>> {
        Ok(xs.iter().map(|x| vec![Self::f(x), 0.0, 0.0]).collect())
    }
}

/// Final fronts are pairwise non-dominated, a single-objective problem
/// reaches a random-search oracle, and seeded runs repeat bitwise.
pub fn nsga2_suite(instances: usize, seed: u64) -> CheckOutcome {
    timed("nsga2", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = Nsga2Params::default();
        let mut dominated = 0;
        let mut out_of_box = 0;
        for _ in 0..instances {
            let p = RandomProblem::new(&mut rng);
            let init = vec![uniform_vec(p.dim, &mut rng)];
            let res = nsga2(&p, &init, &params, &mut rng).expect("valid problem");
            let front = &res.front;
            if front
                .iter()
                .enumerate()
                .any(|(i, a)| front.iter().enumerate().any(|(j, b)| i != j && dominates(b, a)))
            {
                dominated += 1;
            }
            if res.set.iter().flatten().any(|v| !(-1.0..=1.0).contains(v)) {
                out_of_box += 1;
            }
        }

        let oracle = (0..1_000_000)
            .map(|_| SingleObjective::f(&uniform_vec(2, &mut rng)))
            .fold(f64::NEG_INFINITY, f64::max);
        let init = vec![uniform_vec(2, &mut rng)];
        let smoke = nsga2(&SingleObjective, &init, &params, &mut rng).expect("valid problem");
        let best = smoke.front.iter().map(|o| o[0]).fold(f64::NEG_INFINITY, f64::max);
        let smoke_ok = best >= oracle - 1e-2;

        let p = RandomProblem::new(&mut rng);
        let init = vec![uniform_vec(p.dim, &mut rng)];
        let a = nsga2(&p, &init, &params, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed)).expect("valid problem");
        let b = nsga2(&p, &init, &params, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed)).expect("valid problem");
        let bitwise = a.set.len() == b.set.len()
            && a.set.iter().flatten().zip(b.set.iter().flatten()).all(|(x, y)| x.to_bits() == y.to_bits())
            && a.front.iter().flatten().zip(b.front.iter().flatten()).all(|(x, y)| x.to_bits() == y.to_bits());

        let passed = dominated == 0 && out_of_box == 0 && smoke_ok && bitwise;
        let detail = format!(
            "{instances} instances: {dominated} fronts with dominated members, {out_of_box} out of box; smoke best {best:.6} vs oracle {oracle:.6}; determinism {}",
            if bitwise { "bitwise" } else { "broken" }
        );
        (passed, detail)
    })
}

/// Random chains of embedding expansions: every lifted target point must
/// project up to exactly the input-space point of its parent.
pub fn expansion_preservation(sequences: usize, seed: u64) -> CheckOutcome {
    timed("expansion preservation", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut checked = 0usize;
        let mut max_diff: f64 = 0.0;
        for _ in 0..sequences {
            let d = rng.random_range(2..=60);
            let start = rng.random_range(1..d);
            let b = rng.random_range(2..=4);
            let mut emb = Embedding::new(d, start, &mut rng).expect("valid embedding");
            let mut points: Vec<Vec<f64>> = (0..5).map(|_| uniform_vec(start, &mut rng)).collect();
            while emb.target_dim() < d {
                let (next, map) = emb.expand(b, &mut rng).expect("expandable");
                for p in &mut points {
                    let lifted = map.lift_point(p).expect("matching dim");
                    let before = emb.project_up(p).expect("matching dim");
                    let after = next.project_up(&lifted).expect("matching dim");
                    for (u, v) in before.iter().zip(&after) {
                        max_diff = max_diff.max((u - v).abs());
                    }
                    checked += 1;
                    *p = lifted;
                }
                emb = next;
            }
        }
        let passed = max_diff == 0.0;
        (
            passed,
            format!("{sequences} sequences, {checked} lifted points, max diff {max_diff:e}"),
        )
    })
}

/// Everything except the end-to-end benchmark runs.
pub fn property_suites(seed: u64) -> Vec<CheckOutcome> {
    vec![
        embedding_probability(8),
        lemma1_suite(100_000, seed, false).0,
        lemma1_suite(100_000, seed, true).0,
        gp_numerics(50, seed),
        nsga2_suite(100, seed),
        expansion_preservation(1000, seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_grid_small() {
        let o = embedding_probability(5);
        assert!(o.passed, "{}", o.line());
    }

    #[test]
    fn sign_consistent_lemma_holds() {
        let (o, cases) = lemma1_suite(10_000, 2, true);
        assert!(o.passed, "{}", o.line());
        assert_eq!(cases.len(), 20);
    }

    #[test]
    fn short_suites_pass() {
        for o in [gp_numerics(5, 1), nsga2_suite(3, 1), expansion_preservation(20, 1)] {
            assert!(o.passed, "{}", o.line());
        }
    }

    #[test]
    fn outcome_line_format() {
        let o = CheckOutcome {
            name: "x".into(),
            passed: false,
            detail: "why".into(),
            seconds: 1.0,
        };
        assert_eq!(o.line(), "[FAIL] x: why (1.0 s)");
    }
}
