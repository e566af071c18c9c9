//! Thompson-sampling choice among the guiding lines: one posterior draw
//! over a pooled candidate set, each line scored by its best candidate.

use rand::Rng;

use crate::error::{Error, Result};
use crate::surrogate::{GpModel, JOINT_SAMPLE_LIMIT};
use crate::swarm::GuidingLine;

/// Features used when the pool is too large for an exact joint draw.
pub const FALLBACK_FEATURES: usize = 1024;

const FALLBACK_CHUNK: usize = 4096;

/// Per-line candidate count: `min(100·d_A, 5000)/m`, at least 50.
pub fn default_candidates_per_line(target_dim: usize, m: usize) -> usize {
    ((100 * target_dim).min(5000) / m.max(1)).max(50)
}

/// One realization of the posterior over a finite pool, in standardized
/// objective units.
pub trait PoolSampler {
    fn draw<R: Rng + ?Sized>(&self, pool: &[Vec<f64>], rng: &mut R) -> Result<Vec<f64>>;
}

impl PoolSampler for GpModel {
    fn draw<R: Rng + ?Sized>(&self, pool: &[Vec<f64>], rng: &mut R) -> Result<Vec<f64>> {
        if pool.len() <= JOINT_SAMPLE_LIMIT {
            return self.joint_sample_standardized(pool, rng);
        }
        let path = self.sample_path(FALLBACK_FEATURES, rng)?;
        Ok(pool
            .chunks(FALLBACK_CHUNK)
            .flat_map(|c| path.values_standardized(c))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSelection {
    pub chosen_index: usize,
    /// Best negated standardized draw on each line.
    pub rewards: Vec<f64>,
    pub candidates_per_line: usize,
}

/// `n` stratified parameters over `[lo, hi]`, one uniform draw per stratum.
pub fn stratified_ts<R: Rng + ?Sized>(lo: f64, hi: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let w = (hi - lo) / n as f64;
    (0..n)
        .map(|k| {
            let u: f64 = rng.random();
            (lo + w * (k as f64 + u)).clamp(lo, hi)
        })
        .collect()
}

/// Index of the largest value, lowest index on ties.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn select_line<S: PoolSampler, R: Rng + ?Sized>(
    sampler: &S,
    lines: &[GuidingLine],
    n_cand: usize,
    rng: &mut R,
) -> Result<LineSelection> {
    if lines.is_empty() {
        return Err(Error::InvalidArgument("no lines to select from".into()));
    }
    if n_cand < 2 {
        return Err(Error::InvalidArgument(format!("n_cand = {n_cand} < 2")));
    }
    let mut pool = Vec::with_capacity(lines.len() * n_cand);
    for line in lines {
        let (lo, hi) = line.t_range();
        pool.extend(stratified_ts(lo, hi, n_cand, rng).into_iter().map(|t| line.point_at(t)));
    }
    let draw = sampler.draw(&pool, rng)?;
    if draw.len() != pool.len() {
        return Err(Error::DimensionMismatch {
            expected: pool.len(),
            got: draw.len(),
        });
    }
    let rewards: Vec<f64> = draw
        .chunks(n_cand)
        .map(|c| c.iter().fold(f64::NEG_INFINITY, |m, v| m.max(-v)))
        .collect();
    Ok(LineSelection {
        chosen_index: argmax_first(&rewards),
        rewards,
        candidates_per_line: n_cand,
    })
}

/// Uniform choice of a line, used when bandit selection is switched off.
pub fn select_random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> usize {
    rng.random_range(0..m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::GpHyperparams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Deterministic<F: Fn(&[f64]) -> f64>(F);

    impl<F: Fn(&[f64]) -> f64> PoolSampler for Deterministic<F> {
        fn draw<R: Rng + ?Sized>(&self, pool: &[Vec<f64>], _rng: &mut R) -> Result<Vec<f64>> {
            Ok(pool.iter().map(|p| (self.0)(p)).collect())
        }
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_lines(m: usize, d: usize, r: &mut ChaCha8Rng) -> Vec<GuidingLine> {
        (0..m)
            .map(|_| {
                let a: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..=1.0)).collect();
                let v: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..=1.0)).collect();
                GuidingLine::new(a, v).unwrap()
            })
            .collect()
    }

    fn model(d: usize, seed: u64) -> GpModel {
        let mut r = rng(seed);
        let x: Vec<Vec<f64>> = (0..15).map(|_| (0..d).map(|_| r.random_range(-1.0..=1.0)).collect()).collect();
        let y: Vec<f64> = x.iter().map(|p| p.iter().map(|v| v * v).sum()).collect();
        GpModel::with_hyperparams(&x, &y, GpHyperparams::new(vec![0.5; d], 1.0, 0.01).unwrap()).unwrap()
    }

    #[test]
    fn default_pool_size() {
        assert_eq!(default_candidates_per_line(1, 20), 50);
        assert_eq!(default_candidates_per_line(20, 20), 100);
        assert_eq!(default_candidates_per_line(100, 20), 250);
    }

    #[test]
    fn single_line_always_chosen() {
        let m = model(2, 1);
        let lines = random_lines(1, 2, &mut rng(2));
        for seed in 0..5 {
            let s = select_line(&m, &lines, 10, &mut rng(seed)).unwrap();
            assert_eq!(s.chosen_index, 0);
            assert_eq!(s.rewards.len(), 1);
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let lines = vec![GuidingLine::new(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap(); 3];
        let flat = Deterministic(|_: &[f64]| 0.25);
        let s = select_line(&flat, &lines, 8, &mut rng(0)).unwrap();
        assert_eq!(s.chosen_index, 0);
        assert!(s.rewards.iter().all(|r| (r - s.rewards[0]).abs() < 1e-12));
    }

    #[test]
    fn deterministic_surrogate_matches_brute_force() {
        let f = |x: &[f64]| (x[0] - 0.4).powi(2) + (x[1] + 0.2).powi(2);
        let lines = random_lines(6, 2, &mut rng(3));
        let s = select_line(&Deterministic(f), &lines, 20, &mut rng(4)).unwrap();
        // replay the same stratified pool
        let mut r = rng(4);
        let mut best = Vec::new();
        for line in &lines {
            let (lo, hi) = line.t_range();
            let m = stratified_ts(lo, hi, 20, &mut r)
                .into_iter()
                .map(|t| -f(&line.point_at(t)))
                .fold(f64::NEG_INFINITY, f64::max);
            best.push(m);
        }
        assert_eq!(s.rewards, best);
        assert_eq!(s.chosen_index, argmax_first(&best));
    }

    #[test]
    fn reproducible_and_consistent() {
        let m = model(3, 5);
        let lines = random_lines(5, 3, &mut rng(6));
        let a = select_line(&m, &lines, 12, &mut rng(7)).unwrap();
        let b = select_line(&m, &lines, 12, &mut rng(7)).unwrap();
        assert_eq!(a, b);
        let best = a.rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.rewards[a.chosen_index], best);
        assert!(select_line(&m, &lines, 1, &mut rng(7)).is_err());
        assert!(select_line(&m, &[], 10, &mut rng(7)).is_err());
    }

    #[test]
    fn stratified_covers_each_stratum() {
        let ts = stratified_ts(-1.0, 3.0, 4, &mut rng(8));
        for (k, t) in ts.iter().enumerate() {
            assert!(*t >= -1.0 + k as f64 && *t <= k as f64);
        }
        let pinned = stratified_ts(0.0, 0.0, 3, &mut rng(8));
        assert_eq!(pinned, vec![0.0; 3]);
    }

    #[test]
    fn random_selection_in_range() {
        let mut r = rng(9);
        let mut seen = [false; 4];
        for _ in 0..200 {
            seen[select_random(4, &mut r)] = true;
        }
        assert!(seen.iter().all(|s| *s));
    }
}
