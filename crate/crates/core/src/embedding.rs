//! Sparse signed subspace embeddings.
//!
//! Each input dimension is assigned to exactly one target dimension with a
//! random sign, so the up-projection `x = Sᵀ x_A` is a signed gather. An
//! embedding can be expanded by splitting every target dimension into child
//! bins; points in the old target space are lifted by copying the parent
//! coordinate into each child, which leaves their up-projection unchanged.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random::<bool>() {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Assignment {
    /// 0-based target dimension.
    pub target: usize,
    pub sign: Sign,
}

/// Sparse matrix `S ∈ {0, ±1}^{d_A × d}` with one non-zero per column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Embedding {
    target_dim: usize,
    assign: Vec<Assignment>,
}

/// Which new target dimensions each old target dimension was split into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionMap {
    old_dim: usize,
    new_dim: usize,
    child_of: Vec<Vec<usize>>,
}

impl Embedding {
    /// Random embedding: every input dimension goes to a uniformly random
    /// target dimension with a uniformly random sign. Empty target
    /// dimensions are then filled by moving a random member out of the
    /// currently largest bin.
    pub fn new<R: Rng + ?Sized>(d: usize, target_dim: usize, rng: &mut R) -> Result<Self> {
        if target_dim < 1 || target_dim > d {
            return Err(Error::InvalidArgument(format!(
                "target dimension {target_dim} must lie in 1..={d}"
            )));
        }
        let mut assign: Vec<Assignment> = (0..d)
            .map(|_| Assignment {
                target: rng.random_range(0..target_dim),
                sign: Sign::random(rng),
            })
            .collect();

        let mut counts = vec![0usize; target_dim];
        for a in &assign {
            counts[a.target] += 1;
        }
        while let Some(empty) = counts.iter().position(|&c| c == 0) {
            let largest = (0..target_dim)
                .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
                .expect("target_dim >= 1");
            let members: Vec<usize> = (0..d).filter(|&i| assign[i].target == largest).collect();
            let moved = members[rng.random_range(0..members.len())];
            assign[moved].target = empty;
            counts[largest] -= 1;
            counts[empty] += 1;
        }
        Ok(Self { target_dim, assign })
    }

    /// `S = I`: dimension `i` maps to target `i` with a positive sign.
    pub fn identity(d: usize) -> Self {
        Self {
            target_dim: d,
            assign: (0..d)
                .map(|target| Assignment {
                    target,
                    sign: Sign::Plus,
                })
                .collect(),
        }
    }

    pub fn from_assignments(target_dim: usize, assign: Vec<Assignment>) -> Result<Self> {
        let d = assign.len();
        if target_dim < 1 || target_dim > d {
            return Err(Error::InvalidArgument(format!(
                "target dimension {target_dim} must lie in 1..={d}"
            )));
        }
        let mut seen = vec![false; target_dim];
        for a in &assign {
            if a.target >= target_dim {
                return Err(Error::InvalidArgument(format!(
                    "target {} is outside 0..{target_dim}",
                    a.target
                )));
            }
            seen[a.target] = true;
        }
        if let Some(empty) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!("target dimension {empty} is empty")));
        }
        Ok(Self { target_dim, assign })
    }

    pub fn input_dim(&self) -> usize {
        self.assign.len()
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn assignments(&self) -> &[Assignment] {
        &self.assign
    }

    /// Input dimensions assigned to each target dimension, in increasing order.
    pub fn bins(&self) -> Vec<Vec<usize>> {
        let mut bins = vec![Vec::new(); self.target_dim];
        for (i, a) in self.assign.iter().enumerate() {
            bins[a.target].push(i);
        }
        bins
    }

    /// `Sᵀ x_A`: coordinate `i` is `s_i · x_A[t_i]`.
    pub fn project_up(&self, x_target: &[f64]) -> Result<Vec<f64>> {
        if x_target.len() != self.target_dim {
            return Err(Error::DimensionMismatch {
                expected: self.target_dim,
                got: x_target.len(),
            });
        }
        Ok(self
            .assign
            .iter()
            .map(|a| a.sign.value() * x_target[a.target])
            .collect())
    }

    /// Splits each target dimension into `min(b, bin size)` children. The
    /// members of a bin are shuffled and cut into near-equal contiguous
    /// chunks. Parents are visited in random order so that, should the
    /// total ever exceed `d`, the earlier ones get split first. Signs are
    /// inherited.
    pub fn expand<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> Result<(Embedding, ExpansionMap)> {
        let d = self.input_dim();
        if self.target_dim >= d {
            return Err(Error::InvalidArgument(
                "embedding already spans the full input dimension".into(),
            ));
        }
        if b < 2 {
            return Err(Error::InvalidArgument(format!("bin size {b} must be >= 2")));
        }
        let bins = self.bins();
        let mut order: Vec<usize> = (0..self.target_dim).collect();
        order.shuffle(rng);

        let mut n_children = vec![1usize; self.target_dim];
        let mut total = self.target_dim;
        for &p in &order {
            let extra = (b.min(bins[p].len()) - 1).min(d - total);
            n_children[p] += extra;
            total += extra;
        }

        let mut assign = self.assign.clone();
        let mut child_of = Vec::with_capacity(self.target_dim);
        let mut next = 0usize;
        for (p, bin) in bins.iter().enumerate() {
            let k = n_children[p];
            let mut members = bin.clone();
            members.shuffle(rng);
            let base = members.len() / k;
            let extra = members.len() % k;
            let mut start = 0;
            let mut children = Vec::with_capacity(k);
            for c in 0..k {
                let len = base + usize::from(c < extra);
                for &i in &members[start..start + len] {
                    assign[i].target = next;
                }
                children.push(next);
                next += 1;
                start += len;
            }
            child_of.push(children);
        }
        debug_assert_eq!(next, total);
        Ok((
            Embedding {
                target_dim: total,
                assign,
            },
            ExpansionMap {
                old_dim: self.target_dim,
                new_dim: total,
                child_of,
            },
        ))
    }

    /// One line per input dimension: `index target sign` (0-based indices,
    /// sign `+1` or `-1`), after a `# embedding d=<d> target_dim=<d_A>` header.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# embedding d={} target_dim={}\n",
            self.input_dim(),
            self.target_dim
        );
        for (i, a) in self.assign.iter().enumerate() {
            let s = match a.sign {
                Sign::Plus => "+1",
                Sign::Minus => "-1",
            };
            let _ = writeln!(out, "{i} {} {s}", a.target);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut target_dim = None;
        let mut assign = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                for tok in header.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("target_dim=") {
                        target_dim = Some(v.parse::<usize>().map_err(|e| Error::Parse {
                            line: line_no,
                            reason: e.to_string(),
                        })?);
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse_err = |reason: String| Error::Parse {
                line: line_no,
                reason,
            };
            if fields.len() != 3 {
                return Err(parse_err(format!("expected 3 fields, got {}", fields.len())));
            }
            let index: usize = fields[0].parse().map_err(|e| parse_err(format!("{e}")))?;
            if index != assign.len() {
                return Err(parse_err(format!("expected index {}, got {index}", assign.len())));
            }
            let target: usize = fields[1].parse().map_err(|e| parse_err(format!("{e}")))?;
            let sign = match fields[2] {
                "+1" | "1" => Sign::Plus,
                "-1" => Sign::Minus,
                other => return Err(parse_err(format!("bad sign `{other}`"))),
            };
            assign.push(Assignment { target, sign });
        }
        let target_dim = match target_dim {
            Some(t) => t,
            None => assign.iter().map(|a| a.target + 1).max().unwrap_or(0),
        };
        Self::from_assignments(target_dim, assign)
    }
}

impl ExpansionMap {
    pub fn old_dim(&self) -> usize {
        self.old_dim
    }

    pub fn new_dim(&self) -> usize {
        self.new_dim
    }

    pub fn children(&self, parent: usize) -> &[usize] {
        &self.child_of[parent]
    }

    /// Copies every parent coordinate into each of its children.
    pub fn lift_point(&self, x_old: &[f64]) -> Result<Vec<f64>> {
        if x_old.len() != self.old_dim {
            return Err(Error::DimensionMismatch {
                expected: self.old_dim,
                got: x_old.len(),
            });
        }
        let mut out = vec![0.0; self.new_dim];
        for (p, children) in self.child_of.iter().enumerate() {
            for &c in children {
                out[c] = x_old[p];
            }
        }
        Ok(out)
    }
}

/// Probability that a balanced random embedding of `d` input dimensions
/// into `target_dim` bins places `d_e` effective dimensions in distinct
/// bins, i.e. contains the optimum of a problem with `d_e` effective
/// dimensions.
///
/// With `α = ⌊d/d_A⌋` and `β = ⌈d/d_A⌉` there are `d_A(1+α) − d` bins of
/// size `α` and `d − d_A·α` bins of size `β`.
pub fn success_probability(d: usize, target_dim: usize, d_e: usize) -> Result<f64> {
    check_probability_args(d, target_dim, d_e)?;
    let (d, da, de) = (d as i64, target_dim as i64, d_e as i64);
    let alpha = d / da;
    let beta = (d + da - 1) / da;
    let n_small = da * (1 + alpha) - d;
    let n_large = d - da * alpha;

    if let Some(p) = exact_probability(d, de, alpha, beta, n_small, n_large) {
        return Ok(p);
    }
    let ln_total = ln_binom(d, de).expect("0 <= d_e <= d");
    let mut p = 0.0;
    for i in 0..=de {
        let (Some(a), Some(b)) = (ln_binom(n_small, i), ln_binom(n_large, de - i)) else {
            continue;
        };
        let ln_term = a + b + i as f64 * (alpha as f64).ln() + (de - i) as f64 * (beta as f64).ln();
        p += (ln_term - ln_total).exp();
    }
    Ok(p.clamp(0.0, 1.0))
}

fn check_probability_args(d: usize, target_dim: usize, d_e: usize) -> Result<()> {
    if target_dim < 1 || target_dim > d {
        return Err(Error::InvalidArgument(format!(
            "target dimension {target_dim} must lie in 1..={d}"
        )));
    }
    if d_e > d {
        return Err(Error::InvalidArgument(format!(
            "effective dimension {d_e} exceeds input dimension {d}"
        )));
    }
    Ok(())
}

/// Integer evaluation; `None` if any intermediate overflows `u128`.
fn exact_probability(d: i64, de: i64, alpha: i64, beta: i64, n_small: i64, n_large: i64) -> Option<f64> {
    let total = binom_u128(d, de)?;
    let mut favourable: u128 = 0;
    for i in 0..=de {
        let a = binom_u128(n_small, i)?;
        let b = binom_u128(n_large, de - i)?;
        if a == 0 || b == 0 {
            continue;
        }
        let term = a
            .checked_mul(pow_u128(alpha, i)?)?
            .checked_mul(b)?
            .checked_mul(pow_u128(beta, de - i)?)?;
        favourable = favourable.checked_add(term)?;
    }
    Some(favourable as f64 / total as f64)
}

fn pow_u128(base: i64, exp: i64) -> Option<u128> {
    (base as u128).checked_pow(u32::try_from(exp).ok()?)
}

/// `C(n, k)`, zero when `n < 0`, `k < 0` or `k > n`.
fn binom_u128(n: i64, k: i64) -> Option<u128> {
    if n < 0 || k < 0 || k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 1..=k {
        acc = acc.checked_mul((n - k + j) as u128)? / j as u128;
    }
    Some(acc)
}

/// `ln C(n, k)`; `None` encodes a zero coefficient.
fn ln_binom(n: i64, k: i64) -> Option<f64> {
    if n < 0 || k < 0 || k > n {
        return None;
    }
    let k = k.min(n - k);
    Some((1..=k).map(|j| ((n - k + j) as f64 / j as f64).ln()).sum())
}

/// Largest `d` accepted by [`success_probability_oracle`].
pub const ORACLE_MAX_D: usize = 12;

/// Exact success probability by enumerating every assignment of the `d`
/// input dimensions to `target_dim` bins whose sizes are as equal as
/// possible, counting those that put dimensions `0..d_e` in distinct bins.
pub fn success_probability_oracle(d: usize, target_dim: usize, d_e: usize) -> Result<f64> {
    check_probability_args(d, target_dim, d_e)?;
    if d > ORACLE_MAX_D {
        return Err(Error::InvalidArgument(format!(
            "enumeration oracle is limited to d <= {ORACLE_MAX_D}, got {d}"
        )));
    }
    let alpha = d / target_dim;
    let beta = d.div_ceil(target_dim);
    let n_large = d - target_dim * alpha;
    let mut counts = vec![0usize; target_dim];
    let mut used = Vec::with_capacity(d_e);
    let (total, favourable) = enumerate_balanced(
        0,
        d,
        d_e,
        alpha,
        beta,
        n_large,
        0,
        &mut counts,
        &mut used,
        true,
    );
    Ok(favourable as f64 / total as f64)
}

#[allow(clippy::too_many_arguments)]
fn enumerate_balanced(
    dim: usize,
    d: usize,
    d_e: usize,
    alpha: usize,
    beta: usize,
    n_large: usize,
    large_used: usize,
    counts: &mut [usize],
    used: &mut Vec<usize>,
    distinct: bool,
) -> (u64, u64) {
    if dim == d {
        let ok = counts.iter().all(|&c| c == alpha || c == beta);
        return if ok { (1, u64::from(distinct)) } else { (0, 0) };
    }
    let deficit: usize = counts.iter().map(|&c| alpha.saturating_sub(c)).sum();
    if deficit > d - dim {
        return (0, 0);
    }
    let mut total = 0;
    let mut favourable = 0;
    for t in 0..counts.len() {
        let c = counts[t];
        let grows_large = c == alpha && beta > alpha;
        if c >= beta || (grows_large && large_used == n_large) {
            continue;
        }
        let still_distinct = if dim < d_e {
            distinct && !used.contains(&t)
        } else {
            distinct
        };
        counts[t] += 1;
        if dim < d_e {
            used.push(t);
        }
        let (a, b) = enumerate_balanced(
            dim + 1,
            d,
            d_e,
            alpha,
            beta,
            n_large,
            large_used + usize::from(grows_large),
            counts,
            used,
            still_distinct,
        );
        if dim < d_e {
            used.pop();
        }
        counts[t] -= 1;
        total += a;
        favourable += b;
    }
    (total, favourable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn square_embedding_is_a_signed_permutation() {
        let e = Embedding::new(5, 5, &mut rng(1)).unwrap();
        assert!(e.bins().iter().all(|b| b.len() == 1));
    }

    #[test]
    fn single_bin() {
        let e = Embedding::new(3, 1, &mut rng(2)).unwrap();
        assert!(e.assignments().iter().all(|a| a.target == 0));
    }

    #[test]
    fn construction_never_leaves_empty_bins() {
        let mut r = rng(3);
        for _ in 0..1000 {
            let e = Embedding::new(100, 10, &mut r).unwrap();
            let bins = e.bins();
            assert!(bins.iter().all(|b| !b.is_empty()));
            assert_eq!(bins.iter().map(Vec::len).sum::<usize>(), 100);
        }
    }

    #[test]
    fn construction_errors() {
        assert!(Embedding::new(3, 4, &mut rng(0)).is_err());
        assert!(Embedding::new(3, 0, &mut rng(0)).is_err());
    }

    #[test]
    fn project_up_by_definition() {
        let e = Embedding::from_assignments(
            2,
            vec![
                Assignment { target: 0, sign: Sign::Plus },
                Assignment { target: 1, sign: Sign::Plus },
                Assignment { target: 0, sign: Sign::Minus },
            ],
        )
        .unwrap();
        assert_eq!(e.project_up(&[0.5, -1.0]).unwrap(), vec![0.5, -1.0, -0.5]);
        assert_eq!(e.project_up(&[0.0, 0.0]).unwrap(), vec![0.0; 3]);
        assert!(matches!(
            e.project_up(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        let id = Embedding::identity(4);
        assert_eq!(id.project_up(&[0.1, 0.2, 0.3, 0.4]).unwrap(), vec![0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn expand_full_split() {
        let assign = (0..9)
            .map(|i| Assignment { target: i / 3, sign: Sign::Plus })
            .collect();
        let e = Embedding::from_assignments(3, assign).unwrap();
        let (n, map) = e.expand(3, &mut rng(4)).unwrap();
        assert_eq!(n.target_dim(), 9);
        assert!(n.bins().iter().all(|b| b.len() == 1));
        assert_eq!(map.old_dim(), 3);
        assert_eq!(map.new_dim(), 9);
        for p in 0..3 {
            assert_eq!(map.children(p).len(), 3);
        }
    }

    #[test]
    fn expand_singleton_and_cap() {
        let e = Embedding::from_assignments(
            2,
            vec![
                Assignment { target: 0, sign: Sign::Plus },
                Assignment { target: 1, sign: Sign::Minus },
                Assignment { target: 1, sign: Sign::Plus },
            ],
        )
        .unwrap();
        let (n, map) = e.expand(3, &mut rng(5)).unwrap();
        assert_eq!(map.children(0).len(), 1);
        assert_eq!(map.children(1).len(), 2);
        assert_eq!(n.target_dim(), 3);

        let e = Embedding::from_assignments(
            2,
            (0..4).map(|i| Assignment { target: i % 2, sign: Sign::Plus }).collect(),
        )
        .unwrap();
        let (n, _) = e.expand(3, &mut rng(6)).unwrap();
        assert_eq!(n.target_dim(), 4);
        assert!(n.expand(3, &mut rng(6)).is_err());
    }

    #[test]
    fn expand_preserves_signs() {
        let e = Embedding::new(30, 4, &mut rng(7)).unwrap();
        let (n, _) = e.expand(3, &mut rng(8)).unwrap();
        for (a, b) in e.assignments().iter().zip(n.assignments()) {
            assert_eq!(a.sign, b.sign);
        }
    }

    #[test]
    fn lift_copies_parents() {
        let map = ExpansionMap {
            old_dim: 2,
            new_dim: 3,
            child_of: vec![vec![0, 1], vec![2]],
        };
        assert_eq!(map.lift_point(&[0.3, -0.7]).unwrap(), vec![0.3, 0.3, -0.7]);
        assert_eq!(map.lift_point(&[0.0, 0.0]).unwrap(), vec![0.0; 3]);
        assert!(map.lift_point(&[1.0]).is_err());
    }

    #[test]
    fn lift_preserves_projection_exactly() {
        let mut r = rng(9);
        let e = Embedding::new(40, 3, &mut r).unwrap();
        let (n, map) = e.expand(3, &mut r).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..=1.0)).collect();
            let before = e.project_up(&x).unwrap();
            let after = n.project_up(&map.lift_point(&x).unwrap()).unwrap();
            assert_eq!(before, after);
        }
    }

    #[test]
    fn text_round_trip() {
        let e = Embedding::new(17, 5, &mut rng(10)).unwrap();
        let text = e.to_text();
        assert_eq!(text.lines().count(), 18);
        assert_eq!(Embedding::from_text(&text).unwrap(), e);
        assert!(Embedding::from_text("0 0 +1\n2 0 -1\n").is_err());
        assert!(Embedding::from_text("0 0 x\n").is_err());
    }

    #[test]
    fn probability_special_cases() {
        for d in 1..20 {
            for de in 0..=d {
                assert_eq!(success_probability(d, d, de).unwrap(), 1.0);
            }
            for da in 1..=d {
                assert_eq!(success_probability(d, da, 0).unwrap(), 1.0);
            }
        }
        assert!((success_probability(4, 2, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(success_probability(4, 5, 1).is_err());
        assert!(success_probability(4, 2, 5).is_err());
    }

    #[test]
    fn probability_large_dimensions_stay_in_range() {
        for &(d, da, de) in &[(500, 10, 2), (500, 50, 6), (1000, 999, 30), (3000, 100, 50), (3000, 1, 1)] {
            let p = success_probability(d, da, de).unwrap();
            assert!((0.0..=1.0).contains(&p), "{d} {da} {de} -> {p}");
        }
        // equal-size bins: C(d_A, d_e) α^{d_e} / C(d, d_e)
        let p = success_probability(500, 50, 2).unwrap();
        let expect = (50.0 * 49.0 / 2.0) * 100.0 / (500.0 * 499.0 / 2.0);
        assert!((p - expect).abs() < 1e-12);
        // the log-space fallback agrees with the integer path near the switch-over
        let exact = success_probability(90, 7, 5).unwrap();
        let (d, da, de) = (90i64, 7i64, 5i64);
        let alpha = d / da;
        let beta = alpha + 1;
        let mut logp = 0.0;
        for i in 0..=de {
            if let (Some(a), Some(b)) = (ln_binom(da * (1 + alpha) - d, i), ln_binom(d - da * alpha, de - i)) {
                logp += (a + b + i as f64 * (alpha as f64).ln() + (de - i) as f64 * (beta as f64).ln()
                    - ln_binom(d, de).unwrap())
                .exp();
            }
        }
        assert!((exact - logp).abs() < 1e-12);
    }

    #[test]
    fn oracle_small_cases() {
        assert_eq!(success_probability_oracle(2, 2, 2).unwrap(), 1.0);
        assert_eq!(success_probability_oracle(4, 2, 1).unwrap(), 1.0);
        assert!((success_probability_oracle(4, 2, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(success_probability_oracle(13, 2, 1).is_err());
    }

    #[test]
    fn closed_form_matches_enumeration() {
        for d in 1..=8 {
            for da in 1..=d {
                for de in 0..=3.min(d) {
                    let p = success_probability(d, da, de).unwrap();
                    let q = success_probability_oracle(d, da, de).unwrap();
                    assert!((p - q).abs() <= 1e-12, "d={d} d_A={da} d_e={de}: {p} vs {q}");
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn project_up_is_linear(seed in 0u64..1000, da in 1usize..8) {
                let mut r = rng(seed);
                let e = Embedding::new(12, da, &mut r).unwrap();
                let x: Vec<f64> = (0..da).map(|_| r.random_range(-0.5..=0.5)).collect();
                let y: Vec<f64> = (0..da).map(|_| r.random_range(-0.5..=0.5)).collect();
                let s: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
                let lhs = e.project_up(&s).unwrap();
                let px = e.project_up(&x).unwrap();
                let py = e.project_up(&y).unwrap();
                for i in 0..12 {
                    prop_assert!((lhs[i] - px[i] - py[i]).abs() <= 1e-12);
                }
            }

            #[test]
            fn expansion_conserves_dims(seed in 0u64..1000, d in 2usize..60, b in 2usize..5) {
                let mut r = rng(seed);
                let da = r.random_range(1..d);
                let e = Embedding::new(d, da, &mut r).unwrap();
                let (n, map) = e.expand(b, &mut r).unwrap();
                let bins = n.bins();
                prop_assert!(bins.iter().all(|bin| !bin.is_empty()));
                prop_assert_eq!(bins.iter().map(Vec::len).sum::<usize>(), d);
                prop_assert!(n.target_dim() <= d);
                for (p, old_bin) in e.bins().iter().enumerate() {
                    let k = map.children(p).len();
                    prop_assert!(k >= 1 && k <= b.min(old_bin.len()));
                }
            }

            #[test]
            fn probability_in_unit_interval(d in 1usize..200, seed in 0u64..1000) {
                let mut r = rng(seed);
                let da = r.random_range(1..=d);
                let de = r.random_range(0..=d.min(20));
                let p = success_probability(d, da, de).unwrap();
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }
}
