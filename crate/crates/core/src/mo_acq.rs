//! NSGA-II over the box `[-1, 1]^dim` and the line-seeded acquisition
//! optimization built on it.
//!
//! All objectives are maximized.

use std::cmp::Ordering;

use rand::Rng;

use crate::bandit::argmax_first;
use crate::error::{Error, Result};
use crate::surrogate::SamplePath;
use crate::swarm::GuidingLine;

/// A vector-valued objective on `[-1, 1]^dim`, evaluated in batches.
pub trait MoProblem {
    fn dim(&self) -> usize;
    fn n_objectives(&self) -> usize;
    fn evaluate(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;
}

/// Scalar score to maximize.
pub trait Acquisition {
    fn dim(&self) -> usize;
    fn score(&self, xs: &[Vec<f64>]) -> Vec<f64>;
}

/// Thompson acquisition: the negated standardized sample path, so larger is
/// better for a minimization problem.
impl Acquisition for SamplePath {
    fn dim(&self) -> usize {
        SamplePath::dim(self)
    }

    fn score(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        self.values_standardized(xs).into_iter().map(|v| -v).collect()
    }
}

/// Wraps a plain function as an [`Acquisition`].
pub struct FnAcquisition<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64> Acquisition for FnAcquisition<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn score(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        xs.iter().map(|x| (self.f)(x)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nsga2Params {
    pub pop_size: usize,
    pub generations: usize,
    pub eta_c: f64,
    pub crossover_prob: f64,
    pub eta_m: f64,
}

impl Default for Nsga2Params {
    fn default() -> Self {
        Self {
            pop_size: 100,
            generations: 100,
            eta_c: 15.0,
            crossover_prob: 0.9,
            eta_m: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoResult {
    pub set: Vec<Vec<f64>>,
    pub front: Vec<Vec<f64>>,
}

/// `a` is at least as good as `b` everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

/// Fast non-dominated sorting; each front lists indices in ascending order.
pub fn nondominated_sort(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&points[i], &points[j]) {
                dominated_by_me[i].push(j);
                count[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                dominated_by_me[j].push(i);
                count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                count[j] -= 1;
                if count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance within one front: extremes of every objective get
/// `+∞`, interior points the sum of range-normalized neighbour gaps.
pub fn crowding_distance(front: &[Vec<f64>]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let k = front[0].len();
    let mut dist = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for obj in 0..k {
        order.sort_by(|&a, &b| front[a][obj].total_cmp(&front[b][obj]).then(a.cmp(&b)));
        let lo = front[order[0]][obj];
        let hi = front[order[n - 1]][obj];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            let gap = front[order[w + 1]][obj] - front[order[w - 1]][obj];
            dist[order[w]] += gap / range;
        }
    }
    dist
}

fn uniform_point<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Rank and crowding of every individual in a population.
fn rank_and_crowd(objs: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0; objs.len()];
    let mut crowd = vec![0.0; objs.len()];
    for (r, front) in nondominated_sort(objs).iter().enumerate() {
        let f: Vec<Vec<f64>> = front.iter().map(|&i| objs[i].clone()).collect();
        for (&i, c) in front.iter().zip(crowding_distance(&f)) {
            rank[i] = r;
            crowd[i] = c;
        }
    }
    (rank, crowd)
}

/// Elitist truncation to `keep` individuals by rank, then crowding.
fn survive(objs: &[Vec<f64>], keep: usize) -> Vec<usize> {
    let mut chosen = Vec::with_capacity(keep);
    for front in nondominated_sort(objs) {
        if chosen.len() + front.len() <= keep {
            chosen.extend(front);
            if chosen.len() == keep {
                break;
            }
            continue;
        }
        let f: Vec<Vec<f64>> = front.iter().map(|&i| objs[i].clone()).collect();
        let cd = crowding_distance(&f);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| cd[b].total_cmp(&cd[a]).then(a.cmp(&b)));
        chosen.extend(order.into_iter().take(keep - chosen.len()).map(|k| front[k]));
        break;
    }
    chosen
}

fn sbx_pair<R: Rng + ?Sized>(p1: &[f64], p2: &[f64], eta: f64, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = (-1.0, 1.0);
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    for j in 0..p1.len() {
        if rng.random::<f64>() > 0.5 || (p1[j] - p2[j]).abs() <= 1e-14 {
            continue;
        }
        let (y1, y2) = if p1[j] < p2[j] { (p1[j], p2[j]) } else { (p2[j], p1[j]) };
        let u: f64 = rng.random();
        let betaq = |beta: f64| {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        let span = y2 - y1;
        let a = (0.5 * ((y1 + y2) - betaq(1.0 + 2.0 * (y1 - lo) / span) * span)).clamp(lo, hi);
        let b = (0.5 * ((y1 + y2) + betaq(1.0 + 2.0 * (hi - y2) / span) * span)).clamp(lo, hi);
        if rng.random::<f64>() < 0.5 {
            c1[j] = b;
            c2[j] = a;
        } else {
            c1[j] = a;
            c2[j] = b;
        }
    }
    (c1, c2)
}

fn polynomial_mutation<R: Rng + ?Sized>(x: &mut [f64], eta: f64, rng: &mut R) {
    let (lo, hi) = (-1.0, 1.0);
    let p = 1.0 / x.len() as f64;
    let pow = 1.0 / (eta + 1.0);
    for v in x.iter_mut() {
        if rng.random::<f64>() >= p {
            continue;
        }
        let d1 = (*v - lo) / (hi - lo);
        let d2 = (hi - *v) / (hi - lo);
        let u: f64 = rng.random();
        let dq = if u < 0.5 {
            let val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
            val.powf(pow) - 1.0
        } else {
            let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
            1.0 - val.powf(pow)
        };
        *v = (*v + dq * (hi - lo)).clamp(lo, hi);
    }
}

fn tournament<R: Rng + ?Sized>(rank: &[usize], crowd: &[f64], rng: &mut R) -> usize {
    let a = rng.random_range(0..rank.len());
    let b = rng.random_range(0..rank.len());
    match rank[a].cmp(&rank[b]) {
        Ordering::Less => a,
        Ordering::Greater => b,
        Ordering::Equal if crowd[b] > crowd[a] => b,
        Ordering::Equal => a,
    }
}

fn first_front(xs: &[Vec<f64>], objs: &[Vec<f64>]) -> ParetoResult {
    let front = nondominated_sort(objs).swap_remove(0);
    ParetoResult {
        set: front.iter().map(|&i| xs[i].clone()).collect(),
        front: front.iter().map(|&i| objs[i].clone()).collect(),
    }
}

fn check_objectives(objs: &[Vec<f64>], n: usize, k: usize) -> Result<()> {
    if objs.len() != n || objs.iter().any(|o| o.len() != k) {
        return Err(Error::InvalidArgument("objective evaluator returned a malformed batch".into()));
    }
    if objs.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("objective values"));
    }
    Ok(())
}

/// Runs NSGA-II and returns the first front of the final population.
pub fn nsga2<P: MoProblem, R: Rng + ?Sized>(
    problem: &P,
    init: &[Vec<f64>],
    params: &Nsga2Params,
    rng: &mut R,
) -> Result<ParetoResult> {
    nsga2_observed(problem, init, params, rng, |_, _| {})
}

/// [`nsga2`] with a callback receiving `(generation, first-front objectives)`
/// after every survival step.
pub fn nsga2_observed<P, R, F>(
    problem: &P,
    init: &[Vec<f64>],
    params: &Nsga2Params,
    rng: &mut R,
    mut observe: F,
) -> Result<ParetoResult>
where
    P: MoProblem,
    R: Rng + ?Sized,
    F: FnMut(usize, &[Vec<f64>]),
{
    let n = params.pop_size;
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!("pop_size = {n} must be even and at least 4")));
    }
    if init.is_empty() {
        return Err(Error::InvalidArgument("empty initial population".into()));
    }
    let dim = problem.dim();
    let k = problem.n_objectives();
    for x in init {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::InvalidArgument("initial individual outside [-1, 1]".into()));
        }
    }

    let mut pop = init.to_vec();
    let mut objs = problem.evaluate(&pop)?;
    check_objectives(&objs, pop.len(), k)?;
    if params.generations == 0 {
        return Ok(first_front(&pop, &objs));
    }
    if pop.len() > n {
        let keep = survive(&objs, n);
        pop = keep.iter().map(|&i| pop[i].clone()).collect();
        objs = keep.iter().map(|&i| objs[i].clone()).collect();
    } else if pop.len() < n {
        let extra: Vec<Vec<f64>> = (pop.len()..n).map(|_| uniform_point(dim, rng)).collect();
        let extra_objs = problem.evaluate(&extra)?;
        check_objectives(&extra_objs, extra.len(), k)?;
        pop.extend(extra);
        objs.extend(extra_objs);
    }

    for gen in 0..params.generations {
        let (rank, crowd) = rank_and_crowd(&objs);
        let mut offspring = Vec::with_capacity(n);
        while offspring.len() < n {
            let a = tournament(&rank, &crowd, rng);
            let b = tournament(&rank, &crowd, rng);
            let (mut c1, mut c2) = if rng.random::<f64>() < params.crossover_prob {
                sbx_pair(&pop[a], &pop[b], params.eta_c, rng)
            } else {
                (pop[a].clone(), pop[b].clone())
            };
            polynomial_mutation(&mut c1, params.eta_m, rng);
            polynomial_mutation(&mut c2, params.eta_m, rng);
            offspring.push(c1);
            offspring.push(c2);
        }
        let off_objs = problem.evaluate(&offspring)?;
        check_objectives(&off_objs, offspring.len(), k)?;
        pop.extend(offspring);
        objs.extend(off_objs);
        let keep = survive(&objs, n);
        pop = keep.iter().map(|&i| pop[i].clone()).collect();
        objs = keep.iter().map(|&i| objs[i].clone()).collect();
        let front = nondominated_sort(&objs).swap_remove(0);
        let f: Vec<Vec<f64>> = front.iter().map(|&i| objs[i].clone()).collect();
        observe(gen + 1, &f);
    }
    Ok(first_front(&pop, &objs))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Acquisition plus negated distances to the personal and global
/// incumbents.
struct LineProblem<'a, A: Acquisition> {
    acq: &'a A,
    p_inc: &'a [f64],
    g_inc: &'a [f64],
}

impl<A: Acquisition> MoProblem for LineProblem<'_, A> {
    fn dim(&self) -> usize {
        self.acq.dim()
    }

    fn n_objectives(&self) -> usize {
        3
    }

    fn evaluate(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .acq
            .score(xs)
            .into_iter()
            .zip(xs)
            .map(|(a, x)| vec![a, -distance(x, self.p_inc), -distance(x, self.g_inc)])
            .collect())
    }
}

struct BoxProblem<'a, A: Acquisition>(&'a A);

impl<A: Acquisition> MoProblem for BoxProblem<'_, A> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn n_objectives(&self) -> usize {
        1
    }

    fn evaluate(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(self.0.score(xs).into_iter().map(|a| vec![a]).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub point: Vec<f64>,
    pub acquisition: f64,
    pub pareto: ParetoResult,
}

/// Pareto member with the best acquisition (objective 0); ties go to the
/// one nearest the global incumbent.
pub fn pick_best(pareto: &ParetoResult, g_inc: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..pareto.set.len() {
        let (a, b) = (pareto.front[i][0], pareto.front[best][0]);
        if a > b || (a == b && distance(&pareto.set[i], g_inc) < distance(&pareto.set[best], g_inc)) {
            best = i;
        }
    }
    best
}

/// Proposes the next target-space point along `line`: NSGA-II on
/// (acquisition, −‖x − p‖, −‖x − g‖) seeded half on the line and half
/// uniformly in the box, then the Pareto member with the best acquisition.
pub fn line_opt<A: Acquisition, R: Rng + ?Sized>(
    acq: &A,
    line: &GuidingLine,
    p_inc: &[f64],
    g_inc: &[f64],
    params: &Nsga2Params,
    rng: &mut R,
) -> Result<Proposal> {
    let dim = acq.dim();
    for v in [line.anchor(), p_inc, g_inc] {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
    }
    let (lo, hi) = line.t_range();
    let on_line = params.pop_size / 2;
    let mut init: Vec<Vec<f64>> = (0..on_line)
        .map(|_| {
            let t = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            line.point_at(t)
        })
        .collect();
    init.extend((on_line..params.pop_size).map(|_| uniform_point(dim, rng)));
    let problem = LineProblem { acq, p_inc, g_inc };
    let pareto = nsga2(&problem, &init, params, rng)?;
    let i = pick_best(&pareto, g_inc);
    Ok(Proposal {
        point: pareto.set[i].clone(),
        acquisition: pareto.front[i][0],
        pareto,
    })
}

/// Maximizes the acquisition over the whole box (no line seeding and no
/// incumbent objectives).
pub fn box_opt<A: Acquisition, R: Rng + ?Sized>(acq: &A, params: &Nsga2Params, rng: &mut R) -> Result<Proposal> {
    let dim = acq.dim();
    let init: Vec<Vec<f64>> = (0..params.pop_size).map(|_| uniform_point(dim, rng)).collect();
    let pareto = nsga2(&BoxProblem(acq), &init, params, rng)?;
    let i = argmax_first(&pareto.front.iter().map(|f| f[0]).collect::<Vec<_>>());
    Ok(Proposal {
        point: pareto.set[i].clone(),
        acquisition: pareto.front[i][0],
        pareto,
    })
}
