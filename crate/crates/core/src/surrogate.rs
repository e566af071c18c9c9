//! Gaussian-process surrogate: Matérn-5/2 ARD kernel, homoskedastic noise,
//! type-II maximum likelihood inside fixed hyperparameter boxes, exact joint
//! posterior draws on finite sets, and pathwise (random-feature) posterior
//! sample paths for continuous acquisition optimization.
//!
//! Targets are standardized on every fit; hyperparameters live in the
//! standardized space, predictions are reported in objective units.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;

pub const LENGTHSCALE_BOUNDS: (f64, f64) = (0.005, 10.0);
pub const SIGNAL_VARIANCE_BOUNDS: (f64, f64) = (0.05, 20.0);
pub const NOISE_VARIANCE_BOUNDS: (f64, f64) = (0.0005, 0.2);

/// Floor on the standard deviation used to standardize targets.
pub const Y_SD_FLOOR: f64 = 1e-8;

/// Largest query set accepted by [`GpModel::joint_sample`].
pub const JOINT_SAMPLE_LIMIT: usize = 20_000;

const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, PartialEq)]
pub struct GpHyperparams {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

fn in_box(v: f64, (lo, hi): (f64, f64)) -> bool {
    v.is_finite() && (lo..=hi).contains(&v)
}

impl GpHyperparams {
    pub fn new(lengthscales: Vec<f64>, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        let hp = Self {
            lengthscales,
            signal_variance,
            noise_variance,
        };
        hp.validate()?;
        Ok(hp)
    }

    /// Starting point used when no warm start is available.
    pub fn initial(dim: usize) -> Self {
        Self {
            lengthscales: vec![0.5; dim],
            signal_variance: 1.0,
            noise_variance: 1e-3,
        }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(Error::InvalidArgument("no lengthscales".into()));
        }
        if let Some(ls) = self.lengthscales.iter().find(|&&l| !in_box(l, LENGTHSCALE_BOUNDS)) {
            return Err(Error::InvalidArgument(format!("lengthscale {ls} outside {LENGTHSCALE_BOUNDS:?}")));
        }
        if !in_box(self.signal_variance, SIGNAL_VARIANCE_BOUNDS) {
            return Err(Error::InvalidArgument(format!(
                "signal variance {} outside {SIGNAL_VARIANCE_BOUNDS:?}",
                self.signal_variance
            )));
        }
        if !in_box(self.noise_variance, NOISE_VARIANCE_BOUNDS) {
            return Err(Error::InvalidArgument(format!(
                "noise variance {} outside {NOISE_VARIANCE_BOUNDS:?}",
                self.noise_variance
            )));
        }
        Ok(())
    }

    /// `[ln ℓ_1, …, ln ℓ_d, ln σ_f², ln σ_n²]`, the coordinates used by
    /// [`log_marginal_likelihood`] gradients.
    pub fn to_log(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.lengthscales.iter().map(|l| l.ln()).collect();
        t.push(self.signal_variance.ln());
        t.push(self.noise_variance.ln());
        t
    }

    pub fn from_log(theta: &[f64]) -> Self {
        let d = theta.len() - 2;
        Self {
            lengthscales: theta[..d].iter().map(|t| t.exp()).collect(),
            signal_variance: theta[d].exp(),
            noise_variance: theta[d + 1].exp(),
        }
    }

    /// Clamps every field into its box.
    pub fn clamped(&self) -> Self {
        let c = |v: f64, (lo, hi): (f64, f64)| v.clamp(lo, hi);
        Self {
            lengthscales: self.lengthscales.iter().map(|&l| c(l, LENGTHSCALE_BOUNDS)).collect(),
            signal_variance: c(self.signal_variance, SIGNAL_VARIANCE_BOUNDS),
            noise_variance: c(self.noise_variance, NOISE_VARIANCE_BOUNDS),
        }
    }

    fn log_bounds(dim: usize) -> Vec<(f64, f64)> {
        let ln = |(lo, hi): (f64, f64)| (f64::ln(lo), f64::ln(hi));
        let mut b = vec![ln(LENGTHSCALE_BOUNDS); dim];
        b.push(ln(SIGNAL_VARIANCE_BOUNDS));
        b.push(ln(NOISE_VARIANCE_BOUNDS));
        b
    }
}

/// Matérn-5/2 correlation at scaled distance `r`.
#[inline]
pub fn matern52(r: f64) -> f64 {
    let s = SQRT5 * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn scaled(points: &[Vec<f64>], lengthscales: &[f64]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| p.iter().zip(lengthscales).map(|(x, l)| x / l).collect())
        .collect()
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn gram(za: &[Vec<f64>], signal_variance: f64) -> DMatrix<f64> {
    let n = za.len();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = signal_variance;
        for i in (j + 1)..n {
            let v = signal_variance * matern52(sq_dist(&za[i], &za[j]).sqrt());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

fn cross(za: &[Vec<f64>], zb: &[Vec<f64>], signal_variance: f64) -> DMatrix<f64> {
    DMatrix::from_fn(za.len(), zb.len(), |i, j| {
        signal_variance * matern52(sq_dist(&za[i], &zb[j]).sqrt())
    })
}

/// Signal covariance `σ_f² k(a_i, b_j)` (noise excluded).
pub fn kernel_matrix(a: &[Vec<f64>], b: &[Vec<f64>], hp: &GpHyperparams) -> DMatrix<f64> {
    cross(&scaled(a, &hp.lengthscales), &scaled(b, &hp.lengthscales), hp.signal_variance)
}

fn check_points(points: &[Vec<f64>], dim: usize, what: &'static str) -> Result<()> {
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(what));
        }
    }
    Ok(())
}

struct Factorized {
    z: Vec<Vec<f64>>,
    chol: Cholesky,
    alpha: Vec<f64>,
    value: f64,
}

fn factorize(x: &[Vec<f64>], y: &[f64], hp: &GpHyperparams) -> Result<Factorized> {
    let n = x.len();
    if n == 0 || y.len() != n {
        return Err(Error::InvalidArgument(format!("{n} points but {} targets", y.len())));
    }
    check_points(x, hp.dim(), "training inputs")?;
    let z = scaled(x, &hp.lengthscales);
    let mut k = gram(&z, hp.signal_variance);
    for i in 0..n {
        k[(i, i)] += hp.noise_variance;
    }
    let chol = Cholesky::factor(&k, hp.signal_variance)?;
    let alpha = chol.solve_vec(y);
    let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let value = -0.5 * fit
        - 0.5 * chol.log_det()
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    Ok(Factorized { z, chol, alpha, value })
}

/// Gaussian log marginal likelihood of `y` (used as given, no
/// standardization) and its gradient with respect to
/// [`GpHyperparams::to_log`] coordinates.
pub fn log_marginal_likelihood(x: &[Vec<f64>], y: &[f64], hp: &GpHyperparams) -> Result<(f64, Vec<f64>)> {
    let f = factorize(x, y, hp)?;
    Ok((f.value, gradient(&f, hp)))
}

fn gradient(f: &Factorized, hp: &GpHyperparams) -> Vec<f64> {
    let Factorized { z, chol, alpha, .. } = f;
    let n = z.len();
    let dim = hp.dim();
    let sf2 = hp.signal_variance;
    // W = ααᵀ − K⁻¹;  ∂L/∂θ = ½ tr(W ∂K/∂θ)
    let kinv = chol.inverse();
    let mut grad = vec![0.0; dim + 2];
    let mut trace_wk = 0.0;
    let mut trace_w = 0.0;
    for j in 0..n {
        let wjj = alpha[j] * alpha[j] - kinv[(j, j)];
        trace_w += wjj;
        trace_wk += wjj * sf2;
        for i in (j + 1)..n {
            let w = 2.0 * (alpha[i] * alpha[j] - kinv[(i, j)]);
            let r = sq_dist(&z[i], &z[j]).sqrt();
            let e = (-SQRT5 * r).exp();
            trace_wk += w * sf2 * (1.0 + SQRT5 * r + 5.0 * r * r / 3.0) * e;
            // ∂k/∂ln ℓ_d = σ_f² (5/3)(1 + √5 r) e^{-√5 r} · (Δ_d/ℓ_d)²
            let common = w * sf2 * (5.0 / 3.0) * (1.0 + SQRT5 * r) * e;
            for (g, (a, b)) in grad.iter_mut().zip(z[i].iter().zip(&z[j])) {
                *g += common * (a - b) * (a - b);
            }
        }
    }
    for g in grad.iter_mut().take(dim) {
        *g *= 0.5;
    }
    grad[dim] = 0.5 * trace_wk;
    grad[dim + 1] = 0.5 * hp.noise_variance * trace_w;
    grad
}

/// Settings for maximum-likelihood fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Total number of starts, the warm start included.
    pub restarts: usize,
    /// Gradient steps per start.
    pub steps: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            steps: 50,
        }
    }
}

/// A fitted GP on standardized targets.
#[derive(Debug, Clone)]
pub struct GpModel {
    hp: GpHyperparams,
    x: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    y_std: Vec<f64>,
    y_mean: f64,
    y_sd: f64,
    chol: Cholesky,
    alpha: Vec<f64>,
    log_likelihood: f64,
}

fn standardize(y: &[f64]) -> (f64, f64, Vec<f64>) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt().max(Y_SD_FLOOR);
    let ys = y.iter().map(|v| (v - mean) / sd).collect();
    (mean, sd, ys)
}

fn validate_training(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("GP needs at least one training point".into()));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!("{} points but {} targets", x.len(), y.len())));
    }
    let dim = x[0].len();
    if dim == 0 {
        return Err(Error::InvalidArgument("zero-dimensional inputs".into()));
    }
    check_points(x, dim, "training inputs")?;
    for p in x {
        if let Some((i, &v)) = p.iter().enumerate().find(|(_, v)| v.abs() > 1.0 + 1e-12) {
            return Err(Error::OutOfBounds {
                index: i,
                value: v,
                lower: -1.0,
                upper: 1.0,
            });
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training targets"));
    }
    Ok(dim)
}

/// Projected gradient ascent in log-hyperparameter space with Armijo
/// backtracking. Steps are normalized by the largest free gradient entry.
fn ascend(x: &[Vec<f64>], y: &[f64], start: &[f64], bounds: &[(f64, f64)], steps: usize) -> Option<(Vec<f64>, f64)> {
    let project = |t: &mut [f64]| {
        for (v, &(lo, hi)) in t.iter_mut().zip(bounds) {
            *v = v.clamp(lo, hi);
        }
    };
    let mut theta = start.to_vec();
    project(&mut theta);
    let (mut value, mut grad) = log_marginal_likelihood(x, y, &GpHyperparams::from_log(&theta)).ok()?;
    // trial points only need the value; the gradient is formed on acceptance
    let mut lr = 0.5;
    for _ in 0..steps {
        // drop components that push against an active bound
        let free: Vec<f64> = grad
            .iter()
            .zip(&theta)
            .zip(bounds)
            .map(|((&g, &t), &(lo, hi))| {
                if (t <= lo && g < 0.0) || (t >= hi && g > 0.0) {
                    0.0
                } else {
                    g
                }
            })
            .collect();
        let gmax = free.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax < 1e-10 {
            break;
        }
        let mut accepted = false;
        for _ in 0..8 {
            let mut trial: Vec<f64> = theta.iter().zip(&free).map(|(t, g)| t + lr * g / gmax).collect();
            project(&mut trial);
            let ascent: f64 = trial.iter().zip(&theta).zip(&free).map(|((a, b), g)| (a - b) * g).sum();
            let hp = GpHyperparams::from_log(&trial);
            if let Ok(f) = factorize(x, y, &hp) {
                if f.value >= value + 1e-4 * ascent && f.value.is_finite() {
                    theta = trial;
                    value = f.value;
                    grad = gradient(&f, &hp);
                    accepted = true;
                    break;
                }
            }
            lr *= 0.5;
        }
        if !accepted || lr < 1e-8 {
            break;
        }
        lr = (lr * 1.5).min(2.0);
    }
    Some((theta, value))
}

/// Fits a GP by multi-start maximum likelihood: the warm start (or
/// [`GpHyperparams::initial`]) plus `restarts − 1` log-uniform draws inside
/// the hyperparameter boxes.
pub fn fit<R: Rng + ?Sized>(
    x: &[Vec<f64>],
    y: &[f64],
    warm: Option<&GpHyperparams>,
    opts: &FitOptions,
    rng: &mut R,
) -> Result<GpModel> {
    let dim = validate_training(x, y)?;
    let (_, _, ys) = standardize(y);
    let bounds = GpHyperparams::log_bounds(dim);

    let first = match warm {
        Some(hp) if hp.dim() == dim => hp.clamped(),
        Some(hp) => {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: hp.dim(),
            })
        }
        None => GpHyperparams::initial(dim),
    };
    let mut starts = vec![first.to_log()];
    for _ in 1..opts.restarts.max(1) {
        starts.push(bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect());
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in &starts {
        if let Some((theta, v)) = ascend(x, &ys, s, &bounds, opts.steps) {
            if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
                best = Some((theta, v));
            }
        }
    }
    let (theta, _) = best.ok_or(Error::NotPositiveDefinite {
        jitter: crate::linalg::JITTER_SCHEDULE[2],
    })?;
    GpModel::with_hyperparams(x, y, GpHyperparams::from_log(&theta).clamped())
}

impl GpModel {
    /// Conditions a GP with fixed hyperparameters on the data.
    pub fn with_hyperparams(x: &[Vec<f64>], y: &[f64], hp: GpHyperparams) -> Result<Self> {
        let dim = validate_training(x, y)?;
        hp.validate()?;
        if hp.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: hp.dim(),
            });
        }
        let (y_mean, y_sd, y_std) = standardize(y);
        let z = scaled(x, &hp.lengthscales);
        let mut k = gram(&z, hp.signal_variance);
        for i in 0..x.len() {
            k[(i, i)] += hp.noise_variance;
        }
        let chol = Cholesky::factor(&k, hp.signal_variance)?;
        let alpha = chol.solve_vec(&y_std);
        let fit: f64 = y_std.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        let log_likelihood = -0.5 * fit
            - 0.5 * chol.log_det()
            - 0.5 * x.len() as f64 * (2.0 * std::f64::consts::PI).ln();
        Ok(Self {
            hp,
            x: x.to_vec(),
            z,
            y_std,
            y_mean,
            y_sd,
            chol,
            alpha,
            log_likelihood,
        })
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hp
    }

    pub fn dim(&self) -> usize {
        self.hp.dim()
    }

    pub fn n_train(&self) -> usize {
        self.x.len()
    }

    pub fn train_x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn y_sd(&self) -> f64 {
        self.y_sd
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    /// Maps an objective value into the standardized space.
    pub fn standardize(&self, y: f64) -> f64 {
        (y - self.y_mean) / self.y_sd
    }

    pub fn destandardize(&self, s: f64) -> f64 {
        self.y_mean + self.y_sd * s
    }

    fn check_queries(&self, q: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        check_points(q, self.dim(), "query points")?;
        Ok(scaled(q, &self.hp.lengthscales))
    }

    /// Standardized posterior mean and covariance of the latent function.
    pub fn posterior_standardized(&self, q: &[Vec<f64>]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let zq = self.check_queries(q)?;
        let kxq = cross(&self.z, &zq, self.hp.signal_variance);
        let mean: Vec<f64> = (0..q.len())
            .map(|j| kxq.column(j).iter().zip(&self.alpha).map(|(a, b)| a * b).sum())
            .collect();
        let v = self.chol.solve_lower_mat(&kxq);
        let vt = v.transpose();
        let mut cov = gram(&zq, self.hp.signal_variance);
        cov.gemm(-1.0, &vt, &v, 1.0);
        // symmetrize and clip round-off on the diagonal
        for j in 0..q.len() {
            cov[(j, j)] = cov[(j, j)].max(0.0);
            for i in (j + 1)..q.len() {
                let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = s;
                cov[(j, i)] = s;
            }
        }
        Ok((mean, cov))
    }

    /// Posterior mean and covariance in objective units.
    pub fn posterior(&self, q: &[Vec<f64>]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let (mean, cov) = self.posterior_standardized(q)?;
        let s2 = self.y_sd * self.y_sd;
        Ok((mean.into_iter().map(|m| self.destandardize(m)).collect(), cov * s2))
    }

    /// Posterior mean only (objective units); `O(n)` per query.
    pub fn predict_mean(&self, q: &[Vec<f64>]) -> Result<Vec<f64>> {
        let zq = self.check_queries(q)?;
        Ok(zq
            .iter()
            .map(|p| {
                let s: f64 = self
                    .z
                    .iter()
                    .zip(&self.alpha)
                    .map(|(zi, a)| a * self.hp.signal_variance * matern52(sq_dist(zi, p).sqrt()))
                    .sum();
                self.destandardize(s)
            })
            .collect())
    }

    /// One draw from the exact joint posterior at `q`, standardized.
    pub fn joint_sample_standardized<R: Rng + ?Sized>(&self, q: &[Vec<f64>], rng: &mut R) -> Result<Vec<f64>> {
        if q.is_empty() {
            return Err(Error::InvalidArgument("empty query set".into()));
        }
        if q.len() > JOINT_SAMPLE_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "{} query points exceed the joint-sampling limit {JOINT_SAMPLE_LIMIT}",
                q.len()
            )));
        }
        let (mean, cov) = self.posterior_standardized(q)?;
        let chol = Cholesky::factor(&cov, self.hp.signal_variance)?;
        let z: Vec<f64> = (0..q.len()).map(|_| rng.sample(StandardNormal)).collect();
        let lz = chol.mul_lower_vec(&z);
        Ok(mean.iter().zip(&lz).map(|(m, e)| m + e).collect())
    }

    /// One draw from the exact joint posterior at `q`, in objective units.
    pub fn joint_sample<R: Rng + ?Sized>(&self, q: &[Vec<f64>], rng: &mut R) -> Result<Vec<f64>> {
        Ok(self
            .joint_sample_standardized(q, rng)?
            .into_iter()
            .map(|s| self.destandardize(s))
            .collect())
    }

    /// Draws a posterior sample path by pathwise conditioning: a
    /// random-feature prior draw plus a data-dependent kernel correction,
    /// `f(x) = f̃(x) + k(x, X)(K + σ²I)⁻¹(y − f̃(X) − ε)`.
    pub fn sample_path<R: Rng + ?Sized>(&self, n_features: usize, rng: &mut R) -> Result<SamplePath> {
        if n_features < 64 {
            return Err(Error::InvalidArgument(format!("n_features = {n_features} < 64")));
        }
        let dim = self.dim();
        // Matérn-5/2 spectral density: multivariate Student-t, 5 d.o.f.
        let chi = ChiSquared::new(5.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut frequencies = DMatrix::zeros(dim, n_features);
        for j in 0..n_features {
            let u: f64 = chi.sample(rng);
            let scale = (5.0 / u).sqrt();
            for d in 0..dim {
                let g: f64 = rng.sample(StandardNormal);
                frequencies[(d, j)] = g * scale / self.hp.lengthscales[d];
            }
        }
        let phases: Vec<f64> = (0..n_features)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        let feature_weights: Vec<f64> = (0..n_features).map(|_| rng.sample(StandardNormal)).collect();
        let amplitude = (2.0 * self.hp.signal_variance / n_features as f64).sqrt();

        let prior = PriorFeatures {
            frequencies,
            phases,
            feature_weights,
            amplitude,
        };
        let prior_at_train = prior.eval(&self.x);
        let noise_sd = self.hp.noise_variance.sqrt();
        let resid: Vec<f64> = self
            .y_std
            .iter()
            .zip(&prior_at_train)
            .map(|(y, f)| {
                let e: f64 = rng.sample(StandardNormal);
                y - f - noise_sd * e
            })
            .collect();
        let canonical_weights = self.chol.solve_vec(&resid);
        Ok(SamplePath {
            prior,
            train_z: self.z.clone(),
            canonical_weights,
            lengthscales: self.hp.lengthscales.clone(),
            signal_variance: self.hp.signal_variance,
            y_mean: self.y_mean,
            y_sd: self.y_sd,
        })
    }
}

#[derive(Debug, Clone)]
struct PriorFeatures {
    /// `dim × count`, already divided by the lengthscales.
    frequencies: DMatrix<f64>,
    phases: Vec<f64>,
    feature_weights: Vec<f64>,
    amplitude: f64,
}

impl PriorFeatures {
    fn eval(&self, points: &[Vec<f64>]) -> Vec<f64> {
        if points.is_empty() {
            return Vec::new();
        }
        let dim = self.frequencies.nrows();
        let p = DMatrix::from_fn(points.len(), dim, |i, d| points[i][d]);
        let proj = &p * &self.frequencies;
        (0..points.len())
            .map(|i| {
                let s: f64 = (0..self.phases.len())
                    .map(|j| self.feature_weights[j] * (proj[(i, j)] + self.phases[j]).cos())
                    .sum();
                self.amplitude * s
            })
            .collect()
    }
}

/// A fixed realization of the GP posterior, evaluable anywhere.
#[derive(Debug, Clone)]
pub struct SamplePath {
    prior: PriorFeatures,
    train_z: Vec<Vec<f64>>,
    canonical_weights: Vec<f64>,
    lengthscales: Vec<f64>,
    signal_variance: f64,
    y_mean: f64,
    y_sd: f64,
}

impl SamplePath {
    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn feature_count(&self) -> usize {
        self.prior.phases.len()
    }

    /// Standardized path values at `points`.
    pub fn values_standardized(&self, points: &[Vec<f64>]) -> Vec<f64> {
        let mut out = self.prior.eval(points);
        for (o, p) in out.iter_mut().zip(points) {
            let zp: Vec<f64> = p.iter().zip(&self.lengthscales).map(|(x, l)| x / l).collect();
            let corr: f64 = self
                .train_z
                .iter()
                .zip(&self.canonical_weights)
                .map(|(zi, w)| w * matern52(sq_dist(zi, &zp).sqrt()))
                .sum();
            *o += self.signal_variance * corr;
        }
        out
    }

    /// Path values in objective units.
    pub fn values(&self, points: &[Vec<f64>]) -> Vec<f64> {
        self.values_standardized(points)
            .into_iter()
            .map(|s| self.y_mean + self.y_sd * s)
            .collect()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.values(std::slice::from_ref(&x.to_vec()))[0]
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn y_sd(&self) -> f64 {
        self.y_sd
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_points(n: usize, d: usize, r: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| r.random_range(-1.0..=1.0)).collect()).collect()
    }

    fn toy(x: &[f64]) -> f64 {
        x.iter().enumerate().map(|(i, v)| ((i + 1) as f64 * v).sin()).sum::<f64>() + 0.3 * x[0] * x[0]
    }

    #[test]
    fn hyperparameter_boxes_are_enforced() {
        assert!(GpHyperparams::new(vec![0.001], 1.0, 0.01).is_err());
        assert!(GpHyperparams::new(vec![1.0], 25.0, 0.01).is_err());
        assert!(GpHyperparams::new(vec![1.0], 1.0, 0.3).is_err());
        assert!(GpHyperparams::new(vec![1.0, 0.1], 1.0, 0.01).is_ok());
        let hp = GpHyperparams::new(vec![0.3, 2.0], 4.0, 0.01).unwrap();
        let back = GpHyperparams::from_log(&hp.to_log());
        assert!((back.lengthscales[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn one_point_likelihood_closed_form() {
        let hp = GpHyperparams::new(vec![0.7, 0.2], 1.3, 0.05).unwrap();
        let (v, _) = log_marginal_likelihood(&[vec![0.1, -0.4]], &[0.8], &hp).unwrap();
        let s = 1.3 + 0.05;
        let expect = -0.5 * 0.8 * 0.8 / s - 0.5 * (2.0 * std::f64::consts::PI * s).ln();
        assert!((v - expect).abs() < 1e-12);
    }

    fn one_point_value(y: f64, sf: f64, sn: f64) -> f64 {
        let hp = GpHyperparams {
            lengthscales: vec![1.0],
            signal_variance: sf,
            noise_variance: sn,
        };
        log_marginal_likelihood(&[vec![0.0]], &[y], &hp).unwrap().0
    }

    #[test]
    fn noise_doubling_one_point() {
        // value(s) = −½y²/s − ½log(2πs), s = σ_f² + σ_n²
        for &(sf, sn) in &[(0.3, 0.05), (0.5, 0.2), (2.0, 0.1), (0.05, 0.001), (1.5, 0.01)] {
            assert!(one_point_value(0.0, sf, 2.0 * sn) < one_point_value(0.0, sf, sn));
            let up = one_point_value(1.0, sf, 2.0 * sn) > one_point_value(1.0, sf, sn);
            assert_eq!(up, sf + 2.0 * sn < 1.0, "sf={sf} sn={sn}");
        }
    }

    #[test]
    fn recovers_lengthscale_of_matern_draws() {
        let truth = GpHyperparams::new(vec![0.5, 0.5], 1.0, 0.001).unwrap();
        let mut hits = 0;
        for seed in 0..10 {
            let mut r = rng(100 + seed);
            let x = random_points(20, 2, &mut r);
            let mut k = kernel_matrix(&x, &x, &truth);
            for i in 0..x.len() {
                k[(i, i)] += truth.noise_variance;
            }
            let c = Cholesky::factor(&k, 1.0).unwrap();
            let z: Vec<f64> = (0..x.len()).map(|_| r.sample(StandardNormal)).collect();
            let y = c.mul_lower_vec(&z);
            let m = fit(&x, &y, None, &FitOptions::default(), &mut r).unwrap();
            if m.hyperparams().lengthscales.iter().all(|l| (0.2..=1.5).contains(l)) {
                hits += 1;
            }
        }
        assert!(hits >= 8, "only {hits}/10 seeds recovered the lengthscale");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng(11);
        let x = random_points(8, 3, &mut r);
        let y: Vec<f64> = x.iter().map(|p| toy(p)).collect();
        let hp = GpHyperparams::new(vec![0.4, 0.9, 1.7], 1.2, 0.01).unwrap();
        let (_, g) = log_marginal_likelihood(&x, &y, &hp).unwrap();
        let theta = hp.to_log();
        let h = 1e-5;
        for k in 0..theta.len() {
            let mut tp = theta.clone();
            tp[k] += h;
            let mut tm = theta.clone();
            tm[k] -= h;
            let fp = log_marginal_likelihood(&x, &y, &GpHyperparams::from_log(&tp)).unwrap().0;
            let fm = log_marginal_likelihood(&x, &y, &GpHyperparams::from_log(&tm)).unwrap().0;
            let fd = (fp - fm) / (2.0 * h);
            let rel = (fd - g[k]).abs() / fd.abs().max(1e-6);
            assert!(rel < 1e-4, "param {k}: analytic {} vs fd {fd}", g[k]);
        }
    }

    #[test]
    fn single_point_model_passes_through_data() {
        let m = fit(&[vec![0.2, 0.3]], &[4.2], None, &FitOptions::default(), &mut rng(1)).unwrap();
        let mu = m.predict_mean(&[vec![0.2, 0.3]]).unwrap();
        assert!((mu[0] - 4.2).abs() < 1e-12);
    }

    #[test]
    fn constant_targets_drive_signal_variance_down() {
        let mut r = rng(2);
        let x = random_points(12, 2, &mut r);
        let y = vec![3.0; 12];
        let m = fit(&x, &y, None, &FitOptions::default(), &mut r).unwrap();
        assert!(m.hyperparams().signal_variance <= 0.06, "{:?}", m.hyperparams());
    }

    #[test]
    fn fit_is_permutation_invariant() {
        let mut r = rng(3);
        let x = random_points(10, 2, &mut r);
        let y: Vec<f64> = x.iter().map(|p| toy(p)).collect();
        let opts = FitOptions { restarts: 3, steps: 30 };
        let a = fit(&x, &y, None, &opts, &mut rng(5)).unwrap();
        let mut xr = x.clone();
        let mut yr = y.clone();
        xr.reverse();
        yr.reverse();
        let b = fit(&xr, &yr, None, &opts, &mut rng(5)).unwrap();
        for (p, q) in a.hyperparams().to_log().iter().zip(b.hyperparams().to_log()) {
            assert!((p - q).abs() < 1e-6);
        }
    }

    #[test]
    fn fit_rejects_bad_input() {
        let mut r = rng(0);
        let opts = FitOptions::default();
        assert!(fit(&[], &[], None, &opts, &mut r).is_err());
        assert!(fit(&[vec![0.0]], &[f64::NAN], None, &opts, &mut r).is_err());
        assert!(fit(&[vec![1.5]], &[0.0], None, &opts, &mut r).is_err());
        assert!(fit(&[vec![0.0], vec![0.1, 0.2]], &[0.0, 1.0], None, &opts, &mut r).is_err());
    }

    fn fixed_model(n: usize, seed: u64, noise: f64) -> GpModel {
        let mut r = rng(seed);
        let x = random_points(n, 2, &mut r);
        let y: Vec<f64> = x.iter().map(|p| 5.0 * toy(p) + 10.0).collect();
        GpModel::with_hyperparams(&x, &y, GpHyperparams::new(vec![0.6, 0.8], 1.0, noise).unwrap()).unwrap()
    }

    #[test]
    fn posterior_interpolates_with_small_noise() {
        let m = fixed_model(15, 4, NOISE_VARIANCE_BOUNDS.0);
        let (mean, cov) = m.posterior(m.train_x()).unwrap();
        let y: Vec<f64> = m.train_x().iter().map(|p| 5.0 * toy(p) + 10.0).collect();
        for (mu, yi) in mean.iter().zip(&y) {
            assert!((mu - yi).abs() <= 1e-2 * m.y_sd());
        }
        for i in 0..cov.nrows() {
            assert!(cov[(i, i)] >= 0.0);
        }
    }

    #[test]
    fn posterior_reverts_to_prior_far_away() {
        let x = vec![vec![-1.0, -1.0], vec![-0.9, -1.0], vec![-1.0, -0.95]];
        let y = vec![1.0, 2.0, 0.5];
        let m = GpModel::with_hyperparams(&x, &y, GpHyperparams::new(vec![0.1, 0.1], 2.0, 0.01).unwrap()).unwrap();
        let (_, cov) = m.posterior(&[vec![1.0, 1.0]]).unwrap();
        let prior = 2.0 * m.y_sd() * m.y_sd();
        assert!((cov[(0, 0)] - prior).abs() <= 0.05 * prior);
    }

    #[test]
    fn duplicate_queries_share_covariance() {
        let m = fixed_model(10, 5, 0.01);
        let q = vec![vec![0.3, -0.2], vec![0.3, -0.2]];
        let (mean, cov) = m.posterior(&q).unwrap();
        assert_eq!(mean[0], mean[1]);
        let v = cov[(0, 0)];
        for k in [cov[(0, 1)], cov[(1, 0)], cov[(1, 1)]] {
            assert!((k - v).abs() < 1e-10 * v.max(1.0));
        }
    }

    #[test]
    fn predictive_variance_bounded_by_prior() {
        let m = fixed_model(20, 6, 0.01);
        let mut r = rng(7);
        let q = random_points(50, 2, &mut r);
        let (_, cov) = m.posterior_standardized(&q).unwrap();
        let bound = m.hyperparams().signal_variance + m.hyperparams().noise_variance;
        for i in 0..q.len() {
            assert!(cov[(i, i)] <= bound * (1.0 + 1e-6));
        }
    }

    #[test]
    fn predict_mean_agrees_with_posterior() {
        let m = fixed_model(12, 8, 0.01);
        let mut r = rng(9);
        let q = random_points(7, 2, &mut r);
        let (mean, _) = m.posterior(&q).unwrap();
        let fast = m.predict_mean(&q).unwrap();
        for (a, b) in mean.iter().zip(&fast) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn joint_sample_is_seeded_and_concentrates_at_data() {
        let m = fixed_model(10, 10, NOISE_VARIANCE_BOUNDS.0);
        let q = vec![m.train_x()[0].clone(), vec![0.9, 0.9]];
        let a = m.joint_sample(&q, &mut rng(1)).unwrap();
        let b = m.joint_sample(&q, &mut rng(1)).unwrap();
        assert_eq!(a, b);
        let (mean, cov) = m.posterior(&q[..1]).unwrap();
        let y0 = 5.0 * toy(&q[0]) + 10.0;
        let sd = cov[(0, 0)].sqrt();
        assert!((a[0] - y0).abs() <= 4.0 * sd + (mean[0] - y0).abs());
        assert!(m.joint_sample(&[], &mut rng(1)).is_err());
    }

    #[test]
    fn joint_sample_moments() {
        let m = fixed_model(6, 12, 0.01);
        let q = vec![vec![0.5, 0.5]];
        let (mean, cov) = m.posterior(&q).unwrap();
        let mut r = rng(13);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| m.joint_sample(&q, &mut r).unwrap()[0]).collect();
        let emp_mean = draws.iter().sum::<f64>() / n as f64;
        let emp_var = draws.iter().map(|v| (v - emp_mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let var = cov[(0, 0)];
        let se_mean = (var / n as f64).sqrt();
        let se_var = var * (2.0 / (n - 1) as f64).sqrt();
        assert!((emp_mean - mean[0]).abs() <= 3.0 * se_mean);
        assert!((emp_var - var).abs() <= 3.0 * se_var);
    }

    #[test]
    fn sample_path_is_deterministic() {
        let m = fixed_model(10, 14, 0.01);
        let path = m.sample_path(128, &mut rng(2)).unwrap();
        let x = [0.1, -0.3];
        assert_eq!(path.value(&x), path.value(&x));
        assert_eq!(path.feature_count(), 128);
        assert!(m.sample_path(32, &mut rng(2)).is_err());
    }

    #[test]
    fn sample_path_mean_converges_to_posterior_mean() {
        let mut r = rng(15);
        let x = random_points(40, 2, &mut r);
        let y: Vec<f64> = x.iter().map(|p| toy(p)).collect();
        let m = GpModel::with_hyperparams(&x, &y, GpHyperparams::new(vec![0.7, 0.7], 1.0, 0.001).unwrap()).unwrap();
        let q = random_points(20, 2, &mut r);
        let (mean, _) = m.posterior(&q).unwrap();
        let mut acc = vec![0.0; q.len()];
        let paths = 200;
        for _ in 0..paths {
            let p = m.sample_path(2048, &mut r).unwrap();
            for (a, v) in acc.iter_mut().zip(p.values(&q)) {
                *a += v / paths as f64;
            }
        }
        let err = acc.iter().zip(&mean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 0.1 * m.y_sd(), "max abs error {err}");
    }
}
