//! Particle bookkeeping and incumbent-guided line construction.
//!
//! Particles live in the target space `[-1, 1]^{d_A}`. Each iteration one
//! particle is moved (the one whose line was selected), so update counts
//! differ between particles.

use rand::seq::index;
use rand::Rng;

use crate::embedding::ExpansionMap;
use crate::error::{Error, Result};

/// PSO coefficients `(w, c1, c2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwarmCoeffs {
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for SwarmCoeffs {
    fn default() -> Self {
        let w = 0.729;
        Self {
            w,
            c1: 2.05 * w,
            c2: 2.05 * w,
        }
    }
}

impl SwarmCoeffs {
    pub fn validate(&self) -> Result<()> {
        if [self.w, self.c1, self.c2].iter().all(|c| c.is_finite() && *c > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("swarm coefficients must be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    position: Vec<f64>,
    displacement: Vec<f64>,
    history: Vec<(Vec<f64>, f64)>,
    best: usize,
    update_count: usize,
}

impl Particle {
    fn new(position: Vec<f64>, y: f64) -> Self {
        let d = position.len();
        Self {
            history: vec![(position.clone(), y)],
            position,
            displacement: vec![0.0; d],
            best: 0,
            update_count: 0,
        }
    }

    pub fn position(&self) -> &[f64] {
        &self.position
    }

    pub fn displacement(&self) -> &[f64] {
        &self.displacement
    }

    pub fn history(&self) -> &[(Vec<f64>, f64)] {
        &self.history
    }

    pub fn update_count(&self) -> usize {
        self.update_count
    }

    /// Personal incumbent: best entry of the history, earliest on ties.
    pub fn incumbent(&self) -> (&[f64], f64) {
        let (x, y) = &self.history[self.best];
        (x, *y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Swarm {
    particles: Vec<Particle>,
    coeffs: SwarmCoeffs,
    global: (Vec<f64>, f64),
}

/// Line through `anchor` along `direction`, restricted to the box.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidingLine {
    anchor: Vec<f64>,
    direction: Vec<f64>,
    t_range: (f64, f64),
}

/// How [`Swarm::build_lines`] picks directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineMode {
    /// Incumbent-guided PSO velocity.
    Guided,
    /// `v ~ U([-2, 2]^{d_A})`, the box width in each coordinate.
    Random,
}

fn argmin_first(ys: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, y) in ys.enumerate() {
        if best.is_none_or(|(_, b)| y < b) {
            best = Some((i, y));
        }
    }
    best.map(|(i, _)| i)
}

fn check_box(x: &[f64]) -> Result<()> {
    for (i, &v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite("particle position"));
        }
        if v.abs() > 1.0 {
            return Err(Error::OutOfBounds {
                index: i,
                value: v,
                lower: -1.0,
                upper: 1.0,
            });
        }
    }
    Ok(())
}

impl Swarm {
    /// Picks `m` distinct dataset points (target coordinates with their
    /// values) as particles. The global incumbent is the dataset argmin.
    pub fn init<R: Rng + ?Sized>(dataset: &[(Vec<f64>, f64)], m: usize, coeffs: SwarmCoeffs, rng: &mut R) -> Result<Self> {
        coeffs.validate()?;
        if m == 0 {
            return Err(Error::InvalidArgument("swarm needs at least one particle".into()));
        }
        if dataset.len() < m {
            return Err(Error::InvalidArgument(format!(
                "{} data points cannot seed {m} particles",
                dataset.len()
            )));
        }
        let dim = dataset[0].0.len();
        for (x, y) in dataset {
            if x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: x.len(),
                });
            }
            check_box(x)?;
            if !y.is_finite() {
                return Err(Error::NonFinite("dataset value"));
            }
        }
        let chosen = index::sample(rng, dataset.len(), m).into_vec();
        let particles = chosen
            .iter()
            .map(|&k| Particle::new(dataset[k].0.clone(), dataset[k].1))
            .collect();
        let g = argmin_first(dataset.iter().map(|(_, y)| *y)).expect("non-empty dataset");
        Ok(Self {
            particles,
            coeffs,
            global: dataset[g].clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.global.0.len()
    }

    pub fn coeffs(&self) -> SwarmCoeffs {
        self.coeffs
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn particle(&self, i: usize) -> &Particle {
        &self.particles[i]
    }

    pub fn global_incumbent(&self) -> (&[f64], f64) {
        (&self.global.0, self.global.1)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.particles.len() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("particle {i} of {}", self.particles.len())))
        }
    }

    /// `w·x̄ + r1∘c1(p − x) + r2∘c2(g − x)` for given `r1`, `r2`.
    pub fn direction_with(&self, i: usize, r1: &[f64], r2: &[f64]) -> Result<Vec<f64>> {
        self.check_index(i)?;
        let d = self.dim();
        if r1.len() != d || r2.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: r1.len().min(r2.len()),
            });
        }
        let p = &self.particles[i];
        let (pb, _) = p.incumbent();
        let SwarmCoeffs { w, c1, c2 } = self.coeffs;
        Ok((0..d)
            .map(|j| {
                let x = p.position[j];
                w * p.displacement[j] + r1[j] * c1 * (pb[j] - x) + r2[j] * c2 * (self.global.0[j] - x)
            })
            .collect())
    }

    /// Guided direction with fresh `r1, r2 ~ U([0,1]^{d_A})`.
    pub fn compute_direction<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Result<Vec<f64>> {
        let d = self.dim();
        let r1: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let r2: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        self.direction_with(i, &r1, &r2)
    }

    /// One line per particle, anchored at its position.
    pub fn build_lines<R: Rng + ?Sized>(&self, mode: LineMode, rng: &mut R) -> Vec<GuidingLine> {
        let d = self.dim();
        (0..self.len())
            .map(|i| {
                let mut v = match mode {
                    LineMode::Guided => self.compute_direction(i, rng).expect("valid index"),
                    LineMode::Random => (0..d).map(|_| rng.random_range(-2.0..=2.0)).collect(),
                };
                while v.iter().all(|c| *c == 0.0) {
                    v = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
                }
                GuidingLine::new(self.particles[i].position.clone(), v).expect("anchor inside box")
            })
            .collect()
    }

    /// Moves particle `i` to `new_position` observed with value `y`.
    pub fn update_particle(&mut self, i: usize, new_position: Vec<f64>, y: f64) -> Result<()> {
        self.check_index(i)?;
        if new_position.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: new_position.len(),
            });
        }
        check_box(&new_position)?;
        if !y.is_finite() {
            return Err(Error::NonFinite("observed value"));
        }
        let p = &mut self.particles[i];
        p.displacement = new_position.iter().zip(&p.position).map(|(a, b)| a - b).collect();
        p.position = new_position.clone();
        p.history.push((new_position.clone(), y));
        p.update_count += 1;
        if y < p.history[p.best].1 {
            p.best = p.history.len() - 1;
        }
        if y < self.global.1 {
            self.global = (new_position, y);
        }
        Ok(())
    }

    /// Carries the swarm into an expanded target space by copying each
    /// parent coordinate to its children.
    pub fn lift(&self, map: &ExpansionMap) -> Result<Self> {
        let particles = self
            .particles
            .iter()
            .map(|p| {
                Ok(Particle {
                    position: map.lift_point(&p.position)?,
                    displacement: map.lift_point(&p.displacement)?,
                    history: p
                        .history
                        .iter()
                        .map(|(x, y)| Ok((map.lift_point(x)?, *y)))
                        .collect::<Result<_>>()?,
                    best: p.best,
                    update_count: p.update_count,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            particles,
            coeffs: self.coeffs,
            global: (map.lift_point(&self.global.0)?, self.global.1),
        })
    }
}

fn box_interval(anchor: &[f64], direction: &[f64]) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (&a, &v) in anchor.iter().zip(direction) {
        if v != 0.0 {
            let (t1, t2) = ((-1.0 - a) / v, (1.0 - a) / v);
            lo = lo.max(t1.min(t2));
            hi = hi.min(t1.max(t2));
        }
    }
    (lo.min(0.0), hi.max(0.0))
}

impl GuidingLine {
    /// Builds the line and its parameter interval inside `[-1, 1]^{d_A}`.
    ///
    /// An anchor on the boundary can make the interval collapse to `{0}`
    /// (one coordinate blocks `t > 0`, another blocks `t < 0`). The
    /// components blocking `t > 0` are then dropped so the line still moves
    /// along the remaining part of the direction.
    pub fn new(anchor: Vec<f64>, mut direction: Vec<f64>) -> Result<Self> {
        if anchor.len() != direction.len() {
            return Err(Error::DimensionMismatch {
                expected: anchor.len(),
                got: direction.len(),
            });
        }
        check_box(&anchor)?;
        if direction.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("line direction"));
        }
        let mut t_range = box_interval(&anchor, &direction);
        if t_range.1 - t_range.0 <= 1e-12 && direction.iter().any(|v| *v != 0.0) {
            for (v, &a) in direction.iter_mut().zip(&anchor) {
                if (a >= 1.0 && *v > 0.0) || (a <= -1.0 && *v < 0.0) {
                    *v = 0.0;
                }
            }
            t_range = box_interval(&anchor, &direction);
        }
        Ok(Self {
            anchor,
            direction,
            t_range,
        })
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn t_range(&self) -> (f64, f64) {
        self.t_range
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    /// `anchor + t·direction`, clamped to the box against rounding.
    pub fn point_at(&self, t: f64) -> Vec<f64> {
        self.anchor
            .iter()
            .zip(&self.direction)
            .map(|(a, v)| (a + t * v).clamp(-1.0, 1.0))
            .collect()
    }
}

/// Outcome of a Monte-Carlo check of the incumbent-direction bound
/// `E⟨g, r1∘h1 + r2∘h2⟩² ≥ ¼(‖h1‖²cos²θ1 + ‖h2‖²cos²θ2)‖g‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma1Report {
    pub empirical_mean: f64,
    pub std_error: f64,
    pub bound: f64,
}

impl Lemma1Report {
    /// The inequality holds up to `k` standard errors.
    pub fn holds(&self, k: f64) -> bool {
        self.empirical_mean >= self.bound - k * self.std_error
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lemma1_args(g: &[f64], h1: &[f64], h2: &[f64]) -> Result<()> {
    if h1.len() != g.len() || h2.len() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: g.len(),
            got: if h1.len() != g.len() { h1.len() } else { h2.len() },
        });
    }
    if g.iter().chain(h1).chain(h2).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lemma vectors"));
    }
    if dot(g, g) == 0.0 {
        return Err(Error::InvalidArgument("g has zero norm; the angles are undefined".into()));
    }
    Ok(())
}

/// `¼(‖h1‖²cos²θ1 + ‖h2‖²cos²θ2)‖g‖²`, i.e. `¼(⟨g,h1⟩² + ⟨g,h2⟩²)`.
pub fn lemma1_bound(g: &[f64], h1: &[f64], h2: &[f64]) -> Result<f64> {
    lemma1_args(g, h1, h2)?;
    let gg = dot(g, g);
    let cos2 = |h: &[f64]| {
        let hh = dot(h, h);
        if hh == 0.0 {
            0.0
        } else {
            dot(g, h).powi(2) / (gg * hh)
        }
    };
    Ok(0.25 * (dot(h1, h1) * cos2(h1) + dot(h2, h2) * cos2(h2)) * gg)
}

/// Exact `E⟨g, r1∘h1 + r2∘h2⟩²` for independent `r1, r2 ~ U([0,1]^d)`:
/// `(‖g∘h1‖² + ‖g∘h2‖²)/12 + ¼(⟨g,h1⟩ + ⟨g,h2⟩)²`.
pub fn lemma1_expectation(g: &[f64], h1: &[f64], h2: &[f64]) -> Result<f64> {
    lemma1_args(g, h1, h2)?;
    let sq = |h: &[f64]| g.iter().zip(h).map(|(a, b)| (a * b).powi(2)).sum::<f64>();
    let s = dot(g, h1) + dot(g, h2);
    Ok((sq(h1) + sq(h2)) / 12.0 + 0.25 * s * s)
}

pub const LEMMA1_MIN_SAMPLES: usize = 10_000;

pub fn lemma1_check<R: Rng + ?Sized>(g: &[f64], h1: &[f64], h2: &[f64], n_samples: usize, rng: &mut R) -> Result<Lemma1Report> {
    let bound = lemma1_bound(g, h1, h2)?;
    if n_samples < LEMMA1_MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "n_samples = {n_samples} < {LEMMA1_MIN_SAMPLES}"
        )));
    }
    // Welford accumulation of ⟨g, r1∘h1 + r2∘h2⟩²
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 0..n_samples {
        let mut s = 0.0;
        for j in 0..g.len() {
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            s += g[j] * (r1 * h1[j] + r2 * h2[j]);
        }
        let v = s * s;
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (n_samples - 1) as f64;
    Ok(Lemma1Report {
        empirical_mean: mean,
        std_error: (var / n_samples as f64).sqrt(),
        bound,
    })
}
