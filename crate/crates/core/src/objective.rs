//! Black-box objectives, box scaling, and the synthetic benchmarks.
//!
//! The optimizer works in the symmetric unit box `[-1, 1]^d`; an
//! [`ObjectiveSpec`] owns the affine map to its native bounds and is the only
//! place native coordinates appear.

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

pub type ObjectiveFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A boxed black-box function together with its domain and metadata.
#[derive(Clone)]
pub struct ObjectiveSpec {
    name: String,
    bounds: Vec<(f64, f64)>,
    effective_dims: Option<Vec<usize>>,
    noise_sd: f64,
    known_optimum: Option<f64>,
    func: Arc<ObjectiveFn>,
}

impl fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("name", &self.name)
            .field("d", &self.dim())
            .field("effective_dims", &self.effective_dims)
            .field("noise_sd", &self.noise_sd)
            .field("known_optimum", &self.known_optimum)
            .finish_non_exhaustive()
    }
}

/// One observation `(x, y)` in native units.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub x_native: Vec<f64>,
    pub y: f64,
    /// 1-based, strictly increasing within a run.
    pub eval_index: usize,
}

/// Names accepted by [`make_synthetic`].
pub const SYNTHETIC_NAMES: [&str; 3] = ["ackley", "branin_aug", "hartmann6_aug"];

impl ObjectiveSpec {
    pub fn new<F>(name: impl Into<String>, bounds: Vec<(f64, f64)>, func: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if bounds.is_empty() {
            return Err(Error::InvalidArgument("objective needs d >= 1".into()));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!(
                    "bound {i} = [{lo}, {hi}] is not a proper interval"
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            bounds,
            effective_dims: None,
            noise_sd: 0.0,
            known_optimum: None,
            func: Arc::new(func),
        })
    }

    /// Restricts the dimensions that influence the value (0-based).
    pub fn with_effective_dims(mut self, dims: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = dims.iter().find(|&&i| i >= self.dim()) {
            return Err(Error::InvalidArgument(format!(
                "effective dimension {bad} is outside 0..{}",
                self.dim()
            )));
        }
        self.effective_dims = Some(dims);
        Ok(self)
    }

    pub fn with_noise(mut self, noise_sd: f64) -> Result<Self> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise_sd = {noise_sd}")));
        }
        self.noise_sd = noise_sd;
        Ok(self)
    }

    pub fn with_known_optimum(mut self, value: f64) -> Self {
        self.known_optimum = Some(value);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// `None` means every dimension is effective.
    pub fn effective_dims(&self) -> Option<&[usize]> {
        self.effective_dims.as_deref()
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn known_optimum(&self) -> Option<f64> {
        self.known_optimum
    }

    /// Noiseless value. Out-of-bounds inputs are rejected, never clamped.
    pub fn value(&self, x_native: &[f64]) -> Result<f64> {
        self.check_native(x_native)?;
        Ok((self.func)(x_native))
    }

    /// `f(x) + ε`, `ε ~ N(0, noise_sd²)`. The stream is only consumed when
    /// the objective is noisy.
    pub fn evaluate<R: Rng + ?Sized>(&self, x_native: &[f64], rng: &mut R) -> Result<f64> {
        let f = self.value(x_native)?;
        if self.noise_sd > 0.0 {
            let noise = Normal::new(0.0, self.noise_sd)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            Ok(f + noise.sample(rng))
        } else {
            Ok(f)
        }
    }

    /// Affine map from `[-1, 1]^d` onto the native box.
    pub fn to_native(&self, x_unit: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x_unit.len())?;
        x_unit
            .iter()
            .zip(&self.bounds)
            .enumerate()
            .map(|(i, (&u, &(lo, hi)))| {
                if !(-1.0..=1.0).contains(&u) {
                    return Err(Error::OutOfBounds {
                        index: i,
                        value: u,
                        lower: -1.0,
                        upper: 1.0,
                    });
                }
                // rounding must not push an endpoint past its bound
                Ok((lo + (u + 1.0) * 0.5 * (hi - lo)).clamp(lo, hi))
            })
            .collect()
    }

    /// Inverse of [`ObjectiveSpec::to_native`].
    pub fn from_native(&self, x_native: &[f64]) -> Result<Vec<f64>> {
        self.check_native(x_native)?;
        Ok(x_native
            .iter()
            .zip(&self.bounds)
            .map(|(&x, &(lo, hi))| 2.0 * (x - lo) / (hi - lo) - 1.0)
            .collect())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    fn check_native(&self, x: &[f64]) -> Result<()> {
        self.check_len(x.len())?;
        for (i, (&v, &(lo, hi))) in x.iter().zip(&self.bounds).enumerate() {
            if !(lo..=hi).contains(&v) {
                return Err(Error::OutOfBounds {
                    index: i,
                    value: v,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(())
    }
}

/// Builds one of the synthetic benchmarks, augmented with dummy dimensions
/// up to `d` where the base function is lower-dimensional.
pub fn make_synthetic(name: &str, d: usize) -> Result<ObjectiveSpec> {
    let too_small = |required: usize| Error::DimensionTooSmall {
        name: name.to_string(),
        required,
        got: d,
    };
    match name {
        "ackley" => {
            if d < 1 {
                return Err(too_small(1));
            }
            ObjectiveSpec::new(name, vec![(-32.768, 32.768); d], ackley)
                .map(|s| s.with_known_optimum(0.0))
        }
        "branin_aug" => {
            if d < 2 {
                return Err(too_small(2));
            }
            let mut bounds = vec![(0.0, 1.0); d];
            bounds[0] = (-5.0, 10.0);
            bounds[1] = (0.0, 15.0);
            ObjectiveSpec::new(name, bounds, |x: &[f64]| branin(x[0], x[1]))?
                .with_effective_dims(vec![0, 1])
                .map(|s| s.with_known_optimum(BRANIN_OPTIMUM))
        }
        "hartmann6_aug" => {
            if d < 6 {
                return Err(too_small(6));
            }
            ObjectiveSpec::new(name, vec![(0.0, 1.0); d], |x: &[f64]| hartmann6(&x[..6]))?
                .with_effective_dims((0..6).collect())
                .map(|s| s.with_known_optimum(HARTMANN6_OPTIMUM))
        }
        other => Err(Error::UnknownObjective(other.to_string())),
    }
}

pub const BRANIN_OPTIMUM: f64 = 0.397_887_357_729_738_2;
pub const HARTMANN6_OPTIMUM: f64 = -3.322_368_011_415_511;

/// Ackley with `a = 20`, `b = 0.2`, `c = 2π`.
pub fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
    -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
}

pub fn branin(x1: f64, x2: f64) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    let u = x2 - b * x1 * x1 + c * x1 - 6.0;
    u * u + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

const HARTMANN6_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HARTMANN6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HARTMANN6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

/// Published minimizer of the 6-D Hartmann function.
pub const HARTMANN6_MINIMIZER: [f64; 6] = [0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573];

pub fn hartmann6(x: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), 6);
    -HARTMANN6_ALPHA
        .iter()
        .zip(HARTMANN6_A.iter().zip(&HARTMANN6_P))
        .map(|(alpha, (a, p))| {
            let inner: f64 = (0..6).map(|j| a[j] * (x[j] - p[j]).powi(2)).sum();
            alpha * (-inner).exp()
        })
        .sum::<f64>()
}
