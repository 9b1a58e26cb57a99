//! Fading-gain distributions: validation, expectations and seeded sampling.
//!
//! A [`FadingModel`] is the raw, deserializable description of an i.i.d.
//! per-slot gain distribution. [`FadingModel::validate`] normalizes it and
//! checks that `E[1/g]` is finite, producing a [`Channel`] that the rest of
//! the crate works with.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SchedError};
use crate::quadrature::{integrate, QuadratureConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FadingModel {
    /// Constant gain `c`.
    Deterministic { c: f64 },
    /// Finite set of `(gain, probability)` atoms.
    Discrete { atoms: Vec<(f64, f64)> },
    /// Density `rate * exp(-rate * (g - threshold))` on `g >= threshold`.
    TruncatedExponential { threshold: f64, rate: f64 },
    /// Piecewise-linear density given on a grid of `(gain, density)` points.
    TabulatedPdf { grid: Vec<(f64, f64)> },
}

impl FadingModel {
    /// The distribution used for the threshold curves: exponential with unit
    /// rate, truncated at 0.001.
    pub fn reference_default() -> Self {
        FadingModel::TruncatedExponential {
            threshold: 0.001,
            rate: 1.0,
        }
    }

    pub fn validate(&self) -> Result<Channel> {
        self.validate_with(&QuadratureConfig::default())
    }

    pub fn validate_with(&self, cfg: &QuadratureConfig) -> Result<Channel> {
        cfg.validate()?;
        let model = match self {
            FadingModel::Deterministic { c } => {
                positive_gain(*c, "deterministic gain")?;
                self.clone()
            }
            FadingModel::Discrete { atoms } => {
                if atoms.is_empty() {
                    return Err(SchedError::InvalidParameter(
                        "discrete model needs at least one atom".into(),
                    ));
                }
                let mut total = 0.0;
                for &(g, p) in atoms {
                    positive_gain(g, "discrete atom")?;
                    if !(p.is_finite() && p >= 0.0) {
                        return Err(SchedError::InvalidParameter(format!(
                            "atom probability must be finite and nonnegative, got {p}"
                        )));
                    }
                    total += p;
                }
                if total <= 0.0 {
                    return Err(SchedError::InvalidParameter(
                        "discrete probabilities sum to zero".into(),
                    ));
                }
                FadingModel::Discrete {
                    atoms: atoms.iter().map(|&(g, p)| (g, p / total)).collect(),
                }
            }
            FadingModel::TruncatedExponential { threshold, rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(SchedError::InvalidParameter(format!(
                        "exponential rate must be positive, got {rate}"
                    )));
                }
                if !threshold.is_finite() || *threshold < 0.0 {
                    return Err(SchedError::NonPositiveSupport(format!(
                        "truncation threshold {threshold}"
                    )));
                }
                if *threshold == 0.0 {
                    return Err(SchedError::DivergentInverseMoment(
                        "untruncated exponential has E[1/g] = inf".into(),
                    ));
                }
                self.clone()
            }
            FadingModel::TabulatedPdf { grid } => {
                if grid.len() < 2 {
                    return Err(SchedError::InvalidParameter(
                        "tabulated pdf needs at least two grid points".into(),
                    ));
                }
                for w in grid.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(SchedError::InvalidParameter(
                            "tabulated pdf gains must be strictly increasing".into(),
                        ));
                    }
                }
                for &(g, d) in grid {
                    positive_gain(g, "tabulated gain")?;
                    if !(d.is_finite() && d >= 0.0) {
                        return Err(SchedError::InvalidParameter(format!(
                            "density must be finite and nonnegative, got {d}"
                        )));
                    }
                }
                let mass: f64 = grid
                    .windows(2)
                    .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
                    .sum();
                if mass <= 0.0 {
                    return Err(SchedError::InvalidParameter(
                        "tabulated pdf has zero mass".into(),
                    ));
                }
                FadingModel::TabulatedPdf {
                    grid: grid.iter().map(|&(g, d)| (g, d / mass)).collect(),
                }
            }
        };

        let mut channel = Channel {
            model,
            inverse_moment: f64::NAN,
        };
        let inv = match channel.expect(|g| 1.0 / g, cfg) {
            Ok(v) => v,
            Err(SchedError::QuadratureNotConverged { estimate, .. }) => {
                return Err(SchedError::DivergentInverseMoment(format!(
                    "quadrature for E[1/g] did not settle (last estimate {estimate:e})"
                )))
            }
            Err(e) => return Err(e),
        };
        if !inv.is_finite() {
            return Err(SchedError::DivergentInverseMoment(format!(
                "E[1/g] = {inv}"
            )));
        }
        channel.inverse_moment = inv;
        Ok(channel)
    }
}

fn positive_gain(g: f64, what: &str) -> Result<()> {
    if g.is_finite() && g > 0.0 {
        Ok(())
    } else {
        Err(SchedError::NonPositiveSupport(format!("{what} {g}")))
    }
}

/// Identifies one reproducible stream of uniforms: `stream_index` selects a
/// ChaCha stream under the key derived from `master_seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeededStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeededStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn uniforms(self) -> Uniforms {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        Uniforms { rng }
    }
}

/// Iterator of uniforms on (0, 1] with 53 bits of resolution.
pub struct Uniforms {
    rng: ChaCha8Rng,
}

impl Iterator for Uniforms {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let bits = self.rng.next_u64() >> 11;
        Some((bits + 1) as f64 * (1.0 / (1u64 << 53) as f64))
    }
}

/// A validated, normalized fading model.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Channel {
    model: FadingModel,
    #[serde(skip)]
    inverse_moment: f64,
}

impl Channel {
    pub fn model(&self) -> &FadingModel {
        &self.model
    }

    /// `E[1/g]`, computed at validation.
    pub fn inverse_moment(&self) -> f64 {
        self.inverse_moment
    }

    pub fn is_deterministic(&self) -> Option<f64> {
        match self.model {
            FadingModel::Deterministic { c } => Some(c),
            FadingModel::Discrete { ref atoms } if atoms.len() == 1 => Some(atoms[0].0),
            _ => None,
        }
    }

    /// `E[f(g)]`. Exact weighted sums for atomic models; adaptive
    /// Gauss–Legendre in `u = exp(-rate (g - threshold))` for the truncated
    /// exponential; the same quadrature segment by segment against the
    /// piecewise-linear density for tabulated models.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F, cfg: &QuadratureConfig) -> Result<f64> {
        match &self.model {
            FadingModel::Deterministic { c } => Ok(f(*c)),
            FadingModel::Discrete { atoms } => Ok(atoms.iter().map(|&(g, p)| p * f(g)).sum()),
            FadingModel::TruncatedExponential { threshold, rate } => {
                let (g0, rate) = (*threshold, *rate);
                integrate(|u: f64| f(g0 - u.ln() / rate), 0.0, 1.0, cfg)
            }
            FadingModel::TabulatedPdf { grid } => {
                let mut total = 0.0;
                for w in grid.windows(2) {
                    let ((a, da), (b, db)) = (w[0], w[1]);
                    if da == 0.0 && db == 0.0 {
                        continue;
                    }
                    let slope = (db - da) / (b - a);
                    total += integrate(|g: f64| f(g) * (da + slope * (g - a)), a, b, cfg)?;
                }
                Ok(total)
            }
        }
    }

    /// Inverse CDF at `q` in (0, 1].
    pub fn quantile(&self, q: f64) -> f64 {
        match &self.model {
            FadingModel::Deterministic { c } => *c,
            FadingModel::Discrete { atoms } => {
                let mut acc = 0.0;
                for &(g, p) in atoms {
                    acc += p;
                    if q <= acc {
                        return g;
                    }
                }
                // rounding left the cumulative sum just short of 1
                atoms
                    .iter()
                    .rev()
                    .find(|a| a.1 > 0.0)
                    .map_or(atoms[atoms.len() - 1].0, |a| a.0)
            }
            FadingModel::TruncatedExponential { threshold, rate } => {
                // survival-form inverse keeps precision in the upper tail
                threshold - (1.0 - q).max(f64::MIN_POSITIVE).ln() / rate
            }
            FadingModel::TabulatedPdf { grid } => tabulated_quantile(grid, q),
        }
    }

    /// `count` i.i.d. gains from `stream`, by inverse CDF.
    pub fn sample(&self, stream: SeededStream, count: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(count);
        self.sample_into(stream, count, &mut out);
        out
    }

    pub fn sample_into(&self, stream: SeededStream, count: usize, out: &mut Vec<f64>) {
        out.clear();
        let us = stream.uniforms().take(count);
        match &self.model {
            FadingModel::Deterministic { c } => out.extend(std::iter::repeat_n(*c, count)),
            // u in (0,1] is a survival probability: g = g0 - ln(u)/rate
            FadingModel::TruncatedExponential { threshold, rate } => {
                out.extend(us.map(|u| threshold - u.ln() / rate))
            }
            _ => out.extend(us.map(|u| self.quantile(u))),
        }
    }
}

fn tabulated_quantile(grid: &[(f64, f64)], q: f64) -> f64 {
    let mut acc = 0.0;
    for w in grid.windows(2) {
        let (g0, p0) = w[0];
        let (g1, p1) = w[1];
        let width = g1 - g0;
        let mass = 0.5 * width * (p0 + p1);
        if q <= acc + mass && mass > 0.0 {
            let r = q - acc;
            let slope = (p1 - p0) / width;
            // root of p0 x + slope x^2 / 2 = r, written without cancellation
            let disc = (p0 * p0 + 2.0 * slope * r).max(0.0);
            let x = 2.0 * r / (p0 + disc.sqrt());
            return (g0 + x.min(width)).max(g0);
        }
        acc += mass;
    }
    grid[grid.len() - 1].0
}
