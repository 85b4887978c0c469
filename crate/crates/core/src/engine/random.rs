//! The RANDOM primitive: a value range plus a probability distribution.

use std::fmt;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::rng::RngStream;
use crate::state::Value;

/// Raised by a [`Chooser`] that cannot perform a draw itself. Branching
/// execution uses it to learn the outcome distribution at a draw site.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BranchSignal {
    /// A categorical draw with these probabilities needs an outcome.
    NeedsChoice { probs: Vec<f64>, labels: Vec<String> },
    /// A continuous draw was requested; it has no finite outcome set.
    Continuous,
}

impl fmt::Display for BranchSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BranchSignal::NeedsChoice { probs, .. } => {
                write!(f, "categorical draw over {} outcomes needs a choice", probs.len())
            }
            BranchSignal::Continuous => f.write_str("continuous draw cannot be branched"),
        }
    }
}

/// Source of random outcomes for transitions.
pub trait Chooser {
    /// Picks an index with probability `probs[i]`. `probs` is normalized and
    /// `label(i)` names outcome `i` for reporting.
    fn categorical(
        &mut self,
        probs: &[f64],
        label: &dyn Fn(usize) -> String,
    ) -> Result<usize, BranchSignal>;

    /// Uniform in `[0, 1)`.
    fn uniform(&mut self) -> Result<f64, BranchSignal>;

    /// Standard normal.
    fn normal(&mut self) -> Result<f64, BranchSignal>;
}

impl Chooser for RngStream {
    fn categorical(
        &mut self,
        probs: &[f64],
        _label: &dyn Fn(usize) -> String,
    ) -> Result<usize, BranchSignal> {
        let u = RngStream::uniform(self);
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last = i;
                if u < acc {
                    return Ok(i);
                }
            }
        }
        Ok(last)
    }

    fn uniform(&mut self) -> Result<f64, BranchSignal> {
        Ok(RngStream::uniform(self))
    }

    fn normal(&mut self) -> Result<f64, BranchSignal> {
        Ok(RngStream::normal(self))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueRange {
    /// The whole real line; only meaningful for GAUSS.
    Unbounded,
    /// Half-open `[lo, hi)`.
    Interval { lo: f64, hi: f64 },
    Values(Vec<Value>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Flat,
    Gauss { mean: f64, sigma: f64 },
    Weights(Vec<f64>),
    /// Born weighting: `p_i = |a_i|^2 / sum_j |a_j|^2`.
    Psi(Vec<Complex64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomSpec {
    pub range: ValueRange,
    pub dist: Distribution,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RandomError {
    #[error("empty value range")]
    EmptyRange,
    #[error("GAUSS sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("weights must be non-negative with a positive sum")]
    ZeroWeights,
    #[error("{dist} needs {expected} entries to match the value list, got {got}")]
    LengthMismatch {
        dist: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{0}")]
    Unsupported(String),
    #[error("truncated GAUSS rejected {0} consecutive draws")]
    TruncationExhausted(usize),
    #[error("{0}")]
    Branch(BranchSignal),
}

const MAX_REJECTIONS: usize = 100_000;

impl RandomSpec {
    pub fn new(range: ValueRange, dist: Distribution) -> Self {
        RandomSpec { range, dist }
    }

    pub fn validate(&self) -> Result<(), RandomError> {
        match (&self.range, &self.dist) {
            (ValueRange::Interval { lo, hi }, _) if !(lo < hi) => Err(RandomError::EmptyRange),
            (ValueRange::Values(v), _) if v.is_empty() => Err(RandomError::EmptyRange),
            (_, Distribution::Gauss { sigma, .. }) if !(*sigma > 0.0) => {
                Err(RandomError::NonPositiveSigma(*sigma))
            }
            (ValueRange::Unbounded, Distribution::Flat) => Err(RandomError::Unsupported(
                "FLAT needs a bounded value range".into(),
            )),
            (ValueRange::Values(_), Distribution::Gauss { .. }) => {
                self.probabilities().map(|_| ())
            }
            (ValueRange::Values(_), _) => self.probabilities().map(|_| ()),
            (_, Distribution::Weights(_)) | (_, Distribution::Psi(_)) => Err(
                RandomError::Unsupported("WEIGHTS and PSI need a finite value list".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Outcome probabilities for a finite value list; `None` for continuous
    /// ranges.
    pub fn finite_probabilities(&self) -> Option<Result<Vec<f64>, RandomError>> {
        match self.range {
            ValueRange::Values(_) => Some(self.probabilities()),
            _ => None,
        }
    }

    fn probabilities(&self) -> Result<Vec<f64>, RandomError> {
        let ValueRange::Values(values) = &self.range else {
            return Err(RandomError::Unsupported("not a finite range".into()));
        };
        let m = values.len();
        if m == 0 {
            return Err(RandomError::EmptyRange);
        }
        let check_len = |dist, got| {
            if got == m {
                Ok(())
            } else {
                Err(RandomError::LengthMismatch {
                    dist,
                    expected: m,
                    got,
                })
            }
        };
        let raw: Vec<f64> = match &self.dist {
            Distribution::Flat => vec![1.0; m],
            Distribution::Weights(w) => {
                check_len("WEIGHTS", w.len())?;
                if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                    return Err(RandomError::ZeroWeights);
                }
                w.clone()
            }
            Distribution::Psi(a) => {
                check_len("PSI", a.len())?;
                a.iter().map(|z| z.norm_sqr()).collect()
            }
            Distribution::Gauss { mean, sigma } => {
                if !(*sigma > 0.0) {
                    return Err(RandomError::NonPositiveSigma(*sigma));
                }
                values
                    .iter()
                    .map(|v| {
                        v.as_f64()
                            .map(|x| (-(x - mean).powi(2) / (2.0 * sigma * sigma)).exp())
                            .ok_or_else(|| {
                                RandomError::Unsupported(
                                    "GAUSS over a value list needs numeric values".into(),
                                )
                            })
                    })
                    .collect::<Result<_, _>>()?
            }
        };
        normalize(raw)
    }
}

/// Scales non-negative weights to sum to one.
pub fn normalize(weights: Vec<f64>) -> Result<Vec<f64>, RandomError> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(RandomError::ZeroWeights);
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Born probabilities `|a_i|^2 / sum |a_j|^2`.
pub fn born_probabilities(amplitudes: &[Complex64]) -> Result<Vec<f64>, RandomError> {
    normalize(amplitudes.iter().map(|a| a.norm_sqr()).collect())
}

/// Draws one value according to `spec`.
pub fn sample_random(spec: &RandomSpec, chooser: &mut dyn Chooser) -> Result<Value, RandomError> {
    spec.validate()?;
    match (&spec.range, &spec.dist) {
        (ValueRange::Values(values), _) => {
            let probs = spec.probabilities()?;
            let i = chooser
                .categorical(&probs, &|i| values[i].to_string())
                .map_err(RandomError::Branch)?;
            Ok(values[i].clone())
        }
        (ValueRange::Interval { lo, hi }, Distribution::Flat) => {
            let u = chooser.uniform().map_err(RandomError::Branch)?;
            let x = lo + u * (hi - lo);
            Ok(Value::Real(if x >= *hi { hi.next_down() } else { x }))
        }
        (ValueRange::Interval { lo, hi }, Distribution::Gauss { mean, sigma }) => {
            for _ in 0..MAX_REJECTIONS {
                let x = mean + sigma * chooser.normal().map_err(RandomError::Branch)?;
                if x >= *lo && x < *hi {
                    return Ok(Value::Real(x));
                }
            }
            Err(RandomError::TruncationExhausted(MAX_REJECTIONS))
        }
        (ValueRange::Unbounded, Distribution::Gauss { mean, sigma }) => {
            let z = chooser.normal().map_err(RandomError::Branch)?;
            Ok(Value::Real(mean + sigma * z))
        }
        _ => Err(RandomError::Unsupported("unsupported range/distribution pair".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(vals: &[i64]) -> ValueRange {
        ValueRange::Values(vals.iter().map(|&v| Value::Int(v)).collect())
    }

    #[test]
    fn flat_interval_mean_matches_closed_form() {
        // Mean of U[0,1) is 1/2; 1e5 draws put the sample mean within
        // 0.01 (about 11 standard errors).
        let spec = RandomSpec::new(ValueRange::Interval { lo: 0.0, hi: 1.0 }, Distribution::Flat);
        let mut rng = RngStream::new(2024);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = sample_random(&spec, &mut rng).unwrap().as_f64().unwrap();
            assert!((0.0..1.0).contains(&x));
            sum += x;
        }
        assert!((sum / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn psi_weights_follow_born_rule() {
        let spec = RandomSpec::new(
            set(&[0, 1]),
            Distribution::Psi(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]),
        );
        let p = spec.finite_probabilities().unwrap().unwrap();
        assert!((p[0] - 0.36).abs() < 1e-15 && (p[1] - 0.64).abs() < 1e-15);
    }

    #[test]
    fn degenerate_weights_always_pick_the_same_value() {
        let spec = RandomSpec::new(set(&[0, 1]), Distribution::Weights(vec![1.0, 0.0]));
        let mut rng = RngStream::new(5);
        for _ in 0..1000 {
            assert_eq!(sample_random(&spec, &mut rng).unwrap(), Value::Int(0));
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut rng = RngStream::new(0);
        let zero = RandomSpec::new(set(&[0, 1]), Distribution::Weights(vec![0.0, 0.0]));
        assert_eq!(sample_random(&zero, &mut rng), Err(RandomError::ZeroWeights));
        let sigma = RandomSpec::new(
            ValueRange::Unbounded,
            Distribution::Gauss {
                mean: 0.0,
                sigma: 0.0,
            },
        );
        assert!(matches!(sample_random(&sigma, &mut rng), Err(RandomError::NonPositiveSigma(_))));
        let empty = RandomSpec::new(ValueRange::Interval { lo: 1.0, hi: 1.0 }, Distribution::Flat);
        assert_eq!(sample_random(&empty, &mut rng), Err(RandomError::EmptyRange));
        let short = RandomSpec::new(set(&[0, 1, 2]), Distribution::Weights(vec![1.0]));
        assert!(matches!(short.validate(), Err(RandomError::LengthMismatch { .. })));
    }

    #[test]
    fn truncated_gauss_stays_in_range() {
        let spec = RandomSpec::new(
            ValueRange::Interval { lo: 0.0, hi: 1.0 },
            Distribution::Gauss {
                mean: 0.5,
                sigma: 2.0,
            },
        );
        let mut rng = RngStream::new(8);
        for _ in 0..1000 {
            let x = sample_random(&spec, &mut rng).unwrap().as_f64().unwrap();
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn unbounded_gauss_has_requested_moments() {
        let spec = RandomSpec::new(
            ValueRange::Unbounded,
            Distribution::Gauss {
                mean: 3.0,
                sigma: 2.0,
            },
        );
        let mut rng = RngStream::new(77);
        let n = 50_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_random(&spec, &mut rng).unwrap().as_f64().unwrap())
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 3.0).abs() < 0.05, "mean {mean}");
        assert!((var - 4.0).abs() < 0.15, "var {var}");
    }
}
