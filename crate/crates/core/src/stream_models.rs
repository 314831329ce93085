//! Generative models for a single data stream.
//!
//! A model knows how to draw an observation under the null or the
//! alternative and how to turn an observation into the exact one-step
//! log-likelihood ratio (in nats). Models are immutable and can be shared
//! freely between concurrently running replications.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contract for a stream with simple null and alternative hypotheses.
pub trait StreamModel {
    /// Draws one observation from the alternative if `is_signal`, else from the null.
    fn sample<R: Rng + ?Sized>(&self, is_signal: bool, rng: &mut R) -> f64;

    /// Exact one-step LLR `log dP1/dP0 (x)` in nats.
    fn llr_increment(&self, observation: f64) -> f64;

    /// KL divergence of the alternative from the null, the LLR drift under the alternative.
    fn kl_alt(&self) -> f64;

    /// KL divergence of the null from the alternative; the LLR drifts at `-kl_null` under the null.
    fn kl_null(&self) -> f64;

    fn kl_numbers(&self) -> (f64, f64) {
        (self.kl_alt(), self.kl_null())
    }

    /// Whether observations have atoms, so that LLR ties occur with positive probability.
    fn is_discrete(&self) -> bool {
        false
    }
}

/// Unit-variance Gaussian with mean 0 under the null and `mu` under the alternative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMeanModel {
    pub mu: f64,
}

impl GaussianMeanModel {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::config(format!(
                "gaussian_mean requires a finite mu > 0, got {mu}"
            )));
        }
        Ok(Self { mu })
    }
}

impl StreamModel for GaussianMeanModel {
    #[inline]
    fn sample<R: Rng + ?Sized>(&self, is_signal: bool, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        if is_signal {
            z + self.mu
        } else {
            z
        }
    }

    #[inline]
    fn llr_increment(&self, observation: f64) -> f64 {
        self.mu * (observation - 0.5 * self.mu)
    }

    fn kl_alt(&self) -> f64 {
        0.5 * self.mu * self.mu
    }

    fn kl_null(&self) -> f64 {
        0.5 * self.mu * self.mu
    }
}

/// Bernoulli observations with success probability `p0` (null) or `p1` (alternative).
///
/// Only used where a discrete sample space is needed, e.g. the exact
/// enumeration oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernoulliModel {
    pub p0: f64,
    pub p1: f64,
    llr_one: f64,
    llr_zero: f64,
}

impl BernoulliModel {
    pub fn new(p0: f64, p1: f64) -> Result<Self> {
        let open = |p: f64| p > 0.0 && p < 1.0;
        if !(open(p0) && open(p1)) {
            return Err(Error::config(format!(
                "bernoulli probabilities must lie in (0,1), got p0={p0}, p1={p1}"
            )));
        }
        if p0 == p1 {
            return Err(Error::config("bernoulli model requires p1 != p0"));
        }
        Ok(Self {
            p0,
            p1,
            llr_one: (p1 / p0).ln(),
            llr_zero: ((1.0 - p1) / (1.0 - p0)).ln(),
        })
    }

    /// LLR increments for an observed 1 and an observed 0.
    pub fn llr_values(&self) -> (f64, f64) {
        (self.llr_one, self.llr_zero)
    }

    pub fn success_probability(&self, is_signal: bool) -> f64 {
        if is_signal {
            self.p1
        } else {
            self.p0
        }
    }
}

fn bernoulli_kl(p: f64, q: f64) -> f64 {
    p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
}

impl StreamModel for BernoulliModel {
    #[inline]
    fn sample<R: Rng + ?Sized>(&self, is_signal: bool, rng: &mut R) -> f64 {
        let p = self.success_probability(is_signal);
        if rng.random::<f64>() < p {
            1.0
        } else {
            0.0
        }
    }

    #[inline]
    fn llr_increment(&self, observation: f64) -> f64 {
        observation * self.llr_one + (1.0 - observation) * self.llr_zero
    }

    fn kl_alt(&self) -> f64 {
        bernoulli_kl(self.p1, self.p0)
    }

    fn kl_null(&self) -> f64 {
        bernoulli_kl(self.p0, self.p1)
    }

    fn is_discrete(&self) -> bool {
        true
    }
}

/// Closed set of shipped simple-hypothesis models, dispatched statically in the hot loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    GaussianMean(GaussianMeanModel),
    Bernoulli(BernoulliModel),
}

impl Model {
    pub fn gaussian(mu: f64) -> Result<Self> {
        GaussianMeanModel::new(mu).map(Model::GaussianMean)
    }

    pub fn bernoulli(p0: f64, p1: f64) -> Result<Self> {
        BernoulliModel::new(p0, p1).map(Model::Bernoulli)
    }

    pub fn as_bernoulli(&self) -> Option<&BernoulliModel> {
        match self {
            Model::Bernoulli(b) => Some(b),
            _ => None,
        }
    }
}

impl StreamModel for Model {
    #[inline]
    fn sample<R: Rng + ?Sized>(&self, is_signal: bool, rng: &mut R) -> f64 {
        match self {
            Model::GaussianMean(m) => m.sample(is_signal, rng),
            Model::Bernoulli(m) => m.sample(is_signal, rng),
        }
    }

    #[inline]
    fn llr_increment(&self, observation: f64) -> f64 {
        match self {
            Model::GaussianMean(m) => m.llr_increment(observation),
            Model::Bernoulli(m) => m.llr_increment(observation),
        }
    }

    fn kl_alt(&self) -> f64 {
        match self {
            Model::GaussianMean(m) => m.kl_alt(),
            Model::Bernoulli(m) => m.kl_alt(),
        }
    }

    fn kl_null(&self) -> f64 {
        match self {
            Model::GaussianMean(m) => m.kl_null(),
            Model::Bernoulli(m) => m.kl_null(),
        }
    }

    fn is_discrete(&self) -> bool {
        matches!(self, Model::Bernoulli(_))
    }
}

/// The true subset `A` of signal streams, stored as a membership mask over `0..K`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignalConfig {
    signals: Vec<bool>,
}

impl SignalConfig {
    pub fn from_mask(signals: Vec<bool>) -> Self {
        Self { signals }
    }

    /// Builds `A` from zero-based stream indices.
    pub fn from_indices(k: usize, indices: &[usize]) -> Result<Self> {
        let mut signals = vec![false; k];
        for &i in indices {
            if i >= k {
                return Err(Error::config(format!(
                    "signal index {} out of range for K={k}",
                    i + 1
                )));
            }
            signals[i] = true;
        }
        Ok(Self { signals })
    }

    /// Builds `A` from one-based stream labels as used in configs and reports.
    pub fn from_labels(k: usize, labels: &[usize]) -> Result<Self> {
        if labels.contains(&0) {
            return Err(Error::config("stream labels are one-based"));
        }
        let zero: Vec<usize> = labels.iter().map(|l| l - 1).collect();
        Self::from_indices(k, &zero)
    }

    /// Canonical representative `{1..s}` of all size-`s` configurations.
    pub fn canonical(k: usize, s: usize) -> Self {
        Self {
            signals: (0..k).map(|i| i < s).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.signals.len()
    }

    pub fn size(&self) -> usize {
        self.signals.iter().filter(|&&s| s).count()
    }

    #[inline]
    pub fn is_signal(&self, stream: usize) -> bool {
        self.signals[stream]
    }

    pub fn mask(&self) -> &[bool] {
        &self.signals
    }

    pub fn signals(&self) -> impl Iterator<Item = usize> + '_ {
        self.signals
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(i, _)| i)
    }

    pub fn noises(&self) -> impl Iterator<Item = usize> + '_ {
        self.signals
            .iter()
            .enumerate()
            .filter(|(_, &s)| !s)
            .map(|(i, _)| i)
    }

    pub fn complement(&self) -> Self {
        Self {
            signals: self.signals.iter().map(|s| !s).collect(),
        }
    }

    /// One-based labels, e.g. `{1,3}`.
    pub fn label(&self) -> String {
        let inner: Vec<String> = self.signals().map(|i| (i + 1).to_string()).collect();
        format!("{{{}}}", inner.join(","))
    }
}

impl fmt::Display for SignalConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}
