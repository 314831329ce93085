//! Exact decision-time and error distributions for Bernoulli streams.
//!
//! Paths are enumerated step by step, with paths that agree on the success
//! count of every stream and on every decision made so far merged into one
//! weighted state. The LLR of a stream is a function of its success count,
//! so merged paths have identical futures.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procedures::{
    async_step_into, check_dimensions, synchronous_rule, PriorBounds, ProcedureKind, RuleFlavor,
    Thresholds,
};
use crate::statistics::LlrState;
use crate::stream_models::{BernoulliModel, Model, SignalConfig};

/// Largest number of merged live states carried from one step to the next.
pub const MAX_LIVE_STATES: usize = 10_000_000;

const UNDECIDED: u8 = 0;
const NOISE: u8 = 1;
const SIGNAL: u8 = 2;

/// Exact joint law of per-stream stopping times and decisions up to `depth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactDistribution {
    pub depth: u64,
    /// `stop[k][n - 1] = [P(T_k = n, D_k = 0), P(T_k = n, D_k = 1)]`.
    pub stop: Vec<Vec<[f64; 2]>>,
    /// Probability of a false positive among decisions made by `depth`.
    pub fwe1: f64,
    /// Probability of a false negative among decisions made by `depth`.
    pub fwe2: f64,
    /// `E[T_k 1{T_k <= depth}]`.
    pub truncated_mean: Vec<f64>,
    /// Probability that some stream is still undecided at `depth`.
    pub residual_mass: f64,
}

impl ExactDistribution {
    /// `P(T_k = n)` for `1 <= n <= depth`.
    pub fn stop_probability(&self, stream: usize, n: u64) -> f64 {
        let [a, b] = self.stop[stream][(n - 1) as usize];
        a + b
    }
}

type StateKey = (Vec<u32>, Vec<u8>);

/// Enumerates all paths of `kind` under `config` up to `depth` steps.
pub fn enumerate_exact(
    models: &[Model],
    kind: ProcedureKind,
    config: &SignalConfig,
    thresholds: &Thresholds,
    prior: &PriorBounds,
    depth: u64,
) -> Result<ExactDistribution> {
    check_dimensions(models.len(), config, prior)?;
    thresholds.validate()?;
    let streams: Vec<&BernoulliModel> = models
        .iter()
        .map(|m| {
            m.as_bernoulli()
                .ok_or_else(|| Error::config("exact enumeration requires Bernoulli streams"))
        })
        .collect::<Result<_>>()?;
    if depth == 0 {
        return Err(Error::config("enumeration depth must be >= 1"));
    }
    let k = streams.len();
    if k > 16 {
        return Err(Error::EnumerationTooLarge(format!(
            "{k} streams give 2^{k} outcomes per step"
        )));
    }
    let success: Vec<f64> = streams
        .iter()
        .enumerate()
        .map(|(j, m)| m.success_probability(config.is_signal(j)))
        .collect();
    let outcomes: Vec<f64> = (0..1usize << k)
        .map(|bits| {
            (0..k)
                .map(|j| if bits >> j & 1 == 1 { success[j] } else { 1.0 - success[j] })
                .product()
        })
        .collect();

    let keep_counts = kind != ProcedureKind::DecentralizedSprt;
    let mut out = ExactDistribution {
        depth,
        stop: vec![vec![[0.0; 2]; depth as usize]; k],
        fwe1: 0.0,
        fwe2: 0.0,
        truncated_mean: vec![0.0; k],
        residual_mass: 0.0,
    };
    let mut live: BTreeMap<StateKey, f64> = BTreeMap::new();
    live.insert((vec![0; k], vec![UNDECIDED; k]), 1.0);
    let mut fired = Vec::with_capacity(k);
    for n in 1..=depth {
        let mut next: BTreeMap<StateKey, f64> = BTreeMap::new();
        for ((counts, status), mass) in &live {
            let had1 = type1(status, config);
            let had2 = type2(status, config);
            for (bits, &p) in outcomes.iter().enumerate() {
                let mut counts = counts.clone();
                let mut status = status.clone();
                for (j, c) in counts.iter_mut().enumerate() {
                    *c += (bits >> j & 1) as u32;
                }
                let lambda: Vec<f64> = counts
                    .iter()
                    .zip(&streams)
                    .map(|(&s, m)| {
                        let (one, zero) = m.llr_values();
                        s as f64 * one + (n - s as u64) as f64 * zero
                    })
                    .collect();
                let state = LlrState::from_values(n, lambda);
                let undecided: Vec<bool> = status.iter().map(|&s| s == UNDECIDED).collect();
                fired.clear();
                match kind {
                    ProcedureKind::Synchronous => {
                        if let Some(mask) =
                            synchronous_rule(RuleFlavor::Simple, &state, thresholds, prior)
                        {
                            fired.extend(mask.into_iter().enumerate());
                        }
                    }
                    _ => async_step_into(
                        kind,
                        RuleFlavor::Simple,
                        &state,
                        thresholds,
                        prior,
                        &undecided,
                        &mut fired,
                    ),
                }
                let w = mass * p;
                for &(j, d) in &fired {
                    status[j] = if d { SIGNAL } else { NOISE };
                    out.stop[j][(n - 1) as usize][d as usize] += w;
                    out.truncated_mean[j] += w * n as f64;
                }
                if !had1 && type1(&status, config) {
                    out.fwe1 += w;
                }
                if !had2 && type2(&status, config) {
                    out.fwe2 += w;
                }
                if status.iter().all(|&s| s != UNDECIDED) {
                    continue;
                }
                if !keep_counts {
                    for (c, &s) in counts.iter_mut().zip(&status) {
                        if s != UNDECIDED {
                            *c = 0;
                        }
                    }
                }
                *next.entry((counts, status)).or_insert(0.0) += w;
            }
        }
        if next.len() > MAX_LIVE_STATES {
            return Err(Error::EnumerationTooLarge(format!(
                "{} live states at step {n} exceed the limit of {MAX_LIVE_STATES}",
                next.len()
            )));
        }
        live = next;
    }
    out.residual_mass = live.values().sum();
    Ok(out)
}

fn type1(status: &[u8], truth: &SignalConfig) -> bool {
    status
        .iter()
        .enumerate()
        .any(|(j, &s)| s == SIGNAL && !truth.is_signal(j))
}

fn type2(status: &[u8], truth: &SignalConfig) -> bool {
    status
        .iter()
        .enumerate()
        .any(|(j, &s)| s == NOISE && truth.is_signal(j))
}
