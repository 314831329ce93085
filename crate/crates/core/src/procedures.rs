//! Stopping and decision rules of the three procedure families, written as
//! pure step functions over an [`LlrState`] plus a small state machine
//! ([`Monitor`]) that freezes decisions as streams fire.
//!
//! Every rule exists in two flavours. The simple flavour uses the
//! non-strict crossings of the simple-hypothesis procedures; the composite
//! flavour uses the strict crossings and sign side-conditions of the
//! adaptive-likelihood procedures.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{drive_path, PathOutcome};
use crate::error::{Error, Result};
use crate::statistics::LlrState;
use crate::stream_models::{SignalConfig, StreamModel};

/// Prior class of signal subsets: `l <= |A| <= u` out of `k` streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PriorBounds {
    pub l: usize,
    pub u: usize,
    pub k: usize,
}

impl PriorBounds {
    pub fn new(l: usize, u: usize, k: usize) -> Result<Self> {
        if !(l <= u && u <= k && u > 0 && l < k) {
            return Err(Error::config(format!(
                "prior bounds must satisfy 0 <= l <= u <= K, u > 0, l < K (got l={l}, u={u}, K={k})"
            )));
        }
        Ok(Self { l, u, k })
    }

    /// No prior information: `l = 0`, `u = K`.
    pub fn uninformative(k: usize) -> Result<Self> {
        Self::new(0, k, k)
    }

    pub fn known_count(&self) -> Option<usize> {
        (self.l == self.u).then_some(self.l)
    }

    pub fn is_uninformative(&self) -> bool {
        self.l == 0 && self.u == self.k
    }

    pub fn admits(&self, size: usize) -> bool {
        size >= self.l && size <= self.u
    }

    pub fn sizes(&self) -> std::ops::RangeInclusive<usize> {
        self.l..=self.u
    }
}

/// Stopping levels in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Thresholds {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let t = Self { a, b, c, d };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!(
                    "threshold {name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// All four levels moved by the same offset.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            a: self.a + offset,
            b: self.b + offset,
            c: self.c + offset,
            d: self.d + offset,
        }
    }

    pub fn min_level(&self) -> f64 {
        self.a.min(self.b).min(self.c).min(self.d)
    }

    /// One-parameter design used by threshold sweeps.
    ///
    /// SPRT: `a = b = x`. Known count: `c = d = x`. Bounded count:
    /// `a = b = x`, `c = x + ln(K - l)`, `d = x + ln u`.
    pub fn coupled(kind: ProcedureKind, prior: &PriorBounds, x: f64) -> Result<Self> {
        let t = match kind {
            ProcedureKind::DecentralizedSprt => Self { a: x, b: x, c: x, d: x },
            _ if prior.known_count().is_some() => Self { a: x, b: x, c: x, d: x },
            _ => Self {
                a: x,
                b: x,
                c: x + ((prior.k - prior.l) as f64).ln(),
                d: x + (prior.u as f64).ln(),
            },
        };
        t.validate()?;
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcedureKind {
    #[serde(alias = "sprt")]
    DecentralizedSprt,
    #[serde(alias = "proposed")]
    ProposedAsync,
    Synchronous,
}

impl ProcedureKind {
    pub const ALL: [ProcedureKind; 3] = [
        ProcedureKind::DecentralizedSprt,
        ProcedureKind::ProposedAsync,
        ProcedureKind::Synchronous,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProcedureKind::DecentralizedSprt => "decentralized_sprt",
            ProcedureKind::ProposedAsync => "proposed_async",
            ProcedureKind::Synchronous => "synchronous",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "decentralized_sprt" | "sprt" => Ok(ProcedureKind::DecentralizedSprt),
            "proposed_async" | "proposed" => Ok(ProcedureKind::ProposedAsync),
            "synchronous" => Ok(ProcedureKind::Synchronous),
            other => Err(Error::config(format!("unknown procedure kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for ProcedureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Simple-hypothesis rules (non-strict crossings) or adaptive-likelihood
/// rules (strict crossings with sign side-conditions).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleFlavor {
    Simple,
    Composite,
}

/// Per-stream stopping times and decisions of one replication.
///
/// A stop time of 0 marks a stream still undecided (only in partial records).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub stop_time: Vec<u64>,
    pub decision: Vec<bool>,
    pub overall_stop: u64,
}

impl DecisionRecord {
    pub fn k(&self) -> usize {
        self.stop_time.len()
    }

    pub fn is_complete(&self) -> bool {
        self.stop_time.iter().all(|&t| t > 0)
    }

    /// Streams declared signals.
    pub fn signals(&self) -> impl Iterator<Item = usize> + '_ {
        self.decision
            .iter()
            .enumerate()
            .filter(|(_, &d)| d)
            .map(|(k, _)| k)
    }

    pub fn signal_count(&self) -> usize {
        self.decision.iter().filter(|&&d| d).count()
    }

    /// At least one noise stream declared a signal.
    pub fn type1_error(&self, truth: &SignalConfig) -> bool {
        self.signals().any(|k| !truth.is_signal(k))
    }

    /// At least one signal stream declared noise.
    pub fn type2_error(&self, truth: &SignalConfig) -> bool {
        truth.signals().any(|k| !self.decision[k])
    }
}

// ---------------------------------------------------------------------------
// Step rules
// ---------------------------------------------------------------------------

#[inline]
fn sprt_fire(flavor: RuleFlavor, x: f64, t: &Thresholds) -> Option<bool> {
    match flavor {
        RuleFlavor::Simple if x >= t.a => Some(true),
        RuleFlavor::Simple if x <= -t.b => Some(false),
        RuleFlavor::Composite if x > t.a => Some(true),
        RuleFlavor::Composite if x < -t.b => Some(false),
        _ => None,
    }
}

#[inline]
fn proposed_fire(
    flavor: RuleFlavor,
    state: &LlrState,
    x: f64,
    t: &Thresholds,
    prior: &PriorBounds,
) -> Option<bool> {
    let (upper_rank, lower_rank) = match prior.known_count() {
        Some(m) => (m + 1, m),
        None => (prior.l + 1, prior.u),
    };
    let upper_ref = state.ranked(upper_rank);
    let lower_ref = state.ranked(lower_rank);
    let with_exits = prior.known_count().is_none();
    match flavor {
        RuleFlavor::Simple => {
            let (hi, lo) = if with_exits {
                (t.a.min(upper_ref + t.c), (-t.b).max(lower_ref - t.d))
            } else {
                (upper_ref + t.c, lower_ref - t.d)
            };
            if x >= hi {
                Some(true)
            } else if x <= lo {
                Some(false)
            } else {
                None
            }
        }
        RuleFlavor::Composite => {
            let gap_hi = upper_ref < 0.0 && x > (upper_ref + t.c).max(0.0);
            let gap_lo = lower_ref > 0.0 && x < (lower_ref - t.d).min(0.0);
            if gap_hi || (with_exits && x > t.a) {
                Some(true)
            } else if gap_lo || (with_exits && x < -t.b) {
                Some(false)
            } else {
                None
            }
        }
    }
}

/// Fires streams under the given asynchronous rule, appending
/// `(stream, decision)` pairs for every undecided stream that crosses.
pub fn async_step_into(
    kind: ProcedureKind,
    flavor: RuleFlavor,
    state: &LlrState,
    thresholds: &Thresholds,
    prior: &PriorBounds,
    undecided: &[bool],
    out: &mut Vec<(usize, bool)>,
) {
    for (k, &open) in undecided.iter().enumerate() {
        if !open {
            continue;
        }
        let x = state.value(k);
        let fired = match kind {
            ProcedureKind::DecentralizedSprt => sprt_fire(flavor, x, thresholds),
            ProcedureKind::ProposedAsync => proposed_fire(flavor, state, x, thresholds, prior),
            ProcedureKind::Synchronous => None,
        };
        if let Some(d) = fired {
            out.push((k, d));
        }
    }
}

/// Parallel SPRT: stream `k` fires with 1 when `λ_k >= a`, with 0 when `λ_k <= -b`.
pub fn sprt_step(
    state: &LlrState,
    thresholds: &Thresholds,
    undecided: &[bool],
) -> Vec<(usize, bool)> {
    let mut out = Vec::new();
    let prior = PriorBounds {
        l: 0,
        u: state.k(),
        k: state.k(),
    };
    async_step_into(
        ProcedureKind::DecentralizedSprt,
        RuleFlavor::Simple,
        state,
        thresholds,
        &prior,
        undecided,
        &mut out,
    );
    out
}

/// Gap rule (`l = u`) or gap-intersection rule (`l < u`); order statistics
/// range over all streams, decided or not.
pub fn proposed_step(
    state: &LlrState,
    thresholds: &Thresholds,
    prior: &PriorBounds,
    undecided: &[bool],
) -> Vec<(usize, bool)> {
    let mut out = Vec::new();
    async_step_into(
        ProcedureKind::ProposedAsync,
        RuleFlavor::Simple,
        state,
        thresholds,
        prior,
        undecided,
        &mut out,
    );
    out
}

/// Synchronous rule: when it fires, returns the signal mask over all streams.
pub fn synchronous_rule(
    flavor: RuleFlavor,
    state: &LlrState,
    t: &Thresholds,
    prior: &PriorBounds,
) -> Option<Vec<bool>> {
    let k = state.k();
    let count = match prior.known_count() {
        Some(m) => {
            let top = state.ranked(m);
            let next = state.ranked(m + 1);
            let gap = top - next;
            let fire = match flavor {
                RuleFlavor::Simple => gap >= t.c.max(t.d),
                RuleFlavor::Composite => gap > t.c.max(t.d) && next < 0.0 && top > 0.0,
            };
            if !fire {
                return None;
            }
            m
        }
        None => {
            let (l, u) = (prior.l, prior.u);
            let p = state.positive_count();
            let (rl, rl1, ru, ru1) = (
                state.ranked(l),
                state.ranked(l + 1),
                state.ranked(u),
                state.ranked(u + 1),
            );
            let (tau1, tau3, all_out) = match flavor {
                RuleFlavor::Simple => (
                    rl1 <= (-t.b).min(rl - t.c),
                    ru >= t.a.max(t.d + ru1),
                    state.values().iter().all(|&x| x >= t.a || x <= -t.b),
                ),
                RuleFlavor::Composite => (
                    rl1 < (-t.b).min(rl - t.c) && rl > 0.0,
                    ru > t.a.max(t.d + ru1) && ru1 < 0.0,
                    state.values().iter().all(|&x| x >= t.a || x <= -t.b),
                ),
            };
            let tau2 = all_out && p >= l && p <= u;
            if !(tau1 || tau2 || tau3) {
                return None;
            }
            p.max(l).min(u)
        }
    };
    let mut mask = vec![false; k];
    for &s in &state.order()[..count] {
        mask[s] = true;
    }
    Some(mask)
}

/// Simple-hypothesis synchronous step.
pub fn synchronous_step(
    state: &LlrState,
    thresholds: &Thresholds,
    prior: &PriorBounds,
) -> Option<Vec<bool>> {
    synchronous_rule(RuleFlavor::Simple, state, thresholds, prior)
}

// ---------------------------------------------------------------------------
// Monitor
// ---------------------------------------------------------------------------

/// Replication-local state machine applying one procedure to a stream of
/// [`LlrState`]s.
#[derive(Debug, Clone)]
pub struct Monitor {
    kind: ProcedureKind,
    flavor: RuleFlavor,
    thresholds: Thresholds,
    prior: PriorBounds,
    stop_time: Vec<u64>,
    decision: Vec<bool>,
    undecided: Vec<bool>,
    open: usize,
    fired: Vec<(usize, bool)>,
}

impl Monitor {
    pub fn new(
        kind: ProcedureKind,
        flavor: RuleFlavor,
        thresholds: Thresholds,
        prior: PriorBounds,
    ) -> Self {
        let k = prior.k;
        Self {
            kind,
            flavor,
            thresholds,
            prior,
            stop_time: vec![0; k],
            decision: vec![false; k],
            undecided: vec![true; k],
            open: k,
            fired: Vec::with_capacity(k),
        }
    }

    pub fn kind(&self) -> ProcedureKind {
        self.kind
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    pub fn prior(&self) -> &PriorBounds {
        &self.prior
    }

    pub fn reset(&mut self) {
        self.stop_time.iter_mut().for_each(|t| *t = 0);
        self.decision.iter_mut().for_each(|d| *d = false);
        self.undecided.iter_mut().for_each(|u| *u = true);
        self.open = self.prior.k;
        self.fired.clear();
    }

    pub fn is_complete(&self) -> bool {
        self.open == 0
    }

    pub fn undecided_count(&self) -> usize {
        self.open
    }

    /// Applies the rule at the state's time and returns the streams decided
    /// at this step.
    pub fn observe(&mut self, state: &LlrState) -> &[(usize, bool)] {
        self.fired.clear();
        if self.open == 0 {
            return &self.fired;
        }
        match self.kind {
            ProcedureKind::Synchronous => {
                if let Some(mask) =
                    synchronous_rule(self.flavor, state, &self.thresholds, &self.prior)
                {
                    for (k, d) in mask.into_iter().enumerate() {
                        self.fired.push((k, d));
                    }
                }
            }
            _ => async_step_into(
                self.kind,
                self.flavor,
                state,
                &self.thresholds,
                &self.prior,
                &self.undecided,
                &mut self.fired,
            ),
        }
        let n = state.n();
        for &(k, d) in &self.fired {
            self.stop_time[k] = n;
            self.decision[k] = d;
            self.undecided[k] = false;
        }
        self.open -= self.fired.len();
        &self.fired
    }

    pub fn record(&self) -> DecisionRecord {
        DecisionRecord {
            stop_time: self.stop_time.clone(),
            decision: self.decision.clone(),
            overall_stop: self.stop_time.iter().copied().max().unwrap_or(0),
        }
    }
}

/// Samples one replication under `config` and runs `kind` until every
/// stream is decided.
///
/// Hitting `horizon` is an error carrying the partial record.
pub fn run_replication<M: StreamModel, R: Rng + ?Sized>(
    kind: ProcedureKind,
    models: &[M],
    config: &SignalConfig,
    thresholds: &Thresholds,
    prior: &PriorBounds,
    rng: &mut R,
    horizon: u64,
) -> Result<DecisionRecord> {
    check_dimensions(models.len(), config, prior)?;
    thresholds.validate()?;
    if horizon == 0 {
        return Err(Error::config("horizon must be >= 1"));
    }
    let mut monitor = Monitor::new(kind, RuleFlavor::Simple, *thresholds, *prior);
    let outcome = drive_path(models, config.mask(), rng, horizon, |state| {
        monitor.observe(state);
        monitor.is_complete()
    })?;
    match outcome {
        PathOutcome::Stopped(_) => Ok(monitor.record()),
        PathOutcome::Horizon => Err(Error::HorizonExhausted {
            horizon,
            undecided: monitor.undecided_count(),
            partial: Box::new(monitor.record()),
        }),
    }
}

pub(crate) fn check_dimensions(
    k: usize,
    config: &SignalConfig,
    prior: &PriorBounds,
) -> Result<()> {
    if config.k() != k || prior.k != k {
        return Err(Error::config(format!(
            "dimension mismatch: {} models, configuration over {} streams, prior over {}",
            k,
            config.k(),
            prior.k
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream_models::Model;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn th(a: f64, b: f64, c: f64, d: f64) -> Thresholds {
        Thresholds::new(a, b, c, d).unwrap()
    }

    #[test]
    fn prior_validation() {
        assert!(PriorBounds::new(0, 10, 10).is_ok());
        assert!(PriorBounds::new(4, 3, 10).is_err());
        assert!(PriorBounds::new(0, 0, 10).is_err());
        assert!(PriorBounds::new(10, 10, 10).is_err());
        assert!(PriorBounds::new(2, 11, 10).is_err());
    }

    #[test]
    fn threshold_validation() {
        assert!(Thresholds::new(1.0, 1.0, 1.0, 0.0).is_err());
        assert!(Thresholds::new(1.0, f64::INFINITY, 1.0, 1.0).is_err());
    }

    #[test]
    fn sprt_boundaries_inclusive() {
        let t = th(2.0, 2.0, 1.0, 1.0);
        let s = LlrState::from_values(1, vec![2.0, -2.3, 1.99]);
        let fired = sprt_step(&s, &t, &[true, true, true]);
        assert_eq!(fired, vec![(0, true), (1, false)]);
        let fired = sprt_step(&s, &t, &[false, true, true]);
        assert_eq!(fired, vec![(1, false)]);
    }

    #[test]
    fn gap_rule_example() {
        let t = th(5.0, 5.0, 1.0, 3.0);
        let prior = PriorBounds::new(1, 1, 3).unwrap();
        let s = LlrState::from_values(1, vec![2.5, 1.0, 0.3]);
        let fired = proposed_step(&s, &t, &prior, &[true; 3]);
        assert_eq!(fired, vec![(0, true)]);
        let s = LlrState::from_values(1, vec![2.5, 1.0, -0.6]);
        let fired = proposed_step(&s, &t, &prior, &[true; 3]);
        assert_eq!(fired, vec![(0, true), (2, false)]);
    }

    #[test]
    fn gap_intersection_uses_exits_and_gaps() {
        let t = th(3.0, 3.0, 1.0, 1.0);
        let prior = PriorBounds::new(1, 3, 4).unwrap();
        // λ_(2) = 0.5, so the upper gap reference is 1.5; λ_(3) = 0.2 gives a lower reference of -0.8
        let s = LlrState::from_values(1, vec![1.6, 0.5, 0.2, -0.9]);
        let fired = proposed_step(&s, &t, &prior, &[true; 4]);
        assert_eq!(fired, vec![(0, true), (3, false)]);
        let s = LlrState::from_values(1, vec![3.0, 2.8, 2.7, 2.6]);
        let fired = proposed_step(&s, &t, &prior, &[true; 4]);
        assert_eq!(fired, vec![(0, true)]);
    }

    #[test]
    fn simultaneous_crossing_resolves_to_signal() {
        // stream 3 exceeds a while sitting more than d below the u-th value
        let t = th(1.0, 1.0, 20.0, 1.0);
        let prior = PriorBounds::new(1, 2, 4).unwrap();
        let s = LlrState::from_values(1, vec![10.0, 9.0, 2.0, -3.0]);
        let fired = proposed_step(&s, &t, &prior, &[false, false, true, false]);
        assert_eq!(fired, vec![(2, true)]);
    }

    #[test]
    fn synchronous_examples() {
        let t = th(1.0, 1.0, 1.0, 1.0);
        let prior = PriorBounds::new(1, 1, 3).unwrap();
        let s = LlrState::from_values(1, vec![2.5, 1.0, 0.3]);
        assert_eq!(synchronous_step(&s, &t, &prior), Some(vec![true, false, false]));
        let s = LlrState::from_values(1, vec![2.5, 2.0, 0.3]);
        assert_eq!(synchronous_step(&s, &t, &prior), None);

        let none = PriorBounds::uninformative(3).unwrap();
        let s = LlrState::from_values(1, vec![1.2, -1.0, 0.5]);
        assert_eq!(synchronous_step(&s, &t, &none), None);
        let s = LlrState::from_values(1, vec![1.2, -1.0, 1.0]);
        assert_eq!(synchronous_step(&s, &t, &none), Some(vec![true, false, true]));
    }

    #[test]
    fn synchronous_bounded_count_clamps_selection() {
        let t = th(1.0, 1.0, 5.0, 5.0);
        let prior = PriorBounds::new(1, 2, 3).unwrap();
        // all exit (-b, a) with p = 3 > u, so only the tau3 branch could fire; it needs λ_(2) >= λ_(3) + d
        let s = LlrState::from_values(1, vec![2.0, 1.5, 1.2]);
        assert_eq!(synchronous_step(&s, &t, &prior), None);
        let s = LlrState::from_values(1, vec![9.0, 8.0, 1.2]);
        assert_eq!(synchronous_step(&s, &t, &prior), Some(vec![true, true, false]));
        // every value outside (-b, a) with 1 <= p <= u
        let s = LlrState::from_values(1, vec![4.0, -1.5, -2.0]);
        assert_eq!(synchronous_step(&s, &t, &prior), Some(vec![true, false, false]));
        let s = LlrState::from_values(1, vec![0.5, -1.5, -2.0]);
        assert_eq!(synchronous_step(&s, &t, &prior), None);
        // p = 0 < l: the lower gap fires and the top l streams are selected
        let narrow = th(1.0, 1.0, 1.0, 5.0);
        let s = LlrState::from_values(1, vec![-0.2, -1.5, -2.0]);
        assert_eq!(synchronous_step(&s, &narrow, &prior), Some(vec![true, false, false]));
    }

    #[test]
    fn composite_flavor_side_conditions() {
        let t = th(5.0, 5.0, 1.0, 1.0);
        let prior = PriorBounds::new(1, 1, 2).unwrap();
        let mut out = Vec::new();
        let s = LlrState::from_values(1, vec![2.5, -0.3]);
        async_step_into(
            ProcedureKind::ProposedAsync,
            RuleFlavor::Composite,
            &s,
            &t,
            &prior,
            &[true, false],
            &mut out,
        );
        assert_eq!(out, vec![(0, true)]);
        out.clear();
        let s = LlrState::from_values(1, vec![2.5, 0.3]);
        async_step_into(
            ProcedureKind::ProposedAsync,
            RuleFlavor::Composite,
            &s,
            &t,
            &prior,
            &[true, false],
            &mut out,
        );
        assert!(out.is_empty());
        // gap met but the m-th value is not positive
        let s = LlrState::from_values(1, vec![0.0, -3.0]);
        assert_eq!(synchronous_rule(RuleFlavor::Composite, &s, &t, &prior), None);
        assert_eq!(
            synchronous_rule(RuleFlavor::Simple, &s, &t, &prior),
            Some(vec![true, false])
        );
    }

    #[test]
    fn composite_exit_is_strict() {
        let t = th(2.0, 2.0, 1.0, 1.0);
        let prior = PriorBounds::new(1, 2, 3).unwrap();
        let mut out = Vec::new();
        let s = LlrState::from_values(1, vec![2.0, 0.1, 0.0]);
        async_step_into(
            ProcedureKind::ProposedAsync,
            RuleFlavor::Composite,
            &s,
            &t,
            &prior,
            &[true; 3],
            &mut out,
        );
        assert!(out.is_empty());
        let s = LlrState::from_values(1, vec![2.01, 0.1, 0.0]);
        async_step_into(
            ProcedureKind::ProposedAsync,
            RuleFlavor::Composite,
            &s,
            &t,
            &prior,
            &[true; 3],
            &mut out,
        );
        assert_eq!(out, vec![(0, true)]);
    }

    #[test]
    fn horizon_exhaustion_carries_partial_record() {
        let model = Model::bernoulli(0.2, 0.8).unwrap();
        let models = vec![model; 2];
        let inc = 4f64.ln();
        // increments are ±ln 4 so five steps can never reach 100
        let t = th(100.0, 100.0, 100.0 * inc, 100.0 * inc);
        let prior = PriorBounds::new(1, 1, 2).unwrap();
        let config = SignalConfig::canonical(2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = run_replication(
            ProcedureKind::ProposedAsync,
            &models,
            &config,
            &t,
            &prior,
            &mut rng,
            5,
        )
        .unwrap_err();
        match err {
            Error::HorizonExhausted {
                horizon,
                undecided,
                partial,
            } => {
                assert_eq!(horizon, 5);
                assert_eq!(undecided, 2);
                assert!(!partial.is_complete());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let models = vec![Model::gaussian(0.5).unwrap(); 3];
        let config = SignalConfig::canonical(4, 1);
        let prior = PriorBounds::new(1, 1, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = th(1.0, 1.0, 1.0, 1.0);
        assert!(matches!(
            run_replication(
                ProcedureKind::ProposedAsync,
                &models,
                &config,
                &t,
                &prior,
                &mut rng,
                10
            ),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn known_count_completion_has_m_signals_without_errors() {
        let k = 10;
        let models = vec![Model::gaussian(0.5).unwrap(); k];
        let prior = PriorBounds::new(3, 3, k).unwrap();
        let config = SignalConfig::canonical(k, 3);
        let t = th(7.65, 7.65, 7.65, 7.65);
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rec = run_replication(
                ProcedureKind::ProposedAsync,
                &models,
                &config,
                &t,
                &prior,
                &mut rng,
                1_000_000,
            )
            .unwrap();
            if !rec.type1_error(&config) && !rec.type2_error(&config) {
                assert_eq!(rec.signal_count(), 3);
            }
        }
    }

    fn arb_values(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((-40i32..=40).prop_map(|v| v as f64 * 0.25), k)
    }

    proptest! {
        #[test]
        fn uninformative_proposed_matches_sprt(values in arb_values(5), open in prop::collection::vec(any::<bool>(), 5),
                                               a in 0.25f64..5.0, b in 0.25f64..5.0, c in 0.25f64..5.0, d in 0.25f64..5.0) {
            let t = th(a, b, c, d);
            let s = LlrState::from_values(3, values);
            let prior = PriorBounds::uninformative(5).unwrap();
            prop_assert_eq!(proposed_step(&s, &t, &prior, &open), sprt_step(&s, &t, &open));
        }

        #[test]
        fn synchronous_selection_respects_bounds(values in arb_values(6), l in 0usize..6, extra in 0usize..6,
                                                 a in 0.25f64..4.0, c in 0.25f64..4.0) {
            let u = (l + extra).clamp(1, 6);
            prop_assume!(l <= u && l < 6);
            let prior = PriorBounds::new(l, u, 6).unwrap();
            let t = th(a, a, c, c);
            let s = LlrState::from_values(2, values);
            if let Some(mask) = synchronous_step(&s, &t, &prior) {
                let size = mask.iter().filter(|&&m| m).count();
                prop_assert!(size >= l && size <= u);
                if let Some(m) = prior.known_count() {
                    prop_assert_eq!(size, m);
                }
            }
        }

        #[test]
        fn bounded_count_rules_include_sprt_exits(values in arb_values(5), a in 0.25f64..4.0, c in 0.25f64..4.0, d in 0.25f64..4.0) {
            let prior = PriorBounds::new(1, 3, 5).unwrap();
            let t = th(a, a, c, d);
            let s = LlrState::from_values(1, values);
            let open = [true; 5];
            let sprt = sprt_step(&s, &t, &open);
            let prop_fired = proposed_step(&s, &t, &prior, &open);
            for (k, _) in sprt {
                prop_assert!(prop_fired.iter().any(|&(j, _)| j == k));
            }
        }
    }
}
