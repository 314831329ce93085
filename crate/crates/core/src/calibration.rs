//! Threshold selection with familywise error guarantees.
//!
//! Closed-form thresholds come with analytic error bounds. Monte Carlo
//! calibration shifts them by a common offset until the largest estimated
//! error rate over the signal configurations meets its target; the
//! estimates use importance sampling so that very small targets stay
//! affordable.
//!
//! The importance-sampling proposal is a uniform mixture of product
//! measures `P_C` for signal sets `C` that sit one step away from the truth
//! (one noise stream turned into a signal, or one signal/noise swap). The
//! likelihood ratio is evaluated at the first erroneous decision. For
//! exchangeable continuous streams the estimator is additionally averaged
//! over all configurations of the same size, which have equal error rates.

use itertools::Itertools;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{replication_rng, tag, try_par_indexed, McSettings, Moments};
use crate::error::{Error, Result};
use crate::procedures::{check_dimensions, Monitor, PriorBounds, ProcedureKind, RuleFlavor, Thresholds};
use crate::statistics::LlrState;
use crate::stream_models::{SignalConfig, StreamModel};
use crate::engine::{drive_path, PathOutcome};

/// Largest number of signal configurations an exhaustive search may visit.
pub const MAX_CONFIGURATIONS: usize = 100_000;

/// Share of importance-sampling replications given to the enlarged-set
/// component when a rule mixes it with the exchanged-pair component.
const ADD_SHARE: (u64, u64) = (9, 10);

/// Target familywise error rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorTargets {
    pub alpha: f64,
    pub beta: f64,
}

impl ErrorTargets {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let open = |x: f64| x > 0.0 && x < 1.0;
        if !(open(alpha) && open(beta)) {
            return Err(Error::config(format!(
                "error targets must lie in (0,1), got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorType {
    /// At least one false positive.
    TypeI,
    /// At least one false negative.
    TypeII,
}

impl ErrorType {
    fn index(self) -> u64 {
        match self {
            ErrorType::TypeI => 1,
            ErrorType::TypeII => 2,
        }
    }
}

/// Monte Carlo estimate of an error probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FweEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub replications: usize,
}

impl FweEstimate {
    pub fn zero(replications: usize) -> Self {
        Self {
            estimate: 0.0,
            std_error: 0.0,
            replications,
        }
    }

    fn from_moments(m: &Moments) -> Self {
        Self {
            estimate: m.mean(),
            std_error: m.std_error(),
            replications: m.count as usize,
        }
    }

    /// Combines strata sampled in fixed proportions.
    fn stratified(strata: &[Moments]) -> Self {
        let n: u64 = strata.iter().map(|m| m.count).sum();
        let (mut mean, mut var) = (0.0, 0.0);
        for m in strata.iter().filter(|m| m.count > 0) {
            let f = m.count as f64 / n as f64;
            mean += f * m.mean();
            var += f * f * m.variance() / m.count as f64;
        }
        Self {
            estimate: mean,
            std_error: var.sqrt(),
            replications: n as usize,
        }
    }

    /// Standard error over estimate; 0 for an exact zero.
    pub fn relative_error(&self) -> f64 {
        if self.estimate == 0.0 {
            if self.std_error == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.std_error / self.estimate
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    Analytic,
    MonteCarlo,
}

/// Which signal configurations the worst case is taken over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigSelection {
    /// One representative `{1..s}` per admissible size when all streams are
    /// identical and continuous, every admissible set otherwise.
    Auto,
    /// One representative per admissible size.
    Canonical,
    Exhaustive,
    Explicit(Vec<SignalConfig>),
}

/// Estimated error rates of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigErrorReport {
    pub config: String,
    pub fwe1: FweEstimate,
    pub fwe2: FweEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub thresholds: Thresholds,
    pub method: CalibrationMethod,
    /// Common offset added to the closed-form thresholds.
    pub offset: f64,
    pub iterations: usize,
    pub achieved: Vec<ConfigErrorReport>,
}

// ---------------------------------------------------------------------------
// Closed form
// ---------------------------------------------------------------------------

/// Thresholds whose error bounds meet the targets for every admissible configuration.
///
/// Levels not used by a rule are set equal to their used counterparts.
pub fn analytic_thresholds(
    kind: ProcedureKind,
    targets: &ErrorTargets,
    prior: &PriorBounds,
) -> Result<Thresholds> {
    let la = targets.alpha.ln().abs();
    let lb = targets.beta.ln().abs();
    let k = prior.k as f64;
    let (l, u) = (prior.l as f64, prior.u as f64);
    match (kind, prior.known_count()) {
        (ProcedureKind::DecentralizedSprt, _) => {
            let a = la + (k - l).ln();
            let b = lb + u.ln();
            Thresholds::new(a, b, a, b)
        }
        (_, Some(m)) => {
            let m = m as f64;
            let pairs = (m * (k - m)).ln();
            let (c, d) = (la + pairs, lb + pairs);
            Thresholds::new(c, d, c, d)
        }
        (_, None) => Thresholds::new(
            la + k.ln(),
            lb + k.ln(),
            la + ((k - l) * k).ln(),
            lb + (u * k).ln(),
        ),
    }
}

/// Analytic upper bound on the error rate of `kind` under `config`.
pub fn fwe_bound(
    kind: ProcedureKind,
    prior: &PriorBounds,
    thresholds: &Thresholds,
    config: &SignalConfig,
    error_type: ErrorType,
) -> f64 {
    let s = config.size() as f64;
    let n = (config.k() - config.size()) as f64;
    let t = thresholds;
    let bound = match (kind, prior.known_count(), error_type) {
        (ProcedureKind::DecentralizedSprt, _, ErrorType::TypeI) => n * (-t.a).exp(),
        (ProcedureKind::DecentralizedSprt, _, ErrorType::TypeII) => s * (-t.b).exp(),
        (ProcedureKind::ProposedAsync, Some(_), ErrorType::TypeI) => s * n * (-t.c).exp(),
        (ProcedureKind::ProposedAsync, Some(_), ErrorType::TypeII) => s * n * (-t.d).exp(),
        (ProcedureKind::Synchronous, Some(_), _) => s * n * (-t.c.max(t.d)).exp(),
        (_, None, ErrorType::TypeI) => n * ((-t.a).exp() + s * (-t.c).exp()),
        (_, None, ErrorType::TypeII) => s * ((-t.b).exp() + n * (-t.d).exp()),
    };
    bound.min(1.0)
}

/// Signal configurations over which worst-case error rates are taken.
pub fn configurations<M: StreamModel + PartialEq>(
    models: &[M],
    prior: &PriorBounds,
    selection: &ConfigSelection,
) -> Result<Vec<SignalConfig>> {
    let k = prior.k;
    let canonical = || prior.sizes().map(|s| SignalConfig::canonical(k, s)).collect();
    match selection {
        ConfigSelection::Canonical => Ok(canonical()),
        ConfigSelection::Auto if exchangeable(models) => Ok(canonical()),
        ConfigSelection::Auto | ConfigSelection::Exhaustive => {
            let total: f64 = prior.sizes().map(|s| binomial(k, s)).sum();
            if total > MAX_CONFIGURATIONS as f64 {
                return Err(Error::EnumerationTooLarge(format!(
                    "{total} signal configurations for K={k}, l={}, u={} exceed the limit of {MAX_CONFIGURATIONS}",
                    prior.l, prior.u
                )));
            }
            let mut out = Vec::new();
            for s in prior.sizes() {
                for combo in (0..k).combinations(s) {
                    out.push(SignalConfig::from_indices(k, &combo)?);
                }
            }
            Ok(out)
        }
        ConfigSelection::Explicit(list) => {
            for c in list {
                if c.k() != k || !prior.admits(c.size()) {
                    return Err(Error::config(format!(
                        "configuration {c} is not admissible for l={}, u={}, K={k}",
                        prior.l, prior.u
                    )));
                }
            }
            Ok(list.clone())
        }
    }
}

/// All streams share one continuous model, so error rates depend on a
/// configuration only through its size.
pub fn exchangeable<M: StreamModel + PartialEq>(models: &[M]) -> bool {
    models.iter().all(|m| m == &models[0] && !m.is_discrete())
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

// ---------------------------------------------------------------------------
// Log-space helpers
// ---------------------------------------------------------------------------

#[inline]
fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, log_add)
}

/// `ln e_r(exp(x_1), ..., exp(x_n))` for the elementary symmetric polynomial of order `r`.
fn log_elementary(values: impl IntoIterator<Item = f64>, order: usize) -> f64 {
    let mut e = vec![f64::NEG_INFINITY; order + 1];
    e[0] = 0.0;
    for v in values {
        for j in (1..=order).rev() {
            e[j] = log_add(e[j], e[j - 1] + v);
        }
    }
    e[order]
}

// ---------------------------------------------------------------------------
// Importance sampling
// ---------------------------------------------------------------------------

/// Proposal family used by [`is_fwe_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsScheme {
    /// Exchangeable averaging when streams are identical and continuous,
    /// neighbours of the true configuration otherwise.
    Auto,
    Neighbors,
    Exchangeable,
}

/// Importance-sampling plan in type-I orientation. Type-II problems are
/// mapped onto type-I ones by exchanging the roles of signals and noise,
/// which negates every LLR.
#[derive(Debug, Clone)]
struct IsPlan {
    exchangeable: bool,
    flip: bool,
    truth: Vec<bool>,
    s: usize,
    add: bool,
    swap: bool,
}

struct Snapshot {
    lambda: Vec<f64>,
}

/// Oriented positive decisions of one monitor: `(stream, snapshot index)`.
#[derive(Default)]
struct EventLog {
    events: Vec<(usize, usize)>,
    snapshots: Vec<Snapshot>,
    error_seen: bool,
}

impl IsPlan {
    fn new(
        kind: ProcedureKind,
        prior: &PriorBounds,
        config: &SignalConfig,
        error_type: ErrorType,
        exchangeable: bool,
    ) -> Option<Self> {
        let flip = error_type == ErrorType::TypeII;
        let truth: Vec<bool> = config.mask().iter().map(|&x| x != flip).collect();
        let k = truth.len();
        let s = truth.iter().filter(|&&x| x).count();
        if s == k {
            return None;
        }
        let (mut add, mut swap) = match (kind, prior.known_count()) {
            (ProcedureKind::DecentralizedSprt, _) => (true, false),
            (_, Some(_)) => (false, true),
            (_, None) if prior.is_uninformative() => (true, false),
            (_, None) => (true, true),
        };
        // The synchronous rule declares at most `u` signals (oriented), so an
        // error at an oriented truth of that size needs a swap.
        let oriented_upper = if flip { k - prior.l } else { prior.u };
        if kind == ProcedureKind::Synchronous && s == oriented_upper {
            add = false;
            swap = true;
        }
        if s == 0 {
            swap = false;
            add = true;
        }
        Some(Self {
            exchangeable,
            flip,
            truth,
            s,
            add,
            swap,
        })
    }

    fn k(&self) -> usize {
        self.truth.len()
    }

    /// Proportion of replications drawn from the enlarged-set component.
    fn share(&self) -> f64 {
        match (self.add, self.swap) {
            (true, true) => ADD_SHARE.0 as f64 / ADD_SHARE.1 as f64,
            (true, false) => 1.0,
            _ => 0.0,
        }
    }

    /// Component of replication `index`, assigned deterministically so that
    /// both components receive their exact share (stratified sampling).
    fn uses_add(&self, index: u64) -> bool {
        match (self.add, self.swap) {
            (true, true) => {
                let (num, den) = ADD_SHARE;
                (index + 1) * num / den > index * num / den
            }
            (add, _) => add,
        }
    }

    fn sample_mask<R: Rng + ?Sized>(&self, rng: &mut R, index: u64) -> Vec<bool> {
        let use_add = self.uses_add(index);
        let k = self.k();
        let mut oriented = if self.exchangeable {
            let size = if use_add { self.s + 1 } else { self.s };
            let mut m = vec![false; k];
            for i in sample_indices(rng, k, size).iter() {
                m[i] = true;
            }
            m
        } else {
            let noise: Vec<usize> = (0..k).filter(|&j| !self.truth[j]).collect();
            let mut m = self.truth.clone();
            let j = noise[rng.random_range(0..noise.len())];
            m[j] = true;
            if !use_add {
                let signals: Vec<usize> = (0..k).filter(|&i| self.truth[i]).collect();
                m[signals[rng.random_range(0..signals.len())]] = false;
            }
            m
        };
        if self.flip {
            oriented.iter_mut().for_each(|x| *x = !*x);
        }
        oriented
    }

    fn oriented(&self, state: &LlrState) -> Vec<f64> {
        if self.flip {
            state.values().iter().map(|x| -x).collect()
        } else {
            state.values().to_vec()
        }
    }

    fn is_error_decision(&self, decision: bool) -> bool {
        decision != self.flip
    }

    /// Log density of the proposal mixture relative to `P_A`, up to the
    /// `exp(λ_A)` factor shared with the numerator.
    fn log_mixture_neighbors(&self, lambda: &[f64]) -> f64 {
        let k = self.k();
        let noise = (k - self.s) as f64;
        let add = log_sum_exp((0..k).filter(|&j| !self.truth[j]).map(|j| lambda[j])) - noise.ln();
        let p = self.share();
        let mut terms = Vec::with_capacity(2);
        if self.add {
            terms.push(add + p.ln());
        }
        if self.swap {
            let drop =
                log_sum_exp((0..k).filter(|&i| self.truth[i]).map(|i| -lambda[i])) - (self.s as f64).ln();
            terms.push(add + drop + (1.0 - p).ln());
        }
        log_sum_exp(terms)
    }

    /// Log density of the size-mixture proposal relative to `P_∅`.
    fn log_mixture_sizes(&self, lambda: &[f64]) -> f64 {
        let k = self.k();
        let p = self.share();
        let mut terms = Vec::with_capacity(2);
        if self.add {
            let size = self.s + 1;
            terms.push(log_elementary(lambda.iter().copied(), size) - binomial(k, size).ln() + p.ln());
        }
        if self.swap {
            terms.push(log_elementary(lambda.iter().copied(), self.s) - binomial(k, self.s).ln() + (1.0 - p).ln());
        }
        log_sum_exp(terms)
    }

    fn weight(&self, log: &EventLog) -> f64 {
        if self.exchangeable {
            self.weight_exchangeable(log)
        } else {
            self.weight_neighbors(log)
        }
    }

    fn weight_neighbors(&self, log: &EventLog) -> f64 {
        match log.events.iter().find(|&&(k, _)| !self.truth[k]) {
            None => 0.0,
            Some(&(_, snap)) => (-self.log_mixture_neighbors(&log.snapshots[snap].lambda)).exp(),
        }
    }

    /// Averages the τ-stopped likelihood ratio over every truth `A'` of
    /// size `s`. `A'` first errs at the `r`-th positive decision exactly
    /// when it contains the `r - 1` earlier streams and not the `r`-th one.
    fn weight_exchangeable(&self, log: &EventLog) -> f64 {
        let k = self.k();
        let log_truths = binomial(k, self.s).ln();
        let mut total = 0.0;
        for (r, &(stream, snap)) in log.events.iter().enumerate() {
            if r > self.s {
                break;
            }
            let lambda = &log.snapshots[snap].lambda;
            let earlier = &log.events[..r];
            let fixed: f64 = earlier.iter().map(|&(j, _)| lambda[j]).sum();
            let rest = (0..k)
                .filter(|&j| j != stream && !earlier.iter().any(|&(e, _)| e == j))
                .map(|j| lambda[j]);
            let log_num = fixed + log_elementary(rest, self.s - r) - log_truths;
            if log_num == f64::NEG_INFINITY {
                continue;
            }
            total += (log_num - self.log_mixture_sizes(lambda)).exp();
        }
        total
    }
}

fn resolve_scheme<M: StreamModel + PartialEq>(scheme: IsScheme, models: &[M]) -> bool {
    match scheme {
        IsScheme::Auto => exchangeable(models),
        IsScheme::Neighbors => false,
        IsScheme::Exchangeable => true,
    }
}

/// Importance-sampling estimates of one error type for several threshold
/// sets evaluated on common paths.
#[allow(clippy::too_many_arguments)]
pub fn is_fwe_estimates<M>(
    kind: ProcedureKind,
    models: &[M],
    config: &SignalConfig,
    thresholds: &[Thresholds],
    prior: &PriorBounds,
    error_type: ErrorType,
    scheme: IsScheme,
    settings: &McSettings,
    cell: u64,
) -> Result<Vec<FweEstimate>>
where
    M: StreamModel + PartialEq + Sync,
{
    check_dimensions(models.len(), config, prior)?;
    let reps = settings.replications;
    let exch = resolve_scheme(scheme, models);
    let Some(plan) = IsPlan::new(kind, prior, config, error_type, exch) else {
        return Ok(vec![FweEstimate::zero(reps); thresholds.len()]);
    };
    let cell_tag = tag(&[cell, 0x15, error_type.index()]);
    let weights = try_par_indexed(reps, |i| {
        let mut rng = replication_rng(settings.seed, cell_tag, i);
        let mask = plan.sample_mask(&mut rng, i);
        let mut monitors: Vec<Monitor> = thresholds
            .iter()
            .map(|t| Monitor::new(kind, RuleFlavor::Simple, *t, *prior))
            .collect();
        let mut logs: Vec<EventLog> = (0..thresholds.len()).map(|_| EventLog::default()).collect();
        let outcome = drive_path(models, &mask, &mut rng, settings.horizon, |state| {
            let mut all_done = true;
            for (mon, log) in monitors.iter_mut().zip(logs.iter_mut()) {
                if mon.is_complete() || (log.error_seen && !plan.exchangeable) {
                    continue;
                }
                let fired = mon.observe(state);
                let mut snap = None;
                for &(k, d) in fired {
                    if !plan.is_error_decision(d) {
                        continue;
                    }
                    let idx = *snap.get_or_insert_with(|| {
                        log.snapshots.push(Snapshot {
                            lambda: plan.oriented(state),
                        });
                        log.snapshots.len() - 1
                    });
                    log.events.push((k, idx));
                    if !plan.truth[k] {
                        log.error_seen = true;
                    }
                }
                if !(mon.is_complete() || (log.error_seen && !plan.exchangeable)) {
                    all_done = false;
                }
            }
            all_done
        })?;
        if outcome == PathOutcome::Horizon {
            let undecided = monitors.iter().map(|m| m.undecided_count()).max().unwrap_or(0);
            let partial = monitors
                .iter()
                .find(|m| !m.is_complete())
                .map(|m| m.record())
                .unwrap_or_else(|| monitors[0].record());
            return Err(Error::HorizonExhausted {
                horizon: settings.horizon,
                undecided,
                partial: Box::new(partial),
            });
        }
        let w: Vec<f64> = logs.iter().map(|log| plan.weight(log)).collect();
        for &x in &w {
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::Numerical {
                    stream: 0,
                    message: format!("invalid importance weight {x}"),
                });
            }
        }
        Ok(w)
    })?;
    let strata: Vec<bool> = (0..reps as u64).map(|i| plan.uses_add(i)).collect();
    Ok((0..thresholds.len())
        .map(|g| {
            let mut add = Moments::default();
            let mut swap = Moments::default();
            for (w, &is_add) in weights.iter().zip(&strata) {
                if is_add { add.push(w[g]) } else { swap.push(w[g]) }
            }
            FweEstimate::stratified(&[add, swap])
        })
        .collect())
}

/// Importance-sampling estimate of `FWE¹_A` or `FWE²_A`.
#[allow(clippy::too_many_arguments)]
pub fn is_fwe_estimate<M>(
    kind: ProcedureKind,
    models: &[M],
    config: &SignalConfig,
    thresholds: &Thresholds,
    prior: &PriorBounds,
    error_type: ErrorType,
    settings: &McSettings,
    cell: u64,
) -> Result<FweEstimate>
where
    M: StreamModel + PartialEq + Sync,
{
    Ok(is_fwe_estimates(
        kind,
        models,
        config,
        std::slice::from_ref(thresholds),
        prior,
        error_type,
        IsScheme::Auto,
        settings,
        cell,
    )?[0])
}

/// Plain Monte Carlo estimate of `FWE¹_A` or `FWE²_A`.
#[allow(clippy::too_many_arguments)]
pub fn plain_fwe_estimate<M>(
    kind: ProcedureKind,
    models: &[M],
    config: &SignalConfig,
    thresholds: &Thresholds,
    prior: &PriorBounds,
    error_type: ErrorType,
    settings: &McSettings,
    cell: u64,
) -> Result<FweEstimate>
where
    M: StreamModel + Sync,
{
    check_dimensions(models.len(), config, prior)?;
    let cell_tag = tag(&[cell, 0x9A, error_type.index()]);
    let hits = try_par_indexed(settings.replications, |i| {
        let mut rng = replication_rng(settings.seed, cell_tag, i);
        let mut mon = Monitor::new(kind, RuleFlavor::Simple, *thresholds, *prior);
        let mut erred = false;
        let outcome = drive_path(models, config.mask(), &mut rng, settings.horizon, |state| {
            for &(k, d) in mon.observe(state) {
                erred |= match error_type {
                    ErrorType::TypeI => d && !config.is_signal(k),
                    ErrorType::TypeII => !d && config.is_signal(k),
                };
            }
            erred || mon.is_complete()
        })?;
        if outcome == PathOutcome::Horizon {
            return Err(Error::HorizonExhausted {
                horizon: settings.horizon,
                undecided: mon.undecided_count(),
                partial: Box::new(mon.record()),
            });
        }
        Ok(if erred { 1.0 } else { 0.0 })
    })?;
    Ok(FweEstimate::from_moments(&hits.into_iter().collect()))
}

// ---------------------------------------------------------------------------
// Monte Carlo calibration
// ---------------------------------------------------------------------------

/// Relative window below each target the worst-case estimate must land in.
pub const CALIBRATION_TOLERANCE: f64 = 0.05;
pub const CALIBRATION_MAX_ITERATIONS: usize = 40;

fn evaluate_offset<M>(
    kind: ProcedureKind,
    models: &[M],
    prior: &PriorBounds,
    targets: &ErrorTargets,
    configs: &[SignalConfig],
    base: &Thresholds,
    offset: f64,
    settings: &McSettings,
) -> Result<(f64, Vec<ConfigErrorReport>)>
where
    M: StreamModel + PartialEq + Sync,
{
    let t = base.shifted(offset);
    let mut worst: f64 = 0.0;
    let mut reports = Vec::with_capacity(configs.len());
    for (ci, config) in configs.iter().enumerate() {
        let cell = tag(&[0xCA1, ci as u64]);
        let fwe1 = is_fwe_estimate(kind, models, config, &t, prior, ErrorType::TypeI, settings, cell)?;
        let fwe2 = is_fwe_estimate(kind, models, config, &t, prior, ErrorType::TypeII, settings, cell)?;
        worst = worst
            .max(fwe1.estimate / targets.alpha)
            .max(fwe2.estimate / targets.beta);
        reports.push(ConfigErrorReport {
            config: config.label(),
            fwe1,
            fwe2,
        });
    }
    Ok((worst, reports))
}

/// Shifts the closed-form thresholds by a common offset, found by
/// bisection, so that the largest estimated error ratio
/// `max(FWE¹/α, FWE²/β)` over `selection` lies in `[1 - tol, 1]`.
///
/// Every evaluation reuses the same random numbers, so the objective is a
/// deterministic, essentially monotone function of the offset.
pub fn calibrate_monte_carlo<M>(
    kind: ProcedureKind,
    models: &[M],
    prior: &PriorBounds,
    targets: &ErrorTargets,
    selection: &ConfigSelection,
    settings: &McSettings,
) -> Result<CalibrationResult>
where
    M: StreamModel + PartialEq + Sync,
{
    if models.len() != prior.k {
        return Err(Error::config(format!(
            "{} models for a prior over K={}",
            models.len(),
            prior.k
        )));
    }
    let base = analytic_thresholds(kind, targets, prior)?;
    let configs = configurations(models, prior, selection)?;
    let eval = |offset: f64| {
        evaluate_offset(kind, models, prior, targets, &configs, &base, offset, settings)
    };
    let in_window = |r: f64| r <= 1.0 && r >= 1.0 - CALIBRATION_TOLERANCE;
    let finish = |offset: f64, iterations: usize, achieved| {
        Ok(CalibrationResult {
            thresholds: base.shifted(offset),
            method: CalibrationMethod::MonteCarlo,
            offset,
            iterations,
            achieved,
        })
    };

    let mut iterations = 1;
    let mut hi = 0.0;
    let (mut r_hi, mut rep_hi) = eval(hi)?;
    while r_hi > 1.0 {
        if iterations >= CALIBRATION_MAX_ITERATIONS {
            return Err(Error::CalibrationFailed {
                iterations,
                lo: hi,
                hi,
                ratio_hi: r_hi,
            });
        }
        hi += 1.0;
        iterations += 1;
        (r_hi, rep_hi) = eval(hi)?;
    }
    if in_window(r_hi) {
        return finish(hi, iterations, rep_hi);
    }
    // keep every level strictly positive
    let mut lo = -base.min_level() * (1.0 - 1e-3);
    if hi > 0.0 {
        lo = hi - 1.0;
    } else {
        iterations += 1;
        let (r_lo, rep_lo) = eval(lo)?;
        if r_lo <= 1.0 {
            if in_window(r_lo) {
                return finish(lo, iterations, rep_lo);
            }
            return Err(Error::CalibrationFailed {
                iterations,
                lo,
                hi,
                ratio_hi: r_hi,
            });
        }
    }
    while iterations < CALIBRATION_MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        iterations += 1;
        let (r_mid, rep_mid) = eval(mid)?;
        if r_mid > 1.0 {
            lo = mid;
        } else {
            hi = mid;
            r_hi = r_mid;
            rep_hi = rep_mid;
            if in_window(r_hi) {
                return finish(hi, iterations, rep_hi);
            }
        }
    }
    Err(Error::CalibrationFailed {
        iterations,
        lo,
        hi,
        ratio_hi: r_hi,
    })
}

/// Closed-form thresholds packaged as a calibration result.
pub fn calibrate_analytic(
    kind: ProcedureKind,
    prior: &PriorBounds,
    targets: &ErrorTargets,
) -> Result<CalibrationResult> {
    Ok(CalibrationResult {
        thresholds: analytic_thresholds(kind, targets, prior)?,
        method: CalibrationMethod::Analytic,
        offset: 0.0,
        iterations: 0,
        achieved: Vec::new(),
    })
}
