//! Closed-form layer: error metrics of decision records, KL aggregates,
//! first-order optimal decision times, lower-bound exponents and asymptotic
//! relative efficiencies.
//!
//! The efficiency formulas are generic over the number type so that tables
//! can be produced exactly with [`Rational64`] when the KL numbers are
//! rational, and in floating point otherwise.

use std::fmt;

use num_rational::Rational64;
use num_traits::Num;
use serde::{Deserialize, Serialize};

use crate::engine::Moments;
use crate::error::{Error, Result};
use crate::procedures::{DecisionRecord, PriorBounds};
use crate::stream_models::SignalConfig;

/// Number type accepted by the efficiency formulas.
pub trait KlScalar: Num + Clone + PartialOrd + fmt::Debug {}
impl<T: Num + Clone + PartialOrd + fmt::Debug> KlScalar for T {}

/// KL numbers `(I_k, J_k)` of one stream.
pub type KlPair<T> = (T, T);

fn min_of<T: KlScalar>(it: impl Iterator<Item = T>) -> Option<T> {
    it.fold(None, |acc, x| match acc {
        Some(m) if m <= x => Some(m),
        _ => Some(x),
    })
}

fn max_of<T: KlScalar>(it: impl Iterator<Item = T>) -> Option<T> {
    it.fold(None, |acc, x| match acc {
        Some(m) if m >= x => Some(m),
        _ => Some(x),
    })
}

fn check_kls<T>(config: &SignalConfig, prior: &PriorBounds, kls: &[KlPair<T>]) -> Result<()> {
    if kls.len() != config.k() || prior.k != config.k() {
        return Err(Error::config(format!(
            "dimension mismatch: {} KL pairs, configuration over {} streams, prior over {}",
            kls.len(),
            config.k(),
            prior.k
        )));
    }
    if !prior.admits(config.size()) {
        return Err(Error::config(format!(
            "configuration {} has {} signals, outside [{}, {}]",
            config,
            config.size(),
            prior.l,
            prior.u
        )));
    }
    Ok(())
}

fn check_stream(stream: usize, config: &SignalConfig) -> Result<()> {
    if stream >= config.k() {
        return Err(Error::config(format!(
            "stream index {stream} out of range for K={}",
            config.k()
        )));
    }
    Ok(())
}

/// Smallest KL numbers over a configuration: `𝓘_A` over its signals and
/// `𝓙_A` over its noise streams (absent when the side is empty).
#[derive(Debug, Clone, PartialEq)]
pub struct KlAggregates<T> {
    pub i_min: Option<T>,
    pub j_min: Option<T>,
}

impl<T: KlScalar> KlAggregates<T> {
    pub fn new(config: &SignalConfig, kls: &[KlPair<T>]) -> Self {
        Self {
            i_min: min_of(config.signals().map(|k| kls[k].0.clone())),
            j_min: min_of(config.noises().map(|k| kls[k].1.clone())),
        }
    }

    fn require(v: &Option<T>, what: &str) -> Result<T> {
        v.clone()
            .ok_or_else(|| Error::Precondition(format!("{what} is undefined for this configuration")))
    }

    /// `𝓙_A·1{|A| = l}` added to a signal stream's rate.
    fn signal_bonus(&self, config: &SignalConfig, prior: &PriorBounds) -> Result<T> {
        if config.size() == prior.l {
            Self::require(&self.j_min, "minimum noise KL")
        } else {
            Ok(T::zero())
        }
    }

    /// `𝓘_A·1{|A| = u}` added to a noise stream's rate.
    fn noise_bonus(&self, config: &SignalConfig, prior: &PriorBounds) -> Result<T> {
        if config.size() == prior.u {
            Self::require(&self.i_min, "minimum signal KL")
        } else {
            Ok(T::zero())
        }
    }
}

/// Rate of the optimal expected decision time of `stream` per unit of
/// `|log α|` (signal) or `|log β|` (noise): `I_i + 𝓙_A·1{|A|=l}` or
/// `J_j + 𝓘_A·1{|A|=u}`.
pub fn optimal_rate<T: KlScalar>(
    stream: usize,
    config: &SignalConfig,
    prior: &PriorBounds,
    kls: &[KlPair<T>],
) -> Result<T> {
    check_kls(config, prior, kls)?;
    check_stream(stream, config)?;
    let agg = KlAggregates::new(config, kls);
    if config.is_signal(stream) {
        Ok(kls[stream].0.clone() + agg.signal_bonus(config, prior)?)
    } else {
        Ok(kls[stream].1.clone() + agg.noise_bonus(config, prior)?)
    }
}

/// First-order optimal expected decision time of `stream` at error levels
/// `α`, `β`.
pub fn optimal_time_first_order(
    stream: usize,
    config: &SignalConfig,
    prior: &PriorBounds,
    alpha: f64,
    beta: f64,
    kls: &[KlPair<f64>],
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
        return Err(Error::config(format!(
            "error levels must lie in (0, 1) (got α={alpha}, β={beta})"
        )));
    }
    let rate = optimal_rate(stream, config, prior, kls)?;
    let level = if config.is_signal(stream) { alpha } else { beta };
    Ok(level.ln().abs() / rate)
}

/// First-order optimal time of the synchronous family: the slowest stream.
pub fn synchronous_optimal_time(
    config: &SignalConfig,
    prior: &PriorBounds,
    alpha: f64,
    beta: f64,
    kls: &[KlPair<f64>],
) -> Result<f64> {
    let mut best = 0.0f64;
    for k in 0..config.k() {
        best = best.max(optimal_time_first_order(k, config, prior, alpha, beta, kls)?);
    }
    Ok(best)
}

/// `I_{A,C} = Σ_{k ∈ A∖C} I_k + Σ_{k ∈ C∖A} J_k`.
pub fn lower_bound_exponent<T: KlScalar>(
    truth: &SignalConfig,
    competitor: &SignalConfig,
    kls: &[KlPair<T>],
) -> Result<T> {
    if truth.k() != competitor.k() || kls.len() != truth.k() {
        return Err(Error::config("configurations and KL pairs must share K"));
    }
    let mut total = T::zero();
    for (k, (i, j)) in kls.iter().enumerate() {
        match (truth.is_signal(k), competitor.is_signal(k)) {
            (true, false) => total = total + i.clone(),
            (false, true) => total = total + j.clone(),
            _ => {}
        }
    }
    Ok(total)
}

/// Largest `K` for which [`min_competitor_exponent`] enumerates subsets.
pub const MAX_ENUMERATED_STREAMS: usize = 20;

/// `min { I_{A,C} : C ∈ Π_{l,u}, C classifies `stream` wrongly }` by
/// exhaustive enumeration of all subsets.
pub fn min_competitor_exponent<T: KlScalar>(
    stream: usize,
    config: &SignalConfig,
    prior: &PriorBounds,
    kls: &[KlPair<T>],
) -> Result<T> {
    check_kls(config, prior, kls)?;
    check_stream(stream, config)?;
    let k = config.k();
    if k > MAX_ENUMERATED_STREAMS {
        return Err(Error::EnumerationTooLarge(format!(
            "2^{k} competitor subsets exceed the limit of 2^{MAX_ENUMERATED_STREAMS}"
        )));
    }
    let mut best: Option<T> = None;
    for bits in 0u64..(1u64 << k) {
        let mask: Vec<bool> = (0..k).map(|q| bits >> q & 1 == 1).collect();
        if mask[stream] == config.is_signal(stream) {
            continue;
        }
        let competitor = SignalConfig::from_mask(mask);
        if !prior.admits(competitor.size()) {
            continue;
        }
        let e = lower_bound_exponent(config, &competitor, kls)?;
        best = min_of(best.into_iter().chain(std::iter::once(e)));
    }
    best.ok_or_else(|| Error::Precondition("no competitor configuration in the prior class".into()))
}

/// Asymptotic relative efficiency of the optimal procedure against the
/// decentralized family.
pub fn are_decentralized<T: KlScalar>(
    stream: usize,
    config: &SignalConfig,
    prior: &PriorBounds,
    kls: &[KlPair<T>],
) -> Result<T> {
    let rate = optimal_rate(stream, config, prior, kls)?;
    let own = if config.is_signal(stream) {
        kls[stream].0.clone()
    } else {
        kls[stream].1.clone()
    };
    Ok(own / rate)
}

/// Relation between `|log α|` and `|log β|` as both vanish.
#[derive(Debug, Clone, PartialEq)]
pub enum RateRegime<T> {
    /// `|log α| ~ r |log β|` with `r > 0`.
    Ratio(T),
    /// `|log α| ≪ |log β|`.
    AlphaNegligible,
    /// `|log α| ≫ |log β|`.
    BetaNegligible,
}

/// Asymptotic relative efficiency of the optimal procedure against the
/// synchronous family.
pub fn are_synchronous<T: KlScalar>(
    stream: usize,
    config: &SignalConfig,
    prior: &PriorBounds,
    kls: &[KlPair<T>],
    regime: &RateRegime<T>,
) -> Result<T> {
    let rate = optimal_rate(stream, config, prior, kls)?;
    let agg = KlAggregates::new(config, kls);
    let signal = config.is_signal(stream);
    // slowest signal and noise rates
    let slow_signal = match &agg.i_min {
        Some(i) => Some(i.clone() + agg.signal_bonus(config, prior)?),
        None => None,
    };
    let slow_noise = match &agg.j_min {
        Some(j) => Some(j.clone() + agg.noise_bonus(config, prior)?),
        None => None,
    };
    match regime {
        RateRegime::Ratio(r) => {
            if *r <= T::zero() {
                return Err(Error::config("rate ratio r must be positive"));
            }
            let own = if signal {
                r.clone() / rate
            } else {
                T::one() / rate
            };
            let slowest = max_of(
                slow_signal
                    .map(|s| r.clone() / s)
                    .into_iter()
                    .chain(slow_noise.map(|s| T::one() / s)),
            )
            .expect("a configuration has at least one stream");
            Ok(own / slowest)
        }
        RateRegime::AlphaNegligible if signal => Ok(T::zero()),
        RateRegime::AlphaNegligible => Ok(KlAggregates::<T>::require(&slow_noise, "minimum noise rate")? / rate),
        RateRegime::BetaNegligible if signal => {
            Ok(KlAggregates::<T>::require(&slow_signal, "minimum signal rate")? / rate)
        }
        RateRegime::BetaNegligible => Ok(T::zero()),
    }
}

/// One row of efficiencies per configuration, one column per stream.
pub fn are_table<T: KlScalar>(
    family: AreFamily,
    configs: &[SignalConfig],
    prior: &PriorBounds,
    kls: &[KlPair<T>],
    regime: &RateRegime<T>,
) -> Result<Vec<Vec<T>>> {
    configs
        .iter()
        .map(|c| {
            (0..c.k())
                .map(|k| match family {
                    AreFamily::Decentralized => are_decentralized(k, c, prior, kls),
                    AreFamily::Synchronous => are_synchronous(k, c, prior, kls, regime),
                })
                .collect()
        })
        .collect()
}

/// Reference family of an efficiency table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AreFamily {
    Decentralized,
    Synchronous,
}

/// Parses a decimal literal such as `0.5`, `-1.25e-3` or `3/8` exactly.
pub fn parse_rational(text: &str) -> Result<Rational64> {
    let bad = || Error::config(format!("not an exact decimal or fraction: {text:?}"));
    let s = text.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Rational64::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(p) => (&s[..p], s[p + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty()
        || !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut num: i64 = all.parse().map_err(|_| bad())?;
    if neg {
        num = -num;
    }
    let scale = exp - frac_part.len() as i32;
    let pow = |e: u32| 10i64.checked_pow(e).ok_or_else(bad);
    Ok(if scale >= 0 {
        Rational64::from_integer(num.checked_mul(pow(scale as u32)?).ok_or_else(bad)?)
    } else {
        Rational64::new(num, pow((-scale) as u32)?)
    })
}

/// Exact KL numbers `(μ²/2, μ²/2)` of a unit-variance Gaussian mean shift.
pub fn gaussian_kl_exact(mu: Rational64) -> KlPair<Rational64> {
    let v = mu * mu / Rational64::from_integer(2);
    (v, v)
}

/// Formats a rational as `p/q`, or `p` for an integer.
pub fn format_rational(r: &Rational64) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

// ---------------------------------------------------------------------------
// Error metrics
// ---------------------------------------------------------------------------

/// Familywise and generalized error metrics of type I (suffix 1) and
/// type II (suffix 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    Fwe1,
    Fwe2,
    Pce1,
    Pce2,
    Fdr1,
    Fdr2,
    Pfdr1,
    Pfdr2,
}

impl ErrorMetric {
    pub const ALL: [ErrorMetric; 8] = [
        ErrorMetric::Fwe1,
        ErrorMetric::Fwe2,
        ErrorMetric::Pce1,
        ErrorMetric::Pce2,
        ErrorMetric::Fdr1,
        ErrorMetric::Fdr2,
        ErrorMetric::Pfdr1,
        ErrorMetric::Pfdr2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ErrorMetric::Fwe1 => "fwe1",
            ErrorMetric::Fwe2 => "fwe2",
            ErrorMetric::Pce1 => "pce1",
            ErrorMetric::Pce2 => "pce2",
            ErrorMetric::Fdr1 => "fdr1",
            ErrorMetric::Fdr2 => "fdr2",
            ErrorMetric::Pfdr1 => "pfdr1",
            ErrorMetric::Pfdr2 => "pfdr2",
        }
    }

    pub fn is_type_one(&self) -> bool {
        matches!(
            self,
            ErrorMetric::Fwe1 | ErrorMetric::Pce1 | ErrorMetric::Fdr1 | ErrorMetric::Pfdr1
        )
    }

    /// Per-replication statistic, or `None` when the replication falls
    /// outside the conditioning event of a positive rate.
    pub fn statistic(&self, record: &DecisionRecord, truth: &SignalConfig) -> Option<f64> {
        let k = truth.k();
        let discoveries = record.signal_count();
        let false_pos = record.signals().filter(|&q| !truth.is_signal(q)).count();
        let false_neg = truth.signals().filter(|&q| !record.decision[q]).count();
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        match self {
            ErrorMetric::Fwe1 => Some((false_pos > 0) as u8 as f64),
            ErrorMetric::Fwe2 => Some((false_neg > 0) as u8 as f64),
            ErrorMetric::Pce1 => Some(false_pos as f64 / k as f64),
            ErrorMetric::Pce2 => Some(false_neg as f64 / k as f64),
            ErrorMetric::Fdr1 => Some(ratio(false_pos, discoveries)),
            ErrorMetric::Fdr2 => Some(ratio(false_neg, k - discoveries)),
            ErrorMetric::Pfdr1 => (discoveries >= 1).then(|| ratio(false_pos, discoveries)),
            ErrorMetric::Pfdr2 => (discoveries < k).then(|| ratio(false_neg, k - discoveries)),
        }
    }
}

impl fmt::Display for ErrorMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Empirical value of one error metric over a batch of replications.
///
/// `value` is `None` for a positive rate whose conditioning event never
/// occurred in the batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub metric: ErrorMetric,
    pub value: Option<f64>,
    pub std_error: Option<f64>,
    /// Replications entering the average (those meeting the condition for
    /// positive rates).
    pub effective: u64,
}

impl ErrorReport {
    pub(crate) fn from_moments(metric: ErrorMetric, m: &Moments) -> Self {
        if m.count == 0 {
            return Self {
                metric,
                value: None,
                std_error: None,
                effective: 0,
            };
        }
        Self {
            metric,
            value: Some(m.mean()),
            std_error: Some(m.std_error()),
            effective: m.count,
        }
    }

    pub fn relative_error(&self) -> Option<f64> {
        match (self.value, self.std_error) {
            (Some(v), Some(s)) if v > 0.0 => Some(s / v),
            _ => None,
        }
    }
}

/// Sample mean of the per-replication statistic of `metric`.
pub fn empirical_error(
    records: &[DecisionRecord],
    truth: &SignalConfig,
    metric: ErrorMetric,
) -> Result<ErrorReport> {
    let mut m = Moments::default();
    for r in records {
        if r.k() != truth.k() {
            return Err(Error::config(format!(
                "record over {} streams, configuration over {}",
                r.k(),
                truth.k()
            )));
        }
        if !r.is_complete() {
            return Err(Error::Precondition("error metrics need complete records".into()));
        }
        if let Some(x) = metric.statistic(r, truth) {
            m.push(x);
        }
    }
    Ok(ErrorReport::from_moments(metric, &m))
}

/// Generalized error metric families with familywise sandwich constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GemFamily {
    Pce,
    Fdr,
    Pfdr,
}

impl GemFamily {
    pub const ALL: [GemFamily; 3] = [GemFamily::Pce, GemFamily::Fdr, GemFamily::Pfdr];

    pub fn metric(&self, type_one: bool) -> ErrorMetric {
        match (self, type_one) {
            (GemFamily::Pce, true) => ErrorMetric::Pce1,
            (GemFamily::Pce, false) => ErrorMetric::Pce2,
            (GemFamily::Fdr, true) => ErrorMetric::Fdr1,
            (GemFamily::Fdr, false) => ErrorMetric::Fdr2,
            (GemFamily::Pfdr, true) => ErrorMetric::Pfdr1,
            (GemFamily::Pfdr, false) => ErrorMetric::Pfdr2,
        }
    }
}

/// Constants `(C₁, C₂)` with `C₂·FWE ≤ GEM ≤ C₁·FWE` on `Π_{l,u}`.
pub fn gem_constants(family: GemFamily, prior: &PriorBounds) -> Result<(f64, f64)> {
    let k = prior.k as f64;
    match family {
        GemFamily::Pce => Ok((prior.u.max(prior.k - prior.l) as f64 / k, 1.0 / k)),
        GemFamily::Fdr => Ok((1.0, 1.0 / k)),
        GemFamily::Pfdr => {
            if prior.l == 0 || prior.u == prior.k {
                return Err(Error::Precondition(format!(
                    "positive false discovery constants need 0 < l <= u < K (got l={}, u={}, K={})",
                    prior.l, prior.u, prior.k
                )));
            }
            Ok((2.0, 1.0 / k))
        }
    }
}

/// Outcome of one sandwich comparison on a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichCheck {
    pub family: GemFamily,
    pub type_one: bool,
    pub fwe: f64,
    pub gem: Option<f64>,
    pub lower: f64,
    pub upper: f64,
    /// `true` when the upper bound's precondition (opposite-type FWE ≤ 1/2
    /// for positive rates) holds and the bound was asserted.
    pub upper_applies: bool,
    pub holds: bool,
}

/// Checks `C₂·FWE ≤ GEM ≤ C₁·FWE` on a batch within `sigmas` standard
/// errors of the difference. An undefined positive rate passes vacuously.
pub fn gem_sandwich_check(
    records: &[DecisionRecord],
    truth: &SignalConfig,
    prior: &PriorBounds,
    family: GemFamily,
    type_one: bool,
    sigmas: f64,
) -> Result<SandwichCheck> {
    let (c1, c2) = gem_constants(family, prior)?;
    let (fwe_metric, other_metric) = if type_one {
        (ErrorMetric::Fwe1, ErrorMetric::Fwe2)
    } else {
        (ErrorMetric::Fwe2, ErrorMetric::Fwe1)
    };
    let fwe = empirical_error(records, truth, fwe_metric)?;
    let other = empirical_error(records, truth, other_metric)?;
    let gem = empirical_error(records, truth, family.metric(type_one))?;
    let f = fwe.value.unwrap_or(0.0);
    let fse = fwe.std_error.unwrap_or(0.0);
    let upper_applies = family != GemFamily::Pfdr || other.value.unwrap_or(0.0) <= 0.5;
    let holds = match (gem.value, gem.std_error) {
        (Some(g), Some(gse)) => {
            let slack = 1e-12 * (1.0 + g);
            let lo_tol = sigmas * (gse * gse + c2 * c2 * fse * fse).sqrt() + slack;
            let hi_tol = sigmas * (gse * gse + c1 * c1 * fse * fse).sqrt() + slack;
            let lower_ok = c2 * f <= g + lo_tol;
            let upper_ok = !upper_applies || g <= c1 * f + hi_tol;
            lower_ok && upper_ok
        }
        _ => true,
    };
    Ok(SandwichCheck {
        family,
        type_one,
        fwe: f,
        gem: gem.value,
        lower: c2 * f,
        upper: c1 * f,
        upper_applies,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    fn nonhomo_kls() -> Vec<KlPair<Rational64>> {
        let mu = parse_rational("0.5").unwrap();
        let phi = parse_rational("0.5").unwrap();
        (0..4)
            .map(|k| gaussian_kl_exact(if k < 2 { phi * mu } else { mu }))
            .collect()
    }

    fn nonhomo_rows() -> Vec<SignalConfig> {
        [&[1][..], &[3], &[1, 2], &[1, 3]]
            .iter()
            .map(|l| SignalConfig::from_labels(4, l).unwrap())
            .collect()
    }

    fn table(family: AreFamily, known: bool) -> Vec<Vec<Rational64>> {
        let kls = nonhomo_kls();
        nonhomo_rows()
            .iter()
            .map(|c| {
                let prior = if known {
                    PriorBounds::new(c.size(), c.size(), 4).unwrap()
                } else {
                    PriorBounds::new(1, 3, 4).unwrap()
                };
                are_table(family, std::slice::from_ref(c), &prior, &kls, &RateRegime::Ratio(r(1, 1)))
                    .unwrap()
                    .remove(0)
            })
            .collect()
    }

    fn parse_table(rows: [[&str; 4]; 4]) -> Vec<Vec<Rational64>> {
        rows.iter()
            .map(|row| row.iter().map(|x| parse_rational(x).unwrap()).collect())
            .collect()
    }

    #[test]
    fn decentralized_table_known_count() {
        let expected = parse_table([
            ["1/2", "1/2", "4/5", "4/5"],
            ["1/5", "1/5", "4/5", "1/2"],
            ["1/5", "1/5", "4/5", "4/5"],
            ["1/2", "1/2", "4/5", "4/5"],
        ]);
        assert_eq!(table(AreFamily::Decentralized, true), expected);
    }

    #[test]
    fn synchronous_table_known_count() {
        let expected = parse_table([
            ["1", "1", "2/5", "2/5"],
            ["1", "1", "1", "5/8"],
            ["1", "1", "1", "1"],
            ["1", "1", "2/5", "2/5"],
        ]);
        assert_eq!(table(AreFamily::Synchronous, true), expected);
    }

    #[test]
    fn decentralized_table_bounded_count() {
        let expected = parse_table([
            ["1/2", "1", "1", "1"],
            ["1", "1", "4/5", "1"],
            ["1", "1", "1", "1"],
            ["1", "1", "1", "1"],
        ]);
        assert_eq!(table(AreFamily::Decentralized, false), expected);
    }

    #[test]
    fn synchronous_table_bounded_count() {
        let expected = parse_table([
            ["1/2", "1", "1/4", "1/4"],
            ["1", "1", "1/5", "1/4"],
            ["1", "1", "1/4", "1/4"],
            ["1", "1", "1/4", "1/4"],
        ]);
        assert_eq!(table(AreFamily::Synchronous, false), expected);
    }

    #[test]
    fn homogeneous_symmetric_values() {
        let kls = vec![(r(1, 8), r(1, 8)); 6];
        let c = SignalConfig::canonical(6, 2);
        let known = PriorBounds::new(2, 2, 6).unwrap();
        for k in 0..6 {
            assert_eq!(are_decentralized(k, &c, &known, &kls).unwrap(), r(1, 2));
            assert_eq!(
                are_synchronous(k, &c, &known, &kls, &RateRegime::Ratio(r(1, 1))).unwrap(),
                r(1, 1)
            );
        }
        let free = PriorBounds::uninformative(6).unwrap();
        assert_eq!(are_decentralized(0, &c, &free, &kls).unwrap(), r(1, 1));
    }

    #[test]
    fn limiting_regimes() {
        let kls = nonhomo_kls();
        let c = SignalConfig::from_labels(4, &[3]).unwrap();
        let prior = PriorBounds::new(1, 1, 4).unwrap();
        // signal streams lose everything when α is negligible, noise when β is
        assert_eq!(are_synchronous(2, &c, &prior, &kls, &RateRegime::AlphaNegligible).unwrap(), r(0, 1));
        assert_eq!(are_synchronous(0, &c, &prior, &kls, &RateRegime::BetaNegligible).unwrap(), r(0, 1));
        // noise stream 4: (𝓙+𝓘)/(J_4+𝓘) = (1/32+1/8)/(1/8+1/8) = 5/8
        assert_eq!(are_synchronous(3, &c, &prior, &kls, &RateRegime::AlphaNegligible).unwrap(), r(5, 8));
        assert_eq!(are_synchronous(2, &c, &prior, &kls, &RateRegime::BetaNegligible).unwrap(), r(1, 1));
        assert!(are_synchronous(2, &c, &prior, &kls, &RateRegime::Ratio(r(0, 1))).is_err());
    }

    #[test]
    fn optimal_times() {
        let kls = vec![(0.125, 0.125); 10];
        let prior = PriorBounds::new(3, 7, 10).unwrap();
        let above = SignalConfig::canonical(10, 5);
        let t = optimal_time_first_order(0, &above, &prior, 1e-4, 1e-4, &kls).unwrap();
        assert!((t - 1e4f64.ln() / 0.125).abs() < 1e-9);
        assert!((t - 73.682_722_4).abs() < 1e-6);
        let at_l = SignalConfig::canonical(10, 3);
        let t = optimal_time_first_order(0, &at_l, &prior, 1e-4, 1e-4, &kls).unwrap();
        assert!((t - 36.841_361_2).abs() < 1e-6);
        let sync = synchronous_optimal_time(&at_l, &prior, 1e-4, 1e-4, &kls).unwrap();
        assert!((sync - 73.682_722_4).abs() < 1e-6);
        assert!(optimal_time_first_order(0, &at_l, &prior, 0.0, 0.1, &kls).is_err());
    }

    #[test]
    fn exponent_examples() {
        let kls = vec![(r(1, 8), r(1, 8)); 3];
        let a = SignalConfig::from_labels(3, &[1]).unwrap();
        assert_eq!(lower_bound_exponent(&a, &a, &kls).unwrap(), r(0, 1));
        let c = SignalConfig::from_labels(3, &[2]).unwrap();
        assert_eq!(lower_bound_exponent(&a, &c, &kls).unwrap(), r(1, 4));
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("0.5").unwrap(), r(1, 2));
        assert_eq!(parse_rational("-1.25e-1").unwrap(), r(-1, 8));
        assert_eq!(parse_rational("3/8").unwrap(), r(3, 8));
        assert_eq!(parse_rational("2e2").unwrap(), r(200, 1));
        assert_eq!(parse_rational(".25").unwrap(), r(1, 4));
        for bad in ["", "abc", "1/0", "1.2.3", "e5", "."] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
        assert_eq!(format_rational(&r(4, 5)), "4/5");
        assert_eq!(format_rational(&r(2, 1)), "2");
    }

    fn record(decision: &[bool]) -> DecisionRecord {
        DecisionRecord {
            stop_time: vec![1; decision.len()],
            decision: decision.to_vec(),
            overall_stop: 1,
        }
    }

    #[test]
    fn metric_examples() {
        let truth = SignalConfig::from_labels(4, &[1, 2]).unwrap();
        let exact = [record(&[true, true, false, false])];
        for m in ErrorMetric::ALL {
            assert_eq!(empirical_error(&exact, &truth, m).unwrap().value, Some(0.0), "{m}");
        }
        let recs = [record(&[true, false, true, false])];
        let v = |m| empirical_error(&recs, &truth, m).unwrap().value.unwrap();
        assert_eq!(v(ErrorMetric::Fwe1), 1.0);
        assert_eq!(v(ErrorMetric::Fwe2), 1.0);
        assert_eq!(v(ErrorMetric::Pce1), 0.25);
        assert_eq!(v(ErrorMetric::Fdr1), 0.5);
        assert_eq!(v(ErrorMetric::Fdr2), 0.5);
    }

    #[test]
    fn positive_rate_undefined_without_discoveries() {
        let truth = SignalConfig::from_labels(3, &[1]).unwrap();
        let recs = vec![record(&[false, false, false]); 3];
        let rep = empirical_error(&recs, &truth, ErrorMetric::Pfdr1).unwrap();
        assert_eq!(rep.value, None);
        assert_eq!(rep.effective, 0);
        let fdr = empirical_error(&recs, &truth, ErrorMetric::Fdr1).unwrap();
        assert_eq!(fdr.value, Some(0.0));
        assert!(empirical_error(&[], &truth, ErrorMetric::Fwe1).unwrap().value.is_none());
    }

    #[test]
    fn positive_rate_is_conditional_fdr() {
        let truth = SignalConfig::from_labels(3, &[1]).unwrap();
        let recs = vec![
            record(&[true, true, false]),
            record(&[false, false, false]),
            record(&[true, false, false]),
            record(&[false, true, true]),
        ];
        let fdr = empirical_error(&recs, &truth, ErrorMetric::Fdr1).unwrap().value.unwrap();
        let pfdr = empirical_error(&recs, &truth, ErrorMetric::Pfdr1).unwrap().value.unwrap();
        let some = recs.iter().filter(|r| r.signal_count() >= 1).count() as f64 / recs.len() as f64;
        assert!((pfdr - fdr / some).abs() < 1e-15);
    }

    #[test]
    fn gem_constant_examples() {
        let p = PriorBounds::new(3, 7, 10).unwrap();
        assert_eq!(gem_constants(GemFamily::Pce, &p).unwrap(), (0.7, 0.1));
        assert_eq!(gem_constants(GemFamily::Fdr, &p).unwrap(), (1.0, 0.1));
        assert_eq!(gem_constants(GemFamily::Pfdr, &p).unwrap(), (2.0, 0.1));
        let open = PriorBounds::new(0, 7, 10).unwrap();
        assert!(matches!(gem_constants(GemFamily::Pfdr, &open), Err(Error::Precondition(_))));
    }

    #[test]
    fn incomplete_records_rejected() {
        let truth = SignalConfig::from_labels(2, &[1]).unwrap();
        let mut rec = record(&[true, false]);
        rec.stop_time[1] = 0;
        assert!(empirical_error(&[rec], &truth, ErrorMetric::Fwe1).is_err());
    }

    fn arb_case() -> impl Strategy<Value = (usize, usize, usize, Vec<bool>, Vec<(i64, i64)>)> {
        (1usize..=6)
            .prop_flat_map(|k| (Just(k), 0..k, 1..=k))
            .prop_filter("l <= u", |(_, l, u)| l <= u)
            .prop_flat_map(|(k, l, u)| {
                (
                    Just(k),
                    Just(l),
                    Just(u),
                    prop::collection::vec(any::<bool>(), k),
                    prop::collection::vec((1i64..=12, 1i64..=12), k),
                )
            })
            .prop_filter("config in prior", |(_, l, u, mask, _)| {
                let s = mask.iter().filter(|&&b| b).count();
                s >= *l && s <= *u
            })
    }

    proptest! {
        #[test]
        fn exhaustive_minimum_matches_closed_form((k, l, u, mask, raw) in arb_case()) {
            let prior = PriorBounds::new(l, u, k).unwrap();
            let config = SignalConfig::from_mask(mask);
            let kls: Vec<KlPair<Rational64>> = raw.iter().map(|&(i, j)| (r(i, 8), r(j, 8))).collect();
            for stream in 0..k {
                let brute = min_competitor_exponent(stream, &config, &prior, &kls).unwrap();
                let closed = optimal_rate(stream, &config, &prior, &kls).unwrap();
                prop_assert_eq!(brute, closed);
            }
        }

        #[test]
        fn efficiencies_in_unit_interval((k, l, u, mask, raw) in arb_case(), rn in 1i64..5, rd in 1i64..5) {
            let prior = PriorBounds::new(l, u, k).unwrap();
            let config = SignalConfig::from_mask(mask);
            let kls: Vec<KlPair<Rational64>> = raw.iter().map(|&(i, j)| (r(i, 8), r(j, 8))).collect();
            let regime = RateRegime::Ratio(r(rn, rd));
            for stream in 0..k {
                for v in [
                    are_decentralized(stream, &config, &prior, &kls).unwrap(),
                    are_synchronous(stream, &config, &prior, &kls, &regime).unwrap(),
                ] {
                    prop_assert!(v > r(0, 1) && v <= r(1, 1));
                }
            }
        }

        #[test]
        fn sandwich_holds_on_arbitrary_batches(
            decisions in prop::collection::vec(prop::collection::vec(any::<bool>(), 5), 1..40),
            mask in prop::collection::vec(any::<bool>(), 5),
        ) {
            let s = mask.iter().filter(|&&b| b).count();
            prop_assume!(s > 0 && s < 5);
            let prior = PriorBounds::new(1, 4, 5).unwrap();
            let truth = SignalConfig::from_mask(mask);
            let recs: Vec<DecisionRecord> = decisions.iter().map(|d| record(d)).collect();
            for family in GemFamily::ALL {
                for type_one in [true, false] {
                    let c = gem_sandwich_check(&recs, &truth, &prior, family, type_one, 0.0).unwrap();
                    prop_assert!(c.holds, "{:?}", c);
                }
            }
        }
    }
}
