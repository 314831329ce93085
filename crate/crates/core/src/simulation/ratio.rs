//! Matched-error efficiency ratios and first-order slope diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procedures::{PriorBounds, ProcedureKind};
use crate::stream_models::SignalConfig;
use crate::theory::{optimal_rate, KlPair};

use super::sweep::{Curve, CurvePoint};

/// Which worst-case error rate the curves are matched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matching {
    MatchAlpha,
    MatchBeta,
}

impl Matching {
    /// Signal streams are matched on type-I errors, noise streams on type-II.
    pub fn for_stream(config: &SignalConfig, stream: usize) -> Self {
        if config.is_signal(stream) {
            Matching::MatchAlpha
        } else {
            Matching::MatchBeta
        }
    }

    fn error(&self, p: &CurvePoint) -> f64 {
        match self {
            Matching::MatchAlpha => p.alpha.estimate,
            Matching::MatchBeta => p.beta.estimate,
        }
    }
}

/// `(log10 error, mean time)` nodes sorted by increasing error.
fn nodes(curve: &Curve, stream: usize, matching: Matching) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| matching.error(p) > 0.0)
        .map(|p| (matching.error(p).log10(), p.mean_time[stream]))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v.dedup_by(|b, a| a.0 == b.0);
    v
}

fn interpolate(nodes: &[(f64, f64)], level: f64) -> Option<f64> {
    let first = nodes.first()?;
    let last = nodes.last()?;
    if level < first.0 || level > last.0 {
        return None;
    }
    let i = nodes.partition_point(|n| n.0 < level);
    if nodes[i].0 == level {
        return Some(nodes[i].1);
    }
    let (x0, y0) = nodes[i - 1];
    let (x1, y1) = nodes[i];
    Some(y0 + (y1 - y0) * (level - x0) / (x1 - x0))
}

/// Mean decision time of `stream` interpolated piecewise linearly in
/// log10 error; `None` outside the curve's error range.
pub fn time_at_error(curve: &Curve, stream: usize, matching: Matching, log10_error: f64) -> Option<f64> {
    interpolate(&nodes(curve, stream, matching), log10_error)
}

/// Ratio of the test curve's mean time to the reference curve's at one
/// matched log10 error level.
pub fn ratio_at(
    test: &Curve,
    reference: &Curve,
    stream: usize,
    matching: Matching,
    log10_error: f64,
) -> Option<f64> {
    let t = time_at_error(test, stream, matching, log10_error)?;
    let r = time_at_error(reference, stream, matching, log10_error)?;
    Some(t / r)
}

/// Time ratios test/reference of `stream` at every node of either curve
/// inside the overlap of their error ranges, by increasing error.
///
/// Disjoint error ranges yield an empty list and a warning on stderr.
pub fn efficiency_ratio(
    test: &Curve,
    reference: &Curve,
    stream: usize,
    matching: Matching,
) -> Vec<(f64, f64)> {
    let a = nodes(test, stream, matching);
    let b = nodes(reference, stream, matching);
    let (Some(a0), Some(b0)) = (a.first(), b.first()) else {
        eprintln!("warning: a curve has no positive error estimates; no ratios");
        return Vec::new();
    };
    let lo = a0.0.max(b0.0);
    let hi = a.last().unwrap().0.min(b.last().unwrap().0);
    if lo > hi {
        eprintln!(
            "warning: error ranges of {} and {} do not overlap; no ratios",
            test.kind.name(),
            reference.kind.name()
        );
        return Vec::new();
    }
    let mut levels: Vec<f64> = a
        .iter()
        .chain(&b)
        .map(|n| n.0)
        .filter(|&x| x >= lo && x <= hi)
        .collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels
        .into_iter()
        .filter_map(|x| Some((x, interpolate(&a, x)? / interpolate(&b, x)?)))
        .collect()
}

/// First-order expected time of `kind` in `stream` per nat of
/// `|log error|`.
pub fn theory_slope(
    kind: ProcedureKind,
    stream: usize,
    config: &SignalConfig,
    prior: &PriorBounds,
    kls: &[KlPair<f64>],
) -> Result<f64> {
    match kind {
        ProcedureKind::DecentralizedSprt => {
            optimal_rate(stream, config, prior, kls)?;
            let (i, j) = kls[stream];
            Ok(if config.is_signal(stream) { 1.0 / i } else { 1.0 / j })
        }
        ProcedureKind::ProposedAsync => Ok(1.0 / optimal_rate(stream, config, prior, kls)?),
        ProcedureKind::Synchronous => (0..config.k()).try_fold(0.0f64, |acc, k| {
            Ok(acc.max(1.0 / optimal_rate(k, config, prior, kls)?))
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub fitted_slope: f64,
    pub theory_slope: f64,
    pub rel_dev: f64,
    pub points: usize,
}

/// Least-squares slope of the mean time of `stream` against `|ln error|`
/// over the curve points whose matched error lies in `[error_lo, error_hi]`.
///
/// Needs at least 4 such points spanning at least 2 decades.
pub fn slope_diagnostics(
    curve: &Curve,
    stream: usize,
    prior: &PriorBounds,
    kls: &[KlPair<f64>],
    error_lo: f64,
    error_hi: f64,
) -> Result<SlopeFit> {
    let matching = Matching::for_stream(&curve.config, stream);
    let pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .map(|p| (matching.error(p), p.mean_time[stream]))
        .filter(|&(e, _)| e > 0.0 && e >= error_lo && e <= error_hi)
        .map(|(e, t)| (e.ln().abs(), t))
        .collect();
    let span = match (
        pts.iter().map(|p| p.0).reduce(f64::min),
        pts.iter().map(|p| p.0).reduce(f64::max),
    ) {
        (Some(a), Some(b)) => (b - a) / std::f64::consts::LN_10,
        _ => 0.0,
    };
    if pts.len() < 4 || span < 2.0 {
        return Err(Error::Precondition(format!(
            "slope fit needs >= 4 points over >= 2 decades, got {} points over {span:.2} decades",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let fitted = sxy / sxx;
    let theory = theory_slope(curve.kind, stream, &curve.config, prior, kls)?;
    Ok(SlopeFit {
        fitted_slope: fitted,
        theory_slope: theory,
        rel_dev: (fitted - theory).abs() / theory,
        points: pts.len(),
    })
}
