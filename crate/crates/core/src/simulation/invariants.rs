//! Shared-randomness path checks and fixed-threshold monotonicity diagnostics.

use serde::{Deserialize, Serialize};

use crate::engine::{drive_path, replication_rng, tag, try_par_indexed, McSettings, Moments, PathOutcome};
use crate::error::{Error, Result};
use crate::procedures::{check_dimensions, Monitor, PriorBounds, ProcedureKind, RuleFlavor, Thresholds};
use crate::stream_models::{Model, SignalConfig};

/// Violation counts of path-by-path orderings between procedures run on
/// the same observations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathwiseReport {
    pub replications: usize,
    /// Gap-intersection rule with `l = 0, u = K` differs from the SPRT.
    pub uninformative_mismatch: usize,
    /// Some asynchronous decision time exceeds the synchronous stopping time.
    pub synchronous_domination: usize,
    /// Some asynchronous decision time exceeds the SPRT's (only counted when `l < u`).
    pub sprt_domination: usize,
    /// The synchronous procedure declared a number of signals outside `[l, u]`.
    pub synchronous_count: usize,
}

impl PathwiseReport {
    pub fn violations(&self) -> usize {
        self.uninformative_mismatch
            + self.synchronous_domination
            + self.sprt_domination
            + self.synchronous_count
    }
}

fn run_monitors(
    models: &[Model],
    config: &SignalConfig,
    monitors: &mut [Monitor],
    rng: &mut rand_chacha::ChaCha8Rng,
    horizon: u64,
) -> Result<()> {
    let outcome = drive_path(models, config.mask(), rng, horizon, |state| {
        let mut done = true;
        for m in monitors.iter_mut() {
            if !m.is_complete() {
                m.observe(state);
                done &= m.is_complete();
            }
        }
        done
    })?;
    if outcome == PathOutcome::Horizon {
        let m = monitors.iter().find(|m| !m.is_complete()).expect("incomplete monitor");
        return Err(Error::HorizonExhausted {
            horizon,
            undecided: m.undecided_count(),
            partial: Box::new(m.record()),
        });
    }
    Ok(())
}

/// Runs the proposed rule with `thresholds`, the SPRT with the same `a, b`,
/// the synchronous rule with the same four levels and both asynchronous
/// rules under the uninformative prior on common paths, counting
/// violations of the orderings that hold on every path.
pub fn pathwise_invariants(
    models: &[Model],
    config: &SignalConfig,
    prior: &PriorBounds,
    thresholds: &Thresholds,
    settings: &McSettings,
) -> Result<PathwiseReport> {
    check_dimensions(models.len(), config, prior)?;
    thresholds.validate()?;
    let open = PriorBounds::uninformative(prior.k)?;
    let cell = tag(&[0x9A7, prior.l as u64, prior.u as u64, config.size() as u64]);
    let flags = try_par_indexed(settings.replications, |i| {
        let mut rng = replication_rng(settings.seed, cell, i);
        let mut monitors = vec![
            Monitor::new(ProcedureKind::ProposedAsync, RuleFlavor::Simple, *thresholds, *prior),
            Monitor::new(ProcedureKind::DecentralizedSprt, RuleFlavor::Simple, *thresholds, *prior),
            Monitor::new(ProcedureKind::Synchronous, RuleFlavor::Simple, *thresholds, *prior),
            Monitor::new(ProcedureKind::ProposedAsync, RuleFlavor::Simple, *thresholds, open),
        ];
        run_monitors(models, config, &mut monitors, &mut rng, settings.horizon)?;
        let [proposed, sprt, sync, uninformed] = [0, 1, 2, 3].map(|j| monitors[j].record());
        let sync_time = sync.overall_stop;
        Ok([
            uninformed != sprt,
            proposed.stop_time.iter().any(|&t| t > sync_time),
            prior.l < prior.u
                && proposed.stop_time.iter().zip(&sprt.stop_time).any(|(p, s)| p > s),
            !prior.admits(sync.signal_count()),
        ])
    })?;
    let mut report = PathwiseReport {
        replications: settings.replications,
        ..Default::default()
    };
    for f in flags {
        report.uninformative_mismatch += f[0] as usize;
        report.synchronous_domination += f[1] as usize;
        report.sprt_domination += f[2] as usize;
        report.synchronous_count += f[3] as usize;
    }
    Ok(report)
}

/// Mean decision times under the known count `m` with fixed thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountDiagnostic {
    pub m: usize,
    /// Proposed rule, first signal stream.
    pub signal_mean: f64,
    pub signal_se: f64,
    pub synchronous_mean: f64,
    pub synchronous_se: f64,
}

/// Mean decision times of the gap rule (in a signal stream) and of the
/// synchronous rule for every known count `m = 1..K-1`, all at the same
/// levels `c = d = level`.
pub fn count_diagnostics(models: &[Model], level: f64, settings: &McSettings) -> Result<Vec<CountDiagnostic>> {
    let k = models.len();
    if k < 2 {
        return Err(Error::config("count diagnostics need K >= 2"));
    }
    let t = Thresholds::new(level, level, level, level)?;
    (1..k)
        .map(|m| {
            let prior = PriorBounds::new(m, m, k)?;
            let config = SignalConfig::canonical(k, m);
            let cell = tag(&[0xC0DE, m as u64]);
            let times = try_par_indexed(settings.replications, |i| {
                let mut rng = replication_rng(settings.seed, cell, i);
                let mut monitors = vec![
                    Monitor::new(ProcedureKind::ProposedAsync, RuleFlavor::Simple, t, prior),
                    Monitor::new(ProcedureKind::Synchronous, RuleFlavor::Simple, t, prior),
                ];
                run_monitors(models, &config, &mut monitors, &mut rng, settings.horizon)?;
                Ok((
                    monitors[0].record().stop_time[0] as f64,
                    monitors[1].record().overall_stop as f64,
                ))
            })?;
            let signal: Moments = times.iter().map(|t| t.0).collect();
            let sync: Moments = times.iter().map(|t| t.1).collect();
            Ok(CountDiagnostic {
                m,
                signal_mean: signal.mean(),
                signal_se: signal.std_error(),
                synchronous_mean: sync.mean(),
                synchronous_se: sync.std_error(),
            })
        })
        .collect()
}

/// Pairs `(m, m+1)` where the signal-stream mean increases by more than
/// `sigmas` combined standard errors.
pub fn signal_mean_increases(diag: &[CountDiagnostic], sigmas: f64) -> Vec<(usize, usize)> {
    diag.windows(2)
        .filter(|w| {
            let se = w[0].signal_se.hypot(w[1].signal_se);
            w[1].signal_mean > w[0].signal_mean + sigmas * se
        })
        .map(|w| (w[0].m, w[1].m))
        .collect()
}

/// Counts `m` whose synchronous mean exceeds the one at `m = K/2` by more
/// than `sigmas` combined standard errors.
pub fn synchronous_peak_violations(diag: &[CountDiagnostic], k: usize, sigmas: f64) -> Vec<usize> {
    let Some(mid) = diag.iter().find(|d| d.m == k / 2) else {
        return Vec::new();
    };
    diag.iter()
        .filter(|d| {
            let se = d.synchronous_se.hypot(mid.synchronous_se);
            d.synchronous_mean > mid.synchronous_mean + sigmas * se
        })
        .map(|d| d.m)
        .collect()
}
