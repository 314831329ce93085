//! Threshold sweeps: decision-time curves against worst-case error rates.

use serde::{Deserialize, Serialize};

use crate::calibration::{
    configurations, is_fwe_estimates, ConfigSelection, ErrorType, FweEstimate, IsScheme,
};
use crate::engine::{drive_path, par_indexed, replication_rng, tag, McSettings, Moments, PathOutcome};
use crate::error::{Error, Result};
use crate::procedures::{check_dimensions, Monitor, PriorBounds, ProcedureKind, RuleFlavor, Thresholds};
use crate::stream_models::{Model, SignalConfig};
use crate::theory::{ErrorMetric, ErrorReport};

/// Plain Monte Carlo error estimates below this level are replaced by
/// importance sampling.
pub const IS_SWITCH_LEVEL: f64 = 1e-2;

/// Largest relative standard error of a reported mean decision time before
/// the replication count is escalated.
pub const TIME_RELATIVE_SE_TARGET: f64 = 0.005;

/// Default escalation cap on plain Monte Carlo replications.
pub const DEFAULT_MAX_REPLICATIONS: usize = 100_000;

const CHUNK: usize = 2048;
const SWEEP_TAG: u64 = 0x5EE9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorEstimation {
    /// Plain Monte Carlo, switching to importance sampling below [`IS_SWITCH_LEVEL`].
    Auto,
    Plain,
    ImportanceSampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    Plain,
    ImportanceSampling,
}

impl EstimateMethod {
    pub fn name(&self) -> &'static str {
        match self {
            EstimateMethod::Plain => "plain",
            EstimateMethod::ImportanceSampling => "is",
        }
    }
}

/// A sweep over one free threshold parameter.
///
/// Every procedure maps the free parameter `x` to its thresholds with
/// [`Thresholds::coupled`]. Mean decision times are reported for `configs`;
/// the worst-case error rates are taken over `error_configs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kinds: Vec<ProcedureKind>,
    pub models: Vec<Model>,
    pub prior: PriorBounds,
    pub configs: Vec<SignalConfig>,
    pub error_configs: ConfigSelection,
    pub grid: Vec<f64>,
    pub settings: McSettings,
    pub max_replications: usize,
    pub estimation: ErrorEstimation,
    pub scheme: IsScheme,
    /// Count replications that hit the horizon as truncated instead of failing.
    pub allow_partial: bool,
}

impl SweepSpec {
    pub fn new(
        kinds: Vec<ProcedureKind>,
        models: Vec<Model>,
        prior: PriorBounds,
        configs: Vec<SignalConfig>,
        grid: Vec<f64>,
        settings: McSettings,
    ) -> Self {
        Self {
            kinds,
            models,
            prior,
            configs,
            error_configs: ConfigSelection::Auto,
            grid,
            settings,
            max_replications: DEFAULT_MAX_REPLICATIONS.max(settings.replications),
            estimation: ErrorEstimation::Auto,
            scheme: IsScheme::Auto,
            allow_partial: false,
        }
    }

    /// Canonical representative `{1..s}` of every admissible size.
    pub fn all_sizes(prior: &PriorBounds) -> Vec<SignalConfig> {
        prior.sizes().map(|s| SignalConfig::canonical(prior.k, s)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(Error::config("sweep needs at least one procedure"));
        }
        if self.configs.is_empty() {
            return Err(Error::config("sweep needs at least one signal configuration"));
        }
        if self.grid.is_empty() {
            return Err(Error::config("threshold grid must be nonempty"));
        }
        for (i, &x) in self.grid.iter().enumerate() {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::config(format!(
                    "grid value #{i} must be finite and > 0, got {x}"
                )));
            }
        }
        if self.models.len() != self.prior.k {
            return Err(Error::config(format!(
                "{} models given for K={}",
                self.models.len(),
                self.prior.k
            )));
        }
        for c in &self.configs {
            check_dimensions(self.models.len(), c, &self.prior)?;
            if !self.prior.admits(c.size()) {
                return Err(Error::config(format!(
                    "configuration {c} has {} signals outside [l, u] = [{}, {}]",
                    c.size(),
                    self.prior.l,
                    self.prior.u
                )));
            }
        }
        if self.settings.replications == 0 || self.settings.horizon == 0 {
            return Err(Error::config("replications and horizon must be >= 1"));
        }
        if self.max_replications < self.settings.replications {
            return Err(Error::config(format!(
                "max_replications ({}) is below replications ({})",
                self.max_replications, self.settings.replications
            )));
        }
        for &kind in &self.kinds {
            for &x in &self.grid {
                Thresholds::coupled(kind, &self.prior, x)?;
            }
        }
        Ok(())
    }
}

/// Familywise error estimate under one error configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub method: EstimateMethod,
    /// Label of the true configuration.
    pub config: String,
}

impl ErrorEstimate {
    pub fn log10(&self) -> f64 {
        self.estimate.log10()
    }
}

/// One grid point of a decision-time curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub free_parameter: f64,
    pub thresholds: Thresholds,
    pub mean_time: Vec<f64>,
    pub time_se: Vec<f64>,
    pub replications: usize,
    /// Replications stopped by the horizon; only nonzero with `allow_partial`.
    pub truncated: usize,
    /// Largest type I estimate over the error configurations.
    pub alpha: ErrorEstimate,
    /// Largest type II estimate over the error configurations.
    pub beta: ErrorEstimate,
    /// Type I estimate under each error configuration.
    pub alpha_by_config: Vec<ErrorEstimate>,
    /// Type II estimate under each error configuration.
    pub beta_by_config: Vec<ErrorEstimate>,
    /// Plain Monte Carlo values of every metric in [`ErrorMetric::ALL`]
    /// under the curve's own configuration.
    pub metrics: Vec<ErrorReport>,
}

impl CurvePoint {
    pub fn alpha_hat(&self) -> f64 {
        self.alpha.estimate
    }

    pub fn beta_hat(&self) -> f64 {
        self.beta.estimate
    }

    pub fn log10_alpha(&self) -> f64 {
        self.alpha.log10()
    }

    pub fn log10_beta(&self) -> f64 {
        self.beta.log10()
    }
}

/// Curve of one procedure under one signal configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub kind: ProcedureKind,
    pub config: SignalConfig,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Default)]
struct CellAccumulator {
    times: Vec<Moments>,
    /// Indexed like [`ErrorMetric::ALL`].
    metrics: [Moments; 8],
    truncated: usize,
}

impl CellAccumulator {
    fn fwe(&self, error_type: ErrorType) -> &Moments {
        match error_type {
            ErrorType::TypeI => &self.metrics[0],
            ErrorType::TypeII => &self.metrics[1],
        }
    }
}

struct PathResult {
    stop: Vec<Vec<u64>>,
    metrics: Vec<[Option<f64>; 8]>,
    truncated: bool,
}

/// Accumulated plain Monte Carlo pass of one configuration; cells are
/// indexed `kind * grid + g`.
struct PlainPass {
    cells: Vec<CellAccumulator>,
    replications: usize,
}

impl PlainPass {
    fn worst_relative_se(&self) -> f64 {
        self.cells
            .iter()
            .flat_map(|c| c.times.iter())
            .map(|m| m.std_error() / m.mean())
            .fold(0.0, f64::max)
    }
}

struct Sweeper<'a> {
    spec: &'a SweepSpec,
    thresholds: Vec<Vec<Thresholds>>,
}

impl Sweeper<'_> {
    fn cells(&self) -> usize {
        self.spec.kinds.len() * self.spec.grid.len()
    }

    fn cell_point(&self, cell: usize) -> (ProcedureKind, f64) {
        let g = self.spec.grid.len();
        (self.spec.kinds[cell / g], self.spec.grid[cell % g])
    }

    fn run_path(&self, config: &SignalConfig, cell_tag: u64, index: u64) -> Result<PathResult> {
        let spec = self.spec;
        let mut rng = replication_rng(spec.settings.seed, cell_tag, index);
        let mut monitors: Vec<Monitor> = self
            .thresholds
            .iter()
            .zip(&spec.kinds)
            .flat_map(|(ts, &kind)| {
                ts.iter()
                    .map(move |t| Monitor::new(kind, RuleFlavor::Simple, *t, spec.prior))
            })
            .collect();
        let outcome = drive_path(
            &spec.models,
            config.mask(),
            &mut rng,
            spec.settings.horizon,
            |state| {
                let mut done = true;
                for m in monitors.iter_mut() {
                    if !m.is_complete() {
                        m.observe(state);
                        done &= m.is_complete();
                    }
                }
                done
            },
        )?;
        let truncated = outcome == PathOutcome::Horizon;
        if truncated && !spec.allow_partial {
            let cell = monitors.iter().position(|m| !m.is_complete()).unwrap_or(0);
            let (kind, x) = self.cell_point(cell);
            let mon = &monitors[cell];
            return Err(Error::SweepPoint {
                kind: kind.name().to_string(),
                config: config.label(),
                free_parameter: x,
                source: Box::new(Error::HorizonExhausted {
                    horizon: spec.settings.horizon,
                    undecided: mon.undecided_count(),
                    partial: Box::new(mon.record()),
                }),
            });
        }
        let horizon = spec.settings.horizon;
        let mut out = PathResult {
            stop: Vec::with_capacity(monitors.len()),
            metrics: Vec::with_capacity(monitors.len()),
            truncated,
        };
        for m in &monitors {
            let rec = m.record();
            out.metrics.push(ErrorMetric::ALL.map(|e| e.statistic(&rec, config)));
            out.stop.push(
                rec.stop_time
                    .iter()
                    .map(|&t| if t == 0 { horizon } else { t })
                    .collect(),
            );
        }
        Ok(out)
    }

    /// Runs replications `start..end` and folds them into `pass` in index order.
    fn extend(
        &self,
        pass: &mut PlainPass,
        config: &SignalConfig,
        cell_tag: u64,
        end: usize,
    ) -> Result<()> {
        while pass.replications < end {
            let start = pass.replications;
            let stop = (start + CHUNK).min(end);
            let batch = par_indexed(stop - start, |i| self.run_path(config, cell_tag, start as u64 + i));
            for res in batch {
                let path = res?;
                for (c, acc) in pass.cells.iter_mut().enumerate() {
                    for (m, &t) in acc.times.iter_mut().zip(&path.stop[c]) {
                        m.push(t as f64);
                    }
                    for (m, x) in acc.metrics.iter_mut().zip(path.metrics[c]) {
                        if let Some(x) = x {
                            m.push(x);
                        }
                    }
                    if path.truncated {
                        acc.truncated += 1;
                    }
                }
            }
            pass.replications = stop;
        }
        Ok(())
    }

    fn plain_pass(&self, config: &SignalConfig, index: usize, escalate: bool) -> Result<PlainPass> {
        let k = self.spec.prior.k;
        let mut pass = PlainPass {
            cells: vec![
                CellAccumulator {
                    times: vec![Moments::default(); k],
                    ..Default::default()
                };
                self.cells()
            ],
            replications: 0,
        };
        let cell_tag = tag(&[SWEEP_TAG, index as u64]);
        let mut target = self.spec.settings.replications;
        self.extend(&mut pass, config, cell_tag, target)?;
        while escalate
            && target < self.spec.max_replications
            && pass.worst_relative_se() > TIME_RELATIVE_SE_TARGET
        {
            target = (2 * target).min(self.spec.max_replications);
            self.extend(&mut pass, config, cell_tag, target)?;
        }
        Ok(pass)
    }

    /// Error estimates of one kind under one configuration at every grid point.
    fn error_estimates(
        &self,
        kind_index: usize,
        config: &SignalConfig,
        config_index: usize,
        pass: &PlainPass,
        error_type: ErrorType,
    ) -> Result<Vec<(FweEstimate, EstimateMethod)>> {
        let spec = self.spec;
        let g = spec.grid.len();
        let plain: Vec<FweEstimate> = (0..g)
            .map(|j| {
                let m = pass.cells[kind_index * g + j].fwe(error_type);
                FweEstimate {
                    estimate: m.mean(),
                    std_error: m.std_error(),
                    replications: m.count as usize,
                }
            })
            .collect();
        // Truncated points keep plain estimates: the horizon also cuts importance-sampled paths.
        let needs_is: Vec<usize> = (0..g)
            .filter(|&j| pass.cells[kind_index * g + j].truncated == 0)
            .filter(|&j| match spec.estimation {
                ErrorEstimation::Plain => false,
                ErrorEstimation::ImportanceSampling => true,
                ErrorEstimation::Auto => plain[j].estimate < IS_SWITCH_LEVEL,
            })
            .collect();
        let mut out: Vec<(FweEstimate, EstimateMethod)> =
            plain.into_iter().map(|e| (e, EstimateMethod::Plain)).collect();
        if needs_is.is_empty() {
            return Ok(out);
        }
        let kind = spec.kinds[kind_index];
        let ts: Vec<Thresholds> = needs_is.iter().map(|&j| self.thresholds[kind_index][j]).collect();
        let cell = tag(&[SWEEP_TAG, 0x15, kind as u64, config_index as u64]);
        let est = match is_fwe_estimates(
            kind,
            &spec.models,
            config,
            &ts,
            &spec.prior,
            error_type,
            spec.scheme,
            &spec.settings,
            cell,
        ) {
            Err(Error::HorizonExhausted { .. }) if spec.allow_partial => return Ok(out),
            other => other,
        }
        .map_err(|e| Error::SweepPoint {
            kind: kind.name().to_string(),
            config: config.label(),
            free_parameter: needs_is.iter().map(|&j| spec.grid[j]).fold(f64::MIN, f64::max),
            source: Box::new(e),
        })?;
        for (&j, e) in needs_is.iter().zip(est) {
            out[j] = (e, EstimateMethod::ImportanceSampling);
        }
        Ok(out)
    }
}

fn at_point(estimates: &[(SignalConfig, Vec<(FweEstimate, EstimateMethod)>)], j: usize) -> Vec<ErrorEstimate> {
    estimates
        .iter()
        .map(|(config, est)| {
            let (e, method) = est[j];
            ErrorEstimate {
                estimate: e.estimate,
                std_error: e.std_error,
                method,
                config: config.label(),
            }
        })
        .collect()
}

fn worst(estimates: &[ErrorEstimate]) -> ErrorEstimate {
    let mut best: Option<&ErrorEstimate> = None;
    for e in estimates {
        if best.is_none_or(|b| e.estimate > b.estimate) {
            best = Some(e);
        }
    }
    best.expect("at least one error configuration").clone()
}

/// Runs a threshold sweep.
///
/// Every configuration is simulated once with all procedures and grid
/// points monitoring the same paths, so curves of different procedures
/// share their random numbers. Mean decision times come from these plain
/// Monte Carlo passes, which are extended until every reported mean has a
/// relative standard error of at most [`TIME_RELATIVE_SE_TARGET`] or the
/// replication cap is reached. Error rates use the same passes and switch
/// to importance sampling (at the base replication count) for small rates.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<Curve>> {
    spec.validate()?;
    let error_configs = configurations(&spec.models, &spec.prior, &spec.error_configs)?;
    let mut all: Vec<SignalConfig> = spec.configs.clone();
    for c in &error_configs {
        if !all.contains(c) {
            all.push(c.clone());
        }
    }
    let thresholds = spec
        .kinds
        .iter()
        .map(|&kind| {
            spec.grid
                .iter()
                .map(|&x| Thresholds::coupled(kind, &spec.prior, x))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let sweeper = Sweeper { spec, thresholds };

    let mut passes = Vec::with_capacity(all.len());
    for (i, config) in all.iter().enumerate() {
        passes.push(sweeper.plain_pass(config, i, spec.configs.contains(config))?);
    }

    let g = spec.grid.len();
    let mut curves = Vec::new();
    for (ki, &kind) in spec.kinds.iter().enumerate() {
        let mut type1 = Vec::with_capacity(error_configs.len());
        let mut type2 = Vec::with_capacity(error_configs.len());
        for config in &error_configs {
            let ci = all.iter().position(|c| c == config).expect("config listed");
            type1.push((
                config.clone(),
                sweeper.error_estimates(ki, config, ci, &passes[ci], ErrorType::TypeI)?,
            ));
            type2.push((
                config.clone(),
                sweeper.error_estimates(ki, config, ci, &passes[ci], ErrorType::TypeII)?,
            ));
        }
        for (ci, config) in spec.configs.iter().enumerate() {
            let pass = &passes[ci];
            let points = (0..g)
                .map(|j| {
                    let acc = &pass.cells[ki * g + j];
                    let alpha_by_config = at_point(&type1, j);
                    let beta_by_config = at_point(&type2, j);
                    CurvePoint {
                        free_parameter: spec.grid[j],
                        thresholds: sweeper.thresholds[ki][j],
                        mean_time: acc.times.iter().map(Moments::mean).collect(),
                        time_se: acc.times.iter().map(Moments::std_error).collect(),
                        replications: pass.replications,
                        truncated: acc.truncated,
                        alpha: worst(&alpha_by_config),
                        beta: worst(&beta_by_config),
                        alpha_by_config,
                        beta_by_config,
                        metrics: ErrorMetric::ALL
                            .iter()
                            .zip(&acc.metrics)
                            .map(|(&e, m)| ErrorReport::from_moments(e, m))
                            .collect(),
                    }
                })
                .collect();
            curves.push(Curve {
                kind,
                config: config.clone(),
                points,
            });
        }
    }
    Ok(curves)
}
