//! TOML run configuration.
//!
//! ```toml
//! [experiment]
//! name = "demo"
//! seed = 7
//! replications = 10000
//!
//! [models]
//! kind = "gaussian_mean"
//! k = 10
//! mu = 0.5
//!
//! [prior]
//! l = 3
//! u = 3
//!
//! [procedures]
//! kinds = ["sprt", "proposed", "synchronous"]
//!
//! [calibration]
//! method = "analytic"
//! alpha = 0.01
//! beta = 0.01
//!
//! [sweep]
//! grid = [4.0, 6.0, 8.0]
//! ```
//!
//! Every table rejects unknown keys.

use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationMethod, ConfigSelection, ErrorTargets, IsScheme};
use crate::composite::{CompositeGaussianModel, ParameterInterval};
use crate::engine::McSettings;
use crate::error::{Error, Result};
use crate::procedures::{PriorBounds, ProcedureKind, Thresholds};
use crate::simulation::{default_grid, ErrorEstimation, OracleCase, SweepSpec};
use crate::stream_models::{Model, SignalConfig};
use crate::theory::{gaussian_kl_exact, parse_rational, AreFamily, KlPair, RateRegime};
use crate::{DEFAULT_HORIZON, DEFAULT_REPLICATIONS};

use num_rational::Rational64;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub experiment: ExperimentSection,
    pub models: Option<ModelsSection>,
    pub prior: Option<PriorSection>,
    pub procedures: Option<ProceduresSection>,
    pub calibration: Option<CalibrationSection>,
    pub sweep: Option<SweepSection>,
    pub are: Option<AreSection>,
    pub oracle: Option<OracleSection>,
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_name")]
    pub name: String,
    pub seed: Option<u64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    pub max_replications: Option<usize>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            name: default_name(),
            seed: None,
            replications: DEFAULT_REPLICATIONS,
            horizon: DEFAULT_HORIZON,
            max_replications: None,
        }
    }
}

fn default_name() -> String {
    "run".to_string()
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

fn default_horizon() -> u64 {
    DEFAULT_HORIZON
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    GaussianMean,
    Bernoulli,
    CompositeGaussian,
}

/// Identical streams (`k` with `mu`, `p0`/`p1`, or `null`/`alt` intervals)
/// or per-stream Gaussian `means`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsSection {
    pub kind: ModelKind,
    pub k: Option<usize>,
    pub mu: Option<f64>,
    pub means: Option<Vec<f64>>,
    pub p0: Option<f64>,
    pub p1: Option<f64>,
    /// Composite null interval `[lo, hi]`.
    pub null: Option<[f64; 2]>,
    /// Composite alternative interval `[lo, hi]`.
    pub alt: Option<[f64; 2]>,
}

impl ModelsSection {
    /// Number of streams.
    pub fn k(&self) -> Result<usize> {
        match (&self.means, self.kind) {
            (Some(m), ModelKind::GaussianMean) if self.k.is_none() => Ok(m.len()),
            _ => self
                .k
                .filter(|&k| k >= 1)
                .ok_or_else(|| Error::config("[models] needs `k` >= 1")),
        }
    }

    /// Composite models; any other kind is an error.
    pub fn build_composite(&self) -> Result<Vec<CompositeGaussianModel>> {
        if self.kind != ModelKind::CompositeGaussian {
            return Err(Error::config("[models] kind is not composite_gaussian"));
        }
        if self.mu.is_some() || self.means.is_some() || self.p0.is_some() || self.p1.is_some() {
            return Err(Error::config("composite_gaussian models take only `k`, `null` and `alt`"));
        }
        let interval = |v: Option<[f64; 2]>, name: &str| match v {
            Some([lo, hi]) => ParameterInterval::new(lo, hi),
            None => Err(Error::config(format!("[models] needs `{name}`"))),
        };
        let m = CompositeGaussianModel::new(interval(self.null, "null")?, interval(self.alt, "alt")?)?;
        Ok(vec![m; self.k()?])
    }

    /// Simple-hypothesis models; composite models are an error.
    pub fn build(&self) -> Result<Vec<Model>> {
        if self.null.is_some() || self.alt.is_some() {
            if self.kind != ModelKind::CompositeGaussian {
                return Err(Error::config("`null`/`alt` apply to composite_gaussian models only"));
            }
        }
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::config(format!("[models] needs `{name}`")))
        };
        let k_of = |k: Option<usize>| {
            k.filter(|&k| k >= 1)
                .ok_or_else(|| Error::config("[models] needs `k` >= 1"))
        };
        match self.kind {
            ModelKind::GaussianMean => {
                if self.p0.is_some() || self.p1.is_some() {
                    return Err(Error::config("`p0`/`p1` apply to bernoulli models only"));
                }
                match (&self.means, self.mu) {
                    (Some(_), Some(_)) => Err(Error::config("give either `mu` or `means`, not both")),
                    (Some(means), None) => {
                        if let Some(k) = self.k {
                            if k != means.len() {
                                return Err(Error::config(format!(
                                    "k = {k} but {} means given",
                                    means.len()
                                )));
                            }
                        }
                        if means.is_empty() {
                            return Err(Error::config("`means` must be nonempty"));
                        }
                        means.iter().map(|&m| Model::gaussian(m)).collect()
                    }
                    (None, mu) => Ok(vec![Model::gaussian(need(mu, "mu")?)?; k_of(self.k)?]),
                }
            }
            ModelKind::Bernoulli => {
                if self.mu.is_some() || self.means.is_some() {
                    return Err(Error::config("`mu`/`means` apply to gaussian_mean models only"));
                }
                Ok(vec![
                    Model::bernoulli(need(self.p0, "p0")?, need(self.p1, "p1")?)?;
                    k_of(self.k)?
                ])
            }
            ModelKind::CompositeGaussian => Err(Error::config(
                "composite_gaussian models are supported by `calibrate` in analytic mode only",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub l: usize,
    pub u: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProceduresSection {
    pub kinds: Vec<ProcedureKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    Auto,
    Canonical,
    Exhaustive,
}

impl From<SelectionKind> for ConfigSelection {
    fn from(s: SelectionKind) -> Self {
        match s {
            SelectionKind::Auto => ConfigSelection::Auto,
            SelectionKind::Canonical => ConfigSelection::Canonical,
            SelectionKind::Exhaustive => ConfigSelection::Exhaustive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub method: CalibrationMethod,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "auto_selection")]
    pub selection: SelectionKind,
}

fn auto_selection() -> SelectionKind {
    SelectionKind::Auto
}

/// Signal sets listed by one-based stream labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConfigList {
    Named(ConfigListName),
    Explicit(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigListName {
    AllSizes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub grid: Option<Vec<f64>>,
    pub configs: Option<ConfigList>,
    #[serde(default = "auto_selection")]
    pub error_configs: SelectionKind,
    #[serde(default = "auto_estimation")]
    pub estimation: ErrorEstimation,
    #[serde(default = "auto_scheme")]
    pub is_scheme: IsScheme,
    #[serde(default)]
    pub allow_partial: bool,
}

fn auto_estimation() -> ErrorEstimation {
    ErrorEstimation::Auto
}

fn auto_scheme() -> IsScheme {
    IsScheme::Auto
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    Ratio,
    AlphaNegligible,
    BetaNegligible,
}

/// Exact inputs of efficiency tables. KL numbers come from per-stream
/// Gaussian `means` or explicit `kl = [[I, J], ...]` pairs, written as
/// decimals or fractions. Without `l`/`u` every row uses the known count
/// `l = u = |A|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreSection {
    pub means: Option<Vec<String>>,
    pub kl: Option<Vec<[String; 2]>>,
    pub rows: Vec<Vec<usize>>,
    pub l: Option<usize>,
    pub u: Option<usize>,
    #[serde(default = "ratio_regime")]
    pub regime: RegimeKind,
    #[serde(default = "unit_ratio")]
    pub r: String,
    #[serde(default = "both_families")]
    pub families: Vec<AreFamily>,
}

fn ratio_regime() -> RegimeKind {
    RegimeKind::Ratio
}

fn unit_ratio() -> String {
    "1".to_string()
}

fn both_families() -> Vec<AreFamily> {
    vec![AreFamily::Decentralized, AreFamily::Synchronous]
}

/// Resolved efficiency-table request.
#[derive(Debug, Clone, PartialEq)]
pub struct AreRequest {
    pub label: String,
    pub kls: Vec<KlPair<Rational64>>,
    pub rows: Vec<(SignalConfig, PriorBounds)>,
    pub regime: RateRegime<Rational64>,
    pub r_text: String,
    pub families: Vec<AreFamily>,
    pub bounds_text: String,
}

impl AreSection {
    pub fn resolve(&self, label: &str) -> Result<AreRequest> {
        let kls: Vec<KlPair<Rational64>> = match (&self.means, &self.kl) {
            (Some(means), None) => means
                .iter()
                .map(|m| parse_rational(m).map(gaussian_kl_exact))
                .collect::<Result<_>>()?,
            (None, Some(pairs)) => pairs
                .iter()
                .map(|[i, j]| Ok((parse_rational(i)?, parse_rational(j)?)))
                .collect::<Result<_>>()?,
            _ => return Err(Error::config("[are] needs exactly one of `means` or `kl`")),
        };
        let zero = Rational64::from_integer(0);
        if kls.is_empty() || kls.iter().any(|(i, j)| *i <= zero || *j <= zero) {
            return Err(Error::config("[are] KL numbers must be positive"));
        }
        let k = kls.len();
        if self.rows.is_empty() {
            return Err(Error::config("[are] needs at least one row"));
        }
        let bounds = match (self.l, self.u) {
            (Some(l), Some(u)) => Some(PriorBounds::new(l, u, k)?),
            (None, None) => None,
            _ => return Err(Error::config("[are] needs both `l` and `u` or neither")),
        };
        let rows = self
            .rows
            .iter()
            .map(|labels| {
                let c = SignalConfig::from_labels(k, labels)?;
                let prior = match bounds {
                    Some(p) => p,
                    None => PriorBounds::new(c.size(), c.size(), k)?,
                };
                if !prior.admits(c.size()) {
                    return Err(Error::config(format!(
                        "row {c} is outside l={}, u={}",
                        prior.l, prior.u
                    )));
                }
                Ok((c, prior))
            })
            .collect::<Result<Vec<_>>>()?;
        let r = parse_rational(&self.r)?;
        if r <= zero {
            return Err(Error::config("[are] `r` must be positive"));
        }
        let regime = match self.regime {
            RegimeKind::Ratio => RateRegime::Ratio(r),
            RegimeKind::AlphaNegligible => RateRegime::AlphaNegligible,
            RegimeKind::BetaNegligible => RateRegime::BetaNegligible,
        };
        Ok(AreRequest {
            label: label.to_string(),
            kls,
            rows,
            regime,
            r_text: match self.regime {
                RegimeKind::Ratio => self.r.clone(),
                RegimeKind::AlphaNegligible => "alpha_negligible".into(),
                RegimeKind::BetaNegligible => "beta_negligible".into(),
            },
            families: self.families.clone(),
            bounds_text: match bounds {
                Some(p) => format!("l={} u={}", p.l, p.u),
                None => "l=u=|A|".to_string(),
            },
        })
    }
}

/// Bernoulli oracle cases; without `cases` the built-in set is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default)]
    pub cases: Vec<OracleCaseSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCaseSection {
    pub name: String,
    pub kind: ProcedureKind,
    pub k: usize,
    pub p0: f64,
    pub p1: f64,
    pub l: usize,
    pub u: usize,
    /// One-based labels of the true signals.
    pub signals: Vec<usize>,
    /// Free parameter mapped to thresholds as in sweeps.
    pub level: Option<f64>,
    pub thresholds: Option<Thresholds>,
    pub depth: u64,
}

impl OracleCaseSection {
    pub fn build(&self) -> Result<OracleCase> {
        let prior = PriorBounds::new(self.l, self.u, self.k)?;
        let thresholds = match (self.level, self.thresholds) {
            (Some(x), None) => Thresholds::coupled(self.kind, &prior, x)?,
            (None, Some(t)) => {
                t.validate()?;
                t
            }
            _ => {
                return Err(Error::config(format!(
                    "oracle case {:?} needs exactly one of `level` or `thresholds`",
                    self.name
                )))
            }
        };
        Ok(OracleCase {
            name: self.name.clone(),
            kind: self.kind,
            models: vec![Model::bernoulli(self.p0, self.p1)?; self.k],
            prior,
            config: SignalConfig::from_labels(self.k, &self.signals)?,
            thresholds,
            depth: self.depth,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn settings(&self, seed_override: Option<u64>) -> Result<McSettings> {
        let e = &self.experiment;
        McSettings::new(
            e.replications,
            seed_override.or(e.seed).unwrap_or(DEFAULT_SEED),
            e.horizon,
        )
    }

    pub fn models(&self) -> Result<Vec<Model>> {
        self.models
            .as_ref()
            .ok_or_else(|| Error::config("missing [models] section"))?
            .build()
    }

    pub fn prior(&self, k: usize) -> Result<PriorBounds> {
        let p = self
            .prior
            .ok_or_else(|| Error::config("missing [prior] section"))?;
        PriorBounds::new(p.l, p.u, k)
    }

    pub fn kinds(&self) -> Vec<ProcedureKind> {
        match &self.procedures {
            Some(p) if !p.kinds.is_empty() => p.kinds.clone(),
            _ => ProcedureKind::ALL.to_vec(),
        }
    }

    pub fn targets(&self) -> Result<(CalibrationSection, ErrorTargets)> {
        let c = self
            .calibration
            .clone()
            .ok_or_else(|| Error::config("missing [calibration] section"))?;
        let t = ErrorTargets::new(c.alpha, c.beta)?;
        Ok((c, t))
    }

    /// Sweep described by the `[sweep]` table and the shared sections.
    pub fn sweep_spec(&self, settings: &McSettings, allow_partial: bool) -> Result<SweepSpec> {
        let models = self.models()?;
        let prior = self.prior(models.len())?;
        let section = self
            .sweep
            .clone()
            .ok_or_else(|| Error::config("missing [sweep] section"))?;
        let configs = match &section.configs {
            None | Some(ConfigList::Named(ConfigListName::AllSizes)) => SweepSpec::all_sizes(&prior),
            Some(ConfigList::Explicit(list)) => list
                .iter()
                .map(|labels| SignalConfig::from_labels(prior.k, labels))
                .collect::<Result<_>>()?,
        };
        let mut spec = SweepSpec::new(
            self.kinds(),
            models,
            prior,
            configs,
            section.grid.clone().unwrap_or_else(default_grid),
            *settings,
        );
        spec.error_configs = section.error_configs.into();
        spec.estimation = section.estimation;
        spec.scheme = section.is_scheme;
        spec.allow_partial = section.allow_partial || allow_partial;
        if let Some(m) = self.experiment.max_replications {
            spec.max_replications = m;
        }
        spec.validate()?;
        Ok(spec)
    }
}
