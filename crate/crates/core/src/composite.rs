//! Composite hypotheses: adaptive log-likelihood ratios and the composite
//! variants of the three procedures.
//!
//! Each stream has a unit-variance Gaussian mean `θ_k` restricted to a null
//! interval `Θ⁰` or an alternative interval `Θ¹`. The adaptive statistic
//! accumulates the log-likelihood at the previous step's estimate and is
//! compared with the maximum log-likelihoods over the two intervals.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::engine::{replication_rng, tag, try_par_indexed, McSettings, Moments};
use crate::error::{Error, Result};
use crate::procedures::{
    async_step_into, check_dimensions, synchronous_rule, DecisionRecord, Monitor, PriorBounds,
    ProcedureKind, RuleFlavor, Thresholds,
};
use crate::statistics::LlrState;
use crate::stream_models::SignalConfig;

/// Closed bounded interval `[lo, hi]`; a point when `lo == hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ParameterInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::config(format!(
                "parameter interval needs finite lo <= hi (got [{lo}, {hi}])"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(theta: f64) -> Result<Self> {
        Self::new(theta, theta)
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.lo && theta <= self.hi
    }

    pub fn clamp(&self, theta: f64) -> f64 {
        theta.clamp(self.lo, self.hi)
    }

    /// Distance from `theta` to the nearest point of the interval.
    pub fn distance(&self, theta: f64) -> f64 {
        (theta - self.clamp(theta)).abs()
    }
}

/// How `θ̂_k(n)` is formed from the stream's first `n` observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Estimator {
    /// Maximum-likelihood estimate over `Θ⁰ ∪ Θ¹`.
    ClampedMle,
    /// A constant plug-in value.
    Fixed { theta: f64 },
}

/// Unit-variance Gaussian mean with interval hypotheses
/// `H0: θ ∈ Θ⁰` against `H1: θ ∈ Θ¹`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeGaussianModel {
    pub null_space: ParameterInterval,
    pub alt_space: ParameterInterval,
    pub estimator: Estimator,
}

impl CompositeGaussianModel {
    pub fn new(null_space: ParameterInterval, alt_space: ParameterInterval) -> Result<Self> {
        Self::with_estimator(null_space, alt_space, Estimator::ClampedMle)
    }

    pub fn with_estimator(
        null_space: ParameterInterval,
        alt_space: ParameterInterval,
        estimator: Estimator,
    ) -> Result<Self> {
        let m = Self {
            null_space,
            alt_space,
            estimator,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, a) = (self.null_space, self.alt_space);
        ParameterInterval::new(n.lo, n.hi)?;
        ParameterInterval::new(a.lo, a.hi)?;
        if !(n.hi < a.lo || a.hi < n.lo) {
            return Err(Error::config(format!(
                "null [{}, {}] and alternative [{}, {}] intervals must be disjoint",
                n.lo, n.hi, a.lo, a.hi
            )));
        }
        if let Estimator::Fixed { theta } = self.estimator {
            if !(n.contains(theta) || a.contains(theta)) {
                return Err(Error::config(format!(
                    "fixed estimate {theta} lies outside both parameter intervals"
                )));
            }
        }
        Ok(())
    }

    /// Estimate before any observation: the point of `Θ⁰ ∪ Θ¹` nearest to
    /// the midpoint of the hull of both intervals.
    pub fn initial_estimate(&self) -> f64 {
        match self.estimator {
            Estimator::Fixed { theta } => theta,
            Estimator::ClampedMle => {
                let lo = self.null_space.lo.min(self.alt_space.lo);
                let hi = self.null_space.hi.max(self.alt_space.hi);
                self.nearest(0.5 * (lo + hi))
            }
        }
    }

    /// Point of `Θ⁰ ∪ Θ¹` nearest to `x`; ties go to the null.
    fn nearest(&self, x: f64) -> f64 {
        let n = self.null_space.clamp(x);
        let a = self.alt_space.clamp(x);
        if (x - n).abs() <= (x - a).abs() {
            n
        } else {
            a
        }
    }

    /// Point of `Θ⁰ ∪ Θ¹` nearest to the sample mean; ties go to the null.
    pub fn estimate(&self, count: u64, sum: f64) -> f64 {
        if count == 0 {
            return self.initial_estimate();
        }
        match self.estimator {
            Estimator::Fixed { theta } => theta,
            Estimator::ClampedMle => self.nearest(sum / count as f64),
        }
    }

    /// `log dN(θ,1)/dN(0,1)` of one observation.
    #[inline]
    pub fn log_likelihood(x: f64, theta: f64) -> f64 {
        theta * x - 0.5 * theta * theta
    }

    /// `sup_{θ ∈ space} ℓ(n, θ)` from the sufficient statistics.
    pub fn max_log_likelihood(space: &ParameterInterval, count: u64, sum: f64) -> f64 {
        if count == 0 {
            return 0.0;
        }
        let n = count as f64;
        let theta = space.clamp(sum / n);
        theta * sum - 0.5 * n * theta * theta
    }

    pub fn sample<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        theta + z
    }

    /// Whether a true parameter makes the stream a signal, or an error if it
    /// lies in neither interval.
    pub fn classify(&self, theta: f64) -> Result<bool> {
        if self.alt_space.contains(theta) {
            Ok(true)
        } else if self.null_space.contains(theta) {
            Ok(false)
        } else {
            Err(Error::config(format!(
                "true parameter {theta} lies in neither hypothesis interval"
            )))
        }
    }

    /// `I(θ)` for `θ ∈ Θ¹` or `J(θ)` for `θ ∈ Θ⁰`: half the squared distance
    /// to the opposite interval.
    pub fn separation(&self, theta: f64) -> Result<f64> {
        let other = if self.classify(theta)? {
            self.null_space
        } else {
            self.alt_space
        };
        let d = other.distance(theta);
        Ok(0.5 * d * d)
    }
}

/// Adaptive statistics of all `K` streams at time `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveLlrState {
    count: u64,
    sum: Vec<f64>,
    ell_star: Vec<f64>,
    ell0: Vec<f64>,
    ell1: Vec<f64>,
    theta_hat: Vec<f64>,
    lambda: LlrState,
}

impl AdaptiveLlrState {
    pub fn new(models: &[CompositeGaussianModel]) -> Self {
        let k = models.len();
        Self {
            count: 0,
            sum: vec![0.0; k],
            ell_star: vec![0.0; k],
            ell0: vec![0.0; k],
            ell1: vec![0.0; k],
            theta_hat: models.iter().map(|m| m.initial_estimate()).collect(),
            lambda: LlrState::new(k),
        }
    }

    pub fn k(&self) -> usize {
        self.sum.len()
    }

    pub fn n(&self) -> u64 {
        self.count
    }

    pub fn ell_star(&self) -> &[f64] {
        &self.ell_star
    }

    pub fn ell0(&self) -> &[f64] {
        &self.ell0
    }

    pub fn ell1(&self) -> &[f64] {
        &self.ell1
    }

    pub fn theta_hat(&self) -> &[f64] {
        &self.theta_hat
    }

    pub fn lambda_star(&self) -> &[f64] {
        self.lambda.values()
    }

    /// `p*(n)`: streams with positive adaptive LLR.
    pub fn positive_count(&self) -> usize {
        self.lambda.positive_count()
    }

    /// The adaptive LLRs with their order statistics, as consumed by the rules.
    pub fn llr_state(&self) -> &LlrState {
        &self.lambda
    }

    /// Adds one observation per stream.
    pub fn advance(&mut self, observations: &[f64], models: &[CompositeGaussianModel]) -> Result<()> {
        let k = self.k();
        if observations.len() != k || models.len() != k {
            return Err(Error::config(format!(
                "expected {k} observations and models, got {} and {}",
                observations.len(),
                models.len()
            )));
        }
        self.count += 1;
        for (q, (&x, m)) in observations.iter().zip(models).enumerate() {
            self.ell_star[q] += CompositeGaussianModel::log_likelihood(x, self.theta_hat[q]);
            self.sum[q] += x;
            self.ell0[q] = CompositeGaussianModel::max_log_likelihood(&m.null_space, self.count, self.sum[q]);
            self.ell1[q] = CompositeGaussianModel::max_log_likelihood(&m.alt_space, self.count, self.sum[q]);
            self.theta_hat[q] = m.estimate(self.count, self.sum[q]);
            if !(self.ell_star[q].is_finite() && self.ell0[q].is_finite() && self.ell1[q].is_finite()) {
                return Err(Error::Numerical {
                    stream: q,
                    message: format!("non-finite log-likelihood after observation {x}"),
                });
            }
        }
        let (star, l0, l1) = (&self.ell_star, &self.ell0, &self.ell1);
        self.lambda.set_next((0..k).map(|q| adaptive_llr(star[q], l0[q], l1[q])));
        Ok(())
    }

    /// Checks the sign-consistency of every adaptive LLR with its defining case.
    pub fn sign_consistent(&self) -> bool {
        (0..self.k()).all(|q| {
            let v = self.lambda.value(q);
            if v > 0.0 {
                v == self.ell_star[q] - self.ell0[q]
            } else if v < 0.0 {
                v == self.ell1[q] - self.ell_star[q]
            } else {
                true
            }
        })
    }
}

/// Three-case adaptive LLR.
#[inline]
pub fn adaptive_llr(ell_star: f64, ell0: f64, ell1: f64) -> f64 {
    if ell0 < ell1.min(ell_star) {
        ell_star - ell0
    } else if ell1 < ell0.min(ell_star) {
        ell1 - ell_star
    } else {
        0.0
    }
}

/// Composite parallel SPRT step.
pub fn composite_sprt_step(
    state: &AdaptiveLlrState,
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
        RuleFlavor::Composite,
        state.llr_state(),
        thresholds,
        &prior,
        undecided,
        &mut out,
    );
    out
}

/// Composite gap / gap-intersection step.
pub fn composite_proposed_step(
    state: &AdaptiveLlrState,
    thresholds: &Thresholds,
    prior: &PriorBounds,
    undecided: &[bool],
) -> Vec<(usize, bool)> {
    let mut out = Vec::new();
    async_step_into(
        ProcedureKind::ProposedAsync,
        RuleFlavor::Composite,
        state.llr_state(),
        thresholds,
        prior,
        undecided,
        &mut out,
    );
    out
}

/// Composite synchronous step.
pub fn composite_synchronous_step(
    state: &AdaptiveLlrState,
    thresholds: &Thresholds,
    prior: &PriorBounds,
) -> Option<Vec<bool>> {
    synchronous_rule(RuleFlavor::Composite, state.llr_state(), thresholds, prior)
}

/// Truth implied by the true parameters of every stream.
pub fn composite_truth(models: &[CompositeGaussianModel], thetas: &[f64]) -> Result<SignalConfig> {
    if models.len() != thetas.len() {
        return Err(Error::config(format!(
            "{} models but {} true parameters",
            models.len(),
            thetas.len()
        )));
    }
    let mask = models
        .iter()
        .zip(thetas)
        .map(|(m, &t)| m.classify(t))
        .collect::<Result<Vec<bool>>>()?;
    Ok(SignalConfig::from_mask(mask))
}

/// Samples one replication with true means `thetas` and runs the composite
/// variant of `kind` until every stream is decided.
#[allow(clippy::too_many_arguments)]
pub fn run_composite_replication<R: Rng + ?Sized>(
    kind: ProcedureKind,
    models: &[CompositeGaussianModel],
    thetas: &[f64],
    thresholds: &Thresholds,
    prior: &PriorBounds,
    rng: &mut R,
    horizon: u64,
) -> Result<DecisionRecord> {
    let truth = composite_truth(models, thetas)?;
    check_dimensions(models.len(), &truth, prior)?;
    thresholds.validate()?;
    let mut state = AdaptiveLlrState::new(models);
    let mut monitor = Monitor::new(kind, RuleFlavor::Composite, *thresholds, *prior);
    let mut obs = vec![0.0; models.len()];
    while state.n() < horizon {
        for (x, &t) in obs.iter_mut().zip(thetas) {
            *x = CompositeGaussianModel::sample(t, rng);
        }
        state.advance(&obs, models)?;
        monitor.observe(state.llr_state());
        if monitor.is_complete() {
            return Ok(monitor.record());
        }
    }
    Err(Error::HorizonExhausted {
        horizon,
        undecided: monitor.undecided_count(),
        partial: Box::new(monitor.record()),
    })
}

/// Plain Monte Carlo familywise error rates and mean decision times of a
/// composite procedure at fixed true parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeSummary {
    pub fwe1: f64,
    pub fwe1_se: f64,
    pub fwe2: f64,
    pub fwe2_se: f64,
    pub mean_time: Vec<f64>,
    pub time_se: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn composite_summary(
    kind: ProcedureKind,
    models: &[CompositeGaussianModel],
    thetas: &[f64],
    thresholds: &Thresholds,
    prior: &PriorBounds,
    settings: &McSettings,
    cell: u64,
) -> Result<CompositeSummary> {
    let truth = composite_truth(models, thetas)?;
    let cell_tag = tag(&[cell, 0xC0, kind as u64]);
    let records = try_par_indexed(settings.replications, |i| {
        let mut rng = replication_rng(settings.seed, cell_tag, i);
        run_composite_replication(kind, models, thetas, thresholds, prior, &mut rng, settings.horizon)
    })?;
    let fwe1: Moments = records.iter().map(|r| r.type1_error(&truth) as u8 as f64).collect();
    let fwe2: Moments = records.iter().map(|r| r.type2_error(&truth) as u8 as f64).collect();
    let times: Vec<Moments> = (0..models.len())
        .map(|k| records.iter().map(|r| r.stop_time[k] as f64).collect())
        .collect();
    Ok(CompositeSummary {
        fwe1: fwe1.mean(),
        fwe1_se: fwe1.std_error(),
        fwe2: fwe2.mean(),
        fwe2_se: fwe2.std_error(),
        mean_time: times.iter().map(|m| m.mean()).collect(),
        time_se: times.iter().map(|m| m.std_error()).collect(),
    })
}

/// Empirical mean and standard error of `exp{ℓ*_k(n) − ℓ_k(n, θ)}` under
/// `θ` for a single stream, at each requested time.
pub fn martingale_means(
    model: &CompositeGaussianModel,
    theta: f64,
    times: &[u64],
    settings: &McSettings,
    cell: u64,
) -> Result<Vec<(f64, f64)>> {
    let last = times.iter().copied().max().unwrap_or(0);
    let cell_tag = tag(&[cell, 0x3A]);
    let models = std::slice::from_ref(model);
    let paths = try_par_indexed(settings.replications, |i| {
        let mut rng = replication_rng(settings.seed, cell_tag, i);
        let mut state = AdaptiveLlrState::new(models);
        let mut ell_true = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for n in 1..=last {
            let x = CompositeGaussianModel::sample(theta, &mut rng);
            ell_true += CompositeGaussianModel::log_likelihood(x, theta);
            state.advance(&[x], models)?;
            if times.contains(&n) {
                out.push((state.ell_star()[0] - ell_true).exp());
            }
        }
        Ok(out)
    })?;
    Ok((0..times.len())
        .map(|j| {
            let m: Moments = paths.iter().map(|p| p[j]).collect();
            (m.mean(), m.std_error())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::replication_rng;
    use crate::procedures::sprt_step;
    use crate::stream_models::Model;

    fn iv(lo: f64, hi: f64) -> ParameterInterval {
        ParameterInterval::new(lo, hi).unwrap()
    }

    fn model() -> CompositeGaussianModel {
        CompositeGaussianModel::new(iv(-0.5, 0.0), iv(0.3, 1.0)).unwrap()
    }

    #[test]
    fn validation() {
        assert!(CompositeGaussianModel::new(iv(-0.5, 0.4), iv(0.3, 1.0)).is_err());
        assert!(ParameterInterval::new(1.0, 0.0).is_err());
        assert!(ParameterInterval::new(f64::NAN, 0.0).is_err());
        assert!(CompositeGaussianModel::with_estimator(iv(-0.5, 0.0), iv(0.3, 1.0), Estimator::Fixed { theta: 0.2 }).is_err());
        assert!(model().classify(0.1).is_err());
        assert_eq!(model().initial_estimate(), 0.3);
    }

    #[test]
    fn initial_state_is_zero() {
        let s = AdaptiveLlrState::new(&[model(); 3]);
        assert_eq!(s.n(), 0);
        for v in [s.ell_star(), s.ell0(), s.ell1(), s.lambda_star()] {
            assert!(v.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn closed_form_suprema_match_grid_search() {
        let m = model();
        for &x in &[-2.0, -0.7, -0.25, 0.0, 0.15, 0.31, 0.6, 1.4, 3.0] {
            for (space, closed) in [
                (m.null_space, CompositeGaussianModel::max_log_likelihood(&m.null_space, 1, x)),
                (m.alt_space, CompositeGaussianModel::max_log_likelihood(&m.alt_space, 1, x)),
            ] {
                let steps = ((space.hi - space.lo) / 1e-6).round() as usize;
                let grid = (0..=steps)
                    .map(|i| space.lo + i as f64 * 1e-6)
                    .map(|t| -(x - t) * (x - t) / 2.0 + x * x / 2.0)
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!((grid - closed).abs() < 1e-9, "x={x}: {grid} vs {closed}");
            }
        }
    }

    #[test]
    fn adaptive_cases() {
        assert_eq!(adaptive_llr(2.0, 0.5, 1.0), 1.5);
        assert_eq!(adaptive_llr(2.0, 1.0, 0.5), -1.5);
        assert_eq!(adaptive_llr(0.2, 0.5, 1.0), 0.0);
        assert_eq!(adaptive_llr(1.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn sign_consistency_along_paths() {
        let models = [model(); 4];
        let thetas = [0.6, -0.2, 0.3, 0.0];
        let mut rng = replication_rng(3, 4, 5);
        let mut s = AdaptiveLlrState::new(&models);
        for _ in 0..300 {
            let obs: Vec<f64> = thetas.iter().map(|&t| CompositeGaussianModel::sample(t, &mut rng)).collect();
            s.advance(&obs, &models).unwrap();
            assert!(s.sign_consistent());
            let pos = s.lambda_star().iter().filter(|&&v| v > 0.0).count();
            assert_eq!(s.positive_count(), pos);
        }
    }

    #[test]
    fn one_step_delayed_plug_in() {
        let m = model();
        let mut s = AdaptiveLlrState::new(&[m]);
        s.advance(&[0.8], &[m]).unwrap();
        // first step uses the initial estimate 0.3
        assert!((s.ell_star()[0] - (0.3 * 0.8 - 0.5 * 0.09)).abs() < 1e-15);
        assert_eq!(s.theta_hat()[0], 0.8);
        s.advance(&[-0.2], &[m]).unwrap();
        assert!((s.ell_star()[0] - (0.3 * 0.8 - 0.5 * 0.09) - (0.8 * -0.2 - 0.32)).abs() < 1e-15);
        assert!((s.theta_hat()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn point_spaces_reduce_to_simple_llr() {
        // plugging in the alternative gives the simple LLR whenever positive,
        // plugging in the null gives it whenever negative
        let mu = 0.5;
        let simple = Model::gaussian(mu).unwrap();
        for (plug, sign) in [(mu, 1.0), (0.0, -1.0)] {
            let m = CompositeGaussianModel::with_estimator(
                ParameterInterval::point(0.0).unwrap(),
                ParameterInterval::point(mu).unwrap(),
                Estimator::Fixed { theta: plug },
            )
            .unwrap();
            let mut rng = replication_rng(11, 0, 0);
            let mut s = AdaptiveLlrState::new(&[m; 2]);
            let mut llr = LlrState::new(2);
            let mut hits = 0;
            for _ in 0..400 {
                let obs = [CompositeGaussianModel::sample(0.3, &mut rng), CompositeGaussianModel::sample(0.1, &mut rng)];
                s.advance(&obs, &[m; 2]).unwrap();
                let inc: Vec<f64> = obs.iter().map(|&x| crate::stream_models::StreamModel::llr_increment(&simple, x)).collect();
                llr.advance(&inc).unwrap();
                for q in 0..2 {
                    let v = s.lambda_star()[q];
                    if v.abs() > 1e-9 {
                        assert!((v - llr.value(q)).abs() < 1e-9);
                        assert_eq!(v.signum(), sign);
                        hits += 1;
                    }
                    if llr.value(q) * sign > 1e-9 {
                        assert!(v.abs() > 0.0);
                    }
                }
            }
            assert!(hits > 0);
        }
    }

    fn state_with(values: &[f64]) -> AdaptiveLlrState {
        let k = values.len();
        let mut s = AdaptiveLlrState::new(&vec![model(); k]);
        s.count = 1;
        s.lambda = LlrState::from_values(1, values.to_vec());
        s
    }

    #[test]
    fn composite_gap_examples() {
        let t = Thresholds::new(10.0, 10.0, 1.0, 1.0).unwrap();
        let prior = PriorBounds::new(1, 1, 2).unwrap();
        let fired = composite_proposed_step(&state_with(&[2.5, -0.3]), &t, &prior, &[true, true]);
        assert!(fired.contains(&(0, true)));
        let fired = composite_proposed_step(&state_with(&[2.5, 0.3]), &t, &prior, &[true, true]);
        assert!(!fired.contains(&(0, true)));
        let bounded = PriorBounds::new(1, 2, 3).unwrap();
        let t = Thresholds::new(2.0, 2.0, 50.0, 50.0).unwrap();
        let fired = composite_proposed_step(&state_with(&[2.1, 1.0, 1.5]), &t, &bounded, &[true; 3]);
        assert_eq!(fired, vec![(0, true)]);
    }

    #[test]
    fn composite_synchronous_side_conditions() {
        let t = Thresholds::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let prior = PriorBounds::new(1, 1, 2).unwrap();
        assert!(composite_synchronous_step(&state_with(&[-0.5, -3.0]), &t, &prior).is_none());
        assert_eq!(
            composite_synchronous_step(&state_with(&[0.5, -3.0]), &t, &prior),
            Some(vec![true, false])
        );
        assert!(composite_synchronous_step(&state_with(&[4.0, 1.5]), &t, &prior).is_none());
    }

    #[test]
    fn composite_sprt_is_strict() {
        let t = Thresholds::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let s = state_with(&[1.0, -1.0, 1.01]);
        assert_eq!(composite_sprt_step(&s, &t, &[true; 3]), vec![(2, true)]);
        assert_eq!(sprt_step(s.llr_state(), &t, &[true; 3]).len(), 3);
    }

    #[test]
    fn uninformative_composite_proposed_equals_sprt() {
        let models = [model(); 3];
        let thetas = [0.5, -0.1, 0.35];
        let t = Thresholds::new(3.0, 3.0, 3.0, 3.0).unwrap();
        let prior = PriorBounds::uninformative(3).unwrap();
        for i in 0..50 {
            let a = run_composite_replication(ProcedureKind::ProposedAsync, &models, &thetas, &t, &prior, &mut replication_rng(5, 1, i), 100_000).unwrap();
            let b = run_composite_replication(ProcedureKind::DecentralizedSprt, &models, &thetas, &t, &prior, &mut replication_rng(5, 1, i), 100_000).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn composite_runs_reach_decisions() {
        let models = [model(); 4];
        let thetas = [0.7, 0.5, -0.3, -0.1];
        let t = Thresholds::new(4.0, 4.0, 4.0 + 3f64.ln(), 4.0 + 2f64.ln()).unwrap();
        let prior = PriorBounds::new(1, 2, 4).unwrap();
        for kind in ProcedureKind::ALL {
            let rec = run_composite_replication(kind, &models, &thetas, &t, &prior, &mut replication_rng(9, 9, 0), 1_000_000).unwrap();
            assert!(rec.is_complete());
        }
        let err = run_composite_replication(ProcedureKind::Synchronous, &models, &thetas, &t, &prior, &mut replication_rng(9, 9, 0), 2);
        assert!(matches!(err, Err(Error::HorizonExhausted { .. })));
        assert!(run_composite_replication(ProcedureKind::Synchronous, &models, &[0.1, 0.5, -0.3, -0.1], &t, &prior, &mut replication_rng(9, 9, 0), 10).is_err());
    }

    #[test]
    fn martingale_mean_is_one() {
        // narrow intervals keep the plug-in ratio light-tailed at n = 20
        let narrow = CompositeGaussianModel::new(iv(-0.1, 0.0), iv(0.4, 0.5)).unwrap();
        let settings = McSettings::new(20_000, 17, 100).unwrap();
        for theta in [-0.1, -0.05, 0.0, 0.4, 0.45, 0.5] {
            let means = martingale_means(&narrow, theta, &[1, 5, 20], &settings, 0).unwrap();
            for (m, se) in means {
                assert!((m - 1.0).abs() <= 4.0 * se, "θ={theta}: {m} ± {se}");
            }
        }
    }

    #[test]
    fn separations() {
        let m = model();
        assert!((m.separation(0.8).unwrap() - 0.32).abs() < 1e-15);
        assert!((m.separation(-0.2).unwrap() - 0.125).abs() < 1e-15);
    }
}
