//! Blind estimation of the channel gain from past outputs, the Cramér–Rao
//! bound, and expected regret under an estimated gain.
//!
//! Monte Carlo trial `t` draws its outputs from substream `t` of the seed
//! (see [`crate::model::stream_rng`]). Trials run on the rayon pool and are
//! reduced in trial order, so results do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::information::fisher_y;
use crate::model::{ChannelModel, InputDistribution};
use crate::numerics::{minimize_scalar, Estimate, MeanAccumulator, QuadratureSpec};
use crate::posterior::MseMethod;
use crate::regret::{absolute_regret, lemma1_weight, regret_scalar, relative_regret, MIN_FISHER_Y};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Inverts `E[Y²] = a²σx² + σv²`.
    MomentMatching,
    /// Maximises the output log-likelihood over `a > 0`.
    NumericalMle,
}

/// Grid points used to locate the likelihood peak before the Brent polish.
const MLE_SCAN_POINTS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainEstimator {
    pub kind: EstimatorKind,
    /// MLE search interval. Defaults to `(1e-3, 1e3)` times the root-mean-square
    /// gain `√(mean(Y²)/E[X²])`.
    #[serde(default)]
    pub bracket: Option<(f64, f64)>,
    /// Relative tolerance on the estimate.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-8
}

impl GainEstimator {
    pub fn moment_matching() -> Self {
        Self {
            kind: EstimatorKind::MomentMatching,
            bracket: None,
            tol: default_tol(),
        }
    }

    pub fn mle() -> Self {
        Self {
            kind: EstimatorKind::NumericalMle,
            bracket: None,
            tol: default_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "estimator tol must be > 0, got {}",
                self.tol
            )));
        }
        if let Some((lo, hi)) = self.bracket {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(Error::BadBracket { lo, hi });
            }
        }
        Ok(())
    }
}

/// Estimates the gain from outputs `ys` of a channel with known prior and
/// noise variance.
pub fn estimate_gain(
    est: &GainEstimator,
    prior: &InputDistribution,
    noise_var: f64,
    ys: &[f64],
) -> Result<f64> {
    est.validate()?;
    if ys.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 outputs, got {}",
            ys.len()
        )));
    }
    if let Some(&bad) = ys.iter().find(|y| !y.is_finite()) {
        return Err(Error::NonFinite { x: bad });
    }
    let mean_sq = ys.iter().map(|y| y * y).sum::<f64>() / ys.len() as f64;
    match est.kind {
        EstimatorKind::MomentMatching => {
            prior.require_zero_mean()?;
            let excess = mean_sq - noise_var;
            if excess <= 0.0 {
                return Err(Error::DegenerateSample { clamped: 0.0 });
            }
            Ok((excess / prior.second_moment()).sqrt())
        }
        EstimatorKind::NumericalMle => {
            let template = ChannelModel::new(1.0, noise_var, prior.clone())?;
            let (lo, hi) = est.bracket.unwrap_or_else(|| {
                let a_ref = (mean_sq / prior.second_moment()).sqrt();
                (1e-3 * a_ref, 1e3 * a_ref)
            });
            let nll = |t: f64| {
                let ch = template.with_gain(t.exp()).expect("positive gain");
                -ys.iter().map(|&y| ch.marginal_log_closed(y)).sum::<f64>()
            };
            let (llo, lhi) = (lo.ln(), hi.ln());
            // Coarse scan, then Brent on the cell pair around the best point.
            let step = (lhi - llo) / (MLE_SCAN_POINTS - 1) as f64;
            let best = (0..MLE_SCAN_POINTS)
                .map(|i| (i, nll(llo + i as f64 * step)))
                .min_by(|p, q| p.1.total_cmp(&q.1))
                .map(|(i, _)| i)
                .expect("non-empty scan");
            let sub_lo = llo + best.saturating_sub(1) as f64 * step;
            let sub_hi = llo + (best + 1).min(MLE_SCAN_POINTS - 1) as f64 * step;
            let (t, _) = minimize_scalar(nll, sub_lo, sub_hi, est.tol)?;
            let edge = 10.0 * est.tol + 1e-12;
            if t - llo <= edge || lhi - t <= edge {
                return Err(Error::MinimumAtBoundary {
                    at: t.exp(),
                    lo,
                    hi,
                });
            }
            Ok(t.exp())
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "n must be at least 2, got {n}"
        )));
    }
    Ok(())
}

fn fisher_y_checked(ch: &ChannelModel, quad: &QuadratureSpec) -> Result<f64> {
    let fy = fisher_y(ch, quad)?;
    if fy < MIN_FISHER_Y {
        return Err(Error::DegenerateFisher(fy));
    }
    Ok(fy)
}

/// `1/((n−1)·I(Y;a))`, the variance floor for unbiased estimators built from
/// `n−1` outputs.
pub fn crb(ch: &ChannelModel, n: usize, quad: &QuadratureSpec) -> Result<f64> {
    check_n(n)?;
    Ok(1.0 / ((n - 1) as f64 * fisher_y_checked(ch, quad)?))
}

/// `E[(6σx² + 8Y²/a²)·I(X;a‖Y)] / ((n−1)·I(Y;a))`: expected absolute regret
/// under an efficient estimator, to leading order.
pub fn lemma2_bound_rhs(ch: &ChannelModel, n: usize, quad: &QuadratureSpec) -> Result<f64> {
    Ok(lemma1_weight(ch, quad)? * crb(ch, n, quad)?)
}

/// `ρ(a)/(n−1)`: expected relative regret under an efficient estimator, to
/// leading order.
pub fn lemma4_rregret_bound_rhs(ch: &ChannelModel, n: usize, quad: &QuadratureSpec) -> Result<f64> {
    check_n(n)?;
    Ok(regret_scalar(ch, quad)? / (n - 1) as f64)
}

/// Whether a trial failure is a property of the sample (counted) rather
/// than of the configuration (propagated).
fn is_sample_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::DegenerateSample { .. } | Error::MinimumAtBoundary { .. }
    )
}

/// Gain estimates from `trials` independent samples of `n−1` outputs, in
/// trial order. `None` marks a trial whose sample defeated the estimator.
pub fn gain_estimates(
    ch: &ChannelModel,
    est: &GainEstimator,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    check_n(n)?;
    est.validate()?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let batch = ch.sample_stream(n - 1, seed, t)?;
            match estimate_gain(est, ch.input(), ch.noise_var(), &batch.ys) {
                Ok(a) => Ok(Some(a)),
                Err(e) if is_sample_failure(&e) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Monte Carlo expected regret under an estimated gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRegret {
    pub abs: Estimate,
    pub rel: Estimate,
    pub trials: usize,
    /// Trials excluded because the estimator failed on their sample.
    pub failed_trials: usize,
}

/// Draws `n−1` outputs per trial, estimates `â`, and averages the
/// quadrature absolute and relative regret at that `â`.
pub fn expected_regret_mc(
    ch: &ChannelModel,
    est: &GainEstimator,
    n: usize,
    trials: usize,
    seed: u64,
    quad: &QuadratureSpec,
) -> Result<ExpectedRegret> {
    let estimates = gain_estimates(ch, est, n, trials, seed)?;
    expected_regret_from(ch, &estimates, quad)
}

/// Averages the quadrature regrets over per-trial estimates as returned by
/// [`gain_estimates`]; failed trials are excluded and counted.
pub fn expected_regret_from(
    ch: &ChannelModel,
    estimates: &[Option<f64>],
    quad: &QuadratureSpec,
) -> Result<ExpectedRegret> {
    let trials = estimates.len();
    let per_trial: Vec<Option<(f64, f64)>> = estimates
        .par_iter()
        .map(|a_hat| match a_hat {
            Some(a_hat) => {
                let abs = absolute_regret(ch, *a_hat, &MseMethod::Quadrature(*quad))?.value;
                Ok(Some((abs, relative_regret(ch, *a_hat, quad)?)))
            }
            None => Ok(None),
        })
        .collect::<Result<_>>()?;
    let (mut abs, mut rel) = (MeanAccumulator::default(), MeanAccumulator::default());
    for (r_abs, r_rel) in per_trial.iter().flatten() {
        abs.push(*r_abs);
        rel.push(*r_rel);
    }
    let failed_trials = trials - abs.count() as usize;
    if abs.count() == 0 {
        return Err(Error::InvalidArgument(format!(
            "all {trials} trials failed"
        )));
    }
    Ok(ExpectedRegret {
        abs: abs.estimate(),
        rel: rel.estimate(),
        trials,
        failed_trials,
    })
}

/// Sampling behaviour of a gain estimator against the Cramér–Rao bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub n: usize,
    pub trials: usize,
    pub failed_trials: usize,
    pub mean_estimate: f64,
    pub empirical_bias: f64,
    /// Standard error of the bias, `√(var/trials)`.
    pub bias_stderr: f64,
    pub empirical_var: f64,
    pub crb: f64,
    /// `crb / empirical_var`.
    pub efficiency_ratio: f64,
}

pub fn efficiency(
    ch: &ChannelModel,
    est: &GainEstimator,
    n: usize,
    trials: usize,
    seed: u64,
    quad: &QuadratureSpec,
) -> Result<EfficiencyReport> {
    let estimates = gain_estimates(ch, est, n, trials, seed)?;
    efficiency_from(ch, &estimates, n, quad)
}

/// Efficiency summary of per-trial estimates from samples of `n−1` outputs.
pub fn efficiency_from(
    ch: &ChannelModel,
    estimates: &[Option<f64>],
    n: usize,
    quad: &QuadratureSpec,
) -> Result<EfficiencyReport> {
    let trials = estimates.len();
    let bound = crb(ch, n, quad)?;
    let mut acc = MeanAccumulator::default();
    for a_hat in estimates.iter().flatten() {
        acc.push(*a_hat);
    }
    if acc.count() < 2 {
        return Err(Error::InvalidArgument(format!(
            "{} of {trials} trials succeeded; need 2",
            acc.count()
        )));
    }
    let var = acc.variance();
    Ok(EfficiencyReport {
        n,
        trials,
        failed_trials: trials - acc.count() as usize,
        mean_estimate: acc.mean(),
        empirical_bias: acc.mean() - ch.gain(),
        bias_stderr: (var / acc.count() as f64).sqrt(),
        empirical_var: var,
        crb: bound,
        efficiency_ratio: bound / var,
    })
}
