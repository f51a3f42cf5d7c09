//! Absolute and relative regret of the mismatched estimator, their
//! small-deviation bounds, and the regret scalar.
//!
//! The small-deviation bounds hold up to an unspecified `o((â−a)²)`
//! remainder. Checks against them allow a relative slack of
//! `SLACK_COEFFICIENT·|â−a|/a` and are only meaningful for deviations of a
//! percent or less. The pointwise bounds are exact and are checked with a
//! fixed additive tolerance only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::information::{fisher_x_given_y_at, fisher_x_given_y_avg, fisher_y, kl_posteriors};
use crate::model::{validate_gain, ChannelModel};
use crate::numerics::{Estimate, MeanAccumulator, QuadratureSpec};
use crate::posterior::{exact_moments, mse, MseMethod, Posterior};

/// Coefficient `c` of the relative slack `c·|â−a|/a`.
pub const SLACK_COEFFICIENT: f64 = 1.0;

/// Additive tolerance for the exact pointwise regret bound.
pub const POINTWISE_TOL: f64 = 1e-9;

/// Additive tolerance for the conditional second-moment bound.
pub const SECOND_MOMENT_TOL: f64 = 1e-7;

/// Below this `I(Y;a)` the regret scalar is reported as degenerate.
pub const MIN_FISHER_Y: f64 = 1e-12;

/// Relative allowance for the `o((â−a)²)` remainder.
pub fn slack(a: f64, a_hat: f64) -> f64 {
    SLACK_COEFFICIENT * (a_hat - a).abs() / a
}

/// `(φ_a, φ_â, E_a[X²|y], E_â[X²|y])` at one output.
fn pointwise_moments(
    ch: &ChannelModel,
    tuned: &ChannelModel,
    y: f64,
    quad: &QuadratureSpec,
) -> Result<[f64; 4]> {
    let p = Posterior::new(ch, y, quad)?;
    let q = Posterior::new(tuned, y, quad)?;
    Ok([p.mean(), q.mean(), p.second_moment(), q.second_moment()])
}

/// `R(â, a) = E[(φ_â(Y) − φ_a(Y))²]` under the true channel.
///
/// Quadrature returns an exact-valued [`Estimate`]; Monte Carlo uses exact
/// posterior means on seeded draws and reports a standard error.
pub fn absolute_regret(ch: &ChannelModel, a_hat: f64, method: &MseMethod) -> Result<Estimate> {
    let tuned = ch.with_gain(a_hat)?;
    if a_hat == ch.gain() {
        return Ok(Estimate::exact(0.0));
    }
    match method {
        MseMethod::Quadrature(quad) => {
            let v = ch.output_expectation(
                |y| {
                    let [pa, ph, ..] = pointwise_moments(ch, &tuned, y, quad)?;
                    Ok((ph - pa).powi(2))
                },
                quad,
            )?;
            Ok(Estimate::exact(v))
        }
        MseMethod::MonteCarlo { n, seed } => {
            let batch = ch.sample(*n, *seed)?;
            let mut acc = MeanAccumulator::default();
            for &y in &batch.ys {
                acc.push((exact_moments(&tuned, y).mean - exact_moments(ch, y).mean).powi(2));
            }
            Ok(acc.estimate())
        }
    }
}

/// `MSE(â) − MSE(a)`. Under Monte Carlo the two MSEs share their draws, so
/// the standard error is that of the paired difference.
pub fn mse_difference(ch: &ChannelModel, a_hat: f64, method: &MseMethod) -> Result<Estimate> {
    let tuned = ch.with_gain(a_hat)?;
    match method {
        MseMethod::Quadrature(_) => {
            let d = mse(ch, a_hat, method)?.value - mse(ch, ch.gain(), method)?.value;
            Ok(Estimate::exact(d))
        }
        MseMethod::MonteCarlo { n, seed } => {
            let batch = ch.sample(*n, *seed)?;
            let mut acc = MeanAccumulator::default();
            for (&x, &y) in batch.xs.iter().zip(&batch.ys) {
                let eh = x - exact_moments(&tuned, y).mean;
                let ea = x - exact_moments(ch, y).mean;
                acc.push(eh * eh - ea * ea);
            }
            Ok(acc.estimate())
        }
    }
}

/// Monte Carlo excess MSE against the quadrature regret.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityCheck {
    pub mse_difference: f64,
    pub regret: f64,
    pub residual: f64,
    pub stderr: f64,
    /// `|residual| ≤ 3·stderr` plus the quadrature tolerance on the regret.
    pub consistent: bool,
}

/// Compares the Monte Carlo `MSE(â) − MSE(a)` on `n` draws with the
/// quadrature value of `E[(φ_â − φ_a)²]`; they agree in expectation because
/// the matched error is orthogonal to every function of `Y`.
pub fn orthogonality_check(
    ch: &ChannelModel,
    a_hat: f64,
    n: usize,
    seed: u64,
    quad: &QuadratureSpec,
) -> Result<OrthogonalityCheck> {
    let diff = mse_difference(ch, a_hat, &MseMethod::MonteCarlo { n, seed })?;
    let regret = absolute_regret(ch, a_hat, &MseMethod::Quadrature(*quad))?.value;
    let residual = diff.value - regret;
    // Where both estimators agree on every draw the standard error is zero
    // and only the quadrature error is left.
    let quad_tol = quad.abs_tol.max(quad.rel_tol * regret);
    Ok(OrthogonalityCheck {
        mse_difference: diff.value,
        regret,
        residual,
        stderr: diff.stderr,
        consistent: residual.abs() <= 3.0 * diff.stderr + quad_tol,
    })
}

/// `R̄(â, a) = E[(φ_â − φ_a)² / (E_â[X²|Y] + E_a[X²|Y])]`.
pub fn relative_regret(ch: &ChannelModel, a_hat: f64, quad: &QuadratureSpec) -> Result<f64> {
    if ch.input().variance() <= 0.0 {
        return Err(Error::DegeneratePrior);
    }
    let tuned = ch.with_gain(a_hat)?;
    if a_hat == ch.gain() {
        return Ok(0.0);
    }
    ch.output_expectation(
        |y| {
            let [pa, ph, ma, mh] = pointwise_moments(ch, &tuned, y, quad)?;
            Ok((ph - pa).powi(2) / (ma + mh))
        },
        quad,
    )
}

/// `∂φ_a(y)/∂a`, the posterior covariance of `X` with the likelihood score.
pub fn estimator_gain_derivative(ch: &ChannelModel, y: f64, quad: &QuadratureSpec) -> Result<f64> {
    let p = Posterior::new(ch, y, quad)?;
    let m = p.mean();
    Ok(p.expect(|x| (x - m) * ch.likelihood_score(y, x)))
}

/// `E[(∂φ_a(Y)/∂a)²]`, the limit of `R(â, a)/(â−a)²` as `â → a`.
pub fn regret_curvature(ch: &ChannelModel, quad: &QuadratureSpec) -> Result<f64> {
    ch.output_expectation(
        |y| estimator_gain_derivative(ch, y, quad).map(|d| d * d),
        quad,
    )
}

/// `E[(6σx² + 8Y²/a²)·I(X;a‖Y)]`, with `σx²` taken as `E[X²]`.
pub fn lemma1_weight(ch: &ChannelModel, quad: &QuadratureSpec) -> Result<f64> {
    let s2 = ch.input().second_moment();
    let a2 = ch.gain() * ch.gain();
    ch.output_expectation(
        |y| Ok((6.0 * s2 + 8.0 * y * y / a2) * fisher_x_given_y_at(ch, y, quad)?),
        quad,
    )
}

/// Leading term `(â−a)²·E[(6σx² + 8Y²/a²)·I(X;a‖Y)]` of the absolute-regret bound.
pub fn lemma1_bound_rhs(ch: &ChannelModel, a_hat: f64, quad: &QuadratureSpec) -> Result<f64> {
    validate_gain(a_hat)?;
    if a_hat == ch.gain() {
        return Ok(0.0);
    }
    Ok((a_hat - ch.gain()).powi(2) * lemma1_weight(ch, quad)?)
}

/// `(â−a)²·(14σx² + 8σv²/a²)·I(X;a|Y)`, the bound above with `I(X;a‖Y)` and
/// `Y²` assumed uncorrelated; see [`fisher_y2_correlation`].
pub fn corollary1_bound_rhs(ch: &ChannelModel, a_hat: f64, quad: &QuadratureSpec) -> Result<f64> {
    validate_gain(a_hat)?;
    if a_hat == ch.gain() {
        return Ok(0.0);
    }
    let a2 = ch.gain() * ch.gain();
    let w = 14.0 * ch.input().second_moment() + 8.0 * ch.noise_var() / a2;
    Ok((a_hat - ch.gain()).powi(2) * w * fisher_x_given_y_avg(ch, quad)?)
}

/// `(â−a)²·I(X;a|Y)`, the leading term of the relative-regret bound.
pub fn lemma3_bound_rhs(ch: &ChannelModel, a_hat: f64, quad: &QuadratureSpec) -> Result<f64> {
    validate_gain(a_hat)?;
    if a_hat == ch.gain() {
        return Ok(0.0);
    }
    Ok((a_hat - ch.gain()).powi(2) * fisher_x_given_y_avg(ch, quad)?)
}

/// `E[2(6σx² + 4Y²/â² + 4Y²/a²)·D(P_{â|Y} ‖ P_{a|Y})]`: the absolute-regret
/// bound before the small-deviation expansion. It holds at every `â`, and
/// its leading term is [`lemma1_bound_rhs`].
pub fn nonasymptotic_bound_rhs(
    ch: &ChannelModel,
    a_hat: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    validate_gain(a_hat)?;
    if a_hat == ch.gain() {
        return Ok(0.0);
    }
    let s2 = ch.input().second_moment();
    let (ia2, ih2) = (ch.gain().powi(-2), a_hat.powi(-2));
    ch.output_expectation(
        |y| {
            let w = 2.0 * (6.0 * s2 + 4.0 * y * y * (ih2 + ia2));
            Ok(w * kl_posteriors(ch, a_hat, y, quad)?)
        },
        quad,
    )
}

/// `E[2·D(P_{â|Y} ‖ P_{a|Y})]`, an exact bound on the relative regret.
pub fn relative_nonasymptotic_bound_rhs(
    ch: &ChannelModel,
    a_hat: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    validate_gain(a_hat)?;
    ch.output_expectation(|y| Ok(2.0 * kl_posteriors(ch, a_hat, y, quad)?), quad)
}

/// Pearson correlation of `I(X;a‖Y)` and `Y²` under the output law.
pub fn fisher_y2_correlation(ch: &ChannelModel, quad: &QuadratureSpec) -> Result<f64> {
    let i = |y: f64| fisher_x_given_y_at(ch, y, quad);
    let ei = ch.output_expectation(i, quad)?;
    let ei2 = ch.output_expectation(|y| i(y).map(|v| v * v), quad)?;
    let ey2 = ch.output_expectation(|y| Ok(y * y), quad)?;
    let ey4 = ch.output_expectation(|y| Ok(y.powi(4)), quad)?;
    let eiy2 = ch.output_expectation(|y| i(y).map(|v| v * y * y), quad)?;
    let var_i = ei2 - ei * ei;
    // A constant I(X;a‖Y) leaves only rounding noise in its variance.
    if var_i <= 1e-12 * ei * ei {
        return Ok(0.0);
    }
    let cov = eiy2 - ei * ey2;
    Ok(cov / (var_i * (ey4 - ey2 * ey2)).sqrt())
}

/// Both sides of a pointwise inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `(φ_â(y) − φ_a(y))² ≤ 2(E_â[X²|y] + E_a[X²|y])·D(P_{â|y} ‖ P_{a|y})`.
pub fn pointwise_bound_check(
    ch: &ChannelModel,
    a_hat: f64,
    y: f64,
    quad: &QuadratureSpec,
) -> Result<PointwiseCheck> {
    let tuned = ch.with_gain(a_hat)?;
    let [pa, ph, ma, mh] = pointwise_moments(ch, &tuned, y, quad)?;
    let lhs = (ph - pa).powi(2);
    let rhs = 2.0 * (ma + mh) * kl_posteriors(ch, a_hat, y, quad)?;
    Ok(PointwiseCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + POINTWISE_TOL,
    })
}

/// `E_a[X²|y] ≤ 3σx² + 4y²/a²`, with `σx²` taken as `E[X²]`.
pub fn second_moment_bound_check(
    ch: &ChannelModel,
    y: f64,
    quad: &QuadratureSpec,
) -> Result<PointwiseCheck> {
    let lhs = Posterior::new(ch, y, quad)?.second_moment();
    let rhs = 3.0 * ch.input().second_moment() + 4.0 * y * y / (ch.gain() * ch.gain());
    Ok(PointwiseCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + SECOND_MOMENT_TOL,
    })
}

/// `ρ(a) = I(X;a|Y) / I(Y;a)`.
pub fn regret_scalar(ch: &ChannelModel, quad: &QuadratureSpec) -> Result<f64> {
    let fy = fisher_y(ch, quad)?;
    if fy < MIN_FISHER_Y {
        return Err(Error::DegenerateFisher(fy));
    }
    Ok(fisher_x_given_y_avg(ch, quad)? / fy)
}

/// The trade-off `(ρ(a)+1)·I(Y;a) = σx²/σv²` at one gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffReport {
    pub a: f64,
    pub rho: f64,
    pub fisher_y: f64,
    pub snr: f64,
    /// `(ρ+1)·I(Y;a) − σx²/σv²`.
    pub residual: f64,
}

/// Evaluates the trade-off with both Fisher quantities by quadrature.
pub fn tradeoff_residual(ch: &ChannelModel, quad: &QuadratureSpec) -> Result<TradeoffReport> {
    ch.input().require_zero_mean()?;
    let fy = fisher_y(ch, quad)?;
    if fy < MIN_FISHER_Y {
        return Err(Error::DegenerateFisher(fy));
    }
    let rho = fisher_x_given_y_avg(ch, quad)? / fy;
    let snr = ch.snr();
    Ok(TradeoffReport {
        a: ch.gain(),
        rho,
        fisher_y: fy,
        snr,
        residual: (rho + 1.0) * fy - snr,
    })
}

/// Regret, bounds and checks for one `(a, â)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub a: f64,
    pub a_hat: f64,
    pub regret_abs: f64,
    pub regret_rel: f64,
    pub lemma1_rhs: f64,
    pub corollary1_rhs: f64,
    pub lemma3_rhs: f64,
    /// Bound before the small-deviation expansion; holds at every `â`.
    pub nonasymptotic_rhs: f64,
    /// Correlation of `I(X;a‖Y)` with `Y²`; the covariance-free trade-off bound assumes zero.
    pub fisher_y2_corr: f64,
    pub slack: f64,
    pub lemma1_holds: bool,
    pub lemma3_holds: bool,
    pub nonasymptotic_holds: bool,
    /// Output points at which the exact pointwise bound failed.
    pub pointwise_checks: usize,
}

pub fn regret_report(
    ch: &ChannelModel,
    a_hat: f64,
    quad: &QuadratureSpec,
    y_grid: &[f64],
) -> Result<RegretReport> {
    let method = MseMethod::Quadrature(*quad);
    let regret_abs = absolute_regret(ch, a_hat, &method)?.value;
    let regret_rel = relative_regret(ch, a_hat, quad)?;
    let d2 = (a_hat - ch.gain()).powi(2);
    let lemma1_rhs = d2 * lemma1_weight(ch, quad)?;
    let corollary1_rhs = corollary1_bound_rhs(ch, a_hat, quad)?;
    let lemma3_rhs = lemma3_bound_rhs(ch, a_hat, quad)?;
    let nonasymptotic_rhs = nonasymptotic_bound_rhs(ch, a_hat, quad)?;
    let s = slack(ch.gain(), a_hat);
    let mut violations = 0;
    for &y in y_grid {
        if !pointwise_bound_check(ch, a_hat, y, quad)?.holds {
            violations += 1;
        }
    }
    Ok(RegretReport {
        a: ch.gain(),
        a_hat,
        regret_abs,
        regret_rel,
        lemma1_rhs,
        corollary1_rhs,
        lemma3_rhs,
        nonasymptotic_rhs,
        fisher_y2_corr: fisher_y2_correlation(ch, quad)?,
        slack: s,
        lemma1_holds: regret_abs <= lemma1_rhs * (1.0 + s),
        lemma3_holds: regret_rel <= lemma3_rhs * (1.0 + s),
        nonasymptotic_holds: regret_abs <= nonasymptotic_rhs * (1.0 + 1e-9) + 1e-15,
        pointwise_checks: violations,
    })
}
