//! Fisher informations with respect to the channel gain, and divergences
//! between the matched and mismatched posteriors.
//!
//! Scores are analytic. The gain score of the likelihood is
//! `x(y − ax)/σv²`; the marginal score is its posterior mean, and the
//! posterior score is the difference of the two. No derivative is ever
//! taken through a quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ChannelModel;
use crate::numerics::QuadratureSpec;
use crate::posterior::Posterior;

/// `∂/∂a ln f_a(y)` given the posterior at `y`.
pub(crate) fn marginal_score_from(ch: &ChannelModel, post: &Posterior) -> f64 {
    let y = post.y();
    post.expect(|x| ch.likelihood_score(y, x))
}

/// `I(X;a‖Y=y)` given the posterior at `y`.
pub(crate) fn fisher_x_given_y_from(ch: &ChannelModel, post: &Posterior) -> f64 {
    let y = post.y();
    let s = marginal_score_from(ch, post);
    post.expect(|x| {
        let d = ch.likelihood_score(y, x) - s;
        d * d
    })
}

/// Output score `∂/∂a ln f_a(y)`.
pub fn marginal_score(ch: &ChannelModel, y: f64, quad: &QuadratureSpec) -> Result<f64> {
    Ok(marginal_score_from(ch, &Posterior::new(ch, y, quad)?))
}

/// Posterior score `∂/∂a ln f_a(x | y)`.
pub fn score_x_given_y(ch: &ChannelModel, x: f64, y: f64, quad: &QuadratureSpec) -> Result<f64> {
    Ok(ch.likelihood_score(y, x) - marginal_score(ch, y, quad)?)
}

/// `I(X;a‖Y=y) = E[(∂/∂a ln f_a(X|Y))² | Y = y]`.
pub fn fisher_x_given_y_at(ch: &ChannelModel, y: f64, quad: &QuadratureSpec) -> Result<f64> {
    Ok(fisher_x_given_y_from(ch, &Posterior::new(ch, y, quad)?))
}

/// `I(X;a|Y)`, the average of [`fisher_x_given_y_at`] over the output.
pub fn fisher_x_given_y_avg(ch: &ChannelModel, quad: &QuadratureSpec) -> Result<f64> {
    ch.output_expectation(|y| fisher_x_given_y_at(ch, y, quad), quad)
}

/// `I(Y;a) = E[(∂/∂a ln f_a(Y))²]`.
pub fn fisher_y(ch: &ChannelModel, quad: &QuadratureSpec) -> Result<f64> {
    ch.output_expectation(|y| marginal_score(ch, y, quad).map(|s| s * s), quad)
}

/// `I(Y;a|X) = σx²/σv²`, stated for zero-mean inputs only.
pub fn fisher_y_given_x(ch: &ChannelModel) -> Result<f64> {
    ch.input().require_zero_mean()?;
    Ok(ch.input().second_moment() / ch.noise_var())
}

/// `I(Y;a|X)` from its definition, `E[(∂/∂a ln f_a(Y|X))²]`, by quadrature
/// over the output and the posterior. Valid for any prior.
pub fn fisher_y_given_x_quadrature(ch: &ChannelModel, quad: &QuadratureSpec) -> Result<f64> {
    ch.output_expectation(
        |y| {
            let post = Posterior::new(ch, y, quad)?;
            Ok(post.expect(|x| ch.likelihood_score(y, x).powi(2)))
        },
        quad,
    )
}

/// Gain-score log-likelihood ratio pieces shared by the two divergences:
/// the mismatched posterior, and `ln f_â(y) − ln f_a(y)`.
fn mismatch_setup(
    ch: &ChannelModel,
    a_hat: f64,
    y: f64,
    quad: &QuadratureSpec,
) -> Result<(ChannelModel, Posterior, f64)> {
    let tuned = ch.with_gain(a_hat)?;
    let post_hat = Posterior::new(&tuned, y, quad)?;
    let delta_log_marginal = post_hat.log_marginal() - ch.marginal_log(y, quad)?;
    Ok((tuned, post_hat, delta_log_marginal))
}

/// `D(P_{â|y} ‖ P_{a|y})`.
///
/// Both log-densities are evaluated on the nodes of the mismatched posterior;
/// the prior cancels in the ratio, leaving the likelihood ratio and the two
/// normalisers.
pub fn kl_posteriors(ch: &ChannelModel, a_hat: f64, y: f64, quad: &QuadratureSpec) -> Result<f64> {
    if a_hat == ch.gain() {
        crate::model::validate_gain(a_hat)?;
        return Ok(0.0);
    }
    let (tuned, post_hat, dlm) = mismatch_setup(ch, a_hat, y, quad)?;
    let e = post_hat.expect(|x| tuned.likelihood_log(y, x) - ch.likelihood_log(y, x));
    Ok((e - dlm).max(0.0))
}

/// Squared Kakutani–Hellinger distance `½∫(√p − √q)² = 1 − ∫√(pq)` between
/// the mismatched and matched posteriors. Always in `[0, 1]`.
pub fn hellinger_sq_posteriors(
    ch: &ChannelModel,
    a_hat: f64,
    y: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if a_hat == ch.gain() {
        crate::model::validate_gain(a_hat)?;
        return Ok(0.0);
    }
    let (tuned, post_hat, dlm) = mismatch_setup(ch, a_hat, y, quad)?;
    // √(p_a/p_â) = exp(½(Δ − r)), r the log-likelihood ratio.
    let r2 = -post_hat.expect(|x| {
        (0.5 * (dlm - (tuned.likelihood_log(y, x) - ch.likelihood_log(y, x)))).exp_m1()
    });
    Ok(r2.clamp(0.0, 1.0))
}

/// All Fisher quantities for one gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherReport {
    pub a: f64,
    pub fisher_x_given_y_avg: f64,
    pub fisher_y: f64,
    /// `E[X²]/σv²`; equals `σx²/σv²` for zero-mean inputs.
    pub fisher_y_given_x: f64,
    /// `I(X;a|Y) − (I(Y;a|X) − I(Y;a))`.
    pub chain_rule_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_y_samples: Option<Vec<(f64, f64)>>,
}

/// Builds a [`FisherReport`]; `y_grid`, when given, is sampled for
/// `(y, I(X;a‖Y=y))` pairs.
pub fn fisher_report(
    ch: &ChannelModel,
    quad: &QuadratureSpec,
    y_grid: Option<&[f64]>,
) -> Result<FisherReport> {
    let fx = fisher_x_given_y_avg(ch, quad)?;
    let fy = fisher_y(ch, quad)?;
    let fyx = ch.input().second_moment() / ch.noise_var();
    let per_y_samples = match y_grid {
        Some(ys) => Some(
            ys.iter()
                .map(|&y| fisher_x_given_y_at(ch, y, quad).map(|i| (y, i)))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    if !(fx.is_finite() && fy.is_finite()) {
        return Err(Error::NonFinite { x: ch.gain() });
    }
    Ok(FisherReport {
        a: ch.gain(),
        fisher_x_given_y_avg: fx,
        fisher_y: fy,
        fisher_y_given_x: fyx,
        chain_rule_residual: fx - (fyx - fy),
        per_y_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InputDistribution;
    use crate::numerics::fd_derivative;
    use crate::posterior::gaussian::GaussianClosedForm;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn gaussian(a: f64, sx2: f64, sv2: f64) -> ChannelModel {
        ChannelModel::new(a, sv2, InputDistribution::gaussian(0.0, sx2).unwrap()).unwrap()
    }

    fn binary(a: f64, sv2: f64) -> ChannelModel {
        ChannelModel::new(
            a,
            sv2,
            InputDistribution::discrete(&[(0.5, -1.0), (0.5, 1.0)]).unwrap(),
        )
        .unwrap()
    }

    fn q() -> QuadratureSpec {
        QuadratureSpec::gauss_hermite(128)
    }

    #[test]
    fn posterior_score_matches_finite_difference() {
        // Oracle: d/da [ln f_a(y|x) − ln f_a(y)] with the closed-form marginal.
        for ch in [gaussian(1.0, 1.0, 1.0), binary(0.8, 0.5)] {
            for (x, y) in [(1.0, 2.0), (-0.4, 0.3), (1.0, -1.5)] {
                let f = |a: f64| {
                    let c = ch.with_gain(a).unwrap();
                    c.likelihood_log(y, x) - c.marginal_log_closed(y)
                };
                let fd = fd_derivative(f, ch.gain(), 1e-5).unwrap();
                let an = score_x_given_y(&ch, x, y, &q()).unwrap();
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "{fd} vs {an}");
            }
        }
    }

    #[test]
    fn marginal_score_matches_gaussian_derivative() {
        let ch = gaussian(1.0, 1.0, 1.0);
        for y in [-3.0, 0.0, 0.7, 4.0] {
            let fd = fd_derivative(
                |a| ch.with_gain(a).unwrap().marginal_log_closed(y),
                1.0,
                1e-5,
            )
            .unwrap();
            let an = marginal_score(&ch, y, &q()).unwrap();
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0));
        }
    }

    #[test]
    fn posterior_score_has_zero_posterior_mean() {
        let mix = ChannelModel::new(
            1.3,
            1.0,
            InputDistribution::mixture(&[(0.5, -1.0, 0.5), (0.5, 1.0, 0.5)]).unwrap(),
        )
        .unwrap();
        for ch in [gaussian(0.5, 1.0, 1.0), binary(2.0, 1.0), mix] {
            for y in [-6.0, -1.0, 0.0, 2.5] {
                let post = Posterior::new(&ch, y, &q()).unwrap();
                let s = marginal_score_from(&ch, &post);
                let m = post.expect(|x| ch.likelihood_score(y, x) - s);
                assert_abs_diff_eq!(m, 0.0, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn output_score_has_zero_mean() {
        for ch in [gaussian(2.0, 1.0, 1.0), binary(0.7, 0.25)] {
            let m = ch
                .output_expectation(|y| marginal_score(&ch, y, &q()), &q())
                .unwrap();
            assert_abs_diff_eq!(m, 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn gaussian_fisher_values() {
        assert_abs_diff_eq!(
            fisher_y(&gaussian(1.0, 1.0, 1.0), &q()).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            fisher_x_given_y_avg(&gaussian(1.0, 1.0, 1.0), &q()).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            fisher_y(&gaussian(10f64.powf(-0.5), 1.0, 0.1), &q()).unwrap(),
            5.0,
            epsilon = 1e-10
        );
        assert!(fisher_y(&gaussian(1e-4, 1.0, 1.0), &q()).unwrap() < 1e-7);
    }

    #[test]
    fn gaussian_conditional_fisher_matches_closed_form() {
        let g = GaussianClosedForm::new(2.0, 0.5);
        for a in [0.2, 1.0, 5.0] {
            let ch = gaussian(a, 2.0, 0.5);
            for y in [-10.0, -1.0, 0.0, 3.0] {
                let got = fisher_x_given_y_at(&ch, y, &q()).unwrap();
                let want = g.fisher_x_given_y_at(a, y);
                assert!((got - want).abs() <= 1e-9 * want, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn binary_conditional_fisher_obeys_chain_rule() {
        let ch = binary(1.0, 1.0);
        let avg = fisher_x_given_y_avg(&ch, &q()).unwrap();
        let iy = fisher_y(&ch, &q()).unwrap();
        assert_abs_diff_eq!(avg, 1.0 - iy, epsilon = 1e-9);
        let simpson = fisher_y(&ch, &QuadratureSpec::adaptive_simpson()).unwrap();
        assert_abs_diff_eq!(iy, simpson, epsilon = 1e-8);
    }

    #[test]
    fn conditional_output_fisher() {
        assert_eq!(fisher_y_given_x(&gaussian(3.0, 1.0, 1.0)).unwrap(), 1.0);
        assert_eq!(fisher_y_given_x(&binary(1.0, 0.5)).unwrap(), 2.0);
        let ch = binary(0.7, 0.25);
        assert_eq!(fisher_y_given_x(&ch).unwrap(), ch.snr());
        let shifted =
            ChannelModel::new(1.0, 1.0, InputDistribution::gaussian(0.5, 1.0).unwrap()).unwrap();
        assert!(matches!(
            fisher_y_given_x(&shifted),
            Err(Error::NotZeroMean { .. })
        ));
        for ch in [gaussian(1.5, 1.0, 1.0), binary(0.7, 0.25)] {
            let quad = fisher_y_given_x_quadrature(&ch, &q()).unwrap();
            assert_abs_diff_eq!(quad, fisher_y_given_x(&ch).unwrap(), epsilon = 1e-6);
        }
    }

    #[test]
    fn kl_closed_form_and_expansion() {
        let ch = gaussian(1.0, 1.0, 1.0);
        let g = GaussianClosedForm::new(1.0, 1.0);
        assert_eq!(kl_posteriors(&ch, 1.0, 0.3, &q()).unwrap(), 0.0);
        let got = kl_posteriors(&ch, 1.1, 1.0, &q()).unwrap();
        let want = g.kl_posteriors(1.0, 1.1, 1.0);
        assert!((got - want).abs() <= 1e-10 * want);
        for y in [-2.0, 0.0, 1.5] {
            let i = fisher_x_given_y_at(&ch, y, &q()).unwrap();
            let d = 1e-3;
            let kl = kl_posteriors(&ch, 1.0 + d, y, &q()).unwrap();
            assert!((kl / (0.5 * d * d * i) - 1.0).abs() <= 0.01);
        }
    }

    #[test]
    fn hellinger_range_and_closed_form() {
        let ch = gaussian(1.0, 1.0, 1.0);
        let g = GaussianClosedForm::new(1.0, 1.0);
        assert_eq!(hellinger_sq_posteriors(&ch, 1.0, 0.0, &q()).unwrap(), 0.0);
        let got = hellinger_sq_posteriors(&ch, 1.4, 0.8, &q()).unwrap();
        assert_abs_diff_eq!(
            got,
            g.hellinger_sq_posteriors(1.0, 1.4, 0.8),
            epsilon = 1e-10
        );
        // Sharp, well-separated posteriors: distance close to one.
        let sharp = gaussian(1.0, 1.0, 0.01);
        let far = hellinger_sq_posteriors(&sharp, 10.0, 1.0, &q()).unwrap();
        let want = GaussianClosedForm::new(1.0, 0.01).hellinger_sq_posteriors(1.0, 10.0, 1.0);
        assert!(far > 0.9 && far <= 1.0, "{far}");
        assert_abs_diff_eq!(far, want, epsilon = 1e-8);
    }

    #[test]
    fn divergences_reject_bad_gain() {
        let ch = gaussian(1.0, 1.0, 1.0);
        assert!(matches!(
            kl_posteriors(&ch, -1.0, 0.0, &q()),
            Err(Error::InvalidGain(_))
        ));
        assert!(matches!(
            hellinger_sq_posteriors(&ch, 0.0, 0.0, &q()),
            Err(Error::InvalidGain(_))
        ));
    }

    #[test]
    fn report_chain_rule_on_asymmetric_prior() {
        let ch = ChannelModel::new(
            0.9,
            0.6,
            InputDistribution::discrete(&[(1.0 / 3.0, -2.0), (2.0 / 3.0, 1.0)]).unwrap(),
        )
        .unwrap();
        let r = fisher_report(&ch, &q(), Some(&[-1.0, 0.0, 1.0])).unwrap();
        assert!(r.chain_rule_residual.abs() <= 1e-7, "{r:?}");
        assert_eq!(r.per_y_samples.as_ref().unwrap().len(), 3);
        assert!(r.per_y_samples.unwrap().iter().all(|&(_, i)| i >= 0.0));
    }

    #[test]
    fn fisher_is_additive_over_iid_pairs() {
        // Two-sample product quadrature of the joint score, the score of each
        // sample taken by finite differences of the closed-form marginal.
        let ch = binary(0.9, 0.5);
        let score = |y: f64| {
            fd_derivative(
                |a| ch.with_gain(a).unwrap().marginal_log_closed(y),
                ch.gain(),
                1e-5,
            )
            .unwrap()
        };
        let rule = crate::numerics::HermiteRule::get(64);
        let mut pts = Vec::new();
        for (w, m, v) in ch.output_components() {
            for (t, lw) in rule.nodes.iter().zip(&rule.ln_weights) {
                let wt = w * lw.exp() / std::f64::consts::PI.sqrt();
                pts.push((wt, score(m + std::f64::consts::SQRT_2 * v.sqrt() * t)));
            }
        }
        let mut two = 0.0;
        for &(w1, s1) in &pts {
            for &(w2, s2) in &pts {
                two += w1 * w2 * (s1 + s2).powi(2);
            }
        }
        let one = fisher_y(&ch, &q()).unwrap();
        assert_abs_diff_eq!(two, 2.0 * one, epsilon = 1e-5);
    }

    proptest! {
        #[test]
        fn hellinger_below_half_kl(a in 0.2..5.0f64, ratio in 0.5..2.0f64, t in -5.0..5.0f64, sv2 in 0.2..2.0f64) {
            for ch in [gaussian(a, 1.0, sv2), binary(a, sv2)] {
                let y = t * ch.output_sd();
                let kl = kl_posteriors(&ch, a * ratio, y, &q()).unwrap();
                let h = hellinger_sq_posteriors(&ch, a * ratio, y, &q()).unwrap();
                prop_assert!(kl >= 0.0);
                prop_assert!((0.0..=1.0).contains(&h));
                prop_assert!(2.0 * h <= kl + 1e-9, "2r² = {} > KL = {}", 2.0 * h, kl);
            }
        }
    }
}
