//! Oracle and mismatched MMSE estimators and posterior moments.
//!
//! The generic path discretises the posterior of `X` given `Y = y` into a
//! weighted node set (see [`Posterior`]) and takes every expectation on those
//! nodes. [`exact_moments`] is an independent closed-form path for the three
//! prior families (conjugate updates per Gaussian component, exact sums for
//! atoms), used by the Monte Carlo estimators where millions of posterior
//! evaluations are needed.

pub mod gaussian;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_gain, ChannelModel, PriorPiece};
use crate::numerics::{
    ln_normal_pdf, normalize_log_weights, Estimate, MeanAccumulator, QuadratureSpec,
};

/// Posterior of `X` given `Y = y` under the channel's gain, discretised on
/// quadrature nodes (continuous pieces) and atoms (discrete pieces).
#[derive(Debug, Clone)]
pub struct Posterior {
    y: f64,
    gain: f64,
    xs: Vec<f64>,
    weights: Vec<f64>,
    log_marginal: f64,
}

impl Posterior {
    pub fn new(ch: &ChannelModel, y: f64, quad: &QuadratureSpec) -> Result<Self> {
        if !y.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "observation {y} is not finite"
            )));
        }
        let nodes = ch.joint_nodes(y, quad)?;
        let lw: Vec<f64> = nodes.iter().map(|n| n.ln_w).collect();
        let (log_marginal, weights) = normalize_log_weights(&lw);
        if !log_marginal.is_finite() {
            return Err(Error::NonFinite { x: y });
        }
        Ok(Self {
            y,
            gain: ch.gain(),
            xs: nodes.iter().map(|n| n.x).collect(),
            weights,
            log_marginal,
        })
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// `ln f(y)`, the normaliser of the posterior.
    pub fn log_marginal(&self) -> f64 {
        self.log_marginal
    }

    /// `E[h(X) | Y = y]`.
    pub fn expect<F: Fn(f64) -> f64>(&self, h: F) -> f64 {
        self.xs
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * h(x))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn second_moment(&self) -> f64 {
        self.expect(|x| x * x)
    }

    /// Nodes and normalised weights.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn summary(&self) -> PosteriorSummary {
        PosteriorSummary {
            y: self.y,
            gain_used: self.gain,
            mean: self.mean(),
            second_moment: self.second_moment(),
            log_marginal: self.log_marginal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub y: f64,
    pub gain_used: f64,
    pub mean: f64,
    pub second_moment: f64,
    pub log_marginal: f64,
}

/// `φ_a(y) = E[X | Y = y]`.
pub fn posterior_mean(ch: &ChannelModel, y: f64, quad: &QuadratureSpec) -> Result<f64> {
    Ok(Posterior::new(ch, y, quad)?.mean())
}

/// `E[X² | Y = y]`.
pub fn posterior_second_moment(ch: &ChannelModel, y: f64, quad: &QuadratureSpec) -> Result<f64> {
    Ok(Posterior::new(ch, y, quad)?.second_moment())
}

pub fn posterior_summary(
    ch: &ChannelModel,
    y: f64,
    quad: &QuadratureSpec,
) -> Result<PosteriorSummary> {
    Ok(Posterior::new(ch, y, quad)?.summary())
}

/// `φ_â(y)`: the posterior mean under gain `a_hat`, same prior and noise.
pub fn mismatched_estimate(
    ch_true: &ChannelModel,
    a_hat: f64,
    y: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    posterior_mean(&ch_true.with_gain(a_hat)?, y, quad)
}

/// Closed-form posterior moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactMoments {
    pub log_marginal: f64,
    pub mean: f64,
    pub second_moment: f64,
}

/// Posterior moments by conjugate update per Gaussian prior component and
/// exact Bayes rule over atoms. Exact for every supported prior.
pub fn exact_moments(ch: &ChannelModel, y: f64) -> ExactMoments {
    let a = ch.gain();
    let sv2 = ch.noise_var();
    let pieces = ch.input().pieces();
    let mut lw = Vec::with_capacity(pieces.len());
    let mut moments = Vec::with_capacity(pieces.len());
    for p in pieces {
        match p {
            PriorPiece::Normal { ln_w, mean, var } => {
                let c = a * a * var + sv2;
                lw.push(ln_w + ln_normal_pdf(y, a * mean, c));
                let m = mean + a * var * (y - a * mean) / c;
                moments.push((m, var * sv2 / c + m * m));
            }
            PriorPiece::Point { ln_w, x } => {
                lw.push(ln_w + ch.likelihood_log(y, x));
                moments.push((x, x * x));
            }
        }
    }
    let (log_marginal, ws) = normalize_log_weights(&lw);
    let (mut mean, mut second_moment) = (0.0, 0.0);
    for (w, (m1, m2)) in ws.iter().zip(moments) {
        mean += w * m1;
        second_moment += w * m2;
    }
    ExactMoments {
        log_marginal,
        mean,
        second_moment,
    }
}

/// How [`mse`] evaluates its expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MseMethod {
    Quadrature(QuadratureSpec),
    /// `n` seeded draws from the true channel, exact posterior means.
    MonteCarlo {
        n: usize,
        seed: u64,
    },
}

/// `E[(X − φ_g(Y))²]` under the true channel `ch`, for the estimator tuned to
/// gain `g = estimator_gain`.
pub fn mse(ch: &ChannelModel, estimator_gain: f64, method: &MseMethod) -> Result<Estimate> {
    validate_gain(estimator_gain)?;
    let tuned = ch.with_gain(estimator_gain)?;
    match method {
        MseMethod::Quadrature(quad) => {
            let v = ch.output_expectation(
                |y| {
                    let truth = Posterior::new(ch, y, quad)?;
                    let phi_a = truth.mean();
                    let phi_g = if estimator_gain == ch.gain() {
                        phi_a
                    } else {
                        posterior_mean(&tuned, y, quad)?
                    };
                    Ok(truth.second_moment() - 2.0 * phi_g * phi_a + phi_g * phi_g)
                },
                quad,
            )?;
            Ok(Estimate::exact(v))
        }
        MseMethod::MonteCarlo { n, seed } => {
            let batch = ch.sample(*n, *seed)?;
            let mut acc = MeanAccumulator::default();
            for (&x, &y) in batch.xs.iter().zip(&batch.ys) {
                let e = x - exact_moments(&tuned, y).mean;
                acc.push(e * e);
            }
            Ok(acc.estimate())
        }
    }
}
