//! Closed forms for a zero-mean Gaussian input, `X ~ N(0, σx²)`.
//!
//! Everything here is exact and independent of the quadrature machinery, so
//! the generic code paths can be diffed against it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelModel, InputDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianClosedForm {
    pub signal_var: f64,
    pub noise_var: f64,
}

impl GaussianClosedForm {
    pub fn new(signal_var: f64, noise_var: f64) -> Self {
        Self {
            signal_var,
            noise_var,
        }
    }

    /// Accepts only channels with a zero-mean Gaussian input.
    pub fn from_channel(ch: &ChannelModel) -> Result<Self> {
        match ch.input() {
            InputDistribution::Gaussian { mean, var } if *mean == 0.0 => {
                Ok(Self::new(*var, ch.noise_var()))
            }
            InputDistribution::Gaussian { mean, .. } => Err(Error::NotZeroMean { mean: *mean }),
            _ => Err(Error::InvalidPrior(
                "closed forms need a Gaussian input".into(),
            )),
        }
    }

    pub fn snr(&self) -> f64 {
        self.signal_var / self.noise_var
    }

    pub fn output_var(&self, a: f64) -> f64 {
        a * a * self.signal_var + self.noise_var
    }

    /// Slope `aσx²/(a²σx²+σv²)` of the linear MMSE estimator.
    pub fn estimator_slope(&self, a: f64) -> f64 {
        a * self.signal_var / self.output_var(a)
    }

    /// `d/da` of [`Self::estimator_slope`].
    pub fn estimator_slope_derivative(&self, a: f64) -> f64 {
        let c = self.output_var(a);
        self.signal_var * (self.noise_var - a * a * self.signal_var) / (c * c)
    }

    pub fn posterior_mean(&self, a: f64, y: f64) -> f64 {
        self.estimator_slope(a) * y
    }

    pub fn posterior_var(&self, a: f64) -> f64 {
        self.signal_var * self.noise_var / self.output_var(a)
    }

    pub fn posterior_second_moment(&self, a: f64, y: f64) -> f64 {
        let m = self.posterior_mean(a, y);
        self.posterior_var(a) + m * m
    }

    /// Matched MMSE, equal to the posterior variance.
    pub fn mmse(&self, a: f64) -> f64 {
        self.posterior_var(a)
    }

    /// `E[(φ_â(Y) − φ_a(Y))²]` under gain `a`.
    pub fn regret(&self, a: f64, a_hat: f64) -> f64 {
        let d = self.estimator_slope(a_hat) - self.estimator_slope(a);
        d * d * self.output_var(a)
    }

    /// MSE under gain `a` of the estimator tuned to `estimator_gain`.
    pub fn mse(&self, a: f64, estimator_gain: f64) -> f64 {
        self.mmse(a) + self.regret(a, estimator_gain)
    }

    pub fn fisher_y(&self, a: f64) -> f64 {
        let c = self.output_var(a);
        2.0 * a * a * self.signal_var * self.signal_var / (c * c)
    }

    pub fn fisher_y_given_x(&self) -> f64 {
        self.snr()
    }

    /// Posterior variance of `X(y − aX)/σv²` at `Y = y`.
    pub fn fisher_x_given_y_at(&self, a: f64, y: f64) -> f64 {
        let m = self.posterior_mean(a, y);
        let v = self.posterior_var(a);
        let r = y - 2.0 * a * m;
        v * (r * r + 2.0 * a * a * v) / (self.noise_var * self.noise_var)
    }

    pub fn fisher_x_given_y(&self, a: f64) -> f64 {
        self.fisher_y_given_x() - self.fisher_y(a)
    }

    /// `½(a²σx²/σv² + σv²/(a²σx²))`.
    pub fn rho(&self, a: f64) -> f64 {
        let u = a * a * self.signal_var / self.noise_var;
        0.5 * (u + 1.0 / u)
    }

    /// Gain minimising the regret scalar, equivalently maximising `I(Y;a)`.
    pub fn optimal_gain(&self) -> f64 {
        (self.noise_var / self.signal_var).sqrt()
    }

    /// `D(P_{â|y} ‖ P_{a|y})` between the two Gaussian posteriors.
    pub fn kl_posteriors(&self, a: f64, a_hat: f64, y: f64) -> f64 {
        let (m1, v1) = (self.posterior_mean(a_hat, y), self.posterior_var(a_hat));
        let (m2, v2) = (self.posterior_mean(a, y), self.posterior_var(a));
        0.5 * ((v2 / v1).ln() + v1 / v2 + (m1 - m2).powi(2) / v2 - 1.0)
    }

    /// Squared Hellinger distance `1 − BC` between the two Gaussian posteriors.
    pub fn hellinger_sq_posteriors(&self, a: f64, a_hat: f64, y: f64) -> f64 {
        let (m1, v1) = (self.posterior_mean(a_hat, y), self.posterior_var(a_hat));
        let (m2, v2) = (self.posterior_mean(a, y), self.posterior_var(a));
        let bc = (2.0 * (v1 * v2).sqrt() / (v1 + v2)).sqrt()
            * (-(m1 - m2).powi(2) / (4.0 * (v1 + v2))).exp();
        1.0 - bc
    }
}
