//! Priors and helpers shared by the integration tests.
#![allow(dead_code)]

use regretlab::{ChannelModel, InputDistribution};

/// Gains swept by most invariant checks.
pub const GAINS: [f64; 5] = [0.2, 0.5, 1.0, 2.0, 5.0];

/// Zero-mean priors, each with a short label.
pub fn zero_mean_priors() -> Vec<(&'static str, InputDistribution)> {
    vec![
        (
            "gaussian(0,1)",
            InputDistribution::gaussian(0.0, 1.0).unwrap(),
        ),
        (
            "binary(±1)",
            InputDistribution::discrete(&[(0.5, -1.0), (0.5, 1.0)]).unwrap(),
        ),
        (
            "discrete(-2:1/3,1:2/3)",
            InputDistribution::discrete(&[(1.0 / 3.0, -2.0), (2.0 / 3.0, 1.0)]).unwrap(),
        ),
        (
            "mixture(±1,0.5)",
            InputDistribution::mixture(&[(0.5, -1.0, 0.5), (0.5, 1.0, 0.5)]).unwrap(),
        ),
        (
            "mixture(asym,3)",
            InputDistribution::mixture(&[(0.2, -2.0, 0.3), (0.5, 0.2, 1.0), (0.3, 1.0, 0.2)])
                .unwrap(),
        ),
    ]
}

/// Zero-mean priors plus one with a nonzero mean.
pub fn all_priors() -> Vec<(&'static str, InputDistribution)> {
    let mut v = zero_mean_priors();
    v.push((
        "gaussian(0.5,1)",
        InputDistribution::gaussian(0.5, 1.0).unwrap(),
    ));
    v
}

pub fn channel(a: f64, noise_var: f64, prior: &InputDistribution) -> ChannelModel {
    ChannelModel::new(a, noise_var, prior.clone()).unwrap()
}

/// `|got − want| ≤ rel·|want|`, with `floor` guarding values at zero.
pub fn close(got: f64, want: f64, rel: f64, floor: f64) -> bool {
    (got - want).abs() <= rel * want.abs().max(floor)
}
