//! Input priors, the scalar Gaussian channel `Y = aX + V`, densities and
//! seeded sampling.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, ln_normal_pdf, log_sum_exp, HermiteRule, Node, QuadratureSpec};

const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub prob: f64,
    pub value: f64,
}

/// The known prior of the channel input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InputDistribution {
    Gaussian { mean: f64, var: f64 },
    GaussianMixture { components: Vec<MixtureComponent> },
    Discrete { atoms: Vec<Atom> },
}

/// One additive piece of the prior, in log-weight form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum PriorPiece {
    Normal { ln_w: f64, mean: f64, var: f64 },
    Point { ln_w: f64, x: f64 },
}

impl InputDistribution {
    pub fn gaussian(mean: f64, var: f64) -> Result<Self> {
        let d = Self::Gaussian { mean, var };
        d.validate()?;
        Ok(d)
    }

    /// Mixture from `(weight, mean, var)` triples.
    pub fn mixture(components: &[(f64, f64, f64)]) -> Result<Self> {
        let d = Self::GaussianMixture {
            components: components
                .iter()
                .map(|&(weight, mean, var)| MixtureComponent { weight, mean, var })
                .collect(),
        };
        d.validate()?;
        Ok(d)
    }

    /// Finite prior from `(prob, value)` pairs.
    pub fn discrete(atoms: &[(f64, f64)]) -> Result<Self> {
        let d = Self::Discrete {
            atoms: atoms
                .iter()
                .map(|&(prob, value)| Atom { prob, value })
                .collect(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPrior(m));
        let check_weights = |ws: &mut dyn Iterator<Item = f64>| -> Result<()> {
            let mut sum = 0.0;
            let mut count = 0;
            for w in ws {
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(Error::InvalidPrior(format!(
                        "weight {w} is not a nonnegative number"
                    )));
                }
                sum += w;
                count += 1;
            }
            if count == 0 {
                return Err(Error::InvalidPrior("no components".into()));
            }
            if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(Error::InvalidPrior(format!(
                    "weights sum to {sum}, expected 1"
                )));
            }
            Ok(())
        };
        match self {
            Self::Gaussian { mean, var } => {
                if !mean.is_finite() {
                    return bad(format!("mean {mean} is not finite"));
                }
                if !(*var > 0.0 && var.is_finite()) {
                    return bad(format!("variance {var} must be > 0"));
                }
            }
            Self::GaussianMixture { components } => {
                check_weights(&mut components.iter().map(|c| c.weight))?;
                for (i, c) in components.iter().enumerate() {
                    if !c.mean.is_finite() {
                        return bad(format!("component {i}: mean {} is not finite", c.mean));
                    }
                    if !(c.var > 0.0 && c.var.is_finite()) {
                        return bad(format!("component {i}: variance {} must be > 0", c.var));
                    }
                }
            }
            Self::Discrete { atoms } => {
                check_weights(&mut atoms.iter().map(|a| a.prob))?;
                if let Some(a) = atoms.iter().find(|a| !a.value.is_finite()) {
                    return bad(format!("atom {} is not finite", a.value));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn pieces(&self) -> Vec<PriorPiece> {
        match self {
            Self::Gaussian { mean, var } => vec![PriorPiece::Normal {
                ln_w: 0.0,
                mean: *mean,
                var: *var,
            }],
            Self::GaussianMixture { components } => components
                .iter()
                .filter(|c| c.weight > 0.0)
                .map(|c| PriorPiece::Normal {
                    ln_w: c.weight.ln(),
                    mean: c.mean,
                    var: c.var,
                })
                .collect(),
            Self::Discrete { atoms } => atoms
                .iter()
                .filter(|a| a.prob > 0.0)
                .map(|a| PriorPiece::Point {
                    ln_w: a.prob.ln(),
                    x: a.value,
                })
                .collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Gaussian { mean, .. } => *mean,
            Self::GaussianMixture { components } => {
                components.iter().map(|c| c.weight * c.mean).sum()
            }
            Self::Discrete { atoms } => atoms.iter().map(|a| a.prob * a.value).sum(),
        }
    }

    /// `E[X²]`.
    pub fn second_moment(&self) -> f64 {
        match self {
            Self::Gaussian { mean, var } => var + mean * mean,
            Self::GaussianMixture { components } => components
                .iter()
                .map(|c| c.weight * (c.var + c.mean * c.mean))
                .sum(),
            Self::Discrete { atoms } => atoms.iter().map(|a| a.prob * a.value * a.value).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (self.second_moment() - m * m).max(0.0)
    }

    /// Zero mean up to the rounding of the weights themselves.
    pub fn is_zero_mean(&self) -> bool {
        let scale: f64 = match self {
            Self::Gaussian { mean, .. } => mean.abs(),
            Self::GaussianMixture { components } => {
                components.iter().map(|c| c.weight * c.mean.abs()).sum()
            }
            Self::Discrete { atoms } => atoms.iter().map(|a| a.prob * a.value.abs()).sum(),
        };
        self.mean().abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE)
    }

    pub fn require_zero_mean(&self) -> Result<()> {
        if self.is_zero_mean() {
            Ok(())
        } else {
            Err(Error::NotZeroMean { mean: self.mean() })
        }
    }

    /// Interval holding the prior's mass: `tail_sigmas` standard deviations
    /// around each Gaussian component, or the atom range.
    pub fn support_bounds(&self, tail_sigmas: f64) -> (f64, f64) {
        self.pieces()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| match *p {
                PriorPiece::Normal { mean, var, .. } => {
                    let r = tail_sigmas * var.sqrt();
                    (lo.min(mean - r), hi.max(mean + r))
                }
                PriorPiece::Point { x, .. } => (lo.min(x), hi.max(x)),
            })
    }

    /// Draws one input symbol.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian { mean, var } => {
                mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal)
            }
            Self::GaussianMixture { components } => {
                let idx = pick(components.iter().map(|c| c.weight), rng);
                let c = &components[idx];
                c.mean + c.var.sqrt() * rng.sample::<f64, _>(StandardNormal)
            }
            Self::Discrete { atoms } => atoms[pick(atoms.iter().map(|a| a.prob), rng)].value,
        }
    }
}

fn pick<R: Rng + ?Sized>(weights: impl Iterator<Item = f64>, rng: &mut R) -> usize {
    let ws: Vec<f64> = weights.collect();
    if ws.len() == 1 {
        return 0;
    }
    // Weights were validated on construction.
    WeightedIndex::new(&ws)
        .expect("validated weights")
        .sample(rng)
}

/// Compact form `gaussian(m,v)`, `mixture(w,m,v;…)` or `discrete(p,x;…)`.
impl fmt::Display for InputDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |parts: Vec<String>| parts.join(";");
        match self {
            Self::Gaussian { mean, var } => write!(f, "gaussian({mean},{var})"),
            Self::GaussianMixture { components } => {
                let parts = components
                    .iter()
                    .map(|c| format!("{},{},{}", c.weight, c.mean, c.var))
                    .collect();
                write!(f, "mixture({})", join(parts))
            }
            Self::Discrete { atoms } => {
                let parts = atoms
                    .iter()
                    .map(|a| format!("{},{}", a.prob, a.value))
                    .collect();
                write!(f, "discrete({})", join(parts))
            }
        }
    }
}

/// Parses the [`Display`](fmt::Display) form, or the JSON form when the
/// text starts with `{`. Arguments may be fractions such as `1/3`.
impl FromStr for InputDistribution {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.starts_with('{') {
            let d: Self =
                serde_json::from_str(text).map_err(|e| Error::InvalidPrior(e.to_string()))?;
            d.validate()?;
            return Ok(d);
        }
        let bad = || {
            Error::InvalidPrior(format!("cannot parse `{text}`; expected gaussian(m,v), mixture(w,m,v;...) or discrete(p,x;...)"))
        };
        let (name, rest) = text.split_once('(').ok_or_else(bad)?;
        let body = rest.strip_suffix(')').ok_or_else(bad)?;
        let number = |s: &str| -> Result<f64> {
            let s = s.trim();
            let v = match s.split_once('/') {
                Some((n, d)) => n
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .zip(d.trim().parse::<f64>().ok())
                    .map(|(n, d)| n / d),
                None => s.parse().ok(),
            };
            v.ok_or_else(|| Error::InvalidPrior(format!("`{s}` is not a number")))
        };
        let groups = |width: usize| -> Result<Vec<Vec<f64>>> {
            body.split(';')
                .map(|g| {
                    let xs = g.split(',').map(number).collect::<Result<Vec<_>>>()?;
                    if xs.len() != width {
                        return Err(Error::InvalidPrior(format!(
                            "`{g}` needs {width} comma-separated numbers"
                        )));
                    }
                    Ok(xs)
                })
                .collect()
        };
        match name.trim() {
            "gaussian" => match groups(2)?.as_slice() {
                [g] => Self::gaussian(g[0], g[1]),
                _ => Err(bad()),
            },
            "mixture" => Self::mixture(
                &groups(3)?
                    .iter()
                    .map(|g| (g[0], g[1], g[2]))
                    .collect::<Vec<_>>(),
            ),
            "discrete" => {
                Self::discrete(&groups(2)?.iter().map(|g| (g[0], g[1])).collect::<Vec<_>>())
            }
            _ => Err(bad()),
        }
    }
}

/// The scalar channel `Y = aX + V`, `V ~ N(0, noise_var)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    gain: f64,
    noise_var: f64,
    input: InputDistribution,
}

impl ChannelModel {
    pub fn new(gain: f64, noise_var: f64, input: InputDistribution) -> Result<Self> {
        validate_gain(gain)?;
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidNoiseVariance(noise_var));
        }
        input.validate()?;
        Ok(Self {
            gain,
            noise_var,
            input,
        })
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn input(&self) -> &InputDistribution {
        &self.input
    }

    /// Same prior and noise, different gain.
    pub fn with_gain(&self, gain: f64) -> Result<Self> {
        validate_gain(gain)?;
        Ok(Self {
            gain,
            ..self.clone()
        })
    }

    /// `var(X) / σv²`; does not depend on the gain.
    pub fn snr(&self) -> f64 {
        self.input.variance() / self.noise_var
    }

    pub fn output_mean(&self) -> f64 {
        self.gain * self.input.mean()
    }

    pub fn output_sd(&self) -> f64 {
        (self.gain * self.gain * self.input.variance() + self.noise_var).sqrt()
    }

    /// `ln f_a(y | x)`.
    pub fn likelihood_log(&self, y: f64, x: f64) -> f64 {
        ln_normal_pdf(y, self.gain * x, self.noise_var)
    }

    /// `∂/∂a ln f_a(y | x)`.
    pub fn likelihood_score(&self, y: f64, x: f64) -> f64 {
        x * (y - self.gain * x) / self.noise_var
    }

    /// The output marginal as an exact Gaussian mixture `(weight, mean, var)`.
    pub fn output_components(&self) -> Vec<(f64, f64, f64)> {
        let a = self.gain;
        self.input
            .pieces()
            .into_iter()
            .map(|p| match p {
                PriorPiece::Normal { ln_w, mean, var } => {
                    (ln_w.exp(), a * mean, a * a * var + self.noise_var)
                }
                PriorPiece::Point { ln_w, x } => (ln_w.exp(), a * x, self.noise_var),
            })
            .collect()
    }

    /// `E[h(Y)]` under the output marginal, one quadrature per component.
    /// The first error raised by `h` aborts the expectation.
    pub fn output_expectation<F>(&self, h: F, quad: &QuadratureSpec) -> Result<f64>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let failure = std::cell::RefCell::new(None);
        let wrapped = |y: f64| match h(y) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        };
        let mut acc = 0.0;
        for (w, m, v) in self.output_components() {
            let part = numerics::gaussian_expectation(wrapped, m, v.sqrt(), quad);
            if let Some(e) = failure.borrow_mut().take() {
                return Err(e);
            }
            acc += w * part?;
        }
        Ok(acc)
    }

    /// Discretised joint density `p(x) f_a(y|x)` as weighted nodes in `x`.
    ///
    /// Gaussian prior pieces are integrated on a window centred on that
    /// piece's conditional location given `y`. Atoms are carried exactly.
    ///
    /// Given `y` each Gaussian piece has an exactly Gaussian conditional, so
    /// the Hermite rule is used here whatever the configured method (the
    /// method choice governs the outer integrals over `y`), and each node's
    /// joint log-density is its value at the window centre minus `t²`.
    pub(crate) fn joint_nodes(&self, y: f64, quad: &QuadratureSpec) -> Result<Vec<Node>> {
        quad.validate()?;
        let a = self.gain;
        let sv2 = self.noise_var;
        let mut out = Vec::new();
        for piece in self.input.pieces() {
            match piece {
                PriorPiece::Point { ln_w, x } => out.push(Node {
                    x,
                    ln_w: ln_w + self.likelihood_log(y, x),
                }),
                PriorPiece::Normal { ln_w, mean, var } => {
                    let c = a * a * var + sv2;
                    let center = mean + a * var * (y - a * mean) / c;
                    let scale = (var * sv2 / c).sqrt();
                    let peak = ln_normal_pdf(center, mean, var) + self.likelihood_log(y, center);
                    if !peak.is_finite() {
                        return Err(Error::NonFinite { x: center });
                    }
                    let rule = HermiteRule::get(quad.gh_order);
                    let base = ln_w + peak + (SQRT_2 * scale).ln();
                    out.extend(
                        rule.nodes
                            .iter()
                            .zip(&rule.ln_weights)
                            .map(|(&t, &lw)| Node {
                                x: center + SQRT_2 * scale * t,
                                ln_w: base + lw,
                            }),
                    );
                }
            }
        }
        Ok(out)
    }

    /// `ln f_a(y)` by quadrature over continuous prior pieces and exact
    /// log-sum-exp over atoms.
    pub fn marginal_log(&self, y: f64, quad: &QuadratureSpec) -> Result<f64> {
        let nodes = self.joint_nodes(y, quad)?;
        let lw: Vec<f64> = nodes.iter().map(|n| n.ln_w).collect();
        Ok(log_sum_exp(&lw))
    }

    /// `ln f_a(y)` from the exact Gaussian-mixture form of the marginal.
    pub fn marginal_log_closed(&self, y: f64) -> f64 {
        let terms: Vec<f64> = self
            .output_components()
            .into_iter()
            .map(|(w, m, v)| w.ln() + ln_normal_pdf(y, m, v))
            .collect();
        log_sum_exp(&terms)
    }

    /// Draws `n` input/output pairs from the default stream of `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleBatch> {
        self.sample_stream(n, seed, 0)
    }

    /// Draws `n` pairs from substream `stream` of `seed`. Distinct streams are
    /// independent, so trial `i` can use stream `i` in any execution order.
    pub fn sample_stream(&self, n: usize, seed: u64, stream: u64) -> Result<SampleBatch> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be >= 1".into()));
        }
        let mut rng = stream_rng(seed, stream);
        let sd = self.noise_var.sqrt();
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x = self.input.draw(&mut rng);
            let v: f64 = rng.sample(StandardNormal);
            xs.push(x);
            ys.push(self.gain * x + sd * v);
        }
        Ok(SampleBatch {
            xs,
            ys,
            seed,
            stream,
            channel: self.clone(),
        })
    }
}

pub(crate) fn validate_gain(gain: f64) -> Result<()> {
    if gain > 0.0 && gain.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidGain(gain))
    }
}

/// Seeded ChaCha8 generator positioned on substream `stream`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Paired draws `ys[i] = a·xs[i] + v[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    pub channel: ChannelModel,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}
