//! Deterministic numerical primitives shared by the estimators.
//!
//! Two one-dimensional quadrature rules are available:
//!
//! - **Gauss–Hermite** of configurable order, placed at a caller-supplied
//!   center and scale. Exact for Gaussian-times-polynomial integrands, which is
//!   the shape of every posterior piece in this crate.
//! - **Adaptive Simpson** with Richardson extrapolation (Boole's rule on the
//!   accepted panels) over `center ± tail_sigmas · scale`. This is the
//!   default: expectations over the output are integrands whose features
//!   (posterior switches between well-separated inputs) can be much narrower
//!   than the Hermite node spacing, and only the adaptive rule controls that
//!   error.
//!
//! Both rules can be materialised as a weighted node set, so that several
//! expectations against the same density share nodes and their quadrature
//! errors are correlated rather than independent.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Newton root-finding for the Hermite nodes loses roots beyond this order.
pub const MAX_GH_ORDER: usize = 150;

/// Hard cap on integrand evaluations for one adaptive integral.
const MAX_EVALUATIONS: usize = 4_000_000;
/// Every starting panel is bisected at least this often before the error
/// estimate is trusted; a coarse panel can otherwise pass by accident.
const MIN_DEPTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QuadMethod {
    #[default]
    AdaptiveSimpson,
    GaussHermite,
}

/// Tolerances and rule selection for every integral in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub method: QuadMethod,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum bisection depth of the adaptive rule.
    pub max_subdivisions: usize,
    pub gh_order: usize,
    /// Half-width of the finite integration window, in units of `scale`.
    pub tail_sigmas: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            method: QuadMethod::AdaptiveSimpson,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_subdivisions: 60,
            gh_order: 128,
            tail_sigmas: 10.0,
        }
    }
}

impl QuadratureSpec {
    pub fn adaptive_simpson() -> Self {
        Self {
            method: QuadMethod::AdaptiveSimpson,
            ..Self::default()
        }
    }

    pub fn gauss_hermite(order: usize) -> Self {
        Self {
            method: QuadMethod::GaussHermite,
            gh_order: order,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidQuadrature(m.to_string()));
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return bad("rel_tol must be > 0");
        }
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return bad("abs_tol must be > 0");
        }
        if !(2..=MAX_GH_ORDER).contains(&self.gh_order) {
            return bad("gh_order must be in 2..=150");
        }
        if !(self.tail_sigmas >= 4.0 && self.tail_sigmas.is_finite()) {
            return bad("tail_sigmas must be >= 4");
        }
        if self.max_subdivisions == 0 {
            return bad("max_subdivisions must be >= 1");
        }
        Ok(())
    }
}

/// Gauss–Hermite rule for the weight `exp(-t²)`.
#[derive(Debug)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    /// Natural log of the weights; the smallest weights underflow otherwise
    /// once combined with `exp(t²)`.
    pub ln_weights: Vec<f64>,
}

impl HermiteRule {
    /// Newton iteration on orthonormal Hermite recurrences, stable to order
    /// several hundred.
    fn compute(n: usize) -> Self {
        const PIM4: f64 = 0.751_125_544_464_942_5; // π^(-1/4)
        const MAX_ITER: usize = 100;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0_f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..MAX_ITER {
                let mut p1 = PIM4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let ln_weights = w.iter().map(|v| v.ln()).collect();
        Self {
            nodes: x,
            ln_weights,
        }
    }

    /// Cached rule of the given order.
    pub fn get(order: usize) -> Arc<HermiteRule> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<HermiteRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry(order)
            .or_insert_with(|| Arc::new(HermiteRule::compute(order)))
            .clone()
    }
}

/// A quadrature node: abscissa and natural-log weight, so that
/// `∫ f ≈ Σ exp(ln_w) · f(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: f64,
    pub ln_w: f64,
}

/// Builds a node set for integrals over the real line of functions that are
/// a Gaussian bump at `center` with width `scale`, times a low-degree
/// polynomial.
///
/// Both rules are built in the standardized coordinate `(x − center)/scale`
/// and then shifted, so the node pattern does not depend on `center`. This
/// keeps outer integrals over a varying window centre free of the jumps an
/// input-dependent refinement pattern would introduce.
pub fn quadrature_nodes(center: f64, scale: f64, spec: &QuadratureSpec) -> Result<Vec<Node>> {
    spec.validate()?;
    check_window(center, scale)?;
    match spec.method {
        QuadMethod::GaussHermite => {
            let rule = HermiteRule::get(spec.gh_order);
            let ln_jac = (std::f64::consts::SQRT_2 * scale).ln();
            Ok(rule
                .nodes
                .iter()
                .zip(&rule.ln_weights)
                .map(|(&t, &lw)| Node {
                    x: center + std::f64::consts::SQRT_2 * scale * t,
                    ln_w: lw + t * t + ln_jac,
                })
                .collect())
        }
        QuadMethod::AdaptiveSimpson => {
            let driver = |t: f64| (1.0 + t.powi(4)) * (-0.5 * t * t).exp();
            let (_, nodes) = adaptive_simpson(&driver, -spec.tail_sigmas, spec.tail_sigmas, spec)?;
            let ln_jac = scale.ln();
            Ok(nodes
                .into_iter()
                .map(|(t, w)| Node {
                    x: center + scale * t,
                    ln_w: w.ln() + ln_jac,
                })
                .collect())
        }
    }
}

fn check_window(center: f64, scale: f64) -> Result<()> {
    if !center.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "center must be finite, got {center}"
        )));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scale must be positive, got {scale}"
        )));
    }
    Ok(())
}

/// `∫ f` over `center ± tail_sigmas · scale` (adaptive Simpson) or over the
/// real line with Gauss–Hermite nodes placed at `center`, `scale`.
pub fn integrate<F>(f: F, center: f64, scale: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    spec.validate()?;
    check_window(center, scale)?;
    match spec.method {
        QuadMethod::AdaptiveSimpson => {
            let lo = center - spec.tail_sigmas * scale;
            let hi = center + spec.tail_sigmas * scale;
            adaptive_simpson(&f, lo, hi, spec).map(|(v, _)| v)
        }
        QuadMethod::GaussHermite => {
            let nodes = quadrature_nodes(center, scale, spec)?;
            let mut acc = 0.0;
            for n in &nodes {
                let v = f(n.x);
                if !v.is_finite() {
                    return Err(Error::NonFinite { x: n.x });
                }
                acc += n.ln_w.exp() * v;
            }
            Ok(acc)
        }
    }
}

/// `E[h(Z)]` for `Z ~ N(mean, sd²)`.
pub fn gaussian_expectation<F>(h: F, mean: f64, sd: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    spec.validate()?;
    check_window(mean, sd)?;
    match spec.method {
        QuadMethod::GaussHermite => {
            let rule = HermiteRule::get(spec.gh_order);
            let norm = -0.5 * PI.ln();
            let mut acc = 0.0;
            for (&t, &lw) in rule.nodes.iter().zip(&rule.ln_weights) {
                let x = mean + std::f64::consts::SQRT_2 * sd * t;
                let v = h(x);
                if !v.is_finite() {
                    return Err(Error::NonFinite { x });
                }
                acc += (lw + norm).exp() * v;
            }
            Ok(acc)
        }
        QuadMethod::AdaptiveSimpson => {
            integrate(|x| h(x) * normal_pdf(x, mean, sd * sd), mean, sd, spec)
        }
    }
}

struct SimpsonState<'a, F> {
    f: &'a F,
    max_depth: usize,
    evals: usize,
    nodes: Vec<(f64, f64)>,
}

impl<F: Fn(f64) -> f64> SimpsonState<'_, F> {
    fn eval(&mut self, x: f64) -> Result<f64> {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { x })
        }
    }

    fn push(&mut self, x: f64, w: f64) {
        match self.nodes.last_mut() {
            Some(last) if last.0 == x => last.1 += w,
            _ => self.nodes.push((x, w)),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn panel(
        &mut self,
        a: f64,
        fa: f64,
        m: f64,
        fm: f64,
        b: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = self.eval(lm)?;
        let frm = self.eval(rm)?;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth >= MIN_DEPTH && delta.abs() <= 15.0 * tol {
            let h = (b - a) / 90.0;
            self.push(a, 7.0 * h);
            self.push(lm, 32.0 * h);
            self.push(m, 12.0 * h);
            self.push(rm, 32.0 * h);
            self.push(b, 7.0 * h);
            return Ok(left + right + delta / 15.0);
        }
        if depth >= self.max_depth || self.evals > MAX_EVALUATIONS || lm <= a || rm >= b {
            return Err(Error::NoConvergence {
                lo: a,
                hi: b,
                depth,
            });
        }
        let l = self.panel(a, fa, lm, flm, m, fm, left, 0.5 * tol, depth + 1)?;
        let r = self.panel(m, fm, rm, frm, b, fb, right, 0.5 * tol, depth + 1)?;
        Ok(l + r)
    }
}

/// Adaptive Simpson over `[lo, hi]`; returns the value and the accepted
/// Boole-rule nodes with their (positive) weights.
fn adaptive_simpson<F>(
    f: &F,
    lo: f64,
    hi: f64,
    spec: &QuadratureSpec,
) -> Result<(f64, Vec<(f64, f64)>)>
where
    F: Fn(f64) -> f64,
{
    let panels = 2 * spec.tail_sigmas.ceil() as usize;
    let width = (hi - lo) / panels as f64;
    let mut st = SimpsonState {
        f,
        max_depth: spec.max_subdivisions,
        evals: 0,
        nodes: Vec::new(),
    };

    let mut pts = Vec::with_capacity(panels);
    let mut abs_total = 0.0;
    let mut fa = st.eval(lo)?;
    for i in 0..panels {
        let a = lo + i as f64 * width;
        let b = if i + 1 == panels {
            hi
        } else {
            lo + (i + 1) as f64 * width
        };
        let m = 0.5 * (a + b);
        let fm = st.eval(m)?;
        let fb = st.eval(b)?;
        abs_total += (b - a) / 6.0 * (fa.abs() + 4.0 * fm.abs() + fb.abs());
        pts.push((a, fa, m, fm, b, fb));
        fa = fb;
    }
    let tol = spec.abs_tol.max(spec.rel_tol * abs_total);

    let mut total = 0.0;
    for (a, fa, m, fm, b, fb) in pts {
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        let share = tol * (b - a) / (hi - lo);
        total += st.panel(a, fa, m, fm, b, fb, whole, share, 0)?;
    }
    Ok((total, st.nodes))
}

/// Brent's method on `[lo, hi]`. Returns `(argmin, min)`.
///
/// Only a local minimum is guaranteed when `f` is not unimodal on the bracket.
/// The endpoints themselves are never evaluated.
pub fn minimize_scalar<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    const GOLDEN: f64 = 0.381_966_011_250_105_1;
    const MAX_ITER: usize = 500;
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::BadBracket { lo, hi });
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tol must be > 0, got {tol}"
        )));
    }
    let eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { x })
        }
    };

    let (mut a, mut b) = (lo, hi);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = eval(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for _ in 0..MAX_ITER {
        let xm = 0.5 * (a + b);
        let tol1 = (0.5 * tol).max(4.0 * f64::EPSILON * x.abs());
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden_step = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            if !(p.abs() >= (0.5 * q * etemp).abs() || p <= q * (a - x) || p >= q * (b - x)) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden_step = false;
            }
        }
        if golden_step {
            e = if x >= xm { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = eval(u)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok((x, fx))
}

/// Central difference `(f(x+h) − f(x−h)) / 2h`.
pub fn fd_derivative<F>(f: F, x: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidArgument(format!("step must be > 0, got {h}")));
    }
    let hi = f(x + h);
    if !hi.is_finite() {
        return Err(Error::NonFinite { x: x + h });
    }
    let lo = f(x - h);
    if !lo.is_finite() {
        return Err(Error::NonFinite { x: x - h });
    }
    Ok((hi - lo) / (2.0 * h))
}

/// `ln Σ exp(v)`, returning `-∞` for an empty or all-`-∞` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Normalises log-weights: returns `ln Σ exp(v)` and the weights
/// `exp(v) / Σ exp(v)`, which sum to one up to a final rounding.
pub fn normalize_log_weights(values: &[f64]) -> (f64, Vec<f64>) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return (max, vec![0.0; values.len()]);
    }
    let mut ws: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = ws.iter().sum();
    ws.iter_mut().for_each(|w| *w /= total);
    (max + total.ln(), ws)
}

/// A Monte Carlo (or exact, `stderr = 0`) estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }
}

/// Welford running mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> Estimate {
        let stderr = if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        };
        Estimate {
            value: self.mean,
            stderr,
        }
    }
}

pub fn ln_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (d * d / var + (2.0 * PI * var).ln())
}

pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    ln_normal_pdf(x, mean, var).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn std_pdf(x: f64) -> f64 {
        normal_pdf(x, 0.0, 1.0)
    }

    fn both() -> [QuadratureSpec; 2] {
        [
            QuadratureSpec::gauss_hermite(128),
            QuadratureSpec::adaptive_simpson(),
        ]
    }

    #[test]
    fn normal_density_integrates_to_one() {
        for spec in both() {
            let v = integrate(std_pdf, 0.0, 1.0, &spec).unwrap();
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn odd_moment_vanishes() {
        for spec in both() {
            let v = integrate(|x| x * std_pdf(x), 0.0, 1.0, &spec).unwrap();
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn second_moment_matches_low_order_hermite() {
        let reference = integrate(
            |x| x * x * std_pdf(x),
            0.0,
            1.0,
            &QuadratureSpec::gauss_hermite(64),
        )
        .unwrap();
        assert_abs_diff_eq!(reference, 1.0, epsilon = 1e-12);
        let simpson = integrate(
            |x| x * x * std_pdf(x),
            0.0,
            1.0,
            &QuadratureSpec::adaptive_simpson(),
        )
        .unwrap();
        assert_abs_diff_eq!(simpson, reference, epsilon = 1e-8);
    }

    #[test]
    fn hermite_rule_reproduces_gaussian_moments() {
        for order in [2, 7, 64, 128, MAX_GH_ORDER] {
            let rule = HermiteRule::get(order);
            let total: f64 = rule.ln_weights.iter().map(|w| w.exp()).sum();
            assert_abs_diff_eq!(total, PI.sqrt(), epsilon = 1e-12);
            if order >= 4 {
                let m4: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.ln_weights)
                    .map(|(t, w)| w.exp() * t.powi(4))
                    .sum();
                // ∫ t⁴ e^{-t²} = 3√π/4
                assert_abs_diff_eq!(m4, 0.75 * PI.sqrt(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn shifted_window_is_exact_for_offset_gaussian() {
        let f = |x: f64| normal_pdf(x, 3.0, 0.04);
        for spec in both() {
            let v = integrate(f, 3.0, 0.2, &spec).unwrap();
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn gaussian_expectation_routes_agree() {
        let h = |x: f64| (0.3 * x).tanh() * x + 1.0;
        let gh = gaussian_expectation(h, 0.5, 2.0, &QuadratureSpec::gauss_hermite(128)).unwrap();
        let si = gaussian_expectation(h, 0.5, 2.0, &QuadratureSpec::adaptive_simpson()).unwrap();
        assert!((gh - si).abs() <= 1e-7 * gh.abs());
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        for spec in both() {
            let err =
                integrate(|x| if x > 0.5 { f64::NAN } else { 1.0 }, 0.0, 1.0, &spec).unwrap_err();
            assert!(matches!(err, Error::NonFinite { .. }));
        }
    }

    #[test]
    fn depth_exhaustion_is_no_convergence() {
        let spec = QuadratureSpec {
            max_subdivisions: 2,
            ..QuadratureSpec::adaptive_simpson()
        };
        let err = integrate(|x| (40.0 * x).sin().abs(), 0.0, 1.0, &spec).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn invalid_quadrature_settings_rejected() {
        let spec = QuadratureSpec {
            tail_sigmas: 3.0,
            ..QuadratureSpec::default()
        };
        assert!(matches!(
            integrate(std_pdf, 0.0, 1.0, &spec),
            Err(Error::InvalidQuadrature(_))
        ));
        for gh_order in [1, MAX_GH_ORDER + 1] {
            let spec = QuadratureSpec {
                gh_order,
                ..QuadratureSpec::default()
            };
            assert!(spec.validate().is_err());
        }
    }

    #[test]
    fn node_set_reproduces_integral() {
        let f = |x: f64| (1.0 + x * x) * std_pdf(x);
        for spec in both() {
            let nodes = quadrature_nodes(0.0, 1.0, &spec).unwrap();
            let v: f64 = nodes.iter().map(|n| n.ln_w.exp() * f(n.x)).sum();
            assert_abs_diff_eq!(v, 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn minimize_quadratic() {
        let (x, fx) = minimize_scalar(|x| (x - 2.0) * (x - 2.0), 0.0, 5.0, 1e-8).unwrap();
        assert_abs_diff_eq!(x, 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(fx, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn minimize_negated_output_fisher() {
        // Unit-SNR Gaussian output Fisher information 2a²/(a²+1)², peak at a = 1.
        let f = |a: f64| -(2.0 * a * a / (a * a + 1.0).powi(2));
        let (x, _) = minimize_scalar(f, 0.05, 5.0, 1e-8).unwrap();
        assert_abs_diff_eq!(x, 1.0, epsilon = 1e-7);
    }

    #[test]
    fn minimize_regret_scalar_at_snr_ten() {
        let f = |a: f64| 0.5 * (a * a * 10.0 + 1.0 / (10.0 * a * a));
        let (x, fx) = minimize_scalar(f, 0.05, 5.0, 1e-8).unwrap();
        assert_abs_diff_eq!(x, 10f64.powf(-0.5), epsilon = 1e-7);
        assert_abs_diff_eq!(fx, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bad_bracket() {
        assert!(matches!(
            minimize_scalar(|x| x, 1.0, 1.0, 1e-6),
            Err(Error::BadBracket { .. })
        ));
        assert!(matches!(
            minimize_scalar(|x| x, 2.0, 1.0, 1e-6),
            Err(Error::BadBracket { .. })
        ));
    }

    #[test]
    fn central_differences() {
        assert_abs_diff_eq!(
            fd_derivative(f64::ln, 1.0, 1e-5).unwrap(),
            1.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            fd_derivative(|x| x.powi(3), 2.0, 1e-4).unwrap(),
            12.0,
            epsilon = 1e-6
        );
        assert!(matches!(
            fd_derivative(f64::ln, 0.0, 1e-3),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn coarse_panels_are_not_accepted_by_accident() {
        let (alpha, beta, c, w) = (
            1.20521999874509,
            0.19852763118717692,
            -0.8089615541708083,
            1.1000091852703957,
        );
        let f = |x: f64| (alpha * (x * w).cos() + beta * (x + c).powi(2)) * std_pdf(x);
        let exact = alpha * (-0.5 * w * w).exp() + beta * (1.0 + c * c);
        let got = integrate(f, 0.0, 1.0, &QuadratureSpec::adaptive_simpson()).unwrap();
        assert!((got - exact).abs() <= 1e-9 * exact, "{got} vs {exact}");
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_abs_diff_eq!(
            log_sum_exp(&[-1000.0, -1000.0]),
            -1000.0 + 2f64.ln(),
            epsilon = 1e-12
        );
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    proptest! {
        #[test]
        fn integrate_is_linear(alpha in -3.0..3.0f64, beta in -3.0..3.0f64, c in -2.0..2.0f64, w in 0.2..3.0f64) {
            let f = move |x: f64| (x * w).cos() * std_pdf(x);
            let g = move |x: f64| (x + c).powi(2) * std_pdf(x);
            for spec in both() {
                let lhs = integrate(|x| alpha * f(x) + beta * g(x), 0.0, 1.0, &spec).unwrap();
                let rhs = alpha * integrate(f, 0.0, 1.0, &spec).unwrap() + beta * integrate(g, 0.0, 1.0, &spec).unwrap();
                let tol = 1e-8 * (1.0 + alpha.abs() + beta.abs()) * (1.0 + c * c);
                prop_assert!((lhs - rhs).abs() <= tol, "{} vs {}", lhs, rhs);
            }
        }

        #[test]
        fn hermite_and_simpson_agree_on_gaussian_weighted(m in -3.0..3.0f64, s in 0.1..4.0f64, k in 0.0..2.0f64) {
            let h = move |x: f64| 1.0 + (k * x).sin().powi(2) + 0.1 * x * x;
            let gh = gaussian_expectation(h, m, s, &QuadratureSpec::gauss_hermite(128)).unwrap();
            let si = gaussian_expectation(h, m, s, &QuadratureSpec::adaptive_simpson()).unwrap();
            prop_assert!((gh - si).abs() <= 1e-7 * gh.abs());
        }

        #[test]
        fn argmin_invariant_to_constant_shift(center in 0.5..4.5f64, shift in -100.0..100.0f64) {
            let (x0, _) = minimize_scalar(|x| (x - center).powi(2), 0.0, 5.0, 1e-6).unwrap();
            let (x1, _) = minimize_scalar(|x| (x - center).powi(2) + shift, 0.0, 5.0, 1e-6).unwrap();
            prop_assert!((x0 - x1).abs() <= 2e-6);
            prop_assert!((x0 - center).abs() <= 1e-6);
        }
    }
}
