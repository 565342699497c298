//! Sampling and density kernels used by the full conditionals.
//!
//! Every sampler takes an explicit [`RngStream`], so a draw sequence is fixed
//! by the stream's `(seed, stream_id)` and the sequence of calls.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Truncation points at least this many sd into the tail use the
/// exponential-proposal rejection sampler instead of the inverse CDF.
pub const TAIL_THRESHOLD: f64 = 5.0;

/// Prior mass below which a truncated Beta draw is refused.
pub const NEGLIGIBLE_MASS: f64 = 1e-12;

// Bounds on ln(sigma^2) for inverse-gamma draws so that squares of
// abilities drawn from an empty, diffuse component stay finite.
const LN_VARIANCE_MIN: f64 = -230.0;
const LN_VARIANCE_MAX: f64 = 230.0;

/// Standard normal c.d.f. for finite input.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("std_normal_cdf of non-finite value {x}")));
    }
    Ok(phi(x))
}

#[inline]
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse of the standard normal c.d.f. (Wichura's AS241, about 1e-16
/// relative accuracy). Returns the infinities at 0 and 1.
/// Evaluates a polynomial with coefficients from the highest degree down.
#[inline]
fn horner(r: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * r + c)
}

pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = horner(
            r,
            &[
                2.509_080_928_730_122_7e3,
                3.343_057_558_358_813e4,
                6.726_577_092_700_87e4,
                4.592_195_393_154_987e4,
                1.373_169_376_550_946e4,
                1.971_590_950_306_551_3e3,
                1.331_416_678_917_843_8e2,
                3.387_132_872_796_366_5,
            ],
        );
        let den = horner(
            r,
            &[
                5.226_495_278_852_545e3,
                2.872_908_573_572_194_3e4,
                3.930_789_580_009_271e4,
                2.121_379_430_158_659_7e4,
                5.394_196_021_424_751e3,
                6.871_870_074_920_579e2,
                4.231_333_070_160_091e1,
                1.0,
            ],
        );
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = horner(
            r,
            &[
                7.745_450_142_783_414e-4,
                2.272_384_498_926_918_4e-2,
                2.417_807_251_774_506e-1,
                1.270_458_252_452_368_4,
                3.647_848_324_763_204_5,
                5.769_497_221_460_691,
                4.630_337_846_156_546,
                1.423_437_110_749_683_5,
            ],
        );
        let den = horner(
            r,
            &[
                1.050_750_071_644_416_9e-9,
                5.475_938_084_995_345e-4,
                1.519_866_656_361_645_7e-2,
                1.481_039_764_274_800_8e-1,
                6.897_673_349_851e-1,
                1.676_384_830_183_803_8,
                2.053_191_626_637_759,
                1.0,
            ],
        );
        num / den
    } else {
        r -= 5.0;
        let num = horner(
            r,
            &[
                2.010_334_399_292_288_1e-7,
                2.711_555_568_743_487_6e-5,
                1.242_660_947_388_078_4e-3,
                2.653_218_952_657_612_4e-2,
                2.965_605_718_285_048_7e-1,
                1.784_826_539_917_291_3,
                5.463_784_911_164_114,
                6.657_904_643_501_103,
            ],
        );
        let den = horner(
            r,
            &[
                2.044_263_103_389_939_7e-15,
                1.421_511_758_316_446e-7,
                1.846_318_317_510_054_8e-5,
                7.868_691_311_456_133e-4,
                1.487_536_129_085_061_5e-2,
                1.369_298_809_227_358e-1,
                5.998_322_065_558_879e-1,
                1.0,
            ],
        );
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[inline]
pub fn sample_std_normal(rng: &mut RngStream) -> f64 {
    StandardNormal.sample(rng)
}

/// Which half-line a truncated normal is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    BelowZero,
    AboveZero,
}

/// `N(mean, sd^2)` restricted to the half-line given by `side`. The result is
/// strictly negative (`BelowZero`) or strictly positive (`AboveZero`).
pub fn sample_truncated_normal(mean: f64, sd: f64, side: Side, rng: &mut RngStream) -> f64 {
    debug_assert!(sd > 0.0);
    match side {
        Side::AboveZero => positive_part(mean, sd, phi(mean / sd), rng),
        Side::BelowZero => -positive_part(-mean, sd, phi(-mean / sd), rng),
    }
}

/// Draws `Y ~ N(mu, sd^2)` conditioned on `Y > 0`, where `mass = Phi(mu / sd)`
/// is the probability of that event (passed in so callers that already
/// hold it avoid a second c.d.f. evaluation).
#[inline]
pub(crate) fn positive_part(mu: f64, sd: f64, mass: f64, rng: &mut RngStream) -> f64 {
    debug_assert!(mu.is_finite() && sd > 0.0 && sd.is_finite(), "N({mu}, {sd}^2)");
    let lower = -mu / sd;
    loop {
        let y = if lower >= TAIL_THRESHOLD {
            sd * tail_excess(lower, rng)
        } else if lower >= 0.0 {
            let t = -std_normal_quantile(rng.open01() * mass);
            sd * (t - lower)
        } else {
            let t = -std_normal_quantile(rng.open01() * mass);
            mu + sd * t
        };
        if y > 0.0 && y.is_finite() {
            return y;
        }
    }
}

/// Robert's exponential-proposal rejection sampler for `T ~ N(0,1) | T > lower`,
/// `lower >= 0`. Returns the excess `T - lower`.
fn tail_excess(lower: f64, rng: &mut RngStream) -> f64 {
    let hyp = lower.hypot(2.0);
    let rate = 0.5 * (lower + hyp);
    // lower - rate, written to avoid cancellation
    let offset = -2.0 / (lower + hyp);
    loop {
        let excess = <Exp1 as Distribution<f64>>::sample(&Exp1, rng) / rate;
        let d = offset + excess;
        if rng.open01().ln() <= -0.5 * d * d {
            return excess;
        }
    }
}

/// Logarithm of a `Gamma(shape, 1)` draw. Small shapes are handled in log
/// space so that the draw does not underflow to zero.
pub fn sample_ln_gamma(shape: f64, rng: &mut RngStream) -> f64 {
    debug_assert!(shape > 0.0);
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        g.ln()
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        g.ln() + rng.open01().ln() / shape
    }
}

pub fn sample_beta(alpha: f64, beta: f64, rng: &mut RngStream) -> f64 {
    let la = sample_ln_gamma(alpha, rng);
    let lb = sample_ln_gamma(beta, rng);
    1.0 / (1.0 + (lb - la).exp())
}

/// `Beta(alpha, beta)` restricted to `(lower, upper)`.
///
/// Intervals holding most of the mass use plain rejection; narrow or
/// far-tail intervals are inverted through the regularized incomplete beta.
pub fn sample_beta_truncated(alpha: f64, beta: f64, lower: f64, upper: f64, rng: &mut RngStream) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::Domain(format!(
            "beta shapes must be positive, got ({alpha}, {beta})"
        )));
    }
    if !(0.0 <= lower && lower < upper && upper <= 1.0) {
        return Err(Error::Domain(format!("invalid truncation interval ({lower}, {upper})")));
    }
    if lower == 0.0 && upper == 1.0 {
        return Ok(sample_beta(alpha, beta, rng));
    }
    let cdf_lo = beta_reg(alpha, beta, lower);
    if cdf_lo > 0.5 {
        // work in the reflected distribution where the interval sits in the
        // lower tail, keeping the incomplete-beta values away from 1
        return sample_beta_truncated(beta, alpha, 1.0 - upper, 1.0 - lower, rng).map(|y| 1.0 - y);
    }
    let cdf_hi = beta_reg(alpha, beta, upper);
    let mass = cdf_hi - cdf_lo;
    if !(mass >= NEGLIGIBLE_MASS) {
        return Err(Error::Sampling(format!(
            "Beta({alpha}, {beta}) has mass {mass:e} on ({lower}, {upper})"
        )));
    }
    if mass >= 0.25 {
        for _ in 0..200 {
            let x = sample_beta(alpha, beta, rng);
            if x > lower && x < upper {
                return Ok(x);
            }
        }
    }
    let target = cdf_lo + rng.open01() * mass;
    let (mut lo, mut hi) = (lower, upper);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(alpha, beta, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    Ok(x.clamp(next_up(lower), next_down(upper)))
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        f64::MIN_POSITIVE
    } else {
        f64::from_bits(x.to_bits() + 1)
    }
}

fn next_down(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

pub fn sample_dirichlet(alphas: &[f64], rng: &mut RngStream) -> Vec<f64> {
    let mut out: Vec<f64> = alphas.iter().map(|&a| sample_ln_gamma(a, rng)).collect();
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in out.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in out.iter_mut() {
        *v /= total;
    }
    out
}

/// Normal-inverse-gamma draw: `sigma2 ~ IG(shape d, scale e)` and
/// `mean | sigma2 ~ N(m, sigma2 / beta)`.
pub fn sample_nig(m: f64, beta: f64, d: f64, e: f64, rng: &mut RngStream) -> (f64, f64) {
    debug_assert!(beta > 0.0 && d > 0.0 && e > 0.0);
    let ln_var = (e.ln() - sample_ln_gamma(d, rng)).clamp(LN_VARIANCE_MIN, LN_VARIANCE_MAX);
    let variance = ln_var.exp();
    let mean = m + (variance / beta).sqrt() * sample_std_normal(rng);
    (mean, variance)
}

/// Index drawn with probability `probs[k]`. `probs` must lie on the simplex
/// within 1e-9.
pub fn sample_categorical(probs: &[f64], rng: &mut RngStream) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::Domain("empty probability vector".into()));
    }
    let mut total = 0.0;
    for &p in probs {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::Domain(format!("invalid probability {p} in {probs:?}")));
        }
        total += p;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("probabilities sum to {total}, not 1: {probs:?}")));
    }
    Ok(categorical_unnormalized(probs, total, rng))
}

/// Inverse-c.d.f. categorical draw from nonnegative `weights` summing to
/// `total`.
#[inline]
pub(crate) fn categorical_unnormalized(weights: &[f64], total: f64, rng: &mut RngStream) -> usize {
    let u = rng.open01() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = k;
        }
        acc += w;
        if u < acc {
            return k;
        }
    }
    last_positive
}

/// Bivariate normal with a precomputed Cholesky factor, reusable across
/// rejection attempts.
#[derive(Debug, Clone, Copy)]
pub struct BivariateNormal {
    mean: [f64; 2],
    l00: f64,
    l10: f64,
    l11: f64,
}

impl BivariateNormal {
    pub fn new(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<Self> {
        let scale = cov[0][0].abs().max(cov[1][1].abs()).max(f64::MIN_POSITIVE);
        let all_finite = cov.iter().flatten().chain(mean.iter()).all(|v| v.is_finite());
        if !all_finite || (cov[0][1] - cov[1][0]).abs() > 1e-12 * scale {
            return Err(Error::Domain(format!(
                "covariance {cov:?} is not a finite symmetric matrix"
            )));
        }
        let l00 = cov[0][0].sqrt();
        let l10 = cov[1][0] / l00;
        let rem = cov[1][1] - l10 * l10;
        if !(cov[0][0] > 0.0) || !(rem > 0.0) {
            return Err(Error::Domain(format!("covariance {cov:?} is not positive definite")));
        }
        Ok(Self {
            mean,
            l00,
            l10,
            l11: rem.sqrt(),
        })
    }

    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> [f64; 2] {
        let z0 = sample_std_normal(rng);
        let z1 = sample_std_normal(rng);
        [
            self.mean[0] + self.l00 * z0,
            self.mean[1] + self.l10 * z0 + self.l11 * z1,
        ]
    }
}

pub fn sample_bivariate_normal(mean: [f64; 2], cov: [[f64; 2]; 2], rng: &mut RngStream) -> Result<[f64; 2]> {
    Ok(BivariateNormal::new(mean, cov)?.sample(rng))
}
