//! Closed-form statistical and computational thresholds, first-moment
//! counts (in natural-log space) and the greedy acceptance probability.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{LabError, Result};
use crate::gamma::GammaVector;
use crate::sampling::Model;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub model: Model,
    pub n: u64,
    pub r: u32,
    pub p: f64,
    pub b: f64,
    pub alpha_stat: f64,
    pub alpha_comp: f64,
    /// `alpha_stat / alpha_comp`.
    pub gap: f64,
}

fn check_open_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(LabError::InvalidProbability(p))
    }
}

fn check_closed_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(LabError::InvalidProbability(p))
    }
}

fn check_n_r(n: u64, r: u32) -> Result<()> {
    if r < 2 || n < u64::from(r) {
        return Err(LabError::InvalidSpec(format!("thresholds need n >= r >= 2 (n = {n}, r = {r})")));
    }
    Ok(())
}

/// `log_b n` with `b = 1/(1-p)`.
pub fn log_b(n: f64, p: f64) -> f64 {
    n.ln() / -(-p).ln_1p()
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// `C(n, k)` as a float, exact while it fits in 53 bits.
pub fn binomial_f64(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    // intermediate quotients are exact integers; rounding strips division noise
    if acc < 9.0e15 {
        acc.round()
    } else {
        acc
    }
}

/// `ln C(n, k)`; sums logarithms for short products, log-gamma otherwise.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    if k <= 10_000 {
        (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
    } else {
        ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
    }
}

pub fn thresholds_uniform(n: u64, r: u32, p: f64) -> Result<ThresholdReport> {
    check_n_r(n, r)?;
    check_open_p(p)?;
    let lb = log_b(n as f64, p);
    let exp = 1.0 / f64::from(r - 1);
    let alpha_stat = (factorial(r) * lb).powf(exp);
    let alpha_comp = (factorial(r - 1) * lb).powf(exp);
    Ok(ThresholdReport {
        model: Model::Uniform,
        n,
        r,
        p,
        b: 1.0 / (1.0 - p),
        alpha_stat,
        alpha_comp,
        gap: alpha_stat / alpha_comp,
    })
}

pub fn thresholds_balanced(n: u64, r: u32, p: f64, gamma: &GammaVector) -> Result<ThresholdReport> {
    check_n_r(n, r)?;
    check_open_p(p)?;
    if gamma.r() != r as usize {
        return Err(LabError::InvalidGamma(format!(
            "gamma has {} entries but r = {r}",
            gamma.r()
        )));
    }
    let lb = log_b(n as f64, p);
    let exp = 1.0 / f64::from(r - 1);
    let prod = gamma.product_f64();
    let alpha_stat = (lb / prod).powf(exp);
    let alpha_comp = (lb * gamma.max_f64() / prod).powf(exp);
    Ok(ThresholdReport {
        model: Model::Partite,
        n,
        r,
        p,
        b: 1.0 / (1.0 - p),
        alpha_stat,
        alpha_comp,
        gap: alpha_stat / alpha_comp,
    })
}

/// `ln E[Z_alpha] = ln C(n, alpha) - C(alpha, r) ln b`.
pub fn log_expected_z_uniform(n: u64, r: u32, p: f64, alpha: u64) -> Result<f64> {
    check_closed_p(p)?;
    if alpha > n {
        return Err(LabError::InvalidConfig(format!("alpha = {alpha} exceeds n = {n}")));
    }
    let tuples = binomial_f64(alpha, u64::from(r));
    let mut value = ln_binomial(n, alpha);
    if tuples > 0.0 {
        value += tuples * (-p).ln_1p();
    }
    Ok(value)
}

/// `ln E[Z_alpha(gamma)]` for the identity assignment of proportions to
/// parts: `sum_i ln C(n, gamma_i alpha) + alpha^r prod(gamma_i) ln(1-p)`.
pub fn log_expected_z_balanced(n: u64, p: f64, gamma: &GammaVector, alpha: u64) -> Result<f64> {
    check_closed_p(p)?;
    let sizes = gamma.part_sizes(alpha)?;
    let mut value: f64 = sizes.iter().map(|&k| ln_binomial(n, k)).sum();
    let transversals: f64 = sizes.iter().map(|&k| k as f64).product();
    if transversals > 0.0 {
        value += transversals * (-p).ln_1p();
    }
    Ok(value)
}

/// Expected number of vertex sets that are gamma-balanced under *some*
/// assignment of proportions to parts, each set counted once. Distinct
/// part-size vectors give disjoint families, so this is the identity-case
/// moment times the number of distinct arrangements of the part sizes.
pub fn log_expected_z_balanced_any_assignment(
    n: u64,
    p: f64,
    gamma: &GammaVector,
    alpha: u64,
) -> Result<f64> {
    let base = log_expected_z_balanced(n, p, gamma, alpha)?;
    let sizes = gamma.part_sizes(alpha)?;
    let mut ln_arrangements = ln_gamma(sizes.len() as f64 + 1.0);
    let mut i = 0;
    while i < sizes.len() {
        let j = sizes[i..].iter().take_while(|&&s| s == sizes[i]).count();
        ln_arrangements -= ln_gamma(j as f64 + 1.0);
        i += j;
    }
    Ok(base + ln_arrangements)
}

/// Probability that a fresh vertex joins a greedy set of size `i - 1`:
/// `(1-p)^C(i-1, r-1)`.
pub fn acceptance_prob(i: u64, r: u32, p: f64) -> f64 {
    let c = if i == 0 { 0.0 } else { binomial_f64(i - 1, u64::from(r - 1)) };
    if c == 0.0 {
        return 1.0;
    }
    let q = 1.0 - p;
    if c <= f64::from(i32::MAX) {
        q.powi(c as i32)
    } else {
        q.powf(c)
    }
}
