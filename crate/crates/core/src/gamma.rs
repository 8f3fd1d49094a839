//! Exact rational proportion vectors for balanced independent sets.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;

use crate::error::{LabError, Result};

/// Proportions `gamma_1 <= ... <= gamma_r`, all positive, summing to one.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GammaVector {
    entries: Vec<Ratio<u64>>,
    lcm_denominator: u64,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl GammaVector {
    pub fn new(mut entries: Vec<Ratio<u64>>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(LabError::InvalidGamma("gamma needs at least 2 entries".into()));
        }
        if entries.iter().any(|g| *g.numer() == 0) {
            return Err(LabError::InvalidGamma("gamma entries must be positive".into()));
        }
        let mut lcm: u128 = 1;
        for g in &entries {
            let d = u128::from(*g.denom());
            lcm = lcm / gcd(lcm, d) * d;
            if lcm > u128::from(u64::MAX) {
                return Err(LabError::InvalidGamma("gamma denominators too large".into()));
            }
        }
        let total: u128 = entries
            .iter()
            .map(|g| u128::from(*g.numer()) * (lcm / u128::from(*g.denom())))
            .sum();
        if total != lcm {
            return Err(LabError::InvalidGamma("gamma must sum to 1".into()));
        }
        entries.sort();
        Ok(GammaVector { entries, lcm_denominator: lcm as u64 })
    }

    /// Uniform proportions `(1/r, ..., 1/r)`.
    pub fn balanced(r: u32) -> Result<Self> {
        Self::new(vec![Ratio::new(1, u64::from(r)); r as usize])
    }

    pub fn entries(&self) -> &[Ratio<u64>] {
        &self.entries
    }

    pub fn r(&self) -> usize {
        self.entries.len()
    }

    pub fn lcm_denominator(&self) -> u64 {
        self.lcm_denominator
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|g| *g.numer() as f64 / *g.denom() as f64).collect()
    }

    pub fn max_f64(&self) -> f64 {
        let g = self.entries[self.entries.len() - 1];
        *g.numer() as f64 / *g.denom() as f64
    }

    pub fn product_f64(&self) -> f64 {
        self.as_f64().iter().product()
    }

    /// Exact part sizes `gamma_j * total`, ascending.
    pub fn part_sizes(&self, total: u64) -> Result<Vec<u64>> {
        self.entries
            .iter()
            .enumerate()
            .map(|(j, g)| {
                let scaled = u128::from(*g.numer()) * u128::from(total);
                let d = u128::from(*g.denom());
                if scaled % d != 0 {
                    Err(LabError::NonIntegralCapacity { index: j + 1, target: total })
                } else {
                    Ok((scaled / d) as u64)
                }
            })
            .collect()
    }

    /// Largest multiple of the common denominator that is `<= x`.
    pub fn round_down(&self, x: f64) -> u64 {
        if !(x > 0.0) {
            return 0;
        }
        let l = self.lcm_denominator;
        (x / l as f64).floor() as u64 * l
    }

    /// Smallest multiple of the common denominator that is `>= x`.
    pub fn round_up(&self, x: f64) -> u64 {
        if !(x > 0.0) {
            return 0;
        }
        let l = self.lcm_denominator;
        (x / l as f64).ceil() as u64 * l
    }
}

impl FromStr for GammaVector {
    type Err = LabError;

    /// Parses comma-separated fractions such as `1/6,1/3,1/2`. Decimals are
    /// rejected so the sum can be checked exactly.
    fn from_str(s: &str) -> Result<Self> {
        let entries = s
            .split(',')
            .map(|part| {
                let part = part.trim();
                if part.contains('.') {
                    return Err(LabError::InvalidGamma(format!(
                        "gamma entry {part:?} must be a fraction like 1/3, not a decimal"
                    )));
                }
                Ratio::<u64>::from_str(part).map_err(|_| {
                    LabError::InvalidGamma(format!("gamma entry {part:?} is not a fraction"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        GammaVector::new(entries)
    }
}

impl fmt::Display for GammaVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}/{}", g.numer(), g.denom())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_sorts() {
        let g: GammaVector = "1/2, 1/6,1/3".parse().unwrap();
        assert_eq!(g.to_string(), "1/6,1/3,1/2");
        assert_eq!(g.lcm_denominator(), 6);
        assert_eq!(g.part_sizes(12).unwrap(), vec![2, 4, 6]);
        assert!(matches!(g.part_sizes(9), Err(LabError::NonIntegralCapacity { index: 1, .. })));
    }

    #[test]
    fn rejects_bad_vectors() {
        let err = "1/2,1/3".parse::<GammaVector>().unwrap_err();
        assert_eq!(err.to_string(), "gamma must sum to 1");
        assert!("0.5,0.5".parse::<GammaVector>().is_err());
        assert!("0/1,1/1".parse::<GammaVector>().is_err());
        assert!("1/1".parse::<GammaVector>().is_err());
        assert!("a/b,1/2".parse::<GammaVector>().is_err());
    }

    #[test]
    fn reduces_fractions() {
        let g: GammaVector = "2/4,3/6".parse().unwrap();
        assert_eq!(g.lcm_denominator(), 2);
        assert_eq!(g, GammaVector::balanced(2).unwrap());
    }

    #[test]
    fn rounding_to_multiples() {
        let g: GammaVector = "1/6,1/3,1/2".parse().unwrap();
        assert_eq!(g.round_down(17.08), 12);
        assert_eq!(g.round_down(18.0), 18);
        assert_eq!(g.round_up(17.08), 18);
        assert_eq!(g.round_down(-1.0), 0);
    }
}
