//! Deterministic coefficient rules for branch weights and potentials.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A pure function `n -> value` with a declared bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoeffRule {
    Constant { value: f64 },
    Periodic { values: Vec<f64> },
    /// `h * k^gamma` at sites `n = l0^k` (k >= 1), zero elsewhere.
    SparsePower { h: f64, gamma: f64, l0: u64 },
    /// Uniform on `[low, high]`, keyed by `(seed, stream, n)` through the
    /// ChaCha block counter so values do not depend on query order.
    IidUniform {
        low: f64,
        high: f64,
        seed: u64,
        #[serde(default)]
        stream: u64,
    },
    /// Explicit values for `n = 1..=values.len()`, then `tail`.
    Table { values: Vec<f64>, tail: f64 },
}

impl CoeffRule {
    pub fn constant(value: f64) -> Self {
        CoeffRule::Constant { value }
    }

    pub fn eval(&self, n: usize) -> f64 {
        match self {
            CoeffRule::Constant { value } => *value,
            CoeffRule::Periodic { values } => values[n % values.len()],
            CoeffRule::SparsePower { h, gamma, l0 } => match sparse_exponent(n as u64, *l0) {
                Some(k) if k >= 1 => h * (k as f64).powf(*gamma),
                _ => 0.0,
            },
            CoeffRule::IidUniform {
                low,
                high,
                seed,
                stream,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(*stream);
                rng.set_word_pos(2 * n as u128);
                let bits = rng.next_u64() >> 11;
                let unit = bits as f64 / (1u64 << 53) as f64;
                low + (high - low) * unit
            }
            CoeffRule::Table { values, tail } => {
                if n >= 1 && n <= values.len() {
                    values[n - 1]
                } else {
                    *tail
                }
            }
        }
    }

    /// Upper bound on `|eval(n)|` over all representable `n`.
    pub fn bound(&self) -> f64 {
        match self {
            CoeffRule::Constant { value } => value.abs(),
            CoeffRule::Periodic { values } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            CoeffRule::SparsePower { h, gamma, l0 } => {
                let k_max = max_sparse_exponent(*l0).max(1) as f64;
                h.abs() * k_max.powf(*gamma).max(1.0)
            }
            CoeffRule::IidUniform { low, high, .. } => low.abs().max(high.abs()),
            CoeffRule::Table { values, tail } => {
                values.iter().fold(tail.abs(), |m, v| m.max(v.abs()))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64, what: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::UnboundedRule(format!("{what} is not finite")))
            }
        };
        match self {
            CoeffRule::Constant { value } => finite(*value, "constant value")?,
            CoeffRule::Periodic { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidParams("periodic rule needs a non-empty period".into()));
                }
                for v in values {
                    finite(*v, "periodic value")?;
                }
            }
            CoeffRule::SparsePower { h, gamma, l0 } => {
                finite(*h, "sparse height")?;
                finite(*gamma, "sparse exponent")?;
                if *l0 < 2 {
                    return Err(Error::InvalidParams(format!("sparse base l0 = {l0} must be >= 2")));
                }
            }
            CoeffRule::IidUniform { low, high, .. } => {
                finite(*low, "uniform low")?;
                finite(*high, "uniform high")?;
                if low > high {
                    return Err(Error::InvalidParams(format!("uniform range [{low}, {high}] is empty")));
                }
            }
            CoeffRule::Table { values, tail } => {
                finite(*tail, "table tail")?;
                for v in values {
                    finite(*v, "table value")?;
                }
            }
        }
        if !self.bound().is_finite() {
            return Err(Error::UnboundedRule(format!("{self:?}")));
        }
        Ok(())
    }

    /// Greatest lower bound of the rule's values, used to check edge weights.
    pub fn infimum(&self) -> f64 {
        match self {
            CoeffRule::Constant { value } => *value,
            CoeffRule::Periodic { values } => values.iter().cloned().fold(f64::INFINITY, f64::min),
            CoeffRule::SparsePower { h, .. } => h.min(0.0),
            CoeffRule::IidUniform { low, .. } => *low,
            CoeffRule::Table { values, tail } => values.iter().cloned().fold(*tail, f64::min),
        }
    }

    /// `Some((n0, c))` when the rule equals `c` for every `n >= n0`.
    pub fn constant_from(&self) -> Option<(usize, f64)> {
        match self {
            CoeffRule::Constant { value } => Some((0, *value)),
            CoeffRule::Periodic { values } if values.iter().all(|v| *v == values[0]) => {
                Some((0, values[0]))
            }
            CoeffRule::Table { values, tail } => Some((values.len() + 1, *tail)),
            _ => None,
        }
    }

    /// Re-key a random rule; other rules are returned unchanged.
    pub fn with_stream(mut self, branch: u64) -> Self {
        if let CoeffRule::IidUniform { stream, .. } = &mut self {
            *stream = branch;
        }
        self
    }
}

fn sparse_exponent(n: u64, base: u64) -> Option<u32> {
    if n == 0 || base < 2 {
        return None;
    }
    let mut k = 0;
    let mut rest = n;
    while rest % base == 0 {
        rest /= base;
        k += 1;
    }
    (rest == 1).then_some(k)
}

fn max_sparse_exponent(base: u64) -> u32 {
    // sites are addressed with usize; 2^53 is far beyond any horizon used
    let limit = 1u64 << 53;
    let mut k = 0;
    let mut p: u64 = 1;
    while let Some(next) = p.checked_mul(base) {
        if next > limit {
            break;
        }
        p = next;
        k += 1;
    }
    k
}

/// Weights `a(n)` (edge `(n-1, n)`) and potentials `b(n)` along one branch,
/// for `n >= 1`. `shift` offsets both rules: `a(n) = a_rule(n + shift)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchCoefficients {
    pub a: CoeffRule,
    pub b: CoeffRule,
    #[serde(default)]
    pub shift: usize,
}

impl BranchCoefficients {
    pub fn new(a: CoeffRule, b: CoeffRule) -> Self {
        BranchCoefficients { a, b, shift: 0 }
    }

    /// Unit weights and zero potential.
    pub fn free() -> Self {
        Self::new(CoeffRule::constant(1.0), CoeffRule::constant(0.0))
    }

    pub fn shifted(mut self, by: usize) -> Self {
        self.shift += by;
        self
    }

    #[inline]
    pub fn a(&self, n: usize) -> f64 {
        self.a.eval(n + self.shift)
    }

    #[inline]
    pub fn b(&self, n: usize) -> f64 {
        self.b.eval(n + self.shift)
    }

    pub fn bound(&self) -> f64 {
        self.a.bound().max(self.b.bound())
    }

    pub fn validate(&self) -> Result<()> {
        self.a.validate()?;
        self.b.validate()?;
        if !(self.a.infimum() > 0.0) {
            return Err(Error::InvalidParams(format!(
                "branch weights must be positive, rule {:?} reaches {}",
                self.a,
                self.a.infimum()
            )));
        }
        Ok(())
    }

    /// `Some((n0, a, b))` when both coefficients are constant for branch
    /// sites `n >= n0`.
    pub fn constant_tail(&self) -> Option<(usize, f64, f64)> {
        let (na, a) = self.a.constant_from()?;
        let (nb, b) = self.b.constant_from()?;
        let n0 = na.max(nb).saturating_sub(self.shift).max(1);
        Some((n0, a, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_power_sites() {
        let rule = CoeffRule::SparsePower { h: 1.0, gamma: 0.5, l0: 2 };
        for k in 1..20u32 {
            let n = 1usize << k;
            assert!((rule.eval(n) - (k as f64).sqrt()).abs() < 1e-15);
            if n > 2 {
                assert_eq!(rule.eval(n - 1), 0.0);
                assert_eq!(rule.eval(n + 1), 0.0);
            }
        }
        assert_eq!(rule.eval(1), 0.0);
        assert_eq!(rule.eval(3), 0.0);
        assert_eq!(rule.eval(6), 0.0);
    }

    #[test]
    fn periodic_alternates() {
        let rule = CoeffRule::Periodic { values: vec![0.0, 1.0] };
        assert_eq!(rule.eval(1), 1.0);
        assert_eq!(rule.eval(2), 0.0);
        assert_eq!(rule.eval(3), 1.0);
    }

    #[test]
    fn iid_is_order_independent_and_in_range() {
        let rule = CoeffRule::IidUniform { low: -1.0, high: 2.0, seed: 42, stream: 3 };
        let forward: Vec<f64> = (0..100).map(|n| rule.eval(n)).collect();
        let backward: Vec<f64> = (0..100).rev().map(|n| rule.eval(n)).collect();
        for (n, v) in forward.iter().enumerate() {
            assert_eq!(*v, backward[99 - n]);
            assert!((-1.0..=2.0).contains(v));
        }
        let other = rule.clone().with_stream(4);
        assert_ne!(rule.eval(10), other.eval(10));
    }

    #[test]
    fn table_and_shift() {
        let c = BranchCoefficients::new(
            CoeffRule::Table { values: vec![2.0, 3.0], tail: 1.0 },
            CoeffRule::constant(0.5),
        );
        assert_eq!(c.a(1), 2.0);
        assert_eq!(c.a(2), 3.0);
        assert_eq!(c.a(3), 1.0);
        let s = c.clone().shifted(1);
        assert_eq!(s.a(1), 3.0);
        assert_eq!(c.constant_tail(), Some((3, 1.0, 0.5)));
        assert_eq!(s.constant_tail(), Some((2, 1.0, 0.5)));
    }

    #[test]
    fn rejects_bad_rules() {
        assert!(CoeffRule::Periodic { values: vec![] }.validate().is_err());
        assert!(CoeffRule::constant(f64::INFINITY).validate().is_err());
        let zero_weight = BranchCoefficients::new(CoeffRule::constant(0.0), CoeffRule::constant(0.0));
        assert!(zero_weight.validate().is_err());
        let sparse_weight = BranchCoefficients::new(
            CoeffRule::SparsePower { h: 1.0, gamma: 0.0, l0: 2 },
            CoeffRule::constant(0.0),
        );
        assert!(sparse_weight.validate().is_err());
    }
}
