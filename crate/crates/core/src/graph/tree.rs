//! Spherically homogeneous trees with eventually-trivial branching, reduced
//! to star-like form, and their growth dimension.

use serde::{Deserialize, Serialize};

use super::{BranchCoefficients, CoeffRule, CompactComponent, StarLikeGraph};
use crate::error::{Error, Result};

/// Branching numbers `b_1, b_2, ...`: the explicit prefix, then `tail` forever.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branching {
    pub prefix: Vec<u64>,
    #[serde(default = "one")]
    pub tail: u64,
}

fn one() -> u64 {
    1
}

impl Branching {
    pub fn eventually_one(prefix: Vec<u64>) -> Self {
        Branching { prefix, tail: 1 }
    }

    /// `b_n`, `n >= 1`.
    pub fn at(&self, n: usize) -> u64 {
        if n >= 1 && n <= self.prefix.len() {
            self.prefix[n - 1]
        } else {
            self.tail
        }
    }

    /// Stabilisation index `N`: `b_n = 1` for all `n > N`.
    pub fn stabilization(&self) -> Option<usize> {
        if self.tail != 1 {
            return None;
        }
        Some(self.prefix.iter().rposition(|&b| b != 1).map_or(0, |p| p + 1))
    }
}

/// Level-dependent coefficients: `a(n)` weighs edges between levels `n-1`
/// and `n`; `b(n)` is the potential at level `n` (root is level 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialCoefficients {
    pub a: CoeffRule,
    pub b: CoeffRule,
}

impl RadialCoefficients {
    pub fn free() -> Self {
        RadialCoefficients { a: CoeffRule::constant(1.0), b: CoeffRule::constant(0.0) }
    }
}

/// Build the tree as a star-like graph with `K = B_N(o)` and one branch per
/// vertex of level `N`. Vertices of `K` are numbered level by level; the
/// root is compact vertex 0.
pub fn build_sht(branching: &Branching, coeffs: &RadialCoefficients) -> Result<StarLikeGraph> {
    let n_stab = branching.stabilization().ok_or(Error::BranchingNotEventuallyOne)?;
    if branching.prefix.iter().any(|&b| b == 0) {
        return Err(Error::InvalidParams("branching numbers must be >= 1".into()));
    }
    let mut size: u64 = 1;
    let mut level_size: u64 = 1;
    for n in 1..=n_stab {
        level_size = level_size.saturating_mul(branching.at(n));
        size = size.saturating_add(level_size);
    }
    if size > super::MAX_COMPACT as u64 {
        return Err(Error::DimensionCap { dim: size as usize, cap: super::MAX_COMPACT });
    }

    let mut edges = Vec::new();
    let mut potential = vec![coeffs.b.eval(0)];
    let mut level: Vec<usize> = vec![0];
    for n in 1..=n_stab {
        let mut next = Vec::new();
        for &parent in &level {
            for _ in 0..branching.at(n) {
                let child = potential.len();
                potential.push(coeffs.b.eval(n));
                edges.push((parent, child, coeffs.a.eval(n)));
                next.push(child);
            }
        }
        level = next;
    }
    let branch = BranchCoefficients::new(coeffs.a.clone(), coeffs.b.clone()).shifted(n_stab);
    let branches = (0..level.len())
        .map(|i| BranchCoefficients {
            a: branch.a.clone().with_stream(i as u64 + 1),
            b: branch.b.clone().with_stream(i as u64 + 1),
            shift: branch.shift,
        })
        .collect();
    let compact = CompactComponent { size: potential.len(), edges, potential, attachments: level };
    StarLikeGraph::new(compact, branches)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeDimension {
    /// `log|B_n| / log n` at `n = n_max`.
    pub value: f64,
    /// `(n, log|B_n|, log|B_n| / log n)` for `n = 2..=n_max`.
    pub partial: Vec<(usize, f64, f64)>,
}

impl TreeDimension {
    /// Largest partial value over the second half of the range, a finite
    /// stand-in for the limsup.
    pub fn tail_sup(&self) -> f64 {
        let half = self.partial.len() / 2;
        self.partial[half..].iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Growth dimension diagnostic, computed in log space so that exponential
/// branching does not overflow.
pub fn tree_dimension(branching: &Branching, n_max: usize) -> Result<TreeDimension> {
    if n_max < 2 {
        return Err(Error::InvalidParams(format!("n_max = {n_max} must be >= 2")));
    }
    let mut log_sphere = 0.0f64;
    let mut log_ball = 0.0f64;
    let mut partial = Vec::with_capacity(n_max - 1);
    for n in 1..=n_max {
        let b = branching.at(n);
        if b == 0 {
            return Err(Error::InvalidParams("branching numbers must be >= 1".into()));
        }
        log_sphere += (b as f64).ln();
        log_ball = log_add_exp(log_ball, log_sphere);
        if n >= 2 {
            partial.push((n, log_ball, log_ball / (n as f64).ln()));
        }
    }
    let value = partial.last().map(|p| p.2).unwrap_or(f64::NAN);
    Ok(TreeDimension { value, partial })
}

fn log_add_exp(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}
