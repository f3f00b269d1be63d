//! Half-line eigenvalue recursion, transfer matrices, Jitomirskaya–Last
//! norms, subordinacy diagnostics and Weyl m-functions.
//!
//! Site 0 is the boundary site (the attachment vertex for a branch) and
//! `a(n)` weighs the edge `(n-1, n)`. Solutions satisfy
//! `a(n) g(n-1) + b(n) g(n) + a(n+1) g(n+1) = E g(n)` for `n >= 1`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::BranchCoefficients;

const BLOCK: usize = 64;

/// Default depth cap of the m-function continued fraction.
pub const M_DEPTH_CAP: usize = 1 << 20;

/// Threshold below which a ratio curve certifies a subordinate solution.
pub const SUBORDINACY_THRESHOLD: f64 = 1e-6;

/// Solution values `g(0..=horizon)`. Values are stored as mantissas with a
/// log-scale per block of 64 sites so growing solutions stay finite.
#[derive(Debug, Clone)]
pub struct HalfLineSolution {
    pub coeffs: BranchCoefficients,
    pub energy: f64,
    pub initial: (f64, f64),
    mantissa: Vec<f64>,
    log_scale: Vec<f64>,
}

impl HalfLineSolution {
    pub fn horizon(&self) -> usize {
        self.mantissa.len() - 1
    }

    /// `g(n)`; may overflow to infinity for strongly growing solutions.
    pub fn value(&self, n: usize) -> f64 {
        self.mantissa[n] * self.log_scale[n / BLOCK].exp()
    }

    /// `ln |g(n)|`.
    pub fn log_abs(&self, n: usize) -> f64 {
        self.mantissa[n].abs().ln() + self.log_scale[n / BLOCK]
    }

    /// `ln ||g||_L`.
    pub fn log_jl_norm(&self, l: f64) -> Result<f64> {
        let (whole, frac) = split_length(l)?;
        if whole + 1 > self.horizon() {
            return Err(Error::InsufficientHorizon { horizon: self.horizon(), needed: whole + 1 });
        }
        let mut acc = f64::NEG_INFINITY;
        let mut k = 1;
        while k <= whole {
            let block = k / BLOCK;
            let end = ((block + 1) * BLOCK).min(whole + 1);
            let s: f64 = self.mantissa[k..end].iter().map(|x| x * x).sum();
            if s > 0.0 {
                acc = log_add(acc, s.ln() + 2.0 * self.log_scale[block]);
            }
            k = end;
        }
        if frac > 0.0 {
            let x = self.mantissa[whole + 1];
            if x != 0.0 {
                acc = log_add(acc, (frac * x * x).ln() + 2.0 * self.log_scale[(whole + 1) / BLOCK]);
            }
        }
        Ok(0.5 * acc)
    }
}

fn split_length(l: f64) -> Result<(usize, f64)> {
    if !(l >= 1.0) || !l.is_finite() {
        return Err(Error::InvalidParams(format!("length L = {l} must be >= 1")));
    }
    let whole = l.floor();
    Ok((whole as usize, l - whole))
}

fn log_add(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}

/// Run the recursion from `(g(0), g(1))`.
pub fn solve_from(
    coeffs: &BranchCoefficients,
    energy: f64,
    initial: (f64, f64),
    horizon: usize,
) -> Result<HalfLineSolution> {
    if horizon < 2 {
        return Err(Error::InvalidParams(format!("horizon {horizon} must be >= 2")));
    }
    let mut mantissa = Vec::with_capacity(horizon + 1);
    let mut log_scale = vec![0.0];
    mantissa.push(initial.0);
    mantissa.push(initial.1);
    let (mut prev, mut cur) = initial;
    let mut a_cur = coeffs.a(1);
    for n in 1..horizon {
        let a_next = coeffs.a(n + 1);
        let next = ((energy - coeffs.b(n)) * cur - a_cur * prev) / a_next;
        prev = cur;
        cur = next;
        a_cur = a_next;
        if (n + 1) % BLOCK == 0 {
            let s = prev.abs().max(cur.abs());
            let shift = if s > 0.0 && s.is_finite() { s.ln() } else { 0.0 };
            if shift != 0.0 {
                prev /= s;
                cur /= s;
            }
            let last = *log_scale.last().expect("one block at least");
            log_scale.push(last + shift);
        }
        mantissa.push(cur);
    }
    Ok(HalfLineSolution { coeffs: coeffs.clone(), energy, initial, mantissa, log_scale })
}

/// The solution with boundary data `(g(0), g(1)) = (-sin theta, cos theta)`.
pub fn solve(
    coeffs: &BranchCoefficients,
    energy: f64,
    theta: f64,
    horizon: usize,
) -> Result<HalfLineSolution> {
    solve_from(coeffs, energy, (-theta.sin(), theta.cos()), horizon)
}

/// Transfer matrix taking `(g(n-1), g(n))` to `(g(n), g(n+1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer2(pub [[f64; 2]; 2]);

impl Transfer2 {
    pub fn at(coeffs: &BranchCoefficients, energy: f64, n: usize) -> Self {
        let (a, a1) = (coeffs.a(n), coeffs.a(n + 1));
        Transfer2([[0.0, 1.0], [-a / a1, (energy - coeffs.b(n)) / a1]])
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn apply(&self, x: (f64, f64)) -> (f64, f64) {
        (
            self.0[0][0] * x.0 + self.0[0][1] * x.1,
            self.0[1][0] * x.0 + self.0[1][1] * x.1,
        )
    }

    /// `self * other`.
    pub fn compose(&self, other: &Transfer2) -> Transfer2 {
        let (p, q) = (self.0, other.0);
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = p[i][0] * q[0][j] + p[i][1] * q[1][j];
            }
        }
        Transfer2(out)
    }
}

/// Jitomirskaya–Last norm
/// `(sum_{k=1}^{floor L} |g(k)|^2 + (L - floor L) |g(floor L + 1)|^2)^{1/2}`.
pub fn jl_norm(sol: &HalfLineSolution, l: f64) -> Result<f64> {
    Ok(sol.log_jl_norm(l)?.exp())
}

/// `||g_theta||_L / ||g_eta||_L`.
pub fn subordinacy_ratio(
    coeffs: &BranchCoefficients,
    energy: f64,
    theta: f64,
    eta: f64,
    l: f64,
) -> Result<f64> {
    if angles_equal(theta, eta) {
        return Err(Error::EqualAngles);
    }
    let (whole, _) = split_length(l)?;
    let horizon = (whole + 1).max(2);
    let gt = solve(coeffs, energy, theta, horizon)?.log_jl_norm(l)?;
    let ge = solve(coeffs, energy, eta, horizon)?.log_jl_norm(l)?;
    let tiny = 1e-300f64.ln();
    if gt < tiny && ge < tiny {
        return Err(Error::DegenerateNorms);
    }
    Ok((gt - ge).exp())
}

fn angles_equal(theta: f64, eta: f64) -> bool {
    let d = (theta - eta).rem_euclid(std::f64::consts::PI);
    d == 0.0 || (std::f64::consts::PI - d) < 1e-15
}

/// Ratios at `L / 2^j` for `j = doublings, ..., 0`, ascending in `L`.
pub fn subordinacy_curve(
    coeffs: &BranchCoefficients,
    energy: f64,
    theta: f64,
    eta: f64,
    l: f64,
    doublings: usize,
) -> Result<Vec<(f64, f64)>> {
    (0..=doublings)
        .rev()
        .map(|j| {
            let lj = (l / (1u64 << j) as f64).max(1.0);
            Ok((lj, subordinacy_ratio(coeffs, energy, theta, eta, lj)?))
        })
        .collect()
}

/// Threshold-plus-trend certificate: the last ratio is below `threshold`
/// and the ratio decreased over each of the last three doublings.
pub fn certify_subordinate(curve: &[(f64, f64)], threshold: f64) -> bool {
    if curve.len() < 4 {
        return false;
    }
    let tail = &curve[curve.len() - 4..];
    tail[3].1 < threshold && tail.windows(2).all(|w| w[1].1 < w[0].1)
}

/// Minimizer of `||g_theta||_L` over boundary angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubordinateDirection {
    pub theta: f64,
    /// Ratio of the small to the large Gram eigenvalue.
    pub condition: f64,
}

/// Gram matrix of the fundamental solutions `u1` (theta = 0) and `u2`
/// (theta = pi/2) in the JL norm at scale `L`, divided by a common positive
/// factor.
pub fn gram_matrix(coeffs: &BranchCoefficients, energy: f64, l: f64) -> Result<[[f64; 2]; 2]> {
    let (whole, frac) = split_length(l)?;
    let mut g = [[0.0f64; 2]; 2];
    let (mut p1, mut c1) = (0.0f64, 1.0f64);
    let (mut p2, mut c2) = (-1.0f64, 0.0f64);
    let mut a_cur = coeffs.a(1);
    for n in 1..=whole + 1 {
        if n > 1 {
            let a_next = coeffs.a(n);
            let e = energy - coeffs.b(n - 1);
            let n1 = (e * c1 - a_cur * p1) / a_next;
            let n2 = (e * c2 - a_cur * p2) / a_next;
            (p1, c1, p2, c2) = (c1, n1, c2, n2);
            a_cur = a_next;
        }
        let w = if n <= whole { 1.0 } else { frac };
        g[0][0] += w * c1 * c1;
        g[0][1] += w * c1 * c2;
        g[1][1] += w * c2 * c2;
        // rescale the running state and the sums together
        let s = [p1, c1, p2, c2].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if n % BLOCK == 0 && s > 0.0 {
            (p1, c1, p2, c2) = (p1 / s, c1 / s, p2 / s, c2 / s);
            for x in g.iter_mut().flatten() {
                *x /= s * s;
            }
        }
    }
    g[1][0] = g[0][1];
    Ok(g)
}

/// Smallest-eigenvalue direction of the Gram matrix; `theta` in `[0, pi)`.
/// A Gram matrix proportional to the identity reports `theta = 0`.
pub fn subordinate_direction(
    coeffs: &BranchCoefficients,
    energy: f64,
    l: f64,
) -> Result<SubordinateDirection> {
    if !(l >= 2.0) {
        return Err(Error::InvalidParams(format!("length L = {l} must be >= 2")));
    }
    let g = gram_matrix(coeffs, energy, l)?;
    let (p, q, r) = (g[0][0], g[0][1], g[1][1]);
    let mean = 0.5 * (p + r);
    let radius = (0.25 * (p - r) * (p - r) + q * q).sqrt();
    let lmax = mean + radius;
    let lmin = (mean - radius).max(0.0);
    if radius <= 1e-14 * mean.abs() {
        return Ok(SubordinateDirection { theta: 0.0, condition: 1.0 });
    }
    // eigenvector (cos t, sin t) for lmin
    let (x, y) = if (p - lmin).abs() >= (r - lmin).abs() {
        (-q, p - lmin)
    } else {
        (r - lmin, -q)
    };
    let theta = y.atan2(x).rem_euclid(std::f64::consts::PI);
    let theta = if std::f64::consts::PI - theta < 1e-15 { 0.0 } else { theta };
    Ok(SubordinateDirection { theta, condition: lmin / lmax })
}

/// Root of `a^2 m^2 + (z - b) m + 1 = 0` with `Im m > 0`: the m-function of
/// the constant half-line.
pub fn constant_m(a: f64, b: f64, z: Complex64) -> Complex64 {
    let w = z - b;
    let disc = (w * w - 4.0 * a * a).sqrt();
    let r1 = (-w + disc) / (2.0 * a * a);
    let r2 = (-w - disc) / (2.0 * a * a);
    if r1.im > r2.im {
        r1
    } else {
        r2
    }
}

/// Weyl function `m(z) = <delta_1, (J0 - z)^{-1} delta_1>` of the half-line
/// on sites `n >= 1`, by downward continued fraction
/// `m_n = 1 / (b(n) - z - a(n+1)^2 m_{n+1})`.
///
/// Rules that are constant from some site on use the exact constant tail;
/// otherwise the depth is doubled from 64 until successive values differ by
/// less than `tol * max(1, |m|)`.
pub fn m_function(coeffs: &BranchCoefficients, z: Complex64, tol: f64) -> Result<Complex64> {
    m_function_capped(coeffs, z, tol, M_DEPTH_CAP)
}

pub fn m_function_capped(
    coeffs: &BranchCoefficients,
    z: Complex64,
    tol: f64,
    depth_cap: usize,
) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::NotUpperHalfPlane(z));
    }
    if let Some((n0, a, b)) = coeffs.constant_tail() {
        let mut m = constant_m(a, b, z);
        for n in (1..n0).rev() {
            m = 1.0 / (coeffs.b(n) - z - coeffs.a(n + 1).powi(2) * m);
        }
        return Ok(m);
    }
    let mut depth = 64usize.min(depth_cap);
    let mut last = continued_fraction(coeffs, z, depth);
    loop {
        if depth >= depth_cap {
            return Err(Error::MFunctionNonConvergence { z, depth, last_change: f64::NAN });
        }
        depth = (2 * depth).min(depth_cap);
        let next = continued_fraction(coeffs, z, depth);
        let change = (next - last).norm();
        if change < tol * next.norm().max(1.0) {
            return Ok(next);
        }
        if depth >= depth_cap {
            return Err(Error::MFunctionNonConvergence { z, depth, last_change: change });
        }
        last = next;
    }
}

fn continued_fraction(coeffs: &BranchCoefficients, z: Complex64, depth: usize) -> Complex64 {
    let mut m = Complex64::new(0.0, 0.0);
    for n in (1..=depth).rev() {
        m = 1.0 / (coeffs.b(n) - z - coeffs.a(n + 1).powi(2) * m);
    }
    m
}

/// Eigenvalues, ascending, of the half-line restricted to sites `1..=n`
/// with Dirichlet conditions at `0` and `n + 1`, by Sturm bisection.
pub fn dirichlet_eigenvalues(coeffs: &BranchCoefficients, n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let diag: Vec<f64> = (1..=n).map(|k| coeffs.b(k)).collect();
    let off2: Vec<f64> = (2..=n).map(|k| coeffs.a(k).powi(2)).collect();
    let radius = (1..=n + 1).map(|k| coeffs.a(k)).fold(0.0, f64::max);
    let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min) - 2.0 * radius - 1.0;
    let hi = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 2.0 * radius + 1.0;
    (0..n)
        .map(|k| {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if sturm_count(&diag, &off2, mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Number of eigenvalues strictly below `x`.
fn sturm_count(diag: &[f64], off2: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for k in 1..diag.len() {
        let prev = if q == 0.0 { f64::EPSILON } else { q };
        q = diag[k] - x - off2[k - 1] / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}
