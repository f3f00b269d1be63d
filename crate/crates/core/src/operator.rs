//! The Jacobi operator on a star-like graph: application to finitely
//! supported vectors, moments, Dirichlet truncations, potential rules and
//! the pasting of half-line operators.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::{Add, AddAssign, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BranchCoefficients, CoeffRule, CompactComponent, StarLikeGraph, VertexId};

/// Default cap on the dimension of an assembled truncation.
pub const DEFAULT_DIMENSION_CAP: usize = 2_000_000;

/// Scalar field of a finitely supported vector.
pub trait Amplitude:
    Copy + Zero + PartialEq + Add<Output = Self> + AddAssign + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn abs_sqr(self) -> f64;
    fn conj(self) -> Self;
    fn times(self, other: Self) -> Self;
}

impl Amplitude for f64 {
    fn abs_sqr(self) -> f64 {
        self * self
    }
    fn conj(self) -> Self {
        self
    }
    fn times(self, other: Self) -> Self {
        self * other
    }
}

impl Amplitude for Complex64 {
    fn abs_sqr(self) -> f64 {
        self.norm_sqr()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn times(self, other: Self) -> Self {
        self * other
    }
}

/// Vector with finite support, keyed in vertex order. Zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct FinVector<T = f64> {
    entries: BTreeMap<VertexId, T>,
}

impl<T: Amplitude> Default for FinVector<T> {
    fn default() -> Self {
        FinVector { entries: BTreeMap::new() }
    }
}

impl<T: Amplitude> FinVector<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn delta(v: VertexId, value: T) -> Self {
        let mut out = Self::new();
        out.set(v, value);
        out
    }

    pub fn get(&self, v: VertexId) -> T {
        self.entries.get(&v).copied().unwrap_or_else(T::zero)
    }

    pub fn set(&mut self, v: VertexId, value: T) {
        if value.is_zero() {
            self.entries.remove(&v);
        } else {
            self.entries.insert(v, value);
        }
    }

    pub fn add_at(&mut self, v: VertexId, value: T) {
        let next = self.get(v) + value;
        self.set(v, next);
    }

    pub fn iter(&self) -> impl Iterator<Item = (VertexId, T)> + '_ {
        self.entries.iter().map(|(&v, &x)| (v, x))
    }

    pub fn support(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.values().map(|x| x.abs_sqr()).sum::<f64>().sqrt()
    }

    /// `<self, other> = sum conj(self) * other`.
    pub fn dot(&self, other: &Self) -> T {
        let mut acc = T::zero();
        for (v, x) in self.iter() {
            if let Some(&y) = other.entries.get(&v) {
                acc += x.conj().times(y);
            }
        }
        acc
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = Self::new();
        for (v, x) in self.iter() {
            out.set(v, x * c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (v, y) in other.iter() {
            out.set(v, out.get(v) - y);
        }
        out
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (v, y) in other.iter() {
            out.add_at(v, y);
        }
        out
    }
}

impl<T: Amplitude> FromIterator<(VertexId, T)> for FinVector<T> {
    fn from_iter<I: IntoIterator<Item = (VertexId, T)>>(iter: I) -> Self {
        let mut out = FinVector::new();
        for (v, x) in iter {
            out.add_at(v, x);
        }
        out
    }
}

/// `(J psi)(v) = sum_{w ~ v} a_{vw} psi(w) + b_v psi(v)`.
pub fn apply<T: Amplitude>(g: &StarLikeGraph, psi: &FinVector<T>) -> Result<FinVector<T>> {
    let mut out = FinVector::new();
    for (v, x) in psi.iter() {
        out.add_at(v, x * g.potential(v));
        for (w, a) in g.neighbors(v)? {
            out.add_at(w, x * a);
        }
    }
    Ok(out)
}

/// `<delta_w, J^n delta_v>`.
pub fn moment(g: &StarLikeGraph, v: VertexId, w: VertexId, n: usize) -> Result<f64> {
    g.check(w)?;
    let mut psi = FinVector::delta(v, 1.0);
    g.check(v)?;
    for _ in 0..n {
        psi = apply(g, &psi)?;
    }
    Ok(psi.get(w))
}

/// Symmetric sparse matrix stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseSymMatrix {
    /// Build from upper- or lower-triangle entries; each off-diagonal entry
    /// is mirrored. Duplicate positions are summed; zeros dropped.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, x) in triplets {
            if i >= dim || j >= dim {
                return Err(Error::InvalidParams(format!("entry ({i}, {j}) outside dimension {dim}")));
            }
            *map.entry((i, j)).or_insert(0.0) += x;
            if i != j {
                *map.entry((j, i)).or_insert(0.0) += x;
            }
        }
        let mut rows = vec![Vec::new(); dim];
        for ((i, j), x) in map {
            if x != 0.0 {
                rows[i].push((j, x));
            }
        }
        Ok(SparseSymMatrix { dim, rows })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|p| self.rows[i][p].1)
            .unwrap_or(0.0)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, a)| a * x[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, x) in row {
                m[(i, j)] = x;
            }
        }
        m
    }

    /// Coordinate list, one `row col value` line per stored entry, values
    /// with 17 significant digits.
    pub fn to_coo_text(&self) -> String {
        let mut out = String::new();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, x) in row {
                writeln!(out, "{i} {j} {x:.16e}").expect("writing to a String");
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationSpec {
    /// Branch vertices with depth `<= depth` are kept.
    pub depth: usize,
}

/// Dirichlet truncation of `J` together with the vertex of each row.
#[derive(Debug, Clone)]
pub struct TruncatedOperator {
    pub matrix: SparseSymMatrix,
    pub vertices: Vec<VertexId>,
    compact_size: usize,
    depth: usize,
}

impl TruncatedOperator {
    pub fn index_of(&self, v: VertexId) -> Option<usize> {
        match v {
            VertexId::Compact(c) if c < self.compact_size => Some(c),
            VertexId::Branch(i, n) if i >= 1 && n >= 1 && n <= self.depth => {
                let idx = self.compact_size + (i - 1) * self.depth + (n - 1);
                (idx < self.vertices.len()).then_some(idx)
            }
            _ => None,
        }
    }
}

/// Matrix of `J` on `K` and branch depths `1..=depth`, coupling past the
/// cut dropped.
pub fn assemble_truncated(
    g: &StarLikeGraph,
    spec: TruncationSpec,
    dimension_cap: usize,
) -> Result<TruncatedOperator> {
    if spec.depth == 0 {
        return Err(Error::InvalidParams("truncation depth must be >= 1".into()));
    }
    let k = g.compact_size();
    let dim = k + g.m() * spec.depth;
    if dim > dimension_cap {
        return Err(Error::DimensionCap { dim, cap: dimension_cap });
    }
    let mut vertices: Vec<VertexId> = (0..k).map(VertexId::Compact).collect();
    for i in 1..=g.m() {
        vertices.extend((1..=spec.depth).map(|n| VertexId::Branch(i, n)));
    }
    let mut triplets = Vec::with_capacity(3 * dim);
    for (c, &b) in g.compact().potential.iter().enumerate() {
        triplets.push((c, c, b));
    }
    for &(u, v, w) in &g.compact().edges {
        triplets.push((u.min(v), u.max(v), w));
    }
    for i in 1..=g.m() {
        let br = g.branch(i);
        let base = k + (i - 1) * spec.depth;
        triplets.push((g.attachment(i), base, br.a(1)));
        for n in 1..=spec.depth {
            triplets.push((base + n - 1, base + n - 1, br.b(n)));
            if n < spec.depth {
                triplets.push((base + n - 1, base + n, br.a(n + 1)));
            }
        }
    }
    let matrix = SparseSymMatrix::from_triplets(dim, &triplets)?;
    Ok(TruncatedOperator { matrix, vertices, compact_size: k, depth: spec.depth })
}

/// Potential families for half-line coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialKind {
    Free,
    Periodic { values: Vec<f64> },
    /// Barriers `h * k^gamma` at the sparse sites `l0^k`.
    SparsePower { h: f64, gamma: f64, l0: u64 },
    IidUniform { low: f64, high: f64 },
}

/// Unit-weight coefficients with the requested potential. `seed` keys the
/// random family and is ignored by the deterministic ones.
pub fn make_potential(kind: &PotentialKind, seed: u64) -> Result<BranchCoefficients> {
    let b = match kind {
        PotentialKind::Free => CoeffRule::constant(0.0),
        PotentialKind::Periodic { values } => CoeffRule::Periodic { values: values.clone() },
        PotentialKind::SparsePower { h, gamma, l0 } => {
            CoeffRule::SparsePower { h: *h, gamma: *gamma, l0: *l0 }
        }
        PotentialKind::IidUniform { low, high } => {
            CoeffRule::IidUniform { low: *low, high: *high, seed, stream: 0 }
        }
    };
    let coeffs = BranchCoefficients::new(CoeffRule::constant(1.0), b);
    coeffs.validate()?;
    Ok(coeffs)
}

/// Paste half-line operators `T_i` (cyclic vector `delta_1`) along the
/// weighted adjacency `coupling`.
///
/// The first site of each factor becomes compact vertex `i`, carrying
/// `b_i(1)`; compact vertices are joined with weights `coupling[i][j]`, and
/// site `n + 1` of factor `i` becomes branch vertex `(i + 1, n)`.
pub fn paste_halflines(
    factors: &[BranchCoefficients],
    coupling: &[Vec<f64>],
) -> Result<StarLikeGraph> {
    let n = factors.len();
    if n == 0 {
        return Err(Error::InvalidParams("pasting needs at least one factor".into()));
    }
    if coupling.len() != n || coupling.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidParams(format!("coupling must be {n} x {n}")));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        if coupling[i][i] != 0.0 {
            return Err(Error::InvalidParams(format!("coupling diagonal entry {i} is non-zero")));
        }
        for j in (i + 1)..n {
            let (x, y) = (coupling[i][j], coupling[j][i]);
            if x != y {
                return Err(Error::InvalidParams(format!("coupling is asymmetric at ({i}, {j})")));
            }
            if x < 0.0 || !x.is_finite() {
                return Err(Error::NonPositiveWeight(i, j, x));
            }
            if x > 0.0 {
                edges.push((i, j, x));
            }
        }
    }
    let compact = CompactComponent {
        size: n,
        edges,
        potential: factors.iter().map(|f| f.b(1)).collect(),
        attachments: (0..n).collect(),
    };
    let branches = factors.iter().map(|f| f.clone().shifted(1)).collect();
    StarLikeGraph::new(compact, branches)
}
