//! Brute-force references used to check the primary modules: a cyclic
//! Jacobi eigensolver, Gaussian-elimination resolvents, atomic spectral
//! measures of finite matrices, exhaustive path sums and a dense solve of
//! the branch reconstruction constraints.
//!
//! Nothing here calls into the numerical code of the other modules; graphs
//! and sparse matrices are only read through their accessors.

use std::collections::{BTreeMap, VecDeque};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::{StarLikeGraph, VertexId};
use crate::operator::SparseSymMatrix;

pub const DENSE_CAP: usize = 5000;

#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[k]` belongs to `eigenvalues[k]`, unit length.
    pub eigenvectors: Vec<Vec<f64>>,
    pub dim: usize,
}

fn densify(a: &SparseSymMatrix) -> Vec<Vec<f64>> {
    let n = a.dim();
    let mut d = vec![vec![0.0; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        for &(j, x) in a.row(i) {
            row[j] = x;
        }
    }
    d
}

/// Full eigendecomposition by cyclic Jacobi rotations.
pub fn dense_eig(a: &SparseSymMatrix) -> Result<DenseSpectrum> {
    let n = a.dim();
    if n > DENSE_CAP {
        return Err(Error::DenseCapExceeded { dim: n, cap: DENSE_CAP });
    }
    let mut m = densify(a);
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let total: f64 = m.iter().flatten().map(|x| x * x).sum::<f64>();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].total_cmp(&m[j][j]));
    Ok(DenseSpectrum {
        eigenvalues: order.iter().map(|&k| m[k][k]).collect(),
        eigenvectors: order.iter().map(|&k| v.iter().map(|row| row[k]).collect()).collect(),
        dim: n,
    })
}

/// Solve `A X = B` for square complex `A` by Gaussian elimination with
/// partial pivoting. Zero multipliers and zero pivot-row entries are
/// skipped, which keeps banded and arrow-shaped systems cheap.
pub fn complex_solve(
    mut a: Vec<Vec<Complex64>>,
    mut b: Vec<Vec<Complex64>>,
) -> Result<Vec<Vec<Complex64>>> {
    let n = a.len();
    let nrhs = b.first().map_or(0, Vec::len);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].norm().total_cmp(&a[j][k].norm()))
            .expect("non-empty range");
        if a[p][k].norm() == 0.0 {
            return Err(Error::SingularSystem);
        }
        a.swap(k, p);
        b.swap(k, p);
        let pivot = a[k][k];
        let cols: Vec<usize> = ((k + 1)..n).filter(|&j| a[k][j] != Complex64::new(0.0, 0.0)).collect();
        let pivot_row: Vec<Complex64> = cols.iter().map(|&j| a[k][j]).collect();
        let pivot_rhs = b[k].clone();
        for i in (k + 1)..n {
            if a[i][k] == Complex64::new(0.0, 0.0) {
                continue;
            }
            let f = a[i][k] / pivot;
            a[i][k] = Complex64::new(0.0, 0.0);
            for (&j, &x) in cols.iter().zip(&pivot_row) {
                a[i][j] -= f * x;
            }
            for r in 0..nrhs {
                b[i][r] -= f * pivot_rhs[r];
            }
        }
    }
    for k in (0..n).rev() {
        for r in 0..nrhs {
            let mut acc = b[k][r];
            for j in (k + 1)..n {
                if a[k][j] != Complex64::new(0.0, 0.0) {
                    acc -= a[k][j] * b[j][r];
                }
            }
            b[k][r] = acc / a[k][k];
        }
    }
    Ok(b)
}

/// Columns `cols` of `(A - z)^{-1}`, each of length `dim`.
pub fn dense_resolvent_columns(
    a: &SparseSymMatrix,
    z: Complex64,
    cols: &[usize],
) -> Result<Vec<Vec<Complex64>>> {
    let n = a.dim();
    let mut m: Vec<Vec<Complex64>> = densify(a)
        .into_iter()
        .map(|row| row.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
        .collect();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] -= z;
    }
    let mut rhs = vec![vec![Complex64::new(0.0, 0.0); cols.len()]; n];
    for (r, &c) in cols.iter().enumerate() {
        rhs[c][r] = Complex64::new(1.0, 0.0);
    }
    let x = complex_solve(m, rhs)?;
    Ok((0..cols.len()).map(|r| x.iter().map(|row| row[r]).collect()).collect())
}

/// `<(A - z)^{-1} delta_v, delta_u>` by a linear solve.
pub fn dense_resolvent(a: &SparseSymMatrix, z: Complex64, u: usize, v: usize) -> Result<Complex64> {
    Ok(dense_resolvent_columns(a, z, &[v])?[0][u])
}

/// `sum_k <v_k, delta_u> <v_k, delta_v> / (lambda_k - z)`.
pub fn eigen_resolvent(spec: &DenseSpectrum, z: Complex64, u: usize, v: usize) -> Complex64 {
    spec.eigenvalues
        .iter()
        .zip(&spec.eigenvectors)
        .map(|(&l, x)| Complex64::new(x[u] * x[v], 0.0) / (l - z))
        .sum()
}

/// Atoms `(E_k, <P_k delta_u, delta_v>)` of the spectral measure `mu_uv`;
/// eigenvalues closer than `1e-9 * max(1, |A|)` are merged into one atom.
pub fn atomic_measures(a: &SparseSymMatrix, u: usize, v: usize) -> Result<Vec<(f64, f64)>> {
    let spec = dense_eig(a)?;
    Ok(atoms_from(&spec, u, v))
}

pub fn atoms_from(spec: &DenseSpectrum, u: usize, v: usize) -> Vec<(f64, f64)> {
    let scale = spec.eigenvalues.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut group: Vec<f64> = Vec::new();
    for (k, (&l, x)) in spec.eigenvalues.iter().zip(&spec.eigenvectors).enumerate() {
        let w = x[u] * x[v];
        match out.last_mut() {
            Some(last) if k > 0 && l - spec.eigenvalues[k - 1] <= 1e-9 * scale => {
                group.push(l);
                last.0 = group.iter().sum::<f64>() / group.len() as f64;
                last.1 += w;
            }
            _ => {
                group = vec![l];
                out.push((l, w));
            }
        }
    }
    out
}

fn bfs_distances(g: &StarLikeGraph, from: VertexId, radius: usize) -> Result<BTreeMap<VertexId, usize>> {
    let mut dist = BTreeMap::from([(from, 0usize)]);
    let mut queue = VecDeque::from([from]);
    while let Some(x) = queue.pop_front() {
        let d = dist[&x];
        if d == radius {
            continue;
        }
        for (y, _) in g.neighbors(x)? {
            if !dist.contains_key(&y) {
                dist.insert(y, d + 1);
                queue.push_back(y);
            }
        }
    }
    Ok(dist)
}

/// Sum over all length-`n` walks `v -> w` of the product of edge weights,
/// by exhaustive depth-first search, for `w` on the sphere of radius `n`.
pub fn brute_paths(g: &StarLikeGraph, v: VertexId, w: VertexId, n: usize, max_ball: usize) -> Result<f64> {
    let from_w = bfs_distances(g, w, n + 1)?;
    if from_w.len() > max_ball {
        return Err(Error::BallTooLarge { radius: n + 1, size: from_w.len(), cap: max_ball });
    }
    match from_w.get(&v) {
        Some(&d) if d == n => {}
        Some(&d) => return Err(Error::NotOnBoundarySphere { dist: d, n }),
        None => return Err(Error::NotOnBoundarySphere { dist: n + 1, n }),
    }
    fn walk(
        g: &StarLikeGraph,
        here: VertexId,
        target: VertexId,
        left: usize,
        from_w: &BTreeMap<VertexId, usize>,
    ) -> Result<f64> {
        if left == 0 {
            return Ok(if here == target { 1.0 } else { 0.0 });
        }
        let mut total = 0.0;
        for (next, a) in g.neighbors(here)? {
            // walks that cannot get back in time contribute nothing
            if from_w.get(&next).is_some_and(|&d| d < left) {
                total += a * walk(g, next, target, left - 1, from_w)?;
            }
        }
        Ok(total)
    }
    walk(g, v, w, n, &from_w)
}

/// Dense local matrix of `J` on the ball `B_r(center)` with Dirichlet cut.
struct LocalMatrix {
    index: BTreeMap<VertexId, usize>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl LocalMatrix {
    fn new(g: &StarLikeGraph, center: VertexId, radius: usize) -> Result<Self> {
        let dist = bfs_distances(g, center, radius)?;
        let index: BTreeMap<VertexId, usize> = dist.keys().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut rows = Vec::with_capacity(index.len());
        for &v in index.keys() {
            let mut row = vec![(index[&v], g.potential(v))];
            for (w, a) in g.neighbors(v)? {
                if let Some(&j) = index.get(&w) {
                    row.push((j, a));
                }
            }
            rows.push(row);
        }
        Ok(LocalMatrix { index, rows })
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|&(j, a)| a * x[j]).sum()).collect()
    }
}

/// `<delta_w, J^n delta_v>` by dense matrix powers on `B_n(v)`.
pub fn power_moment(g: &StarLikeGraph, v: VertexId, w: VertexId, n: usize) -> Result<f64> {
    // the cut at radius n + 1 is never reached by a walk of length n
    let local = LocalMatrix::new(g, v, n + 1)?;
    let mut x = vec![0.0; local.rows.len()];
    x[local.index[&v]] = 1.0;
    for _ in 0..n {
        x = local.apply(&x);
    }
    Ok(local.index.get(&w).map_or(0.0, |&j| x[j]))
}

/// Branch values `psi(phi_i(1..=n_target))` from the square system
/// `(J^k psi)(v0) = 0`, `k = d, ..., d + n_target - 1`, with
/// `d = dist(phi_i(1), v0)`, `psi = psi_k` on the compact component and zero
/// on every other branch and beyond depth `n_target`.
pub fn reconstruct_dense(
    g: &StarLikeGraph,
    psi_k: &[f64],
    branch: usize,
    v0: VertexId,
    n_target: usize,
) -> Result<Vec<f64>> {
    let head = VertexId::Branch(branch, 1);
    let d = bfs_distances(g, v0, g.compact_size() + 1)?
        .get(&head)
        .copied()
        .ok_or(Error::InvalidVertex(head))?;
    let k_max = d + n_target - 1;
    let local = LocalMatrix::new(g, v0, k_max + 1)?;
    let size = local.rows.len();
    // rows[k][u] = (J^k delta_v0)(u)
    let mut powers = Vec::with_capacity(k_max + 1);
    let mut x = vec![0.0; size];
    x[local.index[&v0]] = 1.0;
    for _ in 0..=k_max {
        powers.push(x.clone());
        x = local.apply(&x);
    }
    let mut a = vec![vec![Complex64::new(0.0, 0.0); n_target]; n_target];
    let mut b = vec![vec![Complex64::new(0.0, 0.0)]; n_target];
    for (r, k) in (d..=k_max).enumerate() {
        let row = &powers[k];
        let mut known = 0.0;
        for (c, &val) in psi_k.iter().enumerate() {
            if let Some(&j) = local.index.get(&VertexId::Compact(c)) {
                known += row[j] * val;
            }
        }
        b[r][0] = Complex64::new(-known, 0.0);
        for n in 1..=n_target {
            if let Some(&j) = local.index.get(&VertexId::Branch(branch, n)) {
                a[r][n - 1] = Complex64::new(row[j], 0.0);
            }
        }
    }
    let sol = complex_solve(a, b)?;
    Ok(sol.into_iter().map(|row| row[0].re).collect())
}
