//! The symmetric star: `m` copies of a half-line operator `J0` joined at a
//! hub `o`, its roots-of-unity sectors `H_k`, the map `U: H_k -> l2(N)` and
//! the degeneracy of truncated spectra.
//!
//! Site `j >= 1` of copy `i` is `v_j^i`. In graph terms `o = Compact(0)`,
//! `v_1^i = Compact(i)` and `v_j^i = Branch(i, j - 1)` for `j >= 2`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BranchCoefficients, CoeffRule, CompactComponent, StarLikeGraph, VertexId};
use crate::halfline::dirichlet_eigenvalues;
use crate::operator::{apply, FinVector};

/// Largest truncated dimension handed to the dense eigensolver.
pub const SHARPNESS_DENSE_CAP: usize = 6000;

/// Relative distance from a sector above which `intertwine` refuses.
pub const SECTOR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessModel {
    m: usize,
    v0: BranchCoefficients,
    graph: StarLikeGraph,
}

impl SharpnessModel {
    /// `v0` holds `V0(j)` as its potential at site `j`; its weights must be
    /// identically 1.
    pub fn new(m: usize, v0: BranchCoefficients) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParams(format!("sharpness model needs m >= 2, got {m}")));
        }
        v0.validate()?;
        if v0.a != CoeffRule::constant(1.0) {
            return Err(Error::InvalidParams(format!("V0 weights must be constant 1, got {:?}", v0.a)));
        }
        let mut compact = CompactComponent::star(m);
        for c in 1..=m {
            compact.potential[c] = v0.b(1);
        }
        let branches = vec![v0.clone().shifted(1); m];
        let graph = StarLikeGraph::new(compact, branches)?;
        Ok(SharpnessModel { m, v0, graph })
    }

    pub fn free(m: usize) -> Result<Self> {
        Self::new(m, BranchCoefficients::free())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn v0(&self) -> &BranchCoefficients {
        &self.v0
    }

    pub fn graph(&self) -> &StarLikeGraph {
        &self.graph
    }

    pub fn hub(&self) -> VertexId {
        VertexId::Compact(0)
    }

    /// Vertex `v_j^i`, `1 <= i <= m`, `j >= 1`.
    pub fn site(&self, i: usize, j: usize) -> Result<VertexId> {
        if i == 0 || i > self.m || j == 0 {
            return Err(Error::InvalidParams(format!("no site v_{j}^{i} for m = {}", self.m)));
        }
        Ok(if j == 1 { VertexId::Compact(i) } else { VertexId::Branch(i, j - 1) })
    }

    /// `(i, j)` with `v = v_j^i`, or `None` at the hub.
    pub fn coordinates(&self, v: VertexId) -> Result<Option<(usize, usize)>> {
        self.graph.check(v)?;
        Ok(match v {
            VertexId::Compact(0) => None,
            VertexId::Compact(i) => Some((i, 1)),
            VertexId::Branch(i, n) => Some((i, n + 1)),
        })
    }

    /// `zeta^p` with `zeta = exp(2 pi i / m)`.
    pub fn zeta_pow(&self, p: i64) -> Complex64 {
        let r = p.rem_euclid(self.m as i64) as f64;
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * r / self.m as f64)
    }

    /// Default clustering tolerance: `1e-8 ||J||` for constant `V0`,
    /// `1e-6 ||J||` otherwise.
    pub fn default_cluster_tol(&self) -> f64 {
        let rel = if matches!(self.v0.b.constant_from(), Some((n, _)) if n <= 1) { 1e-8 } else { 1e-6 };
        rel * self.graph.norm_bound()
    }

    fn check_sector(&self, k: usize) -> Result<()> {
        if k >= self.m {
            return Err(Error::SectorOutOfRange { k, m: self.m });
        }
        Ok(())
    }
}

pub fn complexify(psi: &FinVector<f64>) -> FinVector<Complex64> {
    psi.iter().map(|(v, x)| (v, Complex64::new(x, 0.0))).collect()
}

/// `(Pi_k psi)(v_j^i) = (1/m) sum_l zeta^{(i-l)k} psi(v_j^l)`, and the hub
/// value is kept only for `k = 0`.
pub fn sector_project(
    model: &SharpnessModel,
    k: usize,
    psi: &FinVector<Complex64>,
) -> Result<FinVector<Complex64>> {
    model.check_sector(k)?;
    let m = model.m;
    let mut levels = std::collections::BTreeMap::<usize, Vec<Complex64>>::new();
    let mut out = FinVector::new();
    for (v, x) in psi.iter() {
        match model.coordinates(v)? {
            None => {
                if k == 0 {
                    out.set(v, x);
                }
            }
            Some((i, j)) => levels.entry(j).or_insert_with(|| vec![Complex64::new(0.0, 0.0); m])[i - 1] = x,
        }
    }
    let scale = 1.0 / m as f64;
    for (j, vals) in levels {
        for i in 1..=m {
            let sum: Complex64 = (1..=m)
                .map(|l| model.zeta_pow(((i as i64) - (l as i64)) * k as i64) * vals[l - 1])
                .sum();
            out.set(model.site(i, j)?, sum * scale);
        }
    }
    Ok(out)
}

/// `max ||Pi_k J psi - J Pi_k psi|| / ||psi||` over the nonzero inputs.
pub fn check_invariance(model: &SharpnessModel, k: usize, psi_set: &[FinVector<Complex64>]) -> Result<f64> {
    model.check_sector(k)?;
    let g = &model.graph;
    let mut worst = 0.0f64;
    for psi in psi_set {
        let norm = psi.norm();
        if norm == 0.0 {
            continue;
        }
        let lhs = sector_project(model, k, &apply(g, psi)?)?;
        let rhs = apply(g, &sector_project(model, k, psi)?)?;
        worst = worst.max(lhs.sub(&rhs).norm() / norm);
    }
    Ok(worst)
}

/// `||psi - Pi_k psi|| / ||psi||`, zero for the zero vector.
pub fn sector_residual(model: &SharpnessModel, k: usize, psi: &FinVector<Complex64>) -> Result<f64> {
    let norm = psi.norm();
    if norm == 0.0 {
        model.check_sector(k)?;
        return Ok(0.0);
    }
    Ok(psi.sub(&sector_project(model, k, psi)?).norm() / norm)
}

/// `(U psi)(n) = sqrt(m) psi(v_n^1)` for `psi` in `H_k`, `k >= 1`. Entry
/// `n - 1` of the result is site `n`.
pub fn intertwine(model: &SharpnessModel, k: usize, psi: &FinVector<Complex64>) -> Result<Vec<Complex64>> {
    if k == 0 {
        return Err(Error::SectorOutOfRange { k, m: model.m });
    }
    let residual = sector_residual(model, k, psi)?;
    if residual > SECTOR_TOL {
        return Err(Error::NotInSector { k, residual });
    }
    let s = (model.m as f64).sqrt();
    let mut out = Vec::new();
    for (v, x) in psi.iter() {
        if let Some((1, j)) = model.coordinates(v)? {
            if out.len() < j {
                out.resize(j, Complex64::new(0.0, 0.0));
            }
            out[j - 1] = x * s;
        }
    }
    Ok(out)
}

/// `J0 f` on `l2(N)` with a Dirichlet condition at site 0. The result is one
/// entry longer than `f`.
pub fn apply_j0(v0: &BranchCoefficients, f: &[Complex64]) -> Vec<Complex64> {
    let n = f.len();
    let at = |j: usize| if j >= 1 && j <= n { f[j - 1] } else { Complex64::new(0.0, 0.0) };
    (1..=n + 1)
        .map(|j| at(j - 1) * v0.a(j) + at(j) * v0.b(j) + at(j + 1) * v0.a(j + 1))
        .collect()
}

/// `||U J psi - J0 U psi|| / ||psi||` for `psi` in `H_k`.
pub fn intertwining_residual(model: &SharpnessModel, k: usize, psi: &FinVector<Complex64>) -> Result<f64> {
    let norm = psi.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let left = intertwine(model, k, &apply(&model.graph, psi)?)?;
    let right = apply_j0(&model.v0, &intertwine(model, k, psi)?);
    let len = left.len().max(right.len());
    let get = |v: &[Complex64], i: usize| v.get(i).copied().unwrap_or_default();
    let diff: f64 = (0..len).map(|i| (get(&left, i) - get(&right, i)).norm_sqr()).sum();
    Ok(diff.sqrt() / norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub energy: f64,
    pub size: usize,
    /// 1-based index into the ascending Dirichlet spectrum of `J0` on
    /// `1..=N`, when one lies within `match_tol`.
    pub matched_index: Option<usize>,
    pub match_distance: f64,
    /// Distance to the nearest other cluster.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    pub m: usize,
    pub depth: usize,
    pub dim: usize,
    pub cluster_tol: f64,
    pub match_tol: f64,
    pub clusters: Vec<Cluster>,
    pub dirichlet: Vec<f64>,
    /// Clusters of size exactly `m - 1`.
    pub exact_clusters: usize,
    /// Clusters of size exactly `m - 1` matched to a Dirichlet eigenvalue.
    pub matched_exact: usize,
    /// Dirichlet eigenvalues `d` such that `[d - match_tol, d + match_tol]`
    /// holds at least `m - 1` star eigenvalues per Dirichlet eigenvalue in
    /// the same window.
    pub covered: usize,
    pub max_match_distance: f64,
}

/// Dense spectrum of the star cut after `N` sites per copy (dimension
/// `1 + mN`), eigenvalues chained into clusters when consecutive gaps are
/// `<= cluster_tol`, each cluster matched to the nearest eigenvalue of `J0`
/// on `1..=N` with Dirichlet ends.
pub fn degeneracy_experiment(
    model: &SharpnessModel,
    depth: usize,
    cluster_tol: f64,
    match_tol: f64,
) -> Result<DegeneracyReport> {
    if depth == 0 {
        return Err(Error::InvalidParams("depth must be >= 1".into()));
    }
    if !(cluster_tol > 0.0) || !(match_tol > 0.0) {
        return Err(Error::InvalidParams(format!(
            "cluster_tol = {cluster_tol} and match_tol = {match_tol} must be positive"
        )));
    }
    let m = model.m;
    let dim = 1 + m * depth;
    if dim > SHARPNESS_DENSE_CAP {
        return Err(Error::DenseCapExceeded { dim, cap: SHARPNESS_DENSE_CAP });
    }
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let idx = |i: usize, j: usize| 1 + (i - 1) * depth + (j - 1);
    for i in 1..=m {
        a[(0, idx(i, 1))] = 1.0;
        a[(idx(i, 1), 0)] = 1.0;
        for j in 1..=depth {
            a[(idx(i, j), idx(i, j))] = model.v0.b(j);
            if j < depth {
                let w = model.v0.a(j + 1);
                a[(idx(i, j), idx(i, j + 1))] = w;
                a[(idx(i, j + 1), idx(i, j))] = w;
            }
        }
    }
    let mut eig: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);

    let mut groups: Vec<Vec<f64>> = Vec::new();
    for &e in &eig {
        match groups.last_mut() {
            Some(g) if e - g[g.len() - 1] <= cluster_tol => g.push(e),
            _ => groups.push(vec![e]),
        }
    }
    let dirichlet = dirichlet_eigenvalues(&model.v0, depth);
    let centers: Vec<f64> = groups.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
    let mut clusters = Vec::with_capacity(groups.len());
    for (c, g) in groups.iter().enumerate() {
        let energy = centers[c];
        let pos = dirichlet.partition_point(|&d| d < energy);
        let nearest = [pos.checked_sub(1), (pos < dirichlet.len()).then_some(pos)]
            .into_iter()
            .flatten()
            .min_by(|&x, &y| (dirichlet[x] - energy).abs().total_cmp(&(dirichlet[y] - energy).abs()));
        let match_distance = nearest.map_or(f64::INFINITY, |x| (dirichlet[x] - energy).abs());
        let matched_index = nearest.filter(|_| match_distance <= match_tol).map(|x| x + 1);
        let left = c.checked_sub(1).map_or(f64::INFINITY, |p| energy - centers[p]);
        let right = centers.get(c + 1).map_or(f64::INFINITY, |&x| x - energy);
        clusters.push(Cluster { energy, size: g.len(), matched_index, match_distance, gap: left.min(right) });
    }
    let exact_clusters = clusters.iter().filter(|c| c.size == m - 1).count();
    let matched_exact = clusters.iter().filter(|c| c.size == m - 1 && c.matched_index.is_some()).count();
    let in_window = |xs: &[f64], d: f64| {
        xs.partition_point(|&x| x <= d + match_tol) - xs.partition_point(|&x| x < d - match_tol)
    };
    let covered = dirichlet
        .iter()
        .filter(|&&d| in_window(&eig, d) >= (m - 1) * in_window(&dirichlet, d))
        .count();
    let max_match_distance = clusters
        .iter()
        .filter(|c| c.matched_index.is_some())
        .map(|c| c.match_distance)
        .fold(0.0, f64::max);
    Ok(DegeneracyReport {
        m,
        depth,
        dim,
        cluster_tol,
        match_tol,
        clusters,
        dirichlet,
        exact_clusters,
        matched_exact,
        covered,
        max_match_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vector(model: &SharpnessModel, rng: &mut ChaCha8Rng, depth: usize) -> FinVector<Complex64> {
        let mut psi = FinVector::new();
        psi.set(model.hub(), Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        for i in 1..=model.m() {
            for j in 1..=depth {
                if rng.random_bool(0.7) {
                    let x = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    psi.set(model.site(i, j).unwrap(), x);
                }
            }
        }
        psi
    }

    #[test]
    fn antisymmetrization_for_two_copies() {
        let model = SharpnessModel::free(2).unwrap();
        let psi = FinVector::delta(model.site(1, 1).unwrap(), Complex64::new(1.0, 0.0));
        let p = sector_project(&model, 1, &psi).unwrap();
        assert_eq!(p.len(), 2);
        assert!((p.get(model.site(1, 1).unwrap()) - 0.5).norm() < 1e-15);
        assert!((p.get(model.site(2, 1).unwrap()) + 0.5).norm() < 1e-15);
        assert!(matches!(sector_project(&model, 2, &psi), Err(Error::SectorOutOfRange { .. })));
    }

    #[test]
    fn projections_resolve_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in [2, 3, 5] {
            let model = SharpnessModel::free(m).unwrap();
            for _ in 0..20 {
                let psi = random_vector(&model, &mut rng, 6);
                let mut sum = FinVector::new();
                for k in 0..m {
                    let p = sector_project(&model, k, &psi).unwrap();
                    let pp = sector_project(&model, k, &p).unwrap();
                    assert!(pp.sub(&p).norm() < 1e-14);
                    sum = sum.plus(&p);
                }
                assert!(sum.sub(&psi).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn hub_delta_leaves_nontrivial_sectors() {
        let model = SharpnessModel::free(3).unwrap();
        let psi = FinVector::delta(model.hub(), Complex64::new(1.0, 0.0));
        let jpsi = apply(model.graph(), &psi).unwrap();
        for k in 1..3 {
            let p = sector_project(&model, k, &jpsi).unwrap();
            assert_eq!(p.get(model.hub()), Complex64::new(0.0, 0.0));
            assert!(p.norm() < 1e-15);
        }
        assert!(check_invariance(&model, 1, &[psi]).unwrap() < 1e-15);
    }

    #[test]
    fn invariance_with_rough_potential() {
        let v0 = BranchCoefficients::new(
            CoeffRule::constant(1.0),
            CoeffRule::SparsePower { h: 1.0, gamma: 0.5, l0: 2 },
        );
        let model = SharpnessModel::new(3, v0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let set: Vec<_> = (0..30).map(|_| random_vector(&model, &mut rng, 20)).collect();
        for k in 0..3 {
            assert!(check_invariance(&model, k, &set).unwrap() < 1e-13);
        }
    }

    #[test]
    fn u_fixes_normalized_antisymmetric_delta() {
        let model = SharpnessModel::free(2).unwrap();
        let r = 1.0 / 2f64.sqrt();
        let mut psi = FinVector::new();
        psi.set(model.site(1, 1).unwrap(), Complex64::new(r, 0.0));
        psi.set(model.site(2, 1).unwrap(), Complex64::new(-r, 0.0));
        let u = intertwine(&model, 1, &psi).unwrap();
        assert_eq!(u.len(), 1);
        assert!((u[0] - 1.0).norm() < 1e-15);
        let off = FinVector::delta(model.site(1, 1).unwrap(), Complex64::new(1.0, 0.0));
        assert!(matches!(intertwine(&model, 1, &off), Err(Error::NotInSector { .. })));
    }

    #[test]
    fn u_is_isometric_and_intertwines() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let v0 = BranchCoefficients::new(CoeffRule::constant(1.0), CoeffRule::Periodic { values: vec![0.3, -1.1, 0.4] });
        let model = SharpnessModel::new(4, v0).unwrap();
        for _ in 0..30 {
            let raw = random_vector(&model, &mut rng, 9);
            for k in 1..4 {
                let psi = sector_project(&model, k, &raw).unwrap();
                let u = intertwine(&model, k, &psi).unwrap();
                let un: f64 = u.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                assert!((un - psi.norm()).abs() < 1e-12 * psi.norm().max(1.0));
                assert!(intertwining_residual(&model, k, &psi).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn five_sites_three_copies() {
        let model = SharpnessModel::free(3).unwrap();
        let report = degeneracy_experiment(&model, 5, 1e-8, 1e-9).unwrap();
        assert_eq!(report.dim, 16);
        for k in 1..=5 {
            let e = 2.0 * (k as f64 * std::f64::consts::PI / 6.0).cos();
            let c = report.clusters.iter().find(|c| (c.energy - e).abs() < 1e-9).unwrap();
            assert_eq!(c.size, 2);
            assert!(c.matched_index.is_some());
        }
        assert_eq!(report.matched_exact, 5);
        assert_eq!(report.covered, 5);
    }

    #[test]
    fn dirichlet_spectrum_is_chebyshev() {
        let model = SharpnessModel::free(2).unwrap();
        let report = degeneracy_experiment(&model, 40, 1e-8, 1e-9).unwrap();
        for (k, d) in report.dirichlet.iter().rev().enumerate() {
            let exact = 2.0 * ((k + 1) as f64 * std::f64::consts::PI / 41.0).cos();
            assert!((d - exact).abs() < 1e-12);
        }
        assert_eq!(report.matched_exact, 40);
        assert_eq!(report.clusters.iter().map(|c| c.size).sum::<usize>(), 81);
    }

    #[test]
    fn rejects_bad_models() {
        assert!(SharpnessModel::free(1).is_err());
        let v0 = BranchCoefficients::new(CoeffRule::constant(2.0), CoeffRule::constant(0.0));
        assert!(SharpnessModel::new(3, v0).is_err());
        let model = SharpnessModel::free(3).unwrap();
        assert!(degeneracy_experiment(&model, 0, 1e-8, 1e-9).is_err());
        assert!(matches!(
            degeneracy_experiment(&model, 3000, 1e-8, 1e-9),
            Err(Error::DenseCapExceeded { .. })
        ));
    }
}
