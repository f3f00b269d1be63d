//! Resolvents on the compact component, Borel transforms, the matrix of
//! Radon–Nikodym derivatives `P(E)`, multiplicity estimates and generalized
//! eigenfunctions.

mod eigenfunction;
mod grid;
mod multiplicity;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub use eigenfunction::{
    branch_scalars, generalized_eigenfunction, reconstruct_branch, stieltjes_density,
    subordinate_space_dim, BranchScalar, GeneralizedEigenfunction, BRANCH_FIT_TOL,
};
pub use grid::MeasureGrid;
pub use multiplicity::{
    multiplicity_profile, p_matrix, poltoratskii_ratio, summarize, EpsSchedule, MultiplicitySummary,
    PoltoratskiiRatio, SampleStep, SpectralSample, DEFAULT_RANK_TOL, RICHARDSON_TOL,
};

use crate::error::{Error, Result};
use crate::graph::{BranchCoefficients, StarLikeGraph, VertexId};
use crate::halfline::m_function;

/// Default relative tolerance of branch m-functions.
pub const DEFAULT_M_TOL: f64 = 1e-12;

/// `M_uv(z) = <(J - z)^{-1} delta_v, delta_u>` for `u, v` in the compact
/// component, and its trace `calM(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventMatrixK {
    pub z: Complex64,
    pub entries: DMatrix<Complex64>,
    pub trace_m: Complex64,
}

impl ResolventMatrixK {
    fn from_entries(z: Complex64, entries: DMatrix<Complex64>) -> Self {
        let trace_m = entries.diagonal().iter().sum();
        ResolventMatrixK { z, entries, trace_m }
    }

    pub fn get(&self, u: usize, v: usize) -> Complex64 {
        self.entries[(u, v)]
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// Anything whose resolvent can be restricted to a finite cyclic set.
pub trait CompactResolvent: Sync {
    fn compact_size(&self) -> usize;
    fn resolvent_k(&self, z: Complex64, tol: f64) -> Result<ResolventMatrixK>;
    /// Upper bound on the operator norm.
    fn norm_bound(&self) -> f64;
}

fn check_upper(z: Complex64) -> Result<()> {
    if z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::NotUpperHalfPlane(z))
    }
}

fn invert(a: DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    a.lu().try_inverse().ok_or(Error::SingularSystem)
}

/// Schur complement: `M = (J_K - z - D(z))^{-1}` with
/// `D = diag(a_i(1)^2 m_i(z))` at the attachment vertices. Branches with
/// identical rules share one m-function evaluation.
pub fn resolvent_k(g: &StarLikeGraph, z: Complex64, tol: f64) -> Result<ResolventMatrixK> {
    check_upper(z)?;
    let k = g.compact_size();
    let mut a = DMatrix::<Complex64>::zeros(k, k);
    let compact = g.compact();
    for (c, &b) in compact.potential.iter().enumerate() {
        a[(c, c)] = Complex64::new(b, 0.0) - z;
    }
    for &(u, v, w) in &compact.edges {
        a[(u, v)] += w;
        a[(v, u)] += w;
    }
    let mut seen: Vec<(&BranchCoefficients, Complex64)> = Vec::new();
    for i in 1..=g.m() {
        let br = g.branch(i);
        // the branch seen from its first site: rules shifted past site 0
        let m = match seen.iter().find(|(c, _)| *c == br) {
            Some(&(_, m)) => m,
            None => {
                let m = m_function(br, z, tol)?;
                seen.push((br, m));
                m
            }
        };
        let c = g.attachment(i);
        a[(c, c)] -= br.a(1).powi(2) * m;
    }
    Ok(ResolventMatrixK::from_entries(z, invert(a)?))
}

impl CompactResolvent for StarLikeGraph {
    fn compact_size(&self) -> usize {
        StarLikeGraph::compact_size(self)
    }

    fn resolvent_k(&self, z: Complex64, tol: f64) -> Result<ResolventMatrixK> {
        resolvent_k(self, z, tol)
    }

    fn norm_bound(&self) -> f64 {
        StarLikeGraph::norm_bound(self)
    }
}

/// A finite real symmetric matrix, every site being part of the cyclic set.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteOperator {
    matrix: DMatrix<f64>,
}

impl FiniteOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidParams("finite operator must be a non-empty square matrix".into()));
        }
        if matrix != matrix.transpose() {
            return Err(Error::InvalidParams("finite operator must be symmetric".into()));
        }
        Ok(FiniteOperator { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl CompactResolvent for FiniteOperator {
    fn compact_size(&self) -> usize {
        self.matrix.nrows()
    }

    fn resolvent_k(&self, z: Complex64, _tol: f64) -> Result<ResolventMatrixK> {
        check_upper(z)?;
        let mut a = self.matrix.map(|x| Complex64::new(x, 0.0));
        for i in 0..a.nrows() {
            a[(i, i)] -= z;
        }
        Ok(ResolventMatrixK::from_entries(z, invert(a)?))
    }

    fn norm_bound(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Borel transform of `mu_uv` at `z`, read from the compact resolvent.
pub fn borel_uv(g: &StarLikeGraph, z: Complex64, u: VertexId, v: VertexId) -> Result<Complex64> {
    let idx = |x: VertexId| match x {
        VertexId::Compact(c) if c < g.compact_size() => Ok(c),
        _ => Err(Error::NotInCompact(x)),
    };
    let (iu, iv) = (idx(u)?, idx(v)?);
    Ok(resolvent_k(g, z, DEFAULT_M_TOL)?.get(iu, iv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_star_like, CompactComponent};

    fn golden() -> f64 {
        (5f64.sqrt() - 1.0) / 2.0
    }

    #[test]
    fn single_free_branch_is_the_half_line() {
        let g = build_star_like(CompactComponent::single(0.0), vec![BranchCoefficients::free()]).unwrap();
        let i = Complex64::new(0.0, 1.0);
        let m = resolvent_k(&g, i, 1e-12).unwrap();
        assert!((m.get(0, 0) - Complex64::new(0.0, golden())).norm() < 1e-12);
    }

    #[test]
    fn three_free_branches_at_one_vertex() {
        // K = {o, phi_1(0), phi_2(0), phi_3(0)} carries three free lines at o
        let g = build_star_like(CompactComponent::star(3), vec![BranchCoefficients::free(); 3]).unwrap();
        let i = Complex64::new(0.0, 1.0);
        let m = resolvent_k(&g, i, 1e-12).unwrap().get(0, 0);
        // every leaf plus its branch is a free half-line seen from o
        let expected = 1.0 / (-i - 3.0 * Complex64::new(0.0, golden()));
        assert!((m - expected).norm() < 1e-12);
        assert!((m - Complex64::new(0.0, 0.35034)).norm() < 1e-4);
        assert!(m.re.abs() < 1e-15);
    }

    #[test]
    fn resolvent_bound_far_from_spectrum() {
        let g = build_star_like(CompactComponent::star(2), vec![BranchCoefficients::free(); 2]).unwrap();
        let z = Complex64::new(0.3, 5.0 * g.norm_bound());
        let m = resolvent_k(&g, z, 1e-12).unwrap();
        let norm = m.entries.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm <= 1.0 / z.im * (m.dim() as f64).sqrt());
        let spectral = m.entries.clone().singular_values().max();
        assert!(spectral <= 1.0 / z.im);
        assert!(m.trace_m.im > 0.0);
        assert!((m.get(0, 1) - m.get(1, 0)).norm() < 1e-15);
    }

    #[test]
    fn borel_entries() {
        let g = build_star_like(CompactComponent::star(2), vec![BranchCoefficients::free(); 2]).unwrap();
        let z = Complex64::new(0.5, 0.01);
        let b = borel_uv(&g, z, VertexId::Compact(1), VertexId::Compact(1)).unwrap();
        assert!(b.im > 0.0);
        assert!(z.im * b.norm() <= 1.0);
        assert!(matches!(
            borel_uv(&g, z, VertexId::Branch(1, 1), VertexId::Compact(0)),
            Err(Error::NotInCompact(_))
        ));
    }

    #[test]
    fn finite_two_by_two() {
        let op = FiniteOperator::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let z = Complex64::new(0.2, 0.3);
        let m = op.resolvent_k(z, 0.0).unwrap();
        let expected = 0.5 * (1.0 / (1.0 - z) - 1.0 / (-1.0 - z));
        assert!((m.get(0, 1) - expected).norm() < 1e-15);
        assert!(FiniteOperator::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0])).is_err());
    }
}
