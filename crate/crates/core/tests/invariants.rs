mod common;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_branch, random_graph, Shape};
use starlike::graph::{beta_coefficient, StarLikeGraph, VertexId};
use starlike::halfline::m_function;
use starlike::operator::{apply, assemble_truncated, moment, paste_halflines, FinVector, TruncationSpec};
use starlike::oracle::{brute_paths, power_moment};
use starlike::sharpness::{sector_project, SharpnessModel};
use starlike::spectral::{resolvent_k, DEFAULT_M_TOL};

const SHAPE: Shape = Shape { max_compact: 7, max_branches: 3, tail_constant: false };

fn graph(seed: u64) -> (StarLikeGraph, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (random_graph(&mut rng, SHAPE), rng)
}

fn random_vector(g: &StarLikeGraph, rng: &mut ChaCha8Rng, depth: usize) -> FinVector<f64> {
    let mut psi = FinVector::new();
    for c in 0..g.compact_size() {
        psi.set(VertexId::Compact(c), rng.random_range(-1.0..1.0));
    }
    for i in 1..=g.m() {
        for n in 1..=depth {
            psi.set(VertexId::Branch(i, n), rng.random_range(-1.0..1.0));
        }
    }
    psi
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjacency_is_symmetric(seed in any::<u64>()) {
        let (g, _) = graph(seed);
        for v in g.ball(VertexId::Compact(0), g.compact_size() + 4).unwrap() {
            for (w, a) in g.neighbors(v).unwrap() {
                let back = g.neighbors(w).unwrap();
                prop_assert!(back.iter().any(|&(x, b)| x == v && b == a), "{v} -> {w}");
            }
        }
    }

    #[test]
    fn operator_is_symmetric(seed in any::<u64>()) {
        let (g, mut rng) = graph(seed);
        let psi = random_vector(&g, &mut rng, 6);
        let phi = random_vector(&g, &mut rng, 6);
        let lhs = apply(&g, &psi).unwrap().dot(&phi);
        let rhs = psi.dot(&apply(&g, &phi).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn truncation_matches_the_operator(seed in any::<u64>(), depth in 2usize..12) {
        let (g, mut rng) = graph(seed);
        let op = assemble_truncated(&g, TruncationSpec { depth }, 10_000).unwrap();
        let dense = op.matrix.to_dense();
        prop_assert_eq!(&dense, &dense.transpose());
        // vectors vanishing at the cut see no boundary effect
        let psi = random_vector(&g, &mut rng, depth - 1);
        let full = apply(&g, &psi).unwrap();
        let x: Vec<f64> = op.vertices.iter().map(|&v| psi.get(v)).collect();
        let y = op.matrix.apply(&x);
        for (i, &v) in op.vertices.iter().enumerate() {
            prop_assert!((y[i] - full.get(v)).abs() <= 1e-12);
        }
    }

    #[test]
    fn moments_agree_with_path_sums(seed in any::<u64>(), n in 1usize..7) {
        let (g, mut rng) = graph(seed);
        let v = VertexId::Compact(rng.random_range(0..g.compact_size()));
        for w in g.ball(v, n).unwrap() {
            let mo = moment(&g, v, w, n).unwrap();
            let pm = power_moment(&g, v, w, n).unwrap();
            prop_assert!((mo - pm).abs() <= 1e-12 * (1.0 + pm.abs()));
            if g.distance(v, w).unwrap() == n {
                let be = beta_coefficient(&g, v, w, n).unwrap();
                let br = brute_paths(&g, v, w, n, 100_000).unwrap();
                prop_assert!((be - br).abs() <= 1e-12 * br.abs());
                prop_assert!((mo - br).abs() <= 1e-12 * br.abs());
            }
        }
    }

    #[test]
    fn resolvent_is_herglotz_and_symmetric(seed in any::<u64>(), re in -4.0f64..4.0, im in 0.05f64..3.0) {
        let (g, _) = graph(seed);
        let r = resolvent_k(&g, Complex64::new(re, im), DEFAULT_M_TOL).unwrap();
        for u in 0..r.dim() {
            prop_assert!(r.get(u, u).im > 0.0);
            for v in 0..r.dim() {
                prop_assert!((r.get(u, v) - r.get(v, u)).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn pasting_one_factor_gives_its_m_function(seed in any::<u64>(), re in -3.0f64..3.0, im in 0.1f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let factor = random_branch(&mut rng, false);
        let g = paste_halflines(std::slice::from_ref(&factor), &[vec![0.0]]).unwrap();
        let z = Complex64::new(re, im);
        let pasted = resolvent_k(&g, z, DEFAULT_M_TOL).unwrap().get(0, 0);
        let direct = m_function(&factor, z, DEFAULT_M_TOL).unwrap();
        prop_assert!((pasted - direct).norm() <= 1e-9 * (1.0 + direct.norm()));
    }

    #[test]
    fn sectors_resolve_the_identity(seed in any::<u64>(), m in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = SharpnessModel::free(m).unwrap();
        let mut psi = FinVector::delta(model.hub(), Complex64::new(rng.random_range(-1.0..1.0), 0.0));
        for i in 1..=m {
            for j in 1..=4 {
                psi.set(model.site(i, j).unwrap(), Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            }
        }
        let mut sum = FinVector::new();
        for k in 0..m {
            let p = sector_project(&model, k, &psi).unwrap();
            let pp = sector_project(&model, k, &p).unwrap();
            prop_assert!(pp.sub(&p).norm() <= 1e-13 * psi.norm());
            sum = sum.plus(&p);
        }
        prop_assert!(sum.sub(&psi).norm() <= 1e-13 * psi.norm());
    }
}
