#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use starlike::graph::{BranchCoefficients, CoeffRule, CompactComponent, StarLikeGraph};

/// Shape limits for [`random_graph`].
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_compact: usize,
    pub max_branches: usize,
    /// Only rules with a constant tail, so m-functions are closed form.
    pub tail_constant: bool,
}

pub fn random_rule(rng: &mut ChaCha8Rng, tail_constant: bool, positive: bool) -> CoeffRule {
    let draw = |rng: &mut ChaCha8Rng| {
        if positive {
            rng.random_range(0.5..1.5)
        } else {
            rng.random_range(-1.0..1.0)
        }
    };
    let kinds = if tail_constant { 2 } else { 5 };
    match rng.random_range(0..kinds) {
        0 => CoeffRule::constant(draw(rng)),
        1 => {
            let len = rng.random_range(1..6);
            CoeffRule::Table { values: (0..len).map(|_| draw(rng)).collect(), tail: draw(rng) }
        }
        2 => {
            let len = rng.random_range(1..4);
            CoeffRule::Periodic { values: (0..len).map(|_| draw(rng)).collect() }
        }
        3 if !positive => CoeffRule::SparsePower { h: rng.random_range(0.5..2.0), gamma: 0.5, l0: 2 },
        _ if positive => CoeffRule::constant(draw(rng)),
        _ => CoeffRule::IidUniform { low: -1.0, high: 1.0, seed: rng.random(), stream: 0 },
    }
}

pub fn random_branch(rng: &mut ChaCha8Rng, tail_constant: bool) -> BranchCoefficients {
    BranchCoefficients::new(random_rule(rng, tail_constant, true), random_rule(rng, tail_constant, false))
}

/// Connected compact component (random spanning tree plus extra edges) with
/// branches attached at distinct vertices.
pub fn random_graph(rng: &mut ChaCha8Rng, shape: Shape) -> StarLikeGraph {
    let k = rng.random_range(1..=shape.max_compact);
    let mut edges = Vec::new();
    for v in 1..k {
        edges.push((rng.random_range(0..v), v, rng.random_range(0.5..1.5)));
    }
    for _ in 0..rng.random_range(0..=k) {
        let (u, v) = (rng.random_range(0..k), rng.random_range(0..k));
        if u != v && !edges.iter().any(|&(a, b, _)| (a, b) == (u, v) || (a, b) == (v, u)) {
            edges.push((u, v, rng.random_range(0.5..1.5)));
        }
    }
    let m = rng.random_range(1..=shape.max_branches.min(k));
    let mut slots: Vec<usize> = (0..k).collect();
    for i in 0..m {
        let j = rng.random_range(i..k);
        slots.swap(i, j);
    }
    let attachments = slots[..m].to_vec();
    let potential = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let branches = (0..m).map(|_| random_branch(rng, shape.tail_constant)).collect();
    StarLikeGraph::new(CompactComponent { size: k, edges, potential, attachments }, branches)
        .expect("random graph is valid")
}
