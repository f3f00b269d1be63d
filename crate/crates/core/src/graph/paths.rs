//! Walks between vertices and the path-weight sums `beta(v, w, n)`.

use std::collections::BTreeMap;

use super::{StarLikeGraph, VertexId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathCaps {
    pub max_len: usize,
    pub max_ball: usize,
}

impl Default for PathCaps {
    fn default() -> Self {
        PathCaps { max_len: 12, max_ball: 10_000 }
    }
}

/// All vertex sequences `(x_0 = v, ..., x_n = w)` with consecutive
/// adjacency, in lexicographic vertex order.
pub fn enumerate_paths(
    g: &StarLikeGraph,
    v: VertexId,
    w: VertexId,
    n: usize,
    caps: PathCaps,
) -> Result<Vec<Vec<VertexId>>> {
    g.check(v)?;
    g.check(w)?;
    if n > caps.max_len {
        return Err(Error::PathExplosion { n, cap: caps.max_len });
    }
    let ball = g.ball(v, n)?;
    if ball.len() > caps.max_ball {
        return Err(Error::BallTooLarge { radius: n, size: ball.len(), cap: caps.max_ball });
    }
    let mut out = Vec::new();
    let mut current = vec![v];
    extend_paths(g, w, n, &mut current, &mut out)?;
    Ok(out)
}

fn extend_paths(
    g: &StarLikeGraph,
    target: VertexId,
    remaining: usize,
    current: &mut Vec<VertexId>,
    out: &mut Vec<Vec<VertexId>>,
) -> Result<()> {
    let here = *current.last().expect("path is never empty");
    if remaining == 0 {
        if here == target {
            out.push(current.clone());
        }
        return Ok(());
    }
    for (next, _) in g.neighbors(here)? {
        if g.distance_unchecked(next, target) > remaining - 1 {
            continue;
        }
        current.push(next);
        extend_paths(g, target, remaining - 1, current, out)?;
        current.pop();
    }
    Ok(())
}

/// Sum over all length-`n` paths from `v` to `w` of the product of edge
/// weights, for `w` on the sphere `dB_n(v)`.
///
/// Every such path is a geodesic, so the sum is propagated layer by layer:
/// `beta(x) = sum_{y ~ x, dist(v, y) = j - 1} a_{xy} beta(y)`.
pub fn beta_coefficient(g: &StarLikeGraph, v: VertexId, w: VertexId, n: usize) -> Result<f64> {
    let dist = g.distance(v, w)?;
    if dist != n {
        return Err(Error::NotOnBoundarySphere { dist, n });
    }
    let mut layer = BTreeMap::from([(v, 1.0)]);
    for j in 1..=n {
        let mut next = BTreeMap::new();
        for (&y, &beta) in &layer {
            for (x, a) in g.neighbors(y)? {
                if g.distance_unchecked(v, x) == j && g.distance_unchecked(x, w) == n - j {
                    *next.entry(x).or_insert(0.0) += a * beta;
                }
            }
        }
        layer = next;
    }
    Ok(layer.get(&w).copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_star_like, BranchCoefficients, CoeffRule, CompactComponent};
    use VertexId::*;

    fn four_cycle(w: [f64; 4]) -> StarLikeGraph {
        // 0-1-2 and 0-3-2 arcs
        let compact = CompactComponent {
            size: 4,
            edges: vec![(0, 1, w[0]), (1, 2, w[1]), (0, 3, w[2]), (3, 2, w[3])],
            potential: vec![0.0; 4],
            attachments: vec![0],
        };
        build_star_like(compact, vec![BranchCoefficients::free()]).unwrap()
    }

    #[test]
    fn line_has_single_path() {
        let g = build_star_like(CompactComponent::single(0.0), vec![BranchCoefficients::free()])
            .unwrap();
        let paths = enumerate_paths(&g, Compact(0), Branch(1, 5), 5, PathCaps::default()).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(beta_coefficient(&g, Compact(0), Branch(1, 5), 5).unwrap(), 1.0);
    }

    #[test]
    fn cycle_opposite_corners() {
        let g = four_cycle([1.5, 2.0, 0.5, 3.0]);
        let paths = enumerate_paths(&g, Compact(0), Compact(2), 2, PathCaps::default()).unwrap();
        assert_eq!(paths, vec![
            vec![Compact(0), Compact(1), Compact(2)],
            vec![Compact(0), Compact(3), Compact(2)],
        ]);
        let beta = beta_coefficient(&g, Compact(0), Compact(2), 2).unwrap();
        assert!((beta - (1.5 * 2.0 + 0.5 * 3.0)).abs() < 1e-15);
    }

    #[test]
    fn weighted_path_product() {
        let br = BranchCoefficients::new(
            CoeffRule::Table { values: vec![2.0, 3.0], tail: 1.0 },
            CoeffRule::constant(0.0),
        );
        let g = build_star_like(CompactComponent::single(0.0), vec![br]).unwrap();
        assert_eq!(beta_coefficient(&g, Compact(0), Branch(1, 2), 2).unwrap(), 6.0);
    }

    #[test]
    fn metric_obstruction_and_caps() {
        let g = four_cycle([1.0; 4]);
        let none = enumerate_paths(&g, Compact(0), Branch(1, 4), 3, PathCaps::default()).unwrap();
        assert!(none.is_empty());
        assert_eq!(
            beta_coefficient(&g, Compact(0), Compact(2), 3).unwrap_err(),
            Error::NotOnBoundarySphere { dist: 2, n: 3 }
        );
        assert!(matches!(
            enumerate_paths(&g, Compact(0), Compact(2), 13, PathCaps::default()),
            Err(Error::PathExplosion { .. })
        ));
    }

    #[test]
    fn walks_longer_than_distance_are_counted() {
        // walks of length 3 between neighbours of a triangle corner
        let compact = CompactComponent {
            size: 3,
            edges: vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)],
            potential: vec![0.0; 3],
            attachments: vec![0],
        };
        let g = build_star_like(compact, vec![BranchCoefficients::free()]).unwrap();
        let paths = enumerate_paths(&g, Compact(1), Compact(2), 3, PathCaps::default()).unwrap();
        // 1-0-1-2, 1-0-2... enumerated by brute force below
        let mut count = 0;
        let nb = |x: VertexId| g.neighbors(x).unwrap().into_iter().map(|(y, _)| y).collect::<Vec<_>>();
        for a in nb(Compact(1)) {
            for b in nb(a) {
                for c in nb(b) {
                    if c == Compact(2) {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(paths.len(), count);
        let mut sorted = paths.clone();
        sorted.sort();
        assert_eq!(sorted, paths);
    }
}
