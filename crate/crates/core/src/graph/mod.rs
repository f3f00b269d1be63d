//! Star-like graphs: a finite weighted compact component with half-line
//! branches attached at distinct compact vertices.

mod coeffs;
mod paths;
mod tree;

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use coeffs::{BranchCoefficients, CoeffRule};
pub use paths::{beta_coefficient, enumerate_paths, PathCaps};
pub use tree::{build_sht, tree_dimension, Branching, RadialCoefficients, TreeDimension};

use crate::error::{Error, Result};

/// Largest compact component accepted; distances are stored densely.
pub const MAX_COMPACT: usize = 4096;

/// Vertex address. Ordering (compact first, then branches by `(i, n)`)
/// fixes every deterministic output order in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VertexId {
    Compact(usize),
    /// `Branch(i, n)` is `phi_i(n)` with `i` in `1..=m` and depth `n >= 1`.
    Branch(usize, usize),
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexId::Compact(c) => write!(f, "k{c}"),
            VertexId::Branch(i, n) => write!(f, "b{i}.{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactComponent {
    pub size: usize,
    /// Undirected edges `(u, v, weight)`, each listed once.
    pub edges: Vec<(usize, usize, f64)>,
    pub potential: Vec<f64>,
    /// `attachments[i]` is the compact index of `phi_{i+1}(0)`.
    pub attachments: Vec<usize>,
}

impl CompactComponent {
    /// A single vertex carrying potential `b`, attached to one branch.
    pub fn single(b: f64) -> Self {
        CompactComponent { size: 1, edges: vec![], potential: vec![b], attachments: vec![0] }
    }

    /// Star compact: hub `0` joined by unit edges to `1..=m`, each of which
    /// carries a branch. Potentials are zero.
    pub fn star(m: usize) -> Self {
        CompactComponent {
            size: m + 1,
            edges: (1..=m).map(|i| (0, i, 1.0)).collect(),
            potential: vec![0.0; m + 1],
            attachments: (1..=m).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarLikeGraph {
    compact: CompactComponent,
    branches: Vec<BranchCoefficients>,
    adjacency: Vec<Vec<(usize, f64)>>,
    compact_dist: Vec<u32>,
    branch_at: Vec<Option<usize>>,
}

/// Validate and assemble a star-like graph.
pub fn build_star_like(
    compact: CompactComponent,
    branches: Vec<BranchCoefficients>,
) -> Result<StarLikeGraph> {
    StarLikeGraph::new(compact, branches)
}

impl StarLikeGraph {
    pub fn new(compact: CompactComponent, branches: Vec<BranchCoefficients>) -> Result<Self> {
        let k = compact.size;
        if k == 0 {
            return Err(Error::InvalidParams("compact component is empty".into()));
        }
        if k > MAX_COMPACT {
            return Err(Error::DimensionCap { dim: k, cap: MAX_COMPACT });
        }
        if compact.potential.len() != k {
            return Err(Error::InvalidParams(format!(
                "potential has {} entries for {} compact vertices",
                compact.potential.len(),
                k
            )));
        }
        if compact.potential.iter().any(|b| !b.is_finite()) {
            return Err(Error::UnboundedRule("compact potential is not finite".into()));
        }
        if branches.is_empty() {
            return Err(Error::InvalidParams("a star-like graph needs at least one branch".into()));
        }
        if branches.len() != compact.attachments.len() {
            return Err(Error::InvalidParams(format!(
                "{} branches but {} attachments",
                branches.len(),
                compact.attachments.len()
            )));
        }
        let mut branch_at = vec![None; k];
        for (i, &att) in compact.attachments.iter().enumerate() {
            if att >= k {
                return Err(Error::CompactIndex { index: att, size: k });
            }
            if branch_at[att].is_some() {
                return Err(Error::DuplicateAttachment(att));
            }
            branch_at[att] = Some(i);
        }
        for br in &branches {
            br.validate()?;
        }

        let mut adjacency = vec![Vec::new(); k];
        for &(u, v, w) in &compact.edges {
            if u >= k {
                return Err(Error::CompactIndex { index: u, size: k });
            }
            if v >= k {
                return Err(Error::CompactIndex { index: v, size: k });
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::NonPositiveWeight(u, v, w));
            }
            if adjacency[u].iter().any(|&(x, _)| x == v) {
                return Err(Error::DuplicateEdge(u, v));
            }
            adjacency[u].push((v, w));
            adjacency[v].push((u, w));
        }
        for row in &mut adjacency {
            row.sort_by_key(|&(x, _)| x);
        }

        let mut compact_dist = vec![u32::MAX; k * k];
        for s in 0..k {
            let row = &mut compact_dist[s * k..(s + 1) * k];
            row[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                for &(y, _) in &adjacency[x] {
                    if row[y] == u32::MAX {
                        row[y] = row[x] + 1;
                        queue.push_back(y);
                    }
                }
            }
        }
        if let Some(unreached) = (0..k).find(|&v| compact_dist[v] == u32::MAX) {
            return Err(Error::Disconnected(unreached));
        }

        Ok(StarLikeGraph { compact, branches, adjacency, compact_dist, branch_at })
    }

    pub fn compact(&self) -> &CompactComponent {
        &self.compact
    }

    pub fn compact_size(&self) -> usize {
        self.compact.size
    }

    /// Number of branches `m`.
    pub fn m(&self) -> usize {
        self.branches.len()
    }

    pub fn branches(&self) -> &[BranchCoefficients] {
        &self.branches
    }

    /// Coefficients of branch `i` (1-based).
    pub fn branch(&self, i: usize) -> &BranchCoefficients {
        &self.branches[i - 1]
    }

    /// Compact index of `phi_i(0)` (1-based `i`).
    pub fn attachment(&self, i: usize) -> usize {
        self.compact.attachments[i - 1]
    }

    /// 1-based branch attached at compact vertex `c`, if any.
    pub fn branch_at(&self, c: usize) -> Option<usize> {
        self.branch_at[c].map(|i| i + 1)
    }

    pub fn compact_neighbors(&self, c: usize) -> &[(usize, f64)] {
        &self.adjacency[c]
    }

    pub fn compact_distance(&self, u: usize, v: usize) -> usize {
        self.compact_dist[u * self.compact.size + v] as usize
    }

    pub fn contains(&self, v: VertexId) -> bool {
        match v {
            VertexId::Compact(c) => c < self.compact.size,
            VertexId::Branch(i, n) => i >= 1 && i <= self.m() && n >= 1,
        }
    }

    pub fn check(&self, v: VertexId) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::InvalidVertex(v))
        }
    }

    pub fn potential(&self, v: VertexId) -> f64 {
        match v {
            VertexId::Compact(c) => self.compact.potential[c],
            VertexId::Branch(i, n) => self.branches[i - 1].b(n),
        }
    }

    /// Neighbours of `v` with edge weights, in vertex order.
    pub fn neighbors(&self, v: VertexId) -> Result<Vec<(VertexId, f64)>> {
        self.check(v)?;
        let mut out = Vec::with_capacity(4);
        match v {
            VertexId::Compact(c) => {
                out.extend(self.adjacency[c].iter().map(|&(x, w)| (VertexId::Compact(x), w)));
                if let Some(i) = self.branch_at[c] {
                    out.push((VertexId::Branch(i + 1, 1), self.branches[i].a(1)));
                }
            }
            VertexId::Branch(i, n) => {
                let br = &self.branches[i - 1];
                let prev = if n == 1 {
                    VertexId::Compact(self.attachment(i))
                } else {
                    VertexId::Branch(i, n - 1)
                };
                out.push((prev, br.a(n)));
                out.push((VertexId::Branch(i, n + 1), br.a(n + 1)));
            }
        }
        Ok(out)
    }

    /// Graph distance. Paths between two vertices of one branch never leave it.
    pub fn distance(&self, u: VertexId, v: VertexId) -> Result<usize> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.distance_unchecked(u, v))
    }

    pub(crate) fn distance_unchecked(&self, u: VertexId, v: VertexId) -> usize {
        use VertexId::*;
        match (u, v) {
            (Compact(x), Compact(y)) => self.compact_distance(x, y),
            (Compact(x), Branch(i, n)) | (Branch(i, n), Compact(x)) => {
                n + self.compact_distance(self.attachment(i), x)
            }
            (Branch(i, n), Branch(j, k)) if i == j => n.abs_diff(k),
            (Branch(i, n), Branch(j, k)) => {
                n + k + self.compact_distance(self.attachment(i), self.attachment(j))
            }
        }
    }

    /// `dist(v, K)`.
    pub fn depth(&self, v: VertexId) -> usize {
        match v {
            VertexId::Compact(_) => 0,
            VertexId::Branch(_, n) => n,
        }
    }

    /// Weight `f(v) = dist(v, K) + 1` of the scales `H_+` / `H_-`.
    pub fn weight_fn(&self, v: VertexId) -> f64 {
        (self.depth(v) + 1) as f64
    }

    /// `B_r(v)` in vertex order.
    pub fn ball(&self, v: VertexId, radius: usize) -> Result<Vec<VertexId>> {
        self.check(v)?;
        let mut out: Vec<VertexId> = (0..self.compact.size)
            .map(VertexId::Compact)
            .filter(|&c| self.distance_unchecked(v, c) <= radius)
            .collect();
        for i in 1..=self.m() {
            // depth range of branch i within the ball
            let (lo, hi) = match v {
                VertexId::Branch(j, n) if j == i => (n.saturating_sub(radius).max(1), n + radius),
                _ => {
                    let head = self.distance_unchecked(v, VertexId::Compact(self.attachment(i)));
                    if head >= radius {
                        continue;
                    }
                    (1, radius - head)
                }
            };
            out.extend((lo..=hi).map(|n| VertexId::Branch(i, n)));
        }
        out.sort();
        Ok(out)
    }

    /// `|dB_r(v)|`.
    pub fn sphere_size(&self, v: VertexId, radius: usize) -> Result<usize> {
        Ok(self
            .ball(v, radius)?
            .into_iter()
            .filter(|&u| self.distance_unchecked(u, v) == radius)
            .count())
    }

    /// Gershgorin bound on the operator norm.
    pub fn norm_bound(&self) -> f64 {
        let mut bound: f64 = 0.0;
        for c in 0..self.compact.size {
            let mut row = self.compact.potential[c].abs();
            row += self.adjacency[c].iter().map(|&(_, w)| w).sum::<f64>();
            if let Some(i) = self.branch_at[c] {
                row += self.branches[i].a(1).abs();
            }
            bound = bound.max(row);
        }
        for br in &self.branches {
            bound = bound.max(2.0 * br.a.bound() + br.b.bound());
        }
        bound
    }

    /// Largest edge weight degree of any vertex (branch vertices have degree 2).
    pub fn max_degree(&self) -> usize {
        (0..self.compact.size)
            .map(|c| self.adjacency[c].len() + usize::from(self.branch_at[c].is_some()))
            .max()
            .unwrap_or(0)
            .max(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use VertexId::*;

    fn half_line() -> StarLikeGraph {
        build_star_like(CompactComponent::single(0.0), vec![BranchCoefficients::free()]).unwrap()
    }

    fn star(m: usize) -> StarLikeGraph {
        build_star_like(CompactComponent::star(m), vec![BranchCoefficients::free(); m]).unwrap()
    }

    #[test]
    fn free_half_line_neighbors() {
        let g = half_line();
        assert_eq!(g.neighbors(Branch(1, 1)).unwrap(), vec![(Compact(0), 1.0), (Branch(1, 2), 1.0)]);
        assert_eq!(g.neighbors(Branch(1, 5)).unwrap(), vec![(Branch(1, 4), 1.0), (Branch(1, 6), 1.0)]);
        assert_eq!(g.neighbors(Compact(0)).unwrap(), vec![(Branch(1, 1), 1.0)]);
    }

    #[test]
    fn star_hub_has_three_neighbors() {
        let g = star(3);
        let hub = g.neighbors(Compact(0)).unwrap();
        assert_eq!(hub, vec![(Compact(1), 1.0), (Compact(2), 1.0), (Compact(3), 1.0)]);
    }

    #[test]
    fn duplicate_attachment_rejected() {
        let compact = CompactComponent {
            size: 2,
            edges: vec![(0, 1, 1.0)],
            potential: vec![0.0; 2],
            attachments: vec![0, 0],
        };
        let err = build_star_like(compact, vec![BranchCoefficients::free(); 2]).unwrap_err();
        assert_eq!(err, Error::DuplicateAttachment(0));
    }

    #[test]
    fn non_positive_weight_and_disconnected_rejected() {
        let mut compact = CompactComponent::star(2);
        compact.edges[0].2 = 0.0;
        assert!(matches!(
            build_star_like(compact, vec![BranchCoefficients::free(); 2]),
            Err(Error::NonPositiveWeight(..))
        ));
        let compact = CompactComponent {
            size: 2,
            edges: vec![],
            potential: vec![0.0; 2],
            attachments: vec![0],
        };
        assert_eq!(
            build_star_like(compact, vec![BranchCoefficients::free()]).unwrap_err(),
            Error::Disconnected(1)
        );
    }

    #[test]
    fn triangle_corner_neighbors() {
        let compact = CompactComponent {
            size: 3,
            edges: vec![(0, 1, 2.0), (1, 2, 3.0), (0, 2, 5.0)],
            potential: vec![0.0; 3],
            attachments: vec![0, 1, 2],
        };
        let g = build_star_like(compact, vec![BranchCoefficients::free(); 3]).unwrap();
        assert_eq!(
            g.neighbors(Compact(0)).unwrap(),
            vec![(Compact(1), 2.0), (Compact(2), 5.0), (Branch(1, 1), 1.0)]
        );
    }

    #[test]
    fn distances() {
        let g = half_line();
        assert_eq!(g.distance(Branch(1, 3), Branch(1, 7)).unwrap(), 4);
        assert_eq!(g.distance(Branch(1, 3), Branch(1, 3)).unwrap(), 0);
        let s = star(2);
        assert_eq!(s.distance(Branch(1, 1), Branch(2, 1)).unwrap(), 4);
        assert_eq!(s.distance(Compact(0), Branch(2, 3)).unwrap(), 4);
        assert!(s.distance(Branch(3, 1), Compact(0)).is_err());
    }

    #[test]
    fn weight_function() {
        let g = star(2);
        assert_eq!(g.weight_fn(Compact(2)), 1.0);
        assert_eq!(g.weight_fn(Branch(1, 4)), 5.0);
    }

    #[test]
    fn ball_matches_distance_filter() {
        let g = star(3);
        for v in [Compact(0), Compact(2), Branch(1, 1), Branch(3, 4)] {
            for r in 0..6 {
                let ball = g.ball(v, r).unwrap();
                for &u in &ball {
                    assert!(g.distance(u, v).unwrap() <= r);
                }
                // every neighbour of an interior ball vertex is in the ball
                for &u in &ball {
                    if g.distance(u, v).unwrap() < r {
                        for (w, _) in g.neighbors(u).unwrap() {
                            assert!(ball.contains(&w), "{w} missing from B_{r}({v})");
                        }
                    }
                }
            }
        }
    }
}
