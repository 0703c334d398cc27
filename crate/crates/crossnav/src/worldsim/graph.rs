//! Procedural viewpoint graphs and geodesic distances.

use crate::error::{Error, Result};
use crate::mathcore::{mix_seed, mix_seed3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Mean spacing between viewpoints, meters. The world covers a square of
/// side `SPACING · sqrt(n_viewpoints)`.
pub const SPACING: f64 = 2.0;

const GEOMETRY_SALT: u64 = 0x6765_6f6d; // "geom"
const LANDMARK_SALT: u64 = 0x6c61_6e64; // "land"

/// Generation knobs for one world.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldConfig {
    pub n_viewpoints: usize,
    /// Target average degree of the random geometric graph before the
    /// connectivity augmentation.
    pub mean_degree: f64,
    pub feature_dim: usize,
    /// Number of panoramic patches `m` (heading sectors).
    pub patch_count: usize,
    pub landmark_vocab: usize,
    /// Standard deviation of the Gaussian noise added to patch features.
    pub noise_sigma: f64,
    /// The 4-dim orientation feature is tiled this many times.
    pub tile_factor: usize,
    /// Seed of the landmark embedding table. Shared across all worlds of a
    /// dataset so the same landmark looks the same everywhere.
    pub landmark_seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            n_viewpoints: 40,
            mean_degree: 3.0,
            feature_dim: 32,
            patch_count: 8,
            landmark_vocab: 12,
            noise_sigma: 0.1,
            tile_factor: 4,
            landmark_seed: 0x6372_6f73_736e_6176, // "crossnav"
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Viewpoint {
    pub id: u32,
    /// Position in meters; z is 0 (single floor).
    pub position: [f64; 3],
    pub landmark_id: u32,
}

/// A connected undirected graph of navigable viewpoints with
/// landmark-derived panoramic features.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldGraph {
    pub id: u32,
    /// Geometry seed; also feeds per-viewpoint observation noise.
    pub seed: u64,
    pub viewpoints: Vec<Viewpoint>,
    /// Undirected edges, stored with the smaller id first.
    pub edges: Vec<(u32, u32)>,
    pub feature_dim: usize,
    pub patch_count: usize,
    pub landmark_vocab: usize,
    pub noise_sigma: f64,
    pub tile_factor: usize,
    pub landmark_seed: u64,
    landmark_features: Vec<Vec<f64>>,
    adjacency: Vec<Vec<u32>>,
}

/// The shared landmark embedding table: `vocab` vectors of `dim` entries,
/// uniform in [-1, 1], a pure function of the seed.
pub fn landmark_feature_table(vocab: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, LANDMARK_SALT));
    (0..vocab)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

impl WorldGraph {
    /// Assemble a world from explicit parts, deriving adjacency and the
    /// landmark table. Validates edge references and positive lengths.
    pub fn assemble(
        id: u32,
        seed: u64,
        viewpoints: Vec<Viewpoint>,
        edges: Vec<(u32, u32)>,
        config: &WorldConfig,
    ) -> Result<Self> {
        let n = viewpoints.len();
        for (i, v) in viewpoints.iter().enumerate() {
            if v.id as usize != i {
                return Err(Error::InvalidArgument(
                    "viewpoint ids must be 0..n in order".into(),
                ));
            }
            if v.landmark_id as usize >= config.landmark_vocab {
                return Err(Error::InvalidArgument(format!(
                    "landmark id {} outside vocab {}",
                    v.landmark_id, config.landmark_vocab
                )));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &edges {
            if a as usize >= n || b as usize >= n || a == b {
                return Err(Error::InvalidArgument(format!("bad edge ({a}, {b})")));
            }
            adjacency[a as usize].push(b);
            adjacency[b as usize].push(a);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
        let world = Self {
            id,
            seed,
            viewpoints,
            edges,
            feature_dim: config.feature_dim,
            patch_count: config.patch_count,
            landmark_vocab: config.landmark_vocab,
            noise_sigma: config.noise_sigma,
            tile_factor: config.tile_factor,
            landmark_seed: config.landmark_seed,
            landmark_features: landmark_feature_table(
                config.landmark_vocab,
                config.feature_dim,
                config.landmark_seed,
            ),
            adjacency: Vec::new(),
        };
        let mut world = world;
        world.adjacency = adjacency;
        for &(a, b) in &world.edges {
            if world.edge_length(a, b) <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a}, {b}) has non-positive length"
                )));
            }
        }
        Ok(world)
    }

    pub fn n_viewpoints(&self) -> usize {
        self.viewpoints.len()
    }

    /// Sorted neighbor ids of a viewpoint.
    pub fn neighbors(&self, viewpoint: u32) -> &[u32] {
        &self.adjacency[viewpoint as usize]
    }

    pub fn contains(&self, viewpoint: u32) -> bool {
        (viewpoint as usize) < self.viewpoints.len()
    }

    pub fn position(&self, viewpoint: u32) -> [f64; 3] {
        self.viewpoints[viewpoint as usize].position
    }

    pub fn landmark_of(&self, viewpoint: u32) -> u32 {
        self.viewpoints[viewpoint as usize].landmark_id
    }

    /// Embedding of one landmark id.
    pub fn landmark_feature(&self, landmark: u32) -> &[f64] {
        &self.landmark_features[landmark as usize]
    }

    pub fn edge_length(&self, a: u32, b: u32) -> f64 {
        let pa = self.position(a);
        let pb = self.position(b);
        ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2)).sqrt()
    }

    /// True when every viewpoint is reachable from viewpoint 0.
    pub fn is_connected(&self) -> bool {
        if self.viewpoints.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.n_viewpoints()];
        let mut stack = vec![0u32];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in self.neighbors(v) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Geodesic distances (meters) from `source` to every viewpoint.
    pub fn distances_from(&self, source: u32) -> Result<Vec<f64>> {
        if !self.contains(source) {
            return Err(Error::InvalidArgument(format!(
                "unknown viewpoint {source}"
            )));
        }
        let n = self.n_viewpoints();
        let mut dist = vec![f64::INFINITY; n];
        dist[source as usize] = 0.0;
        let mut heap: BinaryHeap<Reverse<HeapEntry>> = BinaryHeap::new();
        heap.push(Reverse(HeapEntry {
            dist: 0.0,
            node: source,
        }));
        while let Some(Reverse(entry)) = heap.pop() {
            if entry.dist > dist[entry.node as usize] {
                continue;
            }
            for &next in self.neighbors(entry.node) {
                let cand = entry.dist + self.edge_length(entry.node, next);
                if cand < dist[next as usize] {
                    dist[next as usize] = cand;
                    heap.push(Reverse(HeapEntry {
                        dist: cand,
                        node: next,
                    }));
                }
            }
        }
        Ok(dist)
    }

    /// Hop counts (breadth-first) from `source`, `usize::MAX` if unreachable.
    pub fn hops_from(&self, source: u32) -> Vec<usize> {
        let n = self.n_viewpoints();
        let mut hops = vec![usize::MAX; n];
        hops[source as usize] = 0;
        let mut queue = std::collections::VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            for &w in self.neighbors(v) {
                if hops[w as usize] == usize::MAX {
                    hops[w as usize] = hops[v as usize] + 1;
                    queue.push_back(w);
                }
            }
        }
        hops
    }

    /// A geodesically shortest path from `from` to `to`, inclusive.
    ///
    /// Built by walking greedily down the distance-to-target field; among
    /// next steps within 1e-9 of optimal, the smallest viewpoint id wins.
    pub fn shortest_path(&self, from: u32, to: u32) -> Result<Vec<u32>> {
        let dist = self.distances_from(to)?;
        if !self.contains(from) {
            return Err(Error::InvalidArgument(format!("unknown viewpoint {from}")));
        }
        if dist[from as usize].is_infinite() {
            return Err(Error::Generation(format!("{to} unreachable from {from}")));
        }
        let mut path = vec![from];
        let mut cur = from;
        while cur != to {
            let mut best: Option<(f64, u32)> = None;
            for &next in self.neighbors(cur) {
                let cost = self.edge_length(cur, next) + dist[next as usize];
                match best {
                    None => best = Some((cost, next)),
                    Some((bc, _)) if cost < bc - 1e-9 => best = Some((cost, next)),
                    _ => {}
                }
            }
            let (_, next) = best.ok_or_else(|| {
                Error::Generation(format!("viewpoint {cur} has no neighbors"))
            })?;
            path.push(next);
            cur = next;
            if path.len() > self.n_viewpoints() {
                return Err(Error::Numeric("shortest-path walk failed to terminate".into()));
            }
        }
        Ok(path)
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.node.cmp(&other.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Convenience wrapper: geodesic distance between two viewpoints.
pub fn geodesic_distance(world: &WorldGraph, from: u32, to: u32) -> Result<f64> {
    if !world.contains(to) {
        return Err(Error::InvalidArgument(format!("unknown viewpoint {to}")));
    }
    let d = world.distances_from(from)?[to as usize];
    if d.is_infinite() {
        return Err(Error::Generation(format!("{to} unreachable from {from}")));
    }
    Ok(d)
}

/// Generate a world: a random geometric graph over uniform positions,
/// augmented with minimum-length edges until connected, each viewpoint
/// carrying a landmark id. Deterministic given `(config, seed)`.
pub fn generate_world(config: &WorldConfig, id: u32, seed: u64) -> Result<WorldGraph> {
    let n = config.n_viewpoints;
    if n < 2 {
        return Err(Error::Generation("need at least 2 viewpoints".into()));
    }
    if config.mean_degree >= n as f64 {
        return Err(Error::Generation(format!(
            "mean_degree {} unsatisfiable with {} viewpoints",
            config.mean_degree, n
        )));
    }
    if config.landmark_vocab == 0 || config.patch_count == 0 || config.feature_dim == 0 {
        return Err(Error::Generation("empty vocab, patches, or features".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed3(seed, GEOMETRY_SALT, id as u64));
    let side = SPACING * (n as f64).sqrt();
    let viewpoints: Vec<Viewpoint> = (0..n)
        .map(|i| Viewpoint {
            id: i as u32,
            position: [
                rng.random_range(0.0..side),
                rng.random_range(0.0..side),
                0.0,
            ],
            landmark_id: rng.random_range(0..config.landmark_vocab as u32),
        })
        .collect();

    let sq = |dv: f64| dv * dv;
    let dist2 = |a: &Viewpoint, b: &Viewpoint| {
        sq(a.position[0] - b.position[0]) + sq(a.position[1] - b.position[1])
    };
    // Radius for the target mean degree: density · π r² = mean_degree.
    let radius2 = config.mean_degree * side * side / (std::f64::consts::PI * n as f64);

    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut uf = UnionFind::new(n);
    for a in 0..n {
        for b in (a + 1)..n {
            let d2 = dist2(&viewpoints[a], &viewpoints[b]);
            if d2 > 0.0 && d2 <= radius2 {
                edges.push((a as u32, b as u32));
                uf.union(a, b);
            }
        }
    }
    // Connectivity augmentation: Kruskal over the remaining pairs.
    let mut rest: Vec<(f64, u32, u32)> = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if uf.find(a) != uf.find(b) {
                let d2 = dist2(&viewpoints[a], &viewpoints[b]);
                if d2 > 0.0 {
                    rest.push((d2, a as u32, b as u32));
                }
            }
        }
    }
    rest.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    for (_, a, b) in rest {
        if uf.union(a as usize, b as usize) {
            edges.push((a, b));
        }
    }

    let world = WorldGraph::assemble(id, seed, viewpoints, edges, config)?;
    if !world.is_connected() {
        return Err(Error::Generation("augmentation left the graph disconnected".into()));
    }
    Ok(world)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    /// Returns true when the two sets were previously distinct.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}
