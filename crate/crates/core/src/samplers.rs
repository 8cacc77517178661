//! Mini-batch construction: Random Node Sampling and four structure-based
//! baselines (ClusterGCN, GraphSAINT random walks, neighbor sampling, LADIES).
//!
//! Every sampler is a pure function of `(graph, config, seed, epoch)`: the
//! generator for epoch `e` is derived from the sampler seed and `e`, so any
//! epoch can be regenerated on its own.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::graph::{gather_rows, induced_subgraph, Adjacency, Batch, Csr, Graph, LayerAdj};
use crate::rng::{derive, Rng, SeedPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SamplerKind {
    Rns,
    Cluster,
    SaintRw,
    Neighbor,
    Ladies,
}

impl SamplerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::Rns => "rns",
            SamplerKind::Cluster => "cluster",
            SamplerKind::SaintRw => "saint_rw",
            SamplerKind::Neighbor => "neighbor",
            SamplerKind::Ladies => "ladies",
        }
    }

    pub fn parse(s: &str) -> Option<SamplerKind> {
        Some(match s.trim() {
            "rns" => SamplerKind::Rns,
            "cluster" => SamplerKind::Cluster,
            "saint_rw" | "saint" => SamplerKind::SaintRw,
            "neighbor" => SamplerKind::Neighbor,
            "ladies" => SamplerKind::Ladies,
            _ => return None,
        })
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerConfig {
    Rns { num_parts: usize },
    Cluster { num_clusters: usize, clusters_per_batch: usize },
    SaintRw { walk_length: usize, num_seeds: usize },
    Neighbor { fanout: Vec<usize>, batch_size: usize },
    Ladies { budgets: Vec<usize>, batch_size: usize },
}

impl SamplerConfig {
    pub fn kind(&self) -> SamplerKind {
        match self {
            SamplerConfig::Rns { .. } => SamplerKind::Rns,
            SamplerConfig::Cluster { .. } => SamplerKind::Cluster,
            SamplerConfig::SaintRw { .. } => SamplerKind::SaintRw,
            SamplerConfig::Neighbor { .. } => SamplerKind::Neighbor,
            SamplerConfig::Ladies { .. } => SamplerKind::Ladies,
        }
    }

    /// Model depth the sampler is built for, when it produces layer stacks.
    pub fn depth(&self) -> Option<usize> {
        match self {
            SamplerConfig::Neighbor { fanout, .. } => Some(fanout.len()),
            SamplerConfig::Ladies { budgets, .. } => Some(budgets.len()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(m.to_string()));
        match self {
            SamplerConfig::Rns { num_parts } if *num_parts == 0 => bad("num_parts must be >= 1"),
            SamplerConfig::Cluster {
                num_clusters,
                clusters_per_batch,
            } => {
                if *num_clusters == 0 || *clusters_per_batch == 0 {
                    bad("num_clusters and clusters_per_batch must be >= 1")
                } else if clusters_per_batch > num_clusters {
                    bad("clusters_per_batch must not exceed num_clusters")
                } else {
                    Ok(())
                }
            }
            SamplerConfig::SaintRw {
                walk_length,
                num_seeds,
            } if *walk_length == 0 || *num_seeds == 0 => bad("walk_length and num_seeds must be >= 1"),
            SamplerConfig::Neighbor { fanout: v, batch_size } | SamplerConfig::Ladies { budgets: v, batch_size } => {
                if v.is_empty() || v.contains(&0) {
                    bad("fanout/budget entries must be >= 1 and non-empty")
                } else if *batch_size == 0 {
                    bad("batch_size must be >= 1")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// All batches of one epoch, in processing order.
#[derive(Debug, Clone)]
pub struct EpochPlan {
    pub batches: Vec<Batch>,
}

impl EpochPlan {
    pub fn steps_per_epoch(&self) -> usize {
        self.batches.len()
    }
}

/// A configured sampler bound to one graph. ClusterGCN's partition is
/// computed once at construction.
#[derive(Debug, Clone)]
pub struct Sampler {
    config: SamplerConfig,
    seed: SeedPath,
    clusters: Vec<Vec<usize>>,
}

impl Sampler {
    pub fn new(g: &Graph, config: SamplerConfig, seed: u64) -> Result<Sampler> {
        config.validate()?;
        let seed = derive(seed, &["sampler", config.kind().as_str()]);
        let clusters = match &config {
            SamplerConfig::Rns { num_parts } if *num_parts > g.num_nodes() => {
                return Err(Error::config(format!(
                    "num_parts = {num_parts} exceeds node count {}",
                    g.num_nodes()
                )))
            }
            SamplerConfig::Cluster { num_clusters, .. } => {
                if *num_clusters > g.num_nodes() {
                    return Err(Error::config("num_clusters exceeds node count"));
                }
                bfs_partition(g.csr(), *num_clusters, &mut seed.tag("partition").rng())
            }
            _ => Vec::new(),
        };
        Ok(Sampler { config, seed, clusters })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn kind(&self) -> SamplerKind {
        self.config.kind()
    }

    /// ClusterGCN partition (empty for other samplers).
    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn epoch(&self, g: &Graph, epoch: u64) -> Result<EpochPlan> {
        let mut rng = self.seed.child(epoch).rng();
        let mut batches = match &self.config {
            SamplerConfig::Rns { num_parts } => rns_epoch(g, *num_parts, &mut rng)?,
            SamplerConfig::Cluster { clusters_per_batch, .. } => {
                cluster_epoch(g, &self.clusters, *clusters_per_batch, &mut rng)?
            }
            SamplerConfig::SaintRw {
                walk_length,
                num_seeds,
            } => saint_rw_epoch(g, *walk_length, *num_seeds, &mut rng)?,
            SamplerConfig::Neighbor { fanout, batch_size } => neighbor_epoch(g, fanout, *batch_size, &mut rng)?,
            SamplerConfig::Ladies { budgets, batch_size } => ladies_epoch(g, budgets, *batch_size, &mut rng)?,
        };
        for b in &mut batches {
            b.sampler = Some(self.kind());
        }
        Ok(EpochPlan { batches })
    }

    /// Draws consecutive epoch plans starting at epoch 0 until `count` batches
    /// are collected; the last plan is truncated.
    pub fn take_batches(&self, g: &Graph, count: usize) -> Result<Vec<Batch>> {
        let mut out = Vec::with_capacity(count);
        let mut epoch = 0;
        while out.len() < count {
            let plan = self.epoch(g, epoch)?;
            if plan.batches.is_empty() {
                return Err(Error::config("sampler produced an empty epoch"));
            }
            out.extend(plan.batches.into_iter().take(count - out.len()));
            epoch += 1;
        }
        Ok(out)
    }
}

/// Random Node Sampling: a uniform permutation cut into `m` blocks of
/// `⌊N/m⌋` nodes; the `N mod m` trailing nodes sit out this epoch. Each block
/// is sorted and turned into its induced subgraph.
pub fn rns_epoch(g: &Graph, m: usize, rng: &mut Rng) -> Result<Vec<Batch>> {
    rns_blocks(g.num_nodes(), m, rng)?
        .iter()
        .map(|block| induced_subgraph(g, block))
        .collect()
}

/// The node blocks of one RNS epoch, each sorted ascending.
pub fn rns_blocks(n: usize, m: usize, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    if m == 0 || m > n {
        return Err(Error::config(format!("RNS needs 1 <= m <= N, got m = {m}, N = {n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let b = n / m;
    Ok(perm
        .chunks_exact(b)
        .take(m)
        .map(|c| {
            let mut block = c.to_vec();
            block.sort_unstable();
            block
        })
        .collect())
}

/// Balanced greedy BFS region growing: clusters are grown one at a time from
/// a random unassigned seed until they reach their target size, jumping to a
/// new random seed when the current region runs out of frontier.
pub fn bfs_partition(csr: &Csr, num_clusters: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let n = csr.num_nodes();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut assigned = vec![false; n];
    let mut cursor = 0;
    let mut clusters = Vec::with_capacity(num_clusters);
    let mut queue = VecDeque::new();
    for c in 0..num_clusters {
        let target = n / num_clusters + usize::from(c < n % num_clusters);
        let mut members = Vec::with_capacity(target);
        queue.clear();
        while members.len() < target {
            let Some(u) = queue.pop_front() else {
                while assigned[order[cursor]] {
                    cursor += 1;
                }
                let s = order[cursor];
                assigned[s] = true;
                members.push(s);
                queue.push_back(s);
                continue;
            };
            for &w in csr.neighbors(u) {
                if members.len() >= target {
                    break;
                }
                if !assigned[w] {
                    assigned[w] = true;
                    members.push(w);
                    queue.push_back(w);
                }
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    clusters
}

/// One ClusterGCN epoch: clusters are shuffled and consumed
/// `clusters_per_batch` at a time; leftover clusters are dropped.
pub fn cluster_epoch(g: &Graph, clusters: &[Vec<usize>], clusters_per_batch: usize, rng: &mut Rng) -> Result<Vec<Batch>> {
    if clusters_per_batch == 0 || clusters_per_batch > clusters.len() {
        return Err(Error::config("clusters_per_batch must be in 1..=num_clusters"));
    }
    let mut ids: Vec<usize> = (0..clusters.len()).collect();
    ids.shuffle(rng);
    ids.chunks_exact(clusters_per_batch)
        .map(|group| {
            let mut nodes: Vec<usize> = group.iter().flat_map(|&c| clusters[c].iter().copied()).collect();
            nodes.sort_unstable();
            induced_subgraph(g, &nodes)
        })
        .collect()
}

pub fn saint_steps_per_epoch(n: usize, walk_length: usize, num_seeds: usize) -> usize {
    (n / (walk_length * num_seeds)).max(1)
}

/// GraphSAINT random-walk sampler: per step, `num_seeds` uniform roots each
/// walk `walk_length` uniform-neighbor steps (stopping at isolated nodes); the
/// batch is the subgraph induced by all visited nodes.
pub fn saint_rw_epoch(g: &Graph, walk_length: usize, num_seeds: usize, rng: &mut Rng) -> Result<Vec<Batch>> {
    if walk_length == 0 || num_seeds == 0 {
        return Err(Error::config("walk_length and num_seeds must be >= 1"));
    }
    let n = g.num_nodes();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let steps = saint_steps_per_epoch(n, walk_length, num_seeds);
    let mut visited = vec![false; n];
    (0..steps)
        .map(|_| {
            let mut nodes = Vec::new();
            for _ in 0..num_seeds {
                let mut cur = rng.random_range(0..n);
                if !visited[cur] {
                    visited[cur] = true;
                    nodes.push(cur);
                }
                for _ in 0..walk_length {
                    let nbrs = g.neighbors(cur);
                    if nbrs.is_empty() {
                        break;
                    }
                    cur = nbrs[rng.random_range(0..nbrs.len())];
                    if !visited[cur] {
                        visited[cur] = true;
                        nodes.push(cur);
                    }
                }
            }
            for &v in &nodes {
                visited[v] = false;
            }
            nodes.sort_unstable();
            induced_subgraph(g, &nodes)
        })
        .collect()
}

/// Entry of the symmetric-normalized adjacency with self-loops,
/// `D̃^{-1/2}(A+I)D̃^{-1/2}`, for an existing edge or the diagonal.
#[inline]
pub(crate) fn gcn_weight(g: &Graph, u: usize, v: usize) -> f64 {
    1.0 / (((g.degree(u) + 1) * (g.degree(v) + 1)) as f64).sqrt()
}

fn shuffled_train_chunks(g: &Graph, batch_size: usize, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::config("batch_size must be >= 1"));
    }
    let mut seeds = g.train_nodes();
    if seeds.is_empty() {
        return Err(Error::EmptyTargets("graph has no training nodes".into()));
    }
    seeds.shuffle(rng);
    Ok(seeds.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Local node table shared by the layer-wise samplers.
struct LocalNodes {
    ids: Vec<usize>,
    index: HashMap<usize, usize>,
}

impl LocalNodes {
    fn new(seeds: &[usize]) -> Self {
        let index = seeds.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        LocalNodes {
            ids: seeds.to_vec(),
            index,
        }
    }

    /// Returns the local id and whether the node is new.
    fn insert(&mut self, v: usize) -> (usize, bool) {
        if let Some(&l) = self.index.get(&v) {
            return (l, false);
        }
        let l = self.ids.len();
        self.ids.push(v);
        self.index.insert(v, l);
        (l, true)
    }
}

fn layered_batch(g: &Graph, nodes: LocalNodes, num_targets: usize, stack: Vec<LayerAdj>) -> Batch {
    let n = nodes.ids.len();
    let mut pairs = Vec::new();
    for layer in &stack {
        for dst in 0..layer.num_nodes() {
            pairs.extend(layer.in_edges(dst).map(|(src, _)| (dst, src)));
        }
    }
    Batch {
        features: gather_rows(g.features(), &nodes.ids),
        labels: nodes.ids.iter().map(|&v| g.labels()[v]).collect(),
        adjacency: Adjacency::Layered {
            stack,
            union: Csr::from_edges(n, pairs),
        },
        train_targets: (0..num_targets).collect(),
        global_ids: nodes.ids,
        sampler: None,
    }
}

/// Neighbor sampling batch for the given seeds. Hop `h` (1-based) expands
/// every newly reached node by `min(fanout[h-1], deg)` distinct uniformly
/// chosen neighbors. Layer `ℓ` of the returned stack (input side first)
/// carries the in-edges of nodes at hop distance `<= L-1-ℓ`, with GCN weights
/// rescaled by `deg/k` so each row estimates the full normalized row.
pub fn neighbor_batch(g: &Graph, seeds: &[usize], fanout: &[usize], rng: &mut Rng) -> Batch {
    let depth = fanout.len();
    let mut nodes = LocalNodes::new(seeds);
    let mut hop = vec![0usize; seeds.len()];
    let mut sampled: Vec<Vec<usize>> = vec![Vec::new(); seeds.len()];
    let mut frontier: Vec<usize> = (0..seeds.len()).collect();
    for (h, &f) in fanout.iter().enumerate() {
        let mut next = Vec::new();
        for &v in &frontier {
            let nbrs = g.neighbors(nodes.ids[v]);
            let k = f.min(nbrs.len());
            let picks: Vec<usize> = if k == nbrs.len() {
                nbrs.to_vec()
            } else {
                index::sample(rng, nbrs.len(), k).into_iter().map(|i| nbrs[i]).collect()
            };
            let mut locals = Vec::with_capacity(k);
            for u in picks {
                let (l, new) = nodes.insert(u);
                if new {
                    hop.push(h + 1);
                    sampled.push(Vec::new());
                    next.push(l);
                }
                locals.push(l);
            }
            sampled[v] = locals;
        }
        frontier = next;
    }
    let n = nodes.ids.len();
    let stack = (0..depth)
        .map(|layer| {
            let reach = depth - 1 - layer;
            let mut rows = vec![Vec::new(); n];
            let mut self_weight = vec![0.0; n];
            for v in 0..n {
                if hop[v] > reach {
                    continue;
                }
                let gv = nodes.ids[v];
                let k = sampled[v].len();
                let scale = if k == 0 { 0.0 } else { g.degree(gv) as f64 / k as f64 };
                rows[v] = sampled[v]
                    .iter()
                    .map(|&u| (u, gcn_weight(g, gv, nodes.ids[u]) * scale))
                    .collect();
                self_weight[v] = 1.0 / (g.degree(gv) + 1) as f64;
            }
            LayerAdj::from_rows(rows, self_weight)
        })
        .collect();
    layered_batch(g, nodes, seeds.len(), stack)
}

/// One epoch of neighbor sampling: shuffled training nodes in chunks of
/// `batch_size`, each chunk expanded with [`neighbor_batch`].
pub fn neighbor_epoch(g: &Graph, fanout: &[usize], batch_size: usize, rng: &mut Rng) -> Result<Vec<Batch>> {
    if fanout.is_empty() || fanout.contains(&0) {
        return Err(Error::config("fanout entries must be >= 1"));
    }
    let chunks = shuffled_train_chunks(g, batch_size, rng)?;
    Ok(chunks.iter().map(|seeds| neighbor_batch(g, seeds, fanout, rng)).collect())
}

/// LADIES importance scores `q_i = Σ_{j ∈ upper} Â_{ij}²` over the one-hop
/// neighbors of `upper` (global ids), keyed by global id.
pub fn ladies_scores(g: &Graph, upper: &[usize]) -> BTreeMap<usize, f64> {
    let mut q = BTreeMap::new();
    for &j in upper {
        for &i in g.neighbors(j) {
            let a = gcn_weight(g, i, j);
            *q.entry(i).or_insert(0.0) += a * a;
        }
    }
    q
}

/// Layer-dependent importance sampling batch. From the output layer down,
/// `budgets[ℓ]` nodes are drawn without replacement from the neighbors of the
/// current upper set with probability `p_i ∝ q_i`; sampled edges carry
/// `Â_{ji} / (s·p_i)`, or plain `Â_{ji}` when the whole pool fits in the
/// budget. Upper nodes keep their self-loop term and stay available to the
/// layer below.
pub fn ladies_batch(g: &Graph, targets: &[usize], budgets: &[usize], rng: &mut Rng) -> Batch {
    let depth = budgets.len();
    let mut nodes = LocalNodes::new(targets);
    let mut upper: Vec<usize> = (0..targets.len()).collect();
    // Per layer: weighted in-neighbor lists for the upper nodes, and the sampled lower nodes.
    type Rows = Vec<(usize, Vec<(usize, f64)>)>;
    let mut layers: Vec<(Rows, Vec<usize>)> = Vec::with_capacity(depth);
    for layer in (0..depth).rev() {
        let s = budgets[layer];
        let upper_global: Vec<usize> = upper.iter().map(|&l| nodes.ids[l]).collect();
        let q = ladies_scores(g, &upper_global);
        let total: f64 = q.values().sum();
        let chosen: Vec<(usize, f64)> = if q.len() <= s {
            q.keys().map(|&i| (i, 1.0)).collect()
        } else {
            // Efraimidis–Spirakis keys reproduce successive weighted draws
            let mut keyed: Vec<(f64, usize, f64)> = q
                .iter()
                .map(|(&i, &qi)| {
                    let u: f64 = rng.random::<f64>();
                    ((1.0 - u).ln() / qi, i, qi / total)
                })
                .collect();
            keyed.sort_by(|a, b| b.0.total_cmp(&a.0));
            keyed.truncate(s);
            keyed.into_iter().map(|(_, i, p)| (i, 1.0 / (s as f64 * p))).collect()
        };
        let scale: HashMap<usize, f64> = chosen.iter().copied().collect();
        let mut rows = Vec::with_capacity(upper.len());
        for &j in &upper {
            let gj = nodes.ids[j];
            let mut row = Vec::new();
            for &i in g.neighbors(gj) {
                if let Some(&c) = scale.get(&i) {
                    let (li, _) = nodes.insert(i);
                    row.push((li, gcn_weight(g, gj, i) * c));
                }
            }
            rows.push((j, row));
        }
        let mut next = upper.clone();
        for &(i, _) in &chosen {
            let (li, _) = nodes.insert(i);
            if !next.contains(&li) {
                next.push(li);
            }
        }
        layers.push((rows, upper));
        upper = next;
    }
    let n = nodes.ids.len();
    let stack = layers
        .into_iter()
        .rev()
        .map(|(rows, dsts)| {
            let mut full = vec![Vec::new(); n];
            let mut self_weight = vec![0.0; n];
            for (j, row) in rows {
                full[j] = row;
            }
            for j in dsts {
                self_weight[j] = 1.0 / (g.degree(nodes.ids[j]) + 1) as f64;
            }
            LayerAdj::from_rows(full, self_weight)
        })
        .collect();
    layered_batch(g, nodes, targets.len(), stack)
}

pub fn ladies_epoch(g: &Graph, budgets: &[usize], batch_size: usize, rng: &mut Rng) -> Result<Vec<Batch>> {
    if budgets.is_empty() || budgets.contains(&0) {
        return Err(Error::config("budget entries must be >= 1"));
    }
    let chunks = shuffled_train_chunks(g, batch_size, rng)?;
    Ok(chunks.iter().map(|t| ladies_batch(g, t, budgets, rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate, GenConfig};
    use crate::graph::{build_graph, Split};
    use std::collections::HashSet;

    fn toy(n: usize, edges: &[(usize, usize)]) -> Graph {
        build_graph(n, edges, &vec![vec![1.0]; n], vec![0; n], 1, vec![Split::Train; n]).unwrap()
    }

    fn rng(seed: u64) -> Rng {
        SeedPath::new(seed).rng()
    }

    fn sbm() -> Graph {
        generate(&GenConfig::sbm(vec![20, 20, 20], 0.3, 0.02, 5)).unwrap()
    }

    #[test]
    fn rns_single_part_is_whole_graph() {
        let g = sbm();
        let b = rns_epoch(&g, 1, &mut rng(0)).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].structure(), g.csr());
        assert_eq!(b[0].global_ids, (0..g.num_nodes()).collect::<Vec<_>>());
    }

    #[test]
    fn rns_partitions_nodes() {
        let g = toy(6, &[(0, 1), (2, 3)]);
        let b = rns_blocks(6, 2, &mut rng(1)).unwrap();
        assert_eq!(b.len(), 2);
        assert!(b.iter().all(|x| x.len() == 3));
        let union: HashSet<usize> = b.iter().flatten().copied().collect();
        assert_eq!(union.len(), 6);
        let g7 = toy(7, &[]);
        let blocks = rns_blocks(g7.num_nodes(), 3, &mut rng(2)).unwrap();
        assert_eq!(blocks.iter().map(Vec::len).sum::<usize>(), 6);
        assert!(rns_epoch(&g, 7, &mut rng(0)).is_err());
        assert!(rns_epoch(&g, 0, &mut rng(0)).is_err());
    }

    #[test]
    fn rns_same_block_pair_exhaustive_small() {
        // Every permutation of 6 nodes, m = 2: Pr(0 and 1 share a block) = 3·2/(6·5)
        let n = 6;
        let mut perm: Vec<usize> = (0..n).collect();
        let (mut hits, mut total) = (0u64, 0u64);
        permutations(&mut perm, 0, &mut |p| {
            total += 1;
            let block = |v: usize| p.iter().position(|&x| x == v).unwrap() / 3;
            if block(0) == block(1) && block(0) == 0 {
                hits += 1;
            }
        });
        assert_eq!(hits as f64 / total as f64, 3.0 * 2.0 / (6.0 * 5.0));
    }

    fn permutations(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == v.len() {
            f(v);
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permutations(v, k + 1, f);
            v.swap(k, i);
        }
    }

    #[test]
    fn cluster_edge_cases() {
        let g = sbm();
        let s = Sampler::new(&g, SamplerConfig::Cluster { num_clusters: 1, clusters_per_batch: 1 }, 0).unwrap();
        let plan = s.epoch(&g, 0).unwrap();
        assert_eq!(plan.steps_per_epoch(), 1);
        assert_eq!(plan.batches[0].structure(), g.csr());

        let n = g.num_nodes();
        let s = Sampler::new(&g, SamplerConfig::Cluster { num_clusters: n, clusters_per_batch: 1 }, 0).unwrap();
        let plan = s.epoch(&g, 0).unwrap();
        assert_eq!(plan.steps_per_epoch(), n);
        assert!(plan.batches.iter().all(|b| b.num_nodes() == 1 && b.num_edges() == 0));

        let two = toy(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]);
        for seed in 0..20 {
            let s = Sampler::new(&two, SamplerConfig::Cluster { num_clusters: 2, clusters_per_batch: 1 }, seed).unwrap();
            let mut cl = s.clusters().to_vec();
            cl.sort();
            assert_eq!(cl, vec![vec![0, 1, 2], vec![3, 4, 5]]);
        }
        assert!(Sampler::new(&g, SamplerConfig::Cluster { num_clusters: 2, clusters_per_batch: 3 }, 0).is_err());
    }

    #[test]
    fn cluster_partition_is_exact_and_balanced() {
        let g = generate(&GenConfig::barabasi_albert(203, 2, 1)).unwrap();
        let parts = bfs_partition(g.csr(), 10, &mut rng(3));
        let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..203).collect::<Vec<_>>());
        assert!(parts.iter().all(|p| p.len() == 20 || p.len() == 21));
        let s = Sampler::new(&g, SamplerConfig::Cluster { num_clusters: 10, clusters_per_batch: 3 }, 0).unwrap();
        assert_eq!(s.epoch(&g, 0).unwrap().steps_per_epoch(), 3);
    }

    #[test]
    fn saint_sizes_and_steps() {
        let g = sbm();
        let batches = saint_rw_epoch(&g, 1, 5, &mut rng(0)).unwrap();
        assert!(batches.iter().all(|b| b.num_nodes() <= 10));
        assert_eq!(saint_steps_per_epoch(120, 4, 2), 15);
        assert_eq!(saint_steps_per_epoch(10, 4, 5), 1);
        let lonely = toy(3, &[(1, 2)]);
        for seed in 0..20 {
            for b in saint_rw_epoch(&lonely, 3, 1, &mut rng(seed)).unwrap() {
                if b.global_ids.contains(&0) {
                    assert_eq!(b.global_ids, vec![0]);
                }
            }
        }
    }

    #[test]
    fn neighbor_exhaustive_fanout_is_full_neighborhood() {
        let g = sbm();
        let seeds = [0, 5, 33];
        let b = neighbor_batch(&g, &seeds, &[1000, 1000], &mut rng(0));
        let Adjacency::Layered { stack, .. } = &b.adjacency else { panic!() };
        let top = &stack[1];
        for (l, &v) in seeds.iter().enumerate() {
            let mut got: Vec<usize> = top.in_edges(l).map(|(s, _)| b.global_ids[s]).collect();
            got.sort_unstable();
            assert_eq!(got, g.neighbors(v));
            let row: f64 = top.in_edges(l).map(|(s, w)| w * b.features[[s, 0]]).sum::<f64>() + top.self_weight[l] * b.features[[l, 0]];
            let exact: f64 = g.neighbors(v).iter().map(|&u| gcn_weight(&g, v, u) * g.features()[[u, 0]]).sum::<f64>()
                + gcn_weight(&g, v, v) * g.features()[[v, 0]];
            assert!((row - exact).abs() < 1e-12);
        }
        assert_eq!(b.train_targets, vec![0, 1, 2]);
    }

    #[test]
    fn neighbor_isolated_seed_and_star_cap() {
        let g = toy(3, &[(1, 2)]);
        let b = neighbor_batch(&g, &[0], &[3, 3], &mut rng(0));
        assert_eq!(b.global_ids, vec![0]);

        let star = toy(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]);
        for seed in 0..10 {
            let b = neighbor_batch(&star, &[0], &[2], &mut rng(seed));
            let Adjacency::Layered { stack, .. } = &b.adjacency else { panic!() };
            let leaves: HashSet<usize> = stack[0].in_edges(0).map(|(s, _)| b.global_ids[s]).collect();
            assert_eq!(leaves.len(), 2);
            assert!(!leaves.contains(&0));
        }
    }

    #[test]
    fn neighbor_epoch_covers_train_nodes_once() {
        let g = sbm();
        let batches = neighbor_epoch(&g, &[3, 2], 7, &mut rng(4)).unwrap();
        let n_train = g.train_nodes().len();
        assert_eq!(batches.len(), n_train.div_ceil(7));
        let mut seeds: Vec<usize> = batches
            .iter()
            .flat_map(|b| b.train_targets.iter().map(|&l| b.global_ids[l]).collect::<Vec<_>>())
            .collect();
        seeds.sort_unstable();
        assert_eq!(seeds, g.train_nodes());
    }

    #[test]
    fn ladies_path_scores_are_symmetric() {
        let path = toy(3, &[(0, 1), (1, 2)]);
        let q = ladies_scores(&path, &[1]);
        assert_eq!(q.keys().copied().collect::<Vec<_>>(), vec![0, 2]);
        // Â_{01} = 1/sqrt(2·3)
        assert!((q[&0] - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(q[&0], q[&2]);
        let total: f64 = q.values().sum();
        assert!((q[&0] / total - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ladies_full_budget_is_plain_normalized_adjacency() {
        let g = sbm();
        let b = ladies_batch(&g, &[3, 40], &[10_000], &mut rng(0));
        let Adjacency::Layered { stack, .. } = &b.adjacency else { panic!() };
        for (l, &v) in [3usize, 40].iter().enumerate() {
            let mut got: Vec<(usize, f64)> = stack[0].in_edges(l).map(|(s, w)| (b.global_ids[s], w)).collect();
            got.sort_by_key(|x| x.0);
            let exp: Vec<(usize, f64)> = g.neighbors(v).iter().map(|&u| (u, gcn_weight(&g, v, u))).collect();
            assert_eq!(got, exp);
        }
    }

    #[test]
    fn ladies_degenerate_and_budgeted() {
        let single = toy(1, &[]);
        let b = ladies_batch(&single, &[0], &[4, 4], &mut rng(0));
        assert_eq!(b.global_ids, vec![0]);
        let Adjacency::Layered { stack, .. } = &b.adjacency else { panic!() };
        assert!(stack.iter().all(|l| l.num_edges() == 0 && l.self_weight[0] == 1.0));

        let g = sbm();
        let b = ladies_batch(&g, &[0, 1, 2], &[5, 4], &mut rng(1));
        let Adjacency::Layered { stack, .. } = &b.adjacency else { panic!() };
        assert_eq!(stack.len(), 2);
        let top_sources: HashSet<usize> = (0..b.num_nodes()).flat_map(|d| stack[1].in_edges(d).map(|(s, _)| s).collect::<Vec<_>>()).collect();
        assert!(top_sources.len() <= 4);
    }

    #[test]
    fn sampler_streams_are_reproducible() {
        let g = sbm();
        let configs = [
            SamplerConfig::Rns { num_parts: 3 },
            SamplerConfig::Cluster { num_clusters: 6, clusters_per_batch: 2 },
            SamplerConfig::SaintRw { walk_length: 3, num_seeds: 4 },
            SamplerConfig::Neighbor { fanout: vec![3, 2], batch_size: 8 },
            SamplerConfig::Ladies { budgets: vec![6, 6], batch_size: 8 },
        ];
        for cfg in configs {
            let a = Sampler::new(&g, cfg.clone(), 3).unwrap().epoch(&g, 2).unwrap();
            let b = Sampler::new(&g, cfg.clone(), 3).unwrap().epoch(&g, 2).unwrap();
            let c = Sampler::new(&g, cfg.clone(), 3).unwrap().epoch(&g, 3).unwrap();
            let ids = |p: &EpochPlan| p.batches.iter().map(|b| b.global_ids.clone()).collect::<Vec<_>>();
            assert_eq!(ids(&a), ids(&b), "{cfg:?}");
            assert_ne!(ids(&a), ids(&c), "{cfg:?}");
            assert!(a.batches.iter().all(|x| x.sampler == Some(cfg.kind())));
        }
    }

    #[test]
    fn take_batches_spans_epochs() {
        let g = sbm();
        let s = Sampler::new(&g, SamplerConfig::Rns { num_parts: 3 }, 0).unwrap();
        let b = s.take_batches(&g, 7).unwrap();
        assert_eq!(b.len(), 7);
        assert_eq!(b[3].global_ids, s.epoch(&g, 1).unwrap().batches[0].global_ids);
    }
}
