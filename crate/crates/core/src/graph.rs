//! Immutable undirected graphs in CSR form, induced subgraphs and structural
//! statistics.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::SeedPath;
use crate::samplers::SamplerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s.trim() {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Symmetric adjacency in compressed sparse row form.
///
/// Every undirected edge is stored in both rows, rows are sorted ascending,
/// and there are no self-loops or duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Csr {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Csr {
    /// Canonicalizes an arbitrary edge list: symmetrizes, drops self-loops and
    /// duplicates. Indices must already be `< num_nodes`.
    pub fn from_edges(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Csr {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for (u, v) in edges {
            if u == v {
                continue;
            }
            rows[u].push(v);
            rows[v].push(u);
        }
        Self::from_rows(rows)
    }

    fn from_rows(mut rows: Vec<Vec<usize>>) -> Csr {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        let total: usize = rows.iter().map(Vec::len).sum();
        let mut neighbors = Vec::with_capacity(total);
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            neighbors.extend_from_slice(row);
            offsets.push(neighbors.len());
        }
        Csr { offsets, neighbors }
    }

    pub fn empty(num_nodes: usize) -> Csr {
        Csr {
            offsets: vec![0; num_nodes + 1],
            neighbors: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Undirected edge count (each edge once).
    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn neighbor_array(&self) -> &[usize] {
        &self.neighbors
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }
}

#[derive(Debug, Clone)]
pub struct Graph {
    csr: Csr,
    features: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    split: Vec<Split>,
}

/// Builds a graph from raw parts. Feature rows are given as nested vectors so
/// ragged input can be reported.
pub fn build_graph(
    num_nodes: usize,
    edges: &[(usize, usize)],
    features: &[Vec<f64>],
    labels: Vec<usize>,
    num_classes: usize,
    split: Vec<Split>,
) -> Result<Graph> {
    if features.len() != num_nodes {
        return Err(Error::FeatureRows {
            rows: features.len(),
            expected: num_nodes,
        });
    }
    let dim = features.first().map_or(0, Vec::len);
    let mut flat = Vec::with_capacity(num_nodes * dim);
    for (row, f) in features.iter().enumerate() {
        if f.len() != dim {
            return Err(Error::RaggedFeatures {
                row,
                len: f.len(),
                expected: dim,
            });
        }
        flat.extend_from_slice(f);
    }
    let features = Array2::from_shape_vec((num_nodes, dim), flat)
        .map_err(|e| Error::Dimension(e.to_string()))?;
    Graph::from_parts(num_nodes, edges, features, labels, num_classes, split)
}

impl Graph {
    pub fn from_parts(
        num_nodes: usize,
        edges: &[(usize, usize)],
        features: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
        split: Vec<Split>,
    ) -> Result<Graph> {
        for &(u, v) in edges {
            for index in [u, v] {
                if index >= num_nodes {
                    return Err(Error::NodeOutOfRange { index, num_nodes });
                }
            }
        }
        if features.nrows() != num_nodes {
            return Err(Error::FeatureRows {
                rows: features.nrows(),
                expected: num_nodes,
            });
        }
        check_len("labels", num_nodes, labels.len())?;
        check_len("split tags", num_nodes, split.len())?;
        if let Some((node, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::LabelOutOfRange {
                node,
                label,
                num_classes,
            });
        }
        Ok(Graph {
            csr: Csr::from_edges(num_nodes, edges.iter().copied()),
            features,
            labels,
            num_classes,
            split,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.csr.num_nodes()
    }

    pub fn num_edges(&self) -> usize {
        self.csr.num_edges()
    }

    pub fn csr(&self) -> &Csr {
        &self.csr
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        self.csr.neighbors(v)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.csr.degree(v)
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn split(&self) -> &[Split] {
        &self.split
    }

    pub fn nodes_in(&self, tag: Split) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&v| self.split[v] == tag).collect()
    }

    pub fn train_nodes(&self) -> Vec<usize> {
        self.nodes_in(Split::Train)
    }

    /// Same topology, features and labels with new split tags.
    pub fn with_split(&self, split: Vec<Split>) -> Result<Graph> {
        check_len("split tags", self.num_nodes(), split.len())?;
        Ok(Graph {
            split,
            ..self.clone()
        })
    }

    /// The whole graph as an induced-mode batch with identity node map.
    pub fn as_batch(&self) -> Batch {
        let all: Vec<usize> = (0..self.num_nodes()).collect();
        induced_subgraph(self, &all).expect("identity node set is valid")
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            what,
            expected,
            got,
        })
    }
}

/// One message-passing layer of a layer-wise sampled batch.
///
/// Rows are destination nodes in local coordinates; `src`/`weight` hold the
/// sampled in-neighbors (never the node itself) and `self_weight` the weight
/// of the self-loop term used by GCN aggregation. Destinations that are not
/// needed at this layer have no edges and a zero self weight.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerAdj {
    pub offsets: Vec<usize>,
    pub src: Vec<usize>,
    pub weight: Vec<f64>,
    pub self_weight: Vec<f64>,
}

impl LayerAdj {
    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn in_edges(&self, dst: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[dst]..self.offsets[dst + 1];
        self.src[r.clone()].iter().copied().zip(self.weight[r].iter().copied())
    }

    pub fn num_edges(&self) -> usize {
        self.src.len()
    }

    /// Assembles a layer from per-destination edge lists.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, self_weight: Vec<f64>) -> LayerAdj {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        let mut src = Vec::new();
        let mut weight = Vec::new();
        for row in rows {
            for (s, w) in row {
                src.push(s);
                weight.push(w);
            }
            offsets.push(src.len());
        }
        LayerAdj {
            offsets,
            src,
            weight,
            self_weight,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Adjacency {
    /// Induced subgraph on the batch nodes; GNN aggregation is derived from it.
    Induced(Csr),
    /// Directed per-layer stack ordered from the input layer to the output
    /// layer, plus the undirected union of all sampled edges for statistics.
    Layered { stack: Vec<LayerAdj>, union: Csr },
}

/// A sampled mini-batch with local node coordinates `0..global_ids.len()`.
#[derive(Debug, Clone)]
pub struct Batch {
    pub global_ids: Vec<usize>,
    pub adjacency: Adjacency,
    /// Local indices of supervised nodes.
    pub train_targets: Vec<usize>,
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub sampler: Option<SamplerKind>,
}

impl Batch {
    pub fn num_nodes(&self) -> usize {
        self.global_ids.len()
    }

    /// Undirected structure of the batch: the induced subgraph, or the
    /// symmetrized union of sampled edges for layer-wise batches.
    pub fn structure(&self) -> &Csr {
        match &self.adjacency {
            Adjacency::Induced(csr) => csr,
            Adjacency::Layered { union, .. } => union,
        }
    }

    pub fn is_induced(&self) -> bool {
        matches!(self.adjacency, Adjacency::Induced(_))
    }

    pub fn num_edges(&self) -> usize {
        self.structure().num_edges()
    }

    /// Labels of the batch's supervised nodes, in `train_targets` order.
    pub fn target_labels(&self) -> Vec<usize> {
        self.train_targets.iter().map(|&i| self.labels[i]).collect()
    }
}

/// Maps global ids to local positions, rejecting duplicates and out-of-range ids.
pub(crate) fn local_index(num_nodes: usize, nodes: &[usize]) -> Result<Vec<usize>> {
    let mut local = vec![usize::MAX; num_nodes];
    for (i, &v) in nodes.iter().enumerate() {
        if v >= num_nodes {
            return Err(Error::NodeOutOfRange {
                index: v,
                num_nodes,
            });
        }
        if local[v] != usize::MAX {
            return Err(Error::DuplicateNode(v));
        }
        local[v] = i;
    }
    Ok(local)
}

pub(crate) fn gather_rows(features: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    features.select(Axis(0), rows)
}

/// Induced subgraph on `nodes`; local index `i` corresponds to `nodes[i]`.
pub fn induced_subgraph(g: &Graph, nodes: &[usize]) -> Result<Batch> {
    let local = local_index(g.num_nodes(), nodes)?;
    let mut offsets = Vec::with_capacity(nodes.len() + 1);
    offsets.push(0);
    let mut neighbors = Vec::new();
    for &v in nodes {
        let start = neighbors.len();
        neighbors.extend(
            g.neighbors(v)
                .iter()
                .map(|&u| local[u])
                .filter(|&l| l != usize::MAX),
        );
        neighbors[start..].sort_unstable();
        offsets.push(neighbors.len());
    }
    let train_targets = nodes
        .iter()
        .enumerate()
        .filter(|(_, &v)| g.split[v] == Split::Train)
        .map(|(i, _)| i)
        .collect();
    Ok(Batch {
        global_ids: nodes.to_vec(),
        adjacency: Adjacency::Induced(Csr { offsets, neighbors }),
        train_targets,
        features: gather_rows(&g.features, nodes),
        labels: nodes.iter().map(|&v| g.labels[v]).collect(),
        sampler: None,
    })
}

/// Anything with an undirected structure and node labels.
pub trait Topology {
    fn structure(&self) -> &Csr;
    fn node_label(&self, v: usize) -> usize;
}

impl Topology for Graph {
    fn structure(&self) -> &Csr {
        &self.csr
    }
    fn node_label(&self, v: usize) -> usize {
        self.labels[v]
    }
}

impl Topology for Batch {
    fn structure(&self) -> &Csr {
        Batch::structure(self)
    }
    fn node_label(&self, v: usize) -> usize {
        self.labels[v]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralStats {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub avg_degree: f64,
    pub num_isolated: usize,
    pub num_components: usize,
    pub diameter_lower_bound: usize,
    pub avg_distance_estimate: f64,
    /// Fraction of edges joining equal labels; 0 for edgeless graphs.
    pub edge_homophily: f64,
}

/// Distances from `source` (usize::MAX = unreachable), reusing `dist` and `queue`.
fn bfs(csr: &Csr, source: usize, dist: &mut [usize], queue: &mut VecDeque<usize>) -> (usize, usize, u64, usize) {
    dist.fill(usize::MAX);
    queue.clear();
    dist[source] = 0;
    queue.push_back(source);
    let (mut far, mut ecc, mut sum, mut reached) = (source, 0, 0u64, 0usize);
    while let Some(u) = queue.pop_front() {
        let d = dist[u];
        if d > ecc {
            ecc = d;
            far = u;
        }
        sum += d as u64;
        reached += 1;
        for &w in csr.neighbors(u) {
            if dist[w] == usize::MAX {
                dist[w] = d + 1;
                queue.push_back(w);
            }
        }
    }
    (far, ecc, sum, reached - 1)
}

pub fn count_components(csr: &Csr) -> usize {
    let n = csr.num_nodes();
    let mut seen = vec![false; n];
    let mut stack = Vec::new();
    let mut count = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        stack.push(s);
        while let Some(u) = stack.pop() {
            for &w in csr.neighbors(u) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    count
}

pub fn edge_homophily<T: Topology + ?Sized>(t: &T) -> f64 {
    let csr = t.structure();
    let (mut same, mut total) = (0usize, 0usize);
    for (u, v) in csr.edges() {
        total += 1;
        if t.node_label(u) == t.node_label(v) {
            same += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        same as f64 / total as f64
    }
}

/// Degree, component, distance and homophily statistics.
///
/// The diameter bound comes from `bfs_samples` sweeps of multi-sweep BFS: the
/// first sweep starts at a random node and each later sweep restarts from the
/// farthest node of the previous one (or a fresh random node when the previous
/// sweep could not move). The average distance is the mean over all
/// source/target pairs reached by those sweeps.
pub fn structural_stats<T: Topology + ?Sized>(t: &T, bfs_samples: usize, seed: u64) -> Result<StructuralStats> {
    if bfs_samples == 0 {
        return Err(Error::config("bfs_samples must be >= 1"));
    }
    let csr = t.structure();
    let n = csr.num_nodes();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut rng = SeedPath::new(seed).tag("bfs").rng();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    let (mut diameter, mut dist_sum, mut pairs) = (0usize, 0u64, 0u64);
    let mut start = rng.random_range(0..n);
    for _ in 0..bfs_samples {
        let (far, ecc, sum, reached) = bfs(csr, start, &mut dist, &mut queue);
        diameter = diameter.max(ecc);
        dist_sum += sum;
        pairs += reached as u64;
        start = if far == start { rng.random_range(0..n) } else { far };
    }
    Ok(StructuralStats {
        num_nodes: n,
        num_edges: csr.num_edges(),
        avg_degree: 2.0 * csr.num_edges() as f64 / n as f64,
        num_isolated: (0..n).filter(|&v| csr.degree(v) == 0).count(),
        num_components: count_components(csr),
        diameter_lower_bound: diameter,
        avg_distance_estimate: if pairs == 0 { 0.0 } else { dist_sum as f64 / pairs as f64 },
        edge_homophily: edge_homophily(t),
    })
}

/// Exact diameter and mean same-component distance by all-pairs BFS.
/// Quadratic; meant as an oracle for graphs with at most a few thousand nodes.
pub fn exact_distance_stats(csr: &Csr) -> (usize, f64) {
    let n = csr.num_nodes();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    let (mut diameter, mut sum, mut pairs) = (0usize, 0u64, 0u64);
    for s in 0..n {
        let (_, ecc, ssum, reached) = bfs(csr, s, &mut dist, &mut queue);
        diameter = diameter.max(ecc);
        sum += ssum;
        pairs += reached as u64;
    }
    (diameter, if pairs == 0 { 0.0 } else { sum as f64 / pairs as f64 })
}

pub fn degree_histogram<T: Topology + ?Sized>(t: &T) -> BTreeMap<usize, usize> {
    let csr = t.structure();
    let mut hist = BTreeMap::new();
    for v in 0..csr.num_nodes() {
        *hist.entry(csr.degree(v)).or_insert(0) += 1;
    }
    hist
}

/// Parses `u v` / `u,v` lines; blank lines and `#` comments are skipped.
pub fn parse_edge_list(text: &str, source: &str) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: source.to_string(),
            line: i + 1,
            msg,
        };
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() != 2 {
            return Err(err(format!("expected 2 fields, found {}", fields.len())));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| err(format!("invalid node index {s:?}")));
        edges.push((parse(fields[0])?, parse(fields[1])?));
    }
    Ok(edges)
}

pub fn load_edge_list(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, &path.display().to_string())
}

pub const STATS_CSV_HEADER: &str =
    "name,num_nodes,num_edges,avg_degree,num_isolated,num_components,diameter_lb,avg_dist,homophily";

pub fn save_stats_csv(rows: &[(String, StructuralStats)], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(STATS_CSV_HEADER);
    out.push('\n');
    for (name, s) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            name,
            s.num_nodes,
            s.num_edges,
            s.avg_degree,
            s.num_isolated,
            s.num_components,
            s.diameter_lower_bound,
            s.avg_distance_estimate,
            s.edge_homophily
        ));
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
