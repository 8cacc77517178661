//! Synthetic graphs with planted labels and class-conditional features.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::{Graph, Split};
use crate::rng::{derive, Rng};

#[derive(Debug, Clone, PartialEq)]
pub enum GraphKind {
    /// Preferential attachment grown from a clique of `attach_degree + 1` nodes.
    BarabasiAlbert { attach_degree: usize },
    /// Stochastic block model; block `i` occupies a contiguous id range and is class `i`.
    Sbm {
        block_sizes: Vec<usize>,
        p_in: f64,
        p_out: f64,
    },
    ErdosRenyi { p: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub kind: GraphKind,
    pub n: usize,
    /// Ignored for SBM, where the class count is the block count.
    pub num_classes: usize,
    pub feature_dim: usize,
    pub feature_noise: f64,
    pub split_fractions: [f64; 3],
    pub seed: u64,
}

impl GenConfig {
    pub fn barabasi_albert(n: usize, attach_degree: usize, seed: u64) -> Self {
        GenConfig {
            kind: GraphKind::BarabasiAlbert { attach_degree },
            n,
            num_classes: 4,
            feature_dim: 8,
            feature_noise: 1.0,
            split_fractions: [0.5, 0.25, 0.25],
            seed,
        }
    }

    pub fn sbm(block_sizes: Vec<usize>, p_in: f64, p_out: f64, seed: u64) -> Self {
        let n = block_sizes.iter().sum();
        let k = block_sizes.len();
        GenConfig {
            kind: GraphKind::Sbm {
                block_sizes,
                p_in,
                p_out,
            },
            n,
            num_classes: k,
            feature_dim: 8,
            feature_noise: 1.0,
            split_fractions: [0.5, 0.25, 0.25],
            seed,
        }
    }

    pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Self {
        GenConfig {
            kind: GraphKind::ErdosRenyi { p },
            n,
            num_classes: 4,
            feature_dim: 8,
            feature_noise: 1.0,
            split_fractions: [0.5, 0.25, 0.25],
            seed,
        }
    }

    pub fn with_split(mut self, fractions: [f64; 3]) -> Self {
        self.split_fractions = fractions;
        self
    }

    pub fn with_features(mut self, dim: usize, noise: f64) -> Self {
        self.feature_dim = dim;
        self.feature_noise = noise;
        self
    }

    pub fn with_classes(mut self, k: usize) -> Self {
        self.num_classes = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        validate_fractions(&self.split_fractions)?;
        if self.feature_noise.is_nan() || self.feature_noise < 0.0 {
            return Err(Error::config("feature_noise must be >= 0"));
        }
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::config(format!("{name} = {p} is not a probability")))
            }
        };
        match &self.kind {
            GraphKind::BarabasiAlbert { attach_degree } => {
                if *attach_degree == 0 {
                    return Err(Error::config("attach_degree must be >= 1"));
                }
                if self.n < attach_degree + 1 {
                    return Err(Error::config(format!(
                        "n = {} is too small for attach_degree = {attach_degree}",
                        self.n
                    )));
                }
            }
            GraphKind::Sbm {
                block_sizes,
                p_in,
                p_out,
            } => {
                prob("p_in", *p_in)?;
                prob("p_out", *p_out)?;
                let total: usize = block_sizes.iter().sum();
                if total != self.n || block_sizes.is_empty() {
                    return Err(Error::config(format!(
                        "SBM block sizes sum to {total}, expected n = {}",
                        self.n
                    )));
                }
            }
            GraphKind::ErdosRenyi { p } => prob("p", *p)?,
        }
        if self.num_classes == 0 {
            return Err(Error::config("num_classes must be >= 1"));
        }
        Ok(())
    }
}

pub fn validate_fractions(f: &[f64; 3]) -> Result<()> {
    if f.iter().any(|x| x.is_nan() || *x < 0.0) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split fractions {f:?} must be >= 0 and sum to 1")));
    }
    Ok(())
}

/// Largest-remainder apportionment of `n` items; ties go to the earlier part.
pub fn split_sizes(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let raw: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes = [0usize; 3];
    for (s, r) in sizes.iter_mut().zip(&raw) {
        *s = r.floor() as usize;
    }
    let assigned: usize = sizes.iter().sum();
    let mut order = [0usize, 1, 2];
    // stable sort keeps index order on equal remainders
    order.sort_by(|&a, &b| {
        let ra = raw[a] - raw[a].floor();
        let rb = raw[b] - raw[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

fn random_split(n: usize, fractions: &[f64; 3], rng: &mut Rng) -> Vec<Split> {
    let sizes = split_sizes(n, fractions);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut split = vec![Split::Test; n];
    for (rank, &v) in perm.iter().enumerate() {
        split[v] = if rank < sizes[0] {
            Split::Train
        } else if rank < sizes[0] + sizes[1] {
            Split::Val
        } else {
            Split::Test
        };
    }
    split
}

pub fn resplit(g: &Graph, fractions: [f64; 3], seed: u64) -> Result<Graph> {
    validate_fractions(&fractions)?;
    let mut rng = derive(seed, &["graph", "split"]).rng();
    g.with_split(random_split(g.num_nodes(), &fractions, &mut rng))
}

pub fn generate(cfg: &GenConfig) -> Result<Graph> {
    cfg.validate()?;
    let mut edge_rng = derive(cfg.seed, &["graph", "edges"]).rng();
    let mut label_rng = derive(cfg.seed, &["graph", "labels"]).rng();
    let (edges, labels, num_classes) = match &cfg.kind {
        GraphKind::BarabasiAlbert { attach_degree } => {
            let edges = barabasi_albert_edges(cfg.n, *attach_degree, &mut edge_rng);
            let labels = (0..cfg.n).map(|_| label_rng.random_range(0..cfg.num_classes)).collect();
            (edges, labels, cfg.num_classes)
        }
        GraphKind::Sbm {
            block_sizes,
            p_in,
            p_out,
        } => {
            let labels: Vec<usize> = block_sizes
                .iter()
                .enumerate()
                .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
                .collect();
            let edges = sbm_edges(&labels, *p_in, *p_out, &mut edge_rng);
            (edges, labels, block_sizes.len())
        }
        GraphKind::ErdosRenyi { p } => {
            let labels: Vec<usize> = (0..cfg.n).map(|_| label_rng.random_range(0..cfg.num_classes)).collect();
            let zeros = vec![0; cfg.n];
            (sbm_edges(&zeros, *p, *p, &mut edge_rng), labels, cfg.num_classes)
        }
    };
    let mut feat_rng = derive(cfg.seed, &["graph", "features"]).rng();
    let features = class_features(&labels, num_classes, cfg.feature_dim, cfg.feature_noise, &mut feat_rng);
    let mut split_rng = derive(cfg.seed, &["graph", "split"]).rng();
    let split = random_split(cfg.n, &cfg.split_fractions, &mut split_rng);
    Graph::from_parts(cfg.n, &edges, features, labels, num_classes, split)
}

/// Each new node attaches to `m` distinct existing nodes chosen with
/// probability proportional to degree (endpoint-list sampling).
fn barabasi_albert_edges(n: usize, m: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    let n0 = m + 1;
    let mut edges = Vec::with_capacity(m * n);
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * m * n);
    for u in 0..n0 {
        for v in (u + 1)..n0 {
            edges.push((u, v));
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    let mut chosen = Vec::with_capacity(m);
    for v in n0..n {
        chosen.clear();
        while chosen.len() < m {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        for &t in &chosen {
            edges.push((t, v));
            endpoints.push(t);
            endpoints.push(v);
        }
    }
    edges
}

/// Independent edges with probability `p_in` inside a block and `p_out`
/// across blocks. Blocks must be contiguous in `labels`. Uses geometric
/// skipping so sparse graphs cost time proportional to their edge count.
fn sbm_edges(labels: &[usize], p_in: f64, p_out: f64, rng: &mut Rng) -> Vec<(usize, usize)> {
    let n = labels.len();
    let mut bounds = vec![0];
    for v in 1..n {
        if labels[v] != labels[v - 1] {
            bounds.push(v);
        }
    }
    bounds.push(n);
    let mut edges = Vec::new();
    for u in 0..n {
        for w in bounds.windows(2) {
            let (lo, hi) = (w[0].max(u + 1), w[1]);
            if lo >= hi {
                continue;
            }
            let p = if labels[lo] == labels[u] { p_in } else { p_out };
            bernoulli_range(lo, hi, p, rng, |v| edges.push((u, v)));
        }
    }
    edges
}

fn bernoulli_range(lo: usize, hi: usize, p: f64, rng: &mut Rng, mut hit: impl FnMut(usize)) {
    if p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        (lo..hi).for_each(hit);
        return;
    }
    let log_q = (1.0 - p).ln();
    let mut v = lo;
    loop {
        let r: f64 = rng.random::<f64>();
        let skip = ((1.0 - r).ln() / log_q).floor();
        if !skip.is_finite() || skip >= (hi - v) as f64 {
            return;
        }
        v += skip as usize;
        hit(v);
        v += 1;
        if v >= hi {
            return;
        }
    }
}

fn class_features(labels: &[usize], k: usize, dim: usize, noise: f64, rng: &mut Rng) -> Array2<f64> {
    let mut means = Array2::<f64>::zeros((k, dim));
    for mut row in means.rows_mut() {
        row.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let mut x = Array2::<f64>::zeros((labels.len(), dim));
    for (mut row, &y) in x.rows_mut().into_iter().zip(labels) {
        for (j, v) in row.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *v = means[[y, j]] + noise * z;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{count_components, structural_stats};

    #[test]
    fn ba_with_single_attachment_is_a_tree() {
        let g = generate(&GenConfig::barabasi_albert(5, 1, 3)).unwrap();
        assert_eq!(g.num_edges(), 4);
        assert_eq!(count_components(g.csr()), 1);
    }

    #[test]
    fn ba_degree_sum() {
        for (n, m) in [(50, 2), (200, 4), (30, 1)] {
            let g = generate(&GenConfig::barabasi_albert(n, m, 11)).unwrap();
            let n0 = m + 1;
            let degree_sum: usize = g.csr().degrees().iter().sum();
            assert_eq!(degree_sum, 2 * (m * (m + 1) / 2 + m * (n - n0)));
        }
    }

    #[test]
    fn sbm_planted_triangles() {
        let g = generate(&GenConfig::sbm(vec![3, 3], 1.0, 0.0, 0)).unwrap();
        let s = structural_stats(&g, 2, 0).unwrap();
        assert_eq!(s.num_edges, 6);
        assert_eq!(s.num_components, 2);
        assert_eq!(s.edge_homophily, 1.0);
        assert_eq!(g.labels(), &[0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn er_density_is_plausible() {
        let g = generate(&GenConfig::erdos_renyi(400, 0.05, 2)).unwrap();
        let expected = 0.05 * 400.0 * 399.0 / 2.0;
        let sd = (expected * 0.95f64).sqrt();
        assert!((g.num_edges() as f64 - expected).abs() < 4.0 * sd);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig::sbm(vec![20, 30], 0.3, 0.05, 9);
        let (a, b) = (generate(&cfg).unwrap(), generate(&cfg).unwrap());
        assert_eq!(a.csr(), b.csr());
        assert_eq!(a.features(), b.features());
        assert_eq!(a.split(), b.split());
        let c = generate(&GenConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.csr(), c.csr());
    }

    #[test]
    fn config_errors() {
        let mut cfg = GenConfig::sbm(vec![3, 3], 0.5, 0.1, 0);
        cfg.n = 7;
        assert!(generate(&cfg).is_err());
        assert!(generate(&GenConfig::barabasi_albert(3, 3, 0)).is_err());
        assert!(generate(&GenConfig::barabasi_albert(10, 0, 0)).is_err());
        assert!(generate(&GenConfig::erdos_renyi(10, 1.5, 0)).is_err());
        assert!(generate(&GenConfig::erdos_renyi(10, 0.5, 0).with_split([0.5, 0.5, 0.5])).is_err());
    }

    #[test]
    fn split_rounding() {
        assert_eq!(split_sizes(100, &[0.1, 0.1, 0.8]), [10, 10, 80]);
        assert_eq!(split_sizes(10, &[1.0 / 3.0; 3]), [4, 3, 3]);
        assert_eq!(split_sizes(7, &[0.5, 0.25, 0.25]), [3, 2, 2]);
        let g = generate(&GenConfig::erdos_renyi(100, 0.01, 0)).unwrap();
        let r = resplit(&g, [0.1, 0.1, 0.8], 4).unwrap();
        let count = |t| r.split().iter().filter(|&&s| s == t).count();
        assert_eq!([count(Split::Train), count(Split::Val), count(Split::Test)], [10, 10, 80]);
    }

    #[test]
    fn resplit_all_train_and_deterministic() {
        let g = generate(&GenConfig::erdos_renyi(50, 0.1, 0)).unwrap();
        let all = resplit(&g, [1.0, 0.0, 0.0], 1).unwrap();
        assert!(all.split().iter().all(|&s| s == Split::Train));
        assert_eq!(resplit(&g, [0.3, 0.3, 0.4], 5).unwrap().split(), resplit(&g, [0.3, 0.3, 0.4], 5).unwrap().split());
        assert_eq!(all.csr(), g.csr());
        assert!(resplit(&g, [0.3, 0.3, 0.3], 5).is_err());
    }
}
