//! Experiment configuration and the commands behind the `gnnlab` binary.
//!
//! A config is a TOML file:
//!
//! ```toml
//! seed = 7
//!
//! [graph]
//! kind = "sbm"               # sbm | ba | er | files
//! block_sizes = [50, 50, 50, 50]
//! p_in = 0.1
//! p_out = 0.01
//!
//! [model]
//! arch = "gcn"
//! depth = 2
//! hidden_dim = 16
//!
//! [[sampler]]
//! kind = "rns"
//! num_parts = 3
//!
//! [optim]
//! kind = "sgd"
//! lr = 0.03
//! epochs = 100
//! ```
//!
//! Every command writes CSV files into an output directory and is a pure
//! function of the config and seed, so reruns reproduce files byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::Deserialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::gen::{generate, GenConfig, GraphKind};
use crate::gnn::{Activation, Arch, GnnInput, Model, ModelConfig};
use crate::graph::{induced_subgraph, load_edge_list, structural_stats, Graph, Split, StructuralStats};
use crate::metrics::{measure, report_csv_row, RegularizationReport, REPORT_CSV_HEADER};
use crate::rng::derive;
use crate::samplers::{rns_blocks, Sampler, SamplerConfig, SamplerKind};
use crate::theory::{self, FlowCheckConfig, Status, VerificationResult};
use crate::trainer::{train_with_hook, OptimConfig, OptimKind, Regime, TrainTrace};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub graph: Option<GraphSection>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default, rename = "sampler")]
    pub samplers: Vec<SamplerConfig>,
    #[serde(default)]
    pub optim: OptimSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub figure3: Figure3Section,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub sampler_stats: SamplerStatsSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub kind: String,
    pub n: Option<usize>,
    pub block_sizes: Option<Vec<usize>>,
    pub p_in: Option<f64>,
    pub p_out: Option<f64>,
    pub attach_degree: Option<usize>,
    pub p: Option<f64>,
    pub num_classes: Option<usize>,
    pub feature_dim: Option<usize>,
    pub feature_noise: Option<f64>,
    pub split: Option<[f64; 3]>,
    pub edges: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub split_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub arch: String,
    pub depth: usize,
    pub hidden_dim: usize,
    pub activation: String,
    pub init_scale: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            arch: "gcn".into(),
            depth: 2,
            hidden_dim: 16,
            activation: "relu".into(),
            init_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimSection {
    pub kind: String,
    pub lr: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub epochs: usize,
}

impl Default for OptimSection {
    fn default() -> Self {
        OptimSection {
            kind: "sgd".into(),
            lr: 0.03,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            epochs: 100,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    /// Any of `full`, `sampled_chained`, `sampled_accumulated`; sampled
    /// regimes use the first `[[sampler]]`.
    pub regimes: Vec<String>,
    pub seeds: usize,
    /// Measure the regularization report every this many epochs (0 = never).
    pub metrics_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            regimes: vec!["full".into()],
            seeds: 1,
            metrics_every: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Figure3Section {
    pub seeds: usize,
    pub batches: usize,
}

impl Default for Figure3Section {
    fn default() -> Self {
        Figure3Section { seeds: 100, batches: 50 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub grad_draws: usize,
    pub flow_eps: Vec<f64>,
    pub flow_substeps: usize,
    pub flow_sgd_m: usize,
    pub kernel_n: Vec<u64>,
    pub kernel_m: Vec<u64>,
    pub kernel_k: Vec<u64>,
    pub order_stat_mc_trials: usize,
    pub pair_n: Vec<usize>,
    pub pair_m: Vec<usize>,
    pub pair_trials: usize,
    pub bias_n: usize,
    pub bias_m: Vec<usize>,
    pub bias_trials: usize,
    pub tail_n: usize,
    pub tail_attach: usize,
    pub tail_m: Vec<usize>,
    pub tail_seeds: usize,
    pub tail_tolerance: f64,
    pub edge_n: usize,
    pub edge_m: Vec<usize>,
    pub edge_plans: usize,
    pub sweep_n: usize,
    pub sweep_seeds: usize,
    pub sweep_batches: usize,
    /// Replace every gated tolerance with this value.
    pub tolerance_override: Option<f64>,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            grad_draws: 20,
            flow_eps: vec![0.04, 0.02, 0.01],
            flow_substeps: 1000,
            flow_sgd_m: 3,
            kernel_n: vec![60, 100, 1000],
            kernel_m: vec![2, 3, 4, 5],
            kernel_k: vec![0, 1, 3, 7],
            order_stat_mc_trials: 20_000,
            pair_n: vec![8, 12, 100],
            pair_m: vec![2, 3, 4],
            pair_trials: 10_000,
            bias_n: 30,
            bias_m: vec![2, 3],
            bias_trials: 500,
            tail_n: 50_000,
            tail_attach: 4,
            tail_m: vec![3],
            tail_seeds: 20,
            tail_tolerance: 0.3,
            edge_n: 5000,
            edge_m: vec![2, 3, 5, 10],
            edge_plans: 100,
            sweep_n: 5000,
            sweep_seeds: 10,
            sweep_batches: 20,
            tolerance_override: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerStatsSection {
    pub m_list: Vec<usize>,
    pub plans: usize,
    pub bfs_samples: usize,
}

impl Default for SamplerStatsSection {
    fn default() -> Self {
        SamplerStatsSection {
            m_list: (1..=10).collect(),
            plans: 5,
            bfs_samples: 8,
        }
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    for s in &cfg.samplers {
        s.validate()?;
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text)?;
    // Graph file paths are relative to the config file.
    if let (Some(g), Some(dir)) = (cfg.graph.as_mut(), path.parent()) {
        for p in [&mut g.edges, &mut g.features, &mut g.labels, &mut g.split_file].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn graph_section(&self) -> Result<&GraphSection> {
        self.graph.as_ref().ok_or_else(|| Error::config("missing [graph] section"))
    }

    pub fn build_graph(&self) -> Result<Graph> {
        self.graph_section()?.build(self.seed)
    }

    pub fn model_config(&self, g: &Graph) -> Result<ModelConfig> {
        let m = &self.model;
        let arch = Arch::parse(&m.arch).ok_or_else(|| Error::config(format!("unknown arch `{}`", m.arch)))?;
        let act = Activation::parse(&m.activation)
            .ok_or_else(|| Error::config(format!("unknown activation `{}`", m.activation)))?;
        let cfg = ModelConfig::new(arch, m.depth, g.feature_dim(), m.hidden_dim, g.num_classes())
            .with_activation(act)
            .with_init_scale(m.init_scale);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn optim_config(&self) -> Result<OptimConfig> {
        let o = &self.optim;
        let kind = match o.kind.as_str() {
            "sgd" => OptimKind::Sgd,
            "sgd_momentum" | "momentum" => OptimKind::Momentum { beta: o.momentum },
            "adam" => OptimKind::Adam {
                beta1: o.beta1,
                beta2: o.beta2,
                eps: o.eps,
            },
            other => return Err(Error::config(format!("unknown optimizer `{other}`"))),
        };
        let cfg = OptimConfig {
            kind,
            lr: o.lr,
            weight_decay: o.weight_decay,
            epochs: o.epochs,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn regimes(&self) -> Result<Vec<Regime>> {
        let first = || {
            self.samplers
                .first()
                .cloned()
                .ok_or_else(|| Error::config("sampled regimes need a [[sampler]] section"))
        };
        self.train
            .regimes
            .iter()
            .map(|r| match r.as_str() {
                "full" => Ok(Regime::Full),
                "sampled_chained" | "chained" => Ok(Regime::Chained(first()?)),
                "sampled_accumulated" | "accumulated" => Ok(Regime::Accumulated(first()?)),
                other => Err(Error::config(format!("unknown regime `{other}`"))),
            })
            .collect()
    }
}

impl GraphSection {
    pub fn build(&self, seed: u64) -> Result<Graph> {
        let has_files = self.edges.is_some() || self.features.is_some() || self.labels.is_some() || self.split_file.is_some();
        if self.kind == "files" {
            let need = |p: &Option<PathBuf>, what: &str| {
                p.clone().ok_or_else(|| Error::config(format!("graph kind `files` needs `{what}`")))
            };
            return read_graph_files(
                &need(&self.edges, "edges")?,
                &need(&self.features, "features")?,
                &need(&self.labels, "labels")?,
                &need(&self.split_file, "split_file")?,
                self.num_classes,
            );
        }
        if has_files {
            return Err(Error::config("a generated graph cannot also name input files"));
        }
        let mut cfg = match self.kind.as_str() {
            "sbm" => {
                let blocks = self
                    .block_sizes
                    .clone()
                    .ok_or_else(|| Error::config("sbm needs block_sizes"))?;
                GenConfig::sbm(blocks, self.p_in.unwrap_or(0.1), self.p_out.unwrap_or(0.01), seed)
            }
            "ba" | "barabasi_albert" => GenConfig::barabasi_albert(
                self.n.ok_or_else(|| Error::config("ba needs n"))?,
                self.attach_degree.unwrap_or(4),
                seed,
            ),
            "er" | "erdos_renyi" => {
                GenConfig::erdos_renyi(self.n.ok_or_else(|| Error::config("er needs n"))?, self.p.unwrap_or(0.01), seed)
            }
            other => return Err(Error::config(format!("unknown graph kind `{other}`"))),
        };
        if let Some(k) = self.num_classes {
            if matches!(cfg.kind, GraphKind::Sbm { .. }) {
                return Err(Error::config("sbm classes are its blocks; drop num_classes"));
            }
            cfg = cfg.with_classes(k);
        }
        let (dim, noise) = (
            self.feature_dim.unwrap_or(cfg.feature_dim),
            self.feature_noise.unwrap_or(cfg.feature_noise),
        );
        cfg = cfg.with_features(dim, noise);
        if let Some(split) = self.split {
            cfg = cfg.with_split(split);
        }
        generate(&cfg)
    }
}

// ---------------------------------------------------------------------------
// Graph files
// ---------------------------------------------------------------------------

pub const GRAPH_FILES: [&str; 4] = ["edges.txt", "features.csv", "labels.csv", "split.csv"];

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `edges.txt`, `features.csv`, `labels.csv` and `split.csv`.
pub fn write_graph_files(g: &Graph, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut edges = format!("# nodes {}\n", g.num_nodes());
    for (u, v) in g.csr().edges() {
        let _ = writeln!(edges, "{u} {v}");
    }
    let mut feats = String::from("node");
    for j in 0..g.feature_dim() {
        let _ = write!(feats, ",f{j}");
    }
    feats.push('\n');
    for (v, row) in g.features().rows().into_iter().enumerate() {
        let _ = write!(feats, "{v}");
        for x in row {
            let _ = write!(feats, ",{x}");
        }
        feats.push('\n');
    }
    let mut labels = String::from("node,label\n");
    let mut split = String::from("node,split\n");
    for v in 0..g.num_nodes() {
        let _ = writeln!(labels, "{v},{}", g.labels()[v]);
        let _ = writeln!(split, "{v},{}", g.split()[v]);
    }
    let paths: Vec<PathBuf> = GRAPH_FILES.iter().map(|f| dir.join(f)).collect();
    for (p, c) in paths.iter().zip([edges, feats, labels, split]) {
        write_file(p, &c)?;
    }
    Ok(paths)
}

fn read_csv_rows(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        msg: e.to_string(),
    })?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line,
            msg: e.to_string(),
        })?;
        rows.push((line, rec.iter().map(|s| s.trim().to_string()).collect()));
    }
    Ok(rows)
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        path: path.display().to_string(),
        line,
        msg: format!("cannot parse `{s}`"),
    })
}

/// Loads a graph written by [`write_graph_files`]. Node count comes from the
/// label file; `num_classes` defaults to the largest label plus one.
pub fn read_graph_files(edges: &Path, features: &Path, labels: &Path, split: &Path, num_classes: Option<usize>) -> Result<Graph> {
    let label_rows = read_csv_rows(labels)?;
    let n = label_rows.len();
    let mut label_vec = vec![0usize; n];
    for (line, r) in &label_rows {
        let v: usize = parse_field(labels, *line, &r[0])?;
        if v >= n {
            return Err(Error::NodeOutOfRange { index: v, num_nodes: n });
        }
        label_vec[v] = parse_field(labels, *line, r.get(1).map_or("", String::as_str))?;
    }
    let mut split_vec = vec![Split::Train; n];
    for (line, r) in read_csv_rows(split)? {
        let v: usize = parse_field(split, line, &r[0])?;
        if v >= n {
            return Err(Error::NodeOutOfRange { index: v, num_nodes: n });
        }
        split_vec[v] = Split::parse(r.get(1).map_or("", String::as_str)).ok_or_else(|| Error::Parse {
            path: split.display().to_string(),
            line,
            msg: "split tag must be train, val or test".into(),
        })?;
    }
    let feat_rows = read_csv_rows(features)?;
    let dim = feat_rows.first().map_or(0, |r| r.1.len().saturating_sub(1));
    if feat_rows.len() != n {
        return Err(Error::FeatureRows {
            rows: feat_rows.len(),
            expected: n,
        });
    }
    let mut x = Array2::zeros((n, dim));
    for (line, r) in &feat_rows {
        let v: usize = parse_field(features, *line, &r[0])?;
        if v >= n {
            return Err(Error::NodeOutOfRange { index: v, num_nodes: n });
        }
        if r.len() != dim + 1 {
            return Err(Error::RaggedFeatures {
                row: v,
                len: r.len() - 1,
                expected: dim,
            });
        }
        for j in 0..dim {
            x[[v, j]] = parse_field(features, *line, &r[j + 1])?;
        }
    }
    let edge_list = load_edge_list(edges)?;
    let k = num_classes.unwrap_or_else(|| label_vec.iter().max().map_or(1, |m| m + 1));
    Graph::from_parts(n, &edge_list, x, label_vec, k, split_vec)
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// What a command produced.
#[derive(Debug, Clone, Default)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    /// Human-readable summary lines for stdout.
    pub lines: Vec<String>,
    /// A hard verification check failed.
    pub verification_failed: bool,
}

pub fn cmd_generate(cfg: &ExperimentConfig, out: &Path) -> Result<CommandOutput> {
    let g = cfg.build_graph()?;
    let files = write_graph_files(&g, out)?;
    Ok(CommandOutput {
        lines: vec![format!(
            "generated {} nodes, {} edges, {} classes",
            g.num_nodes(),
            g.num_edges(),
            g.num_classes()
        )],
        files,
        verification_failed: false,
    })
}

fn run_training(cfg: &ExperimentConfig, g: &Graph, model: &Model, regime: &Regime, seed: u64) -> Result<TrainTrace> {
    let optim = cfg.optim_config()?;
    let every = cfg.train.metrics_every;
    let metric_sampler = match (regime, cfg.samplers.first()) {
        (Regime::Full, Some(s)) if every > 0 => Some(Sampler::new(g, s.clone(), seed)?),
        _ => None,
    };
    train_with_hook(g, model, &optim, regime, seed, &mut |info| {
        if every == 0 || info.epoch % every != 0 {
            return Ok(None);
        }
        let owned;
        let batches = if info.batches.is_empty() {
            match &metric_sampler {
                Some(s) => {
                    owned = s.epoch(g, info.epoch as u64)?.batches;
                    &owned[..]
                }
                None => return Ok(None),
            }
        } else {
            info.batches
        };
        measure(model, info.after, g, batches).map(Some)
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn opt_num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Trains every configured regime for every seed; writes one trace per
/// (regime, seed) and a per-regime summary.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<CommandOutput> {
    let g = cfg.build_graph()?;
    let model = Model::new(cfg.model_config(&g)?)?;
    let regimes = cfg.regimes()?;
    if cfg.train.seeds == 0 {
        return Err(Error::config("train.seeds must be >= 1"));
    }
    ensure_dir(out)?;
    let seeds: Vec<u64> = (0..cfg.train.seeds as u64).map(|i| cfg.seed + i).collect();
    let jobs: Vec<(usize, u64)> = (0..regimes.len()).flat_map(|r| seeds.iter().map(move |&s| (r, s))).collect();
    let traces = jobs
        .par_iter()
        .map(|&(r, s)| run_training(cfg, &g, &model, &regimes[r], s))
        .collect::<Result<Vec<_>>>()?;
    let mut output = CommandOutput::default();
    let mut summary = String::from("regime,seeds,train_loss_mean,val_mean,val_std,test_mean,test_std\n");
    for (r, regime) in regimes.iter().enumerate() {
        let mut vals = Vec::new();
        let mut tests = Vec::new();
        let mut losses = Vec::new();
        for (&(jr, s), trace) in jobs.iter().zip(&traces) {
            if jr != r {
                continue;
            }
            let path = out.join(format!("trace_{}_seed{s}.csv", regime.tag()));
            write_file(&path, &trace.to_csv())?;
            output.files.push(path);
            let last = trace.last();
            output.lines.push(format!(
                "final {} seed={s} train_loss={} val={} test={}",
                regime.tag(),
                last.train_loss,
                opt_num(last.val_acc),
                opt_num(last.test_acc)
            ));
            losses.push(last.train_loss);
            vals.extend(last.val_acc);
            tests.extend(last.test_acc);
        }
        let fmt_ms = |xs: &[f64]| {
            if xs.is_empty() {
                ",".to_string()
            } else {
                let (m, s) = mean_std(xs);
                format!("{m},{s}")
            }
        };
        let _ = writeln!(
            summary,
            "{},{},{},{},{}",
            regime.tag(),
            seeds.len(),
            mean_std(&losses).0,
            fmt_ms(&vals),
            fmt_ms(&tests)
        );
    }
    let path = out.join("regimes.csv");
    write_file(&path, &summary)?;
    output.files.push(path);
    Ok(output)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure3Row {
    pub sampler: SamplerKind,
    pub seed: u64,
    pub report: RegularizationReport,
    pub alpha_err: f64,
}

/// Regularization reports per (sampler, seed) at the random initialization
/// of each seed, from `batches` batches drawn across consecutive epochs.
pub fn figure3_rows(g: &Graph, model: &Model, samplers: &[SamplerConfig], seeds: &[u64], batches: usize) -> Result<Vec<Figure3Row>> {
    let d_min = theory::tail_d_min(g);
    let alpha_full = crate::powerlaw::clauset_alpha(&g.csr().degrees(), d_min).alpha().unwrap_or(f64::NAN);
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let w = model.init(seed);
            samplers
                .iter()
                .map(|s| {
                    let bs = Sampler::new(g, s.clone(), seed)?.take_batches(g, batches)?;
                    let report = measure(model, &w.values, g, &bs)?;
                    let alpha = theory::batch_tail_alpha(&bs, d_min).unwrap_or(f64::NAN);
                    Ok(Figure3Row {
                        sampler: s.kind(),
                        seed,
                        report,
                        alpha_err: (alpha - alpha_full).abs(),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    // Sampler-major order: all seeds of the first sampler, then the next.
    let mut rows = Vec::with_capacity(seeds.len() * samplers.len());
    for i in 0..samplers.len() {
        rows.extend(per_seed.iter().map(|r| r[i].clone()));
    }
    Ok(rows)
}

/// Two-sided 95% Student-t half-width of the mean; zero for a single value.
pub fn ci95_half_width(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let (_, sd) = mean_std(xs);
    let t = StudentsT::new(0.0, 1.0, (xs.len() - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    t * sd / (xs.len() as f64).sqrt()
}

pub fn cmd_figure3(cfg: &ExperimentConfig, out: &Path) -> Result<CommandOutput> {
    if cfg.samplers.len() < 2 {
        return Err(Error::config("figure3 needs at least two [[sampler]] sections"));
    }
    if cfg.figure3.seeds == 0 || cfg.figure3.batches == 0 {
        return Err(Error::config("figure3.seeds and figure3.batches must be >= 1"));
    }
    let g = cfg.build_graph()?;
    let model = Model::new(cfg.model_config(&g)?)?;
    let seeds: Vec<u64> = (0..cfg.figure3.seeds as u64).map(|i| cfg.seed + i).collect();
    let rows = figure3_rows(&g, &model, &cfg.samplers, &seeds, cfg.figure3.batches)?;
    ensure_dir(out)?;

    let mut rows_csv = format!("{REPORT_CSV_HEADER}\n");
    let mut sweep = format!("{}\n", theory::SWEEP_CSV_HEADER);
    for r in &rows {
        rows_csv.push_str(&report_csv_row(r.sampler.as_str(), r.seed, &r.report));
        rows_csv.push('\n');
        let _ = writeln!(sweep, "{},{},{},{}", r.sampler, r.seed, r.alpha_err, r.report.r);
    }

    type Metric = (&'static str, fn(&Figure3Row) -> f64);
    let metrics: [Metric; 5] = [
        ("bias", |r| r.report.bias_abs),
        ("loss_var", |r| r.report.loss_variance),
        ("R", |r| r.report.r),
        ("grad_norm_sq", |r| r.report.grad_bar_norm_sq),
        ("alpha_err", |r| r.alpha_err),
    ];
    let mut summary = String::from("sampler,metric,mean,ci95_half_width,seeds,flag\n");
    let mut lines = Vec::new();
    let n_seeds = seeds.len();
    for (i, s) in cfg.samplers.iter().enumerate() {
        let block = &rows[i * n_seeds..(i + 1) * n_seeds];
        for (name, f) in &metrics {
            let xs: Vec<f64> = block.iter().map(f).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let flag = if n_seeds == 1 { "ci_zero_single_seed" } else { "" };
            let _ = writeln!(summary, "{},{name},{mean},{},{n_seeds},{flag}", s.kind(), ci95_half_width(&xs));
        }
        let r_mean = block.iter().map(|r| r.report.r).sum::<f64>() / n_seeds as f64;
        lines.push(format!("{}: mean R = {r_mean}", s.kind()));
    }

    let mut ordering = String::from("sampler,rns_lower_R_frac,rns_lower_loss_var_frac\n");
    if let Some(rns) = cfg.samplers.iter().position(|s| s.kind() == SamplerKind::Rns) {
        let rns_block = &rows[rns * n_seeds..(rns + 1) * n_seeds];
        for (i, s) in cfg.samplers.iter().enumerate() {
            let block = &rows[i * n_seeds..(i + 1) * n_seeds];
            let frac = |f: fn(&RegularizationReport) -> f64| {
                rns_block.iter().zip(block).filter(|(a, b)| f(&a.report) < f(&b.report)).count() as f64 / n_seeds as f64
            };
            let _ = writeln!(ordering, "{},{},{}", s.kind(), frac(|r| r.r), frac(|r| r.loss_variance));
        }
    }

    let mut output = CommandOutput {
        lines,
        ..Default::default()
    };
    for (name, contents) in [
        ("figure3_rows.csv", rows_csv),
        ("figure3_summary.csv", summary),
        ("figure3_ordering.csv", ordering),
        ("alpha_vs_r.csv", sweep),
    ] {
        let path = out.join(name);
        write_file(&path, &contents)?;
        output.files.push(path);
    }
    Ok(output)
}

/// Names accepted by `verify --only`.
pub const CHECK_NAMES: [&str; 11] = [
    "grad_check",
    "flow_full",
    "flow_plain",
    "flow_sgd",
    "kernel_mass",
    "order_stat",
    "rns_pair",
    "rns_bias",
    "edge_count",
    "degree_tail",
    "alpha_vs_r",
];

/// The 15-node, three-block SBM and linear one-layer GCN used by the flow checks.
pub fn flow_fixture(seed: u64) -> Result<(Graph, Model)> {
    let g = generate(&GenConfig::sbm(vec![5, 5, 5], 0.5, 0.1, seed).with_split([1.0, 0.0, 0.0]))?;
    let model = Model::new(ModelConfig::new(Arch::Gcn, 1, g.feature_dim(), 4, g.num_classes()).with_activation(Activation::Identity))?;
    Ok((g, model))
}

/// Runs one named group of checks.
pub fn run_check(name: &str, cfg: &ExperimentConfig) -> Result<Vec<VerificationResult>> {
    let v = &cfg.verify;
    let seed = cfg.seed;
    let flow_cfg = FlowCheckConfig {
        eps_list: v.flow_eps.clone(),
        ode_substeps: v.flow_substeps,
        ..FlowCheckConfig::default()
    };
    let model_for = |g: &Graph| -> Result<Model> {
        let mut mc = cfg.model_config(g)?;
        if matches!(mc.arch, Arch::Gcn | Arch::SageMean) && cfg.samplers.iter().any(|s| s.depth().is_some_and(|d| d != mc.depth)) {
            return Err(Error::config("layer-wise sampler depth must match model depth"));
        }
        mc.init_scale = cfg.model.init_scale;
        Model::new(mc)
    };
    Ok(match name {
        "grad_check" => {
            let mut out = Vec::new();
            for arch in [Arch::Gcn, Arch::SageMean] {
                for act in [Activation::Relu, Activation::Identity] {
                    for depth in 1..=3 {
                        out.push(theory::gradient_check(arch, depth, act, v.grad_draws, seed)?);
                    }
                }
            }
            out
        }
        "flow_full" | "flow_plain" | "flow_sgd" => {
            let (g, model) = flow_fixture(seed)?;
            let w0 = model.init(seed).values;
            let full = GnnInput::full(&g, model.config(), Split::Train);
            let obj = crate::gnn::BatchObjective { model: &model, input: &full };
            match name {
                "flow_full" => theory::flow_check_full(&obj, &w0, &flow_cfg)?.0,
                "flow_plain" => theory::flow_check_plain(&obj, &w0, &flow_cfg)?.0,
                _ => {
                    let batches = Sampler::new(&g, SamplerConfig::Rns { num_parts: v.flow_sgd_m }, seed)?
                        .epoch(&g, 0)?
                        .batches;
                    let inputs = batches
                        .iter()
                        .map(|b| GnnInput::from_batch(b, model.config()))
                        .collect::<Result<Vec<_>>>()?;
                    let objs: Vec<_> = inputs
                        .iter()
                        .map(|i| crate::gnn::BatchObjective { model: &model, input: i })
                        .collect();
                    theory::flow_check_sgd(&objs, &w0, &flow_cfg)?.0
                }
            }
        }
        "kernel_mass" | "order_stat" => {
            let mut out = Vec::new();
            for &n in &v.kernel_n {
                for &m in &v.kernel_m {
                    for &k in &v.kernel_k {
                        if k + 1 > n / m.max(1) {
                            continue;
                        }
                        if name == "kernel_mass" {
                            out.push(theory::kernel_mass_check(n, m, k)?);
                        } else {
                            out.extend(theory::order_stat_moment_check(n, m, k, v.order_stat_mc_trials, seed)?);
                        }
                    }
                }
            }
            out
        }
        "rns_pair" => {
            let mut out = Vec::new();
            for &n in &v.pair_n {
                for &m in v.pair_m.iter().filter(|&&m| m <= n) {
                    out.extend(theory::rns_pair_checks(n, m, v.pair_trials, seed)?);
                }
            }
            out
        }
        "rns_bias" => {
            let half = v.bias_n / 2;
            let g = generate(&GenConfig::sbm(vec![half, v.bias_n - half], 0.3, 0.05, seed))?;
            let model = model_for(&g)?;
            let w = model.init(seed);
            let mut out = Vec::new();
            for &m in &v.bias_m {
                out.extend(theory::rns_bias_checks(&g, &model, &w, m, v.bias_trials, seed)?);
            }
            out
        }
        "edge_count" => {
            let g = generate(&GenConfig::barabasi_albert(v.edge_n, 4, seed))?;
            v.edge_m
                .iter()
                .map(|&m| theory::rns_edge_count_check(&g, m, v.edge_plans, seed))
                .collect::<Result<Vec<_>>>()?
        }
        "degree_tail" => {
            let g = generate(&GenConfig::barabasi_albert(v.tail_n, v.tail_attach, seed))?;
            let seeds: Vec<u64> = (0..v.tail_seeds as u64).map(|i| seed + i).collect();
            theory::degree_tail_check(&g, &v.tail_m, &seeds, v.tail_tolerance)?.0
        }
        "alpha_vs_r" => {
            let samplers = if cfg.samplers.len() >= 2 {
                cfg.samplers.clone()
            } else {
                default_comparison_samplers(v.sweep_n)
            };
            let g = generate(&GenConfig::barabasi_albert(v.sweep_n, 4, seed))?;
            let model = model_for(&g)?;
            let seeds: Vec<u64> = (0..v.sweep_seeds as u64).map(|i| seed + i).collect();
            let (_, summary) = theory::alpha_vs_r_sweep(&g, &model, &samplers, &seeds, v.sweep_batches)?;
            let mut out = Vec::new();
            for s in summary.per_sampler.iter().filter(|s| s.sampler != SamplerKind::Rns) {
                out.push(VerificationResult::gate(
                    format!("alpha_vs_r_rns_lower_R_vs_{}", s.sampler),
                    s.rns_lower_r_frac,
                    1.0,
                    0.5,
                    theory::Tolerance::Absolute,
                    "RNS has the smallest batch-gradient variance at random init in a majority of seeds",
                ));
                out.push(VerificationResult::info(
                    format!("alpha_vs_r_rns_lower_alpha_err_vs_{}", s.sampler),
                    s.rns_lower_alpha_frac,
                    1.0,
                    "fraction of seeds where RNS has the smaller degree-tail exponent error",
                ));
            }
            out
        }
        other => {
            return Err(Error::config(format!(
                "unknown check `{other}`; expected one of {}",
                CHECK_NAMES.join(", ")
            )))
        }
    })
}

/// The four samplers compared against RNS, sized for an `n`-node graph.
pub fn default_comparison_samplers(n: usize) -> Vec<SamplerConfig> {
    let clusters = (n / 70).max(2);
    vec![
        SamplerConfig::Rns { num_parts: 3 },
        SamplerConfig::Cluster {
            num_clusters: clusters,
            clusters_per_batch: (clusters / 30).max(1),
        },
        SamplerConfig::SaintRw {
            walk_length: 2,
            num_seeds: (n / 30).max(1),
        },
        SamplerConfig::Neighbor {
            fanout: vec![30, 10],
            batch_size: 128,
        },
    ]
}

pub fn cmd_verify(cfg: &ExperimentConfig, out: &Path, only: Option<&str>) -> Result<CommandOutput> {
    let names: Vec<&str> = match only {
        Some(n) => {
            if !CHECK_NAMES.contains(&n) {
                return Err(Error::config(format!(
                    "unknown check `{n}`; expected one of {}",
                    CHECK_NAMES.join(", ")
                )));
            }
            vec![n]
        }
        None => CHECK_NAMES.to_vec(),
    };
    let mut results = Vec::new();
    for name in &names {
        results.extend(run_check(name, cfg)?);
    }
    if let Some(t) = cfg.verify.tolerance_override {
        results = results.iter().map(|r| r.with_tolerance(t)).collect();
    }
    ensure_dir(out)?;
    let path = out.join("manifest.csv");
    write_file(&path, &theory::manifest_csv(&results))?;
    let failed: Vec<&VerificationResult> = results.iter().filter(|r| r.failed()).collect();
    let counts = theory::count_by_status(&results);
    let mut lines = vec![format!(
        "{} checks: {}",
        results.len(),
        counts.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
    )];
    for r in &failed {
        lines.push(format!(
            "FAILED {}: measured {} reference {} tolerance {} ({})",
            r.check_name, r.measured, r.reference, r.tolerance, r.provenance
        ));
    }
    Ok(CommandOutput {
        files: vec![path],
        lines,
        verification_failed: results.iter().any(|r| r.status == Status::Failed),
    })
}

const STAT_FIELDS: [&str; 7] = [
    "num_nodes",
    "num_edges",
    "avg_degree",
    "num_isolated",
    "num_components",
    "diameter_lower_bound",
    "avg_distance_estimate",
];

fn stat_values(s: &StructuralStats) -> [f64; 8] {
    [
        s.num_nodes as f64,
        s.num_edges as f64,
        s.avg_degree,
        s.num_isolated as f64,
        s.num_components as f64,
        s.diameter_lower_bound as f64,
        s.avg_distance_estimate,
        s.edge_homophily,
    ]
}

fn population_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (mean, (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt())
}

/// Structural statistics of RNS batches for each `m`: per epoch plan the
/// batch average, then mean and standard deviation across plans.
pub fn cmd_sampler_stats(cfg: &ExperimentConfig, out: &Path) -> Result<CommandOutput> {
    let g = cfg.build_graph()?;
    let s = &cfg.sampler_stats;
    if s.plans == 0 || s.m_list.is_empty() {
        return Err(Error::config("sampler_stats needs plans >= 1 and a non-empty m_list"));
    }
    let n = g.num_nodes();
    let stats_seed = derive(cfg.seed, &["stats"]).value();
    let mut header = String::from("m");
    for f in STAT_FIELDS.iter().chain(["edge_homophily"].iter()) {
        let _ = write!(header, ",{f}_mean,{f}_std");
    }
    header.push_str(",expected_edges\n");
    let rows = s
        .m_list
        .par_iter()
        .map(|&m| -> Result<String> {
            if m == 0 || m > n {
                return Err(Error::config(format!("m = {m} must be in 1..={n}")));
            }
            let root = derive(cfg.seed, &["sampler_stats", &m.to_string()]);
            let mut per_plan: Vec<[f64; 8]> = Vec::with_capacity(s.plans);
            for p in 0..s.plans {
                let blocks = rns_blocks(n, m, &mut root.child(p as u64).rng())?;
                let mut acc = [0.0; 8];
                for b in &blocks {
                    let batch = induced_subgraph(&g, b)?;
                    let st = structural_stats(&batch, s.bfs_samples, stats_seed)?;
                    for (a, v) in acc.iter_mut().zip(stat_values(&st)) {
                        *a += v / blocks.len() as f64;
                    }
                }
                per_plan.push(acc);
            }
            let r = n / m;
            let expected = g.num_edges() as f64 * (r * r.saturating_sub(1)) as f64 / (n * (n - 1)).max(1) as f64;
            let mut line = format!("{m}");
            for j in 0..8 {
                let col: Vec<f64> = per_plan.iter().map(|v| v[j]).collect();
                let (mean, sd) = population_std(&col);
                let _ = write!(line, ",{mean},{sd}");
            }
            let _ = write!(line, ",{expected}");
            Ok(line)
        })
        .collect::<Result<Vec<_>>>()?;
    let full = structural_stats(&g, s.bfs_samples, stats_seed)?;
    let mut csv = header;
    for r in rows {
        csv.push_str(&r);
        csv.push('\n');
    }
    ensure_dir(out)?;
    let path = out.join("sampler_stats.csv");
    write_file(&path, &csv)?;
    Ok(CommandOutput {
        files: vec![path],
        lines: vec![format!(
            "full graph: {} nodes, {} edges, avg degree {}",
            full.num_nodes, full.num_edges, full.avg_degree
        )],
        verification_failed: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SBM: &str = r#"
seed = 3
[graph]
kind = "sbm"
block_sizes = [10, 10, 10]
p_in = 0.3
p_out = 0.05

[[sampler]]
kind = "rns"
num_parts = 2

[[sampler]]
kind = "cluster"
num_clusters = 6
clusters_per_batch = 2

[optim]
epochs = 5
"#;

    #[test]
    fn config_parsing_and_errors() {
        let cfg = parse_config(SBM).unwrap();
        assert_eq!(cfg.samplers.len(), 2);
        assert_eq!(cfg.samplers[1], SamplerConfig::Cluster { num_clusters: 6, clusters_per_batch: 2 });
        assert_eq!(cfg.optim.lr, 0.03);
        assert!(matches!(parse_config("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(parse_config("[[sampler]]\nkind = \"rns\"\nnum_parts = 0"), Err(Error::Config(_))));
        assert!(matches!(parse_config("[[sampler]]\nkind = \"nope\""), Err(Error::Config(_))));
        let no_graph = parse_config("seed = 1").unwrap();
        assert!(matches!(no_graph.build_graph(), Err(Error::Config(_))));
        let both = parse_config("[graph]\nkind = \"ba\"\nn = 50\nedges = \"x\"").unwrap();
        assert!(matches!(both.build_graph(), Err(Error::Config(_))));
    }

    #[test]
    fn generate_round_trip_and_determinism() {
        let cfg = parse_config(SBM).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let files = cmd_generate(&cfg, a.path()).unwrap().files;
        cmd_generate(&cfg, b.path()).unwrap();
        assert_eq!(files.len(), 4);
        for f in GRAPH_FILES {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        }
        let g = cfg.build_graph().unwrap();
        let p = |f: &str| a.path().join(f);
        let back = read_graph_files(&p("edges.txt"), &p("features.csv"), &p("labels.csv"), &p("split.csv"), None).unwrap();
        assert_eq!(back.csr(), g.csr());
        assert_eq!(back.features(), g.features());
        assert_eq!(back.labels(), g.labels());
        assert_eq!(back.split(), g.split());
        assert!(read_graph_files(&p("missing"), &p("features.csv"), &p("labels.csv"), &p("split.csv"), None).is_err());
    }

    #[test]
    fn ci_half_width() {
        assert_eq!(ci95_half_width(&[1.0]), 0.0);
        let w = ci95_half_width(&[1.0, 2.0, 3.0]);
        assert!((w - 4.302652729749464 * 1.0 / 3f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn sampler_stats_degenerate_m() {
        let mut cfg = parse_config(SBM).unwrap();
        cfg.sampler_stats.m_list = vec![1, 30];
        let dir = tempfile::tempdir().unwrap();
        cmd_sampler_stats(&cfg, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("sampler_stats.csv")).unwrap();
        let lines: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
        let g = cfg.build_graph().unwrap();
        let full = stat_values(&structural_stats(&g, 8, derive(3, &["stats"]).value()).unwrap());
        for j in 0..8 {
            assert!((lines[0][1 + 2 * j] - full[j]).abs() <= 1e-12 * full[j].abs().max(1.0));
            assert!(lines[0][2 + 2 * j].abs() <= 1e-12);
        }
        assert_eq!(lines[1][5], 0.0);
    }
}
