//! Implicit-regularization measurements at a fixed parameter point.
//!
//! Given batches `B_1..B_m` with losses `L̂_k` and gradients `g_k`:
//! `L̄ = (1/m) Σ L̂_k`, `R = (1/m) Σ ‖g_k − ḡ‖² = (1/m) Σ ‖g_k‖² − ‖ḡ‖²`, and
//! the sampled modified loss `L̄ + (ε/4)‖ḡ‖² + (ε/4)R`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::gnn::{dot, GnnInput, Model, ParamVector};
use crate::graph::{Batch, Graph, Split};

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationReport {
    pub l_full: f64,
    pub l_bar: f64,
    pub bias_abs: f64,
    pub loss_variance: f64,
    pub grad_bar_norm_sq: f64,
    pub r: f64,
    pub per_batch_losses: Vec<f64>,
    pub m_effective: usize,
}

impl RegularizationReport {
    /// `L̄ + (ε/4)‖∇L̄‖² + (ε/4)R`.
    pub fn modified_loss(&self, eps: f64) -> f64 {
        self.l_bar + 0.25 * eps * (self.grad_bar_norm_sq + self.r)
    }
}

/// Losses and gradients of the batches that have training targets.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    pub losses: Vec<f64>,
    pub grads: Vec<Vec<f64>>,
}

impl BatchGradients {
    pub fn compute(model: &Model, w: &[f64], batches: &[Batch]) -> Result<BatchGradients> {
        let mut losses = Vec::new();
        let mut grads = Vec::new();
        for b in batches.iter().filter(|b| !b.train_targets.is_empty()) {
            let lg = model.loss_and_grad(w, &GnnInput::from_batch(b, model.config())?)?;
            losses.push(lg.loss);
            grads.push(lg.grad);
        }
        if losses.is_empty() {
            return Err(Error::EmptyTargets("no batch has training targets".into()));
        }
        Ok(BatchGradients { losses, grads })
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn mean_loss(&self) -> f64 {
        self.losses.iter().sum::<f64>() / self.len() as f64
    }

    pub fn mean_grad(&self) -> Vec<f64> {
        let m = self.len() as f64;
        let mut out = vec![0.0; self.grads[0].len()];
        for g in &self.grads {
            for (o, x) in out.iter_mut().zip(g) {
                *o += x / m;
            }
        }
        out
    }

    /// `(1/m) Σ ‖g_k − ḡ‖²`.
    pub fn gradient_variance(&self) -> f64 {
        let bar = self.mean_grad();
        self.grads
            .iter()
            .map(|g| g.iter().zip(&bar).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum::<f64>()
            / self.len() as f64
    }

    pub fn mean_grad_norm_sq(&self) -> f64 {
        self.grads.iter().map(|g| dot(g, g)).sum::<f64>() / self.len() as f64
    }
}

fn population_variance(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64
}

/// Full-graph training loss alongside the batch statistics. Batches without
/// training targets are dropped from every average.
pub fn measure(model: &Model, w: &[f64], g: &Graph, batches: &[Batch]) -> Result<RegularizationReport> {
    let stats = BatchGradients::compute(model, w, batches)?;
    let l_full = model.loss(w, &GnnInput::full(g, model.config(), Split::Train))?;
    let l_bar = stats.mean_loss();
    let bar = stats.mean_grad();
    let grad_bar_norm_sq = dot(&bar, &bar);
    let r = stats.gradient_variance();
    let second_moment = stats.mean_grad_norm_sq();
    let identity_gap = (second_moment - grad_bar_norm_sq - r).abs();
    if identity_gap > 1e-9 * second_moment.max(1.0) {
        return Err(Error::Numerical(format!("variance decomposition off by {identity_gap:e}")));
    }
    Ok(RegularizationReport {
        l_full,
        l_bar,
        bias_abs: (l_full - l_bar).abs(),
        loss_variance: population_variance(&stats.losses),
        grad_bar_norm_sq,
        r,
        m_effective: stats.len(),
        per_batch_losses: stats.losses,
    })
}

/// `L̄ + (ε/4)‖∇L̄‖² + (ε/4)R` over the given batches.
pub fn modified_loss_value(model: &Model, w: &[f64], batches: &[Batch], eps: f64) -> Result<f64> {
    if eps < 0.0 {
        return Err(Error::config("eps must be >= 0"));
    }
    let stats = BatchGradients::compute(model, w, batches)?;
    let bar = stats.mean_grad();
    Ok(stats.mean_loss() + 0.25 * eps * (dot(&bar, &bar) + stats.gradient_variance()))
}

/// Per-node cross-entropy of the full-graph forward pass, indexed by node.
pub fn full_node_losses(model: &Model, w: &ParamVector, g: &Graph) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..g.num_nodes()).collect();
    let input = GnnInput::full(g, model.config(), Split::Train).with_targets(all, g.labels().to_vec());
    model.target_losses(w, &input)
}

/// Full-graph per-node losses averaged over the batch's training targets.
/// `None` when the batch has no training targets.
pub fn full_loss_on_batch(node_losses: &[f64], batch: &Batch) -> Option<f64> {
    if batch.train_targets.is_empty() {
        return None;
    }
    let sum: f64 = batch.train_targets.iter().map(|&t| node_losses[batch.global_ids[t]]).sum();
    Some(sum / batch.train_targets.len() as f64)
}

/// Largest, over training nodes seen in the batches, of the mean L2 distance
/// between the node's logits inside its batch and on the full graph.
pub fn sigma_estimate(model: &Model, w: &ParamVector, g: &Graph, batches: &[Batch]) -> Result<f64> {
    let cfg = model.config();
    let full = model.forward(w, &GnnInput::full(g, cfg, Split::Train))?;
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for b in batches.iter().filter(|b| !b.train_targets.is_empty()) {
        let logits = model.forward(w, &GnnInput::from_batch(b, cfg)?)?;
        for &t in &b.train_targets {
            let v = b.global_ids[t];
            let dev = logits
                .row(t)
                .iter()
                .zip(full.row(v))
                .map(|(a, c)| (a - c) * (a - c))
                .sum::<f64>()
                .sqrt();
            let e = acc.entry(v).or_insert((0.0, 0));
            e.0 += dev;
            e.1 += 1;
        }
    }
    Ok(acc.values().map(|&(s, c)| s / c as f64).fold(0.0, f64::max))
}

pub const REPORT_CSV_HEADER: &str = "sampler,seed,bias,loss_var,R,grad_norm_sq";

pub fn report_csv_row(sampler: &str, seed: u64, r: &RegularizationReport) -> String {
    format!(
        "{sampler},{seed},{},{},{},{}",
        r.bias_abs, r.loss_variance, r.r, r.grad_bar_norm_sq
    )
}
