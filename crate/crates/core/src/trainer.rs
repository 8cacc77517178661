//! Optimizers and the three training regimes: full-graph gradient descent,
//! chained mini-batch steps, and mini-batch gradients accumulated into one
//! update per epoch.

use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::gnn::{GnnInput, LossGrad, Model, ParamVector};
use crate::graph::{Batch, Graph, Split};
use crate::metrics::RegularizationReport;
use crate::rng::derive;
use crate::samplers::{Sampler, SamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimKind {
    Sgd,
    Momentum { beta: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimConfig {
    pub kind: OptimKind,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
}

impl OptimConfig {
    pub fn sgd(lr: f64, epochs: usize) -> Self {
        OptimConfig {
            kind: OptimKind::Sgd,
            lr,
            weight_decay: 0.0,
            epochs,
        }
    }

    pub fn momentum(lr: f64, beta: f64, epochs: usize) -> Self {
        OptimConfig {
            kind: OptimKind::Momentum { beta },
            ..Self::sgd(lr, epochs)
        }
    }

    pub fn adam(lr: f64, epochs: usize) -> Self {
        OptimConfig {
            kind: OptimKind::Adam {
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            ..Self::sgd(lr, epochs)
        }
    }

    pub fn with_weight_decay(mut self, wd: f64) -> Self {
        self.weight_decay = wd;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(Error::config("learning rate must be > 0"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be >= 1"));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::config("weight_decay must be >= 0"));
        }
        match self.kind {
            OptimKind::Sgd => Ok(()),
            OptimKind::Momentum { beta } if (0.0..1.0).contains(&beta) => Ok(()),
            OptimKind::Adam { beta1, beta2, eps }
                if (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0 =>
            {
                Ok(())
            }
            _ => Err(Error::config("momentum coefficients must lie in [0, 1) and eps > 0")),
        }
    }
}

pub fn sgd_step(w: &mut [f64], grad: &[f64], lr: f64) {
    for (wi, gi) in w.iter_mut().zip(grad) {
        *wi -= lr * gi;
    }
}

/// `v ← βv + g`, `w ← w − αv`.
pub fn momentum_step(w: &mut [f64], grad: &[f64], velocity: &mut [f64], lr: f64, beta: f64) {
    for ((wi, gi), vi) in w.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        *vi = beta * *vi + gi;
        *wi -= lr * *vi;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: i32,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        AdamState {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }
}

/// Adam with bias-corrected moments.
pub fn adam_step(w: &mut [f64], grad: &[f64], state: &mut AdamState, lr: f64, beta1: f64, beta2: f64, eps: f64) {
    state.t += 1;
    let c1 = 1.0 - beta1.powi(state.t);
    let c2 = 1.0 - beta2.powi(state.t);
    for i in 0..w.len() {
        let g = grad[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// An optimizer with its running state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: OptimConfig,
    velocity: Vec<f64>,
    adam: AdamState,
}

impl Optimizer {
    pub fn new(cfg: OptimConfig, dim: usize) -> Self {
        Optimizer {
            cfg,
            velocity: vec![0.0; dim],
            adam: AdamState::new(dim),
        }
    }

    pub fn step(&mut self, w: &mut [f64], grad: &[f64]) {
        let decayed;
        let grad = if self.cfg.weight_decay != 0.0 {
            decayed = grad.iter().zip(w.iter()).map(|(g, x)| g + self.cfg.weight_decay * x).collect::<Vec<_>>();
            &decayed[..]
        } else {
            grad
        };
        match self.cfg.kind {
            OptimKind::Sgd => sgd_step(w, grad, self.cfg.lr),
            OptimKind::Momentum { beta } => momentum_step(w, grad, &mut self.velocity, self.cfg.lr, beta),
            OptimKind::Adam { beta1, beta2, eps } => adam_step(w, grad, &mut self.adam, self.cfg.lr, beta1, beta2, eps),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Regime {
    Full,
    Chained(SamplerConfig),
    Accumulated(SamplerConfig),
}

impl Regime {
    pub fn tag(&self) -> &'static str {
        match self {
            Regime::Full => "full",
            Regime::Chained(_) => "sampled_chained",
            Regime::Accumulated(_) => "sampled_accumulated",
        }
    }

    pub fn sampler(&self) -> Option<&SamplerConfig> {
        match self {
            Regime::Full => None,
            Regime::Chained(s) | Regime::Accumulated(s) => Some(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub report: Option<RegularizationReport>,
}

#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub records: Vec<EpochRecord>,
    pub params: ParamVector,
}

pub const TRACE_CSV_HEADER: &str = "epoch,train_loss,val_acc,test_acc,bias,loss_var,R,grad_norm_sq";

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl TrainTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let rep = r.report.as_ref();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.epoch,
                r.train_loss,
                opt(r.val_acc),
                opt(r.test_acc),
                opt(rep.map(|x| x.bias_abs)),
                opt(rep.map(|x| x.loss_variance)),
                opt(rep.map(|x| x.r)),
                opt(rep.map(|x| x.grad_bar_norm_sq)),
            );
        }
        out
    }

    pub fn last(&self) -> &EpochRecord {
        self.records.last().expect("at least one epoch")
    }
}

/// What a metric hook sees after each epoch.
pub struct EpochInfo<'a> {
    pub epoch: usize,
    pub before: &'a [f64],
    pub after: &'a [f64],
    /// The epoch's batches in the order they were used (empty for `Full`).
    pub batches: &'a [Batch],
}

pub type EpochHook<'h> = dyn FnMut(&EpochInfo<'_>) -> Result<Option<RegularizationReport>> + 'h;

/// Mean of the batch gradients over batches with at least one target.
pub fn mean_batch_gradient(model: &Model, w: &[f64], inputs: &[GnnInput]) -> Result<LossGrad> {
    let mut sum = vec![0.0; w.len()];
    let mut loss = 0.0;
    let mut used = 0usize;
    for input in inputs.iter().filter(|i| !i.targets.is_empty()) {
        let lg = model.loss_and_grad(w, input)?;
        loss += lg.loss;
        for (s, g) in sum.iter_mut().zip(&lg.grad) {
            *s += g;
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::EmptyTargets("every batch of the epoch lacks training targets".into()));
    }
    let k = used as f64;
    Ok(LossGrad {
        loss: loss / k,
        grad: sum.into_iter().map(|s| s / k).collect(),
    })
}

pub fn train(g: &Graph, model: &Model, optim: &OptimConfig, regime: &Regime, seed: u64) -> Result<TrainTrace> {
    train_with_hook(g, model, optim, regime, seed, &mut |_| Ok(None))
}

/// Trains from `model.init(seed)`; evaluation always uses the full graph.
pub fn train_with_hook(
    g: &Graph,
    model: &Model,
    optim: &OptimConfig,
    regime: &Regime,
    seed: u64,
    hook: &mut EpochHook<'_>,
) -> Result<TrainTrace> {
    optim.validate()?;
    let cfg = model.config();
    let sampler = regime.sampler().map(|s| Sampler::new(g, s.clone(), seed)).transpose()?;
    let full_input = GnnInput::full(g, cfg, Split::Train);
    let order_seed = derive(seed, &["order"]);
    let mut w = model.init(seed);
    let mut opt = Optimizer::new(optim.clone(), w.len());
    let mut records = Vec::with_capacity(optim.epochs);

    for epoch in 1..=optim.epochs {
        let before = w.values.clone();
        let mut batches = Vec::new();
        match (regime, &sampler) {
            (Regime::Full, _) => {
                let lg = model.loss_and_grad(&w.values, &full_input)?;
                opt.step(&mut w.values, &lg.grad);
            }
            (Regime::Chained(_), Some(s)) => {
                batches = s.epoch(g, epoch as u64 - 1)?.batches;
                batches.shuffle(&mut order_seed.child(epoch as u64).rng());
                let mut stepped = false;
                for b in &batches {
                    if b.train_targets.is_empty() {
                        continue;
                    }
                    let input = GnnInput::from_batch(b, cfg)?;
                    let lg = model.loss_and_grad(&w.values, &input)?;
                    opt.step(&mut w.values, &lg.grad);
                    stepped = true;
                }
                if !stepped {
                    return Err(Error::EmptyTargets("every batch of the epoch lacks training targets".into()));
                }
            }
            (Regime::Accumulated(_), Some(s)) => {
                batches = s.epoch(g, epoch as u64 - 1)?.batches;
                batches.shuffle(&mut order_seed.child(epoch as u64).rng());
                let inputs = batches
                    .iter()
                    .map(|b| GnnInput::from_batch(b, cfg))
                    .collect::<Result<Vec<_>>>()?;
                let lg = mean_batch_gradient(model, &w.values, &inputs)?;
                opt.step(&mut w.values, &lg.grad);
            }
            _ => unreachable!("sampled regimes always build a sampler"),
        }
        if w.values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("parameters diverged at epoch {epoch}")));
        }
        let report = hook(&EpochInfo {
            epoch,
            before: &before,
            after: &w.values,
            batches: &batches,
        })?;
        let logits = model.forward(&w, &full_input)?;
        let train_loss = model.loss(&w.values, &full_input)?;
        records.push(EpochRecord {
            epoch,
            train_loss,
            val_acc: evaluate_logits(&logits, g, Split::Val).ok(),
            test_acc: evaluate_logits(&logits, g, Split::Test).ok(),
            report,
        });
    }
    Ok(TrainTrace { records, params: w })
}

/// Accuracy on the nodes tagged `split`, or average precision of the
/// class-1 score when the task is binary.
pub fn evaluate(model: &Model, w: &ParamVector, g: &Graph, split: Split) -> Result<f64> {
    let input = GnnInput::full(g, model.config(), split);
    let logits = model.forward(w, &input)?;
    evaluate_logits(&logits, g, split)
}

pub fn evaluate_logits(logits: &ndarray::Array2<f64>, g: &Graph, split: Split) -> Result<f64> {
    let nodes = g.nodes_in(split);
    if nodes.is_empty() {
        return Err(Error::EmptyTargets(format!("no {split} nodes to evaluate")));
    }
    let labels: Vec<usize> = nodes.iter().map(|&v| g.labels()[v]).collect();
    if g.num_classes() == 2 {
        let scores: Vec<f64> = nodes.iter().map(|&v| logits[[v, 1]] - logits[[v, 0]]).collect();
        let positives: Vec<bool> = labels.iter().map(|&y| y == 1).collect();
        return Ok(average_precision(&scores, &positives));
    }
    let correct = nodes
        .iter()
        .zip(&labels)
        .filter(|(&v, &y)| argmax(logits.row(v).iter().copied()) == y)
        .count();
    Ok(correct as f64 / nodes.len() as f64)
}

fn argmax(xs: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in xs.enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best.0
}

/// Mean of precision@k over the ranks k of positive items, ranking by
/// descending score (ties keep input order). Zero when there are no positives.
pub fn average_precision(scores: &[f64], positive: &[bool]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if positive[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate, GenConfig};
    use crate::gnn::{Activation, Arch, ModelConfig};

    fn toy() -> (Graph, Model) {
        let g = generate(&GenConfig::sbm(vec![10, 10, 10], 0.3, 0.05, 5).with_features(6, 0.8).with_classes(3)).unwrap();
        let model = Model::new(ModelConfig::new(Arch::Gcn, 2, 6, 8, 3)).unwrap();
        (g, model)
    }

    #[test]
    fn sgd_on_quadratic() {
        let mut w = [1.0];
        sgd_step(&mut w, &[1.0], 0.1);
        assert!((w[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn momentum_without_beta_is_sgd() {
        let mut a = [0.5, -1.0];
        let mut b = a;
        let mut v = [0.3, 0.7];
        momentum_step(&mut a, &[0.2, 0.4], &mut v, 0.1, 0.0);
        sgd_step(&mut b, &[0.2, 0.4], 0.1);
        assert_eq!(a, b);
    }

    #[test]
    fn adam_first_step() {
        let mut w = [2.0];
        let mut s = AdamState::new(1);
        adam_step(&mut w, &[1.0], &mut s, 0.01, 0.0, 0.0, 1e-8);
        assert!((w[0] - (2.0 - 0.01 / (1.0 + 1e-8))).abs() < 1e-15);
        let mut z = [3.0];
        let mut s = AdamState::new(1);
        adam_step(&mut z, &[0.0], &mut s, 0.01, 0.9, 0.999, 1e-8);
        assert_eq!(z[0], 3.0);
    }

    #[test]
    fn weight_decay_adds_to_gradient() {
        let mut opt = Optimizer::new(OptimConfig::sgd(0.5, 1).with_weight_decay(0.1), 1);
        let mut w = [2.0];
        opt.step(&mut w, &[0.0]);
        assert!((w[0] - 1.9).abs() < 1e-15);
    }

    #[test]
    fn average_precision_examples() {
        let ap = average_precision(&[0.9, 0.8, 0.1], &[true, false, true]);
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(average_precision(&[1.0, 0.0, 1.0], &[true, false, true]), 1.0);
    }

    #[test]
    fn single_part_chain_matches_full() {
        let (g, model) = toy();
        let optim = OptimConfig::sgd(0.1, 20);
        let full = train(&g, &model, &optim, &Regime::Full, 4).unwrap();
        let rns = train(&g, &model, &optim, &Regime::Chained(SamplerConfig::Rns { num_parts: 1 }), 4).unwrap();
        for (a, b) in full.records.iter().zip(&rns.records) {
            assert!((a.train_loss - b.train_loss).abs() < 1e-12);
        }
        assert_eq!(full.records.len(), 20);
    }

    #[test]
    fn accumulated_applies_mean_gradient() {
        let (g, model) = toy();
        let optim = OptimConfig::sgd(0.1, 3);
        let regime = Regime::Accumulated(SamplerConfig::Rns { num_parts: 3 });
        let mut max_err: f64 = 0.0;
        train_with_hook(&g, &model, &optim, &regime, 1, &mut |info| {
            let inputs: Vec<GnnInput> = info
                .batches
                .iter()
                .map(|b| GnnInput::from_batch(b, model.config()).unwrap())
                .collect();
            let lg = mean_batch_gradient(&model, info.before, &inputs)?;
            for i in 0..lg.grad.len() {
                let applied = (info.before[i] - info.after[i]) / 0.1;
                max_err = max_err.max((applied - lg.grad[i]).abs());
            }
            Ok(None)
        })
        .unwrap();
        assert!(max_err < 1e-12, "{max_err}");
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let (g, model) = toy();
        for optim in [OptimConfig::sgd(0.2, 40), OptimConfig::momentum(0.05, 0.9, 40), OptimConfig::adam(0.01, 40)] {
            let regime = Regime::Chained(SamplerConfig::Rns { num_parts: 2 });
            let a = train(&g, &model, &optim, &regime, 9).unwrap();
            let b = train(&g, &model, &optim, &regime, 9).unwrap();
            assert_eq!(a.to_csv(), b.to_csv());
            assert!(a.last().train_loss < a.records[0].train_loss);
        }
    }

    #[test]
    fn all_empty_batches_error() {
        let g = generate(&GenConfig::sbm(vec![4, 4], 0.5, 0.1, 0).with_split([0.0, 0.5, 0.5])).unwrap();
        let model = Model::new(ModelConfig::new(Arch::Gcn, 1, 8, 4, 2).with_activation(Activation::Identity)).unwrap();
        let r = train(&g, &model, &OptimConfig::sgd(0.1, 1), &Regime::Chained(SamplerConfig::Rns { num_parts: 2 }), 0);
        assert!(matches!(r, Err(Error::EmptyTargets(_))));
        assert!(OptimConfig::sgd(0.0, 1).validate().is_err());
        assert!(OptimConfig::momentum(0.1, 1.0, 1).validate().is_err());
    }

    #[test]
    fn csv_shape() {
        let (g, model) = toy();
        let t = train(&g, &model, &OptimConfig::sgd(0.1, 5), &Regime::Full, 0).unwrap();
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.starts_with(TRACE_CSV_HEADER));
        assert!(csv.lines().nth(1).unwrap().ends_with(",,,,"));
    }
}
