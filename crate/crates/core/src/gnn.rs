//! GCN and GraphSAGE-mean networks with hand-written backpropagation,
//! finite-difference oracles and Hessian-vector products.
//!
//! A network is a stack of `depth` message-passing layers; hidden layers
//! apply the configured activation and the last layer emits raw logits.
//!
//! * GCN: `H' = act(P H W + b)` where `P` is the layer's propagation matrix
//!   (`D̃^{-1/2}(A+I)D̃^{-1/2}` of an induced subgraph, or the sampler-supplied
//!   weights of a layer-wise batch).
//! * SAGE-mean: `H' = act(H W_self + M H W_nbr + b)` where `M` averages over
//!   neighbors; an empty neighborhood contributes zero.

use std::fmt::Write as _;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{Adjacency, Batch, Csr, Graph, LayerAdj, Split};
use crate::rng::derive;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    Gcn,
    SageMean,
}

impl Arch {
    pub fn parse(s: &str) -> Option<Arch> {
        match s.trim() {
            "gcn" => Some(Arch::Gcn),
            "sage_mean" | "sage" => Some(Arch::SageMean),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn parse(s: &str) -> Option<Activation> {
        match s.trim() {
            "relu" => Some(Activation::Relu),
            "identity" | "linear" => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub arch: Arch,
    pub depth: usize,
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub activation: Activation,
    pub init_scale: f64,
}

impl ModelConfig {
    pub fn new(arch: Arch, depth: usize, in_dim: usize, hidden_dim: usize, num_classes: usize) -> Self {
        ModelConfig {
            arch,
            depth,
            in_dim,
            hidden_dim,
            num_classes,
            activation: Activation::Relu,
            init_scale: 1.0,
        }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn with_init_scale(mut self, scale: f64) -> Self {
        self.init_scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.in_dim == 0 || self.hidden_dim == 0 || self.num_classes == 0 {
            return Err(Error::config("model depth and dimensions must be > 0"));
        }
        Ok(())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        (0..self.depth)
            .map(|l| {
                let d_in = if l == 0 { self.in_dim } else { self.hidden_dim };
                let d_out = if l + 1 == self.depth { self.num_classes } else { self.hidden_dim };
                (d_in, d_out)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorShape {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

impl TensorShape {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat parameter vector with its shape table.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub shapes: Vec<TensorShape>,
}

impl ParamVector {
    pub fn zeros(shapes: Vec<TensorShape>) -> Self {
        let n = shapes.iter().map(TensorShape::len).sum();
        ParamVector {
            values: vec![0.0; n],
            shapes,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        ParamVector {
            values,
            shapes: self.shapes.clone(),
        }
    }

    pub fn unflatten(&self) -> Vec<Array2<f64>> {
        let mut offset = 0;
        self.shapes
            .iter()
            .map(|s| {
                let block = self.values[offset..offset + s.len()].to_vec();
                offset += s.len();
                Array2::from_shape_vec((s.rows, s.cols), block).expect("shape table matches values")
            })
            .collect()
    }

    pub fn flatten(shapes: Vec<TensorShape>, tensors: &[Array2<f64>]) -> Self {
        let mut values = Vec::with_capacity(shapes.iter().map(TensorShape::len).sum());
        for (s, t) in shapes.iter().zip(tensors) {
            assert_eq!((s.rows, s.cols), t.dim(), "tensor {} shape", s.name);
            values.extend(t.iter().copied());
        }
        ParamVector { values, shapes }
    }

    /// Text checkpoint: one `# name rows cols` line per tensor, then one value per line.
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        for s in &self.shapes {
            let _ = writeln!(out, "# {} {} {}", s.name, s.rows, s.cols);
        }
        for v in &self.values {
            let _ = writeln!(out, "{v}");
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let mut shapes = Vec::new();
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let err = |msg: &str| Error::Parse {
                path: "checkpoint".into(),
                line: i + 1,
                msg: msg.into(),
            };
            if let Some(rest) = line.strip_prefix('#') {
                let f: Vec<&str> = rest.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(err("expected `# name rows cols`"));
                }
                shapes.push(TensorShape {
                    name: f[0].to_string(),
                    rows: f[1].parse().map_err(|_| err("bad rows"))?,
                    cols: f[2].parse().map_err(|_| err("bad cols"))?,
                });
            } else if !line.trim().is_empty() {
                values.push(line.trim().parse::<f64>().map_err(|_| err("bad value"))?);
            }
        }
        let expected: usize = shapes.iter().map(TensorShape::len).sum();
        if expected != values.len() {
            return Err(Error::LengthMismatch {
                what: "checkpoint values",
                expected,
                got: values.len(),
            });
        }
        Ok(ParamVector { values, shapes })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Everything a forward pass needs besides parameters: node features, one
/// propagation operator per layer, and the supervised targets.
#[derive(Debug, Clone)]
pub struct GnnInput {
    pub features: Array2<f64>,
    layers: Vec<Arc<SparseMatrix>>,
    pub targets: Vec<usize>,
    pub target_labels: Vec<usize>,
}

fn gcn_from_csr(csr: &Csr) -> SparseMatrix {
    let n = csr.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n).map(|v| 1.0 / ((csr.degree(v) + 1) as f64).sqrt()).collect();
    SparseMatrix::from_rows(
        n,
        (0..n).map(|v| {
            let mut row: Vec<(usize, f64)> = csr.neighbors(v).iter().map(|&u| (u, inv_sqrt[v] * inv_sqrt[u])).collect();
            row.push((v, inv_sqrt[v] * inv_sqrt[v]));
            row
        }),
    )
}

fn mean_from_csr(csr: &Csr) -> SparseMatrix {
    let n = csr.num_nodes();
    SparseMatrix::from_rows(
        n,
        (0..n).map(|v| {
            let nb = csr.neighbors(v);
            let w = 1.0 / nb.len().max(1) as f64;
            nb.iter().map(|&u| (u, w)).collect()
        }),
    )
}

fn gcn_from_layer(layer: &LayerAdj) -> SparseMatrix {
    let n = layer.num_nodes();
    SparseMatrix::from_rows(
        n,
        (0..n).map(|v| {
            let mut row: Vec<(usize, f64)> = layer.in_edges(v).collect();
            if layer.self_weight[v] != 0.0 {
                row.push((v, layer.self_weight[v]));
            }
            row
        }),
    )
}

fn mean_from_layer(layer: &LayerAdj) -> SparseMatrix {
    let n = layer.num_nodes();
    SparseMatrix::from_rows(
        n,
        (0..n).map(|v| {
            let k = layer.offsets[v + 1] - layer.offsets[v];
            let w = 1.0 / k.max(1) as f64;
            layer.in_edges(v).map(|(u, _)| (u, w)).collect()
        }),
    )
}

impl GnnInput {
    pub fn from_batch(batch: &Batch, cfg: &ModelConfig) -> Result<GnnInput> {
        let layers = match &batch.adjacency {
            Adjacency::Induced(csr) => {
                let op = Arc::new(match cfg.arch {
                    Arch::Gcn => gcn_from_csr(csr),
                    Arch::SageMean => mean_from_csr(csr),
                });
                vec![op; cfg.depth]
            }
            Adjacency::Layered { stack, .. } => {
                if stack.len() != cfg.depth {
                    return Err(Error::Dimension(format!(
                        "batch has {} sampled layers but the model has depth {}",
                        stack.len(),
                        cfg.depth
                    )));
                }
                stack
                    .iter()
                    .map(|l| {
                        Arc::new(match cfg.arch {
                            Arch::Gcn => gcn_from_layer(l),
                            Arch::SageMean => mean_from_layer(l),
                        })
                    })
                    .collect()
            }
        };
        Ok(GnnInput {
            features: batch.features.clone(),
            layers,
            target_labels: batch.target_labels(),
            targets: batch.train_targets.clone(),
        })
    }

    /// Whole graph with the nodes of `tag` as targets.
    pub fn full(g: &Graph, cfg: &ModelConfig, tag: Split) -> GnnInput {
        let op = Arc::new(match cfg.arch {
            Arch::Gcn => gcn_from_csr(g.csr()),
            Arch::SageMean => mean_from_csr(g.csr()),
        });
        let targets = g.nodes_in(tag);
        GnnInput {
            features: g.features().clone(),
            layers: vec![op; cfg.depth],
            target_labels: targets.iter().map(|&v| g.labels()[v]).collect(),
            targets,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.features.nrows()
    }

    /// Same graph and features with a different target set (local indices).
    pub fn with_targets(&self, targets: Vec<usize>, labels: Vec<usize>) -> GnnInput {
        GnnInput {
            features: self.features.clone(),
            layers: self.layers.clone(),
            targets,
            target_labels: labels,
        }
    }
}

struct LayerParams {
    w_self: Array2<f64>,
    w_nbr: Option<Array2<f64>>,
    bias: Array1<f64>,
}

struct Cache {
    /// Layer inputs H_0..H_{L-1}.
    inputs: Vec<Array2<f64>>,
    /// Aggregated inputs (P H for GCN, M H for SAGE).
    aggregated: Vec<Array2<f64>>,
    /// Pre-activations Z_0..Z_{L-1}; the last one is the logits.
    pre: Vec<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct Model {
    cfg: ModelConfig,
    shapes: Vec<TensorShape>,
}

impl Model {
    pub fn new(cfg: ModelConfig) -> Result<Model> {
        cfg.validate()?;
        let mut shapes = Vec::new();
        for (l, (d_in, d_out)) in cfg.layer_dims().into_iter().enumerate() {
            match cfg.arch {
                Arch::Gcn => shapes.push(TensorShape {
                    name: format!("layer{l}.weight"),
                    rows: d_in,
                    cols: d_out,
                }),
                Arch::SageMean => {
                    shapes.push(TensorShape {
                        name: format!("layer{l}.weight_self"),
                        rows: d_in,
                        cols: d_out,
                    });
                    shapes.push(TensorShape {
                        name: format!("layer{l}.weight_nbr"),
                        rows: d_in,
                        cols: d_out,
                    });
                }
            }
            shapes.push(TensorShape {
                name: format!("layer{l}.bias"),
                rows: 1,
                cols: d_out,
            });
        }
        Ok(Model { cfg, shapes })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn num_params(&self) -> usize {
        self.shapes.iter().map(TensorShape::len).sum()
    }

    pub fn zeros(&self) -> ParamVector {
        ParamVector::zeros(self.shapes.clone())
    }

    /// Uniform `±init_scale/√fan_in` for every weight and bias.
    pub fn init(&self, seed: u64) -> ParamVector {
        let mut rng = derive(seed, &["model", "init"]).rng();
        let mut values = Vec::with_capacity(self.num_params());
        let dims = self.cfg.layer_dims();
        let per_layer = if self.cfg.arch == Arch::Gcn { 2 } else { 3 };
        for (i, s) in self.shapes.iter().enumerate() {
            let fan_in = dims[i / per_layer].0 as f64;
            let bound = self.cfg.init_scale / fan_in.sqrt();
            values.extend((0..s.len()).map(|_| rng.random_range(-bound..=bound)));
        }
        ParamVector {
            values,
            shapes: self.shapes.clone(),
        }
    }

    fn check(&self, w: &[f64], input: &GnnInput) -> Result<()> {
        if w.len() != self.num_params() {
            return Err(Error::Dimension(format!("{} parameters, model expects {}", w.len(), self.num_params())));
        }
        if input.features.ncols() != self.cfg.in_dim {
            return Err(Error::Dimension(format!(
                "feature dim {} but model expects {}",
                input.features.ncols(),
                self.cfg.in_dim
            )));
        }
        if input.layers.len() != self.cfg.depth {
            return Err(Error::Dimension(format!("{} layer operators for depth {}", input.layers.len(), self.cfg.depth)));
        }
        Ok(())
    }

    fn layers(&self, w: &[f64]) -> Vec<LayerParams> {
        let mut offset = 0;
        let mut take = |rows: usize, cols: usize| {
            let a = Array2::from_shape_vec((rows, cols), w[offset..offset + rows * cols].to_vec()).expect("layout");
            offset += rows * cols;
            a
        };
        self.cfg
            .layer_dims()
            .into_iter()
            .map(|(d_in, d_out)| {
                let w_self = take(d_in, d_out);
                let w_nbr = (self.cfg.arch == Arch::SageMean).then(|| take(d_in, d_out));
                let bias = take(1, d_out).into_shape_with_order(d_out).expect("bias");
                LayerParams { w_self, w_nbr, bias }
            })
            .collect()
    }

    fn forward_cached(&self, w: &[f64], input: &GnnInput) -> Cache {
        let params = self.layers(w);
        let mut h = input.features.clone();
        let mut cache = Cache {
            inputs: Vec::with_capacity(self.cfg.depth),
            aggregated: Vec::with_capacity(self.cfg.depth),
            pre: Vec::with_capacity(self.cfg.depth),
        };
        for (l, (p, op)) in params.iter().zip(&input.layers).enumerate() {
            let agg = op.matmul(&h.view());
            let mut z = match &p.w_nbr {
                None => agg.dot(&p.w_self),
                Some(w_nbr) => h.dot(&p.w_self) + agg.dot(w_nbr),
            };
            z += &p.bias;
            let next = if l + 1 == self.cfg.depth {
                z.clone()
            } else {
                activate(&z, self.cfg.activation)
            };
            cache.inputs.push(h);
            cache.aggregated.push(agg);
            cache.pre.push(z);
            h = next;
        }
        cache
    }

    /// Logits for every node of the input.
    pub fn forward(&self, w: &ParamVector, input: &GnnInput) -> Result<Array2<f64>> {
        self.check(&w.values, input)?;
        Ok(self.forward_cached(&w.values, input).pre.pop().expect("depth >= 1"))
    }

    /// Per-target cross-entropy losses in target order.
    pub fn target_losses(&self, w: &ParamVector, input: &GnnInput) -> Result<Vec<f64>> {
        let logits = self.forward(w, input)?;
        Ok(input
            .targets
            .iter()
            .zip(&input.target_labels)
            .map(|(&v, &y)| {
                let row = logits.row(v);
                log_sum_exp(row.iter().copied()) - row[y]
            })
            .collect())
    }

    pub fn loss(&self, w: &[f64], input: &GnnInput) -> Result<f64> {
        self.check(w, input)?;
        if input.targets.is_empty() {
            return Err(Error::EmptyTargets("loss over an empty target set".into()));
        }
        let cache = self.forward_cached(w, input);
        let logits = cache.pre.last().expect("depth >= 1");
        Ok(mean_cross_entropy(&logits.view(), &input.targets, &input.target_labels).0)
    }

    /// Mean cross-entropy over the targets and its exact gradient.
    pub fn loss_and_grad(&self, w: &[f64], input: &GnnInput) -> Result<LossGrad> {
        self.check(w, input)?;
        if input.targets.is_empty() {
            return Err(Error::EmptyTargets("gradient over an empty target set".into()));
        }
        let params = self.layers(w);
        let cache = self.forward_cached(w, input);
        let depth = self.cfg.depth;
        let (loss, mut dz) = mean_cross_entropy(&cache.pre[depth - 1].view(), &input.targets, &input.target_labels);

        let mut grads: Vec<Vec<Array2<f64>>> = Vec::with_capacity(depth);
        for l in (0..depth).rev() {
            let p = &params[l];
            let op = &input.layers[l];
            let db = dz.sum_axis(Axis(0)).insert_axis(Axis(0));
            let (layer_grads, dh) = match &p.w_nbr {
                None => {
                    let dw = cache.aggregated[l].t().dot(&dz);
                    let dh = if l > 0 { Some(op.t_matmul(&dz.dot(&p.w_self.t()).view())) } else { None };
                    (vec![dw, db], dh)
                }
                Some(w_nbr) => {
                    let dws = cache.inputs[l].t().dot(&dz);
                    let dwn = cache.aggregated[l].t().dot(&dz);
                    let dh = if l > 0 {
                        Some(dz.dot(&p.w_self.t()) + op.t_matmul(&dz.dot(&w_nbr.t()).view()))
                    } else {
                        None
                    };
                    (vec![dws, dwn, db], dh)
                }
            };
            grads.push(layer_grads);
            if let Some(mut dh) = dh {
                if self.cfg.activation == Activation::Relu {
                    dh.zip_mut_with(&cache.pre[l - 1], |g, &z| {
                        if z <= 0.0 {
                            *g = 0.0;
                        }
                    });
                }
                dz = dh;
            }
        }
        let mut grad = Vec::with_capacity(w.len());
        for layer in grads.iter().rev() {
            for t in layer {
                grad.extend(t.iter().copied());
            }
        }
        Ok(LossGrad { loss, grad })
    }

    /// Smallest |pre-activation| over hidden layers; small values mean a ReLU
    /// kink is within finite-difference reach.
    pub fn min_hidden_preactivation(&self, w: &[f64], input: &GnnInput) -> f64 {
        let cache = self.forward_cached(w, input);
        cache.pre[..self.cfg.depth - 1]
            .iter()
            .flat_map(|z| z.iter().map(|x| x.abs()))
            .fold(f64::INFINITY, f64::min)
    }
}

fn activate(z: &Array2<f64>, act: Activation) -> Array2<f64> {
    match act {
        Activation::Identity => z.clone(),
        Activation::Relu => z.mapv(|x| x.max(0.0)),
    }
}

pub(crate) fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Mean CE and its gradient with respect to all logits (zero off-target).
fn mean_cross_entropy(logits: &ArrayView2<f64>, targets: &[usize], labels: &[usize]) -> (f64, Array2<f64>) {
    let scale = 1.0 / targets.len() as f64;
    let mut d = Array2::zeros(logits.dim());
    let mut loss = 0.0;
    for (&v, &y) in targets.iter().zip(labels) {
        let row = logits.row(v);
        let lse = log_sum_exp(row.iter().copied());
        loss += lse - row[y];
        for (c, &z) in row.iter().enumerate() {
            d[[v, c]] += scale * ((z - lse).exp() - if c == y { 1.0 } else { 0.0 });
        }
    }
    (loss * scale, d)
}

/// A differentiable scalar objective over a flat parameter vector.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn loss_grad(&self, w: &[f64]) -> Result<LossGrad>;

    fn grad(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok(self.loss_grad(w)?.grad)
    }
}

/// Mean cross-entropy of a model on one batch.
#[derive(Clone, Copy)]
pub struct BatchObjective<'a> {
    pub model: &'a Model,
    pub input: &'a GnnInput,
}

impl Objective for BatchObjective<'_> {
    fn dim(&self) -> usize {
        self.model.num_params()
    }
    fn loss_grad(&self, w: &[f64]) -> Result<LossGrad> {
        self.model.loss_and_grad(w, self.input)
    }
}

/// Central differences of `f` in every coordinate.
pub fn central_difference(f: impl Fn(&[f64]) -> Result<f64>, w: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut x = w.to_vec();
    (0..w.len())
        .map(|i| {
            x[i] = w[i] + h;
            let plus = f(&x)?;
            x[i] = w[i] - h;
            let minus = f(&x)?;
            x[i] = w[i];
            Ok((plus - minus) / (2.0 * h))
        })
        .collect()
}

pub fn fd_grad(model: &Model, w: &[f64], input: &GnnInput, h: f64) -> Result<Vec<f64>> {
    central_difference(|x| model.loss(x, input), w, h)
}

/// `(∇L(w + h·v) − ∇L(w − h·v)) / (2h)`.
pub fn hvp<O: Objective + ?Sized>(obj: &O, w: &[f64], v: &[f64], h: f64) -> Result<Vec<f64>> {
    if v.iter().all(|&x| x == 0.0) {
        return Ok(vec![0.0; w.len()]);
    }
    let shifted = |sign: f64| -> Vec<f64> { w.iter().zip(v).map(|(a, b)| a + sign * h * b).collect() };
    let gp = obj.grad(&shifted(1.0))?;
    let gm = obj.grad(&shifted(-1.0))?;
    Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

/// `H·v` with the difference step scaled to a unit-length direction.
pub fn hvp_normalized<O: Objective + ?Sized>(obj: &O, w: &[f64], v: &[f64], h: f64) -> Result<Vec<f64>> {
    let norm = norm(v);
    if norm == 0.0 {
        return Ok(vec![0.0; w.len()]);
    }
    hvp(obj, w, v, h / norm)
}

/// Gradient of the sampled modified loss
/// `L̄ + (step/4m) Σ_k ‖∇L̂_k‖²`, i.e. `∇L̄ + (step/2m) Σ_k H_k ∇L̂_k`,
/// where `step` is the learning rate applied to each batch gradient. A
/// single full-graph batch gives the gradient-descent correction
/// `∇L + (step/2) H ∇L`.
pub fn modified_grad<O: Objective>(batches: &[O], w: &[f64], step: f64, h: f64) -> Result<Vec<f64>> {
    if batches.is_empty() {
        return Err(Error::EmptyTargets("modified gradient over zero batches".into()));
    }
    let m = batches.len() as f64;
    let mut out = vec![0.0; w.len()];
    for b in batches {
        let g = b.grad(w)?;
        axpy(&mut out, 1.0 / m, &g);
        if step != 0.0 {
            let hg = hvp_normalized(b, w, &g, h)?;
            axpy(&mut out, step / (2.0 * m), &hg);
        }
    }
    Ok(out)
}

pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate, GenConfig};
    use crate::graph::{build_graph, induced_subgraph};
    use crate::samplers::{neighbor_batch, SamplerConfig, Sampler};
    use ndarray::array;

    fn single_node(x: Vec<f64>) -> Graph {
        build_graph(1, &[], &[x], vec![0], 2, vec![Split::Train]).unwrap()
    }

    fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
        let scale = norm(b).max(1e-12);
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
    }

    #[test]
    fn isolated_node_is_affine() {
        let g = single_node(vec![1.0, -2.0]);
        for arch in [Arch::Gcn, Arch::SageMean] {
            let cfg = ModelConfig::new(arch, 1, 2, 4, 2).with_activation(Activation::Identity);
            let model = Model::new(cfg.clone()).unwrap();
            let w = model.init(3);
            let input = GnnInput::full(&g, &cfg, Split::Train);
            let logits = model.forward(&w, &input).unwrap();
            let t = w.unflatten();
            let expected = array![[1.0, -2.0]].dot(&t[0]) + &t[t.len() - 1];
            for (a, b) in logits.iter().zip(expected.iter()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_weights_give_zero_logits_and_ln2() {
        let g = generate(&GenConfig::sbm(vec![5, 5], 0.5, 0.1, 0).with_split([1.0, 0.0, 0.0])).unwrap();
        let cfg = ModelConfig::new(Arch::Gcn, 2, 8, 4, 2);
        let model = Model::new(cfg.clone()).unwrap();
        let w = model.zeros();
        let input = GnnInput::full(&g, &cfg, Split::Train);
        assert!(model.forward(&w, &input).unwrap().iter().all(|&x| x == 0.0));
        let lg = model.loss_and_grad(&w.values, &input).unwrap();
        assert!((lg.loss - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = generate(&GenConfig::sbm(vec![7, 7, 6], 0.4, 0.05, 2).with_features(5, 0.5)).unwrap();
        for arch in [Arch::Gcn, Arch::SageMean] {
            for act in [Activation::Identity, Activation::Relu] {
                for depth in 1..=3 {
                    let cfg = ModelConfig::new(arch, depth, 5, 4, 3).with_activation(act);
                    let model = Model::new(cfg.clone()).unwrap();
                    let input = GnnInput::full(&g, &cfg, Split::Train);
                    let w = (0..50)
                        .map(|s| model.init(s))
                        .find(|w| model.min_hidden_preactivation(&w.values, &input) > 1e-3)
                        .unwrap();
                    let lg = model.loss_and_grad(&w.values, &input).unwrap();
                    let fd = fd_grad(&model, &w.values, &input, 1e-5).unwrap();
                    let err = max_rel_err(&lg.grad, &fd);
                    assert!(err < 1e-5, "{arch:?} {act:?} depth {depth}: {err}");
                }
            }
        }
    }

    #[test]
    fn layered_batch_gradients() {
        let g = generate(&GenConfig::sbm(vec![10, 10], 0.4, 0.05, 2).with_features(3, 0.5)).unwrap();
        let seeds = g.train_nodes()[..4].to_vec();
        let b = neighbor_batch(&g, &seeds, &[3, 2], &mut crate::rng::SeedPath::new(0).rng());
        for arch in [Arch::Gcn, Arch::SageMean] {
            let cfg = ModelConfig::new(arch, 2, 3, 4, 2).with_activation(Activation::Identity);
            let model = Model::new(cfg.clone()).unwrap();
            let input = GnnInput::from_batch(&b, &cfg).unwrap();
            let w = model.init(1);
            let lg = model.loss_and_grad(&w.values, &input).unwrap();
            let fd = fd_grad(&model, &w.values, &input, 1e-5).unwrap();
            assert!(max_rel_err(&lg.grad, &fd) < 1e-6);
        }
        let deep = ModelConfig::new(Arch::Gcn, 3, 3, 4, 2);
        assert!(GnnInput::from_batch(&b, &deep).is_err());
    }

    #[test]
    fn empty_targets_and_dimension_errors() {
        let g = generate(&GenConfig::sbm(vec![4, 4], 0.5, 0.1, 0)).unwrap();
        let cfg = ModelConfig::new(Arch::Gcn, 1, 8, 4, 2);
        let model = Model::new(cfg.clone()).unwrap();
        let input = GnnInput::full(&g, &cfg, Split::Train).with_targets(vec![], vec![]);
        assert!(matches!(model.loss_and_grad(&model.zeros().values, &input), Err(Error::EmptyTargets(_))));
        let wrong = Model::new(ModelConfig::new(Arch::Gcn, 1, 3, 4, 2)).unwrap();
        assert!(matches!(wrong.loss_and_grad(&wrong.zeros().values, &GnnInput::full(&g, &cfg, Split::Train)), Err(Error::Dimension(_))));
    }

    #[test]
    fn single_rns_part_equals_full_graph() {
        let g = generate(&GenConfig::sbm(vec![8, 8], 0.4, 0.1, 1)).unwrap();
        let cfg = ModelConfig::new(Arch::SageMean, 2, 8, 5, 2);
        let model = Model::new(cfg.clone()).unwrap();
        let w = model.init(0);
        let s = Sampler::new(&g, SamplerConfig::Rns { num_parts: 1 }, 9).unwrap();
        let batch = &s.epoch(&g, 0).unwrap().batches[0];
        let a = model.loss_and_grad(&w.values, &GnnInput::from_batch(batch, &cfg).unwrap()).unwrap();
        let b = model.loss_and_grad(&w.values, &GnnInput::full(&g, &cfg, Split::Train)).unwrap();
        assert!((a.loss - b.loss).abs() < 1e-15);
        assert!(max_rel_err(&a.grad, &b.grad) < 1e-14);
    }

    #[test]
    fn permutation_equivariance() {
        let g = generate(&GenConfig::sbm(vec![6, 6], 0.5, 0.1, 3)).unwrap();
        let cfg = ModelConfig::new(Arch::Gcn, 2, 8, 4, 2);
        let model = Model::new(cfg.clone()).unwrap();
        let w = model.init(5);
        let nodes: Vec<usize> = (0..12).collect();
        let rev: Vec<usize> = nodes.iter().rev().copied().collect();
        let a = induced_subgraph(&g, &nodes).unwrap();
        let b = induced_subgraph(&g, &rev).unwrap();
        let ia = GnnInput::from_batch(&a, &cfg).unwrap();
        let ib = GnnInput::from_batch(&b, &cfg).unwrap();
        let la = model.forward(&w, &ia).unwrap();
        let lb = model.forward(&w, &ib).unwrap();
        for i in 0..12 {
            for c in 0..2 {
                assert!((la[[i, c]] - lb[[11 - i, c]]).abs() < 1e-13);
            }
        }
        let (x, y) = (model.loss(&w.values, &ia).unwrap(), model.loss(&w.values, &ib).unwrap());
        assert!((x - y).abs() < 1e-13);
    }

    struct Quadratic;
    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            3
        }
        fn loss_grad(&self, w: &[f64]) -> Result<LossGrad> {
            Ok(LossGrad {
                loss: 0.5 * dot(w, w),
                grad: w.to_vec(),
            })
        }
    }

    #[test]
    fn finite_difference_oracles_on_closed_forms() {
        let w = [0.3, -1.2, 2.0];
        let g = central_difference(|x| Ok(0.5 * dot(x, x)), &w, 1e-4).unwrap();
        assert!(g.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-9));
        let z = central_difference(|_| Ok(0.0), &w, 1e-4).unwrap();
        assert!(z.iter().all(|&x| x == 0.0));
        let v = [1.0, 2.0, -0.5];
        let hv = hvp(&Quadratic, &w, &v, 1e-3).unwrap();
        assert!(hv.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-9));
        assert_eq!(hvp(&Quadratic, &w, &[0.0; 3], 1e-3).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn checkpoint_round_trip() {
        let model = Model::new(ModelConfig::new(Arch::SageMean, 2, 3, 4, 2)).unwrap();
        let w = model.init(8);
        let back = ParamVector::from_checkpoint(&w.to_checkpoint()).unwrap();
        assert_eq!(back, w);
        assert_eq!(ParamVector::flatten(w.shapes.clone(), &w.unflatten()), w);
        assert!(ParamVector::from_checkpoint("# a 1 2\n1.0\n").is_err());
    }

    #[test]
    fn modified_grad_limits() {
        let g = generate(&GenConfig::sbm(vec![5, 5], 0.5, 0.1, 4).with_split([1.0, 0.0, 0.0])).unwrap();
        let cfg = ModelConfig::new(Arch::Gcn, 1, 8, 4, 2).with_activation(Activation::Identity);
        let model = Model::new(cfg.clone()).unwrap();
        let w = model.init(2).values;
        let input = GnnInput::full(&g, &cfg, Split::Train);
        let obj = BatchObjective { model: &model, input: &input };
        let plain = model.loss_and_grad(&w, &input).unwrap().grad;
        assert_eq!(modified_grad(&[obj], &w, 0.0, 1e-4).unwrap(), plain);
        let one = modified_grad(&[obj], &w, 0.1, 1e-4).unwrap();
        let two = modified_grad(&[obj, obj], &w, 0.1, 1e-4).unwrap();
        assert!(max_rel_err(&one, &two) < 1e-12);
        let hg = hvp_normalized(&obj, &w, &plain, 1e-4).unwrap();
        let mut eq7 = plain.clone();
        axpy(&mut eq7, 0.05, &hg);
        assert!(max_rel_err(&one, &eq7) < 1e-14);
    }
}
