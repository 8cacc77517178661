//! Numerical checks of the theoretical claims behind Random Node Sampling.
//!
//! Each check returns [`VerificationResult`]s that end up as rows of a
//! manifest. Checks come in three flavors:
//!
//! * exact identities (hypergeometric kernel mass, order-statistic moments),
//! * order-of-convergence measurements (gradient descent and chained SGD
//!   against the flow of their modified objectives),
//! * Monte Carlo statistics with explicit standard errors (RNS bias, pair
//!   probabilities, degree-tail exponents, the α-error versus `R` sweep).

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::gen::{generate, GenConfig};
use crate::gnn::{axpy, fd_grad, modified_grad, norm, Activation, Arch, GnnInput, Model, ModelConfig, Objective, ParamVector};
use crate::graph::{Batch, Graph, Split};
use crate::metrics::{full_loss_on_batch, full_node_losses, sigma_estimate, BatchGradients};
use crate::powerlaw::{clauset_alpha, degree_quantile, TailFit};
use crate::rng::derive;
use crate::samplers::{rns_blocks, rns_epoch, Sampler, SamplerConfig, SamplerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tolerance {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Passed,
    Failed,
    /// Measured and reported without a gate.
    Info,
    /// Not enough data to decide; never counted as a failure.
    Inconclusive,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Passed => "true",
            Status::Failed => "false",
            Status::Info => "info",
            Status::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationResult {
    pub check_name: String,
    pub measured: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub mode: Tolerance,
    pub status: Status,
    pub provenance: String,
}

impl VerificationResult {
    pub fn gate(
        name: impl Into<String>,
        measured: f64,
        reference: f64,
        tolerance: f64,
        mode: Tolerance,
        provenance: &str,
    ) -> Self {
        let allowed = match mode {
            Tolerance::Absolute => tolerance,
            Tolerance::Relative => tolerance * reference.abs(),
        };
        let ok = (measured - reference).abs() <= allowed;
        VerificationResult {
            check_name: name.into(),
            measured,
            reference,
            tolerance,
            mode,
            status: if ok { Status::Passed } else { Status::Failed },
            provenance: provenance.to_string(),
        }
    }

    pub fn info(name: impl Into<String>, measured: f64, reference: f64, provenance: &str) -> Self {
        VerificationResult {
            check_name: name.into(),
            measured,
            reference,
            tolerance: f64::NAN,
            mode: Tolerance::Absolute,
            status: Status::Info,
            provenance: provenance.to_string(),
        }
    }

    pub fn inconclusive(name: impl Into<String>, measured: f64, reference: f64, tolerance: f64, provenance: &str) -> Self {
        VerificationResult {
            check_name: name.into(),
            measured,
            reference,
            tolerance,
            mode: Tolerance::Absolute,
            status: Status::Inconclusive,
            provenance: provenance.to_string(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Passed
    }

    pub fn info_only(&self) -> bool {
        self.status == Status::Info
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Failed
    }

    /// Re-evaluates the gate under a different tolerance.
    pub fn with_tolerance(&self, tolerance: f64) -> Self {
        match self.status {
            Status::Passed | Status::Failed => Self::gate(
                self.check_name.clone(),
                self.measured,
                self.reference,
                tolerance,
                self.mode,
                &self.provenance,
            ),
            _ => self.clone(),
        }
    }

    pub fn csv_row(&self) -> String {
        let tol = match self.mode {
            _ if self.tolerance.is_nan() => String::new(),
            Tolerance::Absolute => self.tolerance.to_string(),
            Tolerance::Relative => format!("{}rel", self.tolerance),
        };
        format!(
            "{},{},{},{},{},{}",
            self.check_name,
            self.measured,
            self.reference,
            tol,
            self.status,
            if self.provenance.contains(',') {
                format!("\"{}\"", self.provenance.replace('"', "\"\""))
            } else {
                self.provenance.clone()
            }
        )
    }
}

pub const MANIFEST_HEADER: &str = "check_name,measured,reference,tolerance,passed,provenance";

pub fn manifest_csv(results: &[VerificationResult]) -> String {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for r in results {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

const PROV_FLOW_FULL: &str = "gradient descent follows the modified full-graph flow to third order";
const PROV_FLOW_PLAIN: &str = "negative control: plain gradient flow matches only to second order";
const PROV_FLOW_SGD: &str = "order-averaged chained SGD follows the sampled modified flow to third order";
const PROV_FLOW_MONO: &str = "flow gap shrinks with the step size";
const PROV_FLOW_ODE: &str = "RK4 error from substep doubling is negligible against the gap";
const PROV_FLOW_SPREAD: &str = "spread of single-ordering endpoints around the order average";
const PROV_KERNEL: &str = "hypergeometric kernel sums to N over the block size (Vandermonde)";
const PROV_ORDER: &str = "kernel is the law of an order statistic of a uniform block";
const PROV_TAIL: &str = "RNS batches keep the degree-tail exponent";
const PROV_TAIL_PREFACTOR: &str = "RNS batches have lighter tail mass at matched degree";
const PROV_UNBIASED: &str = "full-graph node losses averaged over an RNS batch are unbiased";
const PROV_BIAS_BOUND: &str = "RNS batch-loss bias is at most sqrt(2) times the edge-removal sensitivity";
const PROV_PAIR: &str = "two nodes land in a given RNS batch with probability r(r-1)/(N(N-1))";
const PROV_MARGINAL: &str = "a node lands in a given RNS batch with probability r/N";

// ---------------------------------------------------------------------------
// Modified-flow order checks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct FlowCheckConfig {
    /// Step sizes, strictly decreasing; each is compared with its half.
    pub eps_list: Vec<f64>,
    pub ode_substeps: usize,
    /// Average the discrete endpoint over every batch ordering.
    pub permutation_averaging: bool,
    /// Finite-difference step of the Hessian-vector products.
    pub hvp_step: f64,
}

impl Default for FlowCheckConfig {
    fn default() -> Self {
        FlowCheckConfig {
            eps_list: vec![0.04, 0.02, 0.01],
            ode_substeps: 1000,
            permutation_averaging: true,
            hvp_step: 1e-4,
        }
    }
}

impl FlowCheckConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_list.is_empty() || self.eps_list.iter().any(|&e| e.is_nan() || e <= 0.0) {
            return Err(Error::config("flow check needs positive step sizes"));
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("flow check step sizes must be strictly decreasing"));
        }
        if self.ode_substeps < 100 {
            return Err(Error::config("flow check needs at least 100 ODE substeps"));
        }
        Ok(())
    }

    fn ladder(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.eps_list.iter().flat_map(|&e| [e, e / 2.0]).collect();
        all.sort_by(|a, b| b.total_cmp(a));
        all.dedup();
        all
    }
}

/// Classical RK4 for `ẇ = f(w)` over `[0, t]` in `n` equal steps.
pub fn rk4(w0: &[f64], t: f64, n: usize, f: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
    let h = t / n as f64;
    let mut w = w0.to_vec();
    let mut tmp = vec![0.0; w.len()];
    for _ in 0..n {
        let k1 = f(&w)?;
        tmp.iter_mut().zip(&w).zip(&k1).for_each(|((t, x), k)| *t = x + 0.5 * h * k);
        let k2 = f(&tmp)?;
        tmp.iter_mut().zip(&w).zip(&k2).for_each(|((t, x), k)| *t = x + 0.5 * h * k);
        let k3 = f(&tmp)?;
        tmp.iter_mut().zip(&w).zip(&k3).for_each(|((t, x), k)| *t = x + h * k);
        let k4 = f(&tmp)?;
        for i in 0..w.len() {
            w[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("ODE integration blew up".into()));
        }
    }
    Ok(w)
}

/// `m` chained SGD steps of size `alpha`, visiting batches in `order`.
pub fn sgd_endpoint<O: Objective>(batches: &[O], w0: &[f64], alpha: f64, order: &[usize]) -> Result<Vec<f64>> {
    let mut w = w0.to_vec();
    for &k in order {
        let g = batches[k].grad(&w)?;
        axpy(&mut w, -alpha, &g);
    }
    Ok(w)
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, left: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..left.len() {
            let x = left.remove(i);
            prefix.push(x);
            rec(prefix, left, out);
            prefix.pop();
            left.insert(i, x);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..n).collect(), &mut out);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowPoint {
    pub eps: f64,
    pub gap: f64,
    /// Mean distance of single-ordering endpoints from the averaged endpoint.
    pub order_spread: f64,
}

/// Distance between the (order-averaged) discrete endpoint after one epoch
/// of total step `eps` and the flow of the modified gradient over time `eps`.
/// With `corrected = false` the flow is the plain mean-gradient flow.
pub fn flow_gap<O: Objective>(
    batches: &[O],
    w0: &[f64],
    eps: f64,
    cfg: &FlowCheckConfig,
    corrected: bool,
    substeps: usize,
) -> Result<(FlowPoint, Vec<f64>)> {
    let m = batches.len();
    if m == 0 {
        return Err(Error::EmptyTargets("flow check over zero batches".into()));
    }
    let alpha = eps / m as f64;
    let orders = if cfg.permutation_averaging {
        permutations(m)
    } else {
        vec![(0..m).collect()]
    };
    let ends = orders
        .iter()
        .map(|o| sgd_endpoint(batches, w0, alpha, o))
        .collect::<Result<Vec<_>>>()?;
    let mut mean = vec![0.0; w0.len()];
    for e in &ends {
        axpy(&mut mean, 1.0 / ends.len() as f64, e);
    }
    let spread = ends
        .iter()
        .map(|e| norm(&e.iter().zip(&mean).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .sum::<f64>()
        / ends.len() as f64;
    let step = if corrected { alpha } else { 0.0 };
    let flow = rk4(w0, eps, substeps, |w| {
        let mut g = modified_grad(batches, w, step, cfg.hvp_step)?;
        g.iter_mut().for_each(|x| *x = -*x);
        Ok(g)
    })?;
    let diff: Vec<f64> = mean.iter().zip(&flow).map(|(a, b)| a - b).collect();
    Ok((
        FlowPoint {
            eps,
            gap: norm(&diff),
            order_spread: spread,
        },
        flow,
    ))
}

fn fmt_eps(e: f64) -> String {
    format!("{e}")
}

/// Gap ratios `gap(ε)/gap(ε/2)` for every configured ε, gated at
/// `reference ± tolerance`, plus monotonicity and integrator-accuracy checks.
fn flow_order_checks<O: Objective + Sync>(
    prefix: &str,
    batches: &[O],
    w0: &[f64],
    cfg: &FlowCheckConfig,
    corrected: bool,
    (reference, tolerance): (f64, f64),
    provenance: &str,
) -> Result<(Vec<VerificationResult>, Vec<FlowPoint>)> {
    cfg.validate()?;
    let ladder = cfg.ladder();
    let points = ladder
        .par_iter()
        .map(|&e| flow_gap(batches, w0, e, cfg, corrected, cfg.ode_substeps).map(|p| p.0))
        .collect::<Result<Vec<_>>>()?;
    let gap_at = |e: f64| points.iter().find(|p| p.eps == e).expect("ladder point").gap;
    let mut out = Vec::new();
    for &e in &cfg.eps_list {
        let ratio = gap_at(e) / gap_at(e / 2.0);
        out.push(VerificationResult::gate(
            format!("{prefix}_ratio_eps={}", fmt_eps(e)),
            ratio,
            reference,
            tolerance,
            Tolerance::Absolute,
            provenance,
        ));
    }
    let monotone = points.windows(2).filter(|w| w[1].gap < w[0].gap).count();
    out.push(VerificationResult::gate(
        format!("{prefix}_monotone"),
        monotone as f64,
        (points.len() - 1) as f64,
        0.0,
        Tolerance::Absolute,
        PROV_FLOW_MONO,
    ));
    let smallest = *ladder.last().expect("non-empty ladder");
    let (coarse, a) = flow_gap(batches, w0, smallest, cfg, corrected, cfg.ode_substeps)?;
    let (_, b) = flow_gap(batches, w0, smallest, cfg, corrected, 2 * cfg.ode_substeps)?;
    let ode_err = norm(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>());
    out.push(VerificationResult::gate(
        format!("{prefix}_ode_error_eps={}", fmt_eps(smallest)),
        ode_err / coarse.gap,
        0.0,
        1e-3,
        Tolerance::Absolute,
        PROV_FLOW_ODE,
    ));
    Ok((out, points))
}

/// Gradient descent against the flow of `L + (ε/4)‖∇L‖²`, gated at a gap
/// ratio of 8 ± 2 per halving.
pub fn flow_check_full<O: Objective + Sync>(
    obj: &O,
    w0: &[f64],
    cfg: &FlowCheckConfig,
) -> Result<(Vec<VerificationResult>, Vec<FlowPoint>)> {
    flow_order_checks("flow_full", std::slice::from_ref(obj), w0, cfg, true, (8.0, 2.0), PROV_FLOW_FULL)
}

/// Negative control: gradient descent against the plain gradient flow, gated
/// at a ratio of 4 ± 0.6.
pub fn flow_check_plain<O: Objective + Sync>(
    obj: &O,
    w0: &[f64],
    cfg: &FlowCheckConfig,
) -> Result<(Vec<VerificationResult>, Vec<FlowPoint>)> {
    flow_order_checks("flow_plain", std::slice::from_ref(obj), w0, cfg, false, (4.0, 0.6), PROV_FLOW_PLAIN)
}

/// Chained SGD over `m ≤ 4` fixed batches, averaged over all `m!` orderings,
/// against the flow of the sampled modified loss.
pub fn flow_check_sgd<O: Objective + Sync>(
    batches: &[O],
    w0: &[f64],
    cfg: &FlowCheckConfig,
) -> Result<(Vec<VerificationResult>, Vec<FlowPoint>)> {
    let m = batches.len();
    if m == 0 || m > 4 {
        return Err(Error::config(format!("flow_check_sgd enumerates orderings and needs 1 <= m <= 4, got {m}")));
    }
    let prefix = format!("flow_sgd_m{m}");
    let (mut out, points) = flow_order_checks(&prefix, batches, w0, cfg, true, (8.0, 2.0), PROV_FLOW_SGD)?;
    for p in &points {
        out.push(VerificationResult::info(
            format!("{prefix}_order_spread_over_gap_eps={}", fmt_eps(p.eps)),
            p.order_spread / p.gap,
            0.0,
            PROV_FLOW_SPREAD,
        ));
    }
    Ok((out, points))
}

// ---------------------------------------------------------------------------
// Gradient correctness
// ---------------------------------------------------------------------------

const PROV_GRAD: &str = "backpropagated gradients agree with central finite differences";

/// `‖a − b‖_∞ / max(‖b‖_∞, 1e-8)`.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-8);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Analytic against finite-difference gradients over `draws` random SBM
/// graphs of at most 30 nodes. Parameter draws within FD reach of a ReLU
/// kink are redrawn.
pub fn gradient_check(arch: Arch, depth: usize, activation: Activation, draws: usize, seed: u64) -> Result<VerificationResult> {
    let tag = format!("{arch:?}_depth{depth}_{activation:?}").to_lowercase();
    let root = derive(seed, &["grad_check", &tag]);
    let errors = (0..draws)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let path = root.child(i as u64);
            let mut rng = path.rng();
            let blocks: Vec<usize> = (0..3).map(|_| rng.random_range(3..=10)).collect();
            let gcfg = GenConfig::sbm(blocks, 0.4, 0.08, path.value()).with_features(5, 0.7).with_split([0.6, 0.2, 0.2]);
            let g = generate(&gcfg)?;
            let cfg = ModelConfig::new(arch, depth, 5, 4, 3).with_activation(activation);
            let model = Model::new(cfg.clone())?;
            let input = GnnInput::full(&g, &cfg, Split::Train);
            let w = (0..200u64)
                .map(|k| model.init(path.child(k).value()))
                .find(|w| model.min_hidden_preactivation(&w.values, &input) > 1e-4)
                .ok_or_else(|| Error::Numerical("no kink-free parameter draw".into()))?;
            let analytic = model.loss_and_grad(&w.values, &input)?.grad;
            let fd = fd_grad(&model, &w.values, &input, 1e-6)?;
            Ok(max_relative_error(&analytic, &fd))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VerificationResult::gate(
        format!("grad_check_{tag}"),
        errors.iter().fold(0.0, |m: f64, &e| m.max(e)),
        0.0,
        1e-5,
        Tolerance::Absolute,
        PROV_GRAD,
    ))
}

// ---------------------------------------------------------------------------
// Hypergeometric kernel and order statistics
// ---------------------------------------------------------------------------

pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Probability that a node of degree `d` keeps exactly `k` neighbors inside
/// its block of `r` nodes out of `N`.
pub fn kernel(n: u64, r: u64, d: u64, k: u64) -> f64 {
    if d > n - 1 || k > d || k + 1 > r || r - 1 - k > n - 1 - d {
        return 0.0;
    }
    (ln_choose(d, k) + ln_choose(n - 1 - d, r - 1 - k) - ln_choose(n - 1, r - 1)).exp()
}

fn block_size(n: u64, m: u64, k: u64) -> Result<u64> {
    if m == 0 || m > n {
        return Err(Error::config(format!("need 1 <= m <= N, got m = {m}, N = {n}")));
    }
    let r = n / m;
    if k + 1 > r {
        return Err(Error::config(format!("k = {k} must be below the block size {r}")));
    }
    Ok(r)
}

/// `Σ_d H_{N,d}(k)` with blocks of `r = ⌊N/m⌋` nodes.
pub fn kernel_mass(n: u64, m: u64, k: u64) -> Result<f64> {
    let r = block_size(n, m, k)?;
    Ok((k..n).map(|d| kernel(n, r, d, k)).sum())
}

/// Mean of `d` under the normalized kernel, as an order statistic.
pub fn order_stat_mean(n: u64, r: u64, k: u64) -> f64 {
    (k + 1) as f64 * (n + 1) as f64 / (r + 1) as f64 - 1.0
}

pub fn order_stat_var(n: u64, r: u64, k: u64) -> f64 {
    let (n, r, k) = (n as f64, r as f64, k as f64);
    (k + 1.0) * (r - k) * (n + 1.0) * (n - r) / ((r + 1.0).powi(2) * (r + 2.0))
}

/// Kernel mass against `N/r` (which is `m` when `m` divides `N`).
pub fn kernel_mass_check(n: u64, m: u64, k: u64) -> Result<VerificationResult> {
    let r = block_size(n, m, k)?;
    Ok(VerificationResult::gate(
        format!("kernel_mass_N={n}_m={m}_k={k}"),
        kernel_mass(n, m, k)?,
        n as f64 / r as f64,
        1e-9,
        Tolerance::Relative,
        PROV_KERNEL,
    ))
}

/// Closed-form mean and variance against direct summation (relative 1e-9)
/// and a Monte Carlo mean over random blocks (3σ).
pub fn order_stat_moment_check(n: u64, m: u64, k: u64, mc_trials: usize, seed: u64) -> Result<Vec<VerificationResult>> {
    let r = block_size(n, m, k)?;
    let weights: Vec<f64> = (0..n).map(|d| kernel(n, r, d, k)).collect();
    let mass: f64 = weights.iter().sum();
    let mean: f64 = weights.iter().enumerate().map(|(d, w)| d as f64 * w).sum::<f64>() / mass;
    let var: f64 = weights
        .iter()
        .enumerate()
        .map(|(d, w)| (d as f64 - mean).powi(2) * w)
        .sum::<f64>()
        / mass;
    let tag = format!("N={n}_m={m}_k={k}");
    let closed_mean = order_stat_mean(n, r, k);
    let closed_var = order_stat_var(n, r, k);
    let mut out = vec![
        VerificationResult::gate(format!("order_stat_mean_{tag}"), mean, closed_mean, 1e-9, Tolerance::Relative, PROV_ORDER),
    ];
    out.push(if closed_var == 0.0 {
        VerificationResult::gate(format!("order_stat_var_{tag}"), var, 0.0, 1e-9, Tolerance::Absolute, PROV_ORDER)
    } else {
        VerificationResult::gate(format!("order_stat_var_{tag}"), var, closed_var, 1e-9, Tolerance::Relative, PROV_ORDER)
    });
    if mc_trials > 0 {
        let mut rng = derive(seed, &["order_stat", &tag]).rng();
        let sum: f64 = (0..mc_trials)
            .map(|_| {
                let mut s = sample(&mut rng, n as usize, r as usize).into_vec();
                s.sort_unstable();
                // 0-based positions are already `value - 1` of a {1..N} draw.
                s[k as usize] as f64
            })
            .sum();
        let sigma = (closed_var / mc_trials as f64).sqrt();
        out.push(VerificationResult::gate(
            format!("order_stat_mc_mean_{tag}"),
            sum / mc_trials as f64,
            closed_mean,
            3.0 * sigma + 1e-12,
            Tolerance::Absolute,
            PROV_ORDER,
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Degree tails
// ---------------------------------------------------------------------------

/// Fitted exponents of a set of batches: the mean over batches whose tail is
/// long enough, or a pooled fit when no single batch qualifies.
pub fn batch_tail_alpha<'a>(batches: impl IntoIterator<Item = &'a Batch>, d_min: usize) -> Option<f64> {
    let mut fits = Vec::new();
    let mut pooled = Vec::new();
    for b in batches {
        let d = b.structure().degrees();
        if let Some(a) = clauset_alpha(&d, d_min).alpha() {
            fits.push(a);
        }
        pooled.extend(d);
    }
    if fits.is_empty() {
        clauset_alpha(&pooled, d_min).alpha()
    } else {
        Some(fits.iter().sum::<f64>() / fits.len() as f64)
    }
}

/// d_min for every tail fit against `g`: the 90th degree percentile.
pub fn tail_d_min(g: &Graph) -> usize {
    degree_quantile(&g.csr().degrees(), 0.9)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailSummary {
    pub m: usize,
    pub alpha_full: Option<f64>,
    pub alpha_rns_mean: Option<f64>,
    pub per_seed: Vec<Option<f64>>,
}

/// Full-graph tail exponent against the mean RNS-batch exponent per `m`,
/// with a directional check that batch tail mass at `d ≥ d_min` is lighter.
pub fn degree_tail_check(g: &Graph, m_list: &[usize], seeds: &[u64], tolerance: f64) -> Result<(Vec<VerificationResult>, Vec<TailSummary>)> {
    let degrees = g.csr().degrees();
    let d_min = tail_d_min(g);
    let full_fit = clauset_alpha(&degrees, d_min);
    let full_tail = degrees.iter().filter(|&&d| d >= d_min).count() as f64 / degrees.len() as f64;
    let mut out = Vec::new();
    let mut summaries = Vec::new();
    for &m in m_list {
        let per_seed = seeds
            .par_iter()
            .map(|&s| -> Result<(Option<f64>, usize, usize)> {
                let blocks = rns_blocks(g.num_nodes(), m, &mut derive(s, &["tail", &m.to_string()]).rng())?;
                let batches = blocks
                    .iter()
                    .map(|b| crate::graph::induced_subgraph(g, b))
                    .collect::<Result<Vec<_>>>()?;
                let (tail, total) = batches.iter().fold((0, 0), |(t, n), b| {
                    let d = b.structure().degrees();
                    (t + d.iter().filter(|&&x| x >= d_min).count(), n + d.len())
                });
                Ok((batch_tail_alpha(&batches, d_min), tail, total))
            })
            .collect::<Result<Vec<_>>>()?;
        let fits: Vec<f64> = per_seed.iter().filter_map(|p| p.0).collect();
        let rns_mean = (!fits.is_empty()).then(|| fits.iter().sum::<f64>() / fits.len() as f64);
        let name = format!("degree_tail_alpha_m={m}");
        out.push(match (full_fit, rns_mean) {
            (TailFit::Fitted { alpha, .. }, Some(mean)) => {
                VerificationResult::gate(name, mean, alpha, tolerance, Tolerance::Absolute, PROV_TAIL)
            }
            _ => VerificationResult::inconclusive(
                name,
                rns_mean.unwrap_or(f64::NAN),
                full_fit.alpha().unwrap_or(f64::NAN),
                tolerance,
                PROV_TAIL,
            ),
        });
        if m > 1 {
            let (tail, total) = per_seed.iter().fold((0, 0), |(t, n), p| (t + p.1, n + p.2));
            let batch_tail = tail as f64 / total.max(1) as f64;
            out.push(VerificationResult::gate(
                format!("degree_tail_mass_lighter_m={m}"),
                (batch_tail < full_tail) as u8 as f64,
                1.0,
                0.0,
                Tolerance::Absolute,
                PROV_TAIL_PREFACTOR,
            ));
        }
        summaries.push(TailSummary {
            m,
            alpha_full: full_fit.alpha(),
            alpha_rns_mean: rns_mean,
            per_seed: per_seed.iter().map(|p| p.0).collect(),
        });
    }
    Ok((out, summaries))
}

// ---------------------------------------------------------------------------
// RNS bias and combinatorics
// ---------------------------------------------------------------------------

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo over `trials` RNS partitions at fixed `w`:
/// the batch-averaged full-graph loss is unbiased for `L_full`, and the
/// batch-loss bias respects `√2·σ̂ + 3σ_MC`.
pub fn rns_bias_checks(g: &Graph, model: &Model, w: &ParamVector, m: usize, trials: usize, seed: u64) -> Result<Vec<VerificationResult>> {
    if trials < 100 {
        return Err(Error::config("rns_bias_checks needs at least 100 trials"));
    }
    let node_losses = full_node_losses(model, w, g)?;
    let l_full = model.loss(&w.values, &GnnInput::full(g, model.config(), Split::Train))?;
    let root = derive(seed, &["rns_bias", &m.to_string()]);
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Option<(f64, f64, Vec<Batch>)>> {
            let batches: Vec<Batch> = rns_epoch(g, m, &mut root.child(t as u64).rng())?
                .into_iter()
                .filter(|b| !b.train_targets.is_empty())
                .collect();
            if batches.is_empty() {
                return Ok(None);
            }
            let k = batches.len() as f64;
            let tilde = batches.iter().filter_map(|b| full_loss_on_batch(&node_losses, b)).sum::<f64>() / k;
            let hat = BatchGradients::compute(model, &w.values, &batches)?.mean_loss();
            Ok(Some((tilde, hat, batches)))
        })
        .collect::<Result<Vec<_>>>()?;
    let usable: Vec<(f64, f64, Vec<Batch>)> = per_trial.into_iter().flatten().collect();
    let tilde: Vec<f64> = usable.iter().map(|u| u.0).collect();
    let hat: Vec<f64> = usable.iter().map(|u| u.1).collect();
    let all_batches: Vec<Batch> = usable.into_iter().flat_map(|u| u.2).collect();
    let sigma = sigma_estimate(model, w, g, &all_batches)?;
    let (t_mean, t_se) = mean_and_se(&tilde);
    let (h_mean, h_se) = mean_and_se(&hat);
    Ok(vec![
        VerificationResult::gate(
            format!("rns_unbiased_full_loss_m={m}"),
            t_mean,
            l_full,
            3.0 * t_se + 1e-12,
            Tolerance::Absolute,
            PROV_UNBIASED,
        ),
        VerificationResult::gate(
            format!("rns_bias_bound_m={m}"),
            (h_mean - l_full).abs(),
            0.0,
            2f64.sqrt() * sigma + 3.0 * h_se + 1e-12,
            Tolerance::Absolute,
            PROV_BIAS_BOUND,
        ),
    ])
}

/// Exact count over all ordered RNS partitions of `n` nodes into `m` blocks
/// of `⌊n/m⌋`: how many put nodes 0 and 1 both in block 0, and the total.
pub fn exhaustive_pair_count(n: usize, m: usize) -> (u128, u128) {
    let r = n / m;
    // Capacities for blocks 0..m and the leftover bin.
    let mut caps = vec![r; m];
    caps.push(n - r * m);
    fn rec(node: usize, n: usize, caps: &mut [usize], both: bool, acc: &mut (u128, u128)) {
        if node == n {
            acc.1 += 1;
            if both {
                acc.0 += 1;
            }
            return;
        }
        for b in 0..caps.len() {
            if caps[b] == 0 {
                continue;
            }
            caps[b] -= 1;
            let next = match node {
                0 => b == 0,
                1 => both && b == 0,
                _ => both,
            };
            rec(node + 1, n, caps, next, acc);
            caps[b] += 1;
        }
    }
    let mut acc = (0, 0);
    rec(0, n, &mut caps, false, &mut acc);
    acc
}

/// Pair-in-batch and node-in-batch probabilities for RNS. Exhaustive for
/// `n ≤ 12`, otherwise Monte Carlo over `trials` partitions (3σ).
pub fn rns_pair_checks(n: usize, m: usize, trials: usize, seed: u64) -> Result<Vec<VerificationResult>> {
    if n < 2 || m == 0 || m > n {
        return Err(Error::config(format!("need N >= 2 and 1 <= m <= N, got N = {n}, m = {m}")));
    }
    let r = n / m;
    let pair_ref = (r * (r.saturating_sub(1))) as f64 / (n * (n - 1)) as f64;
    let marginal_ref = r as f64 / n as f64;
    let tag = format!("N={n}_m={m}");
    if n <= 12 {
        let (hit, total) = exhaustive_pair_count(n, m);
        return Ok(vec![VerificationResult::gate(
            format!("rns_pair_exhaustive_{tag}"),
            hit as f64 / total as f64,
            pair_ref,
            1e-12,
            Tolerance::Absolute,
            PROV_PAIR,
        )]);
    }
    let root = derive(seed, &["rns_pair", &tag]);
    let (pair_hits, node_hits) = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(usize, usize)> {
            let blocks = rns_blocks(n, m, &mut root.child(t as u64).rng())?;
            let first = &blocks[0];
            let has = |v: usize| first.binary_search(&v).is_ok();
            Ok(((has(0) && has(1)) as usize, has(0) as usize))
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let t = trials as f64;
    let se = |p: f64| (p * (1.0 - p) / t).sqrt();
    Ok(vec![
        VerificationResult::gate(
            format!("rns_pair_mc_{tag}"),
            pair_hits as f64 / t,
            pair_ref,
            3.0 * se(pair_ref) + 1e-12,
            Tolerance::Absolute,
            PROV_PAIR,
        ),
        VerificationResult::gate(
            format!("rns_marginal_mc_{tag}"),
            node_hits as f64 / t,
            marginal_ref,
            3.0 * se(marginal_ref) + 1e-12,
            Tolerance::Absolute,
            PROV_MARGINAL,
        ),
    ])
}

/// Mean induced-edge count per RNS batch over `plans` epoch plans, against
/// `|E|·r(r−1)/(N(N−1))`.
pub fn rns_edge_count_check(g: &Graph, m: usize, plans: usize, seed: u64) -> Result<VerificationResult> {
    let n = g.num_nodes();
    let r = n / m;
    let expected = g.num_edges() as f64 * (r * r.saturating_sub(1)) as f64 / (n * (n - 1)) as f64;
    let root = derive(seed, &["edge_count", &m.to_string()]);
    let counts: Vec<f64> = (0..plans)
        .into_par_iter()
        .map(|p| -> Result<Vec<f64>> {
            let blocks = rns_blocks(n, m, &mut root.child(p as u64).rng())?;
            Ok(blocks.iter().map(|b| induced_edge_count(g, b) as f64).collect())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
        .collect();
    let (mean, se) = mean_and_se(&counts);
    Ok(VerificationResult::gate(
        format!("rns_edge_count_m={m}"),
        mean,
        expected,
        3.0 * se + 1e-9,
        Tolerance::Absolute,
        PROV_PAIR,
    ))
}

/// Number of edges of `g` with both endpoints in the sorted node list.
pub fn induced_edge_count(g: &Graph, sorted_nodes: &[usize]) -> usize {
    let mut inside = vec![false; g.num_nodes()];
    for &v in sorted_nodes {
        inside[v] = true;
    }
    sorted_nodes
        .iter()
        .map(|&v| g.neighbors(v).iter().filter(|&&u| u > v && inside[u]).count())
        .sum()
}

// ---------------------------------------------------------------------------
// α-error versus R
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sampler: SamplerKind,
    pub seed: u64,
    pub alpha_err: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerMeans {
    pub sampler: SamplerKind,
    pub mean_alpha_err: f64,
    pub mean_r: f64,
    /// Fraction of seeds where RNS has lower `R` than this sampler.
    pub rns_lower_r_frac: f64,
    /// Fraction of seeds where RNS has lower α-error than this sampler.
    pub rns_lower_alpha_frac: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub per_sampler: Vec<SamplerMeans>,
    /// RNS wins both coordinates against every other sampler in a majority of seeds.
    pub rns_bottom_left: bool,
}

pub const SWEEP_CSV_HEADER: &str = "sampler,seed,alpha_err,R";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.sampler, r.seed, r.alpha_err, r.r));
    }
    out
}

/// One row per (sampler, seed) at the random initialization of that seed:
/// |α̂_batches − α̂_full| and `R` over `batches_per_seed` batches.
pub fn alpha_vs_r_sweep(
    g: &Graph,
    model: &Model,
    samplers: &[SamplerConfig],
    seeds: &[u64],
    batches_per_seed: usize,
) -> Result<(Vec<SweepRow>, SweepSummary)> {
    let d_min = tail_d_min(g);
    let alpha_full = clauset_alpha(&g.csr().degrees(), d_min).alpha().unwrap_or(f64::NAN);
    let rows: Vec<Vec<SweepRow>> = seeds
        .par_iter()
        .map(|&seed| {
            let w = model.init(seed);
            samplers
                .iter()
                .map(|cfg| {
                    let batches = Sampler::new(g, cfg.clone(), seed)?.take_batches(g, batches_per_seed)?;
                    let r = BatchGradients::compute(model, &w.values, &batches)?.gradient_variance();
                    let alpha = batch_tail_alpha(&batches, d_min).unwrap_or(f64::NAN);
                    Ok(SweepRow {
                        sampler: cfg.kind(),
                        seed,
                        alpha_err: (alpha - alpha_full).abs(),
                        r,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize_sweep(&rows, samplers.len());
    Ok((rows.into_iter().flatten().collect(), summary))
}

fn summarize_sweep(by_seed: &[Vec<SweepRow>], n_samplers: usize) -> SweepSummary {
    let rns_idx = by_seed.first().and_then(|rows| rows.iter().position(|r| r.sampler == SamplerKind::Rns));
    let seeds = by_seed.len().max(1) as f64;
    let per_sampler: Vec<SamplerMeans> = (0..n_samplers)
        .map(|i| {
            let col = |f: fn(&SweepRow) -> f64| by_seed.iter().map(|rows| f(&rows[i])).sum::<f64>() / seeds;
            let frac = |f: fn(&SweepRow) -> f64| match rns_idx {
                Some(j) => by_seed.iter().filter(|rows| f(&rows[j]) < f(&rows[i])).count() as f64 / seeds,
                None => 0.0,
            };
            SamplerMeans {
                sampler: by_seed.first().map_or(SamplerKind::Rns, |rows| rows[i].sampler),
                mean_alpha_err: col(|r| r.alpha_err),
                mean_r: col(|r| r.r),
                rns_lower_r_frac: frac(|r| r.r),
                rns_lower_alpha_frac: frac(|r| r.alpha_err),
            }
        })
        .collect();
    let rns_bottom_left = match rns_idx {
        None => false,
        Some(j) => per_sampler
            .iter()
            .enumerate()
            .filter(|(i, s)| *i != j && s.sampler != SamplerKind::Rns)
            .all(|(_, s)| s.rns_lower_r_frac > 0.5 && s.rns_lower_alpha_frac > 0.5),
    };
    SweepSummary {
        per_sampler,
        rns_bottom_left,
    }
}

/// Groups manifest rows by check name (stable and deterministic).
pub fn sort_results(results: &mut [VerificationResult]) {
    results.sort_by(|a, b| a.check_name.cmp(&b.check_name));
}

pub fn count_by_status(results: &[VerificationResult]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for r in results {
        *out.entry(r.status.to_string()).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{BatchObjective, LossGrad};
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, ToPrimitive, Zero};

    /// `L = ½ λ ‖w‖²`.
    struct Quadratic(f64);
    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            1
        }
        fn loss_grad(&self, w: &[f64]) -> Result<LossGrad> {
            Ok(LossGrad {
                loss: 0.5 * self.0 * w[0] * w[0],
                grad: vec![self.0 * w[0]],
            })
        }
    }

    #[test]
    fn quadratic_closed_form_calibration() {
        let lambda = 1.5;
        let w0 = [1.0];
        let cfg = FlowCheckConfig::default();
        for &eps in &[0.04, 0.02] {
            let (p, _) = flow_gap(&[Quadratic(lambda)], &w0, eps, &cfg, true, 1000).unwrap();
            let x: f64 = lambda * eps;
            let closed = ((-(x + x * x / 2.0)).exp() - (1.0 - x)).abs();
            assert!((p.gap - closed).abs() < 1e-6 * closed, "{} vs {}", p.gap, closed);
            assert!((closed / (x.powi(3) / 3.0) - 1.0).abs() < 0.1);
        }
        let (full, _) = flow_check_full(&Quadratic(lambda), &w0, &cfg).unwrap();
        assert!(full.iter().all(|r| r.passed()), "{full:?}");
        let (plain, _) = flow_check_plain(&Quadratic(lambda), &w0, &cfg).unwrap();
        assert!(plain.iter().all(|r| r.passed()), "{plain:?}");
        // Two identical batches collapse to the full-batch case.
        let (sgd, _) = flow_check_sgd(&[Quadratic(lambda), Quadratic(lambda)], &w0, &cfg).unwrap();
        assert!(sgd.iter().filter(|r| r.status != Status::Info).all(|r| r.passed()), "{sgd:?}");
    }

    #[test]
    fn flow_gap_vanishes_with_eps_and_config_validation() {
        let cfg = FlowCheckConfig::default();
        let (a, _) = flow_gap(&[Quadratic(1.0)], &[1.0], 1e-3, &cfg, true, 200).unwrap();
        assert!(a.gap < 1e-9);
        let bad = FlowCheckConfig {
            eps_list: vec![0.01, 0.02],
            ..FlowCheckConfig::default()
        };
        assert!(bad.validate().is_err());
        let few = FlowCheckConfig {
            ode_substeps: 10,
            ..FlowCheckConfig::default()
        };
        assert!(few.validate().is_err());
        assert_eq!(permutations(3).len(), 6);
    }

    #[test]
    fn single_batch_sgd_equals_full() {
        let g = generate(&GenConfig::sbm(vec![5, 5, 5], 0.4, 0.1, 1).with_split([1.0, 0.0, 0.0])).unwrap();
        let cfg = ModelConfig::new(Arch::Gcn, 1, 8, 4, 4).with_activation(Activation::Identity);
        let model = Model::new(cfg.clone()).unwrap();
        let input = GnnInput::full(&g, &cfg, Split::Train);
        let obj = BatchObjective { model: &model, input: &input };
        let w0 = model.init(0).values;
        let fc = FlowCheckConfig::default();
        let (a, _) = flow_gap(&[obj], &w0, 0.02, &fc, true, 200).unwrap();
        let (b, _) = flow_gap(std::slice::from_ref(&obj), &w0, 0.02, &fc, true, 200).unwrap();
        assert_eq!(a.gap, b.gap);
        assert_eq!(a.order_spread, 0.0);
    }

    fn big_choose(n: u64, k: u64) -> BigInt {
        if k > n {
            return BigInt::zero();
        }
        let mut acc = BigInt::one();
        for i in 0..k {
            acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
        }
        acc
    }

    fn exact_kernel_moments(n: u64, r: u64, k: u64) -> (BigRational, BigRational, BigRational) {
        let denom = big_choose(n - 1, r - 1);
        let mut mass = BigRational::zero();
        let mut first = BigRational::zero();
        let mut second = BigRational::zero();
        for d in k..n {
            if r - 1 - k > n - 1 - d {
                continue;
            }
            let h = BigRational::new(big_choose(d, k) * big_choose(n - 1 - d, r - 1 - k), denom.clone());
            let dd = BigRational::from_integer(BigInt::from(d));
            first += &h * &dd;
            second += &h * &dd * &dd;
            mass += h;
        }
        let mean = &first / &mass;
        let var = &second / &mass - &mean * &mean;
        (mass, mean, var)
    }

    #[test]
    fn kernel_matches_exact_rationals() {
        for &(n, m, k) in &[(12u64, 3u64, 1u64), (60, 4, 7), (60, 5, 0), (30, 4, 3), (13, 3, 2)] {
            let r = n / m;
            let (mass, mean, var) = exact_kernel_moments(n, r, k);
            assert_eq!(mass, BigRational::new(BigInt::from(n), BigInt::from(r)));
            let mass_f = kernel_mass(n, m, k).unwrap();
            assert!((mass_f / mass.to_f64().unwrap() - 1.0).abs() < 1e-12);
            assert!((order_stat_mean(n, r, k) - mean.to_f64().unwrap()).abs() < 1e-10);
            assert!((order_stat_var(n, r, k) - var.to_f64().unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn kernel_examples() {
        let r = kernel_mass_check(100, 4, 3).unwrap();
        assert!(r.passed() && r.reference == 4.0);
        assert!(kernel_mass_check(100, 4, 0).unwrap().passed());
        assert!((order_stat_mean(100, 25, 3) - (404.0 / 26.0 - 1.0)).abs() < 1e-12);
        assert!((order_stat_mean(100, 25, 24) - (25.0 * 101.0 / 26.0 - 1.0)).abs() < 1e-12);
        assert_eq!(order_stat_mean(40, 40, 7), 7.0);
        assert_eq!(order_stat_var(40, 40, 7), 0.0);
        assert!(kernel_mass_check(100, 4, 25).is_err());
        assert!(kernel_mass_check(10, 11, 0).is_err());
        for res in order_stat_moment_check(100, 4, 3, 20_000, 0).unwrap() {
            assert!(res.passed(), "{res:?}");
        }
        for res in order_stat_moment_check(40, 1, 7, 100, 0).unwrap() {
            assert!(res.passed(), "{res:?}");
        }
    }

    #[test]
    fn pair_probabilities() {
        let (hit, total) = exhaustive_pair_count(8, 2);
        assert_eq!(total, 70);
        assert_eq!(hit as f64 / total as f64, 3.0 / 14.0);
        for res in rns_pair_checks(8, 2, 0, 0).unwrap() {
            assert!(res.passed() && (res.reference - 3.0 / 14.0).abs() < 1e-15);
        }
        for (n, m) in [(7, 2), (12, 5), (10, 1)] {
            assert!(rns_pair_checks(n, m, 0, 0).unwrap()[0].passed());
        }
        for res in rns_pair_checks(40, 3, 4000, 3).unwrap() {
            assert!(res.passed(), "{res:?}");
        }
    }

    #[test]
    fn rns_bias_on_small_sbm() {
        let g = generate(&GenConfig::sbm(vec![10, 10], 0.4, 0.1, 3)).unwrap();
        let model = Model::new(ModelConfig::new(Arch::Gcn, 2, 8, 6, 4)).unwrap();
        let w = model.init(4);
        for m in [1, 2] {
            for res in rns_bias_checks(&g, &model, &w, m, 200, 1).unwrap() {
                assert!(res.passed(), "{res:?}");
            }
        }
        assert!(rns_bias_checks(&g, &model, &w, 2, 50, 1).is_err());
    }

    #[test]
    fn degree_tail_degenerate_cases() {
        let g = generate(&GenConfig::barabasi_albert(3000, 3, 2)).unwrap();
        let (res, sum) = degree_tail_check(&g, &[1], &[0, 1], 0.3).unwrap();
        assert_eq!(res[0].measured, res[0].reference);
        assert_eq!(sum[0].alpha_rns_mean, sum[0].alpha_full);
        let ring: Vec<(usize, usize)> = (0..200).map(|i| (i, (i + 1) % 200)).collect();
        let reg = crate::graph::Graph::from_parts(200, &ring, ndarray::Array2::zeros((200, 1)), vec![0; 200], 1, vec![Split::Train; 200])
            .unwrap();
        let (res, _) = degree_tail_check(&reg, &[2], &[0], 0.3).unwrap();
        assert_eq!(res[0].status, Status::Inconclusive);
    }

    #[test]
    fn sweep_edge_cases() {
        let g = generate(&GenConfig::barabasi_albert(3000, 3, 1)).unwrap();
        let model = Model::new(ModelConfig::new(Arch::Gcn, 2, 8, 4, 4)).unwrap();
        let rns = SamplerConfig::Rns { num_parts: 2 };
        let (rows, summary) = alpha_vs_r_sweep(&g, &model, &[rns.clone(), rns], &[0, 1], 4).unwrap();
        assert_eq!(rows.len(), 4);
        let (a, b) = (&summary.per_sampler[0], &summary.per_sampler[1]);
        assert!(a.mean_alpha_err.is_finite());
        assert_eq!(a.mean_alpha_err, b.mean_alpha_err);
        assert_eq!(a.mean_r, b.mean_r);
        assert!(sweep_csv(&rows).starts_with(SWEEP_CSV_HEADER));
    }

    #[test]
    fn edge_count_expectation() {
        let g = generate(&GenConfig::barabasi_albert(1000, 3, 5)).unwrap();
        let r = rns_edge_count_check(&g, 4, 100, 0).unwrap();
        assert!(r.passed(), "{r:?}");
        let one = rns_edge_count_check(&g, 1, 3, 0).unwrap();
        assert_eq!(one.measured, g.num_edges() as f64);
    }

    #[test]
    fn gradient_check_small() {
        for arch in [Arch::Gcn, Arch::SageMean] {
            let r = gradient_check(arch, 2, Activation::Relu, 3, 0).unwrap();
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn manifest_format() {
        let r = VerificationResult::gate("x", 1.0, 1.0, 0.0, Tolerance::Absolute, "p");
        assert_eq!(manifest_csv(std::slice::from_ref(&r)), format!("{MANIFEST_HEADER}\nx,1,1,0,true,p\n"));
        assert!(VerificationResult::gate("y", 1.0, 1.1, 0.0, Tolerance::Absolute, "p").failed());
        assert!(r.with_tolerance(0.0).passed());
    }
}
