//! Browser bindings for three small RNS experiments. Each entry point takes
//! plain numbers and returns a JSON string so the page needs no glue beyond
//! `JSON.parse`.

use gnnlab::gen::{generate, GenConfig};
use gnnlab::gnn::{Activation, Arch, BatchObjective, GnnInput, Model, ModelConfig};
use gnnlab::powerlaw::{clauset_alpha, degree_frequency};
use gnnlab::rng::derive;
use gnnlab::samplers::{rns_blocks, Sampler, SamplerConfig};
use gnnlab::theory::{batch_tail_alpha, flow_check_full, flow_check_plain, flow_check_sgd, induced_edge_count, tail_d_min, FlowCheckConfig, FlowPoint};
use gnnlab::{Result, Split};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn to_js(r: Result<Value>) -> std::result::Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

/// Mean induced edges per RNS batch against the exact expectation, for
/// m = 1..=`m_max` on a preferential-attachment graph.
pub fn edge_thinning_value(n: usize, attach: usize, m_max: usize, plans: usize, seed: u64) -> Result<Value> {
    let g = generate(&GenConfig::barabasi_albert(n, attach, seed))?;
    let e = g.num_edges() as f64;
    let mut ms = Vec::new();
    let mut measured = Vec::new();
    let mut expected = Vec::new();
    for m in 1..=m_max.min(n) {
        let root = derive(seed, &["demo", "thinning", &m.to_string()]);
        let mut total = 0.0;
        let mut count = 0usize;
        for p in 0..plans.max(1) {
            for b in rns_blocks(n, m, &mut root.child(p as u64).rng())? {
                total += induced_edge_count(&g, &b) as f64;
                count += 1;
            }
        }
        let r = (n / m) as f64;
        ms.push(m);
        measured.push(total / count as f64);
        expected.push(e * r * (r - 1.0) / (n as f64 * (n as f64 - 1.0)));
    }
    Ok(json!({ "edges": g.num_edges(), "m": ms, "measured": measured, "expected": expected }))
}

/// Degree histograms of the full graph and of one epoch of RNS batches,
/// with the fitted tail exponents.
pub fn degree_tail_value(n: usize, attach: usize, m: usize, seed: u64) -> Result<Value> {
    let g = generate(&GenConfig::barabasi_albert(n, attach, seed))?;
    let full = g.csr().degrees();
    let d_min = tail_d_min(&g);
    let batches = Sampler::new(&g, SamplerConfig::Rns { num_parts: m }, seed)?.epoch(&g, 0)?.batches;
    let batch_deg: Vec<usize> = batches.iter().flat_map(|b| b.structure().degrees()).collect();
    let max_deg = full.iter().copied().max().unwrap_or(0);
    let hist = |d: &[usize]| -> Vec<f64> { (0..=max_deg).map(|k| degree_frequency(d, k)).collect() };
    Ok(json!({
        "d_min": d_min,
        "full": hist(&full),
        "batch": hist(&batch_deg),
        "alpha_full": clauset_alpha(&full, d_min).alpha(),
        "alpha_batch": batch_tail_alpha(&batches, d_min),
    }))
}

fn points(ps: &[FlowPoint]) -> Value {
    json!({
        "eps": ps.iter().map(|p| p.eps).collect::<Vec<_>>(),
        "gap": ps.iter().map(|p| p.gap).collect::<Vec<_>>(),
    })
}

/// Distance between gradient-descent iterates and three flows on a 15-node
/// graph: the corrected full flow, the plain gradient flow, and the corrected
/// flow for chained RNS steps with `m` batches.
pub fn flow_gaps_value(m: usize, substeps: usize, seed: u64) -> Result<Value> {
    let g = generate(&GenConfig::sbm(vec![5, 5, 5], 0.5, 0.1, seed).with_split([1.0, 0.0, 0.0]))?;
    let model = Model::new(
        ModelConfig::new(Arch::Gcn, 1, g.feature_dim(), 4, g.num_classes()).with_activation(Activation::Identity),
    )?;
    let w0 = model.init(seed).values;
    let cfg = FlowCheckConfig {
        ode_substeps: substeps.max(10),
        ..FlowCheckConfig::default()
    };
    let full = GnnInput::full(&g, model.config(), Split::Train);
    let obj = BatchObjective { model: &model, input: &full };
    let (_, corrected) = flow_check_full(&obj, &w0, &cfg)?;
    let (_, plain) = flow_check_plain(&obj, &w0, &cfg)?;
    let batches = Sampler::new(&g, SamplerConfig::Rns { num_parts: m }, seed)?.epoch(&g, 0)?.batches;
    let inputs = batches
        .iter()
        .map(|b| GnnInput::from_batch(b, model.config()))
        .collect::<Result<Vec<_>>>()?;
    let objs: Vec<_> = inputs.iter().map(|i| BatchObjective { model: &model, input: i }).collect();
    let (_, sgd) = flow_check_sgd(&objs, &w0, &cfg)?;
    Ok(json!({ "corrected": points(&corrected), "plain": points(&plain), "sgd": points(&sgd), "m": m }))
}

#[wasm_bindgen]
pub fn edge_thinning(n: usize, attach: usize, m_max: usize, plans: usize, seed: u64) -> std::result::Result<String, JsError> {
    to_js(edge_thinning_value(n, attach, m_max, plans, seed))
}

#[wasm_bindgen]
pub fn degree_tail(n: usize, attach: usize, m: usize, seed: u64) -> std::result::Result<String, JsError> {
    to_js(degree_tail_value(n, attach, m, seed))
}

#[wasm_bindgen]
pub fn flow_gaps(m: usize, substeps: usize, seed: u64) -> std::result::Result<String, JsError> {
    to_js(flow_gaps_value(m, substeps, seed))
}
