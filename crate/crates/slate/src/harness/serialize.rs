//! Canonical JSON and edge-list formats.
//!
//! Writers emit fields in a fixed order and floats with 17 significant
//! digits, so serialize -> parse -> serialize is byte-identical and floats
//! round-trip exactly.

use crate::factorized::ValueDistribution;
use crate::model::{DiscountModel, FactorizedInstance, Instance, Metric, Point};
use crate::proddist::Graph;
use serde::Deserialize;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SerializeError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Graph(#[from] crate::proddist::ProdDistError),
    #[error("edge list: {0}")]
    EdgeList(String),
}

/// 17 significant digits: enough to reproduce any f64 exactly on parse.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_float_row(out: &mut String, row: &[f64]) {
    out.push('[');
    for (k, v) in row.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str(&fmt_f64(*v));
    }
    out.push(']');
}

fn push_float_table(out: &mut String, table: &[Vec<f64>]) {
    out.push('[');
    for (k, row) in table.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        push_float_row(out, row);
    }
    out.push(']');
}

fn model_tag(model: DiscountModel) -> &'static str {
    match model {
        DiscountModel::NearestNeighbor => "nn",
        DiscountModel::ProductDistance => "pd",
    }
}

pub fn instance_to_json(instance: &Instance) -> String {
    let mut out = String::new();
    write!(
        out,
        "{{\"n\":{},\"m\":{},\"model\":\"{}\",\"values\":",
        instance.n(),
        instance.m(),
        model_tag(instance.model())
    )
    .unwrap();
    push_float_table(&mut out, instance.values());
    out.push_str(",\"metric\":{\"dist\":");
    push_float_table(&mut out, &instance.metric().rows());
    out.push_str("}}");
    out
}

#[derive(Deserialize)]
struct RawMetric {
    dist: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawInstance {
    n: usize,
    m: usize,
    model: DiscountModel,
    values: Vec<Vec<f64>>,
    metric: RawMetric,
}

pub fn instance_from_json(text: &str) -> Result<Instance, SerializeError> {
    let raw: RawInstance = serde_json::from_str(text)?;
    if raw.values.len() != raw.n {
        return Err(SerializeError::Shape(format!(
            "{} value rows for n = {}",
            raw.values.len(),
            raw.n
        )));
    }
    if raw.metric.dist.len() != raw.m {
        return Err(SerializeError::Shape(format!(
            "{} metric rows for m = {}",
            raw.metric.dist.len(),
            raw.m
        )));
    }
    let metric = Metric::from_rows(raw.metric.dist)?;
    Ok(Instance::new(raw.values, metric, raw.model)?)
}

pub fn factorized_to_json(instance: &FactorizedInstance) -> String {
    let mut out = String::new();
    out.push_str("{\"u\":");
    push_float_row(&mut out, instance.slot_weights());
    out.push_str(",\"w\":");
    push_float_row(&mut out, instance.advertiser_values());
    out.push_str(",\"metric\":{\"dist\":");
    push_float_table(&mut out, &instance.metric().rows());
    out.push_str("}}");
    out
}

#[derive(Deserialize)]
struct RawFactorized {
    u: Vec<f64>,
    #[serde(default)]
    w: Option<Vec<f64>>,
    metric: RawMetric,
}

pub fn factorized_from_json(text: &str) -> Result<FactorizedInstance, SerializeError> {
    let raw: RawFactorized = serde_json::from_str(text)?;
    let w = raw
        .w
        .ok_or_else(|| SerializeError::Shape("missing advertiser values \"w\"".into()))?;
    let metric = Metric::from_rows(raw.metric.dist)?;
    Ok(FactorizedInstance::new(raw.u, w, metric)?)
}

pub fn stochastic_to_json(inst: &crate::factorized::StochasticInstance) -> String {
    let mut out = String::new();
    out.push_str("{\"u\":");
    push_float_row(&mut out, &inst.slot_weights);
    out.push_str(",\"distributions\":[");
    for (k, d) in inst.distributions.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        match d {
            ValueDistribution::PointMass { value } => {
                write!(out, "{{\"kind\":\"point_mass\",\"value\":{}}}", fmt_f64(*value)).unwrap();
            }
            ValueDistribution::Uniform { lo, hi } => {
                write!(
                    out,
                    "{{\"kind\":\"uniform\",\"lo\":{},\"hi\":{}}}",
                    fmt_f64(*lo),
                    fmt_f64(*hi)
                )
                .unwrap();
            }
            ValueDistribution::Discrete { support, probs } => {
                out.push_str("{\"kind\":\"discrete\",\"support\":");
                push_float_row(&mut out, support);
                out.push_str(",\"probs\":");
                push_float_row(&mut out, probs);
                out.push('}');
            }
            ValueDistribution::Empirical { samples } => {
                out.push_str("{\"kind\":\"empirical\",\"samples\":");
                push_float_row(&mut out, samples);
                out.push('}');
            }
        }
    }
    out.push_str("],\"metric\":{\"dist\":");
    push_float_table(&mut out, &inst.metric.rows());
    out.push_str("}}");
    out
}

#[derive(Deserialize)]
struct RawStochastic {
    u: Vec<f64>,
    distributions: Vec<ValueDistribution>,
    metric: RawMetric,
}

pub fn stochastic_from_json(
    text: &str,
) -> Result<crate::factorized::StochasticInstance, SerializeError> {
    let raw: RawStochastic = serde_json::from_str(text)?;
    for d in &raw.distributions {
        d.validate()
            .map_err(|e| SerializeError::Shape(e.to_string()))?;
    }
    let metric = Metric::from_rows(raw.metric.dist)?;
    Ok(crate::factorized::StochasticInstance {
        slot_weights: raw.u,
        distributions: raw.distributions,
        metric,
    })
}

pub fn points_to_json(points: &[Point]) -> String {
    let mut out = String::new();
    out.push('[');
    for (k, p) in points.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        write!(out, "[{},{}]", fmt_f64(p.x), fmt_f64(p.y)).unwrap();
    }
    out.push(']');
    out
}

pub fn points_from_json(text: &str) -> Result<Vec<Point>, SerializeError> {
    let raw: Vec<[f64; 2]> = serde_json::from_str(text)?;
    Ok(raw.into_iter().map(|[x, y]| Point::new(x, y)).collect())
}

/// Graph format: first line `n m`, then one `u v` pair per line, 0-indexed.
pub fn graph_to_edge_list(graph: &Graph) -> String {
    let mut out = format!("{} {}\n", graph.vertex_count(), graph.edges().len());
    for &(u, v) in graph.edges() {
        writeln!(out, "{u} {v}").unwrap();
    }
    out
}

pub fn graph_from_edge_list(text: &str) -> Result<Graph, SerializeError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| SerializeError::EdgeList("empty input".into()))?;
    let mut parts = header.split_whitespace();
    let n: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| SerializeError::EdgeList("bad vertex count".into()))?;
    let e: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| SerializeError::EdgeList("bad edge count".into()))?;
    let mut edges = Vec::with_capacity(e);
    for line in lines {
        let mut parts = line.split_whitespace();
        let u: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| SerializeError::EdgeList(format!("bad edge line: {line}")))?;
        let v: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| SerializeError::EdgeList(format!("bad edge line: {line}")))?;
        edges.push((u, v));
    }
    if edges.len() != e {
        return Err(SerializeError::EdgeList(format!(
            "expected {e} edges, found {}",
            edges.len()
        )));
    }
    Ok(Graph::new(n, &edges)?)
}
