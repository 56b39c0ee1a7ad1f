//! Product-distance model: the single-slot baseline and an executable
//! reduction chain from maximum independent set through the
//! exponential-degree objective.
//!
//! On instances built from a graph (distance 0.5 across edges, 1 otherwise,
//! unit values), the welfare of any matching equals `rho(U)` of its occupied
//! vertex set, where `rho(U) = sum_{i in U} 0.5^{deg_U(i)}`. A greedy
//! refinement turns any vertex set into an independent set without lowering
//! `rho`, so a good allocator for this model yields a comparably good
//! independent set.

use crate::model::{social_welfare, DiscountModel, Instance, Matching, Metric, ModelError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProdDistError {
    #[error("graph edge ({0}, {1}) is out of range")]
    EdgeOutOfRange(usize, usize),
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("graphs larger than 63 vertices are not supported")]
    TooLarge,
    #[error("instance has no advertisers or no slots")]
    Empty,
    #[error("vertex {0} outside the graph")]
    VertexOutOfRange(usize),
    #[error("allocator failed: {0}")]
    Allocator(String),
    #[error("welfare {welfare} does not equal rho {rho}; the matching does not come from this graph's instance")]
    IdentityViolated { welfare: f64, rho: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// An undirected graph without self-loops, held as adjacency bitmasks.
#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    nbr: Vec<u64>,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, ProdDistError> {
        if n > 63 {
            return Err(ProdDistError::TooLarge);
        }
        let mut nbr = vec![0u64; n];
        let mut normalized = Vec::new();
        for &(a, b) in edges {
            if a == b {
                return Err(ProdDistError::SelfLoop(a));
            }
            if a >= n || b >= n {
                return Err(ProdDistError::EdgeOutOfRange(a, b));
            }
            let (u, v) = (a.min(b), a.max(b));
            if nbr[u] >> v & 1 == 0 {
                normalized.push((u, v));
            }
            nbr[u] |= 1 << v;
            nbr[v] |= 1 << u;
        }
        normalized.sort_unstable();
        Ok(Graph { n, nbr, edges: normalized })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// Edges with `u < v`, sorted lexicographically.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && v < self.n && self.nbr[u] >> v & 1 == 1
    }

    pub fn neighbors_mask(&self, v: usize) -> u64 {
        self.nbr[v]
    }

    pub fn degree_in(&self, v: usize, set: &[usize]) -> u32 {
        let mask = set.iter().fold(0u64, |acc, &u| acc | 1 << u);
        (self.nbr[v] & mask & !(1 << v)).count_ones()
    }

    pub(crate) fn msed_of_mask(&self, mask: u64) -> f64 {
        let mut total = 0.0;
        let mut rest = mask;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let deg = (self.nbr[i] & mask).count_ones();
            total += 0.5f64.powi(deg as i32);
        }
        total
    }
}

/// `rho(U) = sum_{i in U} 0.5^{deg_U(i)}`.
pub fn msed_objective(graph: &Graph, subset: &[usize]) -> Result<f64, ProdDistError> {
    let mut mask = 0u64;
    for &v in subset {
        if v >= graph.vertex_count() {
            return Err(ProdDistError::VertexOutOfRange(v));
        }
        mask |= 1 << v;
    }
    Ok(graph.msed_of_mask(mask))
}

/// The best single matched pair: maximal value, discount 1. Monotone in every
/// bid, and an m-approximation under either discount model.
pub fn single_slot_baseline(instance: &Instance) -> Result<Matching, ProdDistError> {
    if instance.n() == 0 || instance.m() == 0 {
        return Err(ProdDistError::Empty);
    }
    let mut best = (0usize, 0usize);
    for i in 0..instance.n() {
        for j in 0..instance.m() {
            if instance.value(i, j) > instance.value(best.0, best.1) {
                best = (i, j);
            }
        }
    }
    Ok(Matching::new(vec![best])?)
}

/// Strips internal edges one at a time, always removing the higher-degree
/// endpoint (higher index on ties). Each removal leaves `rho` unchanged or
/// larger, so the returned independent subset satisfies
/// `rho(out) >= rho(input)`.
pub fn refine_to_independent_set(graph: &Graph, subset: &[usize]) -> Vec<usize> {
    let mut current: Vec<usize> = subset.to_vec();
    current.sort_unstable();
    current.dedup();
    loop {
        let mut internal = None;
        'scan: for (idx_a, &a) in current.iter().enumerate() {
            for &b in &current[idx_a + 1..] {
                if graph.has_edge(a, b) {
                    internal = Some((a, b));
                    break 'scan;
                }
            }
        }
        let Some((a, b)) = internal else {
            return current;
        };
        let (da, db) = (graph.degree_in(a, &current), graph.degree_in(b, &current));
        let drop = if da > db {
            a
        } else if db > da {
            b
        } else {
            a.max(b)
        };
        let before = graph
            .msed_of_mask(current.iter().fold(0u64, |acc, &v| acc | 1 << v));
        current.retain(|&v| v != drop);
        let after = graph
            .msed_of_mask(current.iter().fold(0u64, |acc, &v| acc | 1 << v));
        assert!(
            after >= before,
            "refinement decreased the objective: {before} -> {after}"
        );
    }
}

/// Unit-value product-distance instance of a graph: slots are vertices,
/// distance 0.5 across edges and 1 otherwise. The triangle inequality holds
/// because 1 <= 0.5 + 0.5.
pub fn mis_to_pd_instance(graph: &Graph) -> Result<Instance, ProdDistError> {
    let n = graph.vertex_count();
    if n == 0 {
        return Err(ProdDistError::Empty);
    }
    let mut dist = vec![vec![1.0; n]; n];
    for (i, row) in dist.iter_mut().enumerate() {
        row[i] = 0.0;
        for (j, d) in row.iter_mut().enumerate() {
            if graph.has_edge(i, j) {
                *d = 0.5;
            }
        }
    }
    let metric = Metric::from_rows(dist)?;
    Ok(Instance::new(vec![vec![1.0; n]; n], metric, DiscountModel::ProductDistance)?)
}

/// Reads the occupied slots of a matching back as a vertex set and checks the
/// exact identity `rho(U) = SW(M)` (both sides are dyadic, so equality is
/// exact in floating point).
pub fn pd_matching_to_msed_subset(
    matching: &Matching,
    graph: &Graph,
    instance: &Instance,
) -> Result<Vec<usize>, ProdDistError> {
    let subset = matching.occupied_slots();
    let rho = msed_objective(graph, &subset)?;
    let welfare = social_welfare(matching, instance)?;
    if welfare != rho {
        return Err(ProdDistError::IdentityViolated { welfare, rho });
    }
    Ok(subset)
}

#[derive(Clone, Debug)]
pub struct HardnessReport {
    pub welfare: f64,
    pub rho: f64,
    pub refined: Vec<usize>,
    pub independent_set_size: usize,
    pub exact_mis_size: usize,
}

/// Runs any product-distance allocator on the constructed instance, converts
/// the matching to a vertex set, refines it to an independent set and
/// compares with the exact maximum independent set.
pub fn hardness_demo<F, E>(graph: &Graph, allocator: F) -> Result<HardnessReport, ProdDistError>
where
    F: FnOnce(&Instance) -> Result<Matching, E>,
    E: std::fmt::Display,
{
    let instance = mis_to_pd_instance(graph)?;
    let matching = allocator(&instance).map_err(|e| ProdDistError::Allocator(e.to_string()))?;
    let welfare = social_welfare(&matching, &instance)?;
    let subset = pd_matching_to_msed_subset(&matching, graph, &instance)?;
    let rho = msed_objective(graph, &subset)?;
    let refined = refine_to_independent_set(graph, &subset);
    let mis = crate::oracle::max_independent_set(graph, crate::oracle::DEFAULT_CAP)
        .map_err(|_| ProdDistError::TooLarge)?;
    Ok(HardnessReport {
        welfare,
        rho,
        independent_set_size: refined.len(),
        refined,
        exact_mis_size: mis.best.len(),
    })
}
