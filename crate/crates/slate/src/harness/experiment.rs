//! A seeded experiment runner: generate instances, run a list of algorithms,
//! compare against the exact oracle where it is affordable, and emit a
//! fixed-schema CSV.

use crate::factorized::logm_allocate;
use crate::model::{social_welfare, DiscountModel, Instance, Point};
use crate::nnlp::{nn_constant_approx, ConversionMode};
use crate::oracle;
use crate::proddist::single_slot_baseline;
use crate::ptas::{ptas_allocate, DEFAULT_WORK_CAP};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// Euclidean layout, independent uniform values, nearest-neighbor model.
    EuclideanNn,
    /// Random shortest-path-closed metric, uniform values, nearest-neighbor.
    MetricNn,
    /// Factorized values over a random metric.
    Factorized,
    /// Euclidean layout with unit-value advertisers (`v[i][j] = u[j]`).
    EuclideanUnit,
    /// Random metric, uniform values, product-distance model.
    ProductDistance,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub m: usize,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum AlgorithmSpec {
    NnLpPlain,
    NnLpVirtual,
    Logm,
    SingleSlot,
    Ptas { eps: f64 },
}

impl AlgorithmSpec {
    pub fn label(&self) -> String {
        match self {
            AlgorithmSpec::NnLpPlain => "nn-lp-plain".into(),
            AlgorithmSpec::NnLpVirtual => "nn-lp-virtual".into(),
            AlgorithmSpec::Logm => "logm".into(),
            AlgorithmSpec::SingleSlot => "single-slot".into(),
            AlgorithmSpec::Ptas { eps } => format!("ptas-{eps}"),
        }
    }
}

fn default_trials() -> usize {
    32
}

fn default_oracle_cap() -> usize {
    8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub generator: GeneratorSpec,
    pub algorithms: Vec<AlgorithmSpec>,
    /// Trials averaged per randomized algorithm.
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Oracle optimum is computed only when `m` is at most this.
    #[serde(default = "default_oracle_cap")]
    pub oracle_cap: usize,
    /// Wall-clock capture; off by default so identical configs produce
    /// byte-identical reports.
    #[serde(default)]
    pub record_millis: bool,
}

#[derive(Clone, Debug)]
pub struct ReportRow {
    pub instance_id: String,
    pub algo: String,
    pub seed: u64,
    pub sw: Option<f64>,
    pub opt: Option<f64>,
    pub ratio: Option<f64>,
    pub millis: u64,
    pub error: Option<String>,
}

/// One generated instance with whatever side data its kind carries.
struct GeneratedInstance {
    instance: Instance,
    points: Option<Vec<Point>>,
    slot_weights: Option<Vec<f64>>,
    advertiser_values: Option<Vec<f64>>,
}

fn generate_one(spec: &GeneratorSpec, rng: &mut impl Rng) -> GeneratedInstance {
    match spec.kind {
        GeneratorKind::EuclideanNn => {
            let (points, metric) = crate::harness::gen_euclidean(spec.m, 1.0, rng);
            let values: Vec<Vec<f64>> = (0..spec.n)
                .map(|_| (0..spec.m).map(|_| rng.gen::<f64>()).collect())
                .collect();
            GeneratedInstance {
                instance: Instance::new(values, metric, DiscountModel::NearestNeighbor)
                    .expect("generated values are valid"),
                points: Some(points),
                slot_weights: None,
                advertiser_values: None,
            }
        }
        GeneratorKind::MetricNn => GeneratedInstance {
            instance: crate::harness::gen_nn_instance(spec.n, spec.m, rng),
            points: None,
            slot_weights: None,
            advertiser_values: None,
        },
        GeneratorKind::Factorized => {
            let fact = crate::harness::gen_factorized(spec.n, spec.m, rng);
            GeneratedInstance {
                instance: fact.to_instance(),
                points: None,
                slot_weights: Some(fact.slot_weights().to_vec()),
                advertiser_values: Some(fact.advertiser_values().to_vec()),
            }
        }
        GeneratorKind::EuclideanUnit => {
            let (points, metric) = crate::harness::gen_euclidean(spec.m, 1.0, rng);
            let u: Vec<f64> = (0..spec.m).map(|_| rng.gen::<f64>()).collect();
            let values = vec![u.clone(); spec.n];
            GeneratedInstance {
                instance: Instance::new(values, metric, DiscountModel::NearestNeighbor)
                    .expect("generated values are valid"),
                points: Some(points),
                slot_weights: Some(u),
                advertiser_values: Some(vec![1.0; spec.n]),
            }
        }
        GeneratorKind::ProductDistance => GeneratedInstance {
            instance: crate::harness::gen_pd_instance(spec.n, spec.m, rng),
            points: None,
            slot_weights: None,
            advertiser_values: None,
        },
    }
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn run_algorithm(
    spec: &AlgorithmSpec,
    case: &GeneratedInstance,
    trials: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64, String> {
    let inst = &case.instance;
    let mean_of = |welfares: Vec<f64>| -> f64 {
        welfares.iter().sum::<f64>() / welfares.len() as f64
    };
    match spec {
        AlgorithmSpec::SingleSlot => {
            let matching = single_slot_baseline(inst).map_err(|e| e.to_string())?;
            social_welfare(&matching, inst).map_err(|e| e.to_string())
        }
        AlgorithmSpec::NnLpPlain | AlgorithmSpec::NnLpVirtual => {
            if inst.model() != DiscountModel::NearestNeighbor {
                return Err("nn-lp needs a nearest-neighbor instance".into());
            }
            let mode = if *spec == AlgorithmSpec::NnLpPlain {
                ConversionMode::Plain
            } else {
                ConversionMode::Virtual
            };
            let mut welfares = Vec::with_capacity(trials);
            for _ in 0..trials.max(1) {
                let run = nn_constant_approx(inst, mode, rng).map_err(|e| e.to_string())?;
                welfares.push(run.welfare);
            }
            Ok(mean_of(welfares))
        }
        AlgorithmSpec::Logm => {
            let (u, w) = match (&case.slot_weights, &case.advertiser_values) {
                (Some(u), Some(w)) => (u.clone(), w.clone()),
                _ => return Err("logm needs a factorized instance".into()),
            };
            let fact = crate::model::FactorizedInstance::new(u, w, inst.metric().clone())
                .map_err(|e| e.to_string())?;
            let mut welfares = Vec::with_capacity(trials);
            for _ in 0..trials.max(1) {
                let run = logm_allocate(&fact, rng);
                let sw = social_welfare(&run.matching, inst).map_err(|e| e.to_string())?;
                welfares.push(sw);
            }
            Ok(mean_of(welfares))
        }
        AlgorithmSpec::Ptas { eps } => {
            let (points, u) = match (&case.points, &case.slot_weights) {
                (Some(p), Some(u)) => (p.clone(), u.clone()),
                _ => return Err("ptas needs a euclidean unit-value instance".into()),
            };
            let run = ptas_allocate(&points, &u, inst.n(), *eps, DEFAULT_WORK_CAP)
                .map_err(|e| e.to_string())?;
            Ok(run.welfare)
        }
    }
}

/// Runs the whole experiment matrix. Rows appear in configuration order;
/// per-row failures are recorded and do not stop the run.
pub fn run_experiment(config: &ExperimentConfig) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for idx in 0..config.generator.count {
        let mut gen_rng = ChaCha8Rng::seed_from_u64(mix(config.seed, idx as u64, 0));
        let case = generate_one(&config.generator, &mut gen_rng);
        let instance_id = format!("inst-{idx:03}");
        let opt = if case.instance.m() <= config.oracle_cap {
            oracle::optimal_allocation_capped(&case.instance, config.oracle_cap)
                .ok()
                .map(|r| r.value)
        } else {
            None
        };
        for (aidx, algo) in config.algorithms.iter().enumerate() {
            let row_seed = mix(config.seed, idx as u64, 1 + aidx as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(row_seed);
            let start = Instant::now();
            let outcome = run_algorithm(algo, &case, config.trials, &mut rng);
            let millis = if config.record_millis {
                start.elapsed().as_millis() as u64
            } else {
                0
            };
            let (sw, error) = match outcome {
                Ok(sw) => (Some(sw), None),
                Err(e) => (None, Some(e)),
            };
            let ratio = match (sw, opt) {
                (Some(s), Some(o)) if o > 0.0 => Some(s / o),
                _ => None,
            };
            rows.push(ReportRow {
                instance_id: instance_id.clone(),
                algo: algo.label(),
                seed: row_seed,
                sw,
                opt,
                ratio,
                millis,
                error,
            });
        }
    }
    rows
}

/// 12 significant digits, the report float format.
pub fn fmt_report_f64(x: f64) -> String {
    format!("{x:.11e}")
}

pub const CSV_HEADER: &str = "instance_id,algo,seed,sw,opt,ratio,millis";

pub fn rows_to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let fmt_opt = |v: Option<f64>| v.map(fmt_report_f64).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.instance_id,
            row.algo,
            row.seed,
            fmt_opt(row.sw),
            fmt_opt(row.opt),
            fmt_opt(row.ratio),
            row.millis
        )
        .unwrap();
    }
    out
}
