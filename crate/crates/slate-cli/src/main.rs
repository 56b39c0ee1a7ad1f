//! Command-line driver: generators, oracles, the allocation algorithms and
//! the truthfulness audits, all seeded and scriptable.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slate::factorized::{
    self, factorized_payment, logm_allocate, select_slots_radius, StochasticPreparation,
};
use slate::harness::{self, rows_to_csv, ExperimentConfig};
use slate::mechanism::{
    default_bid_grid, expected_allocation_curve, monotonicity_probe, myerson_payment_from_curve,
    AllocationRule, GreedyFactorizedRule, LpMechanismRule, SingleSlotScaleRule,
};
use slate::model::{social_welfare, DiscountModel, Point};
use slate::nnlp::{selection_to_matching, ConversionMode, NnLpPipeline};
use slate::oracle;
use slate::proddist::{hardness_demo, single_slot_baseline};
use slate::ptas::{ptas_allocate, DEFAULT_WORK_CAP};
use std::fs;
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "slate",
    about = "Ad-slate allocation under spatial externalities",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate instances, metrics, layouts, graphs.
    Gen(GenArgs),
    /// Exact brute-force optimum of an instance.
    Oracle(OracleArgs),
    /// LP relaxation + rounding for the nearest-neighbor model.
    NnLp(NnLpArgs),
    /// Greedy algorithms for factorized valuations.
    Factorized(FactorizedArgs),
    /// Near-optimal allocation for unit values in the plane.
    Ptas(PtasArgs),
    /// Product-distance baseline and the independent-set reduction.
    Proddist(ProddistArgs),
    /// Allocation-curve, payment and monotonicity audits.
    Audit(AuditArgs),
    /// Run an experiment matrix from a JSON config.
    Run(RunArgs),
}

/// Seed precedence: flag, then SLATE_SEED, then 0.
fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("SLATE_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
    })
    .unwrap_or(0)
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {path:?}")),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    what: GenKind,
}

#[derive(Subcommand)]
enum GenKind {
    /// Uniform 2D layout: points plus the normalized metric.
    Euclidean {
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        box_size: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random shortest-path-closed metric.
    Metric {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dense nearest-neighbor instance.
    Nn {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// Use a Euclidean layout instead of a random closed metric.
        #[arg(long)]
        euclidean: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dense product-distance instance.
    Pd {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Factorized instance (slot weights, advertiser values, metric).
    Factorized {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random graph in edge-list format.
    Graph {
        #[arg(long)]
        vertices: usize,
        #[arg(long, default_value_t = 0.4)]
        edge_prob: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    match args.what {
        GenKind::Euclidean { m, box_size, seed, out } => {
            let mut rng = ChaCha8Rng::seed_from_u64(resolve_seed(seed));
            let (points, metric) = harness::gen_euclidean(m, box_size, &mut rng);
            let text = format!(
                "{{\"points\":{},\"metric\":{{\"dist\":{}}}}}\n",
                harness::points_to_json(&points),
                table_json(&metric.rows())
            );
            emit(out.as_ref(), &text)
        }
        GenKind::Metric { m, seed, out } => {
            let mut rng = ChaCha8Rng::seed_from_u64(resolve_seed(seed));
            let metric = harness::gen_random_metric(m, &mut rng);
            emit(out.as_ref(), &format!("{{\"dist\":{}}}\n", table_json(&metric.rows())))
        }
        GenKind::Nn { n, m, euclidean, seed, out } => {
            let mut rng = ChaCha8Rng::seed_from_u64(resolve_seed(seed));
            let inst = if euclidean {
                let (_, metric) = harness::gen_euclidean(m, 1.0, &mut rng);
                let values = (0..n)
                    .map(|_| (0..m).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect())
                    .collect();
                slate::model::Instance::new(values, metric, DiscountModel::NearestNeighbor)?
            } else {
                harness::gen_nn_instance(n, m, &mut rng)
            };
            emit(out.as_ref(), &(harness::instance_to_json(&inst) + "\n"))
        }
        GenKind::Pd { n, m, seed, out } => {
            let mut rng = ChaCha8Rng::seed_from_u64(resolve_seed(seed));
            let inst = harness::gen_pd_instance(n, m, &mut rng);
            emit(out.as_ref(), &(harness::instance_to_json(&inst) + "\n"))
        }
        GenKind::Factorized { n, m, seed, out } => {
            let mut rng = ChaCha8Rng::seed_from_u64(resolve_seed(seed));
            let inst = harness::gen_factorized(n, m, &mut rng);
            emit(out.as_ref(), &(harness::factorized_to_json(&inst) + "\n"))
        }
        GenKind::Graph { vertices, edge_prob, seed, out } => {
            let mut rng = ChaCha8Rng::seed_from_u64(resolve_seed(seed));
            let graph = harness::gen_graph(vertices, edge_prob, &mut rng);
            emit(out.as_ref(), &harness::graph_to_edge_list(&graph))
        }
    }
}

fn table_json(rows: &[Vec<f64>]) -> String {
    let mut out = String::from("[");
    for (i, row) in rows.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push('[');
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&harness::fmt_f64(*v));
        }
        out.push(']');
    }
    out.push(']');
    out
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Subset-enumeration cap on the slot count.
    #[arg(long, default_value_t = oracle::DEFAULT_CAP)]
    cap: usize,
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let text = fs::read_to_string(&args.instance)?;
    let inst = harness::instance_from_json(&text)?;
    let result = oracle::optimal_allocation_capped(&inst, args.cap)?;
    println!("optimum {}", harness::fmt_report_f64(result.value));
    println!("explored {}", result.explored);
    for &(i, j) in result.best.pairs() {
        println!("match {i} {j}");
    }
    Ok(())
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModeFlag {
    Plain,
    Virtual,
}

#[derive(Args)]
struct NnLpArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = ModeFlag::Virtual)]
    mode: ModeFlag,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_nn_lp(args: NnLpArgs) -> Result<()> {
    let text = fs::read_to_string(&args.instance)?;
    let inst = harness::instance_from_json(&text)?;
    if inst.model() != DiscountModel::NearestNeighbor {
        bail!("nn-lp needs a nearest-neighbor instance");
    }
    let mode = match args.mode {
        ModeFlag::Plain => ConversionMode::Plain,
        ModeFlag::Virtual => ConversionMode::Virtual,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(resolve_seed(args.seed));
    let mut csv = String::from("trial,sw,selection_value\n");
    let mut total = 0.0;
    let (lp_objective, trials_run) = if inst.m() >= 2 {
        let pipeline = NnLpPipeline::prepare(&inst)?;
        let rounder = pipeline.rounder();
        for t in 0..args.trials {
            let sel = rounder.round(&mut rng);
            let conv = selection_to_matching(&pipeline.gpds, &sel, &inst, mode)?;
            total += conv.welfare;
            csv.push_str(&format!(
                "{t},{},{}\n",
                harness::fmt_report_f64(conv.welfare),
                harness::fmt_report_f64(sel.value)
            ));
        }
        (pipeline.lp_objective(), args.trials)
    } else {
        let run = slate::nnlp::nn_constant_approx(&inst, mode, &mut rng)?;
        csv.push_str(&format!("0,{},{}\n", harness::fmt_report_f64(run.welfare), "0"));
        total = run.welfare;
        (run.lp_objective, 1)
    };
    emit(args.out.as_ref(), &csv)?;
    eprintln!("lp_objective {}", harness::fmt_report_f64(lp_objective));
    eprintln!("lp_objective/18 {}", harness::fmt_report_f64(lp_objective / 18.0));
    eprintln!(
        "mean_sw {}",
        harness::fmt_report_f64(total / trials_run.max(1) as f64)
    );
    Ok(())
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FactorizedAlgo {
    Logm,
    Stochastic,
}

#[derive(Args)]
struct FactorizedArgs {
    #[arg(long, value_enum)]
    algo: FactorizedAlgo,
    /// Factorized instance JSON (u, w, metric) for `logm`.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Stochastic instance JSON (u, distributions, metric) for `stochastic`.
    #[arg(long)]
    dists: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 100_000)]
    gamma_samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_factorized(args: FactorizedArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(resolve_seed(args.seed));
    match args.algo {
        FactorizedAlgo::Logm => {
            let path = args.instance.ok_or_else(|| anyhow!("--instance is required for logm"))?;
            let inst = harness::factorized_from_json(&fs::read_to_string(&path)?)?;
            let dense = inst.to_instance();
            let mut csv = String::from("trial,radius,sw\n");
            let mut last = None;
            for t in 0..args.trials.max(1) {
                let run = logm_allocate(&inst, &mut rng);
                let sw = social_welfare(&run.matching, &dense)?;
                csv.push_str(&format!(
                    "{t},{},{}\n",
                    harness::fmt_report_f64(run.radius),
                    harness::fmt_report_f64(sw)
                ));
                last = Some(run);
            }
            let run = last.expect("at least one trial");
            csv.push_str("advertiser,bid,quantity,payment\n");
            for i in 0..inst.n() {
                let bids = inst.advertiser_values();
                let q = factorized::allocation_quantity(&run.selection, bids, i, bids[i]);
                let p = factorized_payment(&run.selection, bids, i);
                csv.push_str(&format!(
                    "{i},{},{},{}\n",
                    harness::fmt_report_f64(bids[i]),
                    harness::fmt_report_f64(q),
                    harness::fmt_report_f64(p)
                ));
            }
            emit(args.out.as_ref(), &csv)
        }
        FactorizedAlgo::Stochastic => {
            let path = args.dists.ok_or_else(|| anyhow!("--dists is required for stochastic"))?;
            let inst = harness::stochastic_from_json(&fs::read_to_string(&path)?)?;
            let prep = StochasticPreparation::new(&inst, args.gamma_samples, &mut rng)?;
            let dense_u = inst.slot_weights.clone();
            let mut csv = String::from("trial,sw\n");
            let mut last_bids: Vec<f64> = Vec::new();
            let mut last_sel = None;
            for t in 0..args.trials.max(1) {
                let bids: Vec<f64> =
                    inst.distributions.iter().map(|d| d.sample(&mut rng)).collect();
                let sel = prep.preselect(&mut rng)?;
                let matching = factorized::greedy_assign(&sel, &bids);
                let dense = slate::model::FactorizedInstance::new(
                    dense_u.clone(),
                    bids.clone(),
                    inst.metric.clone(),
                )?
                .to_instance();
                let sw = social_welfare(&matching, &dense)?;
                csv.push_str(&format!("{t},{}\n", harness::fmt_report_f64(sw)));
                last_bids = bids;
                last_sel = Some(sel);
            }
            let sel = last_sel.expect("at least one trial");
            csv.push_str("advertiser,bid,quantity,payment\n");
            for i in 0..last_bids.len() {
                let q = factorized::allocation_quantity(&sel, &last_bids, i, last_bids[i]);
                let p = factorized_payment(&sel, &last_bids, i);
                csv.push_str(&format!(
                    "{i},{},{},{}\n",
                    harness::fmt_report_f64(last_bids[i]),
                    harness::fmt_report_f64(q),
                    harness::fmt_report_f64(p)
                ));
            }
            let gamma_line: Vec<String> =
                prep.gamma.iter().map(|g| harness::fmt_report_f64(*g)).collect();
            eprintln!("gamma {}", gamma_line.join(","));
            emit(args.out.as_ref(), &csv)
        }
    }
}

#[derive(Args)]
struct PtasArgs {
    /// JSON file with 2D coordinates: [[x, y], ...].
    #[arg(long)]
    points: PathBuf,
    /// Comma-separated slot weights; defaults to all ones.
    #[arg(long)]
    u: Option<String>,
    #[arg(long)]
    eps: f64,
    /// Advertiser count; defaults to the slot count.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_WORK_CAP)]
    work_cap: u64,
}

fn cmd_ptas(args: PtasArgs) -> Result<()> {
    let points: Vec<Point> = harness::points_from_json(&fs::read_to_string(&args.points)?)?;
    let m = points.len();
    let u: Vec<f64> = match &args.u {
        None => vec![1.0; m],
        Some(list) => list
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| anyhow!("bad weight {t:?}: {e}")))
            .collect::<Result<_>>()?,
    };
    if u.len() != m {
        bail!("{} weights for {} points", u.len(), m);
    }
    let n = args.n.unwrap_or(m);
    let run = ptas_allocate(&points, &u, n, args.eps, args.work_cap)?;
    println!("sw {}", harness::fmt_report_f64(run.welfare));
    println!(
        "slots {}",
        run.matching
            .occupied_slots()
            .iter()
            .map(|j| j.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    println!("alpha,beta,value");
    for offset in &run.selection.per_offset {
        println!(
            "{},{},{}",
            offset.alpha,
            offset.beta,
            harness::fmt_report_f64(offset.value)
        );
    }
    Ok(())
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AllocatorFlag {
    Oracle,
    SingleSlot,
}

#[derive(Args)]
struct ProddistArgs {
    /// Edge-list file: first line `n m`, then `u v` pairs (0-indexed).
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = AllocatorFlag::Oracle)]
    allocator: AllocatorFlag,
}

fn cmd_proddist(args: ProddistArgs) -> Result<()> {
    let graph = harness::graph_from_edge_list(&fs::read_to_string(&args.graph)?)?;
    let report = match args.allocator {
        AllocatorFlag::Oracle => hardness_demo(&graph, |inst| {
            oracle::optimal_allocation(inst).map(|r| r.best)
        })?,
        AllocatorFlag::SingleSlot => hardness_demo(&graph, single_slot_baseline)?,
    };
    println!("welfare {}", harness::fmt_report_f64(report.welfare));
    println!("rho {}", harness::fmt_report_f64(report.rho));
    println!(
        "independent_set {}",
        report
            .refined
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    println!("independent_set_size {}", report.independent_set_size);
    println!("exact_mis_size {}", report.exact_mis_size);
    Ok(())
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum RuleFlag {
    Lp,
    Logm,
    Stochastic,
    SingleSlot,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, value_enum)]
    rule: RuleFlag,
    /// Instance JSON (dense for lp/single-slot, factorized for logm).
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Stochastic instance JSON for the stochastic rule.
    #[arg(long)]
    dists: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    advertiser: usize,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Largest probed bid (scale factor for the lp rule).
    #[arg(long, default_value_t = 2.0)]
    max_bid: f64,
    #[arg(long, default_value_t = 100_000)]
    gamma_samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn audit_rule(args: &AuditArgs, rng: &mut ChaCha8Rng) -> Result<Box<dyn AllocationRule>> {
    match args.rule {
        RuleFlag::Lp => {
            let path = args.instance.as_ref().ok_or_else(|| anyhow!("--instance required"))?;
            let inst = harness::instance_from_json(&fs::read_to_string(path)?)?;
            Ok(Box::new(LpMechanismRule::new(inst, args.advertiser)))
        }
        RuleFlag::SingleSlot => {
            let path = args.instance.as_ref().ok_or_else(|| anyhow!("--instance required"))?;
            let inst = harness::instance_from_json(&fs::read_to_string(path)?)?;
            Ok(Box::new(SingleSlotScaleRule::new(&inst, args.advertiser)))
        }
        RuleFlag::Logm => {
            let path = args.instance.as_ref().ok_or_else(|| anyhow!("--instance required"))?;
            let inst = harness::factorized_from_json(&fs::read_to_string(path)?)?;
            let radii = factorized::logm_radii(inst.m());
            let radius = radii[rand::Rng::gen_range(rng, 0..radii.len())];
            let selection = select_slots_radius(inst.slot_weights(), inst.metric(), radius);
            eprintln!("radius {}", harness::fmt_report_f64(radius));
            Ok(Box::new(GreedyFactorizedRule {
                selection,
                bids: inst.advertiser_values().to_vec(),
                advertiser: args.advertiser,
            }))
        }
        RuleFlag::Stochastic => {
            let path = args.dists.as_ref().ok_or_else(|| anyhow!("--dists required"))?;
            let inst = harness::stochastic_from_json(&fs::read_to_string(path)?)?;
            let prep = StochasticPreparation::new(&inst, args.gamma_samples, rng)?;
            let selection = prep.preselect(rng)?;
            let bids: Vec<f64> = inst.distributions.iter().map(|d| d.sample(rng)).collect();
            Ok(Box::new(GreedyFactorizedRule {
                selection,
                bids,
                advertiser: args.advertiser,
            }))
        }
    }
}

fn cmd_audit(args: AuditArgs) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rule = audit_rule(&args, &mut rng)?;
    let grid = default_bid_grid(rule.as_ref(), args.max_bid);
    let curve = expected_allocation_curve(rule.as_ref(), &grid, args.trials, seed)?;
    let mut csv = String::from("bid,quantity,stderr\n");
    for k in 0..curve.bids.len() {
        csv.push_str(&format!(
            "{},{},{}\n",
            harness::fmt_report_f64(curve.bids[k]),
            harness::fmt_report_f64(curve.quantities[k]),
            harness::fmt_report_f64(curve.stderr[k])
        ));
    }
    csv.push_str("bid,payment\n");
    for &bid in &curve.bids {
        match myerson_payment_from_curve(&curve, bid) {
            Ok(p) => csv.push_str(&format!(
                "{},{}\n",
                harness::fmt_report_f64(bid),
                harness::fmt_report_f64(p)
            )),
            Err(e) => {
                csv.push_str(&format!("{},{e}\n", harness::fmt_report_f64(bid)));
                break;
            }
        }
    }
    emit(args.out.as_ref(), &csv)?;
    let pairs: Vec<(f64, f64)> = grid.windows(2).map(|w| (w[0], w[1])).collect();
    let probe = monotonicity_probe(rule.as_ref(), &pairs, args.trials.min(2000), seed);
    eprintln!(
        "monotonicity checked {} pairs, {} violations",
        probe.checked,
        probe.violations.len()
    );
    Ok(())
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let config: ExperimentConfig = serde_json::from_str(&fs::read_to_string(&args.config)?)
        .context("parsing experiment config")?;
    let rows = harness::run_experiment(&config);
    for row in &rows {
        if let Some(err) = &row.error {
            eprintln!("{} {}: {err}", row.instance_id, row.algo);
        }
    }
    emit(args.out.as_ref(), &rows_to_csv(&rows))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(args) => cmd_gen(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::NnLp(args) => cmd_nn_lp(args),
        Command::Factorized(args) => cmd_factorized(args),
        Command::Ptas(args) => cmd_ptas(args),
        Command::Proddist(args) => cmd_proddist(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Run(args) => cmd_run(args),
    }
}
