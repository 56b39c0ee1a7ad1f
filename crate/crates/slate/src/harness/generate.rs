//! Seeded random inputs: layouts, metrics, instances, bid distributions,
//! graphs and disk-selection problems.

use crate::factorized::ValueDistribution;
use crate::model::{DiscountModel, FactorizedInstance, Instance, Metric, Point};
use crate::nnlp::{GpdsInstance, PseudoDisk};
use crate::proddist::Graph;
use rand::Rng;

/// Uniform points in a square box plus the diameter-normalized metric of
/// their pairwise distances.
pub fn gen_euclidean(m: usize, box_size: f64, rng: &mut impl Rng) -> (Vec<Point>, Metric) {
    let points: Vec<Point> = (0..m)
        .map(|_| Point::new(rng.gen::<f64>() * box_size, rng.gen::<f64>() * box_size))
        .collect();
    let metric = Metric::from_points(&points);
    (points, metric)
}

/// Random symmetric weights closed under shortest paths, rescaled to
/// diameter 1. The closure of a table that is already a metric is the table
/// itself.
pub fn gen_random_metric(m: usize, rng: &mut impl Rng) -> Metric {
    let mut d = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let w = rng.gen::<f64>();
            d[i][j] = w;
            d[j][i] = w;
        }
    }
    metric_closure_normalized(d)
}

/// Shortest-path closure followed by diameter normalization.
pub fn metric_closure_normalized(mut d: Vec<Vec<f64>>) -> Metric {
    let m = d.len();
    for via in 0..m {
        for a in 0..m {
            for b in 0..m {
                let detour = d[a][via] + d[via][b];
                if detour < d[a][b] {
                    d[a][b] = detour;
                }
            }
        }
    }
    let diam = d.iter().flatten().cloned().fold(0.0f64, f64::max);
    if diam > 0.0 {
        for row in d.iter_mut() {
            for v in row.iter_mut() {
                *v /= diam;
            }
        }
    }
    Metric::from_rows(d).expect("closure yields a square finite table")
}

pub fn gen_nn_instance(n: usize, m: usize, rng: &mut impl Rng) -> Instance {
    let metric = gen_random_metric(m, rng);
    let values: Vec<Vec<f64>> =
        (0..n).map(|_| (0..m).map(|_| rng.gen::<f64>()).collect()).collect();
    Instance::new(values, metric, DiscountModel::NearestNeighbor).expect("generated values are valid")
}

pub fn gen_pd_instance(n: usize, m: usize, rng: &mut impl Rng) -> Instance {
    let metric = gen_random_metric(m, rng);
    let values: Vec<Vec<f64>> =
        (0..n).map(|_| (0..m).map(|_| rng.gen::<f64>()).collect()).collect();
    Instance::new(values, metric, DiscountModel::ProductDistance).expect("generated values are valid")
}

pub fn gen_factorized(n: usize, m: usize, rng: &mut impl Rng) -> FactorizedInstance {
    let metric = gen_random_metric(m, rng);
    let u: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    FactorizedInstance::new(u, w, metric).expect("generated weights are valid")
}

/// A random bid distribution of a random kind with values in [0, 2].
pub fn gen_distribution(rng: &mut impl Rng) -> ValueDistribution {
    match rng.gen_range(0..4) {
        0 => ValueDistribution::PointMass { value: 2.0 * rng.gen::<f64>() },
        1 => {
            let lo = rng.gen::<f64>();
            ValueDistribution::Uniform { lo, hi: lo + rng.gen::<f64>() }
        }
        2 => {
            let len = rng.gen_range(2..=4);
            let support: Vec<f64> = (0..len).map(|_| 2.0 * rng.gen::<f64>()).collect();
            let raw: Vec<f64> = (0..len).map(|_| rng.gen::<f64>() + 0.05).collect();
            let total: f64 = raw.iter().sum();
            let mut probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
            let correction: f64 = probs.iter().sum::<f64>() - 1.0;
            probs[0] -= correction;
            ValueDistribution::Discrete { support, probs }
        }
        _ => {
            let len = rng.gen_range(3..=8);
            ValueDistribution::Empirical {
                samples: (0..len).map(|_| 2.0 * rng.gen::<f64>()).collect(),
            }
        }
    }
}

pub fn gen_distribution_profile(n: usize, rng: &mut impl Rng) -> Vec<ValueDistribution> {
    (0..n).map(|_| gen_distribution(rng)).collect()
}

/// Erdos-Renyi graph with edge probability `p`.
pub fn gen_graph(vertices: usize, p: f64, rng: &mut impl Rng) -> Graph {
    let mut edges = Vec::new();
    for u in 0..vertices {
        for v in u + 1..vertices {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(vertices, &edges).expect("generated edges are in range")
}

/// Random grouped pseudo-disk instance over a random metric.
pub fn gen_gpds(
    disks: usize,
    groups: usize,
    points: usize,
    rng: &mut impl Rng,
) -> GpdsInstance {
    let metric = gen_random_metric(points, rng);
    let mut group_lists = vec![Vec::new(); groups];
    let disk_list: Vec<PseudoDisk> = (0..disks)
        .map(|i| {
            group_lists[rng.gen_range(0..groups)].push(i);
            PseudoDisk {
                center: rng.gen_range(0..points),
                radius: rng.gen::<f64>() * 0.6,
                weight: rng.gen::<f64>(),
                tag: (0, 0, 0),
            }
        })
        .collect();
    GpdsInstance { disks: disk_list, groups: group_lists, metric }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_metric;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn euclidean_metrics_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in 1..=8 {
            let (_, metric) = gen_euclidean(m, 10.0, &mut rng);
            assert!(validate_metric(&metric).is_ok());
            if m >= 2 {
                assert_eq!(metric.diameter(), 1.0);
            }
        }
    }

    #[test]
    fn closure_metrics_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in 1..=8 {
            let metric = gen_random_metric(m, &mut rng);
            assert!(validate_metric(&metric).is_ok());
        }
    }

    #[test]
    fn two_points_normalize_to_distance_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let metric = gen_random_metric(2, &mut rng);
        assert_eq!(metric.dist(0, 1), 1.0);
        let (_, euclid) = gen_euclidean(2, 5.0, &mut rng);
        assert_eq!(euclid.dist(0, 1), 1.0);
    }

    #[test]
    fn closure_is_identity_on_metrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let metric = gen_random_metric(5, &mut rng);
        let closed = metric_closure_normalized(metric.rows());
        for i in 0..5 {
            for j in 0..5 {
                assert!((closed.dist(i, j) - metric.dist(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn distributions_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            gen_distribution(&mut rng).validate().unwrap();
        }
    }
}
