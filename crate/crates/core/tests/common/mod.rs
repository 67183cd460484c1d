//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use fairover::dataset::{make_synthetic_dataset, GaussianCluster, SyntheticSpec};
use fairover::{ClusterKey, Dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Isotropic Gaussian clusters. Class 1 sits at +1 and class 0 at -1 on the
/// first axis; each group gets its own offset on the remaining axes.
pub fn gaussian(sizes: &[(u8, usize, usize)], d: usize, seed: u64) -> Dataset {
    let mut offsets = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
    let m = sizes.iter().map(|s| s.1).max().unwrap() + 1;
    let group_offset: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..d).map(|_| offsets.random_range(-1.0..1.0)).collect())
        .collect();
    let clusters = sizes
        .iter()
        .map(|&(y, g, n)| {
            let mut mean = group_offset[g].clone();
            mean[0] += if y == 1 { 1.0 } else { -1.0 };
            GaussianCluster::isotropic(ClusterKey::new(y, g), n, mean, 1.0)
        })
        .collect();
    make_synthetic_dataset(&SyntheticSpec { clusters, seed }).unwrap()
}

/// A random dataset with 2 classes, 2 to `max_groups` groups and every
/// cluster between `lo` and `hi` instances.
pub fn random_clusters(rng: &mut ChaCha8Rng, max_groups: usize, lo: usize, hi: usize) -> Dataset {
    let m = rng.random_range(2..=max_groups);
    let d = rng.random_range(2..=5);
    let mut sizes = Vec::new();
    for g in 0..m {
        for y in [1u8, 0] {
            sizes.push((y, g, rng.random_range(lo..=hi)));
        }
    }
    gaussian(&sizes, d, rng.random())
}

/// Appends the group id as a trailing feature column and marks it protected.
pub fn with_group_feature(base: &Dataset) -> Dataset {
    let d = base.d();
    let mut features = Vec::with_capacity(base.n() * (d + 1));
    for i in 0..base.n() {
        features.extend_from_slice(base.row(i));
        features.push(base.group(i) as f64);
    }
    let mut meta = base.meta().clone();
    meta.feature_names.push("group".into());
    meta.protected_features = vec![d];
    Dataset::with_meta(
        features,
        d + 1,
        base.labels().to_vec(),
        base.groups().to_vec(),
        base.m(),
        meta,
    )
    .unwrap()
}

/// Cluster sizes {(1,0):500, (0,0):300, (1,1):150, (0,1):30}. Class means are
/// ±1 on the first axis and group 1 is shifted by (-0.5, +1). The group id is
/// also a feature, as in tabular fairness data.
pub fn directional_fixture(seed: u64) -> Dataset {
    let sizes = [((1u8, 0usize), 500usize), ((0, 0), 300), ((1, 1), 150), ((0, 1), 30)];
    let clusters = sizes
        .iter()
        .map(|&((y, g), n)| {
            let shift = if g == 1 { [-0.5, 1.0] } else { [0.0, 0.0] };
            let mean = vec![if y == 1 { 1.0 } else { -1.0 } + shift[0], shift[1]];
            GaussianCluster::isotropic(ClusterKey::new(y, g), n, mean, 1.0)
        })
        .collect();
    let base = make_synthetic_dataset(&SyntheticSpec { clusters, seed }).unwrap();
    with_group_feature(&base)
}

/// Exhaustive K-nearest-neighbor search: sort every other row by
/// (distance, index) and keep the first `min(k, n - 1)`.
pub fn brute_knn(ds: &Dataset, i: usize, k: usize) -> (Vec<usize>, Vec<f64>) {
    let xi = ds.row(i);
    let mut all: Vec<(f64, usize)> = (0..ds.n())
        .filter(|&j| j != i)
        .map(|j| {
            let s: f64 = xi.iter().zip(ds.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            (s.sqrt(), j)
        })
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    all.truncate(k.min(ds.n() - 1));
    (all.iter().map(|p| p.1).collect(), all.iter().map(|p| p.0).collect())
}

/// Same-class share of the brute-force neighbor list.
pub fn brute_density(ds: &Dataset, i: usize, k: usize) -> f64 {
    let (idx, _) = brute_knn(ds, i, k);
    let same = idx.iter().filter(|&&j| ds.label(j) == ds.label(i)).count();
    same as f64 / idx.len() as f64
}

pub const GERMAN_GROUPS: [usize; 4] = [490, 139, 200, 171];
const GERMAN_BAD: [usize; 4] = [147, 42, 60, 51];

/// Writes a 1000-row stand-in with the German Credit shape: 28 numeric
/// attributes plus two binary protected columns (sex, age over 30) forming 4
/// groups, 300 bad and 700 good outcomes. Returns the schema text.
pub fn write_german_surrogate(csv_path: &Path, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for k in 0..28 {
        let _ = write!(out, "a{k},");
    }
    out.push_str("sex,age_over_30,risk\n");
    let codes = [(0, 1), (1, 1), (0, 0), (1, 0)];
    for g in 0..4 {
        for r in 0..GERMAN_GROUPS[g] {
            let good = r >= GERMAN_BAD[g];
            for k in 0..28 {
                let signal = if k < 8 && good { 0.6 } else { 0.0 };
                let shift = if k % 7 == 0 { 0.3 * g as f64 } else { 0.0 };
                let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                let _ = write!(out, "{:.6},", z + signal + shift);
            }
            let _ = writeln!(out, "{},{},{}", codes[g].0, codes[g].1, if good { "good" } else { "bad" });
        }
    }
    std::fs::write(csv_path, out).unwrap();
    let mut schema = String::from("label_column = \"risk\"\npositive_label = \"good\"\n");
    schema.push_str("group_columns = [\"sex\", \"age_over_30\"]\nfeature_columns = [");
    let cols: Vec<String> = (0..28)
        .map(|k| format!("\"a{k}\""))
        .chain(["\"sex\"".to_string(), "\"age_over_30\"".to_string()])
        .collect();
    schema.push_str(&cols.join(", "));
    schema.push_str("]\n");
    schema
}
