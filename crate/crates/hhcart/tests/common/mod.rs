//! Shared helpers for the integration suites: dataset paths, synthetic node
//! generation, and an independent brute-force re-check of the split search.

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use hhcart::data::{load_csv, load_schema, Dataset};
use hhcart::linalg::{householder, reflect, Matrix};
use hhcart::splitter::{reflection_candidates, NodeData, SplitterParams};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn load_dataset(stem: &str) -> Dataset {
    let dir = data_dir();
    let schema = load_schema(dir.join(format!("{stem}.schema")))
        .unwrap_or_else(|e| panic!("schema for {stem}: {e}"));
    load_csv(dir.join(format!("{stem}.csv")), &schema)
        .unwrap_or_else(|e| panic!("data for {stem}: {e}"))
}

/// Root-node view of a quantitative dataset.
pub fn root_node(ds: &Dataset) -> NodeData {
    let rows: Vec<Vec<f64>> = ds
        .rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|v| match v {
                    hhcart::FeatureValue::Num(x) => *x,
                    hhcart::FeatureValue::Level(_) => panic!("quantitative dataset expected"),
                })
                .collect()
        })
        .collect();
    NodeData::new(Matrix::from_rows(&rows), ds.labels.clone(), ds.n_classes())
}

/// Random mixed-class node with mildly separated Gaussian blobs.
pub fn random_node(rng: &mut ChaCha8Rng, max_n: usize, max_p: usize, max_c: usize) -> NodeData {
    let p = rng.gen_range(1..=max_p);
    let c = rng.gen_range(2..=max_c);
    let n = rng.gen_range((c * 2).max(5)..=max_n);
    let means: Vec<Vec<f64>> = (0..c)
        .map(|_| (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect())
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % c;
        rows.push(
            means[class]
                .iter()
                .map(|m| m + rng.gen_range(-1.5..1.5))
                .collect::<Vec<f64>>(),
        );
        y.push(class);
    }
    NodeData::new(Matrix::from_rows(&rows), y, c)
}

// own copy of the impurity formula, kept in the same arithmetic order
fn twoing(left: &[u32], right: &[u32]) -> f64 {
    let n_l: u32 = left.iter().sum();
    let n_r: u32 = right.iter().sum();
    if n_l == 0 || n_r == 0 {
        return 0.0;
    }
    let n_l = n_l as f64;
    let n_r = n_r as f64;
    let n = n_l + n_r;
    let p_l = n_l / n;
    let p_r = n_r / n;
    let mut s = 0.0;
    for c in 0..left.len() {
        s += (left[c] as f64 / n_l - right[c] as f64 / n_r).abs();
    }
    p_l * p_r / 4.0 * (s * s)
}

/// All threshold gains along one value vector, counted naively per
/// threshold.
fn gains_along(vals: &[f64], y: &[usize], n_classes: usize) -> Vec<f64> {
    let mut sorted = vals.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    let mut out = Vec::new();
    for w in sorted.windows(2) {
        let mid = (w[0] + w[1]) / 2.0;
        let thr = if mid < w[1] { mid } else { w[0] };
        let mut left = vec![0u32; n_classes];
        let mut right = vec![0u32; n_classes];
        for (v, &c) in vals.iter().zip(y) {
            if *v <= thr {
                left[c] += 1;
            } else {
                right[c] += 1;
            }
        }
        out.push(twoing(&left, &right));
    }
    out
}

/// Exhaustive maximum gain over the axis-parallel splits and every
/// hyperplane the oblique search evaluates (columns of each Householder
/// matrix), re-deriving every threshold and every count from scratch.
pub fn brute_force_best_gain(node: &NodeData, params: &SplitterParams) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut consider = |g: f64| {
        if best.is_none() || g > best.unwrap() {
            best = Some(g);
        }
    };
    for axis in 0..node.p() {
        let vals: Vec<f64> = (0..node.n()).map(|i| node.x.get(i, axis)).collect();
        for g in gains_along(&vals, &node.y, node.n_classes) {
            consider(g);
        }
    }
    for cand in reflection_candidates(node, params) {
        let h = householder(&cand.direction).expect("tau check keeps d away from e1");
        let reflected = reflect(&node.x, &h).expect("dimensions match");
        for axis in 0..node.p() {
            let vals: Vec<f64> = (0..node.n()).map(|i| reflected.get(i, axis)).collect();
            for g in gains_along(&vals, &node.y, node.n_classes) {
                consider(g);
            }
        }
    }
    best
}

/// Largest axis-parallel gain in the original space, via the naive route.
pub fn brute_force_axis_gain(node: &NodeData) -> Option<f64> {
    let mut best: Option<f64> = None;
    for axis in 0..node.p() {
        let vals: Vec<f64> = (0..node.n()).map(|i| node.x.get(i, axis)).collect();
        for g in gains_along(&vals, &node.y, node.n_classes) {
            if best.is_none() || g > best.unwrap() {
                best = Some(g);
            }
        }
    }
    best
}
