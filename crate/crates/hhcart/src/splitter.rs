//! Split search at a node: Twoing impurity, exhaustive axis-parallel sweep,
//! and the oblique search that reflects the node's examples with Householder
//! matrices built from class covariance eigenvectors. Axis-parallel splits
//! found in a reflected space are oblique in the original space; the split
//! weights are the corresponding column of H.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::linalg::{covariance, householder, reflect, symmetric_eigen, Matrix};

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("no valid split: features constant or a single class present")]
    NoValidSplit,
}

/// Which eigenvectors seed reflections: all of them per class (A), the
/// dominant one per class (D), or none at all (the axis-parallel baseline).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    A,
    D,
    AxisParallel,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::A => write!(f, "A"),
            Variant::D => write!(f, "D"),
            Variant::AxisParallel => write!(f, "AP"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Impurity {
    Twoing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitterParams {
    pub variant: Variant,
    /// Eigenvectors within tau of a feature axis (either sign) skip the
    /// reflection; the axis-parallel search already covers them.
    pub tau: f64,
    /// Reflections run only when the node holds more than
    /// `min_oblique_n * p` examples.
    pub min_oblique_n: usize,
    pub impurity: Impurity,
}

impl SplitterParams {
    pub fn new(variant: Variant) -> Self {
        SplitterParams { variant, tau: 0.05, min_oblique_n: 2, impurity: Impurity::Twoing }
    }
}

impl Default for SplitterParams {
    fn default() -> Self {
        SplitterParams::new(Variant::A)
    }
}

/// Examples at a node in their effective quantitative space (qualitative
/// features already replaced by CRIMCOORDs).
#[derive(Debug, Clone)]
pub struct NodeData {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub n_classes: usize,
}

impl NodeData {
    pub fn new(x: Matrix, y: Vec<usize>, n_classes: usize) -> Self {
        assert_eq!(x.nrows(), y.len());
        assert!(x.nrows() >= 1 && x.ncols() >= 1);
        NodeData { x, y, n_classes }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn histogram(&self) -> Vec<u32> {
        let mut hist = vec![0u32; self.n_classes];
        for &c in &self.y {
            hist[c] += 1;
        }
        hist
    }
}

/// Left/right class counts for a candidate split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCounts {
    pub left: Vec<u32>,
    pub right: Vec<u32>,
}

/// Twoing impurity reduction:
/// (P_L * P_R / 4) * (sum_c |p(c|L) - p(c|R)|)^2.
/// An empty side yields 0 (the split is rejected).
pub fn twoing_gain(counts: &ClassCounts) -> f64 {
    twoing(&counts.left, &counts.right)
}

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

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitOrigin {
    AxisParallel,
    Reflection { class: usize, eigen: usize },
}

impl SplitOrigin {
    fn rank(&self) -> (u8, usize, usize) {
        match self {
            SplitOrigin::AxisParallel => (0, 0, 0),
            SplitOrigin::Reflection { class, eigen } => (1, *class, *eigen),
        }
    }
}

/// Best split found at a node: unit weight vector, threshold `c` with
/// `w . x <= c` routing left, and the impurity reduction it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSplit {
    pub weights: Vec<f64>,
    pub threshold: f64,
    pub gain: f64,
    pub origin: SplitOrigin,
    /// Axis index in the space the sweep ran in (original or reflected).
    pub axis: usize,
}

/// Deterministic preference order: larger gain, then axis-parallel over
/// reflected, then lower class / eigen / axis index, then smaller threshold.
fn cmp_candidates(a: &CandidateSplit, b: &CandidateSplit) -> Ordering {
    b.gain
        .partial_cmp(&a.gain)
        .unwrap()
        .then_with(|| a.origin.rank().cmp(&b.origin.rank()))
        .then_with(|| a.axis.cmp(&b.axis))
        .then_with(|| a.threshold.partial_cmp(&b.threshold).unwrap())
}

/// Midpoint of two distinct consecutive sorted values, clamped so that
/// `x <= threshold` puts `lo` (and everything below) on the left.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = (lo + hi) / 2.0;
    if m < hi {
        m
    } else {
        lo
    }
}

/// Sorted sweep over every axis of `x`: thresholds at midpoints between
/// consecutive distinct values, class counts updated incrementally.
fn axis_sweep(x: &Matrix, y: &[usize], n_classes: usize) -> Option<(usize, f64, f64)> {
    let n = x.nrows();
    let p = x.ncols();
    let mut hist = vec![0u32; n_classes];
    for &c in y {
        hist[c] += 1;
    }
    let mut best: Option<(usize, f64, f64)> = None;
    let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(n);
    for axis in 0..p {
        pairs.clear();
        pairs.extend((0..n).map(|i| (x.get(i, axis), y[i])));
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut left = vec![0u32; n_classes];
        let mut right = hist.clone();
        for i in 0..n - 1 {
            let c = pairs[i].1;
            left[c] += 1;
            right[c] -= 1;
            if pairs[i].0 < pairs[i + 1].0 {
                let gain = twoing(&left, &right);
                let threshold = midpoint(pairs[i].0, pairs[i + 1].0);
                let better = match &best {
                    None => true,
                    // thresholds ascend within an axis and axes ascend, so
                    // strict improvement is the whole tie-break here
                    Some((_, _, g)) => gain > *g,
                };
                if better {
                    best = Some((axis, threshold, gain));
                }
            }
        }
    }
    best
}

fn unit_axis(p: usize, axis: usize) -> Vec<f64> {
    let mut w = vec![0.0; p];
    w[axis] = 1.0;
    w
}

/// Exhaustive axis-parallel search in the node's own space.
pub fn best_axis_parallel(node: &NodeData) -> Result<CandidateSplit, SplitError> {
    let hist = node.histogram();
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(SplitError::NoValidSplit);
    }
    axis_sweep(&node.x, &node.y, node.n_classes)
        .map(|(axis, threshold, gain)| CandidateSplit {
            weights: unit_axis(node.p(), axis),
            threshold,
            gain,
            origin: SplitOrigin::AxisParallel,
            axis,
        })
        .ok_or(SplitError::NoValidSplit)
}

/// A reflection the oblique search will evaluate: eigenvector `direction`
/// of class `class`'s covariance (its `eigen`-th pair, sorted by eigenvalue
/// descending).
#[derive(Debug, Clone)]
pub struct ReflectionCandidate {
    pub class: usize,
    pub eigen: usize,
    pub direction: Vec<f64>,
}

fn within_tau_of_an_axis(d: &[f64], tau: f64) -> bool {
    let p = d.len();
    for k in 0..p {
        let mut minus = 0.0;
        let mut plus = 0.0;
        for j in 0..p {
            let e = if j == k { 1.0 } else { 0.0 };
            minus += (e - d[j]) * (e - d[j]);
            plus += (e + d[j]) * (e + d[j]);
        }
        if minus.sqrt() <= tau || plus.sqrt() <= tau {
            return true;
        }
    }
    false
}

/// Enumerates the reflections the oblique search evaluates at this node.
/// Classes with fewer than two distinct feature vectors are skipped, as are
/// eigenvectors with (numerically) zero eigenvalue and eigenvectors within
/// tau of a feature axis.
pub fn reflection_candidates(node: &NodeData, params: &SplitterParams) -> Vec<ReflectionCandidate> {
    if params.variant == Variant::AxisParallel {
        return Vec::new();
    }
    if node.n() <= params.min_oblique_n * node.p() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let hist = node.histogram();
    for class in 0..node.n_classes {
        if hist[class] < 2 {
            continue;
        }
        let rows: Vec<&[f64]> = (0..node.n())
            .filter(|&i| node.y[i] == class)
            .map(|i| node.x.row(i))
            .collect();
        let cov = match covariance(&rows) {
            Ok(c) if !c.degenerate => c,
            _ => continue,
        };
        let pairs = match symmetric_eigen(&cov.s) {
            Ok(p) => p,
            // failed eigen analysis falls back to axis-parallel for this class
            Err(_) => continue,
        };
        let lambda_max = pairs[0].value;
        let take = match params.variant {
            Variant::D => 1,
            _ => pairs.len(),
        };
        for (eigen, pair) in pairs.iter().take(take).enumerate() {
            if pair.value <= 1e-9 * lambda_max.max(1.0) {
                continue;
            }
            if within_tau_of_an_axis(&pair.vector, params.tau) {
                continue;
            }
            out.push(ReflectionCandidate { class, eigen, direction: pair.vector.clone() });
        }
    }
    out
}

fn evaluate_reflection(node: &NodeData, cand: ReflectionCandidate) -> Option<CandidateSplit> {
    let h = householder(&cand.direction).ok()?;
    let reflected = reflect(&node.x, &h).ok()?;
    let (axis, threshold, gain) = axis_sweep(&reflected, &node.y, node.n_classes)?;
    Some(CandidateSplit {
        weights: h.h.column(axis),
        threshold,
        gain,
        origin: SplitOrigin::Reflection { class: cand.class, eigen: cand.eigen },
        axis,
    })
}

/// The full search at a node. Axis-parallel splits in the original space are
/// always evaluated; reflections are added per the variant, the tau check,
/// and the small-sample rules. The result is never worse than the best
/// axis-parallel split.
pub fn find_best_split(
    node: &NodeData,
    params: &SplitterParams,
) -> Result<CandidateSplit, SplitError> {
    let hist = node.histogram();
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(SplitError::NoValidSplit);
    }
    let base = axis_sweep(&node.x, &node.y, node.n_classes).map(|(axis, threshold, gain)| {
        CandidateSplit {
            weights: unit_axis(node.p(), axis),
            threshold,
            gain,
            origin: SplitOrigin::AxisParallel,
            axis,
        }
    });
    let reflections = reflection_candidates(node, params);
    let evaluated = exec::map(reflections, |cand| evaluate_reflection(node, cand));
    base.into_iter()
        .chain(evaluated.into_iter().flatten())
        .min_by(cmp_candidates)
        .ok_or(SplitError::NoValidSplit)
}
