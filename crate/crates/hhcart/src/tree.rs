//! Recursive tree induction, prediction, and model persistence.
//!
//! Nodes live in a flat arena indexed by id (preorder). A node becomes a
//! leaf when its misclassification rate drops to MisRate, its example count
//! drops to MinParent, or no valid split exists. Each internal node stores
//! the CRIMCOORD maps fitted from its own examples; prediction re-applies
//! exactly those maps while routing.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crimcoord::{apply_crimcoords, fit_node_maps, CrimcoordMap};
use crate::data::{ClassDictionary, Dataset, FeatureKind, FeatureSchema, FeatureValue};
use crate::linalg::{dot, Matrix};
use crate::splitter::{find_best_split, NodeData, SplitterParams};

pub const MODEL_FORMAT: &str = "hhcart-model/1";

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("row does not conform to the model schema: {0}")]
    SchemaMismatch(String),
    #[error("unsupported model format `{0}` (expected `{MODEL_FORMAT}`)")]
    FormatVersionMismatch(String),
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
}

/// Oblique test `weights . x <= threshold` in the node's effective space,
/// with the CRIMCOORD maps needed to build that space from a raw row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub weights: Vec<f64>,
    pub threshold: f64,
    pub crim_maps: Vec<CrimcoordMap>,
}

impl Split {
    /// True when the row routes left (ties go left).
    pub fn route_left(&self, schema: &FeatureSchema, row: &[FeatureValue]) -> bool {
        let x = apply_crimcoords(&self.crim_maps, schema, row);
        dot(&self.weights, &x) <= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub histogram: Vec<u32>,
    pub n: usize,
    pub mis_rate: f64,
}

impl NodeStats {
    fn from_histogram(histogram: Vec<u32>) -> Self {
        let n: u32 = histogram.iter().sum();
        let max = histogram.iter().copied().max().unwrap_or(0);
        NodeStats {
            histogram,
            n: n as usize,
            mis_rate: if n == 0 { 0.0 } else { 1.0 - max as f64 / n as f64 },
        }
    }

    /// Majority class; ties go to the lowest class index.
    pub fn majority(&self) -> usize {
        let mut best = 0;
        for (c, &count) in self.histogram.iter().enumerate() {
            if count > self.histogram[best] {
                best = c;
            }
        }
        best
    }

    /// Misclassified count when this node predicts its majority class.
    pub fn error_count(&self) -> u32 {
        self.histogram.iter().sum::<u32>() - self.histogram[self.majority()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    Internal { split: Split, left: usize, right: usize },
    Leaf { label: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    pub kind: NodeKind,
    pub stats: NodeStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowParams {
    /// Nodes with at most this many examples become leaves.
    pub min_parent: usize,
    /// Nodes whose misclassification rate is at most this become leaves.
    pub mis_rate: f64,
    pub splitter: SplitterParams,
    pub seed: u64,
}

impl GrowParams {
    pub fn new(splitter: SplitterParams) -> Self {
        GrowParams { min_parent: 2, mis_rate: 0.0, splitter, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    pub schema: FeatureSchema,
    pub classes: ClassDictionary,
    pub params: GrowParams,
}

impl Tree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    /// Number of terminal nodes.
    pub fn size(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], id: usize) -> usize {
            match &nodes[id].kind {
                NodeKind::Leaf { .. } => 0,
                NodeKind::Internal { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    /// Routes a raw row to a leaf and returns the class index.
    pub fn predict(&self, row: &[FeatureValue]) -> Result<usize, TreeError> {
        self.check_row(row)?;
        let mut id = 0;
        loop {
            match &self.nodes[id].kind {
                NodeKind::Leaf { label } => return Ok(*label),
                NodeKind::Internal { split, left, right } => {
                    id = if split.route_left(&self.schema, row) { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_label(&self, row: &[FeatureValue]) -> Result<&str, TreeError> {
        Ok(self.classes.name(self.predict(row)?))
    }

    fn check_row(&self, row: &[FeatureValue]) -> Result<(), TreeError> {
        if row.len() != self.schema.n_features() {
            return Err(TreeError::SchemaMismatch(format!(
                "expected {} features, got {}",
                self.schema.n_features(),
                row.len()
            )));
        }
        for ((name, kind), value) in self.schema.features.iter().zip(row) {
            let ok = matches!(
                (kind, value),
                (FeatureKind::Quantitative, FeatureValue::Num(_))
                    | (FeatureKind::Qualitative, FeatureValue::Level(_))
            );
            if !ok {
                return Err(TreeError::SchemaMismatch(format!(
                    "feature `{name}` has the wrong value kind"
                )));
            }
        }
        Ok(())
    }

    /// Fraction of rows whose prediction matches the stored label.
    pub fn accuracy(&self, ds: &Dataset, rows: &[usize]) -> Result<f64, TreeError> {
        if rows.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0usize;
        for &r in rows {
            if self.predict(&ds.rows[r])? == ds.labels[r] {
                correct += 1;
            }
        }
        Ok(correct as f64 / rows.len() as f64)
    }

    /// Misclassified count over the given rows.
    pub fn error_count(&self, ds: &Dataset, rows: &[usize]) -> Result<usize, TreeError> {
        let mut wrong = 0usize;
        for &r in rows {
            if self.predict(&ds.rows[r])? != ds.labels[r] {
                wrong += 1;
            }
        }
        Ok(wrong)
    }
}

/// Grows a tree on the given rows of the dataset.
pub fn grow(ds: &Dataset, rows: &[usize], params: &GrowParams) -> Tree {
    assert!(!rows.is_empty(), "grow set must be nonempty");
    assert!(params.min_parent >= 2, "MinParent must be at least 2");
    let mut nodes = Vec::new();
    grow_node(ds, rows.to_vec(), params, &mut nodes);
    Tree { nodes, schema: ds.schema.clone(), classes: ds.classes.clone(), params: *params }
}

fn grow_node(
    ds: &Dataset,
    rows: Vec<usize>,
    params: &GrowParams,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let stats = NodeStats::from_histogram(ds.class_histogram(&rows));
    let id = nodes.len();
    nodes.push(TreeNode { id, kind: NodeKind::Leaf { label: stats.majority() }, stats });

    let stop = nodes[id].stats.mis_rate <= params.mis_rate || rows.len() <= params.min_parent;
    if stop {
        return id;
    }

    let raw_rows: Vec<&[FeatureValue]> = rows.iter().map(|&r| ds.rows[r].as_slice()).collect();
    let y: Vec<usize> = rows.iter().map(|&r| ds.labels[r]).collect();
    let maps = if ds.schema.has_qualitative() {
        fit_node_maps(&ds.schema, &raw_rows, &y, ds.n_classes())
    } else {
        Vec::new()
    };
    let effective: Vec<Vec<f64>> =
        raw_rows.iter().map(|r| apply_crimcoords(&maps, &ds.schema, r)).collect();
    let node_data = NodeData::new(Matrix::from_rows(&effective), y, ds.n_classes());

    let candidate = match find_best_split(&node_data, &params.splitter) {
        Ok(c) => c,
        Err(_) => return id,
    };

    let mut left_rows = Vec::new();
    let mut right_rows = Vec::new();
    for (i, &row) in rows.iter().enumerate() {
        if dot(&candidate.weights, node_data.x.row(i)) <= candidate.threshold {
            left_rows.push(row);
        } else {
            right_rows.push(row);
        }
    }
    // midpoint thresholds keep both sides nonempty; guard anyway
    if left_rows.is_empty() || right_rows.is_empty() {
        return id;
    }

    let split =
        Split { weights: candidate.weights, threshold: candidate.threshold, crim_maps: maps };
    let left = grow_node(ds, left_rows, params, nodes);
    let right = grow_node(ds, right_rows, params, nodes);
    nodes[id].kind = NodeKind::Internal { split, left, right };
    id
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    format_version: String,
    #[serde(flatten)]
    tree: Tree,
}

/// Writes the model as a versioned JSON document. Numbers use the shortest
/// decimal form that round-trips the exact 64-bit value.
pub fn save(tree: &Tree, path: impl AsRef<Path>) -> Result<(), TreeError> {
    let doc = ModelDoc { format_version: MODEL_FORMAT.to_string(), tree: tree.clone() };
    let file = File::create(path)?;
    serde_json::to_writer_pretty(BufWriter::new(file), &doc)
        .map_err(|e| TreeError::CorruptModel(e.to_string()))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Tree, TreeError> {
    let file = File::open(path)?;
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| TreeError::CorruptModel(e.to_string()))?;
    match value.get("format_version").and_then(|v| v.as_str()) {
        Some(MODEL_FORMAT) => {}
        Some(other) => return Err(TreeError::FormatVersionMismatch(other.to_string())),
        None => return Err(TreeError::CorruptModel("missing format_version".into())),
    }
    let doc: ModelDoc =
        serde_json::from_value(value).map_err(|e| TreeError::CorruptModel(e.to_string()))?;
    validate(&doc.tree)?;
    Ok(doc.tree)
}

fn validate(tree: &Tree) -> Result<(), TreeError> {
    if tree.nodes.is_empty() {
        return Err(TreeError::CorruptModel("no nodes".into()));
    }
    let n_classes = tree.classes.len();
    for (i, node) in tree.nodes.iter().enumerate() {
        if node.id != i {
            return Err(TreeError::CorruptModel(format!("node {i} has id {}", node.id)));
        }
        match &node.kind {
            NodeKind::Leaf { label } => {
                if *label >= n_classes {
                    return Err(TreeError::CorruptModel(format!("leaf label {label} out of range")));
                }
            }
            NodeKind::Internal { left, right, split } => {
                if *left >= tree.nodes.len() || *right >= tree.nodes.len() {
                    return Err(TreeError::CorruptModel("child index out of range".into()));
                }
                if split.weights.len() != tree.schema.n_features() {
                    return Err(TreeError::CorruptModel("weight vector length mismatch".into()));
                }
            }
        }
    }
    Ok(())
}
