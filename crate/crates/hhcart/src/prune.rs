//! Cost-complexity pruning: weakest-link generation of the nested subtree
//! sequence, then minimum-error selection on a held-out pruning set (the
//! zero-standard-error rule, ties broken toward fewer leaves).
//!
//! Link strengths g(t) = (R(t) - R(T_t)) / (|T_t| - 1) are ratios of
//! training error counts, so they are compared as exact integer fractions;
//! collapsing every minimizer per round keeps the alpha ladder strictly
//! increasing.

use crate::data::Dataset;
use crate::exec;
use crate::tree::{NodeKind, Tree, TreeError, TreeNode};

/// Exact nonnegative fraction for link-strength comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Frac {
    num: u64,
    den: u64,
}

impl Frac {
    const ZERO: Frac = Frac { num: 0, den: 1 };

    fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn cmp(self, other: Frac) -> std::cmp::Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

#[derive(Debug, Clone)]
pub struct PruneEntry {
    pub tree: Tree,
    pub alpha: f64,
}

/// Nested subtrees ordered by increasing complexity penalty; the first entry
/// is the alpha = 0 optimum and the last is the root-only tree.
#[derive(Debug, Clone)]
pub struct PruneSequence {
    pub entries: Vec<PruneEntry>,
}

impl PruneSequence {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Subtree error (misclassification count on the grow set) and leaf count,
/// honoring collapse markers.
fn subtree_stats(nodes: &[TreeNode], collapsed: &[bool], id: usize) -> (u64, u64) {
    match &nodes[id].kind {
        NodeKind::Leaf { .. } => (nodes[id].stats.error_count() as u64, 1),
        NodeKind::Internal { left, right, .. } => {
            if collapsed[id] {
                (nodes[id].stats.error_count() as u64, 1)
            } else {
                let (el, ll) = subtree_stats(nodes, collapsed, *left);
                let (er, lr) = subtree_stats(nodes, collapsed, *right);
                (el + er, ll + lr)
            }
        }
    }
}

fn reachable_internal(nodes: &[TreeNode], collapsed: &[bool]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![0usize];
    while let Some(id) = stack.pop() {
        if collapsed[id] {
            continue;
        }
        if let NodeKind::Internal { left, right, .. } = &nodes[id].kind {
            out.push(id);
            stack.push(*left);
            stack.push(*right);
        }
    }
    out
}

/// Rebuilds a standalone tree from the collapse markers, renumbering nodes
/// in preorder. Collapsed internals become leaves labeled by majority class.
fn materialize(tree: &Tree, collapsed: &[bool]) -> Tree {
    fn copy(src: &[TreeNode], collapsed: &[bool], id: usize, out: &mut Vec<TreeNode>) -> usize {
        let new_id = out.len();
        let node = &src[id];
        out.push(TreeNode {
            id: new_id,
            kind: NodeKind::Leaf { label: node.stats.majority() },
            stats: node.stats.clone(),
        });
        if let NodeKind::Internal { split, left, right } = &node.kind {
            if !collapsed[id] {
                let split = split.clone();
                let l = copy(src, collapsed, *left, out);
                let r = copy(src, collapsed, *right, out);
                out[new_id].kind = NodeKind::Internal { split, left: l, right: r };
            }
        }
        new_id
    }
    let mut nodes = Vec::new();
    copy(&tree.nodes, collapsed, 0, &mut nodes);
    Tree {
        nodes,
        schema: tree.schema.clone(),
        classes: tree.classes.clone(),
        params: tree.params,
    }
}

/// Weakest-link pruning of a grown tree. Node statistics recorded during
/// growth supply the training error counts, so the grow set itself is not
/// needed again.
pub fn prune_sequence(tree: &Tree) -> PruneSequence {
    let mut collapsed = vec![false; tree.nodes.len()];
    let mut entries =
        vec![PruneEntry { tree: tree.clone(), alpha: 0.0 }];
    let mut last_alpha = Frac::ZERO;

    loop {
        let internal = reachable_internal(&tree.nodes, &collapsed);
        if internal.is_empty() {
            break;
        }
        let links: Vec<(usize, Frac)> = internal
            .iter()
            .map(|&id| {
                let (sub_err, leaves) = subtree_stats(&tree.nodes, &collapsed, id);
                let node_err = tree.nodes[id].stats.error_count() as u64;
                // leaf errors never exceed the node's own error
                let g = Frac { num: node_err.saturating_sub(sub_err), den: leaves - 1 };
                (id, g)
            })
            .collect();
        let gmin = links
            .iter()
            .map(|(_, g)| *g)
            .min_by(|a, b| a.cmp(*b))
            .expect("nonempty");
        for (id, g) in &links {
            if g.cmp(gmin).is_eq() {
                collapsed[*id] = true;
            }
        }
        let entry = PruneEntry { tree: materialize(tree, &collapsed), alpha: gmin.as_f64() };
        if gmin.cmp(last_alpha).is_eq() {
            // zero-strength links collapse into the alpha = 0 optimum; by the
            // weakest-link lemma later rounds are strictly larger
            *entries.last_mut().expect("nonempty") = entry;
        } else {
            entries.push(entry);
        }
        last_alpha = gmin;
    }
    PruneSequence { entries }
}

#[derive(Debug)]
pub struct Selection {
    pub tree: Tree,
    /// Index into the sequence that was chosen.
    pub index: usize,
    /// Prune-set misclassification count per sequence entry.
    pub errors: Vec<usize>,
    /// True when no pruning data was available and the full tree was kept.
    pub prune_set_empty: bool,
}

/// Minimum prune-set error over the sequence; ties go to the smallest tree.
/// An empty prune set keeps the first (alpha = 0) entry, flagged.
pub fn select_subtree(
    seq: &PruneSequence,
    ds: &Dataset,
    prune_rows: &[usize],
) -> Result<Selection, TreeError> {
    assert!(!seq.is_empty());
    if prune_rows.is_empty() {
        return Ok(Selection {
            tree: seq.entries[0].tree.clone(),
            index: 0,
            errors: Vec::new(),
            prune_set_empty: true,
        });
    }
    let errors: Vec<Result<usize, TreeError>> = exec::map(
        seq.entries.iter().collect::<Vec<_>>(),
        |entry| entry.tree.error_count(ds, prune_rows),
    );
    let errors: Vec<usize> = errors.into_iter().collect::<Result<_, _>>()?;
    let mut best = 0;
    for (i, &err) in errors.iter().enumerate() {
        let better = err < errors[best]
            || (err == errors[best]
                && seq.entries[i].tree.size() < seq.entries[best].tree.size());
        if better {
            best = i;
        }
    }
    Ok(Selection {
        tree: seq.entries[best].tree.clone(),
        index: best,
        errors,
        prune_set_empty: false,
    })
}
