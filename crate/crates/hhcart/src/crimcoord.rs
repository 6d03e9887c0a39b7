//! CRIMCOORD encoding: per-node transformation of a qualitative feature's
//! levels into ordered real values, so categorical columns can take part in
//! linear splits. The map fitted at a node is stored on that node and reused
//! verbatim at prediction time.
//!
//! Fitting works on the level-by-class contingency table rather than the raw
//! rows: encode levels as 0/1 indicators, center, whiten the (singular)
//! indicator covariance through an eigen-decomposition of its Gram matrix,
//! and project levels onto the dominant discriminant direction of the
//! class-size-weighted between-class scatter. Because the table is built by
//! integer counting, refitting on permuted rows reproduces the map exactly.

use serde::{Deserialize, Serialize};

use crate::data::{FeatureKind, FeatureSchema, FeatureValue};
use crate::linalg::{dominant_eigen, norm2, symmetric_eigen, Matrix};

/// Level-to-value map for one qualitative feature, fitted at one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrimcoordMap {
    pub feature: String,
    /// Pairs in token-sorted order.
    pub level_values: Vec<(String, f64)>,
    /// Value substituted for levels unseen at fit time.
    pub fallback: f64,
}

impl CrimcoordMap {
    pub fn value_for(&self, level: &str) -> f64 {
        match self.level_values.binary_search_by(|(tok, _)| tok.as_str().cmp(level)) {
            Ok(i) => self.level_values[i].1,
            Err(_) => self.fallback,
        }
    }

    fn constant(feature: &str, levels: &[&str]) -> Self {
        let mut tokens: Vec<String> = levels.iter().map(|s| s.to_string()).collect();
        tokens.sort();
        tokens.dedup();
        CrimcoordMap {
            feature: feature.to_string(),
            level_values: tokens.into_iter().map(|t| (t, 0.0)).collect(),
            fallback: 0.0,
        }
    }
}

/// Fits the CRIMCOORD map for one qualitative column against the class
/// labels present at a node.
pub fn fit_crimcoord(feature: &str, levels: &[&str], y: &[usize], n_classes: usize) -> CrimcoordMap {
    assert_eq!(levels.len(), y.len());
    let n = levels.len();

    // token-sorted level index; independent of row order
    let mut tokens: Vec<&str> = levels.to_vec();
    tokens.sort();
    tokens.dedup();
    let m = tokens.len();
    if m < 2 {
        return CrimcoordMap::constant(feature, levels);
    }
    let level_index = |tok: &str| tokens.binary_search(&tok).expect("token present");

    // contingency table: counts[level][class]
    let mut counts = vec![vec![0usize; n_classes]; m];
    for (tok, &cls) in levels.iter().zip(y) {
        counts[level_index(tok)][cls] += 1;
    }
    let level_totals: Vec<usize> = counts.iter().map(|r| r.iter().sum()).collect();
    let class_totals: Vec<usize> =
        (0..n_classes).map(|c| counts.iter().map(|r| r[c]).sum()).collect();
    if class_totals.iter().filter(|&&c| c > 0).count() < 2 {
        return CrimcoordMap::constant(feature, levels);
    }

    // column means of the indicator matrix
    let means: Vec<f64> = level_totals.iter().map(|&t| t as f64 / n as f64).collect();

    // Gram of the centered indicator matrix: diag(n_l) - n * m m^T
    let mut gram = Matrix::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            let diag = if a == b { level_totals[a] as f64 } else { 0.0 };
            gram.set(a, b, diag - n as f64 * means[a] * means[b]);
        }
    }
    let pairs = match symmetric_eigen(&gram) {
        Ok(p) => p,
        Err(_) => return CrimcoordMap::constant(feature, levels),
    };
    let lambda_max = pairs[0].value.max(0.0);
    if lambda_max == 0.0 {
        return CrimcoordMap::constant(feature, levels);
    }
    // Whitened basis: directions whose singular value clears the rank
    // cutoff. The Gram route squares the singular values, so truly-zero
    // ones surface as eigenvalue noise near 1e-16 * lambda_max; the cutoff
    // runs in eigenvalue space to stay above that noise floor.
    let kept: Vec<(f64, &Vec<f64>)> = pairs
        .iter()
        .filter_map(|p| {
            (p.value > 1e-12 * lambda_max).then_some((p.value.sqrt(), &p.vector))
        })
        .collect();
    if kept.is_empty() {
        return CrimcoordMap::constant(feature, levels);
    }
    let rank = kept.len();

    // class means of the centered indicators, expressed in whitened coords
    let mut class_white: Vec<Vec<f64>> = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        if class_totals[c] == 0 {
            class_white.push(vec![0.0; rank]);
            continue;
        }
        let inv = 1.0 / class_totals[c] as f64;
        let centered: Vec<f64> =
            (0..m).map(|l| counts[l][c] as f64 * inv - means[l]).collect();
        class_white.push(
            kept.iter()
                .map(|(sigma, v)| {
                    let mut acc = 0.0;
                    for l in 0..m {
                        acc += centered[l] * v[l];
                    }
                    acc / sigma
                })
                .collect(),
        );
    }

    // between-class scatter in the whitened space
    let mut scatter = Matrix::zeros(rank, rank);
    for c in 0..n_classes {
        let w = class_totals[c] as f64;
        for a in 0..rank {
            for b in 0..rank {
                scatter.set(
                    a,
                    b,
                    scatter.get(a, b) + w * class_white[c][a] * class_white[c][b],
                );
            }
        }
    }
    let dominant = match dominant_eigen(&scatter) {
        Ok(p) if p.value > 0.0 => p,
        _ => return CrimcoordMap::constant(feature, levels),
    };

    // discriminant direction mapped back to indicator space, then normalized
    let mut direction = vec![0.0; m];
    for (j, (sigma, v)) in kept.iter().enumerate() {
        let w = dominant.vector[j] / sigma;
        for l in 0..m {
            direction[l] += w * v[l];
        }
    }
    let dn = norm2(&direction);
    if dn == 0.0 {
        return CrimcoordMap::constant(feature, levels);
    }
    for d in direction.iter_mut() {
        *d /= dn;
    }

    // CRIMCOORD of a level: centered indicator projected onto the direction
    let mean_proj: f64 = means.iter().zip(&direction).map(|(m, d)| m * d).sum();
    let mut values: Vec<f64> = (0..m).map(|l| direction[l] - mean_proj).collect();

    // sign convention: first token-sorted level with a non-negligible value
    // gets a positive one
    if let Some(v) = values.iter().find(|v| v.abs() > 1e-12) {
        if *v < 0.0 {
            for v in values.iter_mut() {
                *v = -*v;
            }
        }
    }

    CrimcoordMap {
        feature: feature.to_string(),
        level_values: tokens
            .iter()
            .zip(values)
            .map(|(t, v)| (t.to_string(), v))
            .collect(),
        fallback: 0.0,
    }
}

/// Substitutes each qualitative value with its CRIMCOORD; quantitative
/// features pass through. `maps` follow the schema's qualitative features in
/// order and may be empty when the schema has none.
pub fn apply_crimcoords(
    maps: &[CrimcoordMap],
    schema: &FeatureSchema,
    row: &[FeatureValue],
) -> Vec<f64> {
    let mut out = Vec::with_capacity(row.len());
    let mut qual = 0;
    for ((_, kind), value) in schema.features.iter().zip(row) {
        match (kind, value) {
            (FeatureKind::Quantitative, FeatureValue::Num(v)) => out.push(*v),
            (FeatureKind::Qualitative, FeatureValue::Level(tok)) => {
                out.push(maps[qual].value_for(tok));
                qual += 1;
            }
            // schema conformity is checked at ingestion / prediction entry
            (FeatureKind::Quantitative, FeatureValue::Level(_))
            | (FeatureKind::Qualitative, FeatureValue::Num(_)) => {
                unreachable!("row does not conform to schema")
            }
        }
    }
    out
}

/// Fits one map per qualitative feature at a node, in schema order.
pub fn fit_node_maps(
    schema: &FeatureSchema,
    rows: &[&[FeatureValue]],
    y: &[usize],
    n_classes: usize,
) -> Vec<CrimcoordMap> {
    let mut maps = Vec::new();
    for (j, (name, kind)) in schema.features.iter().enumerate() {
        if *kind != FeatureKind::Qualitative {
            continue;
        }
        let levels: Vec<&str> = rows
            .iter()
            .map(|r| match &r[j] {
                FeatureValue::Level(tok) => tok.as_str(),
                FeatureValue::Num(_) => unreachable!("row does not conform to schema"),
            })
            .collect();
        maps.push(fit_crimcoord(name, &levels, y, n_classes));
    }
    maps
}
