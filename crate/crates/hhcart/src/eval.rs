//! Experimental harness: repeated stratified k-fold cross-validation with a
//! per-fold pruning holdout, fixed train/test evaluation, and single-node
//! scaling probes. Fold jobs are independent and run through [`exec::map`];
//! aggregation is a deterministic reduction keyed by (repeat, fold), so the
//! report does not depend on thread count.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::{split_holdout_rows, DataError, Dataset};
use crate::exec;
use crate::linalg::Matrix;
use crate::prune::{prune_sequence, select_subtree};
use crate::splitter::{find_best_split, NodeData, SplitterParams, Variant};
use crate::tree::{grow, GrowParams, Tree, TreeError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("train and test schemas differ")]
    SchemaMismatch,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    pub folds: usize,
    pub repeats: usize,
    pub prune_fraction: f64,
    pub seed: u64,
    pub grow: GrowParams,
}

impl EvalConfig {
    /// Defaults: ten five-fold CVs, MinParent = 2, MisRate = 0, tau = 0.05,
    /// 10% pruning holdout.
    pub fn new(variant: Variant) -> Self {
        EvalConfig {
            folds: 5,
            repeats: 10,
            prune_fraction: 0.1,
            seed: 0,
            grow: GrowParams::new(SplitterParams::new(variant)),
        }
    }

    pub fn variant(&self) -> Variant {
        self.grow.splitter.variant
    }

    fn validate(&self) -> Result<(), EvalError> {
        if self.folds < 2 {
            return Err(EvalError::InvalidConfig("folds must be at least 2".into()));
        }
        if self.repeats < 1 {
            return Err(EvalError::InvalidConfig("repeats must be at least 1".into()));
        }
        if !(0.0..=0.5).contains(&self.prune_fraction) {
            return Err(EvalError::InvalidConfig("prune fraction outside [0, 0.5]".into()));
        }
        Ok(())
    }
}

/// One grow/prune/test run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub repeat: usize,
    pub fold: usize,
    /// Percent correct on the held-out fold (or fixed test set).
    pub accuracy: f64,
    /// Leaves of the selected pruned tree.
    pub tree_size: usize,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub dataset: String,
    pub variant: Variant,
    pub mean_acc: f64,
    pub sd_acc: f64,
    pub mean_size: f64,
    pub sd_size: f64,
    pub runs: Vec<RunRecord>,
    pub wall_time_s: f64,
    /// False when some class was too small for stratified folds.
    pub stratified_folds: bool,
    /// False when some pruning holdout fell back to unstratified sampling.
    pub stratified_holdouts: bool,
}

impl EvalReport {
    pub fn summary(&self) -> String {
        format!(
            "{} variant={} runs={} acc={:.1}%±{:.1} size={:.1}±{:.1} ({:.2}s{}{})",
            self.dataset,
            self.variant,
            self.runs.len(),
            self.mean_acc,
            self.sd_acc,
            self.mean_size,
            self.sd_size,
            self.wall_time_s,
            if self.stratified_folds { "" } else { ", unstratified folds" },
            if self.stratified_holdouts { "" } else { ", unstratified holdouts" },
        )
    }

    /// Delimited report: a summary row followed by one row per run.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), std::io::Error> {
        let mut f = std::fs::File::create(path)?;
        writeln!(
            f,
            "record,dataset,variant,repeat,fold,accuracy,tree_size,\
             mean_acc,sd_acc,mean_size,sd_size,runtime_s"
        )?;
        writeln!(
            f,
            "summary,{},{},,,,,{},{},{},{},{:.3}",
            self.dataset,
            self.variant,
            self.mean_acc,
            self.sd_acc,
            self.mean_size,
            self.sd_size,
            self.wall_time_s
        )?;
        for r in &self.runs {
            writeln!(
                f,
                "run,{},{},{},{},{},{},,,,,",
                self.dataset, self.variant, r.repeat, r.fold, r.accuracy, r.tree_size
            )?;
        }
        Ok(())
    }
}

fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Stratified k-fold assignment: per class, shuffle then deal round-robin.
/// Falls back to an unstratified deal (flagged) when a class has fewer than
/// k members.
pub fn stratified_kfold(ds: &Dataset, k: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<usize>>, bool) {
    assert!(k >= 2);
    let hist = ds.class_histogram(&(0..ds.n()).collect::<Vec<_>>());
    let stratified = hist.iter().all(|&c| c as usize >= k);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    if stratified {
        for class in 0..ds.n_classes() {
            let mut members: Vec<usize> =
                (0..ds.n()).filter(|&i| ds.labels[i] == class).collect();
            members.shuffle(rng);
            for (i, idx) in members.into_iter().enumerate() {
                folds[i % k].push(idx);
            }
        }
    } else {
        let mut all: Vec<usize> = (0..ds.n()).collect();
        all.shuffle(rng);
        for (i, idx) in all.into_iter().enumerate() {
            folds[i % k].push(idx);
        }
    }
    for fold in folds.iter_mut() {
        fold.sort_unstable();
    }
    (folds, stratified)
}

#[derive(Debug, Clone)]
struct Job {
    repeat: usize,
    fold: usize,
    grow_rows: Vec<usize>,
    prune_rows: Vec<usize>,
    test_rows: Vec<usize>,
}

fn make_jobs(ds: &Dataset, cfg: &EvalConfig) -> Result<(Vec<Job>, bool, bool), EvalError> {
    let mut jobs = Vec::with_capacity(cfg.repeats * cfg.folds);
    let mut stratified_folds = true;
    let mut stratified_holdouts = true;
    for repeat in 0..cfg.repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(repeat as u64));
        let (folds, strat) = stratified_kfold(ds, cfg.folds, &mut rng);
        stratified_folds &= strat;
        let holdout_seeds: Vec<u64> = (0..cfg.folds).map(|_| rng.gen()).collect();
        for fold in 0..cfg.folds {
            let test_rows = folds[fold].clone();
            let mut train_rows: Vec<usize> = Vec::with_capacity(ds.n() - test_rows.len());
            for (i, f) in folds.iter().enumerate() {
                if i != fold {
                    train_rows.extend_from_slice(f);
                }
            }
            train_rows.sort_unstable();
            let (grow_rows, prune_rows, hstrat) = if cfg.prune_fraction > 0.0 {
                split_holdout_rows(ds, &train_rows, cfg.prune_fraction, holdout_seeds[fold])?
            } else {
                (train_rows, Vec::new(), true)
            };
            stratified_holdouts &= hstrat;
            debug_assert!(prune_rows.iter().all(|r| test_rows.binary_search(r).is_err()));
            jobs.push(Job { repeat, fold, grow_rows, prune_rows, test_rows });
        }
    }
    Ok((jobs, stratified_folds, stratified_holdouts))
}

fn run_job(ds: &Dataset, cfg: &EvalConfig, job: &Job) -> Result<RunRecord, EvalError> {
    let tree = grow(ds, &job.grow_rows, &cfg.grow);
    let seq = prune_sequence(&tree);
    let selected = select_subtree(&seq, ds, &job.prune_rows)?;
    let accuracy = selected.tree.accuracy(ds, &job.test_rows)? * 100.0;
    Ok(RunRecord { repeat: job.repeat, fold: job.fold, accuracy, tree_size: selected.tree.size() })
}

fn aggregate(
    dataset: &str,
    variant: Variant,
    repeats: usize,
    runs: Vec<RunRecord>,
    wall_time_s: f64,
    stratified_folds: bool,
    stratified_holdouts: bool,
) -> EvalReport {
    // per-repeat means first, then mean and sample sd of those repeat-level
    // means; per-run records stay in the report for other conventions
    let mut acc_by_repeat = vec![Vec::new(); repeats];
    let mut size_by_repeat = vec![Vec::new(); repeats];
    for r in &runs {
        acc_by_repeat[r.repeat].push(r.accuracy);
        size_by_repeat[r.repeat].push(r.tree_size as f64);
    }
    let acc_means: Vec<f64> = acc_by_repeat
        .iter()
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
        .collect();
    let size_means: Vec<f64> = size_by_repeat
        .iter()
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
        .collect();
    EvalReport {
        dataset: dataset.to_string(),
        variant,
        mean_acc: acc_means.iter().sum::<f64>() / acc_means.len() as f64,
        sd_acc: sample_sd(&acc_means),
        mean_size: size_means.iter().sum::<f64>() / size_means.len() as f64,
        sd_size: sample_sd(&size_means),
        runs,
        wall_time_s,
        stratified_folds,
        stratified_holdouts,
    }
}

/// Repeated stratified k-fold cross-validation with per-fold pruning
/// holdouts. Each repeat reseeds with `seed + repeat`.
pub fn cross_validate(ds: &Dataset, name: &str, cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    if ds.n() < cfg.folds {
        return Err(EvalError::InvalidConfig(format!(
            "{} rows cannot fill {} folds",
            ds.n(),
            cfg.folds
        )));
    }
    let start = Instant::now();
    let (jobs, stratified_folds, stratified_holdouts) = make_jobs(ds, cfg)?;
    let results = exec::map(jobs, |job| run_job(ds, cfg, &job));
    let runs: Vec<RunRecord> = results.into_iter().collect::<Result<_, _>>()?;
    Ok(aggregate(
        name,
        cfg.variant(),
        cfg.repeats,
        runs,
        start.elapsed().as_secs_f64(),
        stratified_folds,
        stratified_holdouts,
    ))
}

/// Fixed train/test protocol: `repeats` trees, each grown on the training
/// set minus a freshly drawn pruning holdout, all scored on the same test
/// set.
pub fn train_test(
    train: &Dataset,
    test: &Dataset,
    name: &str,
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    if train.schema != test.schema {
        return Err(EvalError::SchemaMismatch);
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let holdout_seeds: Vec<u64> = (0..cfg.repeats).map(|_| rng.gen()).collect();
    let all_train: Vec<usize> = (0..train.n()).collect();
    let jobs: Vec<(usize, u64)> = holdout_seeds.into_iter().enumerate().collect();
    let mut stratified_holdouts = true;
    let mut prepared = Vec::with_capacity(jobs.len());
    for (repeat, seed) in jobs {
        let (grow_rows, prune_rows, strat) = if cfg.prune_fraction > 0.0 {
            split_holdout_rows(train, &all_train, cfg.prune_fraction, seed)?
        } else {
            (all_train.clone(), Vec::new(), true)
        };
        stratified_holdouts &= strat;
        prepared.push(Job { repeat, fold: 0, grow_rows, prune_rows, test_rows: Vec::new() });
    }
    let results = exec::map(prepared, |job| -> Result<RunRecord, EvalError> {
        let tree = grow(train, &job.grow_rows, &cfg.grow);
        let seq = prune_sequence(&tree);
        let selected = select_subtree(&seq, train, &job.prune_rows)?;
        let accuracy = accuracy_across(&selected.tree, test)? * 100.0;
        Ok(RunRecord {
            repeat: job.repeat,
            fold: 0,
            accuracy,
            tree_size: selected.tree.size(),
        })
    });
    let runs: Vec<RunRecord> = results.into_iter().collect::<Result<_, _>>()?;
    Ok(aggregate(
        name,
        cfg.variant(),
        cfg.repeats,
        runs,
        start.elapsed().as_secs_f64(),
        true,
        stratified_holdouts,
    ))
}

/// Accuracy of a tree on a dataset with its own class dictionary; labels are
/// compared by name.
pub fn accuracy_across(tree: &Tree, ds: &Dataset) -> Result<f64, TreeError> {
    if ds.n() == 0 {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (row, &label) in ds.rows.iter().zip(&ds.labels) {
        if tree.predict_label(row)? == ds.classes.name(label) {
            correct += 1;
        }
    }
    Ok(correct as f64 / ds.n() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub p: usize,
    pub n: usize,
    pub median_s: f64,
}

#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub variant: Variant,
    pub rows: Vec<ProbeRow>,
    /// Least-squares slope of log(time) against log(p), one per n.
    pub slopes: Vec<(usize, f64)>,
}

impl ProbeReport {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("variant {}\n  p      n  median_s\n", self.variant));
        for r in &self.rows {
            out.push_str(&format!("{:>3} {:>6}  {:.6}\n", r.p, r.n, r.median_s));
        }
        for (n, slope) in &self.slopes {
            out.push_str(&format!("  log-log slope in p at n={n}: {slope:.2}\n"));
        }
        out
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Seeded Gaussian node: class means spread apart, unit within-class noise.
pub fn synthetic_node(n: usize, p: usize, n_classes: usize, seed: u64) -> NodeData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| (0..p).map(|_| 3.0 * standard_normal(&mut rng)).collect())
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % n_classes;
        rows.push(means[c].iter().map(|m| m + standard_normal(&mut rng)).collect());
        y.push(c);
    }
    NodeData::new(Matrix::from_rows(&rows), y, n_classes)
}

/// Times a single-node split search across a (p, n) grid; medians of five
/// runs on one thread.
pub fn scaling_probe(
    p_list: &[usize],
    n_list: &[usize],
    n_classes: usize,
    params: &SplitterParams,
    seed: u64,
) -> ProbeReport {
    let mut rows = Vec::new();
    exec::single_threaded(|| {
        for &n in n_list {
            for &p in p_list {
                let node = synthetic_node(n, p, n_classes, seed ^ (n as u64) << 20 ^ p as u64);
                let mut times: Vec<f64> = (0..5)
                    .map(|_| {
                        let t0 = Instant::now();
                        let _ = find_best_split(&node, params);
                        t0.elapsed().as_secs_f64()
                    })
                    .collect();
                times.sort_by(|a, b| a.partial_cmp(b).unwrap());
                rows.push(ProbeRow { p, n, median_s: times[2] });
            }
        }
    });
    let mut slopes = Vec::new();
    for &n in n_list {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.n == n && r.median_s > 0.0)
            .map(|r| ((r.p as f64).ln(), r.median_s.ln()))
            .collect();
        if pts.len() >= 2 {
            let mx = pts.iter().map(|(x, _)| x).sum::<f64>() / pts.len() as f64;
            let my = pts.iter().map(|(_, y)| y).sum::<f64>() / pts.len() as f64;
            let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
            let den: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
            slopes.push((n, num / den));
        }
    }
    ProbeReport { variant: params.variant, rows, slopes }
}
