//! Confusion matrices, F1 scores, conditional (surrogate) confusion and the
//! augmentation sweep.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance::{augment, record_holdout_split, upsample, BalanceConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{train, ArchitectureDescriptor, Model, TrainConfig};
use crate::rng::{derive_seed, stream};
use crate::signal::Epoch;
use crate::surrogate::{epoch_surrogate, SurrogateConfig, SurrogateKind};

/// Anything that maps an epoch to class probabilities.
pub trait Classifier: Sync {
    fn predict(&self, epoch: &Epoch) -> Result<Vec<f64>>;
}

impl<T: Classifier + ?Sized> Classifier for &T {
    fn predict(&self, epoch: &Epoch) -> Result<Vec<f64>> {
        (**self).predict(epoch)
    }
}

impl<T: Classifier + ?Sized> Classifier for Box<T> {
    fn predict(&self, epoch: &Epoch) -> Result<Vec<f64>> {
        (**self).predict(epoch)
    }
}

/// Index of the largest probability; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Counts with rows indexed by true class and columns by predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

fn f1_of(tp: f64, fp: f64, fn_: f64) -> f64 {
    let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self {
            n_classes,
            counts: vec![0; n_classes * n_classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("confusion rows must form a square matrix"));
        }
        Ok(Self {
            n_classes: n,
            counts: rows.concat(),
        })
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.n_classes + predicted] += 1;
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n_classes + predicted]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.n_classes.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        (0..self.n_classes).map(|p| self.count(truth, p)).sum()
    }

    fn column_total(&self, predicted: usize) -> u64 {
        (0..self.n_classes).map(|t| self.count(t, predicted)).sum()
    }

    /// Each row divided by its sum; rows without counts stay zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        (0..self.n_classes)
            .map(|t| {
                let s = self.row_total(t) as f64;
                (0..self.n_classes)
                    .map(|p| if s > 0.0 { self.count(t, p) as f64 / s } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    /// Per-class recall (the diagonal of the row-normalized matrix).
    pub fn recall(&self) -> Vec<f64> {
        let norm = self.row_normalized();
        (0..self.n_classes).map(|c| norm[c][c]).collect()
    }

    /// Per-class F1; a class with precision + recall = 0 scores 0.
    pub fn f1(&self) -> Vec<f64> {
        (0..self.n_classes)
            .map(|c| {
                let tp = self.count(c, c) as f64;
                f1_of(tp, self.column_total(c) as f64 - tp, self.row_total(c) as f64 - tp)
            })
            .collect()
    }

    pub fn macro_f1(&self) -> f64 {
        let f = self.f1();
        f.iter().sum::<f64>() / f.len().max(1) as f64
    }

    /// F1 averaged with true-class support as weights.
    pub fn weighted_f1(&self) -> f64 {
        let total = self.total() as f64;
        if total == 0.0 {
            return 0.0;
        }
        self.f1()
            .iter()
            .enumerate()
            .map(|(c, f)| f * self.row_total(c) as f64 / total)
            .sum()
    }

    /// Fraction of all counts that lie off the diagonal.
    pub fn off_diagonal_fraction(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let diag: u64 = (0..self.n_classes).map(|c| self.count(c, c)).sum();
        (total - diag) as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub truth: usize,
    pub predicted: usize,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    /// Per-class accuracy, i.e. recall.
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub macro_f1: f64,
    pub predictions: Vec<Prediction>,
}

fn predict_checked<C: Classifier + ?Sized>(clf: &C, epoch: &Epoch, n_classes: usize) -> Result<Vec<f64>> {
    let p = clf.predict(epoch)?;
    if p.len() != n_classes {
        return Err(Error::invalid(format!(
            "classifier returned {} probabilities for {n_classes} classes",
            p.len()
        )));
    }
    Ok(p)
}

pub fn evaluate<C: Classifier + ?Sized>(clf: &C, dataset: &Dataset) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    let k = dataset.n_classes();
    let predictions: Vec<Prediction> = dataset
        .epochs()
        .par_iter()
        .map(|e| {
            let p = predict_checked(clf, e, k)?;
            Ok(Prediction {
                truth: e.label(),
                predicted: argmax(&p),
                probabilities: p,
            })
        })
        .collect::<Result<_>>()?;
    let mut confusion = ConfusionMatrix::new(k);
    for p in &predictions {
        confusion.add(p.truth, p.predicted);
    }
    Ok(Evaluation {
        recall: confusion.recall(),
        f1: confusion.f1(),
        macro_f1: confusion.macro_f1(),
        confusion,
        predictions,
    })
}

/// Confusion of `clf` on transformed copies of the epochs it classifies
/// correctly. Rows are the (correctly predicted) original class, columns the
/// prediction on the transformed epoch. `None` when no epoch is predicted
/// correctly. `transform` receives the epoch and its dataset index.
pub fn conditional_confusion_with<C, F>(clf: &C, dataset: &Dataset, transform: F) -> Result<Option<ConfusionMatrix>>
where
    C: Classifier + ?Sized,
    F: Fn(&Epoch, usize) -> Result<Epoch> + Sync,
{
    let k = dataset.n_classes();
    let outcomes: Vec<Option<(usize, usize)>> = dataset
        .epochs()
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let p = predict_checked(clf, e, k)?;
            if argmax(&p) != e.label() {
                return Ok(None);
            }
            let t = transform(e, i)?;
            Ok(Some((e.label(), argmax(&predict_checked(clf, &t, k)?))))
        })
        .collect::<Result<_>>()?;
    let mut m = ConfusionMatrix::new(k);
    for (t, p) in outcomes.into_iter().flatten() {
        m.add(t, p);
    }
    Ok((m.total() > 0).then_some(m))
}

/// Conditional confusion under whole-epoch surrogates of `kind`.
pub fn conditional_confusion<C: Classifier + ?Sized>(
    clf: &C,
    dataset: &Dataset,
    kind: SurrogateKind,
    seed: u64,
) -> Result<Option<ConfusionMatrix>> {
    let cfg = SurrogateConfig::ft(seed).with_kind(kind);
    conditional_confusion_with(clf, dataset, |e, i| {
        epoch_surrogate(e, &cfg, derive_seed(seed, &[stream::CONDCONF, i as u64]))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    pub beta: f64,
    pub folds: usize,
    pub train: TrainConfig,
    pub seed: u64,
    pub kind: SurrogateKind,
    pub descriptor: ArchitectureDescriptor,
}

impl SweepConfig {
    pub fn new(alphas: Vec<f64>, folds: usize, seed: u64) -> Self {
        Self {
            alphas,
            beta: 0.9,
            folds,
            train: TrainConfig::default(),
            seed,
            kind: SurrogateKind::Ft,
            descriptor: ArchitectureDescriptor::reference(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub fold: usize,
    pub macro_f1: f64,
    /// Zero for classes absent from the validation fold (see `support`).
    pub per_class_recall: Vec<f64>,
    /// Validation epochs per class.
    pub support: Vec<u64>,
}

/// For every fold and α: record-holdout split, up-sample the training part
/// with β, augment with α, train, evaluate on the held-out records.
///
/// Within a fold the up-sampling draw, the augmentation coins and the
/// training seed are shared by all α values, so rows differ only through α.
/// Rows come out fold-major, in the order of `alphas`.
pub fn alpha_sweep(
    dataset: &Dataset,
    groups: &BTreeMap<String, String>,
    cfg: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    if cfg.alphas.is_empty() {
        return Err(Error::invalid("no alpha values given"));
    }
    let descriptor = cfg.descriptor.clone().with_n_classes(dataset.n_classes());
    let splits = (0..cfg.folds)
        .map(|fold| record_holdout_split(dataset, fold, cfg.folds, groups))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, f64)> = (0..cfg.folds)
        .flat_map(|f| cfg.alphas.iter().map(move |&a| (f, a)))
        .collect();
    jobs.par_iter()
        .map(|&(fold, alpha)| {
            let (train_set, val_set) = &splits[fold];
            if val_set.is_empty() {
                return Err(Error::invalid(format!("fold {fold} has no validation epochs")));
            }
            let balance = BalanceConfig {
                beta: cfg.beta,
                alpha,
                seed: derive_seed(cfg.seed, &[stream::SWEEP, fold as u64, 0]),
                surrogate_kind: cfg.kind,
            };
            let up = upsample(train_set, &balance)?;
            let aug = augment(&up.dataset, &up.repeated, &balance)?;
            let train_cfg = TrainConfig {
                seed: derive_seed(cfg.seed, &[stream::SWEEP, fold as u64, 1]),
                ..cfg.train.clone()
            };
            let outcome = train(&descriptor, &aug.dataset, &train_cfg)?;
            let model = Model::new(descriptor.clone(), outcome.weights)?;
            let ev = evaluate(&model, val_set)?;
            Ok(SweepRow {
                alpha,
                fold,
                macro_f1: ev.macro_f1,
                support: (0..ev.confusion.n_classes()).map(|c| ev.confusion.row_total(c)).collect(),
                per_class_recall: ev.recall,
            })
        })
        .collect()
}
