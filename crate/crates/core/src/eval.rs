//! Dirty-data cross-validation, clean-test evaluation and noise sweeps.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, Dataset, Document};
use crate::models::{self, evaluate, ClassifierSpec, Learner, ModelError};
use crate::noise::{self, NoiseError, NoisePlan, MECHANISM_ORDER};
use crate::seed;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("fold count must be at least 2, got {0}")]
    TooFewFolds(usize),
    #[error("cannot make {folds} folds from {documents} documents")]
    TooManyFolds { folds: usize, documents: usize },
    #[error("fold assignment does not match the dataset: {0}")]
    FoldMismatch(String),
    #[error("curve has no point at level {0}")]
    MissingLevel(f64),
    #[error("slope needs a non-zero reference level")]
    ZeroLevel,
    #[error("fitted slope needs at least 3 points in [0, {0}]")]
    TooFewPoints(f64),
    #[error("relative gain is undefined for a dirty accuracy of 0")]
    ZeroBaseline,
    #[error("invalid noise grid: {0}")]
    BadGrid(String),
    #[error("test labels {test:?} differ from training labels {train:?}")]
    LabelMismatch { train: Vec<String>, test: Vec<String> },
    #[error("noise level {level}")]
    Level {
        level: f64,
        #[source]
        source: Box<EvalError>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

/// Assignment of every document id to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    pub fold_of: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.fold_of.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified k-fold assignment. Each label's documents are ordered by a
/// seeded id-keyed shuffle and the concatenation, label by label, is dealt
/// round-robin, so fold sizes differ by at most one overall and within every
/// label.
pub fn kfold(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(EvalError::TooFewFolds(k));
    }
    if k > dataset.len() {
        return Err(EvalError::TooManyFolds {
            folds: k,
            documents: dataset.len(),
        });
    }
    let docs = dataset.documents();
    let mut fold_of = BTreeMap::new();
    let mut next = 0;
    for (label, members) in dataset.indices_by_label() {
        let tag = format!("kfold/{label}");
        let mut keyed: Vec<(u64, &str)> = members
            .iter()
            .map(|&i| (seed::sort_key(seed, &tag, &docs[i].id), docs[i].id.as_str()))
            .collect();
        keyed.sort_unstable();
        for (_, id) in keyed {
            fold_of.insert(id.to_string(), next % k);
            next += 1;
        }
    }
    Ok(FoldAssignment { k, seed, fold_of })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub mean: f64,
    pub per_fold: Vec<f64>,
}

impl CvResult {
    /// Sample standard deviation of the fold accuracies.
    pub fn std(&self) -> f64 {
        let n = self.per_fold.len();
        if n < 2 {
            return 0.0;
        }
        let var = self.per_fold.iter().map(|a| (a - self.mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        var.sqrt()
    }
}

/// Trains on all folds but one and scores the held-out fold, for every fold.
/// Held-out documents whose label never occurs in the training part can only
/// be misclassified; they stay in the denominator.
pub fn cross_validate<L: Learner>(dataset: &Dataset, learner: &L, folds: &FoldAssignment) -> Result<CvResult> {
    let docs = dataset.documents();
    if folds.fold_of.len() != docs.len() {
        return Err(EvalError::FoldMismatch(format!(
            "{} assignments for {} documents",
            folds.fold_of.len(),
            docs.len()
        )));
    }
    let mut fold_index = Vec::with_capacity(docs.len());
    for doc in docs {
        match folds.fold_of.get(&doc.id) {
            Some(&f) => fold_index.push(f),
            None => return Err(EvalError::FoldMismatch(format!("document `{}` unassigned", doc.id))),
        }
    }
    let per_fold = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let (held, kept): (Vec<_>, Vec<_>) = docs.iter().zip(&fold_index).partition(|(_, &fi)| fi == f);
            let strip = |v: Vec<(&Document, &usize)>| v.into_iter().map(|(d, _)| d.clone()).collect();
            let train = dataset.derive(format!("{}#cv{f}-train", dataset.name()), strip(kept))?;
            let held = dataset.derive(format!("{}#cv{f}-held", dataset.name()), strip(held))?;
            let model = learner.fit(&train)?;
            Ok(evaluate(&model, &held)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = per_fold.iter().sum::<f64>() / per_fold.len() as f64;
    Ok(CvResult { mean, per_fold })
}

fn lookup(curve: &[(f64, f64)], level: f64) -> Result<f64> {
    curve
        .iter()
        .find(|(l, _)| (l - level).abs() < 1e-12)
        .map(|&(_, a)| a)
        .ok_or(EvalError::MissingLevel(level))
}

/// `(acc(at) − acc(0)) / at` over a curve of `(level, accuracy)` points.
pub fn secant_slope(curve: &[(f64, f64)], at: f64) -> Result<f64> {
    if at == 0.0 {
        return Err(EvalError::ZeroLevel);
    }
    Ok((lookup(curve, at)? - lookup(curve, 0.0)?) / at)
}

/// Least-squares slope over the curve points with level in `[0, at]`.
pub fn fitted_slope(curve: &[(f64, f64)], at: f64) -> Result<f64> {
    if at == 0.0 {
        return Err(EvalError::ZeroLevel);
    }
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .copied()
        .filter(|&(l, _)| l >= 0.0 && l <= at + 1e-12)
        .collect();
    if pts.len() < 3 {
        return Err(EvalError::TooFewPoints(at));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Percentage by which `clean` exceeds `dirty`: `100·(clean − dirty)/dirty`.
pub fn relative_gain(clean: f64, dirty: f64) -> Result<f64> {
    if dirty == 0.0 {
        return Err(EvalError::ZeroBaseline);
    }
    Ok(100.0 * (clean - dirty) / dirty)
}

/// Sweep inputs besides the two datasets.
#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub spec: ClassifierSpec,
    pub grid: Vec<f64>,
    /// Noise plan reused at every level with only the level changed.
    pub plan: NoisePlan,
    pub folds: usize,
    pub fold_seed: u64,
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid[0] != 0.0 {
        return Err(EvalError::BadGrid("must start at 0".into()));
    }
    if grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(EvalError::BadGrid("levels must lie in [0, 1]".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::BadGrid("levels must be strictly increasing".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub level: f64,
    pub train_documents: usize,
    pub dirty_cv_mean: f64,
    pub dirty_cv_std: f64,
    pub dirty_cv_folds: Vec<f64>,
    pub clean_test: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub slope_at_0_25: Option<f64>,
    pub slope_at_0_5: Option<f64>,
    pub gain_at_0_25: Option<f64>,
    pub gain_at_0_5: Option<f64>,
    pub fitted_slope_at_0_25: Option<f64>,
    pub fitted_slope_at_0_5: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierRecord {
    pub family: String,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub embedding_dim: usize,
    pub seed: u64,
    pub bigrams: bool,
    pub vocab_min_count: u64,
    pub vocab_max_doc_fraction: f64,
}

impl From<&ClassifierSpec> for ClassifierRecord {
    fn from(s: &ClassifierSpec) -> Self {
        ClassifierRecord {
            family: s.family.to_string(),
            epochs: s.epochs,
            learning_rate: s.learning_rate,
            l2: s.l2,
            embedding_dim: s.embedding_dim,
            seed: s.seed,
            bigrams: s.bigrams,
            vocab_min_count: s.vocab.min_count,
            vocab_max_doc_fraction: s.vocab.max_doc_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool_version: String,
    pub noise_seed: u64,
    pub fold_seed: u64,
    pub folds: usize,
    pub mechanism_order: Vec<String>,
    pub mechanisms_enabled: Vec<String>,
    pub truncation_keeps: String,
    pub slope_method: String,
    pub notes: Vec<String>,
    /// Echo of the run configuration, filled by the command-line driver.
    #[serde(default)]
    pub config: BTreeMap<String, String>,
}

/// Result of one noise sweep: both accuracy curves and the derived metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub dataset: String,
    pub test_dataset: String,
    pub classifier: ClassifierRecord,
    pub grid: Vec<f64>,
    pub points: Vec<LevelResult>,
    pub derived: Derived,
    pub metadata: Metadata,
}

impl SweepReport {
    pub fn clean_curve(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.level, p.clean_test)).collect()
    }

    pub fn dirty_curve(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.level, p.dirty_cv_mean)).collect()
    }

    pub fn point(&self, level: f64) -> Option<&LevelResult> {
        self.points.iter().find(|p| (p.level - level).abs() < 1e-12)
    }

    /// Curve CSV: `level,dirty_cv_mean,dirty_cv_std,clean_test`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "level,dirty_cv_mean,dirty_cv_std,clean_test")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{}",
                p.level, p.dirty_cv_mean, p.dirty_cv_std, p.clean_test
            )?;
        }
        out.flush()
    }
}

fn derive_metrics(points: &[LevelResult]) -> Derived {
    let clean: Vec<(f64, f64)> = points.iter().map(|p| (p.level, p.clean_test)).collect();
    let gain = |level: f64| {
        points
            .iter()
            .find(|p| (p.level - level).abs() < 1e-12)
            .and_then(|p| relative_gain(p.clean_test, p.dirty_cv_mean).ok())
    };
    Derived {
        slope_at_0_25: secant_slope(&clean, 0.25).ok(),
        slope_at_0_5: secant_slope(&clean, 0.5).ok(),
        gain_at_0_25: gain(0.25),
        gain_at_0_5: gain(0.5),
        fitted_slope_at_0_25: fitted_slope(&clean, 0.25).ok(),
        fitted_slope_at_0_5: fitted_slope(&clean, 0.5).ok(),
    }
}

fn run_level(train: &Dataset, test: &Dataset, settings: &SweepSettings, level: f64) -> Result<LevelResult> {
    let noised = noise::apply_noise(train, &settings.plan.at_level(level))?;
    let folds = kfold(&noised, settings.folds, settings.fold_seed)?;
    let cv = cross_validate(&noised, &settings.spec, &folds)?;
    let model = models::train(&noised, &settings.spec)?;
    let clean_test = evaluate(&model, test)?;
    Ok(LevelResult {
        level,
        train_documents: noised.len(),
        dirty_cv_std: cv.std(),
        dirty_cv_mean: cv.mean,
        dirty_cv_folds: cv.per_fold,
        clean_test,
    })
}

/// Runs the noise sweep: at every grid level the training set is noised, a
/// k-fold cross-validation on the noised data gives the dirty curve, and a
/// model trained on all of it is scored on the untouched test set for the
/// clean curve. Each model builds its vocabulary from the data it is fitted
/// on. Levels run in parallel; results are ordered by grid position.
pub fn sweep(train: &Dataset, test: &Dataset, settings: &SweepSettings) -> Result<SweepReport> {
    validate_grid(&settings.grid)?;
    settings.spec.validate()?;
    let mut train_labels = train.label_set().to_vec();
    let mut test_labels = test.label_set().to_vec();
    train_labels.sort();
    test_labels.sort();
    if train_labels != test_labels {
        return Err(EvalError::LabelMismatch {
            train: train_labels,
            test: test_labels,
        });
    }
    let points = settings
        .grid
        .par_iter()
        .map(|&level| {
            run_level(train, test, settings, level).map_err(|e| EvalError::Level {
                level,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let m = settings.plan.mechanisms;
    let enabled: Vec<String> = MECHANISM_ORDER
        .iter()
        .zip([m.truncate, m.intersperse, m.flip, m.replicate])
        .filter(|(_, on)| *on)
        .map(|(name, _)| name.to_string())
        .collect();
    Ok(SweepReport {
        dataset: train.name().to_string(),
        test_dataset: test.name().to_string(),
        classifier: (&settings.spec).into(),
        grid: settings.grid.clone(),
        derived: derive_metrics(&points),
        points,
        metadata: Metadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            noise_seed: settings.plan.seed,
            fold_seed: settings.fold_seed,
            folds: settings.folds,
            mechanism_order: MECHANISM_ORDER.iter().map(|s| s.to_string()).collect(),
            mechanisms_enabled: enabled,
            truncation_keeps: settings.plan.keep.as_str().to_string(),
            slope_method: "secant".to_string(),
            notes: vec![
                "embeddings are trained from random initialization; no pre-trained vectors".to_string(),
                "vocabulary is rebuilt from each noised training set".to_string(),
                "the same noise seed is used at every level".to_string(),
            ],
            config: BTreeMap::new(),
        },
    })
}

/// Per-label document counts of each fold, for stratification checks.
pub fn fold_label_counts(dataset: &Dataset, folds: &FoldAssignment) -> Vec<HashMap<String, usize>> {
    let mut counts = vec![HashMap::new(); folds.k];
    for doc in dataset.documents() {
        if let Some(&f) = folds.fold_of.get(&doc.id) {
            *counts[f].entry(doc.label.clone()).or_default() += 1;
        }
    }
    counts
}
