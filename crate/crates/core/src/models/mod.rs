//! Linear text classifiers with a shared train/predict contract.
//!
//! Two families are provided:
//!
//! * [`Family::BowLinear`]: one-vs-rest hinge loss with L2 regularization over
//!   L2-normalized unigram counts, trained by averaged stochastic subgradient
//!   descent.
//! * [`Family::BagEmbedding`]: the mean of jointly trained word embeddings fed
//!   to a softmax layer, trained by plain SGD on cross-entropy.
//!
//! Training is deterministic for a fixed dataset and [`ClassifierSpec`].
//! Documents are processed in an order keyed on their ids, so permuting the
//! input dataset does not change the fitted model.

mod container;
pub mod embedding;
pub mod linear;

use std::collections::HashMap;
use std::fmt;
use std::io;
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::{Dataset, Document};
use crate::seed;
use crate::text::{build_vocabulary, features, tokenize, vectorize_bow, SparseVector, VocabRules, Vocabulary};

pub use container::{read_model, write_model};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training needs at least 2 labels, dataset has {0}")]
    TooFewLabels(usize),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("vocabulary is empty after pruning")]
    EmptyVocabulary,
    #[error("invalid classifier spec: {0}")]
    InvalidSpec(String),
    #[error("cannot evaluate on an empty dataset")]
    EmptyEvaluation,
    #[error("model container line {line}: {message}")]
    Container { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    BowLinear,
    BagEmbedding,
}

impl Family {
    pub const ALL: [Family; 2] = [Family::BowLinear, Family::BagEmbedding];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::BowLinear => "bow_linear",
            Family::BagEmbedding => "bag_embedding",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bow_linear" => Ok(Family::BowLinear),
            "bag_embedding" => Ok(Family::BagEmbedding),
            other => Err(format!(
                "unknown classifier family `{other}` (expected bow_linear or bag_embedding)"
            )),
        }
    }
}

/// Training hyperparameters. The defaults are used untuned for every run.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSpec {
    pub family: Family,
    pub epochs: usize,
    /// Initial step size, decayed linearly to zero over training.
    pub learning_rate: f64,
    pub l2: f64,
    /// Only used by [`Family::BagEmbedding`].
    pub embedding_dim: usize,
    pub seed: u64,
    pub bigrams: bool,
    pub vocab: VocabRules,
}

impl ClassifierSpec {
    pub fn new(family: Family) -> Self {
        ClassifierSpec {
            family,
            epochs: 5,
            learning_rate: 0.1,
            l2: 1e-4,
            embedding_dim: 100,
            seed: 0,
            bigrams: false,
            vocab: VocabRules::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ModelError::InvalidSpec(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2 >= 0.0 && self.learning_rate * self.l2 < 1.0) {
            return bad("l2 must be non-negative with learning_rate * l2 < 1");
        }
        if self.embedding_dim == 0 {
            return bad("embedding_dim must be at least 1");
        }
        if self.vocab.max_doc_fraction.is_nan() || self.vocab.max_doc_fraction <= 0.0 {
            return bad("vocabulary max_doc_fraction must be positive");
        }
        Ok(())
    }
}

/// Fitted parameters of either family.
#[derive(Debug, Clone, PartialEq)]
pub enum Parameters {
    BowLinear(linear::LinearParams),
    BagEmbedding(embedding::EmbeddingParams),
}

/// A fitted classifier. Immutable; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub(crate) bigrams: bool,
    pub(crate) vocabulary: Vocabulary,
    pub(crate) label_order: Vec<String>,
    pub(crate) params: Parameters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: String,
    /// One score per label, in [`TrainedModel::label_order`]. Margins for
    /// `bow_linear`, probabilities for `bag_embedding`.
    pub scores: Vec<f64>,
}

impl TrainedModel {
    pub fn family(&self) -> Family {
        match self.params {
            Parameters::BowLinear(_) => Family::BowLinear,
            Parameters::BagEmbedding(_) => Family::BagEmbedding,
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn label_order(&self) -> &[String] {
        &self.label_order
    }

    pub fn parameters(&self) -> &Parameters {
        &self.params
    }

    pub fn uses_bigrams(&self) -> bool {
        self.bigrams
    }

    fn featurize(&self, text: &str) -> SparseVector {
        vectorize_bow(&features(&tokenize(text), self.bigrams), &self.vocabulary)
    }

    /// Scores `text` and returns the best label. Ties go to the label listed
    /// first in `label_order`; a text without known tokens is scored from the
    /// bias terms alone.
    pub fn predict(&self, text: &str) -> Prediction {
        let x = self.featurize(text);
        let scores = match &self.params {
            Parameters::BowLinear(p) => p.margins(&linear::normalize(&x)),
            Parameters::BagEmbedding(p) => p.probabilities(&x),
        };
        let best = argmax(&scores);
        Prediction {
            label: self.label_order[best].clone(),
            scores,
        }
    }

    pub fn is_finite(&self) -> bool {
        match &self.params {
            Parameters::BowLinear(p) => p.is_finite(),
            Parameters::BagEmbedding(p) => p.is_finite(),
        }
    }
}

/// Index of the first maximum.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Anything that maps a text to a label.
pub trait Classifier {
    fn predict_label(&self, text: &str) -> String;
}

impl Classifier for TrainedModel {
    fn predict_label(&self, text: &str) -> String {
        self.predict(text).label
    }
}

/// Anything that fits a [`Classifier`] on a dataset.
pub trait Learner: Sync {
    type Model: Classifier + Send;

    fn fit(&self, dataset: &Dataset) -> Result<Self::Model>;
}

impl Learner for ClassifierSpec {
    type Model = TrainedModel;

    fn fit(&self, dataset: &Dataset) -> Result<TrainedModel> {
        train(dataset, self)
    }
}

/// Fraction of documents whose predicted label equals their stored label.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(ModelError::EmptyEvaluation);
    }
    let correct = dataset
        .documents()
        .iter()
        .filter(|d| model.predict_label(&d.text) == d.label)
        .count();
    Ok(correct as f64 / dataset.len() as f64)
}

/// Featurized training set in canonical (id-sorted) order with labels mapped
/// to indices of the sorted label list.
pub(crate) struct TrainingSet {
    pub vocabulary: Vocabulary,
    pub examples: Vec<SparseVector>,
    pub targets: Vec<usize>,
    pub ids: Vec<String>,
    pub sorted_labels: Vec<String>,
}

impl TrainingSet {
    fn build(dataset: &Dataset, spec: &ClassifierSpec) -> Result<Self> {
        if dataset.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        if dataset.label_set().len() < 2 {
            return Err(ModelError::TooFewLabels(dataset.label_set().len()));
        }
        let mut docs: Vec<&Document> = dataset.documents().iter().collect();
        docs.sort_by(|a, b| a.id.cmp(&b.id));
        let feats: Vec<Vec<String>> = docs
            .iter()
            .map(|d| features(&tokenize(&d.text), spec.bigrams))
            .collect();
        let vocabulary = build_vocabulary(&feats, &spec.vocab);
        if vocabulary.is_empty() {
            return Err(ModelError::EmptyVocabulary);
        }
        let mut sorted_labels = dataset.label_set().to_vec();
        sorted_labels.sort();
        let label_index: HashMap<&str, usize> =
            sorted_labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        Ok(TrainingSet {
            examples: feats.iter().map(|f| vectorize_bow(f, &vocabulary)).collect(),
            targets: docs.iter().map(|d| label_index[d.label.as_str()]).collect(),
            ids: docs.iter().map(|d| d.id.clone()).collect(),
            vocabulary,
            sorted_labels,
        })
    }

    /// Visiting order for one epoch, keyed on document ids.
    pub fn epoch_order(&self, seed: u64, epoch: usize) -> Vec<usize> {
        let tag = format!("epoch/{epoch}");
        let mut keyed: Vec<(u64, usize)> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (seed::sort_key(seed, &tag, id), i))
            .collect();
        keyed.sort_unstable();
        keyed.into_iter().map(|(_, i)| i).collect()
    }

    /// For each label of `label_order`, its index among the sorted labels.
    fn reorder(&self, label_order: &[String]) -> Vec<usize> {
        label_order
            .iter()
            .map(|l| self.sorted_labels.binary_search(l).expect("label present"))
            .collect()
    }
}

/// Per-epoch training objective, measured after each epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrace {
    pub epoch_objective: Vec<f64>,
}

/// Fits a classifier of `spec.family` on `dataset`.
pub fn train(dataset: &Dataset, spec: &ClassifierSpec) -> Result<TrainedModel> {
    fit(dataset, spec, false).map(|(m, _)| m)
}

/// Like [`train`], also recording the objective after every epoch
/// (hinge + L2 on the averaged weights for `bow_linear`, mean cross-entropy
/// + L2 for `bag_embedding`).
pub fn train_traced(dataset: &Dataset, spec: &ClassifierSpec) -> Result<(TrainedModel, TrainingTrace)> {
    fit(dataset, spec, true)
}

fn fit(dataset: &Dataset, spec: &ClassifierSpec, trace: bool) -> Result<(TrainedModel, TrainingTrace)> {
    spec.validate()?;
    let set = TrainingSet::build(dataset, spec)?;
    let order = set.reorder(dataset.label_set());
    let (params, epoch_objective) = match spec.family {
        Family::BowLinear => {
            let (p, t) = linear::fit(&set, spec, trace);
            (Parameters::BowLinear(p.select_labels(&order)), t)
        }
        Family::BagEmbedding => {
            let (p, t) = embedding::fit(&set, spec, trace);
            (Parameters::BagEmbedding(p.select_labels(&order)), t)
        }
    };
    let model = TrainedModel {
        bigrams: spec.bigrams,
        vocabulary: set.vocabulary,
        label_order: dataset.label_set().to_vec(),
        params,
    };
    Ok((model, TrainingTrace { epoch_objective }))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two classes with disjoint 20-word vocabularies, 50 documents each.
    fn separable() -> Dataset {
        let mut docs = Vec::new();
        for (label, prefix) in [("left", "alpha"), ("right", "omega")] {
            for i in 0..50 {
                let words: Vec<String> = (0..8).map(|j| format!("{prefix}{}", (i * 7 + j * 3) % 20)).collect();
                docs.push(Document::new(format!("{label}-{i:02}"), words.join(" "), label));
            }
        }
        Dataset::new("separable", docs).unwrap()
    }

    #[test]
    fn both_families_fit_the_separable_set() {
        let d = separable();
        for family in Family::ALL {
            let model = train(&d, &ClassifierSpec::new(family)).unwrap();
            assert_eq!(evaluate(&model, &d).unwrap(), 1.0, "{family}");
            assert!(model.is_finite());
            assert_eq!(model.label_order(), d.label_set());
            let doc = &d.documents()[7];
            assert_eq!(model.predict(&doc.text).label, doc.label);
        }
    }

    #[test]
    fn single_label_and_empty_inputs_are_rejected() {
        let one = Dataset::new("one", vec![Document::new("a", "x y", "p")]).unwrap();
        assert!(matches!(
            train(&one, &ClassifierSpec::new(Family::BowLinear)),
            Err(ModelError::TooFewLabels(1))
        ));
        let tiny = Dataset::new("tiny", vec![Document::new("a", "x", "p"), Document::new("b", "y", "q")]).unwrap();
        assert!(matches!(
            train(&tiny, &ClassifierSpec::new(Family::BagEmbedding)),
            Err(ModelError::EmptyVocabulary)
        ));
        let mut spec = ClassifierSpec::new(Family::BowLinear);
        spec.epochs = 0;
        assert!(matches!(train(&separable(), &spec), Err(ModelError::InvalidSpec(_))));
    }

    #[test]
    fn training_is_deterministic() {
        let d = separable();
        for family in Family::ALL {
            let spec = ClassifierSpec::new(family).with_seed(42);
            assert_eq!(train(&d, &spec).unwrap(), train(&d, &spec).unwrap());
        }
    }

    #[test]
    fn input_order_does_not_matter() {
        let d = separable();
        let mut docs = d.documents().to_vec();
        docs.reverse();
        let reversed = Dataset::new("rev", docs).unwrap();
        assert_ne!(reversed.label_set(), d.label_set());
        for family in Family::ALL {
            let spec = ClassifierSpec::new(family).with_seed(3);
            let a = train(&d, &spec).unwrap();
            let b = train(&reversed, &spec).unwrap();
            for probe in ["alpha1 alpha2 omega3", "omega4 omega5", "alpha9", ""] {
                let pa = a.predict(probe);
                let pb = b.predict(probe);
                for (label, score) in a.label_order().iter().zip(&pa.scores) {
                    let j = b.label_order().iter().position(|l| l == label).unwrap();
                    assert_eq!(*score, pb.scores[j]);
                }
                if pa.scores[0] != pa.scores[1] {
                    assert_eq!(pa.label, pb.label);
                }
            }
        }
    }

    #[test]
    fn softmax_scores_sum_to_one_and_empty_text_is_finite() {
        let model = train(&separable(), &ClassifierSpec::new(Family::BagEmbedding)).unwrap();
        for text in ["alpha3 omega3 alpha4", "", "unknown words only"] {
            let p = model.predict(text);
            assert!((p.scores.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(p.scores.iter().all(|s| s.is_finite()));
        }
        let linear = train(&separable(), &ClassifierSpec::new(Family::BowLinear)).unwrap();
        assert!(linear.predict("").scores.iter().all(|s| s.is_finite()));
    }

    #[test]
    fn evaluate_counts_matches() {
        struct Constant(&'static str);
        impl Classifier for Constant {
            fn predict_label(&self, _: &str) -> String {
                self.0.to_string()
            }
        }
        let docs = vec![
            Document::new("1", "", "a"),
            Document::new("2", "", "a"),
            Document::new("3", "", "a"),
            Document::new("4", "", "b"),
        ];
        let d = Dataset::new("e", docs).unwrap();
        assert_eq!(evaluate(&Constant("a"), &d).unwrap(), 0.75);
        assert_eq!(evaluate(&Constant("c"), &d).unwrap(), 0.0);
        let all_a = d.derive("a", d.documents()[..3].to_vec()).unwrap();
        assert_eq!(evaluate(&Constant("a"), &all_a).unwrap(), 1.0);
    }

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }
}
