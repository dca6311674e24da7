//! Noise injection: truncation, interspersed irrelevant text, label flips and
//! conflicting replicas, plus the composite schedule that applies all four at
//! one level.
//!
//! Every selection takes an exact `⌊p·n⌋` items through a seeded shuffle on
//! its own named stream, so counts are deterministic and the four mechanisms
//! pick their targets independently of each other.

use std::collections::HashSet;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{CorpusError, Dataset, Document, Flag, Provenance};
use crate::seed;
use crate::text::{tokenize, TokenSequence};

/// Order in which [`apply_noise`] runs the mechanisms.
pub const MECHANISM_ORDER: [&str; 4] = ["truncate", "intersperse", "flip", "replicate"];

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("noise level must lie in [0, 1], got {0}")]
    LevelOutOfRange(f64),
    #[error("interspersal needs a non-empty distractor corpus")]
    EmptyDistractor,
    #[error("label noise needs at least 2 labels, dataset has {0}")]
    TooFewLabels(usize),
    #[error("refusing to inject noise into held-out test split `{0}`")]
    CleanTestSet(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type Result<T, E = NoiseError> = std::result::Result<T, E>;

fn check_level(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(NoiseError::LevelOutOfRange(p))
    }
}

/// `⌊p·n⌋`, with a small tolerance so that decimal levels such as 0.29 are
/// not pulled one below the exact product by binary rounding.
pub fn fraction_count(p: f64, n: usize) -> usize {
    let x = p * n as f64;
    ((x + 1e-9 * x.max(1.0)).floor() as usize).min(n)
}

/// Number of labels hit by the label mechanisms: `⌊p·k⌋`, raised to 1 when
/// `p > 0`.
pub fn affected_label_count(p: f64, labels: usize) -> usize {
    let n = fraction_count(p, labels);
    if p > 0.0 && n == 0 && labels > 0 {
        1
    } else {
        n
    }
}

/// Selects exactly `count` positions out of `0..n` with a shuffle seeded by
/// `(seed, tag)`. The result is sorted.
pub fn select_count(n: usize, count: usize, seed: u64, tag: &str) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::stream(seed, tag));
    order.truncate(count.min(n));
    order.sort_unstable();
    order
}

/// Selects `⌊p·N⌋` of `ids`, returned in their input order.
pub fn select_fraction<T: Clone>(ids: &[T], p: f64, seed: u64, tag: &str) -> Vec<T> {
    select_count(ids.len(), fraction_count(p, ids.len()), seed, tag)
        .into_iter()
        .map(|i| ids[i].clone())
        .collect()
}

/// Which end of a document survives truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Keep {
    #[default]
    Prefix,
    Suffix,
}

impl Keep {
    pub fn as_str(self) -> &'static str {
        match self {
            Keep::Prefix => "prefix",
            Keep::Suffix => "suffix",
        }
    }
}

impl FromStr for Keep {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "prefix" => Ok(Keep::Prefix),
            "suffix" => Ok(Keep::Suffix),
            other => Err(format!("expected prefix or suffix, got `{other}`")),
        }
    }
}

fn truncate_tokens(doc: &Document, tokens: &TokenSequence, p: f64, keep: Keep) -> Document {
    let len = tokens.len();
    // ceil((1 - p) * L) == L - floor(p * L)
    let kept = len - fraction_count(p, len);
    let mut out = doc.clone();
    if kept < len {
        let slice = match keep {
            Keep::Prefix => &tokens.tokens()[..kept],
            Keep::Suffix => &tokens.tokens()[len - kept..],
        };
        out.text = slice.join(" ");
    }
    out.provenance.insert(Flag::Truncated);
    out
}

/// Keeps `⌈(1−p)·L⌉` of the document's `L` tokens. A shortened text is
/// rewritten as its space-joined tokens; an untouched one keeps its raw text.
/// The document is flagged `truncated` either way.
pub fn truncate_doc(doc: &Document, p: f64, keep: Keep) -> Document {
    truncate_tokens(doc, &tokenize(&doc.text), p, keep)
}

/// Tokenized out-of-domain documents supplying interspersed snippets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Distractor {
    docs: Vec<Vec<String>>,
}

impl Distractor {
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let docs = texts
            .into_iter()
            .map(|t| tokenize(t).into_tokens())
            .filter(|t| !t.is_empty())
            .collect();
        Distractor { docs }
    }

    pub fn from_dataset(dataset: &Dataset) -> Self {
        Self::from_texts(dataset.documents().iter().map(|d| d.text.as_str()))
    }

    /// True when there is no token to draw from.
    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }
}

fn intersperse_tokens<R: Rng>(
    tokens: &TokenSequence,
    amount: usize,
    distractor: &Distractor,
    rng: &mut R,
) -> Vec<String> {
    let len = tokens.len();
    let mut inserts: Vec<Vec<&str>> = vec![Vec::new(); len + 1];
    let mut remaining = amount;
    while remaining > 0 {
        let source = &distractor.docs[rng.random_range(0..distractor.docs.len())];
        let start = rng.random_range(0..source.len());
        let take = remaining.min(source.len() - start);
        let gap = rng.random_range(0..=len);
        inserts[gap].extend(source[start..start + take].iter().map(String::as_str));
        remaining -= take;
    }
    let mut out = Vec::with_capacity(len + amount);
    for (gap, snippet) in inserts.into_iter().enumerate() {
        out.extend(snippet.into_iter().map(str::to_string));
        if gap < len {
            out.push(tokens.tokens()[gap].clone());
        }
    }
    out
}

fn intersperse_with_amount(
    doc: &Document,
    tokens: &TokenSequence,
    amount: usize,
    distractor: &Distractor,
    seed: u64,
) -> Result<Document> {
    let mut out = doc.clone();
    if amount > 0 {
        if distractor.is_empty() {
            return Err(NoiseError::EmptyDistractor);
        }
        let mut rng = seed::stream(seed, &format!("intersperse/{}", doc.id));
        out.text = intersperse_tokens(tokens, amount, distractor, &mut rng).join(" ");
    }
    out.provenance.insert(Flag::Interspersed);
    Ok(out)
}

/// Inserts `⌊p·L⌋` distractor tokens into the document as contiguous snippets
/// at random token boundaries. The original tokens keep their relative order.
pub fn intersperse_doc(doc: &Document, p: f64, distractor: &Distractor, seed: u64) -> Result<Document> {
    check_level(p)?;
    if p > 0.0 && distractor.is_empty() {
        return Err(NoiseError::EmptyDistractor);
    }
    let tokens = tokenize(&doc.text);
    let amount = fraction_count(p, tokens.len());
    intersperse_with_amount(doc, &tokens, amount, distractor, seed)
}

/// Uniform label different from `current`.
fn other_label<'a>(labels: &'a [String], current: &str, seed: u64, tag: &str) -> &'a str {
    let others: Vec<&String> = labels.iter().filter(|l| *l != current).collect();
    let mut rng = seed::stream(seed, tag);
    others[rng.random_range(0..others.len())]
}

/// Per affected label, the document indices selected for a label mechanism.
fn label_targets(dataset: &Dataset, p: f64, seed: u64, prefix: &str) -> Vec<usize> {
    let groups = dataset.indices_by_label();
    let affected = select_count(
        groups.len(),
        affected_label_count(p, groups.len()),
        seed,
        &format!("{prefix}/labels"),
    );
    let mut targets = Vec::new();
    for g in affected {
        let (label, members) = &groups[g];
        let picked = select_count(
            members.len(),
            fraction_count(p, members.len()),
            seed,
            &format!("{prefix}/docs/{label}"),
        );
        targets.extend(picked.into_iter().map(|i| members[i]));
    }
    targets.sort_unstable();
    targets
}

fn check_label_noise(dataset: &Dataset, p: f64) -> Result<()> {
    check_level(p)?;
    if p > 0.0 && dataset.label_set().len() < 2 {
        return Err(NoiseError::TooFewLabels(dataset.label_set().len()));
    }
    Ok(())
}

/// Flips labels: `⌊p·k⌋` labels are affected (at least one when `p > 0`),
/// and within each, `⌊p·n_label⌋` documents get a uniformly drawn different
/// label.
pub fn flip_labels(dataset: &Dataset, p: f64, seed: u64) -> Result<Dataset> {
    check_label_noise(dataset, p)?;
    let targets = label_targets(dataset, p, seed, "flip");
    flip_targets(dataset, dataset.label_set(), &targets, seed)
}

fn flip_targets(dataset: &Dataset, labels: &[String], targets: &[usize], seed: u64) -> Result<Dataset> {
    let mut docs = dataset.documents().to_vec();
    for &i in targets {
        let doc = &mut docs[i];
        doc.label = other_label(labels, &doc.label, seed, &format!("flip/assign/{}", doc.id)).to_string();
        doc.provenance.insert(Flag::LabelFlipped);
    }
    Ok(dataset.derive(dataset.name(), docs)?)
}

/// Appends conflicting replicas: for each affected label (chosen as in
/// [`flip_labels`] but on an independent stream), `⌊p·n_label⌋` documents are
/// cloned with a fresh id and a different label. Originals are untouched.
pub fn replicate_conflict(dataset: &Dataset, p: f64, seed: u64) -> Result<Dataset> {
    check_label_noise(dataset, p)?;
    let targets = label_targets(dataset, p, seed, "replicate");
    replicate_targets(dataset, dataset.label_set(), &targets, seed)
}

fn replicate_targets(dataset: &Dataset, labels: &[String], targets: &[usize], seed: u64) -> Result<Dataset> {
    let mut taken: HashSet<String> = dataset.documents().iter().map(|d| d.id.clone()).collect();
    let mut docs = dataset.documents().to_vec();
    for &i in targets {
        let source = &dataset.documents()[i];
        let mut id = format!("{}#replica", source.id);
        let mut n = 2;
        while taken.contains(&id) {
            id = format!("{}#replica{n}", source.id);
            n += 1;
        }
        taken.insert(id.clone());
        let label = other_label(labels, &source.label, seed, &format!("replicate/assign/{}", source.id));
        docs.push(Document {
            id,
            text: source.text.clone(),
            label: label.to_string(),
            provenance: Provenance::replica().with(Flag::LabelFlipped),
        });
    }
    Ok(dataset.derive(dataset.name(), docs)?)
}

/// Per-mechanism switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mechanisms {
    pub truncate: bool,
    pub intersperse: bool,
    pub flip: bool,
    pub replicate: bool,
}

impl Default for Mechanisms {
    fn default() -> Self {
        Mechanisms {
            truncate: true,
            intersperse: true,
            flip: true,
            replicate: true,
        }
    }
}

/// Everything needed to reproduce one noise injection.
#[derive(Debug, Clone)]
pub struct NoisePlan {
    pub level: f64,
    pub seed: u64,
    pub mechanisms: Mechanisms,
    pub keep: Keep,
    pub distractor: Option<Arc<Distractor>>,
}

impl NoisePlan {
    pub fn new(level: f64, seed: u64) -> Self {
        NoisePlan {
            level,
            seed,
            mechanisms: Mechanisms::default(),
            keep: Keep::Prefix,
            distractor: None,
        }
    }

    pub fn with_distractor(mut self, distractor: Arc<Distractor>) -> Self {
        self.distractor = Some(distractor);
        self
    }

    pub fn at_level(&self, level: f64) -> Self {
        NoisePlan { level, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        check_level(self.level)?;
        if self.mechanisms.intersperse && self.level > 0.0 && self.distractor.as_ref().is_none_or(|d| d.is_empty()) {
            return Err(NoiseError::EmptyDistractor);
        }
        Ok(())
    }
}

/// Applies the composite schedule at `plan.level = p`: truncate `⌊pN⌋`
/// documents by `p` of their length, intersperse `⌊pN⌋` documents with `p`
/// times their original length of distractor text, then flip labels and add
/// conflicting replicas at `p`. Replicas copy the text-noised document.
/// Flip and replica targets are both chosen on the labels before flipping, so
/// their counts follow the input's per-label sizes.
///
/// The interspersal amount is measured on the document as loaded, before any
/// truncation, so a fully truncated document still receives distractor text.
pub fn apply_noise(dataset: &Dataset, plan: &NoisePlan) -> Result<Dataset> {
    if dataset.is_test_split() {
        return Err(NoiseError::CleanTestSet(dataset.name().to_string()));
    }
    plan.validate()?;
    let p = plan.level;
    let n = dataset.len();
    let mut docs = dataset.documents().to_vec();

    let truncated: HashSet<usize> = if plan.mechanisms.truncate {
        select_count(n, fraction_count(p, n), plan.seed, "truncate")
            .into_iter()
            .collect()
    } else {
        HashSet::new()
    };
    let interspersed: HashSet<usize> = if plan.mechanisms.intersperse {
        select_count(n, fraction_count(p, n), plan.seed, "intersperse")
            .into_iter()
            .collect()
    } else {
        HashSet::new()
    };
    if !truncated.is_empty() || !interspersed.is_empty() {
        let empty = Distractor::default();
        let distractor = plan.distractor.as_deref().unwrap_or(&empty);
        docs = docs
            .into_par_iter()
            .enumerate()
            .map(|(i, mut doc)| {
                let (cut, insert) = (truncated.contains(&i), interspersed.contains(&i));
                if !cut && !insert {
                    return Ok(doc);
                }
                let original = tokenize(&doc.text);
                let original_len = original.len();
                let mut tokens = original;
                if cut {
                    doc = truncate_tokens(&doc, &tokens, p, plan.keep);
                    tokens = tokenize(&doc.text);
                }
                if insert {
                    let amount = fraction_count(p, original_len);
                    doc = intersperse_with_amount(&doc, &tokens, amount, distractor, plan.seed)?;
                }
                Ok(doc)
            })
            .collect::<Result<Vec<_>>>()?;
    }

    let name = format!("{}@noise={}", dataset.name(), p);
    let mut noised = dataset.derive(name, docs)?;
    // Both label mechanisms select their targets on the labels as loaded;
    // replicas then copy the (possibly flipped) document.
    let flip = plan.mechanisms.flip && p > 0.0;
    let replicate = plan.mechanisms.replicate && p > 0.0;
    if flip || replicate {
        check_label_noise(&noised, p)?;
    }
    let labels = noised.label_set().to_vec();
    let replica_sources = if replicate {
        label_targets(&noised, p, plan.seed, "replicate")
    } else {
        Vec::new()
    };
    if flip {
        let targets = label_targets(&noised, p, plan.seed, "flip");
        noised = flip_targets(&noised, &labels, &targets, plan.seed)?;
    }
    if replicate {
        noised = replicate_targets(&noised, &labels, &replica_sources, plan.seed)?;
    }
    Ok(noised)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(n_tokens: usize) -> Document {
        let text: Vec<String> = (0..n_tokens).map(|i| format!("w{i}")).collect();
        Document::new("d", text.join(" "), "a")
    }

    fn balanced(labels: usize, per_label: usize) -> Dataset {
        let mut docs = Vec::new();
        for l in 0..labels {
            for i in 0..per_label {
                docs.push(Document::new(
                    format!("l{l}-{i}"),
                    format!("label{l} word{i} common text here"),
                    format!("l{l}"),
                ));
            }
        }
        Dataset::new("toy.train", docs).unwrap()
    }

    fn distractor() -> Arc<Distractor> {
        Arc::new(Distractor::from_texts([
            "irrelevant legal boilerplate text",
            "system generated message number",
            "",
        ]))
    }

    #[test]
    fn fraction_count_is_exact_floor_on_decimal_levels() {
        assert_eq!(fraction_count(0.29, 100), 29);
        assert_eq!(fraction_count(0.7, 10), 7);
        assert_eq!(fraction_count(0.3, 1000), 300);
        assert_eq!(fraction_count(0.5, 3), 1);
        assert_eq!(fraction_count(1.0, 7), 7);
        assert_eq!(fraction_count(0.0, 7), 0);
        for k in 0..=100 {
            for n in [0usize, 1, 3, 7, 10, 99, 1000, 12345] {
                assert_eq!(fraction_count(k as f64 / 100.0, n), k * n / 100, "k={k} n={n}");
            }
        }
    }

    #[test]
    fn affected_labels_round_up_to_one() {
        assert_eq!(affected_label_count(0.1, 5), 1);
        assert_eq!(affected_label_count(0.0, 5), 0);
        assert_eq!(affected_label_count(0.5, 4), 2);
        assert_eq!(affected_label_count(1.0, 20), 20);
    }

    #[test]
    fn select_fraction_examples() {
        let ids: Vec<usize> = (0..1000).collect();
        assert!(select_fraction(&ids, 0.0, 1, "t").is_empty());
        assert_eq!(select_fraction(&ids, 1.0, 1, "t"), ids);
        let half = select_fraction(&ids, 0.5, 1, "t");
        assert_eq!(half.len(), 500);
        assert_eq!(half, select_fraction(&ids, 0.5, 1, "t"));
        assert_ne!(half, select_fraction(&ids, 0.5, 1, "u"));
    }

    #[test]
    fn truncation_keeps_prefix() {
        let d = truncate_doc(&doc(10), 0.5, Keep::Prefix);
        assert_eq!(d.text, "w0 w1 w2 w3 w4");
        assert!(d.provenance.contains(Flag::Truncated));
        let d = truncate_doc(&doc(3), 0.5, Keep::Prefix);
        assert_eq!(tokenize(&d.text).len(), 2);
        let s = truncate_doc(&doc(10), 0.7, Keep::Suffix);
        assert_eq!(s.text, "w7 w8 w9");
    }

    #[test]
    fn zero_truncation_keeps_raw_text_but_marks_it() {
        let original = Document::new("x", "Hello, World!", "a");
        let d = truncate_doc(&original, 0.0, Keep::Prefix);
        assert_eq!(d.text, original.text);
        assert!(d.provenance.contains(Flag::Truncated));
        let empty = truncate_doc(&doc(1), 1.0, Keep::Prefix);
        assert_eq!(empty.text, "");
    }

    fn is_subsequence(needle: &[String], haystack: &[String]) -> bool {
        let mut it = haystack.iter();
        needle.iter().all(|n| it.any(|h| h == n))
    }

    #[test]
    fn interspersal_adds_half_length_and_keeps_order() {
        let original = doc(10);
        let d = intersperse_doc(&original, 0.5, &distractor(), 3).unwrap();
        let out = tokenize(&d.text).into_tokens();
        assert_eq!(out.len(), 15);
        assert!(is_subsequence(tokenize(&original.text).tokens(), &out));
        assert!(d.provenance.contains(Flag::Interspersed));
        assert_eq!(d, intersperse_doc(&original, 0.5, &distractor(), 3).unwrap());
        let same = intersperse_doc(&original, 0.0, &distractor(), 3).unwrap();
        assert_eq!(same.text, original.text);
    }

    #[test]
    fn interspersal_needs_distractor_tokens() {
        let empty = Distractor::from_texts(["", "  ..  "]);
        assert!(empty.is_empty());
        assert!(matches!(
            intersperse_doc(&doc(4), 0.5, &empty, 1),
            Err(NoiseError::EmptyDistractor)
        ));
        assert!(intersperse_doc(&doc(4), 0.0, &empty, 1).is_ok());
    }

    #[test]
    fn flipping_two_labels_at_full_level_swaps_everything() {
        let d = balanced(2, 20);
        let flipped = flip_labels(&d, 1.0, 5).unwrap();
        for (before, after) in d.documents().iter().zip(flipped.documents()) {
            assert_ne!(before.label, after.label);
            assert_eq!(before.text, after.text);
            assert!(after.provenance.contains(Flag::LabelFlipped));
        }
        assert_eq!(flip_labels(&d, 0.0, 5).unwrap(), d);
    }

    #[test]
    fn label_noise_needs_two_labels() {
        let d = balanced(1, 10);
        assert!(matches!(flip_labels(&d, 0.3, 1), Err(NoiseError::TooFewLabels(1))));
        assert!(matches!(
            replicate_conflict(&d, 0.3, 1),
            Err(NoiseError::TooFewLabels(1))
        ));
        assert!(flip_labels(&d, 0.0, 1).is_ok());
    }

    #[test]
    fn replication_appends_conflicting_clones() {
        let d = balanced(2, 100);
        let r = replicate_conflict(&d, 0.5, 9).unwrap();
        // one affected label (floor(0.5 * 2) = 1) with 50 clones
        assert_eq!(r.len(), 250);
        assert_eq!(&r.documents()[..200], d.documents());
        for clone in &r.documents()[200..] {
            let source_id = clone.id.strip_suffix("#replica").unwrap();
            let source = d.documents().iter().find(|x| x.id == source_id).unwrap();
            assert_ne!(clone.label, source.label);
            assert_eq!(clone.text, source.text);
            assert_eq!(clone.provenance, Provenance::replica().with(Flag::LabelFlipped));
        }
        assert_eq!(replicate_conflict(&d, 0.0, 9).unwrap(), d);
    }

    #[test]
    fn replica_ids_stay_unique() {
        let docs = vec![Document::new("a", "x", "p"), Document::new("a#replica", "y", "q")];
        let d = Dataset::new("t", docs).unwrap();
        let r = replicate_conflict(&d, 1.0, 1).unwrap();
        assert_eq!(r.len(), 4);
        assert!(r.documents().iter().any(|x| x.id == "a#replica2"));
    }

    #[test]
    fn composite_schedule_counts_at_half() {
        let d = balanced(4, 250);
        let plan = NoisePlan::new(0.5, 11).with_distractor(distractor());
        let noised = apply_noise(&d, &plan).unwrap();
        let count = |f: Flag| noised.documents().iter().filter(|x| x.provenance.contains(f)).count();
        assert_eq!(count(Flag::Truncated), 500);
        assert_eq!(count(Flag::Interspersed), 500);
        assert_eq!(count(Flag::Replica), 250);
        assert_eq!(count(Flag::LabelFlipped), 500);
        assert_eq!(noised.len(), 1250);
        assert!(noised.documents().iter().all(|x| x.provenance.is_well_formed()));
    }

    #[test]
    fn level_zero_is_identity() {
        let d = balanced(3, 10);
        let noised = apply_noise(&d, &NoisePlan::new(0.0, 1)).unwrap();
        assert_eq!(noised.documents(), d.documents());
        assert_eq!(noised.label_set(), d.label_set());
    }

    #[test]
    fn plan_validation() {
        let d = balanced(3, 10);
        assert!(matches!(
            apply_noise(&d, &NoisePlan::new(0.5, 1)),
            Err(NoiseError::EmptyDistractor)
        ));
        let mut text_free = NoisePlan::new(0.5, 1);
        text_free.mechanisms.intersperse = false;
        assert!(apply_noise(&d, &text_free).is_ok());
        assert!(matches!(
            apply_noise(&d, &NoisePlan::new(1.5, 1)),
            Err(NoiseError::LevelOutOfRange(_))
        ));
        let test = d.clone().renamed("toy.test");
        assert!(matches!(
            apply_noise(&test, &NoisePlan::new(0.0, 1)),
            Err(NoiseError::CleanTestSet(_))
        ));
    }

    #[test]
    fn full_truncation_still_receives_distractor_text() {
        let d = balanced(2, 10);
        let mut plan = NoisePlan::new(1.0, 4).with_distractor(distractor());
        plan.mechanisms.flip = false;
        plan.mechanisms.replicate = false;
        let noised = apply_noise(&d, &plan).unwrap();
        for (before, after) in d.documents().iter().zip(noised.documents()) {
            assert_eq!(tokenize(&after.text).len(), tokenize(&before.text).len());
            assert_eq!(before.label, after.label);
        }
    }
}
