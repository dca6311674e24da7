//! Labeled text datasets: loading, splitting, subsampling and synthesis.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::Value;
use thiserror::Error;

use crate::seed;

/// Suffix carried by the name of every held-out test split. Noise injection
/// refuses datasets carrying it.
pub const TEST_SUFFIX: &str = ".test";
/// Suffix carried by the name of every training split.
pub const TRAIN_SUFFIX: &str = ".train";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: missing or non-string field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate document id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("duplicate document id `{0}`")]
    DuplicateDocumentId(String),
    #[error("line {line}: unknown provenance flag `{flag}`")]
    UnknownFlag { line: usize, flag: String },
    #[error("dataset `{0}` has no records")]
    Empty(String),
    #[error("label `{label}` has a single document; stratified splitting needs at least 2")]
    SingletonLabel { label: String },
    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("requested {requested} documents but the dataset has {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("sample size must be positive")]
    EmptySample,
    #[error("synthetic datasets need at least 2 sources, got {0}")]
    TooFewSources(usize),
    #[error("duplicate source name `{0}`")]
    DuplicateSource(String),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// Audit flag recording how a document came to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Flag {
    Original,
    Truncated,
    Interspersed,
    LabelFlipped,
    Replica,
}

impl Flag {
    pub const ALL: [Flag; 5] = [
        Flag::Original,
        Flag::Truncated,
        Flag::Interspersed,
        Flag::LabelFlipped,
        Flag::Replica,
    ];

    fn bit(self) -> u8 {
        1 << self as u8
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Flag::Original => "original",
            Flag::Truncated => "truncated",
            Flag::Interspersed => "interspersed",
            Flag::LabelFlipped => "label_flipped",
            Flag::Replica => "replica",
        }
    }
}

impl FromStr for Flag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Flag::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Set of [`Flag`]s. Serialized as the comma-joined flag names.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Provenance(u8);

impl Provenance {
    pub fn original() -> Self {
        Provenance(Flag::Original.bit())
    }

    pub fn replica() -> Self {
        Provenance(Flag::Replica.bit())
    }

    pub fn contains(self, flag: Flag) -> bool {
        self.0 & flag.bit() != 0
    }

    pub fn insert(&mut self, flag: Flag) {
        self.0 |= flag.bit();
    }

    pub fn with(mut self, flag: Flag) -> Self {
        self.insert(flag);
        self
    }

    pub fn iter(self) -> impl Iterator<Item = Flag> {
        Flag::ALL.into_iter().filter(move |f| self.contains(*f))
    }

    /// Exactly one of `original` and `replica` is set.
    pub fn is_well_formed(self) -> bool {
        self.contains(Flag::Original) != self.contains(Flag::Replica)
    }
}

impl Default for Provenance {
    fn default() -> Self {
        Provenance::original()
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.iter().map(Flag::as_str).collect();
        f.write_str(&names.join(","))
    }
}

impl fmt::Debug for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Provenance({self})")
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut p = Provenance(0);
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            p.insert(part.parse()?);
        }
        if p.0 == 0 {
            p = Provenance::original();
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: String,
    pub provenance: Provenance,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            label: label.into(),
            provenance: Provenance::original(),
        }
    }
}

/// An ordered collection of labeled documents.
///
/// `label_set` holds exactly the labels used by the documents. A freshly
/// loaded dataset orders them by first occurrence; datasets derived from
/// another one keep the parent's order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    name: String,
    documents: Vec<Document>,
    label_set: Vec<String>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, documents: Vec<Document>) -> Result<Self> {
        Self::with_label_order(name, documents, &[])
    }

    /// Builds a dataset whose label set lists the labels of `preferred` first
    /// (those still in use), followed by any others in first-occurrence order.
    pub fn with_label_order(name: impl Into<String>, documents: Vec<Document>, preferred: &[String]) -> Result<Self> {
        let mut seen = HashSet::with_capacity(documents.len());
        for doc in &documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateDocumentId(doc.id.clone()));
            }
        }
        let used: HashSet<&str> = documents.iter().map(|d| d.label.as_str()).collect();
        let mut label_set: Vec<String> = Vec::with_capacity(used.len());
        let mut placed = HashSet::new();
        for label in preferred {
            if used.contains(label.as_str()) && placed.insert(label.clone()) {
                label_set.push(label.clone());
            }
        }
        for doc in &documents {
            if placed.insert(doc.label.clone()) {
                label_set.push(doc.label.clone());
            }
        }
        Ok(Dataset {
            name: name.into(),
            documents,
            label_set,
        })
    }

    /// A dataset built from a subset (or rewrite) of this one's documents,
    /// keeping this dataset's label order.
    pub fn derive(&self, name: impl Into<String>, documents: Vec<Document>) -> Result<Self> {
        Self::with_label_order(name, documents, &self.label_set)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.documents
    }

    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn is_test_split(&self) -> bool {
        self.name.ends_with(TEST_SUFFIX)
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Document counts per label, in label-set order.
    pub fn label_counts(&self) -> Vec<(String, usize)> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for doc in &self.documents {
            *counts.entry(doc.label.as_str()).or_default() += 1;
        }
        self.label_set
            .iter()
            .map(|l| (l.clone(), counts.get(l.as_str()).copied().unwrap_or(0)))
            .collect()
    }

    /// Document indices grouped by label, in label-set order; indices within
    /// a group follow document order.
    pub fn indices_by_label(&self) -> Vec<(String, Vec<usize>)> {
        let position: HashMap<&str, usize> = self
            .label_set
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); self.label_set.len()];
        for (i, doc) in self.documents.iter().enumerate() {
            groups[position[doc.label.as_str()]].push(i);
        }
        self.label_set.iter().cloned().zip(groups).collect()
    }

    fn subset(&self, name: String, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        let docs = indices.into_iter().map(|i| self.documents[i].clone()).collect();
        self.derive(name, docs)
    }
}

/// Input file layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// One JSON object per line with `text`, `label` and optional `id` and
    /// `provenance` fields.
    JsonLines,
    /// Delimiter-separated values with a header row naming the columns.
    Delimited(u8),
}

impl Format {
    pub fn csv() -> Self {
        Format::Delimited(b',')
    }

    pub fn tsv() -> Self {
        Format::Delimited(b'\t')
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "jsonl" | "json-lines" | "jsonlines" => Ok(Format::JsonLines),
            "csv" => Ok(Format::csv()),
            "tsv" => Ok(Format::tsv()),
            other => Err(format!("unknown dataset format `{other}` (expected jsonl, csv or tsv)")),
        }
    }
}

/// Loads a dataset file. The dataset is named after the file stem.
pub fn load_dataset(path: &Path, format: Format) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    read_dataset(BufReader::new(file), format, &name).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn read_dataset<R: Read>(reader: R, format: Format, name: &str) -> Result<Dataset> {
    let docs = match format {
        Format::JsonLines => read_json_lines(BufReader::new(reader))?,
        Format::Delimited(delim) => read_delimited(reader, delim)?,
    };
    if docs.is_empty() {
        return Err(CorpusError::Empty(name.to_string()));
    }
    Dataset::new(name, docs)
}

fn read_json_lines<R: BufRead>(reader: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: PathBuf::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let obj = value.as_object().ok_or(CorpusError::Malformed {
            line: line_no,
            message: "record is not a JSON object".into(),
        })?;
        let field = |name: &'static str| match obj.get(name) {
            Some(Value::String(s)) => Ok(s.clone()),
            _ => Err(CorpusError::MissingField {
                line: line_no,
                field: name,
            }),
        };
        let text = field("text")?;
        let label = field("label")?;
        let id = match obj.get("id") {
            None | Some(Value::Null) => line_no.to_string(),
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            Some(_) => {
                return Err(CorpusError::MissingField {
                    line: line_no,
                    field: "id",
                })
            }
        };
        let provenance = match obj.get("provenance") {
            None | Some(Value::Null) => Provenance::original(),
            Some(Value::String(s)) => s
                .parse()
                .map_err(|flag| CorpusError::UnknownFlag { line: line_no, flag })?,
            Some(_) => {
                return Err(CorpusError::MissingField {
                    line: line_no,
                    field: "provenance",
                })
            }
        };
        if !ids.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { line: line_no, id });
        }
        docs.push(Document {
            id,
            text,
            label,
            provenance,
        });
    }
    Ok(docs)
}

fn read_delimited<R: Read>(reader: R, delimiter: u8) -> Result<Vec<Document>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CorpusError::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let text_col = column("text").ok_or(CorpusError::MissingField { line: 1, field: "text" })?;
    let label_col = column("label").ok_or(CorpusError::MissingField {
        line: 1,
        field: "label",
    })?;
    let id_col = column("id");
    let prov_col = column("provenance");

    let mut docs = Vec::new();
    let mut ids = HashSet::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CorpusError::Malformed {
            line: e.position().map(|p| p.line() as usize).unwrap_or(i + 2),
            message: e.to_string(),
        })?;
        let line_no = record.position().map(|p| p.line() as usize).unwrap_or(i + 2);
        let text = record
            .get(text_col)
            .ok_or(CorpusError::MissingField {
                line: line_no,
                field: "text",
            })?
            .to_string();
        let label = record
            .get(label_col)
            .ok_or(CorpusError::MissingField {
                line: line_no,
                field: "label",
            })?
            .to_string();
        let id = match id_col.and_then(|c| record.get(c)).filter(|s| !s.is_empty()) {
            Some(id) => id.to_string(),
            None => line_no.to_string(),
        };
        let provenance = match prov_col.and_then(|c| record.get(c)).filter(|s| !s.is_empty()) {
            Some(s) => s
                .parse()
                .map_err(|flag| CorpusError::UnknownFlag { line: line_no, flag })?,
            None => Provenance::original(),
        };
        if !ids.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { line: line_no, id });
        }
        docs.push(Document {
            id,
            text,
            label,
            provenance,
        });
    }
    Ok(docs)
}

/// Writes the canonical interchange format: one JSON object per line with
/// `id`, `text`, `label` and `provenance`.
pub fn write_json_lines<W: Write>(dataset: &Dataset, mut out: W) -> io::Result<()> {
    for doc in dataset.documents() {
        let record = serde_json::json!({
            "id": doc.id,
            "text": doc.text,
            "label": doc.label,
            "provenance": doc.provenance.to_string(),
        });
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    write_json_lines(dataset, io::BufWriter::new(file)).map_err(io_err)
}

/// Loads a newsgroup-style directory tree: every regular file is a document
/// whose label is the name of its parent directory. Ids are the file paths
/// relative to `root`. Files that are not valid UTF-8 are decoded as Latin-1.
pub fn load_label_directories(root: &Path) -> Result<Dataset> {
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| CorpusError::Io {
            path: root.to_path_buf(),
            source: e.into(),
        })?;
        if entry.file_type().is_file() && entry.depth() >= 2 {
            files.push(entry.into_path());
        }
    }
    let mut docs = Vec::with_capacity(files.len());
    for path in files {
        let bytes = fs::read(&path).map_err(|source| CorpusError::Io {
            path: path.clone(),
            source,
        })?;
        let text = match String::from_utf8(bytes) {
            Ok(s) => s,
            Err(e) => e.into_bytes().iter().map(|&b| b as char).collect(),
        };
        let label = path
            .parent()
            .and_then(Path::file_name)
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let id = path
            .strip_prefix(root)
            .unwrap_or(&path)
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        docs.push(Document::new(id, text, label));
    }
    let name = root
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    if docs.is_empty() {
        return Err(CorpusError::Empty(name));
    }
    Dataset::new(name, docs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.30,
            seed: 0,
            stratified: true,
        }
    }
}

/// Picks `count` of `indices` with a seeded shuffle keyed on document ids, so
/// the choice does not depend on the documents' positions.
fn choose(dataset: &Dataset, indices: &[usize], count: usize, seed: u64, tag: &str) -> Vec<usize> {
    let mut keyed: Vec<(u64, &str, usize)> = indices
        .iter()
        .map(|&i| {
            let id = dataset.documents[i].id.as_str();
            (seed::sort_key(seed, tag, id), id, i)
        })
        .collect();
    keyed.sort_unstable();
    keyed.truncate(count);
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

/// Splits `dataset` into `(train, test)`. With stratification each label
/// contributes `round(test_fraction × count)` documents to the test split.
/// Both splits keep the input's document order.
pub fn split_train_test(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(CorpusError::BadFraction(spec.test_fraction));
    }
    let mut test_idx = Vec::new();
    if spec.stratified {
        let groups = dataset.indices_by_label();
        if let Some((label, _)) = groups.iter().find(|(_, g)| g.len() < 2) {
            return Err(CorpusError::SingletonLabel { label: label.clone() });
        }
        for (label, group) in &groups {
            let n_test = (spec.test_fraction * group.len() as f64).round() as usize;
            test_idx.extend(choose(dataset, group, n_test, spec.seed, &format!("split/{label}")));
        }
    } else {
        let all: Vec<usize> = (0..dataset.len()).collect();
        let n_test = (spec.test_fraction * dataset.len() as f64).round() as usize;
        test_idx = choose(dataset, &all, n_test, spec.seed, "split");
    }
    let in_test: HashSet<usize> = test_idx.iter().copied().collect();
    let train_idx: Vec<usize> = (0..dataset.len()).filter(|i| !in_test.contains(i)).collect();
    let train = dataset.subset(format!("{}{TRAIN_SUFFIX}", dataset.name), train_idx)?;
    let test = dataset.subset(format!("{}{TEST_SUFFIX}", dataset.name), test_idx)?;
    Ok((train, test))
}

/// Merges source corpora into one dataset labeled by source name. Ids are
/// prefixed with `<source>/`.
pub fn build_synthetic(sources: &[(String, Dataset)]) -> Result<Dataset> {
    if sources.len() < 2 {
        return Err(CorpusError::TooFewSources(sources.len()));
    }
    let mut names = HashSet::new();
    for (name, _) in sources {
        if !names.insert(name.as_str()) {
            return Err(CorpusError::DuplicateSource(name.clone()));
        }
    }
    let total = sources.iter().map(|(_, d)| d.len()).sum();
    let mut docs = Vec::with_capacity(total);
    for (name, dataset) in sources {
        for doc in dataset.documents() {
            docs.push(Document {
                id: format!("{name}/{}", doc.id),
                text: doc.text.clone(),
                label: name.clone(),
                provenance: doc.provenance,
            });
        }
    }
    Dataset::new("synthetic", docs)
}

/// Largest-remainder apportionment of `n` over `counts`, proportional to
/// each count. Ties on the remainder go to the earlier group.
pub(crate) fn apportion(counts: &[usize], n: usize) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return vec![0; counts.len()];
    }
    let mut quotas: Vec<usize> = counts.iter().map(|&c| c * n / total).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    // remainder of c*n/total, compared exactly as (c*n mod total)
    order.sort_by_key(|&i| std::cmp::Reverse((counts[i] * n) % total));
    for &i in order.iter().take(n - assigned) {
        quotas[i] += 1;
    }
    quotas
}

/// Stratified sample of exactly `n` documents. Per-label quotas follow the
/// label proportions (largest remainder). Document order is preserved.
pub fn subsample(dataset: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(CorpusError::EmptySample);
    }
    if n > dataset.len() {
        return Err(CorpusError::SampleTooLarge {
            requested: n,
            available: dataset.len(),
        });
    }
    let groups = dataset.indices_by_label();
    let counts: Vec<usize> = groups.iter().map(|(_, g)| g.len()).collect();
    let quotas = apportion(&counts, n);
    let mut chosen = Vec::with_capacity(n);
    for ((label, group), quota) in groups.iter().zip(quotas) {
        chosen.extend(choose(dataset, group, quota, seed, &format!("subsample/{label}")));
    }
    dataset.subset(dataset.name.clone(), chosen)
}

/// Summary statistics for a dataset.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Summary {
    pub name: String,
    pub documents: usize,
    pub labels: usize,
    pub label_histogram: BTreeMap<String, usize>,
    pub median_tokens: f64,
}

pub fn summarize(dataset: &Dataset) -> Summary {
    let mut lengths: Vec<usize> = dataset
        .documents()
        .iter()
        .map(|d| crate::text::tokenize(&d.text).len())
        .collect();
    lengths.sort_unstable();
    let median_tokens = match lengths.len() {
        0 => 0.0,
        n if n % 2 == 1 => lengths[n / 2] as f64,
        n => (lengths[n / 2 - 1] + lengths[n / 2]) as f64 / 2.0,
    };
    Summary {
        name: dataset.name().to_string(),
        documents: dataset.len(),
        labels: dataset.label_set().len(),
        label_histogram: dataset.label_counts().into_iter().collect(),
        median_tokens,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(counts: &[(&str, usize)]) -> Dataset {
        let mut docs = Vec::new();
        for (label, n) in counts {
            for i in 0..*n {
                docs.push(Document::new(format!("{label}-{i}"), format!("text {i}"), *label));
            }
        }
        Dataset::new("d", docs).unwrap()
    }

    #[test]
    fn json_lines_load_keeps_order_and_first_occurrence_labels() {
        let input = r#"{"id":"x","text":"one","label":"a"}
{"id":"y","text":"two","label":"a"}
{"id":"z","text":"three","label":"b"}
"#;
        let d = read_dataset(input.as_bytes(), Format::JsonLines, "t").unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.label_set(), ["a", "b"]);
        assert!(d.documents().iter().all(|x| x.provenance == Provenance::original()));
        assert_eq!(d.documents()[2].id, "z");
    }

    #[test]
    fn missing_label_names_the_line() {
        let input = "{\"text\":\"one\",\"label\":\"a\"}\n{\"text\":\"two\"}\n";
        let err = read_dataset(input.as_bytes(), Format::JsonLines, "t").unwrap_err();
        assert!(matches!(
            err,
            CorpusError::MissingField {
                line: 2,
                field: "label"
            }
        ));
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn missing_ids_fall_back_to_line_numbers() {
        let input = "{\"text\":\"one\",\"label\":\"a\"}\n\n{\"text\":\"two\",\"label\":\"b\"}\n";
        let d = read_dataset(input.as_bytes(), Format::JsonLines, "t").unwrap();
        let ids: Vec<&str> = d.documents().iter().map(|x| x.id.as_str()).collect();
        assert_eq!(ids, ["1", "3"]);
    }

    #[test]
    fn duplicate_ids_and_empty_files_are_rejected() {
        let input = "{\"id\":\"a\",\"text\":\"1\",\"label\":\"x\"}\n{\"id\":\"a\",\"text\":\"2\",\"label\":\"y\"}\n";
        let err = read_dataset(input.as_bytes(), Format::JsonLines, "t").unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId { line: 2, .. }));
        let err = read_dataset("".as_bytes(), Format::JsonLines, "t").unwrap_err();
        assert!(matches!(err, CorpusError::Empty(_)));
        let err = read_dataset("id,text,label\n".as_bytes(), Format::csv(), "t").unwrap_err();
        assert!(matches!(err, CorpusError::Empty(_)));
    }

    #[test]
    fn delimited_load_with_header() {
        let input = "label\ttext\nspam\tbuy now\nham\thello there\n";
        let d = read_dataset(input.as_bytes(), Format::tsv(), "t").unwrap();
        assert_eq!(d.label_set(), ["spam", "ham"]);
        assert_eq!(d.documents()[1].text, "hello there");
        assert_eq!(d.documents()[1].id, "3");
        let err = read_dataset("id,text\n1,foo\n".as_bytes(), Format::csv(), "t").unwrap_err();
        assert!(matches!(err, CorpusError::MissingField { field: "label", .. }));
    }

    #[test]
    fn provenance_round_trips_through_text() {
        let p = Provenance::replica().with(Flag::LabelFlipped);
        assert_eq!(p.to_string(), "label_flipped,replica");
        assert_eq!("label_flipped,replica".parse::<Provenance>().unwrap(), p);
        assert!(p.is_well_formed());
        assert!("bogus".parse::<Provenance>().is_err());
    }

    #[test]
    fn split_hundred_docs_seventy_thirty() {
        let d = labeled(&[("a", 50), ("b", 50)]);
        let (train, test) = split_train_test(&d, &SplitSpec::default()).unwrap();
        assert_eq!((train.len(), test.len()), (70, 30));
        let train_ids: HashSet<&str> = train.documents().iter().map(|x| x.id.as_str()).collect();
        assert!(test.documents().iter().all(|x| !train_ids.contains(x.id.as_str())));
        assert!(test.is_test_split());
        assert!(!train.is_test_split());
    }

    #[test]
    fn stratified_split_rounds_per_label() {
        let d = labeled(&[("a", 10), ("b", 25)]);
        let (_, test) = split_train_test(&d, &SplitSpec::default()).unwrap();
        let counts: HashMap<String, usize> = test.label_counts().into_iter().collect();
        assert_eq!(counts["a"], 3);
        // round(7.5) = 8
        assert_eq!(counts["b"], 8);
    }

    #[test]
    fn stratified_split_rejects_singleton_labels() {
        let d = labeled(&[("a", 10), ("b", 1)]);
        assert!(matches!(
            split_train_test(&d, &SplitSpec::default()),
            Err(CorpusError::SingletonLabel { .. })
        ));
        let plain = SplitSpec {
            stratified: false,
            ..SplitSpec::default()
        };
        let (train, test) = split_train_test(&d, &plain).unwrap();
        assert_eq!(train.len() + test.len(), 11);
    }

    #[test]
    fn split_is_seed_deterministic() {
        let d = labeled(&[("a", 40), ("b", 60)]);
        let spec = SplitSpec {
            seed: 99,
            ..SplitSpec::default()
        };
        let first = split_train_test(&d, &spec).unwrap();
        let second = split_train_test(&d, &spec).unwrap();
        assert_eq!(first, second);
        let other = split_train_test(&d, &SplitSpec { seed: 100, ..spec }).unwrap();
        assert_ne!(first.1, other.1);
    }

    #[test]
    fn synthetic_labels_are_source_names() {
        let a = labeled(&[("x", 3)]);
        let b = labeled(&[("x", 2), ("y", 2)]);
        let s = build_synthetic(&[("news".into(), a), ("reviews".into(), b)]).unwrap();
        assert_eq!(s.len(), 7);
        assert_eq!(s.label_set(), ["news", "reviews"]);
        // both sources contain id "x-0"
        assert!(s.documents().iter().any(|d| d.id == "news/x-0"));
        assert!(s.documents().iter().any(|d| d.id == "reviews/x-0"));
    }

    #[test]
    fn synthetic_needs_two_distinct_sources() {
        let a = labeled(&[("x", 3)]);
        assert!(matches!(
            build_synthetic(&[("a".into(), a.clone())]),
            Err(CorpusError::TooFewSources(1))
        ));
        assert!(matches!(
            build_synthetic(&[("a".into(), a.clone()), ("a".into(), a)]),
            Err(CorpusError::DuplicateSource(_))
        ));
    }

    #[test]
    fn subsample_preserves_proportions() {
        let d = labeled(&[("a", 500), ("b", 500)]);
        let s = subsample(&d, 100, 1).unwrap();
        assert_eq!(s.label_counts(), vec![("a".into(), 50), ("b".into(), 50)]);
        assert_eq!(subsample(&d, 100, 1).unwrap(), s);
        assert_eq!(subsample(&d, 1000, 5).unwrap(), d);
        assert!(matches!(
            subsample(&d, 1001, 1),
            Err(CorpusError::SampleTooLarge { .. })
        ));
    }

    #[test]
    fn apportion_hits_the_total() {
        assert_eq!(apportion(&[1, 1, 1], 2), vec![1, 1, 0]);
        assert_eq!(apportion(&[700, 200, 100], 10), vec![7, 2, 1]);
        assert_eq!(apportion(&[5, 5], 3).iter().sum::<usize>(), 3);
    }

    #[test]
    fn summary_median() {
        let docs = vec![
            Document::new("1", "a b", "x"),
            Document::new("2", "a b c d", "x"),
            Document::new("3", "a", "y"),
            Document::new("4", "a b c", "y"),
        ];
        let s = summarize(&Dataset::new("s", docs).unwrap());
        assert_eq!(s.median_tokens, 2.5);
        assert_eq!(s.labels, 2);
    }
}
