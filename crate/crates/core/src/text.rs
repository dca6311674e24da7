//! Tokenization, pruned vocabularies and bag-of-words vectors.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use thiserror::Error;

/// Lowercased tokens of one document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenSequence(tokens)
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Space-joined tokens. Tokenizing the result gives back the same tokens.
    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

impl FromIterator<String> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        TokenSequence(iter.into_iter().collect())
    }
}

/// Lowercases `text` and splits it on maximal runs of non-alphanumeric
/// characters.
pub fn tokenize(text: &str) -> TokenSequence {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Feature strings fed to the classifiers: the unigrams, optionally followed
/// by adjacent-pair bigrams joined with `|`.
pub fn features(seq: &TokenSequence, bigrams: bool) -> Vec<String> {
    let mut out = seq.tokens().to_vec();
    if bigrams {
        out.extend(seq.tokens().windows(2).map(|w| format!("{}|{}", w[0], w[1])));
    }
    out
}

/// Pruning thresholds for [`build_vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VocabRules {
    /// Minimum total occurrences across the corpus (inclusive).
    pub min_count: u64,
    /// Tokens must appear in strictly fewer than this fraction of documents.
    pub max_doc_fraction: f64,
}

impl Default for VocabRules {
    fn default() -> Self {
        VocabRules {
            min_count: 6,
            max_doc_fraction: 0.5,
        }
    }
}

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("vocabulary dump line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Token → dense index map with the corpus statistics it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
    doc_freq: Vec<u64>,
    total_docs: u64,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts[index]
    }

    pub fn doc_freq(&self, index: usize) -> u64 {
        self.doc_freq[index]
    }

    pub fn total_docs(&self) -> u64 {
        self.total_docs
    }

    /// Writes the audit dump: a `#total_docs` header line, then one
    /// `token<TAB>index<TAB>count<TAB>doc_freq` line per entry in index order.
    pub fn write_dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "#total_docs\t{}", self.total_docs)?;
        for (i, token) in self.tokens.iter().enumerate() {
            writeln!(out, "{token}\t{i}\t{}\t{}", self.counts[i], self.doc_freq[i])?;
        }
        Ok(())
    }

    pub fn dump_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_dump(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("tokens are UTF-8")
    }

    /// Parses a dump produced by [`Vocabulary::write_dump`].
    pub fn read_dump<R: BufRead>(input: R) -> Result<Self, VocabError> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let total_docs = header
            .strip_prefix("#total_docs\t")
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| VocabError::Parse {
                line: 1,
                message: "expected `#total_docs<TAB>N` header".into(),
            })?;
        let mut vocab = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
            counts: Vec::new(),
            doc_freq: Vec::new(),
            total_docs,
        };
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            let bad = |message: &str| VocabError::Parse {
                line: line_no,
                message: message.to_string(),
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(bad("expected 4 tab-separated fields"));
            }
            let index: usize = fields[1].parse().map_err(|_| bad("bad index"))?;
            if index != vocab.tokens.len() {
                return Err(bad("indices must be dense and ascending"));
            }
            let count = fields[2].parse().map_err(|_| bad("bad count"))?;
            let df = fields[3].parse().map_err(|_| bad("bad doc_freq"))?;
            if vocab.index.insert(fields[0].to_string(), index).is_some() {
                return Err(bad("duplicate token"));
            }
            vocab.tokens.push(fields[0].to_string());
            vocab.counts.push(count);
            vocab.doc_freq.push(df);
        }
        Ok(vocab)
    }
}

/// Builds a vocabulary over `corpus` (one token list per document), keeping
/// tokens with total count ≥ `min_count` that occur in strictly fewer than
/// `max_doc_fraction × documents` documents. Indices follow first occurrence.
pub fn build_vocabulary<S: AsRef<str>>(corpus: &[Vec<S>], rules: &VocabRules) -> Vocabulary {
    let mut order: Vec<&str> = Vec::new();
    let mut stats: HashMap<&str, (u64, u64, usize)> = HashMap::new();
    for (doc_idx, doc) in corpus.iter().enumerate() {
        for token in doc {
            let token = token.as_ref();
            let entry = stats.entry(token).or_insert_with(|| {
                order.push(token);
                (0, 0, usize::MAX)
            });
            entry.0 += 1;
            if entry.2 != doc_idx {
                entry.1 += 1;
                entry.2 = doc_idx;
            }
        }
    }
    let total_docs = corpus.len() as u64;
    let df_limit = rules.max_doc_fraction * total_docs as f64;
    let mut vocab = Vocabulary {
        tokens: Vec::new(),
        index: HashMap::new(),
        counts: Vec::new(),
        doc_freq: Vec::new(),
        total_docs,
    };
    for token in order {
        let (count, df, _) = stats[token];
        if count >= rules.min_count && (df as f64) < df_limit {
            vocab.index.insert(token.to_string(), vocab.tokens.len());
            vocab.tokens.push(token.to_string());
            vocab.counts.push(count);
            vocab.doc_freq.push(df);
        }
    }
    vocab
}

/// Sparse vector of non-zero entries, sorted by index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            dense[i] = v;
        }
        dense
    }
}

/// Count vector of the in-vocabulary tokens of `tokens`.
pub fn vectorize_bow<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> SparseVector {
    let mut counts: HashMap<usize, f64> = HashMap::new();
    for token in tokens {
        if let Some(i) = vocab.index_of(token.as_ref()) {
            *counts.entry(i).or_default() += 1.0;
        }
    }
    let mut entries: Vec<(usize, f64)> = counts.into_iter().collect();
    entries.sort_unstable_by_key(|&(i, _)| i);
    SparseVector {
        dim: vocab.len(),
        entries,
    }
}
