//! Seeded generators of small topic corpora for tests and bundled data.
//!
//! Words are pronounceable pseudo-words. Every label draws from its own
//! topic lexicon with Zipf-like frequencies, mixed with a lexicon shared by
//! all labels.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, Document};
use crate::seed;

const ONSETS: [&str; 16] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "tr",
];
const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];

/// Draws `n` distinct pseudo-words of 2 to 4 syllables, none in `taken`.
pub fn lexicon(n: usize, rng: &mut ChaCha8Rng, taken: &mut HashSet<String>) -> Vec<String> {
    let mut words = Vec::with_capacity(n);
    while words.len() < n {
        let syllables = rng.random_range(2..=4);
        let word: String = (0..syllables)
            .map(|_| format!("{}{}", ONSETS.choose(rng).unwrap(), VOWELS.choose(rng).unwrap()))
            .collect();
        if taken.insert(word.clone()) {
            words.push(word);
        }
    }
    words
}

fn zipf(n: usize) -> WeightedIndex<f64> {
    WeightedIndex::new((0..n).map(|r| 1.0 / (r + 1) as f64)).expect("non-empty lexicon")
}

#[derive(Debug, Clone)]
pub struct TopicCorpus {
    pub name: String,
    pub labels: usize,
    pub docs_per_label: usize,
    pub topic_words: usize,
    pub shared_words: usize,
    /// Probability that a token comes from the document's topic lexicon.
    pub topic_weight: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl TopicCorpus {
    pub fn new(labels: usize, docs_per_label: usize, seed: u64) -> Self {
        TopicCorpus {
            name: "toy".to_string(),
            labels,
            docs_per_label,
            topic_words: 150,
            shared_words: 300,
            topic_weight: 0.3,
            min_len: 40,
            max_len: 160,
            seed,
        }
    }

    /// Documents labelled `{name}-{k}`, ids `{name}-{k}-{i}`, interleaved by
    /// label.
    pub fn generate(&self) -> Dataset {
        let mut rng = seed::stream(self.seed, &format!("fixture/{}", self.name));
        let mut taken = HashSet::new();
        let shared = lexicon(self.shared_words, &mut rng, &mut taken);
        let topics: Vec<Vec<String>> = (0..self.labels)
            .map(|_| lexicon(self.topic_words, &mut rng, &mut taken))
            .collect();
        let (shared_dist, topic_dist) = (zipf(shared.len()), zipf(self.topic_words));
        let mut docs = Vec::with_capacity(self.labels * self.docs_per_label);
        for i in 0..self.docs_per_label {
            for (k, topic) in topics.iter().enumerate() {
                let len = rng.random_range(self.min_len..=self.max_len);
                let words: Vec<&str> = (0..len)
                    .map(|_| {
                        if rng.random_bool(self.topic_weight) {
                            topic[topic_dist.sample(&mut rng)].as_str()
                        } else {
                            shared[shared_dist.sample(&mut rng)].as_str()
                        }
                    })
                    .collect();
                docs.push(Document::new(
                    format!("{}-{k}-{i}", self.name),
                    words.join(" "),
                    format!("{}-{k}", self.name),
                ));
            }
        }
        Dataset::new(self.name.clone(), docs).expect("generated ids are unique")
    }
}

/// Out-of-domain text over its own 2000-word lexicon.
pub fn distractor_corpus(docs: usize, seed: u64) -> Dataset {
    let mut rng = seed::stream(seed, "fixture/distractor");
    let words = lexicon(2000, &mut rng, &mut HashSet::new());
    let dist = zipf(words.len());
    let documents = (0..docs)
        .map(|i| {
            let len = rng.random_range(20..=120);
            let text: Vec<&str> = (0..len).map(|_| words[dist.sample(&mut rng)].as_str()).collect();
            Document::new(format!("distractor-{i}"), text.join(" "), "distractor")
        })
        .collect();
    Dataset::new("distractor", documents).expect("generated ids are unique")
}

/// Five source collections with their own lexicons, lengths and topic
/// strength. Each has three internal labels; a synthetic build relabels by
/// source.
pub fn source_corpora(docs_per_label: usize, seed: u64) -> Vec<(String, Dataset)> {
    let styles = [
        ("forum", 0.35, 60, 220),
        ("reviews", 0.25, 20, 90),
        ("news", 0.30, 120, 300),
        ("abstracts", 0.40, 80, 160),
        ("tickets", 0.20, 10, 50),
    ];
    styles
        .iter()
        .enumerate()
        .map(|(i, &(name, weight, min_len, max_len))| {
            let spec = TopicCorpus {
                name: name.to_string(),
                labels: 3,
                docs_per_label,
                topic_words: 200,
                shared_words: 250,
                topic_weight: weight,
                min_len,
                max_len,
                seed: seed::derive_indexed(seed, "fixture/source", i as u64),
            };
            (name.to_string(), spec.generate())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_corpus_is_balanced_and_seeded() {
        let d = TopicCorpus::new(4, 25, 3).generate();
        assert_eq!(d.len(), 100);
        assert_eq!(d.label_set().len(), 4);
        assert!(d.label_counts().iter().all(|(_, c)| *c == 25));
        assert_eq!(d, TopicCorpus::new(4, 25, 3).generate());
        assert_ne!(d, TopicCorpus::new(4, 25, 4).generate());
    }

    #[test]
    fn sources_have_distinct_names() {
        let sources = source_corpora(5, 1);
        let names: HashSet<&str> = sources.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names.len(), 5);
        assert!(sources.iter().all(|(_, d)| d.len() == 15));
    }

    #[test]
    fn distractor_is_nonempty_text() {
        let d = distractor_corpus(10, 2);
        assert_eq!(d.len(), 10);
        assert!(d.documents().iter().all(|doc| !doc.text.is_empty()));
    }
}
