//! Regenerates the bundled datasets under `data/`.
//!
//! ```text
//! cargo run -p noisebench-core --example make_fixtures -- data
//! ```

use std::fs;
use std::path::PathBuf;

use noisebench_core::corpus::save_dataset;
use noisebench_core::fixtures::{distractor_corpus, source_corpora, TopicCorpus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".to_string()));
    fs::create_dir_all(root.join("sources"))?;
    save_dataset(&TopicCorpus::new(4, 250, 1).generate(), &root.join("toy.jsonl"))?;
    save_dataset(&distractor_corpus(300, 2), &root.join("distractor.jsonl"))?;
    for (name, dataset) in source_corpora(40, 3) {
        save_dataset(&dataset, &root.join("sources").join(format!("{name}.jsonl")))?;
    }
    Ok(())
}
