//! Line-oriented model container.
//!
//! ```text
//! noisebench-model 1
//! family bow_linear
//! bigrams false
//! labels 2
//! "first label"
//! "second label"
//! vocabulary 3
//! #total_docs 10
//! tok 0 7 3
//! ...
//! block weights 2 3
//! 0.1 -0.25 0
//! ...
//! end
//! ```
//!
//! Vocabulary fields are tab-separated (shown with spaces above). Labels are
//! JSON string literals. Floats use the shortest representation
//! that parses back to the same bits, so a save/load round trip is exact.

use std::io::{BufRead, Write};

use super::embedding::EmbeddingParams;
use super::linear::LinearParams;
use super::{Family, ModelError, Parameters, Result, TrainedModel};
use crate::text::Vocabulary;

const MAGIC: &str = "noisebench-model 1";

fn write_block<W: Write>(out: &mut W, name: &str, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    writeln!(out, "block {name} {rows} {cols}")?;
    for row in data.chunks(cols.max(1)).take(rows) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn write_model<W: Write>(model: &TrainedModel, mut out: W) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "family {}", model.family())?;
    writeln!(out, "bigrams {}", model.bigrams)?;
    writeln!(out, "labels {}", model.label_order.len())?;
    for label in &model.label_order {
        writeln!(out, "{}", serde_json::to_string(label).expect("string serializes"))?;
    }
    writeln!(out, "vocabulary {}", model.vocabulary.len())?;
    model.vocabulary.write_dump(&mut out)?;
    match &model.params {
        Parameters::BowLinear(p) => {
            write_block(&mut out, "weights", p.labels(), p.features, &p.weights)?;
            write_block(&mut out, "bias", 1, p.labels(), &p.bias)?;
        }
        Parameters::BagEmbedding(p) => {
            write_block(&mut out, "embeddings", p.features(), p.dim, &p.embeddings)?;
            write_block(&mut out, "output", p.labels(), p.dim, &p.output)?;
            write_block(&mut out, "bias", 1, p.labels(), &p.bias)?;
        }
    }
    writeln!(out, "end")?;
    out.flush()?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(line) => Ok(line?),
            None => Err(self.error("unexpected end of file")),
        }
    }

    fn error(&self, message: impl Into<String>) -> ModelError {
        ModelError::Container {
            line: self.line,
            message: message.into(),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<String> {
        let line = self.next()?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| self.error(format!("expected `{key} ...`")))
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let value = self.keyed(key)?;
        value.parse().map_err(|_| self.error(format!("bad {key} count")))
    }

    fn block(&mut self, name: &str) -> Result<(usize, usize, Vec<f64>)> {
        let header = self.keyed("block")?;
        let parts: Vec<&str> = header.split(' ').collect();
        if parts.len() != 3 || parts[0] != name {
            return Err(self.error(format!("expected `block {name} ROWS COLS`")));
        }
        let rows: usize = parts[1].parse().map_err(|_| self.error("bad row count"))?;
        let cols: usize = parts[2].parse().map_err(|_| self.error("bad column count"))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = self.next()?;
            let before = data.len();
            for field in line.split(' ').filter(|f| !f.is_empty()) {
                data.push(field.parse::<f64>().map_err(|_| self.error("bad float"))?);
            }
            if data.len() - before != cols {
                return Err(self.error(format!("expected {cols} values")));
            }
        }
        Ok((rows, cols, data))
    }
}

pub fn read_model<R: BufRead>(input: R) -> Result<TrainedModel> {
    let mut lines = Lines {
        inner: input.lines(),
        line: 0,
    };
    if lines.next()? != MAGIC {
        return Err(lines.error("not a noisebench model container"));
    }
    let family: Family = lines.keyed("family")?.parse().map_err(|e: String| lines.error(e))?;
    let bigrams = match lines.keyed("bigrams")?.as_str() {
        "true" => true,
        "false" => false,
        _ => return Err(lines.error("bigrams must be true or false")),
    };
    let n_labels = lines.count("labels")?;
    let mut label_order = Vec::with_capacity(n_labels);
    for _ in 0..n_labels {
        let line = lines.next()?;
        let label: String = serde_json::from_str(&line).map_err(|e| lines.error(e.to_string()))?;
        label_order.push(label);
    }
    let n_vocab = lines.count("vocabulary")?;
    let mut dump = String::new();
    for _ in 0..=n_vocab {
        dump.push_str(&lines.next()?);
        dump.push('\n');
    }
    let vocabulary = Vocabulary::read_dump(dump.as_bytes()).map_err(|e| lines.error(e.to_string()))?;
    let params = match family {
        Family::BowLinear => {
            let (rows, cols, weights) = lines.block("weights")?;
            let (_, _, bias) = lines.block("bias")?;
            if rows != n_labels || cols != vocabulary.len() || bias.len() != n_labels {
                return Err(lines.error("parameter shapes disagree with labels/vocabulary"));
            }
            Parameters::BowLinear(LinearParams {
                weights,
                bias,
                features: cols,
            })
        }
        Family::BagEmbedding => {
            let (rows, dim, embeddings) = lines.block("embeddings")?;
            let (out_rows, out_dim, output) = lines.block("output")?;
            let (_, _, bias) = lines.block("bias")?;
            if rows != vocabulary.len() || out_rows != n_labels || out_dim != dim || bias.len() != n_labels {
                return Err(lines.error("parameter shapes disagree with labels/vocabulary"));
            }
            Parameters::BagEmbedding(EmbeddingParams {
                dim,
                embeddings,
                output,
                bias,
            })
        }
    };
    if lines.next()? != "end" {
        return Err(lines.error("expected `end`"));
    }
    Ok(TrainedModel {
        bigrams,
        vocabulary,
        label_order,
        params,
    })
}
