//! Flat `key = value` run configuration with dotted keys.
//!
//! ```text
//! # comments start with '#'
//! seed = 42
//! data.train = toy.jsonl
//! model.families = bow_linear, bag_embedding
//! noise.grid = 0, 0.25, 0.5, 0.75, 1
//! ```
//!
//! Relative paths in a file resolve against the file's directory; paths
//! given on the command line resolve against the working directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use noisebench_core::corpus::{load_dataset, load_label_directories, Dataset, Format, SplitSpec};
use noisebench_core::models::{ClassifierSpec, Family};
use noisebench_core::noise::{Distractor, Keep, Mechanisms, NoisePlan};
use noisebench_core::seed;
use noisebench_core::text::VocabRules;

/// Every recognized key with its default. An empty default means unset.
const KEYS: &[(&str, &str)] = &[
    ("seed", "42"),
    ("data.train", ""),
    ("data.test", ""),
    ("data.format", "jsonl"),
    ("data.subsample", "0"),
    ("split.test_fraction", "0.3"),
    ("split.stratified", "true"),
    ("split.seed", ""),
    ("model.families", "bow_linear"),
    ("model.epochs", "5"),
    ("model.learning_rate", "0.1"),
    ("model.l2", "0.0001"),
    ("model.embedding_dim", "100"),
    ("model.bigrams", "false"),
    ("model.seed", ""),
    ("vocab.min_count", "6"),
    ("vocab.max_doc_fraction", "0.5"),
    ("noise.level", "0"),
    ("noise.grid", "0,0.25,0.5,0.75,1"),
    ("noise.seed", ""),
    ("noise.enable_truncate", "true"),
    ("noise.enable_intersperse", "true"),
    ("noise.enable_flip", "true"),
    ("noise.enable_replicate", "true"),
    ("noise.keep", "prefix"),
    ("noise.distractor_path", ""),
    ("eval.folds", "5"),
    ("eval.seed", ""),
    ("output.dir", "out"),
];

const PATH_KEYS: &[&str] = &["data.train", "data.test", "noise.distractor_path", "output.dir"];

/// Seeds derived from the master seed unless set explicitly.
const SEED_KEYS: &[(&str, &str)] = &[
    ("split.seed", "split"),
    ("model.seed", "model"),
    ("noise.seed", "noise"),
    ("eval.seed", "folds"),
];

fn default_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Config::parse(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str, base: &Path) -> Result<Config> {
        let mut config = Config::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", n + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if config.values.contains_key(key) {
                bail!("line {}: duplicate key `{key}`", n + 1);
            }
            let value = if PATH_KEYS.contains(&key) && !value.is_empty() && Path::new(value).is_relative() {
                base.join(value).display().to_string()
            } else {
                value.to_string()
            };
            config.set(key, &value).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if default_of(key).is_none() {
            bail!("unknown config key `{key}`");
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies `key=value` overrides.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("override `{item}` is not key=value"))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// The value in effect for `key`; empty when unset without default.
    pub fn get(&self, key: &str) -> &str {
        match self.values.get(key) {
            Some(v) => v,
            None => default_of(key).unwrap_or_else(|| panic!("unregistered key {key}")),
        }
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.get(key);
        raw.parse()
            .map_err(|e| anyhow!("config key `{key}`: cannot parse `{raw}`: {e}"))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let raw = self.get(key);
        (!raw.is_empty()).then(|| PathBuf::from(raw))
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        let path = self
            .path(key)
            .ok_or_else(|| anyhow!("config key `{key}` is required"))?;
        if !path.exists() {
            bail!("`{key}` points to {}, which does not exist", path.display());
        }
        Ok(path)
    }

    fn list(&self, key: &str) -> Vec<&str> {
        self.get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect()
    }

    pub fn master_seed(&self) -> Result<u64> {
        self.parsed("seed")
    }

    /// An explicit sub-seed, or one derived from the master seed.
    pub fn sub_seed(&self, key: &str) -> Result<u64> {
        let tag = SEED_KEYS
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, t)| *t)
            .unwrap_or_else(|| panic!("{key} is not a seed key"));
        if self.get(key).is_empty() {
            Ok(seed::derive(self.master_seed()?, tag))
        } else {
            self.parsed(key)
        }
    }

    pub fn subsample_seed(&self) -> Result<u64> {
        Ok(seed::derive(self.master_seed()?, "subsample"))
    }

    pub fn families(&self) -> Result<Vec<Family>> {
        let families: Vec<Family> = self
            .list("model.families")
            .into_iter()
            .map(|f| f.parse().map_err(|e: String| anyhow!(e)))
            .collect::<Result<_>>()?;
        if families.is_empty() {
            bail!("model.families is empty");
        }
        Ok(families)
    }

    pub fn classifier(&self, family: Family) -> Result<ClassifierSpec> {
        let spec = ClassifierSpec {
            family,
            epochs: self.parsed("model.epochs")?,
            learning_rate: self.parsed("model.learning_rate")?,
            l2: self.parsed("model.l2")?,
            embedding_dim: self.parsed("model.embedding_dim")?,
            seed: self.sub_seed("model.seed")?,
            bigrams: self.parsed("model.bigrams")?,
            vocab: VocabRules {
                min_count: self.parsed("vocab.min_count")?,
                max_doc_fraction: self.parsed("vocab.max_doc_fraction")?,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn split(&self) -> Result<SplitSpec> {
        Ok(SplitSpec {
            test_fraction: self.parsed("split.test_fraction")?,
            seed: self.sub_seed("split.seed")?,
            stratified: self.parsed("split.stratified")?,
        })
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        self.list("noise.grid")
            .into_iter()
            .map(|v| v.parse().map_err(|_| anyhow!("noise.grid: `{v}` is not a number")))
            .collect()
    }

    pub fn folds(&self) -> Result<usize> {
        let folds: usize = self.parsed("eval.folds")?;
        if folds < 2 {
            bail!("eval.folds must be at least 2, got {folds}");
        }
        Ok(folds)
    }

    pub fn mechanisms(&self) -> Result<Mechanisms> {
        Ok(Mechanisms {
            truncate: self.parsed("noise.enable_truncate")?,
            intersperse: self.parsed("noise.enable_intersperse")?,
            flip: self.parsed("noise.enable_flip")?,
            replicate: self.parsed("noise.enable_replicate")?,
        })
    }

    /// Noise plan at `level`, loading the distractor corpus when one is set.
    /// The plan is validated, so a missing distractor is reported here.
    pub fn noise_plan(&self, level: f64) -> Result<NoisePlan> {
        let mut plan = NoisePlan::new(level, self.sub_seed("noise.seed")?);
        plan.mechanisms = self.mechanisms()?;
        plan.keep = self.parsed::<Keep>("noise.keep")?;
        if let Some(path) = self.path("noise.distractor_path") {
            let corpus = self.dataset(&path).context("loading distractor corpus")?;
            plan = plan.with_distractor(Arc::new(Distractor::from_dataset(&corpus)));
        }
        Ok(plan)
    }

    /// Loads a dataset in the configured format. Directories are read as
    /// one subdirectory per label.
    pub fn dataset(&self, path: &Path) -> Result<Dataset> {
        let dataset = if path.is_dir() {
            load_label_directories(path)?
        } else {
            let format: Format = self.parsed("data.format")?;
            load_dataset(path, format)?
        };
        Ok(dataset)
    }

    /// Every effective setting with derived seeds filled in, except the
    /// output directory.
    pub fn echo(&self) -> Result<BTreeMap<String, String>> {
        let mut echo: BTreeMap<String, String> = KEYS
            .iter()
            .filter(|(k, _)| *k != "output.dir")
            .map(|(k, _)| (k.to_string(), self.get(k).to_string()))
            .collect();
        for (key, _) in SEED_KEYS {
            echo.insert(key.to_string(), self.sub_seed(key)?.to_string());
        }
        Ok(echo)
    }
}

/// Serializes a noise plan as config lines that reproduce it.
pub fn render_plan(plan: &NoisePlan, distractor: Option<&Path>) -> String {
    let m = plan.mechanisms;
    let mut out = String::new();
    out.push_str(&format!("noise.level = {}\n", plan.level));
    out.push_str(&format!("noise.seed = {}\n", plan.seed));
    out.push_str(&format!("noise.enable_truncate = {}\n", m.truncate));
    out.push_str(&format!("noise.enable_intersperse = {}\n", m.intersperse));
    out.push_str(&format!("noise.enable_flip = {}\n", m.flip));
    out.push_str(&format!("noise.enable_replicate = {}\n", m.replicate));
    out.push_str(&format!("noise.keep = {}\n", plan.keep.as_str()));
    if let Some(path) = distractor {
        out.push_str(&format!("noise.distractor_path = {}\n", path.display()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_defaults_and_paths() {
        let c = Config::parse(
            "# run\nseed = 7\n\ndata.train = toy.jsonl\nmodel.families = bow_linear, bag_embedding\n",
            Path::new("/cfg"),
        )
        .unwrap();
        assert_eq!(c.master_seed().unwrap(), 7);
        assert_eq!(c.path("data.train").unwrap(), PathBuf::from("/cfg/toy.jsonl"));
        assert_eq!(c.families().unwrap(), vec![Family::BowLinear, Family::BagEmbedding]);
        assert_eq!(c.folds().unwrap(), 5);
        assert_eq!(c.grid().unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(Config::parse("model.familes = x\n", Path::new("")).is_err());
        assert!(Config::parse("seed = 1\nseed = 2\n", Path::new("")).is_err());
        assert!(Config::parse("just a line\n", Path::new("")).is_err());
    }

    #[test]
    fn overrides_win_and_seeds_derive_from_master() {
        let mut c = Config::parse("seed = 1\neval.folds = 3\n", Path::new("")).unwrap();
        c.apply_overrides(&["eval.folds=4".to_string(), "noise.seed = 99".to_string()])
            .unwrap();
        assert_eq!(c.folds().unwrap(), 4);
        assert_eq!(c.sub_seed("noise.seed").unwrap(), 99);
        assert_eq!(c.sub_seed("split.seed").unwrap(), seed::derive(1, "split"));
        assert_ne!(c.sub_seed("split.seed").unwrap(), c.sub_seed("model.seed").unwrap());
    }

    #[test]
    fn rendered_plan_parses_back() {
        let mut plan = NoisePlan::new(0.3, 17);
        plan.mechanisms.flip = false;
        plan.keep = Keep::Suffix;
        let text = render_plan(&plan, None);
        let c = Config::parse(&text, Path::new("")).unwrap();
        let back = c.noise_plan(c.parsed("noise.level").unwrap()).unwrap();
        assert_eq!(back.level, 0.3);
        assert_eq!(back.seed, 17);
        assert_eq!(back.mechanisms, plan.mechanisms);
        assert_eq!(back.keep, Keep::Suffix);
    }

    #[test]
    fn echo_lists_every_key_but_the_output_dir() {
        let echo = Config::default().echo().unwrap();
        assert_eq!(echo.len(), KEYS.len() - 1);
        assert!(!echo.contains_key("output.dir"));
        assert_eq!(echo["noise.seed"], seed::derive(42, "noise").to_string());
    }
}
