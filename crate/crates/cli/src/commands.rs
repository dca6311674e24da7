use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use noisebench_core::corpus::{
    build_synthetic, load_dataset, load_label_directories, save_dataset, split_train_test, subsample, summarize,
    Dataset, Format, TEST_SUFFIX, TRAIN_SUFFIX,
};
use noisebench_core::eval::{self, EvalError, SweepSettings};
use noisebench_core::models::{self, read_model, write_model, ModelError};
use noisebench_core::noise::apply_noise;

use crate::config::{render_plan, Config};
use crate::{Classify, Failure};

type Outcome = Result<(), Failure>;

fn load_input(path: &Path, format: &str) -> Result<Dataset, Failure> {
    if path.is_dir() {
        return load_label_directories(path).usage();
    }
    let format: Format = format.parse().map_err(|e: String| Failure::Usage(anyhow!(e)))?;
    load_dataset(path, format).usage()
}

fn create_parent(path: &Path) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))
            .runtime()?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Outcome {
    create_parent(path)?;
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .runtime()
}

fn save(dataset: &Dataset, path: &Path) -> Outcome {
    create_parent(path)?;
    save_dataset(dataset, path).runtime()
}

fn write_summary(dataset: &Dataset, out: &Path, summary: Option<PathBuf>) -> Outcome {
    let summary_path = summary.unwrap_or_else(|| out.with_extension("summary.json"));
    let json = serde_json::to_string_pretty(&summarize(dataset)).runtime()?;
    println!("{json}");
    write_text(&summary_path, &format!("{json}\n"))
}

pub fn ingest(input: &Path, format: &str, out: &Path, summary: Option<PathBuf>) -> Outcome {
    let dataset = load_input(input, format)?;
    save(&dataset, out)?;
    write_summary(&dataset, out, summary)
}

pub fn synth(sources: &[String], format: &str, out: &Path, summary: Option<PathBuf>) -> Outcome {
    let mut loaded = Vec::with_capacity(sources.len());
    for source in sources {
        let (name, path) = match source.split_once('=') {
            Some((name, path)) => (name.to_string(), PathBuf::from(path)),
            None => {
                let path = PathBuf::from(source);
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .ok_or_else(|| Failure::Usage(anyhow!("cannot name source `{source}`")))?;
                (stem, path)
            }
        };
        loaded.push((name, load_input(&path, format)?));
    }
    let dataset = build_synthetic(&loaded).usage()?;
    save(&dataset, out)?;
    write_summary(&dataset, out, summary)
}

pub fn split(config: &Config, dataset: &Path, out: &Path) -> Outcome {
    let data = config.dataset(dataset).usage()?;
    let (train, test) = split_train_test(&data, &config.split().usage()?).usage()?;
    for part in [&train, &test] {
        let path = out.join(format!("{}.jsonl", part.name()));
        save(part, &path)?;
        println!("{}\t{} documents", path.display(), part.len());
    }
    Ok(())
}

pub fn noise(config: &Config, dataset: &Path, out: &Path) -> Outcome {
    let data = config.dataset(dataset).usage()?;
    let level: f64 = config.parsed("noise.level").usage()?;
    let plan = config.noise_plan(level).usage()?;
    plan.validate().usage()?;
    let noised = apply_noise(&data, &plan).usage()?;
    save(&noised, out)?;
    let distractor = config.path("noise.distractor_path");
    let plan_path = PathBuf::from(format!("{}.plan", out.display()));
    write_text(&plan_path, &render_plan(&plan, distractor.as_deref()))?;
    println!("{}\t{} documents", out.display(), noised.len());
    Ok(())
}

pub fn train(config: &Config, dataset: &Path, out: &Path, vocab: Option<&Path>) -> Outcome {
    let data = config.dataset(dataset).usage()?;
    let family = config.families().usage()?[0];
    let spec = config.classifier(family).usage()?;
    let model = models::train(&data, &spec).map_err(|e| match e {
        ModelError::TooFewLabels(_) | ModelError::EmptyVocabulary => Failure::Usage(e.into()),
        other => Failure::Runtime(other.into()),
    })?;
    create_parent(out)?;
    let file = File::create(out)
        .with_context(|| format!("creating {}", out.display()))
        .runtime()?;
    write_model(&model, BufWriter::new(file)).runtime()?;
    if let Some(path) = vocab {
        write_text(path, &model.vocabulary().dump_string())?;
    }
    println!(
        "{}\t{family}\t{} labels\t{} features",
        out.display(),
        model.label_order().len(),
        model.vocabulary().len()
    );
    Ok(())
}

pub fn eval(dataset: &Path, model: &Path, format: &str, out: Option<&Path>) -> Outcome {
    let file = File::open(model)
        .with_context(|| format!("opening {}", model.display()))
        .usage()?;
    let trained = read_model(BufReader::new(file)).usage()?;
    let data = load_input(dataset, format)?;
    let accuracy = models::evaluate(&trained, &data).usage()?;
    let result = serde_json::json!({
        "model": model.display().to_string(),
        "family": trained.family().as_str(),
        "dataset": data.name(),
        "documents": data.len(),
        "accuracy": accuracy,
    });
    let json = serde_json::to_string_pretty(&result).runtime()?;
    println!("{json}");
    if let Some(path) = out {
        write_text(path, &format!("{json}\n"))?;
    }
    Ok(())
}

/// Train and clean-test sets for a sweep: an explicit test file, or a
/// seeded split of the training file.
fn sweep_data(config: &Config) -> Result<(Dataset, Dataset), Failure> {
    let mut data = config.dataset(&config.require_path("data.train").usage()?).usage()?;
    let n: usize = config.parsed("data.subsample").usage()?;
    if n > 0 {
        data = subsample(&data, n, config.subsample_seed().usage()?).usage()?;
    }
    match config.path("data.test") {
        Some(_) => {
            let test = config.dataset(&config.require_path("data.test").usage()?).usage()?;
            let name = data.name().trim_end_matches(TRAIN_SUFFIX).to_string();
            let test_name = format!("{}{TEST_SUFFIX}", test.name().trim_end_matches(TEST_SUFFIX));
            Ok((data.renamed(format!("{name}{TRAIN_SUFFIX}")), test.renamed(test_name)))
        }
        None => split_train_test(&data, &config.split().usage()?).usage(),
    }
}

pub fn sweep(config: &Config) -> Outcome {
    let families = config.families().usage()?;
    let specs = families
        .iter()
        .map(|&f| config.classifier(f))
        .collect::<anyhow::Result<Vec<_>>>()
        .usage()?;
    let grid = config.grid().usage()?;
    eval::validate_grid(&grid).usage()?;
    let folds = config.folds().usage()?;
    let plan = config.noise_plan(0.0).usage()?;
    if grid.iter().any(|&p| p > 0.0) {
        plan.at_level(1.0).validate().usage()?;
    }
    let (train, test) = sweep_data(config)?;
    let fold_seed = config.sub_seed("eval.seed").usage()?;
    let echo = config.echo().usage()?;
    let out_dir = PathBuf::from(config.get("output.dir"));
    for spec in specs {
        let family = spec.family;
        let settings = SweepSettings {
            spec,
            grid: grid.clone(),
            plan: plan.clone(),
            folds,
            fold_seed,
        };
        let mut report = eval::sweep(&train, &test, &settings).map_err(|e| {
            let cause = match &e {
                EvalError::Level { source, .. } => source.as_ref(),
                other => other,
            };
            match cause {
                EvalError::LabelMismatch { .. } | EvalError::TooManyFolds { .. } | EvalError::TooFewFolds(_) => {
                    Failure::Usage(e.into())
                }
                _ => Failure::Runtime(e.into()),
            }
        })?;
        report.metadata.config = echo.clone();
        let dir = out_dir.join(family.as_str());
        let json = serde_json::to_string_pretty(&report).runtime()?;
        write_text(&dir.join("report.json"), &format!("{json}\n"))?;
        let mut csv = Vec::new();
        report.write_csv(&mut csv).runtime()?;
        write_text(&dir.join("curves.csv"), &String::from_utf8(csv).runtime()?)?;
        println!("{family}");
        println!("  level  dirty_cv  clean_test");
        for p in &report.points {
            println!("  {:<5}  {:<8.4}  {:.4}", p.level, p.dirty_cv_mean, p.clean_test);
        }
        println!("  wrote {}", dir.display());
        std::io::stdout().flush().runtime()?;
    }
    Ok(())
}
