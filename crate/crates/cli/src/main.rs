use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::Config;

#[derive(Parser)]
#[command(name = "noisebench", version, about = "Noise-robustness sweeps for text classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by commands that read a run configuration.
#[derive(Args, Debug)]
struct Common {
    /// Run configuration file (`key = value` lines).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override a configuration value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed; all sub-seeds derive from it.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn config(&self) -> anyhow::Result<Config> {
        let mut config = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        config.apply_overrides(&self.overrides)?;
        if let Some(seed) = self.seed {
            config.set("seed", &seed.to_string())?;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Load a corpus, write it as canonical JSON lines and summarize it.
    Ingest {
        /// Input file, or a directory with one subdirectory per label.
        input: PathBuf,
        /// jsonl, csv or tsv. Ignored for directories.
        #[arg(long, default_value = "jsonl")]
        format: String,
        #[arg(long)]
        out: PathBuf,
        /// Summary JSON path. Defaults to `<out>` with a `.summary.json` extension.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Merge source corpora into one dataset labeled by source.
    Synth {
        /// `NAME=PATH`, or a bare path named after its file stem.
        #[arg(required = true)]
        sources: Vec<String>,
        #[arg(long, default_value = "jsonl")]
        format: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Split a dataset into train and test files.
    Split {
        dataset: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        test_fraction: Option<f64>,
        #[arg(long)]
        no_stratify: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Inject noise into a training dataset.
    Noise {
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        level: Option<f64>,
        /// Corpus supplying interspersed text.
        #[arg(long)]
        distractor: Option<PathBuf>,
        /// Which end survives truncation: prefix or suffix.
        #[arg(long)]
        keep: Option<String>,
        /// Turn a mechanism off: truncate, intersperse, flip or replicate.
        #[arg(long, value_name = "MECHANISM")]
        disable: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Train a classifier and save the model container.
    Train {
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// bow_linear or bag_embedding.
        #[arg(long)]
        family: Option<String>,
        /// Also write the vocabulary dump here.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score a saved model on a dataset.
    Eval {
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "jsonl")]
        format: String,
        /// Write the result JSON here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the dirty-vs-clean noise sweep and write report.json and curves.csv
    /// per classifier family.
    Sweep {
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

/// A command failure with its exit status.
pub enum Failure {
    /// Bad usage, configuration or input data.
    Usage(anyhow::Error),
    /// Anything that goes wrong while running.
    Runtime(anyhow::Error),
}

impl Failure {
    fn report(self) -> ExitCode {
        let (code, err) = match self {
            Failure::Usage(e) => (2, e),
            Failure::Runtime(e) => (3, e),
        };
        eprintln!("error: {err:#}");
        ExitCode::from(code)
    }
}

pub trait Classify<T> {
    fn usage(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Ingest {
            input,
            format,
            out,
            summary,
        } => commands::ingest(&input, &format, &out, summary),
        Command::Synth {
            sources,
            format,
            out,
            summary,
        } => commands::synth(&sources, &format, &out, summary),
        Command::Split {
            dataset,
            out,
            test_fraction,
            no_stratify,
            common,
        } => {
            let mut config = common.config().usage()?;
            if let Some(f) = test_fraction {
                config.set("split.test_fraction", &f.to_string()).usage()?;
            }
            if no_stratify {
                config.set("split.stratified", "false").usage()?;
            }
            commands::split(&config, &dataset, &out)
        }
        Command::Noise {
            dataset,
            out,
            level,
            distractor,
            keep,
            disable,
            common,
        } => {
            let mut config = common.config().usage()?;
            if let Some(level) = level {
                config.set("noise.level", &level.to_string()).usage()?;
            }
            if let Some(path) = distractor {
                config
                    .set("noise.distractor_path", &path.display().to_string())
                    .usage()?;
            }
            if let Some(keep) = keep {
                config.set("noise.keep", &keep).usage()?;
            }
            for mechanism in disable {
                config.set(&format!("noise.enable_{mechanism}"), "false").usage()?;
            }
            commands::noise(&config, &dataset, &out)
        }
        Command::Train {
            dataset,
            out,
            family,
            vocab,
            common,
        } => {
            let mut config = common.config().usage()?;
            if let Some(family) = family {
                config.set("model.families", &family).usage()?;
            }
            commands::train(&config, &dataset, &out, vocab.as_deref())
        }
        Command::Eval {
            dataset,
            model,
            format,
            out,
        } => commands::eval(&dataset, &model, &format, out.as_deref()),
        Command::Sweep { out, common } => {
            let mut config = common.config().usage()?;
            if let Some(out) = out {
                config.set("output.dir", &out.display().to_string()).usage()?;
            }
            commands::sweep(&config)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => failure.report(),
    }
}
