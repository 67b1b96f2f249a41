use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gbh_core::pipeline::{cmd_bench, cmd_eval, cmd_extract, cmd_train, run_protocol};
use gbh_core::synth::gen_dataset;
use gbh_core::{DatasetSpec, DescriptorKind, Error, Manifest, Model, PipelineConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "gbh", version, about = "Gradient boundary histogram action recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract per-clip feature dumps.
    Extract {
        #[command(flatten)]
        common: Common,
        /// Output directory for the dumps.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit encoders and classifiers, then write a model file.
    Train {
        #[command(flatten)]
        common: Common,
        /// Test split to hold out; all clips train when omitted.
        #[arg(long)]
        split: Option<u32>,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Report accuracy of a saved model, or train and test `--runs` times.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Split to test; all clips when omitted.
        #[arg(long)]
        split: Option<u32>,
        /// Saved model. Without it each run trains with seeds 1..=runs.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        runs: usize,
    },
    /// Time the integral, sampling and encoding stages.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Encoders to use; fit untimed on the manifest when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Render a synthetic moving-object dataset with a manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 24)]
        clips_per_class: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 48)]
        height: usize,
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Descriptor {
    Gbh,
    Hog,
}

#[derive(Args)]
struct Common {
    /// JSON-lines clip manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// TOML pipeline config; built-in defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Small-scale defaults (K = 16, 500 features per clip).
    #[arg(long, conflicts_with = "config")]
    desk: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    resolution_factor: Option<f64>,
    #[arg(long, overrides_with = "no_smooth")]
    smooth: bool,
    #[arg(long, overrides_with = "smooth")]
    no_smooth: bool,
    #[arg(long, value_enum)]
    descriptor: Option<Descriptor>,
    #[arg(long)]
    codewords: Option<usize>,
    /// Also write the JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> gbh_core::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None if self.desk => PipelineConfig::desk(),
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(r) = self.resolution_factor {
            cfg.extract.resolution_factor = r;
        }
        if self.smooth {
            cfg.extract.smooth = true;
        }
        if self.no_smooth {
            cfg.extract.smooth = false;
        }
        if let Some(d) = self.descriptor {
            cfg.extract.descriptor = match d {
                Descriptor::Gbh => DescriptorKind::Gbh,
                Descriptor::Hog => DescriptorKind::Hog,
            };
        }
        if let Some(k) = self.codewords {
            cfg.codewords = k;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn manifest(&self) -> gbh_core::Result<Manifest> {
        Manifest::load(&self.manifest)
    }
}

fn report<T: Serialize + Display>(value: &T, json: Option<&Path>) -> gbh_core::Result<()> {
    print!("{value}");
    if let Some(p) = json {
        std::fs::write(p, serde_json::to_string_pretty(value)?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> gbh_core::Result<ExitCode> {
    match cli.command {
        Command::Extract { common, out } => {
            let cfg = common.config()?;
            let r = cmd_extract(&common.manifest()?, &cfg, &out)?;
            report(&r, common.json.as_deref())?;
            if r.failures > 0 {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Train { common, split, out } => {
            let cfg = common.config()?;
            let (model, r) = cmd_train(&common.manifest()?, split, &cfg)?;
            model.save(&out)?;
            report(&r, common.json.as_deref())?;
            println!("model written to {}", out.display());
        }
        Command::Eval {
            common,
            split,
            model,
            runs,
        } => {
            let cfg = common.config()?;
            let manifest = common.manifest()?;
            match model {
                Some(p) => {
                    if runs != 1 {
                        return Err(Error::Usage("--runs needs training; drop --model".into()));
                    }
                    let r = cmd_eval(&manifest, split, &Model::load(&p)?, &cfg)?;
                    report(&r, common.json.as_deref())?;
                }
                None => report(&run_protocol(&manifest, split, &cfg, runs)?, common.json.as_deref())?,
            }
        }
        Command::Bench { common, model } => {
            let cfg = common.config()?;
            let model = model.map(|p| Model::load(&p)).transpose()?;
            let r = cmd_bench(&common.manifest()?, &cfg, model.as_ref())?;
            report(&r, common.json.as_deref())?;
        }
        Command::Synth {
            out,
            clips_per_class,
            width,
            height,
            frames,
            seed,
        } => {
            let ds = DatasetSpec {
                width,
                height,
                frames,
                ..DatasetSpec::directions(clips_per_class, seed)
            };
            let m = gen_dataset(&ds, &out)?;
            println!(
                "{} clips in {} classes, manifest {}",
                m.len(),
                m.num_classes(),
                out.join("manifest.jsonl").display()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
