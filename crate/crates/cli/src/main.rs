use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use elsascreen::pipeline::{probe_manifest, EvalProtocol, Pipeline, PipelineConfig};

#[derive(Parser)]
#[command(name = "elsascreen", version, about = "Screen cartoon videos for disturbing content")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Pipeline config (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Manifest to use instead of the config's
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Decision threshold on the fused probability
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write PNG renders of the motion fields here
    #[arg(long, global = true)]
    dump_motion: Option<PathBuf>,
    /// Model directory (defaults to the config's models_dir)
    #[arg(long, global = true)]
    models: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Populate the feature cache for every video in the manifest
    Extract,
    /// Train the static and motion classifiers on cached features
    Train,
    /// Score every video in the manifest
    Predict {
        /// Predictions file (JSON lines)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the 1x2-fold protocol or a train/test evaluation
    Evaluate {
        #[arg(long, value_enum, default_value_t = ProtocolArg::OneByTwo)]
        protocol: ProtocolArg,
        /// Report directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate the manifest and check that every video decodes
    Probe,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    #[value(name = "1x2")]
    OneByTwo,
    Heldout,
}

fn load_config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let path = g.config.as_ref().context("--config is required")?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(m) = &g.manifest {
        cfg.manifest = m.clone();
    }
    if let Some(c) = &g.cache_dir {
        cfg.cache_dir = c.clone();
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(t) = g.threshold {
        cfg.threshold = t;
    }
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    if let Some(m) = &g.models {
        cfg.models_dir = m.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Command::Probe = cli.command {
        let manifest = match (&g.manifest, &g.config) {
            (Some(m), _) => m.clone(),
            (None, Some(_)) => load_config(g)?.manifest,
            (None, None) => bail!("probe needs --manifest or --config"),
        };
        let summary = probe_manifest(&manifest)?;
        for v in &summary.ok {
            println!(
                "{}\t{:.2}s\t{}x{}\t{}\tmotion_vectors={}",
                v.id, v.duration_s, v.width, v.height, v.codec, v.motion_vectors
            );
        }
        for f in &summary.failed {
            println!("{}\tFAILED\t{}", f.id, f.reason);
        }
        println!("{} ok, {} failed", summary.ok.len(), summary.failed.len());
        if !summary.failed.is_empty() {
            bail!("{} video(s) failed to probe", summary.failed.len());
        }
        return Ok(());
    }

    let pipeline = Pipeline::new(load_config(g)?)?;
    let dump = g.dump_motion.as_deref();
    match cli.command {
        Command::Extract => {
            let records = pipeline.records()?;
            let summary = pipeline.extract(&records, dump)?;
            for f in &summary.failed {
                println!("FAILED {}: {}", f.id, f.reason);
            }
            for f in &summary.no_motion {
                println!("no motion stream {}: {}", f.id, f.reason);
            }
            println!(
                "{summary} ({} cached, {} inference calls)",
                summary.cache_hits, summary.inference_calls
            );
            if summary.ok.is_empty() {
                bail!("no video was processed successfully");
            }
        }
        Command::Train => {
            let s = pipeline.train(&pipeline.config.models_dir)?;
            let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{:.1}%", 100.0 * x));
            println!("trained on {} videos", s.n_train);
            println!("static model: {} (training ACC {})", s.static_model.display(), pct(s.static_train_acc));
            match &s.motion_model {
                Some(p) => println!("motion model: {} (training ACC {})", p.display(), pct(s.motion_train_acc)),
                None => println!("motion model: not trained (too few videos with motion features)"),
            }
        }
        Command::Predict { out } => {
            let out = out.unwrap_or_else(|| pipeline.config.output_dir.join("predictions.jsonl"));
            let s = pipeline.predict(&pipeline.config.models_dir, &out, dump)?;
            for f in &s.extract.failed {
                println!("FAILED {}: {}", f.id, f.reason);
            }
            println!(
                "{} predictions ({} single-stream) written to {}",
                s.n_predicted,
                s.n_single_stream,
                s.predictions.display()
            );
            if s.n_predicted == 0 {
                bail!("no video could be scored");
            }
        }
        Command::Evaluate { protocol, out } => {
            let protocol = match protocol {
                ProtocolArg::OneByTwo => EvalProtocol::OneByTwo,
                ProtocolArg::Heldout => EvalProtocol::Heldout,
            };
            let out = out.unwrap_or_else(|| pipeline.config.output_dir.clone());
            let s = pipeline.evaluate(protocol, &out, dump)?;
            for f in &s.extract.failed {
                println!("FAILED {}: {}", f.id, f.reason);
            }
            if let Some(report) = &s.report {
                print!("{}", report.to_table());
            }
            println!("report written to {}", Path::new(&s.report_dir).join("report.json").display());
        }
        Command::Probe => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
