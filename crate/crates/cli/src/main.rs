use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gmnet_cli::{
    cmd_ablate, cmd_caption, cmd_evaluate, cmd_gradcheck, cmd_synth, cmd_train, AblateArgs,
    CaptionArgs, CliResult, EvaluateArgs, GradcheckArgs, SynthArgs, TrainArgs,
};
use gmnet_core::model::Mode;

#[derive(Parser)]
#[command(name = "gmnet", version, about = "Guided attention LSTM video captioning")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic corpus (features.gmnf + captions.jsonl).
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// key=value file: n_clips, frames, feature_dim, vocab_size,
        /// min_words, max_words, seed.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        n_clips: Option<usize>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        feature_dim: Option<usize>,
        #[arg(long)]
        vocab_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one model and write a checkpoint plus loss logs.
    Train {
        #[arg(long, default_value = "GMNET")]
        mode: Mode,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        captions: PathBuf,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 8)]
        batch_size: usize,
        #[arg(long, default_value_t = 1)]
        min_count: usize,
        /// key=value model config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Config override, repeatable: --set hidden=128.
        #[arg(long = "set")]
        overrides: Vec<String>,
        #[arg(long)]
        ckpt: PathBuf,
    },
    /// Greedy-decode every clip of a feature file.
    Caption {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against reference captions.
    Evaluate {
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Compare analytic gradients with central differences.
    Gradcheck {
        #[arg(long, default_value = "tiny")]
        config: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
    /// Train and evaluate SA, SA_LN and GMNET under one seed.
    Ablate {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        captions: PathBuf,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 8)]
        batch_size: usize,
        #[arg(long, default_value_t = 1)]
        min_count: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set")]
        overrides: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cmd: Cmd) -> CliResult<()> {
    match cmd {
        Cmd::Synth {
            out,
            spec,
            n_clips,
            frames,
            feature_dim,
            vocab_size,
            seed,
        } => {
            cmd_synth(&SynthArgs {
                out,
                spec,
                n_clips,
                frames,
                feature_dim,
                vocab_size,
                seed,
            })?;
        }
        Cmd::Train {
            mode,
            features,
            captions,
            epochs,
            batch_size,
            min_count,
            config,
            overrides,
            ckpt,
        } => {
            let out = cmd_train(&TrainArgs {
                mode,
                features,
                captions,
                epochs,
                batch_size,
                min_count,
                config,
                overrides,
                ckpt,
            })?;
            if let Some(last) = out.epochs.last() {
                println!(
                    "epoch {}: L={:.4} L_e={:.4} L_all={:.4}",
                    last.epoch, last.l, last.l_e, last.l_all
                );
            }
        }
        Cmd::Caption {
            ckpt,
            features,
            out,
        } => {
            let preds = cmd_caption(&CaptionArgs {
                ckpt,
                features,
                out,
            })?;
            println!("{} captions written", preds.len());
        }
        Cmd::Evaluate {
            preds,
            refs,
            report,
        } => {
            cmd_evaluate(&EvaluateArgs {
                preds,
                refs,
                report,
            })?;
        }
        Cmd::Gradcheck {
            config,
            seed,
            report,
            inject_fault,
        } => {
            let r = cmd_gradcheck(&GradcheckArgs {
                config,
                seed,
                inject_fault,
                report,
            })?;
            println!("all {} components pass", r.len());
        }
        Cmd::Ablate {
            features,
            captions,
            epochs,
            batch_size,
            min_count,
            config,
            overrides,
            out,
        } => {
            cmd_ablate(&AblateArgs {
                features,
                captions,
                epochs,
                batch_size,
                min_count,
                config,
                overrides,
                out,
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
