use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gbm_radiogenomics::pipeline::{run, Command, RunOptions};

/// Radiogenomic glioblastoma pipeline. Each command reads earlier artifacts
/// from the output directory and writes its own there.
#[derive(Parser)]
#[command(name = "gbmrg", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Write a synthetic cohort with volumes, masks, genes and survival.
    PhantomGenerate,
    /// Train one conditional GAN per synthesis task.
    SynthTrain,
    /// Fill missing modalities with trained synthesizers.
    SynthApply,
    /// Cross-validated segmentation training; saves one model per fold.
    SegTrain,
    /// Predict masks for every case with the fold ensemble.
    SegPredict,
    /// Dice and Hausdorff of the ensemble on the held-out cases.
    SegEval,
    /// Retrain on modality subsets and score each.
    AblateModalities,
    /// Radiomic feature table from reference or predicted masks.
    FeaturesExtract,
    /// Fit the survival model on the full cohort.
    SurvivalTrain,
    /// Cross-validated survival metrics per model and input source.
    SurvivalEval,
    /// SHAP attribution of the trained survival model.
    Explain,
    /// Formatted metric table and SHAP bar chart.
    Report,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::PhantomGenerate => Command::PhantomGenerate,
            Cmd::SynthTrain => Command::SynthTrain,
            Cmd::SynthApply => Command::SynthApply,
            Cmd::SegTrain => Command::SegTrain,
            Cmd::SegPredict => Command::SegPredict,
            Cmd::SegEval => Command::SegEval,
            Cmd::AblateModalities => Command::AblateModalities,
            Cmd::FeaturesExtract => Command::FeaturesExtract,
            Cmd::SurvivalTrain => Command::SurvivalTrain,
            Cmd::SurvivalEval => Command::SurvivalEval,
            Cmd::Explain => Command::Explain,
            Cmd::Report => Command::Report,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
    };
    let result = opts.resolve().and_then(|cfg| run(cli.command.into(), &cfg));
    match result {
        Ok(meta) => {
            for o in &meta.outputs {
                println!("{o}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("gbmrg {}: {e}", Command::from(cli.command).name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
