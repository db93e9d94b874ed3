use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gdc_core::{ErrorKind, GdcError};

mod commands;
mod synth;

#[derive(Parser)]
#[command(name = "gdc", version, about = "Gaussian classifier over image embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expand class labels and caption templates into a generation manifest.
    Manifest {
        /// One label per line.
        #[arg(long)]
        labels: PathBuf,
        /// One template per line, each with a single `{}`. Defaults to the built-in eight.
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        per_template: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one Gaussian per class and write a model file.
    Fit {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value_t = gdc_core::DEFAULT_EPS, allow_hyphen_values = true)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score every embedding of an archive; writes one JSON record per line.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy report from a predictions file.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Per-class PCA plus Shapiro-Wilk tests on the leading components.
    Audit {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value_t = 30)]
        components: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Refit at several regularization values and score a held-out archive.
    AblateEps {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        heldout: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1e-4,1e-6,1e-8,1e-10", allow_hyphen_values = true)]
        eps: Vec<f64>,
    },
    /// Refit on seeded subsets of the references and score a held-out archive.
    AblateN {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        heldout: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "5,10,30,60,120,240")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = gdc_core::DEFAULT_EPS, allow_hyphen_values = true)]
        eps: f64,
        #[arg(long, default_value_t = 1)]
        trials: usize,
    },
    /// Time posterior scoring (image encoder excluded).
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
    },
    /// Replace reference rows with real embeddings (one-shot setting).
    Inject {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        real: PathBuf,
        #[arg(long, default_value_t = 1)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write synthetic Gaussian reference and held-out archives.
    Synth {
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 240)]
        rows: usize,
        #[arg(long, default_value_t = 100)]
        heldout_rows: usize,
        /// Standard deviation of the class means.
        #[arg(long, default_value_t = 1.0)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        heldout_out: Option<PathBuf>,
    },
}

fn exit_code(err: &GdcError) -> u8 {
    match err.kind() {
        ErrorKind::Input => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Shape => 4,
    }
}

fn run(cli: Cli) -> gdc_core::Result<String> {
    match cli.command {
        Command::Manifest { labels, templates, per_template, seed, out } => {
            commands::manifest(&labels, templates.as_deref(), per_template, seed, &out)
        }
        Command::Fit { embeddings, eps, out } => commands::fit(&embeddings, eps, &out),
        Command::Classify { model, embeddings, top_k, out } => commands::classify(&model, &embeddings, top_k, &out),
        Command::Eval { predictions } => commands::eval(&predictions),
        Command::Audit { embeddings, components, alpha } => commands::audit(&embeddings, components, alpha),
        Command::AblateEps { embeddings, heldout, eps } => commands::ablate_eps(&embeddings, &heldout, &eps),
        Command::AblateN { embeddings, heldout, n, seed, eps, trials } => {
            commands::ablate_n(&embeddings, &heldout, &n, eps, seed, trials)
        }
        Command::Bench { model, embeddings, repetitions } => commands::bench(&model, &embeddings, repetitions),
        Command::Inject { embeddings, real, per_class, seed, out } => {
            commands::inject(&embeddings, &real, per_class, seed, &out)
        }
        Command::Synth { classes, dim, rows, heldout_rows, separation, seed, out, heldout_out } => synth::run(
            &synth::SynthSpec { classes, dim, rows, heldout_rows, separation, seed },
            &out,
            heldout_out.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(output) => {
            print!("{output}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            if matches!(err.root(), GdcError::NotPositiveDefinite { .. }) {
                eprintln!("hint: the regularized covariance is singular; try a larger --eps");
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
