use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use cutnmf::data::{generate_synthetic, write_generic_csv, write_ground_truth, SyntheticSpec};
use cutnmf::RatingScale;
use cutnmf_harness::report::render_report;
use cutnmf_harness::study::{run_accuracy_study, run_convergence_study, StudyOutput};
use cutnmf_harness::{parse_settings, ExperimentConfig};
use log::info;

#[derive(Parser)]
#[command(name = "cutnmf", version, about = "Matrix-completion recommender experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on every observed rating and trace convergence.
    Converge(StudyArgs),
    /// Train on a split and score the held-out ratings.
    Evaluate(StudyArgs),
    /// Merge results files into a summary table.
    Report {
        /// `results.csv` files to merge
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Write a planted low-rank dataset and its ground truth.
    GenSynthetic {
        #[arg(long)]
        users: usize,
        #[arg(long)]
        items: usize,
        #[arg(long)]
        rank: usize,
        #[arg(long)]
        observed: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        vmin: u8,
        #[arg(long, default_value_t = 5)]
        vmax: u8,
        #[arg(long, default_value = "synthetic")]
        out: PathBuf,
    },
}

/// Study settings. Each flag overrides the same key of `--config`.
#[derive(Args)]
struct StudyArgs {
    /// File of `key = value` lines using the flag names as keys
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    /// movielens_100k, movielens_1m, movielens_10m, synthetic or generic_csv
    #[arg(long)]
    format: Option<String>,
    /// Comma-separated ranks
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    jmax: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Training fraction
    #[arg(long)]
    split: Option<String>,
    /// Comma-separated: cutnmf, knn, nmf, rnmf
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    trace_every: Option<String>,
    #[arg(long)]
    eval_sets: Option<String>,
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    vmin: Option<String>,
    #[arg(long)]
    vmax: Option<String>,
    #[arg(long)]
    users: Option<String>,
    #[arg(long)]
    items: Option<String>,
    #[arg(long)]
    rank: Option<String>,
    #[arg(long)]
    observed: Option<String>,
    #[arg(long)]
    inner_sweeps: Option<String>,
    #[arg(long)]
    coord_tol: Option<String>,
    #[arg(long)]
    greedy: Option<String>,
    #[arg(long)]
    knn_neighbors: Option<String>,
    #[arg(long)]
    knn_min_overlap: Option<String>,
    #[arg(long)]
    knn_fallback: Option<String>,
    #[arg(long)]
    rnmf_lambda: Option<String>,
    #[arg(long)]
    rnmf_lr: Option<String>,
    #[arg(long)]
    rnmf_epochs: Option<String>,
    #[arg(long)]
    nmf_iterations: Option<String>,
}

impl StudyArgs {
    fn flags(&self) -> [(&'static str, &Option<String>); 28] {
        [
            ("dataset", &self.dataset),
            ("format", &self.format),
            ("k", &self.k),
            ("jmax", &self.jmax),
            ("tol", &self.tol),
            ("seed", &self.seed),
            ("split", &self.split),
            ("algo", &self.algo),
            ("out", &self.out),
            ("trace-every", &self.trace_every),
            ("eval-sets", &self.eval_sets),
            ("threshold", &self.threshold),
            ("vmin", &self.vmin),
            ("vmax", &self.vmax),
            ("users", &self.users),
            ("items", &self.items),
            ("rank", &self.rank),
            ("observed", &self.observed),
            ("inner-sweeps", &self.inner_sweeps),
            ("coord-tol", &self.coord_tol),
            ("greedy", &self.greedy),
            ("knn-neighbors", &self.knn_neighbors),
            ("knn-min-overlap", &self.knn_min_overlap),
            ("knn-fallback", &self.knn_fallback),
            ("rnmf-lambda", &self.rnmf_lambda),
            ("rnmf-lr", &self.rnmf_lr),
            ("rnmf-epochs", &self.rnmf_epochs),
            ("nmf-iterations", &self.nmf_iterations),
        ]
    }

    fn settings(&self) -> Result<BTreeMap<String, String>> {
        let mut settings = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                parse_settings(&text, path)?
            }
            None => BTreeMap::new(),
        };
        for (key, value) in self.flags() {
            if let Some(v) = value {
                settings.insert(key.to_string(), v.clone());
            }
        }
        Ok(settings)
    }
}

fn summarize(out: &StudyOutput) {
    for path in std::iter::once(&out.results).chain(&out.scatter).chain(&out.traces) {
        println!("{}", path.display());
    }
}

fn gen_synthetic(spec: &SyntheticSpec, out: &Path) -> Result<()> {
    let data = generate_synthetic(spec)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_generic_csv(&data.ratings, &out.join("ratings.csv"))?;
    write_ground_truth(&data.ground_truth, &out.join("ground_truth.csv"))?;
    info!("{} ratings written to {}", data.ratings.len(), out.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Converge(args) => {
            let cfg = ExperimentConfig::from_settings(&args.settings()?)?;
            summarize(&run_convergence_study(&cfg)?);
        }
        Command::Evaluate(args) => {
            let mut settings = args.settings()?;
            settings.entry("split".into()).or_insert_with(|| "0.8".into());
            let cfg = ExperimentConfig::from_settings(&settings)?;
            summarize(&run_accuracy_study(&cfg)?);
        }
        Command::Report { inputs, out } => {
            let report = render_report(&inputs, &out)?;
            println!("{}", report.summary.display());
            println!("{}", report.scatter.display());
        }
        Command::GenSynthetic {
            users,
            items,
            rank,
            observed,
            seed,
            vmin,
            vmax,
            out,
        } => {
            let spec = SyntheticSpec {
                n_users: users,
                n_items: items,
                true_rank: rank,
                n_observed: observed,
                seed,
                scale: RatingScale::new(vmin, vmax)?,
            };
            gen_synthetic(&spec, &out)?;
        }
    }
    Ok(())
}
