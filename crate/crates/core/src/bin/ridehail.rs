use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ridehail::kv::KeyValues;
use ridehail::pipeline;
use ridehail::{Error, Result};

/// Ride-hailing demand forecasting experiments.
#[derive(Parser)]
#[command(name = "ridehail", version)]
struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Settings {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` setting; overrides the file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Settings {
    fn resolve(&self, extra: &[(&str, Option<String>)]) -> Result<KeyValues> {
        let mut kv = match &self.config {
            Some(p) => KeyValues::read(p)?,
            None => KeyValues::default(),
        };
        kv.merge(&KeyValues::parse(&self.set.join("\n"))?);
        for (k, v) in extra {
            if let Some(v) = v {
                kv.insert(k, v);
            }
        }
        Ok(kv)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic city: raw requests and covariates.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Aggregate raw requests into the slot table.
    Aggregate {
        /// Directory holding requests.csv, traffic.csv and weather.csv.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Rank attributes with RReliefF.
    Select {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Train one model.
    Train {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// dt, bdt, rf, gbdt or ann.
        #[arg(long)]
        model: Option<String>,
        /// Random-forest subspace size in percent of the predictors.
        #[arg(long)]
        delta: Option<String>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Evaluate a trained model on its validation rows.
    Evaluate {
        #[arg(long)]
        table: PathBuf,
        /// Output directory of `train`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Train and evaluate several models on one split.
    Compare {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated model list.
        #[arg(long)]
        models: Option<String>,
        #[command(flatten)]
        settings: Settings,
    },
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let seed = cli.seed;
    let done = |what: &str, out: &Path| println!("{what}: wrote {}", out.display());
    match cli.command {
        Command::Synth { out, settings } => {
            let m = pipeline::run_synth(&out, &settings.resolve(&[])?, seed)?;
            done(&format!("synth ({} requests)", m.details["requests"]), &out);
        }
        Command::Aggregate { input, out, settings } => {
            let m = pipeline::run_aggregate(&input, &out, &settings.resolve(&[])?, seed)?;
            done(&format!("aggregate ({} slots)", m.details["rows"]), &out);
        }
        Command::Select { table, out, settings } => {
            let m = pipeline::run_select(&table, &out, &settings.resolve(&[])?, seed)?;
            done(&format!("select ({})", m.details["selected"]), &out);
        }
        Command::Train {
            table,
            out,
            model,
            delta,
            settings,
        } => {
            let kv = settings.resolve(&[("model", model), ("delta", delta)])?;
            let m = pipeline::run_train(&table, &out, &kv, seed)?;
            done(&format!("train (validation rmse {})", m.details["valid_rmse"]), &out);
        }
        Command::Evaluate {
            table,
            model,
            out,
            settings,
        } => {
            let m = pipeline::run_evaluate(&table, &model, &out, &settings.resolve(&[])?)?;
            done(&format!("evaluate (rmse {})", m.details["rmse"]), &out);
        }
        Command::Compare {
            table,
            out,
            models,
            settings,
        } => {
            let (_, reports) = pipeline::run_compare(&table, &out, &settings.resolve(&[("models", models)])?, seed)?;
            print!("{}", ridehail::eval::comparison_table(&reports));
            done("compare", &out);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
