//! Command-line front end.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::anarx::InputMode;
use crate::error::{Error, Result};
use crate::pipeline::{
    load_csv_columns, run_experiment_with_state, snapshot_load, snapshot_save, ColumnRef,
    ModelState, RunConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "anarx",
    version,
    about = "Evolving neo-fuzzy ANARX online forecaster"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the train/test protocol and write a report.
    Bench(BenchArgs),
    /// Read observations from stdin and print the forecast of the next one
    /// after each line.
    Predict(PredictArgs),
    /// Save a trained model or inspect a saved one.
    #[command(subcommand)]
    Snapshot(SnapshotCommand),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Series CSV; overrides `data` in the config.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Target column, by header name or zero-based index.
    #[arg(long)]
    column: Option<String>,
    /// Exogenous input column; enables NARX mode.
    #[arg(long)]
    exog_column: Option<String>,
    /// Disable learning during the test segment.
    #[arg(long)]
    freeze_test: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Full JSON report including per-step records.
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Per-step CSV for plotting.
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    save_snapshot: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Continue from a saved model.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    snapshot: Option<PathBuf>,
    /// Start from a config: trained on its data if given, blank otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Keep the model fixed while predicting.
    #[arg(long)]
    no_learn: bool,
}

#[derive(Debug, Subcommand)]
enum SnapshotCommand {
    /// Train on the configured data and save the final model.
    Save {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify a snapshot and print its configuration and next forecast.
    Load {
        #[arg(long)]
        snapshot: PathBuf,
    },
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter("ANARX_LOG")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    match execute(cli.command, &mut stdin.lock(), &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Bench(args) => bench(args, out),
        Command::Predict(args) => predict(args, input, out),
        Command::Snapshot(SnapshotCommand::Save { data, out: path }) => {
            let (_, state) = train(&data)?;
            snapshot_save(&state, &path)?;
            writeln!(out, "{}", path.display())?;
            Ok(())
        }
        Command::Snapshot(SnapshotCommand::Load { snapshot }) => {
            let state = snapshot_load(&snapshot)?;
            let info = serde_json::json!({
                "config": state.config,
                "n": state.forecaster.model().n(),
                "parameter_count": state.forecaster.parameter_count(),
                "next_forecast": state.predict_next_raw()?,
            });
            writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&info).expect("plain values")
            )?;
            Ok(())
        }
    }
}

fn resolve_config(args: &DataArgs) -> Result<RunConfig> {
    let mut config = RunConfig::from_file(&args.config)?;
    if let Some(data) = &args.data {
        config.data = Some(data.clone());
    }
    if let Some(c) = &args.column {
        config.column = Some(c.clone());
    }
    if let Some(c) = &args.exog_column {
        config.exog_column = Some(c.clone());
    }
    config.freeze_test |= args.freeze_test;
    Ok(config)
}

fn load_series(
    config: &RunConfig,
    data: &Path,
) -> Result<(
    crate::pipeline::SeriesFrame,
    Option<crate::pipeline::SeriesFrame>,
)> {
    let column: ColumnRef = match &config.column {
        Some(c) => c.parse()?,
        None => ColumnRef::default(),
    };
    let exog: Option<ColumnRef> = config.exog_column.as_deref().map(str::parse).transpose()?;
    load_csv_columns(data, &column, exog.as_ref())
}

fn train(args: &DataArgs) -> Result<(crate::pipeline::ForecastReport, ModelState)> {
    let config = resolve_config(args)?;
    let data = config
        .data
        .clone()
        .ok_or_else(|| Error::InvalidConfig("no data file (set `data` or pass --data)".into()))?;
    let (series, exog) = load_series(&config, &data)?;
    run_experiment_with_state(&series, exog.as_ref(), &config)
}

fn bench(args: BenchArgs, out: &mut dyn Write) -> Result<()> {
    let (report, state) = train(&args.data)?;
    if let Some(path) = &args.out_json {
        report.write_json(path)?;
    }
    if let Some(path) = &args.out_csv {
        report.write_csv_file(path)?;
    }
    if let Some(path) = &args.save_snapshot {
        snapshot_save(&state, path)?;
    }
    let mut summary = serde_json::to_value(&report.summary).expect("plain values");
    summary["config"] = serde_json::to_value(&report.config).expect("plain values");
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&summary).expect("plain values")
    )?;
    Ok(())
}

fn predict(args: PredictArgs, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<()> {
    let mut state = match (&args.snapshot, &args.config) {
        (Some(path), _) => snapshot_load(path)?,
        (None, Some(path)) => {
            let config = RunConfig::from_file(path)?;
            match &config.data {
                Some(data) => {
                    let (series, exog) = load_series(&config, data)?;
                    run_experiment_with_state(&series, exog.as_ref(), &config)?.1
                }
                None => ModelState::fresh(
                    &config,
                    if config.exog_column.is_some() {
                        InputMode::Narx
                    } else {
                        InputMode::Nar
                    },
                )?,
            }
        }
        (None, None) => unreachable!("clap enforces one source"),
    };
    let narx = state.forecaster.model().mode() == InputMode::Narx;
    let mut line = String::new();
    let mut row = 0u64;
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            break;
        }
        row += 1;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let mut cells = text.split(',').map(str::trim);
        let parse = |cell: Option<&str>| -> Result<f64> {
            cell.and_then(|c| c.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row: Some(row),
                    message: format!(
                        "expected {} per line, got '{text}'",
                        if narx { "y,x" } else { "one value" }
                    ),
                })
        };
        let y = parse(cells.next())?;
        let x = if narx { parse(cells.next())? } else { 0.0 };
        let next = state
            .ingest_raw(y, x, !args.no_learn)
            .map_err(|e| e.at_step(row as usize))?;
        writeln!(out, "{next}")?;
    }
    out.flush()?;
    Ok(())
}
