//! Experiment harness: one subcommand per experiment, each a pure
//! function of (config, seed) emitting plot-ready CSV files.

mod experiments;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use repeater_core::channel::{PathlossConfig, PathlossModel};
use repeater_core::scenario::Scenario;

#[derive(Parser)]
#[command(
    name = "repeater-sim",
    about = "Repeater-swarm uplink simulator: stability certification and joint gain/power optimization",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Scenario TOML file; built-in FR1 defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override scenario keys, e.g. --set m=16 --set n=8.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Pathloss model TOML (kind = "free-space" | "uma-umi-approx" |
    /// "per-class"); the urban approximation when omitted.
    #[arg(long)]
    pathloss: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Two users, one movable repeater: sum rate vs. repeater position.
    Motivating {
        #[command(flatten)]
        common: CommonArgs,
        /// Lateral offset of the repeater track from the user line, m.
        #[arg(long, default_value_t = 40.0)]
        offset_m: f64,
        /// Half-extent of the repeater track, m.
        #[arg(long, default_value_t = 300.0)]
        span_m: f64,
        /// Track step, m.
        #[arg(long, default_value_t = 1.0)]
        step_m: f64,
        /// Moving-average window, m.
        #[arg(long, default_value_t = 4.0)]
        window_m: f64,
    },
    /// Cell-edge user, repeater sliding toward the BS: SNR under the
    /// optimal gain rule for several repeater noise levels.
    Placement {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 4.0)]
        step_m: f64,
    },
    /// Weighted sum rate per iteration, with and without repeaters.
    Convergence {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Final sum rate vs. repeater count, forced and probabilistic
    /// repeater-BS line of sight.
    RepeaterCount {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated repeater counts.
        #[arg(long, default_value = "0,5,10,20,30,40,50,60")]
        counts: String,
    },
    /// Per-user rate samples (CDF data) with and without repeaters.
    RateCdf {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Final sum rate vs. the stability margin eta.
    EtaSweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated eta values in (0, 1].
        #[arg(long, default_value = "0.05,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
        etas: String,
    },
    /// Repeaters on a circle: Nyquist image at alpha_G and the
    /// min-determinant margin sweep around it.
    CircleNyquist {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 15)]
        circle_n: usize,
        #[arg(long, default_value_t = 1000.0)]
        circle_radius_m: f64,
        #[arg(long, default_value_t = 2.0e9)]
        center_hz: f64,
        #[arg(long, default_value_t = 20.0e6)]
        span_hz: f64,
        #[arg(long, default_value_t = 100.0)]
        step_hz: f64,
        /// Margin sweep range relative to alpha_G, dB.
        #[arg(long, default_value_t = -20.0)]
        alpha_min_db: f64,
        #[arg(long, default_value_t = 4.0)]
        alpha_max_db: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha_step_db: f64,
    },
    /// Write the channel matrices of one realization as CSV.
    DumpChannels {
        #[command(flatten)]
        common: CommonArgs,
        /// Trial index of the realization.
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // machine-readable failure report on stdout
            println!(
                "{}",
                serde_json::json!({ "error": e.kind, "message": e.message })
            );
            ExitCode::FAILURE
        }
    }
}

pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError {
            kind: "runtime",
            message: e.to_string(),
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Motivating {
            mut common,
            offset_m,
            span_m,
            step_m,
            window_m,
        } => {
            // this experiment fixes its own node counts
            common.set.push("k=2".into());
            common.set.push("n=1".into());
            let (s, model, out) = prepare(&common)?;
            experiments::motivating(
                &s,
                &model,
                common.trials,
                offset_m,
                span_m,
                step_m,
                window_m,
                &out,
            )
        }
        Command::Placement { common, step_m } => {
            let (s, model, out) = prepare(&common)?;
            experiments::placement(&s, &model, step_m, &out)
        }
        Command::Convergence { common } => {
            let (s, model, out) = prepare(&common)?;
            experiments::convergence(&s, &model, common.trials, &out)
        }
        Command::RepeaterCount { mut common, counts } => {
            // the sweep sets the repeater count itself
            common.set.push("n=0".into());
            let (s, model, out) = prepare(&common)?;
            let counts = parse_list::<usize>(&counts)?;
            experiments::repeater_count(&s, &model, common.trials, &counts, &out)
        }
        Command::RateCdf { common } => {
            let (s, model, out) = prepare(&common)?;
            experiments::rate_cdf(&s, &model, common.trials, &out)
        }
        Command::EtaSweep { common, etas } => {
            let (s, model, out) = prepare(&common)?;
            let etas = parse_list::<f64>(&etas)?;
            experiments::eta_sweep(&s, &model, common.trials, &etas, &out)
        }
        Command::CircleNyquist {
            common,
            circle_n,
            circle_radius_m,
            center_hz,
            span_hz,
            step_hz,
            alpha_min_db,
            alpha_max_db,
            alpha_step_db,
        } => {
            let (_, _, out) = prepare(&common)?;
            experiments::circle_nyquist(
                circle_n,
                circle_radius_m,
                center_hz,
                span_hz,
                step_hz,
                (alpha_min_db, alpha_max_db, alpha_step_db),
                &out,
            )
        }
        Command::DumpChannels { common, trial } => {
            let (s, model, out) = prepare(&common)?;
            experiments::dump_channels(&s, &model, trial, &out)
        }
    }
}

/// Load the scenario and pathloss model (files or defaults), apply
/// overrides, create the output directory, and archive the effective
/// config next to the outputs.
fn prepare(common: &CommonArgs) -> Result<(Scenario, PathlossModel, PathBuf), CliError> {
    let mut table: toml::Table = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::new("config", format!("{}: {e}", path.display())))?;
            text.parse()
                .map_err(|e: toml::de::Error| CliError::new("config", e.to_string()))?
        }
        None => toml::Table::new(),
    };
    for kv in &common.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| CliError::new("config", format!("--set needs KEY=VALUE, got {kv}")))?;
        table.insert(key.trim().to_string(), parse_toml_value(value.trim()));
    }
    if let Some(seed) = common.seed {
        table.insert("seed".into(), toml::Value::Integer(seed as i64));
    }
    let s: Scenario = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::new("config", e.to_string()))?;
    s.validate()
        .map_err(|e| CliError::new("config", e.to_string()))?;

    let pl_config = match &common.pathloss {
        Some(path) => {
            PathlossConfig::from_path(path).map_err(|e| CliError::new("config", e.to_string()))?
        }
        None => PathlossConfig::UmaUmiApprox,
    };
    let model = pl_config
        .build(s.carrier_hz)
        .map_err(|e| CliError::new("config", e.to_string()))?;

    std::fs::create_dir_all(&common.out)
        .map_err(|e| CliError::new("io", format!("{}: {e}", common.out.display())))?;
    let archived =
        toml::to_string_pretty(&s).map_err(|e| CliError::new("config", e.to_string()))?;
    std::fs::write(common.out.join("scenario_used.toml"), archived)
        .map_err(|e| CliError::new("io", e.to_string()))?;
    let archived_pl =
        toml::to_string_pretty(&pl_config).map_err(|e| CliError::new("config", e.to_string()))?;
    std::fs::write(common.out.join("pathloss_used.toml"), archived_pl)
        .map_err(|e| CliError::new("io", e.to_string()))?;
    Ok((s, model, common.out.clone()))
}

fn parse_toml_value(raw: &str) -> toml::Value {
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    toml::Value::String(raw.to_string())
}

fn parse_list<T: std::str::FromStr>(raw: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|e| CliError::new("args", format!("bad list entry {tok:?}: {e}")))
        })
        .collect()
}
