//! `grid`: command-line pipeline for the grid modeling toolkit.
//!
//! Subcommands follow the data flow: `ingest` a case, `fit` thermal
//! parameters from unit records, `allocate` hourly profiles, `reduce` the
//! network, run hourly `pf` or `opf`, and `validate` simulated prices
//! against references. Every command writes a manifest with input hashes so
//! runs can be replayed exactly.
//!
//! Exit codes: 0 success, 1 unusable inputs, 2 completed with logged
//! per-hour failures.

mod cmd_allocate;
mod cmd_fit;
mod cmd_ingest;
mod cmd_opf;
mod cmd_pf;
mod cmd_reduce;
mod cmd_validate;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Outcome of a command that distinguishes clean runs from partial ones.
pub enum Outcome {
    Clean,
    PartialFailures(usize),
}

#[derive(Parser)]
#[command(
    name = "grid",
    version,
    about = "Grid modeling pipeline: ingest, fit, allocate, reduce, pf, opf, validate"
)]
struct Cli {
    /// Worker threads for hourly solves (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a case file; write its canonical form.
    Ingest {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit thermal parameters from unit-level hourly records.
    Fit {
        /// CSV of records: timestamp,unit,heat_input,power_output.
        #[arg(long)]
        records: PathBuf,
        /// Standard heat-rate table for small units without records.
        #[arg(long)]
        heat_rates: Option<PathBuf>,
        /// CSV of small units: unit,unit_type,fuel,nameplate.
        #[arg(long)]
        small_units: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Disaggregate fleet totals into per-unit and per-bus hourly profiles.
    Allocate {
        #[arg(long)]
        case: PathBuf,
        /// Allocation config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Directory of input profiles.
        #[arg(long)]
        profiles: PathBuf,
        /// Unit hourly records for thermal outputs (default:
        /// <profiles>/units.csv).
        #[arg(long)]
        records: Option<PathBuf>,
        /// Overrides the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ward-reduce a case and re-map hourly profiles onto the kept buses.
    Reduce {
        #[arg(long)]
        case: PathBuf,
        /// Reduction spec (TOML): retained buses, removals, added lines,
        /// hvdc proxies.
        #[arg(long)]
        spec: PathBuf,
        /// Profile directory to re-map for the reduced case.
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hourly DC power flow with interface-error statistics.
    Pf {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        profiles: PathBuf,
        /// Inclusive hour range A:B (indices into the profile).
        #[arg(long)]
        hours: Option<String>,
        /// Also write per-branch flows.
        #[arg(long)]
        dump_flows: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hourly DC optimal power flow with zonal LMPs.
    Opf {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        profiles: PathBuf,
        /// Fitted parameters CSV from `fit` (enables hourly fuel-price
        /// costs for fossil units).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Inclusive hour range A:B.
        #[arg(long)]
        hours: Option<String>,
        /// Uniform multiplier on every marginal cost.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Recorded in the manifest; all randomness is upstream.
        #[arg(long)]
        seed: Option<u64>,
        /// Link consecutive hours through generator ramp limits.
        #[arg(long)]
        linked_ramp: bool,
        /// Half-width in MW of the dispatch band around the profile value
        /// for external-equivalent units (default: unconstrained).
        #[arg(long)]
        external_band: Option<f64>,
        /// Also write nodal LMPs.
        #[arg(long)]
        dump_nodal: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare simulated zonal LMPs against a reference series.
    Validate {
        /// Simulated zonal series (e.g. zonal_lmps.csv from `opf`).
        #[arg(long)]
        sim: PathBuf,
        /// Reference zonal series.
        #[arg(long)]
        real: PathBuf,
        /// Validation config (TOML): band, per-zone filters, seasons.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Zonal series of a rescaled run to report against the base.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Scale factor the scenario was produced with (metadata).
        #[arg(long)]
        scenario_scale: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Ignore failure: the pool can only be initialized once per process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }

    let result = match cli.command {
        Command::Ingest { case, out } => cmd_ingest::run(&case, &out),
        Command::Fit {
            records,
            heat_rates,
            small_units,
            out,
        } => cmd_fit::run(&records, heat_rates.as_deref(), small_units.as_deref(), &out),
        Command::Allocate {
            case,
            config,
            profiles,
            records,
            seed,
            out,
        } => cmd_allocate::run(&case, &config, &profiles, records.as_deref(), seed, &out),
        Command::Reduce {
            case,
            spec,
            profiles,
            out,
        } => cmd_reduce::run(&case, &spec, profiles.as_deref(), &out),
        Command::Pf {
            case,
            profiles,
            hours,
            dump_flows,
            out,
        } => cmd_pf::run(&case, &profiles, hours.as_deref(), dump_flows, &out),
        Command::Opf {
            case,
            profiles,
            params,
            hours,
            scale,
            seed,
            linked_ramp,
            external_band,
            dump_nodal,
            out,
        } => cmd_opf::run(cmd_opf::Args {
            case: &case,
            profiles: &profiles,
            params: params.as_deref(),
            hours: hours.as_deref(),
            scale,
            seed,
            linked_ramp,
            external_band,
            dump_nodal,
            out: &out,
        }),
        Command::Validate {
            sim,
            real,
            config,
            scenario,
            scenario_scale,
            out,
        } => cmd_validate::run(
            &sim,
            &real,
            config.as_deref(),
            scenario.as_deref(),
            scenario_scale,
            &out,
        ),
    };

    match result {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::PartialFailures(n)) => {
            eprintln!("completed with {n} logged failures");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
