//! `grid validate`: statistical comparison of simulated zonal series
//! against a reference, with optional season splits and a rescaled-scenario
//! residual report.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use gridcore::ingest::parse_profile;
use gridcore::profile::HourlyProfile;
use gridcore::validation::{compare_lmps, ComparisonReport, SeasonSpec, ValidationConfig};

use crate::util::{ensure_out_dir, read_file, write_output, Manifest};
use crate::Outcome;

#[derive(Serialize)]
struct ScenarioSummary {
    scale: Option<f64>,
    /// Mean |sim - real| per zone for the base simulation.
    residual_base: std::collections::BTreeMap<String, f64>,
    /// Mean |sim - real| per zone for the scenario simulation.
    residual_scenario: std::collections::BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct FullReport<'a> {
    reports: &'a [ComparisonReport],
    scenario: Option<&'a ScenarioSummary>,
}

pub fn run(
    sim_path: &Path,
    real_path: &Path,
    config_path: Option<&Path>,
    scenario_path: Option<&Path>,
    scenario_scale: Option<f64>,
    out: &Path,
) -> Result<Outcome> {
    let mut manifest = Manifest::new("validate");
    manifest.record_input(sim_path)?;
    manifest.record_input(real_path)?;
    manifest.scale = scenario_scale;

    let sim = parse_profile(&read_file(sim_path)?, None)
        .with_context(|| format!("parsing {}", sim_path.display()))?;
    let real_full = parse_profile(&read_file(real_path)?, None)
        .with_context(|| format!("parsing {}", real_path.display()))?;
    let real = align_reference(&real_full, &sim)
        .with_context(|| format!("aligning {} to the simulated hours", real_path.display()))?;

    let config = match config_path {
        Some(p) => {
            manifest.record_input(p)?;
            ValidationConfig::from_toml(&read_file(p)?)
                .with_context(|| format!("parsing {}", p.display()))?
        }
        None => ValidationConfig::default(),
    };

    let seasons: Vec<Option<&SeasonSpec>> = if config.seasons.is_empty() {
        vec![None]
    } else {
        config.seasons.iter().map(Some).collect()
    };

    let mut reports = Vec::new();
    for season in seasons {
        let report = compare_lmps(&real, &sim, &config, season)
            .with_context(|| "comparing series".to_string())?;
        reports.push(report);
    }

    // CSV views of the reports.
    let mut corr = String::from("season,zone,correlation,points,skipped_reason\n");
    let mut outliers = String::from("season,zone,index,real,sim\n");
    let mut filtered = String::from("season,zone,timestamp,value,reason\n");
    for report in &reports {
        for (zone, r) in &report.correlation {
            let _ = writeln!(
                corr,
                "{},{zone},{r},{},",
                report.season, report.points_used[zone]
            );
        }
        for (zone, reason) in &report.skipped {
            let _ = writeln!(
                corr,
                "{},{zone},,{},{}",
                report.season,
                report.points_used.get(zone).copied().unwrap_or(0),
                reason.replace(',', ";")
            );
        }
        for (zone, points) in &report.outliers {
            for p in points {
                let _ = writeln!(
                    outliers,
                    "{},{zone},{},{},{}",
                    report.season, p.index, p.real, p.sim
                );
            }
        }
        for p in &report.filtered {
            let _ = writeln!(
                filtered,
                "{},{},{},{},{}",
                report.season,
                p.zone,
                p.timestamp.format("%Y-%m-%dT%H:%M:%S"),
                p.value,
                p.reason.replace(',', ";")
            );
        }
    }

    // Scenario: compare a second simulated series' residuals zone by zone.
    let scenario = match scenario_path {
        Some(p) => {
            manifest.record_input(p)?;
            let scen = parse_profile(&read_file(p)?, None)
                .with_context(|| format!("parsing {}", p.display()))?;
            if scen.index() != sim.index() {
                bail!("scenario series covers different hours than --sim");
            }
            let mut base_res = std::collections::BTreeMap::new();
            let mut scen_res = std::collections::BTreeMap::new();
            for zone in sim.column_names() {
                let (Some(real_col), Some(sim_col), Some(scen_col)) =
                    (real.column(zone), sim.column(zone), scen.column(zone))
                else {
                    continue;
                };
                let n = real_col.len() as f64;
                let base: f64 = real_col
                    .iter()
                    .zip(sim_col)
                    .map(|(r, s)| (s - r).abs())
                    .sum::<f64>()
                    / n;
                let after: f64 = real_col
                    .iter()
                    .zip(scen_col)
                    .map(|(r, s)| (s - r).abs())
                    .sum::<f64>()
                    / n;
                base_res.insert(zone.to_string(), base);
                scen_res.insert(zone.to_string(), after);
            }
            Some(ScenarioSummary {
                scale: scenario_scale,
                residual_base: base_res,
                residual_scenario: scen_res,
            })
        }
        None => None,
    };

    ensure_out_dir(out)?;
    write_output(out, "correlations.csv", &corr)?;
    manifest.record_output("correlations.csv");
    write_output(out, "outliers.csv", &outliers)?;
    manifest.record_output("outliers.csv");
    write_output(out, "filtered.csv", &filtered)?;
    manifest.record_output("filtered.csv");
    let full = FullReport {
        reports: &reports,
        scenario: scenario.as_ref(),
    };
    write_output(
        out,
        "report.json",
        &(serde_json::to_string_pretty(&full)? + "\n"),
    )?;
    manifest.record_output("report.json");
    manifest.write(out)?;

    for report in &reports {
        for (zone, r) in &report.correlation {
            println!(
                "{} zone {zone}: correlation {r:.4} over {} points, {} outliers",
                report.season,
                report.points_used[zone],
                report.outliers[zone].len()
            );
        }
    }
    Ok(Outcome::Clean)
}

/// Slices the reference down to the simulated hours (the reference usually
/// covers a longer span).
fn align_reference(real: &HourlyProfile, sim: &HourlyProfile) -> Result<HourlyProfile> {
    if real.index() == sim.index() {
        return Ok(real.clone());
    }
    let start = real
        .position(sim.index()[0])
        .with_context(|| format!("reference does not cover {}", sim.index()[0]))?;
    let end = real
        .position(*sim.index().last().unwrap())
        .with_context(|| format!("reference does not cover {}", sim.index().last().unwrap()))?;
    let sliced = real
        .slice(start, end)
        .context("reference slice out of range")?;
    if sliced.index() != sim.index() {
        bail!("reference hours do not line up with the simulated hours");
    }
    Ok(sliced)
}
