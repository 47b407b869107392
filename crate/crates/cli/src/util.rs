//! Shared command plumbing: run manifests, profile-directory IO and CSV
//! writers.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use chrono::NaiveDateTime;
use serde::Serialize;
use sha2::{Digest, Sha256};

use gridcore::ingest::{self, CaseError};
use gridcore::model::{Interface, Network};
use gridcore::profile::HourlyProfile;

pub const BUS_LOADS: &str = "bus_loads.csv";
pub const UNIT_PROFILES: &str = "unit_profiles.csv";
pub const ZONE_LOADS: &str = "zone_loads.csv";
pub const FUEL_MIX: &str = "fuel_mix.csv";
pub const NUCLEAR_CF: &str = "nuclear_cf.csv";
pub const INTERFACE_FLOWS: &str = "interface_flows.csv";
pub const FUEL_PRICES: &str = "fuel_prices.csv";
pub const EXTERNAL_LMPS: &str = "external_lmps.csv";
pub const BOUNDARY_INJECTIONS: &str = "boundary_injections.csv";
pub const HVDC_SCHEDULES: &str = "hvdc_schedules.csv";
pub const INTERFACE_LIMITS: &str = "interface_limits.csv";
pub const COSTS: &str = "costs.csv";
pub const UNIT_RECORDS: &str = "units.csv";

/// Reproducibility record written by every command: input hashes plus the
/// knobs that influence outputs.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hours: Option<(usize, usize)>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            scale: None,
            hours: None,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    /// Hashes a consumed input file into the manifest.
    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let digest = Sha256::digest(&bytes);
        self.inputs
            .insert(path.display().to_string(), hex::encode(digest));
        Ok(())
    }

    pub fn record_output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(out_dir.join("manifest.json"), text + "\n")
            .with_context(|| format!("writing manifest under {}", out_dir.display()))?;
        Ok(())
    }
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn ensure_out_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

pub fn write_output(out_dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(out_dir.join(name), contents)
        .with_context(|| format!("writing {name} under {}", out_dir.display()))
}

/// Loads and parses a case file, mapping parse errors to readable context.
pub fn load_case(path: &Path) -> Result<(Network, Vec<Interface>)> {
    let text = read_file(path)?;
    match ingest::parse_case(&text) {
        Ok(parts) => Ok(parts),
        Err(e @ CaseError::InvalidNetwork(_)) => {
            bail!("{}: {e}", path.display())
        }
        Err(e) => bail!("{}: {e}", path.display()),
    }
}

/// Loads a profile CSV from the profiles directory.
pub fn load_profile(
    dir: &Path,
    name: &str,
    expected_columns: Option<&[&str]>,
) -> Result<HourlyProfile> {
    let path = dir.join(name);
    let text = read_file(&path)?;
    ingest::parse_profile(&text, expected_columns)
        .with_context(|| format!("parsing {}", path.display()))
}

pub fn profile_exists(dir: &Path, name: &str) -> bool {
    dir.join(name).is_file()
}

/// Inclusive `A:B` hour range.
pub fn parse_hours(spec: &str) -> Result<(usize, usize)> {
    let (a, b) = spec
        .split_once(':')
        .with_context(|| format!("bad --hours `{spec}`, expected A:B"))?;
    let start: usize = a.parse().with_context(|| format!("bad hour `{a}`"))?;
    let end: usize = b.parse().with_context(|| format!("bad hour `{b}`"))?;
    if end < start {
        bail!("--hours range {spec} ends before it starts");
    }
    Ok((start, end))
}

/// Applies an optional inclusive hour range to a profile.
pub fn slice_hours(profile: &HourlyProfile, hours: Option<(usize, usize)>) -> Result<HourlyProfile> {
    match hours {
        None => Ok(profile.clone()),
        Some((a, b)) => profile
            .slice(a, b)
            .with_context(|| format!("--hours {a}:{b} outside 0..{}", profile.len() - 1)),
    }
}

/// Writes a timestamped wide CSV with shortest-round-trip floats.
pub fn write_wide_csv(
    out_dir: &Path,
    name: &str,
    header: &[String],
    rows: &[(NaiveDateTime, Vec<f64>)],
) -> Result<()> {
    let mut text = String::from("timestamp");
    for h in header {
        text.push(',');
        text.push_str(h);
    }
    text.push('\n');
    for (ts, values) in rows {
        text.push_str(&ts.format("%Y-%m-%dT%H:%M:%S").to_string());
        for v in values {
            text.push(',');
            text.push_str(&format!("{v}"));
        }
        text.push('\n');
    }
    write_output(out_dir, name, &text)
}
