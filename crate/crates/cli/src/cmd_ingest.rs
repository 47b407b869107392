//! `grid ingest`: parse, validate and canonicalize a case file.

use std::path::Path;

use anyhow::Result;
use serde::Serialize;

use gridcore::ingest::serialize_case;

use crate::util::{ensure_out_dir, load_case, write_output, Manifest};
use crate::Outcome;

#[derive(Serialize)]
struct Summary {
    base_mva: f64,
    buses: usize,
    branches: usize,
    generators: usize,
    interfaces: usize,
    zones: Vec<String>,
}

pub fn run(case: &Path, out: &Path) -> Result<Outcome> {
    let (net, interfaces) = load_case(case)?;
    ensure_out_dir(out)?;

    let mut manifest = Manifest::new("ingest");
    manifest.record_input(case)?;

    let canonical = serialize_case(&net, &interfaces);
    write_output(out, "canonical.case", &canonical)?;
    manifest.record_output("canonical.case");

    let summary = Summary {
        base_mva: net.base_mva(),
        buses: net.buses().len(),
        branches: net.branches().len(),
        generators: net.generators().len(),
        interfaces: interfaces.len(),
        zones: net.zones().iter().map(|z| z.to_string()).collect(),
    };
    write_output(
        out,
        "summary.json",
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    manifest.record_output("summary.json");
    manifest.write(out)?;

    println!(
        "{}: {} buses, {} branches, {} generators, {} interfaces",
        case.display(),
        summary.buses,
        summary.branches,
        summary.generators,
        summary.interfaces
    );
    Ok(Outcome::Clean)
}
