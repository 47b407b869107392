//! `grid fit`: estimate thermal parameters from unit-level hourly records,
//! with nameplate defaults for small units lacking usable data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

use gridcore::ingest::{parse_unit_records, UnitHourlyRecord};
use gridcore::model::Fuel;
use gridcore::paramfit::{
    default_small_unit, extract_limits, extract_ramp, fit_heat_rate, HeatRateTable,
};

use crate::util::{ensure_out_dir, read_file, write_output, Manifest};
use crate::Outcome;

pub fn run(
    records_path: &Path,
    heat_rates: Option<&Path>,
    small_units: Option<&Path>,
    out: &Path,
) -> Result<Outcome> {
    let mut manifest = Manifest::new("fit");
    manifest.record_input(records_path)?;
    let records = parse_unit_records(&read_file(records_path)?)
        .with_context(|| format!("parsing {}", records_path.display()))?;

    let mut by_unit: BTreeMap<String, Vec<UnitHourlyRecord>> = BTreeMap::new();
    for r in records {
        by_unit.entry(r.unit.clone()).or_default().push(r);
    }

    let mut params = String::from(
        "unit,slope,intercept,r_squared,n_points,low_quality,p_max,p_min,ramp_hourly,source\n",
    );
    let mut failures = String::from("unit,reason\n");
    let mut n_failures = 0usize;

    for (unit, recs) in &by_unit {
        let fit = match fit_heat_rate(recs) {
            Ok(f) => f,
            Err(e) => {
                let _ = writeln!(failures, "{unit},{e}");
                n_failures += 1;
                continue;
            }
        };
        let (p_max, p_min) = match extract_limits(recs) {
            Ok(v) => v,
            Err(e) => {
                let _ = writeln!(failures, "{unit},{e}");
                n_failures += 1;
                continue;
            }
        };
        let ramp = match extract_ramp(recs) {
            Ok(v) => v,
            Err(e) => {
                let _ = writeln!(failures, "{unit},{e}");
                n_failures += 1;
                continue;
            }
        };
        let _ = writeln!(
            params,
            "{unit},{},{},{},{},{},{},{},{},fitted",
            fit.slope,
            fit.intercept,
            fit.r_squared,
            fit.n_points,
            u8::from(fit.low_quality),
            p_max,
            p_min,
            ramp
        );
    }

    // Nameplate defaults for small units, keyed into the standard table.
    if let Some(small_path) = small_units {
        let table = match heat_rates {
            Some(p) => {
                manifest.record_input(p)?;
                HeatRateTable::parse_csv(&read_file(p)?)
                    .with_context(|| format!("parsing {}", p.display()))?
            }
            None => bail!("--small-units requires --heat-rates"),
        };
        manifest.record_input(small_path)?;
        let text = read_file(small_path)?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let headers: Vec<String> = reader
            .headers()
            .context("reading small-units header")?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        if headers != ["unit", "unit_type", "fuel", "nameplate"] {
            bail!(
                "{}: expected header unit,unit_type,fuel,nameplate",
                small_path.display()
            );
        }
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let row = i + 2;
            let unit = record.get(0).unwrap_or("").trim().to_string();
            let unit_type = record.get(1).unwrap_or("").trim();
            let fuel_tok = record.get(2).unwrap_or("").trim();
            let fuel = Fuel::from_token(fuel_tok).with_context(|| {
                format!("{} row {row}: unknown fuel `{fuel_tok}`", small_path.display())
            })?;
            let nameplate: f64 = record
                .get(3)
                .unwrap_or("")
                .trim()
                .parse()
                .with_context(|| format!("{} row {row}: bad nameplate", small_path.display()))?;
            match default_small_unit(nameplate, unit_type, fuel, &table, 1.0) {
                Ok(p) => {
                    let _ = writeln!(
                        params,
                        "{unit},{},0,,0,0,{},{},{},nameplate-default",
                        p.heat_rate, p.p_max, p.p_min, p.ramp_hourly
                    );
                }
                Err(e) => {
                    let _ = writeln!(failures, "{unit},{e}");
                    n_failures += 1;
                }
            }
        }
    }

    ensure_out_dir(out)?;
    write_output(out, "params.csv", &params)?;
    manifest.record_output("params.csv");
    if n_failures > 0 {
        write_output(out, "fit_failures.csv", &failures)?;
        manifest.record_output("fit_failures.csv");
    }
    manifest.write(out)?;

    println!(
        "fitted {} units ({n_failures} failures)",
        by_unit.len() - n_failures.min(by_unit.len())
    );
    if n_failures > 0 {
        Ok(Outcome::PartialFailures(n_failures))
    } else {
        Ok(Outcome::Clean)
    }
}

/// Reads a params.csv produced by this command into `(unit -> slope)` plus
/// the full row map for consumers that need limits as well.
pub fn read_params(text: &str) -> Result<BTreeMap<String, ParamRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let unit = record.get(0).unwrap_or("").trim().to_string();
        let slope: f64 = record.get(1).unwrap_or("0").trim().parse().unwrap_or(0.0);
        out.insert(unit, ParamRow { slope });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct ParamRow {
    /// Fitted heat-rate slope in MMBtu/MWh; marginal cost is this times
    /// the hour's fuel price.
    pub slope: f64,
}
