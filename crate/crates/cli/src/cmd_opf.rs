//! `grid opf`: hourly least-cost dispatch with zonal LMP output.
//!
//! Marginal-cost resolution per unit and hour, first match wins:
//! 1. external-equivalent units price at the recorded external LMP of
//!    their bus's zone;
//! 2. fossil units with a fitted heat-rate slope and a fuel-price series
//!    price at slope times this hour's fuel price (dual-fuel units read the
//!    `dual-fuel` price column, falling back to `gas`);
//! 3. a static costs.csv entry (the allocator's seeded draws);
//! 4. the case's cost table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDateTime;

use gridcore::dcopf::{hourly_opf_run, HourInputs};
use gridcore::ingest::parse_fuel_prices;
use gridcore::model::Fuel;
use gridcore::profile::HourlyProfile;

use crate::cmd_fit::read_params;
use crate::util::{
    ensure_out_dir, load_case, load_profile, parse_hours, profile_exists, read_file, slice_hours,
    write_output, write_wide_csv, Manifest, BOUNDARY_INJECTIONS, BUS_LOADS, COSTS, EXTERNAL_LMPS,
    FUEL_PRICES, INTERFACE_LIMITS, UNIT_PROFILES,
};
use crate::Outcome;

pub struct Args<'a> {
    pub case: &'a Path,
    pub profiles: &'a Path,
    pub params: Option<&'a Path>,
    pub hours: Option<&'a str>,
    pub scale: f64,
    pub seed: Option<u64>,
    pub linked_ramp: bool,
    pub external_band: Option<f64>,
    pub dump_nodal: bool,
    pub out: &'a Path,
}

pub fn run(args: Args<'_>) -> Result<Outcome> {
    let (net, interfaces) = load_case(args.case)?;
    let hour_range = args.hours.map(parse_hours).transpose()?;

    let mut manifest = Manifest::new("opf");
    manifest.record_input(args.case)?;
    manifest.scale = Some(args.scale);
    manifest.seed = args.seed;
    manifest.hours = hour_range;

    let bus_ids: Vec<String> = net.buses().iter().map(|b| b.id.to_string()).collect();
    let bus_refs: Vec<&str> = bus_ids.iter().map(String::as_str).collect();
    let bus_loads = load_profile(args.profiles, BUS_LOADS, Some(&bus_refs))?;
    manifest.record_input(&args.profiles.join(BUS_LOADS))?;
    let unit_ids: Vec<String> = net.generators().iter().map(|g| g.id.clone()).collect();
    let unit_refs: Vec<&str> = unit_ids.iter().map(String::as_str).collect();
    let unit_profiles = load_profile(args.profiles, UNIT_PROFILES, Some(&unit_refs))?;
    manifest.record_input(&args.profiles.join(UNIT_PROFILES))?;
    if bus_loads.index() != unit_profiles.index() {
        bail!("{BUS_LOADS} and {UNIT_PROFILES} cover different hours");
    }

    let load_aligned = |name: &str, expected: Option<&[&str]>| -> Result<Option<HourlyProfile>> {
        if !profile_exists(args.profiles, name) {
            return Ok(None);
        }
        let p = load_profile(args.profiles, name, expected)?;
        if p.index() != bus_loads.index() {
            bail!("{name} covers different hours than {BUS_LOADS}");
        }
        Ok(Some(p))
    };

    let boundary = load_aligned(BOUNDARY_INJECTIONS, Some(&bus_refs))?;
    if boundary.is_some() {
        manifest.record_input(&args.profiles.join(BOUNDARY_INJECTIONS))?;
    }
    let external_lmps = load_aligned(EXTERNAL_LMPS, None)?;
    if external_lmps.is_some() {
        manifest.record_input(&args.profiles.join(EXTERNAL_LMPS))?;
    }
    let interface_limits = load_aligned(INTERFACE_LIMITS, None)?;
    if interface_limits.is_some() {
        manifest.record_input(&args.profiles.join(INTERFACE_LIMITS))?;
    }

    // Static cost overrides from the allocator.
    let mut static_costs: BTreeMap<String, f64> = BTreeMap::new();
    if profile_exists(args.profiles, COSTS) {
        manifest.record_input(&args.profiles.join(COSTS))?;
        let text = read_file(&args.profiles.join(COSTS))?;
        for (i, line) in text.lines().enumerate() {
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let (unit, c1) = line
                .split_once(',')
                .ok_or_else(|| anyhow!("{COSTS} line {}: expected unit,c1", i + 1))?;
            static_costs.insert(
                unit.trim().to_string(),
                c1.trim()
                    .parse()
                    .with_context(|| format!("{COSTS} line {}", i + 1))?,
            );
        }
    }

    // Fitted slopes plus a fuel-price series give hourly fossil costs.
    let params = match args.params {
        Some(p) => {
            manifest.record_input(p)?;
            Some(read_params(&read_file(p)?)?)
        }
        None => None,
    };
    let fuel_prices = if profile_exists(args.profiles, FUEL_PRICES) {
        manifest.record_input(&args.profiles.join(FUEL_PRICES))?;
        let text = read_file(&args.profiles.join(FUEL_PRICES))?;
        let end = *bus_loads.index().last().unwrap();
        Some(parse_fuel_prices(&text, Some(end)).context("parsing fuel prices")?)
    } else {
        None
    };

    let bus_loads = slice_hours(&bus_loads, hour_range)?;
    let unit_profiles = slice_hours(&unit_profiles, hour_range)?;
    let boundary = boundary.map(|p| slice_hours(&p, hour_range)).transpose()?;
    let external_lmps = external_lmps
        .map(|p| slice_hours(&p, hour_range))
        .transpose()?;
    let interface_limits = interface_limits
        .map(|p| slice_hours(&p, hour_range))
        .transpose()?;

    let index: Vec<NaiveDateTime> = bus_loads.index().to_vec();
    let n_hours = index.len();

    let fuel_price_at = |fuel: Fuel, ts: NaiveDateTime| -> Option<f64> {
        let prices = fuel_prices.as_ref()?;
        let pos = prices.position(ts)?;
        let column = match fuel {
            Fuel::DualFuel => prices
                .column("dual-fuel")
                .or_else(|| prices.column("gas"))?,
            other => prices.column(other.token())?,
        };
        Some(column[pos])
    };

    // Assemble every hour's inputs up front; solving happens in core.
    let mut hours_inputs = Vec::with_capacity(n_hours);
    for t in 0..n_hours {
        let mut hour = HourInputs::default();
        for bus in net.buses() {
            let load = bus_loads.column(&bus.id.to_string()).unwrap()[t];
            hour.loads.push((bus.id, load));
            if let Some(b) = &boundary {
                let v = b.column(&bus.id.to_string()).unwrap()[t];
                if v != 0.0 {
                    hour.extra_injections.push((bus.id, v));
                }
            }
        }
        for gen in net.generators() {
            let profile_value = unit_profiles.column(&gen.id).map(|c| c[t]);
            if !gen.dispatchable {
                hour.fixed_outputs
                    .push((gen.id.clone(), profile_value.unwrap_or(0.0)));
                continue;
            }
            match gen.fuel {
                Fuel::Hydro | Fuel::Nuclear => {
                    // Allocated output is the energy available this hour.
                    if let Some(v) = profile_value {
                        let hi = v.clamp(0.0, gen.p_max);
                        hour.availability
                            .push((gen.id.clone(), gen.p_min.min(hi), hi));
                    }
                }
                Fuel::ExternalEquivalent => {
                    if let (Some(v), Some(band)) = (profile_value, args.external_band) {
                        let lo = (v - band).max(gen.p_min);
                        let hi = (v + band).min(gen.p_max);
                        hour.availability.push((gen.id.clone(), lo.min(hi), hi));
                    }
                }
                _ => {}
            }

            let c1 = resolve_cost(
                &net,
                gen,
                index[t],
                external_lmps.as_ref(),
                params.as_ref(),
                &fuel_price_at,
                &static_costs,
            )?;
            if let Some(c1) = c1 {
                hour.marginal_costs.push((gen.id.clone(), c1));
            }
        }
        hours_inputs.push(hour);
    }

    // Per-hour interface limit overrides (positive side only; the static
    // negative limits stay).
    if let Some(limits) = &interface_limits {
        for (t, hour) in hours_inputs.iter_mut().enumerate() {
            for iface in &interfaces {
                if let Some(col) = limits.column(&iface.name) {
                    hour.interface_limits
                        .push((iface.name.clone(), (iface.limit_neg, col[t])));
                }
            }
        }
    }

    let run = hourly_opf_run(
        &net,
        &interfaces,
        &index,
        &hours_inputs,
        args.scale,
        args.linked_ramp,
    )
    .map_err(|e| anyhow!("opf run: {e}"))?;

    // Outputs: zonal LMPs, dispatch, per-hour metadata, failures.
    let zones: Vec<String> = net.zones().iter().map(|z| z.to_string()).collect();
    let mut zonal_rows: Vec<(NaiveDateTime, Vec<f64>)> = Vec::new();
    let mut dispatch_rows: Vec<(NaiveDateTime, Vec<f64>)> = Vec::new();
    let mut nodal_rows: Vec<(NaiveDateTime, Vec<f64>)> = Vec::new();
    let mut meta = String::from("timestamp,objective,degenerate,binding,diagnostics\n");
    let mut failures = String::from("timestamp,reason\n");
    let unit_order: Vec<String> = net.generators().iter().map(|g| g.id.clone()).collect();

    for (t, solution) in run.solutions.iter().enumerate() {
        let ts = index[t];
        match solution {
            Some(sol) => {
                zonal_rows.push((
                    ts,
                    zones
                        .iter()
                        .map(|z| sol.zonal_lmp.get(z).copied().unwrap_or(f64::NAN))
                        .collect(),
                ));
                dispatch_rows.push((
                    ts,
                    unit_order
                        .iter()
                        .map(|u| sol.dispatch.get(u).copied().unwrap_or(0.0))
                        .collect(),
                ));
                if args.dump_nodal {
                    nodal_rows.push((ts, sol.nodal_lmp.clone()));
                }
                let _ = writeln!(
                    meta,
                    "{},{},{},{},{}",
                    ts.format("%Y-%m-%dT%H:%M:%S"),
                    sol.objective,
                    u8::from(sol.degenerate),
                    sol.binding.len(),
                    sol.diagnostics.len()
                );
            }
            None => {
                let reason = run
                    .failures
                    .iter()
                    .find(|(i, _)| *i == t)
                    .map(|(_, r)| r.clone())
                    .unwrap_or_default();
                let _ = writeln!(
                    failures,
                    "{},{}",
                    ts.format("%Y-%m-%dT%H:%M:%S"),
                    reason.replace(',', ";")
                );
            }
        }
    }

    ensure_out_dir(args.out)?;
    write_wide_csv(args.out, "zonal_lmps.csv", &zones, &zonal_rows)?;
    manifest.record_output("zonal_lmps.csv");
    write_wide_csv(args.out, "dispatch.csv", &unit_order, &dispatch_rows)?;
    manifest.record_output("dispatch.csv");
    if args.dump_nodal {
        write_wide_csv(args.out, "nodal_lmps.csv", &bus_ids, &nodal_rows)?;
        manifest.record_output("nodal_lmps.csv");
    }
    write_output(args.out, "hours_meta.csv", &meta)?;
    manifest.record_output("hours_meta.csv");
    let n_failures = run.failures.len();
    if n_failures > 0 {
        write_output(args.out, "failures.csv", &failures)?;
        manifest.record_output("failures.csv");
    }
    manifest.write(args.out)?;

    println!(
        "solved {} of {} hours at scale {}",
        n_hours - n_failures,
        n_hours,
        args.scale
    );
    if n_failures > 0 {
        Ok(Outcome::PartialFailures(n_failures))
    } else {
        Ok(Outcome::Clean)
    }
}

#[allow(clippy::too_many_arguments)]
fn resolve_cost(
    net: &gridcore::model::Network,
    gen: &gridcore::model::Generator,
    ts: NaiveDateTime,
    external_lmps: Option<&HourlyProfile>,
    params: Option<&BTreeMap<String, crate::cmd_fit::ParamRow>>,
    fuel_price_at: &dyn Fn(Fuel, NaiveDateTime) -> Option<f64>,
    static_costs: &BTreeMap<String, f64>,
) -> Result<Option<f64>> {
    if gen.fuel == Fuel::ExternalEquivalent {
        if let Some(lmps) = external_lmps {
            let zone = &net.bus(gen.bus).unwrap().zone;
            let col = lmps.column(zone).ok_or_else(|| {
                anyhow!("external unit `{}`: zone `{zone}` missing from {EXTERNAL_LMPS}", gen.id)
            })?;
            let pos = lmps
                .position(ts)
                .ok_or_else(|| anyhow!("{EXTERNAL_LMPS} missing hour {ts}"))?;
            return Ok(Some(col[pos]));
        }
    }
    if gen.fuel.is_fossil() {
        if let Some(params) = params {
            if let Some(row) = params.get(&gen.id) {
                if let Some(price) = fuel_price_at(gen.fuel, ts) {
                    return Ok(Some(row.slope * price));
                }
            }
        }
    }
    if let Some(&c1) = static_costs.get(&gen.id) {
        return Ok(Some(c1));
    }
    Ok(None) // fall through to the case's cost table inside the solver
}
