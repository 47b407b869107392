//! `grid pf`: hourly DC power flow from allocated profiles, interface flows
//! against recorded data, and the percentage-error statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, Result};
use chrono::NaiveDateTime;
use indexmap::IndexMap;
use rayon::prelude::*;

use gridcore::dcpf::{error_summary, interface_error, interface_flow, DcSolver, PfSolution};
use gridcore::model::{BranchId, BranchKind};

use crate::util::{
    ensure_out_dir, load_case, load_profile, parse_hours, profile_exists, slice_hours,
    write_output, write_wide_csv, Manifest, BOUNDARY_INJECTIONS, BUS_LOADS, HVDC_SCHEDULES,
    INTERFACE_FLOWS, UNIT_PROFILES,
};
use crate::Outcome;

pub fn run(
    case: &Path,
    profiles: &Path,
    hours: Option<&str>,
    dump_flows: bool,
    out: &Path,
) -> Result<Outcome> {
    let (net, interfaces) = load_case(case)?;
    let hour_range = hours.map(parse_hours).transpose()?;

    let mut manifest = Manifest::new("pf");
    manifest.record_input(case)?;
    manifest.hours = hour_range;

    // Strict profile loading: bus loads and unit outputs must cover the
    // case exactly.
    let bus_ids: Vec<String> = net.buses().iter().map(|b| b.id.to_string()).collect();
    let bus_refs: Vec<&str> = bus_ids.iter().map(String::as_str).collect();
    let bus_loads = load_profile(profiles, BUS_LOADS, Some(&bus_refs))?;
    manifest.record_input(&profiles.join(BUS_LOADS))?;
    let unit_ids: Vec<String> = net.generators().iter().map(|g| g.id.clone()).collect();
    let unit_refs: Vec<&str> = unit_ids.iter().map(String::as_str).collect();
    let unit_profiles = load_profile(profiles, UNIT_PROFILES, Some(&unit_refs))?;
    manifest.record_input(&profiles.join(UNIT_PROFILES))?;
    if bus_loads.index() != unit_profiles.index() {
        anyhow::bail!("{BUS_LOADS} and {UNIT_PROFILES} cover different hours");
    }

    let boundary = if profile_exists(profiles, BOUNDARY_INJECTIONS) {
        let p = load_profile(profiles, BOUNDARY_INJECTIONS, Some(&bus_refs))?;
        manifest.record_input(&profiles.join(BOUNDARY_INJECTIONS))?;
        if p.index() != bus_loads.index() {
            anyhow::bail!("{BOUNDARY_INJECTIONS} covers different hours");
        }
        Some(p)
    } else {
        None
    };

    // Schedules for every in-service proxy, keyed by name (or id).
    let proxies: Vec<(BranchId, String)> = net
        .branches()
        .iter()
        .filter(|b| b.kind == BranchKind::HvdcProxy && b.is_in_service())
        .map(|b| (b.id, b.name.clone().unwrap_or_else(|| b.id.to_string())))
        .collect();
    let schedules_profile = if proxies.is_empty() {
        None
    } else {
        let names: Vec<&str> = proxies.iter().map(|(_, n)| n.as_str()).collect();
        let p = load_profile(profiles, HVDC_SCHEDULES, Some(&names))?;
        manifest.record_input(&profiles.join(HVDC_SCHEDULES))?;
        if p.index() != bus_loads.index() {
            anyhow::bail!("{HVDC_SCHEDULES} covers different hours");
        }
        Some(p)
    };

    // Recorded interface flows for the error metric, when available.
    let reference = if profile_exists(profiles, INTERFACE_FLOWS) {
        let p = load_profile(profiles, INTERFACE_FLOWS, None)?;
        manifest.record_input(&profiles.join(INTERFACE_FLOWS))?;
        Some(p)
    } else {
        None
    };

    let bus_loads = slice_hours(&bus_loads, hour_range)?;
    let unit_profiles = slice_hours(&unit_profiles, hour_range)?;
    let boundary = boundary.map(|p| slice_hours(&p, hour_range)).transpose()?;
    let schedules_profile = schedules_profile
        .map(|p| slice_hours(&p, hour_range))
        .transpose()?;

    let index: Vec<NaiveDateTime> = bus_loads.index().to_vec();
    let n_hours = index.len();
    let solver = DcSolver::new(&net).map_err(|e| anyhow!("building DC solver: {e}"))?;

    // Hourly injections assembled once, solved in parallel on the shared
    // factorization.
    let results: Vec<Result<PfSolution, String>> = (0..n_hours)
        .into_par_iter()
        .map(|t| {
            let mut inj = vec![0.0; net.buses().len()];
            for (pos, bus) in net.buses().iter().enumerate() {
                inj[pos] -= bus_loads.column(&bus.id.to_string()).unwrap()[t];
                if let Some(b) = &boundary {
                    inj[pos] += b.column(&bus.id.to_string()).unwrap()[t];
                }
            }
            for gen in net.generators() {
                let pos = net.bus_position(gen.bus).unwrap();
                inj[pos] += unit_profiles.column(&gen.id).unwrap()[t];
            }
            let mut schedules = BTreeMap::new();
            if let Some(sp) = &schedules_profile {
                for (id, name) in &proxies {
                    schedules.insert(*id, sp.column(name).unwrap()[t]);
                }
            }
            solver.solve(&inj, &schedules).map_err(|e| e.to_string())
        })
        .collect();

    let mut failures = String::from("timestamp,reason\n");
    let mut n_failures = 0usize;
    let mut interface_rows = String::from("timestamp,interface,real_mw,sim_mw,error\n");
    let mut error_series: IndexMap<String, Vec<f64>> = IndexMap::new();
    let mut flow_rows: Vec<(NaiveDateTime, Vec<f64>)> = Vec::new();
    let mut slack_rows = String::from("timestamp,slack_injection_mw\n");

    for (t, result) in results.iter().enumerate() {
        let sol = match result {
            Ok(sol) => sol,
            Err(reason) => {
                let _ = writeln!(failures, "{},{}", index[t].format("%Y-%m-%dT%H:%M:%S"), reason);
                n_failures += 1;
                continue;
            }
        };
        let _ = writeln!(
            slack_rows,
            "{},{}",
            index[t].format("%Y-%m-%dT%H:%M:%S"),
            sol.slack_injection
        );
        if dump_flows {
            flow_rows.push((index[t], sol.branch_flows.clone()));
        }
        for iface in &interfaces {
            let sim = interface_flow(&net, sol, iface);
            let ts = index[t].format("%Y-%m-%dT%H:%M:%S");
            let real = reference.as_ref().and_then(|r| {
                r.column(&iface.name)
                    .and_then(|col| r.position(index[t]).map(|p| col[p]))
            });
            match real {
                Some(real) if iface.limit_pos.is_finite() => {
                    let err = interface_error(real, sim, iface.limit_pos)
                        .map_err(|e| anyhow!("interface `{}`: {e}", iface.name))?;
                    let _ = writeln!(interface_rows, "{ts},{},{real},{sim},{err}", iface.name);
                    error_series
                        .entry(iface.name.clone())
                        .or_default()
                        .push(err);
                }
                Some(real) => {
                    let _ = writeln!(interface_rows, "{ts},{},{real},{sim},", iface.name);
                }
                None => {
                    let _ = writeln!(interface_rows, "{ts},{},,{sim},", iface.name);
                }
            }
        }
    }

    ensure_out_dir(out)?;
    write_output(out, "interface_errors.csv", &interface_rows)?;
    manifest.record_output("interface_errors.csv");
    write_output(out, "slack.csv", &slack_rows)?;
    manifest.record_output("slack.csv");

    if !error_series.is_empty() {
        let stats = error_summary(&error_series).map_err(|e| anyhow!("error summary: {e}"))?;
        let mut text = String::from(
            "interface,n,median,q1,q3,iqr,p2_5,p97_5,outliers,iqr_within_band,p95_within_band\n",
        );
        for s in &stats {
            let _ = writeln!(
                text,
                "{},{},{},{},{},{},{},{},{},{},{}",
                s.interface,
                s.n,
                s.median,
                s.q1,
                s.q3,
                s.iqr,
                s.p2_5,
                s.p97_5,
                s.outliers.len(),
                u8::from(s.iqr_within_band),
                u8::from(s.p95_within_band)
            );
        }
        write_output(out, "error_summary.csv", &text)?;
        manifest.record_output("error_summary.csv");
    }

    if dump_flows {
        let header: Vec<String> = net.branches().iter().map(|b| b.id.to_string()).collect();
        write_wide_csv(out, "branch_flows.csv", &header, &flow_rows)?;
        manifest.record_output("branch_flows.csv");
    }
    if n_failures > 0 {
        write_output(out, "failures.csv", &failures)?;
        manifest.record_output("failures.csv");
    }
    manifest.write(out)?;

    println!(
        "solved {} of {n_hours} hours ({} interfaces tracked)",
        n_hours - n_failures,
        interfaces.len()
    );
    if n_failures > 0 {
        Ok(Outcome::PartialFailures(n_failures))
    } else {
        Ok(Outcome::Clean)
    }
}
