//! `grid reduce`: apply topology edits and a Ward reduction to a case,
//! check the equivalent against the full network, and re-map hourly
//! profiles onto the retained buses.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use gridcore::ingest::serialize_case;
use gridcore::model::{BranchId, BusId};
use gridcore::reduction::{
    add_hvdc_proxy, add_line_estimated, equivalence_check, remove_branches, ward_reduce_with_tol,
    ReductionSpec, DEFAULT_PRUNE_TOL,
};

use crate::util::{
    ensure_out_dir, load_case, load_profile, read_file, write_wide_csv, Manifest,
    BUS_LOADS, COSTS, EXTERNAL_LMPS, FUEL_PRICES, HVDC_SCHEDULES, INTERFACE_FLOWS, UNIT_PROFILES,
};
use crate::Outcome;

#[derive(Debug, Deserialize)]
struct ReduceSpecFile {
    retained: Vec<u32>,
    #[serde(default)]
    notes: String,
    #[serde(default = "default_prune_tol")]
    prune_tol: f64,
    /// Hour index of the baseline operating point when profiles are given.
    #[serde(default)]
    baseline_hour: usize,
    #[serde(default)]
    remove: Vec<RemoveEntry>,
    #[serde(default)]
    add_line: Vec<AddLineEntry>,
    #[serde(default)]
    hvdc: Vec<HvdcEntry>,
}

fn default_prune_tol() -> f64 {
    DEFAULT_PRUNE_TOL
}

#[derive(Debug, Deserialize)]
struct RemoveEntry {
    branch: u32,
}

#[derive(Debug, Deserialize)]
struct AddLineEntry {
    from: u32,
    to: u32,
    length_miles: f64,
    kv: f64,
    per_mile_x: f64,
    detour: f64,
}

#[derive(Debug, Deserialize)]
struct HvdcEntry {
    from: u32,
    to: u32,
    name: String,
    limit: f64,
}

#[derive(Serialize)]
struct Provenance {
    eliminated_buses: Vec<u32>,
    retained_buses: Vec<u32>,
    removed_branches: Vec<u32>,
    equivalent_branches: Vec<EquivalentEntry>,
    pruned: Vec<PrunedEntry>,
    boundary_injections_mw: BTreeMap<String, f64>,
    baseline_hour: Option<String>,
    max_flow_error_mw: f64,
    max_angle_error_rad: f64,
}

#[derive(Serialize)]
struct EquivalentEntry {
    id: u32,
    from: u32,
    to: u32,
    reactance: f64,
    note: String,
}

#[derive(Serialize)]
struct PrunedEntry {
    from: u32,
    to: u32,
    susceptance: f64,
}

pub fn run(case: &Path, spec_path: &Path, profiles: Option<&Path>, out: &Path) -> Result<Outcome> {
    let (net, interfaces) = load_case(case)?;
    let spec_file: ReduceSpecFile = toml::from_str(&read_file(spec_path)?)
        .with_context(|| format!("parsing {}", spec_path.display()))?;

    let mut manifest = Manifest::new("reduce");
    manifest.record_input(case)?;
    manifest.record_input(spec_path)?;

    // Topology edits that precede the reduction.
    let to_remove: Vec<BranchId> = spec_file.remove.iter().map(|r| BranchId(r.branch)).collect();
    let net = if to_remove.is_empty() {
        net
    } else {
        remove_branches(&net, &to_remove).context("removing branches")?
    };

    // Baseline operating point: hourly profiles when available, otherwise
    // the case's base loads with units at zero.
    let loaded_profiles = match profiles {
        Some(dir) => {
            let bus_loads = load_profile(dir, BUS_LOADS, None)?;
            manifest.record_input(&dir.join(BUS_LOADS))?;
            let unit_profiles = load_profile(dir, UNIT_PROFILES, None)?;
            manifest.record_input(&dir.join(UNIT_PROFILES))?;
            if bus_loads.index() != unit_profiles.index() {
                bail!("{BUS_LOADS} and {UNIT_PROFILES} cover different hours");
            }
            Some((bus_loads, unit_profiles))
        }
        None => None,
    };

    let injections_at = |hour: usize| -> Result<Vec<f64>> {
        match &loaded_profiles {
            Some((bus_loads, unit_profiles)) => {
                if hour >= bus_loads.len() {
                    bail!("baseline_hour {hour} outside 0..{}", bus_loads.len() - 1);
                }
                let mut inj = vec![0.0; net.buses().len()];
                for (pos, bus) in net.buses().iter().enumerate() {
                    let col = bus_loads
                        .column(&bus.id.to_string())
                        .ok_or_else(|| anyhow!("bus {} missing from {BUS_LOADS}", bus.id))?;
                    inj[pos] -= col[hour];
                }
                for gen in net.generators() {
                    if let Some(col) = unit_profiles.column(&gen.id) {
                        let pos = net.bus_position(gen.bus).unwrap();
                        inj[pos] += col[hour];
                    }
                }
                Ok(inj)
            }
            None => Ok(net.buses().iter().map(|b| -b.base_load).collect()),
        }
    };
    let baseline = injections_at(spec_file.baseline_hour)?;

    let retained: Vec<BusId> = spec_file.retained.iter().map(|&b| BusId(b)).collect();
    let mut reduction_spec = ReductionSpec::new(retained);
    reduction_spec.notes = spec_file.notes.clone();
    let reduced = ward_reduce_with_tol(&net, &baseline, &reduction_spec, spec_file.prune_tol)
        .context("ward reduction")?;
    let (max_flow_err, max_angle_err) =
        equivalence_check(&net, &baseline, &reduced).context("equivalence check")?;
    println!(
        "equivalence check: max retained-branch flow error {max_flow_err:.3e} MW, \
         max angle error {max_angle_err:.3e} rad"
    );

    // Interfaces must survive the reduction intact.
    let kept_ids: BTreeSet<BranchId> =
        reduced.network.branches().iter().map(|b| b.id).collect();
    for iface in &interfaces {
        for (id, _) in &iface.members {
            if !kept_ids.contains(id) {
                bail!(
                    "interface `{}` references branch {id}, which the reduction eliminated",
                    iface.name
                );
            }
        }
    }

    // Post-reduction additions: estimated AC lines, then hvdc proxies.
    let mut final_net = reduced.network.clone();
    for line in &spec_file.add_line {
        final_net = add_line_estimated(
            &final_net,
            BusId(line.from),
            BusId(line.to),
            line.length_miles,
            line.kv,
            line.per_mile_x,
            line.detour,
        )
        .with_context(|| format!("adding line {}-{}", line.from, line.to))?;
        let added = final_net.branches().last().unwrap();
        println!(
            "added line {}-{}: x = {:.6} pu (branch {})",
            line.from, line.to, added.reactance, added.id
        );
    }
    for proxy in &spec_file.hvdc {
        final_net = add_hvdc_proxy(
            &final_net,
            BusId(proxy.from),
            BusId(proxy.to),
            &proxy.name,
            proxy.limit,
        )
        .with_context(|| format!("adding hvdc proxy `{}`", proxy.name))?;
    }

    ensure_out_dir(out)?;
    let case_text = serialize_case(&final_net, &interfaces);
    crate::util::write_output(out, "reduced.case", &case_text)?;
    manifest.record_output("reduced.case");

    let provenance = Provenance {
        eliminated_buses: reduced.ward.eliminated.iter().map(|b| b.0).collect(),
        retained_buses: reduced.ward.retained.iter().map(|b| b.0).collect(),
        removed_branches: to_remove.iter().map(|b| b.0).collect(),
        equivalent_branches: reduced
            .provenance
            .iter()
            .map(|(id, note)| {
                let br = reduced.network.branch(*id).unwrap();
                EquivalentEntry {
                    id: id.0,
                    from: br.from_bus.0,
                    to: br.to_bus.0,
                    reactance: br.reactance,
                    note: note.clone(),
                }
            })
            .collect(),
        pruned: reduced
            .pruned
            .iter()
            .map(|(a, b, s)| PrunedEntry {
                from: a.0,
                to: b.0,
                susceptance: *s,
            })
            .collect(),
        boundary_injections_mw: reduced
            .ward
            .retained
            .iter()
            .zip(&reduced.boundary_injections)
            .map(|(b, v)| (b.to_string(), *v))
            .collect(),
        baseline_hour: loaded_profiles
            .as_ref()
            .map(|(p, _)| p.index()[spec_file.baseline_hour].format("%Y-%m-%dT%H:%M:%S").to_string()),
        max_flow_error_mw: max_flow_err,
        max_angle_error_rad: max_angle_err,
    };
    crate::util::write_output(
        out,
        "provenance.json",
        &(serde_json::to_string_pretty(&provenance)? + "\n"),
    )?;
    manifest.record_output("provenance.json");

    // Re-map hourly profiles: retained loads and units pass through,
    // eliminated-bus injections become hourly boundary corrections.
    if let Some((bus_loads, unit_profiles)) = &loaded_profiles {
        let dir = out.join("profiles_reduced");
        ensure_out_dir(&dir)?;
        let index: Vec<NaiveDateTime> = bus_loads.index().to_vec();
        let n_hours = index.len();

        let retained_header: Vec<String> = final_net
            .buses()
            .iter()
            .map(|b| b.id.to_string())
            .collect();
        let load_rows: Vec<(NaiveDateTime, Vec<f64>)> = (0..n_hours)
            .map(|t| {
                let values = final_net
                    .buses()
                    .iter()
                    .map(|b| bus_loads.column(&b.id.to_string()).map_or(0.0, |c| c[t]))
                    .collect();
                (index[t], values)
            })
            .collect();
        write_wide_csv(&dir, BUS_LOADS, &retained_header, &load_rows)?;

        let kept_units: Vec<&str> = final_net
            .generators()
            .iter()
            .map(|g| g.id.as_str())
            .filter(|id| unit_profiles.has_column(id))
            .collect();
        let unit_rows: Vec<(NaiveDateTime, Vec<f64>)> = (0..n_hours)
            .map(|t| {
                let values = kept_units
                    .iter()
                    .map(|id| unit_profiles.column(id).unwrap()[t])
                    .collect();
                (index[t], values)
            })
            .collect();
        let unit_header: Vec<String> = kept_units.iter().map(|s| s.to_string()).collect();
        write_wide_csv(&dir, UNIT_PROFILES, &unit_header, &unit_rows)?;

        // Hourly boundary corrections from the eliminated buses' own
        // injections (their loads and any units that sat on them).
        let elim_units: Vec<&gridcore::model::Generator> = net
            .generators()
            .iter()
            .filter(|g| reduced.ward.eliminated.contains(&g.bus))
            .collect();
        let boundary_rows: Vec<(NaiveDateTime, Vec<f64>)> = (0..n_hours)
            .map(|t| {
                let elim_inj: Vec<f64> = reduced
                    .ward
                    .eliminated
                    .iter()
                    .map(|bus| {
                        let mut v = -bus_loads
                            .column(&bus.to_string())
                            .map_or(0.0, |c| c[t]);
                        for gen in &elim_units {
                            if gen.bus == *bus {
                                if let Some(col) = unit_profiles.column(&gen.id) {
                                    v += col[t];
                                }
                            }
                        }
                        v
                    })
                    .collect();
                (index[t], reduced.ward.boundary_for(&elim_inj))
            })
            .collect();
        write_wide_csv(
            &dir,
            crate::util::BOUNDARY_INJECTIONS,
            &retained_header,
            &boundary_rows,
        )?;

        for name in [
            INTERFACE_FLOWS,
            EXTERNAL_LMPS,
            FUEL_PRICES,
            HVDC_SCHEDULES,
            COSTS,
        ] {
            let src = profiles.unwrap().join(name);
            if src.is_file() {
                std::fs::copy(&src, dir.join(name))
                    .with_context(|| format!("copying {name}"))?;
            }
        }
        manifest.record_output("profiles_reduced/");
    }

    manifest.write(out)?;
    println!(
        "reduced {} buses to {} ({} equivalent branches, {} pruned)",
        net.buses().len(),
        reduced.network.buses().len(),
        provenance.equivalent_branches.len(),
        provenance.pruned.len()
    );
    Ok(Outcome::Clean)
}
