//! `grid allocate`: turn fleet-level hourly series into per-unit profiles
//! and per-bus loads, rebalance external areas against tie flows, and draw
//! the seeded marginal costs for zero-fuel units.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDateTime;
use indexmap::IndexMap;

use gridcore::allocation::{
    allocate_hydro, allocate_nuclear, allocate_proportional, allocate_zone_load,
    assign_random_costs, hq_injection, rebalance_external, AllocationConfig, ExternalArea,
};
use gridcore::ingest::parse_unit_records;
use gridcore::model::{BusId, Fuel, Network};
use gridcore::profile::HourlyProfile;

use crate::util::{
    ensure_out_dir, load_case, load_profile, profile_exists, read_file, write_output,
    write_wide_csv, Manifest, FUEL_MIX, INTERFACE_FLOWS, NUCLEAR_CF, UNIT_RECORDS, ZONE_LOADS,
};
use crate::Outcome;

pub fn run(
    case: &Path,
    config_path: &Path,
    profiles: &Path,
    records: Option<&Path>,
    seed_override: Option<u64>,
    out: &Path,
) -> Result<Outcome> {
    let (net, _interfaces) = load_case(case)?;
    let config = AllocationConfig::from_toml(&read_file(config_path)?)
        .with_context(|| format!("parsing {}", config_path.display()))?;
    let seed = seed_override.unwrap_or(config.seed);

    let mut manifest = Manifest::new("allocate");
    manifest.seed = Some(seed);
    manifest.record_input(case)?;
    manifest.record_input(config_path)?;

    // The zone-loads profile fixes the hourly index for the whole run.
    let zone_loads = load_profile(profiles, ZONE_LOADS, None)?;
    manifest.record_input(&profiles.join(ZONE_LOADS))?;
    let index: Vec<NaiveDateTime> = zone_loads.index().to_vec();
    let n_hours = index.len();

    let same_index = |p: &HourlyProfile, name: &str| -> Result<()> {
        if p.index() != index.as_slice() {
            bail!("{name} covers different hours than {ZONE_LOADS}");
        }
        Ok(())
    };

    let mut diagnostics = String::from("kind,unit,timestamp,detail\n");

    // External areas first: their buses leave the zonal allocation and
    // their loads/outputs come from rebalancing.
    let mut external_bus_loads: BTreeMap<BusId, Vec<f64>> = BTreeMap::new();
    let mut unit_outputs: IndexMap<String, Vec<f64>> = IndexMap::new();
    let mut external_buses: std::collections::BTreeSet<BusId> = Default::default();

    let tie_flows = if profile_exists(profiles, INTERFACE_FLOWS) {
        let p = load_profile(profiles, INTERFACE_FLOWS, None)?;
        manifest.record_input(&profiles.join(INTERFACE_FLOWS))?;
        same_index(&p, INTERFACE_FLOWS)?;
        Some(p)
    } else {
        None
    };

    for area_cfg in &config.external {
        let buses: Vec<BusId> = area_cfg.buses.iter().map(|&b| BusId(b)).collect();
        for &b in &buses {
            if net.bus(b).is_none() {
                bail!("external area {}: unknown bus {b}", area_cfg.label);
            }
            external_buses.insert(b);
        }
        let baseline_load: Vec<(BusId, f64)> = buses
            .iter()
            .map(|&b| (b, net.bus(b).unwrap().base_load))
            .collect();
        let baseline_gen: Vec<(String, f64)> = area_cfg
            .baseline_gen
            .iter()
            .map(|(id, mw)| (id.clone(), *mw))
            .collect();
        for (id, _) in &baseline_gen {
            if net.generator(id).is_none() {
                bail!("external area {}: unknown generator `{id}`", area_cfg.label);
            }
        }
        let area = ExternalArea {
            label: area_cfg.label.clone(),
            buses: buses.clone(),
            baseline_load,
            baseline_gen,
            tie_flow_column: area_cfg.tie_flow_column.clone(),
        };

        let load_series = zone_loads.require_column(&area_cfg.load_column).map_err(|_| {
            anyhow!(
                "external area {}: column `{}` missing from {ZONE_LOADS}",
                area_cfg.label,
                area_cfg.load_column
            )
        })?;
        let ties = tie_flows
            .as_ref()
            .ok_or_else(|| anyhow!("external areas need {INTERFACE_FLOWS}"))?;
        let tie_series = ties.require_column(&area.tie_flow_column).map_err(|_| {
            anyhow!(
                "external area {}: column `{}` missing from {INTERFACE_FLOWS}",
                area_cfg.label,
                area.tie_flow_column
            )
        })?;

        let mut per_bus: BTreeMap<BusId, Vec<f64>> = buses
            .iter()
            .map(|&b| (b, Vec::with_capacity(n_hours)))
            .collect();
        let mut per_gen: BTreeMap<String, Vec<f64>> = area
            .baseline_gen
            .iter()
            .map(|(id, _)| (id.clone(), Vec::with_capacity(n_hours)))
            .collect();
        for t in 0..n_hours {
            let rebalanced = rebalance_external(&area, load_series[t], tie_series[t])
                .with_context(|| {
                    format!("rebalancing area {} at {}", area.label, index[t])
                })?;
            for (bus, mw) in rebalanced.loads {
                per_bus.get_mut(&bus).unwrap().push(mw);
            }
            for (id, mw) in rebalanced.outputs {
                per_gen.get_mut(&id).unwrap().push(mw);
            }
        }
        external_bus_loads.extend(per_bus);
        for (id, series) in per_gen {
            unit_outputs.insert(id, series);
        }
    }

    // Internal zones: allocate the zonal totals to buses by baseline load.
    let internal_zones: Vec<String> = net
        .zones()
        .iter()
        .filter(|z| {
            !config
                .external
                .iter()
                .any(|a| a.label == **z)
        })
        .map(|z| z.to_string())
        .collect();
    let mut bus_loads: BTreeMap<BusId, Vec<f64>> = net
        .buses()
        .iter()
        .map(|b| (b.id, Vec::with_capacity(n_hours)))
        .collect();
    for zone in &internal_zones {
        let series = zone_loads
            .require_column(zone)
            .map_err(|_| anyhow!("column `{zone}` missing from {ZONE_LOADS}"))?;
        let buses_in_zone: Vec<BusId> = net
            .buses()
            .iter()
            .filter(|b| b.zone == *zone && !external_buses.contains(&b.id))
            .map(|b| b.id)
            .collect();
        if buses_in_zone.is_empty() {
            continue;
        }
        let baseline: BTreeMap<BusId, f64> = buses_in_zone
            .iter()
            .map(|&b| (b, net.bus(b).unwrap().base_load))
            .collect();
        for t in 0..n_hours {
            let allocated = allocate_zone_load(series[t], &buses_in_zone, &baseline)
                .with_context(|| format!("allocating zone {zone} at {}", index[t]))?;
            for (bus, mw) in allocated {
                bus_loads.get_mut(&bus).unwrap().push(mw);
            }
        }
    }
    for (bus, series) in external_bus_loads {
        bus_loads.insert(bus, series);
    }
    // Buses in no allocated zone (shouldn't happen) fall back to zero.
    for (bus, series) in bus_loads.iter_mut() {
        if series.is_empty() {
            diagnostics.push_str(&format!(
                "unallocated-bus,{bus},,bus load defaulted to zero\n"
            ));
            *series = vec![0.0; n_hours];
        }
    }

    // Import proxy: output equals the recorded tie flow.
    let proxy_unit = config.import_proxy.as_ref().map(|p| p.unit.clone());
    if let Some(proxy) = &config.import_proxy {
        if net.generator(&proxy.unit).is_none() {
            bail!("import proxy references unknown generator `{}`", proxy.unit);
        }
        let ties = tie_flows
            .as_ref()
            .ok_or_else(|| anyhow!("import proxy needs {INTERFACE_FLOWS}"))?;
        let series = ties.require_column(&proxy.tie_flow_column).map_err(|_| {
            anyhow!(
                "import proxy: column `{}` missing from {INTERFACE_FLOWS}",
                proxy.tie_flow_column
            )
        })?;
        let mut outputs = Vec::with_capacity(n_hours);
        for (t, &flow) in series.iter().enumerate() {
            let (value, diag) = hq_injection(flow);
            if let Some(d) = diag {
                diagnostics.push_str(&format!("import-proxy,{},{},{d}\n", proxy.unit, index[t]));
            }
            outputs.push(value);
        }
        unit_outputs.insert(proxy.unit.clone(), outputs);
    }

    // Nuclear units follow their capacity-factor series.
    let nuclear_units: Vec<&gridcore::model::Generator> = net
        .generators()
        .iter()
        .filter(|g| g.fuel == Fuel::Nuclear)
        .collect();
    if !nuclear_units.is_empty() {
        let cf = load_profile(profiles, NUCLEAR_CF, None)?;
        manifest.record_input(&profiles.join(NUCLEAR_CF))?;
        same_index(&cf, NUCLEAR_CF)?;
        for gen in nuclear_units {
            let series = cf.require_column(&gen.id).map_err(|_| {
                anyhow!("nuclear unit `{}` missing from {NUCLEAR_CF}", gen.id)
            })?;
            let outputs = allocate_nuclear(gen.p_max, series)
                .with_context(|| format!("allocating nuclear `{}`", gen.id))?;
            unit_outputs.insert(gen.id.clone(), outputs);
        }
    }

    // Fleet totals: hydro split per config, wind and other renewables by
    // capacity share.
    let hydro_fleet: IndexMap<String, f64> = net
        .generators()
        .iter()
        .filter(|g| g.fuel == Fuel::Hydro && Some(&g.id) != proxy_unit.as_ref())
        .map(|g| (g.id.clone(), g.p_max))
        .collect();
    let wind_fleet: IndexMap<String, f64> = net
        .generators()
        .iter()
        .filter(|g| g.fuel == Fuel::Wind)
        .map(|g| (g.id.clone(), g.p_max))
        .collect();
    let or_fleet: IndexMap<String, f64> = net
        .generators()
        .iter()
        .filter(|g| g.fuel == Fuel::OtherRenewable)
        .map(|g| (g.id.clone(), g.p_max))
        .collect();

    if !hydro_fleet.is_empty() || !wind_fleet.is_empty() || !or_fleet.is_empty() {
        let mix = load_profile(profiles, FUEL_MIX, None)?;
        manifest.record_input(&profiles.join(FUEL_MIX))?;
        same_index(&mix, FUEL_MIX)?;

        if !hydro_fleet.is_empty() {
            let cfg = config
                .hydro
                .as_ref()
                .ok_or_else(|| anyhow!("case has hydro units but the config lacks [hydro]"))?;
            let total = mix
                .require_column("hydro")
                .map_err(|_| anyhow!("column `hydro` missing from {FUEL_MIX}"))?;
            let months = mix.months();
            let alloc = allocate_hydro(total, &months, cfg, &hydro_fleet)
                .context("allocating hydro fleet")?;
            for clamp in &alloc.clamps {
                diagnostics.push_str(&format!(
                    "hydro-clamp,{},{},raw {} clamped to {}\n",
                    clamp.unit, index[clamp.hour], clamp.raw, clamp.clamped
                ));
            }
            for (id, series) in alloc.outputs {
                unit_outputs.insert(id, series);
            }
        }
        if !wind_fleet.is_empty() {
            let total = mix
                .require_column("wind")
                .map_err(|_| anyhow!("column `wind` missing from {FUEL_MIX}"))?;
            for (id, series) in
                allocate_proportional(total, &wind_fleet).context("allocating wind fleet")?
            {
                unit_outputs.insert(id, series);
            }
        }
        if !or_fleet.is_empty() {
            let total = mix
                .require_column("other_renewable")
                .map_err(|_| anyhow!("column `other_renewable` missing from {FUEL_MIX}"))?;
            for (id, series) in allocate_proportional(total, &or_fleet)
                .context("allocating other renewables")?
            {
                unit_outputs.insert(id, series);
            }
        }
    }

    // Thermal outputs from recorded unit data, scaled per zone where the
    // records are known to undercount.
    let records_path = records
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| profiles.join(UNIT_RECORDS));
    if records_path.is_file() {
        manifest.record_input(&records_path)?;
        let recs = parse_unit_records(&read_file(&records_path)?)
            .with_context(|| format!("parsing {}", records_path.display()))?;
        let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let positions: BTreeMap<NaiveDateTime, usize> = index
            .iter()
            .enumerate()
            .map(|(i, ts)| (*ts, i))
            .collect();
        for r in recs {
            let Some(gen) = net.generator(&r.unit) else {
                continue; // records may cover units outside this case
            };
            if !gen.fuel.is_fossil() {
                continue;
            }
            let Some(&t) = positions.get(&r.timestamp) else {
                continue;
            };
            let scale = zone_scale(&net, &config, gen);
            series
                .entry(r.unit.clone())
                .or_insert_with(|| vec![0.0; n_hours])[t] = r.power_output * scale;
        }
        for (id, s) in series {
            unit_outputs.insert(id, s);
        }
    }

    // Every case unit gets a column so downstream parsers can be strict.
    for gen in net.generators() {
        if !unit_outputs.contains_key(&gen.id) {
            diagnostics.push_str(&format!(
                "unallocated-unit,{},,no data source; output defaulted to zero\n",
                gen.id
            ));
            unit_outputs.insert(gen.id.clone(), vec![0.0; n_hours]);
        }
    }

    // Seeded marginal costs for the zero-fuel fleet.
    let cost_units: Vec<(String, Fuel)> = net
        .generators()
        .iter()
        .map(|g| (g.id.clone(), g.fuel))
        .collect();
    let costs = assign_random_costs(&cost_units, seed);
    let mut costs_csv = String::from("unit,c1\n");
    for (unit, c1) in &costs {
        let _ = writeln!(costs_csv, "{unit},{c1}");
    }

    // Write outputs.
    ensure_out_dir(out)?;
    let bus_header: Vec<String> = bus_loads.keys().map(|b| b.to_string()).collect();
    let bus_rows: Vec<(NaiveDateTime, Vec<f64>)> = (0..n_hours)
        .map(|t| (index[t], bus_loads.values().map(|s| s[t]).collect()))
        .collect();
    write_wide_csv(out, crate::util::BUS_LOADS, &bus_header, &bus_rows)?;
    manifest.record_output(crate::util::BUS_LOADS);

    // Stable unit order: network declaration order.
    let mut ordered: IndexMap<String, Vec<f64>> = IndexMap::new();
    for gen in net.generators() {
        if let Some(series) = unit_outputs.shift_remove(&gen.id) {
            ordered.insert(gen.id.clone(), series);
        }
    }
    let unit_header: Vec<String> = ordered.keys().cloned().collect();
    let unit_rows: Vec<(NaiveDateTime, Vec<f64>)> = (0..n_hours)
        .map(|t| (index[t], ordered.values().map(|s| s[t]).collect()))
        .collect();
    write_wide_csv(out, crate::util::UNIT_PROFILES, &unit_header, &unit_rows)?;
    manifest.record_output(crate::util::UNIT_PROFILES);

    write_output(out, crate::util::COSTS, &costs_csv)?;
    manifest.record_output(crate::util::COSTS);
    write_output(out, "diagnostics.csv", &diagnostics)?;
    manifest.record_output("diagnostics.csv");

    // Pass untouched inputs through so the output directory is a complete
    // profile set for pf/opf/reduce.
    for name in [
        crate::util::INTERFACE_FLOWS,
        crate::util::EXTERNAL_LMPS,
        crate::util::FUEL_PRICES,
        crate::util::HVDC_SCHEDULES,
        crate::util::UNIT_RECORDS,
    ] {
        let src = profiles.join(name);
        if src.is_file() {
            std::fs::copy(&src, out.join(name))
                .with_context(|| format!("copying {name}"))?;
        }
    }
    manifest.write(out)?;

    println!(
        "allocated {} units and {} buses over {n_hours} hours (seed {seed})",
        unit_header.len(),
        bus_header.len()
    );
    Ok(Outcome::Clean)
}

fn zone_scale(
    net: &Network,
    config: &AllocationConfig,
    gen: &gridcore::model::Generator,
) -> f64 {
    net.bus(gen.bus)
        .and_then(|b| config.thermal_zone_scale.get(&b.zone))
        .copied()
        .unwrap_or(1.0)
}
