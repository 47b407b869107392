//! Writes the bundled 12-bus demonstration dataset into `fixtures/` at the
//! workspace root: a three-zone case (two study zones plus one external
//! area), a week of hourly input profiles, and the config files the
//! pipeline commands consume. Reference series ("recorded" interface flows
//! and zonal prices) are produced by solving the same week and perturbing
//! the results deterministically.
//!
//! Run with: `cargo run -p gridcore --example make_fixture`

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{NaiveDateTime, Timelike};
use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gridcore::allocation::{
    allocate_hydro, allocate_nuclear, allocate_proportional, allocate_zone_load,
    assign_random_costs, rebalance_external, ExternalArea, HydroConfig,
};
use gridcore::dcopf::{hourly_opf_run, HourInputs};
use gridcore::dcpf::{interface_flow, DcSolver};
use gridcore::reduction::{
    add_hvdc_proxy, add_line_estimated, remove_branches, ward_reduce, ReductionSpec,
};
use gridcore::ingest::serialize_case;
use gridcore::model::{
    Branch, BranchId, BranchKind, BranchStatus, Bus, BusId, BusKind, CostCurve, Fuel, Generator,
    Interface, Network,
};
use gridcore::profile::HourlyProfile;

const HOURS: usize = 168;
const THERMAL_B_SCALE: f64 = 1.03;

fn bus(id: u32, zone: &str, kind: BusKind, load: f64, lat: f64, lon: f64) -> Bus {
    Bus {
        id: BusId(id),
        zone: zone.to_string(),
        kind,
        base_load: load,
        latitude: Some(lat),
        longitude: Some(lon),
    }
}

fn line(id: u32, from: u32, to: u32, x: f64, rating: f64) -> Branch {
    Branch {
        id: BranchId(id),
        from_bus: BusId(from),
        to_bus: BusId(to),
        resistance: 0.0,
        reactance: x,
        rating,
        status: BranchStatus::InService,
        kind: BranchKind::PhysicalAc,
        name: None,
    }
}

fn gen(id: &str, bus: u32, fuel: Fuel, p_max: f64, ramp: f64, c1: f64, disp: bool) -> Generator {
    Generator {
        id: id.to_string(),
        bus: BusId(bus),
        fuel,
        p_max,
        p_min: 0.0,
        ramp_hourly: ramp,
        cost: CostCurve { c1, c0: 0.0 },
        dispatchable: disp,
    }
}

fn build_case() -> (Network, Vec<Interface>) {
    let buses = vec![
        bus(1, "A", BusKind::Slack, 20.0, 43.0, -79.0),
        bus(2, "A", BusKind::Pq, 60.0, 43.2, -78.0),
        bus(3, "A", BusKind::Pq, 50.0, 43.5, -76.5),
        bus(4, "A", BusKind::Pv, 70.0, 44.0, -75.5),
        bus(5, "B", BusKind::Pv, 90.0, 42.8, -77.0),
        bus(6, "B", BusKind::Pq, 130.0, 42.5, -76.0),
        bus(7, "B", BusKind::Pq, 120.0, 42.2, -75.0),
        bus(8, "B", BusKind::Pv, 110.0, 41.8, -74.2),
        bus(9, "C", BusKind::Pv, 40.0, 41.5, -73.5),
        bus(10, "C", BusKind::Pv, 50.0, 41.2, -72.8),
        bus(11, "C", BusKind::Pq, 170.0, 41.0, -72.2),
        bus(12, "C", BusKind::Pq, 150.0, 40.8, -71.8),
    ];
    let branches = vec![
        line(1, 1, 2, 0.018, 400.0),
        line(2, 1, 3, 0.025, 300.0),
        line(3, 2, 3, 0.030, 250.0),
        line(4, 2, 4, 0.022, 300.0),
        line(5, 3, 4, 0.035, 250.0),
        line(6, 2, 5, 0.040, 350.0),
        line(7, 4, 6, 0.045, 350.0),
        line(8, 5, 6, 0.028, 300.0),
        line(9, 5, 7, 0.026, 300.0),
        line(10, 6, 8, 0.030, 320.0),
        line(11, 7, 8, 0.020, 300.0),
        line(12, 7, 9, 0.055, 280.0),
        line(13, 8, 10, 0.050, 280.0),
        line(14, 9, 11, 0.030, 350.0),
        line(15, 10, 12, 0.024, 350.0),
        line(16, 11, 12, 0.028, 300.0),
    ];
    let generators = vec![
        gen("RMN_HYDRO", 1, Fuel::Hydro, 420.0, 420.0, 0.0, true),
        gen("STL_HYDRO", 2, Fuel::Hydro, 180.0, 180.0, 0.0, true),
        gen("SM_HYDRO_A", 3, Fuel::Hydro, 45.0, 45.0, 0.0, true),
        gen("SM_HYDRO_B", 4, Fuel::Hydro, 75.0, 75.0, 0.0, true),
        gen("NUKE_1", 4, Fuel::Nuclear, 300.0, 180.0, 0.0, true),
        gen("HQ_IMPORT", 4, Fuel::Hydro, 250.0, 250.0, 0.0, false),
        gen("WIND_A", 2, Fuel::Wind, 90.0, 90.0, 0.0, false),
        gen("WIND_B", 3, Fuel::Wind, 110.0, 110.0, 0.0, false),
        gen("OR_B6", 6, Fuel::OtherRenewable, 25.0, 25.0, 0.0, false),
        gen("OR_B7", 7, Fuel::OtherRenewable, 20.0, 20.0, 0.0, false),
        gen("GAS_5A", 5, Fuel::Gas, 260.0, 180.0, 28.0, true),
        gen("GAS_5B", 5, Fuel::Gas, 150.0, 150.0, 32.0, true),
        gen("GAS_6", 6, Fuel::Gas, 220.0, 160.0, 30.0, true),
        gen("OIL_7", 7, Fuel::Oil, 170.0, 120.0, 45.0, true),
        gen("DF_8", 8, Fuel::DualFuel, 190.0, 140.0, 34.0, true),
        gen("CT_8", 8, Fuel::Gas, 40.0, 40.0, 55.0, true),
        gen("EXT_C1", 9, Fuel::ExternalEquivalent, 600.0, 600.0, 25.0, true),
        gen("EXT_C2", 10, Fuel::ExternalEquivalent, 550.0, 550.0, 25.0, true),
    ];
    let interfaces = vec![
        Interface {
            name: "ab_corridor".to_string(),
            members: vec![(BranchId(6), 1), (BranchId(7), 1)],
            limit_pos: 600.0,
            limit_neg: -600.0,
        },
        Interface {
            name: "bc_corridor".to_string(),
            members: vec![(BranchId(12), 1), (BranchId(13), 1)],
            limit_pos: 500.0,
            limit_neg: -500.0,
        },
        Interface {
            name: "a_east".to_string(),
            members: vec![(BranchId(4), 1), (BranchId(5), 1)],
            limit_pos: 450.0,
            limit_neg: -450.0,
        },
    ];
    (Network::new(100.0, buses, branches, generators), interfaces)
}

fn write_profile(path: &Path, index: &[NaiveDateTime], cols: &[(&str, &[f64])]) {
    let columns: IndexMap<String, Vec<f64>> = cols
        .iter()
        .map(|(name, series)| (name.to_string(), series.to_vec()))
        .collect();
    let profile = HourlyProfile::new(index.to_vec(), columns).expect("fixture profile");
    fs::write(path, profile.to_csv_string()).expect("write profile");
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let profiles = root.join("profiles");
    fs::create_dir_all(&profiles).expect("create fixtures dir");

    let (net, interfaces) = build_case();
    fs::write(root.join("case12.case"), serialize_case(&net, &interfaces)).unwrap();

    let t0 = NaiveDateTime::parse_from_str("2019-01-01T00:00:00", "%Y-%m-%dT%H:%M:%S").unwrap();
    let index: Vec<NaiveDateTime> = (0..HOURS)
        .map(|h| t0 + chrono::Duration::hours(h as i64))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(20190101);

    // Diurnal shapes with a weekday bump and deterministic jitter.
    let shape: Vec<f64> = index
        .iter()
        .map(|ts| {
            let h = ts.time().hour() as f64;
            let day = (ts.and_utc().timestamp() / 86400) % 7;
            let weekday = if day < 5 { 1.0 } else { 0.92 };
            let diurnal = 1.0 + 0.18 * ((h - 7.0) / 24.0 * std::f64::consts::TAU).sin();
            weekday * diurnal
        })
        .collect();

    let mut zone_a = Vec::with_capacity(HOURS);
    let mut zone_b = Vec::with_capacity(HOURS);
    let mut zone_c = Vec::with_capacity(HOURS);
    for s in &shape {
        zone_a.push(210.0 * s + rng.gen_range(-6.0..6.0));
        zone_b.push(470.0 * s + rng.gen_range(-12.0..12.0));
        zone_c.push(420.0 * s + rng.gen_range(-10.0..10.0));
    }
    write_profile(
        &profiles.join("zone_loads.csv"),
        &index,
        &[("A", &zone_a), ("B", &zone_b), ("C", &zone_c)],
    );

    // Fleet totals for the allocators.
    let mut hydro_total = Vec::with_capacity(HOURS);
    let mut wind_total = Vec::with_capacity(HOURS);
    let mut or_total = Vec::with_capacity(HOURS);
    for (h, ts) in index.iter().enumerate() {
        let hour = ts.time().hour() as f64;
        let daylight = 1.0 + 0.25 * ((hour - 9.0) / 24.0 * std::f64::consts::TAU).sin();
        hydro_total.push(420.0 * daylight + rng.gen_range(-15.0..15.0));
        let gust = (h as f64 / 13.0).sin() * 0.5 + 0.5;
        wind_total.push((150.0 * gust + rng.gen_range(-12.0..12.0)).clamp(0.0, 195.0));
        or_total.push(28.0 + 6.0 * ((hour - 12.0) / 24.0 * std::f64::consts::TAU).sin());
    }
    write_profile(
        &profiles.join("fuel_mix.csv"),
        &index,
        &[
            ("hydro", &hydro_total),
            ("wind", &wind_total),
            ("other_renewable", &or_total),
        ],
    );

    // Daily nuclear capacity factors broadcast to hours.
    let daily_cf = [0.98, 0.97, 0.99, 1.0, 0.96, 0.98, 0.97];
    let nuke_cf: Vec<f64> = (0..HOURS).map(|h| daily_cf[h / 24]).collect();
    write_profile(&profiles.join("nuclear_cf.csv"), &index, &[("NUKE_1", &nuke_cf)]);

    // Tie flows into the study region.
    let mut c_flow = Vec::with_capacity(HOURS);
    let mut hq_flow = Vec::with_capacity(HOURS);
    for (h, s) in shape.iter().enumerate() {
        c_flow.push(150.0 * s + 20.0 * ((h as f64 / 29.0).sin()) + rng.gen_range(-8.0..8.0));
        hq_flow.push(180.0 * s + rng.gen_range(-10.0..10.0));
    }

    // Controllable-tie schedule for the proxy added during reduction.
    let ext_dc: Vec<f64> = (0..HOURS)
        .map(|h| 60.0 + 40.0 * ((h as f64 / 17.0).sin()) + rng.gen_range(-5.0..5.0))
        .collect();
    write_profile(&profiles.join("hvdc_schedules.csv"), &index, &[("ext_dc", &ext_dc)]);

    // Fuel prices: daily schedule with a cold-snap spike on day four.
    let gas_daily = [3.2, 3.4, 3.3, 6.5, 3.6, 3.5, 3.4];
    let oil_daily = [10.5, 10.6, 10.4, 11.8, 10.9, 10.7, 10.6];
    let coal_daily = [2.1, 2.1, 2.2, 2.3, 2.2, 2.1, 2.1];
    let df_daily = [3.4, 3.6, 3.5, 6.8, 3.8, 3.7, 3.6];
    let mut prices = String::from("timestamp,fuel,price_per_mmbtu\n");
    for d in 0..7 {
        let ts = index[d * 24].format("%Y-%m-%dT%H:%M:%S");
        prices.push_str(&format!("{ts},gas,{}\n", gas_daily[d]));
        prices.push_str(&format!("{ts},oil,{}\n", oil_daily[d]));
        prices.push_str(&format!("{ts},coal,{}\n", coal_daily[d]));
        prices.push_str(&format!("{ts},dual-fuel,{}\n", df_daily[d]));
    }
    fs::write(profiles.join("fuel_prices.csv"), prices).unwrap();

    // External-area marginal prices.
    let ext_lmp: Vec<f64> = index
        .iter()
        .enumerate()
        .map(|(h, ts)| {
            let hour = ts.time().hour() as f64;
            let gas = gas_daily[h / 24];
            22.0 + 6.0 * ((hour - 16.0) / 24.0 * std::f64::consts::TAU).sin()
                + 2.5 * (gas - 3.2)
                + rng.gen_range(-1.5..1.5)
        })
        .collect();
    write_profile(&profiles.join("external_lmps.csv"), &index, &[("C", &ext_lmp)]);

    // Thermal unit records: output plus heat input around a linear curve.
    struct ThermalPlan {
        id: &'static str,
        slope: f64,
        intercept: f64,
        base: f64,
        swing: f64,
        night_off: bool,
    }
    let plans = [
        ThermalPlan { id: "GAS_5A", slope: 7.8, intercept: 12.0, base: 150.0, swing: 60.0, night_off: false },
        ThermalPlan { id: "GAS_5B", slope: 8.4, intercept: 8.0, base: 90.0, swing: 45.0, night_off: true },
        ThermalPlan { id: "GAS_6", slope: 8.0, intercept: 10.0, base: 140.0, swing: 50.0, night_off: false },
        ThermalPlan { id: "OIL_7", slope: 9.5, intercept: 6.0, base: 0.0, swing: 0.0, night_off: false },
        ThermalPlan { id: "DF_8", slope: 8.8, intercept: 9.0, base: 95.0, swing: 40.0, night_off: false },
    ];
    let mut records = String::from("timestamp,unit,heat_input,power_output\n");
    let mut thermal_outputs: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for plan in &plans {
        let mut series = Vec::with_capacity(HOURS);
        for (h, ts) in index.iter().enumerate() {
            let hour = ts.time().hour();
            let mut p = if plan.id == "OIL_7" {
                // Peaker: evening hours only.
                if (17..=21).contains(&hour) {
                    90.0 + 50.0 * shape[h] + rng.gen_range(-10.0..10.0)
                } else {
                    0.0
                }
            } else if plan.night_off && hour < 6 {
                0.0
            } else {
                plan.base + plan.swing * (shape[h] - 0.9) / 0.3 + rng.gen_range(-8.0..8.0)
            };
            p = p.max(0.0);
            let heat = if p > 0.0 {
                (plan.slope * p + plan.intercept) * (1.0 + rng.gen_range(-0.02..0.02))
            } else {
                0.0
            };
            let ts_s = ts.format("%Y-%m-%dT%H:%M:%S");
            records.push_str(&format!("{ts_s},{},{heat},{p}\n", plan.id));
            series.push(p);
        }
        thermal_outputs.insert(plan.id, series);
    }
    // A scattered turbine: few run hours, noisy heat curve, poor fit.
    {
        let mut series = vec![0.0; HOURS];
        for _ in 0..14 {
            let h = rng.gen_range(0..HOURS);
            series[h] = rng.gen_range(12.0..38.0);
        }
        for (h, &p) in series.iter().enumerate() {
            if p > 0.0 {
                let heat = (11.0 * p + 3.0) * (1.0 + rng.gen_range(-0.35..0.35));
                let ts_s = index[h].format("%Y-%m-%dT%H:%M:%S");
                records.push_str(&format!("{ts_s},CT_8,{heat},{p}\n"));
            }
        }
        thermal_outputs.insert("CT_8", series);
    }
    fs::write(profiles.join("units.csv"), records).unwrap();

    // Replicate the allocation to get a full operating point per hour, then
    // solve the week and perturb the interface flows into a "recorded"
    // series.
    let hydro_cfg = HydroConfig {
        stl_id: "STL_HYDRO".to_string(),
        rmn_id: "RMN_HYDRO".to_string(),
        stl_monthly_cf: vec![0.55, 0.55, 0.6, 0.62, 0.65, 0.6, 0.58, 0.57, 0.56, 0.55, 0.54, 0.53],
        small_share: 0.2,
    };
    let hydro_fleet: IndexMap<String, f64> = [
        ("RMN_HYDRO", 420.0),
        ("STL_HYDRO", 180.0),
        ("SM_HYDRO_A", 45.0),
        ("SM_HYDRO_B", 75.0),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let months = vec![1u32; HOURS];
    let hydro_alloc = allocate_hydro(&hydro_total, &months, &hydro_cfg, &hydro_fleet).unwrap();
    let wind_fleet: IndexMap<String, f64> = [("WIND_A", 90.0), ("WIND_B", 110.0)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let wind_alloc = allocate_proportional(&wind_total, &wind_fleet).unwrap();
    let or_fleet: IndexMap<String, f64> = [("OR_B6", 25.0), ("OR_B7", 20.0)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let or_alloc = allocate_proportional(&or_total, &or_fleet).unwrap();
    let nuke = allocate_nuclear(300.0, &nuke_cf).unwrap();

    let area = ExternalArea {
        label: "C".to_string(),
        buses: vec![BusId(9), BusId(10), BusId(11), BusId(12)],
        baseline_load: vec![
            (BusId(9), 40.0),
            (BusId(10), 50.0),
            (BusId(11), 170.0),
            (BusId(12), 150.0),
        ],
        baseline_gen: vec![("EXT_C1".to_string(), 320.0), ("EXT_C2".to_string(), 280.0)],
        tie_flow_column: "c_flow".to_string(),
    };

    // Per-hour operating point: bus loads and unit outputs, reused for the
    // recorded-flow series and the reference-price run.
    let zone_a_buses = [BusId(1), BusId(2), BusId(3), BusId(4)];
    let zone_b_buses = [BusId(5), BusId(6), BusId(7), BusId(8)];
    let baseline: BTreeMap<BusId, f64> = net
        .buses()
        .iter()
        .map(|b| (b.id, b.base_load))
        .collect();

    let mut loads_by_bus: BTreeMap<BusId, Vec<f64>> = net
        .buses()
        .iter()
        .map(|b| (b.id, Vec::with_capacity(HOURS)))
        .collect();
    let mut outputs_by_unit: BTreeMap<String, Vec<f64>> = net
        .generators()
        .iter()
        .map(|g| (g.id.clone(), Vec::with_capacity(HOURS)))
        .collect();
    for t in 0..HOURS {
        for (bus, mw) in allocate_zone_load(zone_a[t], &zone_a_buses, &baseline).unwrap() {
            loads_by_bus.get_mut(&bus).unwrap().push(mw);
        }
        for (bus, mw) in allocate_zone_load(zone_b[t], &zone_b_buses, &baseline).unwrap() {
            loads_by_bus.get_mut(&bus).unwrap().push(mw);
        }
        let rebalanced = rebalance_external(&area, zone_c[t], c_flow[t]).unwrap();
        for (bus, mw) in &rebalanced.loads {
            loads_by_bus.get_mut(bus).unwrap().push(*mw);
        }
        for (id, mw) in &rebalanced.outputs {
            outputs_by_unit.get_mut(id).unwrap().push(*mw);
        }
        for (id, series) in &hydro_alloc.outputs {
            outputs_by_unit.get_mut(id).unwrap().push(series[t]);
        }
        for (id, series) in wind_alloc.iter().chain(or_alloc.iter()) {
            outputs_by_unit.get_mut(id).unwrap().push(series[t]);
        }
        outputs_by_unit.get_mut("NUKE_1").unwrap().push(nuke[t]);
        outputs_by_unit.get_mut("HQ_IMPORT").unwrap().push(hq_flow[t]);
        for (id, series) in &thermal_outputs {
            outputs_by_unit
                .get_mut(*id)
                .unwrap()
                .push(series[t] * THERMAL_B_SCALE);
        }
    }

    // Recorded interface flows: the full-network power flow plus noise.
    let solver = DcSolver::new(&net).expect("fixture network solves");
    let mut recorded: IndexMap<String, Vec<f64>> = interfaces
        .iter()
        .map(|i| (i.name.clone(), Vec::with_capacity(HOURS)))
        .collect();
    for t in 0..HOURS {
        let mut inj = vec![0.0; net.buses().len()];
        for (bus, series) in &loads_by_bus {
            inj[net.bus_position(*bus).unwrap()] -= series[t];
        }
        for (id, series) in &outputs_by_unit {
            let gen = net.generator(id).unwrap();
            inj[net.bus_position(gen.bus).unwrap()] += series[t];
        }
        let sol = solver.solve(&inj, &BTreeMap::new()).expect("fixture hour solves");
        for iface in &interfaces {
            let sim = interface_flow(&net, &sol, iface);
            let noise = rng.gen_range(-0.025..0.025) * iface.limit_pos;
            recorded.get_mut(&iface.name).unwrap().push(sim + noise);
        }
    }

    let mut iface_cols: Vec<(&str, &[f64])> = vec![("c_flow", &c_flow), ("hq_flow", &hq_flow)];
    for (name, series) in &recorded {
        iface_cols.push((name.as_str(), series.as_slice()));
    }
    write_profile(&profiles.join("interface_flows.csv"), &index, &iface_cols);

    // Reference zonal prices: solve the same week on the reduced network
    // with the true heat rates (the pipeline re-fits them from noisy
    // records), then perturb, inject one data glitch and a handful of
    // off-band points.
    let reduced_base = remove_branches(&net, &[BranchId(3)]).unwrap();
    let baseline_inj: Vec<f64> = reduced_base
        .buses()
        .iter()
        .map(|b| {
            let mut v = -loads_by_bus[&b.id][0];
            for gen in reduced_base.generators() {
                if gen.bus == b.id {
                    v += outputs_by_unit[&gen.id][0];
                }
            }
            v
        })
        .collect();
    let spec = ReductionSpec::new((1..=10).map(BusId));
    let reduced = ward_reduce(&reduced_base, &baseline_inj, &spec).unwrap();
    let mut opf_net =
        add_line_estimated(&reduced.network, BusId(4), BusId(6), 90.0, 345.0, 0.4, 1.5).unwrap();
    opf_net = add_hvdc_proxy(&opf_net, BusId(9), BusId(7), "ext_dc", 150.0).unwrap();

    let cost_units: Vec<(String, Fuel)> = net
        .generators()
        .iter()
        .map(|g| (g.id.clone(), g.fuel))
        .collect();
    let seeded_costs = assign_random_costs(&cost_units, 42);
    let true_slopes: BTreeMap<&str, f64> = [
        ("GAS_5A", 7.8),
        ("GAS_5B", 8.4),
        ("GAS_6", 8.0),
        ("OIL_7", 9.5),
        ("DF_8", 8.8),
        ("CT_8", 11.0),
    ]
    .into_iter()
    .collect();
    let price_of = |fuel: Fuel, h: usize| -> f64 {
        match fuel {
            Fuel::Gas => gas_daily[h / 24],
            Fuel::Oil => oil_daily[h / 24],
            Fuel::Coal => coal_daily[h / 24],
            Fuel::DualFuel => df_daily[h / 24],
            _ => 0.0,
        }
    };

    let hours_inputs: Vec<HourInputs> = (0..HOURS)
        .map(|t| {
            let mut hour = HourInputs::default();
            for bus in opf_net.buses() {
                hour.loads.push((bus.id, loads_by_bus[&bus.id][t]));
            }
            let elim_inj: Vec<f64> = reduced
                .ward
                .eliminated
                .iter()
                .map(|bus| -loads_by_bus[bus][t])
                .collect();
            for (i, bus) in reduced.ward.retained.iter().enumerate() {
                let v = reduced.ward.boundary_for(&elim_inj)[i];
                if v != 0.0 {
                    hour.extra_injections.push((*bus, v));
                }
            }
            for gen in opf_net.generators() {
                let series = &outputs_by_unit[&gen.id];
                if !gen.dispatchable {
                    hour.fixed_outputs.push((gen.id.clone(), series[t]));
                    continue;
                }
                match gen.fuel {
                    Fuel::Hydro | Fuel::Nuclear => {
                        let hi = series[t].clamp(0.0, gen.p_max);
                        hour.availability.push((gen.id.clone(), 0.0, hi));
                        hour.marginal_costs
                            .push((gen.id.clone(), seeded_costs[&gen.id]));
                    }
                    Fuel::ExternalEquivalent => {
                        hour.marginal_costs.push((gen.id.clone(), ext_lmp[t]));
                    }
                    _ => {
                        let slope = true_slopes[gen.id.as_str()];
                        hour.marginal_costs
                            .push((gen.id.clone(), slope * price_of(gen.fuel, t)));
                    }
                }
            }
            hour
        })
        .collect();
    let truth_run = hourly_opf_run(&opf_net, &interfaces, &index, &hours_inputs, 1.0, false)
        .expect("reference opf run");
    assert!(
        truth_run.failures.is_empty(),
        "reference run has infeasible hours: {:?}",
        truth_run.failures
    );

    let mut real_a = Vec::with_capacity(HOURS);
    let mut real_b = Vec::with_capacity(HOURS);
    let mut real_c = Vec::with_capacity(HOURS);
    for sol in truth_run.solutions.iter().map(|s| s.as_ref().unwrap()) {
        real_a.push(sol.zonal_lmp["A"] + rng.gen_range(-2.0..2.0));
        real_b.push(sol.zonal_lmp["B"] + rng.gen_range(-2.5..2.5));
        real_c.push(sol.zonal_lmp["C"] + rng.gen_range(-2.0..2.0));
    }
    real_b[90] = -1300.0; // data glitch for the extreme-value filter
    for k in 0..8 {
        let h = 20 + k * 17;
        real_b[h] += 45.0; // band outliers
    }
    write_profile(
        &profiles.join("real_lmps.csv"),
        &index,
        &[("A", &real_a), ("B", &real_b), ("C", &real_c)],
    );

    // Config files.
    fs::write(
        root.join("alloc.toml"),
        r#"seed = 42

[hydro]
stl_id = "STL_HYDRO"
rmn_id = "RMN_HYDRO"
stl_monthly_cf = [0.55, 0.55, 0.6, 0.62, 0.65, 0.6, 0.58, 0.57, 0.56, 0.55, 0.54, 0.53]
small_share = 0.2

[[external]]
label = "C"
buses = [9, 10, 11, 12]
load_column = "C"
tie_flow_column = "c_flow"
baseline_gen = { EXT_C1 = 320.0, EXT_C2 = 280.0 }

[thermal_zone_scale]
B = 1.03

[import_proxy]
unit = "HQ_IMPORT"
tie_flow_column = "hq_flow"
"#,
    )
    .unwrap();

    fs::write(
        root.join("reduce.toml"),
        r#"retained = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
notes = "study zones A and B plus the external boundary buses"
baseline_hour = 0

[[remove]]
branch = 3

[[add_line]]
from = 4
to = 6
length_miles = 90.0
kv = 345.0
per_mile_x = 0.4
detour = 1.5

[[hvdc]]
from = 9
to = 7
name = "ext_dc"
limit = 150.0
"#,
    )
    .unwrap();

    fs::write(
        root.join("validate.toml"),
        r#"band = 30.0

[zones.B]
max_abs = 400.0

[[seasons]]
name = "week1"
ranges = [["2019-01-01", "2019-01-07"]]
"#,
    )
    .unwrap();

    fs::write(
        root.join("heat_rates.csv"),
        "unit_type,fuel,heat_rate_mmbtu_per_mwh\n\
         combustion-turbine,gas,11.5\n\
         steam,oil,12.8\n",
    )
    .unwrap();
    fs::write(
        root.join("small_units.csv"),
        "unit,unit_type,fuel,nameplate\nPEAK_X,combustion-turbine,gas,22\n",
    )
    .unwrap();

    println!("fixture written to {}", root.display());
}
