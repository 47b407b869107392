//! Hourly DC optimal power flow: least-cost dispatch under network, branch,
//! interface and generator limits, with nodal LMPs from the balance-row
//! duals and load-weighted zonal aggregation.
//!
//! The LP is solved by the deterministic bounded simplex in [`crate::lp`];
//! hours flagged as degenerate carry non-unique duals and should be excluded
//! from price comparisons rather than trusted.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDateTime;
use indexmap::IndexMap;
use rayon::prelude::*;
use thiserror::Error;

use crate::lp::{Certificate, LinearProgram, LpError, Relation, VarId};
use crate::model::{BranchId, BranchKind, BusId, Interface, Network, Violation};

/// Optimality certificate bound enforced on every solve.
pub const CERTIFICATE_TOL: f64 = 1e-7;
/// Constraints within this of a limit are reported as binding.
pub const BINDING_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum OpfError {
    #[error("network fails validation: {}", join(.0))]
    InvalidNetwork(Vec<Violation>),
    #[error("infeasible: conflicting constraints: {}", .conflicts.join(", "))]
    Infeasible { conflicts: Vec<String> },
    #[error("unbounded problem; generator bounds should preclude this: {0}")]
    Unbounded(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("unknown bus {0}")]
    UnknownBus(BusId),
    #[error("negative load {1} at bus {0}; net non-dispatchable output through fixed_outputs")]
    NegativeLoad(BusId, f64),
    #[error("scale must be positive, got {0}")]
    BadScale(f64),
    #[error("optimality certificate {0:?} exceeds {CERTIFICATE_TOL}")]
    CertificateOutOfTolerance(Certificate),
    #[error("lp failure: {0}")]
    Lp(String),
    #[error("no hours could be solved")]
    NoSolvableHours,
}

fn join(vs: &[Violation]) -> String {
    vs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// One hour's OPF problem over a validated network.
#[derive(Debug, Clone)]
pub struct OpfProblem<'a> {
    pub network: &'a Network,
    pub interfaces: &'a [Interface],
    /// Per-bus load in MW; absent buses carry zero.
    pub loads: BTreeMap<BusId, f64>,
    /// Pinned unit outputs: non-dispatchable units are netted from their
    /// bus balance, dispatchable units get their variable fixed.
    pub fixed_outputs: BTreeMap<String, f64>,
    /// Per-unit `(p_min, p_max)` for this hour, overriding the case values
    /// (e.g. allocated hydro energy as available capacity).
    pub availability: BTreeMap<String, (f64, f64)>,
    /// Units switched off this hour.
    pub unavailable: BTreeSet<String>,
    /// Per-unit marginal-cost override in $/MWh (e.g. fitted heat rate
    /// times this hour's fuel price, or a recorded external LMP).
    pub marginal_costs: BTreeMap<String, f64>,
    /// Interface limits `(neg, pos)` replacing the case values this hour.
    pub interface_limits: BTreeMap<String, (f64, f64)>,
    /// Additional fixed injections (boundary injections of a reduction).
    pub extra_injections: BTreeMap<BusId, f64>,
    /// Uniform multiplier on every marginal cost.
    pub scale: f64,
}

impl<'a> OpfProblem<'a> {
    pub fn new(network: &'a Network, interfaces: &'a [Interface]) -> Self {
        OpfProblem {
            network,
            interfaces,
            loads: BTreeMap::new(),
            fixed_outputs: BTreeMap::new(),
            availability: BTreeMap::new(),
            unavailable: BTreeSet::new(),
            marginal_costs: BTreeMap::new(),
            interface_limits: BTreeMap::new(),
            extra_injections: BTreeMap::new(),
            scale: 1.0,
        }
    }
}

/// A constraint sitting at one of its limits in the optimum.
#[derive(Debug, Clone, PartialEq)]
pub enum BindingConstraint {
    Generator { id: String, at_upper: bool },
    Branch { id: BranchId, at_upper: bool },
    Interface { name: String, at_upper: bool },
}

#[derive(Debug, Clone)]
pub struct OpfSolution {
    /// Output of every modeled unit in MW, including pinned and netted
    /// units, in network generator order.
    pub dispatch: IndexMap<String, f64>,
    /// Bus angles in radians (network bus order, slack zero).
    pub angles: Vec<f64>,
    /// Branch flows in MW (network branch order); hvdc proxies carry their
    /// optimized flow.
    pub flows: Vec<f64>,
    /// Nodal LMP in $/MWh per bus: the dual of that bus's balance row, the
    /// cost of serving one extra MW of load there.
    pub nodal_lmp: Vec<f64>,
    /// Load-weighted zonal LMPs.
    pub zonal_lmp: BTreeMap<String, f64>,
    /// Dispatch cost in $/h (marginal terms only).
    pub objective: f64,
    pub binding: Vec<BindingConstraint>,
    /// Primal-degenerate optimum: the duals (LMPs) may be non-unique and
    /// price comparisons for this hour are unreliable.
    pub degenerate: bool,
    pub certificate: Certificate,
    /// Notes such as zero-load zonal fallbacks.
    pub diagnostics: Vec<String>,
}

struct GenVar {
    gen_pos: usize,
    var: VarId,
}

/// Solves one DC-OPF. Minimizes total marginal cost subject to nodal
/// balance, branch and interface limits, generator bounds, and bounded
/// hvdc proxy flows.
pub fn solve_dcopf(prob: &OpfProblem) -> Result<OpfSolution, OpfError> {
    let net = prob.network;
    let violations = net.validate();
    if !violations.is_empty() {
        return Err(OpfError::InvalidNetwork(violations));
    }
    if prob.scale <= 0.0 || prob.scale.is_nan() {
        return Err(OpfError::BadScale(prob.scale));
    }
    for id in prob
        .fixed_outputs
        .keys()
        .chain(prob.availability.keys())
        .chain(prob.marginal_costs.keys())
        .chain(prob.unavailable.iter())
    {
        if net.generator(id).is_none() {
            return Err(OpfError::UnknownGenerator(id.clone()));
        }
    }
    for bus in prob.loads.keys().chain(prob.extra_injections.keys()) {
        if net.bus(*bus).is_none() {
            return Err(OpfError::UnknownBus(*bus));
        }
    }

    let n = net.buses().len();
    let base = net.base_mva();
    let slack_pos = net
        .bus_position(net.slack().expect("validated").id)
        .unwrap();

    let mut lp = LinearProgram::new();

    // Angle variables for every bus but the slack.
    let mut theta: Vec<Option<VarId>> = vec![None; n];
    for (pos, bus) in net.buses().iter().enumerate() {
        if pos != slack_pos {
            theta[pos] = Some(lp.add_variable(
                format!("theta({})", bus.id),
                0.0,
                f64::NEG_INFINITY,
                f64::INFINITY,
            ));
        }
    }

    // Generator variables; non-dispatchable output nets into the balance
    // right-hand side instead.
    let mut gen_vars: Vec<GenVar> = Vec::new();
    let mut netted: Vec<(usize, f64)> = Vec::new();
    for (gen_pos, gen) in net.generators().iter().enumerate() {
        if prob.unavailable.contains(&gen.id) {
            continue;
        }
        if !gen.dispatchable {
            let output = prob.fixed_outputs.get(&gen.id).copied().unwrap_or(0.0);
            netted.push((gen_pos, output));
            continue;
        }
        let (mut lo, mut hi) = prob
            .availability
            .get(&gen.id)
            .copied()
            .unwrap_or((gen.p_min, gen.p_max));
        if let Some(&pinned) = prob.fixed_outputs.get(&gen.id) {
            lo = pinned;
            hi = pinned;
        }
        // Keep hourly bounds ordered even when available energy dips below
        // the nominal minimum.
        if lo > hi {
            lo = hi;
        }
        let c1 = prob
            .marginal_costs
            .get(&gen.id)
            .copied()
            .unwrap_or(gen.cost.c1);
        let var = lp.add_variable(format!("gen({})", gen.id), c1 * prob.scale, lo, hi);
        gen_vars.push(GenVar { gen_pos, var });
    }

    // Bounded flow variable per in-service hvdc proxy.
    let mut hvdc_vars: Vec<(usize, VarId)> = Vec::new();
    for (bpos, br) in net.branches().iter().enumerate() {
        if br.kind == BranchKind::HvdcProxy && br.is_in_service() {
            let limit = br.rating;
            let var = lp.add_variable(
                format!("hvdc({})", br.name.clone().unwrap_or_else(|| br.id.to_string())),
                0.0,
                -limit,
                limit,
            );
            hvdc_vars.push((bpos, var));
        }
    }

    // Nodal balance rows: generation + proxy inflow - branch outflow = load.
    let mut balance_terms: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); n];
    let mut balance_rhs: Vec<f64> = vec![0.0; n];
    for (pos, bus) in net.buses().iter().enumerate() {
        let load = prob.loads.get(&bus.id).copied().unwrap_or(0.0);
        if load < 0.0 {
            return Err(OpfError::NegativeLoad(bus.id, load));
        }
        balance_rhs[pos] = load;
        if let Some(&extra) = prob.extra_injections.get(&bus.id) {
            balance_rhs[pos] -= extra;
        }
    }
    for (gen_pos, output) in &netted {
        let pos = net
            .bus_position(net.generators()[*gen_pos].bus)
            .ok_or(OpfError::UnknownBus(net.generators()[*gen_pos].bus))?;
        balance_rhs[pos] -= output;
    }
    for gv in &gen_vars {
        let pos = net.bus_position(net.generators()[gv.gen_pos].bus).unwrap();
        balance_terms[pos].push((gv.var, 1.0));
    }
    for (bpos, var) in &hvdc_vars {
        let br = &net.branches()[*bpos];
        let from = net.bus_position(br.from_bus).unwrap();
        let to = net.bus_position(br.to_bus).unwrap();
        balance_terms[from].push((*var, -1.0));
        balance_terms[to].push((*var, 1.0));
    }
    for br in net.branches() {
        if !br.carries_impedance() {
            continue;
        }
        let from = net.bus_position(br.from_bus).unwrap();
        let to = net.bus_position(br.to_bus).unwrap();
        let coeff = base * br.susceptance();
        // Flow from->to = coeff * (theta_from - theta_to) leaves `from`
        // and arrives at `to`.
        if let Some(v) = theta[from] {
            balance_terms[from].push((v, -coeff));
            balance_terms[to].push((v, coeff));
        }
        if let Some(v) = theta[to] {
            balance_terms[from].push((v, coeff));
            balance_terms[to].push((v, -coeff));
        }
    }

    let mut balance_rows = Vec::with_capacity(n);
    for (pos, bus) in net.buses().iter().enumerate() {
        let row = lp.add_constraint(
            format!("balance(bus {})", bus.id),
            &balance_terms[pos],
            Relation::Eq(balance_rhs[pos]),
        );
        balance_rows.push(row);
    }

    // Branch flow limits on rated impedance branches.
    let flow_terms = |br: &crate::model::Branch| -> Vec<(VarId, f64)> {
        let from = net.bus_position(br.from_bus).unwrap();
        let to = net.bus_position(br.to_bus).unwrap();
        let coeff = base * br.susceptance();
        let mut terms = Vec::new();
        if let Some(v) = theta[from] {
            terms.push((v, coeff));
        }
        if let Some(v) = theta[to] {
            terms.push((v, -coeff));
        }
        terms
    };
    for br in net.branches() {
        if !br.carries_impedance() || !br.rating.is_finite() {
            continue;
        }
        lp.add_constraint(
            format!("branch({})", br.id),
            &flow_terms(br),
            Relation::Range(-br.rating, br.rating),
        );
    }

    // Interface limits over signed member flows.
    for iface in prob.interfaces {
        let (neg, pos_limit) = prob
            .interface_limits
            .get(&iface.name)
            .copied()
            .unwrap_or((iface.limit_neg, iface.limit_pos));
        let mut terms: Vec<(VarId, f64)> = Vec::new();
        for (bid, sign) in &iface.members {
            let Some(bpos) = net.branch_position(*bid) else {
                continue;
            };
            let br = &net.branches()[bpos];
            if !br.is_in_service() {
                continue;
            }
            let s = f64::from(*sign);
            if br.kind == BranchKind::HvdcProxy {
                if let Some((_, var)) = hvdc_vars.iter().find(|(p, _)| *p == bpos) {
                    terms.push((*var, s));
                }
            } else {
                for (v, c) in flow_terms(br) {
                    terms.push((v, s * c));
                }
            }
        }
        if terms.is_empty() {
            continue;
        }
        let label = format!("interface({})", iface.name);
        match (neg.is_finite(), pos_limit.is_finite()) {
            (true, true) => {
                lp.add_constraint(label, &terms, Relation::Range(neg, pos_limit));
            }
            (true, false) => {
                lp.add_constraint(label, &terms, Relation::Ge(neg));
            }
            (false, true) => {
                lp.add_constraint(label, &terms, Relation::Le(pos_limit));
            }
            (false, false) => {}
        }
    }

    let sol = lp.solve().map_err(|e| match e {
        LpError::Infeasible { conflicts } => OpfError::Infeasible { conflicts },
        LpError::Unbounded { variable } => OpfError::Unbounded(variable),
        other => OpfError::Lp(other.to_string()),
    })?;
    if !sol.certificate.within(CERTIFICATE_TOL) {
        return Err(OpfError::CertificateOutOfTolerance(sol.certificate));
    }

    // Assemble outputs in network order.
    let mut angles = vec![0.0; n];
    for (pos, v) in theta.iter().enumerate() {
        if let Some(v) = v {
            angles[pos] = sol.value(*v);
        }
    }

    let mut dispatch: IndexMap<String, f64> = IndexMap::new();
    for (gen_pos, gen) in net.generators().iter().enumerate() {
        if prob.unavailable.contains(&gen.id) {
            continue;
        }
        if let Some(gv) = gen_vars.iter().find(|gv| gv.gen_pos == gen_pos) {
            dispatch.insert(gen.id.clone(), sol.value(gv.var));
        } else if let Some((_, output)) = netted.iter().find(|(p, _)| *p == gen_pos) {
            dispatch.insert(gen.id.clone(), *output);
        }
    }

    let flows: Vec<f64> = net
        .branches()
        .iter()
        .enumerate()
        .map(|(bpos, br)| {
            if !br.is_in_service() {
                return 0.0;
            }
            if br.kind == BranchKind::HvdcProxy {
                return hvdc_vars
                    .iter()
                    .find(|(p, _)| *p == bpos)
                    .map(|(_, v)| sol.value(*v))
                    .unwrap_or(0.0);
            }
            let from = net.bus_position(br.from_bus).unwrap();
            let to = net.bus_position(br.to_bus).unwrap();
            base * br.susceptance() * (angles[from] - angles[to])
        })
        .collect();

    let nodal_lmp: Vec<f64> = balance_rows.iter().map(|r| sol.dual(*r)).collect();

    let mut diagnostics = Vec::new();
    let zonal_lmp = zonal_lmp_with_diagnostics(net, &nodal_lmp, &prob.loads, &mut diagnostics);

    // Binding limits.
    let mut binding = Vec::new();
    for (gen_pos, gen) in net.generators().iter().enumerate() {
        let Some(gv) = gen_vars.iter().find(|gv| gv.gen_pos == gen_pos) else {
            continue;
        };
        let (lo, hi) = prob
            .availability
            .get(&gen.id)
            .copied()
            .unwrap_or((gen.p_min, gen.p_max));
        let v = sol.value(gv.var);
        let span = (hi - lo).abs();
        if span > BINDING_TOL {
            if (v - hi).abs() <= BINDING_TOL * span.max(1.0) {
                binding.push(BindingConstraint::Generator {
                    id: gen.id.clone(),
                    at_upper: true,
                });
            } else if (v - lo).abs() <= BINDING_TOL * span.max(1.0) && lo > 0.0 {
                binding.push(BindingConstraint::Generator {
                    id: gen.id.clone(),
                    at_upper: false,
                });
            }
        }
    }
    for (bpos, br) in net.branches().iter().enumerate() {
        if !br.is_in_service() || !br.rating.is_finite() {
            continue;
        }
        let f = flows[bpos];
        if (f - br.rating).abs() <= BINDING_TOL * br.rating.max(1.0) {
            binding.push(BindingConstraint::Branch {
                id: br.id,
                at_upper: true,
            });
        } else if (f + br.rating).abs() <= BINDING_TOL * br.rating.max(1.0) {
            binding.push(BindingConstraint::Branch {
                id: br.id,
                at_upper: false,
            });
        }
    }
    for iface in prob.interfaces {
        let (neg, pos_limit) = prob
            .interface_limits
            .get(&iface.name)
            .copied()
            .unwrap_or((iface.limit_neg, iface.limit_pos));
        let total: f64 = iface
            .members
            .iter()
            .filter_map(|(bid, sign)| {
                net.branch_position(*bid)
                    .map(|bpos| f64::from(*sign) * flows[bpos])
            })
            .sum();
        if pos_limit.is_finite() && (total - pos_limit).abs() <= BINDING_TOL * pos_limit.max(1.0) {
            binding.push(BindingConstraint::Interface {
                name: iface.name.clone(),
                at_upper: true,
            });
        } else if neg.is_finite() && (total - neg).abs() <= BINDING_TOL * neg.abs().max(1.0) {
            binding.push(BindingConstraint::Interface {
                name: iface.name.clone(),
                at_upper: false,
            });
        }
    }

    Ok(OpfSolution {
        dispatch,
        angles,
        flows,
        nodal_lmp,
        zonal_lmp,
        objective: sol.objective,
        binding,
        degenerate: sol.primal_degenerate,
        certificate: sol.certificate,
        diagnostics,
    })
}

/// Load-weighted average of nodal LMPs per zone. Zones with zero load fall
/// back to the unweighted mean with a diagnostic.
pub fn zonal_lmp(
    net: &Network,
    nodal_lmp: &[f64],
    loads: &BTreeMap<BusId, f64>,
) -> (BTreeMap<String, f64>, Vec<String>) {
    let mut diagnostics = Vec::new();
    let map = zonal_lmp_with_diagnostics(net, nodal_lmp, loads, &mut diagnostics);
    (map, diagnostics)
}

fn zonal_lmp_with_diagnostics(
    net: &Network,
    nodal_lmp: &[f64],
    loads: &BTreeMap<BusId, f64>,
    diagnostics: &mut Vec<String>,
) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<&str, (f64, f64, f64, usize)> = BTreeMap::new();
    for (pos, bus) in net.buses().iter().enumerate() {
        let load = loads.get(&bus.id).copied().unwrap_or(0.0);
        let e = acc.entry(bus.zone.as_str()).or_insert((0.0, 0.0, 0.0, 0));
        e.0 += load * nodal_lmp[pos];
        e.1 += load;
        e.2 += nodal_lmp[pos];
        e.3 += 1;
    }
    let mut out = BTreeMap::new();
    for (zone, (weighted, load_sum, plain_sum, count)) in acc {
        if load_sum > 0.0 {
            out.insert(zone.to_string(), weighted / load_sum);
        } else {
            diagnostics.push(format!(
                "zone {zone} has zero load; zonal LMP is the unweighted mean"
            ));
            out.insert(zone.to_string(), plain_sum / count as f64);
        }
    }
    out
}

/// One hour's worth of assembled inputs for [`hourly_opf_run`].
#[derive(Debug, Clone, Default)]
pub struct HourInputs {
    pub loads: Vec<(BusId, f64)>,
    pub fixed_outputs: Vec<(String, f64)>,
    pub availability: Vec<(String, f64, f64)>,
    pub marginal_costs: Vec<(String, f64)>,
    pub extra_injections: Vec<(BusId, f64)>,
    /// Interface limit overrides `(name, (neg, pos))` for this hour.
    pub interface_limits: Vec<(String, (f64, f64))>,
}

/// Result of an hourly run: per-hour solutions in input order, with
/// infeasible hours logged rather than fatal.
#[derive(Debug)]
pub struct OpfRunResult {
    pub timestamps: Vec<NaiveDateTime>,
    pub solutions: Vec<Option<OpfSolution>>,
    pub failures: Vec<(usize, String)>,
}

/// Solves a sequence of hourly problems.
///
/// In the default unlinked mode hours are independent and solve in
/// parallel; results are ordered by hour regardless of completion order.
/// With `linked_ramp` the hours solve sequentially and each dispatchable
/// unit's bounds are tightened to within its hourly ramp of the previous
/// hour's output.
pub fn hourly_opf_run(
    net: &Network,
    interfaces: &[Interface],
    timestamps: &[NaiveDateTime],
    hours: &[HourInputs],
    scale: f64,
    linked_ramp: bool,
) -> Result<OpfRunResult, OpfError> {
    assert_eq!(timestamps.len(), hours.len());
    let build = |inputs: &HourInputs| -> OpfProblem<'_> {
        let mut prob = OpfProblem::new(net, interfaces);
        prob.loads = inputs.loads.iter().cloned().collect();
        prob.fixed_outputs = inputs.fixed_outputs.iter().cloned().collect();
        prob.availability = inputs
            .availability
            .iter()
            .map(|(id, lo, hi)| (id.clone(), (*lo, *hi)))
            .collect();
        prob.marginal_costs = inputs.marginal_costs.iter().cloned().collect();
        prob.extra_injections = inputs.extra_injections.iter().cloned().collect();
        prob.interface_limits = inputs.interface_limits.iter().cloned().collect();
        prob.scale = scale;
        prob
    };

    let results: Vec<Result<OpfSolution, OpfError>> = if linked_ramp {
        let mut out = Vec::with_capacity(hours.len());
        let mut previous: Option<IndexMap<String, f64>> = None;
        for inputs in hours {
            let mut prob = build(inputs);
            if let Some(prev) = &previous {
                for gen in net.generators() {
                    if !gen.dispatchable || prob.fixed_outputs.contains_key(&gen.id) {
                        continue;
                    }
                    let Some(&p0) = prev.get(&gen.id) else {
                        continue;
                    };
                    let (lo, hi) = prob
                        .availability
                        .get(&gen.id)
                        .copied()
                        .unwrap_or((gen.p_min, gen.p_max));
                    let lo = lo.max(p0 - gen.ramp_hourly);
                    let hi = hi.min(p0 + gen.ramp_hourly);
                    prob.availability
                        .insert(gen.id.clone(), (lo.min(hi), hi));
                }
            }
            let result = solve_dcopf(&prob);
            if let Ok(sol) = &result {
                previous = Some(sol.dispatch.clone());
            }
            out.push(result);
        }
        out
    } else {
        hours
            .par_iter()
            .map(|inputs| solve_dcopf(&build(inputs)))
            .collect()
    };

    let mut solutions = Vec::with_capacity(hours.len());
    let mut failures = Vec::new();
    for (i, result) in results.into_iter().enumerate() {
        match result {
            Ok(sol) => solutions.push(Some(sol)),
            Err(e) => {
                failures.push((i, e.to_string()));
                solutions.push(None);
            }
        }
    }
    if solutions.iter().all(|s| s.is_none()) && !hours.is_empty() {
        return Err(OpfError::NoSolvableHours);
    }
    Ok(OpfRunResult {
        timestamps: timestamps.to_vec(),
        solutions,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        Branch, BranchStatus, Bus, BusKind, CostCurve, Fuel, Generator,
    };
    use crate::testgen;
    use rand::{Rng, SeedableRng};

    fn bus(id: u32, zone: &str, kind: BusKind) -> Bus {
        Bus {
            id: BusId(id),
            zone: zone.into(),
            kind,
            base_load: 0.0,
            latitude: None,
            longitude: None,
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

    fn gen(id: &str, bus: u32, c1: f64, p_max: f64) -> Generator {
        Generator {
            id: id.into(),
            bus: BusId(bus),
            fuel: Fuel::Gas,
            p_max,
            p_min: 0.0,
            ramp_hourly: p_max,
            cost: CostCurve { c1, c0: 0.0 },
            dispatchable: true,
        }
    }

    fn two_bus_case(limit: f64) -> (Network, Vec<Interface>) {
        let net = Network::new(
            100.0,
            vec![bus(1, "A", BusKind::Slack), bus(2, "B", BusKind::Pq)],
            vec![line(1, 1, 2, 0.1, limit)],
            vec![gen("A1", 1, 10.0, 500.0), gen("B1", 2, 30.0, 500.0)],
        );
        (net, vec![])
    }

    #[test]
    fn congested_two_bus_matches_hand_kkt() {
        let (net, interfaces) = two_bus_case(50.0);
        let mut prob = OpfProblem::new(&net, &interfaces);
        prob.loads.insert(BusId(2), 100.0);
        let sol = solve_dcopf(&prob).unwrap();
        assert!((sol.dispatch["A1"] - 50.0).abs() < 1e-7);
        assert!((sol.dispatch["B1"] - 50.0).abs() < 1e-7);
        assert!((sol.objective - 2000.0).abs() < 1e-6);
        assert!((sol.nodal_lmp[0] - 10.0).abs() < 1e-7);
        assert!((sol.nodal_lmp[1] - 30.0).abs() < 1e-7);
        assert!(sol
            .binding
            .iter()
            .any(|b| matches!(b, BindingConstraint::Branch { id: BranchId(1), at_upper: true })));
        assert!(sol.certificate.within(1e-7));
    }

    #[test]
    fn single_bus_marginal_unit_sets_price() {
        let net = Network::new(
            100.0,
            vec![bus(1, "A", BusKind::Slack)],
            vec![],
            vec![gen("G", 1, 20.0, 200.0)],
        );
        let mut prob = OpfProblem::new(&net, &[]);
        prob.loads.insert(BusId(1), 70.0);
        let sol = solve_dcopf(&prob).unwrap();
        assert!((sol.dispatch["G"] - 70.0).abs() < 1e-9);
        assert!((sol.nodal_lmp[0] - 20.0).abs() < 1e-9);
        assert!((sol.zonal_lmp["A"] - 20.0).abs() < 1e-9);
    }

    #[test]
    fn uncongested_case_prices_uniformly() {
        let (net, interfaces) = two_bus_case(200.0);
        let mut prob = OpfProblem::new(&net, &interfaces);
        prob.loads.insert(BusId(2), 100.0);
        let sol = solve_dcopf(&prob).unwrap();
        assert!((sol.dispatch["A1"] - 100.0).abs() < 1e-7);
        assert!((sol.dispatch["B1"] - 0.0).abs() < 1e-7);
        assert!((sol.nodal_lmp[0] - 10.0).abs() < 1e-7);
        assert!((sol.nodal_lmp[1] - 10.0).abs() < 1e-7);
    }

    #[test]
    fn zonal_lmp_weighted_mean_and_fallback() {
        let net = Network::new(
            100.0,
            vec![
                bus(1, "A", BusKind::Slack),
                bus(2, "A", BusKind::Pq),
                bus(3, "B", BusKind::Pq),
            ],
            vec![line(1, 1, 2, 0.1, f64::INFINITY), line(2, 2, 3, 0.1, f64::INFINITY)],
            vec![],
        );
        let loads = BTreeMap::from([(BusId(1), 100.0), (BusId(2), 300.0)]);
        let (zonal, diags) = zonal_lmp(&net, &[10.0, 20.0, 42.0], &loads);
        assert!((zonal["A"] - 17.5).abs() < 1e-12);
        // Zone B has no load: unweighted mean with a diagnostic.
        assert!((zonal["B"] - 42.0).abs() < 1e-12);
        assert!(diags.iter().any(|d| d.contains("zone B")));
    }

    #[test]
    fn zonal_lmp_matches_direct_oracle() {
        let net = Network::new(
            100.0,
            vec![
                bus(1, "Z", BusKind::Slack),
                bus(2, "Z", BusKind::Pq),
                bus(3, "Z", BusKind::Pq),
                bus(4, "Z", BusKind::Pq),
            ],
            vec![
                line(1, 1, 2, 0.1, f64::INFINITY),
                line(2, 2, 3, 0.1, f64::INFINITY),
                line(3, 3, 4, 0.1, f64::INFINITY),
            ],
            vec![],
        );
        let lmps = [13.5, 17.25, 9.75, 21.0];
        let loads = BTreeMap::from([
            (BusId(1), 120.0),
            (BusId(2), 45.0),
            (BusId(3), 310.0),
            (BusId(4), 25.0),
        ]);
        let (zonal, _) = zonal_lmp(&net, &lmps, &loads);
        let expect = (120.0 * 13.5 + 45.0 * 17.25 + 310.0 * 9.75 + 25.0 * 21.0)
            / (120.0 + 45.0 + 310.0 + 25.0);
        assert!((zonal["Z"] - expect).abs() < 1e-12);
    }

    /// Random single-zone dispatch cases for the dual and scaling laws.
    fn random_case(seed: u64, n_buses: usize) -> (Network, BTreeMap<BusId, f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let base = testgen::random_connected_network(seed, n_buses, 1.4);
        let mut gens = Vec::new();
        for (i, b) in base.buses().iter().enumerate() {
            if i % 2 == 0 {
                gens.push(gen(
                    &format!("G{i}"),
                    b.id.0,
                    rng.gen_range(5.0..60.0),
                    rng.gen_range(80.0..200.0),
                ));
            }
        }
        let net = Network::new(
            base.base_mva(),
            base.buses().to_vec(),
            base.branches().to_vec(),
            gens,
        );
        let mut loads = BTreeMap::new();
        for b in net.buses() {
            loads.insert(b.id, rng.gen_range(5.0..40.0));
        }
        (net, loads)
    }

    #[test]
    fn lmp_matches_finite_difference_of_objective() {
        let mut checked = 0;
        for seed in 0..30u64 {
            let n = 5 + (seed as usize % 11);
            let (net, loads) = random_case(1000 + seed, n);
            let mut prob = OpfProblem::new(&net, &[]);
            prob.loads = loads.clone();
            let Ok(sol) = solve_dcopf(&prob) else { continue };
            if sol.degenerate {
                continue;
            }
            let probe = net.buses()[n / 2].id;
            let pos = net.bus_position(probe).unwrap();
            let eps = 1e-3;
            let mut prob2 = OpfProblem::new(&net, &[]);
            prob2.loads = loads.clone();
            *prob2.loads.get_mut(&probe).unwrap() += eps;
            let Ok(sol2) = solve_dcopf(&prob2) else {
                continue;
            };
            let fd = (sol2.objective - sol.objective) / eps;
            let lmp = sol.nodal_lmp[pos];
            assert!(
                (fd - lmp).abs() <= 1e-4 * lmp.abs().max(1.0),
                "seed {seed}: lmp {lmp} fd {fd}"
            );
            checked += 1;
        }
        assert!(checked >= 15, "only {checked} cases checked");
    }

    #[test]
    fn uniform_prices_without_congestion() {
        for seed in 0..10u64 {
            let (net, loads) = random_case(2000 + seed, 8);
            let mut prob = OpfProblem::new(&net, &[]);
            prob.loads = loads;
            let Ok(sol) = solve_dcopf(&prob) else { continue };
            // Unrated branches cannot bind, so prices must be uniform.
            let first = sol.nodal_lmp[0];
            for p in &sol.nodal_lmp {
                assert!((p - first).abs() < 1e-7, "seed {seed}: {p} vs {first}");
            }
        }
    }

    #[test]
    fn cost_scaling_leaves_dispatch_and_scales_prices() {
        for seed in 0..10u64 {
            let (net, loads) = random_case(3000 + seed, 7);
            let solve_at = |scale: f64| {
                let mut prob = OpfProblem::new(&net, &[]);
                prob.loads = loads.clone();
                prob.scale = scale;
                solve_dcopf(&prob)
            };
            let Ok(s1) = solve_at(1.0) else { continue };
            for k in [1.5, 5.0] {
                let sk = solve_at(k).unwrap();
                for (id, v) in &s1.dispatch {
                    assert!(
                        (sk.dispatch[id] - v).abs() <= 1e-9,
                        "seed {seed} k {k}: dispatch {id}"
                    );
                }
                for (a, b) in sk.nodal_lmp.iter().zip(&s1.nodal_lmp) {
                    assert!(
                        (a - k * b).abs() <= 1e-9 * (k * b).abs().max(1e-12),
                        "seed {seed} k {k}: {a} vs {}",
                        k * b
                    );
                }
                assert!(
                    (sk.objective - k * s1.objective).abs()
                        <= 1e-9 * (k * s1.objective).abs().max(1.0)
                );
            }
        }
    }

    #[test]
    fn merit_order_on_a_single_bus() {
        let net = Network::new(
            100.0,
            vec![bus(1, "A", BusKind::Slack)],
            vec![],
            vec![
                gen("CHEAP", 1, 8.0, 60.0),
                gen("MID", 1, 15.0, 60.0),
                gen("DEAR", 1, 40.0, 60.0),
            ],
        );
        let mut prob = OpfProblem::new(&net, &[]);
        prob.loads.insert(BusId(1), 100.0);
        let sol = solve_dcopf(&prob).unwrap();
        assert!((sol.dispatch["CHEAP"] - 60.0).abs() < 1e-9);
        assert!((sol.dispatch["MID"] - 40.0).abs() < 1e-9);
        assert!((sol.dispatch["DEAR"] - 0.0).abs() < 1e-9);
        assert!((sol.nodal_lmp[0] - 15.0).abs() < 1e-9);
    }

    #[test]
    fn energy_balance_within_tolerance() {
        for seed in 0..8u64 {
            let (net, loads) = random_case(4000 + seed, 9);
            let mut prob = OpfProblem::new(&net, &[]);
            prob.loads = loads.clone();
            let Ok(sol) = solve_dcopf(&prob) else { continue };
            let gen_total: f64 = sol.dispatch.values().sum();
            let load_total: f64 = loads.values().sum();
            assert!(
                (gen_total - load_total).abs() < 1e-7 * load_total.max(1.0),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn hvdc_proxy_flow_pins_at_limit_under_price_gap() {
        // Two buses joined only by an expensive-to-relieve AC line and a
        // 100 MW proxy; the proxy saturates toward the pricey side.
        let mut net = Network::new(
            100.0,
            vec![bus(1, "A", BusKind::Slack), bus(2, "B", BusKind::Pq)],
            vec![line(1, 1, 2, 0.1, 40.0)],
            vec![gen("A1", 1, 10.0, 500.0), gen("B1", 2, 30.0, 500.0)],
        );
        let mut branches = net.branches().to_vec();
        branches.push(Branch {
            id: BranchId(2),
            from_bus: BusId(1),
            to_bus: BusId(2),
            resistance: 0.0,
            reactance: 0.0,
            rating: 100.0,
            status: BranchStatus::InService,
            kind: BranchKind::HvdcProxy,
            name: Some("dc".into()),
        });
        net = Network::new(100.0, net.buses().to_vec(), branches, net.generators().to_vec());

        let mut prob = OpfProblem::new(&net, &[]);
        prob.loads.insert(BusId(2), 200.0);
        let sol = solve_dcopf(&prob).unwrap();
        // 40 MW over the line, 100 MW over the proxy, 60 MW from B1.
        assert!((sol.flows[1] - 100.0).abs() < 1e-7, "proxy {}", sol.flows[1]);
        assert!((sol.flows[0] - 40.0).abs() < 1e-7);
        assert!((sol.dispatch["A1"] - 140.0).abs() < 1e-7);
        assert!((sol.dispatch["B1"] - 60.0).abs() < 1e-7);
    }

    #[test]
    fn interface_limit_constrains_flow_sum() {
        // Parallel identical lines; the interface cap binds below the sum
        // of the branch ratings.
        let net = Network::new(
            100.0,
            vec![bus(1, "A", BusKind::Slack), bus(2, "B", BusKind::Pq)],
            vec![
                line(1, 1, 2, 0.2, 200.0),
                line(2, 1, 2, 0.2, 200.0),
            ],
            vec![gen("A1", 1, 10.0, 500.0), gen("B1", 2, 30.0, 500.0)],
        );
        let interfaces = vec![Interface {
            name: "tie".into(),
            members: vec![(BranchId(1), 1), (BranchId(2), 1)],
            limit_pos: 120.0,
            limit_neg: -120.0,
        }];
        let mut prob = OpfProblem::new(&net, &interfaces);
        prob.loads.insert(BusId(2), 300.0);
        let sol = solve_dcopf(&prob).unwrap();
        let total = sol.flows[0] + sol.flows[1];
        assert!((total - 120.0).abs() < 1e-6, "interface flow {total}");
        assert!((sol.dispatch["B1"] - 180.0).abs() < 1e-6);
        assert!(sol
            .binding
            .iter()
            .any(|b| matches!(b, BindingConstraint::Interface { name, at_upper: true } if name == "tie")));

        // Override opens the interface back up.
        prob.interface_limits
            .insert("tie".into(), (-400.0, 400.0));
        let sol = solve_dcopf(&prob).unwrap();
        assert!((sol.dispatch["A1"] - 300.0).abs() < 1e-6);
    }

    #[test]
    fn netted_and_pinned_routes_agree() {
        let (net0, _) = two_bus_case(f64::INFINITY);
        // Add a wind unit at bus 2, both as non-dispatchable and as a
        // pinned dispatchable unit.
        let mut gens_netted = net0.generators().to_vec();
        gens_netted.push(Generator {
            id: "W".into(),
            bus: BusId(2),
            fuel: Fuel::Wind,
            p_max: 80.0,
            p_min: 0.0,
            ramp_hourly: 80.0,
            cost: CostCurve::ZERO,
            dispatchable: false,
        });
        let net_netted = Network::new(
            100.0,
            net0.buses().to_vec(),
            net0.branches().to_vec(),
            gens_netted,
        );

        let mut gens_pinned = net0.generators().to_vec();
        gens_pinned.push(Generator {
            id: "W".into(),
            bus: BusId(2),
            fuel: Fuel::Wind,
            p_max: 80.0,
            p_min: 0.0,
            ramp_hourly: 80.0,
            cost: CostCurve::ZERO,
            dispatchable: true,
        });
        let net_pinned = Network::new(
            100.0,
            net0.buses().to_vec(),
            net0.branches().to_vec(),
            gens_pinned,
        );

        let mut prob_a = OpfProblem::new(&net_netted, &[]);
        prob_a.loads.insert(BusId(2), 150.0);
        prob_a.fixed_outputs.insert("W".into(), 35.0);
        let a = solve_dcopf(&prob_a).unwrap();

        let mut prob_b = OpfProblem::new(&net_pinned, &[]);
        prob_b.loads.insert(BusId(2), 150.0);
        prob_b.fixed_outputs.insert("W".into(), 35.0);
        let b = solve_dcopf(&prob_b).unwrap();

        for id in ["A1", "B1", "W"] {
            assert!(
                (a.dispatch[id] - b.dispatch[id]).abs() < 1e-9,
                "{id}: {} vs {}",
                a.dispatch[id],
                b.dispatch[id]
            );
        }
        for (x, y) in a.nodal_lmp.iter().zip(&b.nodal_lmp) {
            assert!((x - y).abs() < 1e-9);
        }
        for (x, y) in a.flows.iter().zip(&b.flows) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn infeasible_hour_is_isolated_in_hourly_run() {
        let (net, interfaces) = two_bus_case(f64::INFINITY);
        let t0 = NaiveDateTime::parse_from_str("2019-01-01T00:00:00", "%Y-%m-%dT%H:%M:%S")
            .unwrap();
        let timestamps: Vec<NaiveDateTime> =
            (0..3).map(|i| t0 + chrono::Duration::hours(i)).collect();
        let mut hours = vec![
            HourInputs {
                loads: vec![(BusId(2), 100.0)],
                ..Default::default()
            };
            3
        ];
        hours[1].loads = vec![(BusId(2), 5000.0)]; // beyond total capacity
        let run = hourly_opf_run(&net, &interfaces, &timestamps, &hours, 1.0, false).unwrap();
        assert!(run.solutions[0].is_some());
        assert!(run.solutions[1].is_none());
        assert!(run.solutions[2].is_some());
        assert_eq!(run.failures.len(), 1);
        assert_eq!(run.failures[0].0, 1);
    }

    #[test]
    fn hourly_run_is_deterministic() {
        let (net, interfaces) = two_bus_case(50.0);
        let t0 = NaiveDateTime::parse_from_str("2019-01-01T00:00:00", "%Y-%m-%dT%H:%M:%S")
            .unwrap();
        let timestamps: Vec<NaiveDateTime> =
            (0..24).map(|i| t0 + chrono::Duration::hours(i)).collect();
        let hours: Vec<HourInputs> = (0..24)
            .map(|i| HourInputs {
                loads: vec![(BusId(2), 60.0 + 3.0 * i as f64)],
                ..Default::default()
            })
            .collect();
        let a = hourly_opf_run(&net, &interfaces, &timestamps, &hours, 1.0, false).unwrap();
        let b = hourly_opf_run(&net, &interfaces, &timestamps, &hours, 1.0, false).unwrap();
        for (sa, sb) in a.solutions.iter().zip(&b.solutions) {
            let (sa, sb) = (sa.as_ref().unwrap(), sb.as_ref().unwrap());
            assert_eq!(sa.dispatch, sb.dispatch);
            assert_eq!(sa.nodal_lmp, sb.nodal_lmp);
            assert_eq!(sa.objective, sb.objective);
        }
    }

    #[test]
    fn linked_ramp_mode_limits_hour_to_hour_moves() {
        let mut slow = gen("SLOW", 1, 5.0, 300.0);
        slow.ramp_hourly = 40.0;
        let fast = gen("FAST", 1, 50.0, 300.0);
        let net = Network::new(
            100.0,
            vec![bus(1, "A", BusKind::Slack)],
            vec![],
            vec![slow, fast],
        );
        let t0 = NaiveDateTime::parse_from_str("2019-01-01T00:00:00", "%Y-%m-%dT%H:%M:%S")
            .unwrap();
        let timestamps = vec![t0, t0 + chrono::Duration::hours(1)];
        let hours = vec![
            HourInputs {
                loads: vec![(BusId(1), 100.0)],
                ..Default::default()
            },
            HourInputs {
                loads: vec![(BusId(1), 250.0)],
                ..Default::default()
            },
        ];
        // Unlinked: the cheap unit covers hour 2 alone.
        let free = hourly_opf_run(&net, &[], &timestamps, &hours, 1.0, false).unwrap();
        let s2 = free.solutions[1].as_ref().unwrap();
        assert!((s2.dispatch["SLOW"] - 250.0).abs() < 1e-7);

        // Linked: SLOW ran at 100 in hour 1 and can only reach 140.
        let linked = hourly_opf_run(&net, &[], &timestamps, &hours, 1.0, true).unwrap();
        let s1 = linked.solutions[0].as_ref().unwrap();
        assert!((s1.dispatch["SLOW"] - 100.0).abs() < 1e-7);
        let s2 = linked.solutions[1].as_ref().unwrap();
        assert!((s2.dispatch["SLOW"] - 140.0).abs() < 1e-7);
        assert!((s2.dispatch["FAST"] - 110.0).abs() < 1e-7);
    }

    #[test]
    fn unavailable_units_are_excluded() {
        let (net, _) = two_bus_case(f64::INFINITY);
        let mut prob = OpfProblem::new(&net, &[]);
        prob.loads.insert(BusId(2), 100.0);
        prob.unavailable.insert("A1".into());
        let sol = solve_dcopf(&prob).unwrap();
        assert!(!sol.dispatch.contains_key("A1"));
        assert!((sol.dispatch["B1"] - 100.0).abs() < 1e-7);
        assert!((sol.nodal_lmp[1] - 30.0).abs() < 1e-7);
    }

    #[test]
    fn infeasible_reports_conflicting_rows() {
        let (net, _) = two_bus_case(f64::INFINITY);
        let mut prob = OpfProblem::new(&net, &[]);
        prob.loads.insert(BusId(2), 5000.0);
        match solve_dcopf(&prob) {
            Err(OpfError::Infeasible { conflicts }) => {
                assert!(!conflicts.is_empty());
                assert!(conflicts.iter().any(|c| c.contains("balance")));
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }
}
