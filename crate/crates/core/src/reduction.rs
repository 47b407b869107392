//! Ward-type DC network equivalents: eliminate external buses through the
//! Schur complement of the susceptance matrix, synthesize equivalent
//! branches between retained buses, and map eliminated injections onto the
//! boundary so retained-branch flows are preserved.
//!
//! Also hosts the topology edits that surround a reduction run: removing
//! tie lines, adding reactance-estimated AC lines, and adding HVDC proxies.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

use crate::dcpf::{susceptance_matrix, DcSolver, PfError};
use crate::model::{
    Branch, BranchId, BranchKind, BranchStatus, BusId, Network, Violation,
};

/// Equivalent susceptances below this are dropped and their baseline flow
/// folded into the boundary injections.
pub const DEFAULT_PRUNE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("network fails validation: {}", join(.0))]
    InvalidNetwork(Vec<Violation>),
    #[error("slack bus must be retained")]
    SlackNotRetained,
    #[error("retained set references unknown bus {0}")]
    UnknownBus(BusId),
    #[error("unknown branch {0}")]
    UnknownBranch(BranchId),
    #[error("an eliminated region has no impedance tie to a retained bus")]
    EliminatedIsland,
    #[error("hvdc proxy {0} touches an eliminated bus; add proxies after reducing")]
    ProxyTouchesEliminated(BranchId),
    #[error("removing branches would leave the network invalid: {}", join(.0))]
    RemovalBreaksNetwork(Vec<Violation>),
    #[error("reduced network fails validation: {}", join(.0))]
    ReducedInvalid(Vec<Violation>),
    #[error("line length must be positive, got {0}")]
    NonpositiveLength(f64),
    #[error("voltage class must be positive, got {0}")]
    NonpositiveKv(f64),
    #[error("per-mile reactance must be positive, got {0}")]
    NonpositivePerMileX(f64),
    #[error("detour factor must be positive, got {0}")]
    NonpositiveDetour(f64),
    #[error("branch endpoints must differ")]
    SameBus,
    #[error("expected {expected} injections, got {got}")]
    WrongInjectionLength { expected: usize, got: usize },
    #[error(transparent)]
    Pf(#[from] PfError),
}

fn join(vs: &[Violation]) -> String {
    vs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Which buses to keep; everything else is eliminated.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionSpec {
    pub retained: BTreeSet<BusId>,
    pub notes: String,
}

impl ReductionSpec {
    pub fn new(retained: impl IntoIterator<Item = BusId>) -> Self {
        ReductionSpec {
            retained: retained.into_iter().collect(),
            notes: String::new(),
        }
    }
}

/// Linear map from eliminated-bus injections to boundary injections,
/// reusable across hours on a fixed topology.
#[derive(Debug, Clone, PartialEq)]
pub struct WardMap {
    /// Retained bus ids in reduced-network order.
    pub retained: Vec<BusId>,
    /// Eliminated bus ids in transfer-column order.
    pub eliminated: Vec<BusId>,
    /// `-B_re * B_ee^-1`, mapping eliminated injections (MW) to retained
    /// boundary injections (MW).
    transfer: DMatrix<f64>,
    /// Static boundary correction from pruned equivalent branches, frozen
    /// at the reduction's baseline operating point.
    fold: DVector<f64>,
}

impl WardMap {
    /// Boundary injections for a new eliminated-injection vector (MW,
    /// [`WardMap::eliminated`] order). The pruning correction stays at its
    /// baseline value.
    pub fn boundary_for(&self, eliminated_injections_mw: &[f64]) -> Vec<f64> {
        let p_e = DVector::from_column_slice(eliminated_injections_mw);
        let b = &self.transfer * p_e + &self.fold;
        b.iter().copied().collect()
    }
}

/// Result of a Ward reduction.
#[derive(Debug, Clone)]
pub struct ReducedNetwork {
    /// Retained buses, surviving original branches, synthesized equivalent
    /// branches, and the generators that sat on retained buses.
    pub network: Network,
    /// Boundary injections in MW (reduced bus order) for the injection
    /// vector the reduction was run with; zero away from the boundary.
    pub boundary_injections: Vec<f64>,
    /// Human-readable origin of each synthesized equivalent branch.
    pub provenance: BTreeMap<BranchId, String>,
    /// Equivalent susceptances dropped by pruning: `(from, to, b_pu)`.
    pub pruned: Vec<(BusId, BusId, f64)>,
    /// Injection map for re-running hours without re-reducing.
    pub ward: WardMap,
}

/// Ward reduction with the default pruning tolerance.
pub fn ward_reduce(
    net: &Network,
    injections_mw: &[f64],
    spec: &ReductionSpec,
) -> Result<ReducedNetwork, ReductionError> {
    ward_reduce_with_tol(net, injections_mw, spec, DEFAULT_PRUNE_TOL)
}

/// Ward reduction of `net` at the operating point `injections_mw`.
///
/// Buses outside `spec.retained` are eliminated through the Schur
/// complement `B_rr - B_re B_ee^-1 B_er` of the DC susceptance matrix.
/// Off-diagonal fill relative to the retained-only matrix becomes
/// equivalent branches; entries with susceptance below `prune_tol` are
/// dropped and their baseline flow folded into the boundary injections.
/// Generators on eliminated buses are dropped from the returned network
/// (their output is part of `injections_mw`). DC power flow on the result,
/// with `boundary_injections` added to the retained injections, reproduces
/// the full network's retained angles and flows.
pub fn ward_reduce_with_tol(
    net: &Network,
    injections_mw: &[f64],
    spec: &ReductionSpec,
    prune_tol: f64,
) -> Result<ReducedNetwork, ReductionError> {
    let violations = net.validate();
    if !violations.is_empty() {
        return Err(ReductionError::InvalidNetwork(violations));
    }
    if injections_mw.len() != net.buses().len() {
        return Err(ReductionError::WrongInjectionLength {
            expected: net.buses().len(),
            got: injections_mw.len(),
        });
    }
    for &id in &spec.retained {
        if net.bus(id).is_none() {
            return Err(ReductionError::UnknownBus(id));
        }
    }
    let slack_id = net.slack().expect("validated network has a slack").id;
    if !spec.retained.contains(&slack_id) {
        return Err(ReductionError::SlackNotRetained);
    }

    let mut retained_pos = Vec::new();
    let mut eliminated_pos = Vec::new();
    for (pos, bus) in net.buses().iter().enumerate() {
        if spec.retained.contains(&bus.id) {
            retained_pos.push(pos);
        } else {
            eliminated_pos.push(pos);
        }
    }
    let n_r = retained_pos.len();
    let n_e = eliminated_pos.len();
    let retained_ids: Vec<BusId> = retained_pos.iter().map(|&p| net.buses()[p].id).collect();
    let eliminated_ids: Vec<BusId> = eliminated_pos.iter().map(|&p| net.buses()[p].id).collect();
    let eliminated_set: BTreeSet<BusId> = eliminated_ids.iter().copied().collect();

    for br in net.branches() {
        if br.kind == BranchKind::HvdcProxy
            && br.is_in_service()
            && (eliminated_set.contains(&br.from_bus) || eliminated_set.contains(&br.to_bus))
        {
            return Err(ReductionError::ProxyTouchesEliminated(br.id));
        }
    }

    // Trivial reduction: nothing to eliminate.
    if n_e == 0 {
        return Ok(ReducedNetwork {
            network: net.clone(),
            boundary_injections: vec![0.0; n_r],
            provenance: BTreeMap::new(),
            pruned: Vec::new(),
            ward: WardMap {
                retained: retained_ids,
                eliminated: Vec::new(),
                transfer: DMatrix::zeros(n_r, 0),
                fold: DVector::zeros(n_r),
            },
        });
    }

    let b_full = susceptance_matrix(net);
    let mut b_ee: DMatrix<f64> = DMatrix::zeros(n_e, n_e);
    for (i, &pi) in eliminated_pos.iter().enumerate() {
        for (j, &pj) in eliminated_pos.iter().enumerate() {
            b_ee[(i, j)] = b_full[(pi, pj)];
        }
    }
    let mut b_er: DMatrix<f64> = DMatrix::zeros(n_e, n_r);
    for (i, &pi) in eliminated_pos.iter().enumerate() {
        for (j, &pj) in retained_pos.iter().enumerate() {
            b_er[(i, j)] = b_full[(pi, pj)];
        }
    }

    let chol = Cholesky::new(b_ee.clone()).ok_or(ReductionError::EliminatedIsland)?;
    // X = B_ee^-1 B_er, refined once against the factorization error.
    let mut x = chol.solve(&b_er);
    let resid = &b_er - &b_ee * &x;
    x += chol.solve(&resid);

    // Schur complement and boundary transfer.
    let mut b_eq: DMatrix<f64> = DMatrix::zeros(n_r, n_r);
    for (i, &pi) in retained_pos.iter().enumerate() {
        for (j, &pj) in retained_pos.iter().enumerate() {
            b_eq[(i, j)] = b_full[(pi, pj)];
        }
    }
    b_eq -= x.transpose() * &b_er;
    let transfer = -x.transpose();

    // Susceptance the retained branches already provide.
    let keep_branch = |br: &Branch| {
        !eliminated_set.contains(&br.from_bus) && !eliminated_set.contains(&br.to_bus)
    };
    let mut b_keep: DMatrix<f64> = DMatrix::zeros(n_r, n_r);
    let pos_in_reduced: BTreeMap<BusId, usize> = retained_ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i))
        .collect();
    for br in net.branches() {
        if !br.carries_impedance() || !keep_branch(br) {
            continue;
        }
        let i = pos_in_reduced[&br.from_bus];
        let j = pos_in_reduced[&br.to_bus];
        let y = br.susceptance();
        b_keep[(i, i)] += y;
        b_keep[(j, j)] += y;
        b_keep[(i, j)] -= y;
        b_keep[(j, i)] -= y;
    }

    // Baseline full-network angles for pruning fold-in. Proxies between
    // retained buses are solved at zero schedule here; their real schedules
    // act on retained buses only and cannot change the fold of a pruned
    // equivalent beyond the prune tolerance itself.
    let mut zero_schedules = BTreeMap::new();
    for br in net.branches() {
        if br.kind == BranchKind::HvdcProxy && br.is_in_service() {
            zero_schedules.insert(br.id, 0.0);
        }
    }
    let full_solution = DcSolver::new(net)?.solve(injections_mw, &zero_schedules)?;

    let mut branches: Vec<Branch> = net
        .branches()
        .iter()
        .filter(|br| keep_branch(br))
        .cloned()
        .collect();
    let mut provenance = BTreeMap::new();
    let mut pruned = Vec::new();
    let mut fold: DVector<f64> = DVector::zeros(n_r);
    let mut next_id = net.max_branch_id() + 1;
    for i in 0..n_r {
        for j in (i + 1)..n_r {
            let b_equiv: f64 = b_keep[(i, j)] - b_eq[(i, j)];
            if b_equiv.abs() <= prune_tol {
                if b_equiv != 0.0 {
                    let from = retained_ids[i];
                    let to = retained_ids[j];
                    let pi = net.bus_position(from).unwrap();
                    let pj = net.bus_position(to).unwrap();
                    let flow_mw = net.base_mva()
                        * b_equiv
                        * (full_solution.angles[pi] - full_solution.angles[pj]);
                    fold[i] -= flow_mw;
                    fold[j] += flow_mw;
                    pruned.push((from, to, b_equiv));
                }
                continue;
            }
            let id = BranchId(next_id);
            next_id += 1;
            branches.push(Branch {
                id,
                from_bus: retained_ids[i],
                to_bus: retained_ids[j],
                resistance: 0.0,
                reactance: 1.0 / b_equiv,
                rating: f64::INFINITY,
                status: BranchStatus::InService,
                kind: BranchKind::Equivalent,
                name: None,
            });
            provenance.insert(
                id,
                format!(
                    "equivalent of {n_e} eliminated buses between bus {} and bus {} \
                     (b = {b_equiv} pu)",
                    retained_ids[i], retained_ids[j]
                ),
            );
        }
    }

    let p_e = DVector::from_iterator(n_e, eliminated_pos.iter().map(|&p| injections_mw[p]));
    let boundary = &transfer * p_e + &fold;

    let buses = retained_pos
        .iter()
        .map(|&p| net.buses()[p].clone())
        .collect();
    let generators = net
        .generators()
        .iter()
        .filter(|g| !eliminated_set.contains(&g.bus))
        .cloned()
        .collect();
    let network = Network::new(net.base_mva(), buses, branches, generators);
    let violations = network.validate();
    if !violations.is_empty() {
        return Err(ReductionError::ReducedInvalid(violations));
    }

    Ok(ReducedNetwork {
        network,
        boundary_injections: boundary.iter().copied().collect(),
        provenance,
        pruned,
        ward: WardMap {
            retained: retained_ids,
            eliminated: eliminated_ids,
            transfer,
            fold,
        },
    })
}

/// Removes branches by id, rejecting removals that leave the network
/// invalid (disconnection in particular).
pub fn remove_branches(net: &Network, ids: &[BranchId]) -> Result<Network, ReductionError> {
    let remove: BTreeSet<BranchId> = ids.iter().copied().collect();
    for &id in ids {
        if net.branch(id).is_none() {
            return Err(ReductionError::UnknownBranch(id));
        }
    }
    let branches = net
        .branches()
        .iter()
        .filter(|b| !remove.contains(&b.id))
        .cloned()
        .collect();
    let out = Network::new(
        net.base_mva(),
        net.buses().to_vec(),
        branches,
        net.generators().to_vec(),
    );
    let violations = out.validate();
    if !violations.is_empty() {
        return Err(ReductionError::RemovalBreaksNetwork(violations));
    }
    Ok(out)
}

/// Adds an AC line whose reactance is estimated from route length and
/// voltage class: `X_pu = detour * length * x_per_mile / (kV^2 / base_mva)`.
pub fn add_line_estimated(
    net: &Network,
    from: BusId,
    to: BusId,
    length_miles: f64,
    kv: f64,
    per_mile_x_ohm: f64,
    detour: f64,
) -> Result<Network, ReductionError> {
    if from == to {
        return Err(ReductionError::SameBus);
    }
    for id in [from, to] {
        if net.bus(id).is_none() {
            return Err(ReductionError::UnknownBus(id));
        }
    }
    if length_miles <= 0.0 {
        return Err(ReductionError::NonpositiveLength(length_miles));
    }
    if kv <= 0.0 {
        return Err(ReductionError::NonpositiveKv(kv));
    }
    if per_mile_x_ohm <= 0.0 {
        return Err(ReductionError::NonpositivePerMileX(per_mile_x_ohm));
    }
    if detour <= 0.0 {
        return Err(ReductionError::NonpositiveDetour(detour));
    }
    let z_base = kv * kv / net.base_mva();
    let x_pu = detour * length_miles * per_mile_x_ohm / z_base;
    let mut branches = net.branches().to_vec();
    branches.push(Branch {
        id: BranchId(net.max_branch_id() + 1),
        from_bus: from,
        to_bus: to,
        resistance: 0.0,
        reactance: x_pu,
        rating: f64::INFINITY,
        status: BranchStatus::InService,
        kind: BranchKind::AddedAc,
        name: None,
    });
    Ok(Network::new(
        net.base_mva(),
        net.buses().to_vec(),
        branches,
        net.generators().to_vec(),
    ))
}

/// Adds a controllable-tie proxy branch. It carries a scheduled flow in
/// power flow and a `[-limit, limit]` decision variable in OPF; it adds no
/// susceptance.
pub fn add_hvdc_proxy(
    net: &Network,
    from: BusId,
    to: BusId,
    name: &str,
    limit_mw: f64,
) -> Result<Network, ReductionError> {
    if from == to {
        return Err(ReductionError::SameBus);
    }
    for id in [from, to] {
        if net.bus(id).is_none() {
            return Err(ReductionError::UnknownBus(id));
        }
    }
    let mut branches = net.branches().to_vec();
    branches.push(Branch {
        id: BranchId(net.max_branch_id() + 1),
        from_bus: from,
        to_bus: to,
        resistance: 0.0,
        reactance: 0.0,
        rating: limit_mw,
        status: BranchStatus::InService,
        kind: BranchKind::HvdcProxy,
        name: Some(name.to_string()),
    });
    let out = Network::new(
        net.base_mva(),
        net.buses().to_vec(),
        branches,
        net.generators().to_vec(),
    );
    let violations = out.validate();
    if !violations.is_empty() {
        return Err(ReductionError::ReducedInvalid(violations));
    }
    Ok(out)
}

/// Max mismatch between full-network and reduced-network results at one
/// operating point: retained-branch flow error and retained-bus angle
/// error, as `(max_flow_error_mw, max_angle_error_rad)`.
pub fn equivalence_check(
    net: &Network,
    injections_mw: &[f64],
    reduced: &ReducedNetwork,
) -> Result<(f64, f64), ReductionError> {
    let mut zero_schedules = BTreeMap::new();
    for br in net.branches() {
        if br.kind == BranchKind::HvdcProxy && br.is_in_service() {
            zero_schedules.insert(br.id, 0.0);
        }
    }
    let full = DcSolver::new(net)?.solve(injections_mw, &zero_schedules)?;

    let rnet = &reduced.network;
    let mut r_inj = Vec::with_capacity(rnet.buses().len());
    for (i, bus) in rnet.buses().iter().enumerate() {
        let full_pos = net.bus_position(bus.id).expect("retained bus in full net");
        r_inj.push(injections_mw[full_pos] + reduced.boundary_injections[i]);
    }
    let mut r_sched = BTreeMap::new();
    for br in rnet.branches() {
        if br.kind == BranchKind::HvdcProxy && br.is_in_service() {
            r_sched.insert(br.id, 0.0);
        }
    }
    let red = DcSolver::new(rnet)?.solve(&r_inj, &r_sched)?;

    let mut max_flow_err: f64 = 0.0;
    for (pos, br) in net.branches().iter().enumerate() {
        if let Some(rpos) = rnet.branch_position(br.id) {
            max_flow_err = max_flow_err.max((full.branch_flows[pos] - red.branch_flows[rpos]).abs());
        }
    }
    let mut max_angle_err: f64 = 0.0;
    for (rpos, bus) in rnet.buses().iter().enumerate() {
        let fpos = net.bus_position(bus.id).unwrap();
        max_angle_err = max_angle_err.max((full.angles[fpos] - red.angles[rpos]).abs());
    }
    Ok((max_flow_err, max_angle_err))
}
