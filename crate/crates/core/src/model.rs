//! Core immutable data model: buses, branches, generators, interfaces and the
//! [`Network`] that ties them together.
//!
//! All types are plain data and immutable once constructed, so they can be
//! shared freely across concurrent hourly solves. Invariants are not enforced
//! at construction; [`validate_network`] reports every violation as a
//! diagnostic instead, which keeps parsers and reducers able to build interim
//! networks and lets callers decide how strict to be.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

/// Bus identifier, unique within a [`Network`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BusId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Branch identifier, unique within a [`Network`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BranchId(pub u32);

impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Pq,
    Pv,
    Slack,
}

impl BusKind {
    pub fn token(self) -> &'static str {
        match self {
            BusKind::Pq => "pq",
            BusKind::Pv => "pv",
            BusKind::Slack => "slack",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "pq" => Some(BusKind::Pq),
            "pv" => Some(BusKind::Pv),
            "slack" => Some(BusKind::Slack),
            _ => None,
        }
    }
}

/// Physical role of a branch.
///
/// `HvdcProxy` branches carry no susceptance: they model controllable ties as
/// paired injections (a scheduled flow in power flow, a bounded decision
/// variable in OPF). `Equivalent` branches are synthesized by network
/// reduction, `AddedAc` marks lines estimated from length and voltage class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchKind {
    PhysicalAc,
    Equivalent,
    HvdcProxy,
    AddedAc,
}

impl BranchKind {
    pub fn token(self) -> &'static str {
        match self {
            BranchKind::PhysicalAc => "physical-ac",
            BranchKind::Equivalent => "equivalent",
            BranchKind::HvdcProxy => "hvdc-proxy",
            BranchKind::AddedAc => "added-ac",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "physical-ac" => Some(BranchKind::PhysicalAc),
            "equivalent" => Some(BranchKind::Equivalent),
            "hvdc-proxy" => Some(BranchKind::HvdcProxy),
            "added-ac" => Some(BranchKind::AddedAc),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchStatus {
    InService,
    Out,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Fuel {
    Nuclear,
    Hydro,
    Wind,
    OtherRenewable,
    Gas,
    Oil,
    Coal,
    DualFuel,
    ExternalEquivalent,
}

impl Fuel {
    pub fn token(self) -> &'static str {
        match self {
            Fuel::Nuclear => "nuclear",
            Fuel::Hydro => "hydro",
            Fuel::Wind => "wind",
            Fuel::OtherRenewable => "other-renewable",
            Fuel::Gas => "gas",
            Fuel::Oil => "oil",
            Fuel::Coal => "coal",
            Fuel::DualFuel => "dual-fuel",
            Fuel::ExternalEquivalent => "external-equivalent",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "nuclear" => Some(Fuel::Nuclear),
            "hydro" => Some(Fuel::Hydro),
            "wind" => Some(Fuel::Wind),
            "other-renewable" => Some(Fuel::OtherRenewable),
            "gas" => Some(Fuel::Gas),
            "oil" => Some(Fuel::Oil),
            "coal" => Some(Fuel::Coal),
            "dual-fuel" => Some(Fuel::DualFuel),
            "external-equivalent" => Some(Fuel::ExternalEquivalent),
            _ => None,
        }
    }

    /// True for fuels that burn a priced fuel, so their marginal cost scales
    /// with a fuel-price series.
    pub fn is_fossil(self) -> bool {
        matches!(self, Fuel::Gas | Fuel::Oil | Fuel::Coal | Fuel::DualFuel)
    }
}

impl fmt::Display for Fuel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Linear marginal-cost curve `cost(P) = c0 + c1 * P` in $/h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostCurve {
    /// Marginal slope in $/MWh.
    pub c1: f64,
    /// Fixed term in $/h.
    pub c0: f64,
}

impl CostCurve {
    pub const ZERO: CostCurve = CostCurve { c1: 0.0, c0: 0.0 };
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: BusId,
    /// Free-form zone label ("A".."K" for NYS-style studies, or an
    /// external-area label).
    pub zone: String,
    pub kind: BusKind,
    /// Baseline load in MW, used as the weight when zonal loads are
    /// allocated to buses.
    pub base_load: f64,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: BranchId,
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// Series resistance in per-unit. Accepted from case files for forward
    /// compatibility but ignored by every solver (DC assumption).
    pub resistance: f64,
    /// Series reactance in per-unit. Must be positive except for HVDC
    /// proxies, which carry no susceptance.
    pub reactance: f64,
    /// MVA rating; `f64::INFINITY` for unrated lines.
    pub rating: f64,
    pub status: BranchStatus,
    pub kind: BranchKind,
    /// Optional human-readable name; used to key HVDC proxy schedules.
    pub name: Option<String>,
}

impl Branch {
    pub fn is_in_service(&self) -> bool {
        self.status == BranchStatus::InService
    }

    /// True when the branch contributes susceptance to the DC B-matrix.
    pub fn carries_impedance(&self) -> bool {
        self.is_in_service() && self.kind != BranchKind::HvdcProxy
    }

    /// Per-unit susceptance `1/x`.
    pub fn susceptance(&self) -> f64 {
        1.0 / self.reactance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub id: String,
    pub bus: BusId,
    pub fuel: Fuel,
    /// Maximum output in MW.
    pub p_max: f64,
    /// Minimum output in MW.
    pub p_min: f64,
    /// Maximum hour-to-hour output change in MW/h.
    pub ramp_hourly: f64,
    pub cost: CostCurve,
    /// Non-dispatchable units (wind, other renewables) are netted from bus
    /// load before solving rather than optimized.
    pub dispatchable: bool,
}

/// Named, directed set of branches whose signed aggregate flow is monitored
/// and limited.
#[derive(Debug, Clone, PartialEq)]
pub struct Interface {
    pub name: String,
    /// Member branches with orientation: `+1` counts the branch's from→to
    /// flow positively, `-1` negates it.
    pub members: Vec<(BranchId, i8)>,
    /// Upper limit on the aggregate flow in MW (≥ 0).
    pub limit_pos: f64,
    /// Lower limit on the aggregate flow in MW (≤ 0).
    pub limit_neg: f64,
}

/// Immutable network case: buses, branches, generators and the MVA base.
///
/// Lookup tables are built once at construction. When duplicate ids are
/// present the first occurrence wins; [`Network::validate`] reports the
/// duplicates.
#[derive(Debug, Clone)]
pub struct Network {
    base_mva: f64,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    generators: Vec<Generator>,
    bus_pos: HashMap<BusId, usize>,
    branch_pos: HashMap<BranchId, usize>,
    gen_pos: HashMap<String, usize>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.base_mva == other.base_mva
            && self.buses == other.buses
            && self.branches == other.branches
            && self.generators == other.generators
    }
}

impl Network {
    pub fn new(
        base_mva: f64,
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        generators: Vec<Generator>,
    ) -> Self {
        let mut bus_pos = HashMap::with_capacity(buses.len());
        for (i, b) in buses.iter().enumerate() {
            bus_pos.entry(b.id).or_insert(i);
        }
        let mut branch_pos = HashMap::with_capacity(branches.len());
        for (i, b) in branches.iter().enumerate() {
            branch_pos.entry(b.id).or_insert(i);
        }
        let mut gen_pos = HashMap::with_capacity(generators.len());
        for (i, g) in generators.iter().enumerate() {
            gen_pos.entry(g.id.clone()).or_insert(i);
        }
        Network {
            base_mva,
            buses,
            branches,
            generators,
            bus_pos,
            branch_pos,
            gen_pos,
        }
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn bus(&self, id: BusId) -> Option<&Bus> {
        self.bus_pos.get(&id).map(|&i| &self.buses[i])
    }

    pub fn branch(&self, id: BranchId) -> Option<&Branch> {
        self.branch_pos.get(&id).map(|&i| &self.branches[i])
    }

    pub fn generator(&self, id: &str) -> Option<&Generator> {
        self.gen_pos.get(id).map(|&i| &self.generators[i])
    }

    /// Dense position of a bus in [`Network::buses`] order.
    pub fn bus_position(&self, id: BusId) -> Option<usize> {
        self.bus_pos.get(&id).copied()
    }

    pub fn branch_position(&self, id: BranchId) -> Option<usize> {
        self.branch_pos.get(&id).copied()
    }

    pub fn generator_position(&self, id: &str) -> Option<usize> {
        self.gen_pos.get(id).copied()
    }

    /// Generators attached to the given bus, in declaration order.
    pub fn generators_at(&self, bus: BusId) -> impl Iterator<Item = &Generator> {
        self.generators.iter().filter(move |g| g.bus == bus)
    }

    /// Set of zone labels present on buses.
    pub fn zones(&self) -> BTreeSet<&str> {
        self.buses.iter().map(|b| b.zone.as_str()).collect()
    }

    pub fn slack(&self) -> Option<&Bus> {
        self.buses.iter().find(|b| b.kind == BusKind::Slack)
    }

    /// Largest branch id in use, handy when synthesizing new branches.
    pub fn max_branch_id(&self) -> u32 {
        self.branches.iter().map(|b| b.id.0).max().unwrap_or(0)
    }

    /// Checks every model invariant and returns one entry per violation.
    /// An empty result means the network is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();

        let mut seen_bus = BTreeSet::new();
        for b in &self.buses {
            if !seen_bus.insert(b.id) {
                out.push(Violation::DuplicateBusId(b.id));
            }
            if b.base_load < 0.0 {
                out.push(Violation::NegativeBaseLoad(b.id));
            }
        }

        let slack_count = self
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Slack)
            .count();
        if slack_count != 1 {
            out.push(Violation::SlackCount(slack_count));
        }

        let mut seen_branch = BTreeSet::new();
        for br in &self.branches {
            if !seen_branch.insert(br.id) {
                out.push(Violation::DuplicateBranchId(br.id));
            }
            if br.from_bus == br.to_bus {
                out.push(Violation::SelfLoop(br.id));
            }
            for end in [br.from_bus, br.to_bus] {
                if self.bus(end).is_none() {
                    out.push(Violation::BranchEndpointMissing(br.id, end));
                }
            }
            if br.kind != BranchKind::HvdcProxy && br.reactance <= 0.0 {
                out.push(Violation::NonpositiveReactance(br.id));
            }
            if br.rating <= 0.0 {
                out.push(Violation::NonpositiveRating(br.id));
            }
        }

        let mut seen_gen = BTreeSet::new();
        for g in &self.generators {
            if !seen_gen.insert(g.id.as_str()) {
                out.push(Violation::DuplicateGeneratorId(g.id.clone()));
            }
            if self.bus(g.bus).is_none() {
                out.push(Violation::GeneratorBusMissing(g.id.clone(), g.bus));
            }
            if !(0.0 <= g.p_min && g.p_min <= g.p_max) {
                out.push(Violation::BadGeneratorLimits(g.id.clone()));
            }
            if g.ramp_hourly < 0.0 {
                out.push(Violation::NegativeRamp(g.id.clone()));
            }
            if g.cost.c1 < 0.0 {
                out.push(Violation::NegativeMarginalCost(g.id.clone()));
            }
        }

        if !self.is_connected() {
            out.push(Violation::Disconnected);
        }

        out
    }

    /// Connectivity of the in-service impedance-branch graph over all buses.
    ///
    /// HVDC proxies do not count as edges here: they contribute no
    /// susceptance, so a region tied only by a proxy would still yield a
    /// singular DC B-matrix.
    pub fn is_connected(&self) -> bool {
        if self.buses.len() <= 1 {
            return true;
        }
        let adj = self.impedance_adjacency();
        let mut seen = vec![false; self.buses.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == self.buses.len()
    }

    /// Adjacency lists (dense bus positions) over in-service impedance
    /// branches.
    pub(crate) fn impedance_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.buses.len()];
        for br in &self.branches {
            if !br.carries_impedance() {
                continue;
            }
            if let (Some(i), Some(j)) = (self.bus_position(br.from_bus), self.bus_position(br.to_bus))
            {
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        adj
    }
}

/// A single invariant violation found by [`validate_network`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateBusId(BusId),
    DuplicateBranchId(BranchId),
    DuplicateGeneratorId(String),
    SlackCount(usize),
    NegativeBaseLoad(BusId),
    SelfLoop(BranchId),
    BranchEndpointMissing(BranchId, BusId),
    NonpositiveReactance(BranchId),
    NonpositiveRating(BranchId),
    GeneratorBusMissing(String, BusId),
    BadGeneratorLimits(String),
    NegativeRamp(String),
    NegativeMarginalCost(String),
    Disconnected,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateBusId(id) => write!(f, "duplicate bus id {id}"),
            Violation::DuplicateBranchId(id) => write!(f, "duplicate branch id {id}"),
            Violation::DuplicateGeneratorId(id) => write!(f, "duplicate generator id {id}"),
            Violation::SlackCount(n) => write!(f, "expected exactly one slack bus, found {n}"),
            Violation::NegativeBaseLoad(id) => write!(f, "negative base load at bus {id}"),
            Violation::SelfLoop(id) => write!(f, "branch {id} connects a bus to itself"),
            Violation::BranchEndpointMissing(br, bus) => {
                write!(f, "branch {br} references unknown bus {bus}")
            }
            Violation::NonpositiveReactance(id) => {
                write!(f, "nonpositive reactance on branch {id}")
            }
            Violation::NonpositiveRating(id) => write!(f, "nonpositive rating on branch {id}"),
            Violation::GeneratorBusMissing(g, bus) => {
                write!(f, "generator {g} references unknown bus {bus}")
            }
            Violation::BadGeneratorLimits(g) => {
                write!(f, "generator {g} violates 0 <= p_min <= p_max")
            }
            Violation::NegativeRamp(g) => write!(f, "negative ramp rate on generator {g}"),
            Violation::NegativeMarginalCost(g) => {
                write!(f, "negative marginal cost on generator {g}")
            }
            Violation::Disconnected => write!(f, "graph disconnected"),
        }
    }
}

/// Checks all model invariants; the empty list means `net` is valid.
pub fn validate_network(net: &Network) -> Vec<Violation> {
    net.validate()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown generator id `{0}`")]
    UnknownGenerator(String),
    #[error("unknown bus id {0}")]
    UnknownBus(BusId),
}

/// Assembles the per-bus injection vector `generation − load` in MW,
/// ordered like [`Network::buses`].
///
/// `dispatch` may cover any subset of units (absent units contribute zero);
/// outputs of non-dispatchable units supplied here are equivalent to netting
/// them from their bus load. Ids unknown to the network are errors. The sum
/// over buses is not forced to zero; the slack bus absorbs any mismatch in
/// power flow.
pub fn net_injections(
    net: &Network,
    dispatch: &BTreeMap<String, f64>,
    loads: &BTreeMap<BusId, f64>,
) -> Result<Vec<f64>, ModelError> {
    let mut inj = vec![0.0; net.buses().len()];
    for (gid, mw) in dispatch {
        let gen = net
            .generator(gid)
            .ok_or_else(|| ModelError::UnknownGenerator(gid.clone()))?;
        let pos = net
            .bus_position(gen.bus)
            .ok_or(ModelError::UnknownBus(gen.bus))?;
        inj[pos] += mw;
    }
    for (&bus, mw) in loads {
        let pos = net.bus_position(bus).ok_or(ModelError::UnknownBus(bus))?;
        inj[pos] -= mw;
    }
    Ok(inj)
}
