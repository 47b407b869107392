//! DC power flow: bus angles from injections, branch and interface flows,
//! and the interface percentage-error statistics used for validation runs.
//!
//! The susceptance matrix is factorized once per topology ([`DcSolver`]) and
//! reused across hourly injection vectors; solutions for distinct hours are
//! independent and the solver is reentrant.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::model::{BranchId, BranchKind, Interface, Network, Violation};

/// Absolute per-unit residual bound on the solved angle system.
pub const RESIDUAL_TOL_PU: f64 = 1e-10;
/// Reporting band for the interquartile range of interface errors.
pub const IQR_BAND: f64 = 0.10;
/// Reporting band for the central 95% interval of interface errors.
pub const P95_BAND: f64 = 0.15;

#[derive(Debug, Error)]
pub enum PfError {
    #[error("network fails validation: {}", crate::dcpf::join_violations(.0))]
    InvalidNetwork(Vec<Violation>),
    #[error("susceptance matrix is singular (network disconnected?)")]
    Singular,
    #[error("expected {expected} injections, got {got}")]
    WrongInjectionLength { expected: usize, got: usize },
    #[error("no schedule supplied for hvdc proxy branch {0}")]
    MissingHvdcSchedule(BranchId),
    #[error("schedule supplied for branch {0}, which is not an in-service hvdc proxy")]
    NotAnHvdcProxy(BranchId),
    #[error("solve residual {0} exceeds {RESIDUAL_TOL_PU} pu")]
    ResidualTooLarge(f64),
    #[error("interface rating must be positive, got {0}")]
    NonpositiveRating(f64),
    #[error("empty error series for interface `{0}`")]
    EmptySeries(String),
}

pub(crate) fn join_violations(vs: &[Violation]) -> String {
    vs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Builds the per-unit DC susceptance Laplacian over in-service impedance
/// branches, in [`Network::buses`] order.
pub(crate) fn susceptance_matrix(net: &Network) -> DMatrix<f64> {
    let n = net.buses().len();
    let mut b = DMatrix::zeros(n, n);
    for br in net.branches() {
        if !br.carries_impedance() {
            continue;
        }
        let (Some(i), Some(j)) = (net.bus_position(br.from_bus), net.bus_position(br.to_bus))
        else {
            continue;
        };
        let y = br.susceptance();
        b[(i, i)] += y;
        b[(j, j)] += y;
        b[(i, j)] -= y;
        b[(j, i)] -= y;
    }
    b
}

/// One DC power-flow solution, aligned with the network's bus and branch
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct PfSolution {
    /// Bus angles in radians; the slack bus is the zero reference.
    pub angles: Vec<f64>,
    /// Branch flows in MW, positive from `from_bus` to `to_bus`;
    /// out-of-service branches carry zero, hvdc proxies their schedule.
    pub branch_flows: Vec<f64>,
    /// Injection absorbed by the slack bus in MW.
    pub slack_injection: f64,
}

/// Reusable DC factorization for one network topology.
pub struct DcSolver<'a> {
    net: &'a Network,
    slack_pos: usize,
    b_reduced: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl<'a> DcSolver<'a> {
    pub fn new(net: &'a Network) -> Result<Self, PfError> {
        let violations = net.validate();
        if !violations.is_empty() {
            return Err(PfError::InvalidNetwork(violations));
        }
        let slack_pos = net
            .bus_position(net.slack().expect("validated network has a slack").id)
            .expect("slack bus position");
        let b = susceptance_matrix(net);
        let b_reduced = b.remove_row(slack_pos).remove_column(slack_pos);
        let chol = Cholesky::new(b_reduced.clone()).ok_or(PfError::Singular)?;
        Ok(DcSolver {
            net,
            slack_pos,
            b_reduced,
            chol,
        })
    }

    pub fn network(&self) -> &Network {
        self.net
    }

    /// Solves angles and flows for one injection vector (MW, bus order).
    ///
    /// Schedules must cover exactly the in-service hvdc proxy branches; each
    /// schedule `f` withdraws `f` MW at the proxy's from-bus and injects it
    /// at the to-bus. One step of iterative refinement keeps the residual
    /// within [`RESIDUAL_TOL_PU`].
    pub fn solve(
        &self,
        injections_mw: &[f64],
        hvdc_schedules: &BTreeMap<BranchId, f64>,
    ) -> Result<PfSolution, PfError> {
        let n = self.net.buses().len();
        if injections_mw.len() != n {
            return Err(PfError::WrongInjectionLength {
                expected: n,
                got: injections_mw.len(),
            });
        }
        for id in hvdc_schedules.keys() {
            let ok = self
                .net
                .branch(*id)
                .map(|br| br.kind == BranchKind::HvdcProxy && br.is_in_service())
                .unwrap_or(false);
            if !ok {
                return Err(PfError::NotAnHvdcProxy(*id));
            }
        }

        let mut inj = injections_mw.to_vec();
        for br in self.net.branches() {
            if br.kind == BranchKind::HvdcProxy && br.is_in_service() {
                let f = *hvdc_schedules
                    .get(&br.id)
                    .ok_or(PfError::MissingHvdcSchedule(br.id))?;
                let i = self.net.bus_position(br.from_bus).unwrap();
                let j = self.net.bus_position(br.to_bus).unwrap();
                inj[i] -= f;
                inj[j] += f;
            }
        }

        let base = self.net.base_mva();
        let p_reduced = DVector::from_iterator(
            n - 1,
            inj.iter()
                .enumerate()
                .filter(|(i, _)| *i != self.slack_pos)
                .map(|(_, &v)| v / base),
        );

        let mut theta_reduced = self.chol.solve(&p_reduced);

        // Iterative refinement: one or two cheap corrections with the
        // existing factor push the residual to machine level even on
        // ill-conditioned random topologies.
        for _ in 0..2 {
            let r = &p_reduced - &self.b_reduced * &theta_reduced;
            if r.amax() <= RESIDUAL_TOL_PU * 0.01 {
                break;
            }
            theta_reduced += self.chol.solve(&r);
        }
        let residual = (&p_reduced - &self.b_reduced * &theta_reduced).amax();
        if residual > RESIDUAL_TOL_PU {
            return Err(PfError::ResidualTooLarge(residual));
        }

        let mut angles = vec![0.0; n];
        let mut k = 0;
        for (i, a) in angles.iter_mut().enumerate() {
            if i != self.slack_pos {
                *a = theta_reduced[k];
                k += 1;
            }
        }

        let branch_flows = self
            .net
            .branches()
            .iter()
            .map(|br| {
                if !br.is_in_service() {
                    return 0.0;
                }
                if br.kind == BranchKind::HvdcProxy {
                    return hvdc_schedules[&br.id];
                }
                let i = self.net.bus_position(br.from_bus).unwrap();
                let j = self.net.bus_position(br.to_bus).unwrap();
                base * (angles[i] - angles[j]) * br.susceptance()
            })
            .collect();

        let slack_injection = -inj
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.slack_pos)
            .map(|(_, v)| v)
            .sum::<f64>();

        Ok(PfSolution {
            angles,
            branch_flows,
            slack_injection,
        })
    }
}

/// One-shot DC power flow; prefer [`DcSolver`] when solving many hours on
/// the same topology.
pub fn solve_dcpf(
    net: &Network,
    injections_mw: &[f64],
    hvdc_schedules: &BTreeMap<BranchId, f64>,
) -> Result<PfSolution, PfError> {
    DcSolver::new(net)?.solve(injections_mw, hvdc_schedules)
}

/// Signed aggregate flow of an interface in MW.
///
/// Members must reference branches of `net` (guaranteed by the case parser);
/// unresolved members are skipped.
pub fn interface_flow(net: &Network, sol: &PfSolution, iface: &Interface) -> f64 {
    iface
        .members
        .iter()
        .filter_map(|(id, sign)| {
            net.branch_position(*id)
                .map(|pos| f64::from(*sign) * sol.branch_flows[pos])
        })
        .sum()
}

/// Percentage power-flow error: recorded minus simulated, over the
/// interface MVA rating.
pub fn interface_error(real_mw: f64, sim_mw: f64, rating_mva: f64) -> Result<f64, PfError> {
    if rating_mva <= 0.0 {
        return Err(PfError::NonpositiveRating(rating_mva));
    }
    Ok((real_mw - sim_mw) / rating_mva)
}

/// Distribution summary of one interface's hourly error series.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceErrorStats {
    pub interface: String,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub p2_5: f64,
    pub p97_5: f64,
    /// `(hour index, value)` pairs beyond the 1.5 IQR whiskers.
    pub outliers: Vec<(usize, f64)>,
    /// Both quartiles within the +/-10% reporting band.
    pub iqr_within_band: bool,
    /// Central 95% interval within the +/-15% reporting band.
    pub p95_within_band: bool,
}

/// Quantile with the linear-interpolation convention `h = (n - 1) p` over
/// ascending data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Box-plot style summary per interface: quartiles, central 95% interval,
/// whisker outliers, and the reporting-band flags.
pub fn error_summary(
    errors: &IndexMap<String, Vec<f64>>,
) -> Result<Vec<InterfaceErrorStats>, PfError> {
    let mut out = Vec::with_capacity(errors.len());
    for (name, series) in errors {
        if series.is_empty() {
            return Err(PfError::EmptySeries(name.clone()));
        }
        let mut sorted = series.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q1 = quantile_sorted(&sorted, 0.25);
        let median = quantile_sorted(&sorted, 0.5);
        let q3 = quantile_sorted(&sorted, 0.75);
        let iqr = q3 - q1;
        let lo_whisker = q1 - 1.5 * iqr;
        let hi_whisker = q3 + 1.5 * iqr;
        let outliers = series
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < lo_whisker || v > hi_whisker)
            .map(|(i, &v)| (i, v))
            .collect();
        let p2_5 = quantile_sorted(&sorted, 0.025);
        let p97_5 = quantile_sorted(&sorted, 0.975);
        out.push(InterfaceErrorStats {
            interface: name.clone(),
            n: series.len(),
            median,
            q1,
            q3,
            iqr,
            p2_5,
            p97_5,
            outliers,
            iqr_within_band: q1 >= -IQR_BAND && q3 <= IQR_BAND,
            p95_within_band: p2_5 >= -P95_BAND && p97_5 <= P95_BAND,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        Branch, BranchStatus, Bus, BusId, BusKind, CostCurve, Fuel, Generator, Network,
    };
    use crate::testgen;

    fn bus(id: u32, kind: BusKind) -> Bus {
        Bus {
            id: BusId(id),
            zone: "Z".to_string(),
            kind,
            base_load: 0.0,
            latitude: None,
            longitude: None,
        }
    }

    fn line(id: u32, from: u32, to: u32, x: f64) -> Branch {
        Branch {
            id: BranchId(id),
            from_bus: BusId(from),
            to_bus: BusId(to),
            resistance: 0.0,
            reactance: x,
            rating: f64::INFINITY,
            status: BranchStatus::InService,
            kind: BranchKind::PhysicalAc,
            name: None,
        }
    }

    fn two_bus() -> Network {
        Network::new(
            100.0,
            vec![bus(1, BusKind::Slack), bus(2, BusKind::Pq)],
            vec![line(1, 1, 2, 0.1)],
            vec![],
        )
    }

    #[test]
    fn single_line_matches_ohm_analog() {
        let net = two_bus();
        // +1 pu at bus 1, -1 pu at bus 2 with base 100 MVA.
        let sol = solve_dcpf(&net, &[100.0, -100.0], &BTreeMap::new()).unwrap();
        assert!((sol.angles[0] - 0.0).abs() < 1e-15);
        assert!((sol.angles[1] + 0.1).abs() < 1e-12);
        assert!((sol.branch_flows[0] - 100.0).abs() < 1e-9);
        assert!((sol.slack_injection - 100.0).abs() < 1e-12);
    }

    #[test]
    fn zero_injections_give_zero_solution() {
        let net = two_bus();
        let sol = solve_dcpf(&net, &[0.0, 0.0], &BTreeMap::new()).unwrap();
        assert_eq!(sol.angles, vec![0.0, 0.0]);
        assert_eq!(sol.branch_flows, vec![0.0]);
        assert_eq!(sol.slack_injection, 0.0);
    }

    #[test]
    fn random_network_matches_independent_dense_oracle() {
        let net = testgen::random_connected_network(7, 12, 1.4);
        let injections = testgen::random_injections(11, net.buses().len(), 80.0);
        let sol = solve_dcpf(&net, &injections, &BTreeMap::new()).unwrap();

        // Independent oracle: assemble B via the incidence-matrix product
        // A^T diag(b) A and solve with LU instead of Cholesky.
        let n = net.buses().len();
        let branches: Vec<_> = net
            .branches()
            .iter()
            .filter(|b| b.carries_impedance())
            .collect();
        let m = branches.len();
        let mut incidence = DMatrix::<f64>::zeros(m, n);
        let mut weights = DMatrix::<f64>::zeros(m, m);
        for (k, br) in branches.iter().enumerate() {
            incidence[(k, net.bus_position(br.from_bus).unwrap())] = 1.0;
            incidence[(k, net.bus_position(br.to_bus).unwrap())] = -1.0;
            weights[(k, k)] = br.susceptance();
        }
        let b_matrix = incidence.transpose() * &weights * &incidence;
        let slack = net.bus_position(net.slack().unwrap().id).unwrap();
        let b_red = b_matrix.remove_row(slack).remove_column(slack);
        let p_red = DVector::from_iterator(
            n - 1,
            injections
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != slack)
                .map(|(_, &v)| v / net.base_mva()),
        );
        let theta_red = b_red.lu().solve(&p_red).expect("oracle solve");
        let mut theta = vec![0.0; n];
        let mut k = 0;
        for (i, t) in theta.iter_mut().enumerate() {
            if i != slack {
                *t = theta_red[k];
                k += 1;
            }
        }
        for (pos, br) in net.branches().iter().enumerate() {
            let i = net.bus_position(br.from_bus).unwrap();
            let j = net.bus_position(br.to_bus).unwrap();
            let oracle = net.base_mva() * (theta[i] - theta[j]) * br.susceptance();
            assert!(
                (sol.branch_flows[pos] - oracle).abs() < 1e-10 * net.base_mva(),
                "branch {}: {} vs {}",
                br.id,
                sol.branch_flows[pos],
                oracle
            );
        }
    }

    #[test]
    fn hvdc_schedule_folds_into_injections() {
        let mut proxy = line(2, 1, 2, 0.0);
        proxy.kind = BranchKind::HvdcProxy;
        proxy.rating = 600.0;
        let net = Network::new(
            100.0,
            vec![bus(1, BusKind::Slack), bus(2, BusKind::Pq)],
            vec![line(1, 1, 2, 0.1), proxy],
            vec![],
        );
        let schedules = BTreeMap::from([(BranchId(2), 600.0)]);
        let sol = solve_dcpf(&net, &[0.0, 0.0], &schedules).unwrap();
        // The proxy moves 600 MW from bus 1 to bus 2; the AC line carries
        // the return flow.
        assert_eq!(sol.branch_flows[1], 600.0);
        assert!((sol.branch_flows[0] + 600.0).abs() < 1e-9);

        // Zero schedule behaves as if the proxy were absent.
        let schedules = BTreeMap::from([(BranchId(2), 0.0)]);
        let sol0 = solve_dcpf(&net, &[50.0, -50.0], &schedules).unwrap();
        let plain = solve_dcpf(&two_bus(), &[50.0, -50.0], &BTreeMap::new()).unwrap();
        assert!((sol0.branch_flows[0] - plain.branch_flows[0]).abs() < 1e-12);

        assert!(matches!(
            solve_dcpf(&net, &[0.0, 0.0], &BTreeMap::new()),
            Err(PfError::MissingHvdcSchedule(BranchId(2)))
        ));
        let bad = BTreeMap::from([(BranchId(1), 10.0)]);
        assert!(matches!(
            solve_dcpf(&net, &[0.0, 0.0], &bad),
            Err(PfError::NotAnHvdcProxy(BranchId(1)))
        ));
    }

    #[test]
    fn solver_is_linear_and_superposes() {
        let net = testgen::random_connected_network(3, 20, 1.5);
        let solver = DcSolver::new(&net).unwrap();
        let p1 = testgen::random_injections(5, 20, 50.0);
        let p2 = testgen::random_injections(6, 20, 50.0);
        let s1 = solver.solve(&p1, &BTreeMap::new()).unwrap();
        let s2 = solver.solve(&p2, &BTreeMap::new()).unwrap();

        let scaled: Vec<f64> = p1.iter().map(|v| v * 2.5).collect();
        let s_scaled = solver.solve(&scaled, &BTreeMap::new()).unwrap();
        for (a, b) in s_scaled.branch_flows.iter().zip(&s1.branch_flows) {
            assert!((a - 2.5 * b).abs() < 1e-9);
        }

        let summed: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a + b).collect();
        let s_sum = solver.solve(&summed, &BTreeMap::new()).unwrap();
        for ((a, b), c) in s_sum
            .branch_flows
            .iter()
            .zip(&s1.branch_flows)
            .zip(&s2.branch_flows)
        {
            assert!((a - (b + c)).abs() < 1e-10 * 100.0);
        }
    }

    #[test]
    fn per_bus_balance_holds() {
        let net = testgen::random_connected_network(9, 15, 1.3);
        let inj = testgen::random_injections(10, 15, 60.0);
        let solver = DcSolver::new(&net).unwrap();
        let sol = solver.solve(&inj, &BTreeMap::new()).unwrap();
        let slack = net.bus_position(net.slack().unwrap().id).unwrap();
        for (pos, b) in net.buses().iter().enumerate() {
            let mut out_flow = 0.0;
            for (bpos, br) in net.branches().iter().enumerate() {
                if br.from_bus == b.id {
                    out_flow += sol.branch_flows[bpos];
                }
                if br.to_bus == b.id {
                    out_flow -= sol.branch_flows[bpos];
                }
            }
            let expected = if pos == slack {
                sol.slack_injection
            } else {
                inj[pos]
            };
            assert!(
                (out_flow - expected).abs() < 1e-9,
                "bus {}: flow {} vs injection {}",
                b.id,
                out_flow,
                expected
            );
        }
    }

    #[test]
    fn moving_the_slack_preserves_flows() {
        let mut net = testgen::random_connected_network(21, 10, 1.5);
        // Balance the injections; the property concerns where the reference
        // sits, not where imbalance is absorbed.
        let mut inj = testgen::random_injections(22, 10, 40.0);
        let mean = inj.iter().sum::<f64>() / inj.len() as f64;
        for v in &mut inj {
            *v -= mean;
        }
        let sol_a = solve_dcpf(&net, &inj, &BTreeMap::new()).unwrap();

        // Rebuild with the slack at a different bus.
        let mut buses = net.buses().to_vec();
        buses[0].kind = BusKind::Pq;
        buses[7].kind = BusKind::Slack;
        net = Network::new(
            net.base_mva(),
            buses,
            net.branches().to_vec(),
            net.generators().to_vec(),
        );
        let sol_b = solve_dcpf(&net, &inj, &BTreeMap::new()).unwrap();
        for (a, b) in sol_a.branch_flows.iter().zip(&sol_b.branch_flows) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn netting_nondispatchable_output_equals_explicit_dispatch() {
        let mut net = testgen::random_connected_network(31, 8, 1.5);
        let gens = vec![Generator {
            id: "W1".to_string(),
            bus: net.buses()[3].id,
            fuel: Fuel::Wind,
            p_max: 100.0,
            p_min: 0.0,
            ramp_hourly: 100.0,
            cost: CostCurve::ZERO,
            dispatchable: false,
        }];
        net = Network::new(
            net.base_mva(),
            net.buses().to_vec(),
            net.branches().to_vec(),
            gens,
        );
        let base_loads: Vec<f64> = (0..8).map(|i| 30.0 + 5.0 * i as f64).collect();

        // Route A: wind dispatched explicitly.
        let mut inj_a = vec![0.0; 8];
        for (i, l) in base_loads.iter().enumerate() {
            inj_a[i] -= l;
        }
        inj_a[3] += 40.0;
        let sol_a = solve_dcpf(&net, &inj_a, &BTreeMap::new()).unwrap();

        // Route B: wind netted from its bus load.
        let mut loads_b = base_loads.clone();
        loads_b[3] -= 40.0;
        let inj_b: Vec<f64> = loads_b.iter().map(|l| -l).collect();
        let sol_b = solve_dcpf(&net, &inj_b, &BTreeMap::new()).unwrap();

        for (a, b) in sol_a.branch_flows.iter().zip(&sol_b.branch_flows) {
            assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in sol_a.angles.iter().zip(&sol_b.angles) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn validated_random_networks_always_factorize() {
        for seed in 0..30 {
            let net = testgen::random_connected_network(seed, 5 + (seed as usize % 40), 1.2);
            assert!(net.validate().is_empty(), "seed {seed}");
            assert!(DcSolver::new(&net).is_ok(), "seed {seed}");
        }
    }

    #[test]
    fn interface_flow_sums_signed_members() {
        let net = testgen::random_connected_network(41, 6, 1.5);
        let inj = testgen::random_injections(42, 6, 50.0);
        let sol = solve_dcpf(&net, &inj, &BTreeMap::new()).unwrap();

        let one = Interface {
            name: "one".to_string(),
            members: vec![(net.branches()[0].id, 1)],
            limit_pos: 100.0,
            limit_neg: -100.0,
        };
        assert_eq!(interface_flow(&net, &sol, &one), sol.branch_flows[0]);

        let cancel = Interface {
            name: "cancel".to_string(),
            members: vec![(net.branches()[0].id, 1), (net.branches()[0].id, -1)],
            limit_pos: 100.0,
            limit_neg: -100.0,
        };
        assert_eq!(interface_flow(&net, &sol, &cancel), 0.0);

        let three = Interface {
            name: "three".to_string(),
            members: vec![
                (net.branches()[0].id, 1),
                (net.branches()[1].id, -1),
                (net.branches()[2].id, 1),
            ],
            limit_pos: 100.0,
            limit_neg: -100.0,
        };
        let by_hand = sol.branch_flows[0] - sol.branch_flows[1] + sol.branch_flows[2];
        assert!((interface_flow(&net, &sol, &three) - by_hand).abs() < 1e-12);
    }

    #[test]
    fn interface_error_matches_hand_values() {
        assert!((interface_error(110.0, 100.0, 1000.0).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(interface_error(55.0, 55.0, 800.0).unwrap(), 0.0);
        assert!((interface_error(-50.0, 30.0, 800.0).unwrap() + 0.1).abs() < 1e-15);
        assert!(matches!(
            interface_error(1.0, 2.0, 0.0),
            Err(PfError::NonpositiveRating(_))
        ));
    }

    #[test]
    fn error_summary_constant_series() {
        let errors = IndexMap::from([("a".to_string(), vec![0.0; 50])]);
        let stats = error_summary(&errors).unwrap();
        assert_eq!(stats[0].median, 0.0);
        assert_eq!(stats[0].q1, 0.0);
        assert_eq!(stats[0].q3, 0.0);
        assert_eq!(stats[0].p2_5, 0.0);
        assert_eq!(stats[0].p97_5, 0.0);
        assert!(stats[0].outliers.is_empty());
        assert!(stats[0].iqr_within_band);
        assert!(stats[0].p95_within_band);
    }

    #[test]
    fn error_summary_symmetric_series_has_zero_median() {
        let series: Vec<f64> = (-10..=10).map(|i| i as f64 / 100.0).collect();
        let errors = IndexMap::from([("sym".to_string(), series)]);
        let stats = error_summary(&errors).unwrap();
        assert!(stats[0].median.abs() < 1e-15);
    }

    #[test]
    fn error_summary_quartiles_match_sort_based_oracle() {
        // Deterministic pseudo-random series.
        let series: Vec<f64> = (0..1000u64)
            .map(|i| {
                let u = ((i.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407)
                    >> 33) as f64)
                    / (1u64 << 31) as f64;
                (u - 0.5) * 0.4
            })
            .collect();
        let errors = IndexMap::from([("r".to_string(), series.clone())]);
        let stats = error_summary(&errors).unwrap();

        // Oracle: sort and interpolate at h = (n-1)p, written independently.
        let mut sorted = series;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let oracle = |p: f64| -> f64 {
            let h = (sorted.len() as f64 - 1.0) * p;
            let i = h as usize;
            let frac = h - i as f64;
            if i + 1 < sorted.len() {
                sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
            } else {
                sorted[i]
            }
        };
        assert!((stats[0].q1 - oracle(0.25)).abs() < 1e-12);
        assert!((stats[0].median - oracle(0.5)).abs() < 1e-12);
        assert!((stats[0].q3 - oracle(0.75)).abs() < 1e-12);
        assert!((stats[0].p2_5 - oracle(0.025)).abs() < 1e-12);
        assert!((stats[0].p97_5 - oracle(0.975)).abs() < 1e-12);
    }

    #[test]
    fn error_summary_rejects_empty_series() {
        let errors = IndexMap::from([("e".to_string(), vec![])]);
        assert!(matches!(
            error_summary(&errors),
            Err(PfError::EmptySeries(_))
        ));
    }

    #[test]
    fn whisker_outliers_are_reported_with_positions() {
        let mut series = vec![0.01; 40];
        series[7] = 5.0;
        series[23] = -4.0;
        let errors = IndexMap::from([("o".to_string(), series)]);
        let stats = error_summary(&errors).unwrap();
        let hours: Vec<usize> = stats[0].outliers.iter().map(|(h, _)| *h).collect();
        assert_eq!(hours, vec![7, 23]);
    }
}
