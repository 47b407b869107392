//! Deterministic generators for randomized connected networks and injection
//! vectors, used by the property and acceptance test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Branch, BranchId, BranchKind, BranchStatus, Bus, BusId, BusKind, Network};

/// Builds a connected random network: a random spanning tree plus roughly
/// `extra_edge_factor * n` extra edges, reactances in [0.02, 0.5] pu,
/// bus 1 as slack, base 100 MVA.
pub fn random_connected_network(seed: u64, n_buses: usize, extra_edge_factor: f64) -> Network {
    assert!(n_buses >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let buses: Vec<Bus> = (1..=n_buses as u32)
        .map(|id| Bus {
            id: BusId(id),
            zone: "Z".to_string(),
            kind: if id == 1 { BusKind::Slack } else { BusKind::Pq },
            base_load: 0.0,
            latitude: None,
            longitude: None,
        })
        .collect();

    let mut branches = Vec::new();
    let mut next_id = 1u32;
    let mut add = |branches: &mut Vec<Branch>, from: u32, to: u32, x: f64| {
        branches.push(Branch {
            id: BranchId(next_id),
            from_bus: BusId(from),
            to_bus: BusId(to),
            resistance: 0.0,
            reactance: x,
            rating: f64::INFINITY,
            status: BranchStatus::InService,
            kind: BranchKind::PhysicalAc,
            name: None,
        });
        next_id += 1;
    };

    // Random spanning tree keeps the graph connected by construction.
    for i in 2..=n_buses as u32 {
        let j = rng.gen_range(1..i);
        let x = rng.gen_range(0.02..0.5);
        add(&mut branches, j, i, x);
    }
    let extra = (n_buses as f64 * extra_edge_factor) as usize;
    for _ in 0..extra {
        let a = rng.gen_range(1..=n_buses as u32);
        let b = rng.gen_range(1..=n_buses as u32);
        if a == b {
            continue;
        }
        let x = rng.gen_range(0.02..0.5);
        add(&mut branches, a, b, x);
    }

    Network::new(100.0, buses, branches, vec![])
}

/// Uniform random injections in `[-scale_mw, scale_mw]`.
pub fn random_injections(seed: u64, n: usize, scale_mw: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-scale_mw..scale_mw)).collect()
}
