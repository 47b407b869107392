//! Grid modeling toolkit for regional power-system studies.
//!
//! The crate covers the full pipeline from raw public-style datasets to
//! validated market simulations:
//!
//! * [`model`]: immutable network, generator, interface and time-series types
//! * [`ingest`]: parsers for the case format, hourly CSV series and fuel prices
//! * [`paramfit`]: thermal parameter estimation from unit-level hourly records
//! * [`allocation`]: disaggregation of fleet totals into per-unit profiles and
//!   external-area rebalancing
//! * [`reduction`]: Ward-type DC network equivalents
//! * [`dcpf`]: DC power flow and interface-error statistics
//! * [`lp`]: bounded-variable simplex solver with dual extraction
//! * [`dcopf`]: hourly DC optimal power flow with nodal and zonal LMPs
//! * [`validation`]: statistical comparison of simulated and reference series

pub mod allocation;
pub mod dcopf;
pub mod dcpf;
pub mod ingest;
pub mod lp;
pub mod model;
pub mod paramfit;
pub mod profile;
pub mod reduction;
pub mod testgen;
pub mod validation;

pub use model::{
    net_injections, validate_network, Branch, BranchId, BranchKind, BranchStatus, Bus, BusId,
    BusKind, CostCurve, Fuel, Generator, Interface, Network,
};
pub use profile::HourlyProfile;
