//! Disaggregation of fleet-level hourly totals into per-unit profiles,
//! zonal load allocation to buses, and external-area rebalancing.
//!
//! Allocators conserve their input total exactly: proportional splits assign
//! the rounding residual to the last element, and any clamping to unit
//! capability is reported as a diagnostic rather than silently absorbed.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BusId, Fuel};

/// Hydro marginal costs are drawn uniformly from this $/MWh range so the
/// dispatch order prioritizes hydro.
pub const HYDRO_COST_RANGE: (f64, f64) = (1.0, 10.0);
/// Nuclear marginal costs are drawn uniformly from this $/MWh range.
pub const NUCLEAR_COST_RANGE: (f64, f64) = (1.0, 3.0);
/// Hydro ten-minute ramp capability as a fraction of capacity.
pub const HYDRO_TEN_MINUTE_RAMP_FRACTION: f64 = 0.9;
/// Nuclear ten-minute ramp capability as a fraction of capacity.
pub const NUCLEAR_TEN_MINUTE_RAMP_FRACTION: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocError {
    #[error("capacity factor {value} out of [0, 1] at position {index}")]
    CfOutOfRange { index: usize, value: f64 },
    #[error("negative total {value} at position {index}")]
    NegativeTotal { index: usize, value: f64 },
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("unit `{0}` missing from capacity table")]
    MissingUnit(String),
    #[error("small-fleet capacity is zero but its share of the total is nonzero")]
    ZeroSmallFleet,
    #[error("total capacity is zero")]
    ZeroCapacity,
    #[error("zone baseline load sums to zero but the zone total is {0}")]
    ZeroBaseline(f64),
    #[error("area `{0}` has nonpositive baseline generation")]
    NonpositiveBaselineGen(String),
    #[error("area `{0}` has nonpositive baseline load but a nonzero load total")]
    ZeroBaselineLoad(String),
    #[error("area `{label}`: generation scale factor {alpha} is negative")]
    NegativeScale { label: String, alpha: f64 },
    #[error("monthly capacity-factor table must have 12 entries, found {0}")]
    BadMonthlyTable(usize),
    #[error("month {0} out of range 1..=12")]
    BadMonth(u32),
}

/// Configuration of the two-plant-plus-fleet hydro split.
///
/// `stl_id` is the storage-style plant driven by a monthly capacity factor;
/// `rmn_id` absorbs the large-plant remainder and with it the diurnal
/// pattern. The small fleet carries `small_share` of the hourly total,
/// split by capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroConfig {
    pub stl_id: String,
    pub rmn_id: String,
    /// Capacity factor of the storage-style plant for months 1..=12.
    pub stl_monthly_cf: Vec<f64>,
    /// Fraction of the hourly hydro total generated by the small fleet.
    #[serde(default = "default_small_share")]
    pub small_share: f64,
}

fn default_small_share() -> f64 {
    0.2
}

impl HydroConfig {
    fn validate(&self) -> Result<(), AllocError> {
        if self.stl_monthly_cf.len() != 12 {
            return Err(AllocError::BadMonthlyTable(self.stl_monthly_cf.len()));
        }
        for (i, &cf) in self.stl_monthly_cf.iter().enumerate() {
            if !(0.0..=1.0).contains(&cf) {
                return Err(AllocError::CfOutOfRange {
                    index: i,
                    value: cf,
                });
            }
        }
        Ok(())
    }
}

/// An external balancing area: its buses, baseline operating point and the
/// profile column carrying its tie flow into the study region.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalArea {
    pub label: String,
    pub buses: Vec<BusId>,
    /// Baseline per-bus load in MW (the reference the hourly load scales).
    pub baseline_load: Vec<(BusId, f64)>,
    /// Baseline per-generator output in MW.
    pub baseline_gen: Vec<(String, f64)>,
    /// Column name of the area-to-study-region tie flow series.
    pub tie_flow_column: String,
}

/// Result of rebalancing an external area for one hour.
#[derive(Debug, Clone, PartialEq)]
pub struct Rebalanced {
    pub loads: Vec<(BusId, f64)>,
    pub outputs: Vec<(String, f64)>,
}

/// Clamp diagnostic emitted when a computed unit output fell outside
/// `[0, capacity]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampEvent {
    pub unit: String,
    pub hour: usize,
    pub raw: f64,
    pub clamped: f64,
}

/// Per-unit hydro series plus any clamp diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroAllocation {
    pub outputs: IndexMap<String, Vec<f64>>,
    pub clamps: Vec<ClampEvent>,
}

/// Output of a nuclear unit: capacity times its hourly capacity factor.
pub fn allocate_nuclear(capacity: f64, cf: &[f64]) -> Result<Vec<f64>, AllocError> {
    for (i, &v) in cf.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(AllocError::CfOutOfRange { index: i, value: v });
        }
    }
    Ok(cf.iter().map(|&v| capacity * v).collect())
}

/// Broadcasts one value per day to `24 * days.len()` hourly values.
pub fn broadcast_daily(daily: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(daily.len() * 24);
    for &v in daily {
        out.extend(std::iter::repeat_n(v, 24));
    }
    out
}

/// Splits the hourly hydro total across units.
///
/// The storage-style plant follows its monthly capacity factor, the large
/// run-of-river plant absorbs the rest of the big-two share, and the small
/// fleet shares `small_share` of the total by capacity. Outputs are clamped
/// to `[0, capacity]` with a [`ClampEvent`] per violation; absent clamps the
/// unit outputs sum to the input total exactly.
pub fn allocate_hydro(
    total: &[f64],
    months: &[u32],
    cfg: &HydroConfig,
    capacities: &IndexMap<String, f64>,
) -> Result<HydroAllocation, AllocError> {
    cfg.validate()?;
    if total.len() != months.len() {
        return Err(AllocError::LengthMismatch(total.len(), months.len()));
    }
    for (i, &v) in total.iter().enumerate() {
        if v < 0.0 {
            return Err(AllocError::NegativeTotal { index: i, value: v });
        }
    }
    let stl_cap = *capacities
        .get(&cfg.stl_id)
        .ok_or_else(|| AllocError::MissingUnit(cfg.stl_id.clone()))?;
    let rmn_cap = *capacities
        .get(&cfg.rmn_id)
        .ok_or_else(|| AllocError::MissingUnit(cfg.rmn_id.clone()))?;

    let small: Vec<(&String, f64)> = capacities
        .iter()
        .filter(|(id, _)| **id != cfg.stl_id && **id != cfg.rmn_id)
        .map(|(id, &cap)| (id, cap))
        .collect();
    let small_cap_total: f64 = small.iter().map(|(_, c)| c).sum();
    let any_generation = total.iter().any(|&t| t > 0.0);
    if cfg.small_share > 0.0 && small_cap_total <= 0.0 && any_generation {
        return Err(AllocError::ZeroSmallFleet);
    }

    let n = total.len();
    let mut outputs: IndexMap<String, Vec<f64>> = IndexMap::new();
    outputs.insert(cfg.stl_id.clone(), Vec::with_capacity(n));
    outputs.insert(cfg.rmn_id.clone(), Vec::with_capacity(n));
    for (id, _) in &small {
        outputs.insert((*id).clone(), Vec::with_capacity(n));
    }
    let mut clamps = Vec::new();

    let clamp = |unit: &str, hour: usize, raw: f64, cap: f64, clamps: &mut Vec<ClampEvent>| {
        let clamped = raw.clamp(0.0, cap);
        if clamped != raw {
            clamps.push(ClampEvent {
                unit: unit.to_string(),
                hour,
                raw,
                clamped,
            });
        }
        clamped
    };

    for t in 0..n {
        let month = months[t];
        if !(1..=12).contains(&month) {
            return Err(AllocError::BadMonth(month));
        }
        let cf = cfg.stl_monthly_cf[(month - 1) as usize];
        let big_share = 1.0 - cfg.small_share;

        let stl_raw = cf * stl_cap;
        let stl = clamp(&cfg.stl_id, t, stl_raw, stl_cap, &mut clamps);
        outputs.get_mut(&cfg.stl_id).unwrap().push(stl);

        let rmn_raw = big_share * total[t] - stl_raw;
        let rmn = clamp(&cfg.rmn_id, t, rmn_raw, rmn_cap, &mut clamps);
        outputs.get_mut(&cfg.rmn_id).unwrap().push(rmn);

        for (id, cap) in &small {
            let raw = if small_cap_total > 0.0 {
                cfg.small_share * total[t] * cap / small_cap_total
            } else {
                0.0
            };
            let v = clamp(id, t, raw, *cap, &mut clamps);
            outputs.get_mut(*id).unwrap().push(v);
        }
    }

    Ok(HydroAllocation { outputs, clamps })
}

/// Capacity-weighted proportional split of an hourly total, used for both
/// wind fleets and other renewables.
pub fn allocate_proportional(
    total: &[f64],
    capacities: &IndexMap<String, f64>,
) -> Result<IndexMap<String, Vec<f64>>, AllocError> {
    let cap_total: f64 = capacities.values().sum();
    if cap_total <= 0.0 {
        return Err(AllocError::ZeroCapacity);
    }
    let mut out: IndexMap<String, Vec<f64>> = capacities
        .keys()
        .map(|id| (id.clone(), Vec::with_capacity(total.len())))
        .collect();
    for &tot in total {
        for (id, &cap) in capacities {
            out.get_mut(id).unwrap().push(tot * cap / cap_total);
        }
    }
    Ok(out)
}

/// Proportional split whose in-order sum reproduces `total` to the last
/// representable digit.
///
/// The last element is recomputed as `total` minus the running sum of the
/// others, then nudged by ulps toward an exact fold. Round-to-even can make
/// an exact hit unattainable (the candidate sums may all land on rounding
/// midpoints), so the guarantee is agreement within one ulp of `total`.
fn proportional_with_residual(total: f64, weights: &[f64]) -> Vec<f64> {
    let weight_sum: f64 = weights.iter().sum();
    let n = weights.len();
    let mut out: Vec<f64> = weights.iter().map(|w| total * w / weight_sum).collect();
    if n == 0 {
        return out;
    }
    let partial: f64 = out[..n - 1].iter().sum();
    let d0 = total - partial;
    out[n - 1] = d0;
    if partial + d0 != total {
        // The rounded residual can miss by an ulp; probe its neighbors.
        let mut up = d0;
        let mut down = d0;
        for _ in 0..2 {
            up = up.next_up();
            down = down.next_down();
            for cand in [up, down] {
                if partial + cand == total {
                    out[n - 1] = cand;
                    return out;
                }
            }
        }
    }
    out
}

/// Allocates a zonal load total to buses proportional to baseline loads.
///
/// The last bus absorbs the floating-point residual so the allocation sums
/// to `zone_total` exactly.
pub fn allocate_zone_load(
    zone_total: f64,
    buses_in_zone: &[BusId],
    baseline_loads: &BTreeMap<BusId, f64>,
) -> Result<Vec<(BusId, f64)>, AllocError> {
    if buses_in_zone.is_empty() {
        return Err(AllocError::ZeroBaseline(zone_total));
    }
    let weights: Vec<f64> = buses_in_zone
        .iter()
        .map(|b| baseline_loads.get(b).copied().unwrap_or(0.0))
        .collect();
    let total_weight: f64 = weights.iter().sum();
    if total_weight <= 0.0 {
        if zone_total == 0.0 {
            return Ok(buses_in_zone.iter().map(|&b| (b, 0.0)).collect());
        }
        return Err(AllocError::ZeroBaseline(zone_total));
    }
    let values = proportional_with_residual(zone_total, &weights);
    Ok(buses_in_zone.iter().copied().zip(values).collect())
}

/// Rescales an external area's loads and generator outputs for one hour.
///
/// Loads scale by `load_total / baseline_load_total` per bus; generation
/// must cover the scaled load plus the tie flow exported to the study
/// region, so every generator scales by
/// `(load_total + tie_flow) / baseline_generation_total`. Residual repair
/// pins the area balance `generation - load = tie_flow` to the last
/// representable digit (one ulp of the evaluated sums).
pub fn rebalance_external(
    area: &ExternalArea,
    load_total: f64,
    tie_flow: f64,
) -> Result<Rebalanced, AllocError> {
    let baseline_gen_total: f64 = area.baseline_gen.iter().map(|(_, p)| p).sum();
    if baseline_gen_total <= 0.0 {
        return Err(AllocError::NonpositiveBaselineGen(area.label.clone()));
    }
    let baseline_load_total: f64 = area.baseline_load.iter().map(|(_, l)| l).sum();
    if baseline_load_total <= 0.0 && load_total != 0.0 {
        return Err(AllocError::ZeroBaselineLoad(area.label.clone()));
    }

    let required_gen = load_total + tie_flow;
    let alpha = required_gen / baseline_gen_total;
    if alpha < 0.0 {
        return Err(AllocError::NegativeScale {
            label: area.label.clone(),
            alpha,
        });
    }

    let loads = if baseline_load_total > 0.0 {
        let weights: Vec<f64> = area.baseline_load.iter().map(|(_, l)| *l).collect();
        let values = proportional_with_residual(load_total, &weights);
        area.baseline_load
            .iter()
            .map(|(bus, _)| *bus)
            .zip(values)
            .collect()
    } else {
        area.baseline_load.iter().map(|(bus, _)| (*bus, 0.0)).collect()
    };

    let gen_weights: Vec<f64> = area.baseline_gen.iter().map(|(_, p)| *p).collect();
    let gen_values = proportional_with_residual(required_gen, &gen_weights);
    let outputs = area
        .baseline_gen
        .iter()
        .map(|(id, _)| id.clone())
        .zip(gen_values)
        .collect();

    Ok(Rebalanced { loads, outputs })
}

/// Output of the proxy generator standing in for an unmodeled external
/// area: exactly the recorded tie flow. A negative flow (an export to that
/// area) is passed through with a diagnostic.
pub fn hq_injection(tie_flow: f64) -> (f64, Option<String>) {
    if tie_flow < 0.0 {
        (
            tie_flow,
            Some(format!(
                "tie flow {tie_flow} MW is negative: export to the external area"
            )),
        )
    } else {
        (tie_flow, None)
    }
}

/// Converts a ten-minute ramp capability (fraction of capacity) to an
/// hourly MW/h rate, capped at full capacity.
pub fn hourly_ramp_from_ten_minute(ten_minute_fraction: f64, p_max: f64) -> f64 {
    (ten_minute_fraction * 6.0 * p_max).min(p_max)
}

/// Draws marginal costs for zero-fuel-cost units from the documented ranges
/// (hydro and nuclear uniform, wind and other renewables zero) using a
/// seeded generator so runs are reproducible. Units with other fuels are
/// skipped. Draw order follows the input order.
pub fn assign_random_costs(units: &[(String, Fuel)], seed: u64) -> BTreeMap<String, f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hydro = Uniform::new_inclusive(HYDRO_COST_RANGE.0, HYDRO_COST_RANGE.1);
    let nuclear = Uniform::new_inclusive(NUCLEAR_COST_RANGE.0, NUCLEAR_COST_RANGE.1);
    let mut out = BTreeMap::new();
    for (id, fuel) in units {
        let c1 = match fuel {
            Fuel::Hydro => hydro.sample(&mut rng),
            Fuel::Nuclear => nuclear.sample(&mut rng),
            Fuel::Wind | Fuel::OtherRenewable => 0.0,
            _ => continue,
        };
        out.insert(id.clone(), c1);
    }
    out
}

/// Top-level allocation run configuration, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationConfig {
    /// Seed for every random draw in the run.
    #[serde(default)]
    pub seed: u64,
    pub hydro: Option<HydroConfig>,
    /// External balancing areas, rebalanced hourly from tie-flow data.
    #[serde(default)]
    pub external: Vec<ExternalAreaConfig>,
    /// Per-zone multiplier applied to recorded thermal outputs, covering
    /// fleets whose telemetry undercounts actual generation.
    #[serde(default)]
    pub thermal_zone_scale: BTreeMap<String, f64>,
    /// Proxy generator fixed to a recorded tie flow.
    pub import_proxy: Option<ImportProxyConfig>,
}

impl AllocationConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// TOML form of an external area; baseline loads are taken from the case's
/// bus `base_load` values, so only the generator baseline needs spelling
/// out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalAreaConfig {
    pub label: String,
    pub buses: Vec<u32>,
    /// Column of the hourly area load series.
    pub load_column: String,
    /// Column of the hourly tie-flow series (positive into the study region).
    pub tie_flow_column: String,
    /// Baseline generator outputs in MW, keyed by generator id.
    pub baseline_gen: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportProxyConfig {
    pub unit: String,
    pub tie_flow_column: String,
}
