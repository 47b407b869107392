//! Statistical comparison of simulated and reference series: Pearson
//! correlation per zone, configured extreme-value filtering with an audit
//! log, band-based outlier identification, and cost-scaling scenario
//! re-runs.

use std::collections::BTreeMap;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dcopf::{hourly_opf_run, HourInputs, OpfError, OpfRunResult};
use crate::model::{Interface, Network};
use crate::profile::HourlyProfile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("series `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("profiles cover different hours")]
    IndexMismatch,
    #[error("column `{0}` missing from the {1} profile")]
    MissingColumn(String, &'static str),
}

/// Product-moment correlation via a single pass of co-moment updates.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, ValidationError> {
    if x.len() != y.len() {
        return Err(ValidationError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(ValidationError::TooFewPoints(x.len()));
    }
    let mut mean_x = 0.0;
    let mut mean_y = 0.0;
    let mut m2_x = 0.0;
    let mut m2_y = 0.0;
    let mut co = 0.0;
    for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
        let k = (i + 1) as f64;
        let dx = xi - mean_x;
        mean_x += dx / k;
        let dy = yi - mean_y;
        mean_y += dy / k;
        // Each co-moment pairs the pre-update delta with the post-update
        // residual.
        m2_x += dx * (xi - mean_x);
        co += dx * (yi - mean_y);
        m2_y += dy * (yi - mean_y);
    }
    if m2_x <= 0.0 {
        return Err(ValidationError::ZeroVariance("x".to_string()));
    }
    if m2_y <= 0.0 {
        return Err(ValidationError::ZeroVariance("y".to_string()));
    }
    Ok(co / (m2_x * m2_y).sqrt())
}

/// Extreme-value thresholds for one zone. Any violated rule removes the
/// point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ZoneRule {
    /// Remove points with `|value| > max_abs`.
    pub max_abs: Option<f64>,
    /// Remove points below this value.
    pub min: Option<f64>,
    /// Remove points above this value.
    pub max: Option<f64>,
}

impl ZoneRule {
    fn violation(&self, value: f64) -> Option<String> {
        if let Some(cap) = self.max_abs {
            if value.abs() > cap {
                return Some(format!("|{value}| exceeds {cap}"));
            }
        }
        if let Some(lo) = self.min {
            if value < lo {
                return Some(format!("{value} below {lo}"));
            }
        }
        if let Some(hi) = self.max {
            if value > hi {
                return Some(format!("{value} above {hi}"));
            }
        }
        None
    }
}

/// A point removed by [`filter_extremes`], with the reason kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilteredPoint {
    pub timestamp: NaiveDateTime,
    pub zone: String,
    pub value: f64,
    pub reason: String,
}

/// Removes points violating the zone's thresholds, logging each removal.
/// Without a rule the series passes through untouched.
pub fn filter_extremes(
    series: &[(NaiveDateTime, f64)],
    zone: &str,
    rule: Option<&ZoneRule>,
) -> (Vec<(NaiveDateTime, f64)>, Vec<FilteredPoint>) {
    let Some(rule) = rule else {
        return (series.to_vec(), Vec::new());
    };
    let mut kept = Vec::with_capacity(series.len());
    let mut log = Vec::new();
    for &(ts, v) in series {
        match rule.violation(v) {
            Some(reason) => log.push(FilteredPoint {
                timestamp: ts,
                zone: zone.to_string(),
                value: v,
                reason,
            }),
            None => kept.push((ts, v)),
        }
    }
    (kept, log)
}

/// A simulated point further than the band from its reference value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutlierPoint {
    pub index: usize,
    pub real: f64,
    pub sim: f64,
}

/// Points where `|sim - real| > band`. The band must be positive.
pub fn find_outliers(real: &[f64], sim: &[f64], band: f64) -> Vec<OutlierPoint> {
    debug_assert!(band > 0.0, "outlier band must be positive");
    real.iter()
        .zip(sim)
        .enumerate()
        .filter(|(_, (r, s))| (*s - *r).abs() > band)
        .map(|(index, (&real, &sim))| OutlierPoint { index, real, sim })
        .collect()
}

/// A named season as explicit date ranges (inclusive), so spans crossing a
/// year boundary are spelled out rather than inferred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonSpec {
    pub name: String,
    /// Inclusive `(start, end)` date pairs.
    pub ranges: Vec<(NaiveDate, NaiveDate)>,
}

impl SeasonSpec {
    pub fn contains(&self, ts: NaiveDateTime) -> bool {
        let d = ts.date();
        self.ranges.iter().any(|(a, b)| *a <= d && d <= *b)
    }
}

/// Validation run configuration, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    /// Outlier band in $/MWh.
    #[serde(default = "default_band")]
    pub band: f64,
    /// Per-zone extreme-value rules applied to the reference series.
    #[serde(default)]
    pub zones: BTreeMap<String, ZoneRule>,
    /// Optional seasonal splits; with none, one all-hours report is made.
    #[serde(default)]
    pub seasons: Vec<SeasonSpec>,
}

fn default_band() -> f64 {
    30.0
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            band: default_band(),
            zones: BTreeMap::new(),
            seasons: Vec::new(),
        }
    }
}

impl ValidationConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// Per-zone comparison of simulated against reference series.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub season: String,
    /// Pearson correlation per zone over the filtered pairs; zones whose
    /// filtered series are degenerate are reported under `skipped`.
    pub correlation: BTreeMap<String, f64>,
    pub filtered: Vec<FilteredPoint>,
    pub outliers: BTreeMap<String, Vec<OutlierPoint>>,
    pub skipped: BTreeMap<String, String>,
    /// Hours × zones compared after filtering.
    pub points_used: BTreeMap<String, usize>,
}

/// Compares simulated zonal series against a reference profile: filtering
/// on the reference values, correlation and band outliers per shared zone.
/// Both profiles must cover the same hours; zones present in `sim` must
/// exist in `real`. With a season given, only its hours enter the
/// comparison (seasons are typically non-contiguous, e.g. a December plus
/// the following January).
pub fn compare_lmps(
    real: &HourlyProfile,
    sim: &HourlyProfile,
    config: &ValidationConfig,
    season: Option<&SeasonSpec>,
) -> Result<ComparisonReport, ValidationError> {
    if real.index() != sim.index() {
        return Err(ValidationError::IndexMismatch);
    }
    let mut report = ComparisonReport {
        season: season.map(|s| s.name.clone()).unwrap_or_else(|| "all".to_string()),
        correlation: BTreeMap::new(),
        filtered: Vec::new(),
        outliers: BTreeMap::new(),
        skipped: BTreeMap::new(),
        points_used: BTreeMap::new(),
    };
    let in_season =
        |ts: NaiveDateTime| -> bool { season.map(|s| s.contains(ts)).unwrap_or(true) };
    for zone in sim.column_names() {
        let sim_col = sim.column(zone).unwrap();
        let real_col = real
            .column(zone)
            .ok_or_else(|| ValidationError::MissingColumn(zone.to_string(), "reference"))?;

        let pairs: Vec<(NaiveDateTime, f64)> = real
            .index()
            .iter()
            .copied()
            .zip(real_col.iter().copied())
            .filter(|(ts, _)| in_season(*ts))
            .collect();
        let (kept, log) = filter_extremes(&pairs, zone, config.zones.get(zone));
        report.filtered.extend(log);

        let kept_real: Vec<f64> = kept.iter().map(|(_, v)| *v).collect();
        let kept_sim: Vec<f64> = kept
            .iter()
            .map(|(ts, _)| sim_col[real.position(*ts).unwrap()])
            .collect();
        report.points_used.insert(zone.to_string(), kept.len());

        match pearson(&kept_real, &kept_sim) {
            Ok(r) => {
                report.correlation.insert(zone.to_string(), r);
            }
            Err(e) => {
                report.skipped.insert(zone.to_string(), e.to_string());
            }
        }
        report.outliers.insert(
            zone.to_string(),
            find_outliers(&kept_real, &kept_sim, config.band),
        );
    }
    Ok(report)
}

/// Outcome of re-solving hours with every marginal cost scaled.
#[derive(Debug)]
pub struct ScenarioReport {
    pub scale: f64,
    pub run: OpfRunResult,
    /// Mean scenario-minus-base zonal LMP over hours solved in both runs.
    pub zone_delta: BTreeMap<String, f64>,
    /// Mean `|sim - real|` per zone for the base run, when a reference was
    /// given.
    pub residual_base: BTreeMap<String, f64>,
    /// Mean `|sim - real|` per zone for the scenario run.
    pub residual_scenario: BTreeMap<String, f64>,
}

/// Re-solves the given hours with `OpfProblem::scale = scale` and compares
/// zonal LMPs against the base run (and a reference profile if supplied,
/// whose index must cover the run's timestamps).
pub fn scenario_rescale(
    net: &Network,
    interfaces: &[Interface],
    base: &OpfRunResult,
    hours: &[HourInputs],
    scale: f64,
    reference: Option<&HourlyProfile>,
) -> Result<ScenarioReport, OpfError> {
    let run = hourly_opf_run(net, interfaces, &base.timestamps, hours, scale, false)?;

    let mut delta_acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut base_acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut scen_acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();

    for (i, ts) in base.timestamps.iter().enumerate() {
        let (Some(b), Some(s)) = (&base.solutions[i], &run.solutions[i]) else {
            continue;
        };
        for (zone, s_lmp) in &s.zonal_lmp {
            if let Some(b_lmp) = b.zonal_lmp.get(zone) {
                let e = delta_acc.entry(zone.clone()).or_insert((0.0, 0));
                e.0 += s_lmp - b_lmp;
                e.1 += 1;
            }
            if let Some(reference) = reference {
                if let (Some(pos), Some(col)) = (reference.position(*ts), reference.column(zone)) {
                    let real = col[pos];
                    let eb = base_acc.entry(zone.clone()).or_insert((0.0, 0));
                    eb.0 += (b.zonal_lmp[zone] - real).abs();
                    eb.1 += 1;
                    let es = scen_acc.entry(zone.clone()).or_insert((0.0, 0));
                    es.0 += (s_lmp - real).abs();
                    es.1 += 1;
                }
            }
        }
    }

    let mean = |acc: BTreeMap<String, (f64, usize)>| -> BTreeMap<String, f64> {
        acc.into_iter()
            .map(|(z, (sum, n))| (z, sum / n.max(1) as f64))
            .collect()
    };

    Ok(ScenarioReport {
        scale,
        run,
        zone_delta: mean(delta_acc),
        residual_base: mean(base_acc),
        residual_scenario: mean(scen_acc),
    })
}
