//! Thermal-generator parameter estimation from unit-level hourly records:
//! heat-rate regression, capability limits, ramp rates and cost curves.

use std::collections::BTreeMap;

use chrono::Duration;
use thiserror::Error;

use crate::ingest::UnitHourlyRecord;
use crate::model::{CostCurve, Fuel};

/// Fits with a coefficient of determination below this are flagged as low
/// quality; typical well-instrumented units fit well above it.
pub const R_SQUARED_QUALITY_THRESHOLD: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} positive-output records, found {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("all positive outputs are equal ({0} MWh); slope is undefined")]
    DegenerateOutputs(f64),
    #[error("no consecutive-hour record pairs")]
    NoConsecutivePairs,
    #[error("fuel price must be nonnegative, got {0}")]
    NegativePrice(f64),
    #[error("nameplate capacity must be positive, got {0}")]
    NonpositiveNameplate(f64),
    #[error("no heat-rate table entry for unit type `{unit_type}` with fuel `{fuel}`")]
    MissingTableEntry { unit_type: String, fuel: Fuel },
}

/// Linear heat-rate fit `heat_input = slope * power_output + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatRateFit {
    /// MMBtu per MWh.
    pub slope: f64,
    /// MMBtu per hour.
    pub intercept: f64,
    pub r_squared: f64,
    /// Number of positive-output records used.
    pub n_points: usize,
    /// Set when `r_squared` falls below [`R_SQUARED_QUALITY_THRESHOLD`];
    /// typical for turbines that run only a few hours a year.
    pub low_quality: bool,
}

/// Ordinary least squares of heat input on power output.
///
/// Zero-output hours are excluded before fitting: offline hours carry no
/// information about the operating curve and would bias the intercept.
pub fn fit_heat_rate(records: &[UnitHourlyRecord]) -> Result<HeatRateFit, FitError> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.power_output > 0.0)
        .map(|r| (r.power_output, r.heat_input))
        .collect();
    if pts.len() < 2 {
        return Err(FitError::InsufficientData {
            needed: 2,
            found: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::DegenerateOutputs(pts[0].0));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;

    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    // A constant heat-input series fit exactly by the line gives R^2 = 1.
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };

    Ok(HeatRateFit {
        slope,
        intercept,
        r_squared,
        n_points: pts.len(),
        low_quality: r_squared < R_SQUARED_QUALITY_THRESHOLD,
    })
}

/// Maximum observed output and the nearest-rank 5th percentile of positive
/// outputs, as `(p_max, p_min)` in MW.
pub fn extract_limits(records: &[UnitHourlyRecord]) -> Result<(f64, f64), FitError> {
    let mut outputs: Vec<f64> = records
        .iter()
        .map(|r| r.power_output)
        .filter(|&p| p > 0.0)
        .collect();
    if outputs.is_empty() {
        return Err(FitError::InsufficientData {
            needed: 1,
            found: 0,
        });
    }
    outputs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let p_max = *outputs.last().unwrap();
    let p_min = nearest_rank_percentile(&outputs, 5.0);
    Ok((p_max, p_min))
}

/// Nearest-rank percentile over pre-sorted ascending data:
/// the value at rank `ceil(p/100 * n)`.
fn nearest_rank_percentile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Largest absolute hour-to-hour output change in MW/h.
///
/// Downward deltas whose next-hour output is zero are excluded so that unit
/// shutdowns do not masquerade as ramp capability. Records are sorted by
/// timestamp; only pairs exactly one hour apart count.
pub fn extract_ramp(records: &[UnitHourlyRecord]) -> Result<f64, FitError> {
    let mut recs: Vec<&UnitHourlyRecord> = records.iter().collect();
    recs.sort_by_key(|r| r.timestamp);
    let mut best: Option<f64> = None;
    for pair in recs.windows(2) {
        if pair[1].timestamp - pair[0].timestamp != Duration::hours(1) {
            continue;
        }
        let (p0, p1) = (pair[0].power_output, pair[1].power_output);
        if p1 == 0.0 && p1 < p0 {
            continue; // shutdown, not a ramp
        }
        let delta = (p1 - p0).abs();
        best = Some(best.map_or(delta, |b: f64| b.max(delta)));
    }
    best.ok_or(FitError::NoConsecutivePairs)
}

/// Scales a heat-rate fit by the fuel price to get a $/h cost curve.
pub fn make_cost_curve(fit: &HeatRateFit, fuel_price: f64) -> Result<CostCurve, FitError> {
    if fuel_price < 0.0 {
        return Err(FitError::NegativePrice(fuel_price));
    }
    Ok(CostCurve {
        c1: fit.slope * fuel_price,
        c0: fit.intercept * fuel_price,
    })
}

/// Standard heat rates keyed by `(unit_type, fuel)`, loaded from a
/// user-editable CSV with columns `unit_type, fuel, heat_rate_mmbtu_per_mwh`.
#[derive(Debug, Clone, Default)]
pub struct HeatRateTable {
    entries: BTreeMap<(String, Fuel), f64>,
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad header `{0}`, expected unit_type,fuel,heat_rate_mmbtu_per_mwh")]
    BadHeader(String),
    #[error("row {row}: unknown fuel `{fuel}`")]
    UnknownFuel { row: usize, fuel: String },
    #[error("row {row}: bad heat rate `{value}`")]
    BadHeatRate { row: usize, value: String },
}

impl HeatRateTable {
    pub fn parse_csv(text: &str) -> Result<Self, TableError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let headers: Vec<&str> = reader.headers()?.iter().map(str::trim).collect();
        if headers != ["unit_type", "fuel", "heat_rate_mmbtu_per_mwh"] {
            return Err(TableError::BadHeader(headers.join(",")));
        }
        let mut entries = BTreeMap::new();
        for (i, record) in reader.records().enumerate() {
            let row = i + 2;
            let record = record?;
            let unit_type = record.get(0).unwrap_or("").trim().to_string();
            let fuel_raw = record.get(1).unwrap_or("").trim();
            let fuel = Fuel::from_token(fuel_raw).ok_or_else(|| TableError::UnknownFuel {
                row,
                fuel: fuel_raw.to_string(),
            })?;
            let rate_raw = record.get(2).unwrap_or("").trim();
            let rate: f64 = rate_raw.parse().map_err(|_| TableError::BadHeatRate {
                row,
                value: rate_raw.to_string(),
            })?;
            entries.insert((unit_type, fuel), rate);
        }
        Ok(HeatRateTable { entries })
    }

    pub fn heat_rate(&self, unit_type: &str, fuel: Fuel) -> Option<f64> {
        self.entries.get(&(unit_type.to_string(), fuel)).copied()
    }

    pub fn insert(&mut self, unit_type: &str, fuel: Fuel, rate: f64) {
        self.entries.insert((unit_type.to_string(), fuel), rate);
    }
}

/// Parameters for a small unit without usable hourly records.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallUnitParams {
    pub p_max: f64,
    pub p_min: f64,
    pub ramp_hourly: f64,
    /// Standard heat rate in MMBtu/MWh from the lookup table.
    pub heat_rate: f64,
    pub cost: CostCurve,
}

/// Defaults for small units: full nameplate range, one-hour full ramp, and a
/// cost curve from the standard heat-rate table entry for `(unit_type, fuel)`.
pub fn default_small_unit(
    nameplate: f64,
    unit_type: &str,
    fuel: Fuel,
    table: &HeatRateTable,
    fuel_price: f64,
) -> Result<SmallUnitParams, FitError> {
    if nameplate <= 0.0 {
        return Err(FitError::NonpositiveNameplate(nameplate));
    }
    if fuel_price < 0.0 {
        return Err(FitError::NegativePrice(fuel_price));
    }
    let heat_rate = table
        .heat_rate(unit_type, fuel)
        .ok_or_else(|| FitError::MissingTableEntry {
            unit_type: unit_type.to_string(),
            fuel,
        })?;
    Ok(SmallUnitParams {
        p_max: nameplate,
        p_min: 0.0,
        ramp_hourly: nameplate,
        heat_rate,
        cost: CostCurve {
            c1: heat_rate * fuel_price,
            c0: 0.0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDateTime;
    use proptest::prelude::*;

    fn rec(hour: i64, heat: f64, power: f64) -> UnitHourlyRecord {
        let t0 =
            NaiveDateTime::parse_from_str("2019-01-01T00:00:00", "%Y-%m-%dT%H:%M:%S").unwrap();
        UnitHourlyRecord {
            unit: "U".to_string(),
            timestamp: t0 + Duration::hours(hour),
            heat_input: heat,
            power_output: power,
        }
    }

    #[test]
    fn exact_line_is_recovered() {
        let records: Vec<_> = (1..=10)
            .map(|i| {
                let p = i as f64 * 10.0;
                rec(i, 10.0 * p + 5.0, p)
            })
            .collect();
        let fit = fit_heat_rate(&records).unwrap();
        assert!((fit.slope - 10.0).abs() < 1e-12);
        assert!((fit.intercept - 5.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(!fit.low_quality);
    }

    #[test]
    fn two_point_line() {
        let records = vec![rec(0, 105.0, 10.0), rec(1, 205.0, 20.0)];
        let fit = fit_heat_rate(&records).unwrap();
        assert!((fit.slope - 10.0).abs() < 1e-12);
        assert!((fit.intercept - 5.0).abs() < 1e-12);
        assert_eq!(fit.n_points, 2);
    }

    #[test]
    fn noisy_fit_matches_closed_form_oracle() {
        // Deterministic pseudo-noise around heat = 8 p + 2.
        let records: Vec<_> = (0..100u64)
            .map(|i| {
                let p = 50.0 + (i as f64 * 0.7).sin() * 30.0 + i as f64 * 0.1;
                let noise = ((i * 2654435761 % 1000) as f64 / 1000.0 - 0.5) * 4.0;
                rec(i as i64, 8.0 * p + 2.0 + noise, p)
            })
            .collect();
        let fit = fit_heat_rate(&records).unwrap();

        // Independent closed-form OLS on the same points.
        let n = records.len() as f64;
        let sx: f64 = records.iter().map(|r| r.power_output).sum();
        let sy: f64 = records.iter().map(|r| r.heat_input).sum();
        let sxx: f64 = records
            .iter()
            .map(|r| r.power_output * r.power_output)
            .sum();
        let sxy: f64 = records
            .iter()
            .map(|r| r.power_output * r.heat_input)
            .sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;

        assert!((fit.slope - slope).abs() <= 1e-9 * slope.abs());
        assert!((fit.intercept - intercept).abs() <= 1e-9 * intercept.abs().max(1.0));
    }

    #[test]
    fn zero_output_hours_are_excluded() {
        let mut records = vec![rec(0, 999.0, 0.0), rec(1, 50.0, 0.0)];
        records.push(rec(2, 105.0, 10.0));
        records.push(rec(3, 205.0, 20.0));
        let fit = fit_heat_rate(&records).unwrap();
        assert_eq!(fit.n_points, 2);
        assert!((fit.slope - 10.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_insufficient_data_error() {
        assert!(matches!(
            fit_heat_rate(&[rec(0, 1.0, 5.0)]),
            Err(FitError::InsufficientData { .. })
        ));
        assert!(matches!(
            fit_heat_rate(&[rec(0, 1.0, 5.0), rec(1, 2.0, 5.0)]),
            Err(FitError::DegenerateOutputs(_))
        ));
    }

    #[test]
    fn low_r_squared_sets_quality_flag() {
        // A scattered turbine: noise swamps the trend over its few run hours.
        let records = vec![
            rec(0, 100.0, 10.0),
            rec(1, 400.0, 11.0),
            rec(2, 80.0, 12.0),
            rec(3, 500.0, 13.0),
            rec(4, 90.0, 14.0),
            rec(5, 450.0, 15.0),
        ];
        let fit = fit_heat_rate(&records).unwrap();
        assert!(fit.r_squared < R_SQUARED_QUALITY_THRESHOLD);
        assert!(fit.low_quality);
    }

    #[test]
    fn residuals_are_orthogonal_to_regressors() {
        let records: Vec<_> = (0..50u64)
            .map(|i| {
                let p = 20.0 + i as f64 * 3.0;
                let noise = ((i * 40503 % 97) as f64 - 48.0) / 10.0;
                rec(i as i64, 9.0 * p + 4.0 + noise, p)
            })
            .collect();
        let fit = fit_heat_rate(&records).unwrap();
        let residuals: Vec<f64> = records
            .iter()
            .map(|r| r.heat_input - (fit.slope * r.power_output + fit.intercept))
            .collect();
        let scale: f64 = records.iter().map(|r| r.heat_input.abs()).sum::<f64>();
        let dot_x: f64 = residuals
            .iter()
            .zip(&records)
            .map(|(e, r)| e * r.power_output)
            .sum();
        let dot_1: f64 = residuals.iter().sum();
        assert!(dot_x.abs() <= 1e-9 * scale * 200.0, "dot_x = {dot_x}");
        assert!(dot_1.abs() <= 1e-9 * scale, "dot_1 = {dot_1}");
    }

    #[test]
    fn limits_max_and_fifth_percentile() {
        let records: Vec<_> = [100.0, 200.0, 300.0]
            .iter()
            .enumerate()
            .map(|(i, &p)| rec(i as i64, p * 10.0, p))
            .collect();
        let (p_max, _) = extract_limits(&records).unwrap();
        assert_eq!(p_max, 300.0);

        // Outputs 1..=100: nearest-rank 5th percentile is the 5th value.
        let records: Vec<_> = (1..=100).map(|i| rec(i, 0.0, i as f64)).collect();
        let (p_max, p_min) = extract_limits(&records).unwrap();
        assert_eq!(p_max, 100.0);
        assert_eq!(p_min, 5.0);
    }

    #[test]
    fn single_record_degenerates_to_equal_limits() {
        let records = vec![rec(0, 500.0, 50.0)];
        let (p_max, p_min) = extract_limits(&records).unwrap();
        assert_eq!(p_max, 50.0);
        assert_eq!(p_min, 50.0);
    }

    #[test]
    fn limits_require_positive_output() {
        let records = vec![rec(0, 0.0, 0.0)];
        assert!(extract_limits(&records).is_err());
    }

    #[test]
    fn ramp_takes_max_absolute_delta() {
        let records = vec![rec(0, 0.0, 100.0), rec(1, 0.0, 150.0), rec(2, 0.0, 120.0)];
        assert_eq!(extract_ramp(&records).unwrap(), 50.0);
    }

    #[test]
    fn shutdown_deltas_are_excluded() {
        let records = vec![
            rec(0, 0.0, 200.0),
            rec(1, 0.0, 0.0), // shutdown: excluded
            rec(10, 0.0, 200.0),
            rec(11, 0.0, 160.0),
        ];
        assert_eq!(extract_ramp(&records).unwrap(), 40.0);
    }

    #[test]
    fn startup_deltas_count() {
        let records = vec![rec(0, 0.0, 0.0), rec(1, 0.0, 120.0)];
        assert_eq!(extract_ramp(&records).unwrap(), 120.0);
    }

    #[test]
    fn constant_output_has_zero_ramp() {
        let records = vec![rec(0, 0.0, 75.0), rec(1, 0.0, 75.0), rec(2, 0.0, 75.0)];
        assert_eq!(extract_ramp(&records).unwrap(), 0.0);
    }

    #[test]
    fn gap_only_records_have_no_pairs() {
        let records = vec![rec(0, 0.0, 10.0), rec(5, 0.0, 20.0)];
        assert!(matches!(
            extract_ramp(&records),
            Err(FitError::NoConsecutivePairs)
        ));
    }

    #[test]
    fn cost_curve_is_heat_rate_times_price() {
        let fit = HeatRateFit {
            slope: 10.0,
            intercept: 5.0,
            r_squared: 1.0,
            n_points: 10,
            low_quality: false,
        };
        let c = make_cost_curve(&fit, 3.0).unwrap();
        assert_eq!(c.c1, 30.0);
        assert_eq!(c.c0, 15.0);

        let zero = make_cost_curve(&fit, 0.0).unwrap();
        assert_eq!(zero.c1, 0.0);
        assert_eq!(zero.c0, 0.0);

        let fit2 = HeatRateFit {
            slope: 8.2,
            intercept: 1.1,
            ..fit
        };
        let c2 = make_cost_curve(&fit2, 2.5).unwrap();
        assert!((c2.c1 - 20.5).abs() < 1e-12);
        assert!((c2.c0 - 2.75).abs() < 1e-12);

        assert!(matches!(
            make_cost_curve(&fit2, -1.0),
            Err(FitError::NegativePrice(_))
        ));
    }

    #[test]
    fn small_unit_defaults() {
        let mut table = HeatRateTable::default();
        table.insert("combustion-turbine", Fuel::Gas, 11.0);
        table.insert("steam", Fuel::Oil, 13.0);

        let p = default_small_unit(20.0, "combustion-turbine", Fuel::Gas, &table, 3.0).unwrap();
        assert_eq!(p.p_max, 20.0);
        assert_eq!(p.p_min, 0.0);
        assert_eq!(p.ramp_hourly, 20.0);
        assert_eq!(p.cost.c1, 33.0);

        let p = default_small_unit(25.0, "steam", Fuel::Oil, &table, 1.0).unwrap();
        assert_eq!(p.heat_rate, 13.0);

        assert!(matches!(
            default_small_unit(0.0, "steam", Fuel::Oil, &table, 1.0),
            Err(FitError::NonpositiveNameplate(_))
        ));
        assert!(matches!(
            default_small_unit(5.0, "unknown", Fuel::Coal, &table, 1.0),
            Err(FitError::MissingTableEntry { .. })
        ));
    }

    #[test]
    fn heat_rate_table_parses_csv() {
        let text = "unit_type,fuel,heat_rate_mmbtu_per_mwh\n\
                    combustion-turbine,gas,11\n\
                    steam,coal,10.2\n";
        let table = HeatRateTable::parse_csv(text).unwrap();
        assert_eq!(table.heat_rate("combustion-turbine", Fuel::Gas), Some(11.0));
        assert_eq!(table.heat_rate("steam", Fuel::Coal), Some(10.2));
        assert_eq!(table.heat_rate("steam", Fuel::Gas), None);
    }

    proptest! {
        #[test]
        fn limits_stay_within_observed_range(
            outputs in proptest::collection::vec(0.0f64..500.0, 1..200)
        ) {
            prop_assume!(outputs.iter().any(|&p| p > 0.0));
            let records: Vec<_> = outputs
                .iter()
                .enumerate()
                .map(|(i, &p)| rec(i as i64, p * 9.0, p))
                .collect();
            let (p_max, p_min) = extract_limits(&records).unwrap();
            prop_assert!(p_min <= p_max);
            let positive: Vec<f64> = outputs.iter().copied().filter(|&p| p > 0.0).collect();
            let lo = positive.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = positive.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(p_min >= lo && p_max <= hi);
        }

        #[test]
        fn ramp_bounded_by_max_output(
            outputs in proptest::collection::vec(0.0f64..400.0, 2..100)
        ) {
            let records: Vec<_> = outputs
                .iter()
                .enumerate()
                .map(|(i, &p)| rec(i as i64, 0.0, p))
                .collect();
            if let Ok(ramp) = extract_ramp(&records) {
                let hi = outputs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(ramp <= hi + 1e-12);
            }
        }

        #[test]
        fn cost_curve_scales_linearly_in_price(price in 0.0f64..50.0, k in 0.1f64..10.0) {
            let fit = HeatRateFit {
                slope: 9.5,
                intercept: 3.25,
                r_squared: 0.99,
                n_points: 100,
                low_quality: false,
            };
            let a = make_cost_curve(&fit, price).unwrap();
            let b = make_cost_curve(&fit, price * k).unwrap();
            prop_assert!((b.c1 - a.c1 * k).abs() <= 1e-9 * b.c1.abs().max(1.0));
            prop_assert!((b.c0 - a.c0 * k).abs() <= 1e-9 * b.c0.abs().max(1.0));
        }
    }
}
