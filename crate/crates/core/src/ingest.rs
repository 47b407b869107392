//! Parsers for the documented file formats: the text case format, hourly CSV
//! time series, sub-hourly records and fuel prices.
//!
//! Parsers are strict: unknown columns, schema drift and dangling references
//! are reported as errors rather than silently ignored. The case serializer
//! is canonical (entities ordered by id, shortest-round-trip float
//! formatting), so serializing, parsing and serializing again is
//! byte-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use chrono::{Duration, NaiveDateTime, Timelike};
use indexmap::IndexMap;
use thiserror::Error;

use crate::model::{
    Branch, BranchId, BranchKind, BranchStatus, Bus, BusId, BusKind, CostCurve, Fuel, Generator,
    Interface, Network, Violation,
};
use crate::profile::{HourlyProfile, ProfileError};

const TS_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Maximum number of consecutive missing hours repaired by interpolation.
pub const MAX_GAP_HOURS: i64 = 3;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: dangling reference: {msg}")]
    DanglingReference { line: usize, msg: String },
    #[error("case fails validation: {}", format_violations(.0))]
    InvalidNetwork(Vec<Violation>),
}

fn format_violations(vs: &[Violation]) -> String {
    vs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

fn syntax(line: usize, msg: impl Into<String>) -> CaseError {
    CaseError::Syntax {
        line,
        msg: msg.into(),
    }
}

/// Raw parsed case: the five section tables plus the MVA base, before
/// network-level validation.
#[derive(Debug, Clone)]
pub struct CaseFile {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    /// Cost rows keyed by generator id, in file order.
    pub costs: Vec<(String, CostCurve)>,
    pub interfaces: Vec<Interface>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Bus,
    Branch,
    Gen,
    GenCost,
    Interface,
}

impl Section {
    fn from_header(s: &str) -> Option<Self> {
        match s {
            "[bus]" => Some(Section::Bus),
            "[branch]" => Some(Section::Branch),
            "[gen]" => Some(Section::Gen),
            "[gencost]" => Some(Section::GenCost),
            "[interface]" => Some(Section::Interface),
            _ => None,
        }
    }
}

struct FieldParser<'a> {
    line_no: usize,
    fields: Vec<&'a str>,
    cursor: usize,
}

impl<'a> FieldParser<'a> {
    fn new(line_no: usize, line: &'a str) -> Self {
        FieldParser {
            line_no,
            fields: line.split_whitespace().collect(),
            cursor: 0,
        }
    }

    fn count(&self) -> usize {
        self.fields.len()
    }

    fn next(&mut self, what: &str) -> Result<&'a str, CaseError> {
        let f = self.fields.get(self.cursor).copied().ok_or_else(|| {
            syntax(
                self.line_no,
                format!("column {}: missing {what}", self.cursor + 1),
            )
        })?;
        self.cursor += 1;
        Ok(f)
    }

    fn f64(&mut self, what: &str) -> Result<f64, CaseError> {
        let col = self.cursor + 1;
        let raw = self.next(what)?;
        match raw {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => raw.parse::<f64>().map_err(|_| {
                syntax(
                    self.line_no,
                    format!("column {col}: expected number for {what}, got `{raw}`"),
                )
            }),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32, CaseError> {
        let col = self.cursor + 1;
        let raw = self.next(what)?;
        raw.parse::<u32>().map_err(|_| {
            syntax(
                self.line_no,
                format!("column {col}: expected integer for {what}, got `{raw}`"),
            )
        })
    }

    fn optional_f64(&mut self, what: &str) -> Result<Option<f64>, CaseError> {
        let raw = self.next(what)?;
        if raw == "-" {
            return Ok(None);
        }
        let col = self.cursor;
        raw.parse::<f64>().map(Some).map_err(|_| {
            syntax(
                self.line_no,
                format!("column {col}: expected number or `-` for {what}, got `{raw}`"),
            )
        })
    }

    fn bool01(&mut self, what: &str) -> Result<bool, CaseError> {
        let col = self.cursor + 1;
        let raw = self.next(what)?;
        match raw {
            "1" => Ok(true),
            "0" => Ok(false),
            _ => Err(syntax(
                self.line_no,
                format!("column {col}: expected 0 or 1 for {what}, got `{raw}`"),
            )),
        }
    }

    fn finish(self, expected: usize) -> Result<(), CaseError> {
        if self.count() != expected {
            return Err(syntax(
                self.line_no,
                format!("expected {expected} columns, found {}", self.count()),
            ));
        }
        Ok(())
    }
}

impl CaseFile {
    /// Parses the raw case text into section tables. Syntax, schema and
    /// intra-file reference errors are reported with line numbers;
    /// network-level invariants are left to [`parse_case`].
    pub fn parse(text: &str) -> Result<CaseFile, CaseError> {
        let mut base_mva: Option<f64> = None;
        let mut section: Option<Section> = None;
        let mut seen_sections: BTreeSet<&'static str> = BTreeSet::new();

        let mut buses = Vec::new();
        let mut branches = Vec::new();
        let mut generators = Vec::new();
        let mut costs: Vec<(String, CostCurve)> = Vec::new();
        let mut interfaces = Vec::new();
        // Line numbers retained for reference checks after all sections load.
        let mut interface_lines = Vec::new();
        let mut cost_lines = Vec::new();

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }

            if line.starts_with('[') {
                let sec = Section::from_header(line)
                    .ok_or_else(|| syntax(line_no, format!("unknown section header `{line}`")))?;
                let tag = match sec {
                    Section::Bus => "[bus]",
                    Section::Branch => "[branch]",
                    Section::Gen => "[gen]",
                    Section::GenCost => "[gencost]",
                    Section::Interface => "[interface]",
                };
                if !seen_sections.insert(tag) {
                    return Err(syntax(line_no, format!("duplicate section {tag}")));
                }
                section = Some(sec);
                continue;
            }

            match section {
                None => {
                    let mut p = FieldParser::new(line_no, line);
                    let key = p.next("keyword")?;
                    if key != "base_mva" {
                        return Err(syntax(
                            line_no,
                            format!("expected `base_mva` or a section header, got `{key}`"),
                        ));
                    }
                    if base_mva.is_some() {
                        return Err(syntax(line_no, "duplicate base_mva"));
                    }
                    let v = p.f64("base_mva")?;
                    p.finish(2)?;
                    if v <= 0.0 {
                        return Err(syntax(line_no, "base_mva must be positive"));
                    }
                    base_mva = Some(v);
                }
                Some(Section::Bus) => {
                    let mut p = FieldParser::new(line_no, line);
                    let id = BusId(p.u32("bus id")?);
                    let zone = p.next("zone")?.to_string();
                    let kind_tok = p.next("bus kind")?;
                    let kind = BusKind::from_token(kind_tok).ok_or_else(|| {
                        syntax(line_no, format!("column 3: unknown bus kind `{kind_tok}`"))
                    })?;
                    let base_load = p.f64("base_load")?;
                    let latitude = p.optional_f64("latitude")?;
                    let longitude = p.optional_f64("longitude")?;
                    p.finish(6)?;
                    buses.push(Bus {
                        id,
                        zone,
                        kind,
                        base_load,
                        latitude,
                        longitude,
                    });
                }
                Some(Section::Branch) => {
                    let mut p = FieldParser::new(line_no, line);
                    let id = BranchId(p.u32("branch id")?);
                    let from_bus = BusId(p.u32("from bus")?);
                    let to_bus = BusId(p.u32("to bus")?);
                    let resistance = p.f64("resistance")?;
                    let reactance = p.f64("reactance")?;
                    let rating = p.f64("rating")?;
                    let status = if p.bool01("status")? {
                        BranchStatus::InService
                    } else {
                        BranchStatus::Out
                    };
                    let kind_tok = p.next("branch kind")?;
                    let kind = BranchKind::from_token(kind_tok).ok_or_else(|| {
                        syntax(
                            line_no,
                            format!("column 8: unknown branch kind `{kind_tok}`"),
                        )
                    })?;
                    let name_tok = p.next("name")?;
                    let name = (name_tok != "-").then(|| name_tok.to_string());
                    p.finish(9)?;
                    branches.push(Branch {
                        id,
                        from_bus,
                        to_bus,
                        resistance,
                        reactance,
                        rating,
                        status,
                        kind,
                        name,
                    });
                }
                Some(Section::Gen) => {
                    let mut p = FieldParser::new(line_no, line);
                    let id = p.next("generator id")?.to_string();
                    let bus = BusId(p.u32("bus id")?);
                    let fuel_tok = p.next("fuel")?;
                    let fuel = Fuel::from_token(fuel_tok).ok_or_else(|| {
                        syntax(line_no, format!("column 3: unknown fuel `{fuel_tok}`"))
                    })?;
                    let p_max = p.f64("p_max")?;
                    let p_min = p.f64("p_min")?;
                    let ramp_hourly = p.f64("ramp")?;
                    let dispatchable = p.bool01("dispatchable")?;
                    p.finish(7)?;
                    generators.push(Generator {
                        id,
                        bus,
                        fuel,
                        p_max,
                        p_min,
                        ramp_hourly,
                        cost: CostCurve::ZERO,
                        dispatchable,
                    });
                }
                Some(Section::GenCost) => {
                    let mut p = FieldParser::new(line_no, line);
                    let id = p.next("generator id")?.to_string();
                    let c1 = p.f64("c1")?;
                    let c0 = p.f64("c0")?;
                    p.finish(3)?;
                    costs.push((id, CostCurve { c1, c0 }));
                    cost_lines.push(line_no);
                }
                Some(Section::Interface) => {
                    let mut p = FieldParser::new(line_no, line);
                    let name = p.next("interface name")?.to_string();
                    let members_tok = p.next("members")?;
                    let mut members = Vec::new();
                    for part in members_tok.split(',') {
                        let (sign, rest) = match part.as_bytes().first() {
                            Some(b'+') => (1i8, &part[1..]),
                            Some(b'-') => (-1i8, &part[1..]),
                            _ => {
                                return Err(syntax(
                                    line_no,
                                    format!("interface member `{part}` must start with + or -"),
                                ))
                            }
                        };
                        let id = rest.parse::<u32>().map_err(|_| {
                            syntax(line_no, format!("bad branch id in member `{part}`"))
                        })?;
                        members.push((BranchId(id), sign));
                    }
                    let limit_pos = p.f64("limit_pos")?;
                    let limit_neg = p.f64("limit_neg")?;
                    p.finish(4)?;
                    if !(limit_neg <= 0.0 && 0.0 <= limit_pos) {
                        return Err(syntax(
                            line_no,
                            "interface limits must satisfy limit_neg <= 0 <= limit_pos",
                        ));
                    }
                    interfaces.push(Interface {
                        name,
                        members,
                        limit_pos,
                        limit_neg,
                    });
                    interface_lines.push(line_no);
                }
            }
        }

        let base_mva = base_mva.ok_or_else(|| syntax(0, "missing base_mva line"))?;
        for tag in ["[bus]", "[branch]", "[gen]", "[gencost]", "[interface]"] {
            if !seen_sections.contains(tag) {
                return Err(syntax(0, format!("missing section {tag}")));
            }
        }

        // Reference checks that only need the tables themselves.
        let branch_ids: BTreeSet<BranchId> = branches.iter().map(|b| b.id).collect();
        for (iface, line) in interfaces.iter().zip(&interface_lines) {
            for (id, _) in &iface.members {
                if !branch_ids.contains(id) {
                    return Err(CaseError::DanglingReference {
                        line: *line,
                        msg: format!("interface `{}` references unknown branch {id}", iface.name),
                    });
                }
            }
        }
        let gen_ids: BTreeSet<&str> = generators.iter().map(|g| g.id.as_str()).collect();
        let mut seen_cost: BTreeSet<&str> = BTreeSet::new();
        for ((id, _), line) in costs.iter().zip(&cost_lines) {
            if !gen_ids.contains(id.as_str()) {
                return Err(CaseError::DanglingReference {
                    line: *line,
                    msg: format!("cost row references unknown generator `{id}`"),
                });
            }
            if !seen_cost.insert(id) {
                return Err(syntax(*line, format!("duplicate cost row for `{id}`")));
            }
        }

        Ok(CaseFile {
            base_mva,
            buses,
            branches,
            generators,
            costs,
            interfaces,
        })
    }

    /// Folds cost rows into the generator table and builds the network.
    pub fn into_parts(mut self) -> (Network, Vec<Interface>) {
        let cost_map: BTreeMap<String, CostCurve> = self.costs.into_iter().collect();
        for g in &mut self.generators {
            if let Some(c) = cost_map.get(&g.id) {
                g.cost = *c;
            }
        }
        (
            Network::new(self.base_mva, self.buses, self.branches, self.generators),
            self.interfaces,
        )
    }
}

/// Parses case text into a validated [`Network`] and its interfaces.
///
/// The returned network is guaranteed to pass [`crate::validate_network`];
/// any violation is reported as [`CaseError::InvalidNetwork`].
pub fn parse_case(text: &str) -> Result<(Network, Vec<Interface>), CaseError> {
    let case = CaseFile::parse(text)?;
    let (net, interfaces) = case.into_parts();
    let violations = net.validate();
    if !violations.is_empty() {
        return Err(CaseError::InvalidNetwork(violations));
    }
    Ok((net, interfaces))
}

fn fmt_float(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_else(|| "-".to_string())
}

/// Canonical case writer: entities sorted by id, interfaces by name,
/// shortest-round-trip float formatting, single-space separators.
pub fn serialize_case(net: &Network, interfaces: &[Interface]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "base_mva {}", fmt_float(net.base_mva()));

    out.push_str("[bus]\n");
    let mut buses: Vec<&Bus> = net.buses().iter().collect();
    buses.sort_by_key(|b| b.id);
    for b in buses {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            b.id,
            b.zone,
            b.kind.token(),
            fmt_float(b.base_load),
            fmt_opt(b.latitude),
            fmt_opt(b.longitude)
        );
    }

    out.push_str("[branch]\n");
    let mut branches: Vec<&Branch> = net.branches().iter().collect();
    branches.sort_by_key(|b| b.id);
    for b in branches {
        let status = match b.status {
            BranchStatus::InService => 1,
            BranchStatus::Out => 0,
        };
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {} {}",
            b.id,
            b.from_bus,
            b.to_bus,
            fmt_float(b.resistance),
            fmt_float(b.reactance),
            fmt_float(b.rating),
            status,
            b.kind.token(),
            b.name.as_deref().unwrap_or("-")
        );
    }

    let mut gens: Vec<&Generator> = net.generators().iter().collect();
    gens.sort_by(|a, b| a.id.cmp(&b.id));

    out.push_str("[gen]\n");
    for g in &gens {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            g.id,
            g.bus,
            g.fuel.token(),
            fmt_float(g.p_max),
            fmt_float(g.p_min),
            fmt_float(g.ramp_hourly),
            u8::from(g.dispatchable)
        );
    }

    out.push_str("[gencost]\n");
    for g in &gens {
        let _ = writeln!(
            out,
            "{} {} {}",
            g.id,
            fmt_float(g.cost.c1),
            fmt_float(g.cost.c0)
        );
    }

    out.push_str("[interface]\n");
    let mut ifaces: Vec<&Interface> = interfaces.iter().collect();
    ifaces.sort_by(|a, b| a.name.cmp(&b.name));
    for iface in ifaces {
        let members = iface
            .members
            .iter()
            .map(|(id, sign)| format!("{}{}", if *sign >= 0 { "+" } else { "-" }, id))
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(
            out,
            "{} {} {} {}",
            iface.name,
            members,
            fmt_float(iface.limit_pos),
            fmt_float(iface.limit_neg)
        );
    }

    out
}

#[derive(Debug, Error)]
pub enum ProfileParseError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("first column must be `timestamp`, found `{0}`")]
    BadHeader(String),
    #[error("row {row}: bad timestamp `{value}` (expected %Y-%m-%dT%H:%M:%S)")]
    BadTimestamp { row: usize, value: String },
    #[error("row {row}: bad number `{value}` in column `{column}`")]
    BadNumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("timestamps not strictly increasing at row {row} ({ts})")]
    NonMonotonic { row: usize, ts: NaiveDateTime },
    #[error("timestamps must be on the hour, got {ts} at row {row}")]
    OffHour { row: usize, ts: NaiveDateTime },
    #[error("gap exceeds {MAX_GAP_HOURS} hours before {ts} ({missing} hours missing)")]
    GapTooLong { ts: NaiveDateTime, missing: i64 },
    #[error("profile is empty")]
    Empty,
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("hour {0} has no records")]
    EmptyHour(NaiveDateTime),
    #[error("row {row}: negative value `{value}` in column `{column}`")]
    NegativeValue {
        row: usize,
        column: String,
        value: f64,
    },
}

/// Parses an hourly CSV time series (`timestamp` first column, ISO-8601
/// hourly stamps).
///
/// When `expected_columns` is given the header must contain exactly those
/// columns (any order); otherwise all columns are accepted. Gaps of up to
/// [`MAX_GAP_HOURS`] consecutive missing hours are filled by linear
/// interpolation; longer gaps are errors.
pub fn parse_profile(
    text: &str,
    expected_columns: Option<&[&str]>,
) -> Result<HourlyProfile, ProfileParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let mut names: Vec<String> = headers.iter().map(|s| s.trim().to_string()).collect();
    if names.first().map(|s| s.as_str()) != Some("timestamp") {
        return Err(ProfileParseError::BadHeader(
            names.first().cloned().unwrap_or_default(),
        ));
    }
    names.remove(0);

    if let Some(expected) = expected_columns {
        let have: BTreeSet<&str> = names.iter().map(|s| s.as_str()).collect();
        let want: BTreeSet<&str> = expected.iter().copied().collect();
        for w in &want {
            if !have.contains(w) {
                return Err(ProfileParseError::MissingColumn(w.to_string()));
            }
        }
        for h in &have {
            if !want.contains(h) {
                return Err(ProfileParseError::UnknownColumn(h.to_string()));
            }
        }
    }

    let mut index: Vec<NaiveDateTime> = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];

    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // header is row 1
        let record = record?;
        let ts_raw = record.get(0).unwrap_or("").trim();
        let ts = NaiveDateTime::parse_from_str(ts_raw, TS_FORMAT).map_err(|_| {
            ProfileParseError::BadTimestamp {
                row,
                value: ts_raw.to_string(),
            }
        })?;
        if ts.time().minute() != 0 || ts.time().second() != 0 {
            return Err(ProfileParseError::OffHour { row, ts });
        }

        let mut values = Vec::with_capacity(names.len());
        for (ci, name) in names.iter().enumerate() {
            let raw = record.get(ci + 1).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| ProfileParseError::BadNumber {
                row,
                column: name.clone(),
                value: raw.to_string(),
            })?;
            values.push(v);
        }

        if let Some(&prev) = index.last() {
            let dh = (ts - prev).num_hours();
            let exact = prev + Duration::hours(dh) == ts;
            if dh <= 0 || !exact {
                return Err(ProfileParseError::NonMonotonic { row, ts });
            }
            let missing = dh - 1;
            if missing > MAX_GAP_HOURS {
                return Err(ProfileParseError::GapTooLong { ts, missing });
            }
            // Linear interpolation across the gap, per column.
            for k in 1..dh {
                index.push(prev + Duration::hours(k));
                let w = k as f64 / dh as f64;
                for (ci, col) in cols.iter_mut().enumerate() {
                    let a = *col.last().expect("nonempty column");
                    let b = values[ci];
                    col.push(a + w * (b - a));
                }
            }
        }
        index.push(ts);
        for (ci, col) in cols.iter_mut().enumerate() {
            col.push(values[ci]);
        }
    }

    if index.is_empty() {
        return Err(ProfileParseError::Empty);
    }

    let columns: IndexMap<String, Vec<f64>> = names.into_iter().zip(cols).collect();
    Ok(HourlyProfile::new(index, columns)?)
}

/// Truncates a timestamp to the start of its clock hour.
fn floor_hour(ts: NaiveDateTime) -> NaiveDateTime {
    ts.date().and_hms_opt(ts.time().hour(), 0, 0).unwrap()
}

/// Averages irregular sub-hourly records into an hourly series.
///
/// Each output hour is the arithmetic mean of the records whose timestamps
/// fall in `[h, h+1)`. Every clock hour between the first and last record
/// must contain at least one sample.
pub fn average_subhourly(
    records: &[(NaiveDateTime, f64)],
    column: &str,
) -> Result<HourlyProfile, ProfileParseError> {
    if records.is_empty() {
        return Err(ProfileParseError::Empty);
    }
    let mut sums: BTreeMap<NaiveDateTime, (f64, usize)> = BTreeMap::new();
    for (ts, v) in records {
        let e = sums.entry(floor_hour(*ts)).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    let first = *sums.keys().next().unwrap();
    let last = *sums.keys().next_back().unwrap();
    let mut index = Vec::new();
    let mut values = Vec::new();
    let mut h = first;
    while h <= last {
        match sums.get(&h) {
            Some((sum, n)) => {
                index.push(h);
                values.push(sum / *n as f64);
            }
            None => return Err(ProfileParseError::EmptyHour(h)),
        }
        h += Duration::hours(1);
    }
    let columns = IndexMap::from([(column.to_string(), values)]);
    Ok(HourlyProfile::new(index, columns)?)
}

/// One unit-level hourly observation: fuel energy in, electrical energy out.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitHourlyRecord {
    pub unit: String,
    pub timestamp: NaiveDateTime,
    /// Fuel energy input over the hour in MMBtu.
    pub heat_input: f64,
    /// Electrical output over the hour in MWh.
    pub power_output: f64,
}

/// Parses unit-level hourly records from CSV with columns
/// `timestamp,unit,heat_input,power_output`.
pub fn parse_unit_records(text: &str) -> Result<Vec<UnitHourlyRecord>, ProfileParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let expect = ["timestamp", "unit", "heat_input", "power_output"];
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expect {
        return Err(ProfileParseError::BadHeader(got.join(",")));
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record?;
        let ts_raw = record.get(0).unwrap_or("").trim();
        let timestamp = NaiveDateTime::parse_from_str(ts_raw, TS_FORMAT).map_err(|_| {
            ProfileParseError::BadTimestamp {
                row,
                value: ts_raw.to_string(),
            }
        })?;
        let unit = record.get(1).unwrap_or("").trim().to_string();
        let mut nums = [0.0; 2];
        for (k, col) in ["heat_input", "power_output"].iter().enumerate() {
            let raw = record.get(k + 2).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| ProfileParseError::BadNumber {
                row,
                column: col.to_string(),
                value: raw.to_string(),
            })?;
            if v < 0.0 {
                return Err(ProfileParseError::NegativeValue {
                    row,
                    column: col.to_string(),
                    value: v,
                });
            }
            nums[k] = v;
        }
        out.push(UnitHourlyRecord {
            unit,
            timestamp,
            heat_input: nums[0],
            power_output: nums[1],
        });
    }
    Ok(out)
}

/// Parses a long-format fuel price CSV (`timestamp,fuel,price_per_mmbtu`)
/// into a wide hourly profile with one column per fuel token.
///
/// Prices are schedules, not telemetry: each record takes effect at its
/// timestamp and holds until the next one (forward fill). The series extends
/// to `extend_to` when given.
pub fn parse_fuel_prices(
    text: &str,
    extend_to: Option<NaiveDateTime>,
) -> Result<HourlyProfile, ProfileParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != ["timestamp", "fuel", "price_per_mmbtu"] {
        return Err(ProfileParseError::BadHeader(got.join(",")));
    }

    let mut series: IndexMap<String, BTreeMap<NaiveDateTime, f64>> = IndexMap::new();
    let mut min_ts: Option<NaiveDateTime> = None;
    let mut max_ts: Option<NaiveDateTime> = None;
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record?;
        let ts_raw = record.get(0).unwrap_or("").trim();
        let ts = NaiveDateTime::parse_from_str(ts_raw, TS_FORMAT).map_err(|_| {
            ProfileParseError::BadTimestamp {
                row,
                value: ts_raw.to_string(),
            }
        })?;
        let ts = floor_hour(ts);
        let fuel = record.get(1).unwrap_or("").trim().to_string();
        let raw = record.get(2).unwrap_or("").trim();
        let price: f64 = raw.parse().map_err(|_| ProfileParseError::BadNumber {
            row,
            column: "price_per_mmbtu".to_string(),
            value: raw.to_string(),
        })?;
        if price < 0.0 {
            return Err(ProfileParseError::NegativeValue {
                row,
                column: "price_per_mmbtu".to_string(),
                value: price,
            });
        }
        series.entry(fuel).or_default().insert(ts, price);
        min_ts = Some(min_ts.map_or(ts, |m| m.min(ts)));
        max_ts = Some(max_ts.map_or(ts, |m| m.max(ts)));
    }

    let (start, mut end) = match (min_ts, max_ts) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(ProfileParseError::Empty),
    };
    if let Some(e) = extend_to {
        end = end.max(floor_hour(e));
    }

    let mut index = Vec::new();
    let mut h = start;
    while h <= end {
        index.push(h);
        h += Duration::hours(1);
    }

    let mut columns: IndexMap<String, Vec<f64>> = IndexMap::new();
    for (fuel, points) in &series {
        let mut vals = Vec::with_capacity(index.len());
        let mut current: Option<f64> = None;
        for ts in &index {
            if let Some(v) = points.get(ts) {
                current = Some(*v);
            }
            // Hours before a fuel's first record repeat its first price.
            let v = current.unwrap_or_else(|| *points.values().next().unwrap());
            vals.push(v);
        }
        columns.insert(fuel.clone(), vals);
    }

    Ok(HourlyProfile::new(index, columns)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BusKind;

    const TWO_BUS: &str = "\
# minimal two-bus case
base_mva 100
[bus]
1 A slack 0 - -
2 A pq 50 - -
[branch]
1 1 2 0 0.1 200 1 physical-ac -
[gen]
G1 1 gas 150 0 150 1
[gencost]
G1 25 0
[interface]
tie +1 100 -100
";

    #[test]
    fn parses_minimal_two_bus_case() {
        let (net, ifaces) = parse_case(TWO_BUS).unwrap();
        assert_eq!(net.buses().len(), 2);
        assert_eq!(net.branches().len(), 1);
        assert_eq!(net.generators().len(), 1);
        assert_eq!(net.generator("G1").unwrap().cost.c1, 25.0);
        assert_eq!(ifaces.len(), 1);
        assert_eq!(ifaces[0].members, vec![(BranchId(1), 1)]);
        assert_eq!(net.bus(BusId(1)).unwrap().kind, BusKind::Slack);
    }

    #[test]
    fn dangling_interface_branch_is_an_error() {
        let text = TWO_BUS.replace("tie +1 100 -100", "tie +99 100 -100");
        let err = parse_case(&text).unwrap_err();
        match err {
            CaseError::DanglingReference { msg, .. } => {
                assert!(msg.contains("unknown branch 99"), "{msg}");
            }
            other => panic!("expected dangling reference, got {other}"),
        }
    }

    #[test]
    fn invalid_network_is_rejected_with_violations() {
        let text = TWO_BUS
            .replace("1 1 2 0 0.1 200 1 physical-ac -\n", "")
            .replace("tie +1 100 -100\n", "");
        let err = parse_case(&text).unwrap_err();
        match err {
            CaseError::InvalidNetwork(vs) => {
                assert!(vs.iter().any(|v| v.to_string().contains("disconnected")));
            }
            other => panic!("expected invalid network, got {other}"),
        }
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = TWO_BUS.replace("2 A pq 50 - -", "2 A pq fifty - -");
        let err = parse_case(&text).unwrap_err();
        match err {
            CaseError::Syntax { line, msg } => {
                assert_eq!(line, 5);
                assert!(msg.contains("base_load"), "{msg}");
            }
            other => panic!("expected syntax error, got {other}"),
        }
    }

    #[test]
    fn serialize_parse_serialize_is_byte_identical() {
        let (net, ifaces) = parse_case(TWO_BUS).unwrap();
        let first = serialize_case(&net, &ifaces);
        let (net2, ifaces2) = parse_case(&first).unwrap();
        assert_eq!(net, net2);
        let second = serialize_case(&net2, &ifaces2);
        assert_eq!(first, second);
    }

    #[test]
    fn profile_parses_24_hours() {
        let mut text = String::from("timestamp,load\n");
        for h in 0..24 {
            text.push_str(&format!("2019-01-01T{h:02}:00:00,{}\n", 100 + h));
        }
        let p = parse_profile(&text, Some(&["load"])).unwrap();
        assert_eq!(p.len(), 24);
        assert_eq!(p.column("load").unwrap()[23], 123.0);
    }

    #[test]
    fn single_missing_hour_is_interpolated() {
        let text = "timestamp,load\n\
                    2019-01-01T00:00:00,10\n\
                    2019-01-01T02:00:00,14\n";
        let p = parse_profile(text, Some(&["load"])).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.column("load").unwrap(), &[10.0, 12.0, 14.0]);
    }

    #[test]
    fn five_hour_gap_is_rejected() {
        let text = "timestamp,load\n\
                    2019-01-01T00:00:00,10\n\
                    2019-01-01T05:00:00,20\n";
        let err = parse_profile(text, Some(&["load"])).unwrap_err();
        assert!(err.to_string().contains("gap exceeds 3 hours"), "{err}");
    }

    #[test]
    fn unknown_and_missing_columns_are_strict() {
        let text = "timestamp,load,extra\n2019-01-01T00:00:00,1,2\n";
        assert!(matches!(
            parse_profile(text, Some(&["load"])),
            Err(ProfileParseError::UnknownColumn(c)) if c == "extra"
        ));
        let text = "timestamp,load\n2019-01-01T00:00:00,1\n";
        assert!(matches!(
            parse_profile(text, Some(&["load", "wind"])),
            Err(ProfileParseError::MissingColumn(c)) if c == "wind"
        ));
    }

    #[test]
    fn non_monotone_timestamps_are_rejected() {
        let text = "timestamp,load\n\
                    2019-01-01T01:00:00,10\n\
                    2019-01-01T01:00:00,11\n";
        assert!(matches!(
            parse_profile(text, None),
            Err(ProfileParseError::NonMonotonic { .. })
        ));
    }

    #[test]
    fn subhourly_mean_of_constant_is_constant() {
        let t0 = NaiveDateTime::parse_from_str("2019-06-01T07:00:00", TS_FORMAT).unwrap();
        let records: Vec<_> = (0..12)
            .map(|i| (t0 + Duration::minutes(5 * i), 42.0))
            .collect();
        let p = average_subhourly(&records, "gen").unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.column("gen").unwrap(), &[42.0]);
    }

    #[test]
    fn subhourly_mean_of_two_values() {
        let t0 = NaiveDateTime::parse_from_str("2019-06-01T07:00:00", TS_FORMAT).unwrap();
        let records = vec![(t0, 0.0), (t0 + Duration::minutes(31), 10.0)];
        let p = average_subhourly(&records, "gen").unwrap();
        assert_eq!(p.column("gen").unwrap(), &[5.0]);
    }

    #[test]
    fn subhourly_irregular_timestamps_match_direct_mean() {
        let t0 = NaiveDateTime::parse_from_str("2019-06-01T07:00:00", TS_FORMAT).unwrap();
        // 13 irregular offsets within the hour, values 1..=13.
        let offsets = [0, 2, 7, 11, 13, 17, 23, 29, 31, 41, 47, 53, 59];
        let records: Vec<_> = offsets
            .iter()
            .enumerate()
            .map(|(i, &m)| (t0 + Duration::minutes(m), (i + 1) as f64))
            .collect();
        let p = average_subhourly(&records, "gen").unwrap();
        let direct: f64 = (1..=13).map(|v| v as f64).sum::<f64>() / 13.0;
        assert!((p.column("gen").unwrap()[0] - direct).abs() < 1e-12);
    }

    #[test]
    fn subhourly_empty_hour_is_an_error() {
        let t0 = NaiveDateTime::parse_from_str("2019-06-01T07:00:00", TS_FORMAT).unwrap();
        let records = vec![(t0, 1.0), (t0 + Duration::hours(2), 2.0)];
        assert!(matches!(
            average_subhourly(&records, "gen"),
            Err(ProfileParseError::EmptyHour(_))
        ));
    }

    #[test]
    fn subhourly_is_order_invariant() {
        let t0 = NaiveDateTime::parse_from_str("2019-06-01T07:00:00", TS_FORMAT).unwrap();
        let mut records = vec![
            (t0 + Duration::minutes(40), 3.0),
            (t0, 1.0),
            (t0 + Duration::minutes(20), 2.0),
        ];
        let a = average_subhourly(&records, "gen").unwrap();
        records.reverse();
        let b = average_subhourly(&records, "gen").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fuel_prices_forward_fill() {
        let text = "timestamp,fuel,price_per_mmbtu\n\
                    2019-01-01T00:00:00,gas,3\n\
                    2019-01-01T02:00:00,gas,4\n\
                    2019-01-01T00:00:00,oil,10\n";
        let end = NaiveDateTime::parse_from_str("2019-01-01T03:00:00", TS_FORMAT).unwrap();
        let p = parse_fuel_prices(text, Some(end)).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.column("gas").unwrap(), &[3.0, 3.0, 4.0, 4.0]);
        assert_eq!(p.column("oil").unwrap(), &[10.0, 10.0, 10.0, 10.0]);
    }

    #[test]
    fn unit_records_parse_and_reject_negatives() {
        let text = "timestamp,unit,heat_input,power_output\n\
                    2019-01-01T00:00:00,U1,1050,100\n";
        let recs = parse_unit_records(text).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].unit, "U1");
        assert_eq!(recs[0].heat_input, 1050.0);

        let bad = "timestamp,unit,heat_input,power_output\n\
                   2019-01-01T00:00:00,U1,-5,100\n";
        assert!(matches!(
            parse_unit_records(bad),
            Err(ProfileParseError::NegativeValue { .. })
        ));
    }
}
