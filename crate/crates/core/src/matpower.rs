//! MATPOWER case files and load time series.
//!
//! Everything past [`parse_case`] is per-unit on `baseMVA` with angles in
//! radians; only the generator cost coefficients stay in the MW domain.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusType {
    Pq,
    Pv,
    Reference,
    Isolated,
}

impl BusType {
    fn from_code(code: f64) -> Option<Self> {
        match code as i64 {
            1 => Some(BusType::Pq),
            2 => Some(BusType::Pv),
            3 => Some(BusType::Reference),
            4 => Some(BusType::Isolated),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: i64,
    pub kind: BusType,
    pub pd: f64,
    pub qd: f64,
    pub gs: f64,
    pub bs: f64,
    pub vmax: f64,
    pub vmin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gen {
    pub bus: i64,
    pub pmin: f64,
    pub pmax: f64,
    pub qmin: f64,
    pub qmax: f64,
    pub status: i64,
    /// `[c2, c1, c0]` for `c2·P² + c1·P + c0` with `P` in MW.
    pub cost: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: i64,
    pub to: i64,
    pub r: f64,
    pub x: f64,
    pub b: f64,
    /// Zero means unlimited.
    pub rate_a: f64,
    pub tap: f64,
    pub shift: f64,
    pub status: i64,
    pub angmin: f64,
    pub angmax: f64,
}

/// One `mpc.storage` row: bus, energy rating, charge rating, discharge
/// rating, charge efficiency, discharge efficiency.
#[derive(Debug, Clone, PartialEq)]
pub struct Storage {
    pub bus: i64,
    pub energy_rating: f64,
    pub charge_rating: f64,
    pub discharge_rating: f64,
    pub charge_efficiency: f64,
    pub discharge_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseData {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub gens: Vec<Gen>,
    pub branches: Vec<Branch>,
    pub storage: Vec<Storage>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateBus(i64),
    NoReferenceBus,
    MultipleReferenceBuses(usize),
    DanglingGen { gen: usize, bus: i64 },
    DanglingBranch { branch: usize, bus: i64 },
    DanglingStorage { device: usize, bus: i64 },
    BadStatus { what: &'static str, index: usize, status: i64 },
    VoltageBounds { bus: i64 },
    AngleBounds { branch: usize },
    DegenerateBranch { branch: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateBus(id) => write!(f, "duplicate bus id {id}"),
            Violation::NoReferenceBus => write!(f, "no reference bus"),
            Violation::MultipleReferenceBuses(n) => write!(f, "multiple reference buses ({n})"),
            Violation::DanglingGen { gen, bus } => write!(f, "generator {gen} references absent bus {bus}"),
            Violation::DanglingBranch { branch, bus } => write!(f, "branch {branch} references absent bus {bus}"),
            Violation::DanglingStorage { device, bus } => write!(f, "storage {device} references absent bus {bus}"),
            Violation::BadStatus { what, index, status } => write!(f, "{what} {index} has status {status}"),
            Violation::VoltageBounds { bus } => write!(f, "bus {bus} has Vmin > Vmax"),
            Violation::AngleBounds { branch } => write!(f, "branch {branch} has angmin > angmax"),
            Violation::DegenerateBranch { branch } => write!(f, "branch {branch} has r = x = 0"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatpowerError {
    #[error("missing required block mpc.{0}")]
    MissingBlock(&'static str),
    #[error("mpc.{block}: row {row} has {got} entries, expected {expected}")]
    Ragged { block: String, row: usize, expected: usize, got: usize },
    #[error("mpc.{block}: needs at least {expected} columns, got {got}")]
    TooFewColumns { block: &'static str, expected: usize, got: usize },
    #[error("mpc.{block}: cannot parse `{token}` as a number")]
    BadNumber { block: String, token: String },
    #[error("mpc.{0}: unterminated block")]
    Unterminated(String),
    #[error("gencost row {row}: cost model {model} is unsupported (only polynomial model 2)")]
    UnsupportedCost { row: usize, model: i64 },
    #[error("gencost row {row}: polynomial with {n} coefficients is unsupported (at most 3)")]
    UnsupportedPolynomial { row: usize, n: usize },
    #[error("gencost has {got} rows for {expected} generators")]
    GencostCount { expected: usize, got: usize },
    #[error("bus row {row}: unknown bus type {code}")]
    BusType { row: usize, code: f64 },
    #[error("branch {0} is degenerate (r = x = 0)")]
    DegenerateBranch(usize),
    #[error("case validation failed: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Violation>),
    #[error("load series row {row}: {got} columns, expected {expected}")]
    SeriesColumns { row: usize, expected: usize, got: usize },
    #[error("load series row {row}: non-numeric token `{token}`")]
    SeriesToken { row: usize, token: String },
    #[error("load series is empty")]
    EmptySeries,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Result of a successful [`validate_case`]: elements to drop before modeling.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Inactive {
    pub gens: Vec<usize>,
    pub branches: Vec<usize>,
}

/// Series admittance and tap quantities of one Π-model branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchAdmittance {
    pub g: f64,
    pub b: f64,
    pub tr: f64,
    pub ti: f64,
    pub tm: f64,
    pub g_fr: f64,
    pub b_fr: f64,
    pub g_to: f64,
    pub b_to: f64,
}

pub fn branch_admittance(branch: &Branch) -> Result<BranchAdmittance, MatpowerError> {
    let d = branch.r * branch.r + branch.x * branch.x;
    if d == 0.0 {
        return Err(MatpowerError::DegenerateBranch(0));
    }
    Ok(BranchAdmittance {
        g: branch.r / d,
        b: -branch.x / d,
        tr: branch.tap * branch.shift.cos(),
        ti: branch.tap * branch.shift.sin(),
        tm: branch.tap * branch.tap,
        g_fr: 0.0,
        b_fr: branch.b / 2.0,
        g_to: 0.0,
        b_to: branch.b / 2.0,
    })
}

/// Removes `%` comments, leaving quoted strings intact.
fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        let mut in_str = false;
        for ch in line.chars() {
            match ch {
                '\'' => in_str = !in_str,
                '%' if !in_str => break,
                _ => {}
            }
            out.push(ch);
        }
        out.push('\n');
    }
    out
}

enum Value {
    Matrix(Vec<Vec<f64>>),
    Scalar(f64),
    Other,
}

fn parse_matrix(name: &str, body: &str) -> Result<Vec<Vec<f64>>, MatpowerError> {
    let mut rows = Vec::new();
    for chunk in body.split(['\n', ';']) {
        let tokens: Vec<&str> = chunk.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).collect();
        if tokens.is_empty() {
            continue;
        }
        let row = tokens
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| MatpowerError::BadNumber { block: name.to_string(), token: t.to_string() }))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if let Some(first) = rows.first() {
        let expected = first.len();
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != expected) {
            return Err(MatpowerError::Ragged { block: name.to_string(), row, expected, got: r.len() });
        }
    }
    Ok(rows)
}

/// All `mpc.<name> = ...` assignments in file order.
fn assignments(text: &str) -> Result<BTreeMap<String, Value>, MatpowerError> {
    let text = strip_comments(text);
    let bytes = text.as_bytes();
    let mut out = BTreeMap::new();
    let mut pos = 0;
    while let Some(found) = text[pos..].find("mpc.") {
        let start = pos + found + 4;
        let name_end = start + text[start..].find(|c: char| !(c.is_alphanumeric() || c == '_')).unwrap_or(text.len() - start);
        let name = text[start..name_end].to_string();
        let mut i = name_end;
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i >= bytes.len() || bytes[i] != b'=' || bytes.get(i + 1) == Some(&b'=') {
            pos = name_end;
            continue;
        }
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let close = match bytes.get(i) {
            Some(b'[') => Some(']'),
            Some(b'{') => Some('}'),
            _ => None,
        };
        if let Some(close) = close {
            let end = text[i + 1..].find(close).ok_or_else(|| MatpowerError::Unterminated(name.clone()))? + i + 1;
            let value = if close == ']' { Value::Matrix(parse_matrix(&name, &text[i + 1..end])?) } else { Value::Other };
            out.insert(name, value);
            pos = end + 1;
        } else {
            let end = text[i..].find([';', '\n']).map_or(text.len(), |e| e + i);
            let value = text[i..end].trim().parse::<f64>().map(Value::Scalar).unwrap_or(Value::Other);
            out.insert(name, value);
            pos = end;
        }
    }
    Ok(out)
}

fn case_name(text: &str) -> String {
    text.lines()
        .map(str::trim)
        .find_map(|l| l.strip_prefix("function"))
        .and_then(|l| l.split('=').nth(1))
        .map(|n| n.trim().trim_end_matches(';').to_string())
        .unwrap_or_default()
}

fn matrix<'a>(
    values: &'a BTreeMap<String, Value>,
    name: &'static str,
    min_cols: usize,
) -> Result<Option<&'a Vec<Vec<f64>>>, MatpowerError> {
    match values.get(name) {
        Some(Value::Matrix(m)) => {
            if let Some(r) = m.first() {
                if r.len() < min_cols {
                    return Err(MatpowerError::TooFewColumns { block: name, expected: min_cols, got: r.len() });
                }
            }
            Ok(Some(m))
        }
        _ => Ok(None),
    }
}

/// Parses without checking cross-references.
pub fn parse_case_unvalidated(text: &str) -> Result<CaseData, MatpowerError> {
    let values = assignments(text)?;
    let base_mva = match values.get("baseMVA") {
        Some(Value::Scalar(v)) => *v,
        _ => return Err(MatpowerError::MissingBlock("baseMVA")),
    };
    let bus = matrix(&values, "bus", 13)?.ok_or(MatpowerError::MissingBlock("bus"))?;
    let gen = matrix(&values, "gen", 10)?.ok_or(MatpowerError::MissingBlock("gen"))?;
    let branch = matrix(&values, "branch", 11)?.ok_or(MatpowerError::MissingBlock("branch"))?;
    let gencost = matrix(&values, "gencost", 4)?.ok_or(MatpowerError::MissingBlock("gencost"))?;
    let storage = matrix(&values, "storage", 6)?;

    let buses = bus
        .iter()
        .enumerate()
        .map(|(row, r)| {
            Ok(Bus {
                id: r[0] as i64,
                kind: BusType::from_code(r[1]).ok_or(MatpowerError::BusType { row, code: r[1] })?,
                pd: r[2] / base_mva,
                qd: r[3] / base_mva,
                gs: r[4] / base_mva,
                bs: r[5] / base_mva,
                vmax: r[11],
                vmin: r[12],
            })
        })
        .collect::<Result<Vec<_>, MatpowerError>>()?;

    if gencost.len() < gen.len() {
        return Err(MatpowerError::GencostCount { expected: gen.len(), got: gencost.len() });
    }
    let mut gens = Vec::with_capacity(gen.len());
    for (row, (r, c)) in gen.iter().zip(gencost).enumerate() {
        let model = c[0] as i64;
        if model != 2 {
            return Err(MatpowerError::UnsupportedCost { row, model });
        }
        let n = c[3] as usize;
        if n > 3 {
            return Err(MatpowerError::UnsupportedPolynomial { row, n });
        }
        if c.len() < 4 + n {
            return Err(MatpowerError::TooFewColumns { block: "gencost", expected: 4 + n, got: c.len() });
        }
        let mut cost = [0.0; 3];
        cost[3 - n..].copy_from_slice(&c[4..4 + n]);
        gens.push(Gen {
            bus: r[0] as i64,
            pmin: r[9] / base_mva,
            pmax: r[8] / base_mva,
            qmin: r[4] / base_mva,
            qmax: r[3] / base_mva,
            status: r[7] as i64,
            cost,
        });
    }

    let branches = branch
        .iter()
        .map(|r| Branch {
            from: r[0] as i64,
            to: r[1] as i64,
            r: r[2],
            x: r[3],
            b: r[4],
            rate_a: r[5] / base_mva,
            tap: if r[8] == 0.0 { 1.0 } else { r[8] },
            shift: r[9].to_radians(),
            status: r[10] as i64,
            angmin: r.get(11).copied().unwrap_or(-360.0).to_radians(),
            angmax: r.get(12).copied().unwrap_or(360.0).to_radians(),
        })
        .collect();

    let storage = storage
        .map(|m| {
            m.iter()
                .map(|r| Storage {
                    bus: r[0] as i64,
                    energy_rating: r[1] / base_mva,
                    charge_rating: r[2] / base_mva,
                    discharge_rating: r[3] / base_mva,
                    charge_efficiency: r[4],
                    discharge_efficiency: r[5],
                })
                .collect()
        })
        .unwrap_or_default();

    Ok(CaseData { name: case_name(text), base_mva, buses, gens, branches, storage })
}

/// Checks every case invariant and accumulates all violations.
pub fn validate_case(case: &CaseData) -> Result<Inactive, Vec<Violation>> {
    let mut violations = Vec::new();
    let mut seen = HashMap::new();
    for b in &case.buses {
        if seen.insert(b.id, ()).is_some() {
            violations.push(Violation::DuplicateBus(b.id));
        }
        if b.vmin > b.vmax {
            violations.push(Violation::VoltageBounds { bus: b.id });
        }
    }
    match case.buses.iter().filter(|b| b.kind == BusType::Reference).count() {
        0 => violations.push(Violation::NoReferenceBus),
        1 => {}
        n => violations.push(Violation::MultipleReferenceBuses(n)),
    }
    let mut inactive = Inactive::default();
    for (i, g) in case.gens.iter().enumerate() {
        if !seen.contains_key(&g.bus) {
            violations.push(Violation::DanglingGen { gen: i, bus: g.bus });
        }
        match g.status {
            0 => inactive.gens.push(i),
            1 => {}
            s => violations.push(Violation::BadStatus { what: "generator", index: i, status: s }),
        }
    }
    for (i, br) in case.branches.iter().enumerate() {
        for bus in [br.from, br.to] {
            if !seen.contains_key(&bus) {
                violations.push(Violation::DanglingBranch { branch: i, bus });
            }
        }
        match br.status {
            0 => inactive.branches.push(i),
            1 => {}
            s => violations.push(Violation::BadStatus { what: "branch", index: i, status: s }),
        }
        if br.angmin > br.angmax {
            violations.push(Violation::AngleBounds { branch: i });
        }
        if br.r == 0.0 && br.x == 0.0 {
            violations.push(Violation::DegenerateBranch { branch: i });
        }
    }
    for (i, s) in case.storage.iter().enumerate() {
        if !seen.contains_key(&s.bus) {
            violations.push(Violation::DanglingStorage { device: i, bus: s.bus });
        }
    }
    if violations.is_empty() {
        Ok(inactive)
    } else {
        Err(violations)
    }
}

/// Parses and validates a case.
pub fn parse_case(text: &str) -> Result<CaseData, MatpowerError> {
    let case = parse_case_unvalidated(text)?;
    validate_case(&case).map_err(MatpowerError::Validation)?;
    Ok(case)
}

pub fn read_case(path: impl AsRef<Path>) -> Result<CaseData, MatpowerError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| MatpowerError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let mut case = parse_case(&text)?;
    if case.name.is_empty() {
        case.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    }
    Ok(case)
}

impl CaseData {
    /// Position of bus `id` in `buses`.
    pub fn bus_position(&self, id: i64) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn reference_bus(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.kind == BusType::Reference)
    }

    /// Copy with status-0 generators and branches removed.
    pub fn active(&self) -> CaseData {
        let mut c = self.clone();
        c.gens.retain(|g| g.status != 0);
        c.branches.retain(|b| b.status != 0);
        c
    }
}

/// A load series: `periods` rows, one column per bus, per-unit.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSeries {
    pub periods: usize,
    pub values: Vec<Vec<f64>>,
}

/// Parses a whitespace-separated periods-by-buses matrix in MW (or MVAr).
/// Blank lines and lines starting with `%` or `#` are skipped.
pub fn parse_load_series(text: &str, n_bus: usize, base_mva: f64) -> Result<LoadSeries, MatpowerError> {
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') || line.starts_with('#') {
            continue;
        }
        let row = values.len();
        let parsed = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map(|v| v / base_mva).map_err(|_| MatpowerError::SeriesToken { row, token: t.to_string() }))
            .collect::<Result<Vec<_>, _>>()?;
        if parsed.len() != n_bus {
            return Err(MatpowerError::SeriesColumns { row, expected: n_bus, got: parsed.len() });
        }
        values.push(parsed);
    }
    if values.is_empty() {
        return Err(MatpowerError::EmptySeries);
    }
    Ok(LoadSeries { periods: values.len(), values })
}
