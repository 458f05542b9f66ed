//! CSV and JSON-lines ingestion.
//!
//! Context featurization: numeric columns are standardized, categorical
//! columns one-hot encoded with a trailing bucket for unseen levels, and
//! date columns expanded to cyclical day-of-week and month features.
//! Empty numeric cells (`""`, `NA`, `NaN`, `?`, `null`) take the column
//! mean. Targets are min-max normalized over the whole file, except the
//! discrete pricing label which must already be an integer level.

use chrono::{Datelike, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use super::{EnvError, EnvKind, Environment, Outcome, Row, DISCRETE_LEVELS};

/// Column layout of a supported dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub name: String,
    pub kind: EnvKind,
    pub target: String,
    /// Columns that must be present besides the target.
    pub required: Vec<String>,
    pub categorical: Vec<String>,
    pub dates: Vec<String>,
    pub drop: Vec<String>,
    /// Row count of the published file, for sanity checks.
    pub expected_rows: Option<usize>,
    pub openml_id: Option<u32>,
}

pub const SCHEMA_NAMES: [&str; 7] = [
    "king_county",
    "perth",
    "dc_bike",
    "london_bike",
    "chicago_bike",
    "prudential",
    "generic",
];

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl Schema {
    /// Layout with no assumptions beyond the target column.
    pub fn generic(kind: EnvKind, target: &str) -> Self {
        Self {
            name: "generic".into(),
            kind,
            target: target.into(),
            required: vec![],
            categorical: vec![],
            dates: vec![],
            drop: vec![],
            expected_rows: None,
            openml_id: None,
        }
    }

    pub fn named(name: &str) -> Result<Self, EnvError> {
        let s = match name {
            "king_county" => Self {
                name: name.into(),
                kind: EnvKind::PricingContinuous,
                target: "price".into(),
                required: strings(&["bedrooms", "bathrooms", "sqft_living"]),
                categorical: strings(&["zipcode"]),
                dates: strings(&["date"]),
                drop: strings(&["id"]),
                expected_rows: Some(21613),
                openml_id: Some(42092),
            },
            "perth" => Self {
                name: name.into(),
                kind: EnvKind::PricingContinuous,
                target: "PRICE".into(),
                required: strings(&["BEDROOMS", "BATHROOMS", "LAND_AREA", "FLOOR_AREA"]),
                categorical: strings(&["SUBURB", "NEAREST_STN", "NEAREST_SCH", "POSTCODE"]),
                dates: strings(&["DATE_SOLD"]),
                drop: strings(&["ADDRESS"]),
                expected_rows: Some(33656),
                openml_id: Some(43822),
            },
            "dc_bike" => Self {
                name: name.into(),
                kind: EnvKind::Inventory,
                target: "count".into(),
                required: strings(&["temp", "humidity", "windspeed"]),
                categorical: strings(&["season", "weather"]),
                dates: vec![],
                drop: strings(&["casual", "registered"]),
                expected_rows: Some(17379),
                openml_id: Some(42712),
            },
            "london_bike" => Self {
                name: name.into(),
                kind: EnvKind::Inventory,
                target: "cnt".into(),
                required: strings(&["timestamp"]),
                categorical: strings(&["weather_code", "season"]),
                dates: strings(&["timestamp"]),
                drop: vec![],
                expected_rows: Some(17414),
                openml_id: None,
            },
            "chicago_bike" => Self {
                name: name.into(),
                kind: EnvKind::Inventory,
                target: "count".into(),
                required: vec![],
                categorical: vec![],
                dates: strings(&["date"]),
                drop: vec![],
                expected_rows: Some(34617),
                openml_id: None,
            },
            "prudential" => Self {
                name: name.into(),
                kind: EnvKind::PricingDiscrete,
                target: "Response".into(),
                required: vec![],
                categorical: strings(&["Product_Info_2"]),
                dates: vec![],
                drop: strings(&["Id"]),
                expected_rows: Some(59381),
                openml_id: None,
            },
            _ => return Err(EnvError::UnknownSchema(name.into())),
        };
        Ok(s)
    }
}

/// Fitted transform of one source column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ColumnTransform {
    Numeric {
        column: String,
        mean: f64,
        sd: f64,
    },
    /// One slot per level in first-seen order plus an unseen slot.
    Categorical {
        column: String,
        levels: Vec<String>,
    },
    Date {
        column: String,
    },
}

impl ColumnTransform {
    pub fn width(&self) -> usize {
        match self {
            ColumnTransform::Numeric { .. } => 1,
            ColumnTransform::Categorical { levels, .. } => levels.len() + 1,
            ColumnTransform::Date { .. } => 4,
        }
    }

    pub fn column(&self) -> &str {
        match self {
            ColumnTransform::Numeric { column, .. }
            | ColumnTransform::Categorical { column, .. }
            | ColumnTransform::Date { column } => column,
        }
    }
}

/// Context featurizer fitted on a file; can encode further rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub columns: Vec<ColumnTransform>,
}

impl Featurizer {
    pub fn dim(&self) -> usize {
        self.columns.iter().map(|c| c.width()).sum()
    }

    /// Encode a row given as column name to raw cell.
    pub fn transform(&self, cells: &BTreeMap<String, String>, row: usize) -> Result<Vec<f64>, EnvError> {
        let mut out = Vec::with_capacity(self.dim());
        for c in &self.columns {
            let cell = cells.get(c.column()).map(|s| s.trim()).unwrap_or("");
            encode(c, cell, row, &mut out)?;
        }
        Ok(out)
    }
}

fn encode(c: &ColumnTransform, cell: &str, row: usize, out: &mut Vec<f64>) -> Result<(), EnvError> {
    match c {
        ColumnTransform::Numeric { column, mean, sd } => {
            let v = parse_numeric(cell, row, column)?.unwrap_or(*mean);
            out.push(if *sd > 0.0 { (v - mean) / sd } else { 0.0 });
        }
        ColumnTransform::Categorical { levels, .. } => {
            let start = out.len();
            out.resize(start + levels.len() + 1, 0.0);
            let slot = levels.iter().position(|l| l == cell).unwrap_or(levels.len());
            out[start + slot] = 1.0;
        }
        ColumnTransform::Date { column } => {
            let d = parse_date(cell).ok_or_else(|| EnvError::Cell {
                row,
                column: column.clone(),
                message: format!("unparseable date `{cell}`"),
            })?;
            let dow = d.weekday().num_days_from_monday() as f64 / 7.0;
            let month = d.month0() as f64 / 12.0;
            out.extend([
                (TAU * dow).sin(),
                (TAU * dow).cos(),
                (TAU * month).sin(),
                (TAU * month).cos(),
            ]);
        }
    }
    Ok(())
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "NaN" | "nan" | "?" | "null" | "None")
}

fn parse_numeric(cell: &str, row: usize, column: &str) -> Result<Option<f64>, EnvError> {
    if is_missing(cell) {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(EnvError::Cell {
            row,
            column: column.into(),
            message: format!("non-numeric value `{cell}`"),
        }),
    }
}

fn parse_date(cell: &str) -> Option<NaiveDate> {
    const DATE_TIMES: [&str; 4] = [
        "%Y%m%dT%H%M%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S",
        "%m/%d/%Y %H:%M",
    ];
    const DATES: [&str; 3] = ["%Y-%m-%d", "%m/%d/%Y", "%d-%m-%Y"];
    for f in DATE_TIMES {
        if let Ok(d) = NaiveDateTime::parse_from_str(cell, f) {
            return Some(d.date());
        }
    }
    for f in DATES {
        if let Ok(d) = NaiveDate::parse_from_str(cell, f) {
            return Some(d);
        }
    }
    // month-year, as in "09-2018"
    NaiveDate::parse_from_str(&format!("01-{cell}"), "%d-%m-%Y").ok()
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<Vec<u8>, EnvError> {
    std::fs::read(path).map_err(|source| EnvError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Load a CSV file under `schema`, returning the environment and the
/// fitted featurizer. Rows keep their stored order.
pub fn ingest_csv(path: &Path, schema: &Schema) -> Result<(Environment, Featurizer), EnvError> {
    let bytes = read(path)?;
    let label = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(bytes.as_slice());
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    let records = reader.records().collect::<Result<Vec<_>, _>>()?;
    if records.is_empty() {
        return Err(EnvError::Empty(label));
    }
    let index = |name: &str| headers.iter().position(|h| h == name);
    let target_idx = index(&schema.target).ok_or_else(|| EnvError::MissingColumn {
        column: schema.target.clone(),
    })?;
    for c in schema.required.iter().chain(&schema.dates) {
        if index(c).is_none() {
            return Err(EnvError::MissingColumn { column: c.clone() });
        }
    }

    // fit column transforms
    let mut transforms = Vec::new();
    for (j, name) in headers.iter().enumerate() {
        if j == target_idx || schema.drop.contains(name) {
            continue;
        }
        let cells = records.iter().map(|r| r.get(j).unwrap_or(""));
        let t = if schema.dates.contains(name) {
            ColumnTransform::Date { column: name.clone() }
        } else if schema.categorical.contains(name) || (!schema.required.contains(name) && !all_numeric(cells.clone()))
        {
            let mut levels: Vec<String> = Vec::new();
            for c in cells {
                if !levels.iter().any(|l| l == c) {
                    levels.push(c.to_string());
                }
            }
            ColumnTransform::Categorical {
                column: name.clone(),
                levels,
            }
        } else {
            let mut sum = 0.0;
            let mut sq = 0.0;
            let mut n = 0usize;
            for (i, c) in cells.enumerate() {
                if let Some(v) = parse_numeric(c, i + 1, name)? {
                    sum += v;
                    sq += v * v;
                    n += 1;
                }
            }
            let mean = if n > 0 { sum / n as f64 } else { 0.0 };
            let var = if n > 1 {
                (sq - n as f64 * mean * mean) / (n - 1) as f64
            } else {
                0.0
            };
            ColumnTransform::Numeric {
                column: name.clone(),
                mean,
                sd: var.max(0.0).sqrt(),
            }
        };
        transforms.push((j, t));
    }

    // targets
    let mut raw_targets = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let cell = r.get(target_idx).unwrap_or("");
        let v = parse_numeric(cell, i + 1, &schema.target)?.ok_or_else(|| EnvError::Cell {
            row: i + 1,
            column: schema.target.clone(),
            message: "missing target".into(),
        })?;
        raw_targets.push(v);
    }
    let outcomes: Vec<Outcome> = match schema.kind {
        EnvKind::PricingDiscrete => raw_targets
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if v.fract() == 0.0 && v >= 1.0 && v <= DISCRETE_LEVELS as f64 {
                    Ok(Outcome::Label(v as u8))
                } else {
                    Err(EnvError::Cell {
                        row: i + 1,
                        column: schema.target.clone(),
                        message: format!("label {v} is not an integer in 1..={DISCRETE_LEVELS}"),
                    })
                }
            })
            .collect::<Result<_, _>>()?,
        EnvKind::PricingContinuous | EnvKind::Inventory => {
            let lo = raw_targets.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = raw_targets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            raw_targets
                .iter()
                .map(|&v| Outcome::Level(if span > 0.0 { (v - lo) / span } else { 0.5 }))
                .collect()
        }
        EnvKind::QueryOpt => {
            return Err(EnvError::Invalid("query-opt data is read from JSON lines".into()));
        }
    };

    let mut rows = Vec::with_capacity(records.len());
    for (i, (r, outcome)) in records.iter().zip(outcomes).enumerate() {
        let mut features = Vec::new();
        for (j, t) in &transforms {
            encode(t, r.get(*j).unwrap_or(""), i + 1, &mut features)?;
        }
        rows.push(Row { features, outcome });
    }
    let featurizer = Featurizer {
        columns: transforms.into_iter().map(|(_, t)| t).collect(),
    };
    let env = Environment::new(schema.kind, schema.name.clone(), schema.kind.default_beta(), rows)?
        .with_dataset_hash(sha256_hex(&bytes));
    Ok((env, featurizer))
}

fn all_numeric<'a, I: Iterator<Item = &'a str>>(cells: I) -> bool {
    cells.into_iter().all(|c| is_missing(c) || c.parse::<f64>().is_ok())
}

#[derive(Deserialize)]
struct QueryLine {
    features: Vec<f64>,
    rewards: Vec<f64>,
}

/// Query-optimizer replay: one JSON object per line with numeric
/// `features` and per-action fractional-change `rewards`.
pub fn ingest_query_jsonl(path: &Path) -> Result<Environment, EnvError> {
    let bytes = read(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let q: QueryLine = serde_json::from_str(line).map_err(|e| EnvError::Line {
            line: i + 1,
            message: e.to_string(),
        })?;
        if q.rewards.len() < 2 {
            return Err(EnvError::Line {
                line: i + 1,
                message: format!("need at least 2 actions, found {}", q.rewards.len()),
            });
        }
        if let Some(dim) = rows.first().map(|r: &Row| r.features.len()) {
            if q.features.len() != dim {
                return Err(EnvError::Line {
                    line: i + 1,
                    message: format!("expected {dim} features, found {}", q.features.len()),
                });
            }
        }
        rows.push(Row {
            features: q.features,
            outcome: Outcome::Rewards(q.rewards),
        });
    }
    if rows.is_empty() {
        return Err(EnvError::Empty(path.display().to_string()));
    }
    Ok(Environment::new(EnvKind::QueryOpt, "query_opt", 0.0, rows)?.with_dataset_hash(sha256_hex(&bytes)))
}

/// Write `env` in the format its ingestion path reads back: JSON lines for
/// query-opt, otherwise a CSV with columns `x0..` and target `y`.
pub fn write_dataset(env: &Environment, path: &Path) -> Result<(), EnvError> {
    let io = |source| EnvError::Io {
        path: path.display().to_string(),
        source,
    };
    if env.kind == EnvKind::QueryOpt {
        let mut out = String::new();
        for row in env.rows() {
            let rewards = match &row.outcome {
                Outcome::Rewards(r) => r,
                other => return Err(EnvError::Invalid(format!("query row with outcome {other:?}"))),
            };
            let line = serde_json::json!({ "features": row.features, "rewards": rewards });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        return std::fs::write(path, out).map_err(io);
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..env.context_dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for row in env.rows() {
        let y = match row.outcome {
            Outcome::Label(l) => l.to_string(),
            Outcome::Level(v) => v.to_string(),
            Outcome::Rewards(_) => return Err(EnvError::Invalid("reward row outside query-opt".into())),
        };
        let mut rec: Vec<String> = row.features.iter().map(f64::to_string).collect();
        rec.push(y);
        w.write_record(&rec)?;
    }
    w.flush().map_err(io)
}
