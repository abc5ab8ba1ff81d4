//! Series ingestion and min-max scaling.

use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    pub name: String,
    pub timestamps: Option<Vec<String>>,
    pub values: Vec<f64>,
}

impl SeriesFrame {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::EmptySeries);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: Some(i as u64 + 1),
                message: format!("non-finite value {}", values[i]),
            });
        }
        Ok(Self {
            name: name.into(),
            timestamps: None,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A CSV column, by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl FromStr for ColumnRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::InvalidConfig("empty column reference".into()));
        }
        Ok(match s.parse::<usize>() {
            Ok(i) => Self::Index(i),
            Err(_) => Self::Name(s.to_string()),
        })
    }
}

impl Default for ColumnRef {
    fn default() -> Self {
        Self::Index(0)
    }
}

impl std::fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Name(n) => write!(f, "{n}"),
            Self::Index(i) => write!(f, "#{i}"),
        }
    }
}

fn parse_cell(cell: &str, row: u64) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        row: Some(row),
        message: format!("'{cell}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row: Some(row),
            message: format!("non-finite value '{cell}'"),
        });
    }
    Ok(v)
}

/// Loads one column. Rows are reported by their 1-based line in the file.
pub fn load_csv(path: &Path, column: &ColumnRef) -> Result<SeriesFrame> {
    let (frame, _) = load_csv_columns(path, column, None)?;
    Ok(frame)
}

/// Loads a target column and optionally an exogenous column of the same
/// file. A header row is expected when a column is referenced by name and
/// detected otherwise (first row not numeric in the target column).
pub fn load_csv_columns(
    path: &Path,
    column: &ColumnRef,
    exog: Option<&ColumnRef>,
) -> Result<(SeriesFrame, Option<SeriesFrame>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                Error::FileNotFound(path.to_path_buf())
            }
            _ => Error::Parse {
                row: None,
                message: e.to_string(),
            },
        })?;

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            row: e.position().map(|p| p.line()),
            message: e.to_string(),
        })?;
        let line = record
            .position()
            .map_or(rows.len() as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, record));
    }
    if rows.is_empty() {
        return Err(Error::EmptySeries);
    }

    let first = &rows[0].1;
    let resolve = |c: &ColumnRef| -> Result<usize> {
        match c {
            ColumnRef::Name(name) => {
                first
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::Parse {
                        row: Some(rows[0].0),
                        message: format!("column '{name}' not found in header"),
                    })
            }
            ColumnRef::Index(i) if *i < first.len() => Ok(*i),
            ColumnRef::Index(i) => Err(Error::Parse {
                row: Some(rows[0].0),
                message: format!("column {i} out of range ({} columns)", first.len()),
            }),
        }
    };
    let target = resolve(column)?;
    let exog_idx = exog.map(resolve).transpose()?;
    let by_name = matches!(column, ColumnRef::Name(_)) || matches!(exog, Some(ColumnRef::Name(_)));
    let has_header = by_name || first.get(target).is_some_and(|c| c.parse::<f64>().is_err());
    let name = if has_header {
        first[target].to_string()
    } else {
        format!("column_{target}")
    };
    let exog_name = exog_idx.map(|i| {
        if has_header {
            first[i].to_string()
        } else {
            format!("column_{i}")
        }
    });
    let stamp_col = (target != 0 && exog_idx != Some(0)).then_some(0);

    let body = &rows[usize::from(has_header)..];
    let mut values = Vec::with_capacity(body.len());
    let mut xs = Vec::new();
    let mut stamps = Vec::new();
    let cell = |record: &csv::StringRecord, i: usize, line: u64| -> Result<f64> {
        let raw = record.get(i).ok_or_else(|| Error::Parse {
            row: Some(line),
            message: format!("missing column {i}"),
        })?;
        parse_cell(raw, line)
    };
    for (line, record) in body {
        values.push(cell(record, target, *line)?);
        if let Some(i) = exog_idx {
            xs.push(cell(record, i, *line)?);
        }
        if let Some(i) = stamp_col {
            stamps.push(record.get(i).unwrap_or_default().to_string());
        }
    }

    let mut frame = SeriesFrame::new(name, values)?;
    if stamp_col.is_some() {
        frame.timestamps = Some(stamps.clone());
    }
    let exog_frame = match exog_name {
        Some(n) => {
            let mut f = SeriesFrame::new(n, xs)?;
            f.timestamps = frame.timestamps.clone();
            Some(f)
        }
        None => None,
    };
    Ok((frame, exog_frame))
}

/// Affine map of `[lo, hi]` onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub lo: f64,
    pub hi: f64,
}

impl MinMax {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(Error::DegenerateRange);
        }
        Ok(Self { lo, hi })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }

    pub fn invert(&self, u: f64) -> f64 {
        self.lo + u * (self.hi - self.lo)
    }
}

/// Scales the whole series with min/max taken over `fit_range` only.
pub fn normalize_minmax(
    series: &SeriesFrame,
    fit_range: Range<usize>,
) -> Result<(SeriesFrame, f64, f64)> {
    let segment = series.values.get(fit_range.clone()).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "fit range {fit_range:?} outside series of length {}",
            series.len()
        ))
    })?;
    let scale = MinMax::fit(segment)?;
    let out = SeriesFrame {
        name: series.name.clone(),
        timestamps: series.timestamps.clone(),
        values: series.values.iter().map(|&v| scale.apply(v)).collect(),
    };
    Ok((out, scale.lo, scale.hi))
}
