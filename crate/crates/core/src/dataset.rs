//! Labeled input points read from CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub features: Vec<f64>,
    pub label: usize,
}

impl LabeledPoint {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Self { features, label }
    }
}

/// Which CSV column holds the integer label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelColumn {
    #[default]
    Last,
    #[serde(untagged)]
    Index(usize),
}

impl FromStr for LabelColumn {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("last") {
            Ok(LabelColumn::Last)
        } else {
            s.parse()
                .map(LabelColumn::Index)
                .map_err(|_| format!("label column must be an index or \"last\", got {s:?}"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<LabeledPoint>,
    dimension: usize,
    label_count: usize,
}

impl Dataset {
    /// `label_count` defaults to one more than the largest label present.
    pub fn new(points: Vec<LabeledPoint>, label_count: Option<usize>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::EmptyDataset);
        };
        let dimension = first.features.len();
        if dimension == 0 {
            return Err(Error::InvalidDataset("points have no features".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.features.len() != dimension {
                return Err(Error::DimensionMismatch {
                    context: format!("point {i}"),
                    expected: dimension,
                    actual: p.features.len(),
                });
            }
            if p.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "point {i} has a non-finite feature"
                )));
            }
        }
        let max_label = points.iter().map(|p| p.label).max().unwrap_or(0);
        let label_count = label_count.unwrap_or(max_label + 1);
        if max_label >= label_count {
            return Err(Error::InvalidDataset(format!(
                "label {max_label} is outside the declared {label_count} labels"
            )));
        }
        Ok(Self {
            points,
            dimension,
            label_count,
        })
    }

    pub fn points(&self) -> &[LabeledPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn label_histogram(&self) -> BTreeMap<usize, usize> {
        label_histogram(&self.points)
    }

    /// Rescales every feature column to `[0, 1]`. Constant columns map to 0.
    pub fn min_max_scaled(&self) -> Dataset {
        let mut lo = vec![f64::INFINITY; self.dimension];
        let mut hi = vec![f64::NEG_INFINITY; self.dimension];
        for p in &self.points {
            for (j, &v) in p.features.iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        let points = self
            .points
            .iter()
            .map(|p| {
                let features = p
                    .features
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let span = hi[j] - lo[j];
                        if span > 0.0 {
                            (v - lo[j]) / span
                        } else {
                            0.0
                        }
                    })
                    .collect();
                LabeledPoint::new(features, p.label)
            })
            .collect();
        Dataset {
            points,
            dimension: self.dimension,
            label_count: self.label_count,
        }
    }

    /// Writes features followed by the label, one point per line.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            write_row(&mut out, &p.features, Some(p.label));
        }
        out
    }
}

pub fn label_histogram(points: &[LabeledPoint]) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for p in points {
        *counts.entry(p.label).or_insert(0) += 1;
    }
    counts
}

/// Appends one CSV row. Floats use the shortest representation that parses
/// back to the same bits.
pub(crate) fn write_row(out: &mut String, values: &[f64], label: Option<usize>) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{v}").unwrap();
    }
    if let Some(l) = label {
        write!(out, ",{l}").unwrap();
    }
    out.push('\n');
}

pub fn load_dataset(
    path: impl AsRef<Path>,
    label_column: LabelColumn,
    header: bool,
) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, label_column, header).map_err(|e| match e {
        Error::Parse { context, message } => Error::Parse {
            context: format!("{}:{context}", path.display()),
            message,
        },
        other => other,
    })
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ds.to_csv_string()).map_err(|e| Error::io(path, e))
}

pub fn parse_dataset(text: &str, label_column: LabelColumn, header: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut points = Vec::new();
    let mut arity = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse("csv", e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let width = record.len();
        match arity {
            None => arity = Some(width),
            Some(a) if a != width => {
                return Err(Error::parse(
                    format!("line {line}"),
                    format!("ragged row: {width} columns, expected {a}"),
                ))
            }
            _ => {}
        }
        if width < 2 {
            return Err(Error::parse(
                format!("line {line}"),
                "need at least one feature column and a label column",
            ));
        }
        let label_idx = match label_column {
            LabelColumn::Last => width - 1,
            LabelColumn::Index(i) if i < width => i,
            LabelColumn::Index(i) => {
                return Err(Error::parse(
                    format!("line {line}"),
                    format!("label column {i} out of range for {width} columns"),
                ))
            }
        };
        let mut features = Vec::with_capacity(width - 1);
        let mut label = 0;
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                Error::parse(
                    format!("line {line}, column {col}"),
                    format!("non-numeric cell {cell:?}"),
                )
            })?;
            if col == label_idx {
                if !(value >= 0.0 && value.fract() == 0.0 && value < usize::MAX as f64) {
                    return Err(Error::parse(
                        format!("line {line}, column {col}"),
                        format!("label {cell:?} is not a nonnegative integer"),
                    ));
                }
                label = value as usize;
            } else {
                features.push(value);
            }
        }
        points.push(LabeledPoint::new(features, label));
    }
    Dataset::new(points, None)
}
