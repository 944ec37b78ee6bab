//! CSV ingestion with a declarative binarization recipe.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BinaryDataset, FeatureLayout, OneHotGroup};
use crate::error::{Error, Result};

/// How the non-label columns of a CSV file become binary attributes.
/// Columns that are not listed must already hold 0/1 values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub label_column: String,
    /// Label values in class-id order. Defaults to first-seen order.
    #[serde(default)]
    pub label_levels: Option<Vec<String>>,
    #[serde(default)]
    pub columns: Vec<ColumnSpec>,
    /// Columns to ignore entirely.
    #[serde(default)]
    pub drop: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    /// Cell must be `0` or `1`.
    Binary,
    /// One bit: 1 when the value is one of `positive`.
    Indicator { positive: Vec<String> },
    /// One bit: 1 when the numeric value is at least `threshold`.
    Threshold { threshold: f64 },
    /// One-hot group. `map` renames raw values before lookup; without
    /// `levels`, levels are taken in first-seen order.
    Categorical {
        #[serde(default)]
        levels: Option<Vec<String>>,
        #[serde(default)]
        map: BTreeMap<String, String>,
    },
    /// One-hot group over `edges.len() + 1` bins; a value equal to an edge
    /// falls in the upper bin.
    Binned { edges: Vec<f64> },
}

impl EncodingSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }
}

enum Encoder {
    Binary,
    Indicator(Vec<String>),
    Threshold(f64),
    Categorical {
        levels: Vec<String>,
        fixed: bool,
        map: BTreeMap<String, String>,
    },
    Binned(Vec<f64>),
}

struct Column {
    name: String,
    index: usize,
    encoder: Encoder,
}

fn parse_number(column: &str, row: usize, value: &str) -> Result<f64> {
    value.parse::<f64>().map_err(|_| Error::MalformedRow {
        row,
        reason: format!("column `{column}` value `{value}` is not numeric"),
    })
}

/// Reads a headered CSV file and binarizes it according to `spec`.
/// Attribute order follows the file's column order; categorical levels keep
/// their declared (or first-seen) order.
pub fn load_csv(path: &Path, spec: &EncodingSpec) -> Result<BinaryDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv_reader(file, spec)
}

pub fn load_csv_reader<R: std::io::Read>(reader: R, spec: &EncodingSpec) -> Result<BinaryDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let label_idx = headers
        .iter()
        .position(|h| *h == spec.label_column)
        .ok_or_else(|| Error::param(format!("label column `{}` not in header", spec.label_column)))?;
    let declared: HashMap<&str, &ColumnKind> =
        spec.columns.iter().map(|c| (c.name.as_str(), &c.kind)).collect();
    for c in &spec.columns {
        if !headers.contains(&c.name) {
            return Err(Error::param(format!("declared column `{}` not in header", c.name)));
        }
    }

    let mut columns = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if i == label_idx || spec.drop.contains(h) {
            continue;
        }
        let encoder = match declared.get(h.as_str()) {
            None | Some(ColumnKind::Binary) => Encoder::Binary,
            Some(ColumnKind::Indicator { positive }) => Encoder::Indicator(positive.clone()),
            Some(ColumnKind::Threshold { threshold }) => Encoder::Threshold(*threshold),
            Some(ColumnKind::Categorical { levels, map }) => Encoder::Categorical {
                fixed: levels.is_some(),
                levels: levels.clone().unwrap_or_default(),
                map: map.clone(),
            },
            Some(ColumnKind::Binned { edges }) => {
                if edges.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::param(format!("bin edges of `{h}` must increase strictly")));
                }
                Encoder::Binned(edges.clone())
            }
        };
        columns.push(Column {
            name: h.clone(),
            index: i,
            encoder,
        });
    }

    let mut label_levels = spec.label_levels.clone().unwrap_or_default();
    let labels_fixed = spec.label_levels.is_some();
    // per column, per row: either a bit or a level id
    let mut raw: Vec<Vec<usize>> = vec![Vec::new(); columns.len()];
    let mut labels = Vec::new();

    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::MalformedRow {
            row: r,
            reason: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::MalformedRow {
                row: r,
                reason: format!("{} fields, header has {}", record.len(), headers.len()),
            });
        }
        let lv = record[label_idx].trim();
        let class = match label_levels.iter().position(|l| l == lv) {
            Some(c) => c,
            None if !labels_fixed => {
                label_levels.push(lv.to_string());
                label_levels.len() - 1
            }
            None => {
                return Err(Error::UnknownLabel {
                    row: r,
                    value: lv.to_string(),
                })
            }
        };
        labels.push(class);

        for (c, col) in columns.iter_mut().enumerate() {
            let v = record[col.index].trim();
            let code = match &mut col.encoder {
                Encoder::Binary => match v {
                    "0" => 0,
                    "1" => 1,
                    _ => {
                        return Err(Error::NonBinaryCell {
                            column: col.name.clone(),
                            row: r,
                            value: v.to_string(),
                        })
                    }
                },
                Encoder::Indicator(pos) => usize::from(pos.iter().any(|p| p == v)),
                Encoder::Threshold(t) => usize::from(parse_number(&col.name, r, v)? >= *t),
                Encoder::Binned(edges) => {
                    let x = parse_number(&col.name, r, v)?;
                    edges.partition_point(|&e| e <= x)
                }
                Encoder::Categorical { levels, fixed, map } => {
                    let key = map.get(v).map(String::as_str).unwrap_or(v);
                    match levels.iter().position(|l| l == key) {
                        Some(i) => i,
                        None if !*fixed => {
                            levels.push(key.to_string());
                            levels.len() - 1
                        }
                        None => {
                            return Err(Error::MalformedRow {
                                row: r,
                                reason: format!("column `{}` has undeclared level `{v}`", col.name),
                            })
                        }
                    }
                }
            };
            raw[c].push(code);
        }
    }

    let mut names = Vec::new();
    let mut groups = Vec::new();
    let mut widths = Vec::new();
    for col in &columns {
        let start = names.len();
        match &col.encoder {
            Encoder::Binary | Encoder::Indicator(_) | Encoder::Threshold(_) => {
                names.push(col.name.clone());
            }
            Encoder::Categorical { levels, .. } => {
                for l in levels {
                    names.push(format!("{}={}", col.name, l));
                }
            }
            Encoder::Binned(edges) => {
                let mut lo = "-inf".to_string();
                for e in edges {
                    names.push(format!("{}[{},{})", col.name, lo, e));
                    lo = e.to_string();
                }
                names.push(format!("{}[{},inf)", col.name, lo));
            }
        }
        let width = names.len() - start;
        if matches!(col.encoder, Encoder::Categorical { .. } | Encoder::Binned(_)) {
            groups.push(OneHotGroup::new((start..start + width).collect()));
        }
        widths.push((start, width, matches!(col.encoder, Encoder::Categorical { .. } | Encoder::Binned(_))));
    }

    let m = names.len();
    let rows = (0..labels.len())
        .map(|r| {
            let mut row = vec![0u8; m];
            for (c, &(start, _, one_hot)) in widths.iter().enumerate() {
                if one_hot {
                    row[start + raw[c][r]] = 1;
                } else {
                    row[start] = raw[c][r] as u8;
                }
            }
            row
        })
        .collect();

    let layout = FeatureLayout::new(m, groups)?;
    BinaryDataset::new(layout, label_levels.len().max(2), rows, labels)?.with_feature_names(names)
}
