//! CSV loaders for the Adult census-income and ProPublica Compas datasets.
//!
//! Adult accepts the UCI files (`adult.data`, `adult.test`; no header, `|`
//! comment lines, labels optionally suffixed with `.`) or any CSV carrying a
//! header with the same column names. Passing a directory loads
//! `adult.data` and `adult.test` from it, in that order.
//!
//! Compas expects `compas-scores-two-years.csv` with its original header and
//! applies the usual screening filter: `|days_b_screening_arrest| <= 30`,
//! `is_recid != -1`, `c_charge_degree != "O"` and `score_text != "N/A"`.
//!
//! Both loaders drop rows with a missing (`?` or empty) value in any used
//! column, standardize numeric columns to mean 0 / sd 1 (population sd) and
//! one-hot encode categorical columns with levels in sorted order.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::TabularDataset;
use crate::error::{Error, Result};
use crate::fairness::{GroupId, GroupLabel};

/// How sensitive attributes map onto groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupMode {
    /// Race (white / non-white) crossed with gender: four groups.
    MultiGroup,
    /// Gender for Adult, race for Compas: two groups.
    TwoGroup,
}

impl std::str::FromStr for GroupMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multi-group" => Ok(Self::MultiGroup),
            "two-group" => Ok(Self::TwoGroup),
            other => Err(Error::config("mode", format!("unknown mode `{other}`"))),
        }
    }
}

pub const ADULT_COLUMNS: [&str; 15] = [
    "age",
    "workclass",
    "fnlwgt",
    "education",
    "education-num",
    "marital-status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital-gain",
    "capital-loss",
    "hours-per-week",
    "native-country",
    "income",
];

const ADULT_NUMERIC: [&str; 5] = [
    "age",
    "education-num",
    "capital-gain",
    "capital-loss",
    "hours-per-week",
];
const ADULT_CATEGORICAL: [&str; 7] = [
    "workclass",
    "marital-status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "native-country",
];

pub const COMPAS_COLUMNS: [&str; 13] = [
    "sex",
    "age",
    "age_cat",
    "race",
    "juv_fel_count",
    "juv_misd_count",
    "juv_other_count",
    "priors_count",
    "c_charge_degree",
    "two_year_recid",
    "days_b_screening_arrest",
    "is_recid",
    "score_text",
];

const COMPAS_NUMERIC: [&str; 5] = [
    "age",
    "juv_fel_count",
    "juv_misd_count",
    "juv_other_count",
    "priors_count",
];
const COMPAS_CATEGORICAL: [&str; 4] = ["sex", "age_cat", "race", "c_charge_degree"];

/// Row accounting for a load.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub rows_read: usize,
    pub dropped_missing: usize,
    pub dropped_unparseable: usize,
    pub dropped_filter: usize,
    pub rows_kept: usize,
}

impl std::fmt::Display for LoadReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} rows read, {} kept ({} missing values, {} unparseable, {} filtered)",
            self.rows_read,
            self.rows_kept,
            self.dropped_missing,
            self.dropped_unparseable,
            self.dropped_filter
        )
    }
}

fn normalize_name(name: &str) -> String {
    name.trim().to_ascii_lowercase().replace(['_', '.'], "-")
}

/// Positions of `wanted` columns in `header`, or the list of missing ones.
fn resolve_columns(header: &[String], wanted: &[&str]) -> Result<Vec<usize>> {
    let index: HashMap<String, usize> = header
        .iter()
        .enumerate()
        .map(|(i, h)| (normalize_name(h), i))
        .collect();
    let mut missing = Vec::new();
    let mut positions = Vec::with_capacity(wanted.len());
    for w in wanted {
        match index.get(&normalize_name(w)) {
            Some(&i) => positions.push(i),
            None => missing.push(w.to_string()),
        }
    }
    if missing.is_empty() {
        Ok(positions)
    } else {
        Err(Error::Schema { missing })
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn adult_files(path: &Path) -> Vec<PathBuf> {
    if path.is_dir() {
        ["adult.data", "adult.test"]
            .iter()
            .map(|f| path.join(f))
            .filter(|p| p.exists())
            .collect()
    } else {
        vec![path.to_path_buf()]
    }
}

/// Reads raw records with columns reordered as `wanted`. Rows whose field
/// count does not match the header are counted as unparseable.
fn read_adult_records(path: &Path, report: &mut LoadReport) -> Result<Vec<Vec<String>>> {
    let files = adult_files(path);
    if files.is_empty() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no adult.data or adult.test"),
        ));
    }
    let mut out = Vec::new();
    for file in files {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'|'))
            .from_reader(open(&file)?);
        let mut positions: Option<Vec<usize>> = None;
        let mut width = ADULT_COLUMNS.len();
        for (k, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() == 1 && record[0].is_empty() {
                continue;
            }
            if k == 0 && record.iter().any(|f| normalize_name(f) == "age") {
                let header: Vec<String> = record.iter().map(String::from).collect();
                positions = Some(resolve_columns(&header, &ADULT_COLUMNS)?);
                width = header.len();
                continue;
            }
            report.rows_read += 1;
            if record.len() != width {
                report.dropped_unparseable += 1;
                continue;
            }
            let fields = match &positions {
                Some(pos) => pos.iter().map(|&i| record[i].to_string()).collect(),
                None => record.iter().map(String::from).collect(),
            };
            out.push(fields);
        }
    }
    Ok(out)
}

fn read_compas_records(path: &Path, report: &mut LoadReport) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    let positions = resolve_columns(&header, &COMPAS_COLUMNS)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        report.rows_read += 1;
        if record.len() != header.len() {
            report.dropped_unparseable += 1;
            continue;
        }
        out.push(positions.iter().map(|&i| record[i].to_string()).collect());
    }
    Ok(out)
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field == "?"
}

/// Shared encoder: `columns` names the fields of every record.
struct Encoder<'a> {
    columns: &'a [&'a str],
    numeric: &'a [&'a str],
    categorical: &'a [&'a str],
}

struct Encoded {
    features: Vec<f64>,
    names: Vec<String>,
}

impl Encoder<'_> {
    fn col(&self, name: &str) -> usize {
        self.columns
            .iter()
            .position(|c| *c == name)
            .expect("encoder column list is static")
    }

    fn used(&self) -> impl Iterator<Item = usize> + '_ {
        self.numeric
            .iter()
            .chain(self.categorical)
            .map(|c| self.col(c))
    }

    fn has_missing(&self, record: &[String]) -> bool {
        self.used().any(|i| is_missing(&record[i]))
    }

    fn numeric_ok(&self, record: &[String]) -> bool {
        self.numeric
            .iter()
            .all(|c| record[self.col(c)].parse::<f64>().is_ok_and(f64::is_finite))
    }

    fn encode(&self, records: &[Vec<String>]) -> Encoded {
        let n = records.len();
        let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
        for name in self.numeric {
            let i = self.col(name);
            let mut values: Vec<f64> = records.iter().map(|r| r[i].parse().unwrap()).collect();
            standardize(&mut values);
            columns.push((name.to_string(), values));
        }
        for name in self.categorical {
            let i = self.col(name);
            let levels: BTreeSet<&str> = records.iter().map(|r| r[i].as_str()).collect();
            for level in levels {
                let values = records
                    .iter()
                    .map(|r| if r[i] == level { 1.0 } else { 0.0 })
                    .collect();
                columns.push((format!("{name}={level}"), values));
            }
        }
        let dim = columns.len();
        let mut features = vec![0.0; n * dim];
        for (k, (_, values)) in columns.iter().enumerate() {
            for (row, v) in values.iter().enumerate() {
                features[row * dim + k] = *v;
            }
        }
        Encoded {
            features,
            names: columns.into_iter().map(|(name, _)| name).collect(),
        }
    }
}

/// Rescales to mean 0 and population sd 1; constant columns become all zero.
pub fn standardize(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    for v in values.iter_mut() {
        *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
    }
}

fn group_labels(names: &[&str]) -> Vec<GroupLabel> {
    names
        .iter()
        .enumerate()
        .map(|(i, n)| GroupLabel::new(i, *n))
        .collect()
}

const MULTI_GROUPS: [&str; 4] = ["white-male", "white-female", "non-white-male", "non-white-female"];

fn multi_group(white: bool, male: bool) -> GroupId {
    2 * (!white as usize) + (!male as usize)
}

/// Loads Adult; the label is `income > 50K`.
pub fn load_adult(path: &Path, mode: GroupMode) -> Result<TabularDataset> {
    let mut report = LoadReport::default();
    let raw = read_adult_records(path, &mut report)?;
    let encoder = Encoder {
        columns: &ADULT_COLUMNS,
        numeric: &ADULT_NUMERIC,
        categorical: &ADULT_CATEGORICAL,
    };
    let (race, sex, income) = (encoder.col("race"), encoder.col("sex"), encoder.col("income"));
    let mut records = Vec::with_capacity(raw.len());
    for r in raw {
        if encoder.has_missing(&r) || is_missing(&r[income]) {
            report.dropped_missing += 1;
        } else if !encoder.numeric_ok(&r) {
            report.dropped_unparseable += 1;
        } else {
            records.push(r);
        }
    }
    report.rows_kept = records.len();
    let labels = records
        .iter()
        .map(|r| r[income].trim_end_matches('.') == ">50K")
        .collect();
    let (groups, labels_for_groups) = match mode {
        GroupMode::MultiGroup => (
            records
                .iter()
                .map(|r| multi_group(r[race] == "White", r[sex] == "Male"))
                .collect(),
            group_labels(&MULTI_GROUPS),
        ),
        GroupMode::TwoGroup => (
            records.iter().map(|r| (r[sex] != "Male") as GroupId).collect(),
            group_labels(&["male", "female"]),
        ),
    };
    let encoded = encoder.encode(&records);
    log::info!("adult {}: {report}", path.display());
    TabularDataset::new(
        encoded.features,
        encoded.names,
        labels,
        groups,
        labels_for_groups,
        format!("adult {}: {report}", path.display()),
    )
}

/// Loads Compas; the label is `two_year_recid`.
pub fn load_compas(path: &Path, mode: GroupMode) -> Result<TabularDataset> {
    let mut report = LoadReport::default();
    let raw = read_compas_records(path, &mut report)?;
    let encoder = Encoder {
        columns: &COMPAS_COLUMNS,
        numeric: &COMPAS_NUMERIC,
        categorical: &COMPAS_CATEGORICAL,
    };
    let col = |name| encoder.col(name);
    let (race, sex, label) = (col("race"), col("sex"), col("two_year_recid"));
    let (days, is_recid, degree, score) = (
        col("days_b_screening_arrest"),
        col("is_recid"),
        col("c_charge_degree"),
        col("score_text"),
    );
    let mut records = Vec::with_capacity(raw.len());
    for r in raw {
        let screened = r[days]
            .parse::<f64>()
            .is_ok_and(|d| (-30.0..=30.0).contains(&d))
            && r[is_recid] != "-1"
            && r[degree] != "O"
            && r[score] != "N/A";
        if !screened {
            report.dropped_filter += 1;
        } else if encoder.has_missing(&r) || is_missing(&r[label]) {
            report.dropped_missing += 1;
        } else if !encoder.numeric_ok(&r) || !matches!(r[label].as_str(), "0" | "1") {
            report.dropped_unparseable += 1;
        } else {
            records.push(r);
        }
    }
    report.rows_kept = records.len();
    let labels = records.iter().map(|r| r[label] == "1").collect();
    let (groups, labels_for_groups) = match mode {
        GroupMode::MultiGroup => (
            records
                .iter()
                .map(|r| multi_group(r[race] == "Caucasian", r[sex] == "Male"))
                .collect(),
            group_labels(&MULTI_GROUPS),
        ),
        GroupMode::TwoGroup => (
            records.iter().map(|r| (r[race] != "Caucasian") as GroupId).collect(),
            group_labels(&["white", "non-white"]),
        ),
    };
    let encoded = encoder.encode(&records);
    log::info!("compas {}: {report}", path.display());
    TabularDataset::new(
        encoded.features,
        encoded.names,
        labels,
        groups,
        labels_for_groups,
        format!("compas {}: {report}", path.display()),
    )
}
