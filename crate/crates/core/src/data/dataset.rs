use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::fairness::{GroupId, GroupLabel};

/// A preprocessed tabular dataset held as a dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<bool>,
    groups: Vec<GroupId>,
    group_labels: Vec<GroupLabel>,
    feature_names: Vec<String>,
    provenance: String,
}

impl TabularDataset {
    pub fn new(
        features: Vec<f64>,
        feature_names: Vec<String>,
        labels: Vec<bool>,
        groups: Vec<GroupId>,
        group_labels: Vec<GroupLabel>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let dim = feature_names.len();
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyDistribution);
        }
        if dim == 0 || features.len() != n * dim {
            return Err(Error::Shape(format!(
                "{} feature values for {n} samples of dimension {dim}",
                features.len()
            )));
        }
        if groups.len() != n {
            return Err(Error::Shape(format!("{} group ids for {n} samples", groups.len())));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("features must be finite".into()));
        }
        for (expected, label) in group_labels.iter().enumerate() {
            if label.id != expected {
                return Err(Error::Domain("group ids must be contiguous from 0".into()));
            }
        }
        if let Some(g) = groups.iter().find(|&&g| g >= group_labels.len()) {
            return Err(Error::Domain(format!("group id {g} has no label")));
        }
        Ok(Self {
            features,
            dim,
            labels,
            groups,
            group_labels,
            feature_names,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn label(&self, i: usize) -> bool {
        self.labels[i]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn group(&self, i: usize) -> GroupId {
        self.groups[i]
    }

    pub fn groups(&self) -> &[GroupId] {
        &self.groups
    }

    pub fn group_labels(&self) -> &[GroupLabel] {
        &self.group_labels
    }

    pub fn group_count(&self) -> usize {
        self.group_labels.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> TabularDataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        TabularDataset {
            features,
            dim: self.dim,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            groups: indices.iter().map(|&i| self.groups[i]).collect(),
            group_labels: self.group_labels.clone(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Number of samples in each group.
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.group_count()];
        for &g in &self.groups {
            sizes[g] += 1;
        }
        sizes
    }

    /// Writes the columnar cache format: a header line of feature names
    /// followed by `label,group_id`, then one comma-separated row per sample.
    pub fn write_cache<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.extend(["label", "group_id"]);
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut record: Vec<String> = self.row(i).iter().map(|x| format!("{x:?}")).collect();
            record.push((self.labels[i] as u8).to_string());
            record.push(self.groups[i].to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<cache>", e))?;
        Ok(())
    }

    /// Reads the cache format back; group names are not stored, so the
    /// caller supplies them.
    pub fn read_cache<R: Read>(reader: R, group_labels: Vec<GroupLabel>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let cols = header.len();
        if cols < 3 || &header[cols - 2] != "label" || &header[cols - 1] != "group_id" {
            return Err(Error::Schema {
                missing: vec!["label".into(), "group_id".into()],
            });
        }
        let feature_names: Vec<String> = header.iter().take(cols - 2).map(String::from).collect();
        let (mut features, mut labels, mut groups) = (Vec::new(), Vec::new(), Vec::new());
        for record in r.records() {
            let record = record?;
            for field in record.iter().take(cols - 2) {
                features.push(parse_field(field)?);
            }
            labels.push(parse_field(&record[cols - 2])? != 0.0);
            groups.push(parse_field(&record[cols - 1])? as GroupId);
        }
        Self::new(features, feature_names, labels, groups, group_labels, "cache")
    }
}

fn parse_field(field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Domain(format!("cannot parse `{field}` as a number")))
}
