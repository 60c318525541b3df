//! Datasets: design matrix, response, optional group partition, and the
//! centering record, plus CSV ingestion/emission.
//!
//! CSV layout: a header row, numeric feature columns, and the response in
//! the last column.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use std::path::Path;

/// A partition of the coefficient indices `0..p` into disjoint groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
    p: usize,
}

impl GroupPartition {
    pub fn new(groups: Vec<Vec<usize>>, p: usize) -> Result<Self> {
        let mut seen = vec![false; p];
        for g in &groups {
            if g.is_empty() {
                return Err(Error::Data("empty group in partition".into()));
            }
            for &j in g {
                if j >= p {
                    return Err(Error::Data(format!("group index {j} out of range for p={p}")));
                }
                if seen[j] {
                    return Err(Error::Data(format!("index {j} appears in two groups")));
                }
                seen[j] = true;
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::Data("partition does not cover all coefficients".into()));
        }
        Ok(Self { groups, p })
    }

    /// The trivial partition into singletons.
    pub fn singletons(p: usize) -> Self {
        Self { groups: (0..p).map(|j| vec![j]).collect(), p }
    }

    /// Contiguous blocks of equal size; `p` must be a multiple of `size`.
    pub fn contiguous_blocks(p: usize, size: usize) -> Result<Self> {
        if size == 0 || p % size != 0 {
            return Err(Error::Data(format!("cannot split p={p} into blocks of {size}")));
        }
        let groups = (0..p / size).map(|g| (g * size..(g + 1) * size).collect()).collect();
        Self::new(groups, p)
    }

    /// Parses a `"1-4,5-8"`-style 1-based inclusive range list.
    pub fn parse(spec: &str, p: usize) -> Result<Self> {
        let mut groups = Vec::new();
        for part in spec.split(',') {
            let part = part.trim();
            let (lo, hi) = match part.split_once('-') {
                Some((a, b)) => {
                    let lo: usize = a.trim().parse().map_err(|_| {
                        Error::Data(format!("bad group range '{part}' in '{spec}'"))
                    })?;
                    let hi: usize = b.trim().parse().map_err(|_| {
                        Error::Data(format!("bad group range '{part}' in '{spec}'"))
                    })?;
                    (lo, hi)
                }
                None => {
                    let v: usize = part
                        .parse()
                        .map_err(|_| Error::Data(format!("bad group index '{part}' in '{spec}'")))?;
                    (v, v)
                }
            };
            if lo == 0 || hi < lo {
                return Err(Error::Data(format!("bad group range '{part}' (1-based, lo<=hi)")));
            }
            groups.push(((lo - 1)..hi).collect());
        }
        Self::new(groups, p)
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.groups.iter()
    }

    pub fn group(&self, l: usize) -> &[usize] {
        &self.groups[l]
    }

    /// True when every group is a singleton.
    pub fn is_trivial(&self) -> bool {
        self.groups.iter().all(|g| g.len() == 1)
    }
}

/// Column means of the design and the response mean removed before a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Centering {
    pub x_means: Array1<f64>,
    pub y_mean: f64,
}

impl Centering {
    /// Intercept implied by centered-fit slopes: `y_mean - x_means . b`.
    pub fn intercept(&self, b: &Array1<f64>) -> f64 {
        self.y_mean - self.x_means.dot(b)
    }
}

/// A regression dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub groups: Option<GroupPartition>,
    /// Centering applied to produce this dataset, when it has been centered.
    pub centering: Option<Centering>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Data(format!(
                "design has {} rows but response has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::Data("design matrix has no feature columns".into()));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value in dataset".into()));
        }
        Ok(Self { x, y, groups: None, centering: None })
    }

    pub fn with_groups(mut self, groups: GroupPartition) -> Result<Self> {
        if groups.p() != self.x.ncols() {
            return Err(Error::Data(format!(
                "partition covers {} coefficients but design has {}",
                groups.p(),
                self.x.ncols()
            )));
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// A centered copy (column means and response mean removed), with the
    /// centering recorded. Centering an already-centered dataset is a no-op
    /// apart from rounding.
    pub fn centered(&self) -> Self {
        let n = self.n() as f64;
        let x_means = self.x.sum_axis(ndarray::Axis(0)) / n;
        let y_mean = self.y.sum() / n;
        let mut x = self.x.clone();
        for mut row in x.rows_mut() {
            row -= &x_means;
        }
        let y = &self.y - y_mean;
        Self {
            x,
            y,
            groups: self.groups.clone(),
            centering: Some(Centering { x_means, y_mean }),
        }
    }

    /// Reads a dataset from CSV: header row, numeric features, response last.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
        let headers = reader
            .headers()
            .map_err(|e| Error::Data(format!("bad CSV header: {e}")))?
            .clone();
        if headers.len() < 2 {
            return Err(Error::Data(
                "CSV needs at least one feature column and a response column".into(),
            ));
        }
        let p = headers.len() - 1;
        let mut rows: Vec<f64> = Vec::new();
        let mut y = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Data(format!("row {}: {e}", i + 2)))?;
            if record.len() != headers.len() {
                return Err(Error::Data(format!(
                    "row {}: expected {} fields, found {}",
                    i + 2,
                    headers.len(),
                    record.len()
                )));
            }
            for (j, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Data(format!("row {}, column {} ('{}'): not a number", i + 2, j + 1, field))
                })?;
                if j < p {
                    rows.push(v);
                } else {
                    y.push(v);
                }
            }
        }
        if y.is_empty() {
            return Err(Error::Data("CSV contains no data rows".into()));
        }
        let n = y.len();
        let x = Array2::from_shape_vec((n, p), rows)
            .map_err(|e| Error::Data(format!("shape error: {e}")))?;
        Self::new(x, Array1::from_vec(y))
    }

    /// Writes the dataset as CSV with `x1..xp, y` headers.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)
            .map_err(|e| Error::Data(format!("cannot create {}: {e}", path.display())))?;
        let p = self.p();
        let mut header: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        writer.write_record(&header).map_err(|e| Error::Data(e.to_string()))?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = (0..p).map(|j| format!("{:.17e}", self.x[[i, j]])).collect();
            rec.push(format!("{:.17e}", self.y[i]));
            writer.write_record(&rec).map_err(|e| Error::Data(e.to_string()))?;
        }
        writer.flush().map_err(|e| Error::Data(e.to_string()))?;
        Ok(())
    }
}
