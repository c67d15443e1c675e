use crate::error::{check_finite, Error, Result};

/// Observation matrix (row-major, `n × d`) with an optional real target and
/// optional ±1 labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    x: Vec<f64>,
    names: Vec<String>,
    targets: Option<Vec<f64>>,
    labels: Option<Vec<i8>>,
}

impl Dataset {
    /// Builds a dataset from a row-major buffer of `n · d` finite values.
    pub fn new(n: usize, d: usize, x: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dataset needs d >= 1".into()));
        }
        if x.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                got: x.len(),
            });
        }
        check_finite(&x, "x")?;
        Ok(Dataset {
            n,
            d,
            x,
            names: (1..=d).map(|j| format!("x{j}")).collect(),
            targets: None,
            labels: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut x = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has {} columns, expected {d}",
                    r.len()
                )));
            }
            x.extend_from_slice(r);
        }
        Dataset::new(rows.len(), d, x)
    }

    pub fn with_targets(mut self, targets: Vec<f64>) -> Result<Self> {
        if targets.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: targets.len(),
            });
        }
        check_finite(&targets, "targets")?;
        self.targets = Some(targets);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<i8>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: labels.len(),
            });
        }
        if let Some(row) = labels.iter().position(|&l| l != 1 && l != -1) {
            return Err(Error::InvalidLabel {
                row,
                value: labels[row] as f64,
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Converts real-valued labels, rejecting anything other than ±1.
    pub fn with_label_values(self, values: &[f64]) -> Result<Self> {
        let mut labels = Vec::with_capacity(values.len());
        for (row, &v) in values.iter().enumerate() {
            labels.push(if v == 1.0 {
                1
            } else if v == -1.0 {
                -1
            } else {
                return Err(Error::InvalidLabel { row, value: v });
            });
        }
        self.with_labels(labels)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: names.len(),
            });
        }
        self.names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.d)
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn targets(&self) -> Option<&[f64]> {
        self.targets.as_deref()
    }

    pub fn labels(&self) -> Option<&[i8]> {
        self.labels.as_deref()
    }

    /// Rows selected by `indices`, in that order, with targets and labels.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            x.extend_from_slice(self.row(i));
        }
        Dataset {
            n: indices.len(),
            d: self.d,
            x,
            names: self.names.clone(),
            targets: self
                .targets
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i]).collect()),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }
}
