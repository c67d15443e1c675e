//! Marginal standardization and target rescaling.
//!
//! Both standardizations map a row to `[1, ∞)^d` through `1 / (1 - F_j)`:
//! [`pareto_standardize`] with known marginal CDFs, [`MarginalModel`] with the
//! empirical CDFs `F̂_j(x) = #{i : X_ij ≤ x} / (n + 1)`.

use std::fmt;
use std::sync::Arc;

use crate::data::Dataset;
use crate::error::{check_finite, Error, Result};
use crate::geometry::NormSpec;

/// Which marginal standardization produced a set of points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Standardization {
    None,
    KnownPareto,
    Rank,
}

impl fmt::Display for Standardization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Standardization::None => "none",
            Standardization::KnownPareto => "known-pareto",
            Standardization::Rank => "rank",
        })
    }
}

impl std::str::FromStr for Standardization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(Standardization::None),
            "known-pareto" | "known" => Ok(Standardization::KnownPareto),
            "rank" => Ok(Standardization::Rank),
            other => Err(Error::InvalidArgument(format!(
                "unknown standardization {other:?}"
            ))),
        }
    }
}

/// Per-column sorted sample; evaluates the empirical CDFs with denominator
/// `n + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalModel {
    n: usize,
    columns: Vec<Vec<f64>>,
}

pub fn fit_margins(data: &Dataset) -> Result<MarginalModel> {
    if data.n() == 0 {
        return Err(Error::InvalidArgument(
            "cannot fit margins on an empty sample".into(),
        ));
    }
    check_finite(data.values(), "data")?;
    let columns = crate::par::map_indices(data.d(), |j| {
        let mut c = data.column(j);
        c.sort_by(f64::total_cmp);
        c
    });
    Ok(MarginalModel {
        n: data.n(),
        columns,
    })
}

impl MarginalModel {
    /// Rebuilds a model from its sorted training columns.
    pub fn from_sorted_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.len());
        if n == 0 || columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidArgument(
                "margin columns must be non-empty and of equal length".into(),
            ));
        }
        for c in &columns {
            check_finite(c, "margin column")?;
            if c.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::InvalidArgument("margin column is not sorted".into()));
            }
        }
        Ok(MarginalModel { n, columns })
    }

    /// Sorted training values, one vector per coordinate.
    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    /// Number of column-`j` values `≤ x`.
    pub fn count_le(&self, j: usize, x: f64) -> usize {
        self.columns[j].partition_point(|&v| v <= x)
    }

    /// `F̂_j(x)`.
    pub fn cdf(&self, j: usize, x: f64) -> f64 {
        self.count_le(j, x) as f64 / (self.n + 1) as f64
    }

    /// `v̂(x)_j = 1 / (1 - F̂_j(x_j))`, written as `(n+1) / (n+1-count)` so
    /// that the result is exact; always within `[1, n+1]`.
    pub fn rank_transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                got: x.len(),
            });
        }
        let total = (self.n + 1) as f64;
        Ok(x.iter()
            .enumerate()
            .map(|(j, &v)| total / (self.n + 1 - self.count_le(j, v)) as f64)
            .collect())
    }

    /// Rank-transforms every row of `data`.
    pub fn transform_dataset(&self, data: &Dataset) -> Result<Dataset> {
        let rows = crate::par::try_map_indices(data.n(), |i| self.rank_transform(data.row(i)))?;
        let x = rows.concat();
        let mut out = Dataset::new(data.n(), data.d(), x)?.with_names(data.names().to_vec())?;
        if let Some(t) = data.targets() {
            out = out.with_targets(t.to_vec())?;
        }
        if let Some(l) = data.labels() {
            out = out.with_labels(l.to_vec())?;
        }
        Ok(out)
    }
}

/// A known continuous marginal distribution function.
#[derive(Clone)]
pub enum Margin {
    /// `F(x) = 1 - 1/x` on `[1, ∞)`.
    UnitPareto,
    /// `F(x) = exp(-1/x)` on `(0, ∞)`.
    UnitFrechet,
    /// Standard uniform on `[0, 1]`.
    Uniform,
    /// Exponential with the given rate.
    Exponential(f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Margin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Margin::UnitPareto => write!(f, "UnitPareto"),
            Margin::UnitFrechet => write!(f, "UnitFrechet"),
            Margin::Uniform => write!(f, "Uniform"),
            Margin::Exponential(r) => write!(f, "Exponential({r})"),
            Margin::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Margin {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Margin::UnitPareto => {
                if x <= 1.0 {
                    0.0
                } else {
                    1.0 - 1.0 / x
                }
            }
            Margin::UnitFrechet => {
                if x <= 0.0 {
                    0.0
                } else {
                    (-1.0 / x).exp()
                }
            }
            Margin::Uniform => x.clamp(0.0, 1.0),
            Margin::Exponential(rate) => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Margin::Custom(f) => f(x),
        }
    }

    /// Survival function `1 - F(x)`, computed without cancellation where a
    /// closed form exists.
    pub fn survival(&self, x: f64) -> f64 {
        match self {
            Margin::UnitPareto => {
                if x <= 1.0 {
                    1.0
                } else {
                    1.0 / x
                }
            }
            Margin::UnitFrechet => {
                if x <= 0.0 {
                    1.0
                } else {
                    -(-1.0 / x).exp_m1()
                }
            }
            Margin::Exponential(rate) => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            _ => 1.0 - self.cdf(x),
        }
    }
}

impl std::str::FromStr for Margin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "unit-pareto" => Ok(Margin::UnitPareto),
            "unit-frechet" => Ok(Margin::UnitFrechet),
            "uniform" => Ok(Margin::Uniform),
            "exponential" => Ok(Margin::Exponential(1.0)),
            _ => {
                if let Some(rate) = s.strip_prefix("exponential:") {
                    let r: f64 = rate
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad rate in {s:?}")))?;
                    if r > 0.0 && r.is_finite() {
                        return Ok(Margin::Exponential(r));
                    }
                }
                Err(Error::InvalidArgument(format!("unknown margin {s:?}")))
            }
        }
    }
}

/// Known marginal CDFs, one per column.
#[derive(Clone, Debug)]
pub struct KnownMargins {
    margins: Vec<Margin>,
}

impl KnownMargins {
    pub fn new(margins: Vec<Margin>) -> Self {
        KnownMargins { margins }
    }

    pub fn uniform_family(margin: Margin, d: usize) -> Self {
        KnownMargins {
            margins: vec![margin; d],
        }
    }

    pub fn d(&self) -> usize {
        self.margins.len()
    }
}

/// `v(x)_j = 1 / (1 - F_j(x_j))`.
pub fn pareto_standardize(margins: &KnownMargins, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != margins.d() {
        return Err(Error::DimensionMismatch {
            expected: margins.d(),
            got: x.len(),
        });
    }
    x.iter()
        .zip(&margins.margins)
        .enumerate()
        .map(|(j, (&v, m))| {
            let s = m.survival(v);
            if !(s > 0.0) || s > 1.0 {
                Err(Error::InvalidArgument(format!(
                    "F_{}({v}) = {} is not below 1",
                    j + 1,
                    1.0 - s
                )))
            } else {
                Ok(1.0 / s)
            }
        })
        .collect()
}

/// `y = z / max(‖x‖, 1)`.
pub fn rescale_target(x: &[f64], z: f64, spec: NormSpec) -> f64 {
    z / spec.norm(x).max(1.0)
}

/// `ẑ = max(‖x‖, 1) · ŷ`, the inverse of [`rescale_target`] for fixed `x`.
pub fn descale_prediction(x: &[f64], y_hat: f64, spec: NormSpec) -> f64 {
    spec.norm(x).max(1.0) * y_hat
}
