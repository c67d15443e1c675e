//! Extreme subsamples selected by norm order statistics, the tail empirical
//! measure and the empirical angular measure.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{angle_min, NormSpec};
use crate::par;
use crate::transforms::{fit_margins, pareto_standardize, KnownMargins, Standardization};

/// Marginal standardization applied before extracting extremes.
#[derive(Clone, Debug)]
pub enum Standardizer {
    None,
    KnownPareto(KnownMargins),
    /// Empirical rank transform fitted on the very sample being processed.
    Rank,
}

impl Standardizer {
    pub fn tag(&self) -> Standardization {
        match self {
            Standardizer::None => Standardization::None,
            Standardizer::KnownPareto(_) => Standardization::KnownPareto,
            Standardizer::Rank => Standardization::Rank,
        }
    }

    /// Standardized copy of `data`; targets and labels are carried along.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        match self {
            Standardizer::None => Ok(data.clone()),
            Standardizer::Rank => fit_margins(data)?.transform_dataset(data),
            Standardizer::KnownPareto(m) => {
                let rows = par::try_map_indices(data.n(), |i| pareto_standardize(m, data.row(i)))?;
                let mut out = Dataset::new(data.n(), data.d(), rows.concat())?
                    .with_names(data.names().to_vec())?;
                if let Some(t) = data.targets() {
                    out = out.with_targets(t.to_vec())?;
                }
                if let Some(l) = data.labels() {
                    out = out.with_labels(l.to_vec())?;
                }
                Ok(out)
            }
        }
    }
}

/// The `k` rows of largest norm, in polar coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct TailSample {
    pub k: usize,
    pub d: usize,
    /// Norm of the k-th largest row.
    pub threshold: f64,
    /// Row-major `k × d` angles.
    pub angles: Vec<f64>,
    /// Non-increasing radii.
    pub radii: Vec<f64>,
    pub targets: Option<Vec<f64>>,
    pub labels: Option<Vec<i8>>,
    /// Zero-based row indices into the source dataset.
    pub source_indices: Vec<usize>,
    pub norm_spec: NormSpec,
    pub standardization: Standardization,
}

impl TailSample {
    pub fn angle(&self, i: usize) -> &[f64] {
        &self.angles[i * self.d..(i + 1) * self.d]
    }

    pub fn angle_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.angles.chunks_exact(self.d)
    }

    pub fn targets_or_err(&self) -> Result<&[f64]> {
        self.targets.as_deref().ok_or(Error::MissingTargets)
    }

    pub fn labels_or_err(&self) -> Result<&[i8]> {
        self.labels.as_deref().ok_or(Error::MissingLabels)
    }

    /// The angles as a dataset, with the targets and labels attached.
    pub fn angles_dataset(&self) -> Result<Dataset> {
        let mut ds = Dataset::new(self.k, self.d, self.angles.clone())?;
        if let Some(t) = &self.targets {
            ds = ds.with_targets(t.clone())?;
        }
        if let Some(l) = &self.labels {
            ds = ds.with_labels(l.clone())?;
        }
        Ok(ds)
    }

    /// Rows `rows` of this sample (in the given order) as a new sample.
    pub fn subset(&self, rows: &[usize]) -> TailSample {
        let mut angles = Vec::with_capacity(rows.len() * self.d);
        for &i in rows {
            angles.extend_from_slice(self.angle(i));
        }
        TailSample {
            k: rows.len(),
            d: self.d,
            threshold: self.threshold,
            angles,
            radii: rows.iter().map(|&i| self.radii[i]).collect(),
            targets: self
                .targets
                .as_ref()
                .map(|t| rows.iter().map(|&i| t[i]).collect()),
            labels: self
                .labels
                .as_ref()
                .map(|l| rows.iter().map(|&i| l[i]).collect()),
            source_indices: rows.iter().map(|&i| self.source_indices[i]).collect(),
            norm_spec: self.norm_spec,
            standardization: self.standardization,
        }
    }
}

/// Indices of the `k` largest values of `norms`, largest first; equal norms
/// are ordered by smaller index.
pub fn top_k_indices(norms: &[f64], k: usize) -> Vec<usize> {
    let order = |a: &usize, b: &usize| norms[*b].total_cmp(&norms[*a]).then(a.cmp(b));
    let mut idx: Vec<usize> = (0..norms.len()).collect();
    if k == 0 {
        return Vec::new();
    }
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, order);
        idx.truncate(k);
    }
    idx.sort_unstable_by(order);
    idx
}

/// Extracts the `k` rows of largest norm after standardization.
pub fn select_extremes(
    data: &Dataset,
    k: usize,
    spec: NormSpec,
    standardizer: &Standardizer,
) -> Result<TailSample> {
    let n = data.n();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    let std_data = standardizer.apply(data)?;
    let norms = par::map_indices(n, |i| spec.norm(std_data.row(i)));
    if let Some(i) = norms.iter().position(|&r| r == 0.0) {
        return Err(Error::ZeroVector {
            context: Some(format!("row {i}")),
        });
    }
    let chosen = top_k_indices(&norms, k);
    from_indices(&std_data, &norms, chosen, spec, standardizer.tag())
}

fn from_indices(
    std_data: &Dataset,
    norms: &[f64],
    chosen: Vec<usize>,
    spec: NormSpec,
    tag: Standardization,
) -> Result<TailSample> {
    let d = std_data.d();
    let k = chosen.len();
    let mut angles = Vec::with_capacity(k * d);
    let mut radii = Vec::with_capacity(k);
    for &i in &chosen {
        let r = norms[i];
        radii.push(r);
        angles.extend(std_data.row(i).iter().map(|v| v / r));
    }
    Ok(TailSample {
        k,
        d,
        threshold: *radii.last().expect("k >= 1"),
        angles,
        radii,
        targets: std_data
            .targets()
            .map(|t| chosen.iter().map(|&i| t[i]).collect()),
        labels: std_data
            .labels()
            .map(|l| chosen.iter().map(|&i| l[i]).collect()),
        source_indices: chosen,
        norm_spec: spec,
        standardization: tag,
    })
}

/// Keeps the extremes whose angle has every component `≥ tau`.
///
/// `k` shrinks to the retained count; `threshold` stays the radial level of
/// the original selection.
pub fn filter_off_axes(sample: &TailSample, tau: f64) -> Result<TailSample> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!(
            "off-axis level must lie in [0, 1), got {tau}"
        )));
    }
    let keep: Vec<usize> = (0..sample.k)
        .filter(|&i| angle_min(sample.angle(i)) >= tau)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyTail(format!(
            "no extreme among {} has all angle components >= {tau}",
            sample.k
        )));
    }
    Ok(sample.subset(&keep))
}

/// Fraction of the sample's extremes `(radius, angle)` falling in `region`.
pub fn tail_empirical_measure<F>(sample: &TailSample, region: F) -> Result<f64>
where
    F: Fn(f64, &[f64]) -> bool,
{
    if sample.k == 0 {
        return Err(Error::EmptyTail("tail sample is empty".into()));
    }
    let inside = (0..sample.k)
        .filter(|&i| region(sample.radii[i], sample.angle(i)))
        .count();
    Ok(inside as f64 / sample.k as f64)
}

/// `Φ̂(A) = k⁻¹ #{i : ‖V̂_i‖ ≥ n/k, θ(V̂_i) ∈ A}` with `V̂` the rank-transformed
/// rows of `data`.
pub fn empirical_angular_measure<F>(
    data: &Dataset,
    k: usize,
    region: F,
    spec: NormSpec,
) -> Result<f64>
where
    F: Fn(&[f64]) -> bool + Sync + Send,
{
    let n = data.n();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    let margins = fit_margins(data)?;
    let level = n as f64 / k as f64;
    let count = par::count_indices(n, |i| {
        let v = margins
            .rank_transform(data.row(i))
            .expect("dimension checked by fit");
        let r = spec.norm(&v);
        if r < level {
            return false;
        }
        let theta: Vec<f64> = v.iter().map(|x| x / r).collect();
        region(&theta)
    });
    Ok(count as f64 / k as f64)
}
