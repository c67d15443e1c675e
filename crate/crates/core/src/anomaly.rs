//! Angular minimum-volume sets on the positive ℓ∞ sphere and the
//! radial × angular anomaly score.
//!
//! The sphere `{x ≥ 0 : max_j x_j = 1}` is the union of `d` faces
//! `{x_j = 1}`; each face is cut into `m^(d-1)` equal cubes. Sets are unions
//! of cells, so the Lebesgue measure of a set is proportional to its cell
//! count and the minimum-volume problem under a mass constraint is solved
//! exactly by taking cells in decreasing mass order.

use std::fmt;
use std::str::FromStr;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::NormSpec;
use crate::tail::{select_extremes, Standardizer};
use crate::transforms::{MarginalModel, Standardization};

pub const DEFAULT_CELL_CAP: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AngularGrid {
    d: usize,
    m: usize,
    per_face: usize,
}

pub fn build_grid(d: usize, m: usize) -> Result<AngularGrid> {
    build_grid_with_cap(d, m, DEFAULT_CELL_CAP)
}

pub fn build_grid_with_cap(d: usize, m: usize, cap: usize) -> Result<AngularGrid> {
    if d < 2 || m < 1 {
        return Err(Error::InvalidArgument(format!(
            "grid needs d >= 2 and m >= 1, got d = {d}, m = {m}"
        )));
    }
    let per_face = (m as u128).checked_pow((d - 1) as u32);
    let cells = per_face.and_then(|p| p.checked_mul(d as u128));
    match (per_face, cells) {
        (Some(p), Some(c)) if c <= cap as u128 => Ok(AngularGrid {
            d,
            m,
            per_face: p as usize,
        }),
        _ => Err(Error::GridTooLarge {
            cells: cells.unwrap_or(u128::MAX),
            cap,
        }),
    }
}

impl AngularGrid {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_cells(&self) -> usize {
        self.d * self.per_face
    }

    /// Face-Lebesgue measure of one cell.
    pub fn cell_measure(&self) -> f64 {
        1.0 / self.per_face as f64
    }

    /// Cell containing the direction of a non-negative, non-zero vector.
    ///
    /// The vector is rescaled so its largest component is 1. Ties for the
    /// largest component go to the smallest face index; a coordinate equal
    /// to 1 falls in the last sub-interval.
    pub fn locate(&self, v: &[f64]) -> Result<usize> {
        if v.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: v.len(),
            });
        }
        let (face, max) = v
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bj, bm), (j, &x)| {
                if x > bm {
                    (j, x)
                } else {
                    (bj, bm)
                }
            });
        if !(max > 0.0) || !max.is_finite() {
            return Err(Error::ZeroVector {
                context: Some("locating an angular cell".into()),
            });
        }
        let mut sub = 0usize;
        for (j, &x) in v.iter().enumerate() {
            if j == face {
                continue;
            }
            let t = (x / max).max(0.0);
            let s = ((t * self.m as f64).floor() as usize).min(self.m - 1);
            sub = sub * self.m + s;
        }
        Ok(face * self.per_face + sub)
    }

    /// Face (zero-based) and per-axis sub-indices of a cell.
    pub fn cell_coords(&self, cell: usize) -> (usize, Vec<usize>) {
        let face = cell / self.per_face;
        let mut rest = cell % self.per_face;
        let mut sub = vec![0; self.d - 1];
        for s in sub.iter_mut().rev() {
            *s = rest % self.m;
            rest /= self.m;
        }
        (face, sub)
    }
}

/// How the angular factor of the anomaly score is derived from the fitted
/// cell masses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngularScore {
    /// Empirical mass of the cell containing the angle.
    CellMass,
    /// One minus the mass of all cells ranked strictly ahead of the angle's
    /// cell, i.e. one minus the smallest level whose MV-set would have to be
    /// reached before the cell is included.
    NestedLevel,
}

impl fmt::Display for AngularScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AngularScore::CellMass => "cell-mass",
            AngularScore::NestedLevel => "nested-level",
        })
    }
}

impl FromStr for AngularScore {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cell-mass" => Ok(AngularScore::CellMass),
            "nested-level" => Ok(AngularScore::NestedLevel),
            other => Err(Error::InvalidArgument(format!(
                "unknown angular score {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MvSetModel {
    pub grid: AngularGrid,
    /// Cells in selection order (decreasing mass, ties by index).
    pub selected_cells: Vec<usize>,
    /// Normalized empirical mass of every grid cell.
    pub cell_masses: Vec<f64>,
    pub alpha: f64,
    pub psi: f64,
    pub achieved_mass: f64,
    pub k: usize,
    pub norm_spec: NormSpec,
    pub standardization: Standardization,
    pub score: AngularScore,
}

impl MvSetModel {
    pub fn volume(&self) -> f64 {
        self.selected_cells.len() as f64 * self.grid.cell_measure()
    }

    pub fn contains_cell(&self, cell: usize) -> bool {
        self.selected_cells.contains(&cell)
    }

    /// Angular factor for a cell, according to `self.score`.
    pub fn angular_factor(&self, cell: usize) -> f64 {
        match self.score {
            AngularScore::CellMass => self.cell_masses[cell],
            AngularScore::NestedLevel => {
                let ahead: f64 = mass_order(&self.cell_masses)
                    .into_iter()
                    .take_while(|&c| c != cell)
                    .map(|c| self.cell_masses[c])
                    .sum();
                (1.0 - ahead).max(0.0)
            }
        }
    }
}

/// Default tolerance `√(log(1/δ)/k)`.
pub fn default_psi(delta: f64, k: usize) -> f64 {
    ((1.0 / delta).ln() / k as f64).sqrt()
}

/// Cell indices by decreasing mass, ties broken by smaller index.
pub fn mass_order(masses: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..masses.len()).collect();
    order.sort_by(|&a, &b| masses[b].total_cmp(&masses[a]).then(a.cmp(&b)));
    order
}

const MASS_SLACK: f64 = 1e-12;

/// Smallest prefix of [`mass_order`] whose mass reaches `target`.
pub fn greedy_select(masses: &[f64], target: f64) -> Result<Vec<usize>> {
    let mut picked = Vec::new();
    let mut acc = 0.0;
    if target <= 0.0 {
        return Ok(picked);
    }
    for c in mass_order(masses) {
        if masses[c] <= 0.0 {
            break;
        }
        picked.push(c);
        acc += masses[c];
        if acc >= target - MASS_SLACK {
            return Ok(picked);
        }
    }
    Err(Error::Invariant(format!(
        "available mass {acc} is below the constraint {target}"
    )))
}

/// Normalized cell masses of the angles of `k` extremes.
fn cell_masses(data: &Dataset, k: usize, grid: &AngularGrid) -> Result<Vec<f64>> {
    if data.d() != grid.d() {
        return Err(Error::DimensionMismatch {
            expected: grid.d(),
            got: data.d(),
        });
    }
    let tail = select_extremes(data, k, NormSpec::LINF, &Standardizer::Rank)?;
    let mut counts = vec![0usize; grid.n_cells()];
    for a in tail.angle_rows() {
        counts[grid.locate(a)?] += 1;
    }
    Ok(counts.into_iter().map(|c| c as f64 / k as f64).collect())
}

/// Empirical angular MV-set at level `alpha` with tolerance `psi`, fitted on
/// the `k` rank-transformed extremes of `data` (ℓ∞ norm).
pub fn angular_mvset(
    data: &Dataset,
    k: usize,
    alpha: f64,
    psi: f64,
    grid: &AngularGrid,
) -> Result<MvSetModel> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if !(psi >= 0.0) || !(alpha - psi > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need psi >= 0 and alpha - psi > 0, got alpha = {alpha}, psi = {psi}"
        )));
    }
    let masses = cell_masses(data, k, grid)?;
    let selected = greedy_select(&masses, alpha - psi)?;
    let achieved = selected.iter().map(|&c| masses[c]).sum();
    Ok(MvSetModel {
        grid: *grid,
        selected_cells: selected,
        cell_masses: masses,
        alpha,
        psi,
        achieved_mass: achieved,
        k,
        norm_spec: NormSpec::LINF,
        standardization: Standardization::Rank,
        score: AngularScore::CellMass,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MassCheck {
    pub holdout_mass: f64,
    pub required: f64,
    pub pass: bool,
}

/// Mass of the model's selected cells among the `k` extremes of `holdout`;
/// passes when it is at least `alpha - 2 psi`.
pub fn mvset_mass_check(model: &MvSetModel, holdout: &Dataset, k: usize) -> Result<MassCheck> {
    if holdout.n() == 0 || k == 0 {
        return Err(Error::EmptyTail("holdout tail is empty".into()));
    }
    let masses = cell_masses(holdout, k, &model.grid)?;
    let holdout_mass = model.selected_cells.iter().map(|&c| masses[c]).sum();
    let required = model.alpha - 2.0 * model.psi;
    Ok(MassCheck {
        holdout_mass,
        required,
        pass: holdout_mass >= required - MASS_SLACK,
    })
}

/// `s(x) = ŝ_θ(θ(v̂(x))) / ‖v̂(x)‖∞²`; smaller is more anomalous.
pub fn anomaly_score(model: &MvSetModel, margins: &MarginalModel, x: &[f64]) -> Result<f64> {
    if margins.d() != model.grid.d() {
        return Err(Error::DimensionMismatch {
            expected: model.grid.d(),
            got: margins.d(),
        });
    }
    let v = margins.rank_transform(x)?;
    let r = NormSpec::LINF.norm(&v);
    let cell = model.grid.locate(&v)?;
    Ok(model.angular_factor(cell) / (r * r))
}
