//! Least squares on the angles of extreme covariates: the unpenalized ERM
//! baseline and the ℓ1-penalized XLASSO estimator
//!
//! ```text
//! minimize_β  (2k)⁻¹ ‖y − Wβ‖²  +  λ ‖β‖₁
//! ```
//!
//! where the rows of `W` are the angles `θ(X_(i))` of the `k` largest
//! covariates and `y` their targets. No intercept is fitted.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_finite, Error, Result};
use crate::geometry::{polar, NormSpec};
use crate::tail::TailSample;
use crate::transforms::Standardization;

/// `sign(z) · max(|z| − lam, 0)`.
pub fn soft_threshold(z: f64, lam: f64) -> f64 {
    if z > lam {
        z - lam
    } else if z < -lam {
        z + lam
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AngularLinearModel {
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub k: usize,
    pub norm_spec: NormSpec,
    pub standardization: Standardization,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
}

impl AngularLinearModel {
    pub fn predict_angle(&self, angle: &[f64]) -> f64 {
        dot(&self.beta, angle)
    }

    /// Prediction at a raw (already standardized) covariate vector.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.beta.len() {
            return Err(Error::DimensionMismatch {
                expected: self.beta.len(),
                got: x.len(),
            });
        }
        Ok(self.predict_angle(&polar(x, self.norm_spec)?.angle))
    }
}

/// Coordinate descent settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CdConfig {
    /// Stop once the largest coefficient change in a sweep is below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for CdConfig {
    fn default() -> Self {
        CdConfig {
            tol: 1e-8,
            max_sweeps: 100_000,
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Design matrix in column-major layout.
struct Design<'a> {
    sample: &'a TailSample,
    cols: Vec<Vec<f64>>,
}

impl<'a> Design<'a> {
    fn new(sample: &'a TailSample) -> Self {
        let cols = (0..sample.d)
            .map(|j| sample.angle_rows().map(|a| a[j]).collect())
            .collect();
        Design { sample, cols }
    }

    fn residual(&self, y: &[f64], beta: &[f64]) -> Vec<f64> {
        self.sample
            .angle_rows()
            .zip(y)
            .map(|(a, yi)| yi - dot(a, beta))
            .collect()
    }

    /// `Wᵀ r / k`.
    fn correlations(&self, r: &[f64]) -> Vec<f64> {
        let k = self.sample.k as f64;
        self.cols.iter().map(|c| dot(c, r) / k).collect()
    }
}

fn checked_targets(sample: &TailSample) -> Result<&[f64]> {
    let y = sample.targets_or_err()?;
    check_finite(y, "targets")?;
    if sample.k == 0 {
        return Err(Error::EmptyTail("regression needs k >= 1".into()));
    }
    Ok(y)
}

/// `(2k)⁻¹ ‖y − Wβ‖² + λ‖β‖₁`.
pub fn xlasso_objective(sample: &TailSample, beta: &[f64], lambda: f64) -> Result<f64> {
    let y = checked_targets(sample)?;
    if beta.len() != sample.d {
        return Err(Error::DimensionMismatch {
            expected: sample.d,
            got: beta.len(),
        });
    }
    let rss: f64 = Design::new(sample)
        .residual(y, beta)
        .iter()
        .map(|r| r * r)
        .sum();
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    Ok(rss / (2.0 * sample.k as f64) + lambda * l1)
}

/// Minimum-norm least-squares fit of the targets on the angles.
pub fn fit_ols_angles(sample: &TailSample) -> Result<AngularLinearModel> {
    let y = checked_targets(sample)?;
    let w = DMatrix::from_row_slice(sample.k, sample.d, &sample.angles);
    let svd = w.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = f64::EPSILON * sample.k.max(sample.d) as f64 * smax;
    let beta = svd
        .solve(&DVector::from_column_slice(y), eps)
        .map_err(|e| Error::Invariant(format!("least-squares solve failed: {e}")))?;
    let beta: Vec<f64> = beta.iter().copied().collect();
    let objective = xlasso_objective(sample, &beta, 0.0)?;
    Ok(AngularLinearModel {
        beta,
        lambda: 0.0,
        k: sample.k,
        norm_spec: sample.norm_spec,
        standardization: sample.standardization,
        iterations: 1,
        converged: true,
        objective,
    })
}

/// `‖Wᵀy‖∞ / k`, the smallest penalty whose XLASSO solution is zero.
pub fn lambda_max(sample: &TailSample) -> Result<f64> {
    let y = checked_targets(sample)?;
    Ok(Design::new(sample)
        .correlations(y)
        .iter()
        .fold(0.0, |m, c| m.max(c.abs())))
}

pub fn fit_xlasso(sample: &TailSample, lambda: f64) -> Result<AngularLinearModel> {
    fit_xlasso_with(sample, lambda, &CdConfig::default(), None)
}

/// Cyclic coordinate descent, optionally warm-started.
pub fn fit_xlasso_with(
    sample: &TailSample,
    lambda: f64,
    config: &CdConfig,
    warm_start: Option<&[f64]>,
) -> Result<AngularLinearModel> {
    run_cd(sample, lambda, config, warm_start, None)
}

/// Same as [`fit_xlasso_with`], also returning the objective after every
/// sweep (entry 0 is the starting point).
pub fn fit_xlasso_traced(
    sample: &TailSample,
    lambda: f64,
    config: &CdConfig,
) -> Result<(AngularLinearModel, Vec<f64>)> {
    let mut trace = Vec::new();
    let model = run_cd(sample, lambda, config, None, Some(&mut trace))?;
    Ok((model, trace))
}

fn run_cd(
    sample: &TailSample,
    lambda: f64,
    config: &CdConfig,
    warm_start: Option<&[f64]>,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<AngularLinearModel> {
    let y = checked_targets(sample)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lambda must be a finite non-negative number, got {lambda}"
        )));
    }
    let d = sample.d;
    let k = sample.k as f64;
    let design = Design::new(sample);
    let mut beta = match warm_start {
        Some(b) if b.len() == d => b.to_vec(),
        Some(b) => {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: b.len(),
            })
        }
        None => vec![0.0; d],
    };
    let col_sq: Vec<f64> = design.cols.iter().map(|c| dot(c, c) / k).collect();
    let mut r = design.residual(y, &beta);
    let objective_of = |r: &[f64], beta: &[f64]| {
        r.iter().map(|v| v * v).sum::<f64>() / (2.0 * k)
            + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    };
    if let Some(t) = trace.as_deref_mut() {
        t.push(objective_of(&r, &beta));
    }

    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < config.max_sweeps {
        sweeps += 1;
        let mut max_change = 0.0_f64;
        for j in 0..d {
            let old = beta[j];
            let new = if col_sq[j] == 0.0 {
                0.0
            } else {
                let z = dot(&design.cols[j], &r) / k + col_sq[j] * old;
                soft_threshold(z, lambda) / col_sq[j]
            };
            if new != old {
                let delta = new - old;
                for (ri, wij) in r.iter_mut().zip(&design.cols[j]) {
                    *ri -= delta * wij;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(objective_of(&r, &beta));
        }
        if max_change < config.tol {
            converged = true;
            break;
        }
    }
    // Recompute from scratch so accumulated residual drift does not leak
    // into the reported objective.
    let r = design.residual(y, &beta);
    let objective = objective_of(&r, &beta);
    Ok(AngularLinearModel {
        beta,
        lambda,
        k: sample.k,
        norm_spec: sample.norm_spec,
        standardization: sample.standardization,
        iterations: sweeps,
        converged,
        objective,
    })
}

/// XLASSO fits along a penalty path, each warm-started from the previous
/// one. The path is solved from the largest penalty down and the models are
/// returned in the order of `lambdas`.
pub fn xlasso_path(
    sample: &TailSample,
    lambdas: &[f64],
    config: &CdConfig,
) -> Result<Vec<AngularLinearModel>> {
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));
    let mut out: Vec<Option<AngularLinearModel>> = vec![None; lambdas.len()];
    let mut warm: Option<Vec<f64>> = None;
    for i in order {
        let m = fit_xlasso_with(sample, lambdas[i], config, warm.as_deref())?;
        warm = Some(m.beta.clone());
        out[i] = Some(m);
    }
    Ok(out
        .into_iter()
        .map(|m| m.expect("every index visited"))
        .collect())
}

/// `n_points` log-spaced penalties from `lambda_max` down to
/// `ratio · lambda_max`.
pub fn lambda_grid(lambda_max: f64, n_points: usize, ratio: f64) -> Vec<f64> {
    match n_points {
        0 => Vec::new(),
        1 => vec![lambda_max],
        _ => {
            let (hi, lo) = (lambda_max.ln(), (lambda_max * ratio).ln());
            (0..n_points)
                .map(|i| match i {
                    0 => lambda_max,
                    i if i == n_points - 1 => lambda_max * ratio,
                    i => (hi + (lo - hi) * i as f64 / (n_points - 1) as f64).exp(),
                })
                .collect()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KktReport {
    /// `‖Wᵀ(y − Wβ̂)‖∞ / k`.
    pub grad_inf_norm: f64,
    pub max_violation: f64,
    pub active_set: Vec<usize>,
    pub pass: bool,
}

/// Subgradient optimality check for an XLASSO solution.
pub fn kkt_certificate(
    sample: &TailSample,
    model: &AngularLinearModel,
    tol: f64,
) -> Result<KktReport> {
    let y = checked_targets(sample)?;
    if model.beta.len() != sample.d {
        return Err(Error::DimensionMismatch {
            expected: sample.d,
            got: model.beta.len(),
        });
    }
    let design = Design::new(sample);
    let g = design.correlations(&design.residual(y, &model.beta));
    let lambda = model.lambda;
    let mut max_violation = 0.0_f64;
    let mut active_set = Vec::new();
    for (j, (&gj, &bj)) in g.iter().zip(&model.beta).enumerate() {
        let v = if bj != 0.0 {
            active_set.push(j);
            (gj - lambda * bj.signum()).abs()
        } else {
            (gj.abs() - lambda).max(0.0)
        };
        max_violation = max_violation.max(v);
    }
    Ok(KktReport {
        grad_inf_norm: g.iter().fold(0.0, |m, v| m.max(v.abs())),
        max_violation,
        active_set,
        pass: max_violation <= tol,
    })
}

/// Mean squared error over the extremes of a test sample.
pub fn tail_mse(model: &AngularLinearModel, test: &TailSample) -> Result<f64> {
    if test.k == 0 {
        return Err(Error::EmptyTail("test tail is empty".into()));
    }
    let y = test.targets_or_err()?;
    if test.d != model.beta.len() {
        return Err(Error::DimensionMismatch {
            expected: model.beta.len(),
            got: test.d,
        });
    }
    let sse: f64 = test
        .angle_rows()
        .zip(y)
        .map(|(a, yi)| {
            let r = yi - model.predict_angle(a);
            r * r
        })
        .sum();
    Ok(sse / test.k as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionLemmaReport {
    pub applicable: bool,
    /// `2‖Wᵀe‖∞ / k` for the residual `e = y − Wβ*`.
    pub required_lambda: f64,
    /// `k⁻¹ ‖W(β̂ − β*)‖²`.
    pub lhs: f64,
    /// `12 ‖β*‖₁ λ`.
    pub rhs: f64,
    pub holds: bool,
}

/// Checks the slow-rate prediction error inequality
/// `k⁻¹‖W(β̂ − β*)‖² ≤ 12‖β*‖₁λ`, which holds whenever
/// `λ ≥ 2‖Wᵀe‖∞/k`.
pub fn check_prediction_lemma(
    sample: &TailSample,
    beta_star: &[f64],
    lambda: f64,
) -> Result<PredictionLemmaReport> {
    let y = checked_targets(sample)?;
    if beta_star.len() != sample.d {
        return Err(Error::DimensionMismatch {
            expected: sample.d,
            got: beta_star.len(),
        });
    }
    let design = Design::new(sample);
    let e = design.residual(y, beta_star);
    let required_lambda = 2.0
        * design
            .correlations(&e)
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
    let rhs = 12.0 * beta_star.iter().map(|b| b.abs()).sum::<f64>() * lambda;
    if lambda < required_lambda {
        return Ok(PredictionLemmaReport {
            applicable: false,
            required_lambda,
            lhs: f64::NAN,
            rhs,
            holds: false,
        });
    }
    let model = fit_xlasso(sample, lambda)?;
    let diff: Vec<f64> = model
        .beta
        .iter()
        .zip(beta_star)
        .map(|(a, b)| a - b)
        .collect();
    let lhs = sample
        .angle_rows()
        .map(|a| dot(a, &diff).powi(2))
        .sum::<f64>()
        / sample.k as f64;
    Ok(PredictionLemmaReport {
        applicable: true,
        required_lambda,
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-9) + 1e-12,
    })
}
