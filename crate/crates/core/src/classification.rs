//! Binary classification on the angles of extreme covariates with an ℓ1
//! constrained or penalized logistic loss.

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{polar, NormSpec};
use crate::regression::soft_threshold;
use crate::tail::TailSample;
use crate::transforms::Standardization;

/// `log(1 + exp(−margin))`, stable for large `|margin|`.
pub fn logistic_loss(margin: f64) -> f64 {
    if margin > 0.0 {
        (-margin).exp().ln_1p()
    } else {
        -margin + margin.exp().ln_1p()
    }
}

/// `1 / (1 + exp(margin))`, the negated derivative of [`logistic_loss`].
fn logistic_weight(margin: f64) -> f64 {
    if margin > 0.0 {
        let e = (-margin).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + margin.exp())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClassifierMode {
    /// Penalty `λ‖β‖₁` added to the mean logistic loss.
    Lagrangian(f64),
    /// Constraint `‖β‖₁ ≤ u`.
    Constrained(f64),
}

impl fmt::Display for ClassifierMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifierMode::Lagrangian(l) => write!(f, "lagrangian({l})"),
            ClassifierMode::Constrained(u) => write!(f, "constrained({u})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProxConfig {
    pub max_iter: usize,
    /// Stop once the largest coefficient change is below this.
    pub tol: f64,
}

impl Default for ProxConfig {
    fn default() -> Self {
        ProxConfig {
            max_iter: 20_000,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AngularClassifier {
    pub beta: Vec<f64>,
    pub mode: ClassifierMode,
    pub k: usize,
    pub norm_spec: NormSpec,
    pub standardization: Standardization,
    pub converged: bool,
    pub iterations: usize,
    /// Mean logistic loss plus the penalty (zero in constrained mode).
    pub objective: f64,
    /// Set when the training tail holds a single class.
    pub single_class: bool,
}

impl AngularClassifier {
    pub fn decision(&self, angle: &[f64]) -> f64 {
        self.beta.iter().zip(angle).map(|(b, a)| b * a).sum()
    }

    /// `sign(βᵀθ)` with `sign(0) = +1`.
    pub fn classify_angle(&self, angle: &[f64]) -> i8 {
        if self.decision(angle) >= 0.0 {
            1
        } else {
            -1
        }
    }
}

/// Mean logistic loss of `beta` over the tail.
pub fn mean_logistic_loss(sample: &TailSample, beta: &[f64]) -> Result<f64> {
    let y = sample.labels_or_err()?;
    Ok(loss_and_grad(sample, y, beta, false).0)
}

fn loss_and_grad(sample: &TailSample, y: &[i8], beta: &[f64], grad: bool) -> (f64, Vec<f64>) {
    let k = sample.k as f64;
    let mut loss = 0.0;
    let mut g = vec![0.0; if grad { sample.d } else { 0 }];
    for (a, &yi) in sample.angle_rows().zip(y) {
        let yi = yi as f64;
        let m = yi * a.iter().zip(beta).map(|(x, b)| x * b).sum::<f64>();
        loss += logistic_loss(m);
        if grad {
            let w = -yi * logistic_weight(m) / k;
            for (gj, aj) in g.iter_mut().zip(a) {
                *gj += w * aj;
            }
        }
    }
    (loss / k, g)
}

/// Euclidean projection onto `{β : ‖β‖₁ ≤ radius}` by sorting magnitudes.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    if radius <= 0.0 {
        return vec![0.0; v.len()];
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &m) in mags.iter().enumerate() {
        cum += m;
        let t = (cum - radius) / (i + 1) as f64;
        if m > t {
            theta = t;
        } else {
            break;
        }
    }
    v.iter().map(|&x| soft_threshold(x, theta)).collect()
}

pub fn fit_logistic_lasso(sample: &TailSample, mode: ClassifierMode) -> Result<AngularClassifier> {
    fit_logistic_lasso_with(sample, mode, &ProxConfig::default(), None)
}

/// Proximal (Lagrangian) or projected (constrained) gradient descent with
/// backtracking from a unit step.
pub fn fit_logistic_lasso_with(
    sample: &TailSample,
    mode: ClassifierMode,
    config: &ProxConfig,
    trace: Option<&mut Vec<f64>>,
) -> Result<AngularClassifier> {
    let y = sample.labels_or_err()?;
    if let Some(row) = y.iter().position(|&l| l != 1 && l != -1) {
        return Err(Error::InvalidLabel {
            row,
            value: y[row] as f64,
        });
    }
    if sample.k == 0 {
        return Err(Error::EmptyTail("classification needs k >= 1".into()));
    }
    let param = match mode {
        ClassifierMode::Lagrangian(p) | ClassifierMode::Constrained(p) => p,
    };
    if !(param >= 0.0) || !param.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "mode parameter must be finite and non-negative, got {param}"
        )));
    }
    let single_class = y.iter().all(|&l| l == y[0]);
    let d = sample.d;
    let penalty = |b: &[f64]| match mode {
        ClassifierMode::Lagrangian(l) => l * b.iter().map(|x| x.abs()).sum::<f64>(),
        ClassifierMode::Constrained(_) => 0.0,
    };
    let step_map = |z: &[f64], t: f64| -> Vec<f64> {
        match mode {
            ClassifierMode::Lagrangian(l) => z.iter().map(|&v| soft_threshold(v, t * l)).collect(),
            ClassifierMode::Constrained(u) => project_l1_ball(z, u),
        }
    };

    let mut beta = vec![0.0; d];
    let (mut f, mut g) = loss_and_grad(sample, y, &beta, true);
    let mut trace = trace;
    if let Some(t) = trace.as_deref_mut() {
        t.push(f + penalty(&beta));
    }
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let mut t = 1.0;
        let (next, f_next) = loop {
            let z: Vec<f64> = beta.iter().zip(&g).map(|(b, gj)| b - t * gj).collect();
            let cand = step_map(&z, t);
            let diff: Vec<f64> = cand.iter().zip(&beta).map(|(c, b)| c - b).collect();
            let f_c = loss_and_grad(sample, y, &cand, false).0;
            let quad = f
                + g.iter().zip(&diff).map(|(a, b)| a * b).sum::<f64>()
                + diff.iter().map(|v| v * v).sum::<f64>() / (2.0 * t);
            if f_c <= quad + 1e-15 * f.abs().max(1.0) || t < 1e-20 {
                break (cand, f_c);
            }
            t *= 0.5;
        };
        let change = next
            .iter()
            .zip(&beta)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        beta = next;
        let (fb, gb) = loss_and_grad(sample, y, &beta, true);
        debug_assert!((fb - f_next).abs() <= 1e-12 * fb.max(1.0));
        f = fb;
        g = gb;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(f + penalty(&beta));
        }
        if change < config.tol {
            converged = true;
            break;
        }
    }
    Ok(AngularClassifier {
        objective: f + penalty(&beta),
        beta,
        mode,
        k: sample.k,
        norm_spec: sample.norm_spec,
        standardization: sample.standardization,
        converged,
        iterations,
        single_class,
    })
}

/// Predicted label of a raw (already standardized) covariate vector.
pub fn classify(model: &AngularClassifier, x: &[f64]) -> Result<i8> {
    if x.len() != model.beta.len() {
        return Err(Error::DimensionMismatch {
            expected: model.beta.len(),
            got: x.len(),
        });
    }
    let p = polar(x, model.norm_spec)?;
    Ok(model.classify_angle(&p.angle))
}

/// Misclassified fraction among the extremes of `sample`.
pub fn empirical_tail_risk_01(model: &AngularClassifier, sample: &TailSample) -> Result<f64> {
    let y = sample.labels_or_err()?;
    if sample.k == 0 {
        return Err(Error::EmptyTail("tail sample is empty".into()));
    }
    let wrong = sample
        .angle_rows()
        .zip(y)
        .filter(|(a, &yi)| model.classify_angle(a) != yi)
        .count();
    Ok(wrong as f64 / sample.k as f64)
}
