//! Cross-validation of learning rules trained on extreme subsamples.
//!
//! For every fold the training part `T_j` and the validation part `V_j` each
//! keep their own `⌊p·|S|⌋` largest-norm observations; the rule is trained
//! on the extremes of `T_j` and its risk averaged over the extremes of
//! `V_j`. The CV estimate is the plain mean over folds.

use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classification::{
    empirical_tail_risk_01, fit_logistic_lasso_with, AngularClassifier, ClassifierMode, ProxConfig,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::NormSpec;
use crate::par;
use crate::regression::{fit_ols_angles, tail_mse, xlasso_path, AngularLinearModel, CdConfig};
use crate::tail::{select_extremes, Standardizer, TailSample};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CvScheme {
    KFold(usize),
    LeaveOneOut,
}

impl fmt::Display for CvScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CvScheme::KFold(k) => write!(f, "kfold({k})"),
            CvScheme::LeaveOneOut => write!(f, "loo"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvPlan {
    pub n: usize,
    pub scheme: CvScheme,
    /// Validation index sets; each fold's training set is the complement.
    pub folds: Vec<Vec<usize>>,
}

impl CvPlan {
    pub fn training_indices(&self, fold: usize) -> Vec<usize> {
        let mut in_val = vec![false; self.n];
        for &i in &self.folds[fold] {
            in_val[i] = true;
        }
        (0..self.n).filter(|&i| !in_val[i]).collect()
    }
}

/// Seeded shuffle followed by a contiguous split; the first `n mod K` folds
/// get one extra index.
pub fn make_folds(n: usize, scheme: CvScheme, seed: u64) -> Result<CvPlan> {
    let k = match scheme {
        CvScheme::KFold(k) => {
            if k < 2 {
                return Err(Error::InvalidArgument(format!(
                    "K-fold needs K >= 2, got {k}"
                )));
            }
            if k > n {
                return Err(Error::InvalidArgument(format!(
                    "K = {k} folds exceed n = {n} observations"
                )));
            }
            k
        }
        CvScheme::LeaveOneOut => {
            if n < 2 {
                return Err(Error::InvalidArgument("leave-one-out needs n >= 2".into()));
            }
            n
        }
    };
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(CvPlan { n, scheme, folds })
}

/// A learning procedure trained on a tail subsample and scored on another.
pub trait TailRule: Sync {
    type Hyper: Copy + Send + Sync + PartialOrd + fmt::Display;
    type Model: Send;

    fn fit(&self, train: &TailSample, hyper: Self::Hyper) -> Result<Self::Model>;

    /// Mean loss of `model` over the extremes of `test`.
    fn risk(&self, model: &Self::Model, test: &TailSample) -> Result<f64>;

    /// Fits for every grid value; rules with warm starts override this.
    fn fit_grid(&self, train: &TailSample, grid: &[Self::Hyper]) -> Result<Vec<Self::Model>> {
        grid.iter().map(|&h| self.fit(train, h)).collect()
    }
}

/// Tail extraction settings shared by every fold.
#[derive(Clone, Debug)]
pub struct TailSpec {
    /// Fraction of each subsample treated as extreme.
    pub p: f64,
    pub norm: NormSpec,
    pub standardizer: Standardizer,
}

impl TailSpec {
    pub fn new(p: f64, norm: NormSpec) -> Self {
        TailSpec {
            p,
            norm,
            standardizer: Standardizer::None,
        }
    }

    fn extremes(&self, data: &Dataset, indices: &[usize], what: &str) -> Result<TailSample> {
        let k = (self.p * indices.len() as f64).floor() as usize;
        if k == 0 {
            return Err(Error::EmptyTail(format!(
                "{what} keeps floor({} * {}) = 0 extremes",
                self.p,
                indices.len()
            )));
        }
        select_extremes(&data.subset(indices), k, self.norm, &self.standardizer)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvResult {
    pub rcv: f64,
    pub fold_risks: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSelection<H> {
    pub best: H,
    pub best_index: usize,
    /// Deduplicated grid in increasing order with its CV results.
    pub table: Vec<(H, CvResult)>,
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "tail fraction must lie in (0, 1], got {p}"
        )))
    }
}

/// CV estimate of the tail risk of `rule` at a single hyperparameter.
pub fn cv_tail_risk<R: TailRule>(
    rule: &R,
    data: &Dataset,
    plan: &CvPlan,
    tail: &TailSpec,
    hyper: R::Hyper,
) -> Result<CvResult> {
    let table = fold_risk_table(rule, data, plan, tail, &[hyper])?;
    Ok(table.into_iter().next().expect("one grid value"))
}

/// Evaluates every grid value and returns the minimizer of the CV risk;
/// ties go to the smallest value.
pub fn grid_select<R: TailRule>(
    rule: &R,
    data: &Dataset,
    plan: &CvPlan,
    tail: &TailSpec,
    grid: &[R::Hyper],
) -> Result<GridSelection<R::Hyper>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument(
            "hyperparameter grid is empty".into(),
        ));
    }
    if grid.iter().any(|h| h.partial_cmp(h).is_none()) {
        return Err(Error::InvalidArgument("grid holds unordered values".into()));
    }
    let mut values = grid.to_vec();
    values.sort_by(|a, b| a.partial_cmp(b).expect("checked above"));
    values.dedup_by(|a, b| a == b);
    let results = fold_risk_table(rule, data, plan, tail, &values)?;
    let mut best_index = 0;
    for (i, r) in results.iter().enumerate() {
        if r.rcv < results[best_index].rcv {
            best_index = i;
        }
    }
    Ok(GridSelection {
        best: values[best_index],
        best_index,
        table: values.into_iter().zip(results).collect(),
    })
}

fn fold_risk_table<R: TailRule>(
    rule: &R,
    data: &Dataset,
    plan: &CvPlan,
    tail: &TailSpec,
    grid: &[R::Hyper],
) -> Result<Vec<CvResult>> {
    check_p(tail.p)?;
    if plan.n != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            got: plan.n,
        });
    }
    let per_fold: Vec<Vec<f64>> = par::try_map_indices(plan.folds.len(), |f| {
        let val = &plan.folds[f];
        let train_idx = plan.training_indices(f);
        let train = tail.extremes(data, &train_idx, &format!("training set of fold {}", f + 1))?;
        let test = tail.extremes(data, val, &format!("validation set of fold {}", f + 1))?;
        let models = rule.fit_grid(&train, grid)?;
        models.iter().map(|m| rule.risk(m, &test)).collect()
    })?;
    let k = plan.folds.len() as f64;
    Ok((0..grid.len())
        .map(|g| {
            let fold_risks: Vec<f64> = per_fold.iter().map(|r| r[g]).collect();
            CvResult {
                rcv: fold_risks.iter().sum::<f64>() / k,
                fold_risks,
            }
        })
        .collect())
}

/// Writes `u,rcv,fold1,...,foldK` rows.
pub fn write_cv_table<H: fmt::Display, W: Write>(
    out: &mut W,
    table: &[(H, CvResult)],
) -> std::io::Result<()> {
    let folds = table.first().map_or(0, |(_, r)| r.fold_risks.len());
    write!(out, "u,rcv")?;
    for f in 1..=folds {
        write!(out, ",fold{f}")?;
    }
    writeln!(out)?;
    for (u, r) in table {
        write!(out, "{u},{}", r.rcv)?;
        for v in &r.fold_risks {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// XLASSO indexed by its penalty; risk is the tail mean squared error.
#[derive(Clone, Debug, Default)]
pub struct XlassoRule {
    pub config: CdConfig,
}

impl TailRule for XlassoRule {
    type Hyper = f64;
    type Model = AngularLinearModel;

    fn fit(&self, train: &TailSample, lambda: f64) -> Result<AngularLinearModel> {
        crate::regression::fit_xlasso_with(train, lambda, &self.config, None)
    }

    fn risk(&self, model: &AngularLinearModel, test: &TailSample) -> Result<f64> {
        tail_mse(model, test)
    }

    fn fit_grid(&self, train: &TailSample, grid: &[f64]) -> Result<Vec<AngularLinearModel>> {
        xlasso_path(train, grid, &self.config)
    }
}

/// Unpenalized least squares on angles; ignores its hyperparameter.
#[derive(Clone, Copy, Debug, Default)]
pub struct OlsRule;

impl TailRule for OlsRule {
    type Hyper = f64;
    type Model = AngularLinearModel;

    fn fit(&self, train: &TailSample, _: f64) -> Result<AngularLinearModel> {
        fit_ols_angles(train)
    }

    fn risk(&self, model: &AngularLinearModel, test: &TailSample) -> Result<f64> {
        tail_mse(model, test)
    }
}

/// ℓ1-constrained logistic classifier indexed by the radius `u`; risk is
/// the tail 0-1 error.
#[derive(Clone, Debug, Default)]
pub struct ConstrainedLogisticRule {
    pub config: ProxConfig,
}

impl TailRule for ConstrainedLogisticRule {
    type Hyper = f64;
    type Model = AngularClassifier;

    fn fit(&self, train: &TailSample, u: f64) -> Result<AngularClassifier> {
        fit_logistic_lasso_with(train, ClassifierMode::Constrained(u), &self.config, None)
    }

    fn risk(&self, model: &AngularClassifier, test: &TailSample) -> Result<f64> {
        empirical_tail_risk_01(model, test)
    }
}

/// ℓ1-penalized logistic classifier indexed by `λ`; risk is the tail 0-1
/// error.
#[derive(Clone, Debug, Default)]
pub struct LagrangianLogisticRule {
    pub config: ProxConfig,
}

impl TailRule for LagrangianLogisticRule {
    type Hyper = f64;
    type Model = AngularClassifier;

    fn fit(&self, train: &TailSample, lambda: f64) -> Result<AngularClassifier> {
        fit_logistic_lasso_with(
            train,
            ClassifierMode::Lagrangian(lambda),
            &self.config,
            None,
        )
    }

    fn risk(&self, model: &AngularClassifier, test: &TailSample) -> Result<f64> {
        empirical_tail_risk_01(model, test)
    }
}
