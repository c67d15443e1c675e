//! End-to-end comparisons of XLASSO against unpenalized least squares on the
//! angles of extremes, on simulated data and on a user-supplied portfolio
//! table.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::crossval::{grid_select, make_folds, CvScheme, TailSpec, XlassoRule};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::NormSpec;
use crate::par;
use crate::regression::{
    fit_ols_angles, fit_xlasso_with, lambda_grid, lambda_max, tail_mse, CdConfig,
};
use crate::simulate::{gen_additive_regression, AdditiveModelSpec, SeedStream};
use crate::tail::{select_extremes, Standardizer, TailSample};
use crate::transforms::rescale_target;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Xlasso,
    Ols,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Xlasso => "xlasso",
            Method::Ols => "ols",
        })
    }
}

/// Penalty selection for XLASSO: K-fold CV over a log grid from
/// `lambda_max` down to `ratio · lambda_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaCv {
    pub folds: usize,
    pub points: usize,
    pub ratio: f64,
    pub solver: CdConfig,
}

impl Default for LambdaCv {
    fn default() -> Self {
        LambdaCv {
            folds: 5,
            points: 50,
            ratio: 1e-3,
            solver: CdConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MseRow {
    pub tau: f64,
    pub method: Method,
    pub rep: usize,
    pub mse: f64,
    /// Penalty used (zero for least squares).
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub tau: f64,
    pub method: Method,
    pub mean: f64,
    pub q10: f64,
    pub q90: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentTable {
    pub rows: Vec<MseRow>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentTable {
    fn from_rows(mut rows: Vec<MseRow>) -> Self {
        rows.sort_by(|a, b| {
            a.tau
                .total_cmp(&b.tau)
                .then(a.method.cmp(&b.method))
                .then(a.rep.cmp(&b.rep))
        });
        let mut summary = Vec::new();
        for chunk in rows.chunk_by(|a, b| a.tau == b.tau && a.method == b.method) {
            let mut v: Vec<f64> = chunk.iter().map(|r| r.mse).collect();
            v.sort_by(f64::total_cmp);
            summary.push(SummaryRow {
                tau: chunk[0].tau,
                method: chunk[0].method,
                mean: v.iter().sum::<f64>() / v.len() as f64,
                q10: quantile_sorted(&v, 0.1),
                q90: quantile_sorted(&v, 0.9),
            });
        }
        ExperimentTable { rows, summary }
    }

    pub fn mean(&self, tau: f64, method: Method) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.tau == tau && s.method == method)
            .map(|s| s.mean)
    }

    pub fn write_rows<W: Write>(&self, out: &mut W, rep_label: &str) -> std::io::Result<()> {
        writeln!(out, "tau,method,{rep_label},mse,lambda")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.tau, r.method, r.rep, r.mse, r.lambda
            )?;
        }
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "tau,method,mean,q10,q90")?;
        for s in &self.summary {
            writeln!(out, "{},{},{},{},{}", s.tau, s.method, s.mean, s.q10, s.q90)?;
        }
        Ok(())
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Fits XLASSO with the CV-selected penalty on `tail`, using the extreme
/// sample itself as the CV population.
pub fn fit_xlasso_cv(tail: &TailSample, cv: &LambdaCv, fold_seed: u64) -> Result<(f64, Vec<f64>)> {
    tail.targets_or_err()?;
    let data = tail.angles_dataset()?;
    let lmax = lambda_max(tail)?;
    let grid = if lmax > 0.0 {
        lambda_grid(lmax, cv.points, cv.ratio)
    } else {
        vec![0.0]
    };
    let plan = make_folds(tail.k, CvScheme::KFold(cv.folds), fold_seed)?;
    let rule = XlassoRule { config: cv.solver };
    let sel = grid_select(
        &rule,
        &data,
        &plan,
        &TailSpec::new(1.0, tail.norm_spec),
        &grid,
    )?;
    let fit = fit_xlasso_with(tail, sel.best, &cv.solver, None)?;
    Ok((sel.best, fit.beta))
}

fn tail_k(tau: f64, n: usize, what: &str) -> Result<usize> {
    let k = (tau * n as f64).floor() as usize;
    if k == 0 || k > n {
        return Err(Error::EmptyTail(format!(
            "{what}: floor({tau} * {n}) = {k} extremes"
        )));
    }
    Ok(k)
}

fn compare_on(
    train: &Dataset,
    test_tail: &TailSample,
    tau: f64,
    rep: usize,
    cv: &LambdaCv,
    fold_seed: u64,
) -> Result<[MseRow; 2]> {
    let k = tail_k(tau, train.n(), "training tail")?;
    let tail = select_extremes(train, k, NormSpec::L2, &Standardizer::None)?;
    let (lambda, beta) = fit_xlasso_cv(&tail, cv, fold_seed)?;
    let mut xl = fit_ols_angles(&tail)?;
    let ols_mse = tail_mse(&xl, test_tail)?;
    xl.beta = beta;
    xl.lambda = lambda;
    let xl_mse = tail_mse(&xl, test_tail)?;
    Ok([
        MseRow {
            tau,
            method: Method::Xlasso,
            rep,
            mse: xl_mse,
            lambda,
        },
        MseRow {
            tau,
            method: Method::Ols,
            rep,
            mse: ols_mse,
            lambda: 0.0,
        },
    ])
}

fn check_taus(taus: &[f64]) -> Result<()> {
    if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(Error::InvalidArgument(
            "tau grid must be non-empty with values in (0, 1]".into(),
        ));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimExperimentConfig {
    pub n: usize,
    pub n_test: usize,
    pub model: AdditiveModelSpec,
    pub taus: Vec<f64>,
    pub tau_test: f64,
    pub replications: usize,
    pub cv: LambdaCv,
    pub seed: u64,
}

impl SimExperimentConfig {
    /// Full-scale setting: `n = 10⁴`, `d = 100`, `n_test = 10⁶`, 20
    /// replications.
    pub fn full_scale(seed: u64) -> Self {
        SimExperimentConfig {
            n: 10_000,
            n_test: 1_000_000,
            model: AdditiveModelSpec::standard(100, 0.5),
            taus: vec![0.011, 0.02, 0.03, 0.04, 0.05],
            tau_test: 0.01,
            replications: 20,
            cv: LambdaCv::default(),
            seed,
        }
    }
}

/// Replication `r` draws its training and test sets from stream `r`; the
/// CV folds for the `t`-th tail fraction use a seed derived from `(t, r)`.
pub fn run_simulated_xlasso_experiment(cfg: &SimExperimentConfig) -> Result<ExperimentTable> {
    check_taus(&cfg.taus)?;
    cfg.model.validate()?;
    if cfg.replications == 0 {
        return Err(Error::InvalidArgument(
            "need at least one replication".into(),
        ));
    }
    let k_test = tail_k(cfg.tau_test, cfg.n_test, "test tail")?;
    let stream = SeedStream::new(cfg.seed);
    let fold_streams = stream.derive(1);
    let per_rep = par::try_map_indices(cfg.replications, |rep| {
        let run = || -> Result<Vec<MseRow>> {
            let mut rng = stream.rng(rep as u64);
            let train = gen_additive_regression(cfg.n, &cfg.model, &mut rng)?;
            let test = gen_additive_regression(cfg.n_test, &cfg.model, &mut rng)?;
            let test_tail = select_extremes(&test, k_test, NormSpec::L2, &Standardizer::None)?;
            drop(test);
            let mut fold_rng = fold_streams.rng(rep as u64);
            let fold_seeds: Vec<u64> = cfg.taus.iter().map(|_| fold_rng.random()).collect();
            let rows = par::try_map_indices(cfg.taus.len(), |t| {
                compare_on(&train, &test_tail, cfg.taus[t], rep, &cfg.cv, fold_seeds[t])
            })?;
            Ok(rows.into_iter().flatten().collect())
        };
        run().map_err(|e| Error::InvalidArgument(format!("replication {rep}: {e}")))
    })?;
    Ok(ExperimentTable::from_rows(
        per_rep.into_iter().flatten().collect(),
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PortfolioConfig {
    pub target: String,
    pub expected_columns: Option<usize>,
    pub splits: usize,
    pub train_fraction: f64,
    pub taus: Vec<f64>,
    pub tau_test: f64,
    pub cv: LambdaCv,
    pub seed: u64,
}

impl Default for PortfolioConfig {
    fn default() -> Self {
        PortfolioConfig {
            target: "Trans".into(),
            expected_columns: Some(49),
            splits: 50,
            train_fraction: 0.2,
            taus: (0..10).map(|i| 0.05 + 0.05 * i as f64).collect(),
            tau_test: 0.005,
            cv: LambdaCv::default(),
            seed: 0,
        }
    }
}

/// Running range of `Z_(i) / ‖X_(i)‖` over the `k` largest covariates.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportRow {
    pub k: usize,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PortfolioResult {
    pub table: ExperimentTable,
    pub support: Vec<SupportRow>,
}

/// Splits a table into covariates and the rescaled target `Z / ‖X‖₂`.
pub fn portfolio_design(raw: &Dataset, cfg: &PortfolioConfig) -> Result<Dataset> {
    if let Some(c) = cfg.expected_columns {
        if raw.d() != c {
            return Err(Error::DimensionMismatch {
                expected: c,
                got: raw.d(),
            });
        }
    }
    let names = raw.names();
    let j = names
        .iter()
        .position(|n| *n == cfg.target)
        .ok_or_else(|| Error::InvalidArgument(format!("no column named {:?}", cfg.target)))?;
    let d = raw.d() - 1;
    let mut x = Vec::with_capacity(raw.n() * d);
    let mut y = Vec::with_capacity(raw.n());
    for row in raw.rows() {
        let start = x.len();
        x.extend(
            row.iter()
                .enumerate()
                .filter(|(c, _)| *c != j)
                .map(|(_, v)| *v),
        );
        y.push(rescale_target(&x[start..], row[j], NormSpec::L2));
    }
    let kept: Vec<String> = names
        .iter()
        .enumerate()
        .filter(|(c, _)| *c != j)
        .map(|(_, n)| n.clone())
        .collect();
    Dataset::new(raw.n(), d, x)?
        .with_names(kept)?
        .with_targets(y)
}

pub fn support_diagnostic(design: &Dataset) -> Result<Vec<SupportRow>> {
    let all = select_extremes(design, design.n(), NormSpec::L2, &Standardizer::None)?;
    let y = all.targets_or_err()?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    Ok(y.iter()
        .enumerate()
        .map(|(i, &v)| {
            lo = lo.min(v);
            hi = hi.max(v);
            SupportRow {
                k: i + 1,
                min: lo,
                max: hi,
            }
        })
        .collect())
}

pub fn write_support<W: Write>(out: &mut W, rows: &[SupportRow]) -> std::io::Result<()> {
    writeln!(out, "k,min,max")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.k, r.min, r.max)?;
    }
    Ok(())
}

/// Split `s` permutes the rows with stream `s` of the seed; the first
/// `train_fraction · n` rows train, the rest test.
pub fn run_portfolio_experiment(raw: &Dataset, cfg: &PortfolioConfig) -> Result<PortfolioResult> {
    check_taus(&cfg.taus)?;
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) || cfg.splits == 0 {
        return Err(Error::InvalidArgument(
            "need train_fraction in (0, 1) and at least one split".into(),
        ));
    }
    let design = portfolio_design(raw, cfg)?;
    let support = support_diagnostic(&design)?;
    let n = design.n();
    let n_train = (cfg.train_fraction * n as f64).floor() as usize;
    let k_test = tail_k(cfg.tau_test, n - n_train, "test tail")?;
    let stream = SeedStream::new(cfg.seed);
    let fold_streams = stream.derive(1);
    let per_split = par::try_map_indices(cfg.splits, |s| {
        let run = || -> Result<Vec<MseRow>> {
            let perm = split_permutation(n, &stream, s);
            let train = design.subset(&perm[..n_train]);
            let test = design.subset(&perm[n_train..]);
            let test_tail = select_extremes(&test, k_test, NormSpec::L2, &Standardizer::None)?;
            let mut fold_rng = fold_streams.rng(s as u64);
            let fold_seeds: Vec<u64> = cfg.taus.iter().map(|_| fold_rng.random()).collect();
            let rows = par::try_map_indices(cfg.taus.len(), |t| {
                compare_on(&train, &test_tail, cfg.taus[t], s, &cfg.cv, fold_seeds[t])
            })?;
            Ok(rows.into_iter().flatten().collect())
        };
        run().map_err(|e| Error::InvalidArgument(format!("split {s}: {e}")))
    })?;
    Ok(PortfolioResult {
        table: ExperimentTable::from_rows(per_split.into_iter().flatten().collect()),
        support,
    })
}

pub fn split_permutation(n: usize, stream: &SeedStream, split: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream.rng(split as u64));
    perm
}
