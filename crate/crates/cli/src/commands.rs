//! Subcommand implementations. Each command validates its configuration,
//! runs, and returns its output files as bytes.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use evlearn::anomaly::{angular_mvset, anomaly_score, build_grid, default_psi, AngularScore};
use evlearn::bounds::{mc_validate, BoundInputs, BoundKind, Statement, ValidationConfig};
use evlearn::classification::{fit_logistic_lasso_with, ClassifierMode, ProxConfig};
use evlearn::crossval::{
    grid_select, make_folds, write_cv_table, ConstrainedLogisticRule, CvScheme,
    LagrangianLogisticRule, OlsRule, TailRule, TailSpec, XlassoRule,
};
use evlearn::experiment::{
    fit_xlasso_cv, run_portfolio_experiment, run_simulated_xlasso_experiment, write_support,
    LambdaCv, PortfolioConfig, SimExperimentConfig,
};
use evlearn::geometry::polar;
use evlearn::persist::{load_model, write_model, ModelFile, SavedModel};
use evlearn::regression::{fit_xlasso_with, lambda_grid, lambda_max, CdConfig};
use evlearn::simulate::{
    gen_additive_regression, gen_classification_rv, mv_logistic, AdditiveModelSpec, Noise,
    SeedStream,
};
use evlearn::tail::{empirical_angular_measure, select_extremes, Standardizer, TailSample};
use evlearn::transforms::{fit_margins, pareto_standardize, KnownMargins, Margin, Standardization};
use evlearn::{Dataset, NormSpec};

use crate::config::{
    at_least, check, in_half_open_unit, in_open_unit, non_negative, Config, UsageError, UsageResult,
};
use crate::table::{dataset_csv, ingest_csv, Columns, CsvOut};

/// Output of a command: the main file plus named companions written next
/// to it.
#[derive(Debug, Default)]
pub struct Output {
    pub main: Vec<u8>,
    pub extra: Vec<(&'static str, Vec<u8>)>,
}

impl Output {
    fn single(main: Vec<u8>) -> Self {
        Output {
            main,
            extra: Vec::new(),
        }
    }
}

/// `dir/name.csv` with suffix `summary` becomes `dir/name.summary.csv`.
pub fn companion_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = out
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}.{suffix}.{ext}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::Subcommand)]
pub enum Cmd {
    /// Map covariates to unit-Pareto scale (rank or known margins).
    Standardize,
    /// Angles of the k largest rank-standardized rows, or their mass in a box.
    AngularMeasure,
    /// Fit an angular minimum-volume set and write the model file.
    MvsetFit,
    /// Apply a saved model to new rows.
    Score,
    /// Fit XLASSO on the angles of the extremes.
    FitXlasso,
    /// Fit an l1-regularized logistic classifier on the angles of the extremes.
    FitClassifier,
    /// Cross-validated tail risk over a hyperparameter grid.
    Cv,
    /// Draw a synthetic dataset.
    Simulate,
    /// Evaluate closed-form bounds and Monte Carlo coverage checks.
    Bounds,
    /// XLASSO versus least squares on simulated data.
    ExperimentSim,
    /// XLASSO versus least squares on the industry portfolio table.
    ExperimentPortfolio,
}

const DATA_KEYS: &[&str] = &["input", "target", "label"];
const STD_KEYS: &[&str] = &["standardization", "margins", "norm"];
const TAIL_KEYS: &[&str] = &["k", "tau"];
const LAMBDA_CV_KEYS: &[&str] = &["folds", "lambda_points", "lambda_ratio"];

impl Cmd {
    /// Keys accepted in the configuration of this command.
    pub fn keys(&self) -> Vec<&'static str> {
        let mut keys = vec!["seed"];
        let mut add = |ks: &[&'static str]| keys.extend_from_slice(ks);
        match self {
            Cmd::Standardize => {
                add(DATA_KEYS);
                add(&["standardization", "margins"]);
            }
            Cmd::AngularMeasure => {
                add(DATA_KEYS);
                add(&["k", "norm", "box_lo", "box_hi"]);
            }
            Cmd::MvsetFit => {
                add(DATA_KEYS);
                add(&["k", "alpha", "psi", "delta", "m", "score"]);
            }
            Cmd::Score => add(&["model", "input", "target", "label"]),
            Cmd::FitXlasso => {
                add(DATA_KEYS);
                add(STD_KEYS);
                add(TAIL_KEYS);
                add(LAMBDA_CV_KEYS);
                add(&["lambda"]);
            }
            Cmd::FitClassifier => {
                add(DATA_KEYS);
                add(STD_KEYS);
                add(TAIL_KEYS);
                add(&["mode", "value", "grid", "folds"]);
            }
            Cmd::Cv => {
                add(DATA_KEYS);
                add(STD_KEYS);
                add(&[
                    "task",
                    "p",
                    "scheme",
                    "folds",
                    "grid",
                    "lambda_points",
                    "lambda_ratio",
                ]);
            }
            Cmd::Simulate => add(&[
                "generator",
                "n",
                "d",
                "a",
                "beta0",
                "beta1",
                "noise",
                "noise_lo",
                "noise_hi",
                "norm_p",
            ]),
            Cmd::Bounds => add(&[
                "requests",
                "n",
                "k",
                "d",
                "p",
                "delta",
                "vc_dim",
                "m_eps",
                "beta_star_l1",
                "c_factor",
                "b_bar",
                "replications",
            ]),
            Cmd::ExperimentSim => {
                add(&[
                    "n",
                    "n_test",
                    "d",
                    "a",
                    "beta0",
                    "beta1",
                    "noise_lo",
                    "noise_hi",
                    "taus",
                    "tau_test",
                    "replications",
                ]);
                add(LAMBDA_CV_KEYS);
            }
            Cmd::ExperimentPortfolio => {
                add(&[
                    "input",
                    "target",
                    "columns",
                    "splits",
                    "train_fraction",
                    "taus",
                    "tau_test",
                ]);
                add(LAMBDA_CV_KEYS);
            }
        }
        keys
    }

    pub fn run(&self, cfg: &Config, seed: u64) -> Result<Output> {
        match self {
            Cmd::Standardize => standardize(cfg),
            Cmd::AngularMeasure => angular_measure(cfg),
            Cmd::MvsetFit => mvset_fit(cfg),
            Cmd::Score => score(cfg),
            Cmd::FitXlasso => fit_xlasso_cmd(cfg, seed),
            Cmd::FitClassifier => fit_classifier(cfg, seed),
            Cmd::Cv => cv(cfg, seed),
            Cmd::Simulate => simulate(cfg, seed),
            Cmd::Bounds => bounds(cfg, seed),
            Cmd::ExperimentSim => experiment_sim(cfg, seed),
            Cmd::ExperimentPortfolio => experiment_portfolio(cfg, seed),
        }
    }
}

fn bytes<F>(f: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn read_data(cfg: &Config, need_target: bool, need_label: bool) -> Result<Dataset> {
    let input = cfg.require_str("input")?;
    let target = cfg.str("target");
    let label = cfg.str("label");
    if need_target && target.is_none() {
        return Err(UsageError("missing required key \"target\"".into()).into());
    }
    if need_label && label.is_none() {
        return Err(UsageError("missing required key \"label\"".into()).into());
    }
    ingest_csv(Path::new(input), &Columns { target, label })
}

fn norm(cfg: &Config, default: NormSpec) -> UsageResult<NormSpec> {
    cfg.parse_or("norm", default)
}

fn known_margins(spec: &str, d: usize) -> UsageResult<KnownMargins> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let parse = |s: &str| {
        s.parse::<Margin>()
            .map_err(|e| UsageError(format!("margins: {e}")))
    };
    if parts.len() == 1 {
        Ok(KnownMargins::uniform_family(parse(parts[0])?, d))
    } else if parts.len() == d {
        Ok(KnownMargins::new(
            parts.into_iter().map(parse).collect::<UsageResult<_>>()?,
        ))
    } else {
        Err(UsageError(format!(
            "margins lists {} entries for {d} columns",
            parts.len()
        )))
    }
}

/// Standardizer requested by `standardization` (and `margins`).
fn standardizer(cfg: &Config, d: usize, default: Standardization) -> UsageResult<Standardizer> {
    let kind: Standardization = cfg.parse_or("standardization", default)?;
    Ok(match kind {
        Standardization::None => Standardizer::None,
        Standardization::Rank => Standardizer::Rank,
        Standardization::KnownPareto => {
            let spec = cfg.str("margins").ok_or_else(|| {
                UsageError("known-pareto standardization needs \"margins\"".into())
            })?;
            Standardizer::KnownPareto(known_margins(spec, d)?)
        }
    })
}

/// Number of extremes from `k` or `tau`.
fn tail_size(cfg: &Config, n: usize) -> Result<usize> {
    let k = match (cfg.parse_opt::<usize>("k")?, cfg.parse_opt::<f64>("tau")?) {
        (Some(_), Some(_)) => bail!(UsageError("give either k or tau, not both".into())),
        (Some(k), None) => at_least("k", k, 1)?,
        (None, Some(t)) => (in_half_open_unit("tau", t)? * n as f64).floor() as usize,
        (None, None) => bail!(UsageError("missing k (or tau)".into())),
    };
    if k == 0 || k > n {
        bail!("tail size {k} is not within 1..={n}");
    }
    Ok(k)
}

fn lambda_cv(cfg: &Config) -> UsageResult<LambdaCv> {
    let d = LambdaCv::default();
    Ok(LambdaCv {
        folds: at_least("folds", cfg.parse_or("folds", d.folds)?, 2)?,
        points: at_least("lambda_points", cfg.parse_or("lambda_points", d.points)?, 1)?,
        ratio: in_open_unit("lambda_ratio", cfg.parse_or("lambda_ratio", d.ratio)?)?,
        solver: d.solver,
    })
}

fn model_file(
    model: SavedModel,
    data: &Dataset,
    std: &Standardizer,
    cfg: &Config,
) -> Result<ModelFile> {
    let mut file = ModelFile::new(model);
    match std {
        Standardizer::Rank => file.rank_margins = Some(fit_margins(data)?),
        Standardizer::KnownPareto(_) => file.margin_spec = cfg.str("margins").map(String::from),
        Standardizer::None => {}
    }
    Ok(file)
}

fn standardize(cfg: &Config) -> Result<Output> {
    let data = read_data(cfg, false, false)?;
    let std = standardizer(cfg, data.d(), Standardization::Rank)?;
    Ok(Output::single(dataset_csv(&std.apply(&data)?)?))
}

fn angular_measure(cfg: &Config) -> Result<Output> {
    let data = read_data(cfg, false, false)?;
    let spec = norm(cfg, NormSpec::L2)?;
    let k = tail_size(cfg, data.n())?;
    let mut out = CsvOut::new();
    match (cfg.list::<f64>("box_lo")?, cfg.list::<f64>("box_hi")?) {
        (Some(lo), Some(hi)) => {
            if lo.len() != data.d() || hi.len() != data.d() {
                bail!(UsageError(format!(
                    "box bounds need {} entries each",
                    data.d()
                )));
            }
            let inside = |t: &[f64]| {
                t.iter()
                    .zip(&lo)
                    .zip(&hi)
                    .all(|((v, l), h)| v >= l && v <= h)
            };
            let m = empirical_angular_measure(&data, k, inside, spec)?;
            out.row(["k", "norm", "measure"])?;
            out.row([k.to_string(), spec.to_string(), m.to_string()])?;
        }
        (None, None) => {
            let tail = select_extremes(&data, k, spec, &Standardizer::Rank)?;
            let mut header = vec!["rank".to_string(), "row".into(), "radius".into()];
            header.extend((1..=data.d()).map(|j| format!("theta{j}")));
            out.row(&header)?;
            for i in 0..tail.k {
                let mut rec = vec![
                    (i + 1).to_string(),
                    (tail.source_indices[i] + 1).to_string(),
                    tail.radii[i].to_string(),
                ];
                rec.extend(tail.angle(i).iter().map(|v| v.to_string()));
                out.row(&rec)?;
            }
        }
        _ => bail!(UsageError("box_lo and box_hi go together".into())),
    }
    Ok(Output::single(out.into_bytes()?))
}

fn mvset_fit(cfg: &Config) -> Result<Output> {
    let data = read_data(cfg, false, false)?;
    let k = tail_size(cfg, data.n())?;
    let alpha = in_half_open_unit("alpha", cfg.parse_or("alpha", 0.9)?)?;
    let psi = match cfg.parse_opt::<f64>("psi")? {
        Some(p) => non_negative("psi", p)?,
        None => default_psi(in_open_unit("delta", cfg.parse_or("delta", 0.1)?)?, k),
    };
    let m = at_least("m", cfg.parse_or("m", 4usize)?, 1)?;
    let grid = build_grid(data.d(), m)?;
    let mut model = angular_mvset(&data, k, alpha, psi, &grid)?;
    model.score = cfg.parse_or("score", AngularScore::CellMass)?;
    let file = model_file(SavedModel::MvSet(model), &data, &Standardizer::Rank, cfg)?;
    Ok(Output::single(bytes(|b| {
        write_model(b, &file).map_err(|e| std::io::Error::other(e.to_string()))
    })?))
}

/// Maps a raw row to the scale the model was fitted on.
fn to_model_scale(
    file: &ModelFile,
    standardization: Standardization,
    x: &[f64],
) -> Result<Vec<f64>> {
    match standardization {
        Standardization::None => Ok(x.to_vec()),
        Standardization::Rank => {
            let m = file
                .rank_margins
                .as_ref()
                .ok_or_else(|| anyhow!("model file lacks its training margins"))?;
            Ok(m.rank_transform(x)?)
        }
        Standardization::KnownPareto => {
            let spec = file
                .margin_spec
                .as_deref()
                .ok_or_else(|| anyhow!("model file lacks its margin specification"))?;
            Ok(pareto_standardize(&known_margins(spec, x.len())?, x)?)
        }
    }
}

fn score(cfg: &Config) -> Result<Output> {
    let path = cfg.require_str("model")?;
    let file = load_model(Path::new(path)).with_context(|| format!("loading model {path}"))?;
    let data = read_data(cfg, false, false)?;
    let mut out = CsvOut::new();
    match &file.model {
        SavedModel::MvSet(m) => {
            let margins = file
                .rank_margins
                .as_ref()
                .ok_or_else(|| anyhow!("model file lacks its training margins"))?;
            out.row(["row", "score"])?;
            for (i, x) in data.rows().enumerate() {
                let s = anomaly_score(m, margins, x).with_context(|| format!("row {}", i + 1))?;
                out.row([(i + 1).to_string(), s.to_string()])?;
            }
        }
        SavedModel::Linear(m) => {
            out.row(["row", "prediction"])?;
            for (i, x) in data.rows().enumerate() {
                let v = to_model_scale(&file, m.standardization, x)?;
                let p = m.predict(&v).with_context(|| format!("row {}", i + 1))?;
                out.row([(i + 1).to_string(), p.to_string()])?;
            }
        }
        SavedModel::Classifier(m) => {
            out.row(["row", "decision", "label"])?;
            for (i, x) in data.rows().enumerate() {
                let v = to_model_scale(&file, m.standardization, x)?;
                let angle = polar(&v, m.norm_spec)
                    .with_context(|| format!("row {}", i + 1))?
                    .angle;
                out.row([
                    (i + 1).to_string(),
                    m.decision(&angle).to_string(),
                    m.classify_angle(&angle).to_string(),
                ])?;
            }
        }
    }
    Ok(Output::single(out.into_bytes()?))
}

fn extremes(cfg: &Config, data: &Dataset) -> Result<(TailSample, Standardizer)> {
    let std = standardizer(cfg, data.d(), Standardization::None)?;
    let k = tail_size(cfg, data.n())?;
    let tail = select_extremes(data, k, norm(cfg, NormSpec::L2)?, &std)?;
    Ok((tail, std))
}

fn save(file: &ModelFile) -> Result<Output> {
    Ok(Output::single(bytes(|b| {
        write_model(b, file).map_err(|e| std::io::Error::other(e.to_string()))
    })?))
}

fn fit_xlasso_cmd(cfg: &Config, seed: u64) -> Result<Output> {
    let data = read_data(cfg, true, false)?;
    let (tail, std) = extremes(cfg, &data)?;
    let settings = lambda_cv(cfg)?;
    let model = match cfg.str("lambda").unwrap_or("cv") {
        "cv" => {
            let (lambda, beta) = fit_xlasso_cv(&tail, &settings, seed)?;
            let mut m = fit_xlasso_with(&tail, lambda, &settings.solver, Some(&beta))?;
            m.beta = beta;
            m
        }
        v => {
            let lambda = non_negative(
                "lambda",
                v.parse()
                    .map_err(|_| UsageError(format!("lambda = {v:?} is not a number or \"cv\"")))?,
            )?;
            fit_xlasso_with(&tail, lambda, &CdConfig::default(), None)?
        }
    };
    save(&model_file(SavedModel::Linear(model), &data, &std, cfg)?)
}

#[derive(Clone, Copy, PartialEq)]
enum ModeKind {
    Constrained,
    Lagrangian,
}

fn mode_kind(cfg: &Config) -> UsageResult<ModeKind> {
    match cfg.str("mode").unwrap_or("constrained") {
        "constrained" => Ok(ModeKind::Constrained),
        "lagrangian" => Ok(ModeKind::Lagrangian),
        other => Err(UsageError(format!("unknown mode {other:?}"))),
    }
}

const DEFAULT_U_GRID: &[f64] = &[0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
const DEFAULT_PENALTY_GRID: &[f64] = &[1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1];

fn fit_classifier(cfg: &Config, seed: u64) -> Result<Output> {
    let data = read_data(cfg, false, true)?;
    let (tail, std) = extremes(cfg, &data)?;
    let kind = mode_kind(cfg)?;
    let value = match cfg.str("value").unwrap_or("cv") {
        "cv" => {
            let grid = cfg.list::<f64>("grid")?.unwrap_or_else(|| match kind {
                ModeKind::Constrained => DEFAULT_U_GRID.to_vec(),
                ModeKind::Lagrangian => DEFAULT_PENALTY_GRID.to_vec(),
            });
            check(grid.iter().all(|v| *v >= 0.0 && v.is_finite()), || {
                "grid values must be finite and non-negative".into()
            })?;
            let folds = at_least("folds", cfg.parse_or("folds", 5usize)?, 2)?;
            let plan = make_folds(tail.k, CvScheme::KFold(folds), seed)?;
            let angles = tail.angles_dataset()?;
            let spec = TailSpec::new(1.0, tail.norm_spec);
            match kind {
                ModeKind::Constrained => {
                    grid_select(
                        &ConstrainedLogisticRule::default(),
                        &angles,
                        &plan,
                        &spec,
                        &grid,
                    )?
                    .best
                }
                ModeKind::Lagrangian => {
                    grid_select(
                        &LagrangianLogisticRule::default(),
                        &angles,
                        &plan,
                        &spec,
                        &grid,
                    )?
                    .best
                }
            }
        }
        v => non_negative(
            "value",
            v.parse()
                .map_err(|_| UsageError(format!("value = {v:?} is not a number or \"cv\"")))?,
        )?,
    };
    let mode = match kind {
        ModeKind::Constrained => ClassifierMode::Constrained(value),
        ModeKind::Lagrangian => ClassifierMode::Lagrangian(value),
    };
    let model = fit_logistic_lasso_with(&tail, mode, &ProxConfig::default(), None)?;
    save(&model_file(
        SavedModel::Classifier(model),
        &data,
        &std,
        cfg,
    )?)
}

fn cv_table<R: TailRule<Hyper = f64>>(
    rule: &R,
    data: &Dataset,
    cfg: &Config,
    spec: &TailSpec,
    grid: &[f64],
    seed: u64,
) -> Result<Vec<u8>> {
    let scheme = match cfg.str("scheme").unwrap_or("kfold") {
        "kfold" => CvScheme::KFold(at_least("folds", cfg.parse_or("folds", 5usize)?, 2)?),
        "loo" => CvScheme::LeaveOneOut,
        other => bail!(UsageError(format!("unknown scheme {other:?}"))),
    };
    let plan = make_folds(data.n(), scheme, seed)?;
    let sel = grid_select(rule, data, &plan, spec, grid)?;
    bytes(|b| write_cv_table(b, &sel.table))
}

fn cv(cfg: &Config, seed: u64) -> Result<Output> {
    let task = cfg.str("task").unwrap_or("xlasso");
    let (need_t, need_l) = match task {
        "xlasso" | "ols" => (true, false),
        "logistic-constrained" | "logistic-lagrangian" => (false, true),
        other => bail!(UsageError(format!("unknown task {other:?}"))),
    };
    let p = in_half_open_unit("p", cfg.require("p")?)?;
    let data = read_data(cfg, need_t, need_l)?;
    let spec = TailSpec {
        p,
        norm: norm(cfg, NormSpec::L2)?,
        standardizer: standardizer(cfg, data.d(), Standardization::None)?,
    };
    let grid = cfg.list::<f64>("grid")?;
    let table = match task {
        "xlasso" => {
            let grid = match grid {
                Some(g) => g,
                None => {
                    let k = ((p * data.n() as f64).floor() as usize).max(1);
                    let tail = select_extremes(&data, k, spec.norm, &spec.standardizer)?;
                    let s = lambda_cv(cfg)?;
                    lambda_grid(lambda_max(&tail)?, s.points, s.ratio)
                }
            };
            cv_table(&XlassoRule::default(), &data, cfg, &spec, &grid, seed)?
        }
        "ols" => cv_table(&OlsRule, &data, cfg, &spec, &[0.0], seed)?,
        "logistic-constrained" => {
            let grid = grid.unwrap_or_else(|| DEFAULT_U_GRID.to_vec());
            cv_table(
                &ConstrainedLogisticRule::default(),
                &data,
                cfg,
                &spec,
                &grid,
                seed,
            )?
        }
        _ => {
            let grid = grid.unwrap_or_else(|| DEFAULT_PENALTY_GRID.to_vec());
            cv_table(
                &LagrangianLogisticRule::default(),
                &data,
                cfg,
                &spec,
                &grid,
                seed,
            )?
        }
    };
    Ok(Output::single(table))
}

fn dependence(cfg: &Config) -> UsageResult<f64> {
    let a: f64 = cfg.parse_or("a", 0.5)?;
    check(a > 0.0 && a <= 1.0, || {
        format!("a must lie in (0, 1], got {a}")
    })?;
    Ok(a)
}

fn additive_spec(cfg: &Config, default_d: usize) -> UsageResult<AdditiveModelSpec> {
    let d = at_least("d", cfg.parse_or("d", default_d)?, 1)?;
    let mut spec = AdditiveModelSpec::standard(d, dependence(cfg)?);
    for (key, slot) in [("beta0", &mut spec.beta0), ("beta1", &mut spec.beta1)] {
        if let Some(v) = cfg.list::<f64>(key)? {
            check(v.len() == d, || {
                format!("{key} has {} entries, expected {d}", v.len())
            })?;
            *slot = v;
        }
    }
    let lo: f64 = cfg.parse_or("noise_lo", -2.0)?;
    let hi: f64 = cfg.parse_or("noise_hi", 2.0)?;
    check(lo < hi, || {
        format!("noise_lo must be below noise_hi, got [{lo}, {hi}]")
    })?;
    spec.noise = match cfg.str("noise").unwrap_or("truncated-gaussian") {
        "truncated-gaussian" => Noise::TruncatedGaussian { lo, hi },
        "none" => Noise::None,
        other => return Err(UsageError(format!("unknown noise {other:?}"))),
    };
    Ok(spec)
}

fn simulate(cfg: &Config, seed: u64) -> Result<Output> {
    let n = at_least("n", cfg.parse_or("n", 1000usize)?, 1)?;
    let mut rng = SeedStream::new(seed).rng(0);
    let ds = match cfg.str("generator").unwrap_or("additive") {
        "logistic" => {
            let d = at_least("d", cfg.parse_or("d", 2usize)?, 1)?;
            mv_logistic(n, d, dependence(cfg)?, &mut rng)?
        }
        "additive" => gen_additive_regression(n, &additive_spec(cfg, 10)?, &mut rng)?,
        "classification" => {
            let d = at_least("d", cfg.parse_or("d", 5usize)?, 1)?;
            let p: f64 = cfg.parse_or("norm_p", 2.0)?;
            check(p >= 1.0 && p.is_finite(), || {
                format!("norm_p must lie in [1, inf), got {p}")
            })?;
            gen_classification_rv(n, d, dependence(cfg)?, p, &mut rng)?
        }
        other => bail!(UsageError(format!("unknown generator {other:?}"))),
    };
    Ok(Output::single(dataset_csv(&ds)?))
}

enum Request {
    Bound(BoundKind),
    Validate(Statement),
}

fn bounds(cfg: &Config, seed: u64) -> Result<Output> {
    let names = cfg
        .list::<String>("requests")?
        .ok_or_else(|| UsageError("missing required key \"requests\"".into()))?;
    let requests = names
        .iter()
        .map(|r| match r.strip_prefix("mc:") {
            Some(s) => s.parse().map(Request::Validate),
            None => r.parse().map(Request::Bound),
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| UsageError(e.to_string()))?;
    let def = BoundInputs::default();
    let inputs = BoundInputs {
        n: cfg.parse_or("n", def.n)?,
        k: cfg.parse_or("k", def.k)?,
        d: cfg.parse_or("d", def.d)?,
        p: cfg.parse_or("p", def.p)?,
        delta: in_open_unit("delta", cfg.parse_or("delta", def.delta)?)?,
        vc_dim: cfg.parse_or("vc_dim", def.vc_dim)?,
        m_eps: cfg.parse_or("m_eps", def.m_eps)?,
        beta_star_l1: cfg.parse_or("beta_star_l1", def.beta_star_l1)?,
        c_factor: cfg.parse_or("c_factor", def.c_factor)?,
        b_bar: cfg.parse_or("b_bar", def.b_bar)?,
    };
    inputs.validate().map_err(|e| UsageError(e.to_string()))?;
    let reps = at_least(
        "replications",
        cfg.parse_or("replications", 1000usize)?,
        100,
    )?;

    let mut out = CsvOut::new();
    out.row([
        "request", "delta", "k", "n", "value", "coverage", "target", "pass",
    ])?;
    for (name, req) in names.iter().zip(&requests) {
        let (delta, k, n) = (
            inputs.delta.to_string(),
            inputs.k.to_string(),
            inputs.n.to_string(),
        );
        match req {
            Request::Bound(b) => {
                let v = b.evaluate(&inputs)?;
                out.row([name.as_str(), &delta, &k, &n, &v.to_string(), "", "", ""])?;
            }
            Request::Validate(s) => {
                let mut vc = ValidationConfig::standard(*s);
                vc.n = inputs.n;
                vc.k = inputs.k;
                vc.delta = inputs.delta;
                vc.c_factor = inputs.c_factor;
                if cfg.has("d") {
                    let d = inputs.d;
                    let mut model = AdditiveModelSpec::standard(d, vc.model.a);
                    if *s == Statement::XlassoTheorem {
                        model.beta1 = vec![0.0; d];
                    }
                    vc.model = model;
                }
                let r = mc_validate(*s, &vc, reps, seed)?;
                out.row([
                    name.as_str(),
                    &delta,
                    &k,
                    &n,
                    "",
                    &r.coverage.to_string(),
                    &r.target.to_string(),
                    &r.pass.to_string(),
                ])?;
            }
        }
    }
    Ok(Output::single(out.into_bytes()?))
}

fn taus(cfg: &Config, default: Vec<f64>) -> UsageResult<Vec<f64>> {
    let t = cfg.list::<f64>("taus")?.unwrap_or(default);
    check(!t.is_empty(), || "taus is empty".into())?;
    for v in &t {
        in_half_open_unit("taus", *v)?;
    }
    Ok(t)
}

fn experiment_sim(cfg: &Config, seed: u64) -> Result<Output> {
    let def = SimExperimentConfig::full_scale(seed);
    let sim = SimExperimentConfig {
        n: at_least("n", cfg.parse_or("n", def.n)?, 1)?,
        n_test: at_least("n_test", cfg.parse_or("n_test", def.n_test)?, 1)?,
        model: additive_spec(cfg, def.model.d)?,
        taus: taus(cfg, def.taus)?,
        tau_test: in_half_open_unit("tau_test", cfg.parse_or("tau_test", def.tau_test)?)?,
        replications: at_least(
            "replications",
            cfg.parse_or("replications", def.replications)?,
            1,
        )?,
        cv: lambda_cv(cfg)?,
        seed,
    };
    let table = run_simulated_xlasso_experiment(&sim)?;
    Ok(Output {
        main: bytes(|b| table.write_rows(b, "rep"))?,
        extra: vec![("summary", bytes(|b| table.write_summary(b))?)],
    })
}

fn experiment_portfolio(cfg: &Config, seed: u64) -> Result<Output> {
    let def = PortfolioConfig::default();
    let pc = PortfolioConfig {
        target: cfg.str("target").unwrap_or(&def.target).to_string(),
        expected_columns: match cfg.parse_opt::<usize>("columns")? {
            Some(0) => None,
            Some(c) => Some(c),
            None => def.expected_columns,
        },
        splits: at_least("splits", cfg.parse_or("splits", def.splits)?, 1)?,
        train_fraction: in_open_unit(
            "train_fraction",
            cfg.parse_or("train_fraction", def.train_fraction)?,
        )?,
        taus: taus(cfg, def.taus)?,
        tau_test: in_half_open_unit("tau_test", cfg.parse_or("tau_test", def.tau_test)?)?,
        cv: lambda_cv(cfg)?,
        seed,
    };
    let input = cfg.require_str("input")?;
    let raw = ingest_csv(Path::new(input), &Columns::default())?;
    let res = run_portfolio_experiment(&raw, &pc)?;
    Ok(Output {
        main: bytes(|b| res.table.write_rows(b, "split"))?,
        extra: vec![
            ("summary", bytes(|b| res.table.write_summary(b))?),
            ("support", bytes(|b| write_support(b, &res.support))?),
        ],
    })
}

/// Writes `output` to `out` (and its companions next to it), or to stdout.
pub fn emit(output: &Output, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, &output.main)
                .with_context(|| format!("writing {}", path.display()))?;
            for (suffix, data) in &output.extra {
                let p = companion_path(path, suffix);
                std::fs::write(&p, data).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(&output.main)?;
            for (suffix, data) in &output.extra {
                writeln!(lock, "\n# {suffix}")?;
                lock.write_all(data)?;
            }
        }
    }
    Ok(())
}
