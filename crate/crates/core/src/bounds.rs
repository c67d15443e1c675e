//! Closed-form finite-sample bounds and Monte Carlo coverage checks for the
//! probabilistic statements behind them.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::NormSpec;
use crate::par;
use crate::regression::{fit_xlasso_with, CdConfig};
use crate::simulate::{gen_additive_regression, mv_logistic, AdditiveModelSpec, Noise, SeedStream};
use crate::tail::{select_extremes, Standardizer, TailSample};

#[derive(Clone, Debug, PartialEq)]
pub struct BoundInputs {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    /// Tail probability of the conditioning region.
    pub p: f64,
    pub delta: f64,
    pub vc_dim: usize,
    pub m_eps: f64,
    pub beta_star_l1: f64,
    pub c_factor: f64,
    pub b_bar: f64,
}

impl Default for BoundInputs {
    fn default() -> Self {
        BoundInputs {
            n: 5000,
            k: 50,
            d: 10,
            p: 0.01,
            delta: 0.1,
            vc_dim: 1,
            m_eps: 1.0,
            beta_star_l1: 1.0,
            c_factor: 1.0,
            b_bar: 0.0,
        }
    }
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta must lie in (0, 1], got {}", self.delta));
        }
        if self.n == 0 || self.k == 0 || self.k > self.n {
            return bad(format!(
                "need 1 <= k <= n, got k = {}, n = {}",
                self.k, self.n
            ));
        }
        if self.d == 0 {
            return bad("d must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad(format!("p must lie in [0, 1], got {}", self.p));
        }
        if self.vc_dim == 0 {
            return bad("vc_dim must be positive".into());
        }
        for (name, v) in [
            ("m_eps", self.m_eps),
            ("beta_star_l1", self.beta_star_l1),
            ("b_bar", self.b_bar),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(self.c_factor >= 1.0) || !self.c_factor.is_finite() {
            return bad(format!("c_factor must be >= 1, got {}", self.c_factor));
        }
        Ok(())
    }
}

/// Uniform deviation bound for a VC class restricted to a region of
/// probability `p`:
/// `√(2p/n)(√(2 log(1/δ)) + √(log 2 + V log(2np+1)) + √2/2) + 2 log(1/δ)/(3n)`.
pub fn vc_tail_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let n = inputs.n as f64;
    let p = inputs.p;
    let v = inputs.vc_dim as f64;
    let ld = (1.0 / inputs.delta).ln();
    let inner =
        (2.0 * ld).sqrt() + (2f64.ln() + v * (2.0 * n * p + 1.0).ln()).sqrt() + 0.5 * 2f64.sqrt();
    Ok((2.0 * p / n).sqrt() * inner + 2.0 * ld / (3.0 * n))
}

/// `M_ε √(log(4d/δ) / (2k))`.
pub fn b_term(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    b_term_raw(inputs.m_eps, inputs.d, inputs.delta, inputs.k)
}

fn b_term_raw(m_eps: f64, d: usize, delta: f64, k: usize) -> Result<f64> {
    let ratio = 4.0 * d as f64 / delta;
    if !(ratio > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "4d/delta = {ratio} must exceed 1"
        )));
    }
    Ok(m_eps * (ratio.ln() / (2.0 * k as f64)).sqrt())
}

/// Inflated extreme count `k(1 + √(3 log(1/δ)/k) + 3 log(1/δ)/k)`.
pub fn k_tilde(k: usize, delta: f64) -> Result<f64> {
    if k == 0 || !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "k_tilde needs k >= 1 and delta in (0, 1], got k = {k}, delta = {delta}"
        )));
    }
    let kf = k as f64;
    let l = 3.0 * (1.0 / delta).ln();
    Ok(kf * (1.0 + (l / kf).sqrt() + l / kf))
}

/// Bound on `‖Wᵀe‖∞ / k`: `b_term + b̄`.
pub fn residual_bound(inputs: &BoundInputs) -> Result<f64> {
    Ok(b_term(inputs)? + inputs.b_bar)
}

/// Slow-rate prediction bound `24 C ‖β*‖₁ · b_term`.
pub fn xlasso_prediction_bound(inputs: &BoundInputs) -> Result<f64> {
    Ok(24.0 * inputs.c_factor * inputs.beta_star_l1 * b_term(inputs)?)
}

/// Named bound evaluators, for report generation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    VcTail,
    BTerm,
    KTilde,
    Residual,
    XlassoPrediction,
}

impl BoundKind {
    pub fn evaluate(&self, inputs: &BoundInputs) -> Result<f64> {
        match self {
            BoundKind::VcTail => vc_tail_bound(inputs),
            BoundKind::BTerm => b_term(inputs),
            BoundKind::KTilde => {
                inputs.validate()?;
                k_tilde(inputs.k, inputs.delta)
            }
            BoundKind::Residual => residual_bound(inputs),
            BoundKind::XlassoPrediction => xlasso_prediction_bound(inputs),
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::VcTail => "vc-tail",
            BoundKind::BTerm => "b-term",
            BoundKind::KTilde => "k-tilde",
            BoundKind::Residual => "residual",
            BoundKind::XlassoPrediction => "xlasso-prediction",
        })
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "vc-tail" => Ok(BoundKind::VcTail),
            "b-term" => Ok(BoundKind::BTerm),
            "k-tilde" => Ok(BoundKind::KTilde),
            "residual" => Ok(BoundKind::Residual),
            "xlasso-prediction" => Ok(BoundKind::XlassoPrediction),
            other => Err(Error::InvalidArgument(format!("unknown bound {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Statement {
    /// `R_(k) ≥ F←(1 − k̃(δ)/n)` for unit Pareto radii.
    QuantileLemma,
    /// `‖Wᵀe‖∞/k ≤ b_term + b̄(t)` under the additive logistic model.
    ResidualProp,
    /// Slow-rate XLASSO prediction bound at `λ = 2 C b_term`.
    XlassoTheorem,
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statement::QuantileLemma => "quantile-lemma",
            Statement::ResidualProp => "residual-prop",
            Statement::XlassoTheorem => "xlasso-theorem",
        })
    }
}

impl FromStr for Statement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "quantile-lemma" => Ok(Statement::QuantileLemma),
            "residual-prop" => Ok(Statement::ResidualProp),
            "xlasso-theorem" => Ok(Statement::XlassoTheorem),
            other => Err(Error::InvalidArgument(format!(
                "unknown statement {other:?}"
            ))),
        }
    }
}

/// Generator and sizes for [`mc_validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationConfig {
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    /// Model for the regression statements; ignored by the quantile lemma.
    pub model: AdditiveModelSpec,
    pub c_factor: f64,
    /// Size of the reference sample used to locate the radius quantile.
    pub reference_size: usize,
}

impl ValidationConfig {
    /// `n = 5000`, `k = 50`, `δ = 0.1`, `d = 50`, logistic `a = 0.5`. The
    /// theorem check drops the bias term (`β₁ = 0`) so that its
    /// precondition on `b̄` holds.
    pub fn standard(statement: Statement) -> Self {
        let mut model = AdditiveModelSpec::standard(50, 0.5);
        if statement == Statement::XlassoTheorem {
            model.beta1 = vec![0.0; model.d];
        }
        ValidationConfig {
            n: 5000,
            k: 50,
            delta: 0.1,
            model,
            c_factor: 1.0,
            reference_size: 200_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.k > self.n {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= k <= n, got k = {}, n = {}",
                self.k, self.n
            )));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        if !(self.c_factor >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "c_factor must be >= 1, got {}",
                self.c_factor
            )));
        }
        self.model.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub statement: Statement,
    pub delta: f64,
    pub k: usize,
    pub n: usize,
    pub replications: usize,
    pub coverage: f64,
    pub target: f64,
    pub pass: bool,
    /// Whether `b̄(t) ≤ b_term`, for the theorem check only.
    pub precondition: Option<bool>,
}

pub const MIN_REPLICATIONS: usize = 100;

/// Coverage required at `reps` replications: `(1−δ) − 3√(δ(1−δ)/reps)`.
pub fn coverage_target(delta: f64, reps: usize) -> f64 {
    (1.0 - delta) - 3.0 * (delta * (1.0 - delta) / reps as f64).sqrt()
}

/// Relative slack absorbing rounding when a bound is exactly attained.
const ROUNDING: f64 = 1e-10;

fn below(stat: f64, bound: f64) -> bool {
    stat <= bound + ROUNDING * (1.0 + bound.abs())
}

/// Empirical coverage of a probabilistic statement over seeded
/// replications. Replication `r` draws from stream `r` of `seed`.
pub fn mc_validate(
    statement: Statement,
    config: &ValidationConfig,
    replications: usize,
    seed: u64,
) -> Result<ValidationReport> {
    if replications < MIN_REPLICATIONS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_REPLICATIONS} replications, got {replications}"
        )));
    }
    config.validate()?;
    let stream = SeedStream::new(seed);
    let mut precondition = None;
    let hits: Vec<bool> = match statement {
        Statement::QuantileLemma => {
            let kt = k_tilde(config.k, config.delta)?;
            let threshold = pareto_quantile_threshold(config.n, kt);
            par::map_indices(replications, |r| {
                let mut rng = stream.rng(r as u64);
                kth_largest_pareto(config.n, config.k, &mut rng) >= threshold
            })
        }
        Statement::ResidualProp => {
            let bound = residual_bound_for(config, &stream)?;
            par::try_map_indices(replications, |r| {
                let sample = model_tail(config, &stream, r)?;
                Ok::<_, Error>(below(residual_stat(&sample, &config.model.beta0)?, bound))
            })?
        }
        Statement::XlassoTheorem => {
            let model = &config.model;
            let b = b_term_raw(model.noise.bound(), model.d, config.delta, config.k)?;
            let b_bar = bias_at_quantile(config, &stream)?;
            precondition = Some(b_bar <= b);
            let lambda = 2.0 * config.c_factor * b;
            let beta_l1: f64 = model.beta0.iter().map(|v| v.abs()).sum();
            let bound = 24.0 * config.c_factor * beta_l1 * b;
            par::try_map_indices(replications, |r| {
                let sample = model_tail(config, &stream, r)?;
                let fit = fit_xlasso_with(&sample, lambda, &CdConfig::default(), None)?;
                Ok::<_, Error>(below(
                    prediction_error(&sample, &fit.beta, &model.beta0),
                    bound,
                ))
            })?
        }
    };
    let coverage = hits.iter().filter(|&&h| h).count() as f64 / replications as f64;
    let target = coverage_target(config.delta, replications);
    Ok(ValidationReport {
        statement,
        delta: config.delta,
        k: config.k,
        n: config.n,
        replications,
        coverage,
        target,
        pass: coverage >= target,
        precondition,
    })
}

/// `F←(1 − κ/n)` for the unit Pareto law; the lower end of the support
/// when `κ ≥ n`.
pub fn pareto_quantile_threshold(n: usize, kappa: f64) -> f64 {
    if kappa >= n as f64 {
        1.0
    } else {
        n as f64 / kappa
    }
}

fn kth_largest_pareto<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> f64 {
    let mut radii: Vec<f64> = (0..n).map(|_| 1.0 / (1.0 - rng.random::<f64>())).collect();
    let (_, kth, _) = radii.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    *kth
}

fn model_tail(config: &ValidationConfig, stream: &SeedStream, r: usize) -> Result<TailSample> {
    let mut rng = stream.rng(r as u64);
    let data = gen_additive_regression(config.n, &config.model, &mut rng)
        .map_err(|e| Error::InvalidArgument(format!("replication {r}: {e}")))?;
    select_extremes(&data, config.k, NormSpec::L2, &Standardizer::None)
}

/// `‖Wᵀ(y − Wβ*)‖∞ / k`.
pub fn residual_stat(sample: &TailSample, beta_star: &[f64]) -> Result<f64> {
    let y = sample.targets_or_err()?;
    let mut corr = vec![0.0; sample.d];
    for (i, w) in sample.angle_rows().enumerate() {
        let e = y[i] - w.iter().zip(beta_star).map(|(a, b)| a * b).sum::<f64>();
        for (c, wj) in corr.iter_mut().zip(w) {
            *c += wj * e;
        }
    }
    Ok(corr.iter().fold(0.0_f64, |m, c| m.max(c.abs())) / sample.k as f64)
}

fn prediction_error(sample: &TailSample, beta: &[f64], beta_star: &[f64]) -> f64 {
    sample
        .angle_rows()
        .map(|w| {
            w.iter()
                .zip(beta.iter().zip(beta_star))
                .map(|(a, (b, s))| a * (b - s))
                .sum::<f64>()
                .powi(2)
        })
        .sum::<f64>()
        / sample.k as f64
}

fn residual_bound_for(config: &ValidationConfig, stream: &SeedStream) -> Result<f64> {
    let model = &config.model;
    let b = b_term_raw(model.noise.bound(), model.d, config.delta, config.k)?;
    Ok(b + bias_at_quantile(config, stream)?)
}

/// `b̄(t)` at `t` the `1 − k̃(δ/2)/n` quantile of `‖X‖₂`, the quantile read
/// off a reference sample drawn from a stream disjoint from the
/// replications.
fn bias_at_quantile(config: &ValidationConfig, stream: &SeedStream) -> Result<f64> {
    let model = &config.model;
    if model.beta1.iter().all(|&b| b == 0.0) {
        return Ok(0.0);
    }
    let kt = k_tilde(config.k, config.delta / 2.0)?;
    if kt >= config.n as f64 {
        return Ok(f64::INFINITY);
    }
    let mut rng = stream.derive(1).rng(0);
    let reference = mv_logistic(config.reference_size, model.d, model.a, &mut rng)?;
    let mut radii: Vec<f64> = reference.rows().map(|r| NormSpec::L2.norm(r)).collect();
    let t = empirical_quantile(&mut radii, 1.0 - kt / config.n as f64);
    Ok(model.bias_envelope(t))
}

/// Generalized inverse of the empirical CDF at level `q`.
fn empirical_quantile(values: &mut [f64], q: f64) -> f64 {
    let n = values.len();
    let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    let (_, v, _) = values.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
    *v
}

/// Noise-free, bias-free variant of a model (for sanity checks).
pub fn exact_linear(model: &AdditiveModelSpec) -> AdditiveModelSpec {
    AdditiveModelSpec {
        beta1: vec![0.0; model.d],
        noise: Noise::None,
        ..model.clone()
    }
}

pub const REPORT_HEADER: &str = "statement,delta,k,n,coverage,target,pass";

pub fn write_validation_rows<W: Write>(out: &mut W, reports: &[ValidationReport]) -> Result<()> {
    let io = |e: std::io::Error| Error::Format(e.to_string());
    writeln!(out, "{REPORT_HEADER}").map_err(io)?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.statement, r.delta, r.k, r.n, r.coverage, r.target, r.pass
        )
        .map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> BoundInputs {
        BoundInputs::default()
    }

    #[test]
    fn vc_bound_cases() {
        let mut i = inputs();
        i.n = 100;
        i.p = 0.1;
        i.vc_dim = 2;
        i.delta = 0.05;
        let l = (1.0f64 / 0.05).ln();
        let hand = (0.2f64 / 100.0).sqrt()
            * ((2.0 * l).sqrt() + (2f64.ln() + 2.0 * 21f64.ln()).sqrt() + 2f64.sqrt() / 2.0)
            + 2.0 / 300.0 * l;
        assert!((vc_tail_bound(&i).unwrap() - hand).abs() < 1e-12);

        i.delta = 1.0;
        let hand =
            (0.2f64 / 100.0).sqrt() * ((2f64.ln() + 2.0 * 21f64.ln()).sqrt() + 2f64.sqrt() / 2.0);
        assert!((vc_tail_bound(&i).unwrap() - hand).abs() < 1e-12);

        i.delta = 0.05;
        i.p = 0.0;
        assert!((vc_tail_bound(&i).unwrap() - 2.0 / 300.0 * l).abs() < 1e-15);
    }

    #[test]
    fn b_term_cases() {
        let mut i = inputs();
        i.d = 1;
        i.k = 1;
        i.n = 1;
        i.m_eps = 1.0;
        i.delta = 4.0 * (-2.0f64).exp();
        assert!((b_term(&i).unwrap() - 1.0).abs() < 1e-12);
        i.m_eps = 0.0;
        assert_eq!(b_term(&i).unwrap(), 0.0);

        let mut i = inputs();
        let b1 = b_term(&i).unwrap();
        i.k *= 4;
        assert!((b_term(&i).unwrap() - b1 / 2.0).abs() < 1e-15);

        assert!(b_term_raw(1.0, 1, 4.0, 1).is_err());
    }

    #[test]
    fn k_tilde_cases() {
        assert_eq!(k_tilde(50, 1.0).unwrap(), 50.0);
        for k in [1usize, 3, 50, 1000] {
            let delta = (-(k as f64) / 3.0).exp();
            assert!((k_tilde(k, delta).unwrap() - 3.0 * k as f64).abs() < 1e-12 * k as f64);
        }
        assert!(k_tilde(50, 0.01).unwrap() > k_tilde(50, 0.1).unwrap());
        assert!(k_tilde(0, 0.1).is_err());
        assert!(k_tilde(5, 0.0).is_err());
    }

    #[test]
    fn residual_and_prediction() {
        let mut i = inputs();
        assert_eq!(residual_bound(&i).unwrap(), b_term(&i).unwrap());
        i.b_bar = 0.37;
        assert!((residual_bound(&i).unwrap() - 0.37 - b_term(&i).unwrap()).abs() < 1e-15);

        let spec = AdditiveModelSpec::standard(10, 0.5);
        assert!((spec.bias_envelope(std::f64::consts::E - 1.0) - 10.0).abs() < 1e-12);

        let i = inputs();
        assert!((xlasso_prediction_bound(&i).unwrap() - 24.0 * b_term(&i).unwrap()).abs() < 1e-15);
        let mut j = i.clone();
        j.beta_star_l1 = 0.0;
        assert_eq!(xlasso_prediction_bound(&j).unwrap(), 0.0);
        let mut j = i.clone();
        j.c_factor = 2.0;
        assert_eq!(
            xlasso_prediction_bound(&j).unwrap(),
            2.0 * xlasso_prediction_bound(&i).unwrap()
        );
    }

    #[test]
    fn decreasing_in_k() {
        let mut prev = [f64::INFINITY; 3];
        for k in [10, 20, 40, 80] {
            let mut i = inputs();
            i.k = k;
            i.b_bar = 0.1;
            let cur = [
                b_term(&i).unwrap(),
                residual_bound(&i).unwrap(),
                xlasso_prediction_bound(&i).unwrap(),
            ];
            for (c, p) in cur.iter().zip(prev) {
                assert!(*c < p);
            }
            prev = cur;
        }
    }

    #[test]
    fn input_validation() {
        let mut i = inputs();
        i.delta = 0.0;
        assert!(vc_tail_bound(&i).is_err());
        let mut i = inputs();
        i.k = i.n + 1;
        assert!(b_term(&i).is_err());
        let mut i = inputs();
        i.c_factor = 0.5;
        assert!(xlasso_prediction_bound(&i).is_err());
        assert!("nope".parse::<BoundKind>().is_err());
        assert!("nope".parse::<Statement>().is_err());
        for s in [
            "vc-tail",
            "b-term",
            "k-tilde",
            "residual",
            "xlasso-prediction",
        ] {
            assert_eq!(s.parse::<BoundKind>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn pareto_threshold() {
        assert_eq!(pareto_quantile_threshold(100, 10.0), 10.0);
        assert_eq!(pareto_quantile_threshold(100, 100.0), 1.0);
        assert_eq!(pareto_quantile_threshold(100, 250.0), 1.0);
    }

    #[test]
    fn too_few_replications() {
        let c = ValidationConfig::standard(Statement::QuantileLemma);
        assert!(mc_validate(Statement::QuantileLemma, &c, 99, 1).is_err());
    }

    #[test]
    fn quantile_lemma_coverage_and_vacuous_level() {
        let mut c = ValidationConfig::standard(Statement::QuantileLemma);
        c.n = 2000;
        c.k = 20;
        let r = mc_validate(Statement::QuantileLemma, &c, 300, 3).unwrap();
        assert!(r.pass, "{r:?}");
        c.delta = 1.0 - 1e-9;
        let r = mc_validate(Statement::QuantileLemma, &c, 100, 3).unwrap();
        assert!(r.coverage >= r.target);
    }

    #[test]
    fn residual_zero_in_exact_linear_model() {
        let mut c = ValidationConfig::standard(Statement::ResidualProp);
        c.n = 500;
        c.model = exact_linear(&AdditiveModelSpec::standard(5, 0.5));
        let r = mc_validate(Statement::ResidualProp, &c, 100, 2).unwrap();
        assert_eq!(r.coverage, 1.0);
    }

    #[test]
    fn reproducible_report() {
        let mut c = ValidationConfig::standard(Statement::XlassoTheorem);
        c.n = 800;
        c.k = 40;
        c.model = AdditiveModelSpec {
            beta1: vec![0.0; 8],
            ..AdditiveModelSpec::standard(8, 0.5)
        };
        let a = mc_validate(Statement::XlassoTheorem, &c, 100, 5).unwrap();
        let b =
            par::force_sequential(|| mc_validate(Statement::XlassoTheorem, &c, 100, 5).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.precondition, Some(true));
        let mut buf = Vec::new();
        write_validation_rows(&mut buf, &[a]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(REPORT_HEADER));
        assert_eq!(text.lines().count(), 2);
    }
}
