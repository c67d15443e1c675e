//! Seeded generators for the data models used in the experiments.
//!
//! Every generator draws from a [`ChaCha8Rng`]. [`SeedStream`] hands out an
//! independent stream per replication index, so replications can run in any
//! order (or concurrently) and still reproduce bit for bit.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::NormSpec;

pub type SimRng = ChaCha8Rng;

/// Splittable deterministic source: one ChaCha stream per replication.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStream {
    seed: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&self, replication: u64) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replication);
        rng
    }

    /// A new stream family keyed by `(seed, label)`.
    pub fn derive(&self, label: u64) -> SeedStream {
        let mut rng = self.rng(u64::MAX - label);
        SeedStream { seed: rng.random() }
    }
}

fn check_dependence(a: f64) -> Result<()> {
    if a > 0.0 && a <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "dependence parameter must lie in (0, 1], got {a}"
        )))
    }
}

/// Positive `a`-stable variable with Laplace transform `exp(−t^a)`, drawn
/// with Kanter's representation
/// `S = (A(U) / E)^((1−a)/a)`,
/// `A(u) = (sin(a u) / sin u)^(1/(1−a)) · sin((1−a) u) / sin(a u)`,
/// with `U` uniform on `(0, π)` and `E` unit exponential.
pub fn positive_stable<R: Rng + ?Sized>(a: f64, rng: &mut R) -> Result<f64> {
    check_dependence(a)?;
    Ok(positive_stable_unchecked(a, rng))
}

fn positive_stable_unchecked<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a == 1.0 {
        return 1.0;
    }
    let u = loop {
        let u = rng.random::<f64>() * PI;
        if u > 0.0 {
            break u;
        }
    };
    let e: f64 = Exp1.sample(rng);
    let au = a * u;
    let zolotarev = (au.sin() / u.sin()).powf(1.0 / (1.0 - a)) * ((1.0 - a) * u).sin() / au.sin();
    (zolotarev / e).powf((1.0 - a) / a)
}

/// Symmetric logistic max-stable sample with unit Fréchet margins,
/// `P(X ≤ x) = exp(−(Σ_j x_j^(−1/a))^a)`.
pub fn mv_logistic<R: Rng + ?Sized>(n: usize, d: usize, a: f64, rng: &mut R) -> Result<Dataset> {
    check_dependence(a)?;
    let mut x = Vec::with_capacity(n * d);
    for _ in 0..n {
        let s = positive_stable_unchecked(a, rng);
        for _ in 0..d {
            let w: f64 = Exp1.sample(rng);
            x.push((s / w).powf(a));
        }
    }
    Dataset::new(n, d, x)
}

/// Standard normal conditioned on `[lo, hi]`, by rejection.
///
/// Proposals are standard normal when the interval holds the bulk of the
/// mass, shifted exponential for one-sided tails and uniform otherwise.
pub fn truncated_gaussian<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "truncation interval needs lo < hi, got [{lo}, {hi}]"
        )));
    }
    if lo <= 0.0 && hi >= 0.0 && hi - lo >= 1.0 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z >= lo && z <= hi {
                return Ok(z);
            }
        }
    }
    if hi <= 0.0 {
        return truncated_gaussian(-hi, -lo, rng).map(|z| -z);
    }
    if lo > 0.0 {
        // Robert's exponential proposal, used when it beats the uniform one.
        let alpha = 0.5 * (lo + (lo * lo + 4.0).sqrt());
        let uniform_better = hi - lo < 2.0 * (1.0 / alpha).max(0.5);
        if !uniform_better {
            loop {
                let e: f64 = Exp1.sample(rng);
                let z = lo + e / alpha;
                if z > hi {
                    continue;
                }
                if rng.random::<f64>() <= (-(z - alpha).powi(2) / 2.0).exp() {
                    return Ok(z);
                }
            }
        }
    }
    // Uniform proposal against the density peak inside the interval.
    let peak = if lo > 0.0 {
        lo
    } else if hi < 0.0 {
        hi
    } else {
        0.0
    };
    loop {
        let z = lo + (hi - lo) * rng.random::<f64>();
        if rng.random::<f64>() <= ((peak * peak - z * z) / 2.0).exp() {
            return Ok(z);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Noise {
    None,
    TruncatedGaussian { lo: f64, hi: f64 },
}

impl Noise {
    /// Largest absolute value the noise can take.
    pub fn bound(&self) -> f64 {
        match *self {
            Noise::None => 0.0,
            Noise::TruncatedGaussian { lo, hi } => lo.abs().max(hi.abs()),
        }
    }
}

/// `Y = ⟨θ(X), β₀⟩ + ⟨θ(X), β₁⟩ / log(1 + ‖X‖₂) + ε` with `X` symmetric
/// logistic; `θ` uses the ℓ2 norm.
#[derive(Clone, Debug, PartialEq)]
pub struct AdditiveModelSpec {
    pub d: usize,
    pub a: f64,
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
    pub noise: Noise,
}

impl AdditiveModelSpec {
    /// `β₀` with five leading ones, `β₁` all ones, noise truncated to
    /// `[−2, 2]`.
    pub fn standard(d: usize, a: f64) -> Self {
        AdditiveModelSpec {
            d,
            a,
            beta0: (0..d).map(|j| if j < 5 { 1.0 } else { 0.0 }).collect(),
            beta1: vec![1.0; d],
            noise: Noise::TruncatedGaussian { lo: -2.0, hi: 2.0 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_dependence(self.a)?;
        if self.d == 0 || self.beta0.len() != self.d || self.beta1.len() != self.d {
            return Err(Error::InvalidArgument(format!(
                "additive model needs d >= 1 and coefficient vectors of length d = {}",
                self.d
            )));
        }
        if let Noise::TruncatedGaussian { lo, hi } = self.noise {
            if !(lo < hi) {
                return Err(Error::InvalidArgument(format!(
                    "noise interval needs lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Noise-free regression function at `x`.
    pub fn mean(&self, x: &[f64]) -> f64 {
        let r = NormSpec::L2.norm(x);
        let (mut s0, mut s1) = (0.0, 0.0);
        for ((xi, b0), b1) in x.iter().zip(&self.beta0).zip(&self.beta1) {
            let t = xi / r;
            s0 += t * b0;
            s1 += t * b1;
        }
        s0 + s1 / (1.0 + r).ln()
    }

    /// Envelope `‖β₁‖₁ / log(1 + t)` of the bias term above radius `t`.
    pub fn bias_envelope(&self, t: f64) -> f64 {
        self.beta1.iter().map(|b| b.abs()).sum::<f64>() / (1.0 + t).ln()
    }
}

pub fn gen_additive_regression<R: Rng + ?Sized>(
    n: usize,
    spec: &AdditiveModelSpec,
    rng: &mut R,
) -> Result<Dataset> {
    spec.validate()?;
    let x = mv_logistic(n, spec.d, spec.a, rng)?;
    let mut y = Vec::with_capacity(n);
    for row in x.rows() {
        let eps = match spec.noise {
            Noise::None => 0.0,
            Noise::TruncatedGaussian { lo, hi } => truncated_gaussian(lo, hi, rng)?,
        };
        y.push(spec.mean(row) + eps);
    }
    x.with_targets(y)
}

/// Label threshold `(1/(d+1))^(1/p)`.
pub fn classif_threshold(d: usize, p: f64) -> f64 {
    (1.0 / (d + 1) as f64).powf(1.0 / p)
}

/// `Z` symmetric logistic in dimension `d+1`; `X` the first `d` columns and
/// `Y = +1` iff `Z_{d+1} / ‖Z‖_p > (1/(d+1))^(1/p)`.
pub fn gen_classification_rv<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    a: f64,
    norm_p: f64,
    rng: &mut R,
) -> Result<Dataset> {
    if !(norm_p >= 1.0) || !norm_p.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "label norm exponent must lie in [1, inf), got {norm_p}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("need d >= 1 covariates".into()));
    }
    let spec = NormSpec::new(norm_p)?;
    let z = mv_logistic(n, d + 1, a, rng)?;
    let c = classif_threshold(d, norm_p);
    let mut x = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for row in z.rows() {
        x.extend_from_slice(&row[..d]);
        labels.push(if row[d] / spec.norm(row) > c { 1 } else { -1 });
    }
    Dataset::new(n, d, x)?.with_labels(labels)
}
