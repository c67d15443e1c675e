use evlearn::simulate::{
    gen_classification_rv, mv_logistic, positive_stable, truncated_gaussian, SeedStream,
};
use evlearn::tail::{select_extremes, Standardizer};
use evlearn::transforms::{pareto_standardize, KnownMargins, Margin};
use evlearn::NormSpec;
use statrs::distribution::{ContinuousCDF, Normal};

fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0_f64, |m, (i, &x)| {
        let f = cdf(x);
        m.max((f - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - f).abs())
    })
}

/// 99.9% Kolmogorov critical value.
fn ks_critical(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}

#[test]
fn positive_stable_laplace_transform() {
    let n = 200_000;
    for (i, a) in [0.2, 0.5, 0.8].into_iter().enumerate() {
        let mut rng = SeedStream::new(31).rng(i as u64);
        let draws: Vec<f64> = (0..n)
            .map(|_| positive_stable(a, &mut rng).unwrap())
            .collect();
        for t in [0.5, 1.0, 2.0] {
            let est = draws.iter().map(|s| (-t * s).exp()).sum::<f64>() / n as f64;
            let exact = (-t.powf(a)).exp();
            assert!(
                (est - exact).abs() < 4.0 * 0.5 / (n as f64).sqrt(),
                "a={a} t={t}: {est} vs {exact}"
            );
        }
    }
}

#[test]
fn truncated_gaussian_matches_conditioned_normal() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n = 20_000;
    for (i, (lo, hi)) in [
        (-2.0, 2.0),
        (1.0, 3.0),
        (-0.3, 0.2),
        (3.0, 6.0),
        (-5.0, -2.5),
    ]
    .into_iter()
    .enumerate()
    {
        let mut rng = SeedStream::new(32).rng(i as u64);
        let xs: Vec<f64> = (0..n)
            .map(|_| truncated_gaussian(lo, hi, &mut rng).unwrap())
            .collect();
        assert!(xs.iter().all(|&x| x >= lo && x <= hi));
        let (flo, fhi) = (normal.cdf(lo), normal.cdf(hi));
        let d = ks(xs, |x| (normal.cdf(x) - flo) / (fhi - flo));
        assert!(d < ks_critical(n), "[{lo}, {hi}]: KS {d}");
    }
}

#[test]
fn logistic_margins_are_unit_frechet() {
    let n = 50_000;
    for (i, a) in [0.1, 0.5, 1.0].into_iter().enumerate() {
        let x = mv_logistic(n, 4, a, &mut SeedStream::new(33).rng(i as u64)).unwrap();
        for j in 0..4 {
            let d = ks(x.column(j), |v| (-1.0 / v).exp());
            assert!(d < ks_critical(n), "a={a} column {j}: KS {d}");
        }
    }
}

#[test]
fn logistic_joint_maximum_law() {
    // P(max_j X_j ≤ t) = exp(−d^a / t).
    let (n, d, a) = (50_000, 3, 0.4);
    let x = mv_logistic(n, d, a, &mut SeedStream::new(34).rng(0)).unwrap();
    let maxima: Vec<f64> = x
        .rows()
        .map(|r| r.iter().cloned().fold(0.0, f64::max))
        .collect();
    let scale = (d as f64).powf(a);
    let stat = ks(maxima, |t| (-scale / t).exp());
    assert!(stat < ks_critical(n), "KS {stat}");
}

#[test]
fn tail_dependence_follows_dependence_parameter() {
    // Upper tail dependence coefficient of the bivariate logistic: 2 − 2^a.
    let n = 200_000;
    let u = 200.0;
    let chi = |a: f64| {
        let x = mv_logistic(n, 2, a, &mut SeedStream::new(35).rng((a * 10.0) as u64)).unwrap();
        let both = x.rows().filter(|r| r[0] > u && r[1] > u).count() as f64;
        let first = x.rows().filter(|r| r[0] > u).count() as f64;
        both / first
    };
    let (strong, weak) = (chi(0.1), chi(0.9));
    assert!((strong - (2.0 - 2f64.powf(0.1))).abs() < 0.05, "{strong}");
    assert!((weak - (2.0 - 2f64.powf(0.9))).abs() < 0.08, "{weak}");
    assert!(strong > weak + 0.5);
}

#[test]
fn frechet_to_pareto_standardization() {
    let n = 30_000;
    let x = mv_logistic(n, 2, 0.5, &mut SeedStream::new(36).rng(0)).unwrap();
    let margins = KnownMargins::uniform_family(Margin::UnitFrechet, 2);
    let v: Vec<f64> = x
        .rows()
        .map(|r| pareto_standardize(&margins, r).unwrap()[1])
        .collect();
    let d = ks(v, |t| if t < 1.0 { 0.0 } else { 1.0 - 1.0 / t });
    assert!(d < ks_critical(n), "KS {d}");
}

#[test]
fn classification_tail_has_both_classes() {
    let data = gen_classification_rv(40_000, 4, 0.5, 1.0, &mut SeedStream::new(37).rng(0)).unwrap();
    let tail = select_extremes(&data, 400, NormSpec::L1, &Standardizer::None).unwrap();
    let pos = tail
        .labels_or_err()
        .unwrap()
        .iter()
        .filter(|&&l| l == 1)
        .count();
    assert!(pos > 20 && pos < 380, "{pos} positives among 400 extremes");
}
