use evlearn::anomaly::{angular_mvset, anomaly_score, build_grid, greedy_select};
use evlearn::bounds::{mc_validate, Statement, ValidationConfig};
use evlearn::experiment::{run_simulated_xlasso_experiment, LambdaCv, SimExperimentConfig};
use evlearn::par::force_sequential;
use evlearn::persist::{read_model, write_model, ModelFile, SavedModel};
use evlearn::regression::{fit_xlasso, kkt_certificate, lambda_max};
use evlearn::simulate::{gen_additive_regression, mv_logistic, AdditiveModelSpec, SeedStream};
use evlearn::tail::{select_extremes, Standardizer};
use evlearn::transforms::fit_margins;
use evlearn::{Dataset, NormSpec};
use proptest::prelude::*;

#[test]
fn mvset_model_survives_persistence() {
    let data = mv_logistic(5000, 3, 0.5, &mut SeedStream::new(41).rng(0)).unwrap();
    let grid = build_grid(3, 3).unwrap();
    let model = angular_mvset(&data, 200, 0.9, 0.1, &grid).unwrap();
    let margins = fit_margins(&data).unwrap();
    let mut file = ModelFile::new(SavedModel::MvSet(model.clone()));
    file.rank_margins = Some(margins.clone());

    let mut buf = Vec::new();
    write_model(&mut buf, &file).unwrap();
    let back = read_model(buf.as_slice()).unwrap();
    let SavedModel::MvSet(loaded) = &back.model else {
        panic!("wrong model kind");
    };
    assert_eq!(loaded, &model);
    let loaded_margins = back.rank_margins.as_ref().unwrap();
    for x in data.rows().take(200) {
        assert_eq!(
            anomaly_score(loaded, loaded_margins, x).unwrap(),
            anomaly_score(&model, &margins, x).unwrap()
        );
    }
}

#[test]
fn xlasso_fit_is_certified_and_round_trips() {
    let spec = AdditiveModelSpec::standard(12, 0.5);
    let data = gen_additive_regression(8000, &spec, &mut SeedStream::new(42).rng(0)).unwrap();
    let tail = select_extremes(&data, 300, NormSpec::L2, &Standardizer::None).unwrap();
    let model = fit_xlasso(&tail, 0.05 * lambda_max(&tail).unwrap()).unwrap();
    assert!(model.converged);
    assert!(kkt_certificate(&tail, &model, 1e-6).unwrap().pass);

    let mut buf = Vec::new();
    write_model(&mut buf, &ModelFile::new(SavedModel::Linear(model.clone()))).unwrap();
    let SavedModel::Linear(back) = read_model(buf.as_slice()).unwrap().model else {
        panic!("wrong model kind");
    };
    assert_eq!(back, model);
}

#[test]
fn sequential_and_parallel_agree() {
    let cfg = SimExperimentConfig {
        n: 2000,
        n_test: 5000,
        model: AdditiveModelSpec::standard(8, 0.5),
        taus: vec![0.03, 0.06],
        tau_test: 0.02,
        replications: 3,
        cv: LambdaCv {
            points: 8,
            ..LambdaCv::default()
        },
        seed: 43,
    };
    let par = run_simulated_xlasso_experiment(&cfg).unwrap();
    let seq = force_sequential(|| run_simulated_xlasso_experiment(&cfg)).unwrap();
    assert_eq!(par.rows, seq.rows);

    let v = ValidationConfig {
        n: 2000,
        k: 40,
        ..ValidationConfig::standard(Statement::QuantileLemma)
    };
    let a = mc_validate(Statement::QuantileLemma, &v, 100, 44).unwrap();
    let b = force_sequential(|| mc_validate(Statement::QuantileLemma, &v, 100, 44)).unwrap();
    assert_eq!(a, b);
}

fn rows(d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.01f64..1e4, d), 5..60)
}

proptest! {
    #[test]
    fn extremes_are_sorted_unit_angles(rows in rows(3), p in prop::sample::select(vec![1.0, 2.0, f64::INFINITY]), frac in 0.1f64..1.0) {
        let data = Dataset::from_rows(&rows).unwrap();
        let spec = NormSpec::new(p).unwrap();
        let k = ((data.n() as f64 * frac).ceil() as usize).max(1);
        let tail = select_extremes(&data, k, spec, &Standardizer::None).unwrap();
        prop_assert_eq!(tail.k, k);
        prop_assert!(tail.radii.windows(2).all(|w| w[0] >= w[1]));
        for a in tail.angle_rows() {
            prop_assert!((spec.norm(a) - 1.0).abs() < 1e-12);
        }
        let all = select_extremes(&data, data.n(), spec, &Standardizer::None).unwrap();
        prop_assert!(all.radii[k - 1] <= tail.threshold);
    }

    #[test]
    fn greedy_mass_is_monotone_in_target(w in prop::collection::vec(0.0f64..1.0, 1..20), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let total: f64 = w.iter().sum();
        prop_assume!(total > 0.0);
        let masses: Vec<f64> = w.iter().map(|x| x / total).collect();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = greedy_select(&masses, lo).unwrap();
        let b = greedy_select(&masses, hi).unwrap();
        prop_assert!(a.len() <= b.len());
        prop_assert_eq!(&b[..a.len()], &a[..]);
    }

    #[test]
    fn rank_transform_is_monotone(col in prop::collection::vec(-1e3f64..1e3, 2..80)) {
        let rows: Vec<Vec<f64>> = col.iter().map(|&v| vec![v]).collect();
        let data = Dataset::from_rows(&rows).unwrap();
        let m = fit_margins(&data).unwrap();
        let t = m.transform_dataset(&data).unwrap();
        let n = data.n() as f64;
        for i in 0..data.n() {
            for j in 0..data.n() {
                if col[i] < col[j] {
                    prop_assert!(t.row(i)[0] < t.row(j)[0]);
                }
            }
            prop_assert!(t.row(i)[0] >= (n + 1.0) / n - 1e-12);
            prop_assert!(t.row(i)[0] <= n + 1.0 + 1e-9);
        }
    }
}
