#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn evlearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evlearn"))
        .args(args)
        .output()
        .expect("spawn evlearn")
}

/// Runs a subcommand with `key=value` overrides, writing to `dir/out`.
pub fn run(dir: &Path, cmd: &str, out: &str, sets: &[&str], seed: u64) -> Output {
    let out_path = dir.join(out);
    let seed = seed.to_string();
    let mut args = vec![cmd, "--seed", &seed, "--out", out_path.to_str().unwrap()];
    for s in sets {
        args.push("--set");
        args.push(s);
    }
    evlearn(&args)
}

fn path(dir: &Path, name: &str) -> String {
    format!("{}", dir.join(name).display())
}

/// Every subcommand with a small configuration, as `(subcommand, output
/// file, overrides)`. Inputs are produced by the earlier entries.
pub fn pipeline(dir: &Path) -> Vec<(&'static str, &'static str, Vec<String>)> {
    let p = |n: &str| path(dir, n);
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let with = |mut v: Vec<String>, extra: &[String]| {
        v.extend_from_slice(extra);
        v
    };
    vec![
        (
            "simulate",
            "logistic.csv",
            s(&["generator=logistic", "n=2000", "d=3", "a=0.5"]),
        ),
        (
            "simulate",
            "additive.csv",
            s(&["generator=additive", "n=3000", "d=6", "a=0.5"]),
        ),
        (
            "simulate",
            "classif.csv",
            s(&[
                "generator=classification",
                "n=3000",
                "d=3",
                "a=0.5",
                "norm_p=1",
            ]),
        ),
        (
            "standardize",
            "rank.csv",
            vec![format!("input={}", p("logistic.csv"))],
        ),
        (
            "standardize",
            "known.csv",
            with(
                s(&["standardization=known-pareto", "margins=unit-frechet"]),
                &[format!("input={}", p("logistic.csv"))],
            ),
        ),
        (
            "angular-measure",
            "atoms.csv",
            with(s(&["k=100"]), &[format!("input={}", p("logistic.csv"))]),
        ),
        (
            "angular-measure",
            "box.csv",
            with(
                s(&["k=100", "box_lo=0.2,0.2,0.2", "box_hi=1,1,1"]),
                &[format!("input={}", p("logistic.csv"))],
            ),
        ),
        (
            "mvset-fit",
            "mv.model",
            with(
                s(&["k=100", "alpha=0.8", "m=3"]),
                &[format!("input={}", p("logistic.csv"))],
            ),
        ),
        (
            "score",
            "mv_scores.csv",
            vec![
                format!("model={}", p("mv.model")),
                format!("input={}", p("logistic.csv")),
            ],
        ),
        (
            "fit-xlasso",
            "xl.model",
            with(
                s(&["target=y", "k=150", "folds=3", "lambda_points=8"]),
                &[format!("input={}", p("additive.csv"))],
            ),
        ),
        (
            "score",
            "xl_pred.csv",
            vec![
                format!("model={}", p("xl.model")),
                format!("input={}", p("additive.csv")),
                "target=y".into(),
            ],
        ),
        (
            "fit-classifier",
            "cl.model",
            with(
                s(&[
                    "label=label",
                    "k=150",
                    "norm=1",
                    "mode=constrained",
                    "grid=0.5,2,8",
                    "folds=3",
                ]),
                &[format!("input={}", p("classif.csv"))],
            ),
        ),
        (
            "score",
            "cl_pred.csv",
            vec![
                format!("model={}", p("cl.model")),
                format!("input={}", p("classif.csv")),
                "label=label".into(),
            ],
        ),
        (
            "cv",
            "cv_xl.csv",
            with(
                s(&[
                    "target=y",
                    "task=xlasso",
                    "p=0.05",
                    "folds=4",
                    "lambda_points=6",
                ]),
                &[format!("input={}", p("additive.csv"))],
            ),
        ),
        (
            "cv",
            "cv_cl.csv",
            with(
                s(&[
                    "label=label",
                    "task=logistic-lagrangian",
                    "p=0.05",
                    "grid=0.001,0.01,0.1",
                ]),
                &[format!("input={}", p("classif.csv"))],
            ),
        ),
        (
            "bounds",
            "bounds.csv",
            s(&[
                "requests=vc-tail,b-term,k-tilde,residual,xlasso-prediction,mc:quantile-lemma",
                "replications=100",
            ]),
        ),
        (
            "experiment-sim",
            "sim.csv",
            s(&[
                "n=2000",
                "n_test=4000",
                "d=6",
                "taus=0.03,0.06",
                "replications=2",
                "folds=3",
                "lambda_points=6",
            ]),
        ),
        (
            "experiment-portfolio",
            "port.csv",
            with(
                s(&[
                    "target=y",
                    "columns=0",
                    "splits=2",
                    "taus=0.2,0.5",
                    "tau_test=0.05",
                    "folds=3",
                    "lambda_points=6",
                ]),
                &[format!("input={}", p("additive.csv"))],
            ),
        ),
    ]
}

/// Runs [`pipeline`] in `dir` and returns every file it wrote, sorted by
/// name.
pub fn run_pipeline(dir: &Path, seed: u64) -> Result<Vec<(String, Vec<u8>)>, String> {
    for (cmd, out, sets) in pipeline(dir) {
        let refs: Vec<&str> = sets.iter().map(String::as_str).collect();
        let o = run(dir, cmd, out, &refs, seed);
        if !o.status.success() {
            return Err(format!(
                "{cmd} -> {out} failed: {}",
                String::from_utf8_lossy(&o.stderr)
            ));
        }
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    Ok(files
        .into_iter()
        .map(|f| {
            let name = f.file_name().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read(&f).unwrap())
        })
        .collect())
}

/// Names of files that differ between two runs, or that exist in only one.
pub fn differing(a: &[(String, Vec<u8>)], b: &[(String, Vec<u8>)]) -> Vec<String> {
    let mut bad = Vec::new();
    if a.len() != b.len() {
        bad.push(format!("file count {} vs {}", a.len(), b.len()));
    }
    for ((na, da), (nb, db)) in a.iter().zip(b) {
        if na != nb || da != db {
            bad.push(na.clone());
        }
    }
    bad
}
