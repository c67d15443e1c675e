//! Plain-text model files.
//!
//! A file starts with the line `evlearn-model 1`, followed by `key = value`
//! lines. Vectors are space separated. Floats are written in their shortest
//! round-trip form, so a saved model reloads bit for bit.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use crate::anomaly::{build_grid, AngularScore, MvSetModel};
use crate::classification::{AngularClassifier, ClassifierMode};
use crate::error::{Error, Result};
use crate::geometry::NormSpec;
use crate::regression::AngularLinearModel;
use crate::transforms::{MarginalModel, Standardization};

pub const MAGIC: &str = "evlearn-model";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum SavedModel {
    MvSet(MvSetModel),
    Linear(AngularLinearModel),
    Classifier(AngularClassifier),
}

impl SavedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::MvSet(_) => "mvset",
            SavedModel::Linear(_) => "xlasso",
            SavedModel::Classifier(_) => "classifier",
        }
    }
}

/// A fitted model plus what is needed to map raw inputs to its scale.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub model: SavedModel,
    /// Training margins, for rank-standardized models.
    pub rank_margins: Option<MarginalModel>,
    /// Known-margin specification, for Pareto-standardized models.
    pub margin_spec: Option<String>,
}

impl ModelFile {
    pub fn new(model: SavedModel) -> Self {
        ModelFile {
            model,
            rank_margins: None,
            margin_spec: None,
        }
    }
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn io_err(e: std::io::Error) -> Error {
    Error::Format(e.to_string())
}

pub fn write_model<W: Write>(out: &mut W, file: &ModelFile) -> Result<()> {
    let mut lines: Vec<(String, String)> = vec![("kind".into(), file.model.kind().into())];
    let mut put = |k: &str, v: String| lines.push((k.into(), v));
    match &file.model {
        SavedModel::MvSet(m) => {
            put("d", m.grid.d().to_string());
            put("m", m.grid.m().to_string());
            put("alpha", m.alpha.to_string());
            put("psi", m.psi.to_string());
            put("achieved_mass", m.achieved_mass.to_string());
            put("k", m.k.to_string());
            put("norm", m.norm_spec.to_string());
            put("standardization", m.standardization.to_string());
            put("score", m.score.to_string());
            put("selected_cells", join(&m.selected_cells));
            put("cell_masses", join(&m.cell_masses));
        }
        SavedModel::Linear(m) => {
            put("lambda", m.lambda.to_string());
            put("k", m.k.to_string());
            put("norm", m.norm_spec.to_string());
            put("standardization", m.standardization.to_string());
            put("iterations", m.iterations.to_string());
            put("converged", m.converged.to_string());
            put("objective", m.objective.to_string());
            put("beta", join(&m.beta));
        }
        SavedModel::Classifier(m) => {
            let (mode, value) = match m.mode {
                ClassifierMode::Lagrangian(l) => ("lagrangian", l),
                ClassifierMode::Constrained(u) => ("constrained", u),
            };
            put("mode", mode.into());
            put("mode_value", value.to_string());
            put("k", m.k.to_string());
            put("norm", m.norm_spec.to_string());
            put("standardization", m.standardization.to_string());
            put("iterations", m.iterations.to_string());
            put("converged", m.converged.to_string());
            put("objective", m.objective.to_string());
            put("single_class", m.single_class.to_string());
            put("beta", join(&m.beta));
        }
    }
    if let Some(spec) = &file.margin_spec {
        put("margin_spec", spec.clone());
    }
    if let Some(mm) = &file.rank_margins {
        for (j, c) in mm.columns().iter().enumerate() {
            put(&format!("margin_column.{}", j + 1), join(c));
        }
    }
    writeln!(out, "{MAGIC} {VERSION}").map_err(io_err)?;
    for (k, v) in lines {
        writeln!(out, "{k} = {v}").map_err(io_err)?;
    }
    Ok(())
}

struct Fields {
    map: BTreeMap<String, (usize, String)>,
}

impl Fields {
    fn take(&mut self, key: &str) -> Result<String> {
        self.map
            .remove(key)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::Format(format!("missing key {key:?}")))
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.take(key)?;
        v.parse()
            .map_err(|_| Error::Format(format!("cannot parse {key} = {v:?}")))
    }

    fn vec<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let v = self.take(key)?;
        v.split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Format(format!("cannot parse entry {t:?} of {key}")))
            })
            .collect()
    }

    fn finish(self) -> Result<()> {
        match self.map.into_iter().min_by_key(|(_, (line, _))| *line) {
            None => Ok(()),
            Some((k, (line, _))) => Err(Error::Format(format!("line {line}: unknown key {k:?}"))),
        }
    }
}

fn parse_norm(f: &mut Fields) -> Result<NormSpec> {
    f.take("norm")?
        .parse()
        .map_err(|e: Error| Error::Format(e.to_string()))
}

fn parse_std(f: &mut Fields) -> Result<Standardization> {
    f.take("standardization")?
        .parse()
        .map_err(|e: Error| Error::Format(e.to_string()))
}

pub fn read_model<R: BufRead>(input: R) -> Result<ModelFile> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(io_err)?
        .ok_or_else(|| Error::Format("empty model file".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(Error::Format("not a model file".into()));
    }
    match parts.next().map(str::parse::<u32>) {
        Some(Ok(VERSION)) => {}
        other => {
            return Err(Error::Format(format!(
                "unsupported model file version {:?}",
                other.and_then(|r| r.ok())
            )))
        }
    }
    let mut map = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err)?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {lineno}: expected key = value")))?;
        let k = k.trim().to_string();
        if map
            .insert(k.clone(), (lineno, v.trim().to_string()))
            .is_some()
        {
            return Err(Error::Format(format!("line {lineno}: duplicate key {k:?}")));
        }
    }
    let mut f = Fields { map };
    let kind = f.take("kind")?;
    let model = match kind.as_str() {
        "mvset" => {
            let grid = build_grid(f.parse("d")?, f.parse("m")?)?;
            let score: AngularScore = f
                .take("score")?
                .parse()
                .map_err(|e: Error| Error::Format(e.to_string()))?;
            let m = MvSetModel {
                grid,
                alpha: f.parse("alpha")?,
                psi: f.parse("psi")?,
                achieved_mass: f.parse("achieved_mass")?,
                k: f.parse("k")?,
                norm_spec: parse_norm(&mut f)?,
                standardization: parse_std(&mut f)?,
                score,
                selected_cells: f.vec("selected_cells")?,
                cell_masses: f.vec("cell_masses")?,
            };
            if m.cell_masses.len() != grid.n_cells()
                || m.selected_cells.iter().any(|&c| c >= grid.n_cells())
            {
                return Err(Error::Format("cell data does not match the grid".into()));
            }
            SavedModel::MvSet(m)
        }
        "xlasso" => SavedModel::Linear(AngularLinearModel {
            lambda: f.parse("lambda")?,
            k: f.parse("k")?,
            norm_spec: parse_norm(&mut f)?,
            standardization: parse_std(&mut f)?,
            iterations: f.parse("iterations")?,
            converged: f.parse("converged")?,
            objective: f.parse("objective")?,
            beta: f.vec("beta")?,
        }),
        "classifier" => {
            let value: f64 = f.parse("mode_value")?;
            let mode = match f.take("mode")?.as_str() {
                "lagrangian" => ClassifierMode::Lagrangian(value),
                "constrained" => ClassifierMode::Constrained(value),
                other => return Err(Error::Format(format!("unknown classifier mode {other:?}"))),
            };
            SavedModel::Classifier(AngularClassifier {
                mode,
                k: f.parse("k")?,
                norm_spec: parse_norm(&mut f)?,
                standardization: parse_std(&mut f)?,
                iterations: f.parse("iterations")?,
                converged: f.parse("converged")?,
                objective: f.parse("objective")?,
                single_class: f.parse("single_class")?,
                beta: f.vec("beta")?,
            })
        }
        other => return Err(Error::Format(format!("unknown model kind {other:?}"))),
    };
    let margin_spec = match f.map.contains_key("margin_spec") {
        true => Some(f.take("margin_spec")?),
        false => None,
    };
    let mut columns = Vec::new();
    while f
        .map
        .contains_key(&format!("margin_column.{}", columns.len() + 1))
    {
        let key = format!("margin_column.{}", columns.len() + 1);
        columns.push(f.vec::<f64>(&key)?);
    }
    let rank_margins = if columns.is_empty() {
        None
    } else {
        Some(MarginalModel::from_sorted_columns(columns)?)
    };
    f.finish()?;
    Ok(ModelFile {
        model,
        rank_margins,
        margin_spec,
    })
}

pub fn save_model(path: &Path, file: &ModelFile) -> Result<()> {
    let mut buf = Vec::new();
    write_model(&mut buf, file)?;
    std::fs::write(path, buf).map_err(|e| Error::Format(format!("writing {}: {e}", path.display())))
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::Format(format!("reading {}: {e}", path.display())))?;
    read_model(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anomaly::angular_mvset;
    use crate::data::Dataset;
    use crate::transforms::fit_margins;

    fn round_trip(file: &ModelFile) -> ModelFile {
        let mut buf = Vec::new();
        write_model(&mut buf, file).unwrap();
        read_model(&buf[..]).unwrap()
    }

    fn linear() -> AngularLinearModel {
        AngularLinearModel {
            beta: vec![0.1, -1.0 / 3.0, 0.0, 1e-300, f64::MIN_POSITIVE],
            lambda: 0.123456789012345,
            k: 40,
            norm_spec: NormSpec::L2,
            standardization: Standardization::None,
            iterations: 17,
            converged: true,
            objective: std::f64::consts::PI,
        }
    }

    #[test]
    fn linear_round_trip_is_exact() {
        let f = ModelFile::new(SavedModel::Linear(linear()));
        let g = round_trip(&f);
        assert_eq!(f, g);
        if let SavedModel::Linear(m) = g.model {
            for (a, b) in m.beta.iter().zip(linear().beta) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn classifier_round_trip() {
        let m = AngularClassifier {
            beta: vec![0.5, -0.25],
            mode: ClassifierMode::Constrained(0.75),
            k: 10,
            norm_spec: NormSpec::LINF,
            standardization: Standardization::KnownPareto,
            converged: false,
            iterations: 20000,
            objective: std::f64::consts::LN_2,
            single_class: false,
        };
        let mut f = ModelFile::new(SavedModel::Classifier(m));
        f.margin_spec = Some("unit-frechet".into());
        assert_eq!(f, round_trip(&f));
    }

    #[test]
    fn mvset_with_margins_round_trip() {
        let rows: Vec<Vec<f64>> = (1..=40)
            .map(|i| vec![i as f64, (i * 7 % 40) as f64 + 0.5])
            .collect();
        let data = Dataset::from_rows(&rows).unwrap();
        let grid = build_grid(2, 3).unwrap();
        let model = angular_mvset(&data, 10, 0.8, 0.0, &grid).unwrap();
        let mut f = ModelFile::new(SavedModel::MvSet(model));
        f.rank_margins = Some(fit_margins(&data).unwrap());
        assert_eq!(f, round_trip(&f));
    }

    #[test]
    fn rejects_bad_files() {
        let mut buf = Vec::new();
        write_model(&mut buf, &ModelFile::new(SavedModel::Linear(linear()))).unwrap();
        let text = String::from_utf8(buf).unwrap();

        let extra = format!("{text}colour = red\n");
        let err = read_model(extra.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("unknown key"), "{err}");

        let missing = text.replace("lambda = 0.123456789012345\n", "");
        assert!(read_model(missing.as_bytes()).is_err());

        let version = text.replacen("evlearn-model 1", "evlearn-model 9", 1);
        assert!(read_model(version.as_bytes()).is_err());

        assert!(read_model("".as_bytes()).is_err());
        assert!(read_model("something else\n".as_bytes()).is_err());

        let dup = format!("{text}k = 3\n");
        assert!(read_model(dup.as_bytes()).is_err());
    }
}
