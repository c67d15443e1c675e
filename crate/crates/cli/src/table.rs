//! CSV input and output.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use evlearn::Dataset;

/// Which columns of a CSV file are not covariates.
#[derive(Clone, Debug, Default)]
pub struct Columns<'a> {
    pub target: Option<&'a str>,
    pub label: Option<&'a str>,
}

/// Reads a numeric CSV file with a header row.
///
/// Data rows are numbered from 1. The declared target and label columns
/// are removed from the covariates.
pub fn ingest_csv(path: &Path, cols: &Columns) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let header: Vec<String> = rdr
        .headers()
        .with_context(|| format!("cannot read header of {}", path.display()))?
        .iter()
        .map(str::to_string)
        .collect();
    let width = header.len();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("no column named {name:?}"))
    };
    let target = cols.target.map(find).transpose()?;
    let label = cols.label.map(find).transpose()?;
    if target.is_some() && target == label {
        bail!("target and label cannot be the same column");
    }
    let covariates: Vec<usize> = (0..width)
        .filter(|&j| Some(j) != target && Some(j) != label)
        .collect();
    if covariates.is_empty() {
        bail!("no covariate columns");
    }

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.with_context(|| format!("row {row}: malformed record"))?;
        if rec.len() != width {
            bail!("row {row}: expected {width} fields, found {}", rec.len());
        }
        let cell = |j: usize| -> Result<f64> {
            let s = &rec[j];
            s.parse::<f64>()
                .map_err(|_| anyhow!("row {row}, column {:?}: cannot parse {s:?}", header[j]))
        };
        for &j in &covariates {
            x.push(cell(j)?);
        }
        if let Some(j) = target {
            y.push(cell(j)?);
        }
        if let Some(j) = label {
            labels.push(cell(j)?);
        }
        n += 1;
    }
    if n == 0 {
        bail!("{}: no data rows", path.display());
    }
    let names = covariates.iter().map(|&j| header[j].clone()).collect();
    let mut ds = Dataset::new(n, covariates.len(), x)?.with_names(names)?;
    if target.is_some() {
        ds = ds.with_targets(y)?;
    }
    if label.is_some() {
        ds = ds.with_label_values(&labels)?;
    }
    Ok(ds)
}

/// In-memory CSV writer with `\n` line endings.
pub struct CsvOut {
    w: csv::Writer<Vec<u8>>,
}

impl CsvOut {
    pub fn new() -> Self {
        CsvOut {
            w: csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new()),
        }
    }

    pub fn row<I, T>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.w.write_record(fields)?;
        Ok(())
    }

    pub fn into_bytes(self) -> Result<Vec<u8>> {
        self.w
            .into_inner()
            .map_err(|e| anyhow!("flushing CSV output: {}", e.error()))
    }
}

impl Default for CsvOut {
    fn default() -> Self {
        CsvOut::new()
    }
}

/// Writes a dataset with columns `x1..xd` (or its names), then `y` or
/// `label` when present.
pub fn dataset_csv(ds: &Dataset) -> Result<Vec<u8>> {
    let mut out = CsvOut::new();
    let mut header: Vec<String> = if ds.names().len() == ds.d() {
        ds.names().to_vec()
    } else {
        (1..=ds.d()).map(|j| format!("x{j}")).collect()
    };
    if ds.targets().is_some() {
        header.push("y".into());
    }
    if ds.labels().is_some() {
        header.push("label".into());
    }
    out.row(&header)?;
    for (i, row) in ds.rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(t) = ds.targets() {
            rec.push(t[i].to_string());
        }
        if let Some(l) = ds.labels() {
            rec.push(l[i].to_string());
        }
        out.row(&rec)?;
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn well_formed() {
        let f = file("a,b\n1,2\n3,4\n5,6\n");
        let ds = ingest_csv(f.path(), &Columns::default()).unwrap();
        assert_eq!((ds.n(), ds.d()), (3, 2));
        assert_eq!(ds.row(2), [5.0, 6.0]);
    }

    #[test]
    fn ragged_and_empty() {
        let f = file("a,b\n1,2\n3\n5,6\n");
        let e = ingest_csv(f.path(), &Columns::default()).unwrap_err();
        assert!(e.to_string().contains("row 2: expected 2 fields"), "{e}");
        let f = file("a,b\n");
        let e = ingest_csv(f.path(), &Columns::default()).unwrap_err();
        assert!(e.to_string().contains("no data rows"), "{e}");
    }

    #[test]
    fn named_columns() {
        let f = file("x1,y,x2,lab\n1,10,2,1\n3,20,4,-1\n");
        let cols = Columns {
            target: Some("y"),
            label: Some("lab"),
        };
        let ds = ingest_csv(f.path(), &cols).unwrap();
        assert_eq!(ds.d(), 2);
        assert_eq!(ds.names(), ["x1", "x2"]);
        assert_eq!(ds.targets().unwrap(), [10.0, 20.0]);
        assert_eq!(ds.labels().unwrap(), [1, -1]);

        let e = ingest_csv(
            f.path(),
            &Columns {
                target: Some("Y"),
                label: None,
            },
        )
        .unwrap_err();
        assert!(e.to_string().contains("no column named"), "{e}");
        let f = file("a,b\n1,zz\n");
        let e = ingest_csv(f.path(), &Columns::default()).unwrap_err();
        assert!(e.to_string().contains("row 1, column \"b\""), "{e}");
    }

    #[test]
    fn dataset_round_trip_uses_lf() {
        let ds = Dataset::from_rows(&[vec![0.1, 2.0], vec![3.0, 1e-300]])
            .unwrap()
            .with_targets(vec![1.5, -2.0])
            .unwrap();
        let bytes = dataset_csv(&ds).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(!text.contains('\r'));
        assert!(text.starts_with("x1,x2,y\n"));
        let f = file(&text);
        let back = ingest_csv(
            f.path(),
            &Columns {
                target: Some("y"),
                label: None,
            },
        )
        .unwrap();
        assert_eq!(back.values(), ds.values());
        assert_eq!(back.targets(), ds.targets());
    }
}
