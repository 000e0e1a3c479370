//! CSV ingestion and export, plus run manifests.
//!
//! Floating point values are written with 17 significant digits so that
//! they parse back to the same `f64`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boosting::GridPoint;
use crate::classify::{LabeledDataset, SplitOutcome, SplitReport};
use crate::data::RawSamples;
use crate::error::{Error, Result};
use crate::sim::SweepResult;

/// `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(field: &str, row: usize) -> Result<f64> {
    let t = field.trim();
    let v: f64 = t.parse().map_err(|_| Error::InvalidRow {
        row,
        message: format!("{t:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::InvalidRow {
            row,
            message: format!("{t:?} is not finite"),
        });
    }
    Ok(v)
}

/// Reads the first column of a CSV. A first row that does not parse as a
/// number is taken as a header; rows are numbered from 1 counting it.
pub fn read_samples<R: Read>(reader: R) -> Result<RawSamples> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = rec.get(0).unwrap_or("");
        if field.is_empty() && rec.len() <= 1 {
            continue;
        }
        match parse_f64(field, i + 1) {
            Ok(v) => values.push(v),
            Err(_) if i == 0 && field.parse::<f64>().is_err() => {}
            Err(e) => return Err(e),
        }
    }
    if values.is_empty() {
        return Err(Error::InvalidInput("no numeric samples found".into()));
    }
    RawSamples::new(values)
}

pub fn read_samples_file(path: impl AsRef<Path>) -> Result<RawSamples> {
    read_samples(std::fs::File::open(path)?)
}

/// Reads a headed CSV with a numeric feature column and a 0/1 label column.
pub fn read_labeled<R: Read>(reader: R, feature: &str, label: &str) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim_matches('"') == name)
            .ok_or_else(|| Error::InvalidInput(format!("no column named {name:?}")))
    };
    let (fc, lc) = (col(feature)?, col(label)?);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let x = parse_f64(rec.get(fc).unwrap_or(""), row)?;
        let y = parse_f64(rec.get(lc).unwrap_or(""), row)?;
        if y != 0.0 && y != 1.0 {
            return Err(Error::InvalidRow {
                row,
                message: format!("label {y} is not 0 or 1"),
            });
        }
        xs.push(x);
        ys.push(y as u8);
    }
    LabeledDataset::new(xs, ys)
}

pub fn read_labeled_file(path: impl AsRef<Path>, feature: &str, label: &str) -> Result<LabeledDataset> {
    read_labeled(std::fs::File::open(path)?, feature, label)
}

pub fn write_samples<W: Write>(samples: &RawSamples, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x"])?;
    for v in samples.values() {
        w.write_record([fmt_f64(*v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_labeled<W: Write>(data: &LabeledDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "label"])?;
    for (x, y) in data.features().iter().zip(data.labels()) {
        w.write_record([fmt_f64(*x), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_density_grid<W: Write>(grid: &[GridPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "f", "density"])?;
    for p in grid {
        w.write_record([fmt_f64(p.x), fmt_f64(p.f), fmt_f64(p.density)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_cells<W: Write>(res: &SweepResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["beta", "M", "replicate", "seed", "kl", "truncated_mass"])?;
    for c in &res.cells {
        w.write_record([
            fmt_f64(c.beta),
            c.m.to_string(),
            c.replicate.to_string(),
            c.seed.to_string(),
            fmt_f64(c.kl),
            fmt_f64(c.truncated_mass),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_summary<W: Write>(res: &SweepResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["beta", "M", "count", "mean_kl", "sd_kl"])?;
    for a in &res.aggregates {
        w.write_record([
            fmt_f64(a.beta),
            a.m.to_string(),
            a.count.to_string(),
            fmt_f64(a.mean),
            fmt_f64(a.sd),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_splits<W: Write>(report: &SplitReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["split", "seed", "status", "train_error", "test_error", "reason"])?;
    for o in &report.outcomes {
        match o {
            SplitOutcome::Completed {
                split,
                seed,
                train_error,
                test_error,
            } => w.write_record([
                split.to_string(),
                seed.to_string(),
                "completed".into(),
                fmt_f64(*train_error),
                fmt_f64(*test_error),
                String::new(),
            ])?,
            SplitOutcome::Skipped { split, seed, reason } => w.write_record([
                split.to_string(),
                seed.to_string(),
                "skipped".into(),
                String::new(),
                String::new(),
                reason.clone(),
            ])?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Record of one command-line run, sufficient to repeat it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Full argument vector, program name excluded.
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub version: String,
    /// Input path to hex SHA-256 digest.
    pub input_digests: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(
            std::fs::File::open(path)?,
        ))?)
    }

    /// Inputs whose current digest differs from the recorded one.
    pub fn changed_inputs(&self) -> Result<Vec<String>> {
        let mut changed = Vec::new();
        for (path, digest) in &self.input_digests {
            if &sha256_file(path)? != digest {
                changed.push(path.clone());
            }
        }
        Ok(changed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_optional() {
        let a = read_samples("x\n1.5\n2\n-3e-1\n".as_bytes()).unwrap();
        let b = read_samples("1.5\n2\n-3e-1\n".as_bytes()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values(), &[1.5, 2.0, -0.3]);
    }

    #[test]
    fn bad_row_is_reported() {
        match read_samples("x\n1\nabc\n".as_bytes()) {
            Err(Error::InvalidRow { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
        assert!(read_samples("x\n1\nNaN\n".as_bytes()).is_err());
        assert!(read_samples("x\n".as_bytes()).is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let v = vec![0.1, 1.0 / 3.0, -2.5e-300, 1e300, std::f64::consts::PI];
        let s = RawSamples::new(v).unwrap();
        let mut buf = Vec::new();
        write_samples(&s, &mut buf).unwrap();
        assert_eq!(read_samples(&buf[..]).unwrap(), s);
    }

    #[test]
    fn labeled_by_column_name() {
        let text = "\"row.names\",sbp,age,chd\n1,160,52,1\n2,144,63,0\n3,118,46,0\n";
        let d = read_labeled(text.as_bytes(), "age", "chd").unwrap();
        assert_eq!(d.features(), &[52.0, 63.0, 46.0]);
        assert_eq!(d.labels(), &[1, 0, 0]);
        assert!(read_labeled(text.as_bytes(), "ldl", "chd").is_err());
        assert!(read_labeled("age,chd\n1,2\n".as_bytes(), "age", "chd").is_err());
    }
}
