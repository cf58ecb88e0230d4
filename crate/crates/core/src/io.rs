//! Dataset CSV and model archive formats.
//!
//! Dataset CSV: header `x0,...,x{d-1},fidelity,y`, one row per
//! (point, fidelity) observation, fidelity a 0-based integer. Rows may come in
//! any order; every point must carry every fidelity exactly once. Writing is
//! canonical: fidelity-major, points in dataset order, floats with 17
//! significant digits.
//!
//! Model archive: pretty-printed JSON with a `schema_version` field, holding
//! the hyperparameters, task matrix, fit diagnostics and the training data.

use std::collections::HashMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{KernelHyperparams, TaskMatrix};
use crate::mogp::{FidelityDataset, FitConfig, FitDiagnostics, MogpModel, Provenance};

pub const SCHEMA_VERSION: u32 = 1;

/// Canonical float text: 17 significant digits, scientific notation.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_error(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_dataset_csv<R: Read>(reader: R, source: Option<&str>) -> Result<FidelityDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(parse_error(1, "empty file")),
        Some(r) => r.map_err(|e| parse_error(line_of(&e), e.to_string()))?,
    };
    let header_line = header.position().map_or(1, |p| p.line());
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 3 {
        return Err(parse_error(header_line, "header needs x0,...,fidelity,y"));
    }
    let d = cols.len() - 2;
    for (i, c) in cols[..d].iter().enumerate() {
        if *c != format!("x{i}") {
            return Err(parse_error(header_line, format!("expected column `x{i}`, found `{c}`")));
        }
    }
    if cols[d] != "fidelity" || cols[d + 1] != "y" {
        return Err(parse_error(header_line, "last two columns must be `fidelity,y`"));
    }

    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut obs: Vec<(usize, usize, f64, u64)> = Vec::new();
    let mut max_fid = 0usize;
    for rec in records {
        let rec = rec.map_err(|e| parse_error(line_of(&e), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != d + 2 {
            return Err(parse_error(line, format!("expected {} fields, found {}", d + 2, rec.len())));
        }
        let mut x = Vec::with_capacity(d);
        for i in 0..d {
            let v: f64 = rec[i]
                .parse()
                .map_err(|_| parse_error(line, format!("bad number `{}` in x{i}", &rec[i])))?;
            if !v.is_finite() {
                return Err(parse_error(line, format!("non-finite coordinate x{i}")));
            }
            x.push(v);
        }
        let fid: usize = rec[d]
            .parse()
            .map_err(|_| parse_error(line, format!("bad fidelity index `{}`", &rec[d])))?;
        let y: f64 = rec[d + 1]
            .parse()
            .map_err(|_| parse_error(line, format!("bad number `{}` in y", &rec[d + 1])))?;
        if !y.is_finite() {
            return Err(parse_error(line, "non-finite y"));
        }
        // -0.0 and 0.0 are the same point
        let key: Vec<u64> = x.iter().map(|v| (v + 0.0).to_bits()).collect();
        let next = points.len();
        let p = *index.entry(key).or_insert(next);
        if p == next {
            points.push(x);
        }
        max_fid = max_fid.max(fid);
        obs.push((p, fid, y, line));
    }
    if obs.is_empty() {
        return Err(parse_error(header_line + 1, "no observations"));
    }
    let n = points.len();
    let nt = max_fid + 1;
    let mut y: Vec<Option<f64>> = vec![None; n * nt];
    for (p, f, v, line) in obs {
        let slot = &mut y[f * n + p];
        if slot.is_some() {
            return Err(parse_error(line, format!("duplicate observation of fidelity {f} at point {p}")));
        }
        *slot = Some(v);
    }
    if let Some(missing) = y.iter().position(Option::is_none) {
        return Err(Error::InvalidDataset(format!(
            "block design violated: fidelity {} missing at point {}",
            missing / n,
            missing % n
        )));
    }
    let x = DMatrix::from_fn(n, d, |i, j| points[i][j]);
    let y = DMatrix::from_fn(n, nt, |i, k| y[k * n + i].unwrap());
    let ds = FidelityDataset::with_default_labels(x, y)?;
    Ok(match source {
        Some(s) => ds.with_provenance(Provenance {
            source: Some(s.to_string()),
            generator: None,
        }),
        None => ds,
    })
}

fn line_of(e: &csv::Error) -> u64 {
    e.position().map_or(0, |p| p.line())
}

pub fn write_dataset_csv<W: Write>(data: &FidelityDataset, mut out: W) -> Result<()> {
    let d = data.n_dims();
    let header: Vec<String> = (0..d)
        .map(|i| format!("x{i}"))
        .chain(["fidelity".to_string(), "y".to_string()])
        .collect();
    writeln!(out, "{}", header.join(","))?;
    let x = data.x();
    for k in 0..data.n_fidelities() {
        for (i, y) in data.fidelity(k).iter().enumerate() {
            for j in 0..d {
                write!(out, "{},", format_float(x[(i, j)]))?;
            }
            writeln!(out, "{k},{}", format_float(*y))?;
        }
    }
    Ok(())
}

pub fn dataset_to_csv_string(data: &FidelityDataset) -> String {
    let mut buf = Vec::new();
    write_dataset_csv(data, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

/// Wide-format table for external plotting: coordinates, every fidelity,
/// then every synthetic sample.
pub fn write_plot_data<W: Write>(
    data: &FidelityDataset,
    samples: &[Vec<f64>],
    mut out: W,
) -> Result<()> {
    let mut header: Vec<String> = (0..data.n_dims()).map(|i| format!("x{i}")).collect();
    header.extend(data.labels().iter().cloned());
    header.extend((0..samples.len()).map(|k| format!("synthetic_{k}")));
    writeln!(out, "{}", header.join(","))?;
    for i in 0..data.n_points() {
        let mut row: Vec<String> = (0..data.n_dims()).map(|j| format_float(data.x()[(i, j)])).collect();
        row.extend((0..data.n_fidelities()).map(|k| format_float(data.fidelity(k)[i])));
        row.extend(samples.iter().map(|s| format_float(s[i])));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct ModelArchive {
    pub schema_version: u32,
    pub hyperparams: KernelHyperparams,
    pub task: TaskMatrix,
    /// `Σ_T`, informational only; the factor in `task` is authoritative.
    pub task_covariance: Vec<Vec<f64>>,
    pub log_marginal_likelihood: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<FitDiagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_config: Option<FitConfig>,
    pub data: FidelityDataset,
}

pub fn model_to_json(model: &MogpModel, config: Option<&FitConfig>) -> Result<String> {
    let sigma = model.task().covariance();
    let archive = ModelArchive {
        schema_version: SCHEMA_VERSION,
        hyperparams: model.hyperparams().clone(),
        task: model.task().clone(),
        task_covariance: sigma.row_iter().map(|r| r.iter().copied().collect()).collect(),
        log_marginal_likelihood: model.log_marginal_likelihood(),
        diagnostics: model.diagnostics().cloned(),
        fit_config: config.cloned(),
        data: model.data().clone(),
    };
    let mut s = serde_json::to_string_pretty(&archive)?;
    s.push('\n');
    Ok(s)
}

pub fn model_from_json(text: &str) -> Result<MogpModel> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| parse_error(1, "archive has no schema_version"))?;
    if version != SCHEMA_VERSION as u64 {
        return Err(Error::Schema(version as u32));
    }
    let archive: ModelArchive = serde_json::from_value(value)?;
    MogpModel::new(archive.data, archive.hyperparams, archive.task, archive.diagnostics)
}
