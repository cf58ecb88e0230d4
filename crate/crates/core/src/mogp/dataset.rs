use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a dataset came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
}

/// Domain points `X` (n_x × n_d) with every fidelity observed at every row.
/// Column `k` of `Y` holds fidelity `k`; fidelity 0 is the ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetRepr", into = "DatasetRepr")]
pub struct FidelityDataset {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    labels: Vec<String>,
    provenance: Option<Provenance>,
}

impl FidelityDataset {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidDataset(m));
        if x.nrows() < 2 {
            return bad(format!("need at least 2 points, got {}", x.nrows()));
        }
        if x.ncols() == 0 {
            return bad("points have no dimensions".into());
        }
        if y.nrows() != x.nrows() {
            return bad(format!("X has {} rows but Y has {}", x.nrows(), y.nrows()));
        }
        if y.ncols() == 0 {
            return bad("no fidelities".into());
        }
        if labels.len() != y.ncols() {
            return bad(format!("{} labels for {} fidelities", labels.len(), y.ncols()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return bad(format!("duplicate fidelity label `{l}`"));
            }
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return bad(format!("non-finite coordinate at point {}", i % x.nrows()));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return bad(format!(
                "non-finite target for fidelity {} at point {}",
                i / y.nrows(),
                i % y.nrows()
            ));
        }
        Ok(FidelityDataset {
            x,
            y,
            labels,
            provenance: None,
        })
    }

    /// Labels `f0, f1, ...`.
    pub fn with_default_labels(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        let labels = (0..y.ncols()).map(|k| format!("f{k}")).collect();
        Self::new(x, y, labels)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn n_points(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_dims(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_fidelities(&self) -> usize {
        self.y.ncols()
    }

    pub fn fidelity(&self, k: usize) -> &[f64] {
        let n = self.y.nrows();
        &self.y.as_slice()[k * n..(k + 1) * n]
    }

    /// Per-dimension (min, max) of the points.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        (0..self.n_dims())
            .map(|d| {
                let c = self.x.column(d);
                (c.min(), c.max())
            })
            .collect()
    }

    /// Uncentered per-fidelity second moments, used to scale initial guesses.
    pub(crate) fn second_moments(&self) -> Vec<f64> {
        (0..self.n_fidelities())
            .map(|k| {
                let f = self.fidelity(k);
                f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetRepr {
    labels: Vec<String>,
    /// One entry per point.
    x: Vec<Vec<f64>>,
    /// One entry per fidelity.
    y: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

impl From<FidelityDataset> for DatasetRepr {
    fn from(d: FidelityDataset) -> Self {
        DatasetRepr {
            x: d.x.row_iter().map(|r| r.iter().copied().collect()).collect(),
            y: d.y.column_iter().map(|c| c.iter().copied().collect()).collect(),
            labels: d.labels,
            provenance: d.provenance,
        }
    }
}

impl TryFrom<DatasetRepr> for FidelityDataset {
    type Error = Error;

    fn try_from(r: DatasetRepr) -> Result<Self> {
        let n = r.x.len();
        let d = r.x.first().map_or(0, Vec::len);
        if r.x.iter().any(|p| p.len() != d) {
            return Err(Error::InvalidDataset("ragged point list".into()));
        }
        if r.y.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidDataset("fidelity column length mismatch".into()));
        }
        let x = DMatrix::from_fn(n, d, |i, j| r.x[i][j]);
        let y = DMatrix::from_fn(n, r.y.len(), |i, k| r.y[k][i]);
        let mut ds = FidelityDataset::new(x, y, r.labels)?;
        ds.provenance = r.provenance;
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let y = DMatrix::from_row_slice(2, 1, &[0.0, f64::NAN]);
        assert!(FidelityDataset::with_default_labels(x, y).is_err());
    }

    #[test]
    fn rejects_single_point() {
        let x = DMatrix::from_row_slice(1, 1, &[0.0]);
        let y = DMatrix::from_row_slice(1, 1, &[0.0]);
        assert!(FidelityDataset::with_default_labels(x, y).is_err());
    }

    #[test]
    fn rejects_duplicate_labels() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let y = DMatrix::zeros(2, 2);
        assert!(FidelityDataset::new(x, y, vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.1, 0.5, 0.2, 1.0, 0.3]);
        let y = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.5]);
        let d = FidelityDataset::with_default_labels(x, y).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        let back: FidelityDataset = serde_json::from_str(&s).unwrap();
        assert_eq!(d, back);
        assert_eq!(back.fidelity(1), &[2.0, 4.0, 6.5]);
    }
}
