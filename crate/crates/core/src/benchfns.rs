//! Analytic multi-fidelity function pairs and grid dataset builders.
//!
//! * `liu`: one-dimensional pair on `[0, 1]`.
//!   High fidelity `f_h(x) = (6x − 2)² sin(12x − 4)`,
//!   low fidelity `f_l(x) = 0.5 f_h(x) + 10(x − 0.5) − 5`.
//! * `currin`: two-dimensional pair on `[0, 1]²`.
//!   High fidelity
//!   `f_h(x) = [1 − exp(−1/(2x₂))] (2300x₁³ + 1900x₁² + 2092x₁ + 60) / (100x₁³ + 500x₁² + 4x₁ + 20)`,
//!   low fidelity is the average of `f_h` at the four corners `(x₁ ± 0.05, x₂ ± 0.05)`
//!   with `x₂ − 0.05` floored at zero.
//!
//! Fidelity 0 of every generated dataset is the high fidelity (ground truth).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mogp::{FidelityDataset, Provenance};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fidelity {
    Low,
    High,
}

/// A high/low fidelity function pair on a box domain.
#[derive(Clone, Copy)]
pub struct BenchmarkPair {
    pub name: &'static str,
    pub domain: &'static [(f64, f64)],
    pub description: &'static str,
    high: fn(&[f64]) -> f64,
    low: fn(&[f64]) -> f64,
}

impl std::fmt::Debug for BenchmarkPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchmarkPair")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .finish()
    }
}

fn liu_high(x: &[f64]) -> f64 {
    let t = x[0];
    (6.0 * t - 2.0).powi(2) * (12.0 * t - 4.0).sin()
}

fn liu_low(x: &[f64]) -> f64 {
    0.5 * liu_high(x) + 10.0 * (x[0] - 0.5) - 5.0
}

fn currin_high(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    // x2 = 0 gives exp(-inf) = 0
    let factor = 1.0 - (-1.0 / (2.0 * x2)).exp();
    let num = 2300.0 * x1.powi(3) + 1900.0 * x1 * x1 + 2092.0 * x1 + 60.0;
    let den = 100.0 * x1.powi(3) + 500.0 * x1 * x1 + 4.0 * x1 + 20.0;
    factor * num / den
}

fn currin_low(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let up = x2 + 0.05;
    let down = (x2 - 0.05).max(0.0);
    0.25 * (currin_high(&[x1 + 0.05, up]) + currin_high(&[x1 + 0.05, down]))
        + 0.25 * (currin_high(&[x1 - 0.05, up]) + currin_high(&[x1 - 0.05, down]))
}

pub const LIU: BenchmarkPair = BenchmarkPair {
    name: "liu",
    domain: &[(0.0, 1.0)],
    description: "1-D Forrester function and its linear low-fidelity variant",
    high: liu_high,
    low: liu_low,
};

pub const CURRIN: BenchmarkPair = BenchmarkPair {
    name: "currin",
    domain: &[(0.0, 1.0), (0.0, 1.0)],
    description: "2-D Currin exponential function and its four-point averaged low fidelity",
    high: currin_high,
    low: currin_low,
};

pub const REGISTRY: &[BenchmarkPair] = &[LIU, CURRIN];

pub fn lookup(name: &str) -> Result<BenchmarkPair> {
    REGISTRY
        .iter()
        .find(|p| p.name.eq_ignore_ascii_case(name))
        .copied()
        .ok_or_else(|| Error::UnknownBenchmark(name.to_string()))
}

impl BenchmarkPair {
    pub fn input_dim(&self) -> usize {
        self.domain.len()
    }

    /// Evaluates one fidelity on every row of `x`.
    pub fn evaluate(&self, fidelity: Fidelity, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::InputShape(format!(
                "{} expects {} input dimensions, got {}",
                self.name,
                self.input_dim(),
                x.ncols()
            )));
        }
        let f = match fidelity {
            Fidelity::High => self.high,
            Fidelity::Low => self.low,
        };
        let mut point = vec![0.0; x.ncols()];
        (0..x.nrows())
            .map(|i| {
                for (d, (lo, hi)) in self.domain.iter().enumerate() {
                    let v = x[(i, d)];
                    if !(v >= *lo && v <= *hi) {
                        return Err(Error::Domain { row: i });
                    }
                    point[d] = v;
                }
                Ok(f(&point))
            })
            .collect()
    }

    /// Uniform tensor grid with `points_per_dim` points per dimension, in
    /// lexicographic order (first dimension slowest), with both fidelities.
    pub fn grid(&self, points_per_dim: usize) -> Result<FidelityDataset> {
        if points_per_dim < 2 {
            return Err(Error::InputShape(format!(
                "grid needs at least 2 points per dimension, got {points_per_dim}"
            )));
        }
        let d = self.input_dim();
        let n = points_per_dim.pow(d as u32);
        let axis = |dim: usize, k: usize| {
            let (lo, hi) = self.domain[dim];
            if k + 1 == points_per_dim {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (points_per_dim - 1) as f64
            }
        };
        let x = DMatrix::from_fn(n, d, |row, dim| {
            let stride = points_per_dim.pow((d - 1 - dim) as u32);
            axis(dim, (row / stride) % points_per_dim)
        });
        let high = self.evaluate(Fidelity::High, &x)?;
        let low = self.evaluate(Fidelity::Low, &x)?;
        let y = DMatrix::from_fn(n, 2, |i, k| if k == 0 { high[i] } else { low[i] });
        Ok(
            FidelityDataset::new(x, y, vec!["high".into(), "low".into()])?.with_provenance(
                Provenance {
                    source: None,
                    generator: Some(format!("{}:{points_per_dim}", self.name)),
                },
            ),
        )
    }
}
