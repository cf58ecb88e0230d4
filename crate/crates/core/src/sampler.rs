//! Synthetic fidelity samples with exactly prescribed Pearson correlations.
//!
//! A posterior sample of the synthetic task is a linear combination `s = Y′c`
//! of the existing fidelity columns and one draw from the intra-fidelity
//! prior. Requested correlations are turned into covariances with a heuristic
//! sample variance, and `c` then solves `(Ỹ′ᵀỸ′/n) c = σ_s` on the centred basis.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corrbounds::{BoundsSession, CorrelationSpec};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mogp::MogpModel;

/// Condition number above which the basis covariance is refused.
pub const MAX_CONDITION: f64 = 1e12;

/// How the prior basis vector is produced from white noise `r`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorDraw {
    /// `K_c r`, then rescaled.
    #[default]
    Matrix,
    /// `L r` with `K_c = L Lᵀ`, a draw with the prior's exact law, then rescaled.
    Cholesky,
}

/// The `n_t + 1` basis columns and their second-order statistics.
#[derive(Clone, Debug)]
pub struct SampleBasis {
    columns: DMatrix<f64>,
    centered: DMatrix<f64>,
    means: Vec<f64>,
    covariance: DMatrix<f64>,
    std: Vec<f64>,
    correlation: DMatrix<f64>,
    noise: Option<DVector<f64>>,
    seed: Option<u64>,
}

/// Requested correlations converted into covariance targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceTargets {
    pub correlations: Vec<f64>,
    pub weights: Vec<f64>,
    pub heuristic_variance: f64,
    pub covariances: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeuristicVariance {
    pub weights: Vec<f64>,
    pub variance: f64,
}

/// A generated fidelity and everything needed to audit it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSample {
    pub values: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub requested: Vec<f64>,
    pub achieved: Vec<f64>,
    pub weights: Vec<f64>,
    pub heuristic_variance: f64,
    pub realized_variance: f64,
    /// `Σ_T c[..n_t]`: task covariances implied by the coefficients.
    pub implied_task_cross: Vec<f64>,
    pub seed: Option<u64>,
}

impl SampleBasis {
    /// Builds a basis from explicit columns (the last one plays the role of
    /// the prior draw).
    pub fn from_columns(columns: DMatrix<f64>) -> Result<Self> {
        let n = columns.nrows();
        let m = columns.ncols();
        if n < 2 || m == 0 {
            return Err(Error::InputShape(format!("basis of shape {n}×{m}")));
        }
        let mut centered = columns.clone();
        let mut means = Vec::with_capacity(m);
        for k in 0..m {
            let mean = columns.column(k).mean();
            centered.column_mut(k).add_scalar_mut(-mean);
            means.push(mean);
        }
        let covariance = centered.transpose() * &centered / n as f64;
        let std: Vec<f64> = covariance.diagonal().iter().map(|v| v.sqrt()).collect();
        for (k, s) in std.iter().enumerate() {
            let scale = columns.column(k).amax().max(f64::MIN_POSITIVE);
            if !(*s > 1e-12 * scale) {
                return Err(Error::DegenerateFidelity { index: k });
            }
        }
        let mut correlation =
            DMatrix::from_fn(m, m, |i, j| covariance[(i, j)] / (std[i] * std[j]));
        for i in 0..m {
            correlation[(i, i)] = 1.0;
            for j in 0..i {
                let v = correlation[(i, j)].clamp(-1.0, 1.0);
                correlation[(i, j)] = v;
                correlation[(j, i)] = v;
            }
        }
        Ok(SampleBasis {
            columns,
            centered,
            means,
            covariance,
            std,
            correlation,
            noise: None,
            seed: None,
        })
    }

    /// Gram–Schmidt on the centred columns, in order, keeping each column's
    /// mean and standard deviation. The result has `C = I`.
    pub fn orthogonalized(&self) -> Result<Self> {
        let n = self.columns.nrows();
        let m = self.columns.ncols();
        let mut q: DMatrix<f64> = self.centered.clone();
        for k in 0..m {
            for j in 0..k {
                let qj = q.column(j).into_owned();
                let proj = q.column(k).dot(&qj) / qj.dot(&qj);
                q.column_mut(k).axpy(-proj, &qj, 1.0);
            }
            let norm = (q.column(k).norm_squared() / n as f64).sqrt();
            if !(norm > 0.0) {
                return Err(Error::DegenerateFidelity { index: k });
            }
            q.column_mut(k).scale_mut(self.std[k] / norm);
        }
        for k in 0..m {
            q.column_mut(k).add_scalar_mut(self.means[k]);
        }
        let mut out = SampleBasis::from_columns(q)?;
        out.noise = self.noise.clone();
        out.seed = self.seed;
        Ok(out)
    }

    /// `Y′`, n_x × (n_t + 1).
    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    /// `Ỹ′`, the column-centred basis.
    pub fn centered(&self) -> &DMatrix<f64> {
        &self.centered
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Population covariance `Ỹ′ᵀỸ′ / n`.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn std_devs(&self) -> &[f64] {
        &self.std
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.correlation
    }

    pub fn white_noise(&self) -> Option<&DVector<f64>> {
        self.noise.as_ref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Starts a correlation bounds session against this basis.
    pub fn bounds_session(&self) -> Result<BoundsSession> {
        BoundsSession::begin(&self.correlation)
    }
}

/// Assembles the basis: the model's fidelity data plus one prior draw
/// rescaled so its standard deviation is the mean of the fidelities'.
pub fn build_basis(model: &MogpModel, seed: u64, mode: PriorDraw) -> Result<SampleBasis> {
    let data = model.data();
    let n = data.n_points();
    let nt = data.n_fidelities();
    let mut stds = Vec::with_capacity(nt);
    for k in 0..nt {
        let s = linalg::std_dev(data.fidelity(k));
        let scale = data.fidelity(k).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(s > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::DegenerateFidelity { index: k });
        }
        stds.push(s);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let kc = model.core_covariance();
    let mut prior = match mode {
        PriorDraw::Matrix => &kc * &r,
        PriorDraw::Cholesky => linalg::cholesky_jittered(&kc)?.factor.l() * &r,
    };
    let prior_std = linalg::std_dev(prior.as_slice());
    if !(prior_std > 0.0) || !prior_std.is_finite() {
        return Err(Error::DegenerateFidelity { index: nt });
    }
    let target = stds.iter().sum::<f64>() / nt as f64;
    prior *= target / prior_std;

    let mut columns = DMatrix::zeros(n, nt + 1);
    columns.view_mut((0, 0), (n, nt)).copy_from(data.y());
    columns.set_column(nt, &prior);
    let mut basis = SampleBasis::from_columns(columns)?;
    basis.noise = Some(r);
    basis.seed = Some(seed);
    Ok(basis)
}

/// Heuristic variance for the synthetic sample.
///
/// Repeatedly picks the basis correlation row with the largest overlap
/// (in magnitude) with the remaining correlation vector, adds that overlap to
/// the selected basis's weight and removes the row's component from the
/// vector. The variance is the weighted sum of the basis variances. Ties
/// go to the lowest index.
pub fn heuristic_variance(basis: &SampleBasis, pc: &[f64]) -> Result<HeuristicVariance> {
    let c = basis.correlation();
    let m = c.nrows();
    if pc.len() != m {
        return Err(Error::InputShape(format!(
            "correlation vector has {} entries, basis has {m}",
            pc.len()
        )));
    }
    let mut p = DVector::from_column_slice(pc);
    let mut weights = vec![0.0; m];
    let mut previous: Option<DVector<f64>> = None;
    for _ in 0..m {
        if let Some(v) = &previous {
            let overlap = p.dot(v);
            p.axpy(-overlap, v, 1.0);
        }
        let overlaps = c * &p;
        let mut best = 0;
        for i in 1..m {
            if overlaps[i].abs() > overlaps[best].abs() {
                best = i;
            }
        }
        weights[best] += overlaps[best].abs();
        previous = Some(c.row(best).transpose());
    }
    let variance = weights
        .iter()
        .zip(basis.covariance().diagonal().iter())
        .map(|(w, v)| w * v)
        .sum();
    Ok(HeuristicVariance { weights, variance })
}

/// `σ_s,i = sqrt(σ_h) · std_i · P_c,i`.
pub fn covariance_targets(basis: &SampleBasis, pc: &[f64]) -> Result<CovarianceTargets> {
    let h = heuristic_variance(basis, pc)?;
    let root = h.variance.sqrt();
    let covariances = pc
        .iter()
        .zip(basis.std_devs())
        .map(|(p, s)| root * s * p)
        .collect();
    Ok(CovarianceTargets {
        correlations: pc.to_vec(),
        weights: h.weights,
        heuristic_variance: h.variance,
        covariances,
    })
}

/// Solves `(Ỹ′ᵀỸ′/n) c = σ_s` by Cholesky.
pub fn solve_coefficients(basis: &SampleBasis, targets: &[f64]) -> Result<DVector<f64>> {
    let cov = basis.covariance();
    if targets.len() != cov.nrows() {
        return Err(Error::InputShape(format!(
            "{} covariance targets for a basis of {}",
            targets.len(),
            cov.nrows()
        )));
    }
    let condition = linalg::condition_number(cov);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditionedBasis { condition });
    }
    let chol = cov
        .clone()
        .cholesky()
        .ok_or(Error::IllConditionedBasis { condition })?;
    Ok(chol.solve(&DVector::from_column_slice(targets)))
}

/// Draws a synthetic fidelity whose correlations to the basis columns are `spec`.
pub fn draw_with_basis(
    model: &MogpModel,
    basis: &SampleBasis,
    spec: &CorrelationSpec,
) -> Result<SyntheticSample> {
    let m = basis.len();
    if spec.values().len() != m
        || spec.reference().shape() != basis.correlation().shape()
        || (spec.reference() - basis.correlation()).amax() > 1e-12
    {
        return Err(Error::BasisMismatch);
    }
    let targets = covariance_targets(basis, spec.values())?;
    if !(targets.heuristic_variance > 0.0) {
        return Err(Error::ZeroSampleVariance(targets.heuristic_variance));
    }
    let c = solve_coefficients(basis, &targets.covariances)?;
    let s = basis.columns() * &c;
    let values: Vec<f64> = s.iter().copied().collect();
    let achieved = (0..m)
        .map(|k| linalg::pearson(&values, basis.columns().column(k).as_slice()))
        .collect();
    let nt = m - 1;
    let sigma = model.task().covariance();
    let implied = &sigma * c.rows(0, nt);
    Ok(SyntheticSample {
        realized_variance: linalg::variance(&values),
        values,
        coefficients: c.iter().copied().collect(),
        requested: spec.values().to_vec(),
        achieved,
        weights: targets.weights,
        heuristic_variance: targets.heuristic_variance,
        implied_task_cross: implied.iter().copied().collect(),
        seed: basis.seed(),
    })
}

/// Builds the basis for `seed` and draws from it.
pub fn draw(
    model: &MogpModel,
    spec: &CorrelationSpec,
    seed: u64,
    mode: PriorDraw,
) -> Result<SyntheticSample> {
    let basis = build_basis(model, seed, mode)?;
    draw_with_basis(model, &basis, spec)
}
