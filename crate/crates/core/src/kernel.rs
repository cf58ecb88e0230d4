//! Intra-fidelity kernels and the coregionalization covariance `Σ_T ⊗ K_c`.
//!
//! Both kernels are stationary, so everything is written in terms of the lag
//! `τ = a - b`. Gradients are taken with respect to the natural logarithm of
//! each positive hyperparameter, in the order given by [`Kernel::log_params`].

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, JitteredCholesky};

const TWO_PI_SQ: f64 = 2.0 * PI * PI;

/// One component of a spectral mixture: a Gaussian in frequency space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    /// Mean frequency per input dimension, in cycles per domain unit.
    pub means: Vec<f64>,
    /// Frequency variance per input dimension.
    pub variances: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    Rbf {
        lengthscales: Vec<f64>,
        variance: f64,
    },
    SpectralMixture {
        components: Vec<MixtureComponent>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseVariance {
    Shared(f64),
    PerFidelity(Vec<f64>),
}

impl NoiseVariance {
    pub fn for_fidelity(&self, k: usize) -> f64 {
        match self {
            NoiseVariance::Shared(v) => *v,
            NoiseVariance::PerFidelity(v) => v[k],
        }
    }
}

/// Kernel hyperparameters θ plus the observation noise model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelHyperparams {
    pub kernel: Kernel,
    pub noise: NoiseVariance,
}

impl Kernel {
    pub fn rbf(lengthscales: Vec<f64>, variance: f64) -> Self {
        Kernel::Rbf {
            lengthscales,
            variance,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Kernel::Rbf { lengthscales, .. } => lengthscales.len(),
            Kernel::SpectralMixture { components } => {
                components.first().map_or(0, |c| c.means.len())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidHyperparams(msg));
        match self {
            Kernel::Rbf {
                lengthscales,
                variance,
            } => {
                if lengthscales.is_empty() {
                    return bad("RBF kernel needs at least one lengthscale".into());
                }
                if lengthscales.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                    return bad(format!("lengthscales must be positive: {lengthscales:?}"));
                }
                if !(variance.is_finite() && *variance > 0.0) {
                    return bad(format!("signal variance must be positive: {variance}"));
                }
            }
            Kernel::SpectralMixture { components } => {
                if components.is_empty() {
                    return bad("spectral mixture needs at least one component".into());
                }
                let d = components[0].means.len();
                if d == 0 {
                    return bad("spectral mixture components have no dimensions".into());
                }
                for (q, c) in components.iter().enumerate() {
                    if c.means.len() != d || c.variances.len() != d {
                        return bad(format!("component {q} has inconsistent dimension"));
                    }
                    if !(c.weight.is_finite() && c.weight > 0.0) {
                        return bad(format!("component {q} weight must be positive"));
                    }
                    if c.means.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
                        return bad(format!("component {q} means must be non-negative"));
                    }
                    if c.variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                        return bad(format!("component {q} variances must be positive"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Kernel value at zero lag.
    pub fn prior_variance(&self) -> f64 {
        match self {
            Kernel::Rbf { variance, .. } => *variance,
            Kernel::SpectralMixture { components } => components.iter().map(|c| c.weight).sum(),
        }
    }

    pub fn eval_lag(&self, tau: &[f64]) -> f64 {
        match self {
            Kernel::Rbf {
                lengthscales,
                variance,
            } => {
                let r2: f64 = tau
                    .iter()
                    .zip(lengthscales)
                    .map(|(t, l)| (t / l) * (t / l))
                    .sum();
                variance * (-0.5 * r2).exp()
            }
            Kernel::SpectralMixture { components } => components
                .iter()
                .map(|c| {
                    let mut e = 0.0;
                    let mut cos = 1.0;
                    for ((t, m), v) in tau.iter().zip(&c.means).zip(&c.variances) {
                        e += TWO_PI_SQ * t * t * v;
                        cos *= (2.0 * PI * t * m).cos();
                    }
                    c.weight * (-e).exp() * cos
                })
                .sum(),
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            Kernel::Rbf { lengthscales, .. } => lengthscales.len() + 1,
            Kernel::SpectralMixture { components } => {
                components.len() * (1 + 2 * components[0].means.len())
            }
        }
    }

    /// Log hyperparameters. RBF: `[ln ℓ_0.., ln s²]`; spectral mixture, per
    /// component: `[ln w, ln μ_0.., ln v_0..]`.
    pub fn log_params(&self) -> Vec<f64> {
        let ln = |v: f64| v.max(1e-300).ln();
        match self {
            Kernel::Rbf {
                lengthscales,
                variance,
            } => lengthscales
                .iter()
                .copied()
                .chain(std::iter::once(*variance))
                .map(ln)
                .collect(),
            Kernel::SpectralMixture { components } => components
                .iter()
                .flat_map(|c| {
                    std::iter::once(c.weight)
                        .chain(c.means.iter().copied())
                        .chain(c.variances.iter().copied())
                })
                .map(ln)
                .collect(),
        }
    }

    /// Same structure as `self` with parameters replaced by `exp(log_params)`.
    pub fn with_log_params(&self, p: &[f64]) -> Kernel {
        assert_eq!(p.len(), self.num_params());
        match self {
            Kernel::Rbf { lengthscales, .. } => {
                let d = lengthscales.len();
                Kernel::Rbf {
                    lengthscales: p[..d].iter().map(|v| v.exp()).collect(),
                    variance: p[d].exp(),
                }
            }
            Kernel::SpectralMixture { components } => {
                let d = components[0].means.len();
                let stride = 1 + 2 * d;
                Kernel::SpectralMixture {
                    components: p
                        .chunks(stride)
                        .map(|c| MixtureComponent {
                            weight: c[0].exp(),
                            means: c[1..1 + d].iter().map(|v| v.exp()).collect(),
                            variances: c[1 + d..].iter().map(|v| v.exp()).collect(),
                        })
                        .collect(),
                }
            }
        }
    }

    /// Kernel value at lag `tau`, writing ∂k/∂(log param) into `grad`.
    pub fn eval_lag_grad(&self, tau: &[f64], grad: &mut [f64]) -> f64 {
        match self {
            Kernel::Rbf {
                lengthscales,
                variance,
            } => {
                let d = lengthscales.len();
                let mut r2 = 0.0;
                for i in 0..d {
                    let s = tau[i] / lengthscales[i];
                    grad[i] = s * s;
                    r2 += s * s;
                }
                let k = variance * (-0.5 * r2).exp();
                for g in grad[..d].iter_mut() {
                    *g *= k;
                }
                grad[d] = k;
                k
            }
            Kernel::SpectralMixture { components } => {
                let d = tau.len();
                let stride = 1 + 2 * d;
                let mut total = 0.0;
                for (q, c) in components.iter().enumerate() {
                    let g = &mut grad[q * stride..(q + 1) * stride];
                    let mut e = 0.0;
                    for i in 0..d {
                        e += TWO_PI_SQ * tau[i] * tau[i] * c.variances[i];
                    }
                    let env = c.weight * (-e).exp();
                    let mut cos_prod = 1.0;
                    for i in 0..d {
                        cos_prod *= (2.0 * PI * tau[i] * c.means[i]).cos();
                    }
                    let term = env * cos_prod;
                    total += term;
                    g[0] = term;
                    for i in 0..d {
                        let arg = 2.0 * PI * tau[i] * c.means[i];
                        let others: f64 = (0..d)
                            .filter(|&j| j != i)
                            .map(|j| (2.0 * PI * tau[j] * c.means[j]).cos())
                            .product();
                        g[1 + i] = -env * others * arg.sin() * arg;
                        g[1 + d + i] = -term * TWO_PI_SQ * tau[i] * tau[i] * c.variances[i];
                    }
                }
                total
            }
        }
    }

    /// Cross-covariance between the rows of `a` (n × d) and `b` (m × d).
    pub fn eval_core(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let d = self.input_dim();
        if a.ncols() != d || b.ncols() != d {
            return Err(Error::InputShape(format!(
                "kernel expects {d} input dimensions, got {} and {}",
                a.ncols(),
                b.ncols()
            )));
        }
        let mut tau = vec![0.0; d];
        let mut out = DMatrix::zeros(a.nrows(), b.nrows());
        for j in 0..b.nrows() {
            for i in 0..a.nrows() {
                for k in 0..d {
                    tau[k] = a[(i, k)] - b[(j, k)];
                }
                out[(i, j)] = self.eval_lag(&tau);
            }
        }
        Ok(out)
    }

    /// Symmetric `K(X, X)`, filled from the lower triangle.
    pub fn gram(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let d = self.input_dim();
        if x.ncols() != d {
            return Err(Error::InputShape(format!(
                "kernel expects {d} input dimensions, got {}",
                x.ncols()
            )));
        }
        let n = x.nrows();
        let mut tau = vec![0.0; d];
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                for k in 0..d {
                    tau[k] = x[(i, k)] - x[(j, k)];
                }
                let v = self.eval_lag(&tau);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Ok(out)
    }

    /// `Σ_ij weights_ij · ∂K(X,X)_ij/∂(log param)` for every parameter.
    /// `weights` must be symmetric.
    pub fn gram_grad_contract(&self, x: &DMatrix<f64>, weights: &DMatrix<f64>) -> Vec<f64> {
        let d = self.input_dim();
        let n = x.nrows();
        let p = self.num_params();
        let mut out = vec![0.0; p];
        let mut tau = vec![0.0; d];
        let mut g = vec![0.0; p];
        for j in 0..n {
            // diagonal: τ = 0
            tau.iter_mut().for_each(|t| *t = 0.0);
            self.eval_lag_grad(&tau, &mut g);
            let w = weights[(j, j)];
            for (o, gv) in out.iter_mut().zip(&g) {
                *o += w * gv;
            }
            for i in j + 1..n {
                for k in 0..d {
                    tau[k] = x[(i, k)] - x[(j, k)];
                }
                self.eval_lag_grad(&tau, &mut g);
                let w = weights[(i, j)] + weights[(j, i)];
                for (o, gv) in out.iter_mut().zip(&g) {
                    *o += w * gv;
                }
            }
        }
        out
    }
}

impl KernelHyperparams {
    pub fn validate(&self, num_fidelities: usize) -> Result<()> {
        self.kernel.validate()?;
        let check = |v: f64| v.is_finite() && v >= 0.0;
        match &self.noise {
            NoiseVariance::Shared(v) if !check(*v) => Err(Error::InvalidHyperparams(format!(
                "noise variance must be non-negative: {v}"
            ))),
            NoiseVariance::PerFidelity(v) if v.len() != num_fidelities => {
                Err(Error::InvalidHyperparams(format!(
                    "expected {num_fidelities} noise variances, got {}",
                    v.len()
                )))
            }
            NoiseVariance::PerFidelity(v) if !v.iter().all(|x| check(*x)) => Err(
                Error::InvalidHyperparams(format!("noise variances must be non-negative: {v:?}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn eval_core(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.kernel.eval_core(a, b)
    }

    /// Full coregionalization covariance `Σ_T ⊗ K_c` plus per-fidelity noise.
    /// Rows/columns are ordered fidelity-major: index `k·n_x + i`.
    pub fn eval_coreg(&self, task: &TaskMatrix, x: &DMatrix<f64>) -> Result<CovarianceMatrix> {
        let kc = self.kernel.gram(x)?;
        let sigma = task.covariance();
        let n = x.nrows();
        let mut m = linalg::kron(&sigma, &kc);
        for k in 0..task.size() {
            let noise = self.noise.for_fidelity(k);
            for i in 0..n {
                m[(k * n + i, k * n + i)] += noise;
            }
        }
        Ok(CovarianceMatrix { matrix: m })
    }
}

/// Dense symmetric covariance matrix.
#[derive(Clone, Debug)]
pub struct CovarianceMatrix {
    pub matrix: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Cholesky factor; the returned value records how much jitter was needed.
    pub fn cholesky(&self) -> Result<JitteredCholesky> {
        linalg::cholesky_jittered(&self.matrix)
    }
}

/// Inter-fidelity covariance `Σ_T`, held as a lower-triangular factor `L`
/// with `Σ_T = L Lᵀ`, so it is PSD by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskMatrix {
    /// Row-major lower-triangular factor.
    factor: Vec<Vec<f64>>,
}

impl TaskMatrix {
    pub fn identity(n: usize) -> Self {
        Self::from_factor(DMatrix::identity(n, n)).expect("identity is a valid factor")
    }

    pub fn from_factor(l: DMatrix<f64>) -> Result<Self> {
        if !l.is_square() || l.nrows() == 0 {
            return Err(Error::InputShape("task factor must be square and non-empty".into()));
        }
        let n = l.nrows();
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            if !(l[(i, i)].is_finite() && l[(i, i)] > 0.0) {
                return Err(Error::InvalidHyperparams(format!(
                    "task factor diagonal must be positive (entry {i})"
                )));
            }
            rows.push((0..=i).map(|j| l[(i, j)]).collect());
        }
        Ok(TaskMatrix { factor: rows })
    }

    /// Builds the task matrix from a symmetric positive definite covariance.
    pub fn from_covariance(sigma: &DMatrix<f64>) -> Result<Self> {
        if !linalg::is_symmetric(sigma, 1e-12) {
            return Err(Error::InvalidHyperparams("task covariance is not symmetric".into()));
        }
        let chol = sigma.clone().cholesky().ok_or_else(|| {
            Error::InvalidTaskCovariance {
                min_eigenvalue: linalg::min_eigenvalue(sigma),
            }
        })?;
        Self::from_factor(chol.l())
    }

    pub fn size(&self) -> usize {
        self.factor.len()
    }

    pub fn factor(&self) -> DMatrix<f64> {
        let n = self.size();
        DMatrix::from_fn(n, n, |i, j| if j <= i { self.factor[i][j] } else { 0.0 })
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let l = self.factor();
        &l * l.transpose()
    }

    /// Correlation `t_kl / sqrt(t_kk t_ll)`.
    pub fn correlation(&self, k: usize, l: usize) -> f64 {
        let s = self.covariance();
        s[(k, l)] / (s[(k, k)] * s[(l, l)]).sqrt()
    }

    pub fn num_unconstrained(n: usize) -> usize {
        n * (n + 1) / 2
    }

    /// Unconstrained parametrization: row-major lower triangle with the
    /// diagonal passed through softplus.
    pub fn from_unconstrained(n: usize, p: &[f64]) -> Self {
        assert_eq!(p.len(), Self::num_unconstrained(n));
        let mut it = p.iter();
        let factor = (0..n)
            .map(|i| {
                (0..=i)
                    .map(|j| {
                        let v = *it.next().unwrap();
                        if i == j {
                            softplus(v)
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        TaskMatrix { factor }
    }

    pub fn to_unconstrained(&self) -> Vec<f64> {
        self.factor
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(move |(j, &v)| if i == j { softplus_inv(v) } else { v })
            })
            .collect()
    }

    pub(crate) fn validate_rows(&self) -> Result<()> {
        for (i, row) in self.factor.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::InvalidHyperparams("task factor is not lower-triangular".into()));
            }
            if !(row[i].is_finite() && row[i] > 0.0) {
                return Err(Error::InvalidHyperparams(format!(
                    "task factor diagonal must be positive (entry {i})"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sm() -> Kernel {
        Kernel::SpectralMixture {
            components: vec![
                MixtureComponent {
                    weight: 0.7,
                    means: vec![0.3, 1.1],
                    variances: vec![0.5, 0.2],
                },
                MixtureComponent {
                    weight: 0.4,
                    means: vec![2.0, 0.0],
                    variances: vec![1.5, 0.9],
                },
            ],
        }
    }

    #[test]
    fn rbf_zero_distance_is_variance() {
        let k = Kernel::rbf(vec![0.3], 2.5);
        let a = DMatrix::from_row_slice(1, 1, &[0.4]);
        let m = k.eval_core(&a, &a).unwrap();
        assert_eq!(m[(0, 0)], 2.5);
    }

    #[test]
    fn rbf_unit_distance() {
        let k = Kernel::rbf(vec![1.0], 1.0);
        let a = DMatrix::from_row_slice(1, 1, &[0.0]);
        let b = DMatrix::from_row_slice(1, 1, &[1.0]);
        let v = k.eval_core(&a, &b).unwrap()[(0, 0)];
        // naive scalar form
        let naive = (-(1.0f64 - 0.0).powi(2) / 2.0).exp();
        assert!((v - naive).abs() < 1e-15);
        assert!((v - 0.6065306597126334).abs() < 1e-15);
    }

    #[test]
    fn spectral_mixture_zero_lag_is_weight_sum() {
        let k = sm();
        assert!((k.eval_lag(&[0.0, 0.0]) - 1.1).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let k = Kernel::rbf(vec![1.0, 1.0], 1.0);
        let a = DMatrix::zeros(3, 1);
        assert!(matches!(k.eval_core(&a, &a), Err(Error::InputShape(_))));
    }

    #[test]
    fn lag_gradient_matches_finite_differences() {
        for kernel in [Kernel::rbf(vec![0.4, 1.3], 0.8), sm()] {
            let tau = [0.23, -0.41];
            let p = kernel.log_params();
            let mut g = vec![0.0; p.len()];
            kernel.eval_lag_grad(&tau, &mut g);
            for i in 0..p.len() {
                let h = 1e-6;
                let mut pp = p.clone();
                pp[i] += h;
                let up = kernel.with_log_params(&pp).eval_lag(&tau);
                pp[i] -= 2.0 * h;
                let dn = kernel.with_log_params(&pp).eval_lag(&tau);
                let fd = (up - dn) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-7, "param {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn log_params_round_trip() {
        let k = sm();
        let back = k.with_log_params(&k.log_params());
        assert_eq!(back.num_params(), k.num_params());
        assert!((back.eval_lag(&[0.1, 0.2]) - k.eval_lag(&[0.1, 0.2])).abs() < 1e-14);
    }

    #[test]
    fn coreg_with_identity_is_block_diagonal() {
        let hp = KernelHyperparams {
            kernel: Kernel::rbf(vec![0.5], 1.0),
            noise: NoiseVariance::Shared(0.01),
        };
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 0.3, 0.9]);
        let kc = hp.eval_core(&x, &x).unwrap();
        let k = hp.eval_coreg(&TaskMatrix::identity(2), &x).unwrap().matrix;
        for i in 0..3 {
            for j in 0..3 {
                let expect = kc[(i, j)] + if i == j { 0.01 } else { 0.0 };
                assert_eq!(k[(i, j)], expect);
                assert_eq!(k[(3 + i, 3 + j)], expect);
                assert_eq!(k[(i, 3 + j)], 0.0);
            }
        }
    }

    #[test]
    fn single_task_coreg_is_core_plus_noise() {
        let hp = KernelHyperparams {
            kernel: sm(),
            noise: NoiseVariance::Shared(0.1),
        };
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.5, 0.7]);
        let kc = hp.eval_core(&x, &x).unwrap();
        let k = hp.eval_coreg(&TaskMatrix::identity(1), &x).unwrap().matrix;
        assert_eq!(k, kc + DMatrix::identity(2, 2) * 0.1);
    }

    #[test]
    fn task_matrix_unconstrained_round_trip() {
        let t = TaskMatrix::from_unconstrained(3, &[0.2, -0.5, 1.0, 0.3, 0.1, -2.0]);
        let back = TaskMatrix::from_unconstrained(3, &t.to_unconstrained());
        let d = t.covariance() - back.covariance();
        assert!(d.amax() < 1e-12);
        assert!(linalg::min_eigenvalue(&t.covariance()) >= -1e-12);
    }

    #[test]
    fn task_matrix_rejects_indefinite() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            TaskMatrix::from_covariance(&s),
            Err(Error::InvalidTaskCovariance { .. })
        ));
    }
}
