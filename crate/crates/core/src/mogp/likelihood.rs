//! Log marginal likelihood of the coregionalized GP.
//!
//! [`log_marginal_likelihood`] factorizes the full `(n_x·n_t)²` covariance.
//! [`KroneckerLikelihood`] exploits the block design instead: with per-fidelity
//! noise `D`, `K = (D½⊗I)(Σ̃⊗K_c + I)(D½⊗I)` where `Σ̃ = D^-½ Σ_T D^-½`, so a
//! single eigendecomposition of `K_c` gives the likelihood for any task
//! matrix and noise.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelHyperparams, TaskMatrix};
use crate::linalg::{self, JITTER_START};

use super::FidelityDataset;

/// `−½ yᵀK⁻¹y − ½ log|K| − (N/2) log 2π` with `K = Σ_T ⊗ K_c + noise`.
pub fn log_marginal_likelihood(
    data: &FidelityDataset,
    params: &KernelHyperparams,
    task: &TaskMatrix,
) -> Result<f64> {
    check_shapes(data, params, task)?;
    let k = params.eval_coreg(task, data.x())?;
    let chol = k.cholesky()?;
    let y = linalg::vec_columns(data.y());
    Ok(gaussian_log_density(&chol.factor, &y))
}

pub(crate) fn gaussian_log_density(
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    y: &DVector<f64>,
) -> f64 {
    let alpha = chol.solve(y);
    let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    -0.5 * y.dot(&alpha) - 0.5 * logdet - 0.5 * y.len() as f64 * (2.0 * PI).ln()
}

pub(crate) fn check_shapes(
    data: &FidelityDataset,
    params: &KernelHyperparams,
    task: &TaskMatrix,
) -> Result<()> {
    if params.kernel.input_dim() != data.n_dims() {
        return Err(Error::InputShape(format!(
            "kernel has {} input dimensions, data has {}",
            params.kernel.input_dim(),
            data.n_dims()
        )));
    }
    if task.size() != data.n_fidelities() {
        return Err(Error::InputShape(format!(
            "task matrix is {}×{}, data has {} fidelities",
            task.size(),
            task.size(),
            data.n_fidelities()
        )));
    }
    params.validate(data.n_fidelities())
}

/// Eigendecomposition of `K_c` with the data projected onto its eigenbasis.
pub struct KroneckerLikelihood {
    q: DMatrix<f64>,
    lambda: DVector<f64>,
    /// `Q_cᵀ Y`
    qty: DMatrix<f64>,
    prior_variance: f64,
}

/// Intermediate quantities needed for gradients.
pub(crate) struct LmlParts {
    pub lml: f64,
    /// `α = K⁻¹y` reshaped to n_x × n_t.
    pub alpha: DMatrix<f64>,
    /// Diagonal of the trace weight: `g_i = Σ_k λ̃_k / (λ̃_k λ_i + 1)`.
    pub trace_weights: DVector<f64>,
    /// `D^-½ Q_t`
    pub task_basis: DMatrix<f64>,
    pub task_eigenvalues: DVector<f64>,
    pub effective_noise: Vec<f64>,
}

impl KroneckerLikelihood {
    pub fn new(kernel: &Kernel, data: &FidelityDataset) -> Result<Self> {
        let kc = kernel.gram(data.x())?;
        let eig = kc.symmetric_eigen();
        let lambda = eig.eigenvalues.map(|v| v.max(0.0));
        let qty = eig.eigenvectors.transpose() * data.y();
        Ok(KroneckerLikelihood {
            q: eig.eigenvectors,
            lambda,
            qty,
            prior_variance: kernel.prior_variance(),
        })
    }

    /// Noise actually used: at least `JITTER_START` times the fidelity's prior variance.
    pub fn effective_noise(&self, sigma: &DMatrix<f64>, noise: &[f64]) -> Vec<f64> {
        noise
            .iter()
            .enumerate()
            .map(|(k, &d)| d.max(JITTER_START * sigma[(k, k)] * self.prior_variance))
            .collect()
    }

    pub fn evaluate(&self, sigma: &DMatrix<f64>, noise: &[f64]) -> f64 {
        self.parts(sigma, noise, false).lml
    }

    pub(crate) fn parts(&self, sigma: &DMatrix<f64>, noise: &[f64], full: bool) -> LmlParts {
        let nx = self.lambda.len();
        let nt = sigma.nrows();
        let d = self.effective_noise(sigma, noise);
        let inv_sqrt: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
        let whitened =
            DMatrix::from_fn(nt, nt, |k, l| sigma[(k, l)] * inv_sqrt[k] * inv_sqrt[l]);
        let teig = whitened.symmetric_eigen();
        let lt = teig.eigenvalues.map(|v| v.max(0.0));
        let qt = teig.eigenvectors;

        let mut scaled = self.qty.clone();
        for k in 0..nt {
            scaled.column_mut(k).scale_mut(inv_sqrt[k]);
        }
        let mut z = scaled * &qt;
        let mut quad = 0.0;
        let mut logdet: f64 = d.iter().map(|v| v.ln()).sum::<f64>() * nx as f64;
        for k in 0..nt {
            for i in 0..nx {
                let e = self.lambda[i] * lt[k] + 1.0;
                let zi = z[(i, k)];
                quad += zi * zi / e;
                logdet += e.ln();
                z[(i, k)] = zi / e;
            }
        }
        let lml = -0.5 * quad - 0.5 * logdet - 0.5 * (nx * nt) as f64 * (2.0 * PI).ln();
        if !full {
            return LmlParts {
                lml,
                alpha: DMatrix::zeros(0, 0),
                trace_weights: DVector::zeros(0),
                task_basis: DMatrix::zeros(0, 0),
                task_eigenvalues: DVector::zeros(0),
                effective_noise: d,
            };
        }
        let mut alpha = &self.q * z * qt.transpose();
        for k in 0..nt {
            alpha.column_mut(k).scale_mut(inv_sqrt[k]);
        }
        let trace_weights = DVector::from_fn(nx, |i, _| {
            (0..nt).map(|k| lt[k] / (lt[k] * self.lambda[i] + 1.0)).sum()
        });
        let mut task_basis = qt;
        for k in 0..nt {
            task_basis.row_mut(k).scale_mut(inv_sqrt[k]);
        }
        LmlParts {
            lml,
            alpha,
            trace_weights,
            task_basis,
            task_eigenvalues: lt,
            effective_noise: d,
        }
    }

    /// Weight matrix `G = ½(A Σ_T Aᵀ − Q diag(g) Qᵀ)` whose contraction with
    /// `∂K_c` gives the likelihood gradient for a kernel parameter.
    pub(crate) fn kernel_gradient_weights(
        &self,
        sigma: &DMatrix<f64>,
        parts: &LmlParts,
    ) -> DMatrix<f64> {
        let a = &parts.alpha;
        let m = a * sigma * a.transpose();
        let mut qg = self.q.clone();
        for i in 0..qg.ncols() {
            qg.column_mut(i).scale_mut(parts.trace_weights[i]);
        }
        let w = qg * self.q.transpose();
        (m - w) * 0.5
    }

    /// Gradient with respect to the entries of `Σ_T` (each entry treated as
    /// free) and with respect to each fidelity's requested noise variance.
    /// Where the noise floor is active the noise gradient is zero and its
    /// effect is routed through the diagonal of `Σ_T` instead.
    pub(crate) fn task_noise_gradient(
        &self,
        noise: &[f64],
        parts: &LmlParts,
    ) -> (DMatrix<f64>, Vec<f64>) {
        let a = &parts.alpha;
        let b = &parts.task_basis;
        let lt = &parts.task_eigenvalues;
        let nt = a.ncols();
        let mut qta = self.q.transpose() * a;
        for i in 0..qta.nrows() {
            qta.row_mut(i).scale_mut(self.lambda[i]);
        }
        let quad = a.transpose() * (&self.q * qta);
        let (mut h, mut u) = (vec![0.0; nt], vec![0.0; nt]);
        for k in 0..nt {
            for &l in self.lambda.iter() {
                let e = 1.0 / (lt[k] * l + 1.0);
                h[k] += l * e;
                u[k] += e;
            }
        }
        let trace = DMatrix::from_fn(nt, nt, |k, l| {
            (0..nt).map(|m| b[(k, m)] * b[(l, m)] * h[m]).sum::<f64>()
        });
        let mut task = (quad - trace) * 0.5;
        let mut noise_grad = vec![0.0; nt];
        for k in 0..nt {
            let ak = a.column(k).norm_squared();
            let tr: f64 = (0..nt).map(|m| b[(k, m)] * b[(k, m)] * u[m]).sum();
            let g = 0.5 * (ak - tr);
            if parts.effective_noise[k] > noise[k] {
                task[(k, k)] += g * JITTER_START * self.prior_variance;
            } else {
                noise_grad[k] = g;
            }
        }
        (task, noise_grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::NoiseVariance;

    #[test]
    fn unit_variance_zero_observation() {
        // single point duplicated would be invalid; use the density directly
        let k = DMatrix::from_element(1, 1, 1.0);
        let chol = k.cholesky().unwrap();
        let v = gaussian_log_density(&chol, &DVector::from_element(1, 0.0));
        assert!((v + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
        assert!((v - (-0.9189385332046727)).abs() < 1e-12);
        let v1 = gaussian_log_density(&chol, &DVector::from_element(1, 1.0));
        assert!((v1 - (-1.4189385332046727)).abs() < 1e-12);
    }

    #[test]
    fn kronecker_matches_dense() {
        let x = DMatrix::from_row_slice(5, 1, &[0.0, 0.2, 0.45, 0.7, 1.0]);
        let y = DMatrix::from_row_slice(
            5,
            2,
            &[0.1, 0.3, -0.4, 0.2, 0.8, 0.5, 0.3, -0.1, -0.6, -0.2],
        );
        let data = FidelityDataset::with_default_labels(x, y).unwrap();
        let hp = KernelHyperparams {
            kernel: Kernel::rbf(vec![0.3], 1.2),
            noise: NoiseVariance::PerFidelity(vec![0.05, 0.2]),
        };
        let task = TaskMatrix::from_unconstrained(2, &[0.4, 0.7, 1.1]);
        let dense = log_marginal_likelihood(&data, &hp, &task).unwrap();
        let kron = KroneckerLikelihood::new(&hp.kernel, &data)
            .unwrap()
            .evaluate(&task.covariance(), &[0.05, 0.2]);
        assert!((dense - kron).abs() < 1e-10, "{dense} vs {kron}");
    }
}
