use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

use super::MogpModel;

/// Posterior over one fidelity's latent function at a set of test points.
#[derive(Clone, Debug)]
pub struct FidelityPosterior {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// Posterior over an extra task with no observations, at `x_* = X`.
#[derive(Clone, Debug)]
pub struct SyntheticTaskPosterior {
    /// `Σ_T⁻¹ Σ_T*`: how much each existing fidelity contributes to the mean.
    pub contribution: DVector<f64>,
    /// `Σ_T** − Σ_T*ᵀ Σ_T⁻¹ Σ_T*`, the task variance left after conditioning.
    pub task_variance: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl MogpModel {
    /// Standard GP posterior over (point, fidelity) pairs, returned per fidelity.
    pub fn posterior(&self, xstar: &DMatrix<f64>) -> Result<Vec<FidelityPosterior>> {
        let kernel = &self.hyperparams().kernel;
        let x = self.data().x();
        let cross = kernel.eval_core(x, xstar)?;
        let prior = kernel.gram(xstar)?;
        let sigma = self.task().covariance();
        let n = x.nrows();
        let nt = sigma.nrows();
        let m = xstar.nrows();
        let l = self.factor.factor.l();

        (0..nt)
            .map(|k| {
                let mut kstar = DMatrix::zeros(n * nt, m);
                for b in 0..nt {
                    kstar
                        .view_mut((b * n, 0), (n, m))
                        .copy_from(&(&cross * sigma[(b, k)]));
                }
                let mean = kstar.transpose() * &self.alpha;
                let v = l
                    .solve_lower_triangular(&kstar)
                    .ok_or(Error::Conditioning {
                        jitter: self.factor.jitter,
                    })?;
                let covariance = &prior * sigma[(k, k)] - v.transpose() * v;
                Ok(FidelityPosterior { mean, covariance })
            })
            .collect()
    }

    /// Posterior of a synthetic task with cross-covariances `task_cross`
    /// (length n_t) and prior variance `task_var`, using the compact
    /// task-space form:
    /// `μ_p = Y Σ_T⁻¹ Σ_T*` and `σ_p = (Σ_T** − Σ_T*ᵀ Σ_T⁻¹ Σ_T*) K_c`.
    pub fn synthetic_task_posterior(
        &self,
        task_cross: &DVector<f64>,
        task_var: f64,
    ) -> Result<SyntheticTaskPosterior> {
        let sigma = self.task().covariance();
        let nt = sigma.nrows();
        if task_cross.len() != nt {
            return Err(Error::InputShape(format!(
                "expected {nt} task cross-covariances, got {}",
                task_cross.len()
            )));
        }
        let mut expanded = sigma.clone().resize(nt + 1, nt + 1, 0.0);
        for k in 0..nt {
            expanded[(k, nt)] = task_cross[k];
            expanded[(nt, k)] = task_cross[k];
        }
        expanded[(nt, nt)] = task_var;
        let min_eig = linalg::min_eigenvalue(&expanded);
        let tol = 1e-10 * expanded.amax().max(1.0);
        if !task_var.is_finite() || min_eig < -tol {
            return Err(Error::InvalidTaskCovariance {
                min_eigenvalue: min_eig,
            });
        }

        let l = self.task().factor();
        let contribution = l
            .solve_lower_triangular(task_cross)
            .and_then(|z| l.transpose().solve_upper_triangular(&z))
            .expect("task factor has a positive diagonal");
        let task_variance = (task_var - task_cross.dot(&contribution)).max(0.0);
        let mean = self.data().y() * &contribution;
        let covariance = self.core_covariance() * task_variance;
        Ok(SyntheticTaskPosterior {
            contribution,
            task_variance,
            mean,
            covariance,
        })
    }
}
