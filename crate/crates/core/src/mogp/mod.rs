//! Coregionalized multi-output GP regression on block-design data.

mod dataset;
mod fit;
mod likelihood;
mod posterior;

pub use dataset::{FidelityDataset, Provenance};
pub use fit::{
    fit, fit_objective, FitConfig, FitDiagnostics, GradientMode, KernelChoice, NoiseMode,
    RestartOutcome,
};
pub use likelihood::{log_marginal_likelihood, KroneckerLikelihood};
pub use posterior::{FidelityPosterior, SyntheticTaskPosterior};

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::kernel::{KernelHyperparams, TaskMatrix};
use crate::linalg::{self, JitteredCholesky};

/// A coregionalized GP bound to its training data.
///
/// Holds the Cholesky factor of `Σ_T ⊗ K_c + noise` over the training points
/// and the weights `K⁻¹y`.
#[derive(Clone, Debug)]
pub struct MogpModel {
    hyper: KernelHyperparams,
    task: TaskMatrix,
    data: FidelityDataset,
    factor: JitteredCholesky,
    alpha: DVector<f64>,
    diagnostics: Option<FitDiagnostics>,
}

impl MogpModel {
    pub fn new(
        data: FidelityDataset,
        hyper: KernelHyperparams,
        task: TaskMatrix,
        diagnostics: Option<FitDiagnostics>,
    ) -> Result<Self> {
        task.validate_rows()?;
        likelihood::check_shapes(&data, &hyper, &task)?;
        let factor = hyper.eval_coreg(&task, data.x())?.cholesky()?;
        let alpha = factor.factor.solve(&linalg::vec_columns(data.y()));
        Ok(MogpModel {
            hyper,
            task,
            data,
            factor,
            alpha,
            diagnostics,
        })
    }

    pub fn hyperparams(&self) -> &KernelHyperparams {
        &self.hyper
    }

    pub fn task(&self) -> &TaskMatrix {
        &self.task
    }

    pub fn data(&self) -> &FidelityDataset {
        &self.data
    }

    pub fn diagnostics(&self) -> Option<&FitDiagnostics> {
        self.diagnostics.as_ref()
    }

    /// Diagonal jitter that was needed to factorize the training covariance.
    pub fn jitter(&self) -> f64 {
        self.factor.jitter
    }

    /// Same data and kernel with a different task matrix.
    pub fn with_task(&self, task: TaskMatrix) -> Result<Self> {
        MogpModel::new(self.data.clone(), self.hyper.clone(), task, None)
    }

    /// Task-independent kernel matrix `K_c` over the training points.
    pub fn core_covariance(&self) -> DMatrix<f64> {
        self.hyper
            .kernel
            .gram(self.data.x())
            .expect("dimensions checked at construction")
    }

    /// Log marginal likelihood from the cached factor (including any jitter).
    pub fn log_marginal_likelihood(&self) -> f64 {
        likelihood::gaussian_log_density(&self.factor.factor, &linalg::vec_columns(self.data.y()))
    }
}
