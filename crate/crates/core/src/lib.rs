//! Synthetic fidelity generation for multi-fidelity benchmarks.
//!
//! Given a ground-truth function's values (and optionally lower-fidelity
//! proxies) on a shared set of points, this crate fits a coregionalized
//! multi-output Gaussian process and draws new "synthetic" fidelities whose
//! Pearson correlations to every existing fidelity are exactly the requested
//! values.
//!
//! The pipeline is:
//!
//! 1. [`mogp::fit`] the GP to a [`FidelityDataset`].
//! 2. [`sampler::build_basis`] from the fitted model and a seed.
//! 3. Choose a valid correlation vector with a [`corrbounds::BoundsSession`].
//! 4. [`sampler::draw`] the synthetic sample.

pub mod benchfns;
pub mod cli;
pub mod corrbounds;
pub mod error;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod mogp;
pub mod optim;
pub mod sampler;

pub use error::{Error, Result};
pub use kernel::{Kernel, KernelHyperparams, MixtureComponent, NoiseVariance, TaskMatrix};
pub use mogp::{FidelityDataset, FitConfig, MogpModel};
