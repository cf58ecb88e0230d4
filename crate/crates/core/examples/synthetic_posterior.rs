// Posterior of an unobserved fidelity given its task covariances.

use nalgebra::{DMatrix, DVector};
use synthfid::{FidelityDataset, Kernel, KernelHyperparams, MogpModel, NoiseVariance, TaskMatrix};

fn run() -> synthfid::Result<()> {
    let x = DMatrix::from_fn(12, 1, |i, _| i as f64 / 11.0);
    let y = DMatrix::from_fn(12, 2, |i, k| {
        let t = x[(i, 0)];
        if k == 0 { (6.0 * t).sin() } else { 0.7 * (6.0 * t).sin() + 0.2 * t }
    });
    let data = FidelityDataset::with_default_labels(x, y)?;
    let hp = KernelHyperparams { kernel: Kernel::rbf(vec![0.2], 1.0), noise: NoiseVariance::Shared(1e-8) };
    let task = TaskMatrix::from_covariance(&DMatrix::from_row_slice(2, 2, &[1.0, 0.7, 0.7, 0.6]))?;
    let model = MogpModel::new(data, hp, task, None)?;

    // a new task mostly aligned with fidelity 0
    let cross = DVector::from_vec(vec![0.9, 0.5]);
    let post = model.synthetic_task_posterior(&cross, 1.0)?;
    println!("contribution of each fidelity: {:?}", post.contribution.as_slice());
    println!("task variance left after conditioning: {:.4}", post.task_variance);
    println!("posterior mean: {:.3?}", post.mean.as_slice());
    Ok(())
}

fn main() {
    run().unwrap();
}
