// Evaluates the two kernels and builds a coregionalized covariance.

use nalgebra::DMatrix;
use synthfid::{Kernel, KernelHyperparams, MixtureComponent, NoiseVariance, TaskMatrix};

fn run() -> synthfid::Result<()> {
    let x = DMatrix::from_fn(5, 1, |i, _| i as f64 / 4.0);

    let rbf = Kernel::rbf(vec![0.3], 1.0);
    let sm = Kernel::SpectralMixture {
        components: vec![MixtureComponent {
            weight: 1.0,
            means: vec![2.0],
            variances: vec![0.5],
        }],
    };
    println!("rbf gram:{}", rbf.gram(&x)?);
    println!("spectral mixture at lags 0, 0.25, 0.5: {:.4} {:.4} {:.4}", sm.eval_lag(&[0.0]), sm.eval_lag(&[0.25]), sm.eval_lag(&[0.5]));

    // two fidelities correlated at 0.8
    let task = TaskMatrix::from_covariance(&DMatrix::from_row_slice(2, 2, &[1.0, 0.8, 0.8, 1.0]))?;
    let hp = KernelHyperparams { kernel: rbf, noise: NoiseVariance::Shared(1e-6) };
    let k = hp.eval_coreg(&task, &x)?;
    println!("coregionalized covariance is {}x{}, jitter {:e}", k.matrix.nrows(), k.matrix.ncols(), k.cholesky()?.jitter);
    Ok(())
}

fn main() {
    run().unwrap();
}
