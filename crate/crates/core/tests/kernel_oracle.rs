mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

use common::*;
use synthfid::linalg;
use synthfid::{Kernel, KernelHyperparams, NoiseVariance};

#[test]
fn jacobi_oracle_on_known_spectrum() {
    // eigenvalues 1 and 3
    let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
    assert!((jacobi_min_eigenvalue(&m) - 1.0).abs() < 1e-14);
    let m = DMatrix::from_row_slice(3, 3, &[4.0, 0.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0, 1.0]);
    assert_eq!(jacobi_min_eigenvalue(&m), -2.0);
}

#[test]
fn spectral_mixture_at_quarter_period() {
    // w·exp(−2π²τ²v)·cos(2πτμ) with τ = 0.25, μ = 1 → cos(π/2) = 0
    let k = Kernel::SpectralMixture {
        components: vec![synthfid::MixtureComponent {
            weight: 1.5,
            means: vec![1.0],
            variances: vec![0.1],
        }],
    };
    assert!(k.eval_lag(&[0.25]).abs() < 1e-15);
    // τ = 0.5 → cos(π) = −1
    let expect = -1.5 * (-2.0 * std::f64::consts::PI.powi(2) * 0.25 * 0.1).exp();
    assert!((k.eval_lag(&[0.5]) - expect).abs() < 1e-15);
}

fn instance(seed: u64) -> (Kernel, DMatrix<f64>, synthfid::TaskMatrix, Vec<f64>) {
    let mut r = rng(seed);
    let d = r.random_range(1..=3);
    let n = r.random_range(2..=10);
    let nt = r.random_range(1..=3);
    let kernel = if r.random_bool(0.5) {
        Kernel::rbf(
            (0..d).map(|_| 0.1 + r.random::<f64>()).collect(),
            0.5 + r.random::<f64>(),
        )
    } else {
        let q = r.random_range(1..=3);
        random_sm(&mut r, q, d)
    };
    let x = uniform_points(&mut r, n, d);
    let task = random_task(&mut r, nt);
    let noise = (0..nt).map(|_| r.random::<f64>() * 0.1).collect();
    (kernel, x, task, noise)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn coregionalized_matrix_matches_brute_force(seed in any::<u64>()) {
        let (kernel, x, task, noise) = instance(seed);
        let hp = KernelHyperparams { kernel: kernel.clone(), noise: NoiseVariance::PerFidelity(noise.clone()) };
        let got = hp.eval_coreg(&task, &x).unwrap().matrix;
        let want = coreg_oracle(&kernel, &task.covariance(), &noise, &x);
        prop_assert_eq!(got.shape(), want.shape());
        let scale = want.amax().max(1.0);
        prop_assert!((got.clone() - want).amax() <= 1e-12 * scale);
        prop_assert!(linalg::is_symmetric(&got, 1e-12));
        prop_assert!(hp.eval_coreg(&task, &x).unwrap().cholesky().is_ok());
    }

    #[test]
    fn core_kernel_is_stationary(seed in any::<u64>(), shift in -5.0f64..5.0) {
        let (kernel, x, _, _) = instance(seed);
        let moved = x.map(|v| v + shift);
        let a = kernel.gram(&x).unwrap();
        let b = kernel.gram(&moved).unwrap();
        prop_assert!((a - b).amax() <= 1e-10);
    }

    #[test]
    fn cross_covariance_matches_brute_force(seed in any::<u64>()) {
        let (kernel, x, _, _) = instance(seed);
        let mut r = rng(seed ^ 1);
        let other = uniform_points(&mut r, 4, x.ncols());
        let got = kernel.eval_core(&x, &other).unwrap();
        let want = gram_oracle(&kernel, &x, &other);
        prop_assert!((got - want).amax() <= 1e-12 * kernel.prior_variance().max(1.0));
    }
}
