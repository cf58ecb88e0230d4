#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use synthfid::{Kernel, MixtureComponent, TaskMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Jittered grid in the unit cube, `per_dim^d` points, with spacing `h`.
pub fn jittered_grid(rng: &mut ChaCha8Rng, per_dim: usize, d: usize) -> (DMatrix<f64>, f64) {
    let h = 1.0 / per_dim as f64;
    let n = per_dim.pow(d as u32);
    let x = DMatrix::from_fn(n, d, |i, j| {
        let idx = (i / per_dim.pow(j as u32)) % per_dim;
        (idx as f64 + 0.5 + 0.3 * (rng.random::<f64>() - 0.5)) * h
    });
    (x, h)
}

pub fn uniform_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.random::<f64>())
}

/// Random SPD task matrix with a factor diagonal bounded away from zero.
pub fn random_task(rng: &mut ChaCha8Rng, n: usize) -> TaskMatrix {
    let l = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.5 + rng.random::<f64>()
        } else if i > j {
            normal(rng) * 0.7
        } else {
            0.0
        }
    });
    TaskMatrix::from_factor(l).unwrap()
}

pub fn random_sm(rng: &mut ChaCha8Rng, q: usize, d: usize) -> Kernel {
    Kernel::SpectralMixture {
        components: (0..q)
            .map(|_| MixtureComponent {
                weight: 0.2 + rng.random::<f64>(),
                means: (0..d).map(|_| rng.random::<f64>() * 2.0).collect(),
                variances: (0..d).map(|_| 0.5 + rng.random::<f64>() * 4.0).collect(),
            })
            .collect(),
    }
}

/// Kernel value written out directly from the textbook formulas.
pub fn kernel_oracle(kernel: &Kernel, a: &[f64], b: &[f64]) -> f64 {
    match kernel {
        Kernel::Rbf {
            lengthscales,
            variance,
        } => {
            let mut r2 = 0.0;
            for d in 0..a.len() {
                let t = (a[d] - b[d]) / lengthscales[d];
                r2 += t * t;
            }
            variance * (-0.5 * r2).exp()
        }
        Kernel::SpectralMixture { components } => {
            let mut total = 0.0;
            for c in components {
                let mut term = c.weight;
                for d in 0..a.len() {
                    let tau = a[d] - b[d];
                    term *= (-2.0 * PI * PI * tau * tau * c.variances[d]).exp()
                        * (2.0 * PI * tau * c.means[d]).cos();
                }
                total += term;
            }
            total
        }
    }
}

pub fn gram_oracle(kernel: &Kernel, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        let ra: Vec<f64> = a.row(i).iter().copied().collect();
        let rb: Vec<f64> = b.row(j).iter().copied().collect();
        kernel_oracle(kernel, &ra, &rb)
    })
}

/// Coregionalized covariance built entry by entry, fidelity-major.
pub fn coreg_oracle(kernel: &Kernel, sigma: &DMatrix<f64>, noise: &[f64], x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let nt = sigma.nrows();
    let kc = gram_oracle(kernel, x, x);
    DMatrix::from_fn(n * nt, n * nt, |r, c| {
        let (k, i) = (r / n, r % n);
        let (l, j) = (c / n, c % n);
        sigma[(k, l)] * kc[(i, j)] + if r == c { noise[k] } else { 0.0 }
    })
}

/// Gaussian log density via LU: no Cholesky anywhere.
pub fn lml_oracle(k: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let lu = k.clone().lu();
    let det = lu.determinant();
    assert!(det > 0.0, "oracle covariance not positive definite");
    let alpha = lu.solve(y).unwrap();
    -0.5 * y.dot(&alpha) - 0.5 * det.ln() - 0.5 * y.len() as f64 * (2.0 * PI).ln()
}

/// Posterior of the extra task at the training inputs, from the dense GP on
/// the augmented (point, task) domain. No noise on the observed tasks.
pub fn augmented_posterior_oracle(
    kernel: &Kernel,
    full_task: &DMatrix<f64>,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.nrows();
    let nt = full_task.nrows() - 1;
    let kc = gram_oracle(kernel, x, x);
    let ktrain = DMatrix::from_fn(n * nt, n * nt, |r, c| full_task[(r / n, c / n)] * kc[(r % n, c % n)]);
    let kcross = DMatrix::from_fn(n * nt, n, |r, j| full_task[(r / n, nt)] * kc[(r % n, j)]);
    let yvec = DVector::from_fn(n * nt, |r, _| y[(r % n, r / n)]);
    let lu = ktrain.lu();
    let alpha = lu.solve(&yvec).unwrap();
    let v = lu.solve(&kcross).unwrap();
    let mean = kcross.transpose() * alpha;
    let cov = &kc * full_task[(nt, nt)] - kcross.transpose() * v;
    (mean, cov)
}

/// Smallest eigenvalue by cyclic Jacobi rotations.
pub fn jacobi_min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut a = m.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[(i, i)]).fold(f64::INFINITY, f64::min)
}

/// Two-pass scalar Pearson correlation.
pub fn pearson_oracle(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Correlation matrix of the columns of `m`, via the scalar oracle.
pub fn correlation_oracle(m: &DMatrix<f64>) -> DMatrix<f64> {
    let cols: Vec<Vec<f64>> = m.column_iter().map(|c| c.iter().copied().collect()).collect();
    DMatrix::from_fn(cols.len(), cols.len(), |i, j| pearson_oracle(&cols[i], &cols[j]))
}

/// Expanded matrix `[[C, p], [pᵀ, 1]]`.
pub fn expanded(c: &DMatrix<f64>, p: &[f64]) -> DMatrix<f64> {
    let m = c.nrows();
    let mut e = c.clone().resize(m + 1, m + 1, 0.0);
    for i in 0..m {
        e[(i, m)] = p[i];
        e[(m, i)] = p[i];
    }
    e[(m, m)] = 1.0;
    e
}

/// Random correlation matrix of size `m` from random Gaussian columns.
pub fn random_correlation(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    let cols = DMatrix::from_fn(3 * m + 2, m, |_, _| normal(rng));
    correlation_oracle(&cols)
}
