//! Small dense linear-algebra helpers shared by the GP and sampling code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative jitter tried first when a plain factorization fails.
pub const JITTER_START: f64 = 1e-10;
/// Largest relative jitter before giving up.
pub const JITTER_MAX: f64 = 1e-4;

/// A Cholesky factor together with the diagonal jitter that was needed to obtain it.
#[derive(Clone, Debug)]
pub struct JitteredCholesky {
    pub factor: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

/// Factorizes a symmetric matrix, escalating diagonal jitter by ×10 from
/// `JITTER_START` to `JITTER_MAX` (both relative to the mean diagonal).
pub fn cholesky_jittered(mat: &DMatrix<f64>) -> Result<JitteredCholesky> {
    if let Some(factor) = mat.clone().cholesky() {
        return Ok(JitteredCholesky { factor, jitter: 0.0 });
    }
    let n = mat.nrows();
    let scale = if n == 0 {
        1.0
    } else {
        let mean = mat.diagonal().iter().map(|d| d.abs()).sum::<f64>() / n as f64;
        if mean > 0.0 {
            mean
        } else {
            1.0
        }
    };
    let mut rel = JITTER_START;
    let mut last = 0.0;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * scale;
        let mut m = mat.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(factor) = m.cholesky() {
            return Ok(JitteredCholesky { factor, jitter });
        }
        last = jitter;
        rel *= 10.0;
    }
    Err(Error::Conditioning { jitter: last })
}

pub fn is_symmetric(mat: &DMatrix<f64>, rel_tol: f64) -> bool {
    if !mat.is_square() {
        return false;
    }
    let scale = mat.amax().max(f64::MIN_POSITIVE);
    let n = mat.nrows();
    (0..n).all(|i| (0..i).all(|j| (mat[(i, j)] - mat[(j, i)]).abs() <= rel_tol * scale))
}

pub fn min_eigenvalue(mat: &DMatrix<f64>) -> f64 {
    let sym = (mat + mat.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// Eigenvalue ratio max/min of a symmetric matrix; infinite when singular or indefinite.
pub fn condition_number(mat: &DMatrix<f64>) -> f64 {
    let sym = (mat + mat.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population (1/n) variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

pub fn std_dev(values: &[f64]) -> f64 {
    variance(values).sqrt()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ma = mean(a);
    let mb = mean(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * s));
        }
    }
    out
}

/// Stacks the columns of `y` into a single vector (fidelity-major ordering).
pub fn vec_columns(y: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(y.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jitter_is_zero_for_well_conditioned() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let c = cholesky_jittered(&m).unwrap();
        assert_eq!(c.jitter, 0.0);
    }

    #[test]
    fn jitter_escalates_for_singular() {
        let m = DMatrix::from_element(3, 3, 1.0);
        let c = cholesky_jittered(&m).unwrap();
        assert!(c.jitter > 0.0 && c.jitter <= 1e-4);
    }

    #[test]
    fn indefinite_fails_with_max_jitter() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        match cholesky_jittered(&m) {
            Err(Error::Conditioning { jitter }) => assert!((jitter - 1e-4).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn kron_blocks() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::identity(2, 2);
        let k = kron(&a, &b);
        assert_eq!(k[(0, 2)], 2.0);
        assert_eq!(k[(3, 1)], 3.0);
        assert_eq!(k[(1, 0)], 0.0);
    }

    #[test]
    fn pearson_of_affine_is_one() {
        let a = [1.0, 2.0, 4.0, 7.0];
        let b: Vec<f64> = a.iter().map(|v| 3.0 * v - 1.0).collect();
        assert!((pearson(&a, &b) - 1.0).abs() < 1e-15);
    }
}
