//! Sequential construction of valid Pearson correlation vectors.
//!
//! Given the basis correlation matrix `C = L Lᵀ`, the expanded matrix
//! `C′ = [[C, p], [pᵀ, 1]]` is a valid correlation matrix exactly when the
//! new Cholesky row `ℓ` (with `L ℓ = p`) has `‖ℓ‖ ≤ 1`. Choosing `p_i` in
//! order, the admissible range for entry `i` given the earlier choices is
//!
//! ```text
//! ℓ[:i]·L[i,:i]  ±  L[i,i] · sqrt(1 − ℓ[:i]·ℓ[:i])
//! ```
//!
//! The synthetic sample is a linear combination of the basis columns, so `C′`
//! must also be singular, i.e. `‖ℓ‖ = 1`. That pins the final entry (the
//! correlation to the prior draw) to one of the two endpoints of its range.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Slack allowed when a chosen value sits just outside an interval.
pub const CHOICE_SLACK: f64 = 1e-12;
/// Distance within which a value is snapped to an endpoint of the final entry.
pub const ENDPOINT_SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Any value in `[lower, upper]` is admissible.
    Interval,
    /// Only `lower` or `upper` is admissible.
    Endpoints,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
    /// Projection term the interval is centred on.
    pub center: f64,
    pub kind: BoundKind,
}

impl Bounds {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        match self.kind {
            BoundKind::Interval => {
                value >= self.lower - CHOICE_SLACK && value <= self.upper + CHOICE_SLACK
            }
            BoundKind::Endpoints => {
                (value - self.lower).abs() <= ENDPOINT_SLACK
                    || (value - self.upper).abs() <= ENDPOINT_SLACK
            }
        }
    }
}

/// Choice-by-choice construction of a correlation vector against a fixed
/// basis correlation matrix.
#[derive(Clone, Debug)]
pub struct BoundsSession {
    reference: DMatrix<f64>,
    /// Lower-triangular factor of the reference matrix.
    factor: DMatrix<f64>,
    /// New factor row `ℓ`, filled as entries are chosen.
    row: Vec<f64>,
    values: Vec<f64>,
    bounds: Vec<Bounds>,
}

/// A complete, validated correlation vector.
#[derive(Clone, Debug)]
pub struct CorrelationSpec {
    values: Vec<f64>,
    bounds: Vec<Bounds>,
    row: Vec<f64>,
    reference: DMatrix<f64>,
}

/// Cholesky factor that tolerates zero pivots (duplicate basis columns).
fn semidefinite_cholesky(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = c.nrows();
    let mut l = DMatrix::zeros(m, m);
    for j in 0..m {
        let d = c[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
        if d < -1e-10 {
            return Err(Error::InvalidCorrelationMatrix(format!(
                "not positive semi-definite (pivot {j} is {d:e})"
            )));
        }
        if d <= 1e-12 {
            for i in j + 1..m {
                let v = c[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
                if v.abs() > 1e-6 {
                    return Err(Error::InvalidCorrelationMatrix(format!(
                        "not positive semi-definite (zero pivot {j} with coupling {v:e})"
                    )));
                }
            }
            continue;
        }
        let root = d.sqrt();
        l[(j, j)] = root;
        for i in j + 1..m {
            let v = c[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
            l[(i, j)] = v / root;
        }
    }
    Ok(l)
}

impl BoundsSession {
    /// Starts a session against the basis correlation matrix `c`.
    pub fn begin(c: &DMatrix<f64>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidCorrelationMatrix(m));
        if !c.is_square() || c.nrows() == 0 {
            return bad("must be square and non-empty".into());
        }
        if c.iter().any(|v| !v.is_finite()) {
            return bad("contains non-finite entries".into());
        }
        if !linalg::is_symmetric(c, 1e-12) {
            return bad("not symmetric".into());
        }
        let m = c.nrows();
        for i in 0..m {
            if (c[(i, i)] - 1.0).abs() > 1e-10 {
                return bad(format!("diagonal entry {i} is {}", c[(i, i)]));
            }
            for j in 0..m {
                if c[(i, j)].abs() > 1.0 + 1e-12 {
                    return bad(format!("entry ({i}, {j}) = {} exceeds 1", c[(i, j)]));
                }
            }
        }
        let factor = semidefinite_cholesky(c)?;
        Ok(BoundsSession {
            reference: c.clone(),
            factor,
            row: Vec::with_capacity(m),
            values: Vec::with_capacity(m),
            bounds: Vec::with_capacity(m),
        })
    }

    /// Number of entries in a complete vector (basis size).
    pub fn len(&self) -> usize {
        self.reference.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cursor(&self) -> usize {
        self.values.len()
    }

    pub fn is_complete(&self) -> bool {
        self.cursor() == self.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn reference(&self) -> &DMatrix<f64> {
        &self.reference
    }

    pub fn bounds_for_next(&self) -> Result<Bounds> {
        let i = self.cursor();
        if i == self.len() {
            return Err(Error::SessionExhausted(self.len()));
        }
        let l = &self.factor;
        let center: f64 = (0..i).map(|k| self.row[k] * l[(i, k)]).sum();
        let used: f64 = self.row.iter().map(|v| v * v).sum();
        // roundoff can push the remaining norm slightly negative
        let remaining = (1.0 - used).max(0.0);
        let half = l[(i, i)] * remaining.sqrt();
        let kind = if i + 1 == self.len() {
            BoundKind::Endpoints
        } else {
            BoundKind::Interval
        };
        Ok(Bounds {
            lower: (center - half).max(-1.0),
            upper: (center + half).min(1.0),
            center: center + 0.0,
            kind,
        })
    }

    /// Fixes the next entry. For the final entry the value is snapped to the
    /// nearer endpoint.
    pub fn choose(&mut self, value: f64) -> Result<&mut Self> {
        let i = self.cursor();
        let b = self.bounds_for_next()?;
        if !value.is_finite() || !b.contains(value) {
            return Err(Error::OutOfBounds {
                index: i,
                value,
                lower: b.lower,
                upper: b.upper,
            });
        }
        let value = match b.kind {
            BoundKind::Interval => value.clamp(b.lower, b.upper),
            BoundKind::Endpoints => {
                if (value - b.upper).abs() <= (value - b.lower).abs() {
                    b.upper
                } else {
                    b.lower
                }
            }
        };
        let diag = self.factor[(i, i)];
        let ell = if diag > 1e-12 {
            (value - b.center) / diag
        } else {
            0.0
        };
        self.row.push(ell);
        self.values.push(value);
        self.bounds.push(b);
        Ok(self)
    }

    /// Fills the remaining entries: intermediate entries take the centre of
    /// their interval and the final entry its upper endpoint.
    pub fn complete_with_defaults(&mut self) -> Result<&mut Self> {
        while !self.is_complete() {
            let b = self.bounds_for_next()?;
            let v = match b.kind {
                BoundKind::Interval => b.center.clamp(b.lower, b.upper),
                BoundKind::Endpoints => b.upper,
            };
            self.choose(v)?;
        }
        Ok(self)
    }

    /// Draws the remaining entries uniformly within their live bounds; the
    /// final entry picks either endpoint with equal probability.
    pub fn sample_random(mut self, seed: u64) -> Result<CorrelationSpec> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while !self.is_complete() {
            let b = self.bounds_for_next()?;
            let v = match b.kind {
                BoundKind::Interval if b.width() > 0.0 => rng.random_range(b.lower..=b.upper),
                BoundKind::Interval => b.lower,
                BoundKind::Endpoints => {
                    if rng.random_bool(0.5) {
                        b.upper
                    } else {
                        b.lower
                    }
                }
            };
            self.choose(v)?;
        }
        self.finalize()
    }

    pub fn finalize(self) -> Result<CorrelationSpec> {
        if !self.is_complete() {
            return Err(Error::IncompleteSpec {
                chosen: self.cursor(),
                expected: self.len(),
            });
        }
        let spec = CorrelationSpec {
            values: self.values,
            bounds: self.bounds,
            row: self.row,
            reference: self.reference,
        };
        let min = linalg::min_eigenvalue(&spec.expanded_matrix());
        if min < -1e-8 {
            return Err(Error::InvalidCorrelationMatrix(format!(
                "expanded matrix has eigenvalue {min:e}"
            )));
        }
        Ok(spec)
    }
}

impl CorrelationSpec {
    /// Validates an explicit list against `c`. A short list is completed with
    /// [`BoundsSession::complete_with_defaults`].
    pub fn from_values(c: &DMatrix<f64>, values: &[f64]) -> Result<Self> {
        let mut session = BoundsSession::begin(c)?;
        if values.len() > session.len() {
            return Err(Error::InputShape(format!(
                "{} correlations given for a basis of {}",
                values.len(),
                session.len()
            )));
        }
        for &v in values {
            session.choose(v)?;
        }
        session.complete_with_defaults()?;
        session.finalize()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Bounds recorded when each entry was chosen.
    pub fn bounds(&self) -> &[Bounds] {
        &self.bounds
    }

    pub fn reference(&self) -> &DMatrix<f64> {
        &self.reference
    }

    /// Cholesky row of the synthetic sample in the expanded factor.
    pub fn factor_row(&self) -> &[f64] {
        &self.row
    }

    /// `[[C, p], [pᵀ, 1]]`.
    pub fn expanded_matrix(&self) -> DMatrix<f64> {
        expand(&self.reference, &self.values)
    }
}

/// Expanded correlation matrix for a (possibly partial) correlation vector:
/// the leading `values.len()` basis rows plus the synthetic sample.
pub fn expand(c: &DMatrix<f64>, values: &[f64]) -> DMatrix<f64> {
    let m = values.len();
    let mut out = DMatrix::identity(m + 1, m + 1);
    out.view_mut((0, 0), (m, m)).copy_from(&c.view((0, 0), (m, m)));
    for (i, v) in values.iter().enumerate() {
        out[(i, m)] = *v;
        out[(m, i)] = *v;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_starts_with_full_range() {
        let s = BoundsSession::begin(&DMatrix::identity(3, 3)).unwrap();
        let b = s.bounds_for_next().unwrap();
        assert_eq!((b.lower, b.upper), (-1.0, 1.0));
    }

    #[test]
    fn rejects_entry_above_one() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 1.2, 1.2, 1.0]);
        assert!(matches!(
            BoundsSession::begin(&c),
            Err(Error::InvalidCorrelationMatrix(_))
        ));
    }

    #[test]
    fn hand_cholesky_two_by_two() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]);
        let s = BoundsSession::begin(&c).unwrap();
        assert_eq!(s.factor[(0, 0)], 1.0);
        assert!((s.factor[(1, 0)] - 0.9).abs() < 1e-15);
        assert!((s.factor[(1, 1)] - 0.19f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn perfect_correlation_collapses_later_bounds() {
        let mut s = BoundsSession::begin(&DMatrix::identity(3, 3)).unwrap();
        s.choose(1.0).unwrap();
        let b = s.bounds_for_next().unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
    }

    #[test]
    fn out_of_range_reports_interval() {
        let mut s = BoundsSession::begin(&DMatrix::identity(2, 2)).unwrap();
        s.choose(0.6).unwrap();
        match s.choose(0.9) {
            Err(Error::OutOfBounds {
                index,
                lower,
                upper,
                ..
            }) => {
                assert_eq!(index, 1);
                assert!((upper - 0.8).abs() < 1e-12 && (lower + 0.8).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn exhausted_session_errors() {
        let mut s = BoundsSession::begin(&DMatrix::identity(1, 1)).unwrap();
        s.choose(1.0).unwrap();
        assert!(matches!(s.bounds_for_next(), Err(Error::SessionExhausted(1))));
    }

    #[test]
    fn final_entry_snaps_to_endpoint() {
        let mut s = BoundsSession::begin(&DMatrix::identity(2, 2)).unwrap();
        s.choose(0.6).unwrap();
        s.choose(0.8 - 1e-7).unwrap();
        let spec = s.finalize().unwrap();
        assert_eq!(spec.values()[1], 0.8);
        assert!(linalg::min_eigenvalue(&spec.expanded_matrix()) > -1e-12);
        assert!(BoundsSession::begin(&DMatrix::identity(2, 2))
            .unwrap()
            .choose(0.6)
            .unwrap()
            .choose(0.1)
            .is_err());
    }

    #[test]
    fn incomplete_finalize_fails() {
        let mut s = BoundsSession::begin(&DMatrix::identity(3, 3)).unwrap();
        s.choose(0.1).unwrap();
        assert!(matches!(
            s.finalize(),
            Err(Error::IncompleteSpec {
                chosen: 1,
                expected: 3
            })
        ));
    }

    #[test]
    fn duplicate_columns_give_zero_width() {
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.2, 1.0, 1.0, 0.2, 0.2, 0.2, 1.0]);
        let mut s = BoundsSession::begin(&c).unwrap();
        s.choose(0.5).unwrap();
        let b = s.bounds_for_next().unwrap();
        assert!(b.width() < 1e-12);
        assert!((b.center - 0.5).abs() < 1e-12);
        let spec = s.sample_random(4).unwrap();
        assert!(linalg::min_eigenvalue(&spec.expanded_matrix()) > -1e-8);
    }

    #[test]
    fn random_is_reproducible() {
        let c = DMatrix::identity(3, 3);
        let a = BoundsSession::begin(&c).unwrap().sample_random(9).unwrap();
        let b = BoundsSession::begin(&c).unwrap().sample_random(9).unwrap();
        assert_eq!(a.values(), b.values());
        assert!(a.values().iter().all(|v| v.abs() <= 1.0));
    }
}
