mod common;

use proptest::prelude::*;
use rand::Rng;

use common::*;
use synthfid::corrbounds::{BoundKind, BoundsSession, CorrelationSpec};
use synthfid::Error;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn choices_within_bounds_stay_psd(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = r.random_range(1..=5);
        let c = random_correlation(&mut r, m);
        let mut session = BoundsSession::begin(&c).unwrap();
        while !session.is_complete() {
            let b = session.bounds_for_next().unwrap();
            let v = match b.kind {
                BoundKind::Interval => b.lower + r.random::<f64>() * (b.upper - b.lower),
                BoundKind::Endpoints => if r.random_bool(0.5) { b.lower } else { b.upper },
            };
            session.choose(v).unwrap();
        }
        let spec = session.finalize().unwrap();
        prop_assert!(jacobi_min_eigenvalue(&expanded(&c, spec.values())) >= -1e-8);
    }

    #[test]
    fn values_beyond_bounds_break_psd(seed in any::<u64>(), excess in 1e-5f64..0.2, upper in any::<bool>()) {
        let mut r = rng(seed);
        let m = r.random_range(1..=5);
        let c = random_correlation(&mut r, m);
        let stop = r.random_range(0..m);
        let mut session = BoundsSession::begin(&c).unwrap();
        for _ in 0..stop {
            let b = session.bounds_for_next().unwrap();
            let v = match b.kind {
                BoundKind::Interval => b.lower + r.random::<f64>() * (b.upper - b.lower),
                BoundKind::Endpoints => b.upper,
            };
            session.choose(v).unwrap();
        }
        let b = session.bounds_for_next().unwrap();
        let bad = if upper { b.upper + excess } else { b.lower - excess };
        prop_assert!(
            matches!(session.clone().choose(bad), Err(Error::OutOfBounds { .. })),
            "a value {} outside [{}, {}] was accepted", bad, b.lower, b.upper
        );
        // oracle: the leading block with the offending value is not PSD
        let k = session.cursor();
        let lead = c.view((0, 0), (k + 1, k + 1)).into_owned();
        let mut p = session.values().to_vec();
        p.push(bad);
        prop_assert!(jacobi_min_eigenvalue(&expanded(&lead, &p)) < 0.0);
    }

    #[test]
    fn intervals_are_centred_on_the_projection(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = r.random_range(2..=5);
        let c = random_correlation(&mut r, m);
        let mut session = BoundsSession::begin(&c).unwrap();
        while !session.is_complete() {
            let b = session.bounds_for_next().unwrap();
            if b.lower > -1.0 && b.upper < 1.0 {
                prop_assert!(((b.lower + b.upper) / 2.0 - b.center).abs() <= 1e-12);
            }
            let v = match b.kind {
                BoundKind::Interval => b.lower + r.random::<f64>() * (b.upper - b.lower),
                BoundKind::Endpoints => b.lower,
            };
            session.choose(v).unwrap();
        }
    }

    #[test]
    fn final_entry_makes_expanded_matrix_singular(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = r.random_range(1..=5);
        let c = random_correlation(&mut r, m);
        let spec = BoundsSession::begin(&c).unwrap().sample_random(seed).unwrap();
        let e = expanded(&c, spec.values());
        prop_assert!(jacobi_min_eigenvalue(&e).abs() <= 1e-8);
    }
}

#[test]
fn first_entry_is_free() {
    let mut r = rng(0);
    let c = random_correlation(&mut r, 3);
    let b = BoundsSession::begin(&c).unwrap().bounds_for_next().unwrap();
    assert_eq!((b.lower, b.upper), (-1.0, 1.0));
}

#[test]
fn explicit_list_reports_offending_interval() {
    let mut r = rng(4);
    let c = random_correlation(&mut r, 3);
    match CorrelationSpec::from_values(&c, &[0.9, 5.0]) {
        Err(Error::OutOfBounds { index: 1, lower, upper, .. }) => assert!(lower < upper),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn non_correlation_matrix_rejected() {
    let c = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 1.5, 1.5, 1.0]);
    assert!(BoundsSession::begin(&c).is_err());
}
