// Walks a correlation vector entry by entry, staying positive semi-definite.

use nalgebra::DMatrix;
use synthfid::corrbounds::{BoundKind, BoundsSession, CorrelationSpec};

fn run() -> synthfid::Result<()> {
    let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.6, 0.2, 0.6, 1.0, 0.4, 0.2, 0.4, 1.0]);
    let mut session = BoundsSession::begin(&c)?;
    while !session.is_complete() {
        let b = session.bounds_for_next()?;
        // take the midpoint, or the upper root once the vector is pinned
        let v = match b.kind {
            BoundKind::Interval => b.center,
            BoundKind::Endpoints => b.upper,
        };
        println!("entry {}: [{:.4}, {:.4}] -> {v:.4}", session.cursor(), b.lower, b.upper);
        session.choose(v)?;
    }
    let spec = session.finalize()?;
    println!("expanded matrix:{}", spec.expanded_matrix());

    match CorrelationSpec::from_values(&c, &[0.95, -0.9]) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
