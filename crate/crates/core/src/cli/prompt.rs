use std::io::{BufRead, Write};

use crate::corrbounds::{BoundKind, Bounds, BoundsSession, CorrelationSpec};
use crate::error::{Error, Result};

/// Half a unit in the sixth decimal: typed-back bounds are snapped to the
/// true bound when they are this close.
const DISPLAY_SLACK: f64 = 5e-7 + 1e-12;

pub fn describe(b: &Bounds) -> String {
    match b.kind {
        BoundKind::Interval => format!("[{:.6}, {:.6}]", b.lower, b.upper),
        BoundKind::Endpoints => format!("{:.6} or {:.6}", b.lower, b.upper),
    }
}

/// Reads one correlation per basis column, showing the live bounds and
/// re-asking until the answer is admissible.
pub fn prompt_correlations<R: BufRead, W: Write>(
    mut session: BoundsSession,
    labels: &[String],
    mut input: R,
    mut output: W,
) -> Result<CorrelationSpec> {
    let mut line = String::new();
    while !session.is_complete() {
        let i = session.cursor();
        let b = session.bounds_for_next()?;
        write!(output, "correlation to {} ({}): ", labels[i], describe(&b))?;
        output.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Err(Error::IncompleteSpec {
                chosen: i,
                expected: session.len(),
            });
        }
        let Ok(mut v) = line.trim().parse::<f64>() else {
            writeln!(output, "  not a number: `{}`", line.trim())?;
            continue;
        };
        if (v - b.lower).abs() <= DISPLAY_SLACK {
            v = b.lower;
        } else if (v - b.upper).abs() <= DISPLAY_SLACK {
            v = b.upper;
        }
        if let Err(e) = session.choose(v) {
            writeln!(output, "  {e}")?;
        }
    }
    session.finalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn labels() -> Vec<String> {
        vec!["a".into(), "b".into(), "prior".into()]
    }

    fn c() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.5, 1.0, 0.1, 0.2, 0.1, 1.0])
    }

    #[test]
    fn refuses_out_of_range_and_garbage() {
        let session = BoundsSession::begin(&c()).unwrap();
        let b1 = {
            let mut s = session.clone();
            s.choose(0.9).unwrap();
            s.bounds_for_next().unwrap()
        };
        let input = format!("abc\n0.9\n{}\n{:.6}\n{:.6}\n", b1.upper + 0.1, b1.upper, 5.0);
        let mut out = Vec::new();
        let err = prompt_correlations(session.clone(), &labels(), input.as_bytes(), &mut out);
        // 5.0 is never admissible, then input ends
        assert!(matches!(err, Err(Error::IncompleteSpec { chosen: 2, .. })));
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("not a number"));
        assert!(text.contains("outside the valid range"));
    }

    #[test]
    fn accepts_displayed_endpoint() {
        let mut s = BoundsSession::begin(&c()).unwrap();
        s.choose(0.9).unwrap();
        s.choose(0.4).unwrap();
        let last = s.bounds_for_next().unwrap();
        let input = format!("0.9\n0.4\n{:.6}\n", last.lower);
        let spec = prompt_correlations(
            BoundsSession::begin(&c()).unwrap(),
            &labels(),
            input.as_bytes(),
            Vec::new(),
        )
        .unwrap();
        assert_eq!(spec.values()[2], last.lower);
    }
}
