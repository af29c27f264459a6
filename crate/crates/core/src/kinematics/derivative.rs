use crate::error::{Error, Result};

/// Finite-difference time derivative of order 1, 2 or 3.
///
/// Each pass uses central differences on the actual timestamps, falling back to
/// forward/backward differences at the ends; higher orders repeat the pass.
pub fn derivative_series(xs: &[f64], ts: &[f64], order: usize) -> Result<Vec<f64>> {
    if !(1..=3).contains(&order) {
        return Err(Error::Domain(format!("derivative order {order} not in 1..=3")));
    }
    if xs.len() != ts.len() {
        return Err(Error::LengthMismatch { expected: ts.len(), got: xs.len() });
    }
    if xs.len() < order + 1 {
        return Err(Error::LengthMismatch { expected: order + 1, got: xs.len() });
    }
    if let Some(i) = ts.windows(2).position(|w| w[1] <= w[0] || w[1].is_nan()) {
        return Err(Error::NonMonotoneTime(i + 1));
    }
    let mut cur = xs.to_vec();
    for _ in 0..order {
        cur = first_difference(&cur, ts);
    }
    Ok(cur)
}

fn first_difference(xs: &[f64], ts: &[f64]) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                _ if i == n - 1 => (n - 2, n - 1),
                _ => (i - 1, i + 1),
            };
            (xs[b] - xs[a]) / (ts[b] - ts[a])
        })
        .collect()
}
