use crate::error::{Error, Result};

/// Variation norm `max(w) - min(w)`; zero for an empty slice.
pub fn variation(w: &[f64]) -> f64 {
    let (lo, hi) = w
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    if w.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Hilbert projective distance `||log u - log u2||_var` over the shared
/// positive support.
///
/// Coordinates where both vectors vanish are ignored; a coordinate that
/// vanishes in exactly one of them is an error.
pub fn hilbert_distance(u: &[f64], u2: &[f64]) -> Result<f64> {
    if u.len() != u2.len() {
        return Err(Error::Dimension {
            expected: u.len(),
            found: u2.len(),
        });
    }
    let mut diffs = Vec::with_capacity(u.len());
    for (index, (&a, &b)) in u.iter().zip(u2).enumerate() {
        match (a > 0.0, b > 0.0) {
            (true, true) => diffs.push(a.ln() - b.ln()),
            (false, false) => {}
            _ => return Err(Error::SupportMismatch { index }),
        }
    }
    Ok(variation(&diffs))
}

/// Same distance for vectors already in log space, where `-inf` marks zeros.
pub fn hilbert_distance_log(log_u: &[f64], log_u2: &[f64]) -> Result<f64> {
    if log_u.len() != log_u2.len() {
        return Err(Error::Dimension {
            expected: log_u.len(),
            found: log_u2.len(),
        });
    }
    let mut diffs = Vec::with_capacity(log_u.len());
    for (index, (&a, &b)) in log_u.iter().zip(log_u2).enumerate() {
        match (a.is_finite(), b.is_finite()) {
            (true, true) => diffs.push(a - b),
            (false, false) => {}
            _ => return Err(Error::SupportMismatch { index }),
        }
    }
    Ok(variation(&diffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sinkhorn::kernel::build_kernel;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(
            hilbert_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            hilbert_distance(&[1.0, 2.0], &[2.0, 1.0]).unwrap(),
            2.0 * 2f64.ln(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            hilbert_distance(&[1.0, 1.0], &[5.0, 5.0]).unwrap(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn errors() {
        assert!(matches!(
            hilbert_distance(&[1.0], &[1.0, 2.0]),
            Err(Error::Dimension { .. })
        ));
        assert_eq!(
            hilbert_distance(&[1.0, 0.0, 2.0], &[1.0, 3.0, 2.0]),
            Err(Error::SupportMismatch { index: 1 })
        );
        assert_eq!(
            hilbert_distance(&[1.0, 0.0, 2.0], &[2.0, 0.0, 1.0]).unwrap(),
            2.0 * 2f64.ln()
        );
    }

    #[test]
    fn log_variant_agrees() {
        let u = [0.3, 0.0, 2.0, 5.0];
        let w = [1.1, 0.0, 0.2, 4.0];
        let lu: Vec<f64> = u.iter().map(|x: &f64| x.ln()).collect();
        let lw: Vec<f64> = w.iter().map(|x: &f64| x.ln()).collect();
        assert_abs_diff_eq!(
            hilbert_distance(&u, &w).unwrap(),
            hilbert_distance_log(&lu, &lw).unwrap(),
            epsilon = 1e-14
        );
    }

    proptest! {
        #[test]
        fn scale_invariant(u in prop::collection::vec(0.01f64..10.0, 1..20), s in 0.01f64..100.0, t in 0.01f64..100.0) {
            let w: Vec<f64> = u.iter().rev().copied().collect();
            let scaled_u: Vec<f64> = u.iter().map(|x| x * s).collect();
            let scaled_w: Vec<f64> = w.iter().map(|x| x * t).collect();
            let a = hilbert_distance(&u, &w).unwrap();
            let b = hilbert_distance(&scaled_u, &scaled_w).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a));
        }

        #[test]
        fn kernel_contracts(
            pair in (1usize..=16).prop_flat_map(|d| (
                prop::collection::vec(-3.0f64..3.0, d),
                prop::collection::vec(-3.0f64..3.0, d),
            )),
            eps in 0.5f64..50.0,
        ) {
            let (a, b) = pair;
            let d = a.len();
            let k = build_kernel(d, eps).unwrap();
            let u: Vec<f64> = a.iter().map(|x| x.exp()).collect();
            let w: Vec<f64> = b.iter().map(|x| x.exp()).collect();
            let apply = |x: &[f64]| -> Vec<f64> {
                (0..d).map(|i| (0..d).map(|j| k.get(i, j) * x[j]).sum()).collect()
            };
            let before = hilbert_distance(&u, &w).unwrap();
            let after = hilbert_distance(&apply(&u), &apply(&w)).unwrap();
            prop_assert!(after <= k.lambda() * before + 1e-12);
        }
    }
}
