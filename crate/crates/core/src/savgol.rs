//! Savitzky-Golay smoothing for training curves: least-squares polynomial
//! fit over a sliding window, evaluated at the window center. Near the
//! edges the window shrinks symmetrically (and the fit order drops with
//! it), so the output has the same length as the input and stays exact on
//! low-degree polynomials everywhere.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SavgolError {
    #[error("window must be odd, got {0}")]
    EvenWindow(usize),
    #[error("window must be at least 1")]
    ZeroWindow,
    #[error("polynomial order {order} needs a window larger than {window}")]
    OrderTooHigh { order: usize, window: usize },
}

/// Solve the square system `a x = b` by Gaussian elimination with partial
/// pivoting. `a` is row-major n x n and is consumed.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        assert!(
            diag.abs() > 1e-300,
            "normal equations are singular; window offsets must be distinct"
        );
        for row in (col + 1)..n {
            let factor = a[row][col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Convolution weights that evaluate the order-`order` least-squares fit
/// over integer offsets `-reach..=reach` at offset zero. Computed from the
/// normal equations: the center value is `e_0^T (A^T A)^{-1} A^T y`.
fn center_weights(reach: usize, order: usize) -> Vec<f64> {
    let window = 2 * reach + 1;
    let n = order + 1;
    let mut ata = vec![vec![0.0; n]; n];
    for r in 0..window {
        let x = r as f64 - reach as f64;
        let mut powers = vec![1.0; n];
        for c in 1..n {
            powers[c] = powers[c - 1] * x;
        }
        for i in 0..n {
            for j in 0..n {
                ata[i][j] += powers[i] * powers[j];
            }
        }
    }
    let mut e0 = vec![0.0; n];
    e0[0] = 1.0;
    let u = solve(ata, e0);
    (0..window)
        .map(|r| {
            let x = r as f64 - reach as f64;
            let mut acc = 0.0;
            let mut power = 1.0;
            for &uc in &u {
                acc += uc * power;
                power *= x;
            }
            acc
        })
        .collect()
}

/// Smooth `data` with window length `window` (odd) and polynomial order
/// `poly < window`. Returns a vector of the same length.
pub fn smooth(data: &[f64], window: usize, poly: usize) -> Result<Vec<f64>, SavgolError> {
    if window == 0 {
        return Err(SavgolError::ZeroWindow);
    }
    if window % 2 == 0 {
        return Err(SavgolError::EvenWindow(window));
    }
    if poly >= window {
        return Err(SavgolError::OrderTooHigh {
            order: poly,
            window,
        });
    }
    if data.is_empty() {
        return Ok(Vec::new());
    }

    let half = window / 2;
    let interior = center_weights(half, poly.min(2 * half));
    let mut out = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        let reach = half.min(i).min(data.len() - 1 - i);
        let edge_weights;
        let weights = if reach == half {
            &interior
        } else {
            edge_weights = center_weights(reach, poly.min(2 * reach));
            &edge_weights
        };
        let value: f64 = weights
            .iter()
            .enumerate()
            .map(|(r, w)| w * data[i - reach + r])
            .sum();
        out.push(value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent check: fit the window polynomial directly by solving
    /// the Vandermonde least-squares problem for its coefficients and
    /// evaluating at the center, without the weight-vector shortcut.
    fn direct_window_fit(data: &[f64], center: usize, reach: usize, order: usize) -> f64 {
        let n = order + 1;
        let mut ata = vec![vec![0.0; n]; n];
        let mut aty = vec![0.0; n];
        for r in 0..(2 * reach + 1) {
            let x = r as f64 - reach as f64;
            let y = data[center - reach + r];
            let mut powers = vec![1.0; n];
            for c in 1..n {
                powers[c] = powers[c - 1] * x;
            }
            for i in 0..n {
                for j in 0..n {
                    ata[i][j] += powers[i] * powers[j];
                }
            }
            for (i, p) in powers.iter().enumerate() {
                aty[i] += p * y;
            }
        }
        solve(ata, aty)[0]
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(smooth(&[1.0], 0, 0), Err(SavgolError::ZeroWindow));
        assert_eq!(smooth(&[1.0], 4, 1), Err(SavgolError::EvenWindow(4)));
        assert_eq!(
            smooth(&[1.0], 5, 5),
            Err(SavgolError::OrderTooHigh { order: 5, window: 5 })
        );
        assert_eq!(smooth(&[], 5, 2), Ok(Vec::new()));
    }

    #[test]
    fn window_one_is_the_identity() {
        let data = [3.0, -1.0, 4.0, 1.0, -5.0];
        assert_eq!(smooth(&data, 1, 0).unwrap(), data.to_vec());
    }

    #[test]
    fn moving_average_weights_for_order_zero() {
        // Order 0 must reduce to the plain mean of the window.
        let data = [0.0, 3.0, 6.0, 3.0, 0.0];
        let smoothed = smooth(&data, 3, 0).unwrap();
        assert_relative_eq!(smoothed[1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(smoothed[2], 4.0, epsilon = 1e-12);
        // Edges shrink to a single point.
        assert_relative_eq!(smoothed[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn matches_direct_polynomial_fits_on_noisy_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let data: Vec<f64> = (0..60).map(|_| rng.gen_range(-10.0..10.0)).collect();
        for &(window, poly) in &[(5usize, 2usize), (9, 3), (21, 4)] {
            let smoothed = smooth(&data, window, poly).unwrap();
            let half = window / 2;
            for i in 0..data.len() {
                let reach = half.min(i).min(data.len() - 1 - i);
                let expected = direct_window_fit(&data, i, reach, poly.min(2 * reach));
                assert_relative_eq!(smoothed[i], expected, epsilon = 1e-8);
            }
        }
    }

    proptest! {
        /// Exact on polynomials of degree <= poly, including the edges.
        #[test]
        fn reproduces_low_degree_polynomials(
            seed in 0u64..500,
            window in prop::sample::select(vec![3usize, 5, 7, 11, 51]),
            poly in 0usize..4,
            len in 1usize..80,
        ) {
            prop_assume!(poly < window);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coeffs: Vec<f64> = (0..=poly).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let data: Vec<f64> = (0..len)
                .map(|i| {
                    let x = i as f64 * 0.1;
                    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
                })
                .collect();
            let smoothed = smooth(&data, window, poly).unwrap();
            for (s, d) in smoothed.iter().zip(&data) {
                prop_assert!((s - d).abs() < 1e-7 * d.abs().max(1.0));
            }
        }

        /// The window weights always sum to one, so constant data passes
        /// through unchanged for every valid window/order pair.
        #[test]
        fn weights_sum_to_one(
            window in prop::sample::select(vec![3usize, 5, 9, 15]),
            poly in 0usize..5,
        ) {
            prop_assume!(poly < window);
            let data = vec![7.25; 40];
            let smoothed = smooth(&data, window, poly).unwrap();
            for s in smoothed {
                prop_assert!((s - 7.25).abs() < 1e-9);
            }
        }
    }
}
