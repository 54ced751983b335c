//! Kernel binarization strategies and the straight-through estimator.
//!
//! The hamming quantizer places a single 1 at each column's argmax row,
//! which is what makes a kernel readable as a k-mer. Heaviside and sign are
//! the conventional elementwise binarizations kept for comparison runs;
//! `none` leaves weights untouched (the full-precision baseline).

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3, ArrayView2, Dimension};

use crate::error::{Error, Result};

/// Selectable binarization strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuantizerKind {
    /// Column-argmax binarization: exactly one 1 per kernel column.
    Hamming,
    /// Elementwise threshold at 0 onto {0, 1}.
    Heaviside,
    /// Elementwise threshold at 0 onto {-1, +1}.
    Sign,
    /// Identity (full-precision baseline).
    None,
}

impl QuantizerKind {
    pub const ALL: [QuantizerKind; 4] = [
        QuantizerKind::Hamming,
        QuantizerKind::Heaviside,
        QuantizerKind::Sign,
        QuantizerKind::None,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            QuantizerKind::Hamming => "hamming",
            QuantizerKind::Heaviside => "heaviside",
            QuantizerKind::Sign => "sign",
            QuantizerKind::None => "none",
        }
    }
}

impl fmt::Display for QuantizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuantizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hamming" => Ok(QuantizerKind::Hamming),
            "heaviside" => Ok(QuantizerKind::Heaviside),
            "sign" => Ok(QuantizerKind::Sign),
            "none" => Ok(QuantizerKind::None),
            other => Err(Error::validation(format!(
                "unknown quantizer {other:?} (expected hamming | heaviside | sign | none)"
            ))),
        }
    }
}

fn ensure_finite(w: ArrayView2<'_, f64>, op: &str) -> Result<()> {
    if w.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{op} input contains NaN or infinity")))
    }
}

/// Binarizes a kernel by column argmax: 1 at each column's maximum row, 0
/// elsewhere. Ties go to the lowest row index.
pub fn quantize_hamming(weights: &Array2<f64>) -> Result<Array2<f64>> {
    ensure_finite(weights.view(), "quantize_hamming")?;
    let (rows, cols) = weights.dim();
    if rows == 0 {
        return Err(Error::validation("kernel must have at least one row"));
    }
    let mut out = Array2::<f64>::zeros((rows, cols));
    for j in 0..cols {
        let mut best_row = 0;
        let mut best = weights[[0, j]];
        for i in 1..rows {
            if weights[[i, j]] > best {
                best = weights[[i, j]];
                best_row = i;
            }
        }
        out[[best_row, j]] = 1.0;
    }
    Ok(out)
}

/// Elementwise Heaviside step: `x >= 0` maps to 1, else 0.
pub fn quantize_heaviside(weights: &Array2<f64>) -> Result<Array2<f64>> {
    ensure_finite(weights.view(), "quantize_heaviside")?;
    Ok(weights.mapv(|x| if x >= 0.0 { 1.0 } else { 0.0 }))
}

/// Elementwise sign: `x >= 0` maps to +1, else -1.
pub fn quantize_sign(weights: &Array2<f64>) -> Result<Array2<f64>> {
    ensure_finite(weights.view(), "quantize_sign")?;
    Ok(weights.mapv(|x| if x >= 0.0 { 1.0 } else { -1.0 }))
}

/// Applies the chosen quantizer to a full kernel stack `[K x m x k]`.
pub fn quantize_kernels(kernels: &Array3<f64>, kind: QuantizerKind) -> Result<Array3<f64>> {
    match kind {
        QuantizerKind::None => Ok(kernels.clone()),
        QuantizerKind::Heaviside | QuantizerKind::Sign => {
            if !kernels.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("kernel weights contain NaN or infinity".into()));
            }
            Ok(match kind {
                QuantizerKind::Heaviside => kernels.mapv(|x| if x >= 0.0 { 1.0 } else { 0.0 }),
                _ => kernels.mapv(|x| if x >= 0.0 { 1.0 } else { -1.0 }),
            })
        }
        QuantizerKind::Hamming => {
            let mut out = kernels.clone();
            for mut kernel in out.outer_iter_mut() {
                let q = quantize_hamming(&kernel.to_owned())?;
                kernel.assign(&q);
            }
            Ok(out)
        }
    }
}

/// Straight-through estimator: the gradient computed for the binarized
/// weights is handed to the real-valued weights unchanged.
pub fn ste_passthrough<D: Dimension>(grad_wb: ndarray::Array<f64, D>) -> ndarray::Array<f64, D> {
    grad_wb
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use proptest::prelude::*;

    #[test]
    fn hamming_matches_worked_example() {
        let w = arr2(&[[0.22, 0.43, 0.78], [0.65, 0.62, 0.21], [0.97, 0.31, 0.36]]);
        let expected = arr2(&[[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]);
        assert_eq!(quantize_hamming(&w).unwrap(), expected);
    }

    #[test]
    fn hamming_is_idempotent_on_unique_maxima() {
        let w = arr2(&[[0.9, 0.1], [0.2, 0.8]]);
        let q = quantize_hamming(&w).unwrap();
        assert_eq!(quantize_hamming(&q).unwrap(), q);
    }

    #[test]
    fn hamming_breaks_ties_to_lowest_row() {
        let w = arr2(&[[0.5], [0.5], [0.5]]);
        let q = quantize_hamming(&w).unwrap();
        assert_eq!(q, arr2(&[[1.0], [0.0], [0.0]]));
    }

    #[test]
    fn hamming_rejects_non_finite() {
        let w = arr2(&[[f64::NAN], [0.0]]);
        assert!(quantize_hamming(&w).is_err());
    }

    #[test]
    fn heaviside_and_sign_threshold_at_zero() {
        let w = arr2(&[[-1.0, 0.0, 2.0]]);
        assert_eq!(quantize_heaviside(&w).unwrap(), arr2(&[[0.0, 1.0, 1.0]]));
        assert_eq!(quantize_sign(&w).unwrap(), arr2(&[[-1.0, 1.0, 1.0]]));
    }

    #[test]
    fn heaviside_all_negative_is_all_zero() {
        let w = arr2(&[[-0.5, -2.0], [-0.1, -3.0]]);
        assert_eq!(quantize_heaviside(&w).unwrap().sum(), 0.0);
    }

    #[test]
    fn sign_is_idempotent() {
        let w = arr2(&[[-0.3, 0.7], [1.5, -2.0]]);
        let once = quantize_sign(&w).unwrap();
        assert_eq!(quantize_sign(&once).unwrap(), once);
    }

    #[test]
    fn kind_round_trips_through_strings() {
        for kind in QuantizerKind::ALL {
            assert_eq!(kind.as_str().parse::<QuantizerKind>().unwrap(), kind);
        }
        assert!("foo".parse::<QuantizerKind>().is_err());
    }

    #[test]
    fn ste_is_the_identity() {
        let g = arr2(&[[1.5, -2.0], [0.0, 3.25]]);
        assert_eq!(ste_passthrough(g.clone()), g);
        let zero = Array2::<f64>::zeros((2, 3));
        assert_eq!(ste_passthrough(zero.clone()), zero);
    }

    fn finite_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
        proptest::collection::vec(-1e3f64..1e3, rows * cols)
            .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
    }

    proptest! {
        #[test]
        fn hamming_columns_are_stochastic(w in finite_matrix(5, 4)) {
            let q = quantize_hamming(&w).unwrap();
            for j in 0..4 {
                let col = q.column(j);
                prop_assert!(col.iter().all(|&v| v == 0.0 || v == 1.0));
                prop_assert_eq!(col.sum(), 1.0);
            }
        }

        #[test]
        fn hamming_argmax_is_scale_invariant(w in finite_matrix(4, 3), c in 0.01f64..100.0) {
            let q = quantize_hamming(&w).unwrap();
            let scaled = quantize_hamming(&w.mapv(|x| c * x)).unwrap();
            prop_assert_eq!(q, scaled);
        }

        #[test]
        fn hamming_commutes_with_row_permutation(w in finite_matrix(4, 3), swap in 0usize..3) {
            // Swap two rows; the quantized output must swap the same rows.
            // Restrict to matrices with unique column maxima so the tie rule
            // cannot differ between the two orderings.
            let mut unique = true;
            for j in 0..3 {
                let col = w.column(j);
                let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if col.iter().filter(|&&v| v == max).count() > 1 {
                    unique = false;
                }
            }
            prop_assume!(unique);
            let (a, b) = (swap, swap + 1);
            let mut permuted = w.clone();
            for j in 0..3 {
                permuted.swap([a, j], [b, j]);
            }
            let mut expected = quantize_hamming(&w).unwrap();
            for j in 0..3 {
                expected.swap([a, j], [b, j]);
            }
            prop_assert_eq!(quantize_hamming(&permuted).unwrap(), expected);
        }
    }
}
