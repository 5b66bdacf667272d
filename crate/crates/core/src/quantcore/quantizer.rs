use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `n` evenly spaced levels on `[-1, 1]`, with level `i` (1-based) at
/// `-1 + 2(i-1)/(n-1)`.
///
/// A value maps to the lower of two adjacent levels iff it is strictly below
/// their midpoint, so midpoints round up. Values outside `[-1, 1]` saturate.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformQuantizer {
    levels: Vec<f64>,
    thresholds: Vec<f64>,
}

impl UniformQuantizer {
    pub fn new(arity: usize) -> Result<Self> {
        if arity < 2 {
            return Err(Error::param(format!("quantizer arity must be >= 2, got {arity}")));
        }
        if arity > u32::MAX as usize {
            return Err(Error::param("quantizer arity exceeds u32"));
        }
        let span = (arity - 1) as f64;
        let levels: Vec<f64> = (0..arity).map(|i| -1.0 + 2.0 * i as f64 / span).collect();
        let thresholds = levels.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
        Ok(UniformQuantizer { levels, thresholds })
    }

    pub fn arity(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Value of the 1-based level `index`.
    pub fn level(&self, index: u32) -> f64 {
        self.levels[index as usize - 1]
    }

    pub fn try_level(&self, index: u32) -> Result<f64> {
        if index == 0 || index as usize > self.arity() {
            return Err(Error::Incompatible(format!(
                "level index {index} outside 1..={}",
                self.arity()
            )));
        }
        Ok(self.level(index))
    }

    /// 1-based level index of a finite value.
    #[inline]
    pub fn index_of(&self, x: f64) -> u32 {
        self.thresholds.partition_point(|&t| t <= x) as u32 + 1
    }

    pub fn quantize(&self, x: f64) -> Result<(u32, f64)> {
        if !x.is_finite() {
            return Err(Error::NonFinite("quantizer input"));
        }
        let i = self.index_of(x);
        Ok((i, self.level(i)))
    }

    /// Element-wise quantization; returns `(indices, values)`.
    pub fn quantize_matrix(&self, a: &DMatrix<f64>) -> Result<(DMatrix<u32>, DMatrix<f64>)> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quantizer input"));
        }
        let indices = a.map(|v| self.index_of(v));
        let values = indices.map(|i| self.level(i));
        Ok((indices, values))
    }

    pub(crate) fn quantize_values(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        a.map(|v| self.level(self.index_of(v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binary_quantizer_is_sign() {
        let q = UniformQuantizer::new(2).unwrap();
        assert_eq!(q.levels(), &[-1.0, 1.0]);
        assert_eq!(q.quantize(0.3).unwrap(), (2, 1.0));
        assert_eq!(q.quantize(0.0).unwrap(), (2, 1.0));
        assert_eq!(q.quantize(-1e-300).unwrap(), (1, -1.0));
    }

    #[test]
    fn ternary_midpoint_rounds_up() {
        let q = UniformQuantizer::new(3).unwrap();
        assert_eq!(q.levels(), &[-1.0, 0.0, 1.0]);
        assert_eq!(q.quantize(0.4).unwrap().1, 0.0);
        assert_eq!(q.quantize(0.5).unwrap().1, 1.0);
        assert_eq!(q.quantize(-0.5).unwrap().1, 0.0);
        assert_eq!(q.quantize(-7.0).unwrap(), (1, -1.0));
        assert_eq!(q.quantize(7.0).unwrap(), (3, 1.0));
    }

    #[test]
    fn five_level_grid() {
        let q = UniformQuantizer::new(5).unwrap();
        assert_eq!(q.levels(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn rejects_bad_arity_and_nan() {
        assert!(UniformQuantizer::new(1).is_err());
        let q = UniformQuantizer::new(4).unwrap();
        assert!(q.quantize(f64::NAN).is_err());
        assert!(q.quantize(f64::INFINITY).is_err());
        assert!(q.try_level(0).is_err());
        assert!(q.try_level(5).is_err());
    }

    #[test]
    fn matrix_quantization() {
        let q = UniformQuantizer::new(3).unwrap();
        let (idx, vals) = q.quantize_matrix(&DMatrix::zeros(2, 3)).unwrap();
        assert!(idx.iter().all(|&i| i == 2));
        assert!(vals.iter().all(|&v| v == 0.0));

        let grid = DMatrix::from_row_slice(1, 3, &[-1.0, 0.0, 1.0]);
        assert_eq!(q.quantize_matrix(&grid).unwrap().1, grid);
    }

    #[test]
    fn matrix_matches_scalar_loop() {
        let q = UniformQuantizer::new(4).unwrap();
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.91, -0.12, 0.33, -0.77, 1.5, -1.5, 0.0, 0.334, -0.333, 0.332, 0.6, -0.01,
                0.999, -0.6667, 0.2, -0.2,
            ],
        );
        let (idx, vals) = q.quantize_matrix(&a).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                // scalar oracle walking the grid
                let x = a[(r, c)];
                let mut best = 1u32;
                for i in 2..=4u32 {
                    let mid = (q.level(i - 1) + q.level(i)) / 2.0;
                    if x >= mid {
                        best = i;
                    }
                }
                assert_eq!(idx[(r, c)], best);
                assert_eq!(vals[(r, c)], q.level(best));
            }
        }
    }

    proptest! {
        #[test]
        fn idempotent(n in 2usize..1025, i in 0usize..1024) {
            let q = UniformQuantizer::new(n).unwrap();
            let i = (i % n) as u32 + 1;
            let v = q.level(i);
            prop_assert_eq!(q.quantize(v).unwrap(), (i, v));
        }

        #[test]
        fn monotone(n in 2usize..64, x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let q = UniformQuantizer::new(n).unwrap();
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            prop_assert!(q.index_of(lo) <= q.index_of(hi));
        }

        #[test]
        fn nearest_level_off_midpoints(n in 2usize..64, x in -1.5f64..1.5) {
            let q = UniformQuantizer::new(n).unwrap();
            let (_, chosen) = q.quantize(x).unwrap();
            let d = (x - chosen).abs();
            for &l in q.levels() {
                if l != chosen {
                    let other = (x - l).abs();
                    // at an exact midpoint both distances tie
                    prop_assert!(d < other || (d - other).abs() < 1e-12);
                }
            }
        }
    }
}
