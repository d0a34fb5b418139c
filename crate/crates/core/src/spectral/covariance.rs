use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::par::{self, Execution};

/// Samples per inner block; keeps a block of rows cache resident while every
/// output row of the upper triangle sweeps over it.
const ROW_BLOCK: usize = 32;

/// Running sum of outer products `sum_i f_i f_i^T` with a sample count.
///
/// Only the upper triangle is accumulated, so the finalized matrix is
/// symmetric by construction. Each output entry receives its terms in row
/// order regardless of [`Execution`], so results do not depend on the thread
/// count, and splitting the same rows into different batches yields the same
/// bits.
#[derive(Debug, Clone)]
pub struct CovarianceAccumulator {
    dim: usize,
    // row-major dim x dim, entries with col >= row are live
    sum_outer: Vec<f64>,
    sum: Vec<f64>,
    count: u64,
    centered: bool,
    exec: Execution,
}

impl CovarianceAccumulator {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyMatrix { rows: 0, cols: 0 });
        }
        Ok(Self {
            dim,
            sum_outer: vec![0.0; dim * dim],
            sum: vec![0.0; dim],
            count: 0,
            centered: false,
            exec: Execution::default(),
        })
    }

    /// Subtract the outer product of the mean on finalize.
    pub fn centered(mut self, centered: bool) -> Self {
        self.centered = centered;
        self
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn accumulate_batch(&mut self, batch: &FeatureMatrix) -> Result<()> {
        if batch.cols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: batch.cols(),
            });
        }
        let d = self.dim;
        let data = batch.as_slice();
        for block in data.chunks(ROW_BLOCK * d) {
            par::for_each_chunk_mut(self.exec, &mut self.sum_outer, d, |a, out| {
                let out = &mut out[a..];
                for x in block.chunks_exact(d) {
                    let xa = x[a];
                    if xa == 0.0 {
                        continue;
                    }
                    for (o, &xb) in out.iter_mut().zip(&x[a..]) {
                        *o += xa * xb;
                    }
                }
            });
        }
        for x in batch.row_iter() {
            for (s, &v) in self.sum.iter_mut().zip(x) {
                *s += v;
            }
        }
        self.count += batch.rows() as u64;
        Ok(())
    }

    /// Adds another accumulator's state into this one.
    pub fn merge(&mut self, other: &CovarianceAccumulator) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        for (a, b) in self.sum_outer.iter_mut().zip(&other.sum_outer) {
            *a += b;
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        self.count += other.count;
        Ok(())
    }

    /// The raw accumulated `sum f f^T` as a full symmetric matrix.
    pub fn sum_outer(&self) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |i, j| {
            let (r, c) = if i <= j { (i, j) } else { (j, i) };
            self.sum_outer[r * d + c]
        })
    }

    pub fn mean(&self) -> Option<DVector<f64>> {
        (self.count > 0).then(|| DVector::from_iterator(self.dim, self.sum.iter().map(|s| s / self.count as f64)))
    }

    /// `sum_outer / count`, minus `mean mean^T` when centered. Exactly symmetric.
    pub fn finalize(&self) -> Result<DMatrix<f64>> {
        if self.count == 0 {
            return Err(Error::EmptyAccumulator);
        }
        let n = self.count as f64;
        let mut cov = self.sum_outer();
        cov /= n;
        if self.centered {
            let mean = self.mean().expect("count > 0");
            let d = self.dim;
            for j in 0..d {
                for i in 0..d {
                    cov[(i, j)] -= mean[i] * mean[j];
                }
            }
        }
        Ok(cov)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fm(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn single_row_outer_product() {
        let mut acc = CovarianceAccumulator::new(2).unwrap();
        acc.accumulate_batch(&fm(&[&[1.0, 2.0]])).unwrap();
        assert_eq!(acc.count(), 1);
        assert_eq!(acc.sum_outer(), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]));
        assert_eq!(
            acc.finalize().unwrap(),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0])
        );
    }

    #[test]
    fn hand_matrix() {
        // X^T X for X = [[1,0],[0,1],[1,1]] is [[2,1],[1,2]]
        let mut acc = CovarianceAccumulator::new(2).unwrap();
        acc.accumulate_batch(&fm(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]))
            .unwrap();
        assert_eq!(acc.sum_outer(), DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
        let cov = acc.finalize().unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]);
        assert!((cov - expect).abs().max() < 1e-15);
    }

    #[test]
    fn two_batches_equal_one() {
        let mut one = CovarianceAccumulator::new(2).unwrap();
        one.accumulate_batch(&fm(&[&[1.0, -3.0], &[0.5, 2.0]])).unwrap();
        let mut two = CovarianceAccumulator::new(2).unwrap();
        two.accumulate_batch(&fm(&[&[1.0, -3.0]])).unwrap();
        two.accumulate_batch(&fm(&[&[0.5, 2.0]])).unwrap();
        assert_eq!(one.count(), two.count());
        assert_eq!(one.finalize().unwrap(), two.finalize().unwrap());
    }

    #[test]
    fn centered_identical_rows_is_zero() {
        let mut acc = CovarianceAccumulator::new(3).unwrap().centered(true);
        acc.accumulate_batch(&fm(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]]))
            .unwrap();
        assert!(acc.finalize().unwrap().abs().max() < 1e-15);
    }

    #[test]
    fn errors() {
        let mut acc = CovarianceAccumulator::new(3).unwrap();
        assert!(matches!(acc.finalize(), Err(Error::EmptyAccumulator)));
        let err = acc.accumulate_batch(&fm(&[&[1.0, 2.0]])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, got: 2 }));
        assert_eq!(acc.count(), 0);
    }

    #[test]
    fn merge_matches_single_pass() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| (0..7).map(|j| ((i * 7 + j) as f64 * 0.37).sin()).collect())
            .collect();
        let mut whole = CovarianceAccumulator::new(7).unwrap();
        whole
            .accumulate_batch(&FeatureMatrix::from_rows(&rows).unwrap())
            .unwrap();
        let mut a = CovarianceAccumulator::new(7).unwrap();
        let mut b = CovarianceAccumulator::new(7).unwrap();
        a.accumulate_batch(&FeatureMatrix::from_rows(&rows[..20]).unwrap())
            .unwrap();
        b.accumulate_batch(&FeatureMatrix::from_rows(&rows[20..]).unwrap())
            .unwrap();
        b.merge(&a).unwrap();
        let diff = (whole.finalize().unwrap() - b.finalize().unwrap()).abs().max();
        assert!(diff < 1e-12);
        assert_eq!(b.count(), 50);
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|i| (0..40).map(|j| ((i * 40 + j) as f64).cos()).collect())
            .collect();
        let m = FeatureMatrix::from_rows(&rows).unwrap();
        let mut s = CovarianceAccumulator::new(40)
            .unwrap()
            .with_execution(Execution::Sequential);
        let mut p = CovarianceAccumulator::new(40)
            .unwrap()
            .with_execution(Execution::Parallel);
        s.accumulate_batch(&m).unwrap();
        p.accumulate_batch(&m).unwrap();
        assert_eq!(s.finalize().unwrap(), p.finalize().unwrap());
    }

    proptest! {
        #[test]
        fn batch_split_invariance(
            rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 5), 2..60),
            cuts in prop::collection::vec(any::<prop::sample::Index>(), 0..6),
        ) {
            let whole_m = FeatureMatrix::from_rows(&rows).unwrap();
            let mut whole = CovarianceAccumulator::new(5).unwrap();
            whole.accumulate_batch(&whole_m).unwrap();

            let mut points: Vec<usize> = cuts.iter().map(|c| c.index(rows.len())).collect();
            points.push(0);
            points.push(rows.len());
            points.sort_unstable();
            points.dedup();
            let mut split = CovarianceAccumulator::new(5).unwrap();
            for w in points.windows(2) {
                split.accumulate_batch(&FeatureMatrix::from_rows(&rows[w[0]..w[1]]).unwrap()).unwrap();
            }
            let diff = (whole.finalize().unwrap() - split.finalize().unwrap()).abs().max();
            prop_assert!(diff <= 1e-12);
            prop_assert_eq!(split.count(), rows.len() as u64);
            let cov = split.finalize().unwrap();
            prop_assert_eq!(cov.transpose(), cov);
        }
    }
}
