use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

/// Row-wise softmax over the columns whose `col_mask` entry is true.
/// Masked columns get exactly zero weight. At least one column must be unmasked.
pub(crate) fn masked_softmax_rows(scores: ArrayView2<f64>, col_mask: &[bool]) -> Array2<f64> {
    let mut out = Array2::zeros(scores.raw_dim());
    for (row, mut dst) in scores.outer_iter().zip(out.outer_iter_mut()) {
        let max = row
            .iter()
            .zip(col_mask)
            .filter(|(_, &m)| m)
            .map(|(&s, _)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for ((d, &s), &m) in dst.iter_mut().zip(row.iter()).zip(col_mask) {
            if m {
                *d = (s - max).exp();
                sum += *d;
            }
        }
        dst.mapv_inplace(|x| x / sum);
    }
    out
}

/// Gradient through a row softmax: `A ⊙ (dA − rowsum(dA ⊙ A))`.
pub(crate) fn softmax_rows_backward(a: &Array2<f64>, da: &Array2<f64>) -> Array2<f64> {
    let dots = (da * a).sum_axis(Axis(1));
    let mut out = da.clone();
    for (mut row, dot) in out.outer_iter_mut().zip(dots.iter()) {
        row.mapv_inplace(|x| x - dot);
    }
    out * a
}

pub(crate) fn masked_mean(x: &Array2<f64>, row_mask: &[bool]) -> Array1<f64> {
    let mut acc = Array1::zeros(x.ncols());
    let mut n = 0usize;
    for (row, &m) in x.outer_iter().zip(row_mask) {
        if m {
            acc += &row;
            n += 1;
        }
    }
    acc / n as f64
}

/// Column-wise max over unmasked rows, with the winning row per column.
pub(crate) fn masked_max(x: &Array2<f64>, row_mask: &[bool]) -> (Array1<f64>, Vec<usize>) {
    let mut best = Array1::from_elem(x.ncols(), f64::NEG_INFINITY);
    let mut arg = vec![0usize; x.ncols()];
    for (i, (row, &m)) in x.outer_iter().zip(row_mask).enumerate() {
        if !m {
            continue;
        }
        for (j, &v) in row.iter().enumerate() {
            if v > best[j] {
                best[j] = v;
                arg[j] = i;
            }
        }
    }
    (best, arg)
}

pub(crate) fn xavier<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..=limit))
}

pub(crate) fn bias(n: usize) -> Array2<f64> {
    Array2::zeros((1, n))
}

/// Adds a `(1, n)` bias row to every row of `x`.
pub(crate) fn add_bias(x: Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    x + &b.row(0)
}

pub(crate) fn column_sums(x: &Array2<f64>) -> Array2<f64> {
    x.sum_axis(Axis(0)).insert_axis(Axis(0))
}

/// Outer product `a bᵀ` as a matrix.
pub(crate) fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let a2 = a.view().insert_axis(Axis(1));
    let b2 = b.view().insert_axis(Axis(0));
    a2.dot(&b2)
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn masked_softmax_zeroes_masked_columns() {
        let s = array![[1.0, 2.0, 3.0], [0.0, 0.0, 100.0]];
        let a = masked_softmax_rows(s.view(), &[true, false, true]);
        assert_eq!(a[[0, 1]], 0.0);
        assert!((a.row(0).sum() - 1.0).abs() < 1e-15);
        let e = (1.0f64 - 3.0).exp();
        assert!((a[[0, 0]] - e / (1.0 + e)).abs() < 1e-15);
        assert!(a.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn single_column_weight_is_exactly_one() {
        let a = masked_softmax_rows(array![[-7.3], [42.0]].view(), &[true]);
        assert_eq!(a, array![[1.0], [1.0]]);
    }

    #[test]
    fn mean_and_max_respect_mask() {
        let x = array![[1.0, 9.0], [3.0, -1.0], [100.0, 100.0]];
        let m = [true, true, false];
        assert_eq!(masked_mean(&x, &m), array![2.0, 4.0]);
        let (v, arg) = masked_max(&x, &m);
        assert_eq!(v, array![3.0, 9.0]);
        assert_eq!(arg, vec![1, 0]);
    }
}
