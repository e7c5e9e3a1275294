//! Banded Cholesky factorization for the shifted Helmholtz operator.

use crate::error::{Error, Result};

/// Lower-triangular band factor `L` with `A = L Lᵀ`.
///
/// Row `i` stores columns `i - bw ..= i` at offsets `0 ..= bw`; entries left of
/// column 0 are zero padding.
pub(crate) struct BandCholesky {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    /// Factorizes a symmetric matrix given by `entry(i, j)` for `i - bw <= j <= i`.
    pub(crate) fn factor(n: usize, bw: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let w = bw + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let k_lo = lo.max(j.saturating_sub(bw));
                let len = j - k_lo;
                let ri = i * w + (k_lo + bw - i);
                let rj = j * w + (k_lo + bw - j);
                let dot = dot(&data[ri..ri + len], &data[rj..rj + len]);
                let s = entry(i, j) - dot;
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite { row: i });
                    }
                    data[i * w + bw] = s.sqrt();
                } else {
                    data[i * w + (j + bw - i)] = s / data[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, data })
    }

    /// Solves `A x = b` in place.
    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        debug_assert_eq!(x.len(), n);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = &self.data[i * w + (lo + bw - i)..i * w + bw];
            let s = x[i] - dot(row, &x[lo..i]);
            x[i] = s / self.data[i * w + bw];
        }
        for i in (0..n).rev() {
            let xi = x[i] / self.data[i * w + bw];
            x[i] = xi;
            let lo = i.saturating_sub(bw);
            let row = &self.data[i * w + (lo + bw - i)..i * w + bw];
            for (xj, l) in x[lo..i].iter_mut().zip(row) {
                *xj -= l * xi;
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the loop vectorize.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    // Dense reference: 1-D Laplacian plus diagonal shift, bandwidth 1, and a
    // 2-D 5-point variant with bandwidth nx.
    fn laplacian_2d(nx: usize, ny: usize, shift: f64) -> impl Fn(usize, usize) -> f64 {
        move |i, j| {
            if i == j {
                4.0 + shift + 0.01 * (i % 7) as f64
            } else if (i - j == 1 && !i.is_multiple_of(nx)) || i - j == nx {
                -1.0
            } else {
                let _ = ny;
                0.0
            }
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn solves_against_dense_matvec() {
        let (nx, ny) = (7, 5);
        let n = nx * ny;
        let a = laplacian_2d(nx, ny, 0.3);
        let f = BandCholesky::factor(n, nx, &a).unwrap();
        let b: Vec<f64> = (0..n).map(|k| ((k * 37 % 11) as f64) - 5.0).collect();
        let mut x = b.clone();
        f.solve_in_place(&mut x);
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                let v = if j <= i { a(i, j) } else { a(j, i) };
                if (i as isize - j as isize).unsigned_abs() <= nx {
                    s += v * x[j];
                }
            }
            assert!((s - b[i]).abs() < 1e-12, "row {i}: {s} vs {}", b[i]);
        }
    }

    #[test]
    fn detects_indefinite() {
        let a = |i: usize, j: usize| if i == j { -1.0 } else { 0.0 };
        assert!(matches!(
            BandCholesky::factor(4, 1, a),
            Err(Error::NotPositiveDefinite { row: 0 })
        ));
    }
}
