//! Symmetric banded matrices and their Cholesky factorization.

use crate::error::{Error, Result};

/// Symmetric matrix with half-bandwidth `bw`; only the lower band is stored,
/// row by row: entry `(i, j)` with `i − bw ≤ j ≤ i` lives at
/// `i·(bw+1) + (j + bw − i)`.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        let bw = bw.min(n.saturating_sub(1));
        BandMatrix {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        (i - j <= self.bw).then(|| i * (self.bw + 1) + (j + self.bw - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` to the symmetric pair `(i, j)`, `(j, i)`. Panics outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside bandwidth {}", self.bw));
        self.data[s] += v;
    }

    pub fn add_diagonal(&mut self, tau: f64) {
        for i in 0..self.n {
            self.data[i * (self.bw + 1) + self.bw] += tau;
        }
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.n)
            .map(|i| self.data[i * (self.bw + 1) + self.bw].abs())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.data[i * (self.bw + 1) + (j + self.bw - i)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// Row-oriented Cholesky `A = L Lᵀ`; fails if a pivot is not positive.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut l = self.data.clone();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                // L[i][k] and L[j][k] for k in max(lo, j−bw)..j
                let k0 = lo.max(j.saturating_sub(bw));
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                let mut s = l[ri + j];
                let (a, b) = (&l[ri + k0..ri + j], &l[rj + k0..rj + j]);
                s -= a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
                if j == i {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Singular(format!("non-positive pivot {s:e} at row {i}")));
                    }
                    l[ri + i] = s.sqrt();
                } else {
                    l[ri + j] = s / l[rj + j];
                }
            }
        }
        Ok(BandCholesky { n, bw, l })
    }
}

pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let ri = i * w + bw - i;
            let s: f64 = (lo..i).map(|k| self.l[ri + k] * x[k]).sum();
            x[i] = (x[i] - s) / self.l[ri + i];
        }
        for i in (0..n).rev() {
            let ri = i * w + bw - i;
            x[i] /= self.l[ri + i];
            let xi = x[i];
            let lo = i.saturating_sub(bw);
            for k in lo..i {
                x[k] -= self.l[ri + k] * xi;
            }
        }
        x
    }
}
