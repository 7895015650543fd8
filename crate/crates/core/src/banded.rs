//! Symmetric banded matrices with a Cholesky solver.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedSym {
    dim: usize,
    bw: usize,
    // upper band, row-major: data[i * (bw + 1) + (j - i)] = a_ij for i <= j <= i + bw
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(dim: usize, bw: usize) -> Self {
        BandedSym { dim, bw, data: vec![0.0; dim * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if j - i > self.bw {
            0.0
        } else {
            self.data[i * (self.bw + 1) + (j - i)]
        }
    }

    /// Adds `v` to entry `(i, j)` (and its mirror).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        assert!(j - i <= self.bw, "entry ({i}, {j}) outside band");
        self.data[i * (self.bw + 1) + (j - i)] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for i in 0..self.dim {
            let hi = (i + self.bw).min(self.dim - 1);
            for j in i..=hi {
                let a = self.data[i * (self.bw + 1) + (j - i)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let (n, bw) = (self.dim, self.bw);
        let w = bw + 1;
        // l[i * w + (i - j)] = L_ij for i - bw <= j <= i
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let j_lo = i.saturating_sub(bw);
            for j in j_lo..=i {
                let mut s = self.get(i, j);
                let p_lo = j_lo.max(j.saturating_sub(bw));
                for p in p_lo..j {
                    s -= l[i * w + (i - p)] * l[j * w + (j - p)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + (i - j)] = s / l[j * w];
                }
            }
        }
        Ok(BandedCholesky { dim: n, bw, l })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    dim: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.dim, self.bw);
        let w = bw + 1;
        assert_eq!(x.len(), n);
        for i in 0..n {
            let mut s = x[i];
            for p in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (i - p)] * x[p];
            }
            x[i] = s / self.l[i * w];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for q in (i + 1)..(i + w).min(n) {
                s -= self.l[q * w + (q - i)] * x[q];
            }
            x[i] = s / self.l[i * w];
        }
    }

    /// Column `j` of the inverse.
    pub fn inverse_column(&self, j: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.dim];
        e[j] = 1.0;
        self.solve_in_place(&mut e);
        e
    }
}
