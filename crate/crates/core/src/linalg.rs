//! Dense symmetric storage and a blocked Cholesky factorization.

use crate::error::{Error, Result};

/// Pivots at or below `PIVOT_RTOL · a_jj` are treated as a loss of
/// positive definiteness.
pub const PIVOT_RTOL: f64 = 64.0 * f64::EPSILON;

const BLOCK: usize = 64;
const TILE: usize = 128;

/// Square symmetric matrix in full row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        SymmetricMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Fills the lower triangle from `f(i, j)`, `j ≤ i`, and mirrors it.
    pub fn from_lower(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn add_to_diagonal(&mut self, i: usize, v: f64) {
        self.data[i * self.n + i] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let chunks = n / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}

/// Lower-triangular factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    // row-major; only the lower triangle is meaningful
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &SymmetricMatrix) -> Result<Self> {
        let n = a.n;
        let mut l = a.data.clone();
        let diag: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
        let mut panel = Vec::new();

        for k0 in (0..n).step_by(BLOCK) {
            let k1 = (k0 + BLOCK).min(n);
            let nb = k1 - k0;

            // diagonal block
            for j in k0..k1 {
                let row_j = &mut l[j * n..(j + 1) * n];
                let s = row_j[j] - dot(&row_j[k0..j], &row_j[k0..j]);
                if !s.is_finite() || s <= PIVOT_RTOL * diag[j].abs() {
                    return Err(Error::NotPositiveDefinite { pivot: j, value: s });
                }
                row_j[j] = s.sqrt();
                for i in j + 1..k1 {
                    let (upper, lower) = l.split_at_mut(i * n);
                    let row_j = &upper[j * n..j * n + n];
                    let row_i = &mut lower[..n];
                    row_i[j] = (row_i[j] - dot(&row_i[k0..j], &row_j[k0..j])) / row_j[j];
                }
            }

            // panel below the diagonal block
            {
                let (upper, lower) = l.split_at_mut(k1 * n);
                for row_i in lower.chunks_exact_mut(n) {
                    for j in k0..k1 {
                        let row_j = &upper[j * n..j * n + n];
                        row_i[j] = (row_i[j] - dot(&row_i[k0..j], &row_j[k0..j])) / row_j[j];
                    }
                }
            }

            // trailing update A22 -= L21 L21ᵀ on a contiguous copy of the panel
            let rest = n - k1;
            if rest == 0 {
                continue;
            }
            panel.clear();
            for i in k1..n {
                panel.extend_from_slice(&l[i * n + k0..i * n + k1]);
            }
            for jb in (0..rest).step_by(TILE) {
                let je = (jb + TILE).min(rest);
                for ii in jb..rest {
                    let pi = &panel[ii * nb..(ii + 1) * nb];
                    let row = &mut l[(k1 + ii) * n + k1..(k1 + ii) * n + n];
                    for jj in jb..je.min(ii + 1) {
                        row[jj] -= dot(pi, &panel[jj * nb..(jj + 1) * nb]);
                    }
                }
            }
        }
        Ok(Cholesky { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n, "right-hand side has wrong length");
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            y[i] = (y[i] - dot(row, &y[..i])) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let xi = y[i] / self.l[i * n + i];
            y[i] = xi;
            let row = &self.l[i * n..i * n + i];
            for (yp, lp) in y[..i].iter_mut().zip(row) {
                *yp -= lp * xi;
            }
        }
        y
    }

    /// `log det A`.
    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * self.l[i * self.n + i].ln()).sum()
    }
}
