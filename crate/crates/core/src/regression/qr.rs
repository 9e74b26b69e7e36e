//! Householder QR for tall, dense least-squares problems.

/// Compact Householder factorization of an n×p matrix (n ≥ p), column-major.
///
/// The strict lower part of each column holds the reflector vector; `r_diag`
/// holds the diagonal of R and the upper triangle holds the rest of R.
#[derive(Debug, Clone)]
pub(crate) struct HouseholderQr {
    rows: usize,
    cols: usize,
    qr: Vec<f64>,
    r_diag: Vec<f64>,
    // Each reflector is I - tau * v v^T with v[k] = 1 implicitly scaled.
    tau: Vec<f64>,
}

impl HouseholderQr {
    /// `columns[j]` is the j-th column, all of length `rows`.
    pub(crate) fn factor(columns: &[Vec<f64>], rows: usize) -> Self {
        let cols = columns.len();
        debug_assert!(rows >= cols);
        let mut qr: Vec<f64> = columns.iter().flatten().copied().collect();
        let mut r_diag = vec![0.0; cols];
        let mut tau = vec![0.0; cols];

        for k in 0..cols {
            let base = k * rows;
            let norm = qr[base + k..base + rows]
                .iter()
                .fold(0.0f64, |acc, v| acc.hypot(*v));
            if norm == 0.0 {
                r_diag[k] = 0.0;
                continue;
            }
            let alpha = if qr[base + k] > 0.0 { -norm } else { norm };
            // v = x - alpha e1, stored in place; v^T v = 2 norm (norm + |x_k|)
            qr[base + k] -= alpha;
            let vtv = 2.0 * norm * (norm + (qr[base + k] + alpha).abs());
            tau[k] = 2.0 / vtv;
            r_diag[k] = alpha;

            for j in k + 1..cols {
                let cj = j * rows;
                let dot: f64 = (k..rows).map(|i| qr[base + i] * qr[cj + i]).sum();
                let s = tau[k] * dot;
                for i in k..rows {
                    qr[cj + i] -= s * qr[base + i];
                }
            }
        }
        Self {
            rows,
            cols,
            qr,
            r_diag,
            tau,
        }
    }

    pub(crate) fn r_diag(&self) -> &[f64] {
        &self.r_diag
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.r_diag[i]
        } else {
            self.qr[j * self.rows + i]
        }
    }

    /// Q^T y.
    pub(crate) fn apply_qt(&self, y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        for k in 0..self.cols {
            if self.tau[k] == 0.0 {
                continue;
            }
            let base = k * self.rows;
            let dot: f64 = (k..self.rows).map(|i| self.qr[base + i] * out[i]).sum();
            let s = self.tau[k] * dot;
            for i in k..self.rows {
                out[i] -= s * self.qr[base + i];
            }
        }
        out
    }

    /// Least-squares solution of X b = y. Assumes R is nonsingular.
    pub(crate) fn solve(&self, y: &[f64]) -> Vec<f64> {
        let qty = self.apply_qt(y);
        let mut b = qty[..self.cols].to_vec();
        for i in (0..self.cols).rev() {
            let mut acc = b[i];
            for j in i + 1..self.cols {
                acc -= self.r(i, j) * b[j];
            }
            b[i] = acc / self.r_diag[i];
        }
        b
    }

    /// Diagonal of (X^T X)^{-1} = R^{-1} R^{-T}.
    pub(crate) fn xtx_inverse_diag(&self) -> Vec<f64> {
        let p = self.cols;
        // Column j of R^{-1} by back substitution on R z = e_j.
        let mut rinv = vec![0.0; p * p];
        for j in 0..p {
            for i in (0..=j).rev() {
                let mut acc = if i == j { 1.0 } else { 0.0 };
                for k in i + 1..=j {
                    acc -= self.r(i, k) * rinv[k * p + j];
                }
                rinv[i * p + j] = acc / self.r_diag[i];
            }
        }
        (0..p)
            .map(|i| (i..p).map(|k| rinv[i * p + k].powi(2)).sum())
            .collect()
    }
}
