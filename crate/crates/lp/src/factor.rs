//! Dense explicit basis inverse with rank-one pivot updates.

/// Row-major `m × m` inverse of the current basis matrix.
#[derive(Debug, Clone)]
pub(crate) struct DenseInverse {
    m: usize,
    data: Vec<f64>,
}

/// Basis positions whose columns turned out to be linearly dependent,
/// together with the rows that were left without a pivot.
#[derive(Debug)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub free_rows: Vec<usize>,
}

const SINGULAR_TOL: f64 = 1e-11;

impl DenseInverse {
    pub fn identity_scaled(m: usize, diag: f64) -> Self {
        let mut data = vec![0.0; m * m];
        for i in 0..m {
            data[i * m + i] = diag;
        }
        Self { m, data }
    }

    /// Inverts the matrix whose `k`-th column is `columns[k]` (sparse, `(row, value)`).
    pub fn factor(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        debug_assert_eq!(columns.len(), m);
        // Gauss-Jordan on [B | I] with partial pivoting by column.
        let mut a = vec![0.0; m * m];
        for (k, col) in columns.iter().enumerate() {
            for &(i, v) in col {
                a[i * m + k] += v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        // row_of_pos[k] = row chosen as pivot for basis position k
        let mut row_of_pos = vec![usize::MAX; m];
        let mut pivoted = vec![false; m];
        let mut singular = Vec::new();
        for k in 0..m {
            let mut best = None;
            let mut best_abs = SINGULAR_TOL;
            for i in 0..m {
                if !pivoted[i] {
                    let v = a[i * m + k].abs();
                    if v > best_abs {
                        best_abs = v;
                        best = Some(i);
                    }
                }
            }
            let Some(r) = best else {
                singular.push(k);
                continue;
            };
            pivoted[r] = true;
            row_of_pos[k] = r;
            let p = a[r * m + k];
            for j in 0..m {
                a[r * m + j] /= p;
                inv[r * m + j] /= p;
            }
            for i in 0..m {
                if i == r {
                    continue;
                }
                let f = a[i * m + k];
                if f == 0.0 {
                    continue;
                }
                for j in 0..m {
                    a[i * m + j] -= f * a[r * m + j];
                    inv[i * m + j] -= f * inv[r * m + j];
                }
            }
        }
        if !singular.is_empty() {
            let free_rows = (0..m).filter(|&i| !pivoted[i]).collect();
            return Err(Singular { positions: singular, free_rows });
        }
        // Row r of `inv` now belongs to basis position k where row_of_pos[k] = r;
        // permute so that row k of the result is the k-th row of B⁻¹.
        let mut data = vec![0.0; m * m];
        for k in 0..m {
            let r = row_of_pos[k];
            data[k * m..(k + 1) * m].copy_from_slice(&inv[r * m..(r + 1) * m]);
        }
        Ok(Self { m, data })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    /// `B⁻¹ a` for a sparse column `a`.
    pub fn times_sparse(&self, col: &[(usize, f64)], out: &mut [f64]) {
        let m = self.m;
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(j, v) in col {
            for i in 0..m {
                out[i] += self.data[i * m + j] * v;
            }
        }
    }

    /// `yᵀ B⁻¹` for a dense `y`, skipping zero entries.
    pub fn left_times(&self, y: &[f64], out: &mut [f64]) {
        let m = self.m;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            let row = &self.data[i * m..(i + 1) * m];
            for (o, r) in out.iter_mut().zip(row) {
                *o += yi * r;
            }
        }
    }

    /// Replaces basis position `r` given `alpha = B⁻¹ a_q` of the entering column.
    pub fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let p = alpha[r];
        {
            let row_r = &mut self.data[r * m..(r + 1) * m];
            row_r.iter_mut().for_each(|v| *v /= p);
        }
        let (before, rest) = self.data.split_at_mut(r * m);
        let (row_r, after) = rest.split_at_mut(m);
        for (i, chunk) in before.chunks_exact_mut(m).enumerate() {
            let f = alpha[i];
            if f != 0.0 {
                chunk.iter_mut().zip(row_r.iter()).for_each(|(v, pr)| *v -= f * pr);
            }
        }
        for (k, chunk) in after.chunks_exact_mut(m).enumerate() {
            let f = alpha[r + 1 + k];
            if f != 0.0 {
                chunk.iter_mut().zip(row_r.iter()).for_each(|(v, pr)| *v -= f * pr);
            }
        }
    }
}
