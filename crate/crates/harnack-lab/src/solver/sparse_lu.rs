//! Left-looking sparse LU without pivoting (Gilbert-Peierls) in natural
//! ordering. Intended for the diagonally dominant M-matrices produced by
//! the assembler; a vanishing pivot is reported as a singularity.

use crate::error::{Error, Result};

pub struct SparseLu {
    n: usize,
    // column-compressed L (unit diagonal implicit) and U
    l_cols: Vec<Vec<(usize, f64)>>,
    u_cols: Vec<Vec<(usize, f64)>>,
}

const MAX_FILL: usize = 40_000_000;

impl SparseLu {
    /// Factor from CSR data of a square matrix.
    pub fn factor(n: usize, indptr: &[usize], indices: &[usize], data: &[f64]) -> Result<Self> {
        // transpose to CSC
        let mut col_counts = vec![0usize; n];
        for &j in indices {
            col_counts[j] += 1;
        }
        let mut cols: Vec<Vec<(usize, f64)>> = col_counts
            .iter()
            .map(|&c| Vec::with_capacity(c))
            .collect();
        for i in 0..n {
            for k in indptr[i]..indptr[i + 1] {
                cols[indices[k]].push((i, data[k]));
            }
        }

        let mut l_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut u_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut work = vec![0.0f64; n];
        let mut in_pattern = vec![false; n];
        let mut pattern: Vec<usize> = Vec::new();
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut fill = 0usize;

        for j in 0..n {
            // symbolic: nodes reachable from nnz(A(:,j)) through L's graph,
            // collected in topological (reverse post-) order
            pattern.clear();
            for &(i, _) in &cols[j] {
                if in_pattern[i] {
                    continue;
                }
                // DFS from i over edges k -> rows of L(:,k), k < j
                stack.push((i, 0));
                in_pattern[i] = true;
                while let Some(&(node, pos)) = stack.last() {
                    let deps: &[(usize, f64)] = if node < j { &l_cols[node] } else { &[] };
                    if pos < deps.len() {
                        stack.last_mut().unwrap().1 += 1;
                        let next = deps[pos].0;
                        if !in_pattern[next] {
                            in_pattern[next] = true;
                            stack.push((next, 0));
                        }
                    } else {
                        pattern.push(node);
                        stack.pop();
                    }
                }
            }
            // numeric: scatter A(:,j) and eliminate in topological order
            for &(i, v) in &cols[j] {
                work[i] = v;
            }
            for idx in (0..pattern.len()).rev() {
                let k = pattern[idx];
                if k < j {
                    let xk = work[k];
                    if xk != 0.0 {
                        for &(i, lv) in &l_cols[k] {
                            work[i] -= xk * lv;
                        }
                    }
                }
            }
            // split into U (rows <= j) and L (rows > j)
            let mut rows: Vec<usize> = pattern.clone();
            rows.sort_unstable();
            let mut pivot = 0.0;
            for &i in &rows {
                if i == j {
                    pivot = work[i];
                }
            }
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Singular(format!(
                    "zero pivot in sparse LU at column {j}"
                )));
            }
            for &i in &rows {
                let v = work[i];
                work[i] = 0.0;
                in_pattern[i] = false;
                if v == 0.0 {
                    continue;
                }
                if i <= j {
                    u_cols[j].push((i, v));
                } else {
                    l_cols[j].push((i, v / pivot));
                }
                fill += 1;
            }
            if fill > MAX_FILL {
                return Err(Error::Singular(
                    "sparse LU fill-in exceeds budget; use the stabilized Krylov method".into(),
                ));
            }
        }
        Ok(Self { n, l_cols, u_cols })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        // L y = b (unit diagonal)
        for j in 0..self.n {
            let xj = x[j];
            if xj != 0.0 {
                for &(i, v) in &self.l_cols[j] {
                    x[i] -= v * xj;
                }
            }
        }
        // U x = y: columns of U sorted by row; diagonal is the last entry
        for j in (0..self.n).rev() {
            let mut diag = 1.0;
            for &(i, v) in &self.u_cols[j] {
                if i == j {
                    diag = v;
                }
            }
            x[j] /= diag;
            let xj = x[j];
            for &(i, v) in &self.u_cols[j] {
                if i < j && xj != 0.0 {
                    x[i] -= v * xj;
                }
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn csr_from_dense(m: &[&[f64]]) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for row in m {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        (indptr, indices, data)
    }

    #[test]
    fn solves_small_system() {
        let m: &[&[f64]] = &[
            &[4.0, -1.0, 0.0],
            &[-1.0, 4.0, -1.0],
            &[0.0, -1.0, 4.0],
        ];
        let (indptr, indices, data) = csr_from_dense(m);
        let lu = SparseLu::factor(3, &indptr, &indices, &data).unwrap();
        let x = lu.solve(&[1.0, 2.0, 3.0]);
        // verify M x = b
        for (i, row) in m.iter().enumerate() {
            let dot: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            assert_abs_diff_eq!(dot, (i + 1) as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn reports_singularity() {
        let m: &[&[f64]] = &[&[1.0, 1.0], &[1.0, 1.0]];
        let (indptr, indices, data) = csr_from_dense(m);
        assert!(SparseLu::factor(2, &indptr, &indices, &data).is_err());
    }
}
