//! Banded LU factorization with partial pivoting (LAPACK dgbtrf-style
//! storage: factoring widens the upper band by the lower bandwidth).

use crate::error::{Error, Result};

pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// (2*kl + ku + 1) x n storage, row `i - j + kl + ku` holds entry (i, j).
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    pub fn factor(
        n: usize,
        kl: usize,
        ku: usize,
        entries: impl Iterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let rows = 2 * kl + ku + 1;
        let mut ab = vec![0.0; rows * n];
        let at = |i: usize, j: usize| (i + kl + ku - j) * n + j;
        for (i, j, v) in entries {
            ab[at(i, j)] += v;
        }
        let mut ipiv = vec![0usize; n];
        let kband = kl + ku;
        for j in 0..n {
            let i_max = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = ab[at(j, j)].abs();
            for i in (j + 1)..=i_max {
                let v = ab[at(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            ipiv[j] = p;
            if best == 0.0 {
                return Err(Error::Singular(format!("zero pivot in banded LU at column {j}")));
            }
            if p != j {
                let k_hi = (j + kband).min(n - 1);
                for k in j..=k_hi {
                    ab.swap(at(p, k), at(j, k));
                }
            }
            let piv = ab[at(j, j)];
            for i in (j + 1)..=i_max {
                let m = ab[at(i, j)] / piv;
                ab[at(i, j)] = m;
                if m != 0.0 {
                    let k_hi = (j + kband).min(n - 1);
                    for k in (j + 1)..=k_hi {
                        ab[at(i, k)] -= m * ab[at(j, k)];
                    }
                }
            }
        }
        Ok(Self { n, kl, ku, ab, ipiv })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let kband = kl + ku;
        let at = |i: usize, j: usize| (i + kl + ku - j) * n + j;
        let mut x = rhs.to_vec();
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                x.swap(p, j);
            }
            let i_max = (j + kl).min(n - 1);
            for i in (j + 1)..=i_max {
                x[i] -= self.ab[at(i, j)] * x[j];
            }
        }
        for j in (0..n).rev() {
            let k_hi = (j + kband).min(n - 1);
            for k in (j + 1)..=k_hi {
                x[j] -= self.ab[at(j, k)] * x[k];
            }
            x[j] /= self.ab[at(j, j)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tridiagonal_poisson() {
        // -u'' = 1 on 5 interior nodes, h = 1/6
        let n = 5;
        let h = 1.0 / 6.0;
        let mut entries = Vec::new();
        for i in 0..n {
            entries.push((i, i, 2.0 / (h * h)));
            if i > 0 {
                entries.push((i, i - 1, -1.0 / (h * h)));
            }
            if i + 1 < n {
                entries.push((i, i + 1, -1.0 / (h * h)));
            }
        }
        let lu = BandedLu::factor(n, 1, 1, entries.into_iter()).unwrap();
        let x = lu.solve(&vec![1.0; n]);
        // exact: u = x(1-x)/2 at nodes
        for (i, &xi) in x.iter().enumerate() {
            let t = (i + 1) as f64 * h;
            assert_abs_diff_eq!(xi, t * (1.0 - t) / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn pivoting_handles_small_diagonal() {
        // [[1e-20, 1], [1, 1]] x = [1, 2] needs the row swap
        let entries = vec![(0, 0, 1e-20), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)];
        let lu = BandedLu::factor(2, 1, 1, entries.into_iter()).unwrap();
        let x = lu.solve(&[1.0, 2.0]);
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn singular_matrix_reported() {
        let entries = vec![(0, 0, 1.0), (1, 1, 0.0)];
        assert!(BandedLu::factor(2, 0, 0, entries.into_iter()).is_err());
    }
}
