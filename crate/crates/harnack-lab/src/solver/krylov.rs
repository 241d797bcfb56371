//! ILU(0)-preconditioned BiCGStab on CSR matrices.
//!
//! Iteration order is fixed and all reductions are sequential, so a
//! solve is bit-reproducible for identical inputs within one build.

use crate::error::{Error, Result};

pub struct Csr {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl Csr {
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            out[i] = acc;
        }
    }
}

/// ILU(0): incomplete LU on the sparsity pattern of the matrix.
pub struct Ilu0 {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    pub fn factor(a: &Csr) -> Result<Self> {
        let n = a.n;
        let indptr = a.indptr.clone();
        let indices = a.indices.clone();
        let mut data = a.data.clone();
        let mut diag_pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in indptr[i]..indptr[i + 1] {
                if indices[k] == i {
                    diag_pos[i] = k;
                }
            }
            if diag_pos[i] == usize::MAX {
                return Err(Error::Singular(format!("missing diagonal in row {i}")));
            }
        }
        // IKJ variant restricted to the pattern
        for i in 1..n {
            for kk in indptr[i]..indptr[i + 1] {
                let k = indices[kk];
                if k >= i {
                    break;
                }
                let piv = data[diag_pos[k]];
                if piv == 0.0 {
                    return Err(Error::Singular(format!("zero ILU pivot in row {k}")));
                }
                let lik = data[kk] / piv;
                data[kk] = lik;
                if lik == 0.0 {
                    continue;
                }
                // subtract lik * U(k, j) for j > k present in row i
                let mut pi = kk + 1;
                let mut pk = diag_pos[k] + 1;
                while pi < indptr[i + 1] && pk < indptr[k + 1] {
                    let ji = indices[pi];
                    let jk = indices[pk];
                    if ji == jk {
                        data[pi] -= lik * data[pk];
                        pi += 1;
                        pk += 1;
                    } else if ji < jk {
                        pi += 1;
                    } else {
                        pk += 1;
                    }
                }
            }
            if data[diag_pos[i]] == 0.0 {
                return Err(Error::Singular(format!("zero ILU pivot in row {i}")));
            }
        }
        Ok(Self {
            n,
            indptr,
            indices,
            data,
            diag_pos,
        })
    }

    /// z = (L U)^{-1} r
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        for i in 0..self.n {
            let mut acc = z[i];
            for k in self.indptr[i]..self.diag_pos[i] {
                acc -= self.data[k] * z[self.indices[k]];
            }
            z[i] = acc;
        }
        for i in (0..self.n).rev() {
            let mut acc = z[i];
            for k in (self.diag_pos[i] + 1)..self.indptr[i + 1] {
                acc -= self.data[k] * z[self.indices[k]];
            }
            z[i] = acc / self.data[self.diag_pos[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned BiCGStab. Returns the solution and the final
/// residual 2-norm.
pub fn bicgstab(
    a: &Csr,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, usize)> {
    let n = a.n;
    let ilu = Ilu0::factor(a)?;
    let target = tol * (1.0 + norm2(rhs));

    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut res = norm2(&r);
    let mut iters = 0;

    while res > target && iters < max_iter {
        iters += 1;
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 {
            // breakdown: restart with the current residual
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|v| *v = 0.0);
            v.iter_mut().for_each(|v| *v = 0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        ilu.apply(&p, &mut y);
        a.matvec(&y, &mut v);
        let denom = dot(&r_hat, &v);
        if denom.abs() < 1e-300 {
            r_hat.copy_from_slice(&r);
            continue;
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= target {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            a.matvec(&x, &mut t);
            for i in 0..n {
                r[i] = rhs[i] - t[i];
            }
            res = norm2(&r);
            continue;
        }
        ilu.apply(&s, &mut z);
        a.matvec(&z, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::NonConvergence {
                iterations: iters,
                residual: res,
            });
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm2(&r);
        if omega.abs() < 1e-300 {
            r_hat.copy_from_slice(&r);
        }
    }
    if res > target {
        return Err(Error::NonConvergence {
            iterations: iters,
            residual: res,
        });
    }
    Ok((x, res, iters))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn solves_laplacian_chain() {
        let n = 50;
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for i in 0..n {
            if i > 0 {
                indices.push(i - 1);
                data.push(-1.0);
            }
            indices.push(i);
            data.push(2.0);
            if i + 1 < n {
                indices.push(i + 1);
                data.push(-1.0);
            }
            indptr.push(indices.len());
        }
        let a = Csr {
            n,
            indptr,
            indices,
            data,
        };
        let rhs = vec![1.0; n];
        let (x, res, _) = bicgstab(&a, &rhs, 1e-12, 1000).unwrap();
        assert!(res <= 1e-12 * (1.0 + norm2(&rhs)));
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        for i in 0..n {
            assert_abs_diff_eq!(ax[i], 1.0, epsilon = 1e-9);
        }
    }
}
