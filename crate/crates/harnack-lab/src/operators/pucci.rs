//! Pucci extremal operators on symmetric 2x2 matrices.
//!
//! M+ applies Lambda to the positive eigenvalues and lambda to the
//! negative ones; M- swaps the weights. Zero eigenvalues contribute zero
//! in both branches.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PucciSign {
    Plus,
    Minus,
}

/// Eigenvalues of the symmetric matrix [[a11, a12], [a12, a22]],
/// computed from the stable discriminant form.
pub fn sym_eig2(a11: f64, a12: f64, a22: f64) -> (f64, f64) {
    let half_tr = 0.5 * (a11 + a22);
    let half_diff = 0.5 * (a11 - a22);
    let disc = (half_diff * half_diff + a12 * a12).sqrt();
    (half_tr - disc, half_tr + disc)
}

/// Extremal value of the Pucci operator on a symmetric matrix.
pub fn pucci_apply(m: [[f64; 2]; 2], lambda: f64, big_lambda: f64, sign: PucciSign) -> Result<f64> {
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    if (m[0][1] - m[1][0]).abs() > 1e-12 * scale {
        return Err(Error::domain(format!(
            "pucci_apply requires a symmetric matrix, got off-diagonal {} vs {}",
            m[0][1], m[1][0]
        )));
    }
    if !(0.0 < lambda && lambda <= big_lambda) {
        return Err(Error::domain(format!(
            "need 0 < lambda <= Lambda, got ({lambda}, {big_lambda})"
        )));
    }
    let a12 = 0.5 * (m[0][1] + m[1][0]);
    let (e1, e2) = sym_eig2(m[0][0], a12, m[1][1]);
    Ok(pucci_of_eigs(&[e1, e2], lambda, big_lambda, sign))
}

/// One-dimensional version: the "matrix" is the scalar second derivative.
pub fn pucci_apply_1d(m: f64, lambda: f64, big_lambda: f64, sign: PucciSign) -> f64 {
    pucci_of_eigs(&[m], lambda, big_lambda, sign)
}

fn pucci_of_eigs(eigs: &[f64], lambda: f64, big_lambda: f64, sign: PucciSign) -> f64 {
    let (w_pos, w_neg) = match sign {
        PucciSign::Plus => (big_lambda, lambda),
        PucciSign::Minus => (lambda, big_lambda),
    };
    eigs.iter()
        .map(|&e| if e > 0.0 { w_pos * e } else { w_neg * e })
        .sum()
}

/// The coefficient matrix P of the frozen linearization tr(P D^2 u):
/// eigen-frame of the supplied symmetric matrix with each eigenvalue
/// replaced by Lambda (positive directions) or lambda (negative
/// directions) for the plus branch, swapped for minus. Zero eigenvalues
/// take the plus-branch weight of the positive side, which is immaterial
/// since they contribute zero to the extremal value.
pub fn frozen_multiplier(
    m: [[f64; 2]; 2],
    lambda: f64,
    big_lambda: f64,
    sign: PucciSign,
) -> [[f64; 2]; 2] {
    let a12 = 0.5 * (m[0][1] + m[1][0]);
    let (e1, e2) = sym_eig2(m[0][0], a12, m[1][1]);
    let (w_pos, w_neg) = match sign {
        PucciSign::Plus => (big_lambda, lambda),
        PucciSign::Minus => (lambda, big_lambda),
    };
    let weight = |e: f64| if e >= 0.0 { w_pos } else { w_neg };
    // rotation angle of the eigenframe
    let theta = 0.5 * (2.0 * a12).atan2(m[0][0] - m[1][1]);
    let (s, c) = theta.sin_cos();
    // columns (c, s) and (-s, c) are eigenvectors for e2-major ordering
    // from atan2; recompute which eigenvalue each column carries.
    let v1 = [c, s];
    let rayleigh = m[0][0] * v1[0] * v1[0] + 2.0 * a12 * v1[0] * v1[1] + m[1][1] * v1[1] * v1[1];
    let (w1, w2) = if (rayleigh - e2).abs() <= (rayleigh - e1).abs() {
        (weight(e2), weight(e1))
    } else {
        (weight(e1), weight(e2))
    };
    [
        [w1 * c * c + w2 * s * s, (w1 - w2) * c * s],
        [(w1 - w2) * c * s, w1 * s * s + w2 * c * c],
    ]
}
