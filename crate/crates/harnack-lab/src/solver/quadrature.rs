//! Adaptive quadrature and classification of integrals with an endpoint
//! singularity at zero.

use crate::error::{Error, Result};

/// Adaptive Simpson integration of `f` over [a, b].
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: usize) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

/// Outcome of integrating a nonnegative integrand with a possible
/// singularity at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SingularIntegral {
    Converges { value: f64 },
    Diverges,
    /// Partial sums oscillate beyond tolerance; no classification.
    Inconclusive,
}

impl SingularIntegral {
    pub fn value(&self) -> Option<f64> {
        match self {
            SingularIntegral::Converges { value } => Some(*value),
            _ => None,
        }
    }

    pub fn diverges(&self) -> bool {
        matches!(self, SingularIntegral::Diverges)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadMode {
    /// Extract the value of a convergent integral (adds a tail estimate
    /// below the deepest cutoff).
    Value,
    /// Classify convergence from the cutoff decades only.
    DivergenceClass,
}

/// Cutoff decades 10^-k, k = 1..=16.
const CLASS_DECADES: usize = 16;

/// Integral of `phi` over (0, a] with geometric subdivision toward 0.
///
/// Per-decade segment integrals are computed by adaptive Simpson; the
/// sequence of partial sums is classified by the decay of its
/// increments: geometric decay and summable algebraic decay converge,
/// non-summable or growing increments diverge. In value mode a tail
/// below the deepest cutoff is added: exact geometric summation for
/// geometric tails, and a log-substitution quadrature with an algebraic
/// remainder model for slowly decaying ones. phi must be nonnegative on
/// (0, a].
pub fn quad_singular(phi: &dyn Fn(f64) -> f64, a: f64, mode: QuadMode) -> Result<SingularIntegral> {
    if !(a > 0.0) {
        return Err(Error::domain(format!("upper limit must be positive, got {a}")));
    }
    for &t in &[a, a / 3.0, a / 97.0, a * 1e-5] {
        let v = phi(t);
        if v < -1e-12 {
            return Err(Error::domain(format!("integrand is negative at {t}: {v}")));
        }
    }

    // cutoffs: absolute decades 10^-k intersected with (0, a); for small a
    // fall back to relative decades a 10^-k so the ladder is never short
    let mut cuts = vec![a];
    for k in 1..=CLASS_DECADES {
        let c = if a > 0.01 {
            10f64.powi(-(k as i32))
        } else {
            a * 10f64.powi(-(k as i32))
        };
        if c < a {
            cuts.push(c);
        }
    }
    let mut segs: Vec<f64> = Vec::with_capacity(cuts.len() - 1);
    let mut total = 0.0f64;
    for w in cuts.windows(2) {
        let seg = adaptive_simpson(phi, w[1], w[0], 1e-12 * (1.0 + total.abs()), 48);
        segs.push(seg);
        total += seg;
    }

    let floor = 1e-15 * (1.0 + total.abs());
    let trailing_floor = segs.iter().rev().take_while(|&&s| s <= floor).count();
    if trailing_floor >= 2 {
        // increments dropped to rounding level: tail has vanished
        return Ok(SingularIntegral::Converges { value: total });
    }
    let live = &segs[..segs.len() - trailing_floor];
    let tail_len = 8.min(live.len());
    if tail_len < 3 {
        return Ok(SingularIntegral::Inconclusive);
    }
    let tail = &live[live.len() - tail_len..];
    if tail.iter().any(|&s| s <= floor) {
        // interior increments at rounding level: oscillation
        return Ok(SingularIntegral::Inconclusive);
    }
    let ratios: Vec<f64> = tail.windows(2).map(|w| w[1] / w[0]).collect();
    let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let osc = ratios
        .windows(2)
        .filter(|w| (w[0] - 1.0).signum() != (w[1] - 1.0).signum())
        .count();
    if osc >= 4 {
        return Ok(SingularIntegral::Inconclusive);
    }
    if mean_ratio >= 1.02 {
        return Ok(SingularIntegral::Diverges);
    }

    let deepest = cuts[live.len()];
    if mean_ratio <= 0.85 {
        // geometric tail
        if mode == QuadMode::DivergenceClass {
            return Ok(SingularIntegral::Converges { value: total });
        }
        let rho = *ratios.last().unwrap();
        let tail_sum = tail.last().unwrap() * rho / (1.0 - rho);
        return Ok(SingularIntegral::Converges {
            value: total + tail_sum,
        });
    }

    // slow regime: after t = ln(1/s) the integrand psi(t) = phi(e^-t) e^-t
    // decays algebraically; classify by its local log-log slope and, in
    // value mode, integrate the substituted tail with a power remainder.
    let l0 = (1.0 / deepest).ln();
    let psi = |t: f64| phi((-t).exp()) * (-t).exp();
    let slope_at = |t: f64| {
        let dt = 0.02 * t;
        -((psi(t + dt).max(1e-300)).ln() - (psi(t - dt).max(1e-300)).ln())
            / ((t + dt).ln() - (t - dt).ln())
    };
    let gamma = slope_at(l0);
    if !(gamma > 1.05) {
        return Ok(SingularIntegral::Diverges);
    }
    if mode == QuadMode::DivergenceClass {
        return Ok(SingularIntegral::Converges { value: total });
    }
    // integrate psi up to the underflow margin, then add the modeled
    // remainder of a pure power integrand
    let t_max: f64 = 690.0;
    let mid = adaptive_simpson(&psi, l0, t_max, 1e-13 * (1.0 + total.abs()), 48);
    let gamma_far = slope_at(t_max);
    let remainder = if gamma_far > 1.0 {
        psi(t_max) * t_max / (gamma_far - 1.0)
    } else {
        return Ok(SingularIntegral::Diverges);
    };
    Ok(SingularIntegral::Converges {
        value: total + mid + remainder,
    })
}
