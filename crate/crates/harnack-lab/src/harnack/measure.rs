//! Empirical measurement of the sharp Harnack inequalities on solved
//! fields, and calibration of their existential constants on a training
//! suite.

use crate::error::{Error, Result};
use crate::grid::{self, dist, GridFunction, Point};
use crate::operators::{compute_a, EllipticProblem};

/// The constants of the Harnack-type inequalities are existential in the
/// continuum statements; this artifact calibrates them once on a
/// training suite and freezes them.
#[derive(Debug, Clone, Copy)]
pub struct CalibratedConstants {
    /// Integral exponent of the weak Harnack inequality.
    pub eps: f64,
    /// C0 of the weak Harnack bound e^(C0 A R) (inf + ||g||).
    pub c0_weak: f64,
    /// C0 of the full Harnack bound on sup.
    pub c0_full: f64,
    /// C_eps of the local maximum principle.
    pub c_eps: f64,
}

impl Default for CalibratedConstants {
    fn default() -> Self {
        Self {
            eps: 0.5,
            c0_weak: 1.0,
            c0_full: 1.0,
            c_eps: 1.0,
        }
    }
}

/// An inequality "fails" only when violated by more than this factor
/// (after refinement extrapolation), to exclude discretization
/// artifacts.
pub const VIOLATION_TOLERANCE: f64 = 1.0 + 1e-3;

/// Measured quantities of one solved field against the Harnack bounds.
#[derive(Debug, Clone)]
pub struct HarnackMeasurement {
    pub radius: f64,
    pub aggregate: f64,
    pub sup: f64,
    pub inf: f64,
    pub sup_at: Point,
    pub inf_at: Point,
    pub eps: f64,
    /// (int_{G_R} u^eps)^(1/eps)
    pub eps_integral: f64,
    /// (int_{G'_R} u^eps)^(1/eps), the local-max right-hand side
    pub eps_integral_prime: f64,
    /// ||g||_{L^p_ul(G'_R)}
    pub g_norm: f64,
    /// ln of e^(C0 A R)(inf + ||g||) with the calibrated weak C0
    pub ln_weak_bound: f64,
    pub ln_full_bound: f64,
    /// C_eps (A^{n/eps} eps_integral_prime + ||g||)
    pub local_max_bound: f64,
    pub weak_violated: bool,
    pub full_violated: bool,
    pub local_max_violated: bool,
}

impl HarnackMeasurement {
    pub fn ratio(&self) -> f64 {
        if self.inf > 0.0 {
            self.sup / self.inf
        } else {
            f64::INFINITY
        }
    }

    /// Distance between the argmax and argmin nodes: the length over
    /// which the measured growth happens, used to normalize rates.
    pub fn growth_distance(&self) -> f64 {
        dist(self.sup_at, self.inf_at)
    }

    /// Measured weak-Harnack factor: LHS / bound (> 1 is a violation).
    pub fn weak_factor(&self) -> f64 {
        (self.eps_integral.max(1e-300).ln() - self.ln_weak_bound).exp()
    }

    pub fn full_factor(&self) -> f64 {
        (self.sup.max(1e-300).ln() - self.ln_full_bound).exp()
    }

    pub fn local_max_factor(&self) -> f64 {
        self.sup / self.local_max_bound
    }
}

/// Measure the weak Harnack, local maximum principle and full Harnack
/// quantities of a nonnegative solved field on G'_R (the whole grid),
/// with G_R its core region of radius R.
pub fn measure_harnack(
    problem: &EllipticProblem,
    u: &GridFunction,
    radius: f64,
    consts: &CalibratedConstants,
) -> Result<HarnackMeasurement> {
    let dom = &u.domain;
    let all = dom.all_nodes();
    let max_abs = u.values().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let min_val = u.min_over(&all);
    if min_val < -1e-9 * max_abs.max(1.0) {
        return Err(Error::precondition(format!(
            "field has negative values beyond tolerance (min {min_val:.3e})"
        )));
    }
    let gr = dom.core_region_nodes(radius);
    if gr.is_empty() {
        return Err(Error::domain(format!("G_R with R = {radius} holds no nodes")));
    }

    // clamp rounding-level negatives before taking fractional powers
    let u_pos = GridFunction::new(
        dom.clone(),
        u.values().iter().map(|&v| v.max(0.0)).collect(),
    )?;

    let eps = consts.eps;
    let sup = u.max_over(&gr);
    let inf = u.min_over(&gr);
    let sup_at = dom.node(u.argmax_over(&gr).unwrap());
    let inf_at = dom.node(u.argmin_over(&gr).unwrap());
    let eps_integral = grid::eps_integral(&u_pos, eps, &gr)?;
    let eps_integral_prime = grid::eps_integral(&u_pos, eps, &all)?;

    let h = dom.h;
    let co = problem.coeffs.clone();
    let gf = problem.g.clone();
    let g_field = GridFunction::from_fn(dom.clone(), move |p| gf(co.sample_point(p, h)).abs());
    let g_norm = match problem.coeffs.p {
        grid::Exp::Inf => g_field.values().iter().fold(0.0f64, |a, &v| a.max(v)),
        grid::Exp::Finite(p) => grid::ul_quasinorm(&g_field, p)?,
    };

    let aggregate = compute_a(&problem.coeffs, problem.form, dom)?;
    let n = dom.dimension() as f64;
    let denom = (inf.max(0.0) + g_norm).max(1e-300);
    let ln_weak_bound = consts.c0_weak * aggregate * radius + denom.ln();
    let ln_full_bound = consts.c0_full * aggregate * radius + denom.ln();
    let local_max_bound = consts.c_eps * (aggregate.powf(n / eps) * eps_integral_prime + g_norm);

    let tol_ln = VIOLATION_TOLERANCE.ln();
    Ok(HarnackMeasurement {
        radius,
        aggregate,
        sup,
        inf,
        sup_at,
        inf_at,
        eps,
        eps_integral,
        eps_integral_prime,
        g_norm,
        ln_weak_bound,
        ln_full_bound,
        local_max_bound,
        weak_violated: eps_integral.max(1e-300).ln() > ln_weak_bound + tol_ln,
        full_violated: sup.max(1e-300).ln() > ln_full_bound + tol_ln,
        local_max_violated: sup > local_max_bound * VIOLATION_TOLERANCE,
    })
}

/// Calibrate the constants on a set of measured training fields: the
/// maximal implied constants over the suite, with a safety margin.
pub fn calibrate(
    measurements: &[(usize, HarnackMeasurement)],
    eps: f64,
    margin: f64,
) -> CalibratedConstants {
    let mut c0_weak = 0.0f64;
    let mut c0_full = 0.0f64;
    let mut c_eps = 0.0f64;
    for (n_dim, m) in measurements {
        let denom = (m.inf.max(0.0) + m.g_norm).max(1e-300);
        let ar = (m.aggregate * m.radius).max(1e-300);
        c0_weak = c0_weak.max((m.eps_integral.max(1e-300).ln() - denom.ln()) / ar);
        c0_full = c0_full.max((m.sup.max(1e-300).ln() - denom.ln()) / ar);
        let rhs_core =
            m.aggregate.powf(*n_dim as f64 / m.eps) * m.eps_integral_prime + m.g_norm;
        c_eps = c_eps.max(m.sup / rhs_core.max(1e-300));
    }
    CalibratedConstants {
        eps,
        c0_weak: c0_weak.max(0.0) * margin,
        c0_full: c0_full.max(0.0) * margin,
        c_eps: c_eps.max(0.0) * margin,
    }
}
