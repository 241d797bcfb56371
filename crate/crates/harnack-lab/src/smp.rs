//! Strong maximum principle machinery: the M_delta criterion, the
//! integral dichotomy on the primitive F, dead-core profile
//! construction and the delta-shift rescaling experiment.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{self, dist, GridDomain, GridFunction, Point};
use crate::solver::{adaptive_simpson, quad_singular, QuadMode, SingularIntegral};

/// A zero-order nonlinearity f with f(0) = 0, extended by 0 for s < 0,
/// together with its range cap L and primitive F(s) = int_0^s f.
#[derive(Clone)]
pub struct Nonlinearity {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Range cap L for the M_delta maximum.
    pub cap: f64,
    /// Set when f is the built-in family s |ln s|^a.
    pub log_power_tag: Option<f64>,
}

impl std::fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("cap", &self.cap)
            .field("log_power_tag", &self.log_power_tag)
            .finish_non_exhaustive()
    }
}

impl Nonlinearity {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return Err(Error::domain("range cap must be positive"));
        }
        let v0 = f(0.0);
        if v0.abs() > 1e-14 {
            return Err(Error::domain(format!("f(0) must vanish, got {v0}")));
        }
        Ok(Self {
            f: Arc::new(f),
            cap,
            log_power_tag: None,
        })
    }

    /// The family f(s) = s |ln s|^a.
    pub fn log_power(a: f64, cap: f64) -> Self {
        Self {
            f: Arc::new(move |s: f64| {
                if s <= 0.0 {
                    0.0
                } else {
                    s * s.ln().abs().powf(a)
                }
            }),
            cap,
            log_power_tag: Some(a),
        }
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.cap = cap;
        self
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s < 0.0 {
            0.0
        } else {
            (self.f)(s)
        }
    }

    /// Primitive F(s) = int_0^s f(t) dt by adaptive quadrature.
    pub fn primitive(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let f = self.f.clone();
        adaptive_simpson(
            &move |t: f64| if t <= 0.0 { 0.0 } else { f(t) },
            0.0,
            s,
            1e-14 * (1.0 + s),
            44,
        )
    }
}

/// M_delta = max_{s in [0, L]} f(s) / (s + delta), located by a dense
/// scan (log-spaced near zero plus uniform) refined by golden section
/// around the best cell.
pub fn m_delta(f: &Nonlinearity, delta: f64, cap: f64) -> Result<f64> {
    if !(delta > 0.0) || !(cap > 0.0) {
        return Err(Error::domain("m_delta needs delta > 0 and L > 0"));
    }
    let q = |s: f64| f.eval(s) / (s + delta);

    let mut samples: Vec<f64> = Vec::with_capacity(2600);
    samples.push(0.0);
    let lo = (delta * 1e-6).max(cap * 1e-18).min(cap);
    let decades = (cap / lo).ln();
    for i in 0..=1200 {
        samples.push(lo * (decades * i as f64 / 1200.0).exp());
    }
    for i in 1..=1200 {
        samples.push(cap * i as f64 / 1200.0);
    }
    samples.sort_by(f64::total_cmp);
    samples.dedup();

    let mut best_idx = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, &s) in samples.iter().enumerate() {
        let v = q(s);
        if v > best {
            best = v;
            best_idx = i;
        }
    }
    // golden-section refinement on the bracketing cell
    let lo = samples[best_idx.saturating_sub(1)];
    let hi = samples[(best_idx + 1).min(samples.len() - 1)];
    let inv_phi = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (q(x1), q(x2));
    for _ in 0..120 {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = q(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = q(x2);
        }
    }
    Ok(best.max(f1).max(f2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayVerdict {
    Holds,
    Fails,
    Inconclusive,
}

/// The trace delta -> delta^k e^(sqrt(M_delta)) and its classification.
#[derive(Debug, Clone)]
pub struct DecayTrace {
    /// (delta, M_delta, ln of the trace value)
    pub rows: Vec<(f64, f64, f64)>,
    /// Fitted slope of ln(trace) against ln(1/delta) over the tail
    /// (negative means the trace decays as delta -> 0).
    pub tail_slope: f64,
    pub verdict: DecayVerdict,
}

/// Evaluates delta^k e^(sqrt(M_delta)) over the delta grid and
/// classifies the tail trend: "holds" iff the sequence is eventually
/// decreasing with a negative fitted slope.
pub fn check_decay_criterion(f: &Nonlinearity, k: f64, delta_grid: &[f64]) -> Result<DecayTrace> {
    if !(k > 0.0) {
        return Err(Error::domain("k must be positive"));
    }
    if delta_grid.len() < 4 || delta_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::domain("delta grid must be decreasing with >= 4 entries"));
    }
    let mut rows = Vec::with_capacity(delta_grid.len());
    for &d in delta_grid {
        let m = m_delta(f, d, f.cap)?;
        let ln_t = k * d.ln() + m.max(0.0).sqrt();
        rows.push((d, m, ln_t));
    }
    let tail_start = rows.len() / 2;
    let tail = &rows[tail_start..];
    // regression of ln t against ln(1/delta)
    let xs: Vec<f64> = tail.iter().map(|r| (1.0 / r.0).ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|r| r.2).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let slope = sxy / sxx;
    let decreasing = tail.windows(2).all(|w| w[1].2 <= w[0].2 + 1e-12);
    let increasing = tail.windows(2).all(|w| w[1].2 >= w[0].2 - 1e-12);
    let verdict = if decreasing && slope < -1e-3 {
        DecayVerdict::Holds
    } else if increasing && slope > 1e-3 {
        DecayVerdict::Fails
    } else {
        DecayVerdict::Inconclusive
    };
    Ok(DecayTrace {
        rows,
        tail_slope: slope,
        verdict,
    })
}

/// Default delta decades 1e-2 .. 1e-12.
pub fn default_delta_grid() -> Vec<f64> {
    (2..=12).map(|k| 10f64.powi(-k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmpClassification {
    /// The integral diverges: the strong maximum principle holds.
    SmpHolds,
    /// The integral converges: the SMP may fail (the condition is
    /// necessary, and dead cores exist in the model cases).
    SmpMayFail,
    Inconclusive,
}

/// Divergence test of int_0 F(s)^(-1/2) ds near zero.
pub fn classify_vazquez_integral(f: &Nonlinearity) -> Result<SmpClassification> {
    let a = f.cap.min(0.5);
    // f must be nonnegative and nontrivial near zero
    let probes = [a, a / 7.0, a / 53.0, a * 1e-3, a * 1e-6];
    let mut any_positive = false;
    for &t in &probes {
        let v = f.eval(t);
        if v < -1e-13 {
            return Err(Error::domain(format!(
                "f must be nonnegative near 0, f({t}) = {v}"
            )));
        }
        if v > 0.0 {
            any_positive = true;
        }
    }
    if !any_positive {
        return Err(Error::domain("f vanishes at all probe points near 0"));
    }
    // F vanishing on an interval makes the integrand infinite there:
    // treated as divergent
    if f.primitive(a * 1e-8) == 0.0 {
        return Ok(SmpClassification::SmpHolds);
    }
    let fc = f.clone();
    let phi = move |s: f64| {
        let v = fc.primitive(s);
        if v <= 0.0 {
            f64::INFINITY
        } else {
            v.powf(-0.5)
        }
    };
    match quad_singular(&phi, a, QuadMode::DivergenceClass)? {
        SingularIntegral::Diverges => Ok(SmpClassification::SmpHolds),
        SingularIntegral::Converges { .. } => Ok(SmpClassification::SmpMayFail),
        SingularIntegral::Inconclusive => Ok(SmpClassification::Inconclusive),
    }
}

/// Dead-core profile: u on [0, T] with u(0) = 0, u(T) = u0 and
/// u'' = f(u), built by inverting x(u) = int_0^u dt / sqrt(2 F(t)).
/// Extended by 0 for x < 0 it is a nonnegative supersolution vanishing
/// on an open set.
pub fn dead_core_profile(f: &Nonlinearity, u0: f64, h: f64) -> Result<(GridFunction, f64)> {
    if !(u0 > 0.0 && u0 <= f.cap) {
        return Err(Error::domain("need 0 < u0 <= range cap"));
    }
    let fc = f.clone();
    let phi = move |t: f64| {
        let v = fc.primitive(t);
        if v <= 0.0 {
            f64::INFINITY
        } else {
            (2.0 * v).powf(-0.5)
        }
    };
    // head of the integral up to a small u, then cumulative segments
    let u_head = u0 * 1e-10;
    let head = match quad_singular(&phi, u_head, QuadMode::Value)? {
        SingularIntegral::Converges { value } => value,
        _ => {
            return Err(Error::domain(
                "no dead core: int_0 F^(-1/2) diverges for this nonlinearity",
            ))
        }
    };
    // geometric ladder of u-samples and cumulative x(u) table
    let n_table = 1600usize;
    let ratio = (u0 / u_head).powf(1.0 / n_table as f64);
    let mut us = Vec::with_capacity(n_table + 1);
    let mut xs = Vec::with_capacity(n_table + 1);
    us.push(u_head);
    xs.push(head);
    let mut u_prev = u_head;
    let mut x_acc = head;
    for _ in 0..n_table {
        let u_next = (u_prev * ratio).min(u0);
        let seg = adaptive_simpson(&phi, u_prev, u_next, 1e-13 * (1.0 + x_acc), 40);
        x_acc += seg;
        us.push(u_next);
        xs.push(x_acc);
        u_prev = u_next;
    }
    let t_total = x_acc;
    if !t_total.is_finite() || t_total <= 0.0 {
        return Err(Error::domain("dead-core half-width came out non-finite"));
    }

    // invert x(u) on a uniform grid over [0, T]
    let dom = GridDomain::interval(0.0, t_total, h)?;
    let mut values = Vec::with_capacity(dom.n_nodes());
    for i in 0..dom.n_nodes() {
        let x = dom.node(i)[0];
        if x <= xs[0] {
            // below the table head the profile is under u_head
            values.push(u_head * (x / xs[0]).max(0.0));
            continue;
        }
        let j = match xs.binary_search_by(|probe| probe.total_cmp(&x)) {
            Ok(j) => j,
            Err(j) => j.saturating_sub(1),
        };
        let j = j.min(us.len() - 2);
        // safeguarded Newton on g(u) = x(u) - x with x'(u) = phi(u),
        // bracketed inside the table cell
        let (mut lo, mut hi) = (us[j], us[j + 1]);
        let xlo = xs[j];
        let mut u = 0.5 * (lo + hi);
        for _ in 0..60 {
            let xu = xlo + adaptive_simpson(&phi, us[j], u, 1e-14 * (1.0 + x), 30);
            let err = xu - x;
            if err.abs() < 1e-13 * (1.0 + x) {
                break;
            }
            if err > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let slope = phi(u);
            let newton = u - err / slope.max(1e-300);
            u = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        values.push(u.min(u0));
    }
    let profile = GridFunction::new(dom, values)?;
    Ok((profile, t_total))
}

/// Max norm of the interior second-difference residual u'' - f(u) of a
/// 1D field.
pub fn ode_residual(f: &Nonlinearity, u: &GridFunction) -> f64 {
    let dom = &u.domain;
    let h = dom.h;
    let n = dom.n_nodes();
    let mut worst = 0.0f64;
    for i in 1..n - 1 {
        let d2 = (u.at(i + 1) - 2.0 * u.at(i) + u.at(i - 1)) / (h * h);
        worst = worst.max((d2 - f.eval(u.at(i))).abs());
    }
    worst
}

/// Parameters of the delta-shift vanishing experiment.
#[derive(Debug, Clone)]
pub struct VazquezParams {
    pub delta_grid: Vec<f64>,
    pub eps: f64,
    /// The constant of the rescaled weak-Harnack bound.
    pub c_bar: f64,
    /// The exponent k of the decay criterion.
    pub k: f64,
    /// Probe center; defaults to the argmin of the field.
    pub center: Option<Point>,
}

impl Default for VazquezParams {
    fn default() -> Self {
        Self {
            delta_grid: default_delta_grid(),
            eps: 0.5,
            c_bar: 2.0,
            k: 1.0,
            center: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VazquezReport {
    /// (delta, M_delta, measured eps-integral of u + delta over the
    /// probe ball, bound C delta exp(C r1 sqrt(M_delta)))
    pub rows: Vec<(f64, f64, f64, f64)>,
    pub r1: f64,
    pub center: Point,
    /// Fitted slope of ln(lhs) against ln(delta): 1 means the trace
    /// scales like delta and vanishes with it.
    pub lhs_slope: f64,
    /// Trace tends to zero: the field vanishes near the probe center.
    pub vanishes: bool,
    pub ball_max: f64,
}

/// The delta-shift rescaling experiment at an interior zero of u:
/// reports the trace delta -> (int_{B_r1} (u + delta)^eps)^(1/eps)
/// against the bound C delta exp(C r1 sqrt(M_delta)).
pub fn vazquez_experiment(
    u: &GridFunction,
    f: &Nonlinearity,
    params: &VazquezParams,
) -> Result<VazquezReport> {
    let dom = &u.domain;
    let all = dom.all_nodes();
    let max_u = u.max_over(&all);
    let min_u = u.min_over(&all);
    if min_u < -1e-12 * max_u.max(1.0) {
        return Err(Error::precondition("field must be nonnegative"));
    }
    let interior = dom.interior_nodes();
    let min_node = u
        .argmin_over(&interior)
        .ok_or_else(|| Error::precondition("domain has no interior nodes"))?;
    if u.at(min_node) > 1e-12 * max_u.max(1e-300) {
        return Err(Error::precondition(format!(
            "interior minimum {:.3e} is not zero at tolerance 1e-12 * max",
            u.at(min_node)
        )));
    }
    let center = params.center.unwrap_or(dom.node(min_node));
    // r0: distance from the probe center to the boundary
    let r0 = dom
        .boundary_nodes()
        .iter()
        .map(|&i| dist(dom.node(i), center))
        .fold(f64::INFINITY, f64::min);
    if !(r0 > 0.0) {
        return Err(Error::precondition("probe center sits on the boundary"));
    }
    let r1 = (r0 / 2.0).min(1.0 / (params.k * params.c_bar));
    let ball = dom.ball_nodes(center, r1);
    if ball.is_empty() {
        return Err(Error::precondition("probe ball holds no nodes"));
    }
    let cap = max_u.max(1e-12);

    let mut rows = Vec::with_capacity(params.delta_grid.len());
    for &d in &params.delta_grid {
        let m = m_delta(f, d, cap)?;
        let shifted = GridFunction::new(
            dom.clone(),
            u.values().iter().map(|&v| v.max(0.0) + d).collect(),
        )?;
        let lhs = grid::eps_integral(&shifted, params.eps, &ball)?;
        let bound = params.c_bar * d * (params.c_bar * r1 * m.max(0.0).sqrt()).exp();
        rows.push((d, m, lhs, bound));
    }
    // slope of ln lhs vs ln delta over the deepest half
    let tail = &rows[rows.len() / 2..];
    let xs: Vec<f64> = tail.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|r| r.2.max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let lhs_slope = sxy / sxx;
    let vanishes = lhs_slope > 0.9;
    Ok(VazquezReport {
        rows,
        r1,
        center,
        lhs_slope,
        vanishes,
        ball_max: u.max_over(&ball),
    })
}
