//! Numerical verifiers for the appendix machinery: the ABP bound, the
//! growth lemma, the ink-spots lemma and geometric level-set decay.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::grid::{self, dist, GridFunction, Point};
use crate::operators::{shape_contains_ball, EllipticProblem};

/// sup w against the L^p norm of the data over the positive set
/// Omega+ = {w > 0}.
#[derive(Debug, Clone, Copy)]
pub struct AbpReport {
    pub sup_w: f64,
    pub g_norm_positive_set: f64,
    /// sup_w / ||g||; the empirical ABP constant of this field.
    pub ratio: f64,
}

/// Requires diam(domain) <= 1 and w <= 0 on the boundary.
pub fn abp_check(problem: &EllipticProblem, w: &GridFunction) -> Result<AbpReport> {
    let dom = &w.domain;
    let corners = dom.bounding_box_corners();
    let mut diam = 0.0f64;
    for &a in &corners {
        for &b in &corners {
            diam = diam.max(dist(a, b));
        }
    }
    if diam > 1.0 + 1e-9 {
        return Err(Error::precondition(format!(
            "ABP check requires diameter <= 1, got {diam:.3}"
        )));
    }
    let max_abs = w.values().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    for i in dom.boundary_nodes() {
        if w.at(i) > 1e-9 * max_abs.max(1.0) {
            return Err(Error::precondition(format!(
                "w must be <= 0 on the boundary (found {} at node {i})",
                w.at(i)
            )));
        }
    }
    let positive: Vec<usize> = (0..dom.n_nodes()).filter(|&i| w.at(i) > 0.0).collect();
    let sup_w = w.values().iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let h = dom.h;
    let co = problem.coeffs.clone();
    let gf = problem.g.clone();
    let g_field = GridFunction::from_fn(dom.clone(), move |p| gf(co.sample_point(p, h)).abs());
    let g_norm = if positive.is_empty() {
        0.0
    } else {
        match problem.coeffs.p {
            grid::Exp::Inf => positive.iter().map(|&i| g_field.at(i)).fold(0.0, f64::max),
            grid::Exp::Finite(p) => grid::lebesgue_norm(&g_field, grid::Exp::Finite(p.max(1.0)), &positive)?,
        }
    };
    Ok(AbpReport {
        sup_w,
        g_norm_positive_set: g_norm,
        ratio: if g_norm > 0.0 { sup_w / g_norm } else { f64::NAN },
    })
}

/// Outcome of one growth-lemma probe: if u exceeds a on most of the
/// ball, then its infimum on the ball is at least kappa a minus the
/// data term.
#[derive(Debug, Clone, Copy)]
pub struct GrowthCheck {
    pub hypothesis: bool,
    pub conclusion: bool,
    pub level_fraction: f64,
    pub inf_ball: f64,
    pub threshold: f64,
}

impl GrowthCheck {
    pub fn holds(&self) -> bool {
        !self.hypothesis || self.conclusion
    }
}

#[allow(clippy::too_many_arguments)]
pub fn verify_growth_lemma(
    problem: &EllipticProblem,
    u: &GridFunction,
    x1: Point,
    rho: f64,
    a: f64,
    delta: f64,
    kappa: f64,
    c_bar: f64,
) -> Result<GrowthCheck> {
    let dom = &u.domain;
    if !shape_contains_ball(dom.shape, x1, 2.0 * rho) {
        return Err(Error::domain(format!(
            "ball B_{{{:.3}}} around {:?} exits the domain",
            2.0 * rho,
            x1
        )));
    }
    let ball = dom.ball_nodes(x1, rho);
    if ball.is_empty() {
        return Err(Error::domain("probe ball holds no grid nodes"));
    }
    let ball_measure = dom.measure(&ball);
    let level = grid::level_set_measure(u, a, &ball);
    let hypothesis = level >= (1.0 - delta) * ball_measure;
    let inf_ball = u.min_over(&ball);

    let n = dom.dimension() as f64;
    let p = match problem.coeffs.p {
        grid::Exp::Inf => f64::INFINITY,
        grid::Exp::Finite(v) => v,
    };
    let big_ball = dom.ball_nodes(x1, 2.0 * rho);
    let h = dom.h;
    let co = problem.coeffs.clone();
    let gf = problem.g.clone();
    let g_field = GridFunction::from_fn(dom.clone(), move |q| gf(co.sample_point(q, h)).abs());
    let g_norm = if p.is_infinite() {
        big_ball.iter().map(|&i| g_field.at(i)).fold(0.0, f64::max)
    } else {
        grid::lebesgue_norm(&g_field, grid::Exp::Finite(p.max(1.0)), &big_ball)?
    };
    let threshold = kappa * a - c_bar * rho.powf(2.0 - n / p) * g_norm;
    Ok(GrowthCheck {
        hypothesis,
        conclusion: inf_ball > threshold,
        level_fraction: level / ball_measure,
        inf_ball,
        threshold,
    })
}

/// Outcome of an ink-spots check: the measure and dilation hypotheses
/// are recorded alongside the conclusion |E| <= (1 - c delta)|F|.
#[derive(Debug, Clone, Copy)]
pub struct InkspotsCheck {
    /// |E| <= (1 - delta)|B|
    pub measure_hypothesis: bool,
    /// every grid-centered ball where E is (1-delta)-dense lies in F
    pub dilation_hypothesis: bool,
    /// |E| <= (1 - c delta)|F|
    pub conclusion: bool,
    pub e_measure: f64,
    pub f_measure: f64,
}

impl InkspotsCheck {
    pub fn holds(&self) -> bool {
        !(self.measure_hypothesis && self.dilation_hypothesis) || self.conclusion
    }
}

/// Ink-spots lemma check on node sets E within F within the ball
/// B(center, radius).
pub fn verify_inkspots(
    dom: &std::sync::Arc<crate::grid::GridDomain>,
    e_set: &[usize],
    f_set: &[usize],
    center: Point,
    radius: f64,
    delta: f64,
    c: f64,
) -> Result<InkspotsCheck> {
    let f_idx: HashSet<usize> = f_set.iter().copied().collect();
    if !e_set.iter().all(|i| f_idx.contains(i)) {
        return Err(Error::domain("E is not a subset of F"));
    }
    let ball = dom.ball_nodes(center, radius);
    let ball_idx: HashSet<usize> = ball.iter().copied().collect();
    if !f_set.iter().all(|i| ball_idx.contains(i)) {
        return Err(Error::domain("F is not a subset of the ball"));
    }
    let e_idx: HashSet<usize> = e_set.iter().copied().collect();
    let e_measure = dom.measure(e_set);
    let f_measure = dom.measure(f_set);
    let b_measure = dom.measure(&ball);
    let measure_hypothesis = e_measure <= (1.0 - delta) * b_measure + 1e-12;

    // dilation hypothesis over grid-centered sub-balls: any ball where E
    // is dense must lie inside F
    let mut dilation_hypothesis = true;
    let h = dom.h;
    let mut r_probe = h;
    'probe: while r_probe <= radius + 1e-12 {
        for &i in &ball {
            let c_probe = dom.node(i);
            if dist(c_probe, center) + r_probe > radius + 1e-12 {
                continue;
            }
            let sub = dom.ball_nodes(c_probe, r_probe);
            if sub.is_empty() {
                continue;
            }
            let sub_measure = dom.measure(&sub);
            let e_in: f64 = sub
                .iter()
                .filter(|i| e_idx.contains(i))
                .map(|&i| dom.cell_vol(i))
                .sum();
            if e_in > (1.0 - delta) * sub_measure && !sub.iter().all(|i| f_idx.contains(i)) {
                dilation_hypothesis = false;
                break 'probe;
            }
        }
        r_probe += h.max(radius / 16.0);
    }
    Ok(InkspotsCheck {
        measure_hypothesis,
        dilation_hypothesis,
        conclusion: e_measure <= (1.0 - c * delta) * f_measure + 1e-12,
        e_measure,
        f_measure,
    })
}

/// One level of the geometric level-set decay report.
#[derive(Debug, Clone, Copy)]
pub struct LevelDecayRow {
    pub k: usize,
    pub level: f64,
    pub fraction: f64,
    pub bound: f64,
    pub violated: bool,
}

/// Measures |{u > M^k} ∩ B| / |B| against (1 - c delta)^k for
/// k = 1..=kmax; `first_violation` is the first k exceeding the bound.
pub fn verify_levelset_decay(
    u: &GridFunction,
    center: Point,
    rho0: f64,
    m_const: f64,
    c: f64,
    delta: f64,
    kmax: usize,
) -> Result<(Vec<LevelDecayRow>, Option<usize>)> {
    if !(m_const > 1.0) {
        return Err(Error::domain("level base M must exceed 1"));
    }
    let dom = &u.domain;
    let ball = dom.ball_nodes(center, rho0);
    if ball.is_empty() {
        return Err(Error::domain("level-set ball holds no grid nodes"));
    }
    let total = dom.measure(&ball);
    let mut rows = Vec::with_capacity(kmax);
    let mut first_violation = None;
    for k in 1..=kmax {
        let level = m_const.powi(k as i32);
        let measure = grid::level_set_measure(u, level, &ball);
        let fraction = measure / total;
        let bound = (1.0 - c * delta).powi(k as i32);
        let violated = fraction > bound * (1.0 + 1e-9) + 1e-15;
        if violated && first_violation.is_none() {
            first_violation = Some(k);
        }
        rows.push(LevelDecayRow {
            k,
            level,
            fraction,
            bound,
            violated,
        });
    }
    Ok((rows, first_violation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDomain;
    use crate::operators::{scalar_const, CoefficientSet, EllipticProblem, OperatorForm};
    use approx::assert_abs_diff_eq;

    fn unit_problem(g: f64) -> (EllipticProblem, std::sync::Arc<GridDomain>) {
        let dom = GridDomain::interval(0.0, 1.0, 1e-3).unwrap();
        let p = EllipticProblem::new(
            dom.clone(),
            OperatorForm::Divergence,
            CoefficientSet::laplacian(),
            scalar_const(g),
            scalar_const(0.0),
        )
        .unwrap();
        (p, dom)
    }

    #[test]
    fn abp_parabola() {
        // w'' = -1, w(0) = w(1) = 0: w = x(1-x)/2, sup = 1/8
        let (problem, dom) = unit_problem(-1.0);
        let w = GridFunction::from_fn(dom, |p| p[0] * (1.0 - p[0]) / 2.0);
        let report = abp_check(&problem, &w).unwrap();
        assert_abs_diff_eq!(report.sup_w, 0.125, epsilon = 1e-6);
        assert_abs_diff_eq!(report.g_norm_positive_set, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.ratio, 0.125, epsilon = 1e-6);
    }

    #[test]
    fn abp_no_positive_part() {
        let (problem, dom) = unit_problem(0.0);
        let w = GridFunction::from_fn(dom, |p| -p[0] * (1.0 - p[0]));
        let report = abp_check(&problem, &w).unwrap();
        assert!(report.sup_w <= 0.0);
        assert_eq!(report.g_norm_positive_set, 0.0);
    }

    #[test]
    fn abp_rejects_positive_boundary() {
        let (problem, dom) = unit_problem(0.0);
        let w = GridFunction::from_fn(dom, |_| 1.0);
        assert!(abp_check(&problem, &w).is_err());
    }

    #[test]
    fn growth_constant_field() {
        let dom = GridDomain::interval(-2.0, 2.0, 0.01).unwrap();
        let problem = EllipticProblem::new(
            dom.clone(),
            OperatorForm::Divergence,
            CoefficientSet::laplacian(),
            scalar_const(0.0),
            scalar_const(1.0),
        )
        .unwrap();
        let u = GridFunction::from_fn(dom, |_| 3.0);
        let check =
            verify_growth_lemma(&problem, &u, [0.0, 0.0], 0.5, 3.0 - 1e-9, 0.1, 0.5, 1.0).unwrap();
        assert!(check.hypothesis);
        assert!(check.conclusion);
        assert!(check.holds());
    }

    #[test]
    fn growth_vacuous_when_hypothesis_fails() {
        let dom = GridDomain::interval(-2.0, 2.0, 0.01).unwrap();
        let problem = EllipticProblem::new(
            dom.clone(),
            OperatorForm::Divergence,
            CoefficientSet::laplacian(),
            scalar_const(0.0),
            scalar_const(0.0),
        )
        .unwrap();
        let u = GridFunction::from_fn(dom, |p| p[0].abs());
        // u > 10 nowhere: hypothesis false, implication vacuously true
        let check =
            verify_growth_lemma(&problem, &u, [0.0, 0.0], 0.5, 10.0, 0.1, 0.9, 1.0).unwrap();
        assert!(!check.hypothesis);
        assert!(check.holds());
    }

    #[test]
    fn growth_rejects_exiting_ball() {
        let dom = GridDomain::interval(-1.0, 1.0, 0.01).unwrap();
        let problem = EllipticProblem::new(
            dom.clone(),
            OperatorForm::Divergence,
            CoefficientSet::laplacian(),
            scalar_const(0.0),
            scalar_const(0.0),
        )
        .unwrap();
        let u = GridFunction::from_fn(dom, |_| 1.0);
        assert!(verify_growth_lemma(&problem, &u, [0.8, 0.0], 0.5, 0.5, 0.1, 0.9, 1.0).is_err());
    }

    #[test]
    fn inkspots_empty_e() {
        let dom = GridDomain::interval(-1.0, 1.0, 0.05).unwrap();
        let f_set = dom.ball_nodes([0.0, 0.0], 0.5);
        let check = verify_inkspots(&dom, &[], &f_set, [0.0, 0.0], 1.0, 0.3, 0.5).unwrap();
        assert!(check.conclusion);
    }

    #[test]
    fn inkspots_saturated_density_algebra() {
        // |E| = (1-delta)|B| against F = B: the conclusion
        // (1-delta)|B| <= (1-c delta)|B| holds iff c <= 1
        let dom = GridDomain::interval(-1.0, 1.0, 0.001).unwrap();
        let ball = dom.ball_nodes([0.0, 0.0], 1.0);
        let b_measure = dom.measure(&ball);
        let delta = 0.25;
        // a centered interval with measure (1-delta)|B|
        let half = (1.0 - delta) * b_measure / 2.0;
        let e_set = dom.ball_nodes([0.0, 0.0], half);
        let got = verify_inkspots(&dom, &e_set, &ball, [0.0, 0.0], 1.0, delta, 1.0).unwrap();
        assert!(got.conclusion);
        let got_large_c =
            verify_inkspots(&dom, &e_set, &ball, [0.0, 0.0], 1.0, delta, 1.5).unwrap();
        assert!(!got_large_c.conclusion);
    }

    #[test]
    fn inkspots_rejects_non_subset() {
        let dom = GridDomain::interval(-1.0, 1.0, 0.05).unwrap();
        let e_set = dom.ball_nodes([0.5, 0.0], 0.3);
        let f_set = dom.ball_nodes([-0.5, 0.0], 0.3);
        assert!(verify_inkspots(&dom, &e_set, &f_set, [0.0, 0.0], 1.0, 0.3, 0.5).is_err());
    }

    #[test]
    fn inkspots_nested_intervals_against_direct_measure() {
        let dom = GridDomain::interval(0.0, 1.0, 0.002).unwrap();
        let center = [0.5, 0.0];
        let e_set = dom.ball_nodes(center, 0.1);
        let f_set = dom.ball_nodes(center, 0.35);
        let delta = 0.5;
        let c = 0.5;
        let got = verify_inkspots(&dom, &e_set, &f_set, center, 0.45, delta, c).unwrap();
        let direct =
            dom.measure(&e_set) <= (1.0 - c * delta) * dom.measure(&f_set) + 1e-12;
        assert_eq!(got.conclusion, direct);
        assert!(got.conclusion && got.holds());
    }

    #[test]
    fn levelset_decay_bounded_field() {
        let dom = GridDomain::interval(-1.0, 1.0, 0.01).unwrap();
        let u = GridFunction::from_fn(dom, |p| 1.0 - p[0] * p[0]);
        let (rows, violation) =
            verify_levelset_decay(&u, [0.0, 0.0], 0.9, 2.0, 0.5, 0.5, 6).unwrap();
        // u <= 1 everywhere: all level sets above M^k >= 2 are empty
        assert!(rows.iter().all(|r| r.fraction == 0.0));
        assert!(violation.is_none());
    }

    #[test]
    fn levelset_decay_spike_structure() {
        let dom = GridDomain::interval(-1.0, 1.0, 0.001).unwrap();
        // a single spike of height 100 and width 0.1 around the origin
        let u =
            GridFunction::from_fn(dom.clone(), |p| if p[0].abs() <= 0.05 { 100.0 } else { 0.1 });
        let ball = dom.ball_nodes([0.0, 0.0], 0.8);
        let spike = grid::level_set_measure(&u, 50.0, &ball);
        let m = 2.0;
        let (rows, _) = verify_levelset_decay(&u, [0.0, 0.0], 0.8, m, 0.2, 0.2, 8).unwrap();
        for row in &rows {
            if row.level < 100.0 {
                // constant spike measure until the level passes the height
                assert_abs_diff_eq!(
                    row.fraction * dom.measure(&ball),
                    spike,
                    epsilon = 1e-12
                );
            } else {
                assert_eq!(row.fraction, 0.0);
            }
        }
    }
}
