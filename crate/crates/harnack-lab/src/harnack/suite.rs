//! Training and held-out problem suites for calibrating and stress
//! testing the Harnack constants.
//!
//! The training suite uses the bare Laplacian and bounded-coefficient
//! problems; the held-out suite adds locally unbounded drift and
//! zero-order coefficients sampled on offset grids. Constants are
//! calibrated on the training suite only.

use std::sync::Arc;

use super::measure::{calibrate, measure_harnack, CalibratedConstants, HarnackMeasurement};
use crate::error::Result;
use crate::grid::{Exp, GridDomain, Point};
use crate::operators::{
    scalar_const, vector_const, CoefficientSet, EllipticProblem, OperatorForm, ScalarField,
    VectorField,
};
use crate::solver::{solve_problem, SolveOptions};

pub struct SuiteCase {
    pub name: String,
    pub radius: f64,
    pub h0: f64,
    build: Arc<dyn Fn(f64) -> Result<EllipticProblem> + Send + Sync>,
}

impl SuiteCase {
    pub fn new(
        name: impl Into<String>,
        radius: f64,
        h0: f64,
        build: impl Fn(f64) -> Result<EllipticProblem> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            radius,
            h0,
            build: Arc::new(build),
        }
    }

    pub fn problem(&self, h: f64) -> Result<EllipticProblem> {
        (self.build)(h)
    }

    pub fn solve_and_measure(
        &self,
        h: f64,
        consts: &CalibratedConstants,
    ) -> Result<(usize, HarnackMeasurement)> {
        let problem = self.problem(h)?;
        let solution = solve_problem(&problem, &SolveOptions::default())?;
        let m = measure_harnack(&problem, &solution.u, self.radius, consts)?;
        Ok((problem.domain.dimension(), m))
    }

    /// Violation factors extrapolated from the h and h/2 grids
    /// (linear Richardson on the O(h^2)-converging factors).
    pub fn extrapolated_factors(&self, consts: &CalibratedConstants) -> Result<SuiteFactors> {
        let (_, coarse) = self.solve_and_measure(self.h0, consts)?;
        let (_, fine) = self.solve_and_measure(self.h0 / 2.0, consts)?;
        let extrap = |c: f64, f: f64| f + (f - c) / 3.0;
        Ok(SuiteFactors {
            name: self.name.clone(),
            weak: extrap(coarse.weak_factor(), fine.weak_factor()),
            full: extrap(coarse.full_factor(), fine.full_factor()),
            local_max: extrap(coarse.local_max_factor(), fine.local_max_factor()),
            fine,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SuiteFactors {
    pub name: String,
    pub weak: f64,
    pub full: f64,
    pub local_max: f64,
    pub fine: HarnackMeasurement,
}

fn interval_case(
    name: &str,
    radius: f64,
    h0: f64,
    coeffs: impl Fn() -> CoefficientSet + Send + Sync + 'static,
    g: ScalarField,
    boundary: impl Fn(Point) -> f64 + Send + Sync + Clone + 'static,
) -> SuiteCase {
    SuiteCase::new(name, radius, h0, move |h| {
        let dom = GridDomain::interval(-radius - 1.0, radius + 1.0, h)?;
        let bc = boundary.clone();
        EllipticProblem::new(
            dom,
            OperatorForm::Divergence,
            coeffs(),
            g.clone(),
            Arc::new(move |p| bc(p)),
        )
    })
}

/// u'' - c0 u = 0 with boundary cosh(sqrt(c0) x): the even positive
/// solution, rate sqrt(c0).
fn cosh_case(c0: f64, radius: f64) -> SuiteCase {
    let s = c0.sqrt();
    interval_case(
        &format!("cosh c0={c0} R={radius}"),
        radius,
        1.0 / 64.0,
        move || CoefficientSet::laplacian().with_c(scalar_const(-c0), Exp::Inf),
        scalar_const(0.0),
        move |p| (s * p[0]).cosh(),
    )
}

/// u'' - 2 b0 u' = 0 with boundary e^{2 b0 x}: the growing mode, rate
/// 2 b0 over the signed direction.
fn drift_case(b0: f64, radius: f64) -> SuiteCase {
    interval_case(
        &format!("drift b0={b0} R={radius}"),
        radius,
        1.0 / 64.0,
        move || {
            CoefficientSet::laplacian().with_b2(vector_const([-2.0 * b0, 0.0]), Exp::Inf)
        },
        scalar_const(0.0),
        move |p| (2.0 * b0 * p[0]).exp(),
    )
}

/// u'' - 2 b0 u' - c0 u = 0 with the oracle boundary e^{D x},
/// D = b0 + sqrt(b0^2 + c0).
fn mixed_case(b0: f64, c0: f64, radius: f64) -> SuiteCase {
    let d = b0 + (b0 * b0 + c0).sqrt();
    interval_case(
        &format!("mixed b0={b0} c0={c0} R={radius}"),
        radius,
        1.0 / 64.0,
        move || {
            CoefficientSet::laplacian()
                .with_b2(vector_const([-2.0 * b0, 0.0]), Exp::Inf)
                .with_c(scalar_const(-c0), Exp::Inf)
        },
        scalar_const(0.0),
        move |p| (d * p[0]).exp(),
    )
}

fn linear_case(radius: f64) -> SuiteCase {
    interval_case(
        &format!("bare linear R={radius}"),
        radius,
        1.0 / 64.0,
        CoefficientSet::laplacian,
        scalar_const(0.0),
        move |p| 2.0 + p[0] / (radius + 1.0),
    )
}

/// u'' = -1 with positive boundary: a data-term case.
fn poisson_case(radius: f64) -> SuiteCase {
    interval_case(
        &format!("poisson R={radius}"),
        radius,
        1.0 / 64.0,
        CoefficientSet::laplacian,
        scalar_const(-1.0),
        |_| 1.0,
    )
}

/// Locally unbounded drift b2(x) = |x|^(-1/2) in L^q_ul with q < 2n,
/// singularity offset at sampling time.
fn singular_drift_case(radius: f64, q: f64) -> SuiteCase {
    interval_case(
        &format!("singular-b q={q} R={radius}"),
        radius,
        1.0 / 64.0,
        move || {
            let b: VectorField = Arc::new(|p: Point| [p[0].abs().powf(-0.5), 0.0]);
            CoefficientSet::laplacian()
                .with_b2(b, Exp::Finite(q))
                .with_singularities(vec![[0.0, 0.0]])
        },
        scalar_const(0.0),
        |p| 1.5 + p[0].signum() * 0.5,
    )
}

/// Locally unbounded zero-order coefficient c(x) = -|x|^(-1).
fn singular_c_case(radius: f64, p_exp: f64) -> SuiteCase {
    interval_case(
        &format!("singular-c p={p_exp} R={radius}"),
        radius,
        1.0 / 64.0,
        move || {
            let c: ScalarField = Arc::new(|p: Point| -1.0 / p[0].abs());
            CoefficientSet::laplacian()
                .with_c(c, Exp::Finite(p_exp))
                .with_singularities(vec![[0.0, 0.0]])
        },
        scalar_const(0.0),
        |_| 1.0,
    )
}

/// Both unbounded coefficients together.
fn singular_both_case(radius: f64) -> SuiteCase {
    interval_case(
        &format!("singular-bc R={radius}"),
        radius,
        1.0 / 64.0,
        move || {
            let b: VectorField = Arc::new(|p: Point| [p[0].abs().powf(-0.5), 0.0]);
            let c: ScalarField = Arc::new(|p: Point| -1.0 / p[0].abs());
            CoefficientSet::laplacian()
                .with_b2(b, Exp::Finite(1.8))
                .with_c(c, Exp::Finite(0.75))
                .with_singularities(vec![[0.0, 0.0]])
        },
        scalar_const(0.0),
        |_| 2.0,
    )
}

/// 2D exterior annulus, Laplace: positive log-radial solution.
fn annulus_case(radius: f64) -> SuiteCase {
    SuiteCase::new(format!("annulus laplace R={radius}"), radius, 0.1, move |h| {
        let dom = GridDomain::annulus(1.5, radius + 1.0, h)?;
        let denom = ((radius + 1.0) / 1.5f64).ln();
        EllipticProblem::new(
            dom,
            OperatorForm::Divergence,
            CoefficientSet::laplacian(),
            scalar_const(0.0),
            Arc::new(move |p: Point| {
                0.2 + (crate::grid::norm(p) / 1.5).ln() / denom
            }),
        )
    })
}

/// 2D disk, positive harmonic (affine) solution.
fn disk_case(radius: f64) -> SuiteCase {
    SuiteCase::new(format!("disk harmonic R={radius}"), radius, 0.1, move |h| {
        let dom = GridDomain::disk(radius + 1.0, h)?;
        EllipticProblem::new(
            dom,
            OperatorForm::Divergence,
            CoefficientSet::laplacian(),
            scalar_const(0.0),
            Arc::new(move |p: Point| 2.0 + p[0] / (2.0 * (radius + 1.0))),
        )
    })
}

/// Non-divergence form with variable bounded isotropic A.
fn variable_a_case(radius: f64) -> SuiteCase {
    SuiteCase::new(format!("variable-A R={radius}"), radius, 1.0 / 64.0, move |h| {
        let dom = GridDomain::interval(-radius - 1.0, radius + 1.0, h)?;
        let a = Arc::new(|p: Point| {
            let v = 1.0 + 0.5 * (p[0] * 0.7).sin();
            [[v, 0.0], [0.0, v]]
        });
        EllipticProblem::new(
            dom,
            OperatorForm::NonDivergence,
            CoefficientSet::laplacian()
                .with_matrix(a, 0.5, 1.5)
                .with_c(scalar_const(-1.0), Exp::Inf),
            scalar_const(0.0),
            Arc::new(|p: Point| p[0].cosh()),
        )
    })
}

/// Bounded-coefficient training problems: these pin the calibrated
/// constants, so they include the extreme coefficient sizes and radii
/// the held-out suite stays inside of.
pub fn training_suite() -> Vec<SuiteCase> {
    vec![
        linear_case(4.0),
        linear_case(16.0),
        cosh_case(1.0, 4.0),
        cosh_case(1.0, 16.0),
        cosh_case(16.0, 8.0),
        cosh_case(16.0, 16.0),
        drift_case(1.0, 4.0),
        drift_case(4.0, 8.0),
        drift_case(4.0, 16.0),
        mixed_case(3.0, 4.0, 8.0),
        mixed_case(4.0, 16.0, 16.0),
        poisson_case(4.0),
    ]
}

/// Held-out problems, including the locally unbounded coefficients on
/// offset grids; never used for calibration.
pub fn held_out_suite() -> Vec<SuiteCase> {
    vec![
        cosh_case(4.0, 4.0),
        cosh_case(4.0, 8.0),
        cosh_case(4.0, 16.0),
        cosh_case(9.0, 4.0),
        cosh_case(9.0, 8.0),
        drift_case(2.0, 4.0),
        drift_case(2.0, 8.0),
        drift_case(2.0, 16.0),
        drift_case(3.0, 4.0),
        drift_case(3.0, 16.0),
        mixed_case(1.0, 1.0, 4.0),
        mixed_case(1.0, 1.0, 8.0),
        mixed_case(2.0, 9.0, 4.0),
        poisson_case(8.0),
        variable_a_case(4.0),
        singular_drift_case(4.0, 1.8),
        singular_drift_case(8.0, 1.5),
        singular_c_case(4.0, 0.75),
        singular_c_case(8.0, 0.75),
        singular_both_case(4.0),
        annulus_case(4.0),
        disk_case(4.0),
    ]
}

/// Calibrate the Harnack constants on a suite (defaults: the training
/// suite). The margin leaves headroom for grid noise between training
/// and held-out measurements.
pub fn calibrate_on(suite: &[SuiteCase], eps: f64, margin: f64) -> Result<CalibratedConstants> {
    let defaults = CalibratedConstants {
        eps,
        ..CalibratedConstants::default()
    };
    let mut measurements = Vec::with_capacity(suite.len());
    for case in suite {
        measurements.push(case.solve_and_measure(case.h0, &defaults)?);
    }
    Ok(calibrate(&measurements, eps, margin))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_suite_is_bounded_coefficient_only() {
        for case in training_suite() {
            let p = case.problem(0.05).unwrap();
            assert!(matches!(p.coeffs.q, Exp::Inf));
            assert!(matches!(p.coeffs.p, Exp::Inf));
        }
    }

    #[test]
    fn calibrated_constants_cover_training() {
        let suite: Vec<SuiteCase> = vec![linear_case(4.0), cosh_case(1.0, 4.0)];
        let consts = calibrate_on(&suite, 0.5, 1.05).unwrap();
        assert!(consts.c0_weak > 0.0);
        for case in &suite {
            let (_, m) = case.solve_and_measure(case.h0, &consts).unwrap();
            assert!(!m.weak_violated, "{} violated weak bound", case.name);
            assert!(!m.full_violated, "{}", case.name);
            assert!(!m.local_max_violated, "{}", case.name);
        }
    }
}
