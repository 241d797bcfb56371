//! Coefficient fields, the exponent/constant calculus, operator assembly
//! and the Pucci extremal structure.

mod assemble;
mod pucci;

pub use assemble::{assemble, assemble_frozen, AssembledSystem, MaxPrincipleDiagnostic};
pub use pucci::{frozen_multiplier, pucci_apply, pucci_apply_1d, sym_eig2, PucciSign};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{self, Exp, GridDomain, GridFunction, Point, Shape};

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync>;

pub fn scalar_const(v: f64) -> ScalarField {
    Arc::new(move |_| v)
}

pub fn vector_const(v: [f64; 2]) -> VectorField {
    Arc::new(move |_| v)
}

pub fn matrix_identity() -> MatrixField {
    Arc::new(|_| [[1.0, 0.0], [0.0, 1.0]])
}

/// Operator kind. The critical zero-order integrability threshold p0 is
/// n/2 in the divergence case and the (configurable) constant p_E for
/// non-divergence and Pucci operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorForm {
    Divergence,
    NonDivergence,
    PucciPlus,
    PucciMinus,
}

impl OperatorForm {
    pub fn is_pucci(self) -> bool {
        matches!(self, OperatorForm::PucciPlus | OperatorForm::PucciMinus)
    }

    /// Integrability threshold for the zero-order coefficient.
    pub fn p0(self, n: usize, p_e: f64) -> f64 {
        match self {
            OperatorForm::Divergence => n as f64 / 2.0,
            _ => p_e,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorForm::Divergence => "divergence",
            OperatorForm::NonDivergence => "nondivergence",
            OperatorForm::PucciPlus => "pucci_plus",
            OperatorForm::PucciMinus => "pucci_minus",
        }
    }
}

/// Default p_E: midpoint of the admissible interval (n/2, n).
pub fn default_p_e(n: usize) -> f64 {
    0.75 * n as f64
}

/// Coefficient fields with their ellipticity bounds and integrability
/// exponents. Fields are closed-form callables sampled on grids; any
/// sample point within h/2 of a registered singularity is offset by h/2
/// before evaluation, which keeps assembled entries finite while
/// preserving L^q norms to O(h).
#[derive(Clone)]
pub struct CoefficientSet {
    pub a: MatrixField,
    /// First-order magnitude coefficient of the Pucci operator.
    pub b: VectorField,
    /// Drift inside the divergence.
    pub b1: VectorField,
    /// Outer drift.
    pub b2: VectorField,
    pub c: ScalarField,
    pub lambda: f64,
    pub big_lambda: f64,
    pub q: Exp,
    pub p: Exp,
    singularities: Vec<Point>,
}

impl std::fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("lambda", &self.lambda)
            .field("big_lambda", &self.big_lambda)
            .field("q", &self.q)
            .field("p", &self.p)
            .field("singularities", &self.singularities)
            .finish_non_exhaustive()
    }
}

impl CoefficientSet {
    /// A = I, no lower-order terms, lambda = Lambda = 1, q = p = inf.
    pub fn laplacian() -> Self {
        Self {
            a: matrix_identity(),
            b: vector_const([0.0, 0.0]),
            b1: vector_const([0.0, 0.0]),
            b2: vector_const([0.0, 0.0]),
            c: scalar_const(0.0),
            lambda: 1.0,
            big_lambda: 1.0,
            q: Exp::Inf,
            p: Exp::Inf,
            singularities: Vec::new(),
        }
    }

    pub fn with_matrix(mut self, a: MatrixField, lambda: f64, big_lambda: f64) -> Self {
        self.a = a;
        self.lambda = lambda;
        self.big_lambda = big_lambda;
        self
    }

    pub fn with_c(mut self, c: ScalarField, p: Exp) -> Self {
        self.c = c;
        self.p = p;
        self
    }

    pub fn with_b(mut self, b: VectorField, q: Exp) -> Self {
        self.b = b;
        self.q = q;
        self
    }

    pub fn with_b1(mut self, b1: VectorField, q: Exp) -> Self {
        self.b1 = b1;
        self.q = q;
        self
    }

    pub fn with_b2(mut self, b2: VectorField, q: Exp) -> Self {
        self.b2 = b2;
        self.q = q;
        self
    }

    pub fn with_singularities(mut self, pts: Vec<Point>) -> Self {
        self.singularities = pts;
        self
    }

    /// Offset rule for sampling near singular points.
    pub fn sample_point(&self, p: Point, h: f64) -> Point {
        let mut q = p;
        for s in &self.singularities {
            let d = grid::dist(q, *s);
            if d < h / 2.0 {
                if d == 0.0 {
                    q = [s[0] + h / 2.0, s[1]];
                } else {
                    let scale = (h / 2.0) / d;
                    q = [s[0] + (q[0] - s[0]) * scale, s[1] + (q[1] - s[1]) * scale];
                }
            }
        }
        q
    }

    pub fn a_at(&self, p: Point, h: f64) -> [[f64; 2]; 2] {
        (self.a)(self.sample_point(p, h))
    }

    pub fn b_at(&self, p: Point, h: f64) -> [f64; 2] {
        (self.b)(self.sample_point(p, h))
    }

    pub fn b1_at(&self, p: Point, h: f64) -> [f64; 2] {
        (self.b1)(self.sample_point(p, h))
    }

    pub fn b2_at(&self, p: Point, h: f64) -> [f64; 2] {
        (self.b2)(self.sample_point(p, h))
    }

    pub fn c_at(&self, p: Point, h: f64) -> f64 {
        (self.c)(self.sample_point(p, h))
    }

    /// Checks lambda <= eig(A(x)) <= Lambda at every node of the grid.
    pub fn check_ellipticity(&self, dom: &GridDomain) -> Result<()> {
        let tol = 1e-10 * self.big_lambda.max(1.0);
        for &p in dom.nodes() {
            let a = self.a_at(p, dom.h);
            if (a[0][1] - a[1][0]).abs() > tol {
                return Err(Error::domain(format!(
                    "A({:?}) is not symmetric",
                    p
                )));
            }
            let (e1, e2) = pucci::sym_eig2(a[0][0], 0.5 * (a[0][1] + a[1][0]), a[1][1]);
            let (lo, hi) = if dom.dimension() == 1 {
                (a[0][0], a[0][0])
            } else {
                (e1.min(e2), e1.max(e2))
            };
            if lo < self.lambda - tol || hi > self.big_lambda + tol {
                return Err(Error::domain(format!(
                    "ellipticity bounds violated at {:?}: eig in [{lo:.6}, {hi:.6}] not in [{}, {}]",
                    p, self.lambda, self.big_lambda
                )));
            }
        }
        Ok(())
    }
}

/// The exponents beta_q = q/(q-n) and gamma_p = p/(2p-n), with the
/// continuous limits beta_inf = 1 and gamma_inf = 1/2.
pub fn exponents(q: Exp, p: Exp, n: usize) -> Result<(f64, f64)> {
    let nf = n as f64;
    let beta = match q {
        Exp::Inf => 1.0,
        Exp::Finite(qv) => {
            if qv <= nf {
                return Err(Error::domain(format!("q must exceed n (got q={qv}, n={n})")));
            }
            qv / (qv - nf)
        }
    };
    let gamma = match p {
        Exp::Inf => 0.5,
        Exp::Finite(pv) => {
            if pv <= nf / 2.0 {
                return Err(Error::domain(format!(
                    "p must exceed n/2 (got p={pv}, n={n})"
                )));
            }
            pv / (2.0 * pv - nf)
        }
    };
    Ok((beta, gamma))
}

/// Magnitude of the operator's active first-order coefficients, sampled
/// on a grid. Divergence operators carry b1 and b2 (their norms add),
/// non-divergence ones carry b1, Pucci ones carry b.
fn drift_magnitudes(coeffs: &CoefficientSet, form: OperatorForm, dom: &Arc<GridDomain>) -> Vec<GridFunction> {
    let h = dom.h;
    let mag = |f: &VectorField| {
        let f = f.clone();
        let coeffs = coeffs.clone();
        GridFunction::from_fn(dom.clone(), move |p| {
            let v = f(coeffs.sample_point(p, h));
            (v[0] * v[0] + v[1] * v[1]).sqrt()
        })
    };
    match form {
        OperatorForm::Divergence => vec![mag(&coeffs.b1), mag(&coeffs.b2)],
        OperatorForm::NonDivergence => vec![mag(&coeffs.b1)],
        OperatorForm::PucciPlus | OperatorForm::PucciMinus => vec![mag(&coeffs.b)],
    }
}

fn ul_of(f: &GridFunction, e: Exp) -> Result<f64> {
    match e {
        Exp::Inf => Ok(f.values().iter().fold(0.0f64, |acc, v| acc.max(v.abs()))),
        Exp::Finite(s) => grid::ul_quasinorm(f, s),
    }
}

/// The aggregate coefficient size A = 1 + ||b||^beta_q + ||c||^gamma_p
/// in uniformly-local norms over the given region.
pub fn compute_a(coeffs: &CoefficientSet, form: OperatorForm, dom: &Arc<GridDomain>) -> Result<f64> {
    let n = dom.dimension();
    let (beta, gamma) = exponents(coeffs.q, coeffs.p, n)?;
    let mut b_norm = 0.0;
    for m in drift_magnitudes(coeffs, form, dom) {
        b_norm += ul_of(&m, coeffs.q)?;
    }
    let h = dom.h;
    let cs = coeffs.clone();
    let c_abs = GridFunction::from_fn(dom.clone(), move |p| cs.c_at(p, h).abs());
    let c_norm = ul_of(&c_abs, coeffs.p)?;
    Ok(1.0 + b_norm.powf(beta) + c_norm.powf(gamma))
}

/// The constants entering the sharp Harnack bound e^(C0 A R) on a region
/// of size R.
#[derive(Debug, Clone, Copy)]
pub struct SharpnessConstants {
    pub beta_q: f64,
    pub gamma_p: f64,
    pub a_r: f64,
    pub radius: f64,
}

impl SharpnessConstants {
    pub fn compute(
        coeffs: &CoefficientSet,
        form: OperatorForm,
        dom: &Arc<GridDomain>,
        radius: f64,
    ) -> Result<Self> {
        let (beta_q, gamma_p) = exponents(coeffs.q, coeffs.p, dom.dimension())?;
        let a_r = compute_a(coeffs, form, dom)?;
        Ok(Self {
            beta_q,
            gamma_p,
            a_r,
            radius,
        })
    }
}

/// Ball radius r0 selection for the chain-cover steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum R0Mode {
    WeakHarnack,
    LocalMax,
}

/// r0 = (3A)^-1 for the weak Harnack step, (2A)^-1 for the local maximum
/// principle step; always in (0, 1/2] since A >= 1.
pub fn select_r0(a: f64, mode: R0Mode) -> Result<f64> {
    if !(a >= 1.0) {
        return Err(Error::domain(format!("aggregate size A must be >= 1, got {a}")));
    }
    Ok(match mode {
        R0Mode::WeakHarnack => 1.0 / (3.0 * a),
        R0Mode::LocalMax => 1.0 / (2.0 * a),
    })
}

/// Zoom of the coefficient fields around x0 with factor r:
/// b~(y) = r b(x0 + r y), c~(y) = r^2 c(x0 + r y), g~(y) = r^2 g(x0 + r y),
/// A~(y) = A(x0 + r y). Requires B_{2r}(x0) inside the reference domain.
pub fn rescale(
    coeffs: &CoefficientSet,
    g: &ScalarField,
    x0: Point,
    r: f64,
    reference: &GridDomain,
) -> Result<(CoefficientSet, ScalarField)> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("rescale factor must be positive, got {r}")));
    }
    if !shape_contains_ball(reference.shape, x0, 2.0 * r) {
        return Err(Error::domain(format!(
            "ball B_{{{:.3}}}({:?}) exits the coefficient domain",
            2.0 * r,
            x0
        )));
    }
    let zoom = move |y: Point| [x0[0] + r * y[0], x0[1] + r * y[1]];

    let a0 = coeffs.a.clone();
    let b0 = coeffs.b.clone();
    let b10 = coeffs.b1.clone();
    let b20 = coeffs.b2.clone();
    let c0 = coeffs.c.clone();
    let g0 = g.clone();

    let scaled = CoefficientSet {
        a: Arc::new(move |y| a0(zoom(y))),
        b: Arc::new(move |y| {
            let v = b0(zoom(y));
            [r * v[0], r * v[1]]
        }),
        b1: Arc::new(move |y| {
            let v = b10(zoom(y));
            [r * v[0], r * v[1]]
        }),
        b2: Arc::new(move |y| {
            let v = b20(zoom(y));
            [r * v[0], r * v[1]]
        }),
        c: Arc::new(move |y| r * r * c0(zoom(y))),
        lambda: coeffs.lambda,
        big_lambda: coeffs.big_lambda,
        q: coeffs.q,
        p: coeffs.p,
        singularities: coeffs
            .singularities
            .iter()
            .map(|s| [(s[0] - x0[0]) / r, (s[1] - x0[1]) / r])
            .collect(),
    };
    let g_scaled: ScalarField = Arc::new(move |y| r * r * g0(zoom(y)));
    Ok((scaled, g_scaled))
}

pub fn shape_contains_ball(shape: Shape, center: Point, radius: f64) -> bool {
    match shape {
        Shape::Interval { a, b } => center[0] - radius >= a && center[0] + radius <= b,
        Shape::Box2 { x0, x1, y0, y1 } => {
            center[0] - radius >= x0
                && center[0] + radius <= x1
                && center[1] - radius >= y0
                && center[1] + radius <= y1
        }
        Shape::Disk { radius: rr } => grid::norm(center) + radius <= rr,
        Shape::Annulus { inner, outer } => {
            grid::norm(center) - radius >= inner && grid::norm(center) + radius <= outer
        }
    }
}

/// A Dirichlet problem for one of the operator forms on a grid domain.
#[derive(Clone)]
pub struct EllipticProblem {
    pub domain: Arc<GridDomain>,
    pub form: OperatorForm,
    pub coeffs: CoefficientSet,
    /// Right-hand side g of L u = g.
    pub g: ScalarField,
    /// Optional divergence-form flux right-hand side div(h).
    pub h_flux: Option<VectorField>,
    /// Dirichlet boundary data.
    pub boundary: ScalarField,
    /// Configurable constant p_E in (n/2, n).
    pub p_e: f64,
}

impl EllipticProblem {
    pub fn new(
        domain: Arc<GridDomain>,
        form: OperatorForm,
        coeffs: CoefficientSet,
        g: ScalarField,
        boundary: ScalarField,
    ) -> Result<Self> {
        let p = Self {
            domain,
            form,
            coeffs,
            g,
            h_flux: None,
            boundary,
            p_e: 0.0,
        };
        let mut p = p;
        p.p_e = default_p_e(p.domain.dimension());
        p.validate()?;
        Ok(p)
    }

    pub fn with_h_flux(mut self, h: VectorField) -> Result<Self> {
        if self.form != OperatorForm::Divergence {
            return Err(Error::domain(
                "div(h) right-hand sides require the divergence form",
            ));
        }
        self.h_flux = Some(h);
        Ok(self)
    }

    pub fn with_p_e(mut self, p_e: f64) -> Result<Self> {
        self.p_e = p_e;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.domain.dimension();
        let nf = n as f64;
        if self.form != OperatorForm::Divergence && !(self.p_e > nf / 2.0 && self.p_e < nf) {
            return Err(Error::domain(format!(
                "p_E must lie in (n/2, n), got {} for n={n}",
                self.p_e
            )));
        }
        if let Exp::Finite(q) = self.coeffs.q {
            if q <= nf {
                return Err(Error::domain(format!("q must exceed n, got q={q}, n={n}")));
            }
        }
        let p0 = self.form.p0(n, self.p_e);
        if let Exp::Finite(p) = self.coeffs.p {
            if p <= p0 {
                return Err(Error::domain(format!(
                    "p must exceed p0={p0}, got p={p} ({} form)",
                    self.form.name()
                )));
            }
        }
        if !(self.coeffs.lambda > 0.0 && self.coeffs.lambda <= self.coeffs.big_lambda) {
            return Err(Error::domain("need 0 < lambda <= Lambda"));
        }
        Ok(())
    }

    /// Aggregate coefficient size over this problem's domain.
    pub fn aggregate_size(&self) -> Result<f64> {
        compute_a(&self.coeffs, self.form, &self.domain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exponent_limits_at_infinity() {
        let (beta, gamma) = exponents(Exp::Inf, Exp::Inf, 1).unwrap();
        assert_eq!(beta, 1.0);
        assert_eq!(gamma, 0.5);
    }

    #[test]
    fn exponent_q_twice_n() {
        for n in [1usize, 2] {
            let (beta, _) = exponents(Exp::Finite(2.0 * n as f64), Exp::Inf, n).unwrap();
            assert_abs_diff_eq!(beta, 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn exponent_p_equals_n() {
        let (_, gamma) = exponents(Exp::Inf, Exp::Finite(2.0), 2).unwrap();
        assert_abs_diff_eq!(gamma, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn exponent_out_of_range_errors() {
        assert!(exponents(Exp::Finite(1.0), Exp::Inf, 1).is_err());
        assert!(exponents(Exp::Inf, Exp::Finite(0.5), 1).is_err());
    }

    #[test]
    fn aggregate_size_bare_laplacian() {
        let dom = GridDomain::interval(-2.0, 2.0, 0.05).unwrap();
        let a = compute_a(&CoefficientSet::laplacian(), OperatorForm::Divergence, &dom).unwrap();
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn aggregate_size_unit_norms() {
        // ||b|| = 1 and ||c|| = 1 give A = 3 regardless of q, p
        let dom = GridDomain::interval(-2.0, 2.0, 0.05).unwrap();
        let coeffs = CoefficientSet::laplacian()
            .with_b2(vector_const([1.0, 0.0]), Exp::Inf)
            .with_c(scalar_const(1.0), Exp::Inf);
        let a = compute_a(&coeffs, OperatorForm::Divergence, &dom).unwrap();
        assert_abs_diff_eq!(a, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn aggregate_size_constant_c_four() {
        // gamma_inf = 1/2 so c = 4 contributes 2
        let dom = GridDomain::interval(-2.0, 2.0, 0.05).unwrap();
        let coeffs = CoefficientSet::laplacian().with_c(scalar_const(4.0), Exp::Inf);
        let a = compute_a(&coeffs, OperatorForm::Divergence, &dom).unwrap();
        assert_abs_diff_eq!(a, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn aggregate_monotone_in_coefficients() {
        let dom = GridDomain::interval(-3.0, 3.0, 0.05).unwrap();
        let small = CoefficientSet::laplacian()
            .with_b2(vector_const([0.5, 0.0]), Exp::Finite(3.0))
            .with_c(scalar_const(1.0), Exp::Finite(2.0));
        let large = CoefficientSet::laplacian()
            .with_b2(vector_const([1.5, 0.0]), Exp::Finite(3.0))
            .with_c(scalar_const(2.5), Exp::Finite(2.0));
        let a_small = compute_a(&small, OperatorForm::Divergence, &dom).unwrap();
        let a_large = compute_a(&large, OperatorForm::Divergence, &dom).unwrap();
        assert!(a_small >= 1.0);
        assert!(a_large > a_small);
    }

    #[test]
    fn select_r0_values() {
        assert_abs_diff_eq!(select_r0(1.0, R0Mode::WeakHarnack).unwrap(), 1.0 / 3.0);
        assert_abs_diff_eq!(select_r0(3.0, R0Mode::WeakHarnack).unwrap(), 1.0 / 9.0);
        assert_abs_diff_eq!(select_r0(1.0, R0Mode::LocalMax).unwrap(), 0.5);
        assert!(select_r0(0.5, R0Mode::WeakHarnack).is_err());
    }

    #[test]
    fn rescale_constant_fields() {
        let dom = GridDomain::interval(-2.0, 2.0, 0.01).unwrap();
        let coeffs = CoefficientSet::laplacian()
            .with_b2(vector_const([1.0, 0.0]), Exp::Inf)
            .with_c(scalar_const(1.0), Exp::Inf);
        let g = scalar_const(0.0);
        let (scaled, _) = rescale(&coeffs, &g, [0.0, 0.0], 0.1, &dom).unwrap();
        let b = (scaled.b2)([0.3, 0.0]);
        assert_abs_diff_eq!(b[0], 0.1, epsilon = 1e-15);
        let c = (scaled.c)([0.3, 0.0]);
        assert_abs_diff_eq!(c, 0.01, epsilon = 1e-15);
    }

    #[test]
    fn rescale_rejects_exiting_ball() {
        let dom = GridDomain::interval(-1.0, 1.0, 0.01).unwrap();
        let coeffs = CoefficientSet::laplacian();
        let g = scalar_const(0.0);
        assert!(rescale(&coeffs, &g, [0.9, 0.0], 0.1, &dom).is_err());
    }

    #[test]
    fn rescale_norm_identity_singular_field() {
        // b(x) = |x|^(-1/2) around x0 = 1 with q = 3, r = 1/4:
        // ||b~||_{L^q(B_2)} = r^(1 - n/q) ||b||_{L^q(B_{2r}(x0))}.
        // Oracle below computes both sides by adaptive quadrature.
        let q = 3.0;
        let r = 0.25;
        let x0 = 1.0;
        let f = |x: f64| x.abs().powf(-0.5);
        // right side: integral over (x0-2r, x0+2r) of |b|^q
        let rhs_int = crate::solver::adaptive_simpson(
            &|x| f(x).powf(q),
            x0 - 2.0 * r,
            x0 + 2.0 * r,
            1e-12,
            40,
        );
        let rhs = r.powf(1.0 - 1.0 / q) * rhs_int.powf(1.0 / q);
        // left side: integral over (-2, 2) of |r b(x0 + r y)|^q
        let lhs_int = crate::solver::adaptive_simpson(
            &|y| (r * f(x0 + r * y)).powf(q),
            -2.0,
            2.0,
            1e-12,
            40,
        );
        let lhs = lhs_int.powf(1.0 / q);
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-4);
    }

    #[test]
    fn singularity_offset_keeps_samples_finite() {
        let coeffs = CoefficientSet::laplacian()
            .with_c(
                Arc::new(|p: Point| -1.0 / grid::norm(p)),
                Exp::Finite(0.75),
            )
            .with_singularities(vec![[0.0, 0.0]]);
        let v = coeffs.c_at([0.0, 0.0], 0.1);
        assert!(v.is_finite());
        assert_abs_diff_eq!(v, -20.0, epsilon = 1e-12);
    }
}
