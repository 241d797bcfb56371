//! Experiment configuration: a flat key-value text format with sections
//! (a TOML subset), validated before any solve.
//!
//! ```toml
//! [experiment]
//! kind = "harnack"        # harnack | weak_harnack | local_max | abp |
//!                         # chain | smp | dead_core | landis | oracle
//! operator = "divergence" # divergence | nondivergence | pucci_plus | pucci_minus
//! seed = 42
//! eps = 0.5
//! refine = 0
//!
//! [domain]
//! shape = "interval"      # interval | box | disk | annulus
//! a = -5.0
//! b = 5.0
//! h = 0.05
//!
//! [coefficients]          # expression strings over x1, x2, r
//! c = "-1"
//! q = "inf"
//! p = "inf"
//!
//! [data]
//! g = "0"
//! boundary = "exp(x1)"
//!
//! [sweep]
//! r_grid = [4.0, 8.0, 16.0]
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{Exp, GridDomain, Point};
use crate::operators::{CoefficientSet, EllipticProblem, OperatorForm, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Harnack,
    WeakHarnack,
    LocalMax,
    Abp,
    Chain,
    Smp,
    DeadCore,
    Landis,
    Oracle,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "harnack" => Self::Harnack,
            "weak_harnack" => Self::WeakHarnack,
            "local_max" => Self::LocalMax,
            "abp" => Self::Abp,
            "chain" => Self::Chain,
            "smp" => Self::Smp,
            "dead_core" => Self::DeadCore,
            "landis" => Self::Landis,
            "oracle" => Self::Oracle,
            other => return Err(Error::config(format!("unknown experiment kind '{other}'"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Harnack => "harnack",
            Self::WeakHarnack => "weak_harnack",
            Self::LocalMax => "local_max",
            Self::Abp => "abp",
            Self::Chain => "chain",
            Self::Smp => "smp",
            Self::DeadCore => "dead_core",
            Self::Landis => "landis",
            Self::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
struct ExperimentSection {
    kind: String,
    #[serde(default = "default_operator")]
    operator: String,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_eps")]
    eps: f64,
    #[serde(default)]
    refine: u32,
}

fn default_operator() -> String {
    "divergence".into()
}

fn default_eps() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize, Default)]
struct DomainSection {
    #[serde(default)]
    shape: Option<String>,
    #[serde(default)]
    a: Option<f64>,
    #[serde(default)]
    b: Option<f64>,
    #[serde(default)]
    radius: Option<f64>,
    #[serde(default)]
    inner: Option<f64>,
    #[serde(default)]
    outer: Option<f64>,
    #[serde(default)]
    h: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
struct CoefficientsSection {
    #[serde(default)]
    a: Option<String>,
    #[serde(default)]
    b: Option<String>,
    #[serde(default)]
    b1: Option<String>,
    #[serde(default)]
    b2: Option<String>,
    #[serde(default)]
    c: Option<String>,
    #[serde(default)]
    lambda: Option<f64>,
    #[serde(default)]
    big_lambda: Option<f64>,
    #[serde(default)]
    q: Option<String>,
    #[serde(default)]
    p: Option<String>,
    #[serde(default)]
    p_e: Option<f64>,
    #[serde(default)]
    singularities: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize, Default)]
struct DataSection {
    #[serde(default)]
    g: Option<String>,
    #[serde(default)]
    boundary: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Default)]
struct SweepSection {
    #[serde(default)]
    r_grid: Vec<f64>,
    #[serde(default)]
    delta_grid: Vec<f64>,
    #[serde(default)]
    j_grid: Vec<f64>,
    #[serde(default)]
    r0_grid: Vec<f64>,
    #[serde(default)]
    b0_grid: Vec<f64>,
    #[serde(default)]
    c0_grid: Vec<f64>,
    #[serde(default)]
    k_grid: Vec<f64>,
    /// log-power exponent of the built-in nonlinearity family
    #[serde(default)]
    f_log_power: Option<f64>,
    /// power family f(s) = coef s^exponent
    #[serde(default)]
    f_power_coef: Option<f64>,
    #[serde(default)]
    f_power_exp: Option<f64>,
    #[serde(default)]
    u0: Option<f64>,
    #[serde(default)]
    c0_constant: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
struct ConfigFile {
    experiment: ExperimentSection,
    #[serde(default)]
    domain: DomainSection,
    #[serde(default)]
    coefficients: CoefficientsSection,
    #[serde(default)]
    data: DataSection,
    #[serde(default)]
    sweep: SweepSection,
}

/// Validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub form: OperatorForm,
    pub seed: u64,
    pub eps: f64,
    pub refine: u32,
    pub h: f64,
    pub shape: Option<ShapeSpec>,
    pub coeffs_spec: CoeffsSpec,
    pub g: Expr,
    pub boundary: Expr,
    pub r_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub j_grid: Vec<f64>,
    pub r0_grid: Vec<f64>,
    pub b0_grid: Vec<f64>,
    pub c0_grid: Vec<f64>,
    pub k_grid: Vec<f64>,
    pub f_log_power: Option<f64>,
    pub f_power: Option<(f64, f64)>,
    pub u0: Option<f64>,
    pub c0_constant: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub enum ShapeSpec {
    Interval { a: f64, b: f64 },
    Box2 { a: f64, b: f64 },
    Disk { radius: f64 },
    Annulus { inner: f64, outer: f64 },
}

/// Coefficient expressions with their exponents; the matrix coefficient
/// is the isotropic scalar `a`.
#[derive(Debug, Clone)]
pub struct CoeffsSpec {
    pub a: Expr,
    pub b: Expr,
    pub b1: Expr,
    pub b2: Expr,
    pub c: Expr,
    pub lambda: f64,
    pub big_lambda: f64,
    pub q: Exp,
    pub p: Exp,
    pub p_e: Option<f64>,
    pub singularities: Vec<Point>,
}

fn parse_exp(s: Option<&str>) -> Result<Exp> {
    match s {
        None => Ok(Exp::Inf),
        Some("inf") | Some("infinity") => Ok(Exp::Inf),
        Some(v) => {
            let x: f64 = v
                .parse()
                .map_err(|_| Error::config(format!("bad exponent '{v}'")))?;
            Ok(Exp::Finite(x))
        }
    }
}

fn parse_expr_or(src: Option<&str>, default: &str) -> Result<Expr> {
    Expr::parse(src.unwrap_or(default))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::config(format!("toml parse error: {e}")))?;
        Self::from_file_struct(file)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    fn from_file_struct(file: ConfigFile) -> Result<Self> {
        let kind = ExperimentKind::parse(&file.experiment.kind)?;
        let form = match file.experiment.operator.as_str() {
            "divergence" => OperatorForm::Divergence,
            "nondivergence" => OperatorForm::NonDivergence,
            "pucci_plus" => OperatorForm::PucciPlus,
            "pucci_minus" => OperatorForm::PucciMinus,
            other => return Err(Error::config(format!("unknown operator form '{other}'"))),
        };
        if !(file.experiment.eps > 0.0) {
            return Err(Error::config("eps must be positive"));
        }
        let shape = match file.domain.shape.as_deref() {
            None => None,
            Some("interval") => Some(ShapeSpec::Interval {
                a: file
                    .domain
                    .a
                    .ok_or_else(|| Error::config("interval needs 'a'"))?,
                b: file
                    .domain
                    .b
                    .ok_or_else(|| Error::config("interval needs 'b'"))?,
            }),
            Some("box") => Some(ShapeSpec::Box2 {
                a: file.domain.a.ok_or_else(|| Error::config("box needs 'a'"))?,
                b: file.domain.b.ok_or_else(|| Error::config("box needs 'b'"))?,
            }),
            Some("disk") => Some(ShapeSpec::Disk {
                radius: file
                    .domain
                    .radius
                    .ok_or_else(|| Error::config("disk needs 'radius'"))?,
            }),
            Some("annulus") => Some(ShapeSpec::Annulus {
                inner: file
                    .domain
                    .inner
                    .ok_or_else(|| Error::config("annulus needs 'inner'"))?,
                outer: file
                    .domain
                    .outer
                    .ok_or_else(|| Error::config("annulus needs 'outer'"))?,
            }),
            Some(other) => return Err(Error::config(format!("unknown shape '{other}'"))),
        };
        let h = file.domain.h.unwrap_or(1.0 / 64.0);
        if !(h > 0.0) {
            return Err(Error::config("grid spacing h must be positive"));
        }
        let coeffs_spec = CoeffsSpec {
            a: parse_expr_or(file.coefficients.a.as_deref(), "1")?,
            b: parse_expr_or(file.coefficients.b.as_deref(), "0")?,
            b1: parse_expr_or(file.coefficients.b1.as_deref(), "0")?,
            b2: parse_expr_or(file.coefficients.b2.as_deref(), "0")?,
            c: parse_expr_or(file.coefficients.c.as_deref(), "0")?,
            lambda: file.coefficients.lambda.unwrap_or(1.0),
            big_lambda: file.coefficients.big_lambda.unwrap_or(1.0),
            q: parse_exp(file.coefficients.q.as_deref())?,
            p: parse_exp(file.coefficients.p.as_deref())?,
            p_e: file.coefficients.p_e,
            singularities: file.coefficients.singularities.clone(),
        };
        let config = Self {
            kind,
            form,
            seed: file.experiment.seed,
            eps: file.experiment.eps,
            refine: file.experiment.refine,
            h,
            shape,
            coeffs_spec,
            g: parse_expr_or(file.data.g.as_deref(), "0")?,
            boundary: parse_expr_or(file.data.boundary.as_deref(), "0")?,
            r_grid: file.sweep.r_grid,
            delta_grid: file.sweep.delta_grid,
            j_grid: file.sweep.j_grid,
            r0_grid: file.sweep.r0_grid,
            b0_grid: file.sweep.b0_grid,
            c0_grid: file.sweep.c0_grid,
            k_grid: file.sweep.k_grid,
            f_log_power: file.sweep.f_log_power,
            f_power: match (file.sweep.f_power_coef, file.sweep.f_power_exp) {
                (Some(c), Some(e)) => Some((c, e)),
                (None, None) => None,
                _ => {
                    return Err(Error::config(
                        "power nonlinearity needs both f_power_coef and f_power_exp",
                    ))
                }
            },
            u0: file.sweep.u0,
            c0_constant: file.sweep.c0_constant,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let need_r_grid = matches!(
            self.kind,
            ExperimentKind::Harnack
                | ExperimentKind::WeakHarnack
                | ExperimentKind::LocalMax
                | ExperimentKind::Chain
                | ExperimentKind::Landis
        );
        if need_r_grid && self.r_grid.is_empty() {
            return Err(Error::config(format!(
                "{} experiments need a nonempty r_grid",
                self.kind.name()
            )));
        }
        if self.r_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("r_grid must be strictly increasing"));
        }
        if self.kind == ExperimentKind::Oracle && self.b0_grid.is_empty() && self.c0_grid.is_empty()
        {
            return Err(Error::config("oracle experiments need b0_grid or c0_grid"));
        }
        if matches!(self.kind, ExperimentKind::Smp | ExperimentKind::DeadCore)
            && self.f_log_power.is_none()
            && self.f_power.is_none()
        {
            return Err(Error::config(
                "smp and dead_core experiments need f_log_power or a power family",
            ));
        }
        Ok(())
    }

    /// Monotone decreasing delta decades, defaulting to 1e-2..1e-12.
    pub fn delta_grid_or_default(&self) -> Vec<f64> {
        if self.delta_grid.is_empty() {
            crate::smp::default_delta_grid()
        } else {
            self.delta_grid.clone()
        }
    }

    /// The configured coefficient set, sampled through expressions.
    pub fn coefficient_set(&self) -> CoefficientSet {
        let spec = &self.coeffs_spec;
        let a = spec.a.clone();
        let b = spec.b.clone();
        let b1 = spec.b1.clone();
        let b2 = spec.b2.clone();
        let c = spec.c.clone();
        CoefficientSet::laplacian()
            .with_matrix(
                Arc::new(move |p: Point| {
                    let v = a.eval(p);
                    [[v, 0.0], [0.0, v]]
                }),
                spec.lambda,
                spec.big_lambda,
            )
            .with_b(Arc::new(move |p: Point| [b.eval(p), 0.0]), spec.q)
            .with_b1(Arc::new(move |p: Point| [b1.eval(p), 0.0]), spec.q)
            .with_b2(Arc::new(move |p: Point| [b2.eval(p), 0.0]), spec.q)
            .with_c(
                {
                    let c = c.clone();
                    Arc::new(move |p: Point| c.eval(p))
                },
                spec.p,
            )
            .with_singularities(spec.singularities.clone())
    }

    /// Domain built from the config's shape section.
    pub fn build_domain(&self, h: f64) -> Result<std::sync::Arc<GridDomain>> {
        match self.shape {
            Some(ShapeSpec::Interval { a, b }) => GridDomain::interval(a, b, h),
            Some(ShapeSpec::Box2 { a, b }) => GridDomain::box2(a, b, a, b, h),
            Some(ShapeSpec::Disk { radius }) => GridDomain::disk(radius, h),
            Some(ShapeSpec::Annulus { inner, outer }) => GridDomain::annulus(inner, outer, h),
            None => Err(Error::config("this experiment kind needs a [domain] section")),
        }
    }

    /// Problem on the config's domain with the config's data.
    pub fn build_problem(&self, h: f64) -> Result<EllipticProblem> {
        let dom = self.build_domain(h)?;
        let g = self.g.clone();
        let bc = self.boundary.clone();
        let gf: ScalarField = Arc::new(move |p: Point| g.eval(p));
        let bcf: ScalarField = Arc::new(move |p: Point| bc.eval(p));
        let problem = EllipticProblem::new(dom, self.form, self.coefficient_set(), gf, bcf)?;
        match self.coeffs_spec.p_e {
            Some(pe) => problem.with_p_e(pe),
            None => Ok(problem),
        }
    }
}
