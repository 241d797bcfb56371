//! Finite-difference assembly of the elliptic operators.
//!
//! The assembled system is M u = rhs with M = -L and identity rows at
//! Dirichlet nodes, so that solutions of M u = rhs approximate L u = g
//! (plus div(h) in divergence form) with the given boundary data.
//!
//! Discretization: divergence form uses centered flux differences with
//! midpoint coefficient averaging; non-divergence uses centered second
//! differences; first-order terms are centered with a first-order upwind
//! fallback on any interface whose cell Peclet number |b| h / a exceeds 2.
//! Pucci operators are linearized by freezing the Hessian eigen-frame and
//! the gradient direction of the supplied state.
//!
//! On polar grids the second-order coefficient must be isotropic
//! (A = a(x) I); matrix anisotropy is supported on box grids in
//! non-divergence form only.

use std::f64::consts::PI;

use super::pucci::{frozen_multiplier, PucciSign};
use super::{EllipticProblem, OperatorForm};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, Layout, Point};

const PECLET_LIMIT: f64 = 2.0;

/// Structural facts about the assembled matrix, checked per assembly.
/// `passes` is the discrete maximum-principle diagnostic: Z-pattern plus
/// weak diagonal dominance of M = -L.
#[derive(Debug, Clone, Copy)]
pub struct MaxPrincipleDiagnostic {
    /// Off-diagonal entries of M are all nonpositive (within rounding).
    pub z_pattern: bool,
    /// Every row is weakly diagonally dominant.
    pub diag_dominant: bool,
    /// The sampled zero-order coefficient is nonpositive everywhere.
    pub c_nonpositive: bool,
    /// Fraction of first-order term instances that needed upwinding.
    pub upwind_fraction: f64,
}

impl MaxPrincipleDiagnostic {
    pub fn passes(&self) -> bool {
        self.z_pattern && self.diag_dominant
    }
}

#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
    pub dirichlet: Vec<bool>,
    pub diagnostic: MaxPrincipleDiagnostic,
}

impl AssembledSystem {
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            out[i] = row.iter().map(|&(j, v)| v * x[j]).sum();
        }
    }

    /// Max residual |M u - rhs| over all rows, relative to row scale.
    pub fn residual_inf(&self, u: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (i, row) in self.rows.iter().enumerate() {
            let mut dot = 0.0;
            let mut scale = self.rhs[i].abs();
            for &(j, v) in row {
                dot += v * u[j];
                scale = scale.max(v.abs() * u[j].abs());
            }
            worst = worst.max((dot - self.rhs[i]).abs() / scale.max(1.0));
        }
        worst
    }

    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, _) in row {
                bw = bw.max(i.abs_diff(j));
            }
        }
        bw
    }

    pub fn add_to_diag(&mut self, i: usize, v: f64) {
        for entry in &mut self.rows[i] {
            if entry.0 == i {
                entry.1 += v;
                return;
            }
        }
        self.rows[i].push((i, v));
    }

    /// Compressed sparse rows with columns sorted within each row.
    pub fn to_csr(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut indptr = Vec::with_capacity(self.n + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for row in &self.rows {
            let mut entries = row.clone();
            entries.sort_by_key(|&(j, _)| j);
            for (j, v) in entries {
                indices.push(j);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        (indptr, indices, data)
    }
}

struct Builder {
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    dirichlet: Vec<bool>,
    first_order_terms: usize,
    upwinded_terms: usize,
    c_max: f64,
}

impl Builder {
    fn new(n: usize) -> Self {
        Self {
            rows: vec![Vec::new(); n],
            rhs: vec![0.0; n],
            dirichlet: vec![false; n],
            first_order_terms: 0,
            upwinded_terms: 0,
            c_max: f64::NEG_INFINITY,
        }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        for entry in &mut self.rows[i] {
            if entry.0 == j {
                entry.1 += v;
                return;
            }
        }
        self.rows[i].push((j, v));
    }

    fn set_dirichlet(&mut self, i: usize, value: f64) {
        self.rows[i] = vec![(i, 1.0)];
        self.rhs[i] = value;
        self.dirichlet[i] = true;
    }

    /// First-order term -b d_e u in M = -L along a grid direction with
    /// neighbor indices (behind, ahead) and spacing h_eff; centered unless
    /// the Peclet number against `diff` exceeds the limit.
    fn drift(&mut self, i: usize, behind: usize, ahead: usize, b: f64, h_eff: f64, diff: f64) {
        if b == 0.0 {
            return;
        }
        self.first_order_terms += 1;
        let peclet = b.abs() * h_eff / diff.max(1e-300);
        if peclet <= PECLET_LIMIT {
            // -b (u_ahead - u_behind) / (2 h)
            self.add(i, ahead, -b / (2.0 * h_eff));
            self.add(i, behind, b / (2.0 * h_eff));
        } else {
            self.upwinded_terms += 1;
            if b > 0.0 {
                // forward difference keeps M a Z-matrix
                self.add(i, ahead, -b / h_eff);
                self.add(i, i, b / h_eff);
            } else {
                self.add(i, behind, b / h_eff);
                self.add(i, i, -b / h_eff);
            }
        }
    }

    /// Conservative flux -d(b1 u)/dx contribution of one interface with
    /// transport coefficient `b1` and scale `factor` (metric terms).
    /// `lo`/`hi` are the nodes left/right of the interface, `into` the row
    /// receiving -flux (+flux goes to the mirrored call).
    fn flux_drift(
        &mut self,
        into: usize,
        sign: f64,
        lo: usize,
        hi: usize,
        b1: f64,
        factor: f64,
        peclet: f64,
    ) {
        if b1 == 0.0 {
            return;
        }
        self.first_order_terms += 1;
        let (w_lo, w_hi) = if peclet <= PECLET_LIMIT {
            (0.5, 0.5)
        } else {
            self.upwinded_terms += 1;
            if b1 > 0.0 {
                (0.0, 1.0)
            } else {
                (1.0, 0.0)
            }
        };
        self.add(into, lo, sign * b1 * w_lo * factor);
        self.add(into, hi, sign * b1 * w_hi * factor);
    }

    fn finish(mut self, n: usize, anisotropic: bool) -> AssembledSystem {
        let mut z_pattern = true;
        let mut diag_dominant = true;
        for (i, row) in self.rows.iter_mut().enumerate() {
            row.retain(|&(_, v)| v != 0.0);
            if self.dirichlet[i] {
                continue;
            }
            let mut diag = 0.0;
            let mut off_abs = 0.0;
            let mut scale = 0.0f64;
            for &(j, v) in row.iter() {
                scale = scale.max(v.abs());
                if j == i {
                    diag += v;
                } else {
                    off_abs += v.abs();
                    if v > 1e-12 * scale.max(1.0) {
                        z_pattern = false;
                    }
                }
            }
            if diag + 1e-9 * scale < off_abs {
                diag_dominant = false;
            }
        }
        AssembledSystem {
            n,
            rows: self.rows,
            rhs: self.rhs,
            dirichlet: self.dirichlet,
            diagnostic: MaxPrincipleDiagnostic {
                z_pattern: z_pattern && !anisotropic,
                diag_dominant,
                c_nonpositive: self.c_max <= 1e-12,
                upwind_fraction: if self.first_order_terms == 0 {
                    0.0
                } else {
                    self.upwinded_terms as f64 / self.first_order_terms as f64
                },
            },
        }
    }
}

pub fn assemble(problem: &EllipticProblem) -> Result<AssembledSystem> {
    assemble_frozen(problem, None)
}

/// Assembly with an optional frozen state for the Pucci linearization.
pub fn assemble_frozen(
    problem: &EllipticProblem,
    state: Option<&GridFunction>,
) -> Result<AssembledSystem> {
    problem.validate()?;
    if !problem.form.is_pucci() {
        problem.coeffs.check_ellipticity(&problem.domain)?;
    }
    if let Some(s) = state {
        if s.len() != problem.domain.n_nodes() {
            return Err(Error::domain("frozen state length mismatch"));
        }
    }
    match problem.domain.layout.clone() {
        Layout::Line { n, h } => assemble_line(problem, state, n, h),
        Layout::Box { nx, ny, h } => assemble_box(problem, state, nx, ny, h),
        Layout::Polar {
            nr,
            ntheta,
            r0,
            dr,
            dtheta,
            center,
        } => assemble_polar(problem, state, nr, ntheta, r0, dr, dtheta, center),
    }
}

fn assemble_line(
    problem: &EllipticProblem,
    state: Option<&GridFunction>,
    n: usize,
    h: f64,
) -> Result<AssembledSystem> {
    let dom = &problem.domain;
    let co = &problem.coeffs;
    let mut b = Builder::new(dom.n_nodes());
    let x = |i: usize| dom.node(i);
    let state_at = |i: usize| state.map_or(0.0, |s| s.at(i));

    for i in 1..n {
        let p = x(i);
        let c_i = co.c_at(p, h);
        b.c_max = b.c_max.max(c_i);
        let mid_p = [p[0] + h / 2.0, 0.0];
        let mid_m = [p[0] - h / 2.0, 0.0];

        match problem.form {
            OperatorForm::Divergence => {
                let a_p = co.a_at(mid_p, h)[0][0];
                let a_m = co.a_at(mid_m, h)[0][0];
                // -(F_{i+1/2} - F_{i-1/2})/h, diffusion part
                b.add(i, i, (a_p + a_m) / (h * h));
                b.add(i, i + 1, -a_p / (h * h));
                b.add(i, i - 1, -a_m / (h * h));
                // b1 flux at both interfaces
                let b1_p = co.b1_at(mid_p, h)[0];
                let b1_m = co.b1_at(mid_m, h)[0];
                b.flux_drift(i, -1.0 / h, i, i + 1, b1_p, 1.0, b1_p.abs() * h / a_p);
                b.flux_drift(i, 1.0 / h, i - 1, i, b1_m, 1.0, b1_m.abs() * h / a_m);
                // outer drift b2
                let b2 = co.b2_at(p, h)[0];
                b.drift(i, i - 1, i + 1, b2, h, a_p.min(a_m));
                // rhs: -g - div(h_flux)
                b.rhs[i] = -(problem.g)(co.sample_point(p, h));
                if let Some(hf) = &problem.h_flux {
                    let hp = hf(co.sample_point(mid_p, h))[0];
                    let hm = hf(co.sample_point(mid_m, h))[0];
                    b.rhs[i] -= (hp - hm) / h;
                }
            }
            OperatorForm::NonDivergence => {
                let a_i = co.a_at(p, h)[0][0];
                b.add(i, i, 2.0 * a_i / (h * h));
                b.add(i, i + 1, -a_i / (h * h));
                b.add(i, i - 1, -a_i / (h * h));
                let b1 = co.b1_at(p, h)[0];
                b.drift(i, i - 1, i + 1, b1, h, a_i);
                b.rhs[i] = -(problem.g)(co.sample_point(p, h));
            }
            OperatorForm::PucciPlus | OperatorForm::PucciMinus => {
                let d2 = (state_at(i + 1) - 2.0 * state_at(i) + state_at(i - 1)) / (h * h);
                let plus = problem.form == OperatorForm::PucciPlus;
                let a_i = if (d2 >= 0.0) == plus {
                    co.big_lambda
                } else {
                    co.lambda
                };
                b.add(i, i, 2.0 * a_i / (h * h));
                b.add(i, i + 1, -a_i / (h * h));
                b.add(i, i - 1, -a_i / (h * h));
                // +- b(x) |Du| with the gradient direction frozen
                let grad = (state_at(i + 1) - state_at(i - 1)) / (2.0 * h);
                let sigma = if grad > 0.0 {
                    1.0
                } else if grad < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                let bmag = {
                    let v = co.b_at(p, h);
                    (v[0] * v[0] + v[1] * v[1]).sqrt()
                };
                let sign = if plus { 1.0 } else { -1.0 };
                b.drift(i, i - 1, i + 1, sign * bmag * sigma, h, a_i);
                b.rhs[i] = -(problem.g)(co.sample_point(p, h));
            }
        }
        b.add(i, i, -c_i);
    }
    for i in [0, n] {
        b.set_dirichlet(i, (problem.boundary)(x(i)));
    }
    Ok(b.finish(dom.n_nodes(), false))
}

fn assemble_box(
    problem: &EllipticProblem,
    state: Option<&GridFunction>,
    nx: usize,
    ny: usize,
    h: f64,
) -> Result<AssembledSystem> {
    let dom = &problem.domain;
    let co = &problem.coeffs;
    let mut b = Builder::new(dom.n_nodes());
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let state_at = |k: usize| state.map_or(0.0, |s| s.at(k));
    let mut anisotropic = false;
    let mut max_offdiag_a = 0.0f64;

    for j in 0..=ny {
        for i in 0..=nx {
            let k = idx(i, j);
            if dom.is_boundary(k) {
                b.set_dirichlet(k, (problem.boundary)(dom.node(k)));
                continue;
            }
            let p = dom.node(k);
            let c_k = co.c_at(p, h);
            b.c_max = b.c_max.max(c_k);
            let (e, w, nn, s) = (idx(i + 1, j), idx(i - 1, j), idx(i, j + 1), idx(i, j - 1));
            let corners = (
                idx(i + 1, j + 1),
                idx(i + 1, j - 1),
                idx(i - 1, j + 1),
                idx(i - 1, j - 1),
            );

            match problem.form {
                OperatorForm::Divergence => {
                    let mid = |dx: f64, dy: f64| [p[0] + dx, p[1] + dy];
                    let a_e = co.a_at(mid(h / 2.0, 0.0), h);
                    let a_w = co.a_at(mid(-h / 2.0, 0.0), h);
                    let a_n = co.a_at(mid(0.0, h / 2.0), h);
                    let a_s = co.a_at(mid(0.0, -h / 2.0), h);
                    for a in [&a_e, &a_w, &a_n, &a_s] {
                        max_offdiag_a = max_offdiag_a.max(a[0][1].abs()).max(a[1][0].abs());
                    }
                    let (axe, axw, ayn, ays) = (a_e[0][0], a_w[0][0], a_n[1][1], a_s[1][1]);
                    b.add(k, k, (axe + axw + ayn + ays) / (h * h));
                    b.add(k, e, -axe / (h * h));
                    b.add(k, w, -axw / (h * h));
                    b.add(k, nn, -ayn / (h * h));
                    b.add(k, s, -ays / (h * h));
                    let b1e = co.b1_at(mid(h / 2.0, 0.0), h)[0];
                    let b1w = co.b1_at(mid(-h / 2.0, 0.0), h)[0];
                    let b1n = co.b1_at(mid(0.0, h / 2.0), h)[1];
                    let b1s = co.b1_at(mid(0.0, -h / 2.0), h)[1];
                    b.flux_drift(k, -1.0 / h, k, e, b1e, 1.0, b1e.abs() * h / axe);
                    b.flux_drift(k, 1.0 / h, w, k, b1w, 1.0, b1w.abs() * h / axw);
                    b.flux_drift(k, -1.0 / h, k, nn, b1n, 1.0, b1n.abs() * h / ayn);
                    b.flux_drift(k, 1.0 / h, s, k, b1s, 1.0, b1s.abs() * h / ays);
                    let b2 = co.b2_at(p, h);
                    b.drift(k, w, e, b2[0], h, axe.min(axw));
                    b.drift(k, s, nn, b2[1], h, ayn.min(ays));
                    b.rhs[k] = -(problem.g)(co.sample_point(p, h));
                    if let Some(hf) = &problem.h_flux {
                        let hx_p = hf(co.sample_point(mid(h / 2.0, 0.0), h))[0];
                        let hx_m = hf(co.sample_point(mid(-h / 2.0, 0.0), h))[0];
                        let hy_p = hf(co.sample_point(mid(0.0, h / 2.0), h))[1];
                        let hy_m = hf(co.sample_point(mid(0.0, -h / 2.0), h))[1];
                        b.rhs[k] -= (hx_p - hx_m + hy_p - hy_m) / h;
                    }
                }
                OperatorForm::NonDivergence => {
                    let a = co.a_at(p, h);
                    let a12 = 0.5 * (a[0][1] + a[1][0]);
                    if a12 != 0.0 {
                        anisotropic = true;
                    }
                    b.add(k, k, 2.0 * (a[0][0] + a[1][1]) / (h * h));
                    b.add(k, e, -a[0][0] / (h * h));
                    b.add(k, w, -a[0][0] / (h * h));
                    b.add(k, nn, -a[1][1] / (h * h));
                    b.add(k, s, -a[1][1] / (h * h));
                    if a12 != 0.0 {
                        let cross = -2.0 * a12 / (4.0 * h * h);
                        b.add(k, corners.0, cross);
                        b.add(k, corners.3, cross);
                        b.add(k, corners.1, -cross);
                        b.add(k, corners.2, -cross);
                    }
                    let b1 = co.b1_at(p, h);
                    b.drift(k, w, e, b1[0], h, a[0][0]);
                    b.drift(k, s, nn, b1[1], h, a[1][1]);
                    b.rhs[k] = -(problem.g)(co.sample_point(p, h));
                }
                OperatorForm::PucciPlus | OperatorForm::PucciMinus => {
                    let plus = problem.form == OperatorForm::PucciPlus;
                    let d2x = (state_at(e) - 2.0 * state_at(k) + state_at(w)) / (h * h);
                    let d2y = (state_at(nn) - 2.0 * state_at(k) + state_at(s)) / (h * h);
                    let dxy = (state_at(corners.0) - state_at(corners.1) - state_at(corners.2)
                        + state_at(corners.3))
                        / (4.0 * h * h);
                    let pmat = frozen_multiplier(
                        [[d2x, dxy], [dxy, d2y]],
                        co.lambda,
                        co.big_lambda,
                        if plus { PucciSign::Plus } else { PucciSign::Minus },
                    );
                    if pmat[0][1].abs() > 1e-14 {
                        anisotropic = true;
                    }
                    b.add(k, k, 2.0 * (pmat[0][0] + pmat[1][1]) / (h * h));
                    b.add(k, e, -pmat[0][0] / (h * h));
                    b.add(k, w, -pmat[0][0] / (h * h));
                    b.add(k, nn, -pmat[1][1] / (h * h));
                    b.add(k, s, -pmat[1][1] / (h * h));
                    if pmat[0][1] != 0.0 {
                        let cross = -2.0 * pmat[0][1] / (4.0 * h * h);
                        b.add(k, corners.0, cross);
                        b.add(k, corners.3, cross);
                        b.add(k, corners.1, -cross);
                        b.add(k, corners.2, -cross);
                    }
                    let gx = (state_at(e) - state_at(w)) / (2.0 * h);
                    let gy = (state_at(nn) - state_at(s)) / (2.0 * h);
                    let gn = (gx * gx + gy * gy).sqrt();
                    if gn > 0.0 {
                        let bmag = {
                            let v = co.b_at(p, h);
                            (v[0] * v[0] + v[1] * v[1]).sqrt()
                        };
                        let sign = if plus { 1.0 } else { -1.0 };
                        b.drift(k, w, e, sign * bmag * gx / gn, h, pmat[0][0]);
                        b.drift(k, s, nn, sign * bmag * gy / gn, h, pmat[1][1]);
                    }
                    b.rhs[k] = -(problem.g)(co.sample_point(p, h));
                }
            }
            b.add(k, k, -c_k);
        }
    }
    if problem.form == OperatorForm::Divergence && max_offdiag_a > 1e-12 * co.big_lambda {
        return Err(Error::domain(
            "divergence-form box assembly supports diagonal A only; use the non-divergence form for anisotropic A",
        ));
    }
    Ok(b.finish(dom.n_nodes(), anisotropic))
}

#[allow(clippy::too_many_arguments)]
fn assemble_polar(
    problem: &EllipticProblem,
    state: Option<&GridFunction>,
    nr: usize,
    ntheta: usize,
    r0: f64,
    dr: f64,
    dtheta: f64,
    center: bool,
) -> Result<AssembledSystem> {
    let dom = &problem.domain;
    let co = &problem.coeffs;
    let h = dr;
    let mut b = Builder::new(dom.n_nodes());
    let ring_lo = usize::from(center);
    let idx = |j: usize, k: usize| usize::from(center) + (j - ring_lo) * ntheta + (k % ntheta);
    let state_at = |k: usize| state.map_or(0.0, |s| s.at(k));
    let point = |r: f64, th: f64| [r * th.cos(), r * th.sin()];

    // isotropy of the second-order coefficient, sampled at ring nodes
    let iso_a = |p: Point| -> Result<f64> {
        let a = co.a_at(p, h);
        let off = 0.5 * (a[0][1] + a[1][0]);
        if off.abs() > 1e-12 * co.big_lambda || (a[0][0] - a[1][1]).abs() > 1e-12 * co.big_lambda {
            return Err(Error::domain(
                "polar assembly requires an isotropic second-order coefficient A = a(x) I",
            ));
        }
        Ok(a[0][0])
    };
    let radial_comp = |v: [f64; 2], th: f64| v[0] * th.cos() + v[1] * th.sin();
    let angular_comp = |v: [f64; 2], th: f64| -v[0] * th.sin() + v[1] * th.cos();

    if problem.form.is_pucci() && center {
        return Err(Error::domain(
            "pucci assembly on polar grids requires an annulus (no center node)",
        ));
    }

    for j in ring_lo..=nr {
        let r = r0 + j as f64 * dr;
        let boundary_ring = j == nr || (j == 0 && !center);
        for k in 0..ntheta {
            let node = idx(j, k);
            if boundary_ring {
                b.set_dirichlet(node, (problem.boundary)(dom.node(node)));
                continue;
            }
            let th = k as f64 * dtheta;
            let p = dom.node(node);
            let c_n = co.c_at(p, h);
            b.c_max = b.c_max.max(c_n);
            let (inner, outer) = (idx(j - 1, k), idx(j + 1, k));
            let (left, right) = (idx(j, k + ntheta - 1), idx(j, k + 1));
            let (r_in, r_out) = (r - dr / 2.0, r + dr / 2.0);
            let p_rin = point(r_in, th);
            let p_rout = point(r_out, th);
            let p_tl = point(r, th - dtheta / 2.0);
            let p_tr = point(r, th + dtheta / 2.0);

            match problem.form {
                OperatorForm::Divergence | OperatorForm::NonDivergence => {
                    let divergence = problem.form == OperatorForm::Divergence;
                    let (a_out, a_in, a_tr, a_tl) = if divergence {
                        (iso_a(p_rout)?, iso_a(p_rin)?, iso_a(p_tr)?, iso_a(p_tl)?)
                    } else {
                        let a = iso_a(p)?;
                        (a, a, a, a)
                    };
                    // radial: -(1/r)(r a u_r)_r
                    let f_out = r_out * a_out / (r * dr * dr);
                    let f_in = r_in * a_in / (r * dr * dr);
                    b.add(node, node, f_out + f_in);
                    b.add(node, outer, -f_out);
                    b.add(node, inner, -f_in);
                    // angular: -(1/r^2)(a u_theta)_theta
                    let g_r = a_tr / (r * r * dtheta * dtheta);
                    let g_l = a_tl / (r * r * dtheta * dtheta);
                    b.add(node, node, g_r + g_l);
                    b.add(node, right, -g_r);
                    b.add(node, left, -g_l);

                    if divergence {
                        // -(1/r)(r b1_r u)_r and -(1/r)(b1_theta u)_theta
                        let b1_out = radial_comp(co.b1_at(p_rout, h), th);
                        let b1_in = radial_comp(co.b1_at(p_rin, h), th);
                        b.flux_drift(
                            node,
                            -r_out / (r * dr),
                            node,
                            outer,
                            b1_out,
                            1.0,
                            b1_out.abs() * dr / a_out,
                        );
                        b.flux_drift(
                            node,
                            r_in / (r * dr),
                            inner,
                            node,
                            b1_in,
                            1.0,
                            b1_in.abs() * dr / a_in,
                        );
                        let b1_tr = angular_comp(co.b1_at(p_tr, h), th + dtheta / 2.0);
                        let b1_tl = angular_comp(co.b1_at(p_tl, h), th - dtheta / 2.0);
                        b.flux_drift(
                            node,
                            -1.0 / (r * dtheta),
                            node,
                            right,
                            b1_tr,
                            1.0,
                            b1_tr.abs() * r * dtheta / a_tr,
                        );
                        b.flux_drift(
                            node,
                            1.0 / (r * dtheta),
                            left,
                            node,
                            b1_tl,
                            1.0,
                            b1_tl.abs() * r * dtheta / a_tl,
                        );
                        let b2 = co.b2_at(p, h);
                        b.drift(node, inner, outer, radial_comp(b2, th), dr, a_out.min(a_in));
                        b.drift(
                            node,
                            left,
                            right,
                            angular_comp(b2, th),
                            r * dtheta,
                            a_tr.min(a_tl),
                        );
                        if let Some(hf) = &problem.h_flux {
                            let h_out = radial_comp(hf(co.sample_point(p_rout, h)), th);
                            let h_in = radial_comp(hf(co.sample_point(p_rin, h)), th);
                            let h_tr =
                                angular_comp(hf(co.sample_point(p_tr, h)), th + dtheta / 2.0);
                            let h_tl =
                                angular_comp(hf(co.sample_point(p_tl, h)), th - dtheta / 2.0);
                            b.rhs[node] -= (r_out * h_out - r_in * h_in) / (r * dr)
                                + (h_tr - h_tl) / (r * dtheta);
                        }
                    } else {
                        let b1 = co.b1_at(p, h);
                        let a = a_out;
                        b.drift(node, inner, outer, radial_comp(b1, th), dr, a);
                        b.drift(node, left, right, angular_comp(b1, th), r * dtheta, a);
                    }
                    b.rhs[node] += -(problem.g)(co.sample_point(p, h));
                }
                OperatorForm::PucciPlus | OperatorForm::PucciMinus => {
                    let plus = problem.form == OperatorForm::PucciPlus;
                    // Hessian of the state in the orthonormal polar frame
                    let urr =
                        (state_at(outer) - 2.0 * state_at(node) + state_at(inner)) / (dr * dr);
                    let ur = (state_at(outer) - state_at(inner)) / (2.0 * dr);
                    let ut = (state_at(right) - state_at(left)) / (2.0 * dtheta);
                    let utt = (state_at(right) - 2.0 * state_at(node) + state_at(left))
                        / (dtheta * dtheta);
                    let urt = (state_at(idx(j + 1, k + 1)) - state_at(idx(j + 1, k + ntheta - 1))
                        - state_at(idx(j - 1, k + 1))
                        + state_at(idx(j - 1, k + ntheta - 1)))
                        / (4.0 * dr * dtheta);
                    let h12 = urt / r - ut / (r * r);
                    let h22 = ur / r + utt / (r * r);
                    let pmat = frozen_multiplier(
                        [[urr, h12], [h12, h22]],
                        co.lambda,
                        co.big_lambda,
                        if plus { PucciSign::Plus } else { PucciSign::Minus },
                    );
                    // tr(P H(u)) with H in the polar frame:
                    // p11 u_rr + 2 p12 (u_rt/r - u_t/r^2) + p22 (u_r/r + u_tt/r^2)
                    b.add(node, node, 2.0 * pmat[0][0] / (dr * dr));
                    b.add(node, outer, -pmat[0][0] / (dr * dr));
                    b.add(node, inner, -pmat[0][0] / (dr * dr));
                    b.add(node, node, 2.0 * pmat[1][1] / (r * r * dtheta * dtheta));
                    b.add(node, right, -pmat[1][1] / (r * r * dtheta * dtheta));
                    b.add(node, left, -pmat[1][1] / (r * r * dtheta * dtheta));
                    // p22 u_r / r as a centered drift with coefficient -p22/r
                    b.drift(node, inner, outer, pmat[1][1] / r, dr, pmat[0][0]);
                    if pmat[0][1] != 0.0 {
                        let cross = -2.0 * pmat[0][1];
                        // u_rt / r term
                        let w = cross / (r * 4.0 * dr * dtheta);
                        b.add(node, idx(j + 1, k + 1), w);
                        b.add(node, idx(j - 1, k + ntheta - 1), w);
                        b.add(node, idx(j + 1, k + ntheta - 1), -w);
                        b.add(node, idx(j - 1, k + 1), -w);
                        // -u_t / r^2 term
                        b.drift(
                            node,
                            left,
                            right,
                            -cross / (r * r) / 2.0,
                            dtheta,
                            pmat[1][1] / (r * r),
                        );
                    }
                    let gr = ur;
                    let gt = ut / r;
                    let gn = (gr * gr + gt * gt).sqrt();
                    if gn > 0.0 {
                        let bmag = {
                            let v = co.b_at(p, h);
                            (v[0] * v[0] + v[1] * v[1]).sqrt()
                        };
                        let sign = if plus { 1.0 } else { -1.0 };
                        b.drift(node, inner, outer, sign * bmag * gr / gn, dr, pmat[0][0]);
                        b.drift(
                            node,
                            left,
                            right,
                            sign * bmag * gt / gn,
                            r * dtheta,
                            pmat[1][1],
                        );
                    }
                    b.rhs[node] = -(problem.g)(co.sample_point(p, h));
                }
            }
            b.add(node, node, -c_n);
        }
    }

    if center {
        // flux balance over the circle r = dr/2 around the origin
        let node = 0;
        let p0 = [0.0, 0.0];
        let area = PI * dr * dr / 4.0;
        let c_0 = co.c_at(p0, h);
        b.c_max = b.c_max.max(c_0);
        for k in 0..ntheta {
            let th = k as f64 * dtheta;
            let pm = point(dr / 2.0, th);
            let a_m = iso_a(pm)?;
            let w = (dr / 2.0) * dtheta / area;
            let ring = idx(1, k);
            b.add(node, node, w * a_m / dr);
            b.add(node, ring, -w * a_m / dr);
            if problem.form == OperatorForm::Divergence {
                let b1r = radial_comp(co.b1_at(pm, h), th);
                b.flux_drift(node, -w, node, ring, b1r, 1.0, b1r.abs() * dr / a_m);
                if let Some(hf) = &problem.h_flux {
                    b.rhs[node] += w * radial_comp(hf(co.sample_point(pm, h)), th);
                }
            }
        }
        // gradient at the center from the four cardinal ring nodes
        let b2 = match problem.form {
            OperatorForm::Divergence => co.b2_at(p0, h),
            _ => co.b1_at(p0, h),
        };
        if b2 != [0.0, 0.0] {
            let quarter = ntheta / 4;
            b.first_order_terms += 1;
            b.add(node, idx(1, 0), -b2[0] / (2.0 * dr));
            b.add(node, idx(1, 2 * quarter), b2[0] / (2.0 * dr));
            b.add(node, idx(1, quarter), -b2[1] / (2.0 * dr));
            b.add(node, idx(1, 3 * quarter), b2[1] / (2.0 * dr));
        }
        b.add(node, node, -c_0);
        b.rhs[node] += -(problem.g)(co.sample_point(p0, h));
    }

    Ok(b.finish(dom.n_nodes(), false))
}
