//! Discrete domains, grid functions, Lebesgue and uniformly-local norms,
//! level-set measures.
//!
//! Supported domains are 1D intervals and, in 2D, boxes (uniform tensor
//! grid) and disks/annuli (polar grid: radial spacing `h`, angular count
//! chosen so the outermost arc spacing is at most `h`, rounded up to a
//! multiple of 4 so the four cardinal directions are grid directions).
//!
//! Quadrature weights ("cell volumes") are trapezoid weights in 1D,
//! `h^2` on boxes and `r * dr * dtheta` on polar grids (trapezoid-halved
//! at radial ends). Sup/inf over a region are grid max/min; this is the
//! discretization semantics used for all essential sup/inf of the
//! continuum statements.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Cartesian point; 1D domains use only the first coordinate.
pub type Point = [f64; 2];

pub fn dist(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

pub fn norm(p: Point) -> f64 {
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

/// Lebesgue exponent in [1, inf]; `Inf` is the essential-sup exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exp {
    Finite(f64),
    Inf,
}

impl Exp {
    pub fn finite(self) -> Option<f64> {
        match self {
            Exp::Finite(v) => Some(v),
            Exp::Inf => None,
        }
    }

    pub fn is_inf(self) -> bool {
        matches!(self, Exp::Inf)
    }
}

impl From<f64> for Exp {
    fn from(v: f64) -> Self {
        if v.is_infinite() {
            Exp::Inf
        } else {
            Exp::Finite(v)
        }
    }
}

impl std::fmt::Display for Exp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exp::Finite(v) => write!(f, "{v}"),
            Exp::Inf => write!(f, "inf"),
        }
    }
}

/// Domain shape. Disk and annulus are centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Interval { a: f64, b: f64 },
    Box2 { x0: f64, x1: f64, y0: f64, y1: f64 },
    Disk { radius: f64 },
    Annulus { inner: f64, outer: f64 },
}

/// Grid layout bookkeeping for index <-> (i,j) conversions.
#[derive(Debug, Clone)]
pub enum Layout {
    /// `n + 1` nodes, spacing `h`.
    Line { n: usize, h: f64 },
    /// `(nx + 1) * (ny + 1)` nodes, spacing `h` on both axes.
    Box { nx: usize, ny: usize, h: f64 },
    /// Polar rings `j = 0..=nr` at radius `r0 + j*dr`, `ntheta` angles.
    /// `center` marks a disk grid, which carries one extra node at the
    /// origin stored at index 0 (rings then start at j = 1, r = dr).
    Polar {
        nr: usize,
        ntheta: usize,
        r0: f64,
        dr: f64,
        dtheta: f64,
        center: bool,
    },
}

#[derive(Debug, Clone)]
pub struct GridDomain {
    pub shape: Shape,
    pub layout: Layout,
    /// Requested spacing; actual per-axis spacings live in `layout`.
    pub h: f64,
    nodes: Vec<Point>,
    cell_vol: Vec<f64>,
    boundary: Vec<bool>,
}

impl GridDomain {
    pub fn interval(a: f64, b: f64, h: f64) -> Result<Arc<Self>> {
        if !(h > 0.0) || !(b > a) {
            return Err(Error::domain(format!(
                "interval needs b > a and h > 0 (got a={a}, b={b}, h={h})"
            )));
        }
        let n = ((b - a) / h).round().max(1.0) as usize;
        let hx = (b - a) / n as f64;
        let mut nodes = Vec::with_capacity(n + 1);
        let mut cell_vol = Vec::with_capacity(n + 1);
        let mut boundary = vec![false; n + 1];
        for i in 0..=n {
            nodes.push([a + i as f64 * hx, 0.0]);
            cell_vol.push(if i == 0 || i == n { hx / 2.0 } else { hx });
        }
        boundary[0] = true;
        boundary[n] = true;
        Ok(Arc::new(Self {
            shape: Shape::Interval { a, b },
            layout: Layout::Line { n, h: hx },
            h: hx,
            nodes,
            cell_vol,
            boundary,
        }))
    }

    pub fn box2(x0: f64, x1: f64, y0: f64, y1: f64, h: f64) -> Result<Arc<Self>> {
        if !(h > 0.0) || !(x1 > x0) || !(y1 > y0) {
            return Err(Error::domain("box needs positive extents and h > 0"));
        }
        let nx = ((x1 - x0) / h).round().max(1.0) as usize;
        let ny = ((y1 - y0) / h).round().max(1.0) as usize;
        let hx = (x1 - x0) / nx as f64;
        let hy = (y1 - y0) / ny as f64;
        if (hx - hy).abs() > 1e-9 * hx {
            return Err(Error::domain(format!(
                "box extents must share the spacing h (got hx={hx}, hy={hy})"
            )));
        }
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut cell_vol = Vec::with_capacity(nodes.capacity());
        let mut boundary = Vec::with_capacity(nodes.capacity());
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([x0 + i as f64 * hx, y0 + j as f64 * hy]);
                cell_vol.push(hx * hy);
                boundary.push(i == 0 || i == nx || j == 0 || j == ny);
            }
        }
        Ok(Arc::new(Self {
            shape: Shape::Box2 { x0, x1, y0, y1 },
            layout: Layout::Box { nx, ny, h: hx },
            h: hx,
            nodes,
            cell_vol,
            boundary,
        }))
    }

    pub fn disk(radius: f64, h: f64) -> Result<Arc<Self>> {
        if !(h > 0.0) || !(radius > 0.0) {
            return Err(Error::domain("disk needs radius > 0 and h > 0"));
        }
        let nr = (radius / h).round().max(1.0) as usize;
        let dr = radius / nr as f64;
        let ntheta = Self::angular_count(radius, h);
        Ok(Self::polar_grid(
            Shape::Disk { radius },
            0.0,
            nr,
            dr,
            ntheta,
            true,
        ))
    }

    pub fn annulus(inner: f64, outer: f64, h: f64) -> Result<Arc<Self>> {
        Self::annulus_with_ntheta(inner, outer, h, Self::angular_count(outer, h))
    }

    /// Annulus with an explicit angular count, so that grids built for a
    /// growing family of outer radii share their angular nodes.
    pub fn annulus_with_ntheta(inner: f64, outer: f64, h: f64, ntheta: usize) -> Result<Arc<Self>> {
        if !(h > 0.0) || !(outer > inner) || !(inner > 0.0) {
            return Err(Error::domain("annulus needs 0 < inner < outer and h > 0"));
        }
        if ntheta < 4 || ntheta % 4 != 0 {
            return Err(Error::domain("angular count must be a positive multiple of 4"));
        }
        let nr = ((outer - inner) / h).round().max(1.0) as usize;
        let dr = (outer - inner) / nr as f64;
        Ok(Self::polar_grid(
            Shape::Annulus { inner, outer },
            inner,
            nr,
            dr,
            ntheta,
            false,
        ))
    }

    fn angular_count(r_max: f64, h: f64) -> usize {
        let raw = (2.0 * std::f64::consts::PI * r_max / h).ceil() as usize;
        raw.div_ceil(4).max(1) * 4
    }

    fn polar_grid(
        shape: Shape,
        r0: f64,
        nr: usize,
        dr: f64,
        ntheta: usize,
        center: bool,
    ) -> Arc<Self> {
        let dtheta = 2.0 * std::f64::consts::PI / ntheta as f64;
        let ring_lo = if center { 1 } else { 0 };
        let n_nodes = usize::from(center) + (nr + 1 - ring_lo) * ntheta;
        let mut nodes = Vec::with_capacity(n_nodes);
        let mut cell_vol = Vec::with_capacity(n_nodes);
        let mut boundary = Vec::with_capacity(n_nodes);
        if center {
            nodes.push([0.0, 0.0]);
            // trapezoid weight r*dr/2 vanishes at r = 0
            cell_vol.push(0.0);
            boundary.push(false);
        }
        for j in ring_lo..=nr {
            let r = r0 + j as f64 * dr;
            let wr = if j == nr || (j == 0 && !center) {
                dr / 2.0
            } else {
                dr
            };
            for k in 0..ntheta {
                let th = k as f64 * dtheta;
                nodes.push([r * th.cos(), r * th.sin()]);
                cell_vol.push(r * wr * dtheta);
                boundary.push(j == nr || (j == 0 && !center));
            }
        }
        Arc::new(Self {
            shape,
            layout: Layout::Polar {
                nr,
                ntheta,
                r0,
                dr,
                dtheta,
                center,
            },
            h: dr,
            nodes,
            cell_vol,
            boundary,
        })
    }

    pub fn dimension(&self) -> usize {
        match self.shape {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, i: usize) -> Point {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn cell_vol(&self, i: usize) -> f64 {
        self.cell_vol[i]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&i| self.boundary[i]).collect()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&i| !self.boundary[i]).collect()
    }

    pub fn all_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).collect()
    }

    pub fn nodes_where(&self, pred: impl Fn(Point) -> bool) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&i| pred(self.nodes[i]))
            .collect()
    }

    /// Nodes within the closed metric ball of radius `r` around `center`.
    pub fn ball_nodes(&self, center: Point, r: f64) -> Vec<usize> {
        self.nodes_where(|p| dist(p, center) <= r)
    }

    /// Nodes of the core region G_R = B_R (or B_R minus the inner hole for
    /// annular/exterior shapes, which exclude it automatically).
    pub fn gr_nodes(&self, r: f64) -> Vec<usize> {
        self.nodes_where(|p| norm(p) <= r + 1e-12)
    }

    /// Nodes with r_lo <= |x| <= r_hi.
    pub fn region_nodes(&self, r_lo: f64, r_hi: f64) -> Vec<usize> {
        self.nodes_where(|p| {
            let r = norm(p);
            r >= r_lo - 1e-12 && r <= r_hi + 1e-12
        })
    }

    /// Core-region nodes of the two G_R configurations: B_R for domains
    /// reaching the origin, B_R minus B_2 for exterior-type domains.
    pub fn core_region_nodes(&self, r: f64) -> Vec<usize> {
        let exterior = match self.shape {
            Shape::Interval { a, b } => !(a <= 0.0 && b >= 0.0),
            Shape::Annulus { .. } => true,
            _ => false,
        };
        if exterior {
            self.region_nodes(2.0, r)
        } else {
            self.gr_nodes(r)
        }
    }

    /// Nodes on the sphere |x| = r, within half a spacing.
    pub fn shell_nodes(&self, r: f64) -> Vec<usize> {
        let h = self.h;
        self.nodes_where(|p| (norm(p) - r).abs() <= h / 2.0 + 1e-12)
    }

    /// Axis-aligned bounding box corners (used as extra window centers
    /// for the uniformly-local norm).
    pub fn bounding_box_corners(&self) -> Vec<Point> {
        let (mut xlo, mut xhi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &self.nodes {
            xlo = xlo.min(p[0]);
            xhi = xhi.max(p[0]);
            ylo = ylo.min(p[1]);
            yhi = yhi.max(p[1]);
        }
        if self.dimension() == 1 {
            vec![[xlo, 0.0], [xhi, 0.0]]
        } else {
            vec![[xlo, ylo], [xhi, ylo], [xlo, yhi], [xhi, yhi]]
        }
    }

    /// Total quadrature measure of a node subset.
    pub fn measure(&self, sub: &[usize]) -> f64 {
        sub.iter().map(|&i| self.cell_vol[i]).sum()
    }
}

/// Real values on the nodes of a [`GridDomain`].
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(domain: Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.n_nodes() {
            return Err(Error::domain(format!(
                "value count {} does not match node count {}",
                values.len(),
                domain.n_nodes()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite value {v} in grid function")));
        }
        Ok(Self { domain, values })
    }

    pub fn zeros(domain: Arc<GridDomain>) -> Self {
        let n = domain.n_nodes();
        Self {
            domain,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(domain: Arc<GridDomain>, f: impl Fn(Point) -> f64) -> Self {
        let values = domain.nodes().iter().map(|&p| f(p)).collect();
        Self { domain, values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_over(&self, sub: &[usize]) -> f64 {
        sub.iter().map(|&i| self.values[i]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_over(&self, sub: &[usize]) -> f64 {
        sub.iter().map(|&i| self.values[i]).fold(f64::INFINITY, f64::min)
    }

    pub fn argmax_over(&self, sub: &[usize]) -> Option<usize> {
        sub.iter()
            .copied()
            .max_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
    }

    pub fn argmin_over(&self, sub: &[usize]) -> Option<usize> {
        sub.iter()
            .copied()
            .min_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
    }
}

/// Specification of the uniformly-local norm: sup over unit-ball windows
/// of local L^s norms. The window radius is fixed to 1.
#[derive(Debug, Clone, Copy)]
pub struct UlNormSpec {
    s: Exp,
}

impl UlNormSpec {
    pub const WINDOW_RADIUS: f64 = 1.0;

    pub fn new(s: Exp) -> Result<Self> {
        if let Exp::Finite(v) = s {
            if !(v >= 1.0) {
                return Err(Error::domain(format!("ul-norm exponent must be >= 1, got {v}")));
            }
        }
        Ok(Self { s })
    }

    pub fn exponent(&self) -> Exp {
        self.s
    }
}

/// Midpoint/trapezoid discretization of the L^s norm over a node subset.
pub fn lebesgue_norm(f: &GridFunction, s: Exp, sub: &[usize]) -> Result<f64> {
    if sub.is_empty() {
        return Err(Error::domain("lebesgue_norm over empty node subset"));
    }
    if let Exp::Finite(v) = s {
        if !(v >= 1.0) {
            return Err(Error::domain(format!("exponent must be in [1, inf], got {v}")));
        }
    }
    Ok(power_sum_norm(f, s, sub))
}

/// Same formula without the s >= 1 restriction: used for the epsilon
/// quasinorms (integral averages with exponent < 1) that appear as
/// measured quantities. Never a triangle-inequality norm for s < 1.
pub fn eps_integral(f: &GridFunction, eps: f64, sub: &[usize]) -> Result<f64> {
    if sub.is_empty() {
        return Err(Error::domain("eps_integral over empty node subset"));
    }
    if !(eps > 0.0) {
        return Err(Error::domain(format!("eps must be positive, got {eps}")));
    }
    Ok(power_sum_norm(f, Exp::Finite(eps), sub))
}

fn power_sum_norm(f: &GridFunction, s: Exp, sub: &[usize]) -> f64 {
    match s {
        Exp::Inf => sub
            .iter()
            .map(|&i| f.at(i).abs())
            .fold(0.0f64, f64::max),
        Exp::Finite(p) => {
            let dom = &f.domain;
            let sum: f64 = sub
                .iter()
                .map(|&i| f.at(i).abs().powf(p) * dom.cell_vol(i))
                .sum();
            sum.powf(1.0 / p)
        }
    }
}

/// Uniformly-local norm: max over window centers (all grid nodes plus the
/// bounding-box corners) of the L^s norm over the nodes inside the closed
/// unit ball around the center.
pub fn ul_norm(f: &GridFunction, spec: UlNormSpec) -> Result<f64> {
    Ok(ul_power(f, spec.s))
}

/// Uniformly-local quasinorm for any s > 0: same formula as [`ul_norm`]
/// without the s >= 1 restriction. Used only as a measured quantity.
pub fn ul_quasinorm(f: &GridFunction, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!("quasinorm exponent must be positive, got {s}")));
    }
    Ok(ul_power(f, Exp::Finite(s)))
}

fn ul_power(f: &GridFunction, s: Exp) -> f64 {
    let dom = f.domain.clone();
    let r = UlNormSpec::WINDOW_RADIUS;
    let mut best = 0.0f64;
    match s {
        Exp::Inf => {
            // every node lies in some window containing it, so the sup of
            // window maxima equals the global max
            for i in 0..dom.n_nodes() {
                best = best.max(f.at(i).abs());
            }
        }
        Exp::Finite(p) => {
            let mut centers: Vec<Point> = dom.nodes().to_vec();
            centers.extend(dom.bounding_box_corners());
            let buckets = NodeBuckets::build(&dom, r);
            for &c in &centers {
                let mut sum = 0.0;
                buckets.for_each_in_ball(&dom, c, r, |i| {
                    sum += f.at(i).abs().powf(p) * dom.cell_vol(i);
                });
                best = best.max(sum);
            }
            best = best.powf(1.0 / p);
        }
    }
    best
}

/// Quadrature measure of the strict super-level set {u > a} within `sub`.
pub fn level_set_measure(u: &GridFunction, a: f64, sub: &[usize]) -> f64 {
    sub.iter()
        .filter(|&&i| u.at(i) > a)
        .map(|&i| u.domain.cell_vol(i))
        .sum()
}

/// Spatial hash of nodes into axis-aligned cells of a given size, for
/// repeated ball queries.
pub struct NodeBuckets {
    cell: f64,
    map: HashMap<(i64, i64), Vec<usize>>,
}

impl NodeBuckets {
    pub fn build(dom: &GridDomain, cell: f64) -> Self {
        Self::build_points(dom.nodes(), cell)
    }

    pub fn build_points(points: &[Point], cell: f64) -> Self {
        let mut map: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            map.entry(Self::key(*p, cell)).or_default().push(i);
        }
        Self { cell, map }
    }

    fn key(p: Point, cell: f64) -> (i64, i64) {
        ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64)
    }

    pub fn for_each_in_ball(
        &self,
        dom: &GridDomain,
        center: Point,
        r: f64,
        visit: impl FnMut(usize),
    ) {
        self.for_each_point_in_ball(dom.nodes(), center, r, visit)
    }

    pub fn for_each_point_in_ball(
        &self,
        points: &[Point],
        center: Point,
        r: f64,
        mut visit: impl FnMut(usize),
    ) {
        let reach = (r / self.cell).ceil() as i64 + 1;
        let (kx, ky) = Self::key(center, self.cell);
        for bx in (kx - reach)..=(kx + reach) {
            for by in (ky - reach)..=(ky + reach) {
                if let Some(ids) = self.map.get(&(bx, by)) {
                    for &i in ids {
                        if dist(points[i], center) <= r {
                            visit(i);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_constant_l2_norm() {
        let dom = GridDomain::interval(0.0, 1.0, 1e-3).unwrap();
        let f = GridFunction::from_fn(dom.clone(), |_| 1.0);
        let n = lebesgue_norm(&f, Exp::Finite(2.0), &dom.all_nodes()).unwrap();
        assert_abs_diff_eq!(n, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_sup_norm() {
        let dom = GridDomain::interval(0.0, 1.0, 1e-3).unwrap();
        let f = GridFunction::from_fn(dom.clone(), |p| p[0]);
        let n = lebesgue_norm(&f, Exp::Inf, &dom.all_nodes()).unwrap();
        assert_abs_diff_eq!(n, 1.0, epsilon = 0.0);
    }

    #[test]
    fn identity_l2_norm_matches_exact_integral() {
        // oracle: (int_0^1 x^2 dx)^(1/2) = 1/sqrt(3)
        let dom = GridDomain::interval(0.0, 1.0, 1e-4).unwrap();
        let f = GridFunction::from_fn(dom.clone(), |p| p[0]);
        let n = lebesgue_norm(&f, Exp::Finite(2.0), &dom.all_nodes()).unwrap();
        assert_abs_diff_eq!(n, 1.0 / 3.0f64.sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn empty_subset_is_domain_error() {
        let dom = GridDomain::interval(0.0, 1.0, 0.1).unwrap();
        let f = GridFunction::from_fn(dom, |_| 1.0);
        assert!(lebesgue_norm(&f, Exp::Finite(2.0), &[]).is_err());
    }

    #[test]
    fn ul_norm_interior_window() {
        // constant 1 on [0,10]: interior unit windows have measure 2
        let dom = GridDomain::interval(0.0, 10.0, 1e-3).unwrap();
        let f = GridFunction::from_fn(dom, |_| 1.0);
        let n = ul_norm(&f, UlNormSpec::new(Exp::Finite(2.0)).unwrap()).unwrap();
        assert_abs_diff_eq!(n, 2.0f64.sqrt(), epsilon = 1e-3);
    }

    #[test]
    fn ul_norm_zero_function() {
        let dom = GridDomain::interval(-3.0, 3.0, 0.01).unwrap();
        let f = GridFunction::zeros(dom);
        let n = ul_norm(&f, UlNormSpec::new(Exp::Finite(2.0)).unwrap()).unwrap();
        assert_eq!(n, 0.0);
    }

    #[test]
    fn ul_norm_sup_of_identity() {
        let dom = GridDomain::interval(0.0, 10.0, 0.01).unwrap();
        let f = GridFunction::from_fn(dom, |p| p[0]);
        let n = ul_norm(&f, UlNormSpec::new(Exp::Inf).unwrap()).unwrap();
        assert_abs_diff_eq!(n, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn ul_norm_between_window_and_global() {
        let dom = GridDomain::interval(0.0, 10.0, 0.01).unwrap();
        let f = GridFunction::from_fn(dom.clone(), |p| 1.0 + (p[0] * 1.7).sin().abs());
        let spec = UlNormSpec::new(Exp::Finite(2.0)).unwrap();
        let ul = ul_norm(&f, spec).unwrap();
        let global = lebesgue_norm(&f, Exp::Finite(2.0), &dom.all_nodes()).unwrap();
        assert!(ul <= global + 1e-12);
        // any single window is a lower bound
        let window = dom.ball_nodes([5.0, 0.0], 1.0);
        let local = lebesgue_norm(&f, Exp::Finite(2.0), &window).unwrap();
        assert!(ul >= local - 1e-12);
    }

    #[test]
    fn level_set_half_interval() {
        let dom = GridDomain::interval(0.0, 1.0, 1e-3).unwrap();
        let u = GridFunction::from_fn(dom.clone(), |p| p[0]);
        let m = level_set_measure(&u, 0.5, &dom.all_nodes());
        assert_abs_diff_eq!(m, 0.5, epsilon = 1e-3);
    }

    #[test]
    fn level_set_strict_at_constant() {
        let dom = GridDomain::interval(0.0, 1.0, 0.01).unwrap();
        let u = GridFunction::from_fn(dom.clone(), |_| 3.0);
        assert_eq!(level_set_measure(&u, 3.0, &dom.all_nodes()), 0.0);
    }

    #[test]
    fn level_set_sine_matches_analytic() {
        // sin(pi x) > 1/2 on (1/6, 5/6): measure 2/3
        let dom = GridDomain::interval(0.0, 1.0, 1e-4).unwrap();
        let u = GridFunction::from_fn(dom.clone(), |p| (std::f64::consts::PI * p[0]).sin());
        let m = level_set_measure(&u, 0.5, &dom.all_nodes());
        assert_abs_diff_eq!(m, 2.0 / 3.0, epsilon = 1e-3);
    }

    #[test]
    fn level_set_partition_is_exact_on_dyadic_grid() {
        // weights are dyadic so the three partial sums add exactly
        let dom = GridDomain::interval(0.0, 1.0, 1.0 / 128.0).unwrap();
        let u = GridFunction::from_fn(dom.clone(), |p| (13.0 * p[0]).sin());
        let sub = dom.all_nodes();
        let a = 0.25;
        let above = level_set_measure(&u, a, &sub);
        let neg = GridFunction::from_fn(dom.clone(), |p| -(13.0 * p[0]).sin());
        let below = level_set_measure(&neg, -a, &sub);
        let at: f64 = sub
            .iter()
            .filter(|&&i| u.at(i) == a)
            .map(|&i| dom.cell_vol(i))
            .sum();
        assert_eq!(above + below + at, dom.measure(&sub));
    }

    #[test]
    fn disk_measure_is_exact() {
        let dom = GridDomain::disk(2.0, 0.05).unwrap();
        let total = dom.measure(&dom.all_nodes());
        assert_abs_diff_eq!(total, std::f64::consts::PI * 4.0, epsilon = 1e-9);
    }

    #[test]
    fn annulus_measure_second_order() {
        let dom = GridDomain::annulus(1.0, 2.0, 0.02).unwrap();
        let total = dom.measure(&dom.all_nodes());
        assert_abs_diff_eq!(total, std::f64::consts::PI * 3.0, epsilon = 1e-9);
    }

    #[test]
    fn norms_invariant_under_reordering() {
        let dom = GridDomain::interval(0.0, 2.0, 0.01).unwrap();
        let f = GridFunction::from_fn(dom.clone(), |p| (p[0] - 0.7).cos());
        let mut sub = dom.all_nodes();
        let n1 = lebesgue_norm(&f, Exp::Finite(3.0), &sub).unwrap();
        sub.reverse();
        let n2 = lebesgue_norm(&f, Exp::Finite(3.0), &sub).unwrap();
        assert_abs_diff_eq!(n1, n2, epsilon = 1e-13 * n1.abs());
    }

    #[test]
    fn window_mean_monotone_in_exponent() {
        // Jensen on volume-normalized window means of a smooth field
        let dom = GridDomain::interval(0.0, 6.0, 0.005).unwrap();
        let f = GridFunction::from_fn(dom.clone(), |p| 1.5 + (2.0 * p[0]).sin());
        for c in [1.0, 3.0, 5.0] {
            let w = dom.ball_nodes([c, 0.0], 1.0);
            let vol = dom.measure(&w);
            let m1 = lebesgue_norm(&f, Exp::Finite(1.0), &w).unwrap() / vol;
            let m2 = lebesgue_norm(&f, Exp::Finite(2.0), &w).unwrap() / vol.powf(0.5);
            let m4 = lebesgue_norm(&f, Exp::Finite(4.0), &w).unwrap() / vol.powf(0.25);
            assert!(m1 <= m2 + 1e-9);
            assert!(m2 <= m4 + 1e-9);
        }
    }
}
