//! Harnack chain geometry: lattice ball covers of G_R and shortest
//! overlapping-ball chains between cover points.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grid::{dist, norm, GridDomain, NodeBuckets, Point};

/// Geometric description of the covered region G_R.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoverRegion {
    Interval { a: f64, b: f64 },
    Disk { radius: f64 },
    /// B_R minus B_inner (the exterior-domain core region).
    Annulus { inner: f64, outer: f64 },
}

impl CoverRegion {
    pub fn dimension(&self) -> usize {
        match self {
            CoverRegion::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        match *self {
            CoverRegion::Interval { a, b } => p[0] >= a && p[0] <= b,
            CoverRegion::Disk { radius } => norm(p) <= radius,
            CoverRegion::Annulus { inner, outer } => {
                let r = norm(p);
                r >= inner && r <= outer
            }
        }
    }

    /// Region extent R entering the m <= C (R/r0)^n law.
    pub fn extent(&self) -> f64 {
        match *self {
            CoverRegion::Interval { a, b } => 0.5 * (b - a),
            CoverRegion::Disk { radius } => radius,
            CoverRegion::Annulus { outer, .. } => outer,
        }
    }

    fn dilate(&self, margin: f64) -> CoverRegion {
        match *self {
            CoverRegion::Interval { a, b } => CoverRegion::Interval {
                a: a - margin,
                b: b + margin,
            },
            CoverRegion::Disk { radius } => CoverRegion::Disk {
                radius: radius + margin,
            },
            CoverRegion::Annulus { inner, outer } => CoverRegion::Annulus {
                inner: (inner - margin).max(0.0),
                outer: outer + margin,
            },
        }
    }
}

/// Lattice ball cover of a region: centers on the grid
/// (r0 / (2 sqrt(n)) Z)^n intersected with the region dilated by r0,
/// balls of radius r0, and the overlap graph connecting centers within
/// distance r0 of each other.
#[derive(Debug, Clone)]
pub struct ChainCover {
    pub region: CoverRegion,
    pub r0: f64,
    pub spacing: f64,
    pub centers: Vec<Point>,
    index: HashMap<(i64, i64), usize>,
    /// lattice offsets reaching all neighbors within distance r0
    moves: Vec<(i64, i64)>,
}

pub fn build_chain_cover(region: CoverRegion, r0: f64) -> Result<ChainCover> {
    if !(r0 > 0.0 && r0 <= 0.5) {
        return Err(Error::domain(format!("r0 must lie in (0, 1/2], got {r0}")));
    }
    if region.extent() <= 2.0 {
        return Err(Error::domain(format!(
            "region extent must exceed 2, got {}",
            region.extent()
        )));
    }
    let n = region.dimension();
    let spacing = r0 / (2.0 * (n as f64).sqrt());
    let dilated = region.dilate(r0);

    let mut centers = Vec::new();
    let mut index = HashMap::new();
    match dilated {
        CoverRegion::Interval { a, b } => {
            let k_lo = (a / spacing).ceil() as i64;
            let k_hi = (b / spacing).floor() as i64;
            for k in k_lo..=k_hi {
                index.insert((k, 0), centers.len());
                centers.push([k as f64 * spacing, 0.0]);
            }
        }
        _ => {
            let reach = (dilated.extent() / spacing).ceil() as i64;
            for kx in -reach..=reach {
                for ky in -reach..=reach {
                    let p = [kx as f64 * spacing, ky as f64 * spacing];
                    if dilated.contains(p) {
                        index.insert((kx, ky), centers.len());
                        centers.push(p);
                    }
                }
            }
        }
    }

    // lattice moves within ball distance r0 = 2 sqrt(n) spacings
    let step = (2.0 * (n as f64).sqrt()).floor() as i64;
    let mut moves = Vec::new();
    if n == 1 {
        for dx in -step..=step {
            if dx != 0 {
                moves.push((dx, 0i64));
            }
        }
    } else {
        for dx in -step..=step {
            for dy in -step..=step {
                if (dx, dy) != (0, 0)
                    && ((dx * dx + dy * dy) as f64).sqrt() * spacing <= r0 + 1e-12
                {
                    moves.push((dx, dy));
                }
            }
        }
    }
    Ok(ChainCover {
        region,
        r0,
        spacing,
        centers,
        index,
        moves,
    })
}

impl ChainCover {
    pub fn m(&self) -> usize {
        self.centers.len()
    }

    /// m / (R / r0)^n, the measured constant of the cardinality law.
    pub fn cardinality_constant(&self) -> f64 {
        let n = self.region.dimension() as f64;
        self.m() as f64 / (self.region.extent() / self.r0).powf(n)
    }

    /// Every node of `sub` lies in some cover ball (exact membership
    /// test on the grid).
    pub fn covers_nodes(&self, dom: &GridDomain, sub: &[usize]) -> bool {
        let buckets = NodeBuckets::build_points(&self.centers, self.r0.max(1e-9));
        sub.iter().all(|&i| {
            let p = dom.node(i);
            let mut found = false;
            buckets.for_each_point_in_ball(&self.centers, p, self.r0, |_| found = true);
            found
        })
    }

    /// Doubled balls stay inside the region dilated by the unit margin
    /// (the discrete form of B_{2 r0}(X_i) in G'_R).
    pub fn doubled_balls_inside_prime(&self) -> bool {
        let prime = self.region.dilate(1.0);
        self.centers.iter().all(|&x| {
            // extreme points of B_{2 r0}(x) along the radial/axis direction
            let r = 2.0 * self.r0;
            match prime {
                CoverRegion::Interval { a, b } => x[0] - r >= a && x[0] + r <= b,
                CoverRegion::Disk { radius } => norm(x) + r <= radius,
                CoverRegion::Annulus { inner, outer } => {
                    norm(x) + r <= outer && norm(x) - r >= inner
                }
            }
        })
    }

    fn neighbors(&self, i: usize) -> Vec<usize> {
        let p = self.centers[i];
        let kx = (p[0] / self.spacing).round() as i64;
        let ky = (p[1] / self.spacing).round() as i64;
        let mut out = Vec::with_capacity(self.moves.len());
        for &(dx, dy) in &self.moves {
            if let Some(&j) = self.index.get(&(kx + dx, ky + dy)) {
                out.push(j);
            }
        }
        out
    }

    /// Index of the cover point nearest to p.
    pub fn nearest_center(&self, p: Point) -> usize {
        (0..self.m())
            .min_by(|&a, &b| {
                dist(self.centers[a], p)
                    .total_cmp(&dist(self.centers[b], p))
            })
            .expect("cover is nonempty")
    }
}

/// A shortest chain of overlapping balls connecting two cover points,
/// found by breadth-first search on the overlap graph.
#[derive(Debug, Clone)]
pub struct Chain {
    pub indices: Vec<usize>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn chain_between(cover: &ChainCover, from: usize, to: usize) -> Result<Chain> {
    let m = cover.m();
    if from >= m || to >= m {
        return Err(Error::domain(format!(
            "chain endpoints out of range: {from}, {to} with m = {m}"
        )));
    }
    if from == to {
        return Ok(Chain {
            indices: vec![from],
        });
    }
    let mut prev = vec![usize::MAX; m];
    let mut queue = std::collections::VecDeque::new();
    prev[from] = from;
    queue.push_back(from);
    while let Some(i) = queue.pop_front() {
        if i == to {
            break;
        }
        for j in cover.neighbors(i) {
            if prev[j] == usize::MAX {
                prev[j] = i;
                queue.push_back(j);
            }
        }
    }
    if prev[to] == usize::MAX {
        return Err(Error::domain(
            "cover overlap graph is disconnected between the endpoints",
        ));
    }
    let mut indices = vec![to];
    let mut cur = to;
    while cur != from {
        cur = prev[cur];
        indices.push(cur);
    }
    indices.reverse();
    Ok(Chain { indices })
}

/// Continuum overlap volume of two balls of radius r0 at center
/// distance t.
pub fn overlap_volume_analytic(t: f64, r0: f64, n: usize) -> f64 {
    if t >= 2.0 * r0 {
        return 0.0;
    }
    match n {
        1 => 2.0 * r0 - t,
        2 => {
            let half = t / 2.0;
            2.0 * r0 * r0 * (half / r0).acos() - half * (4.0 * r0 * r0 - t * t).sqrt()
        }
        _ => unreachable!("covers are 1D or 2D"),
    }
}

/// Overlap volume of two cover balls as a cell-volume sum on a grid.
pub fn overlap_volume_grid(cover: &ChainCover, dom: &GridDomain, i: usize, j: usize) -> f64 {
    let (xi, xj) = (cover.centers[i], cover.centers[j]);
    dom.nodes_where(|p| dist(p, xi) <= cover.r0 && dist(p, xj) <= cover.r0)
        .iter()
        .map(|&k| dom.cell_vol(k))
        .sum()
}

/// Minimum consecutive analytic overlap along a chain, normalized by
/// r0^n (the measured C5 constant).
pub fn min_overlap_constant(cover: &ChainCover, chain: &Chain) -> f64 {
    let n = cover.region.dimension();
    chain
        .indices
        .windows(2)
        .map(|w| {
            let t = dist(cover.centers[w[0]], cover.centers[w[1]]);
            overlap_volume_analytic(t, cover.r0, n) / cover.r0.powi(n as i32)
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDomain;

    #[test]
    fn interval_cover_cardinality() {
        // lattice spacing r0/2 = 1/6 on [-4 - 1/3, 4 + 1/3]: 53 points
        let cover = build_chain_cover(
            CoverRegion::Interval { a: -4.0, b: 4.0 },
            1.0 / 3.0,
        )
        .unwrap();
        assert_eq!(cover.m(), 53);
        assert!((cover.spacing - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn trivial_and_adjacent_chains() {
        let cover = build_chain_cover(
            CoverRegion::Interval { a: -4.0, b: 4.0 },
            1.0 / 3.0,
        )
        .unwrap();
        assert_eq!(chain_between(&cover, 7, 7).unwrap().len(), 1);
        assert_eq!(chain_between(&cover, 7, 8).unwrap().len(), 2);
    }

    #[test]
    fn extreme_chain_matches_brute_force() {
        let cover = build_chain_cover(
            CoverRegion::Interval { a: -4.0, b: 4.0 },
            1.0 / 3.0,
        )
        .unwrap();
        let chain = chain_between(&cover, 0, cover.m() - 1).unwrap();
        assert!(chain.len() <= 49);
        // oracle: dense Dijkstra/BFS over the full pairwise graph
        let m = cover.m();
        let mut dist_v = vec![usize::MAX; m];
        dist_v[0] = 1;
        let mut frontier = vec![0usize];
        while let Some(i) = frontier.pop() {
            for j in 0..m {
                if dist(cover.centers[i], cover.centers[j]) <= cover.r0 + 1e-12
                    && dist_v[j] > dist_v[i] + 1
                {
                    dist_v[j] = dist_v[i] + 1;
                    frontier.push(j);
                }
            }
        }
        assert_eq!(chain.len(), dist_v[m - 1]);
        // 52 lattice steps of size 1/6, two per hop: 26 hops, 27 balls
        assert_eq!(chain.len(), 27);
    }

    #[test]
    fn cover_covers_grid_nodes() {
        let dom = GridDomain::interval(-4.0, 4.0, 0.05).unwrap();
        let cover = build_chain_cover(
            CoverRegion::Interval { a: -4.0, b: 4.0 },
            1.0 / 3.0,
        )
        .unwrap();
        assert!(cover.covers_nodes(&dom, &dom.all_nodes()));
        assert!(cover.doubled_balls_inside_prime());
    }

    #[test]
    fn disk_cover_bounded_cardinality() {
        let cover = build_chain_cover(CoverRegion::Disk { radius: 4.0 }, 1.0 / 3.0).unwrap();
        // m <= C (R/r0)^2 with a dimensional constant around 8 pi
        assert!(cover.m() as f64 <= 40.0 * 144.0);
        let c = cover.cardinality_constant();
        assert!(c > 1.0 && c < 40.0, "constant {c}");
    }

    #[test]
    fn overlap_volumes_agree_with_grid_sums() {
        // grid on G'_R, which contains every doubled cover ball
        let dom = GridDomain::interval(-5.0, 5.0, 0.001).unwrap();
        let cover = build_chain_cover(
            CoverRegion::Interval { a: -4.0, b: 4.0 },
            1.0 / 3.0,
        )
        .unwrap();
        let chain = chain_between(&cover, 0, cover.m() - 1).unwrap();
        for w in chain.indices.windows(2) {
            let grid = overlap_volume_grid(&cover, &dom, w[0], w[1]);
            let t = dist(cover.centers[w[0]], cover.centers[w[1]]);
            let exact = overlap_volume_analytic(t, cover.r0, 1);
            assert!((grid - exact).abs() <= 2.0 * dom.h + 1e-12);
        }
    }

    #[test]
    fn r0_out_of_range_rejected() {
        assert!(build_chain_cover(CoverRegion::Disk { radius: 4.0 }, 0.6).is_err());
        assert!(build_chain_cover(CoverRegion::Disk { radius: 4.0 }, 0.0).is_err());
    }
}
