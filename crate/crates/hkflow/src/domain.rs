//! Domain geometry and uniform grids.
//!
//! Bounded shapes (balls, boxes, annuli, capped truncations) can be
//! discretized directly; the unbounded cylinder `C_N(M)`, cone `C(theta)`
//! and rounded strip must be truncated first. Truncations carry rounded
//! (spherical) artificial caps so the boundary stays mean-convex.
//!
//! Grids are uniform lattices with spacing `h` anchored at the coordinate
//! origin. Nodes strictly inside the domain are kept; a node with a
//! neighbor outside carries Shortley-Weller arm lengths, the distances to
//! the boundary along the grid axes.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{Error, Result};

/// Geometric tolerance for closure membership and piece classification.
const GEOM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Shape {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Annulus { center: Vec<f64>, r_in: f64, r_out: f64 },
    /// `C_N(M) = { x_1 > inlet, x_2^2 + ... + x_n^2 < radius^2 }`.
    Cylinder { inlet: f64, radius: f64 },
    /// `C(theta) = { x_1 > 0, x_2^2 + ... + x_n^2 < (x_1 tan theta)^2 }`.
    Cone { theta: f64 },
    /// Tube of half-width `rho` around the axis ray `{ (t, 0, ..., 0) : t >= cap }`,
    /// closed on the left by a spherical cap centered at `(cap, 0, ..., 0)`.
    RoundedStrip { rho: f64, cap: f64 },
    /// Bounded truncation of an unbounded base at `x_1 = x1_max`, with a
    /// spherical cap on the artificial end.
    Truncation { base: Box<Shape>, x1_max: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainSpec {
    pub shape: Shape,
    pub dim: usize,
}

/// A piece of the meridian (x1, |x'|) trace of an axisymmetric boundary.
enum Piece {
    /// Segment between two meridian points.
    Segment([f64; 2], [f64; 2]),
    /// Circular arc centered on the axis at `(t0, 0)` with given radius,
    /// restricted to meridian angles `[a0, a1]` measured from the +t axis.
    Arc { t0: f64, radius: f64, a0: f64, a1: f64 },
}

impl DomainSpec {
    pub fn new(shape: Shape, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Domain("dimension must be at least 2".into()));
        }
        let d = DomainSpec { shape, dim };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        let dim = self.dim;
        let check_center = |c: &Vec<f64>| -> Result<()> {
            if c.len() != dim {
                Err(Error::Domain("center dimension mismatch".into()))
            } else {
                Ok(())
            }
        };
        match &self.shape {
            Shape::Ball { center, radius } => {
                check_center(center)?;
                if *radius <= 0.0 {
                    return Err(Error::Domain("ball radius must be positive".into()));
                }
            }
            Shape::Box { lo, hi } => {
                check_center(lo)?;
                check_center(hi)?;
                if lo.iter().zip(hi).any(|(a, b)| a >= b) {
                    return Err(Error::Domain("box must have lo < hi".into()));
                }
            }
            Shape::Annulus { center, r_in, r_out } => {
                check_center(center)?;
                if *r_in <= 0.0 || r_out <= r_in {
                    return Err(Error::Domain("annulus needs 0 < r_in < r_out".into()));
                }
            }
            Shape::Cylinder { radius, .. } => {
                if *radius <= 0.0 {
                    return Err(Error::Domain("cylinder radius M must be positive".into()));
                }
            }
            Shape::Cone { theta } => {
                if !(*theta > 0.0 && *theta < std::f64::consts::FRAC_PI_2) {
                    return Err(Error::Domain("cone angle must lie in (0, pi/2)".into()));
                }
            }
            Shape::RoundedStrip { rho, .. } => {
                if *rho <= 0.0 {
                    return Err(Error::Domain("strip half-width must be positive".into()));
                }
            }
            Shape::Truncation { base, x1_max } => {
                let inner = DomainSpec { shape: (**base).clone(), dim };
                inner.validate()?;
                let min_t = match **base {
                    Shape::Cylinder { inlet, .. } => inlet,
                    Shape::Cone { .. } => 0.0,
                    Shape::RoundedStrip { cap, .. } => cap,
                    _ => return Err(Error::Domain("truncation base must be unbounded".into())),
                };
                if *x1_max <= min_t {
                    return Err(Error::Domain(
                        "truncation x1_max must exceed the base inlet coordinate".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(
            self.shape,
            Shape::Cylinder { .. } | Shape::Cone { .. } | Shape::RoundedStrip { .. }
        )
    }

    /// Strict interior membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim);
        match &self.shape {
            Shape::Ball { center, radius } => dist(x, center) < *radius,
            Shape::Box { lo, hi } => x
                .iter()
                .enumerate()
                .all(|(i, &v)| v > lo[i] && v < hi[i]),
            Shape::Annulus { center, r_in, r_out } => {
                let r = dist(x, center);
                r > *r_in && r < *r_out
            }
            Shape::Cylinder { inlet, radius } => x[0] > *inlet && transverse(x) < *radius,
            Shape::Cone { theta } => x[0] > 0.0 && transverse(x) < x[0] * theta.tan(),
            Shape::RoundedStrip { rho, cap } => {
                let t = x[0].max(*cap);
                let dt = x[0] - t;
                let r2 = dt * dt + transverse2(x);
                r2 < rho * rho
            }
            Shape::Truncation { base, x1_max } => match **base {
                Shape::Cylinder { inlet, radius } => {
                    if x[0] <= inlet {
                        return false;
                    }
                    if x[0] <= *x1_max {
                        transverse(x) < radius
                    } else {
                        let dt = x[0] - x1_max;
                        dt * dt + transverse2(x) < radius * radius
                    }
                }
                Shape::Cone { theta } => {
                    if !(x[0] > 0.0 && transverse(x) < x[0] * theta.tan()) {
                        return false;
                    }
                    if x[0] <= *x1_max {
                        true
                    } else {
                        let dt = x[0] - x1_max;
                        let r_cap = x1_max * theta.tan();
                        dt * dt + transverse2(x) < r_cap * r_cap
                    }
                }
                Shape::RoundedStrip { rho, cap } => {
                    let t = x[0].clamp(cap, *x1_max);
                    let dt = x[0] - t;
                    dt * dt + transverse2(x) < rho * rho
                }
                _ => unreachable!("validated truncation base"),
            },
        }
    }

    /// Axis-aligned bounding box; `None` for unbounded shapes.
    pub fn bbox(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let dim = self.dim;
        match &self.shape {
            Shape::Ball { center, radius } => {
                let lo = center.iter().map(|c| c - radius).collect();
                let hi = center.iter().map(|c| c + radius).collect();
                Some((lo, hi))
            }
            Shape::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            Shape::Annulus { center, r_out, .. } => {
                let lo = center.iter().map(|c| c - r_out).collect();
                let hi = center.iter().map(|c| c + r_out).collect();
                Some((lo, hi))
            }
            Shape::Cylinder { .. } | Shape::Cone { .. } | Shape::RoundedStrip { .. } => None,
            Shape::Truncation { base, x1_max } => {
                let (rho, t_lo) = match **base {
                    Shape::Cylinder { inlet, radius } => (radius, inlet),
                    Shape::Cone { theta } => (x1_max * theta.tan(), 0.0),
                    Shape::RoundedStrip { rho, cap } => (rho, cap - rho),
                    _ => unreachable!(),
                };
                let mut lo = vec![-rho; dim];
                let mut hi = vec![rho; dim];
                lo[0] = t_lo;
                hi[0] = x1_max + rho;
                Some((lo, hi))
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self.bbox() {
            Some((lo, hi)) => dist(&hi, &lo),
            None => f64::INFINITY,
        }
    }

    /// Distance to the boundary from a point in the closure.
    pub fn boundary_distance(&self, x: &[f64]) -> Result<f64> {
        let d = match &self.shape {
            Shape::Ball { center, radius } => radius - dist(x, center),
            Shape::Box { lo, hi } => x
                .iter()
                .enumerate()
                .map(|(i, &v)| (v - lo[i]).min(hi[i] - v))
                .fold(f64::INFINITY, f64::min),
            Shape::Annulus { center, r_in, r_out } => {
                let r = dist(x, center);
                (r - r_in).min(r_out - r)
            }
            _ => {
                // Axisymmetric shapes: distance in the meridian half-plane.
                let p = [x[0], transverse(x)];
                self.meridian_pieces()
                    .iter()
                    .map(|piece| piece.distance(p))
                    .fold(f64::INFINITY, f64::min)
            }
        };
        if self.contains(x) {
            Ok(d.max(0.0))
        } else if d.abs() <= GEOM_TOL * (1.0 + norm(x)) {
            Ok(0.0)
        } else {
            Err(Error::OutsideDomain)
        }
    }

    fn meridian_pieces(&self) -> Vec<Piece> {
        use std::f64::consts::{FRAC_PI_2, PI};
        match &self.shape {
            Shape::Cylinder { inlet, radius } => vec![
                Piece::Segment([*inlet, 0.0], [*inlet, *radius]),
                Piece::Segment([*inlet, *radius], [1e12, *radius]),
            ],
            Shape::Cone { theta } => {
                vec![Piece::Segment([0.0, 0.0], [1e12, 1e12 * theta.tan()])]
            }
            Shape::RoundedStrip { rho, cap } => vec![
                Piece::Arc { t0: *cap, radius: *rho, a0: FRAC_PI_2, a1: PI },
                Piece::Segment([*cap, *rho], [1e12, *rho]),
            ],
            Shape::Truncation { base, x1_max } => match **base {
                Shape::Cylinder { inlet, radius } => vec![
                    Piece::Segment([inlet, 0.0], [inlet, radius]),
                    Piece::Segment([inlet, radius], [*x1_max, radius]),
                    Piece::Arc { t0: *x1_max, radius, a0: 0.0, a1: FRAC_PI_2 },
                ],
                Shape::Cone { theta } => {
                    let r_cap = x1_max * theta.tan();
                    vec![
                        Piece::Segment([0.0, 0.0], [*x1_max, r_cap]),
                        Piece::Arc { t0: *x1_max, radius: r_cap, a0: 0.0, a1: FRAC_PI_2 },
                    ]
                }
                Shape::RoundedStrip { rho, cap } => vec![
                    Piece::Arc { t0: cap, radius: rho, a0: FRAC_PI_2, a1: PI },
                    Piece::Segment([cap, rho], [*x1_max, rho]),
                    Piece::Arc { t0: *x1_max, radius: rho, a0: 0.0, a1: FRAC_PI_2 },
                ],
                _ => unreachable!(),
            },
            _ => Vec::new(),
        }
    }

    /// Mean curvature of the boundary at `y` with respect to the inner
    /// normal, i.e. the arithmetic mean of the principal curvatures.
    pub fn boundary_mean_curvature(&self, y: &[f64]) -> Result<f64> {
        let n = self.dim as f64;
        match &self.shape {
            Shape::Ball { center, radius } => {
                check_on(dist(y, center) - radius, y)?;
                Ok(1.0 / radius)
            }
            Shape::Annulus { center, r_in, r_out } => {
                let r = dist(y, center);
                if (r - r_out).abs() <= GEOM_TOL * (1.0 + r_out) {
                    Ok(1.0 / r_out)
                } else if (r - r_in).abs() <= GEOM_TOL * (1.0 + r_in) {
                    // Inner wall curves away from the domain.
                    Ok(-1.0 / r_in)
                } else {
                    Err(Error::OutsideDomain)
                }
            }
            Shape::Box { .. } => Err(Error::CurvatureUnavailable(
                "box boundary is not C^2".into(),
            )),
            _ => {
                let p = [y[0], transverse(y)];
                let pieces = self.meridian_pieces();
                let (mut best, mut best_d) = (None, f64::INFINITY);
                for piece in &pieces {
                    let d = piece.distance(p);
                    if d < best_d {
                        best_d = d;
                        best = Some(piece);
                    }
                }
                if best_d > GEOM_TOL * (1.0 + norm(y)) {
                    return Err(Error::OutsideDomain);
                }
                match best.unwrap() {
                    Piece::Arc { radius, .. } => Ok(1.0 / radius),
                    Piece::Segment(a, b) => {
                        if (a[0] - b[0]).abs() <= GEOM_TOL {
                            // Flat inlet disk.
                            Ok(0.0)
                        } else if a[1] == 0.0 || b[1] == 0.0 {
                            // Cone wall through the origin: n-2 circumferential
                            // curvatures cos(theta)/|x'| and one flat ruling.
                            let theta = (b[1] - a[1]).atan2(b[0] - a[0]);
                            let rho = p[1].max(GEOM_TOL);
                            Ok((n - 2.0) * theta.cos() / ((n - 1.0) * rho))
                        } else {
                            // Cylindrical wall of radius rho.
                            Ok((n - 2.0) / ((n - 1.0) * a[1]))
                        }
                    }
                }
            }
        }
    }

    /// Arm length from an inside node to the boundary along `axis` in
    /// direction `dir` (+1/-1), given that the step-`h` neighbor is outside.
    /// Bisection against the membership predicate.
    pub(crate) fn axis_arm(&self, x: &[f64], axis: usize, dir: f64, h: f64) -> f64 {
        let probe = |t: f64| {
            let mut y = x.to_vec();
            y[axis] += dir * t;
            self.contains(&y)
        };
        debug_assert!(probe(0.0));
        if probe(h) {
            return h;
        }
        let (mut lo, mut hi) = (0.0, h);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if probe(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Monte Carlo volume estimate over the bounding box.
    pub fn volume_mc(&self, samples: usize, seed: u64) -> f64 {
        let Some((lo, hi)) = self.bbox() else {
            return f64::INFINITY;
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inside = 0usize;
        let mut x = vec![0.0; self.dim];
        for _ in 0..samples {
            for i in 0..self.dim {
                x[i] = rng.gen_range(lo[i]..hi[i]);
            }
            if self.contains(&x) {
                inside += 1;
            }
        }
        let box_vol: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
        box_vol * inside as f64 / samples as f64
    }

    /// Random boundary points (uniform per piece, seeded). For unbounded
    /// shapes only the part with `x_1 <= x1_cap` is sampled.
    pub fn sample_boundary(&self, count: usize, x1_cap: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        match &self.shape {
            Shape::Ball { center, radius } => {
                for _ in 0..count {
                    out.push(add(center, &scale(&unit_dir(self.dim, &mut rng), *radius)));
                }
            }
            Shape::Annulus { center, r_in, r_out } => {
                for k in 0..count {
                    let r = if k % 2 == 0 { *r_out } else { *r_in };
                    out.push(add(center, &scale(&unit_dir(self.dim, &mut rng), r)));
                }
            }
            Shape::Box { lo, hi } => {
                for _ in 0..count {
                    let face = rng.gen_range(0..self.dim);
                    let side = rng.gen_bool(0.5);
                    let mut x: Vec<f64> = (0..self.dim)
                        .map(|i| rng.gen_range(lo[i]..hi[i]))
                        .collect();
                    x[face] = if side { hi[face] } else { lo[face] };
                    out.push(x);
                }
            }
            _ => {
                // Meridian pieces, clipped at x1 <= x1_cap, weighted by length.
                let pieces = self.meridian_pieces();
                let clipped: Vec<(&Piece, f64)> = pieces
                    .iter()
                    .filter_map(|p| {
                        let len = p.length_below(x1_cap);
                        (len > 0.0).then_some((p, len))
                    })
                    .collect();
                let total: f64 = clipped.iter().map(|(_, l)| l).sum();
                if total <= 0.0 {
                    return out;
                }
                for _ in 0..count {
                    let mut pick = rng.gen_range(0.0..total);
                    for (piece, len) in &clipped {
                        if pick <= *len {
                            let (t, rho) = piece.point_at(pick, x1_cap);
                            let dir = unit_dir(self.dim - 1, &mut rng);
                            let mut x = vec![t];
                            x.extend(dir.iter().map(|d| d * rho));
                            out.push(x);
                            break;
                        }
                        pick -= len;
                    }
                }
            }
        }
        out
    }
}

impl Piece {
    fn distance(&self, p: [f64; 2]) -> f64 {
        match self {
            Piece::Segment(a, b) => {
                let ab = [b[0] - a[0], b[1] - a[1]];
                let ap = [p[0] - a[0], p[1] - a[1]];
                let len2 = ab[0] * ab[0] + ab[1] * ab[1];
                let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
                let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
            }
            Piece::Arc { t0, radius, a0, a1 } => {
                let v = [p[0] - t0, p[1]];
                let ang = v[1].atan2(v[0]);
                let ang = ang.clamp(*a0, *a1);
                let q = [t0 + radius * ang.cos(), radius * ang.sin()];
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
            }
        }
    }

    /// Meridian length of the part with t <= cap (rough clipping for arcs).
    fn length_below(&self, cap: f64) -> f64 {
        match self {
            Piece::Segment(a, b) => {
                if a[0] >= cap && b[0] >= cap {
                    0.0
                } else {
                    let bt = b[0].min(cap);
                    let at = a[0].min(cap);
                    let frac = if (b[0] - a[0]).abs() < 1e-300 {
                        1.0
                    } else {
                        (bt - at) / (b[0] - a[0])
                    };
                    let dx = (b[0] - a[0]) * frac;
                    let dy = (b[1] - a[1]) * frac;
                    (dx * dx + dy * dy).sqrt()
                }
            }
            Piece::Arc { t0, radius, a0, a1 } => {
                if t0 + radius <= cap {
                    radius * (a1 - a0)
                } else if *t0 >= cap {
                    0.0
                } else {
                    let a_cut = ((cap - t0) / radius).clamp(-1.0, 1.0).acos();
                    radius * (a1 - a0.max(a_cut).min(*a1)).max(0.0)
                }
            }
        }
    }

    /// Point at arclength `s` along the clipped piece.
    fn point_at(&self, s: f64, cap: f64) -> (f64, f64) {
        match self {
            Piece::Segment(a, b) => {
                let len = self.length_below(cap);
                let full = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                let t = (s / full.max(1e-300)).min(len / full.max(1e-300));
                (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
            }
            Piece::Arc { t0, radius, a0, a1 } => {
                let lo = if t0 + radius <= cap {
                    *a0
                } else {
                    a0.max(((cap - t0) / radius).clamp(-1.0, 1.0).acos())
                };
                let ang = (lo + s / radius).min(*a1);
                (t0 + radius * ang.cos(), radius * ang.sin())
            }
        }
    }
}

fn check_on(signed: f64, y: &[f64]) -> Result<()> {
    if signed.abs() <= GEOM_TOL * (1.0 + norm(y)) {
        Ok(())
    } else {
        Err(Error::OutsideDomain)
    }
}

/// Bounded truncation `Omega_j` of an unbounded base with the cut at
/// `schedule[j]`. The schedule must be strictly increasing so the
/// truncations are nested and exhaust the base.
pub fn truncate(domain: &DomainSpec, j: usize, schedule: &[f64]) -> Result<DomainSpec> {
    if schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::NonMonotoneSchedule);
    }
    if j >= schedule.len() {
        return Err(Error::Domain("truncation index beyond schedule".into()));
    }
    match domain.shape {
        Shape::Cylinder { .. } | Shape::Cone { .. } | Shape::RoundedStrip { .. } => {
            DomainSpec::new(
                Shape::Truncation {
                    base: Box::new(domain.shape.clone()),
                    x1_max: schedule[j],
                },
                domain.dim,
            )
        }
        _ => Err(Error::Domain(
            "only cylinder-, cone- or strip-type domains can be truncated".into(),
        )),
    }
}

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => std::f64::consts::PI,
        _ => unit_ball_volume(n - 2) * 2.0 * std::f64::consts::PI / n as f64,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NodeClass {
    Interior,
    BoundaryCut,
}

#[derive(Clone, Debug)]
pub struct GridNode {
    pub lattice: Vec<i64>,
    pub pos: Vec<f64>,
    pub class: NodeClass,
    /// Per axis, `[minus, plus]` neighbor node indices (`None` if exterior).
    pub nbr: Vec<[Option<usize>; 2]>,
    /// Per axis, `[minus, plus]` arm lengths: `h` toward an inside neighbor,
    /// the distance to the boundary (in `(0, h]`) toward an exterior one.
    pub arms: Vec<[f64; 2]>,
}

#[derive(Debug)]
pub struct Grid {
    pub domain: DomainSpec,
    pub h: f64,
    pub dim: usize,
    pub nodes: Vec<GridNode>,
    index: HashMap<Vec<i64>, usize>,
    /// Number of lattice points scanned (incl. exterior), for bookkeeping.
    pub scanned: usize,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn interior_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.class == NodeClass::Interior)
            .count()
    }

    pub fn node_at(&self, lattice: &[i64]) -> Option<usize> {
        self.index.get(lattice).copied()
    }

    /// Diagonal neighbor at lattice offset (+-1 on two axes).
    pub fn offset_node(&self, i: usize, axis_a: usize, da: i64, axis_b: usize, db: i64) -> Option<usize> {
        let mut key = self.nodes[i].lattice.clone();
        key[axis_a] += da;
        key[axis_b] += db;
        self.node_at(&key)
    }

    /// Boundary point reached by the cut arm of node `i` along `axis`/`side`.
    pub fn cut_point(&self, i: usize, axis: usize, side: usize) -> Vec<f64> {
        let node = &self.nodes[i];
        let mut p = node.pos.clone();
        let dir = if side == 0 { -1.0 } else { 1.0 };
        p[axis] += dir * node.arms[axis][side];
        p
    }

    /// Shortest cut arm of a boundary node: `(axis, side, arm)`.
    pub fn nearest_cut(&self, i: usize) -> Option<(usize, usize, f64)> {
        let node = &self.nodes[i];
        let mut best: Option<(usize, usize, f64)> = None;
        for axis in 0..self.dim {
            for side in 0..2 {
                if node.nbr[axis][side].is_none() {
                    let arm = node.arms[axis][side];
                    if best.map_or(true, |(_, _, a)| arm < a) {
                        best = Some((axis, side, arm));
                    }
                }
            }
        }
        best
    }

    /// CSV export: `index,x1..xn,class,arm1..arm_n` with per-axis arms
    /// (minimum of the two directional arms).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "index")?;
        for i in 1..=self.dim {
            write!(w, ",x{i}")?;
        }
        write!(w, ",class")?;
        for i in 1..=self.dim {
            write!(w, ",arm{i}")?;
        }
        writeln!(w)?;
        for (i, node) in self.nodes.iter().enumerate() {
            write!(w, "{i}")?;
            for v in &node.pos {
                write!(w, ",{}", fmt_f64(*v))?;
            }
            write!(
                w,
                ",{}",
                match node.class {
                    NodeClass::Interior => "interior",
                    NodeClass::BoundaryCut => "boundary_cut",
                }
            )?;
            for axis in 0..self.dim {
                let arm = node.arms[axis][0].min(node.arms[axis][1]);
                write!(w, ",{}", fmt_f64(arm))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// 17-significant-digit decimal formatting used by all CSV artifacts.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Classify the lattice nodes of `domain` at spacing `h`.
///
/// Nodes strictly inside are kept; a kept node with an exterior axis
/// neighbor is `BoundaryCut` and carries the arm length to the boundary
/// in that direction. Unbounded domains must be truncated first.
pub fn classify_nodes(domain: &DomainSpec, h: f64) -> Result<Grid> {
    if h <= 0.0 {
        return Err(Error::Domain("grid spacing must be positive".into()));
    }
    let (lo, hi) = domain.bbox().ok_or(Error::UnboundedDomain)?;
    let dim = domain.dim;
    let ranges: Vec<(i64, i64)> = (0..dim)
        .map(|i| {
            (
                (lo[i] / h).floor() as i64 - 1,
                (hi[i] / h).ceil() as i64 + 1,
            )
        })
        .collect();

    // Outermost sort axis = largest extent, so that the banded systems
    // assembled later have small bandwidth.
    let mut axis_order: Vec<usize> = (0..dim).collect();
    axis_order.sort_by_key(|&i| std::cmp::Reverse(ranges[i].1 - ranges[i].0));

    let mut raw: Vec<Vec<i64>> = Vec::new();
    let mut lattice = vec![0i64; dim];
    let mut scanned = 0usize;
    scan(domain, h, &ranges, 0, &mut lattice, &mut raw, &mut scanned);

    raw.sort_by(|a, b| {
        axis_order
            .iter()
            .map(|&ax| a[ax].cmp(&b[ax]))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let index: HashMap<Vec<i64>, usize> = raw
        .iter()
        .enumerate()
        .map(|(i, key)| (key.clone(), i))
        .collect();

    let mut nodes = Vec::with_capacity(raw.len());
    for key in &raw {
        let pos: Vec<f64> = key.iter().map(|&i| i as f64 * h).collect();
        let mut nbr = vec![[None, None]; dim];
        let mut arms = vec![[h, h]; dim];
        let mut cut = false;
        for axis in 0..dim {
            for (side, dir) in [(0usize, -1.0), (1usize, 1.0)] {
                let mut nk = key.clone();
                nk[axis] += if side == 0 { -1 } else { 1 };
                match index.get(&nk) {
                    Some(&j) => nbr[axis][side] = Some(j),
                    None => {
                        cut = true;
                        arms[axis][side] = domain.axis_arm(&pos, axis, dir, h);
                    }
                }
            }
        }
        nodes.push(GridNode {
            lattice: key.clone(),
            pos,
            class: if cut { NodeClass::BoundaryCut } else { NodeClass::Interior },
            nbr,
            arms,
        });
    }

    Ok(Grid { domain: domain.clone(), h, dim, nodes, index, scanned })
}

fn scan(
    domain: &DomainSpec,
    h: f64,
    ranges: &[(i64, i64)],
    axis: usize,
    lattice: &mut Vec<i64>,
    out: &mut Vec<Vec<i64>>,
    scanned: &mut usize,
) {
    if axis == ranges.len() {
        *scanned += 1;
        let pos: Vec<f64> = lattice.iter().map(|&i| i as f64 * h).collect();
        if domain.contains(&pos) {
            out.push(lattice.clone());
        }
        return;
    }
    for i in ranges[axis].0..=ranges[axis].1 {
        lattice[axis] = i;
        scan(domain, h, ranges, axis + 1, lattice, out, scanned);
    }
}

/// Nodal values on the non-exterior nodes of a grid.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn constant(grid: Arc<Grid>, v: f64) -> Self {
        let n = grid.len();
        ScalarField { grid, values: vec![v; n] }
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: Arc<Grid>, f: F) -> Self {
        let values = grid.nodes.iter().map(|n| f(&n.pos)).collect();
        ScalarField { grid, values }
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid)
            || (self.grid.domain == other.grid.domain
                && self.grid.h == other.grid.h
                && self.grid.len() == other.grid.len())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Pointwise max with another field on the same grid.
    pub fn max_with(&self, other: &ScalarField) -> Result<ScalarField> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.max(*b))
            .collect();
        Ok(ScalarField { grid: self.grid.clone(), values })
    }

    /// Bilinear (multilinear) interpolation at an arbitrary point inside the
    /// grid. Falls back to the nearest node value when a cell corner is
    /// exterior.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let g = &self.grid;
        let h = g.h;
        let base: Vec<i64> = x.iter().map(|&v| (v / h).floor() as i64).collect();
        let frac: Vec<f64> = x
            .iter()
            .zip(&base)
            .map(|(&v, &b)| (v / h - b as f64).clamp(0.0, 1.0))
            .collect();
        let corners = 1usize << g.dim;
        let mut value = 0.0;
        let mut weight = 0.0;
        let mut nearest: Option<(f64, f64)> = None;
        for c in 0..corners {
            let mut key = base.clone();
            let mut w = 1.0;
            for axis in 0..g.dim {
                if c >> axis & 1 == 1 {
                    key[axis] += 1;
                    w *= frac[axis];
                } else {
                    w *= 1.0 - frac[axis];
                }
            }
            if let Some(i) = g.node_at(&key) {
                value += w * self.values[i];
                weight += w;
                let d = dist(&g.nodes[i].pos, x);
                if nearest.map_or(true, |(nd, _)| d < nd) {
                    nearest = Some((d, self.values[i]));
                }
            }
        }
        if weight > 0.99 {
            Some(value)
        } else if weight > 0.0 {
            // Degenerate cell at the boundary; renormalize over the corners
            // that exist, good enough for diagnostics and cap data.
            Some(value / weight)
        } else {
            nearest.map(|(_, v)| v)
        }
    }

    /// CSV export: `x1..xn,u`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 1..=self.grid.dim {
            write!(w, "x{i}{}", if i == self.grid.dim { "" } else { "," })?;
        }
        writeln!(w, ",u")?;
        for (node, v) in self.grid.nodes.iter().zip(&self.values) {
            for p in &node.pos {
                write!(w, "{},", fmt_f64(*p))?;
            }
            writeln!(w, "{}", fmt_f64(*v))?;
        }
        Ok(())
    }
}

/// Euclidean distance between two points.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Euclidean norm.
pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean norm of the transverse part (x_2, ..., x_n).
fn transverse(x: &[f64]) -> f64 {
    transverse2(x).sqrt()
}

fn transverse2(x: &[f64]) -> f64 {
    x[1..].iter().map(|v| v * v).sum::<f64>()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

fn unit_dir<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    // Box-Muller style isotropic direction.
    loop {
        let v: Vec<f64> = (0..dim)
            .map(|_| {
                let u1: f64 = rng.gen_range(1e-12..1.0);
                let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                (-2.0 * u1.ln()).sqrt() * u2.cos()
            })
            .collect();
        let n = norm(&v);
        if n > 1e-8 {
            return scale(&v, 1.0 / n);
        }
    }
}
