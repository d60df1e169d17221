//! Shell coverings of the cylinder `C_N(M)` and the cone `C(theta)`.
//!
//! A covering is a sequence of overlapping spherical shells
//! `A(x_k) = { M < |x - x_k| < M e^d, x_1 < a_k }` (cylinder) or
//! `A(x_k) = { L_k < |x - x_k| < L_k e^d, x_1 < b_k }` with
//! `L_k = b_k sin(theta)` (cone), whose union exhausts the container and
//! whose handoff containments let supersolution caps propagate outward.
//! The admissible step sizes are
//! `a_{k+1} - a_k = eps M (e^d - 1)` with `eps` in (0,1), and
//! `b_k = delta0^{k-1} b_1` with `1 < delta0 < (1-sin)/(1-e^d sin)`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub enum CoveringSeq {
    Cylinder {
        /// Inlet coordinate N of the container.
        n_inlet: f64,
        m: f64,
        d: f64,
        eps: f64,
        /// Shell centers' first coordinates a_1 .. a_K.
        a: Vec<f64>,
    },
    Cone {
        b1: f64,
        theta: f64,
        d: f64,
        delta0: f64,
        b: Vec<f64>,
    },
}

impl CoveringSeq {
    pub fn member_count(&self) -> usize {
        match self {
            CoveringSeq::Cylinder { a, .. } => a.len(),
            CoveringSeq::Cone { b, .. } => b.len(),
        }
    }

    /// Shell thickness parameter `d`.
    pub fn d(&self) -> f64 {
        match self {
            CoveringSeq::Cylinder { d, .. } | CoveringSeq::Cone { d, .. } => *d,
        }
    }

    /// Center and (inner, outer) radii of member `k` (0-based).
    pub fn member_geometry(&self, k: usize) -> (f64, f64, f64, f64) {
        match self {
            CoveringSeq::Cylinder { m, d, a, .. } => (a[k], *m, m * d.exp(), a[k]),
            CoveringSeq::Cone { theta, d, b, .. } => {
                let l = b[k] * theta.sin();
                (b[k], l, l * d.exp(), b[k])
            }
        }
    }

    /// CSV export: `k,center,inner,outer,cap`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,center,inner,outer,cap")?;
        for k in 0..self.member_count() {
            let (c, ri, ro, cap) = self.member_geometry(k);
            writeln!(
                w,
                "{},{},{},{},{}",
                k + 1,
                crate::domain::fmt_f64(c),
                crate::domain::fmt_f64(ri),
                crate::domain::fmt_f64(ro),
                crate::domain::fmt_f64(cap)
            )?;
        }
        Ok(())
    }
}

/// Cylinder covering with uniform steps `eps * M * (e^d - 1)`.
///
/// The default `eps = 0.9` keeps both containment inequalities strict:
/// the step stays below `M sqrt(e^{2d} - 1)` and below `M (e^d - 1)`.
pub fn covering_build_cylinder(
    n_inlet: f64,
    m: f64,
    d: f64,
    eps: Option<f64>,
    members: usize,
) -> Result<CoveringSeq> {
    if m <= 0.0 || d <= 0.0 {
        return Err(Error::OutOfRange("cylinder covering needs M > 0, d > 0".into()));
    }
    let eps = eps.unwrap_or(0.9);
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::OutOfRange("eps must lie in (0, 1)".into()));
    }
    let step = eps * m * (d.exp() - 1.0);
    debug_assert!(step < m * (d.exp() * d.exp() - 1.0).sqrt());
    let a = (0..members).map(|k| n_inlet + k as f64 * step).collect();
    Ok(CoveringSeq::Cylinder { n_inlet, m, d, eps, a })
}

/// Cone covering with geometric centers `b_k = delta0^{k-1} b_1`.
///
/// `delta0` defaults to the geometric mean of the admissible interval
/// `(1, (1-sin)/(1-e^d sin))`, balancing member count against overlap.
/// An explicit out-of-range `delta0` is accepted (so that verification can
/// demonstrate the failure), but `e^d < 1/sin(theta)` is a hard error.
pub fn covering_build_cone(
    b1: f64,
    theta: f64,
    d: f64,
    delta0: Option<f64>,
    members: usize,
) -> Result<CoveringSeq> {
    if b1 <= 0.0 || d <= 0.0 {
        return Err(Error::OutOfRange("cone covering needs b1 > 0, d > 0".into()));
    }
    if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::OutOfRange("theta must lie in (0, pi/2)".into()));
    }
    let s = theta.sin();
    let ed = d.exp();
    if 1.0 - ed * s <= 0.0 {
        return Err(Error::ShellTooThick { ed, limit: 1.0 / s });
    }
    let bound = (1.0 - s) / (1.0 - ed * s);
    let delta0 = delta0.unwrap_or_else(|| bound.sqrt());
    if delta0 <= 1.0 {
        return Err(Error::OutOfRange("delta0 must exceed 1".into()));
    }
    let b = (0..members).map(|k| delta0.powi(k as i32) * b1).collect();
    Ok(CoveringSeq::Cone { b1, theta, d, delta0, b })
}

/// Upper end of the admissible `delta0` interval for a cone covering.
pub fn cone_delta0_bound(theta: f64, d: f64) -> Result<f64> {
    let s = theta.sin();
    let ed = d.exp();
    if 1.0 - ed * s <= 0.0 {
        return Err(Error::ShellTooThick { ed, limit: 1.0 / s });
    }
    Ok((1.0 - s) / (1.0 - ed * s))
}

/// Exact membership of `x` in shell `k` (0-based), container included.
pub fn member_contains(seq: &CoveringSeq, k: usize, x: &[f64]) -> bool {
    if k >= seq.member_count() {
        return false;
    }
    let trans2: f64 = x[1..].iter().map(|v| v * v).sum();
    match seq {
        CoveringSeq::Cylinder { n_inlet, m, d, a, .. } => {
            if !(x[0] > *n_inlet && trans2 < m * m) {
                return false;
            }
            let dx = x[0] - a[k];
            let r2 = dx * dx + trans2;
            r2 > m * m && r2 < (m * d.exp()).powi(2) && x[0] < a[k]
        }
        CoveringSeq::Cone { theta, d, b, .. } => {
            let tan = theta.tan();
            if !(x[0] > 0.0 && trans2 < (x[0] * tan).powi(2)) {
                return false;
            }
            let l = b[k] * theta.sin();
            let dx = x[0] - b[k];
            let r2 = dx * dx + trans2;
            r2 > l * l && r2 < (l * d.exp()).powi(2) && x[0] < b[k]
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverReport {
    pub union_samples: usize,
    pub union_violations: usize,
    pub handoff_samples: usize,
    pub handoff_violations: usize,
    pub pass: bool,
}

/// Geometric verification by dense sampling in dimension `dim`:
///
/// 1. union coverage over the range the K members are responsible for;
/// 2. handoff containment - for the cylinder, the outer-sphere part of
///    member k+1 lies inside member k; for the cone, the inner sphere
///    `S_k` lies inside member k+1.
pub fn covering_verify(
    seq: &CoveringSeq,
    dim: usize,
    samples: usize,
    seed: u64,
) -> CoverReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut union_samples = 0usize;
    let mut union_violations = 0usize;
    let mut handoff_samples = 0usize;
    let mut handoff_violations = 0usize;
    let members = seq.member_count();

    // Union coverage.
    let union_budget = samples / 2;
    match seq {
        CoveringSeq::Cylinder { n_inlet, m, d, a, .. } => {
            let hi = a[members - 1] - m * d.exp();
            if hi > *n_inlet {
                while union_samples < union_budget {
                    let x1 = rng.gen_range(*n_inlet..hi);
                    let xt = sample_disc(dim - 1, *m, &mut rng);
                    let mut x = vec![x1];
                    x.extend(xt);
                    union_samples += 1;
                    if !(0..members).any(|k| member_contains(seq, k, &x)) {
                        union_violations += 1;
                    }
                }
            }
        }
        CoveringSeq::Cone { b1, theta, d, b, .. } => {
            let s = theta.sin();
            let lo = *b1;
            let hi = 0.8 * b[members - 1] * (1.0 - s * d.exp());
            if hi > lo {
                while union_samples < union_budget {
                    let x1 = rng.gen_range(lo..hi);
                    let xt = sample_disc(dim - 1, x1 * theta.tan(), &mut rng);
                    let mut x = vec![x1];
                    x.extend(xt);
                    union_samples += 1;
                    if !(0..members).any(|k| member_contains(seq, k, &x)) {
                        union_violations += 1;
                    }
                }
            }
        }
    }

    // Handoff containment.
    let per_pair = (samples / 2) / members.max(1) + 1;
    match seq {
        CoveringSeq::Cylinder { n_inlet, m, d, a, .. } => {
            for k in 0..members.saturating_sub(1) {
                // Outer sphere of member k+1 clipped to the cylinder must lie
                // in member k.
                let mut done = 0;
                let mut attempts = 0;
                while done < per_pair && attempts < 100 * per_pair {
                    attempts += 1;
                    let w = unit_vec(dim, &mut rng);
                    let r = m * d.exp();
                    let mut x = vec![a[k + 1] + r * w[0]];
                    x.extend(w[1..].iter().map(|v| v * r));
                    let trans2: f64 = x[1..].iter().map(|v| v * v).sum();
                    if !(x[0] > *n_inlet && trans2 < m * m && x[0] < a[k + 1]) {
                        continue;
                    }
                    done += 1;
                    handoff_samples += 1;
                    if !member_contains(seq, k, &x) {
                        handoff_violations += 1;
                    }
                }
            }
        }
        CoveringSeq::Cone { theta, b, .. } => {
            for k in 0..members.saturating_sub(1) {
                // Inner sphere S_k must be covered by member k+1.
                let l = b[k] * theta.sin();
                let tan = theta.tan();
                let mut done = 0;
                let mut attempts = 0;
                while done < per_pair && attempts < 100 * per_pair {
                    attempts += 1;
                    let w = unit_vec(dim, &mut rng);
                    let mut x = vec![b[k] + l * w[0]];
                    x.extend(w[1..].iter().map(|v| v * l));
                    let trans2: f64 = x[1..].iter().map(|v| v * v).sum();
                    if !(x[0] > 0.0 && trans2 < (x[0] * tan).powi(2) && x[0] < b[k]) {
                        continue;
                    }
                    done += 1;
                    handoff_samples += 1;
                    if !member_contains(seq, k + 1, &x) {
                        handoff_violations += 1;
                    }
                }
            }
        }
    }

    CoverReport {
        union_samples,
        union_violations,
        handoff_samples,
        handoff_violations,
        pass: union_violations == 0 && handoff_violations == 0,
    }
}

/// First coordinate of the intersection of the inner sphere `S_k` with the
/// outer sphere `T_{k+1}` of a cone covering, in closed form.
pub fn cone_intersection_x1(b_k: f64, theta: f64, d: f64, delta0: f64) -> f64 {
    let s2 = theta.sin().powi(2);
    let e2d = (2.0 * d).exp();
    0.5 * b_k * (1.0 + delta0 - s2 * (delta0 * delta0 * e2d - 1.0) / (delta0 - 1.0))
}

/// First coordinate of the intersection hyperplane of two spheres centered
/// on the axis at `c1`, `c2` with radii `r1`, `r2`.
pub fn sphere_intersection_x1(c1: f64, r1: f64, c2: f64, r2: f64) -> f64 {
    0.5 * (c1 + c2) + (r1 * r1 - r2 * r2) / (2.0 * (c2 - c1))
}

fn unit_vec<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim)
            .map(|_| {
                let u1: f64 = rng.gen_range(1e-12..1.0f64);
                let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                (-2.0 * u1.ln()).sqrt() * u2.cos()
            })
            .collect();
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// Uniform point in a (dim)-ball of given radius.
fn sample_disc<R: Rng>(dim: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    let dir = unit_vec(dim, rng);
    let u: f64 = rng.gen_range(0.0..1.0f64);
    let r = radius * u.powf(1.0 / dim as f64);
    dir.iter().map(|v| v * r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cylinder_step_inequalities() {
        let d = std::f64::consts::LN_2;
        let seq = covering_build_cylinder(0.0, 1.0, d, Some(0.9), 10).unwrap();
        let CoveringSeq::Cylinder { a, .. } = &seq else { panic!() };
        let step = a[1] - a[0];
        assert!((step - 0.9).abs() < 1e-12);
        assert!(step < (d.exp() * d.exp() - 1.0f64).sqrt());
        assert!(step < d.exp() - 1.0);
    }

    #[test]
    fn cone_delta0_selection_and_error() {
        // theta = pi/6, e^d = 1.8: bound (1-0.5)/(1-0.9) = 5, default sqrt(5).
        let theta = std::f64::consts::FRAC_PI_6;
        let d = 1.8f64.ln();
        let seq = covering_build_cone(1.0, theta, d, None, 8).unwrap();
        let CoveringSeq::Cone { delta0, .. } = &seq else { panic!() };
        assert!((delta0 - 5f64.sqrt()).abs() < 1e-12);
        // e^d = 2.5 makes 1 - e^d sin(theta) negative.
        assert!(matches!(
            covering_build_cone(1.0, theta, 2.5f64.ln(), None, 4),
            Err(Error::ShellTooThick { .. })
        ));
    }

    #[test]
    fn member_contains_examples() {
        let seq = covering_build_cylinder(0.0, 1.0, std::f64::consts::LN_2, Some(0.9), 4).unwrap();
        // x1 < N excludes the point from the container even though the
        // shell radii match.
        assert!(!member_contains(&seq, 0, &[-1.5, 0.0]));
        // Inner sphere is excluded (strict inequality).
        let CoveringSeq::Cylinder { a, .. } = &seq else { panic!() };
        assert!(!member_contains(&seq, 1, &[a[1] - 1.0, 0.0]));
        let cone =
            covering_build_cone(1.0, std::f64::consts::FRAC_PI_6, 1.8f64.ln(), None, 4).unwrap();
        assert!(!member_contains(&cone, 0, &[0.0, 0.0]));
    }

    #[test]
    fn acceptance_scale_coverings_verify_cleanly() {
        let cyl = covering_build_cylinder(0.0, 1.0, std::f64::consts::LN_2, Some(0.9), 10).unwrap();
        let rep = covering_verify(&cyl, 2, 20_000, 7);
        assert_eq!(rep.union_violations, 0, "{rep:?}");
        assert_eq!(rep.handoff_violations, 0, "{rep:?}");
        let cone = covering_build_cone(
            1.0,
            std::f64::consts::FRAC_PI_6,
            1.8f64.ln(),
            Some(5f64.sqrt()),
            8,
        )
        .unwrap();
        let rep = covering_verify(&cone, 2, 20_000, 7);
        assert_eq!(rep.union_violations, 0, "{rep:?}");
        assert_eq!(rep.handoff_violations, 0, "{rep:?}");
    }

    #[test]
    fn invalid_delta0_produces_violations() {
        let cone =
            covering_build_cone(1.0, std::f64::consts::FRAC_PI_6, 1.8f64.ln(), Some(6.0), 8)
                .unwrap();
        let rep = covering_verify(&cone, 2, 20_000, 7);
        assert!(rep.handoff_violations > 0, "{rep:?}");
    }

    #[test]
    fn intersection_identity_matches_generic_routine() {
        let theta = std::f64::consts::FRAC_PI_6;
        let d = 1.8f64.ln();
        for (b_k, delta0) in [(1.0, 5f64.sqrt()), (3.7, 1.7), (0.4, 3.0)] {
            let s = theta.sin();
            let closed = cone_intersection_x1(b_k, theta, d, delta0);
            let generic = sphere_intersection_x1(
                b_k,
                b_k * s,
                delta0 * b_k,
                delta0 * b_k * s * d.exp(),
            );
            assert!((closed - generic).abs() < 1e-10, "{closed} vs {generic}");
        }
    }

    #[test]
    fn angle_inequality_holds_on_grid() {
        // (1-sin)/(1-sin e^d) < 1/(1 - tan sqrt(e^{2d}-1)) across the
        // admissible parameter range.
        let n_theta = 100;
        let n_ed = 100;
        for i in 0..n_theta {
            let theta = 0.05
                + (std::f64::consts::FRAC_PI_2 - 0.1) * (i as f64 + 0.5) / n_theta as f64;
            let s = theta.sin();
            for j in 0..n_ed {
                let ed = 1.0 + (1.0 / s - 1.0) * (j as f64 + 0.5) / n_ed as f64;
                let lhs = (1.0 - s) / (1.0 - s * ed);
                let denom = 1.0 - theta.tan() * (ed * ed - 1.0f64).sqrt();
                assert!(denom > 0.0);
                let rhs = 1.0 / denom;
                assert!(lhs < rhs, "theta={theta} ed={ed}: {lhs} !< {rhs}");
            }
        }
    }

    #[test]
    fn distance_ordering_along_the_axis() {
        let theta = std::f64::consts::FRAC_PI_6;
        let d = 1.8f64.ln();
        let seq = covering_build_cone(1.0, theta, d, None, 6).unwrap();
        let CoveringSeq::Cone { delta0, b, .. } = &seq else { panic!() };
        let s = theta.sin();
        let ed = d.exp();
        for k in 0..b.len() - 1 {
            let d_sk = b[k] * (1.0 - s);
            let d_tk1 = b[k] * delta0 * (1.0 - ed * s);
            let d_sk1 = b[k] * delta0 * (1.0 - s);
            assert!(d_tk1 < d_sk && d_sk < d_sk1);
        }
    }
}
