//! Boundary barriers `w± = phi ± psi(dist)` on a mean-convex collar.
//!
//! With `psi(t) = ln(1 + k t) / c3` and the explicit constants below, the
//! composed fields are global upper and lower barriers for the translator
//! operator: `±Q w± < 0` strictly inside the collar, `w± = phi` on the
//! boundary, and `psi(d1) >= a + m` traps any solution with `|u| <= m`.
//! The boundary slope `psi'(0) = k/c3` then bounds the solution's boundary
//! gradient.
//!
//! For `alpha >= 1` the gradient-power factor is bounded by 1 instead of
//! the small-alpha tail estimate, with the slope floor `nu` raised so that
//! `(n-1) H0 nu >= 2`; the algebra is otherwise identical and the result
//! is verified numerically rather than assumed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain::{DomainSpec, Shape};
use crate::operator::{b_of, sqnorm, OperatorParams};
use crate::{Error, Result};

/// Floor applied to `c3` when the boundary data is flat enough to make
/// `c1 + c2 = 0` (psi must stay well defined; the floor only loosens the
/// constants).
const C3_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct BarrierSpec {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub nu: f64,
    pub d1: f64,
    pub k: f64,
    /// sup of |phi| over the collar.
    pub a: f64,
    /// Assumed bound on sup |u|.
    pub m: f64,
    /// Minimum boundary mean curvature.
    pub h0: f64,
    pub sup_dphi: f64,
    pub sup_d2phi: f64,
    pub sup_d2d: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BarrierReport {
    pub samples: usize,
    /// max over samples of max(Q w+, -Q w-).
    pub max_pm_residual: f64,
    pub argmax_distance: f64,
    /// min over near-edge samples of w+ - m (ordering w+ >= m at the inner
    /// collar edge; symmetric for w-).
    pub edge_margin: f64,
    pub pass: bool,
}

/// Collar width on which the distance function satisfies
/// `sum_i D_ii d <= -(n-1) H0`; conservative per analytic shape.
fn usable_collar_width(domain: &DomainSpec) -> Result<f64> {
    match &domain.shape {
        Shape::Ball { radius, .. } => Ok(0.5 * radius),
        Shape::Truncation { base, .. } => match **base {
            Shape::RoundedStrip { rho, .. } => Ok(0.5 * rho),
            Shape::Cylinder { radius, .. } => Ok(0.5 * radius),
            Shape::Cone { .. } => Err(Error::CurvatureUnavailable(
                "cone truncations are not supported by the barrier construction".into(),
            )),
            _ => unreachable!(),
        },
        _ => Err(Error::CurvatureUnavailable(
            "barrier collar needs an analytic mean-convex shape".into(),
        )),
    }
}

/// `(d, Dd, D^2 d)` at an interior point; analytic for balls, annuli and
/// capsule-type truncations, finite differences of the distance function
/// otherwise.
pub fn distance_derivatives(domain: &DomainSpec, x: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let n = domain.dim;
    let d = domain.boundary_distance(x)?;
    match &domain.shape {
        Shape::Ball { center, .. } => {
            let v: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
            let r = crate::domain::norm(&v);
            if r < 1e-12 {
                return Err(Error::CurvatureUnavailable(
                    "distance Hessian singular at the center".into(),
                ));
            }
            let grad: Vec<f64> = v.iter().map(|vi| -vi / r).collect();
            let mut hess = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    hess[i * n + j] = -(delta - v[i] * v[j] / (r * r)) / r;
                }
            }
            Ok((d, grad, hess))
        }
        Shape::Annulus { center, r_in, r_out } => {
            let v: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
            let r = crate::domain::norm(&v);
            let outer = (r_out - r) <= (r - r_in);
            let sgn = if outer { -1.0 } else { 1.0 };
            let grad: Vec<f64> = v.iter().map(|vi| sgn * vi / r).collect();
            let mut hess = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    hess[i * n + j] = sgn * (delta - v[i] * v[j] / (r * r)) / r;
                }
            }
            Ok((d, grad, hess))
        }
        Shape::Truncation { base, x1_max } => {
            if let Shape::RoundedStrip { cap, .. } = **base {
                // Distance to the capsule spine segment [cap, x1_max] x {0}.
                let q1 = x[0].clamp(cap, *x1_max);
                let mut v = x.to_vec();
                v[0] -= q1;
                let r = crate::domain::norm(&v);
                if r < 1e-12 {
                    return Err(Error::CurvatureUnavailable(
                        "distance Hessian singular on the spine".into(),
                    ));
                }
                let grad: Vec<f64> = v.iter().map(|vi| -vi / r).collect();
                let mut hess = vec![0.0; n * n];
                let on_wall = x[0] > cap && x[0] < *x1_max;
                for i in 0..n {
                    for j in 0..n {
                        // On the straight wall the distance is affine in x1.
                        if on_wall && (i == 0 || j == 0) {
                            continue;
                        }
                        let delta = if i == j { 1.0 } else { 0.0 };
                        hess[i * n + j] = -(delta - v[i] * v[j] / (r * r)) / r;
                    }
                }
                Ok((d, grad, hess))
            } else {
                fd_distance_derivatives(domain, x, d)
            }
        }
        _ => fd_distance_derivatives(domain, x, d),
    }
}

fn fd_distance_derivatives(
    domain: &DomainSpec,
    x: &[f64],
    d: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let n = domain.dim;
    let eps = (1e-5f64).min(0.25 * d).max(1e-9);
    let dd = |y: &[f64]| domain.boundary_distance(y).unwrap_or(0.0);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    for i in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += eps;
        xm[i] -= eps;
        grad[i] = (dd(&xp) - dd(&xm)) / (2.0 * eps);
        hess[i * n + i] = (dd(&xp) - 2.0 * d + dd(&xm)) / (eps * eps);
        for j in (i + 1)..n {
            let mut pp = x.to_vec();
            let mut pm = x.to_vec();
            let mut mp = x.to_vec();
            let mut mm = x.to_vec();
            pp[i] += eps;
            pp[j] += eps;
            pm[i] += eps;
            pm[j] -= eps;
            mp[i] -= eps;
            mp[j] += eps;
            mm[i] -= eps;
            mm[j] -= eps;
            let v = (dd(&pp) - dd(&pm) - dd(&mp) + dd(&mm)) / (4.0 * eps * eps);
            hess[i * n + j] = v;
            hess[j * n + i] = v;
        }
    }
    Ok((d, grad, hess))
}

/// Central finite differences of the boundary expression in the ambient
/// coordinates.
fn phi_derivatives(phi: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let n = x.len();
    let eps = 1e-5 * (1.0 + crate::domain::norm(x));
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    let f0 = phi(x);
    for i in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += eps;
        xm[i] -= eps;
        let (fp, fm) = (phi(&xp), phi(&xm));
        grad[i] = (fp - fm) / (2.0 * eps);
        hess[i * n + i] = (fp - 2.0 * f0 + fm) / (eps * eps);
        for j in (i + 1)..n {
            let mut pp = x.to_vec();
            let mut pm = x.to_vec();
            let mut mp = x.to_vec();
            let mut mm = x.to_vec();
            pp[i] += eps;
            pp[j] += eps;
            pm[i] += eps;
            pm[j] -= eps;
            mp[i] -= eps;
            mp[j] += eps;
            mm[i] -= eps;
            mm[j] -= eps;
            let v = (phi(&pp) - phi(&pm) - phi(&mp) + phi(&mm)) / (4.0 * eps * eps);
            hess[i * n + j] = v;
            hess[j * n + i] = v;
        }
    }
    (f0, grad, hess)
}

/// Rejection-sample interior collar points with `d(x)` in `(lo, hi)`.
fn sample_collar(
    domain: &DomainSpec,
    lo: f64,
    hi: f64,
    count: usize,
    seed: u64,
) -> Vec<(Vec<f64>, f64)> {
    let (blo, bhi) = domain.bbox().expect("bounded domain");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count && attempts < 2000 * count {
        attempts += 1;
        let x: Vec<f64> = (0..domain.dim)
            .map(|i| rng.gen_range(blo[i]..bhi[i]))
            .collect();
        if !domain.contains(&x) {
            continue;
        }
        if let Ok(d) = domain.boundary_distance(&x) {
            if d > lo && d < hi {
                out.push((x, d));
            }
        }
    }
    out
}

/// Assemble the barrier constants for `domain` with boundary data `phi`
/// and height bound `m`:
///
/// * `H0` = min boundary mean curvature (dense sampling; error if <= 0);
/// * `nu` = `max(1, 2/((n-1) H0))` for `alpha >= 1`, else the smallest
///   power of two making the positivity condition hold with 10% margin;
/// * `c1 = 2 n^2 ((1 + 2 sup|Dphi|^2)/nu + 2) sup|D^2 phi|`;
/// * `c2 = sup|D^2 d| (n^2 sup|Dphi|^2/nu + 2 n sup|Dphi|)`;
/// * `c3 = c1 + c2` (floored at 1e-6), `d1 = min(1/(nu c3), width)/2`,
///   `k = (e^{c3(a+m)} - 1)/d1 + nu c3/(1 - nu c3 d1)`.
pub fn barrier_constants(
    domain: &DomainSpec,
    phi: &dyn Fn(&[f64]) -> f64,
    params: &OperatorParams,
    m: f64,
    seed: u64,
) -> Result<BarrierSpec> {
    let n = params.n as f64;
    let width = usable_collar_width(domain)?;

    let boundary = domain.sample_boundary(2000, f64::INFINITY, seed);
    let mut h0 = f64::INFINITY;
    for y in &boundary {
        h0 = h0.min(domain.boundary_mean_curvature(y)?);
    }
    if h0 <= 0.0 {
        return Err(Error::MeanConvexityViolated(h0));
    }

    let collar = sample_collar(domain, 0.0, width, 2000, seed ^ 0x51ab);
    let mut a: f64 = 0.0;
    let mut sup_dphi: f64 = 0.0;
    let mut sup_d2phi: f64 = 0.0;
    let mut sup_d2d: f64 = 0.0;
    for (x, _) in collar.iter() {
        let (f, g, hmat) = phi_derivatives(phi, x);
        a = a.max(f.abs());
        sup_dphi = sup_dphi.max(sqnorm(&g).sqrt());
        sup_d2phi = sup_d2phi.max(hmat.iter().fold(0.0f64, |acc, v| acc.max(v.abs())));
        if let Ok((_, _, dh)) = distance_derivatives(domain, x) {
            sup_d2d = sup_d2d.max(dh.iter().fold(0.0f64, |acc, v| acc.max(v.abs())));
        }
    }
    for y in &boundary {
        let (f, g, _) = phi_derivatives(phi, y);
        a = a.max(f.abs());
        sup_dphi = sup_dphi.max(sqnorm(&g).sqrt());
    }

    let nu = if params.alpha >= 1.0 {
        (2.0 / ((n - 1.0) * h0)).max(1.0)
    } else {
        let mut nu = 1.0f64;
        loop {
            let term = ((1.0 + 2.0 * sup_dphi * sup_dphi) / (nu * nu) + 2.0)
                .powf(0.5 * (1.0 - params.alpha))
                * nu.powf(-params.alpha);
            if 1.1 * term <= (n - 1.0) * h0 {
                break nu;
            }
            nu *= 2.0;
            if nu > 2f64.powi(60) {
                return Err(Error::MeanConvexityViolated(h0));
            }
        }
    };

    let c1 = 2.0 * n * n * ((1.0 + 2.0 * sup_dphi * sup_dphi) / nu + 2.0) * sup_d2phi;
    let c2 = sup_d2d * (n * n * sup_dphi * sup_dphi / nu + 2.0 * n * sup_dphi);
    let c3 = (c1 + c2).max(C3_FLOOR);
    let d1 = 0.5 * (1.0 / (nu * c3)).min(width);
    let k = ((c3 * (a + m)).exp() - 1.0) / d1 + nu * c3 / (1.0 - nu * c3 * d1);

    Ok(BarrierSpec { c1, c2, c3, nu, d1, k, a, m, h0, sup_dphi, sup_d2phi, sup_d2d })
}

/// `(psi, psi', psi'')` at distance `dval` in `[0, d1]`. The defining
/// identity `psi'' + c3 psi'^2 = 0` holds exactly.
pub fn psi_eval(spec: &BarrierSpec, dval: f64) -> Result<(f64, f64, f64)> {
    if !(0.0..=spec.d1 + 1e-15).contains(&dval) {
        return Err(Error::OutOfRange(format!(
            "psi is defined on [0, d1 = {}], got {dval}",
            spec.d1
        )));
    }
    let q = 1.0 + spec.k * dval;
    let psi = q.ln() / spec.c3;
    let dpsi = spec.k / (spec.c3 * q);
    let ddpsi = -spec.k * spec.k / (spec.c3 * q * q);
    Ok((psi, dpsi, ddpsi))
}

/// Evaluate `±Q w±` on collar samples with exact `psi` derivatives
/// composed with the distance derivatives; the barrier certifies iff the
/// maximum stays negative.
pub fn barrier_verify(
    spec: &BarrierSpec,
    domain: &DomainSpec,
    phi: &dyn Fn(&[f64]) -> f64,
    params: &OperatorParams,
    samples: usize,
    seed: u64,
) -> Result<BarrierReport> {
    let n = params.n;
    let pts = sample_collar(domain, 1e-12, spec.d1, samples, seed);
    let mut max_pm = f64::NEG_INFINITY;
    let mut argmax = 0.0;
    let mut edge_margin = f64::INFINITY;
    for (x, dval) in &pts {
        let (_, dgrad, dhess) = distance_derivatives(domain, x)?;
        let (f, fgrad, fhess) = phi_derivatives(phi, x);
        let (_, dpsi, ddpsi) = psi_eval(spec, *dval)?;
        for sign in [1.0, -1.0] {
            let grad: Vec<f64> = fgrad
                .iter()
                .zip(&dgrad)
                .map(|(a, b)| a + sign * dpsi * b)
                .collect();
            let mut hess = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    hess[i * n + j] = fhess[i * n + j]
                        + sign * (ddpsi * dgrad[i] * dgrad[j] + dpsi * dhess[i * n + j]);
                }
            }
            let diag: Vec<f64> = (0..n).map(|i| hess[i * n + i]).collect();
            let mut off = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    off.push(((i, j), hess[i * n + j]));
                }
            }
            let q = crate::operator::a_contract(&grad, &diag, &off) + b_of(&grad, params.alpha);
            let signed = sign * q;
            if signed > max_pm {
                max_pm = signed;
                argmax = *dval;
            }
        }
        // Ordering at the inner collar edge: w+ >= m once psi(d) ~ psi(d1).
        if *dval > 0.9 * spec.d1 {
            let (psi, _, _) = psi_eval(spec, *dval)?;
            edge_margin = edge_margin.min(f + psi - spec.m);
        }
    }
    Ok(BarrierReport {
        samples: pts.len(),
        max_pm_residual: max_pm,
        argmax_distance: argmax,
        edge_margin,
        pass: max_pm < 0.0,
    })
}

/// Boundary gradient bound `sup |D phi| + k/c3` implied by the barrier.
pub fn gradient_bound(spec: &BarrierSpec) -> f64 {
    spec.sup_dphi + spec.k / spec.c3
}
