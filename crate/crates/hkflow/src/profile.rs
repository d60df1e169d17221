//! Auxiliary profile functions and the supersolution shell families.
//!
//! The decaying radial profile
//!
//! ```text
//! h(r) = integral_r^tau eta(mu ln(t/L)) dt,      L <= r <= tau = L e^d,
//! ```
//!
//! built from the capped density `Phi` and the inverse pair `xi`/`eta`,
//! satisfies `h''/(h')^3 = -(mu/r) Phi(-h')` and has `h'(L) = -infinity`.
//! Composed with the distance to an axis point it yields radial
//! supersolutions `w = h(|x - x0|)` of `Q w <= 0` on spherical shells once
//! the slope floor `H*` makes the zeroth-order term small enough; the
//! selection of `H*` (and with it `d = xi(H*)/mu`, `tau = L e^d`) is an
//! integer ladder with direct feasibility evaluation.
//!
//! Families of shifted copies over a shell covering, with accumulated
//! offsets and boundary-sup contributions, produce the caps that dominate
//! every subfunction on unbounded cylinder- and cone-contained domains.

use serde::Serialize;

use crate::covering::{member_contains, CoveringSeq};
use crate::quad::adaptive_simpson;
use crate::{Error, Result};

/// Absolute quadrature tolerance for evaluating `h`.
const H_QUAD_TOL: f64 = 1e-12;

/// The capped density: `rho^{-2}` below 1, the constant `n-1` beyond.
pub fn phi_cap(rho: f64, n: usize) -> Result<f64> {
    if rho <= 0.0 {
        return Err(Error::OutOfRange(format!("phi_cap needs rho > 0, got {rho}")));
    }
    Ok(if rho < 1.0 { rho.powi(-2) } else { n as f64 - 1.0 })
}

/// `xi(t) = integral_t^infty d rho / (rho^3 Phi(rho))`, in closed form:
/// `1/(2(n-1) t^2)` for `t >= 1` and `ln(1/t) + 1/(2(n-1))` below.
pub fn xi(t: f64, n: usize) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::OutOfRange(format!("xi needs t > 0, got {t}")));
    }
    let c = 1.0 / (2.0 * (n as f64 - 1.0));
    Ok(if t >= 1.0 { c / (t * t) } else { -t.ln() + c })
}

/// Inverse of `xi`: `1/sqrt(2(n-1) beta)` below `beta0 = 1/(2(n-1))`,
/// `exp(-beta + beta0)` beyond. The two branches meet at 1.
pub fn eta(beta: f64, n: usize) -> Result<f64> {
    if beta <= 0.0 {
        return Err(Error::OutOfRange(format!("eta needs beta > 0, got {beta}")));
    }
    let beta0 = 1.0 / (2.0 * (n as f64 - 1.0));
    Ok(if beta < beta0 {
        1.0 / (2.0 * (n as f64 - 1.0) * beta).sqrt()
    } else {
        (-beta + beta0).exp()
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ProfileCase {
    Cylinder,
    Cone { theta: f64 },
}

/// One supersolution profile `h_{mu,tau}` with its slope floor.
#[derive(Clone, Debug, Serialize)]
pub struct AuxProfile {
    pub n: usize,
    pub alpha: f64,
    pub mu: f64,
    pub l: f64,
    pub hstar: f64,
    pub d: f64,
    pub tau: f64,
    pub case: ProfileCase,
}

/// `sup_{t >= t0} (1+t^2)^{(3-alpha)/2} / t^3`. The ratio is strictly
/// decreasing in `t` for every `alpha > 0` (its log-derivative is
/// `-(alpha t^2 + 3)/(t(1+t^2))`), so the supremum sits at `t0`.
pub fn slope_tail_sup(t0: f64, alpha: f64) -> f64 {
    (1.0 + t0 * t0).powf(0.5 * (3.0 - alpha)) / t0.powi(3)
}

fn validate_inputs(n: usize, alpha: f64, mu: f64, l: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::OutOfRange("profile needs n >= 2".into()));
    }
    if alpha <= 0.0 {
        return Err(Error::OutOfRange("profile needs alpha > 0".into()));
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::OutOfRange("profile needs mu in (0, 1)".into()));
    }
    if l <= 0.0 {
        return Err(Error::OutOfRange("profile needs L > 0".into()));
    }
    Ok(())
}

/// Cap `d` for the cone case so that `1 - e^d sin(theta) > 0` stays true
/// with margin: `d <= ln(1/sin theta) / 2`.
fn cap_d(d_raw: f64, case: ProfileCase) -> f64 {
    match case {
        ProfileCase::Cylinder => d_raw,
        ProfileCase::Cone { theta } => d_raw.min(0.5 * (1.0 / theta.sin()).ln()),
    }
}

/// Select the smallest integer `H* >= 2` on the ladder such that the
/// zeroth-order term of `Q w` is dominated on the whole shell:
/// `sup_{t >= H*} (1+t^2)^{(3-alpha)/2}/t^3 <= (n-1)(1-mu)/(L e^d)` with
/// `d = xi(H*)/mu` (capped for cones). The coupled dependence is resolved
/// by direct evaluation at each ladder step.
pub fn build_profile(
    n: usize,
    alpha: f64,
    mu: f64,
    l: f64,
    case: ProfileCase,
) -> Result<AuxProfile> {
    validate_inputs(n, alpha, mu, l)?;
    let mut hstar = 2u64;
    while hstar <= 1_000_000 {
        let hs = hstar as f64;
        let d = cap_d(xi(hs, n)? / mu, case);
        let lhs = slope_tail_sup(hs, alpha);
        let rhs = (n as f64 - 1.0) * (1.0 - mu) / (l * d.exp());
        if lhs <= rhs {
            return Ok(AuxProfile { n, alpha, mu, l, hstar: hs, d, tau: l * d.exp(), case });
        }
        hstar += 1;
    }
    Err(Error::ProfileInfeasible { n, alpha, mu, l })
}

impl AuxProfile {
    /// Profile with an explicitly chosen slope floor; no feasibility check
    /// (used for negative controls).
    pub fn with_hstar(
        n: usize,
        alpha: f64,
        mu: f64,
        l: f64,
        hstar: f64,
        case: ProfileCase,
    ) -> Result<AuxProfile> {
        validate_inputs(n, alpha, mu, l)?;
        if hstar <= 1.0 {
            return Err(Error::OutOfRange("profile needs H* > 1".into()));
        }
        let d = cap_d(xi(hstar, n)? / mu, case);
        Ok(AuxProfile { n, alpha, mu, l, hstar, d, tau: l * d.exp(), case })
    }

    /// Profile sharing a covering's shell thickness `d`; the slope floor is
    /// the largest value compatible with it, `H* = eta(mu d)`.
    pub fn with_shared_d(
        n: usize,
        alpha: f64,
        mu: f64,
        l: f64,
        d: f64,
        case: ProfileCase,
    ) -> Result<AuxProfile> {
        validate_inputs(n, alpha, mu, l)?;
        if d <= 0.0 {
            return Err(Error::OutOfRange("profile needs d > 0".into()));
        }
        let hstar = eta(mu * d, n)?;
        Ok(AuxProfile { n, alpha, mu, l, hstar, d, tau: l * d.exp(), case })
    }

    /// `(h, h', h'')` at radius `r` in `[L, tau]`.
    ///
    /// `h` integrates `eta(mu ln(t/L))` by the substitution `t = L e^{b/mu}`;
    /// below the branch point the further substitution `b = s^2` removes the
    /// inverse-square-root endpoint singularity and the integrand becomes
    /// analytic, while above it the integral is elementary. `h'` is the
    /// negated density; `h''` uses the exact identity
    /// `h'' = (h')^3 (-mu/r) Phi(-h')`. At `r = L` the slope is reported as
    /// the `-infinity` sentinel.
    pub fn h_eval(&self, r: f64) -> Result<(f64, f64, f64)> {
        let tol = 1e-12 * (1.0 + self.tau);
        if r < self.l - tol || r > self.tau + tol {
            return Err(Error::OutsideShell(r));
        }
        let r = r.clamp(self.l, self.tau);
        let n = self.n;
        let nf = n as f64;
        let beta_r = self.mu * (r / self.l).ln();
        let beta_tau = self.mu * self.d;
        let beta0 = 1.0 / (2.0 * (nf - 1.0));

        let mut h = 0.0;
        // Branch below beta0: sigma substitution, adaptive quadrature.
        let lo_a = beta_r.min(beta0);
        let hi_a = beta_tau.min(beta0);
        if hi_a > lo_a {
            let c = (2.0 / (nf - 1.0)).sqrt() * self.l / self.mu;
            let mu = self.mu;
            h += c * adaptive_simpson(
                |s| (s * s / mu).exp(),
                lo_a.sqrt(),
                hi_a.sqrt(),
                H_QUAD_TOL,
            );
        }
        // Branch above beta0: elementary integral of e^{beta0 - b} e^{b/mu}.
        let lo_b = beta_r.max(beta0);
        let hi_b = beta_tau.max(beta0);
        if hi_b > lo_b {
            let gamma = 1.0 / self.mu - 1.0;
            let c = self.l / self.mu * beta0.exp();
            h += if gamma > 1e-12 {
                c * (gamma * lo_b).exp() * (gamma * (hi_b - lo_b)).exp_m1() / gamma
            } else {
                c * (hi_b - lo_b)
            };
        }

        let (hp, hpp) = if beta_r == 0.0 {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            let e = eta(beta_r, n)?;
            let hpp = e.powi(3) * (self.mu / r) * phi_cap(e, n)?;
            (-e, hpp)
        };
        Ok((h, hp, hpp))
    }

    /// Full height of the profile, `h(L)`.
    pub fn height(&self) -> f64 {
        self.h_eval(self.l).expect("L is inside the shell").0
    }

    /// Radial value of `Q w` for `w = h(|x - x0|)` at radius `r`:
    /// `h'' + (n-1)(1+h'^2) h'/r + (1+h'^2)^{(3-alpha)/2}`.
    pub fn qw_radial(&self, r: f64) -> Result<f64> {
        let (_, hp, hpp) = self.h_eval(r)?;
        if !hp.is_finite() {
            return Err(Error::OutsideShell(r));
        }
        let w2 = 1.0 + hp * hp;
        Ok(hpp + (self.n as f64 - 1.0) * w2 * hp / r + w2.powf(0.5 * (3.0 - self.alpha)))
    }
}

/// Radial supersolution `w(x) = h(|x - center|)` on the open shell
/// (closed at the outer sphere, where it vanishes).
pub fn supersolution_w(profile: &AuxProfile, center: &[f64], x: &[f64]) -> Result<f64> {
    let r = crate::domain::dist(x, center);
    let tol = 1e-12 * (1.0 + profile.tau);
    if r <= profile.l + tol || r > profile.tau + tol {
        return Err(Error::OutsideShell(r));
    }
    Ok(profile.h_eval(r)?.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct SupersolutionReport {
    pub n: usize,
    pub alpha: f64,
    pub mu: f64,
    pub l: f64,
    pub hstar: f64,
    pub d: f64,
    pub max_residual: f64,
    pub argmax_radius: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Evaluate `Q w` on `samples` radii strictly inside the shell and report
/// the maximum; the profile certifies as a supersolution iff it stays
/// negative.
pub fn verify_supersolution(profile: &AuxProfile, samples: usize) -> Result<SupersolutionReport> {
    let mut max_residual = f64::NEG_INFINITY;
    let mut argmax = profile.l;
    for i in 0..samples {
        let r = profile.l + (profile.tau - profile.l) * (i as f64 + 0.5) / samples as f64;
        let q = profile.qw_radial(r)?;
        if q > max_residual {
            max_residual = q;
            argmax = r;
        }
    }
    Ok(SupersolutionReport {
        n: profile.n,
        alpha: profile.alpha,
        mu: profile.mu,
        l: profile.l,
        hstar: profile.hstar,
        d: profile.d,
        max_residual,
        argmax_radius: argmax,
        samples,
        pass: max_residual < 0.0,
    })
}

/// Family of shifted supersolutions over a covering: member `k` evaluates
/// `h_k(|x - x_k|) + offset_k + s_k`, where the offsets accumulate the
/// profile heights and `s_k` is the boundary sup of `|phi|` up to the
/// member's cap coordinate.
#[derive(Clone, Debug)]
pub struct SupersolutionFamily {
    pub covering: CoveringSeq,
    pub n: usize,
    pub alpha: f64,
    pub mu: f64,
    /// One shared profile (cylinder) or one per member (cone).
    members: Vec<AuxProfile>,
    offsets: Vec<f64>,
    s: Vec<f64>,
}

/// Build the family over `covering`. `phi_sup(t)` must return
/// `sup { |phi(x)| : x on the domain boundary, x_1 <= t }`.
pub fn family_build(
    covering: &CoveringSeq,
    phi_sup: &dyn Fn(f64) -> f64,
    n: usize,
    alpha: f64,
    mu: f64,
) -> Result<SupersolutionFamily> {
    match covering {
        CoveringSeq::Cylinder { m, d, a, .. } => {
            let profile = AuxProfile::with_shared_d(n, alpha, mu, *m, *d, ProfileCase::Cylinder)?;
            let height = profile.height();
            let offsets = (0..a.len()).map(|k| k as f64 * height).collect();
            let s = a.iter().map(|&ak| phi_sup(ak)).collect();
            Ok(SupersolutionFamily {
                covering: covering.clone(),
                n,
                alpha,
                mu,
                members: vec![profile],
                offsets,
                s,
            })
        }
        CoveringSeq::Cone { theta, d, b, .. } => {
            let mut members = Vec::with_capacity(b.len());
            let mut offsets = Vec::with_capacity(b.len());
            let mut acc = 0.0;
            for &bk in b {
                let lk = bk * theta.sin();
                let prof =
                    AuxProfile::with_shared_d(n, alpha, mu, lk, *d, ProfileCase::Cone { theta: *theta })?;
                offsets.push(acc);
                acc += prof.height();
                members.push(prof);
            }
            let s = b.iter().map(|&bk| phi_sup(bk)).collect();
            Ok(SupersolutionFamily {
                covering: covering.clone(),
                n,
                alpha,
                mu,
                members,
                offsets,
                s,
            })
        }
    }
}

impl SupersolutionFamily {
    pub fn member_count(&self) -> usize {
        self.offsets.len()
    }

    pub fn member_profile(&self, k: usize) -> &AuxProfile {
        if self.members.len() == 1 {
            &self.members[0]
        } else {
            &self.members[k]
        }
    }

    fn member_center_x1(&self, k: usize) -> f64 {
        match &self.covering {
            CoveringSeq::Cylinder { a, .. } => a[k],
            CoveringSeq::Cone { b, .. } => b[k],
        }
    }

    /// `w_k(x)`. The radius may reach the closed outer sphere (where `h`
    /// vanishes); evaluation outside the shell closure or beyond the
    /// member's cap coordinate errors.
    pub fn eval(&self, k: usize, x: &[f64]) -> Result<f64> {
        let prof = self.member_profile(k);
        let cx1 = self.member_center_x1(k);
        let mut center = vec![0.0; x.len()];
        center[0] = cx1;
        let r = crate::domain::dist(x, &center);
        let tol = 1e-12 * (1.0 + prof.tau);
        if r <= prof.l + tol || r > prof.tau + tol || x[0] > cx1 + tol {
            return Err(Error::OutsideShell(r));
        }
        Ok(prof.h_eval(r.min(prof.tau))?.0 + self.offsets[k] + self.s[k])
    }

    /// Pointwise minimum of `w_k(x)` over the members whose shell contains
    /// `x` (exact covering predicate). Errors with `extend covering` when
    /// no member applies.
    pub fn cap_min(&self, x: &[f64]) -> Result<f64> {
        let mut best: Option<f64> = None;
        for k in 0..self.member_count() {
            if member_contains(&self.covering, k, x) {
                let v = self.eval(k, x)?;
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        best.ok_or_else(|| {
            Error::ExtendCovering(
                x.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", "),
            )
        })
    }

    /// Certify each member on its own shell.
    pub fn verify_members(&self, samples: usize) -> Result<Vec<SupersolutionReport>> {
        (0..self.member_count())
            .map(|k| verify_supersolution(self.member_profile(k), samples))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covering::{covering_build_cone, covering_build_cylinder};

    #[test]
    fn phi_cap_examples() {
        assert_eq!(phi_cap(0.5, 2).unwrap(), 4.0);
        assert_eq!(phi_cap(1.0, 3).unwrap(), 2.0);
        assert_eq!(phi_cap(7.0, 2).unwrap(), 1.0);
        assert!(phi_cap(0.0, 2).is_err());
    }

    #[test]
    fn xi_matches_direct_quadrature_of_its_definition() {
        // Independent oracle: integrate 1/(rho^3 Phi(rho)) numerically and
        // add the analytic tail beyond R.
        for n in [2usize, 3] {
            for t in [0.3, 1.0, 2.5] {
                let big = 1e4;
                let mut oracle = 0.0;
                if t < 1.0 {
                    oracle += adaptive_simpson(|r| 1.0 / r, t, 1.0, 1e-13);
                }
                oracle += adaptive_simpson(
                    |r| 1.0 / ((n as f64 - 1.0) * r.powi(3)),
                    t.max(1.0),
                    big,
                    1e-13,
                );
                oracle += 1.0 / (2.0 * (n as f64 - 1.0) * big * big);
                let v = xi(t, n).unwrap();
                assert!((v - oracle).abs() < 1e-10, "n={n} t={t}: {v} vs {oracle}");
            }
        }
    }

    #[test]
    fn xi_eta_closed_form_examples() {
        assert!((xi(1.0, 2).unwrap() - 0.5).abs() < 1e-15);
        let e = std::f64::consts::E;
        assert!((xi(1.0 / e, 2).unwrap() - 1.5).abs() < 1e-14);
        assert!((eta(1.5, 2).unwrap() - 1.0 / e).abs() < 1e-14);
        for n in [2usize, 3, 5] {
            let beta0 = 1.0 / (2.0 * (n as f64 - 1.0));
            assert!((eta(beta0, n).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn inverse_pair_on_log_grids() {
        for n in [2usize, 3] {
            for i in 0..400 {
                let beta = 10f64.powf(-3.0 + 4.0 * i as f64 / 399.0);
                let t = eta(beta, n).unwrap();
                assert!((xi(t, n).unwrap() - beta).abs() <= 1e-10, "n={n} beta={beta}");
            }
            for i in 0..400 {
                let t = 10f64.powf(-2.0 + 4.0 * i as f64 / 399.0);
                let b = xi(t, n).unwrap();
                let back = eta(b, n).unwrap();
                assert!((back - t).abs() <= 1e-10 * t, "n={n} t={t}");
            }
        }
    }

    #[test]
    fn eta_total_integral_is_finite_and_matches_closed_form() {
        for n in [2usize, 3] {
            let nf = n as f64;
            let beta0 = 1.0 / (2.0 * (nf - 1.0));
            // Singular part via the sigma substitution, tail analytic.
            let head = adaptive_simpson(
                |s| 2.0 * s / (2.0 * (nf - 1.0) * s * s).sqrt(),
                1e-12,
                beta0.sqrt(),
                1e-13,
            );
            let total = head + 1.0;
            assert!((total - (1.0 + 1.0 / (nf - 1.0))).abs() < 1e-9);
        }
    }

    #[test]
    fn slope_tail_sup_is_decreasing() {
        for alpha in [0.5, 1.0, 2.0, 3.0] {
            let mut prev = f64::INFINITY;
            for i in 0..200 {
                let t = 1.01 + 50.0 * i as f64 / 199.0;
                let g = slope_tail_sup(t, alpha);
                assert!(g < prev, "alpha={alpha} t={t}");
                prev = g;
            }
        }
    }

    #[test]
    fn ladder_selects_hstar_3_for_reference_inputs() {
        let p = build_profile(2, 1.0, 0.5, 1.0, ProfileCase::Cylinder).unwrap();
        assert_eq!(p.hstar, 3.0);
        assert!((p.d - 1.0 / 9.0).abs() < 1e-15);
        // The ladder rejected H* = 2 and accepted H* = 3 by the explicit
        // feasibility numbers.
        let lhs2 = slope_tail_sup(2.0, 1.0);
        let rhs2 = 0.5 / (xi(2.0, 2).unwrap() / 0.5).exp();
        assert!(lhs2 > rhs2, "{lhs2} vs {rhs2}");
        let lhs3 = slope_tail_sup(3.0, 1.0);
        let rhs3 = 0.5 / (1.0f64 / 9.0).exp();
        assert!((lhs3 - 10.0 / 27.0).abs() < 1e-12);
        assert!((rhs3 - 0.44742).abs() < 1e-4);
        assert!(lhs3 <= rhs3);
    }

    #[test]
    fn alpha_three_admits_small_hstar() {
        let p = build_profile(2, 3.0, 0.5, 1.0, ProfileCase::Cylinder).unwrap();
        assert_eq!(p.hstar, 2.0);
    }

    #[test]
    fn profile_h_boundary_values_and_slope_floor() {
        let p = build_profile(2, 1.0, 0.5, 1.0, ProfileCase::Cylinder).unwrap();
        let (h_tau, _, _) = p.h_eval(p.tau).unwrap();
        assert!(h_tau.abs() < 1e-12);
        let (_, hp_l, _) = p.h_eval(p.l).unwrap();
        assert!(hp_l == f64::NEG_INFINITY);
        // h'(L e^{xi(1)/mu}) = -1 by the inverse identity.
        let r = p.l * (xi(1.0, 2).unwrap() / p.mu).exp();
        if r <= p.tau {
            let (_, hp, _) = p.h_eval(r).unwrap();
            assert!((hp + 1.0).abs() < 1e-12);
        }
        // |h'| >= H* strictly inside the shell.
        for i in 1..200 {
            let r = p.l + (p.tau - p.l) * i as f64 / 200.0;
            let (_, hp, _) = p.h_eval(r).unwrap();
            assert!(hp.abs() >= p.hstar - 1e-9, "r={r}: {hp}");
        }
    }

    #[test]
    fn h_second_derivative_identity_vs_numerical_differentiation() {
        let p = build_profile(2, 1.0, 0.5, 1.0, ProfileCase::Cylinder).unwrap();
        let span = p.tau - p.l;
        for i in 0..100 {
            // Log-spaced distances from the singular endpoint.
            let f = 10f64.powf(-6.0 + 5.99 * i as f64 / 99.0);
            let r = p.l + f * span;
            let delta = 1e-4 * (r - p.l).min(p.tau - r).min(span / 10.0);
            let (_, _, hpp) = p.h_eval(r).unwrap();
            let rp = r + delta;
            let rm = r - delta;
            let (_, hp_p, _) = p.h_eval(rp).unwrap();
            let (_, hp_m, _) = p.h_eval(rm).unwrap();
            // Divide by the floating-point-exact step.
            let numdiff = (hp_p - hp_m) / (rp - rm);
            assert!(
                (hpp - numdiff).abs() <= 1e-6 * hpp.abs(),
                "r={r}: identity {hpp} vs numdiff {numdiff}"
            );
        }
    }

    #[test]
    fn supersolution_w_shape() {
        let p = build_profile(2, 1.0, 0.5, 1.0, ProfileCase::Cylinder).unwrap();
        let c = [0.25, -0.5];
        let r_mid = 0.5 * (p.l + p.tau);
        let a = supersolution_w(&p, &c, &[c[0] + r_mid, c[1]]).unwrap();
        let b = supersolution_w(&p, &c, &[c[0], c[1] - r_mid]).unwrap();
        assert!((a - b).abs() < 1e-14);
        let outer = supersolution_w(&p, &c, &[c[0] + p.tau, c[1]]).unwrap();
        assert!(outer.abs() < 1e-12);
        let r2 = r_mid + 0.3 * (p.tau - p.l);
        let far = supersolution_w(&p, &c, &[c[0] + r2, c[1]]).unwrap();
        assert!(a > far);
        assert!(supersolution_w(&p, &c, &[c[0] + 2.0 * p.tau, c[1]]).is_err());
    }

    #[test]
    fn certified_profile_and_negative_control() {
        let p = build_profile(2, 1.0, 0.5, 1.0, ProfileCase::Cylinder).unwrap();
        let rep = verify_supersolution(&p, 10_000).unwrap();
        assert!(rep.pass, "max residual {rep:?}");
        assert!(rep.max_residual < 0.0);
        let broken = AuxProfile::with_hstar(2, 1.0, 0.5, 1.0, 1.01, ProfileCase::Cylinder).unwrap();
        let rep = verify_supersolution(&broken, 10_000).unwrap();
        assert!(!rep.pass);
        assert!(rep.max_residual > 0.0);
    }

    #[test]
    fn parameter_sweep_certifies() {
        for n in [2usize, 3] {
            for alpha in [0.5, 1.0, 2.0] {
                for mu in [0.3, 0.5, 0.8] {
                    let p = build_profile(n, alpha, mu, 1.0, ProfileCase::Cylinder).unwrap();
                    let rep = verify_supersolution(&p, 2_000).unwrap();
                    assert!(rep.pass, "n={n} alpha={alpha} mu={mu}: {rep:?}");
                }
            }
        }
    }

    #[test]
    fn cylinder_family_is_monotone_on_overlaps() {
        use rand::Rng;
        use rand::SeedableRng;
        let p = build_profile(2, 1.0, 0.5, 1.0, ProfileCase::Cylinder).unwrap();
        let cov = covering_build_cylinder(0.0, 1.0, p.d, Some(0.9), 12).unwrap();
        let fam = family_build(&cov, &|_t| 0.25, 2, 1.0, 0.5).unwrap();
        let CoveringSeq::Cylinder { a, .. } = &fam.covering.clone() else { panic!() };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let mut checked = 0;
        for k in 2..fam.member_count() - 1 {
            let mut tries = 0;
            while checked < (k - 1) * 20 && tries < 200_000 {
                tries += 1;
                let x = [a[k] - rng.gen_range(0.0..p.tau), rng.gen_range(-1.0..1.0)];
                if member_contains(&fam.covering, k, &x) && member_contains(&fam.covering, k + 1, &x)
                {
                    let wk = fam.eval(k, &x).unwrap();
                    let wk1 = fam.eval(k + 1, &x).unwrap();
                    assert!(wk <= wk1 + 1e-10, "k={k} x={x:?}: {wk} vs {wk1}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 50, "only {checked} overlap points found");
    }

    #[test]
    fn cone_family_is_monotone_on_overlaps() {
        use rand::Rng;
        use rand::SeedableRng;
        let theta = std::f64::consts::FRAC_PI_6;
        let d = 0.2;
        let cov = covering_build_cone(1.0, theta, d, None, 8).unwrap();
        let fam = family_build(&cov, &|_t| 0.0, 2, 1.0, 0.5).unwrap();
        let CoveringSeq::Cone { b, .. } = &fam.covering.clone() else { panic!() };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        let mut checked = 0;
        for k in 0..fam.member_count() - 1 {
            let lk = b[k] * theta.sin();
            let mut tries = 0;
            let mut found_k = 0;
            while found_k < 25 && tries < 400_000 {
                tries += 1;
                let x1 = b[k] - rng.gen_range(0.0..lk * d.exp());
                let x = [x1, rng.gen_range(-1.0..1.0) * (x1 * theta.tan()).max(0.0)];
                if member_contains(&fam.covering, k, &x) && member_contains(&fam.covering, k + 1, &x)
                {
                    let wk = fam.eval(k, &x).unwrap();
                    let wk1 = fam.eval(k + 1, &x).unwrap();
                    assert!(wk <= wk1 + 1e-10, "k={k} x={x:?}");
                    checked += 1;
                    found_k += 1;
                }
            }
        }
        assert!(checked > 20, "only {checked} overlap points found");
    }

    #[test]
    fn first_member_vanishes_on_outer_sphere_with_zero_data() {
        let p = build_profile(2, 1.0, 0.5, 1.0, ProfileCase::Cylinder).unwrap();
        let cov = covering_build_cylinder(0.0, 1.0, p.d, Some(0.9), 3).unwrap();
        let fam = family_build(&cov, &|_t| 0.0, 2, 1.0, 0.5).unwrap();
        let CoveringSeq::Cylinder { a, .. } = &fam.covering.clone() else { panic!() };
        let x = [a[0] - p.tau, 0.0];
        let w = fam.eval(0, &x).unwrap();
        assert!(w.abs() < 1e-12);
    }
}
