//! The quasilinear operator `Q u = a^{ij}(Du) D_ij u + b(Du)` with
//! `a^{ij}(p) = (1+|p|^2) delta_ij - p_i p_j` and
//! `b(p) = (1+|p|^2)^{(3-alpha)/2}`,
//! plus its divergence form, its linearization around a grid field, and the
//! translating-profile consistency check.
//!
//! The nondivergence form is the solver's primary discretization; the
//! divergence form `div(Du/W) + W^{-alpha}` (with `W = sqrt(1+|Du|^2)`) is
//! related to it pointwise by the exact factor `W^3` and is kept for
//! cross-checks.

use serde::Serialize;

use crate::domain::{NodeClass, ScalarField};
use crate::stencil::{build_stencils, NodeStencil, Scheme, Term, ValRef};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OperatorParams {
    pub n: usize,
    pub alpha: f64,
}

impl OperatorParams {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::OutOfRange("operator dimension must be >= 2".into()));
        }
        if alpha <= 0.0 {
            return Err(Error::OutOfRange("alpha must be positive".into()));
        }
        Ok(OperatorParams { n, alpha })
    }

    /// Power `k = 1/alpha` of the corresponding `H^k`-flow.
    pub fn flow_power(&self) -> f64 {
        1.0 / self.alpha
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    Nondivergence,
    Divergence,
}

/// Coefficients `a^{ij}(p)` (row-major) and `b(p)`.
pub fn coeff_a_b(p: &[f64], params: &OperatorParams) -> (Vec<f64>, f64) {
    let n = p.len();
    let w2 = 1.0 + sqnorm(p);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = if i == j { w2 } else { 0.0 } - p[i] * p[j];
        }
    }
    (a, b_of(p, params.alpha))
}

pub(crate) fn sqnorm(p: &[f64]) -> f64 {
    p.iter().map(|v| v * v).sum()
}

pub(crate) fn b_of(p: &[f64], alpha: f64) -> f64 {
    (1.0 + sqnorm(p)).powf(0.5 * (3.0 - alpha))
}

/// `a^{ij}(p) H_ij` from a Hessian in (diag, off-diagonal) layout.
pub(crate) fn a_contract(p: &[f64], diag: &[f64], off: &[((usize, usize), f64)]) -> f64 {
    let w2 = 1.0 + sqnorm(p);
    let mut s = 0.0;
    for (i, &hii) in diag.iter().enumerate() {
        s += (w2 - p[i] * p[i]) * hii;
    }
    for &((i, j), hij) in off {
        s -= 2.0 * p[i] * p[j] * hij;
    }
    s
}

/// Gradient of `p -> a^{ij}(p) H_ij + c_b * b(p)` (set `c_b = 0` for the
/// minimal-surface operator).
pub(crate) fn q_grad_coeffs(
    p: &[f64],
    diag: &[f64],
    off: &[((usize, usize), f64)],
    alpha: f64,
    with_b: bool,
) -> Vec<f64> {
    let n = p.len();
    let tr: f64 = diag.iter().sum();
    // (H p)_k with symmetric H.
    let mut hp = vec![0.0; n];
    for (i, &hii) in diag.iter().enumerate() {
        hp[i] += hii * p[i];
    }
    for &((i, j), hij) in off {
        hp[i] += hij * p[j];
        hp[j] += hij * p[i];
    }
    let bp = if with_b {
        (3.0 - alpha) * (1.0 + sqnorm(p)).powf(0.5 * (1.0 - alpha))
    } else {
        0.0
    };
    (0..n).map(|k| 2.0 * p[k] * tr - 2.0 * hp[k] + bp * p[k]).collect()
}

/// Pointwise residual of the chosen form at a gradient/Hessian sample.
pub(crate) fn residual_at(
    p: &[f64],
    diag: &[f64],
    off: &[((usize, usize), f64)],
    params: &OperatorParams,
    form: Form,
) -> f64 {
    let nondiv = a_contract(p, diag, off) + b_of(p, params.alpha);
    match form {
        Form::Nondivergence => nondiv,
        Form::Divergence => nondiv / (1.0 + sqnorm(p)).powf(1.5),
    }
}

/// Nodal residual of `Q` over the whole grid using field-only stencils:
/// central differences at interior nodes, one-sided (first-order) at
/// boundary-cut nodes.
pub fn residual_q(u: &ScalarField, params: &OperatorParams, form: Form) -> Result<ScalarField> {
    let grid = &u.grid;
    let set = build_stencils(grid, Scheme::FieldOnly)?;
    let mut values = Vec::with_capacity(grid.len());
    for st in &set.stencils {
        let p = st.eval_grad(&u.values);
        let (diag, off) = st.eval_hess(&u.values);
        values.push(residual_at(&p, &diag, &off, params, form));
    }
    Ok(ScalarField { grid: grid.clone(), values })
}

/// Sparse linearization of the field-only discrete `Q` around `u`.
///
/// Interior rows hold the Frechet derivative of the central-difference
/// residual; boundary-cut rows are identity rows, so the system
/// `J delta = rhs` (with `rhs = -Q(u)` at interior rows, `0` at boundary
/// rows) is a Newton step that leaves boundary nodes fixed.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub rows: usize,
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
}

impl LinearSystem {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for &(r, c, w) in &self.triplets {
            out[r] += w * v[c];
        }
        out
    }
}

pub fn linearize_q(u: &ScalarField, params: &OperatorParams) -> Result<LinearSystem> {
    let grid = &u.grid;
    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; grid.len()];
    let set = build_stencils(grid, Scheme::FieldOnly)?;
    for (i, node) in grid.nodes.iter().enumerate() {
        if node.class == NodeClass::BoundaryCut {
            triplets.push((i, i, 1.0));
            continue;
        }
        let st = &set.stencils[i];
        let p = st.eval_grad(&u.values);
        let (diag, off) = st.eval_hess(&u.values);
        rhs[i] = -residual_at(&p, &diag, &off, params, Form::Nondivergence);
        accumulate_row(i, st, &p, &diag, &off, params.alpha, true, &mut |r, c, w| {
            triplets.push((r, c, w))
        });
    }
    Ok(LinearSystem { rows: grid.len(), triplets, rhs })
}

/// Shared Jacobian-row assembly: chain rule through the stencil weights.
pub(crate) fn accumulate_row(
    row: usize,
    st: &NodeStencil,
    p: &[f64],
    diag: &[f64],
    off: &[((usize, usize), f64)],
    alpha: f64,
    with_b: bool,
    push: &mut dyn FnMut(usize, usize, f64),
) {
    let w2 = 1.0 + sqnorm(p);
    let cg = q_grad_coeffs(p, diag, off, alpha, with_b);
    let mut emit = |terms: &[Term], coeff: f64| {
        if coeff == 0.0 {
            return;
        }
        for t in terms {
            if let ValRef::Node(c) = t.re {
                push(row, c, coeff * t.w);
            }
        }
    };
    for (axis, terms) in st.grad.iter().enumerate() {
        emit(terms, cg[axis]);
    }
    for (axis, terms) in st.hess_diag.iter().enumerate() {
        emit(terms, w2 - p[axis] * p[axis]);
    }
    for ((i, j), terms) in &st.hess_off {
        emit(terms, -2.0 * p[*i] * p[*j]);
    }
}

/// Translating-profile deviation of a field under the `H^k`-flow with
/// `k = 1/alpha`.
///
/// Writes `V = -u` and measures, with an independent staggered flux
/// discretization of the divergence, how far
/// `sqrt(1+|DV|^2) * div(DV/sqrt(1+|DV|^2))^k` is from the unit vertical
/// speed of a translating graph. Returns the maximum deviation over
/// interior nodes. Errors if the divergence term is not positive somewhere
/// (the profile fails discrete mean-convexity there).
pub fn flow_translation_check(u: &ScalarField, params: &OperatorParams) -> Result<f64> {
    Ok(flow_translation_deviations(u, params)?
        .into_iter()
        .map(|(_, d)| d)
        .fold(0.0f64, f64::max))
}

/// Per-interior-node deviations backing [`flow_translation_check`].
pub fn flow_translation_deviations(
    u: &ScalarField,
    params: &OperatorParams,
) -> Result<Vec<(usize, f64)>> {
    let grid = &u.grid;
    let h = grid.h;
    let k = params.flow_power();
    // V = -u.
    let v: Vec<f64> = u.values.iter().map(|x| -x).collect();

    // Lenient per-node gradient stencils (cut nodes may be skipped).
    let mut grads: Vec<Option<Vec<f64>>> = vec![None; grid.len()];
    match build_stencils(grid, Scheme::FieldOnly) {
        Ok(set) => {
            for (i, st) in set.stencils.iter().enumerate() {
                grads[i] = Some(st.eval_grad(&v));
            }
        }
        Err(_) => {
            for i in 0..grid.len() {
                if let Ok(st) = crate::stencil::build_stencils_single(grid, i) {
                    grads[i] = Some(st.eval_grad(&v));
                }
            }
        }
    }

    let mut out = Vec::new();
    for (i, node) in grid.nodes.iter().enumerate() {
        if node.class != NodeClass::Interior {
            continue;
        }
        let gi = grads[i].as_ref().expect("interior gradient");
        let mut div = 0.0;
        for axis in 0..grid.dim {
            let mut flux = [0.0, 0.0];
            for side in 0..2 {
                let j = node.nbr[axis][side].expect("interior neighbor");
                let sign = if side == 0 { -1.0 } else { 1.0 };
                let dn = sign * (v[j] - v[i]) / h;
                let mut g2 = dn * dn;
                for t in 0..grid.dim {
                    if t == axis {
                        continue;
                    }
                    let gt = match &grads[j] {
                        Some(gj) => 0.5 * (gi[t] + gj[t]),
                        None => gi[t],
                    };
                    g2 += gt * gt;
                }
                flux[side] = dn / (1.0 + g2).sqrt();
            }
            div += (flux[1] - flux[0]) / h;
        }
        if div <= 0.0 {
            return Err(Error::NotMeanConvex(i, div));
        }
        let w = (1.0 + sqnorm(gi)).sqrt();
        out.push((i, (w * div.powf(k) - 1.0).abs()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{classify_nodes, DomainSpec, Shape};
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn disk_grid(h: f64) -> Arc<crate::domain::Grid> {
        let d = DomainSpec::new(Shape::Ball { center: vec![0.0, 0.0], radius: 1.0 }, 2).unwrap();
        Arc::new(classify_nodes(&d, h).unwrap())
    }

    #[test]
    fn coeff_examples() {
        let p2 = OperatorParams::new(2, 1.0).unwrap();
        let (a, b) = coeff_a_b(&[0.0, 0.0], &p2);
        assert_eq!(a, vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(b, 1.0);
        let (a, _) = coeff_a_b(&[1.0, 0.0], &p2);
        assert_eq!(a, vec![1.0, 0.0, 0.0, 2.0]);
        let p_a3 = OperatorParams::new(2, 3.0).unwrap();
        let (_, b) = coeff_a_b(&[1.0, 0.0], &p_a3);
        assert!((b - 1.0).abs() < 1e-15);
    }

    #[test]
    fn residual_of_constants_and_affine_fields() {
        let grid = disk_grid(0.1);
        let params = OperatorParams::new(2, 1.0).unwrap();
        let u = ScalarField::constant(grid.clone(), 5.0);
        let r = residual_q(&u, &params, Form::Nondivergence).unwrap();
        for (i, node) in grid.nodes.iter().enumerate() {
            if node.class == NodeClass::Interior {
                assert!((r.values[i] - 1.0).abs() < 1e-12);
            }
        }
        let u = ScalarField::from_fn(grid.clone(), |x| x[0]);
        let r = residual_q(&u, &params, Form::Nondivergence).unwrap();
        for (i, node) in grid.nodes.iter().enumerate() {
            if node.class == NodeClass::Interior {
                assert!((r.values[i] - 2.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn form_consistency_w3() {
        let grid = disk_grid(0.1);
        let params = OperatorParams::new(2, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let (c1, c2, c3): (f64, f64, f64) =
                (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let u = ScalarField::from_fn(grid.clone(), |x| {
                c1 * (2.0 * x[0]).sin() + c2 * x[0] * x[1] + c3 * (x[1] * 1.5).cos()
            });
            let rn = residual_q(&u, &params, Form::Nondivergence).unwrap();
            let rd = residual_q(&u, &params, Form::Divergence).unwrap();
            // Recompute W at each node to scale.
            let set = crate::stencil::build_stencils(&grid, Scheme::FieldOnly).unwrap();
            for i in 0..grid.len() {
                let p = set.stencils[i].eval_grad(&u.values);
                let w3 = (1.0 + sqnorm(&p)).powf(1.5);
                let lhs = rn.values[i];
                let rhs = w3 * rd.values[i];
                assert!(
                    (lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()),
                    "node {i}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn shift_invariance_of_residual() {
        let grid = disk_grid(0.1);
        let params = OperatorParams::new(2, 1.3).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| (x[0] * 1.3).sin() - 0.4 * x[1] * x[1]);
        let mut shifted = u.clone();
        for v in &mut shifted.values {
            *v += 17.25; // exactly representable shift
        }
        let r1 = residual_q(&u, &params, Form::Nondivergence).unwrap();
        let r2 = residual_q(&shifted, &params, Form::Nondivergence).unwrap();
        for i in 0..grid.len() {
            assert!((r1.values[i] - r2.values[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn linearization_matches_directional_derivative() {
        let grid = disk_grid(0.125);
        let params = OperatorParams::new(2, 1.0).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| 0.3 * (x[0] + 0.5 * x[1]).sin());
        let sys = linearize_q(&u, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // v vanishing on boundary rows.
        let v: Vec<f64> = grid
            .nodes
            .iter()
            .map(|n| {
                if n.class == NodeClass::Interior {
                    rng.gen_range(-1.0..1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let jv = sys.apply(&v);
        let eps = 1e-6;
        let mut up = u.clone();
        let mut um = u.clone();
        for ((a, b), x) in up.values.iter_mut().zip(&v).zip(um.values.iter_mut()) {
            *a += eps * b;
            *x -= eps * b;
        }
        let r0 = residual_q(&u, &params, Form::Nondivergence).unwrap();
        let rp = residual_q(&up, &params, Form::Nondivergence).unwrap();
        let rm = residual_q(&um, &params, Form::Nondivergence).unwrap();
        // The one-sided quotient misses Jv by the curvature term, which is
        // O(eps / h^2); the central quotient kills it.
        let c_one_sided = 100.0 / (grid.h * grid.h);
        for (i, node) in grid.nodes.iter().enumerate() {
            if node.class != NodeClass::Interior {
                continue;
            }
            let fwd = (rp.values[i] - r0.values[i]) / eps;
            assert!(
                (fwd - jv[i]).abs() < c_one_sided * eps,
                "row {i}: fwd {fwd} vs Jv {}",
                jv[i]
            );
            let ctr = (rp.values[i] - rm.values[i]) / (2.0 * eps);
            assert!(
                (ctr - jv[i]).abs() < 1e-6 * (1.0 + jv[i].abs()),
                "row {i}: ctr {ctr} vs Jv {}",
                jv[i]
            );
        }
    }

    #[test]
    fn linearization_at_zero_is_laplacian_and_identity_boundary() {
        let grid = disk_grid(0.2);
        let params = OperatorParams::new(2, 1.0).unwrap();
        let u = ScalarField::constant(grid.clone(), 0.0);
        let sys = linearize_q(&u, &params).unwrap();
        let h2 = grid.h * grid.h;
        // Dense check against the 5-point Laplacian at interior rows and
        // unit diagonal at boundary rows.
        let mut dense = vec![0.0; grid.len() * grid.len()];
        for &(r, c, w) in &sys.triplets {
            dense[r * grid.len() + c] += w;
        }
        for (i, node) in grid.nodes.iter().enumerate() {
            if node.class == NodeClass::Interior {
                assert!((dense[i * grid.len() + i] + 4.0 / h2).abs() < 1e-9);
                for axis in 0..2 {
                    for side in 0..2 {
                        let j = node.nbr[axis][side].unwrap();
                        assert!((dense[i * grid.len() + j] - 1.0 / h2).abs() < 1e-9);
                    }
                }
            } else {
                assert!((dense[i * grid.len() + i] - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn flow_check_errors_on_constant_profile() {
        let grid = disk_grid(0.2);
        let params = OperatorParams::new(2, 1.0).unwrap();
        let u = ScalarField::constant(grid, 3.0);
        assert!(matches!(
            flow_translation_check(&u, &params),
            Err(Error::NotMeanConvex(_, _))
        ));
    }

    proptest! {
        // Eigenstructure of a(p): eigenvalue 1 along p, 1+|p|^2 on the
        // orthogonal complement.
        #[test]
        fn coefficient_eigenstructure(px in -3.0f64..3.0, py in -3.0f64..3.0, pz in -3.0f64..3.0) {
            let p = vec![px, py, pz];
            let params = OperatorParams::new(3, 1.0).unwrap();
            let (a, _) = coeff_a_b(&p, &params);
            let n = 3;
            let w2 = 1.0 + sqnorm(&p);
            // a p = p
            for i in 0..n {
                let api: f64 = (0..n).map(|j| a[i * n + j] * p[j]).sum();
                prop_assert!((api - p[i]).abs() <= 1e-12 * (1.0 + sqnorm(&p)));
            }
            // a q = (1+|p|^2) q for q orthogonal to p
            let q = if px.abs() > 0.1 || py.abs() > 0.1 {
                vec![-py, px, 0.0]
            } else {
                vec![0.0, -pz, py]
            };
            for i in 0..n {
                let aqi: f64 = (0..n).map(|j| a[i * n + j] * q[j]).sum();
                prop_assert!((aqi - w2 * q[i]).abs() <= 1e-12 * w2 * (1.0 + sqnorm(&q)));
            }
        }
    }
}
