//! Lifting, subfunctions, monotone Perron sweeps, and the exhaustion
//! scheme for unbounded domains.
//!
//! Lifting replaces a field inside a subdomain by the solution of the
//! translator equation with the field's own values as ring data; it is
//! monotone in the field and idempotent, and never decreases a
//! subfunction. Sweeping the lift over an overlapping schedule of
//! subdomains, starting from the minimal-surface solution and taking
//! pointwise maxima, climbs monotonically to the discrete Dirichlet
//! solution - the computable shadow of taking the supremum of the
//! subfunction class.
//!
//! On an unbounded cylinder- or cone-contained domain the problem is
//! exhausted by capped truncations: each one is solved twice, with
//! subsolution data (from the minimal solution) and with supersolution
//! data (the pointwise minimum of the covering caps) on the artificial
//! boundary. The two fields bracket the true solution, and the gap on a
//! fixed compact set certifies the quality of the approximation.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain::{classify_nodes, truncate, DomainSpec, Grid, NodeClass, ScalarField, Shape};
use crate::operator::OperatorParams;
use crate::profile::SupersolutionFamily;
use crate::solver::{
    compare_fields, minimal_field, solve_subset, translator_residual, translator_residual_sup,
    DiscreteProblem, SolveOptions,
};
use crate::{Error, Result};

/// Ordered overlapping subdomains for the lift sweep.
#[derive(Clone, Debug)]
pub struct LiftSchedule {
    pub subdomains: Vec<DomainSpec>,
    pub max_sweeps: usize,
}

impl LiftSchedule {
    pub fn from_subdomains(subdomains: Vec<DomainSpec>, max_sweeps: usize) -> Self {
        LiftSchedule { subdomains, max_sweeps }
    }

    /// Default schedule: `per_axis^dim` overlapping balls laid over the
    /// bounding box. The radius is generous enough that consecutive
    /// members overlap by well over the 30% the sweep convergence wants.
    pub fn overlapping_balls(domain: &DomainSpec, per_axis: usize, max_sweeps: usize) -> Result<Self> {
        let (lo, hi) = domain.bbox().ok_or(Error::UnboundedDomain)?;
        let dim = domain.dim;
        let max_extent = (0..dim).map(|i| hi[i] - lo[i]).fold(0.0f64, f64::max);
        let radius = 0.75 * (dim as f64).sqrt() * max_extent / per_axis as f64;
        let mut subdomains = Vec::new();
        let mut idx = vec![0usize; dim];
        loop {
            let center: Vec<f64> = (0..dim)
                .map(|i| lo[i] + (hi[i] - lo[i]) * (idx[i] as f64 + 0.5) / per_axis as f64)
                .collect();
            subdomains.push(DomainSpec::new(Shape::Ball { center, radius }, dim)?);
            let mut axis = 0;
            loop {
                if axis == dim {
                    return Ok(LiftSchedule { subdomains, max_sweeps });
                }
                idx[axis] += 1;
                if idx[axis] < per_axis {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
        }
    }
}

/// Random probe balls for the subfunction check: centers at interior
/// nodes, radii between `3h` and a tenth of the domain diameter.
pub fn random_probes(grid: &Grid, count: usize, seed: u64) -> Vec<DomainSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let interior: Vec<usize> = (0..grid.len())
        .filter(|&i| grid.nodes[i].class == NodeClass::Interior)
        .collect();
    let diam = grid.domain.diameter();
    let r_lo = 3.0 * grid.h;
    let r_hi = (0.1 * diam).max(r_lo * 1.01);
    (0..count)
        .map(|_| {
            let i = interior[rng.gen_range(0..interior.len())];
            let radius = rng.gen_range(r_lo..r_hi);
            DomainSpec::new(
                Shape::Ball { center: grid.nodes[i].pos.clone(), radius },
                grid.dim,
            )
            .expect("probe ball")
        })
        .collect()
}

/// Assembled context for lift operations on one grid: the discrete
/// problem with `phi` baked into the boundary arms, plus solve options.
pub struct LiftContext {
    prob: DiscreteProblem,
    pub opts: SolveOptions,
}

impl LiftContext {
    pub fn build(
        grid: &Arc<Grid>,
        phi: &dyn Fn(&[f64]) -> f64,
        params: OperatorParams,
        opts: SolveOptions,
    ) -> Result<Self> {
        Ok(LiftContext { prob: DiscreteProblem::build(grid, params, phi)?, opts })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.prob.grid
    }

    /// Minimal-surface solution with the context's boundary data (the
    /// subfunction seed `v0`).
    pub fn minimal_solution(&self) -> Result<ScalarField> {
        let (values, _) = minimal_field(&self.prob, &self.opts)?;
        Ok(ScalarField { grid: self.prob.grid.clone(), values })
    }

    /// Sup norm of the translator residual of a field.
    pub fn residual_sup(&self, u: &ScalarField) -> f64 {
        translator_residual_sup(&self.prob, &u.values)
    }

    /// Nodal translator residual of a field.
    pub fn residual(&self, u: &ScalarField) -> Vec<f64> {
        translator_residual(&self.prob, &u.values)
    }
}

/// Lifting of `v` over `o`: `v` outside, the translator solution with
/// ring data `v` inside. Boundary-cut rows inside `o` keep the domain's
/// own Dirichlet data.
pub fn lift(ctx: &LiftContext, v: &ScalarField, o: &DomainSpec) -> Result<ScalarField> {
    let grid = ctx.grid();
    let rows: Vec<usize> = (0..grid.len())
        .filter(|&i| o.contains(&grid.nodes[i].pos))
        .collect();
    let mut values = v.values.clone();
    if rows.is_empty() {
        return Ok(ScalarField { grid: grid.clone(), values });
    }
    solve_subset(&ctx.prob, &rows, &mut values, &ctx.opts)?;
    Ok(ScalarField { grid: grid.clone(), values })
}

#[derive(Clone, Debug, Serialize)]
pub struct SubfunctionReport {
    /// max over boundary nodes of v - phi(cut point) minus the slack.
    pub boundary_excess: f64,
    pub boundary_ok: bool,
    /// Worst decrease under the probe lifts.
    pub lift_min_increment: f64,
    pub lift_ok: bool,
    /// Worst excess over the covering caps (None if no family given or no
    /// node lies in a shell).
    pub cap_excess: Option<f64>,
    pub cap_ok: bool,
    pub pass: bool,
}

/// Check membership of `v` in the discrete subfunction class:
/// below the boundary data, not decreased by probe lifts, and below the
/// supersolution caps wherever a covering shell applies. `phi` must be
/// the data the context was built with.
pub fn subfunction_check(
    ctx: &LiftContext,
    v: &ScalarField,
    phi: &dyn Fn(&[f64]) -> f64,
    family: Option<&SupersolutionFamily>,
    probes: &[DomainSpec],
) -> Result<SubfunctionReport> {
    let grid = ctx.grid();
    // (1) v <= phi on the boundary: compare at cut nodes against the cut
    // point value, with slack for the arm offset times the local slope.
    let mut boundary_excess = f64::NEG_INFINITY;
    for (i, node) in grid.nodes.iter().enumerate() {
        if node.class != NodeClass::BoundaryCut {
            continue;
        }
        let mut lip: f64 = 0.0;
        for axis in 0..grid.dim {
            for side in 0..2 {
                if let Some(j) = node.nbr[axis][side] {
                    lip = lip.max((v.values[i] - v.values[j]).abs() / grid.h);
                }
            }
        }
        for axis in 0..grid.dim {
            for side in 0..2 {
                if node.nbr[axis][side].is_none() {
                    let arm = node.arms[axis][side];
                    let p = grid.cut_point(i, axis, side);
                    let bound = phi(&p);
                    let slack = 1e-8 + 2.0 * arm * (lip + 1.0);
                    boundary_excess = boundary_excess.max(v.values[i] - bound - slack);
                }
            }
        }
    }
    let boundary_ok = boundary_excess <= 0.0;

    // (2) v <= lift(v, O) for each probe.
    let mut lift_min_increment = f64::INFINITY;
    for o in probes {
        let z = lift(ctx, v, o)?;
        for i in 0..grid.len() {
            if o.contains(&grid.nodes[i].pos) {
                lift_min_increment = lift_min_increment.min(z.values[i] - v.values[i]);
            }
        }
    }
    let lift_ok = lift_min_increment >= -1e-8;

    // (3)/(4) v <= w_k on the shells of the covering.
    let mut cap_excess: Option<f64> = None;
    if let Some(fam) = family {
        for (i, node) in grid.nodes.iter().enumerate() {
            for k in 0..fam.member_count() {
                if crate::covering::member_contains(&fam.covering, k, &node.pos) {
                    let w = fam.eval(k, &node.pos)?;
                    let e = v.values[i] - w;
                    cap_excess = Some(cap_excess.map_or(e, |c: f64| c.max(e)));
                }
            }
        }
    }
    let cap_ok = cap_excess.map_or(true, |e| e <= 1e-8);

    Ok(SubfunctionReport {
        boundary_excess,
        boundary_ok,
        lift_min_increment,
        lift_ok,
        cap_excess,
        cap_ok,
        pass: boundary_ok && lift_ok && cap_ok,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PerronReport {
    pub sweeps: usize,
    pub sweep_deltas: Vec<f64>,
    pub min_increment: f64,
    pub final_residual: f64,
}

/// Monotone Perron iteration: start at the minimal-surface seed, sweep
/// lifts over the schedule taking pointwise maxima, stop when a full
/// sweep moves the field less than `tol`.
pub fn perron_solve(
    ctx: &LiftContext,
    schedule: &LiftSchedule,
    tol: f64,
) -> Result<(ScalarField, PerronReport)> {
    let grid = ctx.grid();
    // Every node must be reachable by some subdomain, otherwise the sweep
    // cannot converge to the Dirichlet solution.
    for node in &grid.nodes {
        if !schedule.subdomains.iter().any(|o| o.contains(&node.pos)) {
            return Err(Error::Config(format!(
                "lift schedule does not cover node at {:?}",
                node.pos
            )));
        }
    }

    let mut v = ctx.minimal_solution()?;
    let mut deltas = Vec::new();
    let mut min_inc = f64::INFINITY;
    let mut sweeps = 0usize;
    loop {
        let prev = v.clone();
        for o in &schedule.subdomains {
            let z = lift(ctx, &v, o)?;
            let mut worst = f64::INFINITY;
            for i in 0..grid.len() {
                if o.contains(&grid.nodes[i].pos) {
                    worst = worst.min(z.values[i] - v.values[i]);
                }
            }
            if worst < -1e-8 {
                return Err(Error::MonotonicityViolated(worst));
            }
            min_inc = min_inc.min(worst);
            v = v.max_with(&z)?;
        }
        sweeps += 1;
        let delta = v
            .values
            .iter()
            .zip(&prev.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        deltas.push(delta);
        if delta < tol {
            break;
        }
        if sweeps >= schedule.max_sweeps {
            return Err(Error::NewtonStagnation {
                steps: sweeps,
                history: deltas,
            });
        }
    }
    let final_residual = ctx.residual_sup(&v);
    Ok((v, PerronReport { sweeps, sweep_deltas: deltas, min_increment: min_inc, final_residual }))
}

#[derive(Clone, Debug, Serialize)]
pub struct ExhaustionStep {
    pub r_cut: f64,
    pub gap: f64,
    pub ordering_ok: bool,
    pub caps_ok: bool,
    pub cap_violation: f64,
    pub sub_iterations: usize,
    pub sup_iterations: usize,
}

#[derive(Debug)]
pub struct ExhaustionResult {
    pub steps: Vec<ExhaustionStep>,
    /// Per truncation, the bracketing pair (u_sub, u_sup).
    pub fields: Vec<(ScalarField, ScalarField)>,
}

impl ExhaustionResult {
    pub fn gaps(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.gap).collect()
    }
}

/// Exhaust an unbounded domain by the truncation schedule, solving each
/// truncation with subsolution data (the minimal-surface seed `v0`,
/// computed once on the largest truncation) and supersolution data (the
/// pointwise minimum of the covering caps) on the artificial cap, and
/// report the bracketing gap on the compact set `x_1 <= compact_x1`.
#[allow(clippy::too_many_arguments)]
pub fn exhaustion_solve(
    base: &DomainSpec,
    phi: &dyn Fn(&[f64]) -> f64,
    params: OperatorParams,
    schedule: &[f64],
    family: &SupersolutionFamily,
    h: f64,
    compact_x1: f64,
    opts: &SolveOptions,
) -> Result<ExhaustionResult> {
    if base.is_bounded() {
        return Err(Error::Domain("exhaustion needs an unbounded base domain".into()));
    }
    let last = schedule.len() - 1;
    let grid_big = Arc::new(classify_nodes(&truncate(base, last, schedule)?, h)?);
    let ctx_big = LiftContext::build(&grid_big, phi, params, opts.clone())?;
    let v0 = ctx_big.minimal_solution()?;

    let mut steps = Vec::new();
    let mut fields = Vec::new();
    for j in 0..schedule.len() {
        let omega_j = truncate(base, j, schedule)?;
        let grid = Arc::new(classify_nodes(&omega_j, h)?);

        let is_physical = |p: &[f64]| match base.boundary_distance(p) {
            Ok(d) => d <= 1e-7 * (1.0 + crate::domain::norm(p)),
            Err(_) => false,
        };

        let sub_data = |p: &[f64]| -> f64 {
            if is_physical(p) {
                phi(p)
            } else if j == last {
                // v0's own Dirichlet data on the outermost cap.
                phi(p)
            } else {
                v0.interpolate(p).unwrap_or_else(|| phi(p))
            }
        };
        // Supersolution cap data; errors out of the covered range are
        // surfaced after the closure runs (expression closures cannot
        // return Result), so collect them here.
        let cap_err = std::cell::RefCell::new(None::<Error>);
        let sup_data = |p: &[f64]| -> f64 {
            if is_physical(p) {
                phi(p)
            } else {
                match family.cap_min(p) {
                    Ok(v) => v,
                    Err(e) => {
                        *cap_err.borrow_mut() = Some(e);
                        0.0
                    }
                }
            }
        };

        let (u_sub, rep_sub) = crate::solver::solve_dirichlet(
            &grid,
            &sub_data,
            params,
            crate::solver::SolveMode::Translator,
            opts,
        )?;
        let (u_sup, rep_sup) = crate::solver::solve_dirichlet(
            &grid,
            &sup_data,
            params,
            crate::solver::SolveMode::Translator,
            opts,
        )?;
        if let Some(e) = cap_err.into_inner() {
            return Err(e);
        }

        let ordering = compare_fields(&u_sub, &u_sup)?;

        // Both fields must stay below every applicable cap.
        let mut cap_violation = f64::NEG_INFINITY;
        let mut any_cap = false;
        for (i, node) in grid.nodes.iter().enumerate() {
            for k in 0..family.member_count() {
                if crate::covering::member_contains(&family.covering, k, &node.pos) {
                    let w = family.eval(k, &node.pos)?;
                    any_cap = true;
                    cap_violation = cap_violation
                        .max(u_sub.values[i] - w)
                        .max(u_sup.values[i] - w);
                }
            }
        }
        let caps_ok = !any_cap || cap_violation <= 1e-6 * (1.0 + cap_violation.abs());

        let gap = grid
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.pos[0] <= compact_x1)
            .map(|(i, _)| u_sup.values[i] - u_sub.values[i])
            .fold(0.0f64, f64::max);

        steps.push(ExhaustionStep {
            r_cut: schedule[j],
            gap,
            ordering_ok: ordering.leq,
            caps_ok,
            cap_violation: if any_cap { cap_violation } else { f64::NEG_INFINITY },
            sub_iterations: rep_sub.iterations,
            sup_iterations: rep_sup.iterations,
        });
        fields.push((u_sub, u_sup));
    }
    Ok(ExhaustionResult { steps, fields })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_dirichlet, SolveMode};

    fn disk_ctx(h: f64, phi: &dyn Fn(&[f64]) -> f64) -> (Arc<Grid>, LiftContext) {
        let d = DomainSpec::new(Shape::Ball { center: vec![0.0, 0.0], radius: 1.0 }, 2).unwrap();
        let grid = Arc::new(classify_nodes(&d, h).unwrap());
        let params = OperatorParams::new(2, 1.0).unwrap();
        let ctx = LiftContext::build(&grid, phi, params, SolveOptions::default()).unwrap();
        (grid, ctx)
    }

    #[test]
    fn lift_fixes_solutions_and_is_idempotent() {
        let phi = |x: &[f64]| 0.2 * x[0];
        let (grid, ctx) = disk_ctx(0.125, &phi);
        let params = OperatorParams::new(2, 1.0).unwrap();
        let (u, _) =
            solve_dirichlet(&grid, &phi, params, SolveMode::Translator, &SolveOptions::default())
                .unwrap();
        let o = DomainSpec::new(Shape::Ball { center: vec![0.2, 0.0], radius: 0.5 }, 2).unwrap();
        let lifted = lift(&ctx, &u, &o).unwrap();
        let max_move = u
            .values
            .iter()
            .zip(&lifted.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_move <= 2e-10, "solution moved by {max_move}");

        let v = ctx.minimal_solution().unwrap();
        let l1 = lift(&ctx, &v, &o).unwrap();
        let l2 = lift(&ctx, &l1, &o).unwrap();
        let idem = l1
            .values
            .iter()
            .zip(&l2.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(idem <= 2.0 * ctx.opts.tolerance * 1e2 + 2e-10, "idempotence gap {idem}");
    }

    #[test]
    fn lift_is_monotone_in_the_field() {
        let phi = |x: &[f64]| 0.3 * x[1];
        let (_, ctx) = disk_ctx(0.125, &phi);
        let v1 = ctx.minimal_solution().unwrap();
        let mut v2 = v1.clone();
        for (i, w) in v2.values.iter_mut().enumerate() {
            // Ordered pair: lower v1 inside, keep boundary intact.
            if ctx.grid().nodes[i].class == NodeClass::Interior {
                *w += 0.05;
            }
        }
        let o = DomainSpec::new(Shape::Ball { center: vec![0.0, 0.0], radius: 0.6 }, 2).unwrap();
        let l1 = lift(&ctx, &v1, &o).unwrap();
        let l2 = lift(&ctx, &v2, &o).unwrap();
        let worst = l1
            .values
            .iter()
            .zip(&l2.values)
            .map(|(a, b)| a - b)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(worst <= 1e-8, "monotonicity violated by {worst}");
    }

    #[test]
    fn subfunction_seed_passes_all_checks() {
        let phi = |x: &[f64]| 0.2 * x[0] + 0.1;
        let (grid, ctx) = disk_ctx(0.125, &phi);
        let v0 = ctx.minimal_solution().unwrap();
        let probes = random_probes(&grid, 8, 42);
        let rep = subfunction_check(&ctx, &v0, &phi, None, &probes).unwrap();
        assert!(rep.pass, "{rep:?}");

        // Max of two passing subfunctions passes; a lift of one passes.
        let shifted = ScalarField {
            grid: grid.clone(),
            values: v0.values.iter().map(|v| v - 0.05).collect(),
        };
        let maxed = v0.max_with(&shifted).unwrap();
        let rep = subfunction_check(&ctx, &maxed, &phi, None, &probes).unwrap();
        assert!(rep.pass, "max case: {rep:?}");
        let o = DomainSpec::new(Shape::Ball { center: vec![-0.2, 0.1], radius: 0.4 }, 2).unwrap();
        let lifted = lift(&ctx, &v0, &o).unwrap();
        let rep = subfunction_check(&ctx, &lifted, &phi, None, &probes).unwrap();
        assert!(rep.pass, "lift case: {rep:?}");
    }

    #[test]
    fn perron_matches_direct_solve_on_the_disk() {
        let params = OperatorParams::new(2, 1.0).unwrap();
        let oracle = crate::solver::radial_oracle(params, 0.0, 1.1, 1e-3);
        let phi = move |x: &[f64]| oracle.eval_u(crate::domain::norm(x));
        let d = DomainSpec::new(Shape::Ball { center: vec![0.0, 0.0], radius: 1.0 }, 2).unwrap();
        let grid = Arc::new(classify_nodes(&d, 0.125).unwrap());
        let opts = SolveOptions { tolerance: 1e-10, ..Default::default() };
        let ctx = LiftContext::build(&grid, &phi, params, opts.clone()).unwrap();
        let schedule = LiftSchedule::overlapping_balls(&d, 2, 60).unwrap();
        let tol = 1e-9;
        let (v, rep) = perron_solve(&ctx, &schedule, tol).unwrap();
        let (direct, _) =
            solve_dirichlet(&grid, &phi, params, SolveMode::Translator, &opts).unwrap();
        let dist = v
            .values
            .iter()
            .zip(&direct.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(dist <= 10.0 * tol, "perron vs direct: {dist} (report {rep:?})");
        assert!(rep.min_increment >= -1e-8);
    }
}
