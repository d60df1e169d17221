//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line (run with `cargo test --test acceptance -- --nocapture` to see
//! them). Every tolerance is pinned here in code.

use std::sync::Arc;

use hkflow::covering::{covering_build_cone, covering_build_cylinder, covering_verify};
use hkflow::domain::{classify_nodes, norm, DomainSpec, NodeClass, ScalarField, Shape};
use hkflow::operator::{flow_translation_check, OperatorParams};
use hkflow::perron::{exhaustion_solve, lift, perron_solve, LiftContext, LiftSchedule};
use hkflow::profile::{
    build_profile, eta, family_build, verify_supersolution, xi, AuxProfile, ProfileCase,
};
use hkflow::solver::{
    compare_fields, gradient_diagnostics, radial_oracle, solve_dirichlet, SolveMode, SolveOptions,
};

fn report(k: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {k} ({name}): {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {k} ({name}) failed: {detail}");
}

fn unit_disk() -> DomainSpec {
    DomainSpec::new(Shape::Ball { center: vec![0.0, 0.0], radius: 1.0 }, 2).unwrap()
}

#[test]
fn criterion_1_inverse_pair_identities() {
    let mut worst_pair: f64 = 0.0;
    let mut worst_xi1: f64 = 0.0;
    for n in [2usize, 3] {
        for i in 0..500 {
            let beta = 10f64.powf(-3.0 + 4.0 * i as f64 / 499.0);
            let err = (xi(eta(beta, n).unwrap(), n).unwrap() - beta).abs();
            worst_pair = worst_pair.max(err);
        }
        let closed = 1.0 / (2.0 * (n as f64 - 1.0));
        worst_xi1 = worst_xi1.max((xi(1.0, n).unwrap() - closed).abs());
    }
    let pass = worst_pair <= 1e-10 && worst_xi1 <= 1e-12;
    report(
        1,
        "inverse pair and integral identities",
        pass,
        &format!("max |xi(eta(beta))-beta| = {worst_pair:.2e}, max |xi(1)-1/(2(n-1))| = {worst_xi1:.2e}"),
    );
}

#[test]
fn criterion_2_profile_identity_sweep() {
    let mut worst: f64 = 0.0;
    let mut combos = 0;
    for n in [2usize, 3] {
        for alpha in [0.5, 1.0, 2.0] {
            for mu in [0.3, 0.5, 0.8] {
                let p = build_profile(n, alpha, mu, 1.0, ProfileCase::Cylinder).unwrap();
                let span = p.tau - p.l;
                for i in 0..100 {
                    let f = 10f64.powf(-6.0 + 5.99 * i as f64 / 99.0);
                    let r = p.l + f * span;
                    let delta = 1e-4 * (r - p.l).min(p.tau - r).min(span / 10.0);
                    let (_, _, hpp) = p.h_eval(r).unwrap();
                    let (rp, rm) = (r + delta, r - delta);
                    let (_, hp_p, _) = p.h_eval(rp).unwrap();
                    let (_, hp_m, _) = p.h_eval(rm).unwrap();
                    let numdiff = (hp_p - hp_m) / (rp - rm);
                    worst = worst.max((hpp - numdiff).abs() / hpp.abs());
                }
                combos += 1;
            }
        }
    }
    let pass = worst <= 1e-6;
    report(
        2,
        "profile curvature identity",
        pass,
        &format!("{combos} profiles x 100 radii, max relative deviation {worst:.2e}"),
    );
}

#[test]
fn criterion_3_claim_certification() {
    let p = build_profile(2, 1.0, 0.5, 1.0, ProfileCase::Cylinder).unwrap();
    let rep = verify_supersolution(&p, 10_000).unwrap();
    let broken = AuxProfile::with_hstar(2, 1.0, 0.5, 1.0, 1.01, ProfileCase::Cylinder).unwrap();
    let neg = verify_supersolution(&broken, 10_000).unwrap();
    let pass = p.hstar == 3.0 && rep.pass && rep.max_residual < 0.0 && neg.max_residual > 0.0;
    report(
        3,
        "slope-floor certification",
        pass,
        &format!(
            "H* = {}, max Qw = {:.4e} (< 0), negative control max Qw = {:.4e} (> 0)",
            p.hstar, rep.max_residual, neg.max_residual
        ),
    );
}

#[test]
fn criterion_4_barrier_certification() {
    let disk = unit_disk();
    let phi = |_: &[f64]| 0.0;
    let mut detail = String::new();
    let mut pass = true;
    for alpha in [0.5, 1.0, 2.0] {
        let params = OperatorParams::new(2, alpha).unwrap();
        let spec = hkflow::barrier::barrier_constants(&disk, &phi, &params, 1.0, 11).unwrap();
        let rep =
            hkflow::barrier::barrier_verify(&spec, &disk, &phi, &params, 10_000, 13).unwrap();
        let mut psi_identity: f64 = 0.0;
        for i in 0..100 {
            let t = spec.d1 * (i as f64 + 0.5) / 100.0;
            let (_, dpsi, ddpsi) = hkflow::barrier::psi_eval(&spec, t).unwrap();
            psi_identity = psi_identity.max((ddpsi + spec.c3 * dpsi * dpsi).abs());
        }
        let (psi_d1, _, _) = hkflow::barrier::psi_eval(&spec, spec.d1).unwrap();
        let ok = rep.pass && psi_identity <= 1e-12 && psi_d1 >= spec.a + spec.m;
        pass &= ok;
        detail += &format!(
            "alpha={alpha}: maxQ={:.3e}, |psi''+c3 psi'^2|={psi_identity:.1e}, psi(d1)-a-m={:.3}; ",
            rep.max_pm_residual,
            psi_d1 - spec.a - spec.m
        );
    }
    report(4, "boundary barrier certification", pass, &detail);
}

fn disk_solve_error(h: f64, oracle: &hkflow::solver::RadialProfile) -> (f64, usize, ScalarField) {
    let grid = Arc::new(classify_nodes(&unit_disk(), h).unwrap());
    let phi = |x: &[f64]| oracle.eval_u(norm(x));
    let params = oracle.params;
    let (u, rep) =
        solve_dirichlet(&grid, &phi, params, SolveMode::Translator, &SolveOptions::default())
            .unwrap();
    let err = grid
        .nodes
        .iter()
        .zip(&u.values)
        .map(|(node, v)| (v - oracle.eval_u(norm(&node.pos))).abs())
        .fold(0.0f64, f64::max);
    (err, rep.iterations, u)
}

#[test]
fn criterion_5_solver_order_of_accuracy() {
    let params = OperatorParams::new(2, 1.0).unwrap();
    let oracle = radial_oracle(params, 0.0, 1.2, 1e-4);
    let mut errs = Vec::new();
    let mut iters = Vec::new();
    for h in [2.0 / 32.0, 2.0 / 64.0, 2.0 / 128.0] {
        let (e, it, _) = disk_solve_error(h, &oracle);
        errs.push(e);
        iters.push(it);
    }
    let r1 = errs[0] / errs[1];
    let r2 = errs[1] / errs[2];
    let pass = (3.0..=5.0).contains(&r1)
        && (3.0..=5.0).contains(&r2)
        && iters.iter().all(|&i| i <= 30);
    report(
        5,
        "solver order of accuracy",
        pass,
        &format!(
            "errors {:.3e} / {:.3e} / {:.3e}, ratios {r1:.2}, {r2:.2}, Newton steps {iters:?}",
            errs[0], errs[1], errs[2]
        ),
    );
}

#[test]
fn criterion_6_translating_profile_check() {
    let params = OperatorParams::new(2, 1.0).unwrap();
    let oracle = radial_oracle(params, 0.0, 1.2, 1e-4);
    let mut devs = Vec::new();
    let mut bounds = Vec::new();
    for h in [2.0 / 64.0, 2.0 / 128.0] {
        let (_, _, u) = disk_solve_error(h, &oracle);
        let phi = |x: &[f64]| oracle.eval_u(norm(x));
        let diag = gradient_diagnostics(&u, Some(&phi));
        let dev = flow_translation_check(&u, &params).unwrap();
        devs.push(dev);
        bounds.push(5.0 * (h * h + h * diag.boundary_gradient_estimate));
    }
    let pass = devs[0] <= bounds[0] && devs[1] <= bounds[1] && devs[1] < devs[0];
    report(
        6,
        "translating-profile check",
        pass,
        &format!(
            "deviations {:.3e} (bound {:.3e}) -> {:.3e} (bound {:.3e}), decreasing",
            devs[0], bounds[0], devs[1], bounds[1]
        ),
    );
}

#[test]
fn criterion_7_structural_invariants() {
    let params = OperatorParams::new(2, 1.0).unwrap();
    let grid = Arc::new(classify_nodes(&unit_disk(), 1.0 / 16.0).unwrap());
    let opts = SolveOptions::default();
    let oracle = radial_oracle(params, 0.0, 1.2, 1e-3);

    // Shift equivariance to 1e-10.
    let phi1 = |x: &[f64]| oracle.eval_u(norm(x));
    let phi2 = |x: &[f64]| oracle.eval_u(norm(x)) + 0.7;
    let (u1, _) = solve_dirichlet(&grid, &phi1, params, SolveMode::Translator, &opts).unwrap();
    let (u2, _) = solve_dirichlet(&grid, &phi2, params, SolveMode::Translator, &opts).unwrap();
    let shift_err = u1
        .values
        .iter()
        .zip(&u2.values)
        .map(|(a, b)| (b - a - 0.7).abs())
        .fold(0.0f64, f64::max);
    let shift_ok = shift_err <= 1e-10;

    // Discrete comparison on 20 random ordered boundary pairs to 1e-8.
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let mut comparison_ok = true;
    let mut worst_violation: f64 = f64::NEG_INFINITY;
    for _ in 0..20 {
        let (a1, b1, c1): (f64, f64, f64) = (
            rng.gen_range(-0.3..0.3),
            rng.gen_range(-0.3..0.3),
            rng.gen_range(0.5..3.0),
        );
        let (gap0, gap1): (f64, f64) = (rng.gen_range(0.0..0.2), rng.gen_range(0.0..0.2));
        let lo = move |x: &[f64]| a1 * x[0] + b1 * (c1 * x[1]).sin();
        let hi = move |x: &[f64]| lo(x) + gap0 + gap1 * (1.0 + (2.0 * x[0]).cos());
        let (ul, _) = solve_dirichlet(&grid, &lo, params, SolveMode::Translator, &opts).unwrap();
        let (uh, _) = solve_dirichlet(&grid, &hi, params, SolveMode::Translator, &opts).unwrap();
        let cmp = compare_fields(&ul, &uh).unwrap();
        worst_violation = worst_violation.max(cmp.max_violation);
        comparison_ok &= cmp.leq;
    }

    // Lift idempotence and monotonicity to 2x solver tolerance.
    let phi = |x: &[f64]| oracle.eval_u(norm(x));
    let ctx = LiftContext::build(&grid, &phi, params, opts.clone()).unwrap();
    let o = DomainSpec::new(Shape::Ball { center: vec![0.2, -0.1], radius: 0.5 }, 2).unwrap();
    let v0 = ctx.minimal_solution().unwrap();
    let l1 = lift(&ctx, &v0, &o).unwrap();
    let l2 = lift(&ctx, &l1, &o).unwrap();
    let idem = l1
        .values
        .iter()
        .zip(&l2.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let mut v_hi = v0.clone();
    for (i, w) in v_hi.values.iter_mut().enumerate() {
        if grid.nodes[i].class == NodeClass::Interior {
            *w += 0.05;
        }
    }
    let m1 = lift(&ctx, &v0, &o).unwrap();
    let m2 = lift(&ctx, &v_hi, &o).unwrap();
    let mono_violation = m1
        .values
        .iter()
        .zip(&m2.values)
        .map(|(a, b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max);
    let lift_ok = idem <= 2.0 * opts.tolerance && mono_violation <= 2.0 * opts.tolerance;

    let pass = shift_ok && comparison_ok && lift_ok;
    report(
        7,
        "structural invariants",
        pass,
        &format!(
            "shift error {shift_err:.2e}, comparison worst violation {worst_violation:.2e}, \
             lift idempotence {idem:.2e}, lift monotonicity violation {mono_violation:.2e}"
        ),
    );
}

#[test]
fn criterion_8_covering_certification() {
    let cyl = covering_build_cylinder(0.0, 1.0, std::f64::consts::LN_2, Some(0.9), 10).unwrap();
    let rc = covering_verify(&cyl, 2, 100_000, 71);
    let cone = covering_build_cone(
        1.0,
        std::f64::consts::FRAC_PI_6,
        1.8f64.ln(),
        Some(5f64.sqrt()),
        8,
    )
    .unwrap();
    let rk = covering_verify(&cone, 2, 100_000, 72);
    let bad = covering_build_cone(1.0, std::f64::consts::FRAC_PI_6, 1.8f64.ln(), Some(6.0), 8)
        .unwrap();
    let rb = covering_verify(&bad, 2, 100_000, 73);
    let pass = rc.pass && rk.pass && rb.handoff_violations > 0;
    report(
        8,
        "covering certification",
        pass,
        &format!(
            "cylinder {} samples 0 violations: {}; cone {} samples 0 violations: {}; \
             delta0=6 violations: {}",
            rc.union_samples + rc.handoff_samples,
            rc.pass,
            rk.union_samples + rk.handoff_samples,
            rk.pass,
            rb.handoff_violations
        ),
    );
}

#[test]
fn criterion_9_perron_and_exhaustion() {
    // Perron vs direct solve on the disk.
    let params = OperatorParams::new(2, 1.0).unwrap();
    let disk = unit_disk();
    let grid = Arc::new(classify_nodes(&disk, 1.0 / 16.0).unwrap());
    let oracle = radial_oracle(params, 0.0, 1.2, 1e-3);
    let phi = |x: &[f64]| oracle.eval_u(norm(x));
    let opts = SolveOptions::default();
    let ctx = LiftContext::build(&grid, &phi, params, opts.clone()).unwrap();
    let schedule = LiftSchedule::overlapping_balls(&disk, 2, 60).unwrap();
    let tol = 1e-9;
    let (v, prep) = perron_solve(&ctx, &schedule, tol).unwrap();
    let (direct, _) = solve_dirichlet(&grid, &phi, params, SolveMode::Translator, &opts).unwrap();
    let delta = v
        .values
        .iter()
        .zip(&direct.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let perron_ok = delta <= 10.0 * tol && prep.min_increment >= -1e-8;

    // Exhaustion of the rounded strip inside the unit cylinder.
    let strip = DomainSpec::new(Shape::RoundedStrip { rho: 0.8, cap: 0.9 }, 2).unwrap();
    let prof = build_profile(2, 1.0, 0.5, 1.0, ProfileCase::Cylinder).unwrap();
    let cuts = [4.0, 8.0, 16.0];
    let step = 0.9 * (prof.d.exp() - 1.0);
    let members = (((16.0 + 0.8 + prof.tau + 0.5) / step).ceil() as usize) + 2;
    let cov = covering_build_cylinder(0.0, 1.0, prof.d, Some(0.9), members).unwrap();
    let family = family_build(&cov, &|_t| 0.0, 2, 1.0, 0.5).unwrap();
    let zero = |_x: &[f64]| 0.0;
    let exh_opts = SolveOptions { max_steps: 400, ..SolveOptions::default() };
    let result =
        exhaustion_solve(&strip, &zero, params, &cuts, &family, 0.125, 2.0, &exh_opts).unwrap();
    let gaps = result.gaps();
    let gaps_ok = gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12) && gaps[2] < 1e-3;
    let order_ok = result.steps.iter().all(|s| s.ordering_ok);
    let caps_ok = result.steps.iter().all(|s| s.caps_ok);

    let pass = perron_ok && gaps_ok && order_ok && caps_ok;
    report(
        9,
        "perron iteration and exhaustion",
        pass,
        &format!(
            "perron delta {delta:.2e} (tol x10 = {:.0e}), min increment {:.1e}; \
             gaps {:.3e} / {:.3e} / {:.3e}, ordering {order_ok}, caps {caps_ok}",
            10.0 * tol,
            prep.min_increment,
            gaps[0],
            gaps[1],
            gaps[2]
        ),
    );
}
