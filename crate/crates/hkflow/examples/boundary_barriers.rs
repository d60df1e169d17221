//! Assemble the boundary barriers `phi +- psi(dist)` on the unit disk,
//! verify the barrier inequalities on dense collar samples, and report the
//! implied boundary gradient bound.
//!
//! Run with `cargo run --example boundary_barriers`.

use hkflow::barrier::{barrier_constants, barrier_verify, gradient_bound, psi_eval};
use hkflow::domain::{DomainSpec, Shape};
use hkflow::operator::OperatorParams;

fn main() {
    let disk = DomainSpec::new(Shape::Ball { center: vec![0.0, 0.0], radius: 1.0 }, 2).unwrap();
    let phi = |x: &[f64]| 0.1 * x[0] + 0.05 * (3.0 * x[1]).sin();

    for alpha in [0.5, 1.0, 2.0] {
        let params = OperatorParams::new(2, alpha).unwrap();
        let spec = barrier_constants(&disk, &phi, &params, 1.0, 7).unwrap();
        let report = barrier_verify(&spec, &disk, &phi, &params, 10_000, 8).unwrap();
        let (psi_d1, _, _) = psi_eval(&spec, spec.d1).unwrap();
        println!("alpha = {alpha}:");
        println!(
            "  constants: c1 = {:.4e}, c2 = {:.4e}, c3 = {:.4e}, nu = {}, d1 = {:.4}, k = {:.4}",
            spec.c1, spec.c2, spec.c3, spec.nu, spec.d1, spec.k
        );
        println!(
            "  psi(d1) = {psi_d1:.4} >= a + m = {:.4}; max (+-Q w+-) over {} samples = {:.4e} -> pass = {}",
            spec.a + spec.m,
            report.samples,
            report.max_pm_residual,
            report.pass
        );
        println!("  boundary gradient bound sup|Dphi| + k/c3 = {:.4}\n", gradient_bound(&spec));
    }
}
