//! Approximate the translator Dirichlet problem on an unbounded rounded
//! strip by an exhaustion of capped truncations: each cut is solved twice,
//! with subsolution and supersolution data on the artificial cap, and the
//! bracketing gap on a fixed compact set certifies the approximation.
//!
//! Run with `cargo run --example exhaustion_strip`.

use hkflow::covering::covering_build_cylinder;
use hkflow::domain::{DomainSpec, Shape};
use hkflow::operator::OperatorParams;
use hkflow::perron::exhaustion_solve;
use hkflow::profile::{build_profile, family_build, ProfileCase};
use hkflow::solver::SolveOptions;

fn main() {
    let params = OperatorParams::new(2, 1.0).unwrap();
    // Rounded strip of half-width 0.8 inside the unit cylinder x1 > 0.
    let strip = DomainSpec::new(Shape::RoundedStrip { rho: 0.8, cap: 0.9 }, 2).unwrap();
    let phi = |_x: &[f64]| 0.0;

    // Supersolution caps over a cylinder covering sharing the profile's
    // shell thickness.
    let prof = build_profile(2, 1.0, 0.5, 1.0, ProfileCase::Cylinder).unwrap();
    println!(
        "profile: H* = {}, d = {:.5}, shell ({}, {:.5})",
        prof.hstar, prof.d, prof.l, prof.tau
    );
    let cuts = [4.0, 8.0, 16.0];
    let step = 0.9 * (prof.d.exp() - 1.0);
    let members = (((cuts[2] + 0.8 + prof.tau + 0.5) / step).ceil() as usize) + 2;
    let covering = covering_build_cylinder(0.0, 1.0, prof.d, Some(0.9), members).unwrap();
    let family = family_build(&covering, &|_t| 0.0, 2, 1.0, 0.5).unwrap();
    println!("covering: {members} members, step {step:.4}");

    let opts = SolveOptions { max_steps: 400, ..Default::default() };
    let result =
        exhaustion_solve(&strip, &phi, params, &cuts, &family, 0.125, 2.0, &opts).unwrap();

    println!("\n{:>6} {:>12} {:>9} {:>6} {:>14}", "cut", "gap(x1<=2)", "ordering", "caps", "iters sub/sup");
    for s in &result.steps {
        println!(
            "{:>6} {:>12.4e} {:>9} {:>6} {:>8}/{}",
            s.r_cut, s.gap, s.ordering_ok, s.caps_ok, s.sub_iterations, s.sup_iterations
        );
    }
    println!("\nthe gap sequence certifies the bracketing on the compact set;");
    println!("the pair (u_sub, u_sup) for the deepest cut is the delivered approximation.");
}
