//! Build shell coverings of a cylinder and a cone, verify union coverage
//! and handoff containment by dense sampling, and show that an
//! inadmissible growth factor is caught.
//!
//! Run with `cargo run --example shell_coverings`.

use hkflow::covering::{
    cone_delta0_bound, covering_build_cone, covering_build_cylinder, covering_verify,
};

fn main() {
    // Cylinder of radius 1 with shells of relative thickness e^d = 2.
    let d = std::f64::consts::LN_2;
    let cyl = covering_build_cylinder(0.0, 1.0, d, Some(0.9), 10).unwrap();
    let rep = covering_verify(&cyl, 2, 100_000, 1);
    println!(
        "cylinder covering (M=1, e^d=2, eps=0.9, K=10): union {}/{} bad, handoff {}/{} bad",
        rep.union_violations, rep.union_samples, rep.handoff_violations, rep.handoff_samples
    );

    // Cone of half-angle 30 degrees, e^d = 1.8.
    let theta = std::f64::consts::FRAC_PI_6;
    let d = 1.8f64.ln();
    let bound = cone_delta0_bound(theta, d).unwrap();
    let cone = covering_build_cone(1.0, theta, d, None, 8).unwrap();
    let rep = covering_verify(&cone, 2, 100_000, 2);
    println!(
        "cone covering (theta=pi/6, e^d=1.8, delta0=sqrt({bound:.0})): union {}/{} bad, handoff {}/{} bad",
        rep.union_violations, rep.union_samples, rep.handoff_violations, rep.handoff_samples
    );

    // Negative control: delta0 beyond the admissible interval.
    let bad = covering_build_cone(1.0, theta, d, Some(6.0), 8).unwrap();
    let rep = covering_verify(&bad, 2, 100_000, 3);
    println!(
        "cone covering with delta0 = 6 > {bound:.0}: handoff violations = {} (expected > 0)",
        rep.handoff_violations
    );
}
