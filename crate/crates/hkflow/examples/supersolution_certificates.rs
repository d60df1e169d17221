//! Build decaying radial profiles over a parameter sweep and certify
//! numerically that each one is a supersolution on its shell, including a
//! deliberately broken profile as a negative control.
//!
//! Run with `cargo run --example supersolution_certificates`.

use hkflow::profile::{build_profile, verify_supersolution, AuxProfile, ProfileCase};

fn main() {
    println!(
        "{:>3} {:>6} {:>5} {:>6} {:>10} {:>14} {:>6}",
        "n", "alpha", "mu", "H*", "shell d", "max Qw", "pass"
    );
    for n in [2usize, 3] {
        for alpha in [0.5, 1.0, 2.0] {
            for mu in [0.3, 0.5, 0.8] {
                let p = build_profile(n, alpha, mu, 1.0, ProfileCase::Cylinder).unwrap();
                let rep = verify_supersolution(&p, 10_000).unwrap();
                println!(
                    "{n:>3} {alpha:>6.2} {mu:>5.2} {:>6.0} {:>10.5} {:>14.4e} {:>6}",
                    p.hstar, p.d, rep.max_residual, rep.pass
                );
            }
        }
    }

    // Negative control: a slope floor barely above 1 is not enough.
    let broken = AuxProfile::with_hstar(2, 1.0, 0.5, 1.0, 1.01, ProfileCase::Cylinder).unwrap();
    let rep = verify_supersolution(&broken, 10_000).unwrap();
    println!(
        "\nnegative control H* = 1.01: max Qw = {:.4e} at r = {:.4} -> pass = {}",
        rep.max_residual, rep.argmax_radius, rep.pass
    );
}
