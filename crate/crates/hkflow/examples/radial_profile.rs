//! Integrate the radially symmetric translating profile and check the
//! integrator against itself.
//!
//! Run with `cargo run --example radial_profile`.

use hkflow::operator::OperatorParams;
use hkflow::solver::radial_oracle;

fn main() {
    let params = OperatorParams::new(2, 1.0).unwrap();
    let profile = radial_oracle(params, 0.0, 4.0, 1e-3);

    println!("radial profile, n = 2, alpha = 1 (curve-shortening translator):");
    println!("{:>6} {:>12} {:>12}", "r", "u", "u'");
    for k in (0..profile.r.len()).step_by(profile.r.len() / 10) {
        println!(
            "{:6.2} {:12.6} {:12.6}",
            profile.r[k], profile.u[k], profile.du[k]
        );
    }

    // The removable singularity at the origin: u''(0) = -1/n.
    let r = 1e-3;
    let fitted = 2.0 * (profile.eval_u(r) - profile.u[0]) / (r * r);
    println!("\nfitted u''(0) = {fitted:.8} (expected {})", -0.5);

    // Self-convergence under step halving.
    let coarse = radial_oracle(params, 0.0, 4.0, 4e-2);
    let mid = radial_oracle(params, 0.0, 4.0, 2e-2);
    let fine = radial_oracle(params, 0.0, 4.0, 1e-2);
    let e1 = (coarse.u.last().unwrap() - fine.u.last().unwrap()).abs();
    let e2 = (mid.u.last().unwrap() - fine.u.last().unwrap()).abs();
    println!(
        "self-convergence: |u_4h - u_h| = {e1:.3e}, |u_2h - u_h| = {e2:.3e}, order ~ {:.2}",
        (e1 / e2).log2()
    );
}
