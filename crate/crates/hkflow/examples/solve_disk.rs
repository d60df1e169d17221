//! Solve the translator Dirichlet problem on the unit disk against the
//! radial oracle and report the discretization error and gradient
//! diagnostics.
//!
//! Run with `cargo run --example solve_disk`.

use std::sync::Arc;

use hkflow::domain::{classify_nodes, norm, DomainSpec, Shape};
use hkflow::operator::{flow_translation_check, OperatorParams};
use hkflow::solver::{
    gradient_diagnostics, radial_oracle, solve_dirichlet, SolveMode, SolveOptions,
};

fn main() {
    let params = OperatorParams::new(2, 1.0).unwrap();
    let disk = DomainSpec::new(Shape::Ball { center: vec![0.0, 0.0], radius: 1.0 }, 2).unwrap();
    let oracle = radial_oracle(params, 0.0, 1.2, 1e-4);
    let phi = |x: &[f64]| oracle.eval_u(norm(x));

    println!("{:>8} {:>8} {:>12} {:>8} {:>12}", "h", "nodes", "max error", "steps", "flow dev");
    let mut prev_err = None;
    for h in [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0] {
        let grid = Arc::new(classify_nodes(&disk, h).unwrap());
        let (u, report) =
            solve_dirichlet(&grid, &phi, params, SolveMode::Translator, &SolveOptions::default())
                .unwrap();
        let err = grid
            .nodes
            .iter()
            .zip(&u.values)
            .map(|(node, v)| (v - oracle.eval_u(norm(&node.pos))).abs())
            .fold(0.0f64, f64::max);
        let dev = flow_translation_check(&u, &params).unwrap();
        print!(
            "{h:8.4} {:8} {err:12.3e} {:8} {dev:12.3e}",
            grid.len(),
            report.iterations
        );
        if let Some(p) = prev_err {
            print!("   (ratio {:.2})", p / err);
        }
        println!();
        prev_err = Some(err);

        if h == 1.0 / 32.0 {
            let diag = gradient_diagnostics(&u, Some(&phi));
            println!("\ngradient diagnostics at h = {h}:");
            println!("  interior max |Du|      = {:.6}", diag.max_interior_gradient);
            println!("  boundary estimate      = {:.6}", diag.boundary_gradient_estimate);
            println!("  max principle holds    = {}", diag.max_principle_ok);
            println!("  compact-subset max     = {:.6}", diag.compact_gradient_max);
        }
    }
}
