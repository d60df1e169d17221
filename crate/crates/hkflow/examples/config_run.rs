//! Drive the config-file runner programmatically: the same pipeline the
//! `hkflow` binary exposes, producing CSV fields, JSON reports and a
//! hashed manifest.
//!
//! Run with `cargo run --example config_run`.

use std::path::Path;

fn main() {
    let config = "\
[run]
task = solve
seed = 7

[params]
n = 2
alpha = 1.0

[domain]
shape = ball
center = 0, 0
radius = 1.0

[grid]
h = 0.125

[boundary]
phi = 0.2 * x1 - 0.1 * x2^2

[solve]
mode = translator
tolerance = 1e-10
max_steps = 50
";
    let out = Path::new("out/config_run_demo");
    let outcome = hkflow::run::run_str(config, Some(out), None, true).unwrap();
    println!("exit code: {}", outcome.exit_code);
    println!("artifacts in {}:", outcome.out_dir.display());
    for (name, sha) in &outcome.artifacts {
        println!("  {name}  sha256 {}", &sha[..16]);
    }
    println!("  manifest.json (hashes the files above)");
}
