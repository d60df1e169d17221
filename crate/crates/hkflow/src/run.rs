//! Configuration-driven task runner.
//!
//! Reads a config file, executes one task, and writes CSV fields, JSON
//! reports and a run manifest into the output directory. Exit status:
//! 0 on success, 2 when a verification task ran correctly but the checked
//! property failed, 1 on operational errors (the binary maps `Err` to 1).

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde_json::json;
use sha2::{Digest, Sha256};

use crate::barrier;
use crate::config::{self, RunConfig, Task};
use crate::covering;
use crate::domain::{classify_nodes, DomainSpec, Shape};
use crate::operator::OperatorParams;
use crate::perron;
use crate::profile::{self, ProfileCase};
use crate::solver::{self, SolveMode, SolveOptions};
use crate::{Error, Result};

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub out_dir: PathBuf,
    /// (file name, sha256 hex) for every artifact written.
    pub artifacts: Vec<(String, String)>,
}

struct Artifacts {
    dir: PathBuf,
    list: Vec<(String, String)>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf(), list: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        self.list.push((name.to_string(), format!("{:x}", hasher.finalize())));
        Ok(())
    }

    fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)
            .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }
}

/// Run the task described by the config file.
pub fn run_file(
    config_path: &Path,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
    verbose: bool,
) -> Result<RunOutcome> {
    let text = fs::read_to_string(config_path)?;
    run_str(&text, out_override, seed_override, verbose)
}

/// Run the task described by config text.
pub fn run_str(
    text: &str,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
    verbose: bool,
) -> Result<RunOutcome> {
    let started = Instant::now();
    let raw = config::parse_raw(text)?;
    let mut cfg = config::extract(&raw)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    let out_dir: PathBuf = match out_override {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(cfg.out.clone().unwrap_or_else(|| "out".into())),
    };
    let mut art = Artifacts::new(&out_dir)?;

    let exit_code = match cfg.task {
        Task::Solve => task_solve(&cfg, &mut art, verbose)?,
        Task::Radial => task_radial(&cfg, &mut art)?,
        Task::VerifyClaim => task_verify_claim(&cfg, &mut art)?,
        Task::VerifyBarrier => task_verify_barrier(&cfg, &mut art)?,
        Task::VerifyCovering => task_verify_covering(&cfg, &mut art)?,
        Task::Perron => task_perron(&cfg, &mut art, verbose)?,
        Task::Exhaustion => task_exhaustion(&cfg, &mut art, verbose)?,
        Task::Sweep => task_sweep(&cfg, &mut art)?,
    };

    let manifest = json!({
        "task": format!("{:?}", cfg.task),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "wall_time_s": started.elapsed().as_secs_f64(),
        "config": text,
        "artifacts": art.list.iter().map(|(n, h)| json!({"path": n, "sha256": h})).collect::<Vec<_>>(),
    });
    let mut s = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Config(format!("manifest serialization failed: {e}")))?;
    s.push('\n');
    fs::write(out_dir.join("manifest.json"), s)?;

    Ok(RunOutcome { exit_code, out_dir, artifacts: art.list })
}

fn bounded_domain(cfg: &RunConfig) -> Result<DomainSpec> {
    let d = cfg
        .domain
        .clone()
        .ok_or_else(|| Error::Config("[domain] section required for this task".into()))?;
    if !d.is_bounded() {
        return Err(Error::UnboundedDomain);
    }
    Ok(d)
}

/// Validate phi on every cut point of the grid, then return an infallible
/// closure for the solver (NaN on later surprises, which the solver
/// rejects as non-finite).
fn phi_closure<'a>(
    cfg: &'a RunConfig,
    grid: &crate::domain::Grid,
) -> Result<impl Fn(&[f64]) -> f64 + 'a> {
    for (i, node) in grid.nodes.iter().enumerate() {
        for axis in 0..grid.dim {
            for side in 0..2 {
                if node.nbr[axis][side].is_none() {
                    let p = grid.cut_point(i, axis, side);
                    cfg.phi.eval(&p)?;
                }
            }
        }
    }
    Ok(move |x: &[f64]| cfg.phi.eval(x).unwrap_or(f64::NAN))
}

fn solve_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions {
        tolerance: cfg.tolerance,
        max_steps: cfg.max_steps,
        continuation: true,
        seed: cfg.seed,
    }
}

fn task_solve(cfg: &RunConfig, art: &mut Artifacts, verbose: bool) -> Result<i32> {
    let domain = bounded_domain(cfg)?;
    let params = OperatorParams::new(cfg.n, cfg.alpha)?;
    let grid = Arc::new(classify_nodes(&domain, cfg.h)?);
    let phi = phi_closure(cfg, &grid)?;
    let mode = match cfg.solve_mode.as_str() {
        "translator" => SolveMode::Translator,
        "minimal" => SolveMode::Minimal,
        other => return Err(Error::Config(format!("[solve] mode: unknown mode '{other}'"))),
    };
    let opts = solve_options(cfg);
    let (u, report) = solver::solve_dirichlet(&grid, &phi, params, mode, &opts)?;
    let diag = solver::gradient_diagnostics(&u, Some(&phi));
    if verbose {
        eprintln!(
            "solve: {} nodes, {} Newton steps, residual {:.3e}",
            grid.len(),
            report.iterations,
            report.residual_history.last().copied().unwrap_or(0.0)
        );
    }

    let mut grid_csv = Vec::new();
    grid.write_csv(&mut grid_csv)?;
    art.write("grid.csv", &grid_csv)?;
    let mut field_csv = Vec::new();
    u.write_csv(&mut field_csv)?;
    art.write("field.csv", &field_csv)?;
    art.write_json(
        "solve_report.json",
        &json!({
            "params": params,
            "mode": mode,
            "h": cfg.h,
            "nodes": grid.len(),
            "report": report,
            "gradient": diag,
        }),
    )?;
    Ok(0)
}

fn task_radial(cfg: &RunConfig, art: &mut Artifacts) -> Result<i32> {
    let params = OperatorParams::new(cfg.n, cfg.alpha)?;
    let prof = solver::radial_oracle(params, cfg.radial_u0, cfg.radial_rmax, cfg.radial_step);
    let halved = solver::radial_oracle(params, cfg.radial_u0, cfg.radial_rmax, cfg.radial_step / 2.0);
    let quartered =
        solver::radial_oracle(params, cfg.radial_u0, cfg.radial_rmax, cfg.radial_step / 4.0);
    let e1 = (prof.u.last().unwrap() - quartered.u.last().unwrap()).abs();
    let e2 = (halved.u.last().unwrap() - quartered.u.last().unwrap()).abs();
    let order = if e2 > 0.0 { (e1 / e2).log2() } else { f64::INFINITY };

    let mut csv = Vec::new();
    prof.write_csv(&mut csv)?;
    art.write("radial.csv", &csv)?;
    art.write_json(
        "radial_report.json",
        &json!({
            "params": params,
            "u0": cfg.radial_u0,
            "rmax": cfg.radial_rmax,
            "step": cfg.radial_step,
            "u_end": prof.u.last(),
            "du_end": prof.du.last(),
            "self_convergence_order": order,
        }),
    )?;
    Ok(0)
}

fn task_verify_claim(cfg: &RunConfig, art: &mut Artifacts) -> Result<i32> {
    let prof = profile::build_profile(cfg.n, cfg.alpha, cfg.claim_mu, cfg.claim_l, cfg.claim_case)?;
    let report = profile::verify_supersolution(&prof, cfg.claim_samples)?;
    art.write_json("claim_report.json", &report)?;
    Ok(if report.pass { 0 } else { 2 })
}

fn task_verify_barrier(cfg: &RunConfig, art: &mut Artifacts) -> Result<i32> {
    let domain = bounded_domain(cfg)?;
    let params = OperatorParams::new(cfg.n, cfg.alpha)?;
    let phi = |x: &[f64]| cfg.phi.eval(x).unwrap_or(f64::NAN);
    let spec = barrier::barrier_constants(&domain, &phi, &params, cfg.barrier_m, cfg.seed)?;
    let report = barrier::barrier_verify(&spec, &domain, &phi, &params, cfg.barrier_samples, cfg.seed ^ 0xb0)?;
    // psi identities on a distance grid.
    let mut psi_identity_max: f64 = 0.0;
    for i in 0..100 {
        let t = spec.d1 * (i as f64 + 0.5) / 100.0;
        let (_, dpsi, ddpsi) = barrier::psi_eval(&spec, t)?;
        psi_identity_max = psi_identity_max.max((ddpsi + spec.c3 * dpsi * dpsi).abs());
    }
    art.write_json(
        "barrier_report.json",
        &json!({
            "constants": spec,
            "report": report,
            "psi_identity_max": psi_identity_max,
            "gradient_bound": barrier::gradient_bound(&spec),
        }),
    )?;
    Ok(if report.pass { 0 } else { 2 })
}

fn task_verify_covering(cfg: &RunConfig, art: &mut Artifacts) -> Result<i32> {
    let seq = match cfg.cov_case.as_str() {
        "cylinder" => covering::covering_build_cylinder(
            cfg.cov_n_inlet,
            cfg.cov_m,
            cfg.cov_d,
            cfg.cov_eps,
            cfg.cov_members,
        )?,
        "cone" => covering::covering_build_cone(
            cfg.cov_b1,
            cfg.cov_theta,
            cfg.cov_d,
            cfg.cov_delta0,
            cfg.cov_members,
        )?,
        other => return Err(Error::Config(format!("[covering] case: unknown case '{other}'"))),
    };
    let report = covering::covering_verify(&seq, cfg.n, cfg.cov_samples, cfg.seed);
    let mut csv = Vec::new();
    seq.write_csv(&mut csv)?;
    art.write("covering.csv", &csv)?;
    art.write_json(
        "covering_report.json",
        &json!({ "covering": seq, "report": report }),
    )?;
    Ok(if report.pass { 0 } else { 2 })
}

fn task_perron(cfg: &RunConfig, art: &mut Artifacts, verbose: bool) -> Result<i32> {
    let domain = bounded_domain(cfg)?;
    let params = OperatorParams::new(cfg.n, cfg.alpha)?;
    let grid = Arc::new(classify_nodes(&domain, cfg.h)?);
    let phi = phi_closure(cfg, &grid)?;
    let opts = solve_options(cfg);
    let ctx = perron::LiftContext::build(&grid, &phi, params, opts.clone())?;
    let schedule =
        perron::LiftSchedule::overlapping_balls(&domain, cfg.perron_per_axis, cfg.perron_sweeps)?;
    let (v, report) = perron::perron_solve(&ctx, &schedule, cfg.perron_tol)?;
    let (direct, _) = solver::solve_dirichlet(&grid, &phi, params, SolveMode::Translator, &opts)?;
    let direct_delta = v
        .values
        .iter()
        .zip(&direct.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    if verbose {
        eprintln!(
            "perron: {} sweeps, direct delta {direct_delta:.3e}",
            report.sweeps
        );
    }
    let mut csv = Vec::new();
    v.write_csv(&mut csv)?;
    art.write("perron_field.csv", &csv)?;
    art.write_json(
        "perron_report.json",
        &json!({
            "report": report,
            "subdomains": schedule.subdomains.len(),
            "direct_delta": direct_delta,
        }),
    )?;
    Ok(0)
}

fn task_exhaustion(cfg: &RunConfig, art: &mut Artifacts, verbose: bool) -> Result<i32> {
    let base = cfg
        .domain
        .clone()
        .ok_or_else(|| Error::Config("[domain] section required for exhaustion".into()))?;
    if base.is_bounded() {
        return Err(Error::Config(
            "[domain]: exhaustion needs an unbounded shape (no x1_max)".into(),
        ));
    }
    let params = OperatorParams::new(cfg.n, cfg.alpha)?;
    let phi = |x: &[f64]| cfg.phi.eval(x).unwrap_or(f64::NAN);
    let r_last = *cfg
        .exh_cuts
        .last()
        .ok_or_else(|| Error::Config("[exhaustion] cuts: at least one cut required".into()))?;

    // Container, profile, covering and caps.
    let (family, prof_summary) = match base.shape {
        Shape::Cone { theta } => {
            let b1 = cfg.cov_b1;
            let prof = profile::build_profile(
                cfg.n,
                cfg.alpha,
                cfg.exh_mu,
                b1 * theta.sin(),
                ProfileCase::Cone { theta },
            )?;
            let bound = covering::cone_delta0_bound(theta, prof.d)?;
            let delta0 = bound.sqrt();
            let s = theta.sin();
            let reach = r_last * (1.0 + theta.tan()) + 1.0;
            let members =
                ((reach / (b1 * (1.0 - s * prof.d.exp()))).ln() / delta0.ln()).ceil() as usize + 2;
            let cov = covering::covering_build_cone(b1, theta, prof.d, Some(delta0), members)?;
            let phi_sup = boundary_sup_fn(&base, &cfg.phi, cfg.seed);
            (
                profile::family_build(&cov, &phi_sup, cfg.n, cfg.alpha, cfg.exh_mu)?,
                json!({"hstar": prof.hstar, "d": prof.d, "members": members}),
            )
        }
        _ => {
            let m = cfg.exh_container_m;
            let n_inlet = cfg.exh_container_inlet;
            let prof =
                profile::build_profile(cfg.n, cfg.alpha, cfg.exh_mu, m, ProfileCase::Cylinder)?;
            let step = 0.9 * m * (prof.d.exp() - 1.0);
            let members =
                (((r_last + m + m * prof.d.exp() + 1.0 - n_inlet) / step).ceil() as usize) + 2;
            let cov = covering::covering_build_cylinder(n_inlet, m, prof.d, Some(0.9), members)?;
            let phi_sup = boundary_sup_fn(&base, &cfg.phi, cfg.seed);
            (
                profile::family_build(&cov, &phi_sup, cfg.n, cfg.alpha, cfg.exh_mu)?,
                json!({"hstar": prof.hstar, "d": prof.d, "members": members}),
            )
        }
    };

    let opts = SolveOptions { max_steps: cfg.max_steps.max(400), ..solve_options(cfg) };
    let result = perron::exhaustion_solve(
        &base,
        &phi,
        params,
        &cfg.exh_cuts,
        &family,
        cfg.h,
        cfg.exh_compact_x1,
        &opts,
    )?;

    for (j, (sub, sup)) in result.fields.iter().enumerate() {
        let mut csv = Vec::new();
        sub.write_csv(&mut csv)?;
        art.write(&format!("u_sub_{j}.csv"), &csv)?;
        let mut csv = Vec::new();
        sup.write_csv(&mut csv)?;
        art.write(&format!("u_sup_{j}.csv"), &csv)?;
    }
    if verbose {
        for s in &result.steps {
            eprintln!("cut {}: gap {:.3e}", s.r_cut, s.gap);
        }
    }
    let ok = result.steps.iter().all(|s| s.ordering_ok && s.caps_ok);
    art.write_json(
        "exhaustion_report.json",
        &json!({
            "profile": prof_summary,
            "compact_x1": cfg.exh_compact_x1,
            "steps": result.steps,
        }),
    )?;
    Ok(if ok { 0 } else { 2 })
}

fn task_sweep(cfg: &RunConfig, art: &mut Artifacts) -> Result<i32> {
    let mut reports = Vec::new();
    let mut all_pass = true;
    for &n in &cfg.sweep_n {
        for &alpha in &cfg.sweep_alpha {
            for &mu in &cfg.sweep_mu {
                let prof = profile::build_profile(n, alpha, mu, cfg.claim_l, cfg.claim_case)?;
                let rep = profile::verify_supersolution(&prof, cfg.claim_samples)?;
                all_pass &= rep.pass;
                reports.push(rep);
            }
        }
    }
    art.write_json("sweep_report.json", &reports)?;
    Ok(if all_pass { 0 } else { 2 })
}

/// `t -> sup { |phi(x)| : x on the boundary of `base`, x1 <= t }` by dense
/// sampling of the boundary up to the cap coordinate.
fn boundary_sup_fn<'a>(
    base: &'a DomainSpec,
    phi: &'a crate::expr::Expr,
    seed: u64,
) -> impl Fn(f64) -> f64 + 'a {
    move |t: f64| {
        base.sample_boundary(2000, t, seed ^ 0x5b)
            .iter()
            .map(|x| phi.eval(x).unwrap_or(f64::NAN).abs())
            .fold(0.0f64, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("hkflow-run-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn radial_task_is_deterministic() {
        let text = "\
[run]
task = radial
seed = 42
[params]
n = 2
alpha = 1
[radial]
rmax = 2.0
step = 0.01
";
        let d1 = tmpdir("radial-a");
        let d2 = tmpdir("radial-b");
        let o1 = run_str(text, Some(&d1), None, false).unwrap();
        let o2 = run_str(text, Some(&d2), None, false).unwrap();
        assert_eq!(o1.exit_code, 0);
        // Bit-identical artifacts, manifest aside (it carries wall time).
        assert_eq!(o1.artifacts, o2.artifacts);
        let csv1 = fs::read(d1.join("radial.csv")).unwrap();
        let csv2 = fs::read(d2.join("radial.csv")).unwrap();
        assert_eq!(csv1, csv2);
        let _ = fs::remove_dir_all(&d1);
        let _ = fs::remove_dir_all(&d2);
    }

    #[test]
    fn verify_claim_task_reports_reference_values() {
        let text = "\
[run]
task = verify_claim
[params]
n = 2
alpha = 1
[claim]
mu = 0.5
L = 1.0
samples = 2000
";
        let dir = tmpdir("claim");
        let out = run_str(text, Some(&dir), None, false).unwrap();
        assert_eq!(out.exit_code, 0);
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join("claim_report.json")).unwrap())
                .unwrap();
        assert_eq!(report["hstar"], 3.0);
        assert_eq!(report["pass"], true);
        assert!(report["max_residual"].as_f64().unwrap() < 0.0);
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn malformed_phi_is_a_parse_error() {
        let text = "[run]\ntask = solve\n[boundary]\nphi = x1 +\n";
        match run_str(text, Some(&tmpdir("bad-phi")), None, false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn covering_negative_control_exits_2() {
        let text = "\
[run]
task = verify_covering
[params]
n = 2
[covering]
case = cone
b1 = 1.0
theta = 0.5235987755982988
d = 0.5877866649021191
delta0 = 6.0
k = 8
samples = 20000
";
        let dir = tmpdir("cov-neg");
        let out = run_str(text, Some(&dir), None, false).unwrap();
        assert_eq!(out.exit_code, 2);
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn manifest_lists_every_artifact_with_hashes() {
        let text = "\
[run]
task = verify_covering
[params]
n = 2
[covering]
case = cylinder
m = 1.0
d = 0.6931471805599453
eps = 0.9
k = 10
samples = 10000
";
        let dir = tmpdir("manifest");
        let out = run_str(text, Some(&dir), None, false).unwrap();
        assert_eq!(out.exit_code, 0);
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
        let listed = manifest["artifacts"].as_array().unwrap();
        assert_eq!(listed.len(), out.artifacts.len());
        for ((name, sha), entry) in out.artifacts.iter().zip(listed) {
            assert_eq!(entry["path"], name.as_str());
            assert_eq!(entry["sha256"], sha.as_str());
            // Hash matches the file on disk.
            let bytes = fs::read(dir.join(name)).unwrap();
            let mut hasher = Sha256::new();
            hasher.update(&bytes);
            assert_eq!(format!("{:x}", hasher.finalize()), *sha);
        }
        let _ = fs::remove_dir_all(&dir);
    }
}
