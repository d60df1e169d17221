//! Line-oriented `key = value` configuration with `[section]` headers.
//!
//! ```text
//! [run]
//! task = solve
//! seed = 42
//!
//! [params]
//! n = 2
//! alpha = 1.0
//!
//! [domain]
//! shape = ball
//! center = 0, 0
//! radius = 1.0
//!
//! [grid]
//! h = 0.0625
//!
//! [boundary]
//! phi = 0
//! ```
//!
//! Parse errors name the offending line; range violations name the field.

use std::collections::BTreeMap;

use crate::domain::{DomainSpec, Shape};
use crate::expr::{self, Expr};
use crate::profile::ProfileCase;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, (usize, String)>>,
    pub text: String,
}

pub fn parse_raw(text: &str) -> Result<RawConfig> {
    let mut sections: BTreeMap<String, BTreeMap<String, (usize, String)>> = BTreeMap::new();
    let mut current = String::from("");
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or(Error::Parse {
                line,
                msg: "unterminated section header".into(),
            })?;
            current = name.trim().to_string();
            sections.entry(current.clone()).or_default();
            continue;
        }
        let Some(eq) = trimmed.find('=') else {
            return Err(Error::Parse { line, msg: format!("expected 'key = value', got '{trimmed}'") });
        };
        let key = trimmed[..eq].trim().to_string();
        let value = trimmed[eq + 1..].trim().to_string();
        if key.is_empty() {
            return Err(Error::Parse { line, msg: "empty key".into() });
        }
        sections
            .entry(current.clone())
            .or_default()
            .insert(key, (line, value));
    }
    Ok(RawConfig { sections, text: text.to_string() })
}

impl RawConfig {
    fn entry(&self, section: &str, key: &str) -> Option<&(usize, String)> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    pub fn string(&self, section: &str, key: &str) -> Option<String> {
        self.entry(section, key).map(|(_, v)| v.clone())
    }

    pub fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        self.entry(section, key).map(|(l, _)| *l)
    }

    pub fn f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.entry(section, key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Parse { line: *line, msg: format!("[{section}] {key}: expected a number, got '{v}'") }),
        }
    }

    pub fn usize(&self, section: &str, key: &str) -> Result<Option<usize>> {
        match self.entry(section, key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Parse { line: *line, msg: format!("[{section}] {key}: expected an integer, got '{v}'") }),
        }
    }

    pub fn u64(&self, section: &str, key: &str) -> Result<Option<u64>> {
        match self.entry(section, key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Parse { line: *line, msg: format!("[{section}] {key}: expected an integer, got '{v}'") }),
        }
    }

    pub fn f64_list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        match self.entry(section, key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|part| {
                    part.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: *line,
                        msg: format!("[{section}] {key}: expected numbers, got '{part}'"),
                    })
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    pub fn usize_list(&self, section: &str, key: &str) -> Result<Option<Vec<usize>>> {
        match self.entry(section, key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|part| {
                    part.trim().parse::<usize>().map_err(|_| Error::Parse {
                        line: *line,
                        msg: format!("[{section}] {key}: expected integers, got '{part}'"),
                    })
                })
                .collect::<Result<Vec<usize>>>()
                .map(Some),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Solve,
    Radial,
    VerifyClaim,
    VerifyBarrier,
    VerifyCovering,
    Perron,
    Exhaustion,
    Sweep,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub task: Task,
    pub out: Option<String>,
    pub seed: u64,
    pub n: usize,
    pub alpha: f64,
    pub domain: Option<DomainSpec>,
    pub h: f64,
    pub phi_src: String,
    pub phi: Expr,
    pub solve_mode: String,
    pub tolerance: f64,
    pub max_steps: usize,
    pub radial_u0: f64,
    pub radial_rmax: f64,
    pub radial_step: f64,
    pub claim_mu: f64,
    pub claim_l: f64,
    pub claim_case: ProfileCase,
    pub claim_samples: usize,
    pub sweep_n: Vec<usize>,
    pub sweep_alpha: Vec<f64>,
    pub sweep_mu: Vec<f64>,
    pub barrier_m: f64,
    pub barrier_samples: usize,
    pub cov_case: String,
    pub cov_m: f64,
    pub cov_n_inlet: f64,
    pub cov_d: f64,
    pub cov_eps: Option<f64>,
    pub cov_b1: f64,
    pub cov_theta: f64,
    pub cov_delta0: Option<f64>,
    pub cov_members: usize,
    pub cov_samples: usize,
    pub perron_tol: f64,
    pub perron_sweeps: usize,
    pub perron_per_axis: usize,
    pub exh_cuts: Vec<f64>,
    pub exh_mu: f64,
    pub exh_compact_x1: f64,
    pub exh_container_m: f64,
    pub exh_container_inlet: f64,
}

fn field_err(section: &str, key: &str, msg: &str) -> Error {
    Error::Config(format!("[{section}] {key}: {msg}"))
}

fn parse_domain(raw: &RawConfig, dim: usize) -> Result<Option<DomainSpec>> {
    let Some(shape_name) = raw.string("domain", "shape") else {
        return Ok(None);
    };
    let sec = "domain";
    let need = |key: &str| -> Result<f64> {
        raw.f64(sec, key)?
            .ok_or_else(|| field_err(sec, key, "required for this shape"))
    };
    let shape = match shape_name.as_str() {
        "ball" => Shape::Ball {
            center: raw
                .f64_list(sec, "center")?
                .unwrap_or_else(|| vec![0.0; dim]),
            radius: need("radius")?,
        },
        "box" => Shape::Box {
            lo: raw
                .f64_list(sec, "lo")?
                .ok_or_else(|| field_err(sec, "lo", "required for box"))?,
            hi: raw
                .f64_list(sec, "hi")?
                .ok_or_else(|| field_err(sec, "hi", "required for box"))?,
        },
        "annulus" => Shape::Annulus {
            center: raw
                .f64_list(sec, "center")?
                .unwrap_or_else(|| vec![0.0; dim]),
            r_in: need("r_in")?,
            r_out: need("r_out")?,
        },
        "cylinder" => Shape::Cylinder {
            inlet: raw.f64(sec, "inlet")?.unwrap_or(0.0),
            radius: need("m")?,
        },
        "cone" => Shape::Cone { theta: need("theta")? },
        "rounded_strip" => Shape::RoundedStrip {
            rho: need("rho")?,
            cap: raw.f64(sec, "cap")?.unwrap_or(0.0),
        },
        other => return Err(field_err(sec, "shape", &format!("unknown shape '{other}'"))),
    };
    let base = DomainSpec::new(shape, dim)?;
    match raw.f64(sec, "x1_max")? {
        Some(x1_max) => Ok(Some(crate::domain::truncate(&base, 0, &[x1_max])?)),
        None => Ok(Some(base)),
    }
}

pub fn extract(raw: &RawConfig) -> Result<RunConfig> {
    let task = match raw
        .string("run", "task")
        .ok_or_else(|| field_err("run", "task", "required"))?
        .as_str()
    {
        "solve" => Task::Solve,
        "radial" => Task::Radial,
        "verify_claim" => Task::VerifyClaim,
        "verify_barrier" => Task::VerifyBarrier,
        "verify_covering" => Task::VerifyCovering,
        "perron" => Task::Perron,
        "exhaustion" => Task::Exhaustion,
        "sweep" => Task::Sweep,
        other => return Err(field_err("run", "task", &format!("unknown task '{other}'"))),
    };

    let n = raw.usize("params", "n")?.unwrap_or(2);
    if n < 2 {
        return Err(field_err("params", "n", "must be at least 2"));
    }
    let alpha = raw.f64("params", "alpha")?.unwrap_or(1.0);
    if alpha <= 0.0 {
        return Err(field_err("params", "alpha", "must be positive"));
    }

    let phi_src = raw.string("boundary", "phi").unwrap_or_else(|| "0".into());
    let phi = expr::parse(&phi_src, n).map_err(|e| match raw.line_of("boundary", "phi") {
        Some(line) => Error::Parse { line, msg: format!("phi: {e}") },
        None => e,
    })?;

    let h = raw.f64("grid", "h")?.unwrap_or(0.125);
    if h <= 0.0 {
        return Err(field_err("grid", "h", "must be positive"));
    }

    let claim_case = match raw.string("claim", "case").as_deref() {
        None | Some("cylinder") => ProfileCase::Cylinder,
        Some("cone") => {
            let theta = raw
                .f64("claim", "theta")?
                .ok_or_else(|| field_err("claim", "theta", "required for the cone case"))?;
            ProfileCase::Cone { theta }
        }
        Some(other) => {
            return Err(field_err("claim", "case", &format!("unknown case '{other}'")))
        }
    };

    let claim_mu = raw.f64("claim", "mu")?.unwrap_or(0.5);
    if !(claim_mu > 0.0 && claim_mu < 1.0) {
        return Err(field_err("claim", "mu", "must lie in (0, 1)"));
    }
    let exh_mu = raw.f64("exhaustion", "mu")?.unwrap_or(0.5);
    if !(exh_mu > 0.0 && exh_mu < 1.0) {
        return Err(field_err("exhaustion", "mu", "must lie in (0, 1)"));
    }

    let cfg = RunConfig {
        task,
        out: raw.string("run", "out"),
        seed: raw.u64("run", "seed")?.unwrap_or(0),
        n,
        alpha,
        domain: parse_domain(raw, n)?,
        h,
        phi_src,
        phi,
        solve_mode: raw.string("solve", "mode").unwrap_or_else(|| "translator".into()),
        tolerance: raw.f64("solve", "tolerance")?.unwrap_or(1e-10),
        max_steps: raw.usize("solve", "max_steps")?.unwrap_or(50),
        radial_u0: raw.f64("radial", "u0")?.unwrap_or(0.0),
        radial_rmax: raw.f64("radial", "rmax")?.unwrap_or(4.0),
        radial_step: raw.f64("radial", "step")?.unwrap_or(1e-3),
        claim_mu,
        claim_l: raw.f64("claim", "L")?.unwrap_or(1.0),
        claim_case,
        claim_samples: raw.usize("claim", "samples")?.unwrap_or(10_000),
        sweep_n: raw.usize_list("claim", "n_list")?.unwrap_or_else(|| vec![2, 3]),
        sweep_alpha: raw
            .f64_list("claim", "alpha_list")?
            .unwrap_or_else(|| vec![0.5, 1.0, 2.0]),
        sweep_mu: raw
            .f64_list("claim", "mu_list")?
            .unwrap_or_else(|| vec![0.3, 0.5, 0.8]),
        barrier_m: raw.f64("barrier", "m")?.unwrap_or(1.0),
        barrier_samples: raw.usize("barrier", "samples")?.unwrap_or(10_000),
        cov_case: raw.string("covering", "case").unwrap_or_else(|| "cylinder".into()),
        cov_m: raw.f64("covering", "m")?.unwrap_or(1.0),
        cov_n_inlet: raw.f64("covering", "n_inlet")?.unwrap_or(0.0),
        cov_d: raw.f64("covering", "d")?.unwrap_or(std::f64::consts::LN_2),
        cov_eps: raw.f64("covering", "eps")?,
        cov_b1: raw.f64("covering", "b1")?.unwrap_or(1.0),
        cov_theta: raw
            .f64("covering", "theta")?
            .unwrap_or(std::f64::consts::FRAC_PI_6),
        cov_delta0: raw.f64("covering", "delta0")?,
        cov_members: raw.usize("covering", "k")?.unwrap_or(10),
        cov_samples: raw.usize("covering", "samples")?.unwrap_or(100_000),
        perron_tol: raw.f64("perron", "tol")?.unwrap_or(1e-8),
        perron_sweeps: raw.usize("perron", "sweeps")?.unwrap_or(60),
        perron_per_axis: raw.usize("perron", "subdomains_per_axis")?.unwrap_or(2),
        exh_cuts: raw
            .f64_list("exhaustion", "cuts")?
            .unwrap_or_else(|| vec![4.0, 8.0, 16.0]),
        exh_mu,
        exh_compact_x1: raw.f64("exhaustion", "compact_x1")?.unwrap_or(2.0),
        exh_container_m: raw.f64("exhaustion", "container_m")?.unwrap_or(1.0),
        exh_container_inlet: raw.f64("exhaustion", "container_inlet")?.unwrap_or(0.0),
    };
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_values() {
        let text = "\
# comment
[run]
task = solve
seed = 7

[params]
n = 2
alpha = 1.5

[domain]
shape = ball
center = 0.5, -0.5
radius = 2.0

[grid]
h = 0.25

[boundary]
phi = x1 + x2^2
";
        let raw = parse_raw(text).unwrap();
        let cfg = extract(&raw).unwrap();
        assert_eq!(cfg.task, Task::Solve);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.alpha, 1.5);
        assert!(cfg.domain.is_some());
        assert_eq!(cfg.h, 0.25);
        assert_eq!(cfg.phi.eval(&[1.0, 2.0]).unwrap(), 5.0);
    }

    #[test]
    fn parse_error_names_the_line() {
        let text = "[run]\ntask = solve\nthis is not a kv pair\n";
        match parse_raw(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_phi_names_the_line() {
        let text = "[run]\ntask = solve\n[boundary]\nphi = x1 +\n";
        let raw = parse_raw(text).unwrap();
        match extract(&raw) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 4);
                assert!(msg.contains("phi"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn range_violation_names_the_field() {
        let text = "[run]\ntask = solve\n[params]\nalpha = -1\n";
        let raw = parse_raw(text).unwrap();
        match extract(&raw) {
            Err(Error::Config(msg)) => assert!(msg.contains("alpha")),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_domain_from_config() {
        let text = "\
[run]
task = solve
[domain]
shape = rounded_strip
rho = 0.8
cap = 0.9
x1_max = 4.0
";
        let raw = parse_raw(text).unwrap();
        let cfg = extract(&raw).unwrap();
        let d = cfg.domain.unwrap();
        assert!(d.is_bounded());
        assert!(d.contains(&[2.0, 0.0]));
        assert!(!d.contains(&[6.0, 0.0]));
    }
}
