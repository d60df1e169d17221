//! Translating graphs for flows by powers of mean curvature.
//!
//! The crate solves the quasilinear Dirichlet problem
//!
//! ```text
//! div(Du / sqrt(1+|Du|^2)) = -(1+|Du|^2)^{-alpha/2}   in  Omega,
//! u = phi                                             on  boundary,
//! ```
//!
//! whose solutions (after a sign flip, with `alpha = 1/k`) are translating
//! profiles of the flow of hypersurfaces with normal speed `H^k`. Bounded
//! domains are handled by a damped Newton iteration on a Shortley-Weller
//! finite-difference grid; unbounded cylinder- and cone-contained domains
//! are approximated by an exhaustion of capped truncations squeezed between
//! sub- and super-solution boundary data.
//!
//! Module map:
//!
//! * [`domain`] - domain shapes, uniform grids with boundary-cut arms,
//!   scalar fields.
//! * [`operator`] - the operator `Q u = a^{ij}(Du) D_ij u + b(Du)`, its
//!   divergence form, linearization and the translating-profile check.
//! * [`solver`] - damped Newton solver for `Qu = 0` (and the minimal-surface
//!   variant), the radially symmetric oracle, comparison helpers.
//! * [`profile`] - the auxiliary functions `Phi`, `xi`, `eta`, the decaying
//!   radial profile `h` and the supersolution shell families `w_k`.
//! * [`barrier`] - boundary barriers `phi +- psi(dist)` with explicit
//!   constants and the boundary gradient bound.
//! * [`covering`] - overlapping shell coverings of cylinders and cones with
//!   geometric verification.
//! * [`perron`] - lifting over subdomains, subfunction checks, monotone
//!   Perron sweeps and the exhaustion scheme.
//! * [`expr`], [`config`], [`run`] - the configuration-driven entry point
//!   used by the `hkflow` binary.
//!
//! Each major capability has a runnable example under `examples/`.

pub mod barrier;
pub mod config;
pub mod covering;
pub mod domain;
pub mod expr;
pub mod operator;
pub mod perron;
pub mod profile;
pub mod quad;
pub mod run;
pub mod solver;

mod stencil;

use thiserror::Error;

/// Crate-wide error type. Variants mirror the failure modes named in the
/// module contracts; message text is part of the interface.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unbounded domain requires truncation")]
    UnboundedDomain,
    #[error("point outside the domain")]
    OutsideDomain,
    #[error("non-monotone truncation schedule")]
    NonMonotoneSchedule,
    #[error("curvature unavailable: {0}")]
    CurvatureUnavailable(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("grid too coarse for a Hessian stencil at node {0}")]
    GridTooCoarse(usize),
    #[error("profile not mean-convex at node {0} (divergence term {1:.3e})")]
    NotMeanConvex(usize, f64),
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("profile infeasible for given (n, alpha, mu, L): n={n}, alpha={alpha}, mu={mu}, L={l}")]
    ProfileInfeasible { n: usize, alpha: f64, mu: f64, l: f64 },
    #[error("evaluation outside the supersolution shell: r={0}")]
    OutsideShell(f64),
    #[error("shell too thick for cone angle: e^d = {ed} >= 1/sin(theta) = {limit}")]
    ShellTooThick { ed: f64, limit: f64 },
    #[error("mean convexity violated: min boundary mean curvature {0:.3e} <= 0")]
    MeanConvexityViolated(f64),
    #[error("Newton stagnation after {steps} steps; residual history {history:?}")]
    NewtonStagnation { steps: usize, history: Vec<f64> },
    #[error("non-finite iterate during Newton solve")]
    NonFinite,
    #[error("grid mismatch between fields")]
    GridMismatch,
    #[error("monotonicity violated: lift decreased by {0:.3e}")]
    MonotonicityViolated(f64),
    #[error("extend covering: point ({0}) not inside any member shell")]
    ExtendCovering(String),
    #[error("singular linear system (zero pivot at row {0})")]
    SingularSystem(usize),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
