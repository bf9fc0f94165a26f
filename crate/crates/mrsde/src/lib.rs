//! Numerical laboratory for one-dimensional SDEs whose reflection
//! constraint binds the *law* of the solution rather than its paths: the
//! running mean of an increasing constraint function must stay
//! nonnegative, enforced by a deterministic nondecreasing push `K`.
//!
//! The crate simulates the dynamics by an interacting particle system,
//! solves the associated deterministic skeleton equations, evaluates
//! small-noise and short-time large-deviation rate functionals, and
//! computes pathwise (Malliavin) derivative kernels — each component
//! cross-validated against closed-form oracles.
//!
//! ## Module map
//!
//! * [`model`] — problem instances from a closed parametric coefficient
//!   registry with exact Lipschitz/slope metadata and randomized audits.
//! * [`measure`] — the empirical-measure kernel: shifted constraint mean
//!   `H`, minimal nonnegative shift `G0`, Wasserstein-1 distance.
//! * [`particle`] — the interacting particle Euler scheme in small-noise,
//!   controlled and short-time variants, with `K` built as the running
//!   supremum of `G0` over empirical laws.
//! * [`skeleton`] — deterministic solvers: mean-reflected ODE, controlled
//!   skeleton, short-time skeleton.
//! * [`rate`] — rate functionals: exact path rate by control recovery and
//!   endpoint rates by adjoint-gradient optimization.
//! * [`malliavin`] — tangent processes, derivative kernels, derivative
//!   covariance, Cameron-Martin checks, kernel density diagnostics.
//! * [`harness`] — Monte Carlo studies: rare-event scans, scheme
//!   convergence, the small-noise limit.
//! * [`cli`] — JSON config ingestion and the CSV-emitting commands behind
//!   the `mrsde` binary.
//!
//! ## Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example simulate_ensemble
//! cargo run --release --example deterministic_skeleton
//! cargo run --release --example rate_functions
//! cargo run --release --example short_time_law
//! cargo run --release --example malliavin_kernel
//! cargo run --release --example terminal_density
//! cargo run --release --example ldp_experiment
//! cargo run --release --example eps_limit
//! cargo run --release --example scheme_convergence
//! ```

pub mod cli;
pub mod error;
pub mod grid;
pub mod harness;
pub mod malliavin;
pub mod measure;
pub mod model;
pub mod noise;
pub mod particle;
pub mod rate;
pub mod skeleton;
pub mod stats;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use measure::{g0, h_mean, w1, EmpiricalMeasure, DEFAULT_G0_TOL};
pub use model::{CoefficientFn, ConstraintFn, ModelSpec, ValidationReport, Violation};
pub use noise::NoiseStream;
pub use particle::{
    estimate_reflection_path, simulate, simulate_controlled, simulate_short_time, EnsemblePath,
    FlatSolutionReport,
};
pub use rate::{endpoint_rate, path_rate, short_path_rate, RateMode, RateResult};
pub use skeleton::{
    solve_mr_ode, solve_short_skeleton, solve_skeleton, ControlPath, DeterministicPath,
};
