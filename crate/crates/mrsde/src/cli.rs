//! Configuration ingestion and the command implementations behind the
//! `mrsde` binary. One JSON file describes the model and per-command
//! sections; every command writes CSV artifacts (atomically, fixed
//! 17-significant-digit formatting) plus a JSON summary where useful.
//!
//! Outputs are functions of `(config bytes, seed)` only — the `--workers`
//! flag bounds parallelism without changing a single byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::harness::{
    run_convergence_study, run_eps_limit_study, run_ldp_experiment, EventSpec, ExperimentPlan,
    Variant,
};
use crate::malliavin::{
    cameron_martin_check, density_estimate, kernel_product, malliavin_covariance,
    tangent_simulate,
};
use crate::model::{CoefficientFn, ConstraintFn, ModelSpec};
use crate::noise::NoiseStream;
use crate::particle::{self, run_with_observer, Dynamics, Reflection};
use crate::rate::{endpoint_rate, RateMode};
use crate::skeleton::{solve_mr_ode, solve_short_skeleton, solve_skeleton, ControlPath};

/// Parsed config plus the FNV-1a hash of the raw file bytes, echoed into
/// every artifact for provenance.
pub struct LoadedConfig {
    pub config: RunConfig,
    pub hash: u64,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let config: RunConfig = serde_json::from_slice(&bytes)?;
    Ok(LoadedConfig {
        config,
        hash: fnv1a(&bytes),
    })
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325_u64;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub skeleton: Option<SkeletonConfig>,
    #[serde(default)]
    pub rate: Option<RateConfig>,
    #[serde(default)]
    pub malliavin: Option<MalliavinConfig>,
    #[serde(default)]
    pub ldp: Option<LdpConfig>,
    #[serde(default)]
    pub converge: Option<ConvergeConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionConfig {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub xi: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub b: FunctionConfig,
    pub sigma: FunctionConfig,
    pub h: FunctionConfig,
    #[serde(default)]
    pub sigma_floor: Option<f64>,
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec> {
        let b = CoefficientFn::from_kind_params(&self.b.kind, &self.b.params)?;
        let sigma = CoefficientFn::from_kind_params(&self.sigma.kind, &self.sigma.params)?;
        let h = ConstraintFn::from_kind_params(&self.h.kind, &self.h.params)?;
        let spec = ModelSpec::new(self.xi, self.horizon, b, sigma, h)?;
        match self.sigma_floor {
            Some(floor) => spec.with_sigma_floor(floor),
            None => Ok(spec),
        }
    }
}

fn default_epsilon() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub n_steps: usize,
    pub n_particles: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub seed: u64,
    /// "small-noise" (default) or "short-time".
    #[serde(default)]
    pub variant: Option<String>,
    /// Cap on how many particles land in paths.csv (all by default).
    #[serde(default)]
    pub output_particles: Option<usize>,
    /// Pass threshold on the worst constraint value in the summary.
    #[serde(default)]
    pub constraint_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    pub kind: String,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

impl ControlConfig {
    fn build(&self, grid: &TimeGrid) -> Result<ControlPath> {
        match self.kind.as_str() {
            "constant" => {
                let v = self.value.ok_or_else(|| {
                    Error::Config("control kind 'constant' needs a 'value'".into())
                })?;
                ControlPath::constant(grid.clone(), v)
            }
            "values" => {
                let vs = self.values.clone().ok_or_else(|| {
                    Error::Config("control kind 'values' needs 'values'".into())
                })?;
                ControlPath::new(grid.clone(), vs)
            }
            other => Err(Error::Config(format!("unknown control kind '{other}'"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkeletonConfig {
    pub n_steps: usize,
    /// "mr-ode", "skeleton" or "short-skeleton".
    pub mode: String,
    #[serde(default)]
    pub control: Option<ControlConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub n_steps: usize,
    /// "small-noise" or "short-time".
    pub mode: String,
    pub targets: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MalliavinConfig {
    pub n_steps: usize,
    /// Ensemble size for the frozen reflection path and the terminal
    /// density samples.
    pub n_particles: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub seed: u64,
    pub bandwidth: f64,
    #[serde(default)]
    pub bump: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventConfig {
    /// "endpoint-above", "endpoint-below" or "sup-deviation".
    pub kind: String,
    pub threshold: f64,
}

impl EventConfig {
    fn build(&self) -> Result<EventSpec> {
        match self.kind.as_str() {
            "endpoint-above" => Ok(EventSpec::EndpointAbove(self.threshold)),
            "endpoint-below" => Ok(EventSpec::EndpointBelow(self.threshold)),
            "sup-deviation" => Ok(EventSpec::SupDeviation(self.threshold)),
            other => Err(Error::Config(format!("unknown event kind '{other}'"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdpConfig {
    /// "small-noise" or "short-time".
    pub variant: String,
    pub epsilons: Vec<f64>,
    pub event: EventConfig,
    pub n_particles: usize,
    pub n_steps: usize,
    pub n_mc_batches: usize,
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub dt_list: Vec<f64>,
    pub n_particles_list: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsLimitConfig {
    pub epsilons: Vec<f64>,
    pub n_particles: usize,
    pub n_steps: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub seed: u64,
    #[serde(default)]
    pub scheme: Option<SchemeConfig>,
    #[serde(default)]
    pub eps_limit: Option<EpsLimitConfig>,
}

/// Flags shared by every subcommand.
pub struct CommandOpts {
    pub out_dir: PathBuf,
    pub workers: Option<usize>,
    pub seed_override: Option<u64>,
}

impl CommandOpts {
    fn seed(&self, section_seed: u64) -> u64 {
        self.seed_override.unwrap_or(section_seed)
    }
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(0) => Err(Error::Config("workers must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
            .install(f),
    }
}

fn build_model(cfg: &RunConfig) -> Result<ModelSpec> {
    let spec = cfg.model.build().map_err(|e| match e {
        Error::InvalidInput(msg) => Error::Config(format!("model block: {msg}")),
        other => other,
    })?;
    let report = spec.validate();
    if !report.is_valid() {
        return Err(Error::Config(format!("model invariants violated: {report}")));
    }
    Ok(spec)
}

fn section<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T> {
    section
        .as_ref()
        .ok_or_else(|| Error::Config(format!("config has no '{name}' section")))
}

/// 17 significant digits: round-trips every f64 exactly.
fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_header(hash: u64, seed: u64, header: &str) -> String {
    format!("# config={hash:016x} seed={seed}\n{header}\n")
}

fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let tmp = dir.join(format!("{name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, &path)?;
    Ok(())
}

#[derive(Serialize)]
struct SimulateSummary {
    config: String,
    seed: u64,
    variant: String,
    epsilon: f64,
    n_particles: usize,
    n_steps: usize,
    k_start: f64,
    k_final: f64,
    k_nondecreasing: bool,
    min_constraint: f64,
    flatness_residual: f64,
    constraint_tol: f64,
    flatness_tol: f64,
    constraint_ok: bool,
    flatness_ok: bool,
}

pub fn cmd_simulate(loaded: &LoadedConfig, opts: &CommandOpts) -> Result<()> {
    let cfg = &loaded.config;
    let sec = section(&cfg.simulate, "simulate")?;
    let spec = build_model(cfg)?;
    let seed = opts.seed(sec.seed);
    let variant = sec.variant.as_deref().unwrap_or("small-noise");
    with_pool(opts.workers, || {
        let (grid, path) = match variant {
            "small-noise" => {
                let grid = TimeGrid::new(spec.horizon, sec.n_steps)?;
                let path = particle::simulate(&spec, &grid, sec.n_particles, sec.epsilon, seed)?;
                (grid, path)
            }
            "short-time" => {
                let grid = TimeGrid::unit(sec.n_steps)?;
                let path =
                    particle::simulate_short_time(&spec, &grid, sec.n_particles, sec.epsilon, seed)?;
                (grid, path)
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown simulate variant '{other}'"
                )))
            }
        };

        let shown = sec.output_particles.unwrap_or(sec.n_particles).min(sec.n_particles);
        let mut paths_csv = csv_header(loaded.hash, seed, "t,particle,u,x");
        for i in 0..shown {
            for (node, t) in grid.nodes().enumerate() {
                let u = path.u(i, node);
                let _ = writeln!(
                    paths_csv,
                    "{},{i},{},{}",
                    fmt_float(t),
                    fmt_float(u),
                    fmt_float(u + path.k_path()[node])
                );
            }
        }
        write_atomic(&opts.out_dir, "paths.csv", &paths_csv)?;

        let mut kpath_csv = csv_header(loaded.hash, seed, "t,k");
        for (node, t) in grid.nodes().enumerate() {
            let _ = writeln!(kpath_csv, "{},{}", fmt_float(t), fmt_float(path.k_path()[node]));
        }
        write_atomic(&opts.out_dir, "kpath.csv", &kpath_csv)?;

        let report = path.flat_solution_report(&spec.h);
        let constraint_tol = sec.constraint_tol.unwrap_or(1e-6);
        let flatness_tol = 1e-8 * report.k_final.max(grid.dt());
        let summary = SimulateSummary {
            config: format!("{:016x}", loaded.hash),
            seed,
            variant: variant.to_string(),
            epsilon: sec.epsilon,
            n_particles: sec.n_particles,
            n_steps: sec.n_steps,
            k_start: report.k_start,
            k_final: report.k_final,
            k_nondecreasing: report.k_nondecreasing,
            min_constraint: report.min_constraint,
            flatness_residual: report.flatness_residual,
            constraint_tol,
            flatness_tol,
            constraint_ok: report.min_constraint >= -constraint_tol,
            flatness_ok: report.flatness_residual <= flatness_tol,
        };
        write_atomic(
            &opts.out_dir,
            "summary.json",
            &format!("{}\n", serde_json::to_string_pretty(&summary)?),
        )
    })
}

pub fn cmd_skeleton(loaded: &LoadedConfig, opts: &CommandOpts) -> Result<()> {
    let cfg = &loaded.config;
    let sec = section(&cfg.skeleton, "skeleton")?;
    let spec = build_model(cfg)?;
    with_pool(opts.workers, || {
        let path = match sec.mode.as_str() {
            "mr-ode" => {
                let grid = TimeGrid::new(spec.horizon, sec.n_steps)?;
                solve_mr_ode(&spec, &grid)?
            }
            "skeleton" => {
                let grid = TimeGrid::new(spec.horizon, sec.n_steps)?;
                let control = section(&sec.control, "skeleton.control")?.build(&grid)?;
                let k0 = solve_mr_ode(&spec, &grid)?.k().to_vec();
                solve_skeleton(&spec, &grid, &control, &k0)?
            }
            "short-skeleton" => {
                let grid = TimeGrid::unit(sec.n_steps)?;
                let control = section(&sec.control, "skeleton.control")?.build(&grid)?;
                solve_short_skeleton(&spec, &grid, &control)?
            }
            other => return Err(Error::Config(format!("unknown skeleton mode '{other}'"))),
        };
        let mut csv = csv_header(loaded.hash, 0, "t,x,k");
        for (node, t) in path.grid().nodes().enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{}",
                fmt_float(t),
                fmt_float(path.x()[node]),
                fmt_float(path.k()[node])
            );
        }
        write_atomic(&opts.out_dir, "skeleton.csv", &csv)
    })
}

pub fn cmd_rate(loaded: &LoadedConfig, opts: &CommandOpts) -> Result<()> {
    let cfg = &loaded.config;
    let sec = section(&cfg.rate, "rate")?;
    let spec = build_model(cfg)?;
    with_pool(opts.workers, || {
        let (grid, mode) = match sec.mode.as_str() {
            "small-noise" => (
                TimeGrid::new(spec.horizon, sec.n_steps)?,
                RateMode::SmallNoise,
            ),
            "short-time" => (TimeGrid::unit(sec.n_steps)?, RateMode::ShortTime),
            other => return Err(Error::Config(format!("unknown rate mode '{other}'"))),
        };
        let mut csv = csv_header(loaded.hash, 0, "target,rate,iterations,grad_norm");
        for &target in &sec.targets {
            let r = endpoint_rate(&spec, &grid, target, mode)?;
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                fmt_float(target),
                fmt_float(r.value),
                r.iterations,
                fmt_float(r.grad_norm)
            );
        }
        write_atomic(&opts.out_dir, "rate.csv", &csv)
    })
}

#[derive(Serialize)]
struct MalliavinSummary {
    config: String,
    seed: u64,
    epsilon: f64,
    n_steps: usize,
    covariance_at_horizon: f64,
    max_inverse_defect: f64,
    cameron_martin_fd: f64,
    cameron_martin_pairing: f64,
    cameron_martin_abs_error: f64,
}

pub fn cmd_malliavin(loaded: &LoadedConfig, opts: &CommandOpts) -> Result<()> {
    let cfg = &loaded.config;
    let sec = section(&cfg.malliavin, "malliavin")?;
    let spec = build_model(cfg)?;
    let seed = opts.seed(sec.seed);
    with_pool(opts.workers, || {
        let grid = TimeGrid::new(spec.horizon, sec.n_steps)?;
        let root = NoiseStream::new(seed);

        // One streaming ensemble run yields both the frozen reflection path
        // and the terminal samples for the density diagnostic.
        let mut k_frozen = Vec::with_capacity(grid.n_nodes());
        let mut terminal = Vec::new();
        let dynamics = Dynamics {
            spec: &spec,
            grid: &grid,
            n_particles: sec.n_particles,
            epsilon: sec.epsilon,
            seed: root.substream(1).seed(),
            drift_scale: 1.0,
            control: None,
            reflection: Reflection::FromLaw,
            g0_tol: crate::measure::DEFAULT_G0_TOL,
        };
        let n_steps = grid.n_steps();
        run_with_observer(&dynamics, |step, u, k| {
            k_frozen.push(k);
            if step == n_steps {
                terminal = u.iter().map(|ui| ui + k).collect();
            }
        })?;

        let bundle = tangent_simulate(&spec, &grid, sec.epsilon, root.substream(2).seed(), &k_frozen)?;
        let kernel = kernel_product(&spec, &bundle);

        let mut kernel_csv = csv_header(loaded.hash, seed, "r,t,d");
        for r in 0..grid.n_nodes() {
            for t in r..grid.n_nodes() {
                let _ = writeln!(
                    kernel_csv,
                    "{},{},{}",
                    fmt_float(grid.node(r)),
                    fmt_float(grid.node(t)),
                    fmt_float(kernel.value(r, t))
                );
            }
        }
        write_atomic(&opts.out_dir, "kernel.csv", &kernel_csv)?;

        let density = density_estimate(&terminal, sec.bandwidth)?;
        let mut density_csv = csv_header(loaded.hash, seed, "x,f");
        for (x, f) in density.xs.iter().zip(&density.pdf) {
            let _ = writeln!(density_csv, "{},{}", fmt_float(*x), fmt_float(*f));
        }
        write_atomic(&opts.out_dir, "density.csv", &density_csv)?;

        let direction = ControlPath::constant(grid.clone(), 1.0)?;
        let cm = cameron_martin_check(&spec, &bundle, &direction, sec.bump.unwrap_or(1e-4))?;
        let summary = MalliavinSummary {
            config: format!("{:016x}", loaded.hash),
            seed,
            epsilon: sec.epsilon,
            n_steps: sec.n_steps,
            covariance_at_horizon: malliavin_covariance(&kernel, grid.n_steps()),
            max_inverse_defect: bundle.max_inverse_defect(),
            cameron_martin_fd: cm.fd_derivative,
            cameron_martin_pairing: cm.kernel_pairing,
            cameron_martin_abs_error: cm.abs_error,
        };
        write_atomic(
            &opts.out_dir,
            "malliavin_summary.json",
            &format!("{}\n", serde_json::to_string_pretty(&summary)?),
        )
    })
}

pub fn cmd_ldp(loaded: &LoadedConfig, opts: &CommandOpts) -> Result<()> {
    let cfg = &loaded.config;
    let sec = section(&cfg.ldp, "ldp")?;
    let spec = build_model(cfg)?;
    let seed = opts.seed(sec.seed);
    with_pool(opts.workers, || {
        let variant = match sec.variant.as_str() {
            "small-noise" => Variant::SmallNoise,
            "short-time" => Variant::ShortTime,
            other => return Err(Error::Config(format!("unknown ldp variant '{other}'"))),
        };
        let plan = ExperimentPlan {
            model: spec.clone(),
            variant,
            epsilons: sec.epsilons.clone(),
            event: sec.event.build()?,
            n_particles: sec.n_particles,
            n_steps: sec.n_steps,
            n_mc_batches: sec.n_mc_batches,
            seed,
        };
        let report = run_ldp_experiment(&plan)?;
        let mut csv = csv_header(
            loaded.hash,
            seed,
            "epsilon,p_hat,std_err,neg_eps_log_p,reference_rate",
        );
        for row in &report.rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                fmt_float(row.epsilon),
                fmt_float(row.p_hat),
                fmt_float(row.std_err),
                fmt_float(row.neg_eps_log_p),
                fmt_float(report.reference_rate)
            );
        }
        write_atomic(&opts.out_dir, "ldp.csv", &csv)
    })
}

#[derive(Serialize)]
struct ConvergeSummary {
    config: String,
    seed: u64,
    slope_vs_n: Option<f64>,
    slope_vs_dt: Option<f64>,
}

pub fn cmd_converge(loaded: &LoadedConfig, opts: &CommandOpts) -> Result<()> {
    let cfg = &loaded.config;
    let sec = section(&cfg.converge, "converge")?;
    let spec = build_model(cfg)?;
    let seed = opts.seed(sec.seed);
    if sec.scheme.is_none() && sec.eps_limit.is_none() {
        return Err(Error::Config(
            "converge section needs 'scheme' and/or 'eps_limit'".into(),
        ));
    }
    with_pool(opts.workers, || {
        if let Some(scheme) = &sec.scheme {
            let study =
                run_convergence_study(&spec, &scheme.dt_list, &scheme.n_particles_list, seed)?;
            let mut csv = csv_header(loaded.hash, seed, "dt,n_particles,replicates,k_error,x_error");
            for cell in &study.cells {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    fmt_float(cell.dt),
                    cell.n_particles,
                    cell.replicates,
                    fmt_float(cell.k_error),
                    fmt_float(cell.x_error)
                );
            }
            write_atomic(&opts.out_dir, "converge.csv", &csv)?;
            let summary = ConvergeSummary {
                config: format!("{:016x}", loaded.hash),
                seed,
                slope_vs_n: study.slope_vs_n,
                slope_vs_dt: study.slope_vs_dt,
            };
            write_atomic(
                &opts.out_dir,
                "converge_summary.json",
                &format!("{}\n", serde_json::to_string_pretty(&summary)?),
            )?;
        }
        if let Some(eps) = &sec.eps_limit {
            let rows =
                run_eps_limit_study(&spec, &eps.epsilons, eps.n_particles, eps.n_steps, seed)?;
            let mut csv = csv_header(
                loaded.hash,
                seed,
                "epsilon,mean_sq_sup_x_dev,std_err,sup_k_dev",
            );
            for row in &rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    fmt_float(row.epsilon),
                    fmt_float(row.mean_sq_sup_x_dev),
                    fmt_float(row.std_err),
                    fmt_float(row.sup_k_dev)
                );
            }
            write_atomic(&opts.out_dir, "epslimit.csv", &csv)?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_config_json() -> String {
        r#"{
            "model": {
                "xi": 0.0, "T": 1.0,
                "b": {"kind": "constant", "params": [-1.0]},
                "sigma": {"kind": "constant", "params": [1.0]},
                "h": {"kind": "identity"}
            },
            "simulate": {"n_steps": 20, "n_particles": 50, "epsilon": 1.0, "seed": 7}
        }"#
        .to_string()
    }

    #[test]
    fn parses_a_minimal_config() {
        let cfg: RunConfig = serde_json::from_str(&minimal_config_json()).unwrap();
        let spec = cfg.model.build().unwrap();
        assert_eq!(spec.sigma_floor, 1.0);
        assert!(cfg.simulate.is_some());
        assert!(cfg.rate.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = minimal_config_json().replace("\"n_steps\"", "\"mystery\": 1, \"n_steps\"");
        assert!(serde_json::from_str::<RunConfig>(&bad).is_err());
        let bad_model = minimal_config_json().replace("\"xi\"", "\"zeta\": 2, \"xi\"");
        assert!(serde_json::from_str::<RunConfig>(&bad_model).is_err());
    }

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.125, -3.7e-11, 1.0 / 3.0, 2.0_f64.sqrt(), 1e300] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn fnv_hash_is_stable() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }
}
