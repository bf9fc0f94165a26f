//! Interacting particle Euler scheme for the law-constrained dynamics.
//!
//! The ensemble carries the unreflected paths `U`; a single deterministic
//! reflection path `K` is built alongside as the running supremum of `G0`
//! over the empirical law of the current `U` column, and the constrained
//! state is `X = U + K`. Three variants share one stepping kernel:
//!
//! * `simulate` - small-noise dynamics (drift `b`, diffusion `sqrt(eps) sigma`),
//!   `K` recomputed from the ensemble law each step;
//! * `simulate_controlled` - extra drift `sigma * phi` with `K` frozen to a
//!   supplied deterministic path (no `G0` evaluations at all);
//! * `simulate_short_time` - rescaled dynamics (`eps b`, `sqrt(eps) sigma`)
//!   on the unit interval, `K` recomputed as in `simulate`.
//!
//! Within a step the particle update is a parallel map over counter-indexed
//! noise; the `G0` evaluation is a sequential barrier over the sorted
//! column. Results are bit-identical for any worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::measure::{self, EmpiricalMeasure, DEFAULT_G0_TOL};
use crate::model::{ConstraintFn, ModelSpec};
use crate::noise::NoiseStream;
use crate::skeleton::ControlPath;

// Below this ensemble size the parallel map costs more than it saves.
const PAR_THRESHOLD: usize = 4096;

/// How the reflection path is produced during a run.
#[derive(Clone, Copy)]
pub(crate) enum Reflection<'a> {
    /// `K_{k+1} = max(K_k, G0(law of U_{k+1}))`.
    FromLaw,
    /// `K` is the given nondecreasing path; never recomputed.
    Frozen(&'a [f64]),
}

pub(crate) struct Dynamics<'a> {
    pub spec: &'a ModelSpec,
    pub grid: &'a TimeGrid,
    pub n_particles: usize,
    pub epsilon: f64,
    pub seed: u64,
    /// Multiplies the drift `b`; 1 for small-noise, `epsilon` for short-time.
    pub drift_scale: f64,
    pub control: Option<&'a [f64]>,
    pub reflection: Reflection<'a>,
    pub g0_tol: f64,
}

impl Dynamics<'_> {
    fn check(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::InvalidInput("n_particles must be >= 1".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        if let Some(phi) = self.control {
            if phi.len() != self.grid.n_steps() {
                return Err(Error::LengthMismatch {
                    expected: self.grid.n_steps(),
                    got: phi.len(),
                });
            }
        }
        if let Reflection::Frozen(k) = self.reflection {
            check_reflection_path(k, self.grid)?;
        }
        Ok(())
    }
}

pub(crate) fn check_reflection_path(k: &[f64], grid: &TimeGrid) -> Result<()> {
    if k.len() != grid.n_nodes() {
        return Err(Error::LengthMismatch {
            expected: grid.n_nodes(),
            got: k.len(),
        });
    }
    if k[0] != 0.0 {
        return Err(Error::InvalidInput(format!(
            "reflection path must start at 0, got {}",
            k[0]
        )));
    }
    if k.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidInput(
            "reflection path must be nondecreasing and finite".into(),
        ));
    }
    Ok(())
}

/// Runs the Euler recursion, invoking `observe(step, u_column, k)` at step 0
/// and after every update. The observer sees the *unreflected* column; the
/// constrained state is `u + k` entrywise.
pub(crate) fn run_with_observer<F>(dynamics: &Dynamics<'_>, mut observe: F) -> Result<()>
where
    F: FnMut(usize, &[f64], f64),
{
    dynamics.check()?;
    let spec = dynamics.spec;
    let grid = dynamics.grid;
    let n = dynamics.n_particles;
    let dt = grid.dt();
    let sqrt_eps_dt = (dynamics.epsilon * dt).sqrt();
    let noise = NoiseStream::new(dynamics.seed);
    let drift_scale = dynamics.drift_scale;

    let mut u = vec![spec.xi; n];
    let mut sorted = match dynamics.reflection {
        Reflection::FromLaw => vec![0.0; n],
        Reflection::Frozen(_) => Vec::new(),
    };
    let mut k = match dynamics.reflection {
        // G0 of the initial Dirac cloud; 0 for any admissible initial datum.
        Reflection::FromLaw => {
            sorted.copy_from_slice(&u);
            measure::g0_sorted(&spec.h, &sorted, dynamics.g0_tol)?
        }
        Reflection::Frozen(path) => path[0],
    };
    observe(0, &u, k);

    for step in 0..grid.n_steps() {
        let phi = dynamics.control.map_or(0.0, |c| c[step]);
        let k_now = k;
        let b = &spec.b;
        let sigma = &spec.sigma;
        let update = |(i, ui): (usize, &mut f64)| {
            let x = *ui + k_now;
            let s = sigma.eval(x);
            let drift = drift_scale * b.eval(x) + s * phi;
            let db = sqrt_eps_dt * noise.standard_normal(i as u64, step as u64);
            *ui += drift * dt + s * db;
        };
        if n >= PAR_THRESHOLD {
            u.par_iter_mut().enumerate().for_each(update);
        } else {
            u.iter_mut().enumerate().for_each(update);
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step });
        }
        k = match dynamics.reflection {
            Reflection::FromLaw => {
                sorted.copy_from_slice(&u);
                sorted.sort_unstable_by(f64::total_cmp);
                k.max(measure::g0_sorted(&spec.h, &sorted, dynamics.g0_tol)?)
            }
            Reflection::Frozen(path) => path[step + 1],
        };
        observe(step + 1, &u, k);
    }
    Ok(())
}

/// Particle trajectories of `U` on the grid plus the deterministic
/// reflection path; `X = U + K` columnwise.
#[derive(Clone, Debug)]
pub struct EnsemblePath {
    grid: TimeGrid,
    n_particles: usize,
    /// `columns[k][i]` holds `U^i_{t_k}`.
    columns: Vec<Vec<f64>>,
    k_path: Vec<f64>,
    seed: u64,
    epsilon: f64,
}

impl EnsemblePath {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn k_path(&self) -> &[f64] {
        &self.k_path
    }

    pub fn u(&self, particle: usize, node: usize) -> f64 {
        self.columns[node][particle]
    }

    pub fn x(&self, particle: usize, node: usize) -> f64 {
        self.columns[node][particle] + self.k_path[node]
    }

    pub fn u_column(&self, node: usize) -> &[f64] {
        &self.columns[node]
    }

    pub fn x_column(&self, node: usize) -> Vec<f64> {
        let k = self.k_path[node];
        self.columns[node].iter().map(|u| u + k).collect()
    }

    /// Terminal constrained states, one per particle.
    pub fn terminal_x(&self) -> Vec<f64> {
        self.x_column(self.grid.n_steps())
    }

    /// Structural audit of the flat-solution shape: start and monotonicity
    /// of `K`, the worst constraint value over columns, and the discrete
    /// flatness residual `sum_k max(0, E_n[h(X_{k+1})]) (K_{k+1} - K_k)`.
    pub fn flat_solution_report(&self, h: &ConstraintFn) -> FlatSolutionReport {
        let mut min_constraint = f64::INFINITY;
        let mut residual = 0.0;
        let mut prev_k = self.k_path[0];
        for node in 0..self.grid.n_nodes() {
            let cloud = EmpiricalMeasure::from_samples(self.x_column(node))
                .expect("ensemble columns are non-empty and finite");
            let value = measure::h_mean(h, 0.0, &cloud);
            min_constraint = min_constraint.min(value);
            if node > 0 {
                residual += value.max(0.0) * (self.k_path[node] - prev_k);
                prev_k = self.k_path[node];
            }
        }
        FlatSolutionReport {
            k_start: self.k_path[0],
            k_nondecreasing: self.k_path.windows(2).all(|w| w[1] >= w[0]),
            k_final: *self.k_path.last().unwrap(),
            min_constraint,
            flatness_residual: residual,
        }
    }
}

/// Outcome of [`EnsemblePath::flat_solution_report`].
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct FlatSolutionReport {
    pub k_start: f64,
    pub k_nondecreasing: bool,
    pub k_final: f64,
    pub min_constraint: f64,
    pub flatness_residual: f64,
}

fn collect_ensemble(dynamics: &Dynamics<'_>) -> Result<EnsemblePath> {
    let mut columns = Vec::with_capacity(dynamics.grid.n_nodes());
    let mut k_path = Vec::with_capacity(dynamics.grid.n_nodes());
    run_with_observer(dynamics, |_, u, k| {
        columns.push(u.to_vec());
        k_path.push(k);
    })?;
    Ok(EnsemblePath {
        grid: dynamics.grid.clone(),
        n_particles: dynamics.n_particles,
        columns,
        k_path,
        seed: dynamics.seed,
        epsilon: dynamics.epsilon,
    })
}

/// Small-noise interacting particle system; `epsilon = 1` recovers the
/// original dynamics.
pub fn simulate(
    spec: &ModelSpec,
    grid: &TimeGrid,
    n_particles: usize,
    epsilon: f64,
    seed: u64,
) -> Result<EnsemblePath> {
    collect_ensemble(&Dynamics {
        spec,
        grid,
        n_particles,
        epsilon,
        seed,
        drift_scale: 1.0,
        control: None,
        reflection: Reflection::FromLaw,
        g0_tol: DEFAULT_G0_TOL,
    })
}

/// Controlled system: drift `b(X) + sigma(X) phi(t)`, diffusion
/// `sqrt(eps) sigma(X)`, with the reflection path frozen to `k_frozen`
/// (typically the `k_path` of a prior `simulate` run at the same epsilon).
pub fn simulate_controlled(
    spec: &ModelSpec,
    grid: &TimeGrid,
    n_particles: usize,
    epsilon: f64,
    seed: u64,
    phi: &ControlPath,
    k_frozen: &[f64],
) -> Result<EnsemblePath> {
    if phi.grid() != grid {
        return Err(Error::GridMismatch(
            "control grid differs from simulation grid".into(),
        ));
    }
    collect_ensemble(&Dynamics {
        spec,
        grid,
        n_particles,
        epsilon,
        seed,
        drift_scale: 1.0,
        control: Some(phi.values()),
        reflection: Reflection::Frozen(k_frozen),
        g0_tol: DEFAULT_G0_TOL,
    })
}

/// Short-time rescaled system on `[0, 1]`: drift `eps b`, diffusion
/// `sqrt(eps) sigma`; its law matches the original dynamics at time
/// `eps * t`.
pub fn simulate_short_time(
    spec: &ModelSpec,
    grid: &TimeGrid,
    n_particles: usize,
    epsilon: f64,
    seed: u64,
) -> Result<EnsemblePath> {
    if !grid.is_unit() {
        return Err(Error::GridMismatch(
            "short-time simulation needs a grid on [0, 1]".into(),
        ));
    }
    collect_ensemble(&Dynamics {
        spec,
        grid,
        n_particles,
        epsilon,
        seed,
        drift_scale: epsilon,
        control: None,
        reflection: Reflection::FromLaw,
        g0_tol: DEFAULT_G0_TOL,
    })
}

/// Streams a small-noise run and keeps only the reflection path; used to
/// produce the frozen deterministic `K` for single-path simulations.
pub fn estimate_reflection_path(
    spec: &ModelSpec,
    grid: &TimeGrid,
    n_particles: usize,
    epsilon: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut k_path = Vec::with_capacity(grid.n_nodes());
    run_with_observer(
        &Dynamics {
            spec,
            grid,
            n_particles,
            epsilon,
            seed,
            drift_scale: 1.0,
            control: None,
            reflection: Reflection::FromLaw,
            g0_tol: DEFAULT_G0_TOL,
        },
        |_, _, k| k_path.push(k),
    )?;
    Ok(k_path)
}
