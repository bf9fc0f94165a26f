//! Monte Carlo experiment suite tying the particle scheme to the
//! deterministic theory: rare-event probability scans against reference
//! rates, scheme-convergence tables for the closed-form instance, and the
//! small-noise limit study against the mean-reflected ODE.
//!
//! Everything here is naive Monte Carlo with batch-means standard errors;
//! thresholds are expected to keep the rarest event observable.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::ModelSpec;
use crate::noise::NoiseStream;
use crate::particle::{run_with_observer, Dynamics, Reflection};
use crate::rate::{endpoint_rate, RateMode};
use crate::skeleton::{solve_mr_ode, solve_short_skeleton, solve_skeleton, ControlPath};
use crate::stats;

/// Which scaled family an experiment samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    SmallNoise,
    ShortTime,
}

/// Rare event measured per particle path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EventSpec {
    /// Terminal state at or above the threshold.
    EndpointAbove(f64),
    /// Terminal state at or below the threshold.
    EndpointBelow(f64),
    /// Sup-norm deviation from the deterministic limit at least delta.
    SupDeviation(f64),
}

impl EventSpec {
    fn threshold(&self) -> f64 {
        match *self {
            Self::EndpointAbove(a) | Self::EndpointBelow(a) | Self::SupDeviation(a) => a,
        }
    }
}

/// A full experiment description: model, noise schedule, event and budget.
#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    pub model: ModelSpec,
    pub variant: Variant,
    pub epsilons: Vec<f64>,
    pub event: EventSpec,
    pub n_particles: usize,
    pub n_steps: usize,
    pub n_mc_batches: usize,
    pub seed: u64,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::InvalidInput("empty epsilon schedule".into()));
        }
        if self
            .epsilons
            .iter()
            .any(|e| !(e.is_finite() && *e > 0.0 && *e <= 1.0))
        {
            return Err(Error::InvalidInput(
                "epsilons must lie in (0, 1]".into(),
            ));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidInput(
                "epsilons must be strictly decreasing".into(),
            ));
        }
        if !self.event.threshold().is_finite() {
            return Err(Error::InvalidInput("event threshold must be finite".into()));
        }
        if let EventSpec::SupDeviation(d) = self.event {
            if d <= 0.0 {
                return Err(Error::InvalidInput(
                    "sup-deviation threshold must be positive".into(),
                ));
            }
        }
        if self.n_particles == 0 || self.n_steps == 0 || self.n_mc_batches == 0 {
            return Err(Error::InvalidInput(
                "n_particles, n_steps and n_mc_batches must be >= 1".into(),
            ));
        }
        let report = self.model.validate();
        if !report.is_valid() {
            return Err(Error::InvalidInput(format!("model invalid: {report}")));
        }
        Ok(())
    }

    fn grid(&self) -> Result<TimeGrid> {
        match self.variant {
            Variant::SmallNoise => TimeGrid::new(self.model.horizon, self.n_steps),
            Variant::ShortTime => TimeGrid::unit(self.n_steps),
        }
    }

    fn rate_mode(&self) -> RateMode {
        match self.variant {
            Variant::SmallNoise => RateMode::SmallNoise,
            Variant::ShortTime => RateMode::ShortTime,
        }
    }
}

/// One epsilon row of an LDP scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LdpRow {
    pub epsilon: f64,
    pub p_hat: f64,
    pub std_err: f64,
    /// `-eps ln p_hat`; infinite when no hits were observed.
    pub neg_eps_log_p: f64,
    pub zero_hits: bool,
}

/// Consecutive-row differences of `-eps ln p_hat` with pooled standard
/// errors (delta method), for trend assertions.
#[derive(Clone, Debug, PartialEq)]
pub struct TrendDiagnostics {
    pub diffs: Vec<f64>,
    pub pooled_std_errs: Vec<f64>,
    pub strictly_decreasing: bool,
}

#[derive(Clone, Debug)]
pub struct LdpReport {
    pub rows: Vec<LdpRow>,
    pub reference_rate: f64,
    /// True when the reference came from a sampled candidate-path search
    /// rather than the endpoint optimizer.
    pub reference_is_upper_bound: bool,
    /// Events here are evaluated per particle path.
    pub per_particle_events: bool,
    pub trend: TrendDiagnostics,
}

struct BatchOutcome {
    hits: usize,
}

fn run_event_batch(
    plan: &ExperimentPlan,
    grid: &TimeGrid,
    limit_path: &[f64],
    epsilon: f64,
    seed: u64,
) -> Result<BatchOutcome> {
    let drift_scale = match plan.variant {
        Variant::SmallNoise => 1.0,
        Variant::ShortTime => epsilon,
    };
    let dynamics = Dynamics {
        spec: &plan.model,
        grid,
        n_particles: plan.n_particles,
        epsilon,
        seed,
        drift_scale,
        control: None,
        reflection: Reflection::FromLaw,
        g0_tol: crate::measure::DEFAULT_G0_TOL,
    };
    let n_steps = grid.n_steps();
    let mut hits = 0usize;
    match plan.event {
        EventSpec::EndpointAbove(a) => {
            run_with_observer(&dynamics, |step, u, k| {
                if step == n_steps {
                    hits = u.iter().filter(|&&ui| ui + k >= a).count();
                }
            })?;
        }
        EventSpec::EndpointBelow(a) => {
            run_with_observer(&dynamics, |step, u, k| {
                if step == n_steps {
                    hits = u.iter().filter(|&&ui| ui + k <= a).count();
                }
            })?;
        }
        EventSpec::SupDeviation(delta) => {
            let mut sup = vec![0.0_f64; plan.n_particles];
            run_with_observer(&dynamics, |step, u, k| {
                let x0 = limit_path[step];
                for (s, ui) in sup.iter_mut().zip(u) {
                    let dev = (ui + k - x0).abs();
                    if dev > *s {
                        *s = dev;
                    }
                }
            })?;
            hits = sup.iter().filter(|&&s| s >= delta).count();
        }
    }
    Ok(BatchOutcome { hits })
}

/// Upper bound on the sup-deviation rate from a family of constant
/// candidate controls: the cheapest verified control whose skeleton leaves
/// the tube of radius `delta` around the deterministic limit.
fn sup_deviation_reference(
    plan: &ExperimentPlan,
    grid: &TimeGrid,
    limit_path: &[f64],
    k0: &[f64],
    delta: f64,
) -> Result<f64> {
    let solve = |c: f64| -> Result<(f64, bool)> {
        let control = ControlPath::constant(grid.clone(), c)?;
        let path = match plan.variant {
            Variant::SmallNoise => solve_skeleton(&plan.model, grid, &control, k0)?,
            Variant::ShortTime => solve_short_skeleton(&plan.model, grid, &control)?,
        };
        let sup = path
            .x()
            .iter()
            .zip(limit_path)
            .map(|(x, x0)| (x - x0).abs())
            .fold(0.0, f64::max);
        Ok((control.energy(), sup >= delta))
    };
    let mut best = f64::INFINITY;
    for sign in [1.0, -1.0] {
        let mut magnitude = 0.25;
        let mut qualified = None;
        for _ in 0..32 {
            let (energy, hit) = solve(sign * magnitude)?;
            if hit {
                qualified = Some((magnitude, energy));
                break;
            }
            magnitude *= 2.0;
        }
        if let Some((hi, mut energy)) = qualified {
            // Shrink toward the cheapest verified qualifying magnitude.
            let mut lo = hi / 2.0;
            let mut hi = hi;
            for _ in 0..48 {
                let mid = 0.5 * (lo + hi);
                let (e, hit) = solve(sign * mid)?;
                if hit {
                    hi = mid;
                    energy = e;
                } else {
                    lo = mid;
                }
            }
            best = best.min(energy);
        }
    }
    Ok(best)
}

/// Scans the epsilon schedule, estimating the event probability by naive
/// Monte Carlo over `n_mc_batches` independent ensembles per epsilon, and
/// reports `-eps ln p_hat` next to a reference rate.
pub fn run_ldp_experiment(plan: &ExperimentPlan) -> Result<LdpReport> {
    plan.validate()?;
    let grid = plan.grid()?;
    let (limit_path, k0): (Vec<f64>, Vec<f64>) = match plan.variant {
        Variant::SmallNoise => {
            let ode = solve_mr_ode(&plan.model, &grid)?;
            (ode.x().to_vec(), ode.k().to_vec())
        }
        Variant::ShortTime => (
            vec![plan.model.xi; grid.n_nodes()],
            vec![0.0; grid.n_nodes()],
        ),
    };

    let (reference_rate, reference_is_upper_bound) = match plan.event {
        EventSpec::EndpointAbove(a) | EventSpec::EndpointBelow(a) => (
            endpoint_rate(&plan.model, &grid, a, plan.rate_mode())?.value,
            false,
        ),
        EventSpec::SupDeviation(delta) => (
            sup_deviation_reference(plan, &grid, &limit_path, &k0, delta)?,
            true,
        ),
    };

    let root = NoiseStream::new(plan.seed);
    let n_samples = (plan.n_particles * plan.n_mc_batches) as f64;
    let required = 10.0 / n_samples;

    // Pre-flight pilot at the largest epsilon.
    let pilot_batches = (plan.n_mc_batches / 10).max(1);
    let mut pilot_hits = 0usize;
    for b in 0..pilot_batches {
        let seed = root.substream((1 << 48) | b as u64).seed();
        pilot_hits += run_event_batch(plan, &grid, &limit_path, plan.epsilons[0], seed)?.hits;
    }
    let pilot_estimate = pilot_hits as f64 / (plan.n_particles * pilot_batches) as f64;
    if pilot_estimate < required {
        return Err(Error::EventTooRare {
            estimate: pilot_estimate,
            required,
        });
    }

    let mut rows = Vec::with_capacity(plan.epsilons.len());
    for (ei, &epsilon) in plan.epsilons.iter().enumerate() {
        let mut batch_props = Vec::with_capacity(plan.n_mc_batches);
        for b in 0..plan.n_mc_batches {
            let seed = root.substream(((ei as u64) << 32) | b as u64).seed();
            let outcome = run_event_batch(plan, &grid, &limit_path, epsilon, seed)?;
            batch_props.push(outcome.hits as f64 / plan.n_particles as f64);
        }
        let s = stats::batch_means(&batch_props);
        let zero_hits = s.mean == 0.0;
        rows.push(LdpRow {
            epsilon,
            p_hat: s.mean,
            std_err: s.std_err,
            neg_eps_log_p: if zero_hits {
                f64::INFINITY
            } else {
                -epsilon * s.mean.ln()
            },
            zero_hits,
        });
    }

    let mut diffs = Vec::new();
    let mut pooled = Vec::new();
    for w in rows.windows(2) {
        diffs.push(w[0].neg_eps_log_p - w[1].neg_eps_log_p);
        let se = |r: &LdpRow| {
            if r.p_hat > 0.0 {
                r.epsilon * r.std_err / r.p_hat
            } else {
                f64::INFINITY
            }
        };
        pooled.push((se(&w[0]).powi(2) + se(&w[1]).powi(2)).sqrt());
    }
    let strictly_decreasing = diffs.iter().all(|d| *d > 0.0);

    Ok(LdpReport {
        rows,
        reference_rate,
        reference_is_upper_bound,
        per_particle_events: true,
        trend: TrendDiagnostics {
            diffs,
            pooled_std_errs: pooled,
            strictly_decreasing,
        },
    })
}

/// One `(dt, n_particles)` cell of the scheme-convergence table, averaged
/// over `replicates` independent runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceCell {
    pub dt: f64,
    pub n_particles: usize,
    pub replicates: usize,
    /// Mean of `|K_T - T|` against the closed form `K_t = t`.
    pub k_error: f64,
    /// Mean of `|ensemble mean of X_T|` against the closed form `X_t = B_t`.
    pub x_error: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergenceStudy {
    pub cells: Vec<ConvergenceCell>,
    /// Log-log slope of `k_error` against `n_particles` at the finest dt.
    pub slope_vs_n: Option<f64>,
    /// Log-log slope of `k_error` against `dt` at the largest ensemble.
    pub slope_vs_dt: Option<f64>,
}

fn is_closed_form_instance(spec: &ModelSpec) -> bool {
    use crate::model::{CoefficientFn, ConstraintFn};
    spec.xi == 0.0
        && spec.b == CoefficientFn::Constant { value: -1.0 }
        && spec.sigma == CoefficientFn::Constant { value: 1.0 }
        && spec.h == ConstraintFn::Identity
}

// Work budget per cell, in particle-steps; replicate counts shrink for
// expensive cells so the table stays desk-scale.
const CELL_BUDGET: f64 = 2e8;

fn replicates_for(n_particles: usize, n_steps: usize) -> usize {
    ((CELL_BUDGET / (n_particles as f64 * n_steps as f64)) as usize).clamp(2, 12)
}

/// Convergence table for the closed-form instance `b = -1`, `sigma = 1`,
/// `xi = 0`, identity `h`, where `K_t = t` and `X_t = B_t` exactly.
pub fn run_convergence_study(
    spec: &ModelSpec,
    dt_list: &[f64],
    n_particles_list: &[usize],
    seed: u64,
) -> Result<ConvergenceStudy> {
    if !is_closed_form_instance(spec) {
        return Err(Error::InvalidInput(
            "convergence study needs the closed-form instance b = -1, sigma = 1, xi = 0, identity h"
                .into(),
        ));
    }
    if dt_list.is_empty() || n_particles_list.is_empty() {
        return Err(Error::InvalidInput("empty study axis".into()));
    }
    let root = NoiseStream::new(seed);
    let mut cells = Vec::new();
    for (di, &dt) in dt_list.iter().enumerate() {
        if !(dt > 0.0 && dt <= spec.horizon) {
            return Err(Error::InvalidInput(format!("bad dt {dt}")));
        }
        let n_steps = (spec.horizon / dt).round().max(1.0) as usize;
        let grid = TimeGrid::new(spec.horizon, n_steps)?;
        for (ni, &n_particles) in n_particles_list.iter().enumerate() {
            if n_particles == 0 {
                return Err(Error::InvalidInput("n_particles must be >= 1".into()));
            }
            let replicates = replicates_for(n_particles, n_steps);
            let mut k_err_sum = 0.0;
            let mut x_err_sum = 0.0;
            for rep in 0..replicates {
                let label = ((di as u64) << 40) | ((ni as u64) << 20) | rep as u64;
                let run_seed = root.substream(label).seed();
                let dynamics = Dynamics {
                    spec,
                    grid: &grid,
                    n_particles,
                    epsilon: 1.0,
                    seed: run_seed,
                    drift_scale: 1.0,
                    control: None,
                    reflection: Reflection::FromLaw,
                    g0_tol: crate::measure::DEFAULT_G0_TOL,
                };
                let mut k_final = 0.0;
                let mut mean_x_final = 0.0;
                run_with_observer(&dynamics, |step, u, k| {
                    if step == n_steps {
                        k_final = k;
                        mean_x_final = u.iter().sum::<f64>() / n_particles as f64 + k;
                    }
                })?;
                k_err_sum += (k_final - spec.horizon).abs();
                x_err_sum += mean_x_final.abs();
            }
            cells.push(ConvergenceCell {
                dt: grid.dt(),
                n_particles,
                replicates,
                k_error: k_err_sum / replicates as f64,
                x_error: x_err_sum / replicates as f64,
            });
        }
    }

    let min_dt = cells.iter().map(|c| c.dt).fold(f64::INFINITY, f64::min);
    let max_n = cells.iter().map(|c| c.n_particles).max().unwrap();
    let along_n: Vec<&ConvergenceCell> = cells.iter().filter(|c| c.dt == min_dt).collect();
    let slope_vs_n = if along_n.len() >= 2 {
        let xs: Vec<f64> = along_n.iter().map(|c| c.n_particles as f64).collect();
        let ys: Vec<f64> = along_n.iter().map(|c| c.k_error.max(1e-300)).collect();
        Some(stats::log_log_slope(&xs, &ys))
    } else {
        None
    };
    let along_dt: Vec<&ConvergenceCell> =
        cells.iter().filter(|c| c.n_particles == max_n).collect();
    let slope_vs_dt = if along_dt.len() >= 2 {
        let xs: Vec<f64> = along_dt.iter().map(|c| c.dt).collect();
        let ys: Vec<f64> = along_dt.iter().map(|c| c.k_error.max(1e-300)).collect();
        Some(stats::log_log_slope(&xs, &ys))
    } else {
        None
    };
    Ok(ConvergenceStudy {
        cells,
        slope_vs_n,
        slope_vs_dt,
    })
}

/// One epsilon row of the small-noise limit study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsLimitRow {
    pub epsilon: f64,
    /// Monte Carlo mean of `sup_t |X^eps_t - X^0_t|^2`.
    pub mean_sq_sup_x_dev: f64,
    /// Standard error of that mean over particles.
    pub std_err: f64,
    /// `sup_t |K^eps_t - K^0_t|`.
    pub sup_k_dev: f64,
}

/// Measures the distance of the scaled systems from their deterministic
/// limit, one ensemble per epsilon. The same seed drives every epsilon, so
/// the rows are coupled by common random numbers and monotone trends are
/// not blurred by independent noise.
pub fn run_eps_limit_study(
    spec: &ModelSpec,
    epsilons: &[f64],
    n_particles: usize,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<EpsLimitRow>> {
    if epsilons.is_empty() {
        return Err(Error::InvalidInput("empty epsilon schedule".into()));
    }
    if epsilons.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::InvalidInput("epsilons must be finite and >= 0".into()));
    }
    let grid = TimeGrid::new(spec.horizon, n_steps)?;
    let ode = solve_mr_ode(spec, &grid)?;
    let mut rows = Vec::with_capacity(epsilons.len());
    for &epsilon in epsilons {
        let dynamics = Dynamics {
            spec,
            grid: &grid,
            n_particles,
            epsilon,
            seed,
            drift_scale: 1.0,
            control: None,
            reflection: Reflection::FromLaw,
            g0_tol: crate::measure::DEFAULT_G0_TOL,
        };
        let mut sup_dev = vec![0.0_f64; n_particles];
        let mut sup_k_dev = 0.0_f64;
        run_with_observer(&dynamics, |step, u, k| {
            let x0 = ode.x()[step];
            for (s, ui) in sup_dev.iter_mut().zip(u) {
                let dev = (ui + k - x0).abs();
                if dev > *s {
                    *s = dev;
                }
            }
            sup_k_dev = sup_k_dev.max((k - ode.k()[step]).abs());
        })?;
        let sq: Vec<f64> = sup_dev.iter().map(|s| s * s).collect();
        rows.push(EpsLimitRow {
            epsilon,
            mean_sq_sup_x_dev: stats::mean(&sq),
            std_err: stats::std_err(&sq),
            sup_k_dev,
        });
    }
    Ok(rows)
}
