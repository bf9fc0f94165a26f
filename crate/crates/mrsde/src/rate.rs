//! Large-deviation rate functionals over discretized controls.
//!
//! The path rate is computed by exact cell-wise control recovery: when
//! `sigma` is bounded away from zero, a path `g` equals the controlled
//! skeleton for exactly one piecewise-constant control, so the infimum is
//! a formula, not an optimization. Endpoint rates minimize control energy
//! under a terminal constraint with a quadratic penalty, an adjoint-state
//! gradient and a nonlinear conjugate-gradient inner loop, escalating the
//! penalty weight until the terminal violation is within tolerance.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::ModelSpec;
use crate::skeleton::{solve_mr_ode, ControlPath, DeterministicPath};

/// Admissibility tolerance on `g(0) = xi`; exact equality is unattainable
/// on file-loaded paths.
pub const INIT_TOL: f64 = 1e-9;
/// Terminal constraint tolerance for the endpoint optimizer.
pub const TERMINAL_TOL: f64 = 1e-6;
/// Stationarity tolerance on the reduced gradient.
pub const GRAD_TOL: f64 = 1e-6;

/// Which dynamics the rate refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateMode {
    /// Drift plus control, reflection increments frozen from the
    /// mean-reflected ODE.
    SmallNoise,
    /// Drift-free short-time dynamics on the unit interval.
    ShortTime,
}

/// Value of a rate functional plus the control that attains it and the
/// optimizer diagnostics (zero iterations for recovery-based evaluations).
#[derive(Clone, Debug)]
pub struct RateResult {
    pub value: f64,
    pub optimal_control: Option<ControlPath>,
    pub iterations: usize,
    pub grad_norm: f64,
}

impl RateResult {
    fn infinite() -> Self {
        Self {
            value: f64::INFINITY,
            optimal_control: None,
            iterations: 0,
            grad_norm: 0.0,
        }
    }
}

fn require_nondegenerate(spec: &ModelSpec) -> Result<()> {
    if spec.sigma_floor > 0.0 {
        Ok(())
    } else {
        Err(Error::DegenerateSigma)
    }
}

fn recover(
    spec: &ModelSpec,
    g: &DeterministicPath,
    k0: &[f64],
    with_drift: bool,
) -> Result<RateResult> {
    require_nondegenerate(spec)?;
    let grid = g.grid();
    if k0.len() != grid.n_nodes() {
        return Err(Error::LengthMismatch {
            expected: grid.n_nodes(),
            got: k0.len(),
        });
    }
    if (g.x()[0] - spec.xi).abs() > INIT_TOL {
        return Ok(RateResult::infinite());
    }
    let dt = grid.dt();
    let mut phi = Vec::with_capacity(grid.n_steps());
    for j in 0..grid.n_steps() {
        let x = g.x()[j];
        let drift = if with_drift { spec.b.eval(x) } else { 0.0 };
        let cell = (g.x()[j + 1] - x - drift * dt - (k0[j + 1] - k0[j])) / (spec.sigma.eval(x) * dt);
        if !cell.is_finite() {
            return Err(Error::NonFinite { step: j });
        }
        phi.push(cell);
    }
    let control = ControlPath::new(grid.clone(), phi)?;
    Ok(RateResult {
        value: control.energy(),
        optimal_control: Some(control),
        iterations: 0,
        grad_norm: 0.0,
    })
}

/// Path rate by control recovery against the small-noise skeleton whose
/// reflection increments come from `k0` (the mean-reflected ODE solution).
/// Returns `+inf` when `g` does not start at `xi`.
pub fn path_rate(spec: &ModelSpec, g: &DeterministicPath, k0: &[f64]) -> Result<RateResult> {
    recover(spec, g, k0, true)
}

/// Path rate for the short-time dynamics: no drift, no reflection, unit
/// horizon.
pub fn short_path_rate(spec: &ModelSpec, g: &DeterministicPath) -> Result<RateResult> {
    if !g.grid().is_unit() {
        return Err(Error::GridMismatch(
            "short-time rate needs a path on [0, 1]".into(),
        ));
    }
    let zeros = vec![0.0; g.grid().n_nodes()];
    recover(spec, g, &zeros, false)
}

/// The reduced endpoint problem: control energy plus a quadratic terminal
/// penalty, with the state eliminated by the forward Euler recursion.
/// Exposed so the adjoint gradient can be checked against finite
/// differences of [`EndpointProblem::objective`].
pub struct EndpointProblem {
    spec: ModelSpec,
    grid: TimeGrid,
    target: f64,
    mode: RateMode,
    k0: Vec<f64>,
    weight: f64,
}

impl EndpointProblem {
    pub fn new(spec: &ModelSpec, grid: &TimeGrid, target: f64, mode: RateMode) -> Result<Self> {
        require_nondegenerate(spec)?;
        if !target.is_finite() {
            return Err(Error::InvalidInput("target must be finite".into()));
        }
        let k0 = match mode {
            RateMode::SmallNoise => solve_mr_ode(spec, grid)?.k().to_vec(),
            RateMode::ShortTime => {
                if !grid.is_unit() {
                    return Err(Error::GridMismatch(
                        "short-time endpoint rate needs a grid on [0, 1]".into(),
                    ));
                }
                vec![0.0; grid.n_nodes()]
            }
        };
        Ok(Self {
            spec: spec.clone(),
            grid: grid.clone(),
            target,
            mode,
            k0,
            weight: 10.0,
        })
    }

    pub fn set_weight(&mut self, weight: f64) {
        self.weight = weight;
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    fn drift(&self, y: f64) -> f64 {
        match self.mode {
            RateMode::SmallNoise => self.spec.b.eval(y),
            RateMode::ShortTime => 0.0,
        }
    }

    fn drift_derivative(&self, y: f64) -> f64 {
        match self.mode {
            RateMode::SmallNoise => self.spec.b.derivative(y),
            RateMode::ShortTime => 0.0,
        }
    }

    fn state(&self, phi: &[f64]) -> Vec<f64> {
        let dt = self.grid.dt();
        let mut y = Vec::with_capacity(self.grid.n_nodes());
        let mut cur = self.spec.xi + self.k0[0];
        y.push(cur);
        for (j, p) in phi.iter().enumerate() {
            cur += (self.drift(cur) + self.spec.sigma.eval(cur) * p) * dt
                + (self.k0[j + 1] - self.k0[j]);
            y.push(cur);
        }
        y
    }

    /// Terminal state of the controlled skeleton under `phi`.
    pub fn terminal(&self, phi: &[f64]) -> f64 {
        *self.state(phi).last().unwrap()
    }

    /// `1/2 sum phi^2 dt + weight/2 (y_T - target)^2`.
    pub fn objective(&self, phi: &[f64]) -> f64 {
        let dt = self.grid.dt();
        let energy = 0.5 * phi.iter().map(|p| p * p).sum::<f64>() * dt;
        let gap = self.terminal(phi) - self.target;
        energy + 0.5 * self.weight * gap * gap
    }

    /// Adjoint-state gradient of [`EndpointProblem::objective`]: one forward
    /// state sweep and one backward multiplier sweep.
    pub fn gradient(&self, phi: &[f64]) -> Vec<f64> {
        let dt = self.grid.dt();
        let y = self.state(phi);
        let n = phi.len();
        let mut grad = vec![0.0; n];
        let mut lambda = self.weight * (y[n] - self.target);
        for j in (0..n).rev() {
            grad[j] = phi[j] * dt + lambda * self.spec.sigma.eval(y[j]) * dt;
            lambda *= 1.0 + (self.drift_derivative(y[j]) + self.spec.sigma.derivative(y[j]) * phi[j]) * dt;
        }
        grad
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Secant step on the directional derivative (exact for quadratics),
/// guarded by Armijo backtracking. Returns `None` when no decrease is
/// reachable along `d`.
fn line_search(
    problem: &EndpointProblem,
    phi: &[f64],
    dir: &[f64],
    f0: f64,
    slope0: f64,
    alpha_init: f64,
) -> Option<f64> {
    let probe = alpha_init.clamp(1e-12, 1e6);
    let at = |alpha: f64| -> Vec<f64> {
        phi.iter().zip(dir).map(|(p, d)| p + alpha * d).collect()
    };
    let slope_probe = dot(&problem.gradient(&at(probe)), dir);
    let mut alpha = if (slope0 - slope_probe).abs() > f64::MIN_POSITIVE {
        probe * slope0 / (slope0 - slope_probe)
    } else {
        probe
    };
    if !(alpha.is_finite() && alpha > 0.0) {
        alpha = probe;
    }
    alpha = alpha.min(1e6 * probe);
    for _ in 0..60 {
        if problem.objective(&at(alpha)) <= f0 + 1e-4 * alpha * slope0 {
            return Some(alpha);
        }
        alpha *= 0.5;
    }
    None
}

struct CgOutcome {
    iterations: usize,
    grad_norm: f64,
}

/// Polak-Ribiere conjugate gradient with restarts.
fn minimize(
    problem: &EndpointProblem,
    phi: &mut [f64],
    grad_tol: f64,
    max_iterations: usize,
) -> CgOutcome {
    let mut g = problem.gradient(phi);
    let mut gnorm = norm(&g);
    let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut alpha_prev = 1.0;
    let mut iterations = 0;
    while gnorm > grad_tol && iterations < max_iterations {
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // Not a descent direction: restart on steepest descent.
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            slope = -gnorm * gnorm;
        }
        let f0 = problem.objective(phi);
        let Some(alpha) = line_search(problem, phi, &dir, f0, slope, alpha_prev) else {
            break;
        };
        phi.iter_mut().zip(&dir).for_each(|(p, d)| *p += alpha * d);
        let g_new = problem.gradient(phi);
        let beta = (dot(&g_new, &g_new) - dot(&g_new, &g)) / (gnorm * gnorm);
        let beta = beta.max(0.0);
        dir.iter_mut()
            .zip(&g_new)
            .for_each(|(d, gi)| *d = -gi + beta * *d);
        g = g_new;
        gnorm = norm(&g);
        alpha_prev = alpha;
        iterations += 1;
    }
    CgOutcome {
        iterations,
        grad_norm: gnorm,
    }
}

/// Minimal control energy to steer the skeleton terminal value to
/// `target`: penalty escalation over [`EndpointProblem`] until the
/// terminal violation is below `1e-6` with a stationary reduced gradient.
pub fn endpoint_rate(
    spec: &ModelSpec,
    grid: &TimeGrid,
    target: f64,
    mode: RateMode,
) -> Result<RateResult> {
    let mut problem = EndpointProblem::new(spec, grid, target, mode)?;
    let mut phi = vec![0.0; grid.n_steps()];
    let mut total_iterations = 0;
    let mut last = (f64::INFINITY, f64::INFINITY);
    let mut weight = 10.0;
    for _ in 0..14 {
        problem.set_weight(weight);
        let outcome = minimize(&problem, &mut phi, 0.2 * GRAD_TOL, 4000);
        total_iterations += outcome.iterations;
        let violation = (problem.terminal(&phi) - target).abs();
        last = (outcome.grad_norm, violation);
        if violation <= TERMINAL_TOL && outcome.grad_norm <= GRAD_TOL {
            let control = ControlPath::new(grid.clone(), phi)?;
            return Ok(RateResult {
                value: control.energy(),
                optimal_control: Some(control),
                iterations: total_iterations,
                grad_norm: outcome.grad_norm,
            });
        }
        weight *= 10.0;
    }
    Err(Error::OptimizerFailed {
        iterations: total_iterations,
        grad_norm: last.0,
        violation: last.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoefficientFn, ConstraintFn};
    use crate::skeleton::{solve_short_skeleton, solve_skeleton};

    fn constant(c: f64) -> CoefficientFn {
        CoefficientFn::Constant { value: c }
    }

    fn schilder() -> ModelSpec {
        // b = 0, sigma = 1, xi = 0, h(z) = z + 1: the rate of reaching `a`
        // at time T is a^2 / (2T).
        ModelSpec::new(
            0.0,
            1.0,
            constant(0.0),
            constant(1.0),
            ConstraintFn::ShiftedIdentity { shift: 1.0 },
        )
        .unwrap()
    }

    #[test]
    fn mr_ode_path_has_zero_rate() {
        let b = CoefficientFn::Affine {
            intercept: 0.0,
            slope: -1.0,
        };
        let spec = ModelSpec::new(
            1.0,
            1.0,
            b,
            constant(1.0),
            ConstraintFn::ShiftedIdentity { shift: 0.5 },
        )
        .unwrap();
        let grid = TimeGrid::new(1.0, 500).unwrap();
        let ode = solve_mr_ode(&spec, &grid).unwrap();
        let r = path_rate(&spec, &ode, ode.k()).unwrap();
        assert!(r.value <= grid.dt(), "zero control attains the infimum");
    }

    #[test]
    fn linear_ramp_has_schilder_rate() {
        let spec = schilder();
        let grid = TimeGrid::new(1.0, 800).unwrap();
        let c = 0.9;
        let k0 = vec![0.0; grid.n_nodes()];
        let ramp = solve_skeleton(
            &spec,
            &grid,
            &ControlPath::constant(grid.clone(), c).unwrap(),
            &k0,
        )
        .unwrap();
        let r = path_rate(&spec, &ramp, &k0).unwrap();
        assert!((r.value - c * c / 2.0).abs() <= 5.0 * grid.dt());
    }

    #[test]
    fn inadmissible_start_gives_infinity() {
        let spec = schilder();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let k0 = vec![0.0; grid.n_nodes()];
        let shifted = ModelSpec::new(
            spec.xi + 1.0,
            1.0,
            constant(0.0),
            constant(1.0),
            ConstraintFn::ShiftedIdentity { shift: 1.0 },
        )
        .unwrap();
        let g = solve_skeleton(
            &shifted,
            &grid,
            &ControlPath::zero(grid.clone()),
            &k0,
        )
        .unwrap();
        let r = path_rate(&spec, &g, &k0).unwrap();
        assert!(r.value.is_infinite());
        assert!(r.optimal_control.is_none());
    }

    #[test]
    fn degenerate_sigma_is_rejected() {
        let spec = ModelSpec::new(
            0.0,
            1.0,
            constant(0.0),
            CoefficientFn::Affine {
                intercept: 1.0,
                slope: 0.2,
            },
            ConstraintFn::ShiftedIdentity { shift: 1.0 },
        )
        .unwrap();
        assert_eq!(spec.sigma_floor, 0.0);
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let k0 = vec![0.0; grid.n_nodes()];
        let g = solve_skeleton(&spec, &grid, &ControlPath::zero(grid.clone()), &k0).unwrap();
        assert!(matches!(
            path_rate(&spec, &g, &k0),
            Err(Error::DegenerateSigma)
        ));
    }

    #[test]
    fn round_trip_recovers_energy_exactly() {
        let b = CoefficientFn::SinAffine {
            linear: -0.6,
            sine: 0.2,
        };
        let spec = ModelSpec::new(
            0.3,
            1.0,
            b,
            constant(0.8),
            ConstraintFn::Identity,
        )
        .unwrap();
        let grid = TimeGrid::new(1.0, 300).unwrap();
        let k0 = solve_mr_ode(&spec, &grid).unwrap().k().to_vec();
        let rng = crate::noise::NoiseStream::new(404);
        for case in 0..50u64 {
            let phi: Vec<f64> = (0..grid.n_steps())
                .map(|j| rng.uniform(case, j as u64, -2.0, 2.0))
                .collect();
            let control = ControlPath::new(grid.clone(), phi).unwrap();
            let g = solve_skeleton(&spec, &grid, &control, &k0).unwrap();
            let r = path_rate(&spec, &g, &k0).unwrap();
            let energy = control.energy();
            assert!(
                (r.value - energy).abs() <= 5.0 * grid.dt() * (1.0 + energy),
                "case {case}: {} vs {energy}",
                r.value
            );
        }
    }

    #[test]
    fn short_rate_closed_forms() {
        let spec = schilder();
        let grid = TimeGrid::unit(600).unwrap();
        let still = solve_short_skeleton(&spec, &grid, &ControlPath::zero(grid.clone())).unwrap();
        assert_eq!(short_path_rate(&spec, &still).unwrap().value, 0.0);

        let c = 1.2;
        let ramp =
            solve_short_skeleton(&spec, &grid, &ControlPath::constant(grid.clone(), c).unwrap())
                .unwrap();
        let r = short_path_rate(&spec, &ramp).unwrap();
        assert!((r.value - c * c / 2.0).abs() <= 5.0 * grid.dt());

        // sigma(x) = x, xi = 1, g = e^t: the unit control, energy 1/2.
        let geometric = ModelSpec::new(
            1.0,
            1.0,
            constant(0.0),
            CoefficientFn::Affine {
                intercept: 0.0,
                slope: 1.0,
            },
            ConstraintFn::ShiftedIdentity { shift: 0.0 },
        )
        .unwrap()
        .with_sigma_floor(0.05)
        .unwrap();
        let exp_path =
            solve_short_skeleton(&geometric, &grid, &ControlPath::constant(grid.clone(), 1.0).unwrap())
                .unwrap();
        let r = short_path_rate(&geometric, &exp_path).unwrap();
        assert!((r.value - 0.5).abs() <= 5.0 * grid.dt());
    }

    #[test]
    fn adjoint_gradient_matches_finite_differences() {
        let b = CoefficientFn::SinAffine {
            linear: -1.0,
            sine: 0.3,
        };
        let sigma = CoefficientFn::Affine {
            intercept: 1.0,
            slope: 0.2,
        };
        let spec = ModelSpec::new(
            0.0,
            1.0,
            b,
            sigma,
            ConstraintFn::ShiftedIdentity { shift: 5.0 },
        )
        .unwrap()
        .with_sigma_floor(0.4)
        .unwrap();
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let mut problem =
            EndpointProblem::new(&spec, &grid, 0.7, RateMode::SmallNoise).unwrap();
        problem.set_weight(50.0);
        let rng = crate::noise::NoiseStream::new(88);
        let phi: Vec<f64> = (0..grid.n_steps())
            .map(|j| rng.uniform(0, j as u64, -1.0, 1.0))
            .collect();
        let grad = problem.gradient(&phi);
        let delta = 1e-5;
        for probe in 0..20usize {
            let j = (rng.uniform(1, probe as u64, 0.0, grid.n_steps() as f64)) as usize;
            let mut plus = phi.clone();
            let mut minus = phi.clone();
            plus[j] += delta;
            minus[j] -= delta;
            let fd = (problem.objective(&plus) - problem.objective(&minus)) / (2.0 * delta);
            assert!(
                (grad[j] - fd).abs() <= 1e-4 * fd.abs().max(1e-8),
                "component {j}: adjoint {} vs fd {fd}",
                grad[j]
            );
        }
    }

    #[test]
    fn endpoint_rate_matches_schilder_closed_form() {
        let spec = schilder();
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let r = endpoint_rate(&spec, &grid, 0.5, RateMode::SmallNoise).unwrap();
        assert!((r.value - 0.125).abs() <= 1e-4, "value {}", r.value);
        assert!(r.grad_norm <= GRAD_TOL);
        let r = endpoint_rate(&spec, &grid, -0.3, RateMode::SmallNoise).unwrap();
        assert!((r.value - 0.045).abs() <= 1e-4, "value {}", r.value);
    }

    #[test]
    fn endpoint_rate_of_the_typical_point_is_zero() {
        let b = CoefficientFn::Affine {
            intercept: 0.0,
            slope: -1.0,
        };
        let spec = ModelSpec::new(1.0, 1.0, b, constant(1.0), ConstraintFn::Identity).unwrap();
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let ode = solve_mr_ode(&spec, &grid).unwrap();
        let r = endpoint_rate(&spec, &grid, ode.terminal(), RateMode::SmallNoise).unwrap();
        assert!(r.value <= 1e-8, "value {}", r.value);
    }

    #[test]
    fn endpoint_rate_value_equals_control_energy() {
        let spec = schilder();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let r = endpoint_rate(&spec, &grid, 0.8, RateMode::SmallNoise).unwrap();
        let control = r.optimal_control.as_ref().unwrap();
        assert!((r.value - control.energy()).abs() <= 1e-9);
    }

    #[test]
    fn doubling_a_control_quadruples_its_energy() {
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let rng = crate::noise::NoiseStream::new(3);
        let phi: Vec<f64> = (0..grid.n_steps())
            .map(|j| rng.uniform(0, j as u64, -3.0, 3.0))
            .collect();
        let single = ControlPath::new(grid.clone(), phi.clone()).unwrap();
        let double =
            ControlPath::new(grid.clone(), phi.iter().map(|p| 2.0 * p).collect()).unwrap();
        // Scaling by 2 is exact in floating point, so this is an identity.
        assert_eq!(double.energy(), 4.0 * single.energy());
    }

    #[test]
    fn short_mode_endpoint_rate() {
        let spec = schilder();
        let grid = TimeGrid::unit(200).unwrap();
        let r = endpoint_rate(&spec, &grid, 0.5, RateMode::ShortTime).unwrap();
        assert!((r.value - 0.125).abs() <= 1e-4);
    }
}
