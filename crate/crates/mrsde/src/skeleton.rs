//! Deterministic solvers: the mean-reflected ODE, the controlled skeleton
//! driven by a fixed reflection path, and the drift-free short-time
//! skeleton. All three use the same explicit Euler stepping as the
//! particle scheme so cross-module comparisons isolate statistical error.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::ModelSpec;

/// Deterministic state path plus its (possibly zero) reflection path.
#[derive(Clone, Debug, PartialEq)]
pub struct DeterministicPath {
    grid: TimeGrid,
    x: Vec<f64>,
    k: Vec<f64>,
}

impl DeterministicPath {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn terminal(&self) -> f64 {
        *self.x.last().unwrap()
    }
}

/// Piecewise-constant control on the grid cells, with its energy
/// `1/2 sum phi_j^2 dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlPath {
    grid: TimeGrid,
    phi: Vec<f64>,
    bound: Option<f64>,
}

impl ControlPath {
    pub fn new(grid: TimeGrid, phi: Vec<f64>) -> Result<Self> {
        if phi.len() != grid.n_steps() {
            return Err(Error::LengthMismatch {
                expected: grid.n_steps(),
                got: phi.len(),
            });
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite control value".into()));
        }
        Ok(Self {
            grid,
            phi,
            bound: None,
        })
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Result<Self> {
        let n = grid.n_steps();
        Self::new(grid, vec![value; n])
    }

    pub fn zero(grid: TimeGrid) -> Self {
        let n = grid.n_steps();
        Self::new(grid, vec![0.0; n]).expect("zero control always valid")
    }

    /// Declares an energy bound; construction fails when the control
    /// already exceeds it.
    pub fn with_bound(mut self, bound: f64) -> Result<Self> {
        if self.energy() > bound {
            return Err(Error::InvalidInput(format!(
                "control energy {} exceeds declared bound {bound}",
                self.energy()
            )));
        }
        self.bound = Some(bound);
        Ok(self)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.phi
    }

    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    /// `1/2 sum phi_j^2 dt`.
    pub fn energy(&self) -> f64 {
        0.5 * self.phi.iter().map(|v| v * v).sum::<f64>() * self.grid.dt()
    }
}

fn check_finite(x: f64, step: usize) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite { step })
    }
}

/// Solves the mean-reflected ODE: Euler on the drift with the reflection
/// path built from the Dirac specialization `G0(delta_u) = max(0, r* - u)`,
/// where `r*` is the constraint root.
pub fn solve_mr_ode(spec: &ModelSpec, grid: &TimeGrid) -> Result<DeterministicPath> {
    let dt = grid.dt();
    let root = spec.h.root();
    let n = grid.n_steps();
    let mut x = Vec::with_capacity(n + 1);
    let mut k = Vec::with_capacity(n + 1);
    let mut u = spec.xi;
    let mut refl = (root - u).max(0.0);
    x.push(u + refl);
    k.push(refl);
    for step in 0..n {
        let state = u + refl;
        u = check_finite(u + spec.b.eval(state) * dt, step)?;
        refl = refl.max((root - u).max(0.0));
        x.push(u + refl);
        k.push(refl);
    }
    Ok(DeterministicPath {
        grid: grid.clone(),
        x,
        k,
    })
}

/// Solves the controlled skeleton: drift plus `sigma * phi`, with the
/// reflection increments taken verbatim from `k0` (never recomputed from
/// the controlled path).
pub fn solve_skeleton(
    spec: &ModelSpec,
    grid: &TimeGrid,
    phi: &ControlPath,
    k0: &[f64],
) -> Result<DeterministicPath> {
    if phi.grid() != grid {
        return Err(Error::GridMismatch(
            "control grid differs from solver grid".into(),
        ));
    }
    if k0.len() != grid.n_nodes() {
        return Err(Error::LengthMismatch {
            expected: grid.n_nodes(),
            got: k0.len(),
        });
    }
    let dt = grid.dt();
    let n = grid.n_steps();
    let mut x = Vec::with_capacity(n + 1);
    let mut y = spec.xi + k0[0];
    x.push(y);
    for step in 0..n {
        let drift = spec.b.eval(y) + spec.sigma.eval(y) * phi.values()[step];
        y = check_finite(y + drift * dt + (k0[step + 1] - k0[step]), step)?;
        x.push(y);
    }
    Ok(DeterministicPath {
        grid: grid.clone(),
        x,
        k: k0.to_vec(),
    })
}

/// Solves the short-time skeleton on the unit interval: no drift, no
/// reflection, only `sigma * phi`.
pub fn solve_short_skeleton(
    spec: &ModelSpec,
    grid: &TimeGrid,
    phi: &ControlPath,
) -> Result<DeterministicPath> {
    if !grid.is_unit() {
        return Err(Error::GridMismatch(
            "short-time skeleton needs a grid on [0, 1]".into(),
        ));
    }
    if phi.grid() != grid {
        return Err(Error::GridMismatch(
            "control grid differs from solver grid".into(),
        ));
    }
    let dt = grid.dt();
    let n = grid.n_steps();
    let mut x = Vec::with_capacity(n + 1);
    let mut y = spec.xi;
    x.push(y);
    for step in 0..n {
        y = check_finite(y + spec.sigma.eval(y) * phi.values()[step] * dt, step)?;
        x.push(y);
    }
    Ok(DeterministicPath {
        grid: grid.clone(),
        x,
        k: vec![0.0; n + 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoefficientFn, ConstraintFn};

    fn constant(c: f64) -> CoefficientFn {
        CoefficientFn::Constant { value: c }
    }

    fn spec(
        xi: f64,
        b: CoefficientFn,
        sigma: CoefficientFn,
        h: ConstraintFn,
        horizon: f64,
    ) -> ModelSpec {
        ModelSpec::new(xi, horizon, b, sigma, h).unwrap()
    }

    #[test]
    fn zero_drift_keeps_base_point() {
        let s = spec(1.0, constant(0.0), constant(0.0), ConstraintFn::Identity, 1.0);
        let g = TimeGrid::new(1.0, 100).unwrap();
        let p = solve_mr_ode(&s, &g).unwrap();
        assert!(p.x().iter().all(|&v| v == 1.0));
        assert!(p.k().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_negative_drift_is_absorbed_by_reflection() {
        // b = -1, xi = 0, identity h: X = 0, K_t = t up to O(dt).
        let s = spec(0.0, constant(-1.0), constant(1.0), ConstraintFn::Identity, 1.0);
        let g = TimeGrid::new(1.0, 1000).unwrap();
        let p = solve_mr_ode(&s, &g).unwrap();
        let dt = g.dt();
        for (j, t) in g.nodes().enumerate() {
            assert!(p.x()[j].abs() <= 2.0 * dt, "x at node {j}");
            assert!((p.k()[j] - t).abs() <= 2.0 * dt, "k at node {j}");
        }
    }

    #[test]
    fn decay_then_reflection_matches_closed_form() {
        // b(x) = -x, xi = 1, h(z) = z - 0.5: free decay until
        // t = ln 2, then the reflection holds X at 0.5
        // and K_t = 0.5 max(0, t - ln 2).
        let b = CoefficientFn::Affine {
            intercept: 0.0,
            slope: -1.0,
        };
        let h = ConstraintFn::from_kind_params("shifted-identity", &[-0.5]).unwrap();
        let s = spec(1.0, b, constant(0.0), h, 2.0);
        let g = TimeGrid::new(2.0, 4000).unwrap();
        let p = solve_mr_ode(&s, &g).unwrap();
        let dt = g.dt();
        let ln2 = std::f64::consts::LN_2;
        for (j, t) in g.nodes().enumerate() {
            let x_exact = (-t).exp().max(0.5);
            let k_exact = 0.5 * (t - ln2).max(0.0);
            assert!((p.x()[j] - x_exact).abs() <= 5.0 * dt, "x at t = {t}");
            assert!((p.k()[j] - k_exact).abs() <= 5.0 * dt, "k at t = {t}");
        }
    }

    #[test]
    fn skeleton_with_zero_control_reproduces_mr_ode() {
        let b = CoefficientFn::SinAffine {
            linear: -0.8,
            sine: 0.3,
        };
        let s = spec(0.4, b, constant(1.0), ConstraintFn::Identity, 1.5);
        let g = TimeGrid::new(1.5, 600).unwrap();
        let ode = solve_mr_ode(&s, &g).unwrap();
        let sk = solve_skeleton(&s, &g, &ControlPath::zero(g.clone()), ode.k()).unwrap();
        // Same Euler recursion on both sides, so agreement is exact.
        for j in 0..g.n_nodes() {
            assert_eq!(sk.x()[j].to_bits(), ode.x()[j].to_bits(), "node {j}");
        }
    }

    #[test]
    fn constant_control_integrates_exactly() {
        let h = ConstraintFn::ShiftedIdentity { shift: 1.0 };
        let s = spec(0.0, constant(0.0), constant(1.0), h, 1.0);
        let g = TimeGrid::new(1.0, 250).unwrap();
        let phi = ControlPath::constant(g.clone(), 0.8).unwrap();
        let k0 = vec![0.0; g.n_nodes()];
        let p = solve_skeleton(&s, &g, &phi, &k0).unwrap();
        for (j, t) in g.nodes().enumerate() {
            assert!((p.x()[j] - 0.8 * t).abs() <= 1e-12, "node {j}");
        }
    }

    #[test]
    fn frozen_reflection_cancels_drift() {
        let s = spec(0.0, constant(-1.0), constant(1.0), ConstraintFn::Identity, 1.0);
        let g = TimeGrid::new(1.0, 500).unwrap();
        let k0: Vec<f64> = g.nodes().collect();
        let p = solve_skeleton(&s, &g, &ControlPath::zero(g.clone()), &k0).unwrap();
        for v in p.x() {
            assert!(v.abs() <= 1e-12);
        }
    }

    #[test]
    fn short_skeleton_closed_forms() {
        let h = ConstraintFn::ShiftedIdentity { shift: 2.0 };
        let s = spec(0.3, constant(0.0), constant(1.0), h.clone(), 1.0);
        let g = TimeGrid::unit(400).unwrap();
        let still = solve_short_skeleton(&s, &g, &ControlPath::zero(g.clone())).unwrap();
        assert!(still.x().iter().all(|&v| v == 0.3));

        let moving = solve_short_skeleton(&s, &g, &ControlPath::constant(g.clone(), 0.6).unwrap())
            .unwrap();
        for (j, t) in g.nodes().enumerate() {
            assert!((moving.x()[j] - (0.3 + 0.6 * t)).abs() <= 1e-12);
        }

        // sigma(x) = x, xi = 1, phi = c: the exponential ODE oracle.
        let sigma = CoefficientFn::Affine {
            intercept: 0.0,
            slope: 1.0,
        };
        let s = spec(1.0, constant(0.0), sigma, h, 1.0);
        let c = 0.9;
        let p = solve_short_skeleton(&s, &g, &ControlPath::constant(g.clone(), c).unwrap())
            .unwrap();
        let dt = g.dt();
        for (j, t) in g.nodes().enumerate() {
            assert!(
                (p.x()[j] - (c * t).exp()).abs() <= 3.0 * (c * 1.0f64).exp() * dt,
                "node {j}"
            );
        }
    }

    #[test]
    fn short_skeleton_rejects_non_unit_grids() {
        let s = spec(0.0, constant(0.0), constant(1.0), ConstraintFn::ShiftedIdentity { shift: 1.0 }, 2.0);
        let g = TimeGrid::new(2.0, 100).unwrap();
        let phi = ControlPath::zero(g.clone());
        assert!(matches!(
            solve_short_skeleton(&s, &g, &phi),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn grid_refinement_halves_the_error() {
        // Exponential decay against the ODE oracle: the Euler error should
        // shrink by roughly 2x when dt halves.
        let b = CoefficientFn::Affine {
            intercept: 0.0,
            slope: -1.0,
        };
        let s = spec(1.0, b, constant(0.0), ConstraintFn::ShiftedIdentity { shift: 3.0 }, 1.0);
        let mut errs = Vec::new();
        for n in [200usize, 400, 800] {
            let g = TimeGrid::new(1.0, n).unwrap();
            let p = solve_mr_ode(&s, &g).unwrap();
            let err = g
                .nodes()
                .enumerate()
                .map(|(j, t)| (p.x()[j] - (-t).exp()).abs())
                .fold(0.0f64, f64::max);
            errs.push(err);
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn control_energy_accounting() {
        let g = TimeGrid::new(2.0, 100).unwrap();
        let phi = ControlPath::constant(g.clone(), 3.0).unwrap();
        assert!((phi.energy() - 0.5 * 9.0 * 2.0).abs() < 1e-12);
        assert!(phi.clone().with_bound(9.0).is_ok());
        assert!(phi.with_bound(8.9).is_err());
    }
}
