//! Pathwise derivative machinery: the first-variation process `Y` and its
//! inverse `Z` simulated alongside a single state path, the derivative
//! kernel `D_r X_t` assembled either by the product formula
//! `Y_t Y_r^{-1} sigma(X_r)` or by a direct Euler solve of the linear
//! equation from `r`, the derivative covariance quadrature, a
//! Cameron-Martin bump check, and a Gaussian kernel density diagnostic for
//! terminal laws.
//!
//! The reflection path is an input here: it is a functional of the law, so
//! a noise perturbation of one path does not move it. Callers freeze it
//! from an ensemble run (or from the mean-reflected ODE for drift-only
//! instances) and the bump check re-solves with that same frozen path.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::ModelSpec;
use crate::noise::NoiseStream;
use crate::particle::check_reflection_path;
use crate::skeleton::ControlPath;
use crate::stats::standard_normal_pdf;

/// One state path plus its tangent pair and the noise that drove them.
#[derive(Clone, Debug)]
pub struct TangentBundle {
    grid: TimeGrid,
    epsilon: f64,
    seed: u64,
    x_path: Vec<f64>,
    y_path: Vec<f64>,
    z_path: Vec<f64>,
    /// Brownian increments, one per step.
    increments: Vec<f64>,
    k_path: Vec<f64>,
}

impl TangentBundle {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn x(&self) -> &[f64] {
        &self.x_path
    }

    pub fn y(&self) -> &[f64] {
        &self.y_path
    }

    pub fn z(&self) -> &[f64] {
        &self.z_path
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn k_path(&self) -> &[f64] {
        &self.k_path
    }

    /// Largest deviation of `Y Z` from 1 over the grid.
    pub fn max_inverse_defect(&self) -> f64 {
        self.y_path
            .iter()
            .zip(&self.z_path)
            .map(|(y, z)| (y * z - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Dense upper-triangular derivative kernel `d[r][t] = D_{t_r} X_{t_t}`.
#[derive(Clone, Debug)]
pub struct MalliavinKernel {
    grid: TimeGrid,
    rows: Vec<Vec<f64>>,
}

impl MalliavinKernel {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn value(&self, r: usize, t: usize) -> f64 {
        self.rows[r][t]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.rows[r]
    }
}

/// Simulates one path of the state together with the tangent pair:
///
/// * `Y` solves the linearized dynamics with `Y_0 = 1`;
/// * `Z` solves the inverse dynamics with `Z_0 = 1`, sharing the noise.
///
/// `epsilon = 1` is the dynamics the derivative identities refer to; the
/// registry supplies the coefficient derivatives in closed form.
pub fn tangent_simulate(
    spec: &ModelSpec,
    grid: &TimeGrid,
    epsilon: f64,
    seed: u64,
    k_frozen: &[f64],
) -> Result<TangentBundle> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "epsilon must be finite and >= 0, got {epsilon}"
        )));
    }
    check_reflection_path(k_frozen, grid)?;
    let n = grid.n_steps();
    let dt = grid.dt();
    let sqrt_eps = epsilon.sqrt();
    let noise = NoiseStream::new(seed);
    let sqrt_dt = dt.sqrt();

    let mut x_path = Vec::with_capacity(n + 1);
    let mut y_path = Vec::with_capacity(n + 1);
    let mut z_path = Vec::with_capacity(n + 1);
    let mut increments = Vec::with_capacity(n);

    let mut u = spec.xi;
    let mut y = 1.0;
    let mut z = 1.0;
    x_path.push(u + k_frozen[0]);
    y_path.push(y);
    z_path.push(z);

    for step in 0..n {
        let x = u + k_frozen[step];
        let db = sqrt_dt * noise.standard_normal(0, step as u64);
        increments.push(db);
        let bp = spec.b.derivative(x);
        let sp = spec.sigma.derivative(x);
        u += spec.b.eval(x) * dt + sqrt_eps * spec.sigma.eval(x) * db;
        y *= 1.0 + bp * dt + sqrt_eps * sp * db;
        z *= 1.0 - sqrt_eps * sp * db - (bp - epsilon * sp * sp) * dt;
        if !(u.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::NonFinite { step });
        }
        x_path.push(u + k_frozen[step + 1]);
        y_path.push(y);
        z_path.push(z);
    }

    Ok(TangentBundle {
        grid: grid.clone(),
        epsilon,
        seed,
        x_path,
        y_path,
        z_path,
        increments,
        k_path: k_frozen.to_vec(),
    })
}

fn diffusion_at(spec: &ModelSpec, bundle: &TangentBundle, node: usize) -> f64 {
    bundle.epsilon.sqrt() * spec.sigma.eval(bundle.x_path[node])
}

/// Kernel by the product formula: `d[r][t] = Y_t Z_r sigma(X_r)` above the
/// diagonal (times `sqrt(eps)` for the scaled dynamics). The diagonal is
/// pinned to `sigma(X_r)` exactly — the Euler defect of `Y_r Z_r` stays out
/// of it — and everything below is structurally zero.
pub fn kernel_product(spec: &ModelSpec, bundle: &TangentBundle) -> MalliavinKernel {
    let nodes = bundle.grid.n_nodes();
    let rows: Vec<Vec<f64>> = (0..nodes)
        .map(|r| {
            let s = diffusion_at(spec, bundle, r);
            let zr = bundle.z_path[r];
            let mut row = vec![0.0; nodes];
            row[r] = s;
            for t in (r + 1)..nodes {
                row[t] = bundle.y_path[t] * zr * s;
            }
            row
        })
        .collect();
    MalliavinKernel {
        grid: bundle.grid.clone(),
        rows,
    }
}

/// Kernel row by a direct Euler solve of the linear derivative equation
/// from `t_r`, reusing the bundle's noise increments. Returns
/// `{D_{t_r} X_{t_k}}` for `k >= r`.
pub fn kernel_direct(spec: &ModelSpec, bundle: &TangentBundle, r_index: usize) -> Result<Vec<f64>> {
    let n = bundle.grid.n_steps();
    if r_index > n {
        return Err(Error::InvalidInput(format!(
            "r_index {r_index} outside grid with {n} steps"
        )));
    }
    let dt = bundle.grid.dt();
    let sqrt_eps = bundle.epsilon.sqrt();
    let mut v = diffusion_at(spec, bundle, r_index);
    let mut out = Vec::with_capacity(n + 1 - r_index);
    out.push(v);
    for step in r_index..n {
        let x = bundle.x_path[step];
        v *= 1.0 + spec.b.derivative(x) * dt + sqrt_eps * spec.sigma.derivative(x) * bundle.increments[step];
        out.push(v);
    }
    Ok(out)
}

/// Left-endpoint quadrature of `int_0^{t} |D_r X_t|^2 dr`.
pub fn malliavin_covariance(kernel: &MalliavinKernel, t_index: usize) -> f64 {
    let dt = kernel.grid.dt();
    (0..t_index)
        .map(|r| {
            let d = kernel.rows[r][t_index];
            d * d
        })
        .sum::<f64>()
        * dt
}

/// Outcome of [`cameron_martin_check`]: the finite-difference directional
/// derivative of the terminal state, the kernel pairing
/// `sum_j D_{t_j} X_T k(t_j) dt`, and their gap.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CameronMartinReport {
    pub fd_derivative: f64,
    pub kernel_pairing: f64,
    pub abs_error: f64,
}

/// Directional derivative check: bump the Brownian increments by
/// `bump * k(t) dt` while keeping the reflection path frozen, and compare
/// the finite difference of `X_T` with the kernel pairing.
pub fn cameron_martin_check(
    spec: &ModelSpec,
    bundle: &TangentBundle,
    direction: &ControlPath,
    bump: f64,
) -> Result<CameronMartinReport> {
    if !(bump > 0.0 && bump.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "bump must be positive, got {bump}"
        )));
    }
    if direction.grid() != &bundle.grid {
        return Err(Error::GridMismatch(
            "direction grid differs from bundle grid".into(),
        ));
    }
    let n = bundle.grid.n_steps();
    let dt = bundle.grid.dt();
    let sqrt_eps = bundle.epsilon.sqrt();

    // Re-solve the state path with shifted increments and the same frozen K.
    let mut u = spec.xi;
    for step in 0..n {
        let x = u + bundle.k_path[step];
        let db = bundle.increments[step] + bump * direction.values()[step] * dt;
        u += spec.b.eval(x) * dt + sqrt_eps * spec.sigma.eval(x) * db;
        if !u.is_finite() {
            return Err(Error::NonFinite { step });
        }
    }
    let bumped_terminal = u + bundle.k_path[n];
    let fd_derivative = (bumped_terminal - bundle.x_path[n]) / bump;

    let y_t = bundle.y_path[n];
    let kernel_pairing: f64 = (0..n)
        .map(|j| {
            y_t * bundle.z_path[j] * diffusion_at(spec, bundle, j) * direction.values()[j] * dt
        })
        .sum();

    Ok(CameronMartinReport {
        fd_derivative,
        kernel_pairing,
        abs_error: (fd_derivative - kernel_pairing).abs(),
    })
}

/// Number of evaluation points used by [`density_estimate`].
pub const DENSITY_GRID_POINTS: usize = 512;

/// Gaussian kernel density on a uniform grid.
#[derive(Clone, Debug)]
pub struct DensityEstimate {
    pub xs: Vec<f64>,
    pub pdf: Vec<f64>,
}

impl DensityEstimate {
    /// Trapezoid integral over the evaluation grid.
    pub fn integral(&self) -> f64 {
        let mut total = 0.0;
        for w in self.xs.windows(2).zip(self.pdf.windows(2)) {
            let (x, f) = w;
            total += 0.5 * (f[0] + f[1]) * (x[1] - x[0]);
        }
        total
    }

    /// Largest absolute gap against a reference density on the grid.
    pub fn sup_distance(&self, reference: impl Fn(f64) -> f64) -> f64 {
        self.xs
            .iter()
            .zip(&self.pdf)
            .map(|(x, f)| (f - reference(*x)).abs())
            .fold(0.0, f64::max)
    }
}

/// Gaussian kernel density estimate of the sample law on a 512-point grid
/// covering the samples with a four-bandwidth margin (so the trapezoid
/// integral captures the kernel tails to well under 1e-3).
pub fn density_estimate(samples: &[f64], bandwidth: f64) -> Result<DensityEstimate> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "kernel density needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("non-finite sample".into()));
    }
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min) - 4.0 * bandwidth;
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 4.0 * bandwidth;
    let m = DENSITY_GRID_POINTS;
    let xs: Vec<f64> = (0..m)
        .map(|i| lo + (hi - lo) * (i as f64 / (m - 1) as f64))
        .collect();
    let scale = 1.0 / (samples.len() as f64 * bandwidth);
    let pdf: Vec<f64> = xs
        .par_iter()
        .map(|&x| {
            samples
                .iter()
                .map(|s| standard_normal_pdf((x - s) / bandwidth))
                .sum::<f64>()
                * scale
        })
        .collect();
    Ok(DensityEstimate { xs, pdf })
}
