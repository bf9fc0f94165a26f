//! Empirical-measure kernel: the shifted constraint mean `H`, the minimal
//! nonnegative shift `G0` and the Wasserstein-1 distance, each on sorted
//! equal-weight atom clouds.
//!
//! `G0` is found by bisection on the bracket `[0, -H(0)/m]`, which is valid
//! because `x -> H(x, nu)` inherits the constraint's slope bounds
//! `m <= H' <= M`. All cross-atom sums run in ascending atom order so the
//! result is independent of how callers parallelize around this module.

use crate::error::{Error, Result};
use crate::model::ConstraintFn;

/// Default tolerance for `g0`, in units of `H`. Far below the statistical
/// error of any particle run.
pub const DEFAULT_G0_TOL: f64 = 1e-10;

/// Equal-weight atom cloud standing in for a law on the line.
/// Atoms are kept sorted nondecreasing.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    atoms: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Sorts the samples; rejects empty or non-finite clouds.
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("empty atom cloud".into()));
        }
        if samples.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidInput("non-finite atom in cloud".into()));
        }
        samples.sort_unstable_by(f64::total_cmp);
        Ok(Self { atoms: samples })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Mean of the atoms, summed in ascending order.
    pub fn mean(&self) -> f64 {
        self.atoms.iter().sum::<f64>() / self.atoms.len() as f64
    }

    /// The cloud shifted by `c`.
    pub fn translate(&self, c: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|a| a + c).collect(),
        }
    }
}

/// `H(x, nu) = (1/n) sum_i h(x + z_i)`, summed in ascending atom order.
///
/// The per-family loops below compute exactly that sum; the match sits
/// outside the loop because `g0` evaluates `H` dozens of times per call.
pub fn h_mean(h: &ConstraintFn, x: f64, nu: &EmpiricalMeasure) -> f64 {
    h_mean_sorted(h, x, nu.atoms())
}

/// `h_mean` on a pre-sorted atom slice; the particle scheme calls this on
/// its reusable column buffer.
pub(crate) fn h_mean_sorted(h: &ConstraintFn, x: f64, atoms: &[f64]) -> f64 {
    let n = atoms.len() as f64;
    let sum = match *h {
        ConstraintFn::Identity => atoms.iter().map(|z| x + z).sum::<f64>(),
        ConstraintFn::ShiftedIdentity { shift } => atoms.iter().map(|z| x + z + shift).sum::<f64>(),
        ConstraintFn::Affine { intercept, slope } => atoms
            .iter()
            .map(|z| intercept + slope * (x + z))
            .sum::<f64>(),
        ConstraintFn::SinAffineMonotone { linear, sine } => atoms
            .iter()
            .map(|z| {
                let v = x + z;
                linear * v + sine * v.sin()
            })
            .sum::<f64>(),
    };
    sum / n
}

/// Evaluator for `x -> H(x, nu)` inside the bisection. For the families
/// whose `H` depends on the cloud only through its mean, the ascending sum
/// is taken once up front and each iterate costs O(1); the sine family
/// re-sums per iterate.
enum ShiftResponse<'a> {
    ThroughMean { h: &'a ConstraintFn, mean: f64 },
    Full { h: &'a ConstraintFn, atoms: &'a [f64] },
}

impl ShiftResponse<'_> {
    fn new<'a>(h: &'a ConstraintFn, atoms: &'a [f64]) -> ShiftResponse<'a> {
        match h {
            ConstraintFn::SinAffineMonotone { .. } => ShiftResponse::Full { h, atoms },
            _ => ShiftResponse::ThroughMean {
                h,
                mean: atoms.iter().sum::<f64>() / atoms.len() as f64,
            },
        }
    }

    fn eval(&self, x: f64) -> f64 {
        match self {
            ShiftResponse::ThroughMean { h, mean } => h.eval(x + mean),
            ShiftResponse::Full { h, atoms } => h_mean_sorted(h, x, atoms),
        }
    }
}

/// `G0(nu) = inf { x >= 0 : H(x, nu) >= 0 }`.
///
/// Returns 0 when `H(0, nu) >= 0`; otherwise bisects `[0, -H(0)/m]` until
/// `|H| <= tol * m / 2`, so the result is within `tol` of the true shift.
pub fn g0(h: &ConstraintFn, nu: &EmpiricalMeasure, tol: f64) -> Result<f64> {
    g0_sorted(h, nu.atoms(), tol)
}

pub(crate) fn g0_sorted(h: &ConstraintFn, atoms: &[f64], tol: f64) -> Result<f64> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "g0 tolerance must be positive, got {tol}"
        )));
    }
    let response = ShiftResponse::new(h, atoms);
    let h0 = response.eval(0.0);
    if h0 >= 0.0 {
        return Ok(0.0);
    }
    let m = h.lower_slope();
    let mut lo = 0.0_f64;
    let mut hi = -h0 / m;
    // H(hi) >= 0 holds mathematically; nudge outward if rounding clipped it.
    let mut expansions = 0;
    while response.eval(hi) < 0.0 {
        hi = hi * (1.0 + 1e-12) + 1e-300;
        expansions += 1;
        if expansions > 64 {
            return Err(Error::BracketFailure { at: hi });
        }
    }
    let accept = 0.5 * tol * m;
    let width_floor = f64::EPSILON * (1.0 + hi);
    let mut mid = 0.5 * hi;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let hm = response.eval(mid);
        if hm.abs() <= accept {
            return Ok(mid);
        }
        if hm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= width_floor {
            break;
        }
    }
    Ok(mid.max(0.0))
}

/// Exact Wasserstein-1 distance between equal-size, equal-weight clouds:
/// the mean absolute difference of sorted atoms.
pub fn w1(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::SizeMismatch {
            left: mu.len(),
            right: nu.len(),
        });
    }
    let sum: f64 = mu
        .atoms()
        .iter()
        .zip(nu.atoms())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(sum / mu.len() as f64)
}
