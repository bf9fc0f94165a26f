//! Problem instances: drift and diffusion coefficients, the constraint
//! function with its slope bounds, horizon and initial datum.
//!
//! Coefficients come from a closed parametric registry rather than an
//! expression parser, so every instance carries exact Lipschitz constants,
//! exact slope bounds `m <= h' <= M` and an exact constraint root. The
//! randomized `validate` pass spot-checks those declared constants on
//! sampled points and reports violations as data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseStream;

const VALIDATE_PAIRS: usize = 10_000;
const VALIDATE_SEED: u64 = 0x5EED_CAFE;

/// Drift / diffusion coefficient from the parametric registry.
#[derive(Clone, Debug, PartialEq)]
pub enum CoefficientFn {
    /// `f(x) = c`
    Constant { value: f64 },
    /// `f(x) = a + b x`
    Affine { intercept: f64, slope: f64 },
    /// `f(x) = a x + c sin x`
    SinAffine { linear: f64, sine: f64 },
    /// `f(x) = a tanh(b x)`
    SaturatedLinear { scale: f64, rate: f64 },
}

impl CoefficientFn {
    pub fn from_kind_params(kind: &str, params: &[f64]) -> Result<Self> {
        let want = |n: usize| {
            if params.len() != n {
                Err(Error::InvalidInput(format!(
                    "coefficient kind '{kind}' takes {n} params, got {}",
                    params.len()
                )))
            } else if params.iter().any(|p| !p.is_finite()) {
                Err(Error::InvalidInput(format!(
                    "coefficient kind '{kind}' has non-finite params"
                )))
            } else {
                Ok(())
            }
        };
        match kind {
            "constant" => {
                want(1)?;
                Ok(Self::Constant { value: params[0] })
            }
            "affine" => {
                want(2)?;
                Ok(Self::Affine {
                    intercept: params[0],
                    slope: params[1],
                })
            }
            "sin-affine" => {
                want(2)?;
                Ok(Self::SinAffine {
                    linear: params[0],
                    sine: params[1],
                })
            }
            "saturated-linear" => {
                want(2)?;
                Ok(Self::SaturatedLinear {
                    scale: params[0],
                    rate: params[1],
                })
            }
            other => Err(Error::InvalidInput(format!(
                "unknown coefficient kind '{other}'"
            ))),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::Affine { .. } => "affine",
            Self::SinAffine { .. } => "sin-affine",
            Self::SaturatedLinear { .. } => "saturated-linear",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Self::Constant { value } => vec![value],
            Self::Affine { intercept, slope } => vec![intercept, slope],
            Self::SinAffine { linear, sine } => vec![linear, sine],
            Self::SaturatedLinear { scale, rate } => vec![scale, rate],
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Affine { intercept, slope } => intercept + slope * x,
            Self::SinAffine { linear, sine } => linear * x + sine * x.sin(),
            Self::SaturatedLinear { scale, rate } => scale * (rate * x).tanh(),
        }
    }

    /// Closed-form derivative; exact per registry family.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::Affine { slope, .. } => slope,
            Self::SinAffine { linear, sine } => linear + sine * x.cos(),
            Self::SaturatedLinear { scale, rate } => {
                let c = (rate * x).cosh();
                scale * rate / (c * c)
            }
        }
    }

    /// Exact global Lipschitz constant of the family.
    pub fn lipschitz_bound(&self) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::Affine { slope, .. } => slope.abs(),
            Self::SinAffine { linear, sine } => linear.abs() + sine.abs(),
            Self::SaturatedLinear { scale, rate } => (scale * rate).abs(),
        }
    }

    /// Exact global lower bound on `|f|`, used to derive the default
    /// `sigma_floor`. Zero whenever the family can vanish.
    pub fn abs_floor(&self) -> f64 {
        match *self {
            Self::Constant { value } => value.abs(),
            Self::Affine { intercept, slope } => {
                if slope == 0.0 {
                    intercept.abs()
                } else {
                    0.0
                }
            }
            // Both remaining families vanish at the origin.
            Self::SinAffine { .. } | Self::SaturatedLinear { .. } => 0.0,
        }
    }
}

/// Constraint function `h`: strictly increasing with exact slope bounds
/// `m |x-y| <= |h(x)-h(y)| <= M |x-y|` and a unique root.
#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintFn {
    /// `h(z) = z`
    Identity,
    /// `h(z) = z + c`
    ShiftedIdentity { shift: f64 },
    /// `h(z) = a + b z`, `b > 0`
    Affine { intercept: f64, slope: f64 },
    /// `h(z) = a z + c sin z`, `a > |c|`
    SinAffineMonotone { linear: f64, sine: f64 },
}

impl ConstraintFn {
    pub fn from_kind_params(kind: &str, params: &[f64]) -> Result<Self> {
        let want = |n: usize| {
            if params.len() != n {
                Err(Error::InvalidInput(format!(
                    "constraint kind '{kind}' takes {n} params, got {}",
                    params.len()
                )))
            } else if params.iter().any(|p| !p.is_finite()) {
                Err(Error::InvalidInput(format!(
                    "constraint kind '{kind}' has non-finite params"
                )))
            } else {
                Ok(())
            }
        };
        match kind {
            "identity" => {
                want(0)?;
                Ok(Self::Identity)
            }
            "shifted-identity" => {
                want(1)?;
                Ok(Self::ShiftedIdentity { shift: params[0] })
            }
            "affine" => {
                want(2)?;
                if params[1] <= 0.0 {
                    return Err(Error::InvalidInput(
                        "affine constraint needs slope > 0 to be increasing".into(),
                    ));
                }
                Ok(Self::Affine {
                    intercept: params[0],
                    slope: params[1],
                })
            }
            "sin-affine-monotone" => {
                want(2)?;
                if params[0] <= params[1].abs() {
                    return Err(Error::InvalidInput(
                        "sin-affine-monotone needs linear > |sine| to be increasing".into(),
                    ));
                }
                Ok(Self::SinAffineMonotone {
                    linear: params[0],
                    sine: params[1],
                })
            }
            other => Err(Error::InvalidInput(format!(
                "unknown constraint kind '{other}'"
            ))),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::ShiftedIdentity { .. } => "shifted-identity",
            Self::Affine { .. } => "affine",
            Self::SinAffineMonotone { .. } => "sin-affine-monotone",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Self::Identity => vec![],
            Self::ShiftedIdentity { shift } => vec![shift],
            Self::Affine { intercept, slope } => vec![intercept, slope],
            Self::SinAffineMonotone { linear, sine } => vec![linear, sine],
        }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            Self::Identity => z,
            Self::ShiftedIdentity { shift } => z + shift,
            Self::Affine { intercept, slope } => intercept + slope * z,
            Self::SinAffineMonotone { linear, sine } => linear * z + sine * z.sin(),
        }
    }

    /// Exact lower slope bound `m > 0`.
    pub fn lower_slope(&self) -> f64 {
        match *self {
            Self::Identity | Self::ShiftedIdentity { .. } => 1.0,
            Self::Affine { slope, .. } => slope,
            Self::SinAffineMonotone { linear, sine } => linear - sine.abs(),
        }
    }

    /// Exact upper slope bound `M >= m`.
    pub fn upper_slope(&self) -> f64 {
        match *self {
            Self::Identity | Self::ShiftedIdentity { .. } => 1.0,
            Self::Affine { slope, .. } => slope,
            Self::SinAffineMonotone { linear, sine } => linear + sine.abs(),
        }
    }

    /// The unique `r*` with `h(r*) = 0`, exact per family.
    pub fn root(&self) -> f64 {
        match *self {
            Self::Identity => 0.0,
            Self::ShiftedIdentity { shift } => -shift,
            Self::Affine { intercept, slope } => -intercept / slope,
            // a z + c sin z vanishes only at the origin when a > |c|.
            Self::SinAffineMonotone { .. } => 0.0,
        }
    }
}

/// A full problem instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub xi: f64,
    pub horizon: f64,
    pub b: CoefficientFn,
    pub sigma: CoefficientFn,
    pub h: ConstraintFn,
    /// Declared lower bound on `|sigma|`; 0 when degeneracy is allowed.
    /// The simulator accepts 0, the exact rate evaluator rejects it.
    pub sigma_floor: f64,
}

impl ModelSpec {
    /// Build an instance; `sigma_floor` defaults to the registry's exact
    /// floor for the diffusion family.
    pub fn new(
        xi: f64,
        horizon: f64,
        b: CoefficientFn,
        sigma: CoefficientFn,
        h: ConstraintFn,
    ) -> Result<Self> {
        if !xi.is_finite() {
            return Err(Error::InvalidInput(format!("xi must be finite, got {xi}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidInput(format!(
                "horizon must be finite and positive, got {horizon}"
            )));
        }
        let sigma_floor = sigma.abs_floor();
        Ok(Self {
            xi,
            horizon,
            b,
            sigma,
            h,
            sigma_floor,
        })
    }

    pub fn with_sigma_floor(mut self, sigma_floor: f64) -> Result<Self> {
        if !(sigma_floor.is_finite() && sigma_floor >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "sigma_floor must be finite and >= 0, got {sigma_floor}"
            )));
        }
        self.sigma_floor = sigma_floor;
        Ok(self)
    }

    /// Randomized regularity audit. Violations are data, not failures:
    /// an empty report means every spot-check passed.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let rng = NoiseStream::new(VALIDATE_SEED);

        // Sampling box covering the initial datum and the constraint root.
        let root = self.h.root();
        let lo = self.xi.min(root) - 12.0;
        let hi = self.xi.max(root) + 12.0;

        let h_xi = self.h.eval(self.xi);
        if !(h_xi >= 0.0) {
            violations.push(Violation {
                invariant: "h(xi) >= 0".into(),
                witness: vec![self.xi, h_xi],
            });
        }

        for (label, f, stream) in [("b", &self.b, 0u64), ("sigma", &self.sigma, 1u64)] {
            let bound = f.lipschitz_bound();
            for i in 0..VALIDATE_PAIRS {
                let x = rng.uniform(stream, 2 * i as u64, lo, hi);
                let y = rng.uniform(stream, 2 * i as u64 + 1, lo, hi);
                let lhs = (f.eval(x) - f.eval(y)).abs();
                let rhs = bound * (x - y).abs();
                if lhs > rhs * (1.0 + 1e-12) + 1e-12 {
                    violations.push(Violation {
                        invariant: format!("|{label}(x) - {label}(y)| <= L |x - y|"),
                        witness: vec![x, y, lhs, rhs],
                    });
                    break;
                }
            }
        }

        let m = self.h.lower_slope();
        let em = self.h.upper_slope();
        for i in 0..VALIDATE_PAIRS {
            let mut x = rng.uniform(2, 2 * i as u64, lo, hi);
            let mut y = rng.uniform(2, 2 * i as u64 + 1, lo, hi);
            if x == y {
                continue;
            }
            if x > y {
                std::mem::swap(&mut x, &mut y);
            }
            let dh = self.h.eval(y) - self.h.eval(x);
            if dh <= 0.0 {
                violations.push(Violation {
                    invariant: "h strictly increasing".into(),
                    witness: vec![x, y, dh],
                });
                break;
            }
            let gap = y - x;
            if dh < m * gap * (1.0 - 1e-12) - 1e-12 || dh > em * gap * (1.0 + 1e-12) + 1e-12 {
                violations.push(Violation {
                    invariant: "m |x - y| <= |h(x) - h(y)| <= M |x - y|".into(),
                    witness: vec![x, y, dh / gap],
                });
                break;
            }
        }

        let at_root = self.h.eval(root);
        if at_root.abs() > 1e-12 {
            violations.push(Violation {
                invariant: "h(root) = 0 within 1e-12".into(),
                witness: vec![root, at_root],
            });
        }

        if self.sigma_floor > 0.0 {
            for i in 0..2048u64 {
                let x = lo + (hi - lo) * (i as f64 / 2047.0);
                let s = self.sigma.eval(x).abs();
                if s < self.sigma_floor * (1.0 - 1e-12) {
                    violations.push(Violation {
                        invariant: "|sigma(x)| >= sigma_floor on sampled grid".into(),
                        witness: vec![x, s, self.sigma_floor],
                    });
                    break;
                }
            }
        }

        ValidationReport { violations }
    }
}

/// A single failed invariant with the sample points that witnessed it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub invariant: String,
    pub witness: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "all invariants hold");
        }
        for v in &self.violations {
            writeln!(f, "violated: {} (witness {:?})", v.invariant, v.witness)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine(a: f64, b: f64) -> CoefficientFn {
        CoefficientFn::Affine {
            intercept: a,
            slope: b,
        }
    }

    #[test]
    fn registry_eval_is_exact() {
        assert_eq!(affine(1.0, 2.0).eval(3.0), 7.0);
        assert_eq!(ConstraintFn::Identity.eval(0.0), 0.0);
        assert_eq!(
            CoefficientFn::SinAffine {
                linear: 2.0,
                sine: 1.0
            }
            .eval(0.0),
            0.0
        );
        assert_eq!(CoefficientFn::Constant { value: -1.0 }.eval(123.0), -1.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let fns = [
            CoefficientFn::Constant { value: 2.0 },
            affine(1.0, -0.5),
            CoefficientFn::SinAffine {
                linear: -1.0,
                sine: 0.3,
            },
            CoefficientFn::SaturatedLinear {
                scale: 2.0,
                rate: 0.7,
            },
        ];
        let eps = 1e-6;
        for f in &fns {
            for &x in &[-2.3, 0.0, 0.4, 1.9] {
                let fd = (f.eval(x + eps) - f.eval(x - eps)) / (2.0 * eps);
                assert!(
                    (f.derivative(x) - fd).abs() < 1e-8,
                    "{} at {x}",
                    f.kind_name()
                );
            }
        }
    }

    #[test]
    fn sin_affine_monotone_slope_bounds() {
        // h(z) = 2z + sin z: derivative 2 + cos z over a fine grid stays in [1, 3].
        let h = ConstraintFn::from_kind_params("sin-affine-monotone", &[2.0, 1.0]).unwrap();
        assert_eq!(h.lower_slope(), 1.0);
        assert_eq!(h.upper_slope(), 3.0);
        let mut min_d = f64::INFINITY;
        let mut max_d = f64::NEG_INFINITY;
        for i in 0..100_000 {
            let z = -20.0 + 40.0 * (i as f64 / 99_999.0);
            let d = 2.0 + z.cos();
            min_d = min_d.min(d);
            max_d = max_d.max(d);
        }
        assert!(min_d >= h.lower_slope() - 1e-9);
        assert!(max_d <= h.upper_slope() + 1e-9);
    }

    #[test]
    fn validate_accepts_boundary_initial_condition() {
        // xi = 0 with identity h: h(xi) = 0 is still admissible.
        let spec = ModelSpec::new(
            0.0,
            1.0,
            CoefficientFn::Constant { value: 0.0 },
            CoefficientFn::Constant { value: 0.0 },
            ConstraintFn::Identity,
        )
        .unwrap();
        assert!(spec.validate().is_valid());
    }

    #[test]
    fn validate_flags_bad_initial_condition() {
        let spec = ModelSpec::new(
            -1.0,
            1.0,
            CoefficientFn::Constant { value: 0.0 },
            CoefficientFn::Constant { value: 1.0 },
            ConstraintFn::Identity,
        )
        .unwrap();
        let report = spec.validate();
        assert!(!report.is_valid());
        assert!(report.violations.iter().any(|v| v.invariant.contains("h(xi)")));
    }

    #[test]
    fn validate_flags_false_sigma_floor() {
        // sigma(x) = x vanishes inside the sampled box, so a positive floor is a lie.
        let spec = ModelSpec::new(
            1.0,
            1.0,
            CoefficientFn::Constant { value: 0.0 },
            affine(0.0, 1.0),
            ConstraintFn::Identity,
        )
        .unwrap()
        .with_sigma_floor(0.5)
        .unwrap();
        let report = spec.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| v.invariant.contains("sigma_floor")));
    }

    #[test]
    fn constraint_roots_recovered_by_bisection() {
        let cases = [
            ConstraintFn::Identity,
            ConstraintFn::ShiftedIdentity { shift: 1.0 },
            ConstraintFn::from_kind_params("affine", &[0.5, 2.0]).unwrap(),
            ConstraintFn::from_kind_params("sin-affine-monotone", &[2.0, 1.0]).unwrap(),
        ];
        for h in &cases {
            let root = h.root();
            let (mut lo, mut hi) = (root - 10.0, root + 10.0);
            assert!(h.eval(lo) < 0.0 && h.eval(hi) > 0.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if h.eval(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert!(
                (0.5 * (lo + hi) - root).abs() <= 1e-10,
                "{} root",
                h.kind_name()
            );
        }
    }

    #[test]
    fn bad_registry_params_are_rejected() {
        assert!(CoefficientFn::from_kind_params("affine", &[1.0]).is_err());
        assert!(CoefficientFn::from_kind_params("mystery", &[1.0]).is_err());
        assert!(ConstraintFn::from_kind_params("affine", &[1.0, -2.0]).is_err());
        assert!(ConstraintFn::from_kind_params("sin-affine-monotone", &[1.0, 1.5]).is_err());
        assert!(CoefficientFn::from_kind_params("constant", &[f64::NAN]).is_err());
    }

    #[test]
    fn default_sigma_floor_follows_the_registry() {
        let spec = ModelSpec::new(
            0.0,
            1.0,
            CoefficientFn::Constant { value: 0.0 },
            CoefficientFn::Constant { value: -2.0 },
            ConstraintFn::Identity,
        )
        .unwrap();
        assert_eq!(spec.sigma_floor, 2.0);
        let spec = ModelSpec::new(
            0.0,
            1.0,
            CoefficientFn::Constant { value: 0.0 },
            affine(1.0, 0.2),
            ConstraintFn::Identity,
        )
        .unwrap();
        assert_eq!(spec.sigma_floor, 0.0);
    }
}
