use crate::error::{Error, Result};

/// Uniform time grid on `[0, T]` with `n_steps` Euler steps.
///
/// Nodes are `t_k = T * k / n_steps`, so `t_0 = 0` and `t_{n_steps} = T`
/// exactly, independent of rounding in `dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidInput(format!(
                "horizon must be finite and positive, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidInput("n_steps must be >= 1".into()));
        }
        Ok(Self { horizon, n_steps })
    }

    /// Grid on the unit interval, used by the short-time rescaling.
    pub fn unit(n_steps: usize) -> Result<Self> {
        Self::new(1.0, n_steps)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        debug_assert!(k <= self.n_steps);
        self.horizon * (k as f64 / self.n_steps as f64)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(|k| self.node(k))
    }

    /// True when the grid spans the unit interval (required by the
    /// short-time operations).
    pub fn is_unit(&self) -> bool {
        self.horizon == 1.0
    }
}
