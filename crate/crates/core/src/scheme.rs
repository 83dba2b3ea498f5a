//! The memory-gap solver.
//!
//! `x^k` is integrated forward over gap intervals `[n/k, (n+1)/k]`, each split
//! into `r` sub-steps. At sub-step node `u_j` both functionals are evaluated
//! on the segment anchored one gap earlier, `x_{u_j - 1/k}`, which is fully
//! known before the interval starts; the drift is a left-endpoint Riemann sum
//! and the diffusion a left-endpoint Riemann-Stieltjes sum against the
//! aggregated Brownian increments.

use log::warn;

use crate::drivers::BrownianPath;
use crate::error::{Error, Result};
use crate::models::SfdeModel;
use crate::paths::{as_steps, extend_initial, InitialFunction, PathView, SamplePath, TimeGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// `F(u, x_{u-1/k})`, `G(u, x_{u-1/k})`.
    Standard,
    /// `F(u - 1/k, x_{u-1/k})`, `G(u - 1/k, x_{u-1/k})`.
    Alternative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeConfig {
    /// Gap parameter; the gap is `1/k`.
    pub k: usize,
    /// Sub-steps per gap interval.
    pub substeps: usize,
    pub horizon: f64,
    pub variant: Variant,
}

impl SchemeConfig {
    pub fn new(k: usize, substeps: usize, horizon: f64) -> Self {
        Self {
            k,
            substeps,
            horizon,
            variant: Variant::Standard,
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    /// Sub-step nodes per unit of time, `k * r`.
    pub fn steps_per_unit(&self) -> usize {
        self.k * self.substeps
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("gap parameter k must be at least 1"));
        }
        if self.substeps == 0 {
            return Err(Error::config("substeps must be at least 1"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if as_steps(self.horizon, self.k).is_none() {
            return Err(Error::config(format!(
                "horizon {} is not a multiple of the gap 1/{}",
                self.horizon, self.k
            )));
        }
        Ok(())
    }

    /// The sub-step grid of this run for a model with delay `delay`.
    pub fn grid(&self, delay: f64) -> Result<TimeGrid> {
        self.validate()?;
        TimeGrid::new(delay, self.horizon, self.steps_per_unit())
    }
}

/// Integrates `x^k` with the standard scheme.
pub fn solve_memory_gap(
    model: &dyn SfdeModel,
    config: &SchemeConfig,
    brownian: &BrownianPath,
    theta: &InitialFunction,
) -> Result<SamplePath> {
    integrate(model, &config.with_variant(Variant::Standard), brownian, theta)
}

/// Integrates `x^k` with both functionals evaluated at the lagged time
/// `u - 1/k`.
pub fn solve_alternative(
    model: &dyn SfdeModel,
    config: &SchemeConfig,
    brownian: &BrownianPath,
    theta: &InitialFunction,
) -> Result<SamplePath> {
    if !model.time_regular() {
        warn!(
            "model {} does not declare time regularity; the lagged-time scheme assumes it",
            model.name()
        );
    }
    integrate(model, &config.with_variant(Variant::Alternative), brownian, theta)
}

/// The `L = 0` case: segments collapse to the lagged point `x(u - 1/k)`.
pub fn reduce_sode(
    model: &dyn SfdeModel,
    config: &SchemeConfig,
    brownian: &BrownianPath,
    theta: &InitialFunction,
) -> Result<SamplePath> {
    if model.delay() != 0.0 {
        return Err(Error::config(format!(
            "reduce_sode needs a model without memory, got delay {}",
            model.delay()
        )));
    }
    integrate(model, config, brownian, theta)
}

/// Runs whichever variant `config` names.
pub fn solve(
    model: &dyn SfdeModel,
    config: &SchemeConfig,
    brownian: &BrownianPath,
    theta: &InitialFunction,
) -> Result<SamplePath> {
    match config.variant {
        Variant::Standard => solve_memory_gap(model, config, brownian, theta),
        Variant::Alternative => solve_alternative(model, config, brownian, theta),
    }
}

fn integrate(
    model: &dyn SfdeModel,
    config: &SchemeConfig,
    brownian: &BrownianPath,
    theta: &InitialFunction,
) -> Result<SamplePath> {
    let d = model.state_dim();
    let m = model.noise_dim();
    let grid = config.grid(model.delay())?;
    let spu = grid.steps_per_unit();
    if theta.dim() != d {
        return Err(Error::config(format!(
            "initial function has dimension {}, model has {d}",
            theta.dim()
        )));
    }
    if brownian.dims() != m {
        return Err(Error::config(format!(
            "Brownian path has {} dimensions, model has {m}",
            brownian.dims()
        )));
    }
    if !brownian.steps_per_unit().is_multiple_of(spu) {
        return Err(Error::config(format!(
            "sub-step grid ({spu}/unit) is not nested in the Brownian grid ({}/unit)",
            brownian.steps_per_unit()
        )));
    }
    if brownian.horizon() < config.horizon {
        return Err(Error::config(format!(
            "Brownian path ends at {}, before the horizon {}",
            brownian.horizon(),
            config.horizon
        )));
    }
    theta.validate()?;
    let hat = extend_initial(theta, model.delay())?;

    let factor = brownian.steps_per_unit() / spu;
    let lag = config.substeps;
    let h = grid.dt();
    let gap = 1.0 / config.k as f64;
    let zero = grid.zero_index();

    let mut values = vec![0.0; grid.n_nodes() * d];
    for (j, chunk) in values[..(zero + 1) * d].chunks_mut(d).enumerate() {
        hat.eval_into(grid.time(j), chunk)?;
    }

    let mut f = vec![0.0; d];
    let mut g = vec![0.0; d * m];
    let mut dw = vec![0.0; m];
    for j in zero..grid.n_nodes() - 1 {
        let u = grid.time(j);
        let anchor = j - lag;
        let t_eval = match config.variant {
            Variant::Standard => u,
            Variant::Alternative => u - gap,
        };
        {
            // Only nodes up to the anchor are visible to the functionals.
            let known = PathView::new(&grid, d, &values[..(anchor + 1) * d]);
            let seg = known.segment(grid.time(anchor));
            model.drift(t_eval, &seg, &mut f);
            model.diffusion(t_eval, &seg, &mut g);
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::ModelEvaluation {
                time: t_eval,
                what: "drift",
            });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::ModelEvaluation {
                time: t_eval,
                what: "diffusion",
            });
        }
        brownian.sum_steps((j - zero) * factor, factor, &mut dw);
        let (done, rest) = values.split_at_mut((j + 1) * d);
        let current = &done[j * d..];
        let next = &mut rest[..d];
        for i in 0..d {
            let noise: f64 = g[i * m..(i + 1) * m].iter().zip(&dw).map(|(a, b)| a * b).sum();
            next[i] = current[i] + f[i] * h + noise;
        }
    }
    SamplePath::new(grid, d, values)
}
