//! Monte Carlo verification of the memory-gap scheme.
//!
//! Every estimator draws path `i` from the seed triple
//! `(experiment_seed, i, stream)`, so compared runs share the same Brownian
//! increments and initial function (common random numbers). Per-path
//! statistics are reduced through [`Accumulator`]; in deterministic mode the
//! reduction is sequential in path order and results are bit-reproducible.

mod holder;
mod martingale;
mod moments;
mod oracle;
mod strong;

pub use holder::{holder_check, holder_estimate, HolderEstimate, HolderReport};
pub use martingale::{martingale_constant, martingale_inequality_check, Integrand, MartingaleCheck, MartingaleSetup};
pub use moments::{
    gronwall_ceiling, increment_moment_check, moment_bound_check, GammaSlope, IncrementMomentReport, MomentBoundReport,
    MomentEstimate,
};
pub use oracle::{dde_oracle, method_of_steps, richardson_method_of_steps, trapezoid_method_of_steps, MethodOfSteps};
pub use strong::{
    convergence_rate, gbm_exact, strong_error, strong_errors, ExactSolution, RateFit, RateReport, Reference,
    StrongErrorEstimate,
};

use rayon::prelude::*;

use crate::drivers::{generate_brownian, BrownianPath, SeedSpec, StreamTag};
use crate::error::{Error, Result};
use crate::models::SfdeModel;
use crate::paths::{InitialFunction, SamplePath, TimeGrid};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// How Monte Carlo paths are scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Exec {
    pub workers: usize,
    /// Sequential reduction in path order, independent of `workers`.
    pub deterministic: bool,
}

impl Default for Exec {
    fn default() -> Self {
        Self {
            workers: 1,
            deterministic: true,
        }
    }
}

/// Sample count, horizon and seed shared by the estimators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McOptions {
    pub samples: usize,
    pub horizon: f64,
    pub seed: u64,
    pub exec: Exec,
}

impl McOptions {
    pub fn new(samples: usize, horizon: f64, seed: u64) -> Self {
        Self {
            samples,
            horizon,
            seed,
            exec: Exec::default(),
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }
}

/// How many sub-steps each gap interval gets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Substeps {
    /// The same `r` for every `k`; the sub-step shrinks with the gap.
    Fixed(usize),
    /// `k * r` held at this many steps per unit, so every run integrates on
    /// the same fine grid and only the gap changes.
    FineGrid(usize),
}

impl Substeps {
    pub fn for_k(&self, k: usize) -> Result<usize> {
        match *self {
            Substeps::Fixed(r) if r >= 1 => Ok(r),
            Substeps::FineGrid(n) if k >= 1 && n % k == 0 && n >= k => Ok(n / k),
            Substeps::Fixed(_) => Err(Error::config("substeps must be at least 1")),
            Substeps::FineGrid(n) => Err(Error::config(format!(
                "fine grid {n}/unit is not a multiple of k = {k}"
            ))),
        }
    }
}

/// Running `(count, sum, sum of squares)` of one statistic.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Accumulator {
    pub count: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(mut self, other: Accumulator) -> Accumulator {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    /// Unbiased sample variance, clamped at zero.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    /// 95% CLT half-width of the mean.
    pub fn half_width(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        Z95 * (self.variance() / self.count as f64).sqrt()
    }
}

fn merge_all(a: Vec<Accumulator>, b: Vec<Accumulator>) -> Vec<Accumulator> {
    a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect()
}

/// Runs `per_path` for path indices `0..samples` and accumulates the `slots`
/// statistics it returns.
pub(crate) fn monte_carlo<F>(samples: usize, exec: Exec, slots: usize, per_path: F) -> Result<Vec<Accumulator>>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    if samples == 0 {
        return Err(Error::config("Monte Carlo needs at least one sample"));
    }
    let empty = || vec![Accumulator::default(); slots];
    let absorb = |mut acc: Vec<Accumulator>, values: Vec<f64>| {
        debug_assert_eq!(values.len(), slots);
        acc.iter_mut().zip(values).for_each(|(a, v)| a.push(v));
        acc
    };
    if exec.deterministic || exec.workers <= 1 {
        let mut acc = empty();
        for i in 0..samples as u64 {
            acc = absorb(acc, per_path(i)?);
        }
        return Ok(acc);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(exec.workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start {} workers: {e}", exec.workers)))?;
    pool.install(|| {
        (0..samples as u64)
            .into_par_iter()
            .try_fold(empty, |acc, i| per_path(i).map(|v| absorb(acc, v)))
            .try_reduce(empty, |a, b| Ok(merge_all(a, b)))
    })
}

/// The random inputs of path `index`: Brownian increments on `[0, T]` at
/// `fine_steps` per unit, and an initial function from the independent
/// initial stream.
pub fn path_inputs(
    model: &dyn SfdeModel,
    horizon: f64,
    fine_steps: usize,
    seed: u64,
    index: u64,
) -> Result<(BrownianPath, InitialFunction)> {
    let grid = TimeGrid::new(0.0, horizon, fine_steps)?;
    let brownian = generate_brownian(
        &grid,
        model.noise_dim(),
        SeedSpec::new(seed, index, StreamTag::Brownian),
    )?;
    let mut rng = SeedSpec::new(seed, index, StreamTag::Initial).rng();
    let theta = model.initial().sample(model.delay(), &mut rng)?;
    Ok((brownian, theta))
}

pub(crate) fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// `max_{t in [0, T] on the fine grid} |a(t) - b(t)|^2`. Both paths are
/// piecewise linear on grids nested in the fine grid, so this is the exact
/// sup of their difference.
pub fn sup_sq_diff(a: &SamplePath, b: &SamplePath, fine_steps: usize, horizon: f64) -> Result<f64> {
    let d = a.dim();
    let (mut xa, mut xb) = (vec![0.0; d], vec![0.0; d]);
    let n = (horizon * fine_steps as f64).round() as usize;
    let mut best: f64 = 0.0;
    for j in 0..=n {
        let t = j as f64 / fine_steps as f64;
        a.eval_into(t, &mut xa)?;
        b.eval_into(t, &mut xb)?;
        let s: f64 = xa.iter().zip(&xb).map(|(p, q)| (p - q) * (p - q)).sum();
        best = best.max(s);
    }
    Ok(best)
}

/// Least-squares fit of `ln y = intercept + slope * ln x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl LogLogFit {
    /// `None` when fewer than two points are given, or any value is not
    /// strictly positive and finite.
    pub fn fit(xs: &[f64], ys: &[f64]) -> Option<LogLogFit> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return None;
        }
        if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
            return None;
        }
        let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
        let n = lx.len() as f64;
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
        if sxx == 0.0 {
            return None;
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
        Some(LogLogFit {
            slope,
            intercept,
            r_squared,
        })
    }

    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}
