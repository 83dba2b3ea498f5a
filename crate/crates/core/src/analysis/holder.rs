//! Empirical Hölder exponent of sample paths from max-increment regression.

use rayon::prelude::*;

use super::{path_inputs, Exec, LogLogFit, McOptions};
use crate::error::{Error, Result};
use crate::models::SfdeModel;
use crate::paths::{as_steps, euclidean, SamplePath};
use crate::scheme::{solve_memory_gap, SchemeConfig};

/// Max increments of one path and the fitted `max_inc ~ c h^beta`.
#[derive(Clone, Debug, PartialEq)]
pub struct HolderEstimate {
    pub lags: Vec<f64>,
    /// `max_{s in [0, T-h]} |x(s+h) - x(s)|` over grid nodes, per lag.
    pub max_increments: Vec<f64>,
    /// `None` when some max increment is zero (e.g. a constant path).
    pub exponent: Option<f64>,
    pub coefficient: Option<f64>,
}

impl HolderEstimate {
    pub fn degenerate(&self) -> bool {
        self.exponent.is_none()
    }
}

fn lag_steps(lags: &[f64], path: &SamplePath) -> Result<Vec<usize>> {
    if lags.len() < 2 {
        return Err(Error::config("a Hölder fit needs at least two lags"));
    }
    let grid = path.grid();
    lags.iter()
        .map(|&h| match as_steps(h, grid.steps_per_unit()) {
            Some(s) if s >= 1 && s <= grid.horizon_steps() => Ok(s),
            _ => Err(Error::config(format!(
                "lag {h} is not node-aligned within [0, {}] at {} steps per unit",
                grid.horizon(),
                grid.steps_per_unit()
            ))),
        })
        .collect()
}

/// Max increments of `path` on `[0, T]` at each lag, and the log-log slope.
pub fn holder_estimate(path: &SamplePath, lags: &[f64]) -> Result<HolderEstimate> {
    let steps = lag_steps(lags, path)?;
    let grid = path.grid();
    let zero = grid.zero_index();
    let last = zero + grid.horizon_steps();
    let d = path.dim();
    let mut diff = vec![0.0; d];
    let max_increments: Vec<f64> = steps
        .iter()
        .map(|&s| {
            let mut best: f64 = 0.0;
            for j in zero..=last - s {
                let (a, b) = (path.node(j), path.node(j + s));
                diff.iter_mut().enumerate().for_each(|(c, x)| *x = b[c] - a[c]);
                best = best.max(euclidean(&diff));
            }
            best
        })
        .collect();
    let fit = LogLogFit::fit(lags, &max_increments);
    Ok(HolderEstimate {
        lags: lags.to_vec(),
        max_increments,
        exponent: fit.map(|f| f.slope),
        coefficient: fit.map(|f| f.intercept.exp()),
    })
}

/// Per-path Hölder estimates of `x^k` and quantiles of the exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct HolderReport {
    pub k: usize,
    pub lags: Vec<f64>,
    pub paths: Vec<HolderEstimate>,
    /// Number of paths with no exponent.
    pub degenerate: usize,
    /// Quantiles over non-degenerate paths; `None` if there are none.
    pub q10: Option<f64>,
    pub median: Option<f64>,
    pub q90: Option<f64>,
}

fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn map_paths<T, F>(samples: usize, exec: Exec, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    if exec.deterministic || exec.workers <= 1 {
        return (0..samples as u64).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(exec.workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start {} workers: {e}", exec.workers)))?;
    pool.install(|| (0..samples as u64).into_par_iter().map(f).collect())
}

/// Runs `opts.samples` paths of `x^k` and estimates each path's exponent.
pub fn holder_check(
    model: &dyn SfdeModel,
    k: usize,
    substeps: usize,
    lags: &[f64],
    opts: &McOptions,
) -> Result<HolderReport> {
    if opts.samples == 0 {
        return Err(Error::config("Monte Carlo needs at least one sample"));
    }
    let cfg = SchemeConfig::new(k, substeps, opts.horizon);
    cfg.validate()?;
    let paths = map_paths(opts.samples, opts.exec, |i| {
        let (w, theta) = path_inputs(model, opts.horizon, cfg.steps_per_unit(), opts.seed, i)?;
        let path = solve_memory_gap(model, &cfg, &w, &theta)?;
        holder_estimate(&path, lags)
    })?;
    let mut exps: Vec<f64> = paths.iter().filter_map(|p| p.exponent).collect();
    exps.sort_by(f64::total_cmp);
    Ok(HolderReport {
        k,
        lags: lags.to_vec(),
        degenerate: paths.len() - exps.len(),
        q10: quantile(&exps, 0.1),
        median: quantile(&exps, 0.5),
        q90: quantile(&exps, 0.9),
        paths,
    })
}
