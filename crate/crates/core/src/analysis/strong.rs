//! Strong error `E sup_{[0,T]} |x^l - x^k|^2` with common random numbers, and
//! the convergence-order regression built on it.

use super::{lcm, monte_carlo, path_inputs, sup_sq_diff, Accumulator, LogLogFit, McOptions, Substeps};
use crate::drivers::BrownianPath;
use crate::error::{Error, Result};
use crate::models::SfdeModel;
use crate::paths::{InitialFunction, SamplePath, TimeGrid};
use crate::scheme::{solve_memory_gap, SchemeConfig};

/// A closed-form or oracle solution driven by the same inputs as the scheme.
pub type ExactSolution = dyn Fn(&BrownianPath, &InitialFunction) -> Result<SamplePath> + Sync;

/// What a coarse run is compared against.
pub enum Reference<'a> {
    /// A finer memory-gap run on the same noise.
    Gap(usize),
    /// An independent solution, labelled by `tag` in reports.
    Exact { tag: &'a str, solution: &'a ExactSolution },
}

impl Reference<'_> {
    fn label(&self) -> String {
        match self {
            Reference::Gap(k) => format!("k={k}"),
            Reference::Exact { tag, .. } => tag.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrongErrorEstimate {
    pub k_coarse: usize,
    pub reference: String,
    pub samples: usize,
    /// Sample mean of the sup-squared deviation.
    pub value: f64,
    /// 95% CLT half-width of `value`.
    pub std_error: f64,
}

fn paired_errors(
    model: &dyn SfdeModel,
    ks: &[usize],
    reference: &Reference<'_>,
    opts: &McOptions,
    substeps: Substeps,
) -> Result<Vec<Accumulator>> {
    let horizon = opts.horizon;
    let mut configs = Vec::with_capacity(ks.len());
    let mut fine = 1;
    for &k in ks {
        let cfg = SchemeConfig::new(k, substeps.for_k(k)?, horizon);
        cfg.validate()?;
        fine = lcm(fine, cfg.steps_per_unit());
        configs.push(cfg);
    }
    let ref_config = match reference {
        Reference::Gap(k) => {
            let cfg = SchemeConfig::new(*k, substeps.for_k(*k)?, horizon);
            cfg.validate()?;
            fine = lcm(fine, cfg.steps_per_unit());
            Some(cfg)
        }
        Reference::Exact { .. } => None,
    };
    for cfg in &configs {
        if fine % cfg.k != 0 {
            return Err(Error::config("gap grids are not nested"));
        }
    }
    monte_carlo(opts.samples, opts.exec, ks.len(), |i| {
        let (w, theta) = path_inputs(model, horizon, fine, opts.seed, i)?;
        let target = match (reference, &ref_config) {
            (Reference::Gap(_), Some(cfg)) => solve_memory_gap(model, cfg, &w, &theta)?,
            (Reference::Exact { solution, .. }, _) => solution(&w, &theta)?,
            _ => unreachable!("gap reference always has a config"),
        };
        configs
            .iter()
            .map(|cfg| {
                let path = solve_memory_gap(model, cfg, &w, &theta)?;
                sup_sq_diff(&path, &target, fine, horizon)
            })
            .collect()
    })
}

/// Strong errors of every `k` in `ks` against one shared reference run per
/// path.
pub fn strong_errors(
    model: &dyn SfdeModel,
    ks: &[usize],
    reference: &Reference<'_>,
    opts: &McOptions,
    substeps: Substeps,
) -> Result<Vec<StrongErrorEstimate>> {
    let acc = paired_errors(model, ks, reference, opts, substeps)?;
    let label = reference.label();
    Ok(ks
        .iter()
        .zip(&acc)
        .map(|(&k, a)| StrongErrorEstimate {
            k_coarse: k,
            reference: label.clone(),
            samples: opts.samples,
            value: a.mean(),
            std_error: a.half_width(),
        })
        .collect())
}

/// Estimates `E sup_{[0,T]} |x^{k_coarse} - reference|^2` over
/// `opts.samples` paired paths.
pub fn strong_error(
    model: &dyn SfdeModel,
    k_coarse: usize,
    reference: &Reference<'_>,
    opts: &McOptions,
    substeps: Substeps,
) -> Result<StrongErrorEstimate> {
    let mut v = strong_errors(model, &[k_coarse], reference, opts, substeps)?;
    Ok(v.remove(0))
}

/// Fitted `error ~ c (1/k)^(2p)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    /// Strong order `p`.
    pub order: f64,
    /// Constant `c`.
    pub constant: f64,
    /// Intercept of `ln sqrt(error)` against `ln(1/k)`, i.e. `ln(c) / 2`.
    pub intercept: f64,
    pub r_squared: f64,
}

impl RateFit {
    pub fn predict(&self, k: usize) -> f64 {
        self.constant * (1.0 / k as f64).powf(2.0 * self.order)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub k_list: Vec<usize>,
    pub errors: Vec<StrongErrorEstimate>,
    /// `None` when some error is zero, i.e. the rate is undefined.
    pub fit: Option<RateFit>,
}

impl RateReport {
    pub fn degenerate(&self) -> bool {
        self.fit.is_none()
    }

    pub fn order(&self) -> Option<f64> {
        self.fit.map(|f| f.order)
    }

    /// Errors strictly decrease in `k` with non-overlapping 95% intervals.
    pub fn strictly_decreasing(&self) -> bool {
        self.errors
            .windows(2)
            .all(|w| w[0].value - w[0].std_error > w[1].value + w[1].std_error)
    }

    /// Every measured error lies below the fitted curve plus `n` half-widths.
    pub fn fit_bounds_errors(&self, n: f64) -> bool {
        match self.fit {
            Some(fit) => self
                .errors
                .iter()
                .all(|e| e.value <= fit.predict(e.k_coarse) + n * e.std_error),
            None => false,
        }
    }
}

fn check_k_list(k_list: &[usize]) -> Result<()> {
    if k_list.len() < 3 {
        return Err(Error::config(format!(
            "a rate fit needs at least 3 gap sizes, got {}",
            k_list.len()
        )));
    }
    if k_list[0] == 0 {
        return Err(Error::config("gap sizes must be positive"));
    }
    for w in k_list.windows(2) {
        if w[1] <= w[0] || w[1] % w[0] != 0 {
            return Err(Error::config(format!(
                "gap sizes must be strictly increasing and nested, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Measures the strong order over `k_list` against `reference`.
///
/// A gap reference must be at least four times the largest `k` and nested
/// with it.
pub fn convergence_rate(
    model: &dyn SfdeModel,
    k_list: &[usize],
    reference: &Reference<'_>,
    opts: &McOptions,
    substeps: Substeps,
) -> Result<RateReport> {
    check_k_list(k_list)?;
    if let Reference::Gap(k_ref) = reference {
        let k_max = *k_list.last().expect("checked non-empty");
        if *k_ref < 4 * k_max || k_ref % k_max != 0 {
            return Err(Error::config(format!(
                "reference k = {k_ref} must be a multiple of, and at least 4x, the largest k = {k_max}"
            )));
        }
    }
    let errors = strong_errors(model, k_list, reference, opts, substeps)?;
    let xs: Vec<f64> = k_list.iter().map(|&k| 1.0 / k as f64).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.value.sqrt()).collect();
    let fit = LogLogFit::fit(&xs, &ys).map(|f| RateFit {
        order: f.slope,
        constant: (2.0 * f.intercept).exp(),
        intercept: f.intercept,
        r_squared: f.r_squared,
    });
    Ok(RateReport {
        k_list: k_list.to_vec(),
        errors,
        fit,
    })
}

/// `x0 exp((mu - sigma^2/2) t + sigma W(t))` on the Brownian grid, constant
/// `x0` for `t <= 0`.
pub fn gbm_exact(mu: f64, sigma: f64, x0: f64, brownian: &BrownianPath) -> Result<SamplePath> {
    if brownian.dims() != 1 {
        return Err(Error::config("the closed-form GBM solution is one-dimensional"));
    }
    let grid = TimeGrid::new(0.0, brownian.horizon(), brownian.steps_per_unit())?;
    let w = brownian.cumulative();
    let zero = grid.zero_index();
    let drift = mu - 0.5 * sigma * sigma;
    SamplePath::from_fn(grid, 1, |t, x| {
        x[0] = if t <= 0.0 {
            x0
        } else {
            let j = ((t * grid.steps_per_unit() as f64).round()) as usize;
            debug_assert!(zero + j < grid.n_nodes());
            x0 * (drift * t + sigma * w[j]).exp()
        }
    })
}
