//! Uniform second-moment bound and increment-moment scaling of `x^k`.

use super::{monte_carlo, path_inputs, Accumulator, LogLogFit, McOptions, Substeps};
use crate::error::{Error, Result};
use crate::models::SfdeModel;
use crate::paths::{as_steps, euclidean};
use crate::scheme::{solve_memory_gap, SchemeConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentEstimate {
    pub k: usize,
    pub value: f64,
    pub std_error: f64,
}

/// `E sup_{[-1/k, T]} |x^k|^2` per `k`, against the Gronwall ceiling
/// `2 C1 exp(C2 T) + 2 E||theta||^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentBoundReport {
    pub estimates: Vec<MomentEstimate>,
    /// Monte Carlo estimate of `E ||theta||^2`.
    pub theta_sq_norm: f64,
    /// Growth constant used in the ceiling.
    pub growth: f64,
    pub ceiling: f64,
}

impl MomentBoundReport {
    /// Largest over smallest estimate; 1 when all estimates vanish.
    pub fn variation(&self) -> f64 {
        let max = self.estimates.iter().map(|e| e.value).fold(f64::MIN, f64::max);
        let min = self.estimates.iter().map(|e| e.value).fold(f64::MAX, f64::min);
        if max == 0.0 {
            1.0
        } else if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    pub fn max_estimate(&self) -> f64 {
        self.estimates.iter().map(|e| e.value).fold(0.0, f64::max)
    }

    pub fn below_ceiling(&self) -> bool {
        self.estimates.iter().all(|e| e.value <= self.ceiling)
    }
}

/// `K = 2 C1 e^{C2 T} + 2 E||theta||^2` with
/// `C1 = 3 E||theta||^2 + 6 T D^2 (T + 4 m^2)(1 + E||theta||^2)` and
/// `C2 = 6 D^2 (T + 4 m^2)`.
pub fn gronwall_ceiling(theta_sq_norm: f64, growth: f64, horizon: f64, noise_dim: usize) -> f64 {
    let m2 = (noise_dim * noise_dim) as f64;
    let d2 = growth * growth;
    let c1 = 3.0 * theta_sq_norm + 6.0 * horizon * d2 * (horizon + 4.0 * m2) * (1.0 + theta_sq_norm);
    let c2 = 6.0 * d2 * (horizon + 4.0 * m2);
    2.0 * c1 * (c2 * horizon).exp() + 2.0 * theta_sq_norm
}

/// Estimates `E sup_{[-1/k, T]} |x^k|^2` for each `k` and the ceiling built from the growth constant
/// `growth`, typically the probed `D`.
pub fn moment_bound_check(
    model: &dyn SfdeModel,
    k_list: &[usize],
    substeps: Substeps,
    growth: f64,
    opts: &McOptions,
) -> Result<MomentBoundReport> {
    if k_list.is_empty() {
        return Err(Error::config("moment check needs at least one k"));
    }
    let horizon = opts.horizon;
    let configs: Vec<SchemeConfig> = k_list
        .iter()
        .map(|&k| {
            let cfg = SchemeConfig::new(k, substeps.for_k(k)?, horizon);
            cfg.validate().map(|_| cfg)
        })
        .collect::<Result<_>>()?;
    let fine = configs.iter().map(|c| c.steps_per_unit()).fold(1, super::lcm);

    let acc = monte_carlo(opts.samples, opts.exec, 1 + configs.len(), |i| {
        let (w, theta) = path_inputs(model, horizon, fine, opts.seed, i)?;
        let mut out = Vec::with_capacity(1 + configs.len());
        out.push(theta.sup_norm().powi(2));
        for cfg in &configs {
            let path = solve_memory_gap(model, cfg, &w, &theta)?;
            let first = path.grid().zero_index() - cfg.substeps;
            let sup = (first..path.grid().n_nodes())
                .map(|j| euclidean(path.node(j)).powi(2))
                .fold(0.0, f64::max);
            out.push(sup);
        }
        Ok(out)
    })?;

    let theta_sq_norm = acc[0].mean();
    Ok(MomentBoundReport {
        estimates: k_list
            .iter()
            .zip(&acc[1..])
            .map(|(&k, a)| MomentEstimate {
                k,
                value: a.mean(),
                std_error: a.half_width(),
            })
            .collect(),
        theta_sq_norm,
        growth,
        ceiling: gronwall_ceiling(theta_sq_norm, growth, horizon, model.noise_dim()),
    })
}

/// Log-log slope of `E|x(t) - x(s)|^(2 gamma)` against the lag.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaSlope {
    pub gamma: u32,
    /// `(lag, estimated moment, half-width)`.
    pub moments: Vec<(f64, f64, f64)>,
    /// `None` when every moment vanishes.
    pub fit: Option<LogLogFit>,
}

impl GammaSlope {
    pub fn degenerate(&self) -> bool {
        self.fit.is_none()
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IncrementMomentReport {
    pub k: usize,
    pub slopes: Vec<GammaSlope>,
}

/// Estimates the increment moments of `x^k` on `[0, T]`.
///
/// For each lag `h` a path contributes the average of
/// `|x(s+h) - x(s)|^(2 gamma)` over the disjoint windows `s = 0, h, 2h, ...`.
pub fn increment_moment_check(
    model: &dyn SfdeModel,
    k: usize,
    substeps: usize,
    gammas: &[u32],
    lags: &[f64],
    opts: &McOptions,
) -> Result<IncrementMomentReport> {
    if gammas.is_empty() || gammas.contains(&0) {
        return Err(Error::config("gamma list must be non-empty and positive"));
    }
    if lags.len() < 2 {
        return Err(Error::config("increment moments need at least two lags"));
    }
    let horizon = opts.horizon;
    let cfg = SchemeConfig::new(k, substeps, horizon);
    cfg.validate()?;
    let spu = cfg.steps_per_unit();
    let lag_steps: Vec<usize> = lags
        .iter()
        .map(|&h| match as_steps(h, spu) {
            Some(s) if s >= 1 && h <= horizon => Ok(s),
            _ => Err(Error::config(format!(
                "lag {h} is not a positive node-aligned lag within [0, T]"
            ))),
        })
        .collect::<Result<_>>()?;

    let slots = gammas.len() * lags.len();
    let acc = monte_carlo(opts.samples, opts.exec, slots, |i| {
        let (w, theta) = path_inputs(model, horizon, spu, opts.seed, i)?;
        let path = solve_memory_gap(model, &cfg, &w, &theta)?;
        let zero = path.grid().zero_index();
        let total = path.grid().horizon_steps();
        let d = path.dim();
        let mut out = Vec::with_capacity(slots);
        for &gamma in gammas {
            for &s in &lag_steps {
                let windows = total / s;
                let mut sum = 0.0;
                for n in 0..windows {
                    let a = path.node(zero + n * s);
                    let b = path.node(zero + (n + 1) * s);
                    let sq: f64 = (0..d).map(|c| (b[c] - a[c]).powi(2)).sum();
                    sum += sq.powi(gamma as i32);
                }
                out.push(sum / windows as f64);
            }
        }
        Ok(out)
    })?;

    let slopes = gammas
        .iter()
        .enumerate()
        .map(|(g, &gamma)| {
            let row: &[Accumulator] = &acc[g * lags.len()..(g + 1) * lags.len()];
            let moments: Vec<(f64, f64, f64)> = lags
                .iter()
                .zip(row)
                .map(|(&h, a)| (h, a.mean(), a.half_width()))
                .collect();
            let ys: Vec<f64> = moments.iter().map(|m| m.1).collect();
            GammaSlope {
                gamma,
                fit: LogLogFit::fit(lags, &ys),
                moments,
            }
        })
        .collect();
    Ok(IncrementMomentReport { k, slopes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin_model, ParamMap};

    #[test]
    fn ceiling_without_growth_is_eight_theta_norms() {
        assert_eq!(gronwall_ceiling(1.0, 0.0, 2.0, 1), 8.0);
    }

    #[test]
    fn ceiling_with_unit_growth() {
        // theta = 0, D = 1, T = 1, m = 1: C1 = 30, C2 = 30.
        let k = gronwall_ceiling(0.0, 1.0, 1.0, 1);
        assert!((k - 60.0 * 30f64.exp()).abs() / k < 1e-14);
    }

    #[test]
    fn zero_model_moments() {
        let params: ParamMap = [("a", 0.0), ("b", 0.0)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let model = builtin_model("point_delay_linear", &params).unwrap();
        let opts = McOptions::new(10, 1.0, 1);
        let r = moment_bound_check(&model, &[2, 4, 8], Substeps::Fixed(4), 0.0, &opts).unwrap();
        for e in &r.estimates {
            assert_eq!(e.value, 1.0);
        }
        assert!(r.ceiling >= 1.0);
        assert!(r.below_ceiling());
        assert_eq!(r.variation(), 1.0);

        let inc = increment_moment_check(&model, 4, 4, &[1, 2], &[0.25, 0.5], &opts).unwrap();
        assert!(inc.slopes.iter().all(|s| s.degenerate()));
    }

    #[test]
    fn lag_validation() {
        let model = builtin_model("pure_noise", &ParamMap::new()).unwrap();
        let opts = McOptions::new(4, 1.0, 1);
        assert!(increment_moment_check(&model, 4, 2, &[1], &[0.1, 0.5], &opts).is_err());
        assert!(increment_moment_check(&model, 4, 2, &[1], &[0.5, 2.0], &opts).is_err());
        assert!(increment_moment_check(&model, 4, 2, &[], &[0.25, 0.5], &opts).is_err());
    }
}
