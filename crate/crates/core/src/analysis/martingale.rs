//! Monte Carlo check of the maximal inequality for Itô integrals of adapted
//! step integrands,
//! `E sup_{[a,b]} |int_a^t g dW|^{2k} <= A_k (b-a)^{k-1} int_a^b E|g|^{2k} du`.

use super::{monte_carlo, Exec};
use crate::drivers::{generate_brownian, SeedSpec, StreamTag};
use crate::error::{Error, Result};
use crate::paths::{as_steps, TimeGrid};

/// Step integrands `g(u)`, constant on each grid interval `[u_j, u_{j+1})`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrand {
    Zero,
    /// Every entry of the `d x m` matrix equals 1.
    Constant,
    /// Every entry equals `clip(W_1(u_j), -1, 1)`, the first Brownian
    /// coordinate at the left endpoint.
    ClippedBrownian,
}

impl Integrand {
    pub fn name(&self) -> &'static str {
        match self {
            Integrand::Zero => "zero",
            Integrand::Constant => "constant",
            Integrand::ClippedBrownian => "clipped_brownian",
        }
    }
}

/// Dimensions, interval `[a, b]` and resolution of the check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MartingaleSetup {
    pub d: usize,
    pub m: usize,
    pub a: f64,
    pub b: f64,
    pub steps_per_unit: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MartingaleCheck {
    pub k_order: u32,
    pub lhs: f64,
    pub lhs_half_width: f64,
    pub rhs: f64,
    pub rhs_half_width: f64,
    pub a_k: f64,
    pub pass: bool,
}

/// `A_k = d^{k-1} (4 k^3 m^2 / (2k - 1))^k`.
pub fn martingale_constant(k_order: u32, d: usize, m: usize) -> f64 {
    let k = k_order as f64;
    let base = 4.0 * k.powi(3) * (m * m) as f64 / (2.0 * k - 1.0);
    (d as f64).powi(k_order as i32 - 1) * base.powi(k_order as i32)
}

/// Estimates both sides over `samples` Brownian paths. The check passes when
/// `lhs <= rhs` up to the sum of their 95% half-widths.
pub fn martingale_inequality_check(
    k_order: u32,
    integrand: Integrand,
    setup: &MartingaleSetup,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<MartingaleCheck> {
    let MartingaleSetup {
        d,
        m,
        a,
        b,
        steps_per_unit,
    } = *setup;
    if k_order == 0 || d == 0 || m == 0 {
        return Err(Error::config("k_order, d and m must be positive"));
    }
    if !(a >= 0.0 && b > a) {
        return Err(Error::config(format!("need 0 <= a < b, got [{a}, {b}]")));
    }
    let (first, last) = match (as_steps(a, steps_per_unit), as_steps(b, steps_per_unit)) {
        (Some(i), Some(j)) => (i, j),
        _ => return Err(Error::config("interval endpoints must be grid nodes")),
    };
    let grid = TimeGrid::new(0.0, b, steps_per_unit)?;
    let h = grid.dt();
    let power = k_order as i32;

    let acc = monte_carlo(samples, exec, 2, |i| {
        let w = generate_brownian(&grid, m, SeedSpec::new(seed, i, StreamTag::Brownian))?;
        let mut w1 = 0.0;
        for j in 0..first {
            w1 += w.increment(j)[0];
        }
        let mut integral = vec![0.0; d];
        let mut sup: f64 = 0.0;
        let mut g_moment = 0.0;
        for j in first..last {
            let entry = match integrand {
                Integrand::Zero => 0.0,
                Integrand::Constant => 1.0,
                Integrand::ClippedBrownian => w1.clamp(-1.0, 1.0),
            };
            let dw = w.increment(j);
            let row: f64 = dw.iter().sum::<f64>() * entry;
            integral.iter_mut().for_each(|x| *x += row);
            let norm_sq: f64 = integral.iter().map(|x| x * x).sum();
            sup = sup.max(norm_sq);
            // Frobenius norm of a matrix with every entry equal to `entry`.
            g_moment += ((d * m) as f64 * entry * entry).powi(power) * h;
            w1 += dw[0];
        }
        Ok(vec![sup.powi(power), g_moment])
    })?;

    let a_k = martingale_constant(k_order, d, m);
    let scale = a_k * (b - a).powi(power - 1);
    let lhs = acc[0].mean();
    let lhs_half_width = acc[0].half_width();
    let rhs = scale * acc[1].mean();
    let rhs_half_width = scale * acc[1].half_width();
    Ok(MartingaleCheck {
        k_order,
        lhs,
        lhs_half_width,
        rhs,
        rhs_half_width,
        a_k,
        pass: lhs <= rhs + lhs_half_width + rhs_half_width,
    })
}
