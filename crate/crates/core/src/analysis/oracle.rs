//! Deterministic reference solutions for delay equations with `G = 0`, by the
//! method of steps.

use crate::error::{Error, Result};
use crate::models::SfdeModel;
use crate::paths::{extend_initial, InitialFunction, PathView, SamplePath, TimeGrid};

/// Piecewise-polynomial solution of `x'(t) = c x(t - L)`.
///
/// Piece `n` covers `[(n-1)L, nL]` in the local variable `s = t - (n-1)L`;
/// piece 0 is `theta` on `[-L, 0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodOfSteps {
    delay: f64,
    horizon: f64,
    /// `pieces[n][coord]`: ascending coefficients in `s`.
    pieces: Vec<Vec<Vec<f64>>>,
}

fn horner(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

/// Coefficients of `p(s - shift)`.
fn shifted(coeffs: &[f64], shift: f64) -> Vec<f64> {
    let n = coeffs.len();
    let mut out = vec![0.0; n];
    for (i, &c) in coeffs.iter().enumerate() {
        // c (s - shift)^i = c sum_j binom(i, j) s^j (-shift)^(i-j)
        let mut binom = 1.0;
        for (j, o) in out.iter_mut().enumerate().take(i + 1) {
            *o += c * binom * (-shift).powi((i - j) as i32);
            binom = binom * (i - j) as f64 / (j + 1) as f64;
        }
    }
    out
}

impl MethodOfSteps {
    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].len()
    }

    /// Coefficients of piece `n`, per coordinate.
    pub fn piece(&self, n: usize) -> Option<&[Vec<f64>]> {
        self.pieces.get(n).map(|p| p.as_slice())
    }

    /// `x(t)` for `t in [-L, T]`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        if t < -self.delay - 1e-12 || t > self.horizon + 1e-12 {
            return Err(Error::Domain {
                what: "method-of-steps time",
                value: t,
                lower: -self.delay,
                upper: self.horizon,
            });
        }
        let shifted_t = t + self.delay;
        let mut n = (shifted_t / self.delay).floor() as usize;
        // Interval ends belong to the earlier piece.
        if n > 0 && (shifted_t - n as f64 * self.delay).abs() < 1e-12 {
            n -= 1;
        }
        let n = n.min(self.pieces.len() - 1);
        let s = shifted_t - n as f64 * self.delay;
        Ok(self.pieces[n].iter().map(|c| horner(c, s)).collect())
    }

    /// Samples the solution on `grid`, extending by `x(-L)` to the left.
    pub fn to_sample_path(&self, grid: TimeGrid) -> Result<SamplePath> {
        let dim = self.dim();
        let mut err = None;
        let path = SamplePath::from_fn(grid, dim, |t, x| {
            match self.eval(t.max(-self.delay).min(self.horizon)) {
                Ok(v) => x.copy_from_slice(&v),
                Err(e) => err = Some(e),
            }
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(path),
        }
    }
}

/// Exact solution of `x'(t) = c x(t - L)` with polynomial `theta` (ascending
/// coefficients in `t`, per coordinate) on `[-L, T]`.
pub fn method_of_steps(c: f64, delay: f64, theta: &[Vec<f64>], horizon: f64) -> Result<MethodOfSteps> {
    if !(delay > 0.0) {
        return Err(Error::Contract("the method of steps needs a positive delay".into()));
    }
    if theta.is_empty() || theta.iter().any(|p| p.is_empty()) {
        return Err(Error::config("initial polynomial has no coefficients"));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::config(format!("horizon must be non-negative, got {horizon}")));
    }
    let n_pieces = (horizon / delay - 1e-12).ceil().max(0.0) as usize;
    let mut pieces = Vec::with_capacity(n_pieces + 1);
    pieces.push(theta.iter().map(|p| shifted(p, delay)).collect::<Vec<_>>());
    for _ in 0..n_pieces {
        let prev: &Vec<Vec<f64>> = pieces.last().expect("piece 0 exists");
        let next = prev
            .iter()
            .map(|p| {
                let mut q = Vec::with_capacity(p.len() + 1);
                q.push(horner(p, delay));
                q.extend(p.iter().enumerate().map(|(i, &a)| c * a / (i + 1) as f64));
                q
            })
            .collect();
        pieces.push(next);
    }
    Ok(MethodOfSteps { delay, horizon, pieces })
}

fn check_deterministic(model: &dyn SfdeModel, theta: &InitialFunction) -> Result<()> {
    let (d, m, delay) = (model.state_dim(), model.noise_dim(), model.delay());
    if !(delay > 0.0) {
        return Err(Error::Contract("the method of steps needs a positive delay".into()));
    }
    if theta.dim() != d {
        return Err(Error::config(format!(
            "initial function has dimension {}, model {d}",
            theta.dim()
        )));
    }
    // Probe G on the initial segment and on a rough path.
    let grid = TimeGrid::new(delay, 1.0, 64)?;
    let ext = extend_initial(theta, delay)?;
    let mut values = vec![0.0; grid.n_nodes() * d];
    let mut rough = values.clone();
    for j in 0..grid.n_nodes() {
        ext.eval_into(grid.time(j).min(0.0), &mut values[j * d..(j + 1) * d])?;
        for c in 0..d {
            rough[j * d + c] = if (j + c) % 2 == 0 { 1.0 + j as f64 } else { -2.0 };
        }
    }
    let mut g = vec![0.0; d * m];
    for vals in [&values, &rough] {
        let seg = PathView::new(&grid, d, vals).segment(0.0);
        model.diffusion(0.0, &seg, &mut g);
        if g.iter().any(|v| *v != 0.0) {
            return Err(Error::Contract("the method of steps requires G = 0".into()));
        }
    }
    Ok(())
}

/// Heun (explicit trapezoid) integration of `x' = F(t, x_t)` on a grid with
/// `steps_per_unit` nodes per unit. The delay must be node-aligned so that
/// derivative jumps at multiples of `L` fall on nodes.
pub fn trapezoid_method_of_steps(
    model: &dyn SfdeModel,
    theta: &InitialFunction,
    horizon: f64,
    steps_per_unit: usize,
) -> Result<SamplePath> {
    check_deterministic(model, theta)?;
    let d = model.state_dim();
    let grid = TimeGrid::new(model.delay(), horizon, steps_per_unit)?;
    let ext = extend_initial(theta, model.delay())?;
    let n = grid.n_nodes();
    let zero = grid.zero_index();
    let h = grid.dt();
    let mut values = vec![0.0; n * d];
    for j in 0..=zero {
        ext.eval_into(grid.time(j), &mut values[j * d..(j + 1) * d])?;
    }
    let (mut f0, mut f1) = (vec![0.0; d], vec![0.0; d]);
    for j in zero..n - 1 {
        let (t0, t1) = (grid.time(j), grid.time(j + 1));
        {
            let seg = PathView::new(&grid, d, &values[..(j + 1) * d]).segment(t0);
            model.drift(t0, &seg, &mut f0);
        }
        for c in 0..d {
            values[(j + 1) * d + c] = values[j * d + c] + h * f0[c];
        }
        {
            let seg = PathView::new(&grid, d, &values[..(j + 2) * d]).segment(t1);
            model.drift(t1, &seg, &mut f1);
        }
        if f0.iter().chain(&f1).any(|v| !v.is_finite()) {
            return Err(Error::ModelEvaluation {
                time: t0,
                what: "drift",
            });
        }
        for c in 0..d {
            values[(j + 1) * d + c] = values[j * d + c] + 0.5 * h * (f0[c] + f1[c]);
        }
    }
    SamplePath::new(grid, d, values)
}

/// Richardson combination `(4 x_{2n} - x_n) / 3` of two trapezoid runs, on
/// the coarser grid, with the estimated error `max |x_{2n} - x_n| / 3`.
pub fn richardson_method_of_steps(
    model: &dyn SfdeModel,
    theta: &InitialFunction,
    horizon: f64,
    steps_per_unit: usize,
) -> Result<(SamplePath, f64)> {
    let coarse = trapezoid_method_of_steps(model, theta, horizon, steps_per_unit)?;
    let fine = trapezoid_method_of_steps(model, theta, horizon, 2 * steps_per_unit)?;
    let d = coarse.dim();
    let grid = *coarse.grid();
    let mut values = coarse.values().to_vec();
    let mut err: f64 = 0.0;
    for j in 0..grid.n_nodes() {
        let xf = fine.node(2 * j);
        for c in 0..d {
            let xc = values[j * d + c];
            err = err.max((xf[c] - xc).abs() / 3.0);
            values[j * d + c] = (4.0 * xf[c] - xc) / 3.0;
        }
    }
    Ok((SamplePath::new(grid, d, values)?, err))
}

/// Reference solution of a `G = 0` model on a grid with `resolution` steps
/// per unit: symbolic for `F = c eta(-L)` with polynomial `theta`, otherwise
/// Richardson-extrapolated trapezoid on a refined grid.
pub fn dde_oracle(
    model: &dyn SfdeModel,
    theta: &InitialFunction,
    horizon: f64,
    resolution: usize,
) -> Result<SamplePath> {
    check_deterministic(model, theta)?;
    let delay = model.delay();
    let grid = TimeGrid::new(delay, horizon, resolution)?;
    if let (Some(c), Some(coeffs)) = (model.linear_point_delay(), theta.polynomial_coeffs()) {
        return method_of_steps(c, delay, coeffs, horizon)?.to_sample_path(grid);
    }
    // Integrate at a multiple of `resolution` of at least 4096 per unit.
    let factor = 4096usize.div_ceil(resolution).max(1);
    let (dense, _) = richardson_method_of_steps(model, theta, horizon, resolution * factor)?;
    let d = dense.dim();
    let mut err = None;
    let path = SamplePath::from_fn(grid, d, |t, x| {
        if let Err(e) = dense.eval_into(t, x) {
            err = Some(e);
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(path),
    }
}
