//! Sample paths on uniform grids, segment windows, and the extended initial
//! process.
//!
//! Every path lives on a [`TimeGrid`] covering `[-1-L, T]` with a step of
//! `1/steps_per_unit`. Between nodes a path is represented by linear
//! interpolation, so a [`Segment`] is a continuous function on `[-L, 0]` and
//! its sup-norm is the maximum over the covered nodes and the two window
//! endpoints.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative tolerance used when deciding whether a time sits on a grid node.
const ALIGN_TOL: f64 = 1e-9;

/// Returns `x * steps_per_unit` as an integer when it is one (up to rounding).
pub(crate) fn as_steps(x: f64, steps_per_unit: usize) -> Option<usize> {
    let y = x * steps_per_unit as f64;
    let r = y.round();
    if r >= 0.0 && (y - r).abs() <= ALIGN_TOL * r.max(1.0) {
        Some(r as usize)
    } else {
        None
    }
}

/// Snaps a fractional node position onto the nearest integer if it is
/// within rounding distance.
fn snap(pos: f64) -> f64 {
    let r = pos.round();
    if (pos - r).abs() <= ALIGN_TOL * r.abs().max(1.0) {
        r
    } else {
        pos
    }
}

/// Uniform grid over `[-1-L, T]`.
///
/// The grid is stored in integer form: `steps_per_unit` nodes per unit of
/// time, with `delay` and `horizon` both integral multiples of the step, so
/// `0`, `-L` and `-1-L` are always nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    delay: f64,
    horizon: f64,
    steps_per_unit: usize,
    delay_steps: usize,
    horizon_steps: usize,
}

impl TimeGrid {
    pub fn new(delay: f64, horizon: f64, steps_per_unit: usize) -> Result<Self> {
        if steps_per_unit == 0 {
            return Err(Error::config("grid needs at least one step per unit"));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::config(format!("horizon must be positive, got {horizon}")));
        }
        if !(delay.is_finite() && delay >= 0.0) {
            return Err(Error::config(format!("delay must be non-negative, got {delay}")));
        }
        let delay_steps = as_steps(delay, steps_per_unit).ok_or(Error::Alignment {
            time: -delay,
            steps_per_unit,
        })?;
        let horizon_steps = as_steps(horizon, steps_per_unit).ok_or(Error::Alignment {
            time: horizon,
            steps_per_unit,
        })?;
        Ok(Self {
            delay,
            horizon,
            steps_per_unit,
            delay_steps,
            horizon_steps,
        })
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn t_start(&self) -> f64 {
        -1.0 - self.delay
    }

    pub fn t_end(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps_per_unit as f64
    }

    pub fn steps_per_unit(&self) -> usize {
        self.steps_per_unit
    }

    /// Number of steps spanning the delay window `[-L, 0]`.
    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    /// Number of steps spanning `[0, T]`.
    pub fn horizon_steps(&self) -> usize {
        self.horizon_steps
    }

    /// Index of the node at time zero.
    pub fn zero_index(&self) -> usize {
        self.steps_per_unit + self.delay_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.zero_index() + self.horizon_steps + 1
    }

    pub fn time(&self, index: usize) -> f64 {
        (index as f64 - self.zero_index() as f64) / self.steps_per_unit as f64
    }

    /// Fractional node position of `t`.
    pub fn position(&self, t: f64) -> f64 {
        snap((t - self.t_start()) * self.steps_per_unit as f64)
    }

    /// Index of the node at `t`, or an alignment error if `t` is not a node.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        if t < self.t_start() - ALIGN_TOL || t > self.t_end() + ALIGN_TOL {
            return Err(Error::Domain {
                what: "grid time",
                value: t,
                lower: self.t_start(),
                upper: self.t_end(),
            });
        }
        let pos = self.position(t);
        if pos.fract() != 0.0 {
            return Err(Error::Alignment {
                time: t,
                steps_per_unit: self.steps_per_unit,
            });
        }
        Ok(pos as usize)
    }

    /// True when every node of `coarse` is also a node of `self`.
    pub fn refines(&self, coarse: &TimeGrid) -> bool {
        self.steps_per_unit.is_multiple_of(coarse.steps_per_unit)
            && self.delay == coarse.delay
            && self.horizon == coarse.horizon
    }
}

/// Borrowed view of (a prefix of) a path's node values.
///
/// A prefix view makes any read past the last computed node a bounds
/// violation, which is how the scheme guarantees its functional arguments
/// only see already-known values.
#[derive(Clone, Copy, Debug)]
pub struct PathView<'a> {
    grid: &'a TimeGrid,
    dim: usize,
    values: &'a [f64],
}

impl<'a> PathView<'a> {
    pub fn new(grid: &'a TimeGrid, dim: usize, values: &'a [f64]) -> Self {
        debug_assert_eq!(values.len() % dim, 0);
        Self { grid, dim, values }
    }

    pub fn grid(&self) -> &'a TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of nodes visible through this view.
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, index: usize) -> &'a [f64] {
        &self.values[index * self.dim..(index + 1) * self.dim]
    }

    /// Linear interpolation at fractional node position `pos`.
    pub fn eval_position(&self, pos: f64, out: &mut [f64]) {
        let pos = snap(pos);
        let lo = pos.floor();
        let frac = pos - lo;
        let i = lo as usize;
        if frac == 0.0 {
            out.copy_from_slice(self.node(i));
        } else {
            let a = self.node(i);
            let b = self.node(i + 1);
            for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
                *o = x + frac * (y - x);
            }
        }
    }

    /// Coordinate `c` at fractional node position `pos`.
    pub fn component_at_position(&self, pos: f64, c: usize) -> f64 {
        let pos = snap(pos);
        let lo = pos.floor();
        let frac = pos - lo;
        let i = lo as usize;
        let a = self.values[i * self.dim + c];
        if frac == 0.0 {
            a
        } else {
            a + frac * (self.values[(i + 1) * self.dim + c] - a)
        }
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        self.eval_position(self.grid.position(t), out)
    }

    /// Window of length `L` ending at `anchor`.
    pub fn segment(&self, anchor: f64) -> Segment<'a> {
        Segment {
            view: *self,
            anchor,
            end_pos: self.grid.position(anchor),
        }
    }
}

/// One realized trajectory on a [`TimeGrid`], values in `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl SamplePath {
    /// Builds a path from row-major node values (`n_nodes * dim` entries).
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("path dimension must be positive"));
        }
        if values.len() != grid.n_nodes() * dim {
            return Err(Error::config(format!(
                "path has {} values, grid needs {} x {}",
                values.len(),
                grid.n_nodes(),
                dim
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "non-finite path value at t = {}",
                grid.time(i / dim)
            )));
        }
        Ok(Self { grid, dim, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: TimeGrid, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Result<Self> {
        let mut values = vec![0.0; grid.n_nodes() * dim];
        for (j, chunk) in values.chunks_mut(dim).enumerate() {
            f(grid.time(j), chunk);
        }
        Self::new(grid, dim, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, index: usize) -> &[f64] {
        &self.values[index * self.dim..(index + 1) * self.dim]
    }

    pub fn view(&self) -> PathView<'_> {
        PathView::new(&self.grid, self.dim, &self.values)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let g = &self.grid;
        if t < g.t_start() - ALIGN_TOL || t > g.t_end() + ALIGN_TOL {
            return Err(Error::Domain {
                what: "path time",
                value: t,
                lower: g.t_start(),
                upper: g.t_end(),
            });
        }
        let pos = g.position(t).clamp(0.0, (g.n_nodes() - 1) as f64);
        self.view().eval_position(pos, out);
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// The segment `x_t`, i.e. `v -> x(t+v)` on `[-L, 0]`.
    pub fn segment_at(&self, t: f64) -> Result<Segment<'_>> {
        let g = &self.grid;
        if t < -1.0 - ALIGN_TOL || t > g.t_end() + ALIGN_TOL || t - g.delay() < g.t_start() - ALIGN_TOL {
            return Err(Error::Domain {
                what: "segment anchor",
                value: t,
                lower: -1.0,
                upper: g.t_end(),
            });
        }
        Ok(self.view().segment(t))
    }
}

/// Windowed view `eta(v) = x(t+v)`, `v in [-L, 0]`, of a path at anchor `t`.
#[derive(Clone, Copy, Debug)]
pub struct Segment<'a> {
    view: PathView<'a>,
    anchor: f64,
    /// Fractional node position of the anchor.
    end_pos: f64,
}

impl<'a> Segment<'a> {
    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn delay(&self) -> f64 {
        self.view.grid.delay()
    }

    pub fn dim(&self) -> usize {
        self.view.dim
    }

    fn start_pos(&self) -> f64 {
        snap(self.end_pos - self.view.grid.delay_steps() as f64)
    }

    /// `eta(v)` for `v in [-L, 0]`.
    pub fn eval_into(&self, v: f64, out: &mut [f64]) {
        debug_assert!(v <= ALIGN_TOL && v >= -self.delay() - ALIGN_TOL);
        let pos = self.end_pos + v * self.view.grid.steps_per_unit() as f64;
        self.view.eval_position(pos, out)
    }

    pub fn eval(&self, v: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(v, &mut out);
        out
    }

    /// `eta(0)`, without interpolation arithmetic when the anchor is a node.
    pub fn head(&self, out: &mut [f64]) {
        self.view.eval_position(self.end_pos, out)
    }

    /// `eta(-L)`.
    pub fn tail(&self, out: &mut [f64]) {
        self.view.eval_position(self.start_pos(), out)
    }

    /// Coordinate `c` of `eta(0)`.
    pub fn head_component(&self, c: usize) -> f64 {
        self.view.component_at_position(self.end_pos, c)
    }

    /// Coordinate `c` of `eta(-L)`.
    pub fn tail_component(&self, c: usize) -> f64 {
        self.view.component_at_position(self.start_pos(), c)
    }

    /// Visits the breakpoints of the piecewise-linear window in increasing
    /// order of `v`: the left endpoint, every interior node, the right
    /// endpoint. For `L = 0` the single point is visited once.
    pub fn for_each_breakpoint(&self, mut f: impl FnMut(f64, &[f64])) {
        let spu = self.view.grid.steps_per_unit() as f64;
        let p0 = self.start_pos();
        let p1 = self.end_pos;
        let mut buf = vec![0.0; self.dim()];
        self.view.eval_position(p0, &mut buf);
        f((p0 - p1) / spu, &buf);
        if p1 == p0 {
            return;
        }
        let first = p0.floor() as usize + 1;
        let last = p1.ceil() as usize;
        for i in first..last {
            f((i as f64 - p1) / spu, self.view.node(i));
        }
        self.view.eval_position(p1, &mut buf);
        f(0.0, &buf);
    }

    /// `sup_{v in [-L,0]} |eta(v)|` in the Euclidean norm.
    pub fn sup_norm(&self) -> f64 {
        let mut best: f64 = 0.0;
        self.for_each_breakpoint(|_, x| best = best.max(euclidean(x)));
        best
    }

    /// `int_{-L}^0 eta(v) dv` by the trapezoidal rule through the breakpoints,
    /// which is exact for the piecewise-linear representative.
    pub fn integral_into(&self, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut prev: Option<(f64, Vec<f64>)> = None;
        self.for_each_breakpoint(|v, x| {
            if let Some((pv, px)) = prev.as_mut() {
                let w = 0.5 * (v - *pv);
                for ((o, &a), &b) in out.iter_mut().zip(px.iter()).zip(x) {
                    *o += w * (a + b);
                }
                *pv = v;
                px.copy_from_slice(x);
            } else {
                prev = Some((v, x.to_vec()));
            }
        });
    }
}

pub fn euclidean(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

type ThetaFn = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

#[derive(Clone)]
enum InitialRepr {
    /// Coefficients in ascending powers of `t`, one vector per coordinate.
    Polynomial(Vec<Vec<f64>>),
    /// Node values on `[lower, 0]` with the given resolution.
    Nodes {
        steps_per_unit: usize,
        values: Vec<f64>,
    },
    Closure(ThetaFn),
}

/// A realized initial function `theta: [lower, 0] -> R^d`.
#[derive(Clone)]
pub struct InitialFunction {
    lower: f64,
    dim: usize,
    repr: InitialRepr,
}

impl fmt::Debug for InitialFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            InitialRepr::Polynomial(c) => format!("polynomial {c:?}"),
            InitialRepr::Nodes { steps_per_unit, values } => {
                format!("{} nodes at {steps_per_unit}/unit", values.len() / self.dim)
            }
            InitialRepr::Closure(_) => "closure".to_string(),
        };
        f.debug_struct("InitialFunction")
            .field("lower", &self.lower)
            .field("dim", &self.dim)
            .field("repr", &kind)
            .finish()
    }
}

impl InitialFunction {
    /// `theta(t) = value` on `[-delay, 0]`.
    pub fn constant(delay: f64, value: Vec<f64>) -> Self {
        Self {
            lower: -delay,
            dim: value.len(),
            repr: InitialRepr::Polynomial(value.into_iter().map(|c| vec![c]).collect()),
        }
    }

    /// Per-coordinate polynomial in ascending powers of `t`.
    pub fn polynomial(delay: f64, coeffs: Vec<Vec<f64>>) -> Self {
        Self {
            lower: -delay,
            dim: coeffs.len(),
            repr: InitialRepr::Polynomial(coeffs),
        }
    }

    /// Piecewise-linear function through row-major `values` at nodes
    /// `-delay + j / steps_per_unit`.
    pub fn from_nodes(delay: f64, steps_per_unit: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        let steps = as_steps(delay, steps_per_unit)
            .ok_or_else(|| Error::config("initial node grid does not cover the delay window"))?;
        if dim == 0 || values.len() != (steps + 1) * dim {
            return Err(Error::config(format!(
                "initial function needs {} values, got {}",
                (steps + 1) * dim,
                values.len()
            )));
        }
        Ok(Self {
            lower: -delay,
            dim,
            repr: InitialRepr::Nodes { steps_per_unit, values },
        })
    }

    pub fn from_fn(delay: f64, dim: usize, f: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        Self {
            lower: -delay,
            dim,
            repr: InitialRepr::Closure(Arc::new(f)),
        }
    }

    /// Left end of the domain (`-L` for a function defined on `[-L, 0]`).
    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn polynomial_coeffs(&self) -> Option<&[Vec<f64>]> {
        match &self.repr {
            InitialRepr::Polynomial(c) => Some(c),
            _ => None,
        }
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        if t < self.lower - ALIGN_TOL || t > ALIGN_TOL {
            return Err(Error::Domain {
                what: "initial function time",
                value: t,
                lower: self.lower,
                upper: 0.0,
            });
        }
        let t = t.clamp(self.lower, 0.0);
        match &self.repr {
            InitialRepr::Polynomial(coeffs) => {
                for (o, c) in out.iter_mut().zip(coeffs) {
                    *o = c.iter().rev().fold(0.0, |acc, &a| acc * t + a);
                }
            }
            InitialRepr::Nodes { steps_per_unit, values } => {
                let view = PathView::new(&DUMMY_GRID, self.dim, values);
                let pos = snap((t - self.lower) * *steps_per_unit as f64);
                let max = (values.len() / self.dim - 1) as f64;
                view.eval_position(pos.min(max), out);
            }
            InitialRepr::Closure(f) => f(t, out),
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// `||theta||` over `[lower, 0]`: exact for node representations, over a
    /// dense check grid otherwise.
    pub fn sup_norm(&self) -> f64 {
        match &self.repr {
            InitialRepr::Nodes { values, .. } => values.chunks(self.dim).map(euclidean).fold(0.0, f64::max),
            _ => {
                let mut buf = vec![0.0; self.dim];
                let mut best: f64 = 0.0;
                for t in self.check_points() {
                    self.eval_into(t, &mut buf).expect("check point inside domain");
                    best = best.max(euclidean(&buf));
                }
                best
            }
        }
    }

    fn check_points(&self) -> impl Iterator<Item = f64> + '_ {
        const N: usize = 1024;
        let lower = self.lower;
        (0..=N).map(move |j| lower - lower * j as f64 / N as f64)
    }

    /// Rejects functions producing non-finite values on a dense check grid.
    pub fn validate(&self) -> Result<()> {
        let mut buf = vec![0.0; self.dim];
        for t in self.check_points() {
            self.eval_into(t, &mut buf)?;
            if buf.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("initial function is not finite at t = {t}")));
            }
        }
        Ok(())
    }
}

// Only `eval_position`, which ignores the grid, is called through this.
static DUMMY_GRID: TimeGrid = TimeGrid {
    delay: 0.0,
    horizon: 1.0,
    steps_per_unit: 1,
    delay_steps: 0,
    horizon_steps: 1,
};

/// `hat-theta`: `theta` on `[-L, 0]`, extended by the constant `theta(-L)` on
/// `[-1-L, -L]`.
#[derive(Clone, Debug)]
pub struct ExtendedInitial {
    theta: InitialFunction,
    delay: f64,
}

impl ExtendedInitial {
    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn theta(&self) -> &InitialFunction {
        &self.theta
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let lower = -1.0 - self.delay;
        if t < lower - ALIGN_TOL || t > ALIGN_TOL {
            return Err(Error::Domain {
                what: "extended initial time",
                value: t,
                lower,
                upper: 0.0,
            });
        }
        self.theta.eval_into(t.max(-self.delay), out)
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.theta.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }
}

/// Extends `theta` (defined on `[-L, 0]`) constantly to `[-1-L, -L]`.
pub fn extend_initial(theta: &InitialFunction, delay: f64) -> Result<ExtendedInitial> {
    if !(delay.is_finite() && delay >= 0.0) {
        return Err(Error::config(format!("delay must be non-negative, got {delay}")));
    }
    if theta.lower > -delay + ALIGN_TOL {
        return Err(Error::config(format!(
            "initial function is defined on [{}, 0] but the delay window is [{}, 0]",
            theta.lower, -delay
        )));
    }
    Ok(ExtendedInitial {
        theta: theta.clone(),
        delay,
    })
}

/// Generator of random `F_0`-measurable initial functions.
#[derive(Clone, Debug)]
pub enum InitialProcess {
    /// The same deterministic function on every path.
    Fixed(InitialFunction),
    /// `theta(v) = level + scale * B(v + L)` for a standard `d`-dimensional
    /// Brownian motion `B` started at `v = -L`, sampled at `steps_per_unit`
    /// and interpolated linearly.
    BrownianPath {
        level: Vec<f64>,
        scale: f64,
        steps_per_unit: usize,
    },
}

impl InitialProcess {
    pub fn dim(&self) -> usize {
        match self {
            InitialProcess::Fixed(f) => f.dim(),
            InitialProcess::BrownianPath { level, .. } => level.len(),
        }
    }

    /// Draws one initial function on `[-delay, 0]`.
    pub fn sample<R: Rng + ?Sized>(&self, delay: f64, rng: &mut R) -> Result<InitialFunction> {
        match self {
            InitialProcess::Fixed(f) => {
                if f.lower() > -delay + ALIGN_TOL {
                    return Err(Error::config("fixed initial function does not cover the delay window"));
                }
                Ok(f.clone())
            }
            InitialProcess::BrownianPath {
                level,
                scale,
                steps_per_unit,
            } => {
                let d = level.len();
                let steps = as_steps(delay, *steps_per_unit)
                    .ok_or_else(|| Error::config("Brownian initial resolution does not divide the delay"))?;
                let sd = scale * (1.0 / *steps_per_unit as f64).sqrt();
                let mut values = Vec::with_capacity((steps + 1) * d);
                values.extend_from_slice(level);
                for j in 0..steps {
                    for c in 0..d {
                        let z: f64 = rng.sample(StandardNormal);
                        let prev = values[j * d + c];
                        values.push(prev + sd * z);
                    }
                }
                InitialFunction::from_nodes(delay, *steps_per_unit, d, values)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_path(delay: f64, horizon: f64, spu: usize) -> SamplePath {
        let grid = TimeGrid::new(delay, horizon, spu).unwrap();
        SamplePath::from_fn(grid, 1, |t, x| x[0] = t).unwrap()
    }

    #[test]
    fn grid_nodes_include_landmarks() {
        let g = TimeGrid::new(1.0, 2.0, 8).unwrap();
        assert_eq!(g.t_start(), -2.0);
        assert_eq!(g.n_nodes(), 33);
        assert_eq!(g.time(g.zero_index()), 0.0);
        assert_eq!(g.index_of(-1.0).unwrap(), 8);
        assert_eq!(g.index_of(2.0).unwrap(), 32);
        assert!(matches!(g.index_of(0.01), Err(Error::Alignment { .. })));
        assert!(matches!(g.index_of(2.5), Err(Error::Domain { .. })));
        assert!(TimeGrid::new(0.3, 1.0, 8).is_err());
        assert!(TimeGrid::new(1.0, 0.0, 8).is_err());
    }

    #[test]
    fn extension_of_identity_is_constant_below_delay() {
        let theta = InitialFunction::polynomial(1.0, vec![vec![0.0, 1.0]]);
        let hat = extend_initial(&theta, 1.0).unwrap();
        assert_eq!(hat.eval(-1.5).unwrap(), vec![-1.0]);
        assert_eq!(hat.eval(-0.25).unwrap(), vec![-0.25]);
        assert_eq!(hat.eval(-1.0).unwrap(), vec![-1.0]);
        assert!(hat.eval(-2.5).is_err());
        assert!(hat.eval(0.5).is_err());
    }

    #[test]
    fn extension_of_zero_is_zero() {
        let theta = InitialFunction::constant(1.0, vec![0.0, 0.0]);
        let hat = extend_initial(&theta, 1.0).unwrap();
        for j in 0..=20 {
            let t = -2.0 + j as f64 * 0.1;
            assert_eq!(hat.eval(t.min(0.0)).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn extension_of_square_root() {
        let theta = InitialFunction::from_fn(1.0, 1, |t, x| x[0] = t.abs().sqrt());
        let hat = extend_initial(&theta, 1.0).unwrap();
        assert_eq!(hat.eval(-2.0).unwrap(), vec![1.0]);
        assert_eq!(hat.eval(-0.25).unwrap(), vec![0.5]);
    }

    #[test]
    fn extension_rejects_short_domain() {
        let theta = InitialFunction::constant(0.5, vec![1.0]);
        assert!(matches!(extend_initial(&theta, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn segment_of_constant_path() {
        let grid = TimeGrid::new(1.0, 1.0, 4).unwrap();
        let path = SamplePath::from_fn(grid, 2, |_, x| x.copy_from_slice(&[3.0, -1.0])).unwrap();
        let seg = path.segment_at(0.5).unwrap();
        for v in [-1.0, -0.6, -0.1, 0.0] {
            assert_eq!(seg.eval(v), vec![3.0, -1.0]);
        }
    }

    #[test]
    fn segment_interpolates_linear_path() {
        let path = linear_path(1.0, 1.0, 4);
        let seg = path.segment_at(0.5).unwrap();
        assert_eq!(seg.eval(-0.25), vec![0.25]);
        assert!((seg.eval(-0.3)[0] - 0.2).abs() < 1e-15);
        let mut end = [0.0];
        seg.head(&mut end);
        assert_eq!(end[0], 0.5);
        seg.tail(&mut end);
        assert_eq!(end[0], -0.5);
    }

    #[test]
    fn segment_of_extended_initial() {
        let theta = InitialFunction::polynomial(1.0, vec![vec![0.0, 1.0]]);
        let hat = extend_initial(&theta, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 1.0, 8).unwrap();
        let path = SamplePath::from_fn(grid, 1, |t, x| {
            if t <= 0.0 {
                hat.eval_into(t, x).unwrap()
            } else {
                x[0] = 0.0
            }
        })
        .unwrap();
        let seg = path.segment_at(-1.0).unwrap();
        for j in 0..=8 {
            let v = -(j as f64) / 8.0;
            assert_eq!(seg.eval(v), hat.eval(-1.0 + v).unwrap());
        }
    }

    #[test]
    fn segment_anchor_out_of_range() {
        let path = linear_path(1.0, 1.0, 4);
        assert!(matches!(path.segment_at(1.5), Err(Error::Domain { .. })));
        assert!(matches!(path.segment_at(-1.25), Err(Error::Domain { .. })));
    }

    #[test]
    fn sup_norm_examples() {
        let zero = SamplePath::from_fn(TimeGrid::new(1.0, 1.0, 4).unwrap(), 1, |_, x| x[0] = 0.0).unwrap();
        assert_eq!(zero.segment_at(0.0).unwrap().sup_norm(), 0.0);

        let path = linear_path(1.0, 1.0, 4);
        assert_eq!(path.segment_at(0.0).unwrap().sup_norm(), 1.0);

        // Nodes at (-1, 2), (-0.5, -3), (0, 1) on a half-unit grid.
        let grid = TimeGrid::new(1.0, 1.0, 2).unwrap();
        let pts = [(-1.0, 2.0), (-0.5, -3.0), (0.0, 1.0)];
        let path = SamplePath::from_fn(grid, 1, |t, x| {
            x[0] = pts.iter().find(|p| p.0 == t).map_or(0.0, |p| p.1)
        })
        .unwrap();
        assert_eq!(path.segment_at(0.0).unwrap().sup_norm(), 3.0);
    }

    #[test]
    fn sup_norm_with_unaligned_anchor_uses_interpolated_endpoints() {
        let path = linear_path(1.0, 1.0, 4);
        // Window [-0.9, 0.1] for anchor 0.1: max |t| = 0.9 at the left end.
        let seg = path.segment_at(0.1).unwrap();
        assert!((seg.sup_norm() - 0.9).abs() < 1e-14);
    }

    #[test]
    fn integral_is_exact_for_linear_path() {
        let path = linear_path(1.0, 1.0, 8);
        let mut out = [0.0];
        path.segment_at(0.0).unwrap().integral_into(&mut out);
        assert!((out[0] + 0.5).abs() < 1e-15);
        path.segment_at(0.3).unwrap().integral_into(&mut out);
        // int_{-0.7}^{0.3} t dt = (0.09 - 0.49) / 2
        assert!((out[0] + 0.2).abs() < 1e-14);
    }

    #[test]
    fn brownian_initial_is_reproducible_and_starts_at_level() {
        use rand::SeedableRng;
        let p = InitialProcess::BrownianPath {
            level: vec![1.0],
            scale: 0.5,
            steps_per_unit: 64,
        };
        let a = p.sample(1.0, &mut rand_chacha::ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = p.sample(1.0, &mut rand_chacha::ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a.eval(-1.0).unwrap(), vec![1.0]);
        for t in [-0.77, -0.5, 0.0] {
            assert_eq!(a.eval(t).unwrap(), b.eval(t).unwrap());
        }
        a.validate().unwrap();
    }

    #[test]
    fn non_finite_initial_is_rejected() {
        let theta = InitialFunction::from_fn(1.0, 1, |t, x| x[0] = 1.0 / (t + 0.5));
        assert!(theta.validate().is_err());
    }
}
