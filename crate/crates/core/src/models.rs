//! Drift and diffusion functionals of `(t, segment)` and the built-in test
//! models.
//!
//! Functionals are pathwise: `F(t, eta)` and `G(t, eta)` see one realized
//! segment and nothing else. Diffusion values are `d x m` matrices written
//! row-major.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::paths::{as_steps, euclidean, InitialFunction, InitialProcess, SamplePath, Segment, TimeGrid};

/// A stochastic functional differential equation
/// `dx = F(t, x_t) dt + G(t, x_t) dW` with memory window `[-L, 0]`.
pub trait SfdeModel: Send + Sync {
    fn state_dim(&self) -> usize;

    fn noise_dim(&self) -> usize;

    fn delay(&self) -> f64;

    /// `F(t, eta)` into `out` (length `d`).
    fn drift(&self, t: f64, segment: &Segment<'_>, out: &mut [f64]);

    /// `G(t, eta)` into `out` (length `d * m`, row-major).
    fn diffusion(&self, t: f64, segment: &Segment<'_>, out: &mut [f64]);

    fn initial(&self) -> &InitialProcess;

    /// Metadata only; never used for correctness.
    fn declared_lipschitz(&self) -> Option<f64> {
        None
    }

    /// Whether the model asserts Lipschitz regularity of `F`, `G` in `t`, as
    /// required by the lagged-time scheme.
    fn time_regular(&self) -> bool {
        false
    }

    /// `Some(c)` when `F(t, eta) = c * eta(-L)` and `G = 0`.
    fn linear_point_delay(&self) -> Option<f64> {
        None
    }

    fn name(&self) -> &str {
        "custom"
    }
}

/// Numeric model parameters, keyed by name.
pub type ParamMap = BTreeMap<String, f64>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelKind {
    /// `F = a eta(-L)`, `G = diag(b eta(-L))`.
    PointDelayLinear { a: f64, b: f64 },
    /// `F = (a / L) int_{-L}^0 eta`, `G = diag(b eta(0))`.
    DistributedDelay { a: f64, b: f64 },
    /// `L = 0`, `F = mu eta(0)`, `G = diag(sigma eta(0))`.
    GbmL0 { mu: f64, sigma: f64 },
    /// `F = eta(-L)`, `G = 0`.
    DeterministicDde,
    /// `F = 0`, `G = I`.
    PureNoise,
}

/// One of the named built-in models. All of them are time-autonomous.
#[derive(Clone, Debug)]
pub struct BuiltinModel {
    name: &'static str,
    kind: ModelKind,
    dim: usize,
    delay: f64,
    initial: InitialProcess,
}

pub const BUILTIN_NAMES: [&str; 5] = [
    "point_delay_linear",
    "distributed_delay",
    "gbm_l0",
    "deterministic_dde",
    "pure_noise",
];

struct Params<'a> {
    model: &'a str,
    map: &'a ParamMap,
}

impl Params<'_> {
    fn get(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match (self.map.get(key), default) {
            (Some(&v), _) if v.is_finite() => Ok(v),
            (Some(&v), _) => Err(Error::config(format!(
                "{}: parameter {key} = {v} is not finite",
                self.model
            ))),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(Error::config(format!("{}: missing parameter {key}", self.model))),
        }
    }

    fn count(&self, key: &str, default: usize) -> Result<usize> {
        let v = self.get(key, Some(default as f64))?;
        if v < 1.0 || v.fract() != 0.0 {
            return Err(Error::config(format!(
                "{}: {key} must be a positive integer, got {v}",
                self.model
            )));
        }
        Ok(v as usize)
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for key in self.map.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::config(format!("{}: unknown parameter {key}", self.model)));
            }
        }
        Ok(())
    }
}

const THETA_KEYS: [&str; 3] = ["theta_level", "theta_scale", "theta_resolution"];

/// Builds a named model from its parameters.
///
/// Shared keys: `dim` (default 1), `delay` (default 1; fixed at 0 for
/// `gbm_l0`), and the initial process `theta_level`, `theta_scale`,
/// `theta_resolution`. A positive `theta_scale` gives the Brownian-path
/// initial process `level + scale * B(v + L)`; otherwise `theta` is the
/// constant `theta_level`.
pub fn builtin_model(name: &str, params: &ParamMap) -> Result<BuiltinModel> {
    let p = Params {
        model: name,
        map: params,
    };
    let (name, kind, keys): (&'static str, ModelKind, &[&str]) = match name {
        "point_delay_linear" => (
            "point_delay_linear",
            ModelKind::PointDelayLinear {
                a: p.get("a", None)?,
                b: p.get("b", None)?,
            },
            &["a", "b"],
        ),
        "distributed_delay" => (
            "distributed_delay",
            ModelKind::DistributedDelay {
                a: p.get("a", None)?,
                b: p.get("b", None)?,
            },
            &["a", "b"],
        ),
        "gbm_l0" => (
            "gbm_l0",
            ModelKind::GbmL0 {
                mu: p.get("mu", None)?,
                sigma: p.get("sigma", None)?,
            },
            &["mu", "sigma", "x0"],
        ),
        "deterministic_dde" => ("deterministic_dde", ModelKind::DeterministicDde, &[]),
        "pure_noise" => ("pure_noise", ModelKind::PureNoise, &[]),
        other => {
            return Err(Error::config(format!(
                "unknown model {other}; expected one of {}",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    let mut allowed: Vec<&str> = keys.to_vec();
    allowed.push("dim");
    match kind {
        ModelKind::GbmL0 { .. } => allowed.push("theta_level"),
        ModelKind::PureNoise => allowed.push("delay"),
        _ => {
            allowed.push("delay");
            allowed.extend(THETA_KEYS);
        }
    }
    p.check_keys(&allowed)?;

    let dim = p.count("dim", 1)?;
    let delay = match kind {
        ModelKind::GbmL0 { .. } => 0.0,
        _ => p.get("delay", Some(1.0))?,
    };
    if !(delay >= 0.0) {
        return Err(Error::config(format!("{name}: delay must be non-negative")));
    }
    if matches!(kind, ModelKind::DistributedDelay { .. }) && delay <= 0.0 {
        return Err(Error::config("distributed_delay needs a positive delay"));
    }

    let initial = match kind {
        ModelKind::PureNoise => InitialProcess::Fixed(InitialFunction::constant(delay, vec![0.0; dim])),
        ModelKind::GbmL0 { .. } => {
            let x0 = match (params.get("x0"), params.get("theta_level")) {
                (Some(_), Some(_)) => return Err(Error::config("gbm_l0: give x0 or theta_level, not both")),
                (Some(&v), None) | (None, Some(&v)) => v,
                (None, None) => 1.0,
            };
            InitialProcess::Fixed(InitialFunction::constant(0.0, vec![x0; dim]))
        }
        _ => {
            let level = p.get("theta_level", Some(1.0))?;
            let scale = p.get("theta_scale", Some(0.0))?;
            if scale < 0.0 {
                return Err(Error::config(format!("{name}: theta_scale must be non-negative")));
            }
            if scale > 0.0 && delay > 0.0 {
                let resolution = p.count("theta_resolution", 2048)?;
                if as_steps(delay, resolution).is_none() {
                    return Err(Error::config(format!(
                        "{name}: theta_resolution {resolution} does not divide the delay {delay}"
                    )));
                }
                InitialProcess::BrownianPath {
                    level: vec![level; dim],
                    scale,
                    steps_per_unit: resolution,
                }
            } else {
                InitialProcess::Fixed(InitialFunction::constant(delay, vec![level; dim]))
            }
        }
    };
    Ok(BuiltinModel {
        name,
        kind,
        dim,
        delay,
        initial,
    })
}

impl BuiltinModel {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Replaces the initial process.
    pub fn with_initial(mut self, initial: InitialProcess) -> Result<Self> {
        if initial.dim() != self.dim {
            return Err(Error::config("initial process dimension does not match the model"));
        }
        self.initial = initial;
        Ok(self)
    }
}

fn write_diagonal(out: &mut [f64], d: usize, mut entry: impl FnMut(usize) -> f64) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for i in 0..d {
        out[i * d + i] = entry(i);
    }
}

impl SfdeModel for BuiltinModel {
    fn state_dim(&self) -> usize {
        self.dim
    }

    fn noise_dim(&self) -> usize {
        match self.kind {
            ModelKind::DeterministicDde => 1,
            _ => self.dim,
        }
    }

    fn delay(&self) -> f64 {
        self.delay
    }

    fn drift(&self, _t: f64, segment: &Segment<'_>, out: &mut [f64]) {
        match self.kind {
            ModelKind::PointDelayLinear { a, .. } => {
                for (c, o) in out.iter_mut().enumerate() {
                    *o = a * segment.tail_component(c);
                }
            }
            ModelKind::DistributedDelay { a, .. } => {
                segment.integral_into(out);
                let w = a / self.delay;
                out.iter_mut().for_each(|o| *o *= w);
            }
            ModelKind::GbmL0 { mu, .. } => {
                for (c, o) in out.iter_mut().enumerate() {
                    *o = mu * segment.head_component(c);
                }
            }
            ModelKind::DeterministicDde => {
                for (c, o) in out.iter_mut().enumerate() {
                    *o = segment.tail_component(c);
                }
            }
            ModelKind::PureNoise => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    fn diffusion(&self, _t: f64, segment: &Segment<'_>, out: &mut [f64]) {
        let d = self.dim;
        match self.kind {
            ModelKind::PointDelayLinear { b, .. } => write_diagonal(out, d, |c| b * segment.tail_component(c)),
            ModelKind::DistributedDelay { b, .. } => write_diagonal(out, d, |c| b * segment.head_component(c)),
            ModelKind::GbmL0 { sigma, .. } => write_diagonal(out, d, |c| sigma * segment.head_component(c)),
            ModelKind::DeterministicDde => out.iter_mut().for_each(|o| *o = 0.0),
            ModelKind::PureNoise => write_diagonal(out, d, |_| 1.0),
        }
    }

    fn initial(&self) -> &InitialProcess {
        &self.initial
    }

    fn declared_lipschitz(&self) -> Option<f64> {
        Some(match self.kind {
            ModelKind::PointDelayLinear { a, b } | ModelKind::DistributedDelay { a, b } => a.abs() + b.abs(),
            ModelKind::GbmL0 { mu, sigma } => mu.abs() + sigma.abs(),
            ModelKind::DeterministicDde => 1.0,
            ModelKind::PureNoise => 0.0,
        })
    }

    fn time_regular(&self) -> bool {
        true
    }

    fn linear_point_delay(&self) -> Option<f64> {
        match self.kind {
            ModelKind::DeterministicDde => Some(1.0),
            ModelKind::PointDelayLinear { a, b: 0.0 } => Some(a),
            _ => None,
        }
    }

    fn name(&self) -> &str {
        self.name
    }
}

type Functional = Box<dyn Fn(f64, &Segment<'_>, &mut [f64]) + Send + Sync>;

/// A model assembled from closures; both functionals default to zero.
pub struct FnModel {
    dim: usize,
    noise_dim: usize,
    delay: f64,
    drift: Functional,
    diffusion: Functional,
    initial: InitialProcess,
    time_regular: bool,
    declared_lipschitz: Option<f64>,
}

impl fmt::Debug for FnModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnModel")
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("delay", &self.delay)
            .finish_non_exhaustive()
    }
}

impl FnModel {
    pub fn new(dim: usize, noise_dim: usize, delay: f64, initial: InitialProcess) -> Self {
        Self {
            dim,
            noise_dim,
            delay,
            drift: Box::new(|_, _, out| out.iter_mut().for_each(|o| *o = 0.0)),
            diffusion: Box::new(|_, _, out| out.iter_mut().for_each(|o| *o = 0.0)),
            initial,
            time_regular: false,
            declared_lipschitz: None,
        }
    }

    pub fn with_drift(mut self, f: impl Fn(f64, &Segment<'_>, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.drift = Box::new(f);
        self
    }

    pub fn with_diffusion(mut self, g: impl Fn(f64, &Segment<'_>, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.diffusion = Box::new(g);
        self
    }

    pub fn with_time_regular(mut self, flag: bool) -> Self {
        self.time_regular = flag;
        self
    }

    pub fn with_declared_lipschitz(mut self, alpha: f64) -> Self {
        self.declared_lipschitz = Some(alpha);
        self
    }
}

impl SfdeModel for FnModel {
    fn state_dim(&self) -> usize {
        self.dim
    }

    fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    fn delay(&self) -> f64 {
        self.delay
    }

    fn drift(&self, t: f64, segment: &Segment<'_>, out: &mut [f64]) {
        (self.drift)(t, segment, out)
    }

    fn diffusion(&self, t: f64, segment: &Segment<'_>, out: &mut [f64]) {
        (self.diffusion)(t, segment, out)
    }

    fn initial(&self) -> &InitialProcess {
        &self.initial
    }

    fn declared_lipschitz(&self) -> Option<f64> {
        self.declared_lipschitz
    }

    fn time_regular(&self) -> bool {
        self.time_regular
    }
}

/// Empirical Lipschitz constant `alpha` and linear-growth constant `D`.
///
/// Both are maxima over probes and therefore lower bounds of the true
/// constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzProbe {
    pub alpha: f64,
    pub growth: f64,
    pub pairs_used: usize,
}

/// Resolution of the probe segments.
fn probe_grid(delay: f64) -> Result<TimeGrid> {
    let mut spu = 16;
    while spu <= 1 << 20 {
        if as_steps(delay, spu).is_some() {
            return TimeGrid::new(delay, 1.0 / spu as f64, spu);
        }
        spu *= 2;
    }
    Err(Error::config(format!("delay {delay} is not dyadic enough to probe")))
}

#[derive(Clone, Copy)]
enum Shape {
    Nodes,
    Walk,
    Constant,
    Spike,
}

fn random_shape<R: Rng>(rng: &mut R, shape: Shape, scale: f64, n_nodes: usize, dim: usize, out: &mut [f64]) {
    match shape {
        Shape::Nodes => out
            .iter_mut()
            .for_each(|o| *o = scale * rng.sample::<f64, _>(StandardNormal)),
        Shape::Walk => {
            let step = scale / (n_nodes as f64).sqrt();
            let mut state: Vec<f64> = (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
            for chunk in out.chunks_mut(dim) {
                for (s, o) in state.iter_mut().zip(chunk.iter_mut()) {
                    *s += step * rng.sample::<f64, _>(StandardNormal);
                    *o = *s;
                }
            }
        }
        Shape::Constant => {
            let v: Vec<f64> = (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
            for chunk in out.chunks_mut(dim) {
                chunk.copy_from_slice(&v);
            }
        }
        Shape::Spike => {
            out.iter_mut().for_each(|o| *o = 0.0);
            let j = rng.random_range(0..n_nodes);
            for c in 0..dim {
                out[j * dim + c] = scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
}

fn frobenius_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Probes `alpha` and `D` with `n_probes` random segment pairs at times drawn
/// uniformly from `[0, horizon]`.
pub fn probe_lipschitz(model: &dyn SfdeModel, n_probes: usize, horizon: f64, seed: u64) -> Result<LipschitzProbe> {
    if n_probes < 2 {
        return Err(Error::config("probe_lipschitz needs at least two probes"));
    }
    let d = model.state_dim();
    let m = model.noise_dim();
    let grid = probe_grid(model.delay())?;
    let n_nodes = grid.n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = [Shape::Nodes, Shape::Walk, Shape::Constant, Shape::Spike];

    let mut v1 = vec![0.0; n_nodes * d];
    let mut delta = vec![0.0; n_nodes * d];
    let (mut f1, mut f2) = (vec![0.0; d], vec![0.0; d]);
    let (mut g1, mut g2) = (vec![0.0; d * m], vec![0.0; d * m]);

    let mut alpha: f64 = 0.0;
    let mut growth: f64 = 0.0;
    let mut pairs_used = 0;

    let measure = |values: &[f64], t: f64, f: &mut [f64], g: &mut [f64]| -> Result<f64> {
        let path = SamplePath::new(grid, d, values.to_vec())?;
        let seg = path.segment_at(0.0)?;
        model.drift(t, &seg, f);
        model.diffusion(t, &seg, g);
        if f.iter().chain(g.iter()).any(|v| !v.is_finite()) {
            return Err(Error::ModelEvaluation { time: t, what: "probe" });
        }
        Ok(seg.sup_norm())
    };

    for probe in 0..n_probes {
        let t = rng.random::<f64>() * horizon;
        if probe == 0 {
            v1.iter_mut().for_each(|v| *v = 0.0);
        } else {
            let scale = 10f64.powf(rng.random_range(-2.0..3.0));
            random_shape(&mut rng, shapes[probe % 2], scale, n_nodes, d, &mut v1);
        }
        let dscale = 10f64.powf(rng.random_range(-3.0..1.0));
        let shape = shapes[rng.random_range(0..4)];
        random_shape(&mut rng, shape, dscale, n_nodes, d, &mut delta);
        let v2: Vec<f64> = v1.iter().zip(&delta).map(|(a, b)| a + b).collect();

        let n1 = measure(&v1, t, &mut f1, &mut g1)?;
        let n2 = measure(&v2, t, &mut f2, &mut g2)?;
        growth = growth
            .max((euclidean(&f1) + euclidean(&g1)) / (1.0 + n1))
            .max((euclidean(&f2) + euclidean(&g2)) / (1.0 + n2));

        let path = SamplePath::new(grid, d, delta.clone())?;
        let dist = path.segment_at(0.0)?.sup_norm();
        if dist > 0.0 {
            let num = frobenius_diff(&f1, &f2) + frobenius_diff(&g1, &g2);
            alpha = alpha.max(num / dist);
            pairs_used += 1;
        }
    }
    Ok(LipschitzProbe {
        alpha,
        growth,
        pairs_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, f64)]) -> ParamMap {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn one_segment_eval(model: &dyn SfdeModel, values: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
        let grid = TimeGrid::new(model.delay(), 1.0, 64).unwrap();
        let path = SamplePath::from_fn(grid, 1, |t, x| x[0] = values(t)).unwrap();
        let seg = path.segment_at(0.0).unwrap();
        let mut f = vec![0.0; 1];
        let mut g = vec![0.0; model.noise_dim()];
        model.drift(0.3, &seg, &mut f);
        model.diffusion(0.3, &seg, &mut g);
        (f, g)
    }

    #[test]
    fn point_delay_on_constant_segment() {
        let m = builtin_model("point_delay_linear", &params(&[("a", 1.0), ("b", 0.0), ("delay", 1.0)])).unwrap();
        let (f, g) = one_segment_eval(&m, |_| 1.0);
        assert_eq!(f, vec![1.0]);
        assert_eq!(g, vec![0.0]);
        assert_eq!(m.declared_lipschitz(), Some(1.0));
    }

    #[test]
    fn distributed_delay_of_identity() {
        let a = 3.0;
        let m = builtin_model("distributed_delay", &params(&[("a", a), ("b", 0.5)])).unwrap();
        let (f, g) = one_segment_eval(&m, |t| t);
        assert!((f[0] - a * -0.5).abs() < 1e-14);
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn gbm_declares_sum_of_rates() {
        let m = builtin_model("gbm_l0", &params(&[("mu", 0.05), ("sigma", -0.2)])).unwrap();
        assert_eq!(m.delay(), 0.0);
        assert!((m.declared_lipschitz().unwrap() - 0.25).abs() < 1e-15);
        let (f, g) = one_segment_eval(&m, |t| 2.0 + t);
        assert!((f[0] - 0.1).abs() < 1e-15);
        assert!((g[0] + 0.4).abs() < 1e-15);
    }

    #[test]
    fn builtin_errors() {
        assert!(builtin_model("heston", &ParamMap::new()).is_err());
        assert!(builtin_model("point_delay_linear", &params(&[("a", 1.0)])).is_err());
        assert!(builtin_model("pure_noise", &params(&[("sigma", 1.0)])).is_err());
        assert!(builtin_model("gbm_l0", &params(&[("mu", 0.0), ("sigma", 0.1), ("delay", 1.0)])).is_err());
        assert!(builtin_model("distributed_delay", &params(&[("a", 1.0), ("b", 0.0), ("delay", 0.0)])).is_err());
        assert!(builtin_model("deterministic_dde", &params(&[("dim", 1.5)])).is_err());
        assert!(builtin_model("deterministic_dde", &params(&[("theta_scale", -1.0)])).is_err());
    }

    #[test]
    fn brownian_initial_from_params() {
        let m = builtin_model(
            "point_delay_linear",
            &params(&[
                ("a", 1.5),
                ("b", 0.1),
                ("theta_scale", 1.0),
                ("theta_resolution", 256.0),
            ]),
        )
        .unwrap();
        assert!(matches!(
            m.initial(),
            InitialProcess::BrownianPath {
                steps_per_unit: 256,
                ..
            }
        ));
    }

    #[test]
    fn probe_point_delay_reaches_analytic_constant() {
        let m = builtin_model("point_delay_linear", &params(&[("a", 2.0), ("b", 1.0)])).unwrap();
        let p = probe_lipschitz(&m, 400, 1.0, 1).unwrap();
        assert!(p.alpha <= 3.0 + 1e-9, "alpha {}", p.alpha);
        assert!(p.alpha > 3.0 - 1e-6, "alpha {}", p.alpha);
        assert!(p.growth <= 3.0 + 1e-9);
    }

    #[test]
    fn probe_constant_drift() {
        let c = 2.5;
        let m = FnModel::new(
            1,
            1,
            1.0,
            InitialProcess::Fixed(InitialFunction::constant(1.0, vec![0.0])),
        )
        .with_drift(move |_, _, out| out[0] = c);
        let p = probe_lipschitz(&m, 100, 1.0, 2).unwrap();
        assert_eq!(p.alpha, 0.0);
        assert!(p.growth <= c && p.growth > 0.0);
    }

    #[test]
    fn probe_pure_noise() {
        let m = builtin_model("pure_noise", &ParamMap::new()).unwrap();
        let p = probe_lipschitz(&m, 100, 1.0, 3).unwrap();
        assert_eq!(p.alpha, 0.0);
        assert_eq!(p.growth, 1.0);
    }

    #[test]
    fn probe_needs_two_probes() {
        let m = builtin_model("pure_noise", &ParamMap::new()).unwrap();
        assert!(probe_lipschitz(&m, 1, 1.0, 0).is_err());
    }
}
