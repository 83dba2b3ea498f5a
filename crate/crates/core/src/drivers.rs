//! Brownian drivers with counter-based seeding.
//!
//! Increments are drawn once on the finest grid and aggregated upward, so
//! every gap size sees the same realization of `W`. Each fine increment is
//! rounded onto the lattice `2^-40 Z`; partial sums of lattice values stay
//! exactly representable in an `f64` while `|W| < 2^13`, which makes
//! aggregation associative and telescoping bit-exact.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::paths::{as_steps, TimeGrid};

const LATTICE: f64 = (1u64 << 40) as f64;

/// Which independent random stream a generator belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamTag {
    Brownian,
    Initial,
}

impl StreamTag {
    fn id(self) -> u64 {
        match self {
            StreamTag::Brownian => 0,
            StreamTag::Initial => 1,
        }
    }

    fn from_id(id: u64) -> Result<Self> {
        match id {
            0 => Ok(StreamTag::Brownian),
            1 => Ok(StreamTag::Initial),
            other => Err(Error::Format(format!("unknown stream tag {other}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub experiment_seed: u64,
    pub path_index: u64,
    pub stream: StreamTag,
}

impl SeedSpec {
    pub fn new(experiment_seed: u64, path_index: u64, stream: StreamTag) -> Self {
        Self {
            experiment_seed,
            path_index,
            stream,
        }
    }

    /// The generator for this stream. The ChaCha key is built from the
    /// experiment seed and path index and the stream tag selects the ChaCha
    /// stream, so the state is a pure function of these three fields.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.experiment_seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.path_index.to_le_bytes());
        key[16..24].copy_from_slice(b"memgapW\0");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream.id());
        rng
    }
}

/// `m`-dimensional Brownian increments on `[0, T]` at `steps_per_unit`.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    steps_per_unit: usize,
    n_steps: usize,
    dims: usize,
    seed: SeedSpec,
    /// Row-major: step `j` occupies `increments[j*m..(j+1)*m]`.
    increments: Vec<f64>,
}

/// Draws the Brownian increments for the `[0, T]` part of `grid`.
pub fn generate_brownian(grid: &TimeGrid, dims: usize, seed: SeedSpec) -> Result<BrownianPath> {
    if dims == 0 {
        return Err(Error::config("Brownian motion needs at least one dimension"));
    }
    if seed.stream != StreamTag::Brownian {
        return Err(Error::config("Brownian increments must use the brownian stream"));
    }
    let n_steps = grid.horizon_steps();
    if n_steps == 0 {
        return Err(Error::config("degenerate grid: no steps on [0, T]"));
    }
    let sd = grid.dt().sqrt();
    let mut rng = seed.rng();
    let increments = (0..n_steps * dims)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            (z * sd * LATTICE).round() / LATTICE
        })
        .collect();
    Ok(BrownianPath {
        steps_per_unit: grid.steps_per_unit(),
        n_steps,
        dims,
        seed,
        increments,
    })
}

impl BrownianPath {
    /// Wraps externally produced increments, e.g. a replayed dump.
    pub fn from_increments(steps_per_unit: usize, dims: usize, seed: SeedSpec, increments: Vec<f64>) -> Result<Self> {
        if steps_per_unit == 0 || dims == 0 || increments.is_empty() || !increments.len().is_multiple_of(dims) {
            return Err(Error::config("Brownian increments do not fit the declared shape"));
        }
        if increments.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite Brownian increment".into()));
        }
        Ok(Self {
            steps_per_unit,
            n_steps: increments.len() / dims,
            dims,
            seed,
            increments,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn steps_per_unit(&self) -> usize {
        self.steps_per_unit
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps_per_unit as f64
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 / self.steps_per_unit as f64
    }

    pub fn seed(&self) -> SeedSpec {
        self.seed
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn increment(&self, step: usize) -> &[f64] {
        &self.increments[step * self.dims..(step + 1) * self.dims]
    }

    /// Sum of fine increments `first..first+count` into `out`.
    pub fn sum_steps(&self, first: usize, count: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for step in first..first + count {
            for (o, &dw) in out.iter_mut().zip(self.increment(step)) {
                *o += dw;
            }
        }
    }

    fn step_index(&self, t: f64) -> Result<usize> {
        let horizon = self.horizon();
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::Domain {
                what: "Brownian time",
                value: t,
                lower: 0.0,
                upper: horizon,
            });
        }
        as_steps(t, self.steps_per_unit).ok_or(Error::Alignment {
            time: t,
            steps_per_unit: self.steps_per_unit,
        })
    }

    /// `W(b) - W(a)` for node-aligned `0 <= a <= b <= T`.
    pub fn aggregate(&self, a: f64, b: f64) -> Result<Vec<f64>> {
        if a > b {
            return Err(Error::config(format!("aggregate needs a <= b, got [{a}, {b}]")));
        }
        let i = self.step_index(a)?;
        let j = self.step_index(b)?;
        let mut out = vec![0.0; self.dims];
        self.sum_steps(i, j - i, &mut out);
        Ok(out)
    }

    /// `W` at every fine node of `[0, T]`, row-major, starting with `W(0) = 0`.
    pub fn cumulative(&self) -> Vec<f64> {
        let m = self.dims;
        let mut w = vec![0.0; (self.n_steps + 1) * m];
        for j in 0..self.n_steps {
            for c in 0..m {
                w[(j + 1) * m + c] = w[j * m + c] + self.increments[j * m + c];
            }
        }
        w
    }

    /// The same realization on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<BrownianPath> {
        if factor == 0 || !self.steps_per_unit.is_multiple_of(factor) || !self.n_steps.is_multiple_of(factor) {
            return Err(Error::config(format!(
                "cannot coarsen {} steps/unit by {factor}",
                self.steps_per_unit
            )));
        }
        let n = self.n_steps / factor;
        let mut increments = vec![0.0; n * self.dims];
        for (j, chunk) in increments.chunks_mut(self.dims).enumerate() {
            self.sum_steps(j * factor, factor, chunk);
        }
        Ok(BrownianPath {
            steps_per_unit: self.steps_per_unit / factor,
            n_steps: n,
            dims: self.dims,
            seed: self.seed,
            increments,
        })
    }

    /// Binary dump: `m: u64`, `dt_fine: f64`, `n_steps: u64`,
    /// `experiment_seed: u64`, `path_index: u64`, `stream_tag: u64`, then the
    /// increments row-major; everything little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.dims as u64).to_le_bytes())?;
        w.write_all(&self.dt().to_le_bytes())?;
        w.write_all(&(self.n_steps as u64).to_le_bytes())?;
        w.write_all(&self.seed.experiment_seed.to_le_bytes())?;
        w.write_all(&self.seed.path_index.to_le_bytes())?;
        w.write_all(&self.seed.stream.id().to_le_bytes())?;
        for v in &self.increments {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let dims = u64::from_le_bytes(next(&mut r)?) as usize;
        let dt = f64::from_le_bytes(next(&mut r)?);
        let n_steps = u64::from_le_bytes(next(&mut r)?) as usize;
        let experiment_seed = u64::from_le_bytes(next(&mut r)?);
        let path_index = u64::from_le_bytes(next(&mut r)?);
        let stream = StreamTag::from_id(u64::from_le_bytes(next(&mut r)?))?;
        let spu = (1.0 / dt).round();
        if dims == 0 || !(spu >= 1.0) || 1.0 / spu != dt {
            return Err(Error::Format(format!("bad Brownian header (m = {dims}, dt = {dt})")));
        }
        let mut increments = Vec::with_capacity(n_steps * dims);
        for _ in 0..n_steps * dims {
            increments.push(f64::from_le_bytes(next(&mut r)?));
        }
        Self::from_increments(
            spu as usize,
            dims,
            SeedSpec::new(experiment_seed, path_index, stream),
            increments,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(horizon: f64, spu: usize) -> TimeGrid {
        TimeGrid::new(0.0, horizon, spu).unwrap()
    }

    fn seed(i: u64) -> SeedSpec {
        SeedSpec::new(7, i, StreamTag::Brownian)
    }

    #[test]
    fn same_seed_same_increments() {
        let g = grid(1.0, 64);
        let a = generate_brownian(&g, 2, seed(3)).unwrap();
        let b = generate_brownian(&g, 2, seed(3)).unwrap();
        assert_eq!(a.increments(), b.increments());
        let c = generate_brownian(&g, 2, seed(4)).unwrap();
        assert_ne!(a.increments(), c.increments());
    }

    #[test]
    fn streams_differ_by_tag() {
        let mut a = SeedSpec::new(1, 0, StreamTag::Brownian).rng();
        let mut b = SeedSpec::new(1, 0, StreamTag::Initial).rng();
        let xa: u64 = a.random();
        let xb: u64 = b.random();
        assert_ne!(xa, xb);
    }

    #[test]
    fn rejects_bad_configuration() {
        let g = grid(1.0, 8);
        assert!(generate_brownian(&g, 0, seed(0)).is_err());
        assert!(generate_brownian(&g, 1, SeedSpec::new(0, 0, StreamTag::Initial)).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let b = generate_brownian(&grid(1.0, 16), 1, seed(1)).unwrap();
        assert_eq!(b.aggregate(0.25, 0.25).unwrap(), vec![0.0]);
        let total: f64 = b.increments().iter().sum();
        assert_eq!(b.aggregate(0.0, 1.0).unwrap(), vec![total]);
        let left = b.aggregate(0.0, 0.375).unwrap()[0];
        let right = b.aggregate(0.375, 1.0).unwrap()[0];
        assert_eq!(left + right, total);
        assert!(matches!(b.aggregate(0.1, 0.5), Err(Error::Alignment { .. })));
        assert!(b.aggregate(0.5, 0.25).is_err());
        assert!(matches!(b.aggregate(0.0, 1.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn coarsening_preserves_sums() {
        let b = generate_brownian(&grid(2.0, 32), 3, seed(2)).unwrap();
        let c = b.coarsen(2).unwrap();
        assert_eq!(c.steps_per_unit(), 16);
        let direct = b.aggregate(0.0, 2.0).unwrap();
        let mut sum = vec![0.0; 3];
        for j in 0..c.n_steps() {
            for (s, v) in sum.iter_mut().zip(c.increment(j)) {
                *s += v;
            }
        }
        assert_eq!(sum, direct);
        assert!(b.coarsen(3).is_err());
    }

    #[test]
    fn binary_dump_round_trips() {
        let b = generate_brownian(&grid(1.0, 8), 2, seed(9)).unwrap();
        let mut buf = Vec::new();
        b.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 48 + 8 * 16);
        let back = BrownianPath::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back, b);
    }
}
