//! Reproducible Q-Wiener increments.
//!
//! Increments live on the lattice `{j·dt : j ∈ ℤ}`. The value for lattice step `j`
//! and mode `k` is a standard normal drawn from the ChaCha stream `k` of `seed`
//! at word position `4·(j + 2⁴⁰)`, scaled by `√dt`. Any window can therefore be
//! regenerated without streaming from an earlier time, and two windows of one
//! realization agree on their overlap bit for bit. The mode weights `c_k` are
//! applied later, by the model.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::model::TimeGrid;

const LATTICE_ORIGIN: i64 = 1 << 40;
const WORDS_PER_DRAW: u128 = 4;

/// One noise realization: a seed, a mode count and a lattice shift (from `θ`-shifts).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseKey {
    pub seed: u64,
    pub modes: usize,
    /// Lattice steps added to every index, `θ(s)` for `s = shift·dt`.
    pub shift: i64,
}

impl NoiseKey {
    pub fn new(seed: u64, modes: usize) -> Self {
        Self {
            seed,
            modes,
            shift: 0,
        }
    }

    /// The key of `θ(steps·dt, ω)`.
    pub fn shifted(self, steps: i64) -> Self {
        Self {
            shift: self.shift + steps,
            ..self
        }
    }

    /// Materialize the increments over `grid`.
    pub fn sample(&self, grid: &TimeGrid) -> Result<NoisePath> {
        if self.modes == 0 {
            return Err(Error::InvalidInput("noise needs at least one mode".into()));
        }
        let steps = grid.steps();
        let first = grid.lattice_start() + self.shift;
        if first + LATTICE_ORIGIN < 0 {
            return Err(Error::Range(format!(
                "lattice index {first} below supported range"
            )));
        }
        let sqdt = grid.dt().sqrt();
        let mut increments = vec![0.0; steps * self.modes];
        for k in 0..self.modes {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(k as u64);
            rng.set_word_pos((first + LATTICE_ORIGIN) as u128 * WORDS_PER_DRAW);
            for i in 0..steps {
                increments[i * self.modes + k] = sqdt * standard_normal(&mut rng);
            }
        }
        Ok(NoisePath {
            grid: *grid,
            modes: self.modes,
            seed: self.seed,
            shift: self.shift,
            increments,
        })
    }
}

/// Box–Muller on two 53-bit uniforms; always consumes exactly four 32-bit words.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = (rng.next_u64() >> 11) as f64 * SCALE;
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Sampled increments `ΔW_k(i)` with variance `dt`, stored step-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    grid: TimeGrid,
    modes: usize,
    seed: u64,
    shift: i64,
    increments: Vec<f64>,
}

impl NoisePath {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn key(&self) -> NoiseKey {
        NoiseKey {
            seed: self.seed,
            modes: self.modes,
            shift: self.shift,
        }
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Increments of step `i`, one per mode.
    pub fn step(&self, i: usize) -> &[f64] {
        &self.increments[i * self.modes..(i + 1) * self.modes]
    }

    /// `W_k(t_i) - W_k(t_0)` for every node, `steps + 1` values.
    pub fn cumulative(&self, k: usize) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.grid.steps() + 1);
        let mut acc = 0.0;
        w.push(0.0);
        for i in 0..self.grid.steps() {
            acc += self.step(i)[k];
            w.push(acc);
        }
        w
    }

    /// Offset of `grid` inside this record, if `grid` has the same spacing and fits.
    pub(crate) fn offset_of(&self, grid: &TimeGrid) -> Result<usize> {
        if !self.grid.same_spacing(grid) {
            return Err(Error::InvalidInput(format!(
                "noise dt {} does not match grid dt {}",
                self.grid.dt(),
                grid.dt()
            )));
        }
        let x = (grid.t_start() - self.grid.t_start()) / grid.dt();
        let off = x.round();
        if (x - off).abs() > 1e-6 || off < 0.0 || off as usize + grid.steps() > self.grid.steps() {
            return Err(Error::Range(format!(
                "grid [{}, {}] is not covered by noise window [{}, {}]",
                grid.t_start(),
                grid.t_end(),
                self.grid.t_start(),
                self.grid.t_end()
            )));
        }
        Ok(off as usize)
    }

    /// Binary dump: `seed, t_start, t_end, steps, K` as little-endian 64-bit fields,
    /// then the increments row-major as little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.grid.t_start().to_le_bytes())?;
        w.write_all(&self.grid.t_end().to_le_bytes())?;
        w.write_all(&(self.grid.steps() as u64).to_le_bytes())?;
        w.write_all(&(self.modes as u64).to_le_bytes())?;
        for x in &self.increments {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut b = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut b)?;
            Ok(b)
        };
        let seed = u64::from_le_bytes(next(&mut r)?);
        let t_start = f64::from_le_bytes(next(&mut r)?);
        let t_end = f64::from_le_bytes(next(&mut r)?);
        let steps = u64::from_le_bytes(next(&mut r)?) as usize;
        let modes = u64::from_le_bytes(next(&mut r)?) as usize;
        let grid = TimeGrid::new(t_start, t_end, steps)?;
        let mut increments = Vec::with_capacity(steps * modes);
        for _ in 0..steps * modes {
            increments.push(f64::from_le_bytes(next(&mut r)?));
        }
        Ok(Self {
            grid,
            modes,
            seed,
            shift: 0,
            increments,
        })
    }
}

/// I.i.d. `N(0, dt)` increments for `modes` modes over `grid`.
pub fn sample_noise(grid: &TimeGrid, modes: usize, seed: u64) -> Result<NoisePath> {
    NoiseKey::new(seed, modes).sample(grid)
}

/// The increments of `θ(s, ω)`: the output at time `τ` is the input at `τ + s`.
/// The output window is the part of the input window where both are defined.
pub fn shift_noise(noise: &NoisePath, s: f64) -> Result<NoisePath> {
    let dt = noise.grid.dt();
    let m = (s / dt).round();
    if ((s / dt) - m).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "shift {s} is not a multiple of dt = {dt}"
        )));
    }
    let m = m as i64;
    let steps = noise.grid.steps() as i64;
    if m.abs() >= steps {
        return Err(Error::Range(format!(
            "shift {s} leaves no overlap with the sampled window of length {}",
            noise.grid.t_end() - noise.grid.t_start()
        )));
    }
    let out_steps = (steps - m.abs()) as usize;
    let (first_out, first_in) = if m >= 0 {
        (0, m as usize)
    } else {
        ((-m) as usize, 0)
    };
    let t0 = noise.grid.time(first_out);
    let grid = TimeGrid::new(t0, t0 + out_steps as f64 * dt, out_steps)?;
    let k = noise.modes;
    let increments = noise.increments[first_in * k..(first_in + out_steps) * k].to_vec();
    Ok(NoisePath {
        grid,
        modes: k,
        seed: noise.seed,
        shift: noise.shift + m,
        increments,
    })
}
