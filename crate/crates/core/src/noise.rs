//! Brownian driver paths on dyadic grids with exact bridge refinement.
//!
//! The midpoint Gaussian of cell `(level, j)` in coordinate `c` is a pure
//! function of `(seed, level, j, c)`, so a grid generated at level `L` equals
//! the level-0 grid refined `L` times, and every coarser resolution of a run
//! sees the same underlying path.

use std::io::Write;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::grid;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent child seed for stream `stream` of `seed` (replicas, stages, samplers).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix64(mix64(seed) ^ mix64(stream.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Uniform in the open interval (0, 1) for a counter.
#[inline]
fn cell_uniform(seed: u64, level: u32, j: u64, coord: u32) -> f64 {
    let h = mix64(mix64(mix64(seed ^ 0xA076_1D64_78BD_642F) ^ ((level as u64) << 32 | coord as u64)) ^ j);
    ((h >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw for cell `(level, j, coord)` via the inverse CDF.
pub fn cell_gaussian(seed: u64, level: u32, j: u64, coord: u32) -> f64 {
    thread_local! {
        static STD: Normal = Normal::standard();
    }
    let u = cell_uniform(seed, level, j, coord);
    STD.with(|n| n.inverse_cdf(u))
}

/// An `m`-dimensional Brownian path sampled at `j * T / 2^level`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseGrid {
    m: usize,
    horizon: f64,
    level: u32,
    seed: u64,
    /// Row-major `(2^level + 1) x m` values of `W`; row 0 is zero.
    values: Vec<f64>,
}

impl NoiseGrid {
    pub fn generate(m: usize, horizon: f64, level: u32, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("noise dimension must be positive"));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::domain(format!("noise horizon must be positive, got {horizon}")));
        }
        if level > 30 {
            return Err(Error::domain(format!("noise level {level} too large")));
        }
        let sd = horizon.sqrt();
        let mut values = vec![0.0; 2 * m];
        for c in 0..m {
            values[m + c] = sd * cell_gaussian(seed, 0, 0, c as u32);
        }
        let mut grid = NoiseGrid {
            m,
            horizon,
            level: 0,
            seed,
            values,
        };
        for _ in 0..level {
            grid = grid.refine();
        }
        Ok(grid)
    }

    /// Smallest dyadic grid with spacing exactly `dt` covering `[0, min_horizon]`.
    pub fn for_spacing(m: usize, dt: f64, min_horizon: f64, seed: u64) -> Result<Self> {
        let steps = (min_horizon / dt).ceil().max(1.0) as u64;
        let level = 64 - (steps - 1).leading_zeros();
        let level = if steps == 1 { 0 } else { level };
        NoiseGrid::generate(m, dt * (1u64 << level) as f64, level, seed)
    }

    /// Splits every cell at its midpoint with a Brownian-bridge draw.
    pub fn refine(&self) -> NoiseGrid {
        let m = self.m;
        let cells = self.cells();
        let child_level = self.level + 1;
        let half_sd = 0.5 * self.spacing().sqrt();
        let mut values = Vec::with_capacity((2 * cells + 1) * m);
        values.extend_from_slice(&self.values[..m]);
        for j in 0..cells {
            let left = &self.values[j * m..(j + 1) * m];
            let right = &self.values[(j + 1) * m..(j + 2) * m];
            for c in 0..m {
                let z = cell_gaussian(self.seed, child_level, j as u64, c as u32);
                values.push(0.5 * (left[c] + right[c]) + half_sd * z);
            }
            values.extend_from_slice(right);
        }
        NoiseGrid {
            m,
            horizon: self.horizon,
            level: child_level,
            seed: self.seed,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn level(&self) -> u32 {
        self.level
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn cells(&self) -> usize {
        1usize << self.level
    }
    pub fn spacing(&self) -> f64 {
        self.horizon / self.cells() as f64
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn increment(&self, j: usize) -> Result<Vec<f64>> {
        if j >= self.cells() {
            return Err(Error::domain(format!("increment index {j} out of range (cells = {})", self.cells())));
        }
        let (a, b) = (self.point(j), self.point(j + 1));
        Ok(b.iter().zip(a).map(|(x, y)| x - y).collect())
    }

    pub fn value_at(&self, t: f64) -> Result<Vec<f64>> {
        let i = grid::to_steps(t, self.spacing())?;
        if i > self.cells() {
            return Err(Error::domain(format!("t = {t} beyond noise horizon {}", self.horizon)));
        }
        Ok(self.point(i).to_vec())
    }

    /// Increments aggregated to a coarser `level`.
    pub fn increments_at_level(&self, level: u32) -> Result<Vec<f64>> {
        if level > self.level {
            return Err(Error::domain(format!("level {level} finer than grid level {}", self.level)));
        }
        let stride = 1usize << (self.level - level);
        let m = self.m;
        let mut out = Vec::with_capacity((1usize << level) * m);
        for j in 0..(1usize << level) {
            for c in 0..m {
                let mut s = 0.0;
                for k in j * stride..(j + 1) * stride {
                    s += self.values[(k + 1) * m + c] - self.values[k * m + c];
                }
                out.push(s);
            }
        }
        Ok(out)
    }

    /// The path on `[start, start + steps * dt]` re-based to `W(start) = 0`, read at spacing `dt`.
    pub fn view(&self, start: f64, dt: f64) -> Result<NoiseView<'_>> {
        let stride = grid::to_steps(dt, self.spacing())?;
        if stride == 0 {
            return Err(Error::domain(format!("dt = {dt} finer than noise spacing {}", self.spacing())));
        }
        let offset = grid::to_steps(start, self.spacing())?;
        if offset > self.cells() {
            return Err(Error::NoiseExhausted(format!("start {start} beyond horizon {}", self.horizon)));
        }
        Ok(NoiseView {
            grid: self,
            offset,
            stride,
        })
    }

    /// CSV with header `t,w_1,...,w_m`, one row per grid point.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=self.m).map(|i| format!("w_{i}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for i in 0..=self.cells() {
            write!(out, "{}", i as f64 * self.spacing())?;
            for v in self.point(i) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Shifted, possibly subsampled window onto a [`NoiseGrid`].
#[derive(Debug, Clone, Copy)]
pub struct NoiseView<'a> {
    grid: &'a NoiseGrid,
    offset: usize,
    stride: usize,
}

impl<'a> NoiseView<'a> {
    pub fn dim(&self) -> usize {
        self.grid.m
    }

    pub fn dt(&self) -> f64 {
        self.stride as f64 * self.grid.spacing()
    }

    /// Number of whole steps available from the view's origin.
    pub fn available_steps(&self) -> usize {
        (self.grid.cells() - self.offset) / self.stride
    }

    /// The view re-based `steps` steps later.
    pub fn shifted(&self, steps: usize) -> Result<NoiseView<'a>> {
        if steps > self.available_steps() {
            return Err(Error::NoiseExhausted(format!(
                "shift by {steps} steps exceeds the {} available",
                self.available_steps()
            )));
        }
        Ok(NoiseView {
            offset: self.offset + steps * self.stride,
            ..*self
        })
    }

    #[inline]
    pub fn increment_into(&self, j: usize, out: &mut [f64]) {
        let a = self.grid.point(self.offset + j * self.stride);
        let b = self.grid.point(self.offset + (j + 1) * self.stride);
        for c in 0..out.len() {
            out[c] = b[c] - a[c];
        }
    }

    /// `W(start + j dt) - W(start)`.
    pub fn value(&self, j: usize) -> Vec<f64> {
        let a = self.grid.point(self.offset);
        let b = self.grid.point(self.offset + j * self.stride);
        b.iter().zip(a).map(|(x, y)| x - y).collect()
    }
}
