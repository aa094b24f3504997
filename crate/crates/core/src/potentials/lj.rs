//! Periodic Lennard-Jones system with a short/long range force split.
//!
//! Positions are stored flat: particle `i` owns `x[3i..3i+3]`. The energy
//! counts both ordered pairs, `U = U0 sum_i sum_{j != i} W(|x_i - x_j|)`, so
//! each particle gradient carries a factor 2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smooth cutoff: 1 on `[0, 1/2]`, 0 on `[1, inf)`, quintic smoothstep between.
#[inline]
pub fn cutoff(s: f64) -> f64 {
    if s <= 0.5 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let t = 2.0 * s - 1.0;
        1.0 - t * t * t * (t * (6.0 * t - 15.0) + 10.0)
    }
}

#[inline]
pub fn cutoff_derivative(s: f64) -> f64 {
    if s <= 0.5 || s >= 1.0 {
        0.0
    } else {
        let t = 2.0 * s - 1.0;
        -60.0 * t * t * (t - 1.0) * (t - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LjParams {
    /// Side `a` of the periodic box.
    pub box_side: f64,
    /// Length scale `r`.
    pub radius: f64,
    /// Energy scale `U0`.
    pub energy_scale: f64,
    /// Radius `R` separating short-range from long-range forces.
    pub split_radius: f64,
}

#[inline]
fn norm3(d: [f64; 3]) -> f64 {
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

impl LjParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.box_side) || !ok(self.radius) || !ok(self.split_radius) {
            return Err(Error::Config("box side, radius and split radius must be positive".into()));
        }
        if !self.energy_scale.is_finite() || self.energy_scale < 0.0 {
            return Err(Error::Config("energy scale must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// `W(h) = [(r/h)^12 - (r/h)^6] chi(h/a)`.
    #[inline]
    pub fn pair_energy(&self, h: f64) -> f64 {
        let s6 = (self.radius / h).powi(6);
        (s6 * s6 - s6) * cutoff(h / self.box_side)
    }

    /// `W'(h)`.
    #[inline]
    pub fn pair_energy_derivative(&self, h: f64) -> f64 {
        let s6 = (self.radius / h).powi(6);
        let a = self.box_side;
        let core = (-12.0 * s6 * s6 + 6.0 * s6) / h;
        core * cutoff(h / a) + (s6 * s6 - s6) * cutoff_derivative(h / a) / a
    }

    /// Minimum-image displacement `x_i - x_j` and its length.
    #[inline]
    pub fn displacement(&self, x: &[f64], i: usize, j: usize) -> ([f64; 3], f64) {
        let a = self.box_side;
        let mut d = [0.0; 3];
        for k in 0..3 {
            let r = x[3 * i + k] - x[3 * j + k];
            d[k] = r - a * (r / a).round();
        }
        (d, norm3(d))
    }

    pub fn particles(&self, x: &[f64]) -> usize {
        x.len() / 3
    }

    pub fn energy(&self, x: &[f64]) -> Result<f64> {
        let m = self.particles(x);
        let mut e = 0.0;
        for i in 0..m {
            for j in (i + 1)..m {
                let (_, h) = self.displacement(x, i, j);
                if h == 0.0 {
                    return Err(Error::Singularity { i, j });
                }
                e += self.pair_energy(h);
            }
        }
        Ok(2.0 * self.energy_scale * e)
    }

    /// Full gradient of [`Self::energy`].
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        let m = self.particles(x);
        for i in 0..m {
            for j in (i + 1)..m {
                let (d, h) = self.displacement(x, i, j);
                if h == 0.0 {
                    return Err(Error::Singularity { i, j });
                }
                let c = 2.0 * self.energy_scale * self.pair_energy_derivative(h) / h;
                for k in 0..3 {
                    out[3 * i + k] += c * d[k];
                    out[3 * j + k] -= c * d[k];
                }
            }
        }
        Ok(())
    }

    pub fn wrap(&self, x: &mut [f64]) {
        let a = self.box_side;
        for c in x {
            *c = c.rem_euclid(a);
            if *c >= a {
                *c = 0.0;
            }
        }
    }
}

/// Particle configuration in the periodic box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LjSystem {
    pub params: LjParams,
    /// Flat coordinates, each wrapped into `[0, a)`.
    pub positions: Vec<f64>,
}

impl LjSystem {
    pub fn new(params: LjParams, mut positions: Vec<f64>) -> Result<Self> {
        params.validate()?;
        if !positions.len().is_multiple_of(3) {
            return Err(Error::Config("position vector length must be a multiple of 3".into()));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("positions must be finite".into()));
        }
        params.wrap(&mut positions);
        Ok(Self { params, positions })
    }

    /// `m` particles on the first sites of a simple cubic lattice filling the box.
    pub fn cubic_lattice(params: LjParams, m: usize) -> Result<Self> {
        let side = (1..).find(|n: &usize| n.pow(3) >= m).unwrap_or(1);
        let spacing = params.box_side / side as f64;
        let mut pos = Vec::with_capacity(3 * m);
        'fill: for ix in 0..side {
            for iy in 0..side {
                for iz in 0..side {
                    if pos.len() == 3 * m {
                        break 'fill;
                    }
                    for c in [ix, iy, iz] {
                        pos.push((c as f64 + 0.5) * spacing);
                    }
                }
            }
        }
        Self::new(params, pos)
    }

    pub fn len(&self) -> usize {
        self.positions.len() / 3
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn energy(&self) -> Result<f64> {
        self.params.energy(&self.positions)
    }

    pub fn gradient(&self) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.positions.len()];
        self.params.gradient(&self.positions, &mut g)?;
        Ok(g)
    }
}

/// `grad U = F0 + sum_{i != j} lift_i(G_ij)`: `F0` gathers the singular
/// short-range part, `G_ij` the bounded long-range pair fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSplit {
    pub params: LjParams,
    /// Uniform bound on `|G_ij|`.
    pub rate_bound: f64,
    /// Expected neighbour count within the split radius at uniform density.
    pub neighbor_estimate: f64,
}

/// Relative safety margin applied to the scanned maximum of `|W'|`.
pub const RATE_BOUND_SAFETY: f64 = 1.01;

impl ForceSplit {
    pub fn new(params: LjParams, particles: usize) -> Result<Self> {
        params.validate()?;
        let (a, big_r) = (params.box_side, params.split_radius);
        if big_r >= a / 2.0 {
            return Err(Error::Config(format!(
                "split radius {big_r} must be below half the box side {a}"
            )));
        }
        let rate_bound = if params.energy_scale == 0.0 {
            0.0
        } else {
            RATE_BOUND_SAFETY * 2.0 * params.energy_scale * max_abs_derivative(&params, big_r / 2.0, a)
        };
        let density = particles.saturating_sub(1) as f64 / (a * a * a);
        let neighbor_estimate = density * 4.0 / 3.0 * std::f64::consts::PI * big_r.powi(3);
        Ok(Self { params, rate_bound, neighbor_estimate })
    }

    #[inline]
    fn pair_terms(&self, x: &[f64], i: usize, j: usize) -> Result<([f64; 3], f64, f64)> {
        let (d, h) = self.params.displacement(x, i, j);
        if h == 0.0 {
            return Err(Error::Singularity { i, j });
        }
        let c = 2.0 * self.params.energy_scale * self.params.pair_energy_derivative(h) / h;
        Ok((d, c, cutoff(h / self.params.split_radius)))
    }

    /// Short-range field `F0` by a full pair loop.
    pub fn short_range(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        let m = x.len() / 3;
        for i in 0..m {
            for j in (i + 1)..m {
                self.add_short_pair(x, i, j, out)?;
            }
        }
        Ok(())
    }

    #[inline]
    fn add_short_pair(&self, x: &[f64], i: usize, j: usize, out: &mut [f64]) -> Result<()> {
        let (d, c, chi) = self.pair_terms(x, i, j)?;
        if chi == 0.0 {
            return Ok(());
        }
        for k in 0..3 {
            out[3 * i + k] += c * chi * d[k];
            out[3 * j + k] -= c * chi * d[k];
        }
        Ok(())
    }

    /// Long-range field `G_ij` acting on particle `i`.
    #[inline]
    pub fn pair_field(&self, x: &[f64], i: usize, j: usize) -> Result<[f64; 3]> {
        let (d, c, chi) = self.pair_terms(x, i, j)?;
        let w = c * (1.0 - chi);
        Ok([w * d[0], w * d[1], w * d[2]])
    }

    /// `F_i = sum_{j != i} G_ij`, the per-particle aggregate field.
    pub fn particle_field(&self, x: &[f64], i: usize) -> Result<[f64; 3]> {
        let mut f = [0.0; 3];
        for j in 0..x.len() / 3 {
            if j != i {
                let g = self.pair_field(x, i, j)?;
                for k in 0..3 {
                    f[k] += g[k];
                }
            }
        }
        Ok(f)
    }
}

fn max_abs_derivative(params: &LjParams, lo: f64, hi: f64) -> f64 {
    let step = params.radius / 1000.0;
    let n = ((hi - lo) / step).ceil() as usize;
    (0..=n)
        .map(|k| params.pair_energy_derivative(lo + (hi - lo) * k as f64 / n as f64).abs())
        .fold(0.0, f64::max)
}

/// Verlet neighbour list for the short-range field.
#[derive(Debug, Clone)]
pub struct VerletList {
    skin: f64,
    rebuild_every: usize,
    pairs: Vec<(usize, usize)>,
    reference: Vec<f64>,
    since_rebuild: usize,
    rebuilds: usize,
}

impl VerletList {
    /// Skin defaults to `0.3 R`.
    pub fn new(split: &ForceSplit, x: &[f64], rebuild_every: usize) -> Self {
        let mut list = Self {
            skin: 0.3 * split.params.split_radius,
            rebuild_every: rebuild_every.max(1),
            pairs: Vec::new(),
            reference: Vec::new(),
            since_rebuild: 0,
            rebuilds: 0,
        };
        list.rebuild(split, x);
        list
    }

    fn rebuild(&mut self, split: &ForceSplit, x: &[f64]) {
        let reach = split.params.split_radius + self.skin;
        let m = x.len() / 3;
        self.pairs.clear();
        for i in 0..m {
            for j in (i + 1)..m {
                if split.params.displacement(x, i, j).1 < reach {
                    self.pairs.push((i, j));
                }
            }
        }
        self.reference = x.to_vec();
        self.since_rebuild = 0;
        self.rebuilds += 1;
    }

    fn max_drift(&self, split: &ForceSplit, x: &[f64]) -> f64 {
        let a = split.params.box_side;
        x.chunks_exact(3)
            .zip(self.reference.chunks_exact(3))
            .map(|(p, q)| {
                let mut d = [0.0; 3];
                for k in 0..3 {
                    let r = p[k] - q[k];
                    d[k] = r - a * (r / a).round();
                }
                norm3(d)
            })
            .fold(0.0, f64::max)
    }

    /// Rebuild if due by count or if any particle drifted more than half the skin.
    pub fn refresh(&mut self, split: &ForceSplit, x: &[f64]) -> bool {
        self.since_rebuild += 1;
        if self.reference.len() != x.len()
            || self.since_rebuild >= self.rebuild_every
            || self.max_drift(split, x) > 0.5 * self.skin
        {
            self.rebuild(split, x);
            true
        } else {
            false
        }
    }

    pub fn rebuilds(&self) -> usize {
        self.rebuilds
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn short_range(&self, split: &ForceSplit, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        for &(i, j) in &self.pairs {
            split.add_short_pair(x, i, j, out)?;
        }
        Ok(())
    }
}
