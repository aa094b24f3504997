//! Continuous-time Zig-Zag process on `R^d`, simulated exactly by
//! superposition of per-coordinate thinned clocks, and the lattice embedding
//! `U(k) = H(eps k)` used to compare the rescaled walk with it.

use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{ContinuousPotential, DiscretePotential, Domain};
use crate::rng::{exp1, keyed_rng, open_uniform};
use crate::stats::wasserstein1;
use crate::zigzagd::{sweep_transition, LatticeState, SweepOrder};

/// Ratios above this are reported as a bound violation.
pub const RATIO_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdmpState {
    pub y: Vec<f64>,
    /// Entries are `+1.0` or `-1.0`.
    pub w: Vec<f64>,
    pub t: f64,
}

impl PdmpState {
    pub fn new(y: Vec<f64>, w: Vec<f64>) -> Self {
        assert_eq!(y.len(), w.len(), "position and velocity dimensions differ");
        assert!(w.iter().all(|&s| s == 1.0 || s == -1.0), "velocity entries must be +-1");
        Self { y, w, t: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }
}

/// Affine majorant `c_i + m_i s` of the coordinate rates on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    pub offset: Vec<f64>,
    pub slope: Vec<f64>,
    pub horizon: f64,
}

impl RateBound {
    pub fn rate(&self, i: usize, s: f64) -> f64 {
        self.offset[i] + self.slope[i] * s
    }

    pub fn integrated(&self, i: usize, s: f64) -> f64 {
        self.offset[i] * s + 0.5 * self.slope[i] * s * s
    }

    /// Solves `integrated(i, s) = e` for `s`.
    pub fn invert(&self, i: usize, e: f64) -> f64 {
        let (c, m) = (self.offset[i], self.slope[i]);
        if m > 0.0 {
            2.0 * e / (c + (c * c + 2.0 * m * e).sqrt())
        } else if c > 0.0 {
            e / c
        } else {
            f64::INFINITY
        }
    }

    /// Largest excess of the true rate over the majorant on a uniform grid.
    pub fn max_violation(&self, h: &dyn ContinuousPotential, y: &[f64], w: &[f64], grid: usize) -> f64 {
        let mut g = vec![0.0; y.len()];
        let mut z = vec![0.0; y.len()];
        let mut worst = f64::NEG_INFINITY;
        for k in 0..=grid {
            let s = self.horizon * k as f64 / grid as f64;
            for j in 0..y.len() {
                z[j] = y[j] + s * w[j];
            }
            h.gradient(&z, &mut g);
            for i in 0..y.len() {
                worst = worst.max((w[i] * g[i]).max(0.0) - self.rate(i, s));
            }
        }
        worst
    }
}

/// Produces a valid majorant for the state it is given.
pub trait BoundSupplier: Send + Sync {
    fn bound(&self, h: &dyn ContinuousPotential, y: &[f64], w: &[f64]) -> RateBound;
}

/// `c_i = (w_i d_i H(y))_+`, `m_i = L sqrt(d)` with `L` the Lipschitz constant of
/// the gradient on the ball reachable within the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzBound {
    pub horizon: f64,
}

impl Default for LipschitzBound {
    fn default() -> Self {
        Self { horizon: 1.0 }
    }
}

impl BoundSupplier for LipschitzBound {
    fn bound(&self, h: &dyn ContinuousPotential, y: &[f64], w: &[f64]) -> RateBound {
        let d = y.len();
        let mut g = vec![0.0; d];
        h.gradient(y, &mut g);
        let root_d = (d as f64).sqrt();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let slope = h.gradient_lipschitz(norm + root_d * self.horizon) * root_d;
        RateBound {
            offset: g.iter().zip(w).map(|(gi, wi)| (wi * gi).max(0.0)).collect(),
            slope: vec![slope; d],
            horizon: self.horizon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZzEvent {
    pub time: f64,
    pub coord: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZzRun {
    pub events: Vec<ZzEvent>,
    pub final_state: PdmpState,
    pub proposals: u64,
    pub max_ratio: f64,
    /// Total integrated majorant over all coordinates and the whole run.
    pub majorant_mass: f64,
}

fn advance_flow(st: &mut PdmpState, s: f64) {
    for (y, w) in st.y.iter_mut().zip(&st.w) {
        *y += s * w;
    }
    st.t += s;
}

/// Runs the process from `init` until `t_end`.
pub fn simulate_zz<R: RngCore + ?Sized>(
    h: &dyn ContinuousPotential,
    bound: &dyn BoundSupplier,
    t_end: f64,
    init: &PdmpState,
    rng: &mut R,
) -> Result<ZzRun> {
    let d = h.dim();
    if init.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: init.dim() });
    }
    let mut st = init.clone();
    let mut run = ZzRun {
        events: Vec::new(),
        final_state: init.clone(),
        proposals: 0,
        max_ratio: 0.0,
        majorant_mass: 0.0,
    };
    let mut g = vec![0.0; d];
    while st.t < t_end {
        let b = bound.bound(h, &st.y, &st.w);
        if b.horizon.is_nan() || b.horizon <= 0.0 {
            return Err(Error::Precondition(format!("bound horizon {} is not positive", b.horizon)));
        }
        let limit = b.horizon.min(t_end - st.t);
        let (mut first, mut s_min) = (0, f64::INFINITY);
        for i in 0..d {
            let s = b.invert(i, exp1(rng));
            if s < s_min {
                first = i;
                s_min = s;
            }
        }
        let s = s_min.min(limit);
        run.majorant_mass += (0..d).map(|i| b.integrated(i, s)).sum::<f64>();
        advance_flow(&mut st, s);
        if s_min >= limit {
            continue;
        }
        run.proposals += 1;
        h.gradient(&st.y, &mut g);
        let ratio = (st.w[first] * g[first]).max(0.0) / b.rate(first, s);
        run.max_ratio = run.max_ratio.max(ratio);
        if ratio > 1.0 + RATIO_TOLERANCE {
            return Err(Error::BoundViolation { ratio });
        }
        if open_uniform(rng) <= ratio {
            st.w[first] = -st.w[first];
            run.events.push(ZzEvent { time: st.t, coord: first });
        }
    }
    run.final_state = st;
    Ok(run)
}

/// Lattice potential `k -> H(eps k)`. Panics unless `eps > 0`.
pub fn embed_discrete(h: Arc<dyn ContinuousPotential>, eps: f64) -> DiscretePotential {
    assert!(eps > 0.0, "embedding scale must be positive, got {eps}");
    let d = h.dim();
    DiscretePotential::new(d, Domain::Lattice, move |k| {
        let y: Vec<f64> = k.iter().map(|&c| eps * c as f64).collect();
        h.value(&y)
    })
}

/// Time until the uphill energy gained along `y + s w` reaches `e`, for a
/// one-dimensional potential convex along the ray. Infinite if never.
pub fn convex_flip_time(h: &dyn ContinuousPotential, y: f64, w: f64, e: f64) -> f64 {
    let mut g = [0.0];
    let mut slope = |s: f64| {
        h.gradient(&[y + w * s], &mut g);
        w * g[0]
    };
    let low = if slope(0.0) >= 0.0 {
        0.0
    } else {
        match bisect_increasing(slope, 0.0) {
            Some(s) => s,
            None => return f64::INFINITY,
        }
    };
    let base = h.value(&[y + w * low]);
    bisect_increasing(|s| h.value(&[y + w * (low + s)]) - base - e, 0.0).map_or(f64::INFINITY, |s| low + s)
}

/// Root of a nondecreasing function with `f(start) < 0`, located by doubling
/// and bisection to machine precision.
fn bisect_increasing(mut f: impl FnMut(f64) -> f64, start: f64) -> Option<f64> {
    let (mut lo, mut step) = (start, 1.0);
    let mut hi = start + step;
    let mut tries = 0;
    while f(hi) < 0.0 {
        lo = hi;
        step *= 2.0;
        hi = start + step;
        tries += 1;
        if tries > 1100 || !hi.is_finite() {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

/// How walk and process samples are paired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Coupling {
    /// Independent streams; the process is simulated by thinning.
    #[default]
    Independent,
    /// One-dimensional convex potentials only: both sides consume the same
    /// sequence of exponential clocks, the walk flipping once its cumulative
    /// uphill increments exceed the clock and the process once its uphill
    /// energy does. Each marginal keeps its exact law.
    SharedClocks,
}

fn validate_probe(eps: f64, t: f64, n: usize) -> Result<()> {
    if !(eps.is_finite() && eps > 0.0 && t.is_finite() && t >= 0.0) {
        return Err(Error::Config(format!("need eps > 0 and t >= 0, got eps = {eps}, t = {t}")));
    }
    if n == 0 {
        return Err(Error::Config("sample count must be positive".into()));
    }
    Ok(())
}

fn columns(rows: Vec<Vec<f64>>, d: usize) -> Vec<Vec<f64>> {
    let mut cols = vec![Vec::with_capacity(rows.len()); d];
    for r in rows {
        for (c, v) in cols.iter_mut().zip(r) {
            c.push(v);
        }
    }
    cols
}

fn lattice_start(init: &PdmpState, eps: f64) -> LatticeState {
    LatticeState::new(
        init.y.iter().map(|&v| (v / eps).round() as i64).collect(),
        init.w.iter().map(|&s| s as i64).collect(),
    )
}

fn walk_steps(eps: f64, t: f64) -> u64 {
    // Guard against t/eps landing a hair below an integer.
    (t / eps * (1.0 + 4.0 * f64::EPSILON)).floor() as u64
}

/// `n` samples of the rescaled walk `eps X_{floor(t/eps)}` under `U(k) = H(eps k)`,
/// one column per coordinate.
pub fn walk_positions(
    h: &Arc<dyn ContinuousPotential>,
    init: &PdmpState,
    eps: f64,
    t: f64,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<Vec<f64>>> {
    validate_probe(eps, t, n)?;
    let u = embed_discrete(h.clone(), eps);
    let start = lattice_start(init, eps);
    let steps = walk_steps(eps, t);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = keyed_rng(seed, stream, k as u64, 0);
            let mut s = start.clone();
            for _ in 0..steps {
                sweep_transition(&mut s, &u, &SweepOrder::Identity, &mut rng);
            }
            s.x.iter().map(|&c| eps * c as f64).collect()
        })
        .collect();
    Ok(columns(rows, h.dim()))
}

/// `n` samples of the process position at time `t`, one column per coordinate.
pub fn zz_positions(
    h: &Arc<dyn ContinuousPotential>,
    init: &PdmpState,
    t: f64,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<Vec<f64>>> {
    validate_probe(1.0, t, n)?;
    let bound = LipschitzBound::default();
    let rows = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = keyed_rng(seed, stream, k as u64, 0);
            simulate_zz(h.as_ref(), &bound, t, init, &mut rng).map(|r| r.final_state.y)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(columns(rows, h.dim()))
}

/// One shared-clock pair `(process position, rescaled walk position)`.
pub fn coupled_pair<R: RngCore + ?Sized>(
    h: &dyn ContinuousPotential,
    u: &DiscretePotential,
    init: &PdmpState,
    eps: f64,
    t: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if h.dim() != 1 || init.dim() != 1 {
        return Err(Error::Config("shared clocks are implemented for one dimension".into()));
    }
    let steps = walk_steps(eps, t);
    let (mut x, mut v) = ((init.y[0] / eps).round() as i64, init.w[0] as i64);
    let (mut y, mut w, mut elapsed) = (init.y[0], init.w[0], 0.0);
    let (mut walk_done, mut zz_done) = (steps == 0, t == 0.0);
    let (mut clock, mut acc) = (0.0, 0.0);
    while !(walk_done && zz_done) {
        let e = exp1(rng);
        if !walk_done {
            // Runs until this clock rings or steps run out.
            while clock < steps as f64 {
                acc += u.delta(&[x], 0, v).max(0.0);
                clock += 1.0;
                if acc >= e {
                    v = -v;
                    acc = 0.0;
                    break;
                }
                x += v;
            }
            walk_done = clock >= steps as f64;
        }
        if !zz_done {
            let s = convex_flip_time(h, y, w, e);
            if elapsed + s >= t {
                y += (t - elapsed) * w;
                zz_done = true;
            } else {
                y += s * w;
                elapsed += s;
                w = -w;
            }
        }
    }
    Ok((y, eps * x as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub eps: f64,
    pub w1: f64,
}

fn summed_w1(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    a.iter().zip(b).map(|(x, y)| wasserstein1(x, y)).sum()
}

const WALK_STREAM: u64 = 0x5741_4c4b;
const PROCESS_STREAM: u64 = 0x5a5a;
const COUPLED_STREAM: u64 = 0xc0c0;

/// Coordinate-summed W1 distance between the rescaled-walk and process
/// marginals at `t` for each `eps`.
pub fn scaling_gap(
    h: &Arc<dyn ContinuousPotential>,
    init: &PdmpState,
    eps_list: &[f64],
    t: f64,
    n: usize,
    seed: u64,
    coupling: Coupling,
) -> Result<Vec<ScalingPoint>> {
    match coupling {
        Coupling::Independent => {
            let reference = zz_positions(h, init, t, n, seed, PROCESS_STREAM)?;
            eps_list
                .iter()
                .enumerate()
                .map(|(k, &eps)| {
                    let walk = walk_positions(h, init, eps, t, n, seed, WALK_STREAM + k as u64)?;
                    Ok(ScalingPoint { eps, w1: summed_w1(&walk, &reference)? })
                })
                .collect()
        }
        Coupling::SharedClocks => eps_list
            .iter()
            .map(|&eps| {
                validate_probe(eps, t, n)?;
                let u = embed_discrete(h.clone(), eps);
                let pairs = (0..n)
                    .into_par_iter()
                    .map(|k| coupled_pair(h.as_ref(), &u, init, eps, t, &mut keyed_rng(seed, COUPLED_STREAM, k as u64, 0)))
                    .collect::<Result<Vec<_>>>()?;
                let (zz, walk): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
                Ok(ScalingPoint { eps, w1: wasserstein1(&walk, &zz)? })
            })
            .collect(),
    }
}

/// W1 between two independent sample sets of the same rescaled walk; the
/// sampling-noise floor for `scaling_gap`.
pub fn null_gap(h: &Arc<dyn ContinuousPotential>, init: &PdmpState, eps: f64, t: f64, n: usize, seed: u64) -> Result<f64> {
    let a = walk_positions(h, init, eps, t, n, seed, WALK_STREAM ^ 0xa)?;
    let b = walk_positions(h, init, eps, t, n, seed, WALK_STREAM ^ 0xb)?;
    summed_w1(&a, &b)
}
