//! Strang-split hybrid sampler: half drift, OU half kick, velocity jump
//! segment at frozen positions, OU half kick, half drift. The jump segment is
//! simulated either naively by competing clocks or, for Lennard-Jones
//! systems, by thinning pair proposals against a uniform force bound.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::ForceSplit;
use crate::rng::{exp1, fill_normal, keyed_rng, open_uniform};

/// Jump events allowed in one segment before it is declared runaway.
pub const MAX_SEGMENT_EVENTS: u64 = 1_000_000;
/// Acceptance ratios above `1 + ACCEPT_TOLERANCE` abort the run.
pub const ACCEPT_TOLERANCE: f64 = 1e-9;

const STEP_STREAM: u64 = 0x5354_4550;
const PARTICLE_STREAM: u64 = 0x5041_5254;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Whole gradient in the drift force, no jumps.
    FullDrift,
    /// Short-range drift plus one bounded jump field per ordered pair.
    #[default]
    Pairwise,
    /// Short-range drift plus one aggregated jump field per particle.
    PerParticle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OuMode {
    /// Noise variance `1 - exp(-gamma delta)` over each half step.
    #[default]
    Exact,
    /// Noise variance `1 - exp(-gamma delta / 2)`.
    HalfVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpMode {
    Naive,
    #[default]
    Thinned,
}

macro_rules! keyword_enum {
    ($ty:ty, $what:literal, $($name:literal => $val:expr),+) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($name => Ok($val),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", $what, " '{}' (expected one of: {})"),
                        other,
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $val { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}

keyword_enum!(SplitMode, "split", "full-drift" => SplitMode::FullDrift, "pairwise" => SplitMode::Pairwise, "per-particle" => SplitMode::PerParticle);
keyword_enum!(OuMode, "ou mode", "exact" => OuMode::Exact, "half-variance" => OuMode::HalfVariance);
keyword_enum!(JumpMode, "jump mode", "naive" => JumpMode::Naive, "thinned" => JumpMode::Thinned);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub delta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub split: SplitMode,
    pub ou_mode: OuMode,
    pub jump: JumpMode,
}

impl HybridConfig {
    pub fn new(delta: f64, gamma: f64, lambda: f64) -> Self {
        Self { delta, gamma, lambda, split: SplitMode::default(), ou_mode: OuMode::default(), jump: JumpMode::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostCounters {
    pub f0_evals: u64,
    pub gij_evals: u64,
    pub jump_proposals: u64,
    pub jumps_accepted: u64,
    pub refreshments: u64,
    pub max_accept_ratio: f64,
    /// `sum_i |W_i|` integrated over the bounce windows of all segments.
    pub speed_time: f64,
}

impl CostCounters {
    pub fn add(&mut self, o: &CostCounters) {
        self.f0_evals += o.f0_evals;
        self.gij_evals += o.gij_evals;
        self.jump_proposals += o.jump_proposals;
        self.jumps_accepted += o.jumps_accepted;
        self.refreshments += o.refreshments;
        self.max_accept_ratio = self.max_accept_ratio.max(o.max_accept_ratio);
        self.speed_time += o.speed_time;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `v - 2 (F.v / |F|^2) F`, or `v` when `F = 0`.
pub fn reflect(v: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    reflect_in_place(&mut out, f);
    out
}

pub fn reflect_in_place(v: &mut [f64], f: &[f64]) {
    let ff = dot(f, f);
    if ff == 0.0 {
        return;
    }
    let c = 2.0 * dot(f, v) / ff;
    for (vi, fi) in v.iter_mut().zip(f) {
        *vi -= c * fi;
    }
}

/// Exact Ornstein-Uhlenbeck flow with constant force over half a step,
/// driven by the supplied standard normals.
pub fn ou_half_kick_with_noise(v: &mut [f64], f0: &[f64], cfg: &HybridConfig, noise: &[f64]) {
    let h = 0.5 * cfg.delta;
    if cfg.gamma == 0.0 {
        for (vi, fi) in v.iter_mut().zip(f0) {
            *vi -= h * fi;
        }
        return;
    }
    let decay = (-cfg.gamma * h).exp();
    let drift = -(-cfg.gamma * h).exp_m1() / cfg.gamma;
    let variance = match cfg.ou_mode {
        OuMode::Exact => -(-cfg.gamma * cfg.delta).exp_m1(),
        OuMode::HalfVariance => -(-cfg.gamma * h).exp_m1(),
    };
    let sd = variance.sqrt();
    for ((vi, fi), g) in v.iter_mut().zip(f0).zip(noise) {
        *vi = decay * *vi - drift * fi + sd * g;
    }
}

pub fn ou_half_kick<R: RngCore + ?Sized>(v: &mut [f64], f0: &[f64], cfg: &HybridConfig, rng: &mut R) {
    let mut g = vec![0.0; v.len()];
    if cfg.gamma > 0.0 {
        fill_normal(rng, &mut g);
    }
    ou_half_kick_with_noise(v, f0, cfg, &g);
}

/// Combines standard normals `xi_k` driving `n` consecutive exact OU substeps
/// of length `h/n` into the single normal driving one step of length `h`:
/// `sum_k w_k xi_k / sqrt(sum_k w_k^2)` with `w_k = exp(-gamma (h/n)(n-k))`.
pub fn aggregate_ou_noise(gamma: f64, sub: f64, xi: &[f64]) -> f64 {
    let n = xi.len();
    let (mut num, mut den) = (0.0, 0.0);
    for (k, x) in xi.iter().enumerate() {
        let w = (-gamma * sub * (n - 1 - k) as f64).exp();
        num += w * x;
        den += w * w;
    }
    num / den.sqrt()
}

/// Time of the last refreshment point of a rate-`lambda` Poisson process on
/// `[0, delta]`, if any.
pub fn last_refresh_time<R: RngCore + ?Sized>(delta: f64, lambda: f64, rng: &mut R) -> Option<f64> {
    if lambda <= 0.0 {
        return None;
    }
    let back = exp1(rng) / lambda;
    (back < delta).then_some(delta - back)
}

/// A jump field supported on `values.len()` consecutive coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseField {
    pub start: usize,
    pub values: Vec<f64>,
}

impl SparseField {
    pub fn dense(values: Vec<f64>) -> Self {
        Self { start: 0, values }
    }

    fn rate(&self, v: &[f64]) -> f64 {
        dot(&v[self.start..self.start + self.values.len()], &self.values).max(0.0)
    }

    fn reflect(&self, v: &mut [f64]) {
        reflect_in_place(&mut v[self.start..self.start + self.values.len()], &self.values);
    }
}

/// Exact draw of the jump segment with frozen fields: optional Gaussian
/// refreshment at the last rate-`lambda` point, then competing clocks with
/// rates `(W.F_k)_+` and reflections at the winner. Returns the bounce count.
pub fn jump_segment_naive<R: RngCore + ?Sized>(
    v: &mut [f64],
    fields: &[SparseField],
    delta: f64,
    lambda: f64,
    rng: &mut R,
    counters: &mut CostCounters,
) -> Result<u64> {
    let mut t = 0.0;
    if let Some(t0) = last_refresh_time(delta, lambda, rng) {
        fill_normal(rng, v);
        counters.refreshments += 1;
        t = t0;
    }
    counters.speed_time += (delta - t) * speed_sum(v, 3);
    let mut bounces = 0u64;
    if fields.is_empty() {
        return Ok(0);
    }
    loop {
        let (mut winner, mut wait) = (0, f64::INFINITY);
        for (k, f) in fields.iter().enumerate() {
            let r = f.rate(v);
            if r > 0.0 {
                let s = exp1(rng) / r;
                if s < wait {
                    winner = k;
                    wait = s;
                }
            }
        }
        if t + wait > delta {
            return Ok(bounces);
        }
        t += wait;
        fields[winner].reflect(v);
        bounces += 1;
        counters.jump_proposals += 1;
        counters.jumps_accepted += 1;
        if bounces > MAX_SEGMENT_EVENTS {
            return Err(Error::Runaway { events: bounces });
        }
    }
}

fn speed_sum(v: &[f64], block: usize) -> f64 {
    if !v.len().is_multiple_of(block) {
        return dot(v, v).sqrt();
    }
    v.chunks_exact(block).map(|c| dot(c, c).sqrt()).sum()
}

fn poisson_count<R: RngCore + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let p = Poisson::new(mean).map_err(|_| Error::Precondition(format!("proposal mean {mean} out of range")))?;
    Ok(p.sample(rng) as u64)
}

/// Thinned jump segment for a Lennard-Jones split. Each particle proposes
/// `Poisson(|W_i| B (delta - T0))` reflections, where `B = M C_R` bounds its
/// total long-range rate. Pairwise mode picks a partner `j` uniformly
/// (discarding `j = i`) and accepts with `(W_i.G_ij)_+ / (|W_i| C_R)`;
/// per-particle mode uses the aggregate field against `M C_R`.
/// Particles run in parallel on substreams keyed by `(seed, step, i)`.
#[allow(clippy::too_many_arguments)]
pub fn jump_segment_thinned_lj<R: RngCore + ?Sized>(
    split: &ForceSplit,
    mode: SplitMode,
    x: &[f64],
    v: &mut [f64],
    cfg: &HybridConfig,
    seed: u64,
    step: u64,
    rng: &mut R,
    counters: &mut CostCounters,
) -> Result<u64> {
    let m = x.len() / 3;
    let mut t0 = 0.0;
    if let Some(t) = last_refresh_time(cfg.delta, cfg.lambda, rng) {
        fill_normal(rng, v);
        counters.refreshments += 1;
        t0 = t;
    }
    let window = cfg.delta - t0;
    if mode == SplitMode::FullDrift {
        return Ok(0);
    }
    let c_r = split.rate_bound;
    let results: Vec<Result<(CostCounters, u64)>> = v
        .par_chunks_mut(3)
        .enumerate()
        .map(|(i, w)| {
            let mut local = CostCounters::default();
            let mut prng = keyed_rng(seed, PARTICLE_STREAM, step, i as u64);
            let speed = dot(w, w).sqrt();
            local.speed_time += speed * window;
            let k = poisson_count(speed * c_r * m as f64 * window, &mut prng)?;
            let mut bounces = 0u64;
            for _ in 0..k {
                local.jump_proposals += 1;
                let (g, bound, u) = match mode {
                    SplitMode::Pairwise => {
                        let j = ((open_uniform(&mut prng) * m as f64) as usize).min(m - 1);
                        let u = open_uniform(&mut prng);
                        if j == i {
                            continue;
                        }
                        local.gij_evals += 1;
                        (split.pair_field(x, i, j)?, c_r, u)
                    }
                    _ => {
                        let u = open_uniform(&mut prng);
                        local.gij_evals += m as u64 - 1;
                        (split.particle_field(x, i)?, m as f64 * c_r, u)
                    }
                };
                let ratio = dot(w, &g).max(0.0) / (speed * bound);
                local.max_accept_ratio = local.max_accept_ratio.max(ratio);
                if ratio > 1.0 + ACCEPT_TOLERANCE {
                    return Err(Error::BoundViolation { ratio });
                }
                if u <= ratio {
                    reflect_in_place(w, &g);
                    local.jumps_accepted += 1;
                    bounces += 1;
                }
            }
            Ok((local, bounces))
        })
        .collect();
    let mut total = 0;
    for r in results {
        let (c, b) = r?;
        counters.add(&c);
        total += b;
    }
    Ok(total)
}

/// Force model driving the scheme.
pub trait HybridModel: Send + Sync {
    fn dim(&self) -> usize;
    /// Periodic box side, if positions live on a torus.
    fn box_side(&self) -> Option<f64> {
        None
    }
    fn wrap(&self, x: &mut [f64]) {
        if let Some(a) = self.box_side() {
            for c in x.iter_mut() {
                *c = c.rem_euclid(a);
                if *c >= a {
                    *c = 0.0;
                }
            }
        }
    }
    fn potential(&self, x: &[f64]) -> Result<f64>;
    /// Drift force `F0` (a gradient; the kick subtracts it).
    fn drift_force(&self, x: &[f64], split: SplitMode, out: &mut [f64]) -> Result<()>;
    /// Jump fields at frozen `x`; evaluations are charged to `counters`.
    fn jump_fields(&self, _x: &[f64], _split: SplitMode, _counters: &mut CostCounters) -> Result<Vec<SparseField>> {
        Ok(Vec::new())
    }
    /// Force split enabling the thinned segment.
    fn lj_split(&self) -> Option<&ForceSplit> {
        None
    }
}

/// `U = k |x|^2 / 2`, no jump fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub dim: usize,
    pub stiffness: f64,
}

impl HybridModel for Harmonic {
    fn dim(&self) -> usize {
        self.dim
    }
    fn potential(&self, x: &[f64]) -> Result<f64> {
        Ok(0.5 * self.stiffness * dot(x, x))
    }
    fn drift_force(&self, x: &[f64], _split: SplitMode, out: &mut [f64]) -> Result<()> {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.stiffness * xi;
        }
        Ok(())
    }
}

pub type DriftFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type FieldFn = Arc<dyn Fn(&[f64]) -> SparseField + Send + Sync>;
pub type PotentialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Model assembled from closures: a drift force plus arbitrary jump fields.
#[derive(Clone)]
pub struct FieldModel {
    pub dim: usize,
    pub potential: PotentialFn,
    pub drift: DriftFn,
    pub fields: Vec<FieldFn>,
}

impl fmt::Debug for FieldModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldModel").field("dim", &self.dim).field("fields", &self.fields.len()).finish()
    }
}

impl HybridModel for FieldModel {
    fn dim(&self) -> usize {
        self.dim
    }
    fn potential(&self, x: &[f64]) -> Result<f64> {
        Ok((self.potential)(x))
    }
    fn drift_force(&self, x: &[f64], _split: SplitMode, out: &mut [f64]) -> Result<()> {
        (self.drift)(x, out);
        Ok(())
    }
    fn jump_fields(&self, x: &[f64], _split: SplitMode, counters: &mut CostCounters) -> Result<Vec<SparseField>> {
        counters.gij_evals += self.fields.len() as u64;
        Ok(self.fields.iter().map(|f| f(x)).collect())
    }
}

/// Lennard-Jones particles in a periodic box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LjModel {
    pub split: ForceSplit,
    pub particles: usize,
}

impl LjModel {
    pub fn new(split: ForceSplit, particles: usize) -> Self {
        Self { split, particles }
    }
}

impl HybridModel for LjModel {
    fn dim(&self) -> usize {
        3 * self.particles
    }
    fn box_side(&self) -> Option<f64> {
        Some(self.split.params.box_side)
    }
    fn potential(&self, x: &[f64]) -> Result<f64> {
        self.split.params.energy(x)
    }
    fn drift_force(&self, x: &[f64], split: SplitMode, out: &mut [f64]) -> Result<()> {
        match split {
            SplitMode::FullDrift => self.split.params.gradient(x, out),
            _ => self.split.short_range(x, out),
        }
    }
    fn jump_fields(&self, x: &[f64], split: SplitMode, counters: &mut CostCounters) -> Result<Vec<SparseField>> {
        let m = self.particles;
        let mut out = Vec::new();
        match split {
            SplitMode::FullDrift => {}
            SplitMode::Pairwise => {
                for i in 0..m {
                    for j in (0..m).filter(|&j| j != i) {
                        counters.gij_evals += 1;
                        out.push(SparseField { start: 3 * i, values: self.split.pair_field(x, i, j)?.to_vec() });
                    }
                }
            }
            SplitMode::PerParticle => {
                for i in 0..m {
                    counters.gij_evals += m as u64 - 1;
                    out.push(SparseField { start: 3 * i, values: self.split.particle_field(x, i)?.to_vec() });
                }
            }
        }
        Ok(out)
    }
    fn lj_split(&self) -> Option<&ForceSplit> {
        Some(&self.split)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl HybridState {
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Self {
        assert_eq!(x.len(), v.len(), "position and velocity dimensions differ");
        Self { x, v, step: 0 }
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * dot(&self.v, &self.v)
    }
}

/// Runs the jump segment at frozen `x` using the naive or thinned variant.
#[allow(clippy::too_many_arguments)]
pub fn jump_segment<M: HybridModel + ?Sized, R: RngCore + ?Sized>(
    model: &M,
    cfg: &HybridConfig,
    x: &[f64],
    v: &mut [f64],
    seed: u64,
    step: u64,
    rng: &mut R,
    counters: &mut CostCounters,
) -> Result<u64> {
    match (cfg.jump, model.lj_split()) {
        (JumpMode::Thinned, Some(split)) => jump_segment_thinned_lj(split, cfg.split, x, v, cfg, seed, step, rng, counters),
        _ => {
            let fields = model.jump_fields(x, cfg.split, counters)?;
            jump_segment_naive(v, &fields, cfg.delta, cfg.lambda, rng, counters)
        }
    }
}

/// One step with explicitly supplied OU noises for the two half kicks.
#[allow(clippy::too_many_arguments)]
pub fn strang_step_with_noise<M: HybridModel + ?Sized, R: RngCore + ?Sized>(
    model: &M,
    cfg: &HybridConfig,
    state: &mut HybridState,
    first_noise: &[f64],
    second_noise: &[f64],
    seed: u64,
    rng: &mut R,
    counters: &mut CostCounters,
) -> Result<()> {
    let d = model.dim();
    if state.x.len() != d || state.v.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: state.x.len() });
    }
    let h = 0.5 * cfg.delta;
    for (xi, vi) in state.x.iter_mut().zip(&state.v) {
        *xi += h * vi;
    }
    model.wrap(&mut state.x);
    let mut f0 = vec![0.0; d];
    model.drift_force(&state.x, cfg.split, &mut f0)?;
    counters.f0_evals += 1;
    ou_half_kick_with_noise(&mut state.v, &f0, cfg, first_noise);
    jump_segment(model, cfg, &state.x, &mut state.v, seed, state.step, rng, counters)?;
    ou_half_kick_with_noise(&mut state.v, &f0, cfg, second_noise);
    for (xi, vi) in state.x.iter_mut().zip(&state.v) {
        *xi += h * vi;
    }
    model.wrap(&mut state.x);
    state.step += 1;
    Ok(())
}

/// One step; all randomness comes from substreams keyed by `(seed, step)`.
pub fn strang_step<M: HybridModel + ?Sized>(
    model: &M,
    cfg: &HybridConfig,
    state: &mut HybridState,
    seed: u64,
    counters: &mut CostCounters,
) -> Result<()> {
    let d = model.dim();
    let mut rng = keyed_rng(seed, STEP_STREAM, state.step, 0);
    let mut g1 = vec![0.0; d];
    let mut g2 = vec![0.0; d];
    if cfg.gamma > 0.0 {
        fill_normal(&mut rng, &mut g1);
        fill_normal(&mut rng, &mut g2);
    }
    strang_step_with_noise(model, cfg, state, &g1, &g2, seed, &mut rng, counters)
}

/// Largest deviation from `x' - x = delta (v + v') / 2` over one step,
/// measured modulo the box when the model is periodic.
pub fn kinetic_identity_defect(before: &HybridState, after: &HybridState, delta: f64, box_side: Option<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..before.x.len() {
        let mut r = after.x[k] - before.x[k] - 0.5 * delta * (before.v[k] + after.v[k]);
        if let Some(a) = box_side {
            r -= a * (r / a).round();
        }
        worst = worst.max(r.abs());
    }
    worst
}

/// Sampler owning a model, its state and the cost counters.
#[derive(Debug, Clone)]
pub struct HybridSampler<M> {
    pub model: M,
    pub cfg: HybridConfig,
    pub state: HybridState,
    pub counters: CostCounters,
    pub seed: u64,
}

impl<M: HybridModel> HybridSampler<M> {
    pub fn new(model: M, cfg: HybridConfig, state: HybridState, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if state.x.len() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), got: state.x.len() });
        }
        let mut state = state;
        model.wrap(&mut state.x);
        Ok(Self { model, cfg, state, counters: CostCounters::default(), seed })
    }

    pub fn step(&mut self) -> Result<()> {
        strang_step(&self.model, &self.cfg, &mut self.state, self.seed, &mut self.counters)
    }

    /// Runs `n` steps, calling `observe` after each.
    pub fn run(&mut self, n: u64, mut observe: impl FnMut(&HybridState, &CostCounters)) -> Result<()> {
        for _ in 0..n {
            self.step()?;
            observe(&self.state, &self.counters);
        }
        Ok(())
    }

    pub fn elapsed(&self) -> f64 {
        self.state.step as f64 * self.cfg.delta
    }
}

/// Particle system: Lennard-Jones model driven by the hybrid scheme.
pub type ParticleSystem = HybridSampler<LjModel>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{LjParams, LjSystem};
    use crate::rng::std_normal;
    use crate::stats::{ks_pvalue, ks_statistic, ks_two_sample_pvalue, mean, variance};

    #[test]
    fn reflection_examples() {
        assert_eq!(reflect(&[2.0, 3.0, 4.0], &[1.0, 0.0, 0.0]), vec![-2.0, 3.0, 4.0]);
        assert_eq!(reflect(&[2.0, 3.0, 4.0], &[0.0; 3]), vec![2.0, 3.0, 4.0]);
        let r = reflect(&[1.0, 0.0, 0.0], &[1.0, 1.0, 0.0]);
        assert!((r[0]).abs() < 1e-15 && (r[1] + 1.0).abs() < 1e-15 && r[2] == 0.0);
    }

    #[test]
    fn keywords_round_trip() {
        for s in ["full-drift", "pairwise", "per-particle"] {
            assert_eq!(s.parse::<SplitMode>().unwrap().to_string(), s);
        }
        assert_eq!("half-variance".parse::<OuMode>().unwrap(), OuMode::HalfVariance);
        assert!("PAIRWISE".parse::<SplitMode>().is_err());
    }

    #[test]
    fn half_euler_kick_without_friction() {
        let cfg = HybridConfig::new(0.1, 0.0, 0.0);
        let mut v = vec![0.0, 0.0];
        ou_half_kick(&mut v, &[1.0, 0.0], &cfg, &mut keyed_rng(60, 0, 0, 0));
        assert!((v[0] + 0.05).abs() < 1e-15 && v[1] == 0.0);
    }

    #[test]
    fn strong_friction_refreshes_around_minus_force() {
        let cfg = HybridConfig::new(100.0, 1.0, 0.0);
        let mut v = vec![7.0];
        ou_half_kick_with_noise(&mut v, &[0.5], &cfg, &[0.3]);
        assert!((v[0] - (-0.5 + 0.3)).abs() < 1e-12);
    }

    #[test]
    fn exact_ou_variance() {
        let cfg = HybridConfig::new(0.4, 1.3, 0.0);
        let mut rng = keyed_rng(61, 0, 0, 0);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let mut v = [0.0];
                ou_half_kick(&mut v, &[0.0], &cfg, &mut rng);
                v[0]
            })
            .collect();
        let want = 1.0 - (-1.3f64 * 0.4).exp();
        let sd = want * (2.0 / n as f64).sqrt();
        assert!((variance(&xs) - want).abs() < 3.0 * sd);
    }

    #[test]
    fn aggregated_noise_reproduces_fine_kicks() {
        let (gamma, h, n) = (0.8, 0.3, 4);
        let cfg_fine = HybridConfig::new(2.0 * h / n as f64, gamma, 0.0);
        let cfg = HybridConfig::new(2.0 * h, gamma, 0.0);
        let xi = [0.3, -1.2, 0.7, 2.0];
        let mut fine = vec![0.4];
        for x in xi {
            ou_half_kick_with_noise(&mut fine, &[0.0], &cfg_fine, &[x]);
        }
        let mut coarse = vec![0.4];
        ou_half_kick_with_noise(&mut coarse, &[0.0], &cfg, &[aggregate_ou_noise(gamma, h / n as f64, &xi)]);
        assert!((fine[0] - coarse[0]).abs() < 1e-12);
    }

    #[test]
    fn naive_segment_trivial_cases() {
        let mut v = vec![0.3, -0.2];
        let mut c = CostCounters::default();
        let b = jump_segment_naive(&mut v, &[], 1.0, 0.0, &mut keyed_rng(62, 0, 0, 0), &mut c).unwrap();
        assert_eq!((b, v.clone()), (0, vec![0.3, -0.2]));

        let fields = [SparseField::dense(vec![1.0, 0.0])];
        let n = 20_000;
        let mut rng = keyed_rng(63, 0, 0, 0);
        let mut first = Vec::new();
        for _ in 0..n {
            let mut v = vec![1.5, 0.0];
            let b = jump_segment_naive(&mut v, &fields, 10.0, 0.0, &mut rng, &mut c).unwrap();
            assert!(b <= 1);
            first.push(if b == 1 { 1.0 } else { 0.0 });
        }
        // P(bounce within 10) = 1 - exp(-15).
        assert!(mean(&first) > 0.999);
    }

    #[test]
    fn constant_field_bounce_time_is_exponential() {
        let fields = [SparseField::dense(vec![0.0, 2.0])];
        let mut rng = keyed_rng(64, 0, 0, 0);
        let mut c = CostCounters::default();
        let n = 50_000;
        let mut bounced = Vec::new();
        for k in 0..n {
            // Bounce by time s iff the segment [0, s] shows one; use s = delta.
            let s = 0.05 + 0.9 * (k as f64 / n as f64);
            let mut v = vec![0.0, 0.5];
            let b = jump_segment_naive(&mut v, &fields, s, 0.0, &mut rng, &mut c).unwrap();
            bounced.push((s, b));
        }
        // Rate (v.F)_+ = 1: compare bounce frequency with 1 - exp(-s) in bins.
        for bin in 0..3 {
            let sel: Vec<_> = bounced.iter().filter(|(s, _)| ((s - 0.05) / 0.3) as usize == bin).collect();
            let freq = sel.iter().filter(|(_, b)| *b == 1).count() as f64 / sel.len() as f64;
            let p = mean(&sel.iter().map(|(s, _)| 1.0 - (-s).exp()).collect::<Vec<_>>());
            assert!((freq - p).abs() < 3.0 * (p * (1.0 - p) / sel.len() as f64).sqrt() + 0.01, "{bin}: {freq} {p}");
        }
    }

    #[test]
    fn heavy_refreshment_yields_standard_gaussian() {
        let mut rng = keyed_rng(65, 0, 0, 0);
        let mut c = CostCounters::default();
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let mut v = vec![5.0];
                jump_segment_naive(&mut v, &[], 1.0, 50.0, &mut rng, &mut c).unwrap();
                v[0]
            })
            .collect();
        let d = ks_statistic(&xs, |x| 0.5 * (1.0 + erf(x / 2f64.sqrt()))).unwrap();
        assert!(ks_pvalue(d, n as f64) > 0.01, "{d}");
    }

    fn erf(x: f64) -> f64 {
        // Abramowitz-Stegun 7.1.26 is too coarse here; integrate instead.
        let n = 2000;
        let h = x / n as f64;
        let f = |t: f64| (-t * t).exp();
        let s: f64 = (0..n).map(|k| f(h * k as f64) + 4.0 * f(h * (k as f64 + 0.5)) + f(h * (k + 1) as f64)).sum();
        s * h / 6.0 * 2.0 / std::f64::consts::PI.sqrt()
    }

    fn three_body() -> (LjModel, Vec<f64>) {
        let params = LjParams { box_side: 8.0, radius: 1.0, energy_scale: 20.0, split_radius: 3.0 };
        let split = ForceSplit::new(params, 3).unwrap();
        (LjModel::new(split, 3), vec![1.0, 1.0, 1.0, 3.1, 1.2, 0.9, 1.6, 3.5, 2.2])
    }

    #[test]
    fn zero_rate_bound_proposes_nothing() {
        let params = LjParams { box_side: 8.0, radius: 1.0, energy_scale: 0.0, split_radius: 3.0 };
        let split = ForceSplit::new(params, 3).unwrap();
        let (_, x) = three_body();
        let mut v = vec![0.5; 9];
        let mut c = CostCounters::default();
        let cfg = HybridConfig::new(1.0, 0.0, 0.0);
        jump_segment_thinned_lj(&split, SplitMode::Pairwise, &x, &mut v, &cfg, 1, 0, &mut keyed_rng(66, 0, 0, 0), &mut c).unwrap();
        assert_eq!(c.jump_proposals, 0);
        assert_eq!(v, vec![0.5; 9]);
    }

    fn segment_samples(jump: JumpMode, seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let (model, x) = three_body();
        let mut cfg = HybridConfig::new(0.5, 0.0, 1.0);
        cfg.jump = jump;
        let rows: Vec<(Vec<f64>, f64)> = (0..n)
            .into_par_iter()
            .map(|k| {
                let mut rng = keyed_rng(seed, 1, k as u64, 0);
                let mut v = vec![0.0; 9];
                fill_normal(&mut rng, &mut v);
                let mut c = CostCounters::default();
                let b = jump_segment(&model, &cfg, &x, &mut v, seed, k as u64, &mut rng, &mut c).unwrap();
                assert!(c.max_accept_ratio <= 1.0 + ACCEPT_TOLERANCE);
                (v, b as f64)
            })
            .collect();
        let mut comps: Vec<Vec<f64>> = (0..9).map(|_| Vec::with_capacity(n)).collect();
        let mut counts = Vec::with_capacity(n);
        for (v, b) in rows {
            for (c, vi) in comps.iter_mut().zip(v) {
                c.push(vi);
            }
            counts.push(b);
        }
        (comps, counts)
    }

    #[test]
    fn thinned_and_naive_segments_agree() {
        let n = 20_000;
        let (a, ca) = segment_samples(JumpMode::Naive, 67, n);
        let (b, cb) = segment_samples(JumpMode::Thinned, 68, n);
        assert!(mean(&ca) > 0.1, "too few bounces to be informative: {}", mean(&ca));
        for k in 0..9 {
            let p = ks_two_sample_pvalue(&a[k], &b[k]).unwrap();
            assert!(p > 1e-3, "component {k}: p = {p}");
        }
        assert!((mean(&ca) - mean(&cb)).abs() < 4.0 * ((variance(&ca) + variance(&cb)) / n as f64).sqrt());
    }

    #[test]
    fn two_body_bounce_frequency() {
        let params = LjParams { box_side: 8.0, radius: 1.0, energy_scale: 20.0, split_radius: 3.0 };
        let split = ForceSplit::new(params, 2).unwrap();
        let x = vec![1.0, 1.0, 1.0, 3.2, 1.0, 1.0];
        let g = split.pair_field(&x, 0, 1).unwrap();
        let w1 = [-0.8, 0.1, -0.3];
        let rate = dot(&w1, &g).max(0.0);
        assert!(rate > 0.0);
        let delta = 0.05;
        let cfg = HybridConfig::new(delta, 0.0, 0.0);
        let n = 100_000;
        let hits: u64 = (0..n)
            .into_par_iter()
            .map(|k| {
                let mut v = vec![-0.8, 0.1, -0.3, 0.0, 0.0, 0.0];
                let mut c = CostCounters::default();
                let mut rng = keyed_rng(69, 0, k, 0);
                jump_segment_thinned_lj(&split, SplitMode::Pairwise, &x, &mut v, &cfg, 69, k, &mut rng, &mut c).unwrap();
                (v[..3] != w1) as u64
            })
            .sum();
        let p = 1.0 - (-rate * delta).exp();
        let freq = hits as f64 / n as f64;
        assert!((freq - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "{freq} vs {p}");
    }

    #[test]
    fn pure_transport() {
        let model = Harmonic { dim: 2, stiffness: 0.0 };
        let cfg = HybridConfig::new(0.25, 0.0, 0.0);
        let mut s = HybridState::new(vec![1.0, -1.0], vec![0.5, 2.0]);
        let mut c = CostCounters::default();
        strang_step(&model, &cfg, &mut s, 0, &mut c).unwrap();
        assert_eq!(s.x, vec![1.125, -0.5]);
        assert_eq!(s.v, vec![0.5, 2.0]);
        assert_eq!(c.f0_evals, 1);
    }

    #[test]
    fn verlet_energy_error_is_second_order() {
        let model = Harmonic { dim: 1, stiffness: 1.0 };
        let energy_error = |delta: f64| {
            let cfg = HybridConfig::new(delta, 0.0, 0.0);
            let mut s = HybridState::new(vec![1.0], vec![0.0]);
            let mut c = CostCounters::default();
            let mut worst: f64 = 0.0;
            for _ in 0..100_000 {
                strang_step(&model, &cfg, &mut s, 0, &mut c).unwrap();
                worst = worst.max((0.5 * s.x[0] * s.x[0] + s.kinetic_energy() - 0.5).abs());
            }
            worst
        };
        let (e1, e2) = (energy_error(0.1), energy_error(0.05));
        assert!((e1 / e2 - 4.0).abs() < 0.2, "{e1} {e2}");
    }

    #[test]
    fn kinetic_identity_and_wrapping_on_lj_steps() {
        let (model, x) = three_body();
        let mut cfg = HybridConfig::new(0.002, 1.0, 0.5);
        cfg.jump = JumpMode::Thinned;
        let v: Vec<f64> = {
            let mut r = keyed_rng(70, 0, 0, 0);
            (0..9).map(|_| std_normal(&mut r)).collect()
        };
        let mut sampler = HybridSampler::new(model, cfg, HybridState::new(x, v), 70).unwrap();
        for _ in 0..2000 {
            let before = sampler.state.clone();
            sampler.step().unwrap();
            assert!(kinetic_identity_defect(&before, &sampler.state, cfg.delta, Some(8.0)) < 1e-12);
            assert!(sampler.state.x.iter().all(|&c| (0.0..8.0).contains(&c)));
        }
        assert_eq!(sampler.counters.f0_evals, 2000);
        assert!(sampler.counters.jumps_accepted <= sampler.counters.jump_proposals);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let params = LjParams { box_side: 5.0, radius: 1.0, energy_scale: 0.5, split_radius: 2.0 };
        let sys = LjSystem::cubic_lattice(params, 8).unwrap();
        let split = ForceSplit::new(params, 8).unwrap();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let v = vec![0.7; 24];
                let mut s = HybridSampler::new(LjModel::new(split, 8), HybridConfig::new(0.01, 0.5, 0.0), HybridState::new(sys.positions.clone(), v), 71).unwrap();
                s.run(200, |_, _| {}).unwrap();
                (s.state, s.counters)
            })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn runaway_segments_are_reported() {
        let fields = [SparseField::dense(vec![1e6]), SparseField::dense(vec![-1e6])];
        let mut v = vec![1.0];
        let r = jump_segment_naive(&mut v, &fields, 10.0, 0.0, &mut keyed_rng(72, 0, 0, 0), &mut CostCounters::default());
        assert!(matches!(r, Err(Error::Runaway { .. })));
    }
}
