//! Discrete Zig-Zag walk on `Z^d`: coordinate-sweep transitions (plain,
//! factorized, thinned), parity signatures, Lyapunov drift checks and exact
//! transition matrices on small tori.

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{DiscretePotential, Domain, FactorFn};
use crate::rng::open_uniform;
use crate::stats::SparseMatrix;
use crate::thinning::{thinned_bernoulli, thinned_bernoulli_lazy, BoundSpec};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeState {
    pub x: Vec<i64>,
    /// Entries are `+1` or `-1`.
    pub v: Vec<i64>,
}

impl LatticeState {
    pub fn new(x: Vec<i64>, v: Vec<i64>) -> Self {
        assert_eq!(x.len(), v.len(), "position and velocity dimensions differ");
        assert!(v.iter().all(|&s| s == 1 || s == -1), "velocity entries must be +-1");
        Self { x, v }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn signature(&self) -> Vec<i64> {
        signature(&self.x, &self.v)
    }
}

/// `((-1)^{x_i} v_i)_i`; it changes sign at every sweep.
pub fn signature(x: &[i64], v: &[i64]) -> Vec<i64> {
    x.iter().zip(v).map(|(&xi, &vi)| if xi.rem_euclid(2) == 0 { vi } else { -vi }).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SweepOrder {
    #[default]
    Identity,
    Fixed(Vec<usize>),
    /// Fresh uniform permutation at every step.
    Random,
}

impl SweepOrder {
    fn resolve<R: RngCore + ?Sized>(&self, d: usize, rng: &mut R) -> Result<Vec<usize>> {
        match self {
            SweepOrder::Identity => Ok((0..d).collect()),
            SweepOrder::Fixed(p) => {
                let mut seen = vec![false; d];
                if p.len() != d || p.iter().any(|&k| k >= d || std::mem::replace(&mut seen[k], true)) {
                    return Err(Error::Config(format!("{p:?} is not a permutation of 0..{d}")));
                }
                Ok(p.clone())
            }
            SweepOrder::Random => {
                let mut p: Vec<usize> = (0..d).collect();
                p.shuffle(rng);
                Ok(p)
            }
        }
    }
}

/// A proposed single-coordinate move from `x` along `sign * e_axis`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeMove {
    pub x: Vec<i64>,
    pub axis: usize,
    pub sign: i64,
}

/// How a single coordinate move is accepted.
#[derive(Clone, Default)]
pub enum Acceptance {
    /// `exp(-(U(x + s e_i) - U(x))_+)`.
    #[default]
    Plain,
    /// `prod_j exp(-(f_j(x, s e_i))_+)` over the potential's factor terms.
    Factorized,
    /// Nested bounds whose innermost level is the plain acceptance.
    Thinned(BoundSpec<LatticeMove>),
    /// Factorized acceptance where factor `j` is first screened by the bound
    /// `exp(-(l_j)_+)` built from a cheap lower estimate `l_j <= f_j`.
    FactorizedThinned(Vec<FactorFn>),
}

impl std::fmt::Debug for Acceptance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Acceptance::Plain => f.write_str("Plain"),
            Acceptance::Factorized => f.write_str("Factorized"),
            Acceptance::Thinned(spec) => f.debug_tuple("Thinned").field(spec).finish(),
            Acceptance::FactorizedThinned(l) => write!(f, "FactorizedThinned({} bounds)", l.len()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepCounters {
    pub increment_evals: u64,
    pub factor_evals: u64,
    pub bound_evals: u64,
    pub accepted: u64,
    pub flipped: u64,
}

impl SweepCounters {
    pub fn add(&mut self, o: &SweepCounters) {
        self.increment_evals += o.increment_evals;
        self.factor_evals += o.factor_evals;
        self.bound_evals += o.bound_evals;
        self.accepted += o.accepted;
        self.flipped += o.flipped;
    }
}

#[inline]
fn move_prob(d: f64) -> f64 {
    (-d.max(0.0)).exp()
}

fn require_factors(u: &DiscretePotential) -> Result<&[FactorFn]> {
    u.factors().ok_or_else(|| Error::Config("factorized acceptance needs factor terms".into()))
}

/// Exact acceptance probability of a move.
pub fn acceptance_probability(u: &DiscretePotential, acc: &Acceptance, mv: &LatticeMove) -> Result<f64> {
    Ok(match acc {
        Acceptance::Plain => move_prob(u.delta(&mv.x, mv.axis, mv.sign)),
        Acceptance::Factorized => {
            require_factors(u)?.iter().map(|f| move_prob(f(&mv.x, mv.axis, mv.sign))).product()
        }
        Acceptance::Thinned(spec) => spec.acceptance_probability(mv)?,
        Acceptance::FactorizedThinned(lower) => {
            let factors = require_factors(u)?;
            check_lower_bounds(factors, lower)?;
            let mut p = 1.0;
            for (f, l) in factors.iter().zip(lower) {
                let two = BoundSpec::<LatticeMove>::new()
                    .level("bound", {
                        let l = l.clone();
                        move |m: &LatticeMove| move_prob(l(&m.x, m.axis, m.sign))
                    })
                    .level("factor", {
                        let f = f.clone();
                        move |m: &LatticeMove| move_prob(f(&m.x, m.axis, m.sign))
                    });
                p *= two.acceptance_probability(mv)?;
            }
            p
        }
    })
}

fn check_lower_bounds(factors: &[FactorFn], lower: &[FactorFn]) -> Result<()> {
    if factors.len() != lower.len() {
        return Err(Error::Config(format!("{} factor bounds for {} factors", lower.len(), factors.len())));
    }
    Ok(())
}

fn sample_acceptance<R: RngCore + ?Sized>(
    u: &DiscretePotential,
    acc: &Acceptance,
    mv: &LatticeMove,
    counters: &mut SweepCounters,
    rng: &mut R,
) -> Result<bool> {
    match acc {
        Acceptance::Plain => {
            counters.increment_evals += 1;
            Ok(open_uniform(rng) <= move_prob(u.delta(&mv.x, mv.axis, mv.sign)))
        }
        Acceptance::Factorized => {
            for f in require_factors(u)? {
                counters.factor_evals += 1;
                if open_uniform(rng) > move_prob(f(&mv.x, mv.axis, mv.sign)) {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Acceptance::Thinned(spec) => {
            let (ok, levels) = thinned_bernoulli(mv, spec, rng)?;
            counters.bound_evals += levels as u64;
            Ok(ok)
        }
        Acceptance::FactorizedThinned(lower) => {
            let factors = require_factors(u)?;
            check_lower_bounds(factors, lower)?;
            for (f, l) in factors.iter().zip(lower) {
                let (ok, levels) = thinned_bernoulli_lazy(
                    2,
                    |k| {
                        let g = if k == 0 { l } else { f };
                        move_prob(g(&mv.x, mv.axis, mv.sign))
                    },
                    rng,
                )?;
                counters.bound_evals += 1;
                counters.factor_evals += (levels == 2) as u64;
                if !ok {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// One Gibbs sweep: coordinates are visited in `order`, each keeping its
/// velocity and moving with the acceptance probability evaluated at the
/// current intermediate position, or flipping otherwise.
pub fn sweep<R: RngCore + ?Sized>(
    s: &mut LatticeState,
    u: &DiscretePotential,
    acc: &Acceptance,
    order: &SweepOrder,
    rng: &mut R,
) -> Result<SweepCounters> {
    let d = u.dim();
    if s.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: s.dim() });
    }
    let mut counters = SweepCounters::default();
    let perm = order.resolve(d, rng)?;
    let domain = u.domain();
    let mut mv = LatticeMove { x: std::mem::take(&mut s.x), axis: 0, sign: 1 };
    for axis in perm {
        mv.axis = axis;
        mv.sign = s.v[axis];
        if sample_acceptance(u, acc, &mv, &mut counters, rng)? {
            mv.x[axis] = domain.wrap(mv.x[axis] + mv.sign);
            counters.accepted += 1;
        } else {
            s.v[axis] = -mv.sign;
            counters.flipped += 1;
        }
    }
    s.x = mv.x;
    Ok(counters)
}

/// Plain-acceptance sweep.
pub fn sweep_transition<R: RngCore + ?Sized>(s: &mut LatticeState, u: &DiscretePotential, order: &SweepOrder, rng: &mut R) {
    sweep(s, u, &Acceptance::Plain, order, rng).expect("plain sweep on matching dimensions cannot fail");
}

/// Factorized sweep, optionally screening each factor with a lower bound.
pub fn sweep_transition_factorized<R: RngCore + ?Sized>(
    s: &mut LatticeState,
    u: &DiscretePotential,
    order: &SweepOrder,
    thin: Option<&[FactorFn]>,
    rng: &mut R,
) -> Result<SweepCounters> {
    require_factors(u)?;
    let acc = match thin {
        None => Acceptance::Factorized,
        Some(l) => Acceptance::FactorizedThinned(l.to_vec()),
    };
    sweep(s, u, &acc, order, rng)
}

/// Index map for `(Z/N)^d x {-1, 1}^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    pub dim: usize,
    pub side: i64,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        (self.side as usize).pow(self.dim as u32) << self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, x: &[i64], v: &[i64]) -> usize {
        let n = self.side;
        let mut idx = 0usize;
        for &c in x.iter().rev() {
            idx = idx * n as usize + (Domain::Torus(n).wrap(c) + n / 2) as usize;
        }
        let mut bits = 0usize;
        for (i, &s) in v.iter().enumerate() {
            if s > 0 {
                bits |= 1 << i;
            }
        }
        (idx << self.dim) | bits
    }

    pub fn state(&self, idx: usize) -> LatticeState {
        let bits = idx & ((1 << self.dim) - 1);
        let mut rest = idx >> self.dim;
        let n = self.side as usize;
        let x = (0..self.dim)
            .map(|_| {
                let c = (rest % n) as i64 - self.side / 2;
                rest /= n;
                c
            })
            .collect();
        let v = (0..self.dim).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
        LatticeState { x, v }
    }

    /// States grouped by signature; requires an even side so that the
    /// parity of a coordinate is well defined on the torus.
    pub fn signature_classes(&self) -> Result<Vec<(Vec<i64>, Vec<usize>)>> {
        if self.side % 2 != 0 {
            return Err(Error::Config("signature classes need an even torus side".into()));
        }
        let mut classes: Vec<(Vec<i64>, Vec<usize>)> = (0..1usize << self.dim)
            .map(|b| ((0..self.dim).map(|i| if b >> i & 1 == 1 { 1 } else { -1 }).collect(), Vec::new()))
            .collect();
        for idx in 0..self.len() {
            let s = self.state(idx).signature();
            let b = s.iter().enumerate().fold(0usize, |acc, (i, &c)| acc | (((c > 0) as usize) << i));
            classes[b].1.push(idx);
        }
        Ok(classes)
    }

    /// `mu(x, v) ~ exp(-U(x))`, normalised over the whole space.
    pub fn invariant_measure(&self, u: &DiscretePotential) -> Vec<f64> {
        let mut mu: Vec<f64> = (0..self.len()).map(|k| (-u.value(&self.state(k).x)).exp()).collect();
        let z: f64 = mu.iter().sum();
        mu.iter_mut().for_each(|m| *m /= z);
        mu
    }
}

pub const MATRIX_STATE_LIMIT: usize = 1_000_000;

fn all_permutations(d: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; d], &mut out);
    out
}

/// Enumerates the `2^d` accept/flip paths of a sweep from `(x, v)` with their
/// probabilities, following the intermediate positions exactly.
pub fn sweep_outcomes(
    u: &DiscretePotential,
    acc: &Acceptance,
    perm: &[usize],
    x: &[i64],
    v: &[i64],
) -> Result<Vec<(LatticeState, f64)>> {
    let mut out = Vec::with_capacity(1 << perm.len());
    let domain = u.domain();
    let mut stack = vec![(LatticeMove { x: x.to_vec(), axis: 0, sign: 1 }, v.to_vec(), 0usize, 1.0f64)];
    while let Some((mut mv, vel, depth, p)) = stack.pop() {
        if depth == perm.len() {
            out.push((LatticeState { x: mv.x, v: vel }, p));
            continue;
        }
        let axis = perm[depth];
        mv.axis = axis;
        mv.sign = vel[axis];
        let q = acceptance_probability(u, acc, &mv)?;
        if q < 1.0 {
            let mut flipped = vel.clone();
            flipped[axis] = -mv.sign;
            stack.push((mv.clone(), flipped, depth + 1, p * (1.0 - q)));
        }
        if q > 0.0 {
            mv.x[axis] = domain.wrap(mv.x[axis] + mv.sign);
            stack.push((mv, vel, depth + 1, p * q));
        }
    }
    Ok(out)
}

/// Exact one-sweep transition matrix on a torus. A random sweep order is
/// the average of the kernels over all permutations.
pub fn build_transition_matrix(
    u: &DiscretePotential,
    acc: &Acceptance,
    order: &SweepOrder,
) -> Result<(StateSpace, SparseMatrix)> {
    let side = match u.domain() {
        Domain::Torus(n) => n,
        Domain::Lattice => return Err(Error::Config("transition matrices need a torus domain".into())),
    };
    let d = u.dim();
    let states = (side as usize).checked_pow(d as u32).and_then(|s| s.checked_mul(1 << d)).unwrap_or(usize::MAX);
    if states > MATRIX_STATE_LIMIT {
        return Err(Error::Size { states, limit: MATRIX_STATE_LIMIT });
    }
    let space = StateSpace { dim: d, side };
    let perms = match order {
        SweepOrder::Random => all_permutations(d),
        other => vec![other.resolve(d, &mut crate::rng::keyed_rng(0, 0, 0, 0))?],
    };
    let weight = 1.0 / perms.len() as f64;
    let mut rows = Vec::with_capacity(states);
    for idx in 0..states {
        let s = space.state(idx);
        let mut row = Vec::new();
        for perm in &perms {
            for (t, p) in sweep_outcomes(u, acc, perm, &s.x, &s.v)? {
                row.push((space.index(&t.x, &t.v), weight * p));
            }
        }
        rows.push(row);
    }
    Ok((space, SparseMatrix::from_rows(rows)))
}

/// Parameters of the drift function `V(x, v) = sum_i exp(a|x_i| + b [x_i v_i > 0])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovParams {
    pub a: f64,
    pub b: f64,
    pub radius: f64,
    pub h: f64,
}

impl LyapunovParams {
    /// `a = h/2` and `exp(-b) = exp(-h/4) - exp(-h/2)`.
    pub fn defaults(h: f64, radius: f64) -> Self {
        let b = -((-h / 4.0).exp() - (-h / 2.0).exp()).ln();
        Self { a: h / 2.0, b, radius, h }
    }

    /// `max(exp(a - h) + (1 - exp(-h)) exp(-b), exp(-a))`.
    pub fn gamma(&self) -> f64 {
        ((self.a - self.h).exp() + (1.0 - (-self.h).exp()) * (-self.b).exp()).max((-self.a).exp())
    }

    /// `d exp(a (R + 1) + b)`.
    pub fn constant(&self, d: usize) -> f64 {
        d as f64 * (self.a * (self.radius + 1.0) + self.b).exp()
    }

    pub fn value(&self, x: &[i64], v: &[i64]) -> f64 {
        x.iter()
            .zip(v)
            .map(|(&xi, &vi)| (self.a * xi.abs() as f64 + if xi * vi > 0 { self.b } else { 0.0 }).exp())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub gamma: f64,
    pub constant: f64,
    pub states_checked: usize,
    /// `max (QV - gamma V - C)`; non-positive when the drift inequality holds.
    pub max_violation: f64,
    /// `min (gamma V + C - QV) / V`.
    pub min_relative_margin: f64,
    /// States where the outward-growth hypothesis
    /// `(U(x + v_i e_i) - U(x))_+ >= h [v_i x_i > R]` fails.
    pub assumption_violations: usize,
}

impl LyapunovReport {
    pub fn holds(&self) -> bool {
        self.assumption_violations == 0 && self.max_violation <= 1e-9 * self.constant.max(1.0)
    }
}

/// Exhaustive drift check `QV <= gamma V + C` over the box `|x_i| <= sample_box`.
pub fn lyapunov_report(u: &DiscretePotential, params: &LyapunovParams, sample_box: i64) -> Result<LyapunovReport> {
    if u.domain() != Domain::Lattice {
        return Err(Error::Config("the drift check runs on Z^d".into()));
    }
    let d = u.dim();
    let gamma = params.gamma();
    let constant = params.constant(d);
    let perm: Vec<usize> = (0..d).collect();
    let mut report = LyapunovReport {
        gamma,
        constant,
        states_checked: 0,
        max_violation: f64::NEG_INFINITY,
        min_relative_margin: f64::INFINITY,
        assumption_violations: 0,
    };
    for x in u.box_points(sample_box) {
        for bits in 0..1usize << d {
            let v: Vec<i64> = (0..d).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
            let hypothesis_ok = (0..d).all(|i| {
                let outward = (v[i] * x[i]) as f64 > params.radius;
                !outward || u.delta(&x, i, v[i]).max(0.0) >= params.h
            });
            if !hypothesis_ok {
                report.assumption_violations += 1;
            }
            let qv: f64 = sweep_outcomes(u, &Acceptance::Plain, &perm, &x, &v)?
                .iter()
                .map(|(t, p)| p * params.value(&t.x, &t.v))
                .sum();
            let vv = params.value(&x, &v);
            report.max_violation = report.max_violation.max(qv - gamma * vv - constant);
            report.min_relative_margin = report.min_relative_margin.min((gamma * vv + constant - qv) / vv);
            report.states_checked += 1;
        }
    }
    Ok(report)
}
