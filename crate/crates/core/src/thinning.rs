//! Lazy Bernoulli sampling through nested upper bounds.
//!
//! With bounds `q_1 >= q_2 >= ... >= q_n`, the event `U_k <= q_k / q_{k-1}`
//! for every level has probability exactly `q_n`, and evaluation stops at the
//! first failed level, so expensive inner levels are only computed when the
//! cheap outer ones fire.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::rng::open_uniform;

/// Slack allowed when checking that a level does not exceed its predecessor.
pub const DOMINANCE_TOLERANCE: f64 = 1e-12;

pub type BoundFn<S> = Arc<dyn Fn(&S) -> f64 + Send + Sync>;

/// Ordered bound functions, cheapest first; the last level is the exact
/// acceptance probability.
pub struct BoundSpec<S: ?Sized> {
    levels: Vec<(String, BoundFn<S>)>,
}

impl<S: ?Sized> Clone for BoundSpec<S> {
    fn clone(&self) -> Self {
        Self { levels: self.levels.clone() }
    }
}

impl<S: ?Sized> fmt::Debug for BoundSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.levels.iter().map(|(l, _)| l)).finish()
    }
}

impl<S: ?Sized> Default for BoundSpec<S> {
    fn default() -> Self {
        Self { levels: Vec::new() }
    }
}

impl<S: ?Sized> BoundSpec<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn level<F>(mut self, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&S) -> f64 + Send + Sync + 'static,
    {
        self.levels.push((label.into(), Arc::new(f)));
        self
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.levels.iter().map(|(l, _)| l.as_str())
    }

    pub fn evaluate(&self, level: usize, state: &S) -> f64 {
        (self.levels[level].1)(state)
    }

    /// Probability of the composite acceptance region: the product of the
    /// per-level conditional ratios (equal to the innermost level when the
    /// bounds are nested).
    pub fn acceptance_probability(&self, state: &S) -> Result<f64> {
        let mut prev = 1.0;
        let mut measure = 1.0;
        for k in 0..self.levels.len() {
            let q = checked_level(k, self.evaluate(k, state), prev)?;
            if q == 0.0 {
                return Ok(0.0);
            }
            measure *= (q / prev).min(1.0);
            prev = q;
        }
        Ok(measure)
    }

    /// Largest amount by which any level exceeds its predecessor at `state`.
    pub fn dominance_gap(&self, state: &S) -> f64 {
        let mut prev = 1.0;
        let mut gap = f64::NEG_INFINITY;
        for k in 0..self.levels.len() {
            let q = self.evaluate(k, state);
            gap = gap.max(q - prev);
            prev = q;
        }
        gap
    }
}

#[inline]
fn checked_level(level: usize, value: f64, previous: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::BoundRange { level, value });
    }
    if value > previous + DOMINANCE_TOLERANCE {
        return Err(Error::Dominance { level, value, previous });
    }
    Ok(value)
}

/// Thinned Bernoulli over lazily evaluated levels `eval(0), eval(1), ...`.
/// Returns the outcome and the number of levels evaluated.
pub fn thinned_bernoulli_lazy<R, F>(levels: usize, mut eval: F, rng: &mut R) -> Result<(bool, usize)>
where
    R: RngCore + ?Sized,
    F: FnMut(usize) -> f64,
{
    let mut prev = 1.0;
    for k in 0..levels {
        let q = checked_level(k, eval(k), prev)?;
        let ratio = if prev > 0.0 { (q / prev).min(1.0) } else { 0.0 };
        if open_uniform(rng) > ratio {
            return Ok((false, k + 1));
        }
        prev = q;
    }
    Ok((true, levels))
}

pub fn thinned_bernoulli<S: ?Sized, R: RngCore + ?Sized>(
    state: &S,
    spec: &BoundSpec<S>,
    rng: &mut R,
) -> Result<(bool, usize)> {
    thinned_bernoulli_lazy(spec.len(), |k| spec.evaluate(k, state), rng)
}

/// Number of failed trials before the first success when each trial fires
/// with probability `q`; `K + 1` is geometric with parameter `q`.
pub fn geometric_skip(q: f64, u: f64) -> Result<u64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("skip probability {q} not in (0, 1)")));
    }
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("uniform {u} not in (0, 1)")));
    }
    let k = (u.ln() / (-q).ln_1p()).floor();
    Ok(if k >= u64::MAX as f64 { u64::MAX } else { k as u64 })
}

/// Returned by [`flow_skip`] when the cap is reached without a firing.
#[derive(Debug, Clone, PartialEq)]
pub struct CapExceeded<S> {
    pub cap: u64,
    pub state: S,
}

impl<S: fmt::Debug> fmt::Display for CapExceeded<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "no proposal fired within {} flow steps", self.cap)
    }
}

impl<S: fmt::Debug> std::error::Error for CapExceeded<S> {}

/// Follows the deterministic map `phi` from `init`, drawing one uniform per
/// step against `q(phi_k(init))`, and returns the first firing index with the
/// state reached there.
pub fn flow_skip<S, P, Q, R>(init: S, phi: P, q: Q, rng: &mut R, cap: u64) -> std::result::Result<(u64, S), CapExceeded<S>>
where
    P: Fn(&S) -> S,
    Q: Fn(&S) -> f64,
    R: RngCore + ?Sized,
{
    let mut state = init;
    for k in 0..cap {
        if open_uniform(rng) <= q(&state) {
            return Ok((k, state));
        }
        state = phi(&state);
    }
    Err(CapExceeded { cap, state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{keyed_rng, ReplayRng};

    fn two_level(outer: f64, inner: f64) -> BoundSpec<()> {
        BoundSpec::new().level("cheap", move |_| outer).level("exact", move |_| inner)
    }

    #[test]
    fn zero_outer_bound_short_circuits() {
        let spec = BoundSpec::<()>::new()
            .level("cheap", |_| 0.0)
            .level("exact", |_| panic!("inner level must not run"));
        let mut rng = keyed_rng(1, 0, 0, 0);
        for _ in 0..100 {
            assert_eq!(thinned_bernoulli(&(), &spec, &mut rng).unwrap(), (false, 1));
        }
    }

    #[test]
    fn tight_bound_reduces_to_plain_bernoulli() {
        // With q~ = q the second ratio is 1, so acceptance is exactly U1 <= q.
        let spec = two_level(0.3, 0.3);
        for (u1, want) in [(0.29, true), (0.31, false)] {
            let mut rng = ReplayRng::new(&[u1, 0.999_999]);
            assert_eq!(thinned_bernoulli(&(), &spec, &mut rng).unwrap().0, want);
        }
        assert_eq!(spec.acceptance_probability(&()).unwrap(), 0.3);
    }

    #[test]
    fn replayed_grid_recovers_the_region_measure() {
        let spec = two_level(0.5, 0.2);
        let g = 200;
        let mut accepted = 0;
        for a in 0..g {
            for b in 0..g {
                let u = [(a as f64 + 0.5) / g as f64, (b as f64 + 0.5) / g as f64];
                let mut rng = ReplayRng::new(&u);
                accepted += thinned_bernoulli(&(), &spec, &mut rng).unwrap().0 as usize;
            }
        }
        assert!((accepted as f64 / (g * g) as f64 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn acceptance_and_laziness_frequencies() {
        let spec = two_level(0.5, 0.2);
        let mut rng = keyed_rng(2, 0, 0, 0);
        let n = 100_000;
        let (mut acc, mut deep) = (0usize, 0usize);
        for _ in 0..n {
            let (a, levels) = thinned_bernoulli(&(), &spec, &mut rng).unwrap();
            acc += a as usize;
            deep += (levels == 2) as usize;
        }
        let sd = |p: f64| (p * (1.0 - p) / n as f64).sqrt();
        assert!((acc as f64 / n as f64 - 0.2).abs() < 3.0 * sd(0.2));
        assert!((deep as f64 / n as f64 - 0.5).abs() < 3.0 * sd(0.5));
    }

    #[test]
    fn contract_violations_are_reported() {
        let mut rng = keyed_rng(3, 0, 0, 0);
        let out_of_range = BoundSpec::<()>::new().level("bad", |_| 1.5);
        assert!(matches!(thinned_bernoulli(&(), &out_of_range, &mut rng), Err(Error::BoundRange { level: 0, .. })));
        let inverted = BoundSpec::<()>::new().level("a", |_| 1.0).level("b", |_| 0.2).level("c", |_| 0.3);
        assert!(matches!(inverted.acceptance_probability(&()), Err(Error::Dominance { level: 2, .. })));
        assert!(inverted.dominance_gap(&()) > 0.09);
    }

    #[test]
    fn geometric_skip_examples() {
        assert_eq!(geometric_skip(0.5, 0.3).unwrap(), 1);
        assert_eq!(geometric_skip(0.5, 0.9).unwrap(), 0);
        for bad in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(geometric_skip(bad, 0.5).is_err());
        }
        assert!(geometric_skip(0.5, 0.0).is_err());
    }

    #[test]
    fn geometric_skip_has_the_geometric_pmf() {
        let q = 0.1;
        let n = 1_000_000;
        let mut rng = keyed_rng(4, 0, 0, 0);
        let mut counts = [0usize; 30];
        for _ in 0..n {
            let k = geometric_skip(q, open_uniform(&mut rng)).unwrap() as usize;
            if k < counts.len() {
                counts[k] += 1;
            }
        }
        for (k, &c) in counts.iter().enumerate() {
            let p = q * (1.0 - q).powi(k as i32);
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((c as f64 / n as f64 - p).abs() < 3.5 * sd, "k={k}");
        }
    }

    #[test]
    fn flow_skip_edge_cases() {
        let mut rng = keyed_rng(5, 0, 0, 0);
        assert_eq!(flow_skip(3i64, |s| s + 1, |_| 1.0, &mut rng, 10).unwrap(), (0, 3));
        let err = flow_skip(0i64, |s| s + 2, |_| 0.0, &mut rng, 100).unwrap_err();
        assert_eq!(err, CapExceeded { cap: 100, state: 200 });
    }

    #[test]
    fn flow_skip_returns_the_flowed_state() {
        let mut rng = keyed_rng(6, 0, 0, 0);
        for _ in 0..1000 {
            let (k, s) = flow_skip(10i64, |s| s - 1, |_| 0.3, &mut rng, 1_000_000).unwrap();
            assert_eq!(s, 10 - k as i64);
        }
    }

    #[test]
    fn flow_skip_with_constant_rate_matches_geometric_skip_in_law() {
        let c = 0.25;
        let n = 200_000;
        let mut r1 = keyed_rng(7, 0, 0, 0);
        let mut r2 = keyed_rng(7, 1, 0, 0);
        let mut a = [0usize; 20];
        let mut b = [0usize; 20];
        for _ in 0..n {
            let k = flow_skip((), |_| (), |_| c, &mut r1, 1 << 40).unwrap().0 as usize;
            let g = geometric_skip(c, open_uniform(&mut r2)).unwrap() as usize;
            if k < 20 {
                a[k] += 1;
            }
            if g < 20 {
                b[g] += 1;
            }
        }
        for k in 0..20 {
            let p = c * (1.0 - c).powi(k as i32);
            let sd = (2.0 * p * (1.0 - p) / n as f64).sqrt();
            assert!(((a[k] as f64 - b[k] as f64) / n as f64).abs() < 4.0 * sd, "k={k}");
        }
    }
}
