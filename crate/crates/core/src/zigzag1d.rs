//! Persistent (Zig-Zag) walk on `Z`: transitions, renewal-based variance
//! quantities and the low-temperature escape experiment.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::DiscretePotential;
use crate::rng::{keyed_rng, open_uniform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Walk1D {
    pub x: i64,
    pub v: i64,
    pub steps: u64,
}

impl Walk1D {
    pub fn new(x: i64, v: i64) -> Self {
        assert!(v == 1 || v == -1, "velocity must be +-1");
        Self { x, v, steps: 0 }
    }

    /// `(-1)^x v (-1)^steps`, constant along every trajectory.
    pub fn parity(&self) -> i64 {
        let s = if (self.x + self.steps as i64).rem_euclid(2) == 0 { 1 } else { -1 };
        s * self.v
    }
}

/// Move with probability `exp(-(U(x+v) - U(x))_+)`, otherwise flip.
#[inline]
pub fn accept_move(increment: f64, u: f64) -> bool {
    increment <= 0.0 || u <= (-increment).exp()
}

/// One transition driven by the uniform `u`.
pub fn step1d(s: Walk1D, u_pot: &DiscretePotential, u: f64) -> Walk1D {
    let inc = u_pot.delta(&[s.x], 0, s.v);
    let (x, v) = if accept_move(inc, u) { (s.x + s.v, s.v) } else { (s.x, -s.v) };
    Walk1D { x, v, steps: s.steps + 1 }
}

pub fn advance<R: RngCore + ?Sized>(s: &mut Walk1D, u_pot: &DiscretePotential, rng: &mut R) {
    *s = step1d(*s, u_pot, open_uniform(rng));
}

/// Stationary position law `pi(x) ~ exp(-U(x))` truncated to `[-n, n]`,
/// relative to `exp(-U(0))`, indexed from `-n`.
fn truncated_weights(u_pot: &DiscretePotential, n: i64) -> Vec<f64> {
    let u0 = u_pot.value(&[0]);
    (-n..=n).map(|k| (u0 - u_pot.value(&[k])).exp()).collect()
}

/// Truncation radius where the tail bound `exp(U(0) - U(k))` drops below
/// `1e-14` on both sides, capped at `10^6`.
pub fn auto_truncation(u_pot: &DiscretePotential) -> i64 {
    let u0 = u_pot.value(&[0]);
    let mut k = 1;
    while k < 1_000_000 {
        let tail = (u0 - u_pot.value(&[k])).exp().max((u0 - u_pot.value(&[-k])).exp());
        if tail < 1e-14 {
            break;
        }
        k += 1;
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltBound {
    /// `M_f = E_pi[g F]`; the asymptotic variance is at most `3 M_f`.
    pub m_f: f64,
    /// `mu(f)` over the truncated range.
    pub mean: f64,
    /// Tail estimate `exp(U(0) - U(+-truncation))` (the larger side).
    pub tail: f64,
    pub truncation: i64,
}

/// `M_f = sum_x g(x) F(x) pi(x)` with `g(x) = f(x,1) + f(x,-1)` and
/// `F(x) = g(x)/2 + sum of g strictly between 0 and x`.
pub fn clt_variance_bound<F>(u_pot: &DiscretePotential, f: F, truncation: Option<i64>) -> Result<CltBound>
where
    F: Fn(i64, i64) -> f64,
{
    if u_pot.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: u_pot.dim() });
    }
    let n = truncation.unwrap_or_else(|| auto_truncation(u_pot)).max(1);
    let w = truncated_weights(u_pot, n);
    let z: f64 = w.iter().sum();
    let g = |k: i64| f(k, 1) + f(k, -1);
    let pi = |k: i64| w[(k + n) as usize] / z;

    let mean: f64 = (-n..=n).map(|k| 0.5 * g(k) * pi(k)).sum();
    let scale: f64 = (-n..=n).map(|k| g(k).abs() * pi(k)).sum::<f64>().max(1.0);
    if mean.abs() > 1e-10 * scale {
        return Err(Error::Precondition(format!("f is not centred: mu(f) = {mean:e}")));
    }

    let mut m_f = 0.5 * g(0) * g(0) * pi(0);
    for side in [1i64, -1] {
        let mut partial = 0.0;
        for step in 1..=n {
            let k = side * step;
            let gk = g(k);
            m_f += gk * (0.5 * gk + partial) * pi(k);
            partial += gk;
        }
    }
    let u0 = u_pot.value(&[0]);
    let tail = (u0 - u_pot.value(&[n])).exp().max((u0 - u_pot.value(&[-n])).exp());
    Ok(CltBound { m_f, mean, tail, truncation: n })
}

/// Renewal rate `lambda = 2 exp(U(0)) Z`, the mean length of an excursion
/// from `(0, +1)` back to itself.
pub fn renewal_rate(u_pot: &DiscretePotential) -> f64 {
    let n = auto_truncation(u_pot);
    2.0 * truncated_weights(u_pot, n).iter().sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewalEstimate {
    /// `E(A_0^2) / lambda_hat`.
    pub sigma2: f64,
    /// Mean block length.
    pub lambda_hat: f64,
    pub blocks: usize,
}

/// Block sums `A_n` and lengths of excursions from `(0, +1)`.
pub fn renewal_blocks<F, R>(u_pot: &DiscretePotential, f: F, blocks: usize, rng: &mut R) -> Vec<(f64, u64)>
where
    F: Fn(i64, i64) -> f64,
    R: RngCore + ?Sized,
{
    let mut s = Walk1D::new(0, 1);
    (0..blocks)
        .map(|_| {
            let mut a = 0.0;
            let mut len = 0u64;
            loop {
                a += f(s.x, s.v);
                advance(&mut s, u_pot, rng);
                len += 1;
                if s.x == 0 && s.v == 1 {
                    break;
                }
            }
            (a, len)
        })
        .collect()
}

/// Monte Carlo estimate of the asymptotic variance `sigma_f^2 = E(A_0^2) / lambda`.
pub fn renewal_variance<F, R>(u_pot: &DiscretePotential, f: F, blocks: usize, rng: &mut R) -> RenewalEstimate
where
    F: Fn(i64, i64) -> f64,
    R: RngCore + ?Sized,
{
    let b = renewal_blocks(u_pot, f, blocks, rng);
    let n = b.len().max(1) as f64;
    let second = b.iter().map(|(a, _)| a * a).sum::<f64>() / n;
    let lambda_hat = b.iter().map(|&(_, l)| l as f64).sum::<f64>() / n;
    RenewalEstimate { sigma2: second / lambda_hat, lambda_hat, blocks: b.len() }
}

/// Escape window `a < alpha <= 0 <= beta < b` at temperature `eps`.
#[derive(Debug, Clone)]
pub struct EscapeConfig {
    pub potential: DiscretePotential,
    pub a: i64,
    pub b: i64,
    pub alpha: i64,
    pub beta: i64,
    pub eps: f64,
    pub step_cap: u64,
}

pub const DEFAULT_STEP_CAP: u64 = 10_000_000_000;

impl EscapeConfig {
    pub fn new(potential: DiscretePotential, a: i64, b: i64, alpha: i64, beta: i64, eps: f64) -> Self {
        Self { potential, a, b, alpha, beta, eps, step_cap: DEFAULT_STEP_CAP }
    }

    fn u(&self, k: i64) -> f64 {
        self.potential.value(&[k])
    }

    /// Checks the ordering of the endpoints, `U(0) = 0`, monotonicity on each
    /// side of 0 and that the zero set in the window is `[alpha, beta]`.
    pub fn validate(&self) -> Result<()> {
        if self.potential.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: self.potential.dim() });
        }
        if !(self.a < self.alpha && self.alpha <= 0 && 0 <= self.beta && self.beta < self.b) {
            return Err(Error::Config("need a < alpha <= 0 <= beta < b".into()));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config("temperature must be positive".into()));
        }
        if self.u(0) != 0.0 {
            return Err(Error::Config(format!("U(0) = {} must vanish", self.u(0))));
        }
        for k in self.a..0 {
            if self.u(k) < self.u(k + 1) {
                return Err(Error::Config(format!("U not decreasing on [a, 0] at {k}")));
            }
        }
        for k in 0..self.b {
            if self.u(k + 1) < self.u(k) {
                return Err(Error::Config(format!("U not increasing on [0, b] at {k}")));
            }
        }
        for k in self.a..=self.b {
            let zero = self.u(k) == 0.0;
            if zero != (self.alpha..=self.beta).contains(&k) {
                return Err(Error::Config(format!("zero set of U in the window is not [alpha, beta] (at {k})")));
            }
        }
        Ok(())
    }

    /// `E1 = min(U(a), U(b))`.
    pub fn e1(&self) -> f64 {
        self.u(self.a).min(self.u(self.b))
    }

    /// `E2 = min(U(alpha - 1), U(beta + 1))`.
    pub fn e2(&self) -> f64 {
        self.u(self.alpha - 1).min(self.u(self.beta + 1))
    }

    /// `E3 = |U(a) - U(b)|`.
    pub fn e3(&self) -> f64 {
        (self.u(self.a) - self.u(self.b)).abs()
    }

    /// Exact parameter of the geometric number of excursions before escape:
    /// `exp(-U(b)/eps) + exp(-U(a)/eps) - exp(-(U(a)+U(b))/eps)`.
    pub fn excursion_escape_probability(&self) -> f64 {
        let (ea, eb) = ((-self.u(self.a) / self.eps).exp(), (-self.u(self.b) / self.eps).exp());
        ea + eb - ea * eb
    }

    /// Exact `P(X_tau = b) = exp(-U(b)/eps) / p`.
    pub fn exit_right_probability(&self) -> f64 {
        (-self.u(self.b) / self.eps).exp() / self.excursion_escape_probability()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeSample {
    pub tau: u64,
    pub exit_left: bool,
}

/// Runs the walk for `U / eps` from `(0, +1)` until it leaves `]a, b[`.
pub fn escape_time_sample<R: RngCore + ?Sized>(cfg: &EscapeConfig, rng: &mut R) -> Result<EscapeSample> {
    let (a, b) = (cfg.a, cfg.b);
    // Only increments from inside the window are ever needed.
    let inc: Vec<[f64; 2]> = (a + 1..b)
        .map(|k| {
            let here = cfg.potential.value(&[k]);
            [
                (cfg.potential.value(&[k - 1]) - here) / cfg.eps,
                (cfg.potential.value(&[k + 1]) - here) / cfg.eps,
            ]
        })
        .collect();
    let (mut x, mut v) = (0i64, 1i64);
    let mut steps = 0u64;
    while x > a && x < b {
        if steps >= cfg.step_cap {
            return Err(Error::Timeout { cap: cfg.step_cap, steps, position: x });
        }
        let d = inc[(x - a - 1) as usize][(v > 0) as usize];
        if accept_move(d, open_uniform(rng)) {
            x += v;
        } else {
            v = -v;
        }
        steps += 1;
    }
    Ok(EscapeSample { tau: steps, exit_left: x == a })
}

/// Independent escape samples; sample `k` uses the stream `(seed, stream, k)`
/// so results do not depend on the thread count.
pub fn escape_samples(cfg: &EscapeConfig, n: usize, seed: u64, stream: u64) -> Result<Vec<EscapeSample>> {
    (0..n)
        .into_par_iter()
        .map(|k| escape_time_sample(cfg, &mut keyed_rng(seed, stream, k as u64, 0)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapePrediction {
    pub mean_tau: f64,
    pub p_exit_left: f64,
}

/// Leading-order Eyring-Kramers law: `E(tau) ~ exp(E1/eps) 2(beta-alpha+1) / (1 + [U(a)=U(b)])`
/// and the limiting exit-side probability.
pub fn eyring_kramers_prediction(cfg: &EscapeConfig) -> EscapePrediction {
    let (ua, ub) = (cfg.u(cfg.a), cfg.u(cfg.b));
    let tie = if ua == ub { 1.0 } else { 0.0 };
    let width = (cfg.beta - cfg.alpha + 1) as f64;
    let mean_tau = (cfg.e1() / cfg.eps).exp() * 2.0 * width / (1.0 + tie);
    let p_exit_left = 0.5 * (1.0 + (ua <= ub) as u8 as f64 - (ub <= ua) as u8 as f64);
    EscapePrediction { mean_tau, p_exit_left }
}
