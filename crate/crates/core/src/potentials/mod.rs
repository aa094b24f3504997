//! Energy landscapes: lattice potentials, smooth potentials and the periodic
//! Lennard-Jones system.

pub mod lj;
pub mod xyz;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lj::{ForceSplit, LjParams, LjSystem, VerletList};
pub use xyz::{parse_xyz, read_xyz, XyzConfig};

/// Energy of a lattice point.
pub type EnergyFn = Arc<dyn Fn(&[i64]) -> f64 + Send + Sync>;

/// Factor term `f_j(x, s e_axis)`; the terms of a potential must sum to the
/// increment `U(x + s e_axis) - U(x)`.
pub type FactorFn = Arc<dyn Fn(&[i64], usize, i64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    /// All of `Z^d`. Sampling requires `sum_x exp(-U(x)) < inf`, which the
    /// caller must guarantee.
    Lattice,
    /// `(Z / N Z)^d`, points represented canonically in `[-N/2, N/2)`.
    Torus(i64),
}

impl Domain {
    /// Canonical representative of a coordinate.
    #[inline]
    pub fn wrap(&self, k: i64) -> i64 {
        match *self {
            Domain::Lattice => k,
            Domain::Torus(n) => (k + n / 2).rem_euclid(n) - n / 2,
        }
    }
}

/// Potential on `Z^d` or a finite torus, with optional factor terms.
#[derive(Clone)]
pub struct DiscretePotential {
    dim: usize,
    domain: Domain,
    energy: EnergyFn,
    factors: Option<Vec<FactorFn>>,
}

impl fmt::Debug for DiscretePotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscretePotential")
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("factors", &self.factors.as_ref().map(Vec::len))
            .finish()
    }
}

const STACK_DIM: usize = 16;

#[inline]
fn with_wrapped<T>(domain: Domain, x: &[i64], f: impl FnOnce(&[i64]) -> T) -> T {
    match domain {
        Domain::Lattice => f(x),
        Domain::Torus(_) if x.len() <= STACK_DIM => {
            let mut buf = [0i64; STACK_DIM];
            for (b, &k) in buf.iter_mut().zip(x) {
                *b = domain.wrap(k);
            }
            f(&buf[..x.len()])
        }
        Domain::Torus(_) => {
            let y: Vec<i64> = x.iter().map(|&k| domain.wrap(k)).collect();
            f(&y)
        }
    }
}

impl DiscretePotential {
    /// On a torus the closure only ever sees canonical representatives, so
    /// the resulting potential is periodic by construction.
    pub fn new<F>(dim: usize, domain: Domain, energy: F) -> Self
    where
        F: Fn(&[i64]) -> f64 + Send + Sync + 'static,
    {
        assert!(dim > 0, "dimension must be positive");
        if let Domain::Torus(n) = domain {
            assert!(n > 0, "torus side must be positive");
        }
        Self { dim, domain, energy: Arc::new(energy), factors: None }
    }

    pub fn zero(dim: usize, domain: Domain) -> Self {
        Self::new(dim, domain, |_| 0.0)
    }

    /// Separable potential `U(x) = sum_i u(x_i)` whose factor terms are the
    /// per-coordinate increments.
    pub fn separable<F>(dim: usize, domain: Domain, profile: F) -> Self
    where
        F: Fn(i64) -> f64 + Send + Sync + 'static,
    {
        let profile = Arc::new(profile);
        let parts: Vec<EnergyFn> = (0..dim)
            .map(|i| {
                let p = Arc::clone(&profile);
                Arc::new(move |x: &[i64]| p(x[i])) as EnergyFn
            })
            .collect();
        Self::from_parts(dim, domain, parts)
    }

    /// `U = sum_j part_j`, factored as `f_j(x, s e_i) = part_j(x + s e_i) - part_j(x)`.
    pub fn from_parts(dim: usize, domain: Domain, parts: Vec<EnergyFn>) -> Self {
        assert!(!parts.is_empty(), "at least one part is required");
        let summed = parts.clone();
        let mut pot = Self::new(dim, domain, move |x| summed.iter().map(|p| p(x)).sum());
        let factors = parts
            .into_iter()
            .map(|part| {
                Arc::new(move |x: &[i64], axis: usize, s: i64| {
                    with_wrapped(domain, x, |xw| {
                        let mut y = xw.to_vec();
                        y[axis] = domain.wrap(y[axis] + s);
                        part(&y) - part(xw)
                    })
                }) as FactorFn
            })
            .collect();
        pot.factors = Some(factors);
        pot
    }

    /// Attach caller-supplied factor terms (replacing any existing ones).
    pub fn with_factors(mut self, factors: Vec<FactorFn>) -> Self {
        self.factors = Some(factors);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn factors(&self) -> Option<&[FactorFn]> {
        self.factors.as_deref()
    }

    #[inline]
    pub fn value(&self, x: &[i64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        with_wrapped(self.domain, x, |y| (self.energy)(y))
    }

    /// `U(x + s e_axis) - U(x)`; panics if `axis >= dim`.
    #[inline]
    pub fn delta(&self, x: &[i64], axis: usize, s: i64) -> f64 {
        if x.len() <= STACK_DIM {
            let mut buf = [0i64; STACK_DIM];
            let y = &mut buf[..x.len()];
            y.copy_from_slice(x);
            y[axis] += s;
            self.value(y) - self.value(x)
        } else {
            let mut y = x.to_vec();
            y[axis] += s;
            self.value(&y) - self.value(x)
        }
    }

    /// Checked form of [`Self::delta`].
    pub fn increment(&self, x: &[i64], axis: usize, s: i64) -> Result<f64> {
        if axis >= self.dim {
            return Err(Error::AxisOutOfRange { axis, dim: self.dim });
        }
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self.delta(x, axis, s))
    }

    /// `c * U`, factor terms scaled alike.
    pub fn scaled(&self, c: f64) -> Self {
        let e = Arc::clone(&self.energy);
        let factors = self.factors.as_ref().map(|fs| {
            fs.iter()
                .map(|f| {
                    let f = Arc::clone(f);
                    Arc::new(move |x: &[i64], i: usize, s: i64| c * f(x, i, s)) as FactorFn
                })
                .collect()
        });
        Self { dim: self.dim, domain: self.domain, energy: Arc::new(move |x| c * e(x)), factors }
    }

    /// Points of the box `[-radius, radius]^d`, or every torus point.
    pub fn box_points(&self, radius: i64) -> Vec<Vec<i64>> {
        let (lo, hi) = match self.domain {
            Domain::Lattice => (-radius, radius),
            Domain::Torus(n) => (-(n / 2), n - n / 2 - 1),
        };
        let side = (hi - lo + 1) as usize;
        let total = side.pow(self.dim as u32);
        (0..total)
            .map(|mut idx| {
                (0..self.dim)
                    .map(|_| {
                        let c = lo + (idx % side) as i64;
                        idx /= side;
                        c
                    })
                    .collect()
            })
            .collect()
    }

    /// Largest deviation from the telescoping identity
    /// `sum_j f_j(x, s e_i) = U(x + s e_i) - U(x)` over a box.
    pub fn factorization_defect(&self, radius: i64) -> Result<f64> {
        let factors = self
            .factors()
            .ok_or_else(|| Error::Config("potential has no factor terms".into()))?;
        let mut worst = 0.0f64;
        for x in self.box_points(radius) {
            for axis in 0..self.dim {
                for s in [-1, 1] {
                    let sum: f64 = factors.iter().map(|f| f(&x, axis, s)).sum();
                    worst = worst.max((sum - self.delta(&x, axis, s)).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Largest deviation from N-periodicity over one period (0 on `Z^d`).
    pub fn periodicity_defect(&self) -> f64 {
        let n = match self.domain {
            Domain::Lattice => return 0.0,
            Domain::Torus(n) => n,
        };
        let mut worst = 0.0f64;
        for x in self.box_points(0) {
            for axis in 0..self.dim {
                let mut y = x.clone();
                y[axis] += n;
                worst = worst.max((self.value(&y) - self.value(&x)).abs());
            }
        }
        worst
    }
}

/// Smooth potential `H` on `R^d`.
pub trait ContinuousPotential: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, y: &[f64]) -> f64;
    fn gradient(&self, y: &[f64], out: &mut [f64]);
    /// Lipschitz constant of the gradient on the Euclidean ball of the given radius.
    fn gradient_lipschitz(&self, radius: f64) -> f64;
}

/// `H(y) = k |y|^2 / 2`.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic {
    pub dim: usize,
    pub stiffness: f64,
}

impl ContinuousPotential for Quadratic {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, y: &[f64]) -> f64 {
        0.5 * self.stiffness * y.iter().map(|v| v * v).sum::<f64>()
    }
    fn gradient(&self, y: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(y) {
            *o = self.stiffness * v;
        }
    }
    fn gradient_lipschitz(&self, _radius: f64) -> f64 {
        self.stiffness.abs()
    }
}

/// `H(y) = sum_i h ((y_i / w)^2 - 1)^2`, wells at `+-w` separated by a barrier `h`.
#[derive(Debug, Clone, Copy)]
pub struct Quartic {
    pub dim: usize,
    pub height: f64,
    pub width: f64,
}

impl ContinuousPotential for Quartic {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, y: &[f64]) -> f64 {
        y.iter()
            .map(|v| {
                let s = v / self.width;
                self.height * (s * s - 1.0).powi(2)
            })
            .sum()
    }
    fn gradient(&self, y: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(y) {
            let s = v / self.width;
            *o = 4.0 * self.height * s * (s * s - 1.0) / self.width;
        }
    }
    fn gradient_lipschitz(&self, radius: f64) -> f64 {
        let s = radius / self.width;
        4.0 * self.height.abs() / (self.width * self.width) * (3.0 * s * s - 1.0).max(1.0)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Flat {
    pub dim: usize,
}

impl ContinuousPotential for Flat {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _y: &[f64]) -> f64 {
        0.0
    }
    fn gradient(&self, _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn gradient_lipschitz(&self, _radius: f64) -> f64 {
        0.0
    }
}

/// Largest relative deviation of the gradient from centered finite differences.
pub fn gradient_defect(h: &dyn ContinuousPotential, y: &[f64], step: f64) -> f64 {
    let d = h.dim();
    let mut g = vec![0.0; d];
    h.gradient(y, &mut g);
    let mut p = y.to_vec();
    let mut worst = 0.0f64;
    for i in 0..d {
        p[i] = y[i] + step;
        let up = h.value(&p);
        p[i] = y[i] - step;
        let down = h.value(&p);
        p[i] = y[i];
        let fd = (up - down) / (2.0 * step);
        worst = worst.max((fd - g[i]).abs() / (1.0 + g[i].abs()));
    }
    worst
}

/// Named potential family, as written in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PotentialSpec {
    /// `U = 0`.
    Flat,
    /// `k/2 * sum x_i^2`.
    Quadratic { stiffness: f64 },
    /// `k * sum |x_i|`.
    Abs { slope: f64 },
    /// Per coordinate: a central well at 0, barriers of height `left` at
    /// `-width` and `right` at `+width`, outer wells at `+-2 width`, then
    /// quadratic growth. With `t = |k| / width` and `h` the barrier on that
    /// side, the profile is `h t (2 - t)` for `t <= 2` and `h (t - 2)^2` after.
    DoubleWell { left: f64, right: f64, width: f64 },
    /// `h ((x/w)^2 - 1)^2` per coordinate.
    Quartic { height: f64, width: f64 },
    /// Periodic Lennard-Jones particle system; parameters come from the run configuration.
    LennardJones,
}

fn parse_params(name: &str, raw: Option<&str>, expected: usize) -> Result<Vec<f64>> {
    let list: Vec<&str> = match raw {
        None => Vec::new(),
        Some(r) => r.split(',').map(str::trim).collect(),
    };
    if list.len() != expected {
        return Err(Error::Config(format!(
            "potential '{name}' takes {expected} parameter(s), got {}",
            list.len()
        )));
    }
    list.iter()
        .map(|p| {
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Config(format!("potential '{name}': bad number '{p}'")))
        })
        .collect()
}

impl FromStr for PotentialSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, raw) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p)),
            None => (s, None),
        };
        let optional = |default: f64| -> Result<f64> {
            match raw {
                None => Ok(default),
                Some(_) => Ok(parse_params(name, raw, 1)?[0]),
            }
        };
        let spec = match name {
            "flat" | "zero" => {
                parse_params(name, raw, 0)?;
                PotentialSpec::Flat
            }
            "quadratic" => PotentialSpec::Quadratic { stiffness: optional(1.0)? },
            "abs" => PotentialSpec::Abs { slope: optional(1.0)? },
            "doublewell" => {
                let p = parse_params(name, raw, 3)?;
                if p[2] <= 0.0 {
                    return Err(Error::Config("doublewell width must be positive".into()));
                }
                PotentialSpec::DoubleWell { left: p[0], right: p[1], width: p[2] }
            }
            "quartic" => {
                let p = parse_params(name, raw, 2)?;
                if p[1] <= 0.0 {
                    return Err(Error::Config("quartic width must be positive".into()));
                }
                PotentialSpec::Quartic { height: p[0], width: p[1] }
            }
            "lj" => {
                parse_params(name, raw, 0)?;
                PotentialSpec::LennardJones
            }
            other => return Err(Error::Config(format!("unknown potential '{other}'"))),
        };
        Ok(spec)
    }
}

/// Fuzz-friendly entry point for the potential-name grammar.
pub fn parse_potential_spec(s: &str) -> Result<PotentialSpec> {
    s.parse()
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PotentialSpec::Flat => write!(f, "flat"),
            PotentialSpec::Quadratic { stiffness } => write!(f, "quadratic:{stiffness}"),
            PotentialSpec::Abs { slope } => write!(f, "abs:{slope}"),
            PotentialSpec::DoubleWell { left, right, width } => {
                write!(f, "doublewell:{left},{right},{width}")
            }
            PotentialSpec::Quartic { height, width } => write!(f, "quartic:{height},{width}"),
            PotentialSpec::LennardJones => write!(f, "lj"),
        }
    }
}

pub fn double_well_profile(k: f64, left: f64, right: f64, width: f64) -> f64 {
    let h = if k < 0.0 { left } else { right };
    let t = k.abs() / width;
    if t <= 2.0 {
        h * t * (2.0 - t)
    } else {
        h * (t - 2.0).powi(2)
    }
}

impl PotentialSpec {
    /// One-coordinate profile, if the family is separable.
    pub fn profile(&self) -> Result<Arc<dyn Fn(f64) -> f64 + Send + Sync>> {
        Ok(match *self {
            PotentialSpec::Flat => Arc::new(|_| 0.0),
            PotentialSpec::Quadratic { stiffness } => Arc::new(move |k| 0.5 * stiffness * k * k),
            PotentialSpec::Abs { slope } => Arc::new(move |k: f64| slope * k.abs()),
            PotentialSpec::DoubleWell { left, right, width } => {
                Arc::new(move |k| double_well_profile(k, left, right, width))
            }
            PotentialSpec::Quartic { height, width } => Arc::new(move |k: f64| {
                let s = k / width;
                height * (s * s - 1.0).powi(2)
            }),
            PotentialSpec::LennardJones => {
                return Err(Error::Config("lj is a particle system, not a lattice profile".into()))
            }
        })
    }

    /// Separable lattice potential with per-coordinate factor terms.
    pub fn discrete(&self, dim: usize, domain: Domain) -> Result<DiscretePotential> {
        let p = self.profile()?;
        Ok(DiscretePotential::separable(dim, domain, move |k| p(k as f64)))
    }

    pub fn continuous(&self, dim: usize) -> Result<Arc<dyn ContinuousPotential>> {
        Ok(match *self {
            PotentialSpec::Flat => Arc::new(Flat { dim }),
            PotentialSpec::Quadratic { stiffness } => Arc::new(Quadratic { dim, stiffness }),
            PotentialSpec::Quartic { height, width } => Arc::new(Quartic { dim, height, width }),
            other => {
                return Err(Error::Config(format!("'{other}' has no smooth continuous version")))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increment_examples() {
        let zero = DiscretePotential::zero(3, Domain::Lattice);
        assert_eq!(zero.increment(&[4, -1, 2], 1, -1).unwrap(), 0.0);

        let sq = DiscretePotential::new(1, Domain::Lattice, |x| (x[0] * x[0]) as f64);
        assert_eq!(sq.increment(&[0], 0, 1).unwrap(), 1.0);

        let l1 = DiscretePotential::new(2, Domain::Lattice, |x| (x[0].abs() + x[1].abs()) as f64);
        assert_eq!(l1.increment(&[-3, 5], 1, -1).unwrap(), -1.0);
    }

    #[test]
    fn increment_rejects_bad_axis() {
        let u = DiscretePotential::zero(2, Domain::Lattice);
        assert_eq!(u.increment(&[0, 0], 2, 1), Err(Error::AxisOutOfRange { axis: 2, dim: 2 }));
        assert!(matches!(u.increment(&[0], 0, 1), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn torus_wrapping_is_canonical_and_periodic() {
        let d = Domain::Torus(6);
        assert_eq!(d.wrap(3), -3);
        assert_eq!(d.wrap(-4), 2);
        assert_eq!(d.wrap(2), 2);
        let u = DiscretePotential::new(2, d, |x| (x[0] * 7 + x[1] * x[1]) as f64);
        assert_eq!(u.periodicity_defect(), 0.0);
        assert_eq!(u.delta(&[2, 0], 0, 1), u.value(&[-3, 0]) - u.value(&[2, 0]));
        assert_eq!(Domain::Torus(5).wrap(2), 2);
        assert_eq!(Domain::Torus(5).wrap(3), -2);
    }

    #[test]
    fn separable_factors_telescope() {
        let u = PotentialSpec::DoubleWell { left: 1.0, right: 2.0, width: 3.0 }
            .discrete(2, Domain::Lattice)
            .unwrap();
        assert!(u.factorization_defect(8).unwrap() < 1e-12);
        let t = PotentialSpec::Quadratic { stiffness: 0.7 }.discrete(2, Domain::Torus(8)).unwrap();
        assert!(t.factorization_defect(0).unwrap() < 1e-12);
    }

    #[test]
    fn scaled_scales_value_and_factors() {
        let u = PotentialSpec::Abs { slope: 1.0 }.discrete(1, Domain::Lattice).unwrap().scaled(4.0);
        assert_eq!(u.value(&[-3]), 12.0);
        assert_eq!(u.factors().unwrap()[0](&[2], 0, 1), 4.0);
    }

    #[test]
    fn double_well_shape() {
        let p = |k: f64| double_well_profile(k, 1.5, 2.5, 3.0);
        assert_eq!(p(0.0), 0.0);
        assert!((p(-3.0) - 1.5).abs() < 1e-15);
        assert!((p(3.0) - 2.5).abs() < 1e-15);
        assert!(p(6.0).abs() < 1e-15);
        assert!(p(9.0) > p(8.0));
    }

    #[test]
    fn parse_registry_names() {
        assert_eq!("quadratic".parse::<PotentialSpec>().unwrap(), PotentialSpec::Quadratic { stiffness: 1.0 });
        assert_eq!("abs:2".parse::<PotentialSpec>().unwrap(), PotentialSpec::Abs { slope: 2.0 });
        assert_eq!(
            "doublewell:1.5, 1.5, 3".parse::<PotentialSpec>().unwrap(),
            PotentialSpec::DoubleWell { left: 1.5, right: 1.5, width: 3.0 }
        );
        assert_eq!("lj".parse::<PotentialSpec>().unwrap(), PotentialSpec::LennardJones);
        for bad in ["", "cubic", "doublewell:1,2", "abs:x", "abs:1,2", "quartic:1,0", "lj:3", "abs:inf"] {
            assert!(bad.parse::<PotentialSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn display_round_trips() {
        for s in ["flat", "quadratic:0.5", "abs:1", "doublewell:1.5,2,3", "quartic:1,2", "lj"] {
            let spec: PotentialSpec = s.parse().unwrap();
            assert_eq!(spec.to_string().parse::<PotentialSpec>().unwrap(), spec);
        }
    }

    #[test]
    fn continuous_gradients_match_finite_differences() {
        let q = Quadratic { dim: 3, stiffness: 2.0 };
        let w = Quartic { dim: 2, height: 1.3, width: 0.8 };
        for y in [[0.3, -1.2, 2.0], [1.5, 0.1, -0.7]] {
            assert!(gradient_defect(&q, &y, 1e-5) < 1e-5);
            assert!(gradient_defect(&w, &y[..2], 1e-5) < 1e-5);
        }
        assert!("abs".parse::<PotentialSpec>().unwrap().continuous(1).is_err());
    }
}
