//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment. Each subcommand declares a
//! schema of typed keys; command-line flags are applied as overrides through
//! the same schema so both sources produce identical diagnostics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subcommand {
    Escape,
    Zzd,
    ValidateInvariance,
    Scaling,
    Hybrid,
    Validate,
}

impl Subcommand {
    pub const ALL: [Subcommand; 6] = [
        Subcommand::Escape,
        Subcommand::Zzd,
        Subcommand::ValidateInvariance,
        Subcommand::Scaling,
        Subcommand::Hybrid,
        Subcommand::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Escape => "escape",
            Subcommand::Zzd => "zzd",
            Subcommand::ValidateInvariance => "validate-invariance",
            Subcommand::Scaling => "scaling",
            Subcommand::Hybrid => "hybrid",
            Subcommand::Validate => "validate",
        }
    }

    pub fn schema(self) -> &'static [KeySpec] {
        match self {
            Subcommand::Escape => ESCAPE,
            Subcommand::Zzd => ZZD,
            Subcommand::ValidateInvariance => INVARIANCE,
            Subcommand::Scaling => SCALING,
            Subcommand::Hybrid => HYBRID,
            Subcommand::Validate => VALIDATE,
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Subcommand::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown subcommand '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Int,
    UInt,
    Real,
    Bool,
    Str,
    /// Comma-separated reals.
    RealList,
}

impl Kind {
    fn describe(self) -> &'static str {
        match self {
            Kind::Int => "integer",
            Kind::UInt => "non-negative integer",
            Kind::Real => "real number",
            Kind::Bool => "boolean",
            Kind::Str => "string",
            Kind::RealList => "comma-separated list of reals",
        }
    }

    fn parse(self, raw: &str) -> Option<Value> {
        let raw = raw.trim();
        let real = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
        match self {
            Kind::Int => raw.parse().ok().map(Value::Int),
            Kind::UInt => raw.parse().ok().map(Value::UInt),
            Kind::Real => real(raw).map(Value::Real),
            Kind::Bool => match raw {
                "true" | "yes" | "1" | "on" => Some(Value::Bool(true)),
                "false" | "no" | "0" | "off" => Some(Value::Bool(false)),
                _ => None,
            },
            Kind::Str => (!raw.is_empty()).then(|| Value::Str(raw.to_owned())),
            Kind::RealList => {
                if raw.is_empty() {
                    return None;
                }
                raw.split(',').map(real).collect::<Option<Vec<_>>>().map(Value::RealList)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    UInt(u64),
    Real(f64),
    Bool(bool),
    Str(String),
    RealList(Vec<f64>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::UInt(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v:?}"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Str(v) => f.write_str(v),
            Value::RealList(v) => {
                let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Presence {
    Required,
    Optional,
    Default(&'static str),
}

#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub name: &'static str,
    pub kind: Kind,
    pub presence: Presence,
    pub help: &'static str,
}

const fn key(name: &'static str, kind: Kind, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec { name, kind, presence: Presence::Default(default), help }
}

const fn optional(name: &'static str, kind: Kind, help: &'static str) -> KeySpec {
    KeySpec { name, kind, presence: Presence::Optional, help }
}

const SEED: KeySpec = key("seed", Kind::UInt, "0", "master seed");
const THREADS: KeySpec = optional("threads", Kind::UInt, "worker threads (KINETIC_THREADS wins)");

macro_rules! schema {
    ($name:ident, $prefix:literal, [$($k:expr),* $(,)?]) => {
        const $name: &[KeySpec] = &[
            SEED,
            THREADS,
            key("out_prefix", Kind::Str, $prefix, "output path prefix"),
            $($k),*
        ];
    };
}

schema!(ESCAPE, "escape", [
    key("potential", Kind::Str, "doublewell:1.5,1.5,3", "lattice potential"),
    key("a", Kind::Int, "-3", "left exit point"),
    key("b", Kind::Int, "3", "right exit point"),
    key("alpha", Kind::Int, "0", "left end of the zero set"),
    key("beta", Kind::Int, "0", "right end of the zero set"),
    key("eps", Kind::RealList, "1,0.5,0.25", "temperatures"),
    key("samples", Kind::UInt, "10000", "escape samples per temperature"),
    key("step_cap", Kind::UInt, "10000000000", "steps allowed per sample"),
]);

schema!(ZZD, "zzd", [
    key("dim", Kind::UInt, "2", "lattice dimension"),
    key("potential", Kind::Str, "quadratic", "lattice potential"),
    optional("torus", Kind::UInt, "torus side (omit for the full lattice)"),
    key("steps", Kind::UInt, "1000", "sweeps per chain"),
    key("chains", Kind::UInt, "1", "independent chains"),
    key("every", Kind::UInt, "1", "record every n-th sweep"),
    key("factorized", Kind::Bool, "false", "use factorized acceptance"),
    key("order", Kind::Str, "id", "sweep order: id or random"),
]);

schema!(INVARIANCE, "validate-invariance", [
    key("dim", Kind::UInt, "1", "lattice dimension"),
    key("potential", Kind::Str, "doublewell:1.5,1.5,3", "lattice potential"),
    key("torus", Kind::UInt, "16", "torus side"),
    key("factorized", Kind::Bool, "false", "use factorized acceptance"),
    key("order", Kind::Str, "id", "sweep order: id or random"),
    key("tolerance", Kind::Real, "1e-12", "largest accepted L1 residual"),
]);

schema!(SCALING, "scaling", [
    key("H", Kind::Str, "quadratic", "smooth potential"),
    key("dim", Kind::UInt, "1", "dimension"),
    key("eps", Kind::RealList, "0.125,0.0625,0.03125,0.015625", "lattice spacings"),
    key("t", Kind::Real, "2", "observation time"),
    key("samples", Kind::UInt, "20000", "samples per spacing"),
    key("coupling", Kind::Str, "independent", "independent or shared"),
]);

schema!(HYBRID, "hybrid", [
    key("M", Kind::UInt, "32", "particle count"),
    key("a", Kind::Real, "5.43", "box side"),
    key("r", Kind::Real, "1", "length scale"),
    key("U0", Kind::Real, "0.5", "energy scale"),
    key("R", Kind::Real, "2.5", "split radius"),
    key("delta", Kind::Real, "0.005", "time step"),
    key("gamma", Kind::Real, "1", "friction"),
    key("lambda", Kind::Real, "0", "refreshment rate"),
    key("steps", Kind::UInt, "10000", "time steps"),
    key("split", Kind::Str, "pairwise", "full-drift, pairwise or per-particle"),
    key("ou_mode", Kind::Str, "exact", "exact or half-variance"),
    key("jump", Kind::Str, "thinned", "naive or thinned"),
    optional("xyz_in", Kind::Str, "initial configuration file"),
    key("traj_every", Kind::UInt, "100", "trajectory subsampling stride"),
    key("block", Kind::UInt, "1000", "steps per statistics block"),
]);

schema!(VALIDATE, "validate", []);

/// Where a value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    CommandLine,
    Default,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::CommandLine => f.write_str("command line"),
            Origin::Default => f.write_str("default"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}: expected `key = value`, got '{text}'")]
    Syntax { origin: Origin, text: String },
    #[error("{origin}: unknown key '{key}'")]
    UnknownKey { origin: Origin, key: String },
    #[error("{origin}: key '{key}' expects a {expected}, got '{raw}'")]
    TypeMismatch { origin: Origin, key: String, expected: &'static str, raw: String },
    #[error("{origin}: key '{key}' already set on line {first}")]
    Duplicate { origin: Origin, key: String, first: usize },
    #[error("missing required key '{key}'")]
    Missing { key: String },
}

impl ConfigError {
    /// Config-file line the error refers to, if any.
    pub fn line(&self) -> Option<usize> {
        let origin = match self {
            ConfigError::Syntax { origin, .. }
            | ConfigError::UnknownKey { origin, .. }
            | ConfigError::TypeMismatch { origin, .. }
            | ConfigError::Duplicate { origin, .. } => *origin,
            ConfigError::Missing { .. } => return None,
        };
        match origin {
            Origin::Line(n) => Some(n),
            _ => None,
        }
    }
}

/// Every problem found in one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub values: BTreeMap<String, Value>,
    pub seed: u64,
    /// The seed was not given explicitly.
    pub seed_defaulted: bool,
    /// Keys set by the config text or the command line.
    pub explicit: BTreeSet<String>,
    pub out_prefix: String,
    pub threads: Option<usize>,
}

impl RunConfig {
    fn value(&self, key: &str) -> Option<&Value> {
        self.values.get(key)
    }

    fn expect(&self, key: &str) -> &Value {
        self.value(key).unwrap_or_else(|| panic!("key '{key}' is not in the {} schema", self.subcommand))
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    pub fn int(&self, key: &str) -> i64 {
        match self.expect(key) {
            Value::Int(v) => *v,
            other => panic!("key '{key}' is {other:?}, not an integer"),
        }
    }

    pub fn uint(&self, key: &str) -> u64 {
        self.opt_uint(key).unwrap_or_else(|| panic!("key '{key}' has no value"))
    }

    pub fn opt_uint(&self, key: &str) -> Option<u64> {
        match self.value(key)? {
            Value::UInt(v) => Some(*v),
            other => panic!("key '{key}' is {other:?}, not an unsigned integer"),
        }
    }

    pub fn real(&self, key: &str) -> f64 {
        match self.expect(key) {
            Value::Real(v) => *v,
            other => panic!("key '{key}' is {other:?}, not a real"),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        match self.expect(key) {
            Value::Bool(v) => *v,
            other => panic!("key '{key}' is {other:?}, not a boolean"),
        }
    }

    pub fn string(&self, key: &str) -> &str {
        self.opt_string(key).unwrap_or_else(|| panic!("key '{key}' has no value"))
    }

    pub fn opt_string(&self, key: &str) -> Option<&str> {
        match self.value(key)? {
            Value::Str(v) => Some(v),
            other => panic!("key '{key}' is {other:?}, not a string"),
        }
    }

    pub fn reals(&self, key: &str) -> &[f64] {
        match self.expect(key) {
            Value::RealList(v) => v,
            other => panic!("key '{key}' is {other:?}, not a list"),
        }
    }

    /// Canonical text: subcommand then sorted `key=value` lines. Thread count
    /// is excluded because it never affects results.
    pub fn canonical(&self) -> String {
        let mut s = format!("subcommand={}\n", self.subcommand);
        for (k, v) in &self.values {
            if k != "threads" {
                s.push_str(&format!("{k}={v}\n"));
            }
        }
        s
    }

    /// SHA-256 of the canonical text, lowercase hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A raw assignment before typing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub origin: Origin,
    pub key: String,
    pub raw: String,
}

/// Splits config text into assignments, collecting syntax errors.
pub fn tokenize(text: &str) -> (Vec<Assignment>, Vec<ConfigError>) {
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let origin = Origin::Line(k + 1);
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        match body.split_once('=') {
            Some((key, raw)) if !key.trim().is_empty() => {
                out.push(Assignment { origin, key: key.trim().to_owned(), raw: raw.trim().to_owned() })
            }
            _ => errors.push(ConfigError::Syntax { origin, text: body.to_owned() }),
        }
    }
    (out, errors)
}

/// Parses config text for `subcommand`.
pub fn parse_config(subcommand: Subcommand, text: &str) -> Result<RunConfig, ConfigErrors> {
    parse_with_overrides(subcommand, text, &[])
}

/// Parses config text, then applies command-line `(key, value)` overrides.
pub fn parse_with_overrides(
    subcommand: Subcommand,
    text: &str,
    overrides: &[(String, String)],
) -> Result<RunConfig, ConfigErrors> {
    let (mut assignments, mut errors) = tokenize(text);
    assignments.extend(overrides.iter().map(|(k, v)| Assignment {
        origin: Origin::CommandLine,
        key: k.clone(),
        raw: v.clone(),
    }));
    let schema = subcommand.schema();
    let mut values: BTreeMap<String, Value> = BTreeMap::new();
    let mut first_line: BTreeMap<String, usize> = BTreeMap::new();
    let mut explicit = BTreeSet::new();
    for a in &assignments {
        let Some(spec) = schema.iter().find(|s| s.name == a.key) else {
            errors.push(ConfigError::UnknownKey { origin: a.origin, key: a.key.clone() });
            continue;
        };
        if let Origin::Line(n) = a.origin {
            if let Some(&first) = first_line.get(&a.key) {
                errors.push(ConfigError::Duplicate { origin: a.origin, key: a.key.clone(), first });
                continue;
            }
            first_line.insert(a.key.clone(), n);
        }
        match spec.kind.parse(&a.raw) {
            Some(v) => {
                explicit.insert(a.key.clone());
                values.insert(a.key.clone(), v);
            }
            None => errors.push(ConfigError::TypeMismatch {
                origin: a.origin,
                key: a.key.clone(),
                expected: spec.kind.describe(),
                raw: a.raw.clone(),
            }),
        }
    }
    for spec in schema {
        if values.contains_key(spec.name) || errors.iter().any(|e| mentions(e, spec.name)) {
            continue;
        }
        match spec.presence {
            Presence::Default(raw) => {
                let v = spec.kind.parse(raw).unwrap_or_else(|| panic!("bad built-in default for '{}'", spec.name));
                values.insert(spec.name.to_owned(), v);
            }
            Presence::Required => errors.push(ConfigError::Missing { key: spec.name.to_owned() }),
            Presence::Optional => {}
        }
    }
    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    let seed = match values.get("seed") {
        Some(Value::UInt(s)) => *s,
        _ => 0,
    };
    let out_prefix = match values.get("out_prefix") {
        Some(Value::Str(s)) => s.clone(),
        _ => subcommand.name().to_owned(),
    };
    let threads = match values.get("threads") {
        Some(Value::UInt(t)) => Some(*t as usize),
        _ => None,
    };
    let seed_defaulted = !explicit.contains("seed");
    Ok(RunConfig { subcommand, values, seed, seed_defaulted, explicit, out_prefix, threads })
}

fn mentions(e: &ConfigError, key: &str) -> bool {
    matches!(e, ConfigError::TypeMismatch { key: k, .. } if k == key)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_validate_config_defaults_the_seed() {
        let cfg = parse_config(Subcommand::Validate, "").unwrap();
        assert_eq!(cfg.seed, 0);
        assert!(cfg.seed_defaulted);
        assert_eq!(cfg.out_prefix, "validate");
    }

    #[test]
    fn hybrid_partial_config_fills_defaults() {
        let cfg = parse_config(Subcommand::Hybrid, "delta=0.01\ngamma=1.0\nsteps=1000").unwrap();
        assert_eq!(cfg.real("delta"), 0.01);
        assert_eq!(cfg.uint("steps"), 1000);
        assert_eq!(cfg.uint("M"), 32);
        assert_eq!(cfg.opt_string("xyz_in"), None);
    }

    #[test]
    fn type_mismatch_names_the_line() {
        let errs = parse_config(Subcommand::Hybrid, "delta=abc").unwrap_err();
        assert_eq!(errs.0.len(), 1);
        assert_eq!(errs.0[0].line(), Some(1));
        assert!(errs.to_string().contains("line 1"));
    }

    #[test]
    fn all_errors_are_collected() {
        let text = "# header\nbogus = 1\ndelta = x\n\nsteps 5\ndelta = 0.1\n";
        let errs = parse_config(Subcommand::Hybrid, text).unwrap_err();
        let lines: Vec<_> = errs.0.iter().map(ConfigError::line).collect();
        assert_eq!(lines, vec![Some(5), Some(2), Some(3), Some(6)]);
    }

    #[test]
    fn overrides_win_and_comments_are_ignored() {
        let over = vec![("seed".to_owned(), "7".to_owned())];
        let cfg = parse_with_overrides(Subcommand::Escape, "seed = 3 # old\n", &over).unwrap();
        assert_eq!(cfg.seed, 7);
        assert!(!cfg.seed_defaulted);
        assert_eq!(cfg.reals("eps"), &[1.0, 0.5, 0.25]);
    }

    #[test]
    fn hash_ignores_thread_count_and_source_layout() {
        let a = parse_config(Subcommand::Zzd, "dim=3\nthreads=4").unwrap();
        let b = parse_config(Subcommand::Zzd, "# x\n  dim = 3  ").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = parse_config(Subcommand::Zzd, "dim=4").unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn every_default_parses() {
        for sub in Subcommand::ALL {
            parse_config(sub, "").unwrap_or_else(|e| panic!("{sub}: {e}"));
        }
    }
}
