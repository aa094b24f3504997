//! Estimators and exact solvers used to validate the samplers.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-stochastic matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-row entry lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                assert!(c < n, "column {c} out of range");
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_start.push(cols.len());
        }
        Self { n, row_start, cols, vals }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows((0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_start[i]..self.row_start[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).filter(|&(c, _)| c == j).map(|(_, v)| v).sum()
    }

    /// Largest `|sum_j P_ij - 1|`.
    pub fn max_row_defect(&self) -> f64 {
        (0..self.n)
            .map(|i| (self.row(i).map(|(_, v)| v).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `out = pi P`.
    pub fn left_mul(&self, pi: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, &p) in pi.iter().enumerate() {
            if p != 0.0 {
                for (j, v) in self.row(i) {
                    out[j] += p * v;
                }
            }
        }
    }

    /// Largest entry-wise difference to another matrix.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - other.get(i, j)).abs());
            }
            for (j, v) in other.row(i) {
                worst = worst.max((v - self.get(i, j)).abs());
            }
        }
        worst
    }
}

/// `sum_j |(pi P)_j - pi_j|`.
pub fn stationarity_residual(p: &SparseMatrix, pi: &[f64]) -> f64 {
    let mut out = vec![0.0; p.len()];
    p.left_mul(pi, &mut out);
    out.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum()
}

/// Total variation distance between two distributions on the same index set.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryLaw {
    /// Distribution over all states, zero outside the class.
    pub pi: Vec<f64>,
    /// `|| pi P^2 - pi ||_1`.
    pub residual: f64,
    pub iterations: usize,
    /// The two-step chain restricted to the class is not strongly connected,
    /// so the law returned is one of several.
    pub non_unique: bool,
}

pub const STATIONARY_TOLERANCE: f64 = 1e-12;
pub const STATIONARY_MAX_ITER: usize = 100_000;

fn two_step(p: &SparseMatrix, pi: &[f64], tmp: &mut [f64], out: &mut [f64]) {
    p.left_mul(pi, tmp);
    p.left_mul(tmp, out);
}

/// Successors of `i` under `P^2`.
fn two_step_successors(p: &SparseMatrix, i: usize, buf: &mut Vec<usize>) {
    buf.clear();
    for (j, v) in p.row(i) {
        if v > 0.0 {
            buf.extend(p.row(j).filter(|&(_, w)| w > 0.0).map(|(k, _)| k));
        }
    }
}

/// Whether the `P^2` graph restricted to `class` is strongly connected:
/// every state is reachable from the first one and can reach it back.
pub fn class_strongly_connected(p: &SparseMatrix, class: &[usize]) -> bool {
    if class.is_empty() {
        return true;
    }
    let n = p.len();
    let mut member = vec![false; n];
    for &c in class {
        member[c] = true;
    }
    let mut fwd: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut bwd: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut buf = Vec::new();
    for &i in class {
        two_step_successors(p, i, &mut buf);
        buf.sort_unstable();
        buf.dedup();
        for &k in &buf {
            if member[k] {
                fwd[i].push(k);
                bwd[k].push(i);
            }
        }
    }
    let reach = |adj: &Vec<Vec<usize>>| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([class[0]]);
        seen[class[0]] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &k in &adj[i] {
                if !seen[k] {
                    seen[k] = true;
                    count += 1;
                    queue.push_back(k);
                }
            }
        }
        count
    };
    reach(&fwd) == class.len() && reach(&bwd) == class.len()
}

/// Stationary law of `P^2` on a declared class (a set of states closed under
/// `P^2`). Power iteration on the lazy kernel `(I + P^2)/2` from the uniform
/// law on the class, which also handles classes that are periodic under `P^2`.
pub fn exact_stationary(p: &SparseMatrix, class: &[usize]) -> Result<StationaryLaw> {
    let n = p.len();
    if n > 1_000_000 {
        return Err(Error::Size { states: n, limit: 1_000_000 });
    }
    if class.is_empty() {
        return Err(Error::TooSmall("empty class".into()));
    }
    let defect = p.max_row_defect();
    if defect > 1e-12 {
        return Err(Error::Precondition(format!("matrix is not row-stochastic (defect {defect:e})")));
    }
    let non_unique = !class_strongly_connected(p, class);
    let mut pi = vec![0.0; n];
    for &c in class {
        pi[c] = 1.0 / class.len() as f64;
    }
    let mut member = vec![false; n];
    for &c in class {
        member[c] = true;
    }
    let mut tmp = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 0..=STATIONARY_MAX_ITER {
        two_step(p, &pi, &mut tmp, &mut next);
        residual = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        if residual < STATIONARY_TOLERANCE {
            return Ok(StationaryLaw { pi, residual, iterations: it, non_unique });
        }
        let leaked: f64 = next.iter().zip(&member).filter(|(_, &m)| !m).map(|(v, _)| v).sum();
        if leaked > 1e-12 {
            return Err(Error::Precondition("declared class is not closed under P^2".into()));
        }
        for (a, b) in pi.iter_mut().zip(&next) {
            *a = 0.5 * (*a + b);
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|v| *v /= total);
    }
    Err(Error::Numerical { iterations: STATIONARY_MAX_ITER, residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchMeans {
    pub mean: f64,
    /// Batch size times the sample variance of the batch averages, an
    /// estimate of the asymptotic variance of `n^{-1/2} sum (Y_k - mean)`.
    pub sigma2: f64,
    pub batches: usize,
}

/// Default batch count `floor(n^{1/3})`.
pub fn default_batches(n: usize) -> usize {
    ((n as f64).cbrt().floor() as usize).max(1)
}

pub fn batch_means(series: &[f64], batches: usize) -> Result<BatchMeans> {
    let n = series.len();
    if batches < 2 || n < 2 * batches {
        return Err(Error::TooSmall(format!("{n} samples cannot form {batches} batches of size >= 2")));
    }
    let size = n / batches;
    let used = size * batches;
    let avgs: Vec<f64> = series[..used].chunks_exact(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let mean = avgs.iter().sum::<f64>() / batches as f64;
    let var = avgs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(BatchMeans { mean, sigma2: size as f64 * var, batches })
}

/// One-sample Kolmogorov-Smirnov statistic `sup |F_n - F|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::TooSmall("no samples".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (k, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((k as f64 + 1.0) / n - f).max(f - k as f64 / n);
    }
    Ok(d)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::TooSmall("no samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic p-value `P(D > d)` of a KS statistic with effective sample
/// size `n_eff`, using Stephens' finite-sample correction.
pub fn ks_pvalue(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=200 {
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k as f64 * lambda).powi(2)).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// p-value of the two-sample KS test on `a` and `b`.
pub fn ks_two_sample_pvalue(a: &[f64], b: &[f64]) -> Result<f64> {
    let d = ks_two_sample(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    Ok(ks_pvalue(d, na * nb / (na + nb)))
}

/// 1-D Wasserstein-1 distance between empirical laws. Equal sample counts use
/// the sorted L1 pairing; otherwise the integral of `|F_a - F_b|`.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::TooSmall("no samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() == b.len() {
        return Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut x = a[0].min(b[0]);
    let mut w = 0.0;
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => break,
        };
        w += (i as f64 / na - j as f64 / nb).abs() * (next - x);
        x = next;
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
    }
    Ok(w)
}

/// Mean squared displacement of a trajectory of `dim`-vectors stored flat,
/// averaged over all start times, at each requested lag.
pub fn msd(traj: &[f64], dim: usize, lags: &[usize]) -> Result<Vec<(usize, f64)>> {
    let n = traj.len() / dim.max(1);
    if dim == 0 || n == 0 {
        return Err(Error::TooSmall("empty trajectory".into()));
    }
    lags.iter()
        .map(|&lag| {
            if lag >= n {
                return Err(Error::TooSmall(format!("lag {lag} exceeds trajectory length {n}")));
            }
            let count = n - lag;
            let total: f64 = (0..count)
                .map(|t| {
                    (0..dim).map(|k| (traj[(t + lag) * dim + k] - traj[t * dim + k]).powi(2)).sum::<f64>()
                })
                .sum();
            Ok((lag, total / count as f64))
        })
        .collect()
}

/// Least-squares slope and intercept.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return Err(Error::TooSmall("need at least two paired points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Precondition("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return Err(Error::Domain("log-log fit needs positive coordinates".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    Ok(linear_fit(&xs, &ys)?.0)
}

/// `(v1 - v2) / (v2 - v3)` for values at step sizes `h, h/2, h/4`; close to 4
/// for a second-order error and 2 for a first-order one.
pub fn richardson_ratio(v1: f64, v2: f64, v3: f64) -> Result<f64> {
    let den = v2 - v3;
    if den == 0.0 {
        return Err(Error::Domain("consecutive values coincide".into()));
    }
    Ok((v1 - v2) / den)
}

/// Sample autocorrelation at `lag`.
pub fn autocorrelation(series: &[f64], lag: usize) -> Result<f64> {
    let n = series.len();
    if lag >= n || n < 2 {
        return Err(Error::TooSmall(format!("lag {lag} with {n} samples")));
    }
    let m = series.iter().sum::<f64>() / n as f64;
    let var: f64 = series.iter().map(|x| (x - m).powi(2)).sum();
    if var == 0.0 {
        return Ok(0.0);
    }
    let cov: f64 = (0..n - lag).map(|t| (series[t] - m) * (series[t + lag] - m)).sum();
    Ok(cov / var)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len().max(2) - 1) as f64
}

/// Summary of a scalar series for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub n: usize,
    pub mean: f64,
    pub batch_means_variance: f64,
    pub batches: usize,
    pub msd_curve: Vec<(usize, f64)>,
    pub seed: u64,
    pub config_hash: String,
}

impl SeriesSummary {
    pub fn new(series: &[f64], lags: &[usize], seed: u64, config_hash: impl Into<String>) -> Result<Self> {
        let bm = batch_means(series, default_batches(series.len()).max(2))?;
        let mut lags_with_zero = vec![0];
        lags_with_zero.extend(lags.iter().copied().filter(|&l| l > 0));
        Ok(Self {
            n: series.len(),
            mean: bm.mean,
            batch_means_variance: bm.sigma2,
            batches: bm.batches,
            msd_curve: msd(series, 1, &lags_with_zero)?,
            seed,
            config_hash: config_hash.into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{keyed_rng, open_uniform, std_normal};

    #[test]
    fn identity_is_flagged_non_unique() {
        let p = SparseMatrix::identity(4);
        let law = exact_stationary(&p, &[0, 2, 3]).unwrap();
        assert!(law.non_unique);
        for k in [0, 2, 3] {
            assert!((law.pi[k] - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(law.pi[1], 0.0);
    }

    #[test]
    fn swap_matrix_gives_point_masses() {
        let p = SparseMatrix::from_rows(vec![vec![(1, 1.0)], vec![(0, 1.0)]]);
        for c in 0..2 {
            let law = exact_stationary(&p, &[c]).unwrap();
            assert_eq!(law.pi[c], 1.0);
            assert!(!law.non_unique);
        }
    }

    #[test]
    fn stationary_of_a_small_chain() {
        // Birth-death chain with known reversible law.
        let p = SparseMatrix::from_rows(vec![
            vec![(0, 0.5), (1, 0.5)],
            vec![(0, 0.25), (1, 0.25), (2, 0.5)],
            vec![(1, 0.5), (2, 0.5)],
        ]);
        let law = exact_stationary(&p, &[0, 1, 2]).unwrap();
        let want = [0.2, 0.4, 0.4];
        for (got, want) in law.pi.iter().zip(want) {
            assert!((got - want).abs() < 1e-11);
        }
        assert!(stationarity_residual(&p, &law.pi) < 1e-11);
    }

    #[test]
    fn stationary_rejects_bad_inputs() {
        let bad = SparseMatrix::from_rows(vec![vec![(0, 0.7)]]);
        assert!(exact_stationary(&bad, &[0]).is_err());
        let p = SparseMatrix::from_rows(vec![vec![(1, 1.0)], vec![(1, 1.0)]]);
        assert!(exact_stationary(&p, &[0]).is_err());
        assert!(exact_stationary(&p, &[]).is_err());
    }

    #[test]
    fn duplicate_columns_are_summed() {
        let p = SparseMatrix::from_rows(vec![vec![(0, 0.25), (0, 0.25), (1, 0.5)], vec![(1, 1.0)]]);
        assert_eq!(p.get(0, 0), 0.5);
        assert_eq!(p.max_row_defect(), 0.0);
    }

    #[test]
    fn batch_means_cases() {
        let c = batch_means(&vec![3.0; 1000], 10).unwrap();
        assert_eq!((c.mean, c.sigma2), (3.0, 0.0));
        assert!(batch_means(&[1.0; 10], 6).is_err());
        let mut rng = keyed_rng(21, 0, 0, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| std_normal(&mut rng)).collect();
        let b = batch_means(&xs, 100).unwrap();
        assert!((b.sigma2 - 1.0).abs() < 0.1, "{}", b.sigma2);
        assert_eq!(default_batches(1_000_000), 100);
    }

    #[test]
    fn ks_self_consistency() {
        let mut rng = keyed_rng(22, 0, 0, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| open_uniform(&mut rng)).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d < 1.95 / (n as f64).sqrt(), "{d}");
        assert!(ks_statistic(&[], |x| x).is_err());
        assert_eq!(ks_statistic(&[0.5], |_| 0.5).unwrap(), 0.5);
    }

    #[test]
    fn ks_pvalue_reference_points() {
        // Kolmogorov distribution: P(K > 1.358) ~ 0.05, P(K > 1.628) ~ 0.01.
        assert!((ks_pvalue(1.358 / 1e4, 1e8) - 0.05).abs() < 1e-3);
        assert!((ks_pvalue(1.628 / 1e4, 1e8) - 0.01).abs() < 5e-4);
        assert_eq!(ks_pvalue(0.0, 100.0), 1.0);
    }

    #[test]
    fn ks_two_sample_basics() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!((ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[3.5]).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn wasserstein_cases() {
        let a = [0.3, -1.0, 2.0];
        assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);
        let shifted: Vec<f64> = a.iter().map(|x| x + 0.5).collect();
        assert!((wasserstein1(&a, &shifted).unwrap() - 0.5).abs() < 1e-15);
        // Unequal counts: point mass at 0 vs uniform pair {0, 1}.
        assert!((wasserstein1(&[0.0], &[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((wasserstein1(&[0.0, 1.0], &[0.0]).unwrap() - 0.5).abs() < 1e-15);
        // Both code paths agree when the second set is a duplicated copy.
        let b = [0.1, 0.9, 2.5];
        let b2 = [0.1, 0.1, 0.9, 0.9, 2.5, 2.5];
        assert!((wasserstein1(&a, &b).unwrap() - wasserstein1(&a, &b2).unwrap()).abs() < 1e-12);
        assert!(wasserstein1(&[], &b).is_err());
    }

    #[test]
    fn msd_and_slopes() {
        let line: Vec<f64> = (0..100).map(|k| 2.0 * k as f64).collect();
        let curve = msd(&line, 1, &[0, 1, 5]).unwrap();
        assert_eq!(curve, vec![(0, 0.0), (1, 4.0), (5, 100.0)]);
        let pts: Vec<(f64, f64)> = curve[1..].iter().map(|&(l, m)| (l as f64, m)).collect();
        assert!((loglog_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert!(msd(&line, 1, &[100]).is_err());
        assert!(loglog_slope(&[(0.0, 1.0), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn richardson_of_second_order_sequence() {
        let v = |h: f64| 1.5 + 0.7 * h * h;
        assert!((richardson_ratio(v(0.2), v(0.1), v(0.05)).unwrap() - 4.0).abs() < 1e-9);
        assert!(richardson_ratio(1.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn autocorrelation_of_alternating_series() {
        let s: Vec<f64> = (0..1000).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!((autocorrelation(&s, 1).unwrap() + 1.0).abs() < 1e-2);
        assert!((autocorrelation(&s, 2).unwrap() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn series_summary_shape() {
        let s: Vec<f64> = (0..1000).map(|k| (k % 7) as f64).collect();
        let sum = SeriesSummary::new(&s, &[1, 4], 9, "abc").unwrap();
        assert_eq!(sum.msd_curve[0], (0, 0.0));
        assert!(sum.batch_means_variance >= 0.0);
        assert_eq!(sum.n, 1000);
    }
}
