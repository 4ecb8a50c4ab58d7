//! Correlation matrices, pairwise significance, eigenvalue spectra and the
//! Marchenko-Pastur null.
//!
//! For ternary rows the product-moment correlation is computed from exact
//! integer sums, so `rho` is exactly symmetric and its diagonal exactly one.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::ingest::SampleKey;
use crate::linalg::{eigenvalues_sym, Matrix};
use crate::strategy::StrategyMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    pub key: SampleKey,
    pub codes: Vec<String>,
    pub rho: Matrix,
    pub tail_prob: Matrix,
    pub excluded_constant_rows: Vec<String>,
    /// Series length the correlations were computed over.
    pub t: usize,
    /// Sample standard deviation (n - 1) of each retained raw row.
    pub row_std: Vec<f64>,
}

impl CorrelationResult {
    pub fn n(&self) -> usize {
        self.codes.len()
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.codes.iter().position(|c| c == code)
    }

    /// Rows and columns reordered so that `order[k]` becomes position `k`.
    pub fn reordered(&self, order: &[usize]) -> CorrelationResult {
        CorrelationResult {
            key: self.key.clone(),
            codes: order.iter().map(|&i| self.codes[i].clone()).collect(),
            rho: self.rho.permuted(order),
            tail_prob: self.tail_prob.permuted(order),
            excluded_constant_rows: self.excluded_constant_rows.clone(),
            t: self.t,
            row_std: order.iter().map(|&i| self.row_std[i]).collect(),
        }
    }

    /// Square table with the codes as header row and first column.
    pub fn write_matrix<W: Write>(&self, w: W, which: MatrixKind) -> Result<()> {
        let m = match which {
            MatrixKind::Rho => &self.rho,
            MatrixKind::TailProb => &self.tail_prob,
        };
        let mut wtr = csv::Writer::from_writer(w);
        let mut head = vec!["institution".to_string()];
        head.extend(self.codes.iter().cloned());
        wtr.write_record(&head)?;
        for (i, code) in self.codes.iter().enumerate() {
            let mut rec = vec![code.clone()];
            rec.extend(m.row(i).iter().map(|v| format!("{v:.12}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Rho,
    TailProb,
}

/// Pearson correlations of ternary rows from cached integer moments.
///
/// Row sums and sums of squares are invariant under any permutation of a
/// row, so the bootstrap builds one of these per month and only recomputes
/// cross products per replicate.
#[derive(Debug, Clone)]
pub struct TernaryCorrelator {
    t: usize,
    sum: Vec<i64>,
    /// `T * sum(x^2) - sum(x)^2`, strictly positive for every cached row.
    centered_ss: Vec<i64>,
}

impl TernaryCorrelator {
    pub fn new<'a>(rows: impl IntoIterator<Item = &'a [i8]>, t: usize) -> Self {
        let mut sum = Vec::new();
        let mut centered_ss = Vec::new();
        for r in rows {
            let s: i64 = r.iter().map(|&v| v as i64).sum();
            let ss: i64 = r.iter().map(|&v| (v as i64) * (v as i64)).sum();
            sum.push(s);
            centered_ss.push(t as i64 * ss - s * s);
        }
        Self {
            t,
            sum,
            centered_ss,
        }
    }

    pub fn has_constant_row(&self) -> bool {
        self.centered_ss.iter().any(|&v| v == 0)
    }

    /// Correlation matrix of `values` (row-major, rows in cache order).
    pub fn matrix(&self, values: &[i8]) -> Matrix {
        let n = self.sum.len();
        let t = self.t;
        debug_assert_eq!(values.len(), n * t);
        let mut m = Matrix::identity(n);
        for i in 0..n {
            let ri = &values[i * t..(i + 1) * t];
            for j in (i + 1)..n {
                let rj = &values[j * t..(j + 1) * t];
                let dot: i32 = ri
                    .iter()
                    .zip(rj)
                    .map(|(&a, &b)| (a as i32) * (b as i32))
                    .sum();
                let num = t as i64 * dot as i64 - self.sum[i] * self.sum[j];
                let den = ((self.centered_ss[i] as f64) * (self.centered_ss[j] as f64)).sqrt();
                let r = (num as f64 / den).clamp(-1.0, 1.0);
                m.set(i, j, r);
                m.set(j, i, r);
            }
        }
        m
    }
}

fn sample_std(row: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = row.clone().count() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mean = row.clone().sum::<f64>() / n;
    (row.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn tail_matrix(rho: &Matrix, t: usize) -> Result<Matrix> {
    let n = rho.n();
    let mut p = Matrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = tail_probability(rho.get(i, j), t)?;
            p.set(i, j, v);
            p.set(j, i, v);
        }
    }
    Ok(p)
}

/// Correlations among the rows of a strategy matrix. Constant rows are
/// dropped first and listed in `excluded_constant_rows`.
pub fn correlate(m: &StrategyMatrix) -> Result<CorrelationResult> {
    let t = m.t();
    let keep: Vec<usize> = (0..m.n())
        .filter(|&i| {
            let r = m.row(i);
            r.iter().any(|&v| v != r[0])
        })
        .collect();
    if keep.len() < 2 {
        return Err(Error::DegenerateCorrelation { usable: keep.len() });
    }
    let excluded = (0..m.n())
        .filter(|i| !keep.contains(i))
        .map(|i| m.institutions[i].clone())
        .collect();
    let values: Vec<i8> = keep.iter().flat_map(|&i| m.row(i).iter().copied()).collect();
    let corr = TernaryCorrelator::new(keep.iter().map(|&i| m.row(i)), t);
    let rho = corr.matrix(&values);
    let tail_prob = tail_matrix(&rho, t)?;
    let row_std = keep
        .iter()
        .map(|&i| sample_std(m.row(i).iter().map(|&v| v as f64)))
        .collect();
    Ok(CorrelationResult {
        key: m.key.clone(),
        codes: keep.iter().map(|&i| m.institutions[i].clone()).collect(),
        rho,
        tail_prob,
        excluded_constant_rows: excluded,
        t,
        row_std,
    })
}

/// Pearson correlation matrix of real-valued rows (all of length `T`).
/// Constant rows are an error here; callers filter them.
pub fn correlation_matrix(rows: &[Vec<f64>]) -> Result<Matrix> {
    let n = rows.len();
    let t = rows.first().map_or(0, Vec::len);
    let mut z: Vec<Vec<f64>> = Vec::with_capacity(n);
    for r in rows {
        if r.len() != t {
            return Err(Error::Invariant("rows of unequal length".into()));
        }
        let mean = r.iter().sum::<f64>() / t as f64;
        let c: Vec<f64> = r.iter().map(|v| v - mean).collect();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateCorrelation { usable: 0 });
        }
        z.push(c.into_iter().map(|v| v / norm).collect());
    }
    let mut m = Matrix::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let r = z[i]
                .iter()
                .zip(&z[j])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .clamp(-1.0, 1.0);
            m.set(i, j, r);
            m.set(j, i, r);
        }
    }
    Ok(m)
}

/// Two-sided tail probability of a correlation coefficient over `n`
/// observations, via `t = rho sqrt((n-2)/(1-rho^2))` on `n - 2` degrees of
/// freedom.
pub fn tail_probability(rho: f64, n: usize) -> Result<f64> {
    if n < 4 {
        return Err(Error::InsufficientSample { n, min: 4 });
    }
    if !(rho.abs() <= 1.0) {
        return Err(Error::Invariant(format!("correlation {rho} outside [-1, 1]")));
    }
    if rho.abs() == 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t = rho.abs() * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    Ok((2.0 * dist.sf(t)).clamp(0.0, 1.0))
}

/// Fraction of distinct pairs whose tail probability is below `alpha`.
pub fn significant_share(result: &CorrelationResult, alpha: f64) -> f64 {
    let n = result.n();
    let pairs = n * (n - 1) / 2;
    if pairs == 0 {
        return 0.0;
    }
    let hits = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|&(i, j)| result.tail_prob.get(i, j) < alpha)
        .count();
    hits as f64 / pairs as f64
}

/// Which variance enters the null density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// Correlation matrices standardize rows, so sigma = 1.
    #[default]
    Unit,
    /// Mean of the per-row sample standard deviations of the raw ternary
    /// series, as if they were continuous.
    RowStd,
}

impl SigmaMode {
    pub fn label(self) -> &'static str {
        match self {
            SigmaMode::Unit => "unit",
            SigmaMode::RowStd => "row_std",
        }
    }
}

/// Trace tolerance per unit of dimension.
pub const TRACE_TOL: f64 = 1e-8;
/// Smallest eigenvalue accepted as round-off of a semidefinite matrix.
pub const PSD_TOL: f64 = -1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenReport {
    pub key: SampleKey,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub n: usize,
    pub t: usize,
    /// `T / N'`.
    pub q: f64,
    pub sigma_row_std: f64,
}

impl EigenReport {
    /// Validates the trace identity and semidefiniteness of a correlation
    /// spectrum.
    pub fn new(key: SampleKey, eigenvalues: Vec<f64>, t: usize, sigma_row_std: f64) -> Result<Self> {
        let n = eigenvalues.len();
        check_correlation_spectrum(&eigenvalues)?;
        Ok(Self {
            key,
            eigenvalues,
            n,
            t,
            q: t as f64 / n as f64,
            sigma_row_std,
        })
    }

    pub fn sigma(&self, mode: SigmaMode) -> f64 {
        match mode {
            SigmaMode::Unit => 1.0,
            SigmaMode::RowStd => self.sigma_row_std,
        }
    }
}

/// Checks `sum(lambda) = N` and `lambda >= -1e-10` for a correlation spectrum.
pub fn check_correlation_spectrum(eigenvalues: &[f64]) -> Result<()> {
    let n = eigenvalues.len();
    let trace: f64 = eigenvalues.iter().sum();
    if (trace - n as f64).abs() > TRACE_TOL * n as f64 {
        return Err(Error::Invariant(format!(
            "eigenvalue sum {trace} differs from dimension {n}"
        )));
    }
    if let Some(v) = eigenvalues.iter().find(|&&v| v < PSD_TOL) {
        return Err(Error::Invariant(format!("negative eigenvalue {v}")));
    }
    Ok(())
}

pub fn eigen_report(corr: &CorrelationResult) -> Result<EigenReport> {
    let ev = eigenvalues_sym(&corr.rho)?;
    let sigma = corr.row_std.iter().sum::<f64>() / corr.row_std.len() as f64;
    EigenReport::new(corr.key.clone(), ev, corr.t, sigma)
}

/// Support edges of the null density.
pub fn mp_bounds(q: f64, sigma: f64) -> Result<(f64, f64)> {
    if !(q >= 1.0) {
        return Err(Error::OutOfRegime(q));
    }
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    let s2 = sigma * sigma;
    let r = (1.0 / q).sqrt();
    Ok((s2 * (1.0 + 1.0 / q - 2.0 * r), s2 * (1.0 + 1.0 / q + 2.0 * r)))
}

/// Marchenko-Pastur eigenvalue density for `N` uncorrelated series of length
/// `T = Q N` with variance `sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpNull {
    pub q: f64,
    pub sigma: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Simpson panels over the angular variable for the CDF.
const CDF_PANELS: usize = 512;

impl MpNull {
    pub fn new(q: f64, sigma: f64) -> Result<Self> {
        let (lambda_min, lambda_max) = mp_bounds(q, sigma)?;
        Ok(Self {
            q,
            sigma,
            lambda_min,
            lambda_max,
        })
    }

    pub fn density(&self, lambda: f64) -> f64 {
        if lambda <= self.lambda_min || lambda >= self.lambda_max || lambda <= 0.0 {
            return 0.0;
        }
        let s2 = self.sigma * self.sigma;
        self.q / (2.0 * std::f64::consts::PI * s2)
            * ((self.lambda_max - lambda) * (lambda - self.lambda_min)).sqrt()
            / lambda
    }

    /// `P(Lambda <= lambda)`. Integrates in `theta` with
    /// `lambda = a + (b - a)(1 - cos theta)/2`, which removes the square-root
    /// edges and leaves a smooth integrand.
    pub fn cdf(&self, lambda: f64) -> f64 {
        let (a, b) = (self.lambda_min, self.lambda_max);
        if lambda <= a {
            return 0.0;
        }
        if lambda >= b {
            return 1.0;
        }
        let theta_end = (1.0 - 2.0 * (lambda - a) / (b - a)).clamp(-1.0, 1.0).acos();
        let half = 0.5 * (b - a);
        let c = self.q / (2.0 * std::f64::consts::PI * self.sigma * self.sigma) * half * half;
        let f = |th: f64| {
            let l = a + half * (1.0 - th.cos());
            let s = th.sin();
            if l <= 0.0 {
                // Q = 1 at theta = 0: sin^2/l -> 2/half.
                2.0 * c / half
            } else {
                c * s * s / l
            }
        };
        simpson(f, 0.0, theta_end, CDF_PANELS).clamp(0.0, 1.0)
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let m = panels + panels % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Density values on a grid; zero outside the support.
pub fn mp_density(grid: &[f64], q: f64, sigma: f64) -> Result<Vec<f64>> {
    let null = MpNull::new(q, sigma)?;
    Ok(grid.iter().map(|&l| null.density(l)).collect())
}

/// Kolmogorov-Smirnov distance between a sample and the null CDF.
pub fn ks_distance(sample: &[f64], null: &MpNull) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = null.cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Fixed histogram grid `[lo, hi)` in `bins` equal bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramGrid {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Default for HistogramGrid {
    fn default() -> Self {
        Self {
            lo: 0.0,
            hi: 10.0,
            bins: 100,
        }
    }
}

impl HistogramGrid {
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.width();
        (0..self.bins).map(|i| self.lo + (i as f64 + 0.5) * w).collect()
    }

    fn bin(&self, x: f64) -> Option<usize> {
        if x < self.lo || x >= self.hi {
            return None;
        }
        Some((((x - self.lo) / self.width()) as usize).min(self.bins - 1))
    }
}

/// Null built from the monthly averages of `Q` and `sigma` under one sigma
/// mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PooledNull {
    pub mode: SigmaMode,
    pub q_mean: f64,
    pub sigma_mean: f64,
    /// `None` when the averaged `Q` is below 1.
    pub null: Option<MpNull>,
    /// Density at the bin centers (zeros without a null).
    pub density: Vec<f64>,
    pub above_lambda_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PooledSpectrum {
    pub grid: HistogramGrid,
    pub counts: Vec<usize>,
    /// Eigenvalues outside the grid.
    pub overflow: usize,
    pub total: usize,
    pub empirical_density: Vec<f64>,
    pub unit: PooledNull,
    pub row_std: PooledNull,
}

impl PooledSpectrum {
    pub fn null(&self, mode: SigmaMode) -> &PooledNull {
        match mode {
            SigmaMode::Unit => &self.unit,
            SigmaMode::RowStd => &self.row_std,
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "bin_lo",
            "bin_hi",
            "lambda",
            "count",
            "empirical_density",
            "mp_density_unit",
            "mp_density_row_std",
        ])?;
        let width = self.grid.width();
        for (i, c) in self.grid.centers().iter().enumerate() {
            wtr.write_record([
                format!("{:.6}", self.grid.lo + i as f64 * width),
                format!("{:.6}", self.grid.lo + (i + 1) as f64 * width),
                format!("{c:.6}"),
                self.counts[i].to_string(),
                format!("{:.9}", self.empirical_density[i]),
                format!("{:.9}", self.unit.density[i]),
                format!("{:.9}", self.row_std.density[i]),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Pools every month's eigenvalues into one histogram and compares it with
/// the null at the averaged `(Q, sigma)`.
pub fn pooled_spectrum(reports: &[EigenReport], grid: HistogramGrid) -> Result<PooledSpectrum> {
    if reports.is_empty() {
        return Err(Error::EmptySample("no eigen reports to pool".into()));
    }
    if grid.bins == 0 || !(grid.hi > grid.lo) {
        return Err(Error::Config("histogram grid must have hi > lo and bins > 0".into()));
    }
    let mut counts = vec![0usize; grid.bins];
    let mut overflow = 0;
    let mut all = Vec::new();
    for r in reports {
        for &l in &r.eigenvalues {
            match grid.bin(l) {
                Some(b) => counts[b] += 1,
                None => overflow += 1,
            }
            all.push(l);
        }
    }
    let total = all.len();
    let width = grid.width();
    let empirical_density = counts
        .iter()
        .map(|&c| c as f64 / (total as f64 * width))
        .collect();
    let centers = grid.centers();
    let months = reports.len() as f64;
    let q_mean = reports.iter().map(|r| r.q).sum::<f64>() / months;

    let pooled = |mode: SigmaMode| {
        let sigma_mean = reports.iter().map(|r| r.sigma(mode)).sum::<f64>() / months;
        let null = MpNull::new(q_mean, sigma_mean).ok();
        let density = match &null {
            Some(n) => centers.iter().map(|&c| n.density(c)).collect(),
            None => vec![0.0; grid.bins],
        };
        let above = null.map_or(0, |n| all.iter().filter(|&&l| l > n.lambda_max).count());
        PooledNull {
            mode,
            q_mean,
            sigma_mean,
            null,
            density,
            above_lambda_max: above,
        }
    };
    Ok(PooledSpectrum {
        grid,
        counts,
        overflow,
        total,
        empirical_density,
        unit: pooled(SigmaMode::Unit),
        row_std: pooled(SigmaMode::RowStd),
    })
}

/// One row per (month, rank) with both null edges alongside.
pub fn write_eigen_reports<W: Write>(w: W, reports: &[EigenReport]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "instrument",
        "venue",
        "month",
        "rank",
        "eigenvalue",
        "N",
        "T",
        "Q",
        "sigma_row_std",
        "lambda_max_unit",
        "lambda_max_row_std",
    ])?;
    for r in reports {
        let edge = |s: f64| {
            mp_bounds(r.q, s)
                .map(|(_, hi)| format!("{hi:.9}"))
                .unwrap_or_default()
        };
        let (lu, lr) = (edge(1.0), edge(r.sigma_row_std));
        for (k, l) in r.eigenvalues.iter().enumerate() {
            wtr.write_record([
                r.key.instrument.clone(),
                r.key.venue.to_string(),
                r.key.month.to_string(),
                (k + 1).to_string(),
                format!("{l:.12}"),
                r.n.to_string(),
                r.t.to_string(),
                format!("{:.9}", r.q),
                format!("{:.9}", r.sigma_row_std),
                lu.clone(),
                lr.clone(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{BucketId, Venue};

    fn key() -> SampleKey {
        SampleKey {
            instrument: "VOD".into(),
            venue: Venue::OnBook,
            month: "2000-11".parse().unwrap(),
        }
    }

    fn matrix(rows: &[&[i8]]) -> StrategyMatrix {
        let t = rows[0].len();
        let buckets = (0..t as u32)
            .map(|i| BucketId {
                date: chrono::NaiveDate::from_ymd_opt(2000, 11, 1 + i / 7).unwrap(),
                index: i % 7,
            })
            .collect();
        StrategyMatrix::new(
            key(),
            (0..rows.len()).map(|i| format!("I{i}")).collect(),
            buckets,
            rows.iter().flat_map(|r| r.iter().copied()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_and_negated_rows() {
        let a: &[i8] = &[1, -1, 0, 1, 1, 0];
        let neg: Vec<i8> = a.iter().map(|v| -v).collect();
        let c = correlate(&matrix(&[a, a, &neg])).unwrap();
        assert_eq!(c.rho.get(0, 1), 1.0);
        assert_eq!(c.rho.get(0, 2), -1.0);
        assert_eq!(c.tail_prob.get(0, 1), 0.0);
        for i in 0..3 {
            assert_eq!(c.rho.get(i, i), 1.0);
        }
    }

    #[derive(Clone, Copy)]
    enum Ties {
        Average,
        Dense,
    }

    /// Rank correlation, written independently of the product-moment path.
    fn rank_correlation(x: &[f64], y: &[f64], ties: Ties) -> f64 {
        fn ranks(v: &[f64], ties: Ties) -> Vec<f64> {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
            let mut r = vec![0.0; v.len()];
            let (mut i, mut dense) = (0, 0.0);
            while i < idx.len() {
                let mut j = i;
                while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                    j += 1;
                }
                dense += 1.0;
                let rank = match ties {
                    Ties::Average => (i + j) as f64 / 2.0 + 1.0,
                    Ties::Dense => dense,
                };
                for k in i..=j {
                    r[idx[k]] = rank;
                }
                i = j + 1;
            }
            r
        }
        let (rx, ry) = (ranks(x, ties), ranks(y, ties));
        let n = x.len() as f64;
        let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
        let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
        sxy / (sxx * syy).sqrt()
    }

    fn as_f64(r: &[i8]) -> Vec<f64> {
        r.iter().map(|&v| v as f64).collect()
    }

    #[test]
    fn hand_rows_agree_with_rank_oracle() {
        let a: &[i8] = &[1, -1, 0, 1];
        let b: &[i8] = &[1, 1, 0, -1];
        let c = correlate(&matrix(&[a, b])).unwrap();
        // sums 1 and 1, cross sum -1, squares 3 and 3, T = 4:
        // (4 * -1 - 1) / sqrt(11 * 11) = -5/11
        assert!((c.rho.get(0, 1) + 5.0 / 11.0).abs() < 1e-15);
        let dense = rank_correlation(&as_f64(a), &as_f64(b), Ties::Dense);
        assert!((c.rho.get(0, 1) - dense).abs() < 1e-12);
        // Average ranks are not affine in the value when #(+1) != #(-1).
        let avg = rank_correlation(&as_f64(a), &as_f64(b), Ties::Average);
        assert!((avg - (-1.75 / 4.5)).abs() < 1e-12);
    }

    #[test]
    fn balanced_rows_agree_under_average_ranks() {
        let a: &[i8] = &[1, -1, 0, 1, -1, 0, 0];
        let b: &[i8] = &[-1, 1, 1, 0, 0, -1, 0];
        let c = correlate(&matrix(&[a, b])).unwrap();
        let avg = rank_correlation(&as_f64(a), &as_f64(b), Ties::Average);
        assert!((c.rho.get(0, 1) - avg).abs() < 1e-12);
    }

    #[test]
    fn constant_rows_are_excluded() {
        let a: &[i8] = &[1, -1, 0, 1];
        let b: &[i8] = &[0, 0, 0, 0];
        let d: &[i8] = &[1, 1, -1, 0];
        let c = correlate(&matrix(&[a, b, d])).unwrap();
        assert_eq!(c.codes, vec!["I0", "I2"]);
        assert_eq!(c.excluded_constant_rows, vec!["I1"]);
        assert!(matches!(
            correlate(&matrix(&[a, b])),
            Err(Error::DegenerateCorrelation { usable: 1 })
        ));
    }

    #[test]
    fn tail_probability_edges() {
        assert!((tail_probability(0.0, 10).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(tail_probability(1.0, 10).unwrap(), 0.0);
        assert_eq!(tail_probability(-1.0, 10).unwrap(), 0.0);
        assert!(matches!(
            tail_probability(0.3, 3),
            Err(Error::InsufficientSample { n: 3, min: 4 })
        ));
        let p = tail_probability(0.5, 20).unwrap();
        assert!(p > 0.02 && p < 0.03, "{p}");
        assert_eq!(tail_probability(-0.5, 20).unwrap(), p);
    }

    #[test]
    fn fully_coherent_share_is_one() {
        let a: &[i8] = &[1, -1, 0, 1, 1, -1, 0, 0, 1, -1];
        let c = correlate(&matrix(&[a, a, a, a])).unwrap();
        assert_eq!(significant_share(&c, 0.05), 1.0);
    }

    #[test]
    fn mp_bounds_substitution() {
        let (lo, hi) = mp_bounds(1.0, 1.0).unwrap();
        assert!(lo.abs() < 1e-15 && (hi - 4.0).abs() < 1e-15);
        let (lo, hi) = mp_bounds(2.0, 1.0).unwrap();
        let r = 2f64.sqrt();
        assert!((lo - (1.5 - r)).abs() < 1e-14);
        assert!((hi - (1.5 + r)).abs() < 1e-14);
        assert!((lo - 0.0858).abs() < 1e-4 && (hi - 2.9142).abs() < 1e-4);
        assert!(matches!(mp_bounds(0.5, 1.0), Err(Error::OutOfRegime(_))));
    }

    #[test]
    fn mp_density_values() {
        let d = mp_density(&[0.0, 2.0, 4.0], 1.0, 1.0).unwrap();
        assert_eq!(d[0], 0.0);
        assert_eq!(d[2], 0.0);
        assert!((d[1] - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert!((d[1] - 0.1592).abs() < 1e-4);
        assert_eq!(mp_density(&[5.0, -1.0], 1.0, 1.0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn mp_density_integrates_to_one() {
        // plain midpoint rule on lambda, independent of the angular CDF path
        for (q, s) in [(1.0, 1.0), (2.0, 1.0), (3.5, 0.8), (1.2, 1.3)] {
            let null = MpNull::new(q, s).unwrap();
            let n = 400_000;
            let h = (null.lambda_max - null.lambda_min) / n as f64;
            let total: f64 = (0..n)
                .map(|i| null.density(null.lambda_min + (i as f64 + 0.5) * h) * h)
                .sum();
            assert!((total - 1.0).abs() < 1e-3, "Q={q} sigma={s}: {total}");
            assert!((null.cdf(null.lambda_max) - 1.0).abs() < 1e-12);
            let near = null.cdf(null.lambda_max - 1e-9);
            assert!((near - 1.0).abs() < 1e-6, "Q={q} sigma={s}: {near}");
        }
    }

    #[test]
    fn cdf_matches_midpoint_integration() {
        let null = MpNull::new(2.0, 1.0).unwrap();
        for x in [0.2, 0.5, 1.0, 1.7, 2.5] {
            let n = 200_000;
            let h = (x - null.lambda_min) / n as f64;
            let mid: f64 = (0..n)
                .map(|i| null.density(null.lambda_min + (i as f64 + 0.5) * h) * h)
                .sum();
            assert!((null.cdf(x) - mid).abs() < 2e-4, "x={x}");
        }
    }

    #[test]
    fn eigen_report_enforces_trace() {
        assert!(EigenReport::new(key(), vec![1.5, 0.5], 10, 1.0).is_ok());
        assert!(EigenReport::new(key(), vec![1.5, 0.6], 10, 1.0).is_err());
        assert!(EigenReport::new(key(), vec![2.0 + 1e-9, -1e-9], 10, 1.0).is_err());
    }

    #[test]
    fn pooled_single_month_is_its_histogram() {
        let r = EigenReport::new(key(), vec![2.0, 0.6, 0.4], 6, 1.0).unwrap();
        let grid = HistogramGrid {
            lo: 0.0,
            hi: 3.0,
            bins: 3,
        };
        let p = pooled_spectrum(&[r], grid).unwrap();
        assert_eq!(p.counts, vec![2, 0, 1]);
        assert_eq!(p.total, 3);
        assert_eq!(p.unit.q_mean, 2.0);
        assert_eq!(p.unit.above_lambda_max, 0);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }
}
