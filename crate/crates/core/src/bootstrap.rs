//! Row-shuffle bootstrap for the largest eigenvalues.
//!
//! Each replicate permutes every institution's strategy row independently,
//! which keeps the number of buying, selling and inactive buckets per row but
//! destroys cross-sectional alignment. The top `k` eigenvalues of each
//! replicate's correlation matrix form the null band for that month.
//!
//! Replicate `r` of the sample `(instrument, venue, month)` draws from a
//! ChaCha8 stream seeded with
//! `seed::derive(master, [hash(instrument), hash(venue), month ordinal, r])`,
//! so results do not depend on the thread count.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::SampleKey;
use crate::linalg::eigenvalues_sym;
use crate::seed;
use crate::spectra::{check_correlation_spectrum, correlate, TernaryCorrelator};
use crate::strategy::StrategyMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub ranks: usize,
    pub seed: u64,
    /// 1 permutes single buckets; larger values permute whole blocks and keep
    /// serial correlation inside each block.
    pub block_len: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 1000,
            ranks: 2,
            seed: 0,
            block_len: 1,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 100 {
            return Err(Error::Config(format!(
                "bootstrap needs at least 100 replicates, got {}",
                self.replicates
            )));
        }
        if self.ranks == 0 {
            return Err(Error::Config("bootstrap ranks must be at least 1".into()));
        }
        if self.block_len == 0 {
            return Err(Error::Config("block length must be at least 1".into()));
        }
        Ok(())
    }
}

/// Permutes `row` in blocks of `block_len` (the last block may be short).
pub fn shuffle_row<R: Rng + ?Sized>(row: &mut [i8], block_len: usize, rng: &mut R) {
    if block_len <= 1 {
        row.shuffle(rng);
        return;
    }
    let mut blocks: Vec<Vec<i8>> = row.chunks(block_len).map(<[i8]>::to_vec).collect();
    blocks.shuffle(rng);
    for (dst, v) in row.iter_mut().zip(blocks.into_iter().flatten()) {
        *dst = v;
    }
}

fn shuffle_values<R: Rng + ?Sized>(values: &mut [i8], t: usize, block_len: usize, rng: &mut R) {
    if t == 0 {
        return;
    }
    for row in values.chunks_mut(t) {
        shuffle_row(row, block_len, rng);
    }
}

/// Independently permutes every row of `m`.
pub fn shuffle_rows<R: Rng + ?Sized>(m: &StrategyMatrix, block_len: usize, rng: &mut R) -> StrategyMatrix {
    let mut values = m.values().to_vec();
    shuffle_values(&mut values, m.t(), block_len, rng);
    m.with_values(values).expect("permutation keeps the shape")
}

/// [`shuffle_rows`] from a seed.
pub fn shuffle_rows_seeded(m: &StrategyMatrix, seed: u64) -> StrategyMatrix {
    shuffle_rows(m, 1, &mut seed::rng(seed, &[]))
}

fn replicate_coords(key: &SampleKey, r: usize) -> [u64; 4] {
    [
        seed::label_hash(&key.instrument),
        seed::label_hash(key.venue.as_str()),
        key.month.ordinal() as u64,
        r as u64,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapBand {
    pub key: SampleKey,
    pub k: usize,
    pub block_len: usize,
    /// One row per replicate, each with `k` descending values.
    pub draws: Vec<Vec<f64>>,
    pub median: Vec<f64>,
    pub std: Vec<f64>,
    pub empirical: Vec<f64>,
    pub significant: Vec<bool>,
}

impl BootstrapBand {
    pub fn replicates(&self) -> usize {
        self.draws.len()
    }

    /// Upper edge of the band, `median + 2 std`.
    pub fn upper(&self, rank: usize) -> f64 {
        self.median[rank] + 2.0 * self.std[rank]
    }

    /// Empirical quantile of the null for rank `rank` (linear interpolation).
    pub fn quantile(&self, rank: usize, p: f64) -> f64 {
        let mut v: Vec<f64> = self.draws.iter().map(|d| d[rank]).collect();
        v.sort_by(f64::total_cmp);
        quantile_sorted(&v, p)
    }
}

fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn median_std(mut v: Vec<f64>) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    v.sort_by(f64::total_cmp);
    (quantile_sorted(&v, 0.5), std)
}

/// Null band for the top `k` eigenvalues of one month.
pub fn bootstrap_band(m: &StrategyMatrix, cfg: &BootstrapConfig) -> Result<BootstrapBand> {
    cfg.validate()?;
    let corr = correlate(m)?;
    let n = corr.n();
    let k = cfg.ranks;
    if k > n {
        return Err(Error::Config(format!(
            "{k} ranks requested but only {n} variable rows"
        )));
    }
    let empirical_all = eigenvalues_sym(&corr.rho)?;
    check_correlation_spectrum(&empirical_all)?;
    let empirical = empirical_all[..k].to_vec();

    let t = m.t();
    let rows: Vec<&[i8]> = corr
        .codes
        .iter()
        .map(|c| {
            let i = m.institutions.iter().position(|x| x == c).expect("survivor");
            m.row(i)
        })
        .collect();
    let correlator = TernaryCorrelator::new(rows.iter().copied(), t);
    if correlator.has_constant_row() {
        return Err(Error::Invariant("constant row survived filtering".into()));
    }
    let base: Vec<i8> = rows.iter().flat_map(|r| r.iter().copied()).collect();

    let draws = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(cfg.seed, &replicate_coords(&m.key, r));
            let mut values = base.clone();
            shuffle_values(&mut values, t, cfg.block_len, &mut rng);
            let ev = eigenvalues_sym(&correlator.matrix(&values))?;
            check_correlation_spectrum(&ev)?;
            Ok(ev[..k].to_vec())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let mut median = Vec::with_capacity(k);
    let mut std = Vec::with_capacity(k);
    for rank in 0..k {
        let (md, sd) = median_std(draws.iter().map(|d| d[rank]).collect());
        median.push(md);
        std.push(sd);
    }
    let significant = (0..k)
        .map(|r| empirical[r] > median[r] + 2.0 * std[r])
        .collect();
    Ok(BootstrapBand {
        key: m.key.clone(),
        k,
        block_len: cfg.block_len,
        draws,
        median,
        std,
        empirical,
        significant,
    })
}

/// Band table: one row per (month, rank).
pub fn write_bands<W: Write>(w: W, bands: &[BootstrapBand]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "instrument",
        "venue",
        "month",
        "rank",
        "empirical",
        "median",
        "std",
        "lower",
        "upper",
        "significant",
        "replicates",
        "block_len",
    ])?;
    for b in bands {
        for r in 0..b.k {
            wtr.write_record([
                b.key.instrument.clone(),
                b.key.venue.to_string(),
                b.key.month.to_string(),
                (r + 1).to_string(),
                format!("{:.9}", b.empirical[r]),
                format!("{:.9}", b.median[r]),
                format!("{:.9}", b.std[r]),
                format!("{:.9}", b.median[r] - 2.0 * b.std[r]),
                format!("{:.9}", b.upper(r)),
                b.significant[r].to_string(),
                b.replicates().to_string(),
                b.block_len.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
