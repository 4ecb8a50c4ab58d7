//! Ternary strategy matrices.
//!
//! Each retained institution becomes one row of `+1` (net buyer in the
//! bucket), `-1` (net seller) or `0` (no trade, or trades netting to zero).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::{BucketId, MonthSample, SampleKey, TradeRecord};
use crate::{Error, Result};

/// Net traded volume: buys minus sells.
pub fn net_volume<'a>(trades: impl IntoIterator<Item = &'a TradeRecord>) -> f64 {
    trades.into_iter().map(|t| t.signed_volume).sum()
}

pub fn ternary_sign(net_volume: f64, active: bool) -> i8 {
    if !active || net_volume == 0.0 {
        0
    } else if net_volume > 0.0 {
        1
    } else {
        -1
    }
}

/// Activity filter as an exact fraction: an institution is kept iff
/// `active_buckets * den > num * T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ActivityThreshold {
    pub num: u32,
    pub den: u32,
}

impl Default for ActivityThreshold {
    fn default() -> Self {
        Self { num: 1, den: 3 }
    }
}

impl ActivityThreshold {
    pub fn keeps(&self, active: usize, t: usize) -> bool {
        active as u64 * self.den as u64 > self.num as u64 * t as u64
    }
}

impl fmt::Display for ActivityThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for ActivityThreshold {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad activity threshold '{s}', expected a/b in [0,1)"));
        let (a, b) = s.trim().split_once('/').ok_or_else(bad)?;
        let num: u32 = a.trim().parse().map_err(|_| bad())?;
        let den: u32 = b.trim().parse().map_err(|_| bad())?;
        if den == 0 || num >= den {
            return Err(bad());
        }
        Ok(Self { num, den })
    }
}

impl TryFrom<String> for ActivityThreshold {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ActivityThreshold> for String {
    fn from(a: ActivityThreshold) -> String {
        a.to_string()
    }
}

/// `N x T` matrix of ternary strategies, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyMatrix {
    pub key: SampleKey,
    pub institutions: Vec<String>,
    pub buckets: Vec<BucketId>,
    values: Vec<i8>,
}

impl StrategyMatrix {
    pub fn new(
        key: SampleKey,
        institutions: Vec<String>,
        buckets: Vec<BucketId>,
        values: Vec<i8>,
    ) -> Result<Self> {
        if values.len() != institutions.len() * buckets.len() {
            return Err(Error::Invariant(format!(
                "strategy matrix has {} values for {}x{}",
                values.len(),
                institutions.len(),
                buckets.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(-1..=1).contains(*v)) {
            return Err(Error::Invariant(format!("strategy value {v} outside {{-1,0,1}}")));
        }
        let distinct: BTreeSet<&String> = institutions.iter().collect();
        if distinct.len() != institutions.len() {
            return Err(Error::Invariant("duplicate institution code".into()));
        }
        Ok(Self {
            key,
            institutions,
            buckets,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.institutions.len()
    }

    pub fn t(&self) -> usize {
        self.buckets.len()
    }

    pub fn row(&self, i: usize) -> &[i8] {
        let t = self.t();
        &self.values[i * t..(i + 1) * t]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        (0..self.n()).map(move |i| self.row(i))
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    /// Same shape and labels, new values. Used by the bootstrap.
    pub fn with_values(&self, values: Vec<i8>) -> Result<Self> {
        Self::new(
            self.key.clone(),
            self.institutions.clone(),
            self.buckets.clone(),
            values,
        )
    }

    /// Running sums of each row (the cumulative strategy paths).
    pub fn cumulative_paths(&self) -> Vec<Vec<i64>> {
        self.rows()
            .map(|r| {
                r.iter()
                    .scan(0i64, |acc, &v| {
                        *acc += v as i64;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect()
    }

    /// Canonical text form:
    ///
    /// ```text
    /// instrument,venue,month,N,T
    /// VOD,on_book,2000-11,2,140
    /// institution,2000-11-01/0,2000-11-01/1,...
    /// 2331,1,0,-1,...
    /// ```
    pub fn write_text<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(w);
        wtr.write_record(["instrument", "venue", "month", "N", "T"])?;
        wtr.write_record([
            self.key.instrument.clone(),
            self.key.venue.to_string(),
            self.key.month.to_string(),
            self.n().to_string(),
            self.t().to_string(),
        ])?;
        let mut head = vec!["institution".to_string()];
        head.extend(self.buckets.iter().map(|b| b.to_string()));
        wtr.write_record(&head)?;
        for (code, row) in self.institutions.iter().zip(self.rows()) {
            let mut rec = vec![code.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_text<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .from_reader(r);
        let mut recs = rdr.records();
        let mut next = |what: &str| -> Result<csv::StringRecord> {
            recs.next()
                .ok_or_else(|| Error::Format {
                    line: 0,
                    msg: format!("missing {what}"),
                })?
                .map_err(Error::from)
        };
        let fmt_err = |rec: &csv::StringRecord, msg: String| Error::Format {
            line: rec.position().map(|p| p.line() as usize).unwrap_or(0),
            msg,
        };

        let head = next("header")?;
        if head.iter().collect::<Vec<_>>() != ["instrument", "venue", "month", "N", "T"] {
            return Err(fmt_err(&head, "unexpected strategy matrix header".into()));
        }
        let meta = next("metadata")?;
        if meta.len() != 5 {
            return Err(fmt_err(&meta, "metadata needs 5 fields".into()));
        }
        let key = SampleKey {
            instrument: meta[0].to_string(),
            venue: meta[1].parse()?,
            month: meta[2].parse()?,
        };
        let n: usize = meta[3]
            .parse()
            .map_err(|_| fmt_err(&meta, "bad N".into()))?;
        let t: usize = meta[4]
            .parse()
            .map_err(|_| fmt_err(&meta, "bad T".into()))?;
        let bucket_row = next("bucket header")?;
        if bucket_row.len() != t + 1 {
            return Err(fmt_err(&bucket_row, format!("expected {t} bucket ids")));
        }
        let buckets = bucket_row
            .iter()
            .skip(1)
            .map(str::parse)
            .collect::<Result<Vec<BucketId>>>()?;
        let mut institutions = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n * t);
        for _ in 0..n {
            let rec = next("matrix row")?;
            if rec.len() != t + 1 {
                return Err(fmt_err(&rec, format!("row needs {} fields", t + 1)));
            }
            institutions.push(rec[0].to_string());
            for v in rec.iter().skip(1) {
                values.push(
                    v.parse::<i8>()
                        .map_err(|_| fmt_err(&rec, format!("bad value '{v}'")))?,
                );
            }
        }
        Self::new(key, institutions, buckets, values)
    }
}

/// Per-institution active-bucket counts split by the filter outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FilterAudit {
    pub key: SampleKey,
    pub t: usize,
    pub threshold: ActivityThreshold,
    pub retained: Vec<(String, usize)>,
    pub excluded: Vec<(String, usize)>,
}

impl FilterAudit {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["institution", "active_buckets", "T", "threshold", "retained"])?;
        let rows = self
            .retained
            .iter()
            .map(|r| (r, true))
            .chain(self.excluded.iter().map(|r| (r, false)));
        for ((code, active), kept) in rows {
            wtr.write_record([
                code.clone(),
                active.to_string(),
                self.t.to_string(),
                self.threshold.to_string(),
                kept.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Builds the strategy matrix of a sample. Rows follow first appearance in
/// the (time-ordered) sample.
pub fn build_strategy_matrix(
    sample: &MonthSample,
    threshold: ActivityThreshold,
) -> Result<(StrategyMatrix, FilterAudit)> {
    let t = sample.t();
    let mut order: Vec<&str> = Vec::new();
    // institution -> bucket -> trades
    let mut cells: BTreeMap<&str, BTreeMap<usize, Vec<&TradeRecord>>> = BTreeMap::new();
    for a in &sample.trades {
        let code = a.trade.institution.as_str();
        let entry = cells.entry(code).or_insert_with(|| {
            order.push(code);
            BTreeMap::new()
        });
        entry.entry(a.bucket).or_default().push(&a.trade);
    }

    let mut institutions = Vec::new();
    let mut values = Vec::new();
    let mut audit = FilterAudit {
        key: sample.key.clone(),
        t,
        threshold,
        retained: Vec::new(),
        excluded: Vec::new(),
    };
    for code in order {
        let by_bucket = &cells[code];
        let active = by_bucket.len();
        if !threshold.keeps(active, t) {
            audit.excluded.push((code.to_owned(), active));
            continue;
        }
        audit.retained.push((code.to_owned(), active));
        institutions.push(code.to_owned());
        let mut row = vec![0i8; t];
        for (&b, trades) in by_bucket {
            row[b] = ternary_sign(net_volume(trades.iter().copied()), true);
        }
        values.extend(row);
    }
    if institutions.is_empty() {
        return Err(Error::EmptyMatrix(sample.key.to_string()));
    }
    let m = StrategyMatrix::new(sample.key.clone(), institutions, sample.buckets.clone(), values)?;
    Ok((m, audit))
}
