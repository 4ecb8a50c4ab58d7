//! Trade records, CSV ingestion and hourly bucketing.
//!
//! ## Input columns (header required, order-independent)
//!
//! | column          | example                | notes                              |
//! |-----------------|------------------------|------------------------------------|
//! | `timestamp`     | `2000-11-01T09:15:00`  | ISO-8601, exchange-local, no zone  |
//! | `instrument`    | `VOD`                  |                                    |
//! | `venue`         | `on_book` / `off_book` |                                    |
//! | `institution`   | `2331`                 | opaque member code                 |
//! | `signed_volume` | `-1520.5`              | > 0 buy, < 0 sell, never 0         |
//! | `order_id`      | `AT82F31E13`           | optional column; empty off-book    |
//!
//! Malformed lines never abort a parse: they are returned as [`Reject`]s with
//! their line number, the raw fields, and a reason.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const TRADE_COLUMNS: [&str; 6] = [
    "timestamp",
    "instrument",
    "venue",
    "institution",
    "signed_volume",
    "order_id",
];

const TIMESTAMP_OUT: &str = "%Y-%m-%dT%H:%M:%S%.f";
const TIMESTAMP_IN: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Venue {
    OnBook,
    OffBook,
}

impl Venue {
    pub fn as_str(self) -> &'static str {
        match self {
            Venue::OnBook => "on_book",
            Venue::OffBook => "off_book",
        }
    }
}

impl fmt::Display for Venue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Venue {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "on_book" => Ok(Venue::OnBook),
            "off_book" => Ok(Venue::OffBook),
            other => Err(Error::Config(format!("unknown venue '{other}'"))),
        }
    }
}

/// Calendar month, displayed as `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Month {
    pub year: i32,
    pub month: u32,
}

impl Month {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Config(format!("month {month} out of range")));
        }
        Ok(Self { year, month })
    }

    pub fn of(date: NaiveDate) -> Self {
        Self {
            year: date.year(),
            month: date.month(),
        }
    }

    /// Months since year 0; consecutive months differ by exactly one.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn next(self) -> Self {
        if self.month == 12 {
            Self {
                year: self.year + 1,
                month: 1,
            }
        } else {
            Self {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month")
    }

    pub fn contains(self, date: NaiveDate) -> bool {
        Month::of(date) == self
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Month {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (y, m) = s
            .trim()
            .split_once('-')
            .ok_or_else(|| Error::Config(format!("bad month '{s}', expected YYYY-MM")))?;
        let year = y
            .parse()
            .map_err(|_| Error::Config(format!("bad year in '{s}'")))?;
        let month = m
            .parse()
            .map_err(|_| Error::Config(format!("bad month in '{s}'")))?;
        Month::new(year, month)
    }
}

impl TryFrom<String> for Month {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Month> for String {
    fn from(m: Month) -> String {
        m.to_string()
    }
}

/// One fill or order event attributed to a member institution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub timestamp: NaiveDateTime,
    pub instrument: String,
    pub venue: Venue,
    pub institution: String,
    /// Positive when the institution buys.
    pub signed_volume: f64,
    pub order_id: Option<String>,
}

impl TradeRecord {
    /// Checks the record invariants; the reason string doubles as the reject
    /// reason in parse reports.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !self.signed_volume.is_finite() {
            return Err("signed_volume must be finite".into());
        }
        if self.signed_volume == 0.0 {
            return Err("signed_volume must be nonzero".into());
        }
        if self.venue == Venue::OffBook && self.order_id.is_some() {
            return Err("off_book record must not carry an order_id".into());
        }
        if self.institution.is_empty() {
            return Err("institution code is empty".into());
        }
        if self.instrument.is_empty() {
            return Err("instrument is empty".into());
        }
        Ok(())
    }
}

/// A line that could not be turned into a [`TradeRecord`].
#[derive(Debug, Clone, PartialEq)]
pub struct Reject {
    /// 1-based line number in the input, header included.
    pub line: u64,
    pub fields: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedTrades {
    pub header: Vec<String>,
    pub records: Vec<TradeRecord>,
    pub rejects: Vec<Reject>,
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    for fmt in TIMESTAMP_IN {
        if let Ok(ts) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(ts);
        }
    }
    // Offsets are dropped: timestamps are taken at face value.
    chrono::DateTime::parse_from_rfc3339(s)
        .ok()
        .map(|dt| dt.naive_local())
}

/// Parses a comma-separated trade table.
pub fn parse_trades<R: Read>(reader: R) -> Result<ParsedTrades> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let col = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(TRADE_COLUMNS) {
        *slot = col(name).ok_or_else(|| Error::Schema(name.to_owned()))?;
    }
    let order_col = col("order_id");

    let mut out = ParsedTrades {
        header: header.clone(),
        ..Default::default()
    };
    for row in rdr.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                out.rejects.push(Reject {
                    line,
                    fields: Vec::new(),
                    reason: format!("unreadable line: {e}"),
                });
                continue;
            }
        };
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let fields: Vec<String> = row.iter().map(str::to_owned).collect();
        match record_from_fields(&fields, &idx, order_col) {
            Ok(rec) => out.records.push(rec),
            Err(reason) => out.rejects.push(Reject {
                line,
                fields,
                reason,
            }),
        }
    }
    Ok(out)
}

fn record_from_fields(
    fields: &[String],
    idx: &[usize; 5],
    order_col: Option<usize>,
) -> std::result::Result<TradeRecord, String> {
    let get = |i: usize, name: &str| {
        fields
            .get(i)
            .map(String::as_str)
            .ok_or_else(|| format!("missing field '{name}'"))
    };
    let ts_raw = get(idx[0], "timestamp")?;
    let timestamp =
        parse_timestamp(ts_raw).ok_or_else(|| format!("unparseable timestamp '{ts_raw}'"))?;
    let instrument = get(idx[1], "instrument")?.to_owned();
    let venue_raw = get(idx[2], "venue")?;
    let venue = venue_raw
        .parse::<Venue>()
        .map_err(|_| format!("unknown venue '{venue_raw}'"))?;
    let institution = get(idx[3], "institution")?.to_owned();
    let vol_raw = get(idx[4], "signed_volume")?;
    let signed_volume: f64 = vol_raw
        .parse()
        .map_err(|_| format!("unparseable signed_volume '{vol_raw}'"))?;
    let order_id = order_col
        .and_then(|i| fields.get(i))
        .filter(|s| !s.is_empty())
        .cloned();
    let rec = TradeRecord {
        timestamp,
        instrument,
        venue,
        institution,
        signed_volume,
        order_id,
    };
    rec.validate()?;
    Ok(rec)
}

/// Writes records in the canonical column order. Parsing the output yields
/// the same records.
pub fn write_trades<W: Write>(w: W, trades: &[TradeRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(TRADE_COLUMNS)?;
    for t in trades {
        let ts = t.timestamp.format(TIMESTAMP_OUT).to_string();
        let vol = t.signed_volume.to_string();
        wtr.write_record([
            ts.as_str(),
            &t.instrument,
            t.venue.as_str(),
            &t.institution,
            &vol,
            t.order_id.as_deref().unwrap_or(""),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Rejects report: the input columns followed by `reject_reason` (and the
/// line number, so rejects can be traced back).
pub fn write_rejects<W: Write>(w: W, header: &[String], rejects: &[Reject]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(w);
    let mut head: Vec<&str> = vec!["line"];
    head.extend(header.iter().map(String::as_str));
    head.push("reject_reason");
    wtr.write_record(&head)?;
    for r in rejects {
        let line = r.line.to_string();
        let mut row: Vec<&str> = vec![&line];
        for i in 0..header.len() {
            row.push(r.fields.get(i).map(String::as_str).unwrap_or(""));
        }
        row.push(&r.reason);
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Trading session and bucket width. The default keeps 09:00-16:00 in hour
/// buckets, dropping the opening hour and the closing half hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub open: NaiveTime,
    pub close: NaiveTime,
    pub bucket_minutes: u32,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            open: NaiveTime::from_hms_opt(9, 0, 0).unwrap(),
            close: NaiveTime::from_hms_opt(16, 0, 0).unwrap(),
            bucket_minutes: 60,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        let span = (self.close - self.open).num_minutes();
        if self.bucket_minutes == 0 || span <= 0 || span % self.bucket_minutes as i64 != 0 {
            return Err(Error::Config(format!(
                "session {}-{} is not a positive multiple of {} minutes",
                self.open, self.close, self.bucket_minutes
            )));
        }
        Ok(())
    }

    pub fn buckets_per_day(&self) -> u32 {
        ((self.close - self.open).num_minutes() / self.bucket_minutes as i64) as u32
    }

    /// Bucket index of a time of day; half-open, so `close` itself is out.
    pub fn bucket_of(&self, t: NaiveTime) -> Option<u32> {
        if t < self.open || t >= self.close {
            return None;
        }
        let secs = (t - self.open).num_seconds();
        Some((secs / (self.bucket_minutes as i64 * 60)) as u32)
    }

    /// Start time of bucket `index`.
    pub fn bucket_start(&self, index: u32) -> NaiveTime {
        let secs = self.open.num_seconds_from_midnight() + index * self.bucket_minutes * 60;
        NaiveTime::from_num_seconds_from_midnight_opt(secs, 0).expect("bucket inside the day")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BucketId {
    pub date: NaiveDate,
    pub index: u32,
}

impl fmt::Display for BucketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.date.format("%Y-%m-%d"), self.index)
    }
}

impl FromStr for BucketId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad bucket id '{s}', expected YYYY-MM-DD/i"));
        let (d, i) = s.trim().split_once('/').ok_or_else(bad)?;
        Ok(BucketId {
            date: NaiveDate::parse_from_str(d, "%Y-%m-%d").map_err(|_| bad())?,
            index: i.parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleKey {
    pub instrument: String,
    pub venue: Venue,
    pub month: Month,
}

impl fmt::Display for SampleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.instrument, self.venue, self.month)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    /// Before the session open or at/after the close.
    OutsideSession,
    /// Day not in the calendar override.
    NonTradingDay,
    /// Different instrument, venue or month than the sample.
    OtherSample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignedTrade {
    /// Index into [`MonthSample::buckets`].
    pub bucket: usize,
    pub trade: TradeRecord,
}

/// One (instrument, venue, month) of trades split into session buckets.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthSample {
    pub key: SampleKey,
    pub session: SessionConfig,
    /// Strictly increasing; every trading day contributes all its buckets.
    pub buckets: Vec<BucketId>,
    /// Ordered by timestamp, ties in input order.
    pub trades: Vec<AssignedTrade>,
    pub excluded: Vec<(TradeRecord, Exclusion)>,
}

impl MonthSample {
    pub fn t(&self) -> usize {
        self.buckets.len()
    }

    pub fn trading_days(&self) -> usize {
        self.buckets
            .iter()
            .map(|b| b.date)
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// The same sample restricted to the given institutions. Buckets are kept.
    pub fn retain_institutions(&self, keep: &BTreeSet<String>) -> MonthSample {
        MonthSample {
            key: self.key.clone(),
            session: self.session,
            buckets: self.buckets.clone(),
            trades: self
                .trades
                .iter()
                .filter(|a| keep.contains(&a.trade.institution))
                .cloned()
                .collect(),
            excluded: Vec::new(),
        }
    }
}

/// Distinct dates carrying at least one trade, at any hour.
pub fn trading_days<'a>(trades: impl IntoIterator<Item = &'a TradeRecord>) -> BTreeSet<NaiveDate> {
    trades.into_iter().map(|t| t.timestamp.date()).collect()
}

/// Buckets one sample. Trading days come from `calendar` when given, else from
/// the dates present in `trades`.
pub fn bucketize(
    trades: &[TradeRecord],
    key: &SampleKey,
    session: &SessionConfig,
    calendar: Option<&BTreeSet<NaiveDate>>,
) -> Result<MonthSample> {
    session.validate()?;
    let in_key = |t: &TradeRecord| {
        t.instrument == key.instrument
            && t.venue == key.venue
            && key.month.contains(t.timestamp.date())
    };
    let days: BTreeSet<NaiveDate> = match calendar {
        Some(cal) => cal.iter().copied().filter(|d| key.month.contains(*d)).collect(),
        None => trading_days(trades.iter().filter(|t| in_key(t))),
    };
    assign(trades, key, session, &days)
}

fn assign(
    trades: &[TradeRecord],
    key: &SampleKey,
    session: &SessionConfig,
    days: &BTreeSet<NaiveDate>,
) -> Result<MonthSample> {
    if days.is_empty() {
        return Err(Error::EmptySample(format!("{key}: no trading days")));
    }
    let per_day = session.buckets_per_day();
    let buckets: Vec<BucketId> = days
        .iter()
        .flat_map(|&date| (0..per_day).map(move |index| BucketId { date, index }))
        .collect();
    let day_pos: BTreeMap<NaiveDate, usize> = days.iter().enumerate().map(|(i, d)| (*d, i)).collect();

    let mut order: Vec<usize> = (0..trades.len()).collect();
    order.sort_by_key(|&i| trades[i].timestamp);

    let mut assigned = Vec::new();
    let mut excluded = Vec::new();
    for i in order {
        let t = &trades[i];
        let date = t.timestamp.date();
        if t.instrument != key.instrument || t.venue != key.venue || !key.month.contains(date) {
            excluded.push((t.clone(), Exclusion::OtherSample));
            continue;
        }
        let Some(&pos) = day_pos.get(&date) else {
            excluded.push((t.clone(), Exclusion::NonTradingDay));
            continue;
        };
        match session.bucket_of(t.timestamp.time()) {
            Some(b) => assigned.push(AssignedTrade {
                bucket: pos * per_day as usize + b as usize,
                trade: t.clone(),
            }),
            None => excluded.push((t.clone(), Exclusion::OutsideSession)),
        }
    }
    Ok(MonthSample {
        key: key.clone(),
        session: *session,
        buckets,
        trades: assigned,
        excluded,
    })
}

/// Splits a trade list into one sample per (instrument, venue, month).
/// Trading days are the dates with at least one trade on any instrument or
/// venue, unless a calendar is supplied.
pub fn partition(
    trades: &[TradeRecord],
    session: &SessionConfig,
    calendar: Option<&BTreeSet<NaiveDate>>,
) -> Result<Vec<MonthSample>> {
    session.validate()?;
    if trades.is_empty() {
        return Err(Error::EmptySample("no trades in input".into()));
    }
    let days = match calendar {
        Some(c) => c.clone(),
        None => trading_days(trades),
    };
    let mut groups: BTreeMap<SampleKey, Vec<TradeRecord>> = BTreeMap::new();
    for t in trades {
        let key = SampleKey {
            instrument: t.instrument.clone(),
            venue: t.venue,
            month: Month::of(t.timestamp.date()),
        };
        groups.entry(key).or_default().push(t.clone());
    }
    groups
        .iter()
        .map(|(key, ts)| {
            let month_days: BTreeSet<NaiveDate> =
                days.iter().copied().filter(|d| key.month.contains(*d)).collect();
            assign(ts, key, session, &month_days)
        })
        .collect()
}
