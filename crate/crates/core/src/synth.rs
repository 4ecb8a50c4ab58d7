//! Synthetic order flow with a planted one-factor structure.
//!
//! Every hour bucket draws a fair factor sign `f_t`. An active crowd member
//! follows `f_t` with probability `factor_strength` and otherwise picks a
//! sign at random; dealers do the same against `-f_t`. Codes are redrawn
//! every month, and a few orders per institution rest in the book across each
//! month boundary so that identities can be recovered from order ids.
//!
//! All randomness is drawn from streams derived from the master seed and the
//! (month, institution) coordinates, so months generate in parallel and the
//! output is identical for a given seed.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, LogNormal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{rand_index, LabeledCut};
use crate::ingest::{Month, SessionConfig, TradeRecord, Venue};
use crate::persistence::{LinkMap, MinorityRow, Track};
use crate::{seed, Error, Result};

const TAG_FACTOR: u64 = 1;
const TAG_CODES: u64 = 2;
const TAG_INST: u64 = 3;
const TAG_REST: u64 = 4;
const TAG_IDS: u64 = 5;

/// Distribution of the number of resting orders per institution and boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountModel {
    /// `Binomial(ceil(rate) + 1, rate / (ceil(rate) + 1))`.
    #[default]
    Binomial,
    Poisson,
}

/// A crowd subgroup following its own independent factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondFactor {
    /// The first `members` crowd institutions join the subgroup.
    pub members: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_crowd: usize,
    pub n_dealer: usize,
    pub months: usize,
    pub start_month: Month,
    pub days_per_month: usize,
    pub factor_strength: f64,
    /// Chance that an institution trades in a given bucket.
    pub activity: f64,
    /// Median trade size.
    pub volume_scale: f64,
    /// Log-scale spread of trade sizes.
    pub volume_log_sd: f64,
    pub resting_order_rate: f64,
    pub resting_count: CountModel,
    pub second_factor: Option<SecondFactor>,
    /// Per institution and day, chance of one extra trade outside the session.
    pub edge_trade_prob: f64,
    pub instrument: String,
    pub venue: Venue,
    pub session: SessionConfig,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_crowd: 70,
            n_dealer: 12,
            months: 32,
            start_month: Month::new(2000, 1).expect("valid month"),
            days_per_month: 20,
            factor_strength: 0.6,
            activity: 0.7,
            volume_scale: 1000.0,
            volume_log_sd: 1.0,
            resting_order_rate: 2.0,
            resting_count: CountModel::Binomial,
            second_factor: None,
            edge_trade_prob: 0.0,
            instrument: "SYN".into(),
            venue: Venue::OnBook,
            session: SessionConfig::default(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn n(&self) -> usize {
        self.n_crowd + self.n_dealer
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_crowd == 0 {
            return bad("n_crowd must be positive".into());
        }
        if self.n_dealer > 0 && self.n_dealer >= self.n_crowd {
            return bad(format!(
                "n_dealer {} must be below n_crowd {}",
                self.n_dealer, self.n_crowd
            ));
        }
        if self.n() > 10_000 {
            return bad("at most 10000 institutions fit in four-digit codes".into());
        }
        if self.months == 0 {
            return bad("months must be positive".into());
        }
        if !(1..=20).contains(&self.days_per_month) {
            return bad(format!("days_per_month {} outside 1..=20", self.days_per_month));
        }
        if !(0.0..=1.0).contains(&self.factor_strength) {
            return bad(format!("factor_strength {} outside [0, 1]", self.factor_strength));
        }
        if !(self.activity > 0.0 && self.activity <= 1.0) {
            return bad(format!("activity {} outside (0, 1]", self.activity));
        }
        if !(self.volume_scale > 0.0) || !(self.volume_log_sd >= 0.0) {
            return bad("volume_scale must be positive and volume_log_sd nonnegative".into());
        }
        if !(self.resting_order_rate >= 0.0 && self.resting_order_rate.is_finite()) {
            return bad(format!("resting_order_rate {}", self.resting_order_rate));
        }
        if !(0.0..=1.0).contains(&self.edge_trade_prob) {
            return bad(format!("edge_trade_prob {}", self.edge_trade_prob));
        }
        if let Some(sf) = self.second_factor {
            if sf.members == 0 || sf.members > self.n_crowd {
                return bad(format!("second factor members {} outside 1..=n_crowd", sf.members));
            }
        }
        if self.instrument.is_empty() {
            return bad("instrument must be non-empty".into());
        }
        self.session.validate()
    }

    pub fn group_of(&self, inst: usize) -> Group {
        if inst >= self.n_crowd {
            Group::Dealer
        } else if self.second_factor.is_some_and(|sf| inst < sf.members) {
            Group::Subgroup
        } else {
            Group::Crowd
        }
    }

    fn month(&self, index: usize) -> Month {
        (0..index).fold(self.start_month, |m, _| m.next())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Crowd,
    /// Crowd members on the second factor.
    Subgroup,
    Dealer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthInstitution {
    pub id: String,
    pub group: Group,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthMonth {
    pub month: Month,
    pub days: Vec<NaiveDate>,
    /// Code of each institution, by institution index.
    pub codes: Vec<String>,
    pub factor: Vec<i8>,
    pub second_factor: Option<Vec<i8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthResting {
    pub from_month: Month,
    pub institution: usize,
    pub order_id: String,
}

/// Everything the generator knows: identities across scrambles, groups and
/// factor series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub institutions: Vec<TruthInstitution>,
    pub months: Vec<TruthMonth>,
    pub resting: Vec<TruthResting>,
}

impl GroundTruth {
    pub fn month_index(&self, month: Month) -> Option<usize> {
        self.months.iter().position(|m| m.month == month)
    }

    /// Institution behind `code` in `month`.
    pub fn institution_of(&self, month: Month, code: &str) -> Option<usize> {
        let m = &self.months[self.month_index(month)?];
        m.codes.iter().position(|c| c == code)
    }

    pub fn is_dealer(&self, inst: usize) -> bool {
        self.institutions[inst].group == Group::Dealer
    }

    /// Institutions with at least one resting order over the boundary
    /// starting at `from_month`.
    pub fn resting_institutions(&self, from_month: Month) -> BTreeSet<usize> {
        self.resting
            .iter()
            .filter(|r| r.from_month == from_month)
            .map(|r| r.institution)
            .collect()
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn read_json<R: std::io::Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    /// Time-ordered, ties by institution code.
    pub trades: Vec<TradeRecord>,
    pub truth: GroundTruth,
    /// Planted sign per month, institution and bucket.
    pub signs: Vec<Vec<Vec<i8>>>,
}

/// The first `count` weekdays of `month`.
pub fn weekdays(month: Month, count: usize) -> Vec<NaiveDate> {
    let mut d = month.first_day();
    let mut out = Vec::with_capacity(count);
    while out.len() < count && month.contains(d) {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

fn sign<R: Rng>(rng: &mut R) -> i8 {
    if rng.random_bool(0.5) {
        1
    } else {
        -1
    }
}

/// Unique ten-digit hex ids: an odd multiplier is a bijection modulo 2^40.
fn order_id(counter: u64, offset: u64) -> String {
    const MASK: u64 = (1 << 40) - 1;
    format!(
        "{:010X}",
        counter.wrapping_mul(0x5_DEEC_E66D).wrapping_add(offset) & MASK
    )
}

struct MonthDraw {
    truth: TruthMonth,
    signs: Vec<Vec<i8>>,
    /// (institution, trade), time ordered.
    trades: Vec<(usize, TradeRecord)>,
}

fn trade_volume<R: Rng>(dist: &LogNormal<f64>, rng: &mut R) -> f64 {
    ((dist.sample(rng) * 100.0).round() / 100.0).max(1.0)
}

fn draw_month(cfg: &SynthConfig, mi: usize, id_offset: u64) -> MonthDraw {
    let month = cfg.month(mi);
    let days = weekdays(month, cfg.days_per_month);
    let per_day = cfg.session.buckets_per_day() as usize;
    let t = days.len() * per_day;
    let n = cfg.n();
    let mo = mi as u64;

    let mut frng = seed::rng(cfg.seed, &[TAG_FACTOR, mo]);
    let factor: Vec<i8> = (0..t).map(|_| sign(&mut frng)).collect();
    let second: Option<Vec<i8>> = cfg
        .second_factor
        .map(|_| (0..t).map(|_| sign(&mut frng)).collect());

    let mut crng = seed::rng(cfg.seed, &[TAG_CODES, mo]);
    let codes: Vec<String> = sample(&mut crng, 10_000, n)
        .into_iter()
        .map(|c| format!("{c:04}"))
        .collect();

    let volume = LogNormal::new(cfg.volume_scale.ln(), cfg.volume_log_sd).expect("valid volume");
    let bucket_secs = cfg.session.bucket_minutes as i64 * 60;
    let mut signs = vec![vec![0i8; t]; n];
    let mut trades = Vec::new();
    for (inst, row) in signs.iter_mut().enumerate() {
        let mut rng: ChaCha8Rng = seed::rng(cfg.seed, &[TAG_INST, mo, inst as u64]);
        let group = cfg.group_of(inst);
        let mut push = |ts, v: f64| {
            trades.push((
                inst,
                TradeRecord {
                    timestamp: ts,
                    instrument: cfg.instrument.clone(),
                    venue: cfg.venue,
                    institution: codes[inst].clone(),
                    signed_volume: v,
                    order_id: None,
                },
            ))
        };
        for (b, cell) in row.iter_mut().enumerate() {
            if !rng.random_bool(cfg.activity) {
                continue;
            }
            let target = match group {
                Group::Crowd => factor[b],
                Group::Subgroup => second.as_ref().expect("second factor")[b],
                Group::Dealer => -factor[b],
            };
            let s = if rng.random_bool(cfg.factor_strength) {
                target
            } else {
                sign(&mut rng)
            };
            *cell = s;
            let start = days[b / per_day].and_time(cfg.session.bucket_start((b % per_day) as u32));
            let count = rng.random_range(1..=3usize);
            let mut offsets: Vec<i64> = (0..count).map(|_| rng.random_range(0..bucket_secs)).collect();
            offsets.sort_unstable();
            let mut net = 0.0;
            for (k, off) in offsets.into_iter().enumerate() {
                let mut v = trade_volume(&volume, &mut rng);
                if k + 1 == count {
                    // the closing trade leaves the bucket's net with sign s
                    v = s as f64 * (v + (-(s as f64) * net).max(0.0));
                } else {
                    v *= sign(&mut rng) as f64;
                }
                net += v;
                push(start + Duration::seconds(off), v);
            }
        }
        for day in &days {
            if cfg.edge_trade_prob > 0.0 && rng.random_bool(cfg.edge_trade_prob) {
                let before = rng.random_bool(0.5);
                let base = if before {
                    cfg.session.open - Duration::hours(1)
                } else {
                    cfg.session.close
                };
                let ts = day.and_time(base) + Duration::seconds(rng.random_range(0..3600));
                if ts.date() == *day {
                    let v = trade_volume(&volume, &mut rng) * sign(&mut rng) as f64;
                    push(ts, v);
                }
            }
        }
    }
    trades.sort_by(|a, b| {
        (a.1.timestamp, &a.1.institution).cmp(&(b.1.timestamp, &b.1.institution))
    });
    if cfg.venue == Venue::OnBook {
        for (k, (_, tr)) in trades.iter_mut().enumerate() {
            tr.order_id = Some(order_id(((mo + 1) << 28) | k as u64, id_offset));
        }
    }
    MonthDraw {
        truth: TruthMonth {
            month,
            days,
            codes,
            factor,
            second_factor: second,
        },
        signs,
        trades,
    }
}

fn resting_count<R: Rng>(cfg: &SynthConfig, rng: &mut R) -> usize {
    let rate = cfg.resting_order_rate;
    if rate == 0.0 {
        return 0;
    }
    match cfg.resting_count {
        CountModel::Binomial => {
            let n = rate.ceil() as u64 + 1;
            Binomial::new(n, rate / n as f64).expect("p in [0, 1]").sample(rng) as usize
        }
        CountModel::Poisson => Poisson::new(rate).expect("positive rate").sample(rng) as usize,
    }
}

/// Carries some of each institution's orders across the boundary after
/// month `a`: a trade late in month `a` and a same-signed trade early in
/// month `a + 1` are given the same order id.
fn plant_resting(
    cfg: &SynthConfig,
    mi: usize,
    a: &MonthDraw,
    b: &mut MonthDraw,
) -> Vec<TruthResting> {
    let mut by_inst_a: Vec<Vec<usize>> = vec![Vec::new(); cfg.n()];
    for (k, (inst, _)) in a.trades.iter().enumerate() {
        by_inst_a[*inst].push(k);
    }
    let mut by_inst_b: Vec<Vec<usize>> = vec![Vec::new(); cfg.n()];
    for (k, (inst, _)) in b.trades.iter().enumerate() {
        by_inst_b[*inst].push(k);
    }
    let mut out = Vec::new();
    for inst in 0..cfg.n() {
        let mut rng = seed::rng(cfg.seed, &[TAG_REST, mi as u64, inst as u64]);
        let want = resting_count(cfg, &mut rng);
        if want == 0 {
            continue;
        }
        // candidates from the last day backwards, at most one day's worth
        let late: Vec<usize> = by_inst_a[inst].iter().rev().copied().take(want * 4).collect();
        let picks = sample(&mut rng, late.len(), want.min(late.len())).into_vec();
        let mut used = BTreeSet::new();
        let mut picked: Vec<usize> = picks.into_iter().map(|p| late[p]).collect();
        picked.sort_unstable();
        for ka in picked {
            let (_, ta) = &a.trades[ka];
            let s = ta.signed_volume.signum();
            let Some(&kb) = by_inst_b[inst]
                .iter()
                .find(|&&kb| !used.contains(&kb) && b.trades[kb].1.signed_volume.signum() == s)
            else {
                continue;
            };
            used.insert(kb);
            let id = ta.order_id.clone().expect("on-book trade");
            b.trades[kb].1.order_id = Some(id.clone());
            out.push(TruthResting {
                from_month: a.truth.month,
                institution: inst,
                order_id: id,
            });
        }
    }
    out.sort_by(|x, y| (x.institution, &x.order_id).cmp(&(y.institution, &y.order_id)));
    out
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let id_offset = seed::derive(cfg.seed, &[TAG_IDS]);
    let mut draws: Vec<MonthDraw> = (0..cfg.months)
        .into_par_iter()
        .map(|mi| draw_month(cfg, mi, id_offset))
        .collect();
    let mut resting = Vec::new();
    if cfg.venue == Venue::OnBook {
        for mi in 0..cfg.months.saturating_sub(1) {
            let (head, tail) = draws.split_at_mut(mi + 1);
            resting.extend(plant_resting(cfg, mi, &head[mi], &mut tail[0]));
        }
    }
    let institutions = (0..cfg.n())
        .map(|i| TruthInstitution {
            id: format!("I{i:04}"),
            group: cfg.group_of(i),
        })
        .collect();
    let mut trades = Vec::new();
    let mut months = Vec::new();
    let mut signs = Vec::new();
    for d in draws {
        trades.extend(d.trades.into_iter().map(|(_, t)| t));
        months.push(d.truth);
        signs.push(d.signs);
    }
    Ok(SynthOutput {
        trades,
        truth: GroundTruth {
            config: cfg.clone(),
            institutions,
            months,
            resting,
        },
        signs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthScore {
    pub month: Month,
    pub n: usize,
    /// Agreement of the two-cluster cut with dealer / non-dealer labels.
    pub rand_index: f64,
}

/// Pipeline outputs judged against the planted truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scorecard {
    pub months: Vec<MonthScore>,
    pub links_kept: usize,
    pub links_correct: usize,
    /// Institutions present on both sides, summed over boundaries.
    pub links_possible: usize,
    pub link_precision: f64,
    pub link_recall: f64,
    /// Share of possible links with at least one planted resting order.
    pub resting_coverage: f64,
    pub tracks: usize,
    /// Consecutive code pairs in tracks that belong to different institutions.
    pub track_false_joins: usize,
    pub dealers_tested: usize,
    pub dealers_flagged: usize,
    pub dealer_hit_rate: Option<f64>,
}

impl Scorecard {
    /// Share of months whose Rand index reaches `level`.
    pub fn rand_share(&self, level: f64) -> f64 {
        if self.months.is_empty() {
            return 0.0;
        }
        self.months.iter().filter(|m| m.rand_index >= level).count() as f64
            / self.months.len() as f64
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        1.0
    } else {
        a as f64 / b as f64
    }
}

/// Institution behind a whole track, or `None` if the codes disagree.
fn track_identity(truth: &GroundTruth, track: &Track) -> (Option<usize>, usize) {
    let ids: Vec<Option<usize>> = track
        .months()
        .map(|(m, c)| truth.institution_of(m, c))
        .collect();
    let joins = ids.windows(2).filter(|w| w[0].is_none() || w[0] != w[1]).count();
    let id = if joins == 0 { ids[0] } else { None };
    (id, joins)
}

pub fn ground_truth_compare(
    truth: &GroundTruth,
    cuts: &[LabeledCut],
    maps: &[LinkMap],
    tracks: &[Track],
    minority: &[MinorityRow],
    flag_level: f64,
) -> Scorecard {
    let mut months = Vec::new();
    for lc in cuts {
        let planted: Vec<usize> = lc
            .codes
            .iter()
            .map(|c| {
                truth
                    .institution_of(lc.key.month, c)
                    .map_or(2, |i| truth.is_dealer(i) as usize)
            })
            .collect();
        months.push(MonthScore {
            month: lc.key.month,
            n: lc.codes.len(),
            rand_index: rand_index(&lc.cut.labels, &planted),
        });
    }

    let (mut kept, mut correct, mut possible, mut covered) = (0, 0, 0, 0);
    for map in maps {
        let (Some(a), Some(_)) = (
            truth.month_index(map.boundary.0),
            truth.month_index(map.boundary.1),
        ) else {
            continue;
        };
        possible += truth.months[a].codes.len();
        covered += truth.resting_institutions(map.boundary.0).len();
        for (old, new) in &map.links {
            kept += 1;
            let i = truth.institution_of(map.boundary.0, old);
            if i.is_some() && i == truth.institution_of(map.boundary.1, new) {
                correct += 1;
            }
        }
    }

    let mut false_joins = 0;
    for t in tracks {
        false_joins += track_identity(truth, t).1;
    }

    let (mut tested, mut flagged) = (0, 0);
    for row in minority {
        let track = Track {
            start_month: row.count.start_month,
            codes: vec![row.count.code.clone()],
        };
        if let (Some(i), _) = track_identity(truth, &track) {
            if truth.is_dealer(i) {
                tested += 1;
                if row.prob_nonrandom > flag_level {
                    flagged += 1;
                }
            }
        }
    }

    Scorecard {
        months,
        links_kept: kept,
        links_correct: correct,
        links_possible: possible,
        link_precision: ratio(correct, kept),
        link_recall: ratio(correct, possible),
        resting_coverage: ratio(covered, possible),
        tracks: tracks.len(),
        track_false_joins: false_joins,
        dealers_tested: tested,
        dealers_flagged: flagged,
        dealer_hit_rate: (tested > 0).then(|| flagged as f64 / tested as f64),
    }
}

/// Codes per month of every institution, as tracks over the whole horizon.
pub fn true_tracks(truth: &GroundTruth) -> Vec<Track> {
    let Some(first) = truth.months.first() else {
        return Vec::new();
    };
    (0..truth.institutions.len())
        .map(|i| Track {
            start_month: first.month,
            codes: truth.months.iter().map(|m| m.codes[i].clone()).collect(),
        })
        .collect()
}

/// Planted sign matrix rows of one month keyed by code.
pub fn signs_by_code(out: &SynthOutput, month_index: usize) -> BTreeMap<String, Vec<i8>> {
    let m = &out.truth.months[month_index];
    m.codes
        .iter()
        .cloned()
        .zip(out.signs[month_index].iter().cloned())
        .collect()
}
