//! Identity tracking across monthly code scrambles, and two persistence
//! tests: the consecutive-month correlation regression and the count of
//! minority-cluster memberships against a Poisson-binomial null.
//!
//! Codes are linked through limit orders that rest in the book over a month
//! boundary. Such an order keeps its id while the submitting institution's
//! code changes, so every order id seen on both sides implies one link.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::cluster::ClusterCut;
use crate::ingest::{Month, TradeRecord, Venue};
use crate::spectra::CorrelationResult;
use crate::{seed, Error, Result};

/// An order id seen in two consecutive months, with the code that held it
/// last before the boundary and first after it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct RestingOrder {
    pub order_id: String,
    pub before: String,
    pub after: String,
}

impl RestingOrder {
    pub fn new(order_id: &str, before: &str, after: &str) -> Self {
        RestingOrder {
            order_id: order_id.into(),
            before: before.into(),
            after: after.into(),
        }
    }
}

/// Resting orders of one instrument's on-book trades across `boundary`,
/// sorted by order id.
pub fn resting_orders(
    trades: &[TradeRecord],
    instrument: &str,
    boundary: (Month, Month),
) -> Vec<RestingOrder> {
    let mut before: BTreeMap<&str, (chrono::NaiveDateTime, &str)> = BTreeMap::new();
    let mut after: BTreeMap<&str, (chrono::NaiveDateTime, &str)> = BTreeMap::new();
    for t in trades {
        if t.instrument != instrument || t.venue != Venue::OnBook {
            continue;
        }
        let Some(id) = t.order_id.as_deref() else {
            continue;
        };
        let month = Month::of(t.timestamp.date());
        let entry = (t.timestamp, t.institution.as_str());
        if month == boundary.0 {
            let e = before.entry(id).or_insert(entry);
            if t.timestamp >= e.0 {
                *e = entry;
            }
        } else if month == boundary.1 {
            let e = after.entry(id).or_insert(entry);
            if t.timestamp < e.0 {
                *e = entry;
            }
        }
    }
    before
        .iter()
        .filter_map(|(id, (_, b))| after.get(id).map(|(_, a)| RestingOrder::new(id, b, a)))
        .collect()
}

/// Code links across one month boundary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkMap {
    pub boundary: (Month, Month),
    /// Old code to new code; injective.
    pub links: BTreeMap<String, String>,
    /// Supporting orders per old code.
    pub evidence: BTreeMap<String, usize>,
    /// Orders whose implied link was not kept.
    pub conflicts: Vec<RestingOrder>,
}

impl LinkMap {
    pub fn get(&self, old: &str) -> Option<&str> {
        self.links.get(old).map(String::as_str)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_link_maps(w, std::slice::from_ref(self))
    }
}

/// Majority vote per old code; a tied vote keeps nothing. Two old codes
/// pointing at the same new code keep only the better supported one, and
/// neither on equal support.
pub fn link_codes(boundary: (Month, Month), orders: &[RestingOrder]) -> LinkMap {
    let mut votes: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for o in orders {
        *votes
            .entry(o.before.as_str())
            .or_default()
            .entry(o.after.as_str())
            .or_default() += 1;
    }
    let mut chosen: BTreeMap<&str, (&str, usize)> = BTreeMap::new();
    for (old, cands) in &votes {
        let best = cands.values().copied().max().unwrap_or(0);
        let mut top = cands.iter().filter(|(_, &c)| c == best);
        let first = top.next();
        if let (Some((new, &c)), None) = (first, top.next()) {
            chosen.insert(old, (new, c));
        }
    }
    let mut by_new: BTreeMap<&str, Vec<(&str, usize)>> = BTreeMap::new();
    for (old, (new, c)) in &chosen {
        by_new.entry(new).or_default().push((old, *c));
    }
    let mut links = BTreeMap::new();
    let mut evidence = BTreeMap::new();
    for (new, olds) in by_new {
        let best = olds.iter().map(|&(_, c)| c).max().unwrap_or(0);
        let winners: Vec<_> = olds.iter().filter(|&&(_, c)| c == best).collect();
        if let [&(old, c)] = winners[..] {
            links.insert(old.to_string(), new.to_string());
            evidence.insert(old.to_string(), c);
        }
    }
    let conflicts = orders
        .iter()
        .filter(|o| links.get(&o.before) != Some(&o.after))
        .cloned()
        .collect();
    LinkMap {
        boundary,
        links,
        evidence,
        conflicts,
    }
}

/// Link maps for every pair of consecutive months in `months`.
pub fn link_months(trades: &[TradeRecord], instrument: &str, months: &[Month]) -> Vec<LinkMap> {
    months
        .windows(2)
        .filter(|w| w[0].next() == w[1])
        .map(|w| {
            let b = (w[0], w[1]);
            link_codes(b, &resting_orders(trades, instrument, b))
        })
        .collect()
}

pub fn write_link_maps<W: Write>(w: W, maps: &[LinkMap]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "kind",
        "from_month",
        "to_month",
        "old_code",
        "new_code",
        "evidence",
        "order_id",
    ])?;
    for m in maps {
        let (a, b) = (m.boundary.0.to_string(), m.boundary.1.to_string());
        for (old, new) in &m.links {
            wtr.write_record([
                "link",
                &a,
                &b,
                old,
                new,
                &m.evidence[old].to_string(),
                "",
            ])?;
        }
        for o in &m.conflicts {
            wtr.write_record(["conflict", &a, &b, &o.before, &o.after, "", &o.order_id])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// One institution followed through consecutive months.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Track {
    pub start_month: Month,
    /// Code in each month from `start_month` on.
    pub codes: Vec<String>,
}

impl Track {
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn months(&self) -> impl Iterator<Item = (Month, &str)> {
        let mut m = self.start_month;
        self.codes.iter().map(move |c| {
            let cur = m;
            m = m.next();
            (cur, c.as_str())
        })
    }
}

/// Composes boundary maps into maximal tracks of two or more months, ordered
/// by start month and then first code. Maps must be sorted by boundary; a
/// gap between boundaries ends every track.
pub fn chain_links(maps: &[LinkMap]) -> Vec<Track> {
    let mut tracks = Vec::new();
    for (i, map) in maps.iter().enumerate() {
        let prev = i
            .checked_sub(1)
            .map(|p| &maps[p])
            .filter(|p| p.boundary.1 == map.boundary.0);
        let continued: BTreeSet<&str> = prev
            .map(|p| p.links.values().map(String::as_str).collect())
            .unwrap_or_default();
        for (old, new) in &map.links {
            if continued.contains(old.as_str()) {
                continue;
            }
            let mut codes = vec![old.clone(), new.clone()];
            let mut j = i + 1;
            while j < maps.len() && maps[j].boundary.0 == maps[j - 1].boundary.1 {
                match maps[j].get(codes.last().expect("non-empty")) {
                    Some(next) => codes.push(next.to_string()),
                    None => break,
                }
                j += 1;
            }
            tracks.push(Track {
                start_month: map.boundary.0,
                codes,
            });
        }
    }
    tracks
}

/// Correlations of one institution pair in consecutive months.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersistencePair {
    pub from_month: Month,
    /// Codes in the earlier month.
    pub code_i: String,
    pub code_j: String,
    pub c1: f64,
    pub c2: f64,
}

/// Every pair of linked institutions present in both months' correlation
/// matrices, for every boundary with correlations on both sides.
pub fn persistence_pairs(corrs: &[CorrelationResult], maps: &[LinkMap]) -> Vec<PersistencePair> {
    let by_month: BTreeMap<Month, &CorrelationResult> =
        corrs.iter().map(|c| (c.key.month, c)).collect();
    let mut out = Vec::new();
    for map in maps {
        let (Some(a), Some(b)) = (by_month.get(&map.boundary.0), by_month.get(&map.boundary.1))
        else {
            continue;
        };
        let present: Vec<(&str, usize, usize)> = map
            .links
            .iter()
            .filter_map(|(old, new)| Some((old.as_str(), a.index_of(old)?, b.index_of(new)?)))
            .collect();
        for (x, &(ci, ai, bi)) in present.iter().enumerate() {
            for &(cj, aj, bj) in &present[x + 1..] {
                out.push(PersistencePair {
                    from_month: map.boundary.0,
                    code_i: ci.to_string(),
                    code_j: cj.to_string(),
                    c1: a.rho.get(ai, aj),
                    c2: b.rho.get(bi, bj),
                });
            }
        }
    }
    out
}

pub fn write_pairs<W: Write>(w: W, pairs: &[PersistencePair]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["from_month", "code_i", "code_j", "c1", "c2"])?;
    for p in pairs {
        wtr.write_record([
            p.from_month.to_string(),
            p.code_i.clone(),
            p.code_j.clone(),
            format!("{:.12}", p.c1),
            format!("{:.12}", p.c2),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Least-squares fit of `c2 = alpha + beta c1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionResult {
    pub alpha: f64,
    pub beta: f64,
    pub se_alpha: f64,
    pub se_beta: f64,
    pub p_alpha: f64,
    pub p_beta: f64,
    pub r2: f64,
    pub n_pairs: usize,
}

fn two_sided(coef: f64, se: f64, df: f64) -> f64 {
    if se == 0.0 {
        return if coef == 0.0 { 1.0 } else { 0.0 };
    }
    let t = (coef / se).abs();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t)).clamp(0.0, 1.0)
}

pub fn ols(pairs: &[(f64, f64)]) -> Result<RegressionResult> {
    let n = pairs.len();
    if n < 3 {
        return Err(Error::TooFewPairs(n));
    }
    let nf = n as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateRegressor);
    }
    let beta = sxy / sxx;
    let alpha = my - beta * mx;
    let ssr: f64 = pairs
        .iter()
        .map(|&(x, y)| {
            let e = y - alpha - beta * x;
            e * e
        })
        .sum();
    let df = nf - 2.0;
    let s2 = ssr / df;
    let se_beta = (s2 / sxx).sqrt();
    let se_alpha = (s2 * (1.0 / nf + mx * mx / sxx)).sqrt();
    let r2 = if ssr == 0.0 || syy == 0.0 {
        1.0
    } else {
        (1.0 - ssr / syy).clamp(0.0, 1.0)
    };
    Ok(RegressionResult {
        alpha,
        beta,
        se_alpha,
        se_beta,
        p_alpha: two_sided(alpha, se_alpha, df),
        p_beta: two_sided(beta, se_beta, df),
        r2,
        n_pairs: n,
    })
}

impl RegressionResult {
    /// `value ± se (p)`, the cell format of the regression table.
    pub fn cell(coef: f64, se: f64, p: f64) -> String {
        format!("{coef:.3} ± {se:.3} ({p:.2})")
    }
}

/// One row per instrument: formatted cells followed by the raw numbers.
pub fn write_regression_table<W: Write>(w: W, rows: &[(String, RegressionResult)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "Stock",
        "Intercept",
        "Slope",
        "R²",
        "n_pairs",
        "alpha",
        "se_alpha",
        "p_alpha",
        "beta",
        "se_beta",
        "p_beta",
        "r2",
    ])?;
    for (name, r) in rows {
        wtr.write_record([
            name.clone(),
            RegressionResult::cell(r.alpha, r.se_alpha, r.p_alpha),
            RegressionResult::cell(r.beta, r.se_beta, r.p_beta),
            format!("{:.3}", r.r2),
            r.n_pairs.to_string(),
            format!("{:.12e}", r.alpha),
            format!("{:.12e}", r.se_alpha),
            format!("{:.12e}", r.p_alpha),
            format!("{:.12e}", r.beta),
            format!("{:.12e}", r.se_beta),
            format!("{:.12e}", r.p_beta),
            format!("{:.12e}", r.r2),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Active codes and minority members of one month's two-cluster cut.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthClusters {
    pub month: Month,
    pub active: BTreeSet<String>,
    pub minority: BTreeSet<String>,
}

impl MonthClusters {
    /// `None` unless the cut has exactly two clusters.
    pub fn from_cut(month: Month, codes: &[String], cut: &ClusterCut) -> Option<Self> {
        let members = cut.minority_members()?;
        Some(MonthClusters {
            month,
            active: codes.iter().cloned().collect(),
            minority: members.iter().map(|&i| codes[i].clone()).collect(),
        })
    }

    /// Chance of landing in the minority, `mu / nu`.
    pub fn p(&self) -> f64 {
        self.minority.len() as f64 / self.active.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinorityOptions {
    /// Tracks must be strictly longer than this many months.
    pub min_track_months: usize,
    /// Skip months whose minority is a single institution.
    pub exclude_singleton_minority: bool,
}

impl Default for MinorityOptions {
    fn default() -> Self {
        MinorityOptions {
            min_track_months: 12,
            exclude_singleton_minority: false,
        }
    }
}

/// Minority record of one tracked institution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinorityCount {
    /// Code in the first month of the track.
    pub code: String,
    pub start_month: Month,
    pub track_months: usize,
    /// Months in the minority.
    pub x: usize,
    /// `p_k` over the months the institution was clustered.
    pub p: Vec<f64>,
}

impl MinorityCount {
    pub fn k_active(&self) -> usize {
        self.p.len()
    }
}

pub fn minority_counts(
    months: &[MonthClusters],
    tracks: &[Track],
    opts: MinorityOptions,
) -> Vec<MinorityCount> {
    let by_month: BTreeMap<Month, &MonthClusters> = months.iter().map(|m| (m.month, m)).collect();
    let mut out = Vec::new();
    for track in tracks.iter().filter(|t| t.len() > opts.min_track_months) {
        let mut x = 0;
        let mut p = Vec::new();
        for (month, code) in track.months() {
            let Some(mc) = by_month.get(&month) else {
                continue;
            };
            if !mc.active.contains(code) {
                continue;
            }
            if opts.exclude_singleton_minority && mc.minority.len() == 1 {
                continue;
            }
            if mc.minority.contains(code) {
                x += 1;
            }
            p.push(mc.p());
        }
        if p.is_empty() {
            continue;
        }
        out.push(MinorityCount {
            code: track.codes[0].clone(),
            start_month: track.start_month,
            track_months: track.len(),
            x,
            p,
        });
    }
    out
}

pub const EXACT_MAX_K: usize = 64;

/// Distribution of the number of successes of independent Bernoulli trials.
pub fn exact_poisson_binomial(p: &[f64]) -> Result<Vec<f64>> {
    if p.len() > EXACT_MAX_K {
        return Err(Error::ExactTooLarge {
            k: p.len(),
            max: EXACT_MAX_K,
        });
    }
    if let Some(&bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidProbability(bad));
    }
    let mut pmf = vec![0.0; p.len() + 1];
    pmf[0] = 1.0;
    for (k, &pk) in p.iter().enumerate() {
        for j in (0..=k + 1).rev() {
            let stay = pmf[j] * (1.0 - pk);
            let up = if j > 0 { pmf[j - 1] * pk } else { 0.0 };
            pmf[j] = stay + up;
        }
    }
    Ok(pmf)
}

/// `P(X >= x)` from a pmf.
pub fn upper_tail(pmf: &[f64], x: usize) -> f64 {
    pmf.iter().skip(x).sum::<f64>().min(1.0)
}

/// `1 - P(X >= x)`, exactly.
pub fn exact_prob_nonrandom(x: usize, p: &[f64]) -> Result<f64> {
    Ok(1.0 - upper_tail(&exact_poisson_binomial(p)?, x))
}

pub const MIN_TRIALS: usize = 10_000;
const CHUNK: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloTail {
    /// Estimate of `P(X >= x)`.
    pub tail: f64,
    pub std_error: f64,
    pub trials: usize,
}

impl MonteCarloTail {
    pub fn prob_nonrandom(&self) -> f64 {
        1.0 - self.tail
    }
}

/// Simulated `P(X >= x)` for independent monthly draws with chances `p`.
/// Trials run in chunks with their own derived seeds, so the result does
/// not depend on the thread count.
pub fn minority_tail_mc(x: usize, p: &[f64], trials: usize, seed: u64) -> Result<MonteCarloTail> {
    if trials < MIN_TRIALS {
        return Err(Error::Config(format!(
            "minority trials {trials} below {MIN_TRIALS}"
        )));
    }
    if let Some(&bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidProbability(bad));
    }
    let chunks = trials.div_ceil(CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed::rng(seed, &[c as u64]);
            let len = CHUNK.min(trials - c * CHUNK);
            (0..len)
                .filter(|_| p.iter().filter(|&&pk| rng.random::<f64>() < pk).count() >= x)
                .count()
        })
        .sum();
    let tail = hits as f64 / trials as f64;
    Ok(MonteCarloTail {
        tail,
        std_error: (tail * (1.0 - tail) / trials as f64).sqrt(),
        trials,
    })
}

/// Simulated probability of non-random minority membership, `1 - P(X >= x)`.
pub fn minority_probability(x: usize, p: &[f64], trials: usize, seed: u64) -> Result<f64> {
    Ok(minority_tail_mc(x, p, trials, seed)?.prob_nonrandom())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinorityRow {
    pub count: MinorityCount,
    pub prob_nonrandom: f64,
    /// Exact value when the month count allows it.
    pub prob_nonrandom_exact: Option<f64>,
}

/// Minority test for every counted institution. Each institution's
/// simulation is seeded from its code and track start.
pub fn minority_report(counts: &[MinorityCount], trials: usize, seed: u64) -> Result<Vec<MinorityRow>> {
    counts
        .iter()
        .map(|c| {
            let s = seed::derive(
                seed,
                &[seed::label_hash(&c.code), c.start_month.ordinal() as u64],
            );
            let mc = minority_tail_mc(c.x, &c.p, trials, s)?;
            let exact = match exact_prob_nonrandom(c.x, &c.p) {
                Ok(v) => Some(v),
                Err(Error::ExactTooLarge { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(MinorityRow {
                count: c.clone(),
                prob_nonrandom: mc.prob_nonrandom(),
                prob_nonrandom_exact: exact,
            })
        })
        .collect()
}

pub fn write_minority_table<W: Write>(w: W, rows: &[MinorityRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "code",
        "times_in_minority",
        "out_of_possible",
        "prob_nonrandom",
        "prob_nonrandom_exact",
        "track_start",
        "track_months",
        "p_k",
    ])?;
    for r in rows {
        let c = &r.count;
        wtr.write_record([
            c.code.clone(),
            c.x.to_string(),
            c.k_active().to_string(),
            format!("{:.4}", r.prob_nonrandom),
            r.prob_nonrandom_exact
                .map_or_else(String::new, |v| format!("{v:.4}")),
            c.start_month.to_string(),
            c.track_months.to_string(),
            c.p
                .iter()
                .map(|v| format!("{v:.6}"))
                .collect::<Vec<_>>()
                .join(";"),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(s: &str) -> Month {
        s.parse().unwrap()
    }

    fn boundary() -> (Month, Month) {
        (m("2004-01"), m("2004-02"))
    }

    #[test]
    fn single_resting_order_links_codes() {
        let map = link_codes(boundary(), &[RestingOrder::new("AT82F31E13", "2331", "4142")]);
        assert_eq!(map.get("2331"), Some("4142"));
        assert_eq!(map.evidence["2331"], 1);
        assert!(map.conflicts.is_empty());
    }

    #[test]
    fn agreeing_orders_add_evidence() {
        let orders = [RestingOrder::new("o1", "A", "B"), RestingOrder::new("o2", "A", "B")];
        assert_eq!(link_codes(boundary(), &orders).evidence["A"], 2);
    }

    #[test]
    fn majority_vote_reports_conflicts() {
        let orders = [
            RestingOrder::new("o1", "A", "B"),
            RestingOrder::new("o2", "A", "C"),
            RestingOrder::new("o3", "A", "B"),
        ];
        let map = link_codes(boundary(), &orders);
        assert_eq!(map.get("A"), Some("B"));
        assert_eq!(map.evidence["A"], 2);
        assert_eq!(map.conflicts, vec![RestingOrder::new("o2", "A", "C")]);
    }

    #[test]
    fn tied_vote_drops_both() {
        let orders = [RestingOrder::new("o1", "A", "B"), RestingOrder::new("o2", "A", "C")];
        let map = link_codes(boundary(), &orders);
        assert!(map.links.is_empty());
        assert_eq!(map.conflicts.len(), 2);
    }

    #[test]
    fn injectivity_keeps_better_supported_link() {
        let orders = [
            RestingOrder::new("o1", "A", "Z"),
            RestingOrder::new("o2", "A", "Z"),
            RestingOrder::new("o3", "B", "Z"),
            RestingOrder::new("o4", "C", "Y"),
            RestingOrder::new("o5", "D", "Y"),
        ];
        let map = link_codes(boundary(), &orders);
        assert_eq!(map.links.len(), 1);
        assert_eq!(map.get("A"), Some("Z"));
        assert_eq!(map.conflicts.len(), 3);
    }

    #[test]
    fn empty_input_gives_empty_map() {
        let map = link_codes(boundary(), &[]);
        assert!(map.links.is_empty() && map.conflicts.is_empty());
    }

    fn map_of(b: (Month, Month), pairs: &[(&str, &str)]) -> LinkMap {
        let orders: Vec<_> = pairs
            .iter()
            .enumerate()
            .map(|(i, (a, c))| RestingOrder::new(&format!("o{i}"), a, c))
            .collect();
        link_codes(b, &orders)
    }

    #[test]
    fn chaining() {
        let jan = m("2004-01");
        let maps = [
            map_of((jan, jan.next()), &[("A", "B"), ("X", "Y")]),
            map_of((jan.next(), jan.next().next()), &[("B", "C")]),
        ];
        let tracks = chain_links(&maps);
        assert_eq!(
            tracks,
            vec![
                Track {
                    start_month: jan,
                    codes: vec!["A".into(), "B".into(), "C".into()]
                },
                Track {
                    start_month: jan,
                    codes: vec!["X".into(), "Y".into()]
                },
            ]
        );
    }

    #[test]
    fn missing_middle_link_splits_track() {
        let jan = m("2004-01");
        let feb = jan.next();
        let mar = feb.next();
        let maps = [
            map_of((jan, feb), &[("A", "B")]),
            map_of((feb, mar), &[]),
            map_of((mar, mar.next()), &[("C", "D")]),
        ];
        let tracks = chain_links(&maps);
        assert_eq!(tracks.len(), 2);
        assert_eq!(tracks[1].start_month, mar);
    }

    #[test]
    fn resting_orders_from_trades() {
        let t = |ts: &str, code: &str, id: &str| TradeRecord {
            timestamp: crate::ingest::parse_timestamp(ts).unwrap(),
            instrument: "VOD".into(),
            venue: Venue::OnBook,
            institution: code.into(),
            signed_volume: 1.0,
            order_id: Some(id.into()),
        };
        let trades = vec![
            t("2004-01-30 10:00", "2331", "AT82F31E13"),
            t("2004-02-02 09:30", "4142", "AT82F31E13"),
            t("2004-01-30 11:00", "1111", "ONLYJAN"),
        ];
        let r = resting_orders(&trades, "VOD", boundary());
        assert_eq!(r, vec![RestingOrder::new("AT82F31E13", "2331", "4142")]);
        assert!(resting_orders(&trades, "AZN", boundary()).is_empty());
    }

    #[test]
    fn ols_exact_line() {
        let pairs: Vec<_> = (0..10)
            .map(|i| {
                let x = i as f64 * 0.25 - 1.0;
                (x, 0.1 + 0.5 * x)
            })
            .collect();
        let r = ols(&pairs).unwrap();
        assert!((r.alpha - 0.1).abs() < 1e-12);
        assert!((r.beta - 0.5).abs() < 1e-12);
        assert!((r.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ols_hand_points() {
        // x̄ = 1.5, ȳ = 1, Sxx = 5, Sxy = 3, Syy = 2, SSR = 0.2
        let r = ols(&[(0.0, 0.0), (1.0, 1.0), (2.0, 1.0), (3.0, 2.0)]).unwrap();
        assert!((r.beta - 0.6).abs() < 1e-12);
        assert!((r.alpha - 0.1).abs() < 1e-12);
        assert!((r.r2 - 0.9).abs() < 1e-12);
        assert!((r.se_beta - (0.1f64 / 5.0).sqrt()).abs() < 1e-12);
        assert!((r.se_alpha - (0.1f64 * (0.25 + 2.25 / 5.0)).sqrt()).abs() < 1e-12);
        assert_eq!(r.n_pairs, 4);
    }

    #[test]
    fn ols_errors() {
        assert!(matches!(ols(&[(0.0, 1.0), (1.0, 2.0)]), Err(Error::TooFewPairs(2))));
        assert!(matches!(
            ols(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]),
            Err(Error::DegenerateRegressor)
        ));
    }

    #[test]
    fn regression_table_format() {
        let r = ols(&[(0.0, 0.0), (1.0, 1.0), (2.0, 1.0), (3.0, 2.0)]).unwrap();
        let mut buf = Vec::new();
        write_regression_table(&mut buf, &[("VOD".into(), r)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("Stock,Intercept,Slope,R²,"));
        assert!(lines.next().unwrap().starts_with("VOD,0.100 ± 0.265 ("));
    }

    #[test]
    fn pmf_by_hand() {
        assert_eq!(exact_poisson_binomial(&[1.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(exact_poisson_binomial(&[0.5, 0.5]).unwrap(), vec![0.25, 0.5, 0.25]);
        let pmf = exact_poisson_binomial(&[0.2, 0.7, 0.4]).unwrap();
        // P(1) = .2*.3*.6 + .8*.7*.6 + .8*.3*.4, P(2) = .2*.7*.6 + .2*.3*.4 + .8*.7*.4
        for (a, b) in pmf.iter().zip([0.144, 0.468, 0.332, 0.056]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(matches!(
            exact_poisson_binomial(&[0.5; 65]),
            Err(Error::ExactTooLarge { k: 65, max: 64 })
        ));
        assert!(exact_poisson_binomial(&[1.5]).is_err());
    }

    #[test]
    fn two_fair_coins() {
        assert_eq!(exact_prob_nonrandom(2, &[0.5, 0.5]).unwrap(), 0.75);
        let mc = minority_tail_mc(2, &[0.5, 0.5], 100_000, 3).unwrap();
        assert!((mc.tail - 0.25).abs() < 3.0 * mc.std_error);
    }

    #[test]
    fn central_binomial_tail() {
        // P(X >= 16) = 1/2 + C(32,16)/2^33
        let want = 0.5 + 601_080_390.0 / 8_589_934_592.0;
        let tail = upper_tail(&exact_poisson_binomial(&[0.5; 32]).unwrap(), 16);
        assert!((tail - want).abs() < 1e-14);
        assert!((1.0 - tail - 0.43).abs() < 0.005);
    }

    #[test]
    fn mc_is_seeded() {
        let p = [0.1, 0.3, 0.2, 0.6];
        let a = minority_tail_mc(2, &p, 20_000, 9).unwrap();
        assert_eq!(a, minority_tail_mc(2, &p, 20_000, 9).unwrap());
        assert!(minority_tail_mc(2, &p, 999, 9).is_err());
    }

    #[test]
    fn counting_over_tracks() {
        let start = m("2004-01");
        let mut months = Vec::new();
        let mut codes = Vec::new();
        let mut mo = start;
        for k in 0..14 {
            let code = format!("c{k}");
            let active: BTreeSet<String> = [code.clone(), "x".into(), "y".into(), "z".into()]
                .into_iter()
                .collect();
            let minority = if k % 2 == 0 {
                [code.clone(), "x".into()].into_iter().collect()
            } else {
                ["x".to_string(), "y".into()].into_iter().collect()
            };
            months.push(MonthClusters {
                month: mo,
                active,
                minority,
            });
            codes.push(code);
            mo = mo.next();
        }
        let long = Track {
            start_month: start,
            codes: codes.clone(),
        };
        let short = Track {
            start_month: start,
            codes: codes[..12].to_vec(),
        };
        let counts = minority_counts(&months, &[long, short], MinorityOptions::default());
        assert_eq!(counts.len(), 1);
        assert_eq!(counts[0].x, 7);
        assert_eq!(counts[0].k_active(), 14);
        assert!(counts[0].p.iter().all(|&p| p == 0.5));
    }
}
