//! Run configuration, the end-to-end pipeline and artifact emission.
//!
//! Every table written by [`cmd_pipeline`] starts with one comment line
//!
//! ```text
//! # config_hash=<sha256 of the effective configuration> seed=<seed>
//! ```
//!
//! which every reader in this crate skips. The output directory is excluded
//! from the hash, so two runs of one configuration into different directories
//! produce byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bootstrap::{bootstrap_band, write_bands, BootstrapBand, BootstrapConfig};
use crate::cluster::{distance_matrix, linkage, Dendrogram, LabeledCut, Linkage};
use crate::ingest::{parse_trades, partition, write_rejects, Month, SessionConfig, TradeRecord, Venue};
use crate::persistence::{
    chain_links, link_months, minority_counts, minority_report, ols, persistence_pairs,
    write_link_maps, write_minority_table, write_pairs, write_regression_table, LinkMap,
    MinorityOptions, MinorityRow, MonthClusters, PersistencePair, RegressionResult, Track,
    MIN_TRIALS,
};
use crate::spectra::{
    correlate, eigen_report, pooled_spectrum, significant_share, write_eigen_reports,
    CorrelationResult, EigenReport, HistogramGrid, MatrixKind, PooledSpectrum,
};
use crate::strategy::{build_strategy_matrix, ActivityThreshold, FilterAudit, StrategyMatrix};
use crate::synth::{ground_truth_compare, GroundTruth, Scorecard};
use crate::{seed, Error, Result};

pub const ENV_OUT_DIR: &str = "STRATCORR_OUT_DIR";
pub const ENV_SEED: &str = "STRATCORR_SEED";

/// Artifact classes in emission order.
pub const ARTIFACT_CLASSES: [&str; 10] = [
    "strategy_matrices",
    "cumulative_paths",
    "correlation_matrices",
    "eigen_reports",
    "pooled_density",
    "bootstrap_bands",
    "dendrograms",
    "link_maps",
    "regression",
    "minority",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSettings {
    pub replicates: usize,
    pub ranks: usize,
    pub block_len: usize,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        let d = BootstrapConfig::default();
        BootstrapSettings {
            replicates: d.replicates,
            ranks: d.ranks,
            block_len: d.block_len,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinoritySettings {
    /// Tracks must be strictly longer than this many months.
    pub min_track_months: usize,
    pub exclude_singleton_minority: bool,
    pub trials: usize,
    /// Non-random probability above which an institution counts as flagged.
    pub flag_level: f64,
}

impl Default for MinoritySettings {
    fn default() -> Self {
        let o = MinorityOptions::default();
        MinoritySettings {
            min_track_months: o.min_track_months,
            exclude_singleton_minority: o.exclude_singleton_minority,
            trials: 100_000,
            flag_level: 0.95,
        }
    }
}

impl MinoritySettings {
    pub fn options(&self) -> MinorityOptions {
        MinorityOptions {
            min_track_months: self.min_track_months,
            exclude_singleton_minority: self.exclude_singleton_minority,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    /// Empty keeps all.
    pub instruments: Vec<String>,
    pub venues: Vec<Venue>,
    pub months: Vec<Month>,
    pub session: SessionConfig,
    pub activity_threshold: ActivityThreshold,
    pub bootstrap: BootstrapSettings,
    pub linkage: Linkage,
    pub minority: MinoritySettings,
    /// Level for the share of significant pairwise correlations.
    pub significance_alpha: f64,
    pub histogram: HistogramGrid,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: Vec::new(),
            instruments: Vec::new(),
            venues: Vec::new(),
            months: Vec::new(),
            session: SessionConfig::default(),
            activity_threshold: ActivityThreshold::default(),
            bootstrap: BootstrapSettings::default(),
            linkage: Linkage::Complete,
            minority: MinoritySettings::default(),
            significance_alpha: 0.05,
            histogram: HistogramGrid::default(),
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// Applies `STRATCORR_OUT_DIR` and `STRATCORR_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(dir) = std::env::var(ENV_OUT_DIR) {
            self.out_dir = PathBuf::from(dir);
        }
        if let Ok(s) = std::env::var(ENV_SEED) {
            self.seed = s
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{ENV_SEED}={s} is not an integer")))?;
        }
        Ok(())
    }

    pub fn bootstrap_config(&self) -> BootstrapConfig {
        BootstrapConfig {
            replicates: self.bootstrap.replicates,
            ranks: self.bootstrap.ranks,
            block_len: self.bootstrap.block_len,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.session.validate()?;
        self.bootstrap_config().validate()?;
        if self.activity_threshold.den == 0 || self.activity_threshold.num > self.activity_threshold.den
        {
            return Err(Error::Config(format!(
                "activity threshold {} outside [0, 1]",
                self.activity_threshold
            )));
        }
        if self.minority.trials < MIN_TRIALS {
            return Err(Error::Config(format!(
                "minority trials {} below {MIN_TRIALS}",
                self.minority.trials
            )));
        }
        if !(self.minority.flag_level > 0.0 && self.minority.flag_level < 1.0) {
            return Err(Error::Config("flag_level must lie in (0, 1)".into()));
        }
        if !(self.significance_alpha > 0.0 && self.significance_alpha < 1.0) {
            return Err(Error::Config("significance_alpha must lie in (0, 1)".into()));
        }
        if self.histogram.bins == 0 || !(self.histogram.hi > self.histogram.lo) {
            return Err(Error::Config("histogram needs hi > lo and bins > 0".into()));
        }
        Ok(())
    }

    /// SHA-256 of the configuration with the output directory blanked.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        hex(&Sha256::digest(text.as_bytes()))
    }

    pub fn header(&self) -> String {
        format!("# config_hash={} seed={}\n", self.hash(), self.seed)
    }

    fn keeps(&self, key: &crate::ingest::SampleKey) -> bool {
        (self.instruments.is_empty() || self.instruments.contains(&key.instrument))
            && (self.venues.is_empty() || self.venues.contains(&key.venue))
            && (self.months.is_empty() || self.months.contains(&key.month))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything computed for one (instrument, venue, month).
#[derive(Debug, Clone)]
pub struct SampleOutput {
    pub matrix: StrategyMatrix,
    pub audit: FilterAudit,
    pub corr: CorrelationResult,
    pub eigen: EigenReport,
    pub band: BootstrapBand,
    pub dendrogram: Dendrogram,
    /// The two-cluster cut.
    pub cut: LabeledCut,
    pub significant_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub sample: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct InstrumentPersistence {
    pub instrument: String,
    pub maps: Vec<LinkMap>,
    pub tracks: Vec<Track>,
    pub pairs: Vec<PersistencePair>,
    pub regression: Option<RegressionResult>,
    pub regression_note: Option<String>,
    pub minority: Vec<MinorityRow>,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub samples: Vec<SampleOutput>,
    pub skipped: Vec<Skipped>,
    /// One pooled spectrum per (instrument, venue).
    pub pooled: Vec<(String, Venue, PooledSpectrum)>,
    /// On-book instruments only.
    pub persistence: Vec<InstrumentPersistence>,
}

/// Sample errors that mean "not enough data here" rather than a failure.
fn is_shortfall(e: &Error) -> bool {
    matches!(
        e,
        Error::EmptyMatrix(_)
            | Error::EmptySample(_)
            | Error::DegenerateCorrelation { .. }
            | Error::InsufficientSample { .. }
            | Error::TrivialDendrogram(_)
    )
}

pub fn analyze_sample(sample: &crate::ingest::MonthSample, cfg: &RunConfig) -> Result<SampleOutput> {
    let (matrix, audit) = build_strategy_matrix(sample, cfg.activity_threshold)?;
    let corr = correlate(&matrix)?;
    let eigen = eigen_report(&corr)?;
    let band = bootstrap_band(&matrix, &cfg.bootstrap_config())?;
    let dendrogram = linkage(&distance_matrix(&corr.rho), corr.codes.clone(), cfg.linkage)?;
    let cut = LabeledCut {
        key: corr.key.clone(),
        codes: corr.codes.clone(),
        cut: dendrogram.cut_k(2)?,
    };
    let significant_share = significant_share(&corr, cfg.significance_alpha);
    Ok(SampleOutput {
        matrix,
        audit,
        corr,
        eigen,
        band,
        dendrogram,
        cut,
        significant_share,
    })
}

fn analyze_persistence(
    trades: &[TradeRecord],
    instrument: &str,
    months: &[Month],
    samples: &[&SampleOutput],
    cfg: &RunConfig,
) -> Result<InstrumentPersistence> {
    let maps = link_months(trades, instrument, months);
    let tracks = chain_links(&maps);
    let corrs: Vec<CorrelationResult> = samples.iter().map(|s| s.corr.clone()).collect();
    let pairs = persistence_pairs(&corrs, &maps);
    let xy: Vec<(f64, f64)> = pairs.iter().map(|p| (p.c1, p.c2)).collect();
    let (regression, regression_note) = match ols(&xy) {
        Ok(r) => (Some(r), None),
        Err(e @ (Error::TooFewPairs(_) | Error::DegenerateRegressor)) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let clusters: Vec<MonthClusters> = samples
        .iter()
        .filter_map(|s| MonthClusters::from_cut(s.cut.key.month, &s.cut.codes, &s.cut.cut))
        .collect();
    let counts = minority_counts(&clusters, &tracks, cfg.minority.options());
    let minority = minority_report(
        &counts,
        cfg.minority.trials,
        seed::derive(cfg.seed, &[seed::label_hash(instrument)]),
    )?;
    Ok(InstrumentPersistence {
        instrument: instrument.to_string(),
        maps,
        tracks,
        pairs,
        regression,
        regression_note,
        minority,
    })
}

/// Runs every analysis stage in memory.
pub fn analyze(trades: &[TradeRecord], cfg: &RunConfig) -> Result<PipelineResult> {
    cfg.validate()?;
    let all = partition(trades, &cfg.session, None)?;
    let kept: Vec<_> = all.into_iter().filter(|s| cfg.keeps(&s.key)).collect();
    if kept.is_empty() {
        return Err(Error::EmptySample("no sample matches the filters".into()));
    }
    let outcomes: Vec<Result<SampleOutput>> =
        kept.par_iter().map(|s| analyze_sample(s, cfg)).collect();
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for (s, r) in kept.iter().zip(outcomes) {
        match r {
            Ok(o) => samples.push(o),
            Err(e) if is_shortfall(&e) => skipped.push(Skipped {
                sample: s.key.to_string(),
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }

    let mut groups: BTreeMap<(String, Venue), Vec<EigenReport>> = BTreeMap::new();
    for s in &samples {
        groups
            .entry((s.eigen.key.instrument.clone(), s.eigen.key.venue))
            .or_default()
            .push(s.eigen.clone());
    }
    let mut pooled = Vec::new();
    for ((inst, venue), reports) in groups {
        pooled.push((inst, venue, pooled_spectrum(&reports, cfg.histogram)?));
    }

    let mut months_by_inst: BTreeMap<&str, Vec<Month>> = BTreeMap::new();
    for s in kept.iter().filter(|s| s.key.venue == Venue::OnBook) {
        months_by_inst
            .entry(s.key.instrument.as_str())
            .or_default()
            .push(s.key.month);
    }
    let mut persistence = Vec::new();
    for (inst, months) in months_by_inst {
        let on_book: Vec<&SampleOutput> = samples
            .iter()
            .filter(|s| s.matrix.key.instrument == inst && s.matrix.key.venue == Venue::OnBook)
            .collect();
        persistence.push(analyze_persistence(trades, inst, &months, &on_book, cfg)?);
    }
    Ok(PipelineResult {
        samples,
        skipped,
        pooled,
        persistence,
    })
}

/// Scorecard for the instrument the synthetic truth was generated for.
pub fn score(result: &PipelineResult, truth: &GroundTruth, flag_level: f64) -> Scorecard {
    let inst = &truth.config.instrument;
    let cuts: Vec<LabeledCut> = result
        .samples
        .iter()
        .filter(|s| &s.cut.key.instrument == inst && s.cut.key.venue == truth.config.venue)
        .map(|s| s.cut.clone())
        .collect();
    let persist = result.persistence.iter().find(|p| &p.instrument == inst);
    let (maps, tracks, minority) = match persist {
        Some(p) => (&p.maps[..], &p.tracks[..], &p.minority[..]),
        None => (&[][..], &[][..], &[][..]),
    };
    ground_truth_compare(truth, &cuts, maps, tracks, minority, flag_level)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
    pub records: usize,
    pub rejects: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactClass {
    pub name: String,
    pub complete: bool,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    /// `complete` or `failed`.
    pub status: String,
    pub error: Option<String>,
    pub inputs: Vec<InputDigest>,
    pub artifacts: Vec<ArtifactClass>,
    pub supplementary: Vec<String>,
    pub skipped_samples: Vec<Skipped>,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn is_complete(&self) -> bool {
        self.status == "complete" && self.artifacts.iter().all(|a| a.complete)
    }
}

/// Writes header-prefixed tables under one root and keeps the inventory.
struct Emitter {
    root: PathBuf,
    header: String,
    files: BTreeMap<&'static str, Vec<String>>,
    done: Vec<&'static str>,
    supplementary: Vec<String>,
}

/// Writes `header` followed by the table produced by `f` to `root/rel`.
pub fn write_table(
    root: &Path,
    rel: &str,
    header: &str,
    f: impl FnOnce(&mut Vec<u8>) -> Result<()>,
) -> Result<()> {
    let mut buf = header.as_bytes().to_vec();
    f(&mut buf)?;
    let path = root.join(rel);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, buf)?;
    Ok(())
}

impl Emitter {
    fn file(&self, rel: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        write_table(&self.root, rel, &self.header, f)
    }

    fn table(
        &mut self,
        class: &'static str,
        rel: String,
        f: impl FnOnce(&mut Vec<u8>) -> Result<()>,
    ) -> Result<()> {
        self.file(&rel, f)?;
        self.files.entry(class).or_default().push(rel);
        Ok(())
    }

    fn extra(&mut self, rel: String, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        self.file(&rel, f)?;
        self.supplementary.push(rel);
        Ok(())
    }

    fn finish(&mut self, class: &'static str) {
        self.done.push(class);
    }
}

/// File-name-safe form of an instrument name.
pub fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn sample_stem(key: &crate::ingest::SampleKey) -> String {
    format!("{}_{}_{}", sanitize(&key.instrument), key.venue, key.month)
}

pub fn write_paths(m: &StrategyMatrix, w: &mut Vec<u8>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut head = vec!["institution".to_string()];
    head.extend(m.buckets.iter().map(|b| b.to_string()));
    wtr.write_record(&head)?;
    for (code, path) in m.institutions.iter().zip(m.cumulative_paths()) {
        let mut rec = vec![code.clone()];
        rec.extend(path.iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

fn write_sample_summary(samples: &[SampleOutput], w: &mut Vec<u8>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "instrument",
        "venue",
        "month",
        "T",
        "retained",
        "filtered_out",
        "constant_rows",
        "N",
        "lambda_1",
        "band_median",
        "band_std",
        "lambda_1_significant",
        "significant_share",
        "minority_size",
    ])?;
    for s in samples {
        let k = &s.matrix.key;
        wtr.write_record([
            k.instrument.clone(),
            k.venue.to_string(),
            k.month.to_string(),
            s.matrix.t().to_string(),
            s.audit.retained.len().to_string(),
            s.audit.excluded.len().to_string(),
            s.corr.excluded_constant_rows.len().to_string(),
            s.corr.n().to_string(),
            format!("{:.9}", s.eigen.eigenvalues[0]),
            format!("{:.9}", s.band.median[0]),
            format!("{:.9}", s.band.std[0]),
            s.band.significant[0].to_string(),
            format!("{:.6}", s.significant_share),
            s.cut
                .cut
                .minority_members()
                .map_or_else(String::new, |m| m.len().to_string()),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

fn emit(result: &PipelineResult, em: &mut Emitter, notes: &mut Vec<String>) -> Result<()> {
    for s in &result.samples {
        let stem = sample_stem(&s.matrix.key);
        em.table("strategy_matrices", format!("strategy/{stem}.csv"), |w| {
            s.matrix.write_text(w)
        })?;
        em.extra(format!("audit/{stem}.csv"), |w| s.audit.write_csv(w))?;
    }
    em.finish("strategy_matrices");

    for s in &result.samples {
        let stem = sample_stem(&s.matrix.key);
        em.table("cumulative_paths", format!("cumulative/{stem}.csv"), |w| {
            write_paths(&s.matrix, w)
        })?;
    }
    em.finish("cumulative_paths");

    for s in &result.samples {
        let stem = sample_stem(&s.matrix.key);
        let ordered = s.corr.reordered(&s.dendrogram.leaf_order);
        em.table("correlation_matrices", format!("correlation/{stem}.csv"), |w| {
            s.corr.write_matrix(w, MatrixKind::Rho)
        })?;
        em.table(
            "correlation_matrices",
            format!("correlation/{stem}_ordered.csv"),
            |w| ordered.write_matrix(w, MatrixKind::Rho),
        )?;
        em.table(
            "correlation_matrices",
            format!("correlation/{stem}_tail_prob.csv"),
            |w| s.corr.write_matrix(w, MatrixKind::TailProb),
        )?;
    }
    em.finish("correlation_matrices");

    let reports: Vec<EigenReport> = result.samples.iter().map(|s| s.eigen.clone()).collect();
    em.table("eigen_reports", "eigen_reports.csv".into(), |w| {
        write_eigen_reports(w, &reports)
    })?;
    em.finish("eigen_reports");

    for (inst, venue, p) in &result.pooled {
        em.table(
            "pooled_density",
            format!("pooled_density_{}_{venue}.csv", sanitize(inst)),
            |w| p.write_csv(w),
        )?;
    }
    em.finish("pooled_density");

    let bands: Vec<BootstrapBand> = result.samples.iter().map(|s| s.band.clone()).collect();
    em.table("bootstrap_bands", "bootstrap_bands.csv".into(), |w| {
        write_bands(w, &bands)
    })?;
    em.finish("bootstrap_bands");

    for s in &result.samples {
        let stem = sample_stem(&s.matrix.key);
        em.table("dendrograms", format!("dendrogram/{stem}.csv"), |w| {
            s.dendrogram.write_csv(w)
        })?;
    }
    em.finish("dendrograms");

    let maps: Vec<LinkMap> = result
        .persistence
        .iter()
        .flat_map(|p| p.maps.iter().cloned())
        .collect();
    em.table("link_maps", "link_maps.csv".into(), |w| write_link_maps(w, &maps))?;
    em.finish("link_maps");
    for p in &result.persistence {
        em.extra(format!("pairs_{}.csv", sanitize(&p.instrument)), |w| {
            write_pairs(w, &p.pairs)
        })?;
    }

    let rows: Vec<(String, RegressionResult)> = result
        .persistence
        .iter()
        .filter_map(|p| p.regression.map(|r| (p.instrument.clone(), r)))
        .collect();
    for p in &result.persistence {
        if let Some(note) = &p.regression_note {
            notes.push(format!("regression {}: {note}", p.instrument));
        }
    }
    em.table("regression", "regression.csv".into(), |w| {
        write_regression_table(w, &rows)
    })?;
    em.finish("regression");

    for p in &result.persistence {
        em.table("minority", format!("minority_{}.csv", sanitize(&p.instrument)), |w| {
            write_minority_table(w, &p.minority)
        })?;
    }
    em.finish("minority");

    em.extra("samples.csv".into(), |w| write_sample_summary(&result.samples, w))?;
    Ok(())
}

fn read_inputs(cfg: &RunConfig, em: &mut Emitter) -> Result<(Vec<TradeRecord>, Vec<InputDigest>)> {
    let mut trades = Vec::new();
    let mut digests = Vec::new();
    for (i, path) in cfg.inputs.iter().enumerate() {
        let bytes = fs::read(path)?;
        let parsed = parse_trades(&bytes[..])?;
        digests.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex(&Sha256::digest(&bytes)),
            records: parsed.records.len(),
            rejects: parsed.rejects.len(),
        });
        if !parsed.rejects.is_empty() {
            em.extra(format!("rejects_{i}.csv"), |w| {
                write_rejects(w, &parsed.header, &parsed.rejects)
            })?;
        }
        trades.extend(parsed.records);
    }
    Ok((trades, digests))
}

/// Reads the inputs, runs every stage and writes all artifacts plus
/// `manifest.json` into `cfg.out_dir`. On failure the files written so far
/// stay in place and the manifest records the error.
pub fn cmd_pipeline(cfg: &RunConfig) -> Result<Manifest> {
    fs::create_dir_all(&cfg.out_dir)?;
    let mut em = Emitter {
        root: cfg.out_dir.clone(),
        header: cfg.header(),
        files: BTreeMap::new(),
        done: Vec::new(),
        supplementary: Vec::new(),
    };
    let mut digests = Vec::new();
    let mut notes = Vec::new();
    let mut skipped = Vec::new();
    let outcome = (|| -> Result<()> {
        cfg.validate()?;
        let (trades, d) = read_inputs(cfg, &mut em)?;
        digests = d;
        let result = analyze(&trades, cfg)?;
        skipped = result.skipped.clone();
        emit(&result, &mut em, &mut notes)
    })();
    let manifest = Manifest {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        status: if outcome.is_ok() { "complete" } else { "failed" }.into(),
        error: outcome.as_ref().err().map(|e| e.to_string()),
        inputs: digests,
        artifacts: ARTIFACT_CLASSES
            .iter()
            .map(|&name| ArtifactClass {
                name: name.into(),
                complete: em.done.contains(&name),
                files: em.files.get(name).cloned().unwrap_or_default(),
            })
            .collect(),
        supplementary: em.supplementary.clone(),
        skipped_samples: skipped,
        notes,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(cfg.out_dir.join("manifest.json"), text)?;
    outcome.map(|_| manifest)
}

/// Reads trade files into one list, failing on the first unreadable file.
pub fn load_trades(paths: &[PathBuf]) -> Result<Vec<TradeRecord>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(parse_trades(fs::File::open(p)?)?.records);
    }
    Ok(out)
}
