use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stratcorr::bootstrap::{bootstrap_band, write_bands};
use stratcorr::cluster::{distance_matrix, linkage, Linkage};
use stratcorr::ingest::{partition, write_trades, Month, Venue};
use stratcorr::persistence::{write_link_maps, write_minority_table, write_pairs, write_regression_table};
use stratcorr::report::{
    analyze, cmd_pipeline, load_trades, sample_stem, sanitize, score, write_paths, write_table, RunConfig,
    ENV_OUT_DIR, ENV_SEED,
};
use stratcorr::spectra::{
    correlate, eigen_report, pooled_spectrum, write_eigen_reports, MatrixKind,
};
use stratcorr::strategy::{build_strategy_matrix, ActivityThreshold, StrategyMatrix};
use stratcorr::synth::{generate, GroundTruth, SynthConfig};
use stratcorr::{Error, Result};

#[derive(Parser)]
#[command(name = "stratcorr", version, about = "Strategy correlation analysis of exchange members")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every stage and write all artifacts with a manifest.
    Pipeline(RunArgs),
    /// Trades to strategy matrices, filter audits and cumulative paths.
    Discretize(RunArgs),
    /// Correlation and tail-probability matrices of strategy matrices.
    Correlate(MatrixArgs),
    /// Eigenvalue reports and the pooled spectrum of strategy matrices.
    Eigen(MatrixArgs),
    /// Row-shuffle bootstrap bands of strategy matrices.
    Bootstrap(MatrixArgs),
    /// Dendrograms and leaf-ordered correlation matrices.
    Cluster(MatrixArgs),
    /// Link maps, consecutive-month pairs and the regression table.
    Persist(RunArgs),
    /// Minority-membership test.
    Minority(RunArgs),
    /// Generate synthetic trades and their ground truth.
    Synth(SynthArgs),
    /// Score a run on synthetic trades against the ground truth.
    Score(ScoreArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trade file; repeatable. Replaces the configured inputs.
    #[arg(long = "input")]
    inputs: Vec<PathBuf>,
    #[arg(long, env = ENV_OUT_DIR)]
    out: Option<PathBuf>,
    #[arg(long, env = ENV_SEED)]
    seed: Option<u64>,
    #[arg(long = "instrument")]
    instruments: Vec<String>,
    #[arg(long = "venue")]
    venues: Vec<Venue>,
    #[arg(long = "month")]
    months: Vec<Month>,
    #[arg(long)]
    bucket_minutes: Option<u32>,
    /// Activity threshold as a fraction, e.g. 1/3.
    #[arg(long)]
    threshold: Option<ActivityThreshold>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    ranks: Option<usize>,
    #[arg(long)]
    block_len: Option<usize>,
    #[arg(long, value_parser = parse_linkage)]
    linkage: Option<Linkage>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    exclude_singleton_minority: bool,
}

#[derive(Args)]
struct MatrixArgs {
    /// Strategy matrix files written by `discretize`.
    #[arg(long = "matrix", required = true)]
    matrices: Vec<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// TOML synthetic-data configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = ENV_OUT_DIR)]
    out: Option<PathBuf>,
    #[arg(long, env = ENV_SEED)]
    seed: Option<u64>,
    #[arg(long)]
    months: Option<usize>,
    #[arg(long)]
    factor_strength: Option<f64>,
    #[arg(long)]
    activity: Option<f64>,
    #[arg(long)]
    n_crowd: Option<usize>,
    #[arg(long)]
    n_dealer: Option<usize>,
    #[arg(long)]
    resting_rate: Option<f64>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    truth: PathBuf,
    #[command(flatten)]
    run: RunArgs,
}

fn parse_linkage(s: &str) -> std::result::Result<Linkage, String> {
    match s {
        "complete" => Ok(Linkage::Complete),
        "single" => Ok(Linkage::Single),
        _ => Err(format!("unknown linkage '{s}' (complete, single)")),
    }
}

impl RunArgs {
    /// Config file, then environment, then flags.
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if !self.inputs.is_empty() {
            cfg.inputs = self.inputs.clone();
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if !self.instruments.is_empty() {
            cfg.instruments = self.instruments.clone();
        }
        if !self.venues.is_empty() {
            cfg.venues = self.venues.clone();
        }
        if !self.months.is_empty() {
            cfg.months = self.months.clone();
        }
        if let Some(b) = self.bucket_minutes {
            cfg.session.bucket_minutes = b;
        }
        if let Some(t) = self.threshold {
            cfg.activity_threshold = t;
        }
        if let Some(r) = self.replicates {
            cfg.bootstrap.replicates = r;
        }
        if let Some(k) = self.ranks {
            cfg.bootstrap.ranks = k;
        }
        if let Some(b) = self.block_len {
            cfg.bootstrap.block_len = b;
        }
        if let Some(l) = self.linkage {
            cfg.linkage = l;
        }
        if let Some(t) = self.trials {
            cfg.minority.trials = t;
        }
        if self.exclude_singleton_minority {
            cfg.minority.exclude_singleton_minority = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read_matrices(paths: &[PathBuf]) -> Result<Vec<StrategyMatrix>> {
    paths
        .iter()
        .map(|p| StrategyMatrix::read_text(fs::File::open(p)?))
        .collect()
}

fn discretize(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let trades = load_trades(&cfg.inputs)?;
    let header = cfg.header();
    for sample in partition(&trades, &cfg.session, None)? {
        let stem = sample_stem(&sample.key);
        match build_strategy_matrix(&sample, cfg.activity_threshold) {
            Ok((m, audit)) => {
                write_table(&cfg.out_dir, &format!("strategy/{stem}.csv"), &header, |w| {
                    m.write_text(w)
                })?;
                write_table(&cfg.out_dir, &format!("cumulative/{stem}.csv"), &header, |w| {
                    write_paths(&m, w)
                })?;
                write_table(&cfg.out_dir, &format!("audit/{stem}.csv"), &header, |w| {
                    audit.write_csv(w)
                })?;
            }
            Err(Error::EmptyMatrix(msg)) => eprintln!("skipped {stem}: {msg}"),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

fn correlate_cmd(args: &MatrixArgs) -> Result<()> {
    let cfg = args.run.resolve()?;
    let header = cfg.header();
    for m in read_matrices(&args.matrices)? {
        let c = correlate(&m)?;
        let stem = sample_stem(&m.key);
        write_table(&cfg.out_dir, &format!("correlation/{stem}.csv"), &header, |w| {
            c.write_matrix(w, MatrixKind::Rho)
        })?;
        write_table(
            &cfg.out_dir,
            &format!("correlation/{stem}_tail_prob.csv"),
            &header,
            |w| c.write_matrix(w, MatrixKind::TailProb),
        )?;
    }
    Ok(())
}

fn eigen_cmd(args: &MatrixArgs) -> Result<()> {
    let cfg = args.run.resolve()?;
    let reports = read_matrices(&args.matrices)?
        .iter()
        .map(|m| eigen_report(&correlate(m)?))
        .collect::<Result<Vec<_>>>()?;
    let header = cfg.header();
    write_table(&cfg.out_dir, "eigen_reports.csv", &header, |w| {
        write_eigen_reports(w, &reports)
    })?;
    let pooled = pooled_spectrum(&reports, cfg.histogram)?;
    write_table(&cfg.out_dir, "pooled_density.csv", &header, |w| pooled.write_csv(w))
}

fn bootstrap_cmd(args: &MatrixArgs) -> Result<()> {
    let cfg = args.run.resolve()?;
    let bands = read_matrices(&args.matrices)?
        .iter()
        .map(|m| bootstrap_band(m, &cfg.bootstrap_config()))
        .collect::<Result<Vec<_>>>()?;
    write_table(&cfg.out_dir, "bootstrap_bands.csv", &cfg.header(), |w| {
        write_bands(w, &bands)
    })
}

fn cluster_cmd(args: &MatrixArgs) -> Result<()> {
    let cfg = args.run.resolve()?;
    let header = cfg.header();
    for m in read_matrices(&args.matrices)? {
        let c = correlate(&m)?;
        let d = linkage(&distance_matrix(&c.rho), c.codes.clone(), cfg.linkage)?;
        let stem = sample_stem(&m.key);
        write_table(&cfg.out_dir, &format!("dendrogram/{stem}.csv"), &header, |w| {
            d.write_csv(w)
        })?;
        let ordered = c.reordered(&d.leaf_order);
        write_table(
            &cfg.out_dir,
            &format!("correlation/{stem}_ordered.csv"),
            &header,
            |w| ordered.write_matrix(w, MatrixKind::Rho),
        )?;
    }
    Ok(())
}

fn persist_cmd(args: &RunArgs, minority: bool) -> Result<()> {
    let cfg = args.resolve()?;
    let result = analyze(&load_trades(&cfg.inputs)?, &cfg)?;
    let header = cfg.header();
    if minority {
        for p in &result.persistence {
            write_table(
                &cfg.out_dir,
                &format!("minority_{}.csv", sanitize(&p.instrument)),
                &header,
                |w| write_minority_table(w, &p.minority),
            )?;
        }
        return Ok(());
    }
    let maps: Vec<_> = result.persistence.iter().flat_map(|p| p.maps.clone()).collect();
    write_table(&cfg.out_dir, "link_maps.csv", &header, |w| write_link_maps(w, &maps))?;
    for p in &result.persistence {
        write_table(&cfg.out_dir, &format!("pairs_{}.csv", sanitize(&p.instrument)), &header, |w| {
            write_pairs(w, &p.pairs)
        })?;
        if let Some(note) = &p.regression_note {
            eprintln!("regression {}: {note}", p.instrument);
        }
    }
    let rows: Vec<_> = result
        .persistence
        .iter()
        .filter_map(|p| p.regression.map(|r| (p.instrument.clone(), r)))
        .collect();
    write_table(&cfg.out_dir, "regression.csv", &header, |w| {
        write_regression_table(w, &rows)
    })
}

fn synth_cmd(args: &SynthArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => toml::from_str::<SynthConfig>(&fs::read_to_string(p)?)
            .map_err(|e| Error::Config(e.to_string()))?,
        None => SynthConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(m) = args.months {
        cfg.months = m;
    }
    if let Some(f) = args.factor_strength {
        cfg.factor_strength = f;
    }
    if let Some(a) = args.activity {
        cfg.activity = a;
    }
    if let Some(n) = args.n_crowd {
        cfg.n_crowd = n;
    }
    if let Some(n) = args.n_dealer {
        cfg.n_dealer = n;
    }
    if let Some(r) = args.resting_rate {
        cfg.resting_order_rate = r;
    }
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("synth"));
    let out = generate(&cfg)?;
    let header = format!("# synth seed={}\n", cfg.seed);
    write_table(&out_dir, "trades.csv", &header, |w| write_trades(w, &out.trades))?;
    let mut text = serde_json::to_string_pretty(&out.truth)?;
    text.push('\n');
    fs::create_dir_all(&out_dir)?;
    fs::write(out_dir.join("truth.json"), text)?;
    Ok(())
}

fn score_cmd(args: &ScoreArgs) -> Result<()> {
    let cfg = args.run.resolve()?;
    let truth = GroundTruth::read_json(fs::File::open(&args.truth)?)?;
    let result = analyze(&load_trades(&cfg.inputs)?, &cfg)?;
    let card = score(&result, &truth, cfg.minority.flag_level);
    fs::create_dir_all(&cfg.out_dir)?;
    let mut text = serde_json::to_string_pretty(&card)?;
    text.push('\n');
    fs::write(Path::new(&cfg.out_dir).join("scorecard.json"), text)?;
    println!(
        "link precision {:.4}, recall {:.4}, false joins {}, mean Rand {:.4}",
        card.link_precision,
        card.link_recall,
        card.track_false_joins,
        card.months.iter().map(|m| m.rand_index).sum::<f64>() / card.months.len().max(1) as f64
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Pipeline(a) => {
            let cfg = a.resolve()?;
            let m = cmd_pipeline(&cfg)?;
            let files: usize = m.artifacts.iter().map(|a| a.files.len()).sum();
            println!(
                "wrote {files} artifact files to {} ({} samples skipped)",
                cfg.out_dir.display(),
                m.skipped_samples.len()
            );
            Ok(())
        }
        Cmd::Discretize(a) => discretize(&a),
        Cmd::Correlate(a) => correlate_cmd(&a),
        Cmd::Eigen(a) => eigen_cmd(&a),
        Cmd::Bootstrap(a) => bootstrap_cmd(&a),
        Cmd::Cluster(a) => cluster_cmd(&a),
        Cmd::Persist(a) => persist_cmd(&a, false),
        Cmd::Minority(a) => persist_cmd(&a, true),
        Cmd::Synth(a) => synth_cmd(&a),
        Cmd::Score(a) => score_cmd(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
