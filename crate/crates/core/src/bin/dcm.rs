use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use log::error;

use dcm::clustering::Init;
use dcm::correlation::Metric;
use dcm::pipeline::report::ReportTable;
use dcm::pipeline::synthetic::{self, SyntheticSpec};
use dcm::pipeline::{self as pl, Manifest, PipelineConfig};
use dcm::text::FormKind;

#[derive(Parser)]
#[command(name = "dcm", version, about = "Decompose, cluster and merge textual features against an event series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter the corpus to the timeframe and region; densify the GSR.
    Ingest(ConfigArgs),
    /// Normalize tweets and count features per day.
    Extract(ConfigArgs),
    /// Score features against the GSR and keep the top K.
    Correlate(ConfigArgs),
    /// Thin SVD of the selected matrix.
    Factorize(ConfigArgs),
    /// k-means over the latent rows and medoid lookup.
    Cluster(ConfigArgs),
    /// Sum member rows into their medoids.
    Merge(ConfigArgs),
    /// Before/after scores and the summary table.
    Report {
        #[command(flatten)]
        config: ConfigArgs,
        /// Combine existing report.csv files into one table instead of running the stage.
        #[arg(long, num_args = 1..)]
        combine: Vec<PathBuf>,
    },
    /// Every stage in order.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Rerun from a manifest written by a previous run.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Generate a synthetic corpus, GSR, ground truth and pipeline config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// TOML file with generator settings.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        magnitude: Option<f64>,
    },
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// TOML pipeline configuration; flags override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    gsr: Option<PathBuf>,
    #[arg(long)]
    start: Option<NaiveDate>,
    #[arg(long)]
    end: Option<NaiveDate>,
    #[arg(long)]
    geo: Vec<String>,
    #[arg(long, value_parser = parse_form)]
    form: Option<FormKind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_parser = parse_metric)]
    metric: Option<Metric>,
    #[arg(long, value_parser = parse_metric)]
    select_metric: Option<Metric>,
    #[arg(long, value_parser = parse_metric, value_delimiter = ',')]
    report_metrics: Vec<Metric>,
    #[arg(long)]
    mi_bins: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    absolute: bool,
    #[arg(long)]
    center_rows: bool,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    lemmas: Option<PathBuf>,
    #[arg(long)]
    stem_rules: Option<PathBuf>,
    #[arg(long, env = "DCM_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    weight_by_sigma: bool,
    #[arg(long)]
    plus_plus: bool,
}

fn parse_form(s: &str) -> Result<FormKind, String> {
    s.parse().map_err(|e: dcm::Error| e.to_string())
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: dcm::Error| e.to_string())
}

impl ConfigArgs {
    fn resolve(&self, base: Option<PipelineConfig>) -> Result<PipelineConfig> {
        let mut cfg = match (&self.config, base) {
            (Some(_), Some(_)) => bail!("--config and --manifest are mutually exclusive"),
            (Some(p), None) => PipelineConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            (None, Some(b)) => b,
            (None, None) => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field.clone() { cfg.$field = v; } )* };
        }
        set!(corpus, gsr, form, n, metric, mi_bins, top_k, min_count, out_dir);
        if self.start.is_some() {
            cfg.start = self.start;
        }
        if self.end.is_some() {
            cfg.end = self.end;
        }
        if self.select_metric.is_some() {
            cfg.select_metric = self.select_metric;
        }
        for (dst, src) in [
            (&mut cfg.stopwords, &self.stopwords),
            (&mut cfg.lemmas, &self.lemmas),
            (&mut cfg.stem_rules, &self.stem_rules),
        ] {
            if src.is_some() {
                *dst = src.clone();
            }
        }
        if !self.geo.is_empty() {
            cfg.geo = self.geo.clone();
        }
        if !self.report_metrics.is_empty() {
            cfg.report_metrics = self.report_metrics.clone();
        }
        cfg.absolute_ranking |= self.absolute;
        cfg.center_rows |= self.center_rows;
        let km = &mut cfg.kmeans;
        if let Some(v) = self.k {
            km.k = v;
        }
        if let Some(v) = self.runs {
            km.runs = v;
        }
        if let Some(v) = self.max_iter {
            km.max_iter = v;
        }
        if let Some(v) = self.seed {
            km.seed = v;
        }
        if self.rank.is_some() {
            km.rank = self.rank;
        }
        km.weight_by_sigma |= self.weight_by_sigma;
        if self.plus_plus {
            km.init = Init::PlusPlus;
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => {
            let s = pl::ingest(&a.resolve(None)?)?;
            println!("{} of {} records kept", s.yielded, s.read);
        }
        Command::Extract(a) => {
            let s = pl::extract(&a.resolve(None)?)?;
            println!("{} features, {} after the min-count filter", s.features, s.kept_after_min_count);
        }
        Command::Correlate(a) => {
            let kept = pl::correlate(&a.resolve(None)?)?;
            println!("{kept} features selected");
        }
        Command::Factorize(a) => {
            let f = pl::factorize_stage(&a.resolve(None)?)?;
            println!("rank {}", f.rank());
        }
        Command::Cluster(a) => {
            let l = pl::cluster(&a.resolve(None)?)?;
            println!("{} clusters", l.cluster_count());
        }
        Command::Merge(a) => {
            let m = pl::merge(&a.resolve(None)?)?;
            println!("{} merged rows", m.centroids.len());
        }
        Command::Report { config, combine } => {
            if combine.is_empty() {
                let (_, table) = pl::report(&config.resolve(None)?)?;
                print!("{}", table.render_text());
            } else {
                let mut tables = Vec::new();
                for p in &combine {
                    let f = std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
                    tables.push(ReportTable::read_csv(f)?);
                }
                print!("{}", ReportTable::combine(tables).render_text());
            }
        }
        Command::Run { config, manifest } => {
            let base = manifest
                .map(|p| Manifest::load(&p).with_context(|| format!("loading {}", p.display())))
                .transpose()?
                .map(|m| m.config);
            let (_, table) = pl::run(&config.resolve(base)?)?;
            print!("{}", table.render_text());
        }
        Command::Synth { out, spec, seed, magnitude } => {
            let mut s = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    toml::from_str::<SyntheticSpec>(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => SyntheticSpec::default(),
            };
            if let Some(v) = seed {
                s.seed = v;
            }
            if let Some(v) = magnitude {
                s.magnitude = v;
            }
            let corpus = synthetic::generate(&s)?;
            let files = synthetic::write(&corpus, &out, &synthetic::recommended_config(&s))?;
            println!(
                "{} tweets over {} days; run with: dcm run --config {}",
                corpus.tweets.len(),
                s.n_days,
                files.config.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
