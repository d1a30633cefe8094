//! Stage orchestration. Every stage reads its inputs from and writes its
//! checkpoint to the output directory, so stages can be rerun in isolation.

pub mod report;
pub mod synthetic;

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, SecondsFormat};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{
    build_lookup, kmeans, latent_points, merge_cluster_vectors, recorrelate, BeforeAfterTable, ClusterLookup,
    KMeansConfig, MergeResult, RunTrace,
};
use crate::correlation::{Metric, Scorer, DEFAULT_MI_BINS};
use crate::error::{Error, Result};
use crate::factorization::{factorize, FactoredMatrix};
use crate::ingest::{load_gsr, GeoFilter, GsrVector, IngestSummary, RawTweet, Timeframe, TweetReader};
use crate::matrix::{filter_min_count, select_top_k, Accumulator, CountMatrix, DEFAULT_MIN_COUNT, DEFAULT_TOP_K};
use crate::text::{extract_features, FormKind, LancasterStemmer, Lexicon, Normalizer, Stopwords, WordForm};

use report::{ReportRow, ReportTable};

pub const TWEETS_FILE: &str = "tweets.jsonl";
pub const GSR_FILE: &str = "gsr.csv";
pub const INGEST_FILE: &str = "ingest.json";
pub const COUNTS_FILE: &str = "counts.tsv";
pub const EXTRACT_FILE: &str = "extract.json";
pub const SCORES_FILE: &str = "scores.csv";
pub const SELECTED_FILE: &str = "selected.tsv";
pub const FACTORS_FILE: &str = "factors.txt";
pub const LOOKUP_FILE: &str = "lookup.tsv";
pub const KMEANS_FILE: &str = "kmeans.json";
pub const MERGED_FILE: &str = "merged.tsv";
pub const BEFORE_AFTER_FILE: &str = "before_after.csv";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_TXT: &str = "report.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

const BATCH: usize = 8192;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub gsr: PathBuf,
    pub start: Option<NaiveDate>,
    /// Inclusive.
    pub end: Option<NaiveDate>,
    /// Place names matched against the location tag; empty keeps everything.
    pub geo: Vec<String>,
    pub form: FormKind,
    pub n: usize,
    pub metric: Metric,
    /// Metric used for top-K selection; defaults to `metric`.
    pub select_metric: Option<Metric>,
    /// Extra metrics summarised in the report alongside `metric`.
    pub report_metrics: Vec<Metric>,
    pub mi_bins: usize,
    pub top_k: usize,
    pub min_count: u64,
    pub absolute_ranking: bool,
    pub center_rows: bool,
    pub stopwords: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub stem_rules: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub kmeans: KMeansConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: PathBuf::from("tweets.jsonl"),
            gsr: PathBuf::from("gsr.csv"),
            start: None,
            end: None,
            geo: Vec::new(),
            form: FormKind::Keyword,
            n: 1,
            metric: Metric::Pearson,
            select_metric: None,
            report_metrics: Vec::new(),
            mi_bins: DEFAULT_MI_BINS,
            top_k: DEFAULT_TOP_K,
            min_count: DEFAULT_MIN_COUNT,
            absolute_ranking: false,
            center_rows: false,
            stopwords: None,
            lemmas: None,
            stem_rules: None,
            out_dir: PathBuf::from("out"),
            kmeans: KMeansConfig::default(),
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    /// Loads a TOML config; relative paths inside it are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml_str(&read_to_string(path)?)?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.gsr);
        fix(&mut self.out_dir);
        for p in [&mut self.stopwords, &mut self.lemmas, &mut self.stem_rules].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn timeframe(&self) -> Result<Timeframe> {
        match (self.start, self.end) {
            (Some(s), Some(e)) => Timeframe::new(s, e),
            _ => Err(Error::InvalidArgument("the timeframe needs both `start` and `end`".into())),
        }
    }

    pub fn word_form(&self) -> Result<WordForm> {
        WordForm::new(self.form, if self.form == FormKind::Keyword { 1 } else { self.n })
    }

    pub fn scorer(&self) -> Scorer {
        Scorer {
            metric: self.metric,
            mi_bins: self.mi_bins,
        }
    }

    pub fn select_scorer(&self) -> Scorer {
        Scorer {
            metric: self.select_metric.unwrap_or(self.metric),
            mi_bins: self.mi_bins,
        }
    }

    pub fn normalizer(&self) -> Result<Normalizer> {
        let mut norm = Normalizer::default();
        if let Some(p) = &self.stopwords {
            norm.stopwords = Stopwords::from_lines(&read_to_string(p)?);
        }
        if let Some(p) = &self.lemmas {
            norm.lexicon = Lexicon::from_tsv(&read_to_string(p)?)?;
        }
        if let Some(p) = &self.stem_rules {
            norm.stemmer = LancasterStemmer::from_rules(&read_to_string(p)?)?;
        }
        Ok(norm)
    }

    pub fn validate(&self) -> Result<()> {
        self.timeframe()?;
        self.word_form()?;
        if self.top_k == 0 {
            return Err(Error::InvalidArgument("top_k must be at least 1".into()));
        }
        if self.mi_bins < 2 {
            return Err(Error::InvalidArgument("mi_bins must be at least 2".into()));
        }
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn ensure_out_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))
    }
}

/// Everything needed to rerun a pipeline bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: PipelineConfig,
}

impl Manifest {
    pub fn new(config: PipelineConfig) -> Self {
        Manifest {
            tool: "dcm".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

#[derive(Serialize)]
struct TweetLine<'a> {
    text: &'a str,
    ts: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    loc: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lang: Option<&'a str>,
}

fn write_gsr<W: Write>(mut w: W, tf: &Timeframe, gsr: &GsrVector) -> std::io::Result<()> {
    writeln!(w, "date,count")?;
    for (i, c) in gsr.counts().iter().enumerate() {
        let date = tf.date_of(crate::ingest::DayIndex(i as u32)).expect("day within timeframe");
        writeln!(w, "{date},{c}")?;
    }
    w.flush()
}

/// Filters the corpus to the timeframe and region and densifies the GSR.
pub fn ingest(cfg: &PipelineConfig) -> Result<IngestSummary> {
    let run = || -> Result<IngestSummary> {
        cfg.validate()?;
        cfg.ensure_out_dir()?;
        let tf = cfg.timeframe()?;
        let gsr = load_gsr(&cfg.gsr, tf)?;
        let out_path = cfg.path(TWEETS_FILE);
        let mut out = create(&out_path)?;
        let mut reader = TweetReader::open(&cfg.corpus, tf, GeoFilter::new(&cfg.geo))?;
        for item in reader.by_ref() {
            let (_, t) = item?;
            let line = TweetLine {
                text: &t.text,
                ts: t.timestamp.to_rfc3339_opts(SecondsFormat::AutoSi, true),
                loc: t.location_tag.as_deref(),
                lang: t.lang_hint.as_deref(),
            };
            serde_json::to_writer(&mut out, &line).map_err(|e| Error::Parse(e.to_string()))?;
            writeln!(out).map_err(|e| Error::io(&out_path, e))?;
        }
        out.flush().map_err(|e| Error::io(&out_path, e))?;
        let gsr_path = cfg.path(GSR_FILE);
        write_gsr(create(&gsr_path)?, &tf, &gsr).map_err(|e| Error::io(&gsr_path, e))?;
        let summary = reader.summary();
        write_json(&cfg.path(INGEST_FILE), &summary)?;
        info!(
            "ingest: {} of {} records kept ({} malformed, {} outside timeframe, {} outside region)",
            summary.yielded, summary.read, summary.skipped_parse, summary.skipped_time, summary.skipped_geo
        );
        Ok(summary)
    };
    run().map_err(|e| e.in_stage("ingest"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractSummary {
    pub tweets: u64,
    pub rejected: u64,
    pub features: usize,
    pub kept_after_min_count: usize,
}

fn load_gsr_checkpoint(cfg: &PipelineConfig) -> Result<GsrVector> {
    load_gsr(&cfg.path(GSR_FILE), cfg.timeframe()?)
}

fn load_matrix(cfg: &PipelineConfig, name: &str) -> Result<CountMatrix> {
    CountMatrix::read_tsv(open(&cfg.path(name))?, cfg.timeframe()?.n_days())
}

fn save_matrix(cfg: &PipelineConfig, name: &str, m: &CountMatrix) -> Result<()> {
    let path = cfg.path(name);
    m.write_tsv(create(&path)?).map_err(|e| Error::io(&path, e))
}

/// Normalizes tweets, extracts features and counts them per day.
pub fn extract(cfg: &PipelineConfig) -> Result<ExtractSummary> {
    let run = || -> Result<ExtractSummary> {
        cfg.validate()?;
        let tf = cfg.timeframe()?;
        let form = cfg.word_form()?;
        let norm = cfg.normalizer()?;
        let mut reader = TweetReader::open(&cfg.path(TWEETS_FILE), tf, GeoFilter::default())?;
        let mut acc = Accumulator::new(tf.n_days());
        let mut rejected = 0u64;
        let mut batch: Vec<(crate::ingest::DayIndex, RawTweet)> = Vec::with_capacity(BATCH);
        let flush = |batch: &mut Vec<_>, acc: &mut Accumulator, rejected: &mut u64| -> Result<()> {
            let extracted: Vec<_> = batch
                .par_iter()
                .map(|(day, tweet)| (*day, norm.normalize(tweet).map(|toks| extract_features(&toks, form))))
                .collect();
            for (day, feats) in extracted {
                match feats {
                    Some(f) => acc.add(day, f)?,
                    None => *rejected += 1,
                }
            }
            batch.clear();
            Ok(())
        };
        for item in reader.by_ref() {
            batch.push(item?);
            if batch.len() == BATCH {
                flush(&mut batch, &mut acc, &mut rejected)?;
            }
        }
        flush(&mut batch, &mut acc, &mut rejected)?;
        let counts = acc.finish();
        if counts.is_empty() {
            return Err(Error::NoFeatures.in_stage("accumulate"));
        }
        let filtered = filter_min_count(&counts, cfg.min_count);
        if filtered.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no feature reaches {} occurrences on any day",
                cfg.min_count
            )));
        }
        save_matrix(cfg, COUNTS_FILE, &filtered)?;
        let summary = ExtractSummary {
            tweets: reader.summary().yielded,
            rejected,
            features: counts.len(),
            kept_after_min_count: filtered.len(),
        };
        write_json(&cfg.path(EXTRACT_FILE), &summary)?;
        info!(
            "extract: {} features from {} tweets ({} rejected); {} pass the min-count filter",
            summary.features, summary.tweets, summary.rejected, summary.kept_after_min_count
        );
        Ok(summary)
    };
    run().map_err(|e| e.in_stage("extract"))
}

/// Scores every feature against the GSR and keeps the top K.
pub fn correlate(cfg: &PipelineConfig) -> Result<usize> {
    let run = || -> Result<usize> {
        let counts = load_matrix(cfg, COUNTS_FILE)?;
        let gsr = load_gsr_checkpoint(cfg)?;
        let sel = select_top_k(&counts, &gsr, &cfg.select_scorer(), cfg.top_k, cfg.absolute_ranking)?;
        let path = cfg.path(SCORES_FILE);
        let mut w = create(&path)?;
        let io = |e| Error::io(&path, e);
        writeln!(w, "feature,score").map_err(io)?;
        for (id, s) in &sel.all_scores {
            let s = s.map(|v| format!("{v:.6}")).unwrap_or_default();
            writeln!(w, "{id},{s}").map_err(io)?;
        }
        w.flush().map_err(io)?;
        save_matrix(cfg, SELECTED_FILE, &sel.matrix)?;
        info!("correlate: kept {} of {} features", sel.matrix.len(), counts.len());
        Ok(sel.matrix.len())
    };
    run().map_err(|e| e.in_stage("correlate"))
}

pub fn factorize_stage(cfg: &PipelineConfig) -> Result<FactoredMatrix> {
    let run = || -> Result<FactoredMatrix> {
        let selected = load_matrix(cfg, SELECTED_FILE)?;
        let f = factorize(&selected, cfg.center_rows)?;
        let path = cfg.path(FACTORS_FILE);
        f.write_text(create(&path)?).map_err(|e| Error::io(&path, e))?;
        info!(
            "factorize: {}x{} matrix, rank {}, {} completed columns",
            f.u.rows(),
            f.vt.cols(),
            f.rank(),
            f.completed.iter().filter(|c| **c).count()
        );
        Ok(f)
    };
    run().map_err(|e| e.in_stage("factorize"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub k: usize,
    pub best_run: usize,
    pub objective: f64,
    pub runs: Vec<RunTrace>,
}

pub fn cluster(cfg: &PipelineConfig) -> Result<ClusterLookup> {
    let run = || -> Result<ClusterLookup> {
        let f = FactoredMatrix::read_text(open(&cfg.path(FACTORS_FILE))?)?;
        let points = latent_points(&f, cfg.kmeans.rank, cfg.kmeans.weight_by_sigma)?;
        let result = kmeans(&points, &cfg.kmeans)?;
        let lookup = build_lookup(&result.best, &f.feature_order, &points)?;
        let path = cfg.path(LOOKUP_FILE);
        lookup.write_tsv(create(&path)?).map_err(|e| Error::io(&path, e))?;
        write_json(
            &cfg.path(KMEANS_FILE),
            &ClusterSummary {
                k: cfg.kmeans.k,
                best_run: result.best_run,
                objective: result.best.objective,
                runs: result.runs,
            },
        )?;
        info!(
            "cluster: {} clusters, best run {} with objective {:.6}",
            lookup.cluster_count(),
            result.best_run,
            result.best.objective
        );
        Ok(lookup)
    };
    run().map_err(|e| e.in_stage("cluster"))
}

fn load_lookup(cfg: &PipelineConfig) -> Result<ClusterLookup> {
    ClusterLookup::read_tsv(open(&cfg.path(LOOKUP_FILE))?)
}

pub fn merge(cfg: &PipelineConfig) -> Result<MergeResult> {
    let run = || -> Result<MergeResult> {
        let selected = load_matrix(cfg, SELECTED_FILE)?;
        let merged = merge_cluster_vectors(&selected, &load_lookup(cfg)?)?;
        save_matrix(cfg, MERGED_FILE, &merged.centroids)?;
        info!("merge: {} merged rows", merged.centroids.len());
        Ok(merged)
    };
    run().map_err(|e| e.in_stage("merge"))
}

/// Before/after scores of every medoid plus the summary table.
pub fn report(cfg: &PipelineConfig) -> Result<(BeforeAfterTable, ReportTable)> {
    let run = || -> Result<(BeforeAfterTable, ReportTable)> {
        let gsr = load_gsr_checkpoint(cfg)?;
        let lookup = load_lookup(cfg)?;
        let selected = load_matrix(cfg, SELECTED_FILE)?;
        let centroids = load_matrix(cfg, MERGED_FILE)?;
        let members = selected.restrict(lookup.clusters().flat_map(|(_, m)| m.iter()));
        let merged = MergeResult {
            centroids,
            members,
            sizes: lookup.clusters().map(|(k, m)| (k.clone(), m.len())).collect(),
        };
        let table = recorrelate(&merged, &gsr, &cfg.scorer())?;
        let path = cfg.path(BEFORE_AFTER_FILE);
        table.write_csv(create(&path)?).map_err(|e| Error::io(&path, e))?;

        let label = cfg.word_form()?.label();
        let mut rows = vec![ReportRow::new(label.clone(), cfg.metric, &table.before(), &table.after())];
        for &m in &cfg.report_metrics {
            if m == cfg.metric || rows.iter().any(|r| r.metric == m) {
                continue;
            }
            let t = recorrelate(&merged, &gsr, &Scorer { metric: m, mi_bins: cfg.mi_bins })?;
            rows.push(ReportRow::new(label.clone(), m, &t.before(), &t.after()));
        }
        let summary = ReportTable { rows };
        let path = cfg.path(REPORT_CSV);
        summary.write_csv(create(&path)?)?;
        let path = cfg.path(REPORT_TXT);
        fs::write(&path, summary.render_text()).map_err(|e| Error::io(&path, e))?;
        info!("report: written to {}", cfg.out_dir.display());
        Ok((table, summary))
    };
    run().map_err(|e| e.in_stage("report"))
}

/// Runs every stage and records the manifest first.
pub fn run(cfg: &PipelineConfig) -> Result<(BeforeAfterTable, ReportTable)> {
    cfg.validate()?;
    cfg.ensure_out_dir()?;
    Manifest::new(cfg.clone()).write(&cfg.path(MANIFEST_FILE))?;
    ingest(cfg)?;
    extract(cfg)?;
    correlate(cfg)?;
    factorize_stage(cfg)?;
    cluster(cfg)?;
    merge(cfg)?;
    report(cfg)
}

/// Reads a matrix checkpoint written by a stage of this configuration.
pub fn read_checkpoint(cfg: &PipelineConfig, name: &str) -> Result<CountMatrix> {
    load_matrix(cfg, name)
}

/// Reads a `feature,score` file written by the correlate stage.
pub fn read_scores(path: &Path) -> Result<Vec<(String, Option<f64>)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate().skip(1) {
        let line = line.map_err(|e| Error::io(path, e))?;
        let (id, s) = line
            .rsplit_once(',')
            .ok_or_else(|| Error::Parse(format!("scores line {}: missing comma", i + 1)))?;
        let s = if s.is_empty() {
            None
        } else {
            Some(s.parse().map_err(|e| Error::Parse(format!("scores line {}: {e}", i + 1)))?)
        };
        out.push((id.to_string(), s));
    }
    Ok(out)
}
