//! Seeded synthetic corpora with planted synonym clusters that spike on event days.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate, SecondsFormat};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::clustering::KMeansConfig;
use crate::error::{Error, Result};
use crate::text::{FeatureId, FormKind, Normalizer};

use super::PipelineConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub start: NaiveDate,
    pub n_days: usize,
    /// Unrelated keywords drawn at the background rate every day.
    pub background: usize,
    pub background_rate: f64,
    pub clusters: usize,
    pub synonyms: usize,
    pub event_days: usize,
    /// GSR count on every event day.
    pub gsr_spike: u64,
    /// Extra mentions per planted cluster on an event day, split evenly over its synonyms.
    pub magnitude: f64,
    pub tokens_per_tweet: usize,
    pub location: String,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            start: NaiveDate::from_ymd_opt(2017, 1, 1).expect("valid date"),
            n_days: 120,
            background: 200,
            background_rate: 6.0,
            clusters: 4,
            synonyms: 5,
            event_days: 10,
            gsr_spike: 1,
            magnitude: 30.0,
            tokens_per_tweet: 8,
            location: "Melbourne, Victoria".into(),
            seed: 2017,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("synthetic spec: {m}")));
        if self.n_days == 0 {
            return bad("n_days must be at least 1");
        }
        if self.event_days > self.n_days {
            return bad("more event days than days");
        }
        if self.synonyms == 0 && self.clusters > 0 {
            return bad("planted clusters need at least one synonym");
        }
        if self.tokens_per_tweet == 0 {
            return bad("tokens_per_tweet must be at least 1");
        }
        if !(self.background_rate.is_finite() && self.background_rate >= 0.0) {
            return bad("background_rate must be finite and non-negative");
        }
        if !(self.magnitude.is_finite() && self.magnitude >= 0.0) {
            return bad("magnitude must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTweet {
    pub day: usize,
    pub timestamp: chrono::DateTime<chrono::Utc>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub spec: SyntheticSpec,
    pub tweets: Vec<SyntheticTweet>,
    pub gsr: Vec<u64>,
    pub event_days: Vec<usize>,
    /// Normalized token of every synonym, per planted cluster.
    pub planted: Vec<Vec<String>>,
    pub background: Vec<String>,
    /// Per-day count of every normalized keyword as generated.
    pub keyword_counts: Vec<(String, Vec<u64>)>,
}

impl SyntheticCorpus {
    pub fn planted_features(&self) -> Vec<Vec<FeatureId>> {
        self.planted
            .iter()
            .map(|g| g.iter().map(|t| FeatureId::keyword(t).expect("valid token")).collect())
            .collect()
    }
}

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "gl", "sk"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
const CODAS: &[&str] = &["", "", "n", "r", "k", "m", "x"];

/// Draws pseudo-words whose normalized forms are distinct, non-stopword and
/// fixed points of normalization, so each word is one keyword feature.
fn vocabulary(rng: &mut ChaCha8Rng, norm: &Normalizer, count: usize) -> Vec<(String, String)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut w = String::new();
        for _ in 0..rng.random_range(2..=3) {
            w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
            w.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
        }
        w.push_str(CODAS[rng.random_range(0..CODAS.len())]);
        let stem = norm.normalize_token(&w);
        if stem.len() < 3 || norm.stopwords.contains(&w) || norm.normalize_token(&stem) != stem {
            continue;
        }
        if seen.insert(stem.clone()) {
            out.push((w, stem));
        }
    }
    out
}

fn draw(rng: &mut ChaCha8Rng, rate: f64) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("positive finite rate").sample(rng) as u64
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let norm = Normalizer::default();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let planted_n = spec.clusters * spec.synonyms;
    let vocab = vocabulary(&mut rng, &norm, spec.background + planted_n);
    let (planted_words, background_words) = vocab.split_at(planted_n);

    let mut event_days: Vec<usize> = index::sample(&mut rng, spec.n_days, spec.event_days).into_vec();
    event_days.sort_unstable();
    let mut is_event = vec![false; spec.n_days];
    for &d in &event_days {
        is_event[d] = true;
    }
    let gsr: Vec<u64> = is_event.iter().map(|&e| if e { spec.gsr_spike } else { 0 }).collect();

    let boost = if spec.synonyms > 0 {
        spec.magnitude / spec.synonyms as f64
    } else {
        0.0
    };
    let mut counts = vec![vec![0u64; spec.n_days]; vocab.len()];
    let mut tweets = Vec::new();
    for day in 0..spec.n_days {
        let mut bag: Vec<usize> = Vec::new();
        for (w, row) in counts.iter_mut().enumerate() {
            let rate = spec.background_rate + if w < planted_n && is_event[day] { boost } else { 0.0 };
            let c = draw(&mut rng, rate);
            row[day] = c;
            bag.extend(std::iter::repeat_n(w, c as usize));
        }
        bag.shuffle(&mut rng);
        let midnight = (spec.start + Duration::days(day as i64)).and_hms_opt(0, 0, 0).expect("valid time").and_utc();
        for chunk in bag.chunks(spec.tokens_per_tweet) {
            let mut text = String::new();
            for (i, &w) in chunk.iter().enumerate() {
                let word = &vocab[w].0;
                if i == 0 {
                    let mut cs = word.chars();
                    let first = cs.next().expect("non-empty word").to_ascii_uppercase();
                    let _ = write!(text, "{first}{}", cs.as_str());
                } else {
                    let _ = write!(text, " {word}");
                }
            }
            text.push('.');
            tweets.push(SyntheticTweet {
                day,
                timestamp: midnight + Duration::seconds(rng.random_range(0..86_400)),
                text,
            });
        }
    }

    Ok(SyntheticCorpus {
        spec: spec.clone(),
        tweets,
        gsr,
        event_days,
        planted: planted_words
            .chunks(spec.synonyms.max(1))
            .map(|g| g.iter().map(|(_, s)| s.clone()).collect())
            .collect(),
        background: background_words.iter().map(|(_, s)| s.clone()).collect(),
        keyword_counts: vocab.iter().map(|(_, s)| s.clone()).zip(counts).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFiles {
    pub corpus: PathBuf,
    pub gsr: PathBuf,
    pub truth: PathBuf,
    pub config: PathBuf,
}

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const GSR_FILE: &str = "gsr.csv";
pub const TRUTH_FILE: &str = "planted.tsv";
pub const CONFIG_FILE: &str = "pipeline.toml";

/// Settings that suit a synthetic corpus: keyword features, all of them kept,
/// centred rows, a σ-weighted latent space of one dimension per planted
/// cluster, and as many k-means clusters as there are planted-block-sized
/// groups of features.
pub fn recommended_config(spec: &SyntheticSpec) -> PipelineConfig {
    let features = spec.background + spec.clusters * spec.synonyms;
    PipelineConfig {
        corpus: PathBuf::from(CORPUS_FILE),
        gsr: PathBuf::from(GSR_FILE),
        start: Some(spec.start),
        end: Some(spec.start + Duration::days(spec.n_days as i64 - 1)),
        geo: vec![spec.location.split(',').next().unwrap_or("").trim().to_string()],
        form: FormKind::Keyword,
        n: 1,
        top_k: features,
        center_rows: true,
        out_dir: PathBuf::from("out"),
        kmeans: KMeansConfig {
            k: (features / (spec.clusters * spec.synonyms).max(1)).max(1),
            rank: Some(spec.clusters.clamp(1, spec.n_days)),
            weight_by_sigma: true,
            seed: spec.seed,
            ..KMeansConfig::default()
        },
        ..PipelineConfig::default()
    }
}

/// Writes the corpus, the GSR, the planted ground truth and a pipeline config into `dir`.
pub fn write(corpus: &SyntheticCorpus, dir: &Path, config: &PipelineConfig) -> Result<SyntheticFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = SyntheticFiles {
        corpus: dir.join(CORPUS_FILE),
        gsr: dir.join(GSR_FILE),
        truth: dir.join(TRUTH_FILE),
        config: dir.join(CONFIG_FILE),
    };

    let mut lines = String::new();
    for t in &corpus.tweets {
        let rec = serde_json::json!({
            "text": t.text,
            "ts": t.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
            "loc": corpus.spec.location,
            "lang": "en",
        });
        lines.push_str(&rec.to_string());
        lines.push('\n');
    }
    fs::write(&files.corpus, lines).map_err(|e| Error::io(&files.corpus, e))?;

    let mut gsr = String::from("date,count\n");
    for &d in &corpus.event_days {
        let _ = writeln!(gsr, "{},{}", corpus.spec.start + Duration::days(d as i64), corpus.gsr[d]);
    }
    fs::write(&files.gsr, gsr).map_err(|e| Error::io(&files.gsr, e))?;

    let mut truth = String::from("cluster\ttoken\n");
    for (c, group) in corpus.planted.iter().enumerate() {
        for tok in group {
            let _ = writeln!(truth, "{c}\t{tok}");
        }
    }
    fs::write(&files.truth, truth).map_err(|e| Error::io(&files.truth, e))?;

    fs::write(&files.config, config.to_toml_string()?).map_err(|e| Error::io(&files.config, e))?;
    Ok(files)
}

/// Reads a `cluster<TAB>token` ground-truth file back into groups.
pub fn read_truth(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut groups: Vec<Vec<String>> = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let (c, tok) = line
            .split_once('\t')
            .ok_or_else(|| Error::Parse(format!("truth line {}: missing tab", i + 1)))?;
        let c: usize = c.parse().map_err(|e| Error::Parse(format!("truth line {}: {e}", i + 1)))?;
        if groups.len() <= c {
            groups.resize(c + 1, Vec::new());
        }
        groups[c].push(tok.to_string());
    }
    Ok(groups)
}
