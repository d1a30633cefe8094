use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use crate::error::{Error, Result};

const BUNDLED_LEMMAS: &str = include_str!("../../data/lemmas.tsv");
const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

/// Inflected form to lemma lookup, loaded from `inflected<TAB>lemma` lines.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    map: HashMap<String, String>,
}

impl Lexicon {
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(inflected), Some(lemma), None) if !inflected.is_empty() && !lemma.is_empty() => {
                    map.insert(inflected.to_lowercase(), lemma.to_lowercase());
                }
                _ => {
                    return Err(Error::Parse(format!(
                        "lemma lexicon line {}: expected `inflected<TAB>lemma`",
                        i + 1
                    )))
                }
            }
        }
        Ok(Lexicon { map })
    }

    pub fn bundled() -> &'static Lexicon {
        static LEXICON: OnceLock<Lexicon> = OnceLock::new();
        LEXICON.get_or_init(|| Lexicon::from_tsv(BUNDLED_LEMMAS).expect("bundled lexicon parses"))
    }

    pub fn lemmatize<'a>(&'a self, token: &'a str) -> &'a str {
        self.map.get(token).map(String::as_str).unwrap_or(token)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Stopwords {
    /// One word per line; blank lines are ignored.
    pub fn from_lines(text: &str) -> Self {
        Stopwords {
            words: text
                .lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .collect(),
        }
    }

    pub fn bundled() -> &'static Stopwords {
        static STOPWORDS: OnceLock<Stopwords> = OnceLock::new();
        STOPWORDS.get_or_init(|| Stopwords::from_lines(BUNDLED_STOPWORDS))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}
