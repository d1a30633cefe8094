//! Tweet normalization and feature extraction.

mod clean;
mod features;
mod lancaster;
mod lemma;

pub use clean::{clean_text, clean_tweet, contains_url, is_latin_letter, non_latin_fraction, MAX_NON_LATIN_FRACTION};
pub use features::{extract_features, FeatureId, FormKind, WordForm};
pub use lancaster::LancasterStemmer;
pub use lemma::{Lexicon, Stopwords};

use crate::ingest::RawTweet;

/// Cleaning followed by lemmatization and stemming of every token.
#[derive(Debug, Clone)]
pub struct Normalizer {
    pub stopwords: Stopwords,
    pub lexicon: Lexicon,
    pub stemmer: LancasterStemmer,
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer {
            stopwords: Stopwords::bundled().clone(),
            lexicon: Lexicon::bundled().clone(),
            stemmer: LancasterStemmer::bundled().clone(),
        }
    }
}

impl Normalizer {
    pub fn normalize_token(&self, token: &str) -> String {
        self.stemmer.stem(self.lexicon.lemmatize(token))
    }

    /// `None` if the tweet is rejected by the cleaner.
    pub fn normalize(&self, tweet: &RawTweet) -> Option<Vec<String>> {
        let tokens = clean_tweet(tweet, &self.stopwords)?;
        Some(tokens.iter().map(|t| self.normalize_token(t)).collect())
    }

    pub fn normalize_text(&self, text: &str) -> Vec<String> {
        clean_text(text, &self.stopwords)
            .iter()
            .map(|t| self.normalize_token(t))
            .collect()
    }
}
