//! Word-form feature extraction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormKind {
    Keyword,
    NGram,
    SkipGram,
    #[serde(rename = "bow")]
    BagOfWords,
}

impl FormKind {
    pub fn id(self) -> &'static str {
        match self {
            FormKind::Keyword => "keyword",
            FormKind::NGram => "ngram",
            FormKind::SkipGram => "skipgram",
            FormKind::BagOfWords => "bow",
        }
    }
}

impl FromStr for FormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "keyword" | "unigram" => Ok(FormKind::Keyword),
            "ngram" | "n-gram" => Ok(FormKind::NGram),
            "skipgram" | "skip-gram" => Ok(FormKind::SkipGram),
            "bow" | "bagofwords" | "bag-of-words" => Ok(FormKind::BagOfWords),
            other => Err(Error::InvalidArgument(format!("unknown word form {other:?}"))),
        }
    }
}

/// A feature shape: keywords are single tokens, the other forms take 2 or 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WordForm {
    kind: FormKind,
    n: u8,
}

impl WordForm {
    pub fn new(kind: FormKind, n: usize) -> Result<Self> {
        let ok = match kind {
            FormKind::Keyword => n == 1,
            _ => n == 2 || n == 3,
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "{} features take {} tokens, got {n}",
                kind.id(),
                if kind == FormKind::Keyword { "1" } else { "2 or 3" }
            )));
        }
        Ok(WordForm { kind, n: n as u8 })
    }

    pub const KEYWORD: WordForm = WordForm { kind: FormKind::Keyword, n: 1 };

    pub fn kind(self) -> FormKind {
        self.kind
    }

    pub fn n(self) -> usize {
        self.n as usize
    }

    /// Row label in the style of the summary tables, e.g. `BOW-2`.
    pub fn label(self) -> String {
        match self.kind {
            FormKind::Keyword => "UniGram".into(),
            FormKind::NGram => format!("{}-gram", if self.n == 2 { "Bi" } else { "Tri" }),
            FormKind::SkipGram => format!("Skip-gram-{}", self.n),
            FormKind::BagOfWords => format!("BOW-{}", self.n),
        }
    }
}

/// Canonical feature identity. Rendered as `form:n:tok1+tok2`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId {
    form: WordForm,
    tokens: Vec<String>,
}

impl FeatureId {
    /// Builds a feature, sorting and deduplicating tokens for order-free forms.
    pub fn new(form: WordForm, mut tokens: Vec<String>) -> Result<Self> {
        if matches!(form.kind, FormKind::BagOfWords | FormKind::Keyword) {
            tokens.sort();
            tokens.dedup();
        }
        if tokens.len() != form.n() {
            return Err(Error::InvalidArgument(format!(
                "{} feature needs {} distinct tokens, got {:?}",
                form.kind.id(),
                form.n,
                tokens
            )));
        }
        if tokens.iter().any(|t| t.is_empty() || t.contains(['+', ':', '\t', ',', ' '])) {
            return Err(Error::InvalidArgument(format!("invalid feature token in {tokens:?}")));
        }
        Ok(FeatureId { form, tokens })
    }

    pub fn keyword(token: &str) -> Result<Self> {
        Self::new(WordForm::KEYWORD, vec![token.to_owned()])
    }

    pub fn form(&self) -> WordForm {
        self.form
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.form.kind.id(), self.form.n, self.tokens.join("+"))
    }
}

impl FromStr for FeatureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.splitn(3, ':');
        let (Some(kind), Some(n), Some(tokens)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse(format!("feature id {s:?} is not `form:n:tokens`")));
        };
        let n: usize = n
            .parse()
            .map_err(|_| Error::Parse(format!("feature id {s:?} has a bad word count")))?;
        let form = WordForm::new(kind.parse()?, n)?;
        let id = FeatureId::new(form, tokens.split('+').map(str::to_owned).collect())?;
        if id.to_string() != s {
            return Err(Error::Parse(format!("feature id {s:?} is not in canonical form")));
        }
        Ok(id)
    }
}

/// Calls `visit` with every strictly increasing index tuple of length `n` below `len`.
fn for_each_combination(len: usize, n: usize, mut visit: impl FnMut(&[usize])) {
    if n == 0 || n > len {
        return;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        visit(&idx);
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + len - n {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Extracts every feature of `form` from one tweet's normalized tokens.
///
/// The result is a multiset: repeated features are repeated in the output.
pub fn extract_features(tokens: &[String], form: WordForm) -> Vec<FeatureId> {
    let n = form.n();
    let make = |toks: Vec<String>| FeatureId { form, tokens: toks };
    let mut out = Vec::new();
    match form.kind {
        FormKind::Keyword => out.extend(tokens.iter().map(|t| make(vec![t.clone()]))),
        FormKind::NGram => {
            if tokens.len() >= n {
                out.extend(tokens.windows(n).map(|w| make(w.to_vec())));
            }
        }
        FormKind::SkipGram => for_each_combination(tokens.len(), n, |idx| {
            out.push(make(idx.iter().map(|&i| tokens[i].clone()).collect()));
        }),
        FormKind::BagOfWords => for_each_combination(tokens.len(), n, |idx| {
            let mut toks: Vec<String> = idx.iter().map(|&i| tokens[i].clone()).collect();
            toks.sort();
            toks.dedup();
            if toks.len() == n {
                out.push(make(toks));
            }
        }),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    fn form(kind: FormKind, n: usize) -> WordForm {
        WordForm::new(kind, n).unwrap()
    }

    fn rendered(features: &[FeatureId]) -> Vec<String> {
        features.iter().map(|f| f.tokens().join(" ")).collect()
    }

    #[test]
    fn word_form_constraints() {
        assert!(WordForm::new(FormKind::Keyword, 2).is_err());
        assert!(WordForm::new(FormKind::NGram, 1).is_err());
        assert!(WordForm::new(FormKind::BagOfWords, 4).is_err());
        assert!(WordForm::new(FormKind::SkipGram, 3).is_ok());
    }

    #[test]
    fn small_extractions() {
        let t = toks("a b c");
        assert_eq!(rendered(&extract_features(&t, form(FormKind::NGram, 2))), ["a b", "b c"]);
        let skip = rendered(&extract_features(&t, form(FormKind::SkipGram, 2)));
        assert_eq!(skip, ["a b", "a c", "b c"]);
        assert_eq!(rendered(&extract_features(&t, form(FormKind::BagOfWords, 2))), skip);
        assert!(extract_features(&toks("a"), form(FormKind::BagOfWords, 2)).is_empty());
        assert!(extract_features(&[], WordForm::KEYWORD).is_empty());
    }

    #[test]
    fn example_tweet_pairs() {
        let t = toks("highlight sign march friend go melbourn");
        let bow = extract_features(&t, form(FormKind::BagOfWords, 2));
        assert_eq!(bow.len(), 15);
        let pairs = rendered(&bow);
        assert!(pairs.contains(&"go melbourn".to_string()));
        assert!(pairs.contains(&"march melbourn".to_string()));
        assert_eq!(extract_features(&t, form(FormKind::SkipGram, 2)).len(), 15);
        assert_eq!(extract_features(&t, form(FormKind::NGram, 2)).len(), 5);
    }

    #[test]
    fn skipgram_order_matters_but_bow_order_does_not() {
        let ab = extract_features(&toks("march melbourn"), form(FormKind::SkipGram, 2));
        let ba = extract_features(&toks("melbourn march"), form(FormKind::SkipGram, 2));
        assert_ne!(ab, ba);
        let ab = extract_features(&toks("march melbourn"), form(FormKind::BagOfWords, 2));
        let ba = extract_features(&toks("melbourn march"), form(FormKind::BagOfWords, 2));
        assert_eq!(ab, ba);
    }

    #[test]
    fn repeated_tokens() {
        // Positions are distinct, so "go go" pairs once as a skip-gram but
        // collapses to a single token and is dropped as a bag of words.
        let t = toks("go go rally");
        assert_eq!(extract_features(&t, form(FormKind::SkipGram, 2)).len(), 3);
        let bow = rendered(&extract_features(&t, form(FormKind::BagOfWords, 2)));
        assert_eq!(bow, ["go rally", "go rally"]);
    }

    #[test]
    fn feature_id_text_round_trip() {
        let id = FeatureId::new(form(FormKind::BagOfWords, 2), toks("melbourn march")).unwrap();
        assert_eq!(id.to_string(), "bow:2:march+melbourn");
        assert_eq!("bow:2:march+melbourn".parse::<FeatureId>().unwrap(), id);
        assert!("bow:2:melbourn+march".parse::<FeatureId>().is_err());
        assert!("keyword:2:a+b".parse::<FeatureId>().is_err());
        assert!("nonsense".parse::<FeatureId>().is_err());
        assert_eq!("skipgram:3:c+a+b".parse::<FeatureId>().unwrap().tokens(), toks("c a b"));
    }

    fn binomial(l: usize, n: usize) -> usize {
        if n > l {
            return 0;
        }
        (0..n).fold(1, |acc, i| acc * (l - i) / (i + 1))
    }

    proptest! {
        #[test]
        fn feature_counts(tokens in prop::collection::vec("[a-e]", 0..9), n in 2usize..=3) {
            let l = tokens.len();
            let ngrams = extract_features(&tokens, form(FormKind::NGram, n)).len();
            let skips = extract_features(&tokens, form(FormKind::SkipGram, n)).len();
            let bows = extract_features(&tokens, form(FormKind::BagOfWords, n)).len();
            prop_assert_eq!(ngrams, (l + 1).saturating_sub(n));
            prop_assert_eq!(skips, binomial(l, n));
            prop_assert!(bows <= skips);
        }

        #[test]
        fn bow_is_permutation_invariant(
            tokens in prop::collection::vec("[a-f]{1,2}", 0..8),
            n in 2usize..=3,
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = tokens.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let mut a = extract_features(&tokens, form(FormKind::BagOfWords, n));
            let mut b = extract_features(&shuffled, form(FormKind::BagOfWords, n));
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }
    }
}
