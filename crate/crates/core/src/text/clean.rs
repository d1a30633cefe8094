//! Tweet cleaning: language and URL rejection, hashtag/HTML/punctuation
//! stripping, lowercasing and stopword removal.

use std::sync::OnceLock;

use regex::Regex;

use super::lemma::Stopwords;
use crate::ingest::RawTweet;

/// Tweets without a language hint are rejected above this share of non-Latin letters.
pub const MAX_NON_LATIN_FRACTION: f64 = 0.2;

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:\bhttps?://|\bwww\.)\S+").unwrap())
}

fn hashtag_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"#\w+").unwrap())
}

fn html_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<[^>]*>|&#?[A-Za-z0-9]+;").unwrap())
}

/// Basic Latin, Latin-1 Supplement, Latin Extended-A/B and Latin Extended Additional letters.
pub fn is_latin_letter(c: char) -> bool {
    c.is_ascii_alphabetic()
        || (c.is_alphabetic()
            && matches!(c as u32, 0x00C0..=0x024F | 0x1E00..=0x1EFF))
}

/// Share of alphabetic characters that are not Latin; 0 when there are none.
pub fn non_latin_fraction(text: &str) -> f64 {
    let (mut letters, mut foreign) = (0usize, 0usize);
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        letters += 1;
        if !is_latin_letter(c) {
            foreign += 1;
        }
    }
    if letters == 0 {
        0.0
    } else {
        foreign as f64 / letters as f64
    }
}

pub fn contains_url(text: &str) -> bool {
    url_re().is_match(text)
}

/// Returns `None` when the tweet is rejected (non-English or containing a URL),
/// otherwise its lowercase non-stopword tokens.
pub fn clean_tweet(raw: &RawTweet, stopwords: &Stopwords) -> Option<Vec<String>> {
    match raw.lang_hint.as_deref().map(str::trim) {
        Some(lang) if !lang.is_empty() && !lang.eq_ignore_ascii_case("en") => return None,
        Some(lang) if !lang.is_empty() => {}
        _ => {
            if non_latin_fraction(&raw.text) > MAX_NON_LATIN_FRACTION {
                return None;
            }
        }
    }
    if contains_url(&raw.text) {
        return None;
    }
    Some(clean_text(&raw.text, stopwords))
}

/// Cleaning without the rejection checks.
pub fn clean_text(text: &str, stopwords: &Stopwords) -> Vec<String> {
    let text = hashtag_re().replace_all(text, " ");
    let text = html_re().replace_all(&text, " ");
    let letters: String = text
        .chars()
        .map(|c| if is_latin_letter(c) { c } else { ' ' })
        .collect::<String>()
        .to_lowercase();
    letters
        .split_whitespace()
        .filter(|t| !stopwords.contains(t))
        .map(str::to_owned)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Utc;

    fn tweet(text: &str, lang: Option<&str>) -> RawTweet {
        RawTweet {
            text: text.into(),
            timestamp: Utc::now(),
            location_tag: None,
            lang_hint: lang.map(Into::into),
        }
    }

    #[test]
    fn example_tweet_is_cleaned() {
        let raw = tweet(
            r#"Highlight sign from #KeepSydneyOpen march:"My Friends Have Gone To Melbourne""#,
            Some("en"),
        );
        let tokens = clean_tweet(&raw, Stopwords::bundled()).unwrap();
        assert_eq!(tokens, ["highlight", "sign", "march", "friends", "gone", "melbourne"]);
    }

    #[test]
    fn urls_reject_the_tweet() {
        let sw = Stopwords::bundled();
        assert!(clean_tweet(&tweet("look http://t.co/x now", None), sw).is_none());
        assert!(clean_tweet(&tweet("see www.example.com", Some("en")), sw).is_none());
    }

    #[test]
    fn language_filter() {
        let sw = Stopwords::bundled();
        assert!(clean_tweet(&tweet("hola amigos", Some("es")), sw).is_none());
        assert!(clean_tweet(&tweet("hello friends", Some("EN")), sw).is_some());
        // No hint: mostly Cyrillic text is rejected, a little is tolerated.
        assert!(clean_tweet(&tweet("привет мир rally", None), sw).is_none());
        assert!(clean_tweet(&tweet("rally in melbourne today мир", None), sw).is_some());
    }

    #[test]
    fn empty_text_is_kept_with_no_tokens() {
        assert_eq!(clean_tweet(&tweet("", None), Stopwords::bundled()), Some(vec![]));
    }

    #[test]
    fn html_digits_and_non_latin_are_stripped() {
        let got = clean_text("<b>Rally</b> at 5pm &amp; café 東京 crowd!!", Stopwords::bundled());
        assert_eq!(got, ["rally", "pm", "café", "crowd"]);
    }
}
