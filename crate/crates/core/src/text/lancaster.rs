//! Paice/Husk ("Lancaster") stemmer driven by a rule table.
//!
//! Rules are written in the published notation: the word ending reversed, an
//! optional `*` (rule only fires on a word that has not been stemmed yet), the
//! number of characters to remove, an optional string to append, and `>` to
//! keep stemming or `.` to stop. Rules are tried in table order among those
//! indexed by the word's final letter.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const BUNDLED_RULES: &str = include_str!("../../data/lancaster_rules.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
struct Rule {
    /// Ending in natural (not reversed) order.
    ending: String,
    intact_only: bool,
    remove: usize,
    append: String,
    stop: bool,
}

#[derive(Debug, Clone)]
pub struct LancasterStemmer {
    rules: HashMap<char, Vec<Rule>>,
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

fn parse_rule(text: &str) -> Option<Rule> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() && bytes[i].is_ascii_lowercase() {
        i += 1;
    }
    if i == 0 {
        return None;
    }
    let reversed = &text[..i];
    let intact_only = bytes.get(i) == Some(&b'*');
    if intact_only {
        i += 1;
    }
    let digit = *bytes.get(i)?;
    if !digit.is_ascii_digit() {
        return None;
    }
    let remove = (digit - b'0') as usize;
    i += 1;
    let start = i;
    while i < bytes.len() && bytes[i].is_ascii_lowercase() {
        i += 1;
    }
    let append = text[start..i].to_string();
    let stop = match &text[i..] {
        "." => true,
        ">" => false,
        _ => return None,
    };
    if remove > reversed.len() {
        return None;
    }
    Some(Rule {
        ending: reversed.chars().rev().collect(),
        intact_only,
        remove,
        append,
        stop,
    })
}

impl LancasterStemmer {
    /// Parses a rule table; blank lines and `#` comments are ignored and an
    /// `end0.` line terminates the table.
    pub fn from_rules(table: &str) -> Result<Self> {
        let mut rules: HashMap<char, Vec<Rule>> = HashMap::new();
        for (lineno, raw) in table.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            for token in line.split_whitespace() {
                if token == "end0." {
                    return Ok(LancasterStemmer { rules });
                }
                let rule = parse_rule(token).ok_or_else(|| {
                    Error::Parse(format!("stem rule {token:?} on line {} is malformed", lineno + 1))
                })?;
                let key = rule.ending.chars().last().expect("non-empty ending");
                rules.entry(key).or_default().push(rule);
            }
        }
        Ok(LancasterStemmer { rules })
    }

    /// The published 115-rule table.
    pub fn bundled() -> &'static LancasterStemmer {
        static STEMMER: OnceLock<LancasterStemmer> = OnceLock::new();
        STEMMER.get_or_init(|| {
            LancasterStemmer::from_rules(BUNDLED_RULES).expect("bundled rule table parses")
        })
    }

    pub fn rule_count(&self) -> usize {
        self.rules.values().map(Vec::len).sum()
    }

    /// A stem must keep two letters if it starts with a vowel, otherwise three
    /// letters with a vowel in second or third position.
    fn acceptable(word: &[char], remove: usize) -> bool {
        let remaining = word.len().saturating_sub(remove);
        match word.first() {
            None => false,
            Some(&c) if is_vowel(c) => remaining >= 2,
            Some(_) => remaining >= 3 && (is_vowel(word[1]) || is_vowel(word[2])),
        }
    }

    pub fn stem(&self, token: &str) -> String {
        let intact: Vec<char> = token.to_lowercase().chars().collect();
        let mut word = intact.clone();
        loop {
            let Some(&last) = word.last() else { break };
            let Some(candidates) = self.rules.get(&last) else { break };
            let mut applied = None;
            for rule in candidates {
                let ending: Vec<char> = rule.ending.chars().collect();
                if !word.ends_with(&ending) {
                    continue;
                }
                if rule.intact_only && word != intact {
                    continue;
                }
                if !Self::acceptable(&word, rule.remove) {
                    continue;
                }
                word.truncate(word.len() - rule.remove);
                word.extend(rule.append.chars());
                applied = Some(rule.stop);
                break;
            }
            match applied {
                Some(false) => continue,
                _ => break,
            }
        }
        word.into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_has_every_rule() {
        assert_eq!(LancasterStemmer::bundled().rule_count(), 115);
    }

    #[test]
    fn parses_published_notation() {
        let r = parse_rule("city3s.").unwrap();
        assert_eq!(r.ending, "ytic");
        assert_eq!((r.remove, r.append.as_str(), r.stop, r.intact_only), (3, "s", true, false));
        let r = parse_rule("ai*2.").unwrap();
        assert!(r.intact_only);
        assert!(parse_rule("ab9>").is_none());
        assert!(parse_rule("ab2?").is_none());
        assert!(LancasterStemmer::from_rules("foo").is_err());
    }

    #[test]
    fn examples() {
        let s = LancasterStemmer::bundled();
        assert_eq!(s.stem("melbourne"), "melbourn");
        assert_eq!(s.stem("a"), "a");
        assert_eq!(s.stem(""), "");
        assert_eq!(s.stem("running"), "run");
        assert_eq!(s.stem("maximum"), "maxim");
        assert_eq!(s.stem("presumably"), "presum");
        assert_eq!(s.stem("provision"), "provid");
    }

    #[test]
    fn intact_rules_only_fire_on_unstemmed_words() {
        // "ai*2." strips -ia from an intact word only.
        let s = LancasterStemmer::bundled();
        assert_eq!(s.stem("australia"), "austral");
        let custom = LancasterStemmer::from_rules("s1>\nai*2.\n").unwrap();
        assert_eq!(custom.stem("australias"), "australia");
    }

    #[test]
    fn protect_rules_and_short_stems_stop_stemming() {
        let s = LancasterStemmer::bundled();
        assert_eq!(s.stem("ear"), "ear");
        assert_eq!(s.stem("string"), "string");
    }

    #[test]
    fn end_marker_terminates_table() {
        let s = LancasterStemmer::from_rules("s1>\nend0.\ne1>\n").unwrap();
        assert_eq!(s.rule_count(), 1);
    }
}
