use chrono::NaiveDate;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::canonical::Fingerprint;
use crate::model::Fraction;

/// Predicate tree over works.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Filter {
    All,
    /// Every term must occur in the title as whole words, case-insensitively.
    TitleTerms(Vec<String>),
    /// Some author name contains the term as whole words.
    Author(String),
    /// Earliest certificate date within the inclusive range.
    CoeDate {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        from: Option<NaiveDate>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        to: Option<NaiveDate>,
    },
    MinScore(Fraction),
    /// Reviewed by someone vouched for by this escrow board.
    ReviewedBy(Fingerprint),
    And(Vec<Filter>),
    Or(Vec<Filter>),
    Not(Box<Filter>),
}

/// Lowercased NFC words; anything that is not alphanumeric separates words.
pub fn words(text: &str) -> Vec<String> {
    let norm: String = text.nfc().flat_map(char::to_lowercase).collect();
    norm.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_owned).collect()
}

pub(crate) fn contains_phrase(haystack: &[String], term: &str) -> bool {
    let needle = words(term);
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle.as_slice())
}

/// What a filter can ask about a work.
pub(crate) struct Facts<'a> {
    pub title: Option<&'a str>,
    pub authors: &'a [String],
    pub earliest: Option<NaiveDate>,
    pub score: Option<&'a BigRational>,
    pub boards: &'a dyn Fn(&Fingerprint) -> bool,
}

impl Filter {
    pub(crate) fn matches(&self, f: &Facts<'_>) -> bool {
        match self {
            Filter::All => true,
            Filter::TitleTerms(terms) => {
                let title = words(f.title.unwrap_or(""));
                terms.iter().all(|t| contains_phrase(&title, t))
            }
            Filter::Author(term) => f.authors.iter().any(|a| contains_phrase(&words(a), term)),
            Filter::CoeDate { from, to } => match f.earliest {
                Some(d) => from.map_or(true, |x| d >= x) && to.map_or(true, |x| d <= x),
                None => false,
            },
            Filter::MinScore(min) => f.score.is_some_and(|s| *s >= min.to_big()),
            Filter::ReviewedBy(board) => (f.boards)(board),
            Filter::And(v) => v.iter().all(|x| x.matches(f)),
            Filter::Or(v) => v.iter().any(|x| x.matches(f)),
            Filter::Not(x) => !x.matches(f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whole_word_case_insensitive_nfc() {
        let t = words("Caf\u{0065}\u{0301} Society: Removing the Middle-Man");
        assert!(contains_phrase(&t, "café"));
        assert!(contains_phrase(&t, "middle man"));
        assert!(contains_phrase(&t, "REMOVING"));
        assert!(!contains_phrase(&t, "move"));
        assert!(!contains_phrase(&t, ""));
    }
}
