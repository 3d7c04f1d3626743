//! Parsing free-text recommender answers into candidate choices, and the
//! deterministic hint-overlap oracle used as a mock recommender.

use alloc::string::String;
use alloc::vec::Vec;

use crate::discovery::HintSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MatchRule {
    /// Trimmed response equals a title, ignoring case.
    Exact,
    /// Exactly one title occurs inside the response.
    Substring,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChoiceParse {
    pub raw: String,
    /// Index into the candidate list.
    pub matched: Option<usize>,
    pub rule: Option<MatchRule>,
}

impl ChoiceParse {
    pub fn is_valid(&self) -> bool {
        self.matched.is_some()
    }
}

/// Maps a response onto at most one candidate. Titles sharing the same
/// lowercase form are ambiguous and never match.
pub fn parse_choice(response: &str, titles: &[&str]) -> ChoiceParse {
    let lower: Vec<String> = titles.iter().map(|t| t.to_lowercase()).collect();
    let unique = |i: usize| lower.iter().filter(|t| **t == lower[i]).count() == 1;
    let trimmed = response.trim().to_lowercase();

    let invalid = ChoiceParse {
        raw: response.into(),
        matched: None,
        rule: None,
    };
    if let Some(i) = lower.iter().position(|t| *t == trimmed) {
        if unique(i) {
            return ChoiceParse {
                raw: response.into(),
                matched: Some(i),
                rule: Some(MatchRule::Exact),
            };
        }
        return invalid;
    }

    // longest titles claim their spans first so a title nested in a longer
    // one does not count separately
    let mut order: Vec<usize> = (0..titles.len()).filter(|&i| !lower[i].is_empty()).collect();
    order.sort_by(|&a, &b| lower[b].len().cmp(&lower[a].len()).then(lower[a].cmp(&lower[b])));
    let mut claimed: Vec<(usize, usize)> = Vec::new();
    let mut found: Vec<usize> = Vec::new();
    for i in order {
        let needle = &lower[i];
        let mut hit = false;
        for (start, _) in trimmed.match_indices(needle.as_str()) {
            let end = start + needle.len();
            if claimed.iter().all(|&(s, e)| end <= s || start >= e) {
                claimed.push((start, end));
                hit = true;
            }
        }
        if hit && !found.iter().any(|&j| lower[j] == *needle) {
            found.push(i);
        }
    }
    match found.as_slice() {
        [i] if unique(*i) => ChoiceParse {
            raw: response.into(),
            matched: Some(*i),
            rule: Some(MatchRule::Substring),
        },
        _ => invalid,
    }
}

/// Index of the candidate whose item hints overlap the user hints the most
/// (by tuple index); ties and the no-hint case go to the lexicographically
/// smallest title.
pub fn mock_oracle_recommend(hints: &HintSet, titles: &[&str]) -> Result<usize> {
    if titles.is_empty() {
        return Err(Error::Contract("mock oracle needs at least one candidate".into()));
    }
    let user = hints.user_tuple_ids();
    let overlap = |c: usize| -> usize {
        hints
            .item_hints
            .get(c)
            .map(|hs| hs.iter().filter(|h| user.contains(&h.tuple.index)).count())
            .unwrap_or(0)
    };
    let best = (0..titles.len())
        .min_by(|&a, &b| overlap(b).cmp(&overlap(a)).then(titles[a].cmp(titles[b])).then(a.cmp(&b)))
        .expect("nonempty");
    Ok(best)
}
