//! Head-centric flattened prompt rendering.
//!
//! Hints that share a head entity are rendered once per head: user hints as
//! a bare `relation: tail` list (the user is implicit), candidate hints as
//! `(Title: <title>, Attributes: {relation: tail, ...})`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::discovery::{HintSet, ScoredTuple};
use crate::graph::{ItemId, KnowledgeGraph};
use crate::instances::Instance;
use crate::interactions::{truncate_and_pad_history, InteractionLog};
use crate::{Error, Result};

pub const SYSTEM_PROMPT: &str = "You are a recommendation assistant. Given the user's interaction history, preferences, and candidate items, answer with exactly one candidate title and nothing else.";
pub const TEMPLATE_VERSION: u32 = 1;

pub const HISTORY_LABEL: &str = "Interaction history: ";
pub const PREFERENCES_LABEL: &str = "User preferences: ";
pub const CANDIDATES_LABEL: &str = "Candidates:";
pub const QUESTION: &str = "Which candidate will the user interact with next? Answer with its title.";

/// Wraps names containing commas or braces in double quotes, doubling any
/// embedded quote.
pub fn quote_name(name: &str) -> String {
    if name.contains([',', '{', '}']) {
        format!("\"{}\"", name.replace('"', "\"\""))
    } else {
        name.into()
    }
}

fn in_credibility_order(hints: &[ScoredTuple]) -> Vec<&ScoredTuple> {
    let mut sorted: Vec<&ScoredTuple> = hints.iter().collect();
    sorted.sort_by(|a, b| b.credibility.total_cmp(&a.credibility).then(a.tuple.index.cmp(&b.tuple.index)));
    sorted
}

fn pair_text(hint: &ScoredTuple, graph: &KnowledgeGraph) -> Result<String> {
    let t = hint.tuple;
    let r = graph
        .relation_name(t.relation)
        .ok_or_else(|| Error::Render(format!("relation #{}", t.relation.0)))?;
    let tail = graph.entity_name(t.tail).ok_or_else(|| Error::Render(format!("entity #{}", t.tail.0)))?;
    Ok(format!("{}: {}", quote_name(r), quote_name(tail)))
}

fn title_text(item: ItemId, graph: &KnowledgeGraph) -> Result<String> {
    graph
        .item_entity(item)
        .and_then(|e| graph.entity_name(e))
        .map(quote_name)
        .ok_or_else(|| Error::Render(format!("item #{}", item.0)))
}

/// P_c: comma-joined `relation: tail` pairs, highest credibility first.
pub fn render_user_hint_prompt(hints: &[ScoredTuple], graph: &KnowledgeGraph) -> Result<String> {
    let parts = in_credibility_order(hints)
        .into_iter()
        .map(|h| pair_text(h, graph))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.join(", "))
}

/// P_b: titles of the non-pad history items in chronological order.
pub fn render_history_prompt(history: &[ItemId], graph: &KnowledgeGraph) -> Result<String> {
    let parts = history
        .iter()
        .filter(|v| !v.is_pad())
        .map(|&v| title_text(v, graph))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.join(", "))
}

/// P_v: `(Title: <title>, Attributes: {<r>: <t>, ...})`.
pub fn render_item_hint_prompt(item: ItemId, hints: &[ScoredTuple], graph: &KnowledgeGraph) -> Result<String> {
    let title = title_text(item, graph)?;
    let attrs = in_credibility_order(hints)
        .into_iter()
        .map(|h| pair_text(h, graph))
        .collect::<Result<Vec<_>>>()?;
    Ok(format!("(Title: {title}, Attributes: {{{}}})", attrs.join(", ")))
}

/// Baseline rendering with the head repeated in every `(head, relation,
/// tail)` clause.
pub fn render_naive_triples(hints: &[ScoredTuple], head: &str, graph: &KnowledgeGraph) -> Result<String> {
    let head = quote_name(head);
    let parts = in_credibility_order(hints)
        .into_iter()
        .map(|h| {
            let pair = pair_text(h, graph)?;
            let (r, t) = pair.split_once(": ").expect("pair_text emits `r: t`");
            Ok(format!("({head}, {r}, {t})"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.join(", "))
}

/// Character and whitespace-token counts of one segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SegmentStats {
    pub chars: usize,
    pub tokens: usize,
}

impl SegmentStats {
    pub fn of(text: &str) -> Self {
        Self {
            chars: text.chars().count(),
            tokens: text.split_whitespace().count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PromptBundle {
    pub system: String,
    pub history: String,
    pub preferences: String,
    pub candidates: Vec<String>,
    /// The assembled instruction x.
    pub instruction: String,
    /// Gold response y.
    pub response: String,
    pub system_stats: SegmentStats,
    pub history_stats: SegmentStats,
    pub preferences_stats: SegmentStats,
    pub candidates_stats: SegmentStats,
    pub instruction_stats: SegmentStats,
}

/// x = P_I ‖ P_b ‖ P_c ‖ {P_v}, with section labels. Empty history or
/// preference segments drop their section entirely.
pub fn assemble_prompt(system: &str, history: &str, preferences: &str, candidates: &[String], candidate_titles: &[&str], gold_title: &str) -> Result<PromptBundle> {
    if !candidate_titles.contains(&gold_title) {
        return Err(Error::Integrity(format!("gold title `{gold_title}` is not among the candidates")));
    }
    let mut x = String::new();
    x.push_str(system);
    x.push_str("\n\n");
    if !history.is_empty() {
        x.push_str(HISTORY_LABEL);
        x.push_str(history);
        x.push('\n');
    }
    if !preferences.is_empty() {
        x.push_str(PREFERENCES_LABEL);
        x.push_str(preferences);
        x.push('\n');
    }
    x.push_str(CANDIDATES_LABEL);
    x.push('\n');
    for pv in candidates {
        x.push_str(pv);
        x.push('\n');
    }
    x.push_str(QUESTION);

    let joined = candidates.join("\n");
    Ok(PromptBundle {
        system: system.into(),
        history: history.into(),
        preferences: preferences.into(),
        candidates: candidates.to_vec(),
        system_stats: SegmentStats::of(system),
        history_stats: SegmentStats::of(history),
        preferences_stats: SegmentStats::of(preferences),
        candidates_stats: SegmentStats::of(&joined),
        instruction_stats: SegmentStats::of(&x),
        instruction: x,
        response: gold_title.into(),
    })
}

/// Renders the full prompt of one instance from its hint set.
pub fn instance_prompt(graph: &KnowledgeGraph, log: &InteractionLog, instance: &Instance, hints: &HintSet, history_len: usize) -> Result<PromptBundle> {
    if hints.item_hints.len() != instance.candidates.len() {
        return Err(Error::Shape {
            what: "item hint lists",
            expected: instance.candidates.len(),
            found: hints.item_hints.len(),
        });
    }
    let history = truncate_and_pad_history(&log.history_before(instance.user, instance.history_end, history_len)?, history_len);
    let history_text = render_history_prompt(&history, graph)?;
    let preferences = render_user_hint_prompt(&hints.user_hints, graph)?;
    let candidates = instance
        .candidates
        .iter()
        .zip(&hints.item_hints)
        .map(|(&v, h)| render_item_hint_prompt(v, h, graph))
        .collect::<Result<Vec<_>>>()?;
    let titles = candidate_titles(graph, &instance.candidates)?;
    assemble_prompt(SYSTEM_PROMPT, &history_text, &preferences, &candidates, &titles, titles[instance.target])
}

/// Raw (unquoted) titles of `items`.
pub fn candidate_titles<'g>(graph: &'g KnowledgeGraph, items: &[ItemId]) -> Result<Vec<&'g str>> {
    items
        .iter()
        .map(|&v| graph.item_title(v).ok_or_else(|| Error::Render(format!("item #{}", v.0))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::Provenance;
    use crate::graph::GraphBuilder;
    use alloc::string::ToString;
    use alloc::vec;

    fn avatar() -> KnowledgeGraph {
        let mut b = GraphBuilder::new();
        b.add_entity("avatar", "Avatar", "movie", true).unwrap();
        b.add_entity("x", "X", "movie", true).unwrap();
        b.add_entity("sf", "science fiction", "genre", false).unwrap();
        b.add_entity("jc", "James Cameron", "person", false).unwrap();
        b.add_entity("odd", "Crouching Tiger, Hidden Dragon", "movie", true).unwrap();
        b.add_relation("genre", "genre").unwrap();
        b.add_relation("director", "director").unwrap();
        b.add_triple("avatar", "genre", "sf").unwrap();
        b.add_triple("avatar", "director", "jc").unwrap();
        b.build().unwrap()
    }

    fn hint(g: &KnowledgeGraph, r: &str, t: &str, p: f64) -> ScoredTuple {
        let relation = g.relation_by_key(r).unwrap();
        let tail = g.entity_by_key(t).unwrap();
        ScoredTuple {
            tuple: g.tuple(g.tuple_id(relation, tail).unwrap()).unwrap(),
            credibility: p,
            source: Provenance::OwnHistory,
        }
    }

    #[test]
    fn user_hints() {
        let g = avatar();
        assert_eq!(render_user_hint_prompt(&[hint(&g, "director", "jc", 1.0)], &g).unwrap(), "director: James Cameron");
        assert_eq!(render_user_hint_prompt(&[], &g).unwrap(), "");
        let two = render_user_hint_prompt(&[hint(&g, "genre", "sf", 0.4), hint(&g, "director", "jc", 0.6)], &g).unwrap();
        assert_eq!(two, "director: James Cameron, genre: science fiction");
    }

    #[test]
    fn item_hints() {
        let g = avatar();
        let v = g.item_by_key("avatar").unwrap();
        let s = render_item_hint_prompt(v, &[hint(&g, "genre", "sf", 0.7), hint(&g, "director", "jc", 0.3)], &g).unwrap();
        assert_eq!(s, "(Title: Avatar, Attributes: {genre: science fiction, director: James Cameron})");
        let x = g.item_by_key("x").unwrap();
        assert_eq!(render_item_hint_prompt(x, &[], &g).unwrap(), "(Title: X, Attributes: {})");
        assert!(matches!(render_item_hint_prompt(ItemId(42), &[], &g), Err(Error::Render(_))));
    }

    #[test]
    fn history_skips_pads() {
        let g = avatar();
        let a = g.item_by_key("avatar").unwrap();
        let x = g.item_by_key("x").unwrap();
        assert_eq!(render_history_prompt(&[ItemId::PAD; 10], &g).unwrap(), "");
        let mut h = vec![ItemId::PAD; 7];
        h.extend([a, x, a]);
        assert_eq!(render_history_prompt(&h, &g).unwrap(), "Avatar, X, Avatar");
    }

    #[test]
    fn quoting() {
        let g = avatar();
        let odd = g.item_by_key("odd").unwrap();
        assert_eq!(render_history_prompt(&[odd], &g).unwrap(), "\"Crouching Tiger, Hidden Dragon\"");
        assert_eq!(quote_name("a{\"b\"}"), "\"a{\"\"b\"\"}\"");
        assert_eq!(quote_name("Plain \"quoted\""), "Plain \"quoted\"");
    }

    #[test]
    fn naive_triples_repeat_the_head() {
        let g = avatar();
        let one = render_naive_triples(&[hint(&g, "genre", "sf", 1.0)], "Avatar", &g).unwrap();
        assert_eq!(one, "(Avatar, genre, science fiction)");
        let hints = [hint(&g, "genre", "sf", 0.5), hint(&g, "director", "jc", 0.3), hint(&g, "genre", "sf", 0.2)];
        let three = render_naive_triples(&hints, "Avatar", &g).unwrap();
        assert_eq!(three.matches("Avatar").count(), 3);
    }

    #[test]
    fn assembly() {
        let cands = vec!["(Title: Avatar, Attributes: {})".to_string(), "(Title: X, Attributes: {})".to_string()];
        let b = assemble_prompt(SYSTEM_PROMPT, "X", "", &cands, &["Avatar", "X"], "Avatar").unwrap();
        assert!(!b.instruction.contains(PREFERENCES_LABEL));
        assert_eq!(b.instruction.matches("(Title: ").count(), 2);
        assert_eq!(b.response, "Avatar");
        assert!(b.instruction.starts_with(SYSTEM_PROMPT));
        assert!(assemble_prompt(SYSTEM_PROMPT, "", "", &cands, &["Avatar", "X"], "Titanic").is_err());
    }
}
