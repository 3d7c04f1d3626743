//! Newline-delimited JSON outputs: instruction datasets, instance dumps,
//! hint dumps and evaluation transcripts.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use hintkg_core::discovery::{HintSet, Provenance, ScoredTuple};
use hintkg_core::instances::Instance;
use hintkg_core::prompt::{PromptBundle, SegmentStats};
use hintkg_core::{InteractionLog, KnowledgeGraph};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub instruction: String,
    pub response: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LengthStats {
    pub mean_chars: f64,
    pub mean_tokens: f64,
    pub max_chars: usize,
}

impl LengthStats {
    fn of<'a>(stats: impl Iterator<Item = &'a SegmentStats>) -> Self {
        let mut n = 0usize;
        let (mut chars, mut tokens, mut max_chars) = (0usize, 0usize, 0usize);
        for s in stats {
            n += 1;
            chars += s.chars;
            tokens += s.tokens;
            max_chars = max_chars.max(s.chars);
        }
        if n == 0 {
            return Self::default();
        }
        Self {
            mean_chars: chars as f64 / n as f64,
            mean_tokens: tokens as f64 / n as f64,
            max_chars,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub records: usize,
    pub template_version: u32,
    pub instruction: LengthStats,
    pub system: LengthStats,
    pub history: LengthStats,
    pub preferences: LengthStats,
    pub candidates: LengthStats,
}

/// `<path>.manifest.json` next to the dataset.
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn writer(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Writes serializable records, one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<usize> {
    let mut w = writer(path)?;
    let mut n = 0;
    for r in records {
        serde_json::to_writer(&mut w, &r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        n += 1;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(n)
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.into(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn export_instruction_dataset(bundles: &[PromptBundle], path: &Path) -> Result<DatasetManifest> {
    write_jsonl(
        path,
        bundles.iter().map(|b| InstructionRecord {
            instruction: b.instruction.clone(),
            response: b.response.clone(),
        }),
    )?;
    let manifest = DatasetManifest {
        records: bundles.len(),
        template_version: hintkg_core::prompt::TEMPLATE_VERSION,
        instruction: LengthStats::of(bundles.iter().map(|b| &b.instruction_stats)),
        system: LengthStats::of(bundles.iter().map(|b| &b.system_stats)),
        history: LengthStats::of(bundles.iter().map(|b| &b.history_stats)),
        preferences: LengthStats::of(bundles.iter().map(|b| &b.preferences_stats)),
        candidates: LengthStats::of(bundles.iter().map(|b| &b.candidates_stats)),
    };
    let mp = manifest_path(path);
    fs::write(&mp, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&mp, e))?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: u32,
    pub user: String,
    pub split: String,
    pub task: String,
    pub history_end: usize,
    pub candidates: Vec<String>,
    pub gold_index: usize,
    pub seed: u64,
}

pub fn instance_records(graph: &KnowledgeGraph, log: &InteractionLog, instances: &[Instance], seed: u64) -> Result<Vec<InstanceRecord>> {
    instances
        .iter()
        .map(|i| {
            Ok(InstanceRecord {
                id: i.id,
                user: log.user(i.user)?.key.clone(),
                split: i.split.as_str().into(),
                task: i.task.as_str().into(),
                history_end: i.history_end,
                candidates: i
                    .candidates
                    .iter()
                    .map(|&v| graph.item_key(v).map(str::to_owned).ok_or_else(|| hintkg_core::Error::UnknownItem(format!("#{}", v.0))))
                    .collect::<std::result::Result<_, _>>()?,
                gold_index: i.target,
                seed,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintRecord {
    pub relation: String,
    pub tail: String,
    pub tuple: u32,
    pub credibility: f64,
    /// `own`, `collab:<user>` or `item`.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateHints {
    pub item: String,
    pub hints: Vec<HintRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintSetRecord {
    pub instance: u32,
    pub mode: String,
    pub user_hints: Vec<HintRecord>,
    pub candidates: Vec<CandidateHints>,
    pub collaborators: Vec<(String, f64)>,
    pub user_side_degraded: bool,
}

fn hint_record(graph: &KnowledgeGraph, log: &InteractionLog, h: &ScoredTuple) -> HintRecord {
    let name = |o: Option<&str>| o.unwrap_or("?").to_owned();
    HintRecord {
        relation: name(graph.relation_name(h.tuple.relation)),
        tail: name(graph.entity_name(h.tuple.tail)),
        tuple: h.tuple.index.0,
        credibility: h.credibility,
        source: match h.source {
            Provenance::OwnHistory => "own".into(),
            Provenance::Collaborative(u) => format!("collab:{}", log.user(u).map(|x| x.key.as_str()).unwrap_or("?")),
            Provenance::Candidate => "item".into(),
        },
    }
}

pub fn hint_set_records(graph: &KnowledgeGraph, log: &InteractionLog, instances: &[Instance], hints: &[HintSet]) -> Vec<HintSetRecord> {
    instances
        .iter()
        .zip(hints)
        .map(|(inst, hs)| HintSetRecord {
            instance: hs.instance,
            mode: hs.mode.as_str().into(),
            user_hints: hs.user_hints.iter().map(|h| hint_record(graph, log, h)).collect(),
            candidates: inst
                .candidates
                .iter()
                .zip(&hs.item_hints)
                .map(|(&v, hl)| CandidateHints {
                    item: graph.item_key(v).unwrap_or("?").to_owned(),
                    hints: hl.iter().map(|h| hint_record(graph, log, h)).collect(),
                })
                .collect(),
            collaborators: hs
                .collaborators
                .iter()
                .map(|(u, s)| (log.user(*u).map(|x| x.key.clone()).unwrap_or_default(), *s))
                .collect(),
            user_side_degraded: hs.user_side_degraded,
        })
        .collect()
}
