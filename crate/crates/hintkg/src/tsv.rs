//! Tab-separated dataset files.
//!
//! * `entities.tsv`: `id  name  type  is_item`
//! * `relations.tsv`: `id  name`
//! * `kg_triples.tsv`: `head  relation  tail`
//! * `interactions.tsv`: `user  item  timestamp`
//!
//! Blank lines and lines starting with `#` are ignored. A first line equal to
//! the column names is treated as a header.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use hintkg_core::interactions::SplitPolicy;
use hintkg_core::{GraphBuilder, InteractionLog, KnowledgeGraph};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRIPLES_FILE: &str = "kg_triples.tsv";
pub const ENTITIES_FILE: &str = "entities.tsv";
pub const RELATIONS_FILE: &str = "relations.tsv";
pub const INTERACTIONS_FILE: &str = "interactions.tsv";

const ENTITY_COLUMNS: [&str; 4] = ["id", "name", "type", "is_item"];
const RELATION_COLUMNS: [&str; 2] = ["id", "name"];
const TRIPLE_COLUMNS: [&str; 3] = ["head", "relation", "tail"];
const INTERACTION_COLUMNS: [&str; 3] = ["user", "item", "timestamp"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPaths {
    pub triples: PathBuf,
    pub entities: PathBuf,
    pub relations: PathBuf,
    pub interactions: PathBuf,
}

impl DataPaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            triples: dir.join(TRIPLES_FILE),
            entities: dir.join(ENTITIES_FILE),
            relations: dir.join(RELATIONS_FILE),
            interactions: dir.join(INTERACTIONS_FILE),
        }
    }

    pub fn all(&self) -> [&Path; 4] {
        [&self.triples, &self.entities, &self.relations, &self.interactions]
    }
}

struct Row {
    line: usize,
    fields: Vec<String>,
}

fn read_rows(path: &Path, columns: &[&str]) -> Result<Vec<Row>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(str::to_owned).collect();
        if fields.len() != columns.len() {
            return Err(Error::Parse {
                path: path.into(),
                line: i + 1,
                message: format!("expected {} tab-separated columns, found {}", columns.len(), fields.len()),
            });
        }
        if rows.is_empty() && fields.iter().zip(columns).all(|(f, c)| f == c) {
            continue;
        }
        rows.push(Row { line: i + 1, fields });
    }
    Ok(rows)
}

fn parse_flag(path: &Path, line: usize, s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        other => Err(Error::Parse {
            path: path.into(),
            line,
            message: format!("is_item must be 0/1/true/false, got `{other}`"),
        }),
    }
}

fn at_line(path: &Path, line: usize, e: hintkg_core::Error) -> Error {
    match e {
        hintkg_core::Error::Integrity(m) => hintkg_core::Error::Integrity(format!("{}:{line}: {m}", path.display())).into(),
        other => other.into(),
    }
}

pub fn load_knowledge_graph(triples: &Path, entities: &Path, relations: &Path) -> Result<KnowledgeGraph> {
    let mut b = GraphBuilder::new();
    for row in read_rows(entities, &ENTITY_COLUMNS)? {
        let f = &row.fields;
        let is_item = parse_flag(entities, row.line, &f[3])?;
        b.add_entity(&f[0], &f[1], &f[2], is_item).map_err(|e| at_line(entities, row.line, e))?;
    }
    for row in read_rows(relations, &RELATION_COLUMNS)? {
        b.add_relation(&row.fields[0], &row.fields[1]).map_err(|e| at_line(relations, row.line, e))?;
    }
    for row in read_rows(triples, &TRIPLE_COLUMNS)? {
        let f = &row.fields;
        b.add_triple(&f[0], &f[1], &f[2]).map_err(|e| at_line(triples, row.line, e))?;
    }
    b.build().map_err(|e| match e {
        hintkg_core::Error::Integrity(m) => hintkg_core::Error::Integrity(format!("{}: {m}", triples.display())).into(),
        other => other.into(),
    })
}

pub fn load_interactions(path: &Path, graph: &KnowledgeGraph, policy: SplitPolicy) -> Result<InteractionLog> {
    let rows = read_rows(path, &INTERACTION_COLUMNS)?;
    let mut records = Vec::with_capacity(rows.len());
    for row in &rows {
        let ts: i64 = row.fields[2].trim().parse().map_err(|_| Error::Parse {
            path: path.into(),
            line: row.line,
            message: format!("timestamp `{}` is not an integer", row.fields[2]),
        })?;
        if graph.item_by_key(&row.fields[1]).is_none() {
            return Err(hintkg_core::Error::Integrity(format!("{}:{}: unknown item `{}`", path.display(), row.line, row.fields[1])).into());
        }
        records.push((row.fields[0].as_str(), row.fields[1].as_str(), ts));
    }
    Ok(InteractionLog::from_records(graph, records, policy)?)
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: KnowledgeGraph,
    pub log: InteractionLog,
}

impl Dataset {
    pub fn load(paths: &DataPaths) -> Result<Self> {
        let graph = load_knowledge_graph(&paths.triples, &paths.entities, &paths.relations)?;
        let log = load_interactions(&paths.interactions, &graph, SplitPolicy::LeaveOneOut)?;
        Ok(Self { graph, log })
    }

    pub fn report(&self) -> LoadReport {
        LoadReport::of(&self.graph, &self.log)
    }
}

/// Counts comparable with the usual dataset statistics tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub entities: usize,
    pub entity_types: usize,
    pub relation_types: usize,
    pub triples: usize,
    pub duplicate_triples: usize,
    pub items: usize,
    pub attribute_tuples: usize,
    pub users: usize,
    pub skipped_users: usize,
    pub interactions: usize,
    /// Distinct attribute tuples per item.
    pub avg_item_degree: f64,
    /// Triples per item, the other common reading of "degree".
    pub avg_triples_per_item: f64,
    pub avg_interactions_per_user: f64,
}

impl LoadReport {
    pub fn of(graph: &KnowledgeGraph, log: &InteractionLog) -> Self {
        let items = graph.num_items();
        let users = log.num_users();
        let per = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Self {
            entities: graph.entities().len(),
            entity_types: graph.entities().iter().map(|e| e.kind.as_str()).collect::<std::collections::BTreeSet<_>>().len(),
            relation_types: graph.relations().len(),
            triples: graph.triples().len(),
            duplicate_triples: graph.duplicate_triples(),
            items,
            attribute_tuples: graph.num_tuples(),
            users,
            skipped_users: log.skipped().len(),
            interactions: log.num_interactions(),
            avg_item_degree: graph.avg_item_degree(),
            avg_triples_per_item: per(graph.triples().len(), items),
            avg_interactions_per_user: per(log.num_interactions(), users),
        }
    }
}

impl fmt::Display for LoadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "entities: {} ({} types)", self.entities, self.entity_types)?;
        writeln!(f, "relation types: {}", self.relation_types)?;
        writeln!(f, "triples: {} ({} duplicates dropped)", self.triples, self.duplicate_triples)?;
        writeln!(f, "items: {}", self.items)?;
        writeln!(f, "attribute tuples: {}", self.attribute_tuples)?;
        writeln!(f, "users: {} ({} skipped with < 3 interactions)", self.users, self.skipped_users)?;
        writeln!(f, "interactions: {}", self.interactions)?;
        writeln!(f, "avg item degree: {:.4}", self.avg_item_degree)?;
        writeln!(f, "avg triples per item: {:.4}", self.avg_triples_per_item)?;
        write!(f, "avg interactions per user: {:.4}", self.avg_interactions_per_user)
    }
}

/// Writes rows with a header line. Fields must not contain tabs or
/// newlines.
pub fn write_tsv<'a, I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[&'a str]>,
{
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", header.join("\t")).map_err(io)?;
    for row in rows {
        let row = row.as_ref();
        if let Some(bad) = row.iter().find(|f| f.contains(['\t', '\n', '\r'])) {
            return Err(Error::Config(format!("field {bad:?} contains a tab or newline")));
        }
        writeln!(w, "{}", row.join("\t")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn entity_header() -> &'static [&'static str] {
    &ENTITY_COLUMNS
}

pub fn relation_header() -> &'static [&'static str] {
    &RELATION_COLUMNS
}

pub fn triple_header() -> &'static [&'static str] {
    &TRIPLE_COLUMNS
}

pub fn interaction_header() -> &'static [&'static str] {
    &INTERACTION_COLUMNS
}
