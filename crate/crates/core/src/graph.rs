//! Knowledge graph storage: entity and relation vocabularies, the triple
//! list, the dense attribute-tuple vocabulary and per-item ego networks.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

macro_rules! dense_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        #[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
        #[cfg_attr(feature = "serde", serde(transparent))]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

dense_id!(EntityId);
dense_id!(RelationId);
dense_id!(
    /// Dense index over distinct `(relation, tail)` pairs.
    TupleId
);
dense_id!(
    /// Dense item index. `ItemId::PAD` (0) is reserved for history padding;
    /// real items are numbered from 1.
    ItemId
);

impl ItemId {
    pub const PAD: ItemId = ItemId(0);

    pub fn is_pad(self) -> bool {
        self == Self::PAD
    }
}

pub const PAD_NAME: &str = "[PAD]";

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Entity {
    pub key: String,
    pub name: String,
    pub kind: String,
    pub is_item: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Relation {
    pub key: String,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

/// A `(relation, tail)` attribute attached to some head entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttributeTuple {
    pub relation: RelationId,
    pub tail: EntityId,
    pub index: TupleId,
}

/// Collects vocabulary entries and triples, then freezes them into a
/// [`KnowledgeGraph`].
#[derive(Debug, Default)]
pub struct GraphBuilder {
    entities: Vec<Entity>,
    entity_lookup: BTreeMap<String, EntityId>,
    relations: Vec<Relation>,
    relation_lookup: BTreeMap<String, RelationId>,
    triples: Vec<Triple>,
    seen: BTreeSet<Triple>,
    duplicates: usize,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_entity(&mut self, key: &str, name: &str, kind: &str, is_item: bool) -> Result<EntityId> {
        if self.entity_lookup.contains_key(key) {
            return Err(Error::Integrity(format!("duplicate entity id `{key}`")));
        }
        let id = EntityId(self.entities.len() as u32);
        self.entities.push(Entity {
            key: key.into(),
            name: name.into(),
            kind: kind.into(),
            is_item,
        });
        self.entity_lookup.insert(key.into(), id);
        Ok(id)
    }

    pub fn add_relation(&mut self, key: &str, name: &str) -> Result<RelationId> {
        if self.relation_lookup.contains_key(key) {
            return Err(Error::Integrity(format!("duplicate relation id `{key}`")));
        }
        let id = RelationId(self.relations.len() as u32);
        self.relations.push(Relation {
            key: key.into(),
            name: name.into(),
        });
        self.relation_lookup.insert(key.into(), id);
        Ok(id)
    }

    /// Adds a triple by external ids. Returns `false` when the triple was a
    /// duplicate and has been dropped.
    pub fn add_triple(&mut self, head: &str, relation: &str, tail: &str) -> Result<bool> {
        let lookup = |map: &BTreeMap<String, EntityId>, key: &str, role: &str| {
            map.get(key)
                .copied()
                .ok_or_else(|| Error::Integrity(format!("triple references unknown {role} entity `{key}`")))
        };
        let head = lookup(&self.entity_lookup, head, "head")?;
        let tail = lookup(&self.entity_lookup, tail, "tail")?;
        let relation = self
            .relation_lookup
            .get(relation)
            .copied()
            .ok_or_else(|| Error::Integrity(format!("triple references unknown relation `{relation}`")))?;
        let triple = Triple { head, relation, tail };
        if !self.seen.insert(triple) {
            self.duplicates += 1;
            return Ok(false);
        }
        self.triples.push(triple);
        Ok(true)
    }

    pub fn build(self) -> Result<KnowledgeGraph> {
        if self.triples.is_empty() {
            return Err(Error::Integrity("knowledge graph has no triples".into()));
        }
        let GraphBuilder {
            entities,
            entity_lookup,
            relations,
            relation_lookup,
            triples,
            duplicates,
            ..
        } = self;

        let mut item_entities = Vec::new();
        let mut item_of_entity = BTreeMap::new();
        for (i, e) in entities.iter().enumerate() {
            if e.is_item {
                item_of_entity.insert(EntityId(i as u32), ItemId(item_entities.len() as u32 + 1));
                item_entities.push(EntityId(i as u32));
            }
        }

        let vocabulary = build_tuple_vocabulary(&triples);
        let tuples: Vec<(RelationId, EntityId)> = vocabulary.keys().copied().collect();

        let mut ego = vec_of_empty(item_entities.len() + 1);
        for t in &triples {
            if let Some(item) = item_of_entity.get(&t.head) {
                ego[item.index()].push(vocabulary[&(t.relation, t.tail)]);
            }
        }
        for list in &mut ego {
            list.sort_unstable();
            list.dedup();
        }

        Ok(KnowledgeGraph {
            entities,
            entity_lookup,
            relations,
            relation_lookup,
            triples,
            item_entities,
            item_of_entity,
            tuples,
            vocabulary,
            ego,
            duplicate_triples: duplicates,
        })
    }
}

fn vec_of_empty(n: usize) -> Vec<Vec<TupleId>> {
    let mut v = Vec::with_capacity(n);
    v.resize_with(n, Vec::new);
    v
}

/// Dense tuple indices over distinct `(relation, tail)` pairs in ascending
/// `(relation id, tail id)` order.
pub fn build_tuple_vocabulary(triples: &[Triple]) -> BTreeMap<(RelationId, EntityId), TupleId> {
    let distinct: BTreeSet<(RelationId, EntityId)> = triples.iter().map(|t| (t.relation, t.tail)).collect();
    distinct
        .into_iter()
        .enumerate()
        .map(|(i, pair)| (pair, TupleId(i as u32)))
        .collect()
}

/// Immutable, fully indexed knowledge graph.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: Vec<Entity>,
    entity_lookup: BTreeMap<String, EntityId>,
    relations: Vec<Relation>,
    relation_lookup: BTreeMap<String, RelationId>,
    triples: Vec<Triple>,
    item_entities: Vec<EntityId>,
    item_of_entity: BTreeMap<EntityId, ItemId>,
    tuples: Vec<(RelationId, EntityId)>,
    vocabulary: BTreeMap<(RelationId, EntityId), TupleId>,
    ego: Vec<Vec<TupleId>>,
    duplicate_triples: usize,
}

impl KnowledgeGraph {
    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn num_items(&self) -> usize {
        self.item_entities.len()
    }

    pub fn num_tuples(&self) -> usize {
        self.tuples.len()
    }

    /// Number of duplicate triple lines dropped while loading.
    pub fn duplicate_triples(&self) -> usize {
        self.duplicate_triples
    }

    pub fn entity_by_key(&self, key: &str) -> Option<EntityId> {
        self.entity_lookup.get(key).copied()
    }

    pub fn relation_by_key(&self, key: &str) -> Option<RelationId> {
        self.relation_lookup.get(key).copied()
    }

    pub fn entity(&self, id: EntityId) -> Option<&Entity> {
        self.entities.get(id.index())
    }

    pub fn entity_name(&self, id: EntityId) -> Option<&str> {
        self.entity(id).map(|e| e.name.as_str())
    }

    pub fn relation_name(&self, id: RelationId) -> Option<&str> {
        self.relations.get(id.index()).map(|r| r.name.as_str())
    }

    /// Iterates real items (never the pad item) in ascending id order.
    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        (1..=self.item_entities.len() as u32).map(ItemId)
    }

    pub fn item_by_key(&self, key: &str) -> Option<ItemId> {
        self.entity_by_key(key).and_then(|e| self.item_of_entity.get(&e).copied())
    }

    pub fn item_entity(&self, item: ItemId) -> Option<EntityId> {
        if item.is_pad() {
            return None;
        }
        self.item_entities.get(item.index() - 1).copied()
    }

    pub fn item_key(&self, item: ItemId) -> Option<&str> {
        self.item_entity(item).map(|e| self.entities[e.index()].key.as_str())
    }

    /// Display title of an item; the pad item renders as `[PAD]`.
    pub fn item_title(&self, item: ItemId) -> Option<&str> {
        if item.is_pad() {
            return Some(PAD_NAME);
        }
        self.item_entity(item).map(|e| self.entities[e.index()].name.as_str())
    }

    pub fn tuple(&self, id: TupleId) -> Option<AttributeTuple> {
        self.tuples.get(id.index()).map(|&(relation, tail)| AttributeTuple {
            relation,
            tail,
            index: id,
        })
    }

    pub fn tuple_id(&self, relation: RelationId, tail: EntityId) -> Option<TupleId> {
        self.vocabulary.get(&(relation, tail)).copied()
    }

    /// The `(relation, tail) -> tuple index` mapping.
    pub fn tuple_vocabulary(&self) -> &BTreeMap<(RelationId, EntityId), TupleId> {
        &self.vocabulary
    }

    /// Tuple indices of an item's ego network, ascending. The pad item has
    /// an empty ego network.
    pub fn ego_tuples(&self, item: ItemId) -> Result<&[TupleId]> {
        self.ego
            .get(item.index())
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownItem(format!("item #{}", item.0)))
    }

    /// Γ_v: every `(r, t)` with `(v, r, t)` in the graph.
    pub fn item_ego_network(&self, item: ItemId) -> Result<Vec<AttributeTuple>> {
        Ok(self
            .ego_tuples(item)?
            .iter()
            .map(|&k| self.tuple(k).expect("ego tuples come from the vocabulary"))
            .collect())
    }

    /// Deduplicated union of the ego networks of `items`, ascending by
    /// tuple index. Pad items contribute nothing.
    pub fn subgraph_of(&self, items: &[ItemId]) -> Result<Vec<TupleId>> {
        let mut out = Vec::new();
        for &v in items {
            out.extend_from_slice(self.ego_tuples(v)?);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Mean number of attribute tuples per item.
    pub fn avg_item_degree(&self) -> f64 {
        if self.item_entities.is_empty() {
            return 0.0;
        }
        let total: usize = self.ego.iter().map(Vec::len).sum();
        total as f64 / self.item_entities.len() as f64
    }
}
