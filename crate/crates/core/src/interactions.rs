//! Chronological per-user interaction sequences with leave-one-out splits.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::graph::{ItemId, KnowledgeGraph, TupleId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct UserId(pub u32);

impl UserId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitPolicy {
    /// Last interaction is test, second-to-last valid, the rest train.
    #[default]
    LeaveOneOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interaction {
    pub item: ItemId,
    pub timestamp: i64,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserHistory {
    pub key: String,
    pub interactions: Vec<Interaction>,
}

impl UserHistory {
    /// Number of train-split interactions; they always form a prefix.
    pub fn train_len(&self) -> usize {
        self.interactions.len() - 2
    }

    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.interactions.iter().map(|i| i.item)
    }

    pub fn target(&self, split: Split) -> Option<ItemId> {
        let n = self.interactions.len();
        match split {
            Split::Test => Some(self.interactions[n - 1].item),
            Split::Valid => Some(self.interactions[n - 2].item),
            Split::Train => None,
        }
    }
}

/// A user dropped at load time because leave-one-out needs three
/// interactions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedUser {
    pub key: String,
    pub interactions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionLog {
    users: Vec<UserHistory>,
    lookup: BTreeMap<String, UserId>,
    skipped: Vec<SkippedUser>,
}

impl InteractionLog {
    /// Builds the log from `(user, item, timestamp)` records with external
    /// ids. Users keep first-appearance order; each sequence is stably sorted
    /// by timestamp before splitting.
    pub fn from_records<'a, I>(graph: &KnowledgeGraph, records: I, policy: SplitPolicy) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str, i64)>,
    {
        let SplitPolicy::LeaveOneOut = policy;
        let mut order: Vec<String> = Vec::new();
        let mut raw: BTreeMap<String, Vec<(ItemId, i64)>> = BTreeMap::new();
        for (user, item_key, ts) in records {
            let item = graph
                .item_by_key(item_key)
                .ok_or_else(|| Error::Integrity(format!("interaction references unknown item `{item_key}`")))?;
            raw.entry(user.into())
                .or_insert_with(|| {
                    order.push(user.into());
                    Vec::new()
                })
                .push((item, ts));
        }

        let mut users = Vec::new();
        let mut lookup = BTreeMap::new();
        let mut skipped = Vec::new();
        for key in order {
            let mut seq = raw.remove(&key).unwrap_or_default();
            if seq.len() < 3 {
                skipped.push(SkippedUser {
                    key,
                    interactions: seq.len(),
                });
                continue;
            }
            seq.sort_by_key(|&(_, ts)| ts);
            let n = seq.len();
            let interactions = seq
                .into_iter()
                .enumerate()
                .map(|(i, (item, timestamp))| Interaction {
                    item,
                    timestamp,
                    split: if i + 1 == n {
                        Split::Test
                    } else if i + 2 == n {
                        Split::Valid
                    } else {
                        Split::Train
                    },
                })
                .collect();
            lookup.insert(key.clone(), UserId(users.len() as u32));
            users.push(UserHistory { key, interactions });
        }
        Ok(Self { users, lookup, skipped })
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_interactions(&self) -> usize {
        self.users.iter().map(|u| u.interactions.len()).sum()
    }

    pub fn users(&self) -> impl Iterator<Item = (UserId, &UserHistory)> {
        self.users.iter().enumerate().map(|(i, u)| (UserId(i as u32), u))
    }

    pub fn user(&self, id: UserId) -> Result<&UserHistory> {
        self.users
            .get(id.index())
            .ok_or_else(|| Error::UnknownUser(format!("user #{}", id.0)))
    }

    pub fn user_by_key(&self, key: &str) -> Option<UserId> {
        self.lookup.get(key).copied()
    }

    pub fn skipped(&self) -> &[SkippedUser] {
        &self.skipped
    }

    /// The chronologically last `len` interactions among the first `end`
    /// interactions of `user`, without padding.
    pub fn history_before(&self, user: UserId, end: usize, len: usize) -> Result<Vec<ItemId>> {
        let h = self.user(user)?;
        let end = end.min(h.interactions.len());
        let start = end.saturating_sub(len);
        Ok(h.interactions[start..end].iter().map(|i| i.item).collect())
    }

    /// B_u: the last `len` train-split interactions of `user`.
    pub fn train_history(&self, user: UserId, len: usize) -> Result<Vec<ItemId>> {
        let end = self.user(user)?.train_len();
        self.history_before(user, end, len)
    }
}

/// Γ_u: deduplicated union of the ego networks of the user's last
/// `history_len` train interactions.
pub fn user_subgraph(graph: &KnowledgeGraph, log: &InteractionLog, user: UserId, history_len: usize) -> Result<Vec<TupleId>> {
    graph.subgraph_of(&log.train_history(user, history_len)?)
}

/// Keeps the last `len` items and left-pads with [`ItemId::PAD`] up to
/// `len`.
pub fn truncate_and_pad_history(seq: &[ItemId], len: usize) -> Vec<ItemId> {
    let keep = &seq[seq.len().saturating_sub(len)..];
    let mut out = Vec::with_capacity(len);
    out.resize(len - keep.len(), ItemId::PAD);
    out.extend_from_slice(keep);
    out
}
