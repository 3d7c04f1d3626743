//! Inference-time hint discovery: comprehensive preference pools from
//! collaborative users, dual credibility scoring and hard selection, plus
//! the ablation modes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{SelectionMode, TaskKind, TrainConfig};
use crate::graph::{AttributeTuple, ItemId, KnowledgeGraph, TupleId};
use crate::instances::{instance_inputs, Instance};
use crate::interactions::{InteractionLog, UserId};
use crate::model::HintModel;
use crate::pass::{self, InstanceInputs};
use crate::select::{hint_count, select_hints, uniform_without_replacement, CredibilityDistribution};
use crate::tensor::Real;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DiscoveryMode {
    Normal,
    /// No attribute hints at all.
    NoIpd,
    /// User pool is Γ_u, without collaborative users.
    NoCie,
    /// Uniform selection of the same counts.
    Random,
    /// Every attribute, no selection.
    All,
}

impl DiscoveryMode {
    pub const ALL_MODES: [DiscoveryMode; 5] = [Self::Normal, Self::NoIpd, Self::NoCie, Self::Random, Self::All];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::NoIpd => "no_ipd",
            Self::NoCie => "no_cie",
            Self::Random => "random",
            Self::All => "all",
        }
    }
}

impl FromStr for DiscoveryMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL_MODES
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown discovery mode `{s}`")))
    }
}

/// Where a user-side hint came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Provenance {
    OwnHistory,
    Collaborative(UserId),
    /// Item-side hints, taken from the candidate's own ego network.
    Candidate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoredTuple {
    pub tuple: AttributeTuple,
    pub credibility: f64,
    pub source: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HintSet {
    pub instance: u32,
    pub mode: DiscoveryMode,
    /// Γ̃_u, credibility non-increasing.
    pub user_hints: Vec<ScoredTuple>,
    /// Γ̃_v per candidate, aligned with the instance's candidates.
    pub item_hints: Vec<Vec<ScoredTuple>>,
    pub collaborators: Vec<(UserId, f64)>,
    /// Set when the user-side pool was empty and no user hints could be
    /// scored.
    pub user_side_degraded: bool,
}

impl HintSet {
    pub fn user_tuple_ids(&self) -> Vec<TupleId> {
        self.user_hints.iter().map(|h| h.tuple.index).collect()
    }

    pub fn item_tuple_ids(&self, c: usize) -> Vec<TupleId> {
        self.item_hints[c].iter().map(|h| h.tuple.index).collect()
    }
}

/// Knobs of a discovery run. Defaults come from the training config.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryConfig {
    pub collaborative_users: usize,
    pub alpha_user: f64,
    pub alpha_item: f64,
    /// ALL mode on listwise tasks produces very long prompts and must be
    /// requested explicitly.
    pub allow_all_listwise: bool,
    pub seed: u64,
}

impl DiscoveryConfig {
    pub fn from_train(config: &TrainConfig) -> Self {
        Self {
            collaborative_users: config.collaborative_users,
            alpha_user: config.alpha_user,
            alpha_item: config.alpha_item,
            allow_all_listwise: false,
            seed: config.seed,
        }
    }
}

/// Per-user data that depends on the model: Γ_u of the train history,
/// E_u and the projected collaborative key `W′_c E_u`.
#[derive(Debug, Clone)]
pub struct UserProfile<T> {
    pub history: Vec<ItemId>,
    pub tuples: Vec<TupleId>,
    pub rep: Vec<T>,
    pub key: Vec<T>,
}

pub fn user_profiles<T: Real>(model: &HintModel<T>, graph: &KnowledgeGraph, log: &InteractionLog) -> Result<Vec<UserProfile<T>>> {
    log.users()
        .map(|(u, _)| {
            let history = log.train_history(u, model.config.history_len)?;
            let tuples = graph.subgraph_of(&history)?;
            let rep = pass::user_representation(&model.params, u, &history, &tuples);
            let key = pass::collab_key(&model.params, &rep);
            Ok(UserProfile { history, tuples, rep, key })
        })
        .collect()
}

/// Γ̂_u: `own` plus every collaborator's Γ_u′, deduplicated with own-history
/// provenance winning. Sorted by tuple index.
pub fn merge_pools(own: &[TupleId], collaborators: &[(UserId, &[TupleId])]) -> Vec<(TupleId, Provenance)> {
    let mut merged: BTreeMap<TupleId, Provenance> = own.iter().map(|&k| (k, Provenance::OwnHistory)).collect();
    for (u, tuples) in collaborators {
        for &k in *tuples {
            merged.entry(k).or_insert(Provenance::Collaborative(*u));
        }
    }
    merged.into_iter().collect()
}

/// Read-only discovery over a trained model. Holds precomputed user
/// profiles so instances can be processed independently.
pub struct Discoverer<'a, T> {
    pub model: &'a HintModel<T>,
    pub graph: &'a KnowledgeGraph,
    pub log: &'a InteractionLog,
    pub profiles: Vec<UserProfile<T>>,
}

impl<'a, T: Real> Discoverer<'a, T> {
    pub fn new(model: &'a HintModel<T>, graph: &'a KnowledgeGraph, log: &'a InteractionLog) -> Result<Self> {
        let profiles = user_profiles(model, graph, log)?;
        Ok(Self {
            model,
            graph,
            log,
            profiles,
        })
    }

    /// Top-N collaborators of `user` among all other users.
    pub fn collaborators(&self, user: UserId, rep: &[T], n: usize) -> Vec<(UserId, T)> {
        let query = pass::collab_query(&self.model.params, rep);
        let keys = self
            .profiles
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != user.index())
            .map(|(i, p)| (UserId(i as u32), p.key.as_slice()));
        pass::rank_collaborators(&query, keys, n)
    }

    /// Γ̂_u for `user` from its train-split profile.
    pub fn comprehensive_preferences(&self, user: UserId, n: usize) -> Result<Vec<(AttributeTuple, Provenance)>> {
        let profile = self
            .profiles
            .get(user.index())
            .ok_or_else(|| Error::UnknownUser(format!("user #{}", user.0)))?;
        let collab = self.collaborators(user, &profile.rep, n);
        let pool = self.pool_with(&profile.tuples, &collab);
        Ok(pool.into_iter().map(|(k, p)| (self.graph.tuple(k).expect("pool tuples exist"), p)).collect())
    }

    fn pool_with(&self, own: &[TupleId], collab: &[(UserId, T)]) -> Vec<(TupleId, Provenance)> {
        let others: Vec<(UserId, &[TupleId])> = collab.iter().map(|(u, _)| (*u, self.profiles[u.index()].tuples.as_slice())).collect();
        merge_pools(own, &others)
    }

    /// Resolves `instance` and widens its pool with `n` collaborators.
    pub fn prepare(&self, instance: &Instance, n: usize) -> Result<(InstanceInputs, Vec<(TupleId, Provenance)>, Vec<(UserId, T)>)> {
        let mut inputs = instance_inputs(self.graph, self.log, instance, self.model.config.history_len)?;
        let rep = pass::user_representation(&self.model.params, inputs.user, &inputs.history, &inputs.history_tuples);
        let collab = self.collaborators(inputs.user, &rep, n);
        let pool = self.pool_with(&inputs.history_tuples, &collab);
        inputs.pool = pool.iter().map(|p| p.0).collect();
        Ok((inputs, pool, collab))
    }

    pub fn discover(&self, instance: &Instance, mode: DiscoveryMode, config: &DiscoveryConfig) -> Result<HintSet> {
        if mode == DiscoveryMode::All && instance.task == TaskKind::Listwise && !config.allow_all_listwise {
            return Err(Error::Config("ALL mode on listwise instances needs the explicit override".into()));
        }
        let cfg = &self.model.config;
        let n = match mode {
            DiscoveryMode::NoCie | DiscoveryMode::NoIpd => 0,
            _ => config.collaborative_users,
        };
        let (inputs, pool, collab) = self.prepare(instance, n)?;
        let provenance: BTreeMap<TupleId, Provenance> = pool.iter().copied().collect();
        let mut hints = HintSet {
            instance: instance.id,
            mode,
            user_hints: Vec::new(),
            item_hints: alloc::vec![Vec::new(); inputs.candidates.len()],
            collaborators: collab.iter().map(|(u, s)| (*u, s.as_f64())).collect(),
            user_side_degraded: false,
        };
        let user_hint = |(k, p): (TupleId, f64)| ScoredTuple {
            tuple: self.graph.tuple(k).expect("pool tuples exist"),
            credibility: p,
            source: provenance[&k],
        };
        let item_hint = |(k, p): (TupleId, f64)| ScoredTuple {
            tuple: self.graph.tuple(k).expect("ego tuples exist"),
            credibility: p,
            source: Provenance::Candidate,
        };

        match mode {
            DiscoveryMode::NoIpd => {
                hints.collaborators.clear();
            }
            DiscoveryMode::Normal | DiscoveryMode::NoCie => {
                let att = pass::attend(self.model, &inputs)?;
                // top-k never consumes randomness
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                match att.user_distribution(&inputs) {
                    Some(dist) => {
                        hints.user_hints = select_hints(&dist, config.alpha_user, cfg.user_slots, SelectionMode::TopK, &mut rng)
                            .into_iter()
                            .map(user_hint)
                            .collect();
                    }
                    None => hints.user_side_degraded = true,
                }
                for c in 0..inputs.candidates.len() {
                    if let Some(dist) = att.item_distribution(&inputs, c) {
                        hints.item_hints[c] = select_hints(&dist, config.alpha_item, cfg.item_slots, SelectionMode::TopK, &mut rng)
                            .into_iter()
                            .map(item_hint)
                            .collect();
                    }
                }
            }
            DiscoveryMode::Random => {
                let mut rng = instance_rng(config.seed, instance.id);
                let pick = |pool: &[TupleId], alpha: f64, cap: usize, rng: &mut ChaCha8Rng| -> Vec<(TupleId, f64)> {
                    let m = hint_count(alpha, pool.len(), cap);
                    let p = 1.0 / pool.len().max(1) as f64;
                    uniform_without_replacement(pool.len(), m, rng).into_iter().map(|i| (pool[i], p)).collect()
                };
                hints.user_hints = pick(&inputs.pool, config.alpha_user, cfg.user_slots, &mut rng).into_iter().map(user_hint).collect();
                for (c, ego) in inputs.candidate_tuples.iter().enumerate() {
                    hints.item_hints[c] = pick(ego, config.alpha_item, cfg.item_slots, &mut rng).into_iter().map(item_hint).collect();
                }
            }
            DiscoveryMode::All => {
                if !inputs.pool.is_empty() {
                    hints.user_hints = CredibilityDistribution::uniform(&inputs.pool).entries().iter().copied().map(user_hint).collect();
                }
                for (c, ego) in inputs.candidate_tuples.iter().enumerate() {
                    if !ego.is_empty() {
                        hints.item_hints[c] = CredibilityDistribution::uniform(ego).entries().iter().copied().map(item_hint).collect();
                    }
                }
            }
        }
        Ok(hints)
    }
}

/// Per-instance generator derived from the global seed and the instance id.
pub fn instance_rng(seed: u64, instance: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(instance as u64);
    rng
}

/// Convenience wrapper over [`Discoverer`] for a single instance.
pub fn discover_instance_hints<T: Real>(
    model: &HintModel<T>,
    graph: &KnowledgeGraph,
    log: &InteractionLog,
    instance: &Instance,
    mode: DiscoveryMode,
    config: &DiscoveryConfig,
) -> Result<HintSet> {
    Discoverer::new(model, graph, log)?.discover(instance, mode, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn own_history_wins_and_disjoint_union_adds_up() {
        let own = [TupleId(1), TupleId(3)];
        let a = [TupleId(3), TupleId(4)];
        let b = [TupleId(7)];
        let merged = merge_pools(&own, &[(UserId(5), &a), (UserId(6), &b)]);
        assert_eq!(
            merged,
            alloc::vec![
                (TupleId(1), Provenance::OwnHistory),
                (TupleId(3), Provenance::OwnHistory),
                (TupleId(4), Provenance::Collaborative(UserId(5))),
                (TupleId(7), Provenance::Collaborative(UserId(6))),
            ]
        );
        let disjoint = merge_pools(&own, &[(UserId(6), &b)]);
        assert_eq!(disjoint.len(), own.len() + b.len());
        assert_eq!(merge_pools(&own, &[]).len(), 2);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in DiscoveryMode::ALL_MODES {
            assert_eq!(m.as_str().parse::<DiscoveryMode>().unwrap(), m);
        }
        assert!("nope".parse::<DiscoveryMode>().is_err());
    }
}
