//! Pairwise and listwise recommendation instances with seeded negative
//! sampling.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::config::TaskKind;
use crate::graph::{ItemId, KnowledgeGraph};
use crate::interactions::{InteractionLog, Split, UserId};
use crate::pass::InstanceInputs;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Instance {
    pub id: u32,
    pub user: UserId,
    pub split: Split,
    pub task: TaskKind,
    /// Number of the user's chronologically first interactions that form
    /// the context of this instance.
    pub history_end: usize,
    pub candidates: Vec<ItemId>,
    /// Position of the ground truth in `candidates`.
    pub target: usize,
}

impl Instance {
    pub fn gold(&self) -> ItemId {
        self.candidates[self.target]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkipEntry {
    pub user: UserId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InstanceSet {
    pub instances: Vec<Instance>,
    pub skipped: Vec<SkipEntry>,
}

/// Builds instances for `split`. Valid and test produce one instance per
/// user whose context is the train split; train produces one instance per
/// train interaction after the first, with the preceding interactions as
/// context. Negatives never occur anywhere in the user's history.
pub fn build_instances<R: Rng + ?Sized>(
    log: &InteractionLog,
    graph: &KnowledgeGraph,
    split: Split,
    task: TaskKind,
    rng: &mut R,
) -> InstanceSet {
    let size = task.candidates();
    let mut out = InstanceSet::default();
    for (user, history) in log.users() {
        let seen: BTreeSet<ItemId> = history.items().collect();
        let complement: Vec<ItemId> = graph.items().filter(|v| !seen.contains(v)).collect();
        if complement.len() < size - 1 {
            out.skipped.push(SkipEntry {
                user,
                reason: format!("only {} non-interacted items, need {}", complement.len(), size - 1),
            });
            continue;
        }
        let targets: Vec<(usize, ItemId)> = match split {
            Split::Train => (1..history.train_len()).map(|i| (i, history.interactions[i].item)).collect(),
            Split::Valid | Split::Test => {
                alloc::vec![(history.train_len(), history.target(split).expect("valid/test targets exist"))]
            }
        };
        for (history_end, gold) in targets {
            let mut candidates: Vec<ItemId> = if size == 2 {
                alloc::vec![complement[rng.random_range(0..complement.len())]]
            } else {
                rand::seq::index::sample(rng, complement.len(), size - 1)
                    .into_iter()
                    .map(|i| complement[i])
                    .collect()
            };
            let target = rng.random_range(0..size);
            candidates.insert(target, gold);
            out.instances.push(Instance {
                id: out.instances.len() as u32,
                user,
                split,
                task,
                history_end,
                candidates,
                target,
            });
        }
    }
    out
}

pub fn build_pairwise_instances<R: Rng + ?Sized>(log: &InteractionLog, graph: &KnowledgeGraph, split: Split, rng: &mut R) -> InstanceSet {
    build_instances(log, graph, split, TaskKind::Pairwise, rng)
}

pub fn build_listwise_instances<R: Rng + ?Sized>(log: &InteractionLog, graph: &KnowledgeGraph, split: Split, rng: &mut R) -> InstanceSet {
    build_instances(log, graph, split, TaskKind::Listwise, rng)
}

/// Uniform subsample of `num` instances, kept in their original order.
pub fn few_shot_subsample<R: Rng + ?Sized>(instances: &[Instance], num: usize, rng: &mut R) -> Result<Vec<Instance>> {
    if num > instances.len() {
        return Err(Error::Config(format!("requested {num} training instances, only {} available", instances.len())));
    }
    let mut picked = rand::seq::index::sample(rng, instances.len(), num).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| instances[i].clone()).collect())
}

/// Resolves an instance to dense model inputs. The pool starts as Γ_u;
/// discovery widens it with collaborative users.
pub fn instance_inputs(graph: &KnowledgeGraph, log: &InteractionLog, instance: &Instance, history_len: usize) -> Result<InstanceInputs> {
    let history = log.history_before(instance.user, instance.history_end, history_len)?;
    let history_tuples = graph.subgraph_of(&history)?;
    let candidate_tuples = instance
        .candidates
        .iter()
        .map(|&v| graph.ego_tuples(v).map(<[_]>::to_vec))
        .collect::<Result<Vec<_>>>()?;
    Ok(InstanceInputs {
        user: instance.user,
        pool: history_tuples.clone(),
        history,
        history_tuples,
        candidates: instance.candidates.clone(),
        candidate_tuples,
        target: instance.target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;
    use crate::interactions::SplitPolicy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_items() -> (KnowledgeGraph, InteractionLog) {
        let mut b = GraphBuilder::new();
        b.add_entity("a", "A", "movie", true).unwrap();
        b.add_entity("b", "B", "movie", true).unwrap();
        b.add_entity("c", "C", "movie", true).unwrap();
        b.add_entity("d", "D", "movie", true).unwrap();
        b.add_relation("r", "r").unwrap();
        b.add_triple("a", "r", "b").unwrap();
        let g = b.build().unwrap();
        let log = InteractionLog::from_records(&g, [("u", "a", 1), ("u", "b", 2), ("u", "c", 3)], SplitPolicy::LeaveOneOut).unwrap();
        (g, log)
    }

    #[test]
    fn single_possible_negative() {
        let (g, log) = two_items();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set = build_pairwise_instances(&log, &g, Split::Test, &mut rng);
        assert_eq!(set.instances.len(), 1);
        let inst = &set.instances[0];
        assert_eq!(inst.candidates.len(), 2);
        assert_eq!(inst.gold(), g.item_by_key("c").unwrap());
        assert!(inst.candidates.contains(&g.item_by_key("d").unwrap()));
    }

    #[test]
    fn listwise_skips_small_universe() {
        let (g, log) = two_items();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set = build_listwise_instances(&log, &g, Split::Test, &mut rng);
        assert!(set.instances.is_empty());
        assert_eq!(set.skipped.len(), 1);
    }

    #[test]
    fn few_shot_bounds() {
        let (g, log) = two_items();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set = build_pairwise_instances(&log, &g, Split::Train, &mut rng);
        assert_eq!(set.instances.len(), 0); // one train interaction, no context for it
        let set = build_pairwise_instances(&log, &g, Split::Valid, &mut rng);
        assert_eq!(few_shot_subsample(&set.instances, 1, &mut rng).unwrap(), set.instances);
        assert!(few_shot_subsample(&set.instances, 0, &mut rng).unwrap().is_empty());
        assert!(few_shot_subsample(&set.instances, 2, &mut rng).is_err());
    }
}
