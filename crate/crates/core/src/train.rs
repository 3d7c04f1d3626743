//! Mini-batch BPR training of the hint model with Adam and early stopping
//! on validation HitRatio@1 of the MLP head.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{SelectionMode, SlotWeights, TrainConfig};
use crate::discovery::{merge_pools, user_profiles, DiscoveryConfig, Discoverer};
use crate::graph::{KnowledgeGraph, TupleId};
use crate::instances::{instance_inputs, Instance};
use crate::interactions::{InteractionLog, UserId};
use crate::model::{HintModel, ModelDims, Params};
use crate::optim::Adam;
use crate::pass::{self, Selection};
use crate::select::select_hints;
use crate::tensor::Real;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-instance BPR loss.
    pub train_loss: f64,
    pub valid_hit_ratio: f64,
    pub improved: bool,
    /// Mean loss of each mini-batch, in order.
    pub batch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
    /// Epoch of the returned parameters; 0 means the initialization.
    pub best_epoch: usize,
    pub best_valid_hit_ratio: f64,
    pub stopped_early: bool,
}

pub fn model_dims(graph: &KnowledgeGraph, log: &InteractionLog) -> ModelDims {
    ModelDims {
        users: log.num_users(),
        items: graph.num_items(),
        tuples: graph.num_tuples(),
    }
}

/// Validation HitRatio@1 of the MLP head: discovery with top-k selection,
/// unweighted scoring, a hit when the ground truth strictly outscores every
/// other candidate.
pub fn head_hit_ratio<T: Real>(model: &HintModel<T>, graph: &KnowledgeGraph, log: &InteractionLog, instances: &[Instance]) -> Result<f64> {
    if instances.is_empty() {
        return Ok(0.0);
    }
    let disc = Discoverer::new(model, graph, log)?;
    let cfg = DiscoveryConfig::from_train(&model.config);
    let mut hits = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for inst in instances {
        let (inputs, _, _) = disc.prepare(inst, cfg.collaborative_users)?;
        let att = pass::attend(model, &inputs)?;
        let sel = select_all(model, &inputs, &att, SelectionMode::TopK, &mut rng);
        let scored = pass::score(model, &inputs, &att, &sel, false);
        let gold = scored.scores[inputs.target];
        if scored.scores.iter().enumerate().all(|(c, &s)| c == inputs.target || gold > s) {
            hits += 1;
        }
    }
    Ok(hits as f64 / instances.len() as f64)
}

fn select_all<T: Real>(
    model: &HintModel<T>,
    inputs: &pass::InstanceInputs,
    att: &pass::Attended<T>,
    mode: SelectionMode,
    rng: &mut ChaCha8Rng,
) -> Selection {
    let cfg = &model.config;
    let user: Vec<TupleId> = att
        .user_distribution(inputs)
        .map(|d| select_hints(&d, cfg.alpha_user, cfg.user_slots, mode, rng).into_iter().map(|e| e.0).collect())
        .unwrap_or_default();
    let items: Vec<Vec<TupleId>> = (0..inputs.candidates.len())
        .map(|c| {
            att.item_distribution(inputs, c)
                .map(|d| select_hints(&d, cfg.alpha_item, cfg.item_slots, mode, rng).into_iter().map(|e| e.0).collect())
                .unwrap_or_default()
        })
        .collect();
    Selection::from_tuples(inputs, &user, &items)
}

/// Trains from a seeded initialization. `observer` sees each epoch report
/// as soon as it is complete. Returns the best-validation parameters (the
/// initialization when no epoch ran or none improved on it).
pub fn train<T: Real>(
    graph: &KnowledgeGraph,
    log: &InteractionLog,
    train_instances: &[Instance],
    valid_instances: &[Instance],
    config: TrainConfig,
    observer: &mut dyn FnMut(&EpochReport),
) -> Result<(HintModel<T>, TrainReport)> {
    let mut model = HintModel::<T>::new(config, model_dims(graph, log))?;
    let cfg = model.config.clone();
    let adam = Adam {
        learning_rate: cfg.learning_rate,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        epsilon: cfg.epsilon,
    };
    let mut report = TrainReport::default();
    if cfg.max_epochs == 0 || train_instances.is_empty() {
        return Ok((model, report));
    }

    // Γ_u of every user's train history is fixed by the data
    let static_tuples: Vec<Vec<TupleId>> = user_profiles(&model, graph, log)?.into_iter().map(|p| p.tuples).collect();
    let inputs: Vec<pass::InstanceInputs> = train_instances
        .iter()
        .map(|i| instance_inputs(graph, log, i, cfg.history_len))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7261_696e);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut grads = Params::<T>::zeros(&cfg, model.dims);
    let mut best = model.clone();
    report.best_valid_hit_ratio = head_hit_ratio(&model, graph, log, valid_instances)?;
    let mut since_best = 0usize;
    let mut batch_id = 0usize;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        let mut batch_losses = Vec::new();
        for batch in order.chunks(cfg.batch_size) {
            grads.zero_();
            let users: BTreeSet<UserId> = batch.iter().map(|&i| inputs[i].user).collect();
            let keys: Vec<(UserId, Vec<T>)> = users
                .iter()
                .map(|&u| {
                    let history = log.train_history(u, cfg.history_len)?;
                    let rep = pass::user_representation(&model.params, u, &history, &static_tuples[u.index()]);
                    Ok((u, pass::collab_key(&model.params, &rep)))
                })
                .collect::<Result<_>>()?;

            let mut batch_loss = T::zero();
            for &i in batch {
                let mut inst = inputs[i].clone();
                let rep = pass::user_representation(&model.params, inst.user, &inst.history, &inst.history_tuples);
                let query = pass::collab_query(&model.params, &rep);
                let collab = pass::rank_collaborators(
                    &query,
                    keys.iter().filter(|(u, _)| *u != inst.user).map(|(u, k)| (*u, k.as_slice())),
                    cfg.collaborative_users,
                );
                let others: Vec<(UserId, &[TupleId])> = collab.iter().map(|(u, _)| (*u, static_tuples[u.index()].as_slice())).collect();
                inst.pool = merge_pools(&inst.history_tuples, &others).into_iter().map(|p| p.0).collect();

                let mut att = pass::attend(&model, &inst)?;
                let sel = select_all(&model, &inst, &att, cfg.train_selection, &mut rng);
                if cfg.slot_weights == SlotWeights::Selection {
                    pass::restrict_to_selection(&mut att, &sel);
                }
                let scored = pass::score(&model, &inst, &att, &sel, true);
                let (loss, dscores) = pass::bpr_loss_and_grad(&scored.scores, inst.target);
                pass::backward(&model, &inst, &att, &sel, &scored, &dscores, true, &mut grads);
                batch_loss += loss;
            }
            let scale = T::one() / T::from_f64(batch.len() as f64);
            for t in grads.tensors_mut() {
                t.as_mut_slice().iter_mut().for_each(|g| *g *= scale);
            }
            let mean_loss = batch_loss.as_f64() / batch.len() as f64;
            if !mean_loss.is_finite() {
                return Err(Error::NonFinite {
                    batch: batch_id,
                    norms: model.params.norms_summary(),
                });
            }
            adam.step(&mut model.params, &grads, &mut model.adam);
            if !model.params.is_finite() {
                return Err(Error::NonFinite {
                    batch: batch_id,
                    norms: model.params.norms_summary(),
                });
            }
            epoch_loss += batch_loss.as_f64();
            batch_losses.push(mean_loss);
            batch_id += 1;
        }

        let valid = head_hit_ratio(&model, graph, log, valid_instances)?;
        // a tie with the initialization still prefers trained weights
        let improved = valid > report.best_valid_hit_ratio || (report.best_epoch == 0 && valid >= report.best_valid_hit_ratio);
        if improved {
            best = model.clone();
            report.best_epoch = epoch;
            report.best_valid_hit_ratio = valid;
            since_best = 0;
        } else {
            since_best += 1;
        }
        let er = EpochReport {
            epoch,
            train_loss: epoch_loss / inputs.len() as f64,
            valid_hit_ratio: valid,
            improved,
            batch_losses,
        };
        observer(&er);
        report.epochs.push(er);
        if cfg.patience > 0 && since_best >= cfg.patience {
            report.stopped_early = true;
            break;
        }
    }
    Ok((best, report))
}
