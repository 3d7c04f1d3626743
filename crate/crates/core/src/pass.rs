//! Forward and backward computation for one instance: subgraph
//! representations, collaborative retrieval, dual credibility attention,
//! slot-based MLP scoring and the BPR objective.
//!
//! Gradients follow a straight-through scheme. Which tuples are selected is
//! treated as a constant, but in the weighted (training) path every selected
//! tuple embedding is scaled by its softmax probability, so the attention
//! projections and the embeddings feeding the attention receive gradients.
//! The collaborative projections only influence a discrete top-N choice and
//! therefore receive none.

use alloc::vec;
use alloc::vec::Vec;

use crate::config::SlotWeights;
use crate::graph::{ItemId, TupleId};
use crate::interactions::UserId;
use crate::model::{HintModel, Params};
use crate::select::CredibilityDistribution;
use crate::tensor::{axpy, cosine_similarity, dot, mean_rows, softmax, Matrix, Real};
use crate::{Error, Result};

/// One instance resolved to dense ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceInputs {
    pub user: UserId,
    /// B_u without pad items, chronological.
    pub history: Vec<ItemId>,
    /// Γ_u
    pub history_tuples: Vec<TupleId>,
    /// Pool of user-side hint candidates, Γ̂_u (or Γ_u without collaborative
    /// extraction).
    pub pool: Vec<TupleId>,
    pub candidates: Vec<ItemId>,
    /// Γ_v per candidate, aligned with `candidates`.
    pub candidate_tuples: Vec<Vec<TupleId>>,
    /// Position of the ground truth in `candidates`.
    pub target: usize,
}

/// E_u = e_u ⊕ mean(e_v, v ∈ B_u) ⊕ mean(e_k, k ∈ Γ_u)
pub fn user_representation<T: Real>(params: &Params<T>, user: UserId, history: &[ItemId], history_tuples: &[TupleId]) -> Vec<T> {
    let mut rep = Vec::with_capacity(3 * params.user_emb.cols());
    rep.extend_from_slice(params.user_emb.row(user.index()));
    let real: Vec<usize> = history.iter().filter(|v| !v.is_pad()).map(|v| v.index()).collect();
    rep.extend(mean_rows(&params.item_emb, real.into_iter()));
    rep.extend(mean_rows(&params.tuple_emb, history_tuples.iter().map(|k| k.index())));
    rep
}

/// E_V = ⊕_{v ∈ V} mean(e_k, k ∈ Γ_v); an attribute-less candidate
/// contributes a zero block.
pub fn candidate_attribute_representation<T: Real>(model: &HintModel<T>, candidate_tuples: &[Vec<TupleId>]) -> Result<Vec<T>> {
    if candidate_tuples.len() != model.config.candidates {
        return Err(Error::Shape {
            what: "candidate set",
            expected: model.config.candidates,
            found: candidate_tuples.len(),
        });
    }
    let mut out = Vec::with_capacity(model.config.candidates * model.config.dim);
    for tuples in candidate_tuples {
        out.extend(mean_rows(&model.params.tuple_emb, tuples.iter().map(|k| k.index())));
    }
    Ok(out)
}

/// `W_c E_u`
pub fn collab_query<T: Real>(params: &Params<T>, rep: &[T]) -> Vec<T> {
    params.cos_query.matvec(rep)
}

/// `W′_c E_u′`
pub fn collab_key<T: Real>(params: &Params<T>, rep: &[T]) -> Vec<T> {
    params.cos_key.matvec(rep)
}

/// The `n` highest-similarity candidates, ties broken by ascending user id.
pub fn rank_collaborators<'a, T: Real>(
    query: &[T],
    keys: impl IntoIterator<Item = (UserId, &'a [T])>,
    n: usize,
) -> Vec<(UserId, T)> {
    if n == 0 {
        return Vec::new();
    }
    let mut scored: Vec<(UserId, T)> = keys
        .into_iter()
        .map(|(u, k)| (u, cosine_similarity(query, k).unwrap_or_else(|_| T::zero())))
        .collect();
    scored.sort_by(|a, b| b.1.as_f64().total_cmp(&a.1.as_f64()).then(a.0.cmp(&b.0)));
    scored.truncate(n);
    scored
}

/// Top-N collaborative users of the user represented by `rep` among `pool`
/// (which must not contain that user), ranked by
/// `cosine(W_c E_u, W′_c E_u′)`.
pub fn collaborative_users<T: Real>(params: &Params<T>, rep: &[T], pool: &[(UserId, Vec<T>)], n: usize) -> Vec<(UserId, T)> {
    let query = collab_query(params, rep);
    let keys: Vec<(UserId, Vec<T>)> = pool.iter().map(|(u, r)| (*u, collab_key(params, r))).collect();
    rank_collaborators(&query, keys.iter().map(|(u, k)| (*u, k.as_slice())), n)
}

/// Softmax attention of one query over a tuple pool.
#[derive(Debug, Clone)]
pub struct Attention<T> {
    pub query: Vec<T>,
    /// Projected key per pool tuple.
    pub keys: Vec<Vec<T>>,
    pub logits: Vec<T>,
    pub probs: Vec<T>,
}

fn attend_pool<T: Real>(query: &[T], key_w: &Matrix<T>, tuple_emb: &Matrix<T>, pool: &[TupleId]) -> Option<Attention<T>> {
    if pool.is_empty() {
        return None;
    }
    let keys: Vec<Vec<T>> = pool.iter().map(|k| key_w.matvec(tuple_emb.row(k.index()))).collect();
    let logits: Vec<T> = keys.iter().map(|key| dot(query, key)).collect();
    let probs = softmax(&logits);
    Some(Attention {
        query: query.to_vec(),
        keys,
        logits,
        probs,
    })
}

fn distribution<T: Real>(pool: &[TupleId], att: &Attention<T>) -> CredibilityDistribution {
    CredibilityDistribution::new(pool.iter().zip(&att.probs).map(|(&k, p)| (k, p.as_f64())).collect())
}

/// User-side credibility, softmax over `pool` of `(W_u E_V)·(W′_u e_k)`.
pub fn user_credibility<T: Real>(model: &HintModel<T>, pool: &[TupleId], cand_rep: &[T]) -> Result<CredibilityDistribution> {
    let query = model.params.user_att_query.matvec(cand_rep);
    let att = attend_pool(&query, &model.params.user_att_key, &model.params.tuple_emb, pool).ok_or(Error::EmptyPool)?;
    Ok(distribution(pool, &att))
}

/// Item-side credibility, softmax over `Γ_v` of `(W_v E_u)·(W′_v e_k)`.
pub fn item_credibility<T: Real>(model: &HintModel<T>, ego: &[TupleId], user_rep: &[T]) -> Result<CredibilityDistribution> {
    let query = model.params.item_att_query.matvec(user_rep);
    let att = attend_pool(&query, &model.params.item_att_key, &model.params.tuple_emb, ego).ok_or(Error::EmptyPool)?;
    Ok(distribution(ego, &att))
}

/// Attention state of a whole instance, computed before selection.
#[derive(Debug, Clone)]
pub struct Attended<T> {
    /// E_u
    pub user_rep: Vec<T>,
    /// E_V
    pub cand_rep: Vec<T>,
    /// `None` when the pool is empty.
    pub user: Option<Attention<T>>,
    /// Per candidate; `None` for attribute-less candidates.
    pub items: Vec<Option<Attention<T>>>,
}

impl<T: Real> Attended<T> {
    pub fn user_distribution(&self, inputs: &InstanceInputs) -> Option<CredibilityDistribution> {
        self.user.as_ref().map(|a| distribution(&inputs.pool, a))
    }

    pub fn item_distribution(&self, inputs: &InstanceInputs, c: usize) -> Option<CredibilityDistribution> {
        self.items[c].as_ref().map(|a| distribution(&inputs.candidate_tuples[c], a))
    }
}

pub fn attend<T: Real>(model: &HintModel<T>, inputs: &InstanceInputs) -> Result<Attended<T>> {
    let p = &model.params;
    let user_rep = user_representation(p, inputs.user, &inputs.history, &inputs.history_tuples);
    let cand_rep = candidate_attribute_representation(model, &inputs.candidate_tuples)?;
    let user_query = p.user_att_query.matvec(&cand_rep);
    let user = attend_pool(&user_query, &p.user_att_key, &p.tuple_emb, &inputs.pool);
    let item_query = p.item_att_query.matvec(&user_rep);
    let items = inputs
        .candidate_tuples
        .iter()
        .map(|ego| attend_pool(&item_query, &p.item_att_key, &p.tuple_emb, ego))
        .collect();
    Ok(Attended {
        user_rep,
        cand_rep,
        user,
        items,
    })
}

/// Selected positions, in slot order, into `InstanceInputs::pool` and each
/// `candidate_tuples[c]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Selection {
    pub user: Vec<usize>,
    pub items: Vec<Vec<usize>>,
}

impl Selection {
    /// Maps selected tuple ids (as returned by `select_hints`) back to pool
    /// positions.
    pub fn from_tuples(inputs: &InstanceInputs, user: &[TupleId], items: &[Vec<TupleId>]) -> Self {
        let position = |pool: &[TupleId], k: &TupleId| pool.iter().position(|x| x == k).expect("selected tuple comes from the pool");
        Self {
            user: user.iter().map(|k| position(&inputs.pool, k)).collect(),
            items: items
                .iter()
                .zip(&inputs.candidate_tuples)
                .map(|(sel, pool)| sel.iter().map(|k| position(pool, k)).collect())
                .collect(),
        }
    }
}

/// Zeroes the probabilities of unselected tuples and renormalizes the
/// rest, turning each attention into a softmax over its selection. The
/// softmax backward formula then yields the gradient of that restricted
/// softmax.
pub fn restrict_to_selection<T: Real>(att: &mut Attended<T>, sel: &Selection) {
    fn restrict<T: Real>(a: &mut Attention<T>, chosen: &[usize]) {
        if chosen.is_empty() {
            return;
        }
        let max = chosen.iter().map(|&i| a.logits[i]).fold(T::neg_infinity(), T::max);
        let mut probs = vec![T::zero(); a.probs.len()];
        let mut total = T::zero();
        for &i in chosen {
            probs[i] = (a.logits[i] - max).exp();
            total += probs[i];
        }
        probs.iter_mut().for_each(|p| *p = *p / total);
        a.probs = probs;
    }
    if let Some(ua) = &mut att.user {
        restrict(ua, &sel.user);
    }
    for (ia, chosen) in att.items.iter_mut().zip(&sel.items) {
        if let Some(ia) = ia {
            restrict(ia, chosen);
        }
    }
}

/// Attention of the training path: pool softmax, or its restriction to the
/// selection.
pub fn training_attention<T: Real>(model: &HintModel<T>, inputs: &InstanceInputs, sel: &Selection) -> Result<Attended<T>> {
    let mut att = attend(model, inputs)?;
    if model.config.slot_weights == SlotWeights::Selection {
        restrict_to_selection(&mut att, sel);
    }
    Ok(att)
}

/// Per-candidate MLP inputs and activations.
#[derive(Debug, Clone)]
pub struct Scored<T> {
    pub inputs: Vec<Vec<T>>,
    /// Hidden pre-activations; empty for a linear head.
    pub hidden: Vec<Vec<T>>,
    pub scores: Vec<T>,
}

/// Ẽ_u ⊕ Ẽ_v for candidate `c`: selected embeddings in slots, zero
/// padded, optionally scaled by their credibility.
fn mlp_input<T: Real>(model: &HintModel<T>, inputs: &InstanceInputs, att: &Attended<T>, sel: &Selection, c: usize, weighted: bool) -> Vec<T> {
    let d = model.config.dim;
    let emb = &model.params.tuple_emb;
    let mut x = vec![T::zero(); model.config.mlp_input()];
    if let Some(ua) = &att.user {
        for (slot, &pos) in sel.user.iter().enumerate().take(model.config.user_slots) {
            let w = if weighted { ua.probs[pos] } else { T::one() };
            axpy(w, emb.row(inputs.pool[pos].index()), &mut x[slot * d..(slot + 1) * d]);
        }
    }
    if let Some(ia) = &att.items[c] {
        let base = model.config.user_slots * d;
        for (slot, &pos) in sel.items[c].iter().enumerate().take(model.config.item_slots) {
            let w = if weighted { ia.probs[pos] } else { T::one() };
            let k = inputs.candidate_tuples[c][pos];
            axpy(w, emb.row(k.index()), &mut x[base + slot * d..base + (slot + 1) * d]);
        }
    }
    x
}

/// Forward pass of the scoring MLP, returning the score and the hidden
/// pre-activations.
pub fn mlp_forward<T: Real>(params: &Params<T>, x: &[T]) -> (T, Vec<T>) {
    let b2 = params.mlp_out_b.as_slice()[0];
    if params.mlp_hidden_w.rows() == 0 {
        return (dot(params.mlp_out_w.row(0), x) + b2, Vec::new());
    }
    let mut pre = params.mlp_hidden_w.matvec(x);
    for (h, &b) in pre.iter_mut().zip(params.mlp_hidden_b.as_slice()) {
        *h += b;
    }
    let act: T = pre
        .iter()
        .zip(params.mlp_out_w.row(0))
        .map(|(&h, &w)| h.max(T::zero()) * w)
        .sum();
    (act + b2, pre)
}

/// Accumulates MLP parameter gradients and returns `∂ŷ/∂x · dy`.
fn mlp_backward<T: Real>(params: &Params<T>, x: &[T], pre: &[T], dy: T, grads: &mut Params<T>) -> Vec<T> {
    grads.mlp_out_b.as_mut_slice()[0] += dy;
    if params.mlp_hidden_w.rows() == 0 {
        axpy(dy, x, grads.mlp_out_w.row_mut(0));
        let mut dx = params.mlp_out_w.row(0).to_vec();
        dx.iter_mut().for_each(|v| *v *= dy);
        return dx;
    }
    let act: Vec<T> = pre.iter().map(|&h| h.max(T::zero())).collect();
    axpy(dy, &act, grads.mlp_out_w.row_mut(0));
    let dpre: Vec<T> = pre
        .iter()
        .zip(params.mlp_out_w.row(0))
        .map(|(&h, &w)| if h > T::zero() { dy * w } else { T::zero() })
        .collect();
    axpy(T::one(), &dpre, grads.mlp_hidden_b.as_mut_slice());
    grads.mlp_hidden_w.add_outer(T::one(), &dpre, x);
    let mut dx = vec![T::zero(); x.len()];
    params.mlp_hidden_w.add_matvec_transposed(&dpre, &mut dx);
    dx
}

/// Scores every candidate. `weighted` scales slot embeddings by their
/// credibility (the training path).
pub fn score<T: Real>(model: &HintModel<T>, inputs: &InstanceInputs, att: &Attended<T>, sel: &Selection, weighted: bool) -> Scored<T> {
    let n = inputs.candidates.len();
    let mut out = Scored {
        inputs: Vec::with_capacity(n),
        hidden: Vec::with_capacity(n),
        scores: Vec::with_capacity(n),
    };
    for c in 0..n {
        let x = mlp_input(model, inputs, att, sel, c, weighted);
        let (y, pre) = mlp_forward(&model.params, &x);
        out.inputs.push(x);
        out.hidden.push(pre);
        out.scores.push(y);
    }
    out
}

/// ŷ = MLP(Ẽ_u ⊕ Ẽ_v) for explicit hint lists. With `training` set, each
/// slot embedding is scaled by its credibility; otherwise weights are 1.
pub fn predict_score<T: Real>(model: &HintModel<T>, user_hints: &[(TupleId, f64)], item_hints: &[(TupleId, f64)], training: bool) -> Result<T> {
    let cfg = &model.config;
    if user_hints.len() > cfg.user_slots || item_hints.len() > cfg.item_slots {
        return Err(Error::Contract("more hints than slots".into()));
    }
    let d = cfg.dim;
    let mut x = vec![T::zero(); cfg.mlp_input()];
    let fill = |x: &mut [T], hints: &[(TupleId, f64)]| {
        for (slot, &(k, p)) in hints.iter().enumerate() {
            let w = if training { T::from_f64(p) } else { T::one() };
            axpy(w, model.params.tuple_emb.row(k.index()), &mut x[slot * d..(slot + 1) * d]);
        }
    };
    fill(&mut x, user_hints);
    fill(&mut x[cfg.user_slots * d..], item_hints);
    Ok(mlp_forward(&model.params, &x).0)
}

/// −ln σ(z) computed without overflow.
fn neg_log_sigmoid<T: Real>(z: T) -> T {
    if z > T::zero() {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Σ_{v⁻} −ln σ(ŷ⁺ − ŷ⁻)
pub fn bpr_loss<T: Real>(positive: T, negatives: &[T]) -> T {
    negatives.iter().map(|&n| neg_log_sigmoid(positive - n)).sum()
}

/// BPR loss over an instance's scores and its gradient w.r.t. each score.
pub fn bpr_loss_and_grad<T: Real>(scores: &[T], target: usize) -> (T, Vec<T>) {
    let pos = scores[target];
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); scores.len()];
    for (c, &s) in scores.iter().enumerate() {
        if c == target {
            continue;
        }
        loss += neg_log_sigmoid(pos - s);
        // d/dz −ln σ(z) = −σ(−z)
        let g = sigmoid(s - pos);
        grad[target] -= g;
        grad[c] += g;
    }
    (loss, grad)
}

/// Backward of a softmax attention given `∂L/∂p`: accumulates key
/// projection and tuple embedding gradients and returns `∂L/∂query`.
fn attention_backward<T: Real>(
    att: &Attention<T>,
    dprobs: &[T],
    pool: &[TupleId],
    key_w: &Matrix<T>,
    tuple_emb: &Matrix<T>,
    grad_key_w: &mut Matrix<T>,
    grad_tuple_emb: &mut Matrix<T>,
) -> Vec<T> {
    let mean: T = att.probs.iter().zip(dprobs).map(|(&p, &g)| p * g).sum();
    let mut dquery = vec![T::zero(); att.query.len()];
    // ∂logit_i/∂e_i = W′ᵀ q for every i
    let mut de = vec![T::zero(); tuple_emb.cols()];
    key_w.add_matvec_transposed(&att.query, &mut de);
    for (i, &k) in pool.iter().enumerate() {
        let dlogit = att.probs[i] * (dprobs[i] - mean);
        if dlogit == T::zero() {
            continue;
        }
        axpy(dlogit, &att.keys[i], &mut dquery);
        grad_key_w.add_outer(dlogit, &att.query, tuple_emb.row(k.index()));
        axpy(dlogit, &de, grad_tuple_emb.row_mut(k.index()));
    }
    dquery
}

/// Backpropagates `dscores` through scoring and (when `weighted`) through
/// both attentions into `grads`.
pub fn backward<T: Real>(
    model: &HintModel<T>,
    inputs: &InstanceInputs,
    att: &Attended<T>,
    sel: &Selection,
    scored: &Scored<T>,
    dscores: &[T],
    weighted: bool,
    grads: &mut Params<T>,
) {
    let p = &model.params;
    let d = model.config.dim;
    let user_base = 0;
    let item_base = model.config.user_slots * d;

    let mut duser_slots = vec![T::zero(); item_base];
    let mut dprob_user = vec![T::zero(); inputs.pool.len()];
    let mut dprob_items: Vec<Vec<T>> = inputs.candidate_tuples.iter().map(|t| vec![T::zero(); t.len()]).collect();

    for c in 0..inputs.candidates.len() {
        if dscores[c] == T::zero() {
            continue;
        }
        let dx = mlp_backward(p, &scored.inputs[c], &scored.hidden[c], dscores[c], grads);
        axpy(T::one(), &dx[user_base..item_base], &mut duser_slots);
        if let Some(ia) = &att.items[c] {
            for (slot, &pos) in sel.items[c].iter().enumerate().take(model.config.item_slots) {
                let k = inputs.candidate_tuples[c][pos].index();
                let g = &dx[item_base + slot * d..item_base + (slot + 1) * d];
                let w = if weighted { ia.probs[pos] } else { T::one() };
                axpy(w, g, grads.tuple_emb.row_mut(k));
                if weighted {
                    dprob_items[c][pos] += dot(g, p.tuple_emb.row(k));
                }
            }
        }
    }

    if let Some(ua) = &att.user {
        for (slot, &pos) in sel.user.iter().enumerate().take(model.config.user_slots) {
            let k = inputs.pool[pos].index();
            let g = &duser_slots[slot * d..(slot + 1) * d];
            let w = if weighted { ua.probs[pos] } else { T::one() };
            axpy(w, g, grads.tuple_emb.row_mut(k));
            if weighted {
                dprob_user[pos] += dot(g, p.tuple_emb.row(k));
            }
        }
    }

    if !weighted {
        return;
    }

    // user side: query = W_u E_V
    if let Some(ua) = &att.user {
        let dq = attention_backward(ua, &dprob_user, &inputs.pool, &p.user_att_key, &p.tuple_emb, &mut grads.user_att_key, &mut grads.tuple_emb);
        grads.user_att_query.add_outer(T::one(), &dq, &att.cand_rep);
        let mut dcand = vec![T::zero(); att.cand_rep.len()];
        p.user_att_query.add_matvec_transposed(&dq, &mut dcand);
        for (c, tuples) in inputs.candidate_tuples.iter().enumerate() {
            if tuples.is_empty() {
                continue;
            }
            let scale = T::one() / T::from_f64(tuples.len() as f64);
            let block = &dcand[c * d..(c + 1) * d];
            for k in tuples {
                axpy(scale, block, grads.tuple_emb.row_mut(k.index()));
            }
        }
    }

    // item side: one shared query = W_v E_u
    let mut dq_item = vec![T::zero(); p.item_att_query.rows()];
    let mut any = false;
    for (c, ia) in att.items.iter().enumerate() {
        if let Some(ia) = ia {
            let dq = attention_backward(ia, &dprob_items[c], &inputs.candidate_tuples[c], &p.item_att_key, &p.tuple_emb, &mut grads.item_att_key, &mut grads.tuple_emb);
            axpy(T::one(), &dq, &mut dq_item);
            any = true;
        }
    }
    if !any {
        return;
    }
    grads.item_att_query.add_outer(T::one(), &dq_item, &att.user_rep);
    let mut drep = vec![T::zero(); att.user_rep.len()];
    p.item_att_query.add_matvec_transposed(&dq_item, &mut drep);
    axpy(T::one(), &drep[..d], grads.user_emb.row_mut(inputs.user.index()));
    let hist: Vec<usize> = inputs.history.iter().filter(|v| !v.is_pad()).map(|v| v.index()).collect();
    if !hist.is_empty() {
        let scale = T::one() / T::from_f64(hist.len() as f64);
        for v in hist {
            axpy(scale, &drep[d..2 * d], grads.item_emb.row_mut(v));
        }
    }
    if !inputs.history_tuples.is_empty() {
        let scale = T::one() / T::from_f64(inputs.history_tuples.len() as f64);
        for k in &inputs.history_tuples {
            axpy(scale, &drep[2 * d..], grads.tuple_emb.row_mut(k.index()));
        }
    }
}

/// BPR loss of one instance with a fixed selection on the weighted path.
pub fn instance_loss<T: Real>(model: &HintModel<T>, inputs: &InstanceInputs, sel: &Selection) -> Result<T> {
    let att = training_attention(model, inputs, sel)?;
    let scored = score(model, inputs, &att, sel, true);
    Ok(bpr_loss_and_grad(&scored.scores, inputs.target).0)
}

/// Loss and accumulated gradients of one instance with a fixed selection.
pub fn instance_loss_and_grad<T: Real>(model: &HintModel<T>, inputs: &InstanceInputs, sel: &Selection, grads: &mut Params<T>) -> Result<T> {
    let att = training_attention(model, inputs, sel)?;
    let scored = score(model, inputs, &att, sel, true);
    let (loss, dscores) = bpr_loss_and_grad(&scored.scores, inputs.target);
    backward(model, inputs, &att, sel, &scored, &dscores, true, grads);
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TrainConfig;
    use crate::model::ModelDims;

    fn small(hidden: usize) -> HintModel<f64> {
        let c = TrainConfig {
            dim: 4,
            cos_dim: 3,
            att_dim: 3,
            mlp_hidden: hidden,
            user_slots: 2,
            item_slots: 2,
            candidates: 2,
            ..TrainConfig::default()
        };
        HintModel::new(c, ModelDims { users: 3, items: 4, tuples: 6 }).unwrap()
    }

    #[test]
    fn bpr_values() {
        assert!((bpr_loss(0.3f64, &[0.3]) - core::f64::consts::LN_2).abs() < 1e-12);
        assert!(bpr_loss(20.0f64, &[0.0]) < 1e-8);
        assert!((bpr_loss(1.0f64, &[0.0]) - 0.313_261_687_518_222_8).abs() < 1e-12);
        assert!(bpr_loss(-800.0f64, &[800.0]).is_finite());
    }

    #[test]
    fn zero_tables_give_zero_representation() {
        let mut m = small(2);
        m.params.zero_();
        let rep = user_representation(&m.params, UserId(0), &[ItemId(1)], &[TupleId(0)]);
        assert_eq!(rep, vec![0.0; 12]);
    }

    #[test]
    fn singleton_means_concatenate() {
        let m = small(2);
        let p = &m.params;
        let rep = user_representation(p, UserId(1), &[ItemId::PAD, ItemId(2)], &[TupleId(3)]);
        let mut expected = p.user_emb.row(1).to_vec();
        expected.extend_from_slice(p.item_emb.row(2));
        expected.extend_from_slice(p.tuple_emb.row(3));
        assert_eq!(rep, expected);
    }

    #[test]
    fn candidate_representation_shape_is_checked() {
        let m = small(2);
        assert!(matches!(candidate_attribute_representation(&m, &[vec![]]), Err(Error::Shape { .. })));
        let z = candidate_attribute_representation(&m, &[vec![], vec![]]).unwrap();
        assert_eq!(z, vec![0.0; 8]);
        let one = candidate_attribute_representation(&m, &[vec![TupleId(1)], vec![TupleId(4)]]).unwrap();
        assert_eq!(&one[..4], m.params.tuple_emb.row(1));
        assert_eq!(&one[4..], m.params.tuple_emb.row(4));
    }

    #[test]
    fn zero_mlp_scores_zero() {
        let mut m = small(3);
        for t in [&mut m.params.mlp_hidden_w, &mut m.params.mlp_hidden_b, &mut m.params.mlp_out_w, &mut m.params.mlp_out_b] {
            t.fill(0.0);
        }
        let y = predict_score(&m, &[(TupleId(0), 0.7)], &[(TupleId(2), 0.4)], true).unwrap();
        assert_eq!(y, 0.0);
    }

    #[test]
    fn linear_head_is_a_dot_product() {
        let mut m = small(0);
        m.params.tuple_emb.fill(0.0);
        m.params.tuple_emb.row_mut(0).copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        m.params.tuple_emb.row_mut(5).copy_from_slice(&[-1.0, 0.5, 0.0, 2.0]);
        let w: Vec<f64> = (0..16).map(|i| i as f64 * 0.1).collect();
        m.params.mlp_out_w.as_mut_slice().copy_from_slice(&w);
        m.params.mlp_out_b.as_mut_slice()[0] = 0.25;
        // user slot 0 holds tuple 0; item slot 0 (offset 8) holds tuple 5
        let expected = (0..4).map(|i| w[i] * [1.0, 2.0, 3.0, 4.0][i]).sum::<f64>()
            + (0..4).map(|i| w[8 + i] * [-1.0, 0.5, 0.0, 2.0][i]).sum::<f64>()
            + 0.25;
        let y = predict_score(&m, &[(TupleId(0), 0.9)], &[(TupleId(5), 0.9)], false).unwrap();
        assert!((y - expected).abs() < 1e-12);
        let again = predict_score(&m, &[(TupleId(0), 0.9)], &[(TupleId(5), 0.9)], false).unwrap();
        assert_eq!(y, again);
        assert!(predict_score(&m, &[(TupleId(0), 1.0); 3], &[], false).is_err());
    }

    #[test]
    fn credibility_edge_cases() {
        let mut m = small(2);
        assert_eq!(user_credibility(&m, &[], &[0.0; 8]), Err(Error::EmptyPool));
        let d = item_credibility(&m, &[TupleId(2)], &[0.1; 12]).unwrap();
        assert_eq!(d.entries(), &[(TupleId(2), 1.0)]);
        for k in 0..6 {
            m.params.tuple_emb.row_mut(k).copy_from_slice(&[0.3, -0.2, 0.1, 0.5]);
        }
        let d = user_credibility(&m, &[TupleId(0), TupleId(1), TupleId(2), TupleId(3)], &[0.2; 8]).unwrap();
        assert!(d.entries().iter().all(|e| (e.1 - 0.25).abs() < 1e-12));
    }

    #[test]
    fn collaborative_ranking() {
        let m = small(2);
        assert!(collaborative_users(&m.params, &[0.1; 12], &[(UserId(1), vec![0.2; 12])], 0).is_empty());
        let ranked = rank_collaborators(&[1.0f64, 0.0], [(UserId(3), &[0.0, 1.0][..]), (UserId(1), &[1.0, 0.0][..]), (UserId(2), &[2.0, 0.0][..])], 2);
        // tie at 1.0 between users 1 and 2 resolves to the smaller id
        assert_eq!(ranked.iter().map(|r| r.0).collect::<Vec<_>>(), vec![UserId(1), UserId(2)]);
    }
}
