//! Learnable parameters of the hint model.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{AttentionInit, TrainConfig};
use crate::tensor::{Matrix, Real};
use crate::{Error, Result};

/// Vocabulary sizes that, together with a [`TrainConfig`], fix every
/// parameter shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub users: usize,
    /// Real items; the embedding table has one extra row for the pad item.
    pub items: usize,
    pub tuples: usize,
}

/// One tensor per learnable parameter group. Gradients and Adam moments
/// reuse this layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    /// e_u
    pub user_emb: Matrix<T>,
    /// e_v, row 0 is the pad item
    pub item_emb: Matrix<T>,
    /// e_k
    pub tuple_emb: Matrix<T>,
    /// W_c, W′_c: collaborative similarity projections of E_u
    pub cos_query: Matrix<T>,
    pub cos_key: Matrix<T>,
    /// W_u (input E_V), W′_u (input e_k)
    pub user_att_query: Matrix<T>,
    pub user_att_key: Matrix<T>,
    /// W_v (input E_u), W′_v (input e_k)
    pub item_att_query: Matrix<T>,
    pub item_att_key: Matrix<T>,
    pub mlp_hidden_w: Matrix<T>,
    pub mlp_hidden_b: Matrix<T>,
    pub mlp_out_w: Matrix<T>,
    pub mlp_out_b: Matrix<T>,
}

pub const PARAM_NAMES: [&str; 13] = [
    "user_emb",
    "item_emb",
    "tuple_emb",
    "cos_query",
    "cos_key",
    "user_att_query",
    "user_att_key",
    "item_att_query",
    "item_att_key",
    "mlp_hidden_w",
    "mlp_hidden_b",
    "mlp_out_w",
    "mlp_out_b",
];

impl<T: Real> Params<T> {
    pub fn zeros(config: &TrainConfig, dims: ModelDims) -> Self {
        let d = config.dim;
        let input = config.mlp_input();
        let (hidden_rows, hidden_cols, out_cols) = if config.mlp_hidden == 0 {
            (0, 0, input)
        } else {
            (config.mlp_hidden, input, config.mlp_hidden)
        };
        Self {
            user_emb: Matrix::zeros(dims.users, d),
            item_emb: Matrix::zeros(dims.items + 1, d),
            tuple_emb: Matrix::zeros(dims.tuples, d),
            cos_query: Matrix::zeros(config.cos_dim, 3 * d),
            cos_key: Matrix::zeros(config.cos_dim, 3 * d),
            user_att_query: Matrix::zeros(config.att_dim, config.candidates * d),
            user_att_key: Matrix::zeros(config.att_dim, d),
            item_att_query: Matrix::zeros(config.att_dim, 3 * d),
            item_att_key: Matrix::zeros(config.att_dim, d),
            mlp_hidden_w: Matrix::zeros(hidden_rows, hidden_cols),
            mlp_hidden_b: Matrix::zeros(hidden_rows, 1),
            mlp_out_w: Matrix::zeros(1, out_cols),
            mlp_out_b: Matrix::zeros(1, 1),
        }
    }

    pub fn tensors(&self) -> [&Matrix<T>; 13] {
        [
            &self.user_emb,
            &self.item_emb,
            &self.tuple_emb,
            &self.cos_query,
            &self.cos_key,
            &self.user_att_query,
            &self.user_att_key,
            &self.item_att_query,
            &self.item_att_key,
            &self.mlp_hidden_w,
            &self.mlp_hidden_b,
            &self.mlp_out_w,
            &self.mlp_out_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix<T>; 13] {
        [
            &mut self.user_emb,
            &mut self.item_emb,
            &mut self.tuple_emb,
            &mut self.cos_query,
            &mut self.cos_key,
            &mut self.user_att_query,
            &mut self.user_att_key,
            &mut self.item_att_query,
            &mut self.item_att_key,
            &mut self.mlp_hidden_w,
            &mut self.mlp_hidden_b,
            &mut self.mlp_out_w,
            &mut self.mlp_out_b,
        ]
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, &Matrix<T>)> {
        PARAM_NAMES.into_iter().zip(self.tensors())
    }

    pub fn zero_(&mut self) {
        for t in self.tensors_mut() {
            t.fill(T::zero());
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.as_slice().len()).sum()
    }

    /// `name=norm` pairs, used in diagnostics.
    pub fn norms_summary(&self) -> String {
        let mut s = String::new();
        for (name, t) in self.named() {
            if !s.is_empty() {
                s.push_str(", ");
            }
            s.push_str(&format!("{name}={:.4e}", t.norm().as_f64()));
        }
        s
    }

    pub fn cast<U: Real>(&self) -> Params<U> {
        Params {
            user_emb: self.user_emb.cast(),
            item_emb: self.item_emb.cast(),
            tuple_emb: self.tuple_emb.cast(),
            cos_query: self.cos_query.cast(),
            cos_key: self.cos_key.cast(),
            user_att_query: self.user_att_query.cast(),
            user_att_key: self.user_att_key.cast(),
            item_att_query: self.item_att_query.cast(),
            item_att_key: self.item_att_key.cast(),
            mlp_hidden_w: self.mlp_hidden_w.cast(),
            mlp_hidden_b: self.mlp_hidden_b.cast(),
            mlp_out_w: self.mlp_out_w.cast(),
            mlp_out_b: self.mlp_out_b.cast(),
        }
    }
}

/// Adam first/second moments and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub first: Params<T>,
    pub second: Params<T>,
}

/// Parameters, optimizer state and the config that shaped them.
#[derive(Debug, Clone, PartialEq)]
pub struct HintModel<T = f32> {
    pub config: TrainConfig,
    pub dims: ModelDims,
    pub params: Params<T>,
    pub adam: AdamState<T>,
}

/// Copies each key projection into the query blocks that read tuple means:
/// every candidate block on the user side, the Γ_u block on the item side.
/// The collaborative projections drop the user-embedding block, which
/// carries no similarity signal and is never trained.
fn match_attention<T: Real>(p: &mut Params<T>, d: usize) {
    for w in [&mut p.cos_query, &mut p.cos_key] {
        for r in 0..w.rows() {
            w.row_mut(r)[..d].fill(T::zero());
        }
    }
    let copy = |query: &mut Matrix<T>, key: &Matrix<T>, blocks: &[usize]| {
        for r in 0..query.rows() {
            let row = query.row_mut(r);
            row.fill(T::zero());
            for &b in blocks {
                row[b * d..(b + 1) * d].copy_from_slice(key.row(r));
            }
        }
    };
    let candidates = p.user_att_query.cols() / d;
    copy(&mut p.user_att_query, &p.user_att_key, &(0..candidates).collect::<Vec<_>>());
    copy(&mut p.item_att_query, &p.item_att_key, &[2]);
}

impl<T: Real> HintModel<T> {
    /// Seeded initialization: every embedding and weight is drawn from
    /// U(−1/√d, 1/√d), biases and the pad embedding are zero. The
    /// collaborative key projection starts as a copy of the query
    /// projection. Neither receives gradients, so retrieval stays a cosine
    /// under one shared random projection; two independent draws would rank
    /// collaborators essentially at random.
    pub fn new(config: TrainConfig, dims: ModelDims) -> Result<Self> {
        config.validate()?;
        let mut params = Params::zeros(&config, dims);
        let bound = 1.0 / libm::sqrt(config.dim as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        {
            let p = &mut params;
            for t in [
                &mut p.user_emb,
                &mut p.item_emb,
                &mut p.tuple_emb,
                &mut p.cos_query,
                &mut p.cos_key,
                &mut p.user_att_query,
                &mut p.user_att_key,
                &mut p.item_att_query,
                &mut p.item_att_key,
                &mut p.mlp_hidden_w,
                &mut p.mlp_out_w,
            ] {
                for x in t.as_mut_slice() {
                    *x = T::from_f64(rng.random_range(-bound..bound));
                }
            }
            p.item_emb.row_mut(0).fill(T::zero());
            p.cos_key = p.cos_query.clone();
            if config.attention_init == AttentionInit::Matched {
                match_attention(p, config.dim);
            }
        }
        let adam = AdamState {
            step: 0,
            first: Params::zeros(&config, dims),
            second: Params::zeros(&config, dims),
        };
        Ok(Self {
            config,
            dims,
            params,
            adam,
        })
    }

    /// Rebuilds a model from stored tensors, checking every shape.
    pub fn from_parts(config: TrainConfig, dims: ModelDims, step: u64, tensors: Vec<(String, Matrix<T>)>) -> Result<Self> {
        let mut params = Params::zeros(&config, dims);
        let mut first = Params::zeros(&config, dims);
        let mut second = Params::zeros(&config, dims);
        let expected = 3 * PARAM_NAMES.len();
        if tensors.len() != expected {
            return Err(Error::Shape {
                what: "tensor count",
                expected,
                found: tensors.len(),
            });
        }
        let mut iter = tensors.into_iter();
        for group in [&mut params, &mut first, &mut second] {
            for (slot, name) in group.tensors_mut().into_iter().zip(PARAM_NAMES) {
                let (found_name, t) = iter.next().expect("length checked");
                if !found_name.ends_with(name) {
                    return Err(Error::Integrity(format!("expected tensor `{name}`, found `{found_name}`")));
                }
                if t.shape() != slot.shape() {
                    return Err(Error::Integrity(format!(
                        "tensor `{found_name}` has shape {:?}, config implies {:?}",
                        t.shape(),
                        slot.shape()
                    )));
                }
                *slot = t;
            }
        }
        Ok(Self {
            config,
            dims,
            params,
            adam: AdamState { step, first, second },
        })
    }

    /// All tensors in storage order: parameters, then first and second
    /// Adam moments, with prefixed names.
    pub fn all_tensors(&self) -> Vec<(String, &Matrix<T>)> {
        let mut out = Vec::with_capacity(3 * PARAM_NAMES.len());
        for (prefix, group) in [("param.", &self.params), ("adam_m.", &self.adam.first), ("adam_v.", &self.adam.second)] {
            for (name, t) in group.named() {
                out.push((format!("{prefix}{name}"), t));
            }
        }
        out
    }

    pub fn cast<U: Real>(&self) -> HintModel<U> {
        HintModel {
            config: self.config.clone(),
            dims: self.dims,
            params: self.params.cast(),
            adam: AdamState {
                step: self.adam.step,
                first: self.adam.first.cast(),
                second: self.adam.second.cast(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> ModelDims {
        ModelDims {
            users: 4,
            items: 5,
            tuples: 7,
        }
    }

    #[test]
    fn shapes_follow_config() {
        let c = TrainConfig {
            dim: 8,
            cos_dim: 6,
            att_dim: 5,
            mlp_hidden: 3,
            user_slots: 2,
            item_slots: 2,
            ..TrainConfig::default()
        };
        let m = HintModel::<f32>::new(c, dims()).unwrap();
        let p = &m.params;
        assert_eq!(p.item_emb.shape(), (6, 8));
        assert_eq!(p.cos_query.shape(), (6, 24));
        assert_eq!(p.user_att_query.shape(), (5, 16));
        assert_eq!(p.item_att_query.shape(), (5, 24));
        assert_eq!(p.mlp_hidden_w.shape(), (3, 32));
        assert_eq!(p.mlp_out_w.shape(), (1, 3));
        assert!(p.item_emb.row(0).iter().all(|&x| x == 0.0));
        assert!(p.mlp_hidden_b.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let c = TrainConfig { dim: 16, ..TrainConfig::default() };
        let a = HintModel::<f32>::new(c.clone(), dims()).unwrap();
        let b = HintModel::<f32>::new(c.clone(), dims()).unwrap();
        assert_eq!(a, b);
        let bound = 0.25f32;
        assert!(a.params.tuple_emb.as_slice().iter().all(|x| x.abs() <= bound));
        let other = HintModel::<f32>::new(TrainConfig { seed: 1, ..c }, dims()).unwrap();
        assert_ne!(a.params.tuple_emb, other.params.tuple_emb);
    }

    #[test]
    fn linear_head_when_hidden_is_zero() {
        let c = TrainConfig {
            dim: 4,
            mlp_hidden: 0,
            user_slots: 1,
            item_slots: 1,
            ..TrainConfig::default()
        };
        let m = HintModel::<f64>::new(c, dims()).unwrap();
        assert_eq!(m.params.mlp_hidden_w.shape(), (0, 0));
        assert_eq!(m.params.mlp_out_w.shape(), (1, 8));
    }

    #[test]
    fn collaborative_key_starts_as_query() {
        let m = HintModel::<f32>::new(TrainConfig { dim: 8, ..TrainConfig::default() }, dims()).unwrap();
        assert_eq!(m.params.cos_key, m.params.cos_query);
    }

    #[test]
    fn matched_attention_copies_key_blocks() {
        let d = 4;
        let base = TrainConfig { dim: d, att_dim: 3, candidates: 3, ..TrainConfig::default() };
        let random = HintModel::<f64>::new(base.clone(), dims()).unwrap();
        let c = TrainConfig { attention_init: AttentionInit::Matched, ..base };
        let m = HintModel::<f64>::new(c, dims()).unwrap();
        let p = &m.params;
        // the draws themselves are shared with the random init
        assert_eq!(p.user_att_key, random.params.user_att_key);
        assert_eq!(p.tuple_emb, random.params.tuple_emb);
        for w in [&p.cos_query, &p.cos_key] {
            for r in 0..w.rows() {
                assert!(w.row(r)[..d].iter().all(|&x| x == 0.0));
                assert_eq!(&w.row(r)[d..], &random.params.cos_query.row(r)[d..]);
            }
        }
        for r in 0..p.user_att_query.rows() {
            for b in 0..3 {
                assert_eq!(&p.user_att_query.row(r)[b * d..(b + 1) * d], p.user_att_key.row(r));
            }
        }
        for r in 0..p.item_att_query.rows() {
            let row = p.item_att_query.row(r);
            assert!(row[..2 * d].iter().all(|&x| x == 0.0));
            assert_eq!(&row[2 * d..], p.item_att_key.row(r));
        }
    }
}
