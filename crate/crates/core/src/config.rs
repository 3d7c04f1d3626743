//! Training hyperparameters and their canonical text form.

use alloc::format;
use alloc::string::String;
use core::fmt::Write;
use core::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SelectionMode {
    /// Draw without replacement proportionally to credibility.
    WeightedSample,
    /// Deterministic highest-credibility tuples.
    TopK,
}

impl SelectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMode::WeightedSample => "weighted-sample",
            SelectionMode::TopK => "top-k",
        }
    }
}

impl FromStr for SelectionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted-sample" => Ok(Self::WeightedSample),
            "top-k" => Ok(Self::TopK),
            _ => Err(Error::Config(format!("unknown selection mode `{s}`"))),
        }
    }
}

/// What the training path scales each selected slot embedding by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SlotWeights {
    /// Softmax probability over the whole pool.
    Pool,
    /// Softmax renormalized over the selected tuples, so user and item
    /// slots carry comparable mass whatever the pool sizes.
    Selection,
}

impl SlotWeights {
    pub fn as_str(self) -> &'static str {
        match self {
            SlotWeights::Pool => "pool",
            SlotWeights::Selection => "selection",
        }
    }
}

impl FromStr for SlotWeights {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pool" => Ok(Self::Pool),
            "selection" => Ok(Self::Selection),
            _ => Err(Error::Config(format!("unknown slot weighting `{s}`"))),
        }
    }
}

/// How the attention projections start out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum AttentionInit {
    /// Independent uniform draws.
    Random,
    /// Query blocks reading tuple-embedding means start as copies of the
    /// key projection, other query blocks at zero. Credibility then begins
    /// as embedding similarity to the tuples on the other side. The
    /// collaborative projections also ignore the user-embedding block.
    Matched,
}

impl AttentionInit {
    pub fn as_str(self) -> &'static str {
        match self {
            AttentionInit::Random => "random",
            AttentionInit::Matched => "matched",
        }
    }
}

impl FromStr for AttentionInit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "matched" => Ok(Self::Matched),
            _ => Err(Error::Config(format!("unknown attention init `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum TaskKind {
    Pairwise,
    Listwise,
}

impl TaskKind {
    pub fn candidates(self) -> usize {
        match self {
            TaskKind::Pairwise => 2,
            TaskKind::Listwise => 20,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Pairwise => "pairwise",
            TaskKind::Listwise => "listwise",
        }
    }
}

impl FromStr for TaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pairwise" => Ok(Self::Pairwise),
            "listwise" => Ok(Self::Listwise),
            _ => Err(Error::Config(format!("unknown task `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    /// Embedding dimension d.
    pub dim: usize,
    /// Output width of the collaborative-similarity projections.
    pub cos_dim: usize,
    /// Output width of the credibility attention projections.
    pub att_dim: usize,
    /// Hidden width of the scoring MLP; 0 means a single linear layer.
    pub mlp_hidden: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    /// N, number of collaborative users.
    pub collaborative_users: usize,
    pub alpha_user: f64,
    pub alpha_item: f64,
    pub user_slots: usize,
    pub item_slots: usize,
    /// |V|, candidates per instance.
    pub candidates: usize,
    /// Selection used while training; evaluation always uses top-k.
    pub train_selection: SelectionMode,
    pub slot_weights: SlotWeights,
    pub attention_init: AttentionInit,
    pub history_len: usize,
    pub seed: u64,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            cos_dim: 64,
            att_dim: 64,
            mlp_hidden: 128,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 256,
            collaborative_users: 3,
            alpha_user: 0.1,
            alpha_item: 0.6,
            user_slots: 16,
            item_slots: 8,
            candidates: 2,
            train_selection: SelectionMode::WeightedSample,
            slot_weights: SlotWeights::Pool,
            attention_init: AttentionInit::Random,
            history_len: 10,
            seed: 42,
            max_epochs: 30,
            patience: 5,
        }
    }
}

impl TrainConfig {
    /// Defaults for a task: pairwise α_u=0.10, α_v=0.60; listwise N=3,
    /// α_u=0.1, α_v=0.3.
    pub fn for_task(task: TaskKind) -> Self {
        let mut c = Self {
            candidates: task.candidates(),
            ..Self::default()
        };
        if task == TaskKind::Listwise {
            c.collaborative_users = 3;
            c.alpha_user = 0.1;
            c.alpha_item = 0.3;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::Config(format!("{field}: {why}")));
        if !(0.0..=1.0).contains(&self.alpha_user) {
            return bad("alpha_user", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.alpha_item) {
            return bad("alpha_item", "must lie in [0, 1]");
        }
        if self.user_slots == 0 || self.item_slots == 0 {
            return bad("user_slots/item_slots", "must be at least 1");
        }
        if self.candidates < 2 {
            return bad("candidates", "must be at least 2");
        }
        if self.dim == 0 || self.cos_dim == 0 || self.att_dim == 0 {
            return bad("dim", "dimensions must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if self.history_len == 0 {
            return bad("history_len", "must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate", "must be positive");
        }
        Ok(())
    }

    /// Width of the MLP input, `(S_u + S_v) · d`.
    pub fn mlp_input(&self) -> usize {
        (self.user_slots + self.item_slots) * self.dim
    }

    /// One `key=value` line per field in a fixed order. Floats use Rust's
    /// shortest round-trip formatting, so parsing the text back is exact.
    pub fn to_canonical(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn core::fmt::Display| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("dim", &self.dim);
        kv("cos_dim", &self.cos_dim);
        kv("att_dim", &self.att_dim);
        kv("mlp_hidden", &self.mlp_hidden);
        kv("learning_rate", &self.learning_rate);
        kv("beta1", &self.beta1);
        kv("beta2", &self.beta2);
        kv("epsilon", &self.epsilon);
        kv("batch_size", &self.batch_size);
        kv("collaborative_users", &self.collaborative_users);
        kv("alpha_user", &self.alpha_user);
        kv("alpha_item", &self.alpha_item);
        kv("user_slots", &self.user_slots);
        kv("item_slots", &self.item_slots);
        kv("candidates", &self.candidates);
        kv("train_selection", &self.train_selection.as_str());
        kv("slot_weights", &self.slot_weights.as_str());
        kv("attention_init", &self.attention_init.as_str());
        kv("history_len", &self.history_len);
        kv("seed", &self.seed);
        kv("max_epochs", &self.max_epochs);
        kv("patience", &self.patience);
        s
    }

    pub fn from_canonical(text: &str) -> Result<Self> {
        fn num<T: FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("{k}: cannot parse `{v}`")))
        }
        let mut c = Self::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed config line `{line}`")))?;
            match k {
                "dim" => c.dim = num(k, v)?,
                "cos_dim" => c.cos_dim = num(k, v)?,
                "att_dim" => c.att_dim = num(k, v)?,
                "mlp_hidden" => c.mlp_hidden = num(k, v)?,
                "learning_rate" => c.learning_rate = num(k, v)?,
                "beta1" => c.beta1 = num(k, v)?,
                "beta2" => c.beta2 = num(k, v)?,
                "epsilon" => c.epsilon = num(k, v)?,
                "batch_size" => c.batch_size = num(k, v)?,
                "collaborative_users" => c.collaborative_users = num(k, v)?,
                "alpha_user" => c.alpha_user = num(k, v)?,
                "alpha_item" => c.alpha_item = num(k, v)?,
                "user_slots" => c.user_slots = num(k, v)?,
                "item_slots" => c.item_slots = num(k, v)?,
                "candidates" => c.candidates = num(k, v)?,
                "train_selection" => c.train_selection = v.parse()?,
                "slot_weights" => c.slot_weights = v.parse()?,
                "attention_init" => c.attention_init = v.parse()?,
                "history_len" => c.history_len = num(k, v)?,
                "seed" => c.seed = num(k, v)?,
                "max_epochs" => c.max_epochs = num(k, v)?,
                "patience" => c.patience = num(k, v)?,
                other => return Err(Error::Config(format!("unknown config key `{other}`"))),
            }
        }
        Ok(c)
    }

    /// Fields that fix parameter shapes; two configs with equal
    /// architectures can share a checkpoint.
    pub fn architecture_mismatch(&self, other: &TrainConfig) -> Option<String> {
        let pairs = [
            ("dim", self.dim, other.dim),
            ("cos_dim", self.cos_dim, other.cos_dim),
            ("att_dim", self.att_dim, other.att_dim),
            ("mlp_hidden", self.mlp_hidden, other.mlp_hidden),
            ("user_slots", self.user_slots, other.user_slots),
            ("item_slots", self.item_slots, other.item_slots),
            ("candidates", self.candidates, other.candidates),
        ];
        pairs
            .iter()
            .find(|(_, a, b)| a != b)
            .map(|(k, a, b)| format!("{k}: checkpoint has {a}, config has {b}"))
    }
}

impl core::fmt::Display for TrainConfig {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.to_canonical())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn canonical_round_trip() {
        let mut c = TrainConfig::for_task(TaskKind::Listwise);
        c.alpha_item = 0.3;
        c.learning_rate = 1e-3;
        c.attention_init = AttentionInit::Matched;
        let back = TrainConfig::from_canonical(&c.to_canonical()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_string(), c.to_canonical());
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut c = TrainConfig::default();
        c.alpha_user = 1.5;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.item_slots = 0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.candidates = 1;
        assert!(c.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn architecture_mismatch_names_field() {
        let a = TrainConfig::default();
        let b = TrainConfig { dim: 32, ..TrainConfig::default() };
        assert!(a.architecture_mismatch(&b).unwrap().starts_with("dim"));
        assert!(a.architecture_mismatch(&TrainConfig { seed: 7, ..a.clone() }).is_none());
    }
}
