#![allow(dead_code)]

use std::fs;
use std::path::Path;

use hintkg::synth::{self, SynthConfig};
use hintkg::tsv::{DataPaths, Dataset};
use hintkg_core::config::TrainConfig;
use hintkg_core::model::HintModel;
use hintkg_core::train::model_dims;

pub fn write_raw(dir: &Path, entities: &str, relations: &str, triples: &str, interactions: &str) -> DataPaths {
    let paths = DataPaths::in_dir(dir);
    fs::write(&paths.entities, entities).unwrap();
    fs::write(&paths.relations, relations).unwrap();
    fs::write(&paths.triples, triples).unwrap();
    fs::write(&paths.interactions, interactions).unwrap();
    paths
}

pub fn small_synth_config(users: usize, seed: u64) -> SynthConfig {
    SynthConfig {
        users,
        items: 60,
        values_per_relation: 8,
        interactions_per_user: 7,
        taste_groups: 5,
        seed,
        ..SynthConfig::default()
    }
}

pub fn small_synth(dir: &Path, users: usize, seed: u64) -> Dataset {
    let paths = synth::generate(&small_synth_config(users, seed)).unwrap().write(dir).unwrap();
    Dataset::load(&paths).unwrap()
}

pub fn tiny_model(data: &Dataset) -> HintModel<f32> {
    let config = TrainConfig {
        dim: 8,
        cos_dim: 8,
        att_dim: 8,
        mlp_hidden: 16,
        user_slots: 4,
        item_slots: 4,
        ..TrainConfig::default()
    };
    HintModel::new(config, model_dims(&data.graph, &data.log)).unwrap()
}
