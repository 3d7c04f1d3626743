//! Planted-preference synthetic datasets.
//!
//! Every item carries one value for each attribute relation. Every user gets
//! a few latent attribute tuples and picks items with probability
//! proportional to how many of those tuples the item carries plus a uniform
//! noise term. Users may be grouped into taste groups that share their latent
//! tuples, which gives collaborative neighbours something to agree on.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tsv::{self, DataPaths};

pub const LATENT_FILE: &str = "latent_preferences.tsv";
pub const MANIFEST_FILE: &str = "synth_manifest.json";

const RELATION_NAMES: [&str; 5] = ["genre", "director", "actor", "decade", "language"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub users: usize,
    pub items: usize,
    /// Attribute relations; every item has one value per relation.
    pub relations: usize,
    /// Distinct values of each relation.
    pub values_per_relation: usize,
    pub latent_per_user: usize,
    /// Latent tuples come from the first this-many relations; 0 means any
    /// relation.
    pub preference_relations: usize,
    /// Users sharing one set of latent tuples; 0 draws every user's tuples
    /// independently.
    pub taste_groups: usize,
    pub interactions_per_user: usize,
    /// Weight added to every item regardless of overlap.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            users: 500,
            items: 300,
            relations: 5,
            values_per_relation: 20,
            latent_per_user: 2,
            preference_relations: 0,
            taste_groups: 50,
            interactions_per_user: 12,
            noise: 0.02,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, why: String| Err(Error::Config(format!("synth.{field}: {why}")));
        if self.users == 0 {
            return fail("users", "must be positive".into());
        }
        if self.items == 0 {
            return fail("items", "must be positive".into());
        }
        if self.relations == 0 {
            return fail("relations", "must be positive".into());
        }
        if self.values_per_relation == 0 {
            return fail("values_per_relation", "must be positive".into());
        }
        if self.preference_relations > self.relations {
            return fail("preference_relations", format!("must be at most relations ({})", self.relations));
        }
        let vocabulary = self.latent_relations() * self.values_per_relation;
        if self.latent_per_user == 0 || self.latent_per_user > vocabulary {
            return fail("latent_per_user", format!("must be in 1..={vocabulary}, the number of attribute tuples"));
        }
        if self.interactions_per_user == 0 || self.interactions_per_user > self.items {
            return fail("interactions_per_user", format!("must be in 1..={}", self.items));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return fail("noise", "must be finite and >= 0".into());
        }
        if self.taste_groups > self.users {
            return fail("taste_groups", format!("must be at most users ({})", self.users));
        }
        Ok(())
    }

    fn latent_relations(&self) -> usize {
        if self.preference_relations == 0 {
            self.relations
        } else {
            self.preference_relations
        }
    }

    fn width(n: usize) -> usize {
        n.saturating_sub(1).max(1).to_string().len()
    }

    pub fn relation_key(&self, r: usize) -> String {
        RELATION_NAMES.get(r).map(|s| s.to_string()).unwrap_or_else(|| format!("attribute{r}"))
    }

    pub fn attribute_key(&self, r: usize, value: usize) -> String {
        format!("{}:{:0w$}", self.relation_key(r), value, w = Self::width(self.values_per_relation))
    }

    pub fn item_key(&self, i: usize) -> String {
        format!("item:{:0w$}", i, w = Self::width(self.items))
    }

    pub fn user_key(&self, u: usize) -> String {
        format!("user{:0w$}", u, w = Self::width(self.users))
    }
}

/// An attribute tuple as (relation index, value index).
pub type Attr = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub config: SynthConfig,
    /// `item_attrs[i][r]` is item i's value for relation r.
    pub item_attrs: Vec<Vec<usize>>,
    pub latent: Vec<Vec<Attr>>,
    /// Per user, item indices in interaction order.
    pub histories: Vec<Vec<usize>>,
}

fn draw_latent(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Attr> {
    let mut all: Vec<Attr> = (0..config.latent_relations()).flat_map(|r| (0..config.values_per_relation).map(move |v| (r, v))).collect();
    let (chosen, _) = all.partial_shuffle(rng, config.latent_per_user);
    let mut chosen = chosen.to_vec();
    chosen.sort_unstable();
    chosen
}

pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let item_attrs: Vec<Vec<usize>> = (0..config.items)
        .map(|_| (0..config.relations).map(|_| rng.random_range(0..config.values_per_relation)).collect())
        .collect();

    let latent: Vec<Vec<Attr>> = if config.taste_groups == 0 {
        (0..config.users).map(|_| draw_latent(config, &mut rng)).collect()
    } else {
        let groups: Vec<Vec<Attr>> = (0..config.taste_groups).map(|_| draw_latent(config, &mut rng)).collect();
        (0..config.users).map(|_| groups[rng.random_range(0..groups.len())].clone()).collect()
    };

    let mut histories = Vec::with_capacity(config.users);
    for tuples in &latent {
        let mut weights: Vec<f64> = item_attrs
            .iter()
            .map(|attrs| tuples.iter().filter(|&&(r, v)| attrs[r] == v).count() as f64 + config.noise)
            .collect();
        let mut history = Vec::with_capacity(config.interactions_per_user);
        while history.len() < config.interactions_per_user {
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                break;
            }
            let mut x = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if x < w {
                        break;
                    }
                    x -= w;
                }
            }
            let i = pick.expect("positive total has a positive weight");
            weights[i] = 0.0;
            history.push(i);
        }
        histories.push(history);
    }
    Ok(SynthData {
        config: config.clone(),
        item_attrs,
        latent,
        histories,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub generator: SynthConfig,
    pub entities: usize,
    pub triples: usize,
    pub interactions: usize,
}

impl SynthData {
    /// Writes the four dataset files, the latent tuples and a manifest.
    pub fn write(&self, dir: &Path) -> Result<DataPaths> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let c = &self.config;
        let paths = DataPaths::in_dir(dir);

        let mut entities: Vec<[String; 4]> = (0..c.items)
            .map(|i| [c.item_key(i), format!("Synthetic Film {}", &c.item_key(i)[5..]), "item".into(), "1".into()])
            .collect();
        for r in 0..c.relations {
            for v in 0..c.values_per_relation {
                let key = c.attribute_key(r, v);
                let name = format!("{} {}", c.relation_key(r), &key[key.len() - SynthConfig::width(c.values_per_relation)..]);
                entities.push([key, name, c.relation_key(r), "0".into()]);
            }
        }
        let n_entities = entities.len();
        write_rows(&paths.entities, tsv::entity_header(), &entities)?;

        let relations: Vec<[String; 2]> = (0..c.relations).map(|r| [c.relation_key(r), c.relation_key(r)]).collect();
        write_rows(&paths.relations, tsv::relation_header(), &relations)?;

        let triples: Vec<[String; 3]> = self
            .item_attrs
            .iter()
            .enumerate()
            .flat_map(|(i, attrs)| attrs.iter().enumerate().map(move |(r, &v)| [c.item_key(i), c.relation_key(r), c.attribute_key(r, v)]))
            .collect();
        write_rows(&paths.triples, tsv::triple_header(), &triples)?;

        let interactions: Vec<[String; 3]> = self
            .histories
            .iter()
            .enumerate()
            .flat_map(|(u, h)| h.iter().enumerate().map(move |(t, &i)| [c.user_key(u), c.item_key(i), (t + 1).to_string()]))
            .collect();
        write_rows(&paths.interactions, tsv::interaction_header(), &interactions)?;

        let latent: Vec<[String; 3]> = self
            .latent
            .iter()
            .enumerate()
            .flat_map(|(u, ts)| ts.iter().map(move |&(r, v)| [c.user_key(u), c.relation_key(r), c.attribute_key(r, v)]))
            .collect();
        write_rows(&dir.join(LATENT_FILE), &["user", "relation", "tail"], &latent)?;

        let manifest = SynthManifest {
            generator: c.clone(),
            entities: n_entities,
            triples: triples.len(),
            interactions: interactions.len(),
        };
        let mp = dir.join(MANIFEST_FILE);
        fs::write(&mp, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&mp, e))?;
        Ok(paths)
    }
}

fn write_rows<const N: usize>(path: &Path, header: &[&str], rows: &[[String; N]]) -> Result<()> {
    tsv::write_tsv(path, header, rows.iter().map(|r| r.iter().map(String::as_str).collect::<Vec<_>>()))
}

/// Latent tuples keyed by user, as (relation key, tail key).
pub fn read_latent(path: &Path) -> Result<Vec<(String, String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let [u, r, t] = f[..] else {
            return Err(Error::Parse {
                path: PathBuf::from(path),
                line: i + 1,
                message: format!("expected 3 columns, found {}", f.len()),
            });
        };
        out.push((u.to_owned(), r.to_owned(), t.to_owned()));
    }
    Ok(out)
}
