//! End-to-end runs: instance construction, training, discovery, prompting,
//! backend calls and tallies.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Instant;

use hintkg_core::choice::{parse_choice, MatchRule};
use hintkg_core::config::{TaskKind, TrainConfig};
use hintkg_core::discovery::{DiscoveryConfig, DiscoveryMode, Discoverer, HintSet};
use hintkg_core::instances::{build_instances, Instance, InstanceSet};
use hintkg_core::metrics::{EvalReport, Outcome, Tally};
use hintkg_core::model::HintModel;
use hintkg_core::prompt::{candidate_titles, instance_prompt, PromptBundle};
use hintkg_core::train::{train, EpochReport, TrainReport};
use hintkg_core::Split;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::backend::{Backend, CompletionRequest, InstanceContext};
use crate::error::{Error, Result};
use crate::tsv::Dataset;

/// Generator for one (split, task) instance list, independent of every
/// other list built from the same seed.
pub fn instance_rng(seed: u64, split: Split, task: TaskKind) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let split_code = match split {
        Split::Train => 1,
        Split::Valid => 2,
        Split::Test => 3,
    };
    rng.set_stream(split_code * 16 + task.candidates() as u64);
    rng
}

pub fn build_split(data: &Dataset, split: Split, task: TaskKind, seed: u64) -> InstanceSet {
    build_instances(&data.log, &data.graph, split, task, &mut instance_rng(seed, split, task))
}

/// Builds train and valid instances for `config.candidates` and trains.
pub fn train_on(data: &Dataset, config: TrainConfig, observer: &mut dyn FnMut(&EpochReport)) -> Result<(HintModel<f32>, TrainReport)> {
    let task = task_for(&config)?;
    let train_set = build_split(data, Split::Train, task, config.seed);
    let valid_set = build_split(data, Split::Valid, task, config.seed);
    Ok(train(&data.graph, &data.log, &train_set.instances, &valid_set.instances, config, observer)?)
}

pub fn task_for(config: &TrainConfig) -> Result<TaskKind> {
    match config.candidates {
        2 => Ok(TaskKind::Pairwise),
        20 => Ok(TaskKind::Listwise),
        n => Err(Error::Config(format!("train.candidates = {n} matches neither pairwise (2) nor listwise (20)"))),
    }
}

/// Hints for every instance. Discovery is read-only, so instances are
/// spread over threads; output order follows `instances`.
pub fn discover_all(model: &HintModel<f32>, data: &Dataset, instances: &[Instance], mode: DiscoveryMode, config: &DiscoveryConfig) -> Result<Vec<HintSet>> {
    let disc = Discoverer::new(model, &data.graph, &data.log)?;
    let workers = thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    parallel_map(instances, workers, |inst| Ok(disc.discover(inst, mode, config)?))
}

fn parallel_map<I: Sync, O: Send>(items: &[I], workers: usize, f: impl Fn(&I) -> Result<O> + Sync) -> Result<Vec<O>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<O>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let out = f(&items[i]);
                slots.lock().expect("no worker panicked")[i] = Some(out);
            });
        }
    });
    slots.into_inner().expect("no worker panicked").into_iter().map(|o| o.expect("every slot filled")).collect()
}

pub fn prompts_for(data: &Dataset, instances: &[Instance], hints: &[HintSet], history_len: usize) -> Result<Vec<PromptBundle>> {
    instances
        .iter()
        .zip(hints)
        .map(|(inst, h)| Ok(instance_prompt(&data.graph, &data.log, inst, h, history_len)?))
        .collect()
}

/// One line of the evaluation transcript.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranscriptRecord {
    pub request_id: u64,
    pub instance: u32,
    pub prompt_sha256: String,
    pub gold_index: usize,
    pub response: Option<String>,
    pub matched: Option<usize>,
    pub rule: Option<MatchRule>,
    pub outcome: &'static str,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct EvalRun {
    pub report: EvalReport,
    pub transcript: Vec<TranscriptRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub max_tokens: u32,
    pub temperature: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            max_tokens: 64,
            temperature: 0.0,
        }
    }
}

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Correct => "correct",
        Outcome::Wrong => "wrong",
        Outcome::Invalid => "invalid",
        Outcome::TransportError => "transport_error",
    }
}

/// discover → render → complete → parse → tally, for every instance.
pub fn evaluate(
    backend: &dyn Backend,
    model: &HintModel<f32>,
    data: &Dataset,
    instances: &[Instance],
    mode: DiscoveryMode,
    config: &DiscoveryConfig,
    options: &EvalOptions,
) -> Result<EvalRun> {
    let started = Instant::now();
    let hints = discover_all(model, data, instances, mode, config)?;
    let bundles = prompts_for(data, instances, &hints, model.config.history_len)?;
    let work: Vec<usize> = (0..instances.len()).collect();
    let transcript = parallel_map(&work, backend.concurrency(), |&i| {
        let inst = &instances[i];
        let titles = candidate_titles(&data.graph, &inst.candidates)?;
        let request = CompletionRequest {
            id: i as u64,
            instance: inst.id,
            prompt: bundles[i].instruction.clone(),
            max_tokens: options.max_tokens,
            temperature: options.temperature,
        };
        let ctx = InstanceContext {
            titles: &titles,
            gold: inst.target,
            hints: &hints[i],
        };
        let prompt_sha256 = hex::encode(Sha256::digest(request.prompt.as_bytes()));
        let record = match backend.complete(&request, &ctx) {
            Ok(text) => {
                let parse = parse_choice(&text, &titles);
                let outcome = match parse.matched {
                    Some(m) if m == inst.target => Outcome::Correct,
                    Some(_) => Outcome::Wrong,
                    None => Outcome::Invalid,
                };
                TranscriptRecord {
                    request_id: request.id,
                    instance: inst.id,
                    prompt_sha256,
                    gold_index: inst.target,
                    response: Some(text),
                    matched: parse.matched,
                    rule: parse.rule,
                    outcome: outcome_name(outcome),
                    error: None,
                }
            }
            Err(e @ (Error::Transport { .. } | Error::Protocol { .. })) => TranscriptRecord {
                request_id: request.id,
                instance: inst.id,
                prompt_sha256,
                gold_index: inst.target,
                response: None,
                matched: None,
                rule: None,
                outcome: outcome_name(Outcome::TransportError),
                error: Some(e.to_string()),
            },
            Err(e) => return Err(e),
        };
        Ok(record)
    })?;
    let tally: Tally = transcript
        .iter()
        .map(|r| match r.outcome {
            "correct" => Outcome::Correct,
            "wrong" => Outcome::Wrong,
            "invalid" => Outcome::Invalid,
            _ => Outcome::TransportError,
        })
        .collect();
    let task = instances.first().map(|i| i.task.as_str()).unwrap_or("none");
    let mut report = EvalReport::from_tally(mode.as_str(), task, tally);
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(EvalRun { report, transcript })
}

/// One evaluation per mode over the same instances.
pub fn ablate(
    backend: &dyn Backend,
    model: &HintModel<f32>,
    data: &Dataset,
    instances: &[Instance],
    modes: &[DiscoveryMode],
    config: &DiscoveryConfig,
    options: &EvalOptions,
) -> Result<Vec<EvalReport>> {
    modes
        .iter()
        .map(|&m| evaluate(backend, model, data, instances, m, config, options).map(|r| r.report))
        .collect()
}

pub const SWEEP_COLLABORATORS: [usize; 5] = [0, 1, 2, 3, 4];
pub const SWEEP_ALPHA_USER: [f64; 5] = [0.0, 0.05, 0.10, 0.15, 0.20];
pub const SWEEP_ALPHA_ITEM: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub collaborative_users: usize,
    pub alpha_user: f64,
    pub alpha_item: f64,
    pub hit_ratio: f64,
    pub valid_ratio: f64,
}

/// NORMAL-mode evaluation over the hyperparameter grid with a fixed model.
pub fn sweep(backend: &dyn Backend, model: &HintModel<f32>, data: &Dataset, instances: &[Instance], base: &DiscoveryConfig, options: &EvalOptions) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &n in &SWEEP_COLLABORATORS {
        for &au in &SWEEP_ALPHA_USER {
            for &av in &SWEEP_ALPHA_ITEM {
                let cfg = DiscoveryConfig {
                    collaborative_users: n,
                    alpha_user: au,
                    alpha_item: av,
                    ..base.clone()
                };
                let r = evaluate(backend, model, data, instances, DiscoveryMode::Normal, &cfg, options)?.report;
                rows.push(SweepRow {
                    collaborative_users: n,
                    alpha_user: au,
                    alpha_item: av,
                    hit_ratio: r.hit_ratio,
                    valid_ratio: r.valid_ratio,
                });
            }
        }
    }
    Ok(rows)
}

/// Trains on a seeded subsample of `num` train instances; validation and
/// test instances are untouched.
pub fn train_few_shot(data: &Dataset, config: TrainConfig, num: usize, observer: &mut dyn FnMut(&EpochReport)) -> Result<(HintModel<f32>, TrainReport)> {
    let task = task_for(&config)?;
    let full = build_split(data, Split::Train, task, config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ num as u64);
    rng.set_stream(7);
    let subset = hintkg_core::instances::few_shot_subsample(&full.instances, num, &mut rng)?;
    let valid_set = build_split(data, Split::Valid, task, config.seed);
    Ok(train(&data.graph, &data.log, &subset, &valid_set.instances, config, observer)?)
}
