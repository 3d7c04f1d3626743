//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hintkg_core::config::TaskKind;
use hintkg_core::discovery::DiscoveryMode;
use hintkg_core::model::HintModel;
use hintkg_core::train::{model_dims, EpochReport};
use hintkg_core::Split;

use crate::backend::{Backend, MockBackend, RemoteBackend};
use crate::checkpoint::{load_checkpoint_for, save_checkpoint};
use crate::config::{BackendKind, RunConfig};
use crate::error::{Error, Result};
use crate::experiment::{self, EvalOptions};
use crate::export;
use crate::manifest::RunManifest;
use crate::synth;
use crate::tsv::Dataset;

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

#[derive(Debug, Parser)]
#[command(name = "hintkg", version, about = "Knowledge-graph preference hints for LLM recommendation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory (for `synth`, the dataset directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Directory with the dataset TSV files.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// normal, no_ipd, no_cie, random or all.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// mock, random or remote.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// pairwise or listwise.
    #[arg(long, global = true)]
    pub task: Option<String>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Number of collaborative users.
    #[arg(long, global = true)]
    pub collaborators: Option<usize>,
    #[arg(long, global = true)]
    pub alpha_user: Option<f64>,
    #[arg(long, global = true)]
    pub alpha_item: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and check a dataset, then dump its instances.
    Ingest,
    /// Print dataset statistics.
    Stats {
        #[arg(long)]
        json: bool,
    },
    /// Write a planted-preference synthetic dataset.
    Synth,
    /// Train the hint model and write a checkpoint.
    Train,
    /// Discover hints for a split and dump them.
    Discover(SplitArgs),
    /// Render instruction/response pairs for a split.
    ExportPrompts(SplitArgs),
    /// Evaluate one discovery mode with a backend.
    Evaluate(SplitArgs),
    /// Evaluate several discovery modes over the same instances.
    Ablate {
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, value_delimiter = ',', default_value = "normal,no_ipd,no_cie,random,all")]
        modes: Vec<String>,
    },
    /// Grid over collaborators, user ratio and item ratio.
    Sweep(SplitArgs),
    /// Train on subsampled train instances and evaluate each model.
    FewShot {
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, value_delimiter = ',', default_value = "256,512,1024")]
        shots: Vec<usize>,
    },
}

#[derive(Debug, Args, Clone)]
pub struct SplitArgs {
    /// Defaults to `<out>/checkpoint.bin`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// valid or test.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Evaluate at most this many instances.
    #[arg(long)]
    pub limit: Option<usize>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Stats { .. } => "stats",
            Command::Synth => "synth",
            Command::Train => "train",
            Command::Discover(_) => "discover",
            Command::ExportPrompts(_) => "export-prompts",
            Command::Evaluate(_) => "evaluate",
            Command::Ablate { .. } => "ablate",
            Command::Sweep(_) => "sweep",
            Command::FewShot { .. } => "few-shot",
        }
    }
}

pub fn resolve_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut c = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if let Some(o) = &g.out {
        c.out = o.clone();
    }
    if let Some(d) = &g.data {
        c.data_dir = d.clone();
    }
    if let Some(m) = &g.mode {
        c.mode = m.parse().map_err(|e: hintkg_core::Error| Error::Config(format!("mode: {e}")))?;
    }
    if let Some(b) = &g.backend {
        c.backend = b.parse()?;
    }
    if let Some(t) = &g.task {
        let task: TaskKind = t.parse().map_err(|e: hintkg_core::Error| Error::Config(format!("task: {e}")))?;
        if task != c.task {
            // the per-task ratio defaults only apply when the file did not set them
            let fresh = hintkg_core::config::TrainConfig::for_task(task);
            if g.config.is_none() {
                c.train.alpha_user = fresh.alpha_user;
                c.train.alpha_item = fresh.alpha_item;
                c.train.collaborative_users = fresh.collaborative_users;
            }
            c.task = task;
        }
    }
    if let Some(e) = g.epochs {
        c.train.max_epochs = e;
    }
    if let Some(n) = g.collaborators {
        c.train.collaborative_users = n;
    }
    if let Some(a) = g.alpha_user {
        c.train.alpha_user = a;
    }
    if let Some(a) = g.alpha_item {
        c.train.alpha_item = a;
    }
    c.normalize();
    c.validate()?;
    Ok(c)
}

fn parse_split(s: &str) -> Result<Split> {
    match s {
        "valid" => Ok(Split::Valid),
        "test" => Ok(Split::Test),
        "train" => Ok(Split::Train),
        _ => Err(Error::Config(format!("split: unknown split `{s}` (train, valid, test)"))),
    }
}

fn make_backend(c: &RunConfig) -> Result<Box<dyn Backend>> {
    Ok(match c.backend {
        BackendKind::Mock => Box::new(MockBackend::Oracle),
        BackendKind::Random => Box::new(MockBackend::RandomTitle { seed: c.seed }),
        BackendKind::Remote => Box::new(RemoteBackend::new(c.remote.clone().with_env())?),
    })
}

struct Run {
    config: RunConfig,
    manifest: RunManifest,
}

impl Run {
    fn out(&self, name: &str) -> PathBuf {
        self.config.out.join(name)
    }

    fn record(&mut self, path: PathBuf) -> PathBuf {
        self.manifest.outputs.push(path.clone());
        path
    }

    fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.out(name);
        fs::write(&path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| Error::io(&path, e))?;
        self.record(path);
        Ok(())
    }

    fn load_data(&mut self) -> Result<Dataset> {
        let paths = self.config.data_paths();
        let data = Dataset::load(&paths)?;
        for p in paths.all() {
            self.manifest.add_input(p)?;
        }
        Ok(data)
    }

    fn load_model(&mut self, data: &Dataset, path: Option<&Path>) -> Result<HintModel<f32>> {
        let path = path.map(Path::to_path_buf).unwrap_or_else(|| self.out(CHECKPOINT_FILE));
        let model = load_checkpoint_for(&path, &self.config.train, Some(model_dims(&data.graph, &data.log)))?;
        self.manifest.add_input(&path)?;
        Ok(model)
    }

    fn instances(&self, data: &Dataset, args: &SplitArgs) -> Result<Vec<hintkg_core::instances::Instance>> {
        let split = parse_split(&args.split)?;
        let mut set = experiment::build_split(data, split, self.config.task, self.config.seed).instances;
        if let Some(n) = args.limit {
            set.truncate(n);
        }
        Ok(set)
    }
}

fn progress(e: &EpochReport) {
    eprintln!(
        "epoch {:>3}  loss {:.5}  valid hit@1 {:.4}{}",
        e.epoch,
        e.train_loss,
        e.valid_hit_ratio,
        if e.improved { "  *" } else { "" }
    );
}

pub fn run(cli: Cli, argv: Vec<String>) -> Result<()> {
    let config = resolve_config(&cli.global)?;
    let name = cli.command.name();
    if let Command::Synth = cli.command {
        let dir = cli.global.out.clone().unwrap_or_else(|| config.data_dir.clone());
        let data = synth::generate(&config.synth)?;
        let paths = data.write(&dir)?;
        eprintln!("wrote synthetic dataset to {}", dir.display());
        let loaded = Dataset::load(&paths)?;
        println!("{}", loaded.report());
        return Ok(());
    }
    if let Command::Stats { json } = cli.command {
        let data = Dataset::load(&config.data_paths())?;
        let report = data.report();
        if json {
            println!("{}", serde_json::to_string_pretty(&report)?);
        } else {
            println!("{report}");
        }
        return Ok(());
    }

    fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e))?;
    let mut run = Run {
        manifest: RunManifest::new(name, argv, &config),
        config,
    };
    let data = run.load_data()?;
    let c = run.config.clone();
    let options = EvalOptions {
        max_tokens: c.remote.max_tokens,
        temperature: c.remote.temperature,
    };

    match &cli.command {
        Command::Synth | Command::Stats { .. } => unreachable!("handled above"),
        Command::Ingest => {
            run.write_json("load_report.json", &data.report())?;
            for split in [Split::Train, Split::Valid, Split::Test] {
                let set = experiment::build_split(&data, split, c.task, c.seed);
                let records = export::instance_records(&data.graph, &data.log, &set.instances, c.seed)?;
                let path = run.out(&format!("instances_{}.jsonl", split.as_str()));
                export::write_jsonl(&path, &records)?;
                run.record(path);
                eprintln!("{}: {} instances, {} users skipped", split.as_str(), set.instances.len(), set.skipped.len());
            }
            println!("{}", data.report());
        }
        Command::Train => {
            let (model, report) = experiment::train_on(&data, c.train.clone(), &mut progress)?;
            let path = run.out(CHECKPOINT_FILE);
            save_checkpoint(&model, &path)?;
            run.record(path);
            run.write_json("train_report.json", &report)?;
            println!("best epoch {} with valid hit@1 {:.4}", report.best_epoch, report.best_valid_hit_ratio);
        }
        Command::Discover(args) => {
            let model = run.load_model(&data, args.checkpoint.as_deref())?;
            let instances = run.instances(&data, args)?;
            let hints = experiment::discover_all(&model, &data, &instances, c.mode, &c.discovery())?;
            let degraded = hints.iter().filter(|h| h.user_side_degraded).count();
            if degraded > 0 {
                eprintln!("warning: {degraded} instances had an empty user-side pool");
            }
            let path = run.out(&format!("hints_{}.jsonl", c.mode.as_str()));
            export::write_jsonl(&path, export::hint_set_records(&data.graph, &data.log, &instances, &hints))?;
            run.record(path);
            println!("{} hint sets", hints.len());
        }
        Command::ExportPrompts(args) => {
            let model = run.load_model(&data, args.checkpoint.as_deref())?;
            let instances = run.instances(&data, args)?;
            let hints = experiment::discover_all(&model, &data, &instances, c.mode, &c.discovery())?;
            let bundles = experiment::prompts_for(&data, &instances, &hints, c.train.history_len)?;
            let path = run.out(&format!("prompts_{}_{}.jsonl", args.split, c.mode.as_str()));
            let m = export::export_instruction_dataset(&bundles, &path)?;
            run.record(export::manifest_path(&path));
            run.record(path);
            println!("{} records, mean instruction {:.1} chars", m.records, m.instruction.mean_chars);
        }
        Command::Evaluate(args) => {
            let model = run.load_model(&data, args.checkpoint.as_deref())?;
            let instances = run.instances(&data, args)?;
            let backend = make_backend(&c)?;
            let out = experiment::evaluate(backend.as_ref(), &model, &data, &instances, c.mode, &c.discovery(), &options)?;
            let path = run.out(&format!("transcript_{}.jsonl", c.mode.as_str()));
            export::write_jsonl(&path, &out.transcript)?;
            run.record(path);
            run.write_json(&format!("eval_{}.json", c.mode.as_str()), &out.report)?;
            println!("{}", serde_json::to_string_pretty(&out.report)?);
        }
        Command::Ablate { split, modes } => {
            let modes = modes
                .iter()
                .map(|m| m.trim().parse::<DiscoveryMode>().map_err(|e| Error::Config(format!("modes: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            let model = run.load_model(&data, split.checkpoint.as_deref())?;
            let instances = run.instances(&data, split)?;
            let backend = make_backend(&c)?;
            let reports = experiment::ablate(backend.as_ref(), &model, &data, &instances, &modes, &c.discovery(), &options)?;
            run.write_json("ablation.json", &reports)?;
            for r in &reports {
                println!("{:<8} hit@1 {:.4}  valid {:.4}", r.mode, r.hit_ratio, r.valid_ratio);
            }
        }
        Command::Sweep(args) => {
            let model = run.load_model(&data, args.checkpoint.as_deref())?;
            let instances = run.instances(&data, args)?;
            let backend = make_backend(&c)?;
            let rows = experiment::sweep(backend.as_ref(), &model, &data, &instances, &c.discovery(), &options)?;
            let path = run.out("sweep.jsonl");
            export::write_jsonl(&path, &rows)?;
            run.record(path);
            println!("{} grid cells", rows.len());
        }
        Command::FewShot { split, shots } => {
            let instances = run.instances(&data, split)?;
            let backend = make_backend(&c)?;
            let mut rows = Vec::new();
            for &n in shots {
                eprintln!("few-shot: {n} training instances");
                let (model, train) = experiment::train_few_shot(&data, c.train.clone(), n, &mut progress)?;
                let out = experiment::evaluate(backend.as_ref(), &model, &data, &instances, c.mode, &c.discovery(), &options)?;
                println!("{n:>6} shots  hit@1 {:.4}  valid {:.4}", out.report.hit_ratio, out.report.valid_ratio);
                rows.push(serde_json::json!({
                    "shots": n,
                    "best_epoch": train.best_epoch,
                    "report": out.report,
                }));
            }
            run.write_json("few_shot.json", &rows)?;
        }
    }
    let dir = run.config.out.clone();
    run.manifest.write(&dir)?;
    Ok(())
}
