//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::checkpoint::{Checkpoint, ClientSection};
use crate::config::RunConfig;
use crate::corpus::{generate_synthetic, write_dataset};
use crate::error::{Error, Result};
use crate::eval::{
    ablation_table, comm_cost, evaluate_policy, sweep_csv, sweep_table, AblationVariant, PolicySource,
};
use crate::federated::Client;
use crate::pipeline::{
    ablation_run, evaluate_learned, initial_policy, initialize, prepare_data, privacy_sweep, streams,
    train_stage1, train_stage2, ExternalEmbeddings,
};
use crate::policy::PolicyParams;
use crate::{derive_seed, par};

/// Build identifier embedded in every results file.
pub const BUILD_ID: &str = env!("BUILD_DESCRIBE");

#[derive(Debug, Parser)]
#[command(name = "crs-sim", version, about = "Federated, locally private conversational recommender simulator")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Config override, `section.key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the configured synthetic dataset as two text files.
    GenData,
    /// Federated interest estimation; writes `fm.ckpt`.
    TrainFm,
    /// Federated policy training from an interest checkpoint; writes `policy.ckpt`.
    TrainPolicy {
        #[arg(long)]
        fm_checkpoint: PathBuf,
    },
    /// Session metrics and AUC for a checkpoint.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = Agent::Learned)]
        agent: Agent,
        /// Feed the raw user embedding to the policy.
        #[arg(long)]
        no_projection: bool,
    },
    /// Privacy-budget sweep over matched seeds.
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.25, 0.5, 1.0, 2.0])]
        epsilons: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3, 4, 5])]
        seeds: Vec<u64>,
    },
    /// Ablations against the full system.
    Ablate {
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3, 4, 5])]
        seeds: Vec<u64>,
        /// Checkpoint whose embeddings the frozen-external variant uses.
        #[arg(long)]
        external: Option<PathBuf>,
    },
    /// Per-epoch message sizes.
    Commcost {
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long)]
        items: Option<usize>,
        #[arg(long)]
        attributes: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Agent {
    Learned,
    Random,
    MaxEntropy,
    AlwaysRecommend,
}

/// Catalog sizes of two public benchmark datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Lastfm,
    Yelp,
}

impl Preset {
    pub fn counts(&self) -> (usize, usize) {
        match self {
            Preset::Lastfm => (7432, 33),
            Preset::Yelp => (70311, 590),
        }
    }
}

#[derive(Serialize)]
struct ResultsFile<'a, T: Serialize> {
    build: &'a str,
    command: &'a str,
    config: &'a RunConfig,
    result: T,
}

fn write_results<T: Serialize>(out: &Path, name: &str, command: &str, cfg: &RunConfig, result: T) -> Result<PathBuf> {
    let path = out.join(name);
    let body = ResultsFile {
        build: BUILD_ID,
        command,
        config: cfg,
        result,
    };
    std::fs::write(&path, serde_json::to_string_pretty(&body)?)?;
    Ok(path)
}

fn resolve_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut overrides = g.overrides.clone();
    if let Some(s) = g.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(t) = g.threads {
        overrides.push(format!("threads={t}"));
    }
    RunConfig::resolve(g.config.as_deref(), std::env::vars(), &overrides)
}

fn checkpoint_for(cfg: &RunConfig, stage1: u64, stage2: u64, m: &crate::fm::GlobalMatrices, theta: Option<&PolicyParams>, clients: &[Client]) -> Result<Checkpoint> {
    Ok(Checkpoint {
        stage1_epochs: stage1,
        stage2_epochs: stage2,
        matrices: m.clone(),
        policy: theta.cloned(),
        clients: clients
            .iter()
            .map(|c| ClientSection {
                user_id: c.user_id(),
                embedding: c.embedding().to_vec(),
                projection: c.projection().clone(),
            })
            .collect(),
        config_json: serde_json::to_string(cfg)?,
    })
}

/// Rebuilds devices from a checkpoint's per-client sections and the dataset histories.
fn restore_clients(cfg: &RunConfig, ck: &Checkpoint, data: &crate::corpus::SplitDataset) -> Result<Vec<Client>> {
    let train = data.train_by_user();
    if ck.clients.len() != train.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} clients but the dataset has {} users",
            ck.clients.len(),
            train.len()
        )));
    }
    if ck.matrices.num_items() != data.catalog.num_items || ck.matrices.num_attributes() != data.catalog.num_attributes {
        return Err(Error::Checkpoint("checkpoint tables do not match the dataset".into()));
    }
    ck.clients
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if s.user_id != i {
                return Err(Error::Checkpoint(format!("client section {i} belongs to user {}", s.user_id)));
            }
            Ok(Client::restore(
                s.user_id,
                train[i].clone(),
                s.embedding.clone(),
                s.projection.clone(),
                derive_seed(cfg.seed, streams::CLIENTS),
            ))
        })
        .collect()
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli.global)?;
    par::set_threads(cfg.threads);
    let out = &cli.global.out;
    std::fs::create_dir_all(out)?;
    match cli.command {
        Command::GenData => {
            let ds = generate_synthetic(&cfg.data.synthetic)?;
            let interactions = out.join("interactions.tsv");
            let attributes = out.join("attributes.tsv");
            write_dataset(&ds.split.catalog, &ds.split.all_interactions(), &interactions, &attributes)?;
            println!("{}", ds.split.stats());
            println!("wrote {} and {}", interactions.display(), attributes.display());
        }
        Command::TrainFm => {
            let data = prepare_data(&cfg)?;
            let (mut m, mut clients) = initialize(&cfg, &data);
            let summary = train_stage1(&cfg, &data, &mut m, &mut clients, None, &mut |r| {
                if let Some(auc) = r.metric {
                    println!("epoch {:>4}  clients {:>4}  validation AUC {:.4}", r.epoch, r.participants, auc);
                }
            })?;
            let ck = checkpoint_for(&cfg, summary.epochs_run as u64, 0, &m, None, &clients)?;
            let path = out.join("fm.ckpt");
            ck.save(&path)?;
            write_results(out, "train_fm.json", "train-fm", &cfg, &summary)?;
            println!(
                "best validation AUC {:.4} at epoch {}; wrote {}",
                summary.best_validation_auc,
                summary.best_epoch,
                path.display()
            );
        }
        Command::TrainPolicy { fm_checkpoint } => {
            let ck = Checkpoint::load(&fm_checkpoint)?;
            let data = prepare_data(&cfg)?;
            let mut clients = restore_clients(&cfg, &ck, &data)?;
            let mut theta = initial_policy(&cfg, &data);
            let reports = train_stage2(&cfg, &data, &ck.matrices, &mut clients, &mut theta, None, &mut |r| {
                println!("epoch {:>4}  clients {:>4}  |grad| {:.6}", r.epoch, r.participants, r.gradient_norm);
            })?;
            let ck2 = checkpoint_for(&cfg, ck.stage1_epochs, reports.len() as u64, &ck.matrices, Some(&theta), &clients)?;
            let path = out.join("policy.ckpt");
            ck2.save(&path)?;
            write_results(out, "train_policy.json", "train-policy", &cfg, &reports)?;
            println!("wrote {}", path.display());
        }
        Command::Evaluate {
            checkpoint,
            agent,
            no_projection,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let data = prepare_data(&cfg)?;
            let clients = restore_clients(&cfg, &ck, &data)?;
            let result = match agent {
                Agent::Learned => {
                    let theta = ck
                        .policy
                        .as_ref()
                        .ok_or_else(|| Error::Checkpoint("checkpoint has no policy; run train-policy first".into()))?;
                    evaluate_learned(&cfg, &data, &ck.matrices, &clients, theta, !no_projection)?
                }
                other => {
                    let source = match other {
                        Agent::Random => PolicySource::Random,
                        Agent::MaxEntropy => PolicySource::MaxEntropy,
                        _ => PolicySource::AlwaysRecommend,
                    };
                    evaluate_policy(source, &clients, &ck.matrices, &data, &cfg.env, derive_seed(cfg.seed, streams::EVALUATION))?
                }
            };
            print!("{result}");
            write_results(out, "evaluate.json", "evaluate", &cfg, serde_json::json!({ "agent": agent, "metrics": result }))?;
        }
        Command::Sweep { epsilons, seeds } => {
            let rows = privacy_sweep(&cfg, &epsilons, &seeds)?;
            let table = sweep_table(&rows, cfg.env.max_turns);
            print!("{table}");
            std::fs::write(out.join("sweep.txt"), &table)?;
            std::fs::write(out.join("sweep.csv"), sweep_csv(&rows))?;
            write_results(out, "sweep.json", "sweep", &cfg, &rows)?;
        }
        Command::Ablate { seeds, external } => {
            let mut variants = vec![AblationVariant::NoProjection, AblationVariant::RandomEmbeddings];
            let ext = match external {
                Some(p) => {
                    let ck = Checkpoint::load(&p)?;
                    variants.push(AblationVariant::FrozenExternal);
                    Some(ExternalEmbeddings {
                        users: ck.clients.iter().map(|c| c.embedding.clone()).collect(),
                        matrices: ck.matrices,
                    })
                }
                None => None,
            };
            let rows = ablation_run(&cfg, &variants, &seeds, ext.as_ref())?;
            let table = ablation_table(&rows, cfg.env.max_turns);
            print!("{table}");
            std::fs::write(out.join("ablation.txt"), &table)?;
            write_results(out, "ablation.json", "ablate", &cfg, &rows)?;
        }
        Command::Commcost {
            preset,
            items,
            attributes,
        } => {
            let (pi, pa) = preset.map(|p| p.counts()).unwrap_or((
                cfg.data.synthetic.num_items,
                cfg.data.synthetic.num_attributes,
            ));
            let items = items.unwrap_or(pi);
            let attributes = attributes.unwrap_or(pa);
            let policy = PolicyParams::param_count(cfg.model.dim + attributes, cfg.model.hidden, attributes + 1);
            let report = comm_cost(items, attributes, cfg.model.dim, policy, cfg.eval.bytes_per_value)?;
            println!("{report}");
            write_results(out, "commcost.json", "commcost", &cfg, report)?;
        }
    }
    Ok(())
}
