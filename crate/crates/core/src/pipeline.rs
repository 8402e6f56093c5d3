//! End-to-end runs: data preparation, both federated training stages, evaluation, and the
//! privacy-sweep and ablation drivers built on them.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::corpus::{generate_synthetic, load_dataset_with, prune_and_split, LoadOptions, SplitDataset};
use crate::error::{Error, Result};
use crate::eval::{
    auc_item_prediction, evaluate_policy, median, AblationRow, AblationVariant, EvalResult, PolicySource,
    SweepRow,
};
use crate::federated::{
    make_clients, run_stage1_epoch, run_stage2_epoch, select_participants, Client, EpochReport, UploadTap,
};
use crate::fm::GlobalMatrices;
use crate::ldp::PrivacyParams;
use crate::linalg::gaussian_vec;
use crate::policy::PolicyParams;
use crate::{derive_seed, SimRng};

/// Independent random streams derived from the master seed.
pub mod streams {
    pub const MATRICES: u64 = 1;
    pub const CLIENTS: u64 = 2;
    pub const STAGE1_PARTICIPANTS: u64 = 3;
    pub const POLICY_INIT: u64 = 4;
    pub const STAGE2_PARTICIPANTS: u64 = 5;
    pub const VALIDATION: u64 = 6;
    pub const EVALUATION: u64 = 7;
    pub const RANDOM_EMBEDDINGS: u64 = 8;
    pub const TEST_AUC: u64 = 9;
}

pub fn prepare_data(cfg: &RunConfig) -> Result<SplitDataset> {
    match &cfg.data.files {
        None => Ok(generate_synthetic(&cfg.data.synthetic)?.split),
        Some(files) => {
            let raw = load_dataset_with(&files.interactions, &files.attributes, LoadOptions::default())?;
            prune_and_split(
                &raw.0,
                &raw.1,
                cfg.data.min_interactions,
                cfg.data.split,
                cfg.data.split_seed,
            )
        }
    }
}

/// Server-side tables and client devices before any training.
pub fn initialize(cfg: &RunConfig, data: &SplitDataset) -> (GlobalMatrices, Vec<Client>) {
    let mut rng = SimRng::seed_from_u64(derive_seed(cfg.seed, streams::MATRICES));
    let matrices = GlobalMatrices::random(
        data.catalog.num_items,
        data.catalog.num_attributes,
        cfg.model.dim,
        cfg.model.init_std,
        &mut rng,
    );
    let clients = make_clients(
        &data.train_by_user(),
        cfg.model.dim,
        cfg.model.init_std,
        derive_seed(cfg.seed, streams::CLIENTS),
    );
    (matrices, clients)
}

pub fn initial_policy(cfg: &RunConfig, data: &SplitDataset) -> PolicyParams {
    let mut rng = SimRng::seed_from_u64(derive_seed(cfg.seed, streams::POLICY_INIT));
    PolicyParams::random(
        cfg.model.dim,
        data.catalog.num_attributes,
        cfg.model.hidden,
        cfg.model.output_relu,
        &mut rng,
    )
}

/// Shortens the trait-object lifetime so the tap can be lent out repeatedly.
fn reborrow<'a>(tap: &'a mut Option<&mut dyn UploadTap>) -> Option<&'a mut dyn UploadTap> {
    match tap {
        Some(t) => Some(&mut **t),
        None => None,
    }
}

fn embeddings(clients: &[Client]) -> Vec<&[f64]> {
    clients.iter().map(|c| c.embedding()).collect()
}

/// AUC with attributes over one split, scored against items the user never touched.
pub fn split_auc(
    cfg: &RunConfig,
    data: &SplitDataset,
    clients: &[Client],
    matrices: &GlobalMatrices,
    positives: &[crate::corpus::Interaction],
    with_attributes: bool,
    stream: u64,
) -> Result<f64> {
    auc_item_prediction(
        &embeddings(clients),
        matrices,
        &data.catalog,
        positives,
        &data.known_by_user(),
        with_attributes,
        cfg.eval.negative_sampling(),
        derive_seed(cfg.seed, stream),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOneSummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_validation_auc: f64,
    pub reports: Vec<EpochReport>,
}

/// Federated interest estimation with validation-AUC early stopping, checked every
/// `eval_every` epochs and at the last epoch. On return the matrices and client embeddings are
/// those of the best validation check.
pub fn train_stage1(
    cfg: &RunConfig,
    data: &SplitDataset,
    matrices: &mut GlobalMatrices,
    clients: &mut [Client],
    mut tap: Option<&mut dyn UploadTap>,
    on_epoch: &mut dyn FnMut(&EpochReport),
) -> Result<StageOneSummary> {
    let settings = cfg.stage_one_settings()?;
    let mut part_rng = SimRng::seed_from_u64(derive_seed(cfg.seed, streams::STAGE1_PARTICIPANTS));
    let validation = if data.validation.is_empty() {
        &data.train
    } else {
        &data.validation
    };
    // (auc, epoch, tables, user embeddings) of the best check so far.
    let mut best: Option<(f64, usize, GlobalMatrices, Vec<Vec<f64>>)> = None;
    let mut reports = Vec::new();
    let mut stale = 0;
    let mut epochs_run = 0;
    for epoch in 1..=cfg.stage1.max_epochs {
        let participants = select_participants(clients.len(), cfg.stage1.participation, &mut part_rng)?;
        let mut report = run_stage1_epoch(
            clients,
            &participants,
            matrices,
            &data.catalog,
            &settings,
            epoch,
            reborrow(&mut tap),
        )?;
        epochs_run = epoch;
        if epoch % cfg.stage1.eval_every != 0 && epoch != cfg.stage1.max_epochs {
            on_epoch(&report);
            reports.push(report);
            continue;
        }
        let auc = split_auc(cfg, data, clients, matrices, validation, true, streams::VALIDATION)?;
        report.metric = Some(auc);
        on_epoch(&report);
        reports.push(report);
        if best.as_ref().is_none_or(|b| auc > b.0) {
            best = Some((
                auc,
                epoch,
                matrices.clone(),
                clients.iter().map(|c| c.embedding().to_vec()).collect(),
            ));
            stale = 0;
        } else {
            stale += 1;
            if cfg.stage1.patience > 0 && stale >= cfg.stage1.patience {
                break;
            }
        }
    }
    let (best_validation_auc, best_epoch) = match best {
        Some((auc, epoch, best_matrices, best_embeddings)) => {
            *matrices = best_matrices;
            for (c, e) in clients.iter_mut().zip(best_embeddings) {
                c.set_embedding(e);
            }
            (auc, epoch)
        }
        None => (split_auc(cfg, data, clients, matrices, validation, true, streams::VALIDATION)?, 0),
    };
    Ok(StageOneSummary {
        epochs_run,
        best_epoch,
        best_validation_auc,
        reports,
    })
}

/// Federated policy training for `cfg.stage2.epochs` rounds.
pub fn train_stage2(
    cfg: &RunConfig,
    data: &SplitDataset,
    matrices: &GlobalMatrices,
    clients: &mut [Client],
    theta: &mut PolicyParams,
    mut tap: Option<&mut dyn UploadTap>,
    on_epoch: &mut dyn FnMut(&EpochReport),
) -> Result<Vec<EpochReport>> {
    let settings = cfg.stage_two_settings()?;
    let mut part_rng = SimRng::seed_from_u64(derive_seed(cfg.seed, streams::STAGE2_PARTICIPANTS));
    let mut reports = Vec::with_capacity(cfg.stage2.epochs);
    for epoch in 1..=cfg.stage2.epochs {
        let participants = select_participants(clients.len(), cfg.stage2.participation, &mut part_rng)?;
        let report = run_stage2_epoch(
            clients,
            &participants,
            theta,
            matrices,
            &data.catalog,
            &settings,
            epoch,
            reborrow(&mut tap),
        )?;
        on_epoch(&report);
        reports.push(report);
    }
    Ok(reports)
}

pub fn evaluate_learned(
    cfg: &RunConfig,
    data: &SplitDataset,
    matrices: &GlobalMatrices,
    clients: &[Client],
    theta: &PolicyParams,
    use_projection: bool,
) -> Result<EvalResult> {
    let mut r = evaluate_policy(
        PolicySource::Learned { theta, use_projection },
        clients,
        matrices,
        data,
        &cfg.env,
        derive_seed(cfg.seed, streams::EVALUATION),
    )?;
    r.auc_with_attrs = Some(split_auc(cfg, data, clients, matrices, &data.test, true, streams::TEST_AUC)?);
    r.auc_without_attrs = Some(split_auc(cfg, data, clients, matrices, &data.test, false, streams::TEST_AUC)?);
    Ok(r)
}

/// Everything a complete two-stage run produces.
#[derive(Debug, Clone)]
pub struct TrainedSystem {
    pub data: SplitDataset,
    pub matrices: GlobalMatrices,
    pub clients: Vec<Client>,
    pub theta: PolicyParams,
    pub stage1: StageOneSummary,
    pub stage2: Vec<EpochReport>,
}

pub fn train_all(cfg: &RunConfig, mut tap: Option<&mut dyn UploadTap>) -> Result<TrainedSystem> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    let (mut matrices, mut clients) = initialize(cfg, &data);
    let stage1 = train_stage1(cfg, &data, &mut matrices, &mut clients, reborrow(&mut tap), &mut |_| {})?;
    let mut theta = initial_policy(cfg, &data);
    let stage2 = train_stage2(cfg, &data, &matrices, &mut clients, &mut theta, tap, &mut |_| {})?;
    Ok(TrainedSystem {
        data,
        matrices,
        clients,
        theta,
        stage1,
        stage2,
    })
}

/// Copy of `cfg` with the noise scale set for `epsilon` (`None` disables noise).
pub fn with_budget(cfg: &RunConfig, epsilon: Option<f64>) -> Result<RunConfig> {
    let mut c = cfg.clone();
    c.privacy.laplace_scale = match epsilon {
        Some(e) => PrivacyParams::for_budget(cfg.privacy.clip_scale, e)?.laplace_scale,
        None => 0.0,
    };
    Ok(c)
}

/// Seeds a config for repetition `seed`: the master seed and the synthetic world both change.
pub fn with_seed(cfg: &RunConfig, seed: u64) -> RunConfig {
    let mut c = cfg.clone();
    c.seed = seed;
    c.data.synthetic.seed = seed;
    c.data.split_seed = seed;
    c
}

/// Test AUC (with attributes) and final SR of one fully trained run.
pub fn run_once(cfg: &RunConfig) -> Result<(f64, f64)> {
    let sys = train_all(cfg, None)?;
    let r = evaluate_learned(cfg, &sys.data, &sys.matrices, &sys.clients, &sys.theta, cfg.stage2.use_projection)?;
    Ok((r.auc_with_attrs.unwrap_or(f64::NAN), r.final_sr()))
}

/// Trains both stages once per (budget, seed) with matched seeds across budgets. The noiseless
/// row comes last.
pub fn privacy_sweep(cfg: &RunConfig, budgets: &[f64], seeds: &[u64]) -> Result<Vec<SweepRow>> {
    if seeds.is_empty() {
        return Err(Error::invalid("privacy sweep needs at least one seed"));
    }
    let mut rows = Vec::with_capacity(budgets.len() + 1);
    let entries = budgets.iter().map(|&e| Some(e)).chain(std::iter::once(None));
    for eps in entries {
        let base = with_budget(cfg, eps)?;
        let mut aucs = Vec::with_capacity(seeds.len());
        let mut srs = Vec::with_capacity(seeds.len());
        for &s in seeds {
            let (auc, sr) = run_once(&with_seed(&base, s))?;
            aucs.push(auc);
            srs.push(sr);
        }
        rows.push(SweepRow {
            epsilon: eps,
            laplace_scale: base.privacy.laplace_scale,
            auc: median(&aucs),
            success_rate: median(&srs),
            auc_per_seed: aucs,
            success_rate_per_seed: srs,
        });
    }
    Ok(rows)
}

/// Embeddings handed to the frozen-external variant: one user vector per client plus tables.
#[derive(Debug, Clone)]
pub struct ExternalEmbeddings {
    pub users: Vec<Vec<f64>>,
    pub matrices: GlobalMatrices,
}

/// SR and AT of one ablation variant after stage-1 training for `cfg`.
fn ablation_once(
    cfg: &RunConfig,
    variant: AblationVariant,
    external: Option<&ExternalEmbeddings>,
) -> Result<(f64, f64)> {
    let data = prepare_data(cfg)?;
    let (mut matrices, mut clients) = initialize(cfg, &data);
    let mut use_projection = cfg.stage2.use_projection;
    match variant {
        AblationVariant::Full => {
            train_stage1(cfg, &data, &mut matrices, &mut clients, None, &mut |_| {})?;
        }
        AblationVariant::NoProjection => {
            train_stage1(cfg, &data, &mut matrices, &mut clients, None, &mut |_| {})?;
            use_projection = false;
        }
        AblationVariant::RandomEmbeddings => {
            let mut rng = SimRng::seed_from_u64(derive_seed(cfg.seed, streams::RANDOM_EMBEDDINGS));
            matrices = GlobalMatrices::random(
                data.catalog.num_items,
                data.catalog.num_attributes,
                cfg.model.dim,
                cfg.model.init_std,
                &mut rng,
            );
            for c in clients.iter_mut() {
                c.set_embedding(gaussian_vec(cfg.model.dim, cfg.model.init_std, &mut rng));
            }
        }
        AblationVariant::FrozenExternal => {
            let ext = external.ok_or_else(|| Error::invalid("frozen-external variant needs embeddings"))?;
            if ext.users.len() != clients.len() || ext.matrices.dim() != cfg.model.dim {
                return Err(Error::Shape {
                    expected: clients.len(),
                    actual: ext.users.len(),
                });
            }
            matrices = ext.matrices.clone();
            for (c, e) in clients.iter_mut().zip(&ext.users) {
                c.set_embedding(e.clone());
            }
        }
    }
    let mut stage2_cfg = cfg.clone();
    stage2_cfg.stage2.use_projection = use_projection;
    let mut theta = initial_policy(cfg, &data);
    train_stage2(&stage2_cfg, &data, &matrices, &mut clients, &mut theta, None, &mut |_| {})?;
    let r = evaluate_policy(
        PolicySource::Learned {
            theta: &theta,
            use_projection,
        },
        &clients,
        &matrices,
        &data,
        &cfg.env,
        derive_seed(cfg.seed, streams::EVALUATION),
    )?;
    Ok((r.final_sr(), r.average_turns))
}

/// Runs each variant once per seed; the full system is always the first row.
pub fn ablation_run(
    cfg: &RunConfig,
    variants: &[AblationVariant],
    seeds: &[u64],
    external: Option<&ExternalEmbeddings>,
) -> Result<Vec<AblationRow>> {
    if seeds.is_empty() {
        return Err(Error::invalid("ablation needs at least one seed"));
    }
    let mut order = vec![AblationVariant::Full];
    order.extend(variants.iter().copied().filter(|v| *v != AblationVariant::Full));
    let mut rows = Vec::with_capacity(order.len());
    for variant in order {
        let mut srs = Vec::with_capacity(seeds.len());
        let mut ats = Vec::with_capacity(seeds.len());
        for &s in seeds {
            let (sr, at) = ablation_once(&with_seed(cfg, s), variant, external)?;
            srs.push(sr);
            ats.push(at);
        }
        rows.push(AblationRow {
            variant,
            success_rate: median(&srs),
            average_turns: median(&ats),
            success_rate_per_seed: srs,
            average_turns_per_seed: ats,
        });
    }
    Ok(rows)
}
