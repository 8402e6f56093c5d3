//! Synchronous federated rounds for both training stages.
//!
//! Clients own their interaction history, user embedding and projection layer. The only things
//! that cross the client→server boundary are [`StageOneUpload`] and [`StageTwoUpload`], each
//! produced by the privatizer. Client work runs in parallel against a read-only snapshot of the
//! shared state; aggregation and the server update run sequentially in client order, so results
//! do not depend on thread count.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::corpus::Catalog;
use crate::dialog::{run_episode, EnvConfig, PolicyAgent, World};
use crate::error::{Error, Result};
use crate::fm::{fm_gradients, sample_instances, GlobalMatrices, StatedAttributes};
use crate::ldp::{privatize_in_place, PrivacyParams};
use crate::linalg::{gaussian_vec, norm};
use crate::par;
use crate::policy::{
    apply_projection_step, policy_gradients, EmbeddingInput, PolicyParams, ProjectionLayer,
    ReturnWeighting, SelectionMode,
};
use crate::{derive_seed, SimRng};

/// One simulated device.
#[derive(Debug, Clone)]
pub struct Client {
    user_id: usize,
    /// Training interactions, sorted.
    history: Vec<usize>,
    embedding: Vec<f64>,
    projection: ProjectionLayer,
    rng: SimRng,
}

impl Client {
    pub fn new(user_id: usize, mut history: Vec<usize>, dim: usize, init_std: f64, seed: u64) -> Self {
        history.sort_unstable();
        history.dedup();
        let mut rng = SimRng::seed_from_u64(derive_seed(seed, user_id as u64));
        let embedding = gaussian_vec(dim, init_std, &mut rng);
        Self {
            user_id,
            history,
            embedding,
            projection: ProjectionLayer::identity(dim),
            rng,
        }
    }

    /// Rebuilds a client from on-device storage.
    pub fn restore(
        user_id: usize,
        history: Vec<usize>,
        embedding: Vec<f64>,
        projection: ProjectionLayer,
        seed: u64,
    ) -> Self {
        let mut c = Self::new(user_id, history, embedding.len(), 0.0, seed);
        c.embedding = embedding;
        c.projection = projection;
        c
    }

    pub fn user_id(&self) -> usize {
        self.user_id
    }

    pub fn history(&self) -> &[usize] {
        &self.history
    }

    pub fn embedding(&self) -> &[f64] {
        &self.embedding
    }

    pub fn projection(&self) -> &ProjectionLayer {
        &self.projection
    }

    pub fn set_embedding(&mut self, e: Vec<f64>) {
        self.embedding = e;
    }

    pub fn set_projection(&mut self, p: ProjectionLayer) {
        self.projection = p;
    }

    /// Embedding half of the policy state for this client.
    pub fn policy_embedding(&self, use_projection: bool) -> Result<Vec<f64>> {
        if use_projection {
            EmbeddingInput::Projected(&self.projection).embed(&self.embedding)
        } else {
            EmbeddingInput::Raw.embed(&self.embedding)
        }
    }
}

/// Builds one client per user from the per-user training items.
pub fn make_clients(train_by_user: &[Vec<usize>], dim: usize, init_std: f64, seed: u64) -> Vec<Client> {
    train_by_user
        .iter()
        .enumerate()
        .map(|(u, items)| Client::new(u, items.clone(), dim, init_std, seed))
        .collect()
}

/// Privatized item- and attribute-table gradients, dense and row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageOneUpload {
    pub item_gradients: Vec<f64>,
    pub attribute_gradients: Vec<f64>,
}

/// Privatized policy gradient, shaped like θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageTwoUpload {
    pub policy_gradient: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Interests,
    Elicitation,
}

/// Observer of serialized client→server payloads.
pub trait UploadTap: Send {
    fn record(&mut self, stage: Stage, client_index: usize, payload: &[u8]);
}

/// Keeps every payload in memory.
#[derive(Debug, Default)]
pub struct CapturingTap {
    pub payloads: Vec<(Stage, usize, Vec<u8>)>,
}

impl UploadTap for CapturingTap {
    fn record(&mut self, stage: Stage, client_index: usize, payload: &[u8]) {
        self.payloads.push((stage, client_index, payload.to_vec()));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub stage: Stage,
    pub epoch: usize,
    pub participants: usize,
    pub rejected: usize,
    /// L2 norm of the aggregated update direction(s).
    pub gradient_norm: f64,
    pub metric: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageOneSettings {
    pub lr_user: f64,
    pub lr_items: f64,
    pub lr_attributes: f64,
    pub reg: f64,
    pub negatives_per_positive: usize,
    pub privacy: PrivacyParams,
}

impl StageOneSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_user > 0.0 && self.lr_items > 0.0 && self.lr_attributes > 0.0) {
            return Err(Error::invalid("learning rates must be positive"));
        }
        if self.reg < 0.0 {
            return Err(Error::invalid("regularization must be non-negative"));
        }
        self.privacy.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTwoSettings {
    pub learning_rate: f64,
    pub local_learning_rate: f64,
    pub episodes_per_client: usize,
    pub weighting: ReturnWeighting,
    pub use_projection: bool,
    pub privacy: PrivacyParams,
    pub env: EnvConfig,
}

impl StageTwoSettings {
    pub fn validate(&self) -> Result<()> {
        if self.episodes_per_client == 0 {
            return Err(Error::invalid("episodes_per_client must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || self.local_learning_rate < 0.0 {
            return Err(Error::invalid("policy learning rates must be positive"));
        }
        self.env.validate()?;
        self.privacy.validate()
    }
}

/// Entrywise unweighted mean of same-shape tensors.
pub fn aggregate<T: AsRef<[f64]>>(uploads: &[T]) -> Result<Vec<f64>> {
    let first = uploads
        .first()
        .ok_or_else(|| Error::invalid("aggregate needs at least one upload"))?
        .as_ref();
    let mut sum = vec![0.0; first.len()];
    for u in uploads {
        let u = u.as_ref();
        if u.len() != sum.len() {
            return Err(Error::Shape {
                expected: sum.len(),
                actual: u.len(),
            });
        }
        for (s, x) in sum.iter_mut().zip(u) {
            *s += x;
        }
    }
    let n = uploads.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}

/// Seeded sample without replacement of `round(fraction · n)` client indices (at least one),
/// returned sorted.
pub fn select_participants<R: Rng + ?Sized>(num_clients: usize, fraction: f64, rng: &mut R) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid("participation fraction must lie in (0, 1]"));
    }
    if num_clients == 0 {
        return Err(Error::invalid("no clients"));
    }
    if fraction == 1.0 {
        return Ok((0..num_clients).collect());
    }
    let count = ((fraction * num_clients as f64).round() as usize).clamp(1, num_clients);
    let ids: Vec<usize> = (0..num_clients).collect();
    let mut chosen: Vec<usize> = ids.choose_multiple(rng, count).copied().collect();
    chosen.sort_unstable();
    Ok(chosen)
}

fn participation_mask(num_clients: usize, participants: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; num_clients];
    for &p in participants {
        mask[p] = true;
    }
    mask
}

fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|x| x.is_finite())
}

fn stage_one_client(
    client: &mut Client,
    matrices: &GlobalMatrices,
    catalog: &Catalog,
    s: &StageOneSettings,
) -> Result<StageOneUpload> {
    let (general, matched) = sample_instances(
        &client.history,
        catalog,
        StatedAttributes::PositiveItem,
        s.negatives_per_positive,
        &mut client.rng,
    );
    let g = fm_gradients(&general, &matched, &client.embedding, matrices, s.reg)?;
    let mut items = g.items.to_dense(matrices.num_items(), matrices.dim()).into_vec();
    let mut attrs = g
        .attributes
        .to_dense(matrices.num_attributes(), matrices.dim())
        .into_vec();
    if !all_finite(&g.user) || !all_finite(&items) || !all_finite(&attrs) {
        return Err(Error::NonFinite(client.user_id));
    }
    for (e, d) in client.embedding.iter_mut().zip(&g.user) {
        *e -= s.lr_user * d;
    }
    privatize_in_place(&mut items, &s.privacy, &mut client.rng)?;
    privatize_in_place(&mut attrs, &s.privacy, &mut client.rng)?;
    Ok(StageOneUpload {
        item_gradients: items,
        attribute_gradients: attrs,
    })
}

/// Sends uploads through the optional tap as serialized bytes and decodes them server-side.
fn transmit<T: Serialize + for<'de> Deserialize<'de>>(
    stage: Stage,
    uploads: Vec<(usize, T)>,
    tap: Option<&mut dyn UploadTap>,
) -> Result<Vec<T>> {
    match tap {
        None => Ok(uploads.into_iter().map(|(_, u)| u).collect()),
        Some(tap) => uploads
            .into_iter()
            .map(|(idx, u)| {
                let bytes = serde_json::to_vec(&u)?;
                tap.record(stage, idx, &bytes);
                Ok(serde_json::from_slice(&bytes)?)
            })
            .collect(),
    }
}

/// Collects per-client results in index order, logging and dropping failures.
fn collect_uploads<T>(results: Vec<Option<Result<T>>>, stage: Stage, epoch: usize) -> (Vec<(usize, T)>, usize) {
    let mut ok = Vec::new();
    let mut rejected = 0;
    for (idx, r) in results.into_iter().enumerate() {
        match r {
            None => {}
            Some(Ok(u)) => ok.push((idx, u)),
            Some(Err(e)) => {
                rejected += 1;
                log::warn!("{stage:?} epoch {epoch}: upload from client {idx} rejected: {e}");
            }
        }
    }
    (ok, rejected)
}

/// One round of the interest-estimation stage: local FM gradients, local user-embedding step,
/// privatized table gradients, unweighted averaging and the server descent step.
pub fn run_stage1_epoch(
    clients: &mut [Client],
    participants: &[usize],
    matrices: &mut GlobalMatrices,
    catalog: &Catalog,
    settings: &StageOneSettings,
    epoch: usize,
    tap: Option<&mut dyn UploadTap>,
) -> Result<EpochReport> {
    settings.validate()?;
    let active = participation_mask(clients.len(), participants);
    let snapshot: &GlobalMatrices = matrices;
    let results = par::map_mut(clients, |i, c| {
        active[i].then(|| stage_one_client(c, snapshot, catalog, settings))
    });
    let (uploads, rejected) = collect_uploads(results, Stage::Interests, epoch);
    let uploads = transmit(Stage::Interests, uploads, tap)?;
    let mut report = EpochReport {
        stage: Stage::Interests,
        epoch,
        participants: uploads.len(),
        rejected,
        gradient_norm: 0.0,
        metric: None,
    };
    if uploads.is_empty() {
        return Ok(report);
    }
    let item_grad = aggregate(&uploads.iter().map(|u| &u.item_gradients[..]).collect::<Vec<_>>())?;
    let attr_grad = aggregate(&uploads.iter().map(|u| &u.attribute_gradients[..]).collect::<Vec<_>>())?;
    for (w, g) in matrices.items.as_mut_slice().iter_mut().zip(&item_grad) {
        *w -= settings.lr_items * g;
    }
    for (w, g) in matrices.attributes.as_mut_slice().iter_mut().zip(&attr_grad) {
        *w -= settings.lr_attributes * g;
    }
    report.gradient_norm = (norm(&item_grad).powi(2) + norm(&attr_grad).powi(2)).sqrt();
    Ok(report)
}

fn stage_two_client(
    client: &mut Client,
    theta: &PolicyParams,
    matrices: &GlobalMatrices,
    catalog: &Catalog,
    s: &StageTwoSettings,
) -> Result<StageTwoUpload> {
    if client.history.is_empty() {
        return Err(Error::EmptyDataset(format!("client {} has no training items", client.user_id)));
    }
    let world = World {
        catalog,
        matrices,
        config: &s.env,
    };
    let agent = PolicyAgent {
        theta,
        emb: client.policy_embedding(s.use_projection)?,
        mode: SelectionMode::Sample,
    };
    let mut trajectories = Vec::with_capacity(s.episodes_per_client);
    for _ in 0..s.episodes_per_client {
        let target = client.history[client.rng.gen_range(0..client.history.len())];
        let ep = run_episode(&agent, &world, &client.embedding, &client.history, target, &mut client.rng)?;
        trajectories.push(ep.trajectory);
    }
    let local = s.use_projection.then_some((&client.projection, &client.embedding[..]));
    let grads = policy_gradients(&trajectories, theta, s.weighting, local)?;
    let mut gradient = grads.theta;
    if !all_finite(&gradient) {
        return Err(Error::NonFinite(client.user_id));
    }
    if let Some(pg) = grads.projection {
        apply_projection_step(&mut client.projection, &pg, s.local_learning_rate);
    }
    privatize_in_place(&mut gradient, &s.privacy, &mut client.rng)?;
    Ok(StageTwoUpload {
        policy_gradient: gradient,
    })
}

/// One round of the elicitation stage. Uploads carry the ascent direction of the expected
/// return, so the server adds `α ·` their mean to θ.
pub fn run_stage2_epoch(
    clients: &mut [Client],
    participants: &[usize],
    theta: &mut PolicyParams,
    matrices: &GlobalMatrices,
    catalog: &Catalog,
    settings: &StageTwoSettings,
    epoch: usize,
    tap: Option<&mut dyn UploadTap>,
) -> Result<EpochReport> {
    settings.validate()?;
    if !all_finite(&theta.params) {
        return Err(Error::invalid("policy parameters are not finite"));
    }
    let active = participation_mask(clients.len(), participants);
    let snapshot: &PolicyParams = theta;
    let results = par::map_mut(clients, |i, c| {
        active[i].then(|| stage_two_client(c, snapshot, matrices, catalog, settings))
    });
    let (uploads, rejected) = collect_uploads(results, Stage::Elicitation, epoch);
    let uploads = transmit(Stage::Elicitation, uploads, tap)?;
    let mut report = EpochReport {
        stage: Stage::Elicitation,
        epoch,
        participants: uploads.len(),
        rejected,
        gradient_norm: 0.0,
        metric: None,
    };
    if uploads.is_empty() {
        return Ok(report);
    }
    let grad = aggregate(&uploads.iter().map(|u| &u.policy_gradient[..]).collect::<Vec<_>>())?;
    if grad.len() != theta.len() {
        return Err(Error::Shape {
            expected: theta.len(),
            actual: grad.len(),
        });
    }
    for (w, g) in theta.params.iter_mut().zip(&grad) {
        *w += settings.learning_rate * g;
    }
    report.gradient_norm = norm(&grad);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_basic_cases() {
        assert_eq!(aggregate(&[vec![1.0, 2.0]]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(aggregate(&[vec![1.0, 3.0], vec![3.0, 1.0]]).unwrap(), vec![2.0, 2.0]);
        let t = vec![0.5, -0.75, 3.0];
        assert_eq!(aggregate(&[t.clone(), t.clone(), t.clone()]).unwrap(), t);
        assert!(matches!(aggregate(&[vec![1.0], vec![1.0, 2.0]]), Err(Error::Shape { .. })));
        assert!(aggregate::<Vec<f64>>(&[]).is_err());
    }

    #[test]
    fn participant_selection() {
        let mut rng = SimRng::seed_from_u64(1);
        assert_eq!(select_participants(4, 1.0, &mut rng).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(select_participants(10, 0.5, &mut rng).unwrap().len(), 5);
        assert_eq!(select_participants(10, 0.01, &mut rng).unwrap().len(), 1);
        let a = select_participants(10, 0.3, &mut SimRng::seed_from_u64(9)).unwrap();
        let b = select_participants(10, 0.3, &mut SimRng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(select_participants(10, 0.0, &mut rng).is_err());
        assert!(select_participants(10, 1.5, &mut rng).is_err());
    }

    #[test]
    fn upload_types_reject_extra_fields() {
        let bad = br#"{"item_gradients":[],"attribute_gradients":[],"embedding":[1.0]}"#;
        assert!(serde_json::from_slice::<StageOneUpload>(bad).is_err());
        let bad = br#"{"policy_gradient":[],"projection":[1.0]}"#;
        assert!(serde_json::from_slice::<StageTwoUpload>(bad).is_err());
    }
}
