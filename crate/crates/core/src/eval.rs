//! Session metrics, item-prediction AUC, the communication-cost calculator, and the sweep and
//! ablation harnesses.

use std::fmt;

use rand::seq::index;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Catalog, Interaction, SplitDataset};
use crate::dialog::{
    run_episode, Agent, AlwaysRecommendAgent, EnvConfig, EpisodeOutcome, MaxEntropyAgent, PolicyAgent,
    RandomAgent, World,
};
use crate::error::{Error, Result};
use crate::federated::Client;
use crate::fm::{score_unchecked, GlobalMatrices};
use crate::par;
use crate::policy::{PolicyParams, SelectionMode};
use crate::{derive_seed, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// `sr_at[t - 1]` is the fraction of sessions that succeeded by turn `t`.
    pub sr_at: Vec<f64>,
    /// Mean session length; failed sessions count as `max_turns`.
    pub average_turns: f64,
    pub auc_with_attrs: Option<f64>,
    pub auc_without_attrs: Option<f64>,
    pub episodes: usize,
}

impl EvalResult {
    /// SR@t; turns past the horizon report the final value.
    pub fn sr(&self, t: usize) -> f64 {
        if t == 0 || self.sr_at.is_empty() {
            return 0.0;
        }
        self.sr_at[t.min(self.sr_at.len()) - 1]
    }

    pub fn final_sr(&self) -> f64 {
        self.sr_at.last().copied().unwrap_or(0.0)
    }
}

impl fmt::Display for EvalResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "episodes\t{}", self.episodes)?;
        writeln!(f, "SR@{}\t{:.4}", self.sr_at.len(), self.final_sr())?;
        writeln!(f, "AT\t{:.4}", self.average_turns)?;
        if let Some(a) = self.auc_with_attrs {
            writeln!(f, "AUC(attrs)\t{a:.4}")?;
        }
        if let Some(a) = self.auc_without_attrs {
            writeln!(f, "AUC(no attrs)\t{a:.4}")?;
        }
        for (t, v) in self.sr_at.iter().enumerate() {
            writeln!(f, "SR@{}\t{:.4}", t + 1, v)?;
        }
        Ok(())
    }
}

/// Builds SR@t and AT from `(success, turns)` pairs.
pub fn summarize(outcomes: &[(bool, usize)], max_turns: usize) -> Result<EvalResult> {
    if outcomes.is_empty() {
        return Err(Error::EmptyDataset("no episodes to summarize".into()));
    }
    if max_turns == 0 {
        return Err(Error::invalid("max_turns must be at least 1"));
    }
    let mut successes_at = vec![0usize; max_turns];
    let mut turn_sum = 0usize;
    for &(success, turns) in outcomes {
        if success {
            if turns == 0 || turns > max_turns {
                return Err(Error::invalid(format!("success at turn {turns} outside 1..={max_turns}")));
            }
            successes_at[turns - 1] += 1;
            turn_sum += turns;
        } else {
            turn_sum += max_turns;
        }
    }
    let n = outcomes.len() as f64;
    let mut cumulative = 0usize;
    let sr_at = successes_at
        .iter()
        .map(|&c| {
            cumulative += c;
            cumulative as f64 / n
        })
        .collect();
    Ok(EvalResult {
        sr_at,
        average_turns: turn_sum as f64 / n,
        auc_with_attrs: None,
        auc_without_attrs: None,
        episodes: outcomes.len(),
    })
}

/// Which agent drives evaluation sessions.
#[derive(Debug, Clone, Copy)]
pub enum PolicySource<'a> {
    Learned {
        theta: &'a PolicyParams,
        use_projection: bool,
    },
    Random,
    MaxEntropy,
    AlwaysRecommend,
}

/// Items each user is known to have consumed outside the test split.
fn observed_by_user(split: &SplitDataset) -> Vec<Vec<usize>> {
    let mut out = split.items_by_user(&split.train);
    for it in &split.validation {
        out[it.user].push(it.item);
    }
    for items in &mut out {
        items.sort_unstable();
        items.dedup();
    }
    out
}

/// Runs one session per interaction in `sessions`. Learned policies act greedily.
pub fn run_sessions(
    source: PolicySource<'_>,
    clients: &[Client],
    matrices: &GlobalMatrices,
    split: &SplitDataset,
    sessions: &[Interaction],
    env: &EnvConfig,
    seed: u64,
) -> Result<Vec<EpisodeOutcome>> {
    env.validate()?;
    if clients.len() != split.num_users() {
        return Err(Error::Shape {
            expected: split.num_users(),
            actual: clients.len(),
        });
    }
    let observed = observed_by_user(split);
    let world = World {
        catalog: &split.catalog,
        matrices,
        config: env,
    };
    let results = par::map(sessions, |i, it| -> Result<EpisodeOutcome> {
        let client = &clients[it.user];
        let mut rng = SimRng::seed_from_u64(derive_seed(seed, i as u64));
        let policy_agent;
        let agent: &dyn Agent = match source {
            PolicySource::Learned { theta, use_projection } => {
                policy_agent = PolicyAgent {
                    theta,
                    emb: client.policy_embedding(use_projection)?,
                    mode: SelectionMode::Greedy,
                };
                &policy_agent
            }
            PolicySource::Random => &RandomAgent,
            PolicySource::MaxEntropy => &MaxEntropyAgent,
            PolicySource::AlwaysRecommend => &AlwaysRecommendAgent,
        };
        run_episode(agent, &world, client.embedding(), &observed[it.user], it.item, &mut rng)
    });
    results.into_iter().collect()
}

/// One session per test interaction, summarized into SR@t and AT.
pub fn evaluate_policy(
    source: PolicySource<'_>,
    clients: &[Client],
    matrices: &GlobalMatrices,
    split: &SplitDataset,
    env: &EnvConfig,
    seed: u64,
) -> Result<EvalResult> {
    if split.test.is_empty() {
        return Err(Error::EmptyDataset("test split is empty".into()));
    }
    let outcomes = run_sessions(source, clients, matrices, split, &split.test, env, seed)?;
    let pairs: Vec<(bool, usize)> = outcomes.iter().map(|o| (o.success, o.turns)).collect();
    summarize(&pairs, env.max_turns)
}

/// Fraction of correctly ordered (positive, negative) pairs; ties count one half.
pub fn pairwise_auc(positives: &[f64], negatives: &[f64]) -> Option<f64> {
    let (num, den) = pair_counts(positives, negatives);
    (den > 0).then(|| num / den as f64)
}

fn pair_counts(positives: &[f64], negatives: &[f64]) -> (f64, usize) {
    let mut num = 0.0;
    for &p in positives {
        for &n in negatives {
            num += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    (num, positives.len() * negatives.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeSampling {
    /// Up to this many uninteracted items per positive, without replacement.
    Sampled(usize),
    /// Every uninteracted item.
    Exhaustive,
}

impl Default for NegativeSampling {
    fn default() -> Self {
        Self::Sampled(50)
    }
}

/// Item-prediction AUC over `positives`. Each positive is scored against negatives drawn from
/// the items its user never interacted with (`known_by_user`), with the stated attributes set to
/// the positive item's attributes or left empty.
pub fn auc_item_prediction(
    user_embeddings: &[&[f64]],
    matrices: &GlobalMatrices,
    catalog: &Catalog,
    positives: &[Interaction],
    known_by_user: &[Vec<usize>],
    with_attributes: bool,
    negatives: NegativeSampling,
    seed: u64,
) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::EmptyDataset("no positives to score".into()));
    }
    if let NegativeSampling::Sampled(0) = negatives {
        return Err(Error::invalid("at least one negative per positive is required"));
    }
    for it in positives {
        if it.user >= user_embeddings.len() || it.user >= known_by_user.len() {
            return Err(Error::Index {
                what: "user",
                index: it.user,
                limit: user_embeddings.len().min(known_by_user.len()),
            });
        }
        if it.item >= matrices.num_items() {
            return Err(Error::Index {
                what: "item",
                index: it.item,
                limit: matrices.num_items(),
            });
        }
        if user_embeddings[it.user].len() != matrices.dim() {
            return Err(Error::Shape {
                expected: matrices.dim(),
                actual: user_embeddings[it.user].len(),
            });
        }
    }
    let counts = par::map(positives, |i, it| {
        let user = user_embeddings[it.user];
        let known = &known_by_user[it.user];
        let stated: &[usize] = if with_attributes {
            catalog.attributes(it.item)
        } else {
            &[]
        };
        let pool: Vec<usize> = (0..matrices.num_items())
            .filter(|v| known.binary_search(v).is_err())
            .collect();
        let chosen: Vec<usize> = match negatives {
            NegativeSampling::Exhaustive => pool,
            NegativeSampling::Sampled(n) if n >= pool.len() => pool,
            NegativeSampling::Sampled(n) => {
                let mut rng = SimRng::seed_from_u64(derive_seed(seed, i as u64));
                index::sample(&mut rng, pool.len(), n).into_iter().map(|j| pool[j]).collect()
            }
        };
        let pos = score_unchecked(user, it.item, stated, matrices);
        let neg: Vec<f64> = chosen
            .iter()
            .map(|&v| score_unchecked(user, v, stated, matrices))
            .collect();
        pair_counts(&[pos], &neg)
    });
    let (num, den) = counts
        .into_iter()
        .fold((0.0, 0usize), |(a, b), (n, d)| (a + n, b + d));
    if den == 0 {
        return Err(Error::EmptyDataset("no negatives available".into()));
    }
    Ok(num / den as f64)
}

/// Per-epoch message sizes for both stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommCostReport {
    pub bytes_per_value: usize,
    pub stage1_download_bytes: u64,
    pub stage1_upload_bytes: u64,
    pub stage1_total_bytes: u64,
    pub stage2_download_bytes: u64,
    pub stage2_upload_bytes: u64,
    pub stage2_total_bytes: u64,
}

pub const BYTES_PER_MIB: f64 = 1024.0 * 1024.0;

pub fn mib(bytes: u64) -> f64 {
    bytes as f64 / BYTES_PER_MIB
}

/// Download and upload each carry the full item and attribute tables in stage 1 and a full
/// copy of θ in stage 2.
pub fn comm_cost(
    num_items: usize,
    num_attributes: usize,
    dim: usize,
    policy_params: usize,
    bytes_per_value: usize,
) -> Result<CommCostReport> {
    if num_items == 0 || num_attributes == 0 || dim == 0 || policy_params == 0 || bytes_per_value == 0 {
        return Err(Error::invalid("communication cost needs positive counts"));
    }
    let bpv = bytes_per_value as u64;
    let stage1 = ((num_items + num_attributes) * dim) as u64 * bpv;
    let stage2 = policy_params as u64 * bpv;
    Ok(CommCostReport {
        bytes_per_value,
        stage1_download_bytes: stage1,
        stage1_upload_bytes: stage1,
        stage1_total_bytes: 2 * stage1,
        stage2_download_bytes: stage2,
        stage2_upload_bytes: stage2,
        stage2_total_bytes: 2 * stage2,
    })
}

impl fmt::Display for CommCostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "stage\tdownload_bytes\tupload_bytes\ttotal_bytes\ttotal_MiB")?;
        writeln!(
            f,
            "interests\t{}\t{}\t{}\t{:.4}",
            self.stage1_download_bytes,
            self.stage1_upload_bytes,
            self.stage1_total_bytes,
            mib(self.stage1_total_bytes)
        )?;
        write!(
            f,
            "policy\t{}\t{}\t{}\t{:.4}",
            self.stage2_download_bytes,
            self.stage2_upload_bytes,
            self.stage2_total_bytes,
            mib(self.stage2_total_bytes)
        )
    }
}

/// Median of a non-empty sample; the mean of the middle pair for even sizes.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// One budget of a privacy sweep, with per-seed values and their medians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `None` for the noiseless reference row.
    pub epsilon: Option<f64>,
    pub laplace_scale: f64,
    pub auc: f64,
    pub success_rate: f64,
    pub auc_per_seed: Vec<f64>,
    pub success_rate_per_seed: Vec<f64>,
}

fn fmt_epsilon(e: Option<f64>) -> String {
    e.map_or_else(|| "inf".to_string(), |e| format!("{e}"))
}

/// Aligned text table.
pub fn sweep_table(rows: &[SweepRow], max_turns: usize) -> String {
    let mut out = format!("{:>8}  {:>10}  {:>8}  {:>8}\n", "epsilon", "lambda", "AUC", format!("SR@{max_turns}"));
    for r in rows {
        out.push_str(&format!(
            "{:>8}  {:>10.6}  {:>8.4}  {:>8.4}\n",
            fmt_epsilon(r.epsilon),
            r.laplace_scale,
            r.auc,
            r.success_rate
        ));
    }
    out
}

/// Plot-ready comma-separated rows of `epsilon,auc,sr`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("epsilon,auc,sr\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", fmt_epsilon(r.epsilon), r.auc, r.success_rate));
    }
    out
}

/// Embedding-side and policy-side ablations compared against the full system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationVariant {
    Full,
    /// Learned embeddings replaced by fresh random ones.
    RandomEmbeddings,
    /// Embeddings supplied from elsewhere and kept fixed.
    FrozenExternal,
    /// Policy reads `e_u` directly instead of the local projection.
    NoProjection,
}

impl AblationVariant {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::RandomEmbeddings => "random-embeddings",
            Self::FrozenExternal => "frozen-external",
            Self::NoProjection => "no-projection",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: AblationVariant,
    pub success_rate: f64,
    pub average_turns: f64,
    pub success_rate_per_seed: Vec<f64>,
    pub average_turns_per_seed: Vec<f64>,
}

pub fn ablation_table(rows: &[AblationRow], max_turns: usize) -> String {
    let mut out = format!("{:<18}  {:>8}  {:>8}\n", "variant", format!("SR@{max_turns}"), "AT");
    for r in rows {
        out.push_str(&format!(
            "{:<18}  {:>8.4}  {:>8.3}\n",
            r.variant.label(),
            r.success_rate,
            r.average_turns
        ));
    }
    out
}
