//! Conversation state machine and the rule-based user simulator.
//!
//! A session targets one held-out item. The simulator answers attribute questions from the
//! target's attribute set and accepts a recommendation list iff it contains the target.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Catalog;
use crate::error::{Error, Result};
use crate::fm::{score_unchecked, GlobalMatrices};
use crate::policy::{asked_attribute, select_action, PolicyParams, SelectionMode, StateVector, Step, Trajectory, RECOMMEND};
use crate::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Rewards {
    pub success: f64,
    pub ask_confirmed: f64,
    pub ask_rejected: f64,
    pub recommend_rejected: f64,
    pub quit: f64,
}

impl Default for Rewards {
    fn default() -> Self {
        Self {
            success: 1.0,
            ask_confirmed: 0.25,
            ask_rejected: 0.0,
            recommend_rejected: 0.0,
            quit: -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuestionMode {
    /// One attribute per question.
    #[default]
    Binary,
    /// A question covers the whole attribute group of the asked attribute.
    Enumerated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Items per recommendation.
    pub k: usize,
    pub max_turns: usize,
    pub rewards: Rewards,
    pub question_mode: QuestionMode,
    /// Attribute groups for the enumerated setting; attributes not listed form singleton groups.
    pub attribute_groups: Vec<Vec<usize>>,
    /// Remove candidates carrying a rejected attribute.
    pub reject_filtering: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            k: 10,
            max_turns: 15,
            rewards: Rewards::default(),
            question_mode: QuestionMode::Binary,
            attribute_groups: Vec::new(),
            reject_filtering: false,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.max_turns == 0 {
            return Err(Error::invalid("max_turns must be at least 1"));
        }
        Ok(())
    }

    fn group_of(&self, attribute: usize) -> Vec<usize> {
        if self.question_mode == QuestionMode::Enumerated {
            if let Some(g) = self.attribute_groups.iter().find(|g| g.contains(&attribute)) {
                return g.clone();
            }
        }
        vec![attribute]
    }
}

/// Read-only context an episode runs against.
#[derive(Debug, Clone, Copy)]
pub struct World<'a> {
    pub catalog: &'a Catalog,
    pub matrices: &'a GlobalMatrices,
    pub config: &'a EnvConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationState {
    pub target: usize,
    /// The target's attributes; the simulator confirms exactly these.
    pub oracle: Vec<usize>,
    /// Confirmed attributes, sorted.
    pub confirmed: Vec<usize>,
    pub rejected_attributes: Vec<usize>,
    pub rejected_items: Vec<usize>,
    /// Per attribute: already asked (or stated up front).
    pub asked: Vec<bool>,
    /// Sorted candidate items.
    pub candidates: Vec<usize>,
    pub turn: usize,
    pub max_turns: usize,
    pub done: bool,
    pub success: bool,
}

impl ConversationState {
    /// Recommend is always available; attribute questions only while unasked.
    pub fn action_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.asked.len() + 1);
        mask.push(true);
        mask.extend(self.asked.iter().map(|a| !a));
        mask
    }

    pub fn contains_candidate(&self, item: usize) -> bool {
        self.candidates.binary_search(&item).is_ok()
    }

    pub fn state_vector(&self, emb: Vec<f64>) -> StateVector {
        StateVector::new(emb, self.asked.len(), self.confirmed.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Response {
    Confirm,
    Reject,
    AcceptRecommendation,
    RejectRecommendation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnOutcome {
    pub turn: usize,
    pub action: usize,
    pub response: Response,
    pub reward: f64,
    pub done: bool,
    /// Items shown for a recommend action.
    pub recommended: Vec<usize>,
}

/// Opens a session for `target`. One attribute of the target is stated up front; candidates are
/// the items carrying it, minus the user's `known` items other than the target itself.
pub fn start_episode<R: Rng + ?Sized>(
    catalog: &Catalog,
    known: &[usize],
    target: usize,
    max_turns: usize,
    rng: &mut R,
) -> Result<ConversationState> {
    if target >= catalog.num_items {
        return Err(Error::Index {
            what: "item",
            index: target,
            limit: catalog.num_items,
        });
    }
    let oracle = catalog.attributes(target).to_vec();
    if oracle.is_empty() {
        return Err(Error::Integrity(format!("item {target} has no attributes")));
    }
    let initial = oracle[rng.gen_range(0..oracle.len())];
    let candidates: Vec<usize> = (0..catalog.num_items)
        .filter(|&v| catalog.has_attribute(v, initial))
        .filter(|&v| v == target || known.binary_search(&v).is_err())
        .collect();
    let mut asked = vec![false; catalog.num_attributes];
    asked[initial] = true;
    Ok(ConversationState {
        target,
        oracle,
        confirmed: vec![initial],
        rejected_attributes: Vec::new(),
        rejected_items: Vec::new(),
        asked,
        candidates,
        turn: 0,
        max_turns,
        done: false,
        success: false,
    })
}

/// Candidates by descending score (ties to the lower id), truncated to `k`.
pub fn rank_candidates(
    state: &ConversationState,
    user: &[f64],
    matrices: &GlobalMatrices,
    k: usize,
) -> Result<Vec<usize>> {
    if state.candidates.is_empty() {
        return Err(Error::invalid("empty candidate set"));
    }
    if user.len() != matrices.dim() {
        return Err(Error::Shape {
            expected: matrices.dim(),
            actual: user.len(),
        });
    }
    let mut scored: Vec<(f64, usize)> = state
        .candidates
        .iter()
        .map(|&v| (score_unchecked(user, v, &state.confirmed, matrices), v))
        .collect();
    let k = k.min(scored.len());
    let cmp = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, cmp);
        scored.truncate(k);
    }
    scored.sort_unstable_by(cmp);
    Ok(scored.into_iter().map(|(_, v)| v).collect())
}

pub fn step(
    state: &mut ConversationState,
    action: usize,
    user: &[f64],
    world: &World<'_>,
) -> Result<TurnOutcome> {
    if state.done {
        return Err(Error::EpisodeFinished);
    }
    let rewards = &world.config.rewards;
    state.turn += 1;
    let (response, mut reward, recommended) = match asked_attribute(action) {
        Some(p) => {
            if p >= state.asked.len() || state.asked[p] {
                state.turn -= 1;
                return Err(Error::InvalidAction(action));
            }
            let mut any_confirmed = false;
            for q in world.config.group_of(p) {
                if q >= state.asked.len() || state.asked[q] {
                    continue;
                }
                state.asked[q] = true;
                if state.oracle.binary_search(&q).is_ok() {
                    any_confirmed = true;
                    let at = state.confirmed.binary_search(&q).unwrap_err();
                    state.confirmed.insert(at, q);
                    let catalog = world.catalog;
                    state.candidates.retain(|&v| catalog.has_attribute(v, q));
                } else {
                    state.rejected_attributes.push(q);
                    if world.config.reject_filtering {
                        let catalog = world.catalog;
                        state.candidates.retain(|&v| !catalog.has_attribute(v, q));
                    }
                }
            }
            if any_confirmed {
                (Response::Confirm, rewards.ask_confirmed, Vec::new())
            } else {
                (Response::Reject, rewards.ask_rejected, Vec::new())
            }
        }
        None => {
            if state.candidates.is_empty() {
                state.done = true;
                return Ok(TurnOutcome {
                    turn: state.turn,
                    action,
                    response: Response::RejectRecommendation,
                    reward: rewards.quit,
                    done: true,
                    recommended: Vec::new(),
                });
            }
            let list = rank_candidates(state, user, world.matrices, world.config.k)?;
            if list.contains(&state.target) {
                state.done = true;
                state.success = true;
                (Response::AcceptRecommendation, rewards.success, list)
            } else {
                state.candidates.retain(|v| !list.contains(v));
                state.rejected_items.extend_from_slice(&list);
                (Response::RejectRecommendation, rewards.recommend_rejected, list)
            }
        }
    };
    if !state.done && state.turn >= state.max_turns {
        state.done = true;
        reward = rewards.quit;
    }
    Ok(TurnOutcome {
        turn: state.turn,
        action,
        response,
        reward,
        done: state.done,
        recommended,
    })
}

/// What an agent sees when choosing an action.
pub struct AgentView<'a> {
    pub state: &'a ConversationState,
    pub mask: &'a [bool],
    pub catalog: &'a Catalog,
}

/// An action plus, for learnable policies, the state vector it was chosen from.
pub struct Decision {
    pub action: usize,
    pub state: Option<Vec<f64>>,
}

pub trait Agent {
    fn act(&self, view: &AgentView<'_>, rng: &mut SimRng) -> Result<Decision>;
}

/// The shared policy driven by a fixed embedding-half of the state.
pub struct PolicyAgent<'a> {
    pub theta: &'a PolicyParams,
    /// `s_emb` for this client (projected or raw).
    pub emb: Vec<f64>,
    pub mode: SelectionMode,
}

impl Agent for PolicyAgent<'_> {
    fn act(&self, view: &AgentView<'_>, rng: &mut SimRng) -> Result<Decision> {
        let s = view.state.state_vector(self.emb.clone()).concat();
        let action = select_action(&s, self.theta, view.mask, self.mode, rng)?;
        Ok(Decision {
            action,
            state: Some(s),
        })
    }
}

/// Uniform over the available actions.
pub struct RandomAgent;

impl Agent for RandomAgent {
    fn act(&self, view: &AgentView<'_>, rng: &mut SimRng) -> Result<Decision> {
        let allowed: Vec<usize> = (0..view.mask.len()).filter(|&i| view.mask[i]).collect();
        let action = if allowed.is_empty() {
            RECOMMEND
        } else {
            allowed[rng.gen_range(0..allowed.len())]
        };
        Ok(Decision { action, state: None })
    }
}

/// Always asks the unasked attribute whose presence splits the candidates most evenly;
/// recommends only once nothing is left to ask.
pub struct MaxEntropyAgent;

fn binary_entropy(f: f64) -> f64 {
    if f <= 0.0 || f >= 1.0 {
        0.0
    } else {
        -(f * f.ln() + (1.0 - f) * (1.0 - f).ln())
    }
}

impl Agent for MaxEntropyAgent {
    fn act(&self, view: &AgentView<'_>, _rng: &mut SimRng) -> Result<Decision> {
        let n = view.state.candidates.len().max(1) as f64;
        let mut best: Option<(f64, usize)> = None;
        for a in 1..view.mask.len() {
            if !view.mask[a] {
                continue;
            }
            let p = a - 1;
            let with = view
                .state
                .candidates
                .iter()
                .filter(|&&v| view.catalog.has_attribute(v, p))
                .count();
            let h = binary_entropy(with as f64 / n);
            if best.is_none_or(|(bh, _)| h > bh) {
                best = Some((h, a));
            }
        }
        Ok(Decision {
            action: best.map_or(RECOMMEND, |(_, a)| a),
            state: None,
        })
    }
}

/// Recommends every turn.
pub struct AlwaysRecommendAgent;

impl Agent for AlwaysRecommendAgent {
    fn act(&self, _view: &AgentView<'_>, _rng: &mut SimRng) -> Result<Decision> {
        Ok(Decision {
            action: RECOMMEND,
            state: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub trajectory: Trajectory,
    pub success: bool,
    pub turns: usize,
    pub transcript: Vec<TurnOutcome>,
}

/// Runs one session to completion. `user` is the client's FM embedding used for ranking.
pub fn run_episode(
    agent: &dyn Agent,
    world: &World<'_>,
    user: &[f64],
    known: &[usize],
    target: usize,
    rng: &mut SimRng,
) -> Result<EpisodeOutcome> {
    let mut state = start_episode(world.catalog, known, target, world.config.max_turns, rng)?;
    let mut trajectory = Trajectory::default();
    let mut transcript = Vec::new();
    while !state.done {
        let mask = state.action_mask();
        let decision = agent.act(
            &AgentView {
                state: &state,
                mask: &mask,
                catalog: world.catalog,
            },
            rng,
        )?;
        let outcome = step(&mut state, decision.action, user, world)?;
        if let Some(s) = decision.state {
            trajectory.steps.push(Step {
                state: s,
                mask,
                action: decision.action,
                reward: outcome.reward,
            });
        }
        transcript.push(outcome);
    }
    Ok(EpisodeOutcome {
        trajectory,
        success: state.success,
        turns: state.turn,
        transcript,
    })
}

pub fn action_label(action: usize) -> String {
    match asked_attribute(action) {
        None => "recommend".to_string(),
        Some(p) => format!("ask:{p}"),
    }
}

/// One line per turn: `turn<TAB>action<TAB>response<TAB>reward`.
pub fn format_transcript(turns: &[TurnOutcome]) -> String {
    let mut out = String::new();
    for t in turns {
        let response = match t.response {
            Response::Confirm => "confirm",
            Response::Reject => "reject",
            Response::AcceptRecommendation => "accept",
            Response::RejectRecommendation => "reject-recommendation",
        };
        let _ = writeln!(out, "{}\t{}\t{}\t{}", t.turn, action_label(t.action), response, t.reward);
    }
    out
}
