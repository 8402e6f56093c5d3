//! Two-layer policy over the concatenated user/conversation state, the client-local tanh
//! projection of the user embedding, and REINFORCE gradients for both.
//!
//! Action 0 is "recommend"; action `1 + p` asks attribute `p`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::gaussian_vec;

pub const RECOMMEND: usize = 0;

pub fn ask_action(attribute: usize) -> usize {
    attribute + 1
}

/// `Some(p)` when `action` asks attribute `p`.
pub fn asked_attribute(action: usize) -> Option<usize> {
    action.checked_sub(1)
}

/// Shared policy parameters θ, stored flat as `[W1 | b1 | W2 | b2]` with `W1` of shape
/// `input × hidden` and `W2` of shape `hidden × actions`, both row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub input: usize,
    pub hidden: usize,
    pub actions: usize,
    /// Apply ReLU to the output logits before the softmax.
    pub output_relu: bool,
    pub params: Vec<f64>,
}

struct Forward {
    pre_hidden: Vec<f64>,
    hidden: Vec<f64>,
    pre_logits: Vec<f64>,
    probs: Vec<f64>,
}

impl PolicyParams {
    pub fn param_count(input: usize, hidden: usize, actions: usize) -> usize {
        input * hidden + hidden + hidden * actions + actions
    }

    /// Shape for `dim`-dimensional embeddings over `num_attributes` attributes.
    pub fn zeros(dim: usize, num_attributes: usize, hidden: usize, output_relu: bool) -> Self {
        let input = dim + num_attributes;
        let actions = num_attributes + 1;
        Self {
            input,
            hidden,
            actions,
            output_relu,
            params: vec![0.0; Self::param_count(input, hidden, actions)],
        }
    }

    /// Scaled Gaussian weights; output biases start at a shared positive constant so that an
    /// output ReLU does not begin with dead logits.
    pub fn random<R: Rng + ?Sized>(
        dim: usize,
        num_attributes: usize,
        hidden: usize,
        output_relu: bool,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(dim, num_attributes, hidden, output_relu);
        let w1 = gaussian_vec(p.input * hidden, 1.0 / (p.input as f64).sqrt(), rng);
        let w2 = gaussian_vec(hidden * p.actions, 0.1 / (hidden as f64).sqrt(), rng);
        p.w1_mut().copy_from_slice(&w1);
        p.w2_mut().copy_from_slice(&w2);
        p.b2_mut().fill(0.5);
        p
    }

    pub fn from_flat(
        input: usize,
        hidden: usize,
        actions: usize,
        output_relu: bool,
        params: Vec<f64>,
    ) -> Result<Self> {
        let expected = Self::param_count(input, hidden, actions);
        if params.len() != expected {
            return Err(Error::Shape {
                expected,
                actual: params.len(),
            });
        }
        Ok(Self {
            input,
            hidden,
            actions,
            output_relu,
            params,
        })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    fn offsets(&self) -> [usize; 4] {
        let b1 = self.input * self.hidden;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.hidden * self.actions;
        [0, b1, w2, b2]
    }

    pub fn w1(&self) -> &[f64] {
        let o = self.offsets();
        &self.params[o[0]..o[1]]
    }
    pub fn b1(&self) -> &[f64] {
        let o = self.offsets();
        &self.params[o[1]..o[2]]
    }
    pub fn w2(&self) -> &[f64] {
        let o = self.offsets();
        &self.params[o[2]..o[3]]
    }
    pub fn b2(&self) -> &[f64] {
        let o = self.offsets();
        &self.params[o[3]..]
    }
    fn w1_mut(&mut self) -> &mut [f64] {
        let o = self.offsets();
        &mut self.params[o[0]..o[1]]
    }
    fn w2_mut(&mut self) -> &mut [f64] {
        let o = self.offsets();
        &mut self.params[o[2]..o[3]]
    }
    fn b2_mut(&mut self) -> &mut [f64] {
        let o = self.offsets();
        &mut self.params[o[3]..]
    }

    /// Parameter blocks as (name, range) pairs over the flat vector.
    pub fn blocks(&self) -> [(&'static str, std::ops::Range<usize>); 4] {
        let o = self.offsets();
        [
            ("W1", o[0]..o[1]),
            ("b1", o[1]..o[2]),
            ("W2", o[2]..o[3]),
            ("b2", o[3]..self.params.len()),
        ]
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.input {
            return Err(Error::Shape {
                expected: self.input,
                actual: state.len(),
            });
        }
        if let Some(i) = state.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(())
    }

    fn forward(&self, state: &[f64], mask: Option<&[bool]>) -> Forward {
        let (h, a) = (self.hidden, self.actions);
        let (w1, b1, w2, b2) = (self.w1(), self.b1(), self.w2(), self.b2());

        let mut pre_hidden = b1.to_vec();
        for (i, &s) in state.iter().enumerate() {
            if s != 0.0 {
                let row = &w1[i * h..(i + 1) * h];
                for (acc, w) in pre_hidden.iter_mut().zip(row) {
                    *acc += s * w;
                }
            }
        }
        let hidden: Vec<f64> = pre_hidden.iter().map(|&x| x.max(0.0)).collect();

        let mut pre_logits = b2.to_vec();
        for (j, &hj) in hidden.iter().enumerate() {
            if hj != 0.0 {
                let row = &w2[j * a..(j + 1) * a];
                for (acc, w) in pre_logits.iter_mut().zip(row) {
                    *acc += hj * w;
                }
            }
        }
        let logits: Vec<f64> = if self.output_relu {
            pre_logits.iter().map(|&x| x.max(0.0)).collect()
        } else {
            pre_logits.clone()
        };
        let probs = masked_softmax(&logits, mask);
        Forward {
            pre_hidden,
            hidden,
            pre_logits,
            probs,
        }
    }

    /// Output logits (after the optional output ReLU).
    pub fn logits(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check_state(state)?;
        let f = self.forward(state, None);
        Ok(if self.output_relu {
            f.pre_logits.iter().map(|&x| x.max(0.0)).collect()
        } else {
            f.pre_logits
        })
    }

    /// Softmax distribution over all actions.
    pub fn action_distribution(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.masked_distribution(state, None)
    }

    /// Softmax restricted to actions with `mask[a] == true`; masked actions get probability 0.
    pub fn masked_distribution(&self, state: &[f64], mask: Option<&[bool]>) -> Result<Vec<f64>> {
        self.check_state(state)?;
        if let Some(m) = mask {
            if m.len() != self.actions {
                return Err(Error::Shape {
                    expected: self.actions,
                    actual: m.len(),
                });
            }
        }
        Ok(self.forward(state, mask).probs)
    }

    /// Gradient of `ln π(action | state)` under the masked softmax, with respect to the flat
    /// parameters (accumulated into `grad` scaled by `weight`) and to the state (returned).
    fn accumulate_log_prob_grad(
        &self,
        state: &[f64],
        mask: Option<&[bool]>,
        action: usize,
        weight: f64,
        grad: &mut [f64],
    ) -> Vec<f64> {
        let (h, a) = (self.hidden, self.actions);
        let f = self.forward(state, mask);
        let o = self.offsets();

        let mut d_logits: Vec<f64> = f.probs.iter().map(|p| -p).collect();
        d_logits[action] += 1.0;
        if self.output_relu {
            for (d, &z) in d_logits.iter_mut().zip(&f.pre_logits) {
                if z <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        for (g, d) in grad[o[3]..].iter_mut().zip(&d_logits) {
            *g += weight * d;
        }
        let w2 = self.w2();
        let mut d_hidden = vec![0.0; h];
        for j in 0..h {
            let row = &w2[j * a..(j + 1) * a];
            let gw = &mut grad[o[2] + j * a..o[2] + (j + 1) * a];
            let hj = f.hidden[j];
            let mut acc = 0.0;
            for k in 0..a {
                gw[k] += weight * hj * d_logits[k];
                acc += row[k] * d_logits[k];
            }
            d_hidden[j] = if f.pre_hidden[j] > 0.0 { acc } else { 0.0 };
        }
        for (g, d) in grad[o[1]..o[2]].iter_mut().zip(&d_hidden) {
            *g += weight * d;
        }
        let w1 = self.w1();
        let mut d_state = vec![0.0; self.input];
        for (i, &s) in state.iter().enumerate() {
            let row = &w1[i * h..(i + 1) * h];
            let gw = &mut grad[o[0] + i * h..o[0] + (i + 1) * h];
            let mut acc = 0.0;
            for j in 0..h {
                gw[j] += weight * s * d_hidden[j];
                acc += row[j] * d_hidden[j];
            }
            d_state[i] = acc;
        }
        d_state
    }

    /// `ln π(action | state)` under the masked softmax.
    pub fn log_prob(&self, state: &[f64], mask: Option<&[bool]>, action: usize) -> Result<f64> {
        Ok(self.masked_distribution(state, mask)?[action].ln())
    }
}

fn masked_softmax(logits: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
    let allowed = |i: usize| mask.is_none_or(|m| m[i]);
    let max = logits
        .iter()
        .enumerate()
        .filter(|(i, _)| allowed(*i))
        .map(|(_, &x)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; logits.len()];
    }
    let mut out: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(i, &x)| if allowed(i) { (x - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= z);
    out
}

/// Client-local layer `s_emb = tanh(W e_u + b)` with a square weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionLayer {
    pub dim: usize,
    /// Row-major `dim × dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ProjectionLayer {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            weights: vec![0.0; dim * dim],
            bias: vec![0.0; dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut p = Self::zeros(dim);
        for i in 0..dim {
            p.weights[i * dim + i] = 1.0;
        }
        p
    }

    pub fn random<R: Rng + ?Sized>(dim: usize, std: f64, rng: &mut R) -> Self {
        Self {
            dim,
            weights: gaussian_vec(dim * dim, std, rng),
            bias: gaussian_vec(dim, std, rng),
        }
    }

    pub fn project(&self, user: &[f64]) -> Result<Vec<f64>> {
        if user.len() != self.dim {
            return Err(Error::Shape {
                expected: self.dim,
                actual: user.len(),
            });
        }
        Ok((0..self.dim)
            .map(|i| {
                let row = &self.weights[i * self.dim..(i + 1) * self.dim];
                let z: f64 = row.iter().zip(user).map(|(w, e)| w * e).sum::<f64>() + self.bias[i];
                z.tanh()
            })
            .collect())
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// How the embedding half of the state is produced.
#[derive(Debug, Clone, Copy)]
pub enum EmbeddingInput<'a> {
    Projected(&'a ProjectionLayer),
    /// Ablation: the raw user embedding enters the policy directly.
    Raw,
}

impl EmbeddingInput<'_> {
    pub fn embed(&self, user: &[f64]) -> Result<Vec<f64>> {
        match self {
            EmbeddingInput::Projected(p) => p.project(user),
            EmbeddingInput::Raw => Ok(user.to_vec()),
        }
    }
}

/// `s_u = s_emb ⊕ s_hist`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub emb: Vec<f64>,
    /// 1.0 for confirmed attributes, 0.0 otherwise.
    pub hist: Vec<f64>,
}

impl StateVector {
    pub fn new(emb: Vec<f64>, num_attributes: usize, confirmed: impl IntoIterator<Item = usize>) -> Self {
        let mut hist = vec![0.0; num_attributes];
        for p in confirmed {
            hist[p] = 1.0;
        }
        Self { emb, hist }
    }

    pub fn concat(&self) -> Vec<f64> {
        let mut s = self.emb.clone();
        s.extend_from_slice(&self.hist);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// Concatenated state the action was chosen from.
    pub state: Vec<f64>,
    /// Actions available at this step.
    pub mask: Vec<bool>,
    pub action: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut g = 0.0;
        let mut w = 1.0;
        for s in &self.steps {
            g += w * s.reward;
            w *= gamma;
        }
        g
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// Which return weights a trajectory's summed log-probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReturnWeighting {
    /// `Σ_t γ^t r_t`, consistent with the discounted objective.
    Discounted { gamma: f64 },
    /// Plain `Σ_t r_t`.
    Undiscounted,
}

impl ReturnWeighting {
    pub fn weight(&self, t: &Trajectory) -> f64 {
        match *self {
            ReturnWeighting::Discounted { gamma } => t.discounted_return(gamma),
            ReturnWeighting::Undiscounted => t.total_reward(),
        }
    }
}

/// Gradients of the REINFORCE surrogate for θ and, optionally, the projection layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGradients {
    /// Ascent direction on the objective, shaped like θ.
    pub theta: Vec<f64>,
    pub projection: Option<ProjectionLayer>,
}

/// `(1/N) Σ_i G_i Σ_t ∇ ln π(a_t | s_t)` for θ, and the same quantity for the projection layer
/// (chain rule through `tanh`) when `projection` is given together with the client's embedding.
pub fn policy_gradients(
    trajectories: &[Trajectory],
    theta: &PolicyParams,
    weighting: ReturnWeighting,
    projection: Option<(&ProjectionLayer, &[f64])>,
) -> Result<PolicyGradients> {
    if trajectories.is_empty() {
        return Err(Error::invalid("at least one trajectory is required"));
    }
    let n = trajectories.len() as f64;
    let mut grad = vec![0.0; theta.len()];
    let mut proj_grad = projection.map(|(p, _)| ProjectionLayer::zeros(p.dim));
    let emb_dim = projection.map(|(p, _)| p.dim);

    for traj in trajectories {
        let ret = weighting.weight(traj);
        if ret == 0.0 {
            continue;
        }
        let w = ret / n;
        for step in &traj.steps {
            theta.check_state(&step.state)?;
            if step.action >= theta.actions || step.mask.len() != theta.actions || !step.mask[step.action] {
                return Err(Error::InvalidAction(step.action));
            }
            let d_state =
                theta.accumulate_log_prob_grad(&step.state, Some(&step.mask), step.action, w, &mut grad);
            if let (Some(pg), Some((_, user)), Some(dim)) = (proj_grad.as_mut(), projection, emb_dim) {
                for i in 0..dim {
                    let s = step.state[i];
                    let dz = w * d_state[i] * (1.0 - s * s);
                    pg.bias[i] += dz;
                    for (g, e) in pg.weights[i * dim..(i + 1) * dim].iter_mut().zip(user) {
                        *g += dz * e;
                    }
                }
            }
        }
    }
    Ok(PolicyGradients {
        theta: grad,
        projection: proj_grad,
    })
}

/// REINFORCE ascent direction for θ.
pub fn reinforce_gradient(
    trajectories: &[Trajectory],
    theta: &PolicyParams,
    weighting: ReturnWeighting,
) -> Result<Vec<f64>> {
    Ok(policy_gradients(trajectories, theta, weighting, None)?.theta)
}

/// One local ascent step on the projection layer from on-policy trajectories.
pub fn update_projection(
    trajectories: &[Trajectory],
    theta: &PolicyParams,
    weighting: ReturnWeighting,
    projection: &ProjectionLayer,
    user: &[f64],
    learning_rate: f64,
) -> Result<ProjectionLayer> {
    let g = policy_gradients(trajectories, theta, weighting, Some((projection, user)))?;
    let g = g.projection.expect("projection gradient requested");
    let mut out = projection.clone();
    apply_projection_step(&mut out, &g, learning_rate);
    Ok(out)
}

pub(crate) fn apply_projection_step(p: &mut ProjectionLayer, g: &ProjectionLayer, lr: f64) {
    for (w, d) in p.weights.iter_mut().zip(&g.weights) {
        *w += lr * d;
    }
    for (b, d) in p.bias.iter_mut().zip(&g.bias) {
        *b += lr * d;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionMode {
    Greedy,
    Sample,
}

/// Picks an action from a distribution already restricted by `mask`. Greedy ties go to the
/// lowest index; with every action masked, recommend is forced.
pub fn select_from<R: Rng + ?Sized>(
    probs: &[f64],
    mask: &[bool],
    mode: SelectionMode,
    rng: &mut R,
) -> usize {
    let allowed: Vec<usize> = (0..probs.len()).filter(|&i| mask[i]).collect();
    match allowed.as_slice() {
        [] => return RECOMMEND,
        [only] => return *only,
        _ => {}
    }
    match mode {
        SelectionMode::Greedy => {
            let mut best = allowed[0];
            for &i in &allowed[1..] {
                if probs[i] > probs[best] {
                    best = i;
                }
            }
            best
        }
        SelectionMode::Sample => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for &i in &allowed {
                acc += probs[i];
                if u < acc {
                    return i;
                }
            }
            *allowed.last().expect("non-empty")
        }
    }
}

pub fn select_action<R: Rng + ?Sized>(
    state: &[f64],
    theta: &PolicyParams,
    mask: &[bool],
    mode: SelectionMode,
    rng: &mut R,
) -> Result<usize> {
    if !mask.iter().any(|&m| m) {
        return Ok(RECOMMEND);
    }
    let probs = theta.masked_distribution(state, Some(mask))?;
    Ok(select_from(&probs, mask, mode, rng))
}
