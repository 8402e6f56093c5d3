//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use crs_sim::corpus::Catalog;
use crs_sim::fm::{GlobalMatrices, InstanceSource, PairwiseInstance};
use crs_sim::linalg::Matrix;
use crs_sim::policy::{PolicyParams, ProjectionLayer, Step, Trajectory};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn normal(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    // Box-Muller, kept separate from the library sampler.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    (0..n).map(|_| normal(rng, std)).collect()
}

/// Relative L2 error of one block, `‖a − n‖ / max(‖a‖, ‖n‖)`; blocks that vanish in both are 0.
pub fn block_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale = l2(analytic).max(l2(numeric));
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Central differences of `f` around `x`, one coordinate at a time.
pub fn central_differences(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

// ---------------------------------------------------------------------------------------------
// Factorization machine

pub struct FmProblem {
    pub dim: usize,
    pub num_items: usize,
    pub num_attributes: usize,
    pub user: Vec<f64>,
    pub items: Vec<f64>,
    pub attributes: Vec<f64>,
    pub general: Vec<PairwiseInstance>,
    pub matched: Vec<PairwiseInstance>,
    pub reg: f64,
}

impl FmProblem {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let dim = rng.gen_range(1..=8);
        let num_items = rng.gen_range(2..=9);
        let num_attributes = rng.gen_range(1..=5);
        let mut instances = |source| -> Vec<PairwiseInstance> {
            (0..rng.gen_range(0..=5))
                .map(|_| {
                    let positive = rng.gen_range(0..num_items);
                    let mut negative = rng.gen_range(0..num_items - 1);
                    if negative >= positive {
                        negative += 1;
                    }
                    let mut stated: Vec<usize> =
                        (0..num_attributes).filter(|_| rng.gen_bool(0.4)).collect();
                    stated.sort_unstable();
                    PairwiseInstance {
                        positive,
                        negative,
                        stated,
                        source,
                    }
                })
                .collect()
        };
        let mut general = instances(InstanceSource::General);
        let matched = instances(InstanceSource::AttributeMatched);
        if general.is_empty() && matched.is_empty() {
            general.push(PairwiseInstance {
                positive: 0,
                negative: 1,
                stated: vec![],
                source: InstanceSource::General,
            });
        }
        let reg = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(1e-3..0.1) };
        Self {
            dim,
            num_items,
            num_attributes,
            user: normals(rng, dim, 0.7),
            items: normals(rng, num_items * dim, 0.7),
            attributes: normals(rng, num_attributes * dim, 0.7),
            general,
            matched,
            reg,
        }
    }

    pub fn matrices(&self) -> GlobalMatrices {
        GlobalMatrices::new(
            Matrix::from_vec(self.num_items, self.dim, self.items.clone()).unwrap(),
            Matrix::from_vec(self.num_attributes, self.dim, self.attributes.clone()).unwrap(),
        )
        .unwrap()
    }

    /// Loss written out term by term: `Σ −ln σ(y⁺ − y⁻) + reg · ‖touched‖²`.
    pub fn loss(&self, user: &[f64], items: &[f64], attributes: &[f64]) -> f64 {
        let d = self.dim;
        let item = |v: usize| &items[v * d..(v + 1) * d];
        let attr = |p: usize| &attributes[p * d..(p + 1) * d];
        let dotp = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let y = |v: usize, stated: &[usize]| {
            dotp(user, item(v)) + stated.iter().map(|&p| dotp(item(v), attr(p))).sum::<f64>()
        };
        let mut loss = 0.0;
        let mut touched_items = vec![false; self.num_items];
        let mut touched_attrs = vec![false; self.num_attributes];
        for inst in self.general.iter().chain(&self.matched) {
            let diff = y(inst.positive, &inst.stated) - y(inst.negative, &inst.stated);
            loss += (1.0 + (-diff).exp()).ln();
            touched_items[inst.positive] = true;
            touched_items[inst.negative] = true;
            for &p in &inst.stated {
                touched_attrs[p] = true;
            }
        }
        let mut sq = dotp(user, user);
        for v in 0..self.num_items {
            if touched_items[v] {
                sq += dotp(item(v), item(v));
            }
        }
        for p in 0..self.num_attributes {
            if touched_attrs[p] {
                sq += dotp(attr(p), attr(p));
            }
        }
        loss + self.reg * sq
    }

    /// Numerical gradients of [`Self::loss`] for (user, items, attributes).
    pub fn numeric_gradients(&self, h: f64) -> [Vec<f64>; 3] {
        let gu = central_differences(&self.user, h, |u| self.loss(u, &self.items, &self.attributes));
        let gv = central_differences(&self.items, h, |v| self.loss(&self.user, v, &self.attributes));
        let gp = central_differences(&self.attributes, h, |p| self.loss(&self.user, &self.items, p));
        [gu, gv, gp]
    }
}

// ---------------------------------------------------------------------------------------------
// Policy network

/// Masked log-softmax of the two-layer policy, written independently of the library.
pub fn oracle_log_prob(theta: &PolicyParams, state: &[f64], mask: &[bool], action: usize) -> f64 {
    let (i_n, h_n, a_n) = (theta.input, theta.hidden, theta.actions);
    let p = &theta.params;
    let w1 = |i: usize, j: usize| p[i * h_n + j];
    let b1 = |j: usize| p[i_n * h_n + j];
    let w2 = |j: usize, k: usize| p[i_n * h_n + h_n + j * a_n + k];
    let b2 = |k: usize| p[i_n * h_n + h_n + h_n * a_n + k];
    let hidden: Vec<f64> = (0..h_n)
        .map(|j| (b1(j) + (0..i_n).map(|i| state[i] * w1(i, j)).sum::<f64>()).max(0.0))
        .collect();
    let logits: Vec<f64> = (0..a_n)
        .map(|k| {
            let z = b2(k) + (0..h_n).map(|j| hidden[j] * w2(j, k)).sum::<f64>();
            if theta.output_relu {
                z.max(0.0)
            } else {
                z
            }
        })
        .collect();
    let lse = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(z, _)| z.exp())
        .sum::<f64>()
        .ln();
    logits[action] - lse
}

/// Smallest |pre-activation| over every unit the state passes through; finite differences are
/// only meaningful away from ReLU kinks.
pub fn kink_margin(theta: &PolicyParams, state: &[f64]) -> f64 {
    let (i_n, h_n, a_n) = (theta.input, theta.hidden, theta.actions);
    let p = &theta.params;
    let mut margin = f64::INFINITY;
    let mut hidden = vec![0.0; h_n];
    for j in 0..h_n {
        let z = p[i_n * h_n + j] + (0..i_n).map(|i| state[i] * p[i * h_n + j]).sum::<f64>();
        margin = margin.min(z.abs());
        hidden[j] = z.max(0.0);
    }
    if theta.output_relu {
        for k in 0..a_n {
            let z = p[i_n * h_n + h_n + h_n * a_n + k]
                + (0..h_n).map(|j| hidden[j] * p[i_n * h_n + h_n + j * a_n + k]).sum::<f64>();
            margin = margin.min(z.abs());
        }
    }
    margin
}

pub fn oracle_project(proj: &ProjectionLayer, user: &[f64]) -> Vec<f64> {
    let d = proj.dim;
    (0..d)
        .map(|i| ((0..d).map(|j| proj.weights[i * d + j] * user[j]).sum::<f64>() + proj.bias[i]).tanh())
        .collect()
}

/// Trajectories whose states are `project(user) ⊕ hist`, with hand-picked rewards.
pub struct PolicyProblem {
    pub theta: PolicyParams,
    pub projection: ProjectionLayer,
    pub user: Vec<f64>,
    /// Per trajectory: (hist vector, mask, action, reward) for each step.
    pub episodes: Vec<Vec<(Vec<f64>, Vec<bool>, usize, f64)>>,
    pub gamma: f64,
}

impl PolicyProblem {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let dim = rng.gen_range(1..=5);
        let num_attributes = rng.gen_range(1..=4);
        let hidden = rng.gen_range(2..=7);
        let output_relu = rng.gen_bool(0.5);
        let input = dim + num_attributes;
        let actions = num_attributes + 1;
        let mut params = normals(rng, PolicyParams::param_count(input, hidden, actions), 0.8);
        if output_relu {
            // Keep most logits on the active side of the output ReLU.
            let n = params.len();
            for b in &mut params[n - actions..] {
                *b = 1.0 + b.abs();
            }
        }
        let theta = PolicyParams::from_flat(input, hidden, actions, output_relu, params).unwrap();
        let projection = ProjectionLayer {
            dim,
            weights: normals(rng, dim * dim, 0.6),
            bias: normals(rng, dim, 0.3),
        };
        let user = normals(rng, dim, 0.8);
        let episodes = (0..rng.gen_range(1..=4))
            .map(|_| {
                (0..rng.gen_range(1..=4))
                    .map(|_| {
                        let hist: Vec<f64> =
                            (0..num_attributes).map(|_| if rng.gen_bool(0.4) { 1.0 } else { 0.0 }).collect();
                        let mut mask: Vec<bool> = (0..actions).map(|_| rng.gen_bool(0.7)).collect();
                        mask[0] = true;
                        let allowed: Vec<usize> = (0..actions).filter(|&a| mask[a]).collect();
                        let action = allowed[rng.gen_range(0..allowed.len())];
                        let reward = [1.0, 0.25, 0.0, -1.0][rng.gen_range(0..4)];
                        (hist, mask, action, reward)
                    })
                    .collect()
            })
            .collect();
        Self {
            theta,
            projection,
            user,
            episodes,
            gamma: rng.gen_range(0.5..1.0),
        }
    }

    pub fn trajectories(&self, projection: &ProjectionLayer) -> Vec<Trajectory> {
        let emb = oracle_project(projection, &self.user);
        self.episodes
            .iter()
            .map(|steps| Trajectory {
                steps: steps
                    .iter()
                    .map(|(hist, mask, action, reward)| {
                        let mut state = emb.clone();
                        state.extend_from_slice(hist);
                        Step {
                            state,
                            mask: mask.clone(),
                            action: *action,
                            reward: *reward,
                        }
                    })
                    .collect(),
            })
            .collect()
    }

    /// REINFORCE surrogate `(1/N) Σ_i G_i Σ_t ln π(a_t | s_t)` with returns held fixed.
    pub fn surrogate(&self, theta: &PolicyParams, projection: &ProjectionLayer) -> f64 {
        let trajs = self.trajectories(projection);
        let n = trajs.len() as f64;
        trajs
            .iter()
            .map(|t| {
                let mut g = 0.0;
                let mut w = 1.0;
                for s in &t.steps {
                    g += w * s.reward;
                    w *= self.gamma;
                }
                g * t
                    .steps
                    .iter()
                    .map(|s| oracle_log_prob(theta, &s.state, &s.mask, s.action))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / n
    }

    pub fn min_kink_margin(&self) -> f64 {
        self.trajectories(&self.projection)
            .iter()
            .flat_map(|t| t.steps.iter().map(|s| kink_margin(&self.theta, &s.state)))
            .fold(f64::INFINITY, f64::min)
    }
}

// ---------------------------------------------------------------------------------------------
// Catalogs

/// Small random catalog where every item carries at least one attribute.
pub fn random_catalog(rng: &mut ChaCha8Rng, num_items: usize, num_attributes: usize, p: f64) -> Catalog {
    let attrs = (0..num_items)
        .map(|_| {
            let mut a: Vec<usize> = (0..num_attributes).filter(|_| rng.gen_bool(p)).collect();
            if a.is_empty() {
                a.push(rng.gen_range(0..num_attributes));
            }
            a
        })
        .collect();
    Catalog::new(1, num_attributes, attrs).unwrap()
}

// ---------------------------------------------------------------------------------------------
// Finite-difference sweeps

/// Worst block-relative error for (user, items, attributes) over `configs` random problems.
pub fn fm_gradient_sweep(configs: usize, seed: u64) -> [f64; 3] {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 3];
    for _ in 0..configs {
        let prob = FmProblem::random(&mut rng);
        let m = prob.matrices();
        let g = crs_sim::fm::fm_gradients(&prob.general, &prob.matched, &prob.user, &m, prob.reg).unwrap();
        let analytic = [
            g.user.clone(),
            g.items.to_dense(prob.num_items, prob.dim).into_vec(),
            g.attributes.to_dense(prob.num_attributes, prob.dim).into_vec(),
        ];
        let numeric = prob.numeric_gradients(1e-6);
        for b in 0..3 {
            worst[b] = worst[b].max(block_rel_error(&analytic[b], &numeric[b]));
        }
    }
    worst
}

/// Worst block-relative error for (W1, b1, W2, b2, projection W, projection b) over `configs`
/// random problems that keep every unit at least 1e-3 away from a ReLU kink.
pub fn policy_gradient_sweep(configs: usize, seed: u64) -> [f64; 6] {
    use crs_sim::policy::{policy_gradients, ReturnWeighting};
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 6];
    let mut done = 0;
    while done < configs {
        let prob = PolicyProblem::random(&mut rng);
        if prob.min_kink_margin() < 1e-3 {
            continue;
        }
        done += 1;
        let trajs = prob.trajectories(&prob.projection);
        let g = policy_gradients(
            &trajs,
            &prob.theta,
            ReturnWeighting::Discounted { gamma: prob.gamma },
            Some((&prob.projection, &prob.user)),
        )
        .unwrap();
        let h = 1e-6;
        let num_theta = central_differences(&prob.theta.params, h, |p| {
            let mut t = prob.theta.clone();
            t.params.copy_from_slice(p);
            prob.surrogate(&t, &prob.projection)
        });
        for (b, (_, range)) in prob.theta.blocks().into_iter().enumerate() {
            worst[b] = worst[b].max(block_rel_error(&g.theta[range.clone()], &num_theta[range]));
        }
        let pg = g.projection.unwrap();
        let num_w = central_differences(&prob.projection.weights, h, |w| {
            let mut pr = prob.projection.clone();
            pr.weights.copy_from_slice(w);
            prob.surrogate(&prob.theta, &pr)
        });
        let num_b = central_differences(&prob.projection.bias, h, |b| {
            let mut pr = prob.projection.clone();
            pr.bias.copy_from_slice(b);
            prob.surrogate(&prob.theta, &pr)
        });
        worst[4] = worst[4].max(block_rel_error(&pg.weights, &num_w));
        worst[5] = worst[5].max(block_rel_error(&pg.bias, &num_b));
    }
    worst
}

// ---------------------------------------------------------------------------------------------
// Centralized reference for the one-client, noiseless federated run

/// Runs `epochs` federated stage-one epochs with a single client and no noise, alongside plain
/// gradient descent on the same sampled instances (clipping replicated as a clamp), and returns
/// the largest absolute difference over every entry of both tables and the user embedding.
pub fn centralized_gap(clip_scale: f64, epochs: usize) -> f64 {
    use crs_sim::corpus::{generate_synthetic, SyntheticConfig};
    use crs_sim::federated::{run_stage1_epoch, Client, StageOneSettings};
    use crs_sim::fm::{sample_instances, StatedAttributes};
    use crs_sim::ldp::PrivacyParams;
    use crs_sim::linalg::gaussian_vec;
    use crs_sim::{derive_seed, SimRng};
    use rand::SeedableRng;

    let world = generate_synthetic(&SyntheticConfig {
        seed: 4,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let catalog = &world.split.catalog;
    let history = world.split.train_by_user()[0].clone();
    let (dim, std, seed) = (16, 0.1, 99);
    let settings = StageOneSettings {
        lr_user: 0.01,
        lr_items: 1.5,
        lr_attributes: 2.0,
        reg: 1e-3,
        negatives_per_positive: 1,
        privacy: PrivacyParams::new(clip_scale, 0.0).unwrap(),
    };

    let mut rng = SimRng::seed_from_u64(7);
    let mut m = GlobalMatrices::random(catalog.num_items, catalog.num_attributes, dim, std, &mut rng);
    let mut clients = vec![Client::new(0, history.clone(), dim, std, seed)];

    // Oracle state: its own copy of everything plus a twin of the client's random stream.
    let mut items = m.items.as_slice().to_vec();
    let mut attrs = m.attributes.as_slice().to_vec();
    let mut orng = SimRng::seed_from_u64(derive_seed(seed, 0));
    let mut user = gaussian_vec(dim, std, &mut orng);
    assert_eq!(user, clients[0].embedding());

    for epoch in 1..=epochs {
        run_stage1_epoch(&mut clients, &[0], &mut m, catalog, &settings, epoch, None).unwrap();

        let (general, matched) = sample_instances(&history, catalog, StatedAttributes::PositiveItem, 1, &mut orng);
        let mut gu = vec![0.0; dim];
        let mut gv = vec![0.0; items.len()];
        let mut gp = vec![0.0; attrs.len()];
        let mut touched_v = vec![false; catalog.num_items];
        let mut touched_p = vec![false; catalog.num_attributes];
        for inst in general.iter().chain(&matched) {
            let (pos, neg) = (inst.positive, inst.negative);
            let mut q = user.clone();
            for &p in &inst.stated {
                for k in 0..dim {
                    q[k] += attrs[p * dim + k];
                }
            }
            let d: f64 = (0..dim).map(|k| q[k] * (items[pos * dim + k] - items[neg * dim + k])).sum();
            let g = -1.0 / (1.0 + d.exp());
            for k in 0..dim {
                let diff = items[pos * dim + k] - items[neg * dim + k];
                gu[k] += g * diff;
                gv[pos * dim + k] += g * q[k];
                gv[neg * dim + k] -= g * q[k];
                for &p in &inst.stated {
                    gp[p * dim + k] += g * diff;
                }
            }
            touched_v[pos] = true;
            touched_v[neg] = true;
            for &p in &inst.stated {
                touched_p[p] = true;
            }
        }
        for k in 0..dim {
            gu[k] += 2.0 * settings.reg * user[k];
        }
        for v in 0..catalog.num_items {
            if touched_v[v] {
                for k in 0..dim {
                    gv[v * dim + k] += 2.0 * settings.reg * items[v * dim + k];
                }
            }
        }
        for p in 0..catalog.num_attributes {
            if touched_p[p] {
                for k in 0..dim {
                    gp[p * dim + k] += 2.0 * settings.reg * attrs[p * dim + k];
                }
            }
        }
        for k in 0..dim {
            user[k] -= settings.lr_user * gu[k];
        }
        for (w, g) in items.iter_mut().zip(&gv) {
            *w -= settings.lr_items * g.clamp(-clip_scale, clip_scale);
        }
        for (w, g) in attrs.iter_mut().zip(&gp) {
            *w -= settings.lr_attributes * g.clamp(-clip_scale, clip_scale);
        }
    }

    let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    gap(m.items.as_slice(), &items)
        .max(gap(m.attributes.as_slice(), &attrs))
        .max(gap(clients[0].embedding(), &user))
}

/// A quick end-to-end configuration: small world, few epochs.
pub fn small_config() -> crs_sim::config::RunConfig {
    let mut c = crs_sim::config::RunConfig::default();
    c.seed = 3;
    c.data.synthetic.num_users = 12;
    c.data.synthetic.num_items = 40;
    c.data.synthetic.num_attributes = 6;
    c.data.synthetic.clusters = 3;
    c.data.synthetic.interactions_per_user = 10;
    c.data.synthetic.seed = 3;
    c.model.dim = 8;
    c.model.hidden = 16;
    c.stage1.max_epochs = 12;
    c.stage1.eval_every = 4;
    c.stage2.epochs = 4;
    c.stage2.episodes_per_client = 3;
    c.privacy.clip_scale = 0.1;
    c.privacy.laplace_scale = 0.4;
    c.env.k = 2;
    c
}

// ---------------------------------------------------------------------------------------------
// Dialog

pub fn random_world(rng: &mut ChaCha8Rng) -> (Catalog, GlobalMatrices) {
    let items = rng.gen_range(5..40);
    let attrs = rng.gen_range(2..8);
    let catalog = random_catalog(rng, items, attrs, 0.35);
    let m = GlobalMatrices::random(items, attrs, 4, 1.0, rng);
    (catalog, m)
}

/// Drives `n` sessions with uniformly random actions on random worlds and panics on the first
/// broken invariant. Returns (success, turns) per session.
pub fn episode_invariant_suite(n: usize, seed: u64) -> Vec<(bool, usize)> {
    use crs_sim::dialog::{start_episode, step, EnvConfig, Response, World};
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcomes = Vec::with_capacity(n);
    for _ in 0..n {
        let (catalog, m) = random_world(&mut rng);
        let env = EnvConfig {
            k: rng.gen_range(1..4),
            max_turns: rng.gen_range(1..16),
            reject_filtering: rng.gen_bool(0.3),
            ..EnvConfig::default()
        };
        let world = World {
            catalog: &catalog,
            matrices: &m,
            config: &env,
        };
        let target = rng.gen_range(0..catalog.num_items);
        let mut known: Vec<usize> = (0..catalog.num_items).filter(|_| rng.gen_bool(0.3)).collect();
        known.sort_unstable();
        let user = normals(&mut rng, 4, 1.0);

        let mut state = start_episode(&catalog, &known, target, env.max_turns, &mut rng).unwrap();
        assert!(state.contains_candidate(target));
        assert!(state.candidates.iter().all(|&v| v == target || known.binary_search(&v).is_err()));
        let mut turns = 0;
        let mut last = None;
        while !state.done {
            let mask = state.action_mask();
            let allowed: Vec<usize> = (0..mask.len()).filter(|&a| mask[a]).collect();
            let action = allowed[rng.gen_range(0..allowed.len())];
            let before = state.candidates.clone();
            let out = step(&mut state, action, &user, &world).unwrap();
            turns += 1;
            assert_eq!(out.turn, turns);
            assert!(state.candidates.iter().all(|v| before.binary_search(v).is_ok()), "candidates grew");
            assert!(state.confirmed.iter().all(|p| state.oracle.contains(p)));
            assert!(state.candidates.iter().all(|&v| catalog.has_all(v, &state.confirmed)));
            if !state.success {
                assert!(state.contains_candidate(target), "target dropped");
            }
            if !out.done {
                let expect = match out.response {
                    Response::Confirm => 0.25,
                    _ => 0.0,
                };
                assert_eq!(out.reward, expect);
            }
            last = Some(out);
        }
        let last = last.unwrap();
        assert!(turns <= env.max_turns);
        assert_eq!(state.success, last.response == Response::AcceptRecommendation);
        assert_eq!(last.reward, if state.success { 1.0 } else { -1.0 });
        if !state.success {
            assert_eq!(turns, env.max_turns);
        }
        assert!(step(&mut state, 0, &user, &world).is_err());
        outcomes.push((state.success, turns));
    }
    outcomes
}

