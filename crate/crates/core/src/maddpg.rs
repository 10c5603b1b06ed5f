//! Centralized-critic multi-agent training: a shared prioritized replay of
//! joint transitions, one critic per agent over the spliced observations and
//! actions of all agents, and actors updated by backpropagating the critic
//! through the reverse denoising chain (or a plain feedforward net for the
//! Gaussian baseline). Target copies of every net trail by soft updates.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::diffusion::{
    chain_backward, draw_noised, denoising_loss_grads_on, make_schedule,
    reverse_sample_with_noises, EpsilonNet, NoiseSchedule, Noises, DEFAULT_BETA_END,
    DEFAULT_BETA_START,
};
use crate::env::{
    act_len, obs_len, run_episode, AssignMode, EnvError, EnvParams, EpisodeMetrics,
    GreedyLocalPolicy, Observation, RandomPolicy, SlotPolicy, World,
};
use crate::neural::{adam_step, AdamState, Gradients, Mlp, NeuralError};
use crate::rng::{child_seed, stream, tag};
use crate::scenario::Scenario;

/// Additive floor keeping every stored sample reachable.
pub const PRIORITY_EPS: f64 = 1e-3;
/// Importance-sampling exponent anneal range.
pub const BETA_IS_START: f64 = 0.4;
pub const BETA_IS_END: f64 = 1.0;
/// Batch sizes commonly exercised in sweeps besides the default.
pub const BATCH_PRESETS: [usize; 2] = [512, 300];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TrainError {
    #[error("replay memory is empty")]
    EmptyReplay,
    #[error("batch {batch} exceeds stored samples {len}")]
    BatchTooLarge { batch: usize, len: usize },
    #[error("bad trainer config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// One world step as the learners see it: per-agent observations and raw
/// actions side by side, each agent's own reward, and the round-done flag.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSample {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<Vec<f64>>,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Minibatch {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub samples: Vec<JointSample>,
}

/// Ring-buffer replay with a sum-tree over per-entry priorities; sampling
/// is proportional, weights follow (N·p)^(-beta).
pub struct Replay {
    capacity: usize,
    tree: Vec<f64>,
    data: Vec<Option<JointSample>>,
    write: usize,
    len: usize,
    max_priority: f64,
}

impl Replay {
    pub fn new(capacity: usize) -> Replay {
        assert!(capacity >= 1, "replay capacity must be positive");
        Replay {
            capacity,
            tree: vec![0.0; 2 * capacity],
            data: vec![None; capacity],
            write: 0,
            len: 0,
            max_priority: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn total_priority(&self) -> f64 {
        self.tree[1]
    }

    pub fn priority(&self, idx: usize) -> f64 {
        self.tree[self.capacity + idx]
    }

    /// Insert at the ring head with the running max priority, evicting the
    /// oldest entry once full.
    pub fn push(&mut self, sample: JointSample) {
        let idx = self.write;
        self.data[idx] = Some(sample);
        self.set_priority(idx, self.max_priority);
        self.write = (self.write + 1) % self.capacity;
        if self.len < self.capacity {
            self.len += 1;
        }
    }

    pub fn set_priority(&mut self, idx: usize, priority: f64) {
        assert!(priority.is_finite() && priority >= 0.0, "bad priority {priority}");
        if priority > self.max_priority {
            self.max_priority = priority;
        }
        let mut node = self.capacity + idx;
        let delta = priority - self.tree[node];
        self.tree[node] = priority;
        while node > 1 {
            node /= 2;
            self.tree[node] += delta;
        }
    }

    fn find(&self, mut mass: f64) -> usize {
        let mut node = 1;
        while node < self.capacity {
            let left = 2 * node;
            if mass < self.tree[left] {
                node = left;
            } else {
                mass -= self.tree[left];
                node = left + 1;
            }
        }
        node - self.capacity
    }

    /// Proportional draw of `batch` samples (with replacement) and their
    /// importance weights under the given anneal exponent.
    pub fn sample(
        &self,
        batch: usize,
        beta_is: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Minibatch, TrainError> {
        if self.len == 0 {
            return Err(TrainError::EmptyReplay);
        }
        if batch > self.len {
            return Err(TrainError::BatchTooLarge { batch, len: self.len });
        }
        let total = self.total_priority();
        let n = self.len as f64;
        let mut indices = Vec::with_capacity(batch);
        let mut weights = Vec::with_capacity(batch);
        let mut samples = Vec::with_capacity(batch);
        for _ in 0..batch {
            let idx = self.find(rng.gen_range(0.0..total));
            let p = self.priority(idx) / total;
            indices.push(idx);
            weights.push((n * p).powf(-beta_is));
            samples.push(self.data[idx].clone().expect("sampled an empty replay slot"));
        }
        Ok(Minibatch { indices, weights, samples })
    }
}

/// Critic input: every agent's observation, then every agent's action.
pub fn critic_input(obs: &[Vec<f64>], acts: &[Vec<f64>]) -> Vec<f64> {
    let mut v = Vec::with_capacity(
        obs.iter().map(Vec::len).sum::<usize>() + acts.iter().map(Vec::len).sum::<usize>(),
    );
    for o in obs {
        v.extend_from_slice(o);
    }
    for a in acts {
        v.extend_from_slice(a);
    }
    v
}

pub struct DiffusionActor {
    pub net: EpsilonNet,
    pub target: EpsilonNet,
    pub schedule: NoiseSchedule,
    pub opt: AdamState,
}

pub struct GaussianActor {
    pub net: Mlp,
    pub target: Mlp,
    pub opt: AdamState,
}

pub enum Actor {
    Diffusion(DiffusionActor),
    Gaussian(GaussianActor),
}

impl Actor {
    pub fn act_dim(&self) -> usize {
        match self {
            Actor::Diffusion(d) => d.net.x_dim,
            Actor::Gaussian(g) => g.net.output_len(),
        }
    }

    /// Deterministic action of the online net (zero injected noise).
    pub fn eval_action(&self, obs: &[f64]) -> Result<Vec<f64>, NeuralError> {
        match self {
            Actor::Diffusion(d) => {
                let noises = Noises::zeros(d.net.x_dim, d.schedule.steps());
                Ok(reverse_sample_with_noises(&d.net, &d.schedule, obs, &noises)?.0)
            }
            Actor::Gaussian(g) => g.net.forward(obs),
        }
    }

    /// Deterministic action of the target net.
    pub fn target_action(&self, obs: &[f64]) -> Result<Vec<f64>, NeuralError> {
        match self {
            Actor::Diffusion(d) => {
                let noises = Noises::zeros(d.net.x_dim, d.schedule.steps());
                Ok(reverse_sample_with_noises(&d.target, &d.schedule, obs, &noises)?.0)
            }
            Actor::Gaussian(g) => g.target.forward(obs),
        }
    }

    /// Exploratory action: the chain noise (or additive Gaussian) scaled by
    /// the current exploration rate.
    pub fn explore_action(
        &self,
        obs: &[f64],
        eps: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<f64>, NeuralError> {
        match self {
            Actor::Diffusion(d) => {
                let noises = Noises::draw(d.net.x_dim, d.schedule.steps(), rng).scaled(eps);
                Ok(reverse_sample_with_noises(&d.net, &d.schedule, obs, &noises)?.0)
            }
            Actor::Gaussian(g) => {
                let mut out = g.net.forward(obs)?;
                for v in out.iter_mut() {
                    *v += eps * rng.sample::<f64, _>(StandardNormal);
                }
                Ok(out)
            }
        }
    }

    fn soft_update(&mut self, psi: f64) {
        match self {
            Actor::Diffusion(d) => d.target.net.blend_from(&d.net.net, psi),
            Actor::Gaussian(g) => g.target.blend_from(&g.net, psi),
        }
    }
}

/// One agent's learnable state: its actor pair and its centralized critic
/// pair with their optimizer moments.
pub struct AgentLearner {
    pub actor: Actor,
    pub critic: Mlp,
    pub critic_target: Mlp,
    pub critic_opt: AdamState,
}

impl AgentLearner {
    pub fn soft_update(&mut self, psi: f64) {
        self.actor.soft_update(psi);
        self.critic_target.blend_from(&self.critic, psi);
    }
}

/// Target y = r + gamma·Q_target(O', A') with A' from the target actors,
/// zeroed past round ends; loss is the importance-weighted MSE; one Adam
/// step on the critic. Returns the loss and per-sample |y − Q|.
pub fn critic_update(
    learners: &mut [AgentLearner],
    u: usize,
    mb: &Minibatch,
    gamma: f64,
    lr: f64,
) -> Result<(f64, Vec<f64>), TrainError> {
    let batch = mb.samples.len();
    if batch == 0 {
        return Err(TrainError::EmptyReplay);
    }
    let mut targets = Vec::with_capacity(batch);
    {
        let me = &learners[u];
        for s in &mb.samples {
            let mut acts = Vec::with_capacity(learners.len());
            for (v, l) in learners.iter().enumerate() {
                acts.push(l.actor.target_action(&s.next_obs[v])?);
            }
            let input = critic_input(&s.next_obs, &acts);
            let qp = me.critic_target.forward(&input)?[0];
            targets.push(s.rewards[u] + if s.done { 0.0 } else { gamma * qp });
        }
    }
    let me = &mut learners[u];
    let mut acc = Gradients::zeros_like(&me.critic);
    let mut loss = 0.0;
    let mut td_errors = Vec::with_capacity(batch);
    for (k, s) in mb.samples.iter().enumerate() {
        let input = critic_input(&s.obs, &s.actions);
        let (q, tape) = me.critic.forward_tape(&input)?;
        let err = targets[k] - q[0];
        td_errors.push(err.abs());
        let w = mb.weights[k];
        loss += w * err * err;
        let g = me.critic.backward(&tape, &[-2.0 * w * err / batch as f64])?;
        acc.add_scaled(&g, 1.0);
    }
    loss /= batch as f64;
    adam_step(&mut me.critic, &acc, &mut me.critic_opt, lr);
    Ok((loss, td_errors))
}

/// Deterministic-policy-gradient step: regenerate the agent's own action
/// with frozen per-sample noise, splice it into the replayed joint action,
/// and ascend Q through the chain. An optional denoising term pulls toward
/// the replayed actions (ignored by the Gaussian baseline). Returns the
/// surrogate loss −mean(Q) + lambda_bc·bc.
pub fn actor_update(
    learners: &mut [AgentLearner],
    u: usize,
    mb: &Minibatch,
    lambda_bc: f64,
    lr: f64,
    noise_rng: &mut ChaCha8Rng,
) -> Result<f64, TrainError> {
    let batch = mb.samples.len();
    if batch == 0 {
        return Err(TrainError::EmptyReplay);
    }
    let a_dim = learners[u].actor.act_dim();
    let obs_total: usize = mb.samples[0].obs.iter().map(Vec::len).sum();
    let own_offset = obs_total + u * a_dim;
    let me = &learners[u];
    let mut q_sum = 0.0;
    let mut bc_loss = 0.0;
    let loss;
    match &me.actor {
        Actor::Diffusion(d) => {
            let mut acc = Gradients::zeros_like(&d.net.net);
            let frozen: Vec<Noises> = (0..batch)
                .map(|_| Noises::draw(d.net.x_dim, d.schedule.steps(), noise_rng))
                .collect();
            for (k, s) in mb.samples.iter().enumerate() {
                let (a_new, chain_tape) =
                    reverse_sample_with_noises(&d.net, &d.schedule, &s.obs[u], &frozen[k])?;
                let mut acts = s.actions.clone();
                acts[u] = a_new;
                let input = critic_input(&s.obs, &acts);
                let (q, ctape) = me.critic.forward_tape(&input)?;
                q_sum += q[0];
                let cg = me.critic.backward(&ctape, &[-1.0 / batch as f64])?;
                let own_grad = &cg.input[own_offset..own_offset + a_dim];
                let (g, _) = chain_backward(&d.net, &d.schedule, &chain_tape, own_grad)?;
                acc.add_scaled(&g, 1.0);
            }
            if lambda_bc > 0.0 {
                let x0s: Vec<Vec<f64>> = mb.samples.iter().map(|s| s.actions[u].clone()).collect();
                let conds: Vec<Vec<f64>> = mb.samples.iter().map(|s| s.obs[u].clone()).collect();
                let drawn = draw_noised(&d.schedule, batch, d.net.x_dim, noise_rng);
                let (l, g) = denoising_loss_grads_on(&d.net, &d.schedule, &x0s, &conds, &drawn)?;
                bc_loss = l;
                acc.add_scaled(&g, lambda_bc);
            }
            loss = -q_sum / batch as f64 + lambda_bc * bc_loss;
            let Actor::Diffusion(d) = &mut learners[u].actor else { unreachable!() };
            adam_step(&mut d.net.net, &acc, &mut d.opt, lr);
        }
        Actor::Gaussian(g) => {
            let mut acc = Gradients::zeros_like(&g.net);
            for s in mb.samples.iter() {
                let (a_new, atape) = g.net.forward_tape(&s.obs[u])?;
                let mut acts = s.actions.clone();
                acts[u] = a_new;
                let input = critic_input(&s.obs, &acts);
                let (q, ctape) = me.critic.forward_tape(&input)?;
                q_sum += q[0];
                let cg = me.critic.backward(&ctape, &[-1.0 / batch as f64])?;
                let own_grad = &cg.input[own_offset..own_offset + a_dim];
                let ag = g.net.backward(&atape, own_grad)?;
                acc.add_scaled(&ag, 1.0);
            }
            loss = -q_sum / batch as f64;
            let Actor::Gaussian(g) = &mut learners[u].actor else { unreachable!() };
            adam_step(&mut g.net, &acc, &mut g.opt, lr);
        }
    }
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub episodes: usize,
    pub batch: usize,
    pub replay_capacity: usize,
    pub lr: f64,
    pub gamma: f64,
    pub psi: f64,
    pub eps0: f64,
    /// Per-episode multiplicative decay: eps(t) = eps0·(1−decay)^t.
    pub eps_decay: f64,
    pub eps_floor: f64,
    pub lambda_bc: f64,
    pub v_weight: f64,
    pub reward_scale: f64,
    pub violation_penalty: f64,
    /// World steps between update cycles.
    pub update_every: usize,
    pub hidden: usize,
    pub denoise_steps: usize,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            episodes: 300,
            batch: 256,
            replay_capacity: 50_000,
            lr: 1e-4,
            gamma: 0.9,
            psi: 0.01,
            eps0: 0.9,
            eps_decay: 1e-4,
            eps_floor: 0.05,
            lambda_bc: 0.05,
            v_weight: 1.0,
            reward_scale: 1.0,
            violation_penalty: 1.0,
            update_every: 15,
            hidden: 256,
            denoise_steps: 5,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    /// Preset sized for the bundled desk scenario on one CPU core: the
    /// latency weight matches the scenario's joule-scale queue excursions so
    /// both terms stay visible in an O(1) reward, and the exploration decay
    /// reaches its floor within the episode budget.
    pub fn desk(seed: u64) -> Self {
        TrainerConfig {
            batch: 64,
            v_weight: 3.0e7,
            reward_scale: 1.0e8,
            eps_decay: 0.01,
            seed,
            ..TrainerConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(TrainError::BadConfig(alloc::format!("gamma {} outside (0,1)", self.gamma)));
        }
        if !(self.psi > 0.0 && self.psi <= 1.0) {
            return Err(TrainError::BadConfig(alloc::format!("psi {} outside (0,1]", self.psi)));
        }
        if self.episodes == 0 || self.batch == 0 || self.update_every == 0 {
            return Err(TrainError::BadConfig(String::from(
                "episodes, batch, and update_every must be positive",
            )));
        }
        Ok(())
    }

    pub fn env_params(&self) -> EnvParams {
        EnvParams {
            v_weight: self.v_weight,
            reward_scale: self.reward_scale,
            violation_penalty: self.violation_penalty,
            ..EnvParams::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Matching-based subarea selection with diffusion actors.
    HungarianDiffusion,
    /// Round-robin subareas with Gaussian-noise feedforward actors.
    PlainGaussian,
    /// Untrained uniform-random actions, round-robin subareas.
    RandomActions,
    /// Always compute locally, round-robin subareas.
    GreedyLocal,
}

impl Variant {
    pub fn assign_mode(&self) -> AssignMode {
        match self {
            Variant::HungarianDiffusion => AssignMode::Hungarian,
            _ => AssignMode::RoundRobin,
        }
    }

    pub fn learns(&self) -> bool {
        matches!(self, Variant::HungarianDiffusion | Variant::PlainGaussian)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub episode: u32,
    pub mean_reward: f64,
    pub mean_latency_s: f64,
    pub mean_energy_j: f64,
    pub mean_q: f64,
}

pub struct TrainResult {
    pub curve: Vec<EpisodeRow>,
    pub learners: Option<Vec<AgentLearner>>,
}

pub fn init_learners(scn: &Scenario, cfg: &TrainerConfig, variant: Variant) -> Vec<AgentLearner> {
    let u_count = scn.uavs.len();
    let o_len = obs_len(scn);
    let a_len = act_len(scn);
    let critic_in = u_count * (o_len + a_len);
    let schedule = make_schedule(cfg.denoise_steps, DEFAULT_BETA_START, DEFAULT_BETA_END)
        .expect("valid default noise schedule");
    (0..u_count)
        .map(|u| {
            let mut rng = stream(cfg.seed, &[tag::INIT, u as u64]);
            let actor = match variant {
                Variant::PlainGaussian => {
                    let net = Mlp::new(&[o_len, cfg.hidden, a_len], &mut rng);
                    let target = net.clone();
                    let opt = AdamState::new(&net);
                    Actor::Gaussian(GaussianActor { net, target, opt })
                }
                _ => {
                    let net =
                        EpsilonNet::new(a_len, o_len, schedule.steps(), cfg.hidden, &mut rng);
                    let target = net.clone();
                    let opt = AdamState::new(&net.net);
                    Actor::Diffusion(DiffusionActor {
                        net,
                        target,
                        schedule: schedule.clone(),
                        opt,
                    })
                }
            };
            let critic = Mlp::new(&[critic_in, cfg.hidden, 1], &mut rng);
            let critic_target = critic.clone();
            let critic_opt = AdamState::new(&critic);
            AgentLearner { actor, critic, critic_target, critic_opt }
        })
        .collect()
}

/// The trained actors as an environment policy (deterministic at scale 0).
pub enum TrainedPolicy {
    Diffusion { nets: Vec<EpsilonNet>, schedule: NoiseSchedule, noise_scale: f64 },
    Gaussian { nets: Vec<Mlp>, noise_scale: f64 },
}

pub fn trained_policy(learners: &[AgentLearner], noise_scale: f64) -> TrainedPolicy {
    match &learners[0].actor {
        Actor::Diffusion(d) => TrainedPolicy::Diffusion {
            nets: learners
                .iter()
                .map(|l| match &l.actor {
                    Actor::Diffusion(d) => d.net.clone(),
                    Actor::Gaussian(_) => panic!("mixed actor kinds"),
                })
                .collect(),
            schedule: d.schedule.clone(),
            noise_scale,
        },
        Actor::Gaussian(_) => TrainedPolicy::Gaussian {
            nets: learners
                .iter()
                .map(|l| match &l.actor {
                    Actor::Gaussian(g) => g.net.clone(),
                    Actor::Diffusion(_) => panic!("mixed actor kinds"),
                })
                .collect(),
            noise_scale,
        },
    }
}

impl SlotPolicy for TrainedPolicy {
    fn act(&self, _world: &World, uav: usize, obs: &Observation, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            TrainedPolicy::Diffusion { nets, schedule, noise_scale } => {
                let net = &nets[uav];
                let noises =
                    Noises::draw(net.x_dim, schedule.steps(), rng).scaled(*noise_scale);
                reverse_sample_with_noises(net, schedule, &obs.vector, &noises)
                    .expect("diffusion sampling failed")
                    .0
            }
            TrainedPolicy::Gaussian { nets, noise_scale } => {
                let mut out = nets[uav].forward(&obs.vector).expect("actor forward failed");
                for v in out.iter_mut() {
                    *v += noise_scale * rng.sample::<f64, _>(StandardNormal);
                }
                out
            }
        }
    }
}

/// Full training loop over the given scenario. Rollouts, replay pushes,
/// and update cycles are all seeded from the config; identical configs
/// produce identical learning curves.
pub fn train(scn: &Scenario, cfg: &TrainerConfig, variant: Variant) -> Result<TrainResult, TrainError> {
    cfg.validate()?;
    let params = cfg.env_params();
    let mode = variant.assign_mode();
    let u_count = scn.uavs.len();
    let mut learners = if variant.learns() { Some(init_learners(scn, cfg, variant)) } else { None };
    let mut replay = Replay::new(cfg.replay_capacity);
    let mut replay_rng = stream(cfg.seed, &[tag::REPLAY]);
    let mut update_rng = stream(cfg.seed, &[tag::POLICY]);
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut steps_since_update = 0usize;
    for ep in 0..cfg.episodes {
        let eps = (cfg.eps0 * (1.0 - cfg.eps_decay).powi(ep as i32)).max(cfg.eps_floor);
        let frac = if cfg.episodes > 1 { ep as f64 / (cfg.episodes - 1) as f64 } else { 1.0 };
        let beta_is = BETA_IS_START + (BETA_IS_END - BETA_IS_START) * frac;
        let world_seed = child_seed(cfg.seed, &[tag::SCENARIO, ep as u64]);
        let mut world = World::new(scn.clone(), params.clone(), mode, world_seed)?;
        let mut explore = stream(cfg.seed, &[tag::EXPLORE, ep as u64]);
        let mut reward_sum = 0.0;
        let mut latency_sum = 0.0;
        let mut energy_sum = 0.0;
        let mut q_sum = 0.0;
        let mut n_records = 0usize;
        while !world.done_episode {
            let mut raws = Vec::with_capacity(u_count);
            for u in 0..u_count {
                let obs = world.observe(u)?;
                let raw = match &learners {
                    Some(ls) => ls[u].actor.explore_action(&obs.vector, eps, &mut explore)?,
                    None => match variant {
                        Variant::GreedyLocal => GreedyLocalPolicy.act(&world, u, &obs, &mut explore),
                        _ => RandomPolicy.act(&world, u, &obs, &mut explore),
                    },
                };
                raws.push(raw);
            }
            let out = world.step(&raws)?;
            for r in &out.records {
                reward_sum += r.reward;
                latency_sum += r.cost.t_total_s;
                energy_sum += r.cost.e_total_j;
                q_sum += r.q_after;
                n_records += 1;
            }
            if let Some(ls) = learners.as_mut() {
                let t = &out.transitions;
                replay.push(JointSample {
                    obs: t.iter().map(|x| x.obs.vector.clone()).collect(),
                    actions: t.iter().map(|x| x.action_raw.clone()).collect(),
                    rewards: t.iter().map(|x| x.reward).collect(),
                    next_obs: t.iter().map(|x| x.next_obs.vector.clone()).collect(),
                    done: t[0].done,
                });
                steps_since_update += 1;
                if steps_since_update >= cfg.update_every && replay.len() >= cfg.batch {
                    steps_since_update = 0;
                    for u in 0..u_count {
                        let mb = replay.sample(cfg.batch, beta_is, &mut replay_rng)?;
                        let (_, tds) = critic_update(ls, u, &mb, cfg.gamma, cfg.lr)?;
                        for (k, &idx) in mb.indices.iter().enumerate() {
                            replay.set_priority(idx, tds[k] + PRIORITY_EPS);
                        }
                        actor_update(ls, u, &mb, cfg.lambda_bc, cfg.lr, &mut update_rng)?;
                        ls[u].soft_update(cfg.psi);
                    }
                }
            }
        }
        let n = n_records.max(1) as f64;
        curve.push(EpisodeRow {
            episode: ep as u32,
            mean_reward: reward_sum / n,
            mean_latency_s: latency_sum / n,
            mean_energy_j: energy_sum / n,
            mean_q: q_sum / n,
        });
    }
    Ok(TrainResult { curve, learners })
}

/// Deterministic evaluation of a trained policy (or a fixed baseline) over
/// the given seeds; returns per-seed episode metrics.
pub fn evaluate(
    scn: &Scenario,
    cfg: &TrainerConfig,
    variant: Variant,
    learners: Option<&[AgentLearner]>,
    seeds: &[u64],
) -> Result<Vec<EpisodeMetrics>, TrainError> {
    let params = cfg.env_params();
    let mode = variant.assign_mode();
    let policy: Box<dyn SlotPolicy> = match learners {
        Some(ls) => Box::new(trained_policy(ls, 0.0)),
        None => match variant {
            Variant::GreedyLocal => Box::new(GreedyLocalPolicy),
            _ => Box::new(RandomPolicy),
        },
    };
    let mut out = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let res = run_episode(scn, &params, mode, policy.as_ref(), s, false)?;
        out.push(res.metrics);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, GenConfig};

    fn mini_sample(tagv: f64, u_count: usize, o: usize, a: usize) -> JointSample {
        JointSample {
            obs: vec![vec![tagv; o]; u_count],
            actions: vec![vec![0.1 * tagv; a]; u_count],
            rewards: vec![tagv; u_count],
            next_obs: vec![vec![tagv + 0.5; o]; u_count],
            done: false,
        }
    }

    #[test]
    fn replay_ring_evicts_oldest() {
        let mut mem = Replay::new(4);
        for i in 0..6 {
            mem.push(mini_sample(i as f64, 1, 2, 2));
        }
        assert_eq!(mem.len(), 4);
        let mut rng = stream(1, &[tag::REPLAY]);
        let mut seen = [false; 6];
        for _ in 0..200 {
            let mb = mem.sample(1, 1.0, &mut rng).unwrap();
            seen[mb.samples[0].rewards[0] as usize] = true;
        }
        assert!(!seen[0] && !seen[1], "oldest two entries must be gone");
        assert!(seen[2] && seen[3] && seen[4] && seen[5]);
    }

    #[test]
    fn replay_errors() {
        let mem = Replay::new(4);
        let mut rng = stream(2, &[tag::REPLAY]);
        assert_eq!(mem.sample(1, 1.0, &mut rng).unwrap_err(), TrainError::EmptyReplay);
        let mut mem = Replay::new(4);
        mem.push(mini_sample(0.0, 1, 1, 1));
        assert!(matches!(
            mem.sample(3, 1.0, &mut rng).unwrap_err(),
            TrainError::BatchTooLarge { batch: 3, len: 1 }
        ));
    }

    #[test]
    fn uniform_priorities_sample_uniformly() {
        let n = 10usize;
        let mut mem = Replay::new(16);
        for i in 0..n {
            mem.push(mini_sample(i as f64, 1, 1, 1));
            mem.set_priority(i, 1.0);
        }
        let mut rng = stream(3, &[tag::REPLAY]);
        let draws = 100_000usize;
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            let mb = mem.sample(1, 1.0, &mut rng).unwrap();
            counts[mb.indices[0]] += 1;
        }
        let p = 1.0 / n as f64;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            let dev = (c as f64 - draws as f64 * p).abs();
            assert!(dev < 3.0 * sigma, "slot {i}: count {c} deviates {dev:.0} > 3σ {:.0}", 3.0 * sigma);
        }
        // uniform priorities give unit importance weights
        let mb = mem.sample(4, 0.7, &mut rng).unwrap();
        for w in mb.weights {
            assert!((w - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tenfold_priority_samples_tenfold() {
        let n = 10usize;
        let mut mem = Replay::new(16);
        for i in 0..n {
            mem.push(mini_sample(i as f64, 1, 1, 1));
            mem.set_priority(i, 1.0);
        }
        mem.set_priority(0, 10.0);
        let total = 10.0 + 9.0;
        let p_hot = 10.0 / total;
        let mut rng = stream(4, &[tag::REPLAY]);
        let draws = 100_000usize;
        let mut hot = 0usize;
        for _ in 0..draws {
            let mb = mem.sample(1, 1.0, &mut rng).unwrap();
            if mb.indices[0] == 0 {
                hot += 1;
            }
        }
        let sigma = (draws as f64 * p_hot * (1.0 - p_hot)).sqrt();
        let dev = (hot as f64 - draws as f64 * p_hot).abs();
        assert!(dev < 3.0 * sigma, "hot count {hot} deviates {dev:.0} > 3σ");
        // and the weight compensates: w_hot/w_cold = (p_hot/p_cold)^-beta
        let mb = mem.sample(10, 1.0, &mut rng).unwrap();
        for (k, &idx) in mb.indices.iter().enumerate() {
            let p = mem.priority(idx) / mem.total_priority();
            let expect = (n as f64 * p).powf(-1.0);
            assert!((mb.weights[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gamma_zero_critic_loss_is_weighted_reward_power() {
        let u_count = 2;
        let (o, a) = (3, 2);
        let mut learners: Vec<AgentLearner> = (0..u_count)
            .map(|u| {
                let mut rng = stream(5, &[tag::INIT, u as u64]);
                let net = EpsilonNet::new(a, o, 2, 8, &mut rng);
                let critic = Mlp::zeros(&[u_count * (o + a), 8, 1]);
                AgentLearner {
                    actor: Actor::Diffusion(DiffusionActor {
                        target: net.clone(),
                        schedule: make_schedule(2, 0.1, 0.5).unwrap(),
                        opt: AdamState::new(&net.net),
                        net,
                    }),
                    critic_target: critic.clone(),
                    critic_opt: AdamState::new(&critic),
                    critic,
                }
            })
            .collect();
        let samples = vec![mini_sample(1.5, u_count, o, a), mini_sample(-0.5, u_count, o, a)];
        let mb = Minibatch {
            indices: vec![0, 1],
            weights: vec![2.0, 3.0],
            samples,
        };
        let (loss, tds) = critic_update(&mut learners, 0, &mb, 0.0, 0.0).unwrap();
        // critic ≡ 0 and gamma = 0 leave y = r, so loss = mean(w·r²)
        let expect = (2.0 * 1.5 * 1.5 + 3.0 * 0.5 * 0.5) / 2.0;
        assert!((loss - expect).abs() < 1e-12);
        assert!((tds[0] - 1.5).abs() < 1e-12 && (tds[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_td_targets() {
        let u_count = 1;
        let (o, a) = (2, 2);
        let mut rng = stream(6, &[tag::INIT]);
        let net = EpsilonNet::new(a, o, 2, 4, &mut rng);
        // critic_target outputs the constant 0.8 via its output bias
        let mut critic_target = Mlp::zeros(&[o + a, 4, 1]);
        let nb = critic_target.param_count() - 1;
        critic_target.set_param(nb, 0.8);
        let critic = Mlp::zeros(&[o + a, 4, 1]);
        let mut learners = vec![AgentLearner {
            actor: Actor::Diffusion(DiffusionActor {
                target: net.clone(),
                schedule: make_schedule(2, 0.1, 0.5).unwrap(),
                opt: AdamState::new(&net.net),
                net,
            }),
            critic,
            critic_target,
            critic_opt: AdamState::new(&Mlp::zeros(&[o + a, 4, 1])),
        }];
        let mut s = mini_sample(2.0, u_count, o, a);
        s.rewards[0] = 2.0;
        let mut s2 = mini_sample(-1.0, u_count, o, a);
        s2.rewards[0] = -1.0;
        s2.done = true;
        let mb = Minibatch { indices: vec![0, 1], weights: vec![1.0, 1.0], samples: vec![s, s2] };
        let (_, tds) = critic_update(&mut learners, 0, &mb, 0.9, 0.0).unwrap();
        // online critic is zero: |y − 0| = |r + γ·bias| and |r| when done,
        // with the bias as stored in f32
        let bias = 0.8f32 as f64;
        assert!((tds[0] - (2.0 + 0.9 * bias)).abs() < 1e-12, "got {}", tds[0]);
        assert!((tds[1] - 1.0).abs() < 1e-12, "got {}", tds[1]);
    }

    fn effective_step(base: f32, h: f64) -> (f64, f64, f64) {
        let plus = (base as f64 + h) as f32;
        let minus = (base as f64 - h) as f32;
        (plus as f64, minus as f64, plus as f64 - minus as f64)
    }

    #[test]
    fn critic_gradient_matches_finite_differences() {
        let u_count = 2;
        let (o, a) = (3, 2);
        let mut rng = stream(7, &[tag::INIT]);
        let critic = Mlp::new(&[u_count * (o + a), 8, 1], &mut rng);
        let samples: Vec<JointSample> = (0..3)
            .map(|i| {
                let mut s = mini_sample(0.3 * i as f64 - 0.2, u_count, o, a);
                for u in 0..u_count {
                    for (j, v) in s.obs[u].iter_mut().enumerate() {
                        *v += 0.1 * (u + j) as f64;
                    }
                }
                s
            })
            .collect();
        let weights = vec![1.0, 0.5, 2.0];
        let targets = vec![0.7, -0.3, 1.1];
        // loss closure with fixed targets, mirroring critic_update's MSE
        let loss_of = |net: &Mlp| -> f64 {
            let mut l = 0.0;
            for (k, s) in samples.iter().enumerate() {
                let q = net.forward(&critic_input(&s.obs, &s.actions)).unwrap()[0];
                let e = targets[k] - q;
                l += weights[k] * e * e;
            }
            l / samples.len() as f64
        };
        let mut acc = Gradients::zeros_like(&critic);
        for (k, s) in samples.iter().enumerate() {
            let (q, tape) = critic.forward_tape(&critic_input(&s.obs, &s.actions)).unwrap();
            let err = targets[k] - q[0];
            let g = critic
                .backward(&tape, &[-2.0 * weights[k] * err / samples.len() as f64])
                .unwrap();
            acc.add_scaled(&g, 1.0);
        }
        // relu sign pattern over all samples; central differences only make
        // sense when the perturbed nets stay on the same linear piece
        let pattern = |net: &Mlp| -> Vec<bool> {
            let mut p = Vec::new();
            for s in &samples {
                let (_, tape) = net.forward_tape(&critic_input(&s.obs, &s.actions)).unwrap();
                for layer in &tape.pre {
                    p.extend(layer.iter().map(|&v| v > 0.0));
                }
            }
            p
        };
        let base_pattern = pattern(&critic);
        let mut rng2 = stream(8, &[tag::ORACLE]);
        let mut checked = 0;
        let h = 1e-4;
        for _ in 0..120 {
            let idx = rng2.gen_range(0..critic.param_count());
            let base = critic.get_param(idx);
            let (pv, mv, step) = effective_step(base, h);
            if step == 0.0 {
                continue;
            }
            let mut net_p = critic.clone();
            net_p.set_param(idx, pv as f32);
            let mut net_m = critic.clone();
            net_m.set_param(idx, mv as f32);
            if pattern(&net_p) != base_pattern || pattern(&net_m) != base_pattern {
                continue;
            }
            let fd = (loss_of(&net_p) - loss_of(&net_m)) / step;
            let an = grad_at(&acc, idx);
            let denom = an.abs().max(fd.abs()).max(1e-8);
            if (fd - an).abs() / denom > 1e-3 {
                panic!("param {idx}: fd {fd} vs analytic {an}");
            }
            checked += 1;
        }
        assert!(checked > 30);
    }

    // mirrors the flat parameter order: weights then biases, layer by layer
    fn grad_at(g: &Gradients, mut idx: usize) -> f64 {
        for l in 0..g.weights.len() {
            if idx < g.weights[l].len() {
                return g.weights[l][idx];
            }
            idx -= g.weights[l].len();
            if idx < g.biases[l].len() {
                return g.biases[l][idx];
            }
            idx -= g.biases[l].len();
        }
        panic!("index out of range");
    }

    #[test]
    fn flat_critic_is_actor_fixed_point() {
        let u_count = 1;
        let (o, a) = (2, 2);
        let mut rng = stream(9, &[tag::INIT]);
        let net = EpsilonNet::new(a, o, 3, 6, &mut rng);
        // zero weights everywhere: Q is constant in its inputs
        let mut critic = Mlp::zeros(&[o + a, 6, 1]);
        critic.set_param(critic.param_count() - 1, 3.7);
        let before = net.net.to_bytes();
        let mut learners = vec![AgentLearner {
            actor: Actor::Diffusion(DiffusionActor {
                target: net.clone(),
                schedule: make_schedule(3, 0.1, 0.5).unwrap(),
                opt: AdamState::new(&net.net),
                net,
            }),
            critic_target: critic.clone(),
            critic_opt: AdamState::new(&critic),
            critic,
        }];
        let mb = Minibatch {
            indices: vec![0],
            weights: vec![1.0],
            samples: vec![mini_sample(0.4, u_count, o, a)],
        };
        let mut nrng = stream(10, &[tag::POLICY]);
        actor_update(&mut learners, 0, &mb, 0.0, 1e-3, &mut nrng).unwrap();
        let Actor::Diffusion(d) = &learners[0].actor else { unreachable!() };
        assert_eq!(d.net.net.to_bytes(), before, "flat critic must not move the actor");
    }

    #[test]
    fn frozen_noise_regeneration_is_deterministic() {
        let (o, a) = (3, 2);
        let mut rng = stream(11, &[tag::INIT]);
        let net = EpsilonNet::new(a, o, 4, 8, &mut rng);
        let sch = make_schedule(4, 0.1, 0.5).unwrap();
        let noises = Noises::draw(a, 4, &mut rng);
        let obs = vec![0.2, -0.1, 0.7];
        let (x1, _) = reverse_sample_with_noises(&net, &sch, &obs, &noises).unwrap();
        let (x2, _) = reverse_sample_with_noises(&net, &sch, &obs, &noises).unwrap();
        assert_eq!(x1, x2);
    }

    /// Fit a critic to Q(o, a) = −(a−0.7)², then check the actor's mean
    /// action climbs to the optimum.
    #[test]
    fn toy_quadratic_critic_pulls_action_to_optimum() {
        let (o, a) = (1usize, 1usize);
        let mut rng = stream(12, &[tag::INIT]);
        let mut critic = Mlp::new(&[o + a, 32, 1], &mut rng);
        let mut copt = AdamState::new(&critic);
        let mut data_rng = stream(12, &[tag::ORACLE]);
        for _ in 0..4000 {
            let mut acc = Gradients::zeros_like(&critic);
            let batch = 32;
            for _ in 0..batch {
                let obs = data_rng.gen_range(-1.0..1.0);
                let act = data_rng.gen_range(-0.5..1.9);
                let target = -(act - 0.7) * (act - 0.7);
                let (q, tape) = critic.forward_tape(&[obs, act]).unwrap();
                let err = q[0] - target;
                let g = critic.backward(&tape, &[2.0 * err / batch as f64]).unwrap();
                acc.add_scaled(&g, 1.0);
            }
            adam_step(&mut critic, &acc, &mut copt, 1e-3);
        }
        // sanity: the fit is good near the optimum
        let q_opt = critic.forward(&[0.0, 0.7]).unwrap()[0];
        let q_off = critic.forward(&[0.0, 0.0]).unwrap()[0];
        assert!(q_opt > q_off, "critic fit failed: {q_opt} vs {q_off}");
        let net = EpsilonNet::new(a, o, 3, 16, &mut rng);
        let mut learners = vec![AgentLearner {
            actor: Actor::Diffusion(DiffusionActor {
                target: net.clone(),
                schedule: make_schedule(3, 0.1, 0.5).unwrap(),
                opt: AdamState::new(&net.net),
                net,
            }),
            critic_target: critic.clone(),
            critic_opt: AdamState::new(&critic),
            critic,
        }];
        let mut nrng = stream(13, &[tag::POLICY]);
        let mut obs_rng = stream(14, &[tag::ORACLE]);
        for _ in 0..2000 {
            let samples: Vec<JointSample> = (0..16)
                .map(|_| {
                    let ov = obs_rng.gen_range(-1.0..1.0);
                    JointSample {
                        obs: vec![vec![ov]],
                        actions: vec![vec![obs_rng.gen_range(-0.5..1.9)]],
                        rewards: vec![0.0],
                        next_obs: vec![vec![ov]],
                        done: false,
                    }
                })
                .collect();
            let mb = Minibatch { indices: (0..16).collect(), weights: vec![1.0; 16], samples };
            actor_update(&mut learners, 0, &mb, 0.0, 1e-3, &mut nrng).unwrap();
        }
        let mut mean_a = 0.0;
        let probes = 20;
        for k in 0..probes {
            let ov = -0.9 + 1.8 * k as f64 / (probes - 1) as f64;
            mean_a += learners[0].actor.eval_action(&[ov]).unwrap()[0];
        }
        mean_a /= probes as f64;
        assert!(
            (mean_a - 0.7).abs() < 0.05,
            "actor mean action {mean_a} not within 0.05 of 0.7"
        );
    }

    #[test]
    fn soft_update_endpoints_and_midpoint() {
        let mut rng = stream(15, &[tag::INIT]);
        let online = Mlp::new(&[2, 3, 1], &mut rng);
        let mut t1 = Mlp::new(&[2, 3, 1], &mut rng);
        t1.blend_from(&online, 1.0);
        assert_eq!(t1.to_bytes(), online.to_bytes(), "psi=1 is a hard copy");
        let t2_init = Mlp::new(&[2, 3, 1], &mut rng);
        let mut t2 = t2_init.clone();
        t2.blend_from(&online, 0.0);
        assert_eq!(t2.to_bytes(), t2_init.to_bytes(), "psi=0 is the identity");
        let mut theta = Mlp::zeros(&[1, 1]);
        let mut target = Mlp::zeros(&[1, 1]);
        for i in 0..theta.param_count() {
            theta.set_param(i, 2.0);
        }
        target.blend_from(&theta, 0.5);
        for i in 0..target.param_count() {
            assert_eq!(target.get_param(i), 1.0);
        }
    }

    #[test]
    fn target_lag_shrinks_geometrically() {
        let mut rng = stream(16, &[tag::INIT]);
        let online = Mlp::new(&[3, 8, 2], &mut rng);
        let mut target = Mlp::new(&[3, 8, 2], &mut rng);
        let dist = |a: &Mlp, b: &Mlp| -> f64 {
            (0..a.param_count())
                .map(|i| (a.get_param(i) as f64 - b.get_param(i) as f64).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let d0 = dist(&online, &target);
        let psi = 0.01;
        let k = 25;
        for _ in 0..k {
            target.blend_from(&online, psi);
        }
        let expect = d0 * (1.0f64 - psi).powi(k);
        let got = dist(&online, &target);
        assert!(
            (got - expect).abs() / expect < 1e-4,
            "distance {got} vs geometric {expect}"
        );
    }

    #[test]
    fn td_errors_match_independent_recomputation() {
        let u_count = 2;
        let (o, a) = (3, 2);
        let mut rng = stream(17, &[tag::INIT]);
        let mut learners: Vec<AgentLearner> = (0..u_count)
            .map(|u| {
                let mut r = stream(17, &[tag::INIT, u as u64 + 1]);
                let net = EpsilonNet::new(a, o, 2, 8, &mut r);
                let critic = Mlp::new(&[u_count * (o + a), 8, 1], &mut r);
                AgentLearner {
                    actor: Actor::Diffusion(DiffusionActor {
                        target: net.clone(),
                        schedule: make_schedule(2, 0.1, 0.5).unwrap(),
                        opt: AdamState::new(&net.net),
                        net,
                    }),
                    critic_target: critic.clone(),
                    critic_opt: AdamState::new(&critic),
                    critic,
                }
            })
            .collect();
        let samples: Vec<JointSample> = (0..4)
            .map(|i| {
                let mut s = mini_sample(0.2 * i as f64, u_count, o, a);
                s.rewards = vec![rng.gen_range(-1.0..1.0); u_count];
                s
            })
            .collect();
        let mb = Minibatch {
            indices: (0..4).collect(),
            weights: vec![1.0; 4],
            samples: samples.clone(),
        };
        // recompute y and Q with pre-update copies
        let critic_before = learners[0].critic.clone();
        let mut expected = Vec::new();
        for s in &samples {
            let mut acts = Vec::new();
            for (v, l) in learners.iter().enumerate() {
                acts.push(l.actor.target_action(&s.next_obs[v]).unwrap());
            }
            let qp = learners[0].critic_target.forward(&critic_input(&s.next_obs, &acts)).unwrap()[0];
            let y = s.rewards[0] + 0.9 * qp;
            let q = critic_before.forward(&critic_input(&s.obs, &s.actions)).unwrap()[0];
            expected.push((y - q).abs());
        }
        let (_, tds) = critic_update(&mut learners, 0, &mb, 0.9, 1e-4).unwrap();
        for (k, e) in expected.iter().enumerate() {
            assert!((tds[k] - e).abs() < 1e-12, "sample {k}: {} vs {e}", tds[k]);
        }
    }

    // Where a transition sits in the ring must not leak into the update: two
    // buffers holding the same transitions in different orders, forced to
    // draw the same one, produce bitwise-identical critic and actor steps.
    #[test]
    fn update_ignores_replay_position() {
        let u_count = 2;
        let (o, a) = (3, 2);
        let make = || -> Vec<AgentLearner> {
            (0..u_count)
                .map(|u| {
                    let mut r = stream(23, &[tag::INIT, u as u64 + 1]);
                    let net = EpsilonNet::new(a, o, 2, 8, &mut r);
                    let critic = Mlp::new(&[u_count * (o + a), 8, 1], &mut r);
                    AgentLearner {
                        actor: Actor::Diffusion(DiffusionActor {
                            target: net.clone(),
                            schedule: make_schedule(2, 0.1, 0.5).unwrap(),
                            opt: AdamState::new(&net.net),
                            net,
                        }),
                        critic_target: critic.clone(),
                        critic_opt: AdamState::new(&critic),
                        critic,
                    }
                })
                .collect()
        };
        let samples: Vec<JointSample> =
            (0..5).map(|i| mini_sample(0.3 * i as f64, u_count, o, a)).collect();
        let orders: [[usize; 5]; 2] = [[0, 1, 2, 3, 4], [3, 1, 4, 0, 2]];
        let mut batches = Vec::new();
        for order in &orders {
            let mut mem = Replay::new(8);
            for &k in order {
                mem.push(samples[k].clone());
            }
            for slot in 0..5 {
                let picked = order[slot] == 2;
                mem.set_priority(slot, if picked { 1.0 } else { 0.0 });
            }
            let mut rng = stream(5, &[tag::REPLAY]);
            batches.push(mem.sample(1, 0.4, &mut rng).unwrap());
        }
        assert_ne!(batches[0].indices, batches[1].indices);
        assert_eq!(batches[0].weights, batches[1].weights);
        assert_eq!(batches[0].samples[0].obs, batches[1].samples[0].obs);

        let mut results = Vec::new();
        for mb in &batches {
            let mut learners = make();
            let (loss, tds) = critic_update(&mut learners, 0, mb, 0.9, 1e-3).unwrap();
            let mut noise = stream(9, &[tag::POLICY]);
            let aloss = actor_update(&mut learners, 0, mb, 0.05, 1e-3, &mut noise).unwrap();
            let actor_bytes = match &learners[0].actor {
                Actor::Diffusion(d) => d.net.net.to_bytes(),
                Actor::Gaussian(g) => g.net.to_bytes(),
            };
            results.push((loss, tds, aloss, learners[0].critic.to_bytes(), actor_bytes));
        }
        assert_eq!(results[0], results[1]);
    }

    fn tiny_cfg(seed: u64) -> TrainerConfig {
        TrainerConfig {
            episodes: 3,
            batch: 8,
            replay_capacity: 64,
            update_every: 2,
            hidden: 16,
            denoise_steps: 3,
            eps_decay: 0.1,
            seed,
            ..TrainerConfig::default()
        }
    }

    fn tiny_scenario(seed: u64) -> Scenario {
        let cfg = GenConfig {
            uav_count: 1,
            rounds: 2,
            slots_per_round: 3,
            region_width_m: 2000.0,
            region_height_m: 2000.0,
            ger_count: 4,
            ger_flops_min: 1.0e12,
            ger_flops_max: 2.0e12,
            risk_count: 0,
            episode_data_gb_min: 0.001,
            episode_data_gb_max: 0.002,
            ..GenConfig::default()
        };
        generate_scenario(&cfg, seed).unwrap()
    }

    #[test]
    fn config_validation_rejects_bad_ranges() {
        let mut cfg = TrainerConfig::default();
        cfg.gamma = 1.0;
        assert!(matches!(cfg.validate(), Err(TrainError::BadConfig(_))));
        let mut cfg = TrainerConfig::default();
        cfg.psi = 0.0;
        assert!(matches!(cfg.validate(), Err(TrainError::BadConfig(_))));
        assert!(TrainerConfig::default().validate().is_ok());
    }

    #[test]
    fn warmup_episode_runs_without_updates() {
        let scn = tiny_scenario(30);
        let cfg = TrainerConfig { episodes: 1, batch: 64, ..tiny_cfg(30) };
        let res = train(&scn, &cfg, Variant::HungarianDiffusion).unwrap();
        assert_eq!(res.curve.len(), 1);
        assert!(res.curve[0].mean_reward.is_finite());
        assert!(res.learners.is_some());
    }

    #[test]
    fn training_is_seed_deterministic() {
        let scn = tiny_scenario(31);
        let a = train(&scn, &tiny_cfg(5), Variant::HungarianDiffusion).unwrap();
        let b = train(&scn, &tiny_cfg(5), Variant::HungarianDiffusion).unwrap();
        assert_eq!(a.curve, b.curve);
        let c = train(&scn, &tiny_cfg(6), Variant::HungarianDiffusion).unwrap();
        assert_ne!(a.curve, c.curve);
    }

    #[test]
    fn gaussian_variant_trains_and_differs() {
        let scn = tiny_scenario(32);
        let res = train(&scn, &tiny_cfg(7), Variant::PlainGaussian).unwrap();
        assert_eq!(res.curve.len(), 3);
        let ls = res.learners.unwrap();
        assert!(matches!(ls[0].actor, Actor::Gaussian(_)));
    }

    #[test]
    fn fixed_variants_produce_rollout_metrics_only() {
        let scn = tiny_scenario(33);
        for variant in [Variant::RandomActions, Variant::GreedyLocal] {
            let res = train(&scn, &tiny_cfg(8), variant).unwrap();
            assert_eq!(res.curve.len(), 3);
            assert!(res.learners.is_none());
            assert!(res.curve.iter().all(|r| r.mean_latency_s > 0.0));
        }
    }

    /// Dev probe for sizing training runs; run with --ignored to see
    /// per-episode rollout and per-cycle update timings at desk scale.
    #[test]
    #[ignore]
    fn desk_budget_probe() {
        use std::time::Instant;
        let scn = generate_scenario(&GenConfig::default(), 1).unwrap();
        let cfg = TrainerConfig { hidden: 256, batch: 64, seed: 1, ..TrainerConfig::default() };
        let mut ls = init_learners(&scn, &cfg, Variant::HungarianDiffusion);
        let params = cfg.env_params();
        let t0 = Instant::now();
        let res = run_episode(&scn, &params, AssignMode::Hungarian, &RandomPolicy, 1, true).unwrap();
        let rollout = t0.elapsed();
        let mut replay = Replay::new(4096);
        for _ in 0..6 {
            for t in res.transitions.chunks(scn.uavs.len()) {
                replay.push(JointSample {
                    obs: t.iter().map(|x| x.obs.vector.clone()).collect(),
                    actions: t.iter().map(|x| x.action_raw.clone()).collect(),
                    rewards: t.iter().map(|x| x.reward).collect(),
                    next_obs: t.iter().map(|x| x.next_obs.vector.clone()).collect(),
                    done: t[0].done,
                });
            }
        }
        let mut rng = stream(1, &[tag::REPLAY]);
        let mut nrng = stream(1, &[tag::POLICY]);
        let t1 = Instant::now();
        let cycles = 3;
        for _ in 0..cycles {
            for u in 0..scn.uavs.len() {
                let mb = replay.sample(cfg.batch, 0.5, &mut rng).unwrap();
                let (_, tds) = critic_update(&mut ls, u, &mb, cfg.gamma, cfg.lr).unwrap();
                for (k, &idx) in mb.indices.iter().enumerate() {
                    replay.set_priority(idx, tds[k] + PRIORITY_EPS);
                }
                actor_update(&mut ls, u, &mb, cfg.lambda_bc, cfg.lr, &mut nrng).unwrap();
                ls[u].soft_update(cfg.psi);
            }
        }
        let cycle = t1.elapsed() / cycles;
        std::println!("rollout episode: {rollout:?}; update cycle (batch {}): {cycle:?}", cfg.batch);
    }

    /// Dev probe: per-slot energy decomposition for the desk scenario under
    /// the all-local and oracle policies, against the derived budget.
    #[test]
    #[ignore]
    fn desk_energy_probe() {
        use crate::env::{GreedyLocalPolicy, OraclePolicy};
        let scn = generate_scenario(&GenConfig::default(), 1).unwrap();
        let cfg = TrainerConfig::desk(1);
        let params = cfg.env_params();
        std::println!("budget {:.1} J/slot", scn.energy_budget_j_per_slot);
        for (name, res) in [
            ("local ", run_episode(&scn, &params, AssignMode::Hungarian, &GreedyLocalPolicy, 7, false).unwrap()),
            ("oracle", run_episode(&scn, &params, AssignMode::Hungarian, &OraclePolicy, 7, false).unwrap()),
        ] {
            let n = res.records.len() as f64;
            let m = |f: &dyn Fn(&crate::env::SlotRecord) -> f64| res.records.iter().map(f).sum::<f64>() / n;
            std::println!(
                "{name}: e_total {:9.1} (comp {:9.1} tran {:7.1} prop {:7.1} dete {:6.1}) t {:6.3} q_end {:9.1} viol {}",
                m(&|r| r.cost.e_total_j),
                m(&|r| r.cost.e_comp_j),
                m(&|r| r.cost.e_tran_j),
                m(&|r| r.cost.e_prop_j),
                m(&|r| r.cost.e_dete_j),
                m(&|r| r.cost.t_total_s),
                res.metrics.final_q.iter().sum::<f64>() / scn.uavs.len() as f64,
                res.metrics.violation_count
            );
        }
    }

    /// Dev probe: a short desk training run, printing the reward trend and
    /// the evaluation latency against the random baseline.
    #[test]
    #[ignore]
    fn desk_learning_probe() {
        use std::time::Instant;
        let scn = generate_scenario(&GenConfig::default(), 1).unwrap();
        let cfg = TrainerConfig::desk(1);
        let t0 = Instant::now();
        let res = train(&scn, &cfg, Variant::HungarianDiffusion).unwrap();
        let took = t0.elapsed();
        let ma = |rows: &[EpisodeRow]| -> f64 {
            rows.iter().map(|r| r.mean_reward).sum::<f64>() / rows.len() as f64
        };
        let head = ma(&res.curve[..30]);
        let tail = ma(&res.curve[res.curve.len() - 30..]);
        for chunk in res.curve.chunks(30) {
            let lat = chunk.iter().map(|r| r.mean_latency_s).sum::<f64>() / chunk.len() as f64;
            let q = chunk.iter().map(|r| r.mean_q).sum::<f64>() / chunk.len() as f64;
            std::println!(
                "eps {:3}..{:3}: reward {:8.3} latency {:6.3} q {:9.1}",
                chunk[0].episode,
                chunk[chunk.len() - 1].episode,
                ma(chunk),
                lat,
                q
            );
        }
        let ls = res.learners.unwrap();
        let seeds = [900, 901, 902];
        let hg = evaluate(&scn, &cfg, Variant::HungarianDiffusion, Some(&ls), &seeds).unwrap();
        let rnd = evaluate(&scn, &cfg, Variant::RandomActions, None, &seeds).unwrap();
        let mean_lat = |ms: &[EpisodeMetrics]| {
            ms.iter().map(|m| m.mean_latency_s).sum::<f64>() / ms.len() as f64
        };
        std::println!(
            "{} eps in {took:?}; reward MA30 head {head:.4} tail {tail:.4}; eval latency hg {:.4} random {:.4}",
            cfg.episodes,
            mean_lat(&hg),
            mean_lat(&rnd)
        );
    }

    /// Dev probe: same as the learning probe but for the plain Gaussian
    /// variant, to compare final eval latency against the diffusion actor.
    #[test]
    #[ignore]
    fn desk_gaussian_probe() {
        use std::time::Instant;
        let scn = generate_scenario(&GenConfig::default(), 1).unwrap();
        let cfg = TrainerConfig::desk(1);
        let t0 = Instant::now();
        let res = train(&scn, &cfg, Variant::PlainGaussian).unwrap();
        let took = t0.elapsed();
        let ma = |rows: &[EpisodeRow]| -> f64 {
            rows.iter().map(|r| r.mean_reward).sum::<f64>() / rows.len() as f64
        };
        let head = ma(&res.curve[..30]);
        let tail = ma(&res.curve[res.curve.len() - 30..]);
        let ls = res.learners.unwrap();
        let seeds = [900, 901, 902];
        let pl = evaluate(&scn, &cfg, Variant::PlainGaussian, Some(&ls), &seeds).unwrap();
        let mean_lat = |ms: &[EpisodeMetrics]| {
            ms.iter().map(|m| m.mean_latency_s).sum::<f64>() / ms.len() as f64
        };
        std::println!(
            "plain: {} eps in {took:?}; reward MA30 head {head:.4} tail {tail:.4}; eval latency {:.4}",
            cfg.episodes,
            mean_lat(&pl)
        );
    }

    #[test]
    fn evaluate_is_deterministic_per_seed() {
        let scn = tiny_scenario(34);
        let cfg = tiny_cfg(9);
        let res = train(&scn, &cfg, Variant::HungarianDiffusion).unwrap();
        let ls = res.learners.unwrap();
        let m1 = evaluate(&scn, &cfg, Variant::HungarianDiffusion, Some(&ls), &[100, 101]).unwrap();
        let m2 = evaluate(&scn, &cfg, Variant::HungarianDiffusion, Some(&ls), &[100, 101]).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(m1.len(), 2);
    }
}
