//! The multi-agent decision environment: observations over the assigned
//! subarea, action decoding with masking, the slot step tying routing,
//! channel, cost, and virtual queues together, and episode orchestration.
//!
//! Rounds structure an episode: a matching picks one subarea per UAV per
//! round, the UAV operates there for `slots_per_round` slots, then ferries
//! to its next subarea between rounds (relocation happens outside slotted
//! time; the trajectory log shows the jump at round boundaries).

use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::assignment::{
    assign_rounds, build_cost_matrix, round_energy_estimate, AssignError, RoundAssignment,
    UavSnapshot,
};
use crate::channel::{
    link_sample_with_plos, mean_gain, path_loss, transmission_rate, ChannelError, LinkKind,
};
use crate::costmodel::{
    deadline_violations, slot_cost, CostError, OffloadTarget, SlotCost, SlotDecision, Task,
};
use crate::diffusion::{reverse_sample_with_noises, EpsilonNet, NoiseSchedule, Noises};
use crate::kinematics::{advance, route_toward, slot_distance, KinError, RouteParams, UavKinState};
use crate::lyapunov::{per_slot_argmin, CandidateCost, VirtualQueue};
use crate::neural::Mlp;
use crate::rng::{stream, tag};
use crate::scenario::{Constraint, Scenario, Violation};

/// Observation layout: 4 own features (x, y, altitude, compute), then one
/// (x, y, compute) triple per GER slot, zero-padded to the scenario's
/// per-subarea capacity. All features min-max normalized by scenario bounds.
pub fn obs_len(scn: &Scenario) -> usize {
    4 + 3 * scn.max_gers_per_subarea as usize
}

/// Action layout: one logit for local, one per GER slot, one for the
/// airship, then the offload-ratio channel.
pub fn act_len(scn: &Scenario) -> usize {
    scn.max_gers_per_subarea as usize + 3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub uav: u32,
    pub subarea: u32,
    pub vector: Vec<f64>,
    /// One entry per GER slot, 1.0 where a live GER fills it.
    pub mask: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentAction {
    pub target: OffloadTarget,
    /// Raw-vector slot the argmax landed on (0 local, then GER slots, last
    /// the airship).
    pub target_slot: usize,
    /// Offloaded share p; the local fraction is ς = 1 − p.
    pub offload_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub agent: u32,
    pub obs: Observation,
    pub action_raw: Vec<f64>,
    pub reward: f64,
    pub next_obs: Observation,
    pub done: bool,
}

/// Everything logged about one UAV-slot, enough to recompute the reward.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub global_slot: u64,
    pub round: u32,
    pub slot_in_round: u32,
    pub uav: u32,
    pub action: AgentAction,
    pub decision: SlotDecision,
    pub cost: SlotCost,
    pub rate_bps: f64,
    /// Post-move position for this slot.
    pub x_m: f64,
    pub y_m: f64,
    pub h_m: f64,
    pub q_before: f64,
    pub q_after: f64,
    pub y_k: f64,
    pub violations: Vec<Violation>,
    pub reward: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EnvError {
    #[error("UAV {0} has no subarea assigned this round")]
    Unassigned(u32),
    #[error("expected action vector of length {expected}, got {got}")]
    ActionLength { expected: usize, got: usize },
    #[error("expected {expected} joint actions, got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error(transparent)]
    Assign(#[from] AssignError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Kin(#[from] KinError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvParams {
    /// Latency weight V in the per-slot surrogate.
    pub v_weight: f64,
    /// Rewards are divided by this before use.
    pub reward_scale: f64,
    /// Flat reward deduction per flagged violation.
    pub violation_penalty: f64,
    /// Split a contended node's compute by demand share instead of equally.
    pub proportional_alloc: bool,
    /// Replace sampled link gains with their deterministic means.
    pub mean_channel: bool,
    /// Route toward the subarea center regardless of the offload target
    /// (used by the oracle policy so movement is decision-independent).
    pub route_to_center: bool,
    /// Offload-ratio grid resolution for candidate enumeration.
    pub ratio_grid: usize,
}

impl Default for EnvParams {
    fn default() -> Self {
        EnvParams {
            v_weight: 1.0,
            reward_scale: 1.0,
            violation_penalty: 1.0,
            proportional_alloc: false,
            mean_channel: false,
            route_to_center: false,
            ratio_grid: 11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssignMode {
    /// Matching solver over the shrinking subarea set.
    Hungarian,
    /// Fixed index order: round r hands subarea r·U+u to UAV u.
    RoundRobin,
}

pub fn make_assignments(scn: &Scenario, mode: AssignMode) -> Result<Vec<RoundAssignment>, AssignError> {
    match mode {
        AssignMode::Hungarian => assign_rounds(scn),
        AssignMode::RoundRobin => {
            let u_count = scn.uavs.len();
            let expected = u_count * scn.time.rounds as usize;
            if scn.subareas.len() != expected {
                return Err(AssignError::CardinalityMismatch(alloc::format!(
                    "{} subareas for {} UAVs x {} rounds",
                    scn.subareas.len(),
                    u_count,
                    scn.time.rounds
                )));
            }
            // Same cost metric as the matching path, evaluated at the fixed
            // index-order picks, so exports stay comparable across modes.
            let mut snaps: Vec<UavSnapshot> = scn
                .uavs
                .iter()
                .map(|u| UavSnapshot { x_m: u.start_x_m, y_m: u.start_y_m, e_rema_j: u.e_max_j })
                .collect();
            let all: Vec<usize> = (0..scn.subareas.len()).collect();
            Ok((0..scn.time.rounds)
                .map(|r| {
                    let picks: Vec<u32> =
                        (0..u_count as u32).map(|u| r * u_count as u32 + u).collect();
                    let matrix = build_cost_matrix(scn, &snaps, &all, true);
                    let per_uav_cost: Vec<f64> = picks
                        .iter()
                        .enumerate()
                        .map(|(u, &b)| matrix.get(u, b as usize))
                        .collect();
                    for (u, &b) in picks.iter().enumerate() {
                        let spend =
                            round_energy_estimate(scn, (snaps[u].x_m, snaps[u].y_m), b as usize);
                        let center = scn.subareas[b as usize].center();
                        snaps[u].x_m = center.0;
                        snaps[u].y_m = center.1;
                        snaps[u].e_rema_j = (snaps[u].e_rema_j - spend).max(0.0);
                    }
                    let total_cost = per_uav_cost.iter().sum();
                    RoundAssignment { round: r, subarea_for_uav: picks, per_uav_cost, total_cost }
                })
                .collect())
        }
    }
}

/// Mask inputs for one UAV-slot: which GER slots are live, their compute,
/// and whether the airship is a legal target (only when no live GER can
/// carry the whole task by itself within the deadline).
#[derive(Debug, Clone, PartialEq)]
pub struct MaskContext {
    /// Global GER index per live slot.
    pub ger_ids: Vec<usize>,
    pub ger_flops: Vec<f64>,
    pub airship_open: bool,
    /// Compute rate needed to finish the full task within its deadline.
    pub demand_flops: f64,
}

pub struct World {
    pub scn: Scenario,
    pub params: EnvParams,
    pub assignments: Vec<RoundAssignment>,
    pub round: u32,
    pub slot_in_round: u32,
    pub global_slot: u64,
    pub done_episode: bool,
    pub kin: Vec<UavKinState>,
    pub queues: Vec<VirtualQueue>,
    pub battery_j: Vec<f64>,
    pub round_path_m: Vec<f64>,
    pub tasks: Vec<Task>,
    chan_rng: ChaCha8Rng,
    task_rng: ChaCha8Rng,
}

impl World {
    pub fn new(
        scn: Scenario,
        params: EnvParams,
        mode: AssignMode,
        seed: u64,
    ) -> Result<World, EnvError> {
        let assignments = make_assignments(&scn, mode)?;
        let u_count = scn.uavs.len();
        let queues = scn
            .uavs
            .iter()
            .map(|_| VirtualQueue::new(scn.energy_budget_j_per_slot, params.v_weight))
            .collect();
        let kin = scn
            .uavs
            .iter()
            .map(|u| UavKinState {
                x_m: u.start_x_m,
                y_m: u.start_y_m,
                altitude_m: u.altitude_m,
                heading_rad: 0.0,
                speed_mps: 0.0,
            })
            .collect();
        let battery_j = scn.uavs.iter().map(|u| u.e_max_j).collect();
        let mut world = World {
            params,
            assignments,
            round: 0,
            slot_in_round: 0,
            global_slot: 0,
            done_episode: false,
            kin,
            queues,
            battery_j,
            round_path_m: vec![0.0; u_count],
            tasks: Vec::new(),
            chan_rng: stream(seed, &[tag::CHANNEL]),
            task_rng: stream(seed, &[tag::TASKS]),
            scn,
        };
        world.begin_round(0);
        Ok(world)
    }

    /// Restart the round sequence without touching queues or rng streams
    /// (long control runs wrap the round schedule to keep stepping).
    pub fn restart_rounds(&mut self) {
        self.round = 0;
        self.slot_in_round = 0;
        self.done_episode = false;
        for (b, u) in self.battery_j.iter_mut().zip(self.scn.uavs.iter()) {
            *b = u.e_max_j;
        }
        self.begin_round(0);
    }

    fn begin_round(&mut self, round: u32) {
        self.round = round;
        self.slot_in_round = 0;
        let picks = self.assignments[round as usize].subarea_for_uav.clone();
        for (u, &b) in picks.iter().enumerate() {
            let (cx, cy) = self.scn.subareas[b as usize].center();
            self.kin[u].x_m = cx;
            self.kin[u].y_m = cy;
            self.kin[u].speed_mps = 0.0;
            self.round_path_m[u] = 0.0;
        }
        self.draw_tasks();
    }

    fn draw_tasks(&mut self) {
        let model = self.scn.tasks.clone();
        let mut tasks = Vec::with_capacity(self.scn.uavs.len());
        for u in 0..self.scn.uavs.len() {
            let bits = if model.data_bits_max > model.data_bits_min {
                self.task_rng.gen_range(model.data_bits_min..model.data_bits_max)
            } else {
                model.data_bits_min
            };
            let sa = self.subarea_of(u);
            tasks.push(Task {
                data_bits: bits,
                intensity_cycles_per_bit: self.scn.subareas[sa].cycles_per_bit,
                deadline_s: model.deadline_s,
            });
        }
        self.tasks = tasks;
    }

    pub fn subarea_of(&self, uav: usize) -> usize {
        self.assignments[self.round as usize].subarea_for_uav[uav] as usize
    }

    fn norm_bounds(&self) -> (f64, f64, f64, f64, f64) {
        let max_uav_f = self.scn.uavs.iter().map(|u| u.f_flops).fold(1.0, f64::max);
        let max_ger_f = self.scn.gers.iter().map(|g| g.f_max_flops).fold(1.0, f64::max);
        (
            self.scn.region_width_m.max(1.0),
            self.scn.region_height_m.max(1.0),
            self.scn.airship.altitude_m.max(1.0),
            max_uav_f,
            max_ger_f,
        )
    }

    /// Live GER slots for a UAV's current subarea, in global index order,
    /// truncated at the observation capacity.
    pub fn mask_context(&self, uav: usize) -> MaskContext {
        let sa = self.subarea_of(uav);
        let cap = self.scn.max_gers_per_subarea as usize;
        let mut ids = self.scn.gers_in_subarea(sa);
        ids.truncate(cap);
        let flops: Vec<f64> = ids.iter().map(|&g| self.scn.gers[g].f_max_flops).collect();
        let task = &self.tasks[uav];
        let demand = task.data_bits * task.intensity_cycles_per_bit * self.scn.consts.cycles_per_flop
            / task.deadline_s.max(1e-12);
        let airship_open = !flops.iter().any(|&f| f >= demand);
        MaskContext { ger_ids: ids, ger_flops: flops, airship_open, demand_flops: demand }
    }

    pub fn observe(&self, uav: usize) -> Result<Observation, EnvError> {
        if uav >= self.scn.uavs.len() || self.done_episode {
            return Err(EnvError::Unassigned(uav as u32));
        }
        let (w, h, alt_cap, uav_f_cap, ger_f_cap) = self.norm_bounds();
        let sa = self.subarea_of(uav);
        let cap = self.scn.max_gers_per_subarea as usize;
        let ctx = self.mask_context(uav);
        let kin = &self.kin[uav];
        let mut v = Vec::with_capacity(obs_len(&self.scn));
        v.push(kin.x_m / w);
        v.push(kin.y_m / h);
        v.push(kin.altitude_m / alt_cap);
        v.push(self.scn.uavs[uav].f_flops / uav_f_cap);
        let mut mask = vec![0.0; cap];
        for slot in 0..cap {
            if let Some(&g) = ctx.ger_ids.get(slot) {
                let ger = &self.scn.gers[g];
                v.push(ger.x_m / w);
                v.push(ger.y_m / h);
                v.push(ger.f_max_flops / ger_f_cap);
                mask[slot] = 1.0;
            } else {
                v.extend_from_slice(&[0.0, 0.0, 0.0]);
            }
        }
        Ok(Observation { uav: uav as u32, subarea: sa as u32, vector: v, mask })
    }

    /// Argmax over unmasked target logits plus the clamped ratio channel.
    /// Padded slots, zero-compute GERs, and (unless every live GER falls
    /// short of the demand) the airship are excluded.
    pub fn decode_and_mask(&self, uav: usize, raw: &[f64]) -> Result<AgentAction, EnvError> {
        let expected = act_len(&self.scn);
        if raw.len() != expected {
            return Err(EnvError::ActionLength { expected, got: raw.len() });
        }
        let cap = self.scn.max_gers_per_subarea as usize;
        let ctx = self.mask_context(uav);
        let airship_slot = cap + 1;
        let mut best_slot = 0usize;
        let mut best_logit = raw[0];
        for slot in 1..=cap {
            let live = slot - 1 < ctx.ger_ids.len() && ctx.ger_flops[slot - 1] > 0.0;
            if live && raw[slot] > best_logit {
                best_logit = raw[slot];
                best_slot = slot;
            }
        }
        if ctx.airship_open && raw[airship_slot] > best_logit {
            best_slot = airship_slot;
        }
        let target = if best_slot == 0 {
            OffloadTarget::Local
        } else if best_slot == airship_slot {
            OffloadTarget::Airship
        } else {
            OffloadTarget::Ger(ctx.ger_ids[best_slot - 1] as u32)
        };
        let ratio = if best_slot == 0 { 0.0 } else { raw[expected - 1].clamp(0.0, 1.0) };
        Ok(AgentAction { target, target_slot: best_slot, offload_ratio: ratio })
    }

    /// Where the routing layer steers this slot, given the chosen target.
    fn route_goal(&self, uav: usize, action: &AgentAction) -> (f64, f64) {
        let center = self.scn.subareas[self.subarea_of(uav)].center();
        if self.params.route_to_center {
            return center;
        }
        match action.target {
            OffloadTarget::Ger(g) => {
                let ger = &self.scn.gers[g as usize];
                (ger.x_m, ger.y_m)
            }
            _ => center,
        }
    }

    fn expected_gain(&self, uav_pos: (f64, f64, f64), action: &AgentAction) -> Result<f64, ChannelError> {
        match action.target {
            OffloadTarget::Ger(g) => {
                let ger = &self.scn.gers[g as usize];
                mean_gain(uav_pos, (ger.x_m, ger.y_m, 0.0), &self.scn.consts)
            }
            OffloadTarget::Airship => {
                let a = &self.scn.airship;
                let d = {
                    let dx = uav_pos.0 - a.x_m;
                    let dy = uav_pos.1 - a.y_m;
                    let dz = uav_pos.2 - a.altitude_m;
                    (dx * dx + dy * dy + dz * dz).sqrt().max(self.scn.consts.ref_distance_m)
                };
                Ok(self.scn.consts.mean_rx_power / path_loss(d, LinkKind::Los, &self.scn.consts)?)
            }
            OffloadTarget::Local => Ok(0.0),
        }
    }

    fn sampled_gain(&mut self, uav_pos: (f64, f64, f64), action: &AgentAction) -> Result<f64, ChannelError> {
        match action.target {
            OffloadTarget::Ger(g) => {
                let ger = &self.scn.gers[g as usize];
                let link = link_sample_with_plos(
                    uav_pos,
                    (ger.x_m, ger.y_m, 0.0),
                    &self.scn.consts,
                    None,
                    &mut self.chan_rng,
                )?;
                Ok(link.gain)
            }
            OffloadTarget::Airship => {
                let a = &self.scn.airship;
                let link = link_sample_with_plos(
                    uav_pos,
                    (a.x_m, a.y_m, a.altitude_m),
                    &self.scn.consts,
                    Some(1.0),
                    &mut self.chan_rng,
                )?;
                Ok(link.gain)
            }
            OffloadTarget::Local => Ok(0.0),
        }
    }

    /// Remote compute share for `uav` under the current joint selection.
    fn alloc_share(&self, uav: usize, actions: &[AgentAction]) -> f64 {
        let mine = &actions[uav];
        if mine.offload_ratio <= 0.0 {
            return 0.0;
        }
        let node_flops = match mine.target {
            OffloadTarget::Local => return 0.0,
            OffloadTarget::Ger(g) => self.scn.gers[g as usize].f_max_flops,
            OffloadTarget::Airship => self.scn.airship.f_flops,
        };
        let demand = |u: usize| {
            let t = &self.tasks[u];
            actions[u].offload_ratio
                * t.data_bits
                * t.intensity_cycles_per_bit
                * self.scn.consts.cycles_per_flop
        };
        let selectors: Vec<usize> = (0..actions.len())
            .filter(|&u| actions[u].target == mine.target && actions[u].offload_ratio > 0.0)
            .collect();
        if self.params.proportional_alloc {
            let total: f64 = selectors.iter().map(|&u| demand(u)).sum();
            if total <= 0.0 {
                node_flops / selectors.len() as f64
            } else {
                node_flops * demand(uav) / total
            }
        } else {
            node_flops / selectors.len() as f64
        }
    }

    /// Advance every UAV one slot. Actions arrive as raw policy vectors in
    /// UAV order; the outcome carries per-agent transitions plus the full
    /// slot records.
    pub fn step(&mut self, raw_actions: &[Vec<f64>]) -> Result<StepOutcome, EnvError> {
        let u_count = self.scn.uavs.len();
        if raw_actions.len() != u_count {
            return Err(EnvError::ActionCount { expected: u_count, got: raw_actions.len() });
        }
        let dt = self.scn.time.slot_seconds;
        let mut actions = Vec::with_capacity(u_count);
        let mut obs_before = Vec::with_capacity(u_count);
        for u in 0..u_count {
            obs_before.push(self.observe(u)?);
            actions.push(self.decode_and_mask(u, &raw_actions[u])?);
        }
        // movement first so rates and separations use post-move positions
        let mut steps = Vec::with_capacity(u_count);
        for u in 0..u_count {
            let goal = self.route_goal(u, &actions[u]);
            let params = RouteParams::from_scenario(&self.scn, u);
            let step = route_toward(&self.kin[u], goal, &self.scn.risk_sources, &params)?;
            let next = advance(
                &self.kin[u],
                step.heading_rad,
                step.speed_mps,
                self.scn.uavs[u].v_max_mps,
                dt,
            )?;
            self.kin[u] = next;
            steps.push(step);
        }
        let mut costs = Vec::with_capacity(u_count);
        let mut decisions = Vec::with_capacity(u_count);
        let mut rates = Vec::with_capacity(u_count);
        for u in 0..u_count {
            let action = actions[u];
            let pos = (self.kin[u].x_m, self.kin[u].y_m, self.kin[u].altitude_m);
            let rate = if action.offload_ratio > 0.0 && action.target != OffloadTarget::Local {
                let gain = if self.params.mean_channel {
                    self.expected_gain(pos, &action)?
                } else {
                    self.sampled_gain(pos, &action)?
                };
                transmission_rate(gain, &self.scn.consts)
            } else {
                0.0
            };
            let decision = SlotDecision {
                local_fraction: 1.0 - action.offload_ratio,
                target: if action.offload_ratio > 0.0 { action.target } else { OffloadTarget::Local },
                alloc_flops: self.alloc_share(u, &actions),
                heading_rad: steps[u].heading_rad,
                speed_mps: steps[u].speed_mps,
            };
            let cost = slot_cost(
                &self.tasks[u],
                &decision,
                self.scn.uavs[u].f_flops,
                rate,
                &steps[u].detect_distances_m,
                &self.scn.consts,
            )?;
            rates.push(rate);
            decisions.push(decision);
            costs.push(cost);
        }
        // mobility flags on the executed step
        let mut violations: Vec<Vec<Violation>> = vec![Vec::new(); u_count];
        let total_slots = self.scn.time.total_slots().max(1) as f64;
        for u in 0..u_count {
            let spec = &self.scn.uavs[u];
            let step_dist = decisions[u].speed_mps * dt;
            let lower = dt * spec.d_min_mps / total_slots;
            let upper = dt * spec.v_max_mps;
            if step_dist < lower - 1e-9 || step_dist > upper + 1e-9 {
                violations[u].push(Violation::new(
                    Constraint::StepDistance,
                    &[u as u32],
                    alloc::format!("step {step_dist:.2} m outside [{lower:.2}, {upper:.2}]"),
                ));
            }
            self.round_path_m[u] += step_dist;
            if self.round_path_m[u] > spec.l_max_m + 1e-9 {
                violations[u].push(Violation::new(
                    Constraint::PathLength,
                    &[u as u32],
                    alloc::format!("round path {:.1} m > {:.1} m", self.round_path_m[u], spec.l_max_m),
                ));
            }
        }
        for a in 0..u_count {
            for b in a + 1..u_count {
                let d = slot_distance(
                    (self.kin[a].x_m, self.kin[a].y_m),
                    (self.kin[b].x_m, self.kin[b].y_m),
                );
                if d < self.scn.safety_distance_m {
                    let v = Violation::new(
                        Constraint::UavSeparation,
                        &[a as u32, b as u32],
                        alloc::format!("separation {d:.1} m < {:.1} m", self.scn.safety_distance_m),
                    );
                    violations[a].push(v.clone());
                    violations[b].push(v);
                }
            }
        }
        let done = self.slot_in_round + 1 >= self.scn.time.slots_per_round;
        let mut records = Vec::with_capacity(u_count);
        let mut rewards = Vec::with_capacity(u_count);
        for u in 0..u_count {
            let task = &self.tasks[u];
            let mut v = deadline_violations(&costs[u], task, u as u32);
            v.extend(violations[u].drain(..));
            self.battery_j[u] -= costs[u].e_total_j;
            if self.battery_j[u] < 0.0 {
                self.battery_j[u] = 0.0;
                v.push(Violation::new(
                    Constraint::EnergyBudget,
                    &[u as u32],
                    alloc::format!("battery exhausted at slot {}", self.global_slot),
                ));
            }
            let q_before = self.queues[u].q_value;
            let y_k = self.queues[u].push(costs[u].e_total_j);
            let reward = -(self.params.v_weight * costs[u].t_total_s + q_before * y_k)
                / self.params.reward_scale
                - self.params.violation_penalty * v.len() as f64;
            rewards.push(reward);
            records.push(SlotRecord {
                global_slot: self.global_slot,
                round: self.round,
                slot_in_round: self.slot_in_round,
                uav: u as u32,
                action: actions[u],
                decision: decisions[u],
                cost: costs[u],
                rate_bps: rates[u],
                x_m: self.kin[u].x_m,
                y_m: self.kin[u].y_m,
                h_m: self.kin[u].altitude_m,
                q_before,
                q_after: self.queues[u].q_value,
                y_k,
                violations: v,
                reward,
            });
        }
        let mut next_obs = Vec::with_capacity(u_count);
        for u in 0..u_count {
            next_obs.push(self.observe(u)?);
        }
        let transitions = (0..u_count)
            .map(|u| Transition {
                agent: u as u32,
                obs: obs_before[u].clone(),
                action_raw: raw_actions[u].clone(),
                reward: rewards[u],
                next_obs: next_obs[u].clone(),
                done,
            })
            .collect();
        // bookkeeping for the next slot
        self.global_slot += 1;
        if done {
            if self.round + 1 >= self.scn.time.rounds {
                self.done_episode = true;
            } else {
                let next_round = self.round + 1;
                self.begin_round(next_round);
            }
        } else {
            self.slot_in_round += 1;
            self.draw_tasks();
        }
        Ok(StepOutcome { transitions, records })
    }

    /// Enumerate the legal (target, ratio) grid at the given state, costed
    /// with mean-channel rates and uncontended allocation. Candidate order
    /// is local, then GER slots ascending, then airship, ratios ascending.
    pub fn candidate_decisions(
        &self,
        uav: usize,
        kin_after: &UavKinState,
        route_step_speed: f64,
        route_heading: f64,
        detect: &[Vec<f64>],
    ) -> Result<Vec<(AgentAction, SlotCost)>, EnvError> {
        let ctx = self.mask_context(uav);
        let task = &self.tasks[uav];
        let pos = (kin_after.x_m, kin_after.y_m, kin_after.altitude_m);
        let grid = self.params.ratio_grid.max(2);
        let mut out = Vec::new();
        let mut eval = |action: AgentAction| -> Result<(), EnvError> {
            let rate = if action.offload_ratio > 0.0 && action.target != OffloadTarget::Local {
                transmission_rate(self.expected_gain(pos, &action)?, &self.scn.consts)
            } else {
                0.0
            };
            let alloc = match action.target {
                OffloadTarget::Local => 0.0,
                OffloadTarget::Ger(g) => self.scn.gers[g as usize].f_max_flops,
                OffloadTarget::Airship => self.scn.airship.f_flops,
            };
            let decision = SlotDecision {
                local_fraction: 1.0 - action.offload_ratio,
                target: if action.offload_ratio > 0.0 { action.target } else { OffloadTarget::Local },
                alloc_flops: if action.offload_ratio > 0.0 { alloc } else { 0.0 },
                heading_rad: route_heading,
                speed_mps: route_step_speed,
            };
            let cost = slot_cost(task, &decision, self.scn.uavs[uav].f_flops, rate, detect, &self.scn.consts)?;
            out.push((action, cost));
            Ok(())
        };
        eval(AgentAction { target: OffloadTarget::Local, target_slot: 0, offload_ratio: 0.0 })?;
        for (slot, (&g, &f)) in ctx.ger_ids.iter().zip(ctx.ger_flops.iter()).enumerate() {
            if f <= 0.0 {
                continue;
            }
            for k in 1..grid {
                let p = k as f64 / (grid - 1) as f64;
                eval(AgentAction {
                    target: OffloadTarget::Ger(g as u32),
                    target_slot: slot + 1,
                    offload_ratio: p,
                })?;
            }
        }
        if ctx.airship_open {
            let slot = self.scn.max_gers_per_subarea as usize + 1;
            for k in 1..grid {
                let p = k as f64 / (grid - 1) as f64;
                eval(AgentAction { target: OffloadTarget::Airship, target_slot: slot, offload_ratio: p })?;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub transitions: Vec<Transition>,
    pub records: Vec<SlotRecord>,
}

/// A policy maps (world view, agent, observation) to a raw action vector.
pub trait SlotPolicy {
    fn act(&self, world: &World, uav: usize, obs: &Observation, rng: &mut ChaCha8Rng) -> Vec<f64>;
}

/// Uniform logits and ratio.
pub struct RandomPolicy;

impl SlotPolicy for RandomPolicy {
    fn act(&self, world: &World, _uav: usize, _obs: &Observation, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = act_len(&world.scn);
        let mut v: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        v.push(rng.gen_range(0.0..1.0));
        v
    }
}

/// Always compute on board.
pub struct GreedyLocalPolicy;

impl SlotPolicy for GreedyLocalPolicy {
    fn act(&self, world: &World, _uav: usize, _obs: &Observation, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = act_len(&world.scn);
        let mut v = vec![-1.0; n];
        v[0] = 1.0;
        v[n - 1] = 0.0;
        v
    }
}

/// Exhaustive per-slot minimizer of the drift-plus-penalty surrogate over
/// the candidate grid, evaluated at the post-move state. Pair it with
/// `route_to_center` and `mean_channel` so the executed cost equals the
/// candidate cost.
pub struct OraclePolicy;

impl SlotPolicy for OraclePolicy {
    fn act(&self, world: &World, uav: usize, _obs: &Observation, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        let center = world.scn.subareas[world.subarea_of(uav)].center();
        let params = RouteParams::from_scenario(&world.scn, uav);
        let step = route_toward(&world.kin[uav], center, &world.scn.risk_sources, &params)
            .expect("oracle routing failed");
        let after = advance(
            &world.kin[uav],
            step.heading_rad,
            step.speed_mps,
            world.scn.uavs[uav].v_max_mps,
            world.scn.time.slot_seconds,
        )
        .expect("oracle advance failed");
        let cands = world
            .candidate_decisions(uav, &after, step.speed_mps, step.heading_rad, &step.detect_distances_m)
            .expect("oracle candidate evaluation failed");
        let costs: Vec<CandidateCost> = cands
            .iter()
            .map(|(_, c)| CandidateCost { t_total_s: c.t_total_s, e_total_j: c.e_total_j })
            .collect();
        let best = per_slot_argmin(&costs, &world.queues[uav]).expect("non-empty candidate set");
        let (action, _) = cands[best];
        let n = act_len(&world.scn);
        let mut raw = vec![-5.0; n];
        raw[action.target_slot] = 5.0;
        raw[n - 1] = action.offload_ratio;
        raw
    }
}

/// Denoising-chain actor: one network per agent, exploration scales the
/// injected chain noise (zero scale gives the deterministic action mean).
pub struct DiffusionPolicy {
    pub nets: Vec<EpsilonNet>,
    pub schedule: NoiseSchedule,
    pub noise_scale: f64,
}

impl SlotPolicy for DiffusionPolicy {
    fn act(&self, _world: &World, uav: usize, obs: &Observation, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let net = &self.nets[uav];
        let noises = Noises::draw(net.x_dim, self.schedule.steps(), rng).scaled(self.noise_scale);
        let (x0, _) = reverse_sample_with_noises(net, &self.schedule, &obs.vector, &noises)
            .expect("diffusion sampling failed");
        x0
    }
}

/// Plain deterministic actor with additive Gaussian exploration.
pub struct GaussianPolicy {
    pub nets: Vec<Mlp>,
    pub noise_scale: f64,
}

impl SlotPolicy for GaussianPolicy {
    fn act(&self, _world: &World, uav: usize, obs: &Observation, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut out = self.nets[uav].forward(&obs.vector).expect("actor forward failed");
        for v in out.iter_mut() {
            *v += self.noise_scale * rng.sample::<f64, _>(StandardNormal);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub mean_latency_s: f64,
    pub mean_energy_j: f64,
    pub mean_reward: f64,
    pub final_q: Vec<f64>,
    pub violation_count: usize,
    pub e_tran_total_j: f64,
    pub slots: usize,
}

#[derive(Debug)]
pub struct EpisodeResult {
    pub transitions: Vec<Transition>,
    pub records: Vec<SlotRecord>,
    pub metrics: EpisodeMetrics,
}

/// Roll one full episode: fresh world, one assignment pass, all rounds.
pub fn run_episode<P: SlotPolicy + ?Sized>(
    scn: &Scenario,
    params: &EnvParams,
    mode: AssignMode,
    policy: &P,
    episode_seed: u64,
    collect_transitions: bool,
) -> Result<EpisodeResult, EnvError> {
    let mut world = World::new(scn.clone(), params.clone(), mode, episode_seed)?;
    let mut explore = stream(episode_seed, &[tag::EXPLORE]);
    let mut transitions = Vec::new();
    let mut records = Vec::new();
    while !world.done_episode {
        let mut raw = Vec::with_capacity(scn.uavs.len());
        for u in 0..scn.uavs.len() {
            let obs = world.observe(u)?;
            raw.push(policy.act(&world, u, &obs, &mut explore));
        }
        let out = world.step(&raw)?;
        if collect_transitions {
            transitions.extend(out.transitions);
        }
        records.extend(out.records);
    }
    let metrics = summarize(&records, &world);
    Ok(EpisodeResult { transitions, records, metrics })
}

fn summarize(records: &[SlotRecord], world: &World) -> EpisodeMetrics {
    let n = records.len().max(1) as f64;
    EpisodeMetrics {
        mean_latency_s: records.iter().map(|r| r.cost.t_total_s).sum::<f64>() / n,
        mean_energy_j: records.iter().map(|r| r.cost.e_total_j).sum::<f64>() / n,
        mean_reward: records.iter().map(|r| r.reward).sum::<f64>() / n,
        final_q: world.queues.iter().map(|q| q.q_value).collect(),
        violation_count: records.iter().map(|r| r.violations.len()).sum(),
        e_tran_total_j: records.iter().map(|r| r.cost.e_tran_j).sum(),
        slots: records.len(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlResult {
    pub slots: usize,
    pub final_q: Vec<f64>,
    pub q_over_t: Vec<f64>,
    pub mean_energy_j: f64,
    pub mean_latency_s: f64,
    pub violation_count: usize,
}

/// Long-horizon control run: wraps the round schedule until `total_slots`
/// world steps have executed, keeping the virtual queues across wraps.
pub fn run_control<P: SlotPolicy + ?Sized>(
    scn: &Scenario,
    params: &EnvParams,
    mode: AssignMode,
    policy: &P,
    total_slots: usize,
    seed: u64,
) -> Result<ControlResult, EnvError> {
    let mut world = World::new(scn.clone(), params.clone(), mode, seed)?;
    let mut explore = stream(seed, &[tag::EXPLORE]);
    let mut energy_sum = 0.0;
    let mut latency_sum = 0.0;
    let mut violation_count = 0usize;
    let mut done_slots = 0usize;
    while done_slots < total_slots {
        if world.done_episode {
            world.restart_rounds();
        }
        let mut raw = Vec::with_capacity(scn.uavs.len());
        for u in 0..scn.uavs.len() {
            let obs = world.observe(u)?;
            raw.push(policy.act(&world, u, &obs, &mut explore));
        }
        let out = world.step(&raw)?;
        for r in &out.records {
            energy_sum += r.cost.e_total_j;
            latency_sum += r.cost.t_total_s;
            violation_count += r.violations.len();
        }
        done_slots += 1;
    }
    let denom = (done_slots * scn.uavs.len()).max(1) as f64;
    Ok(ControlResult {
        slots: done_slots,
        final_q: world.queues.iter().map(|q| q.q_value).collect(),
        q_over_t: world.queues.iter().map(|q| q.q_value / done_slots.max(1) as f64).collect(),
        mean_energy_j: energy_sum / denom,
        mean_latency_s: latency_sum / denom,
        violation_count,
    })
}
