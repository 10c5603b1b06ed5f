//! Latency and energy bookkeeping for one UAV's slot decision.
//!
//! The local fraction ς ∈ [0,1] is the share of the task computed on the
//! UAV; 1−ς goes to the chosen remote target. Latency charges ς·D locally
//! and (1−ς)·D over the link; compute energy charges the local share by
//! default (the whole task if `comp_energy_full_task` is set).

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::scenario::{Constraint, PhysConstants, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub data_bits: f64,
    pub intensity_cycles_per_bit: f64,
    pub deadline_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OffloadTarget {
    Local,
    /// Global GER index.
    Ger(u32),
    Airship,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotDecision {
    /// ς: share of the task computed on the UAV itself.
    pub local_fraction: f64,
    pub target: OffloadTarget,
    /// Remote compute granted to this UAV this slot (0 when local).
    pub alloc_flops: f64,
    pub heading_rad: f64,
    pub speed_mps: f64,
}

impl SlotDecision {
    pub fn all_local(heading_rad: f64, speed_mps: f64) -> Self {
        SlotDecision {
            local_fraction: 1.0,
            target: OffloadTarget::Local,
            alloc_flops: 0.0,
            heading_rad,
            speed_mps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SlotCost {
    pub t_local_s: f64,
    pub t_tran_s: f64,
    pub t_comp_s: f64,
    pub t_ger_s: f64,
    pub t_total_s: f64,
    pub e_tran_j: f64,
    pub e_comp_j: f64,
    pub e_prop_j: f64,
    pub e_dete_j: f64,
    pub e_total_j: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CostError {
    #[error("offloading {0} of the task with zero link rate")]
    ZeroRateOffload(f64),
    #[error("offloading {0} of the task with zero remote allocation")]
    ZeroAllocOffload(f64),
}

/// Local compute time: ς·D·C / (f/cycles_per_flop).
pub fn local_latency(task: &Task, local_fraction: f64, f_flops: f64, consts: &PhysConstants) -> f64 {
    let cycles = local_fraction * task.data_bits * task.intensity_cycles_per_bit;
    cycles * consts.cycles_per_flop / f_flops
}

/// Transmission and remote-compute time for the offloaded share.
/// Returns (t_tran, t_comp, t_ger = t_tran + t_comp).
pub fn offload_latency(
    task: &Task,
    local_fraction: f64,
    rate_bps: f64,
    alloc_flops: f64,
    consts: &PhysConstants,
) -> Result<(f64, f64, f64), CostError> {
    let remote = 1.0 - local_fraction;
    if remote <= 0.0 {
        return Ok((0.0, 0.0, 0.0));
    }
    if rate_bps <= 0.0 {
        return Err(CostError::ZeroRateOffload(remote));
    }
    if alloc_flops <= 0.0 {
        return Err(CostError::ZeroAllocOffload(remote));
    }
    let t_tran = remote * task.data_bits / rate_bps;
    let t_comp =
        remote * task.data_bits * task.intensity_cycles_per_bit * consts.cycles_per_flop / alloc_flops;
    Ok((t_tran, t_comp, t_tran + t_comp))
}

/// Energy terms for an already-latency-resolved decision.
/// `detect_distances_m` is the per-risk list of segment-midpoint distances
/// from the routed step (empty for out-of-range risks).
pub fn slot_energy(
    task: &Task,
    decision: &SlotDecision,
    f_flops: f64,
    t_tran_s: f64,
    detect_distances_m: &[Vec<f64>],
    consts: &PhysConstants,
) -> (f64, f64, f64, f64) {
    let e_tran = consts.tx_power_w * t_tran_s;
    let comp_share = if consts.comp_energy_full_task { 1.0 } else { decision.local_fraction };
    let e_comp = consts.capacitance_coeff
        * f_flops
        * f_flops
        * comp_share
        * task.data_bits
        * task.intensity_cycles_per_bit;
    let e_prop = consts.propulsion_coeff * decision.speed_mps * decision.speed_mps;
    let e_dete = consts.detect_unit_energy
        * detect_distances_m
            .iter()
            .map(|d| d.iter().sum::<f64>())
            .sum::<f64>();
    (e_tran, e_comp, e_prop, e_dete)
}

/// Assemble the full latency/energy breakdown for one UAV-slot.
pub fn slot_cost(
    task: &Task,
    decision: &SlotDecision,
    f_uav_flops: f64,
    rate_bps: f64,
    detect_distances_m: &[Vec<f64>],
    consts: &PhysConstants,
) -> Result<SlotCost, CostError> {
    let t_local = local_latency(task, decision.local_fraction, f_uav_flops, consts);
    let (t_tran, t_comp, t_ger) =
        offload_latency(task, decision.local_fraction, rate_bps, decision.alloc_flops, consts)?;
    let (e_tran, e_comp, e_prop, e_dete) =
        slot_energy(task, decision, f_uav_flops, t_tran, detect_distances_m, consts);
    Ok(SlotCost {
        t_local_s: t_local,
        t_tran_s: t_tran,
        t_comp_s: t_comp,
        t_ger_s: t_ger,
        t_total_s: t_local + t_ger,
        e_tran_j: e_tran,
        e_comp_j: e_comp,
        e_prop_j: e_prop,
        e_dete_j: e_dete,
        e_total_j: e_tran + e_comp + e_prop + e_dete,
    })
}

/// Deadline flags: local work must finish by τ, and so must the offloaded
/// transmission+compute leg. Never clipped, only reported.
pub fn deadline_violations(cost: &SlotCost, task: &Task, uav: u32) -> Vec<Violation> {
    let mut v = Vec::new();
    if cost.t_local_s > task.deadline_s + 1e-12 {
        v.push(Violation::new(
            Constraint::LocalDeadline,
            &[uav],
            alloc::format!("local compute {:.4} s > deadline {:.4} s", cost.t_local_s, task.deadline_s),
        ));
    }
    if cost.t_ger_s > task.deadline_s + 1e-12 {
        v.push(Violation::new(
            Constraint::RemoteDeadline,
            &[uav],
            alloc::format!("remote leg {:.4} s > deadline {:.4} s", cost.t_ger_s, task.deadline_s),
        ));
    }
    v
}

/// Fleet latency for one slot: Σ_u (t_local + t_ger).
pub fn total_latency(costs: &[SlotCost]) -> f64 {
    costs.iter().map(|c| c.t_local_s + c.t_ger_s).sum()
}
