//! Virtual energy queue and the per-slot drift-plus-penalty transform.
//!
//! The queue integrates energy overspend against the per-slot budget;
//! keeping it stable enforces the long-term average-energy constraint. Each
//! slot's decision then minimizes V·latency + Q·(energy − budget) over a
//! candidate set, which trades instantaneous latency against queue growth.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualQueue {
    pub q_value: f64,
    /// Per-slot average energy budget (J).
    pub budget: f64,
    /// Latency weight V ≥ 0.
    pub penalty_weight: f64,
    /// Decision-invariant bound constant; never computed, reported as 0.
    pub theta: f64,
    /// Q after each update (append-only).
    pub q_history: Vec<f64>,
    /// Excess y_k = e_total − budget for each update (append-only).
    pub y_history: Vec<f64>,
}

impl VirtualQueue {
    pub fn new(budget: f64, penalty_weight: f64) -> Self {
        VirtualQueue {
            q_value: 0.0,
            budget,
            penalty_weight,
            theta: 0.0,
            q_history: Vec::new(),
            y_history: Vec::new(),
        }
    }

    /// Apply one slot's energy draw: Q ← max(Q + e − Ē, 0). Returns y_k.
    pub fn push(&mut self, e_total_j: f64) -> f64 {
        let (next, y) = queue_next(self.q_value, e_total_j, self.budget);
        self.q_value = next;
        self.q_history.push(next);
        self.y_history.push(y);
        y
    }
}

/// Pure single-step queue recursion.
pub fn queue_next(q_value: f64, e_total_j: f64, budget: f64) -> (f64, f64) {
    let y = e_total_j - budget;
    ((q_value + y).max(0.0), y)
}

/// Drift-plus-penalty surrogate for one candidate outcome.
pub fn per_slot_cost(q: &VirtualQueue, t_total_s: f64, e_total_j: f64) -> f64 {
    q.penalty_weight * t_total_s + q.q_value * (e_total_j - q.budget)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateCost {
    pub t_total_s: f64,
    pub e_total_j: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LyapunovError {
    #[error("empty candidate set")]
    EmptyCandidates,
}

/// Index of the candidate minimizing the surrogate; ties break toward lower
/// energy, then lower index.
pub fn per_slot_argmin(candidates: &[CandidateCost], q: &VirtualQueue) -> Result<usize, LyapunovError> {
    if candidates.is_empty() {
        return Err(LyapunovError::EmptyCandidates);
    }
    let mut best = 0;
    let mut best_cost = per_slot_cost(q, candidates[0].t_total_s, candidates[0].e_total_j);
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let cost = per_slot_cost(q, c.t_total_s, c.e_total_j);
        let better = cost < best_cost
            || (cost == best_cost && c.e_total_j < candidates[best].e_total_j);
        if better {
            best = i;
            best_cost = cost;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Q(T)/T: must shrink toward 0 for a stable queue.
    pub q_over_t: f64,
    /// Mean of the recorded excesses y_k.
    pub mean_excess: f64,
}

pub fn stability_report(q: &VirtualQueue) -> Option<StabilityReport> {
    let t = q.q_history.len();
    if t < 2 {
        return None;
    }
    Some(StabilityReport {
        q_over_t: q.q_history[t - 1] / t as f64,
        mean_excess: q.y_history.iter().sum::<f64>() / t as f64,
    })
}
