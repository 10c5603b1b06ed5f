//! Subarea-to-UAV matching: a shortest-augmenting-path assignment solver
//! with dual potentials (optimality certified by complementary slackness)
//! plus the round-iterated matching over a shrinking subarea set.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::kinematics::slot_distance;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub entries: Vec<f64>,
    /// Dual potentials, filled by the solver.
    pub row_labels: Vec<f64>,
    pub col_labels: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count must be rows*cols");
        CostMatrix { rows, cols, entries, row_labels: vec![0.0; rows], col_labels: vec![0.0; cols] }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AssignError {
    #[error("matrix contains a non-finite entry at ({0}, {1})")]
    Infeasible(usize, usize),
    #[error("matrix needs rows <= cols, got {0}x{1}")]
    Shape(usize, usize),
    #[error("{0}")]
    CardinalityMismatch(String),
}

/// Minimum-cost injective row→column assignment for rows ≤ cols.
///
/// Shortest augmenting paths over the dual-feasible reduced costs, one row
/// at a time; ties in the delta scan resolve to the lowest column index, so
/// results are deterministic. On return `assignment[r]` is the column of row
/// r, the labels satisfy α_r + β_c ≤ cost(r,c) everywhere, and matched pairs
/// are tight.
pub fn hungarian_solve(m: &mut CostMatrix) -> Result<(Vec<usize>, f64), AssignError> {
    let n = m.rows;
    let w = m.cols;
    if n > w {
        return Err(AssignError::Shape(n, w));
    }
    for r in 0..n {
        for c in 0..w {
            if !m.get(r, c).is_finite() {
                return Err(AssignError::Infeasible(r, c));
            }
        }
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }

    // 1-indexed duals and matching; p[j] = row matched to column j.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; w + 1];
    let mut p = vec![0usize; w + 1];
    let mut way = vec![0usize; w + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; w + 1];
        let mut used = vec![false; w + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=w {
                if !used[j] {
                    let cur = m.get(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=w {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![usize::MAX; n];
    for j in 1..=w {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    let total: f64 = assignment.iter().enumerate().map(|(r, &c)| m.get(r, c)).sum();
    for r in 0..n {
        m.row_labels[r] = u[r + 1];
    }
    for c in 0..w {
        m.col_labels[c] = v[c + 1];
    }
    debug_assert!(labels_certify(m, &assignment));
    Ok((assignment, total))
}

/// Complementary-slackness check: duals feasible everywhere, tight on
/// matched edges.
pub fn labels_certify(m: &CostMatrix, assignment: &[usize]) -> bool {
    for r in 0..m.rows {
        for c in 0..m.cols {
            if m.row_labels[r] + m.col_labels[c] > m.get(r, c) + 1e-7 {
                return false;
            }
        }
    }
    assignment.iter().enumerate().all(|(r, &c)| {
        (m.row_labels[r] + m.col_labels[c] - m.get(r, c)).abs() <= 1e-7
    })
}

/// Positional snapshot the cost matrix needs per UAV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavSnapshot {
    pub x_m: f64,
    pub y_m: f64,
    pub e_rema_j: f64,
}

fn minmax_norm(values: &mut [f64]) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    for v in values.iter_mut() {
        *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
    }
}

/// Matching cost of UAV u vs subarea b: normalized
/// distance + data + intensity − remaining energy − mean GER compute.
/// Each term is min-max normalized over the current matrix; with
/// `normalize` off the raw signed sum is used instead.
pub fn build_cost_matrix(
    scn: &Scenario,
    uavs: &[UavSnapshot],
    remaining_subareas: &[usize],
    normalize: bool,
) -> CostMatrix {
    let rows = uavs.len();
    let cols = remaining_subareas.len();
    let mut dist = Vec::with_capacity(rows * cols);
    let mut data = Vec::with_capacity(rows * cols);
    let mut intensity = Vec::with_capacity(rows * cols);
    let mut energy = Vec::with_capacity(rows * cols);
    let mut power = Vec::with_capacity(rows * cols);
    for u in uavs {
        for &b in remaining_subareas {
            let sa = &scn.subareas[b];
            let c = sa.center();
            dist.push(slot_distance((u.x_m, u.y_m), c));
            data.push(sa.data_bits);
            intensity.push(sa.cycles_per_bit);
            energy.push(u.e_rema_j);
            power.push(sa.mean_ger_flops);
        }
    }
    if normalize {
        for term in [&mut dist, &mut data, &mut intensity, &mut energy, &mut power] {
            minmax_norm(term);
        }
    }
    let entries: Vec<f64> = (0..rows * cols)
        .map(|i| dist[i] + data[i] + intensity[i] - energy[i] - power[i])
        .collect();
    CostMatrix::new(rows, cols, entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundAssignment {
    pub round: u32,
    /// subarea_for_uav[u] = global subarea index assigned to UAV u.
    pub subarea_for_uav: Vec<u32>,
    /// Matching-cost entry behind each pick, same order as subarea_for_uav.
    pub per_uav_cost: Vec<f64>,
    pub total_cost: f64,
}

/// Expected energy spend for one round operating subarea `b`, used to update
/// the remaining-energy term between rounds: ferry propulsion to the subarea
/// center plus per-slot propulsion and a half-local compute estimate.
pub fn round_energy_estimate(scn: &Scenario, from: (f64, f64), b: usize) -> f64 {
    let sa = &scn.subareas[b];
    let c = &scn.consts;
    let v = scn.uavs.first().map(|u| u.v_max_mps).unwrap_or(30.0);
    let dt = scn.time.slot_seconds;
    let ferry_slots = slot_distance(from, sa.center()) / (v * dt).max(1e-9);
    let ferry = ferry_slots * c.propulsion_coeff * v * v;
    let per_slot = 0.25 * c.propulsion_coeff * v * v
        + 0.5 * c.capacitance_coeff * scn.uavs.first().map(|u| u.f_flops).unwrap_or(0.0).powi(2)
            * sa.data_bits
            * sa.cycles_per_bit;
    ferry + scn.time.slots_per_round as f64 * per_slot
}

/// Run one matching per round on the shrinking subarea set. UAV positions
/// move to their assigned centers and remaining energy drops by the round
/// estimate between rounds.
pub fn assign_rounds(scn: &Scenario) -> Result<Vec<RoundAssignment>, AssignError> {
    let u_count = scn.uavs.len();
    let expected = u_count * scn.time.rounds as usize;
    if scn.subareas.len() != expected {
        return Err(AssignError::CardinalityMismatch(format!(
            "{} subareas for {} UAVs x {} rounds",
            scn.subareas.len(),
            u_count,
            scn.time.rounds
        )));
    }
    let mut snaps: Vec<UavSnapshot> = scn
        .uavs
        .iter()
        .map(|u| UavSnapshot { x_m: u.start_x_m, y_m: u.start_y_m, e_rema_j: u.e_max_j })
        .collect();
    let mut remaining: Vec<usize> = (0..scn.subareas.len()).collect();
    let mut out = Vec::with_capacity(scn.time.rounds as usize);
    for round in 0..scn.time.rounds {
        let mut matrix = build_cost_matrix(scn, &snaps, &remaining, true);
        let (assignment, total_cost) = hungarian_solve(&mut matrix)?;
        let picks: Vec<u32> = assignment.iter().map(|&c| remaining[c] as u32).collect();
        let per_uav_cost: Vec<f64> =
            assignment.iter().enumerate().map(|(u, &c)| matrix.get(u, c)).collect();
        for (u, &sa_idx) in picks.iter().enumerate() {
            let spend = round_energy_estimate(scn, (snaps[u].x_m, snaps[u].y_m), sa_idx as usize);
            let center = scn.subareas[sa_idx as usize].center();
            snaps[u].x_m = center.0;
            snaps[u].y_m = center.1;
            snaps[u].e_rema_j = (snaps[u].e_rema_j - spend).max(0.0);
        }
        let mut used: Vec<usize> = assignment.clone();
        used.sort_unstable_by(|a, b| b.cmp(a));
        for c in used {
            remaining.remove(c);
        }
        out.push(RoundAssignment { round, subarea_for_uav: picks, per_uav_cost, total_cost });
    }
    Ok(out)
}
