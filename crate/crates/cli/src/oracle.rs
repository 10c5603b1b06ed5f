//! Brute-force reference implementations shipped in the binary so results
//! can be checked without the test harness.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};

use skyrescue_core::costmodel::OffloadTarget;
use skyrescue_core::env::{AgentAction, AssignMode, EnvParams, World};
use skyrescue_core::costmodel::SlotCost;
use skyrescue_core::kinematics::{advance, route_toward, RouteParams};
use skyrescue_core::lyapunov::VirtualQueue;

use crate::io;

pub const MAX_ORACLE_N: usize = 8;

/// Exhaustive assignment minimum by permutation enumeration. Rows must not
/// exceed columns, and rows are capped at MAX_ORACLE_N.
pub fn permutation_assignment(entries: &[Vec<f64>]) -> Result<(Vec<usize>, f64)> {
    let rows = entries.len();
    if rows == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let cols = entries[0].len();
    if entries.iter().any(|r| r.len() != cols) {
        bail!("ragged matrix");
    }
    if rows > cols {
        bail!("need rows <= cols, got {rows}x{cols}");
    }
    if rows > MAX_ORACLE_N || cols > MAX_ORACLE_N {
        bail!("too large: {rows}x{cols} exceeds the {MAX_ORACLE_N}-row enumeration cap");
    }
    fn rec(
        m: &[Vec<f64>],
        row: usize,
        used: &mut [bool],
        picks: &mut Vec<usize>,
        best: &mut (Vec<usize>, f64),
    ) {
        if row == m.len() {
            let cost: f64 = picks.iter().enumerate().map(|(r, &c)| m[r][c]).sum();
            if cost < best.1 {
                *best = (picks.clone(), cost);
            }
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                picks.push(c);
                rec(m, row + 1, used, picks, best);
                picks.pop();
                used[c] = false;
            }
        }
    }
    let mut best = (Vec::new(), f64::INFINITY);
    rec(entries, 0, &mut vec![false; cols], &mut Vec::new(), &mut best);
    Ok(best)
}

/// Independent linear scan over per-slot candidates: smallest
/// V*t + Q*(e - budget), first index winning ties.
pub fn exhaustive_best(cands: &[(AgentAction, SlotCost)], q: &VirtualQueue) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (_, c)) in cands.iter().enumerate() {
        let obj = q.penalty_weight * c.t_total_s + q.q_value * (c.e_total_j - q.budget);
        match best {
            Some((_, b)) if obj >= b => {}
            _ => best = Some((i, obj)),
        }
    }
    best.map(|(i, _)| i)
}

/// Enumerate one UAV's decision candidates at the next slot the way the
/// environment itself would: route toward the subarea center, advance a slot,
/// then grid the ratio over every unmasked target.
pub fn slot_candidates(world: &World, uav: usize) -> Result<Vec<(AgentAction, SlotCost)>> {
    let center = world.scn.subareas[world.subarea_of(uav)].center();
    let params = RouteParams::from_scenario(&world.scn, uav);
    let step = route_toward(&world.kin[uav], center, &world.scn.risk_sources, &params)
        .map_err(|e| anyhow::anyhow!("routing: {e}"))?;
    let after = advance(
        &world.kin[uav],
        step.heading_rad,
        step.speed_mps,
        world.scn.uavs[uav].v_max_mps,
        world.scn.time.slot_seconds,
    )
    .map_err(|e| anyhow::anyhow!("advance: {e}"))?;
    world
        .candidate_decisions(uav, &after, step.speed_mps, step.heading_rad, &step.detect_distances_m)
        .map_err(|e| anyhow::anyhow!("candidates: {e}"))
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(subcommand)]
    pub which: OracleCmd,
}

#[derive(Debug, Subcommand)]
pub enum OracleCmd {
    /// Exhaustive assignment optimum for a small cost matrix.
    Assignment {
        /// Inline JSON 2D array, e.g. '[[1,2],[2,1]]'.
        #[arg(long, conflicts_with = "file")]
        matrix: Option<String>,
        /// File holding the same JSON.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Exhaustive per-slot decision optimum for one UAV at the first slot.
    Perslot {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        uav: usize,
        /// Offload-ratio grid resolution per target.
        #[arg(long, default_value_t = 11)]
        ratio_steps: usize,
    },
}

pub fn cmd_oracle(a: OracleArgs) -> Result<()> {
    match a.which {
        OracleCmd::Assignment { matrix, file } => {
            let text = match (matrix, file) {
                (Some(m), None) => m,
                (None, Some(f)) => std::fs::read_to_string(&f)
                    .with_context(|| format!("reading {}", f.display()))?,
                _ => bail!("pass exactly one of --matrix or --file"),
            };
            let entries: Vec<Vec<f64>> =
                serde_json::from_str(&text).context("matrix must be a JSON 2D number array")?;
            let (picks, cost) = permutation_assignment(&entries)?;
            println!("{}", serde_json::json!({ "cost": cost, "assignment": picks }));
            Ok(())
        }
        OracleCmd::Perslot { scenario, seed, uav, ratio_steps } => {
            let scn = io::load_scenario(&scenario)?;
            if uav >= scn.uavs.len() {
                bail!("uav {uav} out of range (scenario has {})", scn.uavs.len());
            }
            let params = EnvParams {
                mean_channel: true,
                route_to_center: true,
                ratio_grid: ratio_steps.max(2),
                ..EnvParams::default()
            };
            let world = World::new(scn, params, AssignMode::Hungarian, seed)
                .map_err(|e| anyhow::anyhow!("world: {e}"))?;
            let cands = slot_candidates(&world, uav)?;
            if cands.len() > 1000 {
                bail!("candidate grid {} exceeds the 1000-candidate cap", cands.len());
            }
            let best = exhaustive_best(&cands, &world.queues[uav])
                .context("no candidates to choose from")?;
            let (action, cost) = &cands[best];
            let target = match action.target {
                OffloadTarget::Local => String::from("local"),
                OffloadTarget::Ger(g) => format!("ger:{g}"),
                OffloadTarget::Airship => String::from("airship"),
            };
            println!(
                "{}",
                serde_json::json!({
                    "candidates": cands.len(),
                    "target": target,
                    "ratio": action.offload_ratio,
                    "t_total_s": cost.t_total_s,
                    "e_total_j": cost.e_total_j,
                })
            );
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use skyrescue_core::assignment::{hungarian_solve, CostMatrix};
    use skyrescue_core::costmodel::OffloadTarget;
    use skyrescue_core::rng::stream;

    fn action() -> AgentAction {
        AgentAction { target: OffloadTarget::Local, target_slot: 0, offload_ratio: 0.0 }
    }

    fn cost(t: f64, e: f64) -> SlotCost {
        SlotCost { t_total_s: t, e_total_j: e, ..SlotCost::default() }
    }

    #[test]
    fn enumeration_agrees_with_solver_on_random_matrices() {
        let mut rng = stream(77, &[1]);
        for trial in 0..60 {
            let rows = rng.gen_range(1..=5usize);
            let cols = rng.gen_range(rows..=6usize);
            let entries: Vec<Vec<f64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.gen_range(-10.0..10.0)).collect())
                .collect();
            let (_, brute) = permutation_assignment(&entries).unwrap();
            let flat: Vec<f64> = entries.iter().flatten().copied().collect();
            let mut m = CostMatrix::new(rows, cols, flat);
            let (_, solved) = hungarian_solve(&mut m).unwrap();
            assert!(
                (brute - solved).abs() < 1e-9,
                "trial {trial}: enumeration {brute} vs solver {solved}"
            );
        }
    }

    #[test]
    fn enumeration_rejects_bad_shapes() {
        assert_eq!(permutation_assignment(&[]).unwrap(), (Vec::new(), 0.0));
        let nine = vec![vec![0.0; 9]; 9];
        assert!(permutation_assignment(&nine).unwrap_err().to_string().contains("too large"));
        let ragged = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(permutation_assignment(&ragged).unwrap_err().to_string().contains("ragged"));
        let tall = vec![vec![1.0], vec![2.0]];
        assert!(permutation_assignment(&tall).unwrap_err().to_string().contains("rows <= cols"));
    }

    #[test]
    fn scan_picks_lowest_objective_and_breaks_ties_low() {
        let q = VirtualQueue::new(10.0, 2.0);
        let cands = vec![
            (action(), cost(5.0, 10.0)),
            (action(), cost(1.0, 10.0)),
            (action(), cost(1.0, 10.0)),
        ];
        assert_eq!(exhaustive_best(&cands, &q), Some(1));
        assert_eq!(exhaustive_best(&[], &q), None);
    }
}
