//! Turn run artifacts into the flat CSVs a plotting tool wants: reward
//! curves, queue and energy traces, latency-vs-knob tables, trajectory
//! tables, and the GER resource map. Data only, no rendering.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::Args;
use serde::Serialize;

use crate::io;

#[derive(Debug, Args)]
pub struct PlotdataArgs {
    /// A directory produced by train, eval, or sweep.
    #[arg(long)]
    pub run: PathBuf,
}

#[derive(Debug, Serialize)]
struct PlotConfig {
    run: String,
    emitted: Vec<String>,
}

fn idx(header: &[String], name: &str, file: &Path) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| anyhow::anyhow!("{} has no {name} column", file.display()))
}

pub fn cmd_plotdata(a: PlotdataArgs) -> Result<()> {
    let dir = &a.run;
    let out = dir.join("plotdata");
    io::ensure_dir(&out)?;
    let mut emitted: Vec<String> = Vec::new();

    // reward curve straight from a training run
    let curve = dir.join("learning_curve.csv");
    if curve.is_file() {
        let (header, rows) = io::read_csv(&curve)?;
        let ep = idx(&header, "episode", &curve)?;
        let rw = idx(&header, "mean_reward", &curve)?;
        let mut text = String::from("episode,mean_reward\n");
        for r in &rows {
            text.push_str(&format!("{},{}\n", r[ep], r[rw]));
        }
        std::fs::write(out.join("reward_curve.csv"), text)?;
        emitted.push("reward_curve.csv".to_string());
    }

    // queue level and energy spend side by side, per slot, averaged over UAVs
    let queue = dir.join("queue_trace.csv");
    let cost = dir.join("cost_breakdown.csv");
    if queue.is_file() && cost.is_file() {
        let (qh, qrows) = io::read_csv(&queue)?;
        let (ch, crows) = io::read_csv(&cost)?;
        let qs = idx(&qh, "slot", &queue)?;
        let qq = idx(&qh, "q_joules", &queue)?;
        let cs = idx(&ch, "slot", &cost)?;
        let ce = idx(&ch, "e_total", &cost)?;
        let mut qsum: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
        for r in &qrows {
            let e = qsum.entry(r[qs] as u64).or_insert((0.0, 0));
            e.0 += r[qq];
            e.1 += 1;
        }
        let mut esum: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
        for r in &crows {
            let e = esum.entry(r[cs] as u64).or_insert((0.0, 0));
            e.0 += r[ce];
            e.1 += 1;
        }
        let mut text = String::from("slot,mean_q_joules,mean_e_total_j\n");
        for (slot, (q, n)) in &qsum {
            let (e, m) = esum.get(slot).copied().unwrap_or((0.0, 1));
            text.push_str(&format!(
                "{},{},{}\n",
                slot,
                q / *n as f64,
                e / m.max(1) as f64
            ));
        }
        std::fs::write(out.join("queue_energy.csv"), text)?;
        emitted.push("queue_energy.csv".to_string());
    }

    // trajectory rows joined with the round's subarea pick
    let traj = dir.join("trajectory.csv");
    let assign = dir.join("assignment.csv");
    if traj.is_file() && assign.is_file() {
        let (th, trows) = io::read_csv(&traj)?;
        let (ah, arows) = io::read_csv(&assign)?;
        let ts = idx(&th, "slot", &traj)?;
        let tu = idx(&th, "uav_id", &traj)?;
        let tx = idx(&th, "x_m", &traj)?;
        let ty = idx(&th, "y_m", &traj)?;
        let ar = idx(&ah, "round", &assign)?;
        let au = idx(&ah, "uav", &assign)?;
        let ab = idx(&ah, "subarea", &assign)?;
        let n_slots = trows.iter().map(|r| r[ts] as u64 + 1).max().unwrap_or(0);
        let n_rounds = arows.iter().map(|r| r[ar] as u64 + 1).max().unwrap_or(1);
        if n_slots % n_rounds != 0 {
            bail!("{} slots do not divide into {} rounds", n_slots, n_rounds);
        }
        let spr = n_slots / n_rounds;
        let pick: BTreeMap<(u64, u64), u64> = arows
            .iter()
            .map(|r| ((r[ar] as u64, r[au] as u64), r[ab] as u64))
            .collect();
        let mut text = String::from("round,slot,uav,subarea,x_m,y_m\n");
        for r in &trows {
            let slot = r[ts] as u64;
            let uav = r[tu] as u64;
            let round = slot / spr;
            let sub = pick
                .get(&(round, uav))
                .ok_or_else(|| anyhow::anyhow!("no assignment for round {round} uav {uav}"))?;
            text.push_str(&format!("{},{},{},{},{},{}\n", round, slot, uav, sub, r[tx], r[ty]));
        }
        std::fs::write(out.join("trajectory_table.csv"), text)?;
        emitted.push("trajectory_table.csv".to_string());
    }

    // resource map passes through after an invariant check
    let rmap = dir.join("resource_map.csv");
    if rmap.is_file() {
        let (rh, rrows) = io::read_csv(&rmap)?;
        let rm = idx(&rh, "f_max_flops", &rmap)?;
        let rr = idx(&rh, "remaining_flops", &rmap)?;
        for (i, r) in rrows.iter().enumerate() {
            if r[rr] > r[rm] + 1e-6 || r[rr] < -1e-6 {
                bail!("resource map row {} has remaining {} outside [0, {}]", i + 2, r[rr], r[rm]);
            }
        }
        std::fs::copy(&rmap, out.join("resource_map.csv"))?;
        emitted.push("resource_map.csv".to_string());
    }

    // latency against the swept knob
    let sweep = dir.join("sweep.csv");
    if sweep.is_file() {
        let (sh, srows) = io::read_csv(&sweep)?;
        let sv = idx(&sh, "value", &sweep)?;
        let sl = idx(&sh, "eval_latency_s", &sweep)?;
        let var = std::fs::read_to_string(&sweep)?
            .lines()
            .nth(1)
            .and_then(|l| l.split(',').next().map(|s| s.to_string()))
            .unwrap_or_else(|| String::from("var"));
        let mut text = String::from("value,eval_latency_s\n");
        for r in &srows {
            text.push_str(&format!("{},{}\n", r[sv], r[sl]));
        }
        let name = format!("latency_vs_{var}.csv");
        std::fs::write(out.join(&name), text)?;
        emitted.push(name);
    }

    if emitted.is_empty() {
        bail!(
            "no plottable artifacts in {} (expected learning_curve.csv, queue_trace.csv + cost_breakdown.csv, trajectory.csv + assignment.csv, resource_map.csv, or sweep.csv)",
            dir.display()
        );
    }
    let refs: Vec<&str> = emitted.iter().map(|s| s.as_str()).collect();
    let config = PlotConfig { run: dir.display().to_string(), emitted: emitted.clone() };
    io::write_manifest(&out, "plotdata", &config, &[], &refs)?;
    println!("emitted {} plot files into {}", emitted.len(), out.display());
    Ok(())
}
