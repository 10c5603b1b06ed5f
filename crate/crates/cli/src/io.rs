//! File plumbing: scenario JSON, CSV/NDJSON exports, checkpoints, and the
//! run manifest that makes every output directory reproducible.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use skyrescue_core::assignment::RoundAssignment;
use skyrescue_core::costmodel::OffloadTarget;
use skyrescue_core::env::{EpisodeMetrics, SlotRecord};
use skyrescue_core::maddpg::EpisodeRow;
use skyrescue_core::neural::Mlp;
use skyrescue_core::scenario::Scenario;

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading scenario {}", path.display()))?;
    let scn: Scenario = serde_json::from_str(&text)
        .with_context(|| format!("parsing scenario {}", path.display()))?;
    Ok(scn)
}

pub fn save_scenario(path: &Path, scn: &Scenario) -> Result<()> {
    let text = serde_json::to_string_pretty(scn)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    let mut h = Sha256::new();
    h.update(&bytes);
    Ok(hex::encode(h.finalize()))
}

/// Every run directory gets one of these, written last so it can hash the
/// other artifacts. Re-running the same config must reproduce the hashes.
#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub command: &'a str,
    pub config: &'a C,
    pub seeds: &'a [u64],
    pub artifacts: BTreeMap<String, String>,
}

pub fn write_manifest<C: Serialize>(
    dir: &Path,
    command: &str,
    config: &C,
    seeds: &[u64],
    files: &[&str],
) -> Result<()> {
    let mut artifacts = BTreeMap::new();
    for f in files {
        artifacts.insert((*f).to_string(), sha256_hex(&dir.join(f))?);
    }
    let m = Manifest { command, config, seeds, artifacts };
    let text = serde_json::to_string_pretty(&m)?;
    fs::write(dir.join("manifest.json"), text + "\n")
        .with_context(|| format!("writing manifest in {}", dir.display()))?;
    Ok(())
}

pub fn read_manifest_config(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    v.get("config").cloned().context("manifest has no config field")
}

pub fn write_learning_curve(path: &Path, rows: &[EpisodeRow]) -> Result<()> {
    let mut out = String::from("episode,mean_reward,mean_latency_s,mean_energy_j,mean_q\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.episode, r.mean_reward, r.mean_latency_s, r.mean_energy_j, r.mean_q
        ));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn write_trajectory(path: &Path, records: &[SlotRecord]) -> Result<()> {
    let mut out = String::from("slot,uav_id,x_m,y_m,h_m,speed_mps,heading_rad\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.global_slot, r.uav, r.x_m, r.y_m, r.h_m, r.decision.speed_mps, r.decision.heading_rad
        ));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn write_cost_breakdown(path: &Path, records: &[SlotRecord]) -> Result<()> {
    let mut out = String::from(
        "slot,uav,t_local,t_tran,t_comp,t_total,e_tran,e_comp,e_prop,e_dete,e_total\n",
    );
    for r in records {
        let c = &r.cost;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.global_slot,
            r.uav,
            c.t_local_s,
            c.t_tran_s,
            c.t_comp_s,
            c.t_total_s,
            c.e_tran_j,
            c.e_comp_j,
            c.e_prop_j,
            c.e_dete_j,
            c.e_total_j
        ));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn write_queue_trace(path: &Path, records: &[SlotRecord]) -> Result<()> {
    let mut out = String::from("slot,uav,q_joules,y_k\n");
    for r in records {
        out.push_str(&format!("{},{},{},{}\n", r.global_slot, r.uav, r.q_after, r.y_k));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn write_assignment(path: &Path, rounds: &[RoundAssignment]) -> Result<()> {
    let mut out = String::from("round,uav,subarea,cost\n");
    for ra in rounds {
        for (u, &b) in ra.subarea_for_uav.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", ra.round, u, b, ra.per_uav_cost[u]));
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn target_label(t: OffloadTarget) -> String {
    match t {
        OffloadTarget::Local => String::from("local"),
        OffloadTarget::Ger(g) => format!("ger:{g}"),
        OffloadTarget::Airship => String::from("airship"),
    }
}

pub fn write_episode_log(path: &Path, episode: u32, records: &[SlotRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        let line = serde_json::json!({
            "episode": episode,
            "slot": r.global_slot,
            "uav": r.uav,
            "action": { "target": target_label(r.action.target), "ratio": r.action.offload_ratio },
            "reward": r.reward,
            "t_total": r.cost.t_total_s,
            "e_total": r.cost.e_total_j,
            "q": r.q_after,
        });
        out.push_str(&serde_json::to_string(&line)?);
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Per-slot snapshot of each GER's compute pool: how much a decision round
/// allocated away and what is left.
pub fn write_resource_map(path: &Path, scn: &Scenario, records: &[SlotRecord]) -> Result<()> {
    let mut out = String::from("slot,ger,x_m,y_m,f_max_flops,allocated_flops,remaining_flops\n");
    let n_slots = records.iter().map(|r| r.global_slot + 1).max().unwrap_or(0);
    for slot in 0..n_slots {
        let mut allocated = vec![0.0f64; scn.gers.len()];
        for r in records.iter().filter(|r| r.global_slot == slot) {
            if let OffloadTarget::Ger(g) = r.decision.target {
                allocated[g as usize] += r.decision.alloc_flops;
            }
        }
        for (g, ger) in scn.gers.iter().enumerate() {
            let alloc = allocated[g].min(ger.f_max_flops);
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                slot,
                g,
                ger.x_m,
                ger.y_m,
                ger.f_max_flops,
                alloc,
                ger.f_max_flops - alloc
            ));
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn write_eval_metrics(path: &Path, seeds: &[u64], metrics: &[EpisodeMetrics]) -> Result<()> {
    let mut out = String::from(
        "seed,mean_latency_s,mean_energy_j,mean_reward,final_q_mean,violations,slots\n",
    );
    for (s, m) in seeds.iter().zip(metrics) {
        let q = m.final_q.iter().sum::<f64>() / m.final_q.len().max(1) as f64;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s, m.mean_latency_s, m.mean_energy_j, m.mean_reward, q, m.violation_count, m.slots
        ));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Binary weight dump plus one line in the sidecar text manifest.
pub fn write_checkpoint(dir: &Path, name: &str, net: &Mlp, manifest_lines: &mut Vec<String>) -> Result<PathBuf> {
    let file = dir.join(name);
    fs::write(&file, net.to_bytes()).with_context(|| format!("writing {}", file.display()))?;
    let sizes: Vec<String> = net.sizes.iter().map(|s| s.to_string()).collect();
    let params: usize = net
        .weights
        .iter()
        .map(|w| w.len())
        .chain(net.biases.iter().map(|b| b.len()))
        .sum();
    manifest_lines.push(format!(
        "{} layers={} params={} sha256={}",
        name,
        sizes.join("-"),
        params,
        sha256_hex(&file)?
    ));
    Ok(file)
}

pub fn load_checkpoint(dir: &Path, name: &str) -> Result<Mlp> {
    let file = dir.join(name);
    let bytes = fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
    let net = Mlp::from_bytes(&bytes)
        .map_err(|e| anyhow::anyhow!("checkpoint {}: {e}", file.display()))?;
    Ok(net)
}

/// Minimal CSV reader for the files this tool writes itself: header plus
/// comma-separated rows, no quoting. Non-numeric fields come back as NaN.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<String> = match lines.next() {
        Some(h) => h.split(',').map(|s| s.to_string()).collect(),
        None => bail!("{} is empty", path.display()),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> =
            line.split(',').map(|f| f.parse::<f64>().unwrap_or(f64::NAN)).collect();
        if row.len() != header.len() {
            bail!("{} line {}: {} fields, expected {}", path.display(), i + 2, row.len(), header.len());
        }
        rows.push(row);
    }
    Ok((header, rows))
}
