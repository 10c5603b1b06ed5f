//! The gen / validate / train / eval subcommands.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use skyrescue_core::diffusion::{make_schedule, EpsilonNet, DEFAULT_BETA_END, DEFAULT_BETA_START};
use skyrescue_core::env::{act_len, obs_len, run_episode, AssignMode};
use skyrescue_core::maddpg::{
    evaluate, init_learners, train, trained_policy, Actor, AgentLearner, TrainerConfig, Variant,
};
use skyrescue_core::neural::AdamState;
use skyrescue_core::scenario::{generate_scenario, validate, GenConfig, Scenario};

use crate::io;

/// Generator knobs shared by `gen` and `sweep`.
#[derive(Debug, Args)]
pub struct GenShape {
    /// Scenario name; the file is written as <name>.scn.json.
    #[arg(long, default_value = "desk")]
    pub name: String,
    #[arg(long, default_value_t = 3)]
    pub uavs: u32,
    #[arg(long, default_value_t = 5)]
    pub rounds: u32,
    #[arg(long, default_value_t = 5)]
    pub slots: u32,
    #[arg(long, default_value_t = 75)]
    pub gers: u32,
    /// Episode-total data volume range in GB.
    #[arg(long)]
    pub data_gb_min: Option<f64>,
    #[arg(long)]
    pub data_gb_max: Option<f64>,
    /// Upper end of the GER compute range, FLOPS.
    #[arg(long)]
    pub ger_flops_max: Option<f64>,
    /// Fixed per-slot energy budget in J (default derives one).
    #[arg(long)]
    pub budget: Option<f64>,
}

pub fn gen_config(a: &GenShape) -> GenConfig {
    let mut cfg = GenConfig {
        name: a.name.clone(),
        uav_count: a.uavs,
        rounds: a.rounds,
        slots_per_round: a.slots,
        ger_count: a.gers,
        ..GenConfig::default()
    };
    if let Some(v) = a.data_gb_min {
        cfg.episode_data_gb_min = v;
    }
    if let Some(v) = a.data_gb_max {
        cfg.episode_data_gb_max = v;
    }
    if let Some(v) = a.ger_flops_max {
        cfg.ger_flops_max = v;
    }
    cfg.energy_budget_j_per_slot = a.budget;
    cfg
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub shape: GenShape,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

pub fn cmd_gen(a: GenArgs) -> Result<()> {
    let cfg = gen_config(&a.shape);
    let scn = generate_scenario(&cfg, a.seed).map_err(|e| anyhow::anyhow!("generator: {e}"))?;
    let violations = validate(&scn);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("violation [{}] {:?}: {}", v.constraint, v.entities, v.detail);
        }
        bail!("generated scenario failed validation with {} violations", violations.len());
    }
    io::ensure_dir(&a.out)?;
    let file = format!("{}.scn.json", cfg.name);
    io::save_scenario(&a.out.join(&file), &scn)?;
    io::write_manifest(&a.out, "gen", &cfg, &[a.seed], &[&file])?;
    println!("wrote {}", a.out.join(&file).display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
}

pub fn cmd_validate(a: ValidateArgs) -> Result<()> {
    let scn = io::load_scenario(&a.scenario)?;
    let violations = validate(&scn);
    if violations.is_empty() {
        println!("ok: {} UAVs, {} subareas, {} GERs", scn.uavs.len(), scn.subareas.len(), scn.gers.len());
        Ok(())
    } else {
        for v in &violations {
            eprintln!("violation [{}] {:?}: {}", v.constraint, v.entities, v.detail);
        }
        bail!("{} violations", violations.len())
    }
}

/// Serializable twin of the core trainer config, stored in run manifests.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub variant: String,
    pub episodes: usize,
    pub batch: usize,
    pub replay_capacity: usize,
    pub lr: f64,
    pub gamma: f64,
    pub psi: f64,
    pub eps0: f64,
    pub eps_decay: f64,
    pub eps_floor: f64,
    pub lambda_bc: f64,
    pub v_weight: f64,
    pub reward_scale: f64,
    pub violation_penalty: f64,
    pub update_every: usize,
    pub hidden: usize,
    pub denoise_steps: usize,
    pub seed: u64,
    pub scenario: String,
}

impl TrainSettings {
    pub fn trainer_config(&self) -> TrainerConfig {
        TrainerConfig {
            episodes: self.episodes,
            batch: self.batch,
            replay_capacity: self.replay_capacity,
            lr: self.lr,
            gamma: self.gamma,
            psi: self.psi,
            eps0: self.eps0,
            eps_decay: self.eps_decay,
            eps_floor: self.eps_floor,
            lambda_bc: self.lambda_bc,
            v_weight: self.v_weight,
            reward_scale: self.reward_scale,
            violation_penalty: self.violation_penalty,
            update_every: self.update_every,
            hidden: self.hidden,
            denoise_steps: self.denoise_steps,
            seed: self.seed,
        }
    }

    pub fn variant(&self) -> Result<Variant> {
        parse_variant(&self.variant)
    }
}

pub fn parse_variant(s: &str) -> Result<Variant> {
    match s {
        "hg" => Ok(Variant::HungarianDiffusion),
        "plain" => Ok(Variant::PlainGaussian),
        "random" => Ok(Variant::RandomActions),
        "greedy-local" => Ok(Variant::GreedyLocal),
        other => bail!("unknown variant {other:?} (expected hg, plain, random, greedy-local)"),
    }
}

pub(crate) fn from_trainer_config(cfg: &TrainerConfig, variant: &str, scenario: &str) -> TrainSettings {
    TrainSettings {
        variant: variant.to_string(),
        episodes: cfg.episodes,
        batch: cfg.batch,
        replay_capacity: cfg.replay_capacity,
        lr: cfg.lr,
        gamma: cfg.gamma,
        psi: cfg.psi,
        eps0: cfg.eps0,
        eps_decay: cfg.eps_decay,
        eps_floor: cfg.eps_floor,
        lambda_bc: cfg.lambda_bc,
        v_weight: cfg.v_weight,
        reward_scale: cfg.reward_scale,
        violation_penalty: cfg.violation_penalty,
        update_every: cfg.update_every,
        hidden: cfg.hidden,
        denoise_steps: cfg.denoise_steps,
        seed: cfg.seed,
        scenario: scenario.to_string(),
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, required_unless_present = "from_manifest")]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value = "hg")]
    pub variant: String,
    /// Base parameter set before per-flag overrides.
    #[arg(long, default_value = "desk", value_parser = ["desk", "default"])]
    pub preset: String,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub denoise_steps: Option<usize>,
    #[arg(long)]
    pub update_every: Option<usize>,
    #[arg(long)]
    pub v_weight: Option<f64>,
    #[arg(long)]
    pub reward_scale: Option<f64>,
    #[arg(long)]
    pub lambda_bc: Option<f64>,
    /// Re-run the exact configuration stored in an earlier run's manifest.
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
}

pub fn resolve_train_settings(a: &TrainArgs) -> Result<TrainSettings> {
    if let Some(m) = &a.from_manifest {
        let cfg = io::read_manifest_config(m)?;
        let mut settings: TrainSettings = serde_json::from_value(cfg)
            .context("manifest config does not look like train settings")?;
        if let Some(s) = &a.scenario {
            settings.scenario = s.display().to_string();
        }
        return Ok(settings);
    }
    let seed = a.seed.unwrap_or(1);
    let base = match a.preset.as_str() {
        "desk" => TrainerConfig::desk(seed),
        _ => TrainerConfig { seed, ..TrainerConfig::default() },
    };
    let scenario = a.scenario.as_ref().expect("clap enforces scenario without manifest");
    let mut s = from_trainer_config(&base, &a.variant, &scenario.display().to_string());
    if let Some(v) = a.episodes {
        s.episodes = v;
    }
    if let Some(v) = a.batch {
        s.batch = v;
    }
    if let Some(v) = a.lr {
        s.lr = v;
    }
    if let Some(v) = a.hidden {
        s.hidden = v;
    }
    if let Some(v) = a.denoise_steps {
        s.denoise_steps = v;
    }
    if let Some(v) = a.update_every {
        s.update_every = v;
    }
    if let Some(v) = a.v_weight {
        s.v_weight = v;
    }
    if let Some(v) = a.reward_scale {
        s.reward_scale = v;
    }
    if let Some(v) = a.lambda_bc {
        s.lambda_bc = v;
    }
    Ok(s)
}

pub fn cmd_train(a: TrainArgs) -> Result<()> {
    let settings = resolve_train_settings(&a)?;
    let scn = io::load_scenario(Path::new(&settings.scenario))?;
    let variant = settings.variant()?;
    let cfg = settings.trainer_config();
    io::ensure_dir(&a.out)?;
    let res = train(&scn, &cfg, variant).map_err(|e| anyhow::anyhow!("training: {e}"))?;
    io::write_learning_curve(&a.out.join("learning_curve.csv"), &res.curve)?;
    let mut files = vec!["learning_curve.csv".to_string()];
    if let Some(learners) = &res.learners {
        let ckpt_dir = a.out.join("checkpoints");
        io::ensure_dir(&ckpt_dir)?;
        let mut lines = Vec::new();
        for (k, l) in learners.iter().enumerate() {
            let actor_net = match &l.actor {
                Actor::Diffusion(d) => &d.net.net,
                Actor::Gaussian(g) => &g.net,
            };
            io::write_checkpoint(&ckpt_dir, &format!("agent{k}_actor.mlp1"), actor_net, &mut lines)?;
            io::write_checkpoint(&ckpt_dir, &format!("agent{k}_critic.mlp1"), &l.critic, &mut lines)?;
            files.push(format!("checkpoints/agent{k}_actor.mlp1"));
            files.push(format!("checkpoints/agent{k}_critic.mlp1"));
        }
        std::fs::write(ckpt_dir.join("manifest.txt"), lines.join("\n") + "\n")?;
        files.push("checkpoints/manifest.txt".to_string());
    }
    let file_refs: Vec<&str> = files.iter().map(|s| s.as_str()).collect();
    io::write_manifest(&a.out, "train", &settings, &[settings.seed], &file_refs)?;
    let last = res.curve.last().context("empty learning curve")?;
    println!(
        "trained {} episodes ({}); final mean reward {:.4}, latency {:.3} s",
        settings.episodes, settings.variant, last.mean_reward, last.mean_latency_s
    );
    Ok(())
}

/// Rebuild learners from a train run directory for evaluation.
pub fn load_learners(
    run_dir: &Path,
    scn: &Scenario,
    settings: &TrainSettings,
) -> Result<Vec<AgentLearner>> {
    let cfg = settings.trainer_config();
    let variant = settings.variant()?;
    let ckpt = run_dir.join("checkpoints");
    let mut learners = init_learners(scn, &cfg, variant);
    for (k, l) in learners.iter_mut().enumerate() {
        let actor_net = io::load_checkpoint(&ckpt, &format!("agent{k}_actor.mlp1"))?;
        let critic = io::load_checkpoint(&ckpt, &format!("agent{k}_critic.mlp1"))?;
        match &mut l.actor {
            Actor::Diffusion(d) => {
                if actor_net.sizes != d.net.net.sizes {
                    bail!("agent {k} actor checkpoint shape {:?} does not match scenario {:?}", actor_net.sizes, d.net.net.sizes);
                }
                let schedule = make_schedule(cfg.denoise_steps, DEFAULT_BETA_START, DEFAULT_BETA_END)
                    .map_err(|e| anyhow::anyhow!("noise schedule: {e}"))?;
                let net = EpsilonNet {
                    net: actor_net,
                    x_dim: act_len(scn),
                    cond_dim: obs_len(scn),
                    steps: cfg.denoise_steps,
                };
                d.target = net.clone();
                d.opt = AdamState::new(&net.net);
                d.schedule = schedule;
                d.net = net;
            }
            Actor::Gaussian(g) => {
                if actor_net.sizes != g.net.sizes {
                    bail!("agent {k} actor checkpoint shape {:?} does not match scenario {:?}", actor_net.sizes, g.net.sizes);
                }
                g.target = actor_net.clone();
                g.opt = AdamState::new(&actor_net);
                g.net = actor_net;
            }
        }
        if critic.sizes != l.critic.sizes {
            bail!("agent {k} critic checkpoint shape {:?} does not match scenario {:?}", critic.sizes, l.critic.sizes);
        }
        l.critic_target = critic.clone();
        l.critic_opt = AdamState::new(&critic);
        l.critic = critic;
    }
    Ok(learners)
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Train run directory holding manifest.json and checkpoints/.
    #[arg(long, conflicts_with = "variant")]
    pub run: Option<PathBuf>,
    /// Baseline variant to evaluate without checkpoints (random, greedy-local).
    #[arg(long)]
    pub variant: Option<String>,
    /// Scenario override; defaults to the one recorded in the run manifest.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "900,901,902")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value = "eval")]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct EvalConfig {
    source: String,
    variant: String,
    scenario: String,
    seeds: Vec<u64>,
}

pub fn cmd_eval(a: EvalArgs) -> Result<()> {
    if a.seeds.is_empty() {
        bail!("need at least one eval seed");
    }
    let (scn, cfg, variant, learners, source, variant_name, scn_name) = match (&a.run, &a.variant) {
        (Some(dir), None) => {
            let cfg_json = io::read_manifest_config(&dir.join("manifest.json"))?;
            let mut settings: TrainSettings = serde_json::from_value(cfg_json)
                .context("run manifest is not a train manifest")?;
            if let Some(s) = &a.scenario {
                settings.scenario = s.display().to_string();
            }
            let scn = io::load_scenario(Path::new(&settings.scenario))?;
            let variant = settings.variant()?;
            let learners = match variant {
                Variant::HungarianDiffusion | Variant::PlainGaussian => {
                    Some(load_learners(dir, &scn, &settings)?)
                }
                _ => None,
            };
            let name = settings.variant.clone();
            let scn_name = settings.scenario.clone();
            (scn, settings.trainer_config(), variant, learners, dir.display().to_string(), name, scn_name)
        }
        (None, Some(v)) => {
            let variant = parse_variant(v)?;
            if matches!(variant, Variant::HungarianDiffusion | Variant::PlainGaussian) {
                bail!("variant {v} needs checkpoints; pass --run instead");
            }
            let path = a.scenario.as_ref().context("--scenario is required with --variant")?;
            let scn = io::load_scenario(path)?;
            let cfg = TrainerConfig::desk(1);
            (scn, cfg, variant, None, String::from("baseline"), v.clone(), path.display().to_string())
        }
        _ => bail!("pass exactly one of --run or --variant"),
    };
    io::ensure_dir(&a.out)?;
    let metrics = evaluate(&scn, &cfg, variant, learners.as_deref(), &a.seeds)
        .map_err(|e| anyhow::anyhow!("evaluation: {e}"))?;
    io::write_eval_metrics(&a.out.join("eval_metrics.csv"), &a.seeds, &metrics)?;

    // full traces for the first seed, the data behind the per-run plots
    let params = cfg.env_params();
    let mode = match variant {
        Variant::HungarianDiffusion => AssignMode::Hungarian,
        _ => AssignMode::RoundRobin,
    };
    let trace_seed = a.seeds[0];
    let res = match &learners {
        Some(ls) => {
            let policy = trained_policy(ls, 0.0);
            run_episode(&scn, &params, mode, &policy, trace_seed, false)
        }
        None => match variant {
            Variant::GreedyLocal => run_episode(
                &scn,
                &params,
                mode,
                &skyrescue_core::env::GreedyLocalPolicy,
                trace_seed,
                false,
            ),
            _ => run_episode(
                &scn,
                &params,
                mode,
                &skyrescue_core::env::RandomPolicy,
                trace_seed,
                false,
            ),
        },
    }
    .map_err(|e| anyhow::anyhow!("trace episode: {e}"))?;
    io::write_trajectory(&a.out.join("trajectory.csv"), &res.records)?;
    io::write_cost_breakdown(&a.out.join("cost_breakdown.csv"), &res.records)?;
    io::write_queue_trace(&a.out.join("queue_trace.csv"), &res.records)?;
    io::write_resource_map(&a.out.join("resource_map.csv"), &scn, &res.records)?;
    io::write_episode_log(&a.out.join("episode_log.ndjson"), 0, &res.records)?;
    let assignments = skyrescue_core::env::make_assignments(&scn, mode)
        .map_err(|e| anyhow::anyhow!("assignment export: {e}"))?;
    io::write_assignment(&a.out.join("assignment.csv"), &assignments)?;

    let config = EvalConfig { source, variant: variant_name, scenario: scn_name, seeds: a.seeds.clone() };
    io::write_manifest(
        &a.out,
        "eval",
        &config,
        &a.seeds,
        &[
            "eval_metrics.csv",
            "trajectory.csv",
            "cost_breakdown.csv",
            "queue_trace.csv",
            "resource_map.csv",
            "episode_log.ndjson",
            "assignment.csv",
        ],
    )?;
    let mean_lat = metrics.iter().map(|m| m.mean_latency_s).sum::<f64>() / metrics.len() as f64;
    let mean_e = metrics.iter().map(|m| m.mean_energy_j).sum::<f64>() / metrics.len() as f64;
    println!("eval over {} seeds: mean latency {:.3} s, mean energy {:.1} J", a.seeds.len(), mean_lat, mean_e);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_parse() {
        assert!(matches!(parse_variant("hg"), Ok(Variant::HungarianDiffusion)));
        assert!(matches!(parse_variant("plain"), Ok(Variant::PlainGaussian)));
        assert!(matches!(parse_variant("random"), Ok(Variant::RandomActions)));
        assert!(matches!(parse_variant("greedy-local"), Ok(Variant::GreedyLocal)));
        assert!(parse_variant("sota").is_err());
    }

    #[test]
    fn train_settings_survive_json_and_reject_strangers() {
        let s = from_trainer_config(&TrainerConfig::desk(7), "hg", "a.scn.json");
        let text = serde_json::to_string(&s).unwrap();
        let back: TrainSettings = serde_json::from_str(&text).unwrap();
        assert_eq!(back.seed, 7);
        assert_eq!(back.trainer_config(), TrainerConfig::desk(7));
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["mystery_knob"] = serde_json::json!(1);
        assert!(serde_json::from_value::<TrainSettings>(v).is_err());
    }

    #[test]
    fn shape_overrides_only_what_was_given() {
        let shape = GenShape {
            name: "t".into(),
            uavs: 2,
            rounds: 3,
            slots: 4,
            gers: 12,
            data_gb_min: None,
            data_gb_max: Some(50.0),
            ger_flops_max: None,
            budget: Some(123.0),
        };
        let cfg = gen_config(&shape);
        assert_eq!(cfg.uav_count, 2);
        assert_eq!(cfg.episode_data_gb_min, GenConfig::default().episode_data_gb_min);
        assert_eq!(cfg.episode_data_gb_max, 50.0);
        assert_eq!(cfg.energy_budget_j_per_slot, Some(123.0));
    }
}
