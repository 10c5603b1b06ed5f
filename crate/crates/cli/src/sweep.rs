//! Parameter sweeps: one isolated run directory per grid point, aggregated
//! into a single metrics table.

use std::path::PathBuf;
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use skyrescue_core::maddpg::{evaluate, train};
use skyrescue_core::scenario::{generate_scenario, GenConfig};

use crate::io;
use crate::run::{gen_config, GenShape, TrainSettings};

pub const SWEEP_VARS: [&str; 7] =
    ["V", "ger_compute", "ger_count", "data_size", "denoise_steps", "batch", "lr"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub var: String,
    pub grid: Vec<f64>,
    pub gen: GenConfig,
    pub gen_seed: u64,
    pub train: TrainSettings,
    pub eval_seeds: Vec<u64>,
}

impl SweepConfig {
    pub fn check(&self) -> Result<()> {
        if !SWEEP_VARS.contains(&self.var.as_str()) {
            bail!("unknown sweep variable {:?} (expected one of {:?})", self.var, SWEEP_VARS);
        }
        if self.grid.is_empty() {
            bail!("sweep grid is empty");
        }
        if self.eval_seeds.is_empty() {
            bail!("need at least one eval seed");
        }
        if self.eval_seeds.contains(&self.train.seed) {
            bail!("eval seeds must be disjoint from the training seed {}", self.train.seed);
        }
        Ok(())
    }

    /// Specialize the generator and trainer configs to one grid value.
    pub fn point(&self, value: f64) -> Result<(GenConfig, TrainSettings)> {
        let mut gen = self.gen.clone();
        let mut tr = self.train.clone();
        match self.var.as_str() {
            "V" => tr.v_weight = value,
            "ger_compute" => gen.ger_flops_max = value,
            "ger_count" => {
                if value < 1.0 || value.fract() != 0.0 {
                    bail!("ger_count grid values must be positive integers, got {value}");
                }
                gen.ger_count = value as u32;
            }
            "data_size" => {
                // value in GB; keep the default 10:1 span shape
                gen.episode_data_gb_max = value;
                gen.episode_data_gb_min = value / 10.0;
            }
            "denoise_steps" => {
                if value < 1.0 || value.fract() != 0.0 {
                    bail!("denoise_steps grid values must be positive integers, got {value}");
                }
                tr.denoise_steps = value as usize;
            }
            "batch" => {
                if value < 1.0 || value.fract() != 0.0 {
                    bail!("batch grid values must be positive integers, got {value}");
                }
                tr.batch = value as usize;
            }
            "lr" => tr.lr = value,
            other => bail!("unknown sweep variable {other:?}"),
        }
        Ok((gen, tr))
    }
}

/// Grid syntax: comma-separated numbers with an optional unit suffix on any
/// element; one suffix sets the unit for the whole grid. `GB` leaves values
/// in gigabytes (the generator's unit), `TFLOPS` scales by 1e12.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let mut unit: Option<String> = None;
    let mut raw = Vec::new();
    for tok in spec.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            bail!("empty grid element in {spec:?}");
        }
        let split = tok.len() - tok.chars().rev().take_while(|c| c.is_ascii_alphabetic()).count();
        let (num, suffix) = tok.split_at(split);
        let v: f64 = num.parse().with_context(|| format!("bad grid element {tok:?}"))?;
        if !suffix.is_empty() {
            let s = suffix.to_ascii_uppercase();
            if let Some(prev) = &unit {
                if *prev != s {
                    bail!("conflicting grid units {prev:?} and {s:?}");
                }
            }
            unit = Some(s);
        }
        raw.push(v);
    }
    let scale = match unit.as_deref() {
        None | Some("GB") => 1.0,
        Some("TFLOPS") => 1e12,
        Some(other) => bail!("unknown grid unit {other:?} (expected GB or TFLOPS)"),
    };
    Ok(raw.into_iter().map(|v| v * scale).collect())
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Which knob the grid moves.
    #[arg(long, required_unless_present = "from_manifest")]
    pub var: Option<String>,
    /// Comma-separated grid, e.g. `0.1,0.5,1,5` or `12.5,50,125GB`.
    #[arg(long, required_unless_present = "from_manifest")]
    pub grid: Option<String>,
    #[command(flatten)]
    pub gen: GenShape,
    #[arg(long, default_value_t = 1)]
    pub gen_seed: u64,
    #[arg(long, default_value = "hg")]
    pub variant: String,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub train_seed: Option<u64>,
    #[arg(long, value_delimiter = ',', default_value = "900,901,902")]
    pub eval_seeds: Vec<u64>,
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,
    #[arg(long, default_value = "sweep")]
    pub out: PathBuf,
}

fn resolve(a: &SweepArgs) -> Result<SweepConfig> {
    if let Some(m) = &a.from_manifest {
        let cfg = io::read_manifest_config(m)?;
        let sc: SweepConfig =
            serde_json::from_value(cfg).context("manifest config does not look like a sweep")?;
        return Ok(sc);
    }
    let var = a.var.clone().expect("clap enforces var without manifest");
    let grid = parse_grid(a.grid.as_deref().expect("clap enforces grid without manifest"))?;
    let gen = gen_config(&a.gen);
    let seed = a.train_seed.unwrap_or(1);
    let base = skyrescue_core::maddpg::TrainerConfig::desk(seed);
    let mut train =
        crate::run::from_trainer_config(&base, &a.variant, "<generated per point>");
    if let Some(e) = a.episodes {
        train.episodes = e;
    }
    Ok(SweepConfig { var, grid, gen, gen_seed: a.gen_seed, train, eval_seeds: a.eval_seeds.clone() })
}

struct PointOutcome {
    value: f64,
    final_reward_ma30: f64,
    eval_latency_s: f64,
    eval_energy_j: f64,
    eval_reward: f64,
    final_q_mean: f64,
}

fn run_point(cfg: &SweepConfig, idx: usize, value: f64, out: &PathBuf) -> Result<PointOutcome> {
    let (gen, tr) = cfg.point(value)?;
    let dir = out.join(format!("point_{idx}"));
    io::ensure_dir(&dir)?;
    let scn = generate_scenario(&gen, cfg.gen_seed)
        .map_err(|e| anyhow::anyhow!("point {idx} generator: {e}"))?;
    io::save_scenario(&dir.join("scenario.scn.json"), &scn)?;
    let variant = tr.variant()?;
    let trainer = tr.trainer_config();
    let res =
        train(&scn, &trainer, variant).map_err(|e| anyhow::anyhow!("point {idx} training: {e}"))?;
    io::write_learning_curve(&dir.join("learning_curve.csv"), &res.curve)?;
    let metrics = evaluate(&scn, &trainer, variant, res.learners.as_deref(), &cfg.eval_seeds)
        .map_err(|e| anyhow::anyhow!("point {idx} eval: {e}"))?;
    io::write_eval_metrics(&dir.join("eval_metrics.csv"), &cfg.eval_seeds, &metrics)?;
    io::write_manifest(
        &dir,
        "sweep-point",
        &(&cfg.var, value, &tr),
        &[cfg.gen_seed, tr.seed],
        &["scenario.scn.json", "learning_curve.csv", "eval_metrics.csv"],
    )?;
    let window = res.curve.len().min(30);
    let tail = &res.curve[res.curve.len() - window..];
    let n = cfg.eval_seeds.len() as f64;
    Ok(PointOutcome {
        value,
        final_reward_ma30: tail.iter().map(|r| r.mean_reward).sum::<f64>() / window as f64,
        eval_latency_s: metrics.iter().map(|m| m.mean_latency_s).sum::<f64>() / n,
        eval_energy_j: metrics.iter().map(|m| m.mean_energy_j).sum::<f64>() / n,
        eval_reward: metrics.iter().map(|m| m.mean_reward).sum::<f64>() / n,
        final_q_mean: metrics
            .iter()
            .map(|m| m.final_q.iter().sum::<f64>() / m.final_q.len().max(1) as f64)
            .sum::<f64>()
            / n,
    })
}

fn thread_cap() -> usize {
    std::env::var("SKYRESCUE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

pub fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let cfg = resolve(&a)?;
    cfg.check()?;
    io::ensure_dir(&a.out)?;
    let workers = thread_cap().min(cfg.grid.len());
    let mut outcomes: Vec<Option<PointOutcome>> = Vec::new();
    outcomes.resize_with(cfg.grid.len(), || None);
    if workers <= 1 {
        for (i, &v) in cfg.grid.iter().enumerate() {
            outcomes[i] = Some(run_point(&cfg, i, v, &a.out)?);
        }
    } else {
        // round-robin the points over a fixed worker count; every point owns
        // its directory, so order of completion cannot matter
        let slots = Mutex::new(&mut outcomes);
        let errors = Mutex::new(Vec::<anyhow::Error>::new());
        std::thread::scope(|s| {
            for w in 0..workers {
                let cfg = &cfg;
                let out = &a.out;
                let slots = &slots;
                let errors = &errors;
                s.spawn(move || {
                    for i in (w..cfg.grid.len()).step_by(workers) {
                        match run_point(cfg, i, cfg.grid[i], out) {
                            Ok(p) => slots.lock().unwrap()[i] = Some(p),
                            Err(e) => errors.lock().unwrap().push(e),
                        }
                    }
                });
            }
        });
        let errs = errors.into_inner().unwrap();
        if let Some(e) = errs.into_iter().next() {
            return Err(e);
        }
    }
    let mut table = String::from(
        "var,value,final_reward_ma30,eval_latency_s,eval_energy_j,eval_reward,final_q_mean\n",
    );
    for p in outcomes.iter().flatten() {
        table.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            cfg.var,
            p.value,
            p.final_reward_ma30,
            p.eval_latency_s,
            p.eval_energy_j,
            p.eval_reward,
            p.final_q_mean
        ));
    }
    std::fs::write(a.out.join("sweep.csv"), table)?;
    let mut all_seeds = vec![cfg.gen_seed, cfg.train.seed];
    all_seeds.extend(&cfg.eval_seeds);
    io::write_manifest(&a.out, "sweep", &cfg, &all_seeds, &["sweep.csv"])?;
    println!("swept {} over {} points -> {}", cfg.var, cfg.grid.len(), a.out.join("sweep.csv").display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_plain_numbers_and_exponents() {
        assert_eq!(parse_grid("0.1,0.5,1,5").unwrap(), vec![0.1, 0.5, 1.0, 5.0]);
        assert_eq!(parse_grid("1e7, 5e7").unwrap(), vec![1e7, 5e7]);
        assert_eq!(parse_grid("-2.5").unwrap(), vec![-2.5]);
    }

    #[test]
    fn grid_units_scale_the_whole_list() {
        assert_eq!(parse_grid("10GB,50,100").unwrap(), vec![10.0, 50.0, 100.0]);
        assert_eq!(parse_grid("1TFLOPS,5").unwrap(), vec![1e12, 5e12]);
        assert_eq!(parse_grid("1,5tflops").unwrap(), vec![1e12, 5e12]);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(parse_grid("1GB,2TFLOPS").unwrap_err().to_string().contains("conflicting"));
        assert!(parse_grid("3km").unwrap_err().to_string().contains("unknown grid unit"));
        assert!(parse_grid("1,,2").unwrap_err().to_string().contains("empty grid element"));
        assert!(parse_grid("abc").is_err());
    }

    #[test]
    fn point_moves_only_its_own_knob() {
        let mut cfg = SweepConfig {
            var: "V".into(),
            grid: vec![0.1, 1.0],
            gen: GenConfig::default(),
            gen_seed: 1,
            train: crate::run::from_trainer_config(
                &skyrescue_core::maddpg::TrainerConfig::desk(1),
                "hg",
                "x.scn.json",
            ),
            eval_seeds: vec![900],
        };
        let (g, t) = cfg.point(0.5).unwrap();
        assert_eq!(t.v_weight, 0.5);
        assert_eq!(g.ger_flops_max, cfg.gen.ger_flops_max);

        cfg.var = "data_size".into();
        let (g, _) = cfg.point(50.0).unwrap();
        assert_eq!(g.episode_data_gb_max, 50.0);
        assert_eq!(g.episode_data_gb_min, 5.0);

        cfg.var = "batch".into();
        assert!(cfg.point(12.5).is_err());
        cfg.var = "mystery".into();
        assert!(cfg.check().is_err());
    }
}
