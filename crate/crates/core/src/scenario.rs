//! World description: entities, physical constants, time grid, and the
//! generator/validator for complete scenarios.
//!
//! All quantities are SI internally (meters, seconds, watts, joules, bits,
//! flops/s). Field names carry units where a unit exists. Conversions from
//! the mixed units people actually quote (GB, TFLOPs, Wh, dBm) happen at
//! generation/CLI boundaries, never inside the models.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, tag};

/// Channel, energy, and sensing constants shared by every link and UAV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysConstants {
    pub carrier_freq_hz: f64,
    pub light_speed_mps: f64,
    pub ref_distance_m: f64,
    pub pathloss_exp_los: f64,
    pub pathloss_exp_nlos: f64,
    pub shadow_std_los_db: f64,
    pub shadow_std_nlos_db: f64,
    pub nakagami_shape_los: f64,
    pub nakagami_shape_nlos: f64,
    /// Mean received fading power (linear, normalizes |h|^2).
    pub mean_rx_power: f64,
    pub bandwidth_hz: f64,
    pub tx_power_w: f64,
    pub noise_power_w: f64,
    /// Effective switched capacitance of the UAV chip.
    pub capacitance_coeff: f64,
    /// Propulsion energy per slot is this coefficient times speed squared.
    pub propulsion_coeff: f64,
    /// Sensing energy per meter of segment-midpoint distance to a risk source.
    pub detect_unit_energy: f64,
    /// Number of segment midpoints sampled per slot for sensing energy.
    pub detect_segments: u32,
    /// Elevation-angle sigmoid parameters for the LoS probability.
    pub los_sigmoid_a: f64,
    pub los_sigmoid_b: f64,
    /// Cycle cost of one flop; latency divides cycles by (flops/s / this).
    pub cycles_per_flop: f64,
    /// Risk sources beyond this range produce no sensing energy.
    pub sense_range_m: f64,
    /// Charge compute energy for the whole task even when part is offloaded
    /// (the literal reading of the energy model; off by default).
    pub comp_energy_full_task: bool,
}

impl Default for PhysConstants {
    fn default() -> Self {
        PhysConstants {
            carrier_freq_hz: 2.0e9,
            light_speed_mps: 3.0e8,
            ref_distance_m: 1.0,
            pathloss_exp_los: 2.0,
            pathloss_exp_nlos: 3.0,
            shadow_std_los_db: 2.0,
            shadow_std_nlos_db: 5.0,
            nakagami_shape_los: 3.0,
            nakagami_shape_nlos: 1.0,
            mean_rx_power: 1.0,
            bandwidth_hz: 1.0e9,
            tx_power_w: 0.1,
            noise_power_w: 3.162_277_660_168_379_4e-15,
            capacitance_coeff: 1.0e-34,
            propulsion_coeff: 0.5,
            detect_unit_energy: 1.0e-3,
            detect_segments: 4,
            los_sigmoid_a: 9.61,
            los_sigmoid_b: 0.16,
            cycles_per_flop: 1.0,
            sense_range_m: 1000.0,
            comp_energy_full_task: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavSpec {
    pub start_x_m: f64,
    pub start_y_m: f64,
    pub end_x_m: f64,
    pub end_y_m: f64,
    pub altitude_m: f64,
    pub v_max_mps: f64,
    /// Lower speed bound entering the per-slot step-distance constraint.
    pub d_min_mps: f64,
    /// Cap on total per-round flown distance.
    pub l_max_m: f64,
    pub f_flops: f64,
    pub e_max_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GerSpec {
    pub x_m: f64,
    pub y_m: f64,
    pub f_max_flops: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AirshipSpec {
    pub x_m: f64,
    pub y_m: f64,
    pub altitude_m: f64,
    pub f_flops: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subarea {
    pub min_x_m: f64,
    pub min_y_m: f64,
    pub max_x_m: f64,
    pub max_y_m: f64,
    /// Expected per-slot task size for work generated in this subarea.
    pub data_bits: f64,
    pub cycles_per_bit: f64,
    /// Mean max compute of the GERs inside, used by assignment costs.
    pub mean_ger_flops: f64,
}

impl Subarea {
    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.min_x_m + self.max_x_m),
            0.5 * (self.min_y_m + self.max_y_m),
        )
    }

    /// Half-open membership ([min, max)), closed on the region's far edges so
    /// every point of the rectangle belongs to exactly one cell.
    pub fn contains(&self, x: f64, y: f64, region_w: f64, region_h: f64) -> bool {
        let x_ok = x >= self.min_x_m && (x < self.max_x_m || (self.max_x_m >= region_w && x <= self.max_x_m));
        let y_ok = y >= self.min_y_m && (y < self.max_y_m || (self.max_y_m >= region_h && y <= self.max_y_m));
        x_ok && y_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSource {
    pub x_m: f64,
    pub y_m: f64,
    pub radius_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub slots_per_round: u32,
    pub slot_seconds: f64,
    pub rounds: u32,
}

impl TimeGrid {
    pub fn total_slots(&self) -> u32 {
        self.slots_per_round * self.rounds
    }
}

/// Per-slot task arrival model: one task per UAV per slot, size uniform in
/// the given range, intensity taken from the subarea, fixed deadline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskModel {
    pub data_bits_min: f64,
    pub data_bits_max: f64,
    pub deadline_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub region_width_m: f64,
    pub region_height_m: f64,
    pub uavs: Vec<UavSpec>,
    pub gers: Vec<GerSpec>,
    pub airship: AirshipSpec,
    pub subareas: Vec<Subarea>,
    pub risk_sources: Vec<RiskSource>,
    pub time: TimeGrid,
    pub tasks: TaskModel,
    pub consts: PhysConstants,
    /// Long-term average energy budget per UAV per slot (drives the virtual queue).
    pub energy_budget_j_per_slot: f64,
    /// Minimum allowed distance between two UAVs at any slot.
    pub safety_distance_m: f64,
    /// Observation capacity: GER slots per subarea in the fixed-size layout.
    pub max_gers_per_subarea: u32,
    pub seed: u64,
}

impl Scenario {
    pub fn subarea_of_point(&self, x: f64, y: f64) -> Option<usize> {
        self.subareas
            .iter()
            .position(|s| s.contains(x, y, self.region_width_m, self.region_height_m))
    }

    /// Indices of the GERs whose position falls in subarea `b`.
    pub fn gers_in_subarea(&self, b: usize) -> Vec<usize> {
        let sa = &self.subareas[b];
        self.gers
            .iter()
            .enumerate()
            .filter(|(_, g)| sa.contains(g.x_m, g.y_m, self.region_width_m, self.region_height_m))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Constraint and structural-invariant identifiers attached to violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    /// Long-term average energy budget (enforced through the virtual queue).
    EnergyBudget,
    /// Offload share outside [0, 1].
    OffloadRatioRange,
    /// A UAV's offload shares across targets exceed 1 (more than one target).
    UavShareSum,
    /// Total share offloaded to one GER exceeds 1.
    GerShareSum,
    /// Local compute exceeds the task deadline.
    LocalDeadline,
    /// Transmission plus remote compute exceeds the task deadline.
    RemoteDeadline,
    /// A single allocation outside [0, f_max].
    AllocRange,
    /// Summed allocations at a GER exceed its capacity.
    GerCapacity,
    /// Per-slot flown distance outside its bounds.
    StepDistance,
    /// Total per-round flown distance above the cap.
    PathLength,
    /// Two UAVs closer than the safety distance.
    UavSeparation,
    /// Subareas overlap.
    SubareaOverlap,
    /// Subareas fail to cover the region.
    SubareaCoverage,
    /// Entity outside the region or in no subarea.
    Placement,
    /// Counts inconsistent (UAVs, subareas, rounds).
    Cardinality,
    /// A physical constant out of range.
    Constants,
}

impl core::fmt::Display for Constraint {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            Constraint::EnergyBudget => "energy-budget",
            Constraint::OffloadRatioRange => "offload-ratio-range",
            Constraint::UavShareSum => "uav-share-sum",
            Constraint::GerShareSum => "ger-share-sum",
            Constraint::LocalDeadline => "local-deadline",
            Constraint::RemoteDeadline => "remote-deadline",
            Constraint::AllocRange => "alloc-range",
            Constraint::GerCapacity => "ger-capacity",
            Constraint::StepDistance => "step-distance",
            Constraint::PathLength => "path-length",
            Constraint::UavSeparation => "uav-separation",
            Constraint::SubareaOverlap => "subarea-overlap",
            Constraint::SubareaCoverage => "subarea-coverage",
            Constraint::Placement => "placement",
            Constraint::Cardinality => "cardinality",
            Constraint::Constants => "constants",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    /// Indices of the entities involved (meaning depends on the constraint).
    pub entities: Vec<u32>,
    pub detail: String,
}

impl Violation {
    pub fn new(constraint: Constraint, entities: &[u32], detail: String) -> Self {
        Violation { constraint, entities: entities.to_vec(), detail }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GenError {
    #[error("invalid counts: {0}")]
    InvalidCount(String),
    #[error("region too small: {0}")]
    RegionTooSmall(String),
}

/// Everything the generator needs; `Default` is the desk-scale setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub name: String,
    pub uav_count: u32,
    pub rounds: u32,
    pub slots_per_round: u32,
    pub slot_seconds: f64,
    pub region_width_m: f64,
    pub region_height_m: f64,
    pub ger_count: u32,
    pub ger_flops_min: f64,
    pub ger_flops_max: f64,
    pub risk_count: u32,
    pub risk_radius_m: f64,
    /// Episode-total task volume range; per-slot sizes divide by total slots.
    pub episode_data_gb_min: f64,
    pub episode_data_gb_max: f64,
    pub intensity_min_cpb: f64,
    pub intensity_max_cpb: f64,
    pub uav_flops: f64,
    pub uav_v_max_mps: f64,
    pub uav_e_max_wh: f64,
    pub uav_altitude_m: f64,
    pub airship_altitude_m: f64,
    pub airship_flops: f64,
    pub safety_distance_m: f64,
    pub max_gers_per_subarea: u32,
    pub consts: PhysConstants,
    /// None derives a budget between hover-and-offload and full-local spend.
    pub energy_budget_j_per_slot: Option<f64>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            name: String::from("desk"),
            uav_count: 3,
            rounds: 5,
            slots_per_round: 5,
            slot_seconds: 5.0,
            region_width_m: 50_000.0,
            region_height_m: 50_000.0,
            ger_count: 75,
            ger_flops_min: 0.0,
            ger_flops_max: 10.0e12,
            risk_count: 3,
            risk_radius_m: 500.0,
            episode_data_gb_min: 12.5,
            episode_data_gb_max: 125.0,
            intensity_min_cpb: 200.0,
            intensity_max_cpb: 500.0,
            uav_flops: 5.0e12,
            uav_v_max_mps: 30.0,
            uav_e_max_wh: 200.0,
            uav_altitude_m: 50.0,
            airship_altitude_m: 600.0,
            airship_flops: 20.0e12,
            safety_distance_m: 100.0,
            max_gers_per_subarea: 25,
            consts: PhysConstants::default(),
            energy_budget_j_per_slot: None,
        }
    }
}

/// Pick grid rows × cols = n with rows ≤ cols, rows as large as possible.
fn grid_shape(n: u32) -> (u32, u32) {
    let mut rows = 1;
    let mut r = 1;
    while r * r <= n {
        if n % r == 0 {
            rows = r;
        }
        r += 1;
    }
    (rows, n / rows)
}

pub fn generate_scenario(config: &GenConfig, seed: u64) -> Result<Scenario, GenError> {
    if config.uav_count == 0 {
        return Err(GenError::InvalidCount(String::from("uav_count must be >= 1")));
    }
    if config.rounds == 0 || config.slots_per_round == 0 {
        return Err(GenError::InvalidCount(String::from("rounds and slots_per_round must be >= 1")));
    }
    let n_sub = config.uav_count * config.rounds;
    let (rows, cols) = grid_shape(n_sub);

    let w = config.region_width_m;
    let h = config.region_height_m;
    let spacing = w / config.uav_count as f64;
    if spacing < config.safety_distance_m {
        return Err(GenError::RegionTooSmall(format!(
            "uav start spacing {spacing} m is below the safety distance {} m",
            config.safety_distance_m
        )));
    }

    let total_slots = (config.rounds * config.slots_per_round) as f64;
    let bits_min = config.episode_data_gb_min * 8.0e9 / total_slots;
    let bits_max = config.episode_data_gb_max * 8.0e9 / total_slots;
    let mean_bits = 0.5 * (bits_min + bits_max);
    let mean_cpb = 0.5 * (config.intensity_min_cpb + config.intensity_max_cpb);

    let cell_w = w / cols as f64;
    let cell_h = h / rows as f64;
    let mut rng_sub = stream(seed, &[tag::SCENARIO, 1]);
    let mut subareas = Vec::with_capacity(n_sub as usize);
    for r in 0..rows {
        for c in 0..cols {
            subareas.push(Subarea {
                min_x_m: c as f64 * cell_w,
                min_y_m: r as f64 * cell_h,
                max_x_m: (c + 1) as f64 * cell_w,
                max_y_m: (r + 1) as f64 * cell_h,
                data_bits: mean_bits,
                cycles_per_bit: rng_sub.gen_range(config.intensity_min_cpb..=config.intensity_max_cpb),
                mean_ger_flops: 0.0,
            });
        }
    }

    // GERs: spread evenly across subareas, remainder to the earliest cells,
    // positions uniform inside the cell.
    let mut rng_ger = stream(seed, &[tag::SCENARIO, 2]);
    let mut gers = Vec::with_capacity(config.ger_count as usize);
    let base = config.ger_count / n_sub;
    let rem = (config.ger_count % n_sub) as usize;
    for (b, sa) in subareas.iter().enumerate() {
        let count = base as usize + usize::from(b < rem);
        for _ in 0..count {
            let margin = 1.0;
            let x = rng_ger.gen_range(sa.min_x_m + margin..sa.max_x_m - margin);
            let y = rng_ger.gen_range(sa.min_y_m + margin..sa.max_y_m - margin);
            let f = rng_ger.gen_range(config.ger_flops_min..=config.ger_flops_max);
            gers.push(GerSpec { x_m: x, y_m: y, f_max_flops: f });
        }
    }
    let region_w = w;
    let region_h = h;
    for sa in subareas.iter_mut() {
        let inside: Vec<&GerSpec> = gers
            .iter()
            .filter(|g| sa.contains(g.x_m, g.y_m, region_w, region_h))
            .collect();
        if !inside.is_empty() {
            sa.mean_ger_flops =
                inside.iter().map(|g| g.f_max_flops).sum::<f64>() / inside.len() as f64;
        }
    }

    let edge_margin = config.safety_distance_m.max(50.0);
    let l_max = config.slots_per_round as f64 * config.uav_v_max_mps * config.slot_seconds;
    let uavs: Vec<UavSpec> = (0..config.uav_count)
        .map(|k| {
            let x = (k as f64 + 0.5) * spacing;
            UavSpec {
                start_x_m: x,
                start_y_m: edge_margin,
                end_x_m: x,
                end_y_m: h - edge_margin,
                altitude_m: config.uav_altitude_m,
                v_max_mps: config.uav_v_max_mps,
                d_min_mps: 0.0,
                l_max_m: l_max,
                f_flops: config.uav_flops,
                e_max_j: config.uav_e_max_wh * 3600.0,
            }
        })
        .collect();

    // Risk sources: keep clear of every UAV start/end point.
    let mut rng_risk = stream(seed, &[tag::SCENARIO, 3]);
    let mut risk_sources = Vec::with_capacity(config.risk_count as usize);
    let mut attempts = 0;
    while risk_sources.len() < config.risk_count as usize {
        attempts += 1;
        if attempts > 1000 {
            return Err(GenError::RegionTooSmall(String::from(
                "could not place risk sources clear of UAV endpoints",
            )));
        }
        let x = rng_risk.gen_range(0.0..w);
        let y = rng_risk.gen_range(0.0..h);
        let clear = uavs.iter().all(|u| {
            let d2s = (u.start_x_m - x).powi(2) + (u.start_y_m - y).powi(2);
            let d2e = (u.end_x_m - x).powi(2) + (u.end_y_m - y).powi(2);
            let r2 = (config.risk_radius_m * 2.0).powi(2);
            d2s > r2 && d2e > r2
        });
        if clear {
            risk_sources.push(RiskSource { x_m: x, y_m: y, radius_m: config.risk_radius_m });
        }
    }

    let consts = config.consts.clone();
    // Budget default: propulsion at top speed plus most of the mean full-local
    // compute spend. Processing everything on board overspends slightly, so the
    // virtual queue ramps unless some work is pushed off the UAV, but the gap
    // is small enough that a policy can close it with partial offloading.
    let energy_budget = config.energy_budget_j_per_slot.unwrap_or_else(|| {
        consts.propulsion_coeff * config.uav_v_max_mps.powi(2)
            + 0.9 * consts.capacitance_coeff * config.uav_flops.powi(2) * mean_bits * mean_cpb
    });

    Ok(Scenario {
        name: config.name.clone(),
        region_width_m: w,
        region_height_m: h,
        uavs,
        gers,
        airship: AirshipSpec {
            x_m: 0.5 * w,
            y_m: 0.5 * h,
            altitude_m: config.airship_altitude_m,
            f_flops: config.airship_flops,
        },
        subareas,
        risk_sources,
        time: TimeGrid {
            slots_per_round: config.slots_per_round,
            slot_seconds: config.slot_seconds,
            rounds: config.rounds,
        },
        tasks: TaskModel {
            data_bits_min: bits_min,
            data_bits_max: bits_max,
            deadline_s: config.slot_seconds,
        },
        consts,
        energy_budget_j_per_slot: energy_budget,
        safety_distance_m: config.safety_distance_m,
        max_gers_per_subarea: config.max_gers_per_subarea,
        seed,
    })
}

pub fn validate(scn: &Scenario) -> Vec<Violation> {
    let mut v = Vec::new();
    if scn.uavs.is_empty() {
        v.push(Violation::new(Constraint::Cardinality, &[], String::from("no UAVs")));
    }
    let expected = scn.uavs.len() as u32 * scn.time.rounds;
    if scn.subareas.len() as u32 != expected {
        v.push(Violation::new(
            Constraint::Cardinality,
            &[],
            format!("{} subareas, expected uavs*rounds = {expected}", scn.subareas.len()),
        ));
    }

    let c = &scn.consts;
    let positives = [
        ("carrier_freq_hz", c.carrier_freq_hz),
        ("light_speed_mps", c.light_speed_mps),
        ("ref_distance_m", c.ref_distance_m),
        ("pathloss_exp_los", c.pathloss_exp_los),
        ("pathloss_exp_nlos", c.pathloss_exp_nlos),
        ("mean_rx_power", c.mean_rx_power),
        ("bandwidth_hz", c.bandwidth_hz),
        ("tx_power_w", c.tx_power_w),
        ("noise_power_w", c.noise_power_w),
        ("capacitance_coeff", c.capacitance_coeff),
        ("propulsion_coeff", c.propulsion_coeff),
        ("detect_unit_energy", c.detect_unit_energy),
        ("cycles_per_flop", c.cycles_per_flop),
    ];
    for (name, val) in positives {
        if !(val > 0.0) || !val.is_finite() {
            v.push(Violation::new(Constraint::Constants, &[], format!("{name} must be > 0, got {val}")));
        }
    }
    if c.shadow_std_los_db < 0.0 || c.shadow_std_nlos_db < 0.0 {
        v.push(Violation::new(Constraint::Constants, &[], String::from("shadowing std must be >= 0")));
    }
    if c.pathloss_exp_nlos < c.pathloss_exp_los {
        v.push(Violation::new(
            Constraint::Constants,
            &[],
            String::from("NLoS path loss exponent below LoS exponent"),
        ));
    }
    if c.nakagami_shape_los < 0.5 || c.nakagami_shape_nlos < 0.5 {
        v.push(Violation::new(Constraint::Constants, &[], String::from("fading shape below 0.5")));
    }
    if !(scn.energy_budget_j_per_slot > 0.0) {
        v.push(Violation::new(Constraint::EnergyBudget, &[], String::from("energy budget must be > 0")));
    }
    if !(scn.tasks.data_bits_min > 0.0) || scn.tasks.data_bits_max < scn.tasks.data_bits_min {
        v.push(Violation::new(Constraint::Constants, &[], String::from("task size range invalid")));
    }
    if scn.tasks.deadline_s > scn.time.slot_seconds {
        v.push(Violation::new(
            Constraint::Constants,
            &[],
            String::from("task deadline exceeds the slot length"),
        ));
    }

    // Subarea tiling: pairwise interior overlap and total coverage area.
    let region_area = scn.region_width_m * scn.region_height_m;
    let mut area_sum = 0.0;
    for (i, a) in scn.subareas.iter().enumerate() {
        if a.max_x_m <= a.min_x_m || a.max_y_m <= a.min_y_m {
            v.push(Violation::new(Constraint::SubareaCoverage, &[i as u32], String::from("empty subarea")));
            continue;
        }
        if a.min_x_m < -1e-9
            || a.min_y_m < -1e-9
            || a.max_x_m > scn.region_width_m + 1e-9
            || a.max_y_m > scn.region_height_m + 1e-9
        {
            v.push(Violation::new(
                Constraint::SubareaCoverage,
                &[i as u32],
                String::from("subarea outside region"),
            ));
        }
        area_sum += (a.max_x_m - a.min_x_m) * (a.max_y_m - a.min_y_m);
        for (j, b) in scn.subareas.iter().enumerate().skip(i + 1) {
            let ox = a.max_x_m.min(b.max_x_m) - a.min_x_m.max(b.min_x_m);
            let oy = a.max_y_m.min(b.max_y_m) - a.min_y_m.max(b.min_y_m);
            if ox > 1e-9 && oy > 1e-9 {
                v.push(Violation::new(
                    Constraint::SubareaOverlap,
                    &[i as u32, j as u32],
                    format!("subareas {i} and {j} overlap"),
                ));
            }
        }
    }
    if !scn.subareas.is_empty() && (area_sum - region_area).abs() > 1e-6 * region_area {
        v.push(Violation::new(
            Constraint::SubareaCoverage,
            &[],
            format!("subarea area {area_sum} != region area {region_area}"),
        ));
    }

    for (i, g) in scn.gers.iter().enumerate() {
        if g.f_max_flops < 0.0 {
            v.push(Violation::new(
                Constraint::AllocRange,
                &[i as u32],
                format!("GER {i} has negative compute capacity"),
            ));
        }
        let hits = scn
            .subareas
            .iter()
            .filter(|s| s.contains(g.x_m, g.y_m, scn.region_width_m, scn.region_height_m))
            .count();
        if hits != 1 {
            v.push(Violation::new(
                Constraint::Placement,
                &[i as u32],
                format!("GER {i} lies in {hits} subareas"),
            ));
        }
    }

    for (i, u) in scn.uavs.iter().enumerate() {
        if !(u.v_max_mps > 0.0) || !(u.f_flops > 0.0) || !(u.e_max_j > 0.0) || !(u.altitude_m > 0.0) {
            v.push(Violation::new(
                Constraint::Constants,
                &[i as u32],
                format!("UAV {i} has a non-positive physical parameter"),
            ));
        }
        let inside = |x: f64, y: f64| {
            x >= 0.0 && x <= scn.region_width_m && y >= 0.0 && y <= scn.region_height_m
        };
        if !inside(u.start_x_m, u.start_y_m) || !inside(u.end_x_m, u.end_y_m) {
            v.push(Violation::new(
                Constraint::Placement,
                &[i as u32],
                format!("UAV {i} endpoint outside region"),
            ));
        }
        for (j, w) in scn.uavs.iter().enumerate().skip(i + 1) {
            let d = ((u.start_x_m - w.start_x_m).powi(2) + (u.start_y_m - w.start_y_m).powi(2)).sqrt();
            if d < scn.safety_distance_m {
                v.push(Violation::new(
                    Constraint::UavSeparation,
                    &[i as u32, j as u32],
                    format!("UAV starts {i} and {j} are {d:.1} m apart"),
                ));
            }
        }
    }
    v
}
