//! Probabilistic air-to-ground channel: elevation-angle LoS probability,
//! Nakagami small-scale fading, log-distance path loss, log-normal
//! shadowing, the blended composite gain, and the achievable rate.

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::scenario::PhysConstants;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSample {
    pub p_los: f64,
    pub gain_los: f64,
    pub gain_nlos: f64,
    /// Composite linear power gain: p_los·gain_los + (1−p_los)·gain_nlos.
    pub gain: f64,
    pub rate_bps: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ChannelError {
    #[error("fading shape {0} below 0.5")]
    InvalidShape(f64),
    #[error("distance {0} m below reference distance {1} m")]
    DistanceBelowReference(f64, f64),
}

/// Elevation-angle sigmoid: p = 1/(1 + a·exp(−b(φ_deg − a))).
/// `a = 0` collapses to pure LoS.
pub fn los_probability(uav_pos: (f64, f64, f64), ger_pos: (f64, f64, f64), consts: &PhysConstants) -> f64 {
    let dx = uav_pos.0 - ger_pos.0;
    let dy = uav_pos.1 - ger_pos.1;
    let dz = uav_pos.2 - ger_pos.2;
    let horiz = (dx * dx + dy * dy).sqrt();
    let elev_deg = dz.atan2(horiz).to_degrees();
    let a = consts.los_sigmoid_a;
    let b = consts.los_sigmoid_b;
    1.0 / (1.0 + a * (-b * (elev_deg - a)).exp())
}

/// Nakagami amplitude: h = sqrt(G), G ~ Gamma(shape w, scale p̄/w), so
/// E[h²] = p̄.
pub fn sample_fading<R: Rng + ?Sized>(shape_w: f64, mean_power: f64, rng: &mut R) -> Result<f64, ChannelError> {
    if shape_w < 0.5 || !shape_w.is_finite() {
        return Err(ChannelError::InvalidShape(shape_w));
    }
    let gamma = Gamma::new(shape_w, mean_power / shape_w).expect("validated shape/scale");
    Ok(gamma.sample(rng).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    Los,
    Nlos,
}

/// Log-distance path loss: L = (4π d₀ f_c / c)² · (d/d₀)^β, linear (≥ 1 for
/// sane constants).
pub fn path_loss(distance_m: f64, kind: LinkKind, consts: &PhysConstants) -> Result<f64, ChannelError> {
    if distance_m < consts.ref_distance_m {
        return Err(ChannelError::DistanceBelowReference(distance_m, consts.ref_distance_m));
    }
    let beta = match kind {
        LinkKind::Los => consts.pathloss_exp_los,
        LinkKind::Nlos => consts.pathloss_exp_nlos,
    };
    let ref_term = 4.0 * core::f64::consts::PI * consts.ref_distance_m * consts.carrier_freq_hz
        / consts.light_speed_mps;
    Ok(ref_term * ref_term * (distance_m / consts.ref_distance_m).powf(beta))
}

/// Zero-mean Gaussian shadowing in dB; apply as factor 10^(−F/10).
pub fn sample_shadowing<R: Rng + ?Sized>(sigma_db: f64, rng: &mut R) -> f64 {
    if sigma_db == 0.0 {
        return 0.0;
    }
    let z: f64 = StandardNormal.sample(rng);
    sigma_db * z
}

pub fn shadowing_factor(loss_db: f64) -> f64 {
    10.0f64.powf(-loss_db / 10.0)
}

/// Draw one composite link realization between a UAV and a ground node.
///
/// Branch draw order is fixed (LoS fading, LoS shadowing, NLoS fading, NLoS
/// shadowing) so identical rng states give identical samples.
pub fn link_sample<R: Rng + ?Sized>(
    uav_pos: (f64, f64, f64),
    ger_pos: (f64, f64, f64),
    consts: &PhysConstants,
    rng: &mut R,
) -> Result<LinkSample, ChannelError> {
    link_sample_with_plos(uav_pos, ger_pos, consts, None, rng)
}

/// Same as `link_sample` with an optional LoS-probability override (the
/// airship link forces 1.0).
pub fn link_sample_with_plos<R: Rng + ?Sized>(
    uav_pos: (f64, f64, f64),
    ger_pos: (f64, f64, f64),
    consts: &PhysConstants,
    p_los_override: Option<f64>,
    rng: &mut R,
) -> Result<LinkSample, ChannelError> {
    let dx = uav_pos.0 - ger_pos.0;
    let dy = uav_pos.1 - ger_pos.1;
    let dz = uav_pos.2 - ger_pos.2;
    let dist = (dx * dx + dy * dy + dz * dz).sqrt().max(consts.ref_distance_m);
    let p_los = p_los_override.unwrap_or_else(|| los_probability(uav_pos, ger_pos, consts));

    let h_los = sample_fading(consts.nakagami_shape_los, consts.mean_rx_power, rng)?;
    let f_los = sample_shadowing(consts.shadow_std_los_db, rng);
    let h_nlos = sample_fading(consts.nakagami_shape_nlos, consts.mean_rx_power, rng)?;
    let f_nlos = sample_shadowing(consts.shadow_std_nlos_db, rng);

    let gain_los = h_los * h_los / path_loss(dist, LinkKind::Los, consts)? * shadowing_factor(f_los);
    let gain_nlos =
        h_nlos * h_nlos / path_loss(dist, LinkKind::Nlos, consts)? * shadowing_factor(f_nlos);
    let gain = p_los * gain_los + (1.0 - p_los) * gain_nlos;
    Ok(LinkSample {
        p_los,
        gain_los,
        gain_nlos,
        gain,
        rate_bps: transmission_rate(gain, consts),
    })
}

/// Shannon rate: R = B_w · log2(1 + P_u·gain/σ²).
pub fn transmission_rate(gain: f64, consts: &PhysConstants) -> f64 {
    let snr = consts.tx_power_w * gain / consts.noise_power_w;
    consts.bandwidth_hz * (1.0 + snr).log2()
}

/// Expected composite gain with fading and shadowing collapsed to their
/// means (E[h²] = p̄, shadowing factor 1): the deterministic skeleton used by
/// candidate evaluation when a frozen draw is not wanted.
pub fn mean_gain(uav_pos: (f64, f64, f64), ger_pos: (f64, f64, f64), consts: &PhysConstants) -> Result<f64, ChannelError> {
    let dx = uav_pos.0 - ger_pos.0;
    let dy = uav_pos.1 - ger_pos.1;
    let dz = uav_pos.2 - ger_pos.2;
    let dist = (dx * dx + dy * dy + dz * dz).sqrt().max(consts.ref_distance_m);
    let p_los = los_probability(uav_pos, ger_pos, consts);
    let g_l = consts.mean_rx_power / path_loss(dist, LinkKind::Los, consts)?;
    let g_n = consts.mean_rx_power / path_loss(dist, LinkKind::Nlos, consts)?;
    Ok(p_los * g_l + (1.0 - p_los) * g_n)
}

/// Convenience: dBm to watts (10^((dbm − 30)/10)).
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10.0f64.powf((dbm - 30.0) / 10.0)
}
