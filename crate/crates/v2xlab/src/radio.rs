//! Physical-layer abstraction: power conversion, log-distance path loss,
//! range/sensitivity gating, and slot-level collision resolution with
//! power-sum capture.
//!
//! Reception is resolved at slot granularity: every frame handed to
//! [`resolve_slot`] is treated as concurrent with every other frame in the
//! same slot. A frame is decodable at a receiver when it passes the hard
//! range gate and the sensitivity gate; it is actually received when its
//! power exceeds the summed power of all other in-range frames by at least
//! the capture threshold. All operations are pure functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;

/// Radio parameters. Defaults model a 20 mW, 6 Mbps on-board unit with an
/// isotropic antenna and free-space-like propagation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub tx_power_mw: f64,
    pub bitrate_bps: f64,
    /// Sensitivity threshold: frames below this receive power are undecodable.
    pub min_power_dbm: f64,
    pub noise_floor_dbm: f64,
    /// Hard reception range; also bounds which frames contribute interference.
    pub range_m: f64,
    pub path_loss_exponent: f64,
    /// Path loss at the 1 m reference distance.
    pub ref_loss_db: f64,
    /// A frame must exceed the power sum of all other in-range frames by this
    /// margin to be captured.
    pub capture_threshold_db: f64,
    /// Reception-resolution slot length; by convention equal to the
    /// simulation step.
    pub slot_s: f64,
    /// Per-antenna gain, applied at both ends of the link.
    pub antenna_gain_dbi: f64,
    /// Optional SINR gate against the noise floor; disabled by default.
    pub sinr_threshold_db: Option<f64>,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            tx_power_mw: 20.0,
            bitrate_bps: 6_000_000.0,
            min_power_dbm: -110.0,
            noise_floor_dbm: -98.0,
            range_m: 400.0,
            path_loss_exponent: 2.0,
            ref_loss_db: 47.85,
            capture_threshold_db: 10.0,
            slot_s: 1.0,
            antenna_gain_dbi: 0.0,
            sinr_threshold_db: None,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<(), RadioError> {
        if !(self.tx_power_mw > 0.0) {
            return Err(RadioError::InvalidConfig("tx_power_mw must be positive".into()));
        }
        if !(self.bitrate_bps > 0.0) {
            return Err(RadioError::InvalidConfig("bitrate_bps must be positive".into()));
        }
        if !(self.range_m > 0.0) {
            return Err(RadioError::InvalidConfig("range_m must be positive".into()));
        }
        if !(self.path_loss_exponent >= 1.0) {
            return Err(RadioError::InvalidConfig(
                "path_loss_exponent must be at least 1".into(),
            ));
        }
        if !(self.slot_s > 0.0) {
            return Err(RadioError::InvalidConfig("slot_s must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RadioError {
    #[error("power must be positive to convert to dBm, got {0}")]
    NonpositivePower(f64),
    #[error("invalid radio config: {0}")]
    InvalidConfig(String),
}

/// Converts milliwatts to dBm. Errors on nonpositive power.
pub fn dbm_from_milliwatts(p_mw: f64) -> Result<f64, RadioError> {
    if !(p_mw > 0.0) {
        return Err(RadioError::NonpositivePower(p_mw));
    }
    Ok(10.0 * p_mw.log10())
}

/// Converts dBm to milliwatts.
pub fn milliwatts_from_dbm(p_dbm: f64) -> f64 {
    10.0_f64.powf(p_dbm / 10.0)
}

/// Log-distance path loss in dB at distance `d_m`. Distances below the 1 m
/// reference are clamped to it.
pub fn path_loss_db(cfg: &RadioConfig, d_m: f64) -> f64 {
    cfg.ref_loss_db + 10.0 * cfg.path_loss_exponent * d_m.max(1.0).log10()
}

/// Receive power in dBm at distance `d_m`: transmit power plus the gain of
/// both antennas minus path loss. Assumes a validated config.
pub fn rx_power_dbm(cfg: &RadioConfig, d_m: f64) -> f64 {
    let tx_dbm = dbm_from_milliwatts(cfg.tx_power_mw)
        .expect("tx_power_mw is positive by RadioConfig::validate");
    tx_dbm + 2.0 * cfg.antenna_gain_dbi - path_loss_db(cfg, d_m)
}

/// Outcome of a single (receiver, frame) pairing within a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    Received,
    OutOfRange,
    BelowSensitivity,
    LostCollision,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Received => "received",
            Verdict::OutOfRange => "out_of_range",
            Verdict::BelowSensitivity => "below_sensitivity",
            Verdict::LostCollision => "lost_collision",
        }
    }
}

/// Interference-free classification of a link at distance `d_m`: the range
/// gate (inclusive at `range_m`) and then the sensitivity gate.
pub fn classify_reception(cfg: &RadioConfig, d_m: f64) -> Verdict {
    if d_m > cfg.range_m {
        return Verdict::OutOfRange;
    }
    if rx_power_dbm(cfg, d_m) < cfg.min_power_dbm {
        return Verdict::BelowSensitivity;
    }
    Verdict::Received
}

/// Airtime of a payload at the configured bitrate.
pub fn airtime_s(payload_bytes: u32, bitrate_bps: f64) -> f64 {
    f64::from(payload_bytes) * 8.0 / bitrate_bps
}

/// One on-air transmission within a slot.
#[derive(Debug, Clone)]
pub struct Frame<S, M> {
    pub msg: M,
    pub sender: S,
    pub tx_pos: Vec2,
    pub start_s: f64,
    pub airtime_s: f64,
}

/// Verdict for one frame at one receiver.
#[derive(Debug, Clone)]
pub struct ReceptionOutcome<S, M> {
    pub receiver: S,
    pub sender: S,
    pub msg: M,
    pub distance_m: f64,
    pub verdict: Verdict,
}

/// Resolves one slot: every frame is judged at every receiver except its own
/// sender (a station never receives its own frame).
///
/// Per receiver, a frame outside `range_m` is `OutOfRange`; in range but
/// below the sensitivity threshold, `BelowSensitivity`. The remaining
/// candidates compete: a candidate is `Received` when its power exceeds the
/// power sum of all other in-range frames (sensitivity does not shield
/// interference) by at least `capture_threshold_db`, otherwise it is
/// `LostCollision`. Two equal-power candidates therefore destroy each other.
/// Output is sorted by (receiver, sender, msg).
pub fn resolve_slot<S, M>(
    frames: &[Frame<S, M>],
    receivers: &[(S, Vec2)],
    cfg: &RadioConfig,
) -> Vec<ReceptionOutcome<S, M>>
where
    S: Ord + Clone,
    M: Ord + Clone,
{
    let mut outcomes = Vec::new();
    for (rx_id, rx_pos) in receivers {
        // Gather link data once per frame for this receiver.
        let links: Vec<(usize, f64, f64)> = frames
            .iter()
            .enumerate()
            .filter(|(_, f)| f.sender != *rx_id)
            .map(|(i, f)| {
                let d = f.tx_pos.distance(*rx_pos);
                (i, d, rx_power_dbm(cfg, d))
            })
            .collect();
        let in_range_sum_mw: f64 = links
            .iter()
            .filter(|(_, d, _)| *d <= cfg.range_m)
            .map(|(_, _, p)| milliwatts_from_dbm(*p))
            .sum();
        for (i, d, p_dbm) in &links {
            let frame = &frames[*i];
            let mut verdict = classify_reception(cfg, *d);
            if verdict == Verdict::Received {
                let interference_mw = in_range_sum_mw - milliwatts_from_dbm(*p_dbm);
                let captured = if interference_mw <= 0.0 {
                    true
                } else {
                    *p_dbm - 10.0 * interference_mw.log10() >= cfg.capture_threshold_db
                };
                let sinr_ok = cfg
                    .sinr_threshold_db
                    .is_none_or(|thr| *p_dbm - cfg.noise_floor_dbm >= thr);
                if !sinr_ok {
                    verdict = Verdict::BelowSensitivity;
                } else if !captured {
                    verdict = Verdict::LostCollision;
                }
            }
            outcomes.push(ReceptionOutcome {
                receiver: rx_id.clone(),
                sender: frame.sender.clone(),
                msg: frame.msg.clone(),
                distance_m: *d,
                verdict,
            });
        }
    }
    outcomes.sort_by(|a, b| {
        (&a.receiver, &a.sender, &a.msg).cmp(&(&b.receiver, &b.sender, &b.msg))
    });
    outcomes
}
