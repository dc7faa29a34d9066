//! Intelligent driver model: the longitudinal controller used by every
//! surrounding vehicle, both for free driving and for yielding.

use crate::config::IdmConfig;

/// Commanded acceleration for a vehicle at speed `v` with desired speed
/// `v0`, following something `gap` meters ahead that moves at `v_lead`.
///
/// Pass `f64::INFINITY` as the gap for free driving. A non-positive gap
/// means contact is imminent and returns `-max_accel` directly. The
/// result is clamped to `[-max_accel, max_accel]`.
pub fn idm_acceleration(
    cfg: &IdmConfig,
    v: f64,
    v0: f64,
    gap: f64,
    v_lead: f64,
    max_accel: f64,
) -> f64 {
    if gap <= 0.0 {
        return -max_accel;
    }
    let free = (v / v0).powf(cfg.exponent);
    let interaction = if gap.is_finite() {
        let closing = v - v_lead;
        let desired_gap = cfg.min_gap
            + v * cfg.time_headway
            + v * closing / (2.0 * (cfg.accel * cfg.decel).sqrt());
        let desired_gap = desired_gap.max(cfg.min_gap);
        (desired_gap / gap).powi(2)
    } else {
        0.0
    };
    (cfg.accel * (1.0 - free - interaction)).clamp(-max_accel, max_accel)
}
