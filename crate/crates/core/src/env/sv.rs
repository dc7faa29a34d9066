//! Built-in policy for surrounding vehicles: free driving and
//! car-following via the intelligent driver model, plus a yielding
//! heuristic at route conflicts that approximates unsignalized
//! right-of-way behavior.

use crate::config::EnvConfig;
use crate::env::idm::idm_acceleration;
use crate::env::road::{Maneuver, RoadNetwork};
use crate::env::vehicle::{track_steer, VehicleState};
use crate::geom::wrap_angle;

/// Horizon for leader search along the own route, meters.
const LEADER_HORIZON: f64 = 40.0;
/// Arrival-time difference below which right-of-way rules break the tie.
const TIE_EPS: f64 = 0.5;
/// Speed floor when predicting arrival times, m/s.
const V_EPS: f64 = 0.5;
/// Standoff kept before the conflict zone while yielding, meters.
const STOP_BUFFER: f64 = 1.0;
/// Extra clearance the other vehicle must put behind a zone, meters.
const CLEAR_MARGIN: f64 = 0.5;

/// Compute the control for the vehicle at `idx` given everything else on
/// the road. All other vehicles, the ego included, are treated alike.
pub fn sv_policy_step(
    idx: usize,
    vehicles: &[VehicleState],
    net: &RoadNetwork,
    cfg: &EnvConfig,
) -> (f64, f64) {
    let me = &vehicles[idx];
    let route = net.route(me.route);
    let half_len = cfg.vehicle_length / 2.0;

    // Slow down on the junction approach and inside the box.
    let junction_entry = net.arm_length;
    let junction_exit = route.length() - net.arm_length;
    let mut v0 = if me.progress > junction_entry - cfg.idm.slow_zone && me.progress < junction_exit {
        cfg.idm.desired_speed_near
    } else {
        cfg.idm.desired_speed_far
    };

    // Cap the desired speed by the curvature ahead: tight enough turns
    // must be entered slowly, with comfortable braking budgeted in.
    for k in 0..=6 {
        let d = 2.0 * k as f64;
        let probe = me.progress + d;
        let kappa =
            wrap_angle(route.heading_at(probe + 0.5) - route.heading_at(probe - 0.5)).abs();
        if kappa > 1e-9 {
            let v_curve = (cfg.idm.max_lateral_accel / kappa).sqrt();
            let allowed = (v_curve * v_curve + 2.0 * cfg.idm.decel * d).sqrt();
            v0 = v0.min(allowed.max(1.0));
        }
    }

    let mut accel = idm_acceleration(&cfg.idm, me.speed, v0, f64::INFINITY, 0.0, cfg.max_accel);

    // Car-following: the nearest vehicle projected ahead on my route.
    let lateral_limit = cfg.vehicle_width + 0.3;
    let mut leader: Option<(f64, f64)> = None;
    for (j, other) in vehicles.iter().enumerate() {
        if j == idx || !other.active {
            continue;
        }
        if me.pos.distance(other.pos) > LEADER_HORIZON + 5.0 {
            continue;
        }
        let proj = route.project_near(
            other.pos,
            me.progress + LEADER_HORIZON / 2.0,
            LEADER_HORIZON / 2.0 + 2.0,
        );
        let ahead = proj.s - me.progress;
        if proj.distance > lateral_limit || ahead <= 0.1 || ahead > LEADER_HORIZON {
            continue;
        }
        let along = wrap_angle(other.heading - route.heading_at(proj.s));
        let v_lead = (other.speed * along.cos()).max(0.0);
        if leader.map_or(true, |(best, _)| ahead < best) {
            leader = Some((ahead, v_lead));
        }
    }
    if let Some((ahead, v_lead)) = leader {
        let gap = ahead - cfg.vehicle_length;
        accel = accel.min(idm_acceleration(
            &cfg.idm,
            me.speed,
            v0,
            gap,
            v_lead,
            cfg.max_accel,
        ));
    }

    // Conflict yielding against every vehicle whose route crosses mine.
    let my_front = me.progress + half_len;
    for (j, other) in vehicles.iter().enumerate() {
        if j == idx || !other.active {
            continue;
        }
        let Some(zone) = net.conflict(me.route, other.route) else {
            continue;
        };
        if my_front >= zone.enter_own {
            continue; // already committed to the zone
        }
        let other_rear = other.progress - half_len;
        if other_rear > zone.exit_other + CLEAR_MARGIN {
            continue; // they have cleared it
        }
        let their_zone = net
            .conflict(other.route, me.route)
            .expect("conflict table is symmetric in presence");
        let other_front = other.progress + half_len;
        let must_yield = if other_front >= their_zone.enter_own {
            true // they are already inside
        } else {
            let t_me = (zone.enter_own - my_front) / me.speed.max(V_EPS);
            let t_other = (their_zone.enter_own - other_front) / other.speed.max(V_EPS);
            if t_other < t_me - TIE_EPS {
                true
            } else if t_me < t_other - TIE_EPS {
                false
            } else {
                yields_on_tie(me, other, idx, j, net)
            }
        };
        if must_yield {
            let stop_gap = zone.enter_own - my_front - STOP_BUFFER;
            accel = accel.min(idm_acceleration(
                &cfg.idm,
                me.speed,
                v0,
                stop_gap,
                0.0,
                cfg.max_accel,
            ));
        }
    }

    (accel, track_steer(me, route, cfg))
}

/// Right-of-way when two vehicles would reach their conflict at the same
/// time: yield to traffic from the right; a left turn yields to oncoming
/// traffic; otherwise the lower vehicle index proceeds.
fn yields_on_tie(
    me: &VehicleState,
    other: &VehicleState,
    my_idx: usize,
    other_idx: usize,
    net: &RoadNetwork,
) -> bool {
    const ANGLE_TOL: f64 = 0.1;
    let my_route = net.route(me.route);
    let other_route = net.route(other.route);
    let delta = wrap_angle(
        other_route.entry.entry_heading() - my_route.entry.entry_heading(),
    );
    if (delta.abs() - std::f64::consts::PI).abs() < ANGLE_TOL {
        let me_left = my_route.maneuver == Maneuver::Left;
        let other_left = other_route.maneuver == Maneuver::Left;
        if me_left != other_left {
            return me_left;
        }
    } else if (delta - std::f64::consts::FRAC_PI_2).abs() < ANGLE_TOL {
        return true; // they approach from my right
    } else if (delta + std::f64::consts::FRAC_PI_2).abs() < ANGLE_TOL {
        return false; // I approach from theirs
    }
    my_idx > other_idx
}
