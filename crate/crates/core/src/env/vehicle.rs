//! Per-vehicle state and the kinematic bicycle step that advances it.

use crate::config::EnvConfig;
use crate::env::road::Route;
use crate::geom::{wrap_angle, Obb, Vec2};

/// How far around the previous arc length the projection searches when
/// updating progress. Generous against the ~1.2 m worst-case step.
const PROGRESS_WINDOW: f64 = 6.0;

/// One vehicle in the world. Index 0 in the world's vehicle list is the
/// ego vehicle; the rest follow the built-in surrounding-vehicle policy.
#[derive(Debug, Clone)]
pub struct VehicleState {
    /// Route this vehicle follows.
    pub route: usize,
    /// Footprint center in world coordinates.
    pub pos: Vec2,
    /// Yaw angle, radians.
    pub heading: f64,
    /// Forward speed, m/s (never negative).
    pub speed: f64,
    /// Monotone arc length along the route, tracked across steps.
    pub progress: f64,
    /// Cleared when the vehicle leaves the map; inactive vehicles are
    /// skipped by observation, collision, and policy code.
    pub active: bool,
}

impl VehicleState {
    pub fn new(route: usize, pos: Vec2, heading: f64, speed: f64, progress: f64) -> VehicleState {
        VehicleState {
            route,
            pos,
            heading,
            speed,
            progress,
            active: true,
        }
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::from_angle(self.heading).scale(self.speed)
    }

    pub fn obb(&self, cfg: &EnvConfig) -> Obb {
        Obb {
            center: self.pos,
            heading: self.heading,
            half_len: cfg.vehicle_length / 2.0,
            half_wid: cfg.vehicle_width / 2.0,
        }
    }
}

/// Pure-pursuit steering toward a lookahead point on the vehicle's route.
/// Every vehicle, ego included, keeps its lane with this law.
pub fn track_steer(state: &VehicleState, route: &Route, cfg: &EnvConfig) -> f64 {
    let lookahead = cfg.lookahead_base + cfg.lookahead_time * state.speed;
    let target = route.point_at(state.progress + lookahead);
    let to_target = target - state.pos;
    let alpha = wrap_angle(to_target.angle() - state.heading);
    let steer = (2.0 * cfg.wheelbase * alpha.sin()).atan2(lookahead);
    steer.clamp(-cfg.max_steer, cfg.max_steer)
}

/// Advance a vehicle one simulation step with the kinematic bicycle
/// model. Inputs are clamped to the physical limits first; speed never
/// drops below zero. Progress along the route is updated by a windowed
/// projection so it can only move forward.
pub fn apply_control(
    state: &mut VehicleState,
    route: &Route,
    accel: f64,
    steer: f64,
    cfg: &EnvConfig,
) {
    let accel = accel.clamp(-cfg.max_accel, cfg.max_accel);
    let steer = steer.clamp(-cfg.max_steer, cfg.max_steer);
    let dt = cfg.dt;
    let v = state.speed;

    state.pos.x += v * state.heading.cos() * dt;
    state.pos.y += v * state.heading.sin() * dt;
    state.heading = wrap_angle(state.heading + v * steer.tan() / cfg.wheelbase * dt);
    state.speed = (v + accel * dt).max(0.0);

    let proj = route.project_near(state.pos, state.progress, PROGRESS_WINDOW);
    state.progress = state.progress.max(proj.s);
}
