//! The intersection world: road network construction, scenario spawning,
//! simultaneous vehicle stepping, and the safety checks (collision and
//! off-road detection) that the decision layer consumes.

pub mod idm;
pub mod road;
pub mod sv;
pub mod vehicle;

use crate::config::EnvConfig;
use crate::geom::sat_overlap_score;
use rand::Rng;
use road::{Arm, Maneuver, RoadError, RoadNetwork};
use sv::sv_policy_step;
use thiserror::Error;
use vehicle::{apply_control, VehicleState};

pub use road::build_intersection;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Road(#[from] RoadError),
    #[error("placed only {placed} of {requested} surrounding vehicles (spawn window too crowded)")]
    SpawnFailed { placed: usize, requested: usize },
}

/// Snapshot of every vehicle plus the episode clock. Vehicle 0 is the
/// ego; the rest run the built-in surrounding-vehicle policy.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub vehicles: Vec<VehicleState>,
    pub time: f64,
    pub steps: u64,
}

impl WorldState {
    pub fn ego(&self) -> &VehicleState {
        &self.vehicles[0]
    }

    /// Active surrounding vehicles (everything but the ego).
    pub fn active_sv_count(&self) -> usize {
        self.vehicles[1..].iter().filter(|v| v.active).count()
    }
}

/// Entry arms available to surrounding vehicles. The ego always enters
/// from the south, so its arm is excluded to keep the approach clear.
const SV_ARMS: [Arm; 3] = [Arm::East, Arm::North, Arm::West];

/// Place the ego and `n_sv` surrounding vehicles without overlap.
///
/// The ego enters from the south on the route for `ego_maneuver`;
/// surrounding vehicles draw an entry arm, maneuver, position, and speed
/// per attempt until they fit clear of everyone already placed.
pub fn spawn_scenario<R: Rng>(
    net: &RoadNetwork,
    cfg: &EnvConfig,
    n_sv: usize,
    ego_maneuver: Maneuver,
    rng: &mut R,
) -> Result<WorldState, EnvError> {
    let mut vehicles = Vec::with_capacity(n_sv + 1);

    let ego_route = net.route_id(Arm::South, ego_maneuver);
    let ego_s = rng.gen_range(cfg.ego_spawn_range[0]..cfg.ego_spawn_range[1]);
    let ego_speed = rng.gen_range(cfg.spawn_speed_range[0]..cfg.spawn_speed_range[1]);
    vehicles.push(place(net, ego_route, ego_s, ego_speed));

    for placed in 0..n_sv {
        let mut found = false;
        for _ in 0..cfg.spawn_retries {
            let arm = SV_ARMS[rng.gen_range(0..SV_ARMS.len())];
            let maneuver = Maneuver::ALL[rng.gen_range(0..Maneuver::ALL.len())];
            let s = rng.gen_range(cfg.sv_spawn_range[0]..cfg.sv_spawn_range[1]);
            let speed = rng.gen_range(cfg.spawn_speed_range[0]..cfg.spawn_speed_range[1]);
            let candidate = place(net, net.route_id(arm, maneuver), s, speed);
            if clear_of_all(&candidate, &vehicles, cfg) {
                vehicles.push(candidate);
                found = true;
                break;
            }
        }
        if !found {
            return Err(EnvError::SpawnFailed {
                placed,
                requested: n_sv,
            });
        }
    }

    Ok(WorldState {
        vehicles,
        time: 0.0,
        steps: 0,
    })
}

fn place(net: &RoadNetwork, route: usize, s: f64, speed: f64) -> VehicleState {
    let r = net.route(route);
    VehicleState::new(route, r.point_at(s), r.heading_at(s), speed, s)
}

/// True when `candidate` keeps at least the spawn margin from every
/// existing footprint along some separating axis.
fn clear_of_all(candidate: &VehicleState, others: &[VehicleState], cfg: &EnvConfig) -> bool {
    let box_a = candidate.obb(cfg);
    others
        .iter()
        .all(|v| sat_overlap_score(&box_a, &v.obb(cfg)) < -cfg.spawn_margin)
}

/// Advance the whole world one simulation step. Surrounding-vehicle
/// controls are all computed from the pre-step snapshot, then every
/// vehicle moves at once; vehicles that finish their route deactivate.
pub fn env_step(
    world: &mut WorldState,
    net: &RoadNetwork,
    cfg: &EnvConfig,
    ego_accel: f64,
    ego_steer: f64,
) {
    let mut controls = Vec::with_capacity(world.vehicles.len());
    controls.push((ego_accel, ego_steer));
    for idx in 1..world.vehicles.len() {
        if world.vehicles[idx].active {
            controls.push(sv_policy_step(idx, &world.vehicles, net, cfg));
        } else {
            controls.push((0.0, 0.0));
        }
    }

    for (idx, vehicle) in world.vehicles.iter_mut().enumerate() {
        if !vehicle.active {
            continue;
        }
        let (accel, steer) = controls[idx];
        apply_control(vehicle, net.route(vehicle.route), accel, steer, cfg);
        if idx > 0 && vehicle.progress >= net.route(vehicle.route).length() - 1.0 {
            vehicle.active = false;
        }
    }

    world.steps += 1;
    world.time = world.steps as f64 * cfg.dt;
}

/// All pairs of active vehicles whose footprints currently overlap,
/// reported as `(i, j)` with `i < j`.
pub fn detect_collisions(world: &WorldState, cfg: &EnvConfig) -> Vec<(usize, usize)> {
    let reach = cfg.vehicle_length + cfg.vehicle_width;
    let mut pairs = Vec::new();
    for i in 0..world.vehicles.len() {
        if !world.vehicles[i].active {
            continue;
        }
        for j in (i + 1)..world.vehicles.len() {
            if !world.vehicles[j].active {
                continue;
            }
            let a = &world.vehicles[i];
            let b = &world.vehicles[j];
            if a.pos.distance(b.pos) > reach {
                continue;
            }
            if sat_overlap_score(&a.obb(cfg), &b.obb(cfg)) >= 0.0 {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// True when any corner of the vehicle leaves the drivable region by
/// more than the configured tolerance.
pub fn off_road(vehicle: &VehicleState, net: &RoadNetwork, cfg: &EnvConfig) -> bool {
    vehicle
        .obb(cfg)
        .corners()
        .iter()
        .any(|&corner| net.offroad_distance(corner) > cfg.offroad_tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (EnvConfig, RoadNetwork) {
        let cfg = EnvConfig::default();
        let net = build_intersection(&cfg).unwrap();
        (cfg, net)
    }

    #[test]
    fn spawning_is_deterministic_per_seed() {
        let (cfg, net) = setup();
        let spawn = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            spawn_scenario(&net, &cfg, 4, Maneuver::Straight, &mut rng).unwrap()
        };
        let a = spawn(9);
        let b = spawn(9);
        assert_eq!(a.vehicles.len(), 5);
        for (va, vb) in a.vehicles.iter().zip(&b.vehicles) {
            assert_eq!(va.pos.x, vb.pos.x);
            assert_eq!(va.pos.y, vb.pos.y);
            assert_eq!(va.speed, vb.speed);
            assert_eq!(va.route, vb.route);
        }
        let c = spawn(10);
        let moved = a
            .vehicles
            .iter()
            .zip(&c.vehicles)
            .any(|(va, vc)| va.pos.x != vc.pos.x || va.pos.y != vc.pos.y);
        assert!(moved);
    }

    #[test]
    fn spawned_vehicles_do_not_overlap() {
        let (cfg, net) = setup();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let world = spawn_scenario(&net, &cfg, 6, Maneuver::Left, &mut rng).unwrap();
            assert!(detect_collisions(&world, &cfg).is_empty());
            assert_eq!(world.ego().route, net.route_id(Arm::South, Maneuver::Left));
        }
    }

    #[test]
    fn impossible_spawn_reports_failure() {
        let (mut cfg, _) = setup();
        cfg.sv_spawn_range = [20.0, 20.5];
        let net = build_intersection(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // One vehicle per arm fits in a half-meter window; five cannot.
        let err = spawn_scenario(&net, &cfg, 5, Maneuver::Straight, &mut rng).unwrap_err();
        assert!(matches!(err, EnvError::SpawnFailed { .. }));
    }

    #[test]
    fn stepping_advances_the_clock_and_traffic_flows() {
        let (cfg, net) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut world = spawn_scenario(&net, &cfg, 3, Maneuver::Straight, &mut rng).unwrap();
        let before: Vec<f64> = world.vehicles[1..].iter().map(|v| v.progress).collect();
        for _ in 0..50 {
            env_step(&mut world, &net, &cfg, 0.0, 0.0);
        }
        assert_eq!(world.steps, 50);
        assert!((world.time - 5.0).abs() < 1e-12);
        for (v, b) in world.vehicles[1..].iter().zip(&before) {
            assert!(v.progress > *b);
        }
    }

    #[test]
    fn surrounding_vehicles_eventually_leave_the_map() {
        let (cfg, net) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut world = spawn_scenario(&net, &cfg, 2, Maneuver::Right, &mut rng).unwrap();
        // Park the ego at its spawn; let the traffic drain out.
        for _ in 0..2500 {
            let brake = -cfg.max_accel;
            env_step(&mut world, &net, &cfg, brake, 0.0);
        }
        assert_eq!(world.active_sv_count(), 0);
        assert!(world.ego().active);
    }

    #[test]
    fn overlapping_footprints_are_detected() {
        let (cfg, net) = setup();
        let route = net.route_id(Arm::South, Maneuver::Straight);
        let r = net.route(route);
        let world = WorldState {
            vehicles: vec![
                VehicleState::new(route, r.point_at(20.0), r.heading_at(20.0), 5.0, 20.0),
                VehicleState::new(route, r.point_at(23.0), r.heading_at(23.0), 5.0, 23.0),
                VehicleState::new(route, r.point_at(40.0), r.heading_at(40.0), 5.0, 40.0),
            ],
            time: 0.0,
            steps: 0,
        };
        assert_eq!(detect_collisions(&world, &cfg), vec![(0, 1)]);
    }

    #[test]
    fn off_road_flags_vehicles_outside_the_cross() {
        let (cfg, net) = setup();
        let mut v = VehicleState::new(0, Vec2::new(2.0, -20.0), std::f64::consts::FRAC_PI_2, 0.0, 0.0);
        assert!(!off_road(&v, &net, &cfg));
        v.pos = Vec2::new(5.0, 5.0);
        assert!(off_road(&v, &net, &cfg));
        // Straddling the lane edge within tolerance is still on the road.
        v.pos = Vec2::new(3.0, -20.0);
        v.heading = std::f64::consts::FRAC_PI_2;
        assert!(!off_road(&v, &net, &cfg));
        v.pos = Vec2::new(4.0, -20.0);
        assert!(off_road(&v, &net, &cfg));
    }
}
