//! Four-way intersection geometry: lane-center routes through an
//! unsignalized junction, plus the precomputed route-pair conflict table
//! that the surrounding-vehicle yielding logic consults.
//!
//! Layout: the junction box is centered on the origin and spans one lane
//! width per direction on each side. Traffic keeps right, so every arm
//! carries one entry lane and one exit lane at `±lane_width / 2`. Twelve
//! routes (four arms, three maneuvers each) are built from straight
//! segments and circular arcs; left turns sweep the wide quarter circle,
//! right turns the tight one.

use crate::config::EnvConfig;
use crate::geom::{project_on_segment, wrap_angle, Aabb, Vec2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RoadError {
    #[error("{name} must be positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },
}

/// Compass arm of the intersection, in counterclockwise order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    South,
    East,
    North,
    West,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::South, Arm::East, Arm::North, Arm::West];

    pub fn index(self) -> usize {
        match self {
            Arm::South => 0,
            Arm::East => 1,
            Arm::North => 2,
            Arm::West => 3,
        }
    }

    /// Heading of traffic entering the junction from this arm.
    pub fn entry_heading(self) -> f64 {
        wrap_angle(std::f64::consts::FRAC_PI_2 + self.index() as f64 * std::f64::consts::FRAC_PI_2)
    }
}

/// Turn maneuver relative to the entry direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Maneuver {
    Left,
    Straight,
    Right,
}

impl Maneuver {
    pub const ALL: [Maneuver; 3] = [Maneuver::Left, Maneuver::Straight, Maneuver::Right];

    pub fn index(self) -> usize {
        match self {
            Maneuver::Left => 0,
            Maneuver::Straight => 1,
            Maneuver::Right => 2,
        }
    }
}

/// One piece of a route centerline.
#[derive(Debug, Clone)]
enum Segment {
    Line {
        start: Vec2,
        dir: Vec2,
        len: f64,
    },
    /// Circular arc; positive sweep turns counterclockwise.
    Arc {
        center: Vec2,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

impl Segment {
    fn len(&self) -> f64 {
        match self {
            Segment::Line { len, .. } => *len,
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    fn point_at(&self, s: f64) -> Vec2 {
        match self {
            Segment::Line { start, dir, .. } => *start + dir.scale(s),
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let theta = start_angle + sweep.signum() * s / radius;
                *center + Vec2::from_angle(theta).scale(*radius)
            }
        }
    }

    fn heading_at(&self, s: f64) -> f64 {
        match self {
            Segment::Line { dir, .. } => dir.angle(),
            Segment::Arc {
                radius,
                start_angle,
                sweep,
                ..
            } => {
                let theta = start_angle + sweep.signum() * s / radius;
                wrap_angle(theta + sweep.signum() * std::f64::consts::FRAC_PI_2)
            }
        }
    }

    fn rotated(&self, quarter_turns: usize) -> Segment {
        let rot = |p: Vec2| -> Vec2 {
            let mut q = p;
            for _ in 0..quarter_turns {
                q = Vec2::new(-q.y, q.x);
            }
            q
        };
        let angle_shift = quarter_turns as f64 * std::f64::consts::FRAC_PI_2;
        match self {
            Segment::Line { start, dir, len } => Segment::Line {
                start: rot(*start),
                dir: rot(*dir),
                len: *len,
            },
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => Segment::Arc {
                center: rot(*center),
                radius: *radius,
                start_angle: start_angle + angle_shift,
                sweep: *sweep,
            },
        }
    }
}

/// A lane-center path from the far end of an entry arm to the far end of
/// the exit arm, parametrized by arc length.
#[derive(Debug, Clone)]
pub struct Route {
    pub entry: Arm,
    pub maneuver: Maneuver,
    pub exit: Arm,
    segments: Vec<Segment>,
    cum_len: Vec<f64>,
    total_len: f64,
    /// Uniformly spaced centerline samples for point projection.
    polyline: Vec<Vec2>,
    sample_step: f64,
}

/// Result of projecting a point onto a route centerline.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    /// Arc length of the closest centerline point.
    pub s: f64,
    /// Distance from the query point to that centerline point.
    pub distance: f64,
}

impl Route {
    fn new(entry: Arm, maneuver: Maneuver, exit: Arm, segments: Vec<Segment>) -> Route {
        let mut cum_len = Vec::with_capacity(segments.len() + 1);
        let mut acc = 0.0;
        cum_len.push(0.0);
        for seg in &segments {
            acc += seg.len();
            cum_len.push(acc);
        }
        let mut route = Route {
            entry,
            maneuver,
            exit,
            segments,
            cum_len,
            total_len: acc,
            polyline: Vec::new(),
            sample_step: 0.0,
        };
        let n = (acc / 0.5).ceil().max(1.0) as usize;
        route.sample_step = acc / n as f64;
        route.polyline = (0..=n)
            .map(|k| route.point_at(k as f64 * route.sample_step))
            .collect();
        route
    }

    pub fn length(&self) -> f64 {
        self.total_len
    }

    /// Centerline point at arc length `s`. Values outside `[0, length]`
    /// extrapolate straight along the entry or exit direction.
    pub fn point_at(&self, s: f64) -> Vec2 {
        if s < 0.0 {
            let dir = Vec2::from_angle(self.heading_at(0.0));
            return self.segments[0].point_at(0.0) + dir.scale(s);
        }
        if s > self.total_len {
            let dir = Vec2::from_angle(self.heading_at(self.total_len));
            let end = self.segments[self.segments.len() - 1]
                .point_at(self.segments[self.segments.len() - 1].len());
            return end + dir.scale(s - self.total_len);
        }
        let (idx, local) = self.locate(s);
        self.segments[idx].point_at(local)
    }

    /// Centerline heading at arc length `s`, clamped at the route ends.
    pub fn heading_at(&self, s: f64) -> f64 {
        let (idx, local) = self.locate(s.clamp(0.0, self.total_len));
        self.segments[idx].heading_at(local)
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        for i in 0..self.segments.len() {
            if s <= self.cum_len[i + 1] || i == self.segments.len() - 1 {
                return (i, (s - self.cum_len[i]).max(0.0));
            }
        }
        unreachable!("routes always have at least one segment")
    }

    /// Closest centerline point to `p`, searching the whole route.
    pub fn project(&self, p: Vec2) -> Projection {
        self.project_range(p, 0, self.polyline.len() - 1)
    }

    /// Closest centerline point to `p` within `window` meters of arc
    /// length `s_hint`. Keeps progress tracking local so a route that
    /// passes near itself cannot snap a vehicle forward or backward.
    pub fn project_near(&self, p: Vec2, s_hint: f64, window: f64) -> Projection {
        let last = self.polyline.len() - 1;
        let lo = (((s_hint - window) / self.sample_step).floor().max(0.0) as usize).min(last - 1);
        let hi = ((((s_hint + window) / self.sample_step).ceil()) as usize).clamp(lo + 1, last);
        self.project_range(p, lo, hi)
    }

    fn project_range(&self, p: Vec2, lo: usize, hi: usize) -> Projection {
        let mut best = Projection {
            s: lo as f64 * self.sample_step,
            distance: f64::INFINITY,
        };
        for k in lo..hi {
            let (t, q) = project_on_segment(p, self.polyline[k], self.polyline[k + 1]);
            let d = p.distance(q);
            if d < best.distance {
                best = Projection {
                    s: (k as f64 + t) * self.sample_step,
                    distance: d,
                };
            }
        }
        best
    }
}

/// Where two routes come close enough that vehicles on them can collide.
///
/// `enter_own` is the arc length (on the route this entry is stored
/// under) at which the proximity zone begins; `exit_other` is the arc
/// length on the other route past which that vehicle no longer threatens
/// this zone.
#[derive(Debug, Clone, Copy)]
pub struct ConflictZone {
    pub enter_own: f64,
    pub exit_other: f64,
}

/// The full intersection: routes, conflict table, and road suit.
#[derive(Debug)]
pub struct RoadNetwork {
    pub lane_width: f64,
    pub arm_length: f64,
    /// Half the side of the junction box (one lane width).
    pub junction_half: f64,
    routes: Vec<Route>,
    /// Flat `n_routes * n_routes` table, row-major by own route id.
    conflicts: Vec<Option<ConflictZone>>,
    /// Goal anchor per route, `goal_offset` past the junction exit.
    goals: Vec<Vec2>,
    /// The two axis-aligned bars whose union is the drivable region.
    bars: [Aabb; 2],
}

/// Exit arm for a maneuver taken from a given entry arm.
fn exit_arm(entry: Arm, maneuver: Maneuver) -> Arm {
    let shift = match maneuver {
        Maneuver::Left => 3,
        Maneuver::Straight => 2,
        Maneuver::Right => 1,
    };
    Arm::ALL[(entry.index() + shift) % 4]
}

/// Build the intersection for the given geometry, validating dimensions.
pub fn build_intersection(cfg: &EnvConfig) -> Result<RoadNetwork, RoadError> {
    for (name, value) in [
        ("lane_width", cfg.lane_width),
        ("arm_length", cfg.arm_length),
        ("goal_offset", cfg.goal_offset),
    ] {
        if !(value > 0.0) {
            return Err(RoadError::NonPositive { name, value });
        }
    }
    let half = cfg.lane_width;
    let lc = cfg.lane_width / 2.0;
    let arm = cfg.arm_length;

    // Routes from the south entry (northbound at x = +lc); the other three
    // entries are quarter-turn rotations of these.
    let entry_line = Segment::Line {
        start: Vec2::new(lc, -half - arm),
        dir: Vec2::new(0.0, 1.0),
        len: arm,
    };
    let south: [Vec<Segment>; 3] = [
        // Left: wide quarter circle into the westbound exit lane.
        vec![
            entry_line.clone(),
            Segment::Arc {
                center: Vec2::new(-half, -half),
                radius: half + lc,
                start_angle: 0.0,
                sweep: std::f64::consts::FRAC_PI_2,
            },
            Segment::Line {
                start: Vec2::new(-half, lc),
                dir: Vec2::new(-1.0, 0.0),
                len: arm,
            },
        ],
        // Straight through the box.
        vec![
            entry_line.clone(),
            Segment::Line {
                start: Vec2::new(lc, -half),
                dir: Vec2::new(0.0, 1.0),
                len: 2.0 * half,
            },
            Segment::Line {
                start: Vec2::new(lc, half),
                dir: Vec2::new(0.0, 1.0),
                len: arm,
            },
        ],
        // Right: tight quarter circle into the eastbound exit lane.
        vec![
            entry_line,
            Segment::Arc {
                center: Vec2::new(half, -half),
                radius: half - lc,
                start_angle: std::f64::consts::PI,
                sweep: -std::f64::consts::FRAC_PI_2,
            },
            Segment::Line {
                start: Vec2::new(half, -lc),
                dir: Vec2::new(1.0, 0.0),
                len: arm,
            },
        ],
    ];

    let mut routes = Vec::with_capacity(12);
    for entry in Arm::ALL {
        for maneuver in Maneuver::ALL {
            let segments = south[maneuver.index()]
                .iter()
                .map(|seg| seg.rotated(entry.index()))
                .collect();
            routes.push(Route::new(entry, maneuver, exit_arm(entry, maneuver), segments));
        }
    }

    let conflicts = build_conflict_table(&routes, arm, cfg.vehicle_width + 0.5);
    let goals = routes
        .iter()
        .map(|r| r.point_at(r.length() - arm + cfg.goal_offset))
        .collect();
    let extent = half + arm;
    let bars = [
        Aabb {
            min: Vec2::new(-half, -extent),
            max: Vec2::new(half, extent),
        },
        Aabb {
            min: Vec2::new(-extent, -half),
            max: Vec2::new(extent, half),
        },
    ];

    Ok(RoadNetwork {
        lane_width: cfg.lane_width,
        arm_length: arm,
        junction_half: half,
        routes,
        conflicts,
        goals,
        bars,
    })
}

/// Sample each route pair around the junction and record where their
/// centerlines come within `threshold` of each other. Routes sharing an
/// entry arm are excluded: vehicles there are strictly leader/follower.
fn build_conflict_table(
    routes: &[Route],
    arm_length: f64,
    threshold: f64,
) -> Vec<Option<ConflictZone>> {
    const STEP: f64 = 0.25;
    const PAD: f64 = 5.0;

    let samples: Vec<Vec<(f64, Vec2)>> = routes
        .iter()
        .map(|route| {
            let lo = arm_length - PAD;
            let hi = route.length() - arm_length + PAD;
            let n = ((hi - lo) / STEP).ceil() as usize;
            (0..=n)
                .map(|k| {
                    let s = lo + k as f64 * STEP;
                    (s, route.point_at(s))
                })
                .collect()
        })
        .collect();

    let n = routes.len();
    let mut table = vec![None; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j || routes[i].entry == routes[j].entry {
                continue;
            }
            let mut enter_own = f64::INFINITY;
            let mut exit_other = f64::NEG_INFINITY;
            for &(s_a, p_a) in &samples[i] {
                for &(s_b, p_b) in &samples[j] {
                    if p_a.distance(p_b) < threshold {
                        enter_own = enter_own.min(s_a);
                        exit_other = exit_other.max(s_b);
                    }
                }
            }
            if enter_own.is_finite() {
                table[i * n + j] = Some(ConflictZone {
                    enter_own,
                    exit_other,
                });
            }
        }
    }
    table
}

impl RoadNetwork {
    pub fn n_routes(&self) -> usize {
        self.routes.len()
    }

    pub fn route(&self, id: usize) -> &Route {
        &self.routes[id]
    }

    /// Route ids entering from `arm`, ordered left / straight / right.
    pub fn routes_from(&self, arm: Arm) -> [usize; 3] {
        let base = arm.index() * 3;
        [base, base + 1, base + 2]
    }

    pub fn route_id(&self, arm: Arm, maneuver: Maneuver) -> usize {
        arm.index() * 3 + maneuver.index()
    }

    /// Conflict zone of route `own` against route `other`, if any.
    pub fn conflict(&self, own: usize, other: usize) -> Option<&ConflictZone> {
        self.conflicts[own * self.routes.len() + other].as_ref()
    }

    /// Goal anchor of a route: a point on the exit lane past the junction.
    pub fn goal_point(&self, route: usize) -> Vec2 {
        self.goals[route]
    }

    /// Distance from `p` to the drivable region (zero inside it).
    pub fn offroad_distance(&self, p: Vec2) -> f64 {
        self.bars[0].distance(p).min(self.bars[1].distance(p))
    }
}
