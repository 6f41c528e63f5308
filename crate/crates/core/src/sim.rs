//! Deterministic discrete-time world: axis-aligned static geometry, people
//! walking piecewise-linear patrol routes, a velocity-limited agent, a
//! depth-camera model, and collision bookkeeping.

use std::collections::VecDeque;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gain::SensorModel;
use crate::geometry::{angle_diff, Aabb, Pose};
use crate::map::GroundTruth;
use crate::planner_local::PlanStep;
use crate::Real;

pub const DEFAULT_TICK: Real = 0.05;
pub const DEFAULT_OBSTACLE_SPEED: Real = 0.35;
pub const DEFAULT_OBSTACLE_RADIUS: Real = 0.3;
pub const DEFAULT_OBSTACLE_HEIGHT: Real = 1.8;
pub const DEFAULT_SENSING_RADIUS: Real = 10.0;

fn default_speed() -> Real {
    DEFAULT_OBSTACLE_SPEED
}

fn default_radius() -> Real {
    DEFAULT_OBSTACLE_RADIUS
}

fn default_height() -> Real {
    DEFAULT_OBSTACLE_HEIGHT
}

/// How a patrol route continues past its last waypoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathMode {
    Loop,
    BackAndForth,
}

/// One walker's route. Waypoint z is the cylinder base (feet).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstaclePath {
    pub waypoints: Vec<Vector3<Real>>,
    pub mode: PathMode,
    #[serde(default = "default_speed")]
    pub speed: Real,
    #[serde(default = "default_radius")]
    pub radius: Real,
    #[serde(default = "default_height")]
    pub height: Real,
}

/// A complete world description; serializable as TOML.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub bbox: Aabb<Real>,
    pub resolution: Real,
    #[serde(default)]
    pub static_solids: Vec<Aabb<Real>>,
    #[serde(default)]
    pub obstacle_paths: Vec<ObstaclePath>,
    /// Exactly five spawn positions (yaw starts at zero).
    pub start_poses: Vec<Vector3<Real>>,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.resolution <= 0.0 {
            return Err(Error::Config("resolution must be positive".into()));
        }
        if self.start_poses.len() != 5 {
            return Err(Error::Config(format!(
                "expected 5 start poses, got {}",
                self.start_poses.len()
            )));
        }
        for p in &self.start_poses {
            if !self.bbox.contains(p) {
                return Err(Error::Config("start pose outside bounding box".into()));
            }
            if self.static_solids.iter().any(|s| s.contains(p)) {
                return Err(Error::Config("start pose inside a static solid".into()));
            }
        }
        for (i, path) in self.obstacle_paths.iter().enumerate() {
            if path.waypoints.is_empty() {
                return Err(Error::Config(format!("obstacle {i} has no waypoints")));
            }
            if path.speed <= 0.0 || path.radius <= 0.0 || path.height <= 0.0 {
                return Err(Error::Config(format!("obstacle {i} has bad parameters")));
            }
            for w in &path.waypoints {
                if !self.bbox.contains(w) {
                    return Err(Error::Config(format!(
                        "obstacle {i} waypoint outside bounding box"
                    )));
                }
                if self
                    .static_solids
                    .iter()
                    .any(|s| s.contains_inflated(w, path.radius))
                {
                    return Err(Error::Config(format!(
                        "obstacle {i} waypoint intersects a static solid"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::ScenarioParse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::ScenarioParse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Rasterize the static geometry: a cell is occupied iff its center
    /// lies inside a solid.
    pub fn ground_truth(&self) -> Result<GroundTruth<Real>> {
        let dims = crate::map::grid_dims(&self.bbox, self.resolution)?;
        let probe = crate::VoxelGrid::new(self.bbox, self.resolution)?;
        let mut occ = vec![false; dims[0] * dims[1] * dims[2]];
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let c = probe.index_to_center(crate::map::CellIdx { x, y, z });
                    if self.static_solids.iter().any(|s| s.contains(&c)) {
                        occ[x + dims[0] * (y + dims[1] * z)] = true;
                    }
                }
            }
        }
        GroundTruth::from_occupancy(self.bbox, self.resolution, occ)
    }
}

/// The agent, following its committed plan one step at a time: translate
/// at `v_lin`, then slew yaw at `v_ang` (matching the planner's arrival
/// model).
#[derive(Debug, Clone)]
pub struct AgentState {
    pub position: Vector3<Real>,
    pub yaw: Real,
    pub plan: VecDeque<PlanStep>,
    pub v_lin: Real,
    pub v_ang: Real,
    pub collision_box: Vector3<Real>,
}

impl AgentState {
    pub fn pose(&self) -> Pose<Real> {
        Pose {
            position: self.position,
            yaw: self.yaw,
        }
    }

    pub fn idle(&self) -> bool {
        self.plan.is_empty()
    }
}

/// A walker on its route.
#[derive(Debug, Clone)]
pub struct ObstacleState {
    pub id: u64,
    pub position: Vector3<Real>,
    /// Index of the waypoint currently being approached.
    pub target: usize,
    /// +1 forward, -1 backward (back-and-forth mode).
    pub direction: i8,
}

/// What the agent is currently colliding with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "id")]
pub enum Collider {
    Obstacle(u64),
    Static(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum Event {
    CollisionEnter { t: Real, with: Collider },
    CollisionExit { t: Real, with: Collider },
}

/// Simulation state.
#[derive(Debug, Clone)]
pub struct World {
    pub scenario: Scenario,
    pub time: Real,
    pub agent: AgentState,
    pub obstacles: Vec<ObstacleState>,
    in_collision: Vec<bool>,
    in_static_collision: Vec<bool>,
}

impl World {
    /// Spawn at the given start pose, zero yaw; walkers at their first
    /// waypoints. `dynamic_mode: false` removes every walker.
    pub fn new(scenario: Scenario, start_index: usize, dynamic_mode: bool) -> Result<Self> {
        scenario.validate()?;
        if start_index >= scenario.start_poses.len() {
            return Err(Error::Config(format!("start index {start_index} out of range")));
        }
        let obstacles = if dynamic_mode {
            scenario
                .obstacle_paths
                .iter()
                .enumerate()
                .map(|(i, p)| ObstacleState {
                    id: i as u64,
                    position: p.waypoints[0],
                    target: if p.waypoints.len() > 1 { 1 } else { 0 },
                    direction: 1,
                })
                .collect()
        } else {
            Vec::new()
        };
        let n_obs = obstacles.len();
        let n_solids = scenario.static_solids.len();
        Ok(Self {
            agent: AgentState {
                position: scenario.start_poses[start_index],
                yaw: 0.0,
                plan: VecDeque::new(),
                v_lin: 0.5,
                v_ang: 1.0,
                collision_box: Vector3::new(0.4, 0.4, 0.1),
            },
            scenario,
            time: 0.0,
            obstacles,
            in_collision: vec![false; n_obs],
            in_static_collision: vec![false; n_solids],
        })
    }

    pub fn command(&mut self, steps: impl IntoIterator<Item = PlanStep>) {
        self.plan_clear();
        self.plan_extend(steps);
    }

    pub fn plan_clear(&mut self) {
        self.agent.plan.clear();
    }

    pub fn plan_extend(&mut self, steps: impl IntoIterator<Item = PlanStep>) {
        self.agent.plan.extend(steps);
    }

    /// Advance the clock by `dt`, moving walkers and the agent, and emit
    /// collision enter/exit events in a deterministic order.
    pub fn step(&mut self, dt: Real) -> Vec<Event> {
        debug_assert!(dt > 0.0);
        for i in 0..self.obstacles.len() {
            self.advance_obstacle(i, dt);
        }
        self.advance_agent(dt);
        self.time += dt;
        self.collect_collision_events()
    }

    fn advance_obstacle(&mut self, i: usize, dt: Real) {
        let path = &self.scenario.obstacle_paths[i];
        let n = path.waypoints.len();
        if n < 2 {
            return;
        }
        let ob = &mut self.obstacles[i];
        let mut travel = path.speed * dt;
        while travel > 0.0 {
            let target = path.waypoints[ob.target];
            let to_go = target - ob.position;
            let d = to_go.norm();
            if d > travel {
                ob.position += to_go * (travel / d);
                break;
            }
            ob.position = target;
            travel -= d;
            match path.mode {
                PathMode::Loop => {
                    ob.target = (ob.target + 1) % n;
                }
                PathMode::BackAndForth => {
                    if ob.direction > 0 {
                        if ob.target + 1 < n {
                            ob.target += 1;
                        } else {
                            ob.direction = -1;
                            ob.target = n - 2;
                        }
                    } else if ob.target > 0 {
                        ob.target -= 1;
                    } else {
                        ob.direction = 1;
                        ob.target = 1;
                    }
                }
            }
        }
    }

    fn advance_agent(&mut self, dt: Real) {
        let mut remaining = dt;
        while remaining > 0.0 {
            let Some(step) = self.agent.plan.front().copied() else {
                break;
            };
            let to_go = step.target.position - self.agent.position;
            let d = to_go.norm();
            if d > 1e-12 {
                let travel = self.agent.v_lin * remaining;
                if d > travel {
                    self.agent.position += to_go * (travel / d);
                    remaining = 0.0;
                    continue;
                }
                self.agent.position = step.target.position;
                remaining -= d / self.agent.v_lin;
            }
            let dyaw = angle_diff(self.agent.yaw, step.target.yaw);
            if dyaw.abs() > 1e-12 {
                let slew = self.agent.v_ang * remaining;
                if dyaw.abs() > slew {
                    self.agent.yaw =
                        crate::geometry::wrap_angle(self.agent.yaw + slew * dyaw.signum());
                    remaining = 0.0;
                    continue;
                }
                self.agent.yaw = crate::geometry::wrap_angle(step.target.yaw);
                remaining -= dyaw.abs() / self.agent.v_ang;
            }
            self.agent.plan.pop_front();
        }
    }

    fn collect_collision_events(&mut self) -> Vec<Event> {
        let mut events = Vec::new();
        let half = self.agent.collision_box * 0.5;
        let lo = self.agent.position - half;
        let hi = self.agent.position + half;

        for (i, ob) in self.obstacles.iter().enumerate() {
            let path = &self.scenario.obstacle_paths[i];
            let now = box_cylinder_overlap(&lo, &hi, ob, path.radius, path.height);
            if now != self.in_collision[i] {
                let with = Collider::Obstacle(ob.id);
                events.push(if now {
                    Event::CollisionEnter { t: self.time, with }
                } else {
                    Event::CollisionExit { t: self.time, with }
                });
                self.in_collision[i] = now;
            }
        }
        for (i, solid) in self.scenario.static_solids.iter().enumerate() {
            // Strict comparisons: grazing contact with zero overlap volume
            // is not a collision.
            let now = lo.x < solid.max.x
                && hi.x > solid.min.x
                && lo.y < solid.max.y
                && hi.y > solid.min.y
                && lo.z < solid.max.z
                && hi.z > solid.min.z;
            if now != self.in_static_collision[i] {
                let with = Collider::Static(i);
                events.push(if now {
                    Event::CollisionEnter { t: self.time, with }
                } else {
                    Event::CollisionExit { t: self.time, with }
                });
                self.in_static_collision[i] = now;
            }
        }
        events
    }

    /// Nearest static surface hit by the ray, if any, within `range`.
    fn nearest_solid_hit(&self, origin: &Vector3<Real>, dir: &Vector3<Real>, range: Real) -> Option<Real> {
        let mut best: Option<Real> = None;
        for solid in &self.scenario.static_solids {
            if let Some((t0, t1)) = solid.ray_intersection(origin, dir) {
                if t1 >= 0.0 && t0 <= range {
                    let t = t0.max(0.0);
                    if best.map(|b| t < b).unwrap_or(true) {
                        best = Some(t);
                    }
                }
            }
        }
        best
    }

    /// Nearest walker hit by the ray within `range`.
    fn nearest_obstacle_hit(&self, origin: &Vector3<Real>, dir: &Vector3<Real>, range: Real) -> Option<Real> {
        let mut best: Option<Real> = None;
        for (i, ob) in self.obstacles.iter().enumerate() {
            let path = &self.scenario.obstacle_paths[i];
            if let Some(t) = crate::geometry::ray_vertical_cylinder(
                origin,
                dir,
                (ob.position.x, ob.position.y),
                path.radius,
                ob.position.z,
                path.height,
            ) {
                if t <= range && best.map(|b| t < b).unwrap_or(true) {
                    best = Some(t);
                }
            }
        }
        best
    }
}

/// Output of one depth frame, shaped for `VoxelGrid::insert_scan`.
#[derive(Debug, Clone)]
pub struct DepthScan {
    pub origin: Vector3<Real>,
    /// Surface points on static geometry (nudged just inside the surface
    /// so the endpoint cell is the solid one).
    pub hits: Vec<Vector3<Real>>,
    /// (direction, free range) pairs for rays that hit nothing static;
    /// rays blocked by a walker carry the shortened range.
    pub misses: Vec<(Vector3<Real>, Real)>,
}

/// Render one depth frame from `pose`. Rays cover the sensor frustum on a
/// `rays_horizontal x rays_vertical` grid. Walkers occlude (the ray's free
/// range ends on them) but never produce hits: transient people must not
/// enter the static map.
pub fn render_depth(world: &World, pose: &Pose<Real>, sensor: &SensorModel<Real>) -> DepthScan {
    let hfov = sensor.horizontal_fov_rad();
    let vfov = sensor.vertical_fov_rad();
    let nh = sensor.rays_horizontal;
    let nv = sensor.rays_vertical;
    let nudge = world.scenario.resolution * 0.25;
    let mut scan = DepthScan {
        origin: pose.position,
        hits: Vec::new(),
        misses: Vec::new(),
    };
    for i in 0..nh {
        let az = pose.yaw - hfov * 0.5 + (i as Real + 0.5) * hfov / nh as Real;
        for j in 0..nv {
            let elev = -vfov * 0.5 + (j as Real + 0.5) * vfov / nv as Real;
            let dir = Vector3::new(
                elev.cos() * az.cos(),
                elev.cos() * az.sin(),
                elev.sin(),
            );
            let t_solid = world.nearest_solid_hit(&pose.position, &dir, sensor.range);
            let t_person = world.nearest_obstacle_hit(&pose.position, &dir, sensor.range);
            if let Some(ts) = t_solid.filter(|ts| t_person.map_or(true, |tp| *ts < tp)) {
                scan.hits.push(pose.position + dir * (ts + nudge));
            } else if let Some(tp) = t_person {
                // Ray ends on a walker; tp == 0 means the sensor is buried
                // in one and sees nothing.
                if tp > 0.0 {
                    scan.misses.push((dir, tp));
                }
            } else {
                scan.misses.push((dir, sensor.range));
            }
        }
    }
    scan
}

/// Ground-truth positions (cylinder centers) of walkers within
/// `sensing_radius` and unbroken static line of sight.
pub fn observe_obstacles(
    world: &World,
    agent_position: &Vector3<Real>,
    sensing_radius: Real,
) -> Vec<(u64, Vector3<Real>)> {
    let mut out = Vec::new();
    for (i, ob) in world.obstacles.iter().enumerate() {
        let path = &world.scenario.obstacle_paths[i];
        let center = ob.position + Vector3::new(0.0, 0.0, path.height * 0.5);
        let d = (center - agent_position).norm();
        if d > sensing_radius {
            continue;
        }
        let visible = if d < 1e-9 {
            true
        } else {
            let dir = (center - agent_position) / d;
            world
                .nearest_solid_hit(agent_position, &dir, d)
                .map(|t| t >= d)
                .unwrap_or(true)
        };
        if visible {
            out.push((ob.id, center));
        }
    }
    out
}

fn box_cylinder_overlap(
    lo: &Vector3<Real>,
    hi: &Vector3<Real>,
    ob: &ObstacleState,
    radius: Real,
    height: Real,
) -> bool {
    // Strict comparisons: grazing contact with zero overlap volume is not
    // a collision.
    if hi.z <= ob.position.z || lo.z >= ob.position.z + height {
        return false;
    }
    let cx = ob.position.x.clamp(lo.x, hi.x);
    let cy = ob.position.y.clamp(lo.y, hi.y);
    let dx = cx - ob.position.x;
    let dy = cy - ob.position.y;
    dx * dx + dy * dy < radius * radius
}
