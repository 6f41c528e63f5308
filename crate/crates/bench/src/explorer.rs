//! Closed-loop exploration missions.
//!
//! Couples the simulator with mapping, obstacle tracking, the local and
//! global planners and the frequency map, running one agent until the
//! environment is explored or a time limit expires. Planning is charged a
//! fixed, deterministic amount of mission time per round (the agent hovers
//! while "computing"), so repeated runs with the same seed are bit-identical
//! regardless of host speed.

use daep_core::error::Error as CoreError;
use daep_core::gain::{GainConfig, PlannerWeights, SensorModel};
use daep_core::geometry::wrap_angle;
use daep_core::map::coverage;
use daep_core::planner_global::{
    cache_candidates, frontier_candidates, plan_path, sample_exploratory_candidates,
    select_global_goal_with, CandidateSet, GlobalPlannerConfig, RoadGraph,
};
use daep_core::planner_local::{
    best_branch, edge_collision_free, expand_tree, time_of_arrival, LocalPlannerConfig,
    MotionModel, PlanStep, PlanningContext,
};
use daep_core::prediction::{track_update, FrequencyGrid, KalmanConfig, ObstacleTrack};
use daep_core::sim::{
    observe_obstacles, render_depth, Collider, Event, Scenario, World, DEFAULT_SENSING_RADIUS,
    DEFAULT_TICK,
};
use daep_core::{Pose, Real, Vec3, VoxelGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Planner variants exercised by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Full planner: prediction-aware gain and frequency-map bonus.
    Daep,
    /// Obstacle tracks are frozen in place: no velocity extrapolation and no
    /// covariance growth during planning.
    DaepNoPredict,
    /// Frequency-map bonus disabled (zeta = 0).
    DaepNoDfm,
    /// Obstacle-agnostic baseline: plans on the static map only, no tracks,
    /// no frequency map.
    StaticAepLike,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Daep,
        Variant::DaepNoPredict,
        Variant::DaepNoDfm,
        Variant::StaticAepLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Daep => "daep",
            Variant::DaepNoPredict => "daep-no-predict",
            Variant::DaepNoDfm => "daep-no-dfm",
            Variant::StaticAepLike => "static-aep-like",
        }
    }

    pub fn parse(s: &str) -> Result<Variant> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                BenchError::Config(format!(
                    "unknown planner '{s}'; expected one of: {}",
                    Variant::ALL.map(|v| v.name()).join(", ")
                ))
            })
    }

    fn uses_tracks(self) -> bool {
        !matches!(self, Variant::StaticAepLike)
    }

    fn uses_dfm(self) -> bool {
        matches!(self, Variant::Daep | Variant::DaepNoPredict)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Mission-level tuning. Planner sub-configurations keep their own defaults.
#[derive(Debug, Clone)]
pub struct ExplorerConfig {
    pub sensor: SensorModel<Real>,
    pub gain: GainConfig,
    pub weights: PlannerWeights<Real>,
    pub motion: MotionModel,
    pub local: LocalPlannerConfig,
    pub global: GlobalPlannerConfig,
    pub kalman: KalmanConfig<Real>,
    /// Simulation tick [s].
    pub tick: Real,
    /// Depth-scan and map-update period [s].
    pub scan_period: Real,
    /// Obstacle observation / track update period [s].
    pub observe_period: Real,
    /// Frequency-map recording period [s].
    pub dfm_period: Real,
    /// Coverage/path-length sampling period for the time series [s].
    pub series_period: Real,
    /// Frequency-map cell size [m].
    pub dfm_cell_size: Real,
    /// Obstacle sensing radius [m].
    pub sensing_radius: Real,
    /// Tracks unobserved for longer than this are dropped [s].
    pub track_timeout: Real,
    /// Mission time charged per local planning round [s].
    pub local_plan_cost: Real,
    /// Mission time charged per planning round that escalates to the global
    /// planner [s].
    pub global_plan_cost: Real,
    /// Hover time after a planning round that produced no plan [s].
    pub retry_backoff: Real,
}

impl Default for ExplorerConfig {
    fn default() -> Self {
        Self {
            sensor: SensorModel::default(),
            gain: GainConfig::default(),
            weights: PlannerWeights::default(),
            motion: MotionModel::default(),
            local: LocalPlannerConfig::default(),
            global: GlobalPlannerConfig::default(),
            kalman: KalmanConfig::default(),
            tick: DEFAULT_TICK,
            scan_period: 0.5,
            observe_period: 0.1,
            dfm_period: 1.0,
            series_period: 1.0,
            dfm_cell_size: 1.0,
            sensing_radius: DEFAULT_SENSING_RADIUS,
            track_timeout: 3.0,
            local_plan_cost: 0.5,
            global_plan_cost: 1.0,
            retry_backoff: 0.5,
        }
    }
}

/// One sample of the exploration progress.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: Real,
    /// Covered fraction of mappable cells, in percent.
    pub coverage: Real,
    pub path_length: Real,
}

/// Everything recorded over one mission.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunLog {
    /// Final coverage in percent, computed against the ground truth.
    pub coverage_percent: Real,
    /// Mission time at termination [s].
    pub exploration_time: Real,
    /// Travelled distance [m].
    pub path_length: Real,
    /// Accumulated planning time [s].
    pub planning_time: Real,
    /// Number of collision events (entries into contact).
    pub collisions: usize,
    /// Closed [enter, exit] contact intervals [s].
    pub collision_intervals: Vec<(Real, Real)>,
    /// True if the planner declared the environment explored before the
    /// time limit.
    pub finished: bool,
    pub series: Vec<SeriesPoint>,
    /// Per-axis [min, max] of the global planner's exploratory samples.
    pub sampled_extent: Option<[[Real; 2]; 3]>,
}

/// Tracks with velocity and its covariance zeroed, so prediction degenerates
/// to "the obstacle stays where it was last seen".
fn frozen_tracks(tracks: &[ObstacleTrack<Real>]) -> Vec<ObstacleTrack<Real>> {
    tracks
        .iter()
        .map(|t| {
            let mut t = t.clone();
            for i in 3..6 {
                t.mean[i] = 0.0;
                for j in 0..6 {
                    t.covariance[(i, j)] = 0.0;
                    t.covariance[(j, i)] = 0.0;
                }
            }
            t
        })
        .collect()
}

/// Initial maneuver: climb 1 m (clamped to the sampling altitude band) and
/// sweep the full horizontal circle in three yaw steps.
pub fn protocol_steps(start: &Pose, bbox_zmax: Real, cfg: &ExplorerConfig) -> Vec<PlanStep> {
    let climb_z = (start.position.z + 1.0).min(bbox_zmax - cfg.local.altitude_margin);
    let climb_z = climb_z.max(start.position.z);
    let third = 2.0 * std::f64::consts::PI / 3.0;
    let targets = [
        Pose {
            position: Vec3::new(start.position.x, start.position.y, climb_z),
            yaw: start.yaw,
        },
        Pose {
            position: Vec3::new(start.position.x, start.position.y, climb_z),
            yaw: wrap_angle(start.yaw + third),
        },
        Pose {
            position: Vec3::new(start.position.x, start.position.y, climb_z),
            yaw: wrap_angle(start.yaw + 2.0 * third),
        },
        Pose {
            position: Vec3::new(start.position.x, start.position.y, climb_z),
            yaw: start.yaw,
        },
    ];
    let mut steps = Vec::with_capacity(targets.len());
    let mut prev = *start;
    let mut t = 0.0;
    for target in targets {
        let arrive = time_of_arrival(t, &prev, &target, cfg.motion.v_lin, cfg.motion.v_ang);
        steps.push(PlanStep {
            target,
            depart: t,
            arrive,
        });
        prev = target;
        t = arrive;
    }
    steps
}

/// Horizon over which an approaching obstacle counts as a threat to a
/// hovering agent [s].
const ESCAPE_HORIZON: Real = 2.5;
/// Predicted clearance below which the agent dodges [m].
const ESCAPE_TRIGGER: Real = 1.2;
/// Dodge edge length [m].
const ESCAPE_LENGTH: Real = 1.0;

/// If a tracked obstacle is predicted to come close to the hovering agent
/// soon, pick a short statically-and-dynamically free edge that maximizes
/// clearance from every threat at arrival. Returns `None` when there is no
/// threat or no admissible dodge.
#[allow(clippy::too_many_arguments)]
fn escape_step(
    pose: &Pose,
    now: Real,
    grid: &VoxelGrid,
    tracks: &[ObstacleTrack<Real>],
    kalman: &KalmanConfig<Real>,
    cfg: &ExplorerConfig,
) -> Option<PlanStep> {
    use daep_core::prediction::predict_at;
    let mut threats = Vec::new();
    for tr in tracks {
        let mut closest = Real::INFINITY;
        let mut s = 0.0;
        while s <= ESCAPE_HORIZON {
            let p = predict_at(tr, (now + s - tr.last_update).max(0.0), kalman).mean_position;
            closest = closest.min((p - pose.position).norm() - tr.radius);
            s += 0.25;
        }
        if closest < ESCAPE_TRIGGER {
            threats.push(tr);
        }
    }
    if threats.is_empty() {
        return None;
    }
    let bbox = grid.bbox();
    let mut best: Option<(Real, PlanStep)> = None;
    let dirs = 16;
    for k in 0..dirs {
        let a = 2.0 * std::f64::consts::PI * (k as Real) / (dirs as Real);
        let target_pos = pose.position + Vec3::new(a.cos(), a.sin(), 0.0) * ESCAPE_LENGTH;
        if !bbox.contains(&target_pos) {
            continue;
        }
        let target = Pose {
            position: target_pos,
            yaw: pose.yaw,
        };
        let arrive = time_of_arrival(now, pose, &target, cfg.motion.v_lin, cfg.motion.v_ang);
        if !edge_collision_free(
            pose,
            &target,
            now,
            arrive,
            grid,
            tracks,
            kalman,
            &cfg.motion,
            cfg.local.collision_step,
        ) {
            continue;
        }
        let clearance = threats
            .iter()
            .map(|tr| {
                let p = predict_at(tr, (arrive - tr.last_update).max(0.0), kalman).mean_position;
                (p - target_pos).norm() - tr.radius
            })
            .fold(Real::INFINITY, Real::min);
        if best.as_ref().map(|(b, _)| clearance > *b).unwrap_or(true) {
            best = Some((
                clearance,
                PlanStep {
                    target,
                    depart: now,
                    arrive,
                },
            ));
        }
    }
    best.map(|(_, s)| s)
}

struct PendingPlan {
    ready_at: Real,
    steps: Vec<PlanStep>,
    finish: bool,
}

/// Outcome of one deliberation: steps to command, mission time consumed and
/// whether exploration is complete.
fn plan_round(
    world: &World,
    grid: &VoxelGrid,
    dfm: &FrequencyGrid<Real>,
    tracks: &[ObstacleTrack<Real>],
    candidates: &mut CandidateSet,
    graph: &mut RoadGraph,
    variant: Variant,
    cfg: &ExplorerConfig,
    rng: &mut ChaCha8Rng,
) -> (Vec<PlanStep>, Real, bool) {
    let planning_tracks: Vec<ObstacleTrack<Real>> = match variant {
        Variant::StaticAepLike => Vec::new(),
        Variant::DaepNoPredict => frozen_tracks(tracks),
        _ => tracks.to_vec(),
    };
    let kalman = planning_kalman(variant, cfg);
    let weights = planning_weights(variant, cfg);
    let ctx = PlanningContext {
        grid,
        tracks: &planning_tracks,
        kalman: &kalman,
        dfm,
        weights: &weights,
        sensor: &cfg.sensor,
        gain_cfg: &cfg.gain,
        motion: &cfg.motion,
    };
    let pose = world.agent.pose();
    graph.add_vertex(pose, grid, &cfg.motion.agent_box, cfg.global.connect_radius);

    let t_local = world.time + cfg.local_plan_cost;
    // Keep the global cache stocked every round, not just when the local
    // planner comes up empty; on large maps the local planner can succeed
    // for the entire mission and the sampler must still cover the volume.
    if sample_exploratory_candidates(candidates, &ctx, t_local, &cfg.global, rng).is_err() {
        return (Vec::new(), 0.0, false);
    }
    if std::env::var_os("DAEP_DEBUG").is_some() {
        eprintln!(
            "[plan t={:.2}] pose=({:.2},{:.2},{:.2}) yaw={:.2} candidates={} graph={}",
            world.time,
            pose.position.x,
            pose.position.y,
            pose.position.z,
            pose.yaw,
            candidates.len(),
            graph.vertex_count()
        );
    }
    match expand_tree(pose, t_local, &ctx, &cfg.local, rng) {
        Ok(tree) => {
            cache_candidates(candidates, &tree, t_local, &cfg.global);
            let steps = best_branch(&tree);
            let best_gain = tree
                .nodes
                .iter()
                .skip(1)
                .map(|n| n.dynamic_gain)
                .fold(0.0, Real::max);
            if std::env::var_os("DAEP_DEBUG").is_some() {
                eprintln!(
                    "  local: nodes={} best_gain={:.3} steps={}",
                    tree.nodes.len(),
                    best_gain,
                    steps.len()
                );
            }
            if !steps.is_empty() && best_gain >= cfg.global.min_gain {
                // Commit only the first edge; the tree is regrown on arrival.
                let first = steps[0];
                graph.add_vertex(first.target, grid, &cfg.motion.agent_box, cfg.global.connect_radius);
                return (vec![first], cfg.local_plan_cost, false);
            }
        }
        Err(CoreError::ExpansionStarved) => {
            if std::env::var_os("DAEP_DEBUG").is_some() {
                eprintln!("  local: starved");
            }
        }
        Err(e) => {
            if std::env::var_os("DAEP_DEBUG").is_some() {
                eprintln!("  local: error {e}");
            }
            return (Vec::new(), cfg.local_plan_cost, false);
        }
    }

    // Local view exhausted: fall back to a cached global goal.
    let t_global = world.time + cfg.global_plan_cost;
    let mut swept_frontier = false;
    let mut frontier_was_empty = false;
    let mut failed_goals = 0usize;
    let mut field = None;
    loop {
        match select_global_goal_with(
            candidates,
            &ctx,
            graph,
            &pose,
            t_global,
            &cfg.global,
            rng,
            &mut field,
            failed_goals > 0,
        ) {
            Ok(Some(goal)) => {
                match plan_path(
                    &pose,
                    &goal.pose,
                    graph,
                    &ctx,
                    t_global,
                    &cfg.global,
                    cfg.local.collision_step,
                ) {
                    Ok(steps) => return (steps, cfg.global_plan_cost, false),
                    Err(_) => {
                        // Unreachable for now; forget it so selection cannot
                        // re-pick it forever (it reappears if seen again) and
                        // move on to the next-best candidate. Without the
                        // retry, a constantly restocked cache can make every
                        // round select and fail the same blocked region.
                        candidates
                            .candidates
                            .retain(|c| (c.pose.position - goal.pose.position).norm() > 1e-9);
                        failed_goals += 1;
                        if failed_goals < 8 {
                            continue;
                        }
                        return (Vec::new(), cfg.global_plan_cost, false);
                    }
                }
            }
            Ok(None) => {
                if !swept_frontier {
                    // The random cache ran dry; a deterministic frontier
                    // sweep decides whether anything observable remains.
                    swept_frontier = true;
                    if let Ok(found) = frontier_candidates(&ctx, t_global, &cfg.global, 40) {
                        if found.is_empty() {
                            frontier_was_empty = true;
                        } else {
                            for c in found {
                                candidates.insert(c, cfg.global.dedup_radius);
                            }
                            continue;
                        }
                    }
                }
                // Finished only when nothing observable remains: the cache
                // is empty and the frontier sweep confirmed it.
                let done = candidates.is_empty() && frontier_was_empty;
                if std::env::var_os("DAEP_DEBUG").is_some() {
                    eprintln!(
                        "  global: no goal (candidates={}, finished={done})",
                        candidates.len()
                    );
                }
                return (Vec::new(), cfg.global_plan_cost, done);
            }
            Err(_) => return (Vec::new(), cfg.global_plan_cost, false),
        }
    }
}

fn planning_kalman(variant: Variant, cfg: &ExplorerConfig) -> KalmanConfig<Real> {
    match variant {
        Variant::DaepNoPredict => KalmanConfig {
            process_noise: 0.0,
            ..cfg.kalman
        },
        _ => cfg.kalman,
    }
}

fn planning_weights(variant: Variant, cfg: &ExplorerConfig) -> PlannerWeights<Real> {
    if variant.uses_dfm() {
        cfg.weights
    } else {
        PlannerWeights {
            zeta: 0.0,
            ..cfg.weights
        }
    }
}

/// Run one mission to completion or the time limit.
pub fn run_exploration(
    scenario: &Scenario,
    variant: Variant,
    dynamic: bool,
    start_index: usize,
    seed: u64,
    time_limit: Real,
    cfg: &ExplorerConfig,
) -> Result<RunLog> {
    if time_limit <= 0.0 {
        return Err(BenchError::Config("time limit must be positive".into()));
    }
    let truth = scenario.ground_truth()?;
    let mappable = truth.mappable_count().max(1);
    let mut world = World::new(scenario.clone(), start_index, dynamic)?;
    let mut grid = VoxelGrid::new(scenario.bbox, scenario.resolution)?;
    let mut dfm = FrequencyGrid::new(&scenario.bbox, cfg.dfm_cell_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut tracks: Vec<ObstacleTrack<Real>> = Vec::new();
    let mut candidates = CandidateSet::default();
    let mut graph = RoadGraph::new();

    let mut mapped = 0usize;
    let mut path_length = 0.0;
    let mut planning_time = 0.0;
    let mut collisions = 0usize;
    let mut intervals: Vec<(Real, Real)> = Vec::new();
    let mut open_contacts: Vec<(Collider, Real)> = Vec::new();
    let mut series: Vec<SeriesPoint> = Vec::new();
    let mut finished = false;

    world.command(protocol_steps(
        &world.agent.pose(),
        scenario.bbox.max.z,
        cfg,
    ));
    let mut protocol_done = false;
    let mut pending: Option<PendingPlan> = None;
    let mut next_retry = 0.0;
    let mut next_scan = 0.0;
    let mut next_obs = 0.0;
    let mut next_dfm = cfg.dfm_period;
    let mut next_series = 0.0;
    let eps = 1e-9;

    loop {
        let t = world.time;
        if t + eps >= time_limit {
            break;
        }

        if t + eps >= next_obs {
            next_obs += cfg.observe_period;
            if dynamic && variant.uses_tracks() {
                for (id, center) in
                    observe_obstacles(&world, &world.agent.position, cfg.sensing_radius)
                {
                    match tracks.iter_mut().find(|tr| tr.id == id) {
                        Some(tr) => {
                            *tr = track_update(tr, &center, t, &cfg.kalman)?;
                        }
                        None => {
                            let radius = scenario
                                .obstacle_paths
                                .get(id as usize)
                                .map(|p| p.radius)
                                .unwrap_or(daep_core::sim::DEFAULT_OBSTACLE_RADIUS);
                            tracks.push(ObstacleTrack::new(id, center, t, radius));
                        }
                    }
                }
                tracks.retain(|tr| t - tr.last_update <= cfg.track_timeout);
            }
            let check_tracks: Vec<ObstacleTrack<Real>> = match variant {
                Variant::StaticAepLike => Vec::new(),
                Variant::DaepNoPredict => frozen_tracks(&tracks),
                _ => tracks.clone(),
            };
            let kalman = planning_kalman(variant, cfg);
            // Re-validate the edge in progress against the latest map and
            // track estimates; abort and replan if it is no longer safe.
            if protocol_done && pending.is_none() {
                if let Some(front) = world.agent.plan.front().copied() {
                    let pose = world.agent.pose();
                    let arrive =
                        time_of_arrival(t, &pose, &front.target, cfg.motion.v_lin, cfg.motion.v_ang);
                    if !edge_collision_free(
                        &pose,
                        &front.target,
                        t,
                        arrive,
                        &grid,
                        &check_tracks,
                        &kalman,
                        &cfg.motion,
                        cfg.local.collision_step,
                    ) {
                        if std::env::var_os("DAEP_DEBUG").is_some() {
                            eprintln!("  abort t={t:.2} front=({:.2},{:.2},{:.2})",
                                front.target.position.x, front.target.position.y,
                                front.target.position.z);
                        }
                        world.plan_clear();
                        next_retry = t;
                    }
                }
            }
            // A hovering agent dodges obstacles that walk into it.
            if protocol_done && world.agent.idle() && !check_tracks.is_empty() {
                if let Some(step) =
                    escape_step(&world.agent.pose(), t, &grid, &check_tracks, &kalman, cfg)
                {
                    pending = None;
                    world.command(vec![step]);
                    next_retry = t;
                }
            }
        }

        if t + eps >= next_scan {
            next_scan += cfg.scan_period;
            let pose = world.agent.pose();
            let scan = render_depth(&world, &pose, &cfg.sensor);
            mapped += grid.insert_scan(&scan.origin, &scan.hits, &scan.misses)?;
        }

        if t + eps >= next_dfm {
            next_dfm += cfg.dfm_period;
            if dynamic && variant.uses_dfm() {
                let seen: Vec<Vec3> =
                    observe_obstacles(&world, &world.agent.position, cfg.sensing_radius)
                        .into_iter()
                        .map(|(_, p)| p)
                        .collect();
                dfm.record(&seen);
            }
        }

        if t + eps >= next_series {
            next_series += cfg.series_period;
            series.push(SeriesPoint {
                t,
                coverage: 100.0 * mapped as Real / mappable as Real,
                path_length,
            });
        }

        if let Some(p) = pending.as_ref() {
            if t + eps >= p.ready_at {
                let p = pending.take().unwrap();
                if p.finish {
                    finished = true;
                    break;
                }
                if p.steps.is_empty() {
                    next_retry = t + cfg.retry_backoff;
                } else {
                    if std::env::var_os("DAEP_DEBUG").is_some() {
                        let f = &p.steps[0];
                        eprintln!("  command t={t:.2} steps={} first=({:.2},{:.2},{:.2})",
                            p.steps.len(), f.target.position.x, f.target.position.y,
                            f.target.position.z);
                    }
                    world.command(p.steps);
                }
            }
        }
        if !protocol_done && world.agent.idle() {
            protocol_done = true;
        }
        if protocol_done && pending.is_none() && world.agent.idle() && t + eps >= next_retry {
            let (steps, cost, finish) = plan_round(
                &world,
                &grid,
                &dfm,
                &tracks,
                &mut candidates,
                &mut graph,
                variant,
                cfg,
                &mut rng,
            );
            planning_time += cost;
            pending = Some(PendingPlan {
                ready_at: t + cost,
                steps,
                finish,
            });
        }

        let prev = world.agent.position;
        let events = world.step(cfg.tick);
        path_length += (world.agent.position - prev).norm();
        for ev in events {
            match ev {
                Event::CollisionEnter { t, with } => {
                    collisions += 1;
                    if std::env::var_os("DAEP_DEBUG").is_some() {
                        eprintln!(
                            "  collision t={:.2} with={:?} idle={} pending={} pos=({:.6},{:.6},{:.6})",
                            t,
                            with,
                            world.agent.idle(),
                            pending.is_some(),
                            world.agent.position.x,
                            world.agent.position.y,
                            world.agent.position.z
                        );
                        if let Some(front) = world.agent.plan.front() {
                            eprintln!(
                                "    step target=({:.6},{:.6},{:.6}) yaw={:.3} depart={:.2} arrive={:.2}",
                                front.target.position.x,
                                front.target.position.y,
                                front.target.position.z,
                                front.target.yaw,
                                front.depart,
                                front.arrive
                            );
                        }
                        let half = world.agent.collision_box * 0.5;
                        for corner in [
                            world.agent.position - half,
                            world.agent.position + half,
                        ] {
                            if let Some(c) = grid.world_to_index(&corner) {
                                eprintln!(
                                    "    corner ({:.6},{:.6},{:.6}) cell ({},{},{}) state {:?}",
                                    corner.x, corner.y, corner.z, c.x, c.y, c.z,
                                    grid.state(c)
                                );
                            }
                        }
                    }
                    open_contacts.push((with, t));
                }
                Event::CollisionExit { t, with } => {
                    if let Some(i) = open_contacts.iter().position(|(c, _)| *c == with) {
                        let (_, start) = open_contacts.swap_remove(i);
                        intervals.push((start, t));
                    }
                }
            }
        }
    }

    let end = world.time;
    for (_, start) in open_contacts {
        intervals.push((start, end));
    }
    intervals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    series.push(SeriesPoint {
        t: end,
        coverage: 100.0 * mapped as Real / mappable as Real,
        path_length,
    });

    Ok(RunLog {
        coverage_percent: coverage(&grid, &truth)?,
        exploration_time: end,
        path_length,
        planning_time,
        collisions,
        collision_intervals: intervals,
        finished,
        series,
        sampled_extent: candidates.sampled_extent,
    })
}
