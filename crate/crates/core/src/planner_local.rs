//! Receding-horizon local planner: a sampling tree whose nodes carry a time
//! of arrival, so collision checks and information gain are evaluated
//! against the world as it is predicted to be when the agent gets there.

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gain::{
    border_boost, dynamic_gain, score, GainConfig, PlannerWeights, SensorModel,
};
use crate::geometry::{angle_diff, Pose};
use crate::map::{CellState, VoxelGrid};
use crate::prediction::{
    predict_at, uncertainty_inflation, FrequencyGrid, KalmanConfig, ObstacleTrack,
};
use crate::Real;

/// Agent kinematic limits and collision geometry.
#[derive(Debug, Clone, Copy)]
pub struct MotionModel {
    /// Linear speed [m/s].
    pub v_lin: Real,
    /// Yaw rate [rad/s].
    pub v_ang: Real,
    /// Collision box full extents [m].
    pub agent_box: Vector3<Real>,
}

impl MotionModel {
    /// Half the collision-box diagonal: the radius of the sphere that
    /// encloses the agent at any yaw.
    pub fn circumradius(&self) -> Real {
        self.agent_box.norm() * 0.5
    }
}

impl Default for MotionModel {
    fn default() -> Self {
        Self {
            v_lin: 0.5,
            v_ang: 1.0,
            agent_box: Vector3::new(0.4, 0.4, 0.1),
        }
    }
}

/// Tree-growth parameters.
#[derive(Debug, Clone, Copy)]
pub struct LocalPlannerConfig {
    /// Maximum edge length [m].
    pub extension_range: Real,
    /// Sampled extensions per planning round.
    pub sample_budget: usize,
    /// Sampling keeps z this far from the bounding-box floor and ceiling.
    pub altitude_margin: Real,
    /// Time step for the timed obstacle check along an edge [s].
    pub collision_step: Real,
}

impl Default for LocalPlannerConfig {
    fn default() -> Self {
        Self {
            extension_range: 1.0,
            sample_budget: 300,
            altitude_margin: 0.5,
            collision_step: 0.1,
        }
    }
}

/// A candidate pose in the tree.
#[derive(Debug, Clone)]
pub struct RrtNode {
    pub pose: Pose<Real>,
    pub parent: Option<usize>,
    /// Estimated time of arrival [s].
    pub toa: Real,
    /// Path length from the root [m].
    pub cumulative_cost: Real,
    /// Predicted-occlusion-aware gain at `toa` [m^3].
    pub dynamic_gain: Real,
    pub score: Real,
}

/// Tree produced by one planning round; node 0 is the root.
#[derive(Debug, Clone)]
pub struct RrtTree {
    pub nodes: Vec<RrtNode>,
}

/// One committed motion: travel to `target`, departing and arriving at the
/// given times.
#[derive(Debug, Clone, Copy)]
pub struct PlanStep {
    pub target: Pose<Real>,
    pub depart: Real,
    pub arrive: Real,
}

/// Arrival time at `child` when leaving `parent` at `parent_toa`:
/// straight-line travel at `v_lin` plus yaw slew at `v_ang`.
pub fn time_of_arrival(
    parent_toa: Real,
    parent_pose: &Pose<Real>,
    child_pose: &Pose<Real>,
    v_lin: Real,
    v_ang: Real,
) -> Real {
    let dist = (child_pose.position - parent_pose.position).norm();
    let dyaw = angle_diff(parent_pose.yaw, child_pose.yaw).abs();
    parent_toa + dist / v_lin + dyaw / v_ang
}

/// True iff the straight segment is clear of Occupied cells for the swept
/// agent box, and the agent stays clear of every predicted obstacle for the
/// whole `[depart, arrive]` window.
///
/// The timed check samples at `collision_step` but compensates for the
/// worst-case closure between samples and for covariance growth, so a
/// "true" verdict is trustworthy at any intermediate time; the price is a
/// slightly conservative rejection rate.
pub fn edge_collision_free(
    from: &Pose<Real>,
    to: &Pose<Real>,
    depart: Real,
    arrive: Real,
    grid: &VoxelGrid<Real>,
    tracks: &[ObstacleTrack<Real>],
    kalman: &KalmanConfig<Real>,
    motion: &MotionModel,
    collision_step: Real,
) -> bool {
    if !swept_box_free(&from.position, &to.position, grid, &motion.agent_box) {
        return false;
    }
    if tracks.is_empty() {
        return true;
    }

    let travel = to.position - from.position;
    let dist = travel.norm();
    let window = arrive - depart;
    let agent_r = motion.circumradius();
    // The agent translates during [depart, depart + dist/v_lin] and then
    // only rotates; position at time t:
    let travel_time = dist / motion.v_lin;
    let agent_pos = |t: Real| -> Vector3<Real> {
        if dist <= 0.0 || travel_time <= 0.0 {
            return from.position;
        }
        let s = ((t - depart) / travel_time).clamp(0.0, 1.0);
        from.position + travel * s
    };

    let n = (window / collision_step).ceil().max(1.0) as usize;
    for track in tracks {
        let v_track = track.velocity().norm();
        let margin = (motion.v_lin + v_track) * collision_step * 0.5;
        let mut prev_d = (agent_pos(depart)
            - predict_at(track, (depart - track.last_update).max(0.0), kalman).mean_position)
            .norm();
        for i in 1..=n {
            let t = depart + window * (i as Real) / (n as Real);
            let predicted = predict_at(track, (t - track.last_update).max(0.0), kalman);
            let threshold =
                agent_r + track.radius + uncertainty_inflation(predicted.sigma_max());
            let d = (agent_pos(t) - predicted.mean_position).norm();
            // Covariance grows with time, so the end-of-interval threshold
            // bounds the whole interval.
            if prev_d.min(d) - margin <= threshold {
                return false;
            }
            prev_d = d;
        }
    }
    true
}

/// Static sweep: the agent box, axis-aligned, sampled along the segment at
/// half-resolution spacing, must stay in known-free cells. The box is
/// inflated by the per-sample displacement so the union of the sampled
/// boxes covers the entire swept volume (without the inflation, diagonal
/// motion leaves uncovered slivers at the box corners between samples).
pub fn swept_box_free(
    from: &Vector3<Real>,
    to: &Vector3<Real>,
    grid: &VoxelGrid<Real>,
    agent_box: &Vector3<Real>,
) -> bool {
    let travel = to - from;
    let dist = travel.norm();
    let step = grid.resolution() * 0.5;
    let n = (dist / step).ceil().max(1.0) as usize;
    let checked = agent_box + travel.abs() / (n as Real);
    for i in 0..=n {
        let p = from + travel * (i as Real) / (n as Real);
        if !box_position_free(&p, grid, &checked) {
            return false;
        }
    }
    true
}

/// True iff every cell overlapped by the agent box centered at `p` is known
/// Free. Unknown cells count as blocked — the agent's body never enters
/// unmapped space (the sensor reaches ahead of the body, so frontiers stay
/// approachable). Cells outside the bounding box count as blocked.
pub fn box_position_free(
    p: &Vector3<Real>,
    grid: &VoxelGrid<Real>,
    agent_box: &Vector3<Real>,
) -> bool {
    let half = agent_box * 0.5;
    let lo = p - half;
    let hi = p + half;
    let (Some(lo_idx), Some(hi_idx)) = (grid.world_to_index(&lo), grid.world_to_index(&hi)) else {
        return false;
    };
    for z in lo_idx.z..=hi_idx.z {
        for y in lo_idx.y..=hi_idx.y {
            for x in lo_idx.x..=hi_idx.x {
                if grid.state(crate::map::CellIdx { x, y, z }) != CellState::Free {
                    return false;
                }
            }
        }
    }
    true
}

/// Everything a planning round reads; bundled so the planner signature
/// stays manageable.
pub struct PlanningContext<'a> {
    pub grid: &'a VoxelGrid<Real>,
    pub tracks: &'a [ObstacleTrack<Real>],
    pub kalman: &'a KalmanConfig<Real>,
    pub dfm: &'a FrequencyGrid<Real>,
    pub weights: &'a PlannerWeights<Real>,
    pub sensor: &'a SensorModel<Real>,
    pub gain_cfg: &'a GainConfig,
    pub motion: &'a MotionModel,
}

/// Grow a tree from `root`. Uniform position sampling inside the bounding
/// box (within the altitude band), nearest-node extension clipped to the
/// extension range, admission gated on the timed collision check. Each
/// admitted node is scored with the occlusion-aware gain at its arrival
/// time, the border boost, and the frequency-map bonus.
pub fn expand_tree(
    root: Pose<Real>,
    now: Real,
    ctx: &PlanningContext<'_>,
    cfg: &LocalPlannerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<RrtTree> {
    let grid = ctx.grid;
    let root_cell = grid
        .world_to_index(&root.position)
        .ok_or(Error::InvalidStart)?;
    if grid.state(root_cell) != CellState::Free {
        return Err(Error::InvalidStart);
    }

    let bbox = grid.bbox();
    let (zmin, zmax) = altitude_band(bbox.min.z, bbox.max.z, cfg.altitude_margin);
    let mut nodes = vec![RrtNode {
        pose: root,
        parent: None,
        toa: now,
        cumulative_cost: 0.0,
        dynamic_gain: 0.0,
        score: 0.0,
    }];

    for _ in 0..cfg.sample_budget {
        let sample = Vector3::new(
            rng.gen_range(bbox.min.x..bbox.max.x),
            rng.gen_range(bbox.min.y..bbox.max.y),
            rng.gen_range(zmin..zmax),
        );
        let (nearest, _) = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i, (n.pose.position - sample).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("tree has a root");
        let parent = &nodes[nearest];
        let offset = sample - parent.pose.position;
        let dist = offset.norm();
        if dist < 1e-6 {
            continue;
        }
        let edge_len = dist.min(cfg.extension_range);
        let position = parent.pose.position + offset * (edge_len / dist);

        let Some(cell) = grid.world_to_index(&position) else {
            continue;
        };
        if grid.state(cell) != CellState::Free {
            continue;
        }
        if !box_position_free(&position, grid, &ctx.motion.agent_box) {
            continue;
        }

        // Yaw is chosen by the gain evaluation at the (translation-only)
        // arrival estimate; the final arrival time then includes the slew.
        let t_pos = parent.toa + edge_len / ctx.motion.v_lin;
        let gain = dynamic_gain(
            grid,
            &position,
            t_pos,
            ctx.tracks,
            ctx.kalman,
            ctx.sensor,
            ctx.gain_cfg,
        )?;
        // Face the best view, tie-broken toward the travel direction so
        // near-equal windows do not pin the camera to one world direction.
        let travel_azimuth = offset.y.atan2(offset.x);
        let pose = Pose {
            position,
            yaw: crate::gain::tie_broken_best_yaw(
                &gain.yaw_bin_gains,
                ctx.sensor,
                travel_azimuth,
                0.1,
            ),
        };
        let parent_pose = parent.pose;
        let parent_toa = parent.toa;
        let parent_cost = parent.cumulative_cost;
        let toa = time_of_arrival(parent_toa, &parent_pose, &pose, ctx.motion.v_lin, ctx.motion.v_ang);
        if !edge_collision_free(
            &parent_pose,
            &pose,
            parent_toa,
            toa,
            grid,
            ctx.tracks,
            ctx.kalman,
            ctx.motion,
            cfg.collision_step,
        ) {
            continue;
        }

        let boosted = border_boost(gain.gain, &position, bbox, ctx.weights);
        let cumulative_cost = parent_cost + edge_len;
        let node_score = score(
            boosted,
            cumulative_cost,
            ctx.dfm.query(&position),
            ctx.weights,
        )?;
        nodes.push(RrtNode {
            pose,
            parent: Some(nearest),
            toa,
            cumulative_cost,
            dynamic_gain: gain.gain,
            score: node_score,
        });
    }

    if nodes.len() == 1 {
        return Err(Error::ExpansionStarved);
    }
    Ok(RrtTree { nodes })
}

pub(crate) fn altitude_band(zmin: Real, zmax: Real, margin: Real) -> (Real, Real) {
    let lo = zmin + margin;
    let hi = zmax - margin;
    if lo < hi {
        (lo, hi)
    } else {
        // Degenerate box: sample a thin band around the middle.
        let mid = (zmin + zmax) * 0.5;
        (mid - 1e-6, mid + 1e-6)
    }
}

/// Path from the root to the highest-scoring node, as timed steps. The
/// root alone yields an empty plan (the caller falls back to the global
/// planner). Ties break toward the earlier arrival, then the older node.
pub fn best_branch(tree: &RrtTree) -> Vec<PlanStep> {
    let mut best: Option<usize> = None;
    for (i, node) in tree.nodes.iter().enumerate().skip(1) {
        let better = match best {
            None => true,
            Some(b) => {
                let cur = &tree.nodes[b];
                node.score > cur.score || (node.score == cur.score && node.toa < cur.toa)
            }
        };
        if better {
            best = Some(i);
        }
    }
    let Some(mut idx) = best else {
        return Vec::new();
    };

    let mut steps = Vec::new();
    while let Some(parent) = tree.nodes[idx].parent {
        steps.push(PlanStep {
            target: tree.nodes[idx].pose,
            depart: tree.nodes[parent].toa,
            arrive: tree.nodes[idx].toa,
        });
        idx = parent;
    }
    steps.reverse();
    steps
}
