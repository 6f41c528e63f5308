//! Global planner: a cache of high-gain candidate poses left behind by the
//! local planner, a lightweight roadmap through known free space, and
//! time-aware path planning toward the best remaining candidate.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gain::{border_boost, dynamic_gain, score};
use crate::geometry::Pose;
use crate::map::{CellIdx, CellState};
use crate::planner_local::{
    altitude_band, box_position_free, edge_collision_free, swept_box_free, time_of_arrival,
    PlanStep, PlanningContext, RrtTree,
};
use crate::{Real, VoxelGrid};

/// A remembered viewpoint worth returning to.
#[derive(Debug, Clone)]
pub struct GlobalCandidate {
    pub pose: Pose<Real>,
    pub cached_gain: Real,
    pub created_at: Real,
    pub last_reevaluated: Real,
}

/// Candidate cache with spatial deduplication, plus a record of how much of
/// the bounding box the exploratory sampler has covered.
#[derive(Debug, Clone, Default)]
pub struct CandidateSet {
    pub candidates: Vec<GlobalCandidate>,
    /// Per-axis [min, max] over every exploratory sample ever drawn.
    pub sampled_extent: Option<[[Real; 2]; 3]>,
}

impl CandidateSet {
    fn note_sample(&mut self, p: &Vector3<Real>) {
        let e = self.sampled_extent.get_or_insert([[p.x, p.x], [p.y, p.y], [p.z, p.z]]);
        for (axis, v) in [p.x, p.y, p.z].into_iter().enumerate() {
            e[axis][0] = e[axis][0].min(v);
            e[axis][1] = e[axis][1].max(v);
        }
    }

    /// Insert with dedup: within `dedup_radius` of an existing candidate,
    /// the higher gain wins. The anchored pose is kept, so candidates can
    /// never drift toward each other and the pairwise separation holds.
    pub fn insert(&mut self, candidate: GlobalCandidate, dedup_radius: Real) {
        for existing in self.candidates.iter_mut() {
            if (existing.pose.position - candidate.pose.position).norm() <= dedup_radius {
                if candidate.cached_gain > existing.cached_gain {
                    existing.cached_gain = candidate.cached_gain;
                    existing.last_reevaluated = candidate.last_reevaluated;
                }
                return;
            }
        }
        self.candidates.push(candidate);
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Global-planner tuning.
#[derive(Debug, Clone, Copy)]
pub struct GlobalPlannerConfig {
    /// Candidates closer than this merge into one.
    pub dedup_radius: Real,
    /// Candidates below this gain are dropped as explored [m^3].
    pub min_gain: Real,
    /// Roadmap vertices within this distance get a connecting edge [m].
    pub connect_radius: Real,
    /// Fresh uniform pose samples per goal selection, drawn over the whole
    /// bounding box so the cache never collapses to a window around the
    /// agent.
    pub exploratory_samples: usize,
    /// Altitude margin for exploratory sampling [m].
    pub altitude_margin: Real,
    /// Re-search attempts when timed edges invalidate a path.
    pub reroute_attempts: usize,
}

impl Default for GlobalPlannerConfig {
    fn default() -> Self {
        Self {
            dedup_radius: 0.5,
            min_gain: 0.5,
            connect_radius: 2.0,
            exploratory_samples: 50,
            altitude_margin: 0.5,
            reroute_attempts: 50,
        }
    }
}

/// Roadmap through known free space: vertices are collision-free poses,
/// edges are statically collision-checked segments with symmetric lengths.
#[derive(Debug, Clone, Default)]
pub struct RoadGraph {
    vertices: Vec<Pose<Real>>,
    adjacency: Vec<Vec<(usize, Real)>>,
}

impl RoadGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Pose<Real>] {
        &self.vertices
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, Real)] {
        &self.adjacency[v]
    }

    /// Add a vertex and connect it to every existing vertex within
    /// `connect_radius` whose straight segment is statically free.
    /// A pose within 1 cm of an existing vertex is merged into it.
    pub fn add_vertex(
        &mut self,
        pose: Pose<Real>,
        grid: &crate::VoxelGrid,
        agent_box: &Vector3<Real>,
        connect_radius: Real,
    ) -> usize {
        for (i, v) in self.vertices.iter().enumerate() {
            if (v.position - pose.position).norm() < 0.01 {
                return i;
            }
        }
        let id = self.vertices.len();
        self.vertices.push(pose);
        self.adjacency.push(Vec::new());
        for other in 0..id {
            let d = (self.vertices[other].position - pose.position).norm();
            if d > 0.0
                && d <= connect_radius
                && swept_box_free(
                    &self.vertices[other].position,
                    &pose.position,
                    grid,
                    agent_box,
                )
            {
                self.adjacency[id].push((other, d));
                self.adjacency[other].push((id, d));
            }
        }
        id
    }

    /// Dijkstra by edge length; `banned` holds directed edges excluded by
    /// the timed collision check. Returns the vertex path and its length.
    pub fn shortest_path(
        &self,
        from: usize,
        to: usize,
        banned: &BTreeSet<(usize, usize)>,
    ) -> Option<(Vec<usize>, Real)> {
        let n = self.vertices.len();
        if from >= n || to >= n {
            return None;
        }
        let mut dist = vec![Real::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        let mut done = vec![false; n];
        dist[from] = 0.0;
        // Binary-heap Dijkstra keyed on (distance, vertex) for a
        // deterministic pop order under ties.
        let mut heap = std::collections::BinaryHeap::new();
        heap.push(std::cmp::Reverse((ordered_float(0.0), from)));
        while let Some(std::cmp::Reverse((d, u))) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            if u == to {
                break;
            }
            let du = from_ordered(d);
            for &(v, w) in &self.adjacency[u] {
                if banned.contains(&(u, v)) {
                    continue;
                }
                let nd = du + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = u;
                    heap.push(std::cmp::Reverse((ordered_float(nd), v)));
                }
            }
        }
        if !dist[to].is_finite() {
            return None;
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = prev[cur];
            path.push(cur);
        }
        path.reverse();
        Some((path, dist[to]))
    }
}

/// Total-ordering key for non-NaN floats in the Dijkstra heap.
fn ordered_float(x: Real) -> u64 {
    debug_assert!(!x.is_nan());
    let bits = x.to_bits();
    if x >= 0.0 {
        bits | (1 << 63)
    } else {
        !bits
    }
}

fn from_ordered(k: u64) -> Real {
    if k & (1 << 63) != 0 {
        Real::from_bits(k & !(1 << 63))
    } else {
        Real::from_bits(!k)
    }
}

/// Fold a finished local tree into the cache: every node whose gain clears
/// `min_gain` becomes (or reinforces) a candidate.
pub fn cache_candidates(
    set: &mut CandidateSet,
    tree: &RrtTree,
    now: Real,
    cfg: &GlobalPlannerConfig,
) {
    for node in tree.nodes.iter() {
        if node.parent.is_none() {
            continue;
        }
        if node.dynamic_gain >= cfg.min_gain {
            set.insert(
                GlobalCandidate {
                    pose: node.pose,
                    cached_gain: node.dynamic_gain,
                    created_at: now,
                    last_reevaluated: now,
                },
                cfg.dedup_radius,
            );
        }
    }
}

/// Pick the next global goal, or signal exploration complete with `None`.
///
/// Fresh exploratory poses are sampled uniformly over the whole bounding
/// box and added to the cache when they clear `min_gain`. Every candidate
/// reachable over the roadmap is then re-scored with its occlusion-aware
/// gain at the estimated arrival time; stale ones (re-evaluated gain below
/// `min_gain`) are dropped for good.
/// Draw uniform samples over the whole bounding box (within the altitude
/// band) and cache the ones that stand in known-free space with enough
/// static gain. Cheap enough to run every planning round, which keeps the
/// cache stocked and the sampling footprint growing even while the local
/// planner is doing all the work.
pub fn sample_exploratory_candidates(
    set: &mut CandidateSet,
    ctx: &PlanningContext<'_>,
    now: Real,
    cfg: &GlobalPlannerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let bbox = ctx.grid.bbox();
    let (zmin, zmax) = altitude_band(bbox.min.z, bbox.max.z, cfg.altitude_margin);
    for _ in 0..cfg.exploratory_samples {
        let p = Vector3::new(
            rng.gen_range(bbox.min.x..bbox.max.x),
            rng.gen_range(bbox.min.y..bbox.max.y),
            rng.gen_range(zmin..zmax),
        );
        set.note_sample(&p);
        let Some(cell) = ctx.grid.world_to_index(&p) else {
            continue;
        };
        if ctx.grid.state(cell) != CellState::Free
            || !crate::planner_local::box_position_free(&p, ctx.grid, &ctx.motion.agent_box)
        {
            continue;
        }
        let g = crate::gain::static_gain(ctx.grid, &p, ctx.sensor, ctx.gain_cfg)?;
        if g.gain >= cfg.min_gain {
            set.insert(
                GlobalCandidate {
                    pose: Pose {
                        position: p,
                        yaw: g.best_yaw,
                    },
                    cached_gain: g.gain,
                    created_at: now,
                    last_reevaluated: now,
                },
                cfg.dedup_radius,
            );
        }
    }
    Ok(())
}

pub fn select_global_goal(
    set: &mut CandidateSet,
    ctx: &PlanningContext<'_>,
    graph: &RoadGraph,
    agent: &Pose<Real>,
    now: Real,
    cfg: &GlobalPlannerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Option<GlobalCandidate>> {
    select_global_goal_with(set, ctx, graph, agent, now, cfg, rng, &mut None, false)
}

/// [`select_global_goal`] for same-instant retries: the caller holds the
/// reachability flood across calls, and `reuse_gains` keeps the gains the
/// first call of the round computed instead of re-raycasting every
/// candidate.
#[allow(clippy::too_many_arguments)]
pub fn select_global_goal_with(
    set: &mut CandidateSet,
    ctx: &PlanningContext<'_>,
    graph: &RoadGraph,
    agent: &Pose<Real>,
    now: Real,
    cfg: &GlobalPlannerConfig,
    rng: &mut ChaCha8Rng,
    field: &mut Option<DistanceField>,
    reuse_gains: bool,
) -> Result<Option<GlobalCandidate>> {
    sample_exploratory_candidates(set, ctx, now, cfg, rng)?;

    let bbox = ctx.grid.bbox();
    let mut keep = Vec::new();
    let mut best: Option<(Real, GlobalCandidate)> = None;
    let candidates = std::mem::take(&mut set.candidates);
    for mut candidate in candidates {
        let path_len = roadmap_distance(graph, agent, &candidate.pose, ctx, cfg, field);
        // Unreachable candidates cannot be selected, but their gain is
        // still re-evaluated (with a straight-line travel estimate) so
        // explored ones are purged instead of lingering forever. On a
        // same-round retry the cached gains are already current.
        let gain = if reuse_gains && (candidate.last_reevaluated - now).abs() < 1e-9 {
            candidate.cached_gain
        } else {
            let travel =
                path_len.unwrap_or((candidate.pose.position - agent.position).norm());
            let arrival = now
                + travel / ctx.motion.v_lin
                + crate::geometry::angle_diff(agent.yaw, candidate.pose.yaw).abs()
                    / ctx.motion.v_ang;
            dynamic_gain(
                ctx.grid,
                &candidate.pose.position,
                arrival,
                ctx.tracks,
                ctx.kalman,
                ctx.sensor,
                ctx.gain_cfg,
            )?
            .gain
        };
        candidate.cached_gain = gain;
        candidate.last_reevaluated = now;
        if gain < cfg.min_gain {
            continue; // explored since it was cached; drop
        }
        if let Some(path_len) = path_len {
            let boosted = border_boost(gain, &candidate.pose.position, bbox, ctx.weights);
            let s = score(
                boosted,
                path_len,
                ctx.dfm.query(&candidate.pose.position),
                ctx.weights,
            )?;
            let better = match &best {
                None => true,
                Some((bs, _)) => s > *bs,
            };
            if better {
                best = Some((s, candidate.clone()));
            }
        }
        keep.push(candidate);
    }
    set.candidates = keep;
    Ok(best.map(|(_, c)| c))
}

/// Deterministic frontier sweep: every Free cell with agent-box clearance
/// that touches an Unknown cell (6-neighborhood) is a potential viewpoint.
/// The hits are evenly subsampled down to `max_candidates` and screened by
/// static gain. An empty result means no reachable viewpoint can still see
/// unmapped volume — the authoritative "exploration complete" signal that
/// random sampling alone cannot provide.
pub fn frontier_candidates(
    ctx: &PlanningContext<'_>,
    now: Real,
    cfg: &GlobalPlannerConfig,
    max_candidates: usize,
) -> Result<Vec<GlobalCandidate>> {
    let grid = ctx.grid;
    let dims = grid.dims();
    let mut centers = Vec::new();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let c = CellIdx { x, y, z };
                if grid.state(c) != CellState::Free {
                    continue;
                }
                let mut touches_unknown = false;
                for (dx, dy, dz) in [
                    (-1i64, 0i64, 0i64),
                    (1, 0, 0),
                    (0, -1, 0),
                    (0, 1, 0),
                    (0, 0, -1),
                    (0, 0, 1),
                ] {
                    let (nx, ny, nz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                    if nx < 0
                        || ny < 0
                        || nz < 0
                        || nx >= dims[0] as i64
                        || ny >= dims[1] as i64
                        || nz >= dims[2] as i64
                    {
                        continue;
                    }
                    if grid.state(CellIdx {
                        x: nx as usize,
                        y: ny as usize,
                        z: nz as usize,
                    }) == CellState::Unknown
                    {
                        touches_unknown = true;
                        break;
                    }
                }
                if !touches_unknown {
                    continue;
                }
                let center = grid.index_to_center(c);
                if box_position_free(&center, grid, &ctx.motion.agent_box) {
                    centers.push(center);
                }
            }
        }
    }
    let stride = (centers.len() / max_candidates.max(1)).max(1);
    let mut out = Vec::new();
    for center in centers.into_iter().step_by(stride).take(max_candidates) {
        let g = crate::gain::static_gain(grid, &center, ctx.sensor, ctx.gain_cfg)?;
        if g.gain >= cfg.min_gain {
            out.push(GlobalCandidate {
                pose: Pose {
                    position: center,
                    yaw: g.best_yaw,
                },
                cached_gain: g.gain,
                created_at: now,
                last_reevaluated: now,
            });
        }
    }
    Ok(out)
}

/// Expansion budget for the free-space search; beyond this the target is
/// treated as unreachable for now.
const GRID_SEARCH_BUDGET: usize = 200_000;

/// Single-source shortest-path distances over free, agent-box-clear cells
/// (26-connected, Euclidean edge costs). Computed once per goal selection so
/// reachability of every candidate costs one flood instead of one search
/// each.
pub struct DistanceField {
    dist: HashMap<usize, Real>,
    dims: [usize; 3],
}

impl DistanceField {
    pub fn build(
        start: &Vector3<Real>,
        grid: &VoxelGrid,
        agent_box: &Vector3<Real>,
        budget: usize,
    ) -> Self {
        let dims = grid.dims();
        let mut dist: HashMap<usize, Real> = HashMap::new();
        let Some(s) = grid.world_to_index(start) else {
            return Self { dist, dims };
        };
        let lin = |c: CellIdx| (c.z * dims[1] + c.y) * dims[0] + c.x;
        let mut cells: HashMap<usize, CellIdx> = HashMap::new();
        let mut open: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
        dist.insert(lin(s), 0.0);
        cells.insert(lin(s), s);
        open.push(Reverse((ordered_float(0.0), lin(s))));
        let mut expanded = 0usize;
        while let Some(Reverse((d, cur_lin))) = open.pop() {
            let d = from_ordered(d);
            if d > dist[&cur_lin] + 1e-12 {
                continue;
            }
            expanded += 1;
            if expanded > budget {
                break;
            }
            let cur = cells[&cur_lin];
            let cur_center = grid.index_to_center(cur);
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 && dz == 0 {
                            continue;
                        }
                        let (nx, ny, nz) =
                            (cur.x as i64 + dx, cur.y as i64 + dy, cur.z as i64 + dz);
                        if nx < 0
                            || ny < 0
                            || nz < 0
                            || nx >= dims[0] as i64
                            || ny >= dims[1] as i64
                            || nz >= dims[2] as i64
                        {
                            continue;
                        }
                        let n = CellIdx {
                            x: nx as usize,
                            y: ny as usize,
                            z: nz as usize,
                        };
                        if grid.state(n) != CellState::Free {
                            continue;
                        }
                        let center = grid.index_to_center(n);
                        if !box_position_free(&center, grid, agent_box) {
                            continue;
                        }
                        let n_lin = lin(n);
                        let nd = d + (center - cur_center).norm();
                        if dist.get(&n_lin).map(|&c| nd < c - 1e-12).unwrap_or(true) {
                            dist.insert(n_lin, nd);
                            cells.insert(n_lin, n);
                            open.push(Reverse((ordered_float(nd), n_lin)));
                        }
                    }
                }
            }
        }
        Self { dist, dims }
    }

    /// Distance from the source to the cell containing `p`, if reached.
    pub fn distance_to(&self, p: &Vector3<Real>, grid: &VoxelGrid) -> Option<Real> {
        let c = grid.world_to_index(p)?;
        let lin = (c.z * self.dims[1] + c.y) * self.dims[0] + c.x;
        self.dist.get(&lin).copied()
    }
}

/// A* over free, agent-box-clear cells (26-connected) between two positions.
/// Returns shortcut waypoints (exact endpoints included) and their total
/// length. Used when the sparse roadmap does not connect the endpoints even
/// though the mapped free space does.
pub fn grid_path(
    start: &Vector3<Real>,
    goal: &Vector3<Real>,
    grid: &VoxelGrid,
    agent_box: &Vector3<Real>,
) -> Option<(Vec<Vector3<Real>>, Real)> {
    let s = grid.world_to_index(start)?;
    let g = grid.world_to_index(goal)?;
    if !box_position_free(start, grid, agent_box) || !box_position_free(goal, grid, agent_box) {
        return None;
    }
    let dims = grid.dims();
    let lin = |c: CellIdx| (c.z * dims[1] + c.y) * dims[0] + c.x;
    let goal_center = grid.index_to_center(g);
    let goal_lin = lin(g);

    let mut best_cost: HashMap<usize, Real> = HashMap::new();
    let mut parent: HashMap<usize, CellIdx> = HashMap::new();
    let mut open: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    let mut cells: HashMap<usize, CellIdx> = HashMap::new();
    best_cost.insert(lin(s), 0.0);
    cells.insert(lin(s), s);
    let h0 = (grid.index_to_center(s) - goal_center).norm();
    open.push(Reverse((ordered_float(h0), lin(s))));

    let mut expanded = 0usize;
    while let Some(Reverse((f, cur_lin))) = open.pop() {
        let cur = cells[&cur_lin];
        let cur_cost = best_cost[&cur_lin];
        let cur_center = grid.index_to_center(cur);
        let cur_h = (cur_center - goal_center).norm();
        if from_ordered(f) > cur_cost + cur_h + 1e-9 {
            continue; // stale heap entry
        }
        if cur_lin == goal_lin {
            let mut rev = vec![*goal];
            let mut c = cur;
            loop {
                rev.push(grid.index_to_center(c));
                match parent.get(&lin(c)) {
                    Some(&p) => c = p,
                    None => break,
                }
            }
            rev.push(*start);
            rev.reverse();
            return Some(shortcut(&rev, grid, agent_box));
        }
        expanded += 1;
        if expanded > GRID_SEARCH_BUDGET {
            return None;
        }
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let (nx, ny, nz) = (
                        cur.x as i64 + dx,
                        cur.y as i64 + dy,
                        cur.z as i64 + dz,
                    );
                    if nx < 0
                        || ny < 0
                        || nz < 0
                        || nx >= dims[0] as i64
                        || ny >= dims[1] as i64
                        || nz >= dims[2] as i64
                    {
                        continue;
                    }
                    let n = CellIdx {
                        x: nx as usize,
                        y: ny as usize,
                        z: nz as usize,
                    };
                    if grid.state(n) != CellState::Free {
                        continue;
                    }
                    let center = grid.index_to_center(n);
                    if !box_position_free(&center, grid, agent_box) {
                        continue;
                    }
                    let n_lin = lin(n);
                    let cost = cur_cost + (center - cur_center).norm();
                    if best_cost.get(&n_lin).map(|&c| cost < c - 1e-12).unwrap_or(true) {
                        best_cost.insert(n_lin, cost);
                        parent.insert(n_lin, cur);
                        cells.insert(n_lin, n);
                        let fh = cost + (center - goal_center).norm();
                        open.push(Reverse((ordered_float(fh), n_lin)));
                    }
                }
            }
        }
    }
    None
}

/// Greedy string-pulling: keep the furthest point reachable by a free
/// straight sweep, repeat from there.
fn shortcut(
    points: &[Vector3<Real>],
    grid: &VoxelGrid,
    agent_box: &Vector3<Real>,
) -> (Vec<Vector3<Real>>, Real) {
    let mut out = vec![points[0]];
    let mut length = 0.0;
    let mut i = 0;
    while i + 1 < points.len() {
        let mut j = points.len() - 1;
        while j > i + 1 && !swept_box_free(&points[i], &points[j], grid, agent_box) {
            j -= 1;
        }
        length += (points[j] - points[i]).norm();
        out.push(points[j]);
        i = j;
    }
    (out, length)
}

/// Roadmap path length from the agent to a pose, with straight connectors
/// at both ends. Falls back to the direct segment when it is free.
fn roadmap_distance(
    graph: &RoadGraph,
    from: &Pose<Real>,
    to: &Pose<Real>,
    ctx: &PlanningContext<'_>,
    cfg: &GlobalPlannerConfig,
    field: &mut Option<DistanceField>,
) -> Option<Real> {
    let direct = (to.position - from.position).norm();
    if swept_box_free(&from.position, &to.position, ctx.grid, &ctx.motion.agent_box) {
        return Some(direct);
    }
    let start = connectors(graph, &from.position, ctx, cfg);
    let goal = connectors(graph, &to.position, ctx, cfg);
    let mut best: Option<Real> = None;
    for &(sv, sd) in &start {
        for &(gv, gd) in &goal {
            if let Some((_, len)) = graph.shortest_path(sv, gv, &BTreeSet::new()) {
                let total = sd + len + gd;
                if best.map(|b| total < b).unwrap_or(true) {
                    best = Some(total);
                }
            }
        }
    }
    if best.is_none() {
        // One flood from the agent answers reachability for every candidate
        // this round; a per-candidate search would have to exhaust the whole
        // mapped free space for each unreachable target.
        let f = field.get_or_insert_with(|| {
            DistanceField::build(&from.position, ctx.grid, &ctx.motion.agent_box, GRID_SEARCH_BUDGET)
        });
        best = f.distance_to(&to.position, ctx.grid);
    }
    best
}

/// Vertices reachable from `p` by a free straight connector, nearest first,
/// capped at a handful to bound the search.
fn connectors(
    graph: &RoadGraph,
    p: &Vector3<Real>,
    ctx: &PlanningContext<'_>,
    cfg: &GlobalPlannerConfig,
) -> Vec<(usize, Real)> {
    let mut by_dist: Vec<(usize, Real)> = graph
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, v)| (i, (v.position - p).norm()))
        .collect();
    by_dist.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut out = Vec::new();
    for (i, d) in by_dist {
        if out.len() >= 4 {
            break;
        }
        if d > cfg.connect_radius * 2.0 && !out.is_empty() {
            break;
        }
        if swept_box_free(p, &graph.vertices()[i].position, ctx.grid, &ctx.motion.agent_box) {
            out.push((i, d));
        }
    }
    out
}

/// Timed path to `goal` over the roadmap. The geometric shortest path is
/// stamped with arrival times; if an edge fails the timed collision check
/// for its window, it is excluded and the search reroutes.
pub fn plan_path(
    start: &Pose<Real>,
    goal: &Pose<Real>,
    graph: &RoadGraph,
    ctx: &PlanningContext<'_>,
    now: Real,
    cfg: &GlobalPlannerConfig,
    collision_step: Real,
) -> Result<Vec<PlanStep>> {
    if (start.position - goal.position).norm() < 1e-9 {
        return Ok(Vec::new());
    }
    let start_cell = ctx
        .grid
        .world_to_index(&start.position)
        .ok_or(Error::InvalidStart)?;
    if ctx.grid.state(start_cell) == CellState::Occupied {
        return Err(Error::InvalidStart);
    }

    // Work on an augmented graph with the start and goal as vertices.
    let mut aug = graph.clone();
    let s = aug.add_vertex(*start, ctx.grid, &ctx.motion.agent_box, cfg.connect_radius * 2.0);
    let g = aug.add_vertex(*goal, ctx.grid, &ctx.motion.agent_box, cfg.connect_radius * 2.0);

    let mut banned: BTreeSet<(usize, usize)> = BTreeSet::new();
    for _ in 0..cfg.reroute_attempts {
        let Some((path, _)) = aug.shortest_path(s, g, &banned) else {
            break;
        };
        match stamp_and_check(&path, &aug, goal, ctx, now, collision_step) {
            Ok(steps) => return Ok(steps),
            Err(bad_edge) => {
                banned.insert(bad_edge);
                banned.insert((bad_edge.1, bad_edge.0));
            }
        }
    }
    // The roadmap gave no safe route; try the mapped free space directly.
    // If only a later segment fails the timed check, commit the safe prefix:
    // moving closer shortens the prediction horizon for the next round, so a
    // corridor that is merely busy right now does not read as unreachable
    // forever.
    if let Some((waypoints, _)) =
        grid_path(&start.position, &goal.position, ctx.grid, &ctx.motion.agent_box)
    {
        match stamp_positions(&waypoints, start, goal, ctx, now, collision_step) {
            Ok(steps) => return Ok(steps),
            Err((_, prefix)) if !prefix.is_empty() => return Ok(prefix),
            Err(_) => {}
        }
    }
    Err(Error::Unreachable)
}

/// Assign departure/arrival times along `path` and run the timed collision
/// check per edge. On failure returns the offending edge.
fn stamp_and_check(
    path: &[usize],
    graph: &RoadGraph,
    goal: &Pose<Real>,
    ctx: &PlanningContext<'_>,
    now: Real,
    collision_step: Real,
) -> std::result::Result<Vec<PlanStep>, (usize, usize)> {
    let positions: Vec<Vector3<Real>> = path
        .iter()
        .map(|&v| graph.vertices()[v].position)
        .collect();
    let start = graph.vertices()[path[0]];
    stamp_positions(&positions, &start, goal, ctx, now, collision_step)
        .map_err(|(k, _)| (path[k - 1], path[k]))
}

/// Assign departure/arrival times along a position chain and run the timed
/// collision check per segment. Intermediate targets face the direction of
/// travel; the final one takes the goal yaw. On failure returns the index of
/// the offending segment's end point plus the steps that already checked out.
fn stamp_positions(
    positions: &[Vector3<Real>],
    start: &Pose<Real>,
    goal: &Pose<Real>,
    ctx: &PlanningContext<'_>,
    now: Real,
    collision_step: Real,
) -> std::result::Result<Vec<PlanStep>, (usize, Vec<PlanStep>)> {
    let mut steps = Vec::new();
    let mut t = now;
    let mut pose = *start;
    for k in 1..positions.len() {
        let next_pos = positions[k];
        let is_last = k + 1 == positions.len();
        // Duplicate vertices (e.g. a roadmap vertex at the start pose)
        // produce zero-length segments; emitting them as steps would let a
        // blocked path masquerade as a committed plan that goes nowhere.
        if !is_last && (next_pos - pose.position).norm() < 1e-9 {
            continue;
        }
        let yaw = if is_last {
            goal.yaw
        } else {
            let d = next_pos - pose.position;
            d.y.atan2(d.x)
        };
        let target = Pose {
            position: next_pos,
            yaw,
        };
        let arrive = time_of_arrival(t, &pose, &target, ctx.motion.v_lin, ctx.motion.v_ang);
        if !edge_collision_free(
            &pose,
            &target,
            t,
            arrive,
            ctx.grid,
            ctx.tracks,
            ctx.kalman,
            ctx.motion,
            collision_step,
        ) {
            return Err((k, steps));
        }
        steps.push(PlanStep {
            target,
            depart: t,
            arrive,
        });
        t = arrive;
        pose = target;
    }
    Ok(steps)
}
