//! Built-in benchmark worlds. All are procedurally described boxes-and-
//! corridors environments spanning the size range from a small cafe to a
//! village block, each with five fixed start positions.

use daep_core::geometry::Aabb;
use daep_core::sim::{ObstaclePath, PathMode, Scenario};
use daep_core::{Real, Vec3};

use crate::error::BenchError;

pub const SCENARIO_NAMES: &[&str] = &["empty-box", "cafe", "maze", "apartment", "village"];

pub fn by_name(name: &str) -> Result<Scenario, BenchError> {
    let s = match name {
        "empty-box" => empty_box(),
        "cafe" => cafe(),
        "maze" => maze(),
        "apartment" => apartment(),
        "village" => village(),
        other => {
            return Err(BenchError::Config(format!(
                "unknown scenario '{other}' (available: {})",
                SCENARIO_NAMES.join(", ")
            )))
        }
    };
    s.validate()
        .map_err(|e| BenchError::Config(format!("scenario {name}: {e}")))?;
    Ok(s)
}

fn solid(x0: Real, y0: Real, z0: Real, x1: Real, y1: Real, z1: Real) -> Aabb<Real> {
    Aabb::new(Vec3::new(x0, y0, z0), Vec3::new(x1, y1, z1))
}

fn patrol(points: &[(Real, Real)], z: Real, mode: PathMode) -> ObstaclePath {
    ObstaclePath {
        waypoints: points.iter().map(|&(x, y)| Vec3::new(x, y, z)).collect(),
        mode,
        speed: 0.35,
        radius: 0.3,
        height: 1.8,
    }
}

/// Trivially explorable 10 x 10 x 3 m box; smoke-test world.
pub fn empty_box() -> Scenario {
    Scenario {
        name: "empty-box".into(),
        bbox: solid(0.0, 0.0, 0.0, 10.0, 10.0, 3.0),
        resolution: 0.2,
        static_solids: vec![],
        obstacle_paths: vec![],
        start_poses: vec![
            Vec3::new(1.5, 1.5, 0.6),
            Vec3::new(8.5, 1.5, 0.6),
            Vec3::new(8.5, 8.5, 0.6),
            Vec3::new(1.5, 8.5, 0.6),
            Vec3::new(5.0, 5.0, 0.6),
        ],
        seed: 0,
    }
}

/// Small room (~130 m^3) with four floor-to-ceiling pillars and two
/// walkers weaving between them.
pub fn cafe() -> Scenario {
    let h = 2.4;
    Scenario {
        name: "cafe".into(),
        bbox: solid(0.0, 0.0, 0.0, 9.0, 6.0, h),
        resolution: 0.2,
        static_solids: vec![
            solid(2.2, 1.6, 0.0, 3.0, 2.4, h),
            solid(2.2, 3.6, 0.0, 3.0, 4.4, h),
            solid(6.0, 1.6, 0.0, 6.8, 2.4, h),
            solid(6.0, 3.6, 0.0, 6.8, 4.4, h),
        ],
        obstacle_paths: vec![
            patrol(&[(1.2, 3.0), (4.5, 3.0), (7.8, 3.0)], 0.0, PathMode::BackAndForth),
            patrol(&[(4.5, 1.0), (4.5, 5.0)], 0.0, PathMode::BackAndForth),
        ],
        start_poses: vec![
            Vec3::new(1.0, 1.0, 0.6),
            Vec3::new(8.0, 1.0, 0.6),
            Vec3::new(8.0, 5.0, 0.6),
            Vec3::new(1.0, 5.0, 0.6),
            Vec3::new(4.5, 5.2, 0.6),
        ],
        seed: 0,
    }
}

/// Serpentine corridor world (~865 m^3) with five walkers patrolling the
/// corridors. The low ceiling keeps the agent at person height, so
/// collision avoidance is genuinely exercised.
pub fn maze() -> Scenario {
    let h = 2.2;
    let side = 19.8;
    let mut solids = vec![
        // Perimeter walls.
        solid(0.0, 0.0, 0.0, 0.4, side, h),
        solid(side - 0.4, 0.0, 0.0, side, side, h),
        solid(0.4, 0.0, 0.0, side - 0.4, 0.4, h),
        solid(0.4, side - 0.4, 0.0, side - 0.4, side, h),
    ];
    // Serpentine baffles: gaps alternate between the north and south ends.
    solids.push(solid(3.8, 0.4, 0.0, 4.2, 15.8, h));
    solids.push(solid(7.8, 4.0, 0.0, 8.2, side - 0.4, h));
    solids.push(solid(11.8, 0.4, 0.0, 12.2, 15.8, h));
    solids.push(solid(15.8, 4.0, 0.0, 16.2, side - 0.4, h));

    let obstacle_paths = vec![
        patrol(&[(2.0, 1.5), (2.0, 14.5)], 0.0, PathMode::BackAndForth),
        patrol(&[(6.0, 5.0), (6.0, 18.3)], 0.0, PathMode::BackAndForth),
        patrol(&[(10.0, 1.5), (10.0, 14.5)], 0.0, PathMode::BackAndForth),
        patrol(&[(14.0, 5.0), (14.0, 18.3)], 0.0, PathMode::BackAndForth),
        patrol(&[(18.0, 1.5), (18.0, 14.5)], 0.0, PathMode::BackAndForth),
    ];
    Scenario {
        name: "maze".into(),
        bbox: solid(0.0, 0.0, 0.0, side, side, h),
        resolution: 0.2,
        static_solids: solids,
        obstacle_paths,
        start_poses: vec![
            Vec3::new(2.0, 17.5, 0.6),
            Vec3::new(6.0, 2.0, 0.6),
            Vec3::new(10.0, 17.5, 0.6),
            Vec3::new(14.0, 2.0, 0.6),
            Vec3::new(18.0, 17.5, 0.6),
        ],
        seed: 0,
    }
}

/// Flat with several rooms off a central corridor (~1620 m^3), twelve
/// residents moving between rooms.
pub fn apartment() -> Scenario {
    let h = 2.4;
    let (w, d) = (26.0, 26.0);
    let mut solids = vec![
        solid(0.0, 0.0, 0.0, 0.4, d, h),
        solid(w - 0.4, 0.0, 0.0, w, d, h),
        solid(0.4, 0.0, 0.0, w - 0.4, 0.4, h),
        solid(0.4, d - 0.4, 0.0, w - 0.4, d, h),
    ];
    // Central corridor along y = 11..15; rooms north and south with door
    // gaps in their corridor-facing walls.
    for (x0, x1) in [(0.4, 7.6), (9.6, 16.4), (18.4, w - 0.4)] {
        solids.push(solid(x0, 10.6, 0.0, x1, 11.0, h)); // south side, doors between segments
        solids.push(solid(x0, 15.0, 0.0, x1, 15.4, h)); // north side
    }
    // Room dividers.
    solids.push(solid(8.6, 0.4, 0.0, 9.0, 7.0, h));
    solids.push(solid(17.0, 0.4, 0.0, 17.4, 7.0, h));
    solids.push(solid(8.6, 19.0, 0.0, 9.0, d - 0.4, h));
    solids.push(solid(17.0, 19.0, 0.0, 17.4, d - 0.4, h));

    let mut obstacle_paths = Vec::new();
    // Corridor pacing.
    for k in 0..4 {
        let y = 12.0 + (k as Real) * 0.6;
        obstacle_paths.push(patrol(&[(2.0, y), (24.0, y)], 0.0, PathMode::BackAndForth));
    }
    // Room loops.
    for &(cx, cy) in &[
        (4.0, 5.0),
        (13.0, 5.0),
        (21.0, 5.0),
        (4.0, 21.0),
        (13.0, 21.0),
        (21.0, 21.0),
    ] {
        obstacle_paths.push(patrol(
            &[(cx - 1.5, cy - 1.5), (cx + 1.5, cy - 1.5), (cx + 1.5, cy + 1.5), (cx - 1.5, cy + 1.5)],
            0.0,
            PathMode::Loop,
        ));
    }
    // Two more corridor pacers at the remaining lanes.
    obstacle_paths.push(patrol(&[(2.0, 14.4), (24.0, 14.4)], 0.0, PathMode::BackAndForth));
    obstacle_paths.push(patrol(&[(24.0, 11.6), (2.0, 11.6)], 0.0, PathMode::BackAndForth));

    Scenario {
        name: "apartment".into(),
        bbox: solid(0.0, 0.0, 0.0, w, d, h),
        resolution: 0.2,
        static_solids: solids,
        obstacle_paths,
        start_poses: vec![
            Vec3::new(2.0, 2.0, 0.6),
            Vec3::new(24.0, 2.0, 0.6),
            Vec3::new(13.0, 13.0, 0.6),
            Vec3::new(2.0, 24.0, 0.6),
            Vec3::new(24.0, 24.0, 0.6),
        ],
        seed: 0,
    }
}

/// Open outdoor block (~40000 m^3) with scattered buildings and fifteen
/// walkers on long routes; large enough to starve window-limited samplers.
pub fn village() -> Scenario {
    let h = 4.0;
    let side = 100.0;
    let buildings = vec![
        solid(10.0, 10.0, 0.0, 22.0, 20.0, 3.0),
        solid(35.0, 12.0, 0.0, 47.0, 24.0, 3.2),
        solid(62.0, 8.0, 0.0, 76.0, 18.0, 2.8),
        solid(12.0, 40.0, 0.0, 24.0, 52.0, 3.0),
        solid(40.0, 44.0, 0.0, 54.0, 56.0, 3.4),
        solid(70.0, 38.0, 0.0, 84.0, 50.0, 3.0),
        solid(8.0, 70.0, 0.0, 20.0, 84.0, 3.0),
        solid(38.0, 72.0, 0.0, 52.0, 82.0, 3.2),
        solid(66.0, 68.0, 0.0, 80.0, 82.0, 3.0),
    ];
    let mut obstacle_paths = Vec::new();
    let routes: [&[(Real, Real)]; 15] = [
        &[(5.0, 5.0), (95.0, 5.0)],
        &[(5.0, 30.0), (95.0, 30.0)],
        &[(5.0, 60.0), (95.0, 60.0)],
        &[(5.0, 95.0), (95.0, 95.0)],
        &[(30.0, 5.0), (30.0, 95.0)],
        &[(60.0, 5.0), (60.0, 95.0)],
        &[(95.0, 36.0), (5.0, 36.0)],
        &[(28.0, 28.0), (28.0, 65.0), (62.0, 65.0)],
        &[(58.0, 26.0), (88.0, 26.0), (88.0, 60.0)],
        &[(6.0, 56.0), (34.0, 56.0)],
        &[(26.0, 86.0), (62.0, 86.0)],
        &[(86.0, 66.0), (86.0, 92.0), (58.0, 92.0)],
        &[(50.0, 34.0), (6.0, 34.0), (6.0, 14.0)],
        &[(56.0, 60.0), (56.0, 34.0)],
        &[(92.0, 12.0), (92.0, 34.0)],
    ];
    for r in routes {
        obstacle_paths.push(patrol(r, 0.0, PathMode::BackAndForth));
    }
    Scenario {
        name: "village".into(),
        bbox: solid(0.0, 0.0, 0.0, side, side, h),
        resolution: 0.2,
        static_solids: buildings,
        obstacle_paths,
        start_poses: vec![
            Vec3::new(5.0, 50.0, 0.6),
            Vec3::new(50.0, 5.0, 0.6),
            Vec3::new(95.0, 50.0, 0.6),
            Vec3::new(50.0, 95.0, 0.6),
            Vec3::new(30.0, 34.0, 0.6),
        ],
        seed: 0,
    }
}
