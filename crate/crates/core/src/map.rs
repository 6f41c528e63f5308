//! Volumetric internal map: a dense voxel grid with three-state cells,
//! grid ray traversal, depth-scan insertion and coverage accounting.

use std::io::{Read, Write};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::scalar::{cast, Scalar};

/// State of a single map cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum CellState {
    Unknown = 0,
    Free = 1,
    Occupied = 2,
}

impl CellState {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(CellState::Unknown),
            1 => Some(CellState::Free),
            2 => Some(CellState::Occupied),
            _ => None,
        }
    }
}

/// Integer cell coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIdx {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

/// A sensor ray. Direction must be unit length.
#[derive(Debug, Clone, Copy)]
pub struct Ray<F: Scalar> {
    pub origin: Vector3<F>,
    pub direction: Vector3<F>,
    pub max_range: F,
}

impl<F: Scalar> Ray<F> {
    pub fn new(origin: Vector3<F>, direction: Vector3<F>, max_range: F) -> Result<Self> {
        let norm = direction.norm();
        if (norm - F::one()).abs() > cast(1e-9) {
            return Err(Error::InvalidArgument(
                "ray direction must be unit length".into(),
            ));
        }
        if max_range <= F::zero() {
            return Err(Error::InvalidArgument("ray max_range must be positive".into()));
        }
        Ok(Self {
            origin,
            direction,
            max_range,
        })
    }
}

/// Number of cells per axis for a bounding box at a given resolution.
pub fn grid_dims<F: Scalar>(bbox: &Aabb<F>, resolution: F) -> Result<[usize; 3]> {
    if resolution <= F::zero() {
        return Err(Error::ConfigMismatch("resolution must be positive".into()));
    }
    let mut dims = [0usize; 3];
    for i in 0..3 {
        let n = ((bbox.max[i] - bbox.min[i]) / resolution).ceil();
        if n < F::one() {
            return Err(Error::ConfigMismatch(format!(
                "bounding box is degenerate along axis {i}"
            )));
        }
        dims[i] = n.to_f64_lossy() as usize;
    }
    Ok(dims)
}

/// Dense three-state occupancy grid over an axis-aligned bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid<F: Scalar> {
    bbox: Aabb<F>,
    resolution: F,
    dims: [usize; 3],
    cells: Vec<CellState>,
}

impl<F: Scalar> VoxelGrid<F> {
    /// Create an all-Unknown grid.
    pub fn new(bbox: Aabb<F>, resolution: F) -> Result<Self> {
        let dims = grid_dims(&bbox, resolution)?;
        let n = dims[0] * dims[1] * dims[2];
        Ok(Self {
            bbox,
            resolution,
            dims,
            cells: vec![CellState::Unknown; n],
        })
    }

    pub fn bbox(&self) -> &Aabb<F> {
        &self.bbox
    }

    pub fn resolution(&self) -> F {
        self.resolution
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn linear(&self, idx: CellIdx) -> usize {
        idx.x + self.dims[0] * (idx.y + self.dims[1] * idx.z)
    }

    pub fn state(&self, idx: CellIdx) -> CellState {
        self.cells[self.linear(idx)]
    }

    pub fn set_state(&mut self, idx: CellIdx, s: CellState) {
        let l = self.linear(idx);
        self.cells[l] = s;
    }

    pub fn states(&self) -> &[CellState] {
        &self.cells
    }

    /// Cell under a world point, or `None` outside the bounding box.
    /// Points exactly on a cell boundary floor to the upper cell; the top
    /// boundary of the box clamps into the last cell.
    pub fn world_to_index(&self, p: &Vector3<F>) -> Option<CellIdx> {
        if !self.bbox.contains(p) {
            return None;
        }
        let mut c = [0usize; 3];
        for i in 0..3 {
            let f = ((p[i] - self.bbox.min[i]) / self.resolution).floor();
            let v = f.to_f64_lossy() as usize;
            c[i] = v.min(self.dims[i] - 1);
        }
        Some(CellIdx {
            x: c[0],
            y: c[1],
            z: c[2],
        })
    }

    /// Cell of a hit endpoint. Floors world coordinates; a hit within
    /// tolerance of a cell boundary ties toward the lower index.
    pub fn hit_cell_index(&self, p: &Vector3<F>) -> Option<CellIdx> {
        if !self.bbox.contains(p) {
            return None;
        }
        let tol = cast::<F>(1e-9);
        let mut c = [0usize; 3];
        for i in 0..3 {
            let f = (p[i] - self.bbox.min[i]) / self.resolution;
            let mut fl = f.floor();
            let mut frac = f - fl;
            if frac > F::one() - tol {
                fl += F::one();
                frac = F::zero();
            }
            if frac < tol && fl >= F::one() {
                fl -= F::one();
            }
            let v = fl.to_f64_lossy().max(0.0) as usize;
            c[i] = v.min(self.dims[i] - 1);
        }
        Some(CellIdx {
            x: c[0],
            y: c[1],
            z: c[2],
        })
    }

    /// Cell a traversal starts in. An origin on (or within tolerance of) a
    /// cell boundary starts in the cell ahead of travel along that axis.
    fn traversal_start_cell(&self, origin: &Vector3<F>, dir: &Vector3<F>) -> Option<[isize; 3]> {
        if !self.bbox.contains(origin) {
            return None;
        }
        let tol = cast::<F>(1e-9);
        let mut c = [0isize; 3];
        for i in 0..3 {
            let f = (origin[i] - self.bbox.min[i]) / self.resolution;
            let mut fl = f.floor();
            let mut frac = f - fl;
            if frac > F::one() - tol {
                fl += F::one();
                frac = F::zero();
            }
            if frac < tol && dir[i] < F::zero() {
                fl -= F::one();
            }
            let v = fl.to_f64_lossy() as isize;
            c[i] = v.clamp(0, self.dims[i] as isize - 1);
        }
        Some(c)
    }

    /// World coordinates of a cell center.
    pub fn index_to_center(&self, idx: CellIdx) -> Vector3<F> {
        let half = cast::<F>(0.5);
        Vector3::new(
            self.bbox.min.x + (cast::<F>(idx.x as f64) + half) * self.resolution,
            self.bbox.min.y + (cast::<F>(idx.y as f64) + half) * self.resolution,
            self.bbox.min.z + (cast::<F>(idx.z as f64) + half) * self.resolution,
        )
    }

    /// Grid traversal along a ray: the ordered list of cells touched by the
    /// segment, each exactly once, stopping inclusively at the first Occupied
    /// cell, at `max_range`, or at the grid boundary.
    pub fn cast_ray(&self, ray: &Ray<F>) -> Result<Vec<(CellIdx, CellState)>> {
        let mut out = Vec::new();
        self.cast_ray_into(ray, &mut out)?;
        Ok(out)
    }

    /// Allocation-reusing variant of [`cast_ray`](Self::cast_ray).
    pub fn cast_ray_into(
        &self,
        ray: &Ray<F>,
        out: &mut Vec<(CellIdx, CellState)>,
    ) -> Result<()> {
        out.clear();
        let mut idx = self
            .traversal_start_cell(&ray.origin, &ray.direction)
            .ok_or_else(|| {
                Error::OutOfBounds(
                    ray.origin.x.to_f64_lossy(),
                    ray.origin.y.to_f64_lossy(),
                    ray.origin.z.to_f64_lossy(),
                )
            })?;
        let mut step = [0isize; 3];
        let mut t_max = [F::max_value().unwrap(); 3];
        let mut t_delta = [F::max_value().unwrap(); 3];
        for i in 0..3 {
            let d = ray.direction[i];
            if d > F::zero() {
                step[i] = 1;
                let boundary =
                    self.bbox.min[i] + cast::<F>((idx[i] + 1) as f64) * self.resolution;
                t_max[i] = (boundary - ray.origin[i]) / d;
                t_delta[i] = self.resolution / d;
            } else if d < F::zero() {
                step[i] = -1;
                let boundary = self.bbox.min[i] + cast::<F>(idx[i] as f64) * self.resolution;
                t_max[i] = (boundary - ray.origin[i]) / d;
                t_delta[i] = -self.resolution / d;
            }
        }

        loop {
            let cell = CellIdx {
                x: idx[0] as usize,
                y: idx[1] as usize,
                z: idx[2] as usize,
            };
            let state = self.state(cell);
            out.push((cell, state));
            if state == CellState::Occupied {
                break;
            }
            // Advance across the nearest cell boundary.
            let mut axis = 0;
            for i in 1..3 {
                if t_max[i] < t_max[axis] {
                    axis = i;
                }
            }
            if t_max[axis] >= ray.max_range {
                break;
            }
            idx[axis] += step[axis];
            if idx[axis] < 0 || idx[axis] >= self.dims[axis] as isize {
                break;
            }
            t_max[axis] += t_delta[axis];
        }
        Ok(())
    }

    /// Integrate one depth scan.
    ///
    /// `hits` are ray endpoints on sensed surfaces; cells strictly before an
    /// endpoint become Free and the endpoint cell becomes Occupied. `misses`
    /// are (unit direction, range) pairs whose traversed cells become Free.
    /// Within one scan Occupied wins over Free, and no ray marks cells beyond
    /// the first already-Occupied cell it meets. Cells outside the bounding
    /// box are ignored. Returns the number of newly mapped cells.
    pub fn insert_scan(
        &mut self,
        sensor_position: &Vector3<F>,
        hits: &[Vector3<F>],
        misses: &[(Vector3<F>, F)],
    ) -> Result<usize> {
        if !self.bbox.contains(sensor_position) {
            return Err(Error::OutOfBounds(
                sensor_position.x.to_f64_lossy(),
                sensor_position.y.to_f64_lossy(),
                sensor_position.z.to_f64_lossy(),
            ));
        }

        let mut free_cells: Vec<usize> = Vec::new();
        let mut occupied_cells: Vec<usize> = Vec::new();
        let mut traversal = Vec::new();

        for hit in hits {
            let delta = hit - sensor_position;
            let dist = delta.norm();
            if dist <= F::zero() {
                continue;
            }
            let dir = delta / dist;
            let endpoint_cell = self.hit_cell_index(hit);
            // Slightly past the endpoint so the endpoint cell itself is
            // always traversed even when the hit sits on its near boundary.
            let ray = Ray {
                origin: *sensor_position,
                direction: dir,
                max_range: dist + self.resolution * cast::<F>(1e-6),
            };
            self.cast_ray_into(&ray, &mut traversal)?;
            for (cell, _) in traversal.iter() {
                let l = self.linear(*cell);
                if Some(*cell) == endpoint_cell {
                    occupied_cells.push(l);
                    break;
                }
                free_cells.push(l);
            }
        }

        for (dir, range) in misses {
            let ray = Ray {
                origin: *sensor_position,
                direction: *dir,
                max_range: *range,
            };
            self.cast_ray_into(&ray, &mut traversal)?;
            for (cell, state) in traversal.iter() {
                if *state == CellState::Occupied {
                    break;
                }
                free_cells.push(self.linear(*cell));
            }
        }

        let mut newly_mapped = 0usize;
        for l in free_cells {
            match self.cells[l] {
                CellState::Unknown => {
                    self.cells[l] = CellState::Free;
                    newly_mapped += 1;
                }
                CellState::Free | CellState::Occupied => {}
            }
        }
        for l in occupied_cells {
            if self.cells[l] == CellState::Unknown {
                newly_mapped += 1;
            }
            self.cells[l] = CellState::Occupied;
        }
        Ok(newly_mapped)
    }

    pub fn non_unknown_count(&self) -> usize {
        self.cells
            .iter()
            .filter(|s| **s != CellState::Unknown)
            .count()
    }

    /// Versioned binary dump: header (magic, version, bbox, resolution,
    /// dims) followed by one byte per cell in x-fastest order.
    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(GRID_MAGIC)?;
        w.write_all(&GRID_VERSION.to_le_bytes())?;
        for v in [&self.bbox.min, &self.bbox.max] {
            for i in 0..3 {
                w.write_all(&v[i].to_f64_lossy().to_le_bytes())?;
            }
        }
        w.write_all(&self.resolution.to_f64_lossy().to_le_bytes())?;
        for d in self.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        let bytes: Vec<u8> = self.cells.iter().map(|s| *s as u8).collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn load<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != GRID_MAGIC {
            return Err(Error::ConfigMismatch("bad grid dump magic".into()));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != GRID_VERSION {
            return Err(Error::ConfigMismatch(format!(
                "unsupported grid dump version {version}"
            )));
        }
        let mut f64buf = [0u8; 8];
        let mut read_f = |r: &mut R| -> Result<F> {
            r.read_exact(&mut f64buf)?;
            Ok(cast(f64::from_le_bytes(f64buf)))
        };
        let min = Vector3::new(read_f(r)?, read_f(r)?, read_f(r)?);
        let max = Vector3::new(read_f(r)?, read_f(r)?, read_f(r)?);
        let resolution = read_f(r)?;
        let mut dims = [0usize; 3];
        let mut u64buf = [0u8; 8];
        for d in dims.iter_mut() {
            r.read_exact(&mut u64buf)?;
            *d = u64::from_le_bytes(u64buf) as usize;
        }
        let n = dims[0] * dims[1] * dims[2];
        let mut bytes = vec![0u8; n];
        r.read_exact(&mut bytes)?;
        let cells = bytes
            .into_iter()
            .map(|b| {
                CellState::from_byte(b)
                    .ok_or_else(|| Error::ConfigMismatch("bad cell byte in grid dump".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            bbox: Aabb::new(min, max),
            resolution,
            dims,
            cells,
        })
    }
}

const GRID_MAGIC: &[u8; 4] = b"VXGD";
const GRID_VERSION: u32 = 1;

/// Ground-truth occupancy of a scenario, discretized at map resolution,
/// with the mappable-cell mask used for coverage.
#[derive(Debug, Clone)]
pub struct GroundTruth<F: Scalar> {
    pub bbox: Aabb<F>,
    pub resolution: F,
    pub dims: [usize; 3],
    pub occupied: Vec<bool>,
    pub mappable: Vec<bool>,
    mappable_count: usize,
}

impl<F: Scalar> GroundTruth<F> {
    /// Build from a dense occupancy mask. A cell is mappable unless it is
    /// interior to solid geometry: occupied with all six face neighbors
    /// occupied (neighbors beyond the box count as occupied, since nothing
    /// can observe a solid face flush with the boundary from outside).
    pub fn from_occupancy(bbox: Aabb<F>, resolution: F, occupied: Vec<bool>) -> Result<Self> {
        let dims = grid_dims(&bbox, resolution)?;
        let n = dims[0] * dims[1] * dims[2];
        if occupied.len() != n {
            return Err(Error::ConfigMismatch(
                "occupancy mask length does not match grid dims".into(),
            ));
        }
        let lin = |x: usize, y: usize, z: usize| x + dims[0] * (y + dims[1] * z);
        let occ_at = |x: isize, y: isize, z: isize| -> bool {
            if x < 0
                || y < 0
                || z < 0
                || x >= dims[0] as isize
                || y >= dims[1] as isize
                || z >= dims[2] as isize
            {
                return true;
            }
            occupied[lin(x as usize, y as usize, z as usize)]
        };
        let mut mappable = vec![true; n];
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    if !occupied[lin(x, y, z)] {
                        continue;
                    }
                    let (xi, yi, zi) = (x as isize, y as isize, z as isize);
                    let interior = occ_at(xi - 1, yi, zi)
                        && occ_at(xi + 1, yi, zi)
                        && occ_at(xi, yi - 1, zi)
                        && occ_at(xi, yi + 1, zi)
                        && occ_at(xi, yi, zi - 1)
                        && occ_at(xi, yi, zi + 1);
                    if interior {
                        mappable[lin(x, y, z)] = false;
                    }
                }
            }
        }
        let mappable_count = mappable.iter().filter(|m| **m).count();
        Ok(Self {
            bbox,
            resolution,
            dims,
            occupied,
            mappable,
            mappable_count,
        })
    }

    pub fn mappable_count(&self) -> usize {
        self.mappable_count
    }
}

/// Percentage of mappable ground-truth cells that the agent's map has
/// resolved to a non-Unknown state.
pub fn coverage<F: Scalar>(grid: &VoxelGrid<F>, truth: &GroundTruth<F>) -> Result<F> {
    let tol = cast::<F>(1e-9);
    let same_box = (0..3).all(|i| {
        (grid.bbox.min[i] - truth.bbox.min[i]).abs() <= tol
            && (grid.bbox.max[i] - truth.bbox.max[i]).abs() <= tol
    });
    if !same_box || (grid.resolution - truth.resolution).abs() > tol || grid.dims != truth.dims {
        return Err(Error::ConfigMismatch(
            "map and ground truth disagree on bbox/resolution".into(),
        ));
    }
    if truth.mappable_count == 0 {
        return Ok(F::zero());
    }
    let mapped = grid
        .cells
        .iter()
        .zip(truth.mappable.iter())
        .filter(|(s, m)| **m && **s != CellState::Unknown)
        .count();
    Ok(cast::<F>(100.0) * cast::<F>(mapped as f64) / cast::<F>(truth.mappable_count as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid10(res: f64) -> VoxelGrid<f64> {
        VoxelGrid::new(
            Aabb::new(Vector3::new(0.0, 0.0, 0.0), Vector3::new(10.0, 10.0, 10.0)),
            res,
        )
        .unwrap()
    }

    #[test]
    fn fresh_grid_all_unknown() {
        let g = grid10(0.2);
        assert_eq!(g.dims(), [50, 50, 50]);
        assert!(g.states().iter().all(|s| *s == CellState::Unknown));
    }

    #[test]
    fn index_center_roundtrip() {
        let g = grid10(0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let p = Vector3::new(
                rng.gen_range(0.0..10.0),
                rng.gen_range(0.0..10.0),
                rng.gen_range(0.0..10.0),
            );
            let idx = g.world_to_index(&p).unwrap();
            let c = g.index_to_center(idx);
            for i in 0..3 {
                assert!((c[i] - p[i]).abs() <= 0.1 + 1e-12);
            }
            assert_eq!(g.world_to_index(&c).unwrap(), idx);
        }
    }

    #[test]
    fn axis_ray_cell_count() {
        // 5 m of range at 0.2 m resolution from a cell boundary: 25 cells.
        let g = grid10(0.2);
        let ray = Ray::new(
            Vector3::new(2.0, 1.1, 1.1),
            Vector3::new(1.0, 0.0, 0.0),
            5.0,
        )
        .unwrap();
        let cells = g.cast_ray(&ray).unwrap();
        assert_eq!(cells.len(), 25);
        assert!(cells.iter().all(|(_, s)| *s == CellState::Unknown));
    }

    #[test]
    fn ray_stops_at_occupied_inclusive() {
        let mut g = grid10(0.2);
        let origin = Vector3::new(1.1, 1.1, 1.1);
        let start = g.world_to_index(&origin).unwrap();
        g.set_state(
            CellIdx {
                x: start.x + 2,
                ..start
            },
            CellState::Occupied,
        );
        let ray = Ray::new(origin, Vector3::new(1.0, 0.0, 0.0), 5.0).unwrap();
        let cells = g.cast_ray(&ray).unwrap();
        assert_eq!(cells.len(), 3);
        assert_eq!(cells.last().unwrap().1, CellState::Occupied);
    }

    #[test]
    fn origin_outside_bbox_errors() {
        let g = grid10(0.2);
        let ray = Ray::new(
            Vector3::new(-1.0, 5.0, 5.0),
            Vector3::new(1.0, 0.0, 0.0),
            5.0,
        )
        .unwrap();
        assert!(matches!(g.cast_ray(&ray), Err(Error::OutOfBounds(..))));
    }

    /// Dense point-sampling oracle: walk the segment in 1 mm steps and
    /// record cells in first-visit order, honoring the occupancy stop.
    fn sampled_cells(g: &VoxelGrid<f64>, ray: &Ray<f64>) -> Vec<CellIdx> {
        let mut seen = Vec::new();
        let mut t = 0.0;
        while t <= ray.max_range {
            let p = ray.origin + ray.direction * t;
            match g.world_to_index(&p) {
                None => break,
                Some(idx) => {
                    if seen.last() != Some(&idx) && !seen.contains(&idx) {
                        seen.push(idx);
                        if g.state(idx) == CellState::Occupied {
                            break;
                        }
                    }
                }
            }
            t += 1e-3;
        }
        seen
    }

    #[test]
    fn traversal_matches_dense_sampler() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut g = grid10(0.5);
        for _ in 0..800 {
            let idx = CellIdx {
                x: rng.gen_range(0..20),
                y: rng.gen_range(0..20),
                z: rng.gen_range(0..20),
            };
            g.set_state(idx, CellState::Occupied);
        }
        for _ in 0..1000 {
            let origin = Vector3::new(
                rng.gen_range(0.5..9.5),
                rng.gen_range(0.5..9.5),
                rng.gen_range(0.5..9.5),
            );
            let dir = loop {
                let v = Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                let n = v.norm();
                if n > 1e-3 {
                    break v / n;
                }
            };
            let ray = Ray::new(origin, dir, 4.0).unwrap();
            let traversed = g.cast_ray(&ray).unwrap();
            let sampled = sampled_cells(&g, &ray);
            // The sampler can only miss corner-clipped cells whose chord is
            // shorter than its step. Walk both sequences in lockstep; a
            // traversed cell absent from the sample stream must be such a
            // sliver. If the sampler skips a sliver *blocking* cell it keeps
            // sampling past the point where the traversal stopped, so any
            // sampler leftover is only legal in that case.
            let chord = |c: &CellIdx| {
                let cell_box = Aabb::new(
                    g.index_to_center(*c) - Vector3::repeat(0.25),
                    g.index_to_center(*c) + Vector3::repeat(0.25),
                );
                let (t0, t1) = cell_box
                    .ray_intersection(&ray.origin, &ray.direction)
                    .expect("traversed cell must intersect ray");
                t1 - t0
            };
            let mut j = 0usize;
            for (c, _) in &traversed {
                if j < sampled.len() && sampled[j] == *c {
                    j += 1;
                } else {
                    assert!(
                        chord(c) < 1.5e-3,
                        "non-sliver cell missed by sampler: {c:?}"
                    );
                }
            }
            if j < sampled.len() {
                let (last, state) = traversed.last().unwrap();
                assert!(
                    *state == CellState::Occupied && chord(last) < 1.5e-3,
                    "sampler visited cells the traversal did not: {:?}",
                    &sampled[j..]
                );
            }
        }
    }

    #[test]
    fn traversal_steps_are_face_adjacent_and_unique() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = grid10(0.25);
        for _ in 0..500 {
            let origin = Vector3::new(
                rng.gen_range(1.0..9.0),
                rng.gen_range(1.0..9.0),
                rng.gen_range(1.0..9.0),
            );
            let v = Vector3::new(
                rng.gen_range(-1.0..1.0f64),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if v.norm() < 1e-3 {
                continue;
            }
            let ray = Ray::new(origin, v / v.norm(), 6.0).unwrap();
            let cells = g.cast_ray(&ray).unwrap();
            for w in cells.windows(2) {
                let (a, b) = (w[0].0, w[1].0);
                let d = (a.x as isize - b.x as isize).abs()
                    + (a.y as isize - b.y as isize).abs()
                    + (a.z as isize - b.z as isize).abs();
                assert_eq!(d, 1);
            }
            let mut uniq: Vec<CellIdx> = cells.iter().map(|(c, _)| *c).collect();
            uniq.sort();
            uniq.dedup();
            assert_eq!(uniq.len(), cells.len());
        }
    }

    #[test]
    fn single_hit_insertion() {
        // One hit 1.0 m along +x at 0.2 m resolution: 4 Free cells and
        // 1 Occupied cell.
        let mut g = grid10(0.2);
        let sensor = Vector3::new(2.1, 1.1, 1.1);
        let hit = Vector3::new(3.0, 1.1, 1.1);
        let n = g.insert_scan(&sensor, &[hit], &[]).unwrap();
        assert_eq!(n, 5);
        let free = g.states().iter().filter(|s| **s == CellState::Free).count();
        let occ = g
            .states()
            .iter()
            .filter(|s| **s == CellState::Occupied)
            .count();
        assert_eq!(free, 4);
        assert_eq!(occ, 1);
        assert_eq!(
            g.state(g.hit_cell_index(&hit).unwrap()),
            CellState::Occupied
        );
    }

    #[test]
    fn repeated_scan_is_idempotent() {
        let mut g = grid10(0.2);
        let sensor = Vector3::new(2.1, 1.1, 1.1);
        let hits = [Vector3::new(3.0, 1.1, 1.1), Vector3::new(2.1, 2.6, 1.1)];
        let misses = [(Vector3::new(0.0, 0.0, 1.0), 2.0)];
        let first = g.insert_scan(&sensor, &hits, &misses).unwrap();
        assert!(first > 0);
        let second = g.insert_scan(&sensor, &hits, &misses).unwrap();
        assert_eq!(second, 0);
    }

    #[test]
    fn newly_mapped_matches_state_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut g = grid10(0.25);
        for _ in 0..20 {
            let sensor = Vector3::new(
                rng.gen_range(1.0..9.0),
                rng.gen_range(1.0..9.0),
                rng.gen_range(1.0..9.0),
            );
            let mut hits = Vec::new();
            let mut misses = Vec::new();
            for _ in 0..30 {
                let v = Vector3::new(
                    rng.gen_range(-1.0..1.0f64),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                if v.norm() < 1e-3 {
                    continue;
                }
                let dir = v / v.norm();
                if rng.gen_bool(0.5) {
                    hits.push(sensor + dir * rng.gen_range(0.3..3.0));
                } else {
                    misses.push((dir, 4.0));
                }
            }
            let before = g.non_unknown_count();
            let n = g.insert_scan(&sensor, &hits, &misses).unwrap();
            assert_eq!(n, g.non_unknown_count() - before);
        }
    }

    #[test]
    fn occupied_wins_within_scan() {
        let mut g = grid10(0.2);
        let sensor = Vector3::new(2.1, 2.1, 2.1);
        let hit = Vector3::new(3.5, 2.1, 2.1);
        // A miss ray through the same cells as the hit.
        let misses = [(Vector3::new(1.0, 0.0, 0.0), 5.0)];
        g.insert_scan(&sensor, &[hit], &misses).unwrap();
        assert_eq!(
            g.state(g.hit_cell_index(&hit).unwrap()),
            CellState::Occupied
        );
    }

    #[test]
    fn coverage_trivial_bounds() {
        let bbox = Aabb::new(Vector3::new(0.0, 0.0, 0.0), Vector3::new(2.0, 2.0, 2.0));
        let g = VoxelGrid::new(bbox, 0.5).unwrap();
        let truth =
            GroundTruth::from_occupancy(bbox, 0.5, vec![false; g.cell_count()]).unwrap();
        assert_relative_eq!(coverage(&g, &truth).unwrap(), 0.0);

        let mut full = g.clone();
        for l in 0..full.cells.len() {
            full.cells[l] = CellState::Free;
        }
        assert_relative_eq!(coverage(&full, &truth).unwrap(), 100.0);
    }

    #[test]
    fn coverage_counts_by_hand() {
        // 4x4x4 cell world with a 2x2x2 solid block away from the walls.
        // The block has no interior at this size (every cell has an exposed
        // face), so all 64 cells are mappable.
        let bbox = Aabb::new(Vector3::new(0.0, 0.0, 0.0), Vector3::new(2.0, 2.0, 2.0));
        let mut occ = vec![false; 64];
        for z in 1..3 {
            for y in 1..3 {
                for x in 1..3 {
                    occ[x + 4 * (y + 4 * z)] = true;
                }
            }
        }
        let truth = GroundTruth::from_occupancy(bbox, 0.5, occ).unwrap();
        assert_eq!(truth.mappable_count(), 64);

        let mut g = VoxelGrid::new(bbox, 0.5).unwrap();
        // Mark exactly 16 cells (one z-slice).
        for y in 0..4 {
            for x in 0..4 {
                g.set_state(CellIdx { x, y, z: 3 }, CellState::Free);
            }
        }
        assert_relative_eq!(coverage(&g, &truth).unwrap(), 25.0);
    }

    #[test]
    fn coverage_config_mismatch() {
        let g = grid10(0.2);
        let truth = GroundTruth::from_occupancy(
            Aabb::new(Vector3::new(0.0, 0.0, 0.0), Vector3::new(2.0, 2.0, 2.0)),
            0.5,
            vec![false; 64],
        )
        .unwrap();
        assert!(matches!(
            coverage(&g, &truth),
            Err(Error::ConfigMismatch(_))
        ));
    }

    #[test]
    fn interior_cells_are_unmappable() {
        // 5x5x5 solid centered in a 10-cell box: the single center cell is
        // interior once the solid is at least 3 cells thick.
        let bbox = Aabb::new(Vector3::new(0.0, 0.0, 0.0), Vector3::new(5.0, 5.0, 5.0));
        let dims = 10usize;
        let mut occ = vec![false; dims * dims * dims];
        for z in 3..6 {
            for y in 3..6 {
                for x in 3..6 {
                    occ[x + dims * (y + dims * z)] = true;
                }
            }
        }
        let truth = GroundTruth::from_occupancy(bbox, 0.5, occ).unwrap();
        assert_eq!(truth.mappable_count(), dims * dims * dims - 1);
        assert!(!truth.mappable[4 + dims * (4 + dims * 4)]);
    }

    #[test]
    fn binary_dump_roundtrip() {
        let mut g = grid10(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let idx = CellIdx {
                x: rng.gen_range(0..20),
                y: rng.gen_range(0..20),
                z: rng.gen_range(0..20),
            };
            let s = match rng.gen_range(0..3) {
                0 => CellState::Unknown,
                1 => CellState::Free,
                _ => CellState::Occupied,
            };
            g.set_state(idx, s);
        }
        let mut buf = Vec::new();
        g.save(&mut buf).unwrap();
        let loaded = VoxelGrid::<f64>::load(&mut buf.as_slice()).unwrap();
        assert_eq!(g, loaded);
    }
}
