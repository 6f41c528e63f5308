//! Dynamic-obstacle tracking: a constant-velocity Kalman filter per
//! obstacle and the frequency map of historical obstacle positions.

use std::io::Write;

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::scalar::{cast, Scalar};

pub type StateVector<F> = SVector<F, 6>;
pub type StateCov<F> = SMatrix<F, 6, 6>;

/// Filter tuning: white-noise-acceleration process intensity and isotropic
/// position measurement noise.
#[derive(Debug, Clone, Copy)]
pub struct KalmanConfig<F: Scalar> {
    /// Process noise intensity q [m^2/s^3].
    pub process_noise: F,
    /// Measurement standard deviation [m].
    pub measurement_sigma: F,
}

impl<F: Scalar> Default for KalmanConfig<F> {
    fn default() -> Self {
        Self {
            process_noise: cast(0.1),
            measurement_sigma: cast(0.05),
        }
    }
}

/// Per-obstacle track: position/velocity mean with covariance.
#[derive(Debug, Clone)]
pub struct ObstacleTrack<F: Scalar> {
    pub id: u64,
    pub mean: StateVector<F>,
    pub covariance: StateCov<F>,
    pub last_update: F,
    /// Physical footprint radius used for collision and occlusion checks.
    pub radius: F,
}

impl<F: Scalar> ObstacleTrack<F> {
    /// Start a track from a first position fix. Velocity is unknown, so its
    /// variance starts large relative to the position variance.
    pub fn new(id: u64, position: Vector3<F>, t: F, radius: F) -> Self {
        let mut mean = StateVector::zeros();
        for i in 0..3 {
            mean[i] = position[i];
        }
        let mut covariance = StateCov::zeros();
        for i in 0..3 {
            covariance[(i, i)] = cast(0.01);
            covariance[(i + 3, i + 3)] = cast(1.0);
        }
        Self {
            id,
            mean,
            covariance,
            last_update: t,
            radius,
        }
    }

    pub fn position(&self) -> Vector3<F> {
        Vector3::new(self.mean[0], self.mean[1], self.mean[2])
    }

    pub fn velocity(&self) -> Vector3<F> {
        Vector3::new(self.mean[3], self.mean[4], self.mean[5])
    }
}

/// Position distribution at a future instant.
#[derive(Debug, Clone)]
pub struct PredictedState<F: Scalar> {
    pub time: F,
    pub mean_position: Vector3<F>,
    pub position_covariance: Matrix3<F>,
}

/// Confidence multiplier applied to the predicted position spread.
pub const COVARIANCE_GATE: f64 = 2.0;

/// Upper bound on the uncertainty inflation added to an obstacle's radius
/// [m]. Freshly initialized or long-unobserved tracks have position spreads
/// of several meters at planning horizons; without a cap a single such track
/// blocks the entire workspace and starves the planner.
pub const MAX_UNCERTAINTY_INFLATION: f64 = 1.0;

/// Capped confidence margin: `min(gate * sigma, cap)`.
pub fn uncertainty_inflation<F: Scalar>(sigma_max: F) -> F {
    (cast::<F>(COVARIANCE_GATE) * sigma_max).min(cast(MAX_UNCERTAINTY_INFLATION))
}

impl<F: Scalar> PredictedState<F> {
    /// Square root of the largest position-covariance eigenvalue.
    pub fn sigma_max(&self) -> F {
        let eigs = self.position_covariance.symmetric_eigenvalues();
        let mut m = F::zero();
        for i in 0..3 {
            m = m.max(eigs[i]);
        }
        m.max(F::zero()).sqrt()
    }
}

fn transition<F: Scalar>(dt: F) -> StateCov<F> {
    let mut f = StateCov::identity();
    for i in 0..3 {
        f[(i, i + 3)] = dt;
    }
    f
}

fn process_noise<F: Scalar>(dt: F, q: F) -> StateCov<F> {
    let third = cast::<F>(1.0 / 3.0);
    let half = cast::<F>(0.5);
    let dt2 = dt * dt;
    let dt3 = dt2 * dt;
    let mut qm = StateCov::zeros();
    for i in 0..3 {
        qm[(i, i)] = q * dt3 * third;
        qm[(i, i + 3)] = q * dt2 * half;
        qm[(i + 3, i)] = q * dt2 * half;
        qm[(i + 3, i + 3)] = q * dt;
    }
    qm
}

fn symmetrize<F: Scalar>(m: &mut StateCov<F>) {
    let t = m.transpose();
    *m = (*m + t) * cast::<F>(0.5);
}

/// Kalman predict to time `t` followed by a position-measurement update.
pub fn track_update<F: Scalar>(
    track: &ObstacleTrack<F>,
    measured_position: &Vector3<F>,
    t: F,
    cfg: &KalmanConfig<F>,
) -> Result<ObstacleTrack<F>> {
    if t < track.last_update {
        return Err(Error::TimeRegression {
            t: t.to_f64_lossy(),
            last: track.last_update.to_f64_lossy(),
        });
    }
    if (0..3).any(|i| !measured_position[i].is_finite()) {
        return Err(Error::InvalidMeasurement);
    }

    let dt = t - track.last_update;
    let f = transition(dt);
    let mut mean = f * track.mean;
    let mut cov = f * track.covariance * f.transpose() + process_noise(dt, cfg.process_noise);

    // Measurement update: H picks the position block.
    let innovation = Vector3::new(
        measured_position[0] - mean[0],
        measured_position[1] - mean[1],
        measured_position[2] - mean[2],
    );
    let p_pp = cov.fixed_view::<3, 3>(0, 0).into_owned();
    let r = cfg.measurement_sigma * cfg.measurement_sigma;
    let s = p_pp + Matrix3::identity() * r;
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("singular innovation covariance".into()))?;
    let p_xp = cov.fixed_view::<6, 3>(0, 0).into_owned();
    let gain = p_xp * s_inv;
    mean += gain * innovation;

    // Joseph-form covariance update.
    let mut i_kh: StateCov<F> = StateCov::identity();
    for row in 0..6 {
        for col in 0..3 {
            i_kh[(row, col)] -= gain[(row, col)];
        }
    }
    cov = i_kh * cov * i_kh.transpose() + gain * (Matrix3::identity() * r) * gain.transpose();
    symmetrize(&mut cov);

    Ok(ObstacleTrack {
        id: track.id,
        mean,
        covariance: cov,
        last_update: t,
        radius: track.radius,
    })
}

/// Extrapolate a track: states at `last_update + k*step` out to `horizon`
/// seconds ahead (the horizon instant itself is always included).
pub fn predict_track<F: Scalar>(
    track: &ObstacleTrack<F>,
    horizon: F,
    step: F,
    cfg: &KalmanConfig<F>,
) -> Vec<PredictedState<F>> {
    assert!(horizon > F::zero() && step > F::zero());
    let tol = cast::<F>(1e-9);
    let mut out = Vec::new();
    let mut k = 1u32;
    loop {
        let dt = step * cast::<F>(k as f64);
        if dt > horizon + tol {
            break;
        }
        out.push(predict_at(track, dt, cfg));
        k += 1;
    }
    let last_dt = step * cast::<F>((k - 1) as f64);
    if out.is_empty() || last_dt < horizon - tol {
        out.push(predict_at(track, horizon, cfg));
    }
    out
}

/// Single-instant extrapolation `dt` seconds past the last update.
pub fn predict_at<F: Scalar>(
    track: &ObstacleTrack<F>,
    dt: F,
    cfg: &KalmanConfig<F>,
) -> PredictedState<F> {
    let f = transition(dt);
    let mean = f * track.mean;
    let cov = f * track.covariance * f.transpose() + process_noise(dt, cfg.process_noise);
    PredictedState {
        time: track.last_update + dt,
        mean_position: Vector3::new(mean[0], mean[1], mean[2]),
        position_covariance: cov.fixed_view::<3, 3>(0, 0).into_owned(),
    }
}

/// 2D histogram of where dynamic obstacles have been seen, over the
/// horizontal footprint of the exploration volume.
#[derive(Debug, Clone)]
pub struct FrequencyGrid<F: Scalar> {
    min: [F; 2],
    cell_size: F,
    nx: usize,
    ny: usize,
    counts: Vec<u64>,
    max_count: u64,
}

impl<F: Scalar> FrequencyGrid<F> {
    pub fn new(bbox: &Aabb<F>, cell_size: F) -> Result<Self> {
        if cell_size <= F::zero() {
            return Err(Error::InvalidArgument("cell_size must be positive".into()));
        }
        let nx = ((bbox.max.x - bbox.min.x) / cell_size)
            .ceil()
            .to_f64_lossy() as usize;
        let ny = ((bbox.max.y - bbox.min.y) / cell_size)
            .ceil()
            .to_f64_lossy() as usize;
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument("degenerate footprint".into()));
        }
        Ok(Self {
            min: [bbox.min.x, bbox.min.y],
            cell_size,
            nx,
            ny,
            counts: vec![0; nx * ny],
            max_count: 0,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn max_count(&self) -> u64 {
        self.max_count
    }

    pub fn count_at(&self, cx: usize, cy: usize) -> u64 {
        self.counts[cx + self.nx * cy]
    }

    fn cell_of(&self, p: &Vector3<F>) -> Option<(usize, usize)> {
        let fx = ((p.x - self.min[0]) / self.cell_size).floor();
        let fy = ((p.y - self.min[1]) / self.cell_size).floor();
        if fx < F::zero() || fy < F::zero() {
            return None;
        }
        let cx = fx.to_f64_lossy() as usize;
        let cy = fy.to_f64_lossy() as usize;
        if cx >= self.nx || cy >= self.ny {
            return None;
        }
        Some((cx, cy))
    }

    /// Record one observation tick. Returns how many positions fell outside
    /// the footprint and were ignored.
    pub fn record(&mut self, obstacle_positions: &[Vector3<F>]) -> usize {
        let mut ignored = 0;
        for p in obstacle_positions {
            match self.cell_of(p) {
                Some((cx, cy)) => {
                    let c = &mut self.counts[cx + self.nx * cy];
                    *c += 1;
                    self.max_count = self.max_count.max(*c);
                }
                None => ignored += 1,
            }
        }
        ignored
    }

    /// Normalized visit frequency at a point: count/max_count in [0, 1].
    /// Zero when nothing has been recorded or the point is outside.
    pub fn query(&self, p: &Vector3<F>) -> F {
        if self.max_count == 0 {
            return F::zero();
        }
        match self.cell_of(p) {
            Some((cx, cy)) => {
                cast::<F>(self.counts[cx + self.nx * cy] as f64)
                    / cast::<F>(self.max_count as f64)
            }
            None => F::zero(),
        }
    }

    /// CSV export, one `cell_x,cell_y,count` row per cell, for heat-map
    /// plotting.
    pub fn export_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "cell_x,cell_y,count")?;
        for cy in 0..self.ny {
            for cx in 0..self.nx {
                writeln!(w, "{},{},{}", cx, cy, self.counts[cx + self.nx * cy])?;
            }
        }
        Ok(())
    }
}
