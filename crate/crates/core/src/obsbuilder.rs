//! Egocentric multi-scale observations.
//!
//! Every scale is a `grid x grid` crop centered on the agent and rotated so
//! the agent faces up (row 0 is the far side ahead). Scale `i` covers a
//! square of side `grid * finest_resolution * factor^i`. Coarse scales are
//! read from world-aligned pyramids: coverage and obstacle layers are
//! mean-pooled, the frontier layer is OR-pooled so that a coarse pixel is
//! set iff its block contains a frontier cell.

use thiserror::Error;

use crate::belief::{BeliefState, Knowledge};
use crate::dynamics::Action;
use crate::grid::Grid;
use crate::lidar::LidarScan;
use crate::worldmodel::Pose;

pub const DUMP_VERSION: u32 = 1;

/// Encoding of obstacle-map knowledge in the observation.
pub const OBSTACLE_FREE: f32 = 0.0;
pub const OBSTACLE_UNKNOWN: f32 = 0.5;
pub const OBSTACLE_OCCUPIED: f32 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum ObservationError {
    #[error("observation dump is truncated or malformed: {0}")]
    Malformed(String),
    #[error("unsupported observation dump version {0}")]
    Version(u32),
    #[error("pyramid factor must be at least 1")]
    ZeroFactor,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MultiScaleConfig {
    /// Number of scales `m`.
    pub scales: usize,
    /// Scale factor `s` between consecutive scales.
    pub factor: usize,
    /// Pixels per side.
    pub grid: usize,
    /// Meters per pixel at the finest scale.
    pub finest_resolution: f64,
}

impl Default for MultiScaleConfig {
    fn default() -> Self {
        Self {
            scales: 4,
            factor: 4,
            grid: 32,
            finest_resolution: 0.0375,
        }
    }
}

impl MultiScaleConfig {
    /// Side length in meters of scale `i` (0-based).
    pub fn side(&self, i: usize) -> f64 {
        self.pixel_size(i) * self.grid as f64
    }

    /// Meters per pixel of scale `i`.
    pub fn pixel_size(&self, i: usize) -> f64 {
        self.finest_resolution * (self.factor as f64).powi(i as i32)
    }

    /// Number of values across the three map stacks.
    pub fn map_values(&self) -> usize {
        3 * self.scales * self.grid * self.grid
    }
}

/// Policy input for one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiScaleObservation {
    pub scales: usize,
    pub grid: usize,
    /// `scales * grid * grid`, scale-major then row-major (row 0 on top).
    pub coverage: Vec<f32>,
    pub obstacles: Vec<f32>,
    pub frontier: Vec<f32>,
    /// Normalized lidar ranges.
    pub sensor: Vec<f32>,
    /// Most recent actions, oldest first; `(a_v, a_w)` per action.
    pub history: Vec<f32>,
}

impl MultiScaleObservation {
    pub fn history_len(&self) -> usize {
        self.history.len() / 2
    }

    /// One scale of one layer as a `grid x grid` slice.
    pub fn layer<'a>(&self, data: &'a [f32], scale: usize) -> &'a [f32] {
        let n = self.grid * self.grid;
        &data[scale * n..(scale + 1) * n]
    }

    pub fn pixel(&self, data: &[f32], scale: usize, row: usize, col: usize) -> f32 {
        data[scale * self.grid * self.grid + row * self.grid + col]
    }

    /// Flat float buffer: coverage, obstacle and frontier stacks, then the
    /// sensor vector and the action history.
    pub fn to_flat(&self) -> Vec<f32> {
        let mut v = Vec::with_capacity(self.coverage.len() * 3 + self.sensor.len() + self.history.len());
        v.extend_from_slice(&self.coverage);
        v.extend_from_slice(&self.obstacles);
        v.extend_from_slice(&self.frontier);
        v.extend_from_slice(&self.sensor);
        v.extend_from_slice(&self.history);
        v
    }

    /// Little-endian dump: 5 x u32 header `(m, grid, n_rays, k, version)`
    /// followed by the flat f32 buffer.
    pub fn to_bytes(&self) -> Vec<u8> {
        let flat = self.to_flat();
        let mut out = Vec::with_capacity(20 + 4 * flat.len());
        for h in [
            self.scales as u32,
            self.grid as u32,
            self.sensor.len() as u32,
            self.history_len() as u32,
            DUMP_VERSION,
        ] {
            out.extend_from_slice(&h.to_le_bytes());
        }
        for v in flat {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ObservationError> {
        if bytes.len() < 20 {
            return Err(ObservationError::Malformed("missing header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes"));
        let (m, g, n, k, version) = (word(0) as usize, word(1) as usize, word(2) as usize, word(3) as usize, word(4));
        if version != DUMP_VERSION {
            return Err(ObservationError::Version(version));
        }
        let map_len = m * g * g;
        let total = 3 * map_len + n + 2 * k;
        if bytes.len() != 20 + 4 * total {
            return Err(ObservationError::Malformed(format!(
                "expected {} payload bytes, found {}",
                4 * total,
                bytes.len() - 20
            )));
        }
        let floats: Vec<f32> = bytes[20..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let mut it = floats.into_iter();
        let mut take = |len: usize| it.by_ref().take(len).collect::<Vec<f32>>();
        Ok(Self {
            scales: m,
            grid: g,
            coverage: take(map_len),
            obstacles: take(map_len),
            frontier: take(map_len),
            sensor: take(n),
            history: take(2 * k),
        })
    }
}

/// Block-wise OR of a binary mask: coarse cell `(X, Y)` is set iff any fine
/// cell in `[X*f, (X+1)*f) x [Y*f, (Y+1)*f)` is set. Partial blocks at the
/// far edges only see the fine cells that exist.
pub fn downscale_frontier(fine: &Grid<bool>, factor: usize) -> Result<Grid<bool>, ObservationError> {
    if factor == 0 {
        return Err(ObservationError::ZeroFactor);
    }
    let (w, h) = (fine.width().div_ceil(factor), fine.height().div_ceil(factor));
    let mut out = Grid::new(w, h, false);
    for y in 0..fine.height() {
        for x in 0..fine.width() {
            if *fine.get(x, y) {
                out.set(x / factor, y / factor, true);
            }
        }
    }
    Ok(out)
}

/// Mean over `factor x factor` blocks, with cells beyond the grid counted as
/// `outside`.
fn downscale_mean(fine: &Grid<f32>, factor: usize, outside: f32) -> Grid<f32> {
    let (w, h) = (fine.width().div_ceil(factor), fine.height().div_ceil(factor));
    let mut sum = Grid::new(w, h, 0.0f64);
    let mut count = Grid::new(w, h, 0u32);
    for y in 0..fine.height() {
        for x in 0..fine.width() {
            *sum.get_mut(x / factor, y / factor) += *fine.get(x, y) as f64;
            *count.get_mut(x / factor, y / factor) += 1;
        }
    }
    let block = (factor * factor) as f64;
    Grid::from_fn(w, h, |x, y| {
        let missing = block - *count.get(x, y) as f64;
        ((sum.get(x, y) + missing * outside as f64) / block) as f32
    })
}

/// World-aligned pyramids of the three layers, one level per scale.
#[derive(Clone, Debug)]
pub struct MapPyramid {
    pub coverage: Vec<Grid<f32>>,
    pub obstacles: Vec<Grid<f32>>,
    pub frontier: Vec<Grid<bool>>,
    /// Meters per cell at each level.
    pub cell_size: Vec<f64>,
    origin: (f64, f64),
}

impl MapPyramid {
    pub fn build(belief: &BeliefState, cfg: &MultiScaleConfig) -> Self {
        let coverage0 = belief.coverage().map(|&c| if c { 1.0 } else { 0.0 });
        let obstacles0 = belief.obstacles().map(|k| match k {
            Knowledge::Free => OBSTACLE_FREE,
            Knowledge::Unknown => OBSTACLE_UNKNOWN,
            Knowledge::Obstacle => OBSTACLE_OCCUPIED,
        });
        let frontier0 = belief.frontier_cells();
        let level0 = belief.resolution() * (cfg.finest_resolution / belief.resolution()).round().max(1.0);
        let base = (cfg.finest_resolution / belief.resolution()).round().max(1.0) as usize;

        let mut coverage = Vec::with_capacity(cfg.scales);
        let mut obstacles = Vec::with_capacity(cfg.scales);
        let mut frontier = Vec::with_capacity(cfg.scales);
        let mut cell_size = Vec::with_capacity(cfg.scales);
        for i in 0..cfg.scales {
            let (c, o, f) = if i == 0 {
                if base == 1 {
                    (coverage0.clone(), obstacles0.clone(), frontier0.clone())
                } else {
                    (
                        downscale_mean(&coverage0, base, 0.0),
                        downscale_mean(&obstacles0, base, OBSTACLE_OCCUPIED),
                        downscale_frontier(&frontier0, base).expect("factor >= 1"),
                    )
                }
            } else {
                let k = cfg.factor.max(1);
                (
                    downscale_mean(&coverage[i - 1], k, 0.0),
                    downscale_mean(&obstacles[i - 1], k, OBSTACLE_OCCUPIED),
                    downscale_frontier(&frontier[i - 1], k).expect("factor >= 1"),
                )
            };
            coverage.push(c);
            obstacles.push(o);
            frontier.push(f);
            cell_size.push(level0 * (cfg.factor as f64).powi(i as i32));
        }
        Self {
            coverage,
            obstacles,
            frontier,
            cell_size,
            origin: belief.origin(),
        }
    }

    /// Layer values at a world point for one level: (coverage, obstacle,
    /// frontier). Points outside the map read as walls.
    pub fn sample(&self, level: usize, x: f64, y: f64) -> (f32, f32, f32) {
        let size = self.cell_size[level];
        let gx = ((x - self.origin.0) / size).floor() as i64;
        let gy = ((y - self.origin.1) / size).floor() as i64;
        let cov = &self.coverage[level];
        if !cov.in_bounds(gx, gy) {
            return (0.0, OBSTACLE_OCCUPIED, 0.0);
        }
        let (ix, iy) = (gx as usize, gy as usize);
        (
            *cov.get(ix, iy),
            *self.obstacles[level].get(ix, iy),
            if *self.frontier[level].get(ix, iy) { 1.0 } else { 0.0 },
        )
    }
}

/// World point sampled by pixel `(row, col)` of a crop with `grid` pixels of
/// `pixel` meters, for an agent at `pose` facing up.
pub fn pixel_world_point(pose: &Pose, grid: usize, pixel: f64, row: usize, col: usize) -> (f64, f64) {
    let half = grid as f64 / 2.0;
    let forward = (half - row as f64 - 0.5) * pixel;
    let right = (col as f64 + 0.5 - half) * pixel;
    let (s, c) = pose.heading.sin_cos();
    (pose.x + forward * c + right * s, pose.y + forward * s - right * c)
}

/// Builds the observation for one step from a belief snapshot, the pose the
/// agent believes it has, its latest scan and its action history.
pub fn build_observation(
    belief: &BeliefState,
    pose: &Pose,
    scan: &LidarScan,
    cfg: &MultiScaleConfig,
    history: &[Action],
) -> MultiScaleObservation {
    let pyramid = MapPyramid::build(belief, cfg);
    build_from_pyramid(&pyramid, pose, scan, cfg, history)
}

pub fn build_from_pyramid(
    pyramid: &MapPyramid,
    pose: &Pose,
    scan: &LidarScan,
    cfg: &MultiScaleConfig,
    history: &[Action],
) -> MultiScaleObservation {
    let g = cfg.grid;
    let n = cfg.scales * g * g;
    let mut coverage = Vec::with_capacity(n);
    let mut obstacles = Vec::with_capacity(n);
    let mut frontier = Vec::with_capacity(n);
    for level in 0..cfg.scales {
        let pixel = cfg.pixel_size(level);
        for row in 0..g {
            for col in 0..g {
                let (x, y) = pixel_world_point(pose, g, pixel, row, col);
                let (c, o, f) = pyramid.sample(level, x, y);
                coverage.push(c);
                obstacles.push(o);
                frontier.push(f);
            }
        }
    }
    MultiScaleObservation {
        scales: cfg.scales,
        grid: g,
        coverage,
        obstacles,
        frontier,
        sensor: scan.normalized().map(|v| v as f32).collect(),
        history: history.iter().flat_map(|a| [a.linear as f32, a.angular as f32]).collect(),
    }
}
