//! What the agent knows: an obstacle map built from scans, the coverage map
//! with its running area, and frontier extraction at the finest scale.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::ControlFlow;

use crate::grid::{traverse_ray, Grid};
use crate::lidar::{LidarConfig, LidarScan};
use crate::worldmodel::{Pose, WorldMap};

/// Knowledge state of one obstacle-map cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Knowledge {
    Unknown,
    Free,
    Obstacle,
}

/// How coverage is produced for the task at hand.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoverageSpec {
    /// Coverage radius `d` in meters.
    pub radius: f64,
    /// Field of view used for sensing coverage, radians.
    pub fov: f64,
    /// Sensing coverage: cells must be in line of sight. Used when `d` is
    /// larger than the agent radius (exploration); otherwise the body sweep
    /// covers a full disc.
    pub line_of_sight: bool,
}

impl CoverageSpec {
    pub fn for_radii(coverage_radius: f64, agent_radius: f64, fov: f64) -> Self {
        Self {
            radius: coverage_radius,
            fov,
            line_of_sight: coverage_radius > agent_radius,
        }
    }
}

/// Result of one coverage update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoverageUpdate {
    /// Grid indices of the cells covered for the first time, in marking order.
    pub new_cells: Vec<usize>,
    /// Newly covered area in square meters.
    pub area: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeliefState {
    obstacles: Grid<Knowledge>,
    coverage: Grid<bool>,
    covered_cells: u64,
    resolution: f64,
    origin: (f64, f64),
    pub steps_since_new_coverage: u32,
}

impl BeliefState {
    /// Empty belief aligned with `world`.
    pub fn new(world: &WorldMap) -> Self {
        Self {
            obstacles: Grid::new(world.width(), world.height(), Knowledge::Unknown),
            coverage: Grid::new(world.width(), world.height(), false),
            covered_cells: 0,
            resolution: world.resolution(),
            origin: world.origin(),
            steps_since_new_coverage: 0,
        }
    }

    pub fn width(&self) -> usize {
        self.obstacles.width()
    }

    pub fn height(&self) -> usize {
        self.obstacles.height()
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn obstacles(&self) -> &Grid<Knowledge> {
        &self.obstacles
    }

    pub fn coverage(&self) -> &Grid<bool> {
        &self.coverage
    }

    pub fn covered_cells(&self) -> u64 {
        self.covered_cells
    }

    /// Running covered area in square meters.
    pub fn covered_area(&self) -> f64 {
        self.covered_cells as f64 * self.resolution * self.resolution
    }

    #[inline]
    fn to_grid(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.origin.0) / self.resolution, (y - self.origin.1) / self.resolution)
    }

    pub fn cell_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (gx, gy) = self.to_grid(x, y);
        let (ix, iy) = (gx.floor() as i64, gy.floor() as i64);
        self.obstacles.in_bounds(ix, iy).then_some((ix as usize, iy as usize))
    }

    pub fn cell_center(&self, x: usize, y: usize) -> (f64, f64) {
        (
            self.origin.0 + (x as f64 + 0.5) * self.resolution,
            self.origin.1 + (y as f64 + 0.5) * self.resolution,
        )
    }

    fn mark_free(&mut self, x: usize, y: usize) {
        let cell = self.obstacles.get_mut(x, y);
        if *cell == Knowledge::Unknown {
            *cell = Knowledge::Free;
        }
    }

    /// Integrates a scan taken from `pose`: cells a ray passes through become
    /// free, the cell containing a hit point becomes an obstacle. Known
    /// obstacles are never cleared.
    pub fn integrate_scan(&mut self, pose: &Pose, scan: &LidarScan, cfg: &LidarConfig) {
        let start = self.to_grid(pose.x, pose.y);
        let res = self.resolution;
        for ((offset, &range), &hit) in cfg.angle_offsets().iter().zip(&scan.ranges).zip(&scan.hits) {
            let angle = pose.heading + offset;
            let range_t = range / res;
            let mut last: Option<(i64, i64)> = None;
            traverse_ray::<()>(start, (angle.cos(), angle.sin()), range_t + 1e-6, |cx, cy, _| {
                if !self.obstacles.in_bounds(cx, cy) {
                    return ControlFlow::Break(());
                }
                if let Some((px, py)) = last {
                    self.mark_free(px as usize, py as usize);
                }
                last = Some((cx, cy));
                ControlFlow::Continue(())
            });
            // `last` contains the end point of the ray
            if let Some((lx, ly)) = last {
                if hit {
                    self.obstacles.set(lx as usize, ly as usize, Knowledge::Obstacle);
                } else {
                    self.mark_free(lx as usize, ly as usize);
                }
            }
        }
    }

    fn try_cover(&mut self, index: usize, world: &WorldMap, update: &mut CoverageUpdate) {
        if self.coverage.data()[index] || world.cells().data()[index] || self.obstacles.data()[index] == Knowledge::Obstacle {
            return;
        }
        self.coverage.data_mut()[index] = true;
        update.new_cells.push(index);
    }

    /// Marks newly covered cells along a swept path and updates the
    /// no-progress counter.
    ///
    /// Body-sweep coverage marks every cell whose center is strictly within
    /// `spec.radius` of any pose in `sweep`. Sensing coverage marks the cells
    /// visible from the final pose within the radius and field of view;
    /// visibility is traced against the physical map. Only physically free,
    /// not known-obstacle cells can be covered.
    pub fn update_coverage(&mut self, sweep: &[Pose], spec: &CoverageSpec, world: &WorldMap) -> CoverageUpdate {
        let mut update = CoverageUpdate::default();
        if spec.line_of_sight {
            if let Some(pose) = sweep.last() {
                self.cover_visible(pose, spec, world, &mut update);
            }
        } else {
            for pose in sweep {
                self.cover_disc(pose, spec.radius, world, &mut update);
            }
        }
        self.covered_cells += update.new_cells.len() as u64;
        update.area = update.new_cells.len() as f64 * self.resolution * self.resolution;
        if update.new_cells.is_empty() {
            self.steps_since_new_coverage = self.steps_since_new_coverage.saturating_add(1);
        } else {
            self.steps_since_new_coverage = 0;
        }
        update
    }

    fn cover_disc(&mut self, pose: &Pose, radius: f64, world: &WorldMap, update: &mut CoverageUpdate) {
        let (gx, gy) = self.to_grid(pose.x, pose.y);
        let r = radius / self.resolution;
        let r2 = r * r;
        let x0 = ((gx - r).floor() as i64).max(0);
        let x1 = ((gx + r).ceil() as i64).min(self.width() as i64 - 1);
        let y0 = ((gy - r).floor() as i64).max(0);
        let y1 = ((gy + r).ceil() as i64).min(self.height() as i64 - 1);
        for y in y0..=y1 {
            let dy = y as f64 + 0.5 - gy;
            for x in x0..=x1 {
                let dx = x as f64 + 0.5 - gx;
                if dx * dx + dy * dy < r2 {
                    let i = y as usize * self.width() + x as usize;
                    self.try_cover(i, world, update);
                }
            }
        }
    }

    fn cover_visible(&mut self, pose: &Pose, spec: &CoverageSpec, world: &WorldMap, update: &mut CoverageUpdate) {
        let start = self.to_grid(pose.x, pose.y);
        let r = spec.radius / self.resolution;
        let full = spec.fov >= 2.0 * PI - 1e-9;
        let fov = spec.fov.min(2.0 * PI);
        // angular spacing keeps adjacent rays within half a cell at the rim
        let n = ((fov * r / 0.5).ceil() as usize).max(8);
        for k in 0..n {
            let offset = if full {
                k as f64 * 2.0 * PI / n as f64
            } else {
                -fov / 2.0 + k as f64 * fov / (n - 1) as f64
            };
            let angle = pose.heading + offset;
            traverse_ray::<()>(start, (angle.cos(), angle.sin()), r, |cx, cy, t| {
                if !world.cells().in_bounds(cx, cy) || t >= r {
                    return ControlFlow::Break(());
                }
                let i = cy as usize * self.width() + cx as usize;
                if world.cells().data()[i] {
                    return ControlFlow::Break(());
                }
                self.try_cover(i, world, update);
                ControlFlow::Continue(())
            });
        }
    }

    /// Frontier mask: cells that are not covered, not known obstacles and
    /// have at least one covered 8-neighbor.
    pub fn frontier_cells(&self) -> Grid<bool> {
        frontier_mask(&self.coverage, &self.obstacles)
    }

    /// Debug dump: the map header, an obstacle layer (`#` obstacle, `.` free,
    /// `?` unknown) and a coverage layer (`c` covered, `.` not).
    pub fn to_debug_text(&self) -> String {
        let (w, h) = (self.width(), self.height());
        let mut out = String::new();
        let _ = writeln!(out, "covpath-map v1 {w} {h} {}", self.resolution);
        for row in 0..h {
            let y = h - 1 - row;
            for x in 0..w {
                out.push(match self.obstacles.get(x, y) {
                    Knowledge::Obstacle => '#',
                    Knowledge::Free => '.',
                    Knowledge::Unknown => '?',
                });
            }
            out.push('\n');
        }
        for row in 0..h {
            let y = h - 1 - row;
            for x in 0..w {
                out.push(if *self.coverage.get(x, y) { 'c' } else { '.' });
            }
            out.push('\n');
        }
        out
    }
}

/// Frontier definition shared by the belief and the planners.
pub fn frontier_mask(coverage: &Grid<bool>, obstacles: &Grid<Knowledge>) -> Grid<bool> {
    let (w, h) = (coverage.width(), coverage.height());
    Grid::from_fn(w, h, |x, y| {
        if *coverage.get(x, y) || *obstacles.get(x, y) == Knowledge::Obstacle {
            return false;
        }
        coverage.neighbors8(x, y).any(|(nx, ny)| *coverage.get(nx, ny))
    })
}
