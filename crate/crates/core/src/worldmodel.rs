//! Ground-truth world: occupancy grid, poses, the map text format and the
//! free-space accounting that every coverage percentage is measured against.

use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

use crate::grid::{distance_transform, flood_fill4, label_components4, Grid};

/// Grid resolution shared by world, belief and the finest observation scale.
pub const DEFAULT_RESOLUTION: f64 = 0.0375;

const MAP_MAGIC: &str = "covpath-map";
const MAP_VERSION: &str = "v1";

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("start pose ({x:.3}, {y:.3}) lacks clearance for the agent")]
    StartInObstacle { x: f64, y: f64 },
}

fn parse_err(line: usize, message: impl Into<String>) -> WorldError {
    WorldError::Parse {
        line,
        message: message.into(),
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    let mut w = angle.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Planar pose in world coordinates. `heading` is always within (-pi, pi].
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
        }
    }

    pub fn distance_to(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Binary occupancy grid with metric resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldMap {
    cells: Grid<bool>,
    resolution: f64,
    origin: (f64, f64),
}

impl WorldMap {
    /// Builds a map from an obstacle grid; the border is closed.
    pub fn new(cells: Grid<bool>, resolution: f64) -> Result<Self, WorldError> {
        if cells.width() == 0 || cells.height() == 0 {
            return Err(WorldError::Geometry("map has zero size".into()));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(WorldError::Geometry(format!("resolution {resolution} must be positive")));
        }
        let mut map = Self {
            cells,
            resolution,
            origin: (0.0, 0.0),
        };
        map.close_border();
        Ok(map)
    }

    /// An empty square room of `side_cells` interior cells plus a 1-cell wall.
    pub fn empty_room(interior_w: usize, interior_h: usize, resolution: f64) -> Self {
        let cells = Grid::new(interior_w + 2, interior_h + 2, false);
        Self::new(cells, resolution).expect("non-empty room")
    }

    fn close_border(&mut self) {
        let (w, h) = (self.cells.width(), self.cells.height());
        for x in 0..w {
            self.cells.set(x, 0, true);
            self.cells.set(x, h - 1, true);
        }
        for y in 0..h {
            self.cells.set(0, y, true);
            self.cells.set(w - 1, y, true);
        }
    }

    pub fn width(&self) -> usize {
        self.cells.width()
    }

    pub fn height(&self) -> usize {
        self.cells.height()
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    /// Metric extent (width, height) in meters.
    pub fn extent(&self) -> (f64, f64) {
        (self.width() as f64 * self.resolution, self.height() as f64 * self.resolution)
    }

    pub fn cells(&self) -> &Grid<bool> {
        &self.cells
    }

    #[inline]
    pub fn is_obstacle(&self, x: usize, y: usize) -> bool {
        *self.cells.get(x, y)
    }

    /// Sets a cell; border cells stay obstacles.
    pub fn set_obstacle(&mut self, x: usize, y: usize, obstacle: bool) {
        let border = x == 0 || y == 0 || x + 1 == self.width() || y + 1 == self.height();
        self.cells.set(x, y, obstacle || border);
    }

    pub fn free_cell_count(&self) -> usize {
        self.cells.len() - self.cells.count_true()
    }

    /// Continuous cell coordinates of a world point.
    #[inline]
    pub fn to_grid(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.origin.0) / self.resolution, (y - self.origin.1) / self.resolution)
    }

    /// Cell containing a world point, if inside the map.
    #[inline]
    pub fn cell_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (gx, gy) = self.to_grid(x, y);
        let (ix, iy) = (gx.floor(), gy.floor());
        if ix >= 0.0 && iy >= 0.0 && (ix as usize) < self.width() && (iy as usize) < self.height() {
            Some((ix as usize, iy as usize))
        } else {
            None
        }
    }

    #[inline]
    pub fn cell_center(&self, x: usize, y: usize) -> (f64, f64) {
        (
            self.origin.0 + (x as f64 + 0.5) * self.resolution,
            self.origin.1 + (y as f64 + 0.5) * self.resolution,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.cell_at(x, y).is_some()
    }

    /// Rotates the map by 90 degrees counter-clockwise about its center.
    /// Only meaningful for square maps; used by equivariance checks.
    pub fn rotated_ccw(&self) -> WorldMap {
        let (w, h) = (self.width(), self.height());
        let cells = Grid::from_fn(h, w, |x, y| {
            // new (x, y) came from old (y, h - 1 - x)
            *self.cells.get(y, h - 1 - x)
        });
        WorldMap {
            cells,
            resolution: self.resolution,
            origin: self.origin,
        }
    }
}

/// Parses the `covpath-map v1` text format.
pub fn load_map(document: &str) -> Result<WorldMap, WorldError> {
    let mut lines = document.split('\n');
    let header = lines.next().ok_or_else(|| parse_err(1, "empty document"))?;
    let tokens: Vec<&str> = header.split(' ').collect();
    if tokens.len() != 5 || tokens[0] != MAP_MAGIC || tokens[1] != MAP_VERSION {
        return Err(parse_err(1, format!("expected `{MAP_MAGIC} {MAP_VERSION} <width> <height> <resolution_m>`")));
    }
    let width: usize = tokens[2].parse().map_err(|_| parse_err(1, format!("bad width `{}`", tokens[2])))?;
    let height: usize = tokens[3].parse().map_err(|_| parse_err(1, format!("bad height `{}`", tokens[3])))?;
    let resolution: f64 = tokens[4]
        .parse()
        .map_err(|_| parse_err(1, format!("bad resolution `{}`", tokens[4])))?;
    if width == 0 || height == 0 {
        return Err(WorldError::Geometry(format!("map size {width}x{height} is empty")));
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(WorldError::Geometry(format!("resolution {resolution} must be positive")));
    }

    let mut cells = Grid::new(width, height, false);
    for row in 0..height {
        let line_no = row + 2;
        let line = lines
            .next()
            .ok_or_else(|| parse_err(line_no, format!("expected {height} rows, found {row}")))?;
        let bytes = line.as_bytes();
        if bytes.len() != width {
            return Err(parse_err(line_no, format!("row has {} characters, expected {width}", bytes.len())));
        }
        // first text row is the top of the map
        let y = height - 1 - row;
        for (x, &c) in bytes.iter().enumerate() {
            match c {
                b'#' => cells.set(x, y, true),
                b'.' => {}
                other => {
                    return Err(parse_err(line_no, format!("unknown character `{}`", other as char)));
                }
            }
        }
    }
    for (i, rest) in lines.enumerate() {
        if !rest.is_empty() {
            return Err(parse_err(height + 2 + i, "trailing content after map rows"));
        }
    }
    WorldMap::new(cells, resolution)
}

/// Serializes a map to the `covpath-map v1` text format.
pub fn save_map(map: &WorldMap) -> String {
    let mut out = String::with_capacity((map.width() + 1) * map.height() + 48);
    let _ = writeln!(out, "{MAP_MAGIC} {MAP_VERSION} {} {} {}", map.width(), map.height(), map.resolution());
    for row in 0..map.height() {
        let y = map.height() - 1 - row;
        for x in 0..map.width() {
            out.push(if map.is_obstacle(x, y) { '#' } else { '.' });
        }
        out.push('\n');
    }
    out
}

/// Number of whole cells of clearance needed for a disc of `radius`.
pub fn clearance_cells(radius: f64, resolution: f64) -> f64 {
    (radius / resolution - 1e-9).ceil().max(0.0)
}

/// Distance (cell centers, in cells) from every cell to the nearest obstacle.
pub fn obstacle_distance(map: &WorldMap) -> Grid<f64> {
    distance_transform(map.cells())
}

/// Configuration-space occupancy for a disc agent: a cell is traversable when
/// its center is at least `ceil(radius / resolution)` cells from every
/// obstacle cell center. The agent's center may occupy traversable cells only.
#[derive(Clone, Debug)]
pub struct ConfigSpace {
    traversable: Grid<bool>,
    resolution: f64,
    origin: (f64, f64),
    radius: f64,
}

impl ConfigSpace {
    pub fn new(map: &WorldMap, radius: f64) -> Self {
        let dist = obstacle_distance(map);
        Self::from_distance(map, &dist, radius)
    }

    pub fn from_distance(map: &WorldMap, dist: &Grid<f64>, radius: f64) -> Self {
        let need = clearance_cells(radius, map.resolution());
        Self {
            traversable: dist.map(|&d| d >= need),
            resolution: map.resolution(),
            origin: map.origin(),
            radius,
        }
    }

    /// Builds a configuration space directly from a traversability mask.
    pub fn from_mask(traversable: Grid<bool>, resolution: f64, radius: f64) -> Self {
        Self {
            traversable,
            resolution,
            origin: (0.0, 0.0),
            radius,
        }
    }

    pub fn mask(&self) -> &Grid<bool> {
        &self.traversable
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    #[inline]
    pub fn cell_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let gx = ((x - self.origin.0) / self.resolution).floor();
        let gy = ((y - self.origin.1) / self.resolution).floor();
        if gx >= 0.0 && gy >= 0.0 && (gx as usize) < self.traversable.width() && (gy as usize) < self.traversable.height() {
            Some((gx as usize, gy as usize))
        } else {
            None
        }
    }

    #[inline]
    pub fn is_traversable_cell(&self, x: usize, y: usize) -> bool {
        *self.traversable.get(x, y)
    }

    #[inline]
    pub fn cell_center(&self, x: usize, y: usize) -> (f64, f64) {
        (
            self.origin.0 + (x as f64 + 0.5) * self.resolution,
            self.origin.1 + (y as f64 + 0.5) * self.resolution,
        )
    }
}

/// Point collision query used by the dynamics integrator.
pub trait CollisionCheck {
    /// True when the agent center may sit at `(x, y)`.
    fn is_free(&self, x: f64, y: f64) -> bool;
}

impl CollisionCheck for ConfigSpace {
    #[inline]
    fn is_free(&self, x: f64, y: f64) -> bool {
        self.cell_at(x, y).is_some_and(|(cx, cy)| *self.traversable.get(cx, cy))
    }
}

/// Obstacle-free everywhere; for kinematics tests.
pub struct NoCollisions;

impl CollisionCheck for NoCollisions {
    fn is_free(&self, _x: f64, _y: f64) -> bool {
        true
    }
}

/// Cells the agent can reach (or cover) and their total area.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeSpaceIndex {
    pub reachable_mask: Grid<bool>,
    pub reachable_area: f64,
    pub cell_count: usize,
}

impl FreeSpaceIndex {
    fn from_mask(mask: Grid<bool>, resolution: f64) -> Self {
        let cell_count = mask.count_true();
        Self {
            reachable_mask: mask,
            reachable_area: cell_count as f64 * resolution * resolution,
            cell_count,
        }
    }
}

/// Flood fill over cells with clearance `>= agent_radius` starting from the
/// cell under `start`.
pub fn reachable_free_space(map: &WorldMap, start: &Pose, agent_radius: f64) -> Result<FreeSpaceIndex, WorldError> {
    let cspace = ConfigSpace::new(map, agent_radius);
    reachable_in(&cspace, start)
}

/// Same as [`reachable_free_space`] with a precomputed configuration space.
pub fn reachable_in(cspace: &ConfigSpace, start: &Pose) -> Result<FreeSpaceIndex, WorldError> {
    let seed = cspace
        .cell_at(start.x, start.y)
        .filter(|&(x, y)| cspace.is_traversable_cell(x, y))
        .ok_or(WorldError::StartInObstacle { x: start.x, y: start.y })?;
    let mask = flood_fill4(cspace.mask(), seed);
    Ok(FreeSpaceIndex::from_mask(mask, cspace.resolution()))
}

/// Largest 4-connected component of a configuration space, if any.
pub fn largest_component(cspace: &ConfigSpace) -> Option<Grid<bool>> {
    let (labels, n) = label_components4(cspace.mask());
    if n == 0 {
        return None;
    }
    let mut sizes = vec![0usize; n as usize + 1];
    for &l in labels.data() {
        sizes[l as usize] += 1;
    }
    // lowest label wins ties so the choice is deterministic
    let best = (1..=n as usize).max_by_key(|&l| (sizes[l], std::cmp::Reverse(l)))? as u32;
    Some(labels.map(|&l| l == best))
}

/// Free cells that an agent moving through `reachable` can cover with
/// coverage radius `coverage_radius`: free cells whose center lies strictly
/// within the radius of some reachable cell center. With `sensing` set the
/// cells must also belong to a free-space component touched by the reachable
/// set (covered = seen, so walls block coverage).
pub fn coverable_space(map: &WorldMap, reachable: &FreeSpaceIndex, coverage_radius: f64, sensing: bool) -> FreeSpaceIndex {
    let dist = distance_transform(&reachable.reachable_mask);
    let limit = coverage_radius / map.resolution();
    let free = map.cells().map(|&o| !o);
    let connected = if sensing {
        let (labels, n) = label_components4(&free);
        let mut touched = vec![false; n as usize + 1];
        for (i, &r) in reachable.reachable_mask.data().iter().enumerate() {
            if r {
                touched[labels.data()[i] as usize] = true;
            }
        }
        Some(labels.map(|&l| l != 0 && touched[l as usize]))
    } else {
        None
    };
    let mask = Grid::from_fn(map.width(), map.height(), |x, y| {
        let ok = *free.get(x, y) && *dist.get(x, y) < limit;
        ok && connected.as_ref().is_none_or(|c| *c.get(x, y))
    });
    FreeSpaceIndex::from_mask(mask, map.resolution())
}
