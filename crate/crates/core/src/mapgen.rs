//! Procedural maps: square arenas with optional grid-of-rooms floor plans
//! and scattered circular obstacles, the fixed tiered training maps and the
//! training curriculum.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::Task;
use crate::grid::{distance_transform, label_components4};
use crate::worldmodel::{ConfigSpace, WorldMap, DEFAULT_RESOLUTION};

/// Resampling budget before giving up on a connected map.
const MAX_ATTEMPTS: u32 = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapGenParams {
    /// Interior side length interval in meters.
    pub side_range: (f64, f64),
    pub p_floorplan: f64,
    pub p_obstacles: f64,
    pub room_side: (f64, f64),
    pub wall_thickness: (f64, f64),
    pub door_width: (f64, f64),
    pub p_wall: f64,
    pub obstacle_radius: f64,
    /// Expected obstacles per square meter.
    pub obstacle_density: f64,
    /// Smallest allowed gap between an obstacle and anything else.
    pub min_clearance: f64,
    /// Radius used for the connectivity check.
    pub agent_radius: f64,
    pub resolution: f64,
}

impl MapGenParams {
    pub fn for_task(task: Task) -> Self {
        let side_range = match task {
            Task::Mowing => (2.4, 7.5),
            Task::Exploration | Task::ExplorationNonOmni => (9.6, 15.0),
        };
        Self {
            side_range,
            p_floorplan: 0.7,
            p_obstacles: 0.7,
            room_side: (1.5, 4.8),
            wall_thickness: (0.075, 0.3),
            door_width: (0.6, 1.2),
            p_wall: 0.9,
            obstacle_radius: 0.25,
            obstacle_density: 0.25,
            min_clearance: 0.6,
            agent_radius: task.agent_radius(),
            resolution: DEFAULT_RESOLUTION,
        }
    }
}

/// One wall spanning the whole arena.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    /// Vertical walls run bottom-to-top at `x = position`.
    pub vertical: bool,
    /// Center line in world coordinates.
    pub position: f64,
    pub segments: Vec<WallSegment>,
}

/// The part of a wall between two crossing walls (or the arena border).
/// It separates exactly two rooms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallSegment {
    /// Extent along the wall, world coordinates.
    pub start: f64,
    pub end: f64,
    /// Door opening along the wall; `None` once closed off.
    pub door: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorPlan {
    pub room_side: f64,
    pub wall_thickness: f64,
    pub door_width: f64,
    pub walls: Vec<Wall>,
    /// Orientation whose walls each lost one door (`true` = vertical).
    pub closed_vertical: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

#[derive(Clone, Debug)]
pub struct GeneratedMap {
    pub map: WorldMap,
    /// Interior side length in meters.
    pub side: f64,
    pub floorplan: Option<FloorPlan>,
    pub obstacles: Vec<Obstacle>,
    /// Number of samples drawn until the map passed the connectivity check.
    pub attempts: u32,
}

/// Generates a map; resamples until the configuration space is one
/// connected component.
pub fn generate_map<R: Rng + ?Sized>(rng: &mut R, params: &MapGenParams) -> GeneratedMap {
    let mut last = None;
    for attempt in 1..=MAX_ATTEMPTS {
        let mut g = sample_map(rng, params);
        g.attempts = attempt;
        if is_connected_at_clearance(&g.map, params.agent_radius) {
            return g;
        }
        last = Some(g);
    }
    last.expect("at least one attempt")
}

/// Deterministic map for a seed.
pub fn generate_map_seeded(seed: u64, params: &MapGenParams) -> GeneratedMap {
    generate_map(&mut ChaCha8Rng::seed_from_u64(seed), params)
}

fn sample_map<R: Rng + ?Sized>(rng: &mut R, params: &MapGenParams) -> GeneratedMap {
    let res = params.resolution;
    let (lo, hi) = params.side_range;
    let side_m = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let n = (side_m / res).round().max(1.0) as usize;
    let mut map = WorldMap::empty_room(n, n, res);
    let floorplan = rng
        .random_bool(params.p_floorplan)
        .then(|| generate_floorplan(rng, params, &mut map));
    let obstacles = if rng.random_bool(params.p_obstacles) {
        scatter_obstacles(rng, params, &mut map)
    } else {
        Vec::new()
    };
    GeneratedMap {
        map,
        side: n as f64 * res,
        floorplan,
        obstacles,
        attempts: 1,
    }
}

/// Interior extent `[lo, hi)` along either axis, world coordinates.
fn interior(map: &WorldMap) -> (f64, f64) {
    let res = map.resolution();
    (res, (map.width() - 1) as f64 * res)
}

/// Adds a grid of rooms to `map` and returns its description.
pub fn generate_floorplan<R: Rng + ?Sized>(rng: &mut R, params: &MapGenParams, map: &mut WorldMap) -> FloorPlan {
    let room_side = rng.random_range(params.room_side.0..=params.room_side.1);
    let thickness = rng.random_range(params.wall_thickness.0..=params.wall_thickness.1);
    let door = rng.random_range(params.door_width.0..=params.door_width.1);
    let (lo, hi) = interior(map);

    // candidate wall lines at multiples of the room side; a line too close to
    // the far border would only leave a sliver
    let mut lines = Vec::new();
    let mut k = 1;
    while lo + k as f64 * room_side + thickness / 2.0 + params.min_clearance < hi {
        lines.push(lo + k as f64 * room_side);
        k += 1;
    }
    let vertical: Vec<f64> = lines.iter().copied().filter(|_| rng.random_bool(params.p_wall)).collect();
    let horizontal: Vec<f64> = lines.iter().copied().filter(|_| rng.random_bool(params.p_wall)).collect();

    let half = thickness / 2.0;
    let mut walls = Vec::new();
    for (is_vertical, own, crossing) in [(true, &vertical, &horizontal), (false, &horizontal, &vertical)] {
        for &position in own {
            let mut bounds = vec![lo];
            bounds.extend(crossing.iter().copied());
            bounds.push(hi);
            let segments = bounds
                .windows(2)
                .enumerate()
                .map(|(i, w)| {
                    let a = if i == 0 { w[0] } else { w[0] + half };
                    let b = if i + 2 == bounds.len() { w[1] } else { w[1] - half };
                    let start = if b - a > door { rng.random_range(a..=b - door) } else { a };
                    WallSegment {
                        start: w[0],
                        end: w[1],
                        door: Some((start, (start + door).min(b))),
                    }
                })
                .collect();
            walls.push(Wall {
                vertical: is_vertical,
                position,
                segments,
            });
        }
    }

    let closed_vertical = if walls.is_empty() { None } else { Some(rng.random_bool(0.5)) };
    if let Some(cv) = closed_vertical {
        for wall in walls.iter_mut().filter(|w| w.vertical == cv) {
            // a wall with a single door would cut the arena in two
            if wall.segments.len() > 1 {
                let i = rng.random_range(0..wall.segments.len());
                wall.segments[i].door = None;
            }
        }
    }

    for wall in &walls {
        rasterize_wall(map, wall, half);
    }
    FloorPlan {
        room_side,
        wall_thickness: thickness,
        door_width: door,
        walls,
        closed_vertical,
    }
}

fn rasterize_wall(map: &mut WorldMap, wall: &Wall, half: f64) {
    let res = map.resolution();
    let (w, h) = (map.width(), map.height());
    let across = if wall.vertical { w } else { h };
    let along = if wall.vertical { h } else { w };
    for a in 1..across - 1 {
        let ca = (a as f64 + 0.5) * res;
        if (ca - wall.position).abs() > half {
            continue;
        }
        for b in 1..along - 1 {
            let cb = (b as f64 + 0.5) * res;
            let in_door = wall
                .segments
                .iter()
                .filter_map(|s| s.door)
                .any(|(s, e)| cb >= s && cb < e);
            if !in_door {
                let (x, y) = if wall.vertical { (a, b) } else { (b, a) };
                map.set_obstacle(x, y, true);
            }
        }
    }
}

/// Scatters discs with the configured density; a disc closer than the
/// minimum clearance to any wall or earlier disc is dropped.
pub fn scatter_obstacles<R: Rng + ?Sized>(rng: &mut R, params: &MapGenParams, map: &mut WorldMap) -> Vec<Obstacle> {
    let res = map.resolution();
    let (lo, hi) = interior(map);
    let area = (hi - lo) * (hi - lo);
    let mean = params.obstacle_density * area;
    let attempts = if mean > 0.0 {
        Poisson::new(mean).expect("positive mean").sample(rng) as usize
    } else {
        0
    };
    // distance to walls, measured before any disc is drawn
    let walls = distance_transform(map.cells());
    let radius = params.obstacle_radius;
    let mut placed: Vec<Obstacle> = Vec::new();
    for _ in 0..attempts {
        let x = rng.random_range(lo..hi);
        let y = rng.random_range(lo..hi);
        let Some((cx, cy)) = map.cell_at(x, y) else { continue };
        // center-to-center distance minus the offsets of both points within
        // their cells bounds the edge distance from below
        let wall_gap = *walls.get(cx, cy) * res - res * std::f64::consts::SQRT_2 - radius;
        if wall_gap < params.min_clearance {
            continue;
        }
        let too_close = placed
            .iter()
            .any(|o| (o.x - x).hypot(o.y - y) - o.radius - radius < params.min_clearance);
        if too_close {
            continue;
        }
        placed.push(Obstacle { x, y, radius });
    }
    for o in &placed {
        rasterize_disc(map, o);
    }
    placed
}

fn rasterize_disc(map: &mut WorldMap, o: &Obstacle) {
    let res = map.resolution();
    let r = o.radius / res;
    let (gx, gy) = map.to_grid(o.x, o.y);
    let x0 = ((gx - r).floor() as i64).max(0) as usize;
    let y0 = ((gy - r).floor() as i64).max(0) as usize;
    let x1 = ((gx + r).ceil() as usize).min(map.width() - 1);
    let y1 = ((gy + r).ceil() as usize).min(map.height() - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dx, dy) = (x as f64 + 0.5 - gx, y as f64 + 0.5 - gy);
            if dx * dx + dy * dy <= r * r {
                map.set_obstacle(x, y, true);
            }
        }
    }
}

/// True when the cells an agent of `radius` may occupy form one
/// 4-connected component.
pub fn is_connected_at_clearance(map: &WorldMap, radius: f64) -> bool {
    let cspace = ConfigSpace::new(map, radius);
    label_components4(cspace.mask()).1 == 1
}

/// One row of the training level table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    /// 1-based level.
    pub level: usize,
    pub tiers: Vec<u8>,
    pub random_maps: bool,
    pub goal_coverage: f64,
}

/// The level table for a task.
pub fn levels(task: Task) -> Vec<LevelSpec> {
    let rows: &[(&[u8], bool, f64)] = match task {
        Task::Mowing => &[
            (&[0], false, 0.90),
            (&[0, 1], false, 0.90),
            (&[0, 1], false, 0.95),
            (&[0, 1, 2], false, 0.95),
            (&[0, 1, 2], false, 0.97),
            (&[0, 1, 2], false, 0.99),
            (&[0, 1, 2, 3], false, 0.99),
            (&[0, 1, 2, 3], true, 0.99),
        ],
        Task::Exploration | Task::ExplorationNonOmni => &[
            (&[1, 2], false, 0.90),
            (&[1, 2, 4], false, 0.90),
            (&[1, 2, 4], false, 0.95),
            (&[1, 2, 4], false, 0.97),
            (&[1, 2, 4], false, 0.99),
            (&[1, 2, 3, 4], false, 0.99),
            (&[1, 2, 3, 4], true, 0.99),
            (&[1, 2, 3, 4, 5], true, 0.99),
        ],
    };
    rows.iter()
        .enumerate()
        .map(|(i, &(tiers, random_maps, goal_coverage))| LevelSpec {
            level: i + 1,
            tiers: tiers.to_vec(),
            random_maps,
            goal_coverage,
        })
        .collect()
}

/// A fixed training map, described by the generator inputs that rebuild it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedMapSpec {
    pub name: String,
    pub tier: u8,
    pub side: f64,
    #[serde(default)]
    pub floorplan: bool,
    #[serde(default)]
    pub obstacles: bool,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("invalid tier catalogue: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Deserialize)]
struct Catalog {
    map: Vec<FixedMapSpec>,
}

/// Default tier catalogue shipped with the crate.
pub const DEFAULT_TIERS: &str = include_str!("../assets/tiers.toml");

pub fn parse_tiers(document: &str) -> Result<Vec<FixedMapSpec>, CatalogError> {
    Ok(toml::from_str::<Catalog>(document)?.map)
}

pub fn default_tiers() -> Vec<FixedMapSpec> {
    parse_tiers(DEFAULT_TIERS).expect("bundled catalogue parses")
}

/// Rebuilds a fixed map for the given task's agent.
pub fn build_fixed_map(spec: &FixedMapSpec, task: Task) -> GeneratedMap {
    let params = MapGenParams {
        side_range: (spec.side, spec.side),
        p_floorplan: if spec.floorplan { 1.0 } else { 0.0 },
        p_obstacles: if spec.obstacles { 1.0 } else { 0.0 },
        ..MapGenParams::for_task(task)
    };
    generate_map_seeded(spec.seed, &params)
}

/// Which map an episode should use.
#[derive(Clone, Debug, PartialEq)]
pub enum MapChoice {
    Fixed(String),
    Random,
}

/// Kind of random map completed, for the level-advance rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RandomKind {
    FloorPlan,
    Obstacles,
    /// Neither floor plan nor obstacles; does not count toward either.
    Plain,
}

/// Per-level completion record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Progress {
    pub completed_fixed: BTreeSet<String>,
    pub completed_floorplan: bool,
    pub completed_obstacles: bool,
}

#[derive(Clone, Debug)]
pub struct Curriculum {
    levels: Vec<LevelSpec>,
    maps: Vec<FixedMapSpec>,
    index: usize,
    pub progress: Progress,
}

impl Curriculum {
    pub fn new(task: Task, maps: Vec<FixedMapSpec>) -> Self {
        Self {
            levels: levels(task),
            maps,
            index: 0,
            progress: Progress::default(),
        }
    }

    pub fn level(&self) -> &LevelSpec {
        &self.levels[self.index]
    }

    /// Fixed maps that belong to the current level.
    pub fn level_maps(&self) -> Vec<&FixedMapSpec> {
        let tiers = &self.level().tiers;
        self.maps.iter().filter(|m| tiers.contains(&m.tier)).collect()
    }

    /// Picks the map for the next episode: with random maps enabled, fixed
    /// or random with equal probability.
    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> MapChoice {
        let maps = self.level_maps();
        if maps.is_empty() || (self.level().random_maps && rng.random_bool(0.5)) {
            return MapChoice::Random;
        }
        MapChoice::Fixed(maps[rng.random_range(0..maps.len())].name.clone())
    }

    pub fn record_fixed(&mut self, name: &str, reached_goal: bool) {
        if reached_goal {
            self.progress.completed_fixed.insert(name.to_string());
        }
    }

    pub fn record_random(&mut self, kind: RandomKind, reached_goal: bool) {
        if reached_goal {
            match kind {
                RandomKind::FloorPlan => self.progress.completed_floorplan = true,
                RandomKind::Obstacles => self.progress.completed_obstacles = true,
                RandomKind::Plain => {}
            }
        }
    }

    /// Moves to the next level once the current one is complete and returns
    /// the level to train on.
    pub fn next(&mut self) -> &LevelSpec {
        if self.index + 1 < self.levels.len() && level_complete(self.level(), &self.level_maps(), &self.progress) {
            self.index += 1;
            self.progress = Progress::default();
        }
        self.level()
    }
}

/// Every fixed map of the level reached the goal and, with random maps on,
/// one floor-plan map and one obstacle map did too.
pub fn level_complete(level: &LevelSpec, maps: &[&FixedMapSpec], progress: &Progress) -> bool {
    let fixed = maps.iter().all(|m| progress.completed_fixed.contains(&m.name));
    fixed && (!level.random_maps || (progress.completed_floorplan && progress.completed_obstacles))
}
