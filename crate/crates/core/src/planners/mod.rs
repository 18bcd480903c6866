//! Classical baselines: backtracking spiral, TSP tours over a cell grid
//! (offline and online) and nearest-frontier exploration. All of them drive
//! the agent through the same dynamics as a learned policy, using a
//! waypoint tracker.

pub mod astar;
pub mod bsa;
pub mod frontier;
pub mod tsp;

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;

use crate::belief::{BeliefState, Knowledge};
use crate::dynamics::{Action, DynamicsConfig};
use crate::episode::{Controller, Decision, Episode};
use crate::grid::{distance_transform, traverse_ray, Grid};
use crate::worldmodel::{clearance_cells, wrap_angle, Pose};

use astar::{astar_counted, Cell, Dijkstra};

/// Simulated seconds charged per elementary planner operation (a node
/// expansion or a tour-move evaluation) for online planners. Planning time is
/// derived from operation counts rather than measured, so runs stay
/// reproducible.
pub const SECONDS_PER_OP: f64 = 2e-8;

/// Heading error above which the tracker turns in place.
const TURN_IN_PLACE: f64 = 0.1;
/// Distance at which a waypoint counts as reached.
const WAYPOINT_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PlannerKind {
    Bsa,
    TspOffline,
    TspOnline,
    Frontier,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 4] = [PlannerKind::Bsa, PlannerKind::TspOffline, PlannerKind::TspOnline, PlannerKind::Frontier];

    pub fn controller(self) -> Box<dyn Controller + Send> {
        match self {
            PlannerKind::Bsa => Box::new(bsa::controller()),
            PlannerKind::TspOffline => Box::new(tsp::offline_controller()),
            PlannerKind::TspOnline => Box::new(tsp::TspOnlineController::new()),
            PlannerKind::Frontier => Box::new(frontier::FrontierController::new()),
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlannerKind::Bsa => "bsa",
            PlannerKind::TspOffline => "tsp-offline",
            PlannerKind::TspOnline => "tsp-online",
            PlannerKind::Frontier => "frontier",
        })
    }
}

impl FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| format!("unknown planner `{s}` (expected bsa, tsp-offline, tsp-online or frontier)"))
    }
}

/// Sequence of world-frame waypoints with timestamps under a constant-speed
/// model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlannedPath {
    pub waypoints: Vec<(f64, f64)>,
    pub length: f64,
    pub times: Vec<f64>,
}

impl PlannedPath {
    pub fn new(waypoints: Vec<(f64, f64)>, speed: f64) -> Self {
        let mut length = 0.0;
        let mut times = Vec::with_capacity(waypoints.len());
        for (i, w) in waypoints.iter().enumerate() {
            if i > 0 {
                let p = waypoints[i - 1];
                length += (w.0 - p.0).hypot(w.1 - p.1);
            }
            times.push(length / speed);
        }
        Self { waypoints, length, times }
    }
}

/// Grid geometry helpers shared by the planners.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    pub resolution: f64,
    pub origin: (f64, f64),
}

impl Frame {
    pub fn center(&self, c: Cell) -> (f64, f64) {
        (
            self.origin.0 + (c.0 as f64 + 0.5) * self.resolution,
            self.origin.1 + (c.1 as f64 + 0.5) * self.resolution,
        )
    }

    pub fn cell(&self, grid: &Grid<bool>, x: f64, y: f64) -> Option<Cell> {
        let gx = ((x - self.origin.0) / self.resolution).floor() as i64;
        let gy = ((y - self.origin.1) / self.resolution).floor() as i64;
        grid.in_bounds(gx, gy).then_some((gx as usize, gy as usize))
    }
}

/// Sideways slack, in cells, kept clear around a straight leg. The tracker
/// drives short arcs that bulge off the line by less than this, and a leg
/// through a cell corner must not slip into either orthogonal neighbor.
const LEG_SLACK: f64 = 0.15;

/// True when every cell a band of half-width [`LEG_SLACK`] around the
/// segment between two cell centers touches is passable.
pub fn line_of_sight(passable: &Grid<bool>, a: Cell, b: Cell) -> bool {
    if a == b {
        return *passable.get(a.0, a.1);
    }
    let (dx, dy) = (b.0 as f64 - a.0 as f64, b.1 as f64 - a.1 as f64);
    let len = dx.hypot(dy);
    let (ux, uy) = (dx / len, dy / len);
    [0.0, LEG_SLACK, -LEG_SLACK].into_iter().all(|off| {
        let start = (a.0 as f64 + 0.5 - uy * off, a.1 as f64 + 0.5 + ux * off);
        let blocked = traverse_ray(start, (ux, uy), len, |x, y, _| {
            if passable.try_get(x, y).copied().unwrap_or(false) {
                ControlFlow::Continue(())
            } else {
                ControlFlow::Break(())
            }
        });
        blocked.is_none()
    })
}

/// Greedy any-angle shortening: from each kept cell jump to the farthest
/// later cell still in line of sight.
pub fn smooth(passable: &Grid<bool>, from: Cell, cells: &[Cell]) -> Vec<Cell> {
    let mut out = Vec::new();
    let mut anchor = from;
    let mut i = 0;
    while i < cells.len() {
        let mut j = i;
        while j + 1 < cells.len() && line_of_sight(passable, anchor, cells[j + 1]) {
            j += 1;
        }
        out.push(cells[j]);
        anchor = cells[j];
        i = j + 1;
    }
    out
}

/// Removes waypoints lying on the straight line through their neighbors.
pub fn merge_collinear(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        if out.last().is_some_and(|q| (q.0 - p.0).hypot(q.1 - p.1) < 1e-9) {
            continue;
        }
        if out.len() >= 2 {
            let (a, b) = (out[out.len() - 2], out[out.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - b.1) - (b.1 - a.1) * (p.0 - b.0);
            let dot = (b.0 - a.0) * (p.0 - b.0) + (b.1 - a.1) * (p.1 - b.1);
            if cross.abs() < 1e-9 && dot > 0.0 {
                out.pop();
            }
        }
        out.push(p);
    }
    out
}

/// Rotate-then-drive waypoint follower. With first-order dynamics each
/// driving step ends exactly on the line to the waypoint, and on the
/// waypoint itself when it is within one step.
#[derive(Clone, Debug, Default)]
pub struct Tracker {
    waypoints: VecDeque<(f64, f64)>,
}

impl Tracker {
    pub fn set(&mut self, waypoints: impl IntoIterator<Item = (f64, f64)>) {
        self.waypoints = waypoints.into_iter().collect();
    }

    pub fn push(&mut self, p: (f64, f64)) {
        self.waypoints.push_back(p);
    }

    pub fn clear(&mut self) {
        self.waypoints.clear();
    }

    pub fn front(&self) -> Option<(f64, f64)> {
        self.waypoints.front().copied()
    }

    /// Inserts a detour ahead of the remaining waypoints.
    pub fn prepend(&mut self, points: Vec<(f64, f64)>) {
        for p in points.into_iter().rev() {
            self.waypoints.push_front(p);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn remaining(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.waypoints.iter()
    }

    /// Command toward the next waypoint; `None` when all are reached.
    pub fn command(&mut self, pose: &Pose, cfg: &DynamicsConfig) -> Option<Action> {
        while let Some(&(x, y)) = self.waypoints.front() {
            if (x - pose.x).hypot(y - pose.y) > WAYPOINT_TOLERANCE {
                break;
            }
            self.waypoints.pop_front();
        }
        let &(x, y) = self.waypoints.front()?;
        let dist = (x - pose.x).hypot(y - pose.y);
        let error = wrap_angle((y - pose.y).atan2(x - pose.x) - pose.heading);
        let dt = cfg.dt;
        if error.abs() > TURN_IN_PLACE {
            let w = (error / dt).clamp(-cfg.w_max, cfg.w_max);
            return Some(Action::new(0.0, w / cfg.w_max));
        }
        // an arc turning by 2e has its chord along the line of sight
        let w = (2.0 * error / dt).clamp(-cfg.w_max, cfg.w_max);
        let sinc = if error.abs() < 1e-9 { 1.0 } else { error.sin() / error };
        let v = (dist / (dt * sinc)).min(cfg.v_max);
        Some(Action::new(v / cfg.v_max, w / cfg.w_max))
    }
}

/// Cell blocks used as TSP and spiral nodes.
#[derive(Clone, Debug)]
pub struct CoverageGrid {
    pub cell_side: f64,
    /// Block size in fine cells (may be fractional).
    pub block: f64,
    pub cols: usize,
    pub rows: usize,
    pub nodes: Vec<Node>,
    /// Node index per block, row-major.
    pub index: Vec<Option<usize>>,
    pub frame: Frame,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub col: usize,
    pub row: usize,
    /// Fine cell the agent drives to when visiting the node.
    pub target: Cell,
}

impl CoverageGrid {
    /// Tiles the interior (inside the one-cell border) with blocks of
    /// `cell_side`. A block becomes a node when `wanted` holds for one of its
    /// fine cells and a passable cell lies within `reach` meters of the block
    /// (the nearest passable cell to the block center is the target).
    pub fn build(passable: &Grid<bool>, wanted: &Grid<bool>, frame: Frame, cell_side: f64, reach: f64) -> Self {
        let res = frame.resolution;
        let block = cell_side / res;
        let interior_w = passable.width().saturating_sub(2) as f64;
        let interior_h = passable.height().saturating_sub(2) as f64;
        let cols = (interior_w / block).ceil().max(1.0) as usize;
        let rows = (interior_h / block).ceil().max(1.0) as usize;
        let margin = reach / res;
        let mut nodes = Vec::new();
        let mut index = vec![None; cols * rows];
        for row in 0..rows {
            for col in 0..cols {
                let (x0, x1) = (1.0 + col as f64 * block, 1.0 + (col + 1) as f64 * block);
                let (y0, y1) = (1.0 + row as f64 * block, 1.0 + (row + 1) as f64 * block);
                let cells = |lo: f64, hi: f64, n: usize| (lo.floor().max(0.0) as usize)..(hi.ceil() as usize).min(n);
                let any_wanted = cells(y0, y1, passable.height()).any(|y| {
                    let cy = y as f64 + 0.5;
                    (cy >= y0 && cy < y1)
                        && cells(x0, x1, passable.width()).any(|x| {
                            let cx = x as f64 + 0.5;
                            cx >= x0 && cx < x1 && *wanted.get(x, y)
                        })
                });
                if !any_wanted {
                    continue;
                }
                let (mx, my) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
                let mut best: Option<(f64, Cell)> = None;
                for y in cells(y0 - margin, y1 + margin, passable.height()) {
                    for x in cells(x0 - margin, x1 + margin, passable.width()) {
                        if !*passable.get(x, y) {
                            continue;
                        }
                        let d = (x as f64 + 0.5 - mx).hypot(y as f64 + 0.5 - my);
                        if best.is_none_or(|(bd, _)| d < bd - 1e-12) {
                            best = Some((d, (x, y)));
                        }
                    }
                }
                if let Some((_, target)) = best {
                    index[row * cols + col] = Some(nodes.len());
                    nodes.push(Node { col, row, target });
                }
            }
        }
        Self {
            cell_side,
            block,
            cols,
            rows,
            nodes,
            index,
            frame,
        }
    }

    pub fn node_at(&self, col: i64, row: i64) -> Option<usize> {
        if col < 0 || row < 0 || col as usize >= self.cols || row as usize >= self.rows {
            return None;
        }
        self.index[row as usize * self.cols + col as usize]
    }

    /// World position of a node's target.
    pub fn point(&self, node: usize) -> (f64, f64) {
        self.frame.center(self.nodes[node].target)
    }

    /// Node whose target is closest to a world point.
    pub fn nearest(&self, x: f64, y: f64) -> Option<usize> {
        (0..self.nodes.len()).min_by(|&a, &b| {
            let (pa, pb) = (self.point(a), self.point(b));
            (pa.0 - x).hypot(pa.1 - y).total_cmp(&(pb.0 - x).hypot(pb.1 - y))
        })
    }

    /// Edges to the 4- or 8-neighborhood whose straight segment is passable.
    pub fn edges(&self, passable: &Grid<bool>, eight: bool) -> Vec<Vec<(usize, f64)>> {
        let offsets: &[(i64, i64)] = if eight {
            &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]
        } else {
            &[(1, 0), (-1, 0), (0, 1), (0, -1)]
        };
        self.nodes
            .iter()
            .map(|n| {
                offsets
                    .iter()
                    .filter_map(|&(dc, dr)| {
                        let m = self.node_at(n.col as i64 + dc, n.row as i64 + dr)?;
                        let t = self.nodes[m].target;
                        line_of_sight(passable, n.target, t).then(|| {
                            let d = (t.0 as f64 - n.target.0 as f64).hypot(t.1 as f64 - n.target.1 as f64);
                            (m, d * self.frame.resolution)
                        })
                    })
                    .collect()
            })
            .collect()
    }
}

/// Passable cells for an agent that only knows its belief: cells far enough
/// from every known obstacle, the arena rim and any cell found blocked by a
/// collision. Unknown cells count as free.
pub fn belief_cspace(belief: &BeliefState, radius: f64, blocked: &Grid<bool>) -> Grid<bool> {
    let (w, h) = (belief.width(), belief.height());
    let obstacles = Grid::from_fn(w, h, |x, y| {
        x == 0 || y == 0 || x + 1 == w || y + 1 == h || *belief.obstacles().get(x, y) == Knowledge::Obstacle
    });
    let need = clearance_cells(radius, belief.resolution());
    let dist = distance_transform(&obstacles);
    Grid::from_fn(w, h, |x, y| *dist.get(x, y) >= need && !*blocked.get(x, y))
}

/// Belief C-space kept in sync with the map and with collisions the belief
/// did not predict.
pub struct BeliefCspace {
    blocked: Grid<bool>,
    passable: Grid<bool>,
    known: usize,
    radius: f64,
}

impl BeliefCspace {
    pub fn new(belief: &BeliefState, radius: f64) -> Self {
        let blocked = Grid::new(belief.width(), belief.height(), false);
        let passable = belief_cspace(belief, radius, &blocked);
        Self {
            known: known_obstacles(belief),
            blocked,
            passable,
            radius,
        }
    }

    pub fn passable(&self) -> &Grid<bool> {
        &self.passable
    }

    /// Blocks the cell just ahead of an agent that collided at `pose`.
    pub fn block_ahead(&mut self, belief: &BeliefState, pose: &Pose) {
        let res = belief.resolution();
        if let Some((x, y)) = belief.cell_at(pose.x + res * pose.heading.cos(), pose.y + res * pose.heading.sin()) {
            self.blocked.set(x, y, true);
            self.known = usize::MAX;
        }
    }

    /// Recomputes after new obstacles were seen; true when anything changed.
    pub fn refresh(&mut self, belief: &BeliefState) -> bool {
        let known = known_obstacles(belief);
        if known == self.known {
            return false;
        }
        self.known = known;
        self.passable = belief_cspace(belief, self.radius, &self.blocked);
        true
    }

    /// Whether the straight legs from `pose` through `waypoints` are still
    /// passable.
    pub fn clear(&self, frame: &Frame, pose: &Pose, waypoints: impl IntoIterator<Item = (f64, f64)>) -> bool {
        let Some(mut prev) = frame.cell(&self.passable, pose.x, pose.y) else {
            return false;
        };
        waypoints.into_iter().all(|(x, y)| {
            let Some(c) = frame.cell(&self.passable, x, y) else { return false };
            let ok = line_of_sight(&self.passable, prev, c);
            prev = c;
            ok
        })
    }
}

fn known_obstacles(belief: &BeliefState) -> usize {
    belief.obstacles().data().iter().filter(|&&k| k == Knowledge::Obstacle).count()
}

/// Cells whose coverage is still pending, and how to get to them.
pub struct MopUp {
    given_up: Grid<bool>,
    goal: Option<Cell>,
}

impl MopUp {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            given_up: Grid::new(width, height, false),
            goal: None,
        }
    }

    /// Closest passable cell from which some pending cell lies strictly
    /// within `radius_cells`, with the path to it. When called from the
    /// previous goal, pending cells around it that are still pending are
    /// dropped for good.
    pub fn next(
        &mut self,
        passable: &Grid<bool>,
        pending: &Grid<bool>,
        from: Cell,
        radius_cells: f64,
        ops: &mut u64,
    ) -> Option<(Cell, Vec<Cell>)> {
        if let Some(g) = self.goal.take().filter(|&g| g == from) {
            let r = radius_cells.ceil() as i64;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (x, y) = (g.0 as i64 + dx, g.1 as i64 + dy);
                    if ((dx * dx + dy * dy) as f64) < radius_cells * radius_cells && pending.in_bounds(x, y) && *pending.get(x as usize, y as usize) {
                        self.given_up.set(x as usize, y as usize, true);
                    }
                }
            }
        }
        let open = Grid::from_fn(pending.width(), pending.height(), |x, y| *pending.get(x, y) && !*self.given_up.get(x, y));
        if open.count_true() == 0 {
            return None;
        }
        let near = distance_transform(&open);
        let (d, hit) = Dijkstra::run(passable, from, f64::INFINITY, |i| near.data()[i] < radius_cells);
        *ops += d.expanded;
        let hit = hit?;
        let goal = passable.coords(hit);
        self.goal = Some(goal);
        Some((goal, d.path_to(passable, hit)))
    }
}

/// Fine-grid route between two cells as world waypoints (excluding the
/// start), shortened by line of sight.
pub fn route(passable: &Grid<bool>, frame: &Frame, from: Cell, to: Cell, ops: &mut u64) -> Option<Vec<(f64, f64)>> {
    if line_of_sight(passable, from, to) {
        return Some(vec![frame.center(to)]);
    }
    let path = astar_counted(passable, from, to, ops)?;
    Some(smooth(passable, from, &path.cells).into_iter().map(|c| frame.center(c)).collect())
}

/// Nearest passable cell to a pose, searching outward.
pub fn nearest_passable(passable: &Grid<bool>, frame: &Frame, pose: &Pose) -> Option<Cell> {
    let (gx, gy) = ((pose.x - frame.origin.0) / frame.resolution, (pose.y - frame.origin.1) / frame.resolution);
    let mut best: Option<(f64, Cell)> = None;
    for r in 0..passable.width().max(passable.height()) as i64 {
        let (cx, cy) = (gx.floor() as i64, gy.floor() as i64);
        for y in cy - r..=cy + r {
            for x in cx - r..=cx + r {
                if (x - cx).abs().max((y - cy).abs()) != r || !passable.try_get(x, y).copied().unwrap_or(false) {
                    continue;
                }
                let d = (x as f64 + 0.5 - gx).hypot(y as f64 + 0.5 - gy);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, (x as usize, y as usize)));
                }
            }
        }
        // any cell in a later ring is at least r cells away
        if best.is_some_and(|(d, _)| d <= r as f64) {
            break;
        }
    }
    best.map(|(_, c)| c)
}

/// Agent has to rotate by this much (radians) to face a point.
pub fn bearing_error(pose: &Pose, p: (f64, f64)) -> f64 {
    wrap_angle((p.1 - pose.y).atan2(p.0 - pose.x) - pose.heading)
}

/// Quantizes a heading to the nearest grid direction `(dc, dr)`.
pub fn grid_direction(heading: f64) -> (i64, i64) {
    let k = ((wrap_angle(heading) + 2.0 * PI) / (PI / 2.0)).round() as i64 % 4;
    [(1, 0), (0, 1), (-1, 0), (0, -1)][k as usize]
}

/// Waypoints for the coverage sweep of an offline plan: the agent first
/// drives to the first target, then visits the targets in order.
pub fn sweep_waypoints(passable: &Grid<bool>, grid: &CoverageGrid, from: Cell, order: &[usize], ops: &mut u64) -> Vec<(f64, f64)> {
    let mut points = vec![grid.frame.center(from)];
    let mut cur = from;
    for &n in order {
        let t = grid.nodes[n].target;
        if let Some(leg) = route(passable, &grid.frame, cur, t, ops) {
            points.extend(leg);
            cur = t;
        }
    }
    let mut merged = merge_collinear(&points);
    merged.remove(0);
    merged
}

/// Node whose target is closest to `start` along the passable cells.
pub fn entry_node(grid: &CoverageGrid, passable: &Grid<bool>, start: Cell, ops: &mut u64) -> Option<usize> {
    let mut targets = vec![usize::MAX; passable.len()];
    for (i, n) in grid.nodes.iter().enumerate() {
        targets[passable.index(n.target.0, n.target.1)] = i;
    }
    let (d, hit) = Dijkstra::run(passable, start, f64::INFINITY, |c| targets[c] != usize::MAX);
    *ops += d.expanded;
    hit.map(|c| targets[c])
}

pub(crate) fn frame_of(ep: &Episode) -> Frame {
    Frame {
        resolution: ep.world().resolution(),
        origin: ep.world().origin(),
    }
}

/// Computes waypoints over the passable cells from a start cell.
pub type OfflinePlanner = Box<dyn Fn(&Episode, &Grid<bool>, Cell) -> Vec<(f64, f64)> + Send>;

/// Plans once over the true map, follows the plan, then mops up whatever
/// coverable cells are left.
pub struct OfflineController {
    name: &'static str,
    planner: OfflinePlanner,
    tracker: Tracker,
    state: Option<(Grid<bool>, MopUp)>,
    stuck: u32,
}

impl OfflineController {
    pub fn new(name: &'static str, planner: OfflinePlanner) -> Self {
        Self {
            name,
            planner,
            tracker: Tracker::default(),
            state: None,
            stuck: 0,
        }
    }
}

impl Controller for OfflineController {
    fn name(&self) -> &str {
        self.name
    }

    fn act(&mut self, ep: &Episode) -> Decision {
        let dynamics = ep.config().dynamics;
        if self.state.is_none() {
            let passable = ep.arena().reachable.reachable_mask.clone();
            let Some(start) = nearest_passable(&passable, &frame_of(ep), &ep.perceived_pose()) else {
                return Decision::finished();
            };
            self.tracker.set((self.planner)(ep, &passable, start));
            let mop = MopUp::new(passable.width(), passable.height());
            self.state = Some((passable, mop));
        }
        let (passable, mop) = self.state.as_mut().expect("planned");
        if ep.records().last().is_some_and(|r| r.collided != 0) {
            self.stuck += 1;
        } else {
            self.stuck = 0;
        }
        if self.stuck >= 3 {
            // grazing a corner: back to the cell center and around it on the grid
            self.stuck = 0;
            let frame = frame_of(ep);
            if let (Some(from), Some(wp)) = (nearest_passable(passable, &frame, &ep.perceived_pose()), self.tracker.front()) {
                if let Some(to) = frame.cell(passable, wp.0, wp.1) {
                    let mut detour = vec![frame.center(from)];
                    if let Some(path) = astar_counted(passable, from, to, &mut 0) {
                        detour.extend(smooth(passable, from, &path.cells).into_iter().map(|c| frame.center(c)));
                    }
                    self.tracker.prepend(detour);
                }
            }
        }
        loop {
            if let Some(a) = self.tracker.command(&ep.perceived_pose(), &dynamics) {
                return Decision::act(a);
            }
            let covered = ep.belief().coverage();
            let coverable = &ep.arena().coverable.reachable_mask;
            let pending = Grid::from_fn(covered.width(), covered.height(), |x, y| *coverable.get(x, y) && !*covered.get(x, y));
            let radius = ep.config().coverage.radius / ep.world().resolution();
            if !mop_up_step(mop, &mut self.tracker, passable, &pending, ep, &mut 0, radius) {
                return Decision::finished();
            }
        }
    }
}

/// Shared end game of every planner: drive to the nearest spot that covers
/// still-pending cells until none are left.
pub(crate) fn mop_up_step(
    mop: &mut MopUp,
    tracker: &mut Tracker,
    passable: &Grid<bool>,
    pending: &Grid<bool>,
    episode: &Episode,
    ops: &mut u64,
    radius_cells: f64,
) -> bool {
    let frame = frame_of(episode);
    let pose = episode.perceived_pose();
    let Some(from) = nearest_passable(passable, &frame, &pose) else {
        return false;
    };
    match mop.next(passable, pending, from, radius_cells, ops) {
        Some((goal, _)) => {
            let mut pts = Vec::new();
            if frame.cell(passable, pose.x, pose.y) != Some(from) {
                pts.push(frame.center(from));
            }
            match route(passable, &frame, from, goal, ops) {
                Some(leg) => pts.extend(leg),
                None => return false,
            }
            if pts.is_empty() || from == goal {
                pts.push(frame.center(goal));
            }
            tracker.set(pts);
            true
        }
        None => false,
    }
}
