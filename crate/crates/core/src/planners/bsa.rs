//! Backtracking spiral coverage over 2r cells. The agent drives straight to
//! a boundary, then spirals inward keeping covered or blocked cells on its
//! right. At a dead end it backtracks to the closest visited cell that still
//! borders unvisited space and starts a new spiral there.

use super::astar::{Cell, Dijkstra};
use super::{entry_node, frame_of, grid_direction, merge_collinear, route, CoverageGrid, Frame, OfflineController, PlannedPath};
use crate::episode::Episode;
use crate::grid::Grid;

#[derive(Clone, Debug)]
pub struct BsaPlan {
    pub grid: CoverageGrid,
    /// Nodes in the order they are first visited.
    pub order: Vec<usize>,
    /// Number of dead ends resolved by backtracking.
    pub backtracks: usize,
    pub path: PlannedPath,
    pub ops: u64,
}

fn right((dc, dr): (i64, i64)) -> (i64, i64) {
    (dr, -dc)
}

fn left((dc, dr): (i64, i64)) -> (i64, i64) {
    (-dr, dc)
}

pub fn plan(passable: &Grid<bool>, wanted: &Grid<bool>, frame: Frame, start: Cell, heading: f64, radius: f64, speed: f64) -> BsaPlan {
    let mut ops = 0;
    let grid = CoverageGrid::build(passable, wanted, frame, 2.0 * radius, radius);
    let edges = grid.edges(passable, false);
    let n = grid.nodes.len();
    let mut points = vec![frame.center(start)];
    let mut order = Vec::new();
    let mut backtracks = 0;
    let Some(mut cur) = entry_node(&grid, passable, start, &mut ops) else {
        return BsaPlan {
            grid,
            order,
            backtracks,
            path: PlannedPath::new(Vec::new(), speed),
            ops,
        };
    };
    if let Some(leg) = route(passable, &frame, start, grid.nodes[cur].target, &mut ops) {
        points.extend(leg);
    }
    let mut visited = vec![false; n];
    visited[cur] = true;
    order.push(cur);

    let step = |from: usize, d: (i64, i64), visited: &[bool]| -> Option<usize> {
        let node = grid.nodes[from];
        let to = grid.node_at(node.col as i64 + d.0, node.row as i64 + d.1)?;
        (!visited[to] && edges[from].iter().any(|&(m, _)| m == to)).then_some(to)
    };

    let mut dir = grid_direction(heading);
    let mut straight = true;
    loop {
        let next = if straight {
            match step(cur, dir, &visited) {
                Some(m) => Some((m, dir)),
                None => {
                    straight = false;
                    // put the boundary on the right
                    [left(dir), right(dir)].into_iter().find_map(|d| step(cur, d, &visited).map(|m| (m, d)))
                }
            }
        } else {
            [right(dir), dir, left(dir)].into_iter().find_map(|d| step(cur, d, &visited).map(|m| (m, d)))
        };
        if let Some((m, d)) = next {
            ops += 1;
            visited[m] = true;
            order.push(m);
            points.push(grid.point(m));
            cur = m;
            dir = d;
            continue;
        }

        // dead end: nearest visited node with an open unvisited neighbor
        let from = grid.nodes[cur].target;
        let dirs = [(1, 0), (0, 1), (-1, 0), (0, -1)];
        let mut goals = vec![usize::MAX; passable.len()];
        for (i, node) in grid.nodes.iter().enumerate() {
            if visited[i] && dirs.iter().any(|&d| step(i, d, &visited).is_some()) {
                goals[passable.index(node.target.0, node.target.1)] = i;
            }
        }
        let (dj, hit) = Dijkstra::run(passable, from, f64::INFINITY, |c| goals[c] != usize::MAX);
        ops += dj.expanded;
        if let Some(hit) = hit {
            let b = goals[hit];
            backtracks += 1;
            if let Some(leg) = route(passable, &frame, from, grid.nodes[b].target, &mut ops) {
                points.extend(leg);
            }
            cur = b;
            // leave along the first open direction, right-hand first
            let d = [right(dir), dir, left(dir), (-dir.0, -dir.1)]
                .into_iter()
                .find(|&d| step(b, d, &visited).is_some())
                .expect("backtrack node has an open neighbor");
            dir = d;
            straight = true;
            continue;
        }

        // unvisited nodes the cell graph does not connect to
        let mut loose = vec![usize::MAX; passable.len()];
        for (i, node) in grid.nodes.iter().enumerate() {
            if !visited[i] {
                loose[passable.index(node.target.0, node.target.1)] = i;
            }
        }
        let (dj, hit) = Dijkstra::run(passable, from, f64::INFINITY, |c| loose[c] != usize::MAX);
        ops += dj.expanded;
        let Some(hit) = hit else { break };
        let m = loose[hit];
        if let Some(leg) = route(passable, &frame, from, grid.nodes[m].target, &mut ops) {
            points.extend(leg);
        }
        visited[m] = true;
        order.push(m);
        cur = m;
        straight = true;
    }
    let points = merge_collinear(&points);
    BsaPlan {
        grid,
        order,
        backtracks,
        path: PlannedPath::new(points, speed),
        ops,
    }
}

/// BSA over the true map.
pub fn controller() -> OfflineController {
    OfflineController::new(
        "bsa",
        Box::new(|ep: &Episode, passable: &Grid<bool>, start: Cell| {
            let c = ep.config();
            plan(
                passable,
                &ep.arena().coverable.reachable_mask,
                frame_of(ep),
                start,
                ep.perceived_pose().heading,
                c.coverage.radius,
                c.dynamics.v_max,
            )
            .path
            .waypoints
            .into_iter()
            .skip(1)
            .collect()
        }),
    )
}
