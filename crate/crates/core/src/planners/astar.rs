//! Shortest paths on 8-connected grids. Diagonal moves cost sqrt(2) and may
//! not cut corners: both orthogonal cells next to the move must be passable.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use crate::grid::Grid;

pub type Cell = (usize, usize);

const MOVES: [(i64, i64, f64); 8] = [
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, SQRT_2),
    (1, -1, SQRT_2),
    (-1, 1, SQRT_2),
    (-1, -1, SQRT_2),
];

/// Path found by [`astar`]: the cells after the start up to and including
/// the goal, and the cost in cells.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    pub cost: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    priority: f64,
    index: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on priority, ties broken by index for determinism
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn octile(a: Cell, b: Cell) -> f64 {
    let dx = a.0.abs_diff(b.0) as f64;
    let dy = a.1.abs_diff(b.1) as f64;
    dx.max(dy) + (SQRT_2 - 1.0) * dx.min(dy)
}

/// Passable neighbors of `index` with their step costs.
#[inline]
pub fn neighbors(passable: &Grid<bool>, index: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
    let (x, y) = passable.coords(index);
    let ok = move |dx: i64, dy: i64| passable.try_get(x as i64 + dx, y as i64 + dy).copied().unwrap_or(false);
    MOVES.iter().filter_map(move |&(dx, dy, c)| {
        if !ok(dx, dy) || (dx != 0 && dy != 0 && !(ok(dx, 0) && ok(0, dy))) {
            return None;
        }
        Some((passable.index((x as i64 + dx) as usize, (y as i64 + dy) as usize), c))
    })
}

/// Optimal 8-connected path with the octile heuristic. `None` when either
/// end is blocked or the goal is unreachable.
pub fn astar(passable: &Grid<bool>, start: Cell, goal: Cell) -> Option<GridPath> {
    astar_counted(passable, start, goal, &mut 0)
}

/// [`astar`] that adds its number of node expansions to `ops`.
pub fn astar_counted(passable: &Grid<bool>, start: Cell, goal: Cell, ops: &mut u64) -> Option<GridPath> {
    if !*passable.get(start.0, start.1) || !*passable.get(goal.0, goal.1) {
        return None;
    }
    if start == goal {
        return Some(GridPath {
            cells: Vec::new(),
            cost: 0.0,
        });
    }
    let n = passable.len();
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let (s, t) = (passable.index(start.0, start.1), passable.index(goal.0, goal.1));
    g[s] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Entry {
        priority: octile(start, goal),
        index: s,
    });
    while let Some(Entry { index, .. }) = heap.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        *ops += 1;
        if index == t {
            break;
        }
        for (nb, c) in neighbors(passable, index) {
            let cand = g[index] + c;
            if cand < g[nb] - 1e-12 {
                g[nb] = cand;
                parent[nb] = index;
                heap.push(Entry {
                    priority: cand + octile(passable.coords(nb), goal),
                    index: nb,
                });
            }
        }
    }
    if !closed[t] {
        return None;
    }
    let mut cells = Vec::new();
    let mut cur = t;
    while cur != s {
        cells.push(passable.coords(cur));
        cur = parent[cur];
    }
    cells.reverse();
    Some(GridPath { cells, cost: g[t] })
}

/// Single-source costs over the passable cells, expanding nodes in cost
/// order. Expansion stops at cost `limit` or when `stop` accepts a popped
/// cell; that cell is returned with the cost grid and the parent links.
pub struct Dijkstra {
    pub cost: Vec<f64>,
    pub parent: Vec<usize>,
    pub expanded: u64,
}

impl Dijkstra {
    pub fn run(passable: &Grid<bool>, start: Cell, limit: f64, mut stop: impl FnMut(usize) -> bool) -> (Self, Option<usize>) {
        let n = passable.len();
        let mut d = Self {
            cost: vec![f64::INFINITY; n],
            parent: vec![usize::MAX; n],
            expanded: 0,
        };
        if !*passable.get(start.0, start.1) {
            return (d, None);
        }
        let s = passable.index(start.0, start.1);
        d.cost[s] = 0.0;
        let mut closed = vec![false; n];
        let mut heap = BinaryHeap::new();
        heap.push(Entry { priority: 0.0, index: s });
        while let Some(Entry { priority, index }) = heap.pop() {
            if closed[index] {
                continue;
            }
            if priority > limit {
                break;
            }
            closed[index] = true;
            d.expanded += 1;
            if stop(index) {
                return (d, Some(index));
            }
            for (nb, c) in neighbors(passable, index) {
                let cand = priority + c;
                if cand < d.cost[nb] - 1e-12 {
                    d.cost[nb] = cand;
                    d.parent[nb] = index;
                    heap.push(Entry { priority: cand, index: nb });
                }
            }
        }
        (d, None)
    }

    /// Cells after the source up to `target`.
    pub fn path_to(&self, grid: &Grid<bool>, target: usize) -> Vec<Cell> {
        let mut cells = Vec::new();
        let mut cur = target;
        while self.parent[cur] != usize::MAX {
            cells.push(grid.coords(cur));
            cur = self.parent[cur];
        }
        cells.reverse();
        cells
    }
}
