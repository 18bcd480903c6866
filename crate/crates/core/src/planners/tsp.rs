//! Cell-center TSP coverage: the interior is split into squares of side
//! sqrt(2)·r so that stopping at a square's center covers all of it. Pair
//! costs come from shortest paths over the cell graph, with distant pairs
//! replaced by an upper bound; the open tour is built nearest-neighbor first
//! and improved with 2-opt and Or-opt moves.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::SQRT_2;

use crate::belief::Knowledge;
use crate::episode::{Controller, Decision, Episode};
use crate::grid::Grid;

use super::astar::{Cell, Dijkstra};
use super::{
    entry_node, frame_of, merge_collinear, mop_up_step, nearest_passable, route, BeliefCspace, CoverageGrid, Frame, MopUp, OfflineController, PlannedPath,
    Tracker,
    SECONDS_PER_OP,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TspConfig {
    /// Pairs farther apart than this fraction of the map diagonal get the
    /// upper-bound cost instead of a search.
    pub distant_fraction: f64,
    /// Instances with at most this many nodes are costed exactly.
    pub exact_up_to: usize,
    /// Above this many nodes the cost table only keeps each node's closest
    /// `sparse_row` partners.
    pub dense_limit: usize,
    pub sparse_row: usize,
    /// Candidate partners per node for the improvement moves.
    pub neighbors: usize,
    /// Maximum number of move evaluations per solve.
    pub budget: u64,
}

impl Default for TspConfig {
    fn default() -> Self {
        Self {
            distant_fraction: 0.25,
            exact_up_to: 64,
            dense_limit: 2000,
            sparse_row: 64,
            neighbors: 16,
            budget: 20_000_000,
        }
    }
}

/// Symmetric pair costs between nodes.
#[derive(Clone, Debug)]
pub struct CostTable {
    n: usize,
    dense: Option<Vec<f64>>,
    sparse: Vec<HashMap<u32, f64>>,
    supremum: f64,
}

impl CostTable {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dense[i * n + j] = if i == j { 0.0 } else { f(i, j) };
            }
        }
        let supremum = dense.iter().copied().filter(|c| c.is_finite()).fold(0.0, f64::max);
        Self {
            n,
            dense: Some(dense),
            sparse: Vec::new(),
            supremum,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn supremum(&self) -> f64 {
        self.supremum
    }

    #[inline]
    pub fn cost(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match &self.dense {
            Some(d) => d[i * self.n + j],
            None => self.sparse[i].get(&(j as u32)).copied().unwrap_or(self.supremum),
        }
    }

    /// Cost of visiting `tour` in order (open path).
    pub fn path_cost(&self, tour: &[usize]) -> f64 {
        tour.windows(2).map(|w| self.cost(w[0], w[1])).sum()
    }

    /// The `k` cheapest partners of every node.
    fn candidates(&self, k: usize) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|i| {
                let mut row: Vec<(f64, usize)> = match &self.dense {
                    Some(_) => (0..self.n).filter(|&j| j != i).map(|j| (self.cost(i, j), j)).collect(),
                    None => self.sparse[i].iter().map(|(&j, &c)| (c, j as usize)).collect(),
                };
                let k = k.min(row.len());
                if k == 0 {
                    return Vec::new();
                }
                row.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                row.truncate(k);
                row.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                row.into_iter().map(|(_, j)| j).collect()
            })
            .collect()
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path costs from `src` over an adjacency list, settling at most
/// `max_settled` nodes. Returns the settled nodes in cost order.
fn graph_dijkstra(adj: &[Vec<(usize, f64)>], src: usize, max_settled: usize, dist: &mut [f64], ops: &mut u64) -> Vec<(usize, f64)> {
    let mut settled = Vec::new();
    let mut touched = vec![src];
    dist[src] = 0.0;
    let mut heap = BinaryHeap::from([Item(0.0, src)]);
    while let Some(Item(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        settled.push((u, d));
        *ops += 1;
        if settled.len() >= max_settled {
            break;
        }
        for &(v, c) in &adj[u] {
            let nd = d + c;
            if nd < dist[v] {
                if dist[v].is_infinite() {
                    touched.push(v);
                }
                dist[v] = nd;
                heap.push(Item(nd, v));
            }
        }
    }
    for t in touched {
        dist[t] = f64::INFINITY;
    }
    settled
}

/// Node graph with extra links so that every node reachable on the fine grid
/// is reachable in the graph. Nodes the fine grid cannot reach from `root`
/// are reported as unreachable.
pub fn connected_graph(grid: &CoverageGrid, passable: &Grid<bool>, root: usize, ops: &mut u64) -> (Vec<Vec<(usize, f64)>>, Vec<bool>) {
    let mut adj = grid.edges(passable, true);
    let n = grid.nodes.len();
    let by_cell: HashMap<usize, usize> = grid
        .nodes
        .iter()
        .enumerate()
        .map(|(i, node)| (passable.index(node.target.0, node.target.1), i))
        .collect();
    let mut reached = vec![false; n];
    let mut dist = vec![f64::INFINITY; n];
    for (u, _) in graph_dijkstra(&adj, root, usize::MAX, &mut dist, ops) {
        reached[u] = true;
    }
    // attach each stranded node to the closest reached node along the fine grid
    let res = grid.frame.resolution;
    let mut dead = vec![false; n];
    for i in 0..n {
        if reached[i] || dead[i] {
            continue;
        }
        let t = grid.nodes[i].target;
        let (d, hit) = Dijkstra::run(passable, t, f64::INFINITY, |c| by_cell.get(&c).is_some_and(|&j| reached[j]));
        *ops += d.expanded;
        let Some(hit) = hit else {
            for (u, _) in graph_dijkstra(&adj, i, usize::MAX, &mut dist, ops) {
                dead[u] = true;
            }
            continue;
        };
        let j = by_cell[&hit];
        let c = d.cost[hit] * res;
        adj[i].push((j, c));
        adj[j].push((i, c));
        for (u, _) in graph_dijkstra(&adj, i, usize::MAX, &mut dist, ops) {
            reached[u] = true;
        }
    }
    (adj, reached)
}

/// Pairwise shortest-path costs over the node graph. Pairs whose targets are
/// farther apart than `distant_fraction` of `diagonal` get the upper bound
/// once the instance exceeds `exact_up_to` nodes.
pub fn pair_costs(adj: &[Vec<(usize, f64)>], points: &[(f64, f64)], diagonal: f64, cfg: &TspConfig, ops: &mut u64) -> CostTable {
    let n = adj.len();
    let far = cfg.distant_fraction * diagonal;
    let approximate = n > cfg.exact_up_to;
    let dense = n <= cfg.dense_limit;
    let max_settled = if dense { usize::MAX } else { cfg.sparse_row + 1 };
    let mut dist = vec![f64::INFINITY; n];
    let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| graph_dijkstra(adj, i, max_settled, &mut dist, ops)).collect();
    let longest = rows.iter().flatten().map(|&(_, c)| c).fold(0.0, f64::max);
    let max_edge = adj.iter().flatten().map(|&(_, c)| c).fold(0.0, f64::max);
    // no shortest path can be longer than crossing every node once
    let supremum = longest.max(n as f64 * max_edge) + 1.0;
    let is_far = |i: usize, j: usize| {
        approximate && {
            let (a, b) = (points[i], points[j]);
            (a.0 - b.0).hypot(a.1 - b.1) > far
        }
    };
    if dense {
        let mut data = vec![supremum; n * n];
        for (i, row) in rows.iter().enumerate() {
            for &(j, c) in row {
                data[i * n + j] = if is_far(i, j) { supremum } else { c };
            }
        }
        // keep the table symmetric
        for i in 0..n {
            for j in i + 1..n {
                let c = data[i * n + j].min(data[j * n + i]);
                data[i * n + j] = c;
                data[j * n + i] = c;
            }
        }
        return CostTable {
            n,
            dense: Some(data),
            sparse: Vec::new(),
            supremum,
        };
    }
    let mut sparse: Vec<HashMap<u32, f64>> = vec![HashMap::new(); n];
    for (i, row) in rows.iter_mut().enumerate() {
        for &(j, c) in row.iter() {
            if i != j && !is_far(i, j) {
                let e = sparse[i].entry(j as u32).or_insert(c);
                *e = e.min(c);
                let e = sparse[j].entry(i as u32).or_insert(c);
                *e = e.min(c);
            }
        }
    }
    CostTable {
        n,
        dense: None,
        sparse,
        supremum,
    }
}

/// Open tour from `start` over all nodes: nearest neighbor, then 2-opt and
/// Or-opt moves restricted to candidate partners until no move improves or
/// the evaluation budget runs out.
pub fn solve_open_tour(costs: &CostTable, start: usize, cfg: &TspConfig, ops: &mut u64) -> Vec<usize> {
    let n = costs.len();
    if n == 0 {
        return Vec::new();
    }
    let cand = costs.candidates(cfg.neighbors);

    let mut tour = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let mut cur = start;
    used[cur] = true;
    tour.push(cur);
    while tour.len() < n {
        let next = cand[cur].iter().copied().find(|&j| !used[j]).unwrap_or_else(|| {
            *ops += n as u64;
            (0..n)
                .filter(|&j| !used[j])
                .min_by(|&a, &b| costs.cost(cur, a).total_cmp(&costs.cost(cur, b)).then(a.cmp(&b)))
                .expect("unvisited node left")
        });
        used[next] = true;
        tour.push(next);
        cur = next;
    }

    let mut budget = cfg.budget;
    let mut improved = true;
    while improved && budget > 0 {
        improved = two_opt(&mut tour, costs, &cand, &mut budget) | or_opt(&mut tour, costs, &cand, &mut budget);
    }
    *ops += cfg.budget - budget;
    tour
}

fn edge(costs: &CostTable, tour: &[usize], i: usize) -> f64 {
    // cost of the edge leaving position i; the open end is free
    if i + 1 < tour.len() {
        costs.cost(tour[i], tour[i + 1])
    } else {
        0.0
    }
}

fn two_opt(tour: &mut [usize], costs: &CostTable, cand: &[Vec<usize>], budget: &mut u64) -> bool {
    let n = tour.len();
    let mut pos = vec![0; n];
    for (p, &v) in tour.iter().enumerate() {
        pos[v] = p;
    }
    let mut any = false;
    let mut i = 1;
    while i < n {
        let mut moved = false;
        // reversing tour[i..=j] swaps edges (i-1,i),(j,j+1) for (i-1,j),(i,j+1)
        let (a, b) = (tour[i - 1], tour[i]);
        let d_ab = costs.cost(a, b);
        for pass in 0..2 {
            let base = if pass == 0 { a } else { b };
            for &c in &cand[base] {
                if *budget == 0 {
                    return any;
                }
                *budget -= 1;
                let j = if pass == 0 { pos[c] } else { pos[c].wrapping_sub(1) };
                if j <= i || j >= n {
                    continue;
                }
                let old = d_ab + edge(costs, tour, j);
                let new = costs.cost(a, tour[j]) + if j + 1 < n { costs.cost(b, tour[j + 1]) } else { 0.0 };
                if new < old - 1e-9 {
                    tour[i..=j].reverse();
                    for (p, &v) in tour.iter().enumerate().take(j + 1).skip(i) {
                        pos[v] = p;
                    }
                    moved = true;
                    any = true;
                    break;
                }
            }
            if moved {
                break;
            }
        }
        if !moved {
            i += 1;
        }
    }
    any
}

fn or_opt(tour: &mut Vec<usize>, costs: &CostTable, cand: &[Vec<usize>], budget: &mut u64) -> bool {
    let mut any = false;
    let mut pos = vec![0; tour.len()];
    let index = |tour: &[usize], pos: &mut [usize]| {
        for (p, &v) in tour.iter().enumerate() {
            pos[v] = p;
        }
    };
    index(tour, &mut pos);
    for len in 1..=3usize {
        let mut i = 1;
        while i + len <= tour.len() {
            let n = tour.len();
            let seg_end = i + len - 1;
            let (s0, s1) = (tour[i], tour[seg_end]);
            let prev = tour[i - 1];
            let removed = costs.cost(prev, s0) + edge(costs, tour, seg_end)
                - if seg_end + 1 < n { costs.cost(prev, tour[seg_end + 1]) } else { 0.0 };
            let mut best: Option<(f64, usize, bool)> = None;
            for &end in [s0, s1].iter() {
                for &c in &cand[end] {
                    if *budget == 0 {
                        return any;
                    }
                    *budget -= 1;
                    let p = pos[c];
                    if p >= i - 1 && p <= seg_end {
                        continue;
                    }
                    // insert between p and p+1, in either orientation
                    let after = if p + 1 < n { Some(tour[p + 1]) } else { None };
                    for reversed in [false, true] {
                        let (first, last) = if reversed { (s1, s0) } else { (s0, s1) };
                        let added = costs.cost(c, first) + after.map_or(0.0, |q| costs.cost(last, q)) - after.map_or(0.0, |q| costs.cost(c, q));
                        let gain = removed - added;
                        if gain > 1e-9 && best.is_none_or(|b| gain > b.0) {
                            best = Some((gain, p, reversed));
                        }
                    }
                }
            }
            if let Some((_, p, reversed)) = best {
                let mut seg: Vec<usize> = tour.drain(i..=seg_end).collect();
                if reversed {
                    seg.reverse();
                }
                let at = if p > seg_end { p + 1 - len } else { p + 1 };
                tour.splice(at..at, seg);
                index(tour, &mut pos);
                any = true;
            } else {
                i += 1;
            }
        }
    }
    any
}

/// Exhaustive optimum of the open tour from `start` (small instances only).
pub fn brute_force(costs: &CostTable, start: usize) -> (f64, Vec<usize>) {
    let n = costs.len();
    let mut rest: Vec<usize> = (0..n).filter(|&i| i != start).collect();
    let mut best = (f64::INFINITY, Vec::new());
    fn permute(k: usize, rest: &mut Vec<usize>, costs: &CostTable, start: usize, best: &mut (f64, Vec<usize>)) {
        if k == rest.len() {
            let mut tour = vec![start];
            tour.extend_from_slice(rest);
            let c = costs.path_cost(&tour);
            if c < best.0 {
                *best = (c, tour);
            }
            return;
        }
        for i in k..rest.len() {
            rest.swap(k, i);
            permute(k + 1, rest, costs, start, best);
            rest.swap(k, i);
        }
    }
    permute(0, &mut rest, costs, start, &mut best);
    best
}

/// A complete offline plan.
#[derive(Clone, Debug)]
pub struct TspPlan {
    pub grid: CoverageGrid,
    /// Node indices in visiting order.
    pub order: Vec<usize>,
    /// Tour cost under the pair-cost table.
    pub tour_cost: f64,
    pub path: PlannedPath,
    pub ops: u64,
}

/// Tour over every block of `wanted` cells, driven from `start` through
/// `passable` cells.
pub fn plan(passable: &Grid<bool>, wanted: &Grid<bool>, frame: Frame, start: Cell, radius: f64, speed: f64, cfg: &TspConfig) -> TspPlan {
    let mut ops = 0;
    let grid = CoverageGrid::build(passable, wanted, frame, SQRT_2 * radius, radius);
    let (order, tour_cost) = tour_nodes(&grid, passable, start, cfg, &mut ops);
    let mut points = vec![frame.center(start)];
    let mut cur = start;
    for &n in &order {
        let t = grid.nodes[n].target;
        if let Some(leg) = route(passable, &frame, cur, t, &mut ops) {
            points.extend(leg);
            cur = t;
        }
    }
    let points = merge_collinear(&points);
    TspPlan {
        path: PlannedPath::new(points, speed),
        grid,
        order,
        tour_cost,
        ops,
    }
}

/// Tour over the nodes of `grid` reachable from `start`, beginning at the
/// node closest to it along the grid.
fn tour_nodes(grid: &CoverageGrid, passable: &Grid<bool>, start: Cell, cfg: &TspConfig, ops: &mut u64) -> (Vec<usize>, f64) {
    if grid.nodes.is_empty() {
        return (Vec::new(), 0.0);
    }
    let Some(root) = entry_node(grid, passable, start, ops) else {
        return (Vec::new(), 0.0);
    };
    let (adj, reached) = connected_graph(grid, passable, root, ops);
    // restrict to the reachable nodes
    let keep: Vec<usize> = (0..grid.nodes.len()).filter(|&i| reached[i]).collect();
    let mut local = vec![usize::MAX; grid.nodes.len()];
    for (k, &i) in keep.iter().enumerate() {
        local[i] = k;
    }
    let sub: Vec<Vec<(usize, f64)>> = keep
        .iter()
        .map(|&i| adj[i].iter().filter(|e| reached[e.0]).map(|&(j, c)| (local[j], c)).collect())
        .collect();
    let points: Vec<(f64, f64)> = keep.iter().map(|&i| grid.point(i)).collect();
    let diagonal = (passable.width() as f64).hypot(passable.height() as f64) * grid.frame.resolution;
    let costs = pair_costs(&sub, &points, diagonal, cfg, ops);
    let tour = solve_open_tour(&costs, local[root], cfg, ops);
    let cost = costs.path_cost(&tour);
    (tour.into_iter().map(|k| keep[k]).collect(), cost)
}

/// Offline TSP coverage: plans once over the true map.
pub fn offline_controller() -> OfflineController {
    offline_controller_with(TspConfig::default())
}

pub fn offline_controller_with(cfg: TspConfig) -> OfflineController {
    OfflineController::new(
        "tsp-offline",
        Box::new(move |ep: &Episode, passable: &Grid<bool>, start: Cell| {
            let c = ep.config();
            plan(passable, &ep.arena().coverable.reachable_mask, frame_of(ep), start, c.coverage.radius, c.dynamics.v_max, &cfg)
                .path
                .waypoints
                .into_iter()
                .skip(1)
                .collect()
        }),
    )
}

/// Repeatedly tours the blocks the agent has seen so far, from its belief
/// only. Planning time is charged to the episode clock.
pub struct TspOnlineController {
    cfg: TspConfig,
    tracker: Tracker,
    /// Blocks and their targets still to visit, next last.
    queue: Vec<(usize, Cell)>,
    current: Option<(usize, Cell)>,
    visited: Vec<bool>,
    /// Block size in cells, columns and rows.
    layout: (f64, usize, usize),
    cspace: Option<BeliefCspace>,
    mop: Option<MopUp>,
    mopping: bool,
    stuck: u32,
}

impl TspOnlineController {
    pub fn new() -> Self {
        Self::with_config(TspConfig::default())
    }

    pub fn with_config(cfg: TspConfig) -> Self {
        Self {
            cfg,
            tracker: Tracker::default(),
            queue: Vec::new(),
            current: None,
            visited: Vec::new(),
            layout: (1.0, 1, 1),
            cspace: None,
            mop: None,
            mopping: false,
            stuck: 0,
        }
    }

    /// Block containing a fine cell, as laid out by [`CoverageGrid::build`].
    fn block_index(&self, c: Cell) -> usize {
        let (block, cols, rows) = self.layout;
        let col = ((c.0 as f64 - 1.0) / block).floor().clamp(0.0, cols as f64 - 1.0) as usize;
        let row = ((c.1 as f64 - 1.0) / block).floor().clamp(0.0, rows as f64 - 1.0) as usize;
        row * cols + col
    }

    /// Re-routes to the current target over the latest passable cells.
    fn reroute(&mut self, ep: &Episode, passable: &Grid<bool>, ops: &mut u64) {
        self.tracker.clear();
        let Some((_, target)) = self.current else { return };
        let frame = frame_of(ep);
        let leg = nearest_passable(passable, &frame, &ep.perceived_pose()).and_then(|from| {
            let mut pts = vec![frame.center(from)];
            pts.extend(route(passable, &frame, from, target, ops)?);
            Some(pts)
        });
        match leg {
            Some(pts) => self.tracker.set(pts),
            None => self.current = None,
        }
    }

    fn replan(&mut self, ep: &Episode, passable: &Grid<bool>, ops: &mut u64) {
        let cfg = ep.config();
        let frame = frame_of(ep);
        let belief = ep.belief();
        let side = SQRT_2 * cfg.coverage.radius;
        if self.visited.is_empty() {
            let block = side / frame.resolution;
            let tiles = |n: usize| ((n.saturating_sub(2) as f64) / block).ceil().max(1.0) as usize;
            self.layout = (block, tiles(belief.width()), tiles(belief.height()));
            self.visited = vec![false; self.layout.1 * self.layout.2];
        }
        let wanted = Grid::from_fn(belief.width(), belief.height(), |x, y| {
            *belief.obstacles().get(x, y) == Knowledge::Free && !*belief.coverage().get(x, y) && !self.visited[self.block_index((x, y))]
        });
        let Some(start) = nearest_passable(passable, &frame, &ep.perceived_pose()) else {
            return;
        };
        let grid = CoverageGrid::build(passable, &wanted, frame, side, cfg.coverage.radius);
        let (order, _) = tour_nodes(&grid, passable, start, &self.cfg, ops);
        self.queue = order
            .iter()
            .rev()
            .map(|&n| {
                let node = grid.nodes[n];
                (node.row * grid.cols + node.col, node.target)
            })
            .collect();
        // nodes the tour could not reach will not be tried again
        let mut in_tour = vec![false; grid.nodes.len()];
        for &o in &order {
            in_tour[o] = true;
        }
        for (n, _) in grid.nodes.iter().zip(&in_tour).filter(|(_, &t)| !t) {
            self.visited[n.row * grid.cols + n.col] = true;
        }
    }
}

impl Default for TspOnlineController {
    fn default() -> Self {
        Self::new()
    }
}

impl Controller for TspOnlineController {
    fn name(&self) -> &str {
        "tsp-online"
    }

    fn act(&mut self, ep: &Episode) -> Decision {
        let mut ops = 0;
        let dynamics = ep.config().dynamics;
        let belief = ep.belief();
        let pose = ep.perceived_pose();
        let mut cspace = self.cspace.take().unwrap_or_else(|| BeliefCspace::new(belief, dynamics.agent_radius));
        if ep.records().last().is_some_and(|r| r.collided != 0) {
            self.stuck += 1;
            cspace.block_ahead(belief, &pose);
        } else {
            self.stuck = 0;
        }
        if cspace.refresh(belief) && !cspace.clear(&frame_of(ep), &pose, self.tracker.remaining().copied()) {
            if self.mopping {
                self.tracker.clear();
            } else {
                self.reroute(ep, cspace.passable(), &mut ops);
            }
        }
        if self.stuck >= 8 {
            // the target is not where the belief says it is
            self.stuck = 0;
            self.tracker.clear();
            self.current = None;
        }
        let decision = self.next_action(ep, &cspace, &mut ops);
        self.cspace = Some(cspace);
        Decision {
            planning_time: ops as f64 * SECONDS_PER_OP,
            ..decision
        }
    }
}

impl TspOnlineController {
    fn next_action(&mut self, ep: &Episode, cspace: &BeliefCspace, ops: &mut u64) -> Decision {
        let dynamics = ep.config().dynamics;
        let passable = cspace.passable();
        for _ in 0..64 {
            if let Some(a) = self.tracker.command(&ep.perceived_pose(), &dynamics) {
                return Decision::act(a);
            }
            if let Some((b, _)) = self.current.take() {
                self.visited[b] = true;
            }
            if let Some(next) = self.queue.pop() {
                self.mopping = false;
                self.current = Some(next);
                self.reroute(ep, passable, ops);
                continue;
            }
            self.replan(ep, passable, ops);
            if !self.queue.is_empty() {
                continue;
            }
            // nothing new to tour: sweep up leftovers
            self.mopping = true;
            let belief = ep.belief();
            let pending = Grid::from_fn(belief.width(), belief.height(), |x, y| {
                *belief.obstacles().get(x, y) == Knowledge::Free && !*belief.coverage().get(x, y)
            });
            let mop = self.mop.get_or_insert_with(|| MopUp::new(belief.width(), belief.height()));
            let radius = ep.config().coverage.radius / belief.resolution();
            if !mop_up_step(mop, &mut self.tracker, passable, &pending, ep, ops, radius) {
                return Decision::finished();
            }
        }
        Decision::finished()
    }
}
