//! Nearest-frontier exploration: drive to the closest reachable cell next to
//! the edge of the sensed region, measured along the belief C-space.

use super::astar::{Cell, Dijkstra};
use super::{frame_of, mop_up_step, BeliefCspace, MopUp, Tracker, SECONDS_PER_OP};
use crate::episode::{Controller, Decision, Episode};
use crate::grid::{distance_transform, Grid};
use crate::worldmodel::clearance_cells;

#[derive(Clone, Debug, PartialEq)]
pub struct FrontierGoal {
    pub cell: Cell,
    /// Cells after the start up to the goal.
    pub path: Vec<Cell>,
    /// Path length in cells.
    pub cost: f64,
}

/// Closest passable cell within `reach` cells of a frontier cell (`reach`
/// 0 means on the frontier itself). `None` when no frontier is reachable.
pub fn nearest_frontier(passable: &Grid<bool>, frontier: &Grid<bool>, from: Cell, reach: f64) -> Option<FrontierGoal> {
    if frontier.count_true() == 0 {
        return None;
    }
    let near = distance_transform(frontier);
    let (d, hit) = Dijkstra::run(passable, from, f64::INFINITY, |i| {
        if reach <= 0.0 {
            frontier.data()[i]
        } else {
            near.data()[i] < reach
        }
    });
    let hit = hit?;
    Some(FrontierGoal {
        cell: passable.coords(hit),
        path: d.path_to(passable, hit),
        cost: d.cost[hit],
    })
}

/// Online frontier explorer working from the belief only.
pub struct FrontierController {
    tracker: Tracker,
    cspace: Option<BeliefCspace>,
    mop: Option<MopUp>,
    stuck: u32,
}

impl FrontierController {
    pub fn new() -> Self {
        Self {
            tracker: Tracker::default(),
            cspace: None,
            mop: None,
            stuck: 0,
        }
    }
}

impl Default for FrontierController {
    fn default() -> Self {
        Self::new()
    }
}

impl Controller for FrontierController {
    fn name(&self) -> &str {
        "frontier"
    }

    fn act(&mut self, ep: &Episode) -> Decision {
        let mut ops = 0;
        let cfg = ep.config();
        let belief = ep.belief();
        let pose = ep.perceived_pose();
        let cspace = self.cspace.get_or_insert_with(|| BeliefCspace::new(belief, cfg.dynamics.agent_radius));
        if ep.records().last().is_some_and(|r| r.collided != 0) {
            self.stuck += 1;
            cspace.block_ahead(belief, &pose);
        } else {
            self.stuck = 0;
        }
        if (cspace.refresh(belief) && !cspace.clear(&frame_of(ep), &pose, self.tracker.remaining().copied())) || self.stuck >= 8 {
            self.stuck = 0;
            self.tracker.clear();
        }
        let mut decision = Decision::finished();
        for _ in 0..64 {
            if let Some(a) = self.tracker.command(&pose, &cfg.dynamics) {
                decision = Decision::act(a);
                break;
            }
            let frontier = belief.frontier_cells();
            let mop = self.mop.get_or_insert_with(|| MopUp::new(belief.width(), belief.height()));
            // a goal counts once the agent's body would touch the frontier
            let reach = clearance_cells(cfg.dynamics.agent_radius, belief.resolution()) + 1.0;
            if !mop_up_step(mop, &mut self.tracker, cspace.passable(), &frontier, ep, &mut ops, reach) {
                break;
            }
        }
        decision.planning_time = ops as f64 * SECONDS_PER_OP;
        decision
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_frontier_means_done() {
        let g = Grid::new(5, 5, true);
        assert!(nearest_frontier(&g, &Grid::new(5, 5, false), (0, 0), 0.0).is_none());
    }

    #[test]
    fn picks_the_closer_frontier() {
        let g = Grid::new(100, 3, true);
        let mut f = Grid::new(100, 3, false);
        f.set(30, 1, true);
        f.set(60, 1, true);
        let goal = nearest_frontier(&g, &f, (50, 1), 0.0).unwrap();
        assert_eq!(goal.cell, (60, 1));
        assert_eq!(goal.cost, 10.0);
        // a wall makes the geometric nearest one the far one by path
        let mut g = g;
        g.set(55, 0, false);
        g.set(55, 1, false);
        g.set(55, 2, false);
        assert_eq!(nearest_frontier(&g, &f, (50, 1), 0.0).unwrap().cell, (30, 1));
    }
}
