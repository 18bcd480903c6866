//! Reward terms and episode termination.
//!
//! Total variation of the coverage map is measured in meters: the discrete
//! isotropic TV of the binary grid (a length in cells) times the resolution.
//! That makes the global term dimensionless after dividing by the square root
//! of the covered area, and lets the incremental term be normalized by the
//! largest possible boundary growth per step, twice the travelled distance.

use std::collections::HashSet;
use std::f64::consts::SQRT_2;

use crate::grid::Grid;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RewardConfig {
    pub lambda_area: f64,
    pub lambda_tv_global: f64,
    pub lambda_tv_incremental: f64,
    pub r_collision: f64,
    pub r_constant: f64,
    /// Steps without new coverage before truncation.
    pub tau: u32,
    pub goal_coverage: f64,
}

impl RewardConfig {
    pub fn mowing() -> Self {
        Self {
            lambda_area: 1.0,
            lambda_tv_global: 0.0,
            lambda_tv_incremental: 1.0,
            r_collision: -10.0,
            r_constant: -0.1,
            tau: 1000,
            goal_coverage: 0.99,
        }
    }

    pub fn exploration() -> Self {
        Self {
            lambda_tv_incremental: 0.2,
            ..Self::mowing()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RewardBreakdown {
    pub r_area: f64,
    pub r_tv_g: f64,
    pub r_tv_i: f64,
    pub r_coll: f64,
    pub r_const: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn new(r_area: f64, r_tv_g: f64, r_tv_i: f64, r_coll: f64, r_const: f64) -> Self {
        Self {
            r_area,
            r_tv_g,
            r_tv_i,
            r_coll,
            r_const,
            total: r_area + r_tv_g + r_tv_i + r_coll + r_const,
        }
    }
}

/// Newly covered area normalized by the largest area a disc of radius `r`
/// can sweep in one step.
pub fn area_reward(a_new: f64, agent_radius: f64, v_max: f64, dt: f64, lambda_area: f64) -> f64 {
    lambda_area * a_new / (2.0 * agent_radius * v_max * dt)
}

/// Discrete isotropic total variation, summed over the cells that have both
/// forward neighbors.
pub fn total_variation(x: &Grid<f64>) -> f64 {
    let (w, h) = (x.width(), x.height());
    if w < 2 || h < 2 {
        return 0.0;
    }
    let d = x.data();
    let mut sum = 0.0;
    for j in 0..h - 1 {
        let row = j * w;
        for i in 0..w - 1 {
            let c = d[row + i];
            let dx = d[row + i + 1] - c;
            let dy = d[row + w + i] - c;
            sum += (dx * dx + dy * dy).sqrt();
        }
    }
    sum
}

/// Total variation of a binary map as exact counts: `(n1, n2)` terms with
/// one and with two nonzero differences. The value is `n1 + sqrt(2) * n2`.
pub fn binary_tv_counts(x: &Grid<bool>) -> (u64, u64) {
    let (w, h) = (x.width(), x.height());
    let (mut n1, mut n2) = (0, 0);
    for j in 0..h.saturating_sub(1) {
        for i in 0..w.saturating_sub(1) {
            match term(x, i, j) {
                1 => n1 += 1,
                2 => n2 += 1,
                _ => {}
            }
        }
    }
    (n1, n2)
}

#[inline]
fn term(x: &Grid<bool>, i: usize, j: usize) -> u8 {
    let c = *x.get(i, j);
    (*x.get(i + 1, j) != c) as u8 + (*x.get(i, j + 1) != c) as u8
}

/// Global TV term: boundary length relative to the square root of the
/// covered area; zero before anything is covered.
pub fn tv_global(tv: f64, covered_area: f64, lambda: f64) -> f64 {
    if covered_area <= 0.0 || lambda == 0.0 {
        return 0.0;
    }
    -lambda * tv / covered_area.sqrt()
}

/// Incremental TV term; positive when the boundary shrank.
pub fn tv_incremental(tv: f64, tv_prev: f64, v_max: f64, dt: f64, lambda: f64) -> f64 {
    -lambda * (tv - tv_prev) / (2.0 * v_max * dt)
}

/// Running total variation of a coverage map, updated from the cells covered
/// in each step.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageTv {
    n1: u64,
    n2: u64,
    resolution: f64,
}

impl CoverageTv {
    /// Starts from an arbitrary map (usually all uncovered).
    pub fn new(coverage: &Grid<bool>, resolution: f64) -> Self {
        let (n1, n2) = binary_tv_counts(coverage);
        Self { n1, n2, resolution }
    }

    /// TV in meters.
    pub fn value(&self) -> f64 {
        (self.n1 as f64 + SQRT_2 * self.n2 as f64) * self.resolution
    }

    pub fn counts(&self) -> (u64, u64) {
        (self.n1, self.n2)
    }

    /// Accounts for `new_cells` (grid indices) that have just been set in
    /// `coverage`. Only terms touching a new cell can change.
    pub fn apply(&mut self, coverage: &Grid<bool>, new_cells: &[usize]) {
        if new_cells.is_empty() {
            return;
        }
        let (w, h) = (coverage.width(), coverage.height());
        let fresh: HashSet<usize> = new_cells.iter().copied().collect();
        let mut positions = HashSet::with_capacity(3 * new_cells.len());
        for &c in new_cells {
            let (x, y) = coverage.coords(c);
            positions.insert((x, y));
            if x > 0 {
                positions.insert((x - 1, y));
            }
            if y > 0 {
                positions.insert((x, y - 1));
            }
        }
        let before = |x: usize, y: usize| {
            let i = y * w + x;
            coverage.data()[i] && !fresh.contains(&i)
        };
        let (mut n1, mut n2) = (self.n1 as i64, self.n2 as i64);
        for (x, y) in positions {
            if x + 1 >= w || y + 1 >= h {
                continue;
            }
            let c = before(x, y);
            let old = (before(x + 1, y) != c) as u8 + (before(x, y + 1) != c) as u8;
            let new = term(coverage, x, y);
            for (t, sign) in [(old, -1), (new, 1)] {
                match t {
                    1 => n1 += sign,
                    2 => n2 += sign,
                    _ => {}
                }
            }
        }
        self.n1 = n1 as u64;
        self.n2 = n2 as u64;
    }
}

/// Inputs of one step's reward.
#[derive(Clone, Copy, Debug)]
pub struct StepContext {
    pub a_new: f64,
    pub covered_area: f64,
    pub tv: f64,
    pub tv_prev: f64,
    pub collided: bool,
    pub agent_radius: f64,
    pub v_max: f64,
    pub dt: f64,
}

pub fn step_reward(ctx: &StepContext, cfg: &RewardConfig) -> RewardBreakdown {
    RewardBreakdown::new(
        area_reward(ctx.a_new, ctx.agent_radius, ctx.v_max, ctx.dt, cfg.lambda_area),
        tv_global(ctx.tv, ctx.covered_area, cfg.lambda_tv_global),
        tv_incremental(ctx.tv, ctx.tv_prev, ctx.v_max, ctx.dt, cfg.lambda_tv_incremental),
        if ctx.collided { cfg.r_collision } else { 0.0 },
        cfg.r_constant,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Termination {
    Continue,
    GoalReached,
    Truncated,
}

/// Goal first: an episode that reaches the goal on its last allowed step
/// counts as a success.
pub fn check_termination(coverage_fraction: f64, cfg: &RewardConfig, steps_since_new: u32) -> Termination {
    if coverage_fraction >= cfg.goal_coverage {
        Termination::GoalReached
    } else if steps_since_new >= cfg.tau {
        Termination::Truncated
    } else {
        Termination::Continue
    }
}
