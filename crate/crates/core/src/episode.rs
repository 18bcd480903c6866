//! The environment loop: reset, step, controllers and the flat binding used
//! by external trainers.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{BeliefState, CoverageSpec};
use crate::dynamics::{self, Action, DynamicsConfig, DynamicsState};
use crate::lidar::{cast_rays, perturb, LidarConfig, LidarScan, NoiseConfig};
use crate::obsbuilder::{build_observation, MultiScaleConfig, MultiScaleObservation};
use crate::reward::{check_termination, step_reward, CoverageTv, RewardBreakdown, RewardConfig, StepContext, Termination};
use crate::worldmodel::{coverable_space, largest_component, ConfigSpace, FreeSpaceIndex, Pose, WorldMap};

/// Number of actions kept in higher-order observations.
pub const HIGHER_ORDER_HISTORY: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Mowing,
    Exploration,
    ExplorationNonOmni,
}

impl Task {
    pub fn coverage_radius(self) -> f64 {
        match self {
            Task::Mowing => 0.15,
            Task::Exploration => 7.0,
            Task::ExplorationNonOmni => 3.5,
        }
    }

    pub fn agent_radius(self) -> f64 {
        match self {
            Task::Exploration => 0.08,
            _ => 0.15,
        }
    }

    pub fn v_max(self) -> f64 {
        match self {
            Task::Exploration => 0.5,
            _ => 0.26,
        }
    }

    pub fn lidar(self) -> LidarConfig {
        match self {
            Task::Mowing => LidarConfig::mowing(),
            Task::Exploration => LidarConfig::exploration_omni(),
            Task::ExplorationNonOmni => LidarConfig::exploration_non_omni(),
        }
    }

    /// Field of view that bounds sensed coverage.
    pub fn coverage_fov(self) -> f64 {
        self.lidar().fov
    }

    pub fn is_mowing(self) -> bool {
        self == Task::Mowing
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Mowing => "mowing",
            Task::Exploration => "exploration",
            Task::ExplorationNonOmni => "exploration-non-omni",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mowing" => Ok(Task::Mowing),
            "exploration" | "exploration-omni" => Ok(Task::Exploration),
            "exploration-non-omni" => Ok(Task::ExplorationNonOmni),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub task: Task,
    pub lidar: LidarConfig,
    pub dynamics: DynamicsConfig,
    pub reward: RewardConfig,
    pub noise: NoiseConfig,
    pub observation: MultiScaleConfig,
    pub coverage: CoverageSpec,
    /// Actions carried in the observation.
    pub history: usize,
    pub max_steps: u32,
}

impl EpisodeConfig {
    /// First-order simulation preset for a task.
    pub fn for_task(task: Task) -> Self {
        let r = task.agent_radius();
        let reward = match task {
            Task::Mowing => RewardConfig::mowing(),
            _ => RewardConfig::exploration(),
        };
        let max_steps = 10 * reward.tau;
        Self {
            task,
            lidar: task.lidar(),
            dynamics: DynamicsConfig::first_order(task.v_max(), 1.0, 0.5, r),
            reward,
            noise: NoiseConfig::none(),
            observation: MultiScaleConfig::default(),
            coverage: CoverageSpec::for_radii(task.coverage_radius(), r, task.coverage_fov()),
            history: 0,
            max_steps,
        }
    }

    /// Acceleration limits, action delay and an action history.
    pub fn higher_order(mut self) -> Self {
        let d = &self.dynamics;
        self.dynamics = DynamicsConfig::higher_order(d.v_max, d.w_max, d.dt, d.agent_radius);
        self.history = HIGHER_ORDER_HISTORY;
        self
    }
}

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("stepping an episode that has already finished")]
    SteppingFinishedEpisode,
    #[error("map has no cell with enough clearance for the agent")]
    NoFreeSpace,
}

/// Per-map precomputation shared by every episode on that map.
#[derive(Clone, Debug)]
pub struct Arena {
    pub world: Arc<WorldMap>,
    pub cspace: Arc<ConfigSpace>,
    /// Largest connected region of the configuration space; starts are drawn
    /// from it.
    pub reachable: FreeSpaceIndex,
    /// Cells that count toward coverage.
    pub coverable: FreeSpaceIndex,
    start_cells: Vec<usize>,
}

impl Arena {
    pub fn new(world: Arc<WorldMap>, cfg: &EpisodeConfig) -> Result<Self, EpisodeError> {
        let cspace = ConfigSpace::new(&world, cfg.dynamics.agent_radius);
        let mask = largest_component(&cspace).ok_or(EpisodeError::NoFreeSpace)?;
        let count = mask.count_true();
        let reachable = FreeSpaceIndex {
            reachable_area: count as f64 * world.resolution() * world.resolution(),
            cell_count: count,
            reachable_mask: mask,
        };
        let coverable = coverable_space(&world, &reachable, cfg.coverage.radius, cfg.coverage.line_of_sight);
        let start_cells = (0..reachable.reachable_mask.len())
            .filter(|&i| reachable.reachable_mask.data()[i])
            .collect();
        Ok(Self {
            world,
            cspace: Arc::new(cspace),
            reachable,
            coverable,
            start_cells,
        })
    }

    /// Uniform over reachable cell centers, uniform heading.
    pub fn sample_start<R: Rng + ?Sized>(&self, rng: &mut R) -> Pose {
        let i = self.start_cells[rng.random_range(0..self.start_cells.len())];
        let (x, y) = self.reachable.reachable_mask.coords(i);
        let (cx, cy) = self.world.cell_center(x, y);
        Pose::new(cx, cy, rng.random_range(-PI..PI))
    }
}

/// One line of the episode log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Simulated seconds, including any planning pauses.
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub a_v: f64,
    pub a_w: f64,
    #[serde(rename = "A_new")]
    pub a_new: f64,
    pub r_area: f64,
    pub r_tv_g: f64,
    pub r_tv_i: f64,
    pub r_coll: f64,
    pub r_const: f64,
    pub r_total: f64,
    pub collided: u8,
    pub coverage: f64,
}

impl StepRecord {
    pub fn rewards(&self) -> RewardBreakdown {
        RewardBreakdown {
            r_area: self.r_area,
            r_tv_g: self.r_tv_g,
            r_tv_i: self.r_tv_i,
            r_coll: self.r_coll,
            r_const: self.r_const,
            total: self.r_total,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Running,
    GoalReached,
    Truncated,
    StepLimit,
}

impl Status {
    pub fn is_done(self) -> bool {
        self != Status::Running
    }
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub reward: RewardBreakdown,
    pub status: Status,
    pub record: StepRecord,
    pub new_cells: Vec<usize>,
    pub distance: f64,
}

/// A running episode on one map.
#[derive(Clone, Debug)]
pub struct Episode {
    cfg: EpisodeConfig,
    arena: Arc<Arena>,
    rng: ChaCha8Rng,
    dynamics: DynamicsState,
    belief: BeliefState,
    tv: CoverageTv,
    history: VecDeque<Action>,
    /// Pose and scan as perceived by the agent.
    perceived_pose: Pose,
    scan: LidarScan,
    covered_coverable: usize,
    steps: u32,
    pause: f64,
    status: Status,
    records: Vec<StepRecord>,
}

impl Episode {
    /// Resets onto `arena` with a start drawn from `seed`.
    pub fn new(cfg: EpisodeConfig, arena: Arc<Arena>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = arena.sample_start(&mut rng);
        Self::with_start(cfg, arena, start, rng)
    }

    /// Resets with an explicit start pose; noise is drawn from `rng`.
    pub fn with_start(cfg: EpisodeConfig, arena: Arc<Arena>, start: Pose, rng: ChaCha8Rng) -> Self {
        let world = arena.world.clone();
        let belief = BeliefState::new(&world);
        let tv = CoverageTv::new(belief.coverage(), world.resolution());
        let scan = LidarScan {
            ranges: vec![cfg.lidar.max_range; cfg.lidar.n_rays],
            hits: vec![false; cfg.lidar.n_rays],
            max_range: cfg.lidar.max_range,
        };
        let history = std::iter::repeat_n(Action::ZERO, cfg.history).collect();
        let mut ep = Self {
            dynamics: DynamicsState::new(start),
            belief,
            tv,
            history,
            perceived_pose: start,
            scan,
            covered_coverable: 0,
            steps: 0,
            pause: 0.0,
            status: Status::Running,
            records: Vec::new(),
            rng,
            arena,
            cfg,
        };
        ep.sense();
        // the footprint at the start pose is covered before the first action
        let update = ep.belief.update_coverage(&[start], &ep.cfg.coverage, &ep.arena.world);
        ep.tv.apply(ep.belief.coverage(), &update.new_cells);
        ep.count_coverable(&update.new_cells);
        ep.belief.steps_since_new_coverage = 0;
        ep.records.push(StepRecord {
            t: 0.0,
            x: start.x,
            y: start.y,
            heading: start.heading,
            a_v: 0.0,
            a_w: 0.0,
            a_new: update.area,
            r_area: 0.0,
            r_tv_g: 0.0,
            r_tv_i: 0.0,
            r_coll: 0.0,
            r_const: 0.0,
            r_total: 0.0,
            collided: 0,
            coverage: ep.coverage_fraction(),
        });
        if check_termination(ep.coverage_fraction(), &ep.cfg.reward, 0) == Termination::GoalReached {
            ep.status = Status::GoalReached;
        }
        ep
    }

    fn sense(&mut self) {
        let truth = self.dynamics.pose;
        let scan = cast_rays(&self.arena.world, &truth, &self.cfg.lidar).expect("agent stays inside the map");
        let (pose, scan) = perturb(&truth, &scan, &self.cfg.noise, &mut self.rng);
        self.belief.integrate_scan(&pose, &scan, &self.cfg.lidar);
        self.perceived_pose = pose;
        self.scan = scan;
    }

    fn count_coverable(&mut self, cells: &[usize]) {
        let mask = self.arena.coverable.reachable_mask.data();
        self.covered_coverable += cells.iter().filter(|&&i| mask[i]).count();
    }

    /// Executes one action for one step.
    pub fn step(&mut self, action: Action) -> Result<StepResult, EpisodeError> {
        if self.status.is_done() {
            return Err(EpisodeError::SteppingFinishedEpisode);
        }
        let action = Action::new(action.linear, action.angular);
        let outcome = dynamics::step(&mut self.dynamics, action, &self.cfg.dynamics, self.arena.cspace.as_ref());
        self.sense();
        let update = self.belief.update_coverage(&outcome.path, &self.cfg.coverage, &self.arena.world);
        let tv_prev = self.tv.value();
        self.tv.apply(self.belief.coverage(), &update.new_cells);
        self.count_coverable(&update.new_cells);
        self.steps += 1;
        if self.cfg.history > 0 {
            self.history.pop_front();
            self.history.push_back(action);
        }

        let d = &self.cfg.dynamics;
        let reward = step_reward(
            &StepContext {
                a_new: update.area,
                covered_area: self.belief.covered_area(),
                tv: self.tv.value(),
                tv_prev,
                collided: outcome.collided,
                agent_radius: d.agent_radius,
                v_max: d.v_max,
                dt: d.dt,
            },
            &self.cfg.reward,
        );
        let fraction = self.coverage_fraction();
        self.status = match check_termination(fraction, &self.cfg.reward, self.belief.steps_since_new_coverage) {
            Termination::GoalReached => Status::GoalReached,
            Termination::Truncated => Status::Truncated,
            Termination::Continue if self.steps >= self.cfg.max_steps => Status::StepLimit,
            Termination::Continue => Status::Running,
        };
        let pose = self.dynamics.pose;
        let record = StepRecord {
            t: self.time(),
            x: pose.x,
            y: pose.y,
            heading: pose.heading,
            a_v: action.linear,
            a_w: action.angular,
            a_new: update.area,
            r_area: reward.r_area,
            r_tv_g: reward.r_tv_g,
            r_tv_i: reward.r_tv_i,
            r_coll: reward.r_coll,
            r_const: reward.r_const,
            r_total: reward.total,
            collided: outcome.collided as u8,
            coverage: fraction,
        };
        self.records.push(record.clone());
        Ok(StepResult {
            reward,
            status: self.status,
            record,
            new_cells: update.new_cells,
            distance: outcome.distance,
        })
    }

    /// Lets simulated time pass without moving, e.g. while a planner runs.
    pub fn pause(&mut self, seconds: f64) {
        if seconds > 0.0 {
            self.pause += seconds;
        }
    }

    /// Simulated seconds since reset.
    pub fn time(&self) -> f64 {
        self.steps as f64 * self.cfg.dynamics.dt + self.pause
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.cfg
    }

    pub fn arena(&self) -> &Arena {
        &self.arena
    }

    pub fn world(&self) -> &WorldMap {
        &self.arena.world
    }

    pub fn belief(&self) -> &BeliefState {
        &self.belief
    }

    /// Ground-truth pose.
    pub fn pose(&self) -> Pose {
        self.dynamics.pose
    }

    /// Pose as perceived by the agent (noisy when noise is on).
    pub fn perceived_pose(&self) -> Pose {
        self.perceived_pose
    }

    pub fn dynamics_state(&self) -> &DynamicsState {
        &self.dynamics
    }

    pub fn scan(&self) -> &LidarScan {
        &self.scan
    }

    /// Current total variation of the coverage map, meters.
    pub fn total_variation(&self) -> f64 {
        self.tv.value()
    }

    /// Covered share of the coverable area.
    pub fn coverage_fraction(&self) -> f64 {
        let total = self.arena.coverable.cell_count;
        if total == 0 {
            1.0
        } else {
            self.covered_coverable as f64 / total as f64
        }
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<StepRecord> {
        self.records
    }

    /// Observation of the current step.
    pub fn observation(&self) -> MultiScaleObservation {
        let history: Vec<Action> = self.history.iter().copied().collect();
        build_observation(&self.belief, &self.perceived_pose, &self.scan, &self.cfg.observation, &history)
    }
}

/// What a controller wants to do next.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub action: Action,
    /// Simulated seconds spent planning before the action is issued.
    pub planning_time: f64,
    /// The controller has nothing left to do.
    pub finished: bool,
}

impl Decision {
    pub fn act(action: Action) -> Self {
        Self {
            action,
            planning_time: 0.0,
            finished: false,
        }
    }

    pub fn finished() -> Self {
        Self {
            action: Action::ZERO,
            planning_time: 0.0,
            finished: true,
        }
    }
}

/// Anything that drives an episode: classical planners and learned
/// policies alike.
pub trait Controller {
    fn name(&self) -> &str;

    fn act(&mut self, episode: &Episode) -> Decision;
}

/// How an episode driven by a controller ended.
#[derive(Clone, Debug)]
pub struct EpisodeOutcome {
    pub status: Status,
    /// The controller gave up before the episode ended.
    pub controller_finished: bool,
    pub records: Vec<StepRecord>,
    pub coverage: f64,
    pub reachable_area: f64,
}

/// Runs a controller until the episode ends or the controller stops.
pub fn run_episode(mut episode: Episode, controller: &mut dyn Controller) -> EpisodeOutcome {
    let mut controller_finished = false;
    while !episode.status().is_done() {
        let decision = controller.act(&episode);
        if decision.finished {
            controller_finished = true;
            break;
        }
        episode.pause(decision.planning_time);
        episode.step(decision.action).expect("episode still running");
    }
    EpisodeOutcome {
        status: episode.status(),
        controller_finished,
        coverage: episode.coverage_fraction(),
        reachable_area: episode.arena().coverable.reachable_area,
        records: episode.into_records(),
    }
}

/// Uniformly random actions.
pub struct RandomController {
    rng: ChaCha8Rng,
}

impl RandomController {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Controller for RandomController {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&mut self, _episode: &Episode) -> Decision {
        Decision::act(Action::new(self.rng.random_range(-1.0..=1.0), self.rng.random_range(-1.0..=1.0)))
    }
}

/// Flat-buffer environment surface for external trainers: observations are
/// the float payload of the observation dump format.
pub struct EnvBinding {
    cfg: EpisodeConfig,
    arena: Arc<Arena>,
    episode: Option<Episode>,
}

/// Result of [`EnvBinding::step`].
#[derive(Clone, Debug, PartialEq)]
pub struct EnvStep {
    pub observation: Vec<f32>,
    pub reward: f32,
    pub terminated: bool,
    pub truncated: bool,
}

impl EnvBinding {
    pub fn new(cfg: EpisodeConfig, world: Arc<WorldMap>) -> Result<Self, EpisodeError> {
        let arena = Arc::new(Arena::new(world, &cfg)?);
        Ok(Self {
            cfg,
            arena,
            episode: None,
        })
    }

    /// Length of every observation buffer.
    pub fn observation_len(&self) -> usize {
        self.cfg.observation.map_values() + self.cfg.lidar.n_rays + 2 * self.cfg.history
    }

    pub fn reset(&mut self, seed: u64) -> Vec<f32> {
        let ep = Episode::new(self.cfg.clone(), self.arena.clone(), seed);
        let obs = ep.observation().to_flat();
        self.episode = Some(ep);
        obs
    }

    /// Steps with a raw `[a_v, a_w]` action. Goal completion terminates; the
    /// no-progress rule and the step cap truncate.
    pub fn step(&mut self, action: [f32; 2]) -> Result<EnvStep, EpisodeError> {
        let ep = self.episode.as_mut().ok_or(EpisodeError::SteppingFinishedEpisode)?;
        let r = ep.step(Action::new(action[0] as f64, action[1] as f64))?;
        Ok(EnvStep {
            observation: ep.observation().to_flat(),
            reward: r.reward.total as f32,
            terminated: r.status == Status::GoalReached,
            truncated: matches!(r.status, Status::Truncated | Status::StepLimit),
        })
    }

    pub fn episode(&self) -> Option<&Episode> {
        self.episode.as_ref()
    }
}
