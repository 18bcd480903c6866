//! Differential-drive motion with optional acceleration limits and action
//! delay, integrated in fixed 10 ms substeps.

use std::collections::VecDeque;

use crate::worldmodel::{wrap_angle, CollisionCheck, Pose};

/// Target substep length in seconds; each step uses `round(dt / SUBSTEP)`
/// equal substeps (at least one).
pub const SUBSTEP: f64 = 0.01;

const TIME_EPS: f64 = 1e-9;
const CONTACT_ITERATIONS: usize = 32;

/// Normalized action; both components live in [-1, 1].
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Action {
    pub linear: f64,
    pub angular: f64,
}

impl Action {
    pub const ZERO: Action = Action { linear: 0.0, angular: 0.0 };

    /// Clamps both components into [-1, 1]; NaN becomes 0.
    pub fn new(linear: f64, angular: f64) -> Self {
        let clamp = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
        Self {
            linear: clamp(linear),
            angular: clamp(angular),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DynamicsConfig {
    pub v_max: f64,
    pub w_max: f64,
    /// Linear acceleration limit, m/s^2; infinite for first-order motion.
    pub a_lin_max: f64,
    /// Angular acceleration limit, rad/s^2; infinite for first-order motion.
    pub a_ang_max: f64,
    /// Seconds between issuing an action and it taking effect.
    pub action_delay: f64,
    pub dt: f64,
    pub wheel_radius: f64,
    pub wheel_base: f64,
    pub agent_radius: f64,
}

impl DynamicsConfig {
    /// Instantaneous velocity changes, no delay.
    pub fn first_order(v_max: f64, w_max: f64, dt: f64, agent_radius: f64) -> Self {
        Self {
            v_max,
            w_max,
            a_lin_max: f64::INFINITY,
            a_ang_max: f64::INFINITY,
            action_delay: 0.0,
            dt,
            wheel_radius: 0.1225,
            wheel_base: 0.465,
            agent_radius,
        }
    }

    /// Limits measured on the physical mower.
    pub fn higher_order(v_max: f64, w_max: f64, dt: f64, agent_radius: f64) -> Self {
        Self {
            a_lin_max: 0.5,
            a_ang_max: 2.0,
            action_delay: 0.05,
            ..Self::first_order(v_max, w_max, dt, agent_radius)
        }
    }

    pub fn is_first_order(&self) -> bool {
        self.a_lin_max.is_infinite() && self.a_ang_max.is_infinite() && self.action_delay == 0.0
    }

    pub fn substeps(&self) -> usize {
        ((self.dt / SUBSTEP).round() as usize).max(1)
    }
}

/// Commanded velocities for a normalized action.
pub fn denormalize(action: &Action, cfg: &DynamicsConfig) -> (f64, f64) {
    let a = Action::new(action.linear, action.angular);
    (a.linear * cfg.v_max, a.angular * cfg.w_max)
}

/// Right and left wheel angular velocities for a body twist.
pub fn wheel_speeds(v: f64, w: f64, wheel_radius: f64, wheel_base: f64) -> (f64, f64) {
    let turn = w * wheel_base / (2.0 * wheel_radius);
    (v / wheel_radius + turn, v / wheel_radius - turn)
}

/// Pose after driving the constant twist `(v, w)` for `h` seconds.
pub fn arc(pose: &Pose, v: f64, w: f64, h: f64) -> Pose {
    let half = 0.5 * w * h;
    // sin(x)/x, with the series near zero
    let sinc = if half.abs() < 1e-6 {
        1.0 - half * half / 6.0
    } else {
        half.sin() / half
    };
    let chord = v * h * sinc;
    let mid = pose.heading + half;
    Pose::new(pose.x + chord * mid.cos(), pose.y + chord * mid.sin(), pose.heading + w * h)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsState {
    pub pose: Pose,
    pub v: f64,
    pub w: f64,
    /// Simulated seconds since reset.
    pub time: f64,
    steps: u64,
    command: Action,
    pending: VecDeque<(f64, Action)>,
}

impl DynamicsState {
    pub fn new(pose: Pose) -> Self {
        Self {
            pose,
            v: 0.0,
            w: 0.0,
            time: 0.0,
            steps: 0,
            command: Action::ZERO,
            pending: VecDeque::new(),
        }
    }

    /// Action currently driving the wheels.
    pub fn active_command(&self) -> Action {
        self.command
    }

    pub fn pending_actions(&self) -> usize {
        self.pending.len()
    }
}

/// What happened during one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    /// Pose at the end of every substep, in order.
    pub path: Vec<Pose>,
    /// Whether any substep was cut short by contact.
    pub collided: bool,
    /// Distance travelled by the agent center (sum of substep chords).
    pub distance: f64,
}

fn approach(current: f64, target: f64, max_delta: f64) -> f64 {
    if max_delta.is_infinite() {
        target
    } else {
        current + (target - current).clamp(-max_delta, max_delta)
    }
}

/// Advances the state by one step of `cfg.dt`.
///
/// The action is queued with activation time `time + action_delay`. In every
/// substep the latest activated action sets the commanded twist, velocities
/// move toward it under the acceleration limits, and the pose follows the
/// exact arc. If the arc ends in collision the translation is cut at the
/// contact point (binary search along the arc), the rotation is kept and the
/// linear velocity drops to zero.
pub fn step(state: &mut DynamicsState, action: Action, cfg: &DynamicsConfig, world: &impl CollisionCheck) -> StepOutcome {
    let action = Action::new(action.linear, action.angular);
    state.pending.push_back((state.time + cfg.action_delay, action));
    let n = cfg.substeps();
    let h = cfg.dt / n as f64;
    let step_start = state.steps as f64 * cfg.dt;
    let mut out = StepOutcome {
        path: Vec::with_capacity(n),
        collided: false,
        distance: 0.0,
    };
    for k in 0..n {
        let now = step_start + k as f64 * h;
        while state.pending.front().is_some_and(|&(at, _)| at <= now + TIME_EPS) {
            state.command = state.pending.pop_front().expect("front exists").1;
        }
        let (v_cmd, w_cmd) = denormalize(&state.command, cfg);
        state.v = approach(state.v, v_cmd, cfg.a_lin_max * h).clamp(-cfg.v_max, cfg.v_max);
        state.w = approach(state.w, w_cmd, cfg.a_ang_max * h).clamp(-cfg.w_max, cfg.w_max);

        let start = state.pose;
        let mut next = arc(&start, state.v, state.w, h);
        if !world.is_free(next.x, next.y) {
            out.collided = true;
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..CONTACT_ITERATIONS {
                let mid = 0.5 * (lo + hi);
                let p = arc(&start, state.v, state.w, mid * h);
                if world.is_free(p.x, p.y) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let contact = arc(&start, state.v, state.w, lo * h);
            next = Pose::new(contact.x, contact.y, wrap_angle(start.heading + state.w * h));
            state.v = 0.0;
        }
        out.distance += (next.x - start.x).hypot(next.y - start.y);
        state.pose = next;
        out.path.push(next);
    }
    state.steps += 1;
    state.time = state.steps as f64 * cfg.dt;
    out
}
