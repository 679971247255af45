//! Cart-pole simulation: classic dynamics, plain Euler integration.
//!
//! Observation is the full state `[x, v, theta, omega]`. Force is +-10 N,
//! the step size is 0.02 s, and an episode ends when the cart leaves
//! `|x| <= 2.4`, the pole leaves `|theta| <= 0.2095`, or 500 steps elapse.
//! Reward is 1 per step and 0 on the step that breaches a limit; the
//! `reward_on_termination` flag switches that final step back to 1 for
//! compatibility with the common reference implementation.

use rand::distributions::Open01;
use rand::Rng;

use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
/// Half-length of the pole.
pub const POLE_LENGTH: f64 = 0.5;
pub const FORCE_MAG: f64 = 10.0;
/// Integration step, seconds.
pub const TAU: f64 = 0.02;

pub const POSITION_LIMIT: f64 = 2.4;
pub const ANGLE_LIMIT: f64 = 0.2095;
pub const MAX_EPISODE_STEPS: u32 = 500;
/// Initial-state components are drawn uniformly from the open interval
/// (-RESET_BOUND, RESET_BOUND).
pub const RESET_BOUND: f64 = 0.05;

/// Full physical state of the cart-pole system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartState {
    /// Cart position, m.
    pub x: f64,
    /// Cart velocity, m/s.
    pub v: f64,
    /// Pole angle, rad (0 = upright).
    pub theta: f64,
    /// Pole angular velocity, rad/s.
    pub omega: f64,
}

impl CartState {
    /// The observation vector `[x, v, theta, omega]`; the task is fully
    /// observed, so this is the identity projection.
    pub fn observe(&self) -> [f64; 4] {
        [self.x, self.v, self.theta, self.omega]
    }

    /// The state reflected through the track origin.
    pub fn mirrored(&self) -> CartState {
        CartState {
            x: -self.x,
            v: -self.v,
            theta: -self.theta,
            omega: -self.omega,
        }
    }
}

/// The two discrete actions: push the cart left or right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Left = 0,
    Right = 1,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Action> {
        match index {
            0 => Some(Action::Left),
            1 => Some(Action::Right),
            _ => None,
        }
    }

    pub fn mirrored(self) -> Action {
        match self {
            Action::Left => Action::Right,
            Action::Right => Action::Left,
        }
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: CartState,
    /// 0 or 1.
    pub reward: f64,
    /// A position or angle limit was breached.
    pub terminated: bool,
    /// The 500-step cap was reached without a breach.
    pub truncated: bool,
}

impl StepOutcome {
    pub fn episode_over(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnvConfig {
    /// When true the limit-breaching step still pays reward 1 (reference
    /// behaviour); when false it pays 0.
    pub reward_on_termination: bool,
}

/// Maps four unit-interval uniforms onto an initial state. Split out from
/// [`CartPole::reset`] so the affine map can be checked directly.
pub fn state_from_unit_uniforms(u: [f64; 4]) -> CartState {
    let spread = |u: f64| -RESET_BOUND + (2.0 * RESET_BOUND) * u;
    CartState {
        x: spread(u[0]),
        v: spread(u[1]),
        theta: spread(u[2]),
        omega: spread(u[3]),
    }
}

/// One Euler step of the cart-pole equations of motion.
///
/// Accelerations follow the standard formulation (pole pivoting on a
/// frictionless cart):
///
/// ```text
/// temp      = (F + m_p l w^2 sin t) / M
/// theta_acc = (g sin t - cos t * temp) / (l (4/3 - m_p cos^2 t / M))
/// x_acc     = temp - m_p l theta_acc cos t / M
/// ```
///
/// Positions integrate with the pre-step velocities (plain Euler, not
/// semi-implicit).
pub fn step_dynamics(state: &CartState, action: Action) -> CartState {
    let force = match action {
        Action::Left => -FORCE_MAG,
        Action::Right => FORCE_MAG,
    };
    let total_mass = CART_MASS + POLE_MASS;
    let pole_mass_length = POLE_MASS * POLE_LENGTH;

    let cos_theta = state.theta.cos();
    let sin_theta = state.theta.sin();

    let temp = (force + pole_mass_length * state.omega * state.omega * sin_theta) / total_mass;
    let theta_acc = (GRAVITY * sin_theta - cos_theta * temp)
        / (POLE_LENGTH * (4.0 / 3.0 - POLE_MASS * cos_theta * cos_theta / total_mass));
    let x_acc = temp - pole_mass_length * theta_acc * cos_theta / total_mass;

    CartState {
        x: state.x + TAU * state.v,
        v: state.v + TAU * x_acc,
        theta: state.theta + TAU * state.omega,
        omega: state.omega + TAU * theta_acc,
    }
}

/// The cart-pole environment. One instance drives one episode at a time;
/// it is never shared across runs.
#[derive(Debug, Clone)]
pub struct CartPole {
    config: EnvConfig,
    state: CartState,
    steps: u32,
    live: bool,
}

impl CartPole {
    pub fn new(config: EnvConfig) -> Self {
        CartPole {
            config,
            state: CartState {
                x: 0.0,
                v: 0.0,
                theta: 0.0,
                omega: 0.0,
            },
            steps: 0,
            live: false,
        }
    }

    /// Draws a fresh initial state, each component uniform on the open
    /// interval (-0.05, 0.05), and resets the step counter.
    pub fn reset<R: Rng>(&mut self, rng: &mut R) -> CartState {
        let u = [
            rng.sample(Open01),
            rng.sample(Open01),
            rng.sample(Open01),
            rng.sample(Open01),
        ];
        self.state = state_from_unit_uniforms(u);
        self.steps = 0;
        self.live = true;
        self.state
    }

    pub fn state(&self) -> CartState {
        self.state
    }

    /// Steps taken since the last reset.
    pub fn steps(&self) -> u32 {
        self.steps
    }

    /// Advances the simulation one step. Truncation fires exactly on the
    /// 500th step, so episode length and return never exceed 500.
    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if !self.live {
            return Err(Error::EpisodeOver);
        }
        let next = step_dynamics(&self.state, action);
        self.steps += 1;

        let terminated = next.x.abs() > POSITION_LIMIT || next.theta.abs() > ANGLE_LIMIT;
        let truncated = !terminated && self.steps >= MAX_EPISODE_STEPS;
        let reward = if terminated && !self.config.reward_on_termination {
            0.0
        } else {
            1.0
        };

        self.state = next;
        if terminated || truncated {
            self.live = false;
        }
        Ok(StepOutcome {
            next_state: next,
            reward,
            terminated,
            truncated,
        })
    }

    /// Plays one episode under uniformly random actions; returns (length,
    /// total reward).
    pub fn random_episode<R: Rng>(&mut self, rng: &mut R) -> (u32, f64) {
        self.reset(rng);
        let mut total = 0.0;
        loop {
            let action = Action::from_index(rng.gen_range(0..2)).unwrap();
            let outcome = self.step(action).expect("stepped a finished episode");
            total += outcome.reward;
            if outcome.episode_over() {
                return (self.steps, total);
            }
        }
    }
}
