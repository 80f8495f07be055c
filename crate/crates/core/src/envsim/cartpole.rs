//! Cart-pole swing-up with a dense shaping reward.
//!
//! The pole starts hanging down and must be swung up and balanced. Dynamics
//! are the standard frictionless cart-pole equations (pole modeled as a
//! uniform rod, hence the 4/3 moment term), integrated with semi-implicit
//! Euler: velocities update on current accelerations, positions update on the
//! new velocities. Reward per step is `(1 + cos(theta)) / 2`, so 1.0 exactly
//! upright and 0.0 hanging.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ContinuousEnv, EnvState, StepResult};
use crate::error::{CoreError, Result};

/// Physical constants. The defaults are the usual textbook values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartpoleParams {
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Half the pole length (distance from pivot to center of mass).
    pub half_length: f64,
    pub gravity: f64,
    pub dt: f64,
    /// Newtons applied per unit of action; actions are clamped to [-1, 1].
    pub force_scale: f64,
    /// Episode length cap.
    pub max_steps: usize,
    /// Magnitude of the uniform perturbation applied to the hanging start.
    pub reset_noise: f64,
}

impl Default for CartpoleParams {
    fn default() -> Self {
        CartpoleParams {
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            gravity: 9.81,
            dt: 0.01,
            force_scale: 10.0,
            max_steps: 500,
            reset_noise: 0.05,
        }
    }
}

/// Cart-pole swing-up environment. Angle `theta` is measured from upright.
#[derive(Debug, Clone)]
pub struct CartpoleSwingup {
    pub params: CartpoleParams,
    x: f64,
    x_dot: f64,
    theta: f64,
    theta_dot: f64,
    step_index: usize,
    done: bool,
}

impl CartpoleSwingup {
    pub fn new(params: CartpoleParams) -> Self {
        CartpoleSwingup {
            params,
            x: 0.0,
            x_dot: 0.0,
            theta: std::f64::consts::PI,
            theta_dot: 0.0,
            step_index: 0,
            done: false,
        }
    }

    /// Places the system in an exact state and clears episode bookkeeping.
    /// Used by physics audits; training code goes through `reset`.
    pub fn set_state(&mut self, x: f64, x_dot: f64, theta: f64, theta_dot: f64) {
        self.x = x;
        self.x_dot = x_dot;
        self.theta = theta;
        self.theta_dot = theta_dot;
        self.step_index = 0;
        self.done = false;
    }

    pub fn state(&self) -> (f64, f64, f64, f64) {
        (self.x, self.x_dot, self.theta, self.theta_dot)
    }

    fn observation(&self) -> Vec<f64> {
        vec![
            self.x,
            self.x_dot,
            self.theta.cos(),
            self.theta.sin(),
            self.theta_dot,
        ]
    }

    /// Total mechanical energy of the unforced system; the zero of potential
    /// energy is at the pivot height. Test oracle for the integrator.
    pub fn mechanical_energy(&self) -> f64 {
        let p = &self.params;
        let (mc, mp, l) = (p.cart_mass, p.pole_mass, p.half_length);
        let cart_ke = 0.5 * mc * self.x_dot * self.x_dot;
        // Pole: center-of-mass translation plus rotation about the COM
        // (I_com = m (2l)^2 / 12 = m l^2 / 3 for a uniform rod).
        let vx = self.x_dot + l * self.theta_dot * self.theta.cos();
        let vy = -l * self.theta_dot * self.theta.sin();
        let pole_ke = 0.5 * mp * (vx * vx + vy * vy)
            + 0.5 * (mp * l * l / 3.0) * self.theta_dot * self.theta_dot;
        let pole_pe = mp * p.gravity * l * self.theta.cos();
        cart_ke + pole_ke + pole_pe
    }
}

impl ContinuousEnv for CartpoleSwingup {
    fn obs_dim(&self) -> usize {
        5
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> EnvState {
        let noise = self.params.reset_noise;
        self.x = 0.0;
        self.x_dot = 0.0;
        self.theta = std::f64::consts::PI + rng.gen_range(-noise..=noise);
        self.theta_dot = rng.gen_range(-noise..=noise);
        self.step_index = 0;
        self.done = false;
        EnvState {
            observation: self.observation(),
            done: false,
            step_index: 0,
        }
    }

    fn step(&mut self, action: &[f64], _rng: &mut ChaCha8Rng) -> Result<StepResult> {
        if self.done {
            return Err(CoreError::EpisodeDone);
        }
        if action.len() != 1 {
            return Err(CoreError::ShapeMismatch {
                context: "cartpole action".into(),
                expected: "1".into(),
                got: format!("{}", action.len()),
            });
        }
        let p = self.params;
        let force = p.force_scale * action[0].clamp(-1.0, 1.0);
        let (mc, mp, l, g) = (p.cart_mass, p.pole_mass, p.half_length, p.gravity);
        let total_mass = mc + mp;

        let sin_t = self.theta.sin();
        let cos_t = self.theta.cos();
        let temp = (force + mp * l * self.theta_dot * self.theta_dot * sin_t) / total_mass;
        let theta_acc =
            (g * sin_t - cos_t * temp) / (l * (4.0 / 3.0 - mp * cos_t * cos_t / total_mass));
        let x_acc = temp - mp * l * theta_acc * cos_t / total_mass;

        // Semi-implicit Euler.
        self.x_dot += p.dt * x_acc;
        self.theta_dot += p.dt * theta_acc;
        self.x += p.dt * self.x_dot;
        self.theta += p.dt * self.theta_dot;

        self.step_index += 1;
        self.done = self.step_index >= p.max_steps;
        let reward = (1.0 + self.theta.cos()) / 2.0;
        Ok(StepResult {
            next_observation: self.observation(),
            reward,
            done: self.done,
        })
    }
}
