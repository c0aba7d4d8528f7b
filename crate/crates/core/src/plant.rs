//! Second-order pneumatic actuator models driven by PWM duty cycle.
//!
//! Each actuator is `G(s) = b / (s² + a1·s + a0)` from PWM % to angular
//! displacement in degrees, measured from the deflated rest configuration.
//! Simulation uses the exact zero-order-hold equivalent, so one plant step per
//! control period is exact for piecewise-constant commands.

use crate::error::{Error, Result};
use crate::linalg::{expm, Mat};
use crate::scalar::Real;

pub const PWM_MIN: f64 = 0.0;
pub const PWM_MAX: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrderModel<T> {
    pub b: T,
    pub a1: T,
    pub a0: T,
}

impl<T: Real> SecondOrderModel<T> {
    pub fn new(b: T, a1: T, a0: T) -> Self {
        Self { b, a1, a0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a0 > T::zero() && self.b > T::zero() && self.a1.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "plant model needs a0 > 0 and b > 0 (b={}, a1={}, a0={})",
                self.b, self.a1, self.a0
            )));
        }
        Ok(())
    }

    /// Steady-state degrees per PWM %.
    pub fn dc_gain(&self) -> T {
        self.b / self.a0
    }

    pub fn natural_frequency(&self) -> T {
        self.a0.sqrt()
    }

    pub fn damping_ratio(&self) -> T {
        self.a1 / (T::lit(2.0) * self.a0.sqrt())
    }

    /// Continuous state matrix for state (displacement, rate).
    pub fn state_matrix(&self) -> Mat<T, 2> {
        [[T::zero(), T::one()], [-self.a0, -self.a1]]
    }

    pub fn as_array(&self) -> [T; 3] {
        [self.b, self.a1, self.a0]
    }
}

/// Identified shoulder (textile) and elbow (silicone) actuator models.
pub fn identified_models<T: Real>() -> (SecondOrderModel<T>, SecondOrderModel<T>) {
    (
        SecondOrderModel::new(T::lit(52.62), T::lit(15.57), T::lit(101.10)),
        SecondOrderModel::new(T::lit(16.11), T::lit(0.271), T::lit(36.88)),
    )
}

/// Displacement (degrees) and rate (degrees/s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActuatorState<T> {
    pub x1: T,
    pub x2: T,
}

/// Direction inflation moves the joint angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InflationSign {
    Increasing,
    Decreasing,
}

impl InflationSign {
    pub fn value<T: Real>(self) -> T {
        match self {
            InflationSign::Increasing => T::one(),
            InflationSign::Decreasing => -T::one(),
        }
    }
}

/// Zero-order-hold discretization of a [`SecondOrderModel`] plus the mapping
/// from actuator displacement to joint angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretePlant<T> {
    pub ad: Mat<T, 2>,
    pub bd: [T; 2],
    pub dt: T,
    /// Joint angle (radians) at zero displacement.
    pub rest_angle: T,
    pub sign: InflationSign,
    pub model: SecondOrderModel<T>,
}

impl<T: Real> DiscretePlant<T> {
    /// Exact hold-equivalent of `model` at step `dt`.
    pub fn discretize(
        model: SecondOrderModel<T>,
        dt: T,
        rest_angle: T,
        sign: InflationSign,
    ) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(Error::NonPositiveStep(dt.to_f64_lossy()));
        }
        // exp([[A, B], [0, 0]]·dt) = [[Ad, Bd], [0, 1]]
        let a = model.state_matrix();
        let z = T::zero();
        let aug = [
            [a[0][0] * dt, a[0][1] * dt, z],
            [a[1][0] * dt, a[1][1] * dt, model.b * dt],
            [z, z, z],
        ];
        let e = expm(&aug);
        Ok(Self {
            ad: [[e[0][0], e[0][1]], [e[1][0], e[1][1]]],
            bd: [e[0][2], e[1][2]],
            dt,
            rest_angle,
            sign,
            model,
        })
    }

    /// Advances one step holding `pwm` (clamped to [0, 100]).
    pub fn step(&self, state: &ActuatorState<T>, pwm: T) -> ActuatorState<T> {
        let u = clamp_pwm(pwm);
        ActuatorState {
            x1: self.ad[0][0] * state.x1 + self.ad[0][1] * state.x2 + self.bd[0] * u,
            x2: self.ad[1][0] * state.x1 + self.ad[1][1] * state.x2 + self.bd[1] * u,
        }
    }

    /// Joint angle in radians for an actuator state.
    pub fn joint_angle(&self, state: &ActuatorState<T>) -> T {
        self.rest_angle + self.sign.value::<T>() * state.x1.to_radians_()
    }

    /// Displacement in degrees that corresponds to `angle`.
    pub fn displacement_for(&self, angle: T) -> T {
        ((angle - self.rest_angle) * self.sign.value::<T>()).to_degrees_()
    }

    /// Largest eigenvalue magnitude of `ad`.
    pub fn spectral_radius(&self) -> T {
        let tr = self.ad[0][0] + self.ad[1][1];
        let det = self.ad[0][0] * self.ad[1][1] - self.ad[0][1] * self.ad[1][0];
        let disc = tr * tr / T::lit(4.0) - det;
        if disc >= T::zero() {
            let r = disc.sqrt();
            (tr / T::lit(2.0) + r).abs().max((tr / T::lit(2.0) - r).abs())
        } else {
            det.sqrt()
        }
    }

    /// Equilibrium displacement of the discrete system under constant `pwm`.
    pub fn steady_state(&self, pwm: T) -> ActuatorState<T> {
        let u = clamp_pwm(pwm);
        let m = [
            [T::one() - self.ad[0][0], -self.ad[0][1]],
            [-self.ad[1][0], T::one() - self.ad[1][1]],
        ];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let r = [self.bd[0] * u, self.bd[1] * u];
        ActuatorState {
            x1: (m[1][1] * r[0] - m[0][1] * r[1]) / det,
            x2: (m[0][0] * r[1] - m[1][0] * r[0]) / det,
        }
    }

    /// Output sequence (x1, degrees) from rest under a constant input, sampled
    /// at `0, dt, …, (n-1)·dt`.
    pub fn step_response(&self, pwm: T, n: usize) -> Vec<T> {
        let mut state = ActuatorState::default();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(state.x1);
            state = self.step(&state, pwm);
        }
        out
    }
}

pub fn clamp_pwm<T: Real>(pwm: T) -> T {
    pwm.max(T::lit(PWM_MIN)).min(T::lit(PWM_MAX))
}
