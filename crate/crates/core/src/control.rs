//! PD pressure regulation: joint-angle error in degrees to PWM duty cycle.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{char_poly, poly_roots, Mat};
use crate::plant::{clamp_pwm, DiscretePlant, InflationSign, SecondOrderModel};
use crate::scalar::Real;
use crate::trajectory::Joint;

/// Default derivative low-pass time constant (seconds).
pub const DEFAULT_TAU_D: f64 = 0.05;

/// Default control loop rate (Hz).
pub const DEFAULT_RATE_HZ: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdGains<T> {
    /// PWM % per degree of error.
    pub kp: T,
    /// PWM % per degree/second of error rate.
    pub kd: T,
    pub joint: Joint,
}

impl<T: Real> PdGains<T> {
    pub fn new(kp: T, kd: T, joint: Joint) -> Result<Self> {
        if !(kp >= T::zero() && kd >= T::zero()) {
            return Err(Error::InvalidScenario(format!(
                "{} gains must be non-negative (kp={kp}, kd={kd})",
                joint.name()
            )));
        }
        Ok(Self { kp, kd, joint })
    }
}

/// Tuned shoulder and elbow gains.
pub fn tuned_gains<T: Real>() -> (PdGains<T>, PdGains<T>) {
    (
        PdGains { kp: T::lit(211.0), kd: T::lit(15.0), joint: Joint::Shoulder },
        PdGains { kp: T::lit(213.0), kd: T::lit(27.0), joint: Joint::Elbow },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PdState<T> {
    /// Degrees.
    pub prev_error: T,
    /// Degrees/s.
    pub filtered_derivative: T,
    pub initialized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand<T> {
    /// Duty cycle in [0, 100].
    pub pwm: T,
    /// Unclamped `kp·e + kd·ė`.
    pub raw_gain: T,
}

/// Tracking error in degrees.
pub fn error_degrees<T: Real>(theta_desired: T, theta_measured: T) -> T {
    (theta_desired - theta_measured).to_degrees_()
}

/// Pole of the discrete derivative filter, `exp(-dt/tau_d)`.
pub fn filter_pole<T: Real>(dt: T, tau_d: T) -> T {
    if tau_d > T::zero() {
        (-dt / tau_d).exp()
    } else {
        T::zero()
    }
}

/// One PD update.
///
/// The derivative is a backward difference of the error passed through a
/// first-order low-pass with time constant `tau_d`; it is zero on the first
/// call. Output is clamped to [0, 100].
pub fn pd_step<T: Real>(
    gains: &PdGains<T>,
    state: &PdState<T>,
    error: T,
    dt: T,
    tau_d: T,
) -> Result<(ControlCommand<T>, PdState<T>)> {
    if !(dt > T::zero()) {
        return Err(Error::NonPositiveStep(dt.to_f64_lossy()));
    }
    let derivative = if state.initialized {
        let alpha = filter_pole(dt, tau_d);
        let raw = (error - state.prev_error) / dt;
        alpha * state.filtered_derivative + (T::one() - alpha) * raw
    } else {
        T::zero()
    };
    let raw_gain = gains.kp * error + gains.kd * derivative;
    Ok((
        ControlCommand {
            pwm: clamp_pwm(raw_gain),
            raw_gain,
        },
        PdState {
            prev_error: error,
            filtered_derivative: derivative,
            initialized: true,
        },
    ))
}

/// Stateful wrapper around [`pd_step`] for one joint.
#[derive(Debug, Clone, Copy)]
pub struct PdController<T> {
    pub gains: PdGains<T>,
    pub tau_d: T,
    pub dt: T,
    state: PdState<T>,
}

impl<T: Real> PdController<T> {
    pub fn new(gains: PdGains<T>, dt: T, tau_d: T) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(Error::NonPositiveStep(dt.to_f64_lossy()));
        }
        Ok(Self {
            gains,
            tau_d,
            dt,
            state: PdState::default(),
        })
    }

    pub fn update(&mut self, error: T) -> ControlCommand<T> {
        let (cmd, next) = pd_step(&self.gains, &self.state, error, self.dt, self.tau_d)
            .expect("dt validated at construction");
        self.state = next;
        cmd
    }

    pub fn state(&self) -> &PdState<T> {
        &self.state
    }
}

/// State matrix of the unsaturated sampled loop.
///
/// Loop state is `(x1, x2, e_prev, d_prev)`: the plant displacement and rate,
/// the previous error and the previous filtered derivative. The reference is
/// zero so `e_k = -x1_k`.
pub fn closed_loop_matrix<T: Real>(
    gains: &PdGains<T>,
    model: &SecondOrderModel<T>,
    dt: T,
    tau_d: T,
) -> Result<Mat<T, 4>> {
    let plant = DiscretePlant::discretize(*model, dt, T::zero(), InflationSign::Increasing)?;
    let alpha = filter_pole(dt, tau_d);
    let c = (T::one() - alpha) / dt;
    let z = T::zero();
    let err = [-T::one(), z, z, z];
    let deriv = [-c, z, -c, alpha];
    let mut u = [z; 4];
    for i in 0..4 {
        u[i] = gains.kp * err[i] + gains.kd * deriv[i];
    }
    let mut m = [[z; 4]; 4];
    for r in 0..2 {
        m[r][0] = plant.ad[r][0];
        m[r][1] = plant.ad[r][1];
        for i in 0..4 {
            m[r][i] += plant.bd[r] * u[i];
        }
    }
    m[2] = err;
    m[3] = deriv;
    Ok(m)
}

/// Closed-loop poles of the sampled PD loop around the hold-equivalent plant.
pub fn closed_loop_poles<T: Real>(
    gains: &PdGains<T>,
    model: &SecondOrderModel<T>,
    dt: T,
    tau_d: T,
) -> Result<Vec<Complex<T>>> {
    let m = closed_loop_matrix(gains, model, dt, tau_d)?;
    Ok(poly_roots(&char_poly(&m)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::identified_models;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn error_examples() {
        assert_eq!(error_degrees(FRAC_PI_4, FRAC_PI_4), 0.0);
        assert!((error_degrees(FRAC_PI_2, 0.0) - 90.0).abs() < 1e-12);
        assert!((error_degrees(0.0, FRAC_PI_4) + 45.0).abs() < 1e-12);
    }

    #[test]
    fn zero_error_gives_zero_pwm() {
        let (g, _) = tuned_gains::<f64>();
        let mut c = PdController::new(g, 0.02, 0.05).unwrap();
        for _ in 0..10 {
            assert_eq!(c.update(0.0).pwm, 0.0);
        }
    }

    #[test]
    fn proportional_examples() {
        let (g, _) = tuned_gains::<f64>();
        let mut c = PdController::new(g, 0.02, 0.05).unwrap();
        let mut cmd = c.update(0.3);
        for _ in 0..5 {
            cmd = c.update(0.3);
        }
        assert!((cmd.raw_gain - 63.3).abs() < 1e-9);
        assert!((cmd.pwm - 63.3).abs() < 1e-9);

        let mut c = PdController::new(g, 0.02, 0.05).unwrap();
        c.update(1.0);
        let cmd = c.update(1.0);
        assert!((cmd.raw_gain - 211.0).abs() < 1e-9);
        assert_eq!(cmd.pwm, 100.0);
    }

    #[test]
    fn negative_output_clamps_to_zero() {
        let (g, _) = tuned_gains::<f64>();
        let (cmd, _) = pd_step(&g, &PdState::default(), -2.0, 0.02, 0.05).unwrap();
        assert_eq!(cmd.pwm, 0.0);
        assert!((cmd.raw_gain + 422.0).abs() < 1e-12);
    }

    #[test]
    fn first_call_has_no_derivative() {
        let g = PdGains::new(0.0, 10.0, Joint::Elbow).unwrap();
        let (cmd, st) = pd_step(&g, &PdState::default(), 5.0, 0.02, 0.05).unwrap();
        assert_eq!(cmd.raw_gain, 0.0);
        assert!(st.initialized);
        let (cmd, _) = pd_step(&g, &st, 6.0, 0.02, 0.05).unwrap();
        let alpha = (-0.4f64).exp();
        assert!((cmd.raw_gain - 10.0 * (1.0 - alpha) * 50.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (g, _) = tuned_gains::<f64>();
        assert!(matches!(
            pd_step(&g, &PdState::default(), 1.0, 0.0, 0.05),
            Err(Error::NonPositiveStep(_))
        ));
        assert!(PdGains::new(-1.0, 0.0, Joint::Shoulder).is_err());
    }

    #[test]
    fn zero_gains_leave_plant_poles() {
        let (_, e) = identified_models::<f64>();
        let g = PdGains::new(0.0, 0.0, Joint::Elbow).unwrap();
        let poles = closed_loop_poles(&g, &e, 0.02, 0.05).unwrap();
        let plant = DiscretePlant::discretize(e, 0.02, 0.0, InflationSign::Increasing).unwrap();
        // eigenvalues of Ad from the quadratic formula
        let tr = plant.ad[0][0] + plant.ad[1][1];
        let det = plant.ad[0][0] * plant.ad[1][1] - plant.ad[0][1] * plant.ad[1][0];
        let im = (det - tr * tr / 4.0).sqrt();
        let expected = [
            Complex::new(tr / 2.0, im),
            Complex::new(tr / 2.0, -im),
            Complex::new(0.0, 0.0),
            Complex::new((-0.4f64).exp(), 0.0),
        ];
        for want in expected {
            let best = poles.iter().map(|p| (p - want).norm()).fold(f64::MAX, f64::min);
            assert!(best < 1e-7, "missing pole {want}");
        }
    }

    #[test]
    fn pole_radius_predicts_linear_growth() {
        // unclamped linear loop simulated directly; its growth rate per step
        // must approach the largest pole magnitude
        let (s, _) = identified_models::<f64>();
        let (g, _) = tuned_gains::<f64>();
        let poles = closed_loop_poles(&g, &s, 0.02, 0.05).unwrap();
        let rho = poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let plant = DiscretePlant::discretize(s, 0.02, 0.0, InflationSign::Increasing).unwrap();
        let alpha = filter_pole(0.02, 0.05);
        let (mut x1, mut x2, mut ep, mut d) = (1.0f64, 0.0f64, -1.0f64, 0.0f64);
        let mut norms = Vec::new();
        for _ in 0..200 {
            let e = -x1;
            d = alpha * d + (1.0 - alpha) * (e - ep) / 0.02;
            ep = e;
            let u = g.kp * e + g.kd * d;
            let nx1 = plant.ad[0][0] * x1 + plant.ad[0][1] * x2 + plant.bd[0] * u;
            let nx2 = plant.ad[1][0] * x1 + plant.ad[1][1] * x2 + plant.bd[1] * u;
            x1 = nx1;
            x2 = nx2;
            norms.push((x1 * x1 + x2 * x2 + ep * ep + d * d).sqrt());
        }
        let rate = (norms[199] / norms[99]).powf(1.0 / 100.0);
        // complex dominant pair: the norm ratio carries a phase ripple
        assert!((rate - rho).abs() / rho < 2e-2, "rate {rate} vs rho {rho}");
    }
}
