//! Closed-loop simulation: trajectory → IMU → PD → actuator, logged per tick.

mod config;
mod format;
mod plot;

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::control::{error_degrees, tuned_gains, pd_step, PdGains, PdState, DEFAULT_RATE_HZ, DEFAULT_TAU_D};
use crate::error::{Error, Result};
use crate::kinematics::{ArmGeometry, CartesianPoint, JointAngles};
use crate::plant::{identified_models, ActuatorState, DiscretePlant, InflationSign, SecondOrderModel, PWM_MAX};
use crate::scalar::Real;
use crate::sensing::{extract_angles, ImuSynthesizer, NoiseModel};
use crate::trajectory::{plan, setpoint_spec, table3_setpoints, PlannedTrajectory, ReachingLimits, TrajectorySpec};

pub use config::{ConfigValue, ScenarioConfig, CONFIG_KEYS};
pub use format::{fmt_sig, write_csv};
pub use plot::{emit_plots, PLOT_FILES};

/// Default simulated time, seconds.
pub const DEFAULT_TOTAL_TIME: f64 = 10.0;

/// Tracking band used for settling and miss detection, degrees.
pub const SETTLING_BAND_DEG: f64 = 2.0;

/// Fraction of the run, at the end, treated as steady state.
pub const STEADY_STATE_FRACTION: f64 = 0.1;

/// Repetitions per setpoint in the suite.
pub const DEFAULT_REPETITIONS: usize = 8;

pub const LOG_HEADER: [&str; 15] = [
    "t",
    "theta_s_des",
    "theta_e_des",
    "theta_s_true",
    "theta_e_true",
    "theta_s_meas",
    "theta_e_meas",
    "pwm_s",
    "pwm_e",
    "x",
    "y",
    "z",
    "x_des",
    "y_des",
    "z_des",
];

/// One actuator: its model and how displacement maps to the joint angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorSetup<T> {
    pub model: SecondOrderModel<T>,
    /// Joint angle at zero displacement, radians.
    pub rest_angle: T,
    pub sign: InflationSign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub geometry: ArmGeometry<T>,
    pub shoulder_gains: PdGains<T>,
    pub elbow_gains: PdGains<T>,
    pub shoulder: ActuatorSetup<T>,
    pub elbow: ActuatorSetup<T>,
    pub noise: NoiseModel,
    pub spec: TrajectorySpec<T>,
    pub limits: ReachingLimits<T>,
    pub rate_hz: T,
    pub total_time: T,
    pub tau_d: T,
    /// Ticks between sampling a reading and the controller seeing it.
    pub sensor_delay_ticks: usize,
    pub seed: u64,
}

impl<T: Real> Scenario<T> {
    /// Identified models, tuned gains, noiseless sensors, 50 Hz for 10 s.
    pub fn baseline(spec: TrajectorySpec<T>) -> Self {
        let (sm, em) = identified_models();
        let (sg, eg) = tuned_gains();
        Self {
            geometry: ArmGeometry::default(),
            shoulder_gains: sg,
            elbow_gains: eg,
            shoulder: ActuatorSetup {
                model: sm,
                rest_angle: T::FRAC_PI_2(),
                sign: InflationSign::Decreasing,
            },
            elbow: ActuatorSetup {
                model: em,
                rest_angle: T::zero(),
                sign: InflationSign::Increasing,
            },
            noise: NoiseModel::noiseless(),
            spec,
            limits: ReachingLimits::default(),
            rate_hz: T::lit(DEFAULT_RATE_HZ),
            total_time: T::lit(DEFAULT_TOTAL_TIME),
            tau_d: T::lit(DEFAULT_TAU_D),
            sensor_delay_ticks: 0,
            seed: 0,
        }
    }

    /// [`Scenario::baseline`] for a labelled setpoint.
    pub fn for_setpoint(label: &str) -> Result<Self> {
        Ok(Self::baseline(setpoint_spec(label)?))
    }

    pub fn dt(&self) -> T {
        T::one() / self.rate_hz
    }

    /// Number of control ticks after t = 0.
    pub fn ticks(&self) -> usize {
        (self.total_time * self.rate_hz).round().to_usize().unwrap_or(0)
    }

    /// Checks the scenario and returns the planned trajectory it will follow.
    pub fn prepare(&self) -> Result<PlannedTrajectory<T>> {
        if !(self.rate_hz > T::zero()) || !self.rate_hz.is_finite() {
            return Err(Error::InvalidScenario(format!("rate must be positive, got {}", self.rate_hz)));
        }
        if !(self.tau_d >= T::zero()) {
            return Err(Error::InvalidScenario(format!("tau_d must be non-negative, got {}", self.tau_d)));
        }
        self.geometry.validate()?;
        self.shoulder.model.validate()?;
        self.elbow.model.validate()?;
        let planned = plan(&self.geometry, &self.spec, &self.limits)?;
        if !(self.total_time >= planned.duration()) {
            return Err(Error::InvalidScenario(format!(
                "total time {} is shorter than the trajectory ({})",
                self.total_time,
                planned.duration()
            )));
        }
        Ok(planned)
    }
}

/// One logged control tick. Angles in radians, positions in meters, PWM in %.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow<T> {
    pub t: T,
    pub desired: JointAngles<T>,
    pub truth: JointAngles<T>,
    pub measured: JointAngles<T>,
    pub pwm_s: T,
    pub pwm_e: T,
    pub wrist: CartesianPoint<T>,
    pub wrist_desired: CartesianPoint<T>,
}

impl<T: Real> LogRow<T> {
    pub fn values(&self) -> [T; 15] {
        [
            self.t,
            self.desired.theta_s,
            self.desired.theta_e,
            self.truth.theta_s,
            self.truth.theta_e,
            self.measured.theta_s,
            self.measured.theta_e,
            self.pwm_s,
            self.pwm_e,
            self.wrist.x,
            self.wrist.y,
            self.wrist.z,
            self.wrist_desired.x,
            self.wrist_desired.y,
            self.wrist_desired.z,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog<T> {
    pub rows: Vec<LogRow<T>>,
    /// Ticks whose reading was degenerate and the previous measurement was reused.
    pub held_ticks: Vec<usize>,
    pub label: String,
}

impl<T: Real> SimLog<T> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_csv(
            out,
            &LOG_HEADER,
            self.rows.iter().map(|r| r.values().map(|v| fmt_sig(v.to_f64_lossy()))),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }
}

/// Per-joint quantity, shoulder first.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerJoint<T> {
    pub shoulder: T,
    pub elbow: T,
}

impl<T> PerJoint<T> {
    pub fn new(shoulder: T, elbow: T) -> Self {
        Self { shoulder, elbow }
    }

    pub fn map<U>(self, mut f: impl FnMut(T) -> U) -> PerJoint<U> {
        PerJoint {
            shoulder: f(self.shoulder),
            elbow: f(self.elbow),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics<T> {
    /// Radians, true vs desired over the whole run.
    pub rmse: PerJoint<T>,
    /// Mean absolute error over the steady-state window, radians.
    pub steady_state_error: PerJoint<T>,
    /// Time after which the error stays within the settling band; infinite if it never does.
    pub settling_time: PerJoint<T>,
    /// Distance from the final wrist position to the target's, meters.
    pub wrist_terminal_error: T,
    /// Fraction of ticks commanding full PWM.
    pub saturation: PerJoint<T>,
    /// Same, restricted to the steady-state window.
    pub steady_state_saturation: PerJoint<T>,
}

impl<T: Real> Metrics<T> {
    /// True when the joint ends outside the settling band while mostly pinned at full PWM.
    pub fn saturated_miss(&self) -> PerJoint<bool> {
        let band = T::lit(SETTLING_BAND_DEG).to_radians_();
        let half = T::lit(0.5);
        PerJoint {
            shoulder: self.steady_state_error.shoulder >= band && self.steady_state_saturation.shoulder > half,
            elbow: self.steady_state_error.elbow >= band && self.steady_state_saturation.elbow > half,
        }
    }

    pub fn from_log(log: &SimLog<T>, geometry: &ArmGeometry<T>, target: &JointAngles<T>) -> Result<Self> {
        let n = log.rows.len();
        if n == 0 {
            return Err(Error::EmptyLog);
        }
        let nf = T::from_usize(n).unwrap();
        let window = ((nf * T::lit(STEADY_STATE_FRACTION)).ceil().to_usize().unwrap_or(1)).clamp(1, n);
        let tail = &log.rows[n - window..];
        let wf = T::from_usize(window).unwrap();
        let band = T::lit(SETTLING_BAND_DEG).to_radians_();
        let full = T::lit(PWM_MAX);

        let err = |r: &LogRow<T>| {
            PerJoint::new(
                (r.desired.theta_s - r.truth.theta_s).abs(),
                (r.desired.theta_e - r.truth.theta_e).abs(),
            )
        };
        let mut sq = PerJoint::new(T::zero(), T::zero());
        let mut sat = PerJoint::new(T::zero(), T::zero());
        for r in &log.rows {
            let e = err(r);
            sq.shoulder += e.shoulder * e.shoulder;
            sq.elbow += e.elbow * e.elbow;
            if r.pwm_s >= full {
                sat.shoulder += T::one();
            }
            if r.pwm_e >= full {
                sat.elbow += T::one();
            }
        }
        let mut ss = PerJoint::new(T::zero(), T::zero());
        let mut ss_sat = PerJoint::new(T::zero(), T::zero());
        for r in tail {
            let e = err(r);
            ss.shoulder += e.shoulder;
            ss.elbow += e.elbow;
            if r.pwm_s >= full {
                ss_sat.shoulder += T::one();
            }
            if r.pwm_e >= full {
                ss_sat.elbow += T::one();
            }
        }
        let settle = |pick: fn(PerJoint<T>) -> T| -> T {
            match log.rows.iter().rposition(|r| pick(err(r)) >= band) {
                None => log.rows[0].t,
                Some(i) if i + 1 < n => log.rows[i + 1].t,
                Some(_) => T::infinity(),
            }
        };
        let last = &log.rows[n - 1];
        let goal = geometry.forward_kinematics(target);
        Ok(Self {
            rmse: sq.map(|v| (v / nf).sqrt()),
            steady_state_error: ss.map(|v| v / wf),
            settling_time: PerJoint::new(settle(|e| e.shoulder), settle(|e| e.elbow)),
            wrist_terminal_error: last.wrist.distance(&goal),
            saturation: sat.map(|v| v / nf),
            steady_state_saturation: ss_sat.map(|v| v / wf),
        })
    }
}

pub const METRICS_HEADER: [&str; 12] = [
    "rmse_s",
    "rmse_e",
    "ss_error_s",
    "ss_error_e",
    "settling_s",
    "settling_e",
    "wrist_error",
    "saturation_s",
    "saturation_e",
    "ss_saturation_s",
    "ss_saturation_e",
    "held_ticks",
];

impl<T: Real> Metrics<T> {
    fn values(&self) -> [T; 11] {
        [
            self.rmse.shoulder,
            self.rmse.elbow,
            self.steady_state_error.shoulder,
            self.steady_state_error.elbow,
            self.settling_time.shoulder,
            self.settling_time.elbow,
            self.wrist_terminal_error,
            self.saturation.shoulder,
            self.saturation.elbow,
            self.steady_state_saturation.shoulder,
            self.steady_state_saturation.elbow,
        ]
    }

    fn cells(&self, held: usize) -> Vec<String> {
        let mut v: Vec<String> = self.values().iter().map(|x| fmt_sig(x.to_f64_lossy())).collect();
        v.push(held.to_string());
        v
    }
}

/// Writes a one-row metrics table.
pub fn save_metrics<T: Real>(metrics: &Metrics<T>, held_ticks: usize, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(
        std::io::BufWriter::new(file),
        &METRICS_HEADER,
        std::iter::once(metrics.cells(held_ticks)),
    )
    .map_err(|e| Error::io(path, e))
}

/// Simulates one scenario.
///
/// Tick `k` at `t = k/rate`: desired angles from the plan, a reading of the
/// true configuration, measured angles, degree errors times the inflation
/// sign, one PD update per joint, then a held-PWM plant step. The row logs
/// the state at `t` and the PWM applied from `t` on.
pub fn run<T: Real>(scn: &Scenario<T>) -> Result<(SimLog<T>, Metrics<T>)> {
    let planned = scn.prepare()?;
    let dt = scn.dt();
    let plant_s = DiscretePlant::discretize(scn.shoulder.model, dt, scn.shoulder.rest_angle, scn.shoulder.sign)?;
    let plant_e = DiscretePlant::discretize(scn.elbow.model, dt, scn.elbow.rest_angle, scn.elbow.sign)?;
    let mut imu = ImuSynthesizer::new(NoiseModel {
        seed: scn.seed,
        ..scn.noise
    })?;

    let ticks = scn.ticks();
    let mut xs = ActuatorState::default();
    let mut xe = ActuatorState::default();
    let mut pd_s = PdState::default();
    let mut pd_e = PdState::default();
    let mut readings: Vec<JointAngles<T>> = Vec::with_capacity(ticks + 1);
    let mut held_ticks = Vec::new();
    let mut rows = Vec::with_capacity(ticks + 1);
    let sign_s = scn.shoulder.sign.value::<T>();
    let sign_e = scn.elbow.sign.value::<T>();

    for k in 0..=ticks {
        let t = T::from_usize(k).unwrap() * dt;
        let (desired, _) = planned.desired(t);
        let truth = JointAngles::new(plant_s.joint_angle(&xs), plant_e.joint_angle(&xe));
        let fresh = match extract_angles(&imu.synthesize(&truth, t)) {
            Ok(q) => q,
            Err(Error::GimbalDegenerate) => {
                held_ticks.push(k);
                readings.last().copied().unwrap_or(truth)
            }
            Err(e) => return Err(e),
        };
        readings.push(fresh);
        let measured = readings[k.saturating_sub(scn.sensor_delay_ticks)];

        let e_s = sign_s * error_degrees(desired.theta_s, measured.theta_s);
        let e_e = sign_e * error_degrees(desired.theta_e, measured.theta_e);
        let (cmd_s, next_s) = pd_step(&scn.shoulder_gains, &pd_s, e_s, dt, scn.tau_d)?;
        let (cmd_e, next_e) = pd_step(&scn.elbow_gains, &pd_e, e_e, dt, scn.tau_d)?;
        pd_s = next_s;
        pd_e = next_e;

        rows.push(LogRow {
            t,
            desired,
            truth,
            measured,
            pwm_s: cmd_s.pwm,
            pwm_e: cmd_e.pwm,
            wrist: scn.geometry.forward_kinematics(&truth),
            wrist_desired: scn.geometry.forward_kinematics(&desired),
        });
        xs = plant_s.step(&xs, cmd_s.pwm);
        xe = plant_e.step(&xe, cmd_e.pwm);
    }

    let log = SimLog {
        rows,
        held_ticks,
        label: scn.spec.label.clone(),
    };
    let metrics = Metrics::from_log(&log, &scn.geometry, &scn.spec.target)?;
    Ok((log, metrics))
}

/// Mean metrics over the repetitions of one setpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow<T> {
    pub label: String,
    pub mode: crate::trajectory::ActuationMode,
    pub repetitions: usize,
    pub metrics: Metrics<T>,
    pub saturated_miss: PerJoint<bool>,
    pub held_ticks: usize,
}

fn mean_metrics<T: Real>(all: &[Metrics<T>]) -> Metrics<T> {
    let n = T::from_usize(all.len()).unwrap();
    let avg = |f: &dyn Fn(&Metrics<T>) -> T| all.iter().map(f).sum::<T>() / n;
    let pj = |f: &dyn Fn(&Metrics<T>) -> PerJoint<T>| PerJoint::new(avg(&|m| f(m).shoulder), avg(&|m| f(m).elbow));
    Metrics {
        rmse: pj(&|m| m.rmse),
        steady_state_error: pj(&|m| m.steady_state_error),
        settling_time: pj(&|m| m.settling_time),
        wrist_terminal_error: avg(&|m| m.wrist_terminal_error),
        saturation: pj(&|m| m.saturation),
        steady_state_saturation: pj(&|m| m.steady_state_saturation),
    }
}

/// Runs every tabulated setpoint `repetitions` times (seeds `base.seed + r`)
/// on top of `base` and averages the metrics per setpoint.
pub fn run_table3_suite<T: Real>(base: &Scenario<T>, repetitions: usize) -> Result<Vec<SuiteRow<T>>> {
    let reps = repetitions.max(1);
    let specs = table3_setpoints::<T>();
    let jobs: Vec<(usize, u64)> = (0..specs.len())
        .flat_map(|i| (0..reps as u64).map(move |r| (i, r)))
        .collect();
    let results: Vec<Result<(usize, Metrics<T>, usize)>> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let mut scn = base.clone();
            scn.spec = specs[i].clone();
            scn.seed = base.seed.wrapping_add(r);
            let (log, m) = run(&scn)?;
            Ok((i, m, log.held_ticks.len()))
        })
        .collect();
    let mut grouped: Vec<(Vec<Metrics<T>>, usize)> = vec![(Vec::new(), 0); specs.len()];
    for res in results {
        let (i, m, held) = res?;
        grouped[i].0.push(m);
        grouped[i].1 += held;
    }
    Ok(specs
        .iter()
        .zip(grouped)
        .map(|(spec, (ms, held))| {
            let metrics = mean_metrics(&ms);
            SuiteRow {
                label: spec.label.clone(),
                mode: spec.mode,
                repetitions: ms.len(),
                saturated_miss: metrics.saturated_miss(),
                metrics,
                held_ticks: held,
            }
        })
        .collect())
}

pub fn summary_header() -> Vec<&'static str> {
    let mut h = vec!["setpoint", "mode", "repetitions"];
    h.extend_from_slice(&METRICS_HEADER);
    h.extend_from_slice(&["saturated_miss_s", "saturated_miss_e"]);
    h
}

pub fn save_summary<T: Real>(rows: &[SuiteRow<T>], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let body = rows.iter().map(|r| {
        let mut cells = vec![r.label.clone(), r.mode.abbrev().to_string(), r.repetitions.to_string()];
        cells.extend(r.metrics.cells(r.held_ticks));
        cells.push(r.saturated_miss.shoulder.to_string());
        cells.push(r.saturated_miss.elbow.to_string());
        cells
    });
    write_csv(std::io::BufWriter::new(file), &summary_header(), body).map_err(|e| Error::io(path, e))
}

/// Wrist positions as an `x,y,z` table.
pub fn save_points<T: Real>(points: &[CartesianPoint<T>], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let body = points
        .iter()
        .map(|p| [p.x, p.y, p.z].map(|v| fmt_sig(v.to_f64_lossy())));
    write_csv(std::io::BufWriter::new(file), &["x", "y", "z"], body).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_label(label: &str) -> (SimLog<f64>, Metrics<f64>) {
        run(&Scenario::<f64>::for_setpoint(label).unwrap()).unwrap()
    }

    #[test]
    fn row_count_and_time_grid() {
        let (log, _) = run_label("P1");
        assert_eq!(log.len(), 501);
        for (k, r) in log.rows.iter().enumerate() {
            assert!((r.t - k as f64 * 0.02).abs() < 1e-12);
        }
        assert_eq!(log.rows[0].truth, JointAngles::new(std::f64::consts::FRAC_PI_2, 0.0));
    }

    #[test]
    fn biceps_only_leaves_shoulder_idle() {
        let (log, m) = run_label("P1");
        assert!(log.rows.iter().all(|r| r.pwm_s == 0.0));
        assert!(m.steady_state_error.elbow.to_degrees() < 2.0);
    }

    #[test]
    fn elbow_ceiling_on_p2() {
        let (_, m) = run_label("P2");
        let err = m.steady_state_error.elbow.to_degrees();
        assert!((err - (90.0 - 43.682)).abs() < 1.0, "{err}");
        assert!(m.steady_state_saturation.elbow > 0.99);
        assert!(m.saturated_miss().elbow);
    }

    #[test]
    fn logged_wrist_matches_truth() {
        let (log, _) = run_label("P7");
        let g = ArmGeometry::<f64>::default();
        for r in &log.rows {
            assert!(g.forward_kinematics(&r.truth).distance(&r.wrist) < 1e-12);
        }
    }

    #[test]
    fn short_total_time_is_rejected() {
        let mut scn = Scenario::<f64>::for_setpoint("P4").unwrap();
        scn.total_time = 0.5;
        assert!(matches!(run(&scn), Err(Error::InvalidScenario(_))));
        scn.total_time = 10.0;
        scn.rate_hz = 0.0;
        assert!(matches!(run(&scn), Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn sensor_delay_shifts_measurements() {
        let mut scn = Scenario::<f64>::for_setpoint("P1").unwrap();
        scn.sensor_delay_ticks = 1;
        let (log, _) = run(&scn).unwrap();
        for w in log.rows.windows(2) {
            assert!((w[1].measured.theta_e - w[0].truth.theta_e).abs() < 1e-12);
            assert!((w[1].measured.theta_s - w[0].truth.theta_s).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_repetitions_match() {
        let mut scn = Scenario::<f64>::for_setpoint("P5").unwrap();
        let (a, _) = run(&scn).unwrap();
        scn.seed = 99;
        let (b, _) = run(&scn).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn settling_time_conventions() {
        let g = ArmGeometry::<f64>::default();
        let q = JointAngles::new(1.0, 0.5);
        let row = |t: f64, err: f64| LogRow {
            t,
            desired: q,
            truth: JointAngles::new(q.theta_s + err, q.theta_e),
            measured: q,
            pwm_s: 0.0,
            pwm_e: 0.0,
            wrist: g.forward_kinematics(&q),
            wrist_desired: g.forward_kinematics(&q),
        };
        let log = SimLog {
            rows: vec![row(0.0, 0.1), row(1.0, 0.0), row(2.0, 0.0)],
            held_ticks: vec![],
            label: "x".into(),
        };
        let m = Metrics::from_log(&log, &g, &q).unwrap();
        assert_eq!(m.settling_time.shoulder, 1.0);
        assert_eq!(m.settling_time.elbow, 0.0);
        let log = SimLog {
            rows: vec![row(0.0, 0.0), row(1.0, 0.1)],
            ..log
        };
        assert!(Metrics::from_log(&log, &g, &q).unwrap().settling_time.shoulder.is_infinite());
        let empty = SimLog::<f64> {
            rows: vec![],
            held_ticks: vec![],
            label: String::new(),
        };
        assert!(matches!(Metrics::from_log(&empty, &g, &q), Err(Error::EmptyLog)));
    }
}
