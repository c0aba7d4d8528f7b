//! Rest-to-rest quintic time scaling for the two joints and the reach targets.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;

use crate::error::{Error, Result};
use crate::kinematics::{ArmGeometry, JointAngles};
use crate::scalar::Real;

/// Sampling step used when checking the wrist speed cap (seconds).
pub const SPEED_CHECK_STEP: f64 = 1e-3;

/// Multiplicative duration growth applied while the speed cap is violated.
pub const DURATION_GROWTH: f64 = 1.1;

const MAX_EXTENSIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Joint {
    Shoulder,
    Elbow,
}

impl Joint {
    pub fn name(self) -> &'static str {
        match self {
            Joint::Shoulder => "shoulder",
            Joint::Elbow => "elbow",
        }
    }
}

/// Which actuators a reach uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActuationMode {
    /// Elbow only.
    BicepsOnly,
    /// Shoulder only.
    DeltoidOnly,
    /// Both joints.
    CombinedMuscle,
}

impl ActuationMode {
    pub fn abbrev(self) -> &'static str {
        match self {
            ActuationMode::BicepsOnly => "BO",
            ActuationMode::DeltoidOnly => "DO",
            ActuationMode::CombinedMuscle => "CM",
        }
    }

    /// Mode implied by which joints move between `start` and `target`.
    pub fn classify<T: Real>(start: &JointAngles<T>, target: &JointAngles<T>) -> Option<Self> {
        let shoulder = start.theta_s != target.theta_s;
        let elbow = start.theta_e != target.theta_e;
        match (shoulder, elbow) {
            (false, true) => Some(ActuationMode::BicepsOnly),
            (true, false) => Some(ActuationMode::DeltoidOnly),
            (true, true) => Some(ActuationMode::CombinedMuscle),
            (false, false) => None,
        }
    }
}

impl fmt::Display for ActuationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbrev())
    }
}

/// One joint's quintic `p(t) = c0·t⁵ + c1·t⁴ + c2·t³ + c3·t² + c4·t + c5`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticSegment<T> {
    /// Coefficients, highest power first.
    pub coeffs: [T; 6],
    pub duration: T,
    pub joint: Joint,
    pub start: T,
    pub target: T,
}

/// Position, velocity and acceleration at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentSample<T> {
    pub position: T,
    pub velocity: T,
    pub acceleration: T,
}

/// Cited infant reaching statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachingLimits<T> {
    /// Seconds.
    pub default_duration: T,
    /// Wrist speed cap, m/s.
    pub peak_speed: T,
    /// Informational only, m/s.
    pub mean_speed: T,
}

impl<T: Real> Default for ReachingLimits<T> {
    fn default() -> Self {
        Self {
            default_duration: T::one(),
            peak_speed: T::lit(0.5654),
            mean_speed: T::lit(0.283),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec<T> {
    pub start: JointAngles<T>,
    pub target: JointAngles<T>,
    pub duration: T,
    pub mode: ActuationMode,
    pub label: String,
}

impl<T: Real> TrajectorySpec<T> {
    /// Builds a spec, checking the duration and that `mode` matches the motion.
    pub fn new(
        label: impl Into<String>,
        start: JointAngles<T>,
        target: JointAngles<T>,
        duration: T,
        mode: ActuationMode,
    ) -> Result<Self> {
        let spec = Self {
            start,
            target,
            duration,
            mode,
            label: label.into(),
        };
        spec.check_mode()?;
        if !(duration > T::zero()) {
            return Err(Error::NonPositiveDuration(duration.to_f64_lossy()));
        }
        Ok(spec)
    }

    /// Like [`TrajectorySpec::new`] with the mode inferred from the motion.
    pub fn inferred(
        label: impl Into<String>,
        start: JointAngles<T>,
        target: JointAngles<T>,
        duration: T,
    ) -> Result<Self> {
        let mode = ActuationMode::classify(&start, &target).ok_or(Error::NoMotion)?;
        Self::new(label, start, target, duration, mode)
    }

    fn check_mode(&self) -> Result<()> {
        match ActuationMode::classify(&self.start, &self.target) {
            None => Err(Error::NoMotion),
            Some(m) if m != self.mode => Err(Error::ModeMismatch {
                declared: self.mode.abbrev(),
                expected: m.abbrev(),
            }),
            Some(_) => Ok(()),
        }
    }

    /// Checks the mode and that both endpoints respect `geom`'s joint limits.
    pub fn validate(&self, geom: &ArmGeometry<T>) -> Result<()> {
        self.check_mode()?;
        for q in [&self.start, &self.target] {
            if !geom.within_limits(q) {
                return Err(Error::LimitViolation {
                    theta_s: q.theta_s.to_f64_lossy(),
                    theta_e: q.theta_e.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }

    pub fn with_duration(mut self, duration: T) -> Self {
        self.duration = duration;
        self
    }
}

/// A tabulated reach target: listed wrist point, joint angles and mode.
#[derive(Debug, Clone, Copy)]
pub struct Setpoint {
    pub label: &'static str,
    /// Listed wrist coordinates (meters, four decimals).
    pub point: [f64; 3],
    /// (θs, θe) in radians.
    pub angles: [f64; 2],
    pub mode: ActuationMode,
}

/// Joint-space start configuration shared by every reach.
pub const START_ANGLES: [f64; 2] = [FRAC_PI_2, 0.0];

/// The eight reach targets P1..P8.
pub const SETPOINTS: [Setpoint; 8] = [
    Setpoint { label: "P1", point: [0.0, 0.1195, 0.0495], angles: [FRAC_PI_2, FRAC_PI_4], mode: ActuationMode::BicepsOnly },
    Setpoint { label: "P2", point: [0.0, 0.0700, 0.0700], angles: [FRAC_PI_2, FRAC_PI_2], mode: ActuationMode::BicepsOnly },
    Setpoint { label: "P3", point: [0.0990, 0.0990, 0.0], angles: [FRAC_PI_4, 0.0], mode: ActuationMode::DeltoidOnly },
    Setpoint { label: "P4", point: [0.0845, 0.0845, 0.0495], angles: [FRAC_PI_4, FRAC_PI_4], mode: ActuationMode::CombinedMuscle },
    Setpoint { label: "P5", point: [0.0495, 0.0495, 0.0700], angles: [FRAC_PI_4, FRAC_PI_2], mode: ActuationMode::CombinedMuscle },
    Setpoint { label: "P6", point: [0.1400, 0.0, 0.0], angles: [0.0, 0.0], mode: ActuationMode::DeltoidOnly },
    Setpoint { label: "P7", point: [0.1195, 0.0, 0.0495], angles: [0.0, FRAC_PI_4], mode: ActuationMode::CombinedMuscle },
    Setpoint { label: "P8", point: [0.0700, 0.0, 0.0700], angles: [0.0, FRAC_PI_2], mode: ActuationMode::CombinedMuscle },
];

/// The eight reach specs, each starting from [`START_ANGLES`] with a 1 s duration.
pub fn table3_setpoints<T: Real>() -> Vec<TrajectorySpec<T>> {
    SETPOINTS.iter().map(spec_for).collect()
}

/// Spec for one labelled setpoint (`"P1"`..`"P8"`, case-insensitive).
pub fn setpoint_spec<T: Real>(label: &str) -> Result<TrajectorySpec<T>> {
    SETPOINTS
        .iter()
        .find(|s| s.label.eq_ignore_ascii_case(label))
        .map(spec_for)
        .ok_or_else(|| Error::UnknownSetpoint(label.to_string()))
}

fn spec_for<T: Real>(s: &Setpoint) -> TrajectorySpec<T> {
    TrajectorySpec {
        start: JointAngles::new(T::lit(START_ANGLES[0]), T::lit(START_ANGLES[1])),
        target: JointAngles::new(T::lit(s.angles[0]), T::lit(s.angles[1])),
        duration: T::one(),
        mode: s.mode,
        label: s.label.to_string(),
    }
}

/// Quintic meeting position, velocity and acceleration boundary values at
/// `t = 0` and `t = duration`, solved as a 6×6 linear system.
pub fn solve_quintic_boundary<T: Real>(
    initial: [T; 3],
    terminal: [T; 3],
    duration: T,
) -> Result<[T; 6]> {
    if !(duration > T::zero()) {
        return Err(Error::NonPositiveDuration(duration.to_f64_lossy()));
    }
    // Rows: p(0), p'(0), p''(0), p(T), p'(T), p''(T); columns c0..c5 (t⁵..t⁰).
    let mut a = [[T::zero(); 7]; 6];
    let powers = |t: T, deriv: usize| -> [T; 6] {
        let mut row = [T::zero(); 6];
        for (col, slot) in row.iter_mut().enumerate() {
            let n = 5 - col;
            if n < deriv {
                continue;
            }
            let mut factor = T::one();
            for k in 0..deriv {
                factor *= T::from_usize(n - k).unwrap();
            }
            *slot = factor * t.powi((n - deriv) as i32);
        }
        row
    };
    for deriv in 0..3 {
        let r0 = powers(T::zero(), deriv);
        let r1 = powers(duration, deriv);
        a[deriv][..6].copy_from_slice(&r0);
        a[deriv][6] = initial[deriv];
        a[deriv + 3][..6].copy_from_slice(&r1);
        a[deriv + 3][6] = terminal[deriv];
    }
    Ok(gauss_solve(a))
}

/// Gaussian elimination with partial pivoting on an augmented 6×7 system.
fn gauss_solve<T: Real>(mut a: [[T; 7]; 6]) -> [T; 6] {
    for col in 0..6 {
        let pivot = (col..6)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        for row in 0..6 {
            if row == col {
                continue;
            }
            let f = a[row][col] / a[col][col];
            if f == T::zero() {
                continue;
            }
            for k in col..7 {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
        }
    }
    let mut x = [T::zero(); 6];
    for i in 0..6 {
        x[i] = a[i][6] / a[i][i];
    }
    x
}

impl<T: Real> QuinticSegment<T> {
    /// Rest-to-rest segment from `start` to `target` over `duration` seconds.
    pub fn solve(joint: Joint, start: T, target: T, duration: T) -> Result<Self> {
        let zero = T::zero();
        let coeffs = solve_quintic_boundary([start, zero, zero], [target, zero, zero], duration)?;
        Ok(Self {
            coeffs,
            duration,
            joint,
            start,
            target,
        })
    }

    /// Evaluates the polynomial with `t` clamped to `[0, duration]`.
    ///
    /// Outside that interval the segment is at rest at its endpoint.
    pub fn eval(&self, t: T) -> SegmentSample<T> {
        if t <= T::zero() {
            return self.rest(self.start);
        }
        if t >= self.duration {
            return self.rest(self.target);
        }
        let c = &self.coeffs;
        let (mut p, mut v, mut a) = (T::zero(), T::zero(), T::zero());
        for (i, &ci) in c.iter().enumerate() {
            let n = 5 - i;
            p = p * t + ci;
            if n >= 1 {
                v = v * t + T::from_usize(n).unwrap() * ci;
            }
            if n >= 2 {
                a = a * t + T::from_usize(n * (n - 1)).unwrap() * ci;
            }
        }
        SegmentSample {
            position: p,
            velocity: v,
            acceleration: a,
        }
    }

    fn rest(&self, position: T) -> SegmentSample<T> {
        SegmentSample {
            position,
            velocity: T::zero(),
            acceleration: T::zero(),
        }
    }

    pub fn displacement(&self) -> T {
        self.target - self.start
    }
}

/// Synchronized shoulder and elbow segments sharing one duration.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedTrajectory<T> {
    pub shoulder: QuinticSegment<T>,
    pub elbow: QuinticSegment<T>,
    pub label: String,
    pub mode: ActuationMode,
}

impl<T: Real> PlannedTrajectory<T> {
    pub fn duration(&self) -> T {
        self.shoulder.duration
    }

    /// Desired joint angles and rates at time `t`.
    pub fn desired(&self, t: T) -> (JointAngles<T>, JointAngles<T>) {
        let s = self.shoulder.eval(t);
        let e = self.elbow.eval(t);
        (
            JointAngles::new(s.position, e.position),
            JointAngles::new(s.velocity, e.velocity),
        )
    }

    /// Largest wrist speed over samples every `step` seconds, endpoints included.
    pub fn peak_wrist_speed(&self, geom: &ArmGeometry<T>, step: T) -> T {
        let n = (self.duration() / step).ceil().to_usize().unwrap_or(0);
        (0..=n)
            .map(|k| {
                let t = (T::from_usize(k).unwrap() * step).min(self.duration());
                let (q, qdot) = self.desired(t);
                geom.end_effector_speed(&q, &qdot)
            })
            .fold(T::zero(), T::max)
    }
}

/// Plans both joints over a common duration.
///
/// Starts at `spec.duration` and grows it by [`DURATION_GROWTH`] until the
/// wrist speed sampled every [`SPEED_CHECK_STEP`] stays under `limits.peak_speed`.
pub fn plan<T: Real>(
    geom: &ArmGeometry<T>,
    spec: &TrajectorySpec<T>,
    limits: &ReachingLimits<T>,
) -> Result<PlannedTrajectory<T>> {
    spec.validate(geom)?;
    let step = T::lit(SPEED_CHECK_STEP);
    let mut duration = spec.duration;
    let mut planned = build(spec, duration)?;
    for _ in 0..MAX_EXTENSIONS {
        if planned.peak_wrist_speed(geom, step) <= limits.peak_speed {
            break;
        }
        duration *= T::lit(DURATION_GROWTH);
        planned = build(spec, duration)?;
    }
    Ok(planned)
}

fn build<T: Real>(spec: &TrajectorySpec<T>, duration: T) -> Result<PlannedTrajectory<T>> {
    Ok(PlannedTrajectory {
        shoulder: QuinticSegment::solve(
            Joint::Shoulder,
            spec.start.theta_s,
            spec.target.theta_s,
            duration,
        )?,
        elbow: QuinticSegment::solve(Joint::Elbow, spec.start.theta_e, spec.target.theta_e, duration)?,
        label: spec.label.clone(),
        mode: spec.mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Canonical minimum-jerk coefficients, highest power first.
    fn min_jerk_coeffs(start: f64, target: f64, t: f64) -> [f64; 6] {
        let d = target - start;
        [6.0 * d / t.powi(5), -15.0 * d / t.powi(4), 10.0 * d / t.powi(3), 0.0, 0.0, start]
    }

    #[test]
    fn zero_displacement_is_constant() {
        let seg = QuinticSegment::solve(Joint::Elbow, 0.0, 0.0, 2.5).unwrap();
        assert!(seg.coeffs.iter().all(|&c| c == 0.0));
        assert_eq!(seg.eval(1.0).position, 0.0);
    }

    #[test]
    fn midpoint_and_peak_rate() {
        let seg = QuinticSegment::solve(Joint::Shoulder, 0.0, PI / 2.0, 1.0).unwrap();
        let mid = seg.eval(0.5);
        assert!((mid.position - PI / 4.0).abs() < 1e-12);
        // brute-force maximum of the velocity on a fine grid
        let peak = (0..=100_000)
            .map(|k| seg.eval(k as f64 / 100_000.0).velocity)
            .fold(f64::MIN, f64::max);
        assert!((peak - 2.9452431127).abs() < 1e-9);
        assert!((mid.velocity - 1.875 * PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn endpoints_and_hold() {
        let seg = QuinticSegment::<f64>::solve(Joint::Elbow, 0.2, 1.1, 0.8).unwrap();
        let s0 = seg.eval(0.0);
        assert_eq!((s0.position, s0.velocity, s0.acceleration), (0.2, 0.0, 0.0));
        let st = seg.eval(0.8);
        assert_eq!((st.position, st.velocity, st.acceleration), (1.1, 0.0, 0.0));
        let s2 = seg.eval(1.6);
        assert_eq!((s2.position, s2.velocity, s2.acceleration), (1.1, 0.0, 0.0));
        // the polynomial itself meets the boundary too, just inside the interval
        let inner = seg.eval(0.8 - 1e-9);
        assert!((inner.position - 1.1).abs() < 1e-12);
    }

    #[test]
    fn coefficients_match_min_jerk_form() {
        for &(s, g, t) in &[(0.0, 1.0, 1.0), (PI / 2.0, 0.0, 1.7), (0.3, -0.4, 0.1)] {
            let seg = QuinticSegment::solve(Joint::Shoulder, s, g, t).unwrap();
            let expect = min_jerk_coeffs(s, g, t);
            for (a, b) in seg.coeffs.iter().zip(expect) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_non_positive_duration() {
        assert!(matches!(
            QuinticSegment::solve(Joint::Elbow, 0.0, 1.0, 0.0),
            Err(Error::NonPositiveDuration(_))
        ));
        assert!(QuinticSegment::solve(Joint::Elbow, 0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn table_specs() {
        let specs = table3_setpoints::<f64>();
        assert_eq!(specs.len(), 8);
        let p2 = &specs[1];
        assert_eq!((p2.target.theta_s, p2.target.theta_e), (PI / 2.0, PI / 2.0));
        assert_eq!(p2.mode, ActuationMode::BicepsOnly);
        let p6 = &specs[5];
        assert_eq!((p6.target.theta_s, p6.target.theta_e), (0.0, 0.0));
        assert_eq!(p6.mode, ActuationMode::DeltoidOnly);
        let p5 = &specs[4];
        assert_eq!((p5.target.theta_s, p5.target.theta_e), (PI / 4.0, PI / 2.0));
        assert_eq!(p5.mode, ActuationMode::CombinedMuscle);
        for s in &specs {
            assert_eq!(ActuationMode::classify(&s.start, &s.target), Some(s.mode));
        }
        assert_eq!(
            (2, 2, 4),
            specs.iter().fold((0, 0, 0), |acc, s| match s.mode {
                ActuationMode::BicepsOnly => (acc.0 + 1, acc.1, acc.2),
                ActuationMode::DeltoidOnly => (acc.0, acc.1 + 1, acc.2),
                ActuationMode::CombinedMuscle => (acc.0, acc.1, acc.2 + 1),
            })
        );
    }

    #[test]
    fn spec_mode_mismatch() {
        let start = JointAngles::new(PI / 2.0, 0.0);
        let target = JointAngles::new(PI / 2.0, 1.0);
        assert!(matches!(
            TrajectorySpec::new("x", start, target, 1.0, ActuationMode::DeltoidOnly),
            Err(Error::ModeMismatch { .. })
        ));
        assert!(matches!(
            TrajectorySpec::inferred("x", start, start, 1.0),
            Err(Error::NoMotion)
        ));
    }

    #[test]
    fn plan_keeps_default_duration_for_slow_reaches() {
        let geom = ArmGeometry::default();
        let limits = ReachingLimits::default();
        // closed-form peak: 1.875·|Δθs|/T times the full lever arm
        for (label, bound) in [("P3", 1.875 * PI / 4.0 * 0.14), ("P6", 1.875 * PI / 2.0 * 0.14)] {
            let spec = setpoint_spec::<f64>(label).unwrap();
            let planned = plan(&geom, &spec, &limits).unwrap();
            assert_eq!(planned.duration(), 1.0);
            let peak = planned.peak_wrist_speed(&geom, 1e-3);
            assert!(peak <= bound + 1e-12 && peak > 0.99 * bound, "{label}: {peak} vs {bound}");
        }
    }

    #[test]
    fn plan_extends_fast_reaches() {
        let geom = ArmGeometry::default();
        let limits = ReachingLimits::default();
        let spec = TrajectorySpec::inferred(
            "fast",
            JointAngles::new(PI / 2.0, 0.0),
            JointAngles::new(0.0, 0.0),
            0.1,
        )
        .unwrap();
        let planned = plan(&geom, &spec, &limits).unwrap();
        let t = planned.duration();
        // smallest 0.1·1.1^k whose sampled peak is under the cap
        let mut k = 0;
        let expected = loop {
            let cand = 0.1 * 1.1f64.powi(k);
            let p = plan(&geom, &spec.clone().with_duration(cand), &ReachingLimits {
                peak_speed: f64::INFINITY,
                ..limits
            })
            .unwrap();
            if p.peak_wrist_speed(&geom, 1e-3) <= 0.5654 {
                break cand;
            }
            k += 1;
        };
        assert!((t - expected).abs() < 1e-12, "{t} vs {expected}");
        assert!(planned.peak_wrist_speed(&geom, 1e-3) <= 0.5654);
        assert!(t > 0.1);
    }

    #[test]
    fn plan_rejects_out_of_limit_targets() {
        let spec = TrajectorySpec::inferred(
            "bad",
            JointAngles::new(PI / 2.0, 0.0),
            JointAngles::new(PI / 2.0, 2.0),
            1.0,
        )
        .unwrap();
        assert!(matches!(
            plan(&ArmGeometry::default(), &spec, &ReachingLimits::default()),
            Err(Error::LimitViolation { .. })
        ));
    }
}
