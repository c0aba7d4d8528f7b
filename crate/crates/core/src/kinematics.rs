//! Analytic kinematics of the two-joint arm (shoulder abduction, elbow flexion).
//!
//! Frames follow the standard Denavit-Hartenberg convention with the base frame
//! anchored at the shoulder:
//!
//! | joint    | θ   | d | r    | α   |
//! |----------|-----|---|------|-----|
//! | shoulder | θs  | 0 | d_se | π/2 |
//! | elbow    | θe  | 0 | d_ew | 0   |
//!
//! The wrist is the end-effector. All lengths are meters, all angles radians.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Round-trip tolerance (meters) used by [`ArmGeometry::inverse_kinematics`].
///
/// Matches the four-decimal precision of the tabulated reach targets.
pub const DEFAULT_REACH_TOLERANCE: f64 = 5e-5;

/// Slack (radians) applied when checking IK solutions against the joint limits.
pub const LIMIT_SLACK: f64 = 1e-9;

/// Absolute tolerance on the 2×2 minors of the position Jacobian.
pub const SINGULARITY_TOLERANCE: f64 = 1e-9;

/// Link lengths and joint limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmGeometry<T> {
    /// Upper-arm length, shoulder to elbow.
    pub d_se: T,
    /// Forearm length, elbow to wrist.
    pub d_ew: T,
    pub theta_s_min: T,
    pub theta_s_max: T,
    pub theta_e_min: T,
    pub theta_e_max: T,
}

/// Configuration-space state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointAngles<T> {
    pub theta_s: T,
    pub theta_e: T,
}

/// Wrist position in the shoulder-anchored inertial frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartesianPoint<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

/// Row-major 4×4 homogeneous transform.
pub type Transform<T> = [[T; 4]; 4];

/// ∂(x, y, z)/∂(θs, θe) at a stored configuration, in meters per radian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionJacobian<T> {
    pub at: JointAngles<T>,
    /// Row-major 3×2 entries.
    pub m: [[T; 2]; 3],
}

/// Determinants of the three square minors of the position Jacobian.
///
/// `j1` drops the z row, `j2` drops the y row, `j3` drops the x row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubDeterminants<T> {
    pub j1: T,
    pub j2: T,
    pub j3: T,
}

impl<T: Real> JointAngles<T> {
    pub fn new(theta_s: T, theta_e: T) -> Self {
        Self { theta_s, theta_e }
    }

    pub fn is_finite(&self) -> bool {
        self.theta_s.is_finite() && self.theta_e.is_finite()
    }
}

impl<T: Real> CartesianPoint<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> T {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(&self, other: &Self) -> T {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

impl<T: Real> Default for ArmGeometry<T> {
    /// 70 mm links, both joints limited to [0, π/2].
    fn default() -> Self {
        Self {
            d_se: T::lit(0.070),
            d_ew: T::lit(0.070),
            theta_s_min: T::zero(),
            theta_s_max: T::FRAC_PI_2(),
            theta_e_min: T::zero(),
            theta_e_max: T::FRAC_PI_2(),
        }
    }
}

impl<T: Real> ArmGeometry<T> {
    /// Geometry with the given link lengths and the default joint limits.
    pub fn new(d_se: T, d_ew: T) -> Result<Self> {
        let geom = Self {
            d_se,
            d_ew,
            ..Self::default()
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn with_limits(mut self, theta_s: (T, T), theta_e: (T, T)) -> Result<Self> {
        (self.theta_s_min, self.theta_s_max) = theta_s;
        (self.theta_e_min, self.theta_e_max) = theta_e;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_se > T::zero() && self.d_ew > T::zero()) {
            return Err(Error::InvalidGeometry("link lengths must be positive"));
        }
        if !(self.theta_s_min <= self.theta_s_max && self.theta_e_min <= self.theta_e_max) {
            return Err(Error::InvalidGeometry("joint limit min exceeds max"));
        }
        Ok(())
    }

    /// Maximum wrist distance from the shoulder.
    pub fn reach(&self) -> T {
        self.d_se + self.d_ew
    }

    /// Closed-interval limit check, no slack.
    pub fn within_limits(&self, q: &JointAngles<T>) -> bool {
        self.within_limits_slack(q, T::zero())
    }

    fn within_limits_slack(&self, q: &JointAngles<T>, slack: T) -> bool {
        q.theta_s >= self.theta_s_min - slack
            && q.theta_s <= self.theta_s_max + slack
            && q.theta_e >= self.theta_e_min - slack
            && q.theta_e <= self.theta_e_max + slack
    }

    pub fn homogeneous_transform(&self, q: &JointAngles<T>) -> Transform<T> {
        let (ss, cs) = q.theta_s.sin_cos();
        let (se, ce) = q.theta_e.sin_cos();
        let radial = self.d_se + self.d_ew * ce;
        let (o, l) = (T::zero(), T::one());
        [
            [cs * ce, -cs * se, ss, cs * radial],
            [ss * ce, -ss * se, -cs, ss * radial],
            [se, ce, o, self.d_ew * se],
            [o, o, o, l],
        ]
    }

    pub fn forward_kinematics(&self, q: &JointAngles<T>) -> CartesianPoint<T> {
        let (ss, cs) = q.theta_s.sin_cos();
        let (se, ce) = q.theta_e.sin_cos();
        let radial = self.d_se + self.d_ew * ce;
        CartesianPoint {
            x: cs * radial,
            y: ss * radial,
            z: self.d_ew * se,
        }
    }

    /// Closed-form inverse kinematics with the default round-trip tolerance.
    pub fn inverse_kinematics(&self, p: &CartesianPoint<T>) -> Result<JointAngles<T>> {
        self.inverse_kinematics_with_tolerance(p, T::lit(DEFAULT_REACH_TOLERANCE))
    }

    /// Closed-form inverse kinematics.
    ///
    /// The two-argument arctangents give a unique candidate; it is accepted only
    /// if it lies inside the joint limits and maps back to `p` within `tol` meters.
    pub fn inverse_kinematics_with_tolerance(
        &self,
        p: &CartesianPoint<T>,
        tol: T,
    ) -> Result<JointAngles<T>> {
        let planar = (p.x * p.x + p.y * p.y).sqrt();
        let tiny = T::epsilon() * self.reach();
        let elbow_offset = planar - self.d_se;
        if planar <= tiny || (p.z.abs() <= tiny && elbow_offset.abs() <= tiny) {
            return Err(Error::DegenerateAtan);
        }
        let q = JointAngles {
            theta_s: p.y.atan2(p.x),
            theta_e: p.z.atan2(elbow_offset),
        };
        let back = self.forward_kinematics(&q);
        if !self.within_limits_slack(&q, T::lit(LIMIT_SLACK)) || back.distance(p) > tol {
            return Err(Error::Unreachable {
                x: p.x.to_f64_lossy(),
                y: p.y.to_f64_lossy(),
                z: p.z.to_f64_lossy(),
            });
        }
        Ok(q)
    }

    pub fn is_reachable(&self, p: &CartesianPoint<T>) -> bool {
        self.inverse_kinematics(p).is_ok()
    }

    pub fn position_jacobian(&self, q: &JointAngles<T>) -> PositionJacobian<T> {
        let (ss, cs) = q.theta_s.sin_cos();
        let (se, ce) = q.theta_e.sin_cos();
        let radial = self.d_se + self.d_ew * ce;
        PositionJacobian {
            at: *q,
            m: [
                [-ss * radial, -self.d_ew * cs * se],
                [cs * radial, -self.d_ew * ss * se],
                [T::zero(), self.d_ew * ce],
            ],
        }
    }

    pub fn submatrix_determinants(&self, q: &JointAngles<T>) -> SubDeterminants<T> {
        let m = self.position_jacobian(q).m;
        let det = |a: [T; 2], b: [T; 2]| a[0] * b[1] - a[1] * b[0];
        SubDeterminants {
            j1: det(m[0], m[1]),
            j2: det(m[0], m[2]),
            j3: det(m[1], m[2]),
        }
    }

    /// Wrist speed ‖J·q̇‖ in m/s for joint rates `qdot` in rad/s.
    pub fn end_effector_speed(&self, q: &JointAngles<T>, qdot: &JointAngles<T>) -> T {
        let v = self.position_jacobian(q).apply(qdot);
        v.norm()
    }

    /// Wrist positions over an `n_per_axis`² grid spanning the joint-limit box.
    ///
    /// Points are ordered with θs as the outer loop. `n_per_axis` below 2 is
    /// raised to 2 so the grid always contains the corners.
    pub fn sample_workspace(&self, n_per_axis: usize) -> Vec<CartesianPoint<T>> {
        let n = n_per_axis.max(2);
        let mut cloud = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let q = JointAngles {
                    theta_s: lerp(self.theta_s_min, self.theta_s_max, i, n),
                    theta_e: lerp(self.theta_e_min, self.theta_e_max, j, n),
                };
                cloud.push(self.forward_kinematics(&q));
            }
        }
        cloud
    }

    /// Evaluates the minors over an `n_per_axis`² grid of the joint-limit box.
    pub fn singularity_scan(
        &self,
        n_per_axis: usize,
    ) -> Vec<(JointAngles<T>, SubDeterminants<T>)> {
        let n = n_per_axis.max(2);
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let q = JointAngles {
                    theta_s: lerp(self.theta_s_min, self.theta_s_max, i, n),
                    theta_e: lerp(self.theta_e_min, self.theta_e_max, j, n),
                };
                out.push((q, self.submatrix_determinants(&q)));
            }
        }
        out
    }
}

/// `i`-th of `n` evenly spaced values from `lo` to `hi`, endpoints exact.
fn lerp<T: Real>(lo: T, hi: T, i: usize, n: usize) -> T {
    if i + 1 == n {
        return hi;
    }
    let f = T::from_usize(i).unwrap() / T::from_usize(n - 1).unwrap();
    lo + (hi - lo) * f
}

impl<T: Real> PositionJacobian<T> {
    pub fn column(&self, j: usize) -> [T; 3] {
        [self.m[0][j], self.m[1][j], self.m[2][j]]
    }

    /// Wrist velocity for joint rates `qdot`.
    pub fn apply(&self, qdot: &JointAngles<T>) -> CartesianPoint<T> {
        let row = |r: [T; 2]| r[0] * qdot.theta_s + r[1] * qdot.theta_e;
        CartesianPoint {
            x: row(self.m[0]),
            y: row(self.m[1]),
            z: row(self.m[2]),
        }
    }

    /// Singular values, largest first, from the eigenvalues of JᵀJ.
    pub fn singular_values(&self) -> [T; 2] {
        let (mut a, mut b, mut d) = (T::zero(), T::zero(), T::zero());
        for r in &self.m {
            a += r[0] * r[0];
            b += r[0] * r[1];
            d += r[1] * r[1];
        }
        let half_trace = (a + d) / T::lit(2.0);
        let disc = (((a - d) / T::lit(2.0)).powi(2) + b * b).sqrt();
        let hi = half_trace + disc;
        // the small eigenvalue via det/hi avoids cancellation
        let lo = if hi > T::zero() {
            (a * d - b * b) / hi
        } else {
            T::zero()
        };
        [hi.max(T::zero()).sqrt(), lo.max(T::zero()).sqrt()]
    }
}

impl<T: Real> SubDeterminants<T> {
    pub fn as_array(&self) -> [T; 3] {
        [self.j1, self.j2, self.j3]
    }

    /// Which minors vanish within `tol`.
    pub fn vanishing(&self, tol: T) -> [bool; 3] {
        self.as_array().map(|d| d.abs() < tol)
    }

    /// Singular when all three minors vanish within `tol`.
    pub fn is_singular(&self, tol: T) -> bool {
        self.vanishing(tol).iter().all(|&v| v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn geom() -> ArmGeometry<f64> {
        ArmGeometry::default()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn transform_at_zero() {
        let t = geom().homogeneous_transform(&JointAngles::new(0.0, 0.0));
        assert!(close(t[0][3], 0.14, 1e-15));
        assert_eq!(t[1][3], 0.0);
        assert_eq!(t[2][3], 0.0);
        assert_eq!(t[3], [0.0, 0.0, 0.0, 1.0]);
        assert_eq!([t[0][0], t[0][1], t[0][2]], [1.0, 0.0, 0.0]);
        assert_eq!([t[1][0], t[1][1], t[1][2]], [0.0, 0.0, -1.0]);
        assert_eq!([t[2][0], t[2][1], t[2][2]], [0.0, 1.0, 0.0]);
    }

    #[test]
    fn transform_translation_matches_fk() {
        let g = geom();
        let t = g.homogeneous_transform(&JointAngles::new(FRAC_PI_2, FRAC_PI_2));
        assert!(close(t[0][3], 0.0, 1e-15));
        assert!(close(t[1][3], 0.07, 1e-15));
        assert!(close(t[2][3], 0.07, 1e-15));
    }

    #[test]
    fn fk_table_points() {
        let g = geom();
        let cases = [
            ((FRAC_PI_2, FRAC_PI_4), (0.0, 0.1195, 0.0495)),
            ((0.0, 0.0), (0.1400, 0.0, 0.0)),
            ((0.0, FRAC_PI_2), (0.0700, 0.0, 0.0700)),
        ];
        for ((s, e), (x, y, z)) in cases {
            let p = g.forward_kinematics(&JointAngles::new(s, e));
            assert!(close(p.x, x, 5e-5) && close(p.y, y, 5e-5) && close(p.z, z, 5e-5));
        }
    }

    #[test]
    fn ik_table_points() {
        let g = geom();
        let q = g
            .inverse_kinematics(&CartesianPoint::new(0.0845, 0.0845, 0.0495))
            .unwrap();
        assert!(close(q.theta_s, FRAC_PI_4, 1e-3) && close(q.theta_e, FRAC_PI_4, 1e-3));
        let q = g
            .inverse_kinematics(&CartesianPoint::new(0.14, 0.0, 0.0))
            .unwrap();
        assert!(close(q.theta_s, 0.0, 1e-12) && close(q.theta_e, 0.0, 1e-12));
    }

    #[test]
    fn ik_errors() {
        let g = geom();
        assert!(matches!(
            g.inverse_kinematics(&CartesianPoint::new(0.20, 0.0, 0.0)),
            Err(Error::Unreachable { .. })
        ));
        assert!(matches!(
            g.inverse_kinematics(&CartesianPoint::new(0.0, 0.0, 0.0)),
            Err(Error::DegenerateAtan)
        ));
        assert!(matches!(
            g.inverse_kinematics(&CartesianPoint::new(0.0, 0.0, 0.14)),
            Err(Error::DegenerateAtan)
        ));
        assert!(matches!(
            g.inverse_kinematics(&CartesianPoint::new(0.07, 0.0, 0.0)),
            Err(Error::DegenerateAtan)
        ));
        // behind the shoulder: θs outside [0, π/2]
        assert!(matches!(
            g.inverse_kinematics(&CartesianPoint::new(-0.14, 0.0, 0.0)),
            Err(Error::Unreachable { .. })
        ));
    }

    #[test]
    fn strict_tolerance_rejects_rounded_table_point() {
        let g = geom();
        let p = CartesianPoint::new(0.0, 0.1195, 0.0495);
        assert!(g.is_reachable(&p));
        assert!(g.inverse_kinematics_with_tolerance(&p, 1e-6).is_err());
    }

    #[test]
    fn reachability_examples() {
        let g = geom();
        assert!(g.is_reachable(&CartesianPoint::new(0.07, 0.0, 0.07)));
        assert!(!g.is_reachable(&CartesianPoint::new(0.20, 0.0, 0.0)));
        assert!(g.is_reachable(&CartesianPoint::new(0.0, 0.1195, 0.0495)));
    }

    #[test]
    fn jacobian_at_zero_and_quarter_turn() {
        let g = geom();
        let j = g.position_jacobian(&JointAngles::new(0.0, 0.0));
        let c1 = j.column(0);
        let c2 = j.column(1);
        assert!(close(c1[0], 0.0, 1e-15) && close(c1[1], 0.14, 1e-15) && c1[2] == 0.0);
        assert!(close(c2[0], 0.0, 1e-15) && close(c2[1], 0.0, 1e-15) && close(c2[2], 0.07, 1e-15));
        let c1 = g.position_jacobian(&JointAngles::new(FRAC_PI_2, 0.0)).column(0);
        assert!(close(c1[0], -0.14, 1e-15) && close(c1[1], 0.0, 1e-15) && c1[2] == 0.0);
    }

    #[test]
    fn det_j1_vanishes_with_straight_elbow() {
        let g = geom();
        for k in 0..=10 {
            let s = FRAC_PI_2 * k as f64 / 10.0;
            let d = g.submatrix_determinants(&JointAngles::new(s, 0.0));
            assert!(d.j1.abs() < 1e-15);
        }
        // symbolic form d_ew·sinθe·(d_se + d_ew·cosθe)
        let q = JointAngles::new(0.3, 0.7);
        let d = g.submatrix_determinants(&q);
        assert!(close(d.j1, 0.07 * 0.7f64.sin() * (0.07 + 0.07 * 0.7f64.cos()), 1e-15));
    }

    #[test]
    fn end_effector_speed_examples() {
        let g = geom();
        let zero = JointAngles::new(0.0, 0.0);
        assert_eq!(g.end_effector_speed(&zero, &JointAngles::new(0.0, 0.0)), 0.0);
        assert!(close(g.end_effector_speed(&zero, &JointAngles::new(1.0, 0.0)), 0.14, 1e-15));
        assert!(close(g.end_effector_speed(&zero, &JointAngles::new(0.0, 1.0)), 0.07, 1e-15));
    }

    #[test]
    fn workspace_corners_and_bounds() {
        let g = geom();
        let cloud = g.sample_workspace(2);
        assert_eq!(cloud.len(), 4);
        let corners = [
            (0.0, 0.0),
            (0.0, FRAC_PI_2),
            (FRAC_PI_2, 0.0),
            (FRAC_PI_2, FRAC_PI_2),
        ];
        for (p, (s, e)) in cloud.iter().zip(corners) {
            assert_eq!(*p, g.forward_kinematics(&JointAngles::new(s, e)));
        }
        let cloud = g.sample_workspace(25);
        assert!(cloud.iter().all(|p| g.is_reachable(p)));
        let rmax = cloud.iter().map(|p| p.norm()).fold(0.0, f64::max);
        assert!(close(rmax, 0.14, 1e-15));
    }

    #[test]
    fn invalid_geometry() {
        assert!(ArmGeometry::<f64>::new(0.0, 0.07).is_err());
        assert!(ArmGeometry::<f64>::default()
            .with_limits((1.0, 0.0), (0.0, 1.0))
            .is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let g = ArmGeometry::<f32>::default();
        let q = JointAngles::new(0.4f32, 0.9);
        let back = g.inverse_kinematics(&g.forward_kinematics(&q)).unwrap();
        assert!((back.theta_s - q.theta_s).abs() < 1e-5);
        assert!((back.theta_e - q.theta_e).abs() < 1e-5);
    }
}
