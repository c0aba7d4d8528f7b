//! Synthetic IMU orientation feedback.
//!
//! The upper-arm sensor reports the orientation of the first link frame and
//! the forearm sensor the orientation of the wrist frame. Shoulder angle comes
//! from the upper-arm heading, elbow angle from the relative rotation between
//! the two sensors. The torso frame is the identity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};

use crate::error::{Error, Result};
use crate::kinematics::JointAngles;
use crate::linalg::Mat;
use crate::scalar::Real;

/// Magnitude below which both extraction arctangent arguments count as zero.
pub const GIMBAL_EPS: f64 = 1e-12;

/// Unit quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Quaternion<T> {
    /// Normalizing constructor. A zero quaternion becomes the identity.
    pub fn new(w: T, x: T, y: T, z: T) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if n == T::zero() || !n.is_finite() {
            return Self::identity();
        }
        Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        }
    }

    pub fn identity() -> Self {
        Self {
            w: T::one(),
            x: T::zero(),
            y: T::zero(),
            z: T::zero(),
        }
    }

    pub fn norm(&self) -> T {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Rotation by `|v|` radians about `v`.
    pub fn from_rotation_vector(v: [T; 3]) -> Self {
        let angle = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if angle == T::zero() {
            return Self::identity();
        }
        let half = angle / T::lit(2.0);
        let s = half.sin() / angle;
        Self::new(half.cos(), v[0] * s, v[1] * s, v[2] * s)
    }

    pub fn conjugate(&self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Hamilton product `self ⊗ rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        let (a, b) = (self, rhs);
        Self {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
    }

    pub fn to_rotation_matrix(&self) -> Mat<T, 3> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        let two = T::lit(2.0);
        let one = T::one();
        [
            [one - two * (y * y + z * z), two * (x * y - w * z), two * (x * z + w * y)],
            [two * (x * y + w * z), one - two * (x * x + z * z), two * (y * z - w * x)],
            [two * (x * z - w * y), two * (y * z + w * x), one - two * (x * x + y * y)],
        ]
    }

    /// Quaternion of a proper rotation matrix (largest-pivot method).
    pub fn from_rotation_matrix(r: &Mat<T, 3>) -> Self {
        let one = T::one();
        let quarter = T::lit(0.25);
        let trace = r[0][0] + r[1][1] + r[2][2];
        if trace > T::zero() {
            let s = (trace + one).sqrt() * T::lit(2.0);
            Self::new(
                quarter * s,
                (r[2][1] - r[1][2]) / s,
                (r[0][2] - r[2][0]) / s,
                (r[1][0] - r[0][1]) / s,
            )
        } else if r[0][0] > r[1][1] && r[0][0] > r[2][2] {
            let s = (one + r[0][0] - r[1][1] - r[2][2]).sqrt() * T::lit(2.0);
            Self::new(
                (r[2][1] - r[1][2]) / s,
                quarter * s,
                (r[0][1] + r[1][0]) / s,
                (r[0][2] + r[2][0]) / s,
            )
        } else if r[1][1] > r[2][2] {
            let s = (one + r[1][1] - r[0][0] - r[2][2]).sqrt() * T::lit(2.0);
            Self::new(
                (r[0][2] - r[2][0]) / s,
                (r[0][1] + r[1][0]) / s,
                quarter * s,
                (r[1][2] + r[2][1]) / s,
            )
        } else {
            let s = (one + r[2][2] - r[0][0] - r[1][1]).sqrt() * T::lit(2.0);
            Self::new(
                (r[1][0] - r[0][1]) / s,
                (r[0][2] + r[2][0]) / s,
                (r[1][2] + r[2][1]) / s,
                quarter * s,
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuReading<T> {
    pub q_upper: Quaternion<T>,
    pub q_fore: Quaternion<T>,
    /// Seconds.
    pub t: T,
}

/// Orientation error model for both sensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Per-axis standard deviation of the perturbation rotation vector, degrees.
    pub sigma_deg: f64,
    /// Constant per-sensor rotation, degrees.
    pub bias_deg: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_deg: 0.5,
            bias_deg: 0.0,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            sigma_deg: 0.0,
            bias_deg: 0.0,
            seed: 0,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma_deg == 0.0 && self.bias_deg == 0.0
    }
}

/// Rotation of the upper-arm link frame: `Rz(θs)·Rx(π/2)`.
pub fn upper_arm_rotation<T: Real>(theta_s: T) -> Mat<T, 3> {
    let (s, c) = theta_s.sin_cos();
    let (o, l) = (T::zero(), T::one());
    [[c, o, s], [s, o, -c], [o, l, o]]
}

/// Rotation of the wrist frame: upper-arm rotation followed by `Rz(θe)`.
pub fn forearm_rotation<T: Real>(q: &JointAngles<T>) -> Mat<T, 3> {
    let (ss, cs) = q.theta_s.sin_cos();
    let (se, ce) = q.theta_e.sin_cos();
    let o = T::zero();
    [
        [cs * ce, -cs * se, ss],
        [ss * ce, -ss * se, -cs],
        [se, ce, o],
    ]
}

/// Exact sensor orientations for a configuration.
pub fn ideal_reading<T: Real>(q: &JointAngles<T>, t: T) -> ImuReading<T> {
    ImuReading {
        q_upper: Quaternion::from_rotation_matrix(&upper_arm_rotation(q.theta_s)),
        q_fore: Quaternion::from_rotation_matrix(&forearm_rotation(q)),
        t,
    }
}

/// Recovers (θs, θe) from a pair of sensor orientations.
pub fn extract_angles<T: Real>(reading: &ImuReading<T>) -> Result<JointAngles<T>> {
    let eps = T::lit(GIMBAL_EPS);
    let ru = reading.q_upper.to_rotation_matrix();
    if ru[1][0].abs() < eps && ru[0][0].abs() < eps {
        return Err(Error::GimbalDegenerate);
    }
    let theta_s = ru[1][0].atan2(ru[0][0]);
    let rel = reading.q_upper.conjugate().mul(&reading.q_fore).to_rotation_matrix();
    if rel[1][0].abs() < eps && rel[0][0].abs() < eps {
        return Err(Error::GimbalDegenerate);
    }
    let theta_e = rel[1][0].atan2(rel[0][0]);
    Ok(JointAngles { theta_s, theta_e })
}

/// Seeded generator of perturbed readings for one simulation run.
#[derive(Debug, Clone)]
pub struct ImuSynthesizer {
    noise: NoiseModel,
    rng: ChaCha8Rng,
    bias_upper: [f64; 3],
    bias_fore: [f64; 3],
}

impl ImuSynthesizer {
    pub fn new(noise: NoiseModel) -> Result<Self> {
        if !(noise.sigma_deg >= 0.0) || !noise.bias_deg.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "noise sigma must be non-negative, got {}",
                noise.sigma_deg
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let bias = noise.bias_deg.to_radians();
        let mut axis = || -> [f64; 3] {
            let a: [f64; 3] = UnitSphere.sample(&mut rng);
            a.map(|c| c * bias)
        };
        let bias_upper = axis();
        let bias_fore = axis();
        Ok(Self {
            noise,
            rng,
            bias_upper,
            bias_fore,
        })
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    fn perturbation<T: Real>(&mut self, bias: [f64; 3]) -> Quaternion<T> {
        let sigma = self.noise.sigma_deg.to_radians();
        let mut v = [0.0f64; 3];
        for (k, slot) in v.iter_mut().enumerate() {
            let g: f64 = StandardNormal.sample(&mut self.rng);
            *slot = sigma * g + bias[k];
        }
        Quaternion::from_rotation_vector(v.map(T::lit))
    }

    /// Reading for the true configuration `q` at time `t`, each sensor
    /// rotated by an independent small world-frame perturbation.
    pub fn synthesize<T: Real>(&mut self, q: &JointAngles<T>, t: T) -> ImuReading<T> {
        let ideal = ideal_reading(q, t);
        if self.noise.is_noiseless() {
            return ideal;
        }
        let du = self.perturbation::<T>(self.bias_upper);
        let df = self.perturbation::<T>(self.bias_fore);
        ImuReading {
            q_upper: du.mul(&ideal.q_upper),
            q_fore: df.mul(&ideal.q_fore),
            t,
        }
    }
}
