//! Kinematics, trajectory planning, actuator models, IMU sensing, PD control,
//! model identification and closed-loop simulation for a two-joint soft
//! pneumatic arm.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

pub mod control;
pub mod error;
pub mod harness;
pub mod kinematics;
pub mod linalg;
pub mod plant;
pub mod scalar;
pub mod sensing;
pub mod sysid;
pub mod trajectory;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ArmGeometryF64 = kinematics::ArmGeometry<f64>;
pub type ArmGeometryF32 = kinematics::ArmGeometry<f32>;
pub type JointAnglesF64 = kinematics::JointAngles<f64>;
pub type JointAnglesF32 = kinematics::JointAngles<f32>;
pub type CartesianPointF64 = kinematics::CartesianPoint<f64>;
pub type CartesianPointF32 = kinematics::CartesianPoint<f32>;
pub type TrajectorySpecF64 = trajectory::TrajectorySpec<f64>;
pub type TrajectorySpecF32 = trajectory::TrajectorySpec<f32>;
pub type SecondOrderModelF64 = plant::SecondOrderModel<f64>;
pub type SecondOrderModelF32 = plant::SecondOrderModel<f32>;
pub type DiscretePlantF64 = plant::DiscretePlant<f64>;
pub type DiscretePlantF32 = plant::DiscretePlant<f32>;
pub type PdGainsF64 = control::PdGains<f64>;
pub type PdGainsF32 = control::PdGains<f32>;
pub type QuaternionF64 = sensing::Quaternion<f64>;
pub type QuaternionF32 = sensing::Quaternion<f32>;
pub type StepResponseDatasetF64 = sysid::StepResponseDataset<f64>;
pub type StepResponseDatasetF32 = sysid::StepResponseDataset<f32>;
pub type ScenarioF64 = harness::Scenario<f64>;
pub type ScenarioF32 = harness::Scenario<f32>;
pub type SimLogF64 = harness::SimLog<f64>;
pub type SimLogF32 = harness::SimLog<f32>;
