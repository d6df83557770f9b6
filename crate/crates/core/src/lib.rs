//! Quaternion attitude estimation from gyroscope, accelerometer and
//! magnetometer data, with a complementary filter, an extended Kalman filter,
//! an unscented Kalman filter and a simulation harness to compare them.

pub mod attitude;
pub mod estimator;
pub mod frontend;
pub mod harness;
pub mod metrics;
pub mod sensors;
pub mod trajectory;
pub mod units;

pub use attitude::{Quaternion, AngularVelocity};
