//! Kinematic bicycle model of an Ackermann-steered vehicle.
//!
//! State propagation uses the slip-angle form
//!   x' = v cos(psi + beta),  y' = v sin(psi + beta),
//!   psi' = (v / l_r) sin(beta),  beta = atan(l_r / (l_f + l_r) * tan(delta))
//! integrated with explicit Euler at the control period. The model is
//! intended for low speeds; see the Euler convergence test for the
//! observed O(dt) behaviour.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Geometry and limits of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Center of mass to front axle, meters.
    pub l_f: f64,
    /// Center of mass to rear axle, meters.
    pub l_r: f64,
    /// Speed limit, m/s.
    pub max_speed: f64,
    /// Steering limit, radians.
    pub max_steer: f64,
    /// Collision footprint radius, meters.
    pub footprint_radius: f64,
}

impl Default for VehicleParams {
    /// 1/10-scale platform: 0.32 m wheelbase split evenly.
    fn default() -> Self {
        VehicleParams {
            l_f: 0.16,
            l_r: 0.16,
            max_speed: 2.0,
            max_steer: 0.4,
            footprint_radius: 0.3,
        }
    }
}

impl VehicleParams {
    pub fn wheelbase(&self) -> f64 {
        self.l_f + self.l_r
    }
}

/// Pose plus speed. Heading is kept normalized to [-pi, pi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        VehicleState { x, y, psi: normalize_angle(psi), v: 0.0 }
    }

    pub fn pose(&self) -> (f64, f64, f64) {
        (self.x, self.y, self.psi)
    }
}

/// Wraps an angle into [-pi, pi).
pub fn normalize_angle(a: f64) -> f64 {
    let wrapped = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can return exactly 2*pi - eps; the subtraction keeps the
    // result in range, but -0.0 folds to 0.0 here for a clean invariant.
    if wrapped == -PI && a > 0.0 {
        -PI
    } else {
        wrapped
    }
}

/// Slip angle between the velocity vector at the center of mass and the
/// longitudinal axis, for steering angle `delta`.
pub fn slip_angle(delta: f64, params: &VehicleParams) -> f64 {
    (params.l_r / (params.l_f + params.l_r) * delta.tan()).atan()
}

/// One explicit Euler step of the bicycle kinematics under control
/// `(v, delta)` over `dt` seconds. The returned heading is renormalized.
pub fn step_kinematics(
    state: &VehicleState,
    v: f64,
    delta: f64,
    dt: f64,
    params: &VehicleParams,
) -> VehicleState {
    let beta = slip_angle(delta, params);
    let x = state.x + v * (state.psi + beta).cos() * dt;
    let y = state.y + v * (state.psi + beta).sin() * dt;
    let psi = normalize_angle(state.psi + v / params.l_r * beta.sin() * dt);
    VehicleState { x, y, psi, v }
}

/// Inverts the yaw-rate relation omega = (v / l_r) sin(beta(delta)) to a
/// steering angle, saturating at the vehicle's limits. At standstill there
/// is no yaw authority and the result is 0.
pub fn omega_to_steer(v: f64, omega: f64, params: &VehicleParams) -> f64 {
    if v.abs() < 1e-6 {
        return 0.0;
    }
    let sin_beta = (omega * params.l_r / v).clamp(-1.0, 1.0);
    let beta = sin_beta.asin();
    let delta = (beta.tan() * (params.l_f + params.l_r) / params.l_r).atan();
    delta.clamp(-params.max_steer, params.max_steer)
}
