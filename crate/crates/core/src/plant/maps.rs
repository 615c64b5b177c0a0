//! Fitted polynomial maps: compressor load torque, compressor flow and the
//! return-manifold outlet.

use std::f64::consts::PI;

use crate::params::MapCoefficients;

/// Load torque the compressor demands [N*m].
///
/// `pi/30 * (a0 + a1 w + a00 + a10 P + a20 P^2 + a01 w + a11 P w + a02 w^2)`
/// with `w = speed_scale * omega_cp` and `P = pressure_scale * p_sm`. The
/// `alpha_ij` follow the same `P^i * w^j` pairing as the flow map.
pub fn load_torque(omega_cp: f64, p_sm: f64, maps: &MapCoefficients) -> f64 {
    let w = maps.speed_scale * omega_cp;
    let p = maps.pressure_scale * p_sm;
    let [a0, a1, a00, a10, a20, a01, a11, a02] = maps.alpha;
    PI / 30.0 * (a0 + a1 * w + a00 + p * (a10 + a20 * p + a11 * w) + w * (a01 + a02 * w))
}

/// Compressor mass flow [kg/s] and whether the raw polynomial went negative
/// and was clamped to zero.
pub fn compressor_flow(omega_cp: f64, p_sm: f64, maps: &MapCoefficients) -> (f64, bool) {
    let w = maps.speed_scale * omega_cp;
    let p = maps.pressure_scale * p_sm;
    let [b00, b10, b20, b01, b11, b02] = maps.beta;
    let raw = b00 + p * (b10 + b20 * p + b11 * w) + w * (b01 + b02 * w);
    if raw < 0.0 {
        (0.0, true)
    } else {
        (raw, false)
    }
}

/// Return-manifold outlet flow [kg/s] and clamp flag.
///
/// `-(a1 x + a2 x^2 + ... + a5 x^5)` with
/// `x = pressure_scale * (p_rm - rm_back_pressure)`. The constant `a0` is not
/// part of the sum. With the shipped coefficients (all of `a1..a5` negative)
/// this is zero at the back pressure and increases monotonically above it;
/// below the back pressure the negative raw value is clamped to zero.
pub fn return_manifold_outflow(p_rm: f64, maps: &MapCoefficients) -> (f64, bool) {
    let x = maps.pressure_scale * (p_rm - maps.rm_back_pressure);
    let sum = maps.pa[1..]
        .iter()
        .rev()
        .fold(0.0, |acc, &a| (acc + a) * x);
    let raw = -sum;
    if raw < 0.0 {
        (0.0, true)
    } else {
        (raw, false)
    }
}
