//! CO2 accounting from speed/acceleration trajectories.
//!
//! The instantaneous rate is a cubic polynomial in speed plus a positive-
//! acceleration term, clamped at zero. Absolute outputs are in model mass
//! units; comparisons between runs are ratio-based, so only the shape of the
//! polynomial matters.

use serde::{Deserialize, Serialize};

/// Coefficients of the emission polynomial
/// `c0 + c1*v + c2*v^2 + c3*v^3 + c4*max(a, 0)*v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionCoeffs {
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default = "default_c1")]
    pub c1: f64,
    #[serde(default = "default_c2")]
    pub c2: f64,
    #[serde(default = "default_c3")]
    pub c3: f64,
    #[serde(default = "default_c4")]
    pub c4: f64,
}

fn default_c0() -> f64 {
    1.0
}
fn default_c1() -> f64 {
    0.05
}
fn default_c2() -> f64 {
    0.01
}
fn default_c3() -> f64 {
    0.0005
}
fn default_c4() -> f64 {
    0.2
}

impl Default for EmissionCoeffs {
    fn default() -> Self {
        EmissionCoeffs {
            c0: default_c0(),
            c1: default_c1(),
            c2: default_c2(),
            c3: default_c3(),
            c4: default_c4(),
        }
    }
}

/// Instantaneous emission rate (mass units per second) at speed `v_mps` and
/// acceleration `a_mps2`. Never negative; deceleration contributes nothing.
pub fn co2_rate(v_mps: f64, a_mps2: f64, coeffs: &EmissionCoeffs) -> f64 {
    let v = v_mps;
    let rate = coeffs.c0
        + coeffs.c1 * v
        + coeffs.c2 * v * v
        + coeffs.c3 * v * v * v
        + coeffs.c4 * a_mps2.max(0.0) * v;
    rate.max(0.0)
}

/// Integrates the rate over a sampled trajectory of `(speed, acceleration)`
/// pairs spaced `dt_s` apart (left Riemann sum).
pub fn integrate_emissions(samples: &[(f64, f64)], coeffs: &EmissionCoeffs, dt_s: f64) -> f64 {
    samples
        .iter()
        .map(|&(v, a)| co2_rate(v, a, coeffs) * dt_s)
        .sum()
}
