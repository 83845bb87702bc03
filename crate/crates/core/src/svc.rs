//! Subjective-vertical-conflict observer (In-1 topology).
//!
//! Sensed pathway: semicircular canals as a first-order high-pass with time
//! constant `tau_d`, otoliths as identity, and the generalized Mayne
//! low-pass with rotational transport to estimate the vertical. The
//! internal model copies the same structure and is driven by scaled true
//! motion plus conflict feedback; only the vertical conflict has an
//! integral feedback path.

use crate::error::{Error, Result};
use crate::motion::{MotionSample, DEFAULT_GRAVITY};
use crate::ode::OdeState;
use crate::vec3::Vec3;

/// Observer gains and time constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvcParams {
    /// Gain on true acceleration feeding the internal model.
    pub k_a: f64,
    /// Gain on true angular velocity feeding the internal model.
    pub k_w: f64,
    /// Acceleration-conflict feedback gain.
    pub k_ac: f64,
    /// Angular-velocity-conflict feedback gain.
    pub k_wc: f64,
    /// Integral vertical-conflict feedback gain.
    pub k_vc: f64,
    /// Mayne low-pass time constant, s.
    pub tau: f64,
    /// Canal time constant, s.
    pub tau_d: f64,
    /// Gravity magnitude, m/s².
    pub g0: f64,
}

impl Default for SvcParams {
    fn default() -> Self {
        SvcParams {
            k_a: 0.1,
            k_w: 0.1,
            k_ac: 0.5,
            k_wc: 10.0,
            k_vc: 5.0,
            tau: 2.0,
            tau_d: 7.0,
            g0: DEFAULT_GRAVITY,
        }
    }
}

impl SvcParams {
    /// Name/value pairs in a fixed order, for manifests and reports.
    pub fn named_values(&self) -> [(&'static str, f64); 8] {
        [
            ("K_a", self.k_a),
            ("K_w", self.k_w),
            ("K_ac", self.k_ac),
            ("K_wc", self.k_wc),
            ("K_vc", self.k_vc),
            ("tau", self.tau),
            ("tau_d", self.tau_d),
            ("g0", self.g0),
        ]
    }

    /// All gains and time constants must be positive; `g0` may be zero for
    /// weightless configurations.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.named_values() {
            let ok = if name == "g0" { v >= 0.0 } else { v > 0.0 };
            if !ok || !v.is_finite() {
                return Err(Error::Invalid(format!("SVC parameter {name} = {v}")));
            }
        }
        Ok(())
    }
}

/// Observer state: 15 scalars.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SvcState {
    /// Canal low-pass state, so that sensed `omega_s = omega - x_scc`.
    pub x_scc: Vec3,
    /// Internal-model canal state.
    pub x_scc_hat: Vec3,
    /// Sensed vertical.
    pub v_s: Vec3,
    /// Expected vertical.
    pub v_s_hat: Vec3,
    /// Integral of the vertical conflict.
    pub i_dv: Vec3,
}

impl SvcState {
    pub const DIM: usize = 15;

    pub fn to_array(&self) -> [f64; 15] {
        let mut out = [0.0; 15];
        for (k, v) in [self.x_scc, self.x_scc_hat, self.v_s, self.v_s_hat, self.i_dv]
            .iter()
            .enumerate()
        {
            out[3 * k..3 * k + 3].copy_from_slice(&v.to_array());
        }
        out
    }

    pub fn from_array(a: &[f64; 15]) -> Self {
        SvcState {
            x_scc: Vec3::from_slice(&a[0..3]),
            x_scc_hat: Vec3::from_slice(&a[3..6]),
            v_s: Vec3::from_slice(&a[6..9]),
            v_s_hat: Vec3::from_slice(&a[9..12]),
            i_dv: Vec3::from_slice(&a[12..15]),
        }
    }

    /// Index of the first non-finite scalar, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.to_array().iter().position(|v| !v.is_finite())
    }
}

impl OdeState for SvcState {
    #[inline]
    fn add_scaled(&self, k: &Self, h: f64) -> Self {
        SvcState {
            x_scc: self.x_scc.add_scaled(k.x_scc, h),
            x_scc_hat: self.x_scc_hat.add_scaled(k.x_scc_hat, h),
            v_s: self.v_s.add_scaled(k.v_s, h),
            v_s_hat: self.v_s_hat.add_scaled(k.v_s_hat, h),
            i_dv: self.i_dv.add_scaled(k.i_dv, h),
        }
    }
}

/// Signals of the two algebraic feedback loops, resolved at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeedbackSolution {
    pub omega_s: Vec3,
    pub omega_hat: Vec3,
    pub omega_s_hat: Vec3,
    pub f_hat: Vec3,
    pub a_s: Vec3,
    pub a_s_hat: Vec3,
    pub delta_a: Vec3,
    pub delta_omega: Vec3,
    pub delta_v: Vec3,
}

/// Rest equilibrium: canal states zero, both verticals on `(0, 0, g0)`, and
/// the conflict integral preloaded so the expected specific force equals
/// gravity with zero conflict.
pub fn initial_state(params: &SvcParams) -> SvcState {
    let g = Vec3::new(0.0, 0.0, params.g0);
    SvcState {
        x_scc: Vec3::ZERO,
        x_scc_hat: Vec3::ZERO,
        v_s: g,
        v_s_hat: g,
        i_dv: g * (1.0 / params.k_vc),
    }
}

/// Solves the canal and specific-force feedback loops in closed form.
///
/// Both loops are linear with direct feedthrough:
/// `omega_hat = K_w omega + K_wc (omega_s - (omega_hat - x_scc_hat))` and
/// `f_hat = K_a a + K_ac (a_s - (f_hat - v_s_hat)) + K_vc I`.
#[inline]
pub fn resolve_feedback(state: &SvcState, input: &MotionSample, p: &SvcParams) -> FeedbackSolution {
    let omega_s = input.omega - state.x_scc;
    let omega_hat = (input.omega * p.k_w + (omega_s + state.x_scc_hat) * p.k_wc) * (1.0 / (1.0 + p.k_wc));
    let omega_s_hat = omega_hat - state.x_scc_hat;

    let a_s = input.f - state.v_s;
    let f_hat = (input.a * p.k_a + (a_s + state.v_s_hat) * p.k_ac + state.i_dv * p.k_vc) * (1.0 / (1.0 + p.k_ac));
    let a_s_hat = f_hat - state.v_s_hat;

    FeedbackSolution {
        omega_s,
        omega_hat,
        omega_s_hat,
        f_hat,
        a_s,
        a_s_hat,
        delta_a: a_s - a_s_hat,
        delta_omega: omega_s - omega_s_hat,
        delta_v: state.v_s - state.v_s_hat,
    }
}

/// State derivative together with the feedback signals it was computed from.
#[inline]
pub fn derivatives_with_feedback(
    state: &SvcState,
    input: &MotionSample,
    p: &SvcParams,
) -> (SvcState, FeedbackSolution) {
    let fb = resolve_feedback(state, input, p);
    let inv_tau = 1.0 / p.tau;
    let inv_tau_d = 1.0 / p.tau_d;
    let d = SvcState {
        x_scc: (input.omega - state.x_scc) * inv_tau_d,
        x_scc_hat: (fb.omega_hat - state.x_scc_hat) * inv_tau_d,
        v_s: (input.f - state.v_s) * inv_tau - fb.omega_s.cross(state.v_s),
        v_s_hat: (fb.f_hat - state.v_s_hat) * inv_tau - fb.omega_s_hat.cross(state.v_s_hat),
        i_dv: fb.delta_v,
    };
    (d, fb)
}

pub fn derivatives(state: &SvcState, input: &MotionSample, p: &SvcParams) -> SvcState {
    derivatives_with_feedback(state, input, p).0
}

/// `‖Δv‖`, the conflict magnitude driving the output part.
pub fn conflict_norm(fb: &FeedbackSolution) -> f64 {
    fb.delta_v.norm()
}
