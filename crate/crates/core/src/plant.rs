//! Simulated ground-truth dynamics.
//!
//! The controller only ever sees the measured stacked state `(x_1, ..., x_r)`
//! and the known first-layer input map `G1`; masses, damping and disturbances
//! stay on this side of the fence. Plants are integrated in their own natural
//! coordinates and any output transform is applied at the measurement
//! boundary.

use crate::controller::InputMap;
use crate::error::CtrlError;
use crate::signal::TimeSignal;

type RhsFn = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;
type MeasureFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A simulated plant: internal state dynamics plus the measurement map onto
/// the stacked controller-facing state of dimension `n * r`.
pub struct Plant {
    n: usize,
    r: usize,
    state_dim: usize,
    rhs: Box<RhsFn>,
    measure: Box<MeasureFn>,
    g1: InputMap,
}

impl Plant {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Dimension of the internal integration state.
    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// The first-layer input map the controller is allowed to know.
    pub fn g1_known(&self) -> InputMap {
        self.g1
    }

    /// Internal-state derivative under control `u`.
    pub fn rhs(&self, t: f64, state: &[f64], u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(state.len(), self.state_dim);
        debug_assert_eq!(u.len(), self.n);
        debug_assert_eq!(out.len(), self.state_dim);
        (self.rhs)(t, state, u, out)
    }

    /// Measured stacked state `(x_1, ..., x_r)`.
    pub fn measure(&self, state: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.r];
        (self.measure)(state, &mut out);
        out
    }
}

impl std::fmt::Debug for Plant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Plant")
            .field("n", &self.n)
            .field("r", &self.r)
            .field("state_dim", &self.state_dim)
            .finish()
    }
}

/// Chain of integrators: `x_i' = x_{i+1}`, `x_r' = u`, identity input maps.
/// Test fixture with no uncertainty at all.
pub fn chained_integrator_plant(n: usize, r: usize) -> Result<Plant, CtrlError> {
    if n == 0 || r == 0 {
        return Err(CtrlError::config("plant dimensions must be at least 1"));
    }
    let dim = n * r;
    Ok(Plant {
        n,
        r,
        state_dim: dim,
        rhs: Box::new(move |_t, state, u, out| {
            out[..dim - n].copy_from_slice(&state[n..]);
            out[dim - n..].copy_from_slice(u);
        }),
        measure: Box::new(move |state, out| out.copy_from_slice(state)),
        g1: InputMap::Identity,
    })
}

/// External disturbance entering the unicycle force/torque balance.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Disturbance {
    #[default]
    None,
    /// The bounded two-channel disturbance used by the shipped presets.
    Reference,
    Custom([TimeSignal; 2]),
}

impl Disturbance {
    pub fn value(&self, t: f64) -> [f64; 2] {
        match self {
            Disturbance::None => [0.0, 0.0],
            Disturbance::Reference => reference_disturbance(t),
            Disturbance::Custom([a, b]) => [a.value(t), b.value(t)],
        }
    }
}

/// The reference disturbance profile:
/// `d1 = 0.75 sin(3t + pi/3) + 1.5 cos(t + 3 pi/7)`,
/// `d2 = -0.8 exp(cos(t + pi/3) + 1) sin(t)`.
pub fn reference_disturbance(t: f64) -> [f64; 2] {
    use std::f64::consts::PI;
    [
        0.75 * (3.0 * t + PI / 3.0).sin() + 1.5 * (t + 3.0 * PI / 7.0).cos(),
        -0.8 * ((t + PI / 3.0).cos() + 1.0).exp() * t.sin(),
    ]
}

/// Physical parameters of the unicycle robot. Everything here is hidden from
/// the controller.
#[derive(Debug, Clone, PartialEq)]
pub struct UnicycleParams {
    /// Mass [kg].
    pub mass: f64,
    /// Moment of inertia about the vertical axis [kg m^2].
    pub inertia: f64,
    /// Translational damping.
    pub damping_v: f64,
    /// Rotational damping.
    pub damping_w: f64,
    /// Offset of the virtual control point ahead of the wheel axle [m].
    pub vcp_offset: f64,
    pub disturbance: Disturbance,
}

impl Default for UnicycleParams {
    fn default() -> Self {
        Self {
            mass: 3.6,
            inertia: 0.0405,
            damping_v: 0.3,
            damping_w: 0.04,
            vcp_offset: 0.2,
            disturbance: Disturbance::Reference,
        }
    }
}

/// Unicycle internal state layout: `[x_c, y_c, theta, v, omega]`.
pub const UNICYCLE_STATE_DIM: usize = 5;

/// Unicycle with a virtual control point (VCP).
///
/// Internal dynamics (all f64s in SI units):
///
/// ```text
/// x_c' = v cos(theta)        m v' = -D1 v + ubar_1 + d1(t)
/// y_c' = v sin(theta)        I w' = -D2 w + ubar_2 + d2(t)
/// theta' = w
/// ```
///
/// The measured outputs are the VCP position and velocity:
/// `x1 = (x_c, y_c) + L (cos theta, sin theta)` and `x2 = T(theta) zeta` with
/// `T(theta) = [[cos, -L sin], [sin, L cos]]`, so `x1' = x2` exactly and the
/// known first-layer map is the identity. The applied actuation is
/// `ubar = T(theta)^T u`, which makes the effective input matrix on `x2`
/// equal to `T M^-1 T^T` — symmetric positive definite whenever `L != 0`.
///
/// The mass/Coriolis/damping matrices of the fully transformed VCP equations
/// are never formed symbolically: integration happens in the body
/// coordinates above and the transform is applied only at the measurement
/// boundary. Correctness of that shortcut is established numerically by the
/// finite-difference consistency test on the measured `x2'`.
pub fn unicycle_vcp_plant(p: UnicycleParams) -> Result<Plant, CtrlError> {
    if !(p.mass > 0.0 && p.inertia > 0.0) {
        return Err(CtrlError::config(
            "unicycle mass and inertia must be positive",
        ));
    }
    if p.vcp_offset == 0.0 {
        return Err(CtrlError::config(
            "the VCP offset must be nonzero: the point transform is singular at L = 0",
        ));
    }
    let l = p.vcp_offset;
    let params = p.clone();
    Ok(Plant {
        n: 2,
        r: 2,
        state_dim: UNICYCLE_STATE_DIM,
        rhs: Box::new(move |t, s, u, out| {
            let (theta, v, w) = (s[2], s[3], s[4]);
            let (sin_t, cos_t) = theta.sin_cos();
            // ubar = T(theta)^T u
            let ubar1 = cos_t * u[0] + sin_t * u[1];
            let ubar2 = -l * sin_t * u[0] + l * cos_t * u[1];
            let d = params.disturbance.value(t);
            out[0] = v * cos_t;
            out[1] = v * sin_t;
            out[2] = w;
            out[3] = (-params.damping_v * v + ubar1 + d[0]) / params.mass;
            out[4] = (-params.damping_w * w + ubar2 + d[1]) / params.inertia;
        }),
        measure: Box::new(move |s, out| {
            let (theta, v, w) = (s[2], s[3], s[4]);
            let (sin_t, cos_t) = theta.sin_cos();
            out[0] = s[0] + l * cos_t;
            out[1] = s[1] + l * sin_t;
            out[2] = v * cos_t - l * w * sin_t;
            out[3] = v * sin_t + l * w * cos_t;
        }),
        g1: InputMap::Identity,
    })
}

/// Internal unicycle state with the VCP at `x1`, heading `theta` and body
/// rates `zeta = (v, omega)`.
pub fn unicycle_state_from_vcp(x1: [f64; 2], theta: f64, zeta: [f64; 2], l: f64) -> Vec<f64> {
    vec![
        x1[0] - l * theta.cos(),
        x1[1] - l * theta.sin(),
        theta,
        zeta[0],
        zeta[1],
    ]
}
