//! The closed-form control law.
//!
//! Layer 1 keeps two reciprocal barriers bounded: `1/alpha_h` for the hard
//! constraints and `1/e_s` for the (virtually relaxed) soft constraints. When
//! those two objectives conflict near the hard boundary, a dynamic relaxation
//! signal inflates the virtual soft set just enough to keep both feasible.
//! Layers 2..r then funnel each intermediate tracking error through a
//! shrinking envelope, without ever differentiating the intermediate errors.
//!
//! Two variants are provided:
//!
//! * semi-global — `rho0` and the funnel openings must dominate the initial
//!   state (checked by [`ControllerConfig::validate_initial`], fixable by
//!   [`ControllerConfig::auto_tuned`]);
//! * global — a shifting function ramps the soft barrier and the funnel
//!   constraints in over a settling window so that no initial-condition
//!   tuning is needed at all.

use crate::constraint::{ConsolidatedConstraint, ConstraintClass};
use crate::error::CtrlError;
use crate::la;
use crate::switch::SwitchFunction;

/// Nominal non-positive schedule that drives soft-constraint satisfaction by
/// the user time `horizon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalBound {
    horizon: f64,
    beta: f64,
    rho0: f64,
    exponent: f64,
}

impl NominalBound {
    pub fn new(horizon: f64, beta: f64, rho0: f64) -> Result<Self, CtrlError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(CtrlError::config(format!(
                "nominal bound horizon must be positive and finite, got {horizon}"
            )));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(CtrlError::config(format!(
                "beta must lie in (0,1), got {beta}"
            )));
        }
        if !(rho0.is_finite() && rho0 <= 0.0) {
            return Err(CtrlError::config(format!(
                "rho0 must be non-positive and finite, got {rho0}"
            )));
        }
        Ok(Self {
            horizon,
            beta,
            rho0,
            exponent: 1.0 / (1.0 - beta),
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    /// Copy with a different `rho0` (used by auto-tuning).
    pub fn with_rho0(&self, rho0: f64) -> Result<Self, CtrlError> {
        Self::new(self.horizon, self.beta, rho0)
    }

    /// `rho_n(t) = ((T - t)/T)^(1/(1-beta)) * rho0` on `[0, T]`, zero after.
    pub fn value(&self, t: f64) -> f64 {
        if t >= self.horizon {
            0.0
        } else {
            ((self.horizon - t) / self.horizon).powf(self.exponent) * self.rho0
        }
    }

    /// Analytic derivative of [`NominalBound::value`]; zero for `t > T`.
    pub fn derivative(&self, t: f64) -> f64 {
        if t >= self.horizon {
            0.0
        } else {
            let base = (self.horizon - t) / self.horizon;
            -self.rho0 * self.exponent / self.horizon * base.powf(self.exponent - 1.0)
        }
    }
}

/// Strictly positive decaying performance envelope for one intermediate
/// error component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Funnel {
    theta0: f64,
    theta_inf: f64,
    decay: f64,
}

impl Funnel {
    pub fn new(theta0: f64, theta_inf: f64, decay: f64) -> Result<Self, CtrlError> {
        if !(theta_inf > 0.0 && theta_inf.is_finite()) {
            return Err(CtrlError::config(format!(
                "funnel theta_inf must be positive, got {theta_inf}"
            )));
        }
        if !(theta0 >= theta_inf && theta0.is_finite()) {
            return Err(CtrlError::config(format!(
                "funnel theta0 must satisfy theta0 >= theta_inf > 0, got {theta0}"
            )));
        }
        if !(decay > 0.0 && decay.is_finite()) {
            return Err(CtrlError::config(format!(
                "funnel decay must be positive, got {decay}"
            )));
        }
        Ok(Self {
            theta0,
            theta_inf,
            decay,
        })
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn theta_inf(&self) -> f64 {
        self.theta_inf
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn with_theta0(&self, theta0: f64) -> Result<Self, CtrlError> {
        Self::new(theta0, self.theta_inf, self.decay)
    }

    /// `theta(t) = (theta0 - theta_inf) e^{-l t} + theta_inf`
    pub fn value(&self, t: f64) -> f64 {
        (self.theta0 - self.theta_inf) * (-self.decay * t).exp() + self.theta_inf
    }

    pub fn derivative(&self, t: f64) -> f64 {
        -self.decay * (self.theta0 - self.theta_inf) * (-self.decay * t).exp()
    }
}

/// C¹ ramp from 0 to 1 over `[0, settling]`, used by the global variant to
/// decouple tuning from the initial condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftingFunction {
    settling: f64,
}

impl ShiftingFunction {
    pub fn new(settling: f64) -> Result<Self, CtrlError> {
        if !(settling > 0.0 && settling.is_finite()) {
            return Err(CtrlError::config(format!(
                "shifting settling time must be positive, got {settling}"
            )));
        }
        Ok(Self { settling })
    }

    pub fn settling(&self) -> f64 {
        self.settling
    }

    /// `eta(t) = sin(pi t / (2 Ts))` on `[0, Ts]`, exactly 1 afterwards.
    pub fn value(&self, t: f64) -> f64 {
        if t >= self.settling {
            1.0
        } else if t <= 0.0 {
            0.0
        } else {
            (std::f64::consts::FRAC_PI_2 * t / self.settling).sin()
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if t >= self.settling || t < 0.0 {
            0.0
        } else {
            let w = std::f64::consts::FRAC_PI_2 / self.settling;
            w * (w * t).cos()
        }
    }
}

/// Controller variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Initial-condition-dependent tuning; barriers active from `t = 0`.
    Semiglobal,
    /// Shifting-function variant; guarantees kick in at the settling time.
    Global(ShiftingFunction),
}

impl Mode {
    /// Effective shifting factor: identically 1 in semi-global mode.
    pub fn eta(&self, t: f64) -> f64 {
        match self {
            Mode::Semiglobal => 1.0,
            Mode::Global(sf) => sf.value(t),
        }
    }

    pub fn is_global(&self) -> bool {
        matches!(self, Mode::Global(_))
    }
}

/// Known input map of the first layer. Every shipped plant exposes the
/// identity; the controller never sees any other plant data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputMap {
    #[default]
    Identity,
}

impl InputMap {
    /// `a^T G1(t, x1) b`
    pub fn bilinear(&self, _t: f64, _x1: &[f64], a: &[f64], b: &[f64]) -> f64 {
        match self {
            InputMap::Identity => la::dot(a, b),
        }
    }
}

/// Choice of the funnel-error unwrapping bijection `(-1, 1) -> R`.
///
/// Any smooth strictly increasing bijection works in principle (a tan-type
/// map, for instance); only the log-ratio form ships and is tested. The enum
/// exists so an alternative can slot in without an interface change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorTransform {
    #[default]
    LogRatio,
}

/// Choice of the barrier applied to `alpha_h` and `e_s`.
///
/// Only the reciprocal form `1/x` ships and is tested; a log-type barrier
/// has the same qualitative properties and could be added here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BarrierForm {
    #[default]
    Reciprocal,
}

/// The smooth strictly increasing bijection `(-1, 1) -> R` used to unwrap a
/// normalized funnel error: `ln((1 + ehat)/(1 - ehat))`.
///
/// Total as written; the funnel layers check `|ehat| < 1` and raise
/// [`CtrlError::FunnelBreach`] before calling it out of domain.
pub fn transform(ehat: f64) -> f64 {
    ((1.0 + ehat) / (1.0 - ehat)).ln()
}

/// Relaxation-rate arithmetic shared by the ODE right-hand side:
/// `-phi_gamma * phi_h * k_h * eps_h^2 * (grad_s^T G1 grad_h) - k_r * rho_r`.
pub fn relaxation_rate(
    phi_gamma: f64,
    phi_h: f64,
    k_h: f64,
    eps_h: f64,
    grad_cross: f64,
    k_r: f64,
    rho_r: f64,
) -> f64 {
    -phi_gamma * phi_h * k_h * eps_h * eps_h * grad_cross - k_r * rho_r
}

/// Per-layer funnel diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerDiagnostics {
    /// Normalized errors, each in `(-1, 1)` while healthy.
    pub ehat: Vec<f64>,
    /// Transformed errors.
    pub eps: Vec<f64>,
}

/// Everything the first layer computes, logged per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlDiagnostics {
    pub alpha_h: f64,
    pub alpha_s: f64,
    pub e_s: f64,
    pub rho_n: f64,
    pub rho_r: f64,
    pub eps_h: f64,
    pub eps_s: f64,
    pub gamma: f64,
    pub phi_h: f64,
    pub phi_gamma: f64,
    /// First intermediate (virtual) control.
    pub s1: Vec<f64>,
    pub layers: Vec<LayerDiagnostics>,
}

/// Control value plus the relaxation ODE rate, evaluated at one `(t, x,
/// rho_r)` triple.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub u: Vec<f64>,
    pub rho_r_dot: f64,
    pub diag: ControlDiagnostics,
}

/// One named initial-condition check.
#[derive(Debug, Clone)]
pub struct InitialCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of [`ControllerConfig::validate_initial`].
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<InitialCheck>,
    /// Set when the initial state violates the hard constraints; nothing can
    /// be tuned to recover from that.
    pub fatal: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        !self.fatal && self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&InitialCheck> {
        self.checks.iter().find(|c| !c.passed)
    }
}

/// All gains, switch widths, envelopes and constraint families of one
/// controller instance. Immutable once built; every operation is a pure
/// function of `(t, state, rho_r)`.
#[derive(Debug, Clone)]
pub struct ControllerConfig {
    n: usize,
    r: usize,
    k_h: f64,
    k_s: f64,
    k_r: f64,
    k_layers: Vec<f64>,
    delta_h: f64,
    delta_gamma: f64,
    nominal: NominalBound,
    funnels: Vec<Vec<Funnel>>,
    mode: Mode,
    hard: ConsolidatedConstraint,
    soft: ConsolidatedConstraint,
    g1: InputMap,
    switch_h: SwitchFunction,
    switch_gamma: SwitchFunction,
    transform_kind: ErrorTransform,
    barrier_form: BarrierForm,
}

/// Builder-style parameter bag for [`ControllerConfig::new`].
#[derive(Debug, Clone)]
pub struct ControllerParams {
    pub n: usize,
    pub r: usize,
    pub k_h: f64,
    pub k_s: f64,
    pub k_r: f64,
    /// Gains of layers `2..=r`, length `r - 1`.
    pub k_layers: Vec<f64>,
    pub delta_h: f64,
    pub delta_gamma: f64,
    pub nominal: NominalBound,
    /// Funnels per layer and component, shape `(r - 1) x n`.
    pub funnels: Vec<Vec<Funnel>>,
    pub mode: Mode,
    pub hard: ConsolidatedConstraint,
    pub soft: ConsolidatedConstraint,
    pub g1: InputMap,
}

impl ControllerConfig {
    pub fn new(p: ControllerParams) -> Result<Self, CtrlError> {
        if p.n == 0 || p.r == 0 {
            return Err(CtrlError::config("dimensions n and r must be at least 1"));
        }
        for (name, v) in [
            ("k_h", p.k_h),
            ("k_s", p.k_s),
            ("k_r", p.k_r),
            ("delta_h", p.delta_h),
            ("delta_gamma", p.delta_gamma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CtrlError::config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if p.k_layers.len() != p.r - 1 {
            return Err(CtrlError::config(format!(
                "expected {} layer gains for r = {}, got {}",
                p.r - 1,
                p.r,
                p.k_layers.len()
            )));
        }
        if p.k_layers.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(CtrlError::config("layer gains must be positive"));
        }
        if p.funnels.len() != p.r - 1 || p.funnels.iter().any(|row| row.len() != p.n) {
            return Err(CtrlError::config(format!(
                "funnel table must be {} x {}",
                p.r - 1,
                p.n
            )));
        }
        if p.hard.class() != ConstraintClass::Hard {
            return Err(CtrlError::config("hard family must have class hard"));
        }
        if p.soft.class() != ConstraintClass::Soft {
            return Err(CtrlError::config("soft family must have class soft"));
        }
        if let Mode::Global(sf) = p.mode {
            if sf.settling() > p.nominal.horizon() {
                return Err(CtrlError::config(format!(
                    "shifting settling time {} must not exceed the soft deadline {}",
                    sf.settling(),
                    p.nominal.horizon()
                )));
            }
            if p.nominal.rho0() >= 0.0 {
                return Err(CtrlError::config(
                    "global mode needs a strictly negative rho0",
                ));
            }
        }
        let switch_h = SwitchFunction::new(p.delta_h, 0.0)?;
        let switch_gamma = SwitchFunction::new(0.0, -p.delta_gamma)?;
        Ok(Self {
            n: p.n,
            r: p.r,
            k_h: p.k_h,
            k_s: p.k_s,
            k_r: p.k_r,
            k_layers: p.k_layers,
            delta_h: p.delta_h,
            delta_gamma: p.delta_gamma,
            nominal: p.nominal,
            funnels: p.funnels,
            mode: p.mode,
            hard: p.hard,
            soft: p.soft,
            g1: p.g1,
            switch_h,
            switch_gamma,
            transform_kind: ErrorTransform::default(),
            barrier_form: BarrierForm::default(),
        })
    }

    pub fn transform_kind(&self) -> ErrorTransform {
        self.transform_kind
    }

    pub fn barrier_form(&self) -> BarrierForm {
        self.barrier_form
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn k_h(&self) -> f64 {
        self.k_h
    }

    pub fn k_s(&self) -> f64 {
        self.k_s
    }

    pub fn k_r(&self) -> f64 {
        self.k_r
    }

    pub fn k_layer(&self, i: usize) -> f64 {
        self.k_layers[i - 2]
    }

    pub fn delta_h(&self) -> f64 {
        self.delta_h
    }

    pub fn delta_gamma(&self) -> f64 {
        self.delta_gamma
    }

    pub fn nominal(&self) -> &NominalBound {
        &self.nominal
    }

    pub fn funnel(&self, layer: usize, component: usize) -> &Funnel {
        &self.funnels[layer - 2][component]
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    pub fn hard(&self) -> &ConsolidatedConstraint {
        &self.hard
    }

    pub fn soft(&self) -> &ConsolidatedConstraint {
        &self.soft
    }

    pub fn g1(&self) -> InputMap {
        self.g1
    }

    /// `rho_s(t) = rho_n(t) - rho_r`
    pub fn rho_s(&self, t: f64, rho_r: f64) -> f64 {
        self.nominal.value(t) - rho_r
    }

    /// Soft barrier argument per mode: `alpha_s - rho_s` (semi-global) or
    /// `eta alpha_s - rho_s` (global).
    pub fn e_s(&self, t: f64, alpha_s: f64, rho_r: f64) -> f64 {
        self.mode.eta(t) * alpha_s - self.rho_s(t, rho_r)
    }

    fn hard_terms(&self, t: f64, x1: &[f64]) -> Result<HardTerms, CtrlError> {
        let alpha_h = self.hard.alpha(t, x1)?;
        if alpha_h <= 0.0 {
            return Err(CtrlError::BarrierBreach { t, alpha_h });
        }
        let grad_h = self.hard.alpha_gradient(t, x1)?;
        let grad_s = self.soft.alpha_gradient(t, x1)?;
        let eps_h = match self.barrier_form {
            BarrierForm::Reciprocal => 1.0 / alpha_h,
        };
        let grad_cross = self.g1.bilinear(t, x1, &grad_s, &grad_h);
        let gamma = eps_h * grad_cross;
        let phi_h = self.switch_h.eval(alpha_h);
        let phi_gamma = self.switch_gamma.eval(gamma);
        Ok(HardTerms {
            alpha_h,
            eps_h,
            grad_h,
            grad_s,
            grad_cross,
            gamma,
            phi_h,
            phi_gamma,
        })
    }

    /// Right-hand side of the relaxation ODE.
    ///
    /// The inflow term is positive exactly when hard enforcement is active
    /// (`phi_h > 0`) and the soft and hard gradients conflict
    /// (`phi_gamma > 0`); otherwise the signal decays at rate `k_r`.
    pub fn relaxation_rhs(&self, t: f64, x1: &[f64], rho_r: f64) -> Result<f64, CtrlError> {
        let h = self.hard_terms(t, x1)?;
        Ok(relaxation_rate(
            h.phi_gamma,
            h.phi_h,
            self.k_h,
            h.eps_h,
            h.grad_cross,
            self.k_r,
            rho_r,
        ))
    }

    /// First intermediate (virtual) control `s1 = u_s + phi_h u_h`.
    pub fn step1_control(
        &self,
        t: f64,
        x1: &[f64],
        rho_r: f64,
    ) -> Result<(Vec<f64>, ControlDiagnostics), CtrlError> {
        let (s1, diag, _) = self.step1_with_terms(t, x1, rho_r)?;
        Ok((s1, diag))
    }

    fn step1_with_terms(
        &self,
        t: f64,
        x1: &[f64],
        rho_r: f64,
    ) -> Result<(Vec<f64>, ControlDiagnostics, HardTerms), CtrlError> {
        let h = self.hard_terms(t, x1)?;
        let alpha_s = self.soft.alpha(t, x1)?;
        let rho_n = self.nominal.value(t);
        let e_s = self.mode.eta(t) * alpha_s - (rho_n - rho_r);
        if e_s <= 0.0 {
            return Err(CtrlError::SoftBarrierBreach { t, e_s });
        }
        let eps_s = match self.barrier_form {
            BarrierForm::Reciprocal => 1.0 / e_s,
        };
        let us_scale = self.k_s * eps_s * eps_s;
        let uh_scale = self.k_h * h.eps_h * h.eps_h;
        // In the interior region phi_h is exactly zero and s1 must equal u_s
        // bitwise, so the hard term is skipped rather than multiplied in.
        let s1: Vec<f64> = if h.phi_h == 0.0 {
            h.grad_s.iter().map(|g| us_scale * g).collect()
        } else {
            h.grad_s
                .iter()
                .zip(&h.grad_h)
                .map(|(gs, gh)| us_scale * gs + h.phi_h * uh_scale * gh)
                .collect()
        };
        if !la::all_finite(&s1) {
            return Err(CtrlError::Numerical {
                t,
                context: "first intermediate control",
            });
        }
        let diag = ControlDiagnostics {
            alpha_h: h.alpha_h,
            alpha_s,
            e_s,
            rho_n,
            rho_r,
            eps_h: h.eps_h,
            eps_s,
            gamma: h.gamma,
            phi_h: h.phi_h,
            phi_gamma: h.phi_gamma,
            s1: s1.clone(),
            layers: Vec::new(),
        };
        Ok((s1, diag, h))
    }

    /// The `i`-th intermediate control (`2 <= i <= r`) for the error vector
    /// `e_i = x_i - s_{i-1}`.
    ///
    /// Returns `(s_i, ehat, eps)`.
    #[allow(clippy::type_complexity)]
    pub fn layer_control(
        &self,
        layer: usize,
        t: f64,
        e: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), CtrlError> {
        assert!(
            (2..=self.r).contains(&layer),
            "layer index {layer} out of range 2..={}",
            self.r
        );
        let eta = self.mode.eta(t);
        let k = self.k_layer(layer);
        let mut s = Vec::with_capacity(self.n);
        let mut ehat_all = Vec::with_capacity(self.n);
        let mut eps_all = Vec::with_capacity(self.n);
        for (j, ej) in e.iter().enumerate() {
            let theta = self.funnel(layer, j).value(t);
            let ehat = eta * ej / theta;
            // written so that a NaN normalized error also counts as a breach
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(ehat.abs() < 1.0) {
                return Err(CtrlError::FunnelBreach {
                    t,
                    layer,
                    component: j,
                    ehat_abs: ehat.abs(),
                });
            }
            let eps = match self.transform_kind {
                ErrorTransform::LogRatio => transform(ehat),
            };
            let xi = 2.0 * eta / (theta * (1.0 - ehat * ehat));
            s.push(-k * xi * eps);
            ehat_all.push(ehat);
            eps_all.push(eps);
        }
        Ok((s, ehat_all, eps_all))
    }

    /// The full control input `u(t, x)` for the stacked state
    /// `x = (x_1, ..., x_r)`, chained through all layers.
    ///
    /// Pure in `(t, x, rho_r)`: no internal state, no derivatives of the
    /// intermediate errors.
    pub fn full_control(
        &self,
        t: f64,
        x: &[f64],
        rho_r: f64,
    ) -> Result<(Vec<f64>, ControlDiagnostics), CtrlError> {
        let (u, diag, _) = self.full_control_with_terms(t, x, rho_r)?;
        Ok((u, diag))
    }

    fn full_control_with_terms(
        &self,
        t: f64,
        x: &[f64],
        rho_r: f64,
    ) -> Result<(Vec<f64>, ControlDiagnostics, HardTerms), CtrlError> {
        if x.len() != self.n * self.r {
            return Err(CtrlError::config(format!(
                "state length {} does not match n*r = {}",
                x.len(),
                self.n * self.r
            )));
        }
        if !la::all_finite(x) || !rho_r.is_finite() {
            return Err(CtrlError::Numerical {
                t,
                context: "stacked state",
            });
        }
        let (mut s, mut diag, terms) = self.step1_with_terms(t, &x[..self.n], rho_r)?;
        for i in 2..=self.r {
            let xi = &x[(i - 1) * self.n..i * self.n];
            let e: Vec<f64> = xi.iter().zip(&s).map(|(x, s)| x - s).collect();
            let (si, ehat, eps) = self.layer_control(i, t, &e)?;
            diag.layers.push(LayerDiagnostics { ehat, eps });
            s = si;
        }
        if !la::all_finite(&s) {
            return Err(CtrlError::Numerical {
                t,
                context: "control input",
            });
        }
        Ok((s, diag, terms))
    }

    /// [`ControllerConfig::full_control`] and
    /// [`ControllerConfig::relaxation_rhs`] in one pass (the hard-side terms
    /// are computed once and shared exactly).
    pub fn control_with_relaxation(
        &self,
        t: f64,
        x: &[f64],
        rho_r: f64,
    ) -> Result<ControlOutput, CtrlError> {
        let (u, diag, terms) = self.full_control_with_terms(t, x, rho_r)?;
        let rho_r_dot = relaxation_rate(
            terms.phi_gamma,
            terms.phi_h,
            self.k_h,
            terms.eps_h,
            terms.grad_cross,
            self.k_r,
            rho_r,
        );
        Ok(ControlOutput { u, rho_r_dot, diag })
    }

    /// Check the initial-condition requirements of the active mode.
    ///
    /// The hard check is fatal: if the hard constraints are violated at
    /// `t = 0` no admissible controller exists for that start. The remaining
    /// checks (`rho0` margin and funnel openings, semi-global mode only) are
    /// tunable; see [`ControllerConfig::auto_tuned`].
    pub fn validate_initial(&self, x0: &[f64]) -> Result<ValidationReport, CtrlError> {
        if x0.len() != self.n * self.r {
            return Err(CtrlError::config(format!(
                "initial state length {} does not match n*r = {}",
                x0.len(),
                self.n * self.r
            )));
        }
        let mut checks = Vec::new();
        let x1 = &x0[..self.n];
        let alpha_h0 = self.hard.alpha(0.0, x1)?;
        let hard_ok = alpha_h0 > 0.0;
        checks.push(InitialCheck {
            name: "hard_initial".into(),
            passed: hard_ok,
            detail: format!("alpha_h(0, x1(0)) = {alpha_h0:.6} (must be > 0)"),
        });
        if !hard_ok {
            return Ok(ValidationReport {
                checks,
                fatal: true,
            });
        }

        match self.mode {
            Mode::Global(sf) => {
                checks.push(InitialCheck {
                    name: "settling_before_deadline".into(),
                    passed: sf.settling() <= self.nominal.horizon(),
                    detail: format!(
                        "Ts = {} <= T = {}",
                        sf.settling(),
                        self.nominal.horizon()
                    ),
                });
                checks.push(InitialCheck {
                    name: "rho0_negative".into(),
                    passed: self.nominal.rho0() < 0.0,
                    detail: format!("rho0 = {} (must be < 0)", self.nominal.rho0()),
                });
            }
            Mode::Semiglobal => {
                let alpha_s0 = self.soft.alpha(0.0, x1)?;
                let rho0 = self.nominal.rho0();
                let rho_ok = rho0 < alpha_s0;
                checks.push(InitialCheck {
                    name: "rho0_below_alpha_s".into(),
                    passed: rho_ok,
                    detail: format!("rho0 = {rho0:.6} vs alpha_s(0, x1(0)) = {alpha_s0:.6}"),
                });
                if rho_ok {
                    self.chain_funnel_checks(x0, &mut checks);
                } else {
                    checks.push(InitialCheck {
                        name: "funnel_openings".into(),
                        passed: false,
                        detail: "not evaluated: rho0 check failed".into(),
                    });
                }
            }
        }
        Ok(ValidationReport {
            checks,
            fatal: false,
        })
    }

    /// Forward-chain `e_i(0)` through the layers and check each funnel
    /// opening strictly dominates it.
    fn chain_funnel_checks(&self, x0: &[f64], checks: &mut Vec<InitialCheck>) {
        let mut s = match self.step1_control(0.0, &x0[..self.n], 0.0) {
            Ok((s, _)) => s,
            Err(e) => {
                checks.push(InitialCheck {
                    name: "funnel_openings".into(),
                    passed: false,
                    detail: format!("not evaluated: {e}"),
                });
                return;
            }
        };
        for i in 2..=self.r {
            let xi = &x0[(i - 1) * self.n..i * self.n];
            let e: Vec<f64> = xi.iter().zip(&s).map(|(x, s)| x - s).collect();
            let mut layer_ok = true;
            for (j, ej) in e.iter().enumerate() {
                let theta0 = self.funnel(i, j).theta0();
                let ok = theta0 > ej.abs();
                layer_ok &= ok;
                checks.push(InitialCheck {
                    name: format!("funnel_{i}_{j}"),
                    passed: ok,
                    detail: format!("theta0 = {theta0:.6} vs |e_{i},{j}(0)| = {:.6}", ej.abs()),
                });
            }
            if !layer_ok {
                break;
            }
            match self.layer_control(i, 0.0, &e) {
                Ok((si, _, _)) => s = si,
                Err(e) => {
                    checks.push(InitialCheck {
                        name: format!("funnel_chain_{i}"),
                        passed: false,
                        detail: format!("not evaluated: {e}"),
                    });
                    break;
                }
            }
        }
    }

    /// Copy of the config with `rho0` and the funnel openings adjusted so
    /// the semi-global initial checks pass: `rho0 <- min(rho0, alpha_s(0)-1)`
    /// and, for each failing component, `theta0 <- 1.1 |e(0)| + 0.1`.
    ///
    /// Global mode needs no initial tuning; the config is returned as-is.
    /// The hard initial check cannot be tuned away and still fails afterwards
    /// if the start is inadmissible.
    pub fn auto_tuned(&self, x0: &[f64]) -> Result<ControllerConfig, CtrlError> {
        if self.mode.is_global() {
            return Ok(self.clone());
        }
        if x0.len() != self.n * self.r {
            return Err(CtrlError::config(format!(
                "initial state length {} does not match n*r = {}",
                x0.len(),
                self.n * self.r
            )));
        }
        let x1 = &x0[..self.n];
        let alpha_s0 = self.soft.alpha(0.0, x1)?;
        let mut tuned = self.clone();
        tuned.nominal = self
            .nominal
            .with_rho0(self.nominal.rho0().min(alpha_s0 - 1.0))?;
        let mut s = tuned.step1_control(0.0, x1, 0.0).map(|(s, _)| s)?;
        for i in 2..=self.r {
            let xi = &x0[(i - 1) * self.n..i * self.n];
            let e: Vec<f64> = xi.iter().zip(&s).map(|(x, s)| x - s).collect();
            for (j, ej) in e.iter().enumerate() {
                let f = tuned.funnels[i - 2][j];
                if f.theta0() <= ej.abs() {
                    let opened = (1.1 * ej.abs() + 0.1).max(f.theta_inf());
                    tuned.funnels[i - 2][j] = f.with_theta0(opened)?;
                }
            }
            let (si, _, _) = tuned.layer_control(i, 0.0, &e)?;
            s = si;
        }
        Ok(tuned)
    }
}

struct HardTerms {
    alpha_h: f64,
    eps_h: f64,
    grad_h: Vec<f64>,
    grad_s: Vec<f64>,
    /// `grad_s^T G1 grad_h`
    grad_cross: f64,
    gamma: f64,
    phi_h: f64,
    phi_gamma: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{ConstraintPrimitive, DiskSense, Shape};
    use crate::signal::TimeSignal;

    fn workspace_hard(nu: f64) -> ConsolidatedConstraint {
        ConsolidatedConstraint::new(
            vec![
                ConstraintPrimitive::new(
                    ConstraintClass::Hard,
                    Shape::Halfspace {
                        normal: vec![1.0, 0.0],
                        offset: TimeSignal::Constant(4.5),
                    },
                ),
                ConstraintPrimitive::new(
                    ConstraintClass::Hard,
                    Shape::Halfspace {
                        normal: vec![-0.3, 1.0],
                        offset: TimeSignal::Constant(4.5),
                    },
                ),
                ConstraintPrimitive::new(
                    ConstraintClass::Hard,
                    Shape::TanhDisk {
                        kappa: 0.1,
                        center: vec![TimeSignal::Constant(0.0), TimeSignal::Constant(0.0)],
                        radius: TimeSignal::Constant(6.0),
                        sense: DiskSense::Interior,
                    },
                ),
            ],
            nu,
        )
        .unwrap()
    }

    fn tracking_soft(nu: f64) -> ConsolidatedConstraint {
        ConsolidatedConstraint::new(
            vec![ConstraintPrimitive::new(
                ConstraintClass::Soft,
                Shape::DiskInterior {
                    center: vec![
                        TimeSignal::sine(4.8, 0.25, 0.0, 2.0),
                        TimeSignal::sine(1.2, 0.125, 0.0, 1.0),
                    ],
                    radius: TimeSignal::Constant(1.0),
                },
            )],
            nu,
        )
        .unwrap()
    }

    fn static_soft_disk(center: [f64; 2]) -> ConsolidatedConstraint {
        ConsolidatedConstraint::new(
            vec![ConstraintPrimitive::new(
                ConstraintClass::Soft,
                Shape::DiskInterior {
                    center: vec![
                        TimeSignal::Constant(center[0]),
                        TimeSignal::Constant(center[1]),
                    ],
                    radius: TimeSignal::Constant(1.0),
                },
            )],
            10.0,
        )
        .unwrap()
    }

    fn table_config(rho0: f64, theta0: f64, mode: Mode) -> ControllerConfig {
        let funnel = Funnel::new(theta0, 0.1, 1.0).unwrap();
        ControllerConfig::new(ControllerParams {
            n: 2,
            r: 2,
            k_h: 1.0,
            k_s: 1.0,
            k_r: 1.5,
            k_layers: vec![1.0],
            delta_h: 0.5,
            delta_gamma: 10.0,
            nominal: NominalBound::new(4.0, 0.3, rho0).unwrap(),
            funnels: vec![vec![funnel, funnel]],
            mode,
            hard: workspace_hard(10.0),
            soft: tracking_soft(10.0),
            g1: InputMap::Identity,
        })
        .unwrap()
    }

    fn single_layer_config(soft: ConsolidatedConstraint, rho0: f64) -> ControllerConfig {
        ControllerConfig::new(ControllerParams {
            n: 2,
            r: 1,
            k_h: 1.0,
            k_s: 1.0,
            k_r: 1.5,
            k_layers: vec![],
            delta_h: 0.5,
            delta_gamma: 10.0,
            nominal: NominalBound::new(4.0, 0.3, rho0).unwrap(),
            funnels: vec![],
            mode: Mode::Semiglobal,
            hard: workspace_hard(10.0),
            soft,
            g1: InputMap::Identity,
        })
        .unwrap()
    }

    #[test]
    fn nominal_bound_boundary_values() {
        let nb = NominalBound::new(4.0, 0.3, -4.0).unwrap();
        assert_eq!(nb.value(0.0), -4.0);
        assert_eq!(nb.value(4.0), 0.0);
        assert_eq!(nb.value(7.5), 0.0);
        // ((4-2)/4)^(1/0.7) * -4, frozen from a 40-digit evaluation
        let frozen = -1.4859942891369484;
        assert!((nb.value(2.0) - frozen).abs() < 1e-12, "{}", nb.value(2.0));
    }

    #[test]
    fn nominal_bound_derivative() {
        let nb = NominalBound::new(4.0, 0.3, -4.0).unwrap();
        assert_eq!(nb.derivative(5.0), 0.0);
        // -rho0 / (T (1-beta)) at t = 0
        let want = 4.0 / (4.0 * 0.7);
        assert!((nb.derivative(0.0) - want).abs() < 1e-12);
        for &t in &[0.5, 1.0, 2.0, 3.5, 3.9] {
            let h = 1e-6;
            let fd = (nb.value(t + h) - nb.value(t - h)) / (2.0 * h);
            let d = nb.derivative(t);
            assert!(
                (d - fd).abs() <= 1e-6 * d.abs().max(fd.abs()).max(1e-9),
                "t={t}: {d} vs fd {fd}"
            );
        }
    }

    #[test]
    fn nominal_bound_continuous_at_deadline() {
        let nb = NominalBound::new(4.0, 0.3, -4.0).unwrap();
        assert_eq!(nb.value(4.0), 0.0);
        assert_eq!(nb.derivative(4.0), 0.0);
        assert!(nb.value(4.0 - 1e-7).abs() < 1e-9);
        // the one-sided derivative limit vanishes like (eps/T)^(beta/(1-beta))
        let d3 = nb.derivative(4.0 - 1e-3).abs();
        let d6 = nb.derivative(4.0 - 1e-6).abs();
        let d9 = nb.derivative(4.0 - 1e-9).abs();
        assert!(d6 < d3 && d9 < d6 && d9 < 1e-3, "{d3} {d6} {d9}");
    }

    #[test]
    fn funnel_boundary_values() {
        let f = Funnel::new(1.0, 0.1, 1.0).unwrap();
        assert_eq!(f.value(0.0), 1.0);
        assert!((f.value(50.0) - 0.1).abs() < 1e-9);
        // 0.9 e^-1 + 0.1, frozen from a 40-digit evaluation
        assert!((f.value(1.0) - 0.4310914970542981).abs() < 1e-15);
        for &t in &[0.0, 0.7, 3.0] {
            let h = 1e-6;
            let fd = (f.value(t + h) - f.value(t - h)) / (2.0 * h);
            assert!((f.derivative(t) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn funnel_rejects_bad_parameters() {
        assert!(Funnel::new(0.05, 0.1, 1.0).is_err());
        assert!(Funnel::new(1.0, 0.0, 1.0).is_err());
        assert!(Funnel::new(1.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn shifting_function_ramp() {
        let sf = ShiftingFunction::new(4.0).unwrap();
        assert_eq!(sf.value(0.0), 0.0);
        assert_eq!(sf.value(4.0), 1.0);
        assert_eq!(sf.value(9.0), 1.0);
        assert!(sf.derivative(2.0) > 0.0);
        assert_eq!(sf.derivative(4.0), 0.0);
        // C1 across the settling time
        assert!(sf.derivative(4.0 - 1e-7) < 1e-6);
    }

    #[test]
    fn transform_values_and_oddness() {
        assert_eq!(transform(0.0), 0.0);
        assert!((transform(0.5) - 1.0986122886681098).abs() < 1e-15);
        for &e in &[0.1, 0.33, 0.9, 0.999] {
            assert!((transform(-e) + transform(e)).abs() < 1e-12);
        }
        // strictly increasing
        let mut prev = f64::NEG_INFINITY;
        for k in 0..100 {
            let e = -0.99 + 1.98 * k as f64 / 99.0;
            let v = transform(e);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn relaxation_rate_hand_cases() {
        // stipulated: phi_h = phi_gamma = 1, k_h = 1, eps_h = 1, cross = -2
        assert_eq!(relaxation_rate(1.0, 1.0, 1.0, 1.0, -2.0, 1.5, 0.0), 2.0);
        // switched off: first term vanishes, pure decay -k_r * rho_r
        assert_eq!(
            relaxation_rate(1.0, 0.0, 1.0, 1.0, -2.0, 1.5, 0.3),
            -(1.5 * 0.3)
        );
    }

    #[test]
    fn relaxation_rhs_decay_only_in_the_interior() {
        let cfg = single_layer_config(static_soft_disk([2.0, 1.0]), -4.0);
        // Deep interior: alpha_h well above delta_h, so phi_h = 0.
        let rhs = cfg.relaxation_rhs(0.0, &[0.0, 0.0], 0.3).unwrap();
        assert_eq!(rhs, -(1.5 * 0.3));
    }

    #[test]
    fn relaxation_rhs_zero_inflow_when_gradients_align() {
        // Soft target on the far side of the boundary the state is near:
        // moving toward the target also moves inward, gamma >= 0.
        let cfg = single_layer_config(static_soft_disk([0.0, 0.0]), -40.0);
        let x = [5.8, 0.0]; // boundary region of the radius-6 circle
        let (_, diag) = cfg.step1_control(0.0, &x, 0.0).unwrap();
        assert!(diag.phi_h > 0.0);
        assert!(diag.gamma >= 0.0, "gamma = {}", diag.gamma);
        assert_eq!(diag.phi_gamma, 0.0);
        let rho_r = 0.7;
        let rhs = cfg.relaxation_rhs(0.0, &x, rho_r).unwrap();
        assert_eq!(rhs, -cfg.k_r() * rho_r);
    }

    #[test]
    fn relaxation_rhs_requires_positive_alpha_h() {
        let cfg = single_layer_config(static_soft_disk([2.0, 1.0]), -4.0);
        let err = cfg.relaxation_rhs(0.0, &[20.0, 0.0], 0.0).unwrap_err();
        assert!(matches!(err, CtrlError::BarrierBreach { .. }));
    }

    #[test]
    fn step1_interior_passthrough_is_bitwise() {
        let cfg = single_layer_config(static_soft_disk([2.0, 1.0]), -40.0);
        let (t, x) = (0.7, [0.5, -0.5]);
        let (s1, diag) = cfg.step1_control(t, &x, 0.0).unwrap();
        assert!(diag.alpha_h >= cfg.delta_h());
        assert_eq!(diag.phi_h, 0.0);
        let grad_s = cfg.soft().alpha_gradient(t, &x).unwrap();
        let us: Vec<f64> = grad_s
            .iter()
            .map(|g| cfg.k_s() * diag.eps_s * diag.eps_s * g)
            .collect();
        assert_eq!(s1, us, "interior region must pass u_s through untouched");
    }

    #[test]
    fn step1_zero_soft_gradient_leaves_hard_term() {
        // Soft disk centered in the hard boundary region; stand exactly at
        // its center so grad alpha_s = 0.
        let center = [5.8, 0.0];
        let cfg = single_layer_config(static_soft_disk(center), 0.0);
        let (s1, diag) = cfg.step1_control(0.0, &center, 0.0).unwrap();
        assert!(diag.phi_h > 0.0, "alpha_h = {}", diag.alpha_h);
        let grad_h = cfg.hard().alpha_gradient(0.0, &center).unwrap();
        for (s, gh) in s1.iter().zip(&grad_h) {
            let uh = cfg.k_h() * diag.eps_h * diag.eps_h * gh;
            assert_eq!(*s, diag.phi_h * uh);
        }
    }

    #[test]
    fn step1_breach_errors() {
        let cfg = single_layer_config(static_soft_disk([2.0, 1.0]), -4.0);
        assert!(matches!(
            cfg.step1_control(0.0, &[20.0, 0.0], 0.0),
            Err(CtrlError::BarrierBreach { .. })
        ));
        // rho0 = 0 with the state far from the soft disk: e_s = alpha_s < 0.
        let cfg0 = single_layer_config(static_soft_disk([2.0, 1.0]), 0.0);
        assert!(matches!(
            cfg0.step1_control(0.0, &[-3.0, -3.0], 0.0),
            Err(CtrlError::SoftBarrierBreach { .. })
        ));
    }

    #[test]
    fn layer_zero_error_zero_control() {
        let cfg = table_config(-4.0, 14.0, Mode::Semiglobal);
        let (s, ehat, eps) = cfg.layer_control(2, 1.0, &[0.0, 0.0]).unwrap();
        assert!(s.iter().all(|v| *v == 0.0));
        assert!(ehat.iter().all(|v| *v == 0.0));
        assert!(eps.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn layer_hand_composition() {
        // n = 1 funnel pinned at theta = 1: ehat = 0.5 gives
        // s = -(2 / 0.75) ln 3, frozen from a 40-digit evaluation.
        let cfg = ControllerConfig::new(ControllerParams {
            n: 1,
            r: 2,
            k_h: 1.0,
            k_s: 1.0,
            k_r: 1.5,
            k_layers: vec![1.0],
            delta_h: 0.5,
            delta_gamma: 10.0,
            nominal: NominalBound::new(4.0, 0.3, -1.0).unwrap(),
            funnels: vec![vec![Funnel::new(1.0, 1.0, 1.0).unwrap()]],
            mode: Mode::Semiglobal,
            hard: ConsolidatedConstraint::new(
                vec![ConstraintPrimitive::new(
                    ConstraintClass::Hard,
                    Shape::Halfspace {
                        normal: vec![1.0],
                        offset: TimeSignal::Constant(4.5),
                    },
                )],
                10.0,
            )
            .unwrap(),
            soft: ConsolidatedConstraint::new(
                vec![ConstraintPrimitive::new(
                    ConstraintClass::Soft,
                    Shape::Halfspace {
                        normal: vec![1.0],
                        offset: TimeSignal::Constant(4.5),
                    },
                )],
                10.0,
            )
            .unwrap(),
            g1: InputMap::Identity,
        })
        .unwrap();
        let (s, _, _) = cfg.layer_control(2, 0.3, &[0.5]).unwrap();
        assert!((s[0] - (-2.929632769781626)).abs() < 1e-14, "{}", s[0]);
    }

    #[test]
    fn layer_breach_carries_indices() {
        let cfg = table_config(-4.0, 14.0, Mode::Semiglobal);
        let theta = cfg.funnel(2, 1).value(0.0);
        let err = cfg.layer_control(2, 0.0, &[0.0, theta]).unwrap_err();
        match err {
            CtrlError::FunnelBreach {
                layer, component, ..
            } => {
                assert_eq!(layer, 2);
                assert_eq!(component, 1);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn full_control_single_layer_is_step1() {
        let cfg = single_layer_config(static_soft_disk([2.0, 1.0]), -40.0);
        let x = [0.5, -0.5];
        let (u, _) = cfg.full_control(0.3, &x, 0.1).unwrap();
        let (s1, _) = cfg.step1_control(0.3, &x, 0.1).unwrap();
        assert_eq!(u, s1);
    }

    #[test]
    fn full_control_vanishes_on_exact_tracking() {
        let cfg = table_config(-45.0, 30.0, Mode::Semiglobal);
        let x1 = [-3.0, -3.0];
        let (s1, _) = cfg.step1_control(0.0, &x1, 0.0).unwrap();
        let x = [x1[0], x1[1], s1[0], s1[1]];
        let (u, diag) = cfg.full_control(0.0, &x, 0.0).unwrap();
        assert!(u.iter().all(|v| *v == 0.0), "u = {u:?}");
        assert!(diag.layers[0].ehat.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn full_control_is_pure() {
        let cfg = table_config(-100.0, 30.0, Mode::Semiglobal);
        let (t, x1, rho_r) = (1.1, [-3.0, -3.0], 0.05);
        let (s1, _) = cfg.step1_control(t, &x1, rho_r).unwrap();
        let x = [x1[0], x1[1], s1[0] + 0.3, s1[1] - 0.2];
        let a = cfg.full_control(t, &x, rho_r).unwrap();
        let b = cfg.full_control(t, &x, rho_r).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn global_mode_startup_is_initial_condition_free() {
        let sf = ShiftingFunction::new(4.0).unwrap();
        let cfg = table_config(-4.0, 1.0, Mode::Global(sf));
        // Arbitrary x2 far outside any reasonable funnel: still fine at t=0.
        let x = [-3.0, -3.0, 250.0, -1e4];
        let (u, diag) = cfg.full_control(0.0, &x, 0.0).unwrap();
        assert!(u.iter().all(|v| *v == 0.0), "layers emit zero at t = 0");
        assert_eq!(diag.e_s, 4.0, "e_s(0) = -rho0");
    }

    #[test]
    fn global_matches_semiglobal_after_settling() {
        let sf = ShiftingFunction::new(4.0).unwrap();
        let g = table_config(-4.0, 14.0, Mode::Global(sf));
        let s = table_config(-4.0, 14.0, Mode::Semiglobal);
        for &t in &[4.0, 5.7, 11.0] {
            let (x1, rho_r) = ([5.0, 1.0], 4.0);
            let (s1, _) = s.step1_control(t, &x1, rho_r).unwrap();
            let theta = s.funnel(2, 0).value(t);
            let x = [x1[0], x1[1], s1[0] + 0.5 * theta, s1[1] - 0.3 * theta];
            let (ug, dg) = g.full_control(t, &x, rho_r).unwrap();
            let (us, ds) = s.full_control(t, &x, rho_r).unwrap();
            for (a, b) in ug.iter().zip(&us) {
                assert!((a - b).abs() <= 1e-12, "t={t}: {a} vs {b}");
            }
            assert!((dg.e_s - ds.e_s).abs() <= 1e-12);
            for (a, b) in dg.layers[0].ehat.iter().zip(&ds.layers[0].ehat) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn validate_initial_hard_violation_is_fatal() {
        let cfg = table_config(-4.0, 14.0, Mode::Semiglobal);
        let report = cfg.validate_initial(&[20.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(report.fatal);
        assert_eq!(report.first_failure().unwrap().name, "hard_initial");
    }

    #[test]
    fn validate_initial_names_the_rho0_check() {
        // alpha_s(0, (-3,-3)) is about -40; rho0 = 0 cannot sit below it.
        let cfg = table_config(0.0, 14.0, Mode::Semiglobal);
        let report = cfg.validate_initial(&[-3.0, -3.0, 0.0, 0.0]).unwrap();
        assert!(!report.passed());
        assert!(!report.fatal);
        assert_eq!(report.first_failure().unwrap().name, "rho0_below_alpha_s");
    }

    #[test]
    fn auto_tune_fixes_rho0_and_openings() {
        let cfg = table_config(0.0, 0.1, Mode::Semiglobal);
        let x0 = [-3.0, -3.0, 0.0, 0.0];
        assert!(!cfg.validate_initial(&x0).unwrap().passed());
        let tuned = cfg.auto_tuned(&x0).unwrap();
        let report = tuned.validate_initial(&x0).unwrap();
        assert!(report.passed(), "{report:?}");
        let alpha_s0 = tuned.soft().alpha(0.0, &x0[..2]).unwrap();
        assert!(tuned.nominal().rho0() < alpha_s0);
    }

    #[test]
    fn validate_initial_passes_inside_both_sets() {
        // Start inside the soft disk: alpha_s(0) > 0, rho0 = -1 sits below.
        let cfg = table_config(-1.0, 20.0, Mode::Semiglobal);
        let x0 = [2.0, 1.0, 0.0, 0.0];
        let report = cfg.validate_initial(&x0).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn global_mode_rejects_late_settling() {
        let sf = ShiftingFunction::new(9.0).unwrap();
        let funnel = Funnel::new(1.0, 0.1, 1.0).unwrap();
        let r = ControllerConfig::new(ControllerParams {
            n: 2,
            r: 2,
            k_h: 1.0,
            k_s: 1.0,
            k_r: 1.5,
            k_layers: vec![1.0],
            delta_h: 0.5,
            delta_gamma: 10.0,
            nominal: NominalBound::new(4.0, 0.3, -4.0).unwrap(),
            funnels: vec![vec![funnel, funnel]],
            mode: Mode::Global(sf),
            hard: workspace_hard(10.0),
            soft: tracking_soft(10.0),
            g1: InputMap::Identity,
        });
        assert!(r.is_err());
    }

    /// From-scratch transcription of the control law used as an oracle:
    /// raw closures for the constraint functions, an independently solved
    /// switch cubic, and the layer formulas written longhand.
    #[allow(clippy::needless_range_loop)]
    mod oracle {
        pub fn cubic_coeffs(upper: f64, lower: f64) -> [f64; 4] {
            let mut m = [
                [1.0, upper, upper * upper, upper.powi(3), 0.0],
                [0.0, 1.0, 2.0 * upper, 3.0 * upper * upper, 0.0],
                [1.0, lower, lower * lower, lower.powi(3), 1.0],
                [0.0, 1.0, 2.0 * lower, 3.0 * lower * lower, 0.0],
            ];
            for col in 0..4 {
                let piv = (col..4)
                    .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
                    .unwrap();
                m.swap(col, piv);
                for row in 0..4 {
                    if row != col {
                        let f = m[row][col] / m[col][col];
                        for k in col..5 {
                            m[row][k] -= f * m[col][k];
                        }
                    }
                }
            }
            [
                m[0][4] / m[0][0],
                m[1][4] / m[1][1],
                m[2][4] / m[2][2],
                m[3][4] / m[3][3],
            ]
        }

        pub fn switch(chi: f64, upper: f64, lower: f64) -> f64 {
            if chi > upper {
                0.0
            } else if chi < lower {
                1.0
            } else {
                let [a0, a1, a2, a3] = cubic_coeffs(upper, lower);
                a0 + a1 * chi + a2 * chi * chi + a3 * chi.powi(3)
            }
        }

        /// Smooth min of the raw values/gradients/time-slopes by the
        /// shifted Log-Sum-Exp formulas.
        pub fn lse(psi: &[f64], grads: &[Vec<f64>], nu: f64) -> (f64, Vec<f64>) {
            let m = psi.iter().cloned().fold(f64::INFINITY, f64::min);
            let e: Vec<f64> = psi.iter().map(|p| (-nu * (p - m)).exp()).collect();
            let z: f64 = e.iter().sum();
            let alpha = m - z.ln() / nu;
            let n = grads[0].len();
            let grad = (0..n)
                .map(|i| e.iter().zip(grads).map(|(ej, g)| ej * g[i]).sum::<f64>() / z)
                .collect();
            (alpha, grad)
        }
    }

    #[test]
    fn full_control_matches_independent_transcription() {
        let cfg = table_config(-100.0, 30.0, Mode::Semiglobal);
        let aerial = |t: f64| {
            [
                2.0 + 4.8 * (0.25 * t).sin(),
                1.0 + 1.2 * (0.125 * t).sin(),
            ]
        };
        let oracle_u = |t: f64, x: &[f64], rho_r: f64| -> Vec<f64> {
            let x1 = &x[..2];
            // hard family values and gradients, written out raw
            let psi_h = vec![
                x1[0] + 4.5,
                x1[1] - 0.3 * x1[0] + 4.5,
                (0.1 * (36.0 - (x1[0] * x1[0] + x1[1] * x1[1]))).tanh(),
            ];
            let th = psi_h[2];
            let sech2 = 1.0 - th * th;
            let grads_h = vec![
                vec![1.0, 0.0],
                vec![-0.3, 1.0],
                vec![
                    0.1 * sech2 * (-2.0 * x1[0]),
                    0.1 * sech2 * (-2.0 * x1[1]),
                ],
            ];
            let (alpha_h, grad_h) = oracle::lse(&psi_h, &grads_h, 10.0);
            let a = aerial(t);
            let d = [x1[0] - a[0], x1[1] - a[1]];
            let alpha_s = 1.0 - (d[0] * d[0] + d[1] * d[1]);
            let grad_s = [-2.0 * d[0], -2.0 * d[1]];

            let eps_h = 1.0 / alpha_h;
            let u_h = [eps_h * eps_h * grad_h[0], eps_h * eps_h * grad_h[1]];
            let rho_n = if t >= 4.0 {
                0.0
            } else {
                ((4.0 - t) / 4.0).powf(1.0 / 0.7) * -100.0
            };
            let e_s = alpha_s - (rho_n - rho_r);
            let eps_s = 1.0 / e_s;
            let u_s = [eps_s * eps_s * grad_s[0], eps_s * eps_s * grad_s[1]];
            let phi_h = oracle::switch(alpha_h, 0.5, 0.0);
            let s1 = [u_s[0] + phi_h * u_h[0], u_s[1] + phi_h * u_h[1]];

            // layer 2
            let theta = (30.0 - 0.1) * (-t).exp() + 0.1;
            let mut u = vec![0.0; 2];
            for j in 0..2 {
                let e = x[2 + j] - s1[j];
                let ehat = e / theta;
                let eps = ((1.0 + ehat) / (1.0 - ehat)).ln();
                let xi = 2.0 / (theta * (1.0 - ehat * ehat));
                u[j] = -xi * eps;
            }
            u
        };

        for &(t, x1, rho_r) in &[
            (0.0, [-3.0, -3.0], 0.0),
            (1.7, [-1.0, 0.5], 0.3),
            (6.2, [4.0, 1.0], 9.0),
            (13.0, [1.0, 2.0], 0.01),
        ] {
            // x2 sits inside the funnel around s1 so the state is admissible.
            let (s1, _) = cfg.step1_control(t, &x1, rho_r).unwrap();
            let theta = cfg.funnel(2, 0).value(t);
            let x = [x1[0], x1[1], s1[0] + 0.5 * theta, s1[1] - 0.3 * theta];
            let (u, _) = cfg.full_control(t, &x, rho_r).unwrap();
            let want = oracle_u(t, &x, rho_r);
            for j in 0..2 {
                let rel = (u[j] - want[j]).abs() / want[j].abs().max(1.0);
                assert!(rel <= 1e-10, "t={t} u[{j}] = {} vs oracle {}", u[j], want[j]);
            }
        }
    }
}
