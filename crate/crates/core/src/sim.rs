//! Deterministic fixed-step closed-loop simulation.
//!
//! The plant state and the relaxation signal form one augmented ODE that is
//! integrated with classical fixed-step RK4; the control law and the
//! relaxation rate are re-evaluated at every stage. Any barrier or funnel
//! breach halts the run with a status instead of clamping — the law is
//! supposed to make breaches impossible, so one occurring is a finding, not
//! something to hide.

use crate::controller::{ControlDiagnostics, ControllerConfig, Mode};
use crate::error::CtrlError;
use crate::la;
use crate::plant::Plant;

/// Which runtime invariants the simulator should evaluate per logged record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonitorSet {
    pub hard: bool,
    pub soft: bool,
    pub funnel: bool,
    pub relaxation: bool,
    pub finite: bool,
}

impl Default for MonitorSet {
    fn default() -> Self {
        Self {
            hard: true,
            soft: true,
            funnel: true,
            relaxation: true,
            finite: true,
        }
    }
}

/// Per-record monitor outcomes; a disabled monitor reports pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonitorFlags {
    pub hard_ok: bool,
    pub soft_ok: bool,
    pub funnel_ok: bool,
    pub relaxation_ok: bool,
    pub finite_ok: bool,
}

impl MonitorFlags {
    pub fn all_ok(&self) -> bool {
        self.hard_ok && self.soft_ok && self.funnel_ok && self.relaxation_ok && self.finite_ok
    }
}

/// Integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Step size [s]; must lie in `(0, 0.01]`.
    pub dt: f64,
    /// Horizon [s]; zero runs a single evaluation at `t = 0`.
    pub t_final: f64,
    /// Log every this-many steps.
    pub log_stride: usize,
    pub monitors: MonitorSet,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 20.0,
            log_stride: 1,
            monitors: MonitorSet::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), CtrlError> {
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(CtrlError::config(format!(
                "dt must lie in (0, 0.01], got {}",
                self.dt
            )));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(CtrlError::config(format!(
                "t_final must be non-negative and finite, got {}",
                self.t_final
            )));
        }
        if self.log_stride == 0 {
            return Err(CtrlError::config("log_stride must be at least 1"));
        }
        Ok(())
    }
}

/// One logged step.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub t: f64,
    /// Internal plant state.
    pub state: Vec<f64>,
    /// Measured stacked state `(x_1, ..., x_r)`.
    pub x: Vec<f64>,
    /// Control input applied at this state.
    pub u: Vec<f64>,
    pub diag: ControlDiagnostics,
    pub monitors: MonitorFlags,
}

/// Terminal condition of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimStatus {
    Completed,
    BarrierBreach { t: f64 },
    SoftBarrierBreach { t: f64 },
    FunnelBreach { t: f64, layer: usize },
    NumericalError { t: f64 },
}

impl SimStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, SimStatus::Completed)
    }
}

/// Headline metrics extracted from the record stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub min_alpha_h: f64,
    pub min_alpha_h_t: f64,
    pub max_rho_r: f64,
    /// First logged time from which `alpha_s >= 0` holds for at least
    /// [`Summary::SUSTAIN_WINDOW`] seconds (or to the end of the run).
    pub first_soft_satisfaction: Option<f64>,
    /// Maximal logged intervals with `alpha_s < 0`.
    pub soft_violation_intervals: Vec<(f64, f64)>,
    /// A boundary equilibrium is suspected: `||s1|| < 1e-6` with
    /// `alpha_s < 0` sustained for more than one second.
    pub deadlock_suspected: bool,
    pub monitor_failures: usize,
}

impl Summary {
    pub const SUSTAIN_WINDOW: f64 = 0.5;
    pub const DEADLOCK_S1_NORM: f64 = 1e-6;
    pub const DEADLOCK_HOLD: f64 = 1.0;
}

/// Full result of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub records: Vec<SimRecord>,
    pub status: SimStatus,
    pub summary: Summary,
}

/// Evaluate the invariant monitors on one logged step.
pub fn run_monitors(
    ctrl: &ControllerConfig,
    monitors: &MonitorSet,
    t: f64,
    x: &[f64],
    u: &[f64],
    diag: &ControlDiagnostics,
) -> MonitorFlags {
    let hard_ok = !monitors.hard || diag.alpha_h > 0.0;
    let soft_ok = !monitors.soft || {
        match ctrl.mode() {
            Mode::Semiglobal => diag.e_s > 0.0,
            Mode::Global(sf) => {
                if t >= sf.settling() {
                    // Past the settling time the unshifted quantity must be
                    // positive: the virtual soft set is invariant from here.
                    diag.alpha_s - (diag.rho_n - diag.rho_r) > 0.0
                } else {
                    diag.e_s > 0.0
                }
            }
        }
    };
    let funnel_ok = !monitors.funnel
        || diag
            .layers
            .iter()
            .all(|l| l.ehat.iter().all(|e| e.abs() < 1.0));
    let relaxation_ok = !monitors.relaxation || diag.rho_r >= -1e-9;
    let finite_ok = !monitors.finite
        || (t.is_finite()
            && la::all_finite(x)
            && la::all_finite(u)
            && la::all_finite(&diag.s1)
            && [
                diag.alpha_h,
                diag.alpha_s,
                diag.e_s,
                diag.rho_n,
                diag.rho_r,
                diag.eps_h,
                diag.eps_s,
                diag.gamma,
                diag.phi_h,
                diag.phi_gamma,
            ]
            .iter()
            .all(|v| v.is_finite())
            && diag
                .layers
                .iter()
                .all(|l| la::all_finite(&l.ehat) && la::all_finite(&l.eps)));
    MonitorFlags {
        hard_ok,
        soft_ok,
        funnel_ok,
        relaxation_ok,
        finite_ok,
    }
}

/// One classical RK4 step for an infallible right-hand side. Shared by plant
/// tests and reference computations.
pub fn rk4_step_free(
    t: f64,
    y: &[f64],
    dt: f64,
    rhs: impl Fn(f64, &[f64], &mut [f64]),
) -> Vec<f64> {
    let dim = y.len();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    rhs(t, y, &mut k1);
    for i in 0..dim {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    rhs(t + 0.5 * dt, &tmp, &mut k2);
    for i in 0..dim {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    rhs(t + 0.5 * dt, &tmp, &mut k3);
    for i in 0..dim {
        tmp[i] = y[i] + dt * k3[i];
    }
    rhs(t + dt, &tmp, &mut k4);
    (0..dim)
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Integrate the closed loop from the internal plant state `x0`.
///
/// The augmented state is `(plant state, rho_r)` with `rho_r(0) = 0`.
/// Deterministic: identical inputs produce bit-identical results. Returns
/// `Err` only for structural misconfiguration; runtime breaches end up in
/// [`SimResult::status`].
pub fn simulate(
    plant: &Plant,
    ctrl: &ControllerConfig,
    sim: &SimConfig,
    x0: &[f64],
) -> Result<SimResult, CtrlError> {
    sim.validate()?;
    if plant.n() != ctrl.n() || plant.r() != ctrl.r() {
        return Err(CtrlError::config(format!(
            "plant dimensions ({}, {}) do not match controller ({}, {})",
            plant.n(),
            plant.r(),
            ctrl.n(),
            ctrl.r()
        )));
    }
    if x0.len() != plant.state_dim() {
        return Err(CtrlError::config(format!(
            "initial state length {} does not match plant state dimension {}",
            x0.len(),
            plant.state_dim()
        )));
    }

    let pdim = plant.state_dim();
    let adim = pdim + 1;
    let steps = (sim.t_final / sim.dt).round() as usize;

    let eval = |t: f64,
                aug: &[f64]|
     -> Result<(Vec<f64>, Vec<f64>, f64, ControlDiagnostics), CtrlError> {
        let (ps, rho) = (&aug[..pdim], aug[pdim]);
        if !la::all_finite(ps) || !rho.is_finite() {
            return Err(CtrlError::Numerical {
                t,
                context: "augmented state",
            });
        }
        let x = plant.measure(ps);
        let out = ctrl.control_with_relaxation(t, &x, rho)?;
        Ok((x, out.u, out.rho_r_dot, out.diag))
    };

    let aug_rhs = |t: f64, aug: &[f64], out: &mut [f64]| -> Result<(), CtrlError> {
        let (_, u, rho_dot, _) = eval(t, aug)?;
        plant.rhs(t, &aug[..pdim], &u, &mut out[..pdim]);
        out[pdim] = rho_dot;
        Ok(())
    };

    let mut records = Vec::with_capacity(steps / sim.log_stride + 2);
    let mut status = SimStatus::Completed;

    let mut aug = Vec::with_capacity(adim);
    aug.extend_from_slice(x0);
    aug.push(0.0); // rho_r(0) = 0

    // Log t = 0 (also surfaces an inadmissible start immediately).
    match eval(0.0, &aug) {
        Ok((x, u, _, diag)) => {
            let monitors = run_monitors(ctrl, &sim.monitors, 0.0, &x, &u, &diag);
            records.push(SimRecord {
                t: 0.0,
                state: aug[..pdim].to_vec(),
                x,
                u,
                diag,
                monitors,
            });
        }
        Err(e) => {
            let status = status_from(e)?;
            let summary = summarize(&records, sim.dt * sim.log_stride as f64);
            return Ok(SimResult {
                records,
                status,
                summary,
            });
        }
    }

    let mut k1 = vec![0.0; adim];
    let mut k2 = vec![0.0; adim];
    let mut k3 = vec![0.0; adim];
    let mut k4 = vec![0.0; adim];
    let mut tmp = vec![0.0; adim];

    'run: for k in 0..steps {
        let t = k as f64 * sim.dt;
        let h = sim.dt;
        let step_result = (|| -> Result<Vec<f64>, CtrlError> {
            aug_rhs(t, &aug, &mut k1)?;
            for i in 0..adim {
                tmp[i] = aug[i] + 0.5 * h * k1[i];
            }
            aug_rhs(t + 0.5 * h, &tmp, &mut k2)?;
            for i in 0..adim {
                tmp[i] = aug[i] + 0.5 * h * k2[i];
            }
            aug_rhs(t + 0.5 * h, &tmp, &mut k3)?;
            for i in 0..adim {
                tmp[i] = aug[i] + h * k3[i];
            }
            aug_rhs(t + h, &tmp, &mut k4)?;
            Ok((0..adim)
                .map(|i| aug[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect())
        })();
        match step_result {
            Ok(next) => aug = next,
            Err(e) => {
                status = status_from(e)?;
                break 'run;
            }
        }

        if (k + 1) % sim.log_stride == 0 {
            let t1 = (k + 1) as f64 * sim.dt;
            match eval(t1, &aug) {
                Ok((x, u, _, diag)) => {
                    let monitors = run_monitors(ctrl, &sim.monitors, t1, &x, &u, &diag);
                    records.push(SimRecord {
                        t: t1,
                        state: aug[..pdim].to_vec(),
                        x,
                        u,
                        diag,
                        monitors,
                    });
                }
                Err(e) => {
                    status = status_from(e)?;
                    break 'run;
                }
            }
        }
    }

    let summary = summarize(&records, sim.dt * sim.log_stride as f64);
    Ok(SimResult {
        records,
        status,
        summary,
    })
}

/// Map a runtime controller error to a terminal status; configuration errors
/// propagate, they are bugs in the setup rather than run outcomes.
fn status_from(e: CtrlError) -> Result<SimStatus, CtrlError> {
    Ok(match e {
        CtrlError::BarrierBreach { t, .. } => SimStatus::BarrierBreach { t },
        CtrlError::SoftBarrierBreach { t, .. } => SimStatus::SoftBarrierBreach { t },
        CtrlError::FunnelBreach { t, layer, .. } => SimStatus::FunnelBreach { t, layer },
        CtrlError::Numerical { t, .. } => SimStatus::NumericalError { t },
        e @ CtrlError::Config(_) => return Err(e),
    })
}

fn summarize(records: &[SimRecord], log_dt: f64) -> Summary {
    let mut min_alpha_h = f64::INFINITY;
    let mut min_alpha_h_t = 0.0;
    let mut max_rho_r = f64::NEG_INFINITY;
    let mut monitor_failures = 0usize;
    for rec in records {
        if rec.diag.alpha_h < min_alpha_h {
            min_alpha_h = rec.diag.alpha_h;
            min_alpha_h_t = rec.t;
        }
        max_rho_r = max_rho_r.max(rec.diag.rho_r);
        if !rec.monitors.all_ok() {
            monitor_failures += 1;
        }
    }

    // Maximal runs of alpha_s < 0.
    let mut soft_violation_intervals = Vec::new();
    let mut run_start: Option<f64> = None;
    for rec in records {
        if rec.diag.alpha_s < 0.0 {
            run_start.get_or_insert(rec.t);
        } else if let Some(s) = run_start.take() {
            soft_violation_intervals.push((s, rec.t));
        }
    }
    if let (Some(s), Some(last)) = (run_start, records.last()) {
        soft_violation_intervals.push((s, last.t));
    }

    // First time alpha_s >= 0 holds for the sustain window (or to the end).
    let window_len = (Summary::SUSTAIN_WINDOW / log_dt.max(1e-12)).round() as usize;
    let sat: Vec<bool> = records.iter().map(|r| r.diag.alpha_s >= 0.0).collect();
    let mut first_soft_satisfaction = None;
    let mut i = 0;
    while i < sat.len() {
        if sat[i] {
            let mut j = i;
            while j + 1 < sat.len() && sat[j + 1] {
                j += 1;
            }
            if j - i >= window_len || j + 1 == sat.len() {
                first_soft_satisfaction = Some(records[i].t);
                break;
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }

    // Deadlock: ||s1|| tiny while alpha_s < 0, sustained beyond the hold time.
    let mut deadlock_suspected = false;
    let mut hold_start: Option<f64> = None;
    for rec in records {
        let stalled =
            la::norm(&rec.diag.s1) < Summary::DEADLOCK_S1_NORM && rec.diag.alpha_s < 0.0;
        if stalled {
            let s = *hold_start.get_or_insert(rec.t);
            if rec.t - s > Summary::DEADLOCK_HOLD {
                deadlock_suspected = true;
            }
        } else {
            hold_start = None;
        }
    }

    Summary {
        min_alpha_h,
        min_alpha_h_t,
        max_rho_r,
        first_soft_satisfaction,
        soft_violation_intervals,
        deadlock_suspected,
        monitor_failures,
    }
}
