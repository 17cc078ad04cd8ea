//! Declarative scenario files.
//!
//! A scenario is a TOML document with five sections: `[plant]`, `[initial]`,
//! repeated `[[hard]]` / `[[soft]]` constraint tables, `[controller]` and
//! `[sim]`. The schema is deliberately closed — shapes and time signals come
//! from a fixed parametric set so every derivative stays analytic. Unknown
//! keys are rejected. Custom constraint shapes require code, not
//! configuration; that is the intended extension point.
//!
//! Time-signal values accept either a bare number (a constant) or a table
//! such as `{ kind = "sine", amplitude = 0.3, frequency = 0.5, offset = 1.2 }`.
//! Units are SI throughout: seconds, meters, radians.

use hs_ctrl_core::constraint::{
    ConsolidatedConstraint, ConstraintClass, ConstraintPrimitive, DiskSense, Shape,
};
use hs_ctrl_core::controller::{
    ControllerConfig, ControllerParams, Funnel, InputMap, Mode, NominalBound, ShiftingFunction,
};
use hs_ctrl_core::plant::{
    chained_integrator_plant, unicycle_state_from_vcp, unicycle_vcp_plant, Disturbance, Plant,
    UnicycleParams,
};
use hs_ctrl_core::signal::TimeSignal;
use hs_ctrl_core::sim::{MonitorSet, SimConfig};
use hs_ctrl_core::CtrlError;
use serde::Deserialize;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    /// Syntactic TOML failure; the message carries line/column.
    #[error("scenario parse error: {0}")]
    Parse(String),
    /// Well-formed TOML that violates the schema.
    #[error("scenario field `{field}`: {message}")]
    Schema { field: String, message: String },
}

impl ScenarioError {
    pub fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}

fn config_to_schema(field: &str, e: CtrlError) -> ScenarioError {
    ScenarioError::schema(field, e.to_string())
}

// ─────────────────── raw document ───────────────────

/// Either a literal value or the string `"auto"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum AutoOr {
    Number(f64),
    Tag(String),
}

impl AutoOr {
    fn resolve(&self, field: &str) -> Result<Option<f64>, ScenarioError> {
        match self {
            AutoOr::Number(v) => Ok(Some(*v)),
            AutoOr::Tag(s) if s == "auto" => Ok(None),
            AutoOr::Tag(s) => Err(ScenarioError::schema(
                field,
                format!("expected a number or \"auto\", got \"{s}\""),
            )),
        }
    }
}

/// A time signal: bare number or kind-tagged table.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SignalSpec {
    Constant(f64),
    Table(SignalTable),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalTable {
    kind: String,
    value: Option<f64>,
    offset: Option<f64>,
    rate: Option<f64>,
    amplitude: Option<f64>,
    frequency: Option<f64>,
    phase: Option<f64>,
    terms: Option<Vec<SignalSpec>>,
    factors: Option<Vec<SignalSpec>>,
    factor: Option<f64>,
    inner: Option<Box<SignalSpec>>,
}

impl SignalSpec {
    pub fn to_signal(&self, field: &str) -> Result<TimeSignal, ScenarioError> {
        match self {
            SignalSpec::Constant(v) => Ok(TimeSignal::Constant(*v)),
            SignalSpec::Table(t) => t.to_signal(field),
        }
    }
}

impl SignalTable {
    fn to_signal(&self, field: &str) -> Result<TimeSignal, ScenarioError> {
        let req = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| {
                ScenarioError::schema(field, format!("signal kind `{}` needs `{name}`", self.kind))
            })
        };
        match self.kind.as_str() {
            "constant" => Ok(TimeSignal::Constant(req("value", self.value)?)),
            "linear" => Ok(TimeSignal::Linear {
                offset: self.offset.unwrap_or(0.0),
                rate: req("rate", self.rate)?,
            }),
            "sine" => Ok(TimeSignal::sine(
                req("amplitude", self.amplitude)?,
                req("frequency", self.frequency)?,
                self.phase.unwrap_or(0.0),
                self.offset.unwrap_or(0.0),
            )),
            "cosine" => Ok(TimeSignal::cosine(
                req("amplitude", self.amplitude)?,
                req("frequency", self.frequency)?,
                self.phase.unwrap_or(0.0),
                self.offset.unwrap_or(0.0),
            )),
            "sum" => {
                let terms = self.terms.as_ref().ok_or_else(|| {
                    ScenarioError::schema(field, "signal kind `sum` needs `terms`")
                })?;
                Ok(TimeSignal::Sum(
                    terms
                        .iter()
                        .map(|s| s.to_signal(field))
                        .collect::<Result<_, _>>()?,
                ))
            }
            "product" => {
                let f = self.factors.as_ref().ok_or_else(|| {
                    ScenarioError::schema(field, "signal kind `product` needs `factors`")
                })?;
                if f.len() != 2 {
                    return Err(ScenarioError::schema(
                        field,
                        "signal kind `product` needs exactly two factors",
                    ));
                }
                Ok(TimeSignal::Product(
                    Box::new(f[0].to_signal(field)?),
                    Box::new(f[1].to_signal(field)?),
                ))
            }
            "scaled" => {
                let inner = self.inner.as_ref().ok_or_else(|| {
                    ScenarioError::schema(field, "signal kind `scaled` needs `inner`")
                })?;
                Ok(TimeSignal::Scaled {
                    factor: req("factor", self.factor)?,
                    inner: Box::new(inner.to_signal(field)?),
                })
            }
            other => Err(ScenarioError::schema(
                field,
                format!("unknown signal kind `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    shape: String,
    normal: Option<Vec<f64>>,
    offset: Option<SignalSpec>,
    center: Option<Vec<SignalSpec>>,
    radius: Option<SignalSpec>,
    rotation: Option<SignalSpec>,
    semi_a: Option<f64>,
    semi_b: Option<f64>,
    kappa: Option<f64>,
    sense: Option<String>,
    exponent: Option<u32>,
    c_aux: Option<f64>,
}

impl ShapeSpec {
    fn center_signals(&self, field: &str) -> Result<Vec<TimeSignal>, ScenarioError> {
        let c = self
            .center
            .as_ref()
            .ok_or_else(|| ScenarioError::schema(field, "missing `center`"))?;
        c.iter().map(|s| s.to_signal(field)).collect()
    }

    fn radius_signal(&self, field: &str) -> Result<TimeSignal, ScenarioError> {
        self.radius
            .as_ref()
            .ok_or_else(|| ScenarioError::schema(field, "missing `radius`"))?
            .to_signal(field)
    }

    pub fn to_primitive(
        &self,
        class: ConstraintClass,
        field: &str,
    ) -> Result<ConstraintPrimitive, ScenarioError> {
        let shape = match self.shape.as_str() {
            "halfspace" => Shape::Halfspace {
                normal: self
                    .normal
                    .clone()
                    .ok_or_else(|| ScenarioError::schema(field, "missing `normal`"))?,
                offset: self
                    .offset
                    .as_ref()
                    .ok_or_else(|| ScenarioError::schema(field, "missing `offset`"))?
                    .to_signal(field)?,
            },
            "disk_interior" => Shape::DiskInterior {
                center: self.center_signals(field)?,
                radius: self.radius_signal(field)?,
            },
            "disk_exterior" => Shape::DiskExterior {
                center: self.center_signals(field)?,
                radius: self.radius_signal(field)?,
            },
            "ellipse_exterior" => {
                let center = self.center_signals(field)?;
                if center.len() != 2 {
                    return Err(ScenarioError::schema(
                        field,
                        "ellipse_exterior needs a 2-component center",
                    ));
                }
                Shape::EllipseExterior {
                    center: [center[0].clone(), center[1].clone()],
                    rotation: self
                        .rotation
                        .as_ref()
                        .ok_or_else(|| ScenarioError::schema(field, "missing `rotation`"))?
                        .to_signal(field)?,
                    semi_a: self
                        .semi_a
                        .ok_or_else(|| ScenarioError::schema(field, "missing `semi_a`"))?,
                    semi_b: self
                        .semi_b
                        .ok_or_else(|| ScenarioError::schema(field, "missing `semi_b`"))?,
                }
            }
            "tanh_disk" => Shape::TanhDisk {
                kappa: self
                    .kappa
                    .ok_or_else(|| ScenarioError::schema(field, "missing `kappa`"))?,
                center: self.center_signals(field)?,
                radius: self.radius_signal(field)?,
                sense: match self.sense.as_deref() {
                    Some("interior") => DiskSense::Interior,
                    Some("exterior") => DiskSense::Exterior,
                    Some(other) => {
                        return Err(ScenarioError::schema(
                            field,
                            format!("sense must be `interior` or `exterior`, got `{other}`"),
                        ))
                    }
                    None => return Err(ScenarioError::schema(field, "missing `sense`")),
                },
            },
            "power_shell" => {
                let exponent = self
                    .exponent
                    .ok_or_else(|| ScenarioError::schema(field, "missing `exponent`"))?;
                if exponent == 0 || exponent % 2 == 0 {
                    return Err(ScenarioError::schema(
                        field,
                        format!("exponent must be an odd positive integer, got {exponent}"),
                    ));
                }
                let center_sig = self.center_signals(field)?;
                let mut center = Vec::with_capacity(center_sig.len());
                for s in &center_sig {
                    if !s.is_static() {
                        return Err(ScenarioError::schema(
                            field,
                            "power_shell center must be constant",
                        ));
                    }
                    center.push(s.value(0.0));
                }
                Shape::PowerShell {
                    center,
                    radius: self.radius_signal(field)?,
                    exponent,
                }
            }
            "auxiliary" => Shape::AuxiliaryCoercive {
                c_aux: self
                    .c_aux
                    .ok_or_else(|| ScenarioError::schema(field, "missing `c_aux`"))?,
            },
            other => {
                return Err(ScenarioError::schema(
                    field,
                    format!("unknown shape `{other}`"),
                ))
            }
        };
        Ok(ConstraintPrimitive::new(class, shape))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub kind: String,
    // unicycle parameters (SI units); defaults follow the shipped robot
    pub mass: Option<f64>,
    pub inertia: Option<f64>,
    pub damping_v: Option<f64>,
    pub damping_w: Option<f64>,
    pub vcp_offset: Option<f64>,
    pub disturbance: Option<DisturbanceSpec>,
    // chained integrator dimensions
    pub n: Option<usize>,
    pub r: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DisturbanceSpec {
    Named(String),
    Pair(Box<[SignalSpec; 2]>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// VCP position for the unicycle plant [m].
    pub x1: Option<[f64; 2]>,
    /// Heading angle [rad]; defaults to 0.
    pub heading: Option<f64>,
    /// Body rates (forward speed, yaw rate); default to rest.
    pub zeta: Option<[f64; 2]>,
    /// Full stacked state for the chained-integrator plant.
    pub state: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunnelSpec {
    pub theta0: AutoOr,
    pub theta_inf: f64,
    pub decay: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub nu: f64,
    pub k_h: f64,
    pub k_s: f64,
    pub k_r: f64,
    pub k_layers: Vec<f64>,
    pub delta_h: f64,
    pub delta_gamma: f64,
    /// Soft-constraint deadline T [s].
    pub deadline: f64,
    pub beta: f64,
    pub rho0: AutoOr,
    /// "semiglobal" or "global".
    pub mode: String,
    /// Settling time of the shifting function [s]; global mode only.
    pub settling: Option<f64>,
    pub funnels: FunnelSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub dt: Option<f64>,
    pub t_final: f64,
    pub log_stride: Option<usize>,
}

/// The raw deserialized scenario document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: Option<String>,
    pub description: Option<String>,
    pub plant: PlantSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub hard: Vec<ShapeSpec>,
    #[serde(default)]
    pub soft: Vec<ShapeSpec>,
    pub controller: ControllerSpec,
    pub sim: SimSpec,
}

/// Everything needed to run: built plant, controller, sim settings, and the
/// internal initial state.
pub struct Scenario {
    pub file: ScenarioFile,
    pub plant: Plant,
    pub controller: ControllerConfig,
    pub sim: SimConfig,
    pub x0: Vec<f64>,
    /// Whether `rho0`/funnel openings were requested as "auto".
    pub wants_auto_tune: bool,
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("unknown field") || msg.contains("invalid") {
            // serde-level violations carry position info from toml too
            ScenarioError::Parse(msg)
        } else {
            ScenarioError::Parse(msg)
        }
    })?;
    validate_file(&file)?;
    Ok(file)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioFile, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

fn validate_file(f: &ScenarioFile) -> Result<(), ScenarioError> {
    match f.plant.kind.as_str() {
        "unicycle" | "chained_integrator" => {}
        other => {
            return Err(ScenarioError::schema(
                "plant.kind",
                format!("unknown plant kind `{other}`"),
            ))
        }
    }
    if f.hard.is_empty() {
        return Err(ScenarioError::schema(
            "hard",
            "at least one hard constraint is required",
        ));
    }
    if f.soft.is_empty() {
        return Err(ScenarioError::schema(
            "soft",
            "at least one soft constraint is required",
        ));
    }
    if !(f.controller.beta > 0.0 && f.controller.beta < 1.0) {
        return Err(ScenarioError::schema(
            "controller.beta",
            format!("beta must lie in (0,1), got {}", f.controller.beta),
        ));
    }
    if !f.controller.nu.is_finite() || f.controller.nu <= 0.0 {
        return Err(ScenarioError::schema(
            "controller.nu",
            format!("nu must be positive, got {}", f.controller.nu),
        ));
    }
    match f.controller.mode.as_str() {
        "semiglobal" => {}
        "global" => {
            if f.controller.settling.is_none() {
                return Err(ScenarioError::schema(
                    "controller.settling",
                    "global mode requires a settling time",
                ));
            }
        }
        other => {
            return Err(ScenarioError::schema(
                "controller.mode",
                format!("mode must be `semiglobal` or `global`, got `{other}`"),
            ))
        }
    }
    let dt = f.sim.dt.unwrap_or(1e-3);
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(ScenarioError::schema(
            "sim.dt",
            format!("dt must lie in (0, 0.01], got {dt}"),
        ));
    }
    if f.sim.t_final < 0.0 {
        return Err(ScenarioError::schema(
            "sim.t_final",
            "t_final must be non-negative",
        ));
    }
    Ok(())
}

/// Overrides applied on top of a scenario file from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub mode: Option<String>,
}

pub fn build_scenario(file: ScenarioFile, ov: &Overrides) -> Result<Scenario, ScenarioError> {
    let mut file = file;
    if let Some(dt) = ov.dt {
        file.sim.dt = Some(dt);
    }
    if let Some(tf) = ov.t_final {
        file.sim.t_final = tf;
    }
    if let Some(mode) = &ov.mode {
        file.controller.mode = mode.clone();
        if mode == "global" && file.controller.settling.is_none() {
            file.controller.settling = Some(file.controller.deadline);
        }
    }
    validate_file(&file)?;

    // plant
    let plant = match file.plant.kind.as_str() {
        "unicycle" => {
            let defaults = UnicycleParams::default();
            let disturbance = match &file.plant.disturbance {
                None => Disturbance::None,
                Some(DisturbanceSpec::Named(s)) => match s.as_str() {
                    "none" => Disturbance::None,
                    "reference" => Disturbance::Reference,
                    other => {
                        return Err(ScenarioError::schema(
                            "plant.disturbance",
                            format!("unknown disturbance `{other}`"),
                        ))
                    }
                },
                Some(DisturbanceSpec::Pair(pair)) => Disturbance::Custom([
                    pair[0].to_signal("plant.disturbance")?,
                    pair[1].to_signal("plant.disturbance")?,
                ]),
            };
            let params = UnicycleParams {
                mass: file.plant.mass.unwrap_or(defaults.mass),
                inertia: file.plant.inertia.unwrap_or(defaults.inertia),
                damping_v: file.plant.damping_v.unwrap_or(defaults.damping_v),
                damping_w: file.plant.damping_w.unwrap_or(defaults.damping_w),
                vcp_offset: file.plant.vcp_offset.unwrap_or(defaults.vcp_offset),
                disturbance,
            };
            unicycle_vcp_plant(params).map_err(|e| config_to_schema("plant", e))?
        }
        "chained_integrator" => {
            let n = file.plant.n.unwrap_or(2);
            let r = file.plant.r.unwrap_or(1);
            chained_integrator_plant(n, r).map_err(|e| config_to_schema("plant", e))?
        }
        _ => unreachable!("validated above"),
    };

    // constraint families
    let hard_prims = file
        .hard
        .iter()
        .enumerate()
        .map(|(i, s)| s.to_primitive(ConstraintClass::Hard, &format!("hard[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let soft_prims = file
        .soft
        .iter()
        .enumerate()
        .map(|(i, s)| s.to_primitive(ConstraintClass::Soft, &format!("soft[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let hard = ConsolidatedConstraint::new(hard_prims, file.controller.nu)
        .map_err(|e| config_to_schema("hard", e))?;
    let soft = ConsolidatedConstraint::new(soft_prims, file.controller.nu)
        .map_err(|e| config_to_schema("soft", e))?;

    // initial state
    let x0 = match file.plant.kind.as_str() {
        "unicycle" => {
            let x1 = file.initial.x1.ok_or_else(|| {
                ScenarioError::schema("initial.x1", "unicycle plants need an initial VCP position")
            })?;
            let heading = file.initial.heading.unwrap_or(0.0);
            let zeta = file.initial.zeta.unwrap_or([0.0, 0.0]);
            let l = file
                .plant
                .vcp_offset
                .unwrap_or(UnicycleParams::default().vcp_offset);
            unicycle_state_from_vcp(x1, heading, zeta, l)
        }
        _ => {
            let state = file.initial.state.clone().ok_or_else(|| {
                ScenarioError::schema(
                    "initial.state",
                    "chained-integrator plants need a full initial state",
                )
            })?;
            if state.len() != plant.state_dim() {
                return Err(ScenarioError::schema(
                    "initial.state",
                    format!(
                        "expected {} components, got {}",
                        plant.state_dim(),
                        state.len()
                    ),
                ));
            }
            state
        }
    };

    // controller
    let is_global = file.controller.mode == "global";
    let rho0_given = file.controller.rho0.resolve("controller.rho0")?;
    let rho0_auto = rho0_given.is_none();
    let rho0 = match (rho0_given, is_global) {
        (Some(v), _) => v,
        (None, false) => 0.0, // placeholder; auto-tuned below
        (None, true) => -1.0, // any negative value works in global mode
    };
    let theta0_given = file.controller.funnels.theta0.resolve("controller.funnels.theta0")?;
    let theta0_auto = theta0_given.is_none();
    let theta_inf = file.controller.funnels.theta_inf;
    let theta0 = theta0_given.unwrap_or(theta_inf);
    let funnel = Funnel::new(theta0, theta_inf, file.controller.funnels.decay)
        .map_err(|e| config_to_schema("controller.funnels", e))?;
    let r = plant.r();
    let n = plant.n();
    let mode = if is_global {
        let ts = file.controller.settling.expect("validated above");
        Mode::Global(
            ShiftingFunction::new(ts).map_err(|e| config_to_schema("controller.settling", e))?,
        )
    } else {
        Mode::Semiglobal
    };
    let nominal = NominalBound::new(file.controller.deadline, file.controller.beta, rho0)
        .map_err(|e| config_to_schema("controller", e))?;
    let controller = ControllerConfig::new(ControllerParams {
        n,
        r,
        k_h: file.controller.k_h,
        k_s: file.controller.k_s,
        k_r: file.controller.k_r,
        k_layers: file.controller.k_layers.clone(),
        delta_h: file.controller.delta_h,
        delta_gamma: file.controller.delta_gamma,
        nominal,
        funnels: vec![vec![funnel; n]; r - 1],
        mode,
        hard,
        soft,
        g1: InputMap::Identity,
    })
    .map_err(|e| config_to_schema("controller", e))?;

    let sim = SimConfig {
        dt: file.sim.dt.unwrap_or(1e-3),
        t_final: file.sim.t_final,
        log_stride: file.sim.log_stride.unwrap_or(1),
        monitors: MonitorSet::default(),
    };

    Ok(Scenario {
        wants_auto_tune: (rho0_auto || theta0_auto) && !is_global,
        file,
        plant,
        controller,
        sim,
        x0,
    })
}

impl Scenario {
    /// Measured stacked initial state seen by the controller.
    pub fn measured_x0(&self) -> Vec<f64> {
        self.plant.measure(&self.x0)
    }

    /// Apply initial-condition auto-tuning when the file asked for it.
    pub fn auto_tune(&mut self) -> Result<(), CtrlError> {
        if self.wants_auto_tune {
            let x0 = self.measured_x0();
            self.controller = self.controller.auto_tuned(&x0)?;
        }
        Ok(())
    }
}
