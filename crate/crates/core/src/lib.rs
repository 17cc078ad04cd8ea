//! Closed-form robust control for uncertain lower-triangular MIMO nonlinear
//! systems under conflicting time-varying hard and soft constraints.
//!
//! The library is organized around five pieces:
//!
//! * [`signal`] — parametric time signals with exact derivatives, used for all
//!   time-varying constraint parameters.
//! * [`constraint`] — scalar constraint primitives and their Log-Sum-Exp
//!   consolidation into a single smooth constraint function per class
//!   (hard / soft), with analytic gradients and partial time derivatives.
//! * [`switch`] — the C¹ cubic switch used to blend the hard-enforcement and
//!   relaxation terms in and out.
//! * [`controller`] — the closed-form control law: reciprocal-barrier layer,
//!   dynamic soft-constraint relaxation, and funnel backstepping through the
//!   remaining integrator layers, in semi-global and global (shifting
//!   function) variants.
//! * [`plant`] + [`sim`] — simulated ground-truth dynamics (chained
//!   integrators and a unicycle with a virtual control point) and a
//!   deterministic fixed-step RK4 closed-loop simulator with invariant
//!   monitors and trajectory logging.

pub mod constraint;
pub mod controller;
pub mod error;
mod la;
pub mod plant;
pub mod signal;
pub mod sim;
pub mod switch;

pub use constraint::{ConsolidatedConstraint, ConstraintClass, ConstraintPrimitive};
pub use controller::{ControlDiagnostics, ControllerConfig, Funnel, Mode, NominalBound, ShiftingFunction};
pub use error::CtrlError;
pub use plant::{Disturbance, Plant, UnicycleParams};
pub use signal::TimeSignal;
pub use sim::{SimConfig, SimRecord, SimResult, SimStatus};
pub use switch::SwitchFunction;
