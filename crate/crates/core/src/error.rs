use thiserror::Error;

/// Errors raised by constraint evaluation, the control law, and the simulator.
///
/// The barrier/funnel variants are diagnosable failures, not recoverable
/// conditions: the control law is supposed to keep its barriers positive, so
/// a breach means an assumption was violated or the integration step is too
/// coarse. Nothing is clamped or saturated to paper over it.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum CtrlError {
    /// The consolidated hard constraint went non-positive.
    #[error("hard barrier breach at t = {t}: alpha_h = {alpha_h} <= 0")]
    BarrierBreach { t: f64, alpha_h: f64 },

    /// The soft barrier `e_s` went non-positive.
    #[error("soft barrier breach at t = {t}: e_s = {e_s} <= 0")]
    SoftBarrierBreach { t: f64, e_s: f64 },

    /// A normalized intermediate error left its funnel.
    #[error("funnel breach at t = {t}, layer {layer}, component {component}: |ehat| = {ehat_abs} >= 1")]
    FunnelBreach {
        t: f64,
        layer: usize,
        component: usize,
        ehat_abs: f64,
    },

    /// A non-finite value appeared during evaluation.
    #[error("non-finite value at t = {t} in {context}")]
    Numerical { t: f64, context: &'static str },

    /// Invalid construction-time parameters.
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl CtrlError {
    pub fn config(msg: impl Into<String>) -> Self {
        CtrlError::Config(msg.into())
    }
}
