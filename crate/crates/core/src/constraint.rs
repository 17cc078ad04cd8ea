//! Time-varying scalar constraint functions and their Log-Sum-Exp
//! consolidation.
//!
//! A [`ConstraintPrimitive`] is one scalar C¹ function `psi(t, x1)` whose
//! positive region is the admissible set; its gradient and partial time
//! derivative are hand-derived and exact. A [`ConsolidatedConstraint`] folds
//! a family of primitives of the same class into a single smooth
//! under-approximation of their pointwise minimum,
//!
//! ```text
//! alpha(t, x) = -(1/nu) * ln( sum_j exp(-nu * psi_j(t, x)) )
//! ```
//!
//! evaluated in max-shifted form so nothing overflows for `nu * psi` up to
//! about ±1e4. The sandwich bound
//! `alpha <= min_j psi_j <= alpha + ln(m)/nu` holds structurally: the shifted
//! sum is always in `[1, m]`.

use crate::error::CtrlError;
use crate::la;
use crate::signal::TimeSignal;

/// Whether a constraint must hold always (hard) or only when compatible with
/// the hard set (soft).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintClass {
    Hard,
    Soft,
}

/// Orientation of a disk-shaped quadratic form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiskSense {
    /// `q = R(t)^2 - ||x - c(t)||^2` — positive inside the disk.
    Interior,
    /// `q = ||x - c(t)||^2 - R(t)^2` — positive outside the disk.
    Exterior,
}

/// The closed set of constraint shapes.
///
/// Every shape carries its own exact gradient and partial time derivative;
/// arbitrary user expressions are deliberately not supported. For
/// experimentation there is [`Shape::FiniteDifference`], which wraps another
/// primitive and differentiates it numerically — it is excluded from the
/// exactness guarantees the analytic shapes carry.
#[derive(Debug, Clone)]
pub enum Shape {
    /// `psi = normal . x + offset(t)`
    Halfspace {
        normal: Vec<f64>,
        offset: TimeSignal,
    },
    /// `psi = R(t)^2 - ||x - c(t)||^2`
    DiskInterior {
        center: Vec<TimeSignal>,
        radius: TimeSignal,
    },
    /// `psi = ||x - c(t)||^2 - R(t)^2`
    DiskExterior {
        center: Vec<TimeSignal>,
        radius: TimeSignal,
    },
    /// `psi = (x - c(t))^T A(t) (x - c(t)) - 1` with
    /// `A(t) = R(theta(t)) diag(a, b) R(theta(t))^T`; planar only.
    EllipseExterior {
        center: [TimeSignal; 2],
        rotation: TimeSignal,
        semi_a: f64,
        semi_b: f64,
    },
    /// `psi = tanh(kappa * q)` with `q` the disk form selected by `sense`.
    TanhDisk {
        kappa: f64,
        center: Vec<TimeSignal>,
        radius: TimeSignal,
        sense: DiskSense,
    },
    /// `psi = (R(t) - ||x - c||)^p`, `p` an odd positive integer.
    PowerShell {
        center: Vec<f64>,
        radius: TimeSignal,
        exponent: u32,
    },
    /// `psi = c_aux - ||x||^2` — coercivity helper.
    AuxiliaryCoercive { c_aux: f64 },
    /// Numerical-derivative wrapper around another primitive shape.
    FiniteDifference { inner: Box<Shape>, step: f64 },
}

/// One scalar constraint function `psi(t, x1) > 0`, tagged hard or soft.
#[derive(Debug, Clone)]
pub struct ConstraintPrimitive {
    pub shape: Shape,
    pub class: ConstraintClass,
}

impl ConstraintPrimitive {
    pub fn new(class: ConstraintClass, shape: Shape) -> Self {
        Self { shape, class }
    }

    /// Spatial dimension this primitive constrains, if it pins one down.
    pub fn dim(&self) -> Option<usize> {
        match &self.shape {
            Shape::Halfspace { normal, .. } => Some(normal.len()),
            Shape::DiskInterior { center, .. }
            | Shape::DiskExterior { center, .. }
            | Shape::TanhDisk { center, .. } => Some(center.len()),
            Shape::EllipseExterior { .. } => Some(2),
            Shape::PowerShell { center, .. } => Some(center.len()),
            Shape::AuxiliaryCoercive { .. } => None,
            Shape::FiniteDifference { inner, .. } => ConstraintPrimitive {
                shape: (**inner).clone(),
                class: self.class,
            }
            .dim(),
        }
    }

    /// True when the primitive does not depend on time.
    pub fn is_static(&self) -> bool {
        match &self.shape {
            Shape::Halfspace { offset, .. } => offset.is_static(),
            Shape::DiskInterior { center, radius }
            | Shape::DiskExterior { center, radius }
            | Shape::TanhDisk { center, radius, .. } => {
                center.iter().all(|c| c.is_static()) && radius.is_static()
            }
            Shape::EllipseExterior {
                center, rotation, ..
            } => center.iter().all(|c| c.is_static()) && rotation.is_static(),
            Shape::PowerShell { radius, .. } => radius.is_static(),
            Shape::AuxiliaryCoercive { .. } => true,
            Shape::FiniteDifference { inner, .. } => ConstraintPrimitive {
                shape: (**inner).clone(),
                class: self.class,
            }
            .is_static(),
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        eval_shape(&self.shape, t, x)
    }

    pub fn gradient(&self, t: f64, x: &[f64]) -> Vec<f64> {
        gradient_shape(&self.shape, t, x)
    }

    pub fn time_derivative(&self, t: f64, x: &[f64]) -> f64 {
        time_derivative_shape(&self.shape, t, x)
    }
}

fn eval_shape(shape: &Shape, t: f64, x: &[f64]) -> f64 {
    match shape {
        Shape::Halfspace { normal, offset } => la::dot(normal, x) + offset.value(t),
        Shape::DiskInterior { center, radius } => {
            let r = radius.value(t);
            r * r - dist_sq(center, t, x)
        }
        Shape::DiskExterior { center, radius } => {
            let r = radius.value(t);
            dist_sq(center, t, x) - r * r
        }
        Shape::EllipseExterior {
            center,
            rotation,
            semi_a,
            semi_b,
        } => {
            let v = [x[0] - center[0].value(t), x[1] - center[1].value(t)];
            let a = ellipse_matrix(rotation.value(t), *semi_a, *semi_b);
            quad_form(&a, &v) - 1.0
        }
        Shape::TanhDisk {
            kappa,
            center,
            radius,
            sense,
        } => {
            let r = radius.value(t);
            let q = match sense {
                DiskSense::Interior => r * r - dist_sq(center, t, x),
                DiskSense::Exterior => dist_sq(center, t, x) - r * r,
            };
            (kappa * q).tanh()
        }
        Shape::PowerShell {
            center,
            radius,
            exponent,
        } => {
            let d = shell_dist(center, x);
            (radius.value(t) - d).powi(*exponent as i32)
        }
        Shape::AuxiliaryCoercive { c_aux } => c_aux - la::norm_sq(x),
        Shape::FiniteDifference { inner, .. } => eval_shape(inner, t, x),
    }
}

fn gradient_shape(shape: &Shape, t: f64, x: &[f64]) -> Vec<f64> {
    match shape {
        Shape::Halfspace { normal, .. } => normal.clone(),
        Shape::DiskInterior { center, .. } => (0..x.len())
            .map(|i| -2.0 * (x[i] - center[i].value(t)))
            .collect(),
        Shape::DiskExterior { center, .. } => (0..x.len())
            .map(|i| 2.0 * (x[i] - center[i].value(t)))
            .collect(),
        Shape::EllipseExterior {
            center,
            rotation,
            semi_a,
            semi_b,
        } => {
            let v = [x[0] - center[0].value(t), x[1] - center[1].value(t)];
            let a = ellipse_matrix(rotation.value(t), *semi_a, *semi_b);
            vec![
                2.0 * (a[0][0] * v[0] + a[0][1] * v[1]),
                2.0 * (a[1][0] * v[0] + a[1][1] * v[1]),
            ]
        }
        Shape::TanhDisk {
            kappa,
            center,
            radius,
            sense,
        } => {
            let r = radius.value(t);
            let q = match sense {
                DiskSense::Interior => r * r - dist_sq(center, t, x),
                DiskSense::Exterior => dist_sq(center, t, x) - r * r,
            };
            let th = (kappa * q).tanh();
            let sech_sq = 1.0 - th * th;
            let sign = match sense {
                DiskSense::Interior => -1.0,
                DiskSense::Exterior => 1.0,
            };
            (0..x.len())
                .map(|i| kappa * sech_sq * sign * 2.0 * (x[i] - center[i].value(t)))
                .collect()
        }
        Shape::PowerShell {
            center,
            radius,
            exponent,
        } => {
            let d = shell_dist(center, x);
            if d == 0.0 {
                // psi is not differentiable at the shell center; the value
                // there is a strict interior maximum, so zero is the only
                // usable choice.
                return vec![0.0; x.len()];
            }
            let p = *exponent as i32;
            let scale = -(p as f64) * (radius.value(t) - d).powi(p - 1) / d;
            (0..x.len()).map(|i| scale * (x[i] - center[i])).collect()
        }
        Shape::AuxiliaryCoercive { .. } => x.iter().map(|xi| -2.0 * xi).collect(),
        Shape::FiniteDifference { inner, step } => {
            let h = step * la::norm(x).max(1.0);
            (0..x.len())
                .map(|i| {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[i] += h;
                    xm[i] -= h;
                    (eval_shape(inner, t, &xp) - eval_shape(inner, t, &xm)) / (2.0 * h)
                })
                .collect()
        }
    }
}

fn time_derivative_shape(shape: &Shape, t: f64, x: &[f64]) -> f64 {
    match shape {
        Shape::Halfspace { offset, .. } => offset.derivative(t),
        Shape::DiskInterior { center, radius } => {
            let r = radius.value(t);
            2.0 * r * radius.derivative(t) + 2.0 * center_drift(center, t, x)
        }
        Shape::DiskExterior { center, radius } => {
            let r = radius.value(t);
            -2.0 * r * radius.derivative(t) - 2.0 * center_drift(center, t, x)
        }
        Shape::EllipseExterior {
            center,
            rotation,
            semi_a,
            semi_b,
        } => {
            let v = [x[0] - center[0].value(t), x[1] - center[1].value(t)];
            let theta = rotation.value(t);
            let theta_dot = rotation.derivative(t);
            let a = ellipse_matrix(theta, *semi_a, *semi_b);
            let av = [
                a[0][0] * v[0] + a[0][1] * v[1],
                a[1][0] * v[0] + a[1][1] * v[1],
            ];
            // d/dt (v^T A v) = -2 (A v) . c_dot + v^T A_dot v, with
            // A_dot = theta_dot (a - b) [[-sin 2θ, cos 2θ], [cos 2θ, sin 2θ]].
            let c_dot = [center[0].derivative(t), center[1].derivative(t)];
            let diff = semi_a - semi_b;
            let s2 = (2.0 * theta).sin();
            let c2 = (2.0 * theta).cos();
            let v_adot_v =
                theta_dot * diff * (-s2 * v[0] * v[0] + 2.0 * c2 * v[0] * v[1] + s2 * v[1] * v[1]);
            -2.0 * (av[0] * c_dot[0] + av[1] * c_dot[1]) + v_adot_v
        }
        Shape::TanhDisk {
            kappa,
            center,
            radius,
            sense,
        } => {
            let r = radius.value(t);
            let (q, q_dot) = match sense {
                DiskSense::Interior => (
                    r * r - dist_sq(center, t, x),
                    2.0 * r * radius.derivative(t) + 2.0 * center_drift(center, t, x),
                ),
                DiskSense::Exterior => (
                    dist_sq(center, t, x) - r * r,
                    -2.0 * r * radius.derivative(t) - 2.0 * center_drift(center, t, x),
                ),
            };
            let th = (kappa * q).tanh();
            kappa * (1.0 - th * th) * q_dot
        }
        Shape::PowerShell {
            center,
            radius,
            exponent,
        } => {
            let d = shell_dist(center, x);
            let p = *exponent as i32;
            (p as f64) * (radius.value(t) - d).powi(p - 1) * radius.derivative(t)
        }
        Shape::AuxiliaryCoercive { .. } => 0.0,
        Shape::FiniteDifference { inner, step } => {
            let h = step * t.abs().max(1.0);
            (eval_shape(inner, t + h, x) - eval_shape(inner, (t - h).max(0.0).min(t + h), x))
                / (h + (t - (t - h).max(0.0).min(t + h)))
        }
    }
}

fn dist_sq(center: &[TimeSignal], t: f64, x: &[f64]) -> f64 {
    (0..x.len())
        .map(|i| {
            let d = x[i] - center[i].value(t);
            d * d
        })
        .sum()
}

/// `(x - c) . c_dot`, the drift term of a moving center.
fn center_drift(center: &[TimeSignal], t: f64, x: &[f64]) -> f64 {
    (0..x.len())
        .map(|i| (x[i] - center[i].value(t)) * center[i].derivative(t))
        .sum()
}

fn shell_dist(center: &[f64], x: &[f64]) -> f64 {
    (0..x.len())
        .map(|i| {
            let d = x[i] - center[i];
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `A = R(theta) diag(a, b) R(theta)^T` written out for the plane.
fn ellipse_matrix(theta: f64, a: f64, b: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [
        [a * c * c + b * s * s, (a - b) * s * c],
        [(a - b) * s * c, a * s * s + b * c * c],
    ]
}

fn quad_form(a: &[[f64; 2]; 2], v: &[f64; 2]) -> f64 {
    v[0] * (a[0][0] * v[0] + a[0][1] * v[1]) + v[1] * (a[1][0] * v[0] + a[1][1] * v[1])
}

/// A family of same-class primitives consolidated through Log-Sum-Exp with
/// sharpness `nu`.
#[derive(Debug, Clone)]
pub struct ConsolidatedConstraint {
    primitives: Vec<ConstraintPrimitive>,
    nu: f64,
    class: ConstraintClass,
}

impl ConsolidatedConstraint {
    pub fn new(primitives: Vec<ConstraintPrimitive>, nu: f64) -> Result<Self, CtrlError> {
        if primitives.is_empty() {
            return Err(CtrlError::config("constraint family must be nonempty"));
        }
        if !nu.is_finite() || nu <= 0.0 {
            return Err(CtrlError::config(format!(
                "sharpness nu must be a positive finite number, got {nu}"
            )));
        }
        let class = primitives[0].class;
        if primitives.iter().any(|p| p.class != class) {
            return Err(CtrlError::config(
                "all primitives in a consolidated family must share one class",
            ));
        }
        let mut dim = None;
        for p in &primitives {
            if let Some(d) = p.dim() {
                match dim {
                    None => dim = Some(d),
                    Some(d0) if d0 != d => {
                        return Err(CtrlError::config(format!(
                            "primitive dimension mismatch: {d0} vs {d}"
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(Self {
            primitives,
            nu,
            class,
        })
    }

    pub fn class(&self) -> ConstraintClass {
        self.class
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn primitives(&self) -> &[ConstraintPrimitive] {
        &self.primitives
    }

    /// True when every member primitive is time-invariant.
    pub fn is_static(&self) -> bool {
        self.primitives.iter().all(|p| p.is_static())
    }

    fn check_inputs(&self, t: f64, x: &[f64]) -> Result<(), CtrlError> {
        if !t.is_finite() || !la::all_finite(x) {
            return Err(CtrlError::Numerical {
                t,
                context: "consolidated constraint input",
            });
        }
        Ok(())
    }

    /// Raw member values `psi_j(t, x)`.
    pub fn psi_values(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.primitives.iter().map(|p| p.eval(t, x)).collect()
    }

    /// The smooth consolidated value `alpha(t, x)`.
    pub fn alpha(&self, t: f64, x: &[f64]) -> Result<f64, CtrlError> {
        self.check_inputs(t, x)?;
        let psi = self.psi_values(t, x);
        let m = min_value(&psi).ok_or(CtrlError::Numerical {
            t,
            context: "constraint primitive value",
        })?;
        // exp arguments are all <= 0 after shifting by the minimum
        let sum: f64 = psi.iter().map(|p| (-self.nu * (p - m)).exp()).sum();
        Ok(m - sum.ln() / self.nu)
    }

    /// Unnormalized LSE weights `exp(-nu (psi_j - min psi))` and their sum.
    /// Dividing a weighted accumulation by the sum once keeps the convex
    /// identities (weights summing to one) exact.
    fn shifted_weights(&self, psi: &[f64]) -> Option<(Vec<f64>, f64)> {
        let m = min_value(psi)?;
        let terms: Vec<f64> = psi.iter().map(|p| (-self.nu * (p - m)).exp()).collect();
        let sum: f64 = terms.iter().sum();
        Some((terms, sum))
    }

    /// `grad alpha(t, x)` — the weight-averaged member gradients.
    pub fn alpha_gradient(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, CtrlError> {
        self.check_inputs(t, x)?;
        let psi = self.psi_values(t, x);
        let (w, sum) = self.shifted_weights(&psi).ok_or(CtrlError::Numerical {
            t,
            context: "constraint primitive value",
        })?;
        let mut grad = vec![0.0; x.len()];
        for (p, wj) in self.primitives.iter().zip(&w) {
            let g = p.gradient(t, x);
            for (gi, gji) in grad.iter_mut().zip(&g) {
                *gi += wj * gji;
            }
        }
        for gi in &mut grad {
            *gi /= sum;
        }
        Ok(grad)
    }

    /// `d alpha / dt (t, x)` — the weight-averaged member time derivatives.
    pub fn alpha_time_derivative(&self, t: f64, x: &[f64]) -> Result<f64, CtrlError> {
        self.check_inputs(t, x)?;
        let psi = self.psi_values(t, x);
        let (w, sum) = self.shifted_weights(&psi).ok_or(CtrlError::Numerical {
            t,
            context: "constraint primitive value",
        })?;
        let acc: f64 = self
            .primitives
            .iter()
            .zip(&w)
            .map(|(p, wj)| wj * p.time_derivative(t, x))
            .sum();
        Ok(acc / sum)
    }

    /// Lower bound on `alpha*(t) = max_x alpha(t, x)` from a grid search over
    /// `search_box` followed by coordinate-ascent refinement.
    ///
    /// Diagnostic for set feasibility: a positive return value certifies the
    /// constrained set is nonempty at time `t`.
    pub fn estimate_alpha_star(
        &self,
        t: f64,
        search_box: &[(f64, f64)],
        grid_points_per_axis: usize,
    ) -> Result<f64, CtrlError> {
        if grid_points_per_axis < 2 {
            return Err(CtrlError::config(
                "estimate_alpha_star needs at least 2 grid points per axis",
            ));
        }
        if search_box
            .iter()
            .any(|(lo, hi)| !lo.is_finite() || !hi.is_finite() || hi <= lo)
        {
            return Err(CtrlError::config("search box must be finite and ordered"));
        }
        let f = |x: &[f64]| self.alpha(t, x);
        grid_ascend(f, search_box, grid_points_per_axis)
    }
}

/// Lower bound on `max_x min(alpha_a, alpha_b)` over a box — a joint
/// feasibility (compatibility) diagnostic for a pair of constrained sets.
pub fn estimate_joint_alpha_star(
    a: &ConsolidatedConstraint,
    b: &ConsolidatedConstraint,
    t: f64,
    search_box: &[(f64, f64)],
    grid_points_per_axis: usize,
) -> Result<f64, CtrlError> {
    let f = |x: &[f64]| Ok(a.alpha(t, x)?.min(b.alpha(t, x)?));
    grid_ascend(f, search_box, grid_points_per_axis)
}

fn grid_ascend(
    f: impl Fn(&[f64]) -> Result<f64, CtrlError>,
    search_box: &[(f64, f64)],
    grid_points_per_axis: usize,
) -> Result<f64, CtrlError> {
    let n = search_box.len();
    let steps: Vec<f64> = search_box
        .iter()
        .map(|(lo, hi)| (hi - lo) / (grid_points_per_axis - 1) as f64)
        .collect();

    let mut best_x = vec![0.0; n];
    let mut best = f64::NEG_INFINITY;
    let total = grid_points_per_axis.pow(n as u32);
    let mut x = vec![0.0; n];
    for flat in 0..total {
        let mut rem = flat;
        for i in 0..n {
            let k = rem % grid_points_per_axis;
            rem /= grid_points_per_axis;
            x[i] = search_box[i].0 + k as f64 * steps[i];
        }
        let v = f(&x)?;
        if v > best {
            best = v;
            best_x.copy_from_slice(&x);
        }
    }

    // Coordinate ascent from the best grid point, clamped to the box.
    let extent = search_box
        .iter()
        .map(|(lo, hi)| hi - lo)
        .fold(0.0f64, f64::max);
    let mut step = steps.iter().copied().fold(0.0f64, f64::max);
    let mut evals = 0usize;
    while step > 1e-9 * extent && evals < 20_000 {
        let mut improved = false;
        for i in 0..n {
            for dir in [-1.0, 1.0] {
                let mut cand = best_x.clone();
                cand[i] = (cand[i] + dir * step)
                    .max(search_box[i].0)
                    .min(search_box[i].1);
                let v = f(&cand)?;
                evals += 1;
                if v > best {
                    best = v;
                    best_x = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(best)
}

fn min_value(v: &[f64]) -> Option<f64> {
    let mut m = f64::INFINITY;
    for &x in v {
        if x.is_nan() {
            return None;
        }
        if x < m {
            m = x;
        }
    }
    if m.is_finite() {
        Some(m)
    } else {
        None
    }
}
