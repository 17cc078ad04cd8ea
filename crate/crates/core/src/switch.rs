//! C¹ cubic switch function.
//!
//! `phi(chi)` blends from 1 (below the lower break) to 0 (above the upper
//! break) through a cubic whose value and slope match the constant branches
//! at both breaks. The controller uses two of these: one keyed on the
//! consolidated hard constraint value (activates hard enforcement near the
//! boundary) and one keyed on the gradient-conflict indicator (activates the
//! soft-constraint relaxation).

use crate::error::CtrlError;

/// Cubic switch with coefficients fixed at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchFunction {
    upper: f64,
    lower: f64,
    // a0 + a1 x + a2 x^2 + a3 x^3 on [lower, upper]
    coeffs: [f64; 4],
}

impl SwitchFunction {
    /// Build the switch for breaks `upper > lower`.
    ///
    /// The cubic coefficients come from the closed-form solution of the
    /// boundary-condition system `phi(upper) = 0`, `phi(lower) = 1`,
    /// `phi'(upper) = phi'(lower) = 0`.
    pub fn new(upper: f64, lower: f64) -> Result<Self, CtrlError> {
        if !(upper.is_finite() && lower.is_finite()) || upper <= lower {
            return Err(CtrlError::config(format!(
                "switch breaks must be finite with upper > lower, got ({upper}, {lower})"
            )));
        }
        let d = lower - upper;
        let d3 = d * d * d;
        let a0 = upper * upper * (3.0 * lower - upper) / d3;
        let a1 = -6.0 * lower * upper / d3;
        let a2 = 3.0 * (lower + upper) / d3;
        let a3 = -2.0 / d3;
        Ok(Self {
            upper,
            lower,
            coeffs: [a0, a1, a2, a3],
        })
    }

    pub fn upper_break(&self) -> f64 {
        self.upper
    }

    pub fn lower_break(&self) -> f64 {
        self.lower
    }

    pub fn coefficients(&self) -> [f64; 4] {
        self.coeffs
    }

    /// `phi(chi)` in `[0, 1]`: 0 above the upper break, 1 below the lower
    /// break, cubic in between.
    pub fn eval(&self, chi: f64) -> f64 {
        if chi > self.upper {
            0.0
        } else if chi < self.lower {
            1.0
        } else {
            let [a0, a1, a2, a3] = self.coeffs;
            a0 + chi * (a1 + chi * (a2 + chi * a3))
        }
    }

    /// `phi'(chi)`: zero outside the break interval.
    pub fn eval_derivative(&self, chi: f64) -> f64 {
        if chi > self.upper || chi < self.lower {
            0.0
        } else {
            let [_, a1, a2, a3] = self.coeffs;
            a1 + chi * (2.0 * a2 + chi * 3.0 * a3)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: solve the 4x4 boundary-condition system
    /// numerically by Gaussian elimination with partial pivoting.
    #[allow(clippy::needless_range_loop)]
    fn solve_boundary_system(upper: f64, lower: f64) -> [f64; 4] {
        let mut m = [
            [1.0, upper, upper * upper, upper * upper * upper, 0.0],
            [0.0, 1.0, 2.0 * upper, 3.0 * upper * upper, 0.0],
            [1.0, lower, lower * lower, lower * lower * lower, 1.0],
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

    #[test]
    fn unit_break_coefficients() {
        let s = SwitchFunction::new(1.0, 0.0).unwrap();
        assert_eq!(s.coefficients(), [1.0, 0.0, -3.0, 2.0]);
        let oracle = solve_boundary_system(1.0, 0.0);
        for (a, b) in s.coefficients().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12, "{a} vs oracle {b}");
        }
    }

    #[test]
    fn wide_negative_break_boundary_conditions() {
        let s = SwitchFunction::new(0.0, -10.0).unwrap();
        assert!(s.eval(0.0).abs() <= 1e-12);
        assert!((s.eval(-10.0) - 1.0).abs() <= 1e-12);
        assert!(s.eval_derivative(0.0).abs() <= 1e-12);
        assert!(s.eval_derivative(-10.0).abs() <= 1e-12);
        let oracle = solve_boundary_system(0.0, -10.0);
        for (a, b) in s.coefficients().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12, "{a} vs oracle {b}");
        }
    }

    #[test]
    fn boundary_conditions_for_arbitrary_breaks() {
        for &(u, l) in &[(0.5, 0.0), (2.0, -3.0), (1e-3, -1e-3), (40.0, 0.0)] {
            let s = SwitchFunction::new(u, l).unwrap();
            assert!(s.eval(u).abs() <= 1e-10, "phi({u}) = {}", s.eval(u));
            assert!((s.eval(l) - 1.0).abs() <= 1e-10);
            assert!(s.eval_derivative(u).abs() <= 1e-9);
            assert!(s.eval_derivative(l).abs() <= 1e-9);
        }
    }

    #[test]
    fn constant_branches() {
        let s = SwitchFunction::new(1.0, 0.0).unwrap();
        assert_eq!(s.eval(2.0), 0.0);
        assert_eq!(s.eval(-1.0), 1.0);
    }

    #[test]
    fn midpoint_of_unit_switch() {
        // 1 - 3 (0.5)^2 + 2 (0.5)^3 evaluated through an independent Horner
        // written out longhand.
        let s = SwitchFunction::new(1.0, 0.0).unwrap();
        let expected = 1.0 - 3.0 * 0.25 + 2.0 * 0.125;
        assert_eq!(s.eval(0.5), expected);
        assert_eq!(expected, 0.5);
    }

    #[test]
    fn c1_continuity_across_breaks() {
        for &(u, l) in &[(1.0, 0.0), (0.5, 0.0), (0.0, -10.0)] {
            let s = SwitchFunction::new(u, l).unwrap();
            let eps = 1e-5;
            // |phi''| at the breaks bounds how fast the derivative can move.
            let [_, _, a2, a3] = s.coefficients();
            let curv = (2.0 * a2 + 6.0 * a3 * u)
                .abs()
                .max((2.0 * a2 + 6.0 * a3 * l).abs());
            for b in [u, l] {
                assert!((s.eval(b + eps) - s.eval(b)).abs() <= 1e-8);
                assert!((s.eval(b - eps) - s.eval(b)).abs() <= 1e-8);
                for side in [eps, -eps] {
                    let dd = (s.eval_derivative(b + side) - s.eval_derivative(b)).abs();
                    assert!(dd <= 2.0 * curv * eps + 1e-12, "derivative jump {dd}");
                }
            }
        }
    }

    #[test]
    fn monotone_nonincreasing_between_breaks() {
        for &(u, l) in &[(1.0, 0.0), (0.5, 0.0), (0.0, -10.0), (0.0, -40.0)] {
            let s = SwitchFunction::new(u, l).unwrap();
            let mut prev = f64::INFINITY;
            for k in 0..=1000 {
                let chi = l + (u - l) * k as f64 / 1000.0;
                let v = s.eval(chi);
                assert!(v <= prev + 1e-12, "not nonincreasing at chi = {chi}");
                assert!((-1e-12..=1.0 + 1e-12).contains(&v));
                prev = v;
            }
        }
    }

    #[test]
    fn cubic_extrema_sit_exactly_at_the_breaks() {
        // phi' = a1 + 2 a2 chi + 3 a3 chi^2 must vanish exactly at the two
        // breaks, which pins phi to [0, 1] on the whole interval.
        for &(u, l) in &[(1.0, 0.0), (0.5, 0.0), (0.0, -10.0), (0.1, 0.0), (0.0, -40.0)] {
            let s = SwitchFunction::new(u, l).unwrap();
            let [_, a1, a2, a3] = s.coefficients();
            let disc = (2.0 * a2) * (2.0 * a2) - 4.0 * (3.0 * a3) * a1;
            assert!(disc >= 0.0);
            let mut roots = [
                (-2.0 * a2 + disc.sqrt()) / (2.0 * 3.0 * a3),
                (-2.0 * a2 - disc.sqrt()) / (2.0 * 3.0 * a3),
            ];
            roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let scale = u.abs().max(l.abs()).max(1.0);
            assert!((roots[0] - l).abs() <= 1e-9 * scale, "{roots:?} vs ({l}, {u})");
            assert!((roots[1] - u).abs() <= 1e-9 * scale, "{roots:?} vs ({l}, {u})");
        }
    }

    #[test]
    fn rejects_degenerate_breaks() {
        assert!(SwitchFunction::new(0.0, 0.0).is_err());
        assert!(SwitchFunction::new(-1.0, 1.0).is_err());
        assert!(SwitchFunction::new(f64::NAN, 0.0).is_err());
    }
}
