//! Parametric scalar time signals with exact derivatives.
//!
//! Every time-varying constraint parameter (disk centers, radii, halfspace
//! offsets, ellipse rotation angles) is one of these. Keeping the set closed
//! and parametric is what makes the consolidated constraint's partial time
//! derivative exact instead of finite-differenced.

/// A scalar function of time with an analytic first derivative.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeSignal {
    /// `value(t) = c`
    Constant(f64),
    /// `value(t) = offset + rate * t`
    Linear { offset: f64, rate: f64 },
    /// `value(t) = amplitude * sin(frequency * t + phase) + offset`
    Sine {
        amplitude: f64,
        frequency: f64,
        phase: f64,
        offset: f64,
    },
    /// `value(t) = amplitude * cos(frequency * t + phase) + offset`
    Cosine {
        amplitude: f64,
        frequency: f64,
        phase: f64,
        offset: f64,
    },
    /// Pointwise sum of the terms.
    Sum(Vec<TimeSignal>),
    /// Pointwise product of the two factors.
    Product(Box<TimeSignal>, Box<TimeSignal>),
    /// `value(t) = factor * inner(t)`
    Scaled { factor: f64, inner: Box<TimeSignal> },
}

impl TimeSignal {
    pub fn constant(c: f64) -> Self {
        TimeSignal::Constant(c)
    }

    pub fn sine(amplitude: f64, frequency: f64, phase: f64, offset: f64) -> Self {
        TimeSignal::Sine {
            amplitude,
            frequency,
            phase,
            offset,
        }
    }

    pub fn cosine(amplitude: f64, frequency: f64, phase: f64, offset: f64) -> Self {
        TimeSignal::Cosine {
            amplitude,
            frequency,
            phase,
            offset,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            TimeSignal::Constant(c) => *c,
            TimeSignal::Linear { offset, rate } => offset + rate * t,
            TimeSignal::Sine {
                amplitude,
                frequency,
                phase,
                offset,
            } => amplitude * (frequency * t + phase).sin() + offset,
            TimeSignal::Cosine {
                amplitude,
                frequency,
                phase,
                offset,
            } => amplitude * (frequency * t + phase).cos() + offset,
            TimeSignal::Sum(terms) => terms.iter().map(|s| s.value(t)).sum(),
            TimeSignal::Product(a, b) => a.value(t) * b.value(t),
            TimeSignal::Scaled { factor, inner } => factor * inner.value(t),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            TimeSignal::Constant(_) => 0.0,
            TimeSignal::Linear { rate, .. } => *rate,
            TimeSignal::Sine {
                amplitude,
                frequency,
                phase,
                ..
            } => amplitude * frequency * (frequency * t + phase).cos(),
            TimeSignal::Cosine {
                amplitude,
                frequency,
                phase,
                ..
            } => -amplitude * frequency * (frequency * t + phase).sin(),
            TimeSignal::Sum(terms) => terms.iter().map(|s| s.derivative(t)).sum(),
            TimeSignal::Product(a, b) => a.derivative(t) * b.value(t) + a.value(t) * b.derivative(t),
            TimeSignal::Scaled { factor, inner } => factor * inner.derivative(t),
        }
    }

    /// True when the signal is constant in time (derivative identically zero).
    pub fn is_static(&self) -> bool {
        match self {
            TimeSignal::Constant(_) => true,
            TimeSignal::Linear { rate, .. } => *rate == 0.0,
            TimeSignal::Sine {
                amplitude,
                frequency,
                ..
            }
            | TimeSignal::Cosine {
                amplitude,
                frequency,
                ..
            } => *amplitude == 0.0 || *frequency == 0.0,
            TimeSignal::Sum(terms) => terms.iter().all(|s| s.is_static()),
            TimeSignal::Product(a, b) => a.is_static() && b.is_static(),
            TimeSignal::Scaled { factor, inner } => *factor == 0.0 || inner.is_static(),
        }
    }
}
