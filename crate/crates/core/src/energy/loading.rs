//! Absolutely continuous loading curves `ℓ : [0, T] → R^m`.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub enum LoadingCurve<T> {
    /// Linear interpolation between `(time, value)` knots, constant outside.
    PiecewiseLinear { knots: Vec<(T, Vec<T>)> },
    /// `ℓ_i(t) = offset_i + amplitude_i sin(2π frequency_i t + phase_i)`.
    Sinusoidal {
        offset: Vec<T>,
        amplitude: Vec<T>,
        frequency: Vec<T>,
        phase: Vec<T>,
    },
}

impl<T: Real> LoadingCurve<T> {
    pub fn piecewise_linear(knots: Vec<(T, Vec<T>)>) -> Result<Self> {
        let Some(first) = knots.first() else {
            return Err(Error::InvalidParameter {
                name: "knots",
                reason: "at least one knot is required".into(),
            });
        };
        let m = first.1.len();
        for (idx, (t, v)) in knots.iter().enumerate() {
            if v.len() != m {
                return Err(Error::DimensionMismatch {
                    context: "loading knot",
                    expected: m,
                    actual: v.len(),
                });
            }
            if !t.is_finite() || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "knots",
                    reason: format!("knot {idx} is not finite"),
                });
            }
            if idx > 0 && !(*t > knots[idx - 1].0) {
                return Err(Error::InvalidParameter {
                    name: "knots",
                    reason: "knot times must be strictly increasing".into(),
                });
            }
        }
        Ok(LoadingCurve::PiecewiseLinear { knots })
    }

    /// Constant loading.
    pub fn constant(value: Vec<T>) -> Self {
        LoadingCurve::PiecewiseLinear {
            knots: vec![(T::zero(), value)],
        }
    }

    /// `ℓ(t) = start + rate · t`.
    pub fn ramp(start: Vec<T>, rate: Vec<T>, horizon: T) -> Result<Self> {
        let end = start
            .iter()
            .zip(&rate)
            .map(|(&s, &r)| s + r * horizon)
            .collect();
        Self::piecewise_linear(vec![(T::zero(), start), (horizon, end)])
    }

    pub fn sinusoidal(offset: Vec<T>, amplitude: Vec<T>, frequency: Vec<T>, phase: Vec<T>) -> Result<Self> {
        let m = amplitude.len();
        for (name, v) in [("offset", &offset), ("frequency", &frequency), ("phase", &phase)] {
            if v.len() != m {
                return Err(Error::InvalidParameter {
                    name: "sinusoid",
                    reason: format!("`{name}` has length {} but amplitude has {m}", v.len()),
                });
            }
        }
        Ok(LoadingCurve::Sinusoidal {
            offset,
            amplitude,
            frequency,
            phase,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            LoadingCurve::PiecewiseLinear { knots } => knots[0].1.len(),
            LoadingCurve::Sinusoidal { amplitude, .. } => amplitude.len(),
        }
    }

    /// Index of the segment `[t_i, t_{i+1})` containing `t` (right-continuous).
    fn segment(knots: &[(T, Vec<T>)], t: T) -> Option<usize> {
        if knots.len() < 2 || t < knots[0].0 {
            return None;
        }
        let last = knots.len() - 1;
        if t > knots[last].0 {
            return None;
        }
        if t == knots[last].0 {
            return Some(last - 1);
        }
        Some(knots.partition_point(|(tk, _)| *tk <= t) - 1)
    }

    pub fn value(&self, t: T) -> Vec<T> {
        match self {
            LoadingCurve::PiecewiseLinear { knots } => match Self::segment(knots, t) {
                Some(i) => {
                    let (t0, v0) = &knots[i];
                    let (t1, v1) = &knots[i + 1];
                    let s = (t - *t0) / (*t1 - *t0);
                    v0.iter().zip(v1).map(|(&a, &b)| a + s * (b - a)).collect()
                }
                None if t < knots[0].0 => knots[0].1.clone(),
                None => knots[knots.len() - 1].1.clone(),
            },
            LoadingCurve::Sinusoidal {
                offset,
                amplitude,
                frequency,
                phase,
            } => (0..amplitude.len())
                .map(|i| {
                    offset[i] + amplitude[i] * (T::lit(TAU) * frequency[i] * t + phase[i]).sin()
                })
                .collect(),
        }
    }

    /// `ℓ̇(t)`; the right derivative at knots (left derivative at the last one).
    pub fn rate(&self, t: T) -> Vec<T> {
        match self {
            LoadingCurve::PiecewiseLinear { knots } => match Self::segment(knots, t) {
                Some(i) => {
                    let (t0, v0) = &knots[i];
                    let (t1, v1) = &knots[i + 1];
                    let h = *t1 - *t0;
                    v0.iter().zip(v1).map(|(&a, &b)| (b - a) / h).collect()
                }
                None => vec![T::zero(); self.dim()],
            },
            LoadingCurve::Sinusoidal {
                amplitude,
                frequency,
                phase,
                ..
            } => (0..amplitude.len())
                .map(|i| {
                    let w = T::lit(TAU) * frequency[i];
                    amplitude[i] * w * (w * t + phase[i]).cos()
                })
                .collect(),
        }
    }

    /// Componentwise `(min, max)` of `ℓ` over `[0, horizon]`.
    pub fn range(&self, horizon: T) -> (Vec<T>, Vec<T>) {
        match self {
            LoadingCurve::PiecewiseLinear { knots } => {
                let mut pts: Vec<Vec<T>> = vec![self.value(T::zero()), self.value(horizon)];
                pts.extend(
                    knots
                        .iter()
                        .filter(|(t, _)| *t >= T::zero() && *t <= horizon)
                        .map(|(_, v)| v.clone()),
                );
                let m = self.dim();
                let lo = (0..m)
                    .map(|i| pts.iter().map(|p| p[i]).fold(T::infinity(), T::min))
                    .collect();
                let hi = (0..m)
                    .map(|i| pts.iter().map(|p| p[i]).fold(T::neg_infinity(), T::max))
                    .collect();
                (lo, hi)
            }
            LoadingCurve::Sinusoidal {
                offset, amplitude, ..
            } => (
                offset
                    .iter()
                    .zip(amplitude)
                    .map(|(&o, &a)| o - a.abs())
                    .collect(),
                offset
                    .iter()
                    .zip(amplitude)
                    .map(|(&o, &a)| o + a.abs())
                    .collect(),
            ),
        }
    }

    /// Breakpoints of `ℓ̇` inside `(a, b)`.
    pub fn knots_between(&self, a: T, b: T) -> Vec<T> {
        match self {
            LoadingCurve::PiecewiseLinear { knots } => knots
                .iter()
                .map(|(t, _)| *t)
                .filter(|&t| t > a && t < b)
                .collect(),
            LoadingCurve::Sinusoidal { .. } => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_linear_uses_right_derivative_at_knots() {
        let l = LoadingCurve::piecewise_linear(vec![
            (0.0_f64, vec![0.0]),
            (1.0, vec![1.0]),
            (2.0, vec![-1.0]),
        ])
        .unwrap();
        assert_eq!(l.value(0.5), vec![0.5]);
        assert_eq!(l.value(1.5), vec![0.0]);
        assert_eq!(l.rate(0.0), vec![1.0]);
        assert_eq!(l.rate(1.0), vec![-2.0]);
        assert_eq!(l.rate(2.0), vec![-2.0]);
        assert_eq!(l.rate(3.0), vec![0.0]);
        assert_eq!(l.value(3.0), vec![-1.0]);
        let (lo, hi) = l.range(2.0);
        assert_eq!((lo[0], hi[0]), (-1.0, 1.0));
        assert!(LoadingCurve::piecewise_linear(vec![(1.0_f64, vec![0.0]), (1.0, vec![1.0])]).is_err());
    }

    #[test]
    fn sinusoid_rate_matches_difference_quotient() {
        let l = LoadingCurve::sinusoidal(vec![0.5_f64], vec![2.0], vec![0.7], vec![0.3]).unwrap();
        let h = 1e-6;
        let fd = (l.value(0.4 + h)[0] - l.value(0.4 - h)[0]) / (2.0 * h);
        assert!((fd - l.rate(0.4)[0]).abs() < 1e-8);
    }
}
