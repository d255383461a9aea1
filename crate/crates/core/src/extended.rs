//! Extended nonnegative reals `[0, +inf]` as used by indicator functions
//! and contact potentials.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::Serialize;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Extended<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> Extended<T> {
    pub fn zero() -> Self {
        Extended::Finite(T::zero())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(self) -> Option<T> {
        match self {
            Extended::Finite(x) => Some(x),
            Extended::Infinite => None,
        }
    }

    /// Value as a float, `+inf` for the infinite element.
    pub fn to_float(self) -> T {
        match self {
            Extended::Finite(x) => x,
            Extended::Infinite => T::infinity(),
        }
    }

    pub fn scale(self, c: T) -> Self {
        match self {
            Extended::Finite(x) => Extended::Finite(c * x),
            // 0 * inf = 0 by the usual convention for indicator functions.
            Extended::Infinite if c == T::zero() => Extended::Finite(T::zero()),
            Extended::Infinite => Extended::Infinite,
        }
    }
}

impl<T: Real> Add for Extended<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a + b),
            _ => Extended::Infinite,
        }
    }
}

impl<T: Real> Add<T> for Extended<T> {
    type Output = Self;
    fn add(self, rhs: T) -> Self {
        self + Extended::Finite(rhs)
    }
}

impl<T: Real> PartialOrd for Extended<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => a.partial_cmp(b),
            (Extended::Finite(_), Extended::Infinite) => Some(Ordering::Less),
            (Extended::Infinite, Extended::Finite(_)) => Some(Ordering::Greater),
            (Extended::Infinite, Extended::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl<T: Real> From<T> for Extended<T> {
    fn from(x: T) -> Self {
        if x.is_infinite() && x > T::zero() {
            Extended::Infinite
        } else {
            Extended::Finite(x)
        }
    }
}

impl<T: Real> fmt::Display for Extended<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(x) => write!(f, "{x}"),
            Extended::Infinite => write!(f, "+inf"),
        }
    }
}
