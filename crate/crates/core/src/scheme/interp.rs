//! Time interpolants of a discrete evolution.

use crate::linalg;
use crate::scalar::Real;

use super::DiscreteEvolution;

/// Piecewise constant, affine and `C¹` interpolants of `{u^k}`.
#[derive(Debug, Clone)]
pub struct Interpolants<'a, T> {
    evo: &'a DiscreteEvolution<T>,
    /// `ũ(t^k)`
    tilde_nodes: Vec<Vec<T>>,
}

impl<'a, T: Real> Interpolants<'a, T> {
    pub fn new(evo: &'a DiscreteEvolution<T>) -> Self {
        let tau = evo.tau();
        let mut tilde_nodes = Vec::with_capacity(evo.len());
        let mut acc = evo.u[0].clone();
        tilde_nodes.push(acc.clone());
        for k in 1..evo.len() {
            for ((a, &p), &q) in acc.iter_mut().zip(&evo.v[k - 1]).zip(&evo.v[k]) {
                *a += tau * T::half() * (p + q);
            }
            tilde_nodes.push(acc.clone());
        }
        Self { evo, tilde_nodes }
    }

    fn steps(&self) -> usize {
        self.evo.len() - 1
    }

    /// Segment `k` with `t ∈ (t^{k-1}, t^k]` and the local offset `t - t^{k-1}`.
    fn segment(&self, t: T) -> (usize, T) {
        let n = self.steps();
        if n == 0 {
            return (0, T::zero());
        }
        let tau = self.evo.tau();
        let k = (t / tau).ceil().to_usize().unwrap_or(0).clamp(1, n);
        (k, t - self.evo.times[k - 1])
    }

    /// `ū`: left-continuous piecewise constant, `ū(t) = u^k` on `(t^{k-1}, t^k]`.
    pub fn u_bar(&self, t: T) -> Vec<T> {
        if t <= T::zero() {
            return self.evo.u[0].clone();
        }
        self.evo.u[self.segment(t).0].clone()
    }

    /// `u̲`: right-continuous piecewise constant, `u̲(t) = u^{k-1}` on `[t^{k-1}, t^k)`.
    pub fn u_under(&self, t: T) -> Vec<T> {
        let n = self.steps();
        let tau = self.evo.tau();
        let k = (t / tau).floor().to_usize().unwrap_or(0).min(n);
        // guard against rounding at the nodes
        let k = if k < n && t >= self.evo.times[k + 1] { k + 1 } else { k };
        self.evo.u[k].clone()
    }

    /// `û`: piecewise affine.
    pub fn u_hat(&self, t: T) -> Vec<T> {
        if self.steps() == 0 {
            return self.evo.u[0].clone();
        }
        let (k, s) = self.segment(t);
        let mut out = self.evo.u[k - 1].clone();
        linalg::axpy(s, &self.evo.v[k], &mut out);
        out
    }

    pub fn u_hat_dot(&self, t: T) -> Vec<T> {
        if self.steps() == 0 {
            return vec![T::zero(); self.evo.u[0].len()];
        }
        self.evo.v[self.segment(t).0].clone()
    }

    /// `ũ`: `C¹`, with `ũ(0) = u^0` and piecewise affine derivative through `v^k`.
    pub fn u_tilde(&self, t: T) -> Vec<T> {
        if self.steps() == 0 {
            return self.evo.u[0].clone();
        }
        let tau = self.evo.tau();
        let (k, s) = self.segment(t);
        let (p, q) = (&self.evo.v[k - 1], &self.evo.v[k]);
        let mut out = self.tilde_nodes[k - 1].clone();
        for i in 0..out.len() {
            out[i] += s * p[i] + s * s / (T::two() * tau) * (q[i] - p[i]);
        }
        out
    }

    pub fn u_tilde_dot(&self, t: T) -> Vec<T> {
        if self.steps() == 0 {
            return self.evo.v[0].clone();
        }
        let tau = self.evo.tau();
        let (k, s) = self.segment(t);
        let (p, q) = (&self.evo.v[k - 1], &self.evo.v[k]);
        p.iter().zip(q).map(|(&a, &b)| a + (b - a) * s / tau).collect()
    }

    pub fn u_tilde_ddot(&self, t: T) -> Vec<T> {
        if self.steps() == 0 {
            return vec![T::zero(); self.evo.u[0].len()];
        }
        let k = self.segment(t).0;
        linalg::scale(T::one() / self.evo.tau(), &linalg::sub(&self.evo.v[k], &self.evo.v[k - 1]))
    }

    /// `max ‖ū - û‖ = max_k ‖u^k - u^{k-1}‖` and `max ‖ũ' - û'‖ = max_k ‖v^k - v^{k-1}‖`.
    pub fn mismatch(&self) -> (T, T) {
        let mut du = T::zero();
        let mut dv = T::zero();
        for k in 1..self.evo.len() {
            du = du.max(linalg::dist(&self.evo.u[k], &self.evo.u[k - 1]));
            dv = dv.max(linalg::dist(&self.evo.v[k], &self.evo.v[k - 1]));
        }
        (du, dv)
    }
}
