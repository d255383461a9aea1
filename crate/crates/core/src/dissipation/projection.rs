//! Projections onto convex sets in the metric of a positive-definite
//! quadratic form `|x|_G^2 = ⟨Gx, x⟩`.

use crate::linalg;
use crate::operators::SymOperator;
use crate::scalar::Real;

const MAX_SWEEPS: usize = 100_000;

/// Projects `w` onto the box `[lo, hi]` in the metric `g`.
pub fn project_box<T: Real>(w: &[T], lo: &[T], hi: &[T], g: &SymOperator<T>) -> Vec<T> {
    let n = w.len();
    let clamp = |x: T, i: usize| x.max(lo[i]).min(hi[i]);
    let mut z: Vec<T> = (0..n).map(|i| clamp(w[i], i)).collect();
    if g.is_diagonal() {
        return z;
    }
    let scale = linalg::norm_inf(w)
        .max(linalg::norm_inf(lo))
        .max(linalg::norm_inf(hi))
        .max(T::one());
    // cyclic coordinate descent on ½⟨G(z-w), z-w⟩
    for _ in 0..MAX_SWEEPS {
        let mut change = T::zero();
        for i in 0..n {
            let gi: T = (0..n).map(|j| g.entry(i, j) * (z[j] - w[j])).sum();
            let zi = clamp(z[i] - gi / g.entry(i, i), i);
            change = change.max((zi - z[i]).abs());
            z[i] = zi;
        }
        if change <= T::epsilon() * scale {
            break;
        }
    }
    polish_box(w, lo, hi, g, z)
}

/// Re-solves the free coordinates exactly once the active set has settled.
fn polish_box<T: Real>(w: &[T], lo: &[T], hi: &[T], g: &SymOperator<T>, z: Vec<T>) -> Vec<T> {
    let n = w.len();
    let tol = T::lit(1e-12) * (T::one() + linalg::norm_inf(&z));
    let free: Vec<usize> = (0..n)
        .filter(|&i| z[i] > lo[i] + tol && z[i] < hi[i] - tol)
        .collect();
    if free.is_empty() {
        return z;
    }
    let nf = free.len();
    let mut a = vec![T::zero(); nf * nf];
    let mut rhs = vec![T::zero(); nf];
    for (r, &i) in free.iter().enumerate() {
        for (c, &j) in free.iter().enumerate() {
            a[r * nf + c] = g.entry(i, j);
        }
        let mut s = T::zero();
        for j in 0..n {
            let fixed_j = !free.contains(&j);
            s += g.entry(i, j) * if fixed_j { z[j] - w[j] } else { -w[j] };
        }
        rhs[r] = -s;
    }
    let Some(sol) = linalg::solve(&a, nf, &rhs) else {
        return z;
    };
    let mut out = z.clone();
    for (r, &i) in free.iter().enumerate() {
        if sol[r] < lo[i] || sol[r] > hi[i] {
            return z;
        }
        out[i] = sol[r];
    }
    out
}

/// Projects `w` onto the Euclidean ball of radius `r` in the metric `g`.
pub fn project_ball<T: Real>(w: &[T], r: T, g: &SymOperator<T>) -> Vec<T> {
    let nw = linalg::norm(w);
    if nw <= r {
        return w.to_vec();
    }
    let gamma = g.eigenvalues();
    let q = g.eigenvectors();
    let hat: Vec<T> = q.iter().map(|qi| linalg::dot(qi, w)).collect();
    let radius_at = |mu: T| -> T {
        gamma
            .iter()
            .zip(&hat)
            .map(|(&gm, &h)| {
                let c = gm * h / (gm + mu);
                c * c
            })
            .sum::<T>()
            .sqrt()
    };
    // |z(μ)| decreases from |w| to 0 on [0, ∞)
    let mut lo = T::zero();
    let mut hi = g.op_norm() * nw / r;
    while radius_at(hi) > r {
        hi *= T::two();
    }
    for _ in 0..200 {
        let mid = (lo + hi) * T::half();
        if mid <= lo || mid >= hi {
            break;
        }
        if radius_at(mid) > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = hi;
    let mut z = vec![T::zero(); w.len()];
    for ((qi, &gm), &h) in q.iter().zip(gamma).zip(&hat) {
        linalg::axpy(gm * h / (gm + mu), qi, &mut z);
    }
    // snap onto the sphere to remove bisection slack
    let nz = linalg::norm(&z);
    if nz > T::zero() {
        z = linalg::scale(r / nz, &z);
    }
    z
}

/// Minimum-norm point of the convex hull of `points` (Wolfe's algorithm).
/// Returns barycentric weights.
pub fn min_norm_point<T: Real>(points: &[Vec<T>]) -> Vec<T> {
    let m = points.len();
    let scale = points
        .iter()
        .map(|p| linalg::dot(p, p))
        .fold(T::zero(), T::max)
        .max(T::min_positive_value());
    let tol = T::lit(1e-14) * scale;
    let start = (0..m)
        .min_by(|&a, &b| {
            linalg::dot(&points[a], &points[a])
                .partial_cmp(&linalg::dot(&points[b], &points[b]))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("nonempty point set");
    let mut active = vec![start];
    let mut lambda = vec![T::one()];
    let combine = |active: &[usize], lambda: &[T]| {
        let mut x = vec![T::zero(); points[0].len()];
        for (&i, &l) in active.iter().zip(lambda) {
            linalg::axpy(l, &points[i], &mut x);
        }
        x
    };
    let mut x = points[start].clone();
    for _ in 0..(50 * m + 100) {
        let xx = linalg::dot(&x, &x);
        let j = (0..m)
            .min_by(|&a, &b| {
                linalg::dot(&x, &points[a])
                    .partial_cmp(&linalg::dot(&x, &points[b]))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if xx - linalg::dot(&x, &points[j]) <= tol || active.contains(&j) {
            break;
        }
        active.push(j);
        lambda.push(T::zero());
        loop {
            let alpha = affine_minimizer(points, &active);
            let Some(alpha) = alpha else {
                // degenerate corral: drop the newest point
                active.pop();
                lambda.pop();
                return expand(m, &active, &lambda);
            };
            if alpha.iter().all(|&a| a > T::zero()) {
                lambda = alpha;
                break;
            }
            let mut theta = T::one();
            for (&l, &a) in lambda.iter().zip(&alpha) {
                if a <= T::zero() {
                    let den = l - a;
                    if den > T::zero() {
                        theta = theta.min(l / den);
                    }
                }
            }
            for (l, &a) in lambda.iter_mut().zip(&alpha) {
                *l = theta * a + (T::one() - theta) * *l;
            }
            let mut k = 0;
            while k < active.len() {
                if lambda[k] <= T::epsilon() {
                    active.remove(k);
                    lambda.remove(k);
                } else {
                    k += 1;
                }
            }
            let s: T = lambda.iter().copied().sum();
            for l in lambda.iter_mut() {
                *l /= s;
            }
        }
        x = combine(&active, &lambda);
    }
    expand(m, &active, &lambda)
}

fn expand<T: Real>(m: usize, active: &[usize], lambda: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); m];
    for (&i, &l) in active.iter().zip(lambda) {
        out[i] = l;
    }
    out
}

/// Weights of the point of minimum norm in the affine hull of the active points.
fn affine_minimizer<T: Real>(points: &[Vec<T>], active: &[usize]) -> Option<Vec<T>> {
    let k = active.len();
    let n = k + 1;
    let mut a = vec![T::zero(); n * n];
    for (r, &i) in active.iter().enumerate() {
        for (c, &j) in active.iter().enumerate() {
            a[r * n + c] = linalg::dot(&points[i], &points[j]);
        }
        a[r * n + k] = T::one();
        a[k * n + r] = T::one();
    }
    let mut rhs = vec![T::zero(); n];
    rhs[k] = T::one();
    let sol = linalg::solve(&a, n, &rhs)?;
    Some(sol[..k].to_vec())
}

/// Projects `w` onto `conv(vertices)` in the metric `g`.
pub fn project_hull<T: Real>(w: &[T], vertices: &[Vec<T>], g: &SymOperator<T>) -> Vec<T> {
    let gamma = g.eigenvalues();
    let q = g.eigenvectors();
    let whiten = |x: &[T]| -> Vec<T> {
        q.iter()
            .zip(gamma)
            .map(|(qi, &gm)| gm.sqrt() * linalg::dot(qi, x))
            .collect()
    };
    let y = whiten(w);
    let shifted: Vec<Vec<T>> = vertices
        .iter()
        .map(|z| linalg::sub(&whiten(z), &y))
        .collect();
    let weights = min_norm_point(&shifted);
    let mut z = vec![T::zero(); w.len()];
    for (v, &l) in vertices.iter().zip(&weights) {
        linalg::axpy(l, v, &mut z);
    }
    z
}

/// Dykstra's alternating projections onto the intersection of two convex
/// sets, both projections taken in the same metric. Returns the point and
/// the final distance between the two iterates (large when the sets do not
/// meet).
pub fn dykstra<T: Real>(
    w: &[T],
    proj_a: impl Fn(&[T]) -> Vec<T>,
    proj_b: impl Fn(&[T]) -> Vec<T>,
    tol: T,
    max_iter: usize,
) -> (Vec<T>, T) {
    let n = w.len();
    let mut x = w.to_vec();
    let mut p = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    let mut gap = T::infinity();
    let mut b = x.clone();
    for _ in 0..max_iter {
        let a = proj_a(&linalg::add(&x, &p));
        p = linalg::sub(&linalg::add(&x, &p), &a);
        let b_new = proj_b(&linalg::add(&a, &q));
        q = linalg::sub(&linalg::add(&a, &q), &b_new);
        let step = linalg::dist(&b_new, &b);
        gap = linalg::dist(&a, &b_new);
        b = b_new;
        x = b.clone();
        if step <= tol && gap <= tol {
            break;
        }
    }
    (b, gap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_projection_in_skew_metric_satisfies_kkt() {
        let g = SymOperator::new(2, vec![2.0_f64, 1.0, 1.0, 2.0]).unwrap();
        let w = [3.0, -2.5];
        let z = project_box(&w, &[-1.0, -1.0], &[1.0, 1.0], &g);
        // KKT: gradient G(z - w) in the normal cone of the box at z
        let grad = g.apply(&linalg::sub(&z, &w));
        for i in 0..2 {
            if z[i] > -1.0 + 1e-12 && z[i] < 1.0 - 1e-12 {
                assert!(grad[i].abs() < 1e-12);
            } else if z[i] >= 1.0 - 1e-12 {
                assert!(grad[i] <= 1e-12);
            } else {
                assert!(grad[i] >= -1e-12);
            }
        }
    }

    #[test]
    fn ball_projection_radial_in_euclidean_metric() {
        let g = SymOperator::<f64>::identity(2);
        let z = project_ball(&[0.0, 2.0], 1.0, &g);
        assert!(linalg::dist(&z, &[0.0, 1.0]) < 1e-14);
    }

    #[test]
    fn hull_projection_of_square() {
        let g = SymOperator::<f64>::identity(2);
        let square = vec![
            vec![1.0, 1.0],
            vec![-1.0, 1.0],
            vec![-1.0, -1.0],
            vec![1.0, -1.0],
        ];
        let z = project_hull(&[3.0, 0.5], &square, &g);
        assert!(linalg::dist(&z, &[1.0, 0.5]) < 1e-12);
        let z = project_hull(&[3.0, 4.0], &square, &g);
        assert!(linalg::dist(&z, &[1.0, 1.0]) < 1e-12);
        let z = project_hull(&[0.2, -0.3], &square, &g);
        assert!(linalg::dist(&z, &[0.2, -0.3]) < 1e-12);
    }
}
