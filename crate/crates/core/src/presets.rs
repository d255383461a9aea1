//! Ready-made systems used by the benchmarks and the CLI configs.

use crate::dissipation::Dissipation;
use crate::energy::{EnergyModel, LoadingCurve};
use crate::error::Result;
use crate::operators::SymOperator;
use crate::scalar::Real;
use crate::scheme::System;

/// `E = ½(u - 2t)²`, `R = |·|`, `M = 1`, `V = v`, `T = 1`, starting at rest in 0.
pub fn convex_play<T: Real>(viscosity: T) -> Result<System<T>> {
    let energy = EnergyModel::quadratic_tracking(
        SymOperator::identity(1),
        LoadingCurve::ramp(vec![T::zero()], vec![T::two()], T::one())?,
        T::one(),
    )?;
    System::new(
        energy,
        Dissipation::symmetric_l1(vec![T::one()])?,
        SymOperator::identity(1),
        SymOperator::diag(&[viscosity])?,
    )
}

/// Play-operator limit of [`convex_play`]: `u = max(2t - 1, 0)`.
pub fn convex_play_limit<T: Real>(t: T) -> T {
    (T::two() * t - T::one()).max(T::zero())
}

/// `E = u⁴/4 - u²/2 - ℓ(t)u` with `ℓ` through the knots
/// `(0, 0), (1, 2.2), (3, 2.8)`, `R = 2|·|`, `M = 1`, `V = v`, `T = 3`.
///
/// The left branch loses stability when `ℓ` crosses `2/(3√3) + 2`.
pub fn double_well<T: Real>(viscosity: T) -> Result<System<T>> {
    let loading = LoadingCurve::piecewise_linear(vec![
        (T::zero(), vec![T::zero()]),
        (T::one(), vec![T::lit(2.2)]),
        (T::lit(3.0), vec![T::lit(2.8)]),
    ])?;
    let energy = EnergyModel::double_well(vec![T::one()], vec![T::one()], None, loading, T::lit(3.0))?;
    System::new(
        energy,
        Dissipation::symmetric_l1(vec![T::two()])?,
        SymOperator::identity(1),
        SymOperator::diag(&[viscosity])?,
    )
}

/// Initial state of [`double_well`]: the local minimum `-1/√3` at rest.
pub fn double_well_start<T: Real>() -> (Vec<T>, Vec<T>) {
    (vec![-T::one() / T::lit(3.0).sqrt()], vec![T::zero()])
}
