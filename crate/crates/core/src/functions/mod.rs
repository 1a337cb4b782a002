//! Local cumulative functions and their exact mixed derivatives.
//!
//! Continuous axes are differentiated analytically. Discrete axes use the
//! backward difference, with the function taken as 0 below the lowest level.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{CdnError, Result};

mod constant;
mod copula;
mod gaussian;
mod sampled;
mod table;
pub mod validity;

pub use constant::{ConstantFunction, FloorWrapper};
pub use copula::{GumbelCopula, Marginal, MarginalCdf};
pub use gaussian::{GaussAxis, GaussianCdf, MAX_GAUSSIAN_ARITY};
pub use sampled::SampledCdf;
pub use table::DiscreteTable;

/// Bit set of scope positions; bit `i` selects position `i`.
pub type Subset = u32;

/// Shared handle to an immutable cumulative function.
pub type FunctionRef = Arc<dyn CumulativeFunction>;

/// Kind of one argument of a cumulative function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisKind<'a> {
    Continuous,
    /// Ordinal axis with these strictly increasing levels.
    Discrete(&'a [f64]),
}

/// Result of pinning arguments of a function to their suprema.
#[derive(Debug, Clone)]
pub enum Pinned {
    Function(FunctionRef),
    /// Every argument was pinned; the limit is this constant.
    Constant(f64),
}

/// A nonnegative local factor with exact mixed derivatives.
pub trait CumulativeFunction: Debug + Send + Sync {
    /// Short family name used in reports and model files.
    fn family(&self) -> &'static str;

    fn arity(&self) -> usize;

    fn axis(&self, pos: usize) -> AxisKind<'_>;

    fn evaluate(&self, z: &[f64]) -> Result<f64>;

    /// Mixed derivative (continuous axes) or backward difference (discrete
    /// axes) over the positions in `subset`, evaluated at `z`.
    fn mixed_diff(&self, subset: Subset, z: &[f64]) -> Result<f64>;

    /// Limit of the function as the positions in `positions` go to their
    /// suprema. The remaining arguments keep their relative order.
    fn pin_to_sup(&self, positions: Subset) -> Result<Pinned>;

    /// A point where every argument is effectively at its supremum.
    fn upper_probe(&self) -> Vec<f64>;

    /// A value of argument `pos` where the function should have vanished.
    fn lower_probe(&self, pos: usize) -> f64;
}

pub(crate) fn full_mask(arity: usize) -> Subset {
    if arity >= 32 {
        u32::MAX
    } else {
        (1u32 << arity) - 1
    }
}

pub(crate) fn check_len(family: &str, arity: usize, z: &[f64]) -> Result<()> {
    if z.len() != arity {
        return Err(CdnError::DomainError(format!(
            "{family} of arity {arity} evaluated at {} arguments",
            z.len()
        )));
    }
    if let Some(v) = z.iter().find(|v| v.is_nan()) {
        return Err(CdnError::DomainError(format!("{family} argument is {v}")));
    }
    Ok(())
}

pub(crate) fn check_subset(arity: usize, subset: Subset) -> Result<()> {
    if subset & !full_mask(arity) != 0 {
        return Err(CdnError::DomainError(format!(
            "differentiation subset {subset:#b} exceeds arity {arity}"
        )));
    }
    Ok(())
}

/// Index of `value` among `levels`, matched within 1e-9.
pub(crate) fn level_index(levels: &[f64], value: f64) -> Result<usize> {
    let pos = levels.partition_point(|&l| l < value - 1e-9);
    if pos < levels.len() && (levels[pos] - value).abs() <= 1e-9 {
        Ok(pos)
    } else {
        Err(CdnError::DomainError(format!(
            "{value} is not one of the levels {levels:?}"
        )))
    }
}

pub(crate) fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(CdnError::InvalidDomain("ordinal axis has no levels".into()));
    }
    if levels.iter().any(|l| !l.is_finite()) {
        return Err(CdnError::InvalidDomain("levels must be finite".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CdnError::InvalidDomain(format!(
            "levels {levels:?} are not strictly increasing"
        )));
    }
    Ok(())
}

/// Inclusion-exclusion over backward steps along the positions in `steps`.
/// `eval` receives level indices where `-1` means below the lowest level.
pub(crate) fn backward_difference(
    steps: Subset,
    index: &[isize],
    mut eval: impl FnMut(&[isize]) -> f64,
) -> f64 {
    let positions: Vec<usize> = (0..index.len()).filter(|&i| steps >> i & 1 == 1).collect();
    let mut idx = index.to_vec();
    let mut total = 0.0;
    for b in 0..(1u32 << positions.len()) {
        let mut below = false;
        for (bit, &p) in positions.iter().enumerate() {
            idx[p] = index[p] - (b >> bit & 1) as isize;
            below |= idx[p] < 0;
        }
        if below {
            continue;
        }
        let v = eval(&idx);
        if b.count_ones() % 2 == 0 {
            total += v;
        } else {
            total -= v;
        }
    }
    total
}

/// Positions selected by `mask`, ascending.
pub fn subset_positions(mask: Subset) -> impl Iterator<Item = usize> {
    (0..32).filter(move |&i| mask >> i & 1 == 1)
}
