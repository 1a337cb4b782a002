use std::sync::Arc;

use super::{
    backward_difference, check_len, check_subset, level_index, subset_positions, validate_levels,
    AxisKind, CumulativeFunction, FunctionRef, Pinned, Subset,
};
use crate::error::{CdnError, Result};

/// A function equal to `value` everywhere inside its domain. On ordinal axes
/// it is 0 below the lowest level, like every discrete cumulative function.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantFunction {
    value: f64,
    axes: Vec<Option<Vec<f64>>>,
}

impl ConstantFunction {
    /// `axes[i]` is `None` for a continuous argument or the levels of an
    /// ordinal one.
    pub fn new(value: f64, axes: Vec<Option<Vec<f64>>>) -> Result<Self> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(CdnError::InvalidFunction(format!("constant {value} is not a valid value")));
        }
        if axes.is_empty() {
            return Err(CdnError::InvalidFunction("constant function needs an argument".into()));
        }
        for levels in axes.iter().flatten() {
            validate_levels(levels)?;
        }
        Ok(ConstantFunction { value, axes })
    }

    /// Constant over `arity` continuous arguments.
    pub fn continuous(value: f64, arity: usize) -> Result<Self> {
        Self::new(value, vec![None; arity])
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

impl CumulativeFunction for ConstantFunction {
    fn family(&self) -> &'static str {
        "constant"
    }

    fn arity(&self) -> usize {
        self.axes.len()
    }

    fn axis(&self, pos: usize) -> AxisKind<'_> {
        match &self.axes[pos] {
            None => AxisKind::Continuous,
            Some(levels) => AxisKind::Discrete(levels),
        }
    }

    fn evaluate(&self, z: &[f64]) -> Result<f64> {
        self.mixed_diff(0, z)
    }

    fn mixed_diff(&self, subset: Subset, z: &[f64]) -> Result<f64> {
        check_len(self.family(), self.arity(), z)?;
        check_subset(self.arity(), subset)?;
        let mut idx = Vec::with_capacity(z.len());
        for (axis, &v) in self.axes.iter().zip(z) {
            idx.push(match axis {
                Some(levels) => level_index(levels, v)? as isize,
                None => 0,
            });
        }
        if subset_positions(subset).any(|p| self.axes[p].is_none()) {
            return Ok(0.0);
        }
        Ok(backward_difference(subset, &idx, |_| self.value))
    }

    fn pin_to_sup(&self, positions: Subset) -> Result<Pinned> {
        check_subset(self.arity(), positions)?;
        let axes: Vec<_> = (0..self.arity())
            .filter(|i| positions >> i & 1 == 0)
            .map(|i| self.axes[i].clone())
            .collect();
        if axes.is_empty() {
            return Ok(Pinned::Constant(self.value));
        }
        Ok(Pinned::Function(Arc::new(ConstantFunction::new(self.value, axes)?)))
    }

    fn upper_probe(&self) -> Vec<f64> {
        self.axes
            .iter()
            .map(|a| a.as_ref().map_or(0.0, |l| *l.last().expect("non-empty")))
            .collect()
    }

    fn lower_probe(&self, pos: usize) -> f64 {
        self.axes[pos].as_ref().map_or(-1e12, |l| l[0])
    }
}

/// `floor + (1 - floor) * inner`: a function whose lower tail no longer
/// vanishes. Used to seed validity-check failures.
#[derive(Debug, Clone)]
pub struct FloorWrapper {
    floor: f64,
    inner: FunctionRef,
}

impl FloorWrapper {
    pub fn new(floor: f64, inner: FunctionRef) -> Result<Self> {
        if !(0.0..1.0).contains(&floor) {
            return Err(CdnError::InvalidFunction(format!("floor {floor} outside [0, 1)")));
        }
        if (0..inner.arity()).any(|p| inner.axis(p) != AxisKind::Continuous) {
            return Err(CdnError::InvalidFunction(
                "a floor can only wrap continuous functions".into(),
            ));
        }
        Ok(FloorWrapper { floor, inner })
    }
}

impl CumulativeFunction for FloorWrapper {
    fn family(&self) -> &'static str {
        "floored"
    }

    fn arity(&self) -> usize {
        self.inner.arity()
    }

    fn axis(&self, pos: usize) -> AxisKind<'_> {
        self.inner.axis(pos)
    }

    fn evaluate(&self, z: &[f64]) -> Result<f64> {
        Ok(self.floor + (1.0 - self.floor) * self.inner.evaluate(z)?)
    }

    fn mixed_diff(&self, subset: Subset, z: &[f64]) -> Result<f64> {
        if subset == 0 {
            return self.evaluate(z);
        }
        Ok((1.0 - self.floor) * self.inner.mixed_diff(subset, z)?)
    }

    fn pin_to_sup(&self, positions: Subset) -> Result<Pinned> {
        Ok(match self.inner.pin_to_sup(positions)? {
            Pinned::Constant(c) => Pinned::Constant(self.floor + (1.0 - self.floor) * c),
            Pinned::Function(f) => Pinned::Function(Arc::new(FloorWrapper::new(self.floor, f)?)),
        })
    }

    fn upper_probe(&self) -> Vec<f64> {
        self.inner.upper_probe()
    }

    fn lower_probe(&self, pos: usize) -> f64 {
        self.inner.lower_probe(pos)
    }
}
