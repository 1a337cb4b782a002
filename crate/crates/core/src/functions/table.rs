use std::sync::Arc;

use super::{
    backward_difference, check_len, check_subset, level_index, subset_positions, validate_levels,
    AxisKind, CumulativeFunction, Pinned, Subset,
};
use crate::error::{CdnError, Result};

const MONOTONE_TOLERANCE: f64 = 1e-12;

/// Cumulative function over ordinal axes given by a dense table of values.
/// Values are stored row-major with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTable {
    levels: Vec<Vec<f64>>,
    values: Vec<f64>,
    strides: Vec<usize>,
    normalized: bool,
}

/// A point where some mixed backward difference of a table is negative.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityViolation {
    pub subset: Subset,
    pub index: Vec<usize>,
    pub value: f64,
}

impl DiscreteTable {
    /// Builds a table and checks that every mixed backward difference is
    /// nonnegative. With `normalized`, the top corner must equal 1.
    pub fn new(levels: Vec<Vec<f64>>, values: Vec<f64>, normalized: bool) -> Result<Self> {
        let mut table = Self::new_unvalidated(levels, values)?;
        if let Some(v) = table.monotonicity_violation() {
            return Err(CdnError::InvalidFunction(format!(
                "table has a negative mixed difference {:.3e} over axes {:?} at level indices {:?}",
                v.value,
                subset_positions(v.subset).collect::<Vec<_>>(),
                v.index
            )));
        }
        let top = table.top();
        if top > 1.0 + MONOTONE_TOLERANCE {
            return Err(CdnError::InvalidFunction(format!("table top corner {top} exceeds 1")));
        }
        if normalized && (top - 1.0).abs() > MONOTONE_TOLERANCE {
            return Err(CdnError::InvalidFunction(format!(
                "normalized table has top corner {top}"
            )));
        }
        table.normalized = normalized;
        Ok(table)
    }

    /// Builds a table checking only its shape, so that invalid tables can be
    /// inspected by the validity checks.
    pub fn new_unvalidated(levels: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(CdnError::InvalidFunction("table needs at least one axis".into()));
        }
        for l in &levels {
            validate_levels(l)?;
        }
        let size: usize = levels.iter().map(Vec::len).product();
        if values.len() != size {
            return Err(CdnError::InvalidFunction(format!(
                "table of shape {:?} needs {size} values, got {}",
                levels.iter().map(Vec::len).collect::<Vec<_>>(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CdnError::InvalidFunction("table values must be finite".into()));
        }
        let mut strides = vec![1; levels.len()];
        for i in (0..levels.len() - 1).rev() {
            strides[i] = strides[i + 1] * levels[i + 1].len();
        }
        Ok(DiscreteTable {
            levels,
            values,
            strides,
            normalized: false,
        })
    }

    /// Builds the cumulative table of a nonnegative mass array by running
    /// sums along every axis.
    pub fn from_masses(levels: Vec<Vec<f64>>, masses: Vec<f64>) -> Result<Self> {
        if masses.iter().any(|&m| m < 0.0) {
            return Err(CdnError::InvalidFunction("masses must be nonnegative".into()));
        }
        let mut table = Self::new_unvalidated(levels, masses)?;
        for axis in 0..table.levels.len() {
            table.accumulate(axis);
        }
        let top = table.top();
        if top > 1.0 + MONOTONE_TOLERANCE {
            return Err(CdnError::InvalidFunction(format!("table top corner {top} exceeds 1")));
        }
        table.normalized = (top - 1.0).abs() <= MONOTONE_TOLERANCE;
        Ok(table)
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Value at the all-maximum corner.
    pub fn top(&self) -> f64 {
        *self.values.last().expect("tables are non-empty")
    }

    pub fn value_at(&self, index: &[usize]) -> f64 {
        self.values[self.flat(index)]
    }

    /// Level indices of a flat position.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|&s| {
                let i = flat / s;
                flat %= s;
                i
            })
            .collect()
    }

    fn flat(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    fn accumulate(&mut self, axis: usize) {
        let (n, stride) = (self.levels[axis].len(), self.strides[axis]);
        for flat in 0..self.values.len() {
            if flat / stride % n > 0 {
                self.values[flat] += self.values[flat - stride];
            }
        }
    }

    /// Mixed backward differences over `subset` at every table position.
    pub fn difference_array(&self, subset: Subset) -> Vec<f64> {
        let mut out = self.values.clone();
        for axis in subset_positions(subset) {
            let (n, stride) = (self.levels[axis].len(), self.strides[axis]);
            for flat in (0..out.len()).rev() {
                if flat / stride % n > 0 {
                    out[flat] -= out[flat - stride];
                }
            }
        }
        out
    }

    /// The most negative mixed difference below tolerance, if any.
    pub fn monotonicity_violation(&self) -> Option<MonotonicityViolation> {
        let scale = self.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut worst: Option<MonotonicityViolation> = None;
        for subset in 0..1u32 << self.levels.len() {
            for (flat, &v) in self.difference_array(subset).iter().enumerate() {
                if v < -MONOTONE_TOLERANCE * scale && worst.as_ref().is_none_or(|w| v < w.value) {
                    worst = Some(MonotonicityViolation {
                        subset,
                        index: self.unflatten(flat),
                        value: v,
                    });
                }
            }
        }
        worst
    }

    fn indices(&self, z: &[f64]) -> Result<Vec<isize>> {
        self.levels
            .iter()
            .zip(z)
            .map(|(l, &v)| level_index(l, v).map(|i| i as isize))
            .collect()
    }
}

impl CumulativeFunction for DiscreteTable {
    fn family(&self) -> &'static str {
        "table"
    }

    fn arity(&self) -> usize {
        self.levels.len()
    }

    fn axis(&self, pos: usize) -> AxisKind<'_> {
        AxisKind::Discrete(&self.levels[pos])
    }

    fn evaluate(&self, z: &[f64]) -> Result<f64> {
        check_len(self.family(), self.arity(), z)?;
        let idx = self.indices(z)?;
        Ok(self.values[idx.iter().zip(&self.strides).map(|(&i, s)| i as usize * s).sum::<usize>()])
    }

    fn mixed_diff(&self, subset: Subset, z: &[f64]) -> Result<f64> {
        check_len(self.family(), self.arity(), z)?;
        check_subset(self.arity(), subset)?;
        let idx = self.indices(z)?;
        Ok(backward_difference(subset, &idx, |i| {
            self.values[i.iter().zip(&self.strides).map(|(&i, s)| i as usize * s).sum::<usize>()]
        }))
    }

    fn pin_to_sup(&self, positions: Subset) -> Result<Pinned> {
        check_subset(self.arity(), positions)?;
        let kept: Vec<usize> = (0..self.arity()).filter(|i| positions >> i & 1 == 0).collect();
        if kept.is_empty() {
            return Ok(Pinned::Constant(self.top()));
        }
        let levels: Vec<Vec<f64>> = kept.iter().map(|&i| self.levels[i].clone()).collect();
        let mut index: Vec<usize> = self.levels.iter().map(|l| l.len() - 1).collect();
        let size: usize = levels.iter().map(Vec::len).product();
        let mut values = Vec::with_capacity(size);
        let mut counter = vec![0usize; kept.len()];
        for _ in 0..size {
            for (k, &p) in kept.iter().enumerate() {
                index[p] = counter[k];
            }
            values.push(self.value_at(&index));
            for k in (0..kept.len()).rev() {
                counter[k] += 1;
                if counter[k] < levels[k].len() {
                    break;
                }
                counter[k] = 0;
            }
        }
        let mut sliced = DiscreteTable::new_unvalidated(levels, values)?;
        sliced.normalized = self.normalized;
        Ok(Pinned::Function(Arc::new(sliced)))
    }

    fn upper_probe(&self) -> Vec<f64> {
        self.levels.iter().map(|l| *l.last().expect("non-empty")).collect()
    }

    fn lower_probe(&self, pos: usize) -> f64 {
        self.levels[pos][0]
    }
}
