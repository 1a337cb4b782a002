use super::{check_len, check_subset, AxisKind, CumulativeFunction, Pinned, Subset};
use crate::error::{CdnError, Result};

/// Univariate CDF stored on a uniform grid and linearly interpolated.
///
/// The function is 0 one grid step below `lo` and constant above `hi`, so its
/// derivative at a grid point is the backward difference over the step.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCdf {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl SampledCdf {
    pub fn new(lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(CdnError::InvalidFunction(
                "sampled CDF needs lo < hi and at least two values".into(),
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(CdnError::InvalidFunction("sampled CDF values must be nonnegative".into()));
        }
        let scale = values.iter().fold(1.0f64, |m, v| m.max(*v));
        if values.windows(2).any(|w| w[1] < w[0] - 1e-12 * scale) {
            return Err(CdnError::InvalidFunction("sampled CDF values must be nondecreasing".into()));
        }
        let step = (hi - lo) / (values.len() - 1) as f64;
        Ok(SampledCdf { lo, step, values })
    }

    /// Samples `f` on `points` uniform points of `[lo, hi]`.
    pub fn from_fn(lo: f64, hi: f64, points: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let step = (hi - lo) / (points.max(2) - 1) as f64;
        Self::new(lo, hi, (0..points).map(|i| f(lo + i as f64 * step)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.step * (self.values.len() - 1) as f64
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.lo + i as f64 * self.step).collect()
    }

    /// Grid values extended by the implicit zero one step below `lo`.
    fn extended(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.values[i - 1]
        }
    }

    /// Position of `x` in units of the step, measured from the implicit zero.
    fn position(&self, x: f64) -> f64 {
        (x - self.lo) / self.step + 1.0
    }
}

impl CumulativeFunction for SampledCdf {
    fn family(&self) -> &'static str {
        "sampled"
    }

    fn arity(&self) -> usize {
        1
    }

    fn axis(&self, _pos: usize) -> AxisKind<'_> {
        AxisKind::Continuous
    }

    fn evaluate(&self, z: &[f64]) -> Result<f64> {
        check_len(self.family(), 1, z)?;
        let n = self.values.len();
        let t = self.position(z[0]);
        if t <= 0.0 {
            return Ok(0.0);
        }
        if t >= n as f64 {
            return Ok(self.values[n - 1]);
        }
        let i = t.floor() as usize;
        let frac = t - i as f64;
        let (a, b) = (self.extended(i), self.extended(i + 1));
        Ok(a + frac * (b - a))
    }

    fn mixed_diff(&self, subset: Subset, z: &[f64]) -> Result<f64> {
        check_subset(1, subset)?;
        if subset == 0 {
            return self.evaluate(z);
        }
        check_len(self.family(), 1, z)?;
        let n = self.values.len();
        let t = self.position(z[0]);
        if t <= 0.0 || t > n as f64 {
            return Ok(0.0);
        }
        // segment (i - 1, i] in extended indices, so knots take the left slope
        let i = (t.ceil() as usize).clamp(1, n);
        Ok(((self.extended(i) - self.extended(i - 1)) / self.step).max(0.0))
    }

    fn pin_to_sup(&self, positions: Subset) -> Result<Pinned> {
        check_subset(1, positions)?;
        Ok(if positions == 0 {
            Pinned::Function(std::sync::Arc::new(self.clone()))
        } else {
            Pinned::Constant(*self.values.last().expect("non-empty"))
        })
    }

    fn upper_probe(&self) -> Vec<f64> {
        vec![self.hi()]
    }

    fn lower_probe(&self, _pos: usize) -> f64 {
        self.lo - self.step
    }
}
