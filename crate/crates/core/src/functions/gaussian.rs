use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{
    backward_difference, check_len, check_subset, full_mask, level_index, subset_positions,
    validate_levels, AxisKind, CumulativeFunction, Pinned, Subset,
};
use crate::error::{CdnError, Result};
use crate::mvn::{self, mvn_cdf_std};

/// Largest arity accepted by [`GaussianCdf`].
pub const MAX_GAUSSIAN_ARITY: usize = mvn::MAX_DIM;

const MAX_CONDITION: f64 = 1e12;

/// How one argument of a [`GaussianCdf`] enters the distribution function.
#[derive(Debug, Clone, PartialEq)]
pub enum GaussAxis {
    Continuous,
    /// Ordinal axis whose level `levels[i]` is evaluated at `thresholds[i]`.
    /// The function is 0 below the lowest level.
    Thresholded {
        levels: Vec<f64>,
        thresholds: Vec<f64>,
    },
}

/// Multivariate Gaussian CDF `Phi(x; mean, cov)`, optionally with ordinal
/// axes mapped through thresholds.
#[derive(Debug, Clone)]
pub struct GaussianCdf {
    mean: Vec<f64>,
    cov: Vec<f64>,
    axes: Vec<GaussAxis>,
    continuous: Subset,
    blocks: Vec<Block>,
}

/// Conditional quantities for differentiating over the set `s`.
#[derive(Debug, Clone)]
struct Block {
    s: Vec<usize>,
    t: Vec<usize>,
    precision: DMatrix<f64>,
    log_norm: f64,
    gain: DMatrix<f64>,
    t_sd: Vec<f64>,
    t_corr: Vec<f64>,
}

impl GaussianCdf {
    /// Gaussian CDF over continuous arguments. `cov` is row-major.
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let axes = vec![GaussAxis::Continuous; mean.len()];
        Self::with_axes(mean, cov, axes)
    }

    pub fn univariate(mean: f64, sd: f64) -> Result<Self> {
        Self::new(vec![mean], vec![sd * sd])
    }

    pub fn with_axes(mean: Vec<f64>, cov: Vec<f64>, axes: Vec<GaussAxis>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || d > MAX_GAUSSIAN_ARITY {
            return Err(CdnError::InvalidFunction(format!(
                "Gaussian CDF arity must be between 1 and {MAX_GAUSSIAN_ARITY}, got {d}"
            )));
        }
        if cov.len() != d * d || axes.len() != d {
            return Err(CdnError::InvalidFunction(format!(
                "Gaussian CDF of dimension {d} needs a {d}x{d} covariance and {d} axes"
            )));
        }
        if mean.iter().chain(&cov).any(|v| !v.is_finite()) {
            return Err(CdnError::InvalidFunction("non-finite Gaussian parameter".into()));
        }
        for i in 0..d {
            if cov[i * d + i] <= 0.0 {
                return Err(CdnError::InvalidFunction(format!("variance {i} is not positive")));
            }
            for j in 0..i {
                let (a, b) = (cov[i * d + j], cov[j * d + i]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(CdnError::InvalidFunction("covariance is not symmetric".into()));
                }
            }
        }
        for axis in &axes {
            if let GaussAxis::Thresholded { levels, thresholds } = axis {
                validate_levels(levels)?;
                if thresholds.len() != levels.len() {
                    return Err(CdnError::InvalidFunction(
                        "one threshold is needed per level".into(),
                    ));
                }
                if thresholds.iter().any(|t| t.is_nan() || *t == f64::NEG_INFINITY)
                    || thresholds.windows(2).any(|w| w[0] > w[1])
                {
                    return Err(CdnError::InvalidFunction(format!(
                        "thresholds {thresholds:?} must be nondecreasing and above -inf"
                    )));
                }
            }
        }

        let sd: Vec<f64> = (0..d).map(|i| cov[i * d + i].sqrt()).collect();
        let corr = DMatrix::from_fn(d, d, |i, j| cov[i * d + j] / (sd[i] * sd[j]));
        let eig = SymmetricEigen::new(corr).eigenvalues;
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        if lo <= 0.0 || hi / lo > MAX_CONDITION {
            return Err(CdnError::InvalidFunction(format!(
                "covariance is singular or ill-conditioned (correlation condition number {:.3e})",
                if lo > 0.0 { hi / lo } else { f64::INFINITY }
            )));
        }

        let continuous = axes
            .iter()
            .enumerate()
            .filter(|(_, a)| matches!(a, GaussAxis::Continuous))
            .fold(0, |m, (i, _)| m | 1 << i);
        let sigma = DMatrix::from_row_slice(d, d, &cov);
        let blocks = (0..=full_mask(d))
            .map(|mask| Block::new(&sigma, mask))
            .collect::<Result<Vec<_>>>()?;
        Ok(GaussianCdf {
            mean,
            cov,
            axes,
            continuous,
            blocks,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Row-major covariance matrix.
    pub fn cov(&self) -> &[f64] {
        &self.cov
    }

    pub fn axes(&self) -> &[GaussAxis] {
        &self.axes
    }

    fn coordinates(&self, z: &[f64]) -> Result<Vec<isize>> {
        self.axes
            .iter()
            .zip(z)
            .map(|(axis, &v)| match axis {
                GaussAxis::Continuous => Ok(0),
                GaussAxis::Thresholded { levels, .. } => level_index(levels, v).map(|i| i as isize),
            })
            .collect()
    }

    fn point(&self, z: &[f64], idx: &[isize]) -> Vec<f64> {
        self.axes
            .iter()
            .enumerate()
            .map(|(i, axis)| match axis {
                GaussAxis::Continuous => z[i],
                GaussAxis::Thresholded { thresholds, .. } => thresholds[idx[i] as usize],
            })
            .collect()
    }

    /// Derivative over the continuous positions in `mask` at a real point.
    fn analytic(&self, mask: Subset, x: &[f64]) -> f64 {
        let block = &self.blocks[mask as usize];
        let mut dens = 1.0;
        let mut shift = vec![0.0; block.t.len()];
        if !block.s.is_empty() {
            if block.s.iter().any(|&i| x[i].is_infinite()) {
                return 0.0;
            }
            let diff = DVector::from_iterator(
                block.s.len(),
                block.s.iter().map(|&i| x[i] - self.mean[i]),
            );
            dens = (block.log_norm - 0.5 * diff.dot(&(&block.precision * &diff))).exp();
            if block.t.is_empty() || dens == 0.0 {
                return dens;
            }
            shift.copy_from_slice((&block.gain * &diff).as_slice());
        }
        let lim: Vec<f64> = block
            .t
            .iter()
            .zip(&shift)
            .zip(&block.t_sd)
            .map(|((&i, m), sd)| (x[i] - self.mean[i] - m) / sd)
            .collect();
        dens * mvn_cdf_std(&lim, &block.t_corr)
    }
}

impl Block {
    fn new(sigma: &DMatrix<f64>, mask: Subset) -> Result<Block> {
        let d = sigma.nrows();
        let s: Vec<usize> = subset_positions(mask).collect();
        let t: Vec<usize> = (0..d).filter(|i| mask >> i & 1 == 0).collect();
        let sub = |rows: &[usize], cols: &[usize]| {
            DMatrix::from_fn(rows.len(), cols.len(), |i, j| sigma[(rows[i], cols[j])])
        };
        let sigma_s = sub(&s, &s);
        let (precision, log_norm) = if s.is_empty() {
            (DMatrix::zeros(0, 0), 0.0)
        } else {
            let chol = sigma_s.clone().cholesky().ok_or_else(|| {
                CdnError::InvalidFunction("covariance block is not positive definite".into())
            })?;
            let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let log_norm = -0.5 * (s.len() as f64 * (2.0 * PI).ln() + log_det);
            (chol.inverse(), log_norm)
        };
        let sigma_ts = sub(&t, &s);
        let gain = &sigma_ts * &precision;
        let cond = sub(&t, &t) - &gain * sigma_ts.transpose();
        let m = t.len();
        let t_sd: Vec<f64> = (0..m).map(|i| cond[(i, i)].max(0.0).sqrt()).collect();
        let mut t_corr = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                t_corr[i * m + j] = if i == j {
                    1.0
                } else {
                    (cond[(i, j)] / (t_sd[i] * t_sd[j])).clamp(-1.0, 1.0)
                };
            }
        }
        Ok(Block {
            s,
            t,
            precision,
            log_norm,
            gain,
            t_sd,
            t_corr,
        })
    }
}

impl CumulativeFunction for GaussianCdf {
    fn family(&self) -> &'static str {
        "gaussian"
    }

    fn arity(&self) -> usize {
        self.mean.len()
    }

    fn axis(&self, pos: usize) -> AxisKind<'_> {
        match &self.axes[pos] {
            GaussAxis::Continuous => AxisKind::Continuous,
            GaussAxis::Thresholded { levels, .. } => AxisKind::Discrete(levels),
        }
    }

    fn evaluate(&self, z: &[f64]) -> Result<f64> {
        self.mixed_diff(0, z)
    }

    fn mixed_diff(&self, subset: Subset, z: &[f64]) -> Result<f64> {
        check_len(self.family(), self.arity(), z)?;
        check_subset(self.arity(), subset)?;
        let idx = self.coordinates(z)?;
        let smooth = subset & self.continuous;
        let steps = subset & !self.continuous;
        let value = backward_difference(steps, &idx, |i| self.analytic(smooth, &self.point(z, i)));
        Ok(value.max(0.0))
    }

    fn pin_to_sup(&self, positions: Subset) -> Result<Pinned> {
        let d = self.arity();
        check_subset(d, positions)?;
        for p in subset_positions(positions) {
            if let GaussAxis::Thresholded { thresholds, .. } = &self.axes[p] {
                if *thresholds.last().expect("levels are non-empty") != f64::INFINITY {
                    return Err(CdnError::UnsupportedReduction { family: "gaussian" });
                }
            }
        }
        let kept: Vec<usize> = (0..d).filter(|i| positions >> i & 1 == 0).collect();
        if kept.is_empty() {
            return Ok(Pinned::Constant(1.0));
        }
        let mean = kept.iter().map(|&i| self.mean[i]).collect();
        let cov = kept
            .iter()
            .flat_map(|&i| kept.iter().map(move |&j| self.cov[i * d + j]))
            .collect();
        let axes = kept.iter().map(|&i| self.axes[i].clone()).collect();
        Ok(Pinned::Function(Arc::new(GaussianCdf::with_axes(mean, cov, axes)?)))
    }

    fn upper_probe(&self) -> Vec<f64> {
        let d = self.arity();
        self.axes
            .iter()
            .enumerate()
            .map(|(i, axis)| match axis {
                GaussAxis::Continuous => self.mean[i] + 8.0 * self.cov[i * d + i].sqrt(),
                GaussAxis::Thresholded { levels, .. } => *levels.last().expect("non-empty"),
            })
            .collect()
    }

    fn lower_probe(&self, pos: usize) -> f64 {
        let d = self.arity();
        match &self.axes[pos] {
            GaussAxis::Continuous => self.mean[pos] - 8.0 * self.cov[pos * d + pos].sqrt(),
            GaussAxis::Thresholded { levels, .. } => levels[0],
        }
    }
}
