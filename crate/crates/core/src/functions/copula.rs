use std::sync::Arc;

use super::{check_len, check_subset, AxisKind, CumulativeFunction, Pinned, Subset};
use crate::error::{CdnError, Result};
use crate::mvn::{normal_cdf, normal_pdf};

/// Univariate location/scale distribution used as a copula margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    Gaussian { mean: f64, sd: f64 },
    Logistic { location: f64, scale: f64 },
}

impl Marginal {
    fn validate(&self) -> Result<()> {
        let (loc, scale) = self.location_scale();
        if !loc.is_finite() || !(scale > 0.0 && scale.is_finite()) {
            return Err(CdnError::InvalidFunction(format!("invalid marginal {self:?}")));
        }
        Ok(())
    }

    fn location_scale(&self) -> (f64, f64) {
        match *self {
            Marginal::Gaussian { mean, sd } => (mean, sd),
            Marginal::Logistic { location, scale } => (location, scale),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Gaussian { mean, sd } => normal_cdf((x - mean) / sd),
            Marginal::Logistic { location, scale } => {
                let t = (x - location) / scale;
                if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Gaussian { mean, sd } => normal_pdf((x - mean) / sd) / sd,
            Marginal::Logistic { location, scale } => {
                let e = (-((x - location) / scale).abs()).exp();
                e / (scale * (1.0 + e) * (1.0 + e))
            }
        }
    }

    /// Point above which the CDF is within about 1e-14 of 1.
    fn upper(&self) -> f64 {
        let (loc, scale) = self.location_scale();
        match self {
            Marginal::Gaussian { .. } => loc + 8.0 * scale,
            Marginal::Logistic { .. } => loc + 40.0 * scale,
        }
    }

    fn lower(&self) -> f64 {
        let (loc, scale) = self.location_scale();
        match self {
            Marginal::Gaussian { .. } => loc - 8.0 * scale,
            Marginal::Logistic { .. } => loc - 40.0 * scale,
        }
    }
}

/// A single marginal as a cumulative function of one continuous argument.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalCdf(pub Marginal);

impl MarginalCdf {
    pub fn new(marginal: Marginal) -> Result<Self> {
        marginal.validate()?;
        Ok(MarginalCdf(marginal))
    }
}

impl CumulativeFunction for MarginalCdf {
    fn family(&self) -> &'static str {
        "marginal"
    }

    fn arity(&self) -> usize {
        1
    }

    fn axis(&self, _pos: usize) -> AxisKind<'_> {
        AxisKind::Continuous
    }

    fn evaluate(&self, z: &[f64]) -> Result<f64> {
        check_len(self.family(), 1, z)?;
        Ok(self.0.cdf(z[0]))
    }

    fn mixed_diff(&self, subset: Subset, z: &[f64]) -> Result<f64> {
        check_len(self.family(), 1, z)?;
        check_subset(1, subset)?;
        Ok(if subset == 0 { self.0.cdf(z[0]) } else { self.0.pdf(z[0]) })
    }

    fn pin_to_sup(&self, positions: Subset) -> Result<Pinned> {
        check_subset(1, positions)?;
        Ok(if positions == 0 {
            Pinned::Function(Arc::new(self.clone()))
        } else {
            Pinned::Constant(1.0)
        })
    }

    fn upper_probe(&self) -> Vec<f64> {
        vec![self.0.upper()]
    }

    fn lower_probe(&self, _pos: usize) -> f64 {
        self.0.lower()
    }
}

/// Gumbel copula `C(u, v) = exp(-((-ln u)^theta + (-ln v)^theta)^(1/theta))`
/// applied to two marginal CDFs.
#[derive(Debug, Clone, PartialEq)]
pub struct GumbelCopula {
    theta: f64,
    x: Marginal,
    y: Marginal,
}

impl GumbelCopula {
    pub fn new(theta: f64, x: Marginal, y: Marginal) -> Result<Self> {
        if !(theta >= 1.0 && theta.is_finite()) {
            return Err(CdnError::InvalidFunction(format!(
                "Gumbel parameter must be at least 1, got {theta}"
            )));
        }
        x.validate()?;
        y.validate()?;
        Ok(GumbelCopula { theta, x, y })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn marginals(&self) -> (Marginal, Marginal) {
        (self.x, self.y)
    }

    /// Copula value and its partial derivatives `(C, C_u, C_v, C_uv)`.
    fn copula(&self, u: f64, v: f64) -> (f64, f64, f64, f64) {
        let th = self.theta;
        if u <= 0.0 || v <= 0.0 {
            return (0.0, 0.0, 0.0, 0.0);
        }
        // on the upper boundary only the independence case keeps cross terms
        let ind = if th == 1.0 { 1.0 } else { 0.0 };
        if u >= 1.0 && v >= 1.0 {
            return (1.0, ind, ind, ind);
        }
        if u >= 1.0 {
            return (v, ind * v, 1.0, ind);
        }
        if v >= 1.0 {
            return (u, 1.0, ind * u, ind);
        }
        let (a, b) = (-u.ln(), -v.ln());
        let s = a.powf(th) + b.powf(th);
        let root = s.powf(1.0 / th);
        let c = (-root).exp();
        let common = c * s.powf(1.0 / th - 1.0);
        let cu = common * a.powf(th - 1.0) / u;
        let cv = common * b.powf(th - 1.0) / v;
        let cuv = c * (a * b).powf(th - 1.0) / (u * v)
            * s.powf(2.0 / th - 2.0)
            * (1.0 + (th - 1.0) / root);
        (c, cu, cv, cuv)
    }
}

impl CumulativeFunction for GumbelCopula {
    fn family(&self) -> &'static str {
        "copula"
    }

    fn arity(&self) -> usize {
        2
    }

    fn axis(&self, _pos: usize) -> AxisKind<'_> {
        AxisKind::Continuous
    }

    fn evaluate(&self, z: &[f64]) -> Result<f64> {
        self.mixed_diff(0, z)
    }

    fn mixed_diff(&self, subset: Subset, z: &[f64]) -> Result<f64> {
        check_len(self.family(), 2, z)?;
        check_subset(2, subset)?;
        let (u, v) = (self.x.cdf(z[0]), self.y.cdf(z[1]));
        let (c, cu, cv, cuv) = self.copula(u, v);
        let value = match subset {
            0b00 => c,
            0b01 => cu * self.x.pdf(z[0]),
            0b10 => cv * self.y.pdf(z[1]),
            _ => cuv * self.x.pdf(z[0]) * self.y.pdf(z[1]),
        };
        Ok(value.max(0.0))
    }

    fn pin_to_sup(&self, positions: Subset) -> Result<Pinned> {
        check_subset(2, positions)?;
        Ok(match positions {
            0b00 => Pinned::Function(Arc::new(self.clone())),
            0b01 => Pinned::Function(Arc::new(MarginalCdf(self.y))),
            0b10 => Pinned::Function(Arc::new(MarginalCdf(self.x))),
            _ => Pinned::Constant(1.0),
        })
    }

    fn upper_probe(&self) -> Vec<f64> {
        vec![self.x.upper(), self.y.upper()]
    }

    fn lower_probe(&self, pos: usize) -> f64 {
        if pos == 0 {
            self.x.lower()
        } else {
            self.y.lower()
        }
    }
}
