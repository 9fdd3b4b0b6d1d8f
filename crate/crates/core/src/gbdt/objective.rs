use crate::error::{Error, Result};
use crate::math::{self, logistic, softplus};

/// Lower bound applied to Hessians before they are used as divisors.
pub const HESSIAN_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    CrossEntropy,
    Focal,
}

/// Binary training objective. `gamma` and `alpha` only matter for focal loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub gamma: f64,
    pub alpha: f64,
}

impl Default for Objective {
    fn default() -> Self {
        Self::cross_entropy()
    }
}

impl Objective {
    pub const fn cross_entropy() -> Self {
        Self { kind: ObjectiveKind::CrossEntropy, gamma: 2.0, alpha: 0.25 }
    }

    pub fn focal(gamma: f64, alpha: f64) -> Result<Self> {
        let obj = Self { kind: ObjectiveKind::Focal, gamma, alpha };
        obj.validate()?;
        Ok(obj)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(alloc::format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    /// Loss as a function of the logit, evaluated without forming `ln p`
    /// from a rounded probability.
    pub fn loss_from_logit(&self, logit: f64, y: bool) -> f64 {
        match self.kind {
            ObjectiveKind::CrossEntropy => {
                if y {
                    softplus(-logit)
                } else {
                    softplus(logit)
                }
            }
            ObjectiveKind::Focal => {
                let (g, a) = (self.gamma, self.alpha);
                if y {
                    a * math::powf(logistic(-logit), g) * softplus(-logit)
                } else {
                    (1.0 - a) * math::powf(logistic(logit), g) * softplus(logit)
                }
            }
        }
    }

    /// Exact first and second derivatives of the loss with respect to the
    /// logit. The focal Hessian can be negative.
    pub fn grad_hess_raw(&self, logit: f64, y: bool) -> (f64, f64) {
        let p = logistic(logit);
        let q = logistic(-logit);
        match self.kind {
            ObjectiveKind::CrossEntropy => {
                let grad = if y { -q } else { p };
                (grad, p * q)
            }
            ObjectiveKind::Focal => {
                let (g, a) = (self.gamma, self.alpha);
                if y {
                    // ln p
                    let lp = -softplus(-logit);
                    let qg = math::powf(q, g);
                    let inner = g * p * lp - q;
                    let grad = a * qg * inner;
                    let hess = a * p * qg * (-g * inner + q * (g * lp + g + 1.0));
                    (grad, hess)
                } else {
                    // ln (1 - p)
                    let lq = -softplus(logit);
                    let pg = math::powf(p, g);
                    let inner = g * q * lq - p;
                    let grad = -(1.0 - a) * pg * inner;
                    let hess = (1.0 - a) * q * pg * (-g * inner + p * (g * lq + g + 1.0));
                    (grad, hess)
                }
            }
        }
    }
}

/// Gradient and floored Hessian used by the tree learner.
pub fn objective_grad_hess(logit: f64, y: bool, obj: &Objective) -> (f64, f64) {
    let (g, h) = obj.grad_hess_raw(logit, y);
    (g, h.max(HESSIAN_FLOOR))
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::ProbabilityDomain(p))
    }
}

/// Focal loss of an estimated probability `p` for label `y`.
pub fn focal_loss(p: f64, y: bool, gamma: f64, alpha: f64) -> Result<f64> {
    check_probability(p)?;
    Ok(if y {
        -alpha * math::powf(1.0 - p, gamma) * math::ln(p)
    } else {
        -(1.0 - alpha) * math::powf(p, gamma) * math::ln(1.0 - p)
    })
}

/// Binary cross-entropy of an estimated probability `p` for label `y`.
pub fn cross_entropy(p: f64, y: bool) -> Result<f64> {
    check_probability(p)?;
    Ok(if y { -math::ln(p) } else { -math::ln(1.0 - p) })
}
