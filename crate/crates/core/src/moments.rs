//! Gaussian moments of the sigmoid: `E[S(Y)]` and `E[Y S(Y)]` for
//! `Y ~ N(mean, variance)`, including the point-mass limit `variance = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;
use crate::sigmoid::SigmoidSpec;

/// Variances below this are treated as a point mass.
pub const DEGENERATE_VARIANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianParams {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        let g = GaussianParams { mean, variance };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() || !self.variance.is_finite() {
            return Err(Error::Domain(format!(
                "gaussian parameters must be finite (mean {}, variance {})",
                self.mean, self.variance
            )));
        }
        if self.variance < 0.0 {
            return Err(Error::Domain(format!("negative variance {}", self.variance)));
        }
        Ok(())
    }
}

/// `E[S(Y)]`, unchecked. Callers guarantee a valid `g`.
#[inline]
pub(crate) fn s_moment_unchecked(mean: f64, variance: f64, spec: &SigmoidSpec, rule: &QuadratureRule) -> f64 {
    if variance < DEGENERATE_VARIANCE {
        spec.value(mean)
    } else {
        rule.gaussian_expectation(mean, variance, |y| spec.value(y))
    }
}

#[inline]
pub(crate) fn xs_moment_unchecked(mean: f64, variance: f64, spec: &SigmoidSpec, rule: &QuadratureRule) -> f64 {
    if variance < DEGENERATE_VARIANCE {
        mean * spec.value(mean)
    } else {
        rule.gaussian_expectation(mean, variance, |y| y * spec.value(y))
    }
}

/// `∫ S(y) ρ(mean, variance, y) dy`; equals `S(mean)` at zero variance.
pub fn s_moment(g: GaussianParams, spec: &SigmoidSpec, rule: &QuadratureRule) -> Result<f64> {
    g.validate()?;
    Ok(s_moment_unchecked(g.mean, g.variance, spec, rule))
}

/// `∫ y S(y) ρ(mean, variance, y) dy`; equals `mean S(mean)` at zero variance.
pub fn xs_moment(g: GaussianParams, spec: &SigmoidSpec, rule: &QuadratureRule) -> Result<f64> {
    g.validate()?;
    Ok(xs_moment_unchecked(g.mean, g.variance, spec, rule))
}

/// Largest observed ratio `|Δ moment| / (|Δ variance| + |Δ mean|)` over a set
/// of parameter pairs, one value per moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentLipschitz {
    pub s_moment: f64,
    pub xs_moment: f64,
    /// Pairs that contributed (coincident pairs are skipped).
    pub pairs_used: usize,
}

impl MomentLipschitz {
    pub fn max(&self) -> f64 {
        self.s_moment.max(self.xs_moment)
    }
}

pub fn moment_lipschitz_bound(
    pairs: &[(GaussianParams, GaussianParams)],
    spec: &SigmoidSpec,
    rule: &QuadratureRule,
) -> Result<MomentLipschitz> {
    let mut out = MomentLipschitz {
        s_moment: 0.0,
        xs_moment: 0.0,
        pairs_used: 0,
    };
    for (a, b) in pairs {
        if a.variance <= 0.0 || b.variance <= 0.0 {
            return Err(Error::Domain("lipschitz fit requires positive variances".into()));
        }
        let denom = (a.variance - b.variance).abs() + (a.mean - b.mean).abs();
        if denom == 0.0 {
            continue;
        }
        let ds = (s_moment(*a, spec, rule)? - s_moment(*b, spec, rule)?).abs();
        let dxs = (xs_moment(*a, spec, rule)? - xs_moment(*b, spec, rule)?).abs();
        out.s_moment = out.s_moment.max(ds / denom);
        out.xs_moment = out.xs_moment.max(dxs / denom);
        out.pairs_used += 1;
    }
    if out.pairs_used == 0 {
        return Err(Error::InsufficientData("no non-coincident pairs".into()));
    }
    Ok(out)
}

/// All pairs of neighbouring points on a `means × variances` lattice
/// (horizontal, vertical and diagonal neighbours).
pub fn lattice_pairs(means: &[f64], variances: &[f64]) -> Vec<(GaussianParams, GaussianParams)> {
    let at = |i: usize, j: usize| GaussianParams {
        mean: means[i],
        variance: variances[j],
    };
    let mut pairs = Vec::new();
    for i in 0..means.len() {
        for j in 0..variances.len() {
            if i + 1 < means.len() {
                pairs.push((at(i, j), at(i + 1, j)));
            }
            if j + 1 < variances.len() {
                pairs.push((at(i, j), at(i, j + 1)));
            }
            if i + 1 < means.len() && j + 1 < variances.len() {
                pairs.push((at(i, j), at(i + 1, j + 1)));
            }
        }
    }
    pairs
}
