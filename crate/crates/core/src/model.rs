//! Random-effects model parameters, the odds threshold `Q_α`, likelihood-ratio
//! rejection thresholds and the posterior null probability.
//!
//! Each null is false with probability `a` (`frac_false`). A null is flagged as
//! a trustworthy rejection when its posterior null probability is at most
//! `alpha`, which is the same event as its likelihood-ratio product reaching
//! `Q_α = (1/a - 1)(1/α - 1)`.

use std::f64::consts::E;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, check_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Population fraction of false nulls.
    pub frac_false: f64,
    /// pFDR level.
    pub alpha: f64,
    /// Required probability of at least one trustworthy rejection.
    pub detect_prob: f64,
    /// Effect size `θ - θ₀` (for the gamma family, the alternative scale is `1 + δ`).
    pub delta: f64,
    /// Replications per null. The analytic formulas accept any real `k >= 1`;
    /// the simulator requires an integer.
    pub k: f64,
}

impl ModelParams {
    pub fn new(frac_false: f64, alpha: f64, detect_prob: f64, delta: f64, k: u64) -> Result<Self> {
        Self::with_real_k(frac_false, alpha, detect_prob, delta, k as f64)
    }

    pub fn with_real_k(
        frac_false: f64,
        alpha: f64,
        detect_prob: f64,
        delta: f64,
        k: f64,
    ) -> Result<Self> {
        let p = ModelParams {
            frac_false,
            alpha,
            detect_prob,
            delta,
            k,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_open_unit("frac_false", self.frac_false)?;
        check_open_unit("alpha", self.alpha)?;
        check_open_unit("detect_prob", self.detect_prob)?;
        check_positive("delta", self.delta)?;
        if !(self.k >= 1.0 && self.k.is_finite()) {
            return Err(Error::Domain {
                name: "k",
                value: self.k,
                requirement: "must be finite and >= 1",
            });
        }
        Ok(())
    }

    /// Same model with a different pFDR level (used for cutoff sweeps).
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let mut p = *self;
        p.alpha = alpha;
        p.validate()?;
        Ok(p)
    }

    pub fn with_delta_k(&self, delta: f64, k: f64) -> Result<Self> {
        let mut p = *self;
        p.delta = delta;
        p.k = k;
        p.validate()?;
        Ok(p)
    }

    pub fn q_alpha(&self) -> f64 {
        // validated on construction; the arguments are in (0,1)
        q_alpha(self.frac_false, self.alpha).unwrap_or(f64::NAN)
    }

    pub fn ln_q_alpha(&self) -> f64 {
        ln_q_alpha(self.frac_false, self.alpha).unwrap_or(f64::NAN)
    }

    /// Hard error for the asymptotic layer when `Q_α <= 1`.
    pub fn require_q_above_one(&self) -> Result<f64> {
        self.validate()?;
        let ln_q = self.ln_q_alpha();
        if ln_q > 0.0 {
            Ok(ln_q)
        } else {
            Err(Error::OddsThresholdTooSmall {
                q_alpha: self.q_alpha(),
            })
        }
    }
}

/// Normal means with known standard deviation; the alternative mean is `θ₀ + δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalMean {
    pub theta0: f64,
    pub sigma: f64,
}

impl NormalMean {
    pub fn standard() -> Self {
        NormalMean {
            theta0: 0.0,
            sigma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("sigma", self.sigma)?;
        if !self.theta0.is_finite() {
            return Err(Error::Domain {
                name: "theta0",
                value: self.theta0,
                requirement: "must be finite",
            });
        }
        Ok(())
    }

    /// Effect size in units of `σ`.
    pub fn standardized_delta(&self, delta: f64) -> f64 {
        delta / self.sigma
    }

    pub fn fisher_info(&self) -> f64 {
        1.0 / (self.sigma * self.sigma)
    }
}

/// Gamma(ν, 1) under the null against Gamma(ν, 1 + δ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaScale {
    pub nu: f64,
}

impl GammaScale {
    pub fn validate(&self) -> Result<()> {
        check_positive("nu", self.nu).map(|_| ())
    }

    /// Fisher information of the scale parameter at scale 1.
    pub fn fisher_info(&self) -> f64 {
        self.nu
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    NormalMean(NormalMean),
    GammaScale(GammaScale),
    Generic { fisher_info: f64 },
    GenericMultivariate { fisher_info_matrix: Vec<Vec<f64>> },
}

impl FamilySpec {
    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::NormalMean(_) => "normal_mean",
            FamilySpec::GammaScale(_) => "gamma_scale",
            FamilySpec::Generic { .. } => "generic",
            FamilySpec::GenericMultivariate { .. } => "generic_multivariate",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FamilySpec::NormalMean(f) => f.validate(),
            FamilySpec::GammaScale(f) => f.validate(),
            FamilySpec::Generic { fisher_info } => {
                check_positive("fisher_info", *fisher_info).map(|_| ())
            }
            FamilySpec::GenericMultivariate { fisher_info_matrix } => {
                spd_matrix(fisher_info_matrix).map(|_| ())
            }
        }
    }

    /// Univariate Fisher information at the null, when defined.
    pub fn fisher_info(&self) -> Option<f64> {
        match self {
            FamilySpec::NormalMean(f) => Some(f.fisher_info()),
            FamilySpec::GammaScale(f) => Some(f.fisher_info()),
            FamilySpec::Generic { fisher_info } => Some(*fisher_info),
            FamilySpec::GenericMultivariate { .. } => None,
        }
    }
}

/// Build a matrix from rows and confirm it is symmetric positive definite by
/// running a Cholesky factorization.
pub fn spd_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.len();
    if d == 0 {
        return Err(Error::NotPositiveDefinite("empty matrix".into()));
    }
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::NotPositiveDefinite("matrix is not square".into()));
    }
    let m = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
    for i in 0..d {
        for j in 0..i {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::NotPositiveDefinite(format!(
                    "entries ({i},{j}) and ({j},{i}) differ"
                )));
            }
        }
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite("Cholesky factorization failed".into()));
    }
    Ok(m)
}

/// `q(δ) = δᵀ I δ` for a symmetric positive-definite `I`.
pub fn quadratic_form(matrix: &DMatrix<f64>, delta: &[f64]) -> Result<f64> {
    if delta.len() != matrix.nrows() {
        return Err(Error::Domain {
            name: "delta_vec length",
            value: delta.len() as f64,
            requirement: "must match the Fisher information dimension",
        });
    }
    let v = DVector::from_column_slice(delta);
    Ok((v.transpose() * matrix * &v)[(0, 0)])
}

/// `Q_α = (1/a - 1)(1/α - 1)`.
pub fn q_alpha(frac_false: f64, alpha: f64) -> Result<f64> {
    check_open_unit("frac_false", frac_false)?;
    check_open_unit("alpha", alpha)?;
    Ok((1.0 / frac_false - 1.0) * (1.0 / alpha - 1.0))
}

/// `ln Q_α`, computed without forming `Q_α`.
pub fn ln_q_alpha(frac_false: f64, alpha: f64) -> Result<f64> {
    check_open_unit("frac_false", frac_false)?;
    check_open_unit("alpha", alpha)?;
    Ok(ln_odds_against(frac_false) + ln_odds_against(alpha))
}

/// `ln((1 - x)/x)`.
fn ln_odds_against(x: f64) -> f64 {
    (-x).ln_1p() - x.ln()
}

/// Posterior probability that a null is true given the sum of its
/// per-observation log-likelihood ratios `Σ ln(f_a/f₀)`:
/// `[1 + (a/(1-a)) exp(log_lr_sum)]⁻¹`.
///
/// `frac_false = 0` is accepted (every null is true, posterior 1).
pub fn posterior_null_prob(log_lr_sum: f64, frac_false: f64) -> f64 {
    let z = log_lr_sum - ln_odds_against(frac_false);
    if z.is_nan() {
        return f64::NAN;
    }
    // 1 / (1 + e^z)
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Threshold on `Σ_j X_ij` (original units) above which a normal-mean null is
/// a trustworthy rejection.
///
/// With `Z = (X - θ₀)/σ` and `δ_s = δ/σ` the event is
/// `Σ Z ≥ ln Q_α / δ_s + k δ_s / 2`; mapped back this is
/// `Σ X ≥ σ² ln Q_α / δ + k δ / 2 + k θ₀`.
pub fn normal_lr_threshold(params: &ModelParams, family: &NormalMean) -> Result<f64> {
    params.validate()?;
    family.validate()?;
    let ln_q = params.ln_q_alpha();
    let s2 = family.sigma * family.sigma;
    Ok(s2 * ln_q / params.delta + params.k * params.delta / 2.0 + params.k * family.theta0)
}

/// Sum of per-observation normal log-likelihood ratios, from the data sum.
pub fn normal_log_lr(sum_x: f64, params: &ModelParams, family: &NormalMean) -> f64 {
    let s2 = family.sigma * family.sigma;
    params.delta / s2 * (sum_x - params.k * family.theta0)
        - params.k * params.delta * params.delta / (2.0 * s2)
}

/// Thresholds for the gamma-scale family: `c_k` bounds `Σ X` on the null scale,
/// `d_k = c_k / (1 + δ)` is the same event on the alternative scale.
pub fn gamma_lr_thresholds(params: &ModelParams, family: &GammaScale) -> Result<(f64, f64)> {
    params.validate()?;
    family.validate()?;
    let d = params.delta;
    let c_k = (params.k * family.nu * d.ln_1p() + params.ln_q_alpha()) * (1.0 + d) / d;
    Ok((c_k, c_k / (1.0 + d)))
}

/// `Σ ln(f_a/f₀) = -kν ln(1+δ) + δ/(1+δ) Σ X` for the gamma-scale family.
pub fn gamma_log_lr(sum_x: f64, params: &ModelParams, family: &GammaScale) -> f64 {
    let d = params.delta;
    -params.k * family.nu * d.ln_1p() + d / (1.0 + d) * sum_x
}

/// Schedules tying the replication count `k` to the effect size `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case")]
#[derive(Default)]
pub enum RegimeSpec {
    /// `k = 1/(δ² s(δ))` with `s(δ) = sqrt(ln(1/δ))`.
    #[default]
    SqrtLog,
    /// `k = 1/(δ² s(δ))` with `s(δ) = ln(ln(1/δ) + e)`.
    LogLog,
    /// `k = δ^{-t}`.
    PowerT { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimePoint {
    pub delta: f64,
    pub k_real: f64,
    pub k: u64,
}

impl RegimeSpec {
    /// `s(δ)` for the `k = 1/(δ² s(δ))` schedules; `None` for `PowerT`.
    pub fn s(&self, delta: f64) -> Result<Option<f64>> {
        check_open_unit("delta", delta)?;
        Ok(match self {
            RegimeSpec::SqrtLog => Some((1.0 / delta).ln().sqrt()),
            RegimeSpec::LogLog => Some(((1.0 / delta).ln() + E).ln()),
            RegimeSpec::PowerT { .. } => None,
        })
    }

    pub fn k_real(&self, delta: f64) -> Result<f64> {
        match (self, self.s(delta)?) {
            (RegimeSpec::PowerT { t }, _) => {
                if !(*t > 0.0 && *t <= 2.0) {
                    return Err(Error::Domain {
                        name: "t",
                        value: *t,
                        requirement: "must lie in (0, 2]",
                    });
                }
                Ok(delta.powf(-t))
            }
            (_, Some(s)) => Ok(1.0 / (delta * delta * s)),
            (_, None) => unreachable!("s(δ) defined for non-power schedules"),
        }
    }

    /// Real-valued and rounded `k` (nearest integer, at least 1).
    pub fn point(&self, delta: f64) -> Result<RegimePoint> {
        let k_real = self.k_real(delta)?;
        Ok(RegimePoint {
            delta,
            k_real,
            k: (k_real.round() as u64).max(1),
        })
    }
}
