//! Large-N power and pFDR of posterior-thresholding procedures.
//!
//! For a procedure that rejects every null whose posterior null probability is
//! at most a cutoff `c`, the large-N limits are exact tail functionals:
//! `power_∞ = P_a(E_k(c))` and `pFDR_∞ = (1-a) P₀(E_k(c)) / p_{k,δ}(c)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, Error, Result};
use crate::exact::{exact_p, TailSplit};
use crate::model::{ln_q_alpha, FamilySpec, ModelParams, NormalMean};
use crate::special_fn::{norm_sf_log, LogProb};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ThresholdProcedure {
    /// Cutoff `alpha` at every `(δ, k)`.
    Fixed { alpha: f64 },
    /// Cutoff `alpha + c k δ²`.
    Shifted { alpha: f64, c: f64 },
}

impl ThresholdProcedure {
    pub fn base_alpha(&self) -> f64 {
        match *self {
            ThresholdProcedure::Fixed { alpha } | ThresholdProcedure::Shifted { alpha, .. } => alpha,
        }
    }

    pub fn effective_cutoff(&self, delta: f64, k: f64) -> Result<f64> {
        let cutoff = match *self {
            ThresholdProcedure::Fixed { alpha } => alpha,
            ThresholdProcedure::Shifted { alpha, c } => alpha + c * k * delta * delta,
        };
        check_open_unit("effective cutoff", cutoff)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub power_inf: LogProb,
    pub pfdr_inf: f64,
    pub effective_cutoff: f64,
    pub delta: f64,
    pub k: f64,
    /// Tails at the effective cutoff.
    pub tails: TailSplit,
}

pub fn power_pfdr_threshold(
    procedure: &ThresholdProcedure,
    params: &ModelParams,
    family: &FamilySpec,
) -> Result<PowerReport> {
    params.validate()?;
    let cutoff = procedure.effective_cutoff(params.delta, params.k)?;
    let at_cutoff = params.with_alpha(cutoff)?;
    let tails = exact_p(&at_cutoff, family)?;
    if tails.p_mix.is_zero() {
        return Err(Error::Unattainable);
    }
    let ln_pfdr = (-params.frac_false).ln_1p() + tails.p_null.ln() - tails.p_mix.ln();
    Ok(PowerReport {
        power_inf: tails.p_alt,
        pfdr_inf: ln_pfdr.exp().min(1.0),
        effective_cutoff: cutoff,
        delta: params.delta,
        k: params.k,
        tails,
    })
}

/// `a P_a(E_k(α)) / ((1-α) p_{k,δ}(α))`; tends to 1 in the small-effect regime.
pub fn power_identity_check(params: &ModelParams, family: &FamilySpec) -> Result<f64> {
    let tails = exact_p(params, family)?;
    if tails.p_mix.is_zero() {
        return Err(Error::Unattainable);
    }
    let ln_ratio = params.frac_false.ln() + tails.p_alt.ln()
        - (-params.alpha).ln_1p()
        - tails.p_mix.ln();
    Ok(ln_ratio.exp())
}

/// `c = (1-α) α I ln M / ln Q_α`, the shift constant targeting a power gain `M`.
pub fn shifted_cutoff_for_gain(params: &ModelParams, fisher_info: f64, gain_m: f64) -> Result<f64> {
    let ln_q = params.require_q_above_one()?;
    crate::error::check_positive("fisher_info", fisher_info)?;
    if !(gain_m > 1.0 && gain_m.is_finite()) {
        return Err(Error::Domain {
            name: "gain_M",
            value: gain_m,
            requirement: "must be finite and > 1",
        });
    }
    let alpha = params.alpha;
    Ok((1.0 - alpha) * alpha * fisher_info * gain_m.ln() / ln_q)
}

/// `ln(p_{k,δ}(α₂) / a)`: the dominating bound on the power of any procedure
/// that keeps its limiting pFDR at or below `α` while beating `d*`.
pub fn power_upper_bound(params: &ModelParams, family: &FamilySpec, alpha2: f64) -> Result<f64> {
    check_open_unit("alpha2", alpha2)?;
    if alpha2 <= params.alpha {
        return Err(Error::Domain {
            name: "alpha2",
            value: alpha2,
            requirement: "must exceed alpha",
        });
    }
    let tails = exact_p(&params.with_alpha(alpha2)?, family)?;
    Ok(tails.p_mix.ln() - params.frac_false.ln())
}

/// Power of the shifted procedure relative to `d*` for the normal family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerRatio {
    pub params: ModelParams,
    pub c: f64,
    pub family: NormalMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitCandidate {
    pub name: &'static str,
    pub formula: &'static str,
    pub value: f64,
}

pub fn power_ratio_limit(params: &ModelParams, c: f64, family: &NormalMean) -> Result<PowerRatio> {
    params.require_q_above_one()?;
    family.validate()?;
    if !c.is_finite() {
        return Err(Error::Domain {
            name: "c",
            value: c,
            requirement: "must be finite",
        });
    }
    Ok(PowerRatio {
        params: *params,
        c,
        family: *family,
    })
}

impl PowerRatio {
    /// `Φ̄(ln Q_{α+ckδ²}/r - r/2) / Φ̄(ln Q_α/r - r/2)` with `r = sqrt(k) δ / σ`.
    pub fn ratio(&self, delta: f64, k: f64) -> Result<f64> {
        let p = self.params.with_delta_k(delta, k)?;
        let shifted = ThresholdProcedure::Shifted {
            alpha: p.alpha,
            c: self.c,
        }
        .effective_cutoff(delta, k)?;
        let r = k.sqrt() * self.family.standardized_delta(delta);
        let ln_q = p.ln_q_alpha();
        let ln_q_shifted = ln_q_alpha(p.frac_false, shifted)?;
        let num = norm_sf_log(ln_q_shifted / r - r / 2.0);
        let den = norm_sf_log(ln_q / r - r / 2.0);
        Ok((num.ln() - den.ln()).exp())
    }

    /// Closed forms that could be the limit of [`PowerRatio::ratio`] as
    /// `(δ, k) → (0, ∞)` with `k δ² → 0`.
    pub fn candidates(&self) -> Vec<LimitCandidate> {
        let alpha = self.params.alpha;
        let l = self.params.ln_q_alpha();
        let c = self.c;
        let info = self.family.fisher_info();
        vec![
            LimitCandidate {
                name: "negative_exponent",
                formula: "exp(-2 c lnQ / (1 - alpha))",
                value: (-2.0 * c * l / (1.0 - alpha)).exp(),
            },
            LimitCandidate {
                name: "positive_exponent",
                formula: "exp(2 c lnQ / (1 - alpha))",
                value: (2.0 * c * l / (1.0 - alpha)).exp(),
            },
            LimitCandidate {
                name: "alpha_denominator",
                formula: "exp(2 c lnQ / ((1 - alpha) alpha))",
                value: (2.0 * c * l / ((1.0 - alpha) * alpha)).exp(),
            },
            LimitCandidate {
                name: "gain_consistent",
                formula: "exp(c lnQ / ((1 - alpha) alpha I))",
                value: (c * l / ((1.0 - alpha) * alpha * info)).exp(),
            },
        ]
    }
}

/// Ratios along a shrinking-effect grid and the closed form they approach.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitVerdict {
    pub points: Vec<RatioPoint>,
    pub final_ratio: f64,
    /// Linear extrapolation of the last two ratios to `k δ² = 0`.
    pub extrapolated: f64,
    pub candidates: Vec<LimitCandidate>,
    pub nearest_candidate: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub delta: f64,
    pub k: f64,
    pub cutoff_shift: f64,
    pub ratio: f64,
}

impl PowerRatio {
    pub fn along(&self, grid: &[(f64, f64)]) -> Result<LimitVerdict> {
        if grid.is_empty() {
            return Err(Error::Estimation("empty grid".into()));
        }
        let mut points = Vec::with_capacity(grid.len());
        for &(delta, k) in grid {
            points.push(RatioPoint {
                delta,
                k,
                cutoff_shift: self.c * k * delta * delta,
                ratio: self.ratio(delta, k)?,
            });
        }
        let last = points[points.len() - 1];
        let extrapolated = if points.len() >= 2 {
            let prev = points[points.len() - 2];
            let x1 = prev.k * prev.delta * prev.delta;
            let x2 = last.k * last.delta * last.delta;
            if (x1 - x2).abs() > 0.0 {
                last.ratio - x2 * (prev.ratio - last.ratio) / (x1 - x2)
            } else {
                last.ratio
            }
        } else {
            last.ratio
        };
        let candidates = self.candidates();
        let nearest = candidates
            .iter()
            .min_by(|a, b| {
                let da = (a.value.ln() - extrapolated.ln()).abs();
                let db = (b.value.ln() - extrapolated.ln()).abs();
                da.total_cmp(&db)
            })
            .map(|c| c.name)
            .unwrap_or("none");
        Ok(LimitVerdict {
            points,
            final_ratio: last.ratio,
            extrapolated,
            candidates,
            nearest_candidate: nearest,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GammaScale, RegimeSpec};

    fn params(a: f64, alpha: f64, delta: f64, k: f64) -> ModelParams {
        ModelParams::with_real_k(a, alpha, 0.9, delta, k).unwrap()
    }

    fn normal() -> FamilySpec {
        FamilySpec::NormalMean(NormalMean::standard())
    }

    #[test]
    fn fixed_cutoff_identity() {
        let p = params(0.05, 0.4, 0.1, 100.0);
        let rep = power_pfdr_threshold(&ThresholdProcedure::Fixed { alpha: 0.4 }, &p, &normal())
            .unwrap();
        let lhs = rep.pfdr_inf * rep.tails.p_mix.prob();
        let rhs = 0.95 * rep.tails.p_null.prob();
        assert!((lhs / rhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_reference_value() {
        // √k δ = 1: power = Φ̄(ln 28.5 - 1/2), mpmath value
        let p = params(0.05, 0.4, 0.1, 100.0);
        let rep = power_pfdr_threshold(&ThresholdProcedure::Fixed { alpha: 0.4 }, &p, &normal())
            .unwrap();
        assert!((rep.power_inf.prob() / 0.002_186_620_730_799_376 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cutoff_outside_unit_interval_is_an_error() {
        let p = params(0.05, 0.4, 0.5, 100.0);
        let proc = ThresholdProcedure::Shifted { alpha: 0.4, c: 1.0 };
        assert!(power_pfdr_threshold(&proc, &p, &normal()).is_err());
        let generic = FamilySpec::Generic { fisher_info: 1.0 };
        assert!(matches!(
            power_pfdr_threshold(&ThresholdProcedure::Fixed { alpha: 0.4 }, &p, &generic),
            Err(Error::NoExactTails(_))
        ));
    }

    #[test]
    fn pfdr_never_exceeds_cutoff() {
        for fam in [normal(), FamilySpec::GammaScale(GammaScale { nu: 2.0 })] {
            for &a in &[0.01, 0.05, 0.3] {
                for &delta in &[0.02, 0.1, 0.5] {
                    for &k in &[1.0, 10.0, 300.0] {
                        for &cut in &[0.01, 0.1, 0.4, 0.8] {
                            let p = params(a, 0.1, delta, k);
                            let rep = power_pfdr_threshold(
                                &ThresholdProcedure::Fixed { alpha: cut },
                                &p,
                                &fam,
                            );
                            if let Ok(rep) = rep {
                                assert!(rep.pfdr_inf <= cut * (1.0 + 1e-12));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn power_and_pfdr_monotone_in_cutoff() {
        for fam in [normal(), FamilySpec::GammaScale(GammaScale { nu: 1.0 })] {
            let p = params(0.05, 0.1, 0.1, 60.0);
            let mut prev = (0.0, 0.0);
            for i in 1..99 {
                let cut = i as f64 / 100.0;
                let rep = power_pfdr_threshold(&ThresholdProcedure::Fixed { alpha: cut }, &p, &fam)
                    .unwrap();
                assert!(rep.power_inf.prob() >= prev.0);
                assert!(rep.pfdr_inf >= prev.1 - 1e-15);
                prev = (rep.power_inf.prob(), rep.pfdr_inf);
            }
        }
    }

    #[test]
    fn identity_check_domain() {
        for &a in &[1e-4, 0.05, 0.5, 0.99] {
            let r = power_identity_check(&params(a, 0.4, 0.5, 1.0), &normal()).unwrap();
            assert!(r.is_finite() && r > 0.0);
        }
    }

    #[test]
    fn identity_check_tends_to_one_on_regime_grid() {
        let mut prev = f64::INFINITY;
        for delta in [0.1, 0.05, 0.02] {
            let pt = RegimeSpec::SqrtLog.point(delta).unwrap();
            let r = power_identity_check(&params(0.05, 0.4, delta, pt.k as f64), &normal()).unwrap();
            assert!(r.ln().abs() < prev);
            prev = r.ln().abs();
        }
    }

    #[test]
    fn shift_constant_examples() {
        let p = params(0.05, 0.4, 0.1, 10.0);
        let c = shifted_cutoff_for_gain(&p, 1.0, 10.0).unwrap();
        assert!((c - 0.24 * 10f64.ln() / 28.5f64.ln()).abs() < 1e-15);
        let c2 = shifted_cutoff_for_gain(&p, 1.0, 100.0).unwrap();
        assert!((c2 - 2.0 * c).abs() < 1e-15);
        assert!(shifted_cutoff_for_gain(&p, 1.0, 1.0 + 1e-12).unwrap() < 1e-12);
        assert!(shifted_cutoff_for_gain(&p, 1.0, 1.0).is_err());
        assert!(shifted_cutoff_for_gain(&params(0.5, 0.5, 0.1, 10.0), 1.0, 10.0).is_err());
    }

    #[test]
    fn ratio_is_one_without_shift_and_above_one_with_shift() {
        let p = params(0.05, 0.4, 0.1, 10.0);
        let zero = power_ratio_limit(&p, 0.0, &NormalMean::standard()).unwrap();
        let pos = power_ratio_limit(&p, 0.5, &NormalMean::standard()).unwrap();
        for (delta, k) in [(0.1, 32.0), (0.05, 89.0), (0.2, 3.0)] {
            assert_eq!(zero.ratio(delta, k).unwrap(), 1.0);
            assert!(pos.ratio(delta, k).unwrap() > 1.0);
        }
        assert!(pos.ratio(0.5, 100.0).is_err());
    }

    #[test]
    fn upper_bound_properties() {
        let p = params(0.05, 0.4, 0.05, 231.0);
        let fam = normal();
        let dstar = power_pfdr_threshold(&ThresholdProcedure::Fixed { alpha: 0.4 }, &p, &fam).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for alpha2 in [0.41, 0.45, 0.5, 0.7, 0.9, 1.0 - 1e-9] {
            let b = power_upper_bound(&p, &fam, alpha2).unwrap();
            assert!(b >= dstar.power_inf.ln());
            assert!(b > prev);
            assert!(b <= -(0.05f64.ln()) + 1e-12);
            prev = b;
        }
        assert!(power_upper_bound(&p, &fam, 0.3).is_err());
    }
}
