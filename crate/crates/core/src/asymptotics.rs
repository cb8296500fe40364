//! Closed-form leading terms for the event probability, `N*` and `V*` as the
//! effect size shrinks. Every function returns the leading term with the
//! `(1 + o(1))` factor dropped; comparisons against exact values are ratio
//! diagnostics only.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::exact::{ExtendedCount, Provenance, VolumeResult};
use crate::model::{quadratic_form, spd_matrix, FamilySpec, GammaScale, ModelParams, NormalMean};
use crate::special_fn::{psi, LogProb};

/// `ln sqrt((1-a) a / (2π (1-α) α))`.
fn ln_mixture_prefactor(params: &ModelParams) -> f64 {
    let a = params.frac_false;
    let alpha = params.alpha;
    0.5 * ((-a).ln_1p() + a.ln() - (2.0 * PI).ln() - (-alpha).ln_1p() - alpha.ln())
}

/// Leading term in `k q` where `q` is the Fisher-information-weighted squared
/// effect (`I δ²` in one dimension, `δᵀ I δ` in several).
fn ln_leading_term(params: &ModelParams, ln_q: f64, k_times_q: f64) -> LogProb {
    LogProb::from_ln_clamped(
        ln_mixture_prefactor(params) + 0.5 * k_times_q.ln() - ln_q.ln()
            - ln_q * ln_q / (2.0 * k_times_q),
    )
}

/// Event probability for a univariate regular family with Fisher information
/// `fisher_info` at the null.
pub fn asym_p_univariate(params: &ModelParams, fisher_info: f64) -> Result<LogProb> {
    let ln_q = params.require_q_above_one()?;
    check_positive("fisher_info", fisher_info)?;
    let d = params.delta;
    Ok(ln_leading_term(params, ln_q, params.k * fisher_info * d * d))
}

/// Multivariate version with `q(δ) = δᵀ I δ` replacing `I δ²`. `params.delta`
/// is not used; the effect is `delta_vec`.
pub fn asym_p_multivariate(
    params: &ModelParams,
    fisher_matrix: &[Vec<f64>],
    delta_vec: &[f64],
) -> Result<LogProb> {
    let ln_q = params.require_q_above_one()?;
    let m = spd_matrix(fisher_matrix)?;
    if delta_vec.iter().all(|v| *v == 0.0) {
        return Err(Error::Domain {
            name: "delta_vec",
            value: 0.0,
            requirement: "must be nonzero",
        });
    }
    let q = quadratic_form(&m, delta_vec)?;
    Ok(ln_leading_term(params, ln_q, params.k * q))
}

pub fn asym_p_normal(params: &ModelParams, family: &NormalMean) -> Result<LogProb> {
    family.validate()?;
    let ln_q = params.require_q_above_one()?;
    let ds = family.standardized_delta(params.delta);
    Ok(ln_leading_term(params, ln_q, params.k * ds * ds))
}

/// `V* = k ln(1/(1-p)) / p` with `p` the normal-family leading term.
pub fn asym_v_normal(params: &ModelParams, family: &NormalMean) -> Result<VolumeResult> {
    let p = asym_p_normal(params, family)?;
    volume_from_p(p, params, Provenance::AsymptoticNormal)
}

/// Prefactor choices for the gamma-scale leading term. `SqrtLnQ` divides by
/// `sqrt(ln Q_α)`; `LnQ` divides by `ln Q_α` as the univariate formula with
/// `I = ν` does. Both keep the `kν ψ(·)` exponent correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaPrefactor {
    SqrtLnQ,
    LnQ,
}

pub fn asym_p_gamma(params: &ModelParams, family: &GammaScale) -> Result<LogProb> {
    asym_p_gamma_with(params, family, GammaPrefactor::SqrtLnQ)
}

pub fn asym_p_gamma_with(
    params: &ModelParams,
    family: &GammaScale,
    prefactor: GammaPrefactor,
) -> Result<LogProb> {
    family.validate()?;
    let ln_q = params.require_q_above_one()?;
    let shape = params.k * family.nu;
    let d = params.delta;
    let ln_pref = match prefactor {
        GammaPrefactor::SqrtLnQ => 0.5 * ln_q.ln(),
        GammaPrefactor::LnQ => ln_q.ln(),
    };
    let correction = shape * psi(ln_q / (shape * d))?;
    Ok(LogProb::from_ln_clamped(
        ln_mixture_prefactor(params) + 0.5 * shape.ln() + d.ln()
            - ln_pref
            - ln_q * ln_q / (2.0 * shape * d * d)
            - correction,
    ))
}

/// `kν ψ(ln Q_α / (kν δ))`, the gamma-family exponent correction.
pub fn gamma_psi_term(params: &ModelParams, family: &GammaScale) -> Result<f64> {
    let ln_q = params.require_q_above_one()?;
    let shape = params.k * family.nu;
    Ok(shape * psi(ln_q / (shape * params.delta))?)
}

/// `N* = ln(1/(1-p)) / p_event`, `V* = k N*`.
pub fn asym_v_generic(p_event: LogProb, params: &ModelParams) -> Result<VolumeResult> {
    volume_from_p(p_event, params, Provenance::AsymptoticThm1)
}

pub fn volume_from_p(
    p_event: LogProb,
    params: &ModelParams,
    provenance: Provenance,
) -> Result<VolumeResult> {
    params.validate()?;
    if p_event.is_zero() {
        return Err(Error::Unattainable);
    }
    let ln_n = (-(-params.detect_prob).ln_1p()).ln() - p_event.ln();
    let n_star = ExtendedCount::from_ln(ln_n);
    Ok(VolumeResult {
        p_event,
        k: params.k,
        n_star,
        v_star: ExtendedCount::from_ln(params.k.ln() + ln_n),
        provenance,
    })
}

/// Leading term for whichever family is given. Normal and gamma use their
/// dedicated formulas; generic families use the Fisher-information form.
pub fn asym_p(params: &ModelParams, family: &FamilySpec, delta_vec: Option<&[f64]>) -> Result<(LogProb, Provenance)> {
    match family {
        FamilySpec::NormalMean(f) => Ok((asym_p_normal(params, f)?, Provenance::AsymptoticNormal)),
        FamilySpec::GammaScale(f) => Ok((asym_p_gamma(params, f)?, Provenance::AsymptoticGamma)),
        FamilySpec::Generic { fisher_info } => {
            Ok((asym_p_univariate(params, *fisher_info)?, Provenance::AsymptoticThm1))
        }
        FamilySpec::GenericMultivariate { fisher_info_matrix } => {
            let dv = delta_vec.ok_or(Error::Domain {
                name: "delta_vec",
                value: f64::NAN,
                requirement: "required for the multivariate family",
            })?;
            Ok((
                asym_p_multivariate(params, fisher_info_matrix, dv)?,
                Provenance::AsymptoticCor1,
            ))
        }
    }
}

/// Conditions under which the leading terms are proven. Reported, not enforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum RegimeWarning {
    /// `k I δ²` should be small.
    LargeInformation { k_info_delta_sq: f64 },
    /// The gamma family additionally wants `k δ` large.
    SmallKDelta { k_delta: f64 },
}

pub fn regime_warnings(params: &ModelParams, family: &FamilySpec) -> Vec<RegimeWarning> {
    let mut out = Vec::new();
    let kid2 = match family {
        FamilySpec::GenericMultivariate { .. } => None,
        other => other
            .fisher_info()
            .map(|i| params.k * i * params.delta * params.delta),
    };
    if let Some(v) = kid2 {
        if v > 0.5 {
            out.push(RegimeWarning::LargeInformation { k_info_delta_sq: v });
        }
    }
    if let FamilySpec::GammaScale(_) = family {
        let kd = params.k * params.delta;
        if kd < 10.0 {
            out.push(RegimeWarning::SmallKDelta { k_delta: kd });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{exact_p_gamma, exact_p_normal, min_nulls_exact};
    use crate::model::RegimeSpec;

    fn params(a: f64, alpha: f64, delta: f64, k: f64) -> ModelParams {
        ModelParams::with_real_k(a, alpha, 0.9, delta, k).unwrap()
    }

    #[test]
    fn univariate_direct_arithmetic() {
        let p = params(0.05, 0.4, 0.1, 32.0);
        let l = 28.5f64.ln();
        let want = ((0.95 * 0.05 / (2.0 * PI * 0.6 * 0.4)).sqrt() * 32f64.sqrt() * 0.1 / l).ln()
            - l * l / (2.0 * 32.0 * 0.01);
        assert!((asym_p_univariate(&p, 1.0).unwrap().ln() - want).abs() < 1e-12);
    }

    #[test]
    fn normal_matches_univariate_with_unit_information() {
        for (delta, k) in [(0.1, 32.0), (0.02, 1000.0), (0.3, 4.0)] {
            let p = params(0.05, 0.4, delta, k);
            let a = asym_p_normal(&p, &NormalMean::standard()).unwrap();
            let b = asym_p_univariate(&p, 1.0).unwrap();
            assert!((a.ln() - b.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_depends_on_delta_over_sigma() {
        let fam = NormalMean {
            theta0: 1.0,
            sigma: 3.0,
        };
        let a = asym_p_normal(&params(0.05, 0.4, 0.3, 50.0), &fam).unwrap();
        let b = asym_p_normal(&params(0.05, 0.4, 0.1, 50.0), &NormalMean::standard()).unwrap();
        assert!((a.ln() - b.ln()).abs() < 1e-12);
    }

    #[test]
    fn refuses_small_odds_threshold() {
        let p = params(0.5, 0.5, 0.1, 10.0);
        assert!(matches!(
            asym_p_univariate(&p, 1.0),
            Err(Error::OddsThresholdTooSmall { .. })
        ));
        assert!(asym_p_normal(&p, &NormalMean::standard()).is_err());
        assert!(asym_p_gamma(&p, &GammaScale { nu: 1.0 }).is_err());
        assert!(asym_v_normal(&p, &NormalMean::standard()).is_err());
    }

    #[test]
    fn multivariate_reductions() {
        let p = params(0.05, 0.4, 0.05, 40.0);
        let one_d = asym_p_multivariate(&p, &[vec![2.5]], &[0.05]).unwrap();
        assert!((one_d.ln() - asym_p_univariate(&p, 2.5).unwrap().ln()).abs() < 1e-12);

        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let mv = asym_p_multivariate(&p, &id, &[0.03, 0.04]).unwrap();
        assert!((mv.ln() - asym_p_univariate(&p, 1.0).unwrap().ln()).abs() < 1e-12);

        // q = δᵀ I δ = 0.02 for I = [[2,1],[1,2]], δ = (0.1, -0.1)
        let m = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let q = quadratic_form(&spd_matrix(&m).unwrap(), &[0.1, -0.1]).unwrap();
        assert!((q - 0.02).abs() < 1e-15);
        let mv = asym_p_multivariate(&p, &m, &[0.1, -0.1]).unwrap();
        let p_equiv = params(0.05, 0.4, 0.02f64.sqrt(), 40.0);
        assert!((mv.ln() - asym_p_univariate(&p_equiv, 1.0).unwrap().ln()).abs() < 1e-12);

        assert!(matches!(
            asym_p_multivariate(&p, &[vec![1.0, 2.0], vec![2.0, 1.0]], &[0.1, 0.1]),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(asym_p_multivariate(&p, &id, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn volume_is_reciprocal_of_probability() {
        for (delta, k) in [(0.1, 100.0), (0.02, 3000.0)] {
            let p = params(0.05, 0.4, delta, k);
            let fam = NormalMean::standard();
            let v = asym_v_normal(&p, &fam).unwrap();
            let pr = asym_p_normal(&p, &fam).unwrap();
            let identity = v.v_star.ln_value + pr.ln() - k.ln() - (1.0f64 / 0.1).ln().ln();
            assert!(identity.abs() < 1e-12);
            assert!((v.v_star.ln_value - v.n_star.ln_value - k.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn figure_volume_ratio_positive_below_t_two() {
        let fam = NormalMean::standard();
        let delta = 0.1;
        let v = |t: f64| {
            asym_v_normal(&params(0.05, 0.4, delta, delta.powf(-t)), &fam)
                .unwrap()
                .v_star
                .ln_value
        };
        assert_eq!(v(2.0) - v(2.0), 0.0);
        let log10_ratio = (v(1.0) - v(2.0)) / std::f64::consts::LN_10;
        // √k ln Q/δ · exp(ln²Q/(2kδ²)) at k = 10 vs k = 100
        let l = 28.5f64.ln();
        let oracle = (0.5 * (10f64 / 100.0).ln() + l * l / 0.2 - l * l / 2.0) / std::f64::consts::LN_10;
        assert!((log10_ratio - oracle).abs() < 1e-10);
        assert!(log10_ratio > 0.0);
    }

    #[test]
    fn gamma_psi_term_vanishes_for_large_shape_times_delta() {
        // kνδ = 1e6 with δ = 1: the correction is about -kν t³/3, t = ln Q / 1e6
        let p = params(0.05, 0.4, 1.0, 1e6);
        let term = gamma_psi_term(&p, &GammaScale { nu: 1.0 }).unwrap();
        let t = 28.5f64.ln() / 1e6;
        let series = 1e6 * (-t.powi(3) / 3.0 + t.powi(4) / 4.0);
        assert!(term.abs() < 1e-10);
        assert!((term - series).abs() < 1e-22);
    }

    #[test]
    fn gamma_shape_enters_through_k_nu() {
        let p1 = params(0.05, 0.4, 0.01, 50.0);
        let p2 = params(0.05, 0.4, 0.01, 100.0);
        let a = asym_p_gamma(&p1, &GammaScale { nu: 2.0 }).unwrap();
        let b = asym_p_gamma(&p2, &GammaScale { nu: 1.0 }).unwrap();
        assert!((a.ln() - b.ln()).abs() < 1e-12);
    }

    #[test]
    fn gamma_prefactor_variants_differ_by_half_log_ln_q() {
        let p = params(0.05, 0.4, 0.01, 1e5);
        let fam = GammaScale { nu: 1.0 };
        let sqrt_form = asym_p_gamma_with(&p, &fam, GammaPrefactor::SqrtLnQ).unwrap();
        let lnq = asym_p_gamma_with(&p, &fam, GammaPrefactor::LnQ).unwrap();
        assert!((sqrt_form.ln() - lnq.ln() - 0.5 * 28.5f64.ln().ln()).abs() < 1e-12);
        // recorded diagnostic: exact vs each variant at (δ = 0.01, k = 1e5)
        let exact = exact_p_gamma(&p, &fam).unwrap().p_mix.ln();
        assert!((exact - lnq.ln()).abs() < (exact - sqrt_form.ln()).abs());
    }

    #[test]
    fn generic_volume_examples() {
        let e = (-1.0f64).exp();
        let p = ModelParams::new(0.05, 0.4, 1.0 - e, 0.1, 1).unwrap();
        let v = asym_v_generic(LogProb::from_prob(1.0 - e).unwrap(), &p).unwrap();
        assert!((v.n_star.value() - 1.0 / (1.0 - e)).abs() < 1e-12);

        let p7 = ModelParams::new(0.05, 0.4, 0.9, 0.1, 7).unwrap();
        let v = asym_v_generic(LogProb::from_prob(0.013).unwrap(), &p7).unwrap();
        assert!((v.v_star.value() - 7.0 * v.n_star.value()).abs() < 1e-9 * v.v_star.value());
        assert!(asym_v_generic(LogProb::ZERO, &p7).is_err());
    }

    #[test]
    fn generic_volume_close_to_exact_for_small_p() {
        let p = ModelParams::new(0.05, 0.4, 0.9, 0.1, 3).unwrap();
        let mut ln_pe: f64 = 1e-3f64.ln();
        while ln_pe > 1e-12f64.ln() {
            let pe = LogProb::new(ln_pe).unwrap();
            let asym = asym_v_generic(pe, &p).unwrap().n_star.value();
            let exact = min_nulls_exact(pe, 0.9).unwrap().value();
            assert!((asym / exact - 1.0).abs() <= pe.prob(), "p_event = {}", pe.prob());
            ln_pe -= 0.37;
        }
    }

    #[test]
    fn normal_exact_over_asymptotic_tends_to_one() {
        let fam = NormalMean::standard();
        let mut prev = f64::INFINITY;
        for delta in [0.1, 0.05, 0.02, 0.01] {
            let pt = RegimeSpec::SqrtLog.point(delta).unwrap();
            let p = params(0.05, 0.4, delta, pt.k as f64);
            let r = (exact_p_normal(&p, &fam).unwrap().p_mix.ln()
                - asym_p_normal(&p, &fam).unwrap().ln())
            .abs();
            assert!(r < prev);
            prev = r;
        }
    }

    #[test]
    fn larger_volume_when_k_grows_slowly() {
        // V*/δ⁻² along k = 1/(δ² s(δ)) grows like e^{c s}/sqrt(s)
        let fam = NormalMean::standard();
        let mut prev = f64::NEG_INFINITY;
        for delta in [0.2, 0.1, 0.05, 0.02, 0.01, 1e-4] {
            let k = RegimeSpec::SqrtLog.k_real(delta).unwrap();
            let v = asym_v_normal(&params(0.05, 0.4, delta, k), &fam).unwrap();
            let ratio = v.v_star.ln_value - (delta.powi(-2)).ln();
            assert!(ratio > prev);
            prev = ratio;
        }
    }

    #[test]
    fn regime_warnings_flag_out_of_regime_points() {
        let fam = FamilySpec::NormalMean(NormalMean::standard());
        assert!(regime_warnings(&params(0.05, 0.4, 0.5, 10.0), &fam)
            .iter()
            .any(|w| matches!(w, RegimeWarning::LargeInformation { .. })));
        assert!(regime_warnings(&params(0.05, 0.4, 0.01, 100.0), &fam).is_empty());
        let g = FamilySpec::GammaScale(GammaScale { nu: 1.0 });
        assert!(regime_warnings(&params(0.05, 0.4, 0.01, 100.0), &g)
            .iter()
            .any(|w| matches!(w, RegimeWarning::SmallKDelta { .. })));
    }
}
