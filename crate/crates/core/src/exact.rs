//! Exact tail probabilities of the trustworthy-rejection event and the exact
//! minimum number of nulls and data volume.

use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, Error, Result};
use crate::model::{gamma_lr_thresholds, FamilySpec, GammaScale, ModelParams, NormalMean};
use crate::special_fn::{gamma_upper_log, norm_sf_log, LogProb};

/// Per-null event probability split by the truth of the null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSplit {
    /// `P₀(E_k)`, the event probability for a true null.
    pub p_null: LogProb,
    /// `P_a(E_k)`, the event probability for a false null.
    pub p_alt: LogProb,
    /// `(1 - a) P₀(E_k) + a P_a(E_k)`.
    pub p_mix: LogProb,
}

impl TailSplit {
    pub fn from_parts(p_null: LogProb, p_alt: LogProb, frac_false: f64) -> Self {
        let null_part = (-frac_false).ln_1p() + p_null.ln();
        let alt_part = frac_false.ln() + p_alt.ln();
        let p_mix = LogProb::from_ln_clamped(crate::special_fn::log_sum_exp(null_part, alt_part));
        TailSplit {
            p_null,
            p_alt,
            p_mix,
        }
    }
}

/// A count that may exceed any machine integer. `ln_value` is always set;
/// `integer` is present when the count is an integer below 2⁶³.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtendedCount {
    pub ln_value: f64,
    pub integer: Option<u64>,
}

impl ExtendedCount {
    pub fn from_integer(n: u64) -> Self {
        ExtendedCount {
            ln_value: (n as f64).ln(),
            integer: Some(n),
        }
    }

    pub fn from_ln(ln_value: f64) -> Self {
        ExtendedCount {
            ln_value,
            integer: None,
        }
    }

    /// Linear value; `inf` when it does not fit in an `f64`.
    pub fn value(&self) -> f64 {
        match self.integer {
            Some(n) => n as f64,
            None => self.ln_value.exp(),
        }
    }

    /// `k · self`. Stays an integer when `k` is integral and nothing overflows.
    pub fn scaled(&self, k: f64) -> Self {
        let ln_value = k.ln() + self.ln_value;
        let integer = match self.integer {
            Some(n) if k.fract() == 0.0 && k < u64::MAX as f64 => n
                .checked_mul(k as u64)
                .filter(|v| *v < (1u64 << 63)),
            _ => None,
        };
        ExtendedCount { ln_value, integer }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    AsymptoticThm1,
    AsymptoticCor1,
    AsymptoticNormal,
    AsymptoticGamma,
}

/// Event probability with the implied minimum number of nulls `N*` and data
/// volume `V* = k N*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeResult {
    pub p_event: LogProb,
    pub k: f64,
    pub n_star: ExtendedCount,
    pub v_star: ExtendedCount,
    pub provenance: Provenance,
}

pub fn exact_p_normal(params: &ModelParams, family: &NormalMean) -> Result<TailSplit> {
    params.validate()?;
    family.validate()?;
    let r = params.k.sqrt() * family.standardized_delta(params.delta);
    let centre = params.ln_q_alpha() / r;
    Ok(TailSplit::from_parts(
        norm_sf_log(centre + r / 2.0),
        norm_sf_log(centre - r / 2.0),
        params.frac_false,
    ))
}

/// The alternative tail uses the scaling identity
/// `P(Gamma(kν, 1+δ) ≥ c_k) = Q(kν, c_k/(1+δ))`.
pub fn exact_p_gamma(params: &ModelParams, family: &GammaScale) -> Result<TailSplit> {
    let (c_k, d_k) = gamma_lr_thresholds(params, family)?;
    let shape = params.k * family.nu;
    let p_null = gamma_upper_log(shape, c_k.max(0.0))?;
    let p_alt = gamma_upper_log(shape, d_k.max(0.0))?;
    Ok(TailSplit::from_parts(p_null, p_alt, params.frac_false))
}

pub fn exact_p(params: &ModelParams, family: &FamilySpec) -> Result<TailSplit> {
    match family {
        FamilySpec::NormalMean(f) => exact_p_normal(params, f),
        FamilySpec::GammaScale(f) => exact_p_gamma(params, f),
        other => Err(Error::NoExactTails(other.name())),
    }
}

/// Smallest `N` with `1 - (1 - p_event)^N ≥ detect_prob`.
pub fn min_nulls_exact(p_event: LogProb, detect_prob: f64) -> Result<ExtendedCount> {
    check_open_unit("detect_prob", detect_prob)?;
    if p_event.is_zero() {
        return Err(Error::Unattainable);
    }
    if p_event.ln() == 0.0 {
        return Ok(ExtendedCount::from_integer(1));
    }
    // both logs are negative
    let ln_miss_one = p_event.complement().ln();
    let ln_miss_target = (-detect_prob).ln_1p();
    // ln N_real = ln(-ln(1-p)) - ln(-ln(1-p_event))
    let ln_n_real = (-ln_miss_target).ln() - ln_neg_ln_one_minus(p_event);
    if ln_n_real > 50.0 * std::f64::consts::LN_2 {
        // ceiling is below f64 resolution here
        return Ok(ExtendedCount::from_ln(ln_n_real));
    }
    let meets = |n: u64| n as f64 * ln_miss_one <= ln_miss_target;
    let mut n = (ln_miss_target / ln_miss_one).ceil().max(1.0) as u64;
    while n > 1 && meets(n - 1) {
        n -= 1;
    }
    while !meets(n) {
        n += 1;
    }
    Ok(ExtendedCount::from_integer(n))
}

/// `ln(-ln(1 - p))`, accurate for `p` far below the `f64` range.
fn ln_neg_ln_one_minus(p: LogProb) -> f64 {
    if p.ln() < -30.0 {
        // -ln(1-p) = p (1 + p/2 + ...)
        p.ln() + 0.5 * p.prob()
    } else {
        (-p.complement().ln()).ln()
    }
}

pub fn min_volume_exact(params: &ModelParams, family: &FamilySpec) -> Result<(TailSplit, VolumeResult)> {
    let split = exact_p(params, family)?;
    let n_star = min_nulls_exact(split.p_mix, params.detect_prob)?;
    Ok((
        split,
        VolumeResult {
            p_event: split.p_mix,
            k: params.k,
            n_star,
            v_star: n_star.scaled(params.k),
            provenance: Provenance::Exact,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(a: f64, alpha: f64, delta: f64, k: u64) -> ModelParams {
        ModelParams::new(a, alpha, 0.9, delta, k).unwrap()
    }

    #[test]
    fn symmetric_point_gives_one_half() {
        for (delta, k) in [(0.1, 1), (0.4, 25), (2.0, 7)] {
            let s = exact_p_normal(&params(0.5, 0.5, delta, k), &NormalMean::standard()).unwrap();
            assert!((s.p_mix.prob() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn normal_reference_example() {
        // mpmath: Φ̄(ln(28.5)/2 + 1), Φ̄(ln(28.5)/2 - 1) and their 0.95/0.05 mixture
        let s = exact_p_normal(&params(0.05, 0.4, 0.4, 25), &NormalMean::standard()).unwrap();
        assert!((s.p_null.prob() / 0.003_736_997_024_361_076 - 1.0).abs() < 1e-12);
        assert!((s.p_alt.prob() / 0.249_853_116_881_070_22 - 1.0).abs() < 1e-12);
        assert!((s.p_mix.prob() / 0.016_042_803_017_196_533 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normal_p_mix_increasing_in_alpha() {
        let base = params(0.05, 0.05, 0.4, 25);
        let mut prev = 0.0;
        for alpha in [0.05, 0.1, 0.2, 0.3, 0.4, 0.6, 0.9] {
            let s = exact_p_normal(&base.with_alpha(alpha).unwrap(), &NormalMean::standard()).unwrap();
            assert!(s.p_mix.prob() > prev);
            prev = s.p_mix.prob();
        }
    }

    #[test]
    fn sigma_enters_through_standardized_effect() {
        let fam = NormalMean {
            theta0: 4.0,
            sigma: 2.5,
        };
        let a = exact_p_normal(&params(0.05, 0.4, 1.0, 25), &fam).unwrap();
        let b = exact_p_normal(&params(0.05, 0.4, 0.4, 25), &NormalMean::standard()).unwrap();
        assert!((a.p_mix.ln() - b.p_mix.ln()).abs() < 1e-14);
    }

    #[test]
    fn gamma_exponential_case() {
        for delta in [0.1, 0.5, 2.0] {
            let s = exact_p_gamma(&params(0.5, 0.5, delta, 1), &GammaScale { nu: 1.0 }).unwrap();
            let c1 = delta.ln_1p() * (1.0 + delta) / delta;
            assert!((s.p_null.ln() + c1).abs() < 1e-13);
        }
    }

    #[test]
    fn gamma_reference_example() {
        // integer shape: Q(10, x) = e^{-x} Σ_{j<10} x^j/j!, values from mpmath
        let s = exact_p_gamma(&params(0.05, 0.4, 0.5, 10), &GammaScale { nu: 1.0 }).unwrap();
        assert!((s.p_null.ln() - (-6.631_126_770_054_425)).abs() < 1e-10);
        assert!((s.p_alt.ln() - (-2.573_337_206_041_882)).abs() < 1e-10);
    }

    #[test]
    fn alternative_tail_dominates() {
        for &nu in &[0.5, 1.0, 3.0] {
            for &delta in &[0.05, 0.2, 1.0] {
                for &k in &[1, 4, 64] {
                    for &alpha in &[0.05, 0.4, 0.8] {
                        let p = params(0.1, alpha, delta, k);
                        let g = exact_p_gamma(&p, &GammaScale { nu }).unwrap();
                        assert!(g.p_alt >= g.p_null);
                        let n = exact_p_normal(&p, &NormalMean::standard()).unwrap();
                        assert!(n.p_alt >= n.p_null);
                    }
                }
            }
        }
    }

    #[test]
    fn mixture_identity_and_bounds() {
        for &a in &[0.01, 0.05, 0.2, 0.7] {
            for &delta in &[0.02, 0.1, 0.4] {
                for &k in &[4, 16, 64, 5000] {
                    let p = params(a, 0.1, delta, k);
                    for s in [
                        exact_p_normal(&p, &NormalMean::standard()).unwrap(),
                        exact_p_gamma(&p, &GammaScale { nu: 2.0 }).unwrap(),
                    ] {
                        let linear = (1.0 - a) * s.p_null.prob() + a * s.p_alt.prob();
                        if linear > 0.0 {
                            assert!((s.p_mix.prob() / linear - 1.0).abs() < 1e-12);
                        }
                        assert!(s.p_mix.ln() >= s.p_null.ln().min(s.p_alt.ln()) - 1e-12);
                        assert!(s.p_mix.ln() <= s.p_null.ln().max(s.p_alt.ln()) + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn generic_family_has_no_exact_tails() {
        let p = params(0.05, 0.4, 0.1, 10);
        assert!(matches!(
            exact_p(&p, &FamilySpec::Generic { fisher_info: 1.0 }),
            Err(Error::NoExactTails(_))
        ));
    }

    #[test]
    fn min_nulls_examples() {
        let p = LogProb::from_prob(0.9).unwrap();
        assert_eq!(min_nulls_exact(p, 0.9).unwrap().integer, Some(1));
        let p = LogProb::from_prob(0.01).unwrap();
        assert_eq!(min_nulls_exact(p, 0.9).unwrap().integer, Some(230));
        let tiny = LogProb::new(-300.0 * std::f64::consts::LN_10).unwrap();
        let n = min_nulls_exact(tiny, 0.9).unwrap();
        assert_eq!(n.integer, None);
        let want = 10f64.ln().ln() + 300.0 * std::f64::consts::LN_10;
        assert!((n.ln_value - want).abs() < 1e-12);
        // deep underflow still works in log space
        let n = min_nulls_exact(LogProb::new(-5000.0).unwrap(), 0.9).unwrap();
        assert!((n.ln_value - (5000.0 + 10f64.ln().ln())).abs() < 1e-9);
        assert!(matches!(min_nulls_exact(LogProb::ZERO, 0.9), Err(Error::Unattainable)));
        assert_eq!(min_nulls_exact(LogProb::ONE, 0.9).unwrap().integer, Some(1));
    }

    #[test]
    fn min_nulls_is_minimal() {
        for &p in &[0.3, 0.05, 0.0123, 1e-4, 3.3e-6] {
            for &target in &[0.5, 0.9, 0.99] {
                let n = min_nulls_exact(LogProb::from_prob(p).unwrap(), target)
                    .unwrap()
                    .integer
                    .unwrap();
                let hit = |m: u64| 1.0 - (1.0 - p).powf(m as f64);
                assert!(hit(n) >= target - 1e-12);
                assert!(n == 1 || hit(n - 1) < target + 1e-12);
            }
        }
    }

    #[test]
    fn volume_composition() {
        let p = params(0.05, 0.4, 0.4, 25);
        let fam = FamilySpec::NormalMean(NormalMean::standard());
        let (split, vol) = min_volume_exact(&p, &fam).unwrap();
        let n = min_nulls_exact(split.p_mix, 0.9).unwrap();
        assert_eq!(vol.n_star, n);
        assert_eq!(vol.n_star.integer, Some(143));
        assert_eq!(vol.v_star.integer, Some(25 * 143));
        assert_eq!(vol.provenance, Provenance::Exact);

        let p1 = params(0.05, 0.4, 0.4, 1);
        let (_, v1) = min_volume_exact(&p1, &fam).unwrap();
        assert_eq!(v1.v_star.integer, v1.n_star.integer);
    }

    #[test]
    fn volume_nonincreasing_in_alpha() {
        let fam = FamilySpec::NormalMean(NormalMean::standard());
        let mut prev = f64::INFINITY;
        for alpha in [0.05, 0.1, 0.2, 0.3, 0.4, 0.5] {
            let (_, v) = min_volume_exact(&params(0.05, alpha, 0.4, 25), &fam).unwrap();
            assert!(v.v_star.ln_value <= prev);
            prev = v.v_star.ln_value;
        }
    }

    #[test]
    fn extended_count_scaling() {
        let n = ExtendedCount::from_integer(1 << 61);
        assert_eq!(n.scaled(8.0).integer, None);
        assert!((n.scaled(8.0).ln_value - 64.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(ExtendedCount::from_integer(3).scaled(2.5).integer, None);
    }
}
