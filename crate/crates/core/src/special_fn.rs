//! Log-space special functions.
//!
//! Every tail probability in the crate is carried as a natural logarithm. The
//! regimes of interest produce probabilities such as `exp(-(ln Q)^2 / (2 k δ²))`
//! that are far below the smallest positive `f64`, and minimum data volumes are
//! the reciprocals of those probabilities.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// `ln(sqrt(2π))`.
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Above this argument the normal tail switches from `erfc` to the Mills-ratio
/// continued fraction.
const NORM_SF_CF_CUTOFF: f64 = 8.0;

/// Iteration cap for the incomplete gamma series / continued fraction at small
/// shape. Larger shapes get `GAMMA_ITER_PER_SQRT_SHAPE * sqrt(shape)` extra.
pub const GAMMA_BASE_ITER_CAP: usize = 500;
const GAMMA_ITER_PER_SQRT_SHAPE: f64 = 12.0;
/// Relative convergence tolerance for the incomplete gamma expansions.
pub const GAMMA_TOL: f64 = 1e-15;

/// Natural log of a probability. `ln = -inf` represents probability zero.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
pub struct LogProb(f64);

impl LogProb {
    pub const ZERO: LogProb = LogProb(f64::NEG_INFINITY);
    pub const ONE: LogProb = LogProb(0.0);

    pub fn new(ln: f64) -> Result<Self> {
        if ln.is_nan() || ln > 0.0 {
            return Err(Error::Domain {
                name: "log_prob",
                value: ln,
                requirement: "must be <= 0 (or -inf)",
            });
        }
        Ok(LogProb(ln))
    }

    /// Clamp rounding excursions above zero back to `ln 1`.
    pub(crate) fn from_ln_clamped(ln: f64) -> Self {
        debug_assert!(!ln.is_nan());
        LogProb(ln.min(0.0))
    }

    pub fn from_prob(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain {
                name: "probability",
                value: p,
                requirement: "must lie in [0, 1]",
            });
        }
        Ok(LogProb(p.ln()))
    }

    #[inline]
    pub fn ln(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn prob(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// `ln(p + q)` for the linear-space sum, clamped to `ln 1`.
    pub fn ln_add(self, other: LogProb) -> LogProb {
        LogProb::from_ln_clamped(log_sum_exp(self.0, other.0))
    }

    /// `ln(1 - p)`.
    pub fn complement(self) -> LogProb {
        LogProb(ln_one_minus_exp(self.0))
    }
}

impl fmt::Debug for LogProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LogProb({})", self.0)
    }
}

// JSON has no -inf, so probability zero travels as `null`.
impl Serialize for LogProb {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_some(&self.0)
        } else {
            s.serialize_none()
        }
    }
}

impl<'de> Deserialize<'de> for LogProb {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Option::<f64>::deserialize(d)?;
        match v {
            None => Ok(LogProb::ZERO),
            Some(x) => LogProb::new(x).map_err(serde::de::Error::custom),
        }
    }
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if hi == f64::INFINITY {
        return f64::INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(1 - e^x)` for `x <= 0`.
pub fn ln_one_minus_exp(x: f64) -> f64 {
    if x > -LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln Φ̄(t)`, the log upper tail of the standard normal distribution.
pub fn norm_sf_log(t: f64) -> LogProb {
    if t.is_nan() {
        return LogProb(f64::NAN);
    }
    if t < 0.0 {
        return norm_sf_log(-t).complement();
    }
    if t <= NORM_SF_CF_CUTOFF {
        return LogProb::from_ln_clamped((0.5 * libm::erfc(t / std::f64::consts::SQRT_2)).ln());
    }
    if t == f64::INFINITY {
        return LogProb::ZERO;
    }
    LogProb::from_ln_clamped(-0.5 * t * t - LN_SQRT_2PI + mills_ratio(t).ln())
}

/// Mills ratio `Φ̄(t)/φ(t)` for `t >= 8` via the continued fraction
/// `1/(t + 1/(t + 2/(t + 3/(t + ...))))`, evaluated with modified Lentz.
fn mills_ratio(t: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = t;
    let mut c = t;
    let mut d = 0.0;
    for n in 1..2000 {
        let a = n as f64;
        d = t + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = t + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// `φ(t) = t - ln(1 + t)` for `t > -1`.
pub fn phi(t: f64) -> Result<f64> {
    if t.is_nan() || t <= -1.0 {
        return Err(Error::Domain {
            name: "t",
            value: t,
            requirement: "must be > -1",
        });
    }
    if t.abs() < 0.05 {
        // sum_{n>=2} (-1)^n t^n / n
        Ok(alternating_log_tail(t, 2))
    } else {
        Ok(t - t.ln_1p())
    }
}

/// `ψ(t) = t - t²/2 - ln(1 + t)` for `t > -1`.
pub fn psi(t: f64) -> Result<f64> {
    if t.is_nan() || t <= -1.0 {
        return Err(Error::Domain {
            name: "t",
            value: t,
            requirement: "must be > -1",
        });
    }
    if t.abs() < 0.05 {
        Ok(alternating_log_tail(t, 3))
    } else {
        Ok(t - 0.5 * t * t - t.ln_1p())
    }
}

/// `sum_{n >= first} (-1)^n t^n / n`, the remainder of the `ln(1+t)` series.
fn alternating_log_tail(t: f64, first: i32) -> f64 {
    let mut power = t.powi(first);
    let mut sum = 0.0;
    let mut n = first;
    loop {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * power / n as f64;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() || n > 60 {
            break;
        }
        power *= t;
        n += 1;
    }
    sum
}

/// `ln Γ(a + 1) - [a ln a - a + ln sqrt(2π a)]`, the Stirling remainder.
fn stirling_remainder(a: f64) -> f64 {
    if a < 10.0 {
        return libm::lgamma(a + 1.0) - (a * a.ln() - a + 0.5 * (2.0 * PI * a).ln());
    }
    let r = 1.0 / a;
    let r2 = r * r;
    r * (1.0 / 12.0
        - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 / 1188.0))))
}

/// `ln(x^a e^{-x} / Γ(a + 1))`, the common prefactor of the incomplete gamma
/// expansions. For large `a` the cancellation between `a ln x` and `x` is
/// avoided by writing it as `-a φ((x - a)/a) - ln sqrt(2π a) - remainder`.
fn ln_gamma_prefactor(a: f64, x: f64) -> f64 {
    if a < 10.0 {
        return a * x.ln() - x - libm::lgamma(a + 1.0);
    }
    let u = (x - a) / a;
    // u > -1 because x > 0
    let phi_u = phi(u).unwrap_or(f64::INFINITY);
    -a * phi_u - 0.5 * (2.0 * PI * a).ln() - stirling_remainder(a)
}

fn iteration_cap(shape: f64) -> usize {
    GAMMA_BASE_ITER_CAP + (GAMMA_ITER_PER_SQRT_SHAPE * shape.sqrt()).ceil() as usize
}

/// `ln Q(shape, x)`, the log of the regularized upper incomplete gamma
/// function `Γ(shape, x) / Γ(shape)`.
///
/// Uses the power series for the lower function when `x < shape + 1` and the
/// Legendre continued fraction otherwise.
pub fn gamma_upper_log(shape: f64, x: f64) -> Result<LogProb> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(Error::Domain {
            name: "shape",
            value: shape,
            requirement: "must be finite and > 0",
        });
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain {
            name: "x",
            value: x,
            requirement: "must be >= 0",
        });
    }
    if x == 0.0 {
        return Ok(LogProb::ONE);
    }
    if x == f64::INFINITY {
        return Ok(LogProb::ZERO);
    }
    let prefactor = ln_gamma_prefactor(shape, x);
    let cap = iteration_cap(shape);
    if x < shape + 1.0 {
        let ln_lower = prefactor + lower_series(shape, x, cap).ln();
        Ok(LogProb::from_ln_clamped(ln_one_minus_exp(ln_lower.min(0.0))))
    } else {
        let ln_upper = prefactor + shape.ln() + upper_continued_fraction(shape, x, cap).ln();
        Ok(LogProb::from_ln_clamped(ln_upper))
    }
}

/// `sum_{n>=0} x^n / ((a+1)(a+2)...(a+n))`.
fn lower_series(a: f64, x: f64, cap: usize) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut denom = a;
    for _ in 0..cap {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term < sum * GAMMA_TOL {
            break;
        }
    }
    sum
}

/// `1/(x+1-a- 1(1-a)/(x+3-a- 2(2-a)/(x+5-a- ...)))` by modified Lentz.
fn upper_continued_fraction(a: f64, x: f64, cap: usize) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=cap {
        let i = i as f64;
        let an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_TOL {
            break;
        }
    }
    h
}
