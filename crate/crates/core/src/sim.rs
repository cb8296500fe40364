//! Monte Carlo simulator of the random-effects model.
//!
//! Each repetition draws `n_nulls` independent units: a truth label
//! `η ~ Bernoulli(a)` and `k` observations from `f₀` or `f_a`. Both supported
//! families depend on the data only through `Σ X`, so by default the sum is
//! drawn directly (`N(k θ, k σ²)` or `Gamma(k ν, scale)`). The raw mode draws
//! the `k` observations and accumulates per-observation log-likelihood ratios.
//!
//! Repetition `i` uses its own ChaCha8 stream (`seed_from_u64(seed)`, stream
//! `i`), so results do not depend on how repetitions are scheduled across
//! threads. Aggregation runs in repetition order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ln_q_alpha, posterior_null_prob, FamilySpec, GammaScale, ModelParams, NormalMean};
use crate::power::ThresholdProcedure;

pub const GENERATOR: &str =
    "ChaCha8Rng (rand_chacha 0.9); seed_from_u64(seed), set_stream(rep_index); rand_distr 0.5 StandardNormal/Gamma";
pub const DEFAULT_BUDGET: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SimFamily {
    NormalMean(NormalMean),
    GammaScale(GammaScale),
}

impl TryFrom<&FamilySpec> for SimFamily {
    type Error = Error;

    fn try_from(f: &FamilySpec) -> Result<Self> {
        match f {
            FamilySpec::NormalMean(n) => Ok(SimFamily::NormalMean(*n)),
            FamilySpec::GammaScale(g) => Ok(SimFamily::GammaScale(*g)),
            other => Err(Error::NoExactTails(other.name())),
        }
    }
}

impl From<SimFamily> for FamilySpec {
    fn from(f: SimFamily) -> Self {
        match f {
            SimFamily::NormalMean(n) => FamilySpec::NormalMean(n),
            SimFamily::GammaScale(g) => FamilySpec::GammaScale(g),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    #[default]
    SufficientStatistic,
    RawObservations,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// `frac_false = 0` is allowed here (no false nulls).
    pub params: ModelParams,
    pub family: SimFamily,
    pub n_nulls: u64,
    pub n_reps: u64,
    pub seed: u64,
    pub procedure: ThresholdProcedure,
    #[serde(default)]
    pub mode: SampleMode,
    /// Upper bound on `n_nulls * k * n_reps`.
    pub budget: u64,
}

impl SimConfig {
    pub fn new(params: ModelParams, family: SimFamily, n_nulls: u64, n_reps: u64, seed: u64) -> Self {
        SimConfig {
            params,
            family,
            n_nulls,
            n_reps,
            seed,
            procedure: ThresholdProcedure::Fixed {
                alpha: params.alpha,
            },
            mode: SampleMode::SufficientStatistic,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        if !(p.frac_false >= 0.0 && p.frac_false < 1.0) {
            return Err(Error::Domain {
                name: "frac_false",
                value: p.frac_false,
                requirement: "must lie in [0, 1) for simulation",
            });
        }
        // reuse the analytic checks for the remaining fields
        let mut probe = *p;
        probe.frac_false = 0.5;
        probe.validate()?;
        if p.k.fract() != 0.0 {
            return Err(Error::Domain {
                name: "k",
                value: p.k,
                requirement: "must be an integer for simulation",
            });
        }
        match self.family {
            SimFamily::NormalMean(f) => f.validate()?,
            SimFamily::GammaScale(f) => f.validate()?,
        }
        for (name, v) in [("n_nulls", self.n_nulls), ("n_reps", self.n_reps)] {
            if v == 0 {
                return Err(Error::Domain {
                    name,
                    value: 0.0,
                    requirement: "must be >= 1",
                });
            }
        }
        self.procedure.effective_cutoff(p.delta, p.k)?;
        let requested = self.n_nulls as u128 * p.k as u128 * self.n_reps as u128;
        if requested > self.budget as u128 {
            return Err(Error::BudgetExceeded {
                requested,
                budget: self.budget as u128,
            });
        }
        Ok(())
    }

    fn ln_q(&self, cutoff: f64) -> f64 {
        if self.params.frac_false == 0.0 {
            f64::INFINITY
        } else {
            ln_q_alpha(self.params.frac_false, cutoff).unwrap_or(f64::NAN)
        }
    }
}

/// One simulated null.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullDraw {
    pub false_null: bool,
    pub sum_x: f64,
    pub log_lr: f64,
    pub posterior: f64,
}

struct Sampler {
    family: SimFamily,
    mode: SampleMode,
    frac_false: f64,
    delta: f64,
    k: u64,
    null_sum: Option<Gamma<f64>>,
    alt_sum: Option<Gamma<f64>>,
    null_obs: Option<Gamma<f64>>,
    alt_obs: Option<Gamma<f64>>,
}

impl Sampler {
    fn new(config: &SimConfig) -> Result<Self> {
        let p = &config.params;
        let k = p.k as u64;
        let mut s = Sampler {
            family: config.family,
            mode: config.mode,
            frac_false: p.frac_false,
            delta: p.delta,
            k,
            null_sum: None,
            alt_sum: None,
            null_obs: None,
            alt_obs: None,
        };
        if let SimFamily::GammaScale(g) = config.family {
            let mk = |shape: f64, scale: f64| {
                Gamma::new(shape, scale).map_err(|e| Error::Estimation(format!("gamma sampler: {e}")))
            };
            s.null_sum = Some(mk(p.k * g.nu, 1.0)?);
            s.alt_sum = Some(mk(p.k * g.nu, 1.0 + p.delta)?);
            s.null_obs = Some(mk(g.nu, 1.0)?);
            s.alt_obs = Some(mk(g.nu, 1.0 + p.delta)?);
        }
        Ok(s)
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> NullDraw {
        let false_null = rng.random::<f64>() < self.frac_false;
        let k = self.k as f64;
        let d = self.delta;
        let (sum_x, log_lr) = match (self.family, self.mode) {
            (SimFamily::NormalMean(f), SampleMode::SufficientStatistic) => {
                let ds = f.standardized_delta(d);
                let z: f64 = StandardNormal.sample(rng);
                let mut sum_std = k.sqrt() * z;
                if false_null {
                    sum_std += k * ds;
                }
                (
                    f.sigma * sum_std + k * f.theta0,
                    ds * sum_std - k * ds * ds / 2.0,
                )
            }
            (SimFamily::NormalMean(f), SampleMode::RawObservations) => {
                let mean = f.theta0 + if false_null { d } else { 0.0 };
                let s2 = f.sigma * f.sigma;
                let (mut sum, mut llr) = (0.0, 0.0);
                for _ in 0..self.k {
                    let z: f64 = StandardNormal.sample(rng);
                    let x = mean + f.sigma * z;
                    sum += x;
                    llr += d / s2 * (x - f.theta0) - d * d / (2.0 * s2);
                }
                (sum, llr)
            }
            (SimFamily::GammaScale(g), SampleMode::SufficientStatistic) => {
                let dist = if false_null { &self.alt_sum } else { &self.null_sum };
                let sum = dist.as_ref().expect("gamma sampler").sample(rng);
                (sum, -k * g.nu * d.ln_1p() + d / (1.0 + d) * sum)
            }
            (SimFamily::GammaScale(g), SampleMode::RawObservations) => {
                let dist = if false_null { &self.alt_obs } else { &self.null_obs };
                let dist = dist.as_ref().expect("gamma sampler");
                let (mut sum, mut llr) = (0.0, 0.0);
                for _ in 0..self.k {
                    let x = dist.sample(rng);
                    sum += x;
                    llr += -g.nu * d.ln_1p() + d / (1.0 + d) * x;
                }
                (sum, llr)
            }
        };
        NullDraw {
            false_null,
            sum_x,
            log_lr,
            posterior: posterior_null_prob(log_lr, self.frac_false),
        }
    }
}

fn rep_rng(seed: u64, rep_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep_index);
    rng
}

/// Draw every null of one repetition. Intended for per-null checks.
pub fn draw_rep(config: &SimConfig, rep_index: u64) -> Result<Vec<NullDraw>> {
    config.validate()?;
    let sampler = Sampler::new(config)?;
    let mut rng = rep_rng(config.seed, rep_index);
    Ok((0..config.n_nulls).map(|_| sampler.draw(&mut rng)).collect())
}

/// Per-repetition counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep_index: u64,
    /// Rejections.
    #[serde(rename = "R")]
    pub r: u64,
    /// Sum of posterior null probabilities over rejected nulls.
    #[serde(rename = "R0_expected")]
    pub r0_expected: f64,
    /// Rejected false nulls.
    #[serde(rename = "Ra")]
    pub ra: u64,
    /// False nulls.
    #[serde(rename = "Na")]
    pub na: u64,
    /// At least one null reached the trustworthy-rejection event at `alpha`.
    pub criterion_hit: bool,
    pub min_posterior: f64,
    /// Rejected true nulls (truth labels).
    #[serde(rename = "R0")]
    pub r0: u64,
    /// Nulls reaching the event at `alpha`.
    pub events: u64,
}

fn run_rep(config: &SimConfig, sampler: &Sampler, ln_q_event: f64, cutoff: f64, rep_index: u64) -> RepRecord {
    let mut rng = rep_rng(config.seed, rep_index);
    let mut rec = RepRecord {
        rep_index,
        r: 0,
        r0_expected: 0.0,
        ra: 0,
        na: 0,
        criterion_hit: false,
        min_posterior: f64::INFINITY,
        r0: 0,
        events: 0,
    };
    for _ in 0..config.n_nulls {
        let draw = sampler.draw(&mut rng);
        if draw.false_null {
            rec.na += 1;
        }
        if draw.log_lr >= ln_q_event {
            rec.events += 1;
        }
        rec.min_posterior = rec.min_posterior.min(draw.posterior);
        if draw.posterior <= cutoff {
            rec.r += 1;
            rec.r0_expected += draw.posterior;
            if draw.false_null {
                rec.ra += 1;
            } else {
                rec.r0 += 1;
            }
        }
    }
    rec.criterion_hit = rec.events > 0;
    rec
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    /// Number of independent units behind the estimate.
    pub n: u64,
}

impl Estimate {
    fn binomial(successes: u64, trials: u64) -> Self {
        let p = successes as f64 / trials as f64;
        Estimate {
            value: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            n: trials,
        }
    }

    fn mean_of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Estimate {
            value: mean,
            stderr: (var / n).sqrt(),
            n: values.len() as u64,
        })
    }

    /// `|value - target| <= z * stderr`.
    pub fn within(&self, target: f64, z: f64) -> bool {
        (self.value - target).abs() <= z * self.stderr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimAggregate {
    pub generator: String,
    pub seed: u64,
    pub config: SimConfig,
    pub effective_cutoff: f64,
    pub n_nulls_total: u64,
    /// Pooled frequency of the per-null event at `alpha`.
    pub event_prob: Estimate,
    /// Fraction of repetitions with at least one event.
    pub criterion_prob: Estimate,
    /// `R/N`, `R₀/N`, `R_a/N`, `N_a/N` pooled over all nulls.
    pub rejection_rate: Estimate,
    pub false_rejection_rate: Estimate,
    pub true_rejection_rate: Estimate,
    pub false_null_rate: Estimate,
    /// Mean of `R_a/N_a` over repetitions with `N_a > 0`.
    pub power: Option<Estimate>,
    /// Mean of `Σ_rejected posterior / R` over repetitions with `R > 0`.
    pub pfdr_posterior: Option<Estimate>,
    /// Mean of `R₀/R` over repetitions with `R > 0`.
    pub pfdr_truth: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub aggregate: SimAggregate,
    pub reps: Vec<RepRecord>,
}

pub fn simulate(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let sampler = Sampler::new(config)?;
    let cutoff = config
        .procedure
        .effective_cutoff(config.params.delta, config.params.k)?;
    let ln_q_event = config.ln_q(config.params.alpha);
    let reps: Vec<RepRecord> = (0..config.n_reps)
        .into_par_iter()
        .map(|i| run_rep(config, &sampler, ln_q_event, cutoff, i))
        .collect();
    Ok(SimReport {
        aggregate: aggregate(config, cutoff, &reps),
        reps,
    })
}

fn aggregate(config: &SimConfig, cutoff: f64, reps: &[RepRecord]) -> SimAggregate {
    let total = config.n_nulls * config.n_reps;
    let sum = |f: fn(&RepRecord) -> u64| reps.iter().map(f).sum::<u64>();
    let hits = reps.iter().filter(|r| r.criterion_hit).count() as u64;
    let power: Vec<f64> = reps
        .iter()
        .filter(|r| r.na > 0)
        .map(|r| r.ra as f64 / r.na as f64)
        .collect();
    let rejecting: Vec<&RepRecord> = reps.iter().filter(|r| r.r > 0).collect();
    let pfdr_post: Vec<f64> = rejecting.iter().map(|r| r.r0_expected / r.r as f64).collect();
    let pfdr_truth: Vec<f64> = rejecting.iter().map(|r| r.r0 as f64 / r.r as f64).collect();
    SimAggregate {
        generator: GENERATOR.to_string(),
        seed: config.seed,
        config: *config,
        effective_cutoff: cutoff,
        n_nulls_total: total,
        event_prob: Estimate::binomial(sum(|r| r.events), total),
        criterion_prob: Estimate::binomial(hits, config.n_reps),
        rejection_rate: Estimate::binomial(sum(|r| r.r), total),
        false_rejection_rate: Estimate::binomial(sum(|r| r.r0), total),
        true_rejection_rate: Estimate::binomial(sum(|r| r.ra), total),
        false_null_rate: Estimate::binomial(sum(|r| r.na), total),
        power: Estimate::mean_of(&power),
        pfdr_posterior: Estimate::mean_of(&pfdr_post),
        pfdr_truth: Estimate::mean_of(&pfdr_truth),
    }
}

/// Pooled frequency of the per-null event with its binomial standard error.
pub fn estimate_event_prob(config: &SimConfig) -> Result<Estimate> {
    Ok(simulate(config)?.aggregate.event_prob)
}

/// Fraction of repetitions in which at least one of the `n_nulls` nulls
/// reaches the event.
pub fn estimate_criterion_prob(config: &SimConfig) -> Result<Estimate> {
    Ok(simulate(config)?.aggregate.criterion_prob)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPfdrEstimate {
    pub power: Estimate,
    pub pfdr_posterior: Estimate,
    pub pfdr_truth: Estimate,
}

pub fn estimate_power_pfdr(config: &SimConfig) -> Result<PowerPfdrEstimate> {
    let agg = simulate(config)?.aggregate;
    match (agg.power, agg.pfdr_posterior, agg.pfdr_truth) {
        (Some(power), Some(pfdr_posterior), Some(pfdr_truth)) => Ok(PowerPfdrEstimate {
            power,
            pfdr_posterior,
            pfdr_truth,
        }),
        (None, ..) => Err(Error::Estimation("no repetition contained a false null".into())),
        _ => Err(Error::Estimation("no repetition produced a rejection".into())),
    }
}
