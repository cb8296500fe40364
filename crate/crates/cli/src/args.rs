use clap::{Args, ValueEnum};
use pfdr::model::RegimeSpec;
use pfdr::{FamilySpec, GammaScale, ModelParams, NormalMean, ThresholdProcedure};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyKind {
    Normal,
    Gamma,
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleKind {
    SqrtLog,
    LogLog,
    PowerT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProcedureKind {
    Fixed,
    Shifted,
}

/// `a`, `alpha` and `p`.
#[derive(Debug, Clone, Args)]
pub struct LevelArgs {
    /// Fraction of false nulls, in (0, 1).
    #[arg(long = "a", allow_negative_numbers = true)]
    pub a: f64,
    /// pFDR level, in (0, 1).
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Required probability of at least one trustworthy rejection.
    #[arg(long = "p", default_value_t = 0.9, allow_negative_numbers = true)]
    pub p: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ScheduleArgs {
    /// Tie k to delta instead of giving --k.
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleKind>,
    /// Exponent for `--schedule power-t` (k = delta^-t).
    #[arg(long = "t", allow_negative_numbers = true)]
    pub t: Option<f64>,
}

impl ScheduleArgs {
    pub fn regime(&self) -> Result<Option<RegimeSpec>, CliError> {
        regime_from(self.schedule, self.t)
    }
}

pub fn regime_from(schedule: Option<ScheduleKind>, t: Option<f64>) -> Result<Option<RegimeSpec>, CliError> {
    match schedule {
        None => {
            if t.is_some() {
                return Err(CliError::usage("--t requires --schedule power-t"));
            }
            Ok(None)
        }
        Some(ScheduleKind::SqrtLog) => Ok(Some(RegimeSpec::SqrtLog)),
        Some(ScheduleKind::LogLog) => Ok(Some(RegimeSpec::LogLog)),
        Some(ScheduleKind::PowerT) => {
            let t = t.ok_or_else(|| CliError::usage("--schedule power-t requires --t"))?;
            Ok(Some(RegimeSpec::PowerT { t }))
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub levels: LevelArgs,
    /// Effect size.
    #[arg(long, allow_negative_numbers = true)]
    pub delta: f64,
    /// Replications per null.
    #[arg(long, conflicts_with = "schedule", allow_negative_numbers = true)]
    pub k: Option<f64>,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
}

impl ModelArgs {
    /// Parameters with `k` from `--k` or the rounded schedule value.
    pub fn params(&self) -> Result<ModelParams, CliError> {
        let k = match (self.k, self.schedule.regime()?) {
            (Some(k), _) => k,
            (None, Some(r)) => r.point(self.delta).map_err(CliError::from)?.k as f64,
            (None, None) => return Err(CliError::usage("one of --k or --schedule is required")),
        };
        let l = &self.levels;
        Ok(ModelParams::with_real_k(l.a, l.alpha, l.p, self.delta, k)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    #[arg(long, value_enum, default_value_t = FamilyKind::Normal)]
    pub family: FamilyKind,
    /// Null mean (normal family).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta0: f64,
    /// Known standard deviation (normal family).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub sigma: f64,
    /// Gamma shape (gamma family).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub nu: f64,
    /// Fisher information at the null (generic family). A matrix is given
    /// row-wise as `2,1;1,2`.
    #[arg(long)]
    pub fisher: Option<String>,
    /// Effect vector for a matrix-valued --fisher, e.g. `0.1,-0.1`.
    #[arg(long = "delta-vec", allow_hyphen_values = true)]
    pub delta_vec: Option<String>,
}

pub fn parse_list(flag: &str, s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("{flag}: cannot parse `{v}` as a number")))
        })
        .collect()
}

impl FamilyArgs {
    pub fn spec(&self) -> Result<FamilySpec, CliError> {
        let spec = match self.family {
            FamilyKind::Normal => FamilySpec::NormalMean(NormalMean {
                theta0: self.theta0,
                sigma: self.sigma,
            }),
            FamilyKind::Gamma => FamilySpec::GammaScale(GammaScale { nu: self.nu }),
            FamilyKind::Generic => {
                let raw = self
                    .fisher
                    .as_deref()
                    .ok_or_else(|| CliError::usage("--family generic requires --fisher"))?;
                if raw.contains(';') || raw.contains(',') {
                    let rows = raw
                        .split(';')
                        .map(|r| parse_list("--fisher", r))
                        .collect::<Result<Vec<_>, _>>()?;
                    FamilySpec::GenericMultivariate {
                        fisher_info_matrix: rows,
                    }
                } else {
                    FamilySpec::Generic {
                        fisher_info: parse_list("--fisher", raw)?[0],
                    }
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn delta_vec(&self) -> Result<Option<Vec<f64>>, CliError> {
        self.delta_vec
            .as_deref()
            .map(|s| parse_list("--delta-vec", s))
            .transpose()
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProcedureArgs {
    #[arg(long, value_enum, default_value_t = ProcedureKind::Fixed)]
    pub procedure: ProcedureKind,
    /// Shift constant c in the cutoff alpha + c k delta^2.
    #[arg(long = "cutoff-c", visible_alias = "c", allow_negative_numbers = true, conflicts_with = "gain_m")]
    pub cutoff_c: Option<f64>,
    /// Target power gain M; sets c = (1-alpha) alpha I ln M / ln Q_alpha.
    #[arg(long = "gain-M", id = "gain_m", allow_negative_numbers = true)]
    pub gain_m: Option<f64>,
}

impl ProcedureArgs {
    /// Resolve the shift constant from `--cutoff-c` or `--gain-M`.
    pub fn shift_constant(&self, params: &ModelParams, fisher_info: Option<f64>) -> Result<Option<f64>, CliError> {
        match (self.cutoff_c, self.gain_m) {
            (Some(c), _) => Ok(Some(c)),
            (None, Some(m)) => {
                let info = fisher_info
                    .ok_or_else(|| CliError::usage("--gain-M needs a family with scalar Fisher information"))?;
                Ok(Some(pfdr::power::shifted_cutoff_for_gain(params, info, m)?))
            }
            (None, None) => Ok(None),
        }
    }

    pub fn procedure(&self, params: &ModelParams, fisher_info: Option<f64>) -> Result<ThresholdProcedure, CliError> {
        let c = self.shift_constant(params, fisher_info)?;
        match (self.procedure, c) {
            (ProcedureKind::Fixed, None) => Ok(ThresholdProcedure::Fixed {
                alpha: params.alpha,
            }),
            (ProcedureKind::Fixed, Some(_)) => Err(CliError::usage(
                "--cutoff-c/--gain-M apply only to --procedure shifted",
            )),
            (ProcedureKind::Shifted, Some(c)) => Ok(ThresholdProcedure::Shifted {
                alpha: params.alpha,
                c,
            }),
            (ProcedureKind::Shifted, None) => Err(CliError::usage(
                "--procedure shifted requires --cutoff-c or --gain-M",
            )),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}
