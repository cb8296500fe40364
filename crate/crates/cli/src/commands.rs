use clap::Args;
use pfdr::asymptotics::{
    asym_p, asym_p_gamma_with, asym_p_univariate, gamma_psi_term, regime_warnings, volume_from_p,
    GammaPrefactor, RegimeWarning,
};
use pfdr::convergence::{adjudicate, convergence_table, Adjudication, ConvergenceTable};
use pfdr::exact::{exact_p, min_volume_exact};
use pfdr::model::RegimeSpec;
use pfdr::power::{
    power_identity_check, power_pfdr_threshold, power_ratio_limit, power_upper_bound, LimitVerdict,
};
use pfdr::{FamilySpec, ModelParams, NormalMean, ThresholdProcedure};
use serde::Serialize;

use crate::args::{
    parse_list, regime_from, FamilyArgs, Format, LevelArgs, ModelArgs, OutputArgs, ProcedureArgs,
    ScheduleKind,
};
use crate::error::CliError;
use crate::output::{csv_bytes, write_bytes, write_json, Prob, Tails, Volume};

pub const SCHEMA_EXACT: &str = "pfdr.exact/1";
pub const SCHEMA_ASYM: &str = "pfdr.asym/1";
pub const SCHEMA_VOLUME: &str = "pfdr.volume/1";
pub const SCHEMA_POWER: &str = "pfdr.power/1";
pub const SCHEMA_RATIO: &str = "pfdr.ratio/1";
pub const SCHEMA_CONVERGE: &str = "pfdr.converge/1";

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Serialize)]
struct ExactRecord {
    schema_version: &'static str,
    command: &'static str,
    family: FamilySpec,
    params: ModelParams,
    q_alpha: f64,
    ln_q_alpha: f64,
    tails: Tails,
    volume: Volume,
}

pub fn exact(args: &PointArgs) -> Result<(), CliError> {
    let params = args.model.params()?;
    let family = args.family.spec()?;
    let (tails, volume) = min_volume_exact(&params, &family)?;
    write_json(
        args.output.out.as_deref(),
        &ExactRecord {
            schema_version: SCHEMA_EXACT,
            command: "exact",
            family,
            params,
            q_alpha: params.q_alpha(),
            ln_q_alpha: params.ln_q_alpha(),
            tails: tails.into(),
            volume: volume.into(),
        },
    )
}

#[derive(Serialize)]
struct NamedProb {
    name: &'static str,
    p_event: Prob,
}

#[derive(Serialize)]
struct AsymRecord {
    schema_version: &'static str,
    command: &'static str,
    family: FamilySpec,
    params: ModelParams,
    q_alpha: f64,
    ln_q_alpha: f64,
    volume: Volume,
    /// `kν ψ(ln Q / (kν δ))` for the gamma family.
    gamma_psi_term: Option<f64>,
    /// Other leading-term forms evaluated at the same point.
    alternatives: Vec<NamedProb>,
    regime_warnings: Vec<RegimeWarning>,
}

pub fn asym(args: &PointArgs) -> Result<(), CliError> {
    let params = args.model.params()?;
    let family = args.family.spec()?;
    let delta_vec = args.family.delta_vec()?;
    let (p, provenance) = asym_p(&params, &family, delta_vec.as_deref())?;
    let volume = volume_from_p(p, &params, provenance)?;
    let (psi_term, alternatives) = match &family {
        FamilySpec::GammaScale(g) => (
            Some(gamma_psi_term(&params, g)?),
            vec![
                NamedProb {
                    name: "gamma_ln_q_prefactor",
                    p_event: asym_p_gamma_with(&params, g, GammaPrefactor::LnQ)?.into(),
                },
                NamedProb {
                    name: "univariate_fisher_nu",
                    p_event: asym_p_univariate(&params, g.fisher_info())?.into(),
                },
            ],
        ),
        _ => (None, Vec::new()),
    };
    write_json(
        args.output.out.as_deref(),
        &AsymRecord {
            schema_version: SCHEMA_ASYM,
            command: "asym",
            regime_warnings: regime_warnings(&params, &family),
            family,
            params,
            q_alpha: params.q_alpha(),
            ln_q_alpha: params.ln_q_alpha(),
            volume: volume.into(),
            gamma_psi_term: psi_term,
            alternatives,
        },
    )
}

#[derive(Serialize)]
struct VolumeRecord {
    schema_version: &'static str,
    command: &'static str,
    family: FamilySpec,
    params: ModelParams,
    exact: Option<Volume>,
    asymptotic: Option<Volume>,
    /// `N*_asym / N*_exact`.
    n_star_ratio: Option<f64>,
    notes: Vec<String>,
}

pub fn volume(args: &PointArgs) -> Result<(), CliError> {
    let params = args.model.params()?;
    let family = args.family.spec()?;
    let delta_vec = args.family.delta_vec()?;
    let mut notes = Vec::new();
    let exact = match min_volume_exact(&params, &family) {
        Ok((_, v)) => Some(v),
        Err(pfdr::Error::NoExactTails(name)) => {
            notes.push(format!("no exact tails for `{name}`"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    let asymptotic = match asym_p(&params, &family, delta_vec.as_deref()) {
        Ok((p, prov)) => Some(volume_from_p(p, &params, prov)?),
        Err(e @ pfdr::Error::OddsThresholdTooSmall { .. }) => {
            notes.push(e.to_string());
            None
        }
        Err(e) => return Err(e.into()),
    };
    if exact.is_none() && asymptotic.is_none() {
        return Err(CliError::usage(notes.join("; ")));
    }
    let n_star_ratio = match (&exact, &asymptotic) {
        (Some(e), Some(a)) => Some((a.n_star.ln_value - e.n_star.ln_value).exp()),
        _ => None,
    };
    write_json(
        args.output.out.as_deref(),
        &VolumeRecord {
            schema_version: SCHEMA_VOLUME,
            command: "volume",
            family,
            params,
            exact: exact.map(Into::into),
            asymptotic: asymptotic.map(Into::into),
            n_star_ratio,
            notes,
        },
    )
}

#[derive(Debug, Clone, Args)]
pub struct PowerArgs {
    #[command(flatten)]
    pub point: PointArgs,
    #[command(flatten)]
    pub procedure: ProcedureArgs,
    /// Report the power bound p(alpha2)/a for alpha2 > alpha.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha2: Option<f64>,
}

#[derive(Serialize)]
struct UpperBound {
    alpha2: f64,
    value: f64,
    ln: f64,
}

#[derive(Serialize)]
struct PowerRecord {
    schema_version: &'static str,
    command: &'static str,
    family: FamilySpec,
    params: ModelParams,
    procedure: ThresholdProcedure,
    effective_cutoff: f64,
    power_inf: Prob,
    pfdr_inf: f64,
    tails: Tails,
    /// `a P_a(E_k(α)) / ((1-α) p_{k,δ}(α))` at the base level.
    identity_ratio: f64,
    upper_bound: Option<UpperBound>,
}

pub fn power(args: &PowerArgs) -> Result<(), CliError> {
    let params = args.point.model.params()?;
    let family = args.point.family.spec()?;
    let procedure = args.procedure.procedure(&params, family.fisher_info())?;
    let report = power_pfdr_threshold(&procedure, &params, &family)?;
    let upper_bound = args
        .alpha2
        .map(|a2| {
            power_upper_bound(&params, &family, a2).map(|ln| UpperBound {
                alpha2: a2,
                value: ln.exp(),
                ln,
            })
        })
        .transpose()?;
    write_json(
        args.point.output.out.as_deref(),
        &PowerRecord {
            schema_version: SCHEMA_POWER,
            command: "power",
            identity_ratio: power_identity_check(&params, &family)?,
            family,
            params,
            procedure,
            effective_cutoff: report.effective_cutoff,
            power_inf: report.power_inf.into(),
            pfdr_inf: report.pfdr_inf,
            tails: report.tails.into(),
            upper_bound,
        },
    )
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Comma-separated effect sizes.
    #[arg(long)]
    pub deltas: Option<String>,
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleKind>,
    /// Exponent for `--schedule power-t`.
    #[arg(long = "t", allow_negative_numbers = true)]
    pub t: Option<f64>,
}

impl GridArgs {
    fn deltas(&self, default: &[f64]) -> Result<Vec<f64>, CliError> {
        let d = match &self.deltas {
            Some(s) => parse_list("--deltas", s)?,
            None => default.to_vec(),
        };
        if d.is_empty() {
            return Err(CliError::usage("--deltas: empty grid"));
        }
        Ok(d)
    }

    fn regime(&self, default: RegimeSpec) -> Result<RegimeSpec, CliError> {
        Ok(regime_from(self.schedule, self.t)?.unwrap_or(default))
    }
}

#[derive(Debug, Clone, Args)]
pub struct RatioArgs {
    #[command(flatten)]
    pub levels: LevelArgs,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub sigma: f64,
    /// Shift constant c.
    #[arg(long = "cutoff-c", visible_alias = "c", allow_negative_numbers = true, conflicts_with = "gain_m")]
    pub cutoff_c: Option<f64>,
    /// Target gain M; sets c from the Fisher information 1/sigma^2.
    #[arg(long = "gain-M", id = "gain_m", allow_negative_numbers = true)]
    pub gain_m: Option<f64>,
    /// Defaults: deltas 0.1,0.05,0.02,0.01 with k = delta^-1.5.
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Serialize)]
struct RatioRecord {
    schema_version: &'static str,
    command: &'static str,
    frac_false: f64,
    alpha: f64,
    family: NormalMean,
    c: f64,
    gain_m: Option<f64>,
    schedule: RegimeSpec,
    verdict: LimitVerdict,
}

pub fn ratio(args: &RatioArgs) -> Result<(), CliError> {
    let deltas = args.grid.deltas(&[0.1, 0.05, 0.02, 0.01])?;
    let schedule = args.grid.regime(RegimeSpec::PowerT { t: 1.5 })?;
    let family = NormalMean {
        theta0: 0.0,
        sigma: args.sigma,
    };
    let l = &args.levels;
    let base = ModelParams::with_real_k(l.a, l.alpha, l.p, deltas[0], 1.0)?;
    let c = match (args.cutoff_c, args.gain_m) {
        (Some(c), _) => c,
        (None, Some(m)) => pfdr::power::shifted_cutoff_for_gain(&base, family.fisher_info(), m)?,
        (None, None) => return Err(CliError::usage("one of --cutoff-c or --gain-M is required")),
    };
    let limit = power_ratio_limit(&base, c, &family)?;
    let grid = deltas
        .iter()
        .map(|&d| schedule.point(d).map(|p| (d, p.k as f64)))
        .collect::<Result<Vec<_>, _>>()?;
    let verdict = limit.along(&grid)?;
    write_json(
        args.output.out.as_deref(),
        &RatioRecord {
            schema_version: SCHEMA_RATIO,
            command: "ratio",
            frac_false: l.a,
            alpha: l.alpha,
            family,
            c,
            gain_m: args.gain_m,
            schedule,
            verdict,
        },
    )
}

#[derive(Debug, Clone, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub levels: LevelArgs,
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Defaults: deltas 0.2,0.1,0.05,0.02 with the sqrt-log schedule.
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Serialize)]
struct ConvergeRecord {
    schema_version: &'static str,
    command: &'static str,
    table: ConvergenceTable,
    adjudication: Adjudication,
}

/// CSV header: `delta,k,p_exact_log,p_asym_log,log_ratio`, then a
/// `p_asym_log_<name>,log_ratio_<name>` pair for each further candidate.
pub fn converge_csv(table: &ConvergenceTable) -> Result<Vec<u8>, CliError> {
    let mut header: Vec<String> = ["delta", "k", "p_exact_log", "p_asym_log", "log_ratio"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for name in &table.candidates[1..] {
        header.push(format!("p_asym_log_{name}"));
        header.push(format!("log_ratio_{name}"));
    }
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![
                r.delta.to_string(),
                r.k.to_string(),
                r.p_exact_log.to_string(),
            ];
            for i in 0..table.candidates.len() {
                row.push(r.p_asym_log[i].to_string());
                row.push(r.log_ratio(i).to_string());
            }
            row
        })
        .collect();
    csv_bytes(Some(&header), &rows)
}

pub fn converge(args: &ConvergeArgs) -> Result<(), CliError> {
    let deltas = args.grid.deltas(&[0.2, 0.1, 0.05, 0.02])?;
    let schedule = args.grid.regime(RegimeSpec::SqrtLog)?;
    let family = args.family.spec()?;
    let l = &args.levels;
    let base = ModelParams::with_real_k(l.a, l.alpha, l.p, deltas[0], 1.0)?;
    // the exact side needs only valid params; the asymptotic side needs Q > 1
    base.require_q_above_one()?;
    exact_p(&base, &family)?;
    let table = convergence_table(&base, &family, schedule, &deltas)?;
    match args.format {
        Format::Csv => write_bytes(args.output.out.as_deref(), &converge_csv(&table)?),
        Format::Json => {
            let adjudication = adjudicate(&table);
            write_json(
                args.output.out.as_deref(),
                &ConvergeRecord {
                    schema_version: SCHEMA_CONVERGE,
                    command: "converge",
                    table,
                    adjudication,
                },
            )
        }
    }
}
