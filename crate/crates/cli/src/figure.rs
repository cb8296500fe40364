//! Figure data. Panel A: `log10(V_t / V_2)` from the normal-family volume
//! leading term with real `k = δ^{-t}`. Panel B: `log10` of the limiting power
//! of `d*`, either `(1-α)/α · p` or `(1-α) p / a` with `p` the normal-family
//! leading term.

use clap::{Args, ValueEnum};
use pfdr::asymptotics::{asym_p_normal, asym_v_normal};
use pfdr::model::RegimeSpec;
use pfdr::{ModelParams, NormalMean};
use serde::{Deserialize, Serialize};

use crate::args::parse_list;
use crate::error::CliError;
use crate::output::{csv_bytes, write_bytes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Panel {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PowerVariant {
    /// `(1-α)/α · p`.
    OverAlpha,
    /// `(1-α) p / a`.
    OverA,
}

#[derive(Debug, Clone, Args)]
pub struct FigureArgs {
    #[arg(long, value_enum)]
    pub panel: Panel,
    #[arg(long = "a", default_value_t = 0.05, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, default_value_t = 0.4, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long = "p", default_value_t = 0.9, allow_negative_numbers = true)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub sigma: f64,
    #[arg(long, default_value = "0.1,0.2,0.4")]
    pub deltas: String,
    #[arg(long = "t-min", default_value_t = 1.0, allow_negative_numbers = true)]
    pub t_min: f64,
    #[arg(long = "t-max", default_value_t = 2.0, allow_negative_numbers = true)]
    pub t_max: f64,
    #[arg(long = "t-steps", default_value_t = 101)]
    pub t_steps: usize,
    /// Panel B power form.
    #[arg(long, value_enum, default_value_t = PowerVariant::OverAlpha)]
    pub variant: PowerVariant,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub t: f64,
    pub delta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureSpec {
    pub panel: Panel,
    pub variant: PowerVariant,
    pub frac_false: f64,
    pub alpha: f64,
    pub detect_prob: f64,
    pub sigma: f64,
    pub deltas: Vec<f64>,
    pub t_min: f64,
    pub t_max: f64,
    pub t_steps: usize,
}

impl FigureSpec {
    /// Figure 1 settings: `a = 0.05`, `α = 0.4`, `p = 0.9`, `δ ∈ {0.1, 0.2, 0.4}`,
    /// 101 values of `t` in `[1, 2]`.
    pub fn figure1(panel: Panel) -> Self {
        FigureSpec {
            panel,
            variant: PowerVariant::OverAlpha,
            frac_false: 0.05,
            alpha: 0.4,
            detect_prob: 0.9,
            sigma: 1.0,
            deltas: vec![0.1, 0.2, 0.4],
            t_min: 1.0,
            t_max: 2.0,
            t_steps: 101,
        }
    }

    pub fn t_grid(&self) -> Result<Vec<f64>, CliError> {
        if self.t_steps == 0 {
            return Err(CliError::usage("--t-steps: empty grid"));
        }
        if !(self.t_min > 0.0 && self.t_min <= self.t_max && self.t_max <= 2.0) {
            return Err(CliError::usage(format!(
                "--t-min/--t-max: need 0 < t_min <= t_max <= 2, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if self.t_steps == 1 {
            return Ok(vec![self.t_min]);
        }
        let n = self.t_steps - 1;
        Ok((0..=n)
            .map(|i| {
                if i == n {
                    self.t_max
                } else {
                    self.t_min + (self.t_max - self.t_min) * i as f64 / n as f64
                }
            })
            .collect())
    }

    pub fn rows(&self) -> Result<Vec<FigureRow>, CliError> {
        if self.deltas.is_empty() {
            return Err(CliError::usage("--deltas: empty grid"));
        }
        let ts = self.t_grid()?;
        let family = NormalMean {
            theta0: 0.0,
            sigma: self.sigma,
        };
        let at = |delta: f64, t: f64| -> Result<ModelParams, CliError> {
            let k = RegimeSpec::PowerT { t }.k_real(delta)?;
            Ok(ModelParams::with_real_k(
                self.frac_false,
                self.alpha,
                self.detect_prob,
                delta,
                k,
            )?)
        };
        let mut rows = Vec::with_capacity(self.deltas.len() * ts.len());
        for &delta in &self.deltas {
            let reference = match self.panel {
                Panel::A => asym_v_normal(&at(delta, 2.0)?, &family)?.v_star.ln_value,
                Panel::B => 0.0,
            };
            for &t in &ts {
                let p = at(delta, t)?;
                let ln_value = match (self.panel, self.variant) {
                    (Panel::A, _) => asym_v_normal(&p, &family)?.v_star.ln_value - reference,
                    (Panel::B, PowerVariant::OverAlpha) => {
                        (-p.alpha).ln_1p() - p.alpha.ln() + asym_p_normal(&p, &family)?.ln()
                    }
                    (Panel::B, PowerVariant::OverA) => {
                        (-p.alpha).ln_1p() - p.frac_false.ln() + asym_p_normal(&p, &family)?.ln()
                    }
                };
                rows.push(FigureRow {
                    t,
                    delta,
                    value: ln_value / std::f64::consts::LN_10,
                });
            }
        }
        Ok(rows)
    }
}

pub fn figure(args: &FigureArgs) -> Result<(), CliError> {
    let spec = FigureSpec {
        panel: args.panel,
        variant: args.variant,
        frac_false: args.a,
        alpha: args.alpha,
        detect_prob: args.p,
        sigma: args.sigma,
        deltas: parse_list("--deltas", &args.deltas)?,
        t_min: args.t_min,
        t_max: args.t_max,
        t_steps: args.t_steps,
    };
    let rows = spec.rows()?;
    write_bytes(args.out.as_deref(), &csv_bytes::<FigureRow>(None, &rows)?)
}
