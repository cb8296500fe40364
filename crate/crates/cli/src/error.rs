use std::fmt;

use pfdr::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_IO: i32 = 1;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn io(context: &str, err: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_IO,
            message: format!("{context}: {err}"),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Command-line flag that sets a core parameter.
fn flag_for(name: &str) -> &str {
    match name {
        "frac_false" => "--a",
        "alpha" => "--alpha",
        "detect_prob" => "--p",
        "delta" => "--delta",
        "k" => "--k",
        "sigma" => "--sigma",
        "nu" => "--nu",
        "fisher_info" | "fisher_info_matrix" => "--fisher",
        "delta_vec" => "--delta-vec",
        "gain_M" => "--gain-M",
        "alpha2" => "--alpha2",
        "effective cutoff" => "--cutoff-c",
        "n_nulls" => "--n-nulls",
        "n_reps" => "--n-reps",
        "t" => "--t",
        other => other,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain {
                name,
                value,
                requirement,
            } => CliError::usage(format!("{}: got {value}, {requirement}", flag_for(name))),
            Error::OddsThresholdTooSmall { q_alpha } => CliError::usage(format!(
                "--a/--alpha: asymptotic formulas need Q_alpha = (1/a - 1)(1/alpha - 1) > 1, got {q_alpha}"
            )),
            Error::NotPositiveDefinite(m) => CliError::usage(format!("--fisher: {m}")),
            Error::NoExactTails(fam) => {
                CliError::usage(format!("--family: `{fam}` has no exact tails; use `asym`"))
            }
            e @ Error::BudgetExceeded { .. } => CliError {
                code: EXIT_BUDGET,
                message: format!("{e} (raise with PFDR_BUDGET or --budget)"),
            },
            other => CliError::usage(other.to_string()),
        }
    }
}
