use dunkl_core::DunklError;

/// Failures grouped by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Exit code 1: bad configuration, arguments or files.
    Config(String),
    /// Exit code 2: parameters outside the supported regime.
    Regime(String),
    /// Exit code 3: a numerical method failed or a check did not hold.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Regime(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Regime(m) => f.write_str(m),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<DunklError> for CliError {
    fn from(e: DunklError) -> Self {
        use DunklError::*;
        let msg = e.to_string();
        match e {
            Regime(_) | UnsupportedMultiplicity => CliError::Regime(msg),
            Dimension(_) | Size { .. } | InvalidArgument(_) | Wall { .. } | Io(_) | Serde(_) => {
                CliError::Config(msg)
            }
            Step { .. }
            | Extrapolation { .. }
            | Mismatch(_)
            | Stiffness { .. }
            | InsufficientRange(_)
            | Convergence { .. }
            | Quadrature(_) => CliError::Numeric(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}
