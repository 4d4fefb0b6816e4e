use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("outcome {value} at round {round} lies outside [-1, 1]")]
    Range { round: usize, value: f64 },

    #[error("axis counts differ: {perp} perpendicular vs {par} parallel outcomes")]
    Pairing { perp: usize, par: usize },

    #[error("outcome {value} at round {round} is not on the N={n_spins} lattice")]
    Lattice {
        round: usize,
        value: f64,
        n_spins: u32,
    },

    #[error("division by zero: {0}")]
    Division(&'static str),

    #[error("measurement batch is empty")]
    EmptyBatch,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("{0} outcomes cannot be split into blocks of four")]
    Blocking(u64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no tangent point gives a negative gamma_c; data do not indicate squeezing")]
    Infeasible,

    #[error("spin number {n} outside supported range 1..={max}")]
    Size { n: u32, max: u32 },

    #[error("state violates the null hypothesis: exact gamma_c = {0}")]
    NullViolation(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("missing field `{field}` for entry `{entry}`")]
    MissingField { entry: String, field: &'static str },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
