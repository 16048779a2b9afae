use thiserror::Error;

use crate::solution::Solution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate channel: row has zero norm")]
    DegenerateChannel,

    #[error("undersampled: {needed} samples required, {given} given")]
    Undersampled { needed: usize, given: usize },

    #[error("model not reducible to LCQP: {0}")]
    NotReducible(&'static str),

    #[error("pole: rational model denominator vanishes at p_in = {0}")]
    Pole(f64),

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("tone {0} has zero effective gain; drop it before building the problem")]
    ZeroGain(usize),

    #[error("no feasible KKT point found")]
    NoKktPoint,

    #[error("oracle inconsistency: vertex objective {vertex} exceeds best KKT objective {kkt}")]
    OracleInconsistent { vertex: f64, kkt: f64 },

    #[error("node limit {limit} exceeded (gap {gap:e})")]
    NodeLimit {
        limit: usize,
        gap: f64,
        incumbent: Option<Box<Solution>>,
    },

    #[error("LP solver: {0}")]
    Lp(String),

    #[error("config: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
