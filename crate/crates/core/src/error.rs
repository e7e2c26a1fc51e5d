use thiserror::Error;

use crate::schedule::Chunk;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid machine shape: {0}")]
    InvalidShape(String),
    #[error("rank {rank} out of range for {p} ranks")]
    RankOutOfRange { rank: usize, p: usize },
    #[error("local index {index} out of range for {n} processors per node")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("empty rank range [{start}, {end})")]
    EmptyRange { start: usize, end: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("round {round}: rank {src} does not hold {chunk}")]
    MissingData { round: usize, src: usize, chunk: Chunk },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
