//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid: {0}")]
    Grid(String),
    #[error("medium: {0}")]
    Medium(String),
    #[error("simulation: {0}")]
    Simulation(String),
    #[error("adjoint source: {0}")]
    AdjointSource(String),
    #[error("survey: {0}")]
    Survey(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    File(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
