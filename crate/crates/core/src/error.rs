use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// The six parameter blocks of one Gibbs sweep, in sweep order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    Augmentation,
    AbilityAllocation,
    Discrimination,
    Guessing,
    Components,
    Weights,
}

impl Block {
    pub const SWEEP_ORDER: [Block; 6] = [
        Block::Augmentation,
        Block::AbilityAllocation,
        Block::Discrimination,
        Block::Guessing,
        Block::Components,
        Block::Weights,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Block::Augmentation => "(X, Z)",
            Block::AbilityAllocation => "(theta, W)",
            Block::Discrimination => "(a, b)",
            Block::Guessing => "c",
            Block::Components => "(mu, sigma2)",
            Block::Weights => "p",
        }
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{location}: {message}")]
    Parse { location: String, message: String },

    #[error("block {block} failed at iteration {iteration}: {source}")]
    Block {
        block: Block,
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("postprocessing failed: {0}")]
    Postprocess(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn in_block(self, block: Block, iteration: usize) -> Error {
        Error::Block {
            block,
            iteration,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Error {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
