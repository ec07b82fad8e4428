use thiserror::Error;

/// Errors raised by tensor, mixing, model and training operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty input to {0}")]
    Empty(&'static str),
    #[error("block {block}: {source}")]
    Block { block: usize, source: Box<Error> },
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
}

impl Error {
    pub(crate) fn dim(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Dimension {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub(crate) fn in_block(self, block: usize) -> Self {
        Error::Block {
            block,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
