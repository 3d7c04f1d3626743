use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A referenced id does not exist or a structural invariant is broken.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("unknown item: {0}")]
    UnknownItem(String),

    #[error("unknown user: {0}")]
    UnknownUser(String),

    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// A credibility distribution was requested over an empty tuple pool.
    #[error("empty attribute pool")]
    EmptyPool,

    #[error("cannot render {0}: no name for this id")]
    Render(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite loss in batch {batch} (parameter norms: {norms})")]
    NonFinite { batch: usize, norms: String },
}
