use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A demanded SKU is stocked on no rack, so no rack sequence can satisfy it.
    #[error("SKU {sku} is demanded but stocked on no rack")]
    UncoverableSku { sku: usize },

    #[error("station search hit its bound of {bound} rack visits without finishing")]
    StageBoundExceeded { bound: usize },

    #[error("instance exceeds oracle limits: {0}")]
    LimitsExceeded(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that mean "no feasible schedule exists" rather than malformed input.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::UncoverableSku { .. } | Error::StageBoundExceeded { .. })
    }
}
