use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("total expenditure is zero")]
    ZeroExpenditure,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite result for food `{0}`")]
    NonFiniteResult(String),

    #[error("food price index change is zero")]
    ZeroFpiChange,

    #[error("positive own-PE {value} at index {index}")]
    PositiveOwnPe { index: usize, value: f64 },

    #[error("child share of 1 in group `{0}` with more than one child")]
    DegenerateShare(String),

    #[error("invalid shares for group `{group}`: {reason}")]
    InvalidShares { group: String, reason: String },

    #[error("no mapping for parent `{0}`")]
    MappingGap(String),

    #[error("price of `{food}` would become nonpositive (delta {delta})")]
    PriceWouldBeNonpositive { food: String, delta: f64 },

    #[error("unknown nutrient `{0}`")]
    UnknownNutrient(String),

    #[error("selector {0:?} matches no food")]
    EmptySelector(Vec<String>),

    #[error("no expenditure elasticity for group `{0}`")]
    MissingGroupElasticity(String),

    #[error("baseline total {0} is not positive")]
    ZeroBaselineTotal(&'static str),

    #[error("negative rate: {0}")]
    NegativeRate(String),

    #[error("prevalence left [0, 1]: {0}")]
    NonConvergence(String),

    #[error("potential impact fraction is 1 or greater ({0})")]
    PifAtUnity(f64),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{failed} of {total} Monte Carlo iterations failed (first: {first})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
