use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("zero variance in the {0} coordinate")]
    ZeroVariance(Coordinate),

    #[error("degenerate parameters: {0}")]
    DegenerateParams(String),

    #[error("no parameter value reaches correlation {rho}: {reason}")]
    NoSolution { rho: f64, reason: String },

    #[error("statistic is undefined on the original sample")]
    DegenerateOriginal,

    #[error("statistic is undefined on the {variant} jackknife subsample for index {index}")]
    DegenerateSubsample { variant: &'static str, index: usize },

    #[error("all influence values are zero")]
    ZeroInfluence,

    #[error("all bootstrap replicates are equal")]
    ZeroSpread,

    #[error("redraw budget of {budget} draws exhausted")]
    RedrawBudgetExhausted { budget: usize },

    #[error("singular BCa denominator at level {level}")]
    SingularDenominator { level: f64 },

    #[error("weighted statistic undefined at an ABC perturbation point")]
    DegenerateWeights,

    #[error("{context}: {source}")]
    Combination {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    X,
    Y,
}

impl std::fmt::Display for Coordinate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coordinate::X => f.write_str("x (first column)"),
            Coordinate::Y => f.write_str("y (second column)"),
        }
    }
}

impl Error {
    pub(crate) fn in_combination(self, context: impl Into<String>) -> Self {
        Error::Combination {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
