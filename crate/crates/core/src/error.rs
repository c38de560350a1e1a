use thiserror::Error;

/// Errors raised by the finite element kernel, the reduced models and the
/// archive layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("incompressible material: Poisson ratio {0} must be below 0.5")]
    IncompressibleMaterial(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("factorization failure: {0}")]
    FactorizationFailure(String),

    #[error("truth solve failed at mu = {mu:?}: {source}")]
    TruthSolve {
        mu: [f64; 4],
        #[source]
        source: Box<Error>,
    },

    #[error("packing failure: placed {achieved} of {requested} inclusions")]
    PackingFailure { achieved: usize, requested: usize },

    #[error("rank deficiency: requested {requested} modes but usable rank is {rank}")]
    RankDeficiency { requested: usize, rank: usize },

    #[error("reduced system is singular (condition estimate {condition:.3e})")]
    ReducedSingularity { condition: f64 },

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("relative bound undefined: enriched solution has zero energy")]
    UndefinedRelative,

    #[error("effectivity undefined: true error is numerically zero")]
    EffectivityUndefined,

    #[error("archive format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::InvalidMesh(_)
                | Error::InvalidMaterial(_)
                | Error::IncompressibleMaterial(_)
                | Error::InvalidParameter(_)
                | Error::RankDeficiency { .. }
                | Error::Format(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
