use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site {site} out of range for a lattice of {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("region is empty")]
    EmptyRegion,

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("model `{model}` needs a {expected}-dimensional lattice, got {got}")]
    ModelDimension {
        model: String,
        expected: usize,
        got: usize,
    },

    #[error("a term acts on site {0}, which is outside the requested support")]
    TermOutsideSupport(usize),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("dimension {dim} exceeds the dense cap of {cap}")]
    CapExceeded { dim: usize, cap: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("LAPACK routine {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },

    #[error("ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// True for errors that come from a resource cap rather than bad input.
    pub fn is_resource_cap(&self) -> bool {
        matches!(self, Error::CapExceeded { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
