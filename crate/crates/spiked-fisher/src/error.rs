use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Evaluation point coincides with a spectral atom.
    #[error("evaluation point {point} hits a spectral atom")]
    Pole { point: f64 },

    /// Input lies outside the region where the requested quantity is defined,
    /// e.g. a spike below the phase threshold or a point inside the bulk.
    #[error("domain error: {0}")]
    Domain(String),

    /// Fixed-point iteration failed to reach the residual tolerance.
    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: u32 },

    /// A denominator degenerated within floating-point resolution.
    #[error("singular expression: {0}")]
    Singular(String),

    /// Spectrum too clustered for local estimation (exclusion set took everything).
    #[error("degenerate spectrum: exclusion set covers all eigenvalues")]
    DegenerateSpectrum,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Bad model description or CLI configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Simulated matrix numerically rank-deficient where invertibility is required.
    #[error("numerical rank failure: {0}")]
    NumericalRank(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code contract: 1 usage, 2 domain, 3 io.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 1,
            Error::Io(_) => 3,
            _ => 2,
        }
    }
}
