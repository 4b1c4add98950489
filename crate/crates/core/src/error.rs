use thiserror::Error;

/// Every failure mode of the crate. Variants carry enough context to
/// locate the offending input without a debugger.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("descriptor inconsistency: {0}")]
    DescriptorInconsistency(String),
    #[error("not a group element: membership residual {residual:.3e} exceeds {tol:.1e}")]
    NotInGroup { residual: f64, tol: f64 },
    #[error("outside the injectivity radius: |log| = {norm:.6} > {radius:.6}")]
    OutOfRange { norm: f64, radius: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    Dimension {
        expected: usize,
        found: usize,
        context: String,
    },
    #[error("integration is stiff: step fell below {min_step:.1e}")]
    Stiffness { min_step: f64 },
    #[error("integration is unstable: membership residual {residual:.3e} at t = {t:.6}")]
    Instability { residual: f64, t: f64 },
    #[error("malformed curve: {0}")]
    MalformedCurve(String),
    #[error("invalid group action: {0}")]
    InvalidAction(String),
    #[error("vertical map is not an isomorphism: rank {rank} < {dim}")]
    IsomorphismViolation { rank: usize, dim: usize },
    #[error("points lie in different fibers: {0}")]
    NotSameFiber(String),
    #[error("invalid Lie group bundle connection: {0}")]
    InvalidConnection(String),
    #[error("invalid generalized principal connection: {0}")]
    InvalidPrincipalConnection(String),
    #[error("connection form degenerates on the vertical bundle (smallest singular value {0:.3e})")]
    DegenerateConnection(f64),
    #[error("inconsistent results: {0}")]
    Inconsistency(String),
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("equivalence violated: {0}")]
    EquivalenceViolation(String),
    #[error("consistency failure: {0}")]
    ConsistencyFailure(String),
    #[error("invariance violated: {0}")]
    InvarianceViolation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize, context: &str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected,
            found,
            context: context.to_string(),
        })
    }
}
