use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynError {
    #[error("bounds violation at m={m}: {what}")]
    BoundsViolation { m: u64, what: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-monic polynomial at m={m} (lead {lead_re}+{lead_im}i)")]
    NonMonic { m: u64, lead_re: f64, lead_im: f64 },
    #[error("no ray from 0 avoids the leading coefficients up to index {horizon}")]
    BranchObstruction { horizon: u64 },
    #[error("index {index} beyond conjugation horizon {horizon}")]
    IndexBeyondHorizon { index: u64, horizon: u64 },
    #[error("branch continuation lost near z={re}+{im}i")]
    BranchLoss { re: f64, im: f64 },
    #[error("continuation stalled at potential {potential}")]
    ContinuationStall { potential: f64 },
    #[error("critical point search supports degree <= 5, got {degree}")]
    DegreeCap { degree: usize },
    #[error("rays did not land: {angles:?}")]
    UnlandedRay { angles: Vec<String> },
    #[error("co-landing cluster diameter {diameter} exceeds {limit}")]
    ClusterTooWide { diameter: f64, limit: f64, angles: Vec<String> },
    #[error("julia sampling failed: {diverged} of {total} rays diverged")]
    SamplingFailed { diverged: usize, total: usize },
    #[error("two preimages inside the shadowing disc at step {step}")]
    AmbiguousPreimage { step: u64 },
    #[error("no preimage inside the shadowing disc at step {step} (nearest {nearest}, radius {radius})")]
    NoPreimageInDisc { step: u64, nearest: f64, radius: f64 },
    #[error("path not continuable on segment {segment}: {cause}")]
    PathNotContinuable { segment: usize, cause: String },
    #[error("co-landing broken: {pairs:?}")]
    CoLandingBroken { pairs: Vec<(String, String, f64)> },
    #[error("trace time {trace} does not match raster time {raster}")]
    TimeMismatch { trace: u64, raster: u64 },
}

impl DynError {
    /// Stable machine-readable name.
    pub fn name(&self) -> &'static str {
        match self {
            DynError::BoundsViolation { .. } => "BoundsViolation",
            DynError::InvalidInput(_) => "InvalidInput",
            DynError::NonMonic { .. } => "NonMonic",
            DynError::BranchObstruction { .. } => "BranchObstruction",
            DynError::IndexBeyondHorizon { .. } => "IndexBeyondHorizon",
            DynError::BranchLoss { .. } => "BranchLoss",
            DynError::ContinuationStall { .. } => "ContinuationStall",
            DynError::DegreeCap { .. } => "DegreeCap",
            DynError::UnlandedRay { .. } => "UnlandedRay",
            DynError::ClusterTooWide { .. } => "ClusterTooWide",
            DynError::SamplingFailed { .. } => "SamplingFailed",
            DynError::AmbiguousPreimage { .. } => "AmbiguousPreimage",
            DynError::NoPreimageInDisc { .. } => "NoPreimageInDisc",
            DynError::PathNotContinuable { .. } => "PathNotContinuable",
            DynError::CoLandingBroken { .. } => "CoLandingBroken",
            DynError::TimeMismatch { .. } => "TimeMismatch",
        }
    }
}

pub type Result<T> = std::result::Result<T, DynError>;
