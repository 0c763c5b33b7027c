use num_complex::Complex64;

pub type Result<T> = std::result::Result<T, Error>;

/// Vertex condition that an operator-domain check can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainCondition {
    ContinuityU,
    ContinuityV,
    Robin,
}

impl std::fmt::Display for DomainCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DomainCondition::ContinuityU => write!(f, "continuity of the position profile"),
            DomainCondition::ContinuityV => write!(f, "continuity of the velocity profile"),
            DomainCondition::Robin => write!(f, "damped flux condition"),
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("support must satisfy 0 <= start < stop, got [{start}, {stop})")]
    BadSupport { start: f64, stop: f64 },

    #[error("term x^{power} exp({rate} x) does not decay on [{start}, inf)")]
    NonDecayingTail {
        power: u32,
        rate: Complex64,
        start: f64,
    },

    #[error("divergent integral of x^{power} exp({rate} x) over [{start}, inf)")]
    DivergentIntegral {
        power: u32,
        rate: Complex64,
        start: f64,
    },

    #[error("edge count mismatch: expected {expected}, got {got}")]
    EdgeCount { expected: usize, got: usize },

    #[error("{condition} fails at the vertex: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    Domain {
        condition: DomainCondition,
        defect: f64,
        tol: f64,
    },

    #[error("coupling alpha = {alpha} sits at the critical value N = {n_edges}")]
    CriticalCoupling { alpha: Complex64, n_edges: usize },

    #[error("coupling alpha = {alpha} is not the critical value N = {n_edges}")]
    NotCritical { alpha: Complex64, n_edges: usize },

    #[error("spectral parameter z = {z} must satisfy Re z > 0")]
    RightHalfPlane { z: Complex64 },

    #[error("pairing (alpha, z) = ({alpha}, {z}) is outside the coercive sector")]
    CoercivityViolation { alpha: Complex64, z: Complex64 },

    #[error("vertex solvability breaks: |{denominator}| is numerically zero")]
    SingularVertexSystem { denominator: Complex64 },

    #[error("time {t} outside the solution horizon [0, {horizon})")]
    Horizon { t: f64, horizon: f64 },

    #[error("requested window {tau} exceeds the flux-quiet time {t0}")]
    QuietWindow { tau: f64, t0: f64 },

    #[error("branch profile must match the data: {detail}")]
    BranchMismatch { detail: String },

    #[error("mesh too coarse: {detail}")]
    MeshTooCoarse { detail: String },

    #[error("empty dictionary: no admissible seed produced a finite ratio")]
    EmptyDictionary,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
