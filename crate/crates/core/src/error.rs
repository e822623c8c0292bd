use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cutoff must be at least 1, got {0}")]
    InvalidCutoff(usize),

    #[error("photon numbers ({n1}, {n2}) exceed cutoff {cutoff}")]
    IndexOutOfRange { n1: usize, n2: usize, cutoff: usize },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("superposition needs at least one term")]
    EmptySuperposition,

    #[error("moment a1†^{p} a2†^{q} a1^{r} a2^{s} has degree {degree} > 4")]
    MomentDegree { p: u8, q: u8, r: u8, s: u8, degree: u8 },

    #[error("cutoff mismatch: {0} vs {1}")]
    CutoffMismatch(usize, usize),

    #[error("matrix is not unitary (max |u†u - I| = {0:e})")]
    NotUnitary(f64),

    #[error(
        "setting (theta={theta}, phi={phi}) is not realizable by the Q-Q-H gadget; \
         supported families: phi=0 (any theta), phi=pi/2 (any theta), (theta,phi)=(pi/4,pi/4)"
    )]
    UnsupportedGadget { theta: f64, phi: f64 },

    #[error("shots must be at least 1")]
    ZeroShots,

    #[error("photon-number distribution sums to {0}, outside 1 +/- 1e-8 (cutoff too small?)")]
    Unnormalized(f64),

    #[error("invalid theta set: {0}")]
    DegenerateThetas(String),

    #[error("invalid measurement plan: {0}")]
    InvalidPlan(String),

    #[error("rank-deficient design matrix for {stage}: {detail}")]
    RankDeficient { stage: &'static str, detail: String },

    #[error("singular {stage} design matrix (condition number {cond:e})")]
    Singular { stage: &'static str, cond: f64 },

    #[error("missing record for {0}")]
    MissingSetting(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
