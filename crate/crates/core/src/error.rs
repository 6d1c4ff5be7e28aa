use thiserror::Error;

/// Which of the three boundary determinants broke its sign condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delta {
    Delta1,
    Delta2,
    Delta3,
}

impl std::fmt::Display for Delta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Delta::Delta1 => f.write_str("delta1"),
            Delta::Delta2 => f.write_str("delta2"),
            Delta::Delta3 => f.write_str("delta3"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("InvalidDensity: {0}")]
    InvalidDensity(String),
    #[error("DegenerateDensity: alpha = 1 requires degenerate validation mode")]
    DegenerateDensity,
    #[error("NegativeAbscissa: x = {0}")]
    NegativeAbscissa(f64),
    #[error("SignConditionViolated: {which} = {value}")]
    SignConditionViolated { which: Delta, value: f64 },
    #[error("AllZeroCoefficients: boundary coefficients all vanish")]
    AllZeroCoefficients,
    #[error("InvalidPotential: {0}")]
    InvalidPotential(String),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("InvalidScatteringData: {0}")]
    InvalidScatteringData(String),
    #[error("TruncationTooSmall: x_max = {x_max} must exceed {bound}")]
    TruncationTooSmall { x_max: f64, bound: f64 },
    #[error("StepRejected: local error above tolerance near x = {x} (lambda = {lambda})")]
    StepRejected { x: f64, lambda: String },
    #[error("CharacteristicVanishes: |E| = {modulus} at lambda = {lambda}")]
    CharacteristicVanishes { lambda: f64, modulus: f64 },
    #[error("SearchCeilingHit: sign change at mu_max = {mu_max}")]
    SearchCeilingHit { mu_max: f64 },
    #[error("ContourThroughZero: |E| = {modulus} at lambda = {lambda}")]
    ContourThroughZero { lambda: String, modulus: f64 },
    #[error("WindingNotInteger: accumulated phase / 2pi = {0}")]
    WindingNotInteger(f64),
    #[error("NonpositiveNorm: m^-2 = {value} for lambda_k = {lambda_k}")]
    NonpositiveNorm { lambda_k: f64, value: f64 },
    #[error("BoundaryPolynomialVanishes: at lambda_k = {0}")]
    BoundaryPolynomialVanishes(f64),
    #[error("NotSimple: dE/dmu = {derivative} at lambda_k = {lambda_k}")]
    NotSimple { lambda_k: f64, derivative: f64 },
    #[error("UnsupportedAsymptotics: {0}")]
    UnsupportedAsymptotics(String),
    #[error("NonHermitianData: imaginary residue {0}")]
    NonHermitianData(f64),
    #[error("OutOfRange: t = {t} outside [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("IllConditioned: condition estimate {cond} at x = {x}")]
    IllConditioned { x: f64, cond: f64 },
    #[error("SingularSystem: at x = {0}")]
    SingularSystem(f64),
    #[error("FamilyIncomplete: failed x nodes {0:?}")]
    FamilyIncomplete(Vec<f64>),
    #[error("InsufficientNodes: need at least {needed}, have {have}")]
    InsufficientNodes { needed: usize, have: usize },
    #[error("NoInteriorNodes: a spans fewer than three grid steps")]
    NoInteriorNodes,
}

impl Error {
    /// True for errors caused by the inputs rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidDensity(_)
                | Error::DegenerateDensity
                | Error::NegativeAbscissa(_)
                | Error::SignConditionViolated { .. }
                | Error::AllZeroCoefficients
                | Error::InvalidPotential(_)
                | Error::InvalidConfig(_)
                | Error::InvalidScatteringData(_)
                | Error::TruncationTooSmall { .. }
                | Error::NonHermitianData(_)
                | Error::UnsupportedAsymptotics(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
