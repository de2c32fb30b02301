use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("precision bounds violated: {0}")]
    PrecisionBounds(String),

    #[error("field too large for table-based arithmetic: q = {0}")]
    FieldTooLarge(u64),

    #[error("polynomial of degree {degree} over F_{p} is not irreducible")]
    NotIrreducible { p: u64, degree: usize },

    #[error("exponent column {col} sums to {sum}, expected degree {d}")]
    NotHomogeneous { col: usize, sum: i64, d: i64 },

    #[error("degree {d} does not divide n+1 = {n_plus_1}")]
    DegreeNotDividing { d: i64, n_plus_1: i64 },

    #[error("no subset of {subset_size} exponent vectors sums to (1,...,1)")]
    NoOnesSubset { subset_size: usize },

    #[error("vector {0:?} is not in the interior cone M_-")]
    NotInteriorPoint(Vec<i64>),

    #[error("enumeration depth {given} is below the minimum {min}")]
    DepthTooSmall { given: i64, min: i64 },

    #[error("fiber coordinate {index} is zero; fibers must lie in the open torus")]
    ZeroFiberCoordinate { index: usize },

    #[error("fiber has {given} coordinates, family has {expected} monomials")]
    FiberLength { given: usize, expected: usize },

    #[error("precision underflow: needed {needed} pi-digits, have {have}")]
    PrecisionUnderflow { needed: i64, have: i64 },

    #[error("root refinement did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("no distinguished root: fiber is outside the Hasse domain")]
    OutOfDomain,

    #[error("eigenvalue estimates fail to contract: {0}")]
    EigenDiverged(String),

    #[error("rationality check failed: {0}")]
    RationalityFailure(String),

    #[error("work budget exceeded: {needed} point evaluations > budget {budget}")]
    WorkBudget { needed: u64, budget: u64 },

    #[error("fiber is singular; exact zeta extraction is out of scope")]
    SingularFiber,

    #[error("fiber is supersingular (trace divisible by p); no unit root")]
    Supersingular,

    #[error("candidate certified modulus p^{have} is below the p^{needed} the check demands")]
    CandidateTooCoarse { needed: u32, have: u32 },

    #[error("family file {path}: {message}")]
    FamilyFile { path: String, message: String },

    #[error("nothing certifiable at the given truncation: {0}")]
    NothingCertifiable(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
