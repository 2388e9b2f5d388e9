use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid range [{start}, {end}]: {reason}")]
    InvalidRange {
        start: u64,
        end: u64,
        reason: &'static str,
    },

    #[error("range of {len} entries exceeds the table budget of {budget}")]
    RangeTooLarge { len: u64, budget: u64 },

    #[error("compute budget exceeded: {needed} operations requested, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("character index {index} out of range for modulus {modulus} (expected < {count})")]
    InvalidCharacter {
        modulus: u64,
        index: usize,
        count: usize,
    },

    #[error("moduli {0} and {1} are not coprime")]
    NotCoprime(u64, u64),

    #[error("polynomial is not integral at scale {0}")]
    NotIntegral(String),

    #[error("repeated prime {0}")]
    RepeatedPrime(u64),

    #[error("polynomial family is degenerate: P{0} - P{1} is constant")]
    DegenerateFamily(usize, usize),

    #[error("table covers [{start}, {end}] but [{lo}, {hi}] was requested")]
    OutsideTable { start: u64, end: u64, lo: i64, hi: i64 },

    #[error("Gowers sum has negative real part {0:e}")]
    NegativeGowersSum(f64),

    #[error("value at n = {0} is not an l-th root of unity")]
    NotRootOfUnity(u64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("coefficient g_{level} is not in G_{level}")]
    FiltrationViolation { level: usize },

    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("corrupt table cache: {0}")]
    CorruptCache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
