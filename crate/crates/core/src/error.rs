use thiserror::Error;

/// Errors raised by precondition checks across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("log_gamma requires x > 0, got {0}")]
    GammaDomain(f64),

    #[error("q must satisfy 1 <= q <= inf, got {0}")]
    InvalidQ(f64),

    #[error("dimension must be at least {min}, got {n}")]
    Dimension { n: usize, min: usize },

    #[error("exponent vector has length {len} but dimension is {n}")]
    ExponentLength { len: usize, n: usize },

    #[error("exponent a_{index} = {value} is odd; the integral vanishes by symmetry and has no logarithm")]
    OddExponent { index: usize, value: u32 },

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: String,
        range: &'static str,
    },

    #[error("norm ordering violated: ||X||_2 = {norm2:e} exceeds ||X||_4 = {norm4:e}")]
    NormOrdering { norm2: f64, norm4: f64 },

    #[error("enumerating T_{n} costs (n!)^3 = {cost} membership tests; n <= {max} is supported")]
    EnumerationTooLarge { n: usize, cost: u128, max: usize },

    #[error("invalid sampling configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn out_of_range<T: ToString>(
    name: &'static str,
    value: T,
    range: &'static str,
) -> Error {
    Error::OutOfRange {
        name,
        value: value.to_string(),
        range,
    }
}
