use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Failure modes shared by every operation in the crate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A grid has zero extent or a size precondition does not hold.
    Dimension(String),
    /// Two inputs that must share a shape do not.
    Shape(String),
    /// A configuration value violates its documented invariant.
    Config(String),
    /// Input values outside the mathematical domain of the operation.
    Domain(String),
    /// An evaluation has nothing to average over.
    Evaluation(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(m) => write!(f, "dimension error: {m}"),
            Error::Shape(m) => write!(f, "shape error: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Evaluation(m) => write!(f, "evaluation error: {m}"),
        }
    }
}

impl core::error::Error for Error {}

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
