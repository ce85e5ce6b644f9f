use core::fmt;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A scalar parameter is outside its admissible range.
    OutOfRange {
        field: &'static str,
        value: f64,
        bound: &'static str,
    },
    /// An integer parameter is outside its admissible range.
    CountOutOfRange {
        field: &'static str,
        value: u64,
        bound: &'static str,
    },
    /// The displacement grid violates one of its structural requirements.
    InvalidGrid(&'static str),
    /// A scheduled environment change is out of order or past the end of the run.
    InvalidSchedule { position: usize, index: usize },
    /// Weighted exploration was asked to pick from no actions.
    EmptyActions,
    /// The witness was queried before any outcome was pushed.
    EmptyWindow,
    /// The controller was stepped past the end of the scenario.
    ScenarioExhausted { index: usize, total: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::OutOfRange {
                field,
                value,
                bound,
            } => write!(f, "{field} = {value} is out of range (expected {bound})"),
            Error::CountOutOfRange {
                field,
                value,
                bound,
            } => write!(f, "{field} = {value} is out of range (expected {bound})"),
            Error::InvalidGrid(why) => write!(f, "invalid displacement grid: {why}"),
            Error::InvalidSchedule { position, index } => write!(
                f,
                "schedule entry {position} at experiment {index} is not strictly increasing or lies past the last experiment"
            ),
            Error::EmptyActions => f.write_str("cannot sample from an empty action set"),
            Error::EmptyWindow => f.write_str("witness window holds no outcomes"),
            Error::ScenarioExhausted { index, total } => {
                write!(f, "experiment {index} is past the end of a {total}-experiment scenario")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
