use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use crate::allocation::AllocationOutcome;

/// Errors raised by the rate model, the solvers and the mechanism.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A scenario or topology invariant does not hold.
    Invalid(String),
    /// An index (SBS, MBS, user, CP, file) is out of range.
    OutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    /// Interference passed to a rate computation was negative.
    NegativeInterference(f64),
    /// The user is not served by the given SBS.
    NotAssociated { user: usize, sbs: usize },
    /// The SBS is not attached to the given MBS.
    NotAttached { mbs: usize, sbs: usize },
    /// The file does not belong to the CP's catalog.
    FileNotInCatalog { cp: usize, file: usize },
    /// A storage allocation exceeds the network capacity.
    InfeasibleAllocation { total_bits: f64, capacity_bits: f64 },
    /// Vector arguments disagree on the number of CPs.
    DimensionMismatch { expected: usize, found: usize },
    /// Exhaustive enumeration would exceed the size guard.
    InstanceTooLarge { combinations: f64, limit: f64 },
    /// The matching did not settle within the round budget. Carries the last iterate.
    NotConverged(Box<AllocationOutcome>),
    /// The compared CPs are not symmetric, so price monotonicity is not claimed.
    NotSymmetric(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Invalid(msg) => write!(f, "invalid input: {msg}"),
            Error::OutOfRange { what, index, len } => {
                write!(f, "{what} index {index} out of range (len {len})")
            }
            Error::NegativeInterference(v) => write!(f, "negative interference {v} W"),
            Error::NotAssociated { user, sbs } => {
                write!(f, "user {user} is not served by SBS {sbs}")
            }
            Error::NotAttached { mbs, sbs } => write!(f, "SBS {sbs} is not attached to MBS {mbs}"),
            Error::FileNotInCatalog { cp, file } => {
                write!(f, "file {file} is not in the catalog of CP {cp}")
            }
            Error::InfeasibleAllocation {
                total_bits,
                capacity_bits,
            } => write!(
                f,
                "allocation of {total_bits} bits exceeds storage capacity {capacity_bits} bits"
            ),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "expected {expected} entries, found {found}")
            }
            Error::InstanceTooLarge {
                combinations,
                limit,
            } => write!(
                f,
                "exhaustive search over {combinations:.0} allocations exceeds limit {limit:.0}"
            ),
            Error::NotConverged(last) => write!(
                f,
                "matching did not converge within {} rounds (last welfare {})",
                last.rounds, last.welfare
            ),
            Error::NotSymmetric(msg) => write!(f, "scenario is not symmetric: {msg}"),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

impl core::error::Error for Error {}
