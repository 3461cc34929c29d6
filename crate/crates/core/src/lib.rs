//! Uniform random-order enumeration for self-reducible problems.
//!
//! Three enumerators, by the strength of the available counter:
//!
//! * [`exact::AraSession`] with an exact counter,
//! * [`fptas::AiaSession`] with a deterministic approximate counter,
//! * [`fpras::AxaSession`] with a randomized approximate counter,
//!
//! plus a master/slave parallel pipeline ([`parallel`]) and a
//! sampling-without-replacement baseline ([`swor`]).

pub mod access;
pub mod banned;
pub mod bits;
pub mod error;
pub mod exact;
pub mod fpras;
pub mod fptas;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod parallel;
pub mod problems;
pub mod rational;
pub mod record;
pub mod report;
pub mod sampling;
pub mod stats;
pub mod swor;

pub use bits::BitString;
pub use error::{Error, Result};
pub use rational::{ExactRational, Interval};
