//! Laboratory for nonadaptive redundancy scheduling.
//!
//! Every job (ball) is replicated to `d` of `n` servers (urns). Three
//! nonadaptive policies pick those servers: uniform random subsets,
//! round-robin windows, and the blocks of a symmetric `(n, d, 1)` balanced
//! incomplete block design. The crate builds and verifies the underlying
//! block structures ([`designkit`]), evaluates closed-form overlap
//! indicators ([`indicators`]), estimates them by placement experiments
//! ([`occupancy`]), analyses the expansion of the incidence graphs
//! ([`spectral`]) and simulates the cancel-on-start redundancy queue
//! ([`qsim`]).
//!
//! Servers, blocks and jobs are 0-based everywhere except
//! [`designkit::round_robin_assignment`], which keeps the 1-based job index
//! of the scheduling rule it implements.

pub mod designkit;
pub mod error;
pub mod indicators;
pub mod occupancy;
pub mod qsim;
pub mod seeding;
pub mod spectral;

pub use error::{Error, Result};
pub use indicators::PolicyKind;
