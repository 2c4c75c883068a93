//! Equilibrium pricing in a two-tier closed-loop data supply chain.
//!
//! A data provider sells data access to an application provider, which sells
//! an application to a unit mass of end-users; every adopting user also
//! yields feedback data worth `d` to the data provider. The crate solves five
//! pricing mechanisms in closed form ([`mechanisms`]), re-derives each
//! equilibrium with numerical game solvers ([`oracle`]), and compares the
//! mechanisms ([`analysis`]).

pub mod analysis;
pub mod cli;
pub mod error;
pub mod format;
pub mod mechanisms;
pub mod model;
pub mod oracle;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
pub use mechanisms::{solve, MechanismOutcome};
pub use model::{FeasibilityReport, MarketParams, Mechanism};
pub use oracle::OracleResult;
