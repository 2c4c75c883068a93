use thiserror::Error;

use crate::model::Mechanism;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid market parameters: {0}")]
    InvalidParams(String),

    /// The mechanism's interior equilibrium does not exist for these parameters.
    #[error(
        "{mechanism} is infeasible: requires v > {condition} = {}, got v = {}",
        crate::format::compact(*.threshold),
        crate::format::compact(*.v)
    )]
    Infeasible {
        mechanism: Mechanism,
        condition: &'static str,
        threshold: f64,
        v: f64,
    },

    #[error("price {price} is negative")]
    NegativePrice { price: f64 },

    /// Price at or above the reservation value of the highest type; nobody adopts.
    #[error("price {price} shuts the market down (must be below {cap})")]
    MarketShutdown { price: f64, cap: f64 },

    #[error("domain error: {0}")]
    Domain(String),
}
