//! Exponential-family prediction markets.
//!
//! The log-partition function of an exponential family doubles as the cost
//! function of an automated market maker: outstanding shares are natural
//! parameters, prices are mean parameters, and the generalized log score
//! `log p(x; mu)` is proper for the statistic expectation `mu`.
//!
//! * [`families`]: the registered families and their conjugate maps.
//! * [`scoring`]: generalized log scoring rules.
//! * [`market`]: the cost-function market maker and its trade log.
//! * [`traders`]: risk-neutral, Bayesian, exponential-utility and
//!   budget-limited trader models.
//! * [`equilibrium`]: equilibrium of several exponential-utility traders.
//! * [`harness`]: seeded multi-round simulations, replay and reports.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod error;
pub mod families;
pub mod harness;
pub mod market;
mod numeric;
pub mod scoring;
pub mod traders;

#[cfg(test)]
mod oracle;

pub use error::{Error, Result};
pub use families::{Family, MeanParams, NaturalParams, Outcome};
pub use market::{Market, MarketState, TradeRecord};
pub use scoring::Score;
pub use traders::{Budget, ConjugatePrior, TraderProfile};
