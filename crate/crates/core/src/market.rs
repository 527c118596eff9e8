//! Cost-function market maker whose cost is the family's log-partition
//! function, scaled by an inverse-liquidity parameter `lambda`:
//! `C(theta) = T(lambda * theta) / lambda`.
//!
//! Security `i` pays `phi_i(x)`. Buying the bundle `delta` at state `theta`
//! costs `C(theta + delta) - C(theta)` and the instantaneous prices are
//! `grad C(theta) = grad T(lambda * theta)`.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{Family, MeanParams, NaturalParams, Outcome, DOMAIN_MARGIN};
use crate::numeric::{add, dot, scale};

/// Trades may not bring `lambda * theta` closer than this to the boundary.
pub const TRADE_MARGIN: f64 = 1e-9;

/// Snapshot of a market, as persisted in a market state file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub family: Family,
    /// Outstanding shares.
    pub theta: NaturalParams,
    #[serde(default = "default_inv_liquidity")]
    pub inv_liquidity: f64,
    #[serde(default)]
    pub n_trades: u64,
    #[serde(default)]
    pub revenue: f64,
}

fn default_inv_liquidity() -> f64 {
    1.0
}

impl MarketState {
    pub fn new(family: Family, theta: NaturalParams, inv_liquidity: f64) -> Result<Self> {
        let state = MarketState { family, theta, inv_liquidity, n_trades: 0, revenue: 0.0 };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inv_liquidity > 0.0 && self.inv_liquidity.is_finite()) {
            return Err(Error::domain(format!(
                "inverse liquidity must be positive, got {}",
                self.inv_liquidity
            )));
        }
        if !self.revenue.is_finite() {
            return Err(Error::domain("revenue is not finite"));
        }
        self.family.check_natural(&self.scaled(&self.theta), DOMAIN_MARGIN)
    }

    fn scaled(&self, theta: &[f64]) -> Vec<f64> {
        scale(theta, self.inv_liquidity)
    }

    /// `C(theta) = T(lambda * theta) / lambda`.
    pub fn cost(&self, theta: &[f64]) -> Result<f64> {
        let scaled = self.scaled(theta);
        self.family.check_natural(&scaled, DOMAIN_MARGIN)?;
        Ok(self.family.log_partition_unchecked(&scaled) / self.inv_liquidity)
    }

    /// Current prices `grad T(lambda * theta)`.
    pub fn prices(&self) -> Result<MeanParams> {
        self.prices_at(&self.theta)
    }

    /// Prices the market would quote with outstanding shares `theta`.
    pub fn prices_at(&self, theta: &[f64]) -> Result<MeanParams> {
        self.family.mean_from_natural(&NaturalParams(self.scaled(theta)))
    }

    /// State reached by buying `delta`, checked against the trade margin.
    pub fn theta_after(&self, delta: &[f64]) -> Result<Vec<f64>> {
        if delta.len() != self.theta.len() || delta.iter().any(|d| !d.is_finite()) {
            return Err(Error::domain(format!(
                "trade {delta:?} does not fit a market with {} securities",
                self.theta.len()
            )));
        }
        let after = add(&self.theta, delta);
        self.family
            .check_natural(&self.scaled(&after), TRADE_MARGIN)
            .map_err(|_| Error::domain(format!("trade {delta:?} leaves the share domain of {}", self.family)))?;
        Ok(after)
    }

    /// Cost of buying `delta` now. Does not change the state.
    pub fn quote(&self, delta: &[f64]) -> Result<f64> {
        let after = self.theta_after(delta)?;
        Ok(self.cost(&after)? - self.cost(&self.theta)?)
    }

    /// Log loss of the market's current forecast, `-log p(x; theta)`.
    /// Only defined at unit inverse liquidity.
    pub fn log_loss(&self, x: &Outcome) -> Result<f64> {
        if self.inv_liquidity != 1.0 {
            return Err(Error::Unsupported(
                "log loss is only defined for inverse liquidity 1".into(),
            ));
        }
        Ok(-self.family.log_density(&self.theta, x)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let state: MarketState = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        state.validate()?;
        Ok(state)
    }

    /// Writes the state as JSON, replacing `path` atomically.
    pub fn save_atomic(&self, path: &Path) -> Result<()> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer_pretty(&mut tmp, self).map_err(std::io::Error::from)?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    }
}

/// Payoff of holding `delta` when `x` occurs: `<delta, phi(x)>`.
pub fn payoff(family: &Family, delta: &[f64], x: &Outcome) -> Result<f64> {
    if delta.len() != family.dim() {
        return Err(Error::domain(format!("portfolio {delta:?} does not match {family}")));
    }
    Ok(dot(delta, &family.statistic(x)?))
}

/// One executed trade. `cost` always equals `C(theta_after) - C(theta_before)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub round: u64,
    pub trader_id: String,
    pub delta: Vec<f64>,
    pub cost: f64,
    pub theta_before: NaturalParams,
    pub theta_after: NaturalParams,
}

/// A live market: the state plus its append-only trade log.
///
/// Writes go through `&mut self`, so a market has a single writer; quotes
/// and prices only need a shared borrow.
#[derive(Debug)]
pub struct Market {
    state: MarketState,
    trades: Vec<TradeRecord>,
    sink: Option<BufWriter<File>>,
}

impl Market {
    pub fn new(state: MarketState) -> Result<Self> {
        state.validate()?;
        Ok(Market { state, trades: Vec::new(), sink: None })
    }

    /// Also append every executed trade to `path` as one JSON line.
    pub fn with_log_file(mut self, path: &Path) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.sink = Some(BufWriter::new(file));
        Ok(self)
    }

    pub fn state(&self) -> &MarketState {
        &self.state
    }

    pub fn into_state(self) -> MarketState {
        self.state
    }

    pub fn trades(&self) -> &[TradeRecord] {
        &self.trades
    }

    pub fn prices(&self) -> Result<MeanParams> {
        self.state.prices()
    }

    pub fn quote(&self, delta: &[f64]) -> Result<f64> {
        self.state.quote(delta)
    }

    pub fn log_loss(&self, x: &Outcome) -> Result<f64> {
        self.state.log_loss(x)
    }

    /// Executes `delta`, tagging the record with the trade count as round.
    pub fn execute(&mut self, delta: &[f64], trader_id: &str) -> Result<TradeRecord> {
        let round = self.state.n_trades;
        self.execute_in_round(delta, trader_id, round)
    }

    /// Executes `delta`. On error nothing changes, including the log file.
    pub fn execute_in_round(&mut self, delta: &[f64], trader_id: &str, round: u64) -> Result<TradeRecord> {
        let after = self.state.theta_after(delta)?;
        let cost = self.state.cost(&after)? - self.state.cost(&self.state.theta)?;
        let record = TradeRecord {
            round,
            trader_id: trader_id.to_owned(),
            delta: delta.to_vec(),
            cost,
            theta_before: self.state.theta.clone(),
            theta_after: NaturalParams(after),
        };
        if let Some(sink) = self.sink.as_mut() {
            serde_json::to_writer(&mut *sink, &record).map_err(std::io::Error::from)?;
            sink.write_all(b"\n")?;
            sink.flush()?;
        }
        self.state.theta = record.theta_after.clone();
        self.state.n_trades += 1;
        self.state.revenue += cost;
        self.trades.push(record.clone());
        Ok(record)
    }

    /// Resets the outstanding shares without a trade, keeping the trade
    /// count and revenue. Used when each round opens a fresh instance.
    pub fn reopen(&mut self, theta: NaturalParams) -> Result<()> {
        let scaled = scale(&theta, self.state.inv_liquidity);
        self.state.family.check_natural(&scaled, DOMAIN_MARGIN)?;
        self.state.theta = theta;
        Ok(())
    }
}
