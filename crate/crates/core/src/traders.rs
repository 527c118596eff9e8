//! Trader behavior models.
//!
//! All models here are myopic: a trader looks at the current market state
//! and picks the bundle that is optimal for it right now.
//!
//! * Risk-neutral traders move prices to their belief mean.
//! * Bayesian traders treat current prices as a phantom sample whose size
//!   grows with the number of trades, then trade to their posterior mean.
//! * Exponential-utility traders with risk aversion `a` and belief
//!   `theta_hat` move the shares to a convex combination of the current
//!   state and their target, weighted `lambda : a`.
//! * Budget-limited traders move only the fraction of the way toward their
//!   target that their budget can pay for.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{Family, MeanParams, NaturalParams, Outcome, DOMAIN_MARGIN};
use crate::market::{payoff, MarketState, TradeRecord};
use crate::numeric::{add, dot, norm, scale, sub};

/// Trader budget; `null` in JSON means unlimited.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Option<f64>", into = "Option<f64>")]
pub enum Budget {
    Unlimited,
    Limited(f64),
}

impl From<Option<f64>> for Budget {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Budget::Unlimited, Budget::Limited)
    }
}

impl From<Budget> for Option<f64> {
    fn from(b: Budget) -> Self {
        match b {
            Budget::Unlimited => None,
            Budget::Limited(v) => Some(v),
        }
    }
}

impl Budget {
    pub fn amount(self) -> Option<f64> {
        self.into()
    }

    fn adjust(&mut self, change: f64) {
        if let Budget::Limited(v) = self {
            *v += change;
        }
    }
}

/// A trader's belief, risk attitude and account.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraderProfile {
    pub id: String,
    pub belief_theta: NaturalParams,
    /// Absolute risk aversion `a`; zero means risk-neutral.
    pub risk_aversion: f64,
    pub budget: Budget,
    /// Positions bought in the current market instance, not yet settled.
    pub holdings: Vec<f64>,
    /// Cumulative payoffs minus cumulative costs.
    pub cash: f64,
}

impl TraderProfile {
    pub fn new(
        id: impl Into<String>,
        family: &Family,
        belief_theta: NaturalParams,
        risk_aversion: f64,
        budget: Budget,
    ) -> Result<Self> {
        family.check_natural(&belief_theta, DOMAIN_MARGIN)?;
        if !(risk_aversion >= 0.0 && risk_aversion.is_finite()) {
            return Err(Error::domain(format!("risk aversion must be non-negative, got {risk_aversion}")));
        }
        if let Budget::Limited(b) = budget {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::domain(format!("budget must be non-negative, got {b}")));
            }
        }
        Ok(TraderProfile {
            id: id.into(),
            belief_theta,
            risk_aversion,
            budget,
            holdings: vec![0.0; family.dim()],
            cash: 0.0,
        })
    }

    /// Books an executed trade: adds the bundle to the open position and
    /// pays its cost.
    pub fn record_trade(&mut self, record: &TradeRecord) {
        self.holdings = add(&self.holdings, &record.delta);
        self.cash -= record.cost;
        self.budget.adjust(-record.cost);
    }

    /// Settles the open position at outcome `x`, returning the payoff.
    pub fn settle(&mut self, family: &Family, x: &Outcome) -> Result<f64> {
        let paid = payoff(family, &self.holdings, x)?;
        self.cash += paid;
        self.budget.adjust(paid);
        self.holdings = vec![0.0; family.dim()];
        Ok(paid)
    }
}

/// Conjugate prior summarized as a phantom sample of size `count` with mean
/// statistic `mean`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjugatePrior {
    pub phantom_mean: MeanParams,
    pub phantom_count: f64,
}

impl ConjugatePrior {
    pub fn new(family: &Family, phantom_mean: MeanParams, phantom_count: f64) -> Result<Self> {
        family.check_mean(&phantom_mean)?;
        if !(phantom_count > 0.0 && phantom_count.is_finite()) {
            return Err(Error::domain(format!("phantom count must be positive, got {phantom_count}")));
        }
        Ok(ConjugatePrior { phantom_mean, phantom_count })
    }
}

/// Posterior after observing `sample_size` points with mean `sample_mean`:
/// the phantom mean becomes `(n nu + m mu_hat) / (n + m)`.
pub fn bayes_update(
    family: &Family,
    prior: &ConjugatePrior,
    sample_mean: &MeanParams,
    sample_size: f64,
) -> Result<ConjugatePrior> {
    family.check_mean_closure(sample_mean)?;
    if !(sample_size > 0.0 && sample_size.is_finite()) {
        return Err(Error::domain(format!("sample size must be positive, got {sample_size}")));
    }
    let n = prior.phantom_count;
    let total = n + sample_size;
    let mean = prior
        .phantom_mean
        .iter()
        .zip(sample_mean.iter())
        .map(|(nu, mu)| (n * nu + sample_size * mu) / total)
        .collect();
    Ok(ConjugatePrior { phantom_mean: MeanParams(mean), phantom_count: total })
}

/// Bundle that moves prices to `belief_mu`: target shares
/// `grad G(belief_mu) / lambda`.
///
/// Categorical targets are shifted to the same total as the current shares,
/// so the bundle sums to zero.
pub fn risk_neutral_trade(state: &MarketState, belief_mu: &MeanParams) -> Result<Vec<f64>> {
    let theta_hat = state.family.natural_from_mean(belief_mu)?;
    let target = scale(&theta_hat, 1.0 / state.inv_liquidity);
    let target = state.family.align_gauge(&target, &state.theta);
    Ok(sub(&target, &state.theta))
}

/// Price target of a Bayesian trader: with `n` prior trades the market
/// prices stand for a phantom sample of size `n m`, giving
/// `(n prices + mu_hat) / (n + 1)`.
pub fn bayesian_target(state: &MarketState, sample_mean: &MeanParams, sample_size: f64) -> Result<MeanParams> {
    if state.inv_liquidity != 1.0 {
        return Err(Error::Unsupported("Bayesian traders need inverse liquidity 1".into()));
    }
    state.family.check_mean_closure(sample_mean)?;
    if !(sample_size > 0.0 && sample_size.is_finite()) {
        return Err(Error::domain(format!("sample size must be positive, got {sample_size}")));
    }
    if state.n_trades == 0 {
        return Ok(sample_mean.clone());
    }
    let prior = ConjugatePrior::new(
        &state.family,
        state.prices()?,
        state.n_trades as f64 * sample_size,
    )?;
    Ok(bayes_update(&state.family, &prior, sample_mean, sample_size)?.phantom_mean)
}

pub fn bayesian_market_trade(state: &MarketState, sample_mean: &MeanParams, sample_size: f64) -> Result<Vec<f64>> {
    let target = bayesian_target(state, sample_mean, sample_size)?;
    risk_neutral_trade(state, &target)
}

/// Certainty equivalent of buying `delta` for an exponential-utility trader
/// with an exponential-family belief:
///
/// `log a - [T(theta_hat - a delta) - T(theta_hat)] - a [C(theta + delta) - C(theta)]`
///
/// Only its maximizer is meaningful; the additive `log a` is kept as is.
pub fn certainty_equivalent(state: &MarketState, trader: &TraderProfile, delta: &[f64]) -> Result<f64> {
    let a = trader.risk_aversion;
    if !(a > 0.0) {
        return Err(Error::domain("certainty equivalent needs positive risk aversion"));
    }
    let fam = &state.family;
    let belief = &trader.belief_theta;
    let shifted = sub(belief, &scale(delta, a));
    fam.check_natural(&shifted, DOMAIN_MARGIN)?;
    fam.check_natural(belief, DOMAIN_MARGIN)?;
    let after = add(&state.theta, delta);
    let belief_term = fam.log_partition_unchecked(&shifted) - fam.log_partition_unchecked(belief);
    let cost_term = state.cost(&after)? - state.cost(&state.theta)?;
    Ok(a.ln() - belief_term - a * cost_term)
}

/// Belief a trader acts on when it already holds `holdings`:
/// `theta_hat - a * holdings`.
pub fn effective_belief(family: &Family, trader: &TraderProfile) -> Result<NaturalParams> {
    let theta = sub(&trader.belief_theta, &scale(&trader.holdings, trader.risk_aversion));
    family.check_natural(&theta, DOMAIN_MARGIN)?;
    Ok(NaturalParams(theta))
}

/// Optimal bundle for an exponential-utility trader:
/// `theta + delta = lambda/(lambda + a) * theta_hat/lambda + a/(lambda + a) * theta`,
/// where `theta_hat` is the trader's effective belief. At `a = 0` this is
/// the risk-neutral move to `theta_hat / lambda`.
pub fn exp_utility_trade(state: &MarketState, trader: &TraderProfile) -> Result<Vec<f64>> {
    if !(trader.risk_aversion >= 0.0) {
        return Err(Error::domain("risk aversion must be non-negative"));
    }
    let belief = effective_belief(&state.family, trader)?;
    let lambda = state.inv_liquidity;
    let weight = 1.0 / (lambda + trader.risk_aversion);
    Ok(belief
        .iter()
        .zip(state.theta.iter())
        .map(|(b, t)| (b - lambda * t) * weight)
        .collect())
}

/// Outcome of budget limiting: the bundle and the fraction of the desired
/// move it covers.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitedTrade {
    pub delta: Vec<f64>,
    pub fraction: f64,
}

/// Moves from the current shares toward `target` as far as `budget` pays
/// for: fraction `f = min(1, budget / (C(target) - C(theta)))`, with `f = 1`
/// whenever the full move costs no more than the budget. Convexity of `C`
/// keeps the cost of `f (target - theta)` within the budget; the fraction is
/// nudged down if rounding says otherwise.
pub fn budget_limited_toward(state: &MarketState, target: &[f64], budget: Budget) -> Result<LimitedTrade> {
    budget_limited_along(state, sub(target, &state.theta), budget)
}

/// Same as [`budget_limited_toward`] with the full move given directly.
pub fn budget_limited_along(state: &MarketState, full: Vec<f64>, budget: Budget) -> Result<LimitedTrade> {
    let full_cost = state.quote(&full)?;
    let Budget::Limited(available) = budget else {
        return Ok(LimitedTrade { delta: full, fraction: 1.0 });
    };
    let available = available.max(0.0);
    let mut fraction = if full_cost <= available { 1.0 } else { available / full_cost };
    // Rounding in the quote can overshoot a tiny budget; shrink by the overshoot
    // and give up on trading once that stops working.
    for _ in 0..64 {
        let delta = scale(&full, fraction);
        let cost = state.quote(&delta)?;
        if !cost.is_finite() {
            return Err(Error::domain(format!("quote for {delta:?} is {cost}")));
        }
        if fraction == 0.0 || cost <= available {
            return Ok(LimitedTrade { delta, fraction });
        }
        fraction *= (available / cost).min(1.0 - 1e-12);
    }
    Ok(LimitedTrade { delta: vec![0.0; full.len()], fraction: 0.0 })
}

/// Budget-limited move toward the trader's own belief at unit inverse
/// liquidity. Categorical beliefs are put in the buy-only gauge relative to
/// the current shares, so the cost also bounds the worst-case loss.
pub fn budget_limited_trade(state: &MarketState, trader: &TraderProfile) -> Result<LimitedTrade> {
    if state.inv_liquidity != 1.0 {
        return Err(Error::Unsupported("budget-limited trades need inverse liquidity 1".into()));
    }
    let mut full = sub(&trader.belief_theta, &state.theta);
    if let Family::Categorical(_) = state.family {
        // Shift by the smallest component directly, so rounding cannot leave
        // a slightly negative entry.
        let low = full.iter().copied().fold(f64::INFINITY, f64::min);
        full.iter_mut().for_each(|d| *d -= low);
    }
    budget_limited_along(state, full, trader.budget)
}

/// One-round reduction in market log loss caused by a trade:
/// `L(theta_before, x) - L(theta_after, x)`. It equals the trade's payoff
/// minus its cost. Assumes unit inverse liquidity.
pub fn myopic_impact(family: &Family, record: &TradeRecord, x: &Outcome) -> Result<f64> {
    Ok(family.log_density(&record.theta_after, x)? - family.log_density(&record.theta_before, x)?)
}

/// Expected profit of a move along the segment toward the trader's belief,
/// with the lower bound `f * D_T(theta, theta_hat)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfitBound {
    pub expected_profit: f64,
    pub bound: f64,
    pub fraction: f64,
}

impl ProfitBound {
    /// `expected_profit >= bound >= 0`, up to rounding.
    pub fn holds(&self) -> bool {
        let slack = 1e-12 * (1.0 + self.expected_profit.abs());
        self.bound >= -slack && self.expected_profit >= self.bound - slack
    }
}

/// Expected profit, under the trader's belief `theta_hat`, of moving the
/// shares from `theta` to `theta + delta`:
/// `D_T(theta, theta_hat) - D_T(theta + delta, theta_hat)`.
///
/// `delta` must be `f (theta_hat - theta)` for some `f` in `[0, 1]`.
pub fn expected_profit_bound(
    family: &Family,
    theta: &NaturalParams,
    theta_hat: &NaturalParams,
    delta: &[f64],
) -> Result<ProfitBound> {
    family.check_natural(theta, DOMAIN_MARGIN)?;
    family.check_natural(theta_hat, DOMAIN_MARGIN)?;
    let direction = sub(theta_hat, theta);
    let span = dot(&direction, &direction);
    let fraction = if span == 0.0 { 1.0 } else { dot(delta, &direction) / span };
    let off_segment = norm(&sub(delta, &scale(&direction, fraction)));
    if off_segment > 1e-9 * (1.0 + span.sqrt())
        || !(-1e-12..=1.0 + 1e-12).contains(&fraction)
    {
        return Err(Error::domain(format!(
            "trade {delta:?} is not on the segment from {theta:?} toward {theta_hat:?}"
        )));
    }
    let after = add(theta, delta);
    family.check_natural(&after, DOMAIN_MARGIN)?;
    let start_gap = family.bregman_unchecked(theta, theta_hat);
    let end_gap = family.bregman_unchecked(&after, theta_hat);
    Ok(ProfitBound {
        expected_profit: start_gap - end_gap,
        bound: fraction * start_gap,
        fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Market;
    use crate::oracle;
    use proptest::prelude::*;

    fn state(family: Family, theta: &[f64], lambda: f64) -> MarketState {
        MarketState::new(family, NaturalParams(theta.to_vec()), lambda).unwrap()
    }

    fn trader(family: &Family, belief: &[f64], a: f64, budget: Budget) -> TraderProfile {
        TraderProfile::new("t", family, NaturalParams(belief.to_vec()), a, budget).unwrap()
    }

    #[test]
    fn risk_neutral_examples() {
        let s = state(Family::ExponentialRate, &[-1.0], 1.0);
        let d = risk_neutral_trade(&s, &MeanParams::scalar(0.5)).unwrap();
        assert!((d[0] + 1.0).abs() < 1e-15);
        let s2 = state(Family::ExponentialRate, &[-1.0], 2.0);
        let d = risk_neutral_trade(&s2, &MeanParams::scalar(0.5)).unwrap();
        assert!(d[0].abs() < 1e-15);

        let s3 = state(Family::Categorical(3), &[1.0, 0.0, 2.5], 1.0);
        let d = risk_neutral_trade(&s3, &s3.prices().unwrap()).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-14), "{d:?}");
        assert!(risk_neutral_trade(&s3, &MeanParams(vec![1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn bayes_update_examples() {
        let fam = Family::ExponentialRate;
        let prior = ConjugatePrior::new(&fam, MeanParams::scalar(2.0), 3.0).unwrap();
        let post = bayes_update(&fam, &prior, &MeanParams::scalar(6.0), 1.0).unwrap();
        assert_eq!(post.phantom_mean[0], 3.0);
        assert_eq!(post.phantom_count, 4.0);
        let same = bayes_update(&fam, &prior, &MeanParams::scalar(2.0), 5.5).unwrap();
        assert_eq!(same.phantom_mean[0], 2.0);

        // Beta(1, 1) prior (2 phantom flips at 1/2) after 2 heads: Beta(3, 1), mean 3/4.
        let fam = Family::Categorical(2);
        let prior = ConjugatePrior::new(&fam, MeanParams(vec![0.5, 0.5]), 2.0).unwrap();
        let post = bayes_update(&fam, &prior, &MeanParams(vec![1.0, 0.0]), 2.0).unwrap();
        let (alpha, beta) = (1.0 + 2.0, 1.0 + 0.0);
        assert!((post.phantom_mean[0] - alpha / (alpha + beta)).abs() < 1e-15);
    }

    #[test]
    fn bayesian_market_targets() {
        let fam = Family::Categorical(2);
        let mut m = Market::new(state(fam, &[0.0, 0.0], 1.0)).unwrap();
        let first = bayesian_target(m.state(), &MeanParams(vec![0.8, 0.2]), 5.0).unwrap();
        assert_eq!(first.as_slice(), &[0.8, 0.2]);

        m.execute(&[0.1, -0.1], "x").unwrap();
        let p = m.prices().unwrap();
        let t = bayesian_target(m.state(), &MeanParams(vec![0.8, 0.2]), 5.0).unwrap();
        assert!((t[0] - (p[0] + 0.8) / 2.0).abs() < 1e-15);

        let mut s = state(fam, &[0.0, 0.0], 1.0);
        s.n_trades = 3;
        let t = bayesian_target(&s, &MeanParams(vec![1.0, 0.0]), 1.0).unwrap();
        assert!((t[0] - 0.625).abs() < 1e-15 && (t[1] - 0.375).abs() < 1e-15);
        let d = bayesian_market_trade(&s, &MeanParams(vec![1.0, 0.0]), 1.0).unwrap();
        let mut after = s.clone();
        after.theta = NaturalParams(add(&s.theta, &d));
        assert!((after.prices().unwrap()[0] - 0.625).abs() < 1e-14);
    }

    #[test]
    fn certainty_equivalent_at_zero_trade_is_log_a() {
        let s = state(Family::GaussianMoments, &[0.2, -0.7], 1.0);
        let t = trader(&s.family, &[1.0, -0.4], 3.0, Budget::Unlimited);
        assert!((certainty_equivalent(&s, &t, &[0.0, 0.0]).unwrap() - 3f64.ln()).abs() < 1e-15);
        let rn = trader(&s.family, &[1.0, -0.4], 0.0, Budget::Unlimited);
        assert!(certainty_equivalent(&s, &rn, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn exp_utility_optimum_beats_grid() {
        let s = state(Family::ExponentialRate, &[-1.0], 1.0);
        let t = trader(&s.family, &[-3.0], 2.0, Budget::Unlimited);
        let d = exp_utility_trade(&s, &t).unwrap();
        assert!((d[0] + 2.0 / 3.0).abs() < 1e-15);
        let best = certainty_equivalent(&s, &t, &d).unwrap();
        for x in oracle::linspace(-1.5 + 1e-6, 1.0 - 1e-6, 1000) {
            assert!(certainty_equivalent(&s, &t, &[x]).unwrap() <= best + 1e-15);
        }
    }

    #[test]
    fn exp_utility_examples() {
        let fam = Family::ExponentialRate;
        let s = state(fam, &[-1.0], 1.0);
        let d = exp_utility_trade(&s, &trader(&fam, &[-3.0], 1.0, Budget::Unlimited)).unwrap();
        assert_eq!(-1.0 + d[0], -2.0);
        let s2 = state(fam, &[-1.0], 2.0);
        let d = exp_utility_trade(&s2, &trader(&fam, &[-3.0], 1.0, Budget::Unlimited)).unwrap();
        assert!((-1.0 + d[0] + 4.0 / 3.0).abs() < 1e-15);
        let d = exp_utility_trade(&s, &trader(&fam, &[-3.0], 1e-8, Budget::Unlimited)).unwrap();
        assert!((-1.0 + d[0] + 3.0).abs() < 1e-6);
    }

    #[test]
    fn effective_belief_examples() {
        let fam = Family::ExponentialRate;
        let mut t = trader(&fam, &[-3.0], 1.0, Budget::Unlimited);
        assert_eq!(effective_belief(&fam, &t).unwrap()[0], -3.0);
        t.holdings = vec![-0.5];
        assert_eq!(effective_belief(&fam, &t).unwrap()[0], -2.5);
        let d = exp_utility_trade(&state(fam, &[-1.0], 1.0), &t).unwrap();
        assert_eq!(d[0], -0.75);
        t.risk_aversion = 0.0;
        assert_eq!(effective_belief(&fam, &t).unwrap()[0], -3.0);
        t.risk_aversion = 10.0;
        t.holdings = vec![-0.4];
        assert!(effective_belief(&fam, &t).is_err());
    }

    #[test]
    fn second_entry_matches_two_trade_utility_by_quadrature() {
        // Maximize E[-exp(-a W)/a] over the second bundle, with W the total
        // profit of both trades and the expectation taken by quadrature under
        // the Exp(rate 3) belief.
        let fam = Family::ExponentialRate;
        let (a, theta, belief) = (1.0, -1.0, -3.0);
        let s = state(fam, &[theta], 1.0);
        let d1 = exp_utility_trade(&s, &trader(&fam, &[belief], a, Budget::Unlimited)).unwrap()[0];
        let theta2 = -1.5;
        let cost = |from: f64, d: f64| -(-(from + d)).ln() + (-from).ln();
        let utility = |d2: f64| {
            let fixed = cost(theta, d1) + cost(theta2, d2);
            let integrand = |x: f64| {
                let density = -belief * (belief * x).exp();
                -(-a * ((d1 + d2) * x - fixed)).exp() / a * density
            };
            oracle::simpson(integrand, 0.0, 40.0, 8000)
        };
        let grid = oracle::linspace(-2.0, 1.4, 3401);
        let values: Vec<f64> = grid.iter().map(|&d| utility(d)).collect();
        let best = grid[oracle::argmax(&values)];
        let mut t = trader(&fam, &[belief], a, Budget::Unlimited);
        t.holdings = vec![d1];
        let closed = exp_utility_trade(&state(fam, &[theta2], 1.0), &t).unwrap()[0];
        assert!((best - closed).abs() <= 1e-3, "grid {best} vs closed form {closed}");
    }

    #[test]
    fn budget_limited_examples() {
        let fam = Family::ExponentialRate;
        let s = state(fam, &[-1.0], 1.0);
        let free = budget_limited_trade(&s, &trader(&fam, &[-0.5], 0.0, Budget::Unlimited)).unwrap();
        assert_eq!(free.fraction, 1.0);
        assert_eq!(free.delta, vec![0.5]);

        let alpha = 2f64.ln() / 2.0;
        let lim = budget_limited_trade(&s, &trader(&fam, &[-0.5], 0.0, Budget::Limited(alpha))).unwrap();
        assert!((lim.fraction - 0.5).abs() < 1e-12);
        assert!((-1.0 + lim.delta[0] + 0.75).abs() < 1e-12);
        let cost = s.quote(&lim.delta).unwrap();
        assert!((cost + 0.75f64.ln()).abs() < 1e-11);
        assert!(cost <= alpha);

        let broke = budget_limited_trade(&s, &trader(&fam, &[-0.5], 0.0, Budget::Limited(0.0))).unwrap();
        assert_eq!(broke.delta, vec![0.0]);

        // Moving toward a cheaper state is always affordable.
        let cheap = budget_limited_trade(&s, &trader(&fam, &[-2.0], 0.0, Budget::Limited(0.0))).unwrap();
        assert_eq!(cheap.fraction, 1.0);
    }

    #[test]
    fn categorical_budget_trade_only_buys() {
        let fam = Family::Categorical(3);
        let s = state(fam, &[0.3, -0.2, 0.0], 1.0);
        let t = trader(&fam, &[-2.0, 3.0, 0.0], 0.0, Budget::Limited(0.4));
        let lim = budget_limited_trade(&s, &t).unwrap();
        assert!(lim.fraction < 1.0);
        assert!(lim.delta.iter().all(|&d| d >= 0.0));
        let cost = s.quote(&lim.delta).unwrap();
        assert!(cost <= 0.4);
        // Prices match those of the unshifted partial move.
        let shifted = s.prices_at(&add(&s.theta, &lim.delta)).unwrap();
        let plain = add(&s.theta, &scale(&sub(&t.belief_theta, &s.theta), lim.fraction));
        let plain = s.prices_at(&plain).unwrap();
        for (a, b) in shifted.iter().zip(plain.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn budget_below_quote_rounding_terminates() {
        let s = state(Family::Categorical(2), &[0.7, 0.0], 1.0);
        for budget in [1e-30, 1e-18, 1e-16, 0.0] {
            let lim = budget_limited_along(&s, vec![1.0, 0.0], Budget::Limited(budget)).unwrap();
            assert!(s.quote(&lim.delta).unwrap() <= budget);
        }
    }

    #[test]
    fn myopic_impact_examples() {
        let fam = Family::Categorical(2);
        let mut m = Market::new(state(fam, &[0.0, 0.0], 1.0)).unwrap();
        let rec = m.execute(&[1.0, 0.0], "t").unwrap();
        let x = Outcome::Category(1);
        let impact = myopic_impact(&fam, &rec, &x).unwrap();
        let expected = 2f64.ln() - ((1f64.exp() + 1.0).ln() - 1.0);
        assert!((impact - expected).abs() < 1e-15);
        let oracle_value = payoff(&fam, &rec.delta, &x).unwrap() - rec.cost;
        assert!((impact - oracle_value).abs() < 1e-15);

        let rec0 = m.execute(&[0.0, 0.0], "t").unwrap();
        assert_eq!(myopic_impact(&fam, &rec0, &x).unwrap(), 0.0);
    }

    #[test]
    fn impacts_telescope_to_budget_change() {
        let fam = Family::Categorical(2);
        let mut m = Market::new(state(fam, &[0.0, 0.0], 1.0)).unwrap();
        let mut t = trader(&fam, &[1.0, -1.0], 0.0, Budget::Limited(0.3));
        let initial = t.budget.amount().unwrap();
        let mut total = 0.0;
        for (i, x) in [1, 2, 2, 1, 1].into_iter().enumerate() {
            let x = Outcome::Category(x);
            let lim = budget_limited_trade(m.state(), &t).unwrap();
            let rec = m.execute_in_round(&lim.delta, &t.id, i as u64).unwrap();
            t.record_trade(&rec);
            t.settle(&fam, &x).unwrap();
            total += myopic_impact(&fam, &rec, &x).unwrap();
        }
        assert!((t.budget.amount().unwrap() - initial - total).abs() < 1e-12);
    }

    #[test]
    fn profit_bound_examples() {
        let fam = Family::ExponentialRate;
        let theta = NaturalParams::scalar(-1.0);
        let belief = NaturalParams::scalar(-0.5);
        let pb = expected_profit_bound(&fam, &theta, &belief, &[0.25]).unwrap();
        assert!((pb.fraction - 0.5).abs() < 1e-15);
        let d_start = 1.0 - 2f64.ln();
        let d_end = -(0.75f64).ln() - 2f64.ln() + 0.25 * 2.0;
        assert!((pb.expected_profit - (d_start - d_end)).abs() < 1e-15);
        assert!((pb.expected_profit - 0.2123).abs() < 1e-4);
        assert!((pb.bound - 0.1534).abs() < 1e-4);
        assert!(pb.holds());

        let full = expected_profit_bound(&fam, &theta, &belief, &[0.5]).unwrap();
        assert!((full.expected_profit - full.bound).abs() < 1e-15);

        let none = expected_profit_bound(&fam, &theta, &theta, &[0.0]).unwrap();
        assert_eq!((none.expected_profit, none.bound), (0.0, 0.0));

        assert!(expected_profit_bound(&fam, &theta, &belief, &[0.75]).is_err());
        assert!(expected_profit_bound(&fam, &theta, &belief, &[-0.1]).is_err());
    }

    proptest! {
        #[test]
        fn first_order_condition_holds(
            t1 in -2.0f64..2.0, t2 in -3.0f64..-0.1, b1 in -2.0f64..2.0, b2 in -3.0f64..-0.1,
            a in 0.05f64..10.0,
        ) {
            let fam = Family::GaussianMoments;
            let s = state(fam, &[t1, t2], 1.0);
            let t = trader(&fam, &[b1, b2], a, Budget::Unlimited);
            let d = exp_utility_trade(&s, &t).unwrap();
            let lhs = fam.mean_unchecked(&sub(&t.belief_theta, &scale(&d, a)));
            let rhs = fam.mean_unchecked(&add(&s.theta, &d));
            for (l, r) in lhs.iter().zip(&rhs) {
                prop_assert!((l - r).abs() <= 1e-8 * (1.0 + l.abs()));
            }
        }

        #[test]
        fn certainty_equivalent_is_concave(
            d1 in -0.4f64..0.4, d2 in -0.4f64..0.4, a in 0.1f64..4.0,
        ) {
            let fam = Family::ExponentialRate;
            let s = state(fam, &[-1.0], 1.0);
            let t = trader(&fam, &[-1.2], a, Budget::Unlimited);
            let mid = certainty_equivalent(&s, &t, &[(d1 + d2) / 2.0]);
            let c1 = certainty_equivalent(&s, &t, &[d1]);
            let c2 = certainty_equivalent(&s, &t, &[d2]);
            if let (Ok(mid), Ok(c1), Ok(c2)) = (mid, c1, c2) {
                prop_assert!(mid >= 0.5 * (c1 + c2) - 1e-12);
            }
        }

        #[test]
        fn budget_never_overspent(
            theta in -3.0f64..-0.1, belief in -3.0f64..-0.1, alpha in 0.0f64..2.0,
        ) {
            let fam = Family::ExponentialRate;
            let s = state(fam, &[theta], 1.0);
            let lim = budget_limited_trade(&s, &trader(&fam, &[belief], 0.0, Budget::Limited(alpha))).unwrap();
            prop_assert!(s.quote(&lim.delta).unwrap() <= alpha + 1e-12);
        }
    }
}
