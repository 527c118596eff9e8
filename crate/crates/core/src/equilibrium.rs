//! Equilibrium of several exponential-utility traders in one market.
//!
//! With log-utilities the trading game is a potential game. The potential
//!
//! `Phi(d) = -T(theta0 + sum d_i) - sum (1/a_i) T(theta_hat_i - a_i d_i)`
//!
//! changes under a unilateral deviation by exactly the deviating trader's
//! log-utility change. It is strictly concave in each `d_i` (and jointly, for
//! a minimal family), so its stationary point is the unique equilibrium:
//! setting each partial gradient to zero gives
//! `grad T(theta_eq) = grad T(theta_hat_i - a_i d_i)`, hence
//! `theta_hat_i - a_i d_i = theta_eq` for every trader, and summing
//! `d_i = (theta_hat_i - theta_eq) / a_i` yields the closed form
//! `theta_eq = (theta0 + sum theta_hat_i / a_i) / (1 + sum 1 / a_i)`.
//! For categorical families the same argument holds up to the constant
//! gauge, and the closed form picks one representative.
//!
//! Only unit inverse liquidity is covered.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{Family, MeanParams, NaturalParams, DOMAIN_MARGIN};
use crate::market::MarketState;
use crate::numeric::{add, max_abs_diff, scale, sub};
use crate::traders::{exp_utility_trade, Budget, TraderProfile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumTrader {
    #[serde(alias = "theta")]
    pub belief_theta: NaturalParams,
    pub risk_aversion: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumProblem {
    pub family: Family,
    pub theta0: NaturalParams,
    pub traders: Vec<EquilibriumTrader>,
}

impl EquilibriumProblem {
    pub fn new(family: Family, theta0: NaturalParams, traders: Vec<EquilibriumTrader>) -> Result<Self> {
        let problem = EquilibriumProblem { family, theta0, traders };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        self.family.check_natural(&self.theta0, DOMAIN_MARGIN)?;
        for (i, t) in self.traders.iter().enumerate() {
            if !(t.risk_aversion > 0.0 && t.risk_aversion.is_finite()) {
                return Err(Error::domain(format!(
                    "trader {i}: equilibrium needs positive risk aversion, got {}",
                    t.risk_aversion
                )));
            }
            self.family.check_natural(&t.belief_theta, DOMAIN_MARGIN)?;
        }
        Ok(())
    }

    fn check_allocation(&self, deltas: &[Vec<f64>]) -> Result<()> {
        if deltas.len() != self.traders.len() || deltas.iter().any(|d| d.len() != self.family.dim()) {
            return Err(Error::domain("allocation does not match the problem"));
        }
        Ok(())
    }

    fn state_after(&self, deltas: &[Vec<f64>], skip: Option<usize>) -> Vec<f64> {
        deltas
            .iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != skip)
            .fold(self.theta0.to_vec(), |acc, (_, d)| add(&acc, d))
    }

    fn belief_term(&self, i: usize, delta: &[f64]) -> Result<f64> {
        let t = &self.traders[i];
        let shifted = sub(&t.belief_theta, &scale(delta, t.risk_aversion));
        Ok(self.family.log_partition(&NaturalParams(shifted))? / t.risk_aversion)
    }
}

/// The potential `Phi`. With no traders it is `-T(theta0)`.
pub fn potential(problem: &EquilibriumProblem, deltas: &[Vec<f64>]) -> Result<f64> {
    problem.check_allocation(deltas)?;
    let state = NaturalParams(problem.state_after(deltas, None));
    let mut phi = -problem.family.log_partition(&state)?;
    for (i, d) in deltas.iter().enumerate() {
        phi -= problem.belief_term(i, d)?;
    }
    Ok(phi)
}

/// Log-utility of trader `i`, taking its trade after everyone else's:
/// `-T(theta0 + sum d) + T(theta0 + sum_{j != i} d_j) - (1/a_i) T(theta_hat_i - a_i d_i) + (1/a_i) T(theta_hat_i)`.
pub fn log_utility(problem: &EquilibriumProblem, deltas: &[Vec<f64>], i: usize) -> Result<f64> {
    problem.check_allocation(deltas)?;
    if i >= deltas.len() {
        return Err(Error::domain(format!("no trader {i}")));
    }
    let fam = &problem.family;
    let all = fam.log_partition(&NaturalParams(problem.state_after(deltas, None)))?;
    let others = fam.log_partition(&NaturalParams(problem.state_after(deltas, Some(i))))?;
    let zero = vec![0.0; fam.dim()];
    Ok(-all + others - problem.belief_term(i, &deltas[i])? + problem.belief_term(i, &zero)?)
}

/// Change in trader `i`'s log-utility when it alone switches from
/// `deltas[i]` to `deviation`. Unlike a difference of [`log_utility`] values,
/// this never evaluates the state without trader `i`, which can lie outside
/// the domain even when the full state does not.
pub fn deviation_gain(problem: &EquilibriumProblem, deltas: &[Vec<f64>], i: usize, deviation: &[f64]) -> Result<f64> {
    problem.check_allocation(deltas)?;
    if i >= deltas.len() {
        return Err(Error::domain(format!("no trader {i}")));
    }
    let mut moved = deltas.to_vec();
    moved[i] = deviation.to_vec();
    problem.check_allocation(&moved)?;
    let fam = &problem.family;
    let before = fam.log_partition(&NaturalParams(problem.state_after(deltas, None)))?;
    let after = fam.log_partition(&NaturalParams(problem.state_after(&moved, None)))?;
    Ok(before - after + problem.belief_term(i, &deltas[i])? - problem.belief_term(i, deviation)?)
}

/// Closed-form equilibrium state and the per-trader bundles
/// `d_i = (theta_hat_i - theta_eq) / a_i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosedForm {
    pub theta_eq: NaturalParams,
    pub deltas: Vec<Vec<f64>>,
}

pub fn equilibrium_closed_form(problem: &EquilibriumProblem) -> Result<ClosedForm> {
    problem.validate()?;
    let mut numerator = problem.theta0.to_vec();
    let mut denominator = 1.0;
    for t in &problem.traders {
        numerator = add(&numerator, &scale(&t.belief_theta, 1.0 / t.risk_aversion));
        denominator += 1.0 / t.risk_aversion;
    }
    let theta_eq = scale(&numerator, 1.0 / denominator);
    problem.family.check_natural(&theta_eq, DOMAIN_MARGIN)?;
    let deltas = problem
        .traders
        .iter()
        .map(|t| scale(&sub(&t.belief_theta, &theta_eq), 1.0 / t.risk_aversion))
        .collect();
    Ok(ClosedForm { theta_eq: NaturalParams(theta_eq), deltas })
}

/// Result of cyclic best-response dynamics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BestResponse {
    pub deltas: Vec<Vec<f64>>,
    pub theta_eq: NaturalParams,
    /// Number of sweeps performed.
    pub rounds: usize,
    /// Potential after each sweep, starting with the empty allocation.
    pub potential_trace: Vec<f64>,
}

fn best_response(problem: &EquilibriumProblem, deltas: &[Vec<f64>], i: usize) -> Result<Vec<f64>> {
    // The residual market may sit outside the share domain even though the
    // full state never does (the potential is steep, so ascent keeps it
    // inside). The best response itself is still well defined.
    let residual = MarketState {
        family: problem.family,
        theta: NaturalParams(problem.state_after(deltas, Some(i))),
        inv_liquidity: 1.0,
        n_trades: 0,
        revenue: 0.0,
    };
    let t = &problem.traders[i];
    let profile = TraderProfile::new(
        format!("trader-{i}"),
        &problem.family,
        t.belief_theta.clone(),
        t.risk_aversion,
        Budget::Unlimited,
    )?;
    exp_utility_trade(&residual, &profile)
}

/// Each trader in turn replaces its bundle with its exponential-utility
/// trade against the market its rivals leave behind. Stops once no trader
/// would move its bundle by `tol` or more.
pub fn best_response_dynamics(problem: &EquilibriumProblem, max_rounds: usize, tol: f64) -> Result<BestResponse> {
    problem.validate()?;
    if max_rounds == 0 || !(tol > 0.0) {
        return Err(Error::domain("best response needs max_rounds >= 1 and tol > 0"));
    }
    let dim = problem.family.dim();
    let mut deltas = vec![vec![0.0; dim]; problem.traders.len()];
    let mut trace = vec![potential(problem, &deltas)?];
    for round in 1..=max_rounds {
        for i in 0..deltas.len() {
            deltas[i] = best_response(problem, &deltas, i)?;
        }
        trace.push(potential(problem, &deltas)?);
        let mut worst: f64 = 0.0;
        for i in 0..deltas.len() {
            worst = worst.max(max_abs_diff(&best_response(problem, &deltas, i)?, &deltas[i]));
        }
        if worst < tol {
            let theta_eq = NaturalParams(problem.state_after(&deltas, None));
            return Ok(BestResponse { deltas, theta_eq, rounds: round, potential_trace: trace });
        }
    }
    Err(Error::Convergence(format!("best response did not settle within {max_rounds} sweeps")))
}

/// Everything the CLI reports about an equilibrium problem.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub theta_eq: NaturalParams,
    pub prices_eq: MeanParams,
    pub deltas: Vec<Vec<f64>>,
    pub potential_value: f64,
    pub br_rounds: usize,
}

/// Closed form, cross-checked against best-response dynamics.
pub fn solve(problem: &EquilibriumProblem, max_rounds: usize, tol: f64) -> Result<EquilibriumReport> {
    let closed = equilibrium_closed_form(problem)?;
    let br = best_response_dynamics(problem, max_rounds, tol)?;
    let gap = max_abs_diff(&br.theta_eq, &closed.theta_eq);
    if gap > 1e-6 {
        return Err(Error::Convergence(format!(
            "best response stopped {gap:e} away from the closed form"
        )));
    }
    Ok(EquilibriumReport {
        prices_eq: problem.family.mean_from_natural(&closed.theta_eq)?,
        potential_value: potential(problem, &closed.deltas)?,
        theta_eq: closed.theta_eq,
        deltas: closed.deltas,
        br_rounds: br.rounds,
    })
}
