//! Seeded multi-round market simulations, trade-log replay and reports.
//!
//! Each round every scheduled trader trades once against the market, then a
//! single outcome is drawn from the true distribution and all open
//! positions settle. Outcomes come from their own seeded stream, so two
//! configurations with the same seed and rounds see the same outcomes even
//! when their trader lists differ. That is what makes baseline comparisons
//! paired.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{Family, MeanParams, NaturalParams, Outcome, DOMAIN_MARGIN};
use crate::market::{payoff, Market, MarketState, TradeRecord};
use crate::numeric::{scale, sub};
use crate::scoring::moments_from_mean_variance;
use crate::traders::{
    bayesian_market_trade, budget_limited_along, exp_utility_trade, risk_neutral_trade, Budget, TraderProfile,
};

/// Environment variable holding the default simulation seed.
pub const SEED_ENV: &str = "EXPFAM_SEED";

/// A scalar or a vector in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl ParamValue {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            ParamValue::Scalar(v) => vec![*v],
            ParamValue::Vector(v) => v.clone(),
        }
    }
}

/// How a trader's belief is written down.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BeliefSpec {
    Natural { theta: ParamValue },
    /// Gaussian mean and variance.
    MeanVariance { mean: f64, variance: f64 },
    Mean { mean: ParamValue },
}

impl BeliefSpec {
    fn resolve(&self, family: &Family) -> Result<NaturalParams> {
        match self {
            BeliefSpec::Natural { theta } => {
                let theta = NaturalParams(theta.to_vec());
                family.check_natural(&theta, DOMAIN_MARGIN)?;
                Ok(theta)
            }
            BeliefSpec::MeanVariance { mean, variance } => {
                if *family != Family::GaussianMoments {
                    return Err(Error::config(format!("mean/variance beliefs need gaussian-moments, not {family}")));
                }
                family.natural_from_mean(&moments_from_mean_variance(*mean, *variance)?)
            }
            BeliefSpec::Mean { mean } => family.natural_from_mean(&MeanParams(mean.to_vec())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraderModel {
    RiskNeutral,
    Bayesian,
    ExpUtility,
    BudgetLimited,
}

/// Private sample held by a Bayesian trader.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub mean: ParamValue,
    pub size: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraderConfig {
    pub id: String,
    pub model: TraderModel,
    /// Required except for Bayesian traders, whose belief defaults to their
    /// sample mean.
    #[serde(default)]
    pub belief: Option<BeliefSpec>,
    #[serde(default)]
    pub risk_aversion: f64,
    /// Initial budget; absent means unlimited.
    #[serde(default)]
    pub budget: Option<f64>,
    #[serde(default)]
    pub sample: Option<SampleSpec>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arrival {
    /// Every trader trades once per round, in config order.
    #[default]
    RoundRobin,
    /// Each round follows `sequence`, which may repeat a trader.
    FixedSequence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub family: Family,
    pub theta0: ParamValue,
    #[serde(default = "one")]
    pub inv_liquidity: f64,
    pub rounds: u64,
    /// Parameter of the outcome-generating distribution.
    pub true_theta: ParamValue,
    pub traders: Vec<TraderConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub arrival: Arrival,
    #[serde(default)]
    pub sequence: Vec<String>,
    /// Reopen the market at `theta0` at the start of every round instead of
    /// carrying the state over.
    #[serde(default)]
    pub reset_each_round: bool,
}

fn one() -> f64 {
    1.0
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        SimConfig::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

struct Agent {
    model: TraderModel,
    profile: TraderProfile,
    sample: Option<(MeanParams, f64)>,
}

struct Prepared {
    state: MarketState,
    true_theta: NaturalParams,
    agents: Vec<Agent>,
    schedule: Vec<usize>,
}

/// Validates the whole config up front. Any failure becomes a config error.
fn prepare(config: &SimConfig) -> Result<Prepared> {
    prepare_inner(config).map_err(|e| match e {
        Error::Config(_) | Error::Io(_) => e,
        other => Error::config(other.to_string()),
    })
}

fn prepare_inner(config: &SimConfig) -> Result<Prepared> {
    let family = config.family;
    if config.rounds == 0 {
        return Err(Error::config("rounds must be at least 1"));
    }
    if family == Family::Vmf3 {
        return Err(Error::config("vmf3 outcomes cannot be sampled, so vmf3 markets cannot be simulated"));
    }
    let state = MarketState::new(family, NaturalParams(config.theta0.to_vec()), config.inv_liquidity)?;
    let true_theta = NaturalParams(config.true_theta.to_vec());
    family.check_natural(&true_theta, DOMAIN_MARGIN)?;

    let mut seen = HashSet::new();
    let mut sample_size = None;
    let mut agents = Vec::with_capacity(config.traders.len());
    for t in &config.traders {
        if !seen.insert(t.id.as_str()) {
            return Err(Error::config(format!("duplicate trader id {:?}", t.id)));
        }
        let sample = match (&t.sample, t.model) {
            (Some(s), TraderModel::Bayesian) => {
                let mean = MeanParams(s.mean.to_vec());
                family.check_mean_closure(&mean)?;
                if !(s.size > 0.0 && s.size.is_finite()) {
                    return Err(Error::config(format!("trader {:?}: sample size must be positive", t.id)));
                }
                if sample_size.is_some_and(|m| m != s.size) {
                    return Err(Error::config("Bayesian traders must share one sample size"));
                }
                sample_size = Some(s.size);
                Some((mean, s.size))
            }
            (None, TraderModel::Bayesian) => {
                return Err(Error::config(format!("Bayesian trader {:?} needs a sample", t.id)));
            }
            _ => None,
        };
        if t.model == TraderModel::Bayesian && config.inv_liquidity != 1.0 {
            return Err(Error::config("Bayesian traders need inverse liquidity 1"));
        }
        if t.model == TraderModel::BudgetLimited && t.budget.is_none() {
            return Err(Error::config(format!("budget-limited trader {:?} needs a budget", t.id)));
        }
        let belief = match (&t.belief, &sample) {
            (Some(b), _) => b.resolve(&family)?,
            (None, Some((mean, _))) => family.natural_from_mean(mean)?,
            (None, None) => return Err(Error::config(format!("trader {:?} needs a belief", t.id))),
        };
        let budget = t.budget.map_or(Budget::Unlimited, Budget::Limited);
        let profile = TraderProfile::new(t.id.clone(), &family, belief, t.risk_aversion, budget)?;
        agents.push(Agent { model: t.model, profile, sample });
    }

    let schedule = match config.arrival {
        Arrival::RoundRobin => {
            if !config.sequence.is_empty() {
                return Err(Error::config("`sequence` is only used with fixed-sequence arrival"));
            }
            (0..agents.len()).collect()
        }
        Arrival::FixedSequence => config
            .sequence
            .iter()
            .map(|id| {
                config
                    .traders
                    .iter()
                    .position(|t| &t.id == id)
                    .ok_or_else(|| Error::config(format!("sequence names unknown trader {id:?}")))
            })
            .collect::<Result<_>>()?,
    };
    Ok(Prepared { state, true_theta, agents, schedule })
}

/// Bundle the agent wants now, before any budget limit.
fn desired_trade(state: &MarketState, agent: &Agent) -> Result<Vec<f64>> {
    let profile = &agent.profile;
    match agent.model {
        TraderModel::RiskNeutral => {
            risk_neutral_trade(state, &state.family.mean_from_natural(&profile.belief_theta)?)
        }
        TraderModel::Bayesian => {
            let (mean, size) = agent.sample.as_ref().expect("validated in prepare");
            bayesian_market_trade(state, mean, *size)
        }
        TraderModel::ExpUtility => exp_utility_trade(state, profile),
        TraderModel::BudgetLimited if profile.risk_aversion > 0.0 => exp_utility_trade(state, profile),
        TraderModel::BudgetLimited => Ok(sub(
            &scale(&profile.belief_theta, 1.0 / state.inv_liquidity),
            &state.theta,
        )),
    }
}

fn trade_for(state: &MarketState, agent: &Agent) -> Result<Vec<f64>> {
    let mut delta = desired_trade(state, agent)?;
    if let Budget::Limited(_) = agent.profile.budget {
        if let Family::Categorical(_) = state.family {
            // Buy-only gauge: same prices, and the cost bounds the worst loss.
            let low = delta.iter().copied().fold(f64::INFINITY, f64::min);
            delta.iter_mut().for_each(|d| *d -= low);
        }
        delta = budget_limited_along(state, delta, agent.profile.budget)?.delta;
    }
    Ok(delta)
}

/// One executed trade with its settlement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeEvent {
    pub round: u64,
    pub trader_id: String,
    pub delta: Vec<f64>,
    pub cost: f64,
    pub outcome: Outcome,
    /// Market log loss at the outcome just before and just after this trade.
    /// Absent unless the inverse liquidity is 1.
    pub market_log_loss_before: Option<f64>,
    pub market_log_loss_after: Option<f64>,
    /// Payoff minus cost of this trade: the trader's budget change from it.
    pub myopic_impact: f64,
    /// Budgets after the round settled; `null` means unlimited.
    pub trader_budgets: BTreeMap<String, Option<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    /// Sum over rounds of the log loss of the end-of-round market forecast.
    pub total_market_log_loss: Option<f64>,
    /// Net cash flow of each trader: payoffs minus costs. For budget-limited
    /// traders it is taken as the budget change, so it never falls below
    /// minus the initial budget, even after rounding.
    pub trader_deltas: BTreeMap<String, f64>,
    pub initial_budgets: BTreeMap<String, Option<f64>>,
    pub final_budgets: BTreeMap<String, Option<f64>>,
    pub final_prices: Option<MeanParams>,
    pub final_state: Option<MarketState>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    /// False when a round failed; the report then covers the rounds before it.
    pub valid: bool,
    pub error: Option<String>,
    pub seed: u64,
    pub rounds_completed: u64,
    pub initial_state: Option<MarketState>,
    pub events: Vec<TradeEvent>,
    /// Every executed trade, including those of an aborted round.
    pub trades: Vec<TradeRecord>,
    pub totals: Totals,
}

fn budgets(agents: &[Agent]) -> BTreeMap<String, Option<f64>> {
    agents.iter().map(|a| (a.profile.id.clone(), a.profile.budget.amount())).collect()
}

fn loss(state: &MarketState, theta: &NaturalParams, x: &Outcome) -> Result<Option<f64>> {
    if state.inv_liquidity != 1.0 {
        return Ok(None);
    }
    Ok(Some(-state.family.log_density(theta, x)?))
}

/// Runs the simulation with the config's seed (0 when absent).
pub fn run_simulation(config: &SimConfig) -> Result<SimReport> {
    run_simulation_logged(config, None)
}

/// Like [`run_simulation`], also appending every trade to `log` as JSON lines.
///
/// Config problems are reported as errors before anything executes. A
/// failure during a round ends the run and yields a report with `valid`
/// false.
pub fn run_simulation_logged(config: &SimConfig, log: Option<&Path>) -> Result<SimReport> {
    let Prepared { state, true_theta, mut agents, schedule } = prepare(config)?;
    let seed = config.seed.unwrap_or(0);
    let mut market = Market::new(state.clone())?;
    if let Some(path) = log {
        market = market.with_log_file(path)?;
    }
    let mut outcomes = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SimReport {
        valid: true,
        seed,
        initial_state: Some(state.clone()),
        ..SimReport::default()
    };
    report.totals.initial_budgets = budgets(&agents);
    let mut total_loss = Some(0.0);

    for round in 0..config.rounds {
        let step = run_round(
            &mut market, &mut agents, &schedule, &true_theta, &mut outcomes, round, config.reset_each_round,
            &state.theta,
        );
        match step {
            Ok((events, end_loss)) => {
                report.events.extend(events);
                total_loss = total_loss.zip(end_loss).map(|(a, b)| a + b);
                report.rounds_completed += 1;
            }
            Err(e @ Error::Io(_)) => return Err(e),
            Err(e) => {
                report.valid = false;
                report.error = Some(e.to_string());
                break;
            }
        }
    }

    report.totals.total_market_log_loss = total_loss;
    report.totals.final_budgets = budgets(&agents);
    report.totals.trader_deltas = agents
        .iter()
        .map(|a| {
            let id = &a.profile.id;
            // Budget differences keep the loss bound exact under rounding.
            let net = match (report.totals.initial_budgets[id], report.totals.final_budgets[id]) {
                (Some(start), Some(end)) => end - start,
                _ => a.profile.cash,
            };
            (id.clone(), net)
        })
        .collect();
    report.totals.final_prices = market.prices().ok();
    report.trades = market.trades().to_vec();
    report.totals.final_state = Some(market.into_state());
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn run_round(
    market: &mut Market,
    agents: &mut [Agent],
    schedule: &[usize],
    true_theta: &NaturalParams,
    outcomes: &mut ChaCha8Rng,
    round: u64,
    reset: bool,
    theta0: &NaturalParams,
) -> Result<(Vec<TradeEvent>, Option<f64>)> {
    if reset && round > 0 {
        market.reopen(theta0.clone())?;
    }
    let mut records = Vec::with_capacity(schedule.len());
    for &i in schedule {
        let delta = trade_for(market.state(), &agents[i])?;
        let record = market.execute_in_round(&delta, &agents[i].profile.id, round)?;
        agents[i].profile.record_trade(&record);
        records.push(record);
    }
    let state = market.state();
    let family = state.family;
    let x = family.sample(true_theta, outcomes)?;
    for agent in agents.iter_mut() {
        agent.profile.settle(&family, &x)?;
    }
    let after_settlement = budgets(agents);
    let mut events = Vec::with_capacity(records.len());
    for record in records {
        events.push(TradeEvent {
            market_log_loss_before: loss(state, &record.theta_before, &x)?,
            market_log_loss_after: loss(state, &record.theta_after, &x)?,
            myopic_impact: payoff(&family, &record.delta, &x)? - record.cost,
            round,
            trader_id: record.trader_id,
            delta: record.delta,
            cost: record.cost,
            outcome: x.clone(),
            trader_budgets: after_settlement.clone(),
        });
    }
    Ok((events, loss(state, &state.theta, &x)?))
}

/// Re-executes `records` from `state0` and checks each against the log.
///
/// A record whose `theta_before` differs from the current shares is
/// accepted only as the first trade of a new round that reopened the market
/// at `state0`'s shares. Line numbers in errors count from 1.
pub fn replay_records<'a>(
    records: impl IntoIterator<Item = (usize, &'a TradeRecord)>,
    state0: MarketState,
) -> Result<MarketState> {
    let theta0 = state0.theta.clone();
    let mut market = Market::new(state0).map_err(|e| Error::config(format!("initial state: {e}")))?;
    let mut last_round = None;
    for (line, record) in records {
        let corrupt = |reason: String| Error::CorruptLog { line, reason };
        if record.theta_before != market.state().theta {
            let new_round = last_round.is_some_and(|r| r != record.round);
            if new_round && record.theta_before == theta0 {
                market.reopen(theta0.clone()).map_err(|e| corrupt(e.to_string()))?;
            } else {
                return Err(corrupt("shares before the trade do not match the replayed state".into()));
            }
        }
        let redo = market
            .execute_in_round(&record.delta, &record.trader_id, record.round)
            .map_err(|e| corrupt(e.to_string()))?;
        if redo.cost.to_bits() != record.cost.to_bits() {
            return Err(corrupt(format!("cost {} does not match recomputed {}", record.cost, redo.cost)));
        }
        if redo.theta_after != record.theta_after {
            return Err(corrupt("shares after the trade do not match".into()));
        }
        last_round = Some(record.round);
    }
    Ok(market.into_state())
}

/// Replays a JSON-lines trade log. Blank lines are skipped.
pub fn replay(log: &Path, state0: MarketState) -> Result<MarketState> {
    let reader = BufReader::new(std::fs::File::open(log)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let record: TradeRecord = serde_json::from_str(&text)
            .map_err(|e| Error::CorruptLog { line: line_no, reason: e.to_string() })?;
        records.push((line_no, record));
    }
    replay_records(records.iter().map(|(n, r)| (*n, r)), state0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Column order of CSV reports.
pub const CSV_HEADER: [&str; 9] = [
    "round",
    "trader_id",
    "delta",
    "cost",
    "outcome",
    "market_log_loss_before",
    "market_log_loss_after",
    "myopic_impact",
    "trader_budgets",
];

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn outcome_field(x: &Outcome) -> String {
    match x {
        Outcome::Category(c) => c.to_string(),
        Outcome::Real(v) => v.to_string(),
        Outcome::Point(p) => join(p),
    }
}

fn optional(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the report. JSON holds the full structure; CSV has one row per
/// trade under [`CSV_HEADER`], with vectors joined by `;` and budgets as
/// `id=value` pairs (`id=unlimited` when there is no limit).
pub fn emit_report(report: &SimReport, format: ReportFormat, path: &Path) -> Result<()> {
    match format {
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(report).map_err(std::io::Error::from)?;
            text.push('\n');
            std::fs::write(path, text)?;
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(path).map_err(std::io::Error::from)?;
            w.write_record(CSV_HEADER).map_err(std::io::Error::from)?;
            for e in &report.events {
                let budgets = e
                    .trader_budgets
                    .iter()
                    .map(|(id, b)| format!("{id}={}", b.map_or("unlimited".to_owned(), |v| v.to_string())))
                    .collect::<Vec<_>>()
                    .join(";");
                w.write_record([
                    e.round.to_string(),
                    e.trader_id.clone(),
                    join(&e.delta),
                    e.cost.to_string(),
                    outcome_field(&e.outcome),
                    optional(e.market_log_loss_before),
                    optional(e.market_log_loss_after),
                    e.myopic_impact.to_string(),
                    budgets,
                ])
                .map_err(std::io::Error::from)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
