//! Generalized logarithmic scoring rules for statistic expectations.
//!
//! A report `mu` is scored by the log density, at the realized outcome, of
//! the maximum-entropy member of the family with expected statistic `mu`.
//! The expected score depends on the forecaster's belief only through its
//! mean, which makes the rule proper for any belief supported on the
//! outcome space, not just beliefs inside the family.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{Family, MeanParams, Outcome};
use crate::numeric::dot;

/// A score value; negative infinity marks an outcome with zero density
/// under the reported distribution.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Score(f64);

impl Score {
    pub const NEG_INFINITY: Score = Score(f64::NEG_INFINITY);

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_neg_infinite(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_neg_infinite() {
            f.write_str("-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Uncentered moments `(m, m^2 + v)` for a Gaussian report given as mean
/// and variance.
pub fn moments_from_mean_variance(mean: f64, variance: f64) -> Result<MeanParams> {
    if !(variance > 0.0) || !mean.is_finite() || !variance.is_finite() {
        return Err(Error::domain(format!("invalid mean/variance ({mean}, {variance})")));
    }
    Ok(MeanParams(vec![mean, mean * mean + variance]))
}

/// `S(mu, x) = log p(x; mu)`.
///
/// Outcomes of the right kind but outside the support (a negative real for
/// the non-negative families) score negative infinity; malformed outcomes
/// are a domain error.
pub fn log_score(fam: &Family, mu: &MeanParams, x: &Outcome) -> Result<Score> {
    let theta = fam.natural_from_mean(mu)?;
    if !fam.in_support(x)? {
        return Ok(Score::NEG_INFINITY);
    }
    fam.log_density(&theta, x).map(Score)
}

/// Expected score of `report_mu` under a belief with mean `belief_mu`:
/// `<theta_hat, mu> - T(theta_hat)`.
///
/// For `weibull-moment:k` with `k != 1` the report-independent term
/// `(k-1) E[log x]` is left out, since it is not a function of the belief's
/// mean.
pub fn expected_score(fam: &Family, report_mu: &MeanParams, belief_mu: &MeanParams) -> Result<f64> {
    fam.check_mean(belief_mu)?;
    let theta_hat = fam.natural_from_mean(report_mu)?;
    Ok(dot(&theta_hat, belief_mu) - fam.log_partition_unchecked(&theta_hat))
}

/// Expected loss from reporting `report_mu` instead of the belief mean.
/// Equals the Bregman divergence `D_T(theta_hat, theta)`.
pub fn score_regret(fam: &Family, belief_mu: &MeanParams, report_mu: &MeanParams) -> Result<f64> {
    Ok(expected_score(fam, belief_mu, belief_mu)? - expected_score(fam, report_mu, belief_mu)?)
}
