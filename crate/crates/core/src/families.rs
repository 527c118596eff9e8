//! Registered exponential families.
//!
//! Every family is described by its sufficient statistic `phi`, a base
//! measure and the log-partition function
//!
//! ```text
//! T(theta) = log ∫ exp(<theta, phi(x)>) dnu(x)
//! ```
//!
//! The gradient of `T` maps natural parameters to mean parameters (expected
//! statistics), and its inverse maps back. In the market these are the share
//! vector and the price vector respectively.
//!
//! Base measures are stated relative to Lebesgue (or counting) measure:
//!
//! | id                 | phi(x)          | outcome space | base density  |
//! |--------------------|-----------------|---------------|---------------|
//! | `categorical:K`    | indicator e_x   | {1..K}        | 1 (counting)  |
//! | `exponential-rate` | x               | [0, inf)      | 1             |
//! | `gaussian-moments` | (x, x^2)        | R             | 1             |
//! | `weibull-moment:k` | x^k             | [0, inf)      | x^(k-1)       |
//! | `vmf3`             | x               | unit sphere   | 1 (surface)   |
//!
//! The Weibull base density follows from the substitution `u = x^k`:
//! `∫ exp(theta x^k) x^(k-1) dx = 1 / (k (-theta))`, so
//! `T(theta) = -log(-theta) - log k` on `theta < 0` with mean parameter
//! `E[x^k] = -1/theta`. The resulting density `k r x^(k-1) exp(-r x^k)` with
//! `r = -theta` is the Weibull law with shape `k` and scale `r^(-1/k)`.
//! Because `x^(k-1)` is carried by the base measure, [`Family::log_density`]
//! returns the log density with respect to Lebesgue measure, which adds
//! `(k-1) log x` to `<theta, phi(x)> - T(theta)`.
//!
//! For `gaussian-moments` the base measure is plain Lebesgue measure, so the
//! `log sqrt(2 pi)` constant is part of `T`:
//! `T(theta) = -theta_1^2 / (4 theta_2) - log(-2 theta_2) / 2 + log(2 pi) / 2`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, dot, log_sum_exp, norm, softmax};

/// Parameters closer than this to the boundary of their domain are rejected.
pub const DOMAIN_MARGIN: f64 = 1e-12;

/// Allowed deviation of categorical mean parameters from summing to one.
pub const SIMPLEX_TOL: f64 = 1e-9;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LN_4PI: f64 = 2.531_024_246_969_290_7;

macro_rules! param_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub Vec<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Self {
                Self(values)
            }

            pub fn scalar(value: f64) -> Self {
                Self(vec![value])
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl std::ops::Deref for $name {
            type Target = [f64];

            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(values: Vec<f64>) -> Self {
                Self(values)
            }
        }

        impl From<&[f64]> for $name {
            fn from(values: &[f64]) -> Self {
                Self(values.to_vec())
            }
        }
    };
}

param_vector!(
    /// Natural parameters `theta`; in a market, the outstanding share vector.
    NaturalParams
);
param_vector!(
    /// Mean parameters `mu = E[phi(x)]`; in a market, the price vector.
    MeanParams
);

/// A single observed outcome.
///
/// Categories are 1-based. The untagged encoding writes categories as JSON
/// integers, reals as floats and sphere points as 3-element arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Outcome {
    Category(usize),
    Real(f64),
    Point([f64; 3]),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Category(i) => write!(f, "{i}"),
            Outcome::Real(x) => write!(f, "{x}"),
            Outcome::Point([a, b, c]) => write!(f, "{a};{b};{c}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutcomeSpace {
    Finite(usize),
    NonNegReals,
    Reals,
    UnitSphere3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseMeasure {
    Counting,
    LebesgueNonNeg,
    LebesgueReals,
    SphereSurface,
}

/// A registered exponential family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Family {
    Categorical(usize),
    ExponentialRate,
    GaussianMoments,
    /// Moment `E[x^k]` on the non-negative reals, shape `k > 0`.
    WeibullMoment(f64),
    /// Von Mises-Fisher on the unit sphere in R^3.
    Vmf3,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Categorical(k) => write!(f, "categorical:{k}"),
            Family::ExponentialRate => f.write_str("exponential-rate"),
            Family::GaussianMoments => f.write_str("gaussian-moments"),
            Family::WeibullMoment(k) => write!(f, "weibull-moment:{k}"),
            Family::Vmf3 => f.write_str("vmf3"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((name, arg)) => (name, Some(arg)),
            None => (s, None),
        };
        match (name, arg) {
            ("categorical", Some(k)) => {
                let k: usize = k
                    .parse()
                    .map_err(|_| Error::config(format!("bad category count in {s:?}")))?;
                if k < 2 {
                    return Err(Error::config("categorical families need at least 2 outcomes"));
                }
                Ok(Family::Categorical(k))
            }
            ("exponential-rate", None) => Ok(Family::ExponentialRate),
            ("gaussian-moments", None) => Ok(Family::GaussianMoments),
            ("weibull-moment", Some(k)) => {
                let k: f64 = k
                    .parse()
                    .map_err(|_| Error::config(format!("bad Weibull order in {s:?}")))?;
                if !(k > 0.0 && k.is_finite()) {
                    return Err(Error::config("Weibull moment order must be positive"));
                }
                Ok(Family::WeibullMoment(k))
            }
            ("vmf3", None) => Ok(Family::Vmf3),
            _ => Err(Error::config(format!("unknown family {s:?}"))),
        }
    }
}

impl From<Family> for String {
    fn from(f: Family) -> String {
        f.to_string()
    }
}

impl TryFrom<String> for Family {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse().map_err(|e| match e {
            Error::Config(msg) => msg,
            other => other.to_string(),
        })
    }
}

impl Family {
    /// Dimension of the statistic (number of securities).
    pub fn dim(&self) -> usize {
        match self {
            Family::Categorical(k) => *k,
            Family::ExponentialRate | Family::WeibullMoment(_) => 1,
            Family::GaussianMoments => 2,
            Family::Vmf3 => 3,
        }
    }

    pub fn outcome_space(&self) -> OutcomeSpace {
        match self {
            Family::Categorical(k) => OutcomeSpace::Finite(*k),
            Family::ExponentialRate | Family::WeibullMoment(_) => OutcomeSpace::NonNegReals,
            Family::GaussianMoments => OutcomeSpace::Reals,
            Family::Vmf3 => OutcomeSpace::UnitSphere3,
        }
    }

    pub fn base_measure(&self) -> BaseMeasure {
        match self {
            Family::Categorical(_) => BaseMeasure::Counting,
            Family::ExponentialRate | Family::WeibullMoment(_) => BaseMeasure::LebesgueNonNeg,
            Family::GaussianMoments => BaseMeasure::LebesgueReals,
            Family::Vmf3 => BaseMeasure::SphereSurface,
        }
    }

    /// Whether the statistic is minimal. The categorical indicator statistic
    /// is not: adding a constant to every component of `theta` leaves the
    /// distribution unchanged.
    pub fn is_minimal(&self) -> bool {
        !matches!(self, Family::Categorical(_))
    }

    fn check_len(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::domain(format!(
                "{what} has length {}, {self} needs {}",
                v.len(),
                self.dim()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain(format!("{what} has non-finite entries")));
        }
        Ok(())
    }

    /// Checks that `theta` lies inside the natural domain, at least `margin`
    /// away from its boundary.
    pub fn check_natural(&self, theta: &[f64], margin: f64) -> Result<()> {
        self.check_len(theta, "natural parameter")?;
        let boundary_gap = match self {
            Family::ExponentialRate | Family::WeibullMoment(_) => -theta[0],
            Family::GaussianMoments => -theta[1],
            Family::Categorical(_) | Family::Vmf3 => return Ok(()),
        };
        if boundary_gap > margin {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "natural parameter {theta:?} is outside the domain of {self} (margin {margin:e})"
            )))
        }
    }

    /// Checks that `mu` lies in the interior of the mean domain.
    pub fn check_mean(&self, mu: &[f64]) -> Result<()> {
        self.check_len(mu, "mean parameter")?;
        let inside = match self {
            Family::ExponentialRate | Family::WeibullMoment(_) => mu[0] > DOMAIN_MARGIN,
            Family::GaussianMoments => mu[1] - mu[0] * mu[0] > DOMAIN_MARGIN,
            Family::Categorical(_) => {
                mu.iter().all(|&p| p > DOMAIN_MARGIN)
                    && (mu.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
            }
            Family::Vmf3 => norm(mu) < 1.0 - DOMAIN_MARGIN,
        };
        if inside {
            Ok(())
        } else {
            Err(Error::domain(format!("mean parameter {mu:?} is outside the interior for {self}")))
        }
    }

    /// Checks that `mu` lies in the closure of the mean domain. Empirical
    /// sample means may sit on the boundary (a Bernoulli sample of all ones).
    pub fn check_mean_closure(&self, mu: &[f64]) -> Result<()> {
        self.check_len(mu, "mean parameter")?;
        let inside = match self {
            Family::ExponentialRate | Family::WeibullMoment(_) => mu[0] >= 0.0,
            Family::GaussianMoments => mu[1] - mu[0] * mu[0] >= -SIMPLEX_TOL * mu[1].abs().max(1.0),
            Family::Categorical(_) => {
                mu.iter().all(|&p| p >= 0.0) && (mu.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
            }
            Family::Vmf3 => norm(mu) <= 1.0 + SIMPLEX_TOL,
        };
        if inside {
            Ok(())
        } else {
            Err(Error::domain(format!("mean {mu:?} is not realizable for {self}")))
        }
    }

    /// Validates an outcome against the outcome space. Reals of the wrong
    /// sign for the non-negative families are reported separately by
    /// [`Family::in_support`].
    fn check_outcome_kind(&self, x: &Outcome) -> Result<()> {
        let ok = match (self, x) {
            (Family::Categorical(k), Outcome::Category(i)) => (1..=*k).contains(i),
            (Family::Vmf3, Outcome::Point(p)) => {
                p.iter().all(|v| v.is_finite()) && (norm(p) - 1.0).abs() <= 1e-9
            }
            (
                Family::ExponentialRate | Family::WeibullMoment(_) | Family::GaussianMoments,
                Outcome::Real(v),
            ) => v.is_finite(),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("outcome {x:?} is not in the outcome space of {self}")))
        }
    }

    /// True when `x` is a well-formed outcome with positive base density.
    pub fn in_support(&self, x: &Outcome) -> Result<bool> {
        self.check_outcome_kind(x)?;
        Ok(match (self, x) {
            (Family::ExponentialRate | Family::WeibullMoment(_), Outcome::Real(v)) => *v >= 0.0,
            _ => true,
        })
    }

    /// Builds an outcome from plain numbers: a 1-based index for categorical
    /// families, one real, or three coordinates for `vmf3`.
    pub fn outcome_from_values(&self, values: &[f64]) -> Result<Outcome> {
        let x = match (self, values) {
            (Family::Categorical(_), [i]) if i.fract() == 0.0 && *i >= 1.0 => {
                Outcome::Category(*i as usize)
            }
            (Family::Vmf3, [a, b, c]) => Outcome::Point([*a, *b, *c]),
            (Family::ExponentialRate | Family::WeibullMoment(_) | Family::GaussianMoments, [v]) => {
                Outcome::Real(*v)
            }
            _ => {
                return Err(Error::domain(format!(
                    "cannot read {values:?} as an outcome of {self}"
                )))
            }
        };
        self.check_outcome_kind(&x)?;
        Ok(x)
    }

    /// Evaluates the sufficient statistic `phi(x)`.
    pub fn statistic(&self, x: &Outcome) -> Result<Vec<f64>> {
        if !self.in_support(x)? {
            return Err(Error::domain(format!("outcome {x:?} is outside the support of {self}")));
        }
        Ok(match (self, x) {
            (Family::Categorical(k), Outcome::Category(i)) => {
                let mut e = vec![0.0; *k];
                e[i - 1] = 1.0;
                e
            }
            (Family::ExponentialRate, Outcome::Real(v)) => vec![*v],
            (Family::WeibullMoment(k), Outcome::Real(v)) => vec![v.powf(*k)],
            (Family::GaussianMoments, Outcome::Real(v)) => vec![*v, v * v],
            (Family::Vmf3, Outcome::Point(p)) => p.to_vec(),
            _ => unreachable!("outcome kind checked above"),
        })
    }

    /// Log of the base density relative to Lebesgue or counting measure.
    fn log_base_density(&self, x: &Outcome) -> f64 {
        match (self, x) {
            (Family::WeibullMoment(k), Outcome::Real(v)) if *k != 1.0 => (k - 1.0) * v.ln(),
            _ => 0.0,
        }
    }

    /// The log-partition function `T(theta)`.
    pub fn log_partition(&self, theta: &NaturalParams) -> Result<f64> {
        self.check_natural(theta, DOMAIN_MARGIN)?;
        Ok(self.log_partition_unchecked(theta))
    }

    pub(crate) fn log_partition_unchecked(&self, theta: &[f64]) -> f64 {
        match self {
            Family::Categorical(_) => log_sum_exp(theta),
            Family::ExponentialRate => -(-theta[0]).ln(),
            Family::WeibullMoment(k) => -(-theta[0]).ln() - k.ln(),
            Family::GaussianMoments => {
                let (t1, t2) = (theta[0], theta[1]);
                -t1 * t1 / (4.0 * t2) - 0.5 * (-2.0 * t2).ln() + 0.5 * LN_2PI
            }
            Family::Vmf3 => LN_4PI + vmf::ln_sinhc(norm(theta)),
        }
    }

    /// The gradient map `theta -> mu = E[phi(x)]`.
    pub fn mean_from_natural(&self, theta: &NaturalParams) -> Result<MeanParams> {
        self.check_natural(theta, DOMAIN_MARGIN)?;
        Ok(MeanParams(self.mean_unchecked(theta)))
    }

    pub(crate) fn mean_unchecked(&self, theta: &[f64]) -> Vec<f64> {
        match self {
            Family::Categorical(_) => softmax(theta),
            Family::ExponentialRate | Family::WeibullMoment(_) => vec![-1.0 / theta[0]],
            Family::GaussianMoments => {
                let (t1, t2) = (theta[0], theta[1]);
                let var = -0.5 / t2;
                let mean = t1 * var;
                vec![mean, mean * mean + var]
            }
            Family::Vmf3 => {
                let kappa = norm(theta);
                if kappa == 0.0 {
                    return vec![0.0; 3];
                }
                let r = vmf::mean_length(kappa);
                theta.iter().map(|t| t * r / kappa).collect()
            }
        }
    }

    /// The inverse gradient map `mu -> theta`.
    ///
    /// Categorical natural parameters are only defined up to a common
    /// additive constant; the returned vector sums to zero.
    pub fn natural_from_mean(&self, mu: &MeanParams) -> Result<NaturalParams> {
        self.check_mean(mu)?;
        let theta = match self {
            Family::Categorical(_) => {
                let logs: Vec<f64> = mu.iter().map(|p| p.ln()).collect();
                let center = logs.iter().sum::<f64>() / logs.len() as f64;
                logs.into_iter().map(|l| l - center).collect()
            }
            Family::ExponentialRate | Family::WeibullMoment(_) => vec![-1.0 / mu[0]],
            Family::GaussianMoments => {
                let var = mu[1] - mu[0] * mu[0];
                vec![mu[0] / var, -0.5 / var]
            }
            Family::Vmf3 => {
                let r = norm(mu);
                if r == 0.0 {
                    vec![0.0; 3]
                } else {
                    let kappa = vmf::inverse_mean_length(r)?;
                    mu.iter().map(|m| m * kappa / r).collect()
                }
            }
        };
        let theta = NaturalParams(theta);
        self.check_natural(&theta, DOMAIN_MARGIN)?;
        Ok(theta)
    }

    /// Hessian of `T`, which is the covariance matrix of `phi(x)`.
    pub fn hessian(&self, theta: &NaturalParams) -> Result<Vec<Vec<f64>>> {
        self.check_natural(theta, DOMAIN_MARGIN)?;
        Ok(match self {
            Family::Categorical(k) => {
                let p = softmax(theta);
                (0..*k)
                    .map(|i| {
                        (0..*k)
                            .map(|j| if i == j { p[i] - p[i] * p[j] } else { -p[i] * p[j] })
                            .collect()
                    })
                    .collect()
            }
            Family::ExponentialRate | Family::WeibullMoment(_) => {
                vec![vec![1.0 / (theta[0] * theta[0])]]
            }
            Family::GaussianMoments => {
                let var = -0.5 / theta[1];
                let m = theta[0] * var;
                let c12 = 2.0 * m * var;
                vec![vec![var, c12], vec![c12, 2.0 * var * var + 4.0 * m * m * var]]
            }
            Family::Vmf3 => {
                let kappa = norm(theta);
                let radial = vmf::mean_length_derivative(kappa);
                let tangential = if kappa == 0.0 {
                    1.0 / 3.0
                } else {
                    vmf::mean_length(kappa) / kappa
                };
                let u: Vec<f64> = if kappa == 0.0 {
                    vec![0.0; 3]
                } else {
                    theta.iter().map(|t| t / kappa).collect()
                };
                (0..3)
                    .map(|i| {
                        (0..3)
                            .map(|j| {
                                let eye = if i == j { 1.0 } else { 0.0 };
                                radial * u[i] * u[j] + tangential * (eye - u[i] * u[j])
                            })
                            .collect()
                    })
                    .collect()
            }
        })
    }

    /// Log density of `x` under `theta`, relative to Lebesgue measure for
    /// continuous families, counting measure for categorical ones and
    /// surface measure for `vmf3`.
    pub fn log_density(&self, theta: &NaturalParams, x: &Outcome) -> Result<f64> {
        self.check_natural(theta, DOMAIN_MARGIN)?;
        let phi = self.statistic(x)?;
        Ok(dot(theta, &phi) - self.log_partition_unchecked(theta) + self.log_base_density(x))
    }

    /// Bregman divergence of `T`:
    /// `D_T(a, b) = T(a) - T(b) - <a - b, grad T(b)>`, which equals
    /// `KL(p_b || p_a)`.
    pub fn bregman_divergence(&self, theta_a: &NaturalParams, theta_b: &NaturalParams) -> Result<f64> {
        self.check_natural(theta_a, DOMAIN_MARGIN)?;
        self.check_natural(theta_b, DOMAIN_MARGIN)?;
        Ok(self.bregman_unchecked(theta_a, theta_b))
    }

    pub(crate) fn bregman_unchecked(&self, theta_a: &[f64], theta_b: &[f64]) -> f64 {
        let mu_b = self.mean_unchecked(theta_b);
        let diff = numeric::sub(theta_a, theta_b);
        let d = self.log_partition_unchecked(theta_a) - self.log_partition_unchecked(theta_b)
            - dot(&diff, &mu_b);
        // Rounding can push a zero divergence slightly negative.
        d.max(0.0)
    }

    /// Shifts a categorical `target` by a constant so that it sums to the
    /// same total as `reference`. Other families are returned unchanged.
    pub fn align_gauge(&self, target: &[f64], reference: &[f64]) -> Vec<f64> {
        match self {
            Family::Categorical(k) => {
                let shift = (reference.iter().sum::<f64>() - target.iter().sum::<f64>()) / *k as f64;
                target.iter().map(|t| t + shift).collect()
            }
            _ => target.to_vec(),
        }
    }

    /// Shifts a categorical `target` so that `target - current` is
    /// non-negative with minimum zero: moving there only buys securities, so
    /// the purchase cost bounds the worst-case loss. Other families are
    /// returned unchanged.
    pub fn purchase_gauge(&self, target: &[f64], current: &[f64]) -> Vec<f64> {
        match self {
            Family::Categorical(_) => {
                let shift = current
                    .iter()
                    .zip(target)
                    .map(|(c, t)| c - t)
                    .fold(f64::NEG_INFINITY, f64::max);
                target.iter().map(|t| t + shift).collect()
            }
            _ => target.to_vec(),
        }
    }

    /// Draws one outcome from `p(.; theta)`.
    pub fn sample<R: Rng + ?Sized>(&self, theta: &NaturalParams, rng: &mut R) -> Result<Outcome> {
        if let Family::Vmf3 = self {
            return Err(Error::Unsupported("sampling from vmf3".into()));
        }
        self.check_natural(theta, DOMAIN_MARGIN)?;
        let u: f64 = rng.random();
        Ok(match self {
            Family::Categorical(k) => {
                let masses = softmax(theta);
                let mut acc = 0.0;
                let mut pick = *k;
                for (i, m) in masses.iter().enumerate() {
                    acc += m;
                    if u < acc {
                        pick = i + 1;
                        break;
                    }
                }
                Outcome::Category(pick)
            }
            Family::ExponentialRate => Outcome::Real(-(1.0 - u).ln() / -theta[0]),
            Family::WeibullMoment(k) => Outcome::Real((-(1.0 - u).ln() / -theta[0]).powf(1.0 / k)),
            Family::GaussianMoments => {
                let z: f64 = rng.sample(StandardNormal);
                let var = -0.5 / theta[1];
                Outcome::Real(theta[0] * var + var.sqrt() * z)
            }
            Family::Vmf3 => unreachable!(),
        })
    }
}

/// Closed forms for the 3-dimensional von Mises-Fisher family, written in
/// terms of `kappa = |theta|`. The order-1/2 Bessel function reduces to
/// `sinh`, so `T = log(4 pi sinh(kappa) / kappa)` and the mean length is the
/// Langevin function `coth(kappa) - 1/kappa`.
pub(crate) mod vmf {
    use crate::error::Result;
    use crate::numeric::monotone_newton;

    const SERIES_CUTOFF: f64 = 0.05;

    /// `log(sinh(k) / k)`.
    pub fn ln_sinhc(k: f64) -> f64 {
        if k < SERIES_CUTOFF {
            let k2 = k * k;
            k2 * (1.0 / 6.0 + k2 * (-1.0 / 180.0 + k2 * (1.0 / 2835.0 - k2 / 37800.0)))
        } else if k < 20.0 {
            (k.sinh() / k).ln()
        } else {
            k - std::f64::consts::LN_2 - k.ln() + (-(-2.0 * k).exp()).ln_1p()
        }
    }

    /// `coth(k) - 1/k`.
    pub fn mean_length(k: f64) -> f64 {
        if k < SERIES_CUTOFF {
            let k2 = k * k;
            k * (1.0 / 3.0 + k2 * (-1.0 / 45.0 + k2 * (2.0 / 945.0 - k2 / 4725.0)))
        } else {
            1.0 / k.tanh() - 1.0 / k
        }
    }

    /// `1/k^2 - 1/sinh(k)^2`.
    pub fn mean_length_derivative(k: f64) -> f64 {
        if k < SERIES_CUTOFF {
            let k2 = k * k;
            1.0 / 3.0 + k2 * (-1.0 / 15.0 + k2 * (2.0 / 189.0 - k2 / 675.0))
        } else if k < 350.0 {
            let s = k.sinh();
            1.0 / (k * k) - 1.0 / (s * s)
        } else {
            1.0 / (k * k)
        }
    }

    pub fn inverse_mean_length(r: f64) -> Result<f64> {
        // Closed-form approximation for d = 3 as the starting point.
        let start = r * (3.0 - r * r) / (1.0 - r * r);
        monotone_newton(mean_length, mean_length_derivative, r, start, 0.0)
    }
}
