#![allow(dead_code)]

#[path = "../../src/oracle.rs"]
pub mod oracle;

use expfam_market::{Family, NaturalParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every registered family, with a few parameter choices.
pub fn all_families() -> Vec<Family> {
    vec![
        Family::Categorical(2),
        Family::Categorical(5),
        Family::ExponentialRate,
        Family::GaussianMoments,
        Family::WeibullMoment(0.5),
        Family::WeibullMoment(2.0),
        Family::Vmf3,
    ]
}

/// A random natural parameter comfortably inside the domain.
pub fn random_natural<R: Rng>(family: &Family, rng: &mut R) -> NaturalParams {
    let theta = match family {
        Family::Categorical(k) => (0..*k).map(|_| rng.random_range(-4.0..4.0)).collect(),
        Family::ExponentialRate | Family::WeibullMoment(_) => vec![rng.random_range(-5.0..-0.2)],
        Family::GaussianMoments => vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..-0.2)],
        Family::Vmf3 => (0..3).map(|_| rng.random_range(-5.0..5.0)).collect(),
    };
    NaturalParams(theta)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Removes the mean, fixing the additive gauge of categorical parameters.
pub fn centered(v: &[f64]) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - m).collect()
}

/// Exponential-rate density, written out independently of the library.
pub fn exp_density(theta: f64, x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else {
        -theta * (theta * x).exp()
    }
}

/// Gaussian density for natural parameters `(t1, t2)`.
pub fn gauss_density(t: &[f64], x: f64) -> f64 {
    let var = -0.5 / t[1];
    let mean = t[0] * var;
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}
