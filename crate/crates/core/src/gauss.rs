//! Small Gaussian helpers.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// `log N(x; mean, var)`.
#[inline]
pub fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

#[inline]
pub fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + sd * z
}

#[inline]
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
