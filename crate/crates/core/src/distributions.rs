//! Log-densities for the noise and prior families, Student-t sampling and a
//! seedable random source with index-derived sub-streams.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Seeded random stream.
///
/// Sub-streams are a pure function of `(seed, a, b)`, so work split across
/// threads by index draws the same numbers regardless of scheduling.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for the index pair `(a, b)`, e.g. (chain, path).
    /// Does not advance `self`.
    pub fn substream(&self, a: u64, b: u64) -> RandomSource {
        let k = splitmix64(self.seed ^ 0x6a09_e667_f3bc_c909);
        let k = splitmix64(k ^ a.wrapping_mul(0xd6e8_feb8_6659_fd93));
        let k = splitmix64(k ^ b.wrapping_mul(0xa076_1d64_78bd_642f));
        RandomSource::new(k)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform draw on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn check_scale(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
    }
}

/// Log-density of the location-scale Student-t distribution.
pub fn studentt_logpdf(x: f64, nu: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("nu must be > 0, got {nu}")));
    }
    check_scale("sigma", sigma)?;
    let z = (x - mu) / sigma;
    Ok(ln_gamma(0.5 * (nu + 1.0))
        - ln_gamma(0.5 * nu)
        - 0.5 * (nu * PI).ln()
        - sigma.ln()
        - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p())
}

/// Log-density of the half-Cauchy distribution with location 0.
pub fn halfcauchy_logpdf(x: f64, gamma: f64) -> Result<f64> {
    check_scale("gamma", gamma)?;
    if x < 0.0 {
        return Err(Error::OutOfSupport(x));
    }
    let z = x / gamma;
    Ok((2.0 / (PI * gamma)).ln() - (z * z).ln_1p())
}

/// Gaussian log-density.
pub fn normal_logpdf(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    check_scale("sigma", sigma)?;
    let z = (x - mu) / sigma;
    Ok(-LN_SQRT_2PI - sigma.ln() - 0.5 * z * z)
}

/// One Student-t draw: a standard normal divided by the square root of a
/// chi-square over its degrees of freedom.
pub(crate) fn studentt_draw(rs: &mut RandomSource, chi: &ChiSquared<f64>, nu: f64) -> f64 {
    let z = rs.standard_normal();
    let c: f64 = chi.sample(rs);
    z / (c / nu).sqrt()
}

pub(crate) fn chi_squared(nu: f64) -> Result<ChiSquared<f64>> {
    ChiSquared::new(nu).map_err(|e| Error::InvalidParameter(format!("nu = {nu}: {e}")))
}

/// `n` independent Student-t draws.
pub fn studentt_sample(rs: &mut RandomSource, nu: f64, mu: f64, sigma: f64, n: usize) -> Result<Vec<f64>> {
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("nu must be > 0, got {nu}")));
    }
    check_scale("sigma", sigma)?;
    let chi = chi_squared(nu)?;
    Ok((0..n).map(|_| mu + sigma * studentt_draw(rs, &chi, nu)).collect())
}
