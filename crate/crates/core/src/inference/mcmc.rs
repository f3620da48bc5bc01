//! Adaptive random-walk Metropolis.
//!
//! Each chain works in unconstrained coordinates with target
//! `log p(from_unconstrained(u)) + log|J(u)|`. During warmup the proposal
//! covariance tracks the empirical covariance of the warmup draws and a
//! global scale is tuned by Robbins-Monro toward a target acceptance rate.
//! The kernel is frozen when warmup ends, so the retained draws come from a
//! fixed Metropolis kernel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::transform::ParamSpec;
use crate::distributions::RandomSource;
use crate::error::{Error, Result};

/// Post-warmup acceptance below this marks a chain as stuck.
pub const MIN_ACCEPTANCE: f64 = 0.01;

/// Draws in constrained space, laid out chain-major:
/// `values[(chain * n_draws + iter) * n_params + param]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub n_chains: usize,
    pub n_draws: usize,
    pub n_params: usize,
    pub warmup: usize,
    pub acceptance_rate: Vec<f64>,
    pub values: Vec<f64>,
}

impl PosteriorDraws {
    pub fn draw(&self, chain: usize, iter: usize) -> &[f64] {
        let start = (chain * self.n_draws + iter) * self.n_params;
        &self.values[start..start + self.n_params]
    }

    /// Draw `k` of the pooled sequence (chains concatenated).
    pub fn pooled(&self, k: usize) -> &[f64] {
        &self.values[k * self.n_params..(k + 1) * self.n_params]
    }

    pub fn total_draws(&self) -> usize {
        self.n_chains * self.n_draws
    }

    /// One parameter, split by chain.
    pub fn param_chains(&self, param: usize) -> Vec<Vec<f64>> {
        (0..self.n_chains)
            .map(|c| (0..self.n_draws).map(|i| self.draw(c, i)[param]).collect())
            .collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.total_draws() as f64;
        let mut m = vec![0.0; self.n_params];
        for k in 0..self.total_draws() {
            for (mi, v) in m.iter_mut().zip(self.pooled(k)) {
                *mi += v / n;
            }
        }
        m
    }
}

fn target_acceptance(dim: usize) -> f64 {
    if dim == 1 {
        0.44
    } else {
        0.3
    }
}

/// Lower-triangular Cholesky factor; `None` if not positive definite.
fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Running mean and covariance (Welford).
struct Moments {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<Vec<f64>>,
}

impl Moments {
    fn new(d: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; d],
            m2: vec![vec![0.0; d]; d],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let d = x.len();
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        for i in 0..d {
            self.mean[i] += delta[i] / self.n as f64;
        }
        for i in 0..d {
            for j in 0..d {
                self.m2[i][j] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    /// Sample covariance shrunk toward a small multiple of the identity.
    fn regularized_cov(&self) -> Vec<Vec<f64>> {
        let n = self.n as f64;
        let d = self.mean.len();
        let w = n / (n + 5.0);
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let c = w * self.m2[i][j] / (n - 1.0);
                        if i == j {
                            c + 1e-3 * (5.0 / (n + 5.0))
                        } else {
                            c
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

struct Chain<'a, F> {
    posterior: &'a F,
    spec: &'a ParamSpec,
    rng: RandomSource,
    u: Vec<f64>,
    lp: f64,
    chol: Vec<Vec<f64>>,
    log_scale: f64,
}

impl<F: Fn(&[f64]) -> f64> Chain<'_, F> {
    fn target(&self, u: &[f64]) -> f64 {
        let v = (self.posterior)(&self.spec.from_unconstrained(u)) + self.spec.log_jacobian(u);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    /// One Metropolis step; returns the acceptance probability and whether
    /// the proposal was taken.
    fn step(&mut self) -> (f64, bool) {
        let d = self.u.len();
        let z: Vec<f64> = (0..d).map(|_| self.rng.standard_normal()).collect();
        let scale = self.log_scale.exp();
        let prop: Vec<f64> = (0..d)
            .map(|i| self.u[i] + scale * (0..=i).map(|k| self.chol[i][k] * z[k]).sum::<f64>())
            .collect();
        let lp = self.target(&prop);
        let log_ratio = lp - self.lp;
        let alpha = if log_ratio.is_nan() {
            0.0
        } else {
            log_ratio.min(0.0).exp()
        };
        let accept = self.rng.uniform() < alpha;
        if accept {
            self.u = prop;
            self.lp = lp;
        }
        (alpha, accept)
    }
}

/// Runs `n_chains` independent chains from (jittered copies of) `init`.
///
/// Chain `c` draws from sub-stream `c` of `rs` and chains run in parallel;
/// the output does not depend on thread scheduling.
pub fn mcmc_sample<F>(
    posterior: F,
    spec: &ParamSpec,
    init: &[f64],
    n_chains: usize,
    n_warmup: usize,
    n_draws: usize,
    rs: &RandomSource,
) -> Result<PosteriorDraws>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n_chains == 0 || n_draws == 0 {
        return Err(Error::InvalidParameter("need at least one chain and one draw".into()));
    }
    let u0 = spec.to_unconstrained(init)?;
    let d = spec.len();
    let lp0 = posterior(init);
    if !lp0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "posterior is not finite at the initial point ({lp0})"
        )));
    }
    let target_acc = target_acceptance(d);

    let chains: Vec<Result<(Vec<f64>, f64)>> = (0..n_chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = rs.substream(c as u64, 0x6d63_6d63);
            let mut chain = Chain {
                posterior: &posterior,
                spec,
                rng: rng.clone(),
                u: u0.clone(),
                lp: 0.0,
                chol: (0..d)
                    .map(|i| (0..d).map(|j| if i == j { 0.1 } else { 0.0 }).collect())
                    .collect(),
                log_scale: (2.38 / (d as f64).sqrt()).ln(),
            };
            // Small dispersion around the start so the chains do not coincide.
            let jittered: Vec<f64> = u0.iter().map(|x| x + 0.1 * rng.standard_normal()).collect();
            let lj = chain.target(&jittered);
            if lj.is_finite() {
                chain.u = jittered;
                chain.lp = lj;
            } else {
                chain.lp = chain.target(&u0);
            }
            chain.rng = rng;

            let mut moments = Moments::new(d);
            let adapt_from = n_warmup / 10;
            let mut using_empirical = false;
            let mut since_reset = 0usize;
            for i in 0..n_warmup {
                let (alpha, _) = chain.step();
                since_reset += 1;
                let gain = 1.0 / (since_reset as f64).powf(0.6);
                chain.log_scale += gain * (alpha - target_acc);
                if i < adapt_from {
                    continue;
                }
                moments.push(&chain.u);
                if moments.n >= 2 * d + 10 && (i - adapt_from).is_multiple_of(25) {
                    if let Some(l) = cholesky(&moments.regularized_cov()) {
                        chain.chol = l;
                        if !using_empirical {
                            chain.log_scale = (2.38 / (d as f64).sqrt()).ln();
                            since_reset = 0;
                            using_empirical = true;
                        }
                    }
                }
            }

            let mut out = Vec::with_capacity(n_draws * d);
            let mut accepted = 0usize;
            for _ in 0..n_draws {
                if chain.step().1 {
                    accepted += 1;
                }
                out.extend(spec.from_unconstrained(&chain.u));
            }
            let rate = accepted as f64 / n_draws as f64;
            if rate < MIN_ACCEPTANCE {
                return Err(Error::ChainStuck { chain: c, rate });
            }
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("chain {c} produced non-finite draws")));
            }
            Ok((out, rate))
        })
        .collect();

    let mut values = Vec::with_capacity(n_chains * n_draws * d);
    let mut acceptance_rate = Vec::with_capacity(n_chains);
    for ch in chains {
        let (v, r) = ch?;
        values.extend(v);
        acceptance_rate.push(r);
    }
    Ok(PosteriorDraws {
        n_chains,
        n_draws,
        n_params: d,
        warmup: n_warmup,
        acceptance_rate,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::transform::Bound;

    #[test]
    fn gaussian_moments() {
        let spec = ParamSpec::from_pairs([("x", Bound::Unbounded)]).unwrap();
        let lp = |x: &[f64]| -0.5 * ((x[0] - 3.0) / 2.0).powi(2);
        let d = mcmc_sample(lp, &spec, &[0.0], 4, 1000, 2000, &RandomSource::new(1)).unwrap();
        let xs: Vec<f64> = d.values.clone();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean - 3.0).abs() < 0.1, "mean {mean}");
        assert!((sd - 2.0).abs() < 0.3, "sd {sd}");
        for r in &d.acceptance_rate {
            assert!((0.1..=0.6).contains(r), "acceptance {r}");
        }
    }

    #[test]
    fn reproducible() {
        let spec = ParamSpec::from_pairs([("x", Bound::Unbounded), ("s", Bound::Positive)]).unwrap();
        let lp = |x: &[f64]| -0.5 * x[0] * x[0] - x[1];
        let rs = RandomSource::new(77);
        let a = mcmc_sample(lp, &spec, &[0.0, 1.0], 3, 200, 300, &rs).unwrap();
        let b = mcmc_sample(lp, &spec, &[0.0, 1.0], 3, 200, 300, &rs).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flat_unit_interval_is_uniform() {
        let spec = ParamSpec::from_pairs([("p", Bound::UnitInterval)]).unwrap();
        let d = mcmc_sample(|_: &[f64]| 0.0, &spec, &[0.5], 4, 1000, 2000, &RandomSource::new(3)).unwrap();
        let mean = d.values.iter().sum::<f64>() / d.values.len() as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn rejects_infeasible_start() {
        let spec = ParamSpec::from_pairs([("x", Bound::Unbounded)]).unwrap();
        assert!(mcmc_sample(
            |_: &[f64]| f64::NEG_INFINITY,
            &spec,
            &[0.0],
            1,
            10,
            10,
            &RandomSource::new(0)
        )
        .is_err());
    }

    #[test]
    fn stuck_chain_detected() {
        // A needle: only the exact start is feasible.
        let spec = ParamSpec::from_pairs([("x", Bound::Unbounded)]).unwrap();
        let lp = |x: &[f64]| if x[0] == 0.0 { 0.0 } else { f64::NEG_INFINITY };
        let r = mcmc_sample(lp, &spec, &[0.0], 1, 50, 100, &RandomSource::new(0));
        assert!(matches!(r, Err(Error::ChainStuck { .. })));
    }
}
