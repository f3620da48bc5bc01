//! Convergence diagnostics for one parameter across chains.

use crate::error::{Error, Result};

fn check(chains: &[Vec<f64>]) -> Result<usize> {
    let err = Error::TooFewDraws {
        min_chains: 2,
        min_iters: 4,
    };
    if chains.len() < 2 {
        return Err(err);
    }
    let n = chains[0].len();
    if n < 4 || chains.iter().any(|c| c.len() != n) {
        return Err(err);
    }
    Ok(n)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_var(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Split-chain potential scale reduction.
///
/// Each chain is cut in half (dropping the middle draw of odd-length
/// chains) and `sqrt((W (n-1)/n + B/n) / W)` is computed over the
/// half-chains. Returns `+inf` when the within-chain variance is zero.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    let n_full = check(chains)?;
    let half = n_full / 2;
    let halves: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..half], &c[n_full - half..]]).collect();
    let n = half as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let w = halves.iter().zip(&means).map(|(h, &m)| sample_var(h, m)).sum::<f64>() / halves.len() as f64;
    let b = n * sample_var(&means, mean(&means));
    if !(w > 0.0) {
        return Ok(f64::INFINITY);
    }
    Ok((((n - 1.0) / n * w + b / n) / w).sqrt())
}

/// Effective sample size from multi-chain autocorrelations, truncated at
/// the first negative sum of an adjacent pair of lags, capped at the total
/// number of draws. A parameter with zero variance in every chain has an
/// effective size of 1.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> Result<f64> {
    let n = check(chains)?;
    let m = chains.len();
    let total = (m * n) as f64;

    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains.iter().zip(&means).map(|(c, &mu)| sample_var(c, mu)).sum::<f64>() / m as f64;
    let b = n as f64 * sample_var(&means, mean(&means));
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    if !(var_plus > 0.0) {
        return Ok(1.0);
    }

    // Mean over chains of the biased autocovariance at `lag`.
    let acov = |lag: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, &mu)| {
                c[..n - lag]
                    .iter()
                    .zip(&c[lag..])
                    .map(|(a, b)| (a - mu) * (b - mu))
                    .sum::<f64>()
                    / n as f64
            })
            .sum::<f64>()
            / m as f64
    };
    let rho = |lag: usize| 1.0 - (w - acov(lag)) / var_plus;

    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair < 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    Ok((total / tau).min(total))
}
