//! State filters, log-posteriors and forecast path simulation for the two
//! exponential-smoothing models.
//!
//! Both models share the seasonal bookkeeping: the seasonal index consumed
//! at time `t` is the one written at time `t - m`, with the first `m`
//! indices taken from [`InitialState`](crate::series::InitialState). A period
//! of 1 disables seasonality; the index stays at zero and `rho_s` is unused.

pub mod dlt;
pub mod lgt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{chi_squared, studentt_draw, RandomSource};
use crate::error::{Error, Result};
use crate::series::{InitialState, TimeSeries};

pub use dlt::{
    dlt_filter, dlt_forecast, dlt_log_posterior, global_trend_eval, DltParams, DltPriors, GlobalTrendKind,
    RegressionPrior,
};
pub use lgt::{lgt_filter, lgt_forecast, lgt_log_posterior, LgtParams, LgtPriors};

/// Maximum number of fresh-noise restarts for a forecast path whose level
/// collapses.
pub const MAX_PATH_RETRIES: usize = 100;

/// States after the last training observation, enough to continue the
/// recursion without the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalState {
    pub level: f64,
    pub trend: f64,
    /// Seasonal indices for times `T+1 ..= T+m`, in that order.
    pub seasonal: Vec<f64>,
    /// Number of observations consumed (`T`).
    pub t_end: usize,
}

/// Per-step output of a filter run. All vectors have one entry per
/// observation, in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub levels: Vec<f64>,
    pub trends: Vec<f64>,
    /// Seasonal index consumed at each step.
    pub seasonals: Vec<f64>,
    pub one_step_means: Vec<f64>,
    /// Regression contribution `r_t` (all zero for models without regressors).
    pub regression: Vec<f64>,
    pub residuals: Vec<f64>,
    pub log_likelihood: f64,
    pub final_state: FinalState,
}

/// One step of a filter recursion, as reported to observers.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepRecord {
    pub level: f64,
    pub trend: f64,
    pub seasonal: f64,
    pub mean: f64,
    pub regression: f64,
    pub residual: f64,
}

#[derive(Default)]
pub(crate) struct Recorder {
    levels: Vec<f64>,
    trends: Vec<f64>,
    seasonals: Vec<f64>,
    means: Vec<f64>,
    regression: Vec<f64>,
    residuals: Vec<f64>,
}

impl Recorder {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            levels: Vec::with_capacity(n),
            trends: Vec::with_capacity(n),
            seasonals: Vec::with_capacity(n),
            means: Vec::with_capacity(n),
            regression: Vec::with_capacity(n),
            residuals: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, r: StepRecord) {
        self.levels.push(r.level);
        self.trends.push(r.trend);
        self.seasonals.push(r.seasonal);
        self.means.push(r.mean);
        self.regression.push(r.regression);
        self.residuals.push(r.residual);
    }

    pub fn finish(self, log_likelihood: f64, final_state: FinalState) -> FilterResult {
        FilterResult {
            levels: self.levels,
            trends: self.trends,
            seasonals: self.seasonals,
            one_step_means: self.means,
            regression: self.regression,
            residuals: self.residuals,
            log_likelihood,
            final_state,
        }
    }
}

/// Rolling buffer of the next `m` seasonal indices.
#[derive(Debug, Clone)]
pub(crate) struct SeasonalRing {
    slots: Vec<f64>,
    pos: usize,
    active: bool,
}

impl SeasonalRing {
    pub fn new(indices: &[f64]) -> Self {
        let active = indices.len() > 1;
        Self {
            slots: if active { indices.to_vec() } else { vec![0.0] },
            pos: 0,
            active,
        }
    }

    pub fn current(&self) -> f64 {
        self.slots[self.pos]
    }

    /// Replaces the index just consumed with the one for `t + m` and moves on.
    pub fn advance(&mut self, next: impl FnOnce() -> f64) {
        if self.active {
            self.slots[self.pos] = next();
            self.pos = (self.pos + 1) % self.slots.len();
        }
    }

    pub fn upcoming(&self) -> Vec<f64> {
        let n = self.slots.len();
        (0..n).map(|k| self.slots[(self.pos + k) % n]).collect()
    }
}

pub(crate) fn check_initial_state(series: &TimeSeries, init: &InitialState) -> Result<()> {
    if init.seasonal.len() != series.period() {
        return Err(Error::InvalidParameter(format!(
            "initial seasonal length {} does not match period {}",
            init.seasonal.len(),
            series.period()
        )));
    }
    if !init.level.is_finite() || !init.trend.is_finite() {
        return Err(Error::InvalidParameter("non-finite initial state".into()));
    }
    Ok(())
}

pub(crate) fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must lie in (0, 1)")))
    }
}

pub(crate) fn check_closed(name: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if v >= lo && v <= hi {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} = {v} must lie in [{lo}, {hi}]"
        )))
    }
}

pub(crate) fn check_noise(nu: f64, sigma: f64) -> Result<()> {
    check_closed("nu", nu, 2.0, 40.0)?;
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("sigma = {sigma} must be > 0")))
    }
}

/// Half-Cauchy scale for the noise prior: `max(0.01, 0.3 * sd(y))`.
pub fn data_driven_gamma0(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.01;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (0.3 * var.sqrt()).max(0.01)
}

/// Whether forecast paths carry simulated noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForecastMode {
    /// A single zero-noise path.
    Deterministic,
    Stochastic,
}

/// Simulated forecast paths (`n_paths x h`).
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastDistribution {
    paths: Vec<Vec<f64>>,
}

impl ForecastDistribution {
    pub fn from_paths(paths: Vec<Vec<f64>>) -> Self {
        Self { paths }
    }

    pub fn paths(&self) -> &[Vec<f64>] {
        &self.paths
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn horizon(&self) -> usize {
        self.paths.first().map_or(0, Vec::len)
    }

    /// Applies `f` to every simulated value, e.g. to leave log space.
    pub fn map_values(mut self, f: impl Fn(f64) -> f64) -> Self {
        for p in &mut self.paths {
            p.iter_mut().for_each(|v| *v = f(*v));
        }
        self
    }

    fn step_values(&self, k: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self.paths.iter().map(|p| p[k]).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.n_paths() as f64;
        (0..self.horizon())
            .map(|k| self.paths.iter().map(|p| p[k]).sum::<f64>() / n)
            .collect()
    }

    pub fn median(&self) -> Vec<f64> {
        (0..self.horizon())
            .map(|k| quantile_sorted(&self.step_values(k), 0.5))
            .collect()
    }

    /// Per-step quantiles, `h` rows of `levels.len()` values. Linear
    /// interpolation between order statistics.
    pub fn quantiles(&self, levels: &[f64]) -> Result<Vec<Vec<f64>>> {
        if let Some(&q) = levels.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(Error::InvalidParameter(format!("quantile level {q} outside [0, 1]")));
        }
        Ok((0..self.horizon())
            .map(|k| {
                let sorted = self.step_values(k);
                levels.iter().map(|&q| quantile_sorted(&sorted, q)).collect()
            })
            .collect())
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Mutable state carried along one simulated path.
#[derive(Debug, Clone)]
pub(crate) struct PathState {
    pub level: f64,
    pub trend: f64,
    pub ring: SeasonalRing,
}

impl PathState {
    pub fn from_final(state: &FinalState) -> Self {
        Self {
            level: state.level,
            trend: state.trend,
            ring: SeasonalRing::new(&state.seasonal),
        }
    }
}

/// Simulates `n_paths` paths of length `h`. `step` advances the state at
/// absolute time `t` given the noise draw, returning the simulated
/// observation or `None` if the path became infeasible.
///
/// Path `p`, attempt `a` draws from `rs.substream(p, a)`, so the output does
/// not depend on how paths are scheduled across threads.
pub(crate) fn simulate_paths<F>(
    state: &FinalState,
    h: usize,
    n_paths: usize,
    rs: &RandomSource,
    mode: ForecastMode,
    nu: f64,
    sigma: f64,
    step: F,
) -> Result<ForecastDistribution>
where
    F: Fn(&mut PathState, usize, f64) -> Option<f64> + Sync,
{
    if h < 1 {
        return Err(Error::InvalidParameter("forecast horizon must be >= 1".into()));
    }
    match mode {
        ForecastMode::Deterministic => {
            let path =
                simulate_one(state, h, None, nu, sigma, &step).ok_or(Error::PathInfeasible { path: 0, retries: 0 })?;
            Ok(ForecastDistribution::from_paths(vec![path]))
        }
        ForecastMode::Stochastic => {
            if n_paths < 1 {
                return Err(Error::InvalidParameter("n_paths must be >= 1".into()));
            }
            let paths = (0..n_paths)
                .into_par_iter()
                .map(|p| simulate_with_retries(state, h, rs, p, nu, sigma, &step))
                .collect::<Result<Vec<_>>>()?;
            Ok(ForecastDistribution::from_paths(paths))
        }
    }
}

pub(crate) fn simulate_with_retries<F>(
    state: &FinalState,
    h: usize,
    rs: &RandomSource,
    path: usize,
    nu: f64,
    sigma: f64,
    step: &F,
) -> Result<Vec<f64>>
where
    F: Fn(&mut PathState, usize, f64) -> Option<f64>,
{
    for attempt in 0..=MAX_PATH_RETRIES {
        let mut sub = rs.substream(path as u64, attempt as u64);
        if let Some(p) = simulate_one(state, h, Some(&mut sub), nu, sigma, step) {
            return Ok(p);
        }
    }
    Err(Error::PathInfeasible {
        path,
        retries: MAX_PATH_RETRIES,
    })
}

fn simulate_one<F>(
    state: &FinalState,
    h: usize,
    mut noise: Option<&mut RandomSource>,
    nu: f64,
    sigma: f64,
    step: &F,
) -> Option<Vec<f64>>
where
    F: Fn(&mut PathState, usize, f64) -> Option<f64>,
{
    let chi = chi_squared(nu).ok()?;
    let mut ps = PathState::from_final(state);
    let mut out = Vec::with_capacity(h);
    for k in 0..h {
        let eps = match noise.as_deref_mut() {
            Some(rs) => sigma * studentt_draw(rs, &chi, nu),
            None => 0.0,
        };
        let y = step(&mut ps, state.t_end + k + 1, eps)?;
        if !y.is_finite() {
            return None;
        }
        out.push(y);
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_rotates_through_phases() {
        let mut ring = SeasonalRing::new(&[1.0, 2.0, 3.0]);
        assert_eq!(ring.current(), 1.0);
        ring.advance(|| 10.0);
        assert_eq!(ring.current(), 2.0);
        assert_eq!(ring.upcoming(), vec![2.0, 3.0, 10.0]);
    }

    #[test]
    fn inactive_ring_stays_zero() {
        let mut ring = SeasonalRing::new(&[0.0]);
        ring.advance(|| 5.0);
        assert_eq!(ring.current(), 0.0);
    }

    #[test]
    fn quantiles_are_ordered() {
        let paths = (0..101).map(|i| vec![i as f64, -(i as f64)]).collect();
        let fd = ForecastDistribution::from_paths(paths);
        let q = fd.quantiles(&[0.05, 0.5, 0.95]).unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q[0], vec![5.0, 50.0, 95.0]);
        assert_eq!(q[1], vec![-95.0, -50.0, -5.0]);
        assert_eq!(fd.median(), vec![50.0, -50.0]);
        assert!(fd.quantiles(&[1.5]).is_err());
    }

    #[test]
    fn gamma0_floor() {
        assert_eq!(data_driven_gamma0(&[3.0; 10]), 0.01);
        let g = data_driven_gamma0(&[1.0, 3.0]);
        assert!((g - 0.3 * 2f64.sqrt()).abs() < 1e-12);
    }
}
