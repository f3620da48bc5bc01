//! Local-and-global-trend model.
//!
//! ```text
//! y_t      = mu_t + s_t + eps_t,        eps_t ~ Student(nu, 0, sigma)
//! mu_t     = l_{t-1} + xi1 b_{t-1} + xi2 l_{t-1}^lambda
//! l_t      = rho_l (y_t - s_t) + (1 - rho_l) l_{t-1}
//! b_t      = rho_b (l_t - l_{t-1}) + (1 - rho_b) b_{t-1}
//! s_{t+m}  = rho_s (y_t - l_t) + (1 - rho_s) s_t
//! sigma    ~ HalfCauchy(0, gamma0)
//! ```
//!
//! The power term needs a positive level, so observations must be positive
//! and any run in which a level drops to zero or below is infeasible.

use serde::{Deserialize, Serialize};

use super::{
    check_closed, check_initial_state, check_noise, check_open_unit, simulate_paths, FilterResult, FinalState,
    ForecastDistribution, ForecastMode, PathState, Recorder, SeasonalRing, StepRecord,
};
use crate::distributions::{halfcauchy_logpdf, studentt_logpdf, RandomSource};
use crate::error::{Error, Result};
use crate::series::{InitialState, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LgtParams {
    pub rho_l: f64,
    pub rho_b: f64,
    pub rho_s: f64,
    /// Local-trend coefficient, in [0, 1].
    pub xi1: f64,
    /// Global-trend coefficient.
    pub xi2: f64,
    /// Global-trend exponent, in [0, 1].
    pub lambda: f64,
    /// Student-t degrees of freedom, in [2, 40].
    pub nu: f64,
    pub sigma: f64,
}

impl LgtParams {
    pub const NAMES: [&'static str; 8] = ["rho_l", "rho_b", "rho_s", "xi1", "xi2", "lambda", "nu", "sigma"];

    pub fn validate(&self) -> Result<()> {
        check_open_unit("rho_l", self.rho_l)?;
        check_open_unit("rho_b", self.rho_b)?;
        check_open_unit("rho_s", self.rho_s)?;
        check_closed("xi1", self.xi1, 0.0, 1.0)?;
        if !self.xi2.is_finite() {
            return Err(Error::InvalidParameter(format!("xi2 = {} must be finite", self.xi2)));
        }
        check_closed("lambda", self.lambda, 0.0, 1.0)?;
        check_noise(self.nu, self.sigma)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.rho_l,
            self.rho_b,
            self.rho_s,
            self.xi1,
            self.xi2,
            self.lambda,
            self.nu,
            self.sigma,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != Self::NAMES.len() {
            return Err(Error::ArityMismatch {
                expected: Self::NAMES.len(),
                got: v.len(),
            });
        }
        Ok(Self {
            rho_l: v[0],
            rho_b: v[1],
            rho_s: v[2],
            xi1: v[3],
            xi2: v[4],
            lambda: v[5],
            nu: v[6],
            sigma: v[7],
        })
    }

    fn mean(&self, level: f64, trend: f64) -> f64 {
        level + self.xi1 * trend + self.xi2 * level.powf(self.lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LgtPriors {
    /// Half-Cauchy scale of the noise prior.
    pub gamma0: f64,
}

impl LgtPriors {
    pub fn from_series(series: &TimeSeries) -> Self {
        Self {
            gamma0: super::data_driven_gamma0(series.values()),
        }
    }
}

/// Shared recursion; returns the log-likelihood and final state.
fn run(
    series: &TimeSeries,
    init: &InitialState,
    params: &LgtParams,
    mut observe: impl FnMut(StepRecord),
) -> Result<(f64, FinalState)> {
    params.validate()?;
    check_initial_state(series, init)?;
    if let Some(index) = series.values().iter().position(|&y| y <= 0.0) {
        return Err(Error::NonPositiveObservation { index });
    }
    if init.level <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "initial level {} must be > 0",
            init.level
        )));
    }

    let p = params;
    let mut level = init.level;
    let mut trend = init.trend;
    let mut ring = SeasonalRing::new(&init.seasonal);
    let mut loglik = 0.0;

    for (i, &y) in series.values().iter().enumerate() {
        let s = ring.current();
        let mu = p.mean(level, trend);
        let eps = y - mu - s;
        loglik += studentt_logpdf(eps, p.nu, 0.0, p.sigma)?;

        let new_level = p.rho_l * (y - s) + (1.0 - p.rho_l) * level;
        if !(new_level > 0.0) {
            return Err(Error::LevelCollapse { step: i + 1 });
        }
        let new_trend = p.rho_b * (new_level - level) + (1.0 - p.rho_b) * trend;
        ring.advance(|| p.rho_s * (y - new_level) + (1.0 - p.rho_s) * s);
        level = new_level;
        trend = new_trend;

        observe(StepRecord {
            level,
            trend,
            seasonal: s,
            mean: mu,
            regression: 0.0,
            residual: eps,
        });
    }

    Ok((
        loglik,
        FinalState {
            level,
            trend,
            seasonal: ring.upcoming(),
            t_end: series.len(),
        },
    ))
}

/// Runs the recursion over the whole series, keeping every state.
pub fn lgt_filter(series: &TimeSeries, init: &InitialState, params: &LgtParams) -> Result<FilterResult> {
    let mut rec = Recorder::with_capacity(series.len());
    let (ll, fin) = run(series, init, params, |r| rec.push(r))?;
    Ok(rec.finish(ll, fin))
}

/// Log-likelihood plus the noise prior. Bounded parameters carry flat
/// priors. An infeasible level path maps to `-inf`.
pub fn lgt_log_posterior(
    series: &TimeSeries,
    init: &InitialState,
    params: &LgtParams,
    priors: &LgtPriors,
) -> Result<f64> {
    let prior = halfcauchy_logpdf(params.sigma, priors.gamma0)?;
    match run(series, init, params, |_| {}) {
        Ok((ll, _)) => Ok(ll + prior),
        Err(Error::LevelCollapse { .. }) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

pub(crate) fn lgt_step(params: &LgtParams) -> impl Fn(&mut PathState, usize, f64) -> Option<f64> + Sync + '_ {
    move |ps, _t, eps| {
        let p = params;
        let s = ps.ring.current();
        let y = p.mean(ps.level, ps.trend) + s + eps;
        let level = p.rho_l * (y - s) + (1.0 - p.rho_l) * ps.level;
        if !(level > 0.0) {
            return None;
        }
        ps.trend = p.rho_b * (level - ps.level) + (1.0 - p.rho_b) * ps.trend;
        ps.ring.advance(|| p.rho_s * (y - level) + (1.0 - p.rho_s) * s);
        ps.level = level;
        Some(y)
    }
}

/// Simulates forward from `state`, feeding each simulated observation back
/// through the update equations.
pub fn lgt_forecast(
    state: &FinalState,
    params: &LgtParams,
    h: usize,
    n_paths: usize,
    rs: &RandomSource,
    mode: ForecastMode,
) -> Result<ForecastDistribution> {
    params.validate()?;
    if !(state.level > 0.0) {
        return Err(Error::LevelCollapse { step: state.t_end });
    }
    simulate_paths(state, h, n_paths, rs, mode, params.nu, params.sigma, lgt_step(params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::validate_series;

    fn series(values: Vec<f64>, m: usize) -> TimeSeries {
        let ts = (1..=values.len() as i64).collect();
        validate_series(ts, values, None, m).unwrap()
    }

    fn params() -> LgtParams {
        LgtParams {
            rho_l: 0.5,
            rho_b: 0.5,
            rho_s: 0.3,
            xi1: 1.0,
            xi2: 0.0,
            lambda: 0.5,
            nu: 5.0,
            sigma: 1.0,
        }
    }

    #[test]
    fn hand_recursion() {
        // l0 = 10, b0 = 0, y1 = 12: mu_1 = 10, l_1 = 11, b_1 = 0.5, mu_2 = 11.5
        let s = series(vec![12.0, 11.0], 1);
        let init = InitialState {
            level: 10.0,
            trend: 0.0,
            seasonal: vec![0.0],
        };
        let f = lgt_filter(&s, &init, &params()).unwrap();
        assert_eq!(f.one_step_means[0], 10.0);
        assert_eq!(f.levels[0], 11.0);
        assert_eq!(f.trends[0], 0.5);
        assert_eq!(f.one_step_means[1], 11.5);
        for t in 0..2 {
            assert_eq!(f.residuals[t], s.values()[t] - f.one_step_means[t] - f.seasonals[t]);
        }
    }

    #[test]
    fn zero_smoothing_freezes_states() {
        let p = LgtParams {
            rho_l: 1e-12,
            rho_b: 1e-12,
            rho_s: 1e-12,
            xi1: 0.7,
            xi2: 0.4,
            lambda: 0.3,
            ..params()
        };
        let s = series(vec![20.0, 5.0, 30.0, 7.0, 12.0, 9.0, 40.0, 3.0], 2);
        let init = InitialState {
            level: 10.0,
            trend: 2.0,
            seasonal: vec![1.0, -1.0],
        };
        let f = lgt_filter(&s, &init, &p).unwrap();
        let want = 10.0 + 0.7 * 2.0 + 0.4 * 10f64.powf(0.3);
        for mu in &f.one_step_means {
            assert!((mu - want).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_non_positive_observations() {
        let s = series(vec![3.0, -1.0, 2.0], 1);
        let init = InitialState {
            level: 3.0,
            trend: 0.0,
            seasonal: vec![0.0],
        };
        assert_eq!(
            lgt_filter(&s, &init, &params()),
            Err(Error::NonPositiveObservation { index: 1 })
        );
    }

    #[test]
    fn level_collapse_maps_to_negative_infinity() {
        let p = LgtParams {
            rho_l: 0.999,
            ..params()
        };
        // A seasonal index larger than y drives y - s negative.
        let s = series(vec![1.0, 1.0, 1.0, 1.0], 2);
        let init = InitialState {
            level: 1.0,
            trend: 0.0,
            seasonal: vec![5.0, -5.0],
        };
        assert_eq!(lgt_filter(&s, &init, &p), Err(Error::LevelCollapse { step: 1 }));
        let lp = lgt_log_posterior(&s, &init, &p, &LgtPriors { gamma0: 1.0 }).unwrap();
        assert_eq!(lp, f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_out_of_bounds_params() {
        let s = series(vec![3.0, 4.0], 1);
        let init = InitialState {
            level: 3.0,
            trend: 0.0,
            seasonal: vec![0.0],
        };
        let p = LgtParams { rho_l: 1.2, ..params() };
        assert!(matches!(
            lgt_log_posterior(&s, &init, &p, &LgtPriors { gamma0: 1.0 }),
            Err(Error::InvalidParameter(_))
        ));
        assert!(LgtParams { nu: 1.5, ..params() }.validate().is_err());
        assert!(LgtParams {
            lambda: 1.01,
            ..params()
        }
        .validate()
        .is_err());
        assert!(LgtParams { sigma: 0.0, ..params() }.validate().is_err());
    }

    #[test]
    fn zero_residual_posterior() {
        // With xi1 = 1, xi2 = 0 and m = 1, a constant series at the initial
        // level with zero trend has zero residuals everywhere.
        let s = series(vec![7.0; 6], 1);
        let init = InitialState {
            level: 7.0,
            trend: 0.0,
            seasonal: vec![0.0],
        };
        let p = params();
        let priors = LgtPriors { gamma0: 2.0 };
        let lp = lgt_log_posterior(&s, &init, &p, &priors).unwrap();
        let want = 6.0 * studentt_logpdf(0.0, p.nu, 0.0, p.sigma).unwrap()
            + halfcauchy_logpdf(p.sigma, priors.gamma0).unwrap();
        assert!((lp - want).abs() < 1e-12);
    }

    #[test]
    fn sigma_delta_matches_closed_form() {
        let s = series(vec![10.0, 12.0, 11.0, 13.0, 12.5, 14.0], 1);
        let init = InitialState {
            level: 10.0,
            trend: 0.5,
            seasonal: vec![0.0],
        };
        let priors = LgtPriors { gamma0: 1.5 };
        let a = LgtParams { sigma: 0.8, ..params() };
        let b = LgtParams { sigma: 2.5, ..params() };
        let res = lgt_filter(&s, &init, &a).unwrap().residuals;
        let delta =
            lgt_log_posterior(&s, &init, &b, &priors).unwrap() - lgt_log_posterior(&s, &init, &a, &priors).unwrap();
        // Closed form: nu fixed, only the scale terms move.
        let nu = 5.0f64;
        let term = |sig: f64| -> f64 {
            let ll: f64 = res
                .iter()
                .map(|e| -sig.ln() - 0.5 * (nu + 1.0) * (1.0 + (e / sig).powi(2) / nu).ln())
                .sum();
            ll - (1.0 + (sig / 1.5).powi(2)).ln()
        };
        assert!((delta - (term(2.5) - term(0.8))).abs() < 1e-10);
    }

    #[test]
    fn constant_series_keeps_zero_seasonality() {
        let s = series(vec![4.0; 24], 4);
        let init = InitialState {
            level: 4.0,
            trend: 0.0,
            seasonal: vec![0.0; 4],
        };
        for rho_s in [0.01, 0.5, 0.99] {
            let f = lgt_filter(&s, &init, &LgtParams { rho_s, ..params() }).unwrap();
            assert!(f.seasonals.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn frozen_forecast_is_flat() {
        let p = LgtParams {
            rho_l: 1e-12,
            rho_b: 1e-12,
            rho_s: 1e-12,
            ..params()
        };
        let state = FinalState {
            level: 10.0,
            trend: 1.0,
            seasonal: vec![0.0],
            t_end: 20,
        };
        let fd = lgt_forecast(&state, &p, 5, 1, &RandomSource::new(0), ForecastMode::Deterministic).unwrap();
        assert_eq!(fd.n_paths(), 1);
        for v in &fd.paths()[0] {
            assert!((v - 11.0).abs() < 1e-9);
        }
    }

    #[test]
    fn stochastic_forecast_shape_and_determinism() {
        let state = FinalState {
            level: 50.0,
            trend: 0.5,
            seasonal: vec![1.0, -1.0, 0.5, -0.5],
            t_end: 40,
        };
        let p = params();
        let rs = RandomSource::new(11);
        let a = lgt_forecast(&state, &p, 6, 300, &rs, ForecastMode::Stochastic).unwrap();
        let b = lgt_forecast(&state, &p, 6, 300, &rs, ForecastMode::Stochastic).unwrap();
        assert_eq!(a, b);
        let q = a.quantiles(&[0.05, 0.5, 0.95]).unwrap();
        assert_eq!(q.len(), 6);
        for row in q {
            assert_eq!(row.len(), 3);
            assert!(row[0] <= row[1] && row[1] <= row[2]);
        }
    }
}
