//! Damped-local-trend model with a deterministic global trend `D(t)` and a
//! linear regression component.
//!
//! ```text
//! y_t      = mu_t + s_t + r_t + eps_t
//! mu_t     = D(t) + l_{t-1} + theta b_{t-1}
//! l_t      = rho_l (y_t - D(t) - s_t - r_t) + (1 - rho_l)(l_{t-1} + b_{t-1})
//! b_t      = rho_b (l_t - l_{t-1}) + (1 - rho_b) theta b_{t-1}
//! s_{t+m}  = rho_s (y_t - l_t - r_t) + (1 - rho_s) s_t
//! r_t      = sum_j beta_j x_{jt}
//! ```
//!
//! `t` is the 1-based position in the training series and continues at
//! `T+1` for forecasts. Observations may take any sign.

use serde::{Deserialize, Serialize};

use super::{
    check_closed, check_initial_state, check_noise, check_open_unit, simulate_paths, FilterResult, FinalState,
    ForecastDistribution, ForecastMode, PathState, Recorder, SeasonalRing, StepRecord,
};
use crate::distributions::{halfcauchy_logpdf, normal_logpdf, studentt_logpdf, RandomSource};
use crate::error::{Error, Result};
use crate::series::{InitialState, Regressors, TimeSeries};

/// Prior standard deviation of every global-trend coefficient.
pub const TREND_COEFF_PRIOR_SD: f64 = 10.0;

/// Shape of the deterministic global trend `D(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlobalTrendKind {
    /// `d0`
    Flat,
    /// `d0 + d1 t`
    Linear,
    /// `d0 + d1 ln(t + 1)`
    LogLinear,
    /// `d0 / (1 + exp(-d1 (t - d2)))`
    Logistic,
}

impl GlobalTrendKind {
    pub fn arity(self) -> usize {
        match self {
            Self::Flat => 1,
            Self::Linear | Self::LogLinear => 2,
            Self::Logistic => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Flat => "flat",
            Self::Linear => "linear",
            Self::LogLinear => "loglinear",
            Self::Logistic => "logistic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "flat" => Some(Self::Flat),
            "linear" => Some(Self::Linear),
            "loglinear" | "log-linear" => Some(Self::LogLinear),
            "logistic" => Some(Self::Logistic),
            _ => None,
        }
    }
}

/// Evaluates `D(t)`.
pub fn global_trend_eval(kind: GlobalTrendKind, coeffs: &[f64], t: usize) -> Result<f64> {
    if coeffs.len() != kind.arity() {
        return Err(Error::ArityMismatch {
            expected: kind.arity(),
            got: coeffs.len(),
        });
    }
    Ok(trend_value(kind, coeffs, t as f64))
}

fn trend_value(kind: GlobalTrendKind, d: &[f64], t: f64) -> f64 {
    match kind {
        GlobalTrendKind::Flat => d[0],
        GlobalTrendKind::Linear => d[0] + d[1] * t,
        GlobalTrendKind::LogLinear => d[0] + d[1] * (t + 1.0).ln(),
        GlobalTrendKind::Logistic => d[0] / (1.0 + (-d[1] * (t - d[2])).exp()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DltParams {
    pub rho_l: f64,
    pub rho_b: f64,
    pub rho_s: f64,
    /// Damped factor, in [0, 1].
    pub theta: f64,
    /// Regression coefficients, one per regressor column.
    pub beta: Vec<f64>,
    /// Global-trend coefficients; arity set by [`GlobalTrendKind`].
    pub trend_coeffs: Vec<f64>,
    pub nu: f64,
    pub sigma: f64,
}

impl DltParams {
    pub fn validate(&self) -> Result<()> {
        check_open_unit("rho_l", self.rho_l)?;
        check_open_unit("rho_b", self.rho_b)?;
        check_open_unit("rho_s", self.rho_s)?;
        check_closed("theta", self.theta, 0.0, 1.0)?;
        if self.beta.iter().chain(&self.trend_coeffs).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        check_noise(self.nu, self.sigma)
    }

    /// Flat layout: smoothing and damping, trend coefficients, betas, then
    /// `nu` and `sigma`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.rho_l, self.rho_b, self.rho_s, self.theta];
        v.extend(&self.trend_coeffs);
        v.extend(&self.beta);
        v.push(self.nu);
        v.push(self.sigma);
        v
    }

    pub fn from_slice(v: &[f64], kind: GlobalTrendKind, n_regressors: usize) -> Result<Self> {
        let k = kind.arity();
        let expected = 6 + k + n_regressors;
        if v.len() != expected {
            return Err(Error::ArityMismatch { expected, got: v.len() });
        }
        Ok(Self {
            rho_l: v[0],
            rho_b: v[1],
            rho_s: v[2],
            theta: v[3],
            trend_coeffs: v[4..4 + k].to_vec(),
            beta: v[4 + k..4 + k + n_regressors].to_vec(),
            nu: v[expected - 2],
            sigma: v[expected - 1],
        })
    }

    pub fn names(kind: GlobalTrendKind, regressor_names: &[String]) -> Vec<String> {
        let mut n: Vec<String> = ["rho_l", "rho_b", "rho_s", "theta"].map(String::from).to_vec();
        n.extend((0..kind.arity()).map(|i| format!("delta{i}")));
        n.extend(regressor_names.iter().map(|r| format!("beta[{r}]")));
        n.push("nu".into());
        n.push("sigma".into());
        n
    }
}

/// Normal prior on the regression coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionPrior {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl RegressionPrior {
    /// Normal(0, 1) for each of `n` coefficients.
    pub fn standard(n: usize) -> Self {
        Self {
            mu: vec![0.0; n],
            sigma: vec![1.0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DltPriors {
    pub gamma0: f64,
    pub regression: RegressionPrior,
}

impl DltPriors {
    pub fn from_series(series: &TimeSeries) -> Self {
        Self {
            gamma0: super::data_driven_gamma0(series.values()),
            regression: RegressionPrior::standard(series.n_regressors()),
        }
    }
}

fn check_regression(beta: &[f64], n_regressors: usize) -> Result<()> {
    if !beta.is_empty() && n_regressors == 0 {
        return Err(Error::RegressorMissing(format!(
            "{} coefficients but the series has no regressors",
            beta.len()
        )));
    }
    if beta.len() != n_regressors {
        return Err(Error::ArityMismatch {
            expected: n_regressors,
            got: beta.len(),
        });
    }
    Ok(())
}

fn regression_at(beta: &[f64], reg: Option<&Regressors>, row: usize) -> f64 {
    match reg {
        Some(r) => beta.iter().zip(r.columns()).map(|(b, c)| b * c[row]).sum(),
        None => 0.0,
    }
}

fn run(
    series: &TimeSeries,
    init: &InitialState,
    params: &DltParams,
    kind: GlobalTrendKind,
    mut observe: impl FnMut(StepRecord),
) -> Result<(f64, FinalState)> {
    params.validate()?;
    check_initial_state(series, init)?;
    if params.trend_coeffs.len() != kind.arity() {
        return Err(Error::ArityMismatch {
            expected: kind.arity(),
            got: params.trend_coeffs.len(),
        });
    }
    check_regression(&params.beta, series.n_regressors())?;

    let p = params;
    let reg = series.regressors();
    let mut level = init.level;
    let mut trend = init.trend;
    let mut ring = SeasonalRing::new(&init.seasonal);
    let mut loglik = 0.0;

    for (i, &y) in series.values().iter().enumerate() {
        let g = trend_value(kind, &p.trend_coeffs, (i + 1) as f64);
        let r = regression_at(&p.beta, reg, i);
        let s = ring.current();
        let mu = g + level + p.theta * trend;
        let eps = y - mu - s - r;
        loglik += studentt_logpdf(eps, p.nu, 0.0, p.sigma)?;

        let new_level = p.rho_l * (y - g - s - r) + (1.0 - p.rho_l) * (level + trend);
        let new_trend = p.rho_b * (new_level - level) + (1.0 - p.rho_b) * p.theta * trend;
        ring.advance(|| p.rho_s * (y - new_level - r) + (1.0 - p.rho_s) * s);
        level = new_level;
        trend = new_trend;

        observe(StepRecord {
            level,
            trend,
            seasonal: s,
            mean: mu,
            regression: r,
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
pub fn dlt_filter(
    series: &TimeSeries,
    init: &InitialState,
    params: &DltParams,
    kind: GlobalTrendKind,
) -> Result<FilterResult> {
    let mut rec = Recorder::with_capacity(series.len());
    let (ll, fin) = run(series, init, params, kind, |r| rec.push(r))?;
    Ok(rec.finish(ll, fin))
}

/// Log-likelihood plus the noise, regression and trend-coefficient priors.
/// `theta` and the smoothing parameters carry flat priors.
pub fn dlt_log_posterior(
    series: &TimeSeries,
    init: &InitialState,
    params: &DltParams,
    kind: GlobalTrendKind,
    priors: &DltPriors,
) -> Result<f64> {
    let (ll, _) = run(series, init, params, kind, |_| {})?;
    let reg = &priors.regression;
    if reg.mu.len() != params.beta.len() || reg.sigma.len() != params.beta.len() {
        return Err(Error::ArityMismatch {
            expected: params.beta.len(),
            got: reg.mu.len().min(reg.sigma.len()),
        });
    }
    let mut lp = ll + halfcauchy_logpdf(params.sigma, priors.gamma0)?;
    for ((b, mu), sd) in params.beta.iter().zip(&reg.mu).zip(&reg.sigma) {
        lp += normal_logpdf(*b, *mu, *sd)?;
    }
    for d in &params.trend_coeffs {
        lp += normal_logpdf(*d, 0.0, TREND_COEFF_PRIOR_SD)?;
    }
    Ok(lp)
}

pub(crate) fn dlt_step<'a>(
    params: &'a DltParams,
    kind: GlobalTrendKind,
    future: Option<&'a Regressors>,
    t_end: usize,
) -> impl Fn(&mut PathState, usize, f64) -> Option<f64> + Sync + 'a {
    move |ps, t, eps| {
        let p = params;
        let g = trend_value(kind, &p.trend_coeffs, t as f64);
        let s = ps.ring.current();
        let r = regression_at(&p.beta, future, t - t_end - 1);
        let y = g + ps.level + p.theta * ps.trend + s + r + eps;
        let level = p.rho_l * (y - g - s - r) + (1.0 - p.rho_l) * (ps.level + ps.trend);
        ps.trend = p.rho_b * (level - ps.level) + (1.0 - p.rho_b) * p.theta * ps.trend;
        ps.ring.advance(|| p.rho_s * (y - level - r) + (1.0 - p.rho_s) * s);
        ps.level = level;
        Some(y)
    }
}

/// Simulates forward from `state`. `future` must supply at least `h` rows
/// of regressors when the model has regression coefficients.
#[allow(clippy::too_many_arguments)]
pub fn dlt_forecast(
    state: &FinalState,
    params: &DltParams,
    kind: GlobalTrendKind,
    future: Option<&Regressors>,
    h: usize,
    n_paths: usize,
    rs: &RandomSource,
    mode: ForecastMode,
) -> Result<ForecastDistribution> {
    params.validate()?;
    if params.trend_coeffs.len() != kind.arity() {
        return Err(Error::ArityMismatch {
            expected: kind.arity(),
            got: params.trend_coeffs.len(),
        });
    }
    let future = if params.beta.is_empty() {
        None
    } else {
        let f = future.ok_or_else(|| Error::RegressorMissing(format!("{h} rows of future regressors required")))?;
        check_regression(&params.beta, f.n_regressors())?;
        if f.n_rows() < h {
            return Err(Error::RegressorMissing(format!(
                "{} future regressor rows for horizon {h}",
                f.n_rows()
            )));
        }
        Some(f)
    };
    simulate_paths(
        state,
        h,
        n_paths,
        rs,
        mode,
        params.nu,
        params.sigma,
        dlt_step(params, kind, future, state.t_end),
    )
}
