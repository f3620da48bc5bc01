//! Model fitting and forecasting on top of the model and inference modules.
//!
//! An estimator run validates the training data, optionally moves it to
//! log space, initializes states, builds the log-posterior over the flat
//! parameter vector and hands it to MAP or MCMC. The result is a
//! [`FittedModel`] that forecasts without access to the training data.

use serde::{Deserialize, Serialize};

use crate::backtest::Forecaster;
use crate::distributions::RandomSource;
use crate::error::{Error, Result};
use crate::inference::{map_fit, mcmc_sample, Bound, MapResult, ParamSpec, PosteriorDraws};
use crate::model::dlt::{dlt_step, DltParams, DltPriors, GlobalTrendKind};
use crate::model::lgt::{lgt_step, LgtParams, LgtPriors};
use crate::model::{
    dlt_filter, dlt_forecast, dlt_log_posterior, lgt_filter, lgt_forecast, lgt_log_posterior, simulate_with_retries,
    FinalState, ForecastDistribution, ForecastMode,
};
use crate::series::{initialize_states, log_transform, InitialState, Regressors, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Lgt,
    Dlt { trend: GlobalTrendKind },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Lgt => "lgt",
            Self::Dlt { .. } => "dlt",
        }
    }
}

/// Additive fits the data as given; multiplicative fits `ln(y)` and
/// exponentiates forecast paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Map { restarts: usize },
    Mcmc { chains: usize, warmup: usize, draws: usize },
}

impl Method {
    pub const DEFAULT_MAP: Method = Method::Map { restarts: 4 };
    pub const DEFAULT_MCMC: Method = Method::Mcmc {
        chains: 4,
        warmup: 1000,
        draws: 1000,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitConfig {
    pub model: ModelKind,
    pub mode: Mode,
    pub method: Method,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub gamma0: f64,
    /// Regression prior means and scales (DLT only).
    pub beta_mu: Vec<f64>,
    pub beta_sigma: Vec<f64>,
}

/// A fitted model: everything needed to forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub config: FitConfig,
    pub period: usize,
    pub n_train: usize,
    pub param_names: Vec<String>,
    pub regressor_names: Vec<String>,
    pub initial_state: InitialState,
    pub priors: Priors,
    /// MAP estimate; also the starting point for MCMC.
    pub map: MapResult,
    pub draws: Option<PosteriorDraws>,
    /// Final filter state at the MAP point, then one per pooled draw.
    pub final_states: Vec<FinalState>,
}

/// Parameters of either model, decoded from the flat vector.
enum Params {
    Lgt(LgtParams),
    Dlt(DltParams, GlobalTrendKind),
}

fn decode(model: ModelKind, n_regressors: usize, x: &[f64]) -> Result<Params> {
    Ok(match model {
        ModelKind::Lgt => Params::Lgt(LgtParams::from_slice(x)?),
        ModelKind::Dlt { trend } => Params::Dlt(DltParams::from_slice(x, trend, n_regressors)?, trend),
    })
}

fn param_spec(model: ModelKind, regressor_names: &[String]) -> ParamSpec {
    let noise = [
        ("nu", Bound::Interval { lo: 2.0, hi: 40.0 }),
        ("sigma", Bound::Positive),
    ];
    let pairs: Vec<(String, Bound)> = match model {
        ModelKind::Lgt => {
            let bounds = [
                Bound::UnitInterval,
                Bound::UnitInterval,
                Bound::UnitInterval,
                Bound::UnitInterval,
                Bound::Unbounded,
                Bound::UnitInterval,
                noise[0].1,
                noise[1].1,
            ];
            LgtParams::NAMES.iter().map(|n| n.to_string()).zip(bounds).collect()
        }
        ModelKind::Dlt { trend } => DltParams::names(trend, regressor_names)
            .into_iter()
            .enumerate()
            .map(|(i, n)| {
                let b = match i {
                    0..=3 => Bound::UnitInterval,
                    _ if n == "nu" => noise[0].1,
                    _ if n == "sigma" => noise[1].1,
                    _ => Bound::Unbounded,
                };
                (n, b)
            })
            .collect(),
    };
    ParamSpec::from_pairs(pairs).expect("static bounds are well ordered")
}

fn sd_of_differences(y: &[f64]) -> f64 {
    if y.len() < 3 {
        return 0.0;
    }
    let d: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let m = d.iter().sum::<f64>() / d.len() as f64;
    (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt()
}

fn initial_point(model: ModelKind, series: &TimeSeries) -> Vec<f64> {
    let sigma = (0.5 * sd_of_differences(series.values())).max(1e-6);
    match model {
        ModelKind::Lgt => vec![0.3, 0.1, 0.1, 0.5, 0.0, 0.5, 10.0, sigma],
        ModelKind::Dlt { trend } => {
            let mut v = vec![0.3, 0.1, 0.1, 0.8];
            v.extend(match trend {
                GlobalTrendKind::Logistic => vec![0.0, 0.1, series.len() as f64 / 2.0],
                k => vec![0.0; k.arity()],
            });
            v.extend(std::iter::repeat_n(0.0, series.n_regressors()));
            v.push(10.0);
            v.push(sigma);
            v
        }
    }
}

/// Log-posterior of the model at a flat parameter vector; infeasible or
/// out-of-bounds points map to `-inf`.
struct Posterior<'a> {
    model: ModelKind,
    series: &'a TimeSeries,
    init: &'a InitialState,
    lgt_priors: LgtPriors,
    dlt_priors: DltPriors,
}

impl Posterior<'_> {
    fn eval(&self, x: &[f64]) -> f64 {
        let r = match decode(self.model, self.series.n_regressors(), x) {
            Ok(Params::Lgt(p)) => lgt_log_posterior(self.series, self.init, &p, &self.lgt_priors),
            Ok(Params::Dlt(p, k)) => dlt_log_posterior(self.series, self.init, &p, k, &self.dlt_priors),
            Err(e) => Err(e),
        };
        match r {
            Ok(v) if !v.is_nan() => v,
            _ => f64::NEG_INFINITY,
        }
    }

    fn final_state(&self, x: &[f64]) -> Result<FinalState> {
        Ok(match decode(self.model, self.series.n_regressors(), x)? {
            Params::Lgt(p) => lgt_filter(self.series, self.init, &p)?.final_state,
            Params::Dlt(p, k) => dlt_filter(self.series, self.init, &p, k)?.final_state,
        })
    }
}

/// Largest unconstrained magnitude of a box-bounded MCMC starting
/// coordinate; `sigmoid(6)` is about 0.9975.
const START_CLIP: f64 = 6.0;

/// Moves box-bounded coordinates of `x` off their bounds so that chains do
/// not start deep in a logit tail.
fn pull_inside(spec: &ParamSpec, x: &[f64]) -> Result<Vec<f64>> {
    let mut u = spec.to_unconstrained(x)?;
    for (ui, p) in u.iter_mut().zip(spec.params()) {
        if matches!(p.bound, Bound::UnitInterval | Bound::Interval { .. }) {
            *ui = ui.clamp(-START_CLIP, START_CLIP);
        }
    }
    Ok(spec.from_unconstrained(&u))
}

/// Moves the series into the space the model is fitted in.
pub fn working_series(series: &TimeSeries, mode: Mode) -> Result<TimeSeries> {
    match mode {
        Mode::Additive => Ok(series.clone()),
        Mode::Multiplicative => log_transform(series),
    }
}

/// Fits `config` to `series`.
pub fn fit(series: &TimeSeries, config: &FitConfig) -> Result<FittedModel> {
    let work = working_series(series, config.mode)?;
    if matches!(config.model, ModelKind::Lgt) {
        if work.n_regressors() > 0 {
            return Err(Error::InvalidParameter(
                "the local-and-global-trend model does not take regressors".into(),
            ));
        }
        if let Some(index) = work.values().iter().position(|&y| y <= 0.0) {
            return Err(Error::NonPositiveObservation { index });
        }
    }
    let init = initialize_states(&work)?;
    let regressor_names: Vec<String> = work.regressors().map(|r| r.names().to_vec()).unwrap_or_default();
    let spec = param_spec(config.model, &regressor_names);
    let dlt_priors = DltPriors::from_series(&work);
    let post = Posterior {
        model: config.model,
        series: &work,
        init: &init,
        lgt_priors: LgtPriors::from_series(&work),
        dlt_priors: dlt_priors.clone(),
    };
    let rs = RandomSource::new(config.seed);
    let start = initial_point(config.model, &work);
    let f = |x: &[f64]| post.eval(x);

    let restarts = match config.method {
        Method::Map { restarts } => restarts,
        Method::Mcmc { .. } => 4,
    };
    let map = map_fit(f, &spec, &start, restarts, &rs.substream(0, 0))?;

    let mut final_states = vec![post.final_state(&map.point)?];
    let draws = match config.method {
        Method::Map { .. } => None,
        Method::Mcmc { chains, warmup, draws } => {
            let start = pull_inside(&spec, &map.point)?;
            let d = mcmc_sample(f, &spec, &start, chains, warmup, draws, &rs.substream(1, 0))?;
            for k in 0..d.total_draws() {
                final_states.push(post.final_state(d.pooled(k))?);
            }
            Some(d)
        }
    };

    Ok(FittedModel {
        config: *config,
        period: work.period(),
        n_train: work.len(),
        param_names: spec.names(),
        regressor_names,
        initial_state: init,
        priors: Priors {
            gamma0: dlt_priors.gamma0,
            beta_mu: dlt_priors.regression.mu,
            beta_sigma: dlt_priors.regression.sigma,
        },
        map,
        draws,
        final_states,
    })
}

impl FittedModel {
    fn n_regressors(&self) -> usize {
        self.regressor_names.len()
    }

    fn check_future(&self, future: Option<&Regressors>, h: usize) -> Result<()> {
        if self.n_regressors() == 0 {
            return Ok(());
        }
        let f = future.ok_or_else(|| Error::RegressorMissing(format!("{h} rows of future regressors required")))?;
        if f.names() != self.regressor_names.as_slice() {
            return Err(Error::RegressorMissing(format!(
                "expected regressors {:?}, got {:?}",
                self.regressor_names,
                f.names()
            )));
        }
        if f.n_rows() < h {
            return Err(Error::RegressorMissing(format!(
                "{} future rows for horizon {h}",
                f.n_rows()
            )));
        }
        Ok(())
    }

    /// Forecast paths on the original scale.
    ///
    /// With posterior draws, path `p` uses pooled draw `p mod n_draws`; in
    /// deterministic mode every draw contributes one zero-noise path. Without
    /// draws the MAP point is used.
    pub fn forecast(
        &self,
        h: usize,
        n_paths: usize,
        future: Option<&Regressors>,
        seed: u64,
        mode: ForecastMode,
    ) -> Result<ForecastDistribution> {
        self.check_future(future, h)?;
        let rs = RandomSource::new(seed);
        let fd = match &self.draws {
            None => {
                let state = &self.final_states[0];
                match decode(self.config.model, self.n_regressors(), &self.map.point)? {
                    Params::Lgt(p) => lgt_forecast(state, &p, h, n_paths, &rs, mode)?,
                    Params::Dlt(p, k) => dlt_forecast(state, &p, k, future, h, n_paths, &rs, mode)?,
                }
            }
            Some(draws) => self.forecast_from_draws(draws, h, n_paths, future, &rs, mode)?,
        };
        Ok(match self.config.mode {
            Mode::Additive => fd,
            Mode::Multiplicative => fd.map_values(f64::exp),
        })
    }

    fn forecast_from_draws(
        &self,
        draws: &PosteriorDraws,
        h: usize,
        n_paths: usize,
        future: Option<&Regressors>,
        rs: &RandomSource,
        mode: ForecastMode,
    ) -> Result<ForecastDistribution> {
        use rayon::prelude::*;
        let total = draws.total_draws();
        let (count, stochastic) = match mode {
            ForecastMode::Deterministic => (total, false),
            ForecastMode::Stochastic => (n_paths.max(1), true),
        };
        if h < 1 {
            return Err(Error::InvalidParameter("forecast horizon must be >= 1".into()));
        }
        let paths = (0..count)
            .into_par_iter()
            .map(|p| {
                let d = p % total;
                let state = &self.final_states[d + 1];
                let x = draws.pooled(d);
                let params = decode(self.config.model, self.n_regressors(), x)?;
                if stochastic {
                    match &params {
                        Params::Lgt(q) => simulate_with_retries(state, h, rs, p, q.nu, q.sigma, &lgt_step(q)),
                        Params::Dlt(q, k) => {
                            let step = dlt_step(q, *k, future, state.t_end);
                            simulate_with_retries(state, h, rs, p, q.nu, q.sigma, &step)
                        }
                    }
                } else {
                    let one = match &params {
                        Params::Lgt(q) => lgt_forecast(state, q, h, 1, rs, ForecastMode::Deterministic),
                        Params::Dlt(q, k) => dlt_forecast(state, q, *k, future, h, 1, rs, ForecastMode::Deterministic),
                    };
                    one.map(|fd| fd.paths()[0].clone())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ForecastDistribution::from_paths(paths))
    }

    /// Point parameters used for summaries: the MAP point, or the posterior
    /// mean when draws exist.
    pub fn point_estimate(&self) -> Vec<f64> {
        match &self.draws {
            Some(d) => d.mean(),
            None => self.map.point.clone(),
        }
    }
}

/// How a backtest turns a fitted model into a single forecast vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointForecast {
    /// The zero-noise path (per draw, then the median across draws).
    Deterministic,
    /// Median of `n` simulated paths.
    Median { paths: usize },
}

/// Adapter that fits a fresh model on each training slice.
#[derive(Debug, Clone, Copy)]
pub struct ModelForecaster {
    pub config: FitConfig,
    pub point: PointForecast,
}

impl Forecaster for ModelForecaster {
    fn forecast(
        &self,
        train: &TimeSeries,
        future: Option<&Regressors>,
        h: usize,
        rs: &RandomSource,
    ) -> Result<Vec<f64>> {
        let config = FitConfig {
            seed: rs.seed(),
            ..self.config
        };
        let fitted = fit(train, &config)?;
        let fd = match self.point {
            PointForecast::Deterministic => fitted.forecast(h, 1, future, rs.seed(), ForecastMode::Deterministic)?,
            PointForecast::Median { paths } => {
                fitted.forecast(h, paths, future, rs.seed(), ForecastMode::Stochastic)?
            }
        };
        Ok(fd.median())
    }
}
