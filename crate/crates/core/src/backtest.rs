//! Expanding-window backtests scored by SMAPE.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::RandomSource;
use crate::error::{Error, Result};
use crate::series::{Regressors, TimeSeries};

/// Symmetric mean absolute percentage error, in [0, 2].
///
/// Mean over steps of `|F - A| / ((|F| + |A|) / 2)`; a step with
/// `F = A = 0` contributes 0.
pub fn smape(forecasts: &[f64], actuals: &[f64]) -> Result<f64> {
    if forecasts.len() != actuals.len() {
        return Err(Error::LengthMismatch(forecasts.len(), actuals.len()));
    }
    if forecasts.is_empty() {
        return Err(Error::EmptyInput);
    }
    let total: f64 = forecasts
        .iter()
        .zip(actuals)
        .map(|(f, a)| {
            let denom = (f.abs() + a.abs()) / 2.0;
            if denom == 0.0 {
                0.0
            } else {
                (f - a).abs() / denom
            }
        })
        .sum();
    Ok(total / forecasts.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitScheme {
    pub horizon: usize,
    pub n_splits: usize,
    /// Distance between consecutive training-window ends.
    pub step: usize,
    pub min_train_length: usize,
}

impl SplitScheme {
    pub fn required_length(&self) -> usize {
        self.min_train_length + self.horizon + (self.n_splits.saturating_sub(1)) * self.step
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    /// Number of training observations (train covers `0..train_end`).
    pub train_end: usize,
    pub test: Range<usize>,
}

/// Splits ordered by training end. The last split holds out the final
/// `horizon` points; each earlier one ends `step` points sooner.
pub fn generate_splits(series_length: usize, scheme: &SplitScheme) -> Result<Vec<Split>> {
    if scheme.horizon < 1 || scheme.n_splits < 1 || scheme.step < 1 {
        return Err(Error::InvalidParameter(
            "horizon, splits and step must all be >= 1".into(),
        ));
    }
    let needed = scheme
        .required_length()
        .max(scheme.horizon + scheme.n_splits.saturating_sub(1) * scheme.step + 1);
    if series_length < needed {
        return Err(Error::SeriesTooShort {
            needed,
            got: series_length,
        });
    }
    let last = series_length - scheme.horizon;
    Ok((0..scheme.n_splits)
        .rev()
        .map(|k| {
            let train_end = last - k * scheme.step;
            Split {
                train_end,
                test: train_end..train_end + scheme.horizon,
            }
        })
        .collect())
}

/// Repeats the last observed cycle (or the last value when `m = 1`).
pub fn naive_seasonal_forecast(series: &TimeSeries, h: usize) -> Result<Vec<f64>> {
    let m = series.period();
    let y = series.values();
    if y.is_empty() || y.len() < m {
        return Err(Error::SeriesTooShort {
            needed: m.max(1),
            got: y.len(),
        });
    }
    let tail = &y[y.len() - m..];
    Ok((0..h).map(|k| tail[k % m]).collect())
}

/// Anything that can produce a point forecast from a training slice.
pub trait Forecaster: Sync {
    fn forecast(
        &self,
        train: &TimeSeries,
        future: Option<&Regressors>,
        h: usize,
        rs: &RandomSource,
    ) -> Result<Vec<f64>>;
}

/// Seasonal naive baseline.
#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveSeasonal;

impl Forecaster for NaiveSeasonal {
    fn forecast(&self, train: &TimeSeries, _: Option<&Regressors>, h: usize, _: &RandomSource) -> Result<Vec<f64>> {
        naive_seasonal_forecast(train, h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitScore {
    pub train_end: usize,
    pub horizon: usize,
    pub smape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub id: String,
    pub splits: Vec<SplitScore>,
    /// Mean SMAPE over splits.
    pub mean: f64,
    /// Sample standard deviation over splits (0 for a single split).
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFailure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub scheme: SplitScheme,
    pub series: Vec<SeriesReport>,
    pub failures: Vec<SeriesFailure>,
    /// Mean of per-series means; `None` when every series failed.
    pub aggregate_mean: Option<f64>,
    /// Sample standard deviation of per-series means.
    pub aggregate_std: Option<f64>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

fn backtest_one(
    series: &TimeSeries,
    forecaster: &dyn Forecaster,
    scheme: &SplitScheme,
    rs: &RandomSource,
) -> Result<Vec<SplitScore>> {
    let splits = generate_splits(series.len(), scheme)?;
    splits
        .iter()
        .enumerate()
        .map(|(k, split)| {
            let train = series.slice(0..split.train_end);
            let future = series.regressors().map(|r| r.slice(split.test.clone()));
            let sub = rs.substream(k as u64, 0);
            let fc = forecaster.forecast(&train, future.as_ref(), scheme.horizon, &sub)?;
            if fc.len() != scheme.horizon {
                return Err(Error::LengthMismatch(scheme.horizon, fc.len()));
            }
            if let Some(i) = fc.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue { index: i });
            }
            Ok(SplitScore {
                train_end: split.train_end,
                horizon: scheme.horizon,
                smape: smape(&fc, &series.values()[split.test.clone()])?,
            })
        })
        .collect()
}

/// Backtests every series independently and aggregates per-series means.
///
/// Series are processed in parallel, each with sub-streams derived from its
/// position after sorting by id, so the report does not depend on input
/// order or scheduling. Failures are recorded, not propagated.
pub fn run_backtest(
    series: &[(String, TimeSeries)],
    forecaster: &dyn Forecaster,
    scheme: &SplitScheme,
    seed: u64,
) -> BacktestReport {
    let mut ordered: Vec<&(String, TimeSeries)> = series.iter().collect();
    ordered.sort_by(|a, b| a.0.cmp(&b.0));
    let root = RandomSource::new(seed);

    let outcomes: Vec<std::result::Result<SeriesReport, SeriesFailure>> = ordered
        .par_iter()
        .enumerate()
        .map(|(i, (id, s))| {
            let rs = root.substream(i as u64, 0x6274);
            match backtest_one(s, forecaster, scheme, &rs) {
                Ok(splits) => {
                    let scores: Vec<f64> = splits.iter().map(|s| s.smape).collect();
                    let (mean, std) = mean_std(&scores);
                    Ok(SeriesReport {
                        id: id.clone(),
                        splits,
                        mean,
                        std,
                    })
                }
                Err(e) => Err(SeriesFailure {
                    id: id.clone(),
                    error: e.to_string(),
                }),
            }
        })
        .collect();

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => reports.push(r),
            Err(f) => failures.push(f),
        }
    }
    let (aggregate_mean, aggregate_std) = if reports.is_empty() {
        (None, None)
    } else {
        let means: Vec<f64> = reports.iter().map(|r| r.mean).collect();
        let (m, s) = mean_std(&means);
        (Some(m), Some(s))
    };
    BacktestReport {
        scheme: *scheme,
        series: reports,
        failures,
        aggregate_mean,
        aggregate_std,
    }
}
