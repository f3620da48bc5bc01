//! Validated univariate series, log-space helpers and deterministic state
//! initialization shared by both models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named exogenous regressors, stored column-major and row-aligned with the
/// observations they accompany.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regressors {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Regressors {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::RegressorShapeMismatch(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if let Some(first) = columns.first() {
            if columns.iter().any(|c| c.len() != first.len()) {
                return Err(Error::RegressorShapeMismatch(
                    "regressor columns have unequal lengths".into(),
                ));
            }
        }
        Ok(Self { names, columns })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn n_regressors(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    /// Row `t` (0-based) as a dense vector.
    pub fn row(&self, t: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[t]).collect()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c[range.clone()].to_vec()).collect(),
        }
    }
}

/// An ordered, validated univariate series. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    timestamps: Vec<i64>,
    values: Vec<f64>,
    period: usize,
    regressors: Option<Regressors>,
}

/// Validates raw columns and builds a [`TimeSeries`].
///
/// Timestamps are ordinal integer codes; only their ordering matters.
pub fn validate_series(
    timestamps: Vec<i64>,
    values: Vec<f64>,
    regressors: Option<Regressors>,
    period: usize,
) -> Result<TimeSeries> {
    if period < 1 {
        return Err(Error::InvalidPeriod(period));
    }
    if timestamps.len() != values.len() {
        return Err(Error::LengthMismatch(timestamps.len(), values.len()));
    }
    if let Some(i) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::NonMonotonicTimestamps { index: i + 1 });
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue { index });
    }
    if let Some(reg) = &regressors {
        if reg.n_regressors() > 0 && reg.n_rows() != values.len() {
            return Err(Error::RegressorShapeMismatch(format!(
                "{} regressor rows for {} observations",
                reg.n_rows(),
                values.len()
            )));
        }
        for col in reg.columns() {
            if let Some(index) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue { index });
            }
        }
    }
    let regressors = regressors.filter(|r| r.n_regressors() > 0);
    Ok(TimeSeries {
        timestamps,
        values,
        period,
        regressors,
    })
}

impl TimeSeries {
    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn regressors(&self) -> Option<&Regressors> {
        self.regressors.as_ref()
    }

    pub fn n_regressors(&self) -> usize {
        self.regressors.as_ref().map_or(0, Regressors::n_regressors)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sub-series over `range`, keeping period and regressor rows aligned.
    pub fn slice(&self, range: std::ops::Range<usize>) -> TimeSeries {
        TimeSeries {
            timestamps: self.timestamps[range.clone()].to_vec(),
            values: self.values[range.clone()].to_vec(),
            period: self.period,
            regressors: self.regressors.as_ref().map(|r| r.slice(range)),
        }
    }

    /// Same series with the observations replaced. Lengths must agree.
    fn with_values(&self, values: Vec<f64>) -> TimeSeries {
        debug_assert_eq!(values.len(), self.values.len());
        TimeSeries {
            timestamps: self.timestamps.clone(),
            values,
            period: self.period,
            regressors: self.regressors.clone(),
        }
    }
}

/// Natural log of every observation; fails on the first non-positive value.
pub fn log_transform(series: &TimeSeries) -> Result<TimeSeries> {
    if let Some(index) = series.values().iter().position(|&v| v <= 0.0) {
        return Err(Error::NonPositiveValue { index });
    }
    Ok(series.with_values(series.values().iter().map(|v| v.ln()).collect()))
}

/// Elementwise exponential. Overflow yields `+inf`, left for callers to flag.
pub fn inverse_log_transform(values: &[f64]) -> Vec<f64> {
    values.iter().map(|v| v.exp()).collect()
}

/// Starting level, trend and seasonal indices for the filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub level: f64,
    pub trend: f64,
    /// One index per seasonal phase; sums to zero.
    pub seasonal: Vec<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Deterministic initial states.
///
/// * seasonal: mean deviation of each phase from its cycle mean over the
///   first two cycles, re-centered to sum to zero (all zeros when `m = 1`);
/// * level: mean of the first cycle;
/// * trend: difference of the first two cycle means divided by `m`, or the
///   mean first difference when two full cycles are not available.
pub fn initialize_states(series: &TimeSeries) -> Result<InitialState> {
    let m = series.period();
    let y = series.values();
    let needed = if m > 1 { (2 * m).max(3) } else { 2 };
    if y.len() < needed {
        return Err(Error::SeriesTooShort { needed, got: y.len() });
    }

    let first = &y[..m.min(y.len())];
    let level = mean(first);
    let trend = if y.len() >= 2 * m {
        (mean(&y[m..2 * m]) - level) / m as f64
    } else {
        (y[y.len() - 1] - y[0]) / (y.len() - 1) as f64
    };

    let mut seasonal = vec![0.0; m];
    if m > 1 {
        for cycle in y[..2 * m].chunks_exact(m) {
            let cm = mean(cycle);
            for (s, v) in seasonal.iter_mut().zip(cycle) {
                *s += (v - cm) / 2.0;
            }
        }
        let centre = mean(&seasonal);
        seasonal.iter_mut().for_each(|s| *s -= centre);
    }

    Ok(InitialState { level, trend, seasonal })
}
