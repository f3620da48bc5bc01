use std::io::Write;
use std::path::{Path, PathBuf};

use bayesmooth::backtest::{run_backtest, BacktestReport, Forecaster, NaiveSeasonal, SeriesFailure, SplitScheme};
use bayesmooth::estimator::{fit, FittedModel, Mode, ModelForecaster, ModelKind, PointForecast};
use bayesmooth::inference::{effective_sample_size, split_rhat};
use bayesmooth::model::ForecastMode;
use bayesmooth::series::TimeSeries;

use crate::args::{BacktestArgs, BacktestModelArg, FitArgs, ModelArg, PredictArgs};
use crate::artifact::Artifact;
use crate::error::{CliError, CliResult};
use crate::ingest::{read_regressors, read_series, with_row};

fn io_out(e: std::io::Error) -> CliError {
    CliError::io("<output>", e)
}

pub fn cmd_fit(args: &FitArgs, out: &mut dyn Write) -> CliResult<()> {
    let series = read_series(&args.input, args.opts.period)?;
    let config = args.opts.fit_config(args.model);
    let model = fit(&series, &config).map_err(with_row)?;
    let artifact = Artifact::new(model, series.values());
    artifact.save(&args.output)?;
    write_summary(&artifact.model, out).map_err(io_out)?;
    writeln!(out, "artifact: {}", args.output.display()).map_err(io_out)
}

fn write_summary(m: &FittedModel, out: &mut dyn Write) -> std::io::Result<()> {
    let trend = match m.config.model {
        ModelKind::Dlt { trend } => format!(", global trend {}", trend.name()),
        ModelKind::Lgt => String::new(),
    };
    let mode = match m.config.mode {
        Mode::Additive => "additive",
        Mode::Multiplicative => "multiplicative",
    };
    writeln!(
        out,
        "model: {} ({mode}{trend}), period {}, {} observations",
        m.config.model.name(),
        m.period,
        m.n_train
    )?;
    writeln!(
        out,
        "MAP log-posterior: {:.6} ({}, restart {}, {} evaluations)",
        m.map.log_posterior,
        if m.map.converged { "converged" } else { "not converged" },
        m.map.restart_index,
        m.map.n_evaluations
    )?;
    match &m.draws {
        None => {
            writeln!(out, "{:<16} {:>14}", "parameter", "map")?;
            for (name, v) in m.param_names.iter().zip(&m.map.point) {
                writeln!(out, "{name:<16} {v:>14.6}")?;
            }
        }
        Some(d) => {
            writeln!(
                out,
                "{:<16} {:>14} {:>14} {:>14} {:>8} {:>8}",
                "parameter", "map", "mean", "sd", "rhat", "ess"
            )?;
            for (j, name) in m.param_names.iter().enumerate() {
                let chains = d.param_chains(j);
                let pooled: Vec<f64> = chains.concat();
                let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
                let sd =
                    (pooled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (pooled.len().max(2) - 1) as f64).sqrt();
                let fmt = |r: bayesmooth::Result<f64>| r.map_or_else(|_| "-".to_string(), |v| format!("{v:.3}"));
                writeln!(
                    out,
                    "{name:<16} {:>14.6} {mean:>14.6} {sd:>14.6} {:>8} {:>8}",
                    m.map.point[j],
                    fmt(split_rhat(&chains)),
                    fmt(effective_sample_size(&chains).map(f64::round)),
                )?;
            }
            let rates: Vec<String> = d.acceptance_rate.iter().map(|r| format!("{r:.3}")).collect();
            writeln!(out, "acceptance rate per chain: {}", rates.join(", "))?;
        }
    }
    Ok(())
}

pub fn cmd_predict(args: &PredictArgs, out: &mut dyn Write) -> CliResult<()> {
    if args.horizon < 1 {
        return Err(CliError::Usage("--horizon must be >= 1".into()));
    }
    if let Some(q) = args.quantiles.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(CliError::Usage(format!("quantile {q} is outside [0, 1]")));
    }
    let artifact = Artifact::load(&args.model)?;
    let model = &artifact.model;
    let future = args.regressors.as_deref().map(read_regressors).transpose()?;
    let seed = args.seed.unwrap_or(model.config.seed);
    let fd = model.forecast(
        args.horizon,
        args.paths.max(1),
        future.as_ref(),
        seed,
        ForecastMode::Stochastic,
    )?;
    let median = fd.median();
    let quantiles = fd.quantiles(&args.quantiles)?;

    let mut text = String::from("step,median");
    for q in &args.quantiles {
        text.push_str(&format!(",q{q}"));
    }
    text.push('\n');
    for k in 0..args.horizon {
        text.push_str(&format!("{},{}", k + 1, median[k]));
        for v in &quantiles[k] {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    match &args.output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => out.write_all(text.as_bytes()).map_err(io_out),
    }
}

fn series_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Series files to backtest: the file itself, or every `*.csv` in a directory.
fn input_files(input: &Path) -> CliResult<Vec<PathBuf>> {
    if !input.is_dir() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in std::fs::read_dir(input).map_err(|e| CliError::io(input, e))? {
        let path = entry.map_err(|e| CliError::io(input, e))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::Input(format!("{}: no .csv files found", input.display())));
    }
    Ok(files)
}

pub fn cmd_backtest(args: &BacktestArgs, out: &mut dyn Write) -> CliResult<()> {
    let period = args.opts.period;
    let scheme = SplitScheme {
        horizon: args.horizon,
        n_splits: args.splits,
        step: args.step.unwrap_or(args.horizon),
        min_train_length: args.min_train.unwrap_or((2 * period).max(3)),
    };
    if scheme.horizon < 1 || scheme.n_splits < 1 || scheme.step < 1 {
        return Err(CliError::Usage("--h, --splits and --step must all be >= 1".into()));
    }

    let mut loaded: Vec<(String, TimeSeries)> = Vec::new();
    let mut read_failures = Vec::new();
    for path in input_files(&args.input)? {
        let id = series_id(&path);
        match read_series(&path, period) {
            Ok(s) => loaded.push((id, s)),
            Err(e) => read_failures.push(SeriesFailure {
                id,
                error: e.to_string(),
            }),
        }
    }

    let forecaster: Box<dyn Forecaster> = match args.model {
        BacktestModelArg::Naive => Box::new(NaiveSeasonal),
        BacktestModelArg::Lgt | BacktestModelArg::Dlt => {
            let model = if args.model == BacktestModelArg::Lgt {
                ModelArg::Lgt
            } else {
                ModelArg::Dlt
            };
            Box::new(ModelForecaster {
                config: args.opts.fit_config(model),
                point: PointForecast::Deterministic,
            })
        }
    };
    let mut report = run_backtest(&loaded, forecaster.as_ref(), &scheme, args.opts.seed);
    report.failures.extend(read_failures);
    report.failures.sort_by(|a, b| a.id.cmp(&b.id));

    if let Some(path) = &args.output {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(path, json + "\n").map_err(|e| CliError::io(path, e))?;
    }
    let table = score_table(&report);
    if let Some(path) = &args.table {
        std::fs::write(path, &table).map_err(|e| CliError::io(path, e))?;
    }
    out.write_all(table.as_bytes()).map_err(io_out)?;
    for f in &report.failures {
        writeln!(out, "failed {}: {}", f.id, f.error).map_err(io_out)?;
    }
    match (report.aggregate_mean, report.aggregate_std) {
        (Some(m), Some(s)) => {
            writeln!(out, "SMAPE {m:.4} ({s:.4}) over {} series", report.series.len()).map_err(io_out)?;
            Ok(())
        }
        _ => Err(CliError::AllSeriesFailed),
    }
}

fn score_table(report: &BacktestReport) -> String {
    let mut t = String::from("series,splits,smape_mean,smape_std\n");
    for s in &report.series {
        t.push_str(&format!("{},{},{},{}\n", s.id, s.splits.len(), s.mean, s.std));
    }
    t
}
