use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bayesmooth"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Trending seasonal series with a little deterministic wobble.
fn values(n: usize, m: usize) -> Vec<f64> {
    (0..n)
        .map(|t| {
            let phase = 2.0 * std::f64::consts::PI * (t % m) as f64 / m as f64;
            200.0 + 0.8 * t as f64 + 15.0 * phase.sin() + ((t * 37) % 11) as f64 * 0.7
        })
        .collect()
}

fn write_series(dir: &Path, name: &str, y: &[f64]) -> PathBuf {
    let mut body = String::from("ds,y\n");
    for (t, v) in y.iter().enumerate() {
        body.push_str(&format!("{},{v}\n", t + 1));
    }
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fit_multiplicative_weekly_writes_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_series(dir.path(), "y.csv", &values(156, 52));
    let model = dir.path().join("m.bin");
    let o = run(&[
        "fit",
        "--model",
        "lgt",
        "--input",
        s(&input),
        "--period",
        "52",
        "--mode",
        "multiplicative",
        "--seed",
        "7",
        "--output",
        s(&model),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(model.exists());
    let out = stdout(&o);
    assert!(out.contains("MAP log-posterior"), "{out}");
    assert!(out.contains("rho_l"), "{out}");
}

#[test]
fn zero_in_multiplicative_mode_is_rejected_with_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut y = values(30, 4);
    y[9] = 0.0;
    let input = write_series(dir.path(), "y.csv", &y);
    let o = run(&[
        "fit",
        "--model",
        "dlt",
        "--input",
        s(&input),
        "--period",
        "4",
        "--mode",
        "multiplicative",
        "--output",
        s(&dir.path().join("m.bin")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("row 10"), "{err}");
    assert!(err.contains("non-positive value"), "{err}");
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "ds,y\n1,1\n2,2\n2,3\n").unwrap();
    let o = run(&[
        "fit",
        "--model",
        "dlt",
        "--input",
        s(&p),
        "--output",
        s(&dir.path().join("m.bin")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));

    let o = run(&[
        "fit",
        "--model",
        "dlt",
        "--input",
        "/nonexistent.csv",
        "--output",
        "x.bin",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["fit", "--model", "arima", "--input", s(&p), "--output", "x.bin"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_series(dir.path(), "y.csv", &values(48, 12));
    let (a, b) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
    for out in [&a, &b] {
        let o = run(&[
            "fit",
            "--model",
            "dlt",
            "--input",
            s(&input),
            "--period",
            "12",
            "--seed",
            "3",
            "--output",
            s(out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

fn parse_table(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn predict_table_shape_and_monotone_quantiles() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_series(dir.path(), "y.csv", &values(60, 12));
    let model = dir.path().join("m.bin");
    let o = run(&[
        "fit",
        "--model",
        "lgt",
        "--input",
        s(&input),
        "--period",
        "12",
        "--mode",
        "multiplicative",
        "--output",
        s(&model),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&[
        "predict",
        "--model",
        s(&model),
        "--horizon",
        "13",
        "--quantiles",
        "0.05,0.5,0.95",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = parse_table(&stdout(&o));
    assert_eq!(header, ["step", "median", "q0.05", "q0.5", "q0.95"]);
    assert_eq!(rows.len(), 13);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[0], (k + 1) as f64);
        // Median plus one column per quantile.
        assert_eq!(row.len() - 1, 4);
        assert!(row[2] <= row[3] && row[3] <= row[4], "{row:?}");
        assert_eq!(row[1], row[3]);
        assert!(row[1..].iter().all(|v| *v > 0.0), "{row:?}");
    }
}

#[test]
fn predict_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("ds,y,promo\n");
    for (t, v) in values(40, 4).iter().enumerate() {
        body.push_str(&format!("{},{v},{}\n", t + 1, t % 2));
    }
    let input = dir.path().join("reg.csv");
    std::fs::write(&input, body).unwrap();
    let model = dir.path().join("m.bin");
    let o = run(&[
        "fit",
        "--model",
        "dlt",
        "--input",
        s(&input),
        "--period",
        "4",
        "--output",
        s(&model),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = run(&["predict", "--model", s(&model), "--horizon", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("regressors missing"), "{}", stderr(&o));

    let future = dir.path().join("future.csv");
    std::fs::write(&future, "ds,promo\n41,1\n42,0\n43,1\n").unwrap();
    let o = run(&[
        "predict",
        "--model",
        s(&model),
        "--horizon",
        "3",
        "--regressors",
        s(&future),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 4);

    let mut bytes = std::fs::read(&model).unwrap();
    let v = bytes.iter().position(|&b| b == b'\n').unwrap() - 1;
    bytes[v] = b'7';
    let bumped = dir.path().join("v7.bin");
    std::fs::write(&bumped, bytes).unwrap();
    let o = run(&[
        "predict",
        "--model",
        s(&bumped),
        "--horizon",
        "3",
        "--regressors",
        s(&future),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unsupported artifact version"), "{}", stderr(&o));

    let o = run(&["predict", "--model", s(&model), "--horizon", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_series(dir.path(), "y.csv", &values(48, 12));
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(
        &cfg,
        format!(
            "# experiment\nmodel = dlt\ninput = {}\nperiod = 12\nglobal_trend = flat\noutput = {}\n",
            s(&input),
            s(&dir.path().join("m.bin"))
        ),
    )
    .unwrap();
    let o = run(&["fit", "--config", s(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("global trend flat"));
    let o = run(&["fit", "--config", s(&cfg), "--global-trend", "loglinear"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("global trend loglinear"));
}

#[test]
fn backtest_weekly_three_splits() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_series(dir.path(), "weekly.csv", &values(104, 13));
    let report = dir.path().join("r.json");
    let o = run(&[
        "backtest",
        "--model",
        "dlt",
        "--input",
        s(&input),
        "--period",
        "13",
        "--h",
        "13",
        "--splits",
        "3",
        "--step",
        "26",
        "--output",
        s(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    let splits = json["series"][0]["splits"].as_array().unwrap();
    let ends: Vec<u64> = splits.iter().map(|s| s["train_end"].as_u64().unwrap()).collect();
    assert_eq!(ends, [39, 65, 91]);
    assert!(stdout(&o).contains("SMAPE"));
}

#[test]
fn backtest_single_holdout() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_series(dir.path(), "monthly.csv", &values(72, 12));
    let report = dir.path().join("r.json");
    let o = run(&[
        "backtest",
        "--model",
        "lgt",
        "--mode",
        "multiplicative",
        "--input",
        s(&input),
        "--period",
        "12",
        "--h",
        "18",
        "--splits",
        "1",
        "--output",
        s(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    let splits = json["series"][0]["splits"].as_array().unwrap();
    assert_eq!(splits.len(), 1);
    assert_eq!(splits[0]["train_end"].as_u64(), Some(54));
}

#[test]
fn backtest_directory_survives_bad_file() {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..4 {
        let mut y = values(40, 4);
        y.iter_mut().for_each(|v| *v += i as f64);
        write_series(dir.path(), &format!("s{i}.csv"), &y);
    }
    std::fs::write(dir.path().join("broken.csv"), "not,a\nseries,file\n").unwrap();
    let table = dir.path().join("t.csv");
    let o = run(&[
        "backtest",
        "--model",
        "naive",
        "--input",
        s(dir.path()),
        "--period",
        "4",
        "--h",
        "4",
        "--table",
        s(&table),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("failed broken"), "{out}");
    assert!(out.contains("over 4 series"), "{out}");
    assert_eq!(std::fs::read_to_string(&table).unwrap().lines().count(), 5);

    let only_bad = dir.path().join("broken.csv");
    let o = run(&["backtest", "--model", "naive", "--input", s(&only_bad), "--h", "4"]);
    assert_eq!(o.status.code(), Some(1));
}
