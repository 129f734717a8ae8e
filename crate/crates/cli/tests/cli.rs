use std::path::Path;
use std::process::{Command, Output};

use quinn_core::data::{fmt_float, Table};
use quinn_core::model::{fit, ModelConfig};
use quinn_core::sampler::NutsConfig;

fn quinn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quinn"))
        .args(args)
        .env_remove("QUINN_CONFIG")
        .output()
        .expect("binary runs")
}

fn quinn_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_quinn"));
    cmd.args(args).env_remove("QUINN_CONFIG");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: [&str; 14] = [
    "--p", "4", "--V", "3", "--iters", "300", "--warmup", "150", "--thin", "3", "--chains", "2",
    "--seed", "11",
];

fn simulate(dir: &Path, design: &str, n: &str) {
    let o = quinn(&["simulate", "--design", design, "--n", n, "--seed", "5", "--out", p(dir)]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn missing_response_names_the_flag() {
    let o = quinn(&["fit", "--data", "d.csv", "--out", "run"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--response"), "{}", stderr(&o));
}

#[test]
fn unknown_flags_are_usage_errors() {
    let o = quinn(&["predict", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    let o = quinn(&["nope"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unreadable_data_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = quinn(&["fit", "--data", "/nonexistent/d.csv", "--response", "y", "--out", p(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/nonexistent/d.csv"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x,y\n1,2\nred,3\n").unwrap();
    let o = quinn(&["fit", "--data", p(&bad), "--response", "y", "--out", p(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("row 1"), "{}", stderr(&o));
}

#[test]
fn simulate_writes_data_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let o = quinn(&["simulate", "--design", "4", "--n", "30", "--reps", "2", "--d", "20", "--seed", "1", "--out", p(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let data = Table::read(&dir.path().join("data_1.csv")).unwrap();
    assert_eq!(data.values.dim(), (30, 21));
    assert_eq!(data.names.last().unwrap(), "y");
    let truth = Table::read(&dir.path().join("truth_0.csv")).unwrap();
    assert_eq!(truth.values.dim(), (200, 20 + 19));
    assert!(dir.path().join("config.json").exists());
    let o = quinn(&["simulate", "--design", "5", "--n", "30", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn persisted_run_predicts_like_an_in_memory_fit() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "2", "60");
    let data = dir.path().join("data_0.csv");
    let run = dir.path().join("run");
    let mut args = vec!["fit", "--data", p(&data), "--response", "y", "--out", p(&run)];
    args.extend(SMALL);
    let o = quinn(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["schema_version", "model.json", "normalization.json", "chain_0.csv", "chain_1.json", "loglik.csv", "waic_table.csv", "config.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let config: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    assert_eq!(config["args"]["command"]["fit"]["sampler"]["seed"], 11);

    let preds = dir.path().join("preds.csv");
    let query = dir.path().join("truth_0.csv");
    let o = quinn(&["predict", "--fit", p(&run), "--query", p(&query), "--taus", "0.05,0.5,0.95", "--out", p(&preds)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&preds).unwrap();
    assert_eq!(text.lines().next().unwrap(), "q_0.05,q_0.5,q_0.95");
    assert_eq!(text.lines().count(), 102);

    // the same fit done in memory, formatted the same way
    let table = Table::read(&data).unwrap();
    let (x, y, _) = table.split_response("y").unwrap();
    let model = ModelConfig {
        chains: 2,
        ..ModelConfig::with_size(4, 3)
    };
    let nuts = NutsConfig {
        n_iter: 300,
        n_warmup: 150,
        thin: 3,
        seed: 11,
        ..NutsConfig::default()
    };
    let f = fit(x.view(), y.view(), &model, &nuts).unwrap();
    let q = Table::read(&query).unwrap().select(&["x1".to_string()]).unwrap();
    let mem = f.predictor(512).unwrap().predict(q.view(), &[0.05, 0.5, 0.95]).unwrap();
    let expected: Vec<String> = mem
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|&v| fmt_float(v)).collect::<Vec<_>>().join(","))
        .collect();
    let got: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(got, expected);

    let o = quinn(&["diagnose", "--fit", p(&run)]);
    let code = o.status.code().unwrap();
    assert!(code == 0 || code == 3, "{code}");
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("log_likelihood") && out.contains("ess_bulk"));

    let bands = dir.path().join("bands.csv");
    let o = quinn(&["predict", "--fit", p(&run), "--query", p(&query), "--taus", "0.5", "--bands", "0.9", "--out", p(&bands)]);
    assert!(o.status.success());
    let head = std::fs::read_to_string(&bands).unwrap();
    assert_eq!(head.lines().next().unwrap(), "q_0.5,lower_0.5,upper_0.5");
}

#[test]
fn ale_and_vi_outputs() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "3", "60");
    let data = dir.path().join("data_0.csv");
    let run = dir.path().join("run");
    let mut args = vec!["fit", "--data", p(&data), "--response", "y", "--out", p(&run)];
    args.extend(SMALL);
    assert!(quinn(&args).status.success());

    let ale = dir.path().join("ale.csv");
    let o = quinn(&["ale", "--fit", p(&run), "--data", p(&data), "--covariate", "x2", "--taus", "0.25,0.75", "--bins", "8", "--draws", "10", "--out", p(&ale)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&ale).unwrap();
    assert_eq!(text.lines().next().unwrap(), "tau,covariate,edge,effect,lower,upper");
    assert_eq!(text.lines().count(), 1 + 2 * 9);

    let pair = dir.path().join("pair.csv");
    let o = quinn(&["ale", "--fit", p(&run), "--data", p(&data), "--covariate", "x1", "--pair", "x2", "--taus", "0.5", "--bins", "4", "--draws", "5", "--out", p(&pair)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&pair).unwrap();
    assert!(text.lines().any(|l| l.starts_with("0.5,interaction,x1,x2")));
    assert!(text.lines().any(|l| l.starts_with("0.5,joint,x1,x2")));

    let vi = dir.path().join("vi.csv");
    let o = quinn(&["vi", "--fit", p(&run), "--data", p(&data), "--pairs", "--taus", "0.5", "--bins", "8", "--draws", "10", "--out", p(&vi)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&vi).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    let means: Vec<f64> = rows.iter().map(|r| r.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(means.windows(2).all(|w| w[0] >= w[1]), "{means:?}");

    let o = quinn(&["ale", "--fit", p(&run), "--data", p(&data), "--covariate", "x9", "--out", p(&ale)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("x9"));
}

#[test]
fn flags_beat_environment_beat_config_file() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "2", "40");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\niters = 100\nwarmup = 50\nthin = 1\nchains = 1\nseed = 3\nresponse = y\np = 3\nV = 2\n").unwrap();
    let run = dir.path().join("run");
    let data = dir.path().join("data_0.csv");
    let o = quinn_env(
        &["fit", "--config", p(&cfg), "--data", p(&data), "--out", p(&run), "--iters", "120"],
        &[("QUINN_WARMUP", "60"), ("QUINN_ITERS", "999")],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let config: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    let s = &config["args"]["command"]["fit"]["sampler"];
    assert_eq!(s["iters"], 120);
    assert_eq!(s["warmup"], 60);
    assert_eq!(s["seed"], 3);
    assert_eq!(config["args"]["command"]["fit"]["model"]["v"][0], 2);
    let model: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["nuts"]["n_iter"], 120);

    std::fs::write(&cfg, "itres = 100\n").unwrap();
    let o = quinn(&["fit", "--config", p(&cfg), "--data", p(&data), "--response", "y", "--out", p(&run)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("itres"));
}

#[test]
fn grid_fit_writes_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "2", "40");
    let run = dir.path().join("run");
    let data = dir.path().join("data_0.csv");
    let o = quinn(&[
        "fit", "--data", p(&data), "--response", "y", "--out", p(&run), "--p", "3,5", "--V", "2,3",
        "--iters", "120", "--warmup", "60", "--thin", "2", "--chains", "1", "--seed", "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(run.join("waic_table.csv")).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let selected: Vec<&Vec<&str>> = rows.iter().filter(|r| r[6] == "1").collect();
    assert_eq!(selected.len(), 1);
    assert_eq!(selected[0][5], "1");
    let best: f64 = selected[0][2].parse().unwrap();
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() >= best));
}

fn pipeline(dir: &Path) {
    let sim = dir.join("sim");
    let run = dir.join("run");
    simulate(&sim, "3", "80");
    let data = sim.join("data_0.csv");
    let mut args = vec!["--threads", "2", "fit", "--data", p(&data), "--response", "y", "--out", p(&run)];
    args.extend(SMALL);
    let o = quinn(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let query = sim.join("truth_0.csv");
    let pred = dir.join("pred.csv");
    let o = quinn(&["predict", "--fit", p(&run), "--query", p(&query), "--taus", "0.1,0.5,0.9", "--bands", "0.9", "--out", p(&pred)]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn identical_seeds_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    for f in ["run/chain_0.csv", "run/chain_1.csv", "run/chain_0.json", "run/chain_1.json", "run/loglik.csv", "pred.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}
