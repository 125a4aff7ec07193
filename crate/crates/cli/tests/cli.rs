use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn nets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/nets")
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/synthetic34.csv")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fermentor"))
        .args(args)
        .env_remove("FERMENTOR_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn verify_exit_codes() {
    let n = nets();
    let sound = run(&["verify", p(&n.join("sequential.net"))]);
    assert_eq!(sound.status.code(), Some(0));
    assert!(stdout(&sound).contains("soundness: sound"));

    let ssf = run(&["verify", p(&n.join("ssf.net"))]);
    assert_eq!(ssf.status.code(), Some(0));

    let broken = run(&["verify", p(&n.join("broken_xor.net"))]);
    assert_eq!(broken.status.code(), Some(1));
    let out = stdout(&broken);
    assert!(out.contains("clause 2"), "{out}");
    assert!(out.contains("witness"), "{out}");

    assert_eq!(run(&["verify", "no/such.net"]).status.code(), Some(3));
    assert_eq!(run(&["verify"]).status.code(), Some(3));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(3));
}

#[test]
fn verify_truncated_is_unknown() {
    let o = run(&["verify", p(&nets().join("ssf.net")), "--budget", "50"]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
}

#[test]
fn verify_json_embeds_config() {
    let o = run(&[
        "verify",
        p(&nets().join("dead_transition.net")),
        "--report",
        "json",
        "--no-timing",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["config"]["seed"], 42);
    assert_eq!(v["config"]["timing"], false);
    assert_eq!(v["sound"]["verdict"], "unsound");
    assert_eq!(v["sound"]["clause"], 3);
    assert!(v["workflow_stats"]["wall_time_ms"].is_null());
}

#[test]
fn parse_errors_exit_three() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.net");
    std::fs::write(&bad, "place a\narc a -> nowhere\n").unwrap();
    let o = run(&["verify", p(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.net"));
}

#[test]
fn reach_chain_counts_and_compress() {
    let dir = TempDir::new().unwrap();
    let chain = dir.path().join("chain.net");
    std::fs::write(
        &chain,
        "place start init 1\nplace end\ntrans t\narc start -> t\narc t -> end\n",
    )
    .unwrap();
    let o = run(&["reach", p(&chain)]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("digraph"));
    assert!(out.contains("2 nodes, 1 edge\n"), "{out}");

    let star = dir.path().join("star.net");
    std::fs::write(&star, "place p init 5\nplace q\ntrans t\narc p -> t\narc t -> q\n").unwrap();
    let dot = dir.path().join("star.dot");
    let o = run(&["reach", p(&star), "--compress", "--dot", p(&dot)]);
    let out = stdout(&o);
    assert!(out.contains("6 nodes, 5 edges"), "{out}");
    assert!(out.contains("compressed: 2 nodes, 1 edge"), "{out}");
    assert!(out.contains("reachability check passed"), "{out}");
    assert!(std::fs::read_to_string(&dot).unwrap().contains("t*"));
}

#[test]
fn reach_ssf_matches_golden_counts() {
    let golden = include_str!("../../core/tests/golden/ssf_counts.txt");
    let row = golden.lines().find(|l| l.starts_with("false")).unwrap();
    let f: Vec<&str> = row.split_whitespace().collect();
    let dir = TempDir::new().unwrap();
    let dot = dir.path().join("ssf.dot");
    // the bundled file carries its reset transition, so `reach` sees the extended net
    let o = run(&["reach", p(&nets().join("ssf.net")), "--dot", p(&dot)]);
    assert!(
        stdout(&o).starts_with(&format!("{} nodes, {} edges", f[3], f[4])),
        "{}",
        stdout(&o)
    );
}

#[test]
fn synth_then_augment_with_loose_threshold() {
    let dir = TempDir::new().unwrap();
    let gen = dir.path().join("gen.csv");
    let o = run(&[
        "augment",
        p(&fixture()),
        "--threshold",
        "1",
        "--target",
        "200",
        "--gan-epochs",
        "20",
        "--out",
        p(&gen),
        "--report",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["generated"], 200);
    assert_eq!(v["rounds"].as_array().unwrap().len(), 1);
    assert_eq!(v["rounds"][0]["acceptance_rate"], 1.0);
    let text = std::fs::read_to_string(&gen).unwrap();
    assert_eq!(text.lines().count(), 201);
    assert!(text.starts_with("cellar_temp,humidity,starch,acidity,alcohol\n"));
}

#[test]
fn augment_rejects_bad_schema() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b\n1,2\n").unwrap();
    let o = run(&["augment", p(&bad), "--out", p(&dir.path().join("x.csv"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn train_predict_evaluate_on_linear_data() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("lin.csv");
    let mut csv = String::from("cellar_temp,humidity,starch,acidity,alcohol\n");
    let mut rows = Vec::new();
    for i in 0..30 {
        let c = 39.0 + (i % 6) as f64;
        let h = 44.0 + (i % 4) as f64;
        let s = 33.0 + (i % 5) as f64 * 0.75;
        let a = 1.3 + (i % 3) as f64 * 0.25;
        let y = 10.0 + 0.5 * c - 0.2 * h + 0.3 * s - 2.0 * a;
        csv.push_str(&format!("{c},{h},{s},{a},{y}\n"));
        rows.push(([c, h, s, a], y));
    }
    std::fs::write(&data, csv).unwrap();
    let model = dir.path().join("m.txt");
    let o = run(&[
        "train",
        p(&data),
        "--model",
        p(&model),
        "--arch",
        "4,16,1",
        "--no-batch-norm",
        "--epochs",
        "4000",
        "--learning-rate",
        "0.5",
        "--batch-size",
        "30",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let (x, y) = rows[7];
    let input = format!("{},{},{},{}", x[0], x[1], x[2], x[3]);
    let o = run(&["predict", "--model", p(&model), "--input", &input]);
    let got: f64 = stdout(&o).trim().parse().unwrap();
    assert!((got - y).abs() / y.abs() < 0.01, "{got} vs {y}");

    let o = run(&["evaluate", p(&data), "--model", p(&model), "--report", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["mse"].as_f64().unwrap() < 1e-2, "{v}");

    let out = dir.path().join("pred.csv");
    let o = run(&["predict", "--model", p(&model), "--data", p(&data), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 31);

    assert_eq!(
        run(&["predict", "--model", p(&model), "--input", "1,2"]).status.code(),
        Some(3)
    );
    assert_eq!(
        run(&["predict", "--model", p(&data), "--input", "1,2,3,4"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn bench_emits_four_rows() {
    let dir = TempDir::new().unwrap();
    let plot = dir.path().join("plot.csv");
    let o = run(&[
        "bench",
        p(&fixture()),
        "--target",
        "100",
        "--gan-epochs",
        "10",
        "--epochs",
        "5",
        "--plot-csv",
        p(&plot),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&plot).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("size,fcnn_ms,mlr_ms,gan_prediction_ms"));
    let sizes: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(sizes, ["34", "429", "750", "1077"]);
}

#[test]
fn synth_rows_and_errors() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s.csv");
    let o = run(&["synth", "--n", "34", "--seed", "5", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 35);
    assert_eq!(run(&["synth", "--n", "0", "--out", p(&out)]).status.code(), Some(3));
    assert_eq!(
        run(&["synth", "--n", "5", "--noise", "-1", "--out", p(&out)])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn seed_layers_file_env_flag() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "seed = 3\nnoise = 0.0\n").unwrap();
    let gen = |extra: &[&str], env: Option<&str>| {
        let out = dir.path().join("s.csv");
        let mut c = Command::new(env!("CARGO_BIN_EXE_fermentor"));
        c.args(["--config", p(&cfg), "synth", "--n", "5", "--out", p(&out)])
            .args(extra);
        match env {
            Some(v) => c.env("FERMENTOR_SEED", v),
            None => c.env_remove("FERMENTOR_SEED"),
        };
        assert!(c.status().unwrap().success());
        std::fs::read_to_string(&out).unwrap()
    };
    let file_only = gen(&[], None);
    let env = gen(&[], Some("9"));
    let flag = gen(&["--seed", "3"], Some("9"));
    assert_ne!(file_only, env);
    assert_eq!(file_only, flag);
    assert_eq!(env, gen(&["--seed", "9"], None));

    std::fs::write(&cfg, "sede = 3\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fermentor"))
        .args([
            "--config",
            p(&cfg),
            "synth",
            "--n",
            "5",
            "--out",
            p(&dir.path().join("x.csv")),
        ])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bad_env_seed_is_an_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_fermentor"))
        .args(["synth", "--n", "3", "--out", "/dev/null"])
        .env("FERMENTOR_SEED", "abc")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}
