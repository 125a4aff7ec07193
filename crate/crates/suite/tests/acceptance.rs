//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use fermentor_core::analysis::{analyze, compress, explore};
use fermentor_core::data::{split, synthesize, Sample, ScalerParams, SynthConfig, SYNTH_RANGES};
use fermentor_core::nn::mse;
use fermentor_core::par::Exec;
use fermentor_core::petri::{parse_net, workflow_views, NetDefinition, NetState, SSF_NET};
use fermentor_core::predictor::{compare, fit_mlr, train_predictor, CompareConfig, FcnnConfig};
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{first_match, gradient_check, random_net, random_workflow, reach_matrix, RawNet, RawState};
use tempfile::TempDir;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn manifest() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn nets_dir() -> PathBuf {
    manifest().join("../core/nets")
}

fn fixture() -> PathBuf {
    manifest().join("../core/data/synthetic34.csv")
}

/// The `fermentor` binary sits one level above this test executable; build it
/// when it is missing.
fn exe() -> PathBuf {
    static EXE: OnceLock<PathBuf> = OnceLock::new();
    EXE.get_or_init(|| {
        let dir = std::env::current_exe()
            .unwrap()
            .parent()
            .unwrap()
            .parent()
            .unwrap()
            .to_path_buf();
        let path = dir.join(format!("fermentor{}", std::env::consts::EXE_SUFFIX));
        let mut build = Command::new(std::env::var("CARGO").unwrap_or_else(|_| "cargo".into()));
        build.args(["build", "-q", "-p", "fermentor-cli"]);
        if dir.file_name().is_some_and(|n| n == "release") {
            build.arg("--release");
        }
        let status = build.current_dir(manifest()).status().expect("cargo is runnable");
        assert!(status.success() && path.exists(), "could not build {}", path.display());
        path
    })
    .clone()
}

fn bin(args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(exe())
        .args(args)
        .env_remove("FERMENTOR_SEED")
        .output()
        .map_err(|e| e.to_string())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit_s as f64 {
        Ok(())
    } else {
        Err(format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64()))
    }
}

fn firing_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut states = 0;
    for i in 0..200 {
        let raw = random_net(&mut rng, 5, 4);
        let oracle = raw
            .brute_force_states(200_000)
            .ok_or(format!("net {i}: oracle overflow"))?;
        let g = explore(&raw.to_net(), 1_000_000).map_err(|e| e.to_string())?;
        if g.truncated {
            return Err(format!("net {i}: truncated"));
        }
        let lib: BTreeSet<RawState> = g
            .nodes()
            .map(|s: &NetState| (s.marking.clone(), s.residual.clone()))
            .collect();
        if lib != oracle {
            return Err(format!(
                "net {i}: {} library vs {} oracle states",
                lib.len(),
                oracle.len()
            ));
        }
        states += oracle.len();
    }
    within(start.elapsed(), 60)?;
    Ok(format!(
        "200 nets, {states} states, {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

fn suite() -> Vec<(String, NetDefinition)> {
    let mut nets = Vec::new();
    for name in ["sequential", "parallel", "broken_xor", "dead_transition"] {
        let text = std::fs::read_to_string(nets_dir().join(format!("{name}.net"))).unwrap();
        nets.push((name.to_string(), parse_net(&text).unwrap()));
    }
    nets.push(("ssf".into(), parse_net(SSF_NET).unwrap().with_restore_on_reset(true)));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..5 {
        let text = random_workflow(&mut rng, 3 + i, i % 2 == 1);
        nets.push((format!("random{i}"), parse_net(&text).unwrap()));
    }
    nets
}

fn routes_agree() -> Outcome {
    let mut verdicts = Vec::new();
    for (name, net) in suite() {
        let r = analyze(&net, 100_000, Exec::default(), false).map_err(|e| format!("{name}: {e}"))?;
        if r.routes_agree() != Some(true) {
            return Err(format!("{name}: direct {} vs extended-net {}", r.sound, r.theorem1));
        }
        verdicts.push(format!(
            "{name}={}",
            if r.sound.is_sound() { "sound" } else { "unsound" }
        ));
    }
    Ok(verdicts.join(" "))
}

fn compression_reachability() -> Outcome {
    let mut checked = 0;
    for (name, net) in suite() {
        let (plain, ext, _) = workflow_views(&net).map_err(|e| e.to_string())?;
        for (kind, n) in [("plain", plain), ("extended", ext)] {
            let g = explore(&n, 100_000).map_err(|e| e.to_string())?;
            if g.truncated || g.node_count() > 500 {
                continue;
            }
            let c = compress(&g).map_err(|e| e.to_string())?;
            let before: Vec<(usize, usize)> = g.edges.iter().map(|e| (e.from, e.to)).collect();
            let after: Vec<(usize, usize)> = c.edges.iter().map(|e| (e.from, e.to)).collect();
            if reach_matrix(g.node_count(), &before, &c.nodes) != reach_matrix(g.node_count(), &after, &c.nodes) {
                return Err(format!("{name}/{kind}: reachability differs"));
            }
            checked += 1;
        }
    }
    if checked == 0 {
        return Err("no graphs checked".into());
    }
    Ok(format!("{checked} graphs"))
}

fn residual_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut steps = 0;
    for i in 0..1000u64 {
        let raw: RawNet = random_net(&mut rng, 5, 4);
        let net = raw.to_net();
        let rw = raw.rewritable();
        let mut walk = ChaCha8Rng::seed_from_u64(i);
        let mut state = net.initial_state();
        let mut fired = vec![0u32; raw.transitions];
        for _ in 0..30 {
            let enabled: Vec<usize> = (0..raw.transitions).filter(|&t| net.is_enabled(&state, t)).collect();
            if enabled.is_empty() {
                break;
            }
            let t = enabled[walk.random_range(0..enabled.len())];
            state = net
                .try_fire(&state, t)
                .ok_or(format!("sequence {i}: enabled transition refused"))?;
            fired[t] += 1;
            steps += 1;
            for (slot, &arc) in rw.iter().enumerate() {
                let a = raw.arcs[arc];
                let want = a.limit.unwrap().saturating_sub(fired[a.transition]);
                if state.residual[slot] != want {
                    return Err(format!(
                        "sequence {i}: arc {arc} residual {} vs {want}",
                        state.residual[slot]
                    ));
                }
            }
        }
    }
    Ok(format!("1000 sequences, {steps} firings"))
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for case in 0..20 {
        let e = gradient_check(case);
        if e.is_nan() || e >= 1e-4 {
            return Err(format!("case {case}: relative error {e:e}"));
        }
        worst = worst.max(e);
    }
    within(start.elapsed(), 30)?;
    Ok(format!(
        "worst relative error {worst:.2e}, {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

fn scaling() -> Outcome {
    let col: Array2<f64> = array![[40.0], [40.5], [43.0], [42.0]];
    let s = ScalerParams::fit(&col).map_err(|e| e.to_string())?;
    let scaled = s.scale(&col).map_err(|e| e.to_string())?;
    for (got, want) in scaled.iter().zip([0.0, 0.1667, 1.0, 0.6667]) {
        if (got - want).abs() >= 5e-5 {
            return Err(format!("{got} vs {want}"));
        }
    }
    let back = s.unscale(&scaled).map_err(|e| e.to_string())?;
    let err = back
        .iter()
        .zip(col.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if err > 1e-12 {
        return Err(format!("round trip error {err:e}"));
    }
    let shown: Vec<String> = scaled.iter().map(|v| format!("{v:.4}")).collect();
    Ok(format!("[{}], round trip error {err:.1e}", shown.join(", ")))
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    text.lines()
        .skip(1)
        .map(|l| {
            l.split(',')
                .map(|v| v.parse::<f64>().map_err(|e| format!("{v}: {e}")))
                .collect()
        })
        .collect()
}

fn filter_invariant() -> Outcome {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let real_rows = read_rows(&fixture())?;
    let real = Array2::from_shape_fn((real_rows.len(), 5), |(i, j)| real_rows[i][j]);
    let scaler = ScalerParams::fit(&real).map_err(|e| e.to_string())?;
    let real_n = scaler.scale(&real).map_err(|e| e.to_string())?;

    let gen = dir.path().join("gen.csv");
    let o = bin(&[
        "augment",
        p(&fixture()),
        "--threshold",
        "0.15",
        "--out",
        p(&gen),
        "--emit-provenance",
    ])?;
    if !o.status.success() {
        return Err(String::from_utf8_lossy(&o.stderr).into_owned());
    }
    let rows = read_rows(&gen)?;
    if rows.is_empty() {
        return Err("no samples accepted".into());
    }
    for (i, r) in rows.iter().enumerate() {
        let x = Array2::from_shape_vec((1, 5), r[..5].to_vec()).unwrap();
        let xn = scaler.scale(&x).map_err(|e| e.to_string())?;
        if first_match(xn.row(0).as_slice().unwrap(), &real_n, 0.15).is_none() {
            return Err(format!("row {i} has no real sample within 0.15"));
        }
    }

    let loose = dir.path().join("loose.csv");
    let o = bin(&[
        "augment",
        p(&fixture()),
        "--threshold",
        "1",
        "--out",
        p(&loose),
        "--report",
        "json",
    ])?;
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).map_err(|e| e.to_string())?;
    let rates: Vec<f64> = v["rounds"]
        .as_array()
        .ok_or("no rounds")?
        .iter()
        .map(|r| r["acceptance_rate"].as_f64().unwrap())
        .collect();
    if rates.iter().any(|&r| r != 1.0) {
        return Err(format!("loose threshold rates {rates:?}"));
    }
    Ok(format!(
        "{} accepted rows re-scanned, loose threshold rate 1.0",
        rows.len()
    ))
}

fn ordering() -> Outcome {
    let start = Instant::now();
    let (mut fcnn_beats_mlr, mut gan_above_fcnn) = (0, 0);
    let mut lines = Vec::new();
    for seed in 0..10u64 {
        let all = synthesize(&SynthConfig {
            n: 59,
            noise: 0.25,
            seed,
        })
        .map_err(|e| e.to_string())?;
        let (train, test) = split(&all, seed).map_err(|e| e.to_string())?;
        let mut cfg = CompareConfig::default();
        cfg.gan.target_count = 500;
        cfg.gan.seed = seed;
        cfg.fcnn.train.seed = seed;
        cfg.timing = false;
        let r = compare(&train, &test, &cfg, Exec::default()).map_err(|e| e.to_string())?;
        let get = |m: &str| r.methods.iter().find(|x| x.method == m).unwrap().test_mse;
        let (f, m, g) = (get("fcnn"), get("mlr"), get("gan_prediction"));
        fcnn_beats_mlr += (f < m) as usize;
        gan_above_fcnn += (g > f) as usize;
        lines.push(format!(
            "seed {seed}: fcnn {f:.3} mlr {m:.3} gan {g:.3} (generated {})",
            r.augment.generated
        ));
    }
    for l in &lines {
        println!("    {l}");
    }
    let detail = format!(
        "fcnn<mlr in {fcnn_beats_mlr}/10, gan>fcnn in {gan_above_fcnn}/10, {:.0}s",
        start.elapsed().as_secs_f64()
    );
    if fcnn_beats_mlr >= 8 && gan_above_fcnn >= 8 && start.elapsed() < Duration::from_secs(300) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const PLANTED: [f64; 5] = [2.0, 0.5, -0.25, 0.3, -1.5];

fn planted(n: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x = SYNTH_RANGES.map(|(lo, hi)| rng.random_range(lo..=hi));
            let y = PLANTED[0] + (0..4).map(|j| PLANTED[j + 1] * x[j]).sum::<f64>();
            Sample::new(x[0], x[1], x[2], x[3], y)
        })
        .collect()
}

fn linear_recovery() -> Outcome {
    let start = Instant::now();
    let train = planted(40, 2);
    let test = planted(200, 3);
    let m = fit_mlr(&train).map_err(|e| e.to_string())?;
    let coef_err = m
        .beta
        .iter()
        .zip(PLANTED)
        .map(|(b, w)| (b - w).abs())
        .fold(0.0, f64::max);

    let mut cfg = FcnnConfig::default();
    cfg.train.max_epochs = 5000;
    let (model, losses) = train_predictor(&train, &cfg).map_err(|e| e.to_string())?;
    let pred: Vec<f64> = test.iter().map(|s| model.predict(s.inputs()).unwrap()).collect();
    let truth: Vec<f64> = test.iter().map(|s| s.alcohol.unwrap()).collect();
    let test_mse = mse(&pred, &truth).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let detail = format!(
        "mlr max coefficient error {coef_err:.1e}, fcnn test mse {test_mse:.2e} after {} epochs, {:.1}s",
        losses.len(),
        elapsed.as_secs_f64()
    );
    if coef_err <= 1e-8 && test_mse < 1e-3 && elapsed < Duration::from_secs(60) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism() -> Outcome {
    let nets = nets_dir();
    let fx = fixture();
    let dirs = [TempDir::new().unwrap(), TempDir::new().unwrap()];
    let mut captured: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for dir in &dirs {
        let d = dir.path();
        let f = |name: &str| d.join(name).to_str().unwrap().to_string();
        let small = ["--gan-epochs", "50", "--epochs", "50"];
        let mut cmds: Vec<(&str, Vec<String>)> = vec![
            (
                "synth",
                vec![
                    "synth".into(),
                    "--n".into(),
                    "59".into(),
                    "--out".into(),
                    f("synth.csv"),
                ],
            ),
            (
                "augment",
                vec![
                    "augment".into(),
                    p(&fx).into(),
                    "--out".into(),
                    f("aug.csv"),
                    "--emit-provenance".into(),
                    "--report".into(),
                    "json".into(),
                ],
            ),
            (
                "verify",
                vec![
                    "verify".into(),
                    p(&nets.join("ssf.net")).into(),
                    "--report".into(),
                    "json".into(),
                    "--no-timing".into(),
                    "--dot".into(),
                    f("verify.dot"),
                ],
            ),
            (
                "reach",
                vec![
                    "reach".into(),
                    p(&nets.join("parallel.net")).into(),
                    "--compress".into(),
                    "--dot".into(),
                    f("reach.dot"),
                ],
            ),
            (
                "train",
                vec![
                    "train".into(),
                    p(&fx).into(),
                    "--model".into(),
                    f("model.txt"),
                    "--epochs".into(),
                    "50".into(),
                ],
            ),
            (
                "predict",
                vec![
                    "predict".into(),
                    "--model".into(),
                    f("model.txt"),
                    "--data".into(),
                    p(&fx).into(),
                    "--out".into(),
                    f("pred.csv"),
                ],
            ),
        ];
        let mut compare = vec![
            "compare".into(),
            p(&fx).into(),
            f("synth.csv"),
            "--report".into(),
            "json".into(),
            "--no-timing".into(),
            "--json-out".into(),
            f("compare.json"),
        ];
        compare.extend(small.iter().map(|s| s.to_string()));
        cmds.push(("compare", compare));
        let mut bench = vec![
            "bench".into(),
            p(&fx).into(),
            "--no-timing".into(),
            "--plot-csv".into(),
            f("plot.csv"),
        ];
        bench.extend(small.iter().map(|s| s.to_string()));
        cmds.push(("bench", bench));

        let mut run = Vec::new();
        for (name, args) in cmds {
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            let o = bin(&args)?;
            if o.status.code() == Some(3) {
                return Err(format!("{name}: {}", String::from_utf8_lossy(&o.stderr)));
            }
            run.push((format!("{name} stdout"), o.stdout));
        }
        for file in [
            "synth.csv",
            "aug.csv",
            "verify.dot",
            "reach.dot",
            "model.txt",
            "pred.csv",
            "compare.json",
            "plot.csv",
        ] {
            run.push((
                file.to_string(),
                std::fs::read(d.join(file)).map_err(|e| format!("{file}: {e}"))?,
            ));
        }
        captured.push(run);
    }
    // paths differ between the two runs, so blank them before comparing
    let norm = |bytes: &[u8], dir: &Path| String::from_utf8_lossy(bytes).replace(dir.to_str().unwrap(), "<dir>");
    let mut differing = Vec::new();
    for ((name, a), (_, b)) in captured[0].iter().zip(&captured[1]) {
        if norm(a, dirs[0].path()) != norm(b, dirs[1].path()) {
            differing.push(name.clone());
        }
    }
    if differing.is_empty() {
        Ok(format!("{} outputs identical", captured[0].len()))
    } else {
        Err(format!("differ: {}", differing.join(", ")))
    }
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("firing semantics match brute-force oracle", firing_oracle),
        ("direct and extended-net soundness agree", routes_agree),
        ("compression preserves reachability", compression_reachability),
        ("rewritable-arc residual law", residual_law),
        ("gradient check", gradients),
        ("min-max scaling", scaling),
        ("augment filter invariant", filter_invariant),
        ("pipeline ordering", ordering),
        ("linear recovery", linear_recovery),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
