use std::fmt::Write as _;
use std::path::Path;

use fermentor_core::analysis::{
    analyze, compress, compressed_to_dot, explore_with, reach_to_dot, reachability_among, AnalysisReport, Soundness,
};
use fermentor_core::augment::{augment as run_augment, RoundStats};
use fermentor_core::data::{
    inputs_matrix, read_samples, synthesize, to_matrix, write_samples, Sample, ScalerParams, SynthConfig, INPUT_DIMS,
};
use fermentor_core::nn::mse;
use fermentor_core::par::Exec;
use fermentor_core::petri::{parse_net, workflow_views, NetDefinition};
use fermentor_core::predictor::{
    fit_all, plot_csv, time_method, train_predictor, MethodResult, PredictorModel, METHODS, TIMING_SIZES,
};
use serde::Serialize;

use crate::config::{Effective, ReportFormat};
use crate::{read_file, write_file, CliError, EXIT_OK, EXIT_UNKNOWN, EXIT_UNSOUND};

/// Graphs larger than this skip the quadratic reachability comparison.
const REACH_CHECK_LIMIT: usize = 500;

fn load_net(path: &Path, eff: Option<&Effective>) -> Result<NetDefinition, CliError> {
    let text = read_file(path)?;
    let mut net = parse_net(&text).map_err(|source| CliError::Parse {
        path: path.display().to_string(),
        source,
    })?;
    if let Some(eff) = eff {
        if let Some(limit) = eff.rewrite_limit {
            net = net.with_rewrite_limits(limit)?;
        }
        if eff.restore_on_reset {
            net = net.with_restore_on_reset(true);
        }
    }
    Ok(net)
}

fn load_samples(path: &Path) -> Result<Vec<Sample>, CliError> {
    let text = read_file(path)?;
    Ok(read_samples(text.as_bytes())?)
}

fn samples_csv(
    samples: &[Sample],
    provenance: Option<&[fermentor_core::data::Provenance]>,
) -> Result<String, CliError> {
    let mut buf = Vec::new();
    write_samples(&mut buf, samples, provenance)?;
    Ok(String::from_utf8(buf).expect("csv writer emits UTF-8"))
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

fn counts(nodes: usize, edges: usize) -> String {
    format!("{}, {}", plural(nodes, "node"), plural(edges, "edge"))
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config: &'a Effective,
    #[serde(flatten)]
    body: T,
}

fn json<T: Serialize>(eff: &Effective, body: T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(&Envelope { config: eff, body })?;
    s.push('\n');
    Ok(s)
}

fn config_line(eff: &Effective) -> Result<String, CliError> {
    Ok(format!("config {}\n", serde_json::to_string(eff)?))
}

pub fn verify(eff: &Effective, path: &Path, dot: Option<&Path>) -> Result<u8, CliError> {
    let net = load_net(path, Some(eff))?;
    let report = analyze(&net, eff.budget, Exec::default(), eff.timing)?;
    if let Some(dot) = dot {
        let (plain, _, _) = workflow_views(&net).map_err(fermentor_core::analysis::VerifyError::from)?;
        let graph = explore_with(&plain, eff.budget, Exec::default())?;
        write_file(dot, &reach_to_dot(&plain, &graph))?;
    }
    let text = match eff.report {
        ReportFormat::Json => json(eff, &report)?,
        ReportFormat::Text => verify_text(eff, &report)?,
    };
    print!("{text}");
    Ok(match report.sound {
        Soundness::Sound => EXIT_OK,
        Soundness::Unsound(_) => EXIT_UNSOUND,
        Soundness::Unknown { .. } => EXIT_UNKNOWN,
    })
}

fn verify_text(eff: &Effective, r: &AnalysisReport) -> Result<String, CliError> {
    let mut out = config_line(eff)?;
    let w = |out: &mut String, s: String| out.push_str(&s);
    w(&mut out, format!("net {}\n", r.net));
    w(
        &mut out,
        format!(
            "workflow graph: {}{}\n",
            counts(r.workflow_stats.nodes, r.workflow_stats.edges),
            if r.workflow_stats.truncated { " (truncated)" } else { "" }
        ),
    );
    w(
        &mut out,
        format!(
            "extended graph: {}{}\n",
            counts(r.extended_stats.nodes, r.extended_stats.edges),
            if r.extended_stats.truncated { " (truncated)" } else { "" }
        ),
    );
    if let Some(ms) = r.workflow_stats.wall_time_ms.zip(r.extended_stats.wall_time_ms) {
        w(&mut out, format!("time: {:.1} ms + {:.1} ms\n", ms.0, ms.1));
    }
    out.push_str("bounds:");
    for (p, b) in &r.bounds {
        write!(out, " {p}={b}").expect("writing to a String");
    }
    out.push_str("\nlive:");
    for (t, l) in &r.live {
        let v = match l {
            Some(true) => "yes",
            Some(false) => "no",
            None => "?",
        };
        write!(out, " {t}={v}").expect("writing to a String");
    }
    out.push('\n');
    w(&mut out, format!("extended-net route: {}\n", r.theorem1));
    if let Some(false) = r.routes_agree() {
        out.push_str("note: the two soundness routes disagree\n");
    }
    w(&mut out, format!("soundness: {}\n", r.sound));
    if let Soundness::Unsound(v) = &r.sound {
        if let Some(wit) = &v.witness {
            w(&mut out, format!("witness (clause {}): {wit}\n", v.clause));
        }
        if !v.dead_transitions.is_empty() {
            w(&mut out, format!("dead: {}\n", v.dead_transitions.join(", ")));
        }
    }
    Ok(out)
}

pub fn reach(eff: &Effective, path: &Path, do_compress: bool, dot: Option<&Path>) -> Result<u8, CliError> {
    let net = load_net(path, Some(eff))?;
    let graph = explore_with(&net, eff.budget, Exec::default())?;
    let mut summary = format!("{}\n", counts(graph.node_count(), graph.edge_count()));
    if graph.truncated {
        summary.push_str("truncated at the state budget\n");
    }
    let dot_text = if do_compress {
        let compressed = compress(&graph).map_err(|e| CliError::Usage(e.to_string()))?;
        writeln!(
            summary,
            "compressed: {}",
            counts(compressed.nodes.len(), compressed.edges.len())
        )
        .expect("writing to a String");
        if graph.node_count() <= REACH_CHECK_LIMIT {
            let before = reachability_among(
                graph.node_count(),
                graph.edges.iter().map(|e| (e.from, e.to)),
                &compressed.nodes,
            );
            let after = reachability_among(
                graph.node_count(),
                compressed.edges.iter().map(|e| (e.from, e.to)),
                &compressed.nodes,
            );
            let verdict = if before == after { "passed" } else { "FAILED" };
            writeln!(summary, "reachability check {verdict}").expect("writing to a String");
        } else {
            writeln!(summary, "reachability check skipped above {REACH_CHECK_LIMIT} nodes")
                .expect("writing to a String");
        }
        compressed_to_dot(&net, &graph, &compressed)
    } else {
        reach_to_dot(&net, &graph)
    };
    match dot {
        Some(p) => {
            write_file(p, &dot_text)?;
            print!("{summary}");
        }
        None => {
            print!("{dot_text}");
            for line in summary.lines() {
                println!("// {line}");
            }
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct AugmentReport<'a> {
    real: usize,
    generated: usize,
    rounds: &'a [RoundStats],
    warning: &'a Option<String>,
}

pub fn augment(eff: &Effective, data: &Path, out: &Path, provenance: bool) -> Result<u8, CliError> {
    let real = load_samples(data)?;
    let scaler = ScalerParams::fit(&to_matrix(&real)?)?;
    let outcome = run_augment(&real, &eff.gan(), &scaler, Exec::default())?;
    let samples = outcome.set.denormalized(&scaler)?;
    let prov = provenance.then_some(outcome.set.provenance.as_slice());
    write_file(out, &samples_csv(&samples, prov)?)?;
    if let Some(w) = &outcome.warning {
        eprintln!("warning: {w}");
    }
    let report = AugmentReport {
        real: real.len(),
        generated: outcome.set.len(),
        rounds: &outcome.rounds,
        warning: &outcome.warning,
    };
    let text = match eff.report {
        ReportFormat::Json => json(eff, &report)?,
        ReportFormat::Text => {
            let mut s = config_line(eff)?;
            writeln!(s, "{} real samples, {} generated", report.real, report.generated).expect("writing to a String");
            for r in &outcome.rounds {
                writeln!(
                    s,
                    "round {}: {} candidates, {} accepted, {} kept, rate {:.4}",
                    r.round, r.candidates, r.accepted, r.kept, r.acceptance_rate
                )
                .expect("writing to a String");
            }
            s
        }
    };
    print!("{text}");
    Ok(EXIT_OK)
}

pub fn train(eff: &Effective, data: &Path, model: &Path) -> Result<u8, CliError> {
    let samples = load_samples(data)?;
    let (fitted, losses) = train_predictor(&samples, &eff.fcnn())?;
    write_file(model, &fitted.to_text())?;
    print!("{}", config_line(eff)?);
    println!(
        "trained {} epochs on {} samples, final loss {}",
        losses.len(),
        samples.len(),
        losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(EXIT_OK)
}

fn parse_input(s: &str) -> Result<[f64; 4], CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != INPUT_DIMS {
        return Err(CliError::Usage(format!(
            "--input wants {INPUT_DIMS} comma-separated values, got {s:?}"
        )));
    }
    let mut x = [0.0; 4];
    for (slot, p) in x.iter_mut().zip(parts) {
        *slot = p
            .parse()
            .map_err(|_| CliError::Usage(format!("--input: {p:?} is not a number")))?;
    }
    Ok(x)
}

fn load_model(path: &Path) -> Result<PredictorModel, CliError> {
    Ok(PredictorModel::from_text(&read_file(path)?)?)
}

pub fn predict(model: &Path, input: Option<&str>, data: Option<&Path>, out: Option<&Path>) -> Result<u8, CliError> {
    let model = load_model(model)?;
    match (input, data) {
        (Some(s), None) => {
            println!("{}", model.predict(parse_input(s)?)?);
        }
        (None, Some(d)) => {
            let mut samples = load_samples(d)?;
            let pred = model.predict_batch(&inputs_matrix(&samples), Exec::default())?;
            for (s, p) in samples.iter_mut().zip(pred) {
                s.alcohol = Some(p);
            }
            let csv = samples_csv(&samples, None)?;
            match out {
                Some(o) => write_file(o, &csv)?,
                None => print!("{csv}"),
            }
        }
        _ => return Err(CliError::Usage("predict needs --input or --data".into())),
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct EvalReport {
    samples: usize,
    mse: f64,
}

pub fn evaluate(eff: &Effective, data: &Path, model: &Path) -> Result<u8, CliError> {
    let model = load_model(model)?;
    let samples = load_samples(data)?;
    let truth: Vec<f64> = to_matrix(&samples)?.column(INPUT_DIMS).to_vec();
    let pred = model.predict_batch(&inputs_matrix(&samples), Exec::default())?;
    let report = EvalReport {
        samples: samples.len(),
        mse: mse(&pred, &truth).map_err(fermentor_core::predictor::PredictError::from)?,
    };
    let text = match eff.report {
        ReportFormat::Json => json(eff, &report)?,
        ReportFormat::Text => format!(
            "{}mse {} over {} samples\n",
            config_line(eff)?,
            report.mse,
            report.samples
        ),
    };
    print!("{text}");
    Ok(EXIT_OK)
}

pub fn compare(
    eff: &Effective,
    train: &Path,
    test: &Path,
    json_out: Option<&Path>,
    plot: Option<&Path>,
) -> Result<u8, CliError> {
    let train = load_samples(train)?;
    let test = load_samples(test)?;
    let report = fermentor_core::predictor::compare(&train, &test, &eff.compare(), Exec::default())?;
    if let Some(w) = &report.augment.warning {
        eprintln!("warning: {w}");
    }
    if let Some(p) = json_out {
        write_file(p, &json(eff, &report)?)?;
    }
    if let Some(p) = plot {
        write_file(p, &report.plot_csv())?;
    }
    let text = match eff.report {
        ReportFormat::Json => json(eff, &report)?,
        ReportFormat::Text => format!("{}{}", config_line(eff)?, report.to_table()),
    };
    print!("{text}");
    Ok(EXIT_OK)
}

pub fn bench(eff: &Effective, data: &Path, plot: Option<&Path>) -> Result<u8, CliError> {
    let samples = load_samples(data)?;
    let cfg = eff.compare();
    let exec = Exec::default();
    let fitted = fit_all(&samples, &[], &cfg, exec)?;
    let inputs = inputs_matrix(&samples);
    let truth: Vec<f64> = to_matrix(&samples)?.column(INPUT_DIMS).to_vec();
    let mut methods = Vec::new();
    for (name, description) in METHODS {
        let pred = fitted.predict(name, &inputs, exec)?;
        methods.push(MethodResult {
            method: name.to_string(),
            description: description.to_string(),
            test_mse: mse(&pred, &truth).map_err(fermentor_core::predictor::PredictError::from)?,
            timings: time_method(&fitted, name, &inputs, &TIMING_SIZES, eff.timing, exec)?,
        });
    }
    let csv = plot_csv(&TIMING_SIZES, &methods);
    if let Some(p) = plot {
        write_file(p, &csv)?;
    }
    match eff.report {
        ReportFormat::Json => {
            #[derive(Serialize)]
            struct BenchReport<'a> {
                sizes: &'a [usize],
                methods: &'a [MethodResult],
            }
            print!(
                "{}",
                json(
                    eff,
                    BenchReport {
                        sizes: &TIMING_SIZES,
                        methods: &methods
                    }
                )?
            );
        }
        ReportFormat::Text => print!("{csv}"),
    }
    Ok(EXIT_OK)
}

pub fn synth(eff: &Effective, n: usize, out: &Path) -> Result<u8, CliError> {
    let samples = synthesize(&SynthConfig {
        n,
        noise: eff.noise,
        seed: eff.seed,
    })?;
    write_file(out, &samples_csv(&samples, None)?)?;
    println!("wrote {} samples to {}", samples.len(), out.display());
    Ok(EXIT_OK)
}
