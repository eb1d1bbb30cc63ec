use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::json;
use stair_bus::server::{BusServer, ServerConfig};
use stair_bus::Broker;
use stair_core::learn::{evaluate, examples_from_patches, train_centroid, train_svm, Classifier, SvmConfig};
use stair_core::percept::dataset::{generate_dataset, load_dataset, save_dataset, Jitter};
use stair_core::scenarios::{
    evaluate_trace, parse_program, read_trace, replay, run, write_trace, ReplayPace, RunOptions, RunReport, Perception, Scenario,
};
use stair_core::sim::LiveSim;
use stair_core::world::{Arena, SignClass};
use stair_core::Pose2d;

use crate::ui::UiServer;
use crate::{BusPorts, Cmd, Tier};

pub fn dispatch(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Sim {
            arena,
            ports,
            start,
            seed,
            model,
            min_score,
            speed,
            ui_dir,
            http_port,
            duration,
        } => {
            let arena = load_arena(&arena)?;
            let start = start_pose(start.as_deref(), &arena)?;
            let model = model.map(|p| load_model(&p)).transpose()?;
            let mut perception = Perception::default();
            if let Some(s) = min_score {
                perception.detector.min_score = s;
            }
            let live = LiveSim::new(Broker::new(), arena, start, seed, 0.02)?.with_model(model, perception);
            sim(live, ports, speed, ui_dir.as_deref(), http_port, duration)
        }
        Cmd::Run {
            arena,
            scenario,
            program,
            seed,
            model,
            start,
            report,
            trace,
            max_time,
            dt,
        } => {
            let mut sc = match (scenario, arena) {
                (Some(path), _) => Scenario::load(&path)?,
                (None, Some(path)) => {
                    let arena = load_arena(&path)?;
                    let start = start_pose(start.as_deref(), &arena)?;
                    Scenario::free_play(arena, start)
                }
                (None, None) => bail!("one of --scenario or --arena is required"),
            };
            if let Some(p) = model {
                sc.model = Some(load_model(&p)?);
            }
            let program = parse_program(&read(&program)?)?;
            let options = RunOptions {
                seed,
                dt,
                max_time: max_time.unwrap_or(sc.max_time),
            };
            let out = run(&sc, &program, &options)?;
            let mut rep = out.report;
            if let Some(path) = &trace {
                write_trace(path, &out.trace)?;
                rep.trace_path = Some(path.display().to_string());
            }
            emit_report(&rep, report.as_deref())
        }
        Cmd::Train {
            tier,
            data,
            out,
            lambda,
            epochs,
            seed,
        } => train(tier, &data, &out, lambda, epochs, seed),
        Cmd::Eval { model, data } => {
            let model = load_model(&model)?;
            let items = load_dataset(&data)?;
            let ev = evaluate(&model, &examples_from_patches(&items))?;
            print_json(&json!({
                "accuracy": ev.accuracy,
                "total": ev.total,
                "classes": SignClass::PLACEABLE,
                "confusion": ev.confusion,
            }))?;
            Ok(0)
        }
        Cmd::GenData { classes, n, out, seed } => {
            let classes = if classes.is_empty() {
                SignClass::PLACEABLE.to_vec()
            } else {
                classes
                    .iter()
                    .map(|c| c.trim().parse::<SignClass>().map_err(|_| anyhow!("unknown class {c:?}")))
                    .collect::<Result<Vec<_>>>()?
            };
            if classes.iter().any(|c| !c.is_placeable()) {
                bail!("class none cannot be generated");
            }
            let items = generate_dataset(&classes, n, seed, &Jitter::default());
            save_dataset(&out, &items)?;
            print_json(&json!({"written": items.len(), "out": out.display().to_string()}))?;
            Ok(0)
        }
        Cmd::Replay {
            trace,
            fast,
            scenario,
            ports,
        } => {
            let records = read_trace(&trace)?;
            let scenario = scenario.map(|p| Scenario::load(&p)).transpose()?;
            let bus = Broker::new();
            let server = serve_bus(&bus, ports, false)?;
            let pace = if fast { ReplayPace::Fast } else { ReplayPace::Faithful };
            let sent = replay(&records, &bus, pace);
            server.shutdown();
            log::info!("replayed {sent} records");
            match scenario {
                Some(sc) => emit_report(&score_report(&records, &sc, &trace)?, None),
                None => {
                    print_json(&json!({ "replayed": sent }))?;
                    Ok(0)
                }
            }
        }
        Cmd::Score { trace, scenario } => {
            let records = read_trace(&trace)?;
            let sc = Scenario::load(&scenario)?;
            emit_report(&score_report(&records, &sc, &trace)?, None)
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn load_arena(path: &Path) -> Result<Arena> {
    Arena::from_json(&read(path)?).with_context(|| format!("loading arena {}", path.display()))
}

fn load_model(path: &Path) -> Result<Classifier> {
    Classifier::load(path).with_context(|| format!("loading model {}", path.display()))
}

/// `x,y,theta`, or the arena center facing +x.
fn start_pose(spec: Option<&str>, arena: &Arena) -> Result<Pose2d> {
    let Some(spec) = spec else {
        return Ok(Pose2d::new(arena.width / 2.0, arena.height / 2.0, 0.0));
    };
    let parts: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| anyhow!("bad --start {spec:?}: {e}"))?;
    match parts[..] {
        [x, y, theta] => Ok(Pose2d::new(x, y, theta)),
        _ => bail!("--start takes x,y,theta"),
    }
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(v)?)?;
    out.flush()?;
    Ok(())
}

fn emit_report(report: &RunReport, path: Option<&Path>) -> Result<u8> {
    let doc = serde_json::to_value(report)?;
    if let Some(path) = path {
        std::fs::write(path, serde_json::to_string_pretty(&doc)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    print_json(&doc)?;
    Ok(report.exit_code() as u8)
}

fn score_report(records: &[stair_core::scenarios::TraceRecord], sc: &Scenario, trace: &Path) -> Result<RunReport> {
    let eval = evaluate_trace(records, sc)?;
    let mut events = eval.events;
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(RunReport {
        outcome: eval.outcome,
        metrics: eval.metrics,
        events,
        trace_path: Some(trace.display().to_string()),
    })
}

/// Starts the listeners. The addresses go to stdout for `sim`, whose only
/// output they are, and to the log otherwise.
fn serve_bus(bus: &Broker, ports: BusPorts, announce: bool) -> Result<BusServer> {
    let server = BusServer::start(bus.clone(), ServerConfig::with_ports(ports.bus_port, Some(ports.ws_port)))
        .context("starting bus listeners")?;
    let ws = server.ws_addr().map_or_else(|| "-".to_string(), |a| a.to_string());
    let line = format!("bus tcp {} ws {}", server.tcp_addr(), ws);
    if announce {
        println!("{line}");
        std::io::stdout().flush()?;
    } else {
        log::info!("{line}");
    }
    Ok(server)
}

fn sim(mut live: LiveSim, ports: BusPorts, speed: f64, ui_dir: Option<&Path>, http_port: u16, duration: Option<f64>) -> Result<u8> {
    if !(speed.is_finite() && speed >= 0.0) {
        bail!("--speed must be >= 0");
    }
    live.advertise()?;
    let server = serve_bus(live.bus(), ports, true)?;
    let ui = ui_dir.map(|d| UiServer::start(d.to_path_buf(), http_port)).transpose()?;
    if let Some(ui) = &ui {
        println!("ui http://127.0.0.1:{}/", ui.port());
        std::io::stdout().flush()?;
    }
    if speed > 0.0 {
        live.start_realtime(speed);
    }
    let until = duration.map(|d| Instant::now() + Duration::from_secs_f64(d.max(0.0)));
    loop {
        std::thread::sleep(Duration::from_millis(50));
        if until.is_some_and(|u| Instant::now() >= u) {
            break;
        }
    }
    live.stop_realtime();
    drop(ui);
    server.shutdown();
    Ok(0)
}

fn train(tier: Tier, data: &Path, out: &Path, lambda: Option<f64>, epochs: Option<usize>, seed: Option<u64>) -> Result<u8> {
    let items = load_dataset(data)?;
    let examples = examples_from_patches(&items);
    let model = match tier {
        Tier::Centroid => {
            if lambda.is_some() || epochs.is_some() || seed.is_some() {
                bail!("--lambda, --epochs and --seed apply to the svm tier only");
            }
            Classifier::Centroid(train_centroid(&examples)?)
        }
        Tier::Svm => {
            let d = SvmConfig::default();
            let config = SvmConfig {
                lambda: lambda.unwrap_or(d.lambda),
                epochs: epochs.unwrap_or(d.epochs),
                seed: seed.unwrap_or(d.seed),
            };
            Classifier::Svm(train_svm(&examples, &config)?)
        }
    };
    model.save(out)?;
    let mut counts = BTreeMap::new();
    for (c, _) in &items {
        *counts.entry(*c).or_insert(0usize) += 1;
    }
    let acc = evaluate(&model, &examples)?.accuracy;
    print_json(&json!({
        "tier": model.kind(),
        "classes": model.classes(),
        "counts": counts,
        "train_accuracy": acc,
        "out": out.display().to_string(),
    }))?;
    Ok(0)
}
