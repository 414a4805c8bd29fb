//! `silhouette`: run, replay, record and analyze mirror-spectator sessions.
//!
//! Exit codes: 0 success, 1 usage error, 2 config error, 3 runtime failure.

mod analyze;
mod args;
mod selftest;

use std::path::Path;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use serde_json::json;
use silhouette_pose_io::replay::replay_realtime;
use silhouette_pose_io::{PoseIoError, PoseTrace};
use silhouette_session::replay::run_trace;
use silhouette_session::server::{serve, ServerHandle};
use silhouette_session::{ConfigError, SessionConfig, SessionError};

use args::{Cli, Command, Global};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<PoseIoError> for CliError {
    fn from(e: PoseIoError) -> Self {
        match e {
            PoseIoError::HeaderMismatch(diffs) => {
                CliError::Config(format!("trace was recorded with a different geometry: {}", diffs.join("; ")))
            }
            PoseIoError::InvalidSpeed(s) => CliError::Config(format!("--speed: must be positive and finite, got {s}")),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Config(e) => e.into(),
            SessionError::PoseIo(e) => e.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let json = cli.global.json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json {
                println!("{}", json!({ "error": e.to_string(), "exit_code": e.exit_code() }));
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Validate => validate(g),
        Command::Selftest => selftest::run(g.json),
        Command::Analyze { trace, csv } => {
            let config = g.load_config()?;
            analyze::run(&config, trace, csv.as_deref(), g.json)
        }
        Command::Replay { trace, speed } => {
            let config = g.load_config()?;
            let trace = load_trace(trace)?;
            if config.deterministic {
                replay_offline(&config, &trace, g.json)
            } else {
                runtime()?.block_on(replay_live(config, trace, *speed, g.json))
            }
        }
        Command::Serve { run_for } => {
            let config = g.load_config()?;
            let run_for = run_for.map(|s| seconds("--for", s)).transpose()?;
            runtime()?.block_on(serve_until(config, run_for, g.json))
        }
        Command::Record { out, duration } => {
            let config = g.load_config()?;
            let duration = duration.map(|s| seconds("--duration", s)).transpose()?;
            runtime()?.block_on(record(config, out, duration, g.json))
        }
    }
}

fn seconds(flag: &str, s: f64) -> Result<Duration, CliError> {
    Duration::try_from_secs_f64(s)
        .map_err(|_| CliError::Config(format!("{flag}: must be a non-negative number of seconds, got {s}")))
}

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn load_trace(path: &Path) -> Result<PoseTrace, CliError> {
    PoseTrace::load(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn validate(g: &Global) -> Result<(), CliError> {
    let config = g.load_config()?;
    let source = g.config.as_ref().map_or("defaults".to_owned(), |p| p.display().to_string());
    if g.json {
        let value = serde_json::to_value(&config).map_err(|e| CliError::Runtime(e.to_string()))?;
        println!("{}", json!({ "valid": true, "source": source, "config": value }));
    } else {
        println!("{source}: ok");
        println!(
            "  mirror {} x {} m, tick {} Hz, shape {}, ports udp {} / http {}",
            config.mirror.width_m,
            config.mirror.height_m,
            config.tick_rate_hz,
            config.shape.variant.as_str(),
            config.network.ingest_port,
            config.network.serve_port
        );
    }
    Ok(())
}

fn replay_offline(config: &SessionConfig, trace: &PoseTrace, json: bool) -> Result<(), CliError> {
    let run = run_trace(config, trace)?;
    if json {
        let digests: Vec<_> = run.frames.iter().map(|f| json!({ "tick": f.tick, "digest": f.digest })).collect();
        println!("{}", json!({ "frames": run.frames.len(), "digest": run.digest(), "frame_digests": digests }));
    } else {
        for f in &run.frames {
            println!("{} {}", f.tick, f.digest);
        }
        println!("run {} ({} frames)", run.digest(), run.frames.len());
    }
    Ok(())
}

fn announce(handle: &ServerHandle, json: bool) {
    if json {
        println!(
            "{}",
            json!({ "ingest": format!("udp://{}", handle.ingest_addr), "ws": format!("ws://{}/ws", handle.http_addr) })
        );
    } else {
        println!("tracker ingest on udp://{}", handle.ingest_addr);
        println!("frames on ws://{}/ws", handle.http_addr);
    }
}

async fn serve_until(config: SessionConfig, run_for: Option<Duration>, json: bool) -> Result<(), CliError> {
    let mut handle = serve(config).await?;
    announce(&handle, json);
    let limit = async {
        match run_for {
            Some(d) => tokio::time::sleep(d).await,
            None => std::future::pending().await,
        }
    };
    tokio::select! {
        _ = tokio::signal::ctrl_c() => {}
        _ = limit => {}
        _ = handle.stopped() => return Err(CliError::Runtime("session stopped unexpectedly".into())),
    }
    handle.shutdown().await;
    Ok(())
}

async fn replay_live(config: SessionConfig, trace: PoseTrace, speed: f64, json: bool) -> Result<(), CliError> {
    trace.header.check_against(&config.trace_header(trace.header.start_epoch_us))?;
    let handle = Arc::new(serve(config).await?);
    announce(&handle, json);
    let interrupted = Arc::new(AtomicBool::new(false));
    let player = {
        let (handle, interrupted) = (handle.clone(), interrupted.clone());
        tokio::task::spawn_blocking(move || {
            replay_realtime(&trace, speed, |m| {
                handle.inject(&m.to_pose());
                !interrupted.load(Ordering::Relaxed)
            })
        })
    };
    tokio::pin!(player);
    let sent = tokio::select! {
        done = &mut player => done,
        _ = tokio::signal::ctrl_c() => {
            interrupted.store(true, Ordering::Relaxed);
            player.await
        }
    }
    .map_err(|e| CliError::Runtime(e.to_string()))??;
    let ticks = handle.latest_frame().map_or(0, |f| f.tick + 1);
    if json {
        println!("{}", json!({ "messages": sent, "ticks": ticks }));
    } else {
        println!("replayed {sent} messages over {ticks} ticks");
    }
    let handle = Arc::try_unwrap(handle).map_err(|_| CliError::Runtime("replay still running".into()))?;
    handle.shutdown().await;
    Ok(())
}

async fn record(config: SessionConfig, out: &Path, duration: Option<Duration>, json: bool) -> Result<(), CliError> {
    let stop = async {
        match duration {
            Some(d) => {
                tokio::select! {
                    _ = tokio::time::sleep(d) => {}
                    _ = tokio::signal::ctrl_c() => {}
                }
            }
            None => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    };
    let summary = silhouette_session::record::record(&config, out, stop, |addr| {
        if json {
            println!("{}", json!({ "ingest": format!("udp://{addr}") }));
        } else {
            println!("recording udp://{addr} to {}", out.display());
        }
    })
    .await?;
    if json {
        println!("{}", json!({ "written": summary.written, "rejected": summary.rejected, "late": summary.late }));
    } else {
        println!(
            "{} messages written, {} rejected, {} too late to order",
            summary.written, summary.rejected, summary.late
        );
    }
    Ok(())
}
