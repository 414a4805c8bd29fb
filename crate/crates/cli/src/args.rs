use std::net::IpAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use silhouette_core::silhouette::{SilhouetteShape, SilhouetteVariant};
use silhouette_session::config::ConfigError;
use silhouette_session::SessionConfig;

#[derive(Debug, Parser)]
#[command(name = "silhouette", version, about = "Spectator view through a tracked one-way mirror")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand. Each override maps to one config
/// field; precedence is flag, then `--config` file, then built-in default.
#[derive(Debug, Args)]
pub struct Global {
    /// JSON session config.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// `network.ingest_port`: UDP port for tracker datagrams.
    #[arg(long, global = true, value_name = "PORT")]
    pub port_ingest: Option<u16>,
    /// `network.serve_port`: HTTP and WebSocket port.
    #[arg(long, global = true, value_name = "PORT")]
    pub port_serve: Option<u16>,
    /// `network.bind`: address both ports bind to.
    #[arg(long, global = true, value_name = "ADDR")]
    pub bind: Option<IpAddr>,
    /// `tick_rate_hz`: frame rate, 10 to 240.
    #[arg(long, global = true, value_name = "HZ")]
    pub tick_rate: Option<f64>,
    /// `shape`: default_oval, transparent_oval, narrow_oval or body_with_arms.
    #[arg(long, global = true, value_name = "VARIANT")]
    pub shape: Option<SilhouetteVariant>,
    /// `smoothing_tau_s`: pose filter time constant, 0 disables.
    #[arg(long, global = true, value_name = "SECONDS")]
    pub smoothing_tau: Option<f64>,
    /// `teleport_threshold_mps`: speed above which a jump is flagged.
    #[arg(long, global = true, value_name = "M_PER_S")]
    pub teleport_threshold: Option<f64>,
    /// `deterministic`: replay on the trace clock instead of in real time.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a live session until interrupted.
    Serve {
        /// Stop after this many seconds.
        #[arg(long = "for", value_name = "SECONDS")]
        run_for: Option<f64>,
    },
    /// Replay a recorded trace, either served in real time or offline with
    /// `--deterministic` (prints frame digests).
    Replay {
        trace: PathBuf,
        /// Playback speed multiplier for real-time replay.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
    /// Record tracker datagrams to a trace file.
    Record {
        out: PathBuf,
        /// Stop after this many seconds instead of waiting for Ctrl-C.
        #[arg(long, value_name = "SECONDS")]
        duration: Option<f64>,
    },
    /// Field-of-view, coverage and event report for a trace.
    Analyze {
        trace: PathBuf,
        /// Also write one CSV row per frame; `-` for stdout.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Check a config (the `--config` file plus overrides).
    Validate,
    /// Check the geometry against independent reference implementations.
    Selftest,
}

impl Global {
    fn overrides(&self) -> Vec<(&'static str, &'static str)> {
        let mut set = Vec::new();
        let flags = [
            (self.port_ingest.is_some(), "network.ingest_port", "--port-ingest"),
            (self.port_serve.is_some(), "network.serve_port", "--port-serve"),
            (self.tick_rate.is_some(), "tick_rate_hz", "--tick-rate"),
            (self.shape.is_some(), "shape", "--shape"),
            (self.smoothing_tau.is_some(), "smoothing_tau_s", "--smoothing-tau"),
            (self.teleport_threshold.is_some(), "teleport_threshold_mps", "--teleport-threshold"),
        ];
        for (given, field, flag) in flags {
            if given {
                set.push((field, flag));
            }
        }
        set
    }

    /// Defaults, then the file, then flags; validated.
    pub fn load_config(&self) -> Result<SessionConfig, ConfigError> {
        let mut config = match &self.config {
            Some(path) => SessionConfig::load(path)?,
            None => SessionConfig::default(),
        };
        let net = &mut config.network;
        if let Some(p) = self.port_ingest {
            net.ingest_port = p;
        }
        if let Some(p) = self.port_serve {
            net.serve_port = p;
        }
        if let Some(addr) = self.bind {
            net.bind = addr;
        }
        if let Some(hz) = self.tick_rate {
            config.tick_rate_hz = hz;
        }
        if let Some(variant) = self.shape {
            config.shape = SilhouetteShape::preset(variant);
        }
        if let Some(tau) = self.smoothing_tau {
            config.smoothing_tau_s = tau;
        }
        if let Some(v) = self.teleport_threshold {
            config.teleport_threshold_mps = v;
        }
        config.deterministic |= self.deterministic;
        config.validate().map_err(|e| match e {
            ConfigError::Invalid { field, message } => {
                let flag = self.overrides().into_iter().find(|(f, _)| *f == field).map(|(_, flag)| flag);
                match flag {
                    Some(flag) => ConfigError::Invalid { field: flag.to_owned(), message },
                    None => ConfigError::Invalid { field, message },
                }
            }
            other => other,
        })?;
        Ok(config)
    }
}
