use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use corec_core::context::build_synthesis;
use corec_core::store::EventLog;
use corec_core::travel::ProviderKind;
use corec_server::{AppState, ServerConfig};
use corec_sim::{load_scenario, run_with, ScenarioError};

#[derive(Parser)]
#[command(name = "corec", version, about = "Volunteer evacuation coordination: scenarios, service and reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Routing {
    Offline,
    External,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print its metrics.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        metrics_out: Option<PathBuf>,
        #[arg(long)]
        log_out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "offline")]
        routing: Routing,
        /// Base URL of an OSRM-compatible service, for `--routing external`.
        #[arg(long, default_value = "http://localhost:5000")]
        routing_url: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
    /// Start the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the synthesis report for a slice of an event log.
    Synth {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = 1)]
        from: u64,
        #[arg(long)]
        to: Option<u64>,
    },
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

fn write(path: &PathBuf, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("invalid: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { scenario, metrics_out, log_out, routing, routing_url, seed } => {
            let mut s = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                s.rng_seed = seed;
            }
            let mut cfg = s.config.routing();
            if let Routing::External = routing {
                cfg.kind = ProviderKind::External;
                cfg.base_url = Some(routing_url);
            }
            let out = run_with(&s, cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
            print!("{}", out.metrics);
            println!("log digest         {}", out.log_digest());
            for r in &out.rejections {
                eprintln!("step {} ({} at {}s) rejected: {}", r.step, r.action, r.at, r.reason);
            }
            if let Some(p) = metrics_out {
                let json = serde_json::to_string_pretty(&out.metrics).expect("metrics serialize");
                write(&p, &(json + "\n"))?;
            }
            if let Some(p) = log_out {
                write(&p, &out.log_ndjson())?;
            }
            Ok(())
        }
        Command::Validate { scenario } => {
            let s = load_scenario(&scenario)?;
            println!("{}: ok ({} steps, {} units, {} points, {} shelters)", s.name, s.script.len(),
                s.initial.units.len(), s.initial.rescue_points.len(), s.initial.shelters.len());
            Ok(())
        }
        Command::Serve { config } => {
            let cfg = ServerConfig::load(&config).map_err(|e| Failure::Invalid(e.to_string()))?;
            let state = AppState::from_config(&cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Runtime(e.to_string()))?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(&cfg.listen_addr)
                    .await
                    .map_err(|e| Failure::Runtime(format!("{}: {e}", cfg.listen_addr)))?;
                eprintln!("listening on {}", cfg.listen_addr);
                corec_server::serve(listener, state).await.map_err(|e| Failure::Runtime(e.to_string()))
            })
        }
        Command::Synth { log, from, to } => {
            let events = EventLog::load(&log).map_err(|e| Failure::Runtime(format!("{}: {e}", log.display())))?;
            let log = EventLog::from_events(events).map_err(|e| Failure::Runtime(e.to_string()))?;
            let to = to.unwrap_or(log.last_seq());
            if from > to && !log.is_empty() {
                return Err(Failure::Invalid(format!("--from {from} is after --to {to}")));
            }
            let report = build_synthesis(log.window(from, to));
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
    }
}
