use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use salesopt::commands::{self, EvalSelection, Output};
use salesopt::config::{Config, ExplorationMode};
use salesopt::service::Service;

/// Uplift scoring, account-to-rep matching and bandit action selection on
/// synthetic sales data.
#[derive(Parser)]
#[command(name = "salesopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Seed for every random stream (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Config file: one level of sections, e.g. `optimizer.k = -0.05`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for record outputs.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate accounts, reps and an observational panel.
    Gen(Common),
    /// Train the uplift model and engagement forecasters.
    Train(Common),
    /// Run one serving day without the bandit.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Attach narratives to the top N recommendations by gRank.
        #[arg(long, default_value_t = 0)]
        narrate: usize,
    },
    /// Simulate the contextual bandit against the synthetic environment.
    SimulateBandit {
        #[command(flatten)]
        common: Common,
        /// thompson or ucb; both when omitted.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<ExplorationMode>,
    },
    /// Uplift deciles, forecast error, DiD, placebo pre-tests and matching.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        deciles: bool,
        #[arg(long)]
        forecast: bool,
        #[arg(long)]
        did: bool,
        #[arg(long)]
        placebo: bool,
        #[arg(long)]
        cem: bool,
    },
    /// Compare the full pipeline against the ablated variants.
    Ablate(Common),
    /// Serve the HTTP API.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Event log; replayed when it exists.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Rebuild service state from an event log.
    Replay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        log: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<ExplorationMode, String> {
    match s {
        "thompson" | "ts" => Ok(ExplorationMode::Thompson),
        "ucb" => Ok(ExplorationMode::Ucb),
        other => Err(format!("unknown mode {other:?} (expected thompson or ucb)")),
    }
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn load(common: &Common) -> Result<Config, ExitCode> {
    Config::resolve(common.config.as_deref(), common.seed).map_err(|e| fail("config", &e.to_string(), 2))
}

fn finish(result: Result<Output, commands::CommandError>) -> ExitCode {
    match result {
        Ok(out) => {
            print!("{}", out.text);
            for f in &out.files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail("command", &e.to_string(), 1),
    }
}

fn serve(cfg: Config, addr: &str, log: &Path) -> ExitCode {
    if let Some(dir) = log.parent().filter(|d| !d.as_os_str().is_empty()) {
        if let Err(e) = std::fs::create_dir_all(dir) {
            return fail("io", &e.to_string(), 1);
        }
    }
    let service = match Service::open_or_create(log, cfg) {
        Ok(s) => Arc::new(s),
        Err(e) => return fail("service", &e.to_string(), 1),
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => return fail("runtime", &e.to_string(), 1),
    };
    match rt.block_on(salesopt::http::serve(service, addr)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail("serve", &e.to_string(), 1),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let run = |common: &Common, f: &dyn Fn(&Config, &Path) -> Result<Output, commands::CommandError>| match load(common) {
        Ok(cfg) => finish(f(&cfg, &common.out)),
        Err(code) => code,
    };
    match cli.command {
        Command::Gen(c) => run(&c, &commands::gen),
        Command::Train(c) => run(&c, &commands::train),
        Command::Optimize { common, narrate } => run(&common, &|cfg, out| commands::optimize(cfg, out, narrate)),
        Command::SimulateBandit { common, mode } => run(&common, &|cfg, out| commands::simulate_bandit(cfg, out, mode)),
        Command::Evaluate { common, deciles, forecast, did, placebo, cem } => {
            let sel = EvalSelection { deciles, forecast, did, placebo, cem };
            run(&common, &|cfg, out| commands::evaluate(cfg, out, sel))
        }
        Command::Ablate(c) => run(&c, &commands::ablate),
        Command::Serve { common, addr, log } => match load(&common) {
            Ok(cfg) => {
                let log = log.unwrap_or_else(|| common.out.join("events.jsonl"));
                serve(cfg, &addr, &log)
            }
            Err(code) => code,
        },
        Command::Replay { common, log } => run(&common, &|_, out| commands::replay(&log, out)),
    }
}
