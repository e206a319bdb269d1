// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};

use clap::{Parser, Subcommand};

use entailsync::register::{check_discard_complete, LwwPolicy, RegisterKind};
use entailsync::sim::{RunOptions, Scenario, Session};
use entailsync::{dot, server, Error};

#[derive(Parser)]
#[command(
    name = "entailsync",
    version,
    about = "Replicated entailment journal toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print its convergence report.
    Run {
        scenario: PathBuf,
        /// Overrides the scenario seed (also ENTAILSYNC_SEED).
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the per-link drop probability.
        #[arg(long = "drop")]
        drop_probability: Option<f64>,
        /// Halt after the first event that leaves a pending conflict.
        #[arg(long)]
        stop_at_conflict: bool,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dump every replica's graph after every step.
        #[arg(long)]
        dot_dir: Option<PathBuf>,
    },
    /// Write DOT files for selected steps of a scenario.
    ExportDot {
        scenario: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Step numbers to export (0 is the initial state); all when omitted.
        #[arg(long, value_delimiter = ',')]
        steps: Vec<usize>,
        /// Only this replica.
        #[arg(long)]
        replica: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Exhaustively check a register kind for discard-completeness.
    CheckRegister {
        kind: String,
        #[arg(long, default_value_t = 6)]
        max_ops: usize,
        #[arg(long, default_value = "strict")]
        policy: String,
    },
    /// Serve a scenario over HTTP; conflicts wait for submitted plans.
    Serve {
        scenario: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn env_seed(flag: Option<u64>) -> Result<Option<u64>, String> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("ENTAILSYNC_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("ENTAILSYNC_SEED is not an integer: {v:?}")),
        Err(_) => Ok(None),
    }
}

fn load(path: &Path) -> Result<Scenario, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Scenario::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn malformed(e: &Error) -> bool {
    matches!(
        e,
        Error::Script(_) | Error::Parse(_) | Error::UnknownRegister(_) | Error::InvalidReplicaId(_)
    )
}

fn fail(msg: impl std::fmt::Display, code: u8) -> ExitCode {
    eprintln!("entailsync: {msg}");
    ExitCode::from(code)
}

fn write_dots(
    session: &Session,
    dir: &Path,
    step: usize,
    only: Option<&str>,
) -> std::io::Result<()> {
    for name in session.replica_names() {
        if only.is_some_and(|o| o != name) {
            continue;
        }
        let r = session.replica(name).map_err(std::io::Error::other)?;
        let file = dir.join(format!("step{step:03}_{name}.dot"));
        std::fs::write(file, dot::to_dot(r.graph(), name))?;
    }
    Ok(())
}

fn cmd_run(
    path: &Path,
    options: RunOptions,
    out: Option<&Path>,
    dot_dir: Option<&Path>,
) -> ExitCode {
    let scenario = match load(path) {
        Ok(s) => s,
        Err(e) => return fail(e, 2),
    };
    let mut session = match Session::new(scenario, options) {
        Ok(s) => s,
        Err(e) => return fail(e, 2),
    };
    if let Some(dir) = dot_dir {
        if let Err(e) =
            std::fs::create_dir_all(dir).and_then(|_| write_dots(&session, dir, 0, None))
        {
            return fail(e, 2);
        }
    }
    let mut error = None;
    loop {
        match session.step() {
            Ok(Some(_)) => {}
            Ok(None) => break,
            Err(e) => {
                error = Some(e);
                break;
            }
        }
        if let Some(dir) = dot_dir {
            if let Err(e) = write_dots(&session, dir, session.cursor(), None) {
                return fail(e, 2);
            }
        }
    }
    if let Some(e) = &error {
        if malformed(e) {
            return fail(format!("event {}: {e}", session.cursor()), 2);
        }
    }
    let report = match session.report() {
        Ok(r) => r,
        Err(e) => return fail(e, 1),
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    match out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &text) {
                return fail(format!("{}: {e}", p.display()), 2);
            }
        }
        None => print!("{text}"),
    }
    if let Some(e) = error {
        return fail(format!("event {}: {e}", session.cursor()), 1);
    }
    if report.converged && report.asserts_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_export_dot(
    path: &Path,
    out_dir: &Path,
    steps: &[usize],
    replica: Option<&str>,
    seed: Option<u64>,
) -> ExitCode {
    let scenario = match load(path) {
        Ok(s) => s,
        Err(e) => return fail(e, 2),
    };
    let options = RunOptions {
        seed,
        ..Default::default()
    };
    let mut session = match Session::new(scenario, options) {
        Ok(s) => s,
        Err(e) => return fail(e, 2),
    };
    if let Some(r) = replica {
        if session.replica(r).is_err() {
            return fail(format!("unknown replica {r:?}"), 2);
        }
    }
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        return fail(format!("{}: {e}", out_dir.display()), 2);
    }
    let wanted = |n: usize| steps.is_empty() || steps.contains(&n);
    let mut written = 0;
    loop {
        let n = session.cursor();
        if wanted(n) {
            if let Err(e) = write_dots(&session, out_dir, n, replica) {
                return fail(format!("{}: {e}", out_dir.display()), 2);
            }
            written += 1;
        }
        match session.step() {
            Ok(Some(_)) => {}
            Ok(None) => break,
            Err(e) => return fail(format!("event {n}: {e}"), if malformed(&e) { 2 } else { 1 }),
        }
    }
    println!("wrote {written} step(s) to {}", out_dir.display());
    ExitCode::SUCCESS
}

fn cmd_check_register(kind: &str, max_ops: usize, policy: &str) -> ExitCode {
    let kind: RegisterKind = match kind.parse() {
        Ok(k) => k,
        Err(e) => return fail(e, 2),
    };
    let policy: LwwPolicy = match serde_json::from_value(serde_json::Value::from(policy)) {
        Ok(p) => p,
        Err(_) => return fail(format!("unknown lww policy {policy:?}"), 2),
    };
    let spec = kind.build(policy);
    let ctor = kind
        .default_constructor(entailsync::RegisterId(0))
        .remove(0);
    let result = check_discard_complete(spec.as_ref(), &ctor, max_ops);
    println!(
        "{}",
        serde_json::to_string_pretty(&result).expect("verdict serializes")
    );
    if result.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_serve(path: &Path, host: &str, port: u16, seed: Option<u64>) -> ExitCode {
    let scenario = match load(path) {
        Ok(s) => s,
        Err(e) => return fail(e, 2),
    };
    let options = RunOptions {
        seed,
        interactive: true,
        ..Default::default()
    };
    let session = match Session::new(scenario, options) {
        Ok(s) => s,
        Err(e) => return fail(e, 2),
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => return fail(e, 1),
    };
    runtime.block_on(async move {
        let listener = match tokio::net::TcpListener::bind((host, port)).await {
            Ok(l) => l,
            Err(e) => return fail(format!("cannot bind {host}:{port}: {e}"), 2),
        };
        eprintln!("listening on http://{host}:{port}");
        let app = server::router(Arc::new(Mutex::new(session)));
        match axum::serve(listener, app).await {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e, 1),
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            seed,
            drop_probability,
            stop_at_conflict,
            out,
            dot_dir,
        } => {
            let seed = match env_seed(seed) {
                Ok(s) => s,
                Err(e) => return fail(e, 2),
            };
            let options = RunOptions {
                seed,
                drop_probability,
                stop_at_conflict,
                interactive: false,
            };
            cmd_run(&scenario, options, out.as_deref(), dot_dir.as_deref())
        }
        Command::ExportDot {
            scenario,
            out_dir,
            steps,
            replica,
            seed,
        } => match env_seed(seed) {
            Ok(seed) => cmd_export_dot(&scenario, &out_dir, &steps, replica.as_deref(), seed),
            Err(e) => fail(e, 2),
        },
        Command::CheckRegister {
            kind,
            max_ops,
            policy,
        } => cmd_check_register(&kind, max_ops, &policy),
        Command::Serve {
            scenario,
            port,
            host,
            seed,
        } => match env_seed(seed) {
            Ok(seed) => cmd_serve(&scenario, &host, port, seed),
            Err(e) => fail(e, 2),
        },
    }
}
