//! `vespo`: set up, drive and benchmark the verifiable evaluation protocols.
//!
//! Exit status: 0 on success, 2 when a verification rejects, 1 on any other error.

mod bench;
mod commands;
mod state;
mod transport;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::rngs::StdRng;
use rand::SeedableRng;
use vespo::container::Protocol;
use vespo::dpor::ShapePolicy;
use vespo::lhe::parse_scalar;
use vespo::{Error, Result, Scalar, SecurityConfig};

use commands::{Env, SetupArgs, UpdateArgs};

#[derive(Parser)]
#[command(name = "vespo", version, about = "Verifiable evaluation of outsourced polynomials")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Directory holding the state files.
    #[arg(long, default_value = ".")]
    state_dir: PathBuf,
    /// Seed for a reproducible run; entropy from the OS otherwise.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct Crypto {
    #[arg(long, default_value = "bn254")]
    curve: String,
    /// Paillier modulus size. Below 2048 needs VESPO_TEST_MODE=1.
    #[arg(long, default_value_t = vespo::MIN_PRODUCTION_LHE_BITS)]
    lhe_bits: u32,
}

#[derive(Args, Clone)]
struct Remote {
    /// Talk to a `vespo serve` instance instead of the local server state.
    #[arg(long)]
    connect: Option<String>,
    /// Server-side worker threads (local server only).
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Create client, server (and verifier) state files.
    Setup {
        /// ckzg, pubdyn, vespo or dpor.
        protocol: String,
        /// Random polynomial of this degree.
        #[arg(long)]
        degree: Option<usize>,
        /// Coefficient file (one per line, constant term first), or the database for dpor.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Matrix shape for dpor: square, rect, or "m,n".
        #[arg(long, default_value = "square")]
        shape: String,
        /// Overwrite existing state files.
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        crypto: Crypto,
    },
    /// Evaluate at a point and print the verified value.
    Eval {
        /// Evaluation point; random when omitted.
        #[arg(long)]
        point: Option<String>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        remote: Remote,
    },
    /// Add to a coefficient (vespo, pubdyn) or overwrite a database entry (dpor).
    Update {
        #[arg(long)]
        index: Option<usize>,
        #[arg(long)]
        delta: Option<String>,
        #[arg(long)]
        row: Option<usize>,
        #[arg(long)]
        col: Option<usize>,
        /// New entry value, below 2^248.
        #[arg(long)]
        value: Option<String>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        remote: Remote,
    },
    /// Run one retrievability audit and append it to the audit log.
    Audit {
        /// Audit log; `<state-dir>/audit.log` by default.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        remote: Remote,
    },
    /// Answer requests over TCP from the server state in --state-dir.
    Serve {
        #[arg(long)]
        listen: String,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Exit after the first connection closes.
        #[arg(long)]
        once: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Time each protocol phase; tab-separated medians on stdout.
    Bench {
        protocol: String,
        /// Comma-separated degrees.
        #[arg(long, value_delimiter = ',')]
        degrees: Vec<usize>,
        /// Degree sweep 2^a..2^b, written "a..b".
        #[arg(long)]
        sweep: Option<String>,
        /// Comma-separated database sizes in bytes for dpor (suffixes K, M).
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<String>,
        #[arg(long, default_value = "square")]
        shape: String,
        /// Comma-separated worker counts (vespo and dpor).
        #[arg(long, value_delimiter = ',', default_value = "1")]
        workers: Vec<usize>,
        #[arg(long, default_value_t = 11)]
        reps: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        crypto: Crypto,
    },
}

enum Failure {
    Rejected(vespo::RejectReason),
    Error(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Rejected(r) => Failure::Rejected(r),
            e => Failure::Error(e),
        }
    }
}

fn make_rng(seed: Option<u64>) -> StdRng {
    match seed {
        Some(s) => StdRng::seed_from_u64(s),
        None => StdRng::from_entropy(),
    }
}

fn security(c: &Crypto) -> Result<SecurityConfig> {
    let mut cfg = SecurityConfig::from_env();
    cfg.curve = c.curve.parse()?;
    cfg.lhe_bits = c.lhe_bits;
    cfg.validate()?;
    Ok(cfg)
}

fn env(common: &Common, remote: Option<&Remote>) -> Env {
    Env {
        dir: common.state_dir.clone(),
        connect: remote.and_then(|r| r.connect.clone()),
        workers: remote.map(|r| r.workers.max(1)).unwrap_or(1),
    }
}

fn parse_size(s: &str) -> Result<usize> {
    let s = s.trim();
    let (num, mult) = match s.chars().last() {
        Some('K' | 'k') => (&s[..s.len() - 1], 1usize << 10),
        Some('M' | 'm') => (&s[..s.len() - 1], 1 << 20),
        Some('G' | 'g') => (&s[..s.len() - 1], 1 << 30),
        _ => (s, 1),
    };
    num.parse::<usize>()
        .ok()
        .and_then(|n| n.checked_mul(mult))
        .ok_or_else(|| Error::invalid(format!("bad size '{s}'")))
}

fn parse_sweep(s: &str) -> Result<Vec<usize>> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| Error::invalid("sweep is written a..b"))?;
    let bad = || Error::invalid(format!("bad sweep '{s}'"));
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    if a > b || b > 40 {
        return Err(bad());
    }
    Ok((a..=b).map(|k| 1usize << k).collect())
}

fn parse_opt_scalar(s: Option<&String>, flag: &str) -> Result<Scalar> {
    parse_scalar(s.ok_or_else(|| Error::invalid(format!("missing {flag}")))?)
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    match cli.cmd {
        Command::Setup {
            protocol,
            degree,
            input,
            shape,
            force,
            common,
            crypto,
        } => {
            let protocol: Protocol = protocol.parse()?;
            let cfg = security(&crypto)?;
            let args = SetupArgs {
                protocol,
                degree,
                input,
                shape: shape.parse::<ShapePolicy>()?,
                force,
            };
            commands::setup(&env(&common, None), &cfg, &args, &mut make_rng(common.seed))?;
        }
        Command::Eval { point, common, remote } => {
            let point = point.as_deref().map(parse_scalar).transpose()?;
            commands::eval(&env(&common, Some(&remote)), point, &mut make_rng(common.seed))?;
        }
        Command::Update {
            index,
            delta,
            row,
            col,
            value,
            common,
            remote,
        } => {
            let args = match (index, row, col) {
                (Some(index), None, None) => UpdateArgs::Coefficient {
                    index,
                    delta: parse_opt_scalar(delta.as_ref(), "--delta")?,
                },
                (None, Some(row), Some(col)) => UpdateArgs::Entry {
                    row,
                    col,
                    value: parse_opt_scalar(value.as_ref(), "--value")?,
                },
                _ => {
                    return Err(Error::invalid(
                        "give --index/--delta, or --row/--col/--value for dpor",
                    )
                    .into())
                }
            };
            commands::update(&env(&common, Some(&remote)), &args, &mut make_rng(common.seed))?;
        }
        Command::Audit { log, common, remote } => {
            commands::audit(&env(&common, Some(&remote)), log.as_deref(), &mut make_rng(common.seed))?;
        }
        Command::Serve {
            listen,
            workers,
            once,
            common,
        } => {
            transport::serve(&common.state_dir, &listen, workers.max(1), once)?;
        }
        Command::Bench {
            protocol,
            mut degrees,
            sweep,
            sizes,
            shape,
            workers,
            reps,
            seed,
            crypto,
        } => {
            if let Some(s) = sweep {
                degrees.extend(parse_sweep(&s)?);
            }
            let args = bench::BenchArgs {
                protocol: protocol.parse()?,
                degrees,
                sizes: sizes.iter().map(|s| parse_size(s)).collect::<Result<_>>()?,
                shape: shape.parse()?,
                workers: workers.into_iter().map(|q| q.max(1)).collect(),
                reps,
            };
            let cfg = security(&crypto)?;
            bench::run(&args, &cfg, &mut make_rng(seed), &mut std::io::stdout().lock())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Rejected(r)) => {
            println!("REJECT {}", r.code());
            ExitCode::from(2)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
