//! `sct`: command-line client for the control-layer service.
//!
//! Without `--server` (or `SCT_SERVER`) every invocation starts a private
//! service on a loopback port and talks to it. [`run_cli`] is the whole
//! program with its standard output redirected, for embedding and tests.

use std::fs;
use std::io::Write;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use clap::error::ErrorKind as ClapErrorKind;
use sct_client::{Client, ClientError};
use sct_core::api::{AblationRequest, CampaignRequest, ErrorKind, ScoreRequest, SweepRequest};
use sct_core::sim::TaskId;
use sct_core::{report, trace, Config};
use sct_server::AppState;

#[derive(Parser)]
#[command(name = "sct", version, about = "Run and inspect evaluate-correct-terminate campaigns")]
struct Cli {
    /// Service base URL. A private service is started when absent.
    #[arg(long, global = true, env = "SCT_SERVER")]
    server: Option<String>,
    /// Layered TOML configuration file.
    #[arg(long, global = true, env = "SCT_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one campaign and print its CSV.
    Run(RunArgs),
    /// Run the four correction/termination combinations on identical seeds.
    Ablate(CommonArgs),
    /// Run one campaign per gate threshold.
    Sweep(SweepArgs),
    /// Score a pose log or a single-episode trace.
    Score { path: PathBuf },
    /// Memory store files and the service's store.
    #[command(subcommand)]
    Bank(BankCommand),
}

#[derive(Args)]
struct CommonArgs {
    /// Task ids such as `object`, `object:biased`; repeat or comma-separate.
    #[arg(long = "task", value_delimiter = ',', default_value = "object")]
    tasks: Vec<TaskId>,
    #[arg(long, default_value_t = 50)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_correction: bool,
    #[arg(long)]
    no_termination: bool,
    /// Directory for the CSV and JSON outputs.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Start from this store file instead of an empty store.
    #[arg(long)]
    bank_in: Option<PathBuf>,
    /// Write the store as it stands after the campaign.
    #[arg(long)]
    bank_out: Option<PathBuf>,
    /// Keep the starting store fixed and record nothing.
    #[arg(long)]
    replay: bool,
    /// Worker threads; needs --replay.
    #[arg(long)]
    parallel: Option<usize>,
    /// Also write every episode trace to `<out>/traces.jsonl`.
    #[arg(long, requires = "out")]
    traces: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Gate thresholds, strictly increasing in [0, 1].
    #[arg(long, value_delimiter = ',', default_value = "0.55,0.65,0.75,0.85,0.95")]
    grid: Vec<f64>,
}

#[derive(Subcommand)]
enum BankCommand {
    /// Summarize a store file, or the service's store without a path.
    Inspect { path: Option<PathBuf> },
    /// Save the service's store to a file.
    Export { path: PathBuf },
    /// Replace the service's store with a file's contents.
    Import { path: PathBuf },
}

enum Failure {
    /// Bad invocation or configuration.
    Usage(String),
    Runtime(String),
    /// More environment faults than `loop.max_env_faults` allows.
    FaultBudget(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
            Failure::FaultBudget(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) | Failure::FaultBudget(m) => m,
        }
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        match e.kind() {
            Some(ErrorKind::Config | ErrorKind::Validation | ErrorKind::Parse | ErrorKind::BadRequest) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<sct_core::Error> for Failure {
    fn from(e: sct_core::Error) -> Self {
        match e {
            sct_core::Error::Io(_) | sct_core::Error::Numeric(_) | sct_core::Error::Env(_) => {
                Failure::Runtime(e.to_string())
            }
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    match &cli.config {
        Some(path) => Ok(Config::load(path)?),
        None => Ok(Config::default()),
    }
}

fn apply(common: &CommonArgs, mut config: Config) -> Config {
    if common.no_correction {
        config.control.correction_enabled = false;
    }
    if common.no_termination {
        config.control.termination_enabled = false;
    }
    config
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Prints `csv` and, with `--out`, writes it and the JSON summary there.
fn emit(stdout: &mut dyn Write, out: Option<&Path>, stem: &str, csv: &str, summary: &str) -> Result<(), Failure> {
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        write(&dir.join(format!("{stem}.csv")), csv)?;
        write(&dir.join(format!("{stem}.json")), summary)?;
    }
    put(stdout, csv)
}

fn put(stdout: &mut dyn Write, text: &str) -> Result<(), Failure> {
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| Failure::Runtime(format!("cannot write output: {e}")))
}

fn fault_budget(failures: usize, config: &Config) -> Result<(), Failure> {
    let budget = config.control.max_env_faults;
    if failures > budget {
        return Err(Failure::FaultBudget(format!(
            "{failures} environment faults exceed the budget of {budget}"
        )));
    }
    Ok(())
}

async fn run(cli: &Cli, client: &Client, config: Config, stdout: &mut dyn Write) -> Result<(), Failure> {
    match &cli.command {
        Command::Run(args) => {
            let config = apply(&args.common, config);
            let bank = args.bank_in.as_deref().map(read).transpose()?;
            let req = CampaignRequest {
                tasks: args.common.tasks.clone(),
                episodes: args.common.episodes,
                seed: args.common.seed,
                config: config.clone(),
                bank,
                replay: args.replay,
                parallel: args.parallel,
                return_bank: args.bank_out.is_some(),
                return_traces: args.traces,
            };
            let resp = client.campaign(&req).await?;
            let out = args.common.out.as_deref();
            emit(stdout, out, "campaign", &report::campaign_csv(&resp.report), &json(&resp.report))?;
            if let (Some(path), Some(bank)) = (&args.bank_out, &resp.bank) {
                write(path, bank)?;
            }
            if let (true, Some(dir)) = (args.traces, out) {
                let mut buf = Vec::new();
                for t in &resp.traces {
                    trace::write_trace(&mut buf, t)?;
                }
                write(&dir.join("traces.jsonl"), std::str::from_utf8(&buf).expect("json is utf-8"))?;
            }
            fault_budget(resp.report.env_failures(), &config)
        }
        Command::Ablate(common) => {
            let config = apply(common, config);
            let req = AblationRequest {
                tasks: common.tasks.clone(),
                episodes: common.episodes,
                seed: common.seed,
                config: config.clone(),
            };
            let resp = client.ablation(&req).await?;
            emit(stdout, common.out.as_deref(), "ablation", &report::ablation_csv(&resp.rows), &json(&resp.rows))?;
            fault_budget(resp.rows.iter().map(|r| r.report.env_failures()).max().unwrap_or(0), &config)
        }
        Command::Sweep(args) => {
            let config = apply(&args.common, config);
            let req = SweepRequest {
                tasks: args.common.tasks.clone(),
                episodes: args.common.episodes,
                seed: args.common.seed,
                grid: args.grid.clone(),
                config: config.clone(),
            };
            let resp = client.sweep(&req).await?;
            emit(stdout, args.common.out.as_deref(), "sweep", &report::sweep_csv(&resp.rows), &json(&resp.rows))?;
            fault_budget(resp.rows.iter().map(|r| r.report.env_failures()).max().unwrap_or(0), &config)
        }
        Command::Score { path } => {
            let text = read(path)?;
            let is_trace = text.trim_start().starts_with('{');
            let req = ScoreRequest {
                pose_log: (!is_trace).then(|| text.clone()),
                trace: is_trace.then_some(text),
                eval: Some(config.eval.clone()),
            };
            put(stdout, &json(&client.score(&req).await?))
        }
        Command::Bank(cmd) => {
            let summary = match cmd {
                BankCommand::Inspect { path: Some(p) } => client.bank_inspect(read(p)?).await?,
                BankCommand::Inspect { path: None } => client.bank_summary().await?,
                BankCommand::Export { path } => {
                    write(path, &client.bank_export().await?)?;
                    client.bank_summary().await?
                }
                BankCommand::Import { path } => client.bank_import(read(path)?).await?,
            };
            put(stdout, &json(&summary))
        }
    }
}

async fn main_inner(cli: Cli, stdout: &mut dyn Write) -> Result<(), Failure> {
    let config = load_config(&cli)?;
    let (client, _service) = match &cli.server {
        Some(url) => (Client::new(url.clone()), None),
        None => {
            let state = AppState::new(config.clone())?;
            let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, 0));
            let (bound, handle) = sct_server::spawn(addr, state)
                .await
                .map_err(|e| Failure::Runtime(format!("cannot start the local service: {e}")))?;
            (Client::new(format!("http://{bound}")), Some(handle))
        }
    };
    run(&cli, &client, config, stdout).await
}

/// Runs `sct` with `args` (program name first), writing results to
/// `stdout` and diagnostics to `stderr`. Returns the process exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    2
                }
            };
        }
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime");
    match runtime.block_on(main_inner(cli, stdout)) {
        Ok(()) => 0,
        Err(f) => {
            let _ = stdout.flush();
            let _ = writeln!(stderr, "sct: {}", f.message());
            f.code()
        }
    }
}
