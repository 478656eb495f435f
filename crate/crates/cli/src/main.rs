//! `fidoac`: issue simulated eIDs, run flows, serve, benchmark and run
//! security experiments.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fidoac::eid::{Attributes, ChipState};
use fidoac::fido::Flow;
use fidoac::flow::{Deployment, Holder};
use fidoac::nizk::default_tau;
use fidoac::primitives::HashProfile;
use fidoac_acserver::local::{self, LocalService};
use fidoac_acserver::{AppState, ServerConfig};
use fidoac_cli::{bench, parse_policy, run_report, EXIT_USAGE};
use fidoac_harness::{attacks, run_script, Script};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Parser)]
#[command(name = "fidoac", version, about = "Passwordless authentication with mediator-attested eID attributes")]
struct Cli {
    /// Print reports as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Hash profile for new deployments, benchmarks and experiments.
    #[arg(long, global = true, value_enum)]
    profile: Option<ProfileArg>,
    /// Proof repetitions; defaults to the profile's value.
    #[arg(long, global = true)]
    tau: Option<u32>,
    /// Seed for reproducible runs; fresh entropy otherwise.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Test,
    Default,
}

impl From<ProfileArg> for HashProfile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Test => HashProfile::Test,
            ProfileArg::Default => HashProfile::Default,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FlowArg {
    Register,
    Authenticate,
}

#[derive(Subcommand)]
enum Cmd {
    /// Issue a simulated eID, creating the deployment on first use.
    Issue(IssueArgs),
    /// Run a registration or authentication end to end.
    Run(RunArgs),
    /// Time every stage over repeated registrations.
    Bench {
        #[arg(long, default_value_t = 10)]
        iterations: usize,
    },
    /// Serve the verification service, or with `--local` the client service.
    Serve(ServeArgs),
    /// Run an adversary script against one of the security experiments.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct IssueArgs {
    #[arg(long, default_value = "fixtures")]
    dir: PathBuf,
    /// File name of the eID inside the fixtures directory.
    #[arg(long)]
    id: String,
    /// Holder name as printed in the MRZ.
    #[arg(long)]
    name: String,
    /// YYMMDD
    #[arg(long)]
    birth_date: String,
    #[arg(long, default_value = "310101")]
    expiry_date: String,
    #[arg(long, default_value = "DEU")]
    nationality: String,
    #[arg(long, default_value = "X")]
    sex: String,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "fixtures")]
    dir: PathBuf,
    /// eID to use.
    #[arg(long)]
    eid: String,
    #[arg(long, value_enum, default_value = "register")]
    flow: FlowArg,
    /// `none`, `age_over:<years>:<YYYYMMDD>` or the JSON form.
    #[arg(long, default_value = "age_over:18:20230101")]
    policy: String,
    #[arg(long, default_value = "https://shop.example")]
    origin: String,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "fixtures")]
    dir: PathBuf,
    /// Server config (anchors, profile, tau); defaults to the fixtures'.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    addr: Option<SocketAddr>,
    /// Serve the local client service for `--eid`.
    #[arg(long, requires = "eid")]
    local: bool,
    #[arg(long)]
    eid: Option<String>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Script file in JSON.
    #[arg(long, conflicts_with_all = ["builtin", "list"])]
    script: Option<PathBuf>,
    /// Name of a bundled script.
    #[arg(long, conflicts_with = "list")]
    builtin: Option<String>,
    /// List the bundled scripts.
    #[arg(long)]
    list: bool,
    /// Print the script instead of running it.
    #[arg(long)]
    dump: bool,
    /// Repeat with consecutive seeds and report the win rate.
    #[arg(long, default_value_t = 1)]
    trials: u64,
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE as u8)
}

fn rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| format!("{}: {e}", parent.display()))?;
    }
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn deployment_path(dir: &Path) -> PathBuf {
    dir.join("deployment.kv")
}

fn eid_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("eid").join(format!("{id}.kv"))
}

fn load_deployment(dir: &Path) -> Result<Deployment, String> {
    Deployment::from_fixture(&read(&deployment_path(dir))?)
}

fn load_chip(dir: &Path, id: &str) -> Result<ChipState, String> {
    ChipState::from_fixture(&read(&eid_path(dir, id))?).map_err(|e| e.to_string())
}

fn print<T: serde::Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) {
    if json {
        println!("{}", serde_json::to_string_pretty(value).expect("report serialises"));
    } else {
        print!("{}", text());
    }
}

fn issue(cli: &Cli, a: &IssueArgs) -> Result<ExitCode, String> {
    let mut rng = rng(cli.seed);
    let dep = match load_deployment(&a.dir) {
        Ok(dep) => {
            if cli.profile.is_some_and(|p| HashProfile::from(p) != dep.profile) {
                return Err(format!("deployment in {} uses profile {}", a.dir.display(), dep.profile.tag()));
            }
            dep
        }
        Err(_) => {
            let profile = cli.profile.map(HashProfile::from).unwrap_or_default();
            let dep = Deployment::new(profile, &mut rng);
            write(&deployment_path(&a.dir), &dep.to_fixture())?;
            let cfg = ServerConfig {
                tau: cli.tau.unwrap_or(default_tau(profile)),
                ..ServerConfig::new(dep.anchors(), profile)
            };
            write(&a.dir.join("anchors.kv"), &cfg.to_config())?;
            dep
        }
    };
    let att = Attributes::new(&a.name, &a.birth_date, &a.expiry_date, &a.nationality, &a.sex);
    let chip = dep.issuer.issue(&att, &mut rng).map_err(|e| e.to_string())?;
    let path = eid_path(&a.dir, &a.id);
    write(&path, &chip.to_fixture())?;
    let out = serde_json::json!({ "eid": path, "profile": dep.profile, "document_number": chip.attributes().document_number });
    print(cli.json, &out, || format!("issued {}\n", path.display()));
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli, a: &RunArgs) -> Result<ExitCode, String> {
    let mut rng = rng(cli.seed);
    let dep = load_deployment(&a.dir)?;
    if cli.profile.is_some_and(|p| HashProfile::from(p) != dep.profile) {
        return Err(format!("deployment in {} uses profile {}", a.dir.display(), dep.profile.tag()));
    }
    let policy = parse_policy(&a.policy).map_err(|e| e.to_string())?;
    let tau = cli.tau.unwrap_or(default_tau(dep.profile));
    let mut holder = Holder::new(load_chip(&a.dir, &a.eid)?, &mut rng);
    let flow = match a.flow {
        FlowArg::Register => Flow::Register,
        FlowArg::Authenticate => Flow::Authenticate,
    };
    let report = run_report(&dep, &mut holder, &a.origin, &policy, tau, flow, &mut rng).map_err(|e| e.to_string())?;
    print(cli.json, &report, || report.render());
    Ok(ExitCode::from(report.exit_code as u8))
}

fn run_bench(cli: &Cli, iterations: usize) -> Result<ExitCode, String> {
    let profile = cli.profile.map(HashProfile::from).unwrap_or_default();
    let tau = cli.tau.unwrap_or(default_tau(profile));
    let report = bench(profile, tau, iterations, &mut rng(cli.seed))?;
    print(cli.json, &report, || report.render());
    if !report.ordering_holds() {
        return Err("verification was not faster than proving".into());
    }
    Ok(ExitCode::SUCCESS)
}

fn serve(cli: &Cli, a: &ServeArgs) -> Result<ExitCode, String> {
    let cfg_path = a.config.clone().unwrap_or_else(|| a.dir.join("anchors.kv"));
    let mut cfg = ServerConfig::from_config(&read(&cfg_path)?)?;
    if let Some(tau) = cli.tau {
        cfg.tau = tau;
    }
    let tau = cfg.tau;
    let state = AppState::new(cfg);
    let (app, addr) = if a.local {
        let dep = load_deployment(&a.dir)?;
        let chip = load_chip(&a.dir, a.eid.as_deref().expect("required by clap"))?;
        let svc = LocalService::new(chip, dep.mediator, state, tau, cli.seed.unwrap_or_else(rand::random));
        (local::router(svc), a.addr.unwrap_or_else(|| SocketAddr::from(([127, 0, 0, 1], local::port()))))
    } else {
        (fidoac_acserver::router(state), a.addr.unwrap_or_else(|| SocketAddr::from(([127, 0, 0, 1], 8080))))
    };
    eprintln!("listening on http://{addr}");
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(fidoac_acserver::serve(app, addr)).map_err(|e| e.to_string())?;
    Ok(ExitCode::SUCCESS)
}

fn bundled() -> Vec<(&'static str, Script)> {
    attacks::honest_relays().into_iter().chain(attacks::attacks()).chain(attacks::distinguishers()).collect()
}

fn experiment(cli: &Cli, a: &ExperimentArgs) -> Result<ExitCode, String> {
    if a.list {
        let names: Vec<_> = bundled().into_iter().map(|(n, s)| (n, s.experiment.name())).collect();
        print(cli.json, &names, || names.iter().map(|(n, k)| format!("{n:<20}{k}\n")).collect());
        return Ok(ExitCode::SUCCESS);
    }
    let script = match (&a.script, &a.builtin) {
        (Some(path), _) => Script::from_json(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?,
        (None, Some(name)) => bundled()
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .ok_or_else(|| format!("no bundled script `{name}`"))?,
        (None, None) => return Err("give --script, --builtin or --list".into()),
    };
    if a.dump {
        println!("{}", script.to_json());
        return Ok(ExitCode::SUCCESS);
    }
    let profile = cli.profile.map(HashProfile::from).unwrap_or(HashProfile::Test);
    let tau = cli.tau.unwrap_or(default_tau(profile));
    let seed = cli.seed.unwrap_or_else(rand::random);
    if a.trials <= 1 {
        let v = run_script(&script, seed, profile, tau);
        print(cli.json, &v, || {
            let mut s = format!("{}: win={}\n", v.experiment.name(), v.win);
            if let Some(why) = &v.aborted {
                s.push_str(&format!("  aborted: {why}\n"));
            }
            for e in &v.trace {
                s.push_str(&format!("  [{}] {} -> {} ({})\n", e.phase, e.op, e.bind, e.outcome));
            }
            s
        });
        return Ok(ExitCode::SUCCESS);
    }
    let wins = (0..a.trials).filter(|k| run_script(&script, seed.wrapping_add(*k), profile, tau).win).count();
    let rate = wins as f64 / a.trials as f64;
    let out = serde_json::json!({ "experiment": script.experiment, "trials": a.trials, "wins": wins, "rate": rate });
    print(cli.json, &out, || format!("{}: {wins}/{} wins ({rate:.3})\n", script.experiment.name(), a.trials));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Issue(a) => issue(&cli, a),
        Cmd::Run(a) => run(&cli, a),
        Cmd::Bench { iterations } => run_bench(&cli, *iterations),
        Cmd::Serve(a) => serve(&cli, a),
        Cmd::Experiment(a) => experiment(&cli, a),
    };
    result.unwrap_or_else(fail)
}
