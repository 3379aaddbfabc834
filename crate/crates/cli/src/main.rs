//! `dcmd`, the operator entry point for simulated DCMD missions.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use dcmd_core::agents::{run_mission, MissionError, MissionKit, MissionLog};
use dcmd_core::bayes::MissionNets;
use dcmd_core::bundled;
use dcmd_core::config::MissionConfig;
use dcmd_core::graphstore::Store;
use dcmd_core::ontology::{parse_schema, validate_schema, SchemaDef};
use dcmd_core::perception::Scenario;
use dcmd_core::query::{execute, parse_query, QueryError, QueryKind};

#[derive(Parser)]
#[command(name = "dcmd", version, about = "Dynamic contextual mission data for simulated robot teams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a mission and write its log, agent snapshots and summary.
    Run(RunArgs),
    /// Run a query against a knowledge-base snapshot.
    Query(QueryArgs),
    /// Check input files before a run.
    Validate(ValidateArgs),
    /// Print a mission log as a timeline.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
    /// Dump a knowledge-base snapshot as structured text.
    Export {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Bundled scenario name or path to a scenario file.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "mission_out")]
    out: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Assessment network file.
    #[arg(long)]
    cpt: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Write the snapshot back after an insert query.
    #[arg(long)]
    save: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Bundled scenario name or path to a scenario file.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    cpt: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// A failure that ends the command with a diagnostic and an exit code.
#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_schema(path: Option<&Path>) -> Result<Arc<SchemaDef>, CliError> {
    let Some(path) = path else {
        return Ok(bundled::mission_schema());
    };
    let schema = parse_schema(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let violations = validate_schema(&schema);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
        return Err(CliError::Input(format!("{}: invalid schema\n{}", path.display(), list.join("\n"))));
    }
    Ok(Arc::new(schema))
}

fn load_nets(path: Option<&Path>) -> Result<MissionNets, CliError> {
    match path {
        None => Ok(bundled::mission_nets()),
        Some(p) => MissionNets::parse(&read(p)?).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
    }
}

fn load_config(path: Option<&Path>) -> Result<MissionConfig, CliError> {
    match path {
        None => Ok(bundled::mission_config()),
        Some(p) => MissionConfig::from_toml(&read(p)?).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
    }
}

fn load_scenario(name_or_path: &str) -> Result<Scenario, CliError> {
    let path = Path::new(name_or_path);
    let result = if path.exists() || bundled::scenario_source(name_or_path).is_none() {
        Scenario::load(path)
    } else {
        bundled::scenario(name_or_path)
    };
    result.map_err(|e| CliError::Input(format!("{name_or_path}: {e}")))
}

fn load_snapshot(path: &Path, schema: Option<&Path>) -> Result<Store, CliError> {
    let schema = load_schema(schema)?;
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Store::restore(schema, &bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&args.scenario)?;
    let kit = MissionKit {
        schema: load_schema(args.schema.as_deref())?,
        nets: load_nets(args.cpt.as_deref())?,
        config: load_config(args.config.as_deref())?,
    };
    let outcome = run_mission(&scenario, args.seed, &kit).map_err(|e| match e {
        MissionError::Deadlock { .. } => CliError::Failure(e.to_string()),
        other => CliError::Input(other.to_string()),
    })?;

    fs::create_dir_all(&args.out).map_err(|e| CliError::Input(format!("{}: {e}", args.out.display())))?;
    write(&args.out.join("mission.log.jsonl"), outcome.log.to_jsonl())?;
    for (agent, store) in &outcome.stores {
        write(&args.out.join(format!("{agent}.dkb")), store.snapshot())?;
    }
    let json = serde_json::to_string_pretty(&outcome.summary).expect("summary serializes");
    write(&args.out.join("summary.json"), json + "\n")?;
    let text = outcome.summary.render();
    write(&args.out.join("summary.txt"), &text)?;
    print!("{text}");
    if outcome.summary.success {
        Ok(())
    } else {
        Err(CliError::Failure(format!("mission {} did not complete", scenario.name)))
    }
}

/// Renders a query error, pointing at the offending column when there is one.
fn query_diagnostic(text: &str, err: &QueryError) -> String {
    let mut out = format!("query error: {err}\n");
    if let Some((line, column)) = err.position() {
        if let Some(src) = text.lines().nth(line.saturating_sub(1)) {
            let _ = writeln!(out, "  {src}");
            let _ = writeln!(out, "  {}^", " ".repeat(column.saturating_sub(1)));
        }
    }
    out
}

fn cmd_query(args: &QueryArgs) -> Result<(), CliError> {
    let mut store = load_snapshot(&args.snapshot, args.schema.as_deref())?;
    let fail = |e: QueryError| CliError::Failure(query_diagnostic(&args.query, &e).trim_end().to_string());
    let ast = parse_query(&args.query).map_err(fail)?;
    let result = execute(&mut store, &ast).map_err(fail)?;
    print!("{}", result.render());
    eprintln!("{} row(s)", result.len());
    if args.save && ast.kind() == QueryKind::Insert {
        write(&args.snapshot, store.snapshot())?;
    }
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), CliError> {
    let mut failed = 0usize;
    let mut check = |what: String, result: Result<(), CliError>| match result {
        Ok(()) => println!("ok       {what}"),
        Err(e) => {
            println!("invalid  {what}\n{}", indent(&e.to_string()));
            failed += 1;
        }
    };
    let everything = args.schema.is_none() && args.scenario.is_none() && args.cpt.is_none() && args.config.is_none();
    if args.schema.is_some() || everything {
        check(label("schema", args.schema.as_deref()), load_schema(args.schema.as_deref()).map(|_| ()));
    }
    if args.cpt.is_some() || everything {
        check(label("networks", args.cpt.as_deref()), load_nets(args.cpt.as_deref()).map(|_| ()));
    }
    if args.config.is_some() || everything {
        check(label("config", args.config.as_deref()), load_config(args.config.as_deref()).map(|_| ()));
    }
    match &args.scenario {
        Some(s) => check(format!("scenario {s}"), load_scenario(s).map(|_| ())),
        None if everything => {
            for (name, _) in bundled::SCENARIOS {
                check(format!("scenario {name}"), load_scenario(name).map(|_| ()));
            }
        }
        None => {}
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Input(format!("{failed} input(s) failed validation")))
    }
}

fn label(kind: &str, path: Option<&Path>) -> String {
    match path {
        Some(p) => format!("{kind} {}", p.display()),
        None => format!("{kind} (bundled)"),
    }
}

fn indent(text: &str) -> String {
    text.lines().map(|l| format!("    {l}")).collect::<Vec<_>>().join("\n")
}

fn cmd_replay(log: &Path) -> Result<(), CliError> {
    let log = MissionLog::from_jsonl(&read(log)?).map_err(|e| CliError::Input(format!("{}: {e}", log.display())))?;
    print!("{}", log.timeline());
    Ok(())
}

fn export(store: &Store) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "things: {}", store.len());
    for t in store.things() {
        let _ = writeln!(out, "{} {}", t.id, t.type_name);
        for (role, players) in &t.role_players {
            let ids: Vec<String> = players.iter().map(|p| p.to_string()).collect();
            let _ = writeln!(out, "  {role} -> {}", ids.join(", "));
        }
        for (name, value) in &t.attributes {
            let _ = writeln!(out, "  {name} = {value}");
        }
    }
    out
}

fn cmd_export(snapshot: &Path, schema: Option<&Path>) -> Result<(), CliError> {
    print!("{}", export(&load_snapshot(snapshot, schema)?));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Query(args) => cmd_query(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Replay { log } => cmd_replay(log),
        Command::Export { snapshot, schema } => cmd_export(snapshot, schema.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dcmd: {e}");
            ExitCode::from(e.code())
        }
    }
}
