//! Command-line experiment runner.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use sdnsim::asl::{from_xml, parse, pretty, to_xml, AslContext, AttackConfig};
use sdnsim::experiment::{load_attack, run, Overrides, RunOutput};
use sdnsim::kernel::SimTime;
use sdnsim::scenario::Scenario;

#[derive(Parser)]
#[command(name = "sdnsim", version, about = "OpenFlow network simulator with attack injection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write its metrics and logs.
    Run(RunArgs),
    /// Check scenario (.toml) and attack (.asl, .xml) files.
    Validate {
        files: Vec<PathBuf>,
        /// Scenario that attack files are checked against.
        #[arg(long, default_value = "builtin:fig4")]
        scenario: String,
    },
    /// Convert an ASL file to XML on stdout.
    Asl2xml {
        file: PathBuf,
        #[arg(long, default_value = "builtin:fig4")]
        scenario: String,
    },
    /// Convert an XML attack file to ASL on stdout.
    Xml2asl { file: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file, or `builtin:fig4` / `builtin:fig1`.
    #[arg(long, default_value = "builtin:fig4")]
    scenario: String,
    /// Attack file (.asl or .xml), or `builtin:dos`.
    #[arg(long)]
    attack: Option<String>,
    /// Polling interval in seconds.
    #[arg(long, value_parser = parse_secs)]
    interval: Option<SimTime>,
    /// Injection rate in packets per second for periodic attacks.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated duration in seconds.
    #[arg(long, value_parser = parse_secs)]
    duration: Option<SimTime>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Independent runs with seeds seed, seed+1, ... written to out/run-NNN.
    #[arg(long, default_value_t = 1)]
    runs: u32,
}

fn parse_secs(s: &str) -> Result<SimTime, String> {
    SimTime::parse_decimal_secs(s).map_err(|e| e.to_string())
}

/// Failure classes with their exit codes.
enum Failure {
    Invalid(anyhow::Error),
    Fault(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Fault(_) => 2,
        }
    }
}

fn invalid<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Invalid(e.into())
}

fn fault<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Fault(e.into())
}

fn load_scenario(spec: &str) -> Result<Scenario> {
    match spec.strip_prefix("builtin:") {
        Some(name) => Scenario::builtin(name).with_context(|| format!("unknown builtin scenario `{name}`")),
        None => Scenario::load(Path::new(spec)).with_context(|| format!("scenario {spec}")),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let scenario = load_scenario(&args.scenario).map_err(invalid)?;
    let attack: Option<AttackConfig> = match &args.attack {
        Some(spec) => Some(
            load_attack(spec, &scenario)
                .with_context(|| format!("attack {spec}"))
                .map_err(invalid)?,
        ),
        None => None,
    };
    if args.runs == 0 {
        return Err(invalid(anyhow::anyhow!("--runs must be at least 1")));
    }
    let base_seed = args.seed.unwrap_or(scenario.seed);
    let overrides = |i: u32| Overrides {
        interval: args.interval,
        rate: args.rate,
        seed: Some(base_seed.wrapping_add(u64::from(i))),
        duration: args.duration,
    };
    // Check overrides once up front so a bad value is reported as invalid input.
    overrides(0).apply(&scenario, attack.as_ref()).map_err(invalid)?;
    let results: Vec<Result<RunOutput, String>> = if args.runs == 1 {
        vec![run(&scenario, attack.as_ref(), &overrides(0)).map_err(|e| e.to_string())]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..args.runs)
                .map(|i| {
                    let (scenario, attack, o) = (&scenario, attack.as_ref(), overrides(i));
                    scope.spawn(move || run(scenario, attack, &o).map_err(|e| e.to_string()))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err("run panicked".to_string())))
                .collect()
        })
    };
    for (i, result) in results.into_iter().enumerate() {
        let out = result.map_err(|e| fault(anyhow::anyhow!(e)))?;
        let dir = if args.runs == 1 {
            args.out.clone()
        } else {
            args.out.join(format!("run-{:03}", i + 1))
        };
        out.write_dir(&dir).map_err(fault)?;
        summarize(&dir, &out);
    }
    Ok(())
}

fn summarize(dir: &Path, out: &RunOutput) {
    let mitigation = out
        .first_mitigation()
        .map_or_else(|| "none".to_string(), |t| format!("{t} s"));
    println!(
        "{}: scenario={} seed={} events={} mitigation={} digest={}",
        dir.display(),
        out.scenario.name,
        out.scenario.seed,
        out.report.dispatched,
        mitigation,
        out.report.trace_digest
    );
}

fn cmd_validate(files: &[PathBuf], scenario: &str) -> Result<(), Failure> {
    if files.is_empty() {
        return Err(invalid(anyhow::anyhow!("no files given")));
    }
    let mut failed = 0;
    for f in files {
        let result = match f.extension().and_then(|e| e.to_str()) {
            Some("toml") => Scenario::load(f).map(|_| ()).map_err(anyhow::Error::from),
            Some("asl") | Some("xml") => load_scenario(scenario).and_then(|s| {
                load_attack(&f.display().to_string(), &s)
                    .map(|_| ())
                    .map_err(anyhow::Error::from)
            }),
            _ => Err(anyhow::anyhow!("unrecognised file type (expected .toml, .asl or .xml)")),
        };
        match result {
            Ok(()) => println!("{}: ok", f.display()),
            Err(e) => {
                failed += 1;
                println!("{}: {e:#}", f.display());
            }
        }
    }
    if failed > 0 {
        return Err(invalid(anyhow::anyhow!("{failed} file(s) failed validation")));
    }
    Ok(())
}

fn cmd_asl2xml(file: &Path, scenario: &str) -> Result<(), Failure> {
    let s = load_scenario(scenario).map_err(invalid)?;
    let text = read(file).map_err(invalid)?;
    let ctx = AslContext::from_topology(&s.topology, &s.schema);
    let cfg = parse(&text, &ctx)
        .with_context(|| file.display().to_string())
        .map_err(invalid)?;
    print!("{}", to_xml(&cfg));
    Ok(())
}

fn cmd_xml2asl(file: &Path) -> Result<(), Failure> {
    let text = read(file).map_err(invalid)?;
    let cfg = from_xml(&text)
        .with_context(|| file.display().to_string())
        .map_err(invalid)?;
    print!("{}", pretty(&cfg));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate { files, scenario } => cmd_validate(&files, &scenario),
        Command::Asl2xml { file, scenario } => cmd_asl2xml(&file, &scenario),
        Command::Xml2asl { file } => cmd_xml2asl(&file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.code();
            let (Failure::Invalid(e) | Failure::Fault(e)) = f;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
