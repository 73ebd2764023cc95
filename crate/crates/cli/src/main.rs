//! Command-line entry point: `pnlw <experiment-id>` runs one catalog entry,
//! `pnlw list` prints the catalog.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use pnlw::harness::{list_experiments, run_experiment, RunManifest};
use serde_json::{Map, Value};

#[derive(Parser)]
#[command(name = "pnlw", version, about = "Run the cubic wave equation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the experiment catalog.
    List {
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    #[command(external_subcommand)]
    Run(Vec<String>),
}

#[derive(Parser)]
#[command(name = "pnlw <experiment-id>")]
struct RunArgs {
    experiment: String,
    #[command(flatten)]
    opts: RunOpts,
}

#[derive(Args)]
struct RunOpts {
    /// JSON run manifest; its `experiment` field is overridden.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; each run gets `<id>-<hash>/` under it.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Override a manifest field, e.g. `n_max=8`, `tolerances.parseval=1e-9`
    /// or `components.parseval.n_max=8`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// Insert `value` at a dotted path. Bare keys go under `params`.
fn set_path(root: &mut Value, key: &str, value: Value) -> anyhow::Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    if !matches!(parts[0], "params" | "components" | "seed") {
        parts.insert(0, "params");
    }
    let (last, init) = parts.split_last().expect("split yields at least one part");
    let mut node = root;
    for p in init {
        let obj = node.as_object_mut().context("manifest is not a JSON object")?;
        node = obj.entry(p.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    node.as_object_mut().with_context(|| format!("{key}: parent is not an object"))?.insert(last.to_string(), value);
    Ok(())
}

fn manifest(experiment: &str, opts: &RunOpts) -> anyhow::Result<RunManifest> {
    let mut value = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => Value::Object(Map::new()),
    };
    let obj = value.as_object_mut().context("manifest is not a JSON object")?;
    obj.insert("experiment".into(), experiment.into());
    if let Some(seed) = opts.seed {
        obj.insert("seed".into(), seed.into());
    }
    for kv in &opts.set {
        let Some((k, v)) = kv.split_once('=') else { bail!("--set {kv}: expected KEY=VALUE") };
        let v = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        set_path(&mut value, k, v)?;
    }
    Ok(RunManifest::from_json(&value.to_string())?)
}

fn run(args: RunArgs) -> anyhow::Result<bool> {
    let m = manifest(&args.experiment, &args.opts)?;
    let result = run_experiment(&m, &args.opts.out)?;
    for c in &result.checks {
        println!("{}", c.line());
    }
    for c in &result.constants {
        match (c.ci_low, c.ci_high) {
            (Some(lo), Some(hi)) => println!("const {}/{} = {:.6e} [{lo:.6e}, {hi:.6e}]", c.component, c.name, c.value),
            _ => println!("const {}/{} = {:.6e}", c.component, c.name, c.value),
        }
    }
    for g in &result.groups {
        println!("{} {}", if g.passed { "PASS" } else { "FAIL" }, g.id);
    }
    println!("run directory: {}", args.opts.out.join(&result.run_dir).display());
    Ok(result.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::List { json } => {
            let rows: Vec<_> = list_experiments().iter().map(|e| e.row()).collect();
            if json {
                println!("{}", serde_json::to_string_pretty(&rows).expect("catalog rows serialize"));
            } else {
                for r in rows {
                    println!("{:<20} {:<22} {}", r.id, r.op, r.summary);
                }
            }
            Ok(true)
        }
        Command::Run(argv) => {
            let args = RunArgs::parse_from(std::iter::once("pnlw".to_string()).chain(argv));
            run(args)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
