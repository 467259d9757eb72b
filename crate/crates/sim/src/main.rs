use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use commons_core::ledger::{read_ndjson, write_ndjson};
use commons_sim::output::{write_figures, Metric};
use commons_sim::{run_scenario, SimError, SimScenario};

/// Simulate houses and recompute figure data from event logs.
#[derive(Parser)]
#[command(name = "sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario; writes events.ndjson plus every figure.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute figure data from an NDJSON event log.
    Analyze {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
        figures: Vec<u8>,
        #[arg(long)]
        out: PathBuf,
        /// Chore group for Fig. 2, e.g. `kitchen=Dishes,Fridge cleanout`. Repeatable.
        #[arg(long = "group", value_parser = parse_group)]
        groups: Vec<(String, Vec<String>)>,
    },
    /// Run a scenario once per value of one parameter.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Dotted path into the scenario, e.g. `agents.0.diligence`.
        #[arg(long)]
        param: String,
        /// TOML values, e.g. `0.2,0.5,0.8`.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_group(s: &str) -> Result<(String, Vec<String>), String> {
    let (name, chores) = s.split_once('=').ok_or("expected NAME=CHORE,CHORE")?;
    Ok((name.to_string(), chores.split(',').map(|c| c.trim().to_string()).collect()))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sim: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Run { scenario, out } => {
            let s = SimScenario::from_toml(&fs::read_to_string(scenario)?)?;
            print_summary(&simulate(&s, &out)?);
        }
        Command::Analyze {
            log,
            figures,
            out,
            groups,
        } => {
            let events = read_ndjson(BufReader::new(File::open(log)?))?;
            if events.is_empty() {
                return Err(SimError::EmptyLog);
            }
            let groups: BTreeMap<_, _> = groups.into_iter().collect();
            print_summary(&write_figures(&events, &groups, &figures, &out)?);
        }
        Command::Sweep {
            scenario,
            param,
            values,
            out,
        } => {
            let text = fs::read_to_string(scenario)?;
            fs::create_dir_all(&out)?;
            let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
            w.write_record([param.as_str(), "metric", "value", "reference"])?;
            for v in &values {
                let s = SimScenario::from_toml_with(&text, &param, v)?;
                let dir = out.join(format!("{param}={v}"));
                for m in simulate(&s, &dir)? {
                    w.write_record([v, &m.metric, &m.value, &m.reference])?;
                }
                eprintln!("{param}={v} done");
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn simulate(s: &SimScenario, out: &Path) -> Result<Vec<Metric>, SimError> {
    let run = run_scenario(s)?;
    fs::create_dir_all(out)?;
    write_ndjson(BufWriter::new(File::create(out.join("events.ndjson"))?), &run.log)?;
    write_figures(&run.log, &s.groups, &[2, 3, 4, 5], out)
}

fn print_summary(summary: &[Metric]) {
    for m in summary {
        if m.reference.is_empty() {
            println!("{:<40} {}", m.metric, m.value);
        } else {
            println!("{:<40} {}  (reference: {})", m.metric, m.value, m.reference);
        }
    }
}
