use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use latchflow::perception::{model_param_table, reference_architecture};
use latchflow::robotics::{write_scan_csv, BeamMode};
use latchflow_harness::{load_graph_config, run_files, scan_scene, SceneFile};

#[derive(Parser)]
#[command(name = "latchflow", version, about = "Run and inspect latchflow pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario through a graph on the virtual clock and emit a JSON report.
    Run {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check a graph document against the schema and the node catalog.
    Validate {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Print the keyword-model parameter table.
    Params,
    /// Convert an ultrasonic scene into a classified obstacle scan (CSV on stdout).
    Scan {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Paper)]
        mode: Mode,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// d_y = d·tan θ
    Paper,
    /// d_y = d·sin θ
    Trig,
}

impl From<Mode> for BeamMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Paper => BeamMode::Tangent,
            Mode::Trig => BeamMode::Sine,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            graph,
            scenario,
            seed,
            report,
        } => {
            let r = run_files(&graph, &scenario, seed)?;
            let json = r.to_json();
            match report {
                Some(path) => std::fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
                None => println!("{json}"),
            }
            if !r.is_completed() {
                bail!("run failed: {:?}", r.status);
            }
        }
        Command::Validate { graph } => {
            let text = std::fs::read_to_string(&graph).with_context(|| format!("reading {}", graph.display()))?;
            let def = load_graph_config(&text)?;
            println!(
                "{}: ok ({} nodes, {} streams, {} latches)",
                graph.display(),
                def.nodes.len(),
                def.streams.len(),
                def.latches.len()
            );
        }
        Command::Params => {
            println!("{}", model_param_table(&reference_architecture())?);
        }
        Command::Scan { scene, mode } => {
            let text = std::fs::read_to_string(&scene).with_context(|| format!("reading {}", scene.display()))?;
            let s = SceneFile::from_json(&text)?;
            let points = scan_scene(&s.echoes, &s.sweep, s.climb_height_m, mode.into())?;
            let mut out = std::io::stdout().lock();
            write_scan_csv(&points, &mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
