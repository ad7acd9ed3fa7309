//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dca::harness::{
    brute_force_optimum, export_dag, graph_from_trace, replay_verify, run_experiment,
    run_phase1_only, run_phase2_only, FixtureSet, RunConfig,
};
use dca::{Assignment, ConstraintGraph, InductionScope, Result};

#[derive(Parser)]
#[command(
    name = "dca",
    version,
    about = "Constraint-inducing permutation optimizer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run both phases.
    Optimize {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the hill-climbing phase only.
    Phase1 {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the annealing phase only.
    Phase2 {
        #[command(flatten)]
        run: RunArgs,
        /// Edge list, one `before < after` constraint per line.
        #[arg(long)]
        graph: PathBuf,
        /// Starting assignment, e.g. "3 1 2".
        #[arg(long)]
        start: Assignment,
    },
    /// Replay the reference fixtures and report differences.
    Replay {
        /// Directory with table1_2.replay, table3.replay and table3.moves.
        /// Defaults to the fixtures built into the binary.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive optimum of a small landscape.
    Brute {
        #[arg(long)]
        landscape: PathBuf,
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Write the constraint graph recorded in a trace as DOT.
    ExportDag {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep transitively implied edges.
        #[arg(long)]
        full: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Games per phase-1 evaluation.
    #[arg(long)]
    games: Option<u64>,
    /// Games per phase-2 evaluation.
    #[arg(long)]
    games_hi: Option<u64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    pool_size: Option<usize>,
    #[arg(long, value_enum)]
    induction_scope: Option<InductionScope>,
    /// Candidate list replacing the sampling proposer.
    #[arg(long)]
    script_moves: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut c = RunConfig::load(&self.config)?;
        let p1 = &mut c.phase1;
        let p2 = &mut c.phase2;
        if let Some(v) = self.games {
            p1.n_games = v;
            p1.n_games_baseline = 2 * v;
        }
        if let Some(v) = self.tau {
            p1.tau = v;
        }
        if let Some(v) = self.induction_scope {
            p1.induction_scope = v;
        }
        if let Some(v) = self.games_hi {
            p2.n_games_hi = v;
        }
        if let Some(v) = self.t0 {
            p2.t0 = v;
        }
        if let Some(v) = self.dt {
            p2.dt = v;
        }
        if let Some(v) = self.steps {
            p2.steps = v;
        }
        if let Some(v) = self.pool_size {
            p2.pool_size = v;
        }
        if let Some(p) = &self.script_moves {
            // command-line paths are relative to the working directory
            p2.script_moves = Some(std::path::absolute(p)?);
        }
        if self.seed.is_some() {
            c.seed = self.seed;
        }
        if let Some(o) = &self.out {
            c.out = Some(o.clone());
        } else if let Some(o) = &c.out {
            c.out = Some(c.resolve(o));
        }
        Ok(c)
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v)? + "\n";
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Optimize { run } => {
            let cfg = run.load()?;
            let exp = run_experiment(&cfg, cfg.out.as_deref())?;
            print_json(&exp.summary)?;
        }
        Command::Phase1 { run } => {
            let cfg = run.load()?;
            print_json(&run_phase1_only(&cfg, cfg.out.as_deref())?.1)?;
        }
        Command::Phase2 { run, graph, start } => {
            let cfg = run.load()?;
            let g = ConstraintGraph::from_edge_list(&read_text(&graph)?)?;
            print_json(&run_phase2_only(&cfg, &g, &start, cfg.out.as_deref())?.1)?;
        }
        Command::Replay { fixtures, out } => {
            let fx = match fixtures {
                Some(dir) => FixtureSet::load(&dir)?,
                None => FixtureSet::shipped(),
            };
            let report = replay_verify(&fx)?;
            print_json(&report)?;
            if let Some(p) = out {
                std::fs::write(p, serde_json::to_string_pretty(&report)? + "\n")?;
            }
            for d in &report.discrepancies {
                eprintln!("note: {d}");
            }
            if !report.all_match() {
                for m in &report.mismatches {
                    eprintln!("mismatch: {m}");
                }
                return Ok(ExitCode::from(1));
            }
        }
        Command::Brute { landscape, graph } => {
            let spec: dca::evaluation::LandscapeSpec =
                serde_json::from_str(&read_text(&landscape)?)
                    .map_err(|e| dca::Error::config(format!("bad landscape: {e}")))?;
            let g = graph
                .map(|p| ConstraintGraph::from_edge_list(&read_text(&p)?))
                .transpose()?;
            let r = brute_force_optimum(spec.build()?.as_ref(), g.as_ref())?;
            print_json(&serde_json::json!({
                "best": r.best,
                "mean": r.mean,
                "candidates": r.candidates,
            }))?;
        }
        Command::ExportDag { trace, out, full } => {
            let g = graph_from_trace(&dca::trace::read_trace(&trace)?)?;
            export_dag(&g, &out, full)?;
            eprintln!("wrote {} ({} constraints)", out.display(), g.edge_count());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
