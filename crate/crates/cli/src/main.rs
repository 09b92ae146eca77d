use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use forge_core::construction::CompletionRule;
use forge_core::pipeline::{embedded_config, execute, Command, PipelineError, RunConfig, RunOutput};
use forge_core::sampler::MeasureSpec;
use forge_core::verify::SuiteKind;

/// Exchangeable random structures for pithy universal-existential theories.
///
/// Theory arguments are DSL files, compiled theory JSON, or `catalog:NAME`.
#[derive(Parser, Debug)]
#[command(name = "forge", version)]
struct Cli {
    /// Progress messages on standard error; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug, Default)]
struct Output {
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Engine {
    /// Width cap of the trace; building stops early when it is reached.
    #[arg(long)]
    max_width: Option<usize>,
    /// Completion rule: `lexmin` or `seeded:N`.
    #[arg(long, value_parser = parse_rule)]
    rule: Option<CompletionRule>,
    /// Translate function and constant symbols of a DSL theory to relations.
    #[arg(long)]
    relationalize: bool,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Compile a DSL theory to pithy form.
    Compile {
        file: String,
        #[arg(long)]
        relationalize: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Check strong amalgamation on the age up to a size bound.
    CheckSap {
        theory: String,
        #[arg(long, default_value_t = 4)]
        bound: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Check duplication of quantifier-free types up to a width.
    CheckDup {
        theory: String,
        #[arg(long, default_value_t = 3)]
        width: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Definable closure of a tuple in a finite structure.
    Dcl {
        structure: String,
        #[arg(long, value_delimiter = ',')]
        tuple: Vec<usize>,
        #[command(flatten)]
        out: Output,
    },
    /// Elements with orbits of at most `bound` elements over a tuple.
    Acl {
        structure: String,
        #[arg(long, value_delimiter = ',')]
        tuple: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        bound: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Run the interval construction for a number of stages.
    Build {
        theory: String,
        #[arg(long, default_value_t = 40)]
        stages: usize,
        #[command(flatten)]
        engine: Engine,
        #[command(flatten)]
        out: Output,
    },
    /// Summarize a trace, or draw it as SVG.
    TraceDump {
        trace: String,
        #[arg(long)]
        svg: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Draw random finite structures, one JSON line each.
    Sample {
        theory: String,
        #[arg(short = 'n')]
        n: usize,
        #[arg(long, default_value_t = 1)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `cauchy`, `logistic`, or with parameters, e.g. `cauchy(0, 2)`.
        #[arg(long)]
        measure: Option<MeasureSpec>,
        #[arg(long, default_value_t = 40)]
        base_stages: usize,
        #[command(flatten)]
        engine: Engine,
        #[command(flatten)]
        out: Output,
    },
    /// Step graphons of graph traces.
    #[command(subcommand)]
    Graphon(GraphonCmd),
    /// Compare a trace's sampler with W-random graphs from its graphon.
    Compare {
        trace: String,
        #[arg(short = 'n', default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        measure: Option<MeasureSpec>,
        #[command(flatten)]
        out: Output,
    },
    /// Run the statistical verification suite.
    Verify {
        #[arg(long, default_value = "quick")]
        suite: SuiteKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write JUnit-style XML here.
        #[arg(long)]
        junit: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Re-run the configuration embedded in an artifact.
    Rerun {
        artifact: PathBuf,
        #[arg(long)]
        junit: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Subcommand, Debug)]
enum GraphonCmd {
    /// Export a graph trace as a step graphon.
    Export {
        trace: String,
        #[arg(long)]
        measure: Option<MeasureSpec>,
        #[command(flatten)]
        out: Output,
    },
    /// Draw W-random graphs, one JSON line each.
    Sample {
        graphon: String,
        #[arg(short = 'n')]
        n: usize,
        #[arg(long, default_value_t = 1)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
}

fn parse_rule(s: &str) -> Result<CompletionRule, String> {
    match s {
        "lexmin" => Ok(CompletionRule::LexMin),
        _ => s
            .strip_prefix("seeded:")
            .and_then(|n| n.parse().ok())
            .map(CompletionRule::Seeded)
            .ok_or_else(|| format!("unknown rule `{s}`; expected lexmin or seeded:N")),
    }
}

fn path_string(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.to_string_lossy().into_owned())
}

fn with_engine(mut c: RunConfig, e: Engine) -> RunConfig {
    c.max_width = e.max_width;
    c.rule = e.rule;
    c.relationalize = e.relationalize;
    c
}

/// The run configuration of a parsed command line.
fn config(cli: Cli) -> Result<RunConfig, PipelineError> {
    let base = |command: Command, input: String, out: &Output| RunConfig {
        input: Some(input),
        out: path_string(&out.out),
        verbosity: cli.verbose,
        ..RunConfig::new(command)
    };
    Ok(match cli.command {
        Cmd::Compile { file, relationalize, out } => {
            RunConfig { relationalize, ..base(Command::Compile, file, &out) }
        }
        Cmd::CheckSap { theory, bound, out } => RunConfig { bound: Some(bound), ..base(Command::CheckSap, theory, &out) },
        Cmd::CheckDup { theory, width, out } => RunConfig { bound: Some(width), ..base(Command::CheckDup, theory, &out) },
        Cmd::Dcl { structure, tuple, out } => RunConfig { tuple: Some(tuple), ..base(Command::Dcl, structure, &out) },
        Cmd::Acl { structure, tuple, bound, out } => {
            RunConfig { tuple: Some(tuple), bound: Some(bound), ..base(Command::Acl, structure, &out) }
        }
        Cmd::Build { theory, stages, engine, out } => {
            with_engine(RunConfig { stages: Some(stages), ..base(Command::Build, theory, &out) }, engine)
        }
        Cmd::TraceDump { trace, svg, out } => RunConfig { svg, ..base(Command::TraceDump, trace, &out) },
        Cmd::Sample { theory, n, draws, seed, measure, base_stages, engine, out } => with_engine(
            RunConfig {
                n: Some(n),
                draws: Some(draws),
                seed,
                measure: Some(measure.unwrap_or_default()),
                stages: Some(base_stages),
                ..base(Command::Sample, theory, &out)
            },
            engine,
        ),
        Cmd::Graphon(GraphonCmd::Export { trace, measure, out }) => RunConfig {
            measure: Some(measure.unwrap_or_default()),
            ..base(Command::GraphonExport, trace, &out)
        },
        Cmd::Graphon(GraphonCmd::Sample { graphon, n, draws, seed, out }) => RunConfig {
            n: Some(n),
            draws: Some(draws),
            seed,
            ..base(Command::GraphonSample, graphon, &out)
        },
        Cmd::Compare { trace, n, draws, seed, measure, out } => RunConfig {
            n: Some(n),
            draws: Some(draws),
            seed,
            measure: Some(measure.unwrap_or_default()),
            ..base(Command::Compare, trace, &out)
        },
        Cmd::Verify { suite, seed, junit, out } => RunConfig {
            suite: Some(suite),
            seed,
            junit: path_string(&junit),
            out: path_string(&out.out),
            verbosity: cli.verbose,
            ..RunConfig::new(Command::Verify)
        },
        Cmd::Rerun { artifact, junit, out } => {
            let text = std::fs::read_to_string(&artifact)
                .map_err(|e| PipelineError::Input(format!("{}: {e}", artifact.display())))?;
            RunConfig {
                out: path_string(&out.out),
                junit: path_string(&junit),
                verbosity: cli.verbose,
                ..embedded_config(&text)?
            }
        }
    })
}

fn write(path: &Option<String>, text: &str) -> Result<(), PipelineError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| PipelineError::Domain {
            kind: "io",
            message: format!("{p}: {e}"),
            details: serde_json::Value::Null,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let cfg = config(cli)?;
    if cfg.verbosity > 0 {
        eprintln!("forge: running {:?}", cfg.command);
    }
    let RunOutput { main, junit } = execute(&cfg)?;
    write(&cfg.out, &main)?;
    if let (Some(xml), Some(path)) = (junit, &cfg.junit) {
        write(&Some(path.clone()), &xml)?;
    }
    if cfg.verbosity > 0 {
        if let Some(p) = &cfg.out {
            eprintln!("forge: wrote {p}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("FORGE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("forge: FORGE_THREADS ignored: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(match e {
                PipelineError::Input(_) => 2,
                PipelineError::Domain { .. } => 1,
            })
        }
    }
}
