use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hidecheck::assertion::conditions_to_text;
use hidecheck::bench::{emit_csv, emit_gnuplot, parse_discharge, BenchmarkSpec, Harness, Library, OpKind, DEFAULT_SEED};
use hidecheck::engine::{format_answer, solve, CheckConfig, Mode, Semantics, SolveOptions, Verdict};
use hidecheck::escape::{escaping_terms, materialize};
use hidecheck::shallow::{lift_discharge, shallow_interface, shallow_program};
use hidecheck::syntax::{parse_module, parse_query, ModuleSource};
use hidecheck::{CondId, FlatProgram};

const EXIT_VIOLATION: u8 = 1;
const EXIT_LOAD: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "hidecheck", about = "Run-time assertion checking for modular logic programs with hidden functors")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load modules and report problems.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Run a query.
    Run(RunArgs),
    /// Print derived artifacts of a module.
    Explain {
        kind: ExplainKind,
        module: String,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Time corpus operations under each checking mode.
    Bench(BenchArgs),
    /// Print the version.
    Version,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExplainKind {
    Conditions,
    Escape,
    Shallow,
}

#[derive(Args)]
struct RunArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(short = 'q', long = "query")]
    query: String,
    #[arg(long, default_value = "safe-rt")]
    mode: Mode,
    /// Replace every module by its shallow interface.
    #[arg(long)]
    shallow: bool,
    /// Newline-separated condition ids proven ahead of time.
    #[arg(long)]
    discharge: Option<PathBuf>,
    /// Write the derivation, one state per line.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    max_answers: usize,
    /// Module the query runs in; defaults to the first loaded module.
    #[arg(long)]
    module: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Libraries to run (default: all).
    #[arg(long = "library", value_parser = parse_library)]
    libraries: Vec<Library>,
    #[arg(long = "op", value_parser = parse_op)]
    ops: Vec<OpKind>,
    #[arg(long = "mode")]
    modes: Vec<Mode>,
    /// Only shallow (`true`) or only full (`false`) checks.
    #[arg(long)]
    shallow: Option<bool>,
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<u32>>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// CSV destination (default: standard output).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also write whitespace-separated data for gnuplot.
    #[arg(long)]
    gnuplot: Option<PathBuf>,
    /// Run cells concurrently; counts stay exact, timings do not.
    #[arg(long)]
    parallel: bool,
}

fn parse_library(s: &str) -> Result<Library, String> {
    s.parse()
}

fn parse_op(s: &str) -> Result<OpKind, String> {
    s.parse()
}

enum Failure {
    Violation(String),
    Load(String),
    Usage(String),
}

impl Failure {
    fn report(self) -> ExitCode {
        let (msg, code) = match self {
            Failure::Violation(m) => (m, EXIT_VIOLATION),
            Failure::Load(m) => (m, EXIT_LOAD),
            Failure::Usage(m) => (m, EXIT_USAGE),
        };
        eprintln!("{msg}");
        ExitCode::from(code)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.cmd {
        Cmd::Check { files } => check(&files),
        Cmd::Run(args) => run(&args),
        Cmd::Explain { kind, module, files } => explain(kind, &module, &files),
        Cmd::Bench(args) => bench(&args),
        Cmd::Version => {
            println!("hidecheck {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}

fn load(files: &[PathBuf]) -> Result<(Vec<ModuleSource>, FlatProgram), Failure> {
    let mut sources = Vec::new();
    for f in files {
        let text = fs::read_to_string(f).map_err(|e| Failure::Usage(format!("{}: {e}", f.display())))?;
        let m = parse_module(&text).map_err(|e| Failure::Load(format!("{}: {e}", f.display())))?;
        sources.push(m);
    }
    let p = FlatProgram::flatten(&sources).map_err(|e| Failure::Load(e.to_string()))?;
    Ok((sources, p))
}

fn check(files: &[PathBuf]) -> Result<(), Failure> {
    let (sources, p) = load(files)?;
    let conds = p.conditions().count();
    println!("ok: {} modules, {} predicates, {} conditions", sources.len(), p.preds().len(), conds);
    Ok(())
}

fn read_discharge(path: &Path) -> Result<BTreeSet<CondId>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    parse_discharge(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let (sources, base) = load(&args.files)?;
    let context = args.module.clone().unwrap_or_else(|| sources[0].name.clone());
    let goals = parse_query(&args.query).map_err(|e| Failure::Usage(format!("query: {e}")))?;

    let (p, id_map) =
        if args.shallow { shallow_program(&base).map_err(|e| Failure::Load(e.to_string()))? } else { (base, BTreeMap::new()) };
    let query = p.compile_query(&goals, &context).map_err(|e| Failure::Load(e.to_string()))?;

    let mut cfg = CheckConfig::new(args.mode);
    cfg.shallow = args.shallow;
    if let Some(path) = &args.discharge {
        cfg.discharge = lift_discharge(&read_discharge(path)?, &id_map);
    }
    let opts = SolveOptions { max_answers: Some(args.max_answers), trace: args.trace.is_some(), ..SolveOptions::default() };
    let out = solve(&query, &p, Semantics::Rtc(cfg), opts);

    if let (Some(path), Some(trace)) = (&args.trace, &out.trace) {
        let mut text = String::new();
        for s in trace {
            text.push_str(&format!("{}\t{}\t{}\n", s.rule, s.item, s.depth));
        }
        fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }

    let stdout = io::stdout();
    let mut w = stdout.lock();
    let print_answers = |w: &mut io::StdoutLock<'_>, answers: &[hidecheck::engine::Answer]| {
        for (i, a) in answers.iter().enumerate() {
            if i > 0 {
                let _ = writeln!(w, ";");
            }
            let _ = writeln!(w, "{}", format_answer(&query, a));
        }
    };
    match out.verdict {
        Verdict::Answers(answers) => {
            if answers.is_empty() {
                let _ = writeln!(w, "false");
            } else {
                print_answers(&mut w, &answers);
            }
            Ok(())
        }
        Verdict::Violation(v) => {
            print_answers(&mut w, &v.answers_before);
            let id = id_map.get(&v.cond).copied().unwrap_or(v.cond);
            Err(Failure::Violation(format!("assertion violated: {id} ({}) at {}", v.kind, v.goal)))
        }
        Verdict::RuntimeError(e) => Err(Failure::Violation(format!("runtime error: {e}"))),
    }
}

fn explain(kind: ExplainKind, module: &str, files: &[PathBuf]) -> Result<(), Failure> {
    let (_, p) = load(files)?;
    if p.module(module).is_none() {
        return Err(Failure::Usage(format!("unknown module {module}")));
    }
    let text = match kind {
        ExplainKind::Conditions => conditions_to_text(&p, module),
        ExplainKind::Escape => {
            let e = escaping_terms(module, &p).ok_or_else(|| Failure::Usage(format!("unknown module {module}")))?;
            materialize(&e, &p).map_err(|e| Failure::Load(e.to_string()))?.to_text(&p)
        }
        ExplainKind::Shallow => shallow_interface(module, &p).map_err(|e| Failure::Load(e.to_string()))?.to_text(),
    };
    print!("{text}");
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<(), Failure> {
    let libs = if args.libraries.is_empty() { Library::ALL.to_vec() } else { args.libraries.clone() };
    let ops = if args.ops.is_empty() { OpKind::ALL.to_vec() } else { args.ops.clone() };
    let modes = if args.modes.is_empty() { Mode::ALL.to_vec() } else { args.modes.clone() };
    let flags: Vec<bool> = args.shallow.map_or(vec![false, true], |s| vec![s]);
    let mut specs = Vec::new();
    for &library in &libs {
        for &op in &ops {
            for &mode in &modes {
                for &shallow in &flags {
                    let mut s = BenchmarkSpec::new(library, op, mode, shallow);
                    if let Some(sizes) = &args.sizes {
                        s.sizes = sizes.clone();
                    }
                    s.repetitions = args.reps;
                    s.seed = args.seed;
                    s.validate().map_err(|e| Failure::Usage(e.to_string()))?;
                    specs.push(s);
                }
            }
        }
    }
    let mut h = Harness::new().map_err(|e| Failure::Load(e.to_string()))?;
    let rows = h.run_all(&specs, args.parallel).map_err(|e| Failure::Violation(e.to_string()))?;
    match &args.csv {
        Some(path) => {
            let f = fs::File::create(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            emit_csv(&rows, f).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        }
        None => emit_csv(&rows, io::stdout().lock()).map_err(|e| Failure::Usage(e.to_string()))?,
    }
    if let Some(path) = &args.gnuplot {
        let f = fs::File::create(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        emit_gnuplot(&rows, f).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
