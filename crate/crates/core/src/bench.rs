//! Corpus libraries and the boundary-check overhead benchmark.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assertion::CondId;
use crate::engine::{solve, CheckConfig, Mode, Semantics, SolveOptions, Stats, Verdict};
use crate::program::{FlatProgram, Goal, Query};
use crate::shallow::{lift_discharge, shallow_interface, substitute, ShallowModule};
use crate::syntax::{parse_module, ModuleSource};
use crate::term::Term;

pub const DEFAULT_SIZES: [u32; 5] = [64, 256, 1024, 4096, 8192];
pub const DEFAULT_SEED: u64 = 0x5eed;
const MIN_BATCH: Duration = Duration::from_millis(10);
const PROBES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Library {
    BinaryTree,
    AvlTree,
    Heap,
}

impl Library {
    pub const ALL: [Library; 3] = [Library::BinaryTree, Library::AvlTree, Library::Heap];

    pub fn name(&self) -> &'static str {
        match self {
            Library::BinaryTree => "binary-tree",
            Library::AvlTree => "avl-tree",
            Library::Heap => "heap",
        }
    }

    pub fn module(&self) -> &'static str {
        match self {
            Library::BinaryTree => "bt",
            Library::AvlTree => "avl",
            Library::Heap => "heap",
        }
    }

    pub fn source_text(&self) -> &'static str {
        match self {
            Library::BinaryTree => include_str!("../data/bt.mpl"),
            Library::AvlTree => include_str!("../data/avl.mpl"),
            Library::Heap => include_str!("../data/heap.mpl"),
        }
    }

    /// Condition ids verified ahead of time, for `safe-ct-rt`.
    pub fn discharge_text(&self) -> &'static str {
        match self {
            Library::BinaryTree => include_str!("../data/bt.discharge"),
            Library::AvlTree => include_str!("../data/avl.discharge"),
            Library::Heap => include_str!("../data/heap.discharge"),
        }
    }

    pub fn discharge(&self) -> BTreeSet<CondId> {
        parse_discharge(self.discharge_text()).expect("corpus discharge ledger")
    }

    pub fn source(&self) -> ModuleSource {
        parse_module(self.source_text()).expect("corpus module parses")
    }

    /// Predicate creating the empty structure, arity 1.
    pub fn new_pred(&self) -> &'static str {
        match self {
            Library::Heap => "new_heap",
            _ => "new_tree",
        }
    }

    /// The O(1) operation, arity 2: structure, key.
    pub fn const_pred(&self) -> &'static str {
        match self {
            Library::Heap => "peek_min",
            _ => "peek_root",
        }
    }

    /// The O(log N) operation, arity 3: key, structure, new structure.
    pub fn log_pred(&self) -> &'static str {
        "insert"
    }
}

impl fmt::Display for Library {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Library {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Library::ALL
            .into_iter()
            .find(|l| l.name() == s || l.module() == s)
            .ok_or_else(|| format!("unknown library `{s}` (expected binary-tree, avl-tree or heap)"))
    }
}

/// Newline-separated condition ids; `%` starts a comment.
pub fn parse_discharge(text: &str) -> Result<BTreeSet<CondId>, String> {
    text.lines()
        .map(|l| l.split('%').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| l.parse::<CondId>().map_err(|e| e.to_string()))
        .collect()
}

pub fn build_corpus() -> Vec<ModuleSource> {
    Library::ALL.iter().map(|l| l.source()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    /// O(1) operation whose full check is O(N).
    Const,
    /// O(log N) operation whose full check is O(N).
    Log,
}

impl OpKind {
    pub const ALL: [OpKind; 2] = [OpKind::Const, OpKind::Log];

    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Const => "const",
            OpKind::Log => "log",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "const" => Ok(OpKind::Const),
            "log" => Ok(OpKind::Log),
            _ => Err(format!("unknown op kind `{s}` (expected const or log)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkSpec {
    pub library: Library,
    pub op: OpKind,
    pub mode: Mode,
    pub shallow: bool,
    pub sizes: Vec<u32>,
    pub repetitions: usize,
    pub seed: u64,
}

impl BenchmarkSpec {
    pub fn new(library: Library, op: OpKind, mode: Mode, shallow: bool) -> Self {
        BenchmarkSpec { library, op, mode, shallow, sizes: DEFAULT_SIZES.to_vec(), repetitions: 5, seed: DEFAULT_SEED }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.repetitions < 3 {
            return Err(BenchError::Spec("at least 3 repetitions are needed".into()));
        }
        if self.sizes.is_empty() || self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BenchError::Spec("sizes must be non-empty and strictly increasing".into()));
        }
        if self.sizes[0] == 0 {
            return Err(BenchError::Spec("sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Every op, mode and shallow flag for one library.
pub fn matrix(library: Library, sizes: &[u32], repetitions: usize, seed: u64) -> Vec<BenchmarkSpec> {
    let mut out = Vec::new();
    for op in OpKind::ALL {
        for mode in Mode::ALL {
            for shallow in [false, true] {
                out.push(BenchmarkSpec { sizes: sizes.to_vec(), repetitions, seed, ..BenchmarkSpec::new(library, op, mode, shallow) });
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub library: Library,
    pub op: OpKind,
    pub mode: Mode,
    pub shallow: bool,
    pub n: u32,
    pub ns_per_op: f64,
    /// Conditions evaluated over one pass of the probe set.
    pub checks: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid benchmark: {0}")]
    Spec(String),
    #[error("{library} {op} under {mode} (shallow={shallow}), n={n}: {detail}")]
    Unexpected { library: Library, op: OpKind, mode: Mode, shallow: bool, n: u32, detail: String },
    #[error("shallow interface: {0}")]
    Shallow(#[from] crate::shallow::ShallowError),
    #[error(transparent)]
    Load(#[from] crate::error::LoadError),
}

struct Loaded {
    base: FlatProgram,
    shallow: FlatProgram,
    wrapped: ShallowModule,
}

/// Loaded corpus programs plus prebuilt structures.
pub struct Harness {
    libs: BTreeMap<Library, Loaded>,
    built: BTreeMap<(Library, u32, u64), (Term, Vec<i64>)>,
}

impl Harness {
    pub fn new() -> Result<Harness, BenchError> {
        let mut libs = BTreeMap::new();
        for lib in Library::ALL {
            let base = FlatProgram::flatten(&[lib.source()])?;
            let wrapped = shallow_interface(lib.module(), &base)?;
            let shallow = substitute(&base, &wrapped)?;
            libs.insert(lib, Loaded { base, shallow, wrapped });
        }
        Ok(Harness { libs, built: BTreeMap::new() })
    }

    pub fn program(&self, lib: Library, shallow: bool) -> &FlatProgram {
        let l = &self.libs[&lib];
        if shallow {
            &l.shallow
        } else {
            &l.base
        }
    }

    pub fn shallow_module(&self, lib: Library) -> &ShallowModule {
        &self.libs[&lib].wrapped
    }

    /// Builds the structures for `sizes` ahead of timing.
    pub fn prepare(&mut self, lib: Library, sizes: &[u32], seed: u64) -> Result<(), BenchError> {
        for &n in sizes {
            if !self.built.contains_key(&(lib, n, seed)) {
                let s = self.build(lib, n, seed)?;
                self.built.insert((lib, n, seed), s);
            }
        }
        Ok(())
    }

    /// Keys `2, 4, .., 2n` in fixed-seed random order.
    pub fn keys(n: u32, seed: u64) -> Vec<i64> {
        let mut keys: Vec<i64> = (1..=n as i64).map(|k| 2 * k).collect();
        keys.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        keys
    }

    /// The structure holding `keys(n, seed)`, built by running the
    /// library's own insert without checks, and the inserted keys.
    pub fn structure(&self, lib: Library, n: u32, seed: u64) -> Result<(Term, Vec<i64>), BenchError> {
        match self.built.get(&(lib, n, seed)) {
            Some(s) => Ok(s.clone()),
            None => self.build(lib, n, seed),
        }
    }

    fn build(&self, lib: Library, n: u32, seed: u64) -> Result<(Term, Vec<i64>), BenchError> {
        let p = &self.libs[&lib].base;
        let fail = |detail: String| BenchError::Unexpected { library: lib, op: OpKind::Log, mode: Mode::Unsafe, shallow: false, n, detail };
        let new = p.lookup(lib.module(), lib.new_pred(), 1).ok_or_else(|| fail("no constructor".into()))?;
        let insert = p.lookup(lib.module(), lib.log_pred(), 3).ok_or_else(|| fail("no insert".into()))?;
        let opts = SolveOptions { max_answers: Some(1), ..SolveOptions::default() };
        let first = |goal: Goal| -> Result<Term, BenchError> {
            let q = Query::from_goals("user", vec![goal], 1);
            match solve(&q, p, Semantics::Plain, opts.clone()).verdict {
                Verdict::Answers(a) if !a.is_empty() => Ok(a[0].0[0].clone()),
                other => Err(fail(format!("building failed: {other:?}"))),
            }
        };
        let mut t = first(Goal::Call(new, vec![Term::var(0)].into()))?;
        let keys = Harness::keys(n, seed);
        for &k in &keys {
            t = first(Goal::Call(insert, vec![Term::Int(k), t, Term::var(0)].into()))?;
        }
        Ok((t, keys))
    }

    fn queries(&self, spec: &BenchmarkSpec, n: u32) -> Result<Vec<Query>, BenchError> {
        let (t, _) = self.structure(spec.library, n, spec.seed)?;
        let p = self.program(spec.library, spec.shallow);
        let m = spec.library.module();
        let missing = || BenchError::Spec(format!("{m} lacks the {} operation", spec.op));
        Ok(match spec.op {
            OpKind::Const => {
                let peek = p.lookup(m, spec.library.const_pred(), 2).ok_or_else(missing)?;
                let q = Query::from_goals("user", vec![Goal::Call(peek, vec![t, Term::var(0)].into())], 1);
                vec![q; PROBES]
            }
            OpKind::Log => {
                let insert = p.lookup(m, spec.library.log_pred(), 3).ok_or_else(missing)?;
                // Odd keys are never present, so every probe inserts.
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ u64::from(n));
                (0..PROBES)
                    .map(|_| {
                        let k = 2 * rng.gen_range(0..=i64::from(n)) + 1;
                        Query::from_goals("user", vec![Goal::Call(insert, vec![Term::Int(k), t.clone(), Term::var(0)].into())], 1)
                    })
                    .collect()
            }
        })
    }

    fn config(&self, spec: &BenchmarkSpec) -> CheckConfig {
        let mut cfg = CheckConfig::new(spec.mode);
        cfg.shallow = spec.shallow;
        if spec.mode == Mode::SafeCtRt {
            let ledger = spec.library.discharge();
            cfg.discharge = if spec.shallow { lift_discharge(&ledger, &self.shallow_module(spec.library).id_map) } else { ledger };
        }
        cfg
    }

    /// Condition counts over the probe set, without timing.
    pub fn count(&self, spec: &BenchmarkSpec, n: u32) -> Result<Stats, BenchError> {
        let queries = self.queries(spec, n)?;
        let p = self.program(spec.library, spec.shallow);
        let sem = Semantics::Rtc(self.config(spec));
        let opts = SolveOptions { max_answers: Some(1), ..SolveOptions::default() };
        let mut total = Stats::default();
        for q in &queries {
            let out = solve(q, p, sem.clone(), opts.clone());
            match &out.verdict {
                Verdict::Answers(a) if !a.is_empty() => {}
                other => {
                    return Err(BenchError::Unexpected {
                        library: spec.library,
                        op: spec.op,
                        mode: spec.mode,
                        shallow: spec.shallow,
                        n,
                        detail: format!("probe did not succeed: {other:?}"),
                    })
                }
            }
            total.steps += out.stats.steps;
            total.calls += out.stats.calls;
            total.conditions += out.stats.conditions;
            total.boundary_props += out.stats.boundary_props;
            total.internal_props += out.stats.internal_props;
        }
        Ok(total)
    }

    /// Median time per operation over `spec.repetitions` batches of at
    /// least 10 ms each, after one warm-up batch.
    pub fn time(&self, spec: &BenchmarkSpec, n: u32) -> Result<f64, BenchError> {
        let queries = self.queries(spec, n)?;
        let p = self.program(spec.library, spec.shallow);
        let sem = Semantics::Rtc(self.config(spec));
        let opts = SolveOptions { max_answers: Some(1), ..SolveOptions::default() };
        let batch = |iters: usize| -> Duration {
            let start = Instant::now();
            for i in 0..iters {
                let out = solve(&queries[i % queries.len()], p, sem.clone(), opts.clone());
                std::hint::black_box(&out);
            }
            start.elapsed()
        };
        // The calibration batches double as warm-up.
        let mut iters = 1;
        while batch(iters) < MIN_BATCH {
            iters *= 2;
        }
        let mut per_op: Vec<f64> = (0..spec.repetitions).map(|_| batch(iters).as_nanos() as f64 / iters as f64).collect();
        per_op.sort_by(f64::total_cmp);
        Ok(per_op[per_op.len() / 2])
    }

    pub fn run(&self, spec: &BenchmarkSpec) -> Result<Vec<BenchRow>, BenchError> {
        spec.validate()?;
        let mut rows = Vec::with_capacity(spec.sizes.len());
        for &n in &spec.sizes {
            let checks = self.count(spec, n)?.conditions;
            let ns_per_op = self.time(spec, n)?;
            rows.push(BenchRow { library: spec.library, op: spec.op, mode: spec.mode, shallow: spec.shallow, n, ns_per_op, checks });
        }
        Ok(rows)
    }

    /// Runs several specs. Cells run one after the other unless `parallel`
    /// is set, which keeps counts exact but makes timings unreliable.
    pub fn run_all(&mut self, specs: &[BenchmarkSpec], parallel: bool) -> Result<Vec<BenchRow>, BenchError> {
        for s in specs {
            s.validate()?;
            self.prepare(s.library, &s.sizes, s.seed)?;
        }
        let this = &*self;
        let results = if parallel { crate::par::map(specs, |s| this.run(s)) } else { crate::par::map_sequential(specs, |s| this.run(s)) };
        let mut rows = Vec::new();
        for r in results {
            rows.extend(r?);
        }
        sort_rows(&mut rows);
        Ok(rows)
    }
}

pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<Vec<BenchRow>, BenchError> {
    let mut h = Harness::new()?;
    h.prepare(spec.library, &spec.sizes, spec.seed)?;
    h.run(spec)
}

fn row_key(r: &BenchRow) -> (&'static str, &'static str, usize, bool, u32) {
    let mode = Mode::ALL.iter().position(|m| *m == r.mode).unwrap_or(0);
    (r.library.name(), r.op.name(), mode, r.shallow, r.n)
}

pub fn sort_rows(rows: &mut [BenchRow]) {
    rows.sort_by(|a, b| row_key(a).cmp(&row_key(b)));
}

pub const CSV_HEADER: [&str; 7] = ["library", "op", "mode", "shallow", "n", "ns_per_op", "checks"];

fn fields(r: &BenchRow) -> [String; 7] {
    [
        r.library.name().to_string(),
        r.op.name().to_string(),
        r.mode.name().to_string(),
        r.shallow.to_string(),
        r.n.to_string(),
        format!("{:.1}", r.ns_per_op),
        r.checks.to_string(),
    ]
}

pub fn emit_csv<W: Write>(rows: &[BenchRow], out: W) -> csv::Result<()> {
    let mut rows = rows.to_vec();
    sort_rows(&mut rows);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &rows {
        w.write_record(fields(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Same columns as the CSV, whitespace separated, header commented out.
pub fn emit_gnuplot<W: Write>(rows: &[BenchRow], mut out: W) -> std::io::Result<()> {
    let mut rows = rows.to_vec();
    sort_rows(&mut rows);
    writeln!(out, "# {}", CSV_HEADER.join(" "))?;
    for r in &rows {
        writeln!(out, "{}", fields(r).join(" "))?;
    }
    Ok(())
}
