//! Depth-first interpreter for flattened programs, with and without
//! run-time assertion checking.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::rc::Rc;

use crate::assertion::{Builtin, CondId, CondKind, CondKindTag, PropLit, PropRef};
use crate::program::{write_call, FlatProgram, Goal, PredId, Query};
use crate::regtype::{holds, usr_check};
use crate::subst::Substitution;
use crate::term::{Name, Term, VarId};

/// Which assertion conditions are checked at run time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Unsafe,
    ClientSafe,
    SafeRt,
    SafeCtRt,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Unsafe, Mode::ClientSafe, Mode::SafeCtRt, Mode::SafeRt];

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Unsafe => "unsafe",
            Mode::ClientSafe => "client-safe",
            Mode::SafeRt => "safe-rt",
            Mode::SafeCtRt => "safe-ct-rt",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}` (expected unsafe, client-safe, safe-rt or safe-ct-rt)"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckConfig {
    pub mode: Mode,
    /// Whether the program was built with shallow interfaces. Informational:
    /// the transformation is applied to the program, not at run time.
    pub shallow: bool,
    /// Conditions proven at compile time; only meaningful in `SafeCtRt`.
    pub discharge: BTreeSet<CondId>,
}

impl CheckConfig {
    pub fn new(mode: Mode) -> Self {
        CheckConfig { mode, shallow: false, discharge: BTreeSet::new() }
    }

    pub fn with_discharge(mut self, ids: impl IntoIterator<Item = CondId>) -> Self {
        self.discharge.extend(ids);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Semantics {
    Plain,
    Rtc(CheckConfig),
}

/// How prop literals are decided.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PropEngine {
    /// Structural membership test over the regtype productions.
    #[default]
    Direct,
    /// Runs the property as a nested derivation that may not bind
    /// pre-existing variables.
    Derivation,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub max_answers: Option<usize>,
    pub step_limit: Option<u64>,
    pub trace: bool,
    /// Record argument terms at every cross-module call and return.
    pub capture: bool,
    /// Record every literal about to be reduced, with its module.
    pub observe: bool,
    pub prop_engine: PropEngine,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { max_answers: None, step_limit: None, trace: false, capture: false, observe: false, prop_engine: PropEngine::Direct }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub steps: u64,
    pub calls: u64,
    /// Calls conditions, success guards and success posts evaluated.
    pub conditions: u64,
    /// Prop literals evaluated for calls crossing a module boundary.
    pub boundary_props: u64,
    pub internal_props: u64,
}

/// Values of the query variables `0..nvars` in one answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Answer(pub Vec<Term>);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub cond: CondId,
    pub kind: CondKindTag,
    /// Culprit goal with the store applied.
    pub goal: String,
    pub answers_before: Vec<Answer>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuntimeErrorKind {
    Visibility,
    Instantiation,
    Type,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuntimeError {
    pub kind: RuntimeErrorKind,
    pub message: String,
}

impl fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            RuntimeErrorKind::Visibility => "visibility-violation",
            RuntimeErrorKind::Instantiation => "instantiation-error",
            RuntimeErrorKind::Type => "type-error",
        };
        write!(f, "{k}: {}", self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Answers(Vec<Answer>),
    Violation(Violation),
    RuntimeError(RuntimeError),
}

impl Verdict {
    pub fn answers(&self) -> Option<&[Answer]> {
        match self {
            Verdict::Answers(a) => Some(a),
            _ => None,
        }
    }

    pub fn violation(&self) -> Option<&Violation> {
        match self {
            Verdict::Violation(v) => Some(v),
            _ => None,
        }
    }

    /// Same outcome up to variable renaming in answers, with condition ids
    /// of `other` passed through `map`. Message texts are not compared.
    pub fn equivalent(&self, other: &Verdict, map: impl Fn(CondId) -> CondId) -> bool {
        match (self, other) {
            (Verdict::Answers(a), Verdict::Answers(b)) => variant_answers(a, b),
            (Verdict::Violation(a), Verdict::Violation(b)) => {
                a.cond == map(b.cond) && a.kind == b.kind && variant_answers(&a.answers_before, &b.answers_before)
            }
            (Verdict::RuntimeError(a), Verdict::RuntimeError(b)) => a.kind == b.kind,
            _ => false,
        }
    }
}

fn variant_answers(a: &[Answer], b: &[Answer]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            let mut fwd = HashMap::new();
            let mut back = HashMap::new();
            x.0.len() == y.0.len() && x.0.iter().zip(&y.0).all(|(s, t)| variant(s, t, &mut fwd, &mut back))
        })
}

fn variant(s: &Term, t: &Term, fwd: &mut HashMap<VarId, VarId>, back: &mut HashMap<VarId, VarId>) -> bool {
    match (s, t) {
        (Term::Var(a), Term::Var(b)) => *fwd.entry(*a).or_insert(*b) == *b && *back.entry(*b).or_insert(*a) == *a,
        (Term::Int(a), Term::Int(b)) => a == b,
        (Term::App(a), Term::App(b)) => a.symbol() == b.symbol() && a.args().iter().zip(b.args()).all(|(x, y)| variant(x, y, fwd, back)),
        _ => false,
    }
}

/// Reduction rule that left a state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    /// Constraint added to the store.
    Constraint,
    /// Atom resolved with the clause at this index.
    Clause(u32),
    /// Clause return literal removed.
    Return,
    /// Constraint unsatisfiable or no clause left; backtrack.
    Fail,
    /// Empty goal: an answer.
    Answer,
    /// Transition into the error state.
    Err(CondId),
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Constraint => f.write_str("constraint"),
            Rule::Clause(i) => write!(f, "clause/{i}"),
            Rule::Return => f.write_str("return"),
            Rule::Fail => f.write_str("fail"),
            Rule::Answer => f.write_str("answer"),
            Rule::Err(c) => write!(f, "err({c})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TraceItem {
    Empty,
    Lit(String),
    Ret(String),
    RetChk(String, Vec<CondId>),
}

impl fmt::Display for TraceItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceItem::Empty => f.write_str("[]"),
            TraceItem::Lit(s) => f.write_str(s),
            TraceItem::Ret(s) => write!(f, "ret({s})"),
            TraceItem::RetChk(s, ids) => {
                write!(f, "retchk({s},{{")?;
                for (i, c) in ids.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("})")
            }
        }
    }
}

/// One transition: the rule applied to a state, the state's first goal,
/// its nesting depth, and the query variables under its store.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TraceStep {
    pub rule: Rule,
    pub item: TraceItem,
    pub depth: u32,
    pub store: Vec<Term>,
}

pub type Trace = Vec<TraceStep>;

/// Drops the transition into an error state and turns `retchk` items into
/// plain `ret` items.
pub fn erase_errors(t: &Trace) -> Trace {
    let mut out: Trace = t
        .iter()
        .map(|s| TraceStep {
            item: match &s.item {
                TraceItem::RetChk(h, _) => TraceItem::Ret(h.clone()),
                other => other.clone(),
            },
            ..s.clone()
        })
        .collect();
    if matches!(out.last(), Some(TraceStep { rule: Rule::Err(_), .. })) {
        out.pop();
    }
    out
}

/// Terms crossing a module boundary.
#[derive(Clone, Debug)]
pub struct Capture {
    /// Module the terms leave.
    pub from: Name,
    pub to: Name,
    pub pred: PredId,
    pub is_return: bool,
    pub terms: Vec<Term>,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub verdict: Verdict,
    pub stats: Stats,
    /// False when stopped by `max_answers` or `step_limit`.
    pub exhausted: bool,
    pub trace: Option<Trace>,
    pub captures: Vec<Capture>,
    pub observed: Vec<Observation>,
}

/// A literal of `module` with its arguments under the current store.
#[derive(Clone, Debug)]
pub struct Observation {
    pub module: Name,
    pub terms: Vec<Term>,
}

/// Conditions of `pred` (by index) that are checked for a call from
/// `caller`.
pub fn active_conditions(p: &FlatProgram, pred: PredId, caller: Name, cfg: &CheckConfig) -> Vec<u32> {
    let pr = p.pred(pred);
    let internal = pr.key.module == caller;
    let all = 0..pr.conditions.len() as u32;
    match cfg.mode {
        Mode::Unsafe => Vec::new(),
        Mode::ClientSafe if pr.exported && !internal => all.collect(),
        Mode::ClientSafe => Vec::new(),
        Mode::SafeRt => all.collect(),
        Mode::SafeCtRt => all.filter(|i| !internal || !cfg.discharge.contains(&pr.conditions[*i as usize].id)).collect(),
    }
}

/// Whether `conj` holds for `args` without constraining them.
pub fn check_trivially(p: &FlatProgram, conj: &[PropLit], args: &[Term], store: &mut Substitution, engine: PropEngine) -> bool {
    conj.iter().all(|l| prop_holds(p, l.prop, &args[l.arg as usize], store, engine))
}

fn prop_holds(p: &FlatProgram, prop: PropRef, t: &Term, store: &mut Substitution, engine: PropEngine) -> bool {
    match (engine, prop) {
        (PropEngine::Direct, _) | (_, PropRef::Builtin(_)) => holds(p, prop, t, store),
        (PropEngine::Derivation, PropRef::Pred(id)) => {
            let mark = store.mark();
            let old = store.freeze_below(store.var_count());
            let module = p.pred(id).key.module;
            let goals = vec![Goal::Call(id, vec![t.clone()].into_boxed_slice())];
            let ok = {
                let mut m = Machine::new(
                    p,
                    store,
                    Semantics::Plain,
                    SolveOptions { max_answers: Some(1), prop_engine: PropEngine::Derivation, ..SolveOptions::default() },
                );
                m.push_query(&goals, module);
                matches!(m.run(0), Verdict::Answers(a) if !a.is_empty())
            };
            store.freeze_below(old);
            store.undo_to(mark);
            ok
        }
    }
}

struct Node {
    item: Item,
    depth: u32,
    next: Goals,
}

type Goals = Option<Rc<Node>>;

enum Item {
    Lit { goal: Goal, module: Name },
    Ret { pred: PredId, args: Rc<[Term]>, caller: Name, checks: Option<Rc<[u32]>> },
}

struct CallFrame {
    pred: PredId,
    args: Rc<[Term]>,
    caller: Name,
    checks: Option<Rc<[u32]>>,
    depth: u32,
    rest: Goals,
}

struct ChoicePoint {
    frame: Rc<CallFrame>,
    next_clause: usize,
    mark: crate::subst::Mark,
}

enum Halt {
    Violation(CondId, CondKindTag, String),
    Runtime(RuntimeError),
}

struct Machine<'a> {
    p: &'a FlatProgram,
    store: &'a mut Substitution,
    sem: Semantics,
    opts: SolveOptions,
    goals: Goals,
    choices: Vec<ChoicePoint>,
    stats: Stats,
    trace: Vec<TraceStep>,
    captures: Vec<Capture>,
    observed: Vec<Observation>,
    answers: Vec<Answer>,
    failed: bool,
    exhausted: bool,
}

fn push(item: Item, depth: u32, next: Goals) -> Goals {
    Some(Rc::new(Node { item, depth, next }))
}

impl<'a> Machine<'a> {
    fn new(p: &'a FlatProgram, store: &'a mut Substitution, sem: Semantics, opts: SolveOptions) -> Self {
        Machine {
            p,
            store,
            sem,
            opts,
            goals: None,
            choices: Vec::new(),
            stats: Stats::default(),
            trace: Vec::new(),
            captures: Vec::new(),
            observed: Vec::new(),
            answers: Vec::new(),
            failed: false,
            exhausted: true,
        }
    }

    fn push_query(&mut self, goals: &[Goal], module: Name) {
        for g in goals.iter().rev() {
            self.goals = push(Item::Lit { goal: g.clone(), module }, 0, self.goals.take());
        }
    }

    fn show_call(&self, pred: PredId, args: &[Term]) -> String {
        let mut s = String::new();
        let _ = write_call(&mut s, &self.p.pred(pred).key.name, args);
        s
    }

    fn show_applied(&self, pred: PredId, args: &[Term]) -> String {
        let args: Vec<Term> = args.iter().map(|a| self.store.apply(a)).collect();
        self.show_call(pred, &args)
    }

    fn record(&mut self, rule: Rule, item: TraceItem, depth: u32, nvars: u32) {
        if self.opts.trace {
            let store = (0..nvars).map(|v| self.store.apply(&Term::var(v))).collect();
            self.trace.push(TraceStep { rule, item, depth, store });
        }
    }

    fn trace_item(&self, item: &Item) -> TraceItem {
        if !self.opts.trace {
            return TraceItem::Empty;
        }
        match item {
            Item::Lit { goal, .. } => TraceItem::Lit(goal.display(self.p).to_string()),
            Item::Ret { pred, args, checks: None, .. } => TraceItem::Ret(self.show_call(*pred, args)),
            Item::Ret { pred, args, checks: Some(c), .. } => {
                TraceItem::RetChk(self.show_call(*pred, args), c.iter().map(|i| self.p.pred(*pred).conditions[*i as usize].id).collect())
            }
        }
    }

    fn check_conj(&mut self, conj: &[PropLit], args: &[Term], boundary: bool) -> bool {
        for l in conj {
            if boundary {
                self.stats.boundary_props += 1;
            } else {
                self.stats.internal_props += 1;
            }
            if !prop_holds(self.p, l.prop, &args[l.arg as usize], self.store, self.opts.prop_engine) {
                return false;
            }
        }
        true
    }

    /// Calls condition and success guards for a new activation.
    fn enter_checks(&mut self, pred: PredId, args: &[Term], caller: Name) -> Result<Option<Rc<[u32]>>, Halt> {
        let cfg = match &self.sem {
            Semantics::Plain => return Ok(None),
            Semantics::Rtc(cfg) => cfg,
        };
        let active = active_conditions(self.p, pred, caller, cfg);
        let pr = self.p.pred(pred);
        let boundary = pr.key.module != caller;
        let mut guards = Vec::new();
        for i in active {
            let cond = &pr.conditions[i as usize];
            self.stats.conditions += 1;
            match &cond.kind {
                CondKind::Calls { pre } => {
                    let ok = pre.iter().any(|conj| self.check_conj(conj, args, boundary));
                    if !ok {
                        return Err(Halt::Violation(cond.id, CondKindTag::Calls, self.show_applied(pred, args)));
                    }
                }
                CondKind::Success { pre, .. } => {
                    if self.check_conj(pre, args, boundary) {
                        guards.push(i);
                    }
                }
            }
        }
        Ok(Some(guards.into()))
    }

    fn capture(&mut self, from: Name, to: Name, pred: PredId, is_return: bool, args: &[Term]) {
        if self.opts.capture && from != to {
            let terms = args.iter().map(|a| self.store.apply(a)).collect();
            self.captures.push(Capture { from, to, pred, is_return, terms });
        }
    }

    /// Resolves `frame` with clause `idx`, leaving a choice point for the
    /// remaining clauses.
    fn try_clause(&mut self, frame: Rc<CallFrame>, idx: usize, nvars: u32) {
        let pred = self.p.pred(frame.pred);
        if idx >= pred.clauses.len() {
            let item = if self.opts.trace { TraceItem::Lit(self.show_call(frame.pred, &frame.args)) } else { TraceItem::Empty };
            self.record(Rule::Fail, item, frame.depth, nvars);
            self.failed = true;
            return;
        }
        if self.opts.trace {
            let item = TraceItem::Lit(self.show_call(frame.pred, &frame.args));
            self.record(Rule::Clause(idx as u32), item, frame.depth, nvars);
        }
        if idx + 1 < pred.clauses.len() {
            self.choices.push(ChoicePoint { frame: frame.clone(), next_clause: idx + 1, mark: self.store.mark() });
        }
        let clause = &pred.clauses[idx];
        let base = self.store.reserve(clause.nvars);
        for (i, a) in frame.args.iter().enumerate() {
            let ok = self.store.unify(&Term::var(base + i as u32), a);
            debug_assert!(ok);
        }
        let depth = frame.depth + 1;
        let module = pred.key.module;
        let mut goals = push(
            Item::Ret { pred: frame.pred, args: frame.args.clone(), caller: frame.caller, checks: frame.checks.clone() },
            depth,
            frame.rest.clone(),
        );
        for g in clause.body.iter().rev() {
            goals = push(Item::Lit { goal: g.offset_vars(base), module }, depth, goals);
        }
        self.goals = goals;
    }

    fn backtrack(&mut self, nvars: u32) -> bool {
        match self.choices.pop() {
            None => false,
            Some(cp) => {
                self.store.undo_to(cp.mark);
                self.try_clause(cp.frame, cp.next_clause, nvars);
                true
            }
        }
    }

    fn compare(&self, op: crate::program::CmpOp, a: &Term, b: &Term) -> Result<bool, Halt> {
        match (self.store.walk(a), self.store.walk(b)) {
            (Term::Int(x), Term::Int(y)) => Ok(op.eval(*x, *y)),
            (x, y) => {
                let kind = if matches!(x, Term::Var(_)) || matches!(y, Term::Var(_)) || !x.is_ground() || !y.is_ground() {
                    RuntimeErrorKind::Instantiation
                } else {
                    RuntimeErrorKind::Type
                };
                Err(Halt::Runtime(RuntimeError {
                    kind,
                    message: format!(
                        "arguments of {} must be integers: {} {} {}",
                        op.name(),
                        self.store.apply(x),
                        op.name(),
                        self.store.apply(y)
                    ),
                }))
            }
        }
    }

    /// One reduction of the current state.
    fn step(&mut self, nvars: u32) -> Result<(), Halt> {
        let Some(node) = self.goals.clone() else { return Ok(()) };
        self.stats.steps += 1;
        let depth = node.depth;
        let item = self.trace_item(&node.item);
        if let (true, Item::Lit { goal, module }) = (self.opts.observe, &node.item) {
            let terms = goal.terms().into_iter().map(|t| self.store.apply(t)).collect();
            self.observed.push(Observation { module: *module, terms });
        }
        match &node.item {
            Item::Lit { goal, module } => match goal {
                Goal::Unify(a, b) => {
                    let ok = self.store.unify(a, b);
                    self.constraint_done(ok, item, depth, nvars, &node);
                }
                Goal::Compare(op, a, b) => {
                    let ok = self.compare(*op, a, b)?;
                    self.constraint_done(ok, item, depth, nvars, &node);
                }
                Goal::Test(b, t) => {
                    let ok = match b {
                        Builtin::Int => matches!(self.store.walk(t), Term::Int(_)),
                        Builtin::Term => true,
                        Builtin::Usr => usr_check(t, self.store),
                    };
                    self.constraint_done(ok, item, depth, nvars, &node);
                }
                Goal::Call(pred, args) => {
                    self.stats.calls += 1;
                    if !self.p.visible(*pred, *module) {
                        return Err(Halt::Runtime(RuntimeError {
                            kind: RuntimeErrorKind::Visibility,
                            message: format!("{} is not visible from module {module}", self.p.pred(*pred).key),
                        }));
                    }
                    let checks = match self.enter_checks(*pred, args, *module) {
                        Ok(c) => c,
                        Err(Halt::Violation(id, kind, goal)) => {
                            self.record(Rule::Err(id), item, depth, nvars);
                            return Err(Halt::Violation(id, kind, goal));
                        }
                        Err(e) => return Err(e),
                    };
                    let definer = self.p.pred(*pred).key.module;
                    self.capture(*module, definer, *pred, false, args);
                    let frame = Rc::new(CallFrame {
                        pred: *pred,
                        args: args.iter().cloned().collect(),
                        caller: *module,
                        checks,
                        depth,
                        rest: node.next.clone(),
                    });
                    self.try_clause(frame, 0, nvars);
                }
            },
            Item::Ret { pred, args, caller, checks } => {
                if let Some(checks) = checks {
                    let pr = self.p.pred(*pred);
                    let boundary = pr.key.module != *caller;
                    for i in checks.iter() {
                        let cond = &pr.conditions[*i as usize];
                        self.stats.conditions += 1;
                        let CondKind::Success { post, .. } = &cond.kind else { continue };
                        if !self.check_conj(post, args, boundary) {
                            self.record(Rule::Err(cond.id), item, depth, nvars);
                            return Err(Halt::Violation(cond.id, CondKindTag::Success, self.show_applied(*pred, args)));
                        }
                    }
                }
                let definer = self.p.pred(*pred).key.module;
                self.capture(definer, *caller, *pred, true, args);
                self.record(Rule::Return, item, depth, nvars);
                self.goals = node.next.clone();
            }
        }
        Ok(())
    }

    fn constraint_done(&mut self, ok: bool, item: TraceItem, depth: u32, nvars: u32, node: &Rc<Node>) {
        if ok {
            self.record(Rule::Constraint, item, depth, nvars);
            self.goals = node.next.clone();
        } else {
            self.record(Rule::Fail, item, depth, nvars);
            self.failed = true;
        }
    }

    fn run_inner(&mut self, nvars: u32) -> Result<(), Halt> {
        loop {
            if self.opts.step_limit.is_some_and(|l| self.stats.steps >= l) {
                self.exhausted = false;
                return Ok(());
            }
            if self.failed {
                self.failed = false;
                if !self.backtrack(nvars) {
                    return Ok(());
                }
                continue;
            }
            if self.goals.is_none() {
                self.record(Rule::Answer, TraceItem::Empty, 0, nvars);
                let answer = Answer((0..nvars).map(|v| self.store.apply(&Term::var(v))).collect());
                self.answers.push(answer);
                if self.opts.max_answers.is_some_and(|m| self.answers.len() >= m) {
                    self.exhausted = self.choices.is_empty();
                    return Ok(());
                }
                self.failed = true;
                continue;
            }
            self.step(nvars)?;
        }
    }

    fn run(&mut self, nvars: u32) -> Verdict {
        match self.run_inner(nvars) {
            Ok(()) => Verdict::Answers(std::mem::take(&mut self.answers)),
            Err(Halt::Violation(cond, kind, goal)) => {
                Verdict::Violation(Violation { cond, kind, goal, answers_before: std::mem::take(&mut self.answers) })
            }
            Err(Halt::Runtime(e)) => Verdict::RuntimeError(e),
        }
    }
}

/// Runs `query` against `p` under the given semantics.
pub fn solve(query: &Query, p: &FlatProgram, sem: Semantics, opts: SolveOptions) -> Outcome {
    let mut store = Substitution::new();
    store.ensure_vars(query.nvars);
    let trace_on = opts.trace;
    let mut m = Machine::new(p, &mut store, sem, opts);
    m.push_query(&query.goals, query.module);
    let verdict = m.run(query.nvars);
    Outcome {
        verdict,
        stats: m.stats,
        exhausted: m.exhausted,
        trace: trace_on.then(|| std::mem::take(&mut m.trace)),
        captures: std::mem::take(&mut m.captures),
        observed: std::mem::take(&mut m.observed),
    }
}

/// Formats an answer as `X = t` lines in query-variable order.
pub fn format_answer(query: &Query, a: &Answer) -> String {
    if query.var_names.is_empty() {
        return "true".to_string();
    }
    query.var_names.iter().map(|(name, v)| format!("{name} = {}", a.0[v.0 as usize])).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::USER;
    use crate::syntax::{parse_module, parse_query};

    pub(crate) const BT: &str = ":- module(bt, [insert/3]).
:- hide(empty/0).
:- hide(tree/3).
:- regtype val_key/1.
val_key(X) :- int(X).
:- regtype val_tree/1.
val_tree(empty).
val_tree(tree(LC,X,RC)) :- val_tree(LC), val_key(X), val_tree(RC).
:- pred insert(K,T0,T1) : val_key(K), val_tree(T0), term(T1)
                       => val_key(K), val_tree(T0), val_tree(T1).
insert(X,empty,tree(empty,X,empty)).
insert(X,tree(LC,X,RC),tree(LC,X,RC)).
insert(X,tree(LC,Y,RC),tree(LC_p,Y,RC)) :- X < Y, insert(X,LC,LC_p).
insert(X,tree(LC,Y,RC),tree(LC,Y,RC_p)) :- X > Y, insert(X,RC,RC_p).
";

    fn bt() -> FlatProgram {
        FlatProgram::flatten(&[parse_module(BT).unwrap()]).unwrap()
    }

    fn run(p: &FlatProgram, q: &str, module: &str, sem: Semantics) -> (Query, Outcome) {
        let q = p.compile_query(&parse_query(q).unwrap(), module).unwrap();
        let o = solve(&q, p, sem, SolveOptions { trace: true, ..SolveOptions::default() });
        (q, o)
    }

    fn rtc(mode: Mode) -> Semantics {
        Semantics::Rtc(CheckConfig::new(mode))
    }

    #[test]
    fn insert_into_empty() {
        let p = bt();
        let (q, o) = run(&p, "insert(5, empty, T)", "bt", rtc(Mode::SafeRt));
        let answers = o.verdict.answers().unwrap();
        assert_eq!(answers.len(), 1);
        assert_eq!(format_answer(&q, &answers[0]), "T = tree(empty,5,empty)");
        assert_eq!(format!("{:?}", answers[0].0[0]), "bt:tree(bt:empty,5,bt:empty)");
    }

    #[test]
    fn bad_key_violates_calls() {
        let p = bt();
        let (_, o) = run(&p, "insert(foo, empty, T)", "bt", rtc(Mode::SafeRt));
        let v = o.verdict.violation().unwrap();
        assert_eq!(v.cond.to_string(), "bt:insert/3#0");
        assert_eq!(v.kind, CondKindTag::Calls);
    }

    #[test]
    fn unsafe_evaluates_nothing() {
        let p = bt();
        let (_, o) = run(&p, "insert(foo, empty, T)", "bt", rtc(Mode::Unsafe));
        assert_eq!(o.verdict.answers().unwrap().len(), 1);
        assert_eq!(o.stats.conditions, 0);
    }

    #[test]
    fn user_tree_is_a_different_symbol() {
        let p = bt();
        let (_, o) = run(&p, "insert(1, tree(A, 2, B), T)", USER, rtc(Mode::Unsafe));
        assert_eq!(o.verdict.answers().unwrap().len(), 0);
    }

    #[test]
    fn hidden_predicate_call_from_user_is_rejected() {
        let p = FlatProgram::flatten(&[parse_module(":- module(m, [p/0]).\np :- q.\nq.").unwrap()]).unwrap();
        let (_, o) = run(&p, "q", USER, Semantics::Plain);
        assert!(matches!(o.verdict, Verdict::RuntimeError(RuntimeError { kind: RuntimeErrorKind::Visibility, .. })));
        let (_, o) = run(&p, "p", USER, Semantics::Plain);
        assert_eq!(o.verdict.answers().unwrap().len(), 1);
    }

    #[test]
    fn nonground_comparison_is_a_runtime_error() {
        let p = FlatProgram::flatten(&[parse_module(":- module(m, [p/1]).\np(X) :- X < 3.").unwrap()]).unwrap();
        let (_, o) = run(&p, "p(Y)", USER, Semantics::Plain);
        assert!(matches!(o.verdict, Verdict::RuntimeError(RuntimeError { kind: RuntimeErrorKind::Instantiation, .. })));
    }

    #[test]
    fn check_trivially_examples() {
        let p = bt();
        let tree = PropRef::Pred(p.lookup("bt", "val_tree", 1).unwrap());
        let q = p.compile_query(&parse_query("T = tree(empty, 1, empty)").unwrap(), "bt").unwrap();
        let Goal::Unify(_, t) = &q.goals[0] else { panic!() };
        for engine in [PropEngine::Direct, PropEngine::Derivation] {
            let mut s = Substitution::new();
            s.ensure_vars(4);
            let lit = [PropLit { prop: tree, arg: 0 }];
            assert!(check_trivially(&p, &lit, std::slice::from_ref(t), &mut s, engine));
            assert!(!check_trivially(&p, &lit, &[Term::var(0)], &mut s, engine));
            let top = [PropLit { prop: PropRef::TERM, arg: 0 }];
            assert!(check_trivially(&p, &top, &[Term::var(0)], &mut s, engine));
            assert_eq!(s.var_count(), 4);
            assert!(s.bindings().is_empty());
        }
    }

    #[test]
    fn erase_turns_retchk_into_ret() {
        let p = bt();
        let (_, plain) = run(&p, "insert(3, empty, T), insert(1, T, U)", "bt", Semantics::Plain);
        let (_, checked) = run(&p, "insert(3, empty, T), insert(1, T, U)", "bt", rtc(Mode::SafeRt));
        assert!(checked.trace.as_ref().unwrap().iter().any(|s| matches!(s.item, TraceItem::RetChk(..))));
        assert_eq!(erase_errors(checked.trace.as_ref().unwrap()), plain.trace.unwrap());
    }

    #[test]
    fn err_trace_erases_to_a_plain_prefix() {
        let p = bt();
        let (_, plain) = run(&p, "insert(3, empty, T), insert(a, T, U)", "bt", Semantics::Plain);
        let (_, checked) = run(&p, "insert(3, empty, T), insert(a, T, U)", "bt", rtc(Mode::SafeRt));
        let ct = checked.trace.unwrap();
        assert!(matches!(ct.last().unwrap().rule, Rule::Err(_)));
        let erased = erase_errors(&ct);
        assert_eq!(erased.len(), ct.len() - 1);
        let pt = plain.trace.unwrap();
        assert!(pt.len() > erased.len());
        assert_eq!(&pt[..erased.len()], &erased[..]);
    }

    #[test]
    fn client_safe_skips_internal_calls() {
        let p = bt();
        let id = p.lookup("bt", "insert", 3).unwrap();
        let cfg = CheckConfig::new(Mode::ClientSafe);
        assert!(active_conditions(&p, id, Name::new("bt"), &cfg).is_empty());
        assert_eq!(active_conditions(&p, id, Name::new(USER), &cfg), vec![0, 1]);
        let cfg = CheckConfig::new(Mode::SafeRt);
        assert_eq!(active_conditions(&p, id, Name::new("bt"), &cfg), vec![0, 1]);
    }
}
