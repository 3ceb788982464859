#![allow(dead_code)]

use std::collections::BTreeMap;

use hidecheck::bench::Library;
use hidecheck::engine::{erase_errors, solve, CheckConfig, Mode, Outcome, Rule, Semantics, SolveOptions, Verdict};
use hidecheck::program::Query;
use hidecheck::regtype::{holds, Containment};
use hidecheck::shallow::{lift_discharge, shallow_program};
use hidecheck::subst::Substitution;
use hidecheck::syntax::{parse_module, parse_query, ModuleSource};
use hidecheck::term::{Qualifier, Term};
use hidecheck::{Builtin, PropRef, Symbol};
use hidecheck::{CondId, FlatProgram};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One corpus library on its own; the three share predicate names.
pub fn library(lib: Library) -> FlatProgram {
    FlatProgram::flatten(&[lib.source()]).expect("corpus loads")
}

pub fn config(mode: Mode, discharge: &std::collections::BTreeSet<CondId>) -> CheckConfig {
    let mut c = CheckConfig::new(mode);
    if mode == Mode::SafeCtRt {
        c.discharge = discharge.clone();
    }
    c
}

pub fn opts() -> SolveOptions {
    SolveOptions { max_answers: Some(4), step_limit: Some(1500), ..SolveOptions::default() }
}

// ---------------------------------------------------------------------------
// Corpus drivers

fn forged(lib: Library) -> &'static str {
    match lib {
        Library::BinaryTree => "tree(empty,3,empty)",
        Library::AvlTree => "t(nil,3,e,nil)",
        Library::Heap => "heap(node(nil,3,nil))",
    }
}

fn hidden_call(lib: Library, t: &str) -> String {
    match lib {
        Library::BinaryTree => format!("peek_root({t}, K)"),
        Library::AvlTree => format!("ins(1, {t}, Tx, G)"),
        Library::Heap => "merge(nil, nil, Hx)".to_string(),
    }
}

/// A query text driving `lib` from the user context. With `invalid`, some
/// steps use bad keys, forged structures, unbound keys or internal
/// predicates.
pub fn driver(r: &mut TestRng, lib: Library, invalid: bool) -> String {
    let len = r.gen_range(1..=7);
    let mut goals = vec![format!("{}(S0)", lib.new_pred())];
    let mut cur = "S0".to_string();
    for i in 1..=len {
        let next = format!("S{i}");
        let bad = invalid && r.gen_bool(0.15);
        let goal = if bad {
            match r.gen_range(0..5) {
                0 => format!("insert(foo, {cur}, {next})"),
                1 => format!("insert(f(1), {cur}, {next})"),
                2 => format!("insert(2, {}, {next})", forged(lib)),
                3 => format!("insert(_, {cur}, {next})"),
                _ => {
                    let g = hidden_call(lib, &cur);
                    goals.push(g);
                    continue;
                }
            }
        } else if r.gen_bool(0.25) {
            let g = format!("{}({cur}, K{i})", lib.const_pred());
            goals.push(g);
            continue;
        } else {
            format!("insert({}, {cur}, {next})", r.gen_range(-3..25))
        };
        goals.push(goal);
        cur = next;
    }
    if r.gen_bool(0.3) {
        goals.push(format!("{}({cur}, Top)", lib.const_pred()));
    }
    goals.join(", ")
}

pub fn compile(p: &FlatProgram, text: &str, module: &str) -> Option<Query> {
    let goals = parse_query(text).expect("generated query parses");
    p.compile_query(&goals, module).ok()
}

// ---------------------------------------------------------------------------
// Tiny random modular programs

const PROPS_M: [&str; 5] = ["rt_a", "rt_b", "int", "term", "usr"];
const PROPS_C: [&str; 3] = ["int", "term", "usr"];

fn small_term(r: &mut TestRng, vars: &[&str], hidden: bool, depth: u32) -> String {
    let choice = r.gen_range(0..if depth == 0 { 4 } else { 7 });
    match choice {
        0 | 1 => vars.choose(r).unwrap().to_string(),
        2 => r.gen_range(0..3).to_string(),
        3 => {
            if hidden && r.gen_bool(0.5) {
                "k".into()
            } else {
                "a".into()
            }
        }
        4 => format!("f({})", small_term(r, vars, hidden, depth - 1)),
        5 if hidden => format!("h({})", small_term(r, vars, hidden, depth - 1)),
        _ => format!("f({})", small_term(r, vars, hidden, depth - 1)),
    }
}

struct PredSpec {
    name: String,
    arity: usize,
}

fn head(p: &PredSpec, r: &mut TestRng, hidden: bool) -> String {
    let args: Vec<String> = (0..p.arity)
        .map(|_| if r.gen_bool(0.6) { ["X", "Y"].choose(r).unwrap().to_string() } else { small_term(r, &["X", "Y"], hidden, 1) })
        .collect();
    format!("{}({})", p.name, args.join(","))
}

fn body_goal(r: &mut TestRng, callable: &[&PredSpec], hidden: bool) -> String {
    let vars = ["X", "Y", "Z"];
    match r.gen_range(0..6) {
        0 => format!("{} = {}", vars.choose(r).unwrap(), small_term(r, &vars, hidden, 2)),
        1 => format!("{} < {}", vars.choose(r).unwrap(), r.gen_range(0..3)),
        _ => {
            let p = callable.choose(r).unwrap();
            let args: Vec<String> = (0..p.arity).map(|_| small_term(r, &vars, hidden, 1)).collect();
            format!("{}({})", p.name, args.join(","))
        }
    }
}

fn assertion(r: &mut TestRng, p: &PredSpec, props: &[&str]) -> String {
    let vars: Vec<String> = (0..p.arity).map(|i| format!("A{i}")).collect();
    let lits = |r: &mut TestRng| -> Vec<String> {
        let mut out = Vec::new();
        for v in &vars {
            if r.gen_bool(0.6) {
                out.push(format!("{}({v})", props.choose(r).unwrap()));
            }
        }
        out
    };
    let pre = lits(r);
    let post = lits(r);
    let mut s = format!(":- pred {}({})", p.name, vars.join(","));
    if !pre.is_empty() {
        s.push_str(&format!(" : {}", pre.join(", ")));
    }
    if !post.is_empty() {
        s.push_str(&format!(" => {}", post.join(", ")));
    }
    s.push('.');
    s
}

/// A library `m` with hidden `h/1` and `k/0`, plus a client `c` using it.
pub fn tiny_program(r: &mut TestRng) -> Vec<String> {
    let np = r.gen_range(2..=4);
    let ps: Vec<PredSpec> = (0..np).map(|i| PredSpec { name: format!("p{i}"), arity: r.gen_range(1..=2) }).collect();
    let nexp = r.gen_range(1..=np);
    let exported: Vec<&PredSpec> = ps.iter().take(nexp).collect();

    let mut m = format!(
        ":- module(m, [{}]).\n:- hide(h/1).\n:- hide(k/0).\n",
        exported.iter().map(|p| format!("{}/{}", p.name, p.arity)).collect::<Vec<_>>().join(", ")
    );
    m.push_str(":- regtype rt_a/1.\nrt_a(k).\nrt_a(h(X)) :- rt_b(X).\n:- regtype rt_b/1.\n");
    m.push_str(match r.gen_range(0..3) {
        0 => "rt_b(X) :- int(X).\n",
        1 => "rt_b(a).\nrt_b(f(X)) :- rt_b(X).\n",
        _ => "rt_b(a).\nrt_b(h(X)) :- rt_a(X).\n",
    });
    let all: Vec<&PredSpec> = ps.iter().collect();
    for p in &ps {
        for _ in 0..r.gen_range(1..=2) {
            if r.gen_bool(0.8) {
                m.push_str(&assertion(r, p, &PROPS_M));
                m.push('\n');
            }
        }
        for _ in 0..r.gen_range(1..=3) {
            let h = head(p, r, true);
            let n = r.gen_range(0..=2);
            let body: Vec<String> = (0..n).map(|_| body_goal(r, &all, true)).collect();
            if body.is_empty() {
                m.push_str(&format!("{h}.\n"));
            } else {
                m.push_str(&format!("{h} :- {}.\n", body.join(", ")));
            }
        }
    }

    let qs: Vec<PredSpec> = (0..r.gen_range(1..=2)).map(|i| PredSpec { name: format!("q{i}"), arity: 1 }).collect();
    let mut c =
        format!(":- module(c, [{}]).\n:- use_module(m).\n", qs.iter().map(|q| format!("{}/1", q.name)).collect::<Vec<_>>().join(", "));
    let mut callable: Vec<&PredSpec> = exported.clone();
    callable.extend(qs.iter());
    for q in &qs {
        if r.gen_bool(0.6) {
            c.push_str(&assertion(r, q, &PROPS_C));
            c.push('\n');
        }
        for _ in 0..r.gen_range(1..=2) {
            let h = head(q, r, false);
            let n = r.gen_range(1..=2);
            let body: Vec<String> = (0..n).map(|_| body_goal(r, &callable, false)).collect();
            c.push_str(&format!("{h} :- {}.\n", body.join(", ")));
        }
    }
    vec![m, c]
}

pub fn load_texts(texts: &[String]) -> FlatProgram {
    let sources: Vec<ModuleSource> = texts.iter().map(|t| parse_module(t).unwrap_or_else(|e| panic!("{e}\n{t}"))).collect();
    FlatProgram::flatten(&sources).unwrap_or_else(|e| panic!("{e}\n{}", texts.join("\n")))
}

/// Queries for a tiny program with their module context.
pub fn tiny_queries(r: &mut TestRng, p: &FlatProgram, n: usize) -> Vec<(String, &'static str)> {
    let mut out = Vec::new();
    let m = p.module("m").unwrap();
    let c = p.module("c").unwrap();
    let preds: Vec<_> = m.defs.iter().chain(c.defs.iter()).map(|id| p.pred(*id)).filter(|pr| !pr.is_regtype()).collect();
    while out.len() < n {
        let pr = preds.choose(r).unwrap();
        let ctx: &'static str = match r.gen_range(0..3) {
            0 => "user",
            1 => "m",
            _ => "c",
        };
        let hidden = ctx == "m";
        let args: Vec<String> = (0..pr.key.arity).map(|_| small_term(r, &["X", "Y"], hidden, 2)).collect();
        out.push((format!("{}({})", pr.key.name, args.join(",")), ctx));
    }
    out
}

// ---------------------------------------------------------------------------
// Checked runs against plain runs

pub fn run(p: &FlatProgram, q: &Query, sem: Semantics, trace: bool) -> Outcome {
    solve(q, p, sem, SolveOptions { trace, ..opts() })
}

/// Both directions of the RTC/plain correspondence for one query.
pub fn check_correspondence(p: &FlatProgram, q: &Query, cfg: CheckConfig) -> Result<(), String> {
    let plain = run(p, q, Semantics::Plain, true);
    let rtc = run(p, q, Semantics::Rtc(cfg), true);
    let pt = plain.trace.unwrap();
    let rt = rtc.trace.unwrap();
    let erased = erase_errors(&rt);
    // Soundness: the erased run replays as a plain run.
    if !pt.starts_with(&erased) {
        let at = pt.iter().zip(&erased).position(|(a, b)| a != b).unwrap_or(pt.len().min(erased.len()));
        return Err(format!("erased RTC trace diverges from plain at step {at}"));
    }
    // Completeness: the plain run is reproduced unless an error cut it.
    let ended_in_err = matches!(rt.last(), Some(s) if matches!(s.rule, Rule::Err(_)));
    match &rtc.verdict {
        Verdict::Violation(_) => {
            if !ended_in_err {
                return Err("violation without an err transition".into());
            }
            if erased.len() >= pt.len() {
                return Err("err transition does not cut the plain trace".into());
            }
        }
        _ => {
            if ended_in_err {
                return Err("err transition without a violation".into());
            }
            if erased != pt {
                return Err(format!("RTC trace has {} steps, plain {}", erased.len(), pt.len()));
            }
            if format!("{:?}", rtc.verdict) != format!("{:?}", plain.verdict) {
                return Err(format!("verdicts differ: {:?} vs {:?}", rtc.verdict, plain.verdict));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Escaping terms

/// One-way matching: is `t` an instance of `pattern`?
pub fn instance_of(t: &Term, pattern: &Term, bind: &mut BTreeMap<u32, Term>) -> bool {
    match (t, pattern) {
        (_, Term::Var(v)) => match bind.get(&v.0) {
            Some(b) => b == t,
            None => {
                bind.insert(v.0, t.clone());
                true
            }
        },
        (Term::Int(a), Term::Int(b)) => a == b,
        (Term::App(a), Term::App(b)) => a.symbol() == b.symbol() && a.args().iter().zip(b.args()).all(|(x, y)| instance_of(x, y, bind)),
        _ => false,
    }
}

pub fn subterms(t: &Term, out: &mut Vec<Term>) {
    out.push(t.clone());
    if let Term::App(a) = t {
        for x in a.args() {
            subterms(x, out);
        }
    }
}

/// Every subterm headed by a functor hidden in `m` that shows up in a
/// literal of another module is an instance of a subterm of some term that
/// crossed a boundary out of `m`.
pub fn check_boundaries(out: &Outcome, m: &str) -> Result<(), String> {
    let mut crossed = Vec::new();
    for c in out.captures.iter().filter(|c| c.from.as_str().as_ref() == m) {
        for t in &c.terms {
            subterms(t, &mut crossed);
        }
    }
    let hidden_in_m = |t: &Term| t.symbol().is_some_and(|s| matches!(s.qualifier, Qualifier::Module(q) if q.as_str().as_ref() == m));
    for o in out.observed.iter().filter(|o| o.module.as_str().as_ref() != m) {
        for t in &o.terms {
            let mut subs = Vec::new();
            subterms(t, &mut subs);
            for s in subs.iter().filter(|s| hidden_in_m(s)) {
                if !crossed.iter().any(|c| instance_of(s, c, &mut BTreeMap::new())) {
                    return Err(format!("{s:?} seen in {} never crossed out of {m}", o.module));
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Shallow equivalence

pub struct ShallowPair {
    pub base: FlatProgram,
    pub shallow: FlatProgram,
    pub id_map: BTreeMap<CondId, CondId>,
}

impl ShallowPair {
    pub fn new(base: FlatProgram) -> ShallowPair {
        let (shallow, id_map) = shallow_program(&base).expect("shallow interfaces load");
        ShallowPair { base, shallow, id_map }
    }

    /// Compares verdicts of `text` run in `ctx` under `mode`.
    pub fn compare(&self, text: &str, ctx: &str, mode: Mode, discharge: &std::collections::BTreeSet<CondId>) -> Result<(), String> {
        let (Some(q0), Some(q1)) = (compile(&self.base, text, ctx), compile(&self.shallow, text, ctx)) else {
            return Err(format!("query {text} does not compile"));
        };
        let mut c0 = CheckConfig::new(mode);
        let mut c1 = CheckConfig::new(mode);
        c1.shallow = true;
        if mode == Mode::SafeCtRt {
            c0.discharge = discharge.clone();
            c1.discharge = lift_discharge(discharge, &self.id_map);
        }
        let a = solve(&q0, &self.base, Semantics::Rtc(c0), opts()).verdict;
        let b = solve(&q1, &self.shallow, Semantics::Rtc(c1), opts()).verdict;
        if a.equivalent(&b, |id| self.id_map.get(&id).copied().unwrap_or(id)) {
            Ok(())
        } else {
            Err(format!("{text} in {ctx} under {mode}: {a:?} vs {b:?}"))
        }
    }
}

// ---------------------------------------------------------------------------
// Regtype containment

pub const N: usize = 4;

fn constraint(r: &mut TestRng, from: usize, var: &str) -> Vec<String> {
    let mut pool: Vec<String> = (from..N).map(|j| format!("r{j}")).collect();
    pool.extend(["int", "usr", "term"].map(String::from));
    let n = r.gen_range(0..=2);
    (0..n).map(|_| format!("{}({var})", pool.choose(r).unwrap())).collect()
}

fn clause(head: String, body: Vec<String>) -> String {
    if body.is_empty() {
        format!("{head}.\n")
    } else {
        format!("{head} :- {}.\n", body.join(", "))
    }
}

/// Four regtypes over `a`, `0`, `f/1`, `g/2` and a hidden `h/1`. Aliases
/// only point forward so membership terminates.
pub fn regtypes(r: &mut TestRng) -> String {
    let mut s = String::from(":- module(r, []).\n:- hide(h/1).\n");
    for i in 0..N {
        let name = format!("r{i}");
        s.push_str(&format!(":- regtype {name}/1.\n"));
        if r.gen_bool(0.5) {
            s.push_str(&format!("{name}(a).\n"));
        }
        if r.gen_bool(0.3) {
            s.push_str(&format!("{name}(0).\n"));
        }
        if r.gen_bool(0.5) {
            s.push_str(&clause(format!("{name}(f(X))"), constraint(r, 0, "X")));
        }
        if r.gen_bool(0.4) {
            s.push_str(&clause(format!("{name}(h(X))"), constraint(r, 0, "X")));
        }
        if r.gen_bool(0.4) {
            let mut body = constraint(r, 0, "X");
            body.extend(constraint(r, 0, "Y"));
            s.push_str(&clause(format!("{name}(g(X,Y))"), body));
        }
        if r.gen_bool(0.2) {
            let body = constraint(r, i + 1, "X");
            if !body.is_empty() {
                s.push_str(&clause(format!("{name}(X)"), body));
            }
        }
    }
    s
}

/// All terms of depth at most `d`; an unbound variable counts as a leaf.
pub fn terms(d: u32) -> Vec<Term> {
    let mut out = vec![Term::user_atom("a"), Term::Int(0), Term::var(0)];
    if d <= 1 {
        return out;
    }
    let sub = terms(d - 1);
    let f = Symbol::user("f", 1);
    let h = Symbol::hidden("r", "h", 1);
    let g = Symbol::user("g", 2);
    for t in &sub {
        out.push(Term::app(f, vec![t.clone()]));
        out.push(Term::app(h, vec![t.clone()]));
    }
    for x in &sub {
        for y in &sub {
            out.push(Term::app(g, vec![x.clone(), y.clone()]));
        }
    }
    out
}

/// Draws random property pairs until `target` non-trivial containments
/// have been claimed, checking each claim on every term of depth <= 4.
/// Returns how many pairs were drawn.
pub fn check_containment_claims(r: &mut TestRng, target: usize) -> Result<usize, String> {
    let universe = terms(4);
    let mut store = Substitution::new();
    store.ensure_vars(1);
    let mut claimed = 0;
    let mut drawn = 0;
    while claimed < target {
        let text = regtypes(r);
        let p = load_texts(std::slice::from_ref(&text));
        let mut props: Vec<PropRef> = (0..N).map(|i| PropRef::Pred(p.lookup("r", &format!("r{i}"), 1).unwrap())).collect();
        props.extend([Builtin::Int, Builtin::Usr, Builtin::Term].map(PropRef::Builtin));
        let mut c = Containment::new(&p);
        for _ in 0..12 {
            let sub: Vec<PropRef> = (0..r.gen_range(1..=2)).map(|_| *props.choose(r).unwrap()).collect();
            let sup = *props.choose(r).unwrap();
            drawn += 1;
            let trivial = sup == PropRef::Builtin(Builtin::Term) || sub.contains(&sup);
            if trivial || !c.contains(&sub, sup) {
                continue;
            }
            claimed += 1;
            for t in &universe {
                if sub.iter().all(|q| holds(&p, *q, t, &store)) && !holds(&p, sup, t, &store) {
                    return Err(format!("{sub:?} <= {sup:?} fails on {t:?}\n{text}"));
                }
            }
        }
    }
    Ok(drawn)
}
