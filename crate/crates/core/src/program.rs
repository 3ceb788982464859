//! Flattening of module sources into one program with qualified symbols,
//! per-module interfaces and resolved calls.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::assertion::{normalize, AssertionCondition, Builtin, Conj, PredAssertion, PropLit, PropRef};
use crate::error::{LoadError, LoadErrorKind, Pos};
use crate::regtype::{Production, Regtype};
use crate::syntax::{Indicator, ModuleSource, SClause, STerm};
use crate::term::{Name, Qualifier, Symbol, Term, VarId};

pub const USER: &str = "user";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredKey {
    pub module: Name,
    pub name: Name,
    pub arity: u32,
}

impl fmt::Display for PredKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}/{}", self.module, self.name, self.arity)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
}

impl CmpOp {
    pub fn from_name(s: &str) -> Option<CmpOp> {
        Some(match s {
            "<" => CmpOp::Lt,
            ">" => CmpOp::Gt,
            "=<" => CmpOp::Le,
            ">=" => CmpOp::Ge,
            "=:=" => CmpOp::Eq,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "=<",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=:=",
        }
    }

    pub fn eval(&self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Gt => a > b,
            CmpOp::Le => a <= b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
        }
    }
}

/// A body literal after resolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Goal {
    Unify(Term, Term),
    Compare(CmpOp, Term, Term),
    Test(Builtin, Term),
    Call(PredId, Box<[Term]>),
}

impl Goal {
    pub fn offset_vars(&self, base: u32) -> Goal {
        match self {
            Goal::Unify(a, b) => Goal::Unify(a.offset_vars(base), b.offset_vars(base)),
            Goal::Compare(op, a, b) => Goal::Compare(*op, a.offset_vars(base), b.offset_vars(base)),
            Goal::Test(b, t) => Goal::Test(*b, t.offset_vars(base)),
            Goal::Call(p, args) => Goal::Call(*p, args.iter().map(|a| a.offset_vars(base)).collect()),
        }
    }

    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Goal::Unify(a, b) | Goal::Compare(_, a, b) => vec![a, b],
            Goal::Test(_, t) => vec![t],
            Goal::Call(_, args) => args.iter().collect(),
        }
    }

    /// Rebuilds the goal with every term passed through `f`.
    pub fn map_terms(&self, f: &mut impl FnMut(&Term) -> Term) -> Goal {
        match self {
            Goal::Unify(a, b) => Goal::Unify(f(a), f(b)),
            Goal::Compare(op, a, b) => Goal::Compare(*op, f(a), f(b)),
            Goal::Test(b, t) => Goal::Test(*b, f(t)),
            Goal::Call(p, args) => Goal::Call(*p, args.iter().map(f).collect()),
        }
    }

    pub fn display<'a>(&'a self, p: &'a FlatProgram) -> GoalDisplay<'a> {
        GoalDisplay { goal: self, program: p }
    }
}

pub struct GoalDisplay<'a> {
    goal: &'a Goal,
    program: &'a FlatProgram,
}

impl fmt::Display for GoalDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.goal {
            Goal::Unify(a, b) => write!(f, "{a} = {b}"),
            Goal::Compare(op, a, b) => write!(f, "{a} {} {b}", op.name()),
            Goal::Test(b, t) => write!(f, "{}({t})", b.name()),
            Goal::Call(p, args) => write_call(f, &self.program.pred(*p).key.name, args),
        }
    }
}

pub(crate) fn write_call(f: &mut impl fmt::Write, name: &Name, args: &[Term]) -> fmt::Result {
    write!(f, "{name}")?;
    if !args.is_empty() {
        f.write_char('(')?;
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                f.write_char(',')?;
            }
            write!(f, "{a}")?;
        }
        f.write_char(')')?;
    }
    Ok(())
}

/// A clause with a normalized head: head variables are `0..arity`, and
/// non-variable or repeated head arguments became leading `=` goals.
#[derive(Clone, Debug)]
pub struct Clause {
    pub pred: PredId,
    pub arity: u32,
    pub nvars: u32,
    pub body: Vec<Goal>,
    pub pos: Pos,
}

impl Clause {
    /// A copy whose variables start at `*fresh`; advances the counter.
    pub fn rename_apart(&self, fresh: &mut u32) -> Clause {
        let base = *fresh;
        *fresh += self.nvars;
        Clause { body: self.body.iter().map(|g| g.offset_vars(base)).collect(), ..self.clone() }
    }

    /// Head arguments: the first `arity` variables of the clause.
    pub fn head_args(&self) -> Vec<Term> {
        (0..self.arity).map(Term::var).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Predicate {
    pub id: PredId,
    pub key: PredKey,
    pub exported: bool,
    pub clauses: Vec<Clause>,
    pub assertions: Vec<PredAssertion>,
    pub conditions: Vec<AssertionCondition>,
    pub regtype: Option<Regtype>,
    pub pos: Pos,
}

impl Predicate {
    pub fn is_regtype(&self) -> bool {
        self.regtype.is_some()
    }
}

#[derive(Clone, Debug)]
pub struct ModuleInfo {
    pub name: Name,
    pub defs: BTreeSet<PredId>,
    pub exps: BTreeSet<PredId>,
    /// Predicates of other modules called from this module's clauses.
    pub imps: BTreeSet<PredId>,
    /// Predicates this module may call from other modules (`use_module`).
    pub importable: BTreeMap<Indicator, PredId>,
    pub hidden: BTreeSet<Symbol>,
    pub source: ModuleSource,
}

impl ModuleInfo {
    pub fn hides(&self, sym: &Symbol) -> bool {
        self.hidden.contains(sym)
    }
}

#[derive(Clone, Debug)]
pub struct FlatProgram {
    preds: Vec<Predicate>,
    by_key: HashMap<PredKey, PredId>,
    modules: BTreeMap<Name, ModuleInfo>,
    /// Exported predicates by name/arity, for the `user` query context.
    user_view: BTreeMap<Indicator, Vec<PredId>>,
}

/// A parsed and resolved query.
#[derive(Clone, Debug)]
pub struct Query {
    pub module: Name,
    pub goals: Vec<Goal>,
    pub nvars: u32,
    /// Named query variables in first-occurrence order.
    pub var_names: Vec<(String, VarId)>,
}

impl Query {
    /// A query built directly from goals; all variables below `nvars` are
    /// reported as `_G<id>`.
    pub fn from_goals(module: &str, goals: Vec<Goal>, nvars: u32) -> Query {
        Query { module: Name::new(module), goals, nvars, var_names: Vec::new() }
    }
}

fn is_builtin_goal(ind: &Indicator) -> bool {
    matches!(
        (ind.name.as_str(), ind.arity),
        ("=", 2) | ("<", 2) | (">", 2) | ("=<", 2) | (">=", 2) | ("=:=", 2) | ("int", 1) | ("term", 1) | ("usr", 1) | ("true", 0)
    )
}

fn err(kind: LoadErrorKind, module: &str, pos: Pos, msg: impl Into<String>) -> LoadError {
    LoadError::new(kind, module, pos, msg)
}

/// Local name → term compiler for one clause or query.
struct Scope<'a> {
    module: &'a str,
    hidden: &'a BTreeSet<Indicator>,
    vars: HashMap<String, u32>,
    order: Vec<(String, VarId)>,
    next: u32,
}

impl<'a> Scope<'a> {
    fn new(module: &'a str, hidden: &'a BTreeSet<Indicator>, first_free: u32) -> Self {
        Scope { module, hidden, vars: HashMap::new(), order: Vec::new(), next: first_free }
    }

    fn fresh(&mut self) -> u32 {
        self.next += 1;
        self.next - 1
    }

    fn var(&mut self, name: &str) -> Term {
        if name == "_" {
            return Term::var(self.fresh());
        }
        if let Some(v) = self.vars.get(name) {
            return Term::var(*v);
        }
        let v = self.fresh();
        self.vars.insert(name.to_string(), v);
        self.order.push((name.to_string(), VarId(v)));
        Term::var(v)
    }

    fn symbol(&self, name: &str, arity: u32) -> Symbol {
        let ind = Indicator::new(name, arity);
        Symbol {
            name: Name::new(name),
            arity,
            qualifier: if self.hidden.contains(&ind) { Qualifier::Module(Name::new(self.module)) } else { Qualifier::User },
        }
    }

    fn term(&mut self, t: &STerm) -> Term {
        match t {
            STerm::Var(v) => self.var(v),
            STerm::Int(i) => Term::Int(*i),
            STerm::App(name, args) => {
                let sym = self.symbol(name, args.len() as u32);
                let args = args.iter().map(|a| self.term(a)).collect();
                Term::app(sym, args)
            }
        }
    }
}

/// Maps a name/arity used in module `m` to a predicate.
type Resolver<'a> = dyn Fn(&Indicator) -> Option<PredId> + 'a;

impl FlatProgram {
    pub fn preds(&self) -> &[Predicate] {
        &self.preds
    }

    pub fn pred(&self, id: PredId) -> &Predicate {
        &self.preds[id.0 as usize]
    }

    pub fn lookup(&self, module: &str, name: &str, arity: u32) -> Option<PredId> {
        self.by_key.get(&PredKey { module: Name::new(module), name: Name::new(name), arity }).copied()
    }

    pub fn pred_by_key(&self, key: &PredKey) -> Option<PredId> {
        self.by_key.get(key).copied()
    }

    pub fn modules(&self) -> impl Iterator<Item = &ModuleInfo> {
        self.modules.values()
    }

    pub fn module(&self, name: &str) -> Option<&ModuleInfo> {
        self.modules.get(&Name::new(name))
    }

    pub fn module_names(&self) -> Vec<String> {
        self.modules.keys().map(|n| n.to_string()).collect()
    }

    /// The module a symbol belongs to (`user` for public functors).
    pub fn mods(&self, sym: &Symbol) -> Name {
        match sym.qualifier {
            Qualifier::User => Name::new(USER),
            Qualifier::Module(m) => m,
        }
    }

    pub fn conditions(&self) -> impl Iterator<Item = &AssertionCondition> {
        self.preds.iter().flat_map(|p| p.conditions.iter())
    }

    /// Whether a call to `g` introduced by module `caller` may reduce.
    pub fn visible(&self, g: PredId, caller: Name) -> bool {
        let p = self.pred(g);
        if p.key.module == caller {
            return true;
        }
        if !p.exported {
            return false;
        }
        if caller.as_str().as_ref() == USER {
            return true;
        }
        self.modules.get(&caller).is_some_and(|m| m.imps.contains(&g) || m.importable.values().any(|i| *i == g))
    }

    pub fn flatten(sources: &[ModuleSource]) -> Result<FlatProgram, LoadError> {
        Flattener::new(sources)?.run()
    }

    /// Parses and resolves query text in the context of `module`.
    pub fn compile_query(&self, goals: &[STerm], module: &str) -> Result<Query, LoadError> {
        let empty = BTreeSet::new();
        let (hidden, resolve): (&BTreeSet<Indicator>, Box<Resolver<'_>>) = if module == USER {
            (&empty, Box::new(|ind: &Indicator| self.resolve_global(ind, None)))
        } else {
            let info = self
                .modules
                .get(&Name::new(module))
                .ok_or_else(|| err(LoadErrorKind::UnknownModule, module, Pos::default(), format!("no module named {module}")))?;
            let m = info.name;
            (
                &info.source.hidden,
                Box::new(move |ind: &Indicator| {
                    self.lookup(module, &ind.name, ind.arity)
                        .or_else(|| info.importable.get(ind).copied())
                        .or_else(|| self.resolve_global(ind, Some(m)))
                }),
            )
        };
        let mut scope = Scope::new(module, hidden, 0);
        let mut out = Vec::new();
        for g in goals {
            compile_goal(g, &mut scope, &*resolve, &mut out, Pos::default())?;
        }
        Ok(Query { module: Name::new(module), goals: out, nvars: scope.next, var_names: scope.order })
    }

    /// Unique exporter of `ind`, then any definer (the call will be
    /// rejected at run time as invisible).
    fn resolve_global(&self, ind: &Indicator, skip: Option<Name>) -> Option<PredId> {
        if let Some(ids) = self.user_view.get(ind) {
            let ids: Vec<_> = ids.iter().filter(|i| Some(self.pred(**i).key.module) != skip).collect();
            if ids.len() == 1 {
                return Some(*ids[0]);
            }
        }
        let mut found =
            self.preds.iter().filter(|p| p.key.name.as_str().as_ref() == ind.name && p.key.arity == ind.arity && !p.clauses.is_empty());
        let first = found.next()?;
        if found.next().is_some() {
            return None;
        }
        Some(first.id)
    }
}

fn compile_goal(g: &STerm, scope: &mut Scope<'_>, resolve: &Resolver<'_>, out: &mut Vec<Goal>, pos: Pos) -> Result<(), LoadError> {
    let (name, args) = match g {
        STerm::App(name, args) => (name.as_str(), args),
        STerm::Var(_) => return Err(err(LoadErrorKind::ParseError, scope.module, pos, "a variable cannot be used as a goal")),
        STerm::Int(i) => return Err(err(LoadErrorKind::ParseError, scope.module, pos, format!("`{i}` is not a goal"))),
    };
    let ind = Indicator::new(name, args.len() as u32);
    if name == ";" && args.len() == 2 {
        return Err(err(LoadErrorKind::ParseError, scope.module, pos, "disjunction is not supported in clause bodies"));
    }
    if name == "," && args.len() == 2 {
        compile_goal(&args[0], scope, resolve, out, pos)?;
        return compile_goal(&args[1], scope, resolve, out, pos);
    }
    if is_builtin_goal(&ind) {
        let ts: Vec<Term> = args.iter().map(|a| scope.term(a)).collect();
        let goal = match (name, ts.as_slice()) {
            ("true", []) => return Ok(()),
            ("=", [a, b]) => Goal::Unify(a.clone(), b.clone()),
            (op, [a, b]) => Goal::Compare(CmpOp::from_name(op).unwrap(), a.clone(), b.clone()),
            (b, [t]) => Goal::Test(Builtin::from_name(b).unwrap(), t.clone()),
            _ => unreachable!(),
        };
        out.push(goal);
        return Ok(());
    }
    let id = resolve(&ind).ok_or_else(|| {
        err(
            LoadErrorKind::VisibilityViolation,
            scope.module,
            pos,
            format!("{ind} is neither defined in nor imported into {}", scope.module),
        )
    })?;
    let args = args.iter().map(|a| scope.term(a)).collect();
    out.push(Goal::Call(id, args));
    Ok(())
}

struct Flattener<'s> {
    sources: &'s [ModuleSource],
    preds: Vec<Predicate>,
    by_key: HashMap<PredKey, PredId>,
    local: HashMap<(String, Indicator), PredId>,
    importable: Vec<BTreeMap<Indicator, PredId>>,
}

impl<'s> Flattener<'s> {
    fn new(sources: &'s [ModuleSource]) -> Result<Self, LoadError> {
        let mut seen = BTreeSet::new();
        for src in sources {
            if src.name == USER {
                return Err(err(LoadErrorKind::DuplicateDefinition, &src.name, src.pos, "`user` is reserved for queries"));
            }
            if !seen.insert(src.name.as_str()) {
                return Err(err(LoadErrorKind::DuplicateDefinition, &src.name, src.pos, format!("module {} loaded twice", src.name)));
            }
        }
        Ok(Flattener { sources, preds: Vec::new(), by_key: HashMap::new(), local: HashMap::new(), importable: Vec::new() })
    }

    fn run(mut self) -> Result<FlatProgram, LoadError> {
        for src in self.sources {
            self.declare(src)?;
        }
        for src in self.sources {
            let imp = self.imports(src)?;
            self.importable.push(imp);
        }
        for (i, src) in self.sources.iter().enumerate() {
            self.check_hidden(src, i)?;
        }
        for (i, src) in self.sources.iter().enumerate() {
            self.compile_clauses(src, i)?;
        }
        for (i, src) in self.sources.iter().enumerate() {
            self.compile_regtypes(src, i)?;
        }
        for (i, src) in self.sources.iter().enumerate() {
            self.compile_assertions(src, i)?;
        }

        let mut modules = BTreeMap::new();
        for (i, src) in self.sources.iter().enumerate() {
            let name = Name::new(&src.name);
            let defs: BTreeSet<PredId> = self.preds.iter().filter(|p| p.key.module == name).map(|p| p.id).collect();
            let exps = defs.iter().copied().filter(|d| self.preds[d.0 as usize].exported).collect();
            let mut imps = BTreeSet::new();
            for d in &defs {
                for c in &self.preds[d.0 as usize].clauses {
                    for g in &c.body {
                        if let Goal::Call(p, _) = g {
                            if !defs.contains(p) {
                                imps.insert(*p);
                            }
                        }
                    }
                }
            }
            let hidden = src
                .hidden
                .iter()
                .map(|h| Symbol { name: Name::new(&h.name), arity: h.arity, qualifier: Qualifier::Module(name) })
                .collect();
            modules
                .insert(name, ModuleInfo { name, defs, exps, imps, importable: self.importable[i].clone(), hidden, source: src.clone() });
        }
        let mut user_view: BTreeMap<Indicator, Vec<PredId>> = BTreeMap::new();
        for p in &self.preds {
            if p.exported {
                user_view.entry(Indicator::new(&p.key.name.as_str(), p.key.arity)).or_default().push(p.id);
            }
        }
        Ok(FlatProgram { preds: self.preds, by_key: self.by_key, modules, user_view })
    }

    fn add_pred(&mut self, src: &ModuleSource, ind: &Indicator, pos: Pos) -> PredId {
        let key = PredKey { module: Name::new(&src.name), name: Name::new(&ind.name), arity: ind.arity };
        if let Some(id) = self.by_key.get(&key) {
            return *id;
        }
        let id = PredId(self.preds.len() as u32);
        self.preds.push(Predicate {
            id,
            key,
            exported: src.exports.contains(ind),
            clauses: Vec::new(),
            assertions: Vec::new(),
            conditions: Vec::new(),
            regtype: None,
            pos,
        });
        self.by_key.insert(key, id);
        self.local.insert((src.name.clone(), ind.clone()), id);
        id
    }

    fn declare(&mut self, src: &ModuleSource) -> Result<(), LoadError> {
        for ind in &src.exports {
            if src.hidden.contains(ind) {
                return Err(err(LoadErrorKind::HiddenFunctorLeak, &src.name, src.pos, format!("{ind} is both hidden and exported")));
            }
        }
        for c in &src.clauses {
            let ind = c.indicator();
            if is_builtin_goal(&ind) || ind.name == "," || ind.name == ";" {
                return Err(err(
                    LoadErrorKind::DuplicateDefinition,
                    &src.name,
                    c.pos,
                    format!("{ind} is a builtin and cannot be redefined"),
                ));
            }
            self.add_pred(src, &ind, c.pos);
        }
        for ind in src.regtypes.iter().chain(&src.exports) {
            if is_builtin_goal(ind) {
                return Err(err(
                    LoadErrorKind::DuplicateDefinition,
                    &src.name,
                    src.pos,
                    format!("{ind} is a builtin and cannot be redefined"),
                ));
            }
            self.add_pred(src, ind, src.pos);
        }
        Ok(())
    }

    fn imports(&self, src: &ModuleSource) -> Result<BTreeMap<Indicator, PredId>, LoadError> {
        let mut out = BTreeMap::new();
        for (from, imp) in &src.imports {
            let Some(other) = self.sources.iter().find(|s| &s.name == from) else {
                return Err(err(LoadErrorKind::UnknownModule, &src.name, imp.pos, format!("no module named {from}")));
            };
            let wanted: Vec<Indicator> = match &imp.preds {
                Some(p) => p.iter().cloned().collect(),
                None => other.exports.iter().cloned().collect(),
            };
            for ind in wanted {
                if !other.exports.contains(&ind) {
                    return Err(err(LoadErrorKind::ImportNotExported, &src.name, imp.pos, format!("{from} does not export {ind}")));
                }
                let id = self.local[&(from.clone(), ind.clone())];
                if self.local.contains_key(&(src.name.clone(), ind.clone())) {
                    return Err(err(
                        LoadErrorKind::DuplicateDefinition,
                        &src.name,
                        imp.pos,
                        format!("{ind} is both defined locally and imported from {from}"),
                    ));
                }
                if let Some(prev) = out.insert(ind.clone(), id) {
                    if prev != id {
                        return Err(err(
                            LoadErrorKind::DuplicateDefinition,
                            &src.name,
                            imp.pos,
                            format!("{ind} imported from two modules"),
                        ));
                    }
                }
            }
        }
        Ok(out)
    }

    fn check_hidden(&self, src: &ModuleSource, i: usize) -> Result<(), LoadError> {
        for h in &src.hidden {
            if is_builtin_goal(h) || h.name == "," || h.name == ";" {
                return Err(err(LoadErrorKind::HiddenCollision, &src.name, src.pos, format!("hidden functor {h} collides with a builtin")));
            }
            if self.importable[i].contains_key(h) {
                return Err(err(
                    LoadErrorKind::HiddenCollision,
                    &src.name,
                    src.pos,
                    format!("hidden functor {h} collides with an imported predicate"),
                ));
            }
        }
        Ok(())
    }

    fn resolver(&self, i: usize) -> impl Fn(&Indicator) -> Option<PredId> + '_ {
        let name = self.sources[i].name.clone();
        move |ind: &Indicator| self.local.get(&(name.clone(), ind.clone())).copied().or_else(|| self.importable[i].get(ind).copied())
    }

    fn compile_clauses(&mut self, src: &ModuleSource, i: usize) -> Result<(), LoadError> {
        let mut compiled = Vec::new();
        {
            let resolve = self.resolver(i);
            for c in &src.clauses {
                let id = resolve(&c.indicator()).expect("declared");
                compiled.push(compile_clause(c, id, src, &resolve)?);
            }
        }
        for c in compiled {
            self.preds[c.pred.0 as usize].clauses.push(c);
        }
        Ok(())
    }

    fn prop_ref(&self, i: usize, ind: &Indicator) -> Option<PropRef> {
        if ind.arity == 1 {
            if let Some(b) = Builtin::from_name(&ind.name) {
                return Some(PropRef::Builtin(b));
            }
        }
        let id = self.resolver(i)(ind)?;
        self.preds[id.0 as usize].regtype.as_ref()?;
        Some(PropRef::Pred(id))
    }

    fn compile_regtypes(&mut self, src: &ModuleSource, i: usize) -> Result<(), LoadError> {
        // Mark first so regtypes may refer to each other in any order.
        for ind in &src.regtypes {
            let id = self.resolver(i)(ind).expect("declared");
            if ind.arity != 1 {
                return Err(err(LoadErrorKind::InvalidRegtype, &src.name, src.pos, format!("regtype {ind} must be unary")));
            }
            self.preds[id.0 as usize].regtype = Some(Regtype::default());
        }
        for ind in &src.regtypes {
            let id = self.resolver(i)(ind).expect("declared");
            let mut productions = Vec::new();
            for c in src.clauses_of(ind) {
                let p = self.production(src, i, c)?;
                let clash = productions.iter().any(|q: &Production| match (q, &p) {
                    (Production::Functor { sym: a, .. }, Production::Functor { sym: b, .. }) => a == b,
                    (Production::Int(a), Production::Int(b)) => a == b,
                    _ => false,
                });
                if clash {
                    return Err(err(
                        LoadErrorKind::InvalidRegtype,
                        &src.name,
                        c.pos,
                        format!("regtype {ind} has two clauses for the same head functor"),
                    ));
                }
                productions.push(p);
            }
            self.preds[id.0 as usize].regtype = Some(Regtype { productions });
        }
        Ok(())
    }

    fn production(&self, src: &ModuleSource, i: usize, c: &SClause) -> Result<Production, LoadError> {
        let bad = |msg: &str| err(LoadErrorKind::InvalidRegtype, &src.name, c.pos, format!("{}: {msg}", c.indicator()));
        let arg = &c.head.args()[0];
        // Argument variables in head order; `None` for `_`.
        let vars: Vec<Option<&str>> = match arg {
            STerm::Var(v) => vec![Some(v.as_str()).filter(|v| *v != "_")],
            STerm::Int(_) => vec![],
            STerm::App(_, args) => {
                let mut names = Vec::new();
                for a in args {
                    match a {
                        STerm::Var(v) if v == "_" => names.push(None),
                        STerm::Var(v) if !names.contains(&Some(v.as_str())) => names.push(Some(v.as_str())),
                        _ => return Err(bad("head arguments must be distinct variables")),
                    }
                }
                names
            }
        };
        let mut constraints: Vec<Vec<PropRef>> = vec![Vec::new(); vars.len()];
        for lit in &c.body {
            let (STerm::App(name, args), Some(ind)) = (lit, lit.functor()) else {
                return Err(bad("body literals must be property calls"));
            };
            let slot = match args.as_slice() {
                [STerm::Var(v)] => vars.iter().position(|x| *x == Some(v.as_str())),
                _ => None,
            };
            let Some(slot) = slot else {
                return Err(bad(&format!("`{name}` must be applied to a head variable")));
            };
            let prop = self.prop_ref(i, &ind).ok_or_else(|| bad(&format!("{ind} is not a property")))?;
            if !constraints[slot].contains(&prop) {
                constraints[slot].push(prop);
            }
        }
        Ok(match arg {
            STerm::Var(_) => Production::Alias(constraints.pop().unwrap_or_default()),
            STerm::Int(k) => Production::Int(*k),
            STerm::App(name, args) => {
                let scope = Scope::new(&src.name, &src.hidden, 0);
                Production::Functor { sym: scope.symbol(name, args.len() as u32), args: constraints }
            }
        })
    }

    fn compile_assertions(&mut self, src: &ModuleSource, i: usize) -> Result<(), LoadError> {
        let mut per_pred: BTreeMap<PredId, Vec<PredAssertion>> = BTreeMap::new();
        for a in &src.assertions {
            let ind = a.indicator();
            let bad = |msg: String| err(LoadErrorKind::MalformedAssertion, &src.name, a.pos, format!("{ind}: {msg}"));
            let id = self
                .local
                .get(&(src.name.clone(), ind.clone()))
                .copied()
                .ok_or_else(|| bad("assertion for a predicate not defined in this module".into()))?;
            let mut names: Vec<&str> = Vec::new();
            for h in a.head.args() {
                match h {
                    STerm::Var(v) if v != "_" && !names.contains(&v.as_str()) => names.push(v),
                    _ => return Err(bad("assertion head arguments must be distinct variables".into())),
                }
            }
            let conj = |lits: &[STerm]| -> Result<Conj, LoadError> {
                let mut out = Vec::new();
                for lit in lits {
                    let ind = lit.functor().ok_or_else(|| bad("property literal expected".into()))?;
                    let arg = match lit.args() {
                        [STerm::Var(v)] => {
                            names.iter().position(|n| n == v).ok_or_else(|| bad(format!("variable {v} does not occur in the head")))?
                        }
                        _ => return Err(bad(format!("{ind} must be a unary property applied to a head variable"))),
                    };
                    let prop = self.prop_ref(i, &ind).ok_or_else(|| bad(format!("{ind} is not a regtype")))?;
                    out.push(PropLit { prop, arg: arg as u32 });
                }
                Ok(out)
            };
            let pre = conj(&a.pre)?;
            let post = conj(&a.post)?;
            per_pred.entry(id).or_default().push(PredAssertion { pred: id, pre, post, pos: a.pos });
        }
        for (id, asserts) in per_pred {
            let p = &mut self.preds[id.0 as usize];
            p.conditions = normalize(id, p.key, &asserts);
            p.assertions = asserts;
        }
        Ok(())
    }
}

fn compile_clause(c: &SClause, pred: PredId, src: &ModuleSource, resolve: &Resolver<'_>) -> Result<Clause, LoadError> {
    let args = c.head.args();
    let arity = args.len() as u32;
    let mut scope = Scope::new(&src.name, &src.hidden, arity);
    let mut body = Vec::new();
    for (i, a) in args.iter().enumerate() {
        match a {
            STerm::Var(v) if v == "_" => {}
            STerm::Var(v) if !scope.vars.contains_key(v) => {
                scope.vars.insert(v.clone(), i as u32);
                scope.order.push((v.clone(), VarId(i as u32)));
            }
            other => {
                let t = scope.term(other);
                body.push(Goal::Unify(Term::var(i as u32), t));
            }
        }
    }
    for g in &c.body {
        compile_goal(g, &mut scope, resolve, &mut body, c.pos)?;
    }
    Ok(Clause { pred, arity, nvars: scope.next, body, pos: c.pos })
}
