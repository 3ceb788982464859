//! Herbrand terms over module-qualified symbols.
//!
//! Every functor carries a [`Qualifier`]. Functors are `user` unless the
//! module that writes them declared them hidden, in which case the flattener
//! attaches that module's name. Two symbols that differ only in qualifier are
//! different symbols and never unify.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, LazyLock, RwLock};

/// Interned identifier (functor, predicate or module name).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Name(u32);

#[derive(Default)]
struct Interner {
    ids: HashMap<Arc<str>, u32>,
    names: Vec<Arc<str>>,
}

static INTERNER: LazyLock<RwLock<Interner>> = LazyLock::new(Default::default);

impl Name {
    pub fn new(text: &str) -> Name {
        if let Some(&id) = INTERNER.read().unwrap().ids.get(text) {
            return Name(id);
        }
        let mut interner = INTERNER.write().unwrap();
        if let Some(&id) = interner.ids.get(text) {
            return Name(id);
        }
        let id = interner.names.len() as u32;
        let text: Arc<str> = Arc::from(text);
        interner.names.push(text.clone());
        interner.ids.insert(text, id);
        Name(id)
    }

    pub fn as_str(&self) -> Arc<str> {
        INTERNER.read().unwrap().names[self.0 as usize].clone()
    }
}

// Ordering is lexicographic so that every sorted listing is independent of
// interning order.
impl Ord for Name {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.0 == other.0 {
            return Ordering::Equal;
        }
        let interner = INTERNER.read().unwrap();
        interner.names[self.0 as usize].cmp(&interner.names[other.0 as usize])
    }
}

impl PartialOrd for Name {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str())
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.as_str())
    }
}

impl From<&str> for Name {
    fn from(text: &str) -> Self {
        Name::new(text)
    }
}

/// The module a functor belongs to.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Qualifier {
    User,
    Module(Name),
}

impl Qualifier {
    pub fn is_user(&self) -> bool {
        matches!(self, Qualifier::User)
    }
}

impl fmt::Display for Qualifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Qualifier::User => f.write_str("user"),
            Qualifier::Module(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Symbol {
    pub name: Name,
    pub arity: u32,
    pub qualifier: Qualifier,
}

impl Symbol {
    pub fn user(name: &str, arity: u32) -> Symbol {
        Symbol { name: Name::new(name), arity, qualifier: Qualifier::User }
    }

    pub fn hidden(module: &str, name: &str, arity: u32) -> Symbol {
        Symbol { name: Name::new(name), arity, qualifier: Qualifier::Module(Name::new(module)) }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}/{}", self.qualifier, self.name, self.arity)
    }
}

/// Derivation-scoped variable identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct VarId(pub u32);

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(VarId),
    Int(i64),
    App(Arc<App>),
}

/// A compound term (or an atom when `args` is empty).
#[derive(PartialEq, Eq)]
pub struct App {
    sym: Symbol,
    ground: bool,
    args: Box<[Term]>,
}

impl Hash for App {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.sym.hash(state);
        self.args.hash(state);
    }
}

impl App {
    pub fn symbol(&self) -> Symbol {
        self.sym
    }

    pub fn args(&self) -> &[Term] {
        &self.args
    }

    /// True when no variable occurs anywhere below this node.
    pub fn is_ground(&self) -> bool {
        self.ground
    }
}

impl Term {
    pub fn var(id: u32) -> Term {
        Term::Var(VarId(id))
    }

    /// Builds a compound term. Panics if the argument count differs from the
    /// symbol's arity.
    pub fn app(sym: Symbol, args: Vec<Term>) -> Term {
        assert_eq!(sym.arity as usize, args.len(), "arity mismatch building {sym}");
        let ground = args.iter().all(Term::is_ground);
        Term::App(Arc::new(App { sym, ground, args: args.into_boxed_slice() }))
    }

    pub fn atom(sym: Symbol) -> Term {
        Term::app(sym, Vec::new())
    }

    pub fn user_atom(name: &str) -> Term {
        Term::atom(Symbol::user(name, 0))
    }

    pub fn user_app(name: &str, args: Vec<Term>) -> Term {
        Term::app(Symbol::user(name, args.len() as u32), args)
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Int(_) => true,
            Term::App(app) => app.ground,
        }
    }

    pub fn as_var(&self) -> Option<VarId> {
        match self {
            Term::Var(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_app(&self) -> Option<&App> {
        match self {
            Term::App(app) => Some(app),
            _ => None,
        }
    }

    pub fn symbol(&self) -> Option<Symbol> {
        self.as_app().map(App::symbol)
    }

    /// Shifts every variable id by `base`. Ground subterms are shared.
    pub fn offset_vars(&self, base: u32) -> Term {
        match self {
            Term::Var(VarId(v)) => Term::Var(VarId(v + base)),
            Term::Int(_) => self.clone(),
            Term::App(app) if app.ground => self.clone(),
            Term::App(app) => Term::app(app.sym, app.args.iter().map(|a| a.offset_vars(base)).collect()),
        }
    }

    /// Variables in first-occurrence order, without duplicates.
    pub fn vars(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut Vec<VarId>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
            Term::Int(_) => {}
            Term::App(app) => {
                if !app.ground {
                    for a in app.args.iter() {
                        a.collect_vars(out);
                    }
                }
            }
        }
    }

    /// Replaces variables through `f`; variables mapped to `None` are kept.
    pub fn map_vars(&self, f: &mut impl FnMut(VarId) -> Option<Term>) -> Term {
        match self {
            Term::Var(v) => f(*v).unwrap_or_else(|| self.clone()),
            Term::Int(_) => self.clone(),
            Term::App(app) if app.ground => self.clone(),
            Term::App(app) => Term::app(app.sym, app.args.iter().map(|a| a.map_vars(f)).collect()),
        }
    }

    /// Number of nodes, counting variables and integers as one.
    pub fn size(&self) -> usize {
        match self {
            Term::App(app) => 1 + app.args.iter().map(Term::size).sum::<usize>(),
            _ => 1,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::App(app) => 1 + app.args.iter().map(Term::depth).max().unwrap_or(0),
            _ => 1,
        }
    }

    /// Visits every functor symbol in the term.
    pub fn any_symbol(&self, pred: &mut impl FnMut(Symbol) -> bool) -> bool {
        match self {
            Term::App(app) => pred(app.sym) || app.args.iter().any(|a| a.any_symbol(pred)),
            _ => false,
        }
    }

    pub fn display(&self) -> TermDisplay<'_> {
        TermDisplay { term: self, qualified: false, names: None }
    }
}

/// Configurable term printer.
pub struct TermDisplay<'a> {
    term: &'a Term,
    qualified: bool,
    names: Option<&'a dyn Fn(VarId) -> String>,
}

impl<'a> TermDisplay<'a> {
    /// Print hidden functors as `module:name`.
    pub fn qualified(mut self, yes: bool) -> Self {
        self.qualified = yes;
        self
    }

    pub fn var_names(mut self, names: &'a dyn Fn(VarId) -> String) -> Self {
        self.names = Some(names);
        self
    }

    fn write(&self, t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match t {
            Term::Var(v) => match self.names {
                Some(names) => f.write_str(&names(*v)),
                None => write!(f, "_G{}", v.0),
            },
            Term::Int(i) => write!(f, "{i}"),
            Term::App(app) => {
                if let (true, Qualifier::Module(m)) = (self.qualified, app.sym.qualifier) {
                    write!(f, "{m}:")?;
                }
                write!(f, "{}", app.sym.name)?;
                if !app.args.is_empty() {
                    f.write_str("(")?;
                    for (i, a) in app.args.iter().enumerate() {
                        if i > 0 {
                            f.write_str(",")?;
                        }
                        self.write(a, f)?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for TermDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.term, f)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.display().fmt(f)
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.display().qualified(true), f)
    }
}
