//! Source-level syntax tree. Names are plain strings; qualification happens
//! when modules are flattened.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::Pos;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum STerm {
    /// Named variable. `_` is anonymous: every occurrence is distinct.
    Var(String),
    Int(i64),
    App(String, Vec<STerm>),
}

impl STerm {
    pub fn atom(name: &str) -> STerm {
        STerm::App(name.to_string(), Vec::new())
    }

    pub fn app(name: &str, args: Vec<STerm>) -> STerm {
        STerm::App(name.to_string(), args)
    }

    pub fn var(name: &str) -> STerm {
        STerm::Var(name.to_string())
    }

    pub fn functor(&self) -> Option<Indicator> {
        match self {
            STerm::App(name, args) => Some(Indicator::new(name, args.len() as u32)),
            _ => None,
        }
    }

    pub fn args(&self) -> &[STerm] {
        match self {
            STerm::App(_, args) => args,
            _ => &[],
        }
    }

    /// Visits every compound/atom node, outermost first.
    pub fn walk_apps(&self, f: &mut impl FnMut(&str, &[STerm])) {
        if let STerm::App(name, args) = self {
            f(name, args);
            for a in args {
                a.walk_apps(f);
            }
        }
    }
}

/// `name/arity`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Indicator {
    pub name: String,
    pub arity: u32,
}

impl Indicator {
    pub fn new(name: &str, arity: u32) -> Self {
        Indicator { name: name.to_string(), arity }
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SClause {
    pub head: STerm,
    pub body: Vec<STerm>,
    pub pos: Pos,
}

impl SClause {
    pub fn indicator(&self) -> Indicator {
        self.head.functor().expect("clause head is an atom")
    }
}

/// `:- pred Head : Pre => Post.` with conjunctions flattened to lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SAssertion {
    pub head: STerm,
    pub pre: Vec<STerm>,
    pub post: Vec<STerm>,
    pub pos: Pos,
}

impl SAssertion {
    pub fn indicator(&self) -> Indicator {
        self.head.functor().expect("assertion head is an atom")
    }
}

/// Which identifier characters the lexer accepts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Dialect {
    /// Hand-written source.
    #[default]
    Source,
    /// Output of program transformations: names may contain `$` and `#`.
    Generated,
}

/// One parsed module file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ModuleSource {
    pub name: String,
    pub pos: Pos,
    pub exports: BTreeSet<Indicator>,
    pub imports: BTreeMap<String, Import>,
    pub hidden: BTreeSet<Indicator>,
    pub regtypes: BTreeSet<Indicator>,
    pub assertions: Vec<SAssertion>,
    pub clauses: Vec<SClause>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Import {
    /// `None` imports everything the source module exports.
    pub preds: Option<BTreeSet<Indicator>>,
    pub pos: Pos,
}

impl ModuleSource {
    pub fn new(name: &str) -> Self {
        ModuleSource { name: name.to_string(), ..Default::default() }
    }

    /// Predicates with at least one clause, in first-definition order.
    pub fn defined(&self) -> Vec<Indicator> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for c in &self.clauses {
            let ind = c.indicator();
            if seen.insert(ind.clone()) {
                out.push(ind);
            }
        }
        out
    }

    pub fn clauses_of<'a>(&'a self, ind: &'a Indicator) -> impl Iterator<Item = &'a SClause> + 'a {
        self.clauses.iter().filter(move |c| &c.indicator() == ind)
    }

    pub fn assertions_of<'a>(&'a self, ind: &'a Indicator) -> impl Iterator<Item = &'a SAssertion> + 'a {
        self.assertions.iter().filter(move |a| &a.indicator() == ind)
    }
}
