//! Over-approximation of the terms that can escape a module, computed from
//! its interface assertions, and its materialization as a regtype.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::assertion::{lit_names, Builtin, CondKind, Conj, PropRef};
use crate::program::{FlatProgram, PredId};
use crate::regtype::{holds, usr_check, Containment, Production};
use crate::subst::Substitution;
use crate::term::{Name, Qualifier, Symbol, Term};

/// Tighter conditions known from analysis, replacing declared ones.
#[derive(Clone, Debug, Default)]
pub struct EscapeHints {
    /// Per exported predicate: the Post conjunctions to use instead of the
    /// declared success conditions.
    pub success_post: BTreeMap<PredId, Vec<Conj>>,
    /// Per imported predicate: the calls disjunction to use instead of the
    /// declared one.
    pub calls_pre: BTreeMap<PredId, Vec<Conj>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EscapeDescription {
    pub module: Name,
    /// Property union after subsumption pruning. `usr` is implicit and
    /// `term` is recorded as `has_top`.
    pub props: BTreeSet<PropRef>,
    pub includes_usr: bool,
    pub has_top: bool,
}

pub fn escaping_terms(m: &str, p: &FlatProgram) -> Option<EscapeDescription> {
    escaping_terms_with(m, p, &EscapeHints::default())
}

pub fn escaping_terms_with(m: &str, p: &FlatProgram, hints: &EscapeHints) -> Option<EscapeDescription> {
    let info = p.module(m)?;
    let mut found: BTreeSet<PropRef> = BTreeSet::new();
    for id in &info.exps {
        let pred = p.pred(*id);
        let all: Vec<u32> = (0..pred.key.arity).collect();
        match hints.success_post.get(id) {
            Some(posts) => posts.iter().for_each(|c| found.extend(lit_names(c, &all))),
            None => {
                for c in &pred.conditions {
                    if let CondKind::Success { post, .. } = &c.kind {
                        found.extend(lit_names(post, &all));
                    }
                }
            }
        }
    }
    for id in &info.imps {
        let pred = p.pred(*id);
        let all: Vec<u32> = (0..pred.key.arity).collect();
        match hints.calls_pre.get(id) {
            Some(pres) => pres.iter().for_each(|c| found.extend(lit_names(c, &all))),
            None => {
                for c in &pred.conditions {
                    if let CondKind::Calls { pre } = &c.kind {
                        for conj in pre {
                            found.extend(lit_names(conj, &all));
                        }
                    }
                }
            }
        }
    }
    Some(join(info.name, found, p))
}

/// `usr ⊔ P1 ⊔ ... ⊔ Pn`, dropping any `Pi` contained in another `Pj`.
fn join(module: Name, found: BTreeSet<PropRef>, p: &FlatProgram) -> EscapeDescription {
    let mut c = Containment::new(p);
    let has_top = found.iter().any(|q| c.contains(&[PropRef::TERM], *q));
    let usr = PropRef::Builtin(Builtin::Usr);
    let cands: Vec<PropRef> = found.into_iter().filter(|q| *q != usr && *q != PropRef::TERM).collect();
    let mut props = BTreeSet::new();
    for (i, q) in cands.iter().enumerate() {
        let subsumed = cands.iter().enumerate().any(|(j, r)| {
            // Of two equivalent properties keep the first.
            i != j && c.contains(&[*q], *r) && (j < i || !c.contains(&[*r], *q))
        });
        if !subsumed && !has_top {
            props.insert(*q);
        }
    }
    EscapeDescription { module, props, includes_usr: true, has_top }
}

/// `esc_m(m:f(A1..An)) :- p1(A1), ...` for a hidden functor of `m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EscClause {
    pub sym: Symbol,
    pub args: Vec<Vec<PropRef>>,
}

/// The escape description as regtype clauses. Terms built only from public
/// functors are admitted by the closing `usr` clause; `has_top` adds a
/// catch-all.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaterializedEscape {
    pub module: Name,
    pub clauses: Vec<EscClause>,
    pub has_top: bool,
}

#[derive(Debug, thiserror::Error)]
#[error("property {0} is not a regtype")]
pub struct UndefinedProperty(pub String);

pub fn materialize(e: &EscapeDescription, p: &FlatProgram) -> Result<MaterializedEscape, UndefinedProperty> {
    let mut clauses: Vec<EscClause> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut work: Vec<PropRef> = e.props.iter().copied().collect();
    while let Some(q) = work.pop() {
        let PropRef::Pred(id) = q else { continue };
        if !seen.insert(id) {
            continue;
        }
        let rt = p.pred(id).regtype.as_ref().ok_or_else(|| UndefinedProperty(p.pred(id).key.to_string()))?;
        for prod in &rt.productions {
            match prod {
                Production::Functor { sym, args } if sym.qualifier == Qualifier::Module(e.module) => {
                    let c = EscClause { sym: *sym, args: args.clone() };
                    if !clauses.contains(&c) {
                        clauses.push(c);
                    }
                }
                Production::Alias(conj) => work.extend(conj.iter().copied()),
                _ => {}
            }
        }
    }
    clauses.sort_by_key(|a| (a.sym.name, a.sym.arity));
    Ok(MaterializedEscape { module: e.module, clauses, has_top: e.has_top })
}

impl MaterializedEscape {
    pub fn name(&self) -> String {
        format!("esc_{}", self.module)
    }

    /// Membership of `t` under `store`, without binding anything.
    pub fn admits(&self, p: &FlatProgram, t: &Term, store: &Substitution) -> bool {
        if self.has_top || usr_check(t, store) {
            return true;
        }
        let Term::App(app) = store.walk(t) else { return false };
        self.clauses
            .iter()
            .any(|c| c.sym == app.symbol() && app.args().iter().zip(&c.args).all(|(a, props)| props.iter().all(|q| holds(p, *q, a, store))))
    }

    /// Escape clauses for the hidden functor `sym`.
    pub fn clauses_for(&self, sym: Symbol) -> impl Iterator<Item = &EscClause> {
        self.clauses.iter().filter(move |c| c.sym == sym)
    }

    /// Clause-wise language containment: every clause of `self` is covered
    /// by a clause of `other` with argument-wise contained properties.
    pub fn contained_in(&self, other: &MaterializedEscape, c: &mut Containment<'_>) -> bool {
        if other.has_top {
            return true;
        }
        if self.has_top {
            return false;
        }
        self.clauses.iter().all(|mine| {
            other.clauses_for(mine.sym).any(|theirs| mine.args.iter().zip(&theirs.args).all(|(a, bs)| bs.iter().all(|b| c.contains(a, *b))))
        })
    }

    /// Source rendering with normalized variable names.
    pub fn to_text(&self, p: &FlatProgram) -> String {
        let name = self.name();
        let mut out = String::new();
        for c in &self.clauses {
            // Arguments constrained by some property get names A1.., others `_`.
            let mut next = 0;
            let names: Vec<String> = c
                .args
                .iter()
                .map(|props| {
                    if props.is_empty() {
                        "_".to_string()
                    } else {
                        next += 1;
                        format!("A{next}")
                    }
                })
                .collect();
            let _ = write!(out, "{name}({}:{}", self.module, c.sym.name);
            if !names.is_empty() {
                let _ = write!(out, "({})", names.join(","));
            }
            out.push(')');
            let body: Vec<String> = c
                .args
                .iter()
                .zip(&names)
                .flat_map(|(props, v)| props.iter().map(move |q| (q, v)))
                .map(|(q, v)| format!("{}({v})", q.name(p)))
                .collect();
            if !body.is_empty() {
                let _ = write!(out, " :- {}", body.join(", "));
            }
            out.push_str(".\n");
        }
        let _ = writeln!(out, "{name}(A1) :- usr(A1).");
        if self.has_top {
            let _ = writeln!(out, "{name}(_).");
        }
        out
    }
}
