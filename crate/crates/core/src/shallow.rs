//! Shallow properties and the shallow-interface module transformation.
//!
//! Exported predicates get a wrapper `p/N :- p$inner/N`; internal calls go
//! to `p$inner`, which keeps the original assertions. The wrapper's Pre uses
//! `P#` properties specialized against the module's escaping terms.

use std::collections::{BTreeMap, BTreeSet};

use crate::assertion::{Builtin, CondId, PropRef};
use crate::error::LoadError;
use crate::escape::{escaping_terms, materialize, MaterializedEscape, UndefinedProperty};
use crate::program::{FlatProgram, PredKey};
use crate::regtype::Containment;
use crate::syntax::printer::module_to_string;
use crate::syntax::{Indicator, ModuleSource, SClause, STerm};
use crate::term::Name;

pub const INNER_SUFFIX: &str = "$inner";
pub const SHALLOW_SUFFIX: &str = "#";

/// Result of specializing one property.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyDef {
    /// Name of the property that was specialized.
    pub base: String,
    /// Clauses with heads still named `base`.
    pub clauses: Vec<SClause>,
    /// False when no literal could be dropped; the property is then used as is.
    pub changed: bool,
}

impl PropertyDef {
    pub fn name(&self) -> String {
        if self.changed {
            format!("{}{SHALLOW_SUFFIX}", self.base)
        } else {
            self.base.clone()
        }
    }

    /// Clauses with heads renamed to `name()`.
    pub fn renamed_clauses(&self) -> Vec<SClause> {
        let name = self.name();
        self.clauses
            .iter()
            .map(|c| SClause { head: STerm::App(name.clone(), c.head.args().to_vec()), body: c.body.clone(), pos: c.pos })
            .collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ShallowError {
    #[error("unknown module {0}")]
    UnknownModule(String),
    #[error("property {0}/1 is not defined in module {1}")]
    UnknownProperty(String, String),
    #[error(transparent)]
    Undefined(#[from] UndefinedProperty),
    #[error(transparent)]
    Load(#[from] LoadError),
}

pub(crate) fn resolve_prop(p: &FlatProgram, module: &str, name: &str) -> Option<PropRef> {
    if let Some(b) = Builtin::from_name(name) {
        return Some(PropRef::Builtin(b));
    }
    if let Some(id) = p.lookup(module, name, 1) {
        return Some(PropRef::Pred(id));
    }
    let info = p.module(module)?;
    info.importable.get(&Indicator::new(name, 1)).map(|id| PropRef::Pred(*id))
}

/// Specializes `prop` (a regtype defined in `module`) w.r.t. the escaping
/// terms `esc` of that module.
///
/// In a clause whose head functor is hidden by the module, the literals on
/// argument `i` are dropped when every escape clause for that functor
/// constrains argument `i` to something contained in each of them.
pub fn spec(prop: &str, esc: &MaterializedEscape, module: &str, p: &FlatProgram) -> Result<PropertyDef, ShallowError> {
    let info = p.module(module).ok_or_else(|| ShallowError::UnknownModule(module.to_string()))?;
    let ind = Indicator::new(prop, 1);
    if !info.source.regtypes.contains(&ind) {
        return Err(ShallowError::UnknownProperty(prop.to_string(), module.to_string()));
    }
    let clauses: Vec<SClause> = info.source.clauses_of(&ind).cloned().collect();
    if esc.has_top {
        return Ok(PropertyDef { base: prop.to_string(), clauses, changed: false });
    }
    let mut c = Containment::new(p);
    let mut changed = false;
    let mut out = Vec::with_capacity(clauses.len());
    for cl in clauses {
        let STerm::App(f, fargs) = &cl.head.args()[0] else {
            out.push(cl);
            continue;
        };
        let find = Indicator::new(f, fargs.len() as u32);
        if !info.source.hidden.contains(&find) {
            out.push(cl);
            continue;
        }
        let sym = info.hidden.iter().find(|s| s.name.as_str().as_ref() == f.as_str() && s.arity == find.arity).copied();
        let esc_clauses: Vec<_> = sym.map(|s| esc.clauses_for(s).collect()).unwrap_or_default();
        if esc_clauses.is_empty() {
            out.push(cl);
            continue;
        }
        let mut droppable: BTreeSet<usize> = BTreeSet::new();
        for (i, a) in fargs.iter().enumerate() {
            let STerm::Var(v) = a else { continue };
            let lits: Vec<&STerm> = cl.body.iter().filter(|l| l.args().first() == Some(a)).collect();
            if v == "_" || lits.is_empty() {
                continue;
            }
            let all_in = lits.iter().all(|l| {
                let STerm::App(q, _) = l else { return false };
                let Some(q) = resolve_prop(p, module, q) else { return false };
                esc_clauses.iter().all(|e| c.contains(&e.args[i], q))
            });
            if all_in {
                droppable.insert(i);
            }
        }
        if droppable.is_empty() {
            out.push(cl);
            continue;
        }
        changed = true;
        let dropped_vars: Vec<&STerm> = droppable.iter().map(|i| &fargs[*i]).collect();
        let body: Vec<STerm> = cl.body.iter().filter(|l| !dropped_vars.contains(&&l.args()[0])).cloned().collect();
        out.push(SClause { head: cl.head.clone(), body, pos: cl.pos });
    }
    Ok(PropertyDef { base: prop.to_string(), clauses: out, changed })
}

/// The transformed module plus the map from its condition ids back to the
/// original ones.
#[derive(Clone, Debug)]
pub struct ShallowModule {
    pub source: ModuleSource,
    pub id_map: BTreeMap<CondId, CondId>,
    pub escape: MaterializedEscape,
}

impl ShallowModule {
    pub fn to_text(&self) -> String {
        module_to_string(&self.source)
    }

    /// Original id of a condition of the transformed module.
    pub fn original(&self, id: CondId) -> CondId {
        self.id_map.get(&id).copied().unwrap_or(id)
    }
}

fn inner_name(name: &str) -> String {
    format!("{name}{INNER_SUFFIX}")
}

/// `m` with a wrapper for each exported non-regtype predicate.
pub fn add_wrappers(m: &ModuleSource) -> (ModuleSource, BTreeSet<Indicator>) {
    let wrapped: BTreeSet<Indicator> = m.exports.iter().filter(|e| !m.regtypes.contains(e)).cloned().collect();
    let rename = |name: &str, arity: usize| {
        let ind = Indicator::new(name, arity as u32);
        wrapped.contains(&ind).then(|| inner_name(name))
    };
    let mut out = m.clone();
    out.clauses = m
        .clauses
        .iter()
        .map(|c| SClause {
            head: rename_goal(&c.head, &rename),
            body: c.body.iter().map(|g| rename_goal(g, &rename)).collect(),
            pos: c.pos,
        })
        .collect();
    out.assertions = m
        .assertions
        .iter()
        .map(|a| {
            let mut a = a.clone();
            if let STerm::App(n, args) = &a.head {
                if let Some(r) = rename(n, args.len()) {
                    a.head = STerm::App(r, args.clone());
                }
            }
            a
        })
        .collect();
    for ind in &wrapped {
        let vars: Vec<STerm> = (1..=ind.arity).map(|i| STerm::Var(format!("A{i}"))).collect();
        out.clauses.push(SClause {
            head: STerm::App(ind.name.clone(), vars.clone()),
            body: vec![STerm::App(inner_name(&ind.name), vars)],
            pos: m.pos,
        });
        for a in m.assertions_of(ind) {
            out.assertions.push(a.clone());
        }
    }
    (out, wrapped)
}

/// Renames the predicate of a body goal, leaving its arguments alone.
fn rename_goal(g: &STerm, rename: &impl Fn(&str, usize) -> Option<String>) -> STerm {
    match g {
        STerm::App(n, args) => STerm::App(rename(n, args.len()).unwrap_or_else(|| n.clone()), args.clone()),
        other => other.clone(),
    }
}

/// Wraps the exported predicates of `module` and replaces the Pre of the
/// wrappers' assertions by its shallow version.
pub fn shallow_interface(module: &str, p: &FlatProgram) -> Result<ShallowModule, ShallowError> {
    let info = p.module(module).ok_or_else(|| ShallowError::UnknownModule(module.to_string()))?;
    let (mut wrapped_src, wrapped) = add_wrappers(&info.source);

    // Escaping terms are computed on the module with wrappers in place.
    let sources: Vec<ModuleSource> =
        p.modules().map(|mi| if mi.name == info.name { wrapped_src.clone() } else { mi.source.clone() }).collect();
    let prime = FlatProgram::flatten(&sources)?;
    let e = escaping_terms(module, &prime).ok_or_else(|| ShallowError::UnknownModule(module.to_string()))?;
    let esc = materialize(&e, &prime)?;

    let mut specs: BTreeMap<String, PropertyDef> = BTreeMap::new();
    let regtypes = wrapped_src.regtypes.clone();
    for a in wrapped_src.assertions.iter_mut() {
        if !wrapped.contains(&a.indicator()) {
            continue;
        }
        let mut pre = Vec::with_capacity(a.pre.len());
        for lit in &a.pre {
            let STerm::App(q, args) = lit else {
                pre.push(lit.clone());
                continue;
            };
            if !regtypes.contains(&Indicator::new(q, 1)) {
                pre.push(lit.clone());
                continue;
            }
            if !specs.contains_key(q) {
                specs.insert(q.clone(), spec(q, &esc, module, &prime)?);
            }
            pre.push(STerm::App(specs[q].name(), args.clone()));
        }
        a.pre = pre;
    }
    for d in specs.values().filter(|d| d.changed) {
        wrapped_src.regtypes.insert(Indicator::new(&d.name(), 1));
        wrapped_src.clauses.extend(d.renamed_clauses());
    }

    let mut id_map = BTreeMap::new();
    let mname = Name::new(module);
    for ind in &wrapped {
        let n = info.source.assertions_of(ind).count() as u32;
        let key = PredKey { module: mname, name: Name::new(&ind.name), arity: ind.arity };
        let inner = PredKey { name: Name::new(&inner_name(&ind.name)), ..key };
        if n == 0 {
            continue;
        }
        for k in 0..=n {
            id_map.insert(CondId { pred: inner, index: k }, CondId { pred: key, index: k });
        }
    }
    Ok(ShallowModule { source: wrapped_src, id_map, escape: esc })
}

/// Replaces `module` in `p` by its shallow interface and reloads.
pub fn substitute(p: &FlatProgram, shallow: &ShallowModule) -> Result<FlatProgram, LoadError> {
    let sources: Vec<ModuleSource> = p
        .modules()
        .map(|mi| if mi.name.as_str().as_ref() == shallow.source.name { shallow.source.clone() } else { mi.source.clone() })
        .collect();
    FlatProgram::flatten(&sources)
}

/// Every module of `p` replaced by its shallow interface, with the
/// combined condition-id map back to `p`.
pub fn shallow_program(p: &FlatProgram) -> Result<(FlatProgram, BTreeMap<CondId, CondId>), ShallowError> {
    let mut cur = p.clone();
    let mut id_map = BTreeMap::new();
    for m in p.module_names() {
        let s = shallow_interface(&m, &cur)?;
        cur = substitute(&cur, &s)?;
        id_map.extend(s.id_map);
    }
    Ok((cur, id_map))
}

/// Adds the transformed ids whose original is already discharged.
pub fn lift_discharge(discharge: &BTreeSet<CondId>, id_map: &BTreeMap<CondId, CondId>) -> BTreeSet<CondId> {
    let mut out = discharge.clone();
    out.extend(id_map.iter().filter(|(_, orig)| discharge.contains(orig)).map(|(id, _)| *id));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_module, parse_module_with, Dialect};

    const BT: &str = ":- module(bt, [insert/3]).
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

    fn load(text: &str) -> FlatProgram {
        FlatProgram::flatten(&[parse_module(text).unwrap()]).unwrap()
    }

    const BT_SHALLOW: &str = ":- module(bt, [insert/3]).
:- hide(empty/0).
:- hide(tree/3).

:- regtype val_key/1.
val_key(A1) :- int(A1).

:- regtype val_tree/1.
val_tree(empty).
val_tree(tree(A1,A2,A3)) :- val_tree(A1), val_key(A2), val_tree(A3).

:- regtype val_tree#/1.
val_tree#(empty).
val_tree#(tree(_,_,_)).

:- pred insert(A1,A2,A3) : val_key(A1), val_tree#(A2), term(A3) => val_key(A1), val_tree(A2), val_tree(A3).
insert(A1,A2,A3) :- insert$inner(A1,A2,A3).

:- pred insert$inner(A1,A2,A3) : val_key(A1), val_tree(A2), term(A3) => val_key(A1), val_tree(A2), val_tree(A3).
insert$inner(A1,empty,tree(empty,A1,empty)).
insert$inner(A1,tree(A2,A1,A3),tree(A2,A1,A3)).
insert$inner(A1,tree(A2,A3,A4),tree(A5,A3,A4)) :- A1 < A3, insert$inner(A1,A2,A5).
insert$inner(A1,tree(A2,A3,A4),tree(A2,A3,A5)) :- A1 > A3, insert$inner(A1,A4,A5).
";

    fn esc(p: &FlatProgram, m: &str) -> MaterializedEscape {
        materialize(&escaping_terms(m, p).unwrap(), p).unwrap()
    }

    #[test]
    fn binary_tree_listing() {
        let p = load(BT);
        let s = shallow_interface("bt", &p).unwrap();
        assert_eq!(s.to_text(), BT_SHALLOW);
        let again = parse_module_with(&s.to_text(), Dialect::Generated).unwrap();
        assert_eq!(module_to_string(&again), BT_SHALLOW);
        let id: CondId = "bt:insert$inner/3#1".parse().unwrap();
        assert_eq!(s.original(id).to_string(), "bt:insert/3#1");
    }

    #[test]
    fn spec_examples() {
        let p = load(BT);
        let e = esc(&p, "bt");
        let t = spec("val_tree", &e, "bt", &p).unwrap();
        assert!(t.changed);
        assert_eq!(t.name(), "val_tree#");
        assert!(t.clauses.iter().all(|c| c.body.is_empty()));
        assert!(!spec("val_key", &e, "bt", &p).unwrap().changed);
        assert!(matches!(spec("nope", &e, "bt", &p), Err(ShallowError::UnknownProperty(..))));
    }

    #[test]
    fn spec_is_idempotent() {
        let p = load(BT);
        let s = shallow_interface("bt", &p).unwrap();
        let q = substitute(&p, &s).unwrap();
        let e = esc(&q, "bt");
        let once = spec("val_tree#", &e, "bt", &q).unwrap();
        assert!(!once.changed);
        assert_eq!(once.clauses, q.module("bt").unwrap().source.clauses_of(&Indicator::new("val_tree#", 1)).cloned().collect::<Vec<_>>());
    }

    #[test]
    fn no_exports_unchanged() {
        let p = load(":- module(m, []).\n:- regtype t/1.\nt(1).\np(1).");
        let s = shallow_interface("m", &p).unwrap();
        assert_eq!(s.source, p.module("m").unwrap().source);
        assert!(s.id_map.is_empty());
    }

    #[test]
    fn top_escape_keeps_pre() {
        let text = ":- module(m, [p/1, q/1]).\n:- hide(k/1).\n:- regtype t/1.\nt(k(X)) :- int(X).\n:- pred p(X) : t(X).\np(k(1)).\n:- pred q(X) => term(X).\nq(k(a)).";
        let p = load(text);
        let s = shallow_interface("m", &p).unwrap();
        assert!(s.escape.has_top);
        let text = s.to_text();
        assert!(text.contains(":- pred p(A1) : t(A1).\np(A1) :- p$inner(A1)."), "{text}");
        assert!(!text.contains('#'));
    }

    #[test]
    fn user_heads_keep_full_checks() {
        let text = ":- module(m, [p/1]).\n:- hide(k/1).\n:- regtype t/1.\nt(k(X)) :- int(X).\nt(f(X)) :- int(X).\n:- pred p(X) : t(X) => t(X).\np(k(1)).";
        let p = load(text);
        let d = spec("t", &esc(&p, "m"), "m", &p).unwrap();
        assert!(d.changed);
        assert!(d.clauses[0].body.is_empty());
        assert_eq!(d.clauses[1].body.len(), 1);
    }

    #[test]
    fn same_verdicts_after_substitution() {
        use crate::engine::{solve, CheckConfig, Mode, Semantics, SolveOptions};
        use crate::syntax::parse_query;
        let p = load(BT);
        let s = shallow_interface("bt", &p).unwrap();
        let q = substitute(&p, &s).unwrap();
        let queries = [
            "insert(3, empty, T1)",
            "insert(5, empty, T1), insert(2, T1, T2), insert(7, T2, T3)",
            "insert(5, empty, T1), insert(a, T1, T2)",
            "insert(5, tree(x, 1, y), T)",
            "insert(5, T0, T1)",
        ];
        for (text, ctx) in queries.iter().flat_map(|q| [(q, "bt"), (q, "user")]) {
            let goals = parse_query(text).unwrap();
            for mode in Mode::ALL {
                let sem = Semantics::Rtc(CheckConfig::new(mode));
                let run = |prog: &FlatProgram| {
                    let query = prog.compile_query(&goals, ctx).unwrap();
                    solve(&query, prog, sem.clone(), SolveOptions::default()).verdict
                };
                let (a, b) = (run(&p), run(&q));
                assert!(a.equivalent(&b, |id| s.original(id)), "{text} in {ctx} under {mode}: {a:?} vs {b:?}");
            }
        }
    }
}
