//! Pred assertions and their normalized calls/success conditions.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::Pos;
use crate::program::{FlatProgram, PredId, PredKey};
use crate::syntax::printer::{conj_to_string, term_to_string, VarNamer};
use crate::syntax::{parse_term, unfold_conj, Dialect, STerm};
use crate::term::Name;

/// Properties every program understands without a definition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Builtin {
    /// Any integer.
    Int,
    /// Any term (top).
    Term,
    /// Terms built only from `user` functors.
    Usr,
}

impl Builtin {
    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Int => "int",
            Builtin::Term => "term",
            Builtin::Usr => "usr",
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        match name {
            "int" => Some(Builtin::Int),
            "term" => Some(Builtin::Term),
            "usr" => Some(Builtin::Usr),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PropRef {
    Builtin(Builtin),
    Pred(PredId),
}

impl PropRef {
    pub const TERM: PropRef = PropRef::Builtin(Builtin::Term);

    pub fn name(&self, p: &FlatProgram) -> String {
        match self {
            PropRef::Builtin(b) => b.name().to_string(),
            PropRef::Pred(id) => p.pred(*id).key.name.to_string(),
        }
    }
}

/// `prop(A)` where `A` is the `arg`-th head variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PropLit {
    pub prop: PropRef,
    pub arg: u32,
}

pub type Conj = Vec<PropLit>;

/// A resolved `:- pred Head : Pre => Post.` assertion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredAssertion {
    pub pred: PredId,
    pub pre: Conj,
    pub post: Conj,
    pub pos: Pos,
}

/// `module:name/arity#k`; `k = 0` is the calls condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CondId {
    pub pred: PredKey,
    pub index: u32,
}

impl fmt::Display for CondId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.pred, self.index)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("malformed condition id `{0}` (expected module:name/arity#k)")]
pub struct CondIdError(String);

impl FromStr for CondId {
    type Err = CondIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || CondIdError(s.to_string());
        let (module, rest) = s.trim().split_once(':').ok_or_else(err)?;
        let (pi, index) = rest.rsplit_once('#').ok_or_else(err)?;
        let (name, arity) = pi.rsplit_once('/').ok_or_else(err)?;
        if module.is_empty() || name.is_empty() {
            return Err(err());
        }
        Ok(CondId {
            pred: PredKey { module: Name::new(module), name: Name::new(name), arity: arity.parse().map_err(|_| err())? },
            index: index.parse().map_err(|_| err())?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CondKindTag {
    Calls,
    Success,
}

impl fmt::Display for CondKindTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CondKindTag::Calls => "calls",
            CondKindTag::Success => "success",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CondKind {
    /// Admissible calls: the disjunction of every assertion's Pre.
    Calls {
        pre: Vec<Conj>,
    },
    Success {
        pre: Conj,
        post: Conj,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssertionCondition {
    pub id: CondId,
    pub pred: PredId,
    pub kind: CondKind,
}

impl AssertionCondition {
    pub fn tag(&self) -> CondKindTag {
        match self.kind {
            CondKind::Calls { .. } => CondKindTag::Calls,
            CondKind::Success { .. } => CondKindTag::Success,
        }
    }
}

/// One calls condition plus one success condition per assertion; nothing
/// when the predicate has no assertions.
pub fn normalize(pred: PredId, key: PredKey, assertions: &[PredAssertion]) -> Vec<AssertionCondition> {
    if assertions.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(assertions.len() + 1);
    out.push(AssertionCondition {
        id: CondId { pred: key, index: 0 },
        pred,
        kind: CondKind::Calls { pre: assertions.iter().map(|a| a.pre.clone()).collect() },
    });
    for (i, a) in assertions.iter().enumerate() {
        out.push(AssertionCondition {
            id: CondId { pred: key, index: i as u32 + 1 },
            pred,
            kind: CondKind::Success { pre: a.pre.clone(), post: a.post.clone() },
        });
    }
    out
}

/// Properties applied to any of `vars` in `conj`.
pub fn lit_names(conj: &[PropLit], vars: &[u32]) -> BTreeSet<PropRef> {
    conj.iter().filter(|l| vars.contains(&l.arg)).map(|l| l.prop).collect()
}

/// A condition in printable form: `A1..An` are the head arguments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CondText {
    pub id: CondId,
    pub kind: CondKindTag,
    pub head: STerm,
    /// One conjunction for success conditions.
    pub pre: Vec<Vec<STerm>>,
    pub post: Vec<STerm>,
}

fn arg_var(i: u32) -> STerm {
    STerm::Var(format!("A{}", i + 1))
}

impl CondText {
    pub fn of(c: &AssertionCondition, p: &FlatProgram) -> CondText {
        let key = c.id.pred;
        let head = STerm::App(key.name.as_str().to_string(), (0..key.arity).map(arg_var).collect());
        let lits = |conj: &Conj| -> Vec<STerm> { conj.iter().map(|l| STerm::App(l.prop.name(p), vec![arg_var(l.arg)])).collect() };
        let (pre, post) = match &c.kind {
            CondKind::Calls { pre } => (pre.iter().map(lits).collect(), Vec::new()),
            CondKind::Success { pre, post } => (vec![lits(pre)], lits(post)),
        };
        CondText { id: c.id, kind: c.tag(), head, pre, post }
    }
}

impl fmt::Display for CondText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Every head variable counts twice so none prints as `_`.
        let namer = VarNamer::for_terms([&self.head, &self.head]);
        let conj = |c: &[STerm]| match c.len() {
            0 => "true".to_string(),
            1 => conj_to_string(c, &namer),
            _ => format!("({})", conj_to_string(c, &namer)),
        };
        write!(f, "{} {}({}, ", self.id, self.kind, term_to_string(&self.head, &namer))?;
        match self.kind {
            CondKindTag::Calls => {
                let alts: Vec<String> = self.pre.iter().map(|c| conj(c)).collect();
                if alts.len() == 1 {
                    write!(f, "{}", alts[0])?;
                } else {
                    write!(f, "({})", alts.join(" ; "))?;
                }
            }
            CondKindTag::Success => {
                let empty = Vec::new();
                write!(f, "{}, {}", conj(self.pre.first().unwrap_or(&empty)), conj(&self.post))?;
            }
        }
        f.write_str(").")
    }
}

/// The normalized conditions of every predicate of `module`, one per line.
pub fn conditions_to_text(p: &FlatProgram, module: &str) -> String {
    let mut out = String::new();
    for c in p.conditions().filter(|c| c.id.pred.module.as_str().as_ref() == module) {
        out.push_str(&CondText::of(c, p).to_string());
        out.push('\n');
    }
    out
}

#[derive(Debug, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct DumpError {
    pub line: usize,
    pub message: String,
}

/// Reads back the output of [`conditions_to_text`].
pub fn parse_conditions(text: &str) -> Result<Vec<CondText>, DumpError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| DumpError { line: n + 1, message: m };
        let (id, rest) = line.split_once(' ').ok_or_else(|| err("missing condition".into()))?;
        let id: CondId = id.parse().map_err(|e: CondIdError| err(e.to_string()))?;
        let t = parse_term(rest, Dialect::Generated).map_err(|e| err(e.to_string()))?;
        let conj = |t: &STerm| -> Vec<STerm> {
            if matches!(t, STerm::App(n, a) if n == "true" && a.is_empty()) {
                return Vec::new();
            }
            let mut v = Vec::new();
            unfold_conj(t, &mut v);
            v
        };
        let c = match &t {
            STerm::App(k, args) if k == "calls" && args.len() == 2 => {
                let mut alts = Vec::new();
                let mut d = &args[1];
                while let STerm::App(op, ab) = d {
                    if op != ";" || ab.len() != 2 {
                        break;
                    }
                    alts.push(conj(&ab[0]));
                    d = &ab[1];
                }
                alts.push(conj(d));
                CondText { id, kind: CondKindTag::Calls, head: args[0].clone(), pre: alts, post: Vec::new() }
            }
            STerm::App(k, args) if k == "success" && args.len() == 3 => {
                CondText { id, kind: CondKindTag::Success, head: args[0].clone(), pre: vec![conj(&args[1])], post: conj(&args[2]) }
            }
            _ => return Err(err("expected calls/2 or success/3".into())),
        };
        out.push(c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> PredKey {
        PredKey { module: Name::new("m"), name: Name::new("p"), arity: 2 }
    }

    fn lit(b: Builtin, arg: u32) -> PropLit {
        PropLit { prop: PropRef::Builtin(b), arg }
    }

    #[test]
    fn no_assertions_no_conditions() {
        assert!(normalize(PredId(0), key(), &[]).is_empty());
    }

    #[test]
    fn two_assertions_give_disjunction_and_two_successes() {
        let a1 = PredAssertion { pred: PredId(0), pre: vec![lit(Builtin::Int, 0)], post: vec![lit(Builtin::Int, 1)], pos: Pos::default() };
        let a2 = PredAssertion { pred: PredId(0), pre: vec![lit(Builtin::Usr, 0)], post: vec![], pos: Pos::default() };
        let conds = normalize(PredId(0), key(), &[a1.clone(), a2.clone()]);
        assert_eq!(conds.len(), 3);
        assert_eq!(conds[0].kind, CondKind::Calls { pre: vec![a1.pre.clone(), a2.pre.clone()] });
        assert_eq!(conds[1].kind, CondKind::Success { pre: a1.pre, post: a1.post });
        assert_eq!(conds[2].kind, CondKind::Success { pre: a2.pre, post: a2.post });
        assert_eq!(conds[2].id.to_string(), "m:p/2#2");
    }

    #[test]
    fn lit_names_filters_by_variable() {
        let conj = vec![lit(Builtin::Int, 0), lit(Builtin::Usr, 1), lit(Builtin::Term, 2)];
        assert_eq!(lit_names(&conj, &[0, 1, 2]).len(), 3);
        assert!(lit_names(&[], &[0]).is_empty());
        assert!(lit_names(&conj[1..2], &[0]).is_empty());
    }

    #[test]
    fn cond_id_parse_round_trip() {
        let id: CondId = "bt:insert$inner/3#1".parse().unwrap();
        assert_eq!(id.to_string(), "bt:insert$inner/3#1");
        assert!("nonsense".parse::<CondId>().is_err());
        assert!("bt:insert/x#0".parse::<CondId>().is_err());
    }

    #[test]
    fn dump_round_trip() {
        use crate::syntax::parse_module;
        let text = ":- module(bt, [insert/3]).
:- hide(empty/0).
:- regtype val_key/1.
val_key(X) :- int(X).
:- regtype val_tree/1.
val_tree(empty).
:- pred insert(K,T0,T1) : val_key(K), val_tree(T0), term(T1)
                       => val_key(K), val_tree(T0), val_tree(T1).
:- pred insert(K,T0,T1) : int(K).
:- pred insert(K,T0,T1).
insert(X,empty,X).
";
        let p = FlatProgram::flatten(&[parse_module(text).unwrap()]).unwrap();
        let dump = conditions_to_text(&p, "bt");
        assert_eq!(
            dump.lines().take(2).collect::<Vec<_>>(),
            [
                "bt:insert/3#0 calls(insert(A1,A2,A3), ((val_key(A1), val_tree(A2), term(A3)) ; int(A1) ; true)).",
                "bt:insert/3#1 success(insert(A1,A2,A3), (val_key(A1), val_tree(A2), term(A3)), (val_key(A1), val_tree(A2), val_tree(A3))).",
            ]
        );
        let expected: Vec<CondText> = p.conditions().map(|c| CondText::of(c, &p)).collect();
        assert_eq!(parse_conditions(&dump).unwrap(), expected);
        assert!(parse_conditions("bt:p/1#0 foo(x).").is_err());
    }
}
