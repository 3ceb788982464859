//! Normalized concrete syntax: variables renamed `A1..An` in first-occurrence
//! order (singletons print as `_`), declarations and predicates sorted.

use std::collections::HashMap;
use std::fmt::Write;

use super::ast::{Indicator, ModuleSource, SAssertion, SClause, STerm};

/// Per-clause variable naming.
#[derive(Default)]
pub struct VarNamer {
    names: HashMap<String, String>,
    counts: HashMap<String, usize>,
}

impl VarNamer {
    /// Prepares names for a group of terms printed together.
    pub fn for_terms<'a>(terms: impl IntoIterator<Item = &'a STerm>) -> Self {
        let mut namer = VarNamer::default();
        let mut order = Vec::new();
        for t in terms {
            collect_vars(t, &mut order, &mut namer.counts);
        }
        let mut next = 1;
        for v in order {
            if namer.counts[&v] > 1 {
                namer.names.insert(v, format!("A{next}"));
                next += 1;
            }
        }
        namer
    }

    fn name(&self, v: &str) -> String {
        self.names.get(v).cloned().unwrap_or_else(|| "_".to_string())
    }
}

fn collect_vars(t: &STerm, order: &mut Vec<String>, counts: &mut HashMap<String, usize>) {
    match t {
        STerm::Var(v) if v == "_" => {}
        STerm::Var(v) => {
            let c = counts.entry(v.clone()).or_insert(0);
            if *c == 0 {
                order.push(v.clone());
            }
            *c += 1;
        }
        STerm::Int(_) => {}
        STerm::App(_, args) => {
            for a in args {
                collect_vars(a, order, counts);
            }
        }
    }
}

pub fn term_to_string(t: &STerm, namer: &VarNamer) -> String {
    let mut s = String::new();
    write_term(&mut s, t, namer);
    s
}

fn write_term(out: &mut String, t: &STerm, namer: &VarNamer) {
    match t {
        STerm::Var(v) => out.push_str(&namer.name(v)),
        STerm::Int(i) => {
            let _ = write!(out, "{i}");
        }
        STerm::App(op, args) if args.len() == 2 && matches!(op.as_str(), "=" | "<" | ">" | "=<" | ">=" | "=:=") => {
            write_term(out, &args[0], namer);
            let _ = write!(out, " {op} ");
            write_term(out, &args[1], namer);
        }
        STerm::App(name, args) => {
            out.push_str(name);
            if !args.is_empty() {
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write_term(out, a, namer);
                }
                out.push(')');
            }
        }
    }
}

pub fn conj_to_string(goals: &[STerm], namer: &VarNamer) -> String {
    if goals.is_empty() {
        return "true".into();
    }
    goals.iter().map(|g| term_to_string(g, namer)).collect::<Vec<_>>().join(", ")
}

pub fn clause_to_string(c: &SClause) -> String {
    let namer = VarNamer::for_terms(std::iter::once(&c.head).chain(&c.body));
    let mut s = term_to_string(&c.head, &namer);
    if !c.body.is_empty() {
        s.push_str(" :- ");
        s.push_str(&conj_to_string(&c.body, &namer));
    }
    s.push('.');
    s
}

pub fn assertion_to_string(a: &SAssertion) -> String {
    let namer = VarNamer::for_terms(std::iter::once(&a.head).chain(&a.pre).chain(&a.post));
    let mut s = format!(":- pred {}", term_to_string(&a.head, &namer));
    if !a.pre.is_empty() {
        let _ = write!(s, " : {}", conj_to_string(&a.pre, &namer));
    }
    if !a.post.is_empty() {
        let _ = write!(s, " => {}", conj_to_string(&a.post, &namer));
    }
    s.push('.');
    s
}

fn indicator_list(items: impl IntoIterator<Item = impl std::fmt::Display>) -> String {
    items.into_iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

/// Renders a module: header, imports, hides, then regtypes and other
/// predicates each sorted by name. Clause order inside a predicate is kept.
pub fn module_to_string(m: &ModuleSource) -> String {
    let mut out = String::new();
    let _ = writeln!(out, ":- module({}, [{}]).", m.name, indicator_list(&m.exports));
    for (from, imp) in &m.imports {
        match &imp.preds {
            Some(preds) => {
                let _ = writeln!(out, ":- use_module({from}, [{}]).", indicator_list(preds));
            }
            None => {
                let _ = writeln!(out, ":- use_module({from}).");
            }
        }
    }
    for h in &m.hidden {
        let _ = writeln!(out, ":- hide({h}).");
    }
    let mut preds: Vec<Indicator> = m.defined();
    for a in &m.assertions {
        let ind = a.indicator();
        if !preds.contains(&ind) {
            preds.push(ind);
        }
    }
    for r in &m.regtypes {
        if !preds.contains(r) {
            preds.push(r.clone());
        }
    }
    preds.sort_by(|a, b| (!m.regtypes.contains(a), &a.name, a.arity).cmp(&(!m.regtypes.contains(b), &b.name, b.arity)));
    for ind in preds {
        out.push('\n');
        if m.regtypes.contains(&ind) {
            let _ = writeln!(out, ":- regtype {ind}.");
        }
        for a in m.assertions_of(&ind) {
            out.push_str(&assertion_to_string(a));
            out.push('\n');
        }
        for c in m.clauses_of(&ind) {
            out.push_str(&clause_to_string(c));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_module;

    #[test]
    fn normalizes_variables() {
        let m = parse_module(":- module(m, [p/2]).\np(X, f(Y, Z)) :- Z = X.").unwrap();
        assert_eq!(clause_to_string(&m.clauses[0]), "p(A1,f(_,A2)) :- A2 = A1.");
    }

    #[test]
    fn module_round_trip() {
        let text = ":- module(m, [p/1]).\n:- hide(k/1).\n:- regtype t/1.\nt(k(X)) :- int(X).\n:- pred p(X) => t(X).\np(k(1)).\n";
        let m = parse_module(text).unwrap();
        let printed = module_to_string(&m);
        let again = parse_module(&printed).unwrap();
        assert_eq!(module_to_string(&again), printed);
        assert!(printed.contains(":- regtype t/1.\nt(k(A1)) :- int(A1)."));
    }
}
