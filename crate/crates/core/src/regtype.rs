//! Regular types: productions, direct membership tests and a coinductive
//! containment check.

use std::collections::{HashMap, HashSet};

use crate::assertion::{Builtin, PropRef};
use crate::program::FlatProgram;
use crate::subst::Substitution;
use crate::term::{Symbol, Term};

/// One regtype clause.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Production {
    /// `t(f(A1..An)) :- ...` with the properties required of each argument.
    Functor { sym: Symbol, args: Vec<Vec<PropRef>> },
    /// `t(k).`
    Int(i64),
    /// `t(X) :- p(X), q(X).`
    Alias(Vec<PropRef>),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Regtype {
    pub productions: Vec<Production>,
}

/// True iff every functor in `t` (under `store`) is public. Unbound
/// variables and integers count as public.
pub fn usr_check(t: &Term, store: &Substitution) -> bool {
    let mut stack = vec![t];
    while let Some(t) = stack.pop() {
        if let Term::App(app) = store.walk(t) {
            if !app.symbol().qualifier.is_user() {
                return false;
            }
            stack.extend(app.args().iter());
        }
    }
    true
}

/// Direct membership test of `t` in `prop` without binding anything.
/// Agrees with running the property as a derivation that must not
/// constrain variables of `t`.
pub fn holds(p: &FlatProgram, prop: PropRef, t: &Term, store: &Substitution) -> bool {
    let mut work: Vec<(PropRef, &Term)> = vec![(prop, t)];
    while let Some((prop, t)) = work.pop() {
        let t = store.walk(t);
        let ok = match prop {
            PropRef::Builtin(Builtin::Term) => true,
            PropRef::Builtin(Builtin::Int) => matches!(t, Term::Int(_)),
            PropRef::Builtin(Builtin::Usr) => usr_check(t, store),
            PropRef::Pred(id) => {
                let Some(rt) = &p.pred(id).regtype else { return false };
                let has_alias = rt.productions.iter().any(|q| matches!(q, Production::Alias(_)));
                if has_alias {
                    rt.productions.iter().any(|q| production_holds(p, q, t, store))
                } else {
                    match t {
                        Term::App(app) => {
                            let sym = app.symbol();
                            let found = rt.productions.iter().find_map(|q| match q {
                                Production::Functor { sym: s, args } if *s == sym => Some(args),
                                _ => None,
                            });
                            match found {
                                Some(args) => {
                                    for (a, props) in app.args().iter().zip(args) {
                                        for q in props {
                                            work.push((*q, a));
                                        }
                                    }
                                    true
                                }
                                None => false,
                            }
                        }
                        Term::Int(k) => rt.productions.contains(&Production::Int(*k)),
                        Term::Var(_) => false,
                    }
                }
            }
        };
        if !ok {
            return false;
        }
    }
    true
}

fn production_holds(p: &FlatProgram, prod: &Production, t: &Term, store: &Substitution) -> bool {
    match (prod, t) {
        (Production::Alias(props), _) => props.iter().all(|q| holds(p, *q, t, store)),
        (Production::Int(k), Term::Int(v)) => k == v,
        (Production::Functor { sym, args }, Term::App(app)) if app.symbol() == *sym => {
            app.args().iter().zip(args).all(|(a, props)| props.iter().all(|q| holds(p, *q, a, store)))
        }
        _ => false,
    }
}

/// Sound, incomplete language containment between properties.
///
/// Pairs revisited while their own proof is in progress count as proven.
/// Only results of top-level queries are cached, since inner results may
/// depend on assumptions still open.
pub struct Containment<'p> {
    program: &'p FlatProgram,
    cache: HashMap<(Vec<PropRef>, PropRef), bool>,
    assumed: HashSet<(Vec<PropRef>, PropRef)>,
}

impl<'p> Containment<'p> {
    pub fn new(program: &'p FlatProgram) -> Self {
        Containment { program, cache: HashMap::new(), assumed: HashSet::new() }
    }

    /// Is every term satisfying all of `sub` also a member of `sup`?
    pub fn contains(&mut self, sub: &[PropRef], sup: PropRef) -> bool {
        let mut key_sub = sub.to_vec();
        key_sub.sort();
        key_sub.dedup();
        let key = (key_sub, sup);
        if let Some(r) = self.cache.get(&key) {
            return *r;
        }
        let r = self.conj_in(&key.0, sup);
        self.cache.insert(key, r);
        r
    }

    fn regtype(&self, p: PropRef) -> Option<&'p Regtype> {
        match p {
            PropRef::Pred(id) => self.program.pred(id).regtype.as_ref(),
            PropRef::Builtin(_) => None,
        }
    }

    /// `sup` accepts every term, unbound variables included.
    fn is_top(&self, sup: PropRef, seen: &mut Vec<PropRef>) -> bool {
        if sup == PropRef::TERM {
            return true;
        }
        if seen.contains(&sup) {
            return false;
        }
        seen.push(sup);
        let Some(rt) = self.regtype(sup) else { return false };
        rt.productions.iter().any(|prod| match prod {
            Production::Alias(c) => c.iter().all(|q| self.is_top(*q, seen)),
            _ => false,
        })
    }

    fn conj_in(&mut self, sub: &[PropRef], sup: PropRef) -> bool {
        if self.is_top(sup, &mut Vec::new()) {
            return true;
        }
        if sub.contains(&sup) {
            return true;
        }
        sub.iter().any(|p| self.single_in(*p, sup))
    }

    fn single_in(&mut self, p: PropRef, sup: PropRef) -> bool {
        if p == sup || self.is_top(sup, &mut Vec::new()) {
            return true;
        }
        match p {
            PropRef::Builtin(Builtin::Term) => false,
            PropRef::Builtin(Builtin::Usr) => sup == PropRef::Builtin(Builtin::Usr),
            PropRef::Builtin(Builtin::Int) => self.all_ints_in(sup, &mut Vec::new()),
            PropRef::Pred(_) => {
                let key = (vec![p], sup);
                if self.assumed.contains(&key) {
                    return true;
                }
                let Some(rt) = self.regtype(p) else { return false };
                self.assumed.insert(key.clone());
                let r = rt.productions.iter().all(|prod| self.prod_in(prod, sup));
                self.assumed.remove(&key);
                r
            }
        }
    }

    fn all_ints_in(&mut self, sup: PropRef, seen: &mut Vec<PropRef>) -> bool {
        match sup {
            PropRef::Builtin(_) => true_for_int(sup),
            PropRef::Pred(_) => {
                if seen.contains(&sup) {
                    return false;
                }
                seen.push(sup);
                let Some(rt) = self.regtype(sup) else { return false };
                rt.productions.iter().any(|prod| match prod {
                    Production::Alias(c) => c.iter().all(|q| self.all_ints_in(*q, seen)),
                    _ => false,
                })
            }
        }
    }

    fn prod_in(&mut self, prod: &Production, sup: PropRef) -> bool {
        match prod {
            Production::Alias(c) => {
                if c.is_empty() {
                    self.is_top(sup, &mut Vec::new())
                } else {
                    self.conj_in(c, sup)
                }
            }
            Production::Int(k) => self.int_in(*k, sup, &mut Vec::new()),
            Production::Functor { sym, args } => self.functor_in(*sym, args, sup, &mut Vec::new()),
        }
    }

    fn int_in(&mut self, k: i64, sup: PropRef, seen: &mut Vec<PropRef>) -> bool {
        match sup {
            PropRef::Builtin(_) => true_for_int(sup),
            PropRef::Pred(_) => {
                if seen.contains(&sup) {
                    return false;
                }
                seen.push(sup);
                let Some(rt) = self.regtype(sup) else { return false };
                rt.productions.iter().any(|prod| match prod {
                    Production::Int(v) => *v == k,
                    Production::Alias(c) => c.iter().all(|q| self.int_in(k, *q, &mut seen.clone())),
                    Production::Functor { .. } => false,
                })
            }
        }
    }

    fn functor_in(&mut self, sym: Symbol, args: &[Vec<PropRef>], sup: PropRef, seen: &mut Vec<PropRef>) -> bool {
        match sup {
            PropRef::Builtin(Builtin::Term) => true,
            PropRef::Builtin(Builtin::Int) => false,
            PropRef::Builtin(Builtin::Usr) => {
                sym.qualifier.is_user() && args.iter().all(|a| self.conj_in(a, PropRef::Builtin(Builtin::Usr)))
            }
            PropRef::Pred(_) => {
                if seen.contains(&sup) {
                    return false;
                }
                seen.push(sup);
                let Some(rt) = self.regtype(sup) else { return false };
                rt.productions.iter().any(|prod| match prod {
                    Production::Functor { sym: s, args: sargs } if *s == sym => {
                        args.iter().zip(sargs).all(|(a, cs)| cs.iter().all(|c| self.conj_in(a, *c)))
                    }
                    Production::Alias(c) => c.iter().all(|q| self.functor_in(sym, args, *q, &mut seen.clone())),
                    _ => false,
                })
            }
        }
    }
}

fn true_for_int(b: PropRef) -> bool {
    matches!(b, PropRef::Builtin(Builtin::Int | Builtin::Term | Builtin::Usr))
}

/// One-shot containment check.
pub fn containment(p: PropRef, q: PropRef, program: &FlatProgram) -> bool {
    Containment::new(program).contains(&[p], q)
}
