//! Trail-based substitutions and syntactic unification with occurs check.

use crate::term::{Term, VarId};

/// A binding store indexed by variable id, with an undo trail.
///
/// When two unbound variables are unified the younger one (higher id) is
/// bound to the older one. Entailment checks rely on this: a check that only
/// binds variables created after its start mark has added no constraint.
#[derive(Clone, Default)]
pub struct Substitution {
    slots: Vec<Option<Term>>,
    trail: Vec<VarId>,
    frozen_below: u32,
}

/// A point the store can be rolled back to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mark {
    trail: usize,
    vars: usize,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of variable ids issued so far.
    pub fn var_count(&self) -> u32 {
        self.slots.len() as u32
    }

    pub fn fresh_var(&mut self) -> VarId {
        self.slots.push(None);
        VarId(self.slots.len() as u32 - 1)
    }

    /// Reserves `n` consecutive fresh ids and returns the first.
    pub fn reserve(&mut self, n: u32) -> u32 {
        let base = self.slots.len() as u32;
        self.slots.resize(self.slots.len() + n as usize, None);
        base
    }

    /// Makes sure ids below `n` exist.
    pub fn ensure_vars(&mut self, n: u32) {
        if self.slots.len() < n as usize {
            self.slots.resize(n as usize, None);
        }
    }

    pub fn lookup(&self, v: VarId) -> Option<&Term> {
        self.slots.get(v.0 as usize).and_then(Option::as_ref)
    }

    pub fn is_bound(&self, v: VarId) -> bool {
        self.lookup(v).is_some()
    }

    /// Follows variable bindings at the top level only.
    pub fn walk<'a>(&'a self, mut t: &'a Term) -> &'a Term {
        while let Term::Var(v) = t {
            match self.lookup(*v) {
                Some(next) => t = next,
                None => break,
            }
        }
        t
    }

    /// Bindings are refused for variables below this id. Used to run
    /// entailment checks that must not constrain pre-existing variables.
    pub fn freeze_below(&mut self, limit: u32) -> u32 {
        std::mem::replace(&mut self.frozen_below, limit)
    }

    pub fn frozen_below(&self) -> u32 {
        self.frozen_below
    }

    pub fn mark(&self) -> Mark {
        Mark { trail: self.trail.len(), vars: self.slots.len() }
    }

    /// Removes every binding and variable created after `mark`.
    pub fn undo_to(&mut self, mark: Mark) {
        while self.trail.len() > mark.trail {
            let v = self.trail.pop().unwrap();
            if let Some(slot) = self.slots.get_mut(v.0 as usize) {
                *slot = None;
            }
        }
        self.slots.truncate(mark.vars);
    }

    /// Variables bound since `mark`, oldest first.
    pub fn bound_since(&self, mark: Mark) -> &[VarId] {
        &self.trail[mark.trail..]
    }

    fn bind(&mut self, v: VarId, t: Term) -> bool {
        if v.0 < self.frozen_below {
            return false;
        }
        self.ensure_vars(v.0 + 1);
        debug_assert!(self.slots[v.0 as usize].is_none());
        self.slots[v.0 as usize] = Some(t);
        self.trail.push(v);
        true
    }

    fn occurs(&self, v: VarId, t: &Term) -> bool {
        match self.walk(t) {
            Term::Var(w) => *w == v,
            Term::Int(_) => false,
            Term::App(app) => !app.is_ground() && app.args().iter().any(|a| self.occurs(v, a)),
        }
    }

    /// Unifies in place. On failure every binding made by this call is
    /// undone and `false` is returned.
    pub fn unify(&mut self, a: &Term, b: &Term) -> bool {
        let mark = self.mark();
        if self.unify_inner(a, b) {
            true
        } else {
            self.undo_bindings(mark);
            false
        }
    }

    fn undo_bindings(&mut self, mark: Mark) {
        while self.trail.len() > mark.trail {
            let v = self.trail.pop().unwrap();
            self.slots[v.0 as usize] = None;
        }
    }

    fn unify_inner(&mut self, a: &Term, b: &Term) -> bool {
        let mut stack = vec![(a.clone(), b.clone())];
        while let Some((a, b)) = stack.pop() {
            let a = self.walk(&a).clone();
            let b = self.walk(&b).clone();
            match (&a, &b) {
                (Term::Var(x), Term::Var(y)) => {
                    if x == y {
                        continue;
                    }
                    let (young, old) = if x > y { (*x, b) } else { (*y, a) };
                    if !self.bind(young, old) {
                        return false;
                    }
                }
                (Term::Var(x), t) | (t, Term::Var(x)) => {
                    if self.occurs(*x, t) || !self.bind(*x, t.clone()) {
                        return false;
                    }
                }
                (Term::Int(i), Term::Int(j)) => {
                    if i != j {
                        return false;
                    }
                }
                (Term::App(f), Term::App(g)) => {
                    if std::sync::Arc::ptr_eq(f, g) {
                        continue;
                    }
                    if f.symbol() != g.symbol() {
                        return false;
                    }
                    if f.is_ground() && g.is_ground() {
                        if f != g {
                            return false;
                        }
                        continue;
                    }
                    for (x, y) in f.args().iter().zip(g.args()).rev() {
                        stack.push((x.clone(), y.clone()));
                    }
                }
                _ => return false,
            }
        }
        true
    }

    /// Resolves every bound variable in `t`, transitively.
    pub fn apply(&self, t: &Term) -> Term {
        match self.walk(t) {
            Term::Var(v) => Term::Var(*v),
            Term::Int(i) => Term::Int(*i),
            t @ Term::App(app) => {
                if app.is_ground() {
                    t.clone()
                } else {
                    Term::app(app.symbol(), app.args().iter().map(|a| self.apply(a)).collect())
                }
            }
        }
    }

    /// Current bindings as (variable, resolved term) pairs in id order.
    pub fn bindings(&self) -> Vec<(VarId, Term)> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_ref().map(|_| VarId(i as u32)))
            .map(|v| (v, self.apply(&Term::Var(v))))
            .collect()
    }

    /// Builds a substitution from explicit bindings (no unification).
    pub fn from_bindings(pairs: impl IntoIterator<Item = (VarId, Term)>) -> Self {
        let mut s = Substitution::new();
        for (v, t) in pairs {
            s.ensure_vars(v.0 + 1);
            assert!(s.bind(v, t), "binding below freeze limit");
        }
        s
    }
}

impl std::fmt::Debug for Substitution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut m = f.debug_map();
        for (v, t) in self.bindings() {
            m.entry(&v.0, &t);
        }
        m.finish()
    }
}

/// Functional unification: returns the extended substitution, or `None`.
pub fn unify(a: &Term, b: &Term, s: &Substitution) -> Option<Substitution> {
    let mut out = s.clone();
    out.unify(a, b).then_some(out)
}

pub fn apply(s: &Substitution, t: &Term) -> Term {
    s.apply(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Symbol;

    fn a() -> Term {
        Term::user_atom("a")
    }

    fn f(args: Vec<Term>) -> Term {
        Term::user_app("f", args)
    }

    #[test]
    fn binds_variable_to_constant() {
        let s = unify(&Term::var(0), &a(), &Substitution::new()).unwrap();
        assert_eq!(s.apply(&Term::var(0)), a());
        assert_eq!(s.bindings().len(), 1);
    }

    #[test]
    fn distinct_constants_fail() {
        assert!(unify(&a(), &Term::user_atom("b"), &Substitution::new()).is_none());
    }

    #[test]
    fn nested_mgu() {
        // f(X, g(Y)) = f(h(Z), g(Z))
        let (x, y, z) = (Term::var(0), Term::var(1), Term::var(2));
        let l = f(vec![x.clone(), Term::user_app("g", vec![y.clone()])]);
        let r = f(vec![Term::user_app("h", vec![z.clone()]), Term::user_app("g", vec![z.clone()])]);
        let s = unify(&l, &r, &Substitution::new()).unwrap();
        assert_eq!(s.apply(&l), s.apply(&r));
        assert_eq!(s.apply(&x), Term::user_app("h", vec![s.apply(&z)]));
        assert_eq!(s.apply(&y), s.apply(&z));
    }

    #[test]
    fn occurs_check_rejects_cycles() {
        let x = Term::var(0);
        assert!(unify(&x, &f(vec![x.clone()]), &Substitution::new()).is_none());
    }

    #[test]
    fn failure_leaves_store_unchanged() {
        let mut s = Substitution::new();
        s.ensure_vars(2);
        let l = f(vec![Term::var(0), a()]);
        let r = f(vec![Term::Int(1), Term::user_atom("b")]);
        assert!(!s.unify(&l, &r));
        assert!(s.bindings().is_empty());
    }

    #[test]
    fn apply_chain_and_identity() {
        let s = Substitution::from_bindings([(VarId(0), Term::user_app("g", vec![Term::var(1)])), (VarId(1), Term::user_atom("b"))]);
        let t = f(vec![Term::var(0)]);
        assert_eq!(s.apply(&t), f(vec![Term::user_app("g", vec![Term::user_atom("b")])]));
        assert_eq!(Substitution::new().apply(&t), t);
    }

    #[test]
    fn hidden_and_user_functors_do_not_unify() {
        let user = Term::atom(Symbol::user("empty", 0));
        let hidden = Term::atom(Symbol::hidden("bt", "empty", 0));
        assert!(unify(&user, &hidden, &Substitution::new()).is_none());
    }

    #[test]
    fn younger_variable_is_bound() {
        let mut s = Substitution::new();
        s.ensure_vars(5);
        assert!(s.unify(&Term::var(1), &Term::var(4)));
        assert!(s.is_bound(VarId(4)));
        assert!(!s.is_bound(VarId(1)));
    }

    #[test]
    fn frozen_variables_refuse_bindings() {
        let mut s = Substitution::new();
        s.ensure_vars(3);
        let old = s.freeze_below(2);
        assert!(!s.unify(&Term::var(1), &a()));
        assert!(s.unify(&Term::var(2), &a()));
        s.freeze_below(old);
        assert!(s.unify(&Term::var(1), &a()));
    }

    #[test]
    fn undo_restores_mark() {
        let mut s = Substitution::new();
        s.ensure_vars(1);
        let m = s.mark();
        let v = s.fresh_var();
        assert!(s.unify(&Term::var(0), &Term::Var(v)));
        assert!(s.unify(&Term::Var(v), &a()));
        s.undo_to(m);
        assert_eq!(s.var_count(), 1);
        assert!(s.bindings().is_empty());
    }
}
