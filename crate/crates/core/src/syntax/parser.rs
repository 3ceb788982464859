//! Recursive-descent parser for module files.
//!
//! Grammar (whitespace-insensitive, `%` comments):
//!
//! ```text
//! item      := ":-" directive "." | clause "."
//! clause    := term [":-" conj]
//! conj      := goal ("," goal)*
//! goal      := term [relop term]
//! term      := VAR | INT | ATOM ["(" goal ("," goal)* ")"] | "(" disj ")"
//! disj      := conj (";" conj)*
//! directive := module(Name, [PI, ...]) | use_module(Name [, [PI, ...]])
//!            | hide PI | hide(PI, ...) | regtype PI | pred Head [":" conj] ["=>" conj]
//! ```

use std::collections::BTreeSet;

use crate::error::{LoadError, LoadErrorKind, Pos};

use super::ast::{Dialect, Import, Indicator, ModuleSource, SAssertion, SClause, STerm};
use super::lexer::{tokenize, Tok};

pub fn parse_module(text: &str) -> Result<ModuleSource, LoadError> {
    parse_module_with(text, Dialect::Source)
}

pub fn parse_module_with(text: &str, dialect: Dialect) -> Result<ModuleSource, LoadError> {
    let toks = tokenize(text, dialect).map_err(|e| LoadError::new(LoadErrorKind::ParseError, "?", e.pos, e.message))?;
    let mut p = Parser { toks, at: 0, module: "?".to_string() };
    p.module()
}

/// Parses a query: a conjunction of goals terminated by an optional `.`.
pub fn parse_query(text: &str) -> Result<Vec<STerm>, LoadError> {
    let toks = tokenize(text, Dialect::Source).map_err(|e| LoadError::new(LoadErrorKind::ParseError, "user", e.pos, e.message))?;
    let mut p = Parser { toks, at: 0, module: "user".to_string() };
    let goals = p.conj()?;
    if p.peek() == Some(&Tok::End) {
        p.at += 1;
    }
    if let Some(t) = p.peek() {
        return Err(p.error_at(p.pos(), format!("unexpected {} after query", t.describe())));
    }
    Ok(goals)
}

/// Parses a single term (used by the condition-dump reader).
pub(crate) fn parse_term(text: &str, dialect: Dialect) -> Result<STerm, LoadError> {
    let toks = tokenize(text, dialect).map_err(|e| LoadError::new(LoadErrorKind::ParseError, "?", e.pos, e.message))?;
    let mut p = Parser { toks, at: 0, module: "?".to_string() };
    let t = p.goal()?;
    if p.peek() == Some(&Tok::End) {
        p.at += 1;
    }
    if let Some(t) = p.peek() {
        return Err(p.error_at(p.pos(), format!("unexpected {}", t.describe())));
    }
    Ok(t)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    module: String,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).or(self.toks.last()).map(|(_, p)| *p).unwrap_or_default()
    }

    fn error_at(&self, pos: Pos, message: String) -> LoadError {
        LoadError::new(LoadErrorKind::ParseError, &self.module, pos, message)
    }

    fn next(&mut self) -> Result<Tok, LoadError> {
        match self.toks.get(self.at) {
            Some((t, _)) => {
                self.at += 1;
                Ok(t.clone())
            }
            None => Err(self.error_at(self.pos(), "unexpected end of input".into())),
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), LoadError> {
        let pos = self.pos();
        let got = self.next()?;
        if got == want {
            Ok(())
        } else {
            Err(self.error_at(pos, format!("expected {}, found {}", want.describe(), got.describe())))
        }
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if self.peek() == Some(want) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn atom(&mut self) -> Result<String, LoadError> {
        let pos = self.pos();
        match self.next()? {
            Tok::Atom(a) => Ok(a),
            other => Err(self.error_at(pos, format!("expected a name, found {}", other.describe()))),
        }
    }

    fn module(&mut self) -> Result<ModuleSource, LoadError> {
        let pos = self.pos();
        self.expect(Tok::Neck).map_err(|_| self.error_at(pos, "a module file must start with `:- module(Name, Exports).`".into()))?;
        let head = self.atom()?;
        if head != "module" {
            return Err(self.error_at(pos, "a module file must start with `:- module(Name, Exports).`".into()));
        }
        self.expect(Tok::LParen)?;
        let name = self.atom()?;
        self.module = name.clone();
        let mut src = ModuleSource::new(&name);
        src.pos = pos;
        self.expect(Tok::Comma)?;
        for ind in self.indicator_list()? {
            if !src.exports.insert(ind.clone()) {
                return Err(self.error_at(pos, format!("{ind} exported twice")));
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::End)?;

        while self.peek().is_some() {
            let pos = self.pos();
            if self.eat(&Tok::Neck) {
                self.directive(&mut src, pos)?;
            } else {
                let head = self.goal()?;
                match &head {
                    STerm::App(name, _) if !is_reserved(name) => {}
                    _ => return Err(self.error_at(pos, "clause head must be an atom or compound".into())),
                }
                let body = if self.eat(&Tok::Neck) { self.conj()? } else { Vec::new() };
                self.expect(Tok::End)?;
                src.clauses.push(SClause { head, body, pos });
            }
        }
        Ok(src)
    }

    fn directive(&mut self, src: &mut ModuleSource, pos: Pos) -> Result<(), LoadError> {
        let name = self.atom()?;
        match name.as_str() {
            "module" => return Err(self.error_at(pos, "a file may declare only one module".into())),
            "use_module" => {
                self.expect(Tok::LParen)?;
                let from = self.atom()?;
                let preds = if self.eat(&Tok::Comma) { Some(self.indicator_list()?.into_iter().collect::<BTreeSet<_>>()) } else { None };
                self.expect(Tok::RParen)?;
                match src.imports.get_mut(&from) {
                    Some(existing) => match (&mut existing.preds, preds) {
                        (Some(a), Some(b)) => a.extend(b),
                        (slot, _) => *slot = None,
                    },
                    None => {
                        src.imports.insert(from, Import { preds, pos });
                    }
                }
            }
            "hide" => {
                for ind in self.indicators_arg()? {
                    src.hidden.insert(ind);
                }
            }
            "regtype" => {
                for ind in self.indicators_arg()? {
                    if !src.regtypes.insert(ind.clone()) {
                        return Err(LoadError::new(
                            LoadErrorKind::DuplicateDefinition,
                            &src.name,
                            pos,
                            format!("regtype {ind} declared twice"),
                        ));
                    }
                }
            }
            "pred" => {
                let head = self.term()?;
                if !matches!(head, STerm::App(..)) {
                    return Err(self.error_at(pos, "assertion head must be an atom".into()));
                }
                let pre = if self.eat(&Tok::Colon) { self.conj()? } else { Vec::new() };
                let post = if self.eat(&Tok::Arrow) { self.conj()? } else { Vec::new() };
                src.assertions.push(SAssertion { head, pre: strip_true(pre), post: strip_true(post), pos });
            }
            other => return Err(self.error_at(pos, format!("unknown declaration `{other}`"))),
        }
        self.expect(Tok::End)
    }

    /// `PI` or `(PI, ...)` or `([PI, ...])`.
    fn indicators_arg(&mut self) -> Result<Vec<Indicator>, LoadError> {
        if self.eat(&Tok::LParen) {
            let list = if self.peek() == Some(&Tok::LBracket) {
                self.indicator_list()?
            } else {
                let mut v = vec![self.indicator()?];
                while self.eat(&Tok::Comma) {
                    v.push(self.indicator()?);
                }
                v
            };
            self.expect(Tok::RParen)?;
            Ok(list)
        } else {
            let mut v = vec![self.indicator()?];
            while self.eat(&Tok::Comma) {
                v.push(self.indicator()?);
            }
            Ok(v)
        }
    }

    fn indicator(&mut self) -> Result<Indicator, LoadError> {
        let name = self.atom()?;
        self.expect(Tok::Slash)?;
        let pos = self.pos();
        match self.next()? {
            Tok::Int(n) if n >= 0 => Ok(Indicator { name, arity: n as u32 }),
            other => Err(self.error_at(pos, format!("expected an arity, found {}", other.describe()))),
        }
    }

    fn indicator_list(&mut self) -> Result<Vec<Indicator>, LoadError> {
        self.expect(Tok::LBracket)?;
        let mut out = Vec::new();
        if self.eat(&Tok::RBracket) {
            return Ok(out);
        }
        loop {
            out.push(self.indicator()?);
            if self.eat(&Tok::RBracket) {
                return Ok(out);
            }
            self.expect(Tok::Comma)?;
        }
    }

    fn conj(&mut self) -> Result<Vec<STerm>, LoadError> {
        let mut goals = vec![self.goal()?];
        while self.eat(&Tok::Comma) {
            goals.push(self.goal()?);
        }
        Ok(goals)
    }

    fn goal(&mut self) -> Result<STerm, LoadError> {
        let lhs = self.term()?;
        if let Some(Tok::Op(op)) = self.peek() {
            let op = *op;
            self.at += 1;
            let rhs = self.term()?;
            return Ok(STerm::App(op.to_string(), vec![lhs, rhs]));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<STerm, LoadError> {
        let pos = self.pos();
        match self.next()? {
            Tok::Var(v) => Ok(STerm::Var(v)),
            Tok::Int(i) => Ok(STerm::Int(i)),
            Tok::Atom(name) => {
                if self.eat(&Tok::LParen) {
                    let mut args = vec![self.goal()?];
                    while self.eat(&Tok::Comma) {
                        args.push(self.goal()?);
                    }
                    self.expect(Tok::RParen)?;
                    Ok(STerm::App(name, args))
                } else {
                    Ok(STerm::App(name, Vec::new()))
                }
            }
            Tok::LParen => {
                let mut alts = vec![fold_conj(self.conj()?)];
                while self.eat(&Tok::Semi) {
                    alts.push(fold_conj(self.conj()?));
                }
                self.expect(Tok::RParen)?;
                let last = alts.pop().unwrap();
                Ok(alts.into_iter().rev().fold(last, |acc, a| STerm::App(";".into(), vec![a, acc])))
            }
            other => Err(self.error_at(pos, format!("unexpected {}", other.describe()))),
        }
    }
}

fn fold_conj(mut goals: Vec<STerm>) -> STerm {
    let last = goals.pop().unwrap();
    goals.into_iter().rev().fold(last, |acc, g| STerm::App(",".into(), vec![g, acc]))
}

/// Flattens `','/2` nesting into a list.
pub(crate) fn unfold_conj(t: &STerm, out: &mut Vec<STerm>) {
    match t {
        STerm::App(name, args) if name == "," && args.len() == 2 => {
            unfold_conj(&args[0], out);
            unfold_conj(&args[1], out);
        }
        STerm::App(name, args) if name == "true" && args.is_empty() => {}
        other => out.push(other.clone()),
    }
}

fn strip_true(goals: Vec<STerm>) -> Vec<STerm> {
    goals.into_iter().filter(|g| !matches!(g, STerm::App(n, a) if n == "true" && a.is_empty())).collect()
}

fn is_reserved(name: &str) -> bool {
    matches!(name, "," | ";" | "=" | "<" | ">" | "=<" | ">=" | "=:=")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_module() {
        let m = parse_module(":- module(m,[]).").unwrap();
        assert_eq!(m.name, "m");
        assert!(m.exports.is_empty() && m.imports.is_empty() && m.hidden.is_empty());
        assert!(m.clauses.is_empty() && m.assertions.is_empty() && m.regtypes.is_empty());
    }

    #[test]
    fn point_example() {
        let text = ":- module(m1, [p/1, r/0]).\n:- hide point/1.\np(A) :- A = point(B), B = 1.\n:- use_module(m2,[q/1]).\nr :- X = point(2), q(X).\n";
        let m = parse_module(text).unwrap();
        assert_eq!(m.exports, [Indicator::new("p", 1), Indicator::new("r", 0)].into_iter().collect());
        assert_eq!(m.hidden, [Indicator::new("point", 1)].into_iter().collect());
        let imp = &m.imports["m2"];
        assert_eq!(imp.preds.as_ref().unwrap(), &[Indicator::new("q", 1)].into_iter().collect());
        assert_eq!(m.clauses.len(), 2);
        assert_eq!(m.clauses[0].body[0], STerm::app("=", vec![STerm::var("A"), STerm::app("point", vec![STerm::var("B")])]));
    }

    #[test]
    fn assertion_parts() {
        let m = parse_module(
            ":- module(m, [p/2]).\n:- pred p(X, Y) : int(X) => int(X), int(Y).\n:- pred p(X, Y) => int(Y).\n:- pred p(X,Y) : true.\np(1, 2).",
        )
        .unwrap();
        assert_eq!(m.assertions.len(), 3);
        assert_eq!(m.assertions[0].pre.len(), 1);
        assert_eq!(m.assertions[0].post.len(), 2);
        assert!(m.assertions[1].pre.is_empty());
        assert!(m.assertions[2].pre.is_empty() && m.assertions[2].post.is_empty());
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_module(":- module(m, []).\np(X) :- .").unwrap_err();
        assert_eq!(e.kind, LoadErrorKind::ParseError);
        assert_eq!(e.pos.line, 2);
        let e = parse_module(":- module(m, []).\n:- dynamic p/1.").unwrap_err();
        assert!(e.message.contains("unknown declaration"));
        let e = parse_module("p(1).").unwrap_err();
        assert_eq!(e.pos, Pos { line: 1, col: 1 });
    }

    #[test]
    fn hide_forms() {
        let m = parse_module(":- module(m, []).\n:- hide(empty/0).\n:- hide tree/3.\n:- hide(a/1, b/2).").unwrap();
        assert_eq!(m.hidden.len(), 4);
    }

    #[test]
    fn parenthesised_disjunction() {
        let t = parse_term("f((a, b ; c))", Dialect::Source).unwrap();
        assert_eq!(
            t,
            STerm::app("f", vec![STerm::app(";", vec![STerm::app(",", vec![STerm::atom("a"), STerm::atom("b")]), STerm::atom("c")])])
        );
    }

    #[test]
    fn query_conjunction() {
        let q = parse_query("insert(5, empty, T), peek_root(T, K).").unwrap();
        assert_eq!(q.len(), 2);
        assert!(parse_query("p(X) q").is_err());
    }
}
