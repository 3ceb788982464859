use crate::error::Pos;

use super::ast::Dialect;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Atom(String),
    Var(String),
    Int(i64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Bar,
    Colon,
    Slash,
    Neck,  // :-
    Arrow, // =>
    /// Comparison and equality operators.
    Op(&'static str),
    End,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Atom(a) => format!("atom `{a}`"),
            Tok::Var(v) => format!("variable `{v}`"),
            Tok::Int(i) => format!("integer `{i}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Neck => "`:-`".into(),
            Tok::Arrow => "`=>`".into(),
            Tok::Op(o) => format!("`{o}`"),
            Tok::End => "end `.`".into(),
        }
    }
}

#[derive(Debug)]
pub struct LexError {
    pub pos: Pos,
    pub message: String,
}

pub fn tokenize(text: &str, dialect: Dialect) -> Result<Vec<(Tok, Pos)>, LexError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let ident_char = |c: char| c.is_ascii_alphanumeric() || c == '_' || (dialect == Dialect::Generated && (c == '$' || c == '#'));
    macro_rules! advance {
        ($n:expr) => {{
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        let next = chars.get(i + 1).copied();
        if c.is_whitespace() {
            advance!(1);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                advance!(1);
            }
            continue;
        }
        if c == '/' && next == Some('*') {
            advance!(2);
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                advance!(1);
            }
            if i >= chars.len() {
                return Err(LexError { pos, message: "unterminated block comment".into() });
            }
            advance!(2);
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && next.is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            advance!(1);
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance!(1);
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<i64>().map_err(|_| LexError { pos, message: format!("integer out of range: {s}") })?;
            out.push((Tok::Int(v), pos));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && ident_char(chars[i]) {
                advance!(1);
            }
            let s: String = chars[start..i].iter().collect();
            if c.is_ascii_uppercase() || c == '_' {
                out.push((Tok::Var(s), pos));
            } else {
                out.push((Tok::Atom(s), pos));
            }
            continue;
        }
        let three: String = chars[i..(i + 3).min(chars.len())].iter().collect();
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let (tok, len) = if three == "=:=" {
            (Tok::Op("=:="), 3)
        } else if two == ":-" {
            (Tok::Neck, 2)
        } else if two == "=>" {
            (Tok::Arrow, 2)
        } else if two == "=<" {
            (Tok::Op("=<"), 2)
        } else if two == ">=" {
            (Tok::Op(">="), 2)
        } else {
            let t = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                ',' => Tok::Comma,
                ';' => Tok::Semi,
                '|' => Tok::Bar,
                ':' => Tok::Colon,
                '/' => Tok::Slash,
                '=' => Tok::Op("="),
                '<' => Tok::Op("<"),
                '>' => Tok::Op(">"),
                '.' => {
                    if next.is_none_or(|n| n.is_whitespace() || n == '%') {
                        Tok::End
                    } else {
                        return Err(LexError { pos, message: "unexpected `.`".into() });
                    }
                }
                other => return Err(LexError { pos, message: format!("unexpected character `{other}`") }),
            };
            (t, 1)
        };
        advance!(len);
        out.push((tok, pos));
    }
    Ok(out)
}
