//! Prefix s-expression syntax for formulas.
//!
//! ```text
//! (atom p) | p
//! (not f) (and f g ...) (or f g ...) (implies f g) (implies_prod f g)
//! (box REL f) (diamond REL f)
//! (K f) = (box epistemic f)     (K a f) = (box epistemic:a f)
//! (G f) = (box temporal f)      (F f)   = (diamond temporal f)
//! ```

use std::fmt;

use crate::error::{Error, Result};

pub const TEMPORAL: &str = "temporal";
pub const EPISTEMIC: &str = "epistemic";

/// Formula tree with names still unresolved.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Atom(String),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Implies(Box<Expr>, Box<Expr>),
    ImpliesProd(Box<Expr>, Box<Expr>),
    Box(String, Box<Expr>),
    Diamond(String, Box<Expr>),
}

impl Expr {
    pub fn atom(name: &str) -> Expr {
        Expr::Atom(name.to_string())
    }

    pub fn not(f: Expr) -> Expr {
        Expr::Not(Box::new(f))
    }

    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Expr, b: Expr) -> Expr {
        Expr::Implies(Box::new(a), Box::new(b))
    }

    pub fn boxed(rel: &str, f: Expr) -> Expr {
        Expr::Box(rel.to_string(), Box::new(f))
    }

    pub fn diamond(rel: &str, f: Expr) -> Expr {
        Expr::Diamond(rel.to_string(), Box::new(f))
    }

    /// Operator nesting depth; atoms have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Atom(_) => 0,
            Expr::Not(f) | Expr::Box(_, f) | Expr::Diamond(_, f) => 1 + f.depth(),
            Expr::And(a, b) | Expr::Or(a, b) | Expr::Implies(a, b) | Expr::ImpliesProd(a, b) => {
                1 + a.depth().max(b.depth())
            }
        }
    }

    pub fn atoms(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Atom(p) = e {
                out.push(p.as_str());
            }
        });
        out
    }

    pub fn relations(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Box(r, _) | Expr::Diamond(r, _) = e {
                out.push(r.as_str());
            }
        });
        out
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Atom(_) => {}
            Expr::Not(x) | Expr::Box(_, x) | Expr::Diamond(_, x) => x.visit(f),
            Expr::And(a, b) | Expr::Or(a, b) | Expr::Implies(a, b) | Expr::ImpliesProd(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Atom(p) => write!(f, "(atom {p})"),
            Expr::Not(x) => write!(f, "(not {x})"),
            Expr::And(a, b) => write!(f, "(and {a} {b})"),
            Expr::Or(a, b) => write!(f, "(or {a} {b})"),
            Expr::Implies(a, b) => write!(f, "(implies {a} {b})"),
            Expr::ImpliesProd(a, b) => write!(f, "(implies_prod {a} {b})"),
            Expr::Box(r, x) => write!(f, "(box {r} {x})"),
            Expr::Diamond(r, x) => write!(f, "(diamond {r} {x})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token<'a> {
    Open,
    Close,
    Symbol(&'a str),
}

fn tokenize(src: &str) -> Vec<(usize, Token<'_>)> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'(' {
            out.push((i, Token::Open));
            i += 1;
        } else if c == b')' {
            out.push((i, Token::Close));
            i += 1;
        } else {
            let start = i;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'(' && bytes[i] != b')' {
                i += 1;
            }
            out.push((start, Token::Symbol(&src[start..i])));
        }
    }
    out
}

#[derive(Debug)]
enum Sexp<'a> {
    Symbol(usize, &'a str),
    List(usize, Vec<Sexp<'a>>),
}

impl Sexp<'_> {
    fn offset(&self) -> usize {
        match self {
            Sexp::Symbol(o, _) | Sexp::List(o, _) => *o,
        }
    }
}

fn err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse { offset, message: message.into() }
}

fn read<'a>(tokens: &[(usize, Token<'a>)], pos: &mut usize) -> Result<Sexp<'a>> {
    let Some((offset, tok)) = tokens.get(*pos).cloned() else {
        return Err(err(tokens.last().map_or(0, |t| t.0), "unexpected end of input"));
    };
    *pos += 1;
    match tok {
        Token::Symbol(s) => Ok(Sexp::Symbol(offset, s)),
        Token::Close => Err(err(offset, "unexpected `)`")),
        Token::Open => {
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos) {
                    None => return Err(err(offset, "unclosed `(`")),
                    Some((_, Token::Close)) => {
                        *pos += 1;
                        return Ok(Sexp::List(offset, items));
                    }
                    Some(_) => items.push(read(tokens, pos)?),
                }
            }
        }
    }
}

pub fn parse(src: &str) -> Result<Expr> {
    let tokens = tokenize(src);
    if tokens.is_empty() {
        return Err(err(0, "empty formula"));
    }
    let mut pos = 0;
    let sexp = read(&tokens, &mut pos)?;
    if let Some((offset, _)) = tokens.get(pos) {
        return Err(err(*offset, "trailing input after formula"));
    }
    to_expr(&sexp)
}

fn name<'a>(s: &Sexp<'a>, what: &str) -> Result<&'a str> {
    match s {
        Sexp::Symbol(_, n) => Ok(n),
        Sexp::List(o, _) => Err(err(*o, format!("expected {what} name"))),
    }
}

fn to_expr(s: &Sexp<'_>) -> Result<Expr> {
    let (offset, items) = match s {
        Sexp::Symbol(_, p) => return Ok(Expr::Atom(p.to_string())),
        Sexp::List(o, items) => (*o, items),
    };
    let Some((head, args)) = items.split_first() else {
        return Err(err(offset, "empty list"));
    };
    let op = name(head, "operator")?;
    let arity = |n: usize| -> Result<()> {
        if args.len() == n {
            Ok(())
        } else {
            Err(err(offset, format!("`{op}` takes {n} argument(s), got {}", args.len())))
        }
    };
    let sub = |i: usize| -> Result<Box<Expr>> { Ok(Box::new(to_expr(&args[i])?)) };
    match op {
        "atom" => {
            arity(1)?;
            Ok(Expr::Atom(name(&args[0], "proposition")?.to_string()))
        }
        "not" => {
            arity(1)?;
            Ok(Expr::Not(sub(0)?))
        }
        "and" | "or" => {
            if args.len() < 2 {
                return Err(err(offset, format!("`{op}` takes at least 2 arguments")));
            }
            let mut acc = to_expr(&args[0])?;
            for a in &args[1..] {
                let rhs = Box::new(to_expr(a)?);
                acc = if op == "and" { Expr::And(Box::new(acc), rhs) } else { Expr::Or(Box::new(acc), rhs) };
            }
            Ok(acc)
        }
        "implies" => {
            arity(2)?;
            Ok(Expr::Implies(sub(0)?, sub(1)?))
        }
        "implies_prod" => {
            arity(2)?;
            Ok(Expr::ImpliesProd(sub(0)?, sub(1)?))
        }
        "box" | "diamond" => {
            arity(2)?;
            let rel = name(&args[0], "relation")?.to_string();
            let body = sub(1)?;
            Ok(if op == "box" { Expr::Box(rel, body) } else { Expr::Diamond(rel, body) })
        }
        "K" => match args.len() {
            1 => Ok(Expr::Box(EPISTEMIC.to_string(), sub(0)?)),
            2 => {
                let agent = name(&args[0], "agent")?;
                Ok(Expr::Box(format!("{EPISTEMIC}:{agent}"), sub(1)?))
            }
            n => Err(err(offset, format!("`K` takes 1 or 2 arguments, got {n}"))),
        },
        "G" => {
            arity(1)?;
            Ok(Expr::Box(TEMPORAL.to_string(), sub(0)?))
        }
        "F" => {
            arity(1)?;
            Ok(Expr::Diamond(TEMPORAL.to_string(), sub(0)?))
        }
        other => Err(err(head.offset(), format!("unknown operator `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_examples() {
        assert_eq!(
            parse("(box temporal (atom isOnline))").unwrap(),
            Expr::boxed("temporal", Expr::atom("isOnline"))
        );
        assert_eq!(
            parse("(diamond epistemic:A (atom p))").unwrap(),
            Expr::diamond("epistemic:A", Expr::atom("p"))
        );
        assert_eq!(
            parse("(implies (atom a) (atom b))").unwrap(),
            Expr::implies(Expr::atom("a"), Expr::atom("b"))
        );
    }

    #[test]
    fn aliases_expand() {
        assert_eq!(parse("(G p)").unwrap(), Expr::boxed("temporal", Expr::atom("p")));
        assert_eq!(parse("(F p)").unwrap(), Expr::diamond("temporal", Expr::atom("p")));
        assert_eq!(parse("(K a p)").unwrap(), Expr::boxed("epistemic:a", Expr::atom("p")));
        assert_eq!(
            parse("(K (G isOnline))").unwrap(),
            Expr::boxed("epistemic", Expr::boxed("temporal", Expr::atom("isOnline")))
        );
    }

    #[test]
    fn nary_and_folds_left() {
        let e = parse("(and a b c)").unwrap();
        assert_eq!(e, Expr::and(Expr::and(Expr::atom("a"), Expr::atom("b")), Expr::atom("c")));
        assert_eq!(e.depth(), 2);
    }

    #[test]
    fn display_round_trips() {
        let src = "(implies (and (atom a) (not (atom b))) (diamond r (implies_prod (atom c) (atom d))))";
        let e = parse(src).unwrap();
        assert_eq!(e.to_string(), src);
        assert_eq!(parse(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn errors_carry_offsets() {
        for bad in ["", "(", "(and a)", "(box r)", "(frob a b)", "(atom a) b", ")", "(not a b)", "()"] {
            assert!(matches!(parse(bad), Err(Error::Parse { .. })), "{bad:?}");
        }
        match parse("(and a (frob b))") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn collects_names() {
        let e = parse("(K a (F (or p q)))").unwrap();
        assert_eq!(e.atoms(), vec!["p", "q"]);
        assert_eq!(e.relations(), vec!["epistemic:a", "temporal"]);
    }
}
