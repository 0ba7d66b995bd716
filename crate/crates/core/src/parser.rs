//! Recursive-descent parser for the OCaml-like surface grammar.
//!
//! Deviations from strict OCaml, chosen so the usual tick-annotated listings
//! parse as visually intended:
//!
//! - `if`/`else` and match-arm bodies extend through `;` sequences, so
//!   `else tick(5.0); f(x)` keeps the call inside the else branch;
//! - a list match is complete after its `[]` and `::` arms, so a following
//!   `|` belongs to the enclosing match;
//! - list-literal elements parse at operator precedence (no bare `;`).

use thiserror::Error;

use crate::lexer::{lex, LexError, Tok, Token};
use crate::potential::{Ann, AnnType, ConsumeAnn};
use crate::rational::{parse_q, Q};
use crate::syntax::{BinOp, Span, SurfaceDef, SurfaceExpr, SurfaceKind, SurfaceProgram};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("{span}: {msg}")]
    Syntax { msg: String, span: Span },
}

pub fn parse(src: &str) -> Result<SurfaceProgram, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let mut defs = Vec::new();
    while !p.at(&Tok::Eof) {
        defs.push(p.def()?);
    }
    if defs.is_empty() {
        return Err(ParseError::Syntax { msg: "empty program".into(), span: Span { line: 1, col: 1 } });
    }
    Ok(SurfaceProgram { defs })
}

/// Parse a single expression (used by tests and the repair round-trip).
pub fn parse_expr(src: &str) -> Result<SurfaceExpr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.seq()?;
    p.expect(&Tok::Eof, "end of input")?;
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn at(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.at(t) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), ParseError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.err(&format!("expected {what}")))
        }
    }

    fn err(&self, msg: &str) -> ParseError {
        ParseError::Syntax { msg: format!("{msg}, found {:?}", self.peek()), span: self.span() }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            Tok::Underscore => {
                self.bump();
                Ok("_".to_string())
            }
            _ => Err(self.err(&format!("expected {what}"))),
        }
    }

    fn def(&mut self) -> Result<SurfaceDef, ParseError> {
        let span = self.span();
        self.expect(&Tok::Let, "`let`")?;
        self.eat(&Tok::Rec);
        let name = self.ident("function name")?;
        self.expect(&Tok::LParen, "`(`")?;
        let mut params = vec![self.ident("parameter")?];
        while self.eat(&Tok::Comma) {
            params.push(self.ident("parameter")?);
        }
        self.expect(&Tok::RParen, "`)`")?;
        self.expect(&Tok::Eq, "`=`")?;
        let body = self.seq()?;
        Ok(SurfaceDef { name, params, body, span })
    }

    fn mk(&self, kind: SurfaceKind, span: Span) -> SurfaceExpr {
        SurfaceExpr { kind, span }
    }

    /// `e1 ; e2` desugars to `let _ = e1 in e2`.
    fn seq(&mut self) -> Result<SurfaceExpr, ParseError> {
        let span = self.span();
        let first = self.letlike()?;
        if self.eat(&Tok::Semi) {
            let rest = self.seq()?;
            Ok(self.mk(
                SurfaceKind::Let { name: "_".into(), rhs: Box::new(first), body: Box::new(rest) },
                span,
            ))
        } else {
            Ok(first)
        }
    }

    fn letlike(&mut self) -> Result<SurfaceExpr, ParseError> {
        let span = self.span();
        match self.peek() {
            Tok::Let => {
                self.bump();
                if self.eat(&Tok::Rec) {
                    let name = self.ident("function name")?;
                    self.expect(&Tok::LParen, "`(`")?;
                    let mut params = vec![self.ident("parameter")?];
                    while self.eat(&Tok::Comma) {
                        params.push(self.ident("parameter")?);
                    }
                    self.expect(&Tok::RParen, "`)`")?;
                    self.expect(&Tok::Eq, "`=`")?;
                    let fbody = self.seq()?;
                    self.expect(&Tok::In, "`in`")?;
                    let body = self.seq()?;
                    Ok(self.mk(
                        SurfaceKind::LetRec { name, params, fbody: Box::new(fbody), body: Box::new(body) },
                        span,
                    ))
                } else {
                    let name = self.ident("binder")?;
                    self.expect(&Tok::Eq, "`=`")?;
                    let rhs = self.seq()?;
                    self.expect(&Tok::In, "`in`")?;
                    let body = self.seq()?;
                    Ok(self.mk(SurfaceKind::Let { name, rhs: Box::new(rhs), body: Box::new(body) }, span))
                }
            }
            Tok::Share => {
                self.bump();
                let var = self.ident("shared variable")?;
                self.expect(&Tok::Eq, "`=`")?;
                self.expect(&Tok::LParen, "`(`")?;
                let left = self.ident("first copy")?;
                self.expect(&Tok::Comma, "`,`")?;
                let right = self.ident("second copy")?;
                self.expect(&Tok::RParen, "`)`")?;
                self.expect(&Tok::In, "`in`")?;
                let body = self.seq()?;
                Ok(self.mk(SurfaceKind::Share { var, left, right, body: Box::new(body) }, span))
            }
            Tok::If => {
                self.bump();
                let cond = self.seq()?;
                self.expect(&Tok::Then, "`then`")?;
                let then_branch = self.seq()?;
                self.expect(&Tok::Else, "`else`")?;
                let else_branch = self.seq()?;
                Ok(self.mk(
                    SurfaceKind::If {
                        cond: Box::new(cond),
                        then_branch: Box::new(then_branch),
                        else_branch: Box::new(else_branch),
                    },
                    span,
                ))
            }
            Tok::Match => {
                self.bump();
                let scrut = self.seq()?;
                self.expect(&Tok::With, "`with`")?;
                self.eat(&Tok::Bar);
                self.match_arms(scrut, span)
            }
            _ => self.or_expr(),
        }
    }

    fn match_arms(&mut self, scrut: SurfaceExpr, span: Span) -> Result<SurfaceExpr, ParseError> {
        match self.peek().clone() {
            Tok::LParen => {
                // pair match: single arm `(x, y) -> e`
                self.bump();
                let left = self.ident("pattern variable")?;
                self.expect(&Tok::Comma, "`,`")?;
                let right = self.ident("pattern variable")?;
                self.expect(&Tok::RParen, "`)`")?;
                self.expect(&Tok::Arrow, "`->`")?;
                let body = self.seq()?;
                Ok(self.mk(
                    SurfaceKind::MatchPair { scrut: Box::new(scrut), left, right, body: Box::new(body) },
                    span,
                ))
            }
            Tok::LBracket => {
                // `[] -> e1 | h::t -> e2`
                self.bump();
                self.expect(&Tok::RBracket, "`]`")?;
                self.expect(&Tok::Arrow, "`->`")?;
                let nil_branch = self.seq()?;
                self.expect(&Tok::Bar, "`|` before cons arm")?;
                let head = self.ident("head pattern")?;
                self.expect(&Tok::ColonCons, "`::`")?;
                let tail = self.ident("tail pattern")?;
                self.expect(&Tok::Arrow, "`->`")?;
                let cons_branch = self.seq()?;
                Ok(self.mk(
                    SurfaceKind::MatchList {
                        scrut: Box::new(scrut),
                        nil_branch: Box::new(nil_branch),
                        head,
                        tail,
                        cons_branch: Box::new(cons_branch),
                    },
                    span,
                ))
            }
            Tok::Ident(_) => {
                // `h::t -> e2 | [] -> e1`
                let head = self.ident("head pattern")?;
                self.expect(&Tok::ColonCons, "`::`")?;
                let tail = self.ident("tail pattern")?;
                self.expect(&Tok::Arrow, "`->`")?;
                let cons_branch = self.seq()?;
                self.expect(&Tok::Bar, "`|` before nil arm")?;
                self.expect(&Tok::LBracket, "`[`")?;
                self.expect(&Tok::RBracket, "`]`")?;
                self.expect(&Tok::Arrow, "`->`")?;
                let nil_branch = self.seq()?;
                Ok(self.mk(
                    SurfaceKind::MatchList {
                        scrut: Box::new(scrut),
                        nil_branch: Box::new(nil_branch),
                        head,
                        tail,
                        cons_branch: Box::new(cons_branch),
                    },
                    span,
                ))
            }
            _ => Err(self.err("expected a match arm pattern")),
        }
    }

    fn or_expr(&mut self) -> Result<SurfaceExpr, ParseError> {
        let span = self.span();
        let mut e = self.and_expr()?;
        while self.at(&Tok::Or) {
            self.bump();
            let rhs = self.and_expr()?;
            e = self.mk(SurfaceKind::Bin(BinOp::Or, Box::new(e), Box::new(rhs)), span);
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<SurfaceExpr, ParseError> {
        let span = self.span();
        let mut e = self.cmp_expr()?;
        while self.at(&Tok::And) {
            self.bump();
            let rhs = self.cmp_expr()?;
            e = self.mk(SurfaceKind::Bin(BinOp::And, Box::new(e), Box::new(rhs)), span);
        }
        Ok(e)
    }

    fn cmp_expr(&mut self) -> Result<SurfaceExpr, ParseError> {
        let span = self.span();
        let e = self.cons_expr()?;
        let op = match self.peek() {
            Tok::Eq => Some(BinOp::Eq),
            Tok::Ne => Some(BinOp::Ne),
            Tok::Lt => Some(BinOp::Lt),
            Tok::Gt => Some(BinOp::Gt),
            Tok::Le => Some(BinOp::Le),
            Tok::Ge => Some(BinOp::Ge),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let rhs = self.cons_expr()?;
            Ok(self.mk(SurfaceKind::Bin(op, Box::new(e), Box::new(rhs)), span))
        } else {
            Ok(e)
        }
    }

    fn cons_expr(&mut self) -> Result<SurfaceExpr, ParseError> {
        let span = self.span();
        let head = self.add_expr()?;
        if self.eat(&Tok::ColonCons) {
            let tail = self.cons_expr()?;
            Ok(self.mk(SurfaceKind::Cons(Box::new(head), Box::new(tail)), span))
        } else {
            Ok(head)
        }
    }

    fn add_expr(&mut self) -> Result<SurfaceExpr, ParseError> {
        let span = self.span();
        let mut e = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.mul_expr()?;
            e = self.mk(SurfaceKind::Bin(op, Box::new(e), Box::new(rhs)), span);
        }
        Ok(e)
    }

    fn mul_expr(&mut self) -> Result<SurfaceExpr, ParseError> {
        let span = self.span();
        let mut e = self.atom()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Div => BinOp::Div,
                Tok::Mod => BinOp::Mod,
                _ => break,
            };
            self.bump();
            let rhs = self.atom()?;
            e = self.mk(SurfaceKind::Bin(op, Box::new(e), Box::new(rhs)), span);
        }
        Ok(e)
    }

    fn qlit(&mut self) -> Result<Q, ParseError> {
        let neg = self.eat(&Tok::Minus);
        let mut text = match self.bump().tok {
            Tok::Int(n) => n.to_string(),
            Tok::Decimal(d) => d,
            _ => return Err(self.err("expected a numeric literal")),
        };
        if self.eat(&Tok::Slash) {
            match self.bump().tok {
                Tok::Int(n) => text = format!("{text}/{n}"),
                _ => return Err(self.err("expected denominator")),
            }
        }
        let q = parse_q(&text).ok_or_else(|| self.err("bad numeric literal"))?;
        Ok(if neg { -q } else { q })
    }

    fn atom(&mut self) -> Result<SurfaceExpr, ParseError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                if self.eat(&Tok::RParen) {
                    return Ok(self.mk(SurfaceKind::Unit, span));
                }
                let first = self.seq()?;
                if self.eat(&Tok::Comma) {
                    let second = self.seq()?;
                    self.expect(&Tok::RParen, "`)`")?;
                    Ok(self.mk(SurfaceKind::Pair(Box::new(first), Box::new(second)), span))
                } else {
                    self.expect(&Tok::RParen, "`)`")?;
                    Ok(first)
                }
            }
            Tok::LBracket => {
                self.bump();
                let mut elems = Vec::new();
                if !self.at(&Tok::RBracket) {
                    elems.push(self.or_expr()?);
                    while self.eat(&Tok::Semi) {
                        elems.push(self.or_expr()?);
                    }
                }
                self.expect(&Tok::RBracket, "`]`")?;
                if elems.is_empty() {
                    Ok(self.mk(SurfaceKind::Nil, span))
                } else {
                    Ok(self.mk(SurfaceKind::ListLit(elems), span))
                }
            }
            Tok::True => {
                self.bump();
                Ok(self.mk(SurfaceKind::Bool(true), span))
            }
            Tok::False => {
                self.bump();
                Ok(self.mk(SurfaceKind::Bool(false), span))
            }
            Tok::Int(n) => {
                self.bump();
                Ok(self.mk(SurfaceKind::Int(n), span))
            }
            Tok::Minus => {
                // unary minus: integer literals only
                if let Tok::Int(_) = self.peek2() {
                    self.bump();
                    if let Tok::Int(n) = self.bump().tok {
                        Ok(self.mk(SurfaceKind::Int(-n), span))
                    } else {
                        unreachable!()
                    }
                } else {
                    Err(self.err("unary minus applies to integer literals only"))
                }
            }
            Tok::Tick => {
                self.bump();
                self.expect(&Tok::LParen, "`(`")?;
                let q = self.qlit()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(self.mk(SurfaceKind::Tick(q), span))
            }
            Tok::Consume => {
                self.bump();
                if self.eat(&Tok::LBracket) {
                    // consume[(A, p)](x) — elaborated form
                    self.expect(&Tok::LParen, "`(`")?;
                    let ann_type = self.anntype()?;
                    self.expect(&Tok::Comma, "`,`")?;
                    let constant = self.qlit()?;
                    self.expect(&Tok::RParen, "`)`")?;
                    self.expect(&Tok::RBracket, "`]`")?;
                    self.expect(&Tok::LParen, "`(`")?;
                    let x = self.ident("variable")?;
                    self.expect(&Tok::RParen, "`)`")?;
                    Ok(self.mk(SurfaceKind::Consume(Some(ConsumeAnn { ann_type, constant }), vec![x]), span))
                } else {
                    self.expect(&Tok::LParen, "`(`")?;
                    let mut vars = vec![self.ident("variable")?];
                    while self.eat(&Tok::Comma) {
                        vars.push(self.ident("variable")?);
                    }
                    self.expect(&Tok::RParen, "`)`")?;
                    Ok(self.mk(SurfaceKind::Consume(None, vars), span))
                }
            }
            Tok::Ident(name) => {
                self.bump();
                if self.at(&Tok::LParen) {
                    self.bump();
                    let mut args = Vec::new();
                    if !self.at(&Tok::RParen) {
                        args.push(self.seq()?);
                        while self.eat(&Tok::Comma) {
                            args.push(self.seq()?);
                        }
                    }
                    self.expect(&Tok::RParen, "`)`")?;
                    Ok(self.mk(SurfaceKind::App(name, args), span))
                } else {
                    Ok(self.mk(SurfaceKind::Var(name), span))
                }
            }
            _ => Err(self.err("expected an expression")),
        }
    }

    /// Annotated type inside an elaborated consume: `L^5(int)`, `(A * B)`.
    fn anntype(&mut self) -> Result<AnnType, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "L" => {
                self.bump();
                self.expect(&Tok::Caret, "`^`")?;
                let q = self.qlit()?;
                self.expect(&Tok::LParen, "`(`")?;
                let inner = self.anntype()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(AnnType::List(Ann::Q(q), Box::new(inner)))
            }
            Tok::Ident(s) if s == "int" => {
                self.bump();
                Ok(AnnType::Int)
            }
            Tok::Ident(s) if s == "bool" => {
                self.bump();
                Ok(AnnType::Bool)
            }
            Tok::Ident(s) if s == "unit" => {
                self.bump();
                Ok(AnnType::Unit)
            }
            Tok::LParen => {
                self.bump();
                let a = self.anntype()?;
                self.expect(&Tok::Star, "`*`")?;
                let b = self.anntype()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(AnnType::Pair(Box::new(a), Box::new(b)))
            }
            _ => Err(self.err("expected an annotated type")),
        }
    }
}

// Tests live in tests/parsing.rs alongside normalization, where surface
// sources from the corpus are exercised end to end.

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_identity() {
        let p = parse("let f(x) = x").unwrap();
        assert_eq!(p.defs.len(), 1);
        assert_eq!(p.defs[0].name, "f");
        assert_eq!(p.defs[0].params, vec!["x"]);
        assert!(matches!(&p.defs[0].body.kind, SurfaceKind::Var(v) if v == "x"));
    }

    #[test]
    fn sequence_desugars_to_let() {
        let e = parse_expr("tick(5.0); aux(r,xs,ys)").unwrap();
        match &e.kind {
            SurfaceKind::Let { name, rhs, body } => {
                assert_eq!(name, "_");
                assert!(matches!(&rhs.kind, SurfaceKind::Tick(q) if *q == crate::rational::qint(5)));
                assert!(matches!(&body.kind, SurfaceKind::App(f, args) if f == "aux" && args.len() == 3));
            }
            other => panic!("expected let, got {other:?}"),
        }
    }

    #[test]
    fn else_branch_swallows_sequence() {
        let e = parse_expr("if x = y then tick(5.0); f(xs) else tick(5.0); g(xs)").unwrap();
        match &e.kind {
            SurfaceKind::If { else_branch, .. } => {
                assert!(matches!(&else_branch.kind, SurfaceKind::Let { .. }));
            }
            other => panic!("expected if, got {other:?}"),
        }
    }

    #[test]
    fn nested_match_arms_attach_to_outer() {
        let src = "match h with\n| [] -> match l with | [] -> true | y::ys -> false\n| x::xs -> false";
        let e = parse_expr(src).unwrap();
        match &e.kind {
            SurfaceKind::MatchList { nil_branch, cons_branch, .. } => {
                assert!(matches!(&nil_branch.kind, SurfaceKind::MatchList { .. }));
                assert!(matches!(&cons_branch.kind, SurfaceKind::Bool(false)));
            }
            other => panic!("expected list match, got {other:?}"),
        }
    }

    #[test]
    fn elaborated_consume_roundtrip() {
        let e = parse_expr("consume[(L^5(int), 5)](xs)").unwrap();
        match &e.kind {
            SurfaceKind::Consume(Some(ann), vars) => {
                assert_eq!(vars, &vec!["xs".to_string()]);
                assert_eq!(ann.constant, crate::rational::qint(5));
                assert_eq!(ann.ann_type.to_string(), "L^5(int)");
            }
            other => panic!("expected consume, got {other:?}"),
        }
    }

    #[test]
    fn negative_literals() {
        let e = parse_expr("f(-1, 3 - -2)").unwrap();
        assert!(matches!(&e.kind, SurfaceKind::App(_, args) if args.len() == 2));
    }

    #[test]
    fn error_has_position() {
        let err = parse("let f(x) = ]").unwrap_err();
        match err {
            ParseError::Syntax { span, .. } => assert_eq!(span.line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
