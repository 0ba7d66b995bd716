//! Surface and core abstract syntax.
//!
//! The surface tree mirrors the OCaml-like concrete grammar and allows
//! arbitrary nesting. The core tree is in share-let normal form: every
//! operator, constructor, and application argument is a variable, and
//! multiple uses of a variable are introduced explicitly by `share`.

use num_bigint::BigInt;
use std::collections::BTreeMap;
use std::fmt;

use crate::potential::ConsumeAnn;
use crate::rational::Q;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum BaseType {
    Unit,
    Bool,
    Int,
    List(Box<BaseType>),
    Pair(Box<BaseType>, Box<BaseType>),
}

impl BaseType {
    pub fn is_atom(&self) -> bool {
        matches!(self, BaseType::Unit | BaseType::Bool | BaseType::Int)
    }

    /// Flatten a right-nested pair spine into `n` component types.
    /// A function declared with `n` parameters takes one argument of this shape.
    pub fn components(&self, n: usize) -> Vec<BaseType> {
        let mut out = Vec::with_capacity(n);
        let mut cur = self;
        for _ in 0..n.saturating_sub(1) {
            match cur {
                BaseType::Pair(a, b) => {
                    out.push((**a).clone());
                    cur = b;
                }
                other => {
                    out.push(other.clone());
                    return out;
                }
            }
        }
        out.push(cur.clone());
        out
    }
}

impl fmt::Display for BaseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseType::Unit => write!(f, "unit"),
            BaseType::Bool => write!(f, "bool"),
            BaseType::Int => write!(f, "int"),
            BaseType::List(t) => write!(f, "L({t})"),
            BaseType::Pair(a, b) => write!(f, "({a} * {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunType {
    pub arg: BaseType,
    pub result: BaseType,
}

impl fmt::Display for FunType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.arg, self.result)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Gt,
    Lt,
    Ge,
    Le,
    And,
    Or,
}

impl BinOp {
    pub fn is_bool_op(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ne | BinOp::Gt | BinOp::Lt | BinOp::Ge | BinOp::Le)
    }

    pub fn is_arith(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "div",
            BinOp::Mod => "mod",
            BinOp::Eq => "=",
            BinOp::Ne => "<>",
            BinOp::Gt => ">",
            BinOp::Lt => "<",
            BinOp::Ge => ">=",
            BinOp::Le => "<=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }
}

// ---------------------------------------------------------------------------
// Surface syntax
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SurfaceExpr {
    pub kind: SurfaceKind,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub enum SurfaceKind {
    Unit,
    Bool(bool),
    Int(BigInt),
    Var(String),
    Bin(BinOp, Box<SurfaceExpr>, Box<SurfaceExpr>),
    App(String, Vec<SurfaceExpr>),
    Let {
        name: String,
        rhs: Box<SurfaceExpr>,
        body: Box<SurfaceExpr>,
    },
    /// Nested function definition; lifted to the top level by normalization.
    LetRec {
        name: String,
        params: Vec<String>,
        fbody: Box<SurfaceExpr>,
        body: Box<SurfaceExpr>,
    },
    If {
        cond: Box<SurfaceExpr>,
        then_branch: Box<SurfaceExpr>,
        else_branch: Box<SurfaceExpr>,
    },
    Pair(Box<SurfaceExpr>, Box<SurfaceExpr>),
    MatchPair {
        scrut: Box<SurfaceExpr>,
        left: String,
        right: String,
        body: Box<SurfaceExpr>,
    },
    Nil,
    Cons(Box<SurfaceExpr>, Box<SurfaceExpr>),
    /// `[e1; ...; en]` sugar for a cons chain.
    ListLit(Vec<SurfaceExpr>),
    MatchList {
        scrut: Box<SurfaceExpr>,
        nil_branch: Box<SurfaceExpr>,
        head: String,
        tail: String,
        cons_branch: Box<SurfaceExpr>,
    },
    Share {
        var: String,
        left: String,
        right: String,
        body: Box<SurfaceExpr>,
    },
    Tick(Q),
    /// `consume(x1,...,xn)`, annotation optional (filled by repair).
    Consume(Option<ConsumeAnn>, Vec<String>),
}

#[derive(Debug, Clone)]
pub struct SurfaceDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: SurfaceExpr,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct SurfaceProgram {
    pub defs: Vec<SurfaceDef>,
}

// ---------------------------------------------------------------------------
// Core syntax (share-let normal form)
// ---------------------------------------------------------------------------

pub type NodeId = u32;

#[derive(Debug, Clone)]
pub struct CoreExpr {
    pub id: NodeId,
    pub kind: CoreKind,
}

#[derive(Debug, Clone)]
pub enum CoreKind {
    Unit,
    Bool(bool),
    Int(BigInt),
    Var(String),
    Bin(BinOp, String, String),
    App(String, String),
    If(String, Box<CoreExpr>, Box<CoreExpr>),
    Let(String, Box<CoreExpr>, Box<CoreExpr>),
    Pair(String, String),
    MatchPair {
        scrut: String,
        left: String,
        right: String,
        body: Box<CoreExpr>,
    },
    Nil,
    Cons(String, String),
    MatchList {
        scrut: String,
        nil_branch: Box<CoreExpr>,
        head: String,
        tail: String,
        cons_branch: Box<CoreExpr>,
    },
    Share {
        var: String,
        left: String,
        right: String,
        body: Box<CoreExpr>,
    },
    Tick(Q),
    Consume(Option<ConsumeAnn>, String),
}

impl CoreExpr {
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a CoreExpr)) {
        f(self);
        match &self.kind {
            CoreKind::If(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            CoreKind::Let(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            CoreKind::MatchPair { body, .. } => body.walk(f),
            CoreKind::MatchList { nil_branch, cons_branch, .. } => {
                nil_branch.walk(f);
                cons_branch.walk(f);
            }
            CoreKind::Share { body, .. } => body.walk(f),
            _ => {}
        }
    }

    /// Free variables, in first-occurrence order.
    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut bound: Vec<String> = Vec::new();
        self.collect_free(&mut bound, &mut out);
        out
    }

    fn note_free(name: &str, bound: &[String], out: &mut Vec<String>) {
        if !bound.iter().any(|b| b == name) && !out.iter().any(|o| o == name) {
            out.push(name.to_string());
        }
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut Vec<String>) {
        match &self.kind {
            CoreKind::Unit | CoreKind::Bool(_) | CoreKind::Int(_) | CoreKind::Nil | CoreKind::Tick(_) => {}
            CoreKind::Var(x) => Self::note_free(x, bound, out),
            CoreKind::Bin(_, a, b) | CoreKind::Pair(a, b) | CoreKind::Cons(a, b) => {
                Self::note_free(a, bound, out);
                Self::note_free(b, bound, out);
            }
            CoreKind::App(_, x) | CoreKind::Consume(_, x) => Self::note_free(x, bound, out),
            CoreKind::If(c, t, e) => {
                Self::note_free(c, bound, out);
                t.collect_free(bound, out);
                e.collect_free(bound, out);
            }
            CoreKind::Let(x, rhs, body) => {
                rhs.collect_free(bound, out);
                bound.push(x.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            CoreKind::MatchPair { scrut, left, right, body } => {
                Self::note_free(scrut, bound, out);
                bound.push(left.clone());
                bound.push(right.clone());
                body.collect_free(bound, out);
                bound.pop();
                bound.pop();
            }
            CoreKind::MatchList { scrut, nil_branch, head, tail, cons_branch } => {
                Self::note_free(scrut, bound, out);
                nil_branch.collect_free(bound, out);
                bound.push(head.clone());
                bound.push(tail.clone());
                cons_branch.collect_free(bound, out);
                bound.pop();
                bound.pop();
            }
            CoreKind::Share { var, left, right, body } => {
                Self::note_free(var, bound, out);
                bound.push(left.clone());
                bound.push(right.clone());
                body.collect_free(bound, out);
                bound.pop();
                bound.pop();
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FunDef {
    /// The single (possibly tuple-shaped) formal argument of the core form.
    pub arg: String,
    /// Original surface parameter names, in order.
    pub params: Vec<String>,
    pub body: CoreExpr,
}

/// Ordered mapping of function definitions; entry is the last unless named.
#[derive(Debug, Clone, Default)]
pub struct Program {
    pub order: Vec<String>,
    pub defs: BTreeMap<String, FunDef>,
}

impl Program {
    pub fn get(&self, name: &str) -> Option<&FunDef> {
        self.defs.get(name)
    }

    pub fn entry(&self) -> Option<&str> {
        self.order.last().map(|s| s.as_str())
    }
}

// ---------------------------------------------------------------------------
// Core pretty-printer
// ---------------------------------------------------------------------------

pub fn pretty_core(e: &CoreExpr, indent: usize) -> String {
    let mut s = String::new();
    write_core(e, indent, &mut s);
    s
}

fn pad(n: usize, s: &mut String) {
    for _ in 0..n {
        s.push(' ');
    }
}

fn write_core(e: &CoreExpr, ind: usize, s: &mut String) {
    use std::fmt::Write;
    match &e.kind {
        CoreKind::Unit => s.push_str("()"),
        CoreKind::Bool(b) => {
            let _ = write!(s, "{b}");
        }
        CoreKind::Int(n) => {
            let _ = write!(s, "{n}");
        }
        CoreKind::Var(x) => s.push_str(x),
        CoreKind::Bin(op, a, b) => {
            let _ = write!(s, "{a} {} {b}", op.symbol());
        }
        CoreKind::App(f, x) => {
            let _ = write!(s, "{f}({x})");
        }
        CoreKind::Pair(a, b) => {
            let _ = write!(s, "({a}, {b})");
        }
        CoreKind::Nil => s.push_str("[]"),
        CoreKind::Cons(h, t) => {
            let _ = write!(s, "{h}::{t}");
        }
        CoreKind::Tick(q) => {
            let _ = write!(s, "tick({})", crate::rational::q_pretty(q));
        }
        CoreKind::Consume(ann, x) => match ann {
            None => {
                let _ = write!(s, "consume({x})");
            }
            Some(a) => {
                let _ = write!(s, "consume[({}, {})]({x})", a.ann_type, crate::rational::q_pretty(&a.constant));
            }
        },
        CoreKind::Let(x, rhs, body) => {
            let _ = write!(s, "let {x} = ");
            write_core(rhs, ind, s);
            s.push_str(" in\n");
            pad(ind, s);
            write_core(body, ind, s);
        }
        CoreKind::If(c, t, f) => {
            let _ = write!(s, "if {c} then\n");
            pad(ind + 2, s);
            write_core(t, ind + 2, s);
            s.push('\n');
            pad(ind, s);
            s.push_str("else\n");
            pad(ind + 2, s);
            write_core(f, ind + 2, s);
        }
        CoreKind::MatchPair { scrut, left, right, body } => {
            let _ = write!(s, "match {scrut} with ({left}, {right}) ->\n");
            pad(ind + 2, s);
            write_core(body, ind + 2, s);
        }
        CoreKind::MatchList { scrut, nil_branch, head, tail, cons_branch } => {
            let _ = write!(s, "match {scrut} with\n");
            pad(ind, s);
            s.push_str("| [] ->\n");
            pad(ind + 2, s);
            write_core(nil_branch, ind + 2, s);
            s.push('\n');
            pad(ind, s);
            let _ = write!(s, "| {head}::{tail} ->\n");
            pad(ind + 2, s);
            write_core(cons_branch, ind + 2, s);
        }
        CoreKind::Share { var, left, right, body } => {
            let _ = write!(s, "share {var} = ({left}, {right}) in\n");
            pad(ind, s);
            write_core(body, ind, s);
        }
    }
}

pub fn pretty_program(p: &Program) -> String {
    let mut s = String::new();
    for name in &p.order {
        let def = &p.defs[name];
        s.push_str(&format!("let rec {}({}) =\n  ", name, def.params.join(",")));
        // The body of a multi-parameter function opens with the tuple
        // destructuring produced by normalization; print it as-is.
        s.push_str(&pretty_core(&def.body, 2));
        s.push_str("\n\n");
    }
    s
}
