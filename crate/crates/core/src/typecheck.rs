//! Base type checking. The surface grammar carries no type annotations, so
//! monomorphic types are inferred by unification; type variables still
//! unconstrained after the whole program default to `int`.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::syntax::{BaseType, CoreExpr, CoreKind, FunType, NodeId, Program};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("in `{fun}`: type mismatch: expected {expected}, found {found}")]
    Mismatch { fun: String, expected: String, found: String },
    #[error("in `{fun}`: unbound variable `{name}`")]
    Unbound { fun: String, name: String },
    #[error("in `{fun}`: unknown function `{name}`")]
    UnknownFunction { fun: String, name: String },
    #[error("in `{fun}`: infinite type via `{name}`")]
    Occurs { fun: String, name: String },
}

#[derive(Debug, Clone)]
pub struct TypedProgram {
    pub program: Program,
    pub fun_types: BTreeMap<String, FunType>,
    pub node_types: HashMap<NodeId, BaseType>,
}

impl TypedProgram {
    /// Component base types of a function's surface parameters.
    pub fn param_types(&self, f: &str) -> Option<Vec<BaseType>> {
        let def = self.program.get(f)?;
        let ft = self.fun_types.get(f)?;
        Some(ft.arg.components(def.params.len()))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Ty {
    Unit,
    Bool,
    Int,
    List(Box<Ty>),
    Pair(Box<Ty>, Box<Ty>),
    Var(u32),
}

struct Uf {
    slots: Vec<Option<Ty>>,
}

impl Uf {
    fn fresh(&mut self) -> Ty {
        self.slots.push(None);
        Ty::Var((self.slots.len() - 1) as u32)
    }

    fn find(&self, t: &Ty) -> Ty {
        match t {
            Ty::Var(v) => match &self.slots[*v as usize] {
                Some(inner) => self.find(&inner.clone()),
                None => t.clone(),
            },
            other => other.clone(),
        }
    }

    fn occurs(&self, v: u32, t: &Ty) -> bool {
        match self.find(t) {
            Ty::Var(w) => w == v,
            Ty::List(e) => self.occurs(v, &e),
            Ty::Pair(a, b) => self.occurs(v, &a) || self.occurs(v, &b),
            _ => false,
        }
    }

    fn unify(&mut self, a: &Ty, b: &Ty) -> Result<(), (Ty, Ty)> {
        let ra = self.find(a);
        let rb = self.find(b);
        match (&ra, &rb) {
            (Ty::Var(v), _) => {
                if let Ty::Var(w) = rb {
                    if w == *v {
                        return Ok(());
                    }
                }
                if self.occurs(*v, &rb) {
                    return Err((ra, rb));
                }
                self.slots[*v as usize] = Some(rb);
                Ok(())
            }
            (_, Ty::Var(_)) => self.unify(&rb, &ra),
            (Ty::Unit, Ty::Unit) | (Ty::Bool, Ty::Bool) | (Ty::Int, Ty::Int) => Ok(()),
            (Ty::List(x), Ty::List(y)) => self.unify(x, y),
            (Ty::Pair(x1, y1), Ty::Pair(x2, y2)) => {
                self.unify(x1, x2).map_err(|_| (ra.clone(), rb.clone()))?;
                self.unify(y1, y2).map_err(|_| (ra.clone(), rb.clone()))
            }
            _ => Err((ra, rb)),
        }
    }

    /// Resolve fully, defaulting leftover variables to int.
    fn zonk(&self, t: &Ty) -> BaseType {
        match self.find(t) {
            Ty::Unit => BaseType::Unit,
            Ty::Bool => BaseType::Bool,
            Ty::Int => BaseType::Int,
            Ty::Var(_) => BaseType::Int,
            Ty::List(e) => BaseType::List(Box::new(self.zonk(&e))),
            Ty::Pair(a, b) => BaseType::Pair(Box::new(self.zonk(&a)), Box::new(self.zonk(&b))),
        }
    }

    fn show(&self, t: &Ty) -> String {
        match self.find(t) {
            Ty::Unit => "unit".into(),
            Ty::Bool => "bool".into(),
            Ty::Int => "int".into(),
            Ty::Var(v) => format!("'t{v}"),
            Ty::List(e) => format!("L({})", self.show(&e)),
            Ty::Pair(a, b) => format!("({} * {})", self.show(&a), self.show(&b)),
        }
    }
}

fn from_base(b: &BaseType) -> Ty {
    match b {
        BaseType::Unit => Ty::Unit,
        BaseType::Bool => Ty::Bool,
        BaseType::Int => Ty::Int,
        BaseType::List(e) => Ty::List(Box::new(from_base(e))),
        BaseType::Pair(a, b) => Ty::Pair(Box::new(from_base(a)), Box::new(from_base(b))),
    }
}

pub fn typecheck_base(program: Program) -> Result<TypedProgram, TypeError> {
    let mut uf = Uf { slots: Vec::new() };
    // Signatures first, so recursion (including mutual) just works.
    let mut sigs: BTreeMap<String, (Ty, Ty)> = BTreeMap::new();
    for name in &program.order {
        let def = &program.defs[name];
        // One fresh slot per parameter, assembled as a right-nested pair.
        let arg = if def.params.len() <= 1 {
            uf.fresh()
        } else {
            let mut comps: Vec<Ty> = (0..def.params.len()).map(|_| uf.fresh()).collect();
            let mut acc = comps.pop().unwrap();
            while let Some(c) = comps.pop() {
                acc = Ty::Pair(Box::new(c), Box::new(acc));
            }
            acc
        };
        let res = uf.fresh();
        sigs.insert(name.clone(), (arg, res));
    }

    let mut node_types_ty: HashMap<NodeId, Ty> = HashMap::new();
    for name in &program.order {
        let def = &program.defs[name];
        let (arg_ty, res_ty) = sigs[name].clone();
        let mut ctx: HashMap<String, Ty> = HashMap::new();
        ctx.insert(def.arg.clone(), arg_ty);
        let body_ty = infer(&def.body, &mut ctx, &sigs, &mut uf, name, &mut node_types_ty)?;
        uf.unify(&body_ty, &res_ty).map_err(|(a, b)| TypeError::Mismatch {
            fun: name.clone(),
            expected: uf.show(&b),
            found: uf.show(&a),
        })?;
    }

    let fun_types = sigs
        .iter()
        .map(|(n, (a, r))| (n.clone(), FunType { arg: uf.zonk(a), result: uf.zonk(r) }))
        .collect();
    let node_types = node_types_ty.iter().map(|(id, t)| (*id, uf.zonk(t))).collect();
    Ok(TypedProgram { program, fun_types, node_types })
}

fn infer(
    e: &CoreExpr,
    ctx: &mut HashMap<String, Ty>,
    sigs: &BTreeMap<String, (Ty, Ty)>,
    uf: &mut Uf,
    fun: &str,
    out: &mut HashMap<NodeId, Ty>,
) -> Result<Ty, TypeError> {
    let mismatch = |uf: &Uf, a: &Ty, b: &Ty| TypeError::Mismatch {
        fun: fun.to_string(),
        expected: uf.show(a),
        found: uf.show(b),
    };
    let lookup = |ctx: &HashMap<String, Ty>, x: &str| -> Result<Ty, TypeError> {
        ctx.get(x).cloned().ok_or_else(|| TypeError::Unbound { fun: fun.to_string(), name: x.to_string() })
    };
    let ty = match &e.kind {
        CoreKind::Unit => Ty::Unit,
        CoreKind::Bool(_) => Ty::Bool,
        CoreKind::Int(_) => Ty::Int,
        CoreKind::Nil => Ty::List(Box::new(uf.fresh())),
        CoreKind::Tick(_) => Ty::Unit,
        CoreKind::Var(x) => lookup(ctx, x)?,
        CoreKind::Bin(op, a, b) => {
            let ta = lookup(ctx, a)?;
            let tb = lookup(ctx, b)?;
            let (operand, result) = if op.is_bool_op() {
                (Ty::Bool, Ty::Bool)
            } else if op.is_comparison() {
                (Ty::Int, Ty::Bool)
            } else {
                (Ty::Int, Ty::Int)
            };
            uf.unify(&ta, &operand).map_err(|(x, y)| mismatch(uf, &y, &x))?;
            uf.unify(&tb, &operand).map_err(|(x, y)| mismatch(uf, &y, &x))?;
            result
        }
        CoreKind::App(f, x) => {
            let (arg, res) = sigs
                .get(f)
                .cloned()
                .ok_or_else(|| TypeError::UnknownFunction { fun: fun.to_string(), name: f.clone() })?;
            let tx = lookup(ctx, x)?;
            uf.unify(&tx, &arg).map_err(|(a, b)| mismatch(uf, &b, &a))?;
            res
        }
        CoreKind::If(c, t, f) => {
            let tc = lookup(ctx, c)?;
            uf.unify(&tc, &Ty::Bool).map_err(|(a, b)| mismatch(uf, &b, &a))?;
            let tt = infer(t, ctx, sigs, uf, fun, out)?;
            let tf = infer(f, ctx, sigs, uf, fun, out)?;
            uf.unify(&tt, &tf).map_err(|(a, b)| mismatch(uf, &a, &b))?;
            tt
        }
        CoreKind::Let(x, rhs, body) => {
            let tr = infer(rhs, ctx, sigs, uf, fun, out)?;
            ctx.insert(x.clone(), tr);
            infer(body, ctx, sigs, uf, fun, out)?
        }
        CoreKind::Pair(a, b) => {
            let ta = lookup(ctx, a)?;
            let tb = lookup(ctx, b)?;
            Ty::Pair(Box::new(ta), Box::new(tb))
        }
        CoreKind::MatchPair { scrut, left, right, body } => {
            let ts = lookup(ctx, scrut)?;
            let tl = uf.fresh();
            let tr = uf.fresh();
            uf.unify(&ts, &Ty::Pair(Box::new(tl.clone()), Box::new(tr.clone())))
                .map_err(|(a, b)| mismatch(uf, &b, &a))?;
            ctx.insert(left.clone(), tl);
            ctx.insert(right.clone(), tr);
            infer(body, ctx, sigs, uf, fun, out)?
        }
        CoreKind::Cons(h, t) => {
            let th = lookup(ctx, h)?;
            let tt = lookup(ctx, t)?;
            uf.unify(&tt, &Ty::List(Box::new(th.clone()))).map_err(|(a, b)| mismatch(uf, &b, &a))?;
            tt
        }
        CoreKind::MatchList { scrut, nil_branch, head, tail, cons_branch } => {
            let ts = lookup(ctx, scrut)?;
            let te = uf.fresh();
            uf.unify(&ts, &Ty::List(Box::new(te.clone()))).map_err(|(a, b)| mismatch(uf, &b, &a))?;
            let tn = infer(nil_branch, ctx, sigs, uf, fun, out)?;
            ctx.insert(head.clone(), te.clone());
            ctx.insert(tail.clone(), Ty::List(Box::new(te)));
            let tc = infer(cons_branch, ctx, sigs, uf, fun, out)?;
            uf.unify(&tn, &tc).map_err(|(a, b)| mismatch(uf, &a, &b))?;
            tn
        }
        CoreKind::Share { var, left, right, body } => {
            // both copies at the same base type as the source
            let tv = lookup(ctx, var)?;
            ctx.insert(left.clone(), tv.clone());
            ctx.insert(right.clone(), tv);
            infer(body, ctx, sigs, uf, fun, out)?
        }
        CoreKind::Consume(ann, x) => {
            let tx = lookup(ctx, x)?;
            if let Some(a) = ann {
                let want = from_base(&a.ann_type.erase());
                uf.unify(&tx, &want).map_err(|(a, b)| mismatch(uf, &b, &a))?;
            }
            Ty::Unit
        }
    };
    out.insert(e.id, ty.clone());
    Ok(ty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::normalize;
    use crate::parser::parse;

    fn check(src: &str) -> Result<TypedProgram, TypeError> {
        let sp = parse(src).expect("parse");
        let p = normalize(&sp).expect("normalize");
        typecheck_base(p)
    }

    #[test]
    fn compare_gets_list_int_pair_to_bool() {
        let src = "let rec compare(h,l) = match h with\n\
                   | [] -> match l with | [] -> true | y::ys -> false\n\
                   | x::xs -> match l with\n\
                     | [] -> false\n\
                     | y::ys -> if x = y then compare(xs,ys) else false";
        let tp = check(src).unwrap();
        let ft = &tp.fun_types["compare"];
        assert_eq!(ft.to_string(), "(L(int) * L(int)) -> bool");
    }

    #[test]
    fn branch_type_clash_rejected() {
        let err = check("let f(x) = if x then 1 else true").unwrap_err();
        assert!(matches!(err, TypeError::Mismatch { .. }));
    }

    #[test]
    fn cons_constructor_rule() {
        let tp = check("let f(h) = h::[]").unwrap();
        let ft = &tp.fun_types["f"];
        // h defaults per usage: cons of h onto nil of L('a) leaves 'a = type
        // of h, unconstrained, defaulting to int.
        assert_eq!(ft.to_string(), "int -> L(int)");
    }

    #[test]
    fn identity_defaults_to_int() {
        let tp = check("let f(x) = x").unwrap();
        assert_eq!(tp.fun_types["f"].to_string(), "int -> int");
    }

    #[test]
    fn unbound_variable_reported() {
        let err = check("let f(x) = y").unwrap_err();
        assert!(matches!(err, TypeError::Unbound { name, .. } if name == "y"));
    }

    #[test]
    fn share_copies_same_type() {
        let tp = check("let f(x) = x + x").unwrap();
        assert_eq!(tp.fun_types["f"].to_string(), "int -> int");
    }
}
