//! Elaboration from surface syntax into share-let normal form.
//!
//! Steps, in order:
//! 1. nested `let rec` definitions are lifted to the top level (they must be
//!    closed up to their own parameters);
//! 2. multi-parameter functions become single-argument functions over a
//!    right-nested pair, with a pair-match prelude;
//! 3. the body is converted to let normal form: every operator, constructor,
//!    and call argument becomes a variable, binders are made unique;
//! 4. every variable used more than once is threaded through a chain of
//!    `share` nodes, copies assigned in lexical occurrence order.

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use crate::syntax::{
    CoreExpr, CoreKind, FunDef, NodeId, Program, Span, SurfaceDef, SurfaceExpr, SurfaceKind,
    SurfaceProgram,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("{span}: nested function `{name}` captures `{var}`; nested definitions must be closed")]
    NestedCapture { name: String, var: String, span: Span },
    #[error("{span}: duplicate definition of `{name}`")]
    Duplicate { name: String, span: Span },
}

pub fn normalize(sp: &SurfaceProgram) -> Result<Program, NormalizeError> {
    let mut defs: Vec<SurfaceDef> = Vec::new();
    let mut taken: HashSet<String> = sp.defs.iter().map(|d| d.name.clone()).collect();
    if taken.len() != sp.defs.len() {
        for (i, d) in sp.defs.iter().enumerate() {
            if sp.defs[..i].iter().any(|e| e.name == d.name) {
                return Err(NormalizeError::Duplicate { name: d.name.clone(), span: d.span });
            }
        }
    }
    for def in &sp.defs {
        let mut lifted = Vec::new();
        let body = lift_letrecs(&def.body, &mut taken, &mut HashMap::new(), &mut lifted)?;
        defs.extend(lifted);
        defs.push(SurfaceDef { name: def.name.clone(), params: def.params.clone(), body, span: def.span });
    }

    let mut prog = Program::default();
    let mut node_counter: NodeId = 0;
    for def in &defs {
        let core = normalize_def(def, &mut node_counter);
        prog.order.push(def.name.clone());
        prog.defs.insert(def.name.clone(), core);
    }
    Ok(prog)
}

// ---------------------------------------------------------------------------
// Step 1: lifting nested let rec
// ---------------------------------------------------------------------------

fn lift_letrecs(
    e: &SurfaceExpr,
    taken: &mut HashSet<String>,
    renames: &mut HashMap<String, String>,
    out: &mut Vec<SurfaceDef>,
) -> Result<SurfaceExpr, NormalizeError> {
    let span = e.span;
    let kind = match &e.kind {
        SurfaceKind::LetRec { name, params, fbody, body } => {
            let fresh = if taken.contains(name) {
                let mut i = 2;
                loop {
                    let cand = format!("{name}#{i}");
                    if !taken.contains(&cand) {
                        break cand;
                    }
                    i += 1;
                }
            } else {
                name.clone()
            };
            taken.insert(fresh.clone());
            let had = renames.insert(name.clone(), fresh.clone());
            let fbody2 = lift_letrecs(fbody, taken, renames, out)?;
            // Closedness: free variables of the function body must be its
            // own parameters (other function names are not variables here).
            let fns: HashSet<String> = taken.iter().cloned().collect();
            let mut free = Vec::new();
            surface_free_vars(&fbody2, &params.iter().cloned().collect::<Vec<_>>(), &fns, &mut free);
            if let Some(var) = free.first() {
                return Err(NormalizeError::NestedCapture { name: name.clone(), var: var.clone(), span });
            }
            out.push(SurfaceDef { name: fresh.clone(), params: params.clone(), body: fbody2, span });
            let body2 = lift_letrecs(body, taken, renames, out)?;
            match had {
                Some(prev) => {
                    renames.insert(name.clone(), prev);
                }
                None => {
                    renames.remove(name);
                }
            }
            return Ok(body2);
        }
        SurfaceKind::App(f, args) => {
            let f2 = renames.get(f).cloned().unwrap_or_else(|| f.clone());
            let args2 = args
                .iter()
                .map(|a| lift_letrecs(a, taken, renames, out))
                .collect::<Result<Vec<_>, _>>()?;
            SurfaceKind::App(f2, args2)
        }
        SurfaceKind::Let { name, rhs, body } => SurfaceKind::Let {
            name: name.clone(),
            rhs: Box::new(lift_letrecs(rhs, taken, renames, out)?),
            body: Box::new(lift_letrecs(body, taken, renames, out)?),
        },
        SurfaceKind::If { cond, then_branch, else_branch } => SurfaceKind::If {
            cond: Box::new(lift_letrecs(cond, taken, renames, out)?),
            then_branch: Box::new(lift_letrecs(then_branch, taken, renames, out)?),
            else_branch: Box::new(lift_letrecs(else_branch, taken, renames, out)?),
        },
        SurfaceKind::Bin(op, a, b) => SurfaceKind::Bin(
            *op,
            Box::new(lift_letrecs(a, taken, renames, out)?),
            Box::new(lift_letrecs(b, taken, renames, out)?),
        ),
        SurfaceKind::Pair(a, b) => SurfaceKind::Pair(
            Box::new(lift_letrecs(a, taken, renames, out)?),
            Box::new(lift_letrecs(b, taken, renames, out)?),
        ),
        SurfaceKind::Cons(a, b) => SurfaceKind::Cons(
            Box::new(lift_letrecs(a, taken, renames, out)?),
            Box::new(lift_letrecs(b, taken, renames, out)?),
        ),
        SurfaceKind::ListLit(es) => SurfaceKind::ListLit(
            es.iter().map(|x| lift_letrecs(x, taken, renames, out)).collect::<Result<Vec<_>, _>>()?,
        ),
        SurfaceKind::MatchPair { scrut, left, right, body } => SurfaceKind::MatchPair {
            scrut: Box::new(lift_letrecs(scrut, taken, renames, out)?),
            left: left.clone(),
            right: right.clone(),
            body: Box::new(lift_letrecs(body, taken, renames, out)?),
        },
        SurfaceKind::MatchList { scrut, nil_branch, head, tail, cons_branch } => SurfaceKind::MatchList {
            scrut: Box::new(lift_letrecs(scrut, taken, renames, out)?),
            nil_branch: Box::new(lift_letrecs(nil_branch, taken, renames, out)?),
            head: head.clone(),
            tail: tail.clone(),
            cons_branch: Box::new(lift_letrecs(cons_branch, taken, renames, out)?),
        },
        SurfaceKind::Share { var, left, right, body } => SurfaceKind::Share {
            var: var.clone(),
            left: left.clone(),
            right: right.clone(),
            body: Box::new(lift_letrecs(body, taken, renames, out)?),
        },
        other => other.clone(),
    };
    Ok(SurfaceExpr { kind, span })
}

fn surface_free_vars(e: &SurfaceExpr, bound: &[String], fns: &HashSet<String>, out: &mut Vec<String>) {
    let mut bound = bound.to_vec();
    surface_fv(e, &mut bound, fns, out);
}

fn surface_fv(e: &SurfaceExpr, bound: &mut Vec<String>, fns: &HashSet<String>, out: &mut Vec<String>) {
    match &e.kind {
        SurfaceKind::Var(x) => {
            if !bound.iter().any(|b| b == x) && !fns.contains(x) && !out.contains(x) {
                out.push(x.clone());
            }
        }
        SurfaceKind::Unit
        | SurfaceKind::Bool(_)
        | SurfaceKind::Int(_)
        | SurfaceKind::Nil
        | SurfaceKind::Tick(_) => {}
        SurfaceKind::Consume(_, vars) => {
            for x in vars {
                if !bound.iter().any(|b| b == x) && !out.contains(x) {
                    out.push(x.clone());
                }
            }
        }
        SurfaceKind::Bin(_, a, b) | SurfaceKind::Pair(a, b) | SurfaceKind::Cons(a, b) => {
            surface_fv(a, bound, fns, out);
            surface_fv(b, bound, fns, out);
        }
        SurfaceKind::App(_, args) => {
            for a in args {
                surface_fv(a, bound, fns, out);
            }
        }
        SurfaceKind::ListLit(es) => {
            for x in es {
                surface_fv(x, bound, fns, out);
            }
        }
        SurfaceKind::Let { name, rhs, body } => {
            surface_fv(rhs, bound, fns, out);
            bound.push(name.clone());
            surface_fv(body, bound, fns, out);
            bound.pop();
        }
        SurfaceKind::LetRec { params, fbody, body, .. } => {
            let n = bound.len();
            bound.extend(params.iter().cloned());
            surface_fv(fbody, bound, fns, out);
            bound.truncate(n);
            surface_fv(body, bound, fns, out);
        }
        SurfaceKind::If { cond, then_branch, else_branch } => {
            surface_fv(cond, bound, fns, out);
            surface_fv(then_branch, bound, fns, out);
            surface_fv(else_branch, bound, fns, out);
        }
        SurfaceKind::MatchPair { scrut, left, right, body } => {
            surface_fv(scrut, bound, fns, out);
            bound.push(left.clone());
            bound.push(right.clone());
            surface_fv(body, bound, fns, out);
            bound.pop();
            bound.pop();
        }
        SurfaceKind::MatchList { scrut, nil_branch, head, tail, cons_branch } => {
            surface_fv(scrut, bound, fns, out);
            surface_fv(nil_branch, bound, fns, out);
            bound.push(head.clone());
            bound.push(tail.clone());
            surface_fv(cons_branch, bound, fns, out);
            bound.pop();
            bound.pop();
        }
        SurfaceKind::Share { var, left, right, body } => {
            if !bound.iter().any(|b| b == var) && !out.contains(var) {
                out.push(var.clone());
            }
            bound.push(left.clone());
            bound.push(right.clone());
            surface_fv(body, bound, fns, out);
            bound.pop();
            bound.pop();
        }
    }
}

// ---------------------------------------------------------------------------
// Steps 2+3: tupling and let normal form
// ---------------------------------------------------------------------------

struct Lowerer<'a> {
    counter: &'a mut NodeId,
    fresh: u32,
    /// active alpha-renaming of binders
    scope: Vec<(String, String)>,
    used_names: HashSet<String>,
}

impl<'a> Lowerer<'a> {
    fn node(&mut self, kind: CoreKind) -> CoreExpr {
        let id = *self.counter;
        *self.counter += 1;
        CoreExpr { id, kind }
    }

    fn fresh_name(&mut self, base: &str) -> String {
        loop {
            self.fresh += 1;
            let name = format!("{base}#{}", self.fresh);
            if !self.used_names.contains(&name) {
                self.used_names.insert(name.clone());
                return name;
            }
        }
    }

    fn bind_name(&mut self, surface: &str) -> String {
        let core = if surface == "_" || self.used_names.contains(surface) {
            let base = if surface == "_" { "u" } else { surface };
            self.fresh_name(base)
        } else {
            self.used_names.insert(surface.to_string());
            surface.to_string()
        };
        self.scope.push((surface.to_string(), core.clone()));
        core
    }

    fn unbind(&mut self, n: usize) {
        for _ in 0..n {
            self.scope.pop();
        }
    }

    fn resolve(&self, surface: &str) -> String {
        for (s, c) in self.scope.iter().rev() {
            if s == surface {
                return c.clone();
            }
        }
        surface.to_string()
    }

    fn atomize(&mut self, e: &SurfaceExpr, binds: &mut Vec<(String, CoreExpr)>) -> String {
        if let SurfaceKind::Var(x) = &e.kind {
            return self.resolve(x);
        }
        let core = self.lower(e);
        let t = self.fresh_name("t");
        binds.push((t.clone(), core));
        t
    }

    fn wrap(&mut self, binds: Vec<(String, CoreExpr)>, body: CoreExpr) -> CoreExpr {
        let mut acc = body;
        for (name, rhs) in binds.into_iter().rev() {
            acc = self.node(CoreKind::Let(name, Box::new(rhs), Box::new(acc)));
        }
        acc
    }

    fn lower(&mut self, e: &SurfaceExpr) -> CoreExpr {
        match &e.kind {
            SurfaceKind::Unit => self.node(CoreKind::Unit),
            SurfaceKind::Bool(b) => self.node(CoreKind::Bool(*b)),
            SurfaceKind::Int(n) => self.node(CoreKind::Int(n.clone())),
            SurfaceKind::Nil => self.node(CoreKind::Nil),
            SurfaceKind::Tick(q) => self.node(CoreKind::Tick(q.clone())),
            SurfaceKind::Var(x) => {
                let name = self.resolve(x);
                self.node(CoreKind::Var(name))
            }
            SurfaceKind::Bin(op, a, b) => {
                let mut binds = Vec::new();
                let xa = self.atomize(a, &mut binds);
                let xb = self.atomize(b, &mut binds);
                let body = self.node(CoreKind::Bin(*op, xa, xb));
                self.wrap(binds, body)
            }
            SurfaceKind::Pair(a, b) => {
                let mut binds = Vec::new();
                let xa = self.atomize(a, &mut binds);
                let xb = self.atomize(b, &mut binds);
                let body = self.node(CoreKind::Pair(xa, xb));
                self.wrap(binds, body)
            }
            SurfaceKind::Cons(a, b) => {
                let mut binds = Vec::new();
                let xa = self.atomize(a, &mut binds);
                let xb = self.atomize(b, &mut binds);
                let body = self.node(CoreKind::Cons(xa, xb));
                self.wrap(binds, body)
            }
            SurfaceKind::ListLit(es) => {
                let mut binds = Vec::new();
                let xs: Vec<String> = es.iter().map(|x| self.atomize(x, &mut binds)).collect();
                let nil = self.node(CoreKind::Nil);
                let mut tail_name = self.fresh_name("t");
                binds.push((tail_name.clone(), nil));
                for x in xs.into_iter().rev() {
                    let cons = self.node(CoreKind::Cons(x, tail_name.clone()));
                    tail_name = self.fresh_name("t");
                    binds.push((tail_name.clone(), cons));
                }
                let body = self.node(CoreKind::Var(tail_name));
                self.wrap(binds, body)
            }
            SurfaceKind::App(f, args) => {
                let mut binds = Vec::new();
                let mut xs: Vec<String> = args.iter().map(|a| self.atomize(a, &mut binds)).collect();
                let arg = if xs.len() == 1 {
                    xs.pop().unwrap()
                } else {
                    // right-nested pair: (x1, (x2, (... xn)))
                    let mut acc = xs.pop().unwrap();
                    while let Some(x) = xs.pop() {
                        let pair = self.node(CoreKind::Pair(x, acc.clone()));
                        let t = self.fresh_name("t");
                        binds.push((t.clone(), pair));
                        acc = t;
                    }
                    acc
                };
                let body = self.node(CoreKind::App(f.clone(), arg));
                self.wrap(binds, body)
            }
            SurfaceKind::Let { name, rhs, body } => {
                let rhs_core = self.lower(rhs);
                let bound = self.bind_name(name);
                let body_core = self.lower(body);
                self.unbind(1);
                self.node(CoreKind::Let(bound, Box::new(rhs_core), Box::new(body_core)))
            }
            SurfaceKind::LetRec { .. } => {
                unreachable!("nested let rec must be lifted before lowering")
            }
            SurfaceKind::If { cond, then_branch, else_branch } => {
                let mut binds = Vec::new();
                let xc = self.atomize(cond, &mut binds);
                let t = self.lower(then_branch);
                let f = self.lower(else_branch);
                let body = self.node(CoreKind::If(xc, Box::new(t), Box::new(f)));
                self.wrap(binds, body)
            }
            SurfaceKind::MatchPair { scrut, left, right, body } => {
                let mut binds = Vec::new();
                let xs = self.atomize(scrut, &mut binds);
                let l = self.bind_name(left);
                let r = self.bind_name(right);
                let body_core = self.lower(body);
                self.unbind(2);
                let node = self.node(CoreKind::MatchPair { scrut: xs, left: l, right: r, body: Box::new(body_core) });
                self.wrap(binds, node)
            }
            SurfaceKind::MatchList { scrut, nil_branch, head, tail, cons_branch } => {
                let mut binds = Vec::new();
                let xs = self.atomize(scrut, &mut binds);
                let nil_core = self.lower(nil_branch);
                let h = self.bind_name(head);
                let t = self.bind_name(tail);
                let cons_core = self.lower(cons_branch);
                self.unbind(2);
                let node = self.node(CoreKind::MatchList {
                    scrut: xs,
                    nil_branch: Box::new(nil_core),
                    head: h,
                    tail: t,
                    cons_branch: Box::new(cons_core),
                });
                self.wrap(binds, node)
            }
            SurfaceKind::Share { var, left, right, body } => {
                let v = self.resolve(var);
                let l = self.bind_name(left);
                let r = self.bind_name(right);
                let body_core = self.lower(body);
                self.unbind(2);
                self.node(CoreKind::Share { var: v, left: l, right: r, body: Box::new(body_core) })
            }
            SurfaceKind::Consume(ann, vars) => {
                let resolved: Vec<String> = vars.iter().map(|v| self.resolve(v)).collect();
                if resolved.len() == 1 {
                    self.node(CoreKind::Consume(ann.clone(), resolved.into_iter().next().unwrap()))
                } else {
                    // chain of single-variable consumes
                    let mut iter = resolved.into_iter().rev();
                    let last = iter.next().unwrap();
                    let mut acc = self.node(CoreKind::Consume(None, last));
                    for v in iter {
                        let c = self.node(CoreKind::Consume(None, v));
                        let u = self.fresh_name("u");
                        acc = self.node(CoreKind::Let(u, Box::new(c), Box::new(acc)));
                    }
                    acc
                }
            }
        }
    }
}

fn normalize_def(def: &SurfaceDef, counter: &mut NodeId) -> FunDef {
    let mut lw = Lowerer { counter, fresh: 0, scope: Vec::new(), used_names: HashSet::new() };
    let params: Vec<String> = def.params.clone();
    // Bind parameters; multi-parameter functions receive a tuple argument
    // that a pair-match prelude destructures.
    let (arg_name, body) = if params.len() == 1 {
        let bound = lw.bind_name(&params[0]);
        let body = lw.lower(&def.body);
        lw.unbind(1);
        (bound, body)
    } else {
        let arg = lw.fresh_name("arg");
        let mut names = Vec::new();
        for p in &params {
            names.push(lw.bind_name(p));
        }
        let inner = lw.lower(&def.body);
        lw.unbind(params.len());
        // Build matches innermost-out: match arg with (p1, r1) -> match r1 with (p2, p3) -> ...
        let mut rests = vec![arg.clone()];
        for i in 1..params.len() - 1 {
            rests.push(lw.fresh_name(&format!("rest{i}")));
        }
        let mut acc = inner;
        for i in (0..params.len() - 1).rev() {
            let right = if i == params.len() - 2 { names[i + 1].clone() } else { rests[i + 1].clone() };
            acc = lw.node(CoreKind::MatchPair {
                scrut: rests[i].clone(),
                left: names[i].clone(),
                right,
                body: Box::new(acc),
            });
        }
        (arg, acc)
    };
    let mut sh = Sharer { counter, fresh: 0 };
    let shared = sh.share_binder(&arg_name, body);
    FunDef { arg: arg_name, params, body: shared }
}

// ---------------------------------------------------------------------------
// Step 4: share insertion
// ---------------------------------------------------------------------------

/// Count uses of `var` inside `e`; branches of a conditional or match count
/// as the maximum of the arms (they type against the same context).
fn count_var(e: &CoreExpr, var: &str) -> usize {
    let one = |x: &String| usize::from(x == var);
    match &e.kind {
        CoreKind::Unit | CoreKind::Bool(_) | CoreKind::Int(_) | CoreKind::Nil | CoreKind::Tick(_) => 0,
        CoreKind::Var(x) => one(x),
        CoreKind::Bin(_, a, b) | CoreKind::Pair(a, b) | CoreKind::Cons(a, b) => one(a) + one(b),
        CoreKind::App(_, x) | CoreKind::Consume(_, x) => one(x),
        CoreKind::If(c, t, f) => one(c) + count_var(t, var).max(count_var(f, var)),
        CoreKind::Let(x, rhs, body) => {
            let mut n = count_var(rhs, var);
            if x != var {
                n += count_var(body, var);
            }
            n
        }
        CoreKind::MatchPair { scrut, left, right, body } => {
            let mut n = one(scrut);
            if left != var && right != var {
                n += count_var(body, var);
            }
            n
        }
        CoreKind::MatchList { scrut, nil_branch, head, tail, cons_branch } => {
            let nil = count_var(nil_branch, var);
            let cons = if head != var && tail != var { count_var(cons_branch, var) } else { 0 };
            one(scrut) + nil.max(cons)
        }
        CoreKind::Share { var: v, left, right, body } => {
            let mut n = one(v);
            if left != var && right != var {
                n += count_var(body, var);
            }
            n
        }
    }
}

struct Sharer<'a> {
    counter: &'a mut NodeId,
    fresh: u32,
}

impl<'a> Sharer<'a> {
    fn node(&mut self, kind: CoreKind) -> CoreExpr {
        let id = *self.counter;
        *self.counter += 1;
        CoreExpr { id, kind }
    }

    /// If `var` is used more than once in `body`, rename the uses to
    /// occurrence-indexed copies and wrap `body` in a share chain.
    fn share_binder(&mut self, var: &str, body: CoreExpr) -> CoreExpr {
        let n = count_var(&body, var);
        if n <= 1 {
            return self.share_rec(body);
        }
        let copies: Vec<String> = (1..=n).map(|i| format!("{var}#{i}")).collect();
        let mut next = 0usize;
        let renamed = rename_uses(body, var, &copies, &mut next);
        let descended = self.share_rec(renamed);
        // share chain: var -> (c1, r1); r1 -> (c2, r2); ...; r_(n-2) -> (c_(n-1), c_n)
        let mut chain: Vec<(String, String, String)> = Vec::new();
        let mut src = var.to_string();
        for i in 0..n - 1 {
            let left = copies[i].clone();
            let right = if i == n - 2 {
                copies[i + 1].clone()
            } else {
                self.fresh += 1;
                format!("{var}#r{}", self.fresh)
            };
            chain.push((src.clone(), left, right.clone()));
            src = right;
        }
        let mut acc = descended;
        for (v, l, r) in chain.into_iter().rev() {
            acc = self.node(CoreKind::Share { var: v, left: l, right: r, body: Box::new(acc) });
        }
        acc
    }

    fn share_rec(&mut self, e: CoreExpr) -> CoreExpr {
        let CoreExpr { id, kind } = e;
        let kind = match kind {
            CoreKind::Let(x, rhs, body) => {
                let rhs = self.share_rec(*rhs);
                let body = self.share_binder(&x, *body);
                CoreKind::Let(x, Box::new(rhs), Box::new(body))
            }
            CoreKind::If(c, t, f) => {
                CoreKind::If(c, Box::new(self.share_rec(*t)), Box::new(self.share_rec(*f)))
            }
            CoreKind::MatchPair { scrut, left, right, body } => {
                let body = self.share_binder(&left, *body);
                let body = self.share_binder(&right, body);
                CoreKind::MatchPair { scrut, left, right, body: Box::new(body) }
            }
            CoreKind::MatchList { scrut, nil_branch, head, tail, cons_branch } => {
                let nil_branch = self.share_rec(*nil_branch);
                let cons = self.share_binder(&head, *cons_branch);
                let cons = self.share_binder(&tail, cons);
                CoreKind::MatchList {
                    scrut,
                    nil_branch: Box::new(nil_branch),
                    head,
                    tail,
                    cons_branch: Box::new(cons),
                }
            }
            CoreKind::Share { var, left, right, body } => {
                let body = self.share_binder(&left, *body);
                let body = self.share_binder(&right, body);
                CoreKind::Share { var, left, right, body: Box::new(body) }
            }
            leaf => leaf,
        };
        CoreExpr { id, kind }
    }
}

/// Replace each use of `var` with the next copy name, numbering branch arms
/// from a common starting index and continuing past their maximum.
fn rename_uses(e: CoreExpr, var: &str, copies: &[String], next: &mut usize) -> CoreExpr {
    let CoreExpr { id, kind } = e;
    let sub = |x: String, next: &mut usize| -> String {
        if x == var {
            let name = copies[*next].clone();
            *next += 1;
            name
        } else {
            x
        }
    };
    let kind = match kind {
        CoreKind::Var(x) => CoreKind::Var(sub(x, next)),
        CoreKind::Bin(op, a, b) => {
            let a = sub(a, next);
            let b = sub(b, next);
            CoreKind::Bin(op, a, b)
        }
        CoreKind::Pair(a, b) => {
            let a = sub(a, next);
            let b = sub(b, next);
            CoreKind::Pair(a, b)
        }
        CoreKind::Cons(a, b) => {
            let a = sub(a, next);
            let b = sub(b, next);
            CoreKind::Cons(a, b)
        }
        CoreKind::App(f, x) => CoreKind::App(f, sub(x, next)),
        CoreKind::Consume(ann, x) => CoreKind::Consume(ann, sub(x, next)),
        CoreKind::If(c, t, f) => {
            let c = sub(c, next);
            let start = *next;
            let mut n_t = start;
            let t = rename_uses(*t, var, copies, &mut n_t);
            let mut n_f = start;
            let f = rename_uses(*f, var, copies, &mut n_f);
            *next = n_t.max(n_f);
            CoreKind::If(c, Box::new(t), Box::new(f))
        }
        CoreKind::Let(x, rhs, body) => {
            let rhs = rename_uses(*rhs, var, copies, next);
            let body = if x == var { *body } else { rename_uses(*body, var, copies, next) };
            CoreKind::Let(x, Box::new(rhs), Box::new(body))
        }
        CoreKind::MatchPair { scrut, left, right, body } => {
            let scrut = sub(scrut, next);
            let body = if left == var || right == var {
                *body
            } else {
                rename_uses(*body, var, copies, next)
            };
            CoreKind::MatchPair { scrut, left, right, body: Box::new(body) }
        }
        CoreKind::MatchList { scrut, nil_branch, head, tail, cons_branch } => {
            let scrut = sub(scrut, next);
            let start = *next;
            let mut n_nil = start;
            let nil_branch = rename_uses(*nil_branch, var, copies, &mut n_nil);
            let mut n_cons = start;
            let cons_branch = if head == var || tail == var {
                *cons_branch
            } else {
                rename_uses(*cons_branch, var, copies, &mut n_cons)
            };
            *next = n_nil.max(n_cons);
            CoreKind::MatchList {
                scrut,
                nil_branch: Box::new(nil_branch),
                head,
                tail,
                cons_branch: Box::new(cons_branch),
            }
        }
        CoreKind::Share { var: v, left, right, body } => {
            let v = sub(v, next);
            let body = if left == var || right == var { *body } else { rename_uses(*body, var, copies, next) };
            CoreKind::Share { var: v, left, right, body: Box::new(body) }
        }
        leaf => leaf,
    };
    CoreExpr { id, kind }
}

// ---------------------------------------------------------------------------
// Linearity validation
// ---------------------------------------------------------------------------

/// Check the linear-use discipline: along any control path, each live
/// variable occurs at most once (shares introduce the only duplication).
pub fn check_linear(e: &CoreExpr) -> Result<(), String> {
    fn go(e: &CoreExpr, used: &mut HashSet<String>) -> Result<(), String> {
        let use_var = |x: &String, used: &mut HashSet<String>| -> Result<(), String> {
            if !used.insert(x.clone()) {
                return Err(format!("variable `{x}` used more than once"));
            }
            Ok(())
        };
        match &e.kind {
            CoreKind::Unit | CoreKind::Bool(_) | CoreKind::Int(_) | CoreKind::Nil | CoreKind::Tick(_) => Ok(()),
            CoreKind::Var(x) => use_var(x, used),
            CoreKind::Bin(_, a, b) | CoreKind::Pair(a, b) | CoreKind::Cons(a, b) => {
                use_var(a, used)?;
                use_var(b, used)
            }
            CoreKind::App(_, x) | CoreKind::Consume(_, x) => use_var(x, used),
            CoreKind::If(c, t, f) => {
                use_var(c, used)?;
                let mut u1 = used.clone();
                go(t, &mut u1)?;
                go(f, used)?;
                *used = u1.union(used).cloned().collect();
                Ok(())
            }
            CoreKind::Let(x, rhs, body) => {
                go(rhs, used)?;
                used.remove(x);
                go(body, used)
            }
            CoreKind::MatchPair { scrut, left, right, body } => {
                use_var(scrut, used)?;
                used.remove(left);
                used.remove(right);
                go(body, used)
            }
            CoreKind::MatchList { scrut, nil_branch, head, tail, cons_branch } => {
                use_var(scrut, used)?;
                let mut u1 = used.clone();
                go(nil_branch, &mut u1)?;
                used.remove(head);
                used.remove(tail);
                go(cons_branch, used)?;
                *used = u1.union(used).cloned().collect();
                Ok(())
            }
            CoreKind::Share { var, left, right, body } => {
                use_var(var, used)?;
                used.remove(left);
                used.remove(right);
                go(body, used)
            }
        }
    }
    go(e, &mut HashSet::new())
}

// ---------------------------------------------------------------------------
// Call graph
// ---------------------------------------------------------------------------

/// Strongly connected components of the call graph, as a map from function
/// name to SCC index. Mutually recursive functions share an index.
pub fn call_sccs(p: &Program) -> BTreeMap<String, usize> {
    let names: Vec<&String> = p.order.iter().collect();
    let index: HashMap<&String, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut edges: Vec<Vec<usize>> = vec![Vec::new(); names.len()];
    for (i, name) in names.iter().enumerate() {
        let def = &p.defs[*name];
        def.body.walk(&mut |e| {
            if let CoreKind::App(f, _) = &e.kind {
                if let Some(j) = index.get(f) {
                    edges[i].push(*j);
                }
            }
        });
    }
    // Tarjan's algorithm, iterative bookkeeping kept simple via recursion.
    struct T<'a> {
        edges: &'a [Vec<usize>],
        idx: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        comp: Vec<Option<usize>>,
        n_comp: usize,
    }
    impl<'a> T<'a> {
        fn visit(&mut self, v: usize) {
            self.idx[v] = Some(self.next);
            self.low[v] = self.next;
            self.next += 1;
            self.stack.push(v);
            self.on_stack[v] = true;
            for &w in &self.edges[v].clone() {
                if self.idx[w].is_none() {
                    self.visit(w);
                    self.low[v] = self.low[v].min(self.low[w]);
                } else if self.on_stack[w] {
                    self.low[v] = self.low[v].min(self.idx[w].unwrap());
                }
            }
            if self.low[v] == self.idx[v].unwrap() {
                loop {
                    let w = self.stack.pop().unwrap();
                    self.on_stack[w] = false;
                    self.comp[w] = Some(self.n_comp);
                    if w == v {
                        break;
                    }
                }
                self.n_comp += 1;
            }
        }
    }
    let mut t = T {
        edges: &edges,
        idx: vec![None; names.len()],
        low: vec![0; names.len()],
        on_stack: vec![false; names.len()],
        stack: Vec::new(),
        next: 0,
        comp: vec![None; names.len()],
        n_comp: 0,
    };
    for v in 0..names.len() {
        if t.idx[v].is_none() {
            t.visit(v);
        }
    }
    names
        .iter()
        .enumerate()
        .map(|(i, n)| ((*n).clone(), t.comp[i].unwrap()))
        .collect()
}
