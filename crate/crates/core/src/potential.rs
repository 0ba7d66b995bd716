//! Resource-annotated types and the potential function.
//!
//! An annotated type is a base-type shape with one annotation per list
//! layer. Annotations are either concrete rationals (the solved case: used
//! by the evaluator's consume rule and by bound reporting) or LP variables
//! (the unsolved case: used during constraint generation). The same
//! potential code serves both.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Signed;
use thiserror::Error;

use crate::lp::{Constraint, LinExpr, Rel, VarId};
use crate::rational::{q_pretty, qzero, Q};
use crate::syntax::BaseType;
use crate::value::Value;

/// A single annotation: solved rational or unsolved LP variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ann {
    Q(Q),
    Var(VarId),
}

impl Ann {
    pub fn to_expr(&self) -> LinExpr {
        match self {
            Ann::Q(q) => LinExpr::constant(q.clone()),
            Ann::Var(v) => LinExpr::var(*v),
        }
    }

    pub fn as_q(&self) -> Option<&Q> {
        match self {
            Ann::Q(q) => Some(q),
            Ann::Var(_) => None,
        }
    }
}

impl fmt::Display for Ann {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ann::Q(q) => write!(f, "{}", q_pretty(q)),
            Ann::Var(v) => write!(f, "?{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnnType {
    Unit,
    Bool,
    Int,
    List(Ann, Box<AnnType>),
    Pair(Box<AnnType>, Box<AnnType>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PotentialError {
    #[error("value does not match annotated type shape")]
    ShapeMismatch,
    #[error("annotation is unsolved; concrete rational required")]
    Unsolved,
    #[error("variable {0} missing from environment")]
    MissingVar(String),
}

impl AnnType {
    /// Erase annotations, recovering the base type.
    pub fn erase(&self) -> BaseType {
        match self {
            AnnType::Unit => BaseType::Unit,
            AnnType::Bool => BaseType::Bool,
            AnnType::Int => BaseType::Int,
            AnnType::List(_, t) => BaseType::List(Box::new(t.erase())),
            AnnType::Pair(a, b) => BaseType::Pair(Box::new(a.erase()), Box::new(b.erase())),
        }
    }

    /// Build from a base type, allocating one annotation per list layer.
    pub fn build(base: &BaseType, fresh: &mut impl FnMut() -> Ann) -> AnnType {
        match base {
            BaseType::Unit => AnnType::Unit,
            BaseType::Bool => AnnType::Bool,
            BaseType::Int => AnnType::Int,
            BaseType::List(t) => {
                let a = fresh();
                AnnType::List(a, Box::new(Self::build(t, fresh)))
            }
            BaseType::Pair(a, b) => {
                AnnType::Pair(Box::new(Self::build(a, fresh)), Box::new(Self::build(b, fresh)))
            }
        }
    }

    pub fn zeroed(base: &BaseType) -> AnnType {
        Self::build(base, &mut || Ann::Q(qzero()))
    }

    /// All annotations in preorder, paired with their list-nesting depth
    /// (0 = outermost list layer).
    pub fn annotations(&self) -> Vec<(usize, &Ann)> {
        let mut out = Vec::new();
        self.collect_anns(0, &mut out);
        out
    }

    fn collect_anns<'a>(&'a self, depth: usize, out: &mut Vec<(usize, &'a Ann)>) {
        match self {
            AnnType::Unit | AnnType::Bool | AnnType::Int => {}
            AnnType::List(a, t) => {
                out.push((depth, a));
                t.collect_anns(depth + 1, out);
            }
            AnnType::Pair(a, b) => {
                a.collect_anns(depth, out);
                b.collect_anns(depth, out);
            }
        }
    }

    pub fn is_concrete(&self) -> bool {
        self.annotations().iter().all(|(_, a)| matches!(a, Ann::Q(_)))
    }

    /// Resolve every variable annotation through `lookup`.
    pub fn resolve(&self, lookup: &impl Fn(VarId) -> Q) -> AnnType {
        match self {
            AnnType::Unit => AnnType::Unit,
            AnnType::Bool => AnnType::Bool,
            AnnType::Int => AnnType::Int,
            AnnType::List(a, t) => {
                let q = match a {
                    Ann::Q(q) => q.clone(),
                    Ann::Var(v) => lookup(*v),
                };
                AnnType::List(Ann::Q(q), Box::new(t.resolve(lookup)))
            }
            AnnType::Pair(a, b) => {
                AnnType::Pair(Box::new(a.resolve(lookup)), Box::new(b.resolve(lookup)))
            }
        }
    }

    /// Flatten the right-nested pair spine into `n` components.
    pub fn components(&self, n: usize) -> Vec<&AnnType> {
        let mut out = Vec::with_capacity(n);
        let mut cur = self;
        for _ in 0..n.saturating_sub(1) {
            match cur {
                AnnType::Pair(a, b) => {
                    out.push(&**a);
                    cur = b;
                }
                other => {
                    out.push(other);
                    return out;
                }
            }
        }
        out.push(cur);
        out
    }
}

impl fmt::Display for AnnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnnType::Unit => write!(f, "unit"),
            AnnType::Bool => write!(f, "bool"),
            AnnType::Int => write!(f, "int"),
            AnnType::List(a, t) => write!(f, "L^{a}({t})"),
            AnnType::Pair(a, b) => write!(f, "({a} * {b})"),
        }
    }
}

/// The concrete annotation carried by an elaborated consume sink.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsumeAnn {
    pub ann_type: AnnType,
    pub constant: Q,
}

/// Potential of a value at a concrete annotated type: atoms contribute
/// nothing, pairs add components, and a list of length n at annotation p
/// contributes n*p plus the element potentials.
pub fn phi_value(v: &Value, a: &AnnType) -> Result<Q, PotentialError> {
    match (v, a) {
        (Value::Unit, AnnType::Unit) | (Value::Bool(_), AnnType::Bool) | (Value::Int(_), AnnType::Int) => {
            Ok(qzero())
        }
        (Value::Pair(x, y), AnnType::Pair(ta, tb)) => Ok(phi_value(x, ta)? + phi_value(y, tb)?),
        (Value::List(vs), AnnType::List(ann, elem)) => {
            let p = ann.as_q().ok_or(PotentialError::Unsolved)?;
            let mut acc = p * Q::from_integer(vs.len().into());
            for v in vs {
                acc += phi_value(v, elem)?;
            }
            Ok(acc)
        }
        _ => Err(PotentialError::ShapeMismatch),
    }
}

/// Potential of the variables in `xs` (or the whole context when `None`)
/// under an environment.
pub fn phi_context(
    env: &BTreeMap<String, Value>,
    ctx: &BTreeMap<String, AnnType>,
    xs: Option<&[String]>,
) -> Result<Q, PotentialError> {
    let mut acc = qzero();
    match xs {
        Some(names) => {
            for x in names {
                let a = ctx.get(x).ok_or_else(|| PotentialError::MissingVar(x.clone()))?;
                let v = env.get(x).ok_or_else(|| PotentialError::MissingVar(x.clone()))?;
                acc += phi_value(v, a)?;
            }
        }
        None => {
            for (x, a) in ctx {
                let v = env.get(x).ok_or_else(|| PotentialError::MissingVar(x.clone()))?;
                acc += phi_value(v, a)?;
            }
        }
    }
    Ok(acc)
}

/// The sharing relation: per list layer, the source annotation equals the
/// sum of the two copies' annotations. Atoms are unconstrained, pairs
/// recurse. Shapes must agree.
pub fn share_constraints(a: &AnnType, a1: &AnnType, a2: &AnnType) -> Result<Vec<Constraint>, PotentialError> {
    let mut out = Vec::new();
    share_rec(a, a1, a2, &mut out)?;
    Ok(out)
}

fn share_rec(a: &AnnType, a1: &AnnType, a2: &AnnType, out: &mut Vec<Constraint>) -> Result<(), PotentialError> {
    match (a, a1, a2) {
        (AnnType::Unit, AnnType::Unit, AnnType::Unit)
        | (AnnType::Bool, AnnType::Bool, AnnType::Bool)
        | (AnnType::Int, AnnType::Int, AnnType::Int) => Ok(()),
        (AnnType::List(p, t), AnnType::List(p1, t1), AnnType::List(p2, t2)) => {
            out.push(Constraint::new(p.to_expr(), Rel::Eq, p1.to_expr().plus(&p2.to_expr())));
            share_rec(t, t1, t2, out)
        }
        (AnnType::Pair(x, y), AnnType::Pair(x1, y1), AnnType::Pair(x2, y2)) => {
            share_rec(x, x1, x2, out)?;
            share_rec(y, y1, y2, out)
        }
        _ => Err(PotentialError::ShapeMismatch),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubDir {
    /// `A <: B`: layerwise annotations of A at most those of B.
    LeftBelowRight,
    /// `B <: A`.
    RightBelowLeft,
}

/// Layerwise subtyping constraints between same-shape annotated types.
pub fn subtype_constraints(a: &AnnType, b: &AnnType, dir: SubDir) -> Result<Vec<Constraint>, PotentialError> {
    let mut out = Vec::new();
    sub_rec(a, b, dir, &mut out)?;
    Ok(out)
}

fn sub_rec(a: &AnnType, b: &AnnType, dir: SubDir, out: &mut Vec<Constraint>) -> Result<(), PotentialError> {
    match (a, b) {
        (AnnType::Unit, AnnType::Unit) | (AnnType::Bool, AnnType::Bool) | (AnnType::Int, AnnType::Int) => Ok(()),
        (AnnType::List(p, t), AnnType::List(q, u)) => {
            let rel = match dir {
                SubDir::LeftBelowRight => Rel::Le,
                SubDir::RightBelowLeft => Rel::Ge,
            };
            out.push(Constraint::new(p.to_expr(), rel, q.to_expr()));
            sub_rec(t, u, dir, out)
        }
        (AnnType::Pair(x, y), AnnType::Pair(u, v)) => {
            sub_rec(x, u, dir, out)?;
            sub_rec(y, v, dir, out)
        }
        _ => Err(PotentialError::ShapeMismatch),
    }
}

/// Constraints pinning every annotation in `a` to zero (the share(A|A,A)
/// condition used by weakening outside the affine system).
pub fn zero_constraints(a: &AnnType) -> Vec<Constraint> {
    a.annotations()
        .into_iter()
        .map(|(_, ann)| Constraint::new(ann.to_expr(), Rel::Eq, LinExpr::zero()))
        .collect()
}

/// A resource-annotated first-order signature.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnSig {
    pub arg: AnnType,
    pub result: AnnType,
    pub q: Ann,
    pub q_prime: Ann,
    /// Number of surface parameters (for display: the argument pair spine
    /// is flattened back into a comma-separated tuple).
    pub n_params: usize,
}

impl AnnSig {
    pub fn is_concrete(&self) -> bool {
        self.arg.is_concrete()
            && self.result.is_concrete()
            && self.q.as_q().is_some()
            && self.q_prime.as_q().is_some()
    }
}

impl fmt::Display for AnnSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let comps = self.arg.components(self.n_params.max(1));
        if comps.len() == 1 {
            write!(f, "{}", comps[0])?;
        } else {
            write!(f, "(")?;
            for (i, c) in comps.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{c}")?;
            }
            write!(f, ")")?;
        }
        write!(f, " --{}/{}--> {}", self.q, self.q_prime, self.result)
    }
}

/// Warns when a signature used as a bound has negative content; annotations
/// live in Q+ so a well-formed solution never trips this.
pub fn sig_nonnegative(sig: &AnnSig) -> bool {
    sig.arg.annotations().iter().chain(sig.result.annotations().iter()).all(|(_, a)| match a {
        Ann::Q(q) => !q.is_negative(),
        Ann::Var(_) => true,
    }) && sig.q.as_q().map(|q| !q.is_negative()).unwrap_or(true)
        && sig.q_prime.as_q().map(|q| !q.is_negative()).unwrap_or(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qint;

    fn bools(bs: &[bool]) -> Value {
        Value::List(bs.iter().map(|b| Value::Bool(*b)).collect())
    }

    #[test]
    fn phi_flat_list() {
        // Phi([b1..bn] : L^p(bool)) = n * p
        let a = AnnType::List(Ann::Q(qint(5)), Box::new(AnnType::Bool));
        assert_eq!(phi_value(&bools(&[true, false, true]), &a).unwrap(), qint(15));
        assert_eq!(phi_value(&bools(&[]), &a).unwrap(), qint(0));
    }

    #[test]
    fn phi_nested_list() {
        // Phi(v : L^p(L^q(bool))) = n*p + (m1+..+mn)*q
        let a = AnnType::List(
            Ann::Q(qint(3)),
            Box::new(AnnType::List(Ann::Q(qint(2)), Box::new(AnnType::Bool))),
        );
        let v = Value::List(vec![bools(&[true]), bools(&[false, true])]);
        // 2*3 + (1+2)*2 = 12
        assert_eq!(phi_value(&v, &a).unwrap(), qint(12));
    }

    #[test]
    fn phi_atom_is_zero() {
        assert_eq!(phi_value(&Value::int(7), &AnnType::Int).unwrap(), qint(0));
    }

    #[test]
    fn phi_shape_mismatch() {
        let a = AnnType::List(Ann::Q(qint(1)), Box::new(AnnType::Bool));
        assert_eq!(phi_value(&Value::int(7), &a), Err(PotentialError::ShapeMismatch));
    }

    #[test]
    fn share_concrete_split() {
        let l = |n: i64| AnnType::List(Ann::Q(qint(n)), Box::new(AnnType::Int));
        // 5 = 2 + 3 holds
        let cs = share_constraints(&l(5), &l(2), &l(3)).unwrap();
        let asg = crate::lp::Assignment::from_values(vec![]);
        assert!(cs.iter().all(|c| c.holds(&asg)));
        // 5 = 2 + 2 fails
        let cs = share_constraints(&l(5), &l(2), &l(2)).unwrap();
        assert!(!cs.iter().all(|c| c.holds(&asg)));
    }

    #[test]
    fn subtype_concrete() {
        let l = |n: i64| AnnType::List(Ann::Q(qint(n)), Box::new(AnnType::Int));
        let asg = crate::lp::Assignment::from_values(vec![]);
        let cs = subtype_constraints(&l(1), &l(2), SubDir::LeftBelowRight).unwrap();
        assert!(cs.iter().all(|c| c.holds(&asg)));
        let cs = subtype_constraints(&l(2), &l(1), SubDir::LeftBelowRight).unwrap();
        assert!(!cs.iter().all(|c| c.holds(&asg)));
        // Pairs: componentwise.
        let p1 = AnnType::Pair(Box::new(l(1)), Box::new(l(4)));
        let p2 = AnnType::Pair(Box::new(l(2)), Box::new(l(4)));
        let cs = subtype_constraints(&p1, &p2, SubDir::LeftBelowRight).unwrap();
        assert!(cs.iter().all(|c| c.holds(&asg)));
    }

    #[test]
    fn sig_display() {
        let sig = AnnSig {
            arg: AnnType::Pair(
                Box::new(AnnType::List(Ann::Q(qint(5)), Box::new(AnnType::Int))),
                Box::new(AnnType::List(Ann::Q(qint(0)), Box::new(AnnType::Int))),
            ),
            result: AnnType::Bool,
            q: Ann::Q(qint(1)),
            q_prime: Ann::Q(qint(0)),
            n_params: 2,
        };
        assert_eq!(sig.to_string(), "(L^5(int), L^0(int)) --1/0--> bool");
    }
}
