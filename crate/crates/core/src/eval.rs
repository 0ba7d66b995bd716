//! Big-step evaluation instrumented with a resource counter.
//!
//! Tracks both the net consumption (initial minus final resources) and the
//! high-water mark: the least initial budget under which the run never
//! drives the counter negative. The resource judgement with budget p holds
//! exactly when p is at least the high-water mark.

use std::collections::BTreeMap;

use num_traits::Zero;
use thiserror::Error;

use crate::cost::{CostKind, CostModel};
use crate::potential::phi_value;
use crate::rational::{qzero, Q};
use crate::syntax::{BinOp, CoreExpr, CoreKind, Program};
use crate::value::Value;

pub type Env = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub value: Value,
    pub net: Q,
    pub highwater: Q,
    pub steps: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    pub step_limit: u64,
    /// Call-nesting bound; recursion is the only source of divergence.
    pub recursion_limit: u32,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { step_limit: 1_000_000, recursion_limit: 400 }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("division by zero")]
    DivByZero,
    #[error("consume sink not elaborated; run repair first")]
    UnelaboratedConsume,
    #[error("step limit exceeded")]
    StepLimit,
    #[error("recursion limit exceeded")]
    RecursionLimit,
    #[error("value shape error: {0}")]
    Shape(String),
}

struct Meter {
    net: Q,
    high: Q,
    steps: u64,
    limit: u64,
    depth: u32,
    depth_limit: u32,
}

impl Meter {
    fn new(cfg: &EvalConfig) -> Meter {
        Meter {
            net: qzero(),
            high: qzero(),
            steps: 0,
            limit: cfg.step_limit,
            depth: 0,
            depth_limit: cfg.recursion_limit,
        }
    }

    fn charge(&mut self, c: &Q) {
        if c.is_zero() {
            return;
        }
        self.net += c;
        if self.net > self.high {
            self.high = self.net.clone();
        }
    }

    fn step(&mut self) -> Result<(), EvalError> {
        self.steps += 1;
        if self.steps > self.limit {
            return Err(EvalError::StepLimit);
        }
        Ok(())
    }
}

pub fn evaluate(
    prog: &Program,
    env: &Env,
    e: &CoreExpr,
    model: &CostModel,
    cfg: &EvalConfig,
) -> Result<EvalOutcome, EvalError> {
    let mut meter = Meter::new(cfg);
    let mut env = env.clone();
    let value = eval(prog, &mut env, e, model, &mut meter)?;
    Ok(EvalOutcome { value, net: meter.net, highwater: meter.high, steps: meter.steps })
}

/// Build the (tupled) argument value and evaluate a function application.
pub fn evaluate_fn(
    prog: &Program,
    f: &str,
    args: &[Value],
    model: &CostModel,
    cfg: &EvalConfig,
) -> Result<EvalOutcome, EvalError> {
    let def = prog.get(f).ok_or_else(|| EvalError::UnknownFunction(f.to_string()))?;
    if args.len() != def.params.len() {
        return Err(EvalError::Shape(format!(
            "`{f}` takes {} arguments, got {}",
            def.params.len(),
            args.len()
        )));
    }
    let mut env = Env::new();
    env.insert(def.arg.clone(), tuple_value(args));
    let mut meter = Meter::new(cfg);
    let value = eval(prog, &mut env, &def.body, model, &mut meter)?;
    Ok(EvalOutcome { value, net: meter.net, highwater: meter.high, steps: meter.steps })
}

/// Right-nested tuple from an argument list.
pub fn tuple_value(args: &[Value]) -> Value {
    if args.len() == 1 {
        return args[0].clone();
    }
    let mut it = args.iter().rev();
    let mut acc = it.next().expect("nonempty").clone();
    for v in it {
        acc = Value::Pair(Box::new(v.clone()), Box::new(acc));
    }
    acc
}

/// `check_judgement`: with initial budget `p`, does the run complete without
/// the counter going negative? Returns the remaining budget if so.
pub fn check_judgement(
    prog: &Program,
    env: &Env,
    p: &Q,
    e: &CoreExpr,
    model: &CostModel,
    cfg: &EvalConfig,
) -> Result<Option<Q>, EvalError> {
    let out = evaluate(prog, env, e, model, cfg)?;
    if *p >= out.highwater {
        Ok(Some(p - &out.net))
    } else {
        Ok(None)
    }
}

fn lookup(env: &Env, x: &str) -> Result<Value, EvalError> {
    env.get(x).cloned().ok_or_else(|| EvalError::Unbound(x.to_string()))
}

fn eval(
    prog: &Program,
    env: &mut Env,
    e: &CoreExpr,
    m: &CostModel,
    meter: &mut Meter,
) -> Result<Value, EvalError> {
    meter.step()?;
    match &e.kind {
        CoreKind::Unit => {
            meter.charge(&m.cost(CostKind::Unit));
            Ok(Value::Unit)
        }
        CoreKind::Bool(b) => {
            meter.charge(&m.cost(CostKind::Bool));
            Ok(Value::Bool(*b))
        }
        CoreKind::Int(n) => {
            meter.charge(&m.cost(CostKind::Int));
            Ok(Value::Int(n.clone()))
        }
        CoreKind::Var(x) => {
            meter.charge(&m.cost(CostKind::Var));
            lookup(env, x)
        }
        CoreKind::Nil => {
            meter.charge(&m.cost(CostKind::Nil));
            Ok(Value::List(Vec::new()))
        }
        CoreKind::Tick(q) => {
            if m.honor_tick {
                meter.charge(q);
            }
            Ok(Value::Unit)
        }
        CoreKind::Bin(op, a, b) => {
            meter.charge(&m.op_cost(*op));
            let va = lookup(env, a)?;
            let vb = lookup(env, b)?;
            apply_op(*op, &va, &vb)
        }
        CoreKind::Pair(a, b) => {
            meter.charge(&m.cost(CostKind::Pair));
            Ok(Value::Pair(Box::new(lookup(env, a)?), Box::new(lookup(env, b)?)))
        }
        CoreKind::Cons(h, t) => {
            meter.charge(&m.cost(CostKind::Cons));
            let vh = lookup(env, h)?;
            match lookup(env, t)? {
                Value::List(mut vs) => {
                    vs.insert(0, vh);
                    Ok(Value::List(vs))
                }
                other => Err(EvalError::Shape(format!("cons onto non-list {other}"))),
            }
        }
        CoreKind::App(f, x) => {
            meter.charge(&m.cost(CostKind::App));
            let def = prog.get(f).ok_or_else(|| EvalError::UnknownFunction(f.clone()))?;
            let vx = lookup(env, x)?;
            let mut callee_env = Env::new();
            callee_env.insert(def.arg.clone(), vx);
            meter.depth += 1;
            if meter.depth > meter.depth_limit {
                return Err(EvalError::RecursionLimit);
            }
            let out = eval(prog, &mut callee_env, &def.body, m, meter);
            meter.depth -= 1;
            out
        }
        CoreKind::If(c, t, f) => {
            meter.charge(&m.cost(CostKind::Cond));
            match lookup(env, c)? {
                Value::Bool(true) => eval(prog, env, t, m, meter),
                Value::Bool(false) => eval(prog, env, f, m, meter),
                other => Err(EvalError::Shape(format!("if on non-bool {other}"))),
            }
        }
        CoreKind::Let(x, rhs, body) => {
            meter.charge(&m.cost(CostKind::Let));
            let v = eval(prog, env, rhs, m, meter)?;
            env.insert(x.clone(), v);
            let out = eval(prog, env, body, m, meter);
            env.remove(x);
            out
        }
        CoreKind::MatchPair { scrut, left, right, body } => {
            meter.charge(&m.cost(CostKind::MatchP));
            match lookup(env, scrut)? {
                Value::Pair(a, b) => {
                    env.insert(left.clone(), *a);
                    env.insert(right.clone(), *b);
                    let out = eval(prog, env, body, m, meter);
                    env.remove(left);
                    env.remove(right);
                    out
                }
                other => Err(EvalError::Shape(format!("pair match on {other}"))),
            }
        }
        CoreKind::MatchList { scrut, nil_branch, head, tail, cons_branch } => match lookup(env, scrut)? {
            Value::List(vs) if vs.is_empty() => {
                meter.charge(&m.cost(CostKind::MatchN));
                eval(prog, env, nil_branch, m, meter)
            }
            Value::List(mut vs) => {
                meter.charge(&m.cost(CostKind::MatchL));
                let h = vs.remove(0);
                env.insert(head.clone(), h);
                env.insert(tail.clone(), Value::List(vs));
                let out = eval(prog, env, cons_branch, m, meter);
                env.remove(head);
                env.remove(tail);
                out
            }
            other => Err(EvalError::Shape(format!("list match on {other}"))),
        },
        CoreKind::Share { var, left, right, body } => {
            // shares carry no cost
            let v = lookup(env, var)?;
            env.remove(var);
            env.insert(left.clone(), v.clone());
            env.insert(right.clone(), v.clone());
            let out = eval(prog, env, body, m, meter);
            env.remove(left);
            env.remove(right);
            env.insert(var.clone(), v);
            out
        }
        CoreKind::Consume(ann, x) => {
            let ann = ann.as_ref().ok_or(EvalError::UnelaboratedConsume)?;
            let v = lookup(env, x)?;
            let phi = phi_value(&v, &ann.ann_type)
                .map_err(|e| EvalError::Shape(format!("consume annotation: {e}")))?;
            meter.charge(&(phi + &ann.constant));
            Ok(Value::Unit)
        }
    }
}

fn apply_op(op: BinOp, a: &Value, b: &Value) -> Result<Value, EvalError> {
    use BinOp::*;
    match op {
        And | Or => match (a, b) {
            (Value::Bool(x), Value::Bool(y)) => {
                Ok(Value::Bool(if op == And { *x && *y } else { *x || *y }))
            }
            _ => Err(EvalError::Shape("boolean operator on non-bools".into())),
        },
        Add | Sub | Mul | Div | Mod => match (a, b) {
            (Value::Int(x), Value::Int(y)) => {
                let r = match op {
                    Add => x + y,
                    Sub => x - y,
                    Mul => x * y,
                    Div => {
                        if y.is_zero() {
                            return Err(EvalError::DivByZero);
                        }
                        x / y
                    }
                    Mod => {
                        if y.is_zero() {
                            return Err(EvalError::DivByZero);
                        }
                        x % y
                    }
                    _ => unreachable!(),
                };
                Ok(Value::Int(r))
            }
            _ => Err(EvalError::Shape("arithmetic on non-ints".into())),
        },
        Eq | Ne | Gt | Lt | Ge | Le => match (a, b) {
            (Value::Int(x), Value::Int(y)) => {
                let r = match op {
                    Eq => x == y,
                    Ne => x != y,
                    Gt => x > y,
                    Lt => x < y,
                    Ge => x >= y,
                    Le => x <= y,
                    _ => unreachable!(),
                };
                Ok(Value::Bool(r))
            }
            _ => Err(EvalError::Shape("comparison on non-ints".into())),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::normalize;
    use crate::parser::parse;
    use crate::rational::qint;

    fn load(src: &str) -> Program {
        normalize(&parse(src).expect("parse")).expect("normalize")
    }

    #[test]
    fn unit_under_zero_model() {
        let p = load("let f(x) = ()");
        let out = evaluate_fn(&p, "f", &[Value::int(0)], &CostModel::tick(), &EvalConfig::default()).unwrap();
        assert_eq!(out.value, Value::Unit);
        assert_eq!(out.net, qint(0));
        assert_eq!(out.highwater, qint(0));
    }

    #[test]
    fn negative_then_positive_tick_highwater() {
        // tick(-2); tick(3): net 1, highwater 1 (the counter never dips).
        let p = load("let f(x) = tick(-2.0); tick(3.0)");
        let out = evaluate_fn(&p, "f", &[Value::Unit], &CostModel::tick(), &EvalConfig::default()).unwrap();
        assert_eq!(out.net, qint(1));
        assert_eq!(out.highwater, qint(1));
        // judgement with budget 1 holds and leaves 0
        let env: Env = [(p.defs["f"].arg.clone(), Value::Unit)].into_iter().collect();
        let body = &p.defs["f"].body;
        let j = check_judgement(&p, &env, &qint(1), body, &CostModel::tick(), &EvalConfig::default()).unwrap();
        assert_eq!(j, Some(qint(0)));
        let j = check_judgement(&p, &env, &qzero(), body, &CostModel::tick(), &EvalConfig::default()).unwrap();
        assert_eq!(j, None);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let p = load("let f(x) = x div 0");
        let err = evaluate_fn(&p, "f", &[Value::int(1)], &CostModel::tick(), &EvalConfig::default());
        assert_eq!(err.unwrap_err(), EvalError::DivByZero);
    }

    #[test]
    fn nontermination_hits_step_limit() {
        let p = load("let rec loop(x) = loop(x)");
        let err = evaluate_fn(
            &p,
            "loop",
            &[Value::int(0)],
            &CostModel::tick(),
            &EvalConfig { step_limit: 1000, recursion_limit: 200 },
        );
        let e = err.unwrap_err();
        assert!(matches!(e, EvalError::StepLimit | EvalError::RecursionLimit), "got {e:?}");
    }

    #[test]
    fn values_are_cost_model_independent() {
        let src = "let rec sum(l) = match l with | [] -> 0 | x::xs -> x + sum(xs)";
        let p = load(src);
        let arg = Value::List(vec![Value::int(1), Value::int(2), Value::int(3)]);
        for m in [CostModel::tick(), CostModel::steps(), CostModel::calls(), CostModel::mults()] {
            let out = evaluate_fn(&p, "sum", &[arg.clone()], &m, &EvalConfig::default()).unwrap();
            assert_eq!(out.value, Value::int(6));
        }
    }
}
