//! Exhaustive environment enumeration: the ground-truth oracle behind the
//! constancy decision procedure, the noninterference checker's cross
//! validation, and leakage quantification.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::cost::CostModel;
use crate::eval::{evaluate_fn, EvalConfig, EvalError};
use crate::rational::Q;
use crate::syntax::BaseType;
use crate::typecheck::TypedProgram;
use crate::value::Value;

/// Lengths for the list layers of one argument component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SizeBound {
    /// Exactly this length at every node of the layer.
    Exact(usize),
    /// All lengths from zero through this bound.
    UpTo(usize),
}

#[derive(Debug, Clone)]
pub struct EnumSpec {
    /// Per component name: bounds per list layer, outermost first. Components
    /// not listed use `default_bound` at every layer.
    pub bounds: BTreeMap<String, Vec<SizeBound>>,
    pub default_bound: SizeBound,
    pub int_lo: i64,
    pub int_hi: i64,
    /// Hard cap on the number of environments.
    pub env_cap: usize,
    /// Hard cap on total evaluator steps across the enumeration.
    pub step_cap: u64,
}

impl EnumSpec {
    pub fn up_to(len: usize, lo: i64, hi: i64) -> Self {
        EnumSpec {
            bounds: BTreeMap::new(),
            default_bound: SizeBound::UpTo(len),
            int_lo: lo,
            int_hi: hi,
            env_cap: 200_000,
            step_cap: 10_000_000,
        }
    }

    pub fn exact(pairs: &[(&str, usize)], lo: i64, hi: i64) -> Self {
        let mut bounds = BTreeMap::new();
        for (name, n) in pairs {
            bounds.insert(name.to_string(), vec![SizeBound::Exact(*n)]);
        }
        EnumSpec {
            bounds,
            default_bound: SizeBound::Exact(0),
            int_lo: lo,
            int_hi: hi,
            env_cap: 200_000,
            step_cap: 10_000_000,
        }
    }

    fn layer(&self, comp: &str, depth: usize) -> SizeBound {
        match self.bounds.get(comp) {
            Some(layers) => layers.get(depth).cloned().unwrap_or_else(|| self.default_bound.clone()),
            None => self.default_bound.clone(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnumError {
    #[error("enumeration exceeds the configured cap of {0} environments")]
    CapExceeded(usize),
    #[error("enumeration exceeds the configured step budget")]
    StepBudget,
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// All values of a base type within the spec's bounds for one component.
pub fn enumerate_values(t: &BaseType, spec: &EnumSpec, comp: &str, depth: usize) -> Vec<Value> {
    match t {
        BaseType::Unit => vec![Value::Unit],
        BaseType::Bool => vec![Value::Bool(false), Value::Bool(true)],
        BaseType::Int => (spec.int_lo..=spec.int_hi).map(Value::int).collect(),
        BaseType::Pair(a, b) => {
            let xs = enumerate_values(a, spec, comp, depth);
            let ys = enumerate_values(b, spec, comp, depth);
            let mut out = Vec::with_capacity(xs.len() * ys.len());
            for x in &xs {
                for y in &ys {
                    out.push(Value::Pair(Box::new(x.clone()), Box::new(y.clone())));
                }
            }
            out
        }
        BaseType::List(elem) => {
            let lens: Vec<usize> = match spec.layer(comp, depth) {
                SizeBound::Exact(n) => vec![n],
                SizeBound::UpTo(n) => (0..=n).collect(),
            };
            let elems = enumerate_values(elem, spec, comp, depth + 1);
            let mut out = Vec::new();
            for len in lens {
                // all length-`len` sequences over `elems`
                let mut seqs: Vec<Vec<Value>> = vec![Vec::new()];
                for _ in 0..len {
                    let mut next = Vec::with_capacity(seqs.len() * elems.len());
                    for s in &seqs {
                        for e in &elems {
                            let mut s2 = s.clone();
                            s2.push(e.clone());
                            next.push(s2);
                        }
                    }
                    seqs = next;
                }
                out.extend(seqs.into_iter().map(Value::List));
            }
            out
        }
    }
}

/// All argument tuples for `f` within the spec, as one `Vec<Value>` per
/// environment, ordered deterministically.
pub fn enumerate_args(tp: &TypedProgram, f: &str, spec: &EnumSpec) -> Result<Vec<Vec<Value>>, EnumError> {
    let comps = tp.param_types(f).ok_or_else(|| EnumError::UnknownFunction(f.to_string()))?;
    let def = tp.program.get(f).expect("param_types checked");
    let mut per_comp: Vec<Vec<Value>> = Vec::new();
    let mut total: usize = 1;
    for (name, t) in def.params.iter().zip(&comps) {
        let vs = enumerate_values(t, spec, name, 0);
        total = total.saturating_mul(vs.len());
        if total > spec.env_cap {
            return Err(EnumError::CapExceeded(spec.env_cap));
        }
        per_comp.push(vs);
    }
    let mut out: Vec<Vec<Value>> = vec![Vec::new()];
    for vs in &per_comp {
        let mut next = Vec::with_capacity(out.len() * vs.len());
        for partial in &out {
            for v in vs {
                let mut p2 = partial.clone();
                p2.push(v.clone());
                next.push(p2);
            }
        }
        out = next;
    }
    Ok(out)
}

/// One enumerated run; runs that fail to evaluate (division by zero) are
/// reported as `None` and skipped by the oracles — the definitions quantify
/// over completed evaluations only.
pub struct RunTable {
    pub runs: Vec<(Vec<Value>, Option<(Value, Q)>)>,
}

pub fn run_table(
    tp: &TypedProgram,
    f: &str,
    spec: &EnumSpec,
    model: &CostModel,
) -> Result<RunTable, EnumError> {
    let args_list = enumerate_args(tp, f, spec)?;
    let mut runs = Vec::with_capacity(args_list.len());
    let mut steps_total: u64 = 0;
    for args in args_list {
        let cfg = EvalConfig { step_limit: spec.step_cap - steps_total, ..EvalConfig::default() };
        match evaluate_fn(&tp.program, f, &args, model, &cfg) {
            Ok(out) => {
                steps_total += out.steps;
                if steps_total > spec.step_cap {
                    return Err(EnumError::StepBudget);
                }
                runs.push((args, Some((out.value, out.net))));
            }
            Err(EvalError::DivByZero) => runs.push((args, None)),
            Err(EvalError::StepLimit) => return Err(EnumError::StepBudget),
            Err(e) => return Err(EnumError::Eval(e)),
        }
    }
    Ok(RunTable { runs })
}

/// Size signature of the components selected by `mask`.
fn masked_sig(args: &[Value], mask: &[bool]) -> Vec<usize> {
    let mut out = Vec::new();
    for (v, selected) in args.iter().zip(mask) {
        if *selected {
            out.extend(v.size_sig());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstOracleReport {
    pub constant: bool,
    /// Witness when not constant: two size-equivalent argument tuples with
    /// different nets.
    pub counterexample: Option<(Vec<Value>, Q, Vec<Value>, Q)>,
}

/// Decide constancy by brute force: group enumerated environments by the
/// size signature of the components in `wrt`; the function is constant iff
/// every group has a single net cost.
pub fn const_oracle(
    tp: &TypedProgram,
    f: &str,
    wrt: &[String],
    spec: &EnumSpec,
    model: &CostModel,
) -> Result<ConstOracleReport, EnumError> {
    let def = tp.program.get(f).ok_or_else(|| EnumError::UnknownFunction(f.to_string()))?;
    let mask: Vec<bool> = def.params.iter().map(|p| wrt.contains(p)).collect();
    let table = run_table(tp, f, spec, model)?;
    let mut groups: BTreeMap<Vec<usize>, (Vec<Value>, Q)> = BTreeMap::new();
    for (args, outcome) in &table.runs {
        let Some((_, net)) = outcome else { continue };
        let key = masked_sig(args, &mask);
        match groups.get(&key) {
            None => {
                groups.insert(key, (args.clone(), net.clone()));
            }
            Some((first_args, first_net)) => {
                if first_net != net {
                    return Ok(ConstOracleReport {
                        constant: false,
                        counterexample: Some((
                            first_args.clone(),
                            first_net.clone(),
                            args.clone(),
                            net.clone(),
                        )),
                    });
                }
            }
        }
    }
    Ok(ConstOracleReport { constant: true, counterexample: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::normalize;
    use crate::parser::parse;
    use crate::typecheck::typecheck_base;

    fn load(src: &str) -> TypedProgram {
        typecheck_base(normalize(&parse(src).unwrap()).unwrap()).unwrap()
    }

    #[test]
    fn enumerates_lists_exhaustively() {
        let t = BaseType::List(Box::new(BaseType::Int));
        let spec = EnumSpec::up_to(2, 0, 1);
        let vs = enumerate_values(&t, &spec, "l", 0);
        // lengths 0,1,2 over {0,1}: 1 + 2 + 4
        assert_eq!(vs.len(), 7);
    }

    #[test]
    fn cap_is_enforced() {
        let tp = load("let f(a,b,c) = a");
        let mut spec = EnumSpec::up_to(3, -10, 10);
        spec.env_cap = 10;
        let err = enumerate_args(&tp, "f", &spec).unwrap_err();
        assert!(matches!(err, EnumError::CapExceeded(10)));
    }

    #[test]
    fn constant_function_is_constant() {
        let tp = load("let f(l) = tick(3.0); 0");
        let spec = EnumSpec::up_to(3, 0, 1);
        let rep = const_oracle(&tp, "f", &["l".into()], &spec, &CostModel::tick()).unwrap();
        assert!(rep.constant);
    }

    #[test]
    fn branch_dependent_cost_detected() {
        let src = "let f(b) = if b then tick(2.0); () else tick(1.0); ()";
        let tp = load(src);
        let spec = EnumSpec::up_to(0, 0, 0);
        let rep = const_oracle(&tp, "f", &["b".into()], &spec, &CostModel::tick()).unwrap();
        assert!(!rep.constant);
        assert!(rep.counterexample.is_some());
    }
}
