//! Cost models: a rational constant per evaluation rule, plus tick handling.
//!
//! The share rule always costs zero. Constants may be negative (resources
//! becoming available). Built-in metrics:
//!
//! - `tick`  — all constants zero, `tick(q)` honored
//! - `steps` — every constant one, ticks ignored
//! - `calls` — only function application costs one
//! - `mults` — only the `*` operator costs one

use std::collections::BTreeMap;

use crate::rational::{qint, qzero, Q};
use crate::syntax::BinOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CostKind {
    Unit,
    Bool,
    Int,
    Var,
    Op,
    App,
    Let,
    Cond,
    Pair,
    MatchP,
    Nil,
    Cons,
    MatchN,
    MatchL,
}

pub const ALL_COST_KINDS: [CostKind; 14] = [
    CostKind::Unit,
    CostKind::Bool,
    CostKind::Int,
    CostKind::Var,
    CostKind::Op,
    CostKind::App,
    CostKind::Let,
    CostKind::Cond,
    CostKind::Pair,
    CostKind::MatchP,
    CostKind::Nil,
    CostKind::Cons,
    CostKind::MatchN,
    CostKind::MatchL,
];

#[derive(Debug, Clone)]
pub struct CostModel {
    pub name: String,
    consts: BTreeMap<CostKind, Q>,
    op_overrides: BTreeMap<BinOp, Q>,
    pub honor_tick: bool,
}

impl CostModel {
    pub fn zeroed(name: &str, honor_tick: bool) -> Self {
        CostModel {
            name: name.to_string(),
            consts: BTreeMap::new(),
            op_overrides: BTreeMap::new(),
            honor_tick,
        }
    }

    /// All constants zero; tick honored.
    pub fn tick() -> Self {
        Self::zeroed("tick", true)
    }

    /// Every evaluation rule costs one; ticks ignored.
    pub fn steps() -> Self {
        let mut m = Self::zeroed("steps", false);
        for k in ALL_COST_KINDS {
            m.consts.insert(k, qint(1));
        }
        m
    }

    /// Function application costs one; everything else free.
    pub fn calls() -> Self {
        let mut m = Self::zeroed("calls", false);
        m.consts.insert(CostKind::App, qint(1));
        m
    }

    /// Multiplication costs one; everything else free.
    pub fn mults() -> Self {
        let mut m = Self::zeroed("mults", false);
        m.op_overrides.insert(BinOp::Mul, qint(1));
        m
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "tick" => Some(Self::tick()),
            "steps" => Some(Self::steps()),
            "calls" => Some(Self::calls()),
            "mults" => Some(Self::mults()),
            _ => None,
        }
    }

    pub fn set(&mut self, kind: CostKind, q: Q) {
        self.consts.insert(kind, q);
    }

    pub fn cost(&self, kind: CostKind) -> Q {
        self.consts.get(&kind).cloned().unwrap_or_else(qzero)
    }

    pub fn op_cost(&self, op: BinOp) -> Q {
        if let Some(q) = self.op_overrides.get(&op) {
            return q.clone();
        }
        self.cost(CostKind::Op)
    }

    /// All rule constants integral (hypothesis of the leakage bound lemma).
    pub fn all_integral(&self) -> bool {
        self.consts.values().all(|q| q.is_integer()) && self.op_overrides.values().all(|q| q.is_integer())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_metrics() {
        let t = CostModel::tick();
        assert!(t.honor_tick);
        assert_eq!(t.cost(CostKind::App), qint(0));
        let s = CostModel::steps();
        assert!(!s.honor_tick);
        assert_eq!(s.cost(CostKind::MatchL), qint(1));
        let c = CostModel::calls();
        assert_eq!(c.cost(CostKind::App), qint(1));
        assert_eq!(c.cost(CostKind::Let), qint(0));
        let m = CostModel::mults();
        assert_eq!(m.op_cost(BinOp::Mul), qint(1));
        assert_eq!(m.op_cost(BinOp::Add), qint(0));
        assert!(CostModel::by_name("bogus").is_none());
    }
}
