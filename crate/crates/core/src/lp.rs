//! Exact-rational linear programming.
//!
//! A dense two-phase simplex over `BigRational` with Bland's pivot rule, so
//! every solve is exact, deterministic, and terminating. All variables carry
//! an implicit `>= 0` bound (annotations and budgets live in Q+).
//! Lexicographic objectives are realized by sequential re-solves, pinning
//! each optimized phase with an equality before the next.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};

use crate::rational::{q_pretty, Q};

pub type VarId = u32;

/// Linear expression: sum of coefficient * variable, plus a constant.
/// Canonical: no explicitly stored zero coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinExpr {
    pub terms: BTreeMap<VarId, Q>,
    pub constant: Q,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn var(v: VarId) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(v, Q::from_integer(1.into()));
        LinExpr { terms, constant: Q::zero() }
    }

    pub fn constant(q: Q) -> Self {
        LinExpr { terms: BTreeMap::new(), constant: q }
    }

    pub fn add_term(&mut self, v: VarId, coeff: Q) {
        let entry = self.terms.entry(v).or_insert_with(Q::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.terms.remove(&v);
        }
    }

    pub fn plus(&self, other: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        for (v, c) in &other.terms {
            out.add_term(*v, c.clone());
        }
        out.constant += &other.constant;
        out
    }

    pub fn minus(&self, other: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        for (v, c) in &other.terms {
            out.add_term(*v, -c.clone());
        }
        out.constant -= &other.constant;
        out
    }

    pub fn plus_const(&self, q: &Q) -> LinExpr {
        let mut out = self.clone();
        out.constant += q;
        out
    }

    pub fn minus_const(&self, q: &Q) -> LinExpr {
        let mut out = self.clone();
        out.constant -= q;
        out
    }

    pub fn scaled(&self, k: &Q) -> LinExpr {
        if k.is_zero() {
            return LinExpr::zero();
        }
        LinExpr {
            terms: self.terms.iter().map(|(v, c)| (*v, c * k)).collect(),
            constant: &self.constant * k,
        }
    }

    pub fn is_const(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, asg: &Assignment) -> Q {
        let mut acc = self.constant.clone();
        for (v, c) in &self.terms {
            acc += c * asg.get(*v);
        }
        acc
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.terms {
            if first {
                first = false;
                if *c == Q::from_integer(1.into()) {
                    write!(f, "v{v}")?;
                } else {
                    write!(f, "{}*v{v}", q_pretty(c))?;
                }
            } else if c.is_negative() {
                let neg = -c.clone();
                if neg == Q::from_integer(1.into()) {
                    write!(f, " - v{v}")?;
                } else {
                    write!(f, " - {}*v{v}", q_pretty(&neg))?;
                }
            } else if *c == Q::from_integer(1.into()) {
                write!(f, " + v{v}")?;
            } else {
                write!(f, " + {}*v{v}", q_pretty(c))?;
            }
        }
        if first {
            write!(f, "{}", q_pretty(&self.constant))?;
        } else if !self.constant.is_zero() {
            if self.constant.is_negative() {
                write!(f, " - {}", q_pretty(&-self.constant.clone()))?;
            } else {
                write!(f, " + {}", q_pretty(&self.constant))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Rel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rel::Le => write!(f, "<="),
            Rel::Eq => write!(f, "="),
            Rel::Ge => write!(f, ">="),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub lhs: LinExpr,
    pub rel: Rel,
    pub rhs: LinExpr,
}

impl Constraint {
    pub fn new(lhs: LinExpr, rel: Rel, rhs: LinExpr) -> Self {
        Constraint { lhs, rel, rhs }
    }

    pub fn holds(&self, asg: &Assignment) -> bool {
        let l = self.lhs.eval(asg);
        let r = self.rhs.eval(asg);
        match self.rel {
            Rel::Le => l <= r,
            Rel::Eq => l == r,
            Rel::Ge => l >= r,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.rel, self.rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Lexicographic objective: phases optimized in order, each subject to the
/// optima of all earlier phases.
#[derive(Debug, Clone)]
pub struct Objective {
    pub phases: Vec<(Sense, LinExpr)>,
}

impl Objective {
    pub fn minimize(e: LinExpr) -> Self {
        Objective { phases: vec![(Sense::Minimize, e)] }
    }

    pub fn feasibility() -> Self {
        Objective { phases: vec![(Sense::Minimize, LinExpr::zero())] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    values: Vec<Q>,
}

impl Assignment {
    pub fn from_values(values: Vec<Q>) -> Self {
        Assignment { values }
    }

    pub fn get(&self, v: VarId) -> &Q {
        &self.values[v as usize]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn set(&mut self, v: VarId, q: Q) {
        self.values[v as usize] = q;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Solution(Assignment),
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Default)]
pub struct System {
    pub n_vars: u32,
    pub constraints: Vec<Constraint>,
}

impl System {
    pub fn fresh_var(&mut self) -> VarId {
        let v = self.n_vars;
        self.n_vars += 1;
        v
    }

    pub fn add(&mut self, lhs: LinExpr, rel: Rel, rhs: LinExpr) {
        self.constraints.push(Constraint::new(lhs, rel, rhs));
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        for c in &self.constraints {
            s.push_str(&format!("{c}\n"));
        }
        s
    }
}

/// Re-substitutes an assignment into every constraint plus the nonnegativity
/// bounds; the check is exact and independent of the solver's pivot path.
pub fn dual_check(cs: &[Constraint], asg: &Assignment) -> bool {
    for i in 0..asg.len() {
        if asg.get(i as VarId).is_negative() {
            return false;
        }
    }
    cs.iter().all(|c| c.holds(asg))
}

pub fn solve(sys: &System, obj: &Objective) -> SolveOutcome {
    let mut pins: Vec<Constraint> = Vec::new();
    let mut last: Option<Assignment> = None;
    let phases: &[(Sense, LinExpr)] = if obj.phases.is_empty() {
        &[(Sense::Minimize, LinExpr { terms: BTreeMap::new(), constant: Q::zero() })]
    } else {
        &obj.phases
    };
    for (sense, expr) in phases {
        let mut cs = sys.constraints.clone();
        cs.extend(pins.iter().cloned());
        match solve_single(sys.n_vars, &cs, *sense, expr) {
            SolveOutcome::Solution(asg) => {
                let opt = expr.eval(&asg);
                pins.push(Constraint::new(expr.clone(), Rel::Eq, LinExpr::constant(opt)));
                last = Some(asg);
            }
            other => return other,
        }
    }
    SolveOutcome::Solution(last.expect("at least one phase"))
}

/// One simplex solve: optimize `sense`/`expr` subject to `cs` and x >= 0.
fn solve_single(n_vars: u32, cs: &[Constraint], sense: Sense, expr: &LinExpr) -> SolveOutcome {
    let n = n_vars as usize;

    // Normalize constraints to (coeffs, rel, rhs_const) with rhs >= 0.
    struct Row {
        coeffs: Vec<Q>,
        rel: Rel,
        rhs: Q,
    }
    let mut rows: Vec<Row> = Vec::new();
    for c in cs {
        let diff = c.lhs.minus(&c.rhs);
        let mut coeffs = vec![Q::zero(); n];
        for (v, q) in &diff.terms {
            coeffs[*v as usize] = q.clone();
        }
        let mut rhs = -diff.constant.clone();
        let mut rel = c.rel;
        if diff.terms.is_empty() {
            // Constant constraint: check immediately.
            let ok = match rel {
                Rel::Le => Q::zero() <= rhs,
                Rel::Eq => rhs.is_zero(),
                Rel::Ge => Q::zero() >= rhs,
            };
            if !ok {
                return SolveOutcome::Infeasible;
            }
            continue;
        }
        if rhs.is_negative() {
            for q in coeffs.iter_mut() {
                *q = -q.clone();
            }
            rhs = -rhs;
            rel = match rel {
                Rel::Le => Rel::Ge,
                Rel::Eq => Rel::Eq,
                Rel::Ge => Rel::Le,
            };
        }
        rows.push(Row { coeffs, rel, rhs });
    }

    let m = rows.len();
    // Columns: structural n | slacks (one per inequality) | artificials.
    let n_slack = rows.iter().filter(|r| r.rel != Rel::Eq).count();
    let mut ncols = n + n_slack;
    let mut tableau: Vec<Vec<Q>> = Vec::with_capacity(m);
    let mut basis: Vec<usize> = Vec::with_capacity(m);
    let mut artificial_start = usize::MAX;

    let mut slack_idx = 0usize;
    let mut needs_artificial: Vec<bool> = Vec::with_capacity(m);
    for row in &rows {
        let mut t = row.coeffs.clone();
        t.resize(n + n_slack, Q::zero());
        match row.rel {
            Rel::Le => {
                t[n + slack_idx] = Q::from_integer(1.into());
                needs_artificial.push(false);
                basis.push(n + slack_idx);
                slack_idx += 1;
            }
            Rel::Ge => {
                t[n + slack_idx] = Q::from_integer((-1).into());
                needs_artificial.push(true);
                basis.push(usize::MAX); // artificial assigned below
                slack_idx += 1;
            }
            Rel::Eq => {
                needs_artificial.push(true);
                basis.push(usize::MAX);
            }
        }
        t.push(row.rhs.clone());
        tableau.push(t);
    }

    // Add artificial columns.
    let n_art = needs_artificial.iter().filter(|b| **b).count();
    if n_art > 0 {
        artificial_start = ncols;
        ncols += n_art;
        let mut art = 0usize;
        for (i, need) in needs_artificial.iter().enumerate() {
            let rhs = tableau[i].pop().expect("rhs");
            tableau[i].resize(ncols, Q::zero());
            if *need {
                tableau[i][artificial_start + art] = Q::from_integer(1.into());
                basis[i] = artificial_start + art;
                art += 1;
            }
            tableau[i].push(rhs);
        }
    } else {
        for t in tableau.iter_mut() {
            let rhs = t.pop().expect("rhs");
            t.resize(ncols, Q::zero());
            t.push(rhs);
        }
    }
    let rhs_col = ncols;

    let pivot = |tab: &mut Vec<Vec<Q>>, obj_row: &mut Vec<Q>, basis: &mut Vec<usize>, r: usize, c: usize| {
        let p = tab[r][c].clone();
        for q in tab[r].iter_mut() {
            *q /= &p;
        }
        for i in 0..tab.len() {
            if i != r && !tab[i][c].is_zero() {
                let factor = tab[i][c].clone();
                for j in 0..=rhs_col {
                    let delta = &factor * &tab[r][j];
                    tab[i][j] -= delta;
                }
            }
        }
        if !obj_row[c].is_zero() {
            let factor = obj_row[c].clone();
            for j in 0..=rhs_col {
                let delta = &factor * &tab[r][j];
                obj_row[j] -= delta;
            }
        }
        basis[r] = c;
    };

    // Runs simplex iterations on `obj_row` (maximization form: entering
    // column has negative reduced cost). `blocked` columns may not enter.
    let run = |tab: &mut Vec<Vec<Q>>,
               obj_row: &mut Vec<Q>,
               basis: &mut Vec<usize>,
               blocked_from: usize|
     -> Result<(), SolveOutcome> {
        loop {
            // Bland: smallest-index entering column with negative cost.
            let mut entering = None;
            for j in 0..ncols {
                if j >= blocked_from {
                    break;
                }
                if obj_row[j].is_negative() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(c) = entering else { return Ok(()) };
            // Ratio test; ties broken by smallest basic variable index.
            let mut leave: Option<(usize, Q)> = None;
            for (i, row) in tab.iter().enumerate() {
                if row[c].is_positive() {
                    let ratio = &row[rhs_col] / &row[c];
                    match &leave {
                        None => leave = Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < *br || (ratio == *br && basis[i] < basis[*bi]) {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(SolveOutcome::Unbounded);
            };
            pivot(tab, obj_row, basis, r, c);
        }
    };

    // Phase 1: drive artificials to zero.
    if n_art > 0 {
        let mut obj_row = vec![Q::zero(); ncols + 1];
        for a in 0..n_art {
            obj_row[artificial_start + a] = Q::from_integer(1.into());
        }
        // Express objective in terms of nonbasic variables.
        for (i, b) in basis.iter().enumerate() {
            if *b >= artificial_start && *b != usize::MAX {
                let factor = obj_row[*b].clone();
                if !factor.is_zero() {
                    for j in 0..=rhs_col {
                        let delta = &factor * &tableau[i][j];
                        obj_row[j] -= delta;
                    }
                }
            }
        }
        if let Err(_o) = run(&mut tableau, &mut obj_row, &mut basis, ncols) {
            // Phase 1 objective is bounded below by 0; unbounded cannot occur.
            return SolveOutcome::Infeasible;
        }
        if !obj_row[rhs_col].is_zero() {
            return SolveOutcome::Infeasible;
        }
        // Pivot remaining artificials out of the basis.
        let mut drop_rows: Vec<usize> = Vec::new();
        for r in 0..tableau.len() {
            if basis[r] >= artificial_start {
                let mut found = None;
                for j in 0..artificial_start {
                    if !tableau[r][j].is_zero() {
                        found = Some(j);
                        break;
                    }
                }
                match found {
                    Some(j) => pivot(&mut tableau, &mut obj_row, &mut basis, r, j),
                    None => drop_rows.push(r),
                }
            }
        }
        for r in drop_rows.into_iter().rev() {
            tableau.remove(r);
            basis.remove(r);
        }
    }

    // Phase 2: the real objective, as maximization.
    let enter_limit = if n_art > 0 { artificial_start } else { ncols };
    let mut c_vec = vec![Q::zero(); ncols + 1];
    for (v, q) in &expr.terms {
        let idx = *v as usize;
        if idx < n {
            c_vec[idx] = match sense {
                Sense::Maximize => q.clone(),
                Sense::Minimize => -q.clone(),
            };
        }
    }
    let mut obj_row = vec![Q::zero(); ncols + 1];
    for (j, cj) in c_vec.iter().enumerate() {
        obj_row[j] = -cj.clone();
    }
    for (i, b) in basis.iter().enumerate() {
        if *b < ncols && !obj_row[*b].is_zero() {
            let factor = obj_row[*b].clone();
            for j in 0..=rhs_col {
                let delta = &factor * &tableau[i][j];
                obj_row[j] -= delta;
            }
        }
    }
    if let Err(o) = run(&mut tableau, &mut obj_row, &mut basis, enter_limit) {
        return o;
    }

    let mut values = vec![Q::zero(); n];
    for (i, b) in basis.iter().enumerate() {
        if *b < n {
            values[*b] = tableau[i][rhs_col].clone();
        }
    }
    SolveOutcome::Solution(Assignment { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qint;

    fn q(n: i64) -> Q {
        qint(n)
    }

    #[test]
    fn min_x_ge_3() {
        let mut sys = System::default();
        let x = sys.fresh_var();
        sys.add(LinExpr::var(x), Rel::Ge, LinExpr::constant(q(3)));
        match solve(&sys, &Objective::minimize(LinExpr::var(x))) {
            SolveOutcome::Solution(asg) => assert_eq!(*asg.get(x), q(3)),
            other => panic!("expected solution, got {other:?}"),
        }
    }

    #[test]
    fn infeasible_box() {
        let mut sys = System::default();
        let x = sys.fresh_var();
        sys.add(LinExpr::var(x), Rel::Le, LinExpr::constant(q(-1)));
        assert_eq!(solve(&sys, &Objective::minimize(LinExpr::var(x))), SolveOutcome::Infeasible);
    }

    #[test]
    fn unbounded_max() {
        let mut sys = System::default();
        let x = sys.fresh_var();
        sys.add(LinExpr::var(x), Rel::Ge, LinExpr::constant(q(1)));
        let obj = Objective { phases: vec![(Sense::Maximize, LinExpr::var(x))] };
        assert_eq!(solve(&sys, &obj), SolveOutcome::Unbounded);
    }

    // Summary constraint system of a filtering function: q >= q' + 1,
    // p >= 8, p >= 3 + r, with r pinned to 0; lexicographic min (p, then q)
    // must land exactly on p = 8, q = 1, q' = 0.
    #[test]
    fn filter_summary_system() {
        let mut sys = System::default();
        let p = sys.fresh_var();
        let qv = sys.fresh_var();
        let qp = sys.fresh_var();
        let r = sys.fresh_var();
        sys.add(LinExpr::var(qv), Rel::Ge, LinExpr::var(qp).plus_const(&q(1)));
        sys.add(LinExpr::var(p), Rel::Ge, LinExpr::constant(q(8)));
        sys.add(LinExpr::var(p), Rel::Ge, LinExpr::var(r).plus_const(&q(3)));
        sys.add(LinExpr::var(r), Rel::Eq, LinExpr::constant(q(0)));
        let obj = Objective {
            phases: vec![(Sense::Minimize, LinExpr::var(p)), (Sense::Minimize, LinExpr::var(qv))],
        };
        match solve(&sys, &obj) {
            SolveOutcome::Solution(asg) => {
                assert_eq!(*asg.get(p), q(8));
                assert_eq!(*asg.get(qv), q(1));
                assert_eq!(*asg.get(qp), q(0));
                assert!(dual_check(&sys.constraints, &asg));
            }
            other => panic!("expected solution, got {other:?}"),
        }
    }

    #[test]
    fn dual_check_rejects_perturbation() {
        let mut sys = System::default();
        let x = sys.fresh_var();
        sys.add(LinExpr::var(x), Rel::Ge, LinExpr::constant(q(3)));
        let SolveOutcome::Solution(mut asg) = solve(&sys, &Objective::minimize(LinExpr::var(x))) else {
            panic!("solvable");
        };
        assert!(dual_check(&sys.constraints, &asg));
        // Tight constraint perturbed the wrong way must fail.
        asg.set(x, q(2));
        assert!(!dual_check(&sys.constraints, &asg));
    }

    #[test]
    fn empty_system_trivially_solvable() {
        let sys = System::default();
        match solve(&sys, &Objective::feasibility()) {
            SolveOutcome::Solution(asg) => {
                assert!(dual_check(&sys.constraints, &asg));
            }
            other => panic!("expected solution, got {other:?}"),
        }
    }

    #[test]
    fn determinism_two_runs_identical() {
        let mut sys = System::default();
        let a = sys.fresh_var();
        let b = sys.fresh_var();
        let c = sys.fresh_var();
        // a + b = 5, b + c >= 2, a <= 4: a degenerate-ish corner.
        sys.add(LinExpr::var(a).plus(&LinExpr::var(b)), Rel::Eq, LinExpr::constant(q(5)));
        sys.add(LinExpr::var(b).plus(&LinExpr::var(c)), Rel::Ge, LinExpr::constant(q(2)));
        sys.add(LinExpr::var(a), Rel::Le, LinExpr::constant(q(4)));
        let obj = Objective {
            phases: vec![(Sense::Maximize, LinExpr::var(a)), (Sense::Minimize, LinExpr::var(c))],
        };
        let r1 = solve(&sys, &obj);
        let r2 = solve(&sys, &obj);
        assert_eq!(r1, r2);
        if let SolveOutcome::Solution(asg) = r1 {
            assert_eq!(*asg.get(a), q(4));
            assert_eq!(*asg.get(b), q(1));
            assert_eq!(*asg.get(c), q(1));
        }
    }
}
