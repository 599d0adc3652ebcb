//! Column models as integer linear programs.
//!
//! A disequation `sum(w_i x_i) + c != 0 (mod b)` becomes the integer row
//! `0 < sum(w_i x_i) + c + k b < b` with a free integer `k`; a weak one
//! becomes `nu <= sum(w_i x_i) + c + k b <= (b-1) nu` and contributes its
//! weight to the objective when `nu = 1`.
//!
//! [`solve`] does not search over `k` and `nu`: both are determined by the
//! `x` values, so it branches on `x` only and propagates each disequation with
//! a single free variable by ruling out the one residue that zeroes it. The
//! ILP rows are what [`export_lp`] writes for external solvers.

use std::fmt::Write as _;

use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::gfield::{Digit, PrimeBase};
use crate::netcons::{Disequation, UnknownSlot};
use crate::profile::{format_weight, Weight};

/// Default node budget for [`solve`].
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// One integer row: `sum(coeff * x) + constant + b * k` kept away from zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IlpRow {
    /// `(variable index, coefficient)`, coefficients nonzero and `< b`.
    pub terms: Vec<(usize, Digit)>,
    pub constant: Digit,
    /// Inclusive bounds of the slack integer `k`.
    pub k_bounds: (i64, i64),
    /// `None` for hard rows.
    pub weight: Option<Weight>,
}

impl IlpRow {
    /// `sum(coeff) * (b - 1) + constant`, the largest value of the linear part.
    fn max_sum(&self, base: PrimeBase) -> i64 {
        let b1 = base.get() as i64 - 1;
        self.terms.iter().map(|&(_, w)| w as i64 * b1).sum::<i64>() + self.constant as i64
    }

    fn value(&self, base: PrimeBase, x: &[Digit]) -> Digit {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(v, w)| base.add(acc, base.mul(w, x[v])))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IlpModel {
    pub base: PrimeBase,
    /// `x` variables, sorted; each ranges over `0..b`.
    pub vars: Vec<UnknownSlot>,
    pub hard: Vec<IlpRow>,
    pub weak: Vec<IlpRow>,
    /// Set when a hard row has no terms and a zero constant.
    pub infeasible: bool,
}

/// Lowers disequations to the integer program.
pub fn build_ilp(base: PrimeBase, hard: &[Disequation], weak: &[(Disequation, Weight)]) -> IlpModel {
    let mut vars: Vec<UnknownSlot> = hard
        .iter()
        .chain(weak.iter().map(|(d, _)| d))
        .flat_map(|d| d.terms.iter().map(|t| t.0))
        .collect();
    vars.sort();
    vars.dedup();
    let index = |s: &UnknownSlot| vars.binary_search(s).expect("collected above");

    let b = base.get() as i64;
    let row = |d: &Disequation, weight: Option<Weight>| {
        let mut r = IlpRow {
            terms: d.terms.iter().map(|(s, w)| (index(s), *w)).collect(),
            constant: d.constant,
            k_bounds: (0, 0),
            weight,
        };
        let max = r.max_sum(base);
        // hard rows need 0 < e < b; weak rows must also admit e = 0 when nu = 0
        let lo = if weight.is_none() { -(max - 1).div_euclid(b) } else { -max.div_euclid(b) };
        r.k_bounds = (lo.min(0), 0);
        r
    };

    let hard_rows: Vec<IlpRow> = hard.iter().map(|d| row(d, None)).collect();
    let weak_rows = weak.iter().map(|(d, w)| row(d, Some(*w))).collect();
    let infeasible = hard_rows.iter().any(|r| r.terms.is_empty() && r.constant == 0);
    IlpModel { base, vars, hard: hard_rows, weak: weak_rows, infeasible }
}

impl IlpModel {
    /// A copy keeping only the first `n` hard rows.
    pub fn with_hard_prefix(&self, n: usize) -> Self {
        let hard: Vec<IlpRow> = self.hard[..n.min(self.hard.len())].to_vec();
        let infeasible = hard.iter().any(|r| r.terms.is_empty() && r.constant == 0);
        Self { base: self.base, vars: self.vars.clone(), hard, weak: self.weak.clone(), infeasible }
    }

    /// Objective of an arbitrary assignment, or `None` if it violates a hard row.
    pub fn evaluate(&self, x: &[Digit]) -> Option<Weight> {
        if self.hard.iter().any(|r| r.value(self.base, x) == 0) {
            return None;
        }
        Some(
            self.weak
                .iter()
                .filter(|r| r.value(self.base, x) != 0)
                .map(|r| r.weight.expect("weak row"))
                .fold(Weight::zero(), |a, w| a + w),
        )
    }

    /// Whether the integer rows of `row` admit some `k` (and `nu` for weak rows) given `x`.
    ///
    /// For weak rows `nu` is passed explicitly.
    pub fn row_admits(&self, row: &IlpRow, x: &[Digit], nu: Option<i64>) -> bool {
        let sum: i64 = row.terms.iter().map(|&(v, w)| w as i64 * x[v] as i64).sum::<i64>() + row.constant as i64;
        let b = self.base.get() as i64;
        (row.k_bounds.0..=row.k_bounds.1).any(|k| {
            let e = sum + k * b;
            match nu {
                None => 0 < e && e < b,
                Some(nu) => nu <= e && e <= (b - 1) * nu,
            }
        })
    }
}

/// Values chosen for one model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// One digit per entry of [`IlpModel::vars`].
    pub values: Vec<Digit>,
    /// `nu` per weak row.
    pub satisfied: Vec<bool>,
    pub objective: Weight,
}

impl Assignment {
    pub fn value_of(&self, model: &IlpModel, slot: UnknownSlot) -> Option<Digit> {
        model.vars.binary_search(&slot).ok().map(|i| self.values[i])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub assignment: Assignment,
    /// True when the node budget ran out before optimality was proven.
    pub suboptimal: bool,
    pub nodes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Solved(Solution),
    /// No assignment satisfies every hard row.
    HardInfeasible,
    /// The budget ran out before any hard-feasible assignment was found.
    Exhausted { nodes: u64 },
}

impl SolveOutcome {
    pub fn solution(&self) -> Option<&Solution> {
        match self {
            SolveOutcome::Solved(s) => Some(s),
            _ => None,
        }
    }
}

const UNSET: Digit = Digit::MAX;

struct Con {
    terms: Vec<(usize, Digit)>,
    constant: Digit,
    /// Scaled integer weight; `None` for hard.
    weight: Option<i128>,
}

struct Search {
    base: PrimeBase,
    b: usize,
    cons: Vec<Con>,
    occ: Vec<Vec<(usize, Digit)>>,
    value: Vec<Digit>,
    partial: Vec<Digit>,
    free: Vec<u32>,
    last_free: Vec<usize>,
    fixed: i128,
    pos_multi: i128,
    /// `gain[v * b + x]`: weight gained from weak rows whose last free variable is `v`.
    gain: Vec<i128>,
    forbid: Vec<u32>,
    forbidden: Vec<u32>,
    /// Random rank of each value per variable, for tie-breaking.
    rank: Vec<u32>,
    best: Option<(i128, Vec<Digit>)>,
    nodes: u64,
    budget: u64,
    aborted: bool,
    /// Set when the rows alone are contradictory.
    dead: bool,
}

impl Search {
    fn new(model: &IlpModel, scale: i128, seed: u64) -> Self {
        let base = model.base;
        let b = base.get() as usize;
        let n = model.vars.len();
        let cons: Vec<Con> = model
            .hard
            .iter()
            .map(|r| Con { terms: r.terms.clone(), constant: r.constant, weight: None })
            .chain(model.weak.iter().map(|r| Con {
                terms: r.terms.clone(),
                constant: r.constant,
                weight: Some(scaled(r.weight.expect("weak row"), scale)),
            }))
            .collect();
        let mut occ = vec![Vec::new(); n];
        for (ci, c) in cons.iter().enumerate() {
            for &(v, w) in &c.terms {
                occ[v].push((ci, w));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rank = vec![0u32; n * b];
        let mut order: Vec<u32> = (0..b as u32).collect();
        for v in 0..n {
            order.shuffle(&mut rng);
            for (pos, &x) in order.iter().enumerate() {
                rank[v * b + x as usize] = pos as u32;
            }
        }

        let mut s = Search {
            base,
            b,
            partial: cons.iter().map(|c| c.constant).collect(),
            free: cons.iter().map(|c| c.terms.len() as u32).collect(),
            last_free: vec![usize::MAX; cons.len()],
            cons,
            occ,
            value: vec![UNSET; n],
            fixed: 0,
            pos_multi: 0,
            gain: vec![0; n * b],
            forbid: vec![0; n * b],
            forbidden: vec![0; n],
            rank,
            best: None,
            nodes: 0,
            budget: 0,
            aborted: false,
            dead: false,
        };
        for ci in 0..s.cons.len() {
            let weight = s.cons[ci].weight;
            match s.cons[ci].terms.len() {
                0 => match weight {
                    Some(w) if s.partial[ci] != 0 => s.fixed += w,
                    Some(_) => {}
                    None if s.partial[ci] == 0 => s.dead = true,
                    None => {}
                },
                1 => {
                    let (u, cu) = s.cons[ci].terms[0];
                    s.last_free[ci] = u;
                    if s.open_single(ci, u, cu) {
                        s.dead = true;
                    }
                }
                _ => {
                    if let Some(w) = weight {
                        s.pos_multi += w.max(0);
                    }
                }
            }
        }
        s
    }

    /// Registers row `ci` as having `u` as its only free variable. Returns true on a domain wipe-out.
    fn open_single(&mut self, ci: usize, u: usize, cu: Digit) -> bool {
        let p = self.partial[ci];
        match self.cons[ci].weight {
            Some(w) => {
                for x in 0..self.b {
                    if self.base.add(p, self.base.mul(cu, x as Digit)) != 0 {
                        self.gain[u * self.b + x] += w;
                    }
                }
                false
            }
            None => {
                let r = self.root(p, cu);
                let slot = &mut self.forbid[u * self.b + r as usize];
                *slot += 1;
                if *slot == 1 {
                    self.forbidden[u] += 1;
                }
                self.forbidden[u] as usize == self.b
            }
        }
    }

    fn close_single(&mut self, ci: usize, u: usize, cu: Digit) {
        let p = self.partial[ci];
        match self.cons[ci].weight {
            Some(w) => {
                for x in 0..self.b {
                    if self.base.add(p, self.base.mul(cu, x as Digit)) != 0 {
                        self.gain[u * self.b + x] -= w;
                    }
                }
            }
            None => {
                let r = self.root(p, cu);
                let slot = &mut self.forbid[u * self.b + r as usize];
                *slot -= 1;
                if *slot == 0 {
                    self.forbidden[u] -= 1;
                }
            }
        }
    }

    /// The `x` with `p + cu * x == 0`.
    fn root(&self, p: Digit, cu: Digit) -> Digit {
        self.base.mul(self.base.neg(p), self.base.inv(cu).expect("nonzero coefficient"))
    }

    fn coeff_of(&self, ci: usize, v: usize) -> Digit {
        self.cons[ci].terms.iter().find(|t| t.0 == v).expect("term present").1
    }

    /// Returns true when the assignment makes some hard row unsatisfiable.
    fn assign(&mut self, v: usize, a: Digit) -> bool {
        self.value[v] = a;
        let mut conflict = false;
        for i in 0..self.occ[v].len() {
            let (ci, coef) = self.occ[v][i];
            match self.free[ci] {
                1 => {
                    self.close_single(ci, v, coef);
                    self.partial[ci] = self.base.add(self.partial[ci], self.base.mul(coef, a));
                    self.free[ci] = 0;
                    match self.cons[ci].weight {
                        Some(w) if self.partial[ci] != 0 => self.fixed += w,
                        Some(_) => {}
                        None if self.partial[ci] == 0 => conflict = true,
                        None => {}
                    }
                }
                2 => {
                    self.partial[ci] = self.base.add(self.partial[ci], self.base.mul(coef, a));
                    self.free[ci] = 1;
                    let u = self.cons[ci]
                        .terms
                        .iter()
                        .find(|t| self.value[t.0] == UNSET)
                        .expect("one free variable left")
                        .0;
                    self.last_free[ci] = u;
                    if let Some(w) = self.cons[ci].weight {
                        self.pos_multi -= w.max(0);
                    }
                    let cu = self.coeff_of(ci, u);
                    if self.open_single(ci, u, cu) {
                        conflict = true;
                    }
                }
                _ => {
                    self.partial[ci] = self.base.add(self.partial[ci], self.base.mul(coef, a));
                    self.free[ci] -= 1;
                }
            }
        }
        conflict
    }

    fn unassign(&mut self, v: usize, a: Digit) {
        for i in (0..self.occ[v].len()).rev() {
            let (ci, coef) = self.occ[v][i];
            match self.free[ci] {
                0 => {
                    if let Some(w) = self.cons[ci].weight {
                        if self.partial[ci] != 0 {
                            self.fixed -= w;
                        }
                    }
                    self.partial[ci] = self.base.sub(self.partial[ci], self.base.mul(coef, a));
                    self.free[ci] = 1;
                    self.open_single(ci, v, coef);
                }
                1 => {
                    let u = self.last_free[ci];
                    let cu = self.coeff_of(ci, u);
                    self.close_single(ci, u, cu);
                    if let Some(w) = self.cons[ci].weight {
                        self.pos_multi += w.max(0);
                    }
                    self.partial[ci] = self.base.sub(self.partial[ci], self.base.mul(coef, a));
                    self.free[ci] = 2;
                    self.last_free[ci] = usize::MAX;
                }
                _ => {
                    self.partial[ci] = self.base.sub(self.partial[ci], self.base.mul(coef, a));
                    self.free[ci] += 1;
                }
            }
        }
        self.value[v] = UNSET;
    }

    fn allowed(&self, v: usize, x: usize) -> bool {
        self.forbid[v * self.b + x] == 0
    }

    fn bound(&self) -> i128 {
        let mut bound = self.fixed + self.pos_multi;
        for v in 0..self.value.len() {
            if self.value[v] == UNSET {
                bound += (0..self.b)
                    .filter(|&x| self.allowed(v, x))
                    .map(|x| self.gain[v * self.b + x])
                    .max()
                    .unwrap_or(0);
            }
        }
        bound
    }

    fn pick_var(&self) -> Option<usize> {
        (0..self.value.len())
            .filter(|&v| self.value[v] == UNSET)
            .min_by_key(|&v| (self.b as u32 - self.forbidden[v], std::cmp::Reverse(self.occ[v].len()), v))
    }

    fn dfs(&mut self) {
        let Some(v) = self.pick_var() else {
            if self.best.as_ref().is_none_or(|(s, _)| self.fixed > *s) {
                self.best = Some((self.fixed, self.value.clone()));
            }
            return;
        };
        if let Some((best, _)) = &self.best {
            if self.bound() <= *best {
                return;
            }
        }
        let mut values: Vec<usize> = (0..self.b).filter(|&x| self.allowed(v, x)).collect();
        values.sort_by_key(|&x| (std::cmp::Reverse(self.gain[v * self.b + x]), self.rank[v * self.b + x]));
        for x in values {
            self.nodes += 1;
            if self.nodes > self.budget {
                self.aborted = true;
                return;
            }
            let conflict = self.assign(v, x as Digit);
            if !conflict {
                self.dfs();
            }
            self.unassign(v, x as Digit);
            if self.aborted {
                return;
            }
        }
    }

    /// First-improvement single-variable moves that keep every hard row satisfied.
    fn polish(&mut self) {
        let Some((mut score, mut x)) = self.best.take() else { return };
        let mut vals: Vec<Digit> = self
            .cons
            .iter()
            .map(|c| c.terms.iter().fold(c.constant, |acc, &(v, w)| self.base.add(acc, self.base.mul(w, x[v]))))
            .collect();
        for _ in 0..100 {
            let mut improved = false;
            #[allow(clippy::needless_range_loop)]
            for v in 0..x.len() {
                let cur = x[v];
                for alt in 0..self.b as Digit {
                    if alt == cur {
                        continue;
                    }
                    let step = self.base.sub(alt, cur);
                    let mut delta = 0i128;
                    let mut ok = true;
                    for &(ci, coef) in &self.occ[v] {
                        let nv = self.base.add(vals[ci], self.base.mul(coef, step));
                        match self.cons[ci].weight {
                            None if nv == 0 => {
                                ok = false;
                                break;
                            }
                            None => {}
                            Some(w) => delta += w * ((nv != 0) as i128 - (vals[ci] != 0) as i128),
                        }
                    }
                    if ok && delta > 0 {
                        for &(ci, coef) in &self.occ[v] {
                            vals[ci] = self.base.add(vals[ci], self.base.mul(coef, step));
                        }
                        x[v] = alt;
                        score += delta;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        self.best = Some((score, x));
    }
}

fn scaled(w: Weight, scale: i128) -> i128 {
    (*w.numer() as i128) * (scale / *w.denom() as i128)
}

/// Exact maximization of the weighted count of satisfied weak rows subject to
/// every hard row. Ties among optima are broken by a value order drawn from `seed`.
pub fn solve(model: &IlpModel, budget: u64, seed: u64) -> SolveOutcome {
    if model.infeasible {
        return SolveOutcome::HardInfeasible;
    }
    let scale: i128 = model
        .weak
        .iter()
        .filter_map(|r| r.weight)
        .fold(1i64, |acc, w| acc.lcm(w.denom())) as i128;
    let mut s = Search::new(model, scale, seed);
    if s.dead {
        return SolveOutcome::HardInfeasible;
    }

    // a short first pass finds an incumbent; local moves improve it before the full search
    s.budget = (budget / 4).max(1);
    s.dfs();
    let mut suboptimal = false;
    if s.aborted {
        s.polish();
        s.aborted = false;
        s.budget = budget.max(1);
        s.dfs();
        if s.aborted {
            s.polish();
            suboptimal = true;
        }
    }

    let nodes = s.nodes;
    match s.best {
        Some((score, values)) => {
            let objective = Rational64::new(score.to_i64().expect("objective fits i64"), scale as i64);
            let satisfied = model.weak.iter().map(|r| r.value(model.base, &values) != 0).collect();
            debug_assert_eq!(model.evaluate(&values), Some(objective));
            SolveOutcome::Solved(Solution { assignment: Assignment { values, satisfied, objective }, suboptimal, nodes })
        }
        None if suboptimal => SolveOutcome::Exhausted { nodes },
        None => SolveOutcome::HardInfeasible,
    }
}

fn var_name(model: &IlpModel, slot: &UnknownSlot) -> String {
    let single_column = model.vars.windows(2).all(|w| w[0].col == w[1].col);
    if single_column {
        format!("x_{}_{}", slot.dim, slot.row)
    } else {
        format!("x_{}_{}_{}", slot.dim, slot.row, slot.col)
    }
}

fn linear(out: &mut String, terms: impl IntoIterator<Item = (i64, String)>) {
    let mut first = true;
    for (coef, name) in terms {
        if coef == 0 {
            continue;
        }
        let sign = if coef < 0 { "-" } else { "+" };
        if first {
            if coef < 0 {
                out.push_str(" -");
            }
        } else {
            let _ = write!(out, " {sign}");
        }
        if coef.abs() == 1 {
            let _ = write!(out, " {name}");
        } else {
            let _ = write!(out, " {} {name}", coef.abs());
        }
        first = false;
    }
}

/// Writes the model in CPLEX LP format with deterministic ordering.
pub fn export_lp(model: &IlpModel) -> String {
    let b = model.base.get() as i64;
    let names: Vec<String> = model.vars.iter().map(|s| var_name(model, s)).collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "\\ base {}: {} x variables, {} hard rows, {} weak rows",
        b,
        model.vars.len(),
        model.hard.len(),
        model.weak.len()
    );
    out.push_str("Maximize\n obj:");
    for (j, r) in model.weak.iter().enumerate() {
        let w = r.weight.expect("weak row");
        let sign = if w.is_negative() { "-" } else { "+" };
        let _ = write!(out, " {sign} {} nu_{j}", format_weight(&w.abs()));
    }
    out.push_str("\nSubject To\n");

    let row_terms = |r: &IlpRow, k: usize| {
        r.terms
            .iter()
            .map(|&(v, w)| (w as i64, names[v].clone()))
            .chain(std::iter::once((b, format!("k_{k}"))))
            .collect::<Vec<_>>()
    };
    for (i, r) in model.hard.iter().enumerate() {
        let c = r.constant as i64;
        let _ = write!(out, " h{i}_lo:");
        linear(&mut out, row_terms(r, i));
        let _ = writeln!(out, " >= {}", 1 - c);
        let _ = write!(out, " h{i}_hi:");
        linear(&mut out, row_terms(r, i));
        let _ = writeln!(out, " <= {}", b - 1 - c);
    }
    let nh = model.hard.len();
    for (j, r) in model.weak.iter().enumerate() {
        let c = r.constant as i64;
        let mut lo = row_terms(r, nh + j);
        lo.push((-1, format!("nu_{j}")));
        let _ = write!(out, " w{j}_lo:");
        linear(&mut out, lo);
        let _ = writeln!(out, " >= {}", -c);
        let mut hi = row_terms(r, nh + j);
        hi.push((-(b - 1), format!("nu_{j}")));
        let _ = write!(out, " w{j}_hi:");
        linear(&mut out, hi);
        let _ = writeln!(out, " <= {}", -c);
    }

    out.push_str("Bounds\n");
    for name in &names {
        let _ = writeln!(out, " 0 <= {name} <= {}", b - 1);
    }
    for (i, r) in model.hard.iter().chain(&model.weak).enumerate() {
        let _ = writeln!(out, " {} <= k_{i} <= {}", r.k_bounds.0, r.k_bounds.1);
    }
    for j in 0..model.weak.len() {
        let _ = writeln!(out, " 0 <= nu_{j} <= 1");
    }
    out.push_str("General\n");
    let ints: Vec<String> = names
        .iter()
        .cloned()
        .chain((0..model.hard.len() + model.weak.len()).map(|i| format!("k_{i}")))
        .collect();
    for chunk in ints.chunks(8) {
        let _ = writeln!(out, " {}", chunk.join(" "));
    }
    out.push_str("End\n");
    out
}
