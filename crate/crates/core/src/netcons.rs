//! Net constraints as linear disequations on the newest matrix column.
//!
//! For a prefix size `c`, every k-vector selects the first `k_j` rows of the
//! top-left `c x c` block of each generator matrix. The selected rows form a
//! composite matrix whose full rank is equivalent to the net property for that
//! interval shape. With columns `1..c-1` fixed and column `c` unknown, Gaussian
//! elimination on the concrete part leaves one of three situations:
//!
//! - two or more rows vanish on the concrete columns: no choice of the unknown
//!   column restores full rank ([`EliminationOutcome::RankDeficient`]);
//! - no row vanishes: full rank whatever the column holds
//!   ([`EliminationOutcome::AlwaysFullRank`]);
//! - exactly one row vanishes: full rank iff the linear combination of
//!   unknowns accumulated in that row is nonzero
//!   ([`EliminationOutcome::Conditional`]).

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::gfield::{Digit, GFMatrix, PrimeBase};
use crate::profile::{ConstraintKind, Profile, Strength, Weight};

/// Row counts `k_j`, one per dimension of a constraint, in the constraint's dimension order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KVector(pub Vec<usize>);

impl KVector {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for KVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

/// All compositions of `total` into `dims` non-negative parts, lexicographic.
pub fn enumerate_kvectors(dims: usize, total: usize) -> Vec<KVector> {
    fn rec(dims: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<KVector>) {
        if cur.len() + 1 == dims {
            cur.push(left);
            out.push(KVector(cur.clone()));
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(dims, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if dims > 0 {
        rec(dims, total, &mut Vec::with_capacity(dims), &mut out);
    }
    out
}

/// k-vectors of generalized stratification: entries in `{floor(c/d), ceil(c/d)}` summing to `c`.
pub fn stratification_kvectors(dims: usize, c: usize) -> Vec<KVector> {
    if dims == 0 {
        return Vec::new();
    }
    let lo = c / dims;
    let extra = c % dims;
    if extra == 0 {
        return vec![KVector(vec![lo; dims])];
    }
    // choose which `extra` coordinates get `lo + 1`, in lexicographic order of the vector
    let mut out = Vec::new();
    for mask in 0u64..1 << dims {
        if mask.count_ones() as usize == extra {
            out.push(KVector((0..dims).map(|i| lo + (mask >> (dims - 1 - i) & 1) as usize).collect()));
        }
    }
    out.sort();
    out
}

/// Entry `c^{(dim)}_{row,col}` of a generator matrix still to be chosen (1-based row and column).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UnknownSlot {
    pub dim: usize,
    pub row: usize,
    pub col: usize,
}

impl fmt::Display for UnknownSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}[{},{}]", self.dim, self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiseqStrength {
    Hard,
    Weak { weight: Weight, group: usize },
}

/// `sum(coeff * value) + constant != 0` over `F_b`.
///
/// Terms are sorted by slot, have nonzero coefficients, and are scaled so that
/// the first coefficient is 1; scaling by a nonzero digit does not change
/// which assignments satisfy the disequation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Disequation {
    pub base: PrimeBase,
    pub terms: Vec<(UnknownSlot, Digit)>,
    pub constant: Digit,
    pub strength: DiseqStrength,
}

impl Disequation {
    /// Combines repeated slots and normalizes; coefficients may be any integers.
    pub fn new(
        base: PrimeBase,
        terms: impl IntoIterator<Item = (UnknownSlot, i64)>,
        constant: i64,
        strength: DiseqStrength,
    ) -> Self {
        let mut terms: Vec<(UnknownSlot, i64)> = terms.into_iter().collect();
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(UnknownSlot, Digit)> = Vec::with_capacity(terms.len());
        for (slot, coeff) in terms {
            let d = base.reduce(coeff);
            match merged.last_mut() {
                Some(last) if last.0 == slot => last.1 = base.add(last.1, d),
                _ => merged.push((slot, d)),
            }
        }
        merged.retain(|t| t.1 != 0);
        let mut constant = base.reduce(constant);
        if let Some(&(_, lead)) = merged.first() {
            let inv = base.inv(lead).expect("nonzero lead");
            for t in &mut merged {
                t.1 = base.mul(t.1, inv);
            }
            constant = base.mul(constant, inv);
        }
        Self { base, terms: merged, constant, strength }
    }

    /// `sum(coeff * value) + constant` for the given assignment.
    pub fn evaluate(&self, mut value: impl FnMut(UnknownSlot) -> Digit) -> Digit {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(slot, coeff)| self.base.add(acc, self.base.mul(coeff, value(slot))))
    }

    pub fn is_satisfied(&self, value: impl FnMut(UnknownSlot) -> Digit) -> bool {
        self.evaluate(value) != 0
    }

    /// True when no assignment satisfies the disequation (`0 != 0`).
    pub fn is_contradiction(&self) -> bool {
        self.terms.is_empty() && self.constant == 0
    }

    fn key(&self) -> (Vec<(UnknownSlot, Digit)>, Digit) {
        (self.terms.clone(), self.constant)
    }
}

impl fmt::Display for Disequation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (slot, coeff)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if *coeff == 1 {
                write!(f, "{slot}")?;
            } else {
                write!(f, "{coeff}*{slot}")?;
            }
        }
        if self.constant != 0 || self.terms.is_empty() {
            if !self.terms.is_empty() {
                write!(f, " + ")?;
            }
            write!(f, "{}", self.constant)?;
        }
        write!(f, " != 0 (mod {})", self.base)
    }
}

/// A composite matrix whose first `cols - 1` columns are known and whose last
/// column is one unknown slot per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicMatrix {
    pub concrete: GFMatrix,
    pub slots: Vec<UnknownSlot>,
}

impl SymbolicMatrix {
    pub fn rows(&self) -> usize {
        self.slots.len()
    }

    pub fn cols(&self) -> usize {
        self.concrete.cols() + 1
    }

    /// The concrete matrix obtained by substituting values for the slots.
    pub fn substitute(&self, mut value: impl FnMut(UnknownSlot) -> Digit) -> GFMatrix {
        let rows = self.rows();
        let cols = self.cols();
        let mut m = GFMatrix::zeros(self.concrete.base(), rows, cols);
        for r in 0..rows {
            for c in 0..cols - 1 {
                m.set(r, c, self.concrete.get(r, c));
            }
            m.set(r, cols - 1, value(self.slots[r]));
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssembleError {
    #[error("dimension {dim}: k={k} rows requested but the matrix has {available}")]
    NotEnoughRows { dim: usize, k: usize, available: usize },
    #[error("prefix size {c} exceeds matrix width {cols}")]
    PrefixTooLarge { c: usize, cols: usize },
    #[error("prefix size must be at least 1")]
    EmptyPrefix,
    #[error("dimension {0} has no generator matrix")]
    UnknownDimension(usize),
    #[error("k-vector has {got} entries for {dims} dimensions")]
    LengthMismatch { dims: usize, got: usize },
}

/// Stacks the first `k_j` rows of each `C_dims[j]` restricted to columns `1..c`,
/// treating column `c` as unknown.
pub fn assemble_mk(
    gens: &[GFMatrix],
    dims: &[usize],
    k: &KVector,
    c: usize,
) -> Result<SymbolicMatrix, AssembleError> {
    if c == 0 {
        return Err(AssembleError::EmptyPrefix);
    }
    if k.0.len() != dims.len() {
        return Err(AssembleError::LengthMismatch { dims: dims.len(), got: k.0.len() });
    }
    let base = gens.first().map(GFMatrix::base).ok_or(AssembleError::UnknownDimension(0))?;
    let rows = k.total();
    let mut concrete = GFMatrix::zeros(base, rows, c - 1);
    let mut slots = Vec::with_capacity(rows);
    for (&dim, &kj) in dims.iter().zip(&k.0) {
        let g = gens.get(dim).ok_or(AssembleError::UnknownDimension(dim))?;
        if kj > g.rows() {
            return Err(AssembleError::NotEnoughRows { dim, k: kj, available: g.rows() });
        }
        if c > g.cols() {
            return Err(AssembleError::PrefixTooLarge { c, cols: g.cols() });
        }
        for l in 0..kj {
            let r = slots.len();
            for col in 0..c - 1 {
                concrete.set(r, col, g.get(l, col));
            }
            slots.push(UnknownSlot { dim, row: l + 1, col: c });
        }
    }
    Ok(SymbolicMatrix { concrete, slots })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EliminationOutcome {
    RankDeficient,
    AlwaysFullRank,
    Conditional(Disequation),
}

/// Gaussian elimination on the concrete columns, carrying the unknown column
/// as a linear form over the row slots. The returned disequation is tagged hard.
pub fn symbolic_eliminate(m: &SymbolicMatrix) -> EliminationOutcome {
    let base = m.concrete.base();
    let rows = m.rows();
    let ccols = m.concrete.cols();
    // each row: concrete digits followed by the coefficient of every row slot
    let width = ccols + rows;
    let mut a = vec![0 as Digit; rows * width];
    for r in 0..rows {
        for c in 0..ccols {
            a[r * width + c] = m.concrete.get(r, c);
        }
        a[r * width + ccols + r] = 1;
    }

    let mut rank = 0;
    for col in 0..ccols {
        if rank == rows {
            break;
        }
        let Some(pivot) = (rank..rows).find(|&r| a[r * width + col] != 0) else {
            continue;
        };
        if pivot != rank {
            for c in 0..width {
                a.swap(pivot * width + c, rank * width + c);
            }
        }
        let inv = base.inv(a[rank * width + col]).expect("pivot is nonzero");
        for r in rank + 1..rows {
            let f = base.mul(a[r * width + col], inv);
            if f == 0 {
                continue;
            }
            for c in col..width {
                a[r * width + c] = base.sub(a[r * width + c], base.mul(f, a[rank * width + c]));
            }
        }
        rank += 1;
    }

    match rows - rank {
        0 => EliminationOutcome::AlwaysFullRank,
        1 => {
            let row = &a[rank * width + ccols..(rank + 1) * width];
            let terms = m.slots.iter().zip(row).map(|(&s, &d)| (s, d as i64));
            EliminationOutcome::Conditional(Disequation::new(base, terms, 0, DiseqStrength::Hard))
        }
        _ => EliminationOutcome::RankDeficient,
    }
}

/// One interval shape of one profile constraint.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubConstraint {
    /// Index into the profile's constraint list.
    pub constraint: usize,
    pub kvector: KVector,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourcedDisequation {
    pub disequation: Disequation,
    pub source: SubConstraint,
}

/// Per-constraint accounting of sub-constraints at one prefix size.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConstraintTally {
    pub total: usize,
    pub always_full: usize,
    pub conditional: usize,
    pub rank_deficient: usize,
}

/// Everything the solver needs for one column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSystem {
    pub column: usize,
    pub hard: Vec<SourcedDisequation>,
    /// Weak disequations; the group id of entry `i` is `i`.
    pub weak: Vec<SourcedDisequation>,
    /// Weak sub-constraints that no column choice can satisfy.
    pub forced_failures: Vec<SubConstraint>,
    pub tallies: Vec<ConstraintTally>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ColumnError {
    #[error("column {column}: constraint #{} k={} is rank deficient for every choice", .origin.constraint, .origin.kvector)]
    HardInfeasible { column: usize, origin: SubConstraint },
    #[error(transparent)]
    Assemble(#[from] AssembleError),
}

/// The k-vectors a constraint contributes at prefix size `c`.
pub fn kvectors_at(kind: ConstraintKind, dims: usize, c: usize) -> Vec<KVector> {
    match kind {
        ConstraintKind::Net { t } if c > t => enumerate_kvectors(dims, c - t),
        ConstraintKind::Net { .. } => Vec::new(),
        ConstraintKind::Stratified => stratification_kvectors(dims, c),
    }
}

/// Gathers the disequations on column `c` (1-based) of all generator matrices,
/// given that columns `1..c-1` of `gens` are fixed.
pub fn constraints_for_column(
    profile: &Profile,
    gens: &[GFMatrix],
    c: usize,
) -> Result<ColumnSystem, ColumnError> {
    let mut sys = ColumnSystem {
        column: c,
        hard: Vec::new(),
        weak: Vec::new(),
        forced_failures: Vec::new(),
        tallies: vec![ConstraintTally::default(); profile.constraints.len()],
    };
    let mut seen_hard = HashSet::new();

    for (ci, nc) in profile.constraints.iter().enumerate() {
        let kvecs = kvectors_at(nc.kind, nc.dims.len(), c);
        let outcomes = kvecs
            .par_iter()
            .map(|k| assemble_mk(gens, &nc.dims, k, c).map(|m| symbolic_eliminate(&m)))
            .collect::<Result<Vec<_>, _>>()?;

        let tally = &mut sys.tallies[ci];
        tally.total = kvecs.len();
        for (k, outcome) in kvecs.into_iter().zip(outcomes) {
            let source = SubConstraint { constraint: ci, kvector: k };
            match outcome {
                EliminationOutcome::AlwaysFullRank => tally.always_full += 1,
                EliminationOutcome::RankDeficient => {
                    tally.rank_deficient += 1;
                    match nc.strength {
                        Strength::Hard => return Err(ColumnError::HardInfeasible { column: c, origin: source }),
                        Strength::Weak(_) => sys.forced_failures.push(source),
                    }
                }
                EliminationOutcome::Conditional(mut d) => {
                    tally.conditional += 1;
                    match nc.strength {
                        Strength::Hard => {
                            if seen_hard.insert(d.key()) {
                                sys.hard.push(SourcedDisequation { disequation: d, source });
                            }
                        }
                        Strength::Weak(weight) => {
                            d.strength = DiseqStrength::Weak { weight, group: sys.weak.len() };
                            sys.weak.push(SourcedDisequation { disequation: d, source });
                        }
                    }
                }
            }
        }
    }
    Ok(sys)
}
