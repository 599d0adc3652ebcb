//! Greedy column-by-column construction of generator matrices.
//!
//! Column `c` of every matrix is chosen at once: rows `1..=c` come from the
//! solver (or uniformly at random where no disequation mentions them) and rows
//! `c+1..=m` are random, since no `M_k` with `sum(k) <= c` reads them yet.

use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gfield::{Digit, FieldError, GFMatrix, PrimeBase};
use crate::gfsolve::{build_ilp, solve, IlpModel, SolveOutcome, DEFAULT_BUDGET};
use crate::netcons::{constraints_for_column, AssembleError, ColumnError, ColumnSystem, KVector, SubConstraint, UnknownSlot};
use crate::profile::{Profile, Strength, Weight};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildOptions {
    pub seed: u64,
    /// Whole-build attempts after the first, with seeds `seed + 1`, `seed + 2`, ...
    pub restarts: usize,
    /// Node budget per column solve.
    pub budget: u64,
    /// Keep each column's ILP in the provenance.
    pub keep_models: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { seed: 0, restarts: 8, budget: DEFAULT_BUDGET, keep_models: false }
    }
}

/// Satisfied and total sub-constraints of one profile constraint at one column.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SubCount {
    pub satisfied: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnStats {
    pub column: usize,
    /// Distinct hard disequations handed to the solver.
    pub hard_rows: usize,
    pub weak_satisfied: usize,
    pub weak_total: usize,
    /// Summed weight of satisfied weak sub-constraints, including those satisfied by every choice.
    pub objective: Weight,
    /// The part of `objective` decided by the solver.
    pub solver_objective: Weight,
    pub suboptimal: bool,
    pub nodes: u64,
    /// Indexed like the profile's constraints.
    pub per_constraint: Vec<SubCount>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    /// SHA-256 of the canonical profile text, hex.
    pub profile_hash: String,
    pub base_seed: u64,
    /// Seed of the successful attempt.
    pub seed: u64,
    pub attempts: usize,
    pub columns: Vec<ColumnStats>,
    pub models: Vec<IlpModel>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSet {
    pub base: PrimeBase,
    pub m: usize,
    pub s: usize,
    pub matrices: Vec<GFMatrix>,
    /// Present for sets produced by [`build`], absent for sets read from a file.
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeneratorError {
    #[error("need at least one matrix")]
    Empty,
    #[error("matrix {index} is {rows}x{cols}, expected {m}x{m}")]
    Shape { index: usize, rows: usize, cols: usize, m: usize },
    #[error("matrix {index} uses base {got}, expected {expected}")]
    Base { index: usize, expected: u32, got: u32 },
}

impl GeneratorSet {
    pub fn from_matrices(matrices: Vec<GFMatrix>) -> Result<Self, GeneratorError> {
        let first = matrices.first().ok_or(GeneratorError::Empty)?;
        let base = first.base();
        let m = first.rows();
        for (index, g) in matrices.iter().enumerate() {
            if g.rows() != m || g.cols() != m {
                return Err(GeneratorError::Shape { index, rows: g.rows(), cols: g.cols(), m });
            }
            if g.base() != base {
                return Err(GeneratorError::Base { index, expected: base.get(), got: g.base().get() });
            }
        }
        Ok(Self { base, m, s: matrices.len(), matrices, provenance: None })
    }

    /// Identity matrices: every dimension is the radical inverse.
    pub fn identity(base: PrimeBase, s: usize, m: usize) -> Self {
        Self { base, m, s, matrices: vec![GFMatrix::identity(base, m); s], provenance: None }
    }

    /// Uniformly random matrices, the unconstrained baseline.
    pub fn random(base: PrimeBase, s: usize, m: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = base.get() as Digit;
        let matrices = (0..s)
            .map(|_| {
                let mut g = GFMatrix::zeros(base, m, m);
                for r in 0..m {
                    for c in 0..m {
                        g.set(r, c, rng.gen_range(0..b));
                    }
                }
                g
            })
            .collect();
        Self { base, m, s, matrices, provenance: None }
    }

    /// The leading `m2 x m2` sub-matrices.
    pub fn leading(&self, m2: usize) -> Self {
        let m2 = m2.min(self.m);
        Self {
            base: self.base,
            m: m2,
            s: self.s,
            matrices: self.matrices.iter().map(|g| g.submatrix(m2, m2)).collect(),
            provenance: None,
        }
    }

    /// Number of points, `b^m`, if it fits.
    pub fn capacity(&self) -> Option<u64> {
        self.base.checked_pow(self.m)
    }
}

/// Why a build could not satisfy its hard constraints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Infeasibility {
    /// 1-based column.
    pub column: usize,
    /// Index into the profile's constraints.
    pub constraint: usize,
    /// Canonical text of that constraint.
    pub constraint_text: String,
    pub dims: Vec<usize>,
    pub kvector: KVector,
    /// True when the sub-matrix is singular for every choice of the column; false
    /// when each sub-constraint is satisfiable alone but not together with earlier ones.
    pub rank_deficient: bool,
    pub attempts: usize,
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dims: Vec<String> = self.dims.iter().map(ToString::to_string).collect();
        write!(
            f,
            "column {}: constraint #{} `{}` on dims {{{}}} with k={} {} (after {} attempt{})",
            self.column,
            self.constraint + 1,
            self.constraint_text,
            dims.join(","),
            self.kvector,
            if self.rank_deficient {
                "is rank deficient for every choice of the column"
            } else {
                "conflicts with the hard constraints before it"
            },
            self.attempts,
            if self.attempts == 1 { "" } else { "s" },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("infeasible at {0}")]
    Infeasible(Infeasibility),
    #[error("column {column}: node budget exhausted before any feasible column was found (after {attempts} attempts)")]
    Exhausted { column: usize, attempts: usize },
    #[error(transparent)]
    Assemble(#[from] AssembleError),
}

/// SHA-256 of the profile's canonical text.
pub fn profile_hash(profile: &Profile) -> String {
    let digest = Sha256::digest(profile.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// The integer program for column `c`, given columns `1..c` of `gens`.
pub fn column_model(profile: &Profile, gens: &[GFMatrix], c: usize) -> Result<(ColumnSystem, IlpModel), ColumnError> {
    let sys = constraints_for_column(profile, gens, c)?;
    let hard: Vec<_> = sys.hard.iter().map(|d| d.disequation.clone()).collect();
    let weak: Vec<_> = sys
        .weak
        .iter()
        .map(|d| {
            let w = profile.constraints[d.source.constraint].strength.weight().expect("weak source");
            (d.disequation.clone(), w)
        })
        .collect();
    let model = build_ilp(profile.base, &hard, &weak);
    Ok((sys, model))
}

enum Attempt {
    Done(Vec<GFMatrix>, Vec<ColumnStats>, Vec<IlpModel>),
    Infeasible { column: usize, origin: SubConstraint, rank_deficient: bool },
    Exhausted { column: usize },
}

fn attempt(profile: &Profile, seed: u64, opts: &BuildOptions) -> Result<Attempt, AssembleError> {
    let base = profile.base;
    let b = base.get() as Digit;
    let m = profile.size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gens = vec![GFMatrix::zeros(base, m, m); profile.dimensions];
    let mut columns = Vec::with_capacity(m);
    let mut models = Vec::new();

    for c in 1..=m {
        let (sys, model) = match column_model(profile, &gens, c) {
            Ok(x) => x,
            Err(ColumnError::HardInfeasible { column, origin }) => {
                return Ok(Attempt::Infeasible { column, origin, rank_deficient: true })
            }
            Err(ColumnError::Assemble(e)) => return Err(e),
        };
        let solution = match solve(&model, opts.budget, rng.gen()) {
            SolveOutcome::Solved(s) => s,
            SolveOutcome::HardInfeasible => {
                let origin = first_conflict(&model, &sys, opts.budget);
                return Ok(Attempt::Infeasible { column: c, origin, rank_deficient: false });
            }
            SolveOutcome::Exhausted { .. } => return Ok(Attempt::Exhausted { column: c }),
        };

        for (dim, g) in gens.iter_mut().enumerate() {
            for row in 1..=m {
                let solved = if row <= c { solution.assignment.value_of(&model, UnknownSlot { dim, row, col: c }) } else { None };
                let v = solved.unwrap_or_else(|| rng.gen_range(0..b));
                g.set(row - 1, c - 1, v);
            }
        }

        let mut per_constraint: Vec<SubCount> = sys
            .tallies
            .iter()
            .zip(&profile.constraints)
            .map(|(t, nc)| SubCount {
                satisfied: if nc.strength.is_hard() { t.total } else { t.always_full },
                total: t.total,
            })
            .collect();
        let mut objective = Weight::zero();
        for (ci, nc) in profile.constraints.iter().enumerate() {
            if let Strength::Weak(w) = nc.strength {
                objective += w * Weight::from_integer(sys.tallies[ci].always_full as i64);
            }
        }
        for (d, &sat) in sys.weak.iter().zip(&solution.assignment.satisfied) {
            if sat {
                let ci = d.source.constraint;
                per_constraint[ci].satisfied += 1;
                objective += profile.constraints[ci].strength.weight().expect("weak source");
            }
        }
        let weak_ids = || profile.constraints.iter().enumerate().filter(|(_, nc)| !nc.strength.is_hard()).map(|(i, _)| i);
        columns.push(ColumnStats {
            column: c,
            hard_rows: model.hard.len(),
            weak_satisfied: weak_ids().map(|i| per_constraint[i].satisfied).sum(),
            weak_total: weak_ids().map(|i| per_constraint[i].total).sum(),
            objective,
            solver_objective: solution.assignment.objective,
            suboptimal: solution.suboptimal,
            nodes: solution.nodes,
            per_constraint,
        });
        if opts.keep_models {
            models.push(model);
        }
    }
    Ok(Attempt::Done(gens, columns, models))
}

/// The hard sub-constraint that first makes the column infeasible, in gathering order.
fn first_conflict(model: &IlpModel, sys: &ColumnSystem, budget: u64) -> SubConstraint {
    let hard_only = IlpModel { weak: Vec::new(), ..model.clone() };
    let infeasible = |n: usize| matches!(solve(&hard_only.with_hard_prefix(n), budget, 0), SolveOutcome::HardInfeasible);
    // smallest n whose prefix is infeasible; the full set is known to be
    let (mut lo, mut hi) = (1, model.hard.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if infeasible(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    sys.hard[hi.saturating_sub(1)].source.clone()
}

/// Builds generator matrices satisfying every hard constraint of `profile`,
/// restarting the whole build with the next seed when a column is infeasible.
pub fn build(profile: &Profile, opts: &BuildOptions) -> Result<GeneratorSet, BuildError> {
    let mut last = None;
    for r in 0..=opts.restarts {
        let seed = opts.seed.wrapping_add(r as u64);
        let attempts = r + 1;
        match attempt(profile, seed, opts)? {
            Attempt::Done(matrices, columns, models) => {
                return Ok(GeneratorSet {
                    base: profile.base,
                    m: profile.size,
                    s: profile.dimensions,
                    matrices,
                    provenance: Some(Provenance {
                        profile_hash: profile_hash(profile),
                        base_seed: opts.seed,
                        seed,
                        attempts,
                        columns,
                        models,
                    }),
                });
            }
            Attempt::Infeasible { column, origin, rank_deficient } => {
                let nc = &profile.constraints[origin.constraint];
                last = Some(BuildError::Infeasible(Infeasibility {
                    column,
                    constraint: origin.constraint,
                    constraint_text: nc.to_string(),
                    dims: nc.dims.clone(),
                    kvector: origin.kvector,
                    rank_deficient,
                    attempts,
                }));
            }
            Attempt::Exhausted { column } => last = Some(BuildError::Exhausted { column, attempts }),
        }
    }
    Err(last.expect("at least one attempt"))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct MatrixFileError {
    pub line: usize,
    pub kind: MatrixFileErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatrixFileErrorKind {
    #[error("expected header `b=<b> s=<s> m=<m>`")]
    Header,
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("expected {expected} digits, found {got}")]
    RowLength { expected: usize, got: usize },
    #[error("invalid digit `{0}`")]
    Digit(String),
    #[error("expected a blank line between matrices")]
    Separator,
    #[error("expected {expected} matrices, found {got}")]
    MatrixCount { expected: usize, got: usize },
    #[error("s and m must be positive")]
    Zero,
}

impl fmt::Display for GeneratorSet {
    /// The matrix file format: a header line, then `s` blocks of `m` rows separated by blank lines.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "b={} s={} m={}", self.base, self.s, self.m)?;
        for (j, g) in self.matrices.iter().enumerate() {
            if j > 0 {
                writeln!(f)?;
            }
            for r in 0..g.rows() {
                let row: Vec<String> = g.row(r).iter().map(ToString::to_string).collect();
                writeln!(f, "{}", row.join(" "))?;
            }
        }
        Ok(())
    }
}

impl FromStr for GeneratorSet {
    type Err = MatrixFileError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        parse_matrices(text)
    }
}

/// Reads the matrix file format written by the `Display` impl.
pub fn parse_matrices(text: &str) -> Result<GeneratorSet, MatrixFileError> {
    let err = |line: usize, kind: MatrixFileErrorKind| MatrixFileError { line, kind };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (hline, header) = lines.next().ok_or(err(1, MatrixFileErrorKind::Header))?;

    let mut b = None;
    let mut s = None;
    let mut m = None;
    for tok in header.split_whitespace() {
        let (key, val) = tok.split_once('=').ok_or(err(hline, MatrixFileErrorKind::Header))?;
        let val: usize = val.parse().map_err(|_| err(hline, MatrixFileErrorKind::Header))?;
        let slot = match key {
            "b" => &mut b,
            "s" => &mut s,
            "m" => &mut m,
            _ => return Err(err(hline, MatrixFileErrorKind::Header)),
        };
        if slot.replace(val).is_some() {
            return Err(err(hline, MatrixFileErrorKind::Header));
        }
    }
    let (Some(b), Some(s), Some(m)) = (b, s, m) else {
        return Err(err(hline, MatrixFileErrorKind::Header));
    };
    if s == 0 || m == 0 {
        return Err(err(hline, MatrixFileErrorKind::Zero));
    }
    let base = PrimeBase::new(u32::try_from(b).unwrap_or(u32::MAX)).map_err(|e| err(hline, e.into()))?;

    let mut matrices = Vec::with_capacity(s);
    let mut rows: Vec<Vec<Digit>> = Vec::with_capacity(m);
    let mut last_line = hline;
    for (no, line) in lines {
        last_line = no;
        if line.is_empty() {
            if !rows.is_empty() {
                return Err(err(no, MatrixFileErrorKind::RowLength { expected: m, got: 0 }));
            }
            continue;
        }
        if rows.is_empty() && !matrices.is_empty() && matrices.len() == s {
            return Err(err(no, MatrixFileErrorKind::MatrixCount { expected: s, got: s + 1 }));
        }
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<Digit>().map_err(|_| err(no, MatrixFileErrorKind::Digit(t.to_string()))))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != m {
            return Err(err(no, MatrixFileErrorKind::RowLength { expected: m, got: row.len() }));
        }
        rows.push(row);
        if rows.len() == m {
            let g = GFMatrix::from_rows(base, &rows).map_err(|e| err(no, e.into()))?;
            matrices.push(g);
            rows.clear();
        }
    }
    if !rows.is_empty() || matrices.len() != s {
        return Err(err(last_line + 1, MatrixFileErrorKind::MatrixCount { expected: s, got: matrices.len() }));
    }
    Ok(GeneratorSet { base, m, s, matrices, provenance: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcons::enumerate_kvectors;
    use crate::profile::parse_profile;

    fn profile(text: &str) -> Profile {
        parse_profile(text).unwrap()
    }

    /// Every `M_k` of the hard `net` constraints has full rank at every prefix.
    fn hard_nets_hold(p: &Profile, g: &GeneratorSet) -> bool {
        p.constraints.iter().filter(|c| c.strength.is_hard()).all(|nc| {
            let t = nc.t();
            (t + 1..=p.size).all(|c| {
                enumerate_kvectors(nc.dims.len(), c - t).iter().all(|k| {
                    let mut rows = Vec::new();
                    for (&d, &kj) in nc.dims.iter().zip(&k.0) {
                        for r in 0..kj {
                            rows.push(g.matrices[d].row(r)[..c].to_vec());
                        }
                    }
                    GFMatrix::from_rows(p.base, &rows).unwrap().is_full_row_rank()
                })
            })
        })
    }

    #[test]
    fn one_dimension_has_invertible_leading_blocks() {
        let p = profile("s=1\nm=3\nb=2\nnet 0\n");
        for seed in 0..5 {
            let g = build(&p, &BuildOptions { seed, ..Default::default() }).unwrap();
            for n in 1..=3 {
                assert_eq!(g.matrices[0].submatrix(n, n).rank(), n);
            }
        }
    }

    #[test]
    fn pair_builds_and_holds() {
        let p = profile("s=2\nm=2\nb=2\nnet 0 1\n");
        let g = build(&p, &BuildOptions::default()).unwrap();
        assert!(hard_nets_hold(&p, &g));
        let prov = g.provenance.as_ref().unwrap();
        assert_eq!(prov.attempts, 1);
        assert_eq!(prov.columns.len(), 2);
    }

    #[test]
    fn pairwise_limit_is_the_base() {
        for b in [2u32, 3] {
            let pairs = |s: usize| {
                let mut t = format!("s={s}\nm=2\nb={b}\n");
                for i in 0..s {
                    for j in i + 1..s {
                        t += &format!("net {i} {j}\n");
                    }
                }
                profile(&t)
            };
            let ok = build(&pairs(b as usize), &BuildOptions::default()).unwrap();
            assert!(hard_nets_hold(&pairs(b as usize), &ok));
            match build(&pairs(b as usize + 1), &BuildOptions { restarts: 2, ..Default::default() }) {
                Err(BuildError::Infeasible(inf)) => {
                    assert_eq!(inf.column, 2);
                    assert_eq!(inf.dims.len(), 2);
                    assert_eq!(inf.attempts, 3);
                }
                other => panic!("expected infeasible, got {other:?}"),
            }
        }
    }

    #[test]
    fn same_seed_same_matrices() {
        let p = profile("s=3\nm=4\nb=3\nnet 0 1\nweak 1 net 1 2\nweak -1 net t1 0 2\n");
        let opts = BuildOptions { seed: 42, ..Default::default() };
        let a = build(&p, &opts).unwrap();
        let b = build(&p, &opts).unwrap();
        assert_eq!(a, b);
        assert!(hard_nets_hold(&p, &a));
        let c = build(&p, &BuildOptions { seed: 43, ..Default::default() }).unwrap();
        assert_ne!(a.matrices, c.matrices);
    }

    #[test]
    fn stats_account_for_every_sub_constraint() {
        let p = profile("s=3\nm=3\nb=2\nweak 1 net 0 1\nweak 1 net 1 2\nweak 1 net 0 2\n");
        let g = build(&p, &BuildOptions::default()).unwrap();
        let cols = &g.provenance.unwrap().columns;
        // pairs: c+1 k-vectors per pair per column
        for st in cols {
            assert_eq!(st.weak_total, 3 * (st.column + 1));
            assert!(st.weak_satisfied <= st.weak_total);
            assert_eq!(st.objective, Weight::from_integer(st.weak_satisfied as i64));
        }
        // three pairwise (0,2)-conditions cannot all hold in base 2
        assert!(cols.iter().any(|st| st.weak_satisfied < st.weak_total));
    }

    #[test]
    fn matrix_file_round_trip() {
        let p = profile("s=2\nm=3\nb=3\nnet 0 1\n");
        let g = build(&p, &BuildOptions::default()).unwrap();
        let text = g.to_string();
        assert!(text.starts_with("b=3 s=2 m=3\n"));
        assert_eq!(text.lines().count(), 1 + 3 + 1 + 3);
        let back = parse_matrices(&text).unwrap();
        assert_eq!(back.matrices, g.matrices);
        assert_eq!(back.to_string(), text);
    }

    #[test]
    fn matrix_file_errors() {
        let e = parse_matrices("b=4 s=1 m=1\n1\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_matrices("b=2 s=1 m=2\n1 0\n0 2\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse_matrices("b=2 s=2 m=1\n1\n").unwrap_err();
        assert!(matches!(e.kind, MatrixFileErrorKind::MatrixCount { expected: 2, got: 1 }));
        let e = parse_matrices("b=2 s=1 m=2\n1 0 1\n").unwrap_err();
        assert!(matches!(e.kind, MatrixFileErrorKind::RowLength { expected: 2, got: 3 }));
        assert!(parse_matrices("").is_err());
        assert!(parse_matrices("b=2 m=1\n1\n").is_err());
    }

    #[test]
    fn leading_and_identity() {
        let base = PrimeBase::new(3).unwrap();
        let g = GeneratorSet::identity(base, 2, 4);
        assert_eq!(g.leading(2).matrices[0], GFMatrix::identity(base, 2));
        assert_eq!(g.capacity(), Some(81));
        let r = GeneratorSet::random(base, 2, 4, 9);
        assert_eq!(r, GeneratorSet::random(base, 2, 4, 9));
    }

    #[test]
    fn greedy_columns_are_solver_optima() {
        // enumerate every choice of column c given earlier columns
        let p = profile("s=2\nm=3\nb=2\nweak 1 net 0 1\nweak 1 stratified 0 1\nweak -1 net 0\n");
        let opts = BuildOptions { seed: 5, keep_models: true, ..Default::default() };
        let g = build(&p, &opts).unwrap();
        let prov = g.provenance.unwrap();
        for (model, st) in prov.models.iter().zip(&prov.columns) {
            let n = model.vars.len();
            let mut best = None::<Weight>;
            for code in 0..1usize << n {
                let x: Vec<Digit> = (0..n).map(|i| (code >> i & 1) as Digit).collect();
                if let Some(o) = model.evaluate(&x) {
                    best = Some(best.map_or(o, |b| b.max(o)));
                }
            }
            assert_eq!(st.solver_objective, best.unwrap());
            assert!(!st.suboptimal);
        }
    }
}
