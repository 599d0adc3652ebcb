//! Brute-force net checks by counting points in elementary intervals.
//!
//! Interval membership is read off exact digits: along dimension `j` at depth
//! `k_j` the interval index is the number formed by the first `k_j` digits.

use std::fmt::{self, Write as _};
use std::ops::Range;

use rayon::prelude::*;
use thiserror::Error;

use crate::builder::GeneratorSet;
use crate::gfield::PrimeBase;
use crate::netcons::{enumerate_kvectors, kvectors_at, KVector};
use crate::profile::{ConstraintKind, NetConstraint, Profile};
use crate::sampler::{generate, PointSet, SampleError};

/// Aligned blocks checked per prefix when the caller does not choose: every
/// block up to `3^8` points in total, otherwise this many.
pub const DEFAULT_BLOCK_SAMPLE: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("expected {expected} points, found {got}")]
    PointCount { expected: u64, got: usize },
    #[error("dimension {dim} out of range for {s} dimensions")]
    Dimension { dim: usize, s: usize },
    #[error("depth {depth} exceeds the {m} digits per coordinate")]
    Depth { depth: usize, m: usize },
    #[error(transparent)]
    Sample(#[from] SampleError),
}

/// An interval whose count differs from the expected one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kvector: KVector,
    /// `a_j` per checked dimension.
    pub interval: Vec<u64>,
    pub count: u64,
    pub expected: u64,
    /// Aligned block index (0 for the leading points).
    pub block: u64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a: Vec<String> = self.interval.iter().map(ToString::to_string).collect();
        write!(
            f,
            "k={} interval a=({}) holds {} points, expected {}",
            self.kvector,
            a.join(","),
            self.count,
            self.expected
        )?;
        if self.block > 0 {
            write!(f, " (block {})", self.block)?;
        }
        Ok(())
    }
}

/// `(a_j)`: the leading `k_j` digits of each coordinate read as a base-`b` integer.
pub fn interval_index<D: AsRef<[u8]>>(coords: &[D], k: &KVector, base: PrimeBase) -> Vec<u64> {
    let b = base.get() as u64;
    coords
        .iter()
        .zip(&k.0)
        .map(|(d, &kj)| d.as_ref()[..kj].iter().fold(0u64, |acc, &x| acc * b + x as u64))
        .collect()
}

fn check_inputs(p: &PointSet, dims: &[usize], depth: usize) -> Result<(), VerifyError> {
    if let Some(&dim) = dims.iter().find(|&&d| d >= p.s) {
        return Err(VerifyError::Dimension { dim, s: p.s });
    }
    if depth > p.m {
        return Err(VerifyError::Depth { depth, m: p.m });
    }
    Ok(())
}

/// Interval counts of one k-family over `points`, indexed by the mixed-radix cell id
/// with the first dimension most significant.
pub fn interval_counts(p: &PointSet, points: Range<usize>, dims: &[usize], k: &KVector) -> Vec<u64> {
    let b = p.base.get() as usize;
    let cells = b.pow(k.total() as u32);
    let mut counts = vec![0u64; cells];
    for i in points {
        let mut id = 0usize;
        for (&j, &kj) in dims.iter().zip(&k.0) {
            for &d in &p.digits(i, j)[..kj] {
                id = id * b + d as usize;
            }
        }
        counts[id] += 1;
    }
    counts
}

fn decode_cell(mut id: usize, k: &KVector, b: u64) -> Vec<u64> {
    let mut a = vec![0u64; k.0.len()];
    for (j, &kj) in k.0.iter().enumerate().rev() {
        let width = b.pow(kj as u32) as usize;
        a[j] = (id % width) as u64;
        id /= width;
    }
    a
}

fn first_bad_cell(p: &PointSet, points: Range<usize>, dims: &[usize], k: &KVector, expected: u64, block: u64) -> Option<Violation> {
    let counts = interval_counts(p, points, dims, k);
    counts.iter().position(|&c| c != expected).map(|id| Violation {
        kvector: k.clone(),
        interval: decode_cell(id, k, p.base.get() as u64),
        count: counts[id],
        expected,
        block,
    })
}

/// Checks every k-family in parallel; per family, the first bad interval.
fn family_results(p: &PointSet, points: Range<usize>, dims: &[usize], kvecs: &[KVector], expected: u64, block: u64) -> Vec<Option<Violation>> {
    kvecs
        .par_iter()
        .map(|k| first_bad_cell(p, points.clone(), dims, k, expected, block))
        .collect()
}

/// The first violation in enumeration order, stopping early.
fn first_violation(p: &PointSet, points: Range<usize>, dims: &[usize], kvecs: &[KVector], expected: u64, block: u64) -> Option<Violation> {
    kvecs
        .par_iter()
        .find_map_first(|k| first_bad_cell(p, points.clone(), dims, k, expected, block))
}

/// Whether all `b^m_eff` points form a `(t, m_eff, |dims|)`-net; otherwise the first violation.
pub fn is_tms_net(p: &PointSet, dims: &[usize], t: usize, m_eff: usize) -> Result<Option<Violation>, VerifyError> {
    let n = p.base.checked_pow(m_eff).unwrap_or(u64::MAX);
    if n != p.len() as u64 {
        return Err(VerifyError::PointCount { expected: n, got: p.len() });
    }
    if t >= m_eff {
        return Ok(None);
    }
    check_inputs(p, dims, m_eff - t)?;
    let kvecs = enumerate_kvectors(dims.len(), m_eff - t);
    let expected = p.base.checked_pow(t).expect("t < m_eff");
    Ok(first_violation(p, 0..p.len(), dims, &kvecs, expected, 0))
}

/// The least `t` for which the points form a `(t, m_eff, |dims|)`-net.
pub fn minimal_t(p: &PointSet, dims: &[usize], m_eff: usize) -> Result<usize, VerifyError> {
    for t in 0..m_eff {
        if is_tms_net(p, dims, t, m_eff)?.is_none() {
            return Ok(t);
        }
    }
    is_tms_net(p, dims, m_eff, m_eff)?;
    Ok(m_eff)
}

/// The interval families of a constraint at prefix size `c`, with the count each interval must hold.
fn families(nc: &NetConstraint, c: usize, base: PrimeBase) -> (Vec<KVector>, u64) {
    let kvecs = kvectors_at(nc.kind, nc.dims.len(), c);
    let expected = match nc.kind {
        ConstraintKind::Net { t } => base.checked_pow(t).unwrap_or(u64::MAX),
        ConstraintKind::Stratified => 1,
    };
    (kvecs, expected)
}

/// Prefix sizes at which a constraint says anything.
fn prefixes(nc: &NetConstraint, m: usize) -> Range<usize> {
    match nc.kind {
        ConstraintKind::Net { t } => t + 1..m + 1,
        ConstraintKind::Stratified => 1..m + 1,
    }
}

/// Outcome of one constraint at one prefix size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixCheck {
    pub prefix: usize,
    /// k-families at this prefix.
    pub families: usize,
    /// Families exact on the leading `b^prefix` points.
    pub satisfied: usize,
    /// Aligned blocks examined, including the leading one.
    pub blocks_checked: u64,
    pub blocks_total: u64,
    pub blocks_failed: u64,
    /// First violation found, leading block first.
    pub witness: Option<Violation>,
}

impl PrefixCheck {
    pub fn ratio(&self) -> f64 {
        if self.families == 0 {
            1.0
        } else {
            self.satisfied as f64 / self.families as f64
        }
    }

    pub fn passed(&self) -> bool {
        self.witness.is_none()
    }
}

/// Blocks examined per prefix: all when `b^m <= 3^8`, otherwise [`DEFAULT_BLOCK_SAMPLE`].
pub fn default_block_cap(base: PrimeBase, m: usize) -> u64 {
    match base.checked_pow(m) {
        Some(n) if n <= 6561 => u64::MAX,
        _ => DEFAULT_BLOCK_SAMPLE as u64,
    }
}

/// Checks the leading `b^c` points and up to `block_cap` aligned blocks of `b^c` points for each prefix size `c`.
pub fn is_progressive(g: &GeneratorSet, nc: &NetConstraint, block_cap: u64) -> Result<Vec<PrefixCheck>, VerifyError> {
    let p = generate(g, g.capacity().ok_or(SampleError::CapacityOverflow)?)?;
    progressive_on(&p, g.m, nc, block_cap)
}

fn progressive_on(p: &PointSet, m: usize, nc: &NetConstraint, block_cap: u64) -> Result<Vec<PrefixCheck>, VerifyError> {
    check_inputs(p, &nc.dims, 0)?;
    let mut out = Vec::new();
    for c in prefixes(nc, m) {
        let (kvecs, expected) = families(nc, c, p.base);
        let size = p.base.checked_pow(c).expect("c <= m") as usize;
        let blocks_total = (p.len() / size) as u64;
        let lead = family_results(p, 0..size, &nc.dims, &kvecs, expected, 0);
        let satisfied = lead.iter().filter(|v| v.is_none()).count();
        let mut witness = lead.into_iter().flatten().next();
        let mut failed = u64::from(witness.is_some());
        let checked = blocks_total.min(block_cap.max(1));
        for blk in 1..checked {
            let start = blk as usize * size;
            if let Some(v) = first_violation(p, start..start + size, &nc.dims, &kvecs, expected, blk) {
                failed += 1;
                witness.get_or_insert(v);
            }
        }
        out.push(PrefixCheck {
            prefix: c,
            families: kvecs.len(),
            satisfied,
            blocks_checked: checked,
            blocks_total,
            blocks_failed: failed,
            witness,
        });
    }
    Ok(out)
}

/// Satisfied fraction of k-families at each prefix size, on the leading `b^c` points.
pub fn weak_satisfaction(g: &GeneratorSet, nc: &NetConstraint) -> Result<Vec<(usize, f64)>, VerifyError> {
    let p = generate(g, g.capacity().ok_or(SampleError::CapacityOverflow)?)?;
    Ok(progressive_on(&p, g.m, nc, 1)?.iter().map(|r| (r.prefix, r.ratio())).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub index: usize,
    pub constraint: NetConstraint,
    pub prefixes: Vec<PrefixCheck>,
    /// `(prefix, minimal t)` for the constraint's dimensions.
    pub minimal_t: Vec<(usize, usize)>,
}

impl ConstraintReport {
    pub fn passed(&self) -> bool {
        self.prefixes.iter().all(PrefixCheck::passed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub base: PrimeBase,
    pub m: usize,
    pub s: usize,
    pub block_cap: u64,
    pub constraints: Vec<ConstraintReport>,
}

impl VerificationReport {
    /// True when every hard constraint holds at every prefix and checked block.
    pub fn hard_passed(&self) -> bool {
        self.constraints.iter().filter(|r| r.constraint.strength.is_hard()).all(ConstraintReport::passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let cap = if self.block_cap == u64::MAX { "all".to_string() } else { self.block_cap.to_string() };
        let _ = writeln!(out, "# b={} s={} m={} blocks per prefix: {}", self.base, self.s, self.m, cap);
        for r in &self.constraints {
            let hard = r.constraint.strength.is_hard();
            let verdict = match (hard, r.passed()) {
                (true, true) => "PASS",
                (true, false) => "FAIL",
                (false, _) => "WEAK",
            };
            let _ = writeln!(out, "constraint {} `{}`: {}", r.index + 1, r.constraint, verdict);
            for (pc, &(_, t)) in r.prefixes.iter().zip(&r.minimal_t) {
                let _ = write!(
                    out,
                    "  prefix {:>2}: {}/{} families ({:.4}), blocks {}/{} checked, {} failed, minimal t {}",
                    pc.prefix,
                    pc.satisfied,
                    pc.families,
                    pc.ratio(),
                    pc.blocks_checked,
                    pc.blocks_total,
                    pc.blocks_failed,
                    t
                );
                match &pc.witness {
                    Some(v) if hard => {
                        let _ = writeln!(out, "; witness {v}");
                    }
                    _ => out.push('\n'),
                }
            }
        }
        let _ = writeln!(out, "hard constraints: {}", if self.hard_passed() { "all pass" } else { "FAILED" });
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("constraint,prefix,kvectors,satisfied,ratio\n");
        for r in &self.constraints {
            for pc in &r.prefixes {
                let _ = writeln!(out, "{},{},{},{},{:.6}", r.index + 1, pc.prefix, pc.families, pc.satisfied, pc.ratio());
            }
        }
        out
    }
}

/// Checks every constraint of `profile` against `g`. `block_cap = None` uses [`default_block_cap`].
pub fn verify_profile(g: &GeneratorSet, profile: &Profile, block_cap: Option<u64>) -> Result<VerificationReport, VerifyError> {
    let cap = block_cap.unwrap_or_else(|| default_block_cap(g.base, g.m));
    let p = generate(g, g.capacity().ok_or(SampleError::CapacityOverflow)?)?;
    let mut constraints = Vec::with_capacity(profile.constraints.len());
    for (index, nc) in profile.constraints.iter().enumerate() {
        let block_cap = if nc.strength.is_hard() { cap } else { 1 };
        let prefixes = progressive_on(&p, g.m, nc, block_cap)?;
        let minimal_t = prefixes
            .iter()
            .map(|pc| {
                let size = g.base.checked_pow(pc.prefix).expect("prefix <= m") as usize;
                minimal_t(&p.prefix(size), &nc.dims, pc.prefix).map(|t| (pc.prefix, t))
            })
            .collect::<Result<Vec<_>, _>>()?;
        constraints.push(ConstraintReport { index, constraint: nc.clone(), prefixes, minimal_t });
    }
    Ok(VerificationReport { base: g.base, m: g.m, s: g.s, block_cap: cap, constraints })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{build, BuildOptions};
    use crate::gfield::{Digit, GFMatrix};
    use crate::netcons::assemble_mk;
    use crate::profile::parse_profile;
    use proptest::prelude::*;

    fn b(n: u32) -> PrimeBase {
        PrimeBase::new(n).unwrap()
    }

    fn kv(v: &[usize]) -> KVector {
        KVector(v.to_vec())
    }

    fn pascal(base: PrimeBase, m: usize) -> GFMatrix {
        // upper triangular binomial coefficients mod b
        let mut g = GFMatrix::zeros(base, m, m);
        for r in 0..m {
            for c in r..m {
                let mut binom = 1u64;
                for i in 0..r {
                    binom = binom * (c - i) as u64 / (i + 1) as u64;
                }
                g.set(r, c, (binom % base.get() as u64) as Digit);
            }
        }
        g
    }

    #[test]
    fn interval_examples() {
        let base = b(2);
        assert_eq!(interval_index(&[[0u8, 0], [0, 0]], &kv(&[1, 2]), base), vec![0, 0]);
        assert_eq!(interval_index(&[[1u8, 1]], &kv(&[2]), base), vec![3]);
        assert_eq!(interval_index(&[[1u8, 2]], &kv(&[1]), b(3)), vec![1]);
    }

    #[test]
    fn duplicated_rows_violate() {
        // {(0,0), (0.5,0)} in base 2
        let p = PointSet::from_digits(b(2), 2, 1, vec![0, 0, 1, 0]);
        let v = is_tms_net(&p, &[0, 1], 0, 1).unwrap().unwrap();
        assert_eq!(v.kvector, kv(&[0, 1]));
        assert_eq!(v.interval, vec![0, 0]);
        assert_eq!(v.count, 2);
        assert_eq!(minimal_t(&p, &[0, 1], 1).unwrap(), 1);
        assert_eq!(is_tms_net(&p, &[0, 1], 1, 1).unwrap(), None);
    }

    #[test]
    fn sobol_pair_is_a_zero_net() {
        let base = b(2);
        let g = GeneratorSet::from_matrices(vec![GFMatrix::identity(base, 4), pascal(base, 4)]).unwrap();
        let p = generate(&g, 16).unwrap();
        assert_eq!(minimal_t(&p, &[0, 1], 4).unwrap(), 0);
        for m in 1..=4 {
            let lead = generate(&g.leading(m), 1 << m).unwrap();
            assert_eq!(is_tms_net(&lead, &[0, 1], 0, m).unwrap(), None);
        }
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let p = generate(&GeneratorSet::identity(b(2), 1, 3), 4).unwrap();
        assert!(matches!(is_tms_net(&p, &[0], 0, 3), Err(VerifyError::PointCount { expected: 8, got: 4 })));
        assert!(matches!(is_tms_net(&p, &[1], 0, 2), Err(VerifyError::Dimension { dim: 1, s: 1 })));
    }

    #[test]
    fn van_der_corput_is_progressive() {
        let g = GeneratorSet::identity(b(3), 1, 4);
        let nc = NetConstraint::net(0, &[0]);
        let rep = is_progressive(&g, &nc, u64::MAX).unwrap();
        assert_eq!(rep.len(), 4);
        assert!(rep.iter().all(PrefixCheck::passed));
        assert_eq!(rep[0].blocks_total, 27);
        assert_eq!(rep[0].blocks_checked, 27);
    }

    #[test]
    fn zero_first_row_fails_at_first_prefix() {
        let base = b(2);
        let mut c = GFMatrix::identity(base, 3);
        c.set(0, 0, 0);
        let g = GeneratorSet::from_matrices(vec![c]).unwrap();
        let rep = is_progressive(&g, &NetConstraint::net(0, &[0]), u64::MAX).unwrap();
        assert_eq!(rep[0].prefix, 1);
        assert!(!rep[0].passed());
    }

    #[test]
    fn block_cap_limits_work() {
        let g = GeneratorSet::identity(b(2), 1, 6);
        let rep = is_progressive(&g, &NetConstraint::net(0, &[0]), 4).unwrap();
        assert_eq!(rep[0].blocks_total, 32);
        assert_eq!(rep[0].blocks_checked, 4);
        assert_eq!(default_block_cap(b(3), 8), u64::MAX);
        assert_eq!(default_block_cap(b(3), 9), 64);
    }

    #[test]
    fn weak_ratios() {
        let p = parse_profile("s=3\nm=3\nb=2\nnet 0 1\nweak 1 net 0 1 2\n").unwrap();
        let g = build(&p, &BuildOptions::default()).unwrap();
        assert!(weak_satisfaction(&g, &p.constraints[0]).unwrap().iter().all(|&(_, r)| r == 1.0));
        let pairs = parse_profile("s=3\nm=2\nb=2\nweak 1 net 0 1\nweak 1 net 1 2\nweak 1 net 0 2\n").unwrap();
        let g = build(&pairs, &BuildOptions::default()).unwrap();
        let worst = pairs
            .constraints
            .iter()
            .flat_map(|nc| weak_satisfaction(&g, nc).unwrap())
            .map(|(_, r)| r)
            .fold(1.0, f64::min);
        assert!(worst < 1.0);
    }

    #[test]
    fn coarser_families_are_satisfied_at_least_as_often() {
        let p = parse_profile("s=4\nm=4\nb=3\nnet 0 1\nweak 1 net 0 1 2 3\n").unwrap();
        let g = build(&p, &BuildOptions { seed: 2, ..Default::default() }).unwrap();
        let r0 = weak_satisfaction(&g, &NetConstraint::net(0, &[0, 1, 2, 3])).unwrap();
        let r1 = weak_satisfaction(&g, &NetConstraint::net(1, &[0, 1, 2, 3])).unwrap();
        let mean = |r: &[(usize, f64)]| r.iter().map(|x| x.1).sum::<f64>() / r.len() as f64;
        assert!(mean(&r1) >= mean(&r0));
    }

    #[test]
    fn report_text_and_csv() {
        let p = parse_profile("s=2\nm=3\nb=3\nnet 0 1\nweak 1 stratified 0 1\n").unwrap();
        let g = build(&p, &BuildOptions::default()).unwrap();
        let rep = verify_profile(&g, &p, None).unwrap();
        assert!(rep.hard_passed());
        assert!(rep.constraints[0].minimal_t.iter().all(|&(_, t)| t == 0));
        let text = rep.to_text();
        assert!(text.contains("constraint 1 `net t0 0 1`: PASS"), "{text}");
        let csv = rep.to_csv();
        assert_eq!(csv.lines().count(), 1 + 3 + 3);
        assert!(csv.lines().nth(1).unwrap().starts_with("1,1,2,2,1.0"));
    }

    fn small_set() -> impl Strategy<Value = (GeneratorSet, usize)> {
        (prop_oneof![Just(2u32), Just(3)], 1usize..=3, 1usize..=4, any::<u64>(), 0usize..=2).prop_map(|(p, s, m, seed, t)| {
            (GeneratorSet::random(b(p), s, m, seed), t.min(m))
        })
    }

    proptest! {
        #[test]
        fn rank_matches_occupancy((g, t) in small_set()) {
            let p = generate(&g, g.capacity().unwrap()).unwrap();
            let dims: Vec<usize> = (0..g.s).collect();
            let expected = g.base.checked_pow(t).unwrap();
            for k in enumerate_kvectors(g.s, g.m - t) {
                let counts = interval_counts(&p, 0..p.len(), &dims, &k);
                prop_assert_eq!(counts.iter().sum::<u64>(), p.len() as u64);
                let exact = counts.iter().all(|&c| c == expected);
                // rank of the stacked first k_j rows over all m columns
                let mut rows = Vec::new();
                for (j, &kj) in k.0.iter().enumerate() {
                    for r in 0..kj {
                        rows.push(g.matrices[j].row(r).to_vec());
                    }
                }
                let full = rows.is_empty() || GFMatrix::from_rows(g.base, &rows).unwrap().is_full_row_rank();
                prop_assert_eq!(exact, full, "k={}", k);
                if g.m - t > 0 {
                    let sym = assemble_mk(&g.matrices, &dims, &k, g.m).unwrap();
                    let concrete = sym.substitute(|slot| g.matrices[slot.dim].get(slot.row - 1, slot.col - 1));
                    prop_assert_eq!(concrete.is_full_row_rank(), full);
                }
            }
        }

        #[test]
        fn minimal_t_ignores_point_order((g, _) in small_set(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let p = generate(&g, g.capacity().unwrap()).unwrap();
            let mut order: Vec<usize> = (0..p.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let dims: Vec<usize> = (0..g.s).collect();
            prop_assert_eq!(minimal_t(&p, &dims, g.m).unwrap(), minimal_t(&p.permuted(&order), &dims, g.m).unwrap());
        }
    }
}
