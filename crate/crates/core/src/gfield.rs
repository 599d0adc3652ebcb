//! Arithmetic and dense linear algebra over prime fields `F_b`.
//!
//! Digits are stored as `u8`; every entry of a [`GFMatrix`] is reduced
//! modulo the base. Elimination always takes the first nonzero entry of a
//! column as pivot, so results are deterministic.

use std::fmt;

use thiserror::Error;

/// A single element of `F_b`, always `< b`.
pub type Digit = u8;

/// Largest supported base.
pub const MAX_BASE: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("base {0} is not prime")]
    NotPrime(u32),
    #[error("base {0} is outside the supported range 2..={MAX_BASE}")]
    BaseOutOfRange(u32),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("digit {digit} is not reduced modulo {base}")]
    DigitOutOfRange { digit: u32, base: u32 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A prime radix `b` with `2 <= b <= 64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimeBase(u8);

impl PrimeBase {
    pub fn new(b: u32) -> Result<Self, FieldError> {
        if !(2..=MAX_BASE).contains(&b) {
            return Err(FieldError::BaseOutOfRange(b));
        }
        if !is_prime(b) {
            return Err(FieldError::NotPrime(b));
        }
        Ok(Self(b as u8))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0 as u32
    }

    /// `b^e`, or `None` on `u64` overflow.
    pub fn checked_pow(self, e: usize) -> Option<u64> {
        (self.0 as u64).checked_pow(u32::try_from(e).ok()?)
    }

    #[inline]
    pub fn add(self, a: Digit, c: Digit) -> Digit {
        ((a as u16 + c as u16) % self.0 as u16) as Digit
    }

    #[inline]
    pub fn sub(self, a: Digit, c: Digit) -> Digit {
        ((a as u16 + self.0 as u16 - c as u16) % self.0 as u16) as Digit
    }

    #[inline]
    pub fn neg(self, a: Digit) -> Digit {
        self.sub(0, a)
    }

    #[inline]
    pub fn mul(self, a: Digit, c: Digit) -> Digit {
        ((a as u16 * c as u16) % self.0 as u16) as Digit
    }

    /// Multiplicative inverse by Fermat: `a^(b-2)`.
    pub fn inv(self, a: Digit) -> Result<Digit, FieldError> {
        if a.is_multiple_of(self.0) {
            return Err(FieldError::ZeroInverse);
        }
        let mut result: Digit = 1;
        let mut base = a % self.0;
        let mut e = self.0 as u32 - 2;
        while e > 0 {
            if e & 1 == 1 {
                result = self.mul(result, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        Ok(result)
    }

    /// Reduce an arbitrary integer into `F_b`.
    #[inline]
    pub fn reduce(self, v: i64) -> Digit {
        v.rem_euclid(self.0 as i64) as Digit
    }
}

impl fmt::Display for PrimeBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn is_prime(n: u32) -> bool {
    n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
}

/// Free-function forms of the field operations.
pub fn gf_add(a: Digit, c: Digit, base: PrimeBase) -> Digit {
    base.add(a, c)
}

pub fn gf_mul(a: Digit, c: Digit, base: PrimeBase) -> Digit {
    base.mul(a, c)
}

pub fn gf_inv(a: Digit, base: PrimeBase) -> Result<Digit, FieldError> {
    base.inv(a)
}

/// Dense row-major matrix of digits over `F_b`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GFMatrix {
    base: PrimeBase,
    rows: usize,
    cols: usize,
    data: Vec<Digit>,
}

impl GFMatrix {
    pub fn zeros(base: PrimeBase, rows: usize, cols: usize) -> Self {
        Self { base, rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(base: PrimeBase, n: usize) -> Self {
        let mut m = Self::zeros(base, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    /// Builds a matrix from row vectors, rejecting unreduced digits and ragged rows.
    pub fn from_rows<R: AsRef<[Digit]>>(base: PrimeBase, rows: &[R]) -> Result<Self, FieldError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(FieldError::DimensionMismatch { expected: cols, got: r.len() });
            }
            for &d in r {
                if d as u32 >= base.get() {
                    return Err(FieldError::DigitOutOfRange { digit: d as u32, base: base.get() });
                }
            }
            data.extend_from_slice(r);
        }
        Ok(Self { base, rows: rows.len(), cols, data })
    }

    #[inline]
    pub fn base(&self) -> PrimeBase {
        self.base
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Digit {
        self.data[r * self.cols + c]
    }

    /// Sets an entry; the value is reduced modulo the base.
    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Digit) {
        self.data[r * self.cols + c] = v % self.base.0;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[Digit] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.base, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.get(r, c);
            }
        }
        t
    }

    /// Top-left `rows x cols` block.
    pub fn submatrix(&self, rows: usize, cols: usize) -> Self {
        assert!(rows <= self.rows && cols <= self.cols, "submatrix larger than matrix");
        let mut s = Self::zeros(self.base, rows, cols);
        for r in 0..rows {
            s.data[r * cols..(r + 1) * cols].copy_from_slice(&self.row(r)[..cols]);
        }
        s
    }

    pub fn mat_vec_mul(&self, v: &[Digit]) -> Result<Vec<Digit>, FieldError> {
        if v.len() != self.cols {
            return Err(FieldError::DimensionMismatch { expected: self.cols, got: v.len() });
        }
        let b = self.base.get();
        Ok((0..self.rows)
            .map(|r| {
                let acc: u32 = self.row(r).iter().zip(v).map(|(&a, &x)| a as u32 * x as u32).sum();
                (acc % b) as Digit
            })
            .collect())
    }

    /// Reduces `self` in place to row echelon form and returns the rank.
    fn echelon(&mut self) -> usize {
        let base = self.base;
        let mut rank = 0;
        for col in 0..self.cols {
            if rank == self.rows {
                break;
            }
            let Some(pivot) = (rank..self.rows).find(|&r| self.get(r, col) != 0) else {
                continue;
            };
            if pivot != rank {
                for c in 0..self.cols {
                    self.data.swap(pivot * self.cols + c, rank * self.cols + c);
                }
            }
            let inv = base.inv(self.get(rank, col)).expect("pivot is nonzero");
            for r in rank + 1..self.rows {
                let f = base.mul(self.get(r, col), inv);
                if f == 0 {
                    continue;
                }
                for c in col..self.cols {
                    let v = base.sub(self.get(r, c), base.mul(f, self.get(rank, c)));
                    self.data[r * self.cols + c] = v;
                }
            }
            rank += 1;
        }
        rank
    }

    /// Rank over `F_b`.
    pub fn rank(&self) -> usize {
        self.clone().echelon()
    }

    pub fn is_full_row_rank(&self) -> bool {
        self.rank() == self.rows
    }
}

pub fn rank(m: &GFMatrix) -> usize {
    m.rank()
}

pub fn mat_vec_mul(m: &GFMatrix, v: &[Digit]) -> Result<Vec<Digit>, FieldError> {
    m.mat_vec_mul(v)
}

impl fmt::Debug for GFMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "GFMatrix(b={}, {}x{})", self.base, self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(n: u32) -> PrimeBase {
        PrimeBase::new(n).unwrap()
    }

    #[test]
    fn base_validation() {
        assert_eq!(PrimeBase::new(4), Err(FieldError::NotPrime(4)));
        assert_eq!(PrimeBase::new(1), Err(FieldError::BaseOutOfRange(1)));
        assert_eq!(PrimeBase::new(67), Err(FieldError::BaseOutOfRange(67)));
        assert!(PrimeBase::new(61).is_ok());
        let primes: Vec<u32> = (2..=64).filter(|&n| PrimeBase::new(n).is_ok()).collect();
        assert_eq!(primes.len(), 18);
    }

    #[test]
    fn scalar_examples() {
        assert_eq!(gf_add(2, 2, b(3)), 1);
        assert_eq!(gf_inv(1, b(5)), Ok(1));
        // 2 * d == 1 (mod 5) by scanning d
        let scanned = (1..5u8).find(|d| (2 * d) % 5 == 1).unwrap();
        assert_eq!(gf_inv(2, b(5)), Ok(scanned));
        assert_eq!(scanned, 3);
        assert_eq!(gf_inv(0, b(5)), Err(FieldError::ZeroInverse));
    }

    #[test]
    fn field_axioms_exhaustive() {
        for p in [2u32, 3, 5, 7] {
            let f = b(p);
            let p = p as u8;
            for x in 0..p {
                assert_eq!(f.add(x, 0), x);
                assert_eq!(f.mul(x, 1), x);
                assert_eq!(f.add(x, f.neg(x)), 0);
                if x != 0 {
                    assert_eq!(f.mul(x, f.inv(x).unwrap()), 1);
                }
                for y in 0..p {
                    assert_eq!(f.add(x, y), f.add(y, x));
                    assert_eq!(f.mul(x, y), f.mul(y, x));
                    assert_eq!(f.sub(f.add(x, y), y), x);
                    for z in 0..p {
                        assert_eq!(f.add(f.add(x, y), z), f.add(x, f.add(y, z)));
                        assert_eq!(f.mul(f.mul(x, y), z), f.mul(x, f.mul(y, z)));
                        assert_eq!(f.mul(x, f.add(y, z)), f.add(f.mul(x, y), f.mul(x, z)));
                    }
                }
            }
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(GFMatrix::identity(b(2), 3).rank(), 3);
        assert_eq!(GFMatrix::zeros(b(3), 2, 4).rank(), 0);
        let m = GFMatrix::from_rows(b(5), &[[1, 2], [2, 4]]).unwrap();
        // second row is twice the first
        assert_eq!(m.rank(), 1);
    }

    #[test]
    fn mat_vec_examples() {
        let id = GFMatrix::identity(b(2), 3);
        assert_eq!(id.mat_vec_mul(&[1, 0, 1]).unwrap(), vec![1, 0, 1]);
        let m = GFMatrix::from_rows(b(2), &[[1, 1], [0, 1]]).unwrap();
        assert_eq!(m.mat_vec_mul(&[1, 1]).unwrap(), vec![0, 1]);
        let m = GFMatrix::from_rows(b(3), &[[2, 1], [1, 2]]).unwrap();
        // (2*2 + 1*2) mod 3 = 0 and (1*2 + 2*2) mod 3 = 0
        assert_eq!(m.mat_vec_mul(&[2, 2]).unwrap(), vec![0, 0]);
        assert_eq!(
            m.mat_vec_mul(&[1]),
            Err(FieldError::DimensionMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn from_rows_rejects_bad_digits() {
        assert!(matches!(
            GFMatrix::from_rows(b(3), &[[0, 3]]),
            Err(FieldError::DigitOutOfRange { digit: 3, base: 3 })
        ));
        assert!(GFMatrix::from_rows(b(3), &[vec![0, 1], vec![1]]).is_err());
    }

    /// Largest k such that some k x k submatrix is invertible, by enumeration.
    fn brute_rank(m: &GFMatrix) -> usize {
        fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
            (0u32..1 << n)
                .filter(|s| s.count_ones() as usize == k)
                .map(|s| (0..n).filter(|i| s >> i & 1 == 1).collect())
                .collect()
        }
        fn det(rows: &[Vec<i64>], p: i64) -> i64 {
            let n = rows.len();
            if n == 0 {
                return 1;
            }
            (0..n)
                .map(|c| {
                    let minor: Vec<Vec<i64>> = rows[1..]
                        .iter()
                        .map(|r| r.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, &v)| v).collect())
                        .collect();
                    let sign = if c % 2 == 0 { 1 } else { -1 };
                    sign * rows[0][c] * det(&minor, p)
                })
                .sum::<i64>()
                .rem_euclid(p)
        }
        let p = m.base().get() as i64;
        for k in (1..=m.rows().min(m.cols())).rev() {
            for rs in subsets(m.rows(), k) {
                for cs in subsets(m.cols(), k) {
                    let sub: Vec<Vec<i64>> =
                        rs.iter().map(|&r| cs.iter().map(|&c| m.get(r, c) as i64).collect()).collect();
                    if det(&sub, p) != 0 {
                        return k;
                    }
                }
            }
        }
        0
    }

    #[test]
    fn rank_matches_minor_enumeration_exhaustively() {
        // every 2x3 and 3x2 matrix over F_2 and F_3, plus every 3x3 over F_2
        for (p, r, c) in [(2u32, 2usize, 3usize), (2, 3, 2), (3, 2, 3), (3, 3, 2), (2, 3, 3)] {
            let f = b(p);
            let cells = r * c;
            let total = (p as usize).pow(cells as u32);
            for code in 0..total {
                let mut m = GFMatrix::zeros(f, r, c);
                let mut x = code;
                for i in 0..cells {
                    m.set(i / c, i % c, (x % p as usize) as u8);
                    x /= p as usize;
                }
                let rk = m.rank();
                assert_eq!(rk, brute_rank(&m), "{m:?}");
                assert_eq!(rk, m.transpose().rank());
            }
        }
    }

    #[test]
    fn rank_matches_minor_enumeration_4x4_binary() {
        let f = b(2);
        for code in 0u32..1 << 16 {
            let mut m = GFMatrix::zeros(f, 4, 4);
            for i in 0..16 {
                m.set(i / 4, i % 4, (code >> i & 1) as u8);
            }
            assert_eq!(m.rank(), brute_rank(&m));
        }
    }

    #[test]
    fn rank_counts_nonzero_rows_after_reduction() {
        let m = GFMatrix::from_rows(b(3), &[[1, 2, 0], [2, 1, 0], [0, 0, 1]]).unwrap();
        let mut e = m.clone();
        let rk = e.echelon();
        let nonzero = (0..e.rows()).filter(|&r| e.row(r).iter().any(|&d| d != 0)).count();
        assert_eq!(rk, nonzero);
        assert_eq!(rk, 2);
    }
}
