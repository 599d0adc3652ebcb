//! The digital construction: point `i`, dimension `j` has digits `C_j * digits(i)`.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::builder::GeneratorSet;
use crate::gfield::{Digit, PrimeBase};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SampleError {
    #[error("index {index} is outside 0..{capacity}")]
    IndexOutOfRange { index: u64, capacity: u64 },
    #[error("{n} points requested but the matrices produce at most {capacity}")]
    TooManyPoints { n: u64, capacity: u64 },
    #[error("b^m does not fit in 64 bits")]
    CapacityOverflow,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct PointFileError {
    pub line: usize,
    pub message: String,
}

/// Little-endian base-`b` digits of `i`, exactly `m` of them.
pub fn digits_of_index(i: u64, base: PrimeBase, m: usize) -> Result<Vec<Digit>, SampleError> {
    if let Some(cap) = base.checked_pow(m) {
        if i >= cap {
            return Err(SampleError::IndexOutOfRange { index: i, capacity: cap });
        }
    }
    let b = base.get() as u64;
    let mut rest = i;
    Ok((0..m)
        .map(|_| {
            let d = (rest % b) as Digit;
            rest /= b;
            d
        })
        .collect())
}

/// Points with their exact digits.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub base: PrimeBase,
    /// Digits per coordinate.
    pub m: usize,
    pub s: usize,
    /// `digits[(i * s + j) * m + k]` is digit `k + 1` (most significant first) of point `i`, dimension `j`.
    digits: Vec<Digit>,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.coords.len() / self.s.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.s..(i + 1) * self.s]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks(self.s)
    }

    /// Digits of one coordinate, most significant first.
    pub fn digits(&self, i: usize, j: usize) -> &[Digit] {
        let at = (i * self.s + j) * self.m;
        &self.digits[at..at + self.m]
    }

    /// All digits of point `i`, dimension-major.
    pub fn point_digits(&self, i: usize) -> &[Digit] {
        let w = self.s * self.m;
        &self.digits[i * w..(i + 1) * w]
    }

    /// The first `n` points.
    pub fn prefix(&self, n: usize) -> PointSet {
        let n = n.min(self.len());
        PointSet {
            base: self.base,
            m: self.m,
            s: self.s,
            digits: self.digits[..n * self.s * self.m].to_vec(),
            coords: self.coords[..n * self.s].to_vec(),
        }
    }

    /// Keeps the listed dimensions, in the given order.
    pub fn project(&self, dims: &[usize]) -> PointSet {
        let n = self.len();
        let mut digits = Vec::with_capacity(n * dims.len() * self.m);
        let mut coords = Vec::with_capacity(n * dims.len());
        for i in 0..n {
            for &j in dims {
                digits.extend_from_slice(self.digits(i, j));
                coords.push(self.point(i)[j]);
            }
        }
        PointSet { base: self.base, m: self.m, s: dims.len(), digits, coords }
    }

    /// Reorders points: point `k` of the result is point `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> PointSet {
        let mut digits = Vec::with_capacity(self.digits.len());
        let mut coords = Vec::with_capacity(self.coords.len());
        for &i in order {
            digits.extend_from_slice(self.point_digits(i));
            coords.extend_from_slice(self.point(i));
        }
        PointSet { base: self.base, m: self.m, s: self.s, digits, coords }
    }

    /// A point set given directly by digits, `n * s * m` of them in the layout of [`PointSet::digits`].
    pub fn from_digits(base: PrimeBase, s: usize, m: usize, digits: Vec<Digit>) -> PointSet {
        assert_eq!(digits.len() % (s * m).max(1), 0, "ragged digit buffer");
        let coords = digits.chunks(m.max(1)).map(|d| coordinate(base, d)).collect();
        PointSet { base, m, s, digits, coords }
    }
}

/// `sum(e_k b^-k)`: exact integer over `b^m` while that fits a double's mantissa, Horner otherwise.
pub fn coordinate(base: PrimeBase, digits: &[Digit]) -> f64 {
    let b = base.get() as u64;
    match base.checked_pow(digits.len()).filter(|&d| d <= 1 << 53) {
        Some(denom) => {
            let num = digits.iter().fold(0u64, |acc, &d| acc * b + d as u64);
            num as f64 / denom as f64
        }
        None => digits.iter().rev().fold(0.0, |acc, &d| (acc + d as f64) / b as f64),
    }
}

/// The first `n` points of the digital net of `g`.
pub fn generate(g: &GeneratorSet, n: u64) -> Result<PointSet, SampleError> {
    let capacity = g.capacity().ok_or(SampleError::CapacityOverflow)?;
    if n > capacity {
        return Err(SampleError::TooManyPoints { n, capacity });
    }
    let (s, m, base) = (g.s, g.m, g.base);
    let b = base.get();
    let n = n as usize;
    let mut digits = vec![0 as Digit; n * s * m];
    if s * m > 0 {
        digits.par_chunks_mut(s * m).enumerate().for_each(|(i, out)| {
            let index = digits_of_index(i as u64, base, m).expect("checked against capacity");
            for (j, c) in g.matrices.iter().enumerate() {
                for r in 0..m {
                    let acc: u32 = c.row(r).iter().zip(&index).map(|(&a, &d)| a as u32 * d as u32).sum();
                    out[j * m + r] = (acc % b) as Digit;
                }
            }
        });
    }
    let coords = digits.par_chunks(m.max(1)).map(|d| coordinate(base, d)).collect();
    Ok(PointSet { base, m, s, digits, coords })
}

/// Decimal places for `m` base-`b` digits: `ceil(m log10 b) + 2`.
pub fn decimal_places(base: PrimeBase, m: usize) -> usize {
    (m as f64 * (base.get() as f64).log10()).ceil() as usize + 2
}

/// One point per line, coordinates separated by spaces.
pub fn format_points(p: &PointSet) -> String {
    let places = decimal_places(p.base, p.m);
    let mut out = String::new();
    for x in p.points() {
        let line: Vec<String> = x.iter().map(|v| format!("{v:.places$}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

/// One line per point and dimension with its `m` digits, most significant first.
pub fn format_digits(p: &PointSet) -> String {
    let mut out = String::new();
    for i in 0..p.len() {
        for j in 0..p.s {
            let line: Vec<String> = p.digits(i, j).iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    out
}

/// Reads coordinate lines as written by [`format_points`]. Blank lines and `#` comments are skipped.
pub fn parse_points(text: &str) -> Result<Vec<Vec<f64>>, PointFileError> {
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| PointFileError { line: i + 1, message };
        let p = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(format!("invalid number `{t}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = points.first() {
            if first.len() != p.len() {
                return Err(err(format!("expected {} coordinates, found {}", first.len(), p.len())));
            }
        }
        if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(err(format!("coordinate {bad} outside [0,1]")));
        }
        points.push(p);
    }
    Ok(points)
}
