//! The constraint-profile language.
//!
//! A profile is a line-oriented text file:
//!
//! ```text
//! #Overlapping-constraints
//! s=6
//! m=10
//! b=3
//! net t0 0 1
//! net t0 1 2
//! weak 1 net t1 3 4 5
//! weak 1 net t2 0 1 2 3 4 5
//! ```
//!
//! `#` starts a comment. The three assignments `s=`, `m=` and `b=` come first,
//! in any order. Each following line is `[weak <weight>] net [t<int>] <dim>...`
//! or `[weak <weight>] stratified <dim>...`.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::Signed;
use thiserror::Error;

use crate::gfield::{FieldError, PrimeBase};

/// Exact weight of a weak constraint.
pub type Weight = Rational64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    /// `(t,m,s)`-net property on every prefix.
    Net { t: usize },
    /// Generalized stratification: row counts differ by at most one.
    Stratified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strength {
    Hard,
    Weak(Weight),
}

impl Strength {
    pub fn is_hard(&self) -> bool {
        matches!(self, Strength::Hard)
    }

    pub fn weight(&self) -> Option<Weight> {
        match self {
            Strength::Hard => None,
            Strength::Weak(w) => Some(*w),
        }
    }
}

/// One constraint line of a profile.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetConstraint {
    pub kind: ConstraintKind,
    pub dims: Vec<usize>,
    pub strength: Strength,
}

impl NetConstraint {
    pub fn net(t: usize, dims: &[usize]) -> Self {
        Self { kind: ConstraintKind::Net { t }, dims: dims.to_vec(), strength: Strength::Hard }
    }

    pub fn stratified(dims: &[usize]) -> Self {
        Self { kind: ConstraintKind::Stratified, dims: dims.to_vec(), strength: Strength::Hard }
    }

    pub fn weak(mut self, weight: Weight) -> Self {
        self.strength = Strength::Weak(weight);
        self
    }

    /// The t-parameter (0 for stratification).
    pub fn t(&self) -> usize {
        match self.kind {
            ConstraintKind::Net { t } => t,
            ConstraintKind::Stratified => 0,
        }
    }
}

impl fmt::Display for NetConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Strength::Weak(w) = self.strength {
            write!(f, "weak {} ", format_weight(&w))?;
        }
        match self.kind {
            ConstraintKind::Net { t } => write!(f, "net t{t}")?,
            ConstraintKind::Stratified => write!(f, "stratified")?,
        }
        for d in &self.dims {
            write!(f, " {d}")?;
        }
        Ok(())
    }
}

/// A parsed and validated profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profile {
    /// `s`, the number of dimensions.
    pub dimensions: usize,
    /// `m`, the size of each generator matrix.
    pub size: usize,
    pub base: PrimeBase,
    pub constraints: Vec<NetConstraint>,
}

impl Profile {
    /// Validates the invariants a parsed profile guarantees.
    pub fn new(
        dimensions: usize,
        size: usize,
        base: PrimeBase,
        constraints: Vec<NetConstraint>,
    ) -> Result<Self, ProfileError> {
        let p = Self { dimensions, size, base, constraints };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), ProfileError> {
        if self.dimensions == 0 {
            return Err(ProfileError::new(0, ProfileErrorKind::ZeroValue("s")));
        }
        if self.size == 0 {
            return Err(ProfileError::new(0, ProfileErrorKind::ZeroValue("m")));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            check_constraint(c, self.dimensions, self.size).map_err(|k| ProfileError::new(i + 1, k))?;
        }
        Ok(())
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "s={}", self.dimensions)?;
        writeln!(f, "m={}", self.size)?;
        writeln!(f, "b={}", self.base)?;
        for c in &self.constraints {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Profile {
    type Err = ProfileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_profile(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ProfileError {
    /// 1-based line number; 0 when the problem is not tied to a line.
    pub line: usize,
    pub kind: ProfileErrorKind,
}

impl ProfileError {
    fn new(line: usize, kind: ProfileErrorKind) -> Self {
        Self { line, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfileErrorKind {
    #[error("unknown keyword `{0}`")]
    UnknownKeyword(String),
    #[error("missing assignment `{0}=`")]
    MissingAssignment(&'static str),
    #[error("`{0}` assigned twice")]
    DuplicateAssignment(&'static str),
    #[error("assignment `{0}=` after the first constraint")]
    AssignmentAfterConstraint(&'static str),
    #[error("`{0}` must be at least 1")]
    ZeroValue(&'static str),
    #[error("invalid integer `{0}`")]
    InvalidInteger(String),
    #[error("invalid weight `{0}`")]
    InvalidWeight(String),
    #[error("`weak` must be followed by a weight and a constraint")]
    IncompleteWeak,
    #[error("constraint lists no dimensions")]
    NoDimensions,
    #[error("dimension {dim} out of range for s={s}")]
    DimensionOutOfRange { dim: usize, s: usize },
    #[error("t={t} must be smaller than m={m}")]
    TOutOfRange { t: usize, m: usize },
    #[error("dimension {0} listed twice")]
    DuplicateDimension(usize),
    #[error(transparent)]
    Base(#[from] FieldError),
}

fn check_constraint(c: &NetConstraint, s: usize, m: usize) -> Result<(), ProfileErrorKind> {
    if c.dims.is_empty() {
        return Err(ProfileErrorKind::NoDimensions);
    }
    for (i, &d) in c.dims.iter().enumerate() {
        if d >= s {
            return Err(ProfileErrorKind::DimensionOutOfRange { dim: d, s });
        }
        if c.dims[..i].contains(&d) {
            return Err(ProfileErrorKind::DuplicateDimension(d));
        }
    }
    if let ConstraintKind::Net { t } = c.kind {
        if t >= m {
            return Err(ProfileErrorKind::TOutOfRange { t, m });
        }
    }
    Ok(())
}

/// Parses a profile, reporting the first error with its line number.
pub fn parse_profile(text: &str) -> Result<Profile, ProfileError> {
    let mut s = None;
    let mut m = None;
    let mut b = None;
    let mut constraints = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let err = |kind| ProfileError::new(line_no, kind);
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }

        if let Some((key, value)) = content.split_once('=') {
            let key = key.trim();
            let (slot, name) = match key {
                "s" => (&mut s, "s"),
                "m" => (&mut m, "m"),
                "b" => (&mut b, "b"),
                other => return Err(err(ProfileErrorKind::UnknownKeyword(other.to_string()))),
            };
            if !constraints.is_empty() {
                return Err(err(ProfileErrorKind::AssignmentAfterConstraint(name)));
            }
            if slot.is_some() {
                return Err(err(ProfileErrorKind::DuplicateAssignment(name)));
            }
            let v = parse_usize(value.trim()).map_err(err)?;
            if name == "b" {
                PrimeBase::new(u32::try_from(v).unwrap_or(u32::MAX)).map_err(|e| err(e.into()))?;
            } else if v == 0 {
                return Err(err(ProfileErrorKind::ZeroValue(name)));
            }
            *slot = Some(v);
            continue;
        }

        let s_val = s.ok_or_else(|| err(ProfileErrorKind::MissingAssignment("s")))?;
        let m_val = m.ok_or_else(|| err(ProfileErrorKind::MissingAssignment("m")))?;
        b.ok_or_else(|| err(ProfileErrorKind::MissingAssignment("b")))?;

        let c = parse_constraint_line(content).map_err(err)?;
        check_constraint(&c, s_val, m_val).map_err(err)?;
        constraints.push(c);
    }

    let after = last_line + 1;
    let s = s.ok_or(ProfileError::new(after, ProfileErrorKind::MissingAssignment("s")))?;
    let m = m.ok_or(ProfileError::new(after, ProfileErrorKind::MissingAssignment("m")))?;
    let b = b.ok_or(ProfileError::new(after, ProfileErrorKind::MissingAssignment("b")))?;
    let base = PrimeBase::new(b as u32).expect("validated on its own line");
    Ok(Profile { dimensions: s, size: m, base, constraints })
}

fn parse_constraint_line(content: &str) -> Result<NetConstraint, ProfileErrorKind> {
    let mut tokens = content.split_whitespace().peekable();
    let mut strength = Strength::Hard;
    if tokens.peek() == Some(&"weak") {
        tokens.next();
        let w = tokens.next().ok_or(ProfileErrorKind::IncompleteWeak)?;
        strength = Strength::Weak(parse_weight(w)?);
    }
    let keyword = tokens.next().ok_or(ProfileErrorKind::IncompleteWeak)?;
    let kind = match keyword {
        "net" => {
            let mut t = 0;
            if let Some(tok) = tokens.peek() {
                if let Some(rest) = tok.strip_prefix('t') {
                    t = parse_usize(rest)?;
                    tokens.next();
                }
            }
            ConstraintKind::Net { t }
        }
        "stratified" => ConstraintKind::Stratified,
        other => return Err(ProfileErrorKind::UnknownKeyword(other.to_string())),
    };
    let dims = tokens.map(parse_usize).collect::<Result<Vec<_>, _>>()?;
    if dims.is_empty() {
        return Err(ProfileErrorKind::NoDimensions);
    }
    Ok(NetConstraint { kind, dims, strength })
}

fn parse_usize(tok: &str) -> Result<usize, ProfileErrorKind> {
    if tok.is_empty() || !tok.bytes().all(|c| c.is_ascii_digit()) {
        return Err(ProfileErrorKind::InvalidInteger(tok.to_string()));
    }
    tok.parse().map_err(|_| ProfileErrorKind::InvalidInteger(tok.to_string()))
}

/// Parses a signed decimal such as `-1`, `100` or `2.5` into an exact rational.
pub fn parse_weight(tok: &str) -> Result<Weight, ProfileErrorKind> {
    let bad = || ProfileErrorKind::InvalidWeight(tok.to_string());
    let (neg, body) = match tok.as_bytes().first() {
        Some(b'-') => (true, &tok[1..]),
        Some(b'+') => (false, &tok[1..]),
        _ => (false, tok),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    if frac_part.len() > 12 {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: i64 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| bad())? };
    let denom = 10i64.pow(frac_part.len() as u32);
    let w = Rational64::new(numer, denom);
    Ok(if neg { -w } else { w })
}

/// Formats a weight as a decimal when it terminates, else as `p/q`.
pub fn format_weight(w: &Weight) -> String {
    if w.is_integer() {
        return w.numer().to_string();
    }
    let (mut d, mut twos, mut fives) = (*w.denom(), 0u32, 0u32);
    while d % 2 == 0 {
        d /= 2;
        twos += 1;
    }
    while d % 5 == 0 {
        d /= 5;
        fives += 1;
    }
    if d != 1 {
        return format!("{}/{}", w.numer(), w.denom());
    }
    let places = twos.max(fives);
    let scale = 10i64.pow(places);
    let scaled = (*w * Rational64::from_integer(scale)).to_integer();
    let sign = if w.is_negative() { "-" } else { "" };
    let abs = scaled.abs();
    let frac = format!("{:0width$}", abs % scale, width = places as usize);
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}{}", abs / scale)
    } else {
        format!("{sign}{}.{frac}", abs / scale)
    }
}
