//! Weight vectors of weighted projective spaces and their singular loci.
//!
//! A vector `(w0, w1, ..., wn)` with positive leading entry describes the
//! compact space; a negative leading entry `(-w0, w1, ..., wn)` describes the
//! non-compact one, the total space of a line bundle over the compact
//! `P(w1, ..., wn)`.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WeightError {
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("weight at index {index} must be positive")]
    NonPositive { index: usize },
    #[error("need at least two weights after the leading entry, got {len}")]
    TooShort { len: usize },
    #[error("singularities are not isolated: gcd of weights at indices {i} and {j} is {gcd}")]
    NotIsolated { i: usize, j: usize, gcd: u64 },
    #[error("weight at index {index} is divisible by the leading weight {w0}")]
    ZeroResidue { index: usize, w0: u64 },
    #[error("{len} coordinates is too many for stratum enumeration (limit {limit})")]
    TooManyCoordinates { len: usize, limit: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Compact,
    NonCompact,
}

/// How a vector was written; output mirrors it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    Text,
    Json,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeightVector {
    kind: Kind,
    w0: u64,
    w: Vec<u64>,
}

impl WeightVector {
    pub fn new(kind: Kind, w0: u64, w: Vec<u64>) -> Result<Self, WeightError> {
        if w0 == 0 {
            return Err(WeightError::NonPositive { index: 0 });
        }
        if w.len() < 2 {
            return Err(WeightError::TooShort { len: w.len() });
        }
        if let Some(i) = w.iter().position(|&x| x == 0) {
            return Err(WeightError::NonPositive { index: i + 1 });
        }
        Ok(WeightVector { kind, w0, w })
    }

    pub fn compact(w0: u64, w: Vec<u64>) -> Result<Self, WeightError> {
        Self::new(Kind::Compact, w0, w)
    }

    pub fn non_compact(w0: u64, w: Vec<u64>) -> Result<Self, WeightError> {
        Self::new(Kind::NonCompact, w0, w)
    }

    /// Reads the signed form: a negative first entry means non-compact.
    pub fn from_signed(v: &[i64]) -> Result<Self, WeightError> {
        let (&first, rest) = v.split_first().ok_or(WeightError::TooShort { len: 0 })?;
        let kind = match first {
            x if x < 0 => Kind::NonCompact,
            x if x > 0 => Kind::Compact,
            _ => return Err(WeightError::NonPositive { index: 0 }),
        };
        let mut w = Vec::with_capacity(rest.len());
        for (i, &x) in rest.iter().enumerate() {
            if x <= 0 {
                return Err(WeightError::NonPositive { index: i + 1 });
            }
            w.push(x as u64);
        }
        Self::new(kind, first.unsigned_abs(), w)
    }

    pub fn to_signed(&self) -> Vec<i64> {
        let lead = match self.kind {
            Kind::Compact => self.w0 as i64,
            Kind::NonCompact => -(self.w0 as i64),
        };
        std::iter::once(lead).chain(self.w.iter().map(|&x| x as i64)).collect()
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn w0(&self) -> u64 {
        self.w0
    }

    pub fn w(&self) -> &[u64] {
        &self.w
    }

    /// Number of weights after the leading one.
    pub fn n(&self) -> usize {
        self.w.len()
    }

    /// All weights, leading one first, as unsigned magnitudes.
    pub fn all(&self) -> Vec<u64> {
        std::iter::once(self.w0).chain(self.w.iter().copied()).collect()
    }

    pub fn with_kind(&self, kind: Kind) -> WeightVector {
        WeightVector { kind, ..self.clone() }
    }

    /// Renders as a JSON array in signed form.
    pub fn to_json_array(&self) -> String {
        serde_json::to_string(&self.to_signed()).expect("integers serialize")
    }

    pub fn render(&self, form: Form) -> String {
        match form {
            Form::Text => self.to_string(),
            Form::Json => self.to_json_array(),
        }
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.to_signed().iter().map(|x| x.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl Serialize for WeightVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_signed().serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        WeightVector::from_signed(&v).map_err(serde::de::Error::custom)
    }
}

impl FromStr for WeightVector {
    type Err = WeightError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s).map(|(v, _)| v)
    }
}

/// Parses either `(-5,3,2,1)` or `[-5,3,2,1]`, reporting byte positions on error.
///
/// ```
/// use orbiglue::weights::{parse, Form, Kind};
///
/// let (v, form) = parse("[-5, 3, 2, 1]").unwrap();
/// assert_eq!(form, Form::Json);
/// assert_eq!(v.kind(), Kind::NonCompact);
/// assert_eq!(v.render(Form::Text), "(-5,3,2,1)");
/// ```
pub fn parse(input: &str) -> Result<(WeightVector, Form), WeightError> {
    let err = |pos: usize, msg: &str| WeightError::Parse { pos, msg: msg.to_string() };
    let bytes = input.as_bytes();
    let mut pos = 0;
    let skip_ws = |pos: &mut usize| {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
    };
    skip_ws(&mut pos);
    let (form, close) = match bytes.get(pos) {
        Some(b'(') => (Form::Text, b')'),
        Some(b'[') => (Form::Json, b']'),
        Some(_) => return Err(err(pos, "expected '(' or '['")),
        None => return Err(err(pos, "empty input")),
    };
    pos += 1;
    let mut values: Vec<i64> = Vec::new();
    let mut starts: Vec<usize> = Vec::new();
    loop {
        skip_ws(&mut pos);
        let start = pos;
        if pos < bytes.len() && (bytes[pos] == b'-' || bytes[pos] == b'+') {
            pos += 1;
        }
        let digits = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == digits {
            return Err(err(pos, "expected an integer"));
        }
        let v: i64 = input[start..pos].parse().map_err(|_| err(start, "integer out of range"))?;
        values.push(v);
        starts.push(start);
        skip_ws(&mut pos);
        match bytes.get(pos) {
            Some(b',') => pos += 1,
            Some(&c) if c == close => {
                pos += 1;
                break;
            }
            Some(_) => return Err(err(pos, "expected ',' or closing bracket")),
            None => return Err(err(pos, "unterminated weight vector")),
        }
    }
    skip_ws(&mut pos);
    if pos != bytes.len() {
        return Err(err(pos, "trailing characters"));
    }
    match WeightVector::from_signed(&values) {
        Ok(v) => Ok((v, form)),
        Err(WeightError::NonPositive { index }) => {
            Err(err(starts[index], "weights must be nonzero, and only the first may be negative"))
        }
        Err(WeightError::TooShort { .. }) => Err(err(pos, "need at least three entries")),
        Err(e) => Err(e),
    }
}

/// Smoothness: compact needs every weight equal to 1; non-compact only the
/// fibre-direction weights `w1..wn`.
pub fn is_smooth(v: &WeightVector) -> bool {
    let rest_trivial = v.w.iter().all(|&x| x == 1);
    match v.kind {
        Kind::Compact => v.w0 == 1 && rest_trivial,
        Kind::NonCompact => rest_trivial,
    }
}

/// First pair `(i, j, gcd)` with `i < j` over indices `0..=n` whose gcd exceeds 1.
pub fn first_common_factor(v: &WeightVector) -> Option<(usize, usize, u64)> {
    let all = v.all();
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            let g = all[i].gcd(&all[j]);
            if g > 1 {
                return Some((i, j, g));
            }
        }
    }
    None
}

/// Pairwise coprimality over all indices, leading weight included.
pub fn has_isolated_singularities(v: &WeightVector) -> bool {
    first_common_factor(v).is_none()
}

/// The quotient `C^n / Z_{w0}` with weights `w` has an isolated fixed point at
/// the origin iff `gcd(w0, wi) = 1` for every `i`.
pub fn origin_isolated(v: &WeightVector) -> bool {
    v.w.iter().all(|x| x.gcd(&v.w0) == 1)
}

/// Where a singular point or stratum sits.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locus {
    /// The point where only the given homogeneous coordinate is nonzero.
    Coordinate(usize),
    /// Points whose nonzero coordinates are exactly this index set.
    Support(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SingularPoint {
    pub locus: Locus,
    pub group_order: u64,
    /// Exponents of the generator of `Z_d` on the transverse coordinates,
    /// listed in increasing coordinate index.
    pub action_exponents: Vec<u64>,
}

/// Largest coordinate count accepted by compact stratum enumeration, which
/// visits all `2^(n+1) - 1` support sets.
pub const MAX_COMPACT_COORDS: usize = 20;

pub fn singular_points(v: &WeightVector) -> Result<Vec<SingularPoint>, WeightError> {
    match v.kind {
        Kind::NonCompact => non_compact_points(v),
        Kind::Compact => compact_strata(v),
    }
}

fn non_compact_points(v: &WeightVector) -> Result<Vec<SingularPoint>, WeightError> {
    if let Some((i, j, gcd)) = first_common_factor(v) {
        return Err(WeightError::NotIsolated { i, j, gcd });
    }
    let mut out = Vec::new();
    for (idx, &wi) in v.w.iter().enumerate() {
        if wi == 1 {
            continue;
        }
        let i = idx + 1;
        let mut ex = Vec::with_capacity(v.w.len());
        // xi_0 carries weight -w0.
        ex.push((wi - v.w0 % wi) % wi);
        for (jdx, &wj) in v.w.iter().enumerate() {
            if jdx != idx {
                ex.push(wj % wi);
            }
        }
        out.push(SingularPoint { locus: Locus::Coordinate(i), group_order: wi, action_exponents: ex });
    }
    Ok(out)
}

fn compact_strata(v: &WeightVector) -> Result<Vec<SingularPoint>, WeightError> {
    let all = v.all();
    let m = all.len();
    if m > MAX_COMPACT_COORDS {
        return Err(WeightError::TooManyCoordinates { len: m, limit: MAX_COMPACT_COORDS });
    }
    let mut out = Vec::new();
    for mask in 1u32..(1u32 << m) {
        let support: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let d = support.iter().fold(0u64, |g, &i| g.gcd(&all[i]));
        if d <= 1 {
            continue;
        }
        let ex = (0..m).filter(|i| mask & (1 << i) == 0).map(|i| all[i] % d).collect();
        out.push(SingularPoint { locus: Locus::Support(support), group_order: d, action_exponents: ex });
    }
    out.sort();
    Ok(out)
}

/// A weight vector with every `wi` reduced to its representative in `[1, w0]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CongruenceClass(WeightVector);

impl CongruenceClass {
    pub fn canonical(&self) -> &WeightVector {
        &self.0
    }

    pub fn into_inner(self) -> WeightVector {
        self.0
    }

    /// Entry `i` with the leading weight at index 0.
    pub fn entry(&self, i: usize) -> u64 {
        if i == 0 {
            self.0.w0
        } else {
            self.0.w[i - 1]
        }
    }
}

impl fmt::Display for CongruenceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub fn normalize(v: &WeightVector) -> Result<CongruenceClass, WeightError> {
    let mut w = Vec::with_capacity(v.w.len());
    for (i, &x) in v.w.iter().enumerate() {
        let r = x % v.w0;
        if r == 0 {
            if v.w0 > 1 {
                return Err(WeightError::ZeroResidue { index: i + 1, w0: v.w0 });
            }
            w.push(v.w0);
        } else {
            w.push(r);
        }
    }
    Ok(CongruenceClass(WeightVector { kind: v.kind, w0: v.w0, w }))
}

/// The congruence relation: same leading weight and `ai = bi mod a0`.
pub fn congruent(a: &WeightVector, b: &WeightVector) -> bool {
    a.w0 == b.w0 && a.w.len() == b.w.len() && a.w.iter().zip(&b.w).all(|(x, y)| x % a.w0 == y % a.w0)
}
