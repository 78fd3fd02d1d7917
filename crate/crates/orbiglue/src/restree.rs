//! Resolution trees of cyclic quotient singularities by iterated weighted
//! blow-ups, and the exact topological constants attached to one blow-up.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::weights::{self, CongruenceClass, Kind, WeightError, WeightVector};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error("branch index {i} is out of range for a vector with {n} weights")]
    BadIndex { i: usize, n: usize },
    #[error("entry {i} equals 1, so there is no singular point to blow up there")]
    TrivialBranch { i: usize },
    #[error("p and q must satisfy p > q >= 1 and gcd(p, q) = 1, got p = {p}, q = {q}")]
    BadChain { p: u64, q: u64 },
    #[error("need at least one weight in the chain, got n = {n}")]
    ChainLength { n: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    SmoothLeaf,
    Interior,
    CycleDetected,
    DepthExceeded,
    /// Some pair of weights shares a factor, so the blow-up at this node
    /// would have non-isolated singularities and the child rule stops.
    NonIsolated,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionNode {
    pub weights: CongruenceClass,
    pub status: NodeStatus,
    pub children: Vec<ResolutionNode>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResolutionTree {
    pub root: ResolutionNode,
    pub is_type_i: bool,
    pub depth: usize,
    pub node_count: usize,
}

pub const DEFAULT_MAX_DEPTH: usize = 64;

/// True iff the vector is `(m, 1, ..., 1)`.
pub fn is_smooth_model(v: &CongruenceClass) -> bool {
    v.canonical().w().iter().all(|&x| x == 1)
}

/// Blows up the singular point of `v` at entry `i` (1-based; entry 0 is the
/// leading weight). The new vector is `(ai, a1, .., x, .., an)` with
/// `x = -a0 mod ai` in `[1, ai]`, normalized modulo `ai`.
pub fn child(v: &CongruenceClass, i: usize) -> Result<CongruenceClass, TreeError> {
    let c = v.canonical();
    let n = c.n();
    if i == 0 || i > n {
        return Err(TreeError::BadIndex { i, n });
    }
    let ai = c.w()[i - 1];
    if ai == 1 {
        return Err(TreeError::TrivialBranch { i });
    }
    let x = match (ai - c.w0() % ai) % ai {
        0 => ai,
        r => r,
    };
    let mut w = c.w().to_vec();
    w[i - 1] = x;
    Ok(weights::normalize(&WeightVector::new(Kind::Compact, ai, w)?)?)
}

/// Depth-first expansion of the blow-up tree. A node repeating a vector on
/// its own ancestor path is marked `CycleDetected`; unresolved nodes at
/// `max_depth` are marked `DepthExceeded`.
pub fn build_tree(v: &WeightVector, max_depth: usize) -> Result<ResolutionTree, TreeError> {
    if let Some((i, j, gcd)) = weights::first_common_factor(v) {
        return Err(WeightError::NotIsolated { i, j, gcd }.into());
    }
    let root = weights::normalize(&v.with_kind(Kind::Compact))?;
    let mut path = BTreeSet::new();
    let root = expand(root, 0, max_depth, &mut path)?;
    let mut stats = Stats { leaves_ok: true, depth: 0, count: 0 };
    stats.visit(&root, 0);
    Ok(ResolutionTree { root, is_type_i: stats.leaves_ok, depth: stats.depth, node_count: stats.count })
}

fn expand(
    v: CongruenceClass,
    depth: usize,
    max_depth: usize,
    path: &mut BTreeSet<CongruenceClass>,
) -> Result<ResolutionNode, TreeError> {
    let leaf = |weights, status| Ok(ResolutionNode { weights, status, children: Vec::new() });
    if is_smooth_model(&v) {
        return leaf(v, NodeStatus::SmoothLeaf);
    }
    if path.contains(&v) {
        return leaf(v, NodeStatus::CycleDetected);
    }
    if !weights::has_isolated_singularities(v.canonical()) {
        return leaf(v, NodeStatus::NonIsolated);
    }
    if depth >= max_depth {
        return leaf(v, NodeStatus::DepthExceeded);
    }
    path.insert(v.clone());
    let mut children = Vec::new();
    for i in 1..=v.canonical().n() {
        if v.entry(i) != 1 {
            let c = child(&v, i)?;
            children.push(expand(c, depth + 1, max_depth, path)?);
        }
    }
    path.remove(&v);
    Ok(ResolutionNode { weights: v, status: NodeStatus::Interior, children })
}

struct Stats {
    leaves_ok: bool,
    depth: usize,
    count: usize,
}

impl Stats {
    fn visit(&mut self, node: &ResolutionNode, depth: usize) {
        self.count += 1;
        self.depth = self.depth.max(depth);
        if node.children.is_empty() && node.status != NodeStatus::SmoothLeaf {
            self.leaves_ok = false;
        }
        for c in &node.children {
            self.visit(c, depth + 1);
        }
    }
}

impl ResolutionTree {
    /// Graphviz rendering, one node per vector, labeled `(a0,a1,...)`.
    pub fn to_dot(&self) -> String {
        fn walk(node: &ResolutionNode, id: &mut usize, out: &mut String) -> usize {
            let me = *id;
            *id += 1;
            let shape = match node.status {
                NodeStatus::SmoothLeaf => "box",
                NodeStatus::Interior => "ellipse",
                _ => "octagon",
            };
            let _ = writeln!(out, "  n{me} [label=\"{}\", shape={shape}];", node.weights);
            for c in &node.children {
                let cid = walk(c, id, out);
                let _ = writeln!(out, "  n{me} -> n{cid};");
            }
            me
        }
        let mut out = String::from("digraph resolution {\n");
        walk(&self.root, &mut 0, &mut out);
        out.push_str("}\n");
        out
    }

    /// Nested `{weights, status, children}` objects.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.root).expect("tree serializes")
    }

    /// Node vectors in depth-first order.
    pub fn preorder(&self) -> Vec<&CongruenceClass> {
        fn walk<'a>(n: &'a ResolutionNode, out: &mut Vec<&'a CongruenceClass>) {
            out.push(&n.weights);
            for c in &n.children {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

/// The chain `(p, q, 1, .., 1) -> (q, x, 1, .., 1) -> ...` with
/// `x = -p mod q`, ending at the first smooth vector. `n` counts the weights
/// after the leading one.
pub fn euclidean_chain(p: u64, q: u64, n: usize) -> Result<Vec<CongruenceClass>, TreeError> {
    if n < 2 {
        return Err(TreeError::ChainLength { n });
    }
    if !(p > q && q >= 1 && p.gcd(&q) == 1) {
        return Err(TreeError::BadChain { p, q });
    }
    let mut out = Vec::new();
    let (mut a, mut b) = (p, q);
    loop {
        let mut w = vec![1; n];
        w[0] = b;
        out.push(weights::normalize(&WeightVector::compact(a, w)?)?);
        if b == 1 {
            break;
        }
        let x = match (b - a % b) % b {
            0 => b,
            r => r,
        };
        (a, b) = (b, x);
    }
    Ok(out)
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `(sum wi) / w0 - 1`, the multiple of `[E]` subtracted from the pulled-back
/// first Chern class.
pub fn chern_coefficient(v: &WeightVector) -> BigRational {
    let sum: BigInt = v.w().iter().map(|&x| BigInt::from(x)).sum();
    BigRational::new(sum, BigInt::from(v.w0())) - BigRational::one()
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

/// Intersection numbers feeding the expansion. Integrals over `E` are of
/// products of `h` (the pulled-back Kähler class) and `e = [E]`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntersectionData {
    /// Complex dimension of `X`.
    pub n: usize,
    /// Codimension of the blown-up locus.
    pub k: usize,
    /// `∫_X h^n`.
    pub vol: BigRational,
    /// `∫_E h^(n-k) e^(k-1)`.
    pub i_top: BigRational,
    /// `j -> ∫_E h^(n-1-j) e^j` for `k <= j <= n-1`; missing ones stay symbolic.
    pub higher: BTreeMap<usize, BigRational>,
    /// `∫_X c1(X) h^(n-1)`; symbolic when absent.
    pub c1_top: Option<BigRational>,
}

impl IntersectionData {
    pub fn new(n: usize, k: usize, vol: BigRational, i_top: BigRational) -> Self {
        IntersectionData { n, k, vol, i_top, higher: BTreeMap::new(), c1_top: None }
    }

    fn check(&self, v: &WeightVector) -> Result<(), LambdaError> {
        if self.vol.is_zero() {
            return Err(LambdaError::ZeroVolume);
        }
        if self.k != v.n() {
            return Err(LambdaError::Dimension(format!("k = {} but the weight vector has {} weights", self.k, v.n())));
        }
        if self.k < 3 || self.k > self.n {
            return Err(LambdaError::Dimension(format!("need 3 <= k <= n, got n = {}, k = {}", self.n, self.k)));
        }
        if let Some(j) = self.higher.keys().find(|&&j| j < self.k || j >= self.n) {
            return Err(LambdaError::Dimension(format!("higher intersection index {j} outside [k, n-1]")));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LambdaError {
    #[error("volume must be nonzero")]
    ZeroVolume,
    #[error("inconsistent intersection data: {0}")]
    Dimension(String),
}

/// An exact number `value * pi^pi_power`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LambdaResult {
    pub value: BigRational,
    pub pi_power: i32,
}

impl LambdaResult {
    pub fn to_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        self.value.to_f64().unwrap_or(f64::NAN) * std::f64::consts::PI.powi(self.pi_power)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "numerator": self.value.numer().to_string(),
            "denominator": self.value.denom().to_string(),
            "pi_power": self.pi_power,
        })
    }
}

/// Coefficient of `eps^(2k-2)` in the average scalar curvature of the class
/// `h - eps^2 e`:
/// `(4 pi n / Vol) * c * C(n-1, k-1) * (-1)^k * I`, with `c` the Chern coefficient.
///
/// The sign is `(-1)^k`: expanding `-c e (h - eps^2 e)^(n-1)` and pushing
/// `e^k` forward to `E` keeps the minus sign. See [`lambda_constant_printed`]
/// for the variant with `(-1)^(k-1)`.
pub fn lambda_constant(v: &WeightVector, data: &IntersectionData) -> Result<LambdaResult, LambdaError> {
    data.check(v)?;
    let sign = if data.k.is_multiple_of(2) { 1 } else { -1 };
    let value = rat(4 * data.n as i64, 1) / data.vol.clone()
        * chern_coefficient(v)
        * BigRational::from_integer(binomial(data.n as u64 - 1, data.k as u64 - 1))
        * rat(sign, 1)
        * data.i_top.clone();
    Ok(LambdaResult { value, pi_power: 1 })
}

/// The same product with sign `(-1)^(k-1)`; always the negative of
/// [`lambda_constant`].
pub fn lambda_constant_printed(v: &WeightVector, data: &IntersectionData) -> Result<LambdaResult, LambdaError> {
    let mut r = lambda_constant(v, data)?;
    r.value = -r.value;
    Ok(r)
}

/// Unknown intersection numbers carried through the expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    /// `∫_X c1(X) h^(n-1)`.
    C1Top,
    /// `∫_E h^(n-1-j) e^j`.
    EHigher(usize),
    /// `∫_E c1(X) h^(n-2-j) e^j`.
    C1OnE(usize),
}

impl std::fmt::Display for Symbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Symbol::C1Top => write!(f, "c1h"),
            Symbol::EHigher(j) => write!(f, "J{j}"),
            Symbol::C1OnE(j) => write!(f, "K{j}"),
        }
    }
}

type Monomial = Vec<(Symbol, u32)>;

/// Polynomial in [`Symbol`]s with exact rational coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Poly::zero();
        p.add_term(Vec::new(), c);
        p
    }

    pub fn symbol(s: Symbol) -> Self {
        let mut p = Poly::zero();
        p.add_term(vec![(s, 1)], BigRational::one());
        p
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(m.clone()).or_insert_with(BigRational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_term(m.clone(), c.clone());
        }
        r
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        let mut r = Poly::zero();
        for (m, x) in &self.terms {
            r.add_term(m.clone(), x * c);
        }
        r
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut r = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                let mut exps: BTreeMap<Symbol, u32> = m1.iter().copied().collect();
                for &(s, e) in m2 {
                    *exps.entry(s).or_insert(0) += e;
                }
                r.add_term(exps.into_iter().collect(), c1 * c2);
            }
        }
        r
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value when no symbol appears.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        self.terms.keys().flat_map(|m| m.iter().map(|&(s, _)| s)).collect()
    }
}

impl std::fmt::Display for Poly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            let neg = c.is_negative();
            if !first {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            } else if neg {
                write!(f, "-")?;
            }
            first = false;
            let a = c.abs();
            if m.is_empty() || !a.is_one() {
                write!(f, "{a}")?;
                if !m.is_empty() {
                    write!(f, "*")?;
                }
            }
            let parts: Vec<String> =
                m.iter().map(|(s, e)| if *e == 1 { s.to_string() } else { format!("{s}^{e}") }).collect();
            write!(f, "{}", parts.join("*"))?;
        }
        Ok(())
    }
}

/// Series in `eps^2`: `coeffs[j]` multiplies `pi * eps^(2j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Expansion {
    pub coeffs: Vec<Poly>,
    /// First power of `eps^2` affected by replacing the true volume by `Vol`.
    pub volume_correction_from: usize,
}

impl Expansion {
    /// Coefficient of `pi * eps^(2j)`.
    pub fn coefficient(&self, j: usize) -> &Poly {
        &self.coeffs[j]
    }
}

/// Evaluates `∫_X̂ h^b e^m` (with `c1` an extra basic factor when `with_c1`):
/// terms with `m >= 1` push forward to `∫_E (..) e^(m-1)`, which vanishes
/// unless the basic degree fits on the base, i.e. `m >= k`.
fn integral(data: &IntersectionData, with_c1: bool, m: usize) -> Poly {
    let n = data.n;
    if m == 0 {
        return if with_c1 {
            data.c1_top.clone().map(Poly::constant).unwrap_or_else(|| Poly::symbol(Symbol::C1Top))
        } else {
            Poly::constant(data.vol.clone())
        };
    }
    if m < data.k || m > n {
        return Poly::zero();
    }
    let j = m - 1;
    if with_c1 {
        return Poly::symbol(Symbol::C1OnE(j));
    }
    if j == data.k - 1 {
        return Poly::constant(data.i_top.clone());
    }
    data.higher.get(&j).cloned().map(Poly::constant).unwrap_or_else(|| Poly::symbol(Symbol::EHigher(j)))
}

/// Expands `4 pi n ∫ c1(X̂) (h - eps^2 e)^(n-1) / Vol` term by term, with
/// `c1(X̂) = c1(X) - c e`, and multiplies by the exact series of
/// `Vol / ∫ (h - eps^2 e)^n` through order `eps^(2 n)`.
///
/// The volume ratio is `1 + O(eps^(2k))`, so coefficients below
/// `volume_correction_from` are the same whether the constant in front uses
/// the true volume or `Vol`.
pub fn expansion_oracle(v: &WeightVector, data: &IntersectionData) -> Result<Expansion, LambdaError> {
    data.check(v)?;
    let n = data.n;
    let order = n;
    let c = chern_coefficient(v);
    let sgn = |i: usize| if i.is_multiple_of(2) { BigRational::one() } else { -BigRational::one() };
    let binom = |a: usize, b: usize| BigRational::from_integer(binomial(a as u64, b as u64));

    // Numerator: sum_i C(n-1, i) (-1)^i eps^(2i) [∫ c1 h^(n-1-i) e^i - c ∫ h^(n-1-i) e^(i+1)].
    let mut num = vec![Poly::zero(); order + 1];
    for i in 0..n {
        let w = binom(n - 1, i) * sgn(i);
        let term = integral(data, true, i).add(&integral(data, false, i + 1).scale(&-c.clone()));
        num[i] = num[i].add(&term.scale(&w));
    }

    // Denominator over Vol: 1 + u with u = sum_{i>=1} C(n, i) (-1)^i eps^(2i) ∫ h^(n-i) e^i / Vol.
    let inv_vol = BigRational::one() / data.vol.clone();
    let mut u = vec![Poly::zero(); order + 1];
    for i in 1..=n.min(order) {
        u[i] = integral(data, false, i).scale(&(binom(n, i) * sgn(i) * inv_vol.clone()));
    }
    // 1 / (1 + u) = sum_m (-u)^m, truncated.
    let mut recip = vec![Poly::zero(); order + 1];
    recip[0] = Poly::constant(BigRational::one());
    let mut power = recip.clone();
    for _ in 1..=order {
        power = series_mul(&power, &u, order);
        let neg = power.iter().map(|p| p.scale(&-BigRational::one())).collect::<Vec<_>>();
        power = neg;
        recip = recip.iter().zip(&power).map(|(a, b)| a.add(b)).collect();
        if power.iter().all(Poly::is_zero) {
            break;
        }
    }

    let front = rat(4 * n as i64, 1) * inv_vol;
    let coeffs = series_mul(&num, &recip, order).into_iter().map(|p| p.scale(&front)).collect();
    Ok(Expansion { coeffs, volume_correction_from: data.k })
}

fn series_mul(a: &[Poly], b: &[Poly], order: usize) -> Vec<Poly> {
    let mut r = vec![Poly::zero(); order + 1];
    for i in 0..=order {
        if a[i].is_zero() {
            continue;
        }
        for j in 0..=order - i {
            if !b[j].is_zero() {
                r[i + j] = r[i + j].add(&a[i].mul(&b[j]));
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cc(s: &str) -> CongruenceClass {
        weights::normalize(&s.parse().unwrap()).unwrap()
    }

    #[test]
    fn child_examples() {
        assert_eq!(child(&cc("(5,3,2,1)"), 1).unwrap(), cc("(3,1,2,1)"));
        assert_eq!(child(&cc("(5,3,2,1)"), 2).unwrap(), cc("(2,1,1,1)"));
        assert_eq!(child(&cc("(3,1,2,1)"), 2).unwrap(), cc("(2,1,1,1)"));
        assert_eq!(child(&cc("(5,3,2,1)"), 3).unwrap_err(), TreeError::TrivialBranch { i: 3 });
        assert_eq!(child(&cc("(5,3,2,1)"), 4).unwrap_err(), TreeError::BadIndex { i: 4, n: 3 });
    }

    #[test]
    fn single_smooth_leaf() {
        let t = build_tree(&"(-2,1,1,1)".parse().unwrap(), DEFAULT_MAX_DEPTH).unwrap();
        assert_eq!(t.node_count, 1);
        assert_eq!(t.root.status, NodeStatus::SmoothLeaf);
        assert!(t.is_type_i);
    }

    #[test]
    fn depth_limit_is_reported() {
        let t = build_tree(&"(7,3,1)".parse().unwrap(), 1).unwrap();
        assert!(!t.is_type_i);
        assert_eq!(t.root.children[0].status, NodeStatus::DepthExceeded);
    }

    #[test]
    fn shared_factor_below_root_stops_the_branch() {
        // (7,5,3,1) -> branch at 5 gives (5,3,3,1), whose weights share 3.
        let t = build_tree(&"(7,5,3,1)".parse().unwrap(), DEFAULT_MAX_DEPTH).unwrap();
        assert!(!t.is_type_i);
        assert_eq!(t.root.children[0].weights, cc("(5,3,3,1)"));
        assert_eq!(t.root.children[0].status, NodeStatus::NonIsolated);
    }

    #[test]
    fn chains() {
        let c = euclidean_chain(7, 3, 2).unwrap();
        assert_eq!(c, vec![cc("(7,3,1)"), cc("(3,2,1)"), cc("(2,1,1)")]);
        assert_eq!(euclidean_chain(5, 3, 3).unwrap(), vec![cc("(5,3,1,1)"), cc("(3,1,1,1)")]);
        assert_eq!(euclidean_chain(9, 1, 4).unwrap(), vec![cc("(9,1,1,1,1)")]);
        assert_eq!(euclidean_chain(6, 4, 2).unwrap_err(), TreeError::BadChain { p: 6, q: 4 });
    }

    #[test]
    fn chern_examples() {
        assert_eq!(chern_coefficient(&"(-5,3,2,1)".parse().unwrap()), rat(1, 5));
        assert_eq!(chern_coefficient(&"(-2,1,1,1)".parse().unwrap()), rat(1, 2));
    }

    #[test]
    fn poly_display() {
        let p = Poly::symbol(Symbol::C1Top).scale(&rat(-3, 2)).add(&Poly::constant(rat(2, 1)));
        assert_eq!(p.to_string(), "2 - 3/2*c1h");
    }
}
