//! The geometric realization of a Coxeter system with finite `m_st`: the
//! polynomial ring `R = Sym(𝔥*)`, the `W`-action, Demazure operators and the
//! splitting `R = R^s ⊕ ρR^s`.
//!
//! Coordinates: the coroots `α_s^∨` are the standard basis of `𝔥` and
//! `x_1..x_n` the dual coordinates, so `α_s = Σ_t c_{st} x_t` with
//! `c_{st} = ⟨α_s, α_t^∨⟩ = −2cos(π/m_st)` and `ρ = x_1 + … + x_n`.
//! Polynomial degrees follow the bimodule grading: linear forms have
//! degree 2.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::coxeter::{CoxElt, CoxeterSystem};
use crate::exact::{NumberField, Scalar};

/// Variables per monomial are packed 8 bits each into a `u64`.
pub const MAX_RANK: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RealizationError {
    #[error("realizations need finite m_st")]
    Infinite,
    #[error("rank {0} exceeds the supported maximum of 8")]
    RankTooLarge(usize),
    #[error("cannot parse polynomial: {0}")]
    Parse(String),
}

/// Exponent of `x_{i+1}` in a packed monomial.
pub fn exp(m: u64, i: usize) -> u32 {
    ((m >> (8 * i)) & 0xff) as u32
}

fn mono_degree(m: u64) -> u32 {
    (0..MAX_RANK).map(|i| exp(m, i)).sum()
}

/// A polynomial in `x_1..x_n` with coefficients in a real number field.
/// Terms are kept sorted by packed monomial with no zero coefficients.
#[derive(Clone, PartialEq, Eq)]
pub struct PolyElt {
    field: &'static NumberField,
    terms: Vec<(u64, Scalar)>,
}

impl PolyElt {
    pub fn zero(field: &'static NumberField) -> PolyElt {
        PolyElt { field, terms: Vec::new() }
    }

    pub fn constant(c: Scalar) -> PolyElt {
        let field = c.field();
        if c.is_zero() {
            return PolyElt::zero(field);
        }
        PolyElt { field, terms: vec![(0, c)] }
    }

    pub fn one(field: &'static NumberField) -> PolyElt {
        PolyElt::constant(field.one())
    }

    pub fn var(field: &'static NumberField, i: usize) -> PolyElt {
        assert!(i < MAX_RANK);
        PolyElt { field, terms: vec![(1u64 << (8 * i), field.one())] }
    }

    /// Build from `(exponents, coefficient)` pairs.
    pub fn from_terms(field: &'static NumberField, terms: impl IntoIterator<Item = (Vec<u32>, Scalar)>) -> PolyElt {
        let mut p = PolyElt::zero(field);
        for (e, c) in terms {
            let mut m = 0u64;
            for (i, &k) in e.iter().enumerate() {
                assert!(k < 256 && i < MAX_RANK);
                m |= (k as u64) << (8 * i);
            }
            p = &p + &PolyElt { field, terms: if c.is_zero() { vec![] } else { vec![(m, c)] } };
        }
        p
    }

    pub fn field(&self) -> &'static NumberField {
        self.field
    }

    /// Terms keyed by packed monomial (8 bits per variable).
    pub fn raw_terms(&self) -> &[(u64, Scalar)] {
        &self.terms
    }

    /// `c · x^m` for a packed monomial `m`.
    pub fn monomial(c: Scalar, m: u64) -> PolyElt {
        let field = c.field();
        PolyElt { field, terms: if c.is_zero() { vec![] } else { vec![(m, c)] } }
    }

    /// All packed monomials of polynomial degree `k` in `n` variables.
    pub fn monomials(n: usize, k: u32) -> Vec<u64> {
        fn rec(n: usize, i: usize, left: u32, acc: u64, out: &mut Vec<u64>) {
            if i + 1 == n {
                out.push(acc | (left as u64) << (8 * i));
                return;
            }
            for e in 0..=left {
                rec(n, i + 1, left - e, acc | (e as u64) << (8 * i), out);
            }
        }
        let mut out = Vec::new();
        if n == 0 {
            if k == 0 {
                out.push(0);
            }
            return out;
        }
        rec(n, 0, k, 0, &mut out);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms as `(exponent vector of length n, coefficient)`.
    pub fn terms(&self, n: usize) -> impl Iterator<Item = (Vec<u32>, &Scalar)> + '_ {
        self.terms.iter().map(move |(m, c)| ((0..n).map(|i| exp(*m, i)).collect(), c))
    }

    /// Polynomial degree of the highest term (`None` for zero).
    pub fn poly_degree(&self) -> Option<u32> {
        self.terms.iter().map(|(m, _)| mono_degree(*m)).max()
    }

    /// Grading of a homogeneous polynomial: twice its polynomial degree.
    pub fn grade(&self) -> Option<i32> {
        self.poly_degree().map(|d| 2 * d as i32)
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut it = self.terms.iter().map(|(m, _)| mono_degree(*m));
        match it.next() {
            None => true,
            Some(d) => it.all(|e| e == d),
        }
    }

    /// Homogeneous component of polynomial degree `d`.
    pub fn component(&self, d: u32) -> PolyElt {
        PolyElt { field: self.field, terms: self.terms.iter().filter(|(m, _)| mono_degree(*m) == d).cloned().collect() }
    }

    pub fn constant_term(&self) -> Scalar {
        match self.terms.first() {
            Some((0, c)) => c.clone(),
            _ => self.field.zero(),
        }
    }

    pub fn as_constant(&self) -> Option<Scalar> {
        match self.terms.as_slice() {
            [] => Some(self.field.zero()),
            [(0, c)] => Some(c.clone()),
            _ => None,
        }
    }

    pub fn scale(&self, c: &Scalar) -> PolyElt {
        if c.is_zero() {
            return PolyElt::zero(self.field);
        }
        PolyElt { field: self.field, terms: self.terms.iter().map(|(m, a)| (*m, a * c)).collect() }
    }

    pub fn pow(&self, e: u32) -> PolyElt {
        let mut out = PolyElt::one(self.field);
        for _ in 0..e {
            out = &out * self;
        }
        out
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, other: &PolyElt, c: &Scalar) {
        if c.is_zero() || other.is_zero() {
            return;
        }
        let scaled = if c.is_one() { other.clone() } else { other.scale(c) };
        *self = &*self + &scaled;
    }

    /// Split into coefficients of powers of `x_i`: `self = Σ_k out[k] x_i^k`.
    fn by_power_of(&self, i: usize) -> Vec<PolyElt> {
        let mut out: Vec<Vec<(u64, Scalar)>> = Vec::new();
        for (m, c) in &self.terms {
            let k = exp(*m, i) as usize;
            if out.len() <= k {
                out.resize(k + 1, Vec::new());
            }
            out[k].push((m & !(0xffu64 << (8 * i)), c.clone()));
        }
        out.into_iter()
            .map(|mut t| {
                t.sort_by_key(|(m, _)| *m);
                PolyElt { field: self.field, terms: t }
            })
            .collect()
    }

    /// Substitute the polynomial `value` for `x_i`.
    pub fn substitute(&self, i: usize, value: &PolyElt) -> PolyElt {
        let parts = self.by_power_of(i);
        let mut acc = PolyElt::zero(self.field);
        for p in parts.iter().rev() {
            acc = &(&acc * value) + p;
        }
        acc
    }

    /// Evaluate at a point given by scalars.
    pub fn eval(&self, point: &[Scalar]) -> Scalar {
        let mut acc = self.field.zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, x) in point.iter().enumerate() {
                for _ in 0..exp(*m, i) {
                    t = &t * x;
                }
            }
            acc = &acc + &t;
        }
        acc
    }

    fn fmt_with(&self, f: &mut fmt::Formatter<'_>, n: usize) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut terms: Vec<&(u64, Scalar)> = self.terms.iter().collect();
        let key = |m: u64| -> [u32; MAX_RANK] { std::array::from_fn(|i| exp(m, i)) };
        terms.sort_by(|a, b| mono_degree(b.0).cmp(&mono_degree(a.0)).then(key(b.0).cmp(&key(a.0))));
        for (k, (m, c)) in terms.iter().enumerate() {
            let mut vars = Vec::new();
            for i in 0..n.max(MAX_RANK) {
                match exp(*m, i) {
                    0 => {}
                    1 => vars.push(format!("x{}", i + 1)),
                    e => vars.push(format!("x{}^{e}", i + 1)),
                }
            }
            let (neg, abs) = match c.as_rational() {
                Some(q) if q.signum() < 0 => (true, -c.clone()),
                _ => (false, c.clone()),
            };
            let cs = abs.to_string();
            let cs = if abs.as_rational().is_none() { format!("({cs})") } else { cs };
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            match (abs.is_one(), vars.is_empty()) {
                (_, true) => write!(f, "{cs}")?,
                (true, false) => write!(f, "{}", vars.join("*"))?,
                (false, false) => write!(f, "{cs}*{}", vars.join("*"))?,
            }
        }
        Ok(())
    }

    /// Parse the `Display` form, e.g. `x1^2 - 3/2*x1*x2 + (1 + u)*x3`.
    pub fn parse(field: &'static NumberField, text: &str) -> Result<PolyElt, RealizationError> {
        let err = || RealizationError::Parse(text.to_string());
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(err());
        }
        // split at top-level signs
        let mut pieces: Vec<String> = Vec::new();
        let mut cur = String::new();
        let mut depth = 0;
        let mut prev = '\0';
        for ch in s.chars() {
            match ch {
                '(' => depth += 1,
                ')' => depth -= 1,
                _ => {}
            }
            if (ch == '+' || ch == '-') && depth == 0 && !cur.is_empty() && prev != '^' && prev != '*' && prev != '/' {
                pieces.push(std::mem::take(&mut cur));
            }
            cur.push(ch);
            prev = ch;
        }
        pieces.push(cur);
        let mut out = PolyElt::zero(field);
        for piece in pieces {
            let (neg, body) = match piece.strip_prefix('-') {
                Some(b) => (true, b.to_string()),
                None => (false, piece.trim_start_matches('+').to_string()),
            };
            let mut coef = field.one();
            let mut mono = 0u64;
            // split factors on '*' outside parentheses
            let mut factors = Vec::new();
            let mut depth = 0;
            let mut f = String::new();
            for ch in body.chars() {
                match ch {
                    '(' => depth += 1,
                    ')' => depth -= 1,
                    _ => {}
                }
                if ch == '*' && depth == 0 {
                    factors.push(std::mem::take(&mut f));
                } else {
                    f.push(ch);
                }
            }
            factors.push(f);
            for fac in factors {
                if let Some(v) = fac.strip_prefix('x') {
                    let (idx, e) = match v.split_once('^') {
                        Some((i, e)) => (i, e.parse::<u64>().map_err(|_| err())?),
                        None => (v, 1),
                    };
                    let i: usize = idx.parse().map_err(|_| err())?;
                    if i == 0 || i > MAX_RANK || e > 255 {
                        return Err(err());
                    }
                    let cur = (mono >> (8 * (i - 1))) & 0xff;
                    if cur + e > 255 {
                        return Err(err());
                    }
                    mono += e << (8 * (i - 1));
                } else {
                    let inner = fac.trim_start_matches('(').trim_end_matches(')');
                    let c = Scalar::parse(field, inner).map_err(|_| err())?;
                    coef = &coef * &c;
                }
            }
            if neg {
                coef = -coef;
            }
            out = &out + &PolyElt { field, terms: if coef.is_zero() { vec![] } else { vec![(mono, coef)] } };
        }
        Ok(out)
    }

    pub fn display(&self, n: usize) -> String {
        struct D<'a>(&'a PolyElt, usize);
        impl fmt::Display for D<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt_with(f, self.1)
            }
        }
        D(self, n).to_string()
    }
}

impl fmt::Display for PolyElt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_with(f, 0)
    }
}

impl std::hash::Hash for PolyElt {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.terms.hash(state);
    }
}

impl fmt::Debug for PolyElt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PolyElt({self})")
    }
}

fn merge(a: &PolyElt, b: &PolyElt, negate_b: bool) -> PolyElt {
    let mut out = Vec::with_capacity(a.terms.len() + b.terms.len());
    let (mut i, mut j) = (0, 0);
    while i < a.terms.len() || j < b.terms.len() {
        let take_a = j >= b.terms.len() || (i < a.terms.len() && a.terms[i].0 < b.terms[j].0);
        let take_b = i >= a.terms.len() || (j < b.terms.len() && b.terms[j].0 < a.terms[i].0);
        if take_a {
            out.push(a.terms[i].clone());
            i += 1;
        } else if take_b {
            let (m, c) = &b.terms[j];
            out.push((*m, if negate_b { -c.clone() } else { c.clone() }));
            j += 1;
        } else {
            let c = if negate_b { &a.terms[i].1 - &b.terms[j].1 } else { &a.terms[i].1 + &b.terms[j].1 };
            if !c.is_zero() {
                out.push((a.terms[i].0, c));
            }
            i += 1;
            j += 1;
        }
    }
    PolyElt { field: a.field, terms: out }
}

impl<'a> Add<&'a PolyElt> for &'a PolyElt {
    type Output = PolyElt;
    fn add(self, rhs: &PolyElt) -> PolyElt {
        merge(self, rhs, false)
    }
}

impl<'a> Sub<&'a PolyElt> for &'a PolyElt {
    type Output = PolyElt;
    fn sub(self, rhs: &PolyElt) -> PolyElt {
        merge(self, rhs, true)
    }
}

impl<'a> Mul<&'a PolyElt> for &'a PolyElt {
    type Output = PolyElt;
    fn mul(self, rhs: &PolyElt) -> PolyElt {
        if self.is_zero() || rhs.is_zero() {
            return PolyElt::zero(self.field);
        }
        if let [(0, c)] = self.terms.as_slice() {
            return rhs.scale(c);
        }
        if let [(0, c)] = rhs.terms.as_slice() {
            return self.scale(c);
        }
        let mut acc: std::collections::BTreeMap<u64, Scalar> = std::collections::BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                let p = c1 * c2;
                let slot = acc.entry(m1 + m2).or_insert_with(|| self.field.zero());
                *slot = &*slot + &p;
            }
        }
        PolyElt { field: self.field, terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect() }
    }
}

impl Neg for &PolyElt {
    type Output = PolyElt;
    fn neg(self) -> PolyElt {
        PolyElt { field: self.field, terms: self.terms.iter().map(|(m, c)| (*m, -c.clone())).collect() }
    }
}

macro_rules! forward_poly {
    ($tr:ident, $m:ident) => {
        impl $tr<PolyElt> for PolyElt {
            type Output = PolyElt;
            fn $m(self, rhs: PolyElt) -> PolyElt {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_poly!(Add, add);
forward_poly!(Sub, sub);
forward_poly!(Mul, mul);

/// The realization with coroots as the standard basis of `𝔥`.
#[derive(Clone, Debug)]
pub struct Realization {
    system: CoxeterSystem,
    field: &'static NumberField,
    /// `cartan[s][t] = ⟨α_s, α_t^∨⟩`.
    cartan: Vec<Vec<Scalar>>,
    roots: Vec<PolyElt>,
    /// `s(x_s)` for each `s`; the other coordinates are fixed by `s`.
    images: Vec<PolyElt>,
}

impl Realization {
    pub fn new(system: &CoxeterSystem) -> Result<Realization, RealizationError> {
        let n = system.rank();
        if n > MAX_RANK {
            return Err(RealizationError::RankTooLarge(n));
        }
        if system.matrix().has_infinite_entry() {
            return Err(RealizationError::Infinite);
        }
        let field = system.field();
        let cartan: Vec<Vec<Scalar>> = (0..n).map(|s| (0..n).map(|t| system.cartan(s, t).clone()).collect()).collect();
        let roots: Vec<PolyElt> = (0..n)
            .map(|s| {
                let mut r = PolyElt::zero(field);
                for t in 0..n {
                    r.add_scaled(&PolyElt::var(field, t), &cartan[s][t]);
                }
                r
            })
            .collect();
        let images = (0..n).map(|s| &PolyElt::var(field, s) - &roots[s]).collect();
        Ok(Realization { system: system.clone(), field, cartan, roots, images })
    }

    pub fn system(&self) -> &CoxeterSystem {
        &self.system
    }

    pub fn field(&self) -> &'static NumberField {
        self.field
    }

    pub fn rank(&self) -> usize {
        self.cartan.len()
    }

    /// `⟨α_s, α_t^∨⟩`.
    pub fn cartan(&self, s: usize, t: usize) -> &Scalar {
        &self.cartan[s][t]
    }

    pub fn root(&self, s: usize) -> &PolyElt {
        &self.roots[s]
    }

    pub fn var(&self, i: usize) -> PolyElt {
        PolyElt::var(self.field, i)
    }

    pub fn constant(&self, c: i64) -> PolyElt {
        PolyElt::constant(self.field.int(c))
    }

    /// The linear form with `⟨ρ, α_s^∨⟩ = 1` for all `s`.
    pub fn rho(&self) -> PolyElt {
        (0..self.rank()).fold(PolyElt::zero(self.field), |acc, i| &acc + &self.var(i))
    }

    /// Pairing of a linear form with the coroot `α_s^∨` (coefficient of `x_s`).
    pub fn pair_coroot(&self, f: &PolyElt, s: usize) -> Scalar {
        let key = 1u64 << (8 * s);
        f.terms.iter().find(|(m, _)| *m == key).map_or(self.field.zero(), |(_, c)| c.clone())
    }

    /// `s(f)`: the ring automorphism with `x_s ↦ x_s − α_s`.
    pub fn act_gen(&self, s: usize, f: &PolyElt) -> PolyElt {
        f.substitute(s, &self.images[s])
    }

    /// `w(f)` for a group element, applying the rightmost letter first.
    pub fn act(&self, w: &CoxElt, f: &PolyElt) -> PolyElt {
        w.word().iter().rev().fold(f.clone(), |acc, &s| self.act_gen(s as usize, &acc))
    }

    /// Demazure operator `∂_s(f) = (f − s(f))/α_s`.
    pub fn demazure(&self, s: usize, f: &PolyElt) -> PolyElt {
        let num = f - &self.act_gen(s, f);
        self.divide_by_root(s, &num)
    }

    /// Exact division by `α_s = 2x_s + β`: synthetic division in `x_s`.
    fn divide_by_root(&self, s: usize, g: &PolyElt) -> PolyElt {
        if g.is_zero() {
            return g.clone();
        }
        let beta = &self.roots[s] - &self.var(s).scale(&self.field.int(2));
        let half = self.field.int(2).inv();
        let mut parts = g.by_power_of(s);
        let top = parts.len() - 1;
        let mut q = vec![PolyElt::zero(self.field); top];
        for k in (1..=top).rev() {
            let qk = parts[k].scale(&half);
            parts[k - 1] = &parts[k - 1] - &(&beta * &qk);
            q[k - 1] = qk;
        }
        assert!(parts[0].is_zero(), "inexact division by a root");
        let xs = self.var(s);
        let mut out = PolyElt::zero(self.field);
        for qk in q.iter().rev() {
            out = &(&out * &xs) + qk;
        }
        out
    }

    /// `f = a + ρ·b` with `a, b` both `s`-invariant:
    /// `a = ∂_s(−f·s(ρ))`, `b = ∂_s(f)`.
    pub fn split_rs(&self, s: usize, f: &PolyElt) -> (PolyElt, PolyElt) {
        let srho = self.act_gen(s, &self.rho());
        let a = self.demazure(s, &-&(f * &srho));
        let b = self.demazure(s, f);
        (a, b)
    }

    pub fn is_invariant(&self, s: usize, f: &PolyElt) -> bool {
        self.act_gen(s, f) == *f
    }

    /// JSON dump: Cartan pairings as exact field-element strings.
    pub fn to_json(&self) -> serde_json::Value {
        let n = self.rank();
        serde_json::json!({
            "coxeter": self.system.matrix().to_json(),
            "field": {
                "conductor": self.field.conductor(),
                "minimal_polynomial": self.field.minimal_polynomial().iter().map(|q| q.to_string()).collect::<Vec<_>>(),
            },
            "cartan": (0..n).map(|s| (0..n).map(|t| self.cartan[s][t].to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "roots": (0..n).map(|s| self.roots[s].display(n)).collect::<Vec<_>>(),
            "rho": self.rho().display(n),
        })
    }
}
