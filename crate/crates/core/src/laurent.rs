//! Integer Laurent polynomials in `v`, the bar involution, and quantum numbers.
//!
//! A symmetric polynomial `f = bar(f)` can always be written as an integer
//! combination `sum a_m [m]` of quantum numbers
//! `[m] = v^{-m+1} + v^{-m+3} + ... + v^{m-1}`. Reading coefficients from the
//! outside in gives `a_m = c_{m-1} - c_{m+1}`, where `c_i` is the coefficient
//! of `v^i`. The polynomial is *unimodal* when every `a_m` is nonnegative.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::int::Int;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LaurentError {
    #[error("quantum number [{0}] is undefined; need m >= 1")]
    BadQuantum(i64),
    #[error("polynomial `{0}` is not bar-invariant")]
    NotSymmetric(String),
    #[error("cannot parse Laurent polynomial: {0}")]
    Parse(String),
}

/// Sparse-free dense representation: `coeffs[i]` is the coefficient of
/// `v^(low + i)`. Trimmed so that the first and last coefficients are
/// nonzero; the zero polynomial has no coefficients.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct LaurentPoly {
    low: i32,
    coeffs: Vec<Int>,
}

impl LaurentPoly {
    pub fn zero() -> LaurentPoly {
        LaurentPoly::default()
    }

    pub fn one() -> LaurentPoly {
        LaurentPoly::monomial(1, 0)
    }

    /// The variable `v`.
    pub fn v() -> LaurentPoly {
        LaurentPoly::monomial(1, 1)
    }

    pub fn monomial(c: i64, e: i32) -> LaurentPoly {
        LaurentPoly::from_coeffs(e, vec![Int::from(c)])
    }

    pub fn from_coeffs(low: i32, coeffs: Vec<Int>) -> LaurentPoly {
        let mut p = LaurentPoly { low, coeffs };
        p.trim();
        p
    }

    /// Build from `(exponent, coefficient)` pairs; repeated exponents add up.
    pub fn from_terms(terms: impl IntoIterator<Item = (i32, i64)>) -> LaurentPoly {
        let mut map: BTreeMap<i32, Int> = BTreeMap::new();
        for (e, c) in terms {
            *map.entry(e).or_default() += &Int::from(c);
        }
        LaurentPoly::from_map(map)
    }

    fn from_map(map: BTreeMap<i32, Int>) -> LaurentPoly {
        let Some((&lo, _)) = map.iter().next() else {
            return LaurentPoly::zero();
        };
        let hi = *map.keys().next_back().unwrap();
        let mut coeffs = vec![Int::ZERO; (hi - lo + 1) as usize];
        for (e, c) in map {
            coeffs[(e - lo) as usize] = c;
        }
        LaurentPoly::from_coeffs(lo, coeffs)
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(Int::is_zero) {
            self.coeffs.pop();
        }
        let lead = self.coeffs.iter().take_while(|c| c.is_zero()).count();
        if lead > 0 {
            self.coeffs.drain(..lead);
            self.low += lead as i32;
        }
        if self.coeffs.is_empty() {
            self.low = 0;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.low == 0 && self.coeffs.len() == 1 && self.coeffs[0] == Int::ONE
    }

    /// Coefficient of `v^e`.
    pub fn coeff(&self, e: i32) -> Int {
        if e < self.low {
            return Int::ZERO;
        }
        self.coeffs.get((e - self.low) as usize).cloned().unwrap_or(Int::ZERO)
    }

    pub fn coeff_i64(&self, e: i32) -> i64 {
        self.coeff(e).to_i64().expect("coefficient exceeds i64")
    }

    /// Lowest exponent with a nonzero coefficient.
    pub fn min_degree(&self) -> Option<i32> {
        (!self.is_zero()).then_some(self.low)
    }

    /// Highest exponent with a nonzero coefficient.
    pub fn max_degree(&self) -> Option<i32> {
        (!self.is_zero()).then(|| self.low + self.coeffs.len() as i32 - 1)
    }

    /// Nonzero terms in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (i32, &Int)> + '_ {
        self.coeffs.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(move |(i, c)| (self.low + i as i32, c))
    }

    /// Swap `v` and `v^{-1}`.
    pub fn bar(&self) -> LaurentPoly {
        if self.is_zero() {
            return LaurentPoly::zero();
        }
        let hi = self.max_degree().unwrap();
        let coeffs = self.coeffs.iter().rev().cloned().collect();
        LaurentPoly { low: -hi, coeffs }
    }

    pub fn is_symmetric(&self) -> bool {
        self.bar() == *self
    }

    /// All coefficients are nonnegative.
    pub fn is_nonnegative(&self) -> bool {
        self.coeffs.iter().all(|c| !c.is_negative())
    }

    /// Lies in `Z[v]` (no negative powers).
    pub fn is_polynomial(&self) -> bool {
        self.is_zero() || self.low >= 0
    }

    pub fn scale(&self, k: &Int) -> LaurentPoly {
        if k.is_zero() {
            return LaurentPoly::zero();
        }
        LaurentPoly::from_coeffs(self.low, self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Multiply by `v^e`.
    pub fn shift(&self, e: i32) -> LaurentPoly {
        if self.is_zero() {
            return LaurentPoly::zero();
        }
        LaurentPoly { low: self.low + e, coeffs: self.coeffs.clone() }
    }

    /// Value at `v = 1`.
    pub fn eval_one(&self) -> Int {
        self.coeffs.iter().fold(Int::ZERO, |acc, c| &acc + c)
    }

    /// `self += k * v^e * other`, in place.
    pub fn add_scaled(&mut self, other: &LaurentPoly, k: &Int, e: i32) {
        if other.is_zero() || k.is_zero() {
            return;
        }
        let olow = other.low + e;
        let ohi = olow + other.coeffs.len() as i32 - 1;
        if self.is_zero() {
            self.low = olow;
            self.coeffs = other.coeffs.iter().map(|c| c * k).collect();
            return;
        }
        let shi = self.low + self.coeffs.len() as i32 - 1;
        let lo = self.low.min(olow);
        let hi = shi.max(ohi);
        if lo < self.low {
            let pad = (self.low - lo) as usize;
            self.coeffs.splice(0..0, std::iter::repeat(Int::ZERO).take(pad));
            self.low = lo;
        }
        self.coeffs.resize((hi - self.low + 1) as usize, Int::ZERO);
        for (i, c) in other.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let idx = (olow - self.low) as usize + i;
            let t = if *k == Int::ONE { c.clone() } else { c * k };
            self.coeffs[idx] += &t;
        }
        self.trim();
    }

    fn combine(&self, other: &LaurentPoly, sign: i64) -> LaurentPoly {
        let mut out = self.clone();
        out.add_scaled(other, &Int::from(sign), 0);
        out
    }

    /// Quantum number `[m] = v^{-m+1} + v^{-m+3} + ... + v^{m-1}`.
    pub fn quantum(m: i64) -> Result<LaurentPoly, LaurentError> {
        if m < 1 {
            return Err(LaurentError::BadQuantum(m));
        }
        let m = m as i32;
        Ok(LaurentPoly::from_terms((0..m).map(|k| (-m + 1 + 2 * k, 1))))
    }

    /// Decompose a bar-invariant polynomial into quantum numbers.
    pub fn quantum_decompose(&self) -> Result<QuantumDecomposition, LaurentError> {
        if !self.is_symmetric() {
            return Err(LaurentError::NotSymmetric(self.to_string()));
        }
        let mut dec = QuantumDecomposition::default();
        let Some(top) = self.max_degree() else {
            return Ok(dec);
        };
        let mut parities = [false; 2];
        for (e, _) in self.terms() {
            parities[e.rem_euclid(2) as usize] = true;
        }
        dec.mixed_parity = parities[0] && parities[1];
        for m in 1..=(top + 1) {
            let a = &self.coeff(m - 1) - &self.coeff(m + 1);
            if a.is_zero() {
                continue;
            }
            // [m] has exponents of parity m - 1
            if m % 2 == 1 {
                dec.odd.insert(m as u32, a);
            } else {
                dec.even.insert(m as u32, a);
            }
        }
        Ok(dec)
    }

    /// Every quantum-number coefficient is nonnegative.
    pub fn is_unimodal(&self) -> Result<bool, LaurentError> {
        Ok(self.quantum_decompose()?.is_nonnegative())
    }
}

/// Quantum-number coefficients `a_m`, split by the parity of `m`.
///
/// Odd `m` carry the even-exponent part of the input, even `m` the
/// odd-exponent part. Both parts always reconstruct the input exactly;
/// `mixed_parity` records that both were nonempty.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct QuantumDecomposition {
    pub odd: BTreeMap<u32, Int>,
    pub even: BTreeMap<u32, Int>,
    pub mixed_parity: bool,
}

impl QuantumDecomposition {
    /// All `(m, a_m)` with `a_m != 0`, by increasing `m`.
    pub fn entries(&self) -> Vec<(u32, Int)> {
        let mut all: Vec<(u32, Int)> =
            self.odd.iter().chain(self.even.iter()).map(|(m, a)| (*m, a.clone())).collect();
        all.sort_by_key(|(m, _)| *m);
        all
    }

    pub fn coefficient(&self, m: u32) -> Int {
        self.odd.get(&m).or_else(|| self.even.get(&m)).cloned().unwrap_or(Int::ZERO)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.odd.values().chain(self.even.values()).all(|a| !a.is_negative())
    }

    /// `sum a_m [m]`.
    pub fn reconstruct(&self) -> LaurentPoly {
        let mut out = LaurentPoly::zero();
        for (m, a) in self.entries() {
            let q = LaurentPoly::quantum(m as i64).expect("m >= 1");
            out.add_scaled(&q, &a, 0);
        }
        out
    }
}

impl<'a> Add<&'a LaurentPoly> for &'a LaurentPoly {
    type Output = LaurentPoly;
    fn add(self, rhs: &LaurentPoly) -> LaurentPoly {
        self.combine(rhs, 1)
    }
}

impl<'a> Sub<&'a LaurentPoly> for &'a LaurentPoly {
    type Output = LaurentPoly;
    fn sub(self, rhs: &LaurentPoly) -> LaurentPoly {
        self.combine(rhs, -1)
    }
}

impl<'a> Mul<&'a LaurentPoly> for &'a LaurentPoly {
    type Output = LaurentPoly;
    fn mul(self, rhs: &LaurentPoly) -> LaurentPoly {
        if self.is_zero() || rhs.is_zero() {
            return LaurentPoly::zero();
        }
        let mut coeffs = vec![Int::ZERO; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let t = a * b;
                coeffs[i + j] += &t;
            }
        }
        LaurentPoly::from_coeffs(self.low + rhs.low, coeffs)
    }
}

macro_rules! forward_laurent {
    ($tr:ident, $m:ident) => {
        impl $tr<LaurentPoly> for LaurentPoly {
            type Output = LaurentPoly;
            fn $m(self, rhs: LaurentPoly) -> LaurentPoly {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_laurent!(Add, add);
forward_laurent!(Sub, sub);
forward_laurent!(Mul, mul);

impl Neg for &LaurentPoly {
    type Output = LaurentPoly;
    fn neg(self) -> LaurentPoly {
        LaurentPoly { low: self.low, coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms() {
            let neg = c.is_negative();
            let abs = if neg { -c } else { c.clone() };
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            first = false;
            let unit = abs == Int::ONE;
            match e {
                0 => write!(f, "{abs}")?,
                1 if unit => write!(f, "v")?,
                1 => write!(f, "{abs}v")?,
                _ if unit => write!(f, "v^{e}")?,
                _ => write!(f, "{abs}v^{e}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LaurentPoly({self})")
    }
}

impl FromStr for LaurentPoly {
    type Err = LaurentError;

    /// Accepts the `Display` form, e.g. `v^-2 + 2 + v^2` or `-3v - v^-1`.
    fn from_str(s: &str) -> Result<LaurentPoly, LaurentError> {
        let err = || LaurentError::Parse(s.to_string());
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(err());
        }
        // split into signed terms; a '-' right after '^' belongs to an exponent
        let mut terms: Vec<String> = Vec::new();
        let mut cur = String::new();
        let mut prev = '\0';
        for ch in compact.chars() {
            if (ch == '+' || ch == '-') && prev != '^' && !cur.is_empty() {
                terms.push(std::mem::take(&mut cur));
            }
            cur.push(ch);
            prev = ch;
        }
        terms.push(cur);
        let mut map: BTreeMap<i32, Int> = BTreeMap::new();
        for t in terms {
            let (neg, body) = match t.strip_prefix('-') {
                Some(b) => (true, b),
                None => (false, t.strip_prefix('+').unwrap_or(&t)),
            };
            if body.is_empty() {
                return Err(err());
            }
            let (coef, exp) = match body.find('v') {
                None => (body.parse::<Int>().map_err(|_| err())?, 0),
                Some(pos) => {
                    let c = &body[..pos];
                    let c = c.strip_suffix('*').unwrap_or(c);
                    let coef = if c.is_empty() { Int::ONE } else { c.parse::<Int>().map_err(|_| err())? };
                    let rest = &body[pos + 1..];
                    let exp = if rest.is_empty() {
                        1
                    } else {
                        let e = rest.strip_prefix('^').ok_or_else(err)?;
                        let e = e.trim_start_matches('{').trim_end_matches('}');
                        e.parse::<i32>().map_err(|_| err())?
                    };
                    (coef, exp)
                }
            };
            let coef = if neg { -coef } else { coef };
            *map.entry(exp).or_default() += &coef;
        }
        Ok(LaurentPoly::from_map(map))
    }
}

impl Serialize for LaurentPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        struct Coeffs<'a>(&'a LaurentPoly);
        impl Serialize for Coeffs<'_> {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                let mut m = s.serialize_map(None)?;
                for (e, c) in self.0.terms() {
                    match c.to_i64() {
                        Some(n) => m.serialize_entry(&e.to_string(), &n)?,
                        None => m.serialize_entry(&e.to_string(), &c.to_string())?,
                    }
                }
                m.end()
            }
        }
        let mut m = s.serialize_map(Some(1))?;
        m.serialize_entry("coeffs", &Coeffs(self))?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for LaurentPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<LaurentPoly, D::Error> {
        use serde::de::Error;
        let v = serde_json::Value::deserialize(d)?;
        let obj = v.get("coeffs").and_then(|c| c.as_object()).ok_or_else(|| D::Error::custom("missing coeffs"))?;
        let mut map = BTreeMap::new();
        for (k, c) in obj {
            let e: i32 = k.parse().map_err(D::Error::custom)?;
            let c: Int = match c {
                serde_json::Value::Number(n) => n.to_string().parse().map_err(D::Error::custom)?,
                serde_json::Value::String(s) => s.parse().map_err(D::Error::custom)?,
                _ => return Err(D::Error::custom("bad coefficient")),
            };
            map.insert(e, c);
        }
        Ok(LaurentPoly::from_map(map))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lp(s: &str) -> LaurentPoly {
        s.parse().unwrap()
    }

    #[test]
    fn bar_examples() {
        assert_eq!(LaurentPoly::v().bar(), LaurentPoly::monomial(1, -1));
        assert_eq!(LaurentPoly::one().bar(), LaurentPoly::one());
        assert_eq!(lp("v^-1 + 2v^3").bar(), lp("v + 2v^-3"));
    }

    #[test]
    fn quantum_numbers() {
        assert_eq!(LaurentPoly::quantum(1).unwrap(), LaurentPoly::one());
        assert_eq!(LaurentPoly::quantum(2).unwrap(), lp("v^-1 + v"));
        assert_eq!(LaurentPoly::quantum(3).unwrap(), lp("v^-2 + 1 + v^2"));
        assert_eq!(LaurentPoly::quantum(0), Err(LaurentError::BadQuantum(0)));
    }

    #[test]
    fn decompositions() {
        let d = LaurentPoly::one().quantum_decompose().unwrap();
        assert_eq!(d.entries(), vec![(1, Int::ONE)]);
        let d = lp("v^-1 + v").quantum_decompose().unwrap();
        assert_eq!(d.entries(), vec![(2, Int::ONE)]);
        let d = lp("v^-2 + 2 + v^2").quantum_decompose().unwrap();
        assert_eq!(d.entries(), vec![(1, Int::ONE), (3, Int::ONE)]);
        assert!(!d.mixed_parity);
        assert!(lp("v + 1").quantum_decompose().is_err());
    }

    #[test]
    fn unimodality() {
        assert!(lp("v^-1 + v").is_unimodal().unwrap());
        let f = lp("v^-2 + v^2");
        assert!(!f.is_unimodal().unwrap());
        assert_eq!(f.quantum_decompose().unwrap().coefficient(1), Int::from(-1));
        assert!(LaurentPoly::zero().is_unimodal().unwrap());
    }

    #[test]
    fn mixed_parity_is_flagged_but_exact() {
        let f = lp("v^-1 + 1 + v");
        let d = f.quantum_decompose().unwrap();
        assert!(d.mixed_parity);
        assert_eq!(d.reconstruct(), f);
    }

    #[test]
    fn text_and_json_forms() {
        let f = lp("v^-2 + 2 + v^2");
        assert_eq!(f.to_string(), "v^-2 + 2 + v^2");
        let g = lp("-3v - v^-1 + 4v^{5}");
        assert_eq!(g.to_string(), "-v^-1 - 3v + 4v^5");
        assert_eq!(lp(&g.to_string()), g);
        let j = serde_json::to_string(&f).unwrap();
        assert_eq!(j, r#"{"coeffs":{"-2":1,"0":2,"2":1}}"#);
        let back: LaurentPoly = serde_json::from_str(&j).unwrap();
        assert_eq!(back, f);
        assert!("v^".parse::<LaurentPoly>().is_err());
    }

    fn arb_poly() -> impl Strategy<Value = LaurentPoly> {
        prop::collection::vec((-6i32..=6, -5i64..=5), 0..6).prop_map(LaurentPoly::from_terms)
    }

    proptest! {
        #[test]
        fn bar_is_ring_involution(f in arb_poly(), g in arb_poly()) {
            prop_assert_eq!((&f * &g).bar(), &f.bar() * &g.bar());
            prop_assert_eq!(f.bar().bar(), f.clone());
            prop_assert_eq!((&f + &g).bar(), &f.bar() + &g.bar());
        }

        #[test]
        fn decompose_inverts_quantum_sums(a in prop::collection::vec(-4i64..=4, 1..8)) {
            let mut f = LaurentPoly::zero();
            for (i, &c) in a.iter().enumerate() {
                f.add_scaled(&LaurentPoly::quantum(i as i64 + 1).unwrap(), &Int::from(c), 0);
            }
            let d = f.quantum_decompose().unwrap();
            for (i, &c) in a.iter().enumerate() {
                prop_assert_eq!(d.coefficient(i as u32 + 1), Int::from(c));
            }
            prop_assert_eq!(d.reconstruct(), f);
        }

        #[test]
        fn quantum_recursion(m in 2i64..12) {
            let q2 = LaurentPoly::quantum(2).unwrap();
            let lhs = &LaurentPoly::quantum(m).unwrap() * &q2;
            let rhs = &LaurentPoly::quantum(m - 1).unwrap() + &LaurentPoly::quantum(m + 1).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn quantum_one_times_two() {
        let q2 = LaurentPoly::quantum(2).unwrap();
        assert_eq!(&LaurentPoly::quantum(1).unwrap() * &q2, q2);
    }
}
