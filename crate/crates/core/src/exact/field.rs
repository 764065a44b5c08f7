//! Real number fields `Q(2cos(pi/N))` with exact, decidable signs.
//!
//! A field is identified by `N`. Elements are polynomials in the generator
//! `u = 2cos(pi/N)` reduced modulo its minimal polynomial. The sign of a
//! nonzero element is decided by interval evaluation over a certified
//! isolating interval for `u`, refined by bisection until the interval for
//! the value excludes zero.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Mutex, OnceLock};

use smallvec::SmallVec;

use super::rational::Q;

pub struct NumberField {
    n: u32,
    /// monic minimal polynomial of the generator, low degree first
    modulus: Vec<Q>,
    /// certified isolating interval for the generator
    root: (Q, Q),
}

impl PartialEq for NumberField {
    fn eq(&self, other: &NumberField) -> bool {
        // interned: one instance per conductor
        std::ptr::eq(self, other)
    }
}
impl Eq for NumberField {}

impl fmt::Debug for NumberField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NumberField(u = 2cos(pi/{}), degree {})", self.n, self.degree())
    }
}

/// Integer polynomial helpers used to build minimal polynomials.
fn poly_divexact(num: &[i64], den: &[i64]) -> Vec<i64> {
    let mut rem = num.to_vec();
    let dl = den.len();
    let lead = *den.last().unwrap();
    let mut q = vec![0i64; num.len() + 1 - dl];
    for i in (0..q.len()).rev() {
        let c = rem[i + dl - 1] / lead;
        q[i] = c;
        for (j, &d) in den.iter().enumerate() {
            rem[i + j] -= c * d;
        }
    }
    debug_assert!(rem.iter().all(|&c| c == 0));
    q
}

fn cyclotomic(n: u32) -> Vec<i64> {
    // t^n - 1 divided by all Phi_d, d | n, d < n
    let mut p = vec![0i64; n as usize + 1];
    p[0] = -1;
    p[n as usize] = 1;
    for d in 1..n {
        if n % d == 0 {
            p = poly_divexact(&p, &cyclotomic(d));
        }
    }
    p
}

/// Dickson polynomials `P_k` with `P_k(t + 1/t) = t^k + t^-k`.
fn dickson(k: usize) -> Vec<i64> {
    let mut prev = vec![2i64];
    let mut cur = vec![0i64, 1];
    if k == 0 {
        return prev;
    }
    for _ in 1..k {
        let mut next = vec![0i64; cur.len() + 1];
        for (i, &c) in cur.iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, &c) in prev.iter().enumerate() {
            next[i] -= c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// Minimal polynomial of `2cos(pi/n)` over the rationals.
pub fn min_poly_two_cos(n: u32) -> Vec<i64> {
    assert!(n >= 2);
    let phi = cyclotomic(2 * n);
    let k = (phi.len() - 1) / 2;
    let mut out = vec![0i64; k + 1];
    for j in 0..=k {
        let c = phi[k + j];
        if c == 0 {
            continue;
        }
        if j == 0 {
            out[0] += c;
        } else {
            for (i, &d) in dickson(j).iter().enumerate() {
                out[i] += c * d;
            }
        }
    }
    out
}

fn eval_q(p: &[Q], x: &Q) -> Q {
    let mut acc = Q::ZERO;
    for c in p.iter().rev() {
        acc = &(&acc * x) + c;
    }
    acc
}

/// Interval product of [a,b] and [c,d].
fn imul(a: &(Q, Q), b: &(Q, Q)) -> (Q, Q) {
    let cands = [&a.0 * &b.0, &a.0 * &b.1, &a.1 * &b.0, &a.1 * &b.1];
    let lo = cands.iter().min().unwrap().clone();
    let hi = cands.iter().max().unwrap().clone();
    (lo, hi)
}

impl NumberField {
    fn build(n: u32) -> NumberField {
        let mp = min_poly_two_cos(n);
        let modulus: Vec<Q> = mp.iter().map(|&c| Q::from_int(c)).collect();
        let approx = 2.0 * (std::f64::consts::PI / n as f64).cos();
        let root = if modulus.len() == 2 {
            let r = -modulus[0].clone();
            (r.clone(), r)
        } else {
            let eps = Q::new(1, 1 << 30);
            let mut lo = &Q::from_f64(approx) - &eps;
            let mut hi = &Q::from_f64(approx) + &eps;
            let slo = eval_q(&modulus, &lo).signum();
            let shi = eval_q(&modulus, &hi).signum();
            assert!(slo * shi < 0, "failed to isolate 2cos(pi/{n})");
            for _ in 0..70 {
                let mid = &(&lo + &hi) / &Q::from_int(2);
                let s = eval_q(&modulus, &mid).signum();
                if s == 0 {
                    lo = mid.clone();
                    hi = mid;
                    break;
                }
                if s == slo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (lo, hi)
        };
        NumberField { n, modulus, root }
    }

    /// The interned field `Q(2cos(pi/n))`.
    pub fn get(n: u32) -> &'static NumberField {
        // 2cos(pi/2) and 2cos(pi/3) are rational: one canonical copy of Q
        let n = if n == 2 { 3 } else { n };
        static CACHE: OnceLock<Mutex<HashMap<u32, &'static NumberField>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap();
        if let Some(f) = guard.get(&n) {
            return f;
        }
        let f: &'static NumberField = Box::leak(Box::new(NumberField::build(n)));
        guard.insert(n, f);
        f
    }

    pub fn rationals() -> &'static NumberField {
        NumberField::get(3)
    }

    pub fn conductor(&self) -> u32 {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.modulus.len() - 1
    }

    pub fn is_rational(&self) -> bool {
        self.degree() == 1
    }

    pub fn minimal_polynomial(&self) -> &[Q] {
        &self.modulus
    }

    pub fn zero(&'static self) -> Scalar {
        Scalar::from_q(self, Q::ZERO)
    }

    pub fn one(&'static self) -> Scalar {
        Scalar::from_q(self, Q::ONE)
    }

    pub fn int(&'static self, n: i64) -> Scalar {
        Scalar::from_q(self, Q::from_int(n))
    }

    /// `2cos(pi/m)`; `m` must be 1, 2, 3 or divide the conductor.
    pub fn two_cos_pi_over(&'static self, m: u32) -> Scalar {
        match m {
            1 => return self.int(-2),
            2 => return self.int(0),
            3 => return self.int(1),
            _ => {}
        }
        assert!(self.n % m == 0, "2cos(pi/{m}) not in Q(2cos(pi/{}))", self.n);
        let d = dickson((self.n / m) as usize);
        let u = self.generator();
        let mut acc = self.zero();
        for c in d.iter().rev() {
            acc = &(&acc * &u) + &self.int(*c);
        }
        acc
    }

    pub fn generator(&'static self) -> Scalar {
        if self.is_rational() {
            return Scalar::from_q(self, -self.modulus[0].clone());
        }
        let mut c: SmallVec<[Q; 2]> = SmallVec::from_elem(Q::ZERO, self.degree());
        c[1] = Q::ONE;
        Scalar { field: self, c }
    }

    fn reduce(&self, mut c: Vec<Q>) -> SmallVec<[Q; 2]> {
        let d = self.degree();
        while c.len() > d {
            let top = c.pop().unwrap();
            if top.is_zero() {
                continue;
            }
            let base = c.len() - d;
            for i in 0..d {
                let t = &top * &self.modulus[i];
                c[base + i] -= &t;
            }
        }
        c.resize(d, Q::ZERO);
        SmallVec::from_vec(c)
    }
}

/// An element of a [`NumberField`].
#[derive(Clone)]
pub struct Scalar {
    field: &'static NumberField,
    c: SmallVec<[Q; 2]>,
}

impl Scalar {
    pub fn from_q(field: &'static NumberField, q: Q) -> Scalar {
        let mut c: SmallVec<[Q; 2]> = SmallVec::from_elem(Q::ZERO, field.degree());
        c[0] = q;
        Scalar { field, c }
    }

    pub fn from_coeffs(field: &'static NumberField, coeffs: &[Q]) -> Scalar {
        Scalar { field, c: field.reduce(coeffs.to_vec()) }
    }

    pub fn field(&self) -> &'static NumberField {
        self.field
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(Q::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.c[0].is_one() && self.c[1..].iter().all(Q::is_zero)
    }

    /// The rational value, if the element lies in Q.
    pub fn as_rational(&self) -> Option<&Q> {
        if self.c[1..].iter().all(Q::is_zero) {
            Some(&self.c[0])
        } else {
            None
        }
    }

    fn same_field(&self, other: &Scalar) {
        debug_assert!(std::ptr::eq(self.field, other.field), "mixed number fields");
    }

    /// Sign in the fixed real embedding: -1, 0 or 1.
    pub fn signum(&self) -> i32 {
        if let Some(q) = self.as_rational() {
            return q.signum();
        }
        let f = self.field;
        let (mut lo, mut hi) = f.root.clone();
        let slo = eval_q(&f.modulus, &lo).signum();
        loop {
            // Horner over intervals
            let mut acc = (Q::ZERO, Q::ZERO);
            for c in self.c.iter().rev() {
                let p = imul(&acc, &(lo.clone(), hi.clone()));
                acc = (&p.0 + c, &p.1 + c);
            }
            if acc.0.signum() > 0 {
                return 1;
            }
            if acc.1.signum() < 0 {
                return -1;
            }
            let mid = &(&lo + &hi) / &Q::from_int(2);
            let s = eval_q(&f.modulus, &mid).signum();
            if s == 0 {
                // generator is rational; cannot happen for degree >= 2
                unreachable!("rational root of an irreducible polynomial");
            }
            if s == slo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }

    pub fn is_positive(&self) -> bool {
        self.signum() > 0
    }

    pub fn to_f64(&self) -> f64 {
        let u = 2.0 * (std::f64::consts::PI / self.field.n as f64).cos();
        let mut acc = 0.0;
        for c in self.c.iter().rev() {
            acc = acc * u + c.to_f64();
        }
        acc
    }

    pub fn inv(&self) -> Scalar {
        assert!(!self.is_zero(), "division by zero in number field");
        if self.field.is_rational() {
            return Scalar::from_q(self.field, self.c[0].recip());
        }
        // extended Euclid in Q[x]: find s with s*a = 1 mod p
        let trim = |v: &mut Vec<Q>| {
            while v.len() > 1 && v.last().unwrap().is_zero() {
                v.pop();
            }
        };
        let mut r0: Vec<Q> = self.field.modulus.clone();
        let mut r1: Vec<Q> = self.c.to_vec();
        trim(&mut r1);
        let mut s0: Vec<Q> = vec![Q::ZERO];
        let mut s1: Vec<Q> = vec![Q::ONE];
        while !(r1.len() == 1) {
            // divide r0 by r1
            let mut rem = r0.clone();
            let dl = r1.len();
            let lead = r1.last().unwrap().recip();
            let mut quot = vec![Q::ZERO; rem.len() + 1 - dl];
            for i in (0..quot.len()).rev() {
                let c = &rem[i + dl - 1] * &lead;
                for (j, d) in r1.iter().enumerate() {
                    let t = &c * d;
                    rem[i + j] -= &t;
                }
                quot[i] = c;
            }
            rem.truncate(dl - 1);
            if rem.is_empty() {
                rem.push(Q::ZERO);
            }
            trim(&mut rem);
            // s2 = s0 - quot * s1
            let mut s2 = vec![Q::ZERO; (quot.len() + s1.len()).max(s0.len())];
            for (i, a) in s0.iter().enumerate() {
                s2[i] += a;
            }
            for (i, a) in quot.iter().enumerate() {
                for (j, b) in s1.iter().enumerate() {
                    let t = a * b;
                    s2[i + j] -= &t;
                }
            }
            trim(&mut s2);
            r0 = std::mem::replace(&mut r1, rem);
            s0 = std::mem::replace(&mut s1, s2);
        }
        let k = r1[0].recip();
        let coeffs: Vec<Q> = s1.iter().map(|c| c * &k).collect();
        Scalar { field: self.field, c: self.field.reduce(coeffs) }
    }

    pub fn pow(&self, e: u32) -> Scalar {
        let mut acc = self.field.one();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Parse the output of `Display`: terms `a`, `a*u`, `a*u^k` joined by `+`.
    pub fn parse(field: &'static NumberField, s: &str) -> Result<Scalar, String> {
        let mut coeffs = vec![Q::ZERO; field.degree().max(1)];
        let norm = s.replace(" - ", " + -").replace(' ', "");
        for term in norm.split('+').filter(|t| !t.is_empty()) {
            let (c, k) = match term.split_once("*u") {
                Some((c, rest)) => {
                    let k = if let Some(e) = rest.strip_prefix('^') {
                        e.parse::<usize>().map_err(|_| format!("bad exponent in `{term}`"))?
                    } else if rest.is_empty() {
                        1
                    } else {
                        return Err(format!("bad term `{term}`"));
                    };
                    (c.parse::<Q>()?, k)
                }
                None if term == "u" => (Q::ONE, 1),
                None => (term.parse::<Q>()?, 0),
            };
            if k >= coeffs.len() {
                coeffs.resize(k + 1, Q::ZERO);
            }
            coeffs[k] += &c;
        }
        Ok(Scalar::from_coeffs(field, &coeffs))
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Scalar) -> bool {
        std::ptr::eq(self.field, other.field) && self.c == other.c
    }
}
impl Eq for Scalar {}

impl std::hash::Hash for Scalar {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.c.hash(state);
    }
}

impl<'a> Add<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        self.same_field(rhs);
        let c = self.c.iter().zip(rhs.c.iter()).map(|(a, b)| a + b).collect();
        Scalar { field: self.field, c }
    }
}

impl<'a> Sub<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        self.same_field(rhs);
        let c = self.c.iter().zip(rhs.c.iter()).map(|(a, b)| a - b).collect();
        Scalar { field: self.field, c }
    }
}

impl<'a> Mul<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        self.same_field(rhs);
        let d = self.c.len();
        if d == 1 {
            return Scalar { field: self.field, c: SmallVec::from_elem(&self.c[0] * &rhs.c[0], 1) };
        }
        let mut prod = vec![Q::ZERO; 2 * d - 1];
        for (i, a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.c.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let t = a * b;
                prod[i + j] += &t;
            }
        }
        Scalar { field: self.field, c: self.field.reduce(prod) }
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar { field: self.field, c: self.c.iter().map(|a| -a).collect() }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

macro_rules! forward_scalar {
    ($tr:ident, $m:ident) => {
        impl $tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: Scalar) -> Scalar {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: &Scalar) -> Scalar {
                (&self).$m(rhs)
            }
        }
    };
}
forward_scalar!(Add, add);
forward_scalar!(Sub, sub);
forward_scalar!(Mul, mul);

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.c.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}*u")?,
                _ => write!(f, "{c}*u^{k}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_polynomials() {
        // 2cos(pi/2) = 0, 2cos(pi/3) = 1, 2cos(pi/4) = sqrt 2, 2cos(pi/5) = golden ratio
        assert_eq!(min_poly_two_cos(2), vec![0, 1]);
        assert_eq!(min_poly_two_cos(3), vec![-1, 1]);
        assert_eq!(min_poly_two_cos(4), vec![-2, 0, 1]);
        assert_eq!(min_poly_two_cos(5), vec![-1, -1, 1]);
        assert_eq!(min_poly_two_cos(6), vec![-3, 0, 1]);
        assert_eq!(min_poly_two_cos(7).len(), 4);
        assert_eq!(min_poly_two_cos(8), vec![2, 0, -4, 0, 1]);
    }

    #[test]
    fn generators_match_cosines() {
        for n in 2..=12u32 {
            let f = NumberField::get(n);
            for m in 1..=n {
                if n % m != 0 {
                    continue;
                }
                let c = f.two_cos_pi_over(m);
                let expect = 2.0 * (std::f64::consts::PI / m as f64).cos();
                assert!((c.to_f64() - expect).abs() < 1e-9, "n={n} m={m}");
            }
        }
    }

    #[test]
    fn signs_and_inverses() {
        let f = NumberField::get(5);
        let u = f.generator();
        // u^2 = u + 1, so u^2 - u - 1 = 0
        let z = &(&(&u * &u) - &u) - &f.one();
        assert!(z.is_zero());
        // golden ratio - 1.618034 vs 1.618033 rational approximations
        let a = &u - &Scalar::from_q(f, Q::new(1618034, 1000000));
        assert_eq!(a.signum(), -1);
        let b = &u - &Scalar::from_q(f, Q::new(1618033, 1000000));
        assert_eq!(b.signum(), 1);
        let w = &(&u * &u) + &f.int(3);
        let wi = w.inv();
        assert!((&w * &wi).is_one());
    }

    #[test]
    fn display_roundtrip() {
        let f = NumberField::get(8);
        let x = &(&f.generator().pow(3) * &f.int(-2)) + &Scalar::from_q(f, Q::new(1, 3));
        let s = x.to_string();
        assert_eq!(Scalar::parse(f, &s).unwrap(), x);
    }
}
