//! Rationals with an inline `i64` fast path.
//!
//! Almost every coefficient that shows up in the bimodule computations is a
//! small fraction with denominator a power of two, so the common case never
//! allocates. Arithmetic is carried out in `i128` and falls back to
//! [`BigRational`] when the reduced result no longer fits.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Clone)]
pub enum Q {
    /// numerator, denominator; denominator > 0, gcd = 1
    Small(i64, i64),
    Big(Box<BigRational>),
}

fn gcd_i128(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Q {
    pub const ZERO: Q = Q::Small(0, 1);
    pub const ONE: Q = Q::Small(1, 1);

    pub fn from_int(n: i64) -> Q {
        Q::Small(n, 1)
    }

    pub fn new(num: i64, den: i64) -> Q {
        assert!(den != 0, "zero denominator");
        Q::from_i128(num as i128, den as i128)
    }

    fn from_i128(num: i128, den: i128) -> Q {
        let (mut n, mut d) = (num, den);
        if d < 0 {
            n = -n;
            d = -d;
        }
        let g = gcd_i128(n, d);
        if g > 1 {
            n /= g;
            d /= g;
        }
        match (i64::try_from(n), i64::try_from(d)) {
            (Ok(n), Ok(d)) => Q::Small(n, d),
            _ => Q::Big(Box::new(BigRational::new(BigInt::from(n), BigInt::from(d)))),
        }
    }

    fn from_big(r: BigRational) -> Q {
        if let (Some(n), Some(d)) = (r.numer().to_i64(), r.denom().to_i64()) {
            Q::Small(n, d)
        } else {
            Q::Big(Box::new(r))
        }
    }

    pub fn to_big(&self) -> BigRational {
        match self {
            Q::Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Q::Big(b) => (**b).clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Q::Small(n, _) => *n == 0,
            Q::Big(b) => b.is_zero(),
        }
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Q::Small(1, 1))
    }

    pub fn signum(&self) -> i32 {
        match self {
            Q::Small(n, _) => n.signum() as i32,
            Q::Big(b) => {
                if b.is_positive() {
                    1
                } else if b.is_negative() {
                    -1
                } else {
                    0
                }
            }
        }
    }

    pub fn is_integer(&self) -> bool {
        match self {
            Q::Small(_, d) => *d == 1,
            Q::Big(b) => b.is_integer(),
        }
    }

    pub fn recip(&self) -> Q {
        match self {
            Q::Small(n, d) => {
                assert!(*n != 0, "division by zero");
                Q::from_i128(*d as i128, *n as i128)
            }
            Q::Big(b) => Q::from_big(b.recip()),
        }
    }

    pub fn abs(&self) -> Q {
        if self.signum() < 0 {
            -self.clone()
        } else {
            self.clone()
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Q::Small(n, d) => *n as f64 / *d as f64,
            Q::Big(b) => b.to_f64().unwrap_or(f64::NAN),
        }
    }

    /// Exact rational approximation of a float (binary expansion).
    pub fn from_f64(x: f64) -> Q {
        Q::from_big(BigRational::from_float(x).expect("finite float"))
    }

    pub fn floor_big(&self) -> BigInt {
        self.to_big().floor().to_integer()
    }
}

impl Default for Q {
    fn default() -> Self {
        Q::ZERO
    }
}

impl From<i64> for Q {
    fn from(n: i64) -> Q {
        Q::from_int(n)
    }
}

impl From<BigInt> for Q {
    fn from(n: BigInt) -> Q {
        Q::from_big(BigRational::from_integer(n))
    }
}

impl PartialEq for Q {
    fn eq(&self, other: &Q) -> bool {
        match (self, other) {
            (Q::Small(a, b), Q::Small(c, d)) => a == c && b == d,
            _ => self.to_big() == other.to_big(),
        }
    }
}
impl Eq for Q {}

impl std::hash::Hash for Q {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        // Big values never reduce to Small, so normal forms are canonical.
        match self {
            Q::Small(n, d) => {
                0u8.hash(state);
                n.hash(state);
                d.hash(state);
            }
            Q::Big(b) => {
                1u8.hash(state);
                b.hash(state);
            }
        }
    }
}

impl PartialOrd for Q {
    fn partial_cmp(&self, other: &Q) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Q {
    fn cmp(&self, other: &Q) -> Ordering {
        match (self, other) {
            (Q::Small(a, b), Q::Small(c, d)) => ((*a as i128) * (*d as i128)).cmp(&((*c as i128) * (*b as i128))),
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl<'a> Add<&'a Q> for &'a Q {
    type Output = Q;
    fn add(self, rhs: &Q) -> Q {
        match (self, rhs) {
            (Q::Small(a, b), Q::Small(c, d)) => {
                if *b == 1 && *d == 1 {
                    return Q::from_i128(*a as i128 + *c as i128, 1);
                }
                let (a, b, c, d) = (*a as i128, *b as i128, *c as i128, *d as i128);
                Q::from_i128(a * d + c * b, b * d)
            }
            _ => Q::from_big(self.to_big() + rhs.to_big()),
        }
    }
}

impl<'a> Sub<&'a Q> for &'a Q {
    type Output = Q;
    fn sub(self, rhs: &Q) -> Q {
        match (self, rhs) {
            (Q::Small(a, b), Q::Small(c, d)) => {
                let (a, b, c, d) = (*a as i128, *b as i128, *c as i128, *d as i128);
                Q::from_i128(a * d - c * b, b * d)
            }
            _ => Q::from_big(self.to_big() - rhs.to_big()),
        }
    }
}

impl<'a> Mul<&'a Q> for &'a Q {
    type Output = Q;
    fn mul(self, rhs: &Q) -> Q {
        match (self, rhs) {
            (Q::Small(a, b), Q::Small(c, d)) => {
                if *b == 1 && *d == 1 {
                    return Q::from_i128(*a as i128 * *c as i128, 1);
                }
                Q::from_i128(*a as i128 * *c as i128, *b as i128 * *d as i128)
            }
            _ => Q::from_big(self.to_big() * rhs.to_big()),
        }
    }
}

impl<'a> Div<&'a Q> for &'a Q {
    type Output = Q;
    fn div(self, rhs: &Q) -> Q {
        self * &rhs.recip()
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Q> for Q {
            type Output = Q;
            fn $m(self, rhs: Q) -> Q {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a Q> for Q {
            type Output = Q;
            fn $m(self, rhs: &Q) -> Q {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl AddAssign<&Q> for Q {
    fn add_assign(&mut self, rhs: &Q) {
        *self = &*self + rhs;
    }
}
impl SubAssign<&Q> for Q {
    fn sub_assign(&mut self, rhs: &Q) {
        *self = &*self - rhs;
    }
}
impl MulAssign<&Q> for Q {
    fn mul_assign(&mut self, rhs: &Q) {
        *self = &*self * rhs;
    }
}

impl Neg for Q {
    type Output = Q;
    fn neg(self) -> Q {
        match self {
            Q::Small(n, d) => match n.checked_neg() {
                Some(m) => Q::Small(m, d),
                None => Q::from_i128(-(n as i128), d as i128),
            },
            Q::Big(b) => Q::Big(Box::new(-*b)),
        }
    }
}
impl Neg for &Q {
    type Output = Q;
    fn neg(self) -> Q {
        -self.clone()
    }
}

impl Zero for Q {
    fn zero() -> Q {
        Q::ZERO
    }
    fn is_zero(&self) -> bool {
        Q::is_zero(self)
    }
}
impl One for Q {
    fn one() -> Q {
        Q::ONE
    }
}

impl fmt::Display for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Q::Small(n, 1) => write!(f, "{n}"),
            Q::Small(n, d) => write!(f, "{n}/{d}"),
            Q::Big(b) => {
                if b.denom().is_one() {
                    write!(f, "{}", b.numer())
                } else {
                    write!(f, "{}/{}", b.numer(), b.denom())
                }
            }
        }
    }
}

impl fmt::Debug for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Q {
    type Err = String;
    fn from_str(s: &str) -> Result<Q, String> {
        let s = s.trim();
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        let n: BigInt = n.parse().map_err(|_| format!("bad rational `{s}`"))?;
        let d: BigInt = d.parse().map_err(|_| format!("bad rational `{s}`"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in `{s}`"));
        }
        Ok(Q::from_big(BigRational::new(n, d)))
    }
}

/// Least common multiple of the denominators, as a big integer.
pub fn denominator_lcm<'a>(it: impl IntoIterator<Item = &'a Q>) -> BigInt {
    let mut l = BigInt::one();
    for q in it {
        let d = q.to_big().denom().clone();
        l = l.lcm(&d);
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overflow_promotes_to_big() {
        let a = Q::from_int(i64::MAX);
        let b = &a * &a;
        assert!(matches!(b, Q::Big(_)));
        let c = &b / &a;
        assert_eq!(c, a);
        assert!(matches!(c, Q::Small(..)));
    }

    #[test]
    fn normalizes_sign_and_gcd() {
        assert_eq!(Q::new(2, -4), Q::new(-1, 2));
        assert_eq!(Q::new(3, 6).to_string(), "1/2");
        assert_eq!("-6/4".parse::<Q>().unwrap(), Q::new(-3, 2));
    }

    #[test]
    fn ordering() {
        assert!(Q::new(1, 3) < Q::new(1, 2));
        assert!(Q::new(-1, 2) < Q::ZERO);
        assert_eq!(Q::from_f64(0.5), Q::new(1, 2));
    }
}
