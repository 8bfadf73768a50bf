//! Exact arithmetic in `Q(i)(sqrt d1, sqrt d2)`.
//!
//! A [`Scalar`] stores eight rational coordinates against the basis
//! `i^a * sqrt(d1)^b * sqrt(d2)^c` for `a, b, c` in `{0, 1}`; the basis index is
//! the bit pattern `a | b << 1 | c << 2`. The radicands live in a small
//! [`Field`] descriptor carried by every scalar. Scalars built over different
//! descriptors are lifted into their join before any arithmetic.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const I_BIT: usize = 1;
const D1_BIT: usize = 2;
const D2_BIT: usize = 4;

/// Radicands of the coefficient field. `Q(i)` is always present.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Field {
    d1: Option<u64>,
    d2: Option<u64>,
}

pub fn is_square_free(d: u64) -> bool {
    if d < 2 {
        return d == 1;
    }
    let mut n = d;
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return false;
            }
        }
        p += 1;
    }
    true
}

/// Writes `n = s^2 * t` with `t` square-free.
fn square_free_decompose(n: u64) -> (u64, u64) {
    let mut s = 1u64;
    let mut t = 1u64;
    let mut m = n;
    let mut p = 2u64;
    while p * p <= m {
        let mut e = 0;
        while m.is_multiple_of(p) {
            m /= p;
            e += 1;
        }
        for _ in 0..e / 2 {
            s *= p;
        }
        if e % 2 == 1 {
            t *= p;
        }
        p += 1;
    }
    (s, t * m)
}

impl Field {
    /// `Q(i)` with no real quadratic extension.
    pub const fn gaussian() -> Self {
        Field { d1: None, d2: None }
    }

    /// Builds `Q(i)(sqrt r : r in radicands)`. Radicands must be distinct,
    /// square-free and greater than one; at most two are allowed.
    pub fn new(radicands: &[u64]) -> Result<Self> {
        let mut rs: Vec<u64> = radicands.to_vec();
        rs.sort_unstable();
        rs.dedup();
        if rs.len() != radicands.len() {
            return Err(Error::Validation(format!("radicands must be distinct, got {radicands:?}")));
        }
        for &d in &rs {
            if d < 2 || !is_square_free(d) {
                return Err(Error::Validation(format!("radicand {d} is not a square-free integer greater than 1")));
            }
        }
        match rs.as_slice() {
            [] => Ok(Field::gaussian()),
            [a] => Ok(Field { d1: Some(*a), d2: None }),
            [a, b] => Ok(Field { d1: Some(*a), d2: Some(*b) }),
            _ => Err(Error::Validation(format!("at most two quadratic extensions are supported, got {rs:?}"))),
        }
    }

    pub fn radicands(&self) -> Vec<u64> {
        self.d1.into_iter().chain(self.d2).collect()
    }

    /// Degree of the real subfield `Q(sqrt d1, sqrt d2)` over `Q`.
    pub fn real_degree(&self) -> usize {
        1 << self.radicands().len()
    }

    /// The product of radicands selected by the real bits of `index`.
    fn radicand_product(&self, index: usize) -> u64 {
        let mut r = 1;
        if index & D1_BIT != 0 {
            r *= self.d1.expect("component outside field");
        }
        if index & D2_BIT != 0 {
            r *= self.d2.expect("component outside field");
        }
        r
    }

    /// For a square-free `t`, the basis index `b` and integer `f` with
    /// `basis_b = f * sqrt(t)` (real part only).
    fn locate(&self, t: u64) -> Option<(usize, u64)> {
        if t == 1 {
            return Some((0, 1));
        }
        if self.d1 == Some(t) {
            return Some((D1_BIT, 1));
        }
        if self.d2 == Some(t) {
            return Some((D2_BIT, 1));
        }
        if let (Some(a), Some(b)) = (self.d1, self.d2) {
            let (s, tt) = square_free_decompose(a * b);
            if tt == t {
                return Some((D1_BIT | D2_BIT, s));
            }
        }
        None
    }

    /// The smallest supported field containing both `self` and `other`.
    pub fn join(&self, other: &Field) -> Result<Field> {
        if self == other {
            return Ok(*self);
        }
        let mut all: Vec<u64> = self.radicands();
        all.extend(other.radicands());
        all.sort_unstable();
        all.dedup();
        if all.len() <= 2 {
            return Field::new(&all);
        }
        if all.len() == 3 {
            for skip in 0..3 {
                let pair: Vec<u64> = (0..3).filter(|&k| k != skip).map(|k| all[k]).collect();
                let (_, t) = square_free_decompose(pair[0] * pair[1]);
                if t == all[skip] {
                    return Field::new(&pair);
                }
            }
        }
        Err(Error::Validation(format!("fields {self} and {other} do not embed in a common biquadratic field")))
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q(i")?;
        for d in self.radicands() {
            write!(f, ", sqrt{d}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for Field {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.radicands().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Field {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rs = Vec::<u64>::deserialize(d)?;
        Field::new(&rs).map_err(serde::de::Error::custom)
    }
}

/// An exact element of `Q(i)(sqrt d1, sqrt d2)`.
#[derive(Clone)]
pub struct Scalar {
    field: Field,
    c: [BigRational; 8],
}

fn zero_coeffs() -> [BigRational; 8] {
    std::array::from_fn(|_| BigRational::zero())
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar { field: Field::gaussian(), c: zero_coeffs() }
    }

    pub fn one() -> Self {
        Scalar::from_int(1)
    }

    pub fn from_int(n: i64) -> Self {
        Scalar::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Scalar::from_rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_rational(q: BigRational) -> Self {
        let mut c = zero_coeffs();
        c[0] = q;
        Scalar { field: Field::gaussian(), c }
    }

    /// The imaginary unit.
    pub fn i() -> Self {
        let mut c = zero_coeffs();
        c[I_BIT] = BigRational::one();
        Scalar { field: Field::gaussian(), c }
    }

    /// `sqrt(d)` for square-free `d > 1`, living in `Q(i)(sqrt d)`.
    pub fn sqrt(d: u64) -> Result<Self> {
        let field = Field::new(&[d])?;
        let mut c = zero_coeffs();
        c[D1_BIT] = BigRational::one();
        Ok(Scalar { field, c })
    }

    pub fn field(&self) -> Field {
        self.field
    }

    /// Rational coordinate against basis element `index` (see module docs).
    pub fn coeff(&self, index: usize) -> &BigRational {
        &self.c[index]
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(Zero::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.c[0].is_one() && self.c[1..].iter().all(Zero::is_zero)
    }

    /// True when the imaginary coordinates all vanish.
    pub fn is_real(&self) -> bool {
        (0..8).filter(|b| b & I_BIT != 0).all(|b| self.c[b].is_zero())
    }

    /// True when the scalar is a rational number.
    pub fn as_rational(&self) -> Option<&BigRational> {
        if self.c[1..].iter().all(Zero::is_zero) {
            Some(&self.c[0])
        } else {
            None
        }
    }

    /// Real-basis indices (subsets of `{sqrt d1, sqrt d2}`) with a nonzero
    /// coordinate, as bit patterns.
    pub fn real_support(&self) -> Vec<usize> {
        (0..8).filter(|b| b & I_BIT == 0 && !self.c[*b].is_zero()).collect()
    }

    /// Re-expresses `self` over `target`, which must contain its field.
    pub fn lift(&self, target: &Field) -> Result<Scalar> {
        if &self.field == target {
            return Ok(self.clone());
        }
        let mut c = zero_coeffs();
        for (b, q) in self.c.iter().enumerate() {
            if q.is_zero() {
                continue;
            }
            let (s, t) = square_free_decompose(self.field.radicand_product(b));
            let (tb, f) =
                target.locate(t).ok_or_else(|| Error::Validation(format!("sqrt{t} does not lie in {target}")))?;
            let idx = tb | (b & I_BIT);
            c[idx] += q * BigRational::new(BigInt::from(s), BigInt::from(f));
        }
        Ok(Scalar { field: *target, c })
    }

    fn aligned(a: &Scalar, b: &Scalar) -> (Field, Scalar, Scalar) {
        if a.field == b.field {
            return (a.field, a.clone(), b.clone());
        }
        let f = a.field.join(&b.field).unwrap_or_else(|e| panic!("{e}"));
        (f, a.lift(&f).unwrap(), b.lift(&f).unwrap())
    }

    fn with_field(&self, f: &Field) -> std::borrow::Cow<'_, Scalar> {
        if &self.field == f {
            std::borrow::Cow::Borrowed(self)
        } else {
            std::borrow::Cow::Owned(self.lift(f).unwrap_or_else(|e| panic!("{e}")))
        }
    }

    fn common_field(a: &Scalar, b: &Scalar) -> Field {
        if a.field == b.field {
            a.field
        } else {
            a.field.join(&b.field).unwrap_or_else(|e| panic!("{e}"))
        }
    }

    fn mul_ref(&self, other: &Scalar) -> Scalar {
        let f = Scalar::common_field(self, other);
        let a = self.with_field(&f);
        let b = other.with_field(&f);
        let d1 = BigRational::from_integer(BigInt::from(f.d1.unwrap_or(0)));
        let d2 = BigRational::from_integer(BigInt::from(f.d2.unwrap_or(0)));
        let mut c = zero_coeffs();
        for (x, qa) in a.c.iter().enumerate() {
            if qa.is_zero() {
                continue;
            }
            for (y, qb) in b.c.iter().enumerate() {
                if qb.is_zero() {
                    continue;
                }
                let mut q = qa * qb;
                let both = x & y;
                if both & I_BIT != 0 {
                    q = -q;
                }
                if both & D1_BIT != 0 {
                    q *= &d1;
                }
                if both & D2_BIT != 0 {
                    q *= &d2;
                }
                c[x ^ y] += q;
            }
        }
        Scalar { field: f, c }
    }

    /// Flips the sign of every coordinate whose index contains `bit`.
    fn conjugate(&self, bit: usize) -> Scalar {
        let mut out = self.clone();
        for (b, q) in out.c.iter_mut().enumerate() {
            if b & bit != 0 {
                *q = -q.clone();
            }
        }
        out
    }

    /// Multiplicative inverse, `None` for zero.
    ///
    /// Multiplying by the conjugate along `sqrt d2`, then `sqrt d1`, then `i`
    /// pushes the norm down the tower until it is rational.
    pub fn inv(&self) -> Option<Scalar> {
        if self.is_zero() {
            return None;
        }
        let mut y = self.clone();
        let mut acc = Scalar::one();
        for bit in [D2_BIT, D1_BIT, I_BIT] {
            let c = y.conjugate(bit);
            acc = acc.mul_ref(&c);
            y = y.mul_ref(&c);
        }
        let r = y.as_rational().expect("norm is rational").clone();
        Some(acc.scale(&r.recip()))
    }

    pub fn scale(&self, q: &BigRational) -> Scalar {
        let mut out = self.clone();
        for x in out.c.iter_mut() {
            *x *= q;
        }
        out
    }

    pub fn pow(&self, e: u32) -> Scalar {
        let mut out = Scalar::one();
        for _ in 0..e {
            out = out.mul_ref(self);
        }
        out
    }

    /// Numerical value `(re, im)` using the positive square roots.
    pub fn to_f64(&self) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for (b, q) in self.c.iter().enumerate() {
            if q.is_zero() {
                continue;
            }
            let v = q.to_f64().unwrap_or(f64::NAN) * (self.field.radicand_product(b) as f64).sqrt();
            if b & I_BIT != 0 {
                im += v;
            } else {
                re += v;
            }
        }
        (re, im)
    }

    /// Value of the real part under the embedding that sends `sqrt d_k` to
    /// `signs[k] * sqrt d_k`.
    pub fn conjugate_value(&self, signs: [i8; 2]) -> f64 {
        let mut re = 0.0;
        for (b, q) in self.c.iter().enumerate() {
            if b & I_BIT != 0 || q.is_zero() {
                continue;
            }
            let mut sign = 1.0;
            if b & D1_BIT != 0 && signs[0] < 0 {
                sign = -sign;
            }
            if b & D2_BIT != 0 && signs[1] < 0 {
                sign = -sign;
            }
            re += sign * q.to_f64().unwrap_or(f64::NAN) * (self.field.radicand_product(b) as f64).sqrt();
        }
        re
    }

    /// Least common denominator of all coordinates.
    pub fn denominator_lcm(&self) -> BigInt {
        self.c.iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()))
    }

    /// Parses an exact scalar, inferring the field from the radicands used.
    pub fn parse(s: &str) -> Result<Scalar> {
        let mut field = Field::gaussian();
        for d in scan_radicands(s)? {
            field = field.join(&Field::new(&[d])?)?;
        }
        Scalar::parse_in(s, &field)
    }

    /// Parses an exact scalar over a given field.
    ///
    /// Grammar: sums and differences of products of factors, where a factor is
    /// an integer, a fraction `p/q`, `sqrt<d>`, `sqrt(<d>)`, `i`, or a
    /// parenthesised expression. Example: `1 + 2/3*sqrt2 - i*sqrt3`.
    pub fn parse_in(s: &str, field: &Field) -> Result<Scalar> {
        let mut p = Parser { src: s, pos: 0, field: *field };
        let v = p.expr()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        v.lift(field)
    }
}

fn scan_radicands(s: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    let mut rest = s;
    let mut offset = 0;
    while let Some(k) = rest.find("sqrt") {
        let after = &rest[k + 4..];
        let after = after.strip_prefix('(').unwrap_or(after);
        let digits: String = after.chars().take_while(|c| c.is_ascii_digit()).collect();
        let d: u64 = digits
            .parse()
            .map_err(|_| Error::parse(format!("column {}", offset + k + 1), "sqrt needs an integer radicand"))?;
        if d != 1 {
            let (_, t) = square_free_decompose(d);
            if t != 1 {
                out.push(t);
            }
        }
        offset += k + 4;
        rest = &rest[k + 4..];
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    field: Field,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::parse(format!("column {} of {:?}", self.pos + 1, self.src), msg)
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn expr(&mut self) -> Result<Scalar> {
        let mut sign = 1;
        match self.peek() {
            Some('-') => {
                sign = -1;
                self.pos += 1;
            }
            Some('+') => self.pos += 1,
            _ => {}
        }
        let mut acc = self.term()?;
        if sign < 0 {
            acc = -acc;
        }
        loop {
            match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    acc = acc + self.term()?;
                }
                Some('-') => {
                    self.pos += 1;
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Scalar> {
        let mut acc = self.factor()?;
        while self.peek() == Some('*') {
            self.pos += 1;
            acc = acc * self.factor()?;
        }
        Ok(acc)
    }

    fn integer(&mut self) -> Result<BigInt> {
        self.skip_ws();
        let digits: String = self.src[self.pos..].chars().take_while(|c| c.is_ascii_digit()).collect();
        if digits.is_empty() {
            return Err(self.err("expected an integer"));
        }
        self.pos += digits.len();
        Ok(digits.parse::<BigInt>().expect("digits"))
    }

    fn factor(&mut self) -> Result<Scalar> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(v)
            }
            Some('i') => {
                self.pos += 1;
                Ok(Scalar::i())
            }
            Some('s') => {
                if !self.src[self.pos..].starts_with("sqrt") {
                    return Err(self.err("unknown symbol"));
                }
                self.pos += 4;
                let paren = self.peek() == Some('(');
                if paren {
                    self.pos += 1;
                }
                let d = self.integer()?;
                if paren {
                    if self.peek() != Some(')') {
                        return Err(self.err("expected ')'"));
                    }
                    self.pos += 1;
                }
                let d = d.to_u64().ok_or_else(|| self.err("radicand too large"))?;
                if d == 0 {
                    return Ok(Scalar::zero());
                }
                let (s, t) = square_free_decompose(d);
                let (b, f) =
                    self.field.locate(t).ok_or_else(|| self.err(&format!("sqrt{t} is not in {}", self.field)))?;
                let mut c = zero_coeffs();
                c[b] = BigRational::new(BigInt::from(s), BigInt::from(f));
                Ok(Scalar { field: self.field, c })
            }
            Some(c) if c.is_ascii_digit() => {
                let num = self.integer()?;
                if self.peek() == Some('/') {
                    self.pos += 1;
                    let den = self.integer()?;
                    if den.is_zero() {
                        return Err(self.err("zero denominator"));
                    }
                    Ok(Scalar::from_rational(BigRational::new(num, den)))
                } else {
                    Ok(Scalar::from_rational(BigRational::from_integer(num)))
                }
            }
            _ => Err(self.err("expected a number, sqrt<d>, i or '('")),
        }
    }
}

fn basis_label(field: &Field, b: usize) -> String {
    let mut parts = Vec::new();
    if b & I_BIT != 0 {
        parts.push("i".to_string());
    }
    if b & D1_BIT != 0 {
        parts.push(format!("sqrt{}", field.d1.unwrap()));
    }
    if b & D2_BIT != 0 {
        parts.push(format!("sqrt{}", field.d2.unwrap()));
    }
    parts.join("*")
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (b, q) in self.c.iter().enumerate() {
            if q.is_zero() {
                continue;
            }
            let neg = q.is_negative();
            let mag = q.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            let label = basis_label(&self.field, b);
            if label.is_empty() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{label}")?;
            } else {
                write!(f, "{mag}*{label}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({self})")
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Scalar) -> bool {
        if self.field == other.field {
            return self.c == other.c;
        }
        let (_, a, b) = Scalar::aligned(self, other);
        a.c == b.c
    }
}

impl Eq for Scalar {}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::zero()
    }
}

impl From<i64> for Scalar {
    fn from(n: i64) -> Self {
        Scalar::from_int(n)
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Scalar::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(mut self) -> Scalar {
        for q in self.c.iter_mut() {
            *q = -std::mem::take(q);
        }
        self
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -self.clone()
    }
}

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        if self.field != rhs.field {
            let f = Scalar::common_field(self, rhs);
            *self = self.lift(&f).unwrap();
            let r = rhs.lift(&f).unwrap();
            for (a, b) in self.c.iter_mut().zip(r.c.iter()) {
                *a += b;
            }
            return;
        }
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            if !b.is_zero() {
                *a += b;
            }
        }
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: &Scalar) {
        *self += &(-rhs);
    }
}

impl MulAssign<&Scalar> for Scalar {
    fn mul_assign(&mut self, rhs: &Scalar) {
        *self = self.mul_ref(rhs);
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $m(self, rhs: &Scalar) -> Scalar {
                let f: fn(&Scalar, &Scalar) -> Scalar = $body;
                f(self, rhs)
            }
        }
        impl $tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: Scalar) -> Scalar {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: &Scalar) -> Scalar {
                (&self).$m(rhs)
            }
        }
        impl $tr<Scalar> for &Scalar {
            type Output = Scalar;
            fn $m(self, rhs: Scalar) -> Scalar {
                self.$m(&rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| {
    let mut out = a.clone();
    out += b;
    out
});
binop!(Sub, sub, |a, b| {
    let mut out = a.clone();
    out -= b;
    out
});
binop!(Mul, mul, |a, b| a.mul_ref(b));
binop!(Div, div, |a, b| a.mul_ref(&b.inv().expect("division by zero scalar")));

impl std::iter::Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::zero(), |mut acc, x| {
            acc += &x;
            acc
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> Scalar {
        Scalar::parse(x).unwrap()
    }

    #[test]
    fn parses_and_prints() {
        let x = s("1+2/3*sqrt2");
        assert_eq!(x.to_string(), "1 + 2/3*sqrt2");
        assert_eq!(s("-sqrt2 + 1"), s("1 - sqrt2"));
        assert_eq!(s("sqrt8"), s("2*sqrt2"));
        assert_eq!(s("sqrt2*sqrt3"), s("sqrt6"));
        assert_eq!(s("i*i"), s("-1"));
        assert_eq!(s("(1+sqrt2)*(1-sqrt2)"), s("-1"));
        assert!(Scalar::parse("1 +").is_err());
        assert!(Scalar::parse("sqrt2*sqrt3*sqrt5").is_err());
    }

    #[test]
    fn radicand_validation() {
        assert!(Field::new(&[4]).is_err());
        assert!(Field::new(&[2, 2]).is_err());
        assert!(Field::new(&[2, 3, 5]).is_err());
        assert_eq!(Field::new(&[3, 2]).unwrap().radicands(), vec![2, 3]);
    }

    #[test]
    fn inverse_in_biquadratic_field() {
        let f = Field::new(&[2, 3]).unwrap();
        let x = Scalar::parse_in("1 + sqrt2 - 2*sqrt3 + i*sqrt6 + 1/2*i", &f).unwrap();
        let y = x.inv().unwrap();
        assert!((x * y).is_one());
        assert!(Scalar::zero().inv().is_none());
    }

    #[test]
    fn join_lifts_across_fields() {
        let a = s("sqrt2");
        let b = s("sqrt3");
        let c = &a * &b;
        assert_eq!(c, s("sqrt6"));
        assert_eq!(c.field().radicands(), vec![2, 3]);
        let d = s("sqrt6") * s("sqrt2");
        assert_eq!(d, s("2*sqrt3"));
    }

    #[test]
    fn numeric_value() {
        let (re, im) = s("1 + sqrt2 + 3*i").to_f64();
        assert!((re - (1.0 + 2f64.sqrt())).abs() < 1e-12);
        assert!((im - 3.0).abs() < 1e-12);
        assert!((s("sqrt2").conjugate_value([-1, 1]) + 2f64.sqrt()).abs() < 1e-12);
    }
}
