//! Scalars: IEEE doubles or exact elements of the real field ℚ(√2, √d).
//!
//! The weight constructions need values `ω(1 ∓ √((p-1)/p))` and their
//! inverses, so everything lives in ℚ(√d) with `d = p(p-1)`. Raw Haar
//! coefficients additionally pick up a factor `√|I| = 2^{-depth/2}`, which
//! for odd depths leaves ℚ(√d); adjoining √2 closes the arithmetic. An
//! exact scalar is stored as
//!
//! ```text
//!     a + b·√2 + c·√d + e·√(2d),        a, b, c, e, d ∈ ℚ, d ≥ 0,
//! ```
//!
//! with the convention `c = e = 0 ⇒ d = 0`. Addition, multiplication,
//! inversion and sign comparison are closed and exact; the sign of
//! `A + B√d` (A, B ∈ ℚ(√2)) is decided by rationalizing, recursively.
//!
//! Float-mode accumulations go through [`KahanSum`] (Neumaier variant) in a
//! deterministic order, so reductions are bit-reproducible.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::CoreError;

/// Arithmetic mode of a computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Mode {
    Exact,
    Float,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Exact => f.write_str("exact"),
            Mode::Float => f.write_str("float"),
        }
    }
}

/// Exact element of ℚ(√2, √d): `a + b√2 + c√d + e√(2d)`.
#[derive(Clone, PartialEq, Eq)]
pub struct Exact {
    pub a: BigRational,
    pub b: BigRational,
    pub c: BigRational,
    pub e: BigRational,
    /// The radicand d; zero when `c = e = 0`.
    pub rad: BigRational,
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Sign of `u + v√2`, exact.
fn sign_q2(u: &BigRational, v: &BigRational) -> i8 {
    let su = sign_rat(u);
    let sv = sign_rat(v);
    if sv == 0 {
        return su;
    }
    if su == 0 {
        return sv;
    }
    if su == sv {
        return su;
    }
    // opposite signs: compare u^2 with 2 v^2
    let diff = u * u - v * v * BigRational::from(BigInt::from(2));
    su * sign_rat(&diff)
}

fn sign_rat(x: &BigRational) -> i8 {
    if x.is_zero() {
        0
    } else if x.is_positive() {
        1
    } else {
        -1
    }
}

impl Exact {
    pub fn zero() -> Self {
        Exact::from_rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Exact::from_rational(BigRational::one())
    }

    pub fn from_rational(a: BigRational) -> Self {
        Exact {
            a,
            b: BigRational::zero(),
            c: BigRational::zero(),
            e: BigRational::zero(),
            rad: BigRational::zero(),
        }
    }

    pub fn from_int(n: i64) -> Self {
        Exact::from_rational(BigRational::from(BigInt::from(n)))
    }

    /// `c·√d` with the given radicand; `√2` is routed to its own slot.
    pub fn sqrt_term(c: BigRational, rad: BigRational) -> Self {
        assert!(!rad.is_negative(), "negative radicand");
        let two = BigRational::from(BigInt::from(2));
        let mut x = if rad == two {
            Exact {
                a: BigRational::zero(),
                b: c,
                c: BigRational::zero(),
                e: BigRational::zero(),
                rad: BigRational::zero(),
            }
        } else {
            Exact {
                a: BigRational::zero(),
                b: BigRational::zero(),
                c,
                e: BigRational::zero(),
                rad,
            }
        };
        x.normalize();
        x
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero() && self.c.is_zero() && self.e.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero() && self.c.is_zero() && self.e.is_zero()
    }

    /// The rational part if the value is purely rational.
    pub fn as_rational(&self) -> Option<&BigRational> {
        if self.is_rational() {
            Some(&self.a)
        } else {
            None
        }
    }

    fn normalize(&mut self) {
        if self.rad.is_zero() {
            // √0 = 0: radical coordinates are vacuous.
            self.c = BigRational::zero();
            self.e = BigRational::zero();
        } else if self.c.is_zero() && self.e.is_zero() {
            self.rad = BigRational::zero();
        }
    }

    /// Shared radicand for a binary operation; panics on a genuine mix of
    /// two different fields (an internal invariant, never data-dependent).
    fn join_rad(&self, other: &Exact) -> BigRational {
        if self.rad.is_zero() {
            other.rad.clone()
        } else if other.rad.is_zero() || self.rad == other.rad {
            self.rad.clone()
        } else {
            panic!(
                "mixed quadratic fields: sqrt({}) vs sqrt({})",
                self.rad, other.rad
            );
        }
    }

    pub fn add(&self, other: &Exact) -> Exact {
        let rad = self.join_rad(other);
        let mut x = Exact {
            a: &self.a + &other.a,
            b: &self.b + &other.b,
            c: &self.c + &other.c,
            e: &self.e + &other.e,
            rad,
        };
        x.normalize();
        x
    }

    pub fn neg(&self) -> Exact {
        Exact {
            a: -self.a.clone(),
            b: -self.b.clone(),
            c: -self.c.clone(),
            e: -self.e.clone(),
            rad: self.rad.clone(),
        }
    }

    pub fn sub(&self, other: &Exact) -> Exact {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Exact) -> Exact {
        let rad = self.join_rad(other);
        let d = &rad;
        let two = BigRational::from(BigInt::from(2));
        let (a1, b1, c1, e1) = (&self.a, &self.b, &self.c, &self.e);
        let (a2, b2, c2, e2) = (&other.a, &other.b, &other.c, &other.e);
        // basis products: √2·√d = √(2d), √2·√(2d) = 2√d, √d·√(2d) = d√2
        let a = a1 * a2 + &two * (b1 * b2) + d * (c1 * c2) + &two * d * (e1 * e2);
        let b = a1 * b2 + b1 * a2 + d * (c1 * e2 + e1 * c2);
        let c = a1 * c2 + c1 * a2 + &two * (b1 * e2 + e1 * b2);
        let e = a1 * e2 + e1 * a2 + b1 * c2 + c1 * b2;
        let mut x = Exact { a, b, c, e, rad };
        x.normalize();
        x
    }

    pub fn mul_rational(&self, r: &BigRational) -> Exact {
        let mut x = Exact {
            a: &self.a * r,
            b: &self.b * r,
            c: &self.c * r,
            e: &self.e * r,
            rad: self.rad.clone(),
        };
        x.normalize();
        x
    }

    /// Exact inverse; errors on zero (and on the degenerate case of a
    /// perfect-square radicand making the norm vanish).
    pub fn inverse(&self) -> Result<Exact, CoreError> {
        if self.is_zero() {
            return Err(CoreError::NonInvertible);
        }
        // x = A + B√d over ℚ(√2); 1/x = (A − B√d) / (A² − dB²).
        let conj = Exact {
            a: self.a.clone(),
            b: self.b.clone(),
            c: -self.c.clone(),
            e: -self.e.clone(),
            rad: self.rad.clone(),
        };
        let n = self.mul(&conj); // lies in ℚ(√2): n = u + v√2
        debug_assert!(n.c.is_zero() && n.e.is_zero());
        let (u, v) = (&n.a, &n.b);
        let two = BigRational::from(BigInt::from(2));
        let denom = u * u - &two * (v * v); // rational norm of u + v√2
        if denom.is_zero() {
            return Err(CoreError::NonInvertible);
        }
        // 1/(u + v√2) = (u − v√2)/denom
        let inv_n = Exact {
            a: u / &denom,
            b: -(v / &denom),
            c: BigRational::zero(),
            e: BigRational::zero(),
            rad: BigRational::zero(),
        };
        Ok(conj.mul(&inv_n))
    }

    /// Sign in the real embedding with √2, √d > 0; exact.
    pub fn sign(&self) -> i8 {
        // self = A + B√d with A = a + b√2, B = c + e√2.
        let s_a = sign_q2(&self.a, &self.b);
        let s_b = sign_q2(&self.c, &self.e);
        if s_b == 0 {
            return s_a;
        }
        if s_a == 0 {
            return s_b;
        }
        if s_a == s_b {
            return s_a;
        }
        // opposite: compare A² with dB² inside ℚ(√2)
        let two = BigRational::from(BigInt::from(2));
        let a2_u = &self.a * &self.a + &two * (&self.b * &self.b);
        let a2_v = rat(2, 1) * (&self.a * &self.b);
        let b2_u = &self.rad * (&self.c * &self.c + &two * (&self.e * &self.e));
        let b2_v = &self.rad * (rat(2, 1) * (&self.c * &self.e));
        s_a * sign_q2(&(a2_u - b2_u), &(a2_v - b2_v))
    }

    pub fn to_f64(&self) -> f64 {
        let d = self.rad.to_f64().unwrap_or(f64::NAN);
        let sd = d.sqrt();
        self.a.to_f64().unwrap_or(f64::NAN)
            + self.b.to_f64().unwrap_or(f64::NAN) * std::f64::consts::SQRT_2
            + self.c.to_f64().unwrap_or(f64::NAN) * sd
            + self.e.to_f64().unwrap_or(f64::NAN) * std::f64::consts::SQRT_2 * sd
    }
}

impl fmt::Debug for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_exact(self))
    }
}

/// Render as `a/b`, optionally followed by signed `±c/d*sqrt(n/m)` terms.
pub fn format_exact(x: &Exact) -> String {
    let mut out = String::new();
    let mut first = true;
    let two = BigRational::from(BigInt::from(2));
    let mut push = |coef: &BigRational, radicand: Option<BigRational>| {
        if coef.is_zero() {
            return;
        }
        let mag = coef.abs();
        if first {
            if coef.is_negative() {
                out.push('-');
            }
            first = false;
        } else {
            out.push(if coef.is_negative() { '-' } else { '+' });
        }
        match radicand {
            None => out.push_str(&mag.to_string()),
            Some(r) => {
                out.push_str(&mag.to_string());
                out.push_str("*sqrt(");
                out.push_str(&r.to_string());
                out.push(')');
            }
        }
    };
    push(&x.a, None);
    push(&x.b, Some(two.clone()));
    push(&x.c, Some(x.rad.clone()));
    push(&x.e, Some(&two * &x.rad));
    if out.is_empty() {
        out.push('0');
    }
    out
}

/// Parse the output of [`format_exact`].
pub fn parse_exact(s: &str) -> Result<Exact, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty exact value".into());
    }
    // split into signed terms at top level ('+'/'-' not inside parens)
    let mut terms: Vec<(i8, String)> = Vec::new();
    let mut cur = String::new();
    let mut sign: i8 = 1;
    let mut depth = 0usize;
    let mut chars = s.chars().peekable();
    // leading sign
    if let Some(&c) = chars.peek() {
        if c == '-' {
            sign = -1;
            chars.next();
        } else if c == '+' {
            chars.next();
        }
    }
    for c in chars {
        match c {
            '(' => {
                depth += 1;
                cur.push(c);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                cur.push(c);
            }
            '+' | '-' if depth == 0 => {
                terms.push((sign, std::mem::take(&mut cur)));
                sign = if c == '-' { -1 } else { 1 };
            }
            _ => cur.push(c),
        }
    }
    terms.push((sign, cur));

    let parse_rat = |t: &str| -> Result<BigRational, String> {
        t.trim()
            .parse::<BigRational>()
            .map_err(|e| format!("bad rational {t:?}: {e}"))
    };

    let mut x = Exact::zero();
    let two = BigRational::from(BigInt::from(2));
    for (sg, term) in terms {
        let term = term.trim();
        if term.is_empty() {
            return Err(format!("dangling sign in {s:?}"));
        }
        let signed = |r: BigRational| if sg < 0 { -r } else { r };
        if let Some(idx) = term.find("*sqrt(") {
            let coef = parse_rat(&term[..idx])?;
            let inner = &term[idx + 6..];
            let inner = inner
                .strip_suffix(')')
                .ok_or_else(|| format!("unterminated sqrt in {term:?}"))?;
            let radicand = parse_rat(inner)?;
            if radicand == two {
                x.b += signed(coef);
            } else if !x.rad.is_zero() && radicand == &two * &x.rad {
                x.e += signed(coef);
            } else if x.rad.is_zero() || radicand == x.rad {
                // first radical seen, or a repeat of it
                if x.rad.is_zero() {
                    // could be d or 2d; without context treat it as d
                    x.rad = radicand;
                    x.c += signed(coef);
                } else {
                    x.c += signed(coef);
                }
            } else if x.rad == &radicand / &two {
                x.e += signed(coef);
            } else if &x.rad / &two == radicand {
                // we previously guessed 2d as d; re-seat coordinates
                let old_c = std::mem::replace(&mut x.c, BigRational::zero());
                x.e += old_c;
                x.rad = radicand;
                x.c += signed(coef);
            } else {
                return Err(format!("incompatible radicand {radicand} in {s:?}"));
            }
        } else {
            x.a += signed(parse_rat(term)?);
        }
    }
    x.normalize();
    Ok(x)
}

/// A number in one of the two arithmetic modes.
#[derive(Clone, PartialEq)]
pub enum Scalar {
    Exact(Exact),
    Float(f64),
}

impl Scalar {
    pub fn zero(mode: Mode) -> Self {
        match mode {
            Mode::Exact => Scalar::Exact(Exact::zero()),
            Mode::Float => Scalar::Float(0.0),
        }
    }

    pub fn one(mode: Mode) -> Self {
        match mode {
            Mode::Exact => Scalar::Exact(Exact::one()),
            Mode::Float => Scalar::Float(1.0),
        }
    }

    pub fn from_rational(r: &BigRational, mode: Mode) -> Self {
        match mode {
            Mode::Exact => Scalar::Exact(Exact::from_rational(r.clone())),
            Mode::Float => Scalar::Float(r.to_f64().unwrap_or(f64::NAN)),
        }
    }

    pub fn from_int(n: i64, mode: Mode) -> Self {
        Self::from_rational(&BigRational::from(BigInt::from(n)), mode)
    }

    pub fn mode(&self) -> Mode {
        match self {
            Scalar::Exact(_) => Mode::Exact,
            Scalar::Float(_) => Mode::Float,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(x) => x.is_zero(),
            Scalar::Float(v) => *v == 0.0,
        }
    }

    pub fn sign(&self) -> i8 {
        match self {
            Scalar::Exact(x) => x.sign(),
            Scalar::Float(v) => {
                if *v > 0.0 {
                    1
                } else if *v < 0.0 {
                    -1
                } else {
                    0
                }
            }
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(x) => x.to_f64(),
            Scalar::Float(v) => *v,
        }
    }

    pub fn inverse(&self) -> Result<Scalar, CoreError> {
        match self {
            Scalar::Exact(x) => Ok(Scalar::Exact(x.inverse()?)),
            Scalar::Float(v) => {
                if *v == 0.0 {
                    Err(CoreError::NonInvertible)
                } else {
                    Ok(Scalar::Float(1.0 / v))
                }
            }
        }
    }

    pub fn abs(&self) -> Scalar {
        if self.sign() < 0 {
            -self.clone()
        } else {
            self.clone()
        }
    }

    pub fn scale_rational(&self, r: &BigRational) -> Scalar {
        match self {
            Scalar::Exact(x) => Scalar::Exact(x.mul_rational(r)),
            Scalar::Float(v) => Scalar::Float(v * r.to_f64().unwrap_or(f64::NAN)),
        }
    }

    fn pair<'a>(&'a self, other: &'a Scalar) -> (&'a Scalar, &'a Scalar) {
        assert_eq!(
            self.mode(),
            other.mode(),
            "mixed exact/float scalars in one operation"
        );
        (self, other)
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(x) => write!(f, "{x:?}"),
            Scalar::Float(v) => write!(f, "{v}"),
        }
    }
}

impl Add for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        match self.pair(rhs) {
            (Scalar::Exact(x), Scalar::Exact(y)) => Scalar::Exact(x.add(y)),
            (Scalar::Float(x), Scalar::Float(y)) => Scalar::Float(x + y),
            _ => unreachable!(),
        }
    }
}

impl Sub for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        match self.pair(rhs) {
            (Scalar::Exact(x), Scalar::Exact(y)) => Scalar::Exact(x.sub(y)),
            (Scalar::Float(x), Scalar::Float(y)) => Scalar::Float(x - y),
            _ => unreachable!(),
        }
    }
}

impl Mul for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        match self.pair(rhs) {
            (Scalar::Exact(x), Scalar::Exact(y)) => Scalar::Exact(x.mul(y)),
            (Scalar::Float(x), Scalar::Float(y)) => Scalar::Float(x * y),
            _ => unreachable!(),
        }
    }
}

impl Div for &Scalar {
    type Output = Scalar;
    fn div(self, rhs: &Scalar) -> Scalar {
        match self.pair(rhs) {
            (Scalar::Exact(x), Scalar::Exact(y)) => {
                Scalar::Exact(x.mul(&y.inverse().expect("division by zero")))
            }
            (Scalar::Float(x), Scalar::Float(y)) => Scalar::Float(x / y),
            _ => unreachable!(),
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Exact(x) => Scalar::Exact(x.neg()),
            Scalar::Float(v) => Scalar::Float(-v),
        }
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Scalar) -> Option<Ordering> {
        match (self - other).sign() {
            1 => Some(Ordering::Greater),
            -1 => Some(Ordering::Less),
            _ => Some(Ordering::Equal),
        }
    }
}

/// Neumaier-compensated f64 accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        KahanSum::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Mode-polymorphic accumulator; exact sums stay exact, float sums are
/// compensated. Addition order must be deterministic for reproducibility.
pub enum Accumulator {
    Exact(Exact),
    Float(KahanSum),
}

impl Accumulator {
    pub fn new(mode: Mode) -> Self {
        match mode {
            Mode::Exact => Accumulator::Exact(Exact::zero()),
            Mode::Float => Accumulator::Float(KahanSum::new()),
        }
    }

    pub fn add(&mut self, x: &Scalar) {
        match (self, x) {
            (Accumulator::Exact(acc), Scalar::Exact(v)) => *acc = acc.add(v),
            (Accumulator::Float(acc), Scalar::Float(v)) => acc.add(*v),
            _ => panic!("accumulator/scalar mode mismatch"),
        }
    }

    pub fn finish(self) -> Scalar {
        match self {
            Accumulator::Exact(acc) => Scalar::Exact(acc),
            Accumulator::Float(acc) => Scalar::Float(acc.value()),
        }
    }
}

/// Serialize a scalar in the line format: exact values as signed rational
/// terms, floats as shortest round-trip decimals.
pub fn format_scalar(x: &Scalar) -> String {
    match x {
        Scalar::Exact(v) => format_exact(v),
        Scalar::Float(v) => format!("{v}"),
    }
}

pub fn parse_scalar(s: &str, mode: Mode) -> Result<Scalar, String> {
    match mode {
        Mode::Exact => parse_exact(s).map(Scalar::Exact),
        Mode::Float => s
            .trim()
            .parse::<f64>()
            .map(Scalar::Float)
            .map_err(|e| format!("bad float {s:?}: {e}")),
    }
}
