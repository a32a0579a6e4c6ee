//! Two-precision arithmetic facade.
//!
//! Every formula downstream is written once against the [`Arith`] trait and
//! evaluated either in native binary64 ([`Working`]) or in decimal-digit
//! configurable extended precision ([`Extended`], MPFR-backed). Complex
//! arithmetic is spelled out explicitly in [`Complex`] on top of two reals so
//! both precisions share the same principal-branch conventions.
//!
//! Binary64 inputs are lifted bit-exactly into extended precision, so the
//! working and extended pipelines always consume identical numbers.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of significant decimal digits of the extended mode.
pub const DEFAULT_DIGITS: u32 = 32;
/// Smallest admissible extended digit count (keeps binary64 lifts exact).
pub const MIN_DIGITS: u32 = 20;
/// Largest admissible extended digit count.
pub const MAX_DIGITS: u32 = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrecisionError {
    #[error("cannot lift non-finite value {0}")]
    NonFinite(f64),
    #[error("extended precision must use {MIN_DIGITS}..={MAX_DIGITS} digits, got {0}")]
    DigitsOutOfRange(u32),
    #[error("logarithm of zero")]
    LogOfZero,
}

/// Arithmetic precision used for one evaluation context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrecisionMode {
    Working,
    Extended(u32),
}

impl Default for PrecisionMode {
    fn default() -> Self {
        PrecisionMode::Working
    }
}

impl PrecisionMode {
    /// Extended mode with a validated digit count.
    pub fn extended(digits: u32) -> Result<Self, PrecisionError> {
        if !(MIN_DIGITS..=MAX_DIGITS).contains(&digits) {
            return Err(PrecisionError::DigitsOutOfRange(digits));
        }
        Ok(PrecisionMode::Extended(digits))
    }

    pub fn validate(self) -> Result<Self, PrecisionError> {
        match self {
            PrecisionMode::Working => Ok(self),
            PrecisionMode::Extended(d) => PrecisionMode::extended(d),
        }
    }

    /// Mantissa bits carried by this mode.
    pub fn bits(self) -> u32 {
        match self {
            PrecisionMode::Working => f64::MANTISSA_DIGITS,
            PrecisionMode::Extended(d) => digits_to_bits(d),
        }
    }
}

/// Binary precision needed to carry `digits` significant decimal digits.
pub fn digits_to_bits(digits: u32) -> u32 {
    (f64::from(digits) * std::f64::consts::LOG2_10).ceil() as u32
}

/// Real scalar usable by the precision-generic formulas.
pub trait Real:
    Clone
    + PartialOrd
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A binary64 value carried at the same precision as `self`.
    fn like(&self, x: f64) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn sin_cos(&self) -> (Self, Self);
    /// Four-quadrant arctangent of `self / x`.
    fn atan2(&self, x: &Self) -> Self;
    fn hypot(&self, other: &Self) -> Self;
    fn powr(&self, exponent: &Self) -> Self;
    fn abs(&self) -> Self;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;
    fn is_finite(&self) -> bool;
    fn is_sign_negative(&self) -> bool;
    fn pi_like(&self) -> Self;
}

impl Real for f64 {
    fn like(&self, x: f64) -> Self {
        x
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn sin_cos(&self) -> (Self, Self) {
        f64::sin_cos(*self)
    }
    fn atan2(&self, x: &Self) -> Self {
        f64::atan2(*self, *x)
    }
    fn hypot(&self, other: &Self) -> Self {
        f64::hypot(*self, *other)
    }
    fn powr(&self, exponent: &Self) -> Self {
        f64::powf(*self, *exponent)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn is_sign_negative(&self) -> bool {
        f64::is_sign_negative(*self)
    }
    fn pi_like(&self) -> Self {
        std::f64::consts::PI
    }
}

/// Arbitrary-precision real, a thin wrapper over an MPFR float.
#[derive(Clone, PartialEq, PartialOrd)]
pub struct ExReal(Float);

impl ExReal {
    /// Exact lift of a binary64 value at `bits` of precision.
    pub fn from_f64_bits(x: f64, bits: u32) -> Result<Self, PrecisionError> {
        if !x.is_finite() {
            return Err(PrecisionError::NonFinite(x));
        }
        Ok(ExReal(Float::with_val(bits.max(f64::MANTISSA_DIGITS), x)))
    }

    /// Parse a decimal literal at `bits` of precision (used by oracles and tests).
    pub fn parse(text: &str, bits: u32) -> Option<Self> {
        Float::parse(text).ok().map(|p| ExReal(Float::with_val(bits, p)))
    }

    pub fn prec(&self) -> u32 {
        self.0.prec()
    }

    pub fn as_float(&self) -> &Float {
        &self.0
    }

    pub fn into_float(self) -> Float {
        self.0
    }

    pub fn from_float(f: Float) -> Self {
        ExReal(f)
    }

    /// Decimal rendering with `digits` significant digits.
    pub fn to_string_digits(&self, digits: usize) -> String {
        self.0.to_string_radix(10, Some(digits))
    }
}

impl fmt::Debug for ExReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExReal({})", self.0)
    }
}

impl fmt::Display for ExReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

macro_rules! exreal_binop {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for ExReal {
            type Output = ExReal;
            fn $m(self, rhs: ExReal) -> ExReal {
                ExReal(self.0 $op rhs.0)
            }
        }
    };
}
exreal_binop!(Add, add, +);
exreal_binop!(Sub, sub, -);
exreal_binop!(Mul, mul, *);
exreal_binop!(Div, div, /);

impl Neg for ExReal {
    type Output = ExReal;
    fn neg(self) -> ExReal {
        ExReal(-self.0)
    }
}

impl Real for ExReal {
    fn like(&self, x: f64) -> Self {
        ExReal(Float::with_val(self.0.prec(), x))
    }
    fn exp(&self) -> Self {
        ExReal(self.0.clone().exp())
    }
    fn ln(&self) -> Self {
        ExReal(self.0.clone().ln())
    }
    fn sqrt(&self) -> Self {
        ExReal(self.0.clone().sqrt())
    }
    fn sin_cos(&self) -> (Self, Self) {
        let (s, c) = self.0.clone().sin_cos(Float::new(self.0.prec()));
        (ExReal(s), ExReal(c))
    }
    fn atan2(&self, x: &Self) -> Self {
        ExReal(self.0.clone().atan2(&x.0))
    }
    fn hypot(&self, other: &Self) -> Self {
        ExReal(self.0.clone().hypot(&other.0))
    }
    fn powr(&self, exponent: &Self) -> Self {
        ExReal(self.0.clone().pow(&exponent.0))
    }
    fn abs(&self) -> Self {
        ExReal(self.0.clone().abs())
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
    fn is_finite(&self) -> bool {
        self.0.is_finite()
    }
    fn is_sign_negative(&self) -> bool {
        self.0.is_sign_negative()
    }
    fn pi_like(&self) -> Self {
        ExReal(Float::with_val(self.0.prec(), Constant::Pi))
    }
}

/// Evaluation context: fixes the precision of every value it produces.
pub trait Arith: Copy + Send + Sync {
    type R: Real;
    fn lift(&self, x: f64) -> Self::R;
    fn mode(&self) -> PrecisionMode;

    fn lift_complex(&self, z: Complex<f64>) -> Complex<Self::R> {
        Complex::new(self.lift(z.re), self.lift(z.im))
    }
}

/// Native binary64 context.
#[derive(Debug, Clone, Copy, Default)]
pub struct Working;

impl Arith for Working {
    type R = f64;
    fn lift(&self, x: f64) -> f64 {
        x
    }
    fn mode(&self) -> PrecisionMode {
        PrecisionMode::Working
    }
}

/// Extended-precision context with a fixed digit count.
#[derive(Debug, Clone, Copy)]
pub struct Extended {
    digits: u32,
    bits: u32,
}

impl Extended {
    pub fn new(digits: u32) -> Result<Self, PrecisionError> {
        PrecisionMode::extended(digits)?;
        Ok(Extended {
            digits,
            bits: digits_to_bits(digits),
        })
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }
}

impl Default for Extended {
    fn default() -> Self {
        Extended::new(DEFAULT_DIGITS).expect("default digits are in range")
    }
}

impl Arith for Extended {
    type R = ExReal;
    fn lift(&self, x: f64) -> ExReal {
        // Callers only lift finite model inputs; non-finite values propagate as MPFR NaN/Inf.
        ExReal(Float::with_val(self.bits, x))
    }
    fn mode(&self) -> PrecisionMode {
        PrecisionMode::Extended(self.digits)
    }
}

/// Complex number over any [`Real`].
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Complex<R> {
    pub re: R,
    pub im: R,
}

pub type ExComplex = Complex<ExReal>;

impl<R> Complex<R> {
    pub const fn new(re: R, im: R) -> Self {
        Complex { re, im }
    }
}

impl Copy for Complex<f64> {}

impl Complex<f64> {
    pub fn norm(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

impl<R: Real> Complex<R> {
    pub fn from_real(re: R) -> Self {
        let im = re.like(0.0);
        Complex { re, im }
    }

    pub fn i_like(x: &R) -> Self {
        Complex::new(x.like(0.0), x.like(1.0))
    }

    pub fn scale(&self, s: &R) -> Self {
        Complex::new(self.re.clone() * s.clone(), self.im.clone() * s.clone())
    }

    /// Multiplication by the imaginary unit.
    pub fn mul_i(&self) -> Self {
        Complex::new(-self.im.clone(), self.re.clone())
    }

    pub fn abs(&self) -> R {
        self.re.hypot(&self.im)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn lower(&self) -> Complex<f64> {
        Complex::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn exp(&self) -> Self {
        let m = self.re.exp();
        if self.im.is_zero() {
            return Complex::new(m, self.im.clone());
        }
        let (s, c) = self.im.sin_cos();
        Complex::new(m.clone() * c, m * s)
    }

    /// Principal logarithm, `Im ∈ (−π, π]`; the caller guarantees `self ≠ 0`.
    pub fn ln(&self) -> Self {
        let im = if self.im.is_zero() {
            // -0 imaginary part maps onto the +π side of the cut
            self.im.like(0.0)
        } else {
            self.im.clone()
        };
        Complex::new(self.abs().ln(), im.atan2(&self.re))
    }

    /// Principal square root, `Re ≥ 0`.
    pub fn sqrt(&self) -> Self {
        let zero = self.re.like(0.0);
        if self.is_zero() {
            return Complex::new(zero.clone(), zero);
        }
        let two = self.re.like(2.0);
        let t = ((self.re.abs() + self.abs()) / two.clone()).sqrt();
        if !self.re.is_sign_negative() {
            let im = self.im.clone() / (two * t.clone());
            Complex::new(t, im)
        } else {
            let re = self.im.abs() / (two * t.clone());
            let im = if self.im.is_sign_negative() { -t } else { t };
            Complex::new(re, im)
        }
    }

    pub fn square(&self) -> Self {
        self.clone() * self.clone()
    }
}

impl<R: Real> Add for Complex<R> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Complex::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl<R: Real> Sub for Complex<R> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Complex::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl<R: Real> Neg for Complex<R> {
    type Output = Self;
    fn neg(self) -> Self {
        Complex::new(-self.re, -self.im)
    }
}

impl<R: Real> Mul for Complex<R> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let re = self.re.clone() * rhs.re.clone() - self.im.clone() * rhs.im.clone();
        let im = self.re * rhs.im + self.im * rhs.re;
        Complex::new(re, im)
    }
}

impl<R: Real> Div for Complex<R> {
    type Output = Self;
    /// Smith's algorithm.
    fn div(self, rhs: Self) -> Self {
        let (a, b, c, d) = (self.re, self.im, rhs.re, rhs.im);
        if d.is_zero() {
            return Complex::new(a / c.clone(), b / c);
        }
        if c.abs().partial_cmp(&d.abs()) != Some(Ordering::Less) {
            let r = d.clone() / c.clone();
            let den = c + d * r.clone();
            let re = (a.clone() + b.clone() * r.clone()) / den.clone();
            let im = (b - a * r) / den;
            Complex::new(re, im)
        } else {
            let r = c.clone() / d.clone();
            let den = c * r.clone() + d;
            let re = (a.clone() * r.clone() + b.clone()) / den.clone();
            let im = (b * r - a) / den;
            Complex::new(re, im)
        }
    }
}

/// Lift `x` bit-exactly into an [`ExReal`] at the precision of `mode`.
///
/// In `Working` mode the value is carried at 53 bits.
pub fn lift(x: f64, mode: PrecisionMode) -> Result<ExReal, PrecisionError> {
    let mode = mode.validate()?;
    ExReal::from_f64_bits(x, mode.bits())
}

/// Lower an extended value to the nearest binary64.
pub fn lower(x: &ExReal) -> f64 {
    x.to_f64()
}

fn chain_in<A: Arith>(ctx: A, x: f64) -> A::R {
    let big = ctx.lift(1e9);
    (ctx.lift(x) + big.clone()) - big
}

/// `(x + 1e9) − 1e9` evaluated at `mode`; the result is carried at the mode's precision.
pub fn eval_chain(x: f64, mode: PrecisionMode) -> Result<ExReal, PrecisionError> {
    if !x.is_finite() {
        return Err(PrecisionError::NonFinite(x));
    }
    match mode.validate()? {
        PrecisionMode::Working => lift(chain_in(Working, x), PrecisionMode::Working),
        PrecisionMode::Extended(d) => Ok(chain_in(Extended::new(d)?, x)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementaryOp {
    Exp,
    Log,
    Sqrt,
}

/// Complex `exp`, principal `log` or principal `sqrt` of `z`, re-rounded to `mode`.
pub fn complex_elementary(
    op: ElementaryOp,
    z: &ExComplex,
    mode: PrecisionMode,
) -> Result<ExComplex, PrecisionError> {
    let bits = mode.validate()?.bits();
    let z = Complex::new(
        ExReal(Float::with_val(bits, z.re.as_float())),
        ExReal(Float::with_val(bits, z.im.as_float())),
    );
    match op {
        ElementaryOp::Exp => Ok(z.exp()),
        ElementaryOp::Log => {
            if z.is_zero() {
                Err(PrecisionError::LogOfZero)
            } else {
                Ok(z.ln())
            }
        }
        ElementaryOp::Sqrt => Ok(z.sqrt()),
    }
}
