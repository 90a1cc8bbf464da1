//! Extended-precision real arithmetic.
//!
//! Every value is an MPFR float whose significand width is fixed when it is
//! created. A [`PrecisionContext`] travels explicitly through each call and
//! decides the width of every result; nothing here reads global state.

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};

/// Arbitrary-precision binary floating-point real.
pub type ExtReal = Float;

pub const DEFAULT_WORK_BITS: u32 = 256;
pub const DEFAULT_MAX_SERIES_TERMS: usize = 10_000;
pub const MIN_WORK_BITS: u32 = 64;

/// Runtime arithmetic configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionContext {
    work_bits: u32,
    target_rel_tol: ExtReal,
    max_series_terms: usize,
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self::new(DEFAULT_WORK_BITS).expect("default precision is valid")
    }
}

impl PrecisionContext {
    /// Context at `work_bits` with a tolerance scaled from 1e-30 at 256 bits.
    pub fn new(work_bits: u32) -> Result<Self> {
        if work_bits < MIN_WORK_BITS {
            return Err(Error::InvalidArgument(format!(
                "work_bits must be >= {MIN_WORK_BITS}, got {work_bits}"
            )));
        }
        let digits = 30.0 * f64::from(work_bits) / f64::from(DEFAULT_WORK_BITS);
        let tol = Float::with_val(work_bits, 10).pow(-digits.round() as i32);
        Ok(Self {
            work_bits,
            target_rel_tol: tol,
            max_series_terms: DEFAULT_MAX_SERIES_TERMS,
        })
    }

    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(Error::InvalidArgument(format!("target_rel_tol must be > 0, got {tol}")));
        }
        self.target_rel_tol = Float::with_val(self.work_bits, tol);
        Ok(self)
    }

    pub fn with_tol_ext(mut self, tol: &ExtReal) -> Result<Self> {
        if !(tol.is_finite() && *tol > 0) {
            return Err(Error::InvalidArgument("target_rel_tol must be > 0".into()));
        }
        self.target_rel_tol = Float::with_val(self.work_bits, tol);
        Ok(self)
    }

    pub fn with_max_series_terms(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("max_series_terms must be >= 1".into()));
        }
        self.max_series_terms = n;
        Ok(self)
    }

    /// Same tolerance and term budget at a different width.
    pub fn with_bits(&self, work_bits: u32) -> Self {
        let bits = work_bits.max(MIN_WORK_BITS);
        Self {
            work_bits: bits,
            target_rel_tol: Float::with_val(bits, &self.target_rel_tol),
            max_series_terms: self.max_series_terms,
        }
    }

    pub fn work_bits(&self) -> u32 {
        self.work_bits
    }

    pub fn target_rel_tol(&self) -> &ExtReal {
        &self.target_rel_tol
    }

    pub fn max_series_terms(&self) -> usize {
        self.max_series_terms
    }

    /// Number of correct bits the tolerance asks for.
    pub fn tol_bits(&self) -> u32 {
        let lg = self.target_rel_tol.clone().log2().to_f64();
        (-lg).ceil().max(1.0) as u32
    }

    pub fn zero(&self) -> ExtReal {
        Float::new(self.work_bits)
    }

    pub fn one(&self) -> ExtReal {
        Float::with_val(self.work_bits, 1)
    }

    pub fn int(&self, n: i64) -> ExtReal {
        Float::with_val(self.work_bits, n)
    }

    pub fn real(&self, x: f64) -> ExtReal {
        Float::with_val(self.work_bits, x)
    }

    /// `num / den` rounded once.
    pub fn ratio(&self, num: i64, den: i64) -> ExtReal {
        Float::with_val(self.work_bits, num) / den
    }

    pub fn pi(&self) -> ExtReal {
        Float::with_val(self.work_bits, Constant::Pi)
    }

    /// Copy of `x` rounded to this context's width.
    pub fn round(&self, x: &ExtReal) -> ExtReal {
        Float::with_val(self.work_bits, x)
    }

    /// Parse a decimal or scientific literal at full working precision.
    pub fn parse(&self, s: &str) -> Result<ExtReal> {
        let t = s.trim();
        let parsed = Float::parse(t)
            .map_err(|e| Error::InvalidArgument(format!("cannot parse real {t:?}: {e}")))?;
        Ok(Float::with_val(self.work_bits, parsed))
    }
}

/// Elementary scalar functions.
#[derive(Debug, Clone, PartialEq)]
pub enum Elementary {
    Exp,
    Ln,
    Sqrt,
    Sinh,
    Cosh,
    /// `x^e`; non-integer exponents need `x >= 0`.
    Pow(ExtReal),
}

pub fn elementary(ctx: &PrecisionContext, f: &Elementary, x: &ExtReal) -> Result<ExtReal> {
    let v = ctx.round(x);
    if v.is_nan() {
        return Ok(v);
    }
    match f {
        Elementary::Exp => Ok(v.exp()),
        Elementary::Ln => {
            if v < 0 {
                return Err(Error::Domain(format!("ln of negative value {}", v.to_f64())));
            }
            Ok(v.ln())
        }
        Elementary::Sqrt => {
            if v < 0 {
                return Err(Error::Domain(format!("sqrt of negative value {}", v.to_f64())));
            }
            Ok(v.sqrt())
        }
        Elementary::Sinh => Ok(v.sinh()),
        Elementary::Cosh => Ok(v.cosh()),
        Elementary::Pow(e) => {
            if v < 0 && !e.is_integer() {
                return Err(Error::Domain("non-integer power of a negative value".into()));
            }
            Ok(v.pow(e))
        }
    }
}

pub fn is_nonpositive_integer(x: &ExtReal) -> bool {
    x.is_integer() && *x <= 0
}

/// Γ(x). Poles at the nonpositive integers are reported, not returned as inf.
pub fn gamma_fn(ctx: &PrecisionContext, x: &ExtReal) -> Result<ExtReal> {
    if is_nonpositive_integer(x) {
        return Err(Error::Pole(format!("gamma at nonpositive integer {}", x.to_f64())));
    }
    Ok(ctx.round(x).gamma())
}

/// 1/Γ(x), zero at the poles of Γ.
pub fn recip_gamma(ctx: &PrecisionContext, x: &ExtReal) -> ExtReal {
    if is_nonpositive_integer(x) {
        return ctx.zero();
    }
    ctx.round(x).gamma().recip()
}

pub fn erfc_fn(ctx: &PrecisionContext, x: &ExtReal) -> ExtReal {
    ctx.round(x).erfc()
}

/// e^{x²}·erfc(x).
///
/// MPFR's exponent range is wide enough that erfc(x) never underflows for any
/// argument reachable here, so the product is formed directly with guard bits.
pub fn erfcx_fn(ctx: &PrecisionContext, x: &ExtReal) -> ExtReal {
    let bits = ctx.work_bits() + 32;
    let xg = Float::with_val(bits, x);
    let sq = Float::with_val(bits, xg.square_ref());
    let r = sq.exp() * xg.erfc();
    ctx.round(&r)
}

/// log2 |x|, or -inf for zero.
pub(crate) fn log2_abs(x: &ExtReal) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    x.clone().abs().log2().to_f64()
}

/// Runs `eval` at `work_bits + guard` and re-runs it with more guard bits
/// while the measured cancellation (`log2 max|intermediate| - log2 |result|`)
/// eats into the guard. `eval` returns the value and log2 of its largest
/// intermediate magnitude.
pub(crate) fn with_guard_bits<F>(ctx: &PrecisionContext, initial_guard: u32, mut eval: F) -> Result<ExtReal>
where
    F: FnMut(u32) -> Result<(ExtReal, f64)>,
{
    let mut guard = initial_guard.max(16);
    for _ in 0..8 {
        let (v, lmax) = eval(ctx.work_bits() + guard)?;
        let lost = lmax - log2_abs(&v);
        if v.is_zero() || !v.is_finite() || lost <= f64::from(guard) - 12.0 {
            return Ok(ctx.round(&v));
        }
        guard = (lost.ceil() as u32).saturating_add(32);
    }
    Err(Error::Domain("cancellation exceeds any affordable guard width".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    #[test]
    fn context_defaults_and_guards() {
        let c = ctx();
        assert_eq!(c.work_bits(), 256);
        assert_eq!(c.max_series_terms(), 10_000);
        let t = c.target_rel_tol().to_f64();
        assert!((t / 1e-30 - 1.0).abs() < 1e-12);
        assert!(PrecisionContext::new(32).is_err());
        assert!(c.clone().with_tol(0.0).is_err());
        assert!(c.clone().with_max_series_terms(0).is_err());
        assert_eq!(c.tol_bits(), 100);
    }

    #[test]
    fn elementary_identities() {
        let c = ctx();
        assert_eq!(elementary(&c, &Elementary::Exp, &c.zero()).unwrap(), 1);
        assert_eq!(elementary(&c, &Elementary::Sqrt, &c.int(4)).unwrap(), 2);
        let one = c.one();
        let e = elementary(&c, &Elementary::Exp, &one).unwrap();
        let by_def = (e.clone() - e.recip()) / 2u32;
        let sinh = elementary(&c, &Elementary::Sinh, &one).unwrap();
        let rel = Float::with_val(256, (sinh - &by_def) / &by_def).abs();
        assert!(rel < Float::with_val(256, 2).pow(-240));
        let p = elementary(&c, &Elementary::Pow(c.ratio(1, 2)), &c.int(9)).unwrap();
        assert_eq!(p, 3);
    }

    #[test]
    fn elementary_domain_errors() {
        let c = ctx();
        let neg = c.int(-2);
        assert!(matches!(elementary(&c, &Elementary::Ln, &neg), Err(Error::Domain(_))));
        assert!(matches!(elementary(&c, &Elementary::Sqrt, &neg), Err(Error::Domain(_))));
        assert!(elementary(&c, &Elementary::Pow(c.ratio(1, 3)), &neg).is_err());
        let nan = Float::with_val(256, rug::float::Special::Nan);
        assert!(elementary(&c, &Elementary::Exp, &nan).unwrap().is_nan());
    }

    #[test]
    fn gamma_values() {
        let c = ctx();
        assert_eq!(gamma_fn(&c, &c.int(6)).unwrap(), 120);
        let half = gamma_fn(&c, &c.ratio(1, 2)).unwrap();
        let sqrt_pi = c.pi().sqrt();
        assert!(Float::with_val(256, &half - &sqrt_pi).abs() < 1e-75);
        assert!(matches!(gamma_fn(&c, &c.int(-3)), Err(Error::Pole(_))));
        assert!(matches!(gamma_fn(&c, &c.zero()), Err(Error::Pole(_))));
        assert_eq!(recip_gamma(&c, &c.int(-2)), 0);
    }

    #[test]
    fn gamma_duplication() {
        let c = ctx();
        let x = c.parse("3.7").unwrap();
        let lhs = gamma_fn(&c, &Float::with_val(256, &x + 0.5)).unwrap() * gamma_fn(&c, &x).unwrap();
        let two_x = Float::with_val(256, &x * 2u32);
        let rhs = Float::with_val(256, 2).pow(Float::with_val(256, 1 - two_x.clone()))
            * c.pi().sqrt()
            * gamma_fn(&c, &two_x).unwrap();
        let rel = Float::with_val(256, (lhs - &rhs) / &rhs).abs();
        assert!(rel < 1e-70, "{rel}");
    }

    #[test]
    fn erfc_basics() {
        let c = ctx();
        assert_eq!(erfc_fn(&c, &c.zero()), 1);
        let x = c.parse("1.3").unwrap();
        let s = erfc_fn(&c, &x) + erfc_fn(&c, &Float::with_val(256, -&x));
        assert!(Float::with_val(256, s - 2u32).abs() < 1e-75);
        let big = c.int(30);
        let scaled = erfcx_fn(&c, &big);
        // e^{x²}erfc(x) ~ 1/(x√π) (1 - 1/(2x²) + ...)
        let approx = (c.pi().sqrt() * &big).recip() * (1.0 - 1.0 / 1800.0 + 3.0 / (4.0 * 810_000.0));
        assert!(Float::with_val(256, (scaled - &approx) / &approx).abs() < 1e-7);
    }

    #[test]
    fn parse_full_precision() {
        let c = ctx();
        let a = c.parse("0.1000000000000000000000000000000000000001").unwrap();
        let b = c.parse("0.1").unwrap();
        assert!(a > b);
        assert!(c.parse("abc").is_err());
    }
}
