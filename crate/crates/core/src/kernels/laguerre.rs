//! The Laguerre–Gaussian kernel ℒ^{(k)}_{n1,n2}(γ) = ∫₀^∞ L_{n1}^{(k)} L_{n2}^{(k)} e^{-γx²-x} x^k dx
//! by two routes: a finite sum of 𝒥(ν, γ) values, and the scaled-erfc
//! representation with the polynomials T and S.

use std::collections::HashMap;

use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::hypfun::{tricomi_u, TricomiB};
use crate::mpnum::{erfcx_fn, gamma_fn, log2_abs, with_guard_bits, ExtReal, PrecisionContext};
use crate::orthopoly::{
    binomial, factorial, hermite_coeffs, laguerre_coeffs, modified_hermite_coeffs, pochhammer, BigRational,
};

#[derive(Debug, Clone, PartialEq)]
pub struct LaguerreKernelParams {
    pub k: u32,
    pub n1: u32,
    pub n2: u32,
    pub gamma: ExtReal,
}

impl LaguerreKernelParams {
    pub fn new(k: u32, n1: u32, n2: u32, gamma: ExtReal) -> Self {
        Self { k, n1, n2, gamma }
    }

    fn degree(&self) -> u32 {
        self.n1 + self.n2 + self.k
    }
}

/// 𝒥(ν, γ) = ∫₀^∞ e^{-γx²-x} x^ν dx = Γ(ν+1) (4γ)^{-(ν+1)/2} U((ν+1)/2, 1/2, 1/(4γ)).
pub fn j_integral(nu: &ExtReal, gamma: &ExtReal, ctx: &PrecisionContext) -> Result<ExtReal> {
    if !(*nu > -1) {
        return Err(Error::Domain(format!("j_integral needs nu > -1, got {}", nu.to_f64())));
    }
    if !(*gamma >= 0) {
        return Err(Error::Domain(format!("j_integral needs gamma >= 0, got {}", gamma.to_f64())));
    }
    let bits = ctx.work_bits() + 16;
    let c = ctx.with_bits(bits);
    let nu1 = Float::with_val(bits, nu + 1u32);
    let g = gamma_fn(&c, &nu1)?;
    if gamma.is_zero() {
        return Ok(ctx.round(&g));
    }
    let a = Float::with_val(bits, &nu1 / 2u32);
    let four_g = Float::with_val(bits, gamma * 4u32);
    let z = Float::with_val(bits, four_g.recip_ref());
    let u = tricomi_u(&a, TricomiB::Half, &z, &c)?;
    let scale = Float::with_val(bits, -(four_g.ln() * &a)).exp();
    Ok(ctx.round(&(g * scale * u)))
}

/// Σ_{i+j=N-k} C^{n1}_{i,k} C^{n2}_{j,k}, indexed by N - k.
fn combined_laguerre_coeffs(k: u32, n1: u32, n2: u32) -> Vec<BigRational> {
    let c1 = laguerre_coeffs(n1, k);
    let c2 = laguerre_coeffs(n2, k);
    let mut out = vec![Rational::new(); (n1 + n2 + 1) as usize];
    for (i, a) in c1.iter().enumerate() {
        for (j, b) in c2.iter().enumerate() {
            out[i + j] += Rational::from(a * b);
        }
    }
    out
}

/// ℒ as Σ_i Σ_j C^{n1}_{i,k} C^{n2}_{j,k} 𝒥(k+i+j, γ).
pub fn laguerre_kernel_expansion(params: &LaguerreKernelParams, ctx: &PrecisionContext) -> Result<ExtReal> {
    if !(params.gamma >= 0) {
        return Err(Error::Domain("laguerre kernel needs gamma >= 0".into()));
    }
    let coeffs = combined_laguerre_coeffs(params.k, params.n1, params.n2);
    with_guard_bits(ctx, 16, |bits| {
        let c = ctx.with_bits(bits);
        let mut sum = Float::new(bits);
        let mut lmax = f64::NEG_INFINITY;
        for (d, coef) in coeffs.iter().enumerate() {
            if coef.cmp0().is_eq() {
                continue;
            }
            let nu = c.int(i64::from(params.k) + d as i64);
            let t = Float::with_val(bits, coef) * j_integral(&nu, &params.gamma, &c)?;
            lmax = lmax.max(log2_abs(&t));
            sum += t;
        }
        Ok((sum, lmax))
    })
}

/// Exact coefficients of T^{(k)}_{n1,n2} and S^{(k)}_{n1,n2}, ascending in γ.
#[derive(Debug, Clone, PartialEq)]
pub struct TsPolynomials {
    pub t: Vec<BigRational>,
    pub s: Vec<BigRational>,
}

impl TsPolynomials {
    pub fn new(k: u32, n1: u32, n2: u32) -> Self {
        ts_coefficients(k, n1, n2)
    }

    pub fn eval_t(&self, gamma: &ExtReal, ctx: &PrecisionContext) -> ExtReal {
        horner(&self.t, gamma, ctx.work_bits())
    }

    pub fn eval_s(&self, gamma: &ExtReal, ctx: &PrecisionContext) -> ExtReal {
        horner(&self.s, gamma, ctx.work_bits())
    }

    /// True when every coefficient of both polynomials is an integer.
    pub fn integer_coefficients(&self) -> bool {
        self.t.iter().chain(&self.s).all(|c| *c.denom() == 1)
    }
}

fn horner(coeffs: &[BigRational], x: &ExtReal, bits: u32) -> ExtReal {
    let mut acc = Float::new(bits);
    for c in coeffs.iter().rev() {
        acc *= x;
        acc += Float::with_val(bits, c);
    }
    acc
}

/// (n-i+1)_{k+i} / (i! (k+i)!), the unsigned Laguerre coefficient.
fn unsigned_coeff(n: u32, k: u32, i: u32) -> BigRational {
    pochhammer(&Rational::from(n - i + 1), k + i) / Rational::from(factorial(i) * factorial(k + i))
}

/// Integer coefficients (in y) of y^N Σ_{s=1}^N C(N,s) (-1)^s Ĥ_{N-s}(y) H_{s-1}(y).
fn s_kernel_poly(n: u32) -> Vec<Integer> {
    let mut out = vec![Integer::new(); (2 * n) as usize];
    for s in 1..=n {
        let mut b = binomial(n, s);
        if s % 2 == 1 {
            b = -b;
        }
        let hm = modified_hermite_coeffs(n - s);
        let h = hermite_coeffs(s - 1);
        for (a, ca) in hm.iter().enumerate() {
            if ca.cmp0().is_eq() {
                continue;
            }
            for (d, cd) in h.iter().enumerate() {
                if cd.cmp0().is_eq() {
                    continue;
                }
                out[n as usize + a + d] += Integer::from(ca * cd) * &b;
            }
        }
    }
    out
}

fn pow2(e: i64) -> BigRational {
    let one = Integer::from(1);
    if e >= 0 {
        Rational::from(one << (e as u32))
    } else {
        Rational::from((Integer::from(1), one << ((-e) as u32)))
    }
}

/// Builds T and S in exact arithmetic from their modified-Hermite forms.
pub fn ts_coefficients(k: u32, n1: u32, n2: u32) -> TsPolynomials {
    let d = i64::from(n1 + n2 + k);
    let du = d as usize;
    let pref = Rational::from(factorial(n1) * factorial(n2));
    let mut t = vec![Rational::new(); du + 1];
    let mut s = vec![Rational::new(); du + 1];
    let mut s_cache: HashMap<u32, Vec<Integer>> = HashMap::new();
    for i in 0..=n1 {
        let ci = unsigned_coeff(n1, k, i);
        for j in 0..=n2 {
            let cj = unsigned_coeff(n2, k, j);
            let w = Rational::from(&pref * &ci) * &cj;
            let n = i + j + k;
            let ni = i64::from(n);
            let nf = factorial(n);
            // y^N Ĥ_N(y) with y = 1/(2√γ) gives 2^{D-N} γ^{D-N+m} per term
            let tw = Rational::from(&w * &pow2(d - ni));
            for m in 0..=(n / 2) {
                let c = Integer::from(&nf / &(factorial(m) * factorial(n - 2 * m)));
                t[(d - ni + i64::from(m)) as usize] += Rational::from(&tw * &Rational::from(c));
            }
            let poly = s_cache.entry(n).or_insert_with(|| s_kernel_poly(n));
            for (e, a) in poly.iter().enumerate() {
                if a.cmp0().is_eq() {
                    continue;
                }
                let e = e as i64;
                debug_assert!(e % 2 == 1);
                let q = d - (e + 1) / 2;
                let v = Rational::from(&w * &pow2(d - e)) * Rational::from(a);
                s[q as usize] -= v;
            }
        }
    }
    TsPolynomials { t, s }
}

/// Values (T(γ), S(γ)).
pub fn ts_polynomials(k: u32, n1: u32, n2: u32, gamma: &ExtReal, ctx: &PrecisionContext) -> (ExtReal, ExtReal) {
    let p = ts_coefficients(k, n1, n2);
    (p.eval_t(gamma, ctx), p.eval_s(gamma, ctx))
}

/// ℒ through (-1)^k / (n1! n2! (2γ)^D) [ (1/2)√(π/γ) e^{1/(4γ)} erfc(1/(2√γ)) T - S ].
pub fn laguerre_kernel_erfc(params: &LaguerreKernelParams, ctx: &PrecisionContext) -> Result<ExtReal> {
    if !(params.gamma > 0) {
        return Err(Error::Domain("erfc route needs gamma > 0".into()));
    }
    let poly = ts_coefficients(params.k, params.n1, params.n2);
    let d = params.degree();
    let g = params.gamma.to_f64();
    let guess = f64::from(d) * (-(2.0 * g).log2()).max(0.0) + 24.0;
    let nfact = factorial(params.n1) * factorial(params.n2);
    with_guard_bits(ctx, guess as u32, |bits| {
        let c = ctx.with_bits(bits);
        let gm = c.round(&params.gamma);
        let sqrt_g = Float::with_val(bits, gm.sqrt_ref());
        let y = Float::with_val(bits, (sqrt_g.clone() * 2u32).recip());
        let lead = Float::with_val(bits, c.pi() / &gm).sqrt() / 2u32 * erfcx_fn(&c, &y) * poly.eval_t(&gm, &c);
        let mut s_val = Float::new(bits);
        let mut lmax = log2_abs(&lead);
        let mut pw = Float::with_val(bits, 1);
        for coef in &poly.s {
            let term = Float::with_val(bits, coef) * &pw;
            lmax = lmax.max(log2_abs(&term));
            s_val += term;
            pw *= &gm;
        }
        let den = Float::with_val(bits, &nfact) * Float::with_val(bits, &gm * 2u32).pow(d);
        let mut v = (lead - s_val) / &den;
        if params.k % 2 == 1 {
            v = -v;
        }
        Ok((v, lmax - log2_abs(&den)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    fn rel(a: &Float, b: &Float) -> f64 {
        (Float::with_val(256, a - b) / b).abs().to_f64()
    }

    #[test]
    fn j_integral_small_cases() {
        let c = ctx();
        assert_eq!(j_integral(&c.int(5), &c.zero(), &c).unwrap(), 120);
        let g = c.one();
        let expect = Float::with_val(256, c.pi() / &g).sqrt() / 2u32 * erfcx_fn(&c, &c.ratio(1, 2));
        assert!(rel(&j_integral(&c.zero(), &g, &c).unwrap(), &expect) < 1e-70);
        assert!(j_integral(&c.int(-1), &g, &c).is_err());
        assert!(j_integral(&c.one(), &c.int(-1), &c).is_err());
    }

    #[test]
    fn j_integral_tiny_gamma_approaches_gamma_function() {
        let c = ctx();
        let v = j_integral(&c.int(5), &c.parse("1e-8").unwrap(), &c).unwrap();
        assert!(rel(&v, &c.int(120)) < 1e-5);
    }

    #[test]
    fn expansion_trivial_cases() {
        let c = ctx();
        let g = c.parse("0.37").unwrap();
        let p = LaguerreKernelParams::new(5, 0, 0, g.clone());
        let j5 = j_integral(&c.int(5), &g, &c).unwrap();
        assert_eq!(laguerre_kernel_expansion(&p, &c).unwrap(), j5);
        let p = LaguerreKernelParams::new(5, 1, 0, c.zero());
        assert!(laguerre_kernel_expansion(&p, &c).unwrap().is_zero());
    }

    #[test]
    fn ts_at_zero_and_integrality() {
        for k in 0..=6 {
            for n1 in 0..=3 {
                for n2 in 0..=3 {
                    let p = ts_coefficients(k, n1, n2);
                    assert_eq!(p.t[0], 1, "T k={k} n1={n1} n2={n2}");
                    if n1 + n2 + k > 0 {
                        assert_eq!(p.s[0], 1, "S k={k} n1={n1} n2={n2}");
                    }
                    assert!(p.integer_coefficients());
                }
            }
        }
        // the empty s-sum leaves S identically zero in the smallest case
        assert!(ts_coefficients(0, 0, 0).s.iter().all(|c| c.cmp0().is_eq()));
    }

    #[test]
    fn erfc_route_matches_expansion() {
        let c = ctx();
        for g in ["0.7", "0.05", "3"] {
            let p = LaguerreKernelParams::new(5, 2, 2, c.parse(g).unwrap());
            let a = laguerre_kernel_expansion(&p, &c).unwrap();
            let b = laguerre_kernel_erfc(&p, &c).unwrap();
            assert!(rel(&a, &b) < 1e-28, "gamma={g}");
        }
        let p = LaguerreKernelParams::new(0, 0, 0, c.one());
        let expect = c.pi().sqrt() / 2u32 * Float::with_val(256, c.ratio(1, 4).exp()) * Float::with_val(256, c.ratio(1, 2).erfc());
        assert!(rel(&laguerre_kernel_erfc(&p, &c).unwrap(), &expect) < 1e-70);
    }

    #[test]
    fn erfc_route_near_zero_gamma() {
        let c = ctx();
        let p = LaguerreKernelParams::new(5, 1, 1, c.parse("1e-8").unwrap());
        let a = laguerre_kernel_expansion(&p, &c).unwrap();
        let b = laguerre_kernel_erfc(&p, &c).unwrap();
        assert!(rel(&a, &b) < 1e-25);
        // γ = 0 value of the diagonal is Γ(n+k+1)/n!
        assert!(rel(&a, &c.int(720)) < 1e-4);
    }
}
