//! Products of Legendre polynomials against e^{-λw}.

use rug::{Float, Rational};

use crate::error::{Error, Result};
use crate::hypfun::sph_bessel_i;
use crate::mpnum::{ExtReal, PrecisionContext};
use crate::orthopoly::{double_factorial, factorial, BigRational};

/// A^r_{l1,l2}, r = 0..=min(l1,l2): P_{l1} P_{l2} = Σ_r A^r P_{l1+l2-2r}.
/// The product is symmetric, so the arguments may come in either order.
pub fn neumann_adams_coeffs(l1: u32, l2: u32) -> Vec<BigRational> {
    let (l1, l2) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
    let df = |n: i64| double_factorial(n).expect("argument >= -1");
    (0..=l1)
        .map(|r| {
            let (a, b, r64) = (i64::from(l1), i64::from(l2), i64::from(r));
            let num = df(2 * a - 2 * r64 - 1)
                * df(2 * r64 - 1)
                * df(2 * b - 2 * r64 - 1)
                * factorial(l1 + l2 - r)
                * (2 * (a + b) - 4 * r64 + 1);
            let den = factorial(l1 - r) * factorial(r) * factorial(l2 - r) * df(2 * (a + b) - 2 * r64 + 1);
            Rational::from((num, den))
        })
        .collect()
}

/// ∫₋₁¹ e^{-λw} P_{l1}(λ) P_{l2}(λ) dλ = √(2π/w) Σ_r A^r (-1)^L I_{L+1/2}(w), L = l1+l2-2r.
pub fn legendre_pair_integral(l1: u32, l2: u32, w: &ExtReal, ctx: &PrecisionContext) -> Result<ExtReal> {
    if !(*w > 0) {
        return Err(Error::Domain("legendre_pair_integral needs w > 0".into()));
    }
    let bits = ctx.work_bits() + 16;
    let c = ctx.with_bits(bits);
    let coeffs = neumann_adams_coeffs(l1, l2);
    let mut sum = Float::new(bits);
    for (r, a) in coeffs.iter().enumerate() {
        let big_l = l1 + l2 - 2 * r as u32;
        let t = Float::with_val(bits, a) * sph_bessel_i(big_l, w, &c)?;
        if big_l % 2 == 1 {
            sum -= t;
        } else {
            sum += t;
        }
    }
    let pre = Float::with_val(bits, c.pi() * 2u32 / Float::with_val(bits, w)).sqrt();
    Ok(ctx.round(&(sum * pre)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orthopoly::{eval_poly, PolyFamily};

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    #[test]
    fn small_coefficients() {
        assert_eq!(neumann_adams_coeffs(0, 0), vec![Rational::from(1)]);
        for l in 0..=6u32 {
            let a = neumann_adams_coeffs(l, l);
            assert_eq!(a[l as usize], Rational::from((1, 2 * l + 1)));
        }
        assert_eq!(neumann_adams_coeffs(3, 1), neumann_adams_coeffs(1, 3));
    }

    #[test]
    fn product_identity_exact() {
        // exact rational evaluation of both sides at rational points
        let legendre = |n: u32, x: &Rational| -> Rational {
            let (mut p0, mut p1) = (Rational::from(1), x.clone());
            if n == 0 {
                return p0;
            }
            for k in 1..n {
                let p2 = (Rational::from(2 * k + 1) * x * &p1 - Rational::from(k) * &p0) / Rational::from(k + 1);
                p0 = p1;
                p1 = p2;
            }
            p1
        };
        let coeffs = neumann_adams_coeffs(2, 3);
        for x in [Rational::from((-9, 10)), Rational::from((1, 10)), Rational::from((4, 5))] {
            let lhs = legendre(2, &x) * legendre(3, &x);
            let rhs = coeffs
                .iter()
                .enumerate()
                .fold(Rational::new(), |acc, (r, a)| acc + Rational::from(a * &legendre(5 - 2 * r as u32, &x)));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn pair_integral_limits() {
        let c = ctx();
        let w = c.parse("1.5").unwrap();
        let expect = Float::with_val(256, w.sinh_ref()) * 2u32 / &w;
        let v = legendre_pair_integral(0, 0, &w, &c).unwrap();
        assert!(Float::with_val(256, (v - &expect) / &expect).abs() < 1e-70);
        let w = c.parse("1e-6").unwrap();
        for l1 in 0..=3u32 {
            for l2 in 0..=3u32 {
                let v = legendre_pair_integral(l1, l2, &w, &c).unwrap().to_f64();
                let expect = if l1 == l2 { 2.0 / f64::from(2 * l1 + 1) } else { 0.0 };
                assert!((v - expect).abs() < 1e-5, "{l1} {l2} {v}");
            }
        }
        assert!(legendre_pair_integral(1, 1, &c.zero(), &c).is_err());
    }

    #[test]
    fn pair_integral_vs_gauss_legendre() {
        let c = ctx();
        let rule = crate::orthopoly::gauss_legendre(40, &c).unwrap();
        let w = c.parse("0.8").unwrap();
        let mut q = Float::new(256);
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            let p1 = eval_poly(&PolyFamily::Legendre, 1, x, &c).unwrap();
            q += Float::with_val(256, -(Float::with_val(256, x * &w))).exp() * p1 * wt;
        }
        let v = legendre_pair_integral(0, 1, &w, &c).unwrap();
        assert!(Float::with_val(256, (v - &q) / &q).abs() < 1e-60);
    }
}
