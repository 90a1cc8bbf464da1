//! Exact combinatorial coefficients, classical orthogonal polynomials and
//! Gauss–Jacobi rules.

use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::mpnum::{ExtReal, PrecisionContext};

/// Exact rational; `rug::Rational` is always kept in lowest terms with a
/// positive denominator.
pub type BigRational = Rational;

/// Rising factorial (a)_n.
pub fn pochhammer(a: &BigRational, n: u32) -> BigRational {
    let mut acc = Rational::from(1);
    let mut f = a.clone();
    for _ in 0..n {
        acc *= &f;
        f += 1;
    }
    acc
}

/// n!! with the conventions (-1)!! = 0!! = 1.
pub fn double_factorial(n: i64) -> Result<Integer> {
    if n < -1 {
        return Err(Error::Domain(format!("double factorial of {n}")));
    }
    let mut acc = Integer::from(1);
    let mut k = n;
    while k > 1 {
        acc *= k;
        k -= 2;
    }
    Ok(acc)
}

pub fn factorial(n: u32) -> Integer {
    Integer::from(Integer::factorial(n))
}

pub fn binomial(n: u32, k: u32) -> Integer {
    if k > n {
        return Integer::new();
    }
    Integer::from(Integer::binomial_u(n, k))
}

/// Power-basis coefficient of x^i in L_n^{(k)}(x):
/// (n-i+1)_{k+i} (-1)^i / ((k+i)! i!).
pub fn laguerre_coeff(n: u32, k: u32, i: u32) -> Result<BigRational> {
    if i > n {
        return Err(Error::InvalidArgument(format!("laguerre_coeff index {i} > degree {n}")));
    }
    let num = pochhammer(&Rational::from(n - i + 1), k + i);
    let den = factorial(k + i) * factorial(i);
    let mut c = num / Rational::from(den);
    if i % 2 == 1 {
        c = -c;
    }
    Ok(c)
}

/// All coefficients of L_n^{(k)} in ascending powers.
pub fn laguerre_coeffs(n: u32, k: u32) -> Vec<BigRational> {
    (0..=n).map(|i| laguerre_coeff(n, k, i).expect("i <= n")).collect()
}

/// Physicists' Hermite H_n in ascending powers.
pub fn hermite_coeffs(n: u32) -> Vec<Integer> {
    hermite_like(n, false)
}

/// Ĥ_n(x) = (-i)^n H_n(ix): same magnitudes as H_n, all signs positive.
pub fn modified_hermite_coeffs(n: u32) -> Vec<Integer> {
    hermite_like(n, true)
}

fn hermite_like(n: u32, positive: bool) -> Vec<Integer> {
    let n_us = n as usize;
    let mut c = vec![Integer::new(); n_us + 1];
    let nf = factorial(n);
    for m in 0..=(n / 2) {
        let d = n - 2 * m;
        let mut v = Integer::from(&nf / &(factorial(m) * factorial(d)));
        v <<= d;
        if !positive && m % 2 == 1 {
            v = -v;
        }
        c[d as usize] = v;
    }
    c
}

/// Classical families evaluated by three-term recurrence.
#[derive(Debug, Clone, PartialEq)]
pub enum PolyFamily {
    Jacobi { a: ExtReal, b: ExtReal },
    Laguerre { k: ExtReal },
    Legendre,
    /// Physicists' convention.
    Hermite,
}

pub fn eval_poly(family: &PolyFamily, n: u32, x: &ExtReal, ctx: &PrecisionContext) -> Result<ExtReal> {
    let bits = ctx.work_bits();
    let x = ctx.round(x);
    let mut prev = ctx.one();
    if n == 0 {
        return Ok(prev);
    }
    match family {
        PolyFamily::Jacobi { a, b } => {
            if *a <= -1 || *b <= -1 {
                return Err(Error::Domain("jacobi parameters must exceed -1".into()));
            }
            Ok(jacobi_pair(n, a, b, &x, bits).0)
        }
        PolyFamily::Laguerre { k } => {
            let mut cur = Float::with_val(bits, 1 + k) - &x;
            for j in 1..n {
                let two_j = f64::from(2 * j);
                let t = Float::with_val(bits, two_j + 1.0) + k - &x;
                let next = (t * &cur - Float::with_val(bits, k + j) * &prev) / (j + 1);
                prev = std::mem::replace(&mut cur, next);
            }
            Ok(cur)
        }
        PolyFamily::Legendre => {
            let mut cur = x.clone();
            for j in 1..n {
                let next = (Float::with_val(bits, &x * (2 * j + 1)) * &cur - Float::with_val(bits, &prev * j)) / (j + 1);
                prev = std::mem::replace(&mut cur, next);
            }
            Ok(cur)
        }
        PolyFamily::Hermite => {
            let mut cur = Float::with_val(bits, &x * 2u32);
            for j in 1..n {
                let next = Float::with_val(bits, &x * 2u32) * &cur - Float::with_val(bits, &prev * (2 * j));
                prev = std::mem::replace(&mut cur, next);
            }
            Ok(cur)
        }
    }
}

/// (P_n, P_{n-1}) for the Jacobi family, n >= 1.
fn jacobi_pair(n: u32, a: &Float, b: &Float, x: &Float, bits: u32) -> (Float, Float) {
    let ab = Float::with_val(bits, a + b);
    let a2b2 = Float::with_val(bits, a.square_ref()) - Float::with_val(bits, b.square_ref());
    let mut p0 = Float::with_val(bits, 1);
    let mut p1 = (Float::with_val(bits, a - b) + Float::with_val(bits, &ab + 2u32) * x) / 2u32;
    for j in 2..=n {
        let t = Float::with_val(bits, &ab + 2 * j);
        let ca = Float::with_val(bits, &ab + j) * (2 * j) * Float::with_val(bits, &t - 2u32);
        let cb = Float::with_val(bits, &t - 1u32) * (Float::with_val(bits, &a2b2) + Float::with_val(bits, &t * Float::with_val(bits, &t - 2u32)) * x);
        let cc = Float::with_val(bits, a + (j - 1)) * Float::with_val(bits, b + (j - 1)) * Float::with_val(bits, &t * 2u32);
        let p2 = (cb * &p1 - cc * &p0) / ca;
        p0 = std::mem::replace(&mut p1, p2);
    }
    (p1, p0)
}

/// Nodes and weights of an n-point Gaussian rule.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<ExtReal>,
    pub weights: Vec<ExtReal>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss–Jacobi rule for the weight (1-x)^a (1+x)^b on [-1, 1].
///
/// Roots are seeded in double precision and then polished by Newton steps on
/// the recurrence at the working width.
pub fn gauss_jacobi(n: u32, a: &ExtReal, b: &ExtReal, ctx: &PrecisionContext) -> Result<GaussRule> {
    if n == 0 {
        return Err(Error::InvalidArgument("rule order must be >= 1".into()));
    }
    if *a <= -1 || *b <= -1 {
        return Err(Error::Domain("jacobi weight exponents must exceed -1".into()));
    }
    let bits = ctx.work_bits() + 16;
    let seeds = jacobi_seeds(n as usize, a.to_f64(), b.to_f64());
    let af = Float::with_val(bits, a);
    let bf = Float::with_val(bits, b);
    let ab = Float::with_val(bits, &af + &bf);
    let nf = f64::from(n);
    let gam = |v: Float| v.gamma();
    let norm = gam(Float::with_val(bits, &af + (nf + 1.0))) * gam(Float::with_val(bits, &bf + (nf + 1.0)))
        / gam(Float::with_val(bits, &ab + (nf + 1.0)))
        / Float::with_val(bits, factorial(n))
        * Float::with_val(bits, 2).pow(Float::with_val(bits, &ab + 1u32));
    let tol = Float::with_val(bits, 2).pow(-(bits as i32) + 8);

    let mut nodes = Vec::with_capacity(n as usize);
    let mut weights = Vec::with_capacity(n as usize);
    for z0 in seeds {
        let mut z = Float::with_val(bits, z0);
        let mut deriv = Float::new(bits);
        for _ in 0..40 {
            let (pn, pn1) = jacobi_pair(n, &af, &bf, &z, bits);
            deriv = jacobi_derivative(n, &af, &bf, &z, &pn, &pn1, bits);
            let dz = Float::with_val(bits, &pn / &deriv);
            z -= &dz;
            if dz.abs() <= tol {
                let (pn, pn1) = jacobi_pair(n, &af, &bf, &z, bits);
                deriv = jacobi_derivative(n, &af, &bf, &z, &pn, &pn1, bits);
                break;
            }
        }
        let one_m = Float::with_val(bits, 1) - Float::with_val(bits, z.square_ref());
        let w = Float::with_val(bits, &norm / (one_m * deriv.square()));
        nodes.push(ctx.round(&z));
        weights.push(ctx.round(&w));
    }
    Ok(GaussRule { nodes, weights })
}

pub fn gauss_legendre(n: u32, ctx: &PrecisionContext) -> Result<GaussRule> {
    gauss_jacobi(n, &ctx.zero(), &ctx.zero(), ctx)
}

fn jacobi_derivative(n: u32, a: &Float, b: &Float, z: &Float, pn: &Float, pn1: &Float, bits: u32) -> Float {
    let t = Float::with_val(bits, a + b) + 2 * n;
    let num = Float::with_val(bits, a - b) - Float::with_val(bits, &t * z);
    let num = num * n * pn + Float::with_val(bits, a + n) * Float::with_val(bits, b + n) * 2u32 * pn1;
    let den = t * (Float::with_val(bits, 1) - Float::with_val(bits, z.square_ref()));
    num / den
}

/// Double-precision root estimates (descending), following the classic
/// asymptotic seeding plus extrapolation scheme.
fn jacobi_seeds(n: usize, alf: f64, bet: f64) -> Vec<f64> {
    let nn = n as f64;
    let mut x = vec![0.0f64; n];
    let alfbet = alf + bet;
    let mut z = 0.0f64;
    for i in 0..n {
        let ii = i + 1;
        if ii == 1 {
            let an = alf / nn;
            let bn = bet / nn;
            let r1 = (1.0 + alf) * (2.78 / (4.0 + nn * nn) + 0.768 * an / nn);
            let r2 = 1.0 + 1.48 * an + 0.96 * bn + 0.452 * an * an + 0.83 * an * bn;
            z = 1.0 - r1 / r2;
        } else if ii == 2 {
            let r1 = (4.1 + alf) / ((1.0 + alf) * (1.0 + 0.156 * alf));
            let r2 = 1.0 + 0.06 * (nn - 8.0) * (1.0 + 0.12 * alf) / nn;
            let r3 = 1.0 + 0.012 * bet * (1.0 + 0.25 * alf.abs()) / nn;
            z -= (1.0 - z) * r1 * r2 * r3;
        } else if ii == 3 {
            let r1 = (1.67 + 0.28 * alf) / (1.0 + 0.37 * alf);
            let r2 = 1.0 + 0.22 * (nn - 8.0) / nn;
            let r3 = 1.0 + 8.0 * bet / ((std::f64::consts::TAU + bet) * nn * nn);
            z -= (x[0] - z) * r1 * r2 * r3;
        } else if ii == n - 1 {
            let r1 = (1.0 + 0.235 * bet) / (0.766 + 0.119 * bet);
            let r2 = 1.0 / (1.0 + 0.639 * (nn - 4.0) / (1.0 + 0.71 * (nn - 4.0)));
            let r3 = 1.0 / (1.0 + 20.0 * alf / ((7.5 + alf) * nn * nn));
            z += (z - x[n - 4]) * r1 * r2 * r3;
        } else if ii == n {
            let r1 = (1.0 + 0.37 * bet) / (1.67 + 0.28 * bet);
            let r2 = 1.0 / (1.0 + 0.22 * (nn - 8.0) / nn);
            let r3 = 1.0 / (1.0 + 8.0 * alf / ((std::f64::consts::TAU + alf) * nn * nn));
            z += (z - x[n - 3]) * r1 * r2 * r3;
        } else {
            z = 3.0 * x[i - 1] - 3.0 * x[i - 2] + x[i - 3];
        }
        for _ in 0..100 {
            let mut p1 = (alf - bet + (2.0 + alfbet) * z) / 2.0;
            let mut p2 = 1.0;
            let mut temp = 2.0 + alfbet;
            for j in 2..=n {
                let jj = j as f64;
                let p3 = p2;
                p2 = p1;
                temp = 2.0 * jj + alfbet;
                let a = 2.0 * jj * (jj + alfbet) * (temp - 2.0);
                let b = (temp - 1.0) * (alf * alf - bet * bet + temp * (temp - 2.0) * z);
                let c = 2.0 * (jj - 1.0 + alf) * (jj - 1.0 + bet) * temp;
                p1 = (b * p2 - c * p3) / a;
            }
            if n == 1 {
                temp = 2.0 + alfbet;
            }
            let pp = (nn * (alf - bet - temp * z) * p1 + 2.0 * (nn + alf) * (nn + bet) * p2) / (temp * (1.0 - z * z));
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        x[i] = z;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn pochhammer_values() {
        assert_eq!(pochhammer(&q(3, 1), 2), 12);
        assert_eq!(pochhammer(&q(-7, 3), 0), 1);
        assert_eq!(pochhammer(&q(1, 2), 3), q(15, 8));
        assert_eq!(pochhammer(&q(-2, 1), 3), 0);
    }

    #[test]
    fn double_factorials() {
        assert_eq!(double_factorial(-1).unwrap(), 1);
        assert_eq!(double_factorial(0).unwrap(), 1);
        assert_eq!(double_factorial(5).unwrap(), 15);
        assert_eq!(double_factorial(6).unwrap(), 48);
        assert!(matches!(double_factorial(-2), Err(Error::Domain(_))));
    }

    #[test]
    fn laguerre_coefficients() {
        assert_eq!(laguerre_coeff(2, 5, 0).unwrap(), 21);
        assert_eq!(laguerre_coeff(1, 0, 1).unwrap(), -1);
        assert!(laguerre_coeff(2, 0, 3).is_err());
        // L_2^{(1)}(x) = 3 - 3x + x²/2
        assert_eq!(laguerre_coeffs(2, 1), vec![q(3, 1), q(-3, 1), q(1, 2)]);
    }

    #[test]
    fn laguerre_sum_matches_recurrence() {
        let c = ctx();
        let x = c.parse("0.7").unwrap();
        for n in 0..=8u32 {
            for k in 0..=6u32 {
                let mut s = c.zero();
                let mut xp = c.one();
                for coef in laguerre_coeffs(n, k) {
                    s += Float::with_val(256, &coef) * &xp;
                    xp *= &x;
                }
                let r = eval_poly(&PolyFamily::Laguerre { k: c.int(k.into()) }, n, &x, &c).unwrap();
                assert!(Float::with_val(256, s - &r).abs() < 1e-60, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn small_polynomials() {
        let c = ctx();
        let x = c.parse("0.3").unwrap();
        assert_eq!(eval_poly(&PolyFamily::Legendre, 0, &x, &c).unwrap(), 1);
        assert_eq!(eval_poly(&PolyFamily::Hermite, 2, &c.one(), &c).unwrap(), 2);
        let p3 = eval_poly(&PolyFamily::Legendre, 3, &x, &c).unwrap();
        let expect = (Float::with_val(256, 5) * x.clone().pow(3u32) - Float::with_val(256, &x * 3u32)) / 2u32;
        assert!(Float::with_val(256, p3 - expect).abs() < 1e-70);
        let h = hermite_coeffs(4);
        assert_eq!(h, vec![Integer::from(12), Integer::new(), Integer::from(-48), Integer::new(), Integer::from(16)]);
        let hm = modified_hermite_coeffs(4);
        assert_eq!(hm[0], 12);
        assert_eq!(hm[2], 48);
    }

    #[test]
    fn jacobi_matches_series_definition() {
        // P_n^{(a,b)}(x) = (a+1)_n/n! · 2F1(-n, n+a+b+1; a+1; (1-x)/2)
        let c = ctx();
        let a = q(1, 2);
        let b = q(3, 2);
        let x = q(3, 10);
        let n = 2u32;
        let mut sum = Rational::new();
        let z: Rational = (Rational::from(1) - &x) / 2;
        for j in 0..=n {
            let up = pochhammer(&Rational::from(-(n as i64)), j) * pochhammer(&(Rational::from(n + 1) + &a + &b), j);
            let lo = pochhammer(&(Rational::from(1) + &a), j) * Rational::from(factorial(j));
            sum += up / lo * z.clone().pow(j as i32);
        }
        let exact = pochhammer(&(Rational::from(1) + &a), n) / Rational::from(factorial(n)) * sum;
        let fam = PolyFamily::Jacobi { a: c.ratio(1, 2), b: c.ratio(3, 2) };
        let v = eval_poly(&fam, n, &c.parse("0.3").unwrap(), &c).unwrap();
        let e = Float::with_val(256, &exact);
        assert!(Float::with_val(256, (v - &e) / &e).abs() < 1e-30);
    }

    #[test]
    fn legendre_orthogonality() {
        let c = ctx();
        let rule = gauss_legendre(12, &c).unwrap();
        for m in 0..=8u32 {
            for n in 0..=8u32 {
                let mut s = c.zero();
                for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                    s += eval_poly(&PolyFamily::Legendre, m, x, &c).unwrap() * eval_poly(&PolyFamily::Legendre, n, x, &c).unwrap() * w;
                }
                let expect = if m == n { c.ratio(2, (2 * n + 1).into()) } else { c.zero() };
                assert!(Float::with_val(256, s - expect).abs() < 1e-30, "m={m} n={n}");
            }
        }
    }

    #[test]
    fn jacobi_orthogonality_half_integer_weights() {
        let c = ctx();
        for (a2, b2) in [(1i64, 1i64), (3, 1), (1, 5), (5, 3)] {
            let (a, b) = (c.ratio(a2, 2), c.ratio(b2, 2));
            let rule = gauss_jacobi(10, &a, &b, &c).unwrap();
            let fam = PolyFamily::Jacobi { a: a.clone(), b: b.clone() };
            // total mass 2^{a+b+1} B(a+1, b+1)
            let mass: Float = rule.weights.iter().fold(c.zero(), |s, w| s + w);
            let ab1 = Float::with_val(256, &a + &b) + 1u32;
            let beta = Float::with_val(256, &a + 1u32).gamma() * Float::with_val(256, &b + 1u32).gamma() / Float::with_val(256, &ab1 + 1u32).gamma();
            let expect = Float::with_val(256, 2).pow(&ab1) * beta;
            assert!(Float::with_val(256, (mass - &expect) / &expect).abs() < 1e-60);
            for m in 0..=6u32 {
                for n in 0..m {
                    let mut s = c.zero();
                    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                        s += eval_poly(&fam, m, x, &c).unwrap() * eval_poly(&fam, n, x, &c).unwrap() * w;
                    }
                    assert!(s.abs() < 1e-60, "a={a2}/2 b={b2}/2 m={m} n={n}");
                }
            }
        }
    }

    #[test]
    fn large_rule_is_consistent() {
        let c = ctx();
        let a = c.ratio(5, 2);
        let b = c.ratio(1, 2);
        let rule = gauss_jacobi(256, &a, &b, &c).unwrap();
        assert_eq!(rule.len(), 256);
        for w in rule.nodes.windows(2) {
            assert!(w[0] > w[1]);
        }
        let mass: Float = rule.weights.iter().fold(c.zero(), |s, w| s + w);
        let expect = Float::with_val(256, 2).pow(4u32) * Float::with_val(256, 3.5).gamma() * Float::with_val(256, 1.5).gamma() / Float::with_val(256, 5).gamma();
        assert!(Float::with_val(256, (mass - &expect) / &expect).abs() < 1e-60);
    }
}
