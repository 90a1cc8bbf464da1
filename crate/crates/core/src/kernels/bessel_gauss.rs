//! The Bessel–Gaussian kernel
//! K^p_μ(β, κ) = ∫₀^∞ e^{-βx²-x} I_μ(κx²) x^p dx, μ = m + 1/2,
//! by a cutoff series, by a closed form built from three auxiliary functions,
//! and by direct quadrature; plus the assembled two-dimensional kernel ℬ.

use std::collections::HashMap;
use std::fmt;

use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};
use crate::hypfun::{pfq, sph_bessel_i_scaled, tricomi_u, PFQParams, TricomiB};
use crate::mpnum::{gamma_fn, log2_abs, recip_gamma, ExtReal, PrecisionContext};
use crate::oracle::{integrate_semi_infinite, QuadratureSpec, Scheme};
use crate::orthopoly::{factorial, laguerre_coeffs, BigRational};

use super::legendre::neumann_adams_coeffs;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub m: u32,
    pub p: ExtReal,
    pub beta: ExtReal,
    pub kappa: ExtReal,
}

impl KernelParams {
    pub fn new(m: u32, p: ExtReal, beta: ExtReal, kappa: ExtReal) -> Result<Self> {
        let k = Self { m, p, beta, kappa };
        k.validate()?;
        Ok(k)
    }

    /// Convenience constructor from binary doubles.
    pub fn from_f64(m: u32, p: f64, beta: f64, kappa: f64, ctx: &PrecisionContext) -> Result<Self> {
        Self::new(m, ctx.real(p), ctx.real(beta), ctx.real(kappa))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0) {
            return Err(Error::Domain("beta must be > 0".into()));
        }
        if !(self.kappa > 0) {
            return Err(Error::Domain("kappa must be > 0".into()));
        }
        if self.kappa > self.beta {
            return Err(Error::Domain(format!(
                "kappa = {} exceeds beta = {}: the integral diverges",
                self.kappa.to_f64(),
                self.beta.to_f64()
            )));
        }
        if !(self.p > -2 * i64::from(self.m) - 2) {
            return Err(Error::Domain(format!("p must exceed -2m-2 = {}", -2 * i64::from(self.m) - 2)));
        }
        Ok(())
    }

    /// κ/β as a double.
    pub fn ratio(&self) -> f64 {
        Float::with_val(64, &self.kappa / &self.beta).to_f64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Series,
    ClosedForm,
    QuadratureFallback,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Series => "series",
            Method::ClosedForm => "closed_form",
            Method::QuadratureFallback => "quadrature_fallback",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub value: ExtReal,
    pub method: Method,
    pub est_rel_err: ExtReal,
    pub work_bits_used: u32,
    /// |largest intermediate| / |result|, at least 1.
    pub cancellation_ratio: ExtReal,
    /// Series terms, or integrand evaluations for quadrature; 0 for the closed form.
    pub terms: usize,
    /// Precision doublings spent by the closed form.
    pub escalations: u32,
}

/// Method-selection thresholds on κ/β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispatchConfig {
    pub switch_low: f64,
    pub switch_high: f64,
    pub max_escalations: u32,
    /// The closed form is skipped in favour of quadrature when its predicted
    /// loss, log2(e)/(4(β-κ)) bits, exceeds this multiple of the working width,
    /// or when its ₂F₁ sums at κ²/β² would need more than a quarter of the
    /// series term limit.
    pub loss_budget: f64,
    /// Closed-form failures above this κ/β go straight to quadrature; below
    /// it the series is tried first.
    pub fallback_series_below: f64,
}

impl Default for DispatchConfig {
    fn default() -> Self {
        Self { switch_low: 0.05, switch_high: 0.999, max_escalations: 4, loss_budget: 1.0, fallback_series_below: 0.5 }
    }
}

impl DispatchConfig {
    /// Bits the closed form is expected to lose to e^{1/(4(β-κ))}-sized terms.
    pub fn predicted_loss(params: &KernelParams) -> f64 {
        let gap = Float::with_val(64, &params.beta - &params.kappa).to_f64();
        std::f64::consts::LOG2_E / (4.0 * gap)
    }

    /// Terms the ₂F₁ sums of ℱ₁ need at `bits`, or 0 on the branch without them.
    pub fn predicted_f1_terms(params: &KernelParams, bits: u32) -> f64 {
        if ClosedBranch::select(params.m, &params.p) == ClosedBranch::General {
            return 0.0;
        }
        let r = params.ratio();
        f64::from(bits) / (-(r * r).log2()).max(1e-300)
    }

    fn skip_closed(&self, params: &KernelParams, ctx: &PrecisionContext) -> bool {
        let bits = f64::from(ctx.work_bits());
        Self::predicted_loss(params) > self.loss_budget * bits
            || Self::predicted_f1_terms(params, ctx.work_bits()) > ctx.max_series_terms() as f64 / 4.0
    }
}

/// x^y for x > 0.
fn powr(x: &ExtReal, y: &ExtReal, bits: u32) -> ExtReal {
    (Float::with_val(bits, x.ln_ref()) * y).exp()
}

fn pow2f(e: f64, bits: u32) -> ExtReal {
    Float::with_val(bits, e).exp2()
}

/// Cutoff series: a sum over j of
/// Γ(4j+2μ+p+1)/(Γ(j+μ+1) j!) (κ/8β)^{2j} U(2j+μ+(p+1)/2, 1/2, 1/(4β)),
/// times (κ/8β)^μ / (4β)^{(p+1)/2}. All terms are positive.
pub fn k_series(params: &KernelParams, ctx: &PrecisionContext) -> Result<EvalReport> {
    params.validate()?;
    if params.kappa >= params.beta {
        return Err(Error::Domain("series route needs kappa < beta".into()));
    }
    let bits = ctx.work_bits() + 16;
    let c = ctx.with_bits(bits);
    let beta = c.round(&params.beta);
    let p = c.round(&params.p);
    let mu = Float::with_val(bits, params.m) + 0.5;
    let r = Float::with_val(bits, &params.kappa / Float::with_val(bits, &beta * 8u32));
    let r2 = Float::with_val(bits, r.square_ref());
    let z = Float::with_val(bits, Float::with_val(bits, &beta * 4u32).recip_ref());
    let tol = Float::with_val(bits, ctx.target_rel_tol() / 16u32);
    let two_mu_p1 = Float::with_val(bits, Float::with_val(bits, &mu * 2u32) + &p) + 1u32;
    let a0 = Float::with_val(bits, &mu + Float::with_val(bits, &p + 1u32) / 2u32);

    let mut sum = Float::new(bits);
    let mut pw = Float::with_val(bits, 1);
    let mut prev: Option<Float> = None;
    let mut j: u32 = 0;
    let tail;
    loop {
        let g = gamma_fn(&c, &Float::with_val(bits, &two_mu_p1 + 4 * j))?;
        let den = Float::with_val(bits, &mu + (j + 1)).gamma() * Float::with_val(bits, factorial(j));
        let a = Float::with_val(bits, &a0 + 2 * j);
        let u = tricomi_u(&a, TricomiB::Half, &z, &c)?;
        let term = g / den * &pw * u;
        sum += &term;
        if let Some(pt) = &prev {
            if term < *pt && !term.is_zero() {
                let q = Float::with_val(bits, &term / pt);
                let t_est = Float::with_val(bits, &term * &q) / (Float::with_val(bits, 1) - &q);
                if t_est <= Float::with_val(bits, &sum * &tol) {
                    tail = t_est;
                    break;
                }
            }
        }
        if term.is_zero() {
            tail = Float::new(bits);
            break;
        }
        j += 1;
        if j as usize >= ctx.max_series_terms() {
            return Err(Error::Truncation { terms: j as usize, last_term: term.to_f64() });
        }
        pw *= &r2;
        prev = Some(term);
    }
    let pre = Float::with_val(bits, r.ln() * &mu).exp()
        / Float::with_val(bits, Float::with_val(bits, &beta * 4u32).ln() * Float::with_val(bits, &p + 1u32) / 2u32).exp();
    let value = sum.clone() * pre;
    let est = Float::with_val(bits, &tail / &sum) + pow2f(-(f64::from(ctx.work_bits())) + 4.0, bits);
    Ok(EvalReport {
        value: ctx.round(&value),
        method: Method::Series,
        est_rel_err: ctx.round(&est),
        work_bits_used: bits,
        cancellation_ratio: ctx.one(),
        terms: j as usize + 1,
        escalations: 0,
    })
}

/// A value and the log2 of the largest magnitude that went into it.
#[derive(Debug, Clone)]
struct Part {
    value: ExtReal,
    log2_max: f64,
}

struct Common {
    bits: u32,
    p: ExtReal,
    beta: ExtReal,
    kappa: ExtReal,
    /// (β+κ)/(2κ)
    rho: ExtReal,
    bpk: ExtReal,
    bmk: ExtReal,
}

impl Common {
    fn new(p: &ExtReal, beta: &ExtReal, kappa: &ExtReal, ctx: &PrecisionContext) -> Self {
        let bits = ctx.work_bits();
        let beta = ctx.round(beta);
        let kappa = ctx.round(kappa);
        let bpk = Float::with_val(bits, &beta + &kappa);
        let bmk = Float::with_val(bits, &beta - &kappa);
        let rho = Float::with_val(bits, &bpk / Float::with_val(bits, &kappa * 2u32));
        Self { bits, p: ctx.round(p), beta, kappa, rho, bpk, bmk }
    }

    fn half_ps(&self, s: u32) -> ExtReal {
        Float::with_val(self.bits, &self.p + s) / 2u32
    }
}

fn require_s(s: u32) -> Result<()> {
    if s > 1 {
        return Err(Error::InvalidArgument(format!("s must be 0 or 1, got {s}")));
    }
    Ok(())
}

fn f1_part(s: u32, m: u32, cm: &Common, ctx: &PrecisionContext) -> Result<Part> {
    require_s(s)?;
    let bits = cm.bits;
    let h = cm.half_ps(s);
    let upper = Float::with_val(bits, m) - &h;
    if !(upper.is_integer() && upper >= 0) {
        return Err(Error::InvalidArgument("f1_aux: m - (p+s)/2 must be a nonnegative integer".into()));
    }
    let upper = upper.to_f64() as u32;
    let z = Float::with_val(bits, &cm.kappa / &cm.beta).square();
    let c1: Float = Float::with_val(bits, m) + 1.5;
    let quarter = Float::with_val(bits, &h / 2u32);
    let mut sum = Float::new(bits);
    let mut beta_pow = Float::with_val(bits, 1);
    for n in 0..=upper {
        let g = gamma_fn(ctx, &Float::with_val(bits, Float::with_val(bits, m + n + 1) + &h))?;
        let a1 = Float::with_val(bits, Float::with_val(bits, n + m + 1) / 2u32 + &quarter);
        let a2 = Float::with_val(bits, &a1 + 0.5);
        let f = pfq(&PFQParams::new(vec![a1, a2], vec![c1.clone()], z.clone()), ctx)?;
        sum += g / (Float::with_val(bits, factorial(2 * n + s)) * &beta_pow) * f;
        beta_pow *= &cm.beta;
    }
    let pre = Float::with_val(bits, ctx.pi().sqrt() * 2u32)
        * Float::with_val(bits, &cm.kappa / Float::with_val(bits, &cm.beta * 2u32)).pow(m + 1)
        / gamma_fn(ctx, &c1)?
        / powr(&cm.beta, &h, bits);
    let value = sum * pre;
    let log2_max = log2_abs(&value);
    Ok(Part { value, log2_max })
}

fn f2_part(m: u32, cm: &Common, ctx: &PrecisionContext) -> Result<Part> {
    let bits = cm.bits;
    let q = Float::with_val(bits, 2 * m + 2) - &cm.p;
    if !(q.is_integer() && q >= 0) {
        return Err(Error::InvalidArgument("f2_aux: 2m + 2 - p must be a nonnegative integer".into()));
    }
    if cm.bmk.is_zero() {
        return Err(Error::Pole("f2_aux at beta = kappa".into()));
    }
    let qf = Float::with_val(bits, factorial(q.to_f64() as u32));
    let l1 = Float::with_val(bits, Float::with_val(bits, 3u32) - &cm.p) / 2u32 + m;
    let l2 = Float::with_val(bits, m + 2) - Float::with_val(bits, &cm.p / 2u32);
    let z1 = Float::with_val(bits, Float::with_val(bits, &cm.bpk * 4u32).recip_ref());
    let z2 = Float::with_val(bits, Float::with_val(bits, &cm.bmk * 4u32).recip_ref());
    let one = ctx.one();

    let mut sign_a = Float::with_val(bits, cm.bpk.recip_ref()).pow(m + 1);
    if m.is_multiple_of(2) {
        sign_a = -sign_a;
    }
    let pre_a = sign_a / &qf;
    let pre_b = Float::with_val(bits, factorial(2 * m + 1)) / Float::with_val(bits, &cm.bmk).pow(m + 1) / &qf;
    let mut total = Float::new(bits);
    let mut lmax = f64::NEG_INFINITY;
    let mut rho_pow = Float::with_val(bits, 1);
    for j in 0..=m {
        let fa = pfq(
            &PFQParams::new(vec![one.clone(), ctx.int(i64::from(m) + 1 - i64::from(j))], vec![l1.clone(), l2.clone()], z1.clone()),
            ctx,
        )?;
        let ta = Float::with_val(bits, factorial(m + j)) / Float::with_val(bits, factorial(j)) * &rho_pow * fa * &pre_a;
        let fb = pfq(
            &PFQParams::new(
                vec![one.clone(), one.clone(), ctx.int(2 + 2 * i64::from(m))],
                vec![ctx.int(2 + i64::from(j + m)), l1.clone(), l2.clone()],
                z2.clone(),
            ),
            ctx,
        )?;
        let mut tb = Float::with_val(bits, &rho_pow)
            / Float::with_val(bits, factorial(j) * factorial(m - j) * (m + j + 1))
            * fb
            * &pre_b;
        if j % 2 == 1 {
            tb = -tb;
        }
        lmax = lmax.max(log2_abs(&ta)).max(log2_abs(&tb));
        total += ta;
        total += tb;
        rho_pow *= &cm.rho;
    }
    Ok(Part { value: total, log2_max: lmax })
}

fn f3_part(s: u32, m: u32, cm: &Common, ctx: &PrecisionContext) -> Result<Part> {
    require_s(s)?;
    if cm.bmk.is_zero() {
        return Err(Error::Pole("f3_aux at beta = kappa".into()));
    }
    let bits = cm.bits;
    let h = cm.half_ps(s);
    let lower_s: Float = Float::with_val(bits, s) + 0.5;
    let z1 = Float::with_val(bits, Float::with_val(bits, &cm.bpk * 4u32).recip_ref());
    let z2 = Float::with_val(bits, Float::with_val(bits, &cm.bmk * 4u32).recip_ref());
    let h_m = Float::with_val(bits, &h - m);
    let h_m1 = Float::with_val(bits, &h + (m + 1));

    let mut pre_b = powr(&cm.bpk, &h, bits).recip();
    if m % 2 == 1 {
        pre_b = -pre_b;
    }
    let pre_a = gamma_fn(ctx, &h_m)? * gamma_fn(ctx, &h_m1)? / powr(&cm.bmk, &h, bits);

    let mut total = Float::new(bits);
    let mut lmax = f64::NEG_INFINITY;
    let mut rho_pow = Float::with_val(bits, 1);
    for j in 0..=m {
        let comb = Float::with_val(bits, factorial(m + j)) / Float::with_val(bits, factorial(m - j) * factorial(j));
        let hj = Float::with_val(bits, &h - j);
        let fb = pfq(&PFQParams::new(vec![hj.clone()], vec![lower_s.clone()], z1.clone()), ctx)?;
        let tb = Float::with_val(bits, &comb * gamma_fn(ctx, &hj)?) * &rho_pow * fb * &pre_b;
        let lower_j = Float::with_val(bits, &h + (j + 1));
        let fa = pfq(
            &PFQParams::new(vec![h_m.clone(), h_m1.clone()], vec![lower_s.clone(), lower_j.clone()], z2.clone()),
            ctx,
        )?;
        let mut ta = comb * recip_gamma(ctx, &lower_j) * &rho_pow * fa * &pre_a;
        if j % 2 == 1 {
            ta = -ta;
        }
        lmax = lmax.max(log2_abs(&ta)).max(log2_abs(&tb));
        total += ta;
        total -= tb;
        rho_pow *= &cm.rho;
    }
    Ok(Part { value: total, log2_max: lmax })
}

fn aux_ctx(ctx: &PrecisionContext) -> PrecisionContext {
    ctx.with_bits(ctx.work_bits() + 16)
}

/// ℱ₁(s): finite sum of ₂F₁(…; m+3/2; κ²/β²) terms. Requires m - (p+s)/2 ∈ ℕ.
pub fn f1_aux(s: u32, p: &ExtReal, m: u32, beta: &ExtReal, kappa: &ExtReal, ctx: &PrecisionContext) -> Result<ExtReal> {
    let c = aux_ctx(ctx);
    Ok(ctx.round(&f1_part(s, m, &Common::new(p, beta, kappa, &c), &c)?.value))
}

/// ℱ₂: ₂F₂ sum at 1/(4(β+κ)) and ₃F₃ sum at 1/(4(β-κ)), over (2m+2-p)!.
pub fn f2_aux(p: &ExtReal, m: u32, beta: &ExtReal, kappa: &ExtReal, ctx: &PrecisionContext) -> Result<ExtReal> {
    let c = aux_ctx(ctx);
    Ok(ctx.round(&f2_part(m, &Common::new(p, beta, kappa, &c), &c)?.value))
}

/// ℱ₃(s): the Γ-weighted ₂F₂ sum at 1/(4(β-κ)) minus the ₁F₁ sum at 1/(4(β+κ)).
pub fn f3_aux(s: u32, p: &ExtReal, m: u32, beta: &ExtReal, kappa: &ExtReal, ctx: &PrecisionContext) -> Result<ExtReal> {
    let c = aux_ctx(ctx);
    Ok(ctx.round(&f3_part(s, m, &Common::new(p, beta, kappa, &c), &c)?.value))
}

/// Which combination of the auxiliary functions represents K.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedBranch {
    /// even integer p ≤ 2m: ℱ₁(0) + ℱ₂ - ℱ₃(1)
    EvenLow,
    /// odd integer p < 2m: -ℱ₁(1) - ℱ₂ + ℱ₃(0)
    OddLow,
    /// everything else: ℱ₃(0) - ℱ₃(1)
    General,
}

impl ClosedBranch {
    pub fn select(m: u32, p: &ExtReal) -> Self {
        if p.is_integer() {
            let pi = p.to_f64() as i64;
            let two_m = 2 * i64::from(m);
            if pi.rem_euclid(2) == 0 && pi <= two_m {
                return ClosedBranch::EvenLow;
            }
            if pi.rem_euclid(2) == 1 && pi < two_m {
                return ClosedBranch::OddLow;
            }
        }
        ClosedBranch::General
    }
}

fn closed_combination(params: &KernelParams, branch: ClosedBranch, ctx: &PrecisionContext) -> Result<Part> {
    let cm = Common::new(&params.p, &params.beta, &params.kappa, ctx);
    let m = params.m;
    let parts: Vec<(Part, bool)> = match branch {
        ClosedBranch::EvenLow => vec![
            (f1_part(0, m, &cm, ctx)?, true),
            (f2_part(m, &cm, ctx)?, true),
            (f3_part(1, m, &cm, ctx)?, false),
        ],
        ClosedBranch::OddLow => vec![
            (f1_part(1, m, &cm, ctx)?, false),
            (f2_part(m, &cm, ctx)?, false),
            (f3_part(0, m, &cm, ctx)?, true),
        ],
        ClosedBranch::General => vec![(f3_part(0, m, &cm, ctx)?, true), (f3_part(1, m, &cm, ctx)?, false)],
    };
    let mut total = Float::new(cm.bits);
    let mut lmax = f64::NEG_INFINITY;
    for (part, plus) in parts {
        lmax = lmax.max(part.log2_max);
        if plus {
            total += part.value;
        } else {
            total -= part.value;
        }
    }
    Ok(Part { value: total, log2_max: lmax })
}

/// Closed form (1/√(8πκ)) × {branch combination}. The combination is
/// recomputed at doubled precision while the measured cancellation leaves
/// fewer surviving bits than the target tolerance needs.
pub fn k_closed(params: &KernelParams, ctx: &PrecisionContext) -> Result<EvalReport> {
    k_closed_with(params, &DispatchConfig::default(), ctx)
}

pub fn k_closed_with(params: &KernelParams, cfg: &DispatchConfig, ctx: &PrecisionContext) -> Result<EvalReport> {
    params.validate()?;
    if params.kappa >= params.beta {
        return Err(Error::Domain("closed form needs kappa < beta".into()));
    }
    let branch = ClosedBranch::select(params.m, &params.p);
    let need = f64::from(ctx.tol_bits()) + 8.0;
    let mut bits = ctx.work_bits();
    let mut escalations = 0;
    loop {
        let c = ctx.with_bits(bits + 16);
        let comb = closed_combination(params, branch, &c)?;
        let lost = (comb.log2_max - log2_abs(&comb.value)).max(0.0);
        let surviving = f64::from(bits) - lost;
        if surviving >= need && comb.value.is_finite() && !comb.value.is_zero() {
            let pre = Float::with_val(bits + 16, c.pi() * 8u32 * Float::with_val(bits + 16, &params.kappa)).sqrt().recip();
            let value = comb.value * pre;
            let est = pow2f(lost - f64::from(bits) + 4.0, 64) + pow2f(-f64::from(ctx.work_bits()), 64);
            return Ok(EvalReport {
                value: ctx.round(&value),
                method: Method::ClosedForm,
                est_rel_err: ctx.round(&est),
                work_bits_used: bits + 16,
                cancellation_ratio: ctx.round(&pow2f(lost, ctx.work_bits())),
                terms: 0,
                escalations,
            });
        }
        if escalations >= cfg.max_escalations {
            return Err(Error::Unconverged { estimate: comb.value.to_f64(), error: 2f64.powf(-surviving) });
        }
        bits *= 2;
        escalations += 1;
    }
}

/// Direct exp-sinh quadrature of the defining integral, integrand carried as
/// e^{-(β-κ)x²-x} x^p · (e^{-z} I_μ(z)) with z = κx² so nothing overflows.
pub fn k_quadrature(params: &KernelParams, ctx: &PrecisionContext) -> Result<EvalReport> {
    params.validate()?;
    let bits = ctx.work_bits() + 32;
    let c = ctx.with_bits(bits);
    let bmk = Float::with_val(bits, &params.beta - &params.kappa);
    let kappa = c.round(&params.kappa);
    let p = c.round(&params.p);
    let m = params.m;
    let rel = ctx.target_rel_tol().to_f64().max(1e-300);
    let spec = QuadratureSpec::new(Scheme::TanhSinh, rel * 1e-40, rel, 14)?;
    let f = |x: &ExtReal| -> ExtReal {
        let x2 = Float::with_val(bits, x.square_ref());
        let z = Float::with_val(bits, &kappa * &x2);
        if z.is_zero() {
            return Float::new(bits);
        }
        let i = match sph_bessel_i_scaled(m, &z, &c) {
            Ok(v) => v,
            Err(_) => return Float::with_val(bits, rug::float::Special::Nan),
        };
        let e = Float::with_val(bits, -(Float::with_val(bits, &bmk * &x2) + x)).exp();
        let xp = powr(x, &p, bits);
        e * xp * i
    };
    let r = integrate_semi_infinite(f, &spec, &c)?;
    if !r.converged {
        return Err(Error::Unconverged { estimate: r.value.to_f64(), error: r.err_estimate.to_f64() });
    }
    let est = Float::with_val(bits, &r.err_estimate / Float::with_val(bits, r.value.abs_ref())) + pow2f(-f64::from(ctx.work_bits()), 64);
    Ok(EvalReport {
        value: ctx.round(&r.value),
        method: Method::QuadratureFallback,
        est_rel_err: ctx.round(&est),
        work_bits_used: bits,
        cancellation_ratio: ctx.one(),
        terms: r.evaluations,
        escalations: 0,
    })
}

/// Chooses series, closed form or quadrature by κ/β.
pub fn k_eval(params: &KernelParams, ctx: &PrecisionContext) -> Result<EvalReport> {
    k_eval_with(params, &DispatchConfig::default(), ctx)
}

pub fn k_eval_with(params: &KernelParams, cfg: &DispatchConfig, ctx: &PrecisionContext) -> Result<EvalReport> {
    params.validate()?;
    let r = params.ratio();
    if params.kappa == params.beta || r > cfg.switch_high {
        return k_quadrature(params, ctx);
    }
    if r < cfg.switch_low {
        return match k_series(params, ctx) {
            Ok(rep) => Ok(rep),
            Err(Error::Truncation { .. }) => k_quadrature(params, ctx),
            Err(e) => Err(e),
        };
    }
    if cfg.skip_closed(params, ctx) {
        return k_quadrature(params, ctx);
    }
    match k_closed_with(params, cfg, ctx) {
        Ok(rep) => Ok(rep),
        Err(Error::Unconverged { .. }) | Err(Error::Pole(_)) | Err(Error::Truncation { .. }) => {
            if r >= cfg.fallback_series_below {
                return k_quadrature(params, ctx);
            }
            match k_series(params, ctx) {
                Ok(rep) => Ok(rep),
                Err(_) => k_quadrature(params, ctx),
            }
        }
        Err(e) => Err(e),
    }
}

/// K values at fixed (β, κ) shared across many ℬ evaluations. Entries are
/// keyed by (m, p) for integer p and recomputed at a wider width whenever an
/// assembled sum cancels more than the current guard allows.
#[derive(Debug, Clone)]
pub struct KernelTable {
    beta: ExtReal,
    kappa: ExtReal,
    cfg: DispatchConfig,
    guard: u32,
    values: HashMap<(u32, i64), ExtReal>,
    methods: HashMap<Method, usize>,
}

impl KernelTable {
    pub fn new(beta: &ExtReal, kappa: &ExtReal) -> Result<Self> {
        Self::with_config(beta, kappa, DispatchConfig::default())
    }

    pub fn with_config(beta: &ExtReal, kappa: &ExtReal, cfg: DispatchConfig) -> Result<Self> {
        if !(*beta > 0 && *kappa > 0 && kappa <= beta) {
            return Err(Error::Domain("kernel table needs 0 < kappa <= beta".into()));
        }
        Ok(Self { beta: beta.clone(), kappa: kappa.clone(), cfg, guard: 32, values: HashMap::new(), methods: HashMap::new() })
    }

    /// How many table entries each method produced.
    pub fn method_counts(&self) -> &HashMap<Method, usize> {
        &self.methods
    }

    fn kernel_ctx(&self, ctx: &PrecisionContext) -> Result<PrecisionContext> {
        let bits = ctx.work_bits() + self.guard;
        let tol = Float::with_val(bits, ctx.target_rel_tol()) * pow2f(-f64::from(self.guard), bits);
        ctx.with_bits(bits).with_tol_ext(&tol)
    }

    fn kernel(&mut self, m: u32, p: i64, kctx: &PrecisionContext) -> Result<ExtReal> {
        if let Some(v) = self.values.get(&(m, p)) {
            return Ok(v.clone());
        }
        let params = KernelParams::new(m, kctx.int(p), kctx.round(&self.beta), kctx.round(&self.kappa))?;
        let rep = k_eval_with(&params, &self.cfg, kctx)?;
        *self.methods.entry(rep.method).or_insert(0) += 1;
        self.values.insert((m, p), rep.value.clone());
        Ok(rep.value)
    }

    /// ℬ^{(k)}_{n1,n2}(β, κ) for the Legendre pair (l1, l2).
    pub fn b_kernel(&mut self, k: u32, n1: u32, n2: u32, l1: u32, l2: u32, ctx: &PrecisionContext) -> Result<ExtReal> {
        let (l1, l2) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        let na = neumann_adams_coeffs(l1, l2);
        let lag = combined_coeffs(k, n1, n2);
        for _ in 0..6 {
            let kctx = self.kernel_ctx(ctx)?;
            let bits = kctx.work_bits();
            let mut total = Float::new(bits);
            let mut lmax = f64::NEG_INFINITY;
            for (r, a) in na.iter().enumerate() {
                let big_l = l1 + l2 - 2 * r as u32;
                let af = Float::with_val(bits, a);
                for (d, coef) in lag.iter().enumerate() {
                    if coef.cmp0().is_eq() {
                        continue;
                    }
                    let p = i64::from(k) + d as i64 - 1;
                    let mut t = Float::with_val(bits, coef) * &af * self.kernel(big_l, p, &kctx)?;
                    if big_l % 2 == 1 {
                        t = -t;
                    }
                    lmax = lmax.max(log2_abs(&t));
                    total += t;
                }
            }
            let lost = lmax - log2_abs(&total);
            if total.is_zero() || lost <= f64::from(self.guard) - 12.0 {
                let pre = Float::with_val(bits, kctx.pi() * 2u32 / Float::with_val(bits, &self.kappa)).sqrt();
                return Ok(ctx.round(&(total * pre)));
            }
            self.guard = (lost.ceil() as u32).saturating_add(32);
            self.values.clear();
        }
        Err(Error::Domain("b_kernel cancellation exceeds any affordable guard width".into()))
    }
}

fn combined_coeffs(k: u32, n1: u32, n2: u32) -> Vec<BigRational> {
    let c1 = laguerre_coeffs(n1, k);
    let c2 = laguerre_coeffs(n2, k);
    let mut out = vec![BigRational::new(); (n1 + n2 + 1) as usize];
    for (i, a) in c1.iter().enumerate() {
        for (j, b) in c2.iter().enumerate() {
            out[i + j] += BigRational::from(a * b);
        }
    }
    out
}

/// ℬ^{(k)}_{n1,n2}(β, κ) = √(2π/κ) Σ_r A^r (-1)^L Σ_i Σ_j C_i C_j K^{i+j+k-1}_{L+1/2}(β, κ).
#[allow(clippy::too_many_arguments)]
pub fn b_kernel(
    k: u32,
    n1: u32,
    n2: u32,
    l1: u32,
    l2: u32,
    beta: &ExtReal,
    kappa: &ExtReal,
    ctx: &PrecisionContext,
) -> Result<ExtReal> {
    KernelTable::new(beta, kappa)?.b_kernel(k, n1, n2, l1, l2, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    fn kp(m: u32, p: f64, b: f64, k: f64) -> KernelParams {
        KernelParams::from_f64(m, p, b, k, &ctx()).unwrap()
    }

    fn rel(a: &Float, b: &Float) -> f64 {
        (Float::with_val(256, a - b) / b).abs().to_f64()
    }

    #[test]
    fn branch_selection() {
        let c = ctx();
        assert_eq!(ClosedBranch::select(2, &c.int(4)), ClosedBranch::EvenLow);
        assert_eq!(ClosedBranch::select(2, &c.int(-2)), ClosedBranch::EvenLow);
        assert_eq!(ClosedBranch::select(3, &c.int(5)), ClosedBranch::OddLow);
        assert_eq!(ClosedBranch::select(0, &c.int(-1)), ClosedBranch::OddLow);
        assert_eq!(ClosedBranch::select(2, &c.int(5)), ClosedBranch::General);
        assert_eq!(ClosedBranch::select(2, &c.int(6)), ClosedBranch::General);
        assert_eq!(ClosedBranch::select(2, &c.real(2.5)), ClosedBranch::General);
    }

    #[test]
    fn three_routes_agree() {
        let c = ctx();
        for (m, p, b, k) in [(0, 5.0, 1.0, 0.5), (2, 4.0, 1.0, 0.6), (3, 5.0, 1.0, 0.6), (0, 5.0, 1.0, 0.1)] {
            let pr = kp(m, p, b, k);
            let s = k_series(&pr, &c).unwrap();
            let cl = k_closed(&pr, &c).unwrap();
            let q = k_quadrature(&pr, &c).unwrap();
            assert!(rel(&s.value, &q.value) < 1e-28, "series m={m} p={p}: {}", rel(&s.value, &q.value));
            assert!(rel(&cl.value, &q.value) < 1e-28, "closed m={m} p={p}: {}", rel(&cl.value, &q.value));
        }
    }

    #[test]
    fn dispatcher_rules() {
        let c = ctx();
        assert_eq!(k_eval(&kp(1, 3.0, 1.0, 1e-6), &c).unwrap().method, Method::Series);
        assert_eq!(k_eval(&kp(1, 3.0, 1.0, 0.5), &c).unwrap().method, Method::ClosedForm);
        assert_eq!(k_eval(&kp(1, 3.0, 1.0, 0.9999), &c).unwrap().method, Method::QuadratureFallback);
        assert_eq!(k_eval(&kp(1, 3.0, 1.0, 1.0), &c).unwrap().method, Method::QuadratureFallback);
        // gap 1e-4: the closed form would lose thousands of bits
        assert_eq!(k_eval(&kp(1, 3.0, 0.01, 0.0099), &c).unwrap().method, Method::QuadratureFallback);
        assert_eq!(k_eval(&kp(1, 3.0, 0.25, 0.2), &c).unwrap().method, Method::ClosedForm);
        assert!(matches!(KernelParams::from_f64(2, 4.0, 1.0, 1.5, &c), Err(Error::Domain(_))));
        assert!(KernelParams::from_f64(1, -4.0, 1.0, 0.5, &c).is_err());
    }

    #[test]
    fn aux_guards() {
        let c = ctx();
        // m - (p+s)/2 < 0 selects the wrong branch
        assert!(matches!(f1_aux(0, &c.int(6), 1, &c.one(), &c.ratio(1, 2), &c), Err(Error::InvalidArgument(_))));
        assert!(matches!(f2_aux(&c.zero(), 0, &c.one(), &c.one(), &c), Err(Error::Pole(_))));
        assert!(matches!(f3_aux(0, &c.int(5), 0, &c.one(), &c.one(), &c), Err(Error::Pole(_))));
        let v = f1_aux(0, &c.int(2), 1, &c.one(), &c.ratio(1, 2), &c).unwrap();
        assert!(v > 0);
        assert!(f2_aux(&c.zero(), 0, &c.one(), &c.real(0.3), &c).unwrap().is_finite());
        assert!(f2_aux(&c.one(), 1, &c.one(), &c.real(0.4), &c).unwrap().is_finite());
    }

    #[test]
    fn vanishing_kappa() {
        let c = ctx();
        let small = k_eval(&kp(2, 5.0, 1.0, 1e-10), &c).unwrap();
        assert_eq!(small.method, Method::Series);
        assert!(small.value.to_f64().abs() < 1e-20);
    }

    #[test]
    fn b_kernel_decoupling_limit() {
        let c = ctx();
        let beta = c.one();
        let kappa = c.parse("1e-8").unwrap();
        let b = b_kernel(5, 1, 0, 0, 0, &beta, &kappa, &c).unwrap();
        let l = crate::kernels::laguerre_kernel_expansion(&crate::kernels::LaguerreKernelParams::new(5, 1, 0, beta.clone()), &c).unwrap();
        let expect = l * 2u32;
        assert!(rel(&b, &expect) < 1e-6);
    }
}
