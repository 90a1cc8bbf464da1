//! Matrix elements of Gaussian pair potentials between hyperspherical basis
//! functions: the two-dimensional integral I₂ for the pair (1,2) and the
//! three-dimensional integral I₃ for the pairs (1,3) and (2,3).
//!
//! Values are unnormalized. The hyperradial constants 𝒞_{α,n} and the
//! hyperangular constants 𝒩^{l1,l2}_μ multiply them in a full calculation.

use std::collections::HashMap;

use rug::Float;

use crate::error::{Error, Result};
use crate::kernels::{j_integral, KernelTable};
use crate::mpnum::{ExtReal, PrecisionContext};
use crate::orthopoly::{eval_poly, gauss_jacobi, laguerre_coeffs, GaussRule, PolyFamily};

/// Hyperradial Laguerre superscript and power of x.
pub const DEFAULT_K: u32 = 5;

/// Order sequence of the outer τ-rule.
pub const ORDERS: [u32; 6] = [16, 32, 64, 128, 256, 512];

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialChannel {
    pub amplitude: ExtReal,
    pub zeta: ExtReal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPotential {
    pub alpha: ExtReal,
    pub channels: Vec<PotentialChannel>,
}

impl GaussianPotential {
    pub fn new(alpha: ExtReal, channels: Vec<PotentialChannel>) -> Result<Self> {
        let pot = Self { alpha, channels };
        pot.validate()?;
        Ok(pot)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0) {
            return Err(Error::Domain("alpha must be > 0".into()));
        }
        if self.channels.is_empty() {
            return Err(Error::InvalidArgument("potential needs at least one channel".into()));
        }
        for (i, ch) in self.channels.iter().enumerate() {
            if !(ch.zeta > 0) {
                return Err(Error::Domain(format!("channel {i}: zeta must be > 0")));
            }
            if !ch.amplitude.is_finite() {
                return Err(Error::Domain(format!("channel {i}: amplitude must be finite")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelIndices {
    pub l1: u32,
    pub l2: u32,
    pub mu1: u32,
    pub mu2: u32,
    pub n1: u32,
    pub n2: u32,
}

impl ChannelIndices {
    pub fn new(l1: u32, l2: u32, mu1: u32, mu2: u32, n1: u32, n2: u32) -> Self {
        Self { l1, l2, mu1, mu2, n1, n2 }
    }

    /// (n1 ↔ n2), (μ1 ↔ μ2), (l1 ↔ l2).
    pub fn swapped(&self) -> Self {
        Self { l1: self.l2, l2: self.l1, mu1: self.mu2, mu2: self.mu1, n1: self.n2, n2: self.n1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairGeometry {
    pub rho: ExtReal,
    pub tau: ExtReal,
    pub lam: ExtReal,
}

impl PairGeometry {
    pub fn new(rho: ExtReal, tau: ExtReal, lam: ExtReal) -> Result<Self> {
        if !(rho > 0) {
            return Err(Error::Domain("rho must be > 0".into()));
        }
        if !(-1..=1).contains(&tau) || !(-1..=1).contains(&lam) {
            return Err(Error::Domain("tau and lambda must lie in [-1, 1]".into()));
        }
        Ok(Self { rho, tau, lam })
    }
}

/// (r12², r13², r23²).
pub fn pair_distances(g: &PairGeometry, ctx: &PrecisionContext) -> (ExtReal, ExtReal, ExtReal) {
    let bits = ctx.work_bits() + 8;
    let rho2 = Float::with_val(bits, g.rho.square_ref());
    let r12 = Float::with_val(bits, &rho2 * Float::with_val(bits, &g.tau + 1u32));
    let root = sqrt_one_minus_sq(&g.tau, bits) * Float::with_val(bits, 3u32).sqrt();
    let cross = Float::with_val(bits, &g.lam * &root);
    let base = Float::with_val(bits, 2u32 - Float::with_val(bits, &g.tau));
    let half = Float::with_val(bits, &rho2 / 2u32);
    let r13 = Float::with_val(bits, &base + &cross) * &half;
    let r23 = Float::with_val(bits, &base - &cross) * &half;
    (ctx.round(&r12), ctx.round(&r13), ctx.round(&r23))
}

fn sqrt_one_minus_sq(t: &ExtReal, bits: u32) -> ExtReal {
    let one_m = Float::with_val(bits, 1u32 - Float::with_val(bits, t));
    let one_p = Float::with_val(bits, t + 1u32);
    (one_m * one_p).max(&Float::new(bits)).sqrt()
}

/// (γ, β, κ) at τ for one Gaussian channel.
pub fn channel_params(
    ch: &PotentialChannel,
    alpha: &ExtReal,
    tau: &ExtReal,
    ctx: &PrecisionContext,
) -> Result<(ExtReal, ExtReal, ExtReal)> {
    if !(*tau >= -1 && *tau <= 1) {
        return Err(Error::Domain("tau must lie in [-1, 1]".into()));
    }
    if !(*alpha > 0) {
        return Err(Error::Domain("alpha must be > 0".into()));
    }
    let bits = ctx.work_bits() + 8;
    let s = Float::with_val(bits, &ch.zeta / Float::with_val(bits, alpha.square_ref()));
    let (g, b, k) = strength_params(&s, tau, bits);
    Ok((ctx.round(&g), ctx.round(&b), ctx.round(&k)))
}

/// (γ, β, κ) at τ for reduced strength s = ζ/α².
fn strength_params(s: &ExtReal, tau: &ExtReal, bits: u32) -> (ExtReal, ExtReal, ExtReal) {
    let gamma = Float::with_val(bits, s * Float::with_val(bits, tau + 1u32));
    let beta = Float::with_val(bits, s * Float::with_val(bits, 1u32 - Float::with_val(bits, tau / 2u32)));
    let root = sqrt_one_minus_sq(tau, bits) * Float::with_val(bits, 3u32).sqrt();
    let kappa = Float::with_val(bits, s * root) / 2u32;
    (gamma, beta, kappa)
}

/// Converged value of one outer τ-quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadOutcome {
    pub value: ExtReal,
    /// |Q_{2n} - Q_n| at the last doubling.
    pub change: ExtReal,
    /// Σ w |f| at the final order, the scale `change` is compared against.
    pub magnitude: ExtReal,
    pub order: u32,
    pub converged: bool,
}

/// Batched evaluator that reuses Gauss–Jacobi rules and, for I₃, the table
/// of Bessel–Gaussian kernels at each τ-node across all requested channels.
#[derive(Debug)]
pub struct MatrixElementEngine {
    ctx: PrecisionContext,
    k: u32,
    rules: HashMap<(u32, u32, u32), GaussRule>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum I3Weight {
    /// (1-τ²)
    Even,
    /// (1-τ²)^{3/2}; the integrand is divided by √(1-τ²)
    Odd,
}

impl MatrixElementEngine {
    pub fn new(ctx: &PrecisionContext) -> Self {
        Self { ctx: ctx.clone(), k: DEFAULT_K, rules: HashMap::new() }
    }

    pub fn with_k(mut self, k: u32) -> Self {
        self.k = k;
        self
    }

    pub fn ctx(&self) -> &PrecisionContext {
        &self.ctx
    }

    /// I₂ for every channel at reduced strength s = ζ/α².
    pub fn i2_batch(&mut self, channels: &[ChannelIndices], strength: &ExtReal) -> Result<Vec<QuadOutcome>> {
        let bits = self.ctx.work_bits();
        let k = self.k;
        let mut groups: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
        for (i, ch) in channels.iter().enumerate() {
            groups.entry((ch.l1, ch.l2)).or_default().push(i);
        }
        let mut keys: Vec<_> = groups.keys().copied().collect();
        keys.sort_unstable();
        let max_n = channels.iter().map(|c| c.n1 + c.n2).max().unwrap_or(0);
        let lag: HashMap<(u32, u32), Vec<Float>> = channels
            .iter()
            .map(|c| ((c.n1, c.n2), combined(k, c.n1, c.n2, bits)))
            .collect();
        let mut result: Vec<Option<QuadOutcome>> = vec![None; channels.len()];
        for key in keys {
            let members = &groups[&key];
            let (a2, b2) = (2 * key.0 + 1, 2 * key.1 + 1);
            let ctx = self.ctx.clone();
            let outcomes = doubling(&mut self.rules, &self.ctx, a2, b2, members.len(), |tau, active| {
                let (gamma, _, _) = strength_params(strength, tau, bits + 8);
                let js: Vec<Float> = (0..=max_n)
                    .map(|d| j_integral(&ctx.int(i64::from(k + d)), &gamma, &ctx))
                    .collect::<Result<_>>()?;
                let mut vals = Vec::with_capacity(active.len());
                for &a in active {
                    let ch = &channels[members[a]];
                    let coeffs = &lag[&(ch.n1, ch.n2)];
                    let mut l = Float::new(bits);
                    for (d, c) in coeffs.iter().enumerate() {
                        l += Float::with_val(bits, c * &js[d]);
                    }
                    let p1 = jacobi_at(&ctx, ch.mu1, a2, b2, tau)?;
                    let p2 = jacobi_at(&ctx, ch.mu2, a2, b2, tau)?;
                    vals.push(l * p1 * p2);
                }
                Ok(vals)
            })?;
            for (a, o) in outcomes.into_iter().enumerate() {
                result[members[a]] = Some(o);
            }
        }
        Ok(result.into_iter().map(|o| o.expect("every channel grouped")).collect())
    }

    /// I₃ for every channel at reduced strength s = ζ/α². Channels with odd
    /// l1 + l2 use the weight (1-τ²)^{3/2}: their ℬ carries one power of κ,
    /// which is proportional to √(1-τ²), so the rule absorbs it exactly.
    pub fn i3_batch(&mut self, channels: &[ChannelIndices], strength: &ExtReal) -> Result<Vec<QuadOutcome>> {
        let bits = self.ctx.work_bits();
        let k = self.k;
        let mut result: Vec<Option<QuadOutcome>> = vec![None; channels.len()];
        for class in [I3Weight::Even, I3Weight::Odd] {
            let members: Vec<usize> = (0..channels.len())
                .filter(|&i| ((channels[i].l1 + channels[i].l2) % 2 == 1) == (class == I3Weight::Odd))
                .collect();
            if members.is_empty() {
                continue;
            }
            let w2 = if class == I3Weight::Odd { 3 } else { 2 };
            let ctx = self.ctx.clone();
            let jac = |deg: u32, l: u32, x: &ExtReal| jacobi_at(&ctx, deg, 2 * l + 1, 2 * l + 1, x);
            let mut cache: HashMap<(u32, u32), Float> = HashMap::new();
            let node_fn = |tau: &ExtReal, active: &[usize]| -> Result<Vec<ExtReal>> {
                let (_, beta, kappa) = strength_params(strength, tau, bits + 8);
                let mut table = KernelTable::new(&beta, &kappa)?;
                let scale = if class == I3Weight::Odd { sqrt_one_minus_sq(tau, bits + 8).recip() } else { Float::with_val(bits, 1) };
                cache.clear();
                let mut vals = Vec::with_capacity(active.len());
                for &a in active {
                    let ch = &channels[members[a]];
                    let b = table.b_kernel(k, ch.n1, ch.n2, ch.l1, ch.l2, &ctx)?;
                    let mut jv = |deg: u32, l: u32| -> Result<Float> {
                        if let Some(v) = cache.get(&(deg, l)) {
                            return Ok(v.clone());
                        }
                        let v = jac(deg, l, tau)?;
                        cache.insert((deg, l), v.clone());
                        Ok(v)
                    };
                    let p1 = jv(ch.mu1, ch.l1)?;
                    let p2 = jv(ch.mu2, ch.l2)?;
                    vals.push(b * p1 * p2 * &scale);
                }
                Ok(vals)
            };
            let outcomes = doubling(&mut self.rules, &self.ctx, w2, w2, members.len(), node_fn)?;
            for (a, o) in outcomes.into_iter().enumerate() {
                result[members[a]] = Some(o);
            }
        }
        Ok(result.into_iter().map(|o| o.expect("every channel classified")).collect())
    }
}

fn combined(k: u32, n1: u32, n2: u32, bits: u32) -> Vec<Float> {
    let c1 = laguerre_coeffs(n1, k);
    let c2 = laguerre_coeffs(n2, k);
    let mut out = vec![rug::Rational::new(); (n1 + n2 + 1) as usize];
    for (i, a) in c1.iter().enumerate() {
        for (j, b) in c2.iter().enumerate() {
            out[i + j] += rug::Rational::from(a * b);
        }
    }
    out.iter().map(|r| Float::with_val(bits, r)).collect()
}

fn rule_for(rules: &mut HashMap<(u32, u32, u32), GaussRule>, ctx: &PrecisionContext, a2: u32, b2: u32, n: u32) -> Result<GaussRule> {
    if let Some(r) = rules.get(&(a2, b2, n)) {
        return Ok(r.clone());
    }
    let r = gauss_jacobi(n, &ctx.ratio(i64::from(a2), 2), &ctx.ratio(i64::from(b2), 2), ctx)?;
    rules.insert((a2, b2, n), r.clone());
    Ok(r)
}

fn jacobi_at(ctx: &PrecisionContext, deg: u32, a2: u32, b2: u32, x: &ExtReal) -> Result<ExtReal> {
    let fam = PolyFamily::Jacobi { a: ctx.ratio(i64::from(a2), 2), b: ctx.ratio(i64::from(b2), 2) };
    eval_poly(&fam, deg, x, ctx)
}

/// Runs the order-doubling sequence for a group of channels sharing one rule
/// for the weight (1-τ)^{a2/2} (1+τ)^{b2/2}. `node_values(τ, active)` returns
/// the integrand without the weight for each still-active channel.
fn doubling<F>(
    rules: &mut HashMap<(u32, u32, u32), GaussRule>,
    ctx: &PrecisionContext,
    a2: u32,
    b2: u32,
    count: usize,
    mut node_values: F,
) -> Result<Vec<QuadOutcome>>
where
    F: FnMut(&ExtReal, &[usize]) -> Result<Vec<ExtReal>>,
{
    let bits = ctx.work_bits();
    let tol = ctx.target_rel_tol().clone();
    let mut prev: Vec<Option<ExtReal>> = vec![None; count];
    let mut out: Vec<Option<QuadOutcome>> = vec![None; count];
    let mut last: Vec<Option<QuadOutcome>> = vec![None; count];
    for &n in ORDERS.iter() {
        let active: Vec<usize> = (0..count).filter(|&i| out[i].is_none()).collect();
        if active.is_empty() {
            break;
        }
        let rule = rule_for(rules, ctx, a2, b2, n)?;
        let mut sums = vec![Float::new(bits); active.len()];
        let mut mags = vec![Float::new(bits); active.len()];
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let vals = node_values(x, &active)?;
            for (j, v) in vals.into_iter().enumerate() {
                let t = v * w;
                mags[j] += Float::with_val(bits, t.abs_ref());
                sums[j] += t;
            }
        }
        for (j, &i) in active.iter().enumerate() {
            let value = sums[j].clone();
            let change = match &prev[i] {
                Some(p) => Float::with_val(bits, &value - p).abs(),
                None => Float::with_val(bits, rug::float::Special::Infinity),
            };
            let converged = change <= Float::with_val(bits, &mags[j] * &tol);
            let o = QuadOutcome { value: value.clone(), change, magnitude: mags[j].clone(), order: n, converged };
            if converged {
                out[i] = Some(o);
            } else {
                last[i] = Some(o);
            }
            prev[i] = Some(value);
        }
    }
    Ok(out.into_iter().zip(last).map(|(o, l)| o.or(l).expect("at least one order ran")).collect())
}

fn strength(ch: &PotentialChannel, alpha: &ExtReal, ctx: &PrecisionContext) -> Result<ExtReal> {
    if !(*alpha > 0) || !(ch.zeta > 0) {
        return Err(Error::Domain("alpha and zeta must be > 0".into()));
    }
    let bits = ctx.work_bits() + 8;
    Ok(Float::with_val(bits, &ch.zeta / Float::with_val(bits, alpha.square_ref())))
}

fn single(o: QuadOutcome, ctx: &PrecisionContext) -> Result<ExtReal> {
    if !o.converged {
        return Err(Error::Unconverged { estimate: o.value.to_f64(), error: o.change.to_f64() });
    }
    Ok(ctx.round(&o.value))
}

/// I₂ = ∫₋₁¹ (1-τ)^{l1+1/2} (1+τ)^{l2+1/2} P_{μ1} P_{μ2} ℒ^{(5)}_{n1,n2}(γ(τ)) dτ.
pub fn i2_integral(ch: &ChannelIndices, pot: &PotentialChannel, alpha: &ExtReal, ctx: &PrecisionContext) -> Result<ExtReal> {
    let s = strength(pot, alpha, ctx)?;
    let o = MatrixElementEngine::new(ctx).i2_batch(std::slice::from_ref(ch), &s)?.remove(0);
    single(o, ctx)
}

/// I₃ = ∫₋₁¹ (1-τ²) P^{(l1+1/2,l1+1/2)}_{μ1} P^{(l2+1/2,l2+1/2)}_{μ2} ℬ^{(5)}_{n1,n2}(β(τ), κ(τ)) dτ.
pub fn i3_integral(ch: &ChannelIndices, pot: &PotentialChannel, alpha: &ExtReal, ctx: &PrecisionContext) -> Result<ExtReal> {
    let s = strength(pot, alpha, ctx)?;
    let o = MatrixElementEngine::new(ctx).i3_batch(std::slice::from_ref(ch), &s)?.remove(0);
    single(o, ctx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelContribution {
    pub amplitude: ExtReal,
    pub zeta: ExtReal,
    pub i2: ExtReal,
    pub i3: ExtReal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixElement {
    /// Σ_k A_k I₂(ζ_k), the (1,2) pair.
    pub pair12: ExtReal,
    /// Σ_k A_k I₃(ζ_k), the (1,3) and (2,3) pairs.
    pub pair13_23: ExtReal,
    pub breakdown: Vec<ChannelContribution>,
}

/// Channel sum of a Gaussian potential, unnormalized.
pub fn potential_matrix_element(pot: &GaussianPotential, ch: &ChannelIndices, ctx: &PrecisionContext) -> Result<MatrixElement> {
    let mut engine = MatrixElementEngine::new(ctx);
    let mut v = potential_matrix_elements(&mut engine, pot, std::slice::from_ref(ch))?;
    Ok(v.remove(0))
}

/// [`potential_matrix_element`] for many index sets, sharing rules and kernel tables.
pub fn potential_matrix_elements(
    engine: &mut MatrixElementEngine,
    pot: &GaussianPotential,
    channels: &[ChannelIndices],
) -> Result<Vec<MatrixElement>> {
    pot.validate()?;
    let ctx = engine.ctx().clone();
    let bits = ctx.work_bits();
    let mut out: Vec<MatrixElement> = channels
        .iter()
        .map(|_| MatrixElement { pair12: ctx.zero(), pair13_23: ctx.zero(), breakdown: Vec::new() })
        .collect();
    for pc in &pot.channels {
        let s = strength(pc, &pot.alpha, &ctx)?;
        let i2 = engine.i2_batch(channels, &s)?;
        let i3 = engine.i3_batch(channels, &s)?;
        for ((me, a), b) in out.iter_mut().zip(i2).zip(i3) {
            let a = single(a, &ctx)?;
            let b = single(b, &ctx)?;
            me.pair12 += Float::with_val(bits, &pc.amplitude * &a);
            me.pair13_23 += Float::with_val(bits, &pc.amplitude * &b);
            me.breakdown.push(ChannelContribution { amplitude: pc.amplitude.clone(), zeta: pc.zeta.clone(), i2: a, i3: b });
        }
    }
    Ok(out)
}
