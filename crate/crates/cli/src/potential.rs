//! Potential model files:
//!
//! ```text
//! # two-Gaussian model
//! alpha = 1.0
//! channel = {A = 2.5, zeta = 0.3}
//! channel = {A = -1.25e1, zeta = 0.05}
//! ```
//!
//! Reals are read exactly and rounded once to the working precision.

use hyperkernel::matelem::{GaussianPotential, PotentialChannel};
use hyperkernel::PrecisionContext;
use rug::Float;

use crate::grid::parse_decimal;
use crate::CliError;

fn err(line: usize, field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Parse(format!("line {line}, field '{field}': {msg}"))
}

fn real(text: &str, line: usize, field: &str, ctx: &PrecisionContext) -> Result<Float, CliError> {
    let r = parse_decimal(text).ok_or_else(|| err(line, field, format!("'{}' is not a number", text.trim())))?;
    Ok(Float::with_val(ctx.work_bits(), &r))
}

pub fn parse_potential(src: &str, ctx: &PrecisionContext) -> Result<GaussianPotential, CliError> {
    let mut alpha: Option<Float> = None;
    let mut channels = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let (key, value) = text.split_once('=').ok_or_else(|| err(line, text, "expected 'key = value'"))?;
        match key.trim() {
            "alpha" => {
                if alpha.is_some() {
                    return Err(err(line, "alpha", "given twice"));
                }
                let a = real(value, line, "alpha", ctx)?;
                if !(a > 0) {
                    return Err(err(line, "alpha", "must be > 0"));
                }
                alpha = Some(a);
            }
            "channel" => {
                let body = value
                    .trim()
                    .strip_prefix('{')
                    .and_then(|v| v.strip_suffix('}'))
                    .ok_or_else(|| err(line, "channel", "expected {A = <real>, zeta = <real>}"))?;
                let (mut amp, mut zeta) = (None, None);
                for entry in body.split(',') {
                    let (k, v) = entry.split_once('=').ok_or_else(|| err(line, entry.trim(), "expected 'name = value'"))?;
                    let slot = match k.trim() {
                        "A" => &mut amp,
                        "zeta" => &mut zeta,
                        other => return Err(err(line, other, "unknown channel field (expected A or zeta)")),
                    };
                    if slot.is_some() {
                        return Err(err(line, k.trim(), "given twice"));
                    }
                    *slot = Some(real(v, line, k.trim(), ctx)?);
                }
                let amplitude = amp.ok_or_else(|| err(line, "A", "missing"))?;
                let zeta = zeta.ok_or_else(|| err(line, "zeta", "missing"))?;
                if !(zeta > 0) {
                    return Err(err(line, "zeta", "must be > 0"));
                }
                channels.push(PotentialChannel { amplitude, zeta });
            }
            other => return Err(err(line, other, "unknown key (expected alpha or channel)")),
        }
    }
    let alpha = alpha.ok_or_else(|| CliError::Parse("missing 'alpha'".into()))?;
    if channels.is_empty() {
        return Err(CliError::Parse("no 'channel' entries".into()));
    }
    GaussianPotential::new(alpha, channels).map_err(|e| CliError::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    #[test]
    fn reads_model() {
        let src = "# model\nalpha = 1.5\nchannel = {A = 2, zeta = 0.3}\n\nchannel = { zeta = 1e-1 , A = -0.100000000000000000000000000000000000001 }\n";
        let pot = parse_potential(src, &ctx()).unwrap();
        assert_eq!(pot.alpha.to_f64(), 1.5);
        assert_eq!(pot.channels.len(), 2);
        let a = &pot.channels[1].amplitude;
        // more digits than a double carries survive
        assert!(*a != -0.1 && (a.to_f64() + 0.1).abs() < 1e-30);
    }

    #[test]
    fn diagnostics() {
        let c = ctx();
        let msg = |s: &str| parse_potential(s, &c).unwrap_err().to_string();
        assert!(msg("alpha = 1\nchannel = {A = 1, zeta = x}").contains("line 2, field 'zeta'"));
        assert!(msg("alpha = 1\nchannel = {A = 1}").contains("field 'zeta': missing"));
        assert!(msg("alpha = 1\nchannel = {A = 1, zeta = -2}").contains("must be > 0"));
        assert!(msg("beta = 1").contains("line 1, field 'beta'"));
        assert!(msg("alpha = 1").contains("no 'channel'"));
        assert!(msg("channel = {A = 1, zeta = 1}").contains("missing 'alpha'"));
        assert!(msg("alpha = 1\nchannel = A=1").contains("line 2"));
    }
}
