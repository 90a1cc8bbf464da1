//! Parameter lists: scalars, comma lists and `a:b:step` ranges.

use rug::{Integer, Rational};

use crate::CliError;

/// An exact decimal value and how to print it.
#[derive(Debug, Clone, PartialEq)]
pub struct GridValue {
    pub exact: Rational,
    pub text: String,
}

/// Parses a decimal or scientific numeral exactly.
pub fn parse_decimal(s: &str) -> Option<Rational> {
    let s = s.trim();
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((a, b)) => (a, b),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all = format!("{int_part}{frac_part}");
    let num: Integer = all.parse().ok()?;
    let scale = exp - frac_part.len() as i32;
    let pow10 = |k: u32| Integer::from(Integer::u_pow_u(10, k));
    let mut r = if scale >= 0 {
        Rational::from(num * pow10(scale as u32))
    } else {
        Rational::from((num, pow10((-scale) as u32)))
    };
    if neg {
        r = -r;
    }
    Some(r)
}

/// Exact decimal rendering of a rational whose denominator divides a power of ten.
fn render_decimal(r: &Rational) -> String {
    let den = r.denom().clone();
    let mut k = 0u32;
    let pow10 = |k: u32| Integer::from(Integer::u_pow_u(10, k));
    while !pow10(k).is_divisible(&den) {
        k += 1;
    }
    let scaled = r.numer() * (pow10(k) / &den);
    let neg = scaled < 0;
    let mut digits = scaled.abs().to_string();
    if k > 0 {
        while digits.len() <= k as usize {
            digits.insert(0, '0');
        }
        digits.insert(digits.len() - k as usize, '.');
        let trimmed = digits.trim_end_matches('0').trim_end_matches('.');
        digits = trimmed.to_string();
    }
    if neg {
        format!("-{digits}")
    } else {
        digits
    }
}

fn item(s: &str, flag: &str) -> Result<GridValue, CliError> {
    let exact = parse_decimal(s).ok_or_else(|| CliError::Usage(format!("--{flag}: '{s}' is not a number")))?;
    Ok(GridValue { exact, text: s.trim().to_string() })
}

/// Expands a flag value into its grid points, in the order given.
pub fn parse_list(spec: &str, flag: &str) -> Result<Vec<GridValue>, CliError> {
    let mut out = Vec::new();
    for part in spec.split(',') {
        let fields: Vec<&str> = part.split(':').collect();
        match fields.len() {
            1 => out.push(item(fields[0], flag)?),
            3 => {
                let a = item(fields[0], flag)?.exact;
                let b = item(fields[1], flag)?.exact;
                let step = item(fields[2], flag)?.exact;
                if step <= 0 {
                    return Err(CliError::Usage(format!("--{flag}: range step must be > 0 in '{part}'")));
                }
                let mut x = a;
                while x <= b {
                    out.push(GridValue { text: render_decimal(&x), exact: x.clone() });
                    x += &step;
                    if out.len() > 1_000_000 {
                        return Err(CliError::Usage(format!("--{flag}: range '{part}' is too long")));
                    }
                }
            }
            _ => return Err(CliError::Usage(format!("--{flag}: cannot read '{part}' (use x, x,y or a:b:step)"))),
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!("--{flag}: empty grid")));
    }
    Ok(out)
}

/// Nonnegative integer lists, for indices and m.
pub fn parse_indices(spec: &str, flag: &str) -> Result<Vec<u32>, CliError> {
    parse_list(spec, flag)?
        .into_iter()
        .map(|v| {
            if v.exact.denom() != &1 || v.exact < 0 || v.exact.numer() > &u32::MAX {
                return Err(CliError::Usage(format!("--{flag}: '{}' is not a nonnegative integer", v.text)));
            }
            Ok(v.exact.numer().to_u32().expect("range checked"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals() {
        assert_eq!(parse_decimal("0.1"), Some(Rational::from((1, 10))));
        assert_eq!(parse_decimal("-2.5e-3"), Some(Rational::from((-1, 400))));
        assert_eq!(parse_decimal("3E2"), Some(Rational::from(300)));
        assert_eq!(parse_decimal(".5"), Some(Rational::from((1, 2))));
        assert_eq!(parse_decimal("1.2.3"), None);
        assert_eq!(parse_decimal("abc"), None);
        assert_eq!(parse_decimal(""), None);
    }

    #[test]
    fn lists_and_ranges() {
        let v = parse_list("0.1,0.5,0.9", "kappa").unwrap();
        assert_eq!(v.iter().map(|g| g.text.as_str()).collect::<Vec<_>>(), ["0.1", "0.5", "0.9"]);
        let v = parse_list("0:1:0.25", "kappa").unwrap();
        assert_eq!(v.iter().map(|g| g.text.as_str()).collect::<Vec<_>>(), ["0", "0.25", "0.5", "0.75", "1"]);
        assert_eq!(parse_indices("0:6:1", "m").unwrap(), (0..=6).collect::<Vec<_>>());
        assert!(parse_indices("1.5", "m").is_err());
        assert!(parse_list("1:0:0", "p").is_err());
        assert!(parse_list("1:2", "p").is_err());
    }
}
