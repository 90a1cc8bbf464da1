//! Tables rendered as CSV or JSON with string numerals.

use std::fmt::Write as _;

use hyperkernel::ExtReal;
use rug::float::Round;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut s = String::new();
                let line = |cells: &[String]| cells.iter().map(|c| csv_cell(c)).collect::<Vec<_>>().join(",");
                writeln!(s, "{}", line(&self.headers)).expect("string write");
                for r in &self.rows {
                    writeln!(s, "{}", line(r)).expect("string write");
                }
                s
            }
            Format::Json => {
                let rows: Vec<serde_json::Value> = self
                    .rows
                    .iter()
                    .map(|r| {
                        let map: serde_json::Map<String, serde_json::Value> =
                            self.headers.iter().cloned().zip(r.iter().map(|c| serde_json::Value::String(c.clone()))).collect();
                        serde_json::Value::Object(map)
                    })
                    .collect();
                let mut s = serde_json::to_string_pretty(&rows).expect("strings serialize");
                s.push('\n');
                s
            }
        }
    }
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

/// Significant decimal digits that round-trip a value of `bits` precision.
pub fn digits_for(bits: u32) -> usize {
    (f64::from(bits) * std::f64::consts::LOG10_2).ceil() as usize + 1
}

/// Scientific rendering with a fixed number of significant digits.
pub fn fmt_real(x: &ExtReal, digits: usize) -> String {
    if x.is_zero() {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let (neg, mantissa, exp) = x.to_sign_string_exp_round(10, Some(digits), Round::Nearest);
    let exp = exp.expect("finite nonzero value has an exponent") - 1;
    let (head, tail) = mantissa.split_at(1);
    format!("{}{}.{}e{}", if neg { "-" } else { "" }, head, tail, exp)
}

/// Short rendering for diagnostics such as error estimates.
pub fn fmt_short(x: &ExtReal) -> String {
    fmt_real(x, 3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::Float;

    #[test]
    fn real_formatting() {
        assert_eq!(fmt_real(&Float::with_val(64, 1.5), 4), "1.500e0");
        assert_eq!(fmt_real(&Float::with_val(64, -0.00125), 3), "-1.25e-3");
        assert_eq!(fmt_real(&Float::new(64), 5), "0");
        assert_eq!(digits_for(256), 79);
    }

    #[test]
    fn csv_and_json() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        assert_eq!(t.render(Format::Csv), "a,b\n1,\"x,y\"\n");
        let j: serde_json::Value = serde_json::from_str(&t.render(Format::Json)).unwrap();
        assert_eq!(j[0]["a"], "1");
        assert_eq!(j[0]["b"], "x,y");
    }
}
