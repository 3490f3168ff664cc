//! Plain-text vector and matrix files, and fixed-significance float
//! formatting shared by the CSV writers.
//!
//! Vector file: first line `n`, then `n` floats. Matrix file: first line
//! `rows cols`, then `rows` lines of `cols` floats. Floats are written with
//! 17 significant digits so files round-trip exactly; readers accept any
//! whitespace layout after the header line.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::measurements::Matrix;

/// Formats `x` with `digits` significant digits in the style of C's `%g`
/// (shortest of fixed and exponent notation, trailing zeros removed).
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Exact-round-trip float text.
fn fmt_exact(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_vector(v: &[f64]) -> String {
    let mut s = format!("{}\n", v.len());
    for x in v {
        writeln!(s, "{}", fmt_exact(*x)).unwrap();
    }
    s
}

pub fn format_matrix(m: &Matrix) -> String {
    let mut s = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|x| fmt_exact(*x)).collect();
        writeln!(s, "{}", line.join(" ")).unwrap();
    }
    s
}

fn parse_floats<'a>(tokens: impl Iterator<Item = &'a str>) -> Result<Vec<f64>> {
    tokens
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad float `{t}`")))
        })
        .collect()
}

fn split_header(text: &str) -> Result<(Vec<usize>, &str)> {
    let text = text.trim_start();
    let (head, body) = text.split_once('\n').unwrap_or((text, ""));
    let dims = head
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad header field `{t}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((dims, body))
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let (dims, body) = split_header(text)?;
    let [n] = dims[..] else {
        return Err(Error::Parse("vector header must be a single length".into()));
    };
    let v = parse_floats(body.split_whitespace())?;
    if v.len() != n {
        return Err(Error::Parse(format!(
            "vector header says {n} entries, found {}",
            v.len()
        )));
    }
    Ok(v)
}

pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let (dims, body) = split_header(text)?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse("matrix header must be `rows cols`".into()));
    };
    let data = parse_floats(body.split_whitespace())?;
    Matrix::from_row_major(rows, cols, data).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_vector(&std::fs::read_to_string(path)?)
}

pub fn write_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    std::fs::write(path, format_vector(v))?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    std::fs::write(path, format_matrix(m))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(0.0, 9), "0");
        assert_eq!(fmt_sig(1.0, 9), "1");
        assert_eq!(fmt_sig(0.5, 9), "0.5");
        assert_eq!(fmt_sig(std::f64::consts::PI, 9), "3.14159265");
        assert_eq!(fmt_sig(1234567890.0, 9), "1.23456789e9");
        assert_eq!(fmt_sig(-2.5e-7, 9), "-2.5e-7");
        assert_eq!(fmt_sig(150.0, 9), "150");
        assert_eq!(fmt_sig(f64::INFINITY, 9), "inf");
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(parse_vector("3\n1 2").is_err());
        assert!(parse_vector("2 2\n1 2 3 4").is_err());
        assert!(parse_vector("2\n1 x").is_err());
        assert!(parse_matrix("2\n1 2").is_err());
        assert!(parse_matrix("2 2\n1 2 3").is_err());
    }

    #[test]
    fn matrix_layout() {
        let m = Matrix::from_row_major(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let text = format_matrix(&m);
        assert!(text.starts_with("2 3\n"));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(parse_matrix(&text).unwrap(), m);
    }

    proptest! {
        #[test]
        fn vectors_round_trip_bit_exactly(v in proptest::collection::vec(-1e300f64..1e300, 0..40)) {
            let back = parse_vector(&format_vector(&v)).unwrap();
            prop_assert_eq!(back, v);
        }

        #[test]
        fn nine_digit_text_is_within_half_ulp_of_nine_digits(x in -1e12f64..1e12) {
            let s = fmt_sig(x, 9);
            let back: f64 = s.parse().unwrap();
            prop_assert!((back - x).abs() <= 5e-9 * x.abs().max(1e-300));
        }
    }
}
