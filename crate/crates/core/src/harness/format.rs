use std::io::Write;

/// Significant digits in every floating-point CSV cell.
pub const SIG_DIGITS: usize = 9;

/// Shortest `%.9g`-style rendering: fixed notation for decimal exponents in
/// `[-4, 9)`, scientific otherwise, trailing zeros dropped.
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..SIG_DIGITS as i32).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), sign, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Writes a header line and comma-joined rows.
pub fn write_csv<W, R, C>(mut out: W, header: &[&str], rows: R) -> std::io::Result<()>
where
    W: Write,
    R: IntoIterator<Item = C>,
    C: AsRef<[String]>,
{
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.as_ref().join(","))?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333"),
            (std::f64::consts::PI, "3.14159265"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (99999999.95, "100000000"),
            (9.9999999996, "10"),
            (f64::INFINITY, "inf"),
        ];
        for (v, want) in cases {
            assert_eq!(fmt_sig(v), want, "{v}");
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &["a", "b"], [vec!["1".to_string(), "2".to_string()]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n1,2\n");
    }
}
