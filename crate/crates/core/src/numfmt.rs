//! Decimal formatting helpers shared by the CSV and text writers.

/// Formats `x` with at most `digits` significant digits, `%g` style.
///
/// With `digits = 17` the output parses back to the identical `f64`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mantissa),
    };
    if exp < -5 || exp >= digits as i32 {
        let m = trim_fraction(mantissa);
        return format!("{sign}{m}e{exp}");
    }
    let raw: String = mantissa.chars().filter(|c| *c != '.').collect();
    let body = if exp < 0 {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), raw)
    } else {
        let point = exp as usize + 1;
        if point >= raw.len() {
            format!("{}{}", raw, "0".repeat(point - raw.len()))
        } else {
            format!("{}.{}", &raw[..point], &raw[point..])
        }
    };
    format!("{sign}{}", trim_fraction(&body))
}

/// Lossless 17-significant-digit representation.
pub fn format_f64(x: f64) -> String {
    format_sig(x, 17)
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
