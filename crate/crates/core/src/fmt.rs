//! Locale-independent numeric formatting for the CSV exports.

/// Formats `x` with `digits` significant digits in the style of C's `%g`:
/// fixed notation for moderate exponents, scientific otherwise, trailing
/// zeros removed.
pub fn significant(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exponent) = sci.split_once('e').expect("scientific format has exponent");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if exponent < -5 || exponent >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exponent)
    } else {
        let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::significant;

    #[test]
    fn fixed_range() {
        assert_eq!(significant(7.940_594_059_405_94, 9), "7.94059406");
        assert_eq!(significant(0.95, 6), "0.95");
        assert_eq!(significant(-12.5, 6), "-12.5");
        assert_eq!(significant(100.0, 6), "100");
        assert_eq!(significant(0.000_123_456_78, 6), "0.000123457");
        assert_eq!(significant(0.0, 9), "0");
    }

    #[test]
    fn scientific_range() {
        assert_eq!(significant(1.5e-7, 6), "1.5e-7");
        assert_eq!(significant(1_234_567.0, 6), "1.23457e6");
        assert_eq!(significant(999_999.7, 6), "1e6");
        assert_eq!(significant(f64::NAN, 6), "NaN");
    }
}
