//! Numeric text formatting shared by the CSV writers.

/// Formats `x` with 9 significant digits, dropping trailing zeros.
///
/// Plain notation is used for magnitudes in `[1e-5, 1e9)`, scientific
/// notation otherwise.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    // Round first so that e.g. 9.999999999 picks the right exponent.
    let sci = format!("{x:.8e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let (mantissa, e) = sci.split_at(sci.find('e').unwrap());
        format!("{}{}", trim_zeros(mantissa.to_string()), e)
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

#[cfg(test)]
mod tests {
    use super::sig9;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(1590.0), "1590");
        assert_eq!(sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(sig9(-2.5), "-2.5");
        assert_eq!(sig9(123456789.4), "123456789");
        assert_eq!(sig9(9.9999999999), "10");
        assert_eq!(sig9(1.5e-7), "1.5e-7");
        assert_eq!(sig9(2.0e12), "2e12");
    }

    #[test]
    fn parses_back_within_relative_precision() {
        for &x in &[std::f64::consts::PI, 9.8608, 1e-3 / 7.0, 6.02214076e23] {
            let back: f64 = sig9(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 5e-9, "{x} -> {back}");
        }
    }
}
