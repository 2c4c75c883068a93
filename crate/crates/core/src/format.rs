//! Human-readable number formatting for tables.

/// Six significant digits, trailing zeros kept (`3.25000`, `0.346154`).
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.00000".to_string();
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').expect("scientific format") + 1..].parse().expect("exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

/// Six significant digits with trailing zeros dropped (`4`, `2.66667`).
pub fn compact(x: f64) -> String {
    let s = sig6(x);
    match s.find('e') {
        Some(pos) => {
            let (mantissa, exp) = s.split_at(pos);
            format!("{}{exp}", trim_zeros(mantissa))
        }
        None => trim_zeros(&s).to_string(),
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
