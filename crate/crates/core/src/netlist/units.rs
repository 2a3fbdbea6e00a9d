//! Engineering-notation numbers shared by the netlist, the config file and
//! the CLI flags.

/// Decimal exponent of an engineering suffix. `meg` must be tested before `m`.
fn suffix_exponent(rest: &str) -> Option<i32> {
    let lower = rest.to_ascii_lowercase();
    if lower.starts_with("meg") {
        return Some(6);
    }
    if rest.starts_with('µ') || rest.starts_with('μ') {
        return Some(-6);
    }
    Some(match lower.chars().next() {
        None => 0,
        Some('t') => 12,
        Some('g') => 9,
        Some('k') => 3,
        Some('m') => -3,
        Some('u') => -6,
        Some('n') => -9,
        Some('p') => -12,
        Some('f') => -15,
        // any other trailing letters are a unit name ("V", "ohm", "s")
        Some(c) if c.is_alphabetic() => 0,
        Some(_) => return None,
    })
}

/// Length of the longest prefix of `s` that is a decimal float literal.
fn mantissa_len(s: &str) -> usize {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let digits_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i < b.len() && b[i] == b'.' {
        i += 1;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i == digits_start || (i == digits_start + 1 && b[digits_start] == b'.') {
        return 0;
    }
    // exponent only if followed by digits, so that "1e" stays unit-like
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        let exp_start = j;
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp_start {
            i = j;
        }
    }
    i
}

/// Parses `10k`, `1.5meg`, `10uF`, `2.2e-3`, `100n`. Returns `None` when
/// the token is not a number.
pub fn parse_number(token: &str) -> Option<f64> {
    let token = token.trim();
    let n = mantissa_len(token);
    if n == 0 {
        return None;
    }
    let mantissa: f64 = token[..n].parse().ok()?;
    let rest = &token[n..];
    if !rest.chars().all(char::is_alphabetic) {
        return None;
    }
    let exp = suffix_exponent(rest)?;
    if exp == 0 {
        return Some(mantissa);
    }
    // shift the decimal exponent rather than multiply, so "10u" is exactly 1e-5
    let lit = &token[..n];
    let (digits, own) = match lit.find(['e', 'E']) {
        Some(k) => (&lit[..k], lit[k + 1..].parse::<i32>().ok()?),
        None => (lit, 0),
    };
    format!("{digits}e{}", own + exp).parse().ok()
}

/// Formats a value so that [`parse_number`] reads back the identical `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v:e}")
}

/// Human-friendly engineering rendering used in reports (`83.643m`, `10k`).
pub fn format_eng(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.digits$}");
    }
    const TABLE: [(f64, &str); 9] = [
        (1e12, "T"),
        (1e9, "G"),
        (1e6, "meg"),
        (1e3, "k"),
        (1.0, ""),
        (1e-3, "m"),
        (1e-6, "u"),
        (1e-9, "n"),
        (1e-12, "p"),
    ];
    let mag = v.abs();
    for (scale, suffix) in TABLE {
        if mag >= scale {
            return format!("{:.digits$}{suffix}", v / scale);
        }
    }
    format!("{:.digits$}f", v / 1e-15)
}
